//! Density increments on Bohr sets, and the transfer from primes to dense sets.

mod constants;
mod engine;
mod pipeline;
mod weights;

pub use constants::{Constants, IncrementConstants, TransferenceConstants};
pub use engine::{
    certify_inverse, expansion_work, local_inverse_u2, locate_large_norm, multilinear_expand,
    run_increment, untwist, Case, Expansion, IncrementReport, IncrementState, LargeNorm,
    LocalInverse, Outcome, StepChecks, StepRecord, Untwist,
};
pub use pipeline::{
    transference_pipeline, w_tricked_primes, ExpansionTerm, LevelSetSummary, MainTerm,
    TransferenceReport,
};
pub use weights::{
    average_weight, bad_box_fraction, bohr_measure, build_smoothing, extend_weight, forms_averages,
    gvn_check, level_set, sample_systems, smooth, BadBoxReport, BalancedFn, FormsAverage,
    GvnReport, LevelSetReport, MajorantReport, PseudorandomReport, SmoothingReport,
    TransferenceConfig,
};
