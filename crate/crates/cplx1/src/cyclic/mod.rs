//! Harmonic analysis on Z_M: transforms, Bohr sets and box norms.

pub mod bohr;
pub mod boxnorm;
pub mod fourier;

pub use bohr::BohrSet;
pub use boxnorm::{
    box_inner, box_norm, box_vdc_check, gcs_check, local_u2, local_u2_fourth_twisted,
    regularity_calculus_check, twisted_u2, twisted_u2_fourth, BoxFamily,
};
pub use fourier::{convolve, dft, dft_direct, idft, u2_norm, CyclicFn, Spectrum};
