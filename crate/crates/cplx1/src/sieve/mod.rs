//! Primes, the W-trick and the GPY majorant.

pub mod cutoff;
pub mod gpy;
pub mod harness;
pub mod local;
pub mod primes;

pub use cutoff::{c_chi2, chi, chi_derivative, sieve_factor_c2, Quadrature};
pub use gpy::{
    gpy_weight_bruteforce, h_rw, lambda_bw, majorization_check, rho, GpyConfig, GpySieve,
    WTrickContext,
};
pub use harness::{correlation_harness, unfolding_oracle};
pub use local::{euler_factor, euler_product, local_alpha, LocalFactorTable};
pub use primes::{factorize, is_prime, mobius, next_prime, primes_up_to, primorial, LpfTable};
