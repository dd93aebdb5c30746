//! Linear systems of finite complexity, GPY sieve weights, cyclic Fourier
//! analysis on Bohr sets, and a density-increment engine for counting
//! solutions of translation-invariant systems in dense sets of integers and primes.

pub mod cli;
pub mod cyclic;
pub mod error;
pub mod increment;
pub mod linsys;
pub mod patterns;
pub mod sieve;

pub use error::{Error, Result};
