// Negated float comparisons like !(x > 0.0) are deliberate throughout: they
// treat NaN as out of domain, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Products of independent rectangular complex Ginibre matrices: chain
//! specifications, scaled spectra, limiting radial laws, and a Gamma-product
//! sampling oracle that cross-validates the eigensolver.
//!
//! The library is organized around one pipeline:
//!
//! 1. [`chain_spec`] describes a chain of factor dimensions and its
//!    deterministic statistics (lambda_k, theta_k, F_n, ln G_n, ln a_n).
//! 2. [`sampler`] draws the Ginibre factors, forms the product with per-step
//!    Frobenius normalization, and draws the Gamma-product oracle that has
//!    the same modulus distribution as the spectrum without an eigensolver.
//! 3. [`eigen`] computes all eigenvalues of a scaled product in log-polar
//!    form, backward-stably.
//! 4. [`empirics`] maps moduli through the h_n scaling onto O(1) range and
//!    compares empirical distributions against each other and against limit
//!    laws (KS, Wasserstein-1, angle uniformity, ring coverage).
//! 5. [`limit_law`] represents the three possible limiting radial laws,
//!    evaluates F/F*/densities, and classifies dimension families.
//!
//! All randomness flows through [`rng::TrialRng`], which derives an
//! independent ChaCha stream per (seed, trial, domain, index); results are
//! reproducible under any parallel schedule.

pub mod chain_spec;
pub mod eigen;
pub mod empirics;
pub mod limit_law;
pub mod rng;
pub mod sampler;
pub mod special;

pub use chain_spec::ChainSpec;
pub use limit_law::LimitLaw;
pub use rng::TrialRng;
