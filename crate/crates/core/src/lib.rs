//! Early-stopped gradient-flow kernel regression on high-dimensional spheres.
//!
//! The crate covers the pieces needed to study how the excess risk of
//! kernel gradient flow scales when the sphere dimension grows with the
//! sample size, d ≍ n^{1/γ}:
//!
//! - [`spectrum`]: Mercer eigenvalues μ_k and multiplicities N(d, k) of
//!   inner-product kernels, by quadrature or in closed form for the NTK;
//! - [`complexity`]: the population and empirical Mendelson fixed points,
//!   stopping times and local Rademacher complexities;
//! - [`entropy`] and [`rates`]: metric entropy, minimax lower bounds and
//!   the theoretical rate curves;
//! - [`regression`]: the gradient-flow estimator in the eigenbasis of the
//!   empirical kernel matrix;
//! - [`harness`]: Monte Carlo rate experiments and their emitters.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

pub mod complexity;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod rates;
pub mod regression;
pub mod seed;
pub mod special;
pub mod spectrum;
pub mod sphere;

pub use error::{Error, Result};
pub use kernels::{gram, phi, GramMatrix, KernelProfile, TaylorSeries};
pub use spectrum::{build_spectrum, Spectrum, SpectrumLevel, WeightedEigenvalues};
pub use sphere::{generate_dataset, make_target, sample_sphere, Dataset, SphereSample, TargetFunction};
