//! Geodesics and Riemannian logarithms on Stiefel, Grassmann and flag manifolds.
//!
//! The Stiefel manifold `St(p, n)` carries the two-parameter metric family
//!
//! ```text
//! <w1, w2>_Y = α₀ Tr(w1ᵀ w2) + (α₁ − α₀) Tr(w1ᵀ Y Yᵀ w2)
//! ```
//!
//! which contains the embedded metric (`α₁ = α₀`) and the canonical metric
//! (`α₁ = α₀ / 2`). Geodesics are available in closed form through matrix
//! exponentials of size `2p` or `p + k`. Logarithms are computed by minimizing
//! the endpoint misfit of a geodesic with a trust-region solver whose gradient
//! comes from Fréchet derivatives of the matrix exponential.
//!
//! Modules:
//! - [`matfun`]: `expm`, its Fréchet derivative, spectral functions of symmetric matrices.
//! - [`stiefel`]: metric, tangent decomposition and geodesic formulas.
//! - [`grassmann`]: trigonometric exp/log/distance on the Grassmann quotient.
//! - [`flag`]: flag manifolds as block quotients, with the isospectral embedding.
//! - [`logsolve`]: objectives, the trust-region minimizer and log drivers.
//! - [`meanstat`]: Karcher mean iteration.
//! - [`bench`]: experiment harness behind the `logbench` binary.

pub mod bench;
pub mod error;
pub mod flag;
pub mod grassmann;
pub mod linalg;
pub mod logsolve;
pub mod matfun;
pub mod meanstat;
pub mod stiefel;

pub use error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
