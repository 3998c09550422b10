//! Nonlocal wave equations `∂ₜ²u + (-Δ)ˢu + q u = F` on a bounded interval
//! with exterior Dirichlet data: discretization, spectral tools, forward
//! solvers, Dirichlet-to-Neumann pairings, Runge approximation and the
//! reconstruction of potentials and polyhomogeneous nonlinearities.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too; index loops
// over time slices read better than zipped iterators in the quadratures.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dn;
pub mod error;
pub mod grid;
pub mod inversion;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod runge;
pub mod spectral;
pub mod wave;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use grid::{Grid, Window};
pub use model::{HomogeneousTerm, PolyKind, PolyNonlinearity, Potential};
pub use operator::FracOperator;
pub use spectral::{EllipticSolver, SpectralBasis};
