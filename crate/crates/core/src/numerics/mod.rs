//! Self-contained dense linear algebra and polynomial utilities for the PnP
//! solvers: symmetric eigendecomposition, 3x3 SVD, companion-matrix root
//! finding, minimum-norm least squares and rigid alignment.
//!
//! Everything here is sized for this problem (matrices up to 2n x 12 for a
//! handful of beacons); none of it aims at BLAS-level throughput.

mod eig;
mod lstsq;
mod matrix;
mod poly;
mod procrustes;
mod svd;
pub mod vec3;

pub use eig::sym_eig;
pub use lstsq::lstsq;
pub use matrix::Matrix;
pub use poly::{complex_roots, real_poly_roots, Polynomial};
pub use procrustes::{procrustes, RigidMotion};
pub use svd::{svd3, Svd3};

use thiserror::Error;

/// Fixed numeric tolerances, kept in one table rather than scattered.
pub mod tol {
    /// Relative asymmetry allowed in `sym_eig` input.
    pub const SYM_EIG_ASYMMETRY_RTOL: f64 = 1e-10;
    /// Upper bound on Jacobi sweeps (both eigen and SVD); convergence is far
    /// earlier in practice.
    pub const JACOBI_MAX_SWEEPS: usize = 64;
    /// Imaginary-part cutoff classifying a companion eigenvalue as a real
    /// root: |im| < cutoff * (1 + |re|).
    pub const ROOT_IMAG_CUTOFF: f64 = 1e-6;
    /// Residual acceptance for a polished root:
    /// |p(r)| <= bound * max|coeff| * max(1, |r|)^deg.
    pub const ROOT_RESIDUAL_RTOL: f64 = 1e-8;
    /// Roots closer than this (relative to 1 + |r|) collapse to one entry.
    pub const ROOT_MERGE_RTOL: f64 = 1e-5;
    /// Leading coefficients below this fraction of the largest coefficient
    /// are stripped before building the companion matrix.
    pub const LEADING_COEFF_RTOL: f64 = 1e-12;
    /// Eigenvalues of the normal matrix below this fraction of the largest
    /// are treated as rank deficiency in `lstsq`.
    pub const LSTSQ_RANK_RTOL: f64 = 1e-12;
    /// Second singular value of the cross-covariance below this fraction of
    /// the first means the point sets are collinear.
    pub const PROCRUSTES_COLLINEAR_RTOL: f64 = 1e-10;
    /// Singular values below this fraction of the largest are treated as
    /// zero when building the left factor of `svd3`.
    pub const SVD3_RANK_RTOL: f64 = 1e-13;
}

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric within {0:e} relative")]
    NotSymmetric(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("zero polynomial has no defined roots")]
    ZeroPolynomial,
    #[error("eigeniteration failed to converge")]
    NoConvergence,
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
}
