//! Dense linear-algebra kernels used by the Gramian and placement layers.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. The module adds the
//! pieces nalgebra does not ship in the exact shape the solvers need:
//!
//! * [`expm`] — scaling-and-squaring Padé matrix exponential;
//! * [`LyapunovSolver`] / [`solve_lyapunov`] — `A G + G Aᵀ = −Q` with a
//!   factor-once-solve-many interface (Kronecker direct solve for small
//!   systems, Bartels–Stewart for large ones);
//! * [`trace_perturbed_inverse`] — `tr((M + εI)^{-1})` evaluated from the
//!   spectrum of `M` so that near-singular Gramians never go through an
//!   explicit inverse;
//! * [`PsdMatrix`] — a symmetric positive-semidefinite wrapper that all
//!   Gramians live behind.

mod expm;
mod lyapunov;

pub use expm::expm;
pub use lyapunov::{lyapunov_residual, solve_lyapunov, LyapunovMethod, LyapunovSolver};

use nalgebra::DMatrix;
use thiserror::Error;

/// Spectral-abscissa margin below zero required to call a matrix Hurwitz.
pub const HURWITZ_MARGIN: f64 = 1e-9;

/// Relative factor for the positive-semidefiniteness check: eigenvalues may
/// dip below zero by at most `PSD_TOLERANCE_FACTOR · ‖M‖₂`.
pub const PSD_TOLERANCE_FACTOR: f64 = 1e-8;

/// Relative factor for symmetry checks: `|M_ij − M_ji|` may be at most
/// `SYMMETRY_TOLERANCE_FACTOR · (1 + max|M|)`.
pub const SYMMETRY_TOLERANCE_FACTOR: f64 = 1e-8;

/// Relative factor for the Lyapunov residual acceptance test
/// `‖AG + GAᵀ + Q‖_F ≤ LYAPUNOV_RESIDUAL_FACTOR · (1 + ‖Q‖_F)`.
pub const LYAPUNOV_RESIDUAL_FACTOR: f64 = 1e-8;

/// Errors from the dense kernels.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is asymmetric beyond tolerance: max |M - M'| = {max_dev:e} > {tol:e}")]
    Asymmetric { max_dev: f64, tol: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:e} < -{tol:e}")]
    NotPsd { min_eig: f64, tol: f64 },
    #[error("matrix is not Hurwitz: max Re(eigenvalue) = {max_re:e} >= -{margin:e}")]
    NotHurwitz { max_re: f64, margin: f64 },
    #[error("eigenvalue iteration failed to converge")]
    EigenFailed,
    #[error("Schur decomposition failed to converge")]
    SchurFailed,
    #[error("linear solve hit a singular factor")]
    Singular,
    #[error("Lyapunov residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("perturbation eps must be positive and finite, got {eps}")]
    NonPositiveEps { eps: f64 },
}

/// A symmetric positive-semidefinite matrix.
///
/// Construction via [`PsdMatrix::new`] checks symmetry within tolerance,
/// symmetrizes exactly to `(M + Mᵀ)/2`, and verifies the spectrum satisfies
/// `λ_min ≥ −1e-8·‖M‖₂`. Sums of `PsdMatrix` values stay in the cone, so the
/// crate-internal [`PsdMatrix::assume_psd`] skips the spectral re-check when
/// assembling Gramians from already-verified parts.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix {
    m: DMatrix<f64>,
}

impl PsdMatrix {
    /// Validates and wraps a symmetric PSD matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        let m = symmetrize_checked(m)?;
        // Spectral PSD check: λ_min ≥ −1e-8·‖M‖₂ with ‖M‖₂ = max |λ|.
        let eigs = sym_eigenvalues_of_symmetric(&m);
        let min_eig = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        let max_abs = eigs.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
        let tol = PSD_TOLERANCE_FACTOR * max_abs;
        if min_eig < -tol {
            return Err(LinalgError::NotPsd { min_eig, tol });
        }
        Ok(Self { m })
    }

    /// Wraps a matrix that is PSD by construction (e.g. a sum of verified PSD
    /// matrices). Symmetry is still made exact; the spectral check is skipped.
    pub(crate) fn assume_psd(m: DMatrix<f64>) -> Self {
        let sym = 0.5 * (&m + m.transpose());
        Self { m: sym }
    }

    /// The zero matrix (Gramian of the empty actuator set).
    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eigs = sym_eigenvalues_of_symmetric(&self.m);
        eigs.sort_by(|a, b| a.total_cmp(b));
        eigs
    }

    /// Smallest eigenvalue (may be slightly negative, within the PSD
    /// tolerance).
    pub fn min_eigenvalue(&self) -> f64 {
        sym_eigenvalues_of_symmetric(&self.m)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }
}

/// Checks symmetry within tolerance and returns the exactly symmetrized
/// `(M + Mᵀ)/2`.
fn symmetrize_checked(m: DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let max_abs = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = SYMMETRY_TOLERANCE_FACTOR * (1.0 + max_abs);
    let mut max_dev = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            max_dev = max_dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if max_dev > tol {
        return Err(LinalgError::Asymmetric { max_dev, tol });
    }
    Ok(0.5 * (&m + m.transpose()))
}

/// Eigenvalues of a matrix already known to be exactly symmetric.
fn sym_eigenvalues_of_symmetric(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.clone().symmetric_eigenvalues().iter().copied().collect()
}

/// Eigenvalues of a symmetric matrix, with the symmetry check surfaced as an
/// error. Returned in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>, LinalgError> {
    let sym = symmetrize_checked(m.clone())?;
    let mut eigs = sym_eigenvalues_of_symmetric(&sym);
    eigs.sort_by(|a, b| a.total_cmp(b));
    Ok(eigs)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64, LinalgError> {
    Ok(*symmetric_eigenvalues(m)?
        .first()
        .ok_or(LinalgError::DimensionMismatch {
            expected: 1,
            got: 0,
        })?)
}

/// `tr((M + εI)^{-1})` for a symmetric PSD `M`, evaluated as `Σ 1/(λᵢ + ε)`
/// from the spectrum of `M` alone.
///
/// Adding `ε` analytically after the eigendecomposition keeps the evaluation
/// robust when `M` is near-singular and `ε` is many orders of magnitude below
/// `‖M‖`: each term is bounded by `1/ε` exactly, which is what the
/// controllability certificate relies on. Eigenvalues inside the PSD tolerance
/// band below zero are clipped to zero.
pub fn trace_perturbed_inverse(m: &PsdMatrix, eps: f64) -> Result<f64, LinalgError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(LinalgError::NonPositiveEps { eps });
    }
    Ok(m.eigenvalues()
        .iter()
        .map(|&l| 1.0 / (l.max(0.0) + eps))
        .sum())
}

/// Max-column-sum norm ‖M‖₁.
pub(crate) fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm.
pub(crate) fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest real part among the eigenvalues of a general square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    if a.nrows() == 0 {
        return Err(LinalgError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    Ok(a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Errors unless `A` is Hurwitz with margin: `max Re λ(A) < −HURWITZ_MARGIN`.
pub fn require_hurwitz(a: &DMatrix<f64>) -> Result<(), LinalgError> {
    let max_re = spectral_abscissa(a)?;
    if max_re >= -HURWITZ_MARGIN {
        return Err(LinalgError::NotHurwitz {
            max_re,
            margin: HURWITZ_MARGIN,
        });
    }
    Ok(())
}
