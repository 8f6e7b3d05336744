//! Continuous-time Lyapunov equation `A G + G Aᵀ = −Q`.
//!
//! Two independent routes, selected by dimension:
//!
//! * **Kronecker** (default for n ≤ 50): the equation vectorizes to
//!   `(I⊗A + A⊗I) vec(G) = −vec(Q)`, one dense LU of an n²×n² matrix. Trivially
//!   correct, so it doubles as the cross-check oracle for the Schur route.
//! * **Bartels–Stewart** (n > 50): real Schur form `A = U T Uᵀ`, transform the
//!   right-hand side, back-substitute over the quasi-triangular blocks, and
//!   transform back. O(n³) instead of O(n⁶).
//!
//! A Hurwitz `A` guarantees a unique solution (eigenvalue sums `λᵢ + λⱼ` never
//! vanish), so both constructors reject unstable matrices up front. The
//! factorization is reused across right-hand sides, which is what the per-node
//! Gramian batch needs.

use super::{frobenius_norm, require_hurwitz, LinalgError, PsdMatrix, LYAPUNOV_RESIDUAL_FACTOR};
use nalgebra::linalg::LU;
use nalgebra::{DMatrix, DVector, Dyn};

/// Largest dimension that still uses the Kronecker direct solve.
pub const KRONECKER_MAX_DIM: usize = 50;

/// Which factorization backs a [`LyapunovSolver`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LyapunovMethod {
    Kronecker,
    BartelsStewart,
}

/// Factor-once, solve-many interface for `A G + G Aᵀ = −Q`.
pub struct LyapunovSolver {
    n: usize,
    backend: Backend,
}

enum Backend {
    Kronecker {
        lu: LU<f64, Dyn, Dyn>,
    },
    BartelsStewart {
        /// Orthogonal factor of the real Schur form `A = U T Uᵀ`.
        u: DMatrix<f64>,
        /// Quasi-upper-triangular factor.
        t: DMatrix<f64>,
        /// Diagonal block partition of `t` as (start, size), size ∈ {1, 2}.
        blocks: Vec<(usize, usize)>,
    },
}

impl LyapunovSolver {
    /// Factor `A`, choosing Kronecker for n ≤ 50 and Bartels–Stewart above.
    pub fn new(a: &DMatrix<f64>) -> Result<Self, LinalgError> {
        let method = if a.nrows() > KRONECKER_MAX_DIM {
            LyapunovMethod::BartelsStewart
        } else {
            LyapunovMethod::Kronecker
        };
        Self::with_method(a, method)
    }

    /// Factor `A` with an explicit method (the cross-check tests use this to
    /// run both routes on the same input).
    pub fn with_method(a: &DMatrix<f64>, method: LyapunovMethod) -> Result<Self, LinalgError> {
        require_hurwitz(a)?;
        let n = a.nrows();
        let backend = match method {
            LyapunovMethod::Kronecker => {
                let k = kronecker_sum(a);
                Backend::Kronecker { lu: k.lu() }
            }
            LyapunovMethod::BartelsStewart => {
                let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 200 * n)
                    .ok_or(LinalgError::SchurFailed)?;
                let (u, mut t) = schur.unpack();
                let blocks = partition_blocks(&mut t);
                Backend::BartelsStewart { u, t, blocks }
            }
        };
        Ok(Self { n, backend })
    }

    pub fn method(&self) -> LyapunovMethod {
        match self.backend {
            Backend::Kronecker { .. } => LyapunovMethod::Kronecker,
            Backend::BartelsStewart { .. } => LyapunovMethod::BartelsStewart,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A G + G Aᵀ = −Q` for the factored `A`. Returns the exactly
    /// symmetrized solution.
    pub fn solve(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
        if q.nrows() != self.n || q.ncols() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                got: q.nrows(),
            });
        }
        let g = match &self.backend {
            Backend::Kronecker { lu } => {
                // vec() is column-major, matching nalgebra's storage.
                let rhs = DVector::from_column_slice(q.as_slice()) * -1.0;
                let x = lu.solve(&rhs).ok_or(LinalgError::Singular)?;
                DMatrix::from_column_slice(self.n, self.n, x.as_slice())
            }
            Backend::BartelsStewart { u, t, blocks } => {
                let c = -(u.transpose() * q * u);
                let y = solve_quasi_triangular(t, blocks, &c)?;
                u * y * u.transpose()
            }
        };
        Ok(0.5 * (&g + g.transpose()))
    }
}

/// One-shot solve with the residual certificate: returns `G ⪰ 0` with
/// `‖A G + G Aᵀ + Q‖_F ≤ 1e-8·(1 + ‖Q‖_F)` or an error naming the violation.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &PsdMatrix) -> Result<PsdMatrix, LinalgError> {
    let solver = LyapunovSolver::new(a)?;
    let g = solver.solve(q.matrix())?;
    let residual = lyapunov_residual(a, &g, q.matrix());
    let tol = LYAPUNOV_RESIDUAL_FACTOR * (1.0 + frobenius_norm(q.matrix()));
    if !(residual <= tol) {
        return Err(LinalgError::ResidualTooLarge { residual, tol });
    }
    PsdMatrix::new(g)
}

/// `‖A G + G Aᵀ + Q‖_F`, the defining-equation residual.
pub fn lyapunov_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let r = a * g + g * a.transpose() + q;
    frobenius_norm(&r)
}

/// `I ⊗ A + A ⊗ I`, assembled in place (the `kronecker` helper would allocate
/// two n²×n² temporaries).
fn kronecker_sum(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut k = DMatrix::zeros(n * n, n * n);
    for blk in 0..n {
        for i in 0..n {
            for j in 0..n {
                k[(blk * n + i, blk * n + j)] += a[(i, j)];
            }
        }
    }
    for bi in 0..n {
        for bj in 0..n {
            let v = a[(bi, bj)];
            if v != 0.0 {
                for i in 0..n {
                    k[(bi * n + i, bj * n + i)] += v;
                }
            }
        }
    }
    k
}

/// Splits the quasi-triangular `t` into 1×1 and 2×2 diagonal blocks.
/// Subdiagonal entries that are negligible relative to their neighbors are
/// zeroed so the back-substitution sees an exact block structure.
fn partition_blocks(t: &mut DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut k = 0;
    while k < n {
        if k + 1 < n {
            let sub = t[(k + 1, k)];
            let scale = t[(k, k)].abs() + t[(k + 1, k + 1)].abs();
            if sub != 0.0 && sub.abs() > f64::EPSILON * scale {
                blocks.push((k, 2));
                k += 2;
                continue;
            }
            t[(k + 1, k)] = 0.0;
        }
        blocks.push((k, 1));
        k += 1;
    }
    blocks
}

/// Back-substitution for `T Y + Y Tᵀ = C` with quasi-upper-triangular `T`.
///
/// Block (i, j) of the equation reads
/// `T_ii Y_ij + Y_ij T_jjᵀ = C_ij − Σ_{l>i} T_il Y_lj − Σ_{m>j} Y_im T_jmᵀ`,
/// so iterating both block indices from the bottom-right corner upward makes
/// every needed `Y` block available when it is consumed.
fn solve_quasi_triangular(
    t: &DMatrix<f64>,
    blocks: &[(usize, usize)],
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let n = t.nrows();
    let mut y = DMatrix::zeros(n, n);
    for &(js, jn) in blocks.iter().rev() {
        for &(is, im) in blocks.iter().rev() {
            let mut rhs = c.view((is, js), (im, jn)).clone_owned();
            if is + im < n {
                rhs -= t.view((is, is + im), (im, n - is - im))
                    * y.view((is + im, js), (n - is - im, jn));
            }
            if js + jn < n {
                rhs -= y.view((is, js + jn), (im, n - js - jn))
                    * t.view((js, js + jn), (jn, n - js - jn)).transpose();
            }
            let tii = t.view((is, is), (im, im)).clone_owned();
            let tjj = t.view((js, js), (jn, jn)).clone_owned();
            let x = solve_small_sylvester(&tii, &tjj, &rhs)?;
            y.view_mut((is, js), (im, jn)).copy_from(&x);
        }
    }
    Ok(y)
}

/// Solves `T_ii X + X T_jjᵀ = R` for blocks of size ≤ 2 by vectorizing to the
/// (≤ 4×4) system `(I ⊗ T_ii + T_jj ⊗ I) vec(X) = vec(R)`.
fn solve_small_sylvester(
    tii: &DMatrix<f64>,
    tjj: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let p = tii.nrows();
    let q = tjj.nrows();
    let mut k = DMatrix::zeros(p * q, p * q);
    for col in 0..q {
        for i in 0..p {
            for j in 0..p {
                k[(col * p + i, col * p + j)] += tii[(i, j)];
            }
        }
    }
    for ci in 0..q {
        for cj in 0..q {
            let v = tjj[(ci, cj)];
            for i in 0..p {
                k[(ci * p + i, cj * p + i)] += v;
            }
        }
    }
    let vec_rhs = DVector::from_column_slice(rhs.as_slice());
    let x = k.lu().solve(&vec_rhs).ok_or(LinalgError::Singular)?;
    Ok(DMatrix::from_column_slice(p, q, x.as_slice()))
}
