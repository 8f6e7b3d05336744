//! Helpers for the acceptance suite: an adaptive-quadrature Gramian oracle
//! that is methodologically independent of the production block-exponential
//! identity, plus seeded random-system generators.

use gramsel::instances::rng::Stream;
use gramsel::linalg::expm;
use gramsel::system::{Horizon, LinearSystem};
use nalgebra::DMatrix;

/// Absolute max-norm tolerance the adaptive Simpson rule drives down to.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Maximum bisection depth of the adaptive rule.
pub const QUADRATURE_MAX_DEPTH: u32 = 30;

fn integrand(a: &DMatrix<f64>, q: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    let e = expm(&(a * s)).expect("matrix exponential of a finite matrix");
    &e * q * e.transpose()
}

fn simpson(
    f0: &DMatrix<f64>,
    f1: &DMatrix<f64>,
    f2: &DMatrix<f64>,
    h: f64,
) -> DMatrix<f64> {
    (f0 + f1 * 4.0 + f2) * (h / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    s0: f64,
    s2: f64,
    f0: &DMatrix<f64>,
    f1: &DMatrix<f64>,
    f2: &DMatrix<f64>,
    whole: &DMatrix<f64>,
    tol: f64,
    depth: u32,
) -> DMatrix<f64> {
    let s1 = 0.5 * (s0 + s2);
    let sl = 0.5 * (s0 + s1);
    let sr = 0.5 * (s1 + s2);
    let fl = integrand(a, q, sl);
    let fr = integrand(a, q, sr);
    let left = simpson(f0, &fl, f1, s1 - s0);
    let right = simpson(f1, &fr, f2, s2 - s1);
    let refined = &left + &right;
    let err = (&refined - whole).amax();
    if depth == 0 || err <= 15.0 * tol {
        // Richardson extrapolation of the two Simpson levels.
        let correction = (&refined - whole) / 15.0;
        refined + correction
    } else {
        let half = 0.5 * tol;
        adaptive(a, q, s0, s1, f0, &fl, f1, &left, half, depth - 1)
            + adaptive(a, q, s1, s2, f1, &fr, f2, &right, half, depth - 1)
    }
}

/// `∫_{t0}^{t1} e^{As} Q e^{Aᵀs} ds` by adaptive Simpson quadrature — an
/// integration route sharing nothing with the block-exponential identity
/// beyond the matrix exponential itself.
pub fn quadrature_gramian(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    t0: f64,
    t1: f64,
) -> DMatrix<f64> {
    let f0 = integrand(a, q, t0);
    let f1 = integrand(a, q, 0.5 * (t0 + t1));
    let f2 = integrand(a, q, t1);
    let whole = simpson(&f0, &f1, &f2, t1 - t0);
    adaptive(
        a,
        q,
        t0,
        t1,
        &f0,
        &f1,
        &f2,
        &whole,
        QUADRATURE_TOL,
        QUADRATURE_MAX_DEPTH,
    )
}

/// Per-node quadrature Gramians `∫ e^{As} I^{(i)} e^{Aᵀs} ds`, 1-based list.
pub fn quadrature_node_gramians(sys: &LinearSystem) -> Vec<DMatrix<f64>> {
    let n = sys.n();
    let Horizon::Finite { t0, t1 } = sys.horizon() else {
        panic!("quadrature oracle only integrates finite horizons");
    };
    (1..=n)
        .map(|i| {
            let mut q = DMatrix::zeros(n, n);
            q[(i - 1, i - 1)] = 1.0;
            quadrature_gramian(sys.a(), &q, t0, t1)
        })
        .collect()
}

/// Relative Frobenius distance `‖x − y‖_F / max(1, ‖y‖_F)`.
pub fn rel_frobenius(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x - y).norm() / y.norm().max(1.0)
}

/// Draws an integer in `lo..=hi` from the stream.
pub fn draw_range(stream: &mut Stream, lo: usize, hi: usize) -> usize {
    lo + (stream.next_u64() % (hi - lo + 1) as u64) as usize
}

/// Random dense state matrix with `N(0, 1/n)` entries.
pub fn random_state_matrix(stream: &mut Stream, n: usize) -> DMatrix<f64> {
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |_, _| stream.standard_normal() * scale)
}

/// Random finite-horizon system: dense Gaussian dynamics, `t1 ∈ [0.25, 2]`.
pub fn random_finite_system(stream: &mut Stream, n_lo: usize, n_hi: usize) -> LinearSystem {
    let n = draw_range(stream, n_lo, n_hi);
    let a = random_state_matrix(stream, n);
    let t1 = 0.25 + 1.75 * stream.uniform();
    LinearSystem::new(a, Horizon::Finite { t0: 0.0, t1 }).expect("finite Gaussian system")
}

/// Random infinite-horizon system: Gaussian dynamics shifted to be Hurwitz
/// with margin at least 0.2.
pub fn random_stable_system(stream: &mut Stream, n_lo: usize, n_hi: usize) -> LinearSystem {
    let n = draw_range(stream, n_lo, n_hi);
    let mut a = random_state_matrix(stream, n);
    let rho = gramsel::linalg::spectral_abscissa(&a).expect("finite spectrum");
    let shift = rho.max(0.0) + 0.2 + stream.uniform();
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    LinearSystem::new(a, Horizon::Infinite).expect("stable Gaussian system")
}

/// Random system of either horizon type, chosen by one stream draw.
pub fn random_system(stream: &mut Stream, n_lo: usize, n_hi: usize) -> LinearSystem {
    if stream.bernoulli(0.5) {
        random_finite_system(stream, n_lo, n_hi)
    } else {
        random_stable_system(stream, n_lo, n_hi)
    }
}

/// Random actuator subset of `{1..n}` with each node included with
/// probability `p` (possibly empty).
pub fn random_subset(stream: &mut Stream, n: usize, p: f64) -> Vec<usize> {
    (1..=n).filter(|_| stream.bernoulli(p)).collect()
}
