//! Dense matrix exponential.
//!
//! Scaling-and-squaring with diagonal Padé approximants (Higham 2005): pick
//! the smallest order m ∈ {3, 5, 7, 9} whose accuracy threshold θ_m covers
//! ‖A‖₁, otherwise scale by 2^{−s} until the norm falls under θ₁₃, apply the
//! order-13 approximant, and undo the scaling by repeated squaring. The θ
//! values are the largest norms for which the backward error of the [m/m]
//! approximant stays below unit roundoff.

use super::{one_norm, LinalgError};
use nalgebra::DMatrix;

const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_230e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068e0;
const THETA_13: f64 = 5.371_920_351_148_152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Matrix exponential `e^A` of a square real matrix.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let norm = one_norm(a);
    if norm <= THETA_3 {
        return pade_low_order(a, &PADE_3);
    }
    if norm <= THETA_5 {
        return pade_low_order(a, &PADE_5);
    }
    if norm <= THETA_7 {
        return pade_low_order(a, &PADE_7);
    }
    if norm <= THETA_9 {
        return pade_low_order(a, &PADE_9);
    }
    // Order 13 with scaling: A/2^s has norm ≤ θ₁₃, then square s times.
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-(s as i32));
    let mut x = pade_13(&scaled)?;
    for _ in 0..s {
        x = &x * &x;
    }
    Ok(x)
}

/// [m/m] Padé approximant for m ∈ {3, 5, 7, 9}: with even/odd coefficient
/// splits `U = A·Σ b_{2k+1} A^{2k}` and `V = Σ b_{2k} A^{2k}`, the approximant
/// is the solution of `(V − U) X = V + U`.
fn pade_low_order(a: &DMatrix<f64>, b: &[f64]) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    let a2 = a * a;
    let mut even = DMatrix::identity(n, n) * b[0];
    let mut odd = DMatrix::identity(n, n) * b[1];
    let mut a_pow = DMatrix::identity(n, n); // A^{2k}
    for k in 1..=(b.len() / 2 - 1) {
        a_pow = &a_pow * &a2;
        even += &a_pow * b[2 * k];
        odd += &a_pow * b[2 * k + 1];
    }
    let u = a * odd;
    solve_pade(even, u)
}

/// Order-13 approximant using the Higham factorization that needs only
/// A², A⁴, A⁶.
fn pade_13(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    let b = &PADE_13;
    let ident = DMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];
    solve_pade(v, u)
}

fn solve_pade(v: DMatrix<f64>, u: DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let denom = &v - &u;
    let numer = v + u;
    denom.lu().solve(&numer).ok_or(LinalgError::Singular)
}
