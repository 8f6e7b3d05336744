//! Generators for the system families used throughout the crate: integrator
//! chains, stabilized Erdős–Rényi random networks, and hitting-set reduction
//! instances whose controllability structure is known in closed form.
//!
//! All generators are deterministic: the random-network generator draws from
//! a seedable stream with a documented bit-level sampling procedure (see
//! [`rng`]), so instances regenerate identically on any platform.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::spectral_abscissa;
use crate::system::{Horizon, LinearSystem, SystemError};

/// Errors from instance generation and validation.
#[derive(Debug, Error)]
pub enum InstanceError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error("random network needs at least 2 nodes, got {n}")]
    TooSmall { n: usize },
    #[error("hitting-set instance needs at least one element")]
    NoElements,
    #[error("hitting-set instance needs at least one set")]
    NoSets,
    #[error("set {set_index} of the hitting-set instance is empty")]
    EmptySet { set_index: usize },
    #[error("set {set_index} contains element {element}, outside 1..={m}")]
    ElementOutOfRange {
        set_index: usize,
        element: usize,
        m: usize,
    },
    #[error("element {element} is not covered by any set")]
    UncoveredElement { element: usize },
    #[error("construction self-check failed: {detail}")]
    SelfCheckFailed { detail: String },
}

/// Seedable deterministic sampling with a pinned bit-stream.
///
/// The generator is ChaCha8 seeded through `seed_from_u64`. Every derived
/// draw consumes a fixed number of raw 64-bit words, so a (seed, draw
/// sequence) pair identifies an instance exactly:
///
/// * `uniform`: one word; `(w >> 11) · 2⁻⁵³ ∈ [0, 1)`.
/// * `bernoulli(p)`: one word; `uniform() < p`.
/// * `standard_normal`: two words; Box–Muller
///   `sqrt(−2 ln(1 − u₁)) · cos(2π u₂)`, the sine companion discarded.
pub mod rng {
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    /// 2⁻⁵³, the spacing of the uniform grid.
    const UNIFORM_SCALE: f64 = 1.110_223_024_625_156_5e-16;

    /// A deterministic stream of floating-point draws.
    pub struct Stream {
        rng: ChaCha8Rng,
    }

    impl Stream {
        /// Start a stream from a 64-bit seed.
        pub fn new(seed: u64) -> Self {
            Stream {
                rng: ChaCha8Rng::seed_from_u64(seed),
            }
        }

        /// Next raw 64-bit word.
        pub fn next_u64(&mut self) -> u64 {
            self.rng.next_u64()
        }

        /// Uniform draw on `[0, 1)` using the top 53 bits of one word.
        pub fn uniform(&mut self) -> f64 {
            (self.next_u64() >> 11) as f64 * UNIFORM_SCALE
        }

        /// Bernoulli draw: `true` with probability `p` (one word).
        pub fn bernoulli(&mut self, p: f64) -> bool {
            self.uniform() < p
        }

        /// Standard normal draw via Box–Muller (exactly two words).
        ///
        /// `u₁` is reflected to `(0, 1]` so the logarithm stays finite; the
        /// sine companion of the pair is discarded to keep the word count
        /// per draw fixed.
        pub fn standard_normal(&mut self) -> f64 {
            let u1 = 1.0 - self.uniform();
            let u2 = self.uniform();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        }
    }
}

/// `A_ii = −1`, `A_{i+1,i} = +1`: each node integrates its own leak plus the
/// state of the node above it, so influence propagates strictly down the
/// chain. Horizon is fixed to `[0, 1]`.
///
/// # Panics
/// If `n == 0`.
pub fn chain_network(n: usize) -> LinearSystem {
    assert!(n >= 1, "chain network needs at least one node");
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = -1.0;
        if i + 1 < n {
            a[(i + 1, i)] = 1.0;
        }
    }
    LinearSystem::new(a, Horizon::Finite { t0: 0.0, t1: 1.0 })
        .expect("chain matrix is square, finite, and the horizon is valid")
}

/// Multiplier in the edge-probability rule `p = 2·ln(n)/n`.
pub const EDGE_PROBABILITY_FACTOR: f64 = 2.0;

/// Factor applied to the rightmost eigenvalue real part when shifting an
/// unstable draw to a Hurwitz matrix.
pub const STABILIZATION_FACTOR: f64 = 1.1;

/// Configuration for [`erdos_renyi_system`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomNetworkConfig {
    /// Node count (`n ≥ 2`).
    pub n: usize,
    /// Seed for the deterministic sampling stream.
    pub seed: u64,
}

impl RandomNetworkConfig {
    /// Edge probability `min(1, 2·ln(n)/n)`.
    pub fn edge_probability(&self) -> f64 {
        let n = self.n as f64;
        (EDGE_PROBABILITY_FACTOR * n.ln() / n).min(1.0)
    }
}

/// A generated random network together with the stabilization metadata.
#[derive(Clone, Debug)]
pub struct RandomNetwork {
    /// The stabilized system, with an infinite horizon so Gramians come from
    /// Lyapunov equations.
    pub system: LinearSystem,
    /// Rightmost eigenvalue real part of the raw (unshifted) draw.
    pub raw_spectral_abscissa: f64,
    /// The diagonal shift actually subtracted (`0` when the raw draw was
    /// already Hurwitz; `1.1 ×` the raw abscissa otherwise).
    pub shift_applied: f64,
    /// Edge probability used for the draw.
    pub edge_probability: f64,
}

/// Directed Erdős–Rényi network with `N(0, 1)` edge weights, shifted to a
/// Hurwitz matrix when necessary.
///
/// Sampling order is pinned for reproducibility: one Bernoulli pass over all
/// ordered pairs in row-major order (diagonal included), then one normal
/// draw per present edge in the same order. When the raw rightmost
/// eigenvalue real part `ρ` is `≥ 0` the matrix is shifted to
/// `A − 1.1·ρ·I`, moving the abscissa to `−0.1·ρ`; an already-stable draw
/// is left untouched rather than destabilized toward zero. A draw with no
/// edges at all keeps abscissa `0` and is rejected downstream by the
/// Lyapunov-based Gramian computation.
pub fn erdos_renyi_system(cfg: &RandomNetworkConfig) -> Result<RandomNetwork, InstanceError> {
    if cfg.n < 2 {
        return Err(InstanceError::TooSmall { n: cfg.n });
    }
    let n = cfg.n;
    let p = cfg.edge_probability();
    let mut stream = rng::Stream::new(cfg.seed);

    let mut present = vec![false; n * n];
    for slot in present.iter_mut() {
        *slot = stream.bernoulli(p);
    }
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if present[i * n + j] {
                a[(i, j)] = stream.standard_normal();
            }
        }
    }

    let raw = spectral_abscissa(&a)?;
    let shift = if raw >= 0.0 {
        STABILIZATION_FACTOR * raw
    } else {
        0.0
    };
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let system = LinearSystem::new(a, Horizon::Infinite)?;
    Ok(RandomNetwork {
        system,
        raw_spectral_abscissa: raw,
        shift_applied: shift,
        edge_probability: p,
    })
}

/// A hitting-set instance: elements `{1..m}` and a family of non-empty
/// subsets, every element covered by at least one set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HittingSetInstance {
    m: usize,
    sets: Vec<Vec<usize>>,
}

impl HittingSetInstance {
    /// Validate and canonicalize an instance (each set sorted, duplicates
    /// removed).
    pub fn new(
        m: usize,
        sets: impl IntoIterator<Item = Vec<usize>>,
    ) -> Result<Self, InstanceError> {
        if m == 0 {
            return Err(InstanceError::NoElements);
        }
        let mut canon: Vec<Vec<usize>> = Vec::new();
        for (idx, mut set) in sets.into_iter().enumerate() {
            let set_index = idx + 1;
            if set.is_empty() {
                return Err(InstanceError::EmptySet { set_index });
            }
            set.sort_unstable();
            set.dedup();
            for &element in &set {
                if element == 0 || element > m {
                    return Err(InstanceError::ElementOutOfRange {
                        set_index,
                        element,
                        m,
                    });
                }
            }
            canon.push(set);
        }
        if canon.is_empty() {
            return Err(InstanceError::NoSets);
        }
        for element in 1..=m {
            if !canon.iter().any(|s| s.contains(&element)) {
                return Err(InstanceError::UncoveredElement { element });
            }
        }
        Ok(HittingSetInstance { m, sets: canon })
    }

    /// Element count `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Set count `p`.
    pub fn p(&self) -> usize {
        self.sets.len()
    }

    /// The canonicalized sets (each sorted ascending).
    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// `p × m` zero-one incidence matrix: entry `(k, j)` is 1 iff set `k`
    /// contains element `j`.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.p(), self.m);
        for (k, set) in self.sets.iter().enumerate() {
            for &j in set {
                c[(k, j - 1)] = 1.0;
            }
        }
        c
    }

    /// Does `picked ⊆ {1..m}` intersect every set?
    pub fn is_hitting(&self, picked: &[usize]) -> bool {
        self.sets
            .iter()
            .all(|s| s.iter().any(|e| picked.contains(e)))
    }
}

/// A linear system encoding a hitting-set instance, with the block layout
/// needed to interpret actuator choices.
///
/// Nodes `1..=m` stand for the elements, nodes `m+1..=m+p` for the sets, and
/// node `n = m+p+1` is the anchor that every controllable actuator set must
/// contain.
#[derive(Clone, Debug)]
pub struct HittingSetSystem {
    /// The assembled system (finite horizon `[0, 1]`; the spectrum is
    /// `{1, …, n}`, so an infinite horizon would be invalid).
    pub system: LinearSystem,
    /// Element count `m`.
    pub m: usize,
    /// Set count `p`.
    pub p: usize,
}

impl HittingSetSystem {
    /// Node index of element `j` (1-based).
    pub fn element_node(&self, j: usize) -> usize {
        j
    }

    /// Node index of set `k` (1-based).
    pub fn set_node(&self, k: usize) -> usize {
        self.m + k
    }

    /// Node index of the anchor.
    pub fn anchor_node(&self) -> usize {
        self.m + self.p + 1
    }
}

/// Build the similarity-transform system `A = V⁻¹ D V` for a hitting-set
/// instance, with `D = diag(1, …, n)` and
///
/// ```text
///     ⎡ 2I   0       e ⎤   rows 1..m        (elements)
/// V = ⎢ C  (m+1)I    0 ⎥   rows m+1..m+p    (sets)
///     ⎣ 0    0       1 ⎦   row n            (anchor)
/// ```
///
/// `V` is strictly diagonally dominant by construction, hence invertible,
/// and `V⁻¹` has a known closed form; both facts are re-verified at build
/// time as self-checks, as is the spectrum of the returned `A` (which must
/// equal `{1, …, n}` by similarity). `A` itself is computed by LU solves
/// against `V` rather than by forming `V⁻¹` explicitly.
pub fn hitting_set_system(inst: &HittingSetInstance) -> Result<HittingSetSystem, InstanceError> {
    let m = inst.m();
    let p = inst.p();
    let n = m + p + 1;

    let mut v = DMatrix::zeros(n, n);
    for i in 0..m {
        v[(i, i)] = 2.0;
        v[(i, n - 1)] = 1.0;
    }
    for (k, set) in inst.sets().iter().enumerate() {
        for &j in set {
            v[(m + k, j - 1)] = 1.0;
        }
        v[(m + k, m + k)] = (m + 1) as f64;
    }
    v[(n - 1, n - 1)] = 1.0;

    for i in 0..n {
        let off: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| v[(i, j)].abs())
            .sum();
        if v[(i, i)].abs() <= off {
            return Err(InstanceError::SelfCheckFailed {
                detail: format!(
                    "row {} of V is not strictly diagonally dominant ({} <= {})",
                    i + 1,
                    v[(i, i)].abs(),
                    off
                ),
            });
        }
    }

    // Closed form of V⁻¹: element rows carry 1/2 on the diagonal and −1/2 in
    // the last column; set rows carry 1/(m+1) on the diagonal, −1/(2(m+1))
    // under the set's elements, and |C_k|/(2(m+1)) in the last column; the
    // anchor row is e_nᵀ. Verified against V before use as a self-check.
    let mut v_inv = DMatrix::zeros(n, n);
    let mp1 = (m + 1) as f64;
    for i in 0..m {
        v_inv[(i, i)] = 0.5;
        v_inv[(i, n - 1)] = -0.5;
    }
    for (k, set) in inst.sets().iter().enumerate() {
        v_inv[(m + k, m + k)] = 1.0 / mp1;
        for &j in set {
            v_inv[(m + k, j - 1)] = -1.0 / (2.0 * mp1);
        }
        v_inv[(m + k, n - 1)] = set.len() as f64 / (2.0 * mp1);
    }
    v_inv[(n - 1, n - 1)] = 1.0;

    let product = &v_inv * &v;
    let identity_dev = (&product - DMatrix::<f64>::identity(n, n))
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if identity_dev > 1e-12 {
        return Err(InstanceError::SelfCheckFailed {
            detail: format!(
                "closed-form V inverse deviates from a true inverse by {identity_dev:e}"
            ),
        });
    }

    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        (1..=n).map(|k| k as f64),
    ));
    let dv = &d * &v;
    let a = v
        .clone()
        .lu()
        .solve(&dv)
        .ok_or_else(|| InstanceError::SelfCheckFailed {
            detail: "V was reported singular despite diagonal dominance".to_string(),
        })?;

    let mut eigs: Vec<f64> = a
        .complex_eigenvalues()
        .iter()
        .map(|z| {
            if z.im.abs() > 1e-8 {
                f64::NAN
            } else {
                z.re
            }
        })
        .collect();
    eigs.sort_by(f64::total_cmp);
    for (idx, eig) in eigs.iter().enumerate() {
        let expected = (idx + 1) as f64;
        if !((eig - expected).abs() <= 1e-8 * expected.max(1.0)) {
            return Err(InstanceError::SelfCheckFailed {
                detail: format!(
                    "eigenvalue {idx} of A is {eig}, expected {expected} by similarity"
                ),
            });
        }
    }

    let system = LinearSystem::new(a, Horizon::Finite { t0: 0.0, t1: 1.0 })?;
    Ok(HittingSetSystem { system, m, p })
}
