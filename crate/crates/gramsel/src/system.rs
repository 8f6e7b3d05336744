//! Linear network systems, actuator sets, and per-node controllability
//! Gramians.
//!
//! The dynamics are `dx/dt = A x + B u` with `B = diag(δ)`, `δ ∈ {0,1}ⁿ`
//! picking the actuated nodes Δ. Because `B Bᵀ = Σ_{i∈Δ} I^{(i)}` (the
//! single-entry diagonal indicators), the controllability Gramian decomposes
//! node-wise:
//!
//! ```text
//! W_Δ = Σ_{i∈Δ} W_i,   W_i = ∫ e^{As} I^{(i)} e^{Aᵀs} ds
//! ```
//!
//! with the integral over `[0, t1−t0]` for a finite horizon and `[0, ∞)` (A
//! Hurwitz) for the infinite one. A [`NodeGramianSet`] holds the n per-node
//! Gramians so that every candidate actuator set is a cheap sum, which is what
//! the greedy placement loops live on.
//!
//! The energy metric is `tr((W_Δ + εI)^{-1})`: the Gramian's inverse trace is
//! the average minimum control energy over random unit targets, and the ε
//! perturbation keeps the metric finite for uncontrollable sets while
//! certifying controllability whenever `tr((W_Δ + εI)^{-1}) ≤ ω` with
//! `ε ≤ 1/ω` (an uncontrollable set would contribute at least one `1/ε ≥ ω`
//! eigenvalue term plus a positive remainder).

use crate::linalg::{
    expm, lyapunov_residual, trace_perturbed_inverse, LinalgError, LyapunovSolver, PsdMatrix,
    LYAPUNOV_RESIDUAL_FACTOR,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

/// Relative factor for checking that `Σᵢ Wᵢ` matches the directly computed
/// full-actuation Gramian.
pub const ASSEMBLY_TOLERANCE_FACTOR: f64 = 1e-8;

/// Scale factor for the λ_min controllability threshold; the threshold is
/// `1e-12 · (1 + tr(W_V)/n)` so it tracks the Gramian's natural scale.
pub const CONTROLLABILITY_TOLERANCE_FACTOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("system matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("system matrix contains non-finite entries")]
    NonFinite,
    #[error("system must have at least one node")]
    Empty,
    #[error("invalid horizon: t0 = {t0}, t1 = {t1} (need finite t0 < t1)")]
    InvalidHorizon { t0: f64, t1: f64 },
    #[error("operation requires a {expected} horizon")]
    HorizonMismatch { expected: &'static str },
    #[error("node index {node} out of range 1..={n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("duplicate node index {node}")]
    DuplicateNode { node: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eps must be non-negative and finite, got {eps}")]
    InvalidEps { eps: f64 },
    #[error(
        "node Gramians are inconsistent with the full-actuation Gramian: \
         deviation {deviation:e} > {tol:e}"
    )]
    AssemblyInconsistent { deviation: f64, tol: f64 },
    #[error(
        "actuator set is not controllable: lambda_min = {lambda_min:e} <= {threshold:e}"
    )]
    Uncontrollable { lambda_min: f64, threshold: f64 },
}

/// Control horizon of a system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Finite { t0: f64, t1: f64 },
    Infinite,
}

/// `dx/dt = A x + B u` over a declared horizon; `B` is chosen later via an
/// [`ActuatorSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    horizon: Horizon,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, horizon: Horizon) -> Result<Self, SystemError> {
        if a.nrows() != a.ncols() {
            return Err(SystemError::NonSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.nrows() == 0 {
            return Err(SystemError::Empty);
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(SystemError::NonFinite);
        }
        if let Horizon::Finite { t0, t1 } = horizon {
            if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
                return Err(SystemError::InvalidHorizon { t0, t1 });
            }
        }
        Ok(Self { a, horizon })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }
}

/// A subset Δ ⊆ {1, …, n} of actuated nodes. Indices are 1-based everywhere
/// (files, display, and API); members are kept sorted and unique.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActuatorSet {
    n: usize,
    members: Vec<usize>,
}

impl ActuatorSet {
    pub fn new(nodes: impl IntoIterator<Item = usize>, n: usize) -> Result<Self, SystemError> {
        let mut members: Vec<usize> = nodes.into_iter().collect();
        members.sort_unstable();
        for &node in &members {
            if node == 0 || node > n {
                return Err(SystemError::NodeOutOfRange { node, n });
            }
        }
        for pair in members.windows(2) {
            if pair[0] == pair[1] {
                return Err(SystemError::DuplicateNode { node: pair[0] });
            }
        }
        Ok(Self { n, members })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            members: Vec::new(),
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            members: (1..=n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sorted 1-based member indices.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members.binary_search(&node).is_ok()
    }

    /// Returns Δ ∪ {node}; errors on out-of-range or already-present nodes.
    pub fn with_node(&self, node: usize) -> Result<Self, SystemError> {
        if node == 0 || node > self.n {
            return Err(SystemError::NodeOutOfRange { node, n: self.n });
        }
        if self.contains(node) {
            return Err(SystemError::DuplicateNode { node });
        }
        let mut members = self.members.clone();
        let pos = members.partition_point(|&m| m < node);
        members.insert(pos, node);
        Ok(Self { n: self.n, members })
    }

    pub fn complement(&self) -> Self {
        Self {
            n: self.n,
            members: (1..=self.n).filter(|i| !self.contains(*i)).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.n == other.n && self.members.iter().all(|&i| other.contains(i))
    }
}

impl std::fmt::Display for ActuatorSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, node) in self.members.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{node}")?;
        }
        write!(f, "}}")
    }
}

/// Which integral produced a Gramian set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramianMethod {
    FiniteHorizon,
    InfiniteHorizon,
}

impl GramianMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            GramianMethod::FiniteHorizon => "finite-horizon",
            GramianMethod::InfiniteHorizon => "infinite-horizon",
        }
    }
}

/// The n per-node Gramians `W_i` of a system, plus the cached full-actuation
/// Gramian `W_V = Σᵢ Wᵢ`.
///
/// Construction cross-checks the node sum against a directly computed
/// full-actuation Gramian (same route, `Q = I`), so a set that exists is
/// internally consistent. The stored `W_V` is the canonical ascending-order
/// sum, identical to `assemble_gramian` over the full set.
#[derive(Clone, Debug)]
pub struct NodeGramianSet {
    system: LinearSystem,
    method: GramianMethod,
    nodes: Vec<PsdMatrix>,
    full: PsdMatrix,
    /// Lyapunov residuals per node (infinite horizon only).
    residuals: Option<Vec<f64>>,
}

impl NodeGramianSet {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn method(&self) -> GramianMethod {
        self.method
    }

    /// Per-node Gramian `W_i`, 1-based.
    pub fn node(&self, i: usize) -> &PsdMatrix {
        &self.nodes[i - 1]
    }

    pub fn nodes(&self) -> &[PsdMatrix] {
        &self.nodes
    }

    /// Full-actuation Gramian `W_V`.
    pub fn full_gramian(&self) -> &PsdMatrix {
        &self.full
    }

    pub fn residuals(&self) -> Option<&[f64]> {
        self.residuals.as_deref()
    }

    /// λ_min threshold below which an assembled Gramian counts as singular:
    /// `1e-12 · (1 + tr(W_V)/n)`.
    pub fn controllability_threshold(&self) -> f64 {
        CONTROLLABILITY_TOLERANCE_FACTOR * (1.0 + self.full.trace() / self.n() as f64)
    }

    /// Reassembles a set from parts without recomputation; used by the cache
    /// loader. Re-runs the node-sum consistency check.
    pub fn from_parts(
        system: LinearSystem,
        method: GramianMethod,
        nodes: Vec<PsdMatrix>,
        residuals: Option<Vec<f64>>,
    ) -> Result<Self, SystemError> {
        if nodes.len() != system.n() {
            return Err(SystemError::DimensionMismatch {
                expected: system.n(),
                got: nodes.len(),
            });
        }
        for g in &nodes {
            if g.dim() != system.n() {
                return Err(SystemError::DimensionMismatch {
                    expected: system.n(),
                    got: g.dim(),
                });
            }
        }
        let full = sum_psd(system.n(), nodes.iter());
        Ok(Self {
            system,
            method,
            nodes,
            full,
            residuals,
        })
    }
}

/// Ascending-order sum of PSD matrices (canonical assembly order).
fn sum_psd<'a>(n: usize, parts: impl Iterator<Item = &'a PsdMatrix>) -> PsdMatrix {
    let mut acc = DMatrix::zeros(n, n);
    for p in parts {
        acc += p.matrix();
    }
    PsdMatrix::assume_psd(acc)
}

/// Single-entry diagonal indicator `I^{(i)}` (1-based `i`).
fn indicator(n: usize, i: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i - 1, i - 1)] = 1.0;
    m
}

/// Finite-horizon per-node Gramians via the block-exponential identity: for
///
/// ```text
/// M = [[−A, Q], [0, Aᵀ]]·τ,   e^M = [[·, G₂], [0, F₃]]
/// ```
///
/// the integral `∫₀^τ e^{As} Q e^{Aᵀs} ds` equals `F₃ᵀ G₂`. One 2n×2n
/// exponential per node, embarrassingly parallel.
pub fn finite_horizon_node_gramians(sys: &LinearSystem) -> Result<NodeGramianSet, SystemError> {
    let Horizon::Finite { t0, t1 } = sys.horizon() else {
        return Err(SystemError::HorizonMismatch { expected: "finite" });
    };
    let tau = t1 - t0;
    let n = sys.n();
    let nodes: Vec<PsdMatrix> = (1..=n)
        .into_par_iter()
        .map(|i| block_exponential_gramian(sys.a(), &indicator(n, i), tau))
        .collect::<Result<_, _>>()?;
    let full_direct = block_exponential_gramian(sys.a(), &DMatrix::identity(n, n), tau)?;
    finish_gramian_set(sys.clone(), GramianMethod::FiniteHorizon, nodes, full_direct, None)
}

/// `∫₀^τ e^{As} Q e^{Aᵀs} ds` via one block exponential.
pub fn block_exponential_gramian(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    tau: f64,
) -> Result<PsdMatrix, SystemError> {
    let n = a.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a));
    block.view_mut((0, n), (n, n)).copy_from(q);
    block.view_mut((n, n), (n, n)).copy_from(&a.transpose());
    block *= tau;
    let e = expm(&block)?;
    let g2 = e.view((0, n), (n, n)).clone_owned();
    let f3 = e.view((n, n), (n, n)).clone_owned();
    Ok(PsdMatrix::new(f3.transpose() * g2)?)
}

/// Infinite-horizon per-node Gramians by solving `A Wᵢ + Wᵢ Aᵀ = −I^{(i)}`
/// against one shared factorization of `A`. Requires `A` Hurwitz. Records the
/// defining-equation residual per node.
pub fn infinite_horizon_node_gramians(sys: &LinearSystem) -> Result<NodeGramianSet, SystemError> {
    let n = sys.n();
    let solver = LyapunovSolver::new(sys.a())?;
    let solved: Vec<(PsdMatrix, f64)> = (1..=n)
        .into_par_iter()
        .map(|i| -> Result<(PsdMatrix, f64), SystemError> {
            let q = indicator(n, i);
            let g = solver.solve(&q)?;
            let residual = lyapunov_residual(sys.a(), &g, &q);
            let tol = LYAPUNOV_RESIDUAL_FACTOR * 2.0; // ‖I^{(i)}‖_F = 1
            if !(residual <= tol) {
                return Err(LinalgError::ResidualTooLarge { residual, tol }.into());
            }
            Ok((PsdMatrix::new(g)?, residual))
        })
        .collect::<Result<_, _>>()?;
    let (nodes, residuals): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let q_full = DMatrix::identity(n, n);
    let g_full = solver.solve(&q_full)?;
    let res_full = lyapunov_residual(sys.a(), &g_full, &q_full);
    let tol_full = LYAPUNOV_RESIDUAL_FACTOR * (1.0 + (n as f64).sqrt());
    if !(res_full <= tol_full) {
        return Err(LinalgError::ResidualTooLarge {
            residual: res_full,
            tol: tol_full,
        }
        .into());
    }
    finish_gramian_set(
        sys.clone(),
        GramianMethod::InfiniteHorizon,
        nodes,
        PsdMatrix::new(g_full)?,
        Some(residuals),
    )
}

/// Dispatches on the system's declared horizon.
pub fn node_gramians(sys: &LinearSystem) -> Result<NodeGramianSet, SystemError> {
    match sys.horizon() {
        Horizon::Finite { .. } => finite_horizon_node_gramians(sys),
        Horizon::Infinite => infinite_horizon_node_gramians(sys),
    }
}

/// Verifies `Σᵢ Wᵢ` against the directly computed full Gramian, then stores
/// the canonical sum as `W_V`.
fn finish_gramian_set(
    system: LinearSystem,
    method: GramianMethod,
    nodes: Vec<PsdMatrix>,
    full_direct: PsdMatrix,
    residuals: Option<Vec<f64>>,
) -> Result<NodeGramianSet, SystemError> {
    let n = system.n();
    let full = sum_psd(n, nodes.iter());
    let deviation = linalg_frobenius(&(full.matrix() - full_direct.matrix()));
    let tol = ASSEMBLY_TOLERANCE_FACTOR * (1.0 + linalg_frobenius(full_direct.matrix()));
    if !(deviation <= tol) {
        return Err(SystemError::AssemblyInconsistent { deviation, tol });
    }
    Ok(NodeGramianSet {
        system,
        method,
        nodes,
        full,
        residuals,
    })
}

fn linalg_frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `W_Δ = Σ_{i∈Δ} Wᵢ`, summed in ascending node order.
pub fn assemble_gramian(
    gramians: &NodeGramianSet,
    delta: &ActuatorSet,
) -> Result<PsdMatrix, SystemError> {
    if delta.n() != gramians.n() {
        return Err(SystemError::DimensionMismatch {
            expected: gramians.n(),
            got: delta.n(),
        });
    }
    Ok(sum_psd(
        gramians.n(),
        delta.members().iter().map(|&i| gramians.node(i)),
    ))
}

/// The average-energy metric `tr((W_Δ + εI)^{-1})`.
///
/// With `eps = 0` this is the exact `tr(W_Δ^{-1})`, which is `+∞` whenever
/// `λ_min(W_Δ)` falls below the set's controllability threshold. With
/// `eps > 0` the evaluation goes through the spectrum of `W_Δ` with ε added
/// analytically, so it stays finite and bounded by `n/ε` for every Δ.
pub fn energy_metric(
    gramians: &NodeGramianSet,
    delta: &ActuatorSet,
    eps: f64,
) -> Result<f64, SystemError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(SystemError::InvalidEps { eps });
    }
    let w = assemble_gramian(gramians, delta)?;
    metric_of_assembled(gramians, &w, eps)
}

/// Metric evaluation on an already-assembled `W_Δ` (the greedy loop holds the
/// running sum and must see exactly the same numbers as `energy_metric`).
pub(crate) fn metric_of_assembled(
    gramians: &NodeGramianSet,
    w: &PsdMatrix,
    eps: f64,
) -> Result<f64, SystemError> {
    if eps > 0.0 {
        return Ok(trace_perturbed_inverse(w, eps)?);
    }
    let eigs = w.eigenvalues();
    let threshold = gramians.controllability_threshold();
    if eigs.first().copied().unwrap_or(0.0) <= threshold {
        return Ok(f64::INFINITY);
    }
    Ok(eigs.iter().map(|l| 1.0 / l).sum())
}

/// Controllability verdict for an actuator set, with the numbers behind it.
#[derive(Clone, Copy, Debug)]
pub struct ControllabilityReport {
    pub controllable: bool,
    pub lambda_min: f64,
    pub threshold: f64,
}

/// Gramian-based controllability test: `λ_min(W_Δ)` above the scale-aware
/// threshold. The Kalman-rank route ([`kalman_rank`]) is the independent
/// cross-check.
pub fn is_controllable(
    gramians: &NodeGramianSet,
    delta: &ActuatorSet,
) -> Result<ControllabilityReport, SystemError> {
    let w = assemble_gramian(gramians, delta)?;
    let lambda_min = w.min_eigenvalue();
    let threshold = gramians.controllability_threshold();
    Ok(ControllabilityReport {
        controllable: lambda_min > threshold,
        lambda_min,
        threshold,
    })
}

/// Rank of the Kalman controllability matrix `[B, AB, …, A^{n−1}B]` for
/// `B = [e_i : i ∈ Δ]`. Blocks are normalized before the rank computation so
/// fast-growing powers of `A` do not drown the tolerance.
pub fn kalman_rank(sys: &LinearSystem, delta: &ActuatorSet) -> Result<usize, SystemError> {
    let n = sys.n();
    if delta.n() != n {
        return Err(SystemError::DimensionMismatch {
            expected: n,
            got: delta.n(),
        });
    }
    if delta.is_empty() {
        return Ok(0);
    }
    let m = delta.len();
    let mut b = DMatrix::zeros(n, m);
    for (col, &node) in delta.members().iter().enumerate() {
        b[(node - 1, col)] = 1.0;
    }
    let mut kalman = DMatrix::zeros(n, n * m);
    let mut block = b;
    for k in 0..n {
        let norm = linalg_frobenius(&block);
        let scaled = if norm > 0.0 { &block / norm } else { block.clone() };
        kalman.view_mut((0, k * m), (n, m)).copy_from(&scaled);
        block = sys.a() * block;
    }
    let svd = kalman.svd(false, false);
    let sigma_max = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let tol = (n.max(n * m)) as f64 * f64::EPSILON * sigma_max;
    Ok(svd.singular_values.iter().filter(|&&s| s > tol).count())
}

/// Kalman-rank controllability verdict (tests use this as the oracle against
/// the Gramian route).
pub fn kalman_controllable(sys: &LinearSystem, delta: &ActuatorSet) -> Result<bool, SystemError> {
    Ok(kalman_rank(sys, delta)? == sys.n())
}

/// Minimum energy to drive the state from `x0` at `t0` to `x1` at `t1`:
/// `(x1 − e^{Aτ}x0)ᵀ W_Δ^{-1} (x1 − e^{Aτ}x0)`, computed via a linear solve
/// against `W_Δ` (never an explicit inverse). On the infinite horizon the
/// drift term vanishes (`A` Hurwitz), leaving `x1ᵀ W_Δ^{-1} x1`.
pub fn min_transfer_energy(
    gramians: &NodeGramianSet,
    delta: &ActuatorSet,
    x0: &DVector<f64>,
    x1: &DVector<f64>,
) -> Result<f64, SystemError> {
    let n = gramians.n();
    if x0.len() != n {
        return Err(SystemError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if x1.len() != n {
        return Err(SystemError::DimensionMismatch {
            expected: n,
            got: x1.len(),
        });
    }
    let report = is_controllable(gramians, delta)?;
    if !report.controllable {
        return Err(SystemError::Uncontrollable {
            lambda_min: report.lambda_min,
            threshold: report.threshold,
        });
    }
    let v = match gramians.system().horizon() {
        Horizon::Finite { t0, t1 } => {
            let drift = expm(&(gramians.system().a() * (t1 - t0)))?;
            x1 - drift * x0
        }
        Horizon::Infinite => x1.clone(),
    };
    let w = assemble_gramian(gramians, delta)?;
    let chol = w
        .matrix()
        .clone()
        .cholesky()
        .ok_or(SystemError::Uncontrollable {
            lambda_min: report.lambda_min,
            threshold: report.threshold,
        })?;
    let y = chol.solve(&v);
    Ok(v.dot(&y))
}
