//! Actuator selection under average-control-energy constraints.
//!
//! Both placement problems solved here are NP-hard, so the solvers are
//! greedy algorithms with provable approximation guarantees, built on two
//! structural facts about the energy metric `f(Δ) = tr((W_Δ + εI)⁻¹)`:
//! it is monotone decreasing and supermodular in `Δ`.
//!
//! * [`greedy_min_actuators`] — smallest actuator set with
//!   `tr((W_Δ + εI)⁻¹) ≤ E` for a caller-chosen `ε ≤ 1/E`, by greedy
//!   trace-decrease maximization. Within the `ε ≤ 1/E` regime, meeting the
//!   bound certifies controllability of the selected set.
//! * [`min_actuators_bounded_energy`] — the exact-metric variant
//!   `tr(W_Δ⁻¹) ≤ (1+c)·E`: an outer bisection drives `ε` until the
//!   perturbation gap `tr(W_Δ⁻¹) − tr((W_Δ+εI)⁻¹)` is below `c·E`.
//! * [`min_energy_budgeted`] — minimize `tr(W_Δ⁻¹)` subject to `|Δ| ≤ r`,
//!   by bisection on the energy bound fed to the previous solver.
//! * [`compute_bound_f`] — the multiplicative cardinality-optimality bound
//!   `F = 1 + ln[(n·ε⁻¹ − tr((W_V+εI)⁻¹)) / (E − tr((W_V+εI)⁻¹))]`
//!   certifying `|Δ_greedy| ≤ F · |Δ_opt|`.

use nalgebra::{Cholesky, DMatrix};
use thiserror::Error;

use crate::linalg::{symmetric_eigenvalues, PsdMatrix};
use crate::system::{
    assemble_gramian, energy_metric, is_controllable, metric_of_assembled, ActuatorSet,
    NodeGramianSet, SystemError,
};

/// Relative tolerance under which two marginal gains count as tied; the
/// lowest node index wins a tie, which pins the selection order across
/// runs and platforms.
pub const GAIN_TIE_RELATIVE: f64 = 1e-12;

/// Numerator of the smallest `ε` the bisection of
/// [`min_actuators_bounded_energy`] will try (`ε_floor = 1e-300 / E`).
/// Reaching it means the requested gap accuracy cannot be certified in
/// `f64` arithmetic.
pub const EPS_FLOOR_NUMERATOR: f64 = 1e-300;

/// Scale factor of the "effectively unbounded" energy used by
/// [`default_controllable_set`].
pub const DELTA_C_SCALE: f64 = 1e12;

/// Cap on [`default_controllable_set`]'s energy bound, as a fraction of the
/// reciprocal controllability tolerance: certified sets then have
/// `λ_min(W_Δ)` roughly `(margin·(1+c))⁻¹` times the tolerance — two
/// orders of magnitude of headroom at the default `c` — so the seed is
/// controllable under the exact Gramian test.
pub const CONTROLLABLE_SEED_MARGIN: f64 = 1e-2;

/// Errors from the placement solvers.
#[derive(Debug, Error)]
pub enum PlacementError {
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(
        "energy bound {e_bound:.6e} is below the feasibility floor {floor:.6e}; \
         even full actuation cannot meet it"
    )]
    InfeasibleBound { e_bound: f64, floor: f64 },
    #[error(
        "eps = {eps:.6e} exceeds 1/E = {limit:.6e}; the controllability \
         certificate requires eps <= 1/E"
    )]
    EpsAboveCertificateLimit { eps: f64, limit: f64 },
    #[error("parameter {name} must be a positive finite real, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("budget r = {r} is below the supplied controllable set size {delta_c_len}")]
    BudgetBelowDeltaC { r: usize, delta_c_len: usize },
    #[error("the supplied delta_C is not a controllable actuator set")]
    DeltaCNotControllable,
    #[error("the full actuator set is not controllable, so no subset can be")]
    SystemNotControllable,
    #[error("cannot certify the requested accuracy in f64 arithmetic: {detail}")]
    CertificationFailed { detail: String },
}

/// One accepted greedy step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreedyStep {
    /// The node added (1-based).
    pub node: usize,
    /// Its marginal gain `tr((W_Δ+εI)⁻¹) − tr((W_{Δ∪{a}}+εI)⁻¹)` at
    /// selection time.
    pub gain: f64,
    /// Metric value after the node was added.
    pub metric_after: f64,
}

/// Full record of a greedy run: the accepted steps in order, plus how many
/// marginal-gain evaluations were spent (the quantity lazy evaluation
/// reduces).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GreedyTrace {
    pub steps: Vec<GreedyStep>,
    pub evaluations: usize,
}

/// One step of a bisection wrapper's outer loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BisectionIteration {
    /// ε-bisection step: the greedy ran (or was re-tested) at `eps`,
    /// returned `cardinality` actuators, and showed perturbation gap
    /// `tr(W_Δ⁻¹) − tr((W_Δ+εI)⁻¹) = gap`.
    Eps {
        eps: f64,
        cardinality: usize,
        gap: f64,
    },
    /// Energy-bisection step: the ε-solver ran with bound `e_bound`,
    /// returned `cardinality` actuators achieving `tr(W_Δ⁻¹) = achieved`.
    Energy {
        e_bound: f64,
        cardinality: usize,
        achieved: f64,
    },
}

/// Outcome of a placement solve.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementResult {
    /// Selected actuator set.
    pub delta: ActuatorSet,
    /// The solver's working metric at `eps_used`:
    /// `tr((W_Δ + (ε + τ_Δ)·I)⁻¹)` with the spectral noise floor
    /// `τ_Δ =` [`SPECTRAL_NOISE_FLOOR`]`·tr(W_Δ)` (see [`MetricState`]).
    pub metric_eps: f64,
    /// `tr(W_Δ⁻¹)`; `+∞` when the set is not controllable.
    pub metric_exact: f64,
    /// The ε the final greedy run was certified at.
    pub eps_used: f64,
    /// The energy bound the final greedy run was solved against.
    pub e_used: f64,
    /// Cardinality-optimality factor `F` at `(e_used, eps_used)`, when the
    /// defining denominator is positive.
    pub bound_f: Option<f64>,
    /// Gramian-based controllability verdict for `delta`.
    pub controllable: bool,
    /// The final greedy run's step log.
    pub trace: GreedyTrace,
    /// Outer-loop log of the bisection wrappers (empty for the plain
    /// greedy).
    pub iterations: Vec<BisectionIteration>,
}

/// The multiplicative optimality bound and the additive terms of its
/// asymptotic form `F = O(log n + log ε⁻¹ + log slack⁻¹)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundF {
    /// `F = 1 + ln[(n·ε⁻¹ − tr((W_V+εI)⁻¹)) / (E − tr((W_V+εI)⁻¹))]`.
    pub value: f64,
    /// `ln n`.
    pub log_n: f64,
    /// `ln(1/ε)`.
    pub log_inv_eps: f64,
    /// `ln(1/(E − tr(W_V⁻¹)))`, `+∞` when `E` sits at or below the exact
    /// feasibility floor.
    pub log_inv_slack: f64,
}

fn validate_positive(name: &'static str, value: f64) -> Result<(), PlacementError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(PlacementError::InvalidParameter { name, value })
    }
}

/// Relative spectral noise floor of a computed Gramian: eigenvalues below
/// `ε_machine · tr(W_Δ)` are indistinguishable from zero at this precision
/// (storing or assembling `W_Δ` already perturbs its spectrum by that
/// much), so reciprocating them would report digits the arithmetic cannot
/// support. The solver therefore evaluates its working metric with the
/// shift `ε + ε_machine·tr(W_Δ)`. Because the trace is additive over node
/// Gramians, this equals running the unmodified algorithm on the
/// regularized nodes `W̃_i = W_i + ε_machine·tr(W_i)·I`, which are PSD, so
/// monotonicity, supermodularity, and every greedy guarantee carry over
/// verbatim. The effect is a deterministic saturation of the trace at
/// `≈ tr(W_Δ)⁻¹/ε_machine` instead of a blow-up through rounding noise —
/// matching what any dense inverse computes for such a matrix — while
/// user-facing exact values ([`energy_metric`] at `ε = 0`) keep reporting
/// `+∞` beyond the controllability tolerance.
pub const SPECTRAL_NOISE_FLOOR: f64 = f64::EPSILON;

/// Greedy working state: the current set, its assembled Gramian, and the
/// metric value.
///
/// The stored metric is `tr((W_Δ + (ε + τ_Δ)·I)⁻¹)` with the noise floor
/// `τ_Δ =` [`SPECTRAL_NOISE_FLOOR`]`·tr(W_Δ)`; away from the floor (every
/// eigenvalue `≫ τ_Δ`) it agrees with [`energy_metric`] to rounding.
/// Candidate evaluations factorize the shifted sum `W_Δ + W_a + (ε+τ)I`
/// once per candidate (Cholesky; `tr((LLᵀ)⁻¹) = ‖L⁻¹‖²_F`, so no explicit
/// inverse is formed), falling back to a symmetric eigendecomposition with
/// the shift applied analytically when the sum sits on the numerical PSD
/// boundary. Accepting a node re-assembles the Gramian in canonical
/// ascending node order, so the stored metric is exactly what the same
/// evaluation reports for the re-assembled set.
pub struct MetricState<'a> {
    gramians: &'a NodeGramianSet,
    delta: ActuatorSet,
    assembled: PsdMatrix,
    eps: f64,
    noise_floor: f64,
    metric: f64,
}

impl<'a> MetricState<'a> {
    /// State for an explicit starting set.
    pub fn new(
        gramians: &'a NodeGramianSet,
        delta: ActuatorSet,
        eps: f64,
    ) -> Result<Self, PlacementError> {
        validate_positive("eps", eps)?;
        let assembled = assemble_gramian(gramians, &delta)?;
        let noise_floor = SPECTRAL_NOISE_FLOOR * assembled.trace();
        let metric = metric_of_assembled(gramians, &assembled, eps + noise_floor)?;
        Ok(MetricState {
            gramians,
            delta,
            assembled,
            eps,
            noise_floor,
            metric,
        })
    }

    /// State for the empty set (metric `n/ε`).
    pub fn empty(gramians: &'a NodeGramianSet, eps: f64) -> Result<Self, PlacementError> {
        Self::new(gramians, ActuatorSet::empty(gramians.n()), eps)
    }

    /// The node-Gramian cache this state draws from.
    pub fn gramians(&self) -> &'a NodeGramianSet {
        self.gramians
    }

    /// Current actuator set.
    pub fn delta(&self) -> &ActuatorSet {
        &self.delta
    }

    /// The ε this state evaluates at.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `tr((W_Δ + (ε + τ_Δ)·I)⁻¹)` for the current set, with `τ_Δ` the
    /// spectral noise floor of `W_Δ`.
    pub fn metric(&self) -> f64 {
        self.metric
    }

    /// Metric of the current set at a different ε, **without** the noise
    /// floor (`0` gives the exact `tr(W_Δ⁻¹)`, possibly `+∞`).
    pub fn metric_at(&self, eps: f64) -> Result<f64, PlacementError> {
        Ok(metric_of_assembled(self.gramians, &self.assembled, eps)?)
    }

    /// Metric of the current set at a different ε, evaluated the way the
    /// working metric is: with the noise floor `τ_Δ` added to the shift.
    pub fn metric_regularized_at(&self, eps: f64) -> Result<f64, PlacementError> {
        Ok(metric_of_assembled(
            self.gramians,
            &self.assembled,
            eps + self.noise_floor,
        )?)
    }

    /// The exact metric as the working precision can state it:
    /// `tr((W_Δ + τ_Δ·I)⁻¹)`, i.e. ε = 0 up to the noise floor. For the
    /// empty set (`τ = 0`) this is the true exact metric, `+∞`.
    pub fn saturated_exact(&self) -> Result<f64, PlacementError> {
        Ok(metric_of_assembled(
            self.gramians,
            &self.assembled,
            self.noise_floor,
        )?)
    }

    /// `tr((W_{Δ∪{a}} + (ε + τ)·I)⁻¹)` without committing the node, `τ`
    /// being the noise floor of the candidate sum.
    pub fn candidate_metric(&self, candidate: usize) -> Result<f64, PlacementError> {
        let n = self.gramians.n();
        if candidate == 0 || candidate > n {
            return Err(SystemError::NodeOutOfRange { node: candidate, n }.into());
        }
        if self.delta.contains(candidate) {
            return Err(SystemError::DuplicateNode { node: candidate }.into());
        }
        let sum = self.assembled.matrix() + self.gramians.node(candidate).matrix();
        let noise_floor = SPECTRAL_NOISE_FLOOR * sum.trace();
        shifted_inverse_trace(sum, self.eps + noise_floor)
    }

    /// Commit a node: re-assemble the Gramian in canonical order and refresh
    /// the metric.
    pub fn add_node(&mut self, node: usize) -> Result<(), PlacementError> {
        let delta = self.delta.with_node(node)?;
        let assembled = assemble_gramian(self.gramians, &delta)?;
        let noise_floor = SPECTRAL_NOISE_FLOOR * assembled.trace();
        let metric = metric_of_assembled(self.gramians, &assembled, self.eps + noise_floor)?;
        self.delta = delta;
        self.assembled = assembled;
        self.noise_floor = noise_floor;
        self.metric = metric;
        Ok(())
    }
}

/// `tr((S + εI)⁻¹)` for a PSD-by-construction sum `S`.
fn shifted_inverse_trace(sum: DMatrix<f64>, eps: f64) -> Result<f64, PlacementError> {
    let n = sum.nrows();
    let mut shifted = sum.clone();
    for i in 0..n {
        shifted[(i, i)] += eps;
    }
    if let Some(chol) = Cholesky::new(shifted) {
        if let Some(l_inv) = chol
            .l()
            .solve_lower_triangular(&DMatrix::<f64>::identity(n, n))
        {
            return Ok(l_inv.iter().map(|v| v * v).sum());
        }
    }
    // Numerically semidefinite shifted sum: go through the spectrum of the
    // unshifted sum and add ε analytically, clamping rounding-level
    // negative eigenvalues at zero.
    let eigs = symmetric_eigenvalues(&sum).map_err(SystemError::from)?;
    Ok(eigs.iter().map(|l| 1.0 / (l.max(0.0) + eps)).sum())
}

/// Marginal gain of a candidate: the decrease
/// `tr((W_Δ+εI)⁻¹) − tr((W_{Δ∪{a}}+εI)⁻¹)`, clamped at zero (monotonicity
/// makes it nonnegative up to rounding).
pub fn marginal_gain(current: &MetricState<'_>, candidate: usize) -> Result<f64, PlacementError> {
    let after = current.candidate_metric(candidate)?;
    Ok((current.metric() - after).max(0.0))
}

struct GreedyOutcome<'a> {
    state: MetricState<'a>,
    trace: GreedyTrace,
    /// `tr(W_Δ⁻¹)` of the final set (`+∞` if uncontrollable).
    exact: f64,
    /// `tr((W_Δ + τ_Δ·I)⁻¹)`: the exact metric saturated at the spectral
    /// noise floor — finite whenever the set is nonempty, and what the
    /// perturbation-gap certificate compares against.
    exact_saturated: f64,
}

/// The greedy core shared by every solver.
///
/// Lazy mode prunes candidates whose stale gain bound cannot beat the
/// current best: gains shrink as the set grows (supermodularity), so a
/// previously measured gain is an upper bound on the fresh one. The cutoff
/// `best·(1 + tie) − slack` with `slack = tie·metric` keeps an absolute
/// margin three orders of magnitude above rounding noise, so pruning never
/// changes the selection: both modes pick the identical node sequence, and
/// lazy never evaluates a candidate eager would not.
fn greedy_run<'a>(
    gramians: &'a NodeGramianSet,
    e_bound: f64,
    eps: f64,
    lazy: bool,
) -> Result<GreedyOutcome<'a>, PlacementError> {
    validate_positive("E", e_bound)?;
    validate_positive("eps", eps)?;
    let limit = 1.0 / e_bound;
    if eps > limit {
        return Err(PlacementError::EpsAboveCertificateLimit { eps, limit });
    }
    let n = gramians.n();
    let full_metric = energy_metric(gramians, &ActuatorSet::full(n), eps)?;
    if full_metric > e_bound {
        return Err(PlacementError::InfeasibleBound {
            e_bound,
            floor: full_metric,
        });
    }

    let mut state = MetricState::empty(gramians, eps)?;
    let mut trace = GreedyTrace::default();
    let mut stale_bound = vec![f64::INFINITY; n + 1];

    while state.metric() > e_bound {
        let slack = GAIN_TIE_RELATIVE * state.metric();
        let mut best: Option<(usize, f64)> = None;
        for candidate in 1..=n {
            if state.delta().contains(candidate) {
                continue;
            }
            if lazy {
                if let Some((_, best_gain)) = best {
                    let cutoff = best_gain * (1.0 + GAIN_TIE_RELATIVE) - slack;
                    if stale_bound[candidate] <= cutoff {
                        continue;
                    }
                }
            }
            let gain = marginal_gain(&state, candidate)?;
            trace.evaluations += 1;
            stale_bound[candidate] = gain;
            match best {
                None => best = Some((candidate, gain)),
                Some((_, best_gain)) if gain > best_gain * (1.0 + GAIN_TIE_RELATIVE) => {
                    best = Some((candidate, gain));
                }
                Some(_) => {}
            }
        }
        let (node, gain) = best.expect("full actuation meets the bound, so a candidate exists");
        state.add_node(node)?;
        trace.steps.push(GreedyStep {
            node,
            gain,
            metric_after: state.metric(),
        });
    }

    let exact = state.metric_at(0.0)?;
    let exact_saturated = state.saturated_exact()?;
    Ok(GreedyOutcome {
        state,
        trace,
        exact,
        exact_saturated,
    })
}

fn result_from_outcome(
    gramians: &NodeGramianSet,
    outcome: GreedyOutcome<'_>,
    e_used: f64,
    iterations: Vec<BisectionIteration>,
) -> Result<PlacementResult, PlacementError> {
    let eps_used = outcome.state.eps();
    let delta = outcome.state.delta().clone();
    let controllable = is_controllable(gramians, &delta)?.controllable;
    let bound_f = compute_bound_f(gramians, e_used, eps_used)
        .ok()
        .map(|b| b.value);
    Ok(PlacementResult {
        metric_eps: outcome.state.metric(),
        metric_exact: outcome.exact,
        delta,
        eps_used,
        e_used,
        bound_f,
        controllable,
        trace: outcome.trace,
        iterations,
    })
}

/// Greedy solver for the ε-perturbed problem: the (approximately) smallest
/// set with `tr((W_Δ + εI)⁻¹) ≤ E`.
///
/// Nodes are added by maximal trace decrease until the bound is met; ties
/// within [`GAIN_TIE_RELATIVE`] go to the lowest index. Because `ε ≤ 1/E`
/// is enforced, any set meeting the bound has
/// `λ_min(W_Δ) ≥ 1/E − ε − τ_Δ` with `τ_Δ` the spectral noise floor of
/// `W_Δ`, which certifies controllability at working precision whenever
/// `1/E − ε` clears the floor — the returned `controllable` flag reports
/// the actual Gramian test. The
/// returned `bound_f` certifies `|Δ| ≤ F·|Δ*|` against the unknown optimum
/// `Δ*`. With `lazy` set, candidates are pruned by stale gain bounds
/// (supermodularity); the selected set and step order are identical to the
/// eager scan, only the evaluation count drops.
pub fn greedy_min_actuators(
    gramians: &NodeGramianSet,
    e_bound: f64,
    eps: f64,
    lazy: bool,
) -> Result<PlacementResult, PlacementError> {
    let outcome = greedy_run(gramians, e_bound, eps, lazy)?;
    result_from_outcome(gramians, outcome, e_bound, Vec::new())
}

/// Solver for the exact-metric problem: the (approximately) smallest set
/// with `tr(W_Δ⁻¹) ≤ (1+c)·E`, feasibility floor `E ≥ tr(W_V⁻¹)`.
///
/// Bisects on `ε ∈ (0, 1/E]`, running the greedy at each probe and testing
/// the perturbation gap `tr(W_Δ⁻¹) − tr((W_Δ+εI)⁻¹)` against `c·E`; the
/// interval accuracy `a` starts at `a0` and halves whenever a pass fails to
/// certify. Both sides of the gap are evaluated at the solver's working
/// precision — shifted by the spectral noise floor
/// [`SPECTRAL_NOISE_FLOOR`]`·tr(W_Δ)`, below which the spectrum of a
/// computed Gramian carries no information — so the certificate states the
/// guarantee as sharply as `f64` can express it; away from the floor the
/// shift is far below the certificate's own slack. On success the returned
/// set satisfies both exit conditions — `tr((W_Δ+εI)⁻¹) ≤ E` and gap
/// `≤ c·E` — hence `tr(W_Δ⁻¹) ≤ (1+c)·E` at that precision, and
/// `iterations` logs every `(ε, |Δ|, gap)` triple tested. The solver fails
/// with [`PlacementError::CertificationFailed`] only when the requested
/// accuracy is below what `f64` arithmetic can resolve.
pub fn min_actuators_bounded_energy(
    gramians: &NodeGramianSet,
    e_bound: f64,
    c: f64,
    a0: f64,
    lazy: bool,
) -> Result<PlacementResult, PlacementError> {
    validate_positive("E", e_bound)?;
    validate_positive("c", c)?;
    validate_positive("a0", a0)?;
    let full = ActuatorSet::full(gramians.n());
    let floor = energy_metric(gramians, &full, 0.0)?;
    if !floor.is_finite() {
        return Err(PlacementError::SystemNotControllable);
    }
    if e_bound < floor {
        return Err(PlacementError::InfeasibleBound { e_bound, floor });
    }

    let eps_floor = EPS_FLOOR_NUMERATOR / e_bound;
    let gap_limit = c * e_bound;
    let mut accuracy = a0;
    let mut lower = 0.0_f64;
    let mut upper = 1.0 / e_bound;
    let mut eps = 0.5 * (lower + upper);
    let mut iterations: Vec<BisectionIteration> = Vec::new();
    let mut latest: Option<GreedyOutcome<'_>> = None;

    loop {
        while upper - lower > accuracy {
            let run = greedy_run(gramians, e_bound, eps, lazy)?;
            let gap = run.exact_saturated - run.state.metric();
            iterations.push(BisectionIteration::Eps {
                eps,
                cardinality: run.state.delta().len(),
                gap,
            });
            if gap > gap_limit {
                upper = eps;
            } else {
                lower = eps;
            }
            latest = Some(run);
            let mid = 0.5 * (lower + upper);
            if !(mid > lower && mid < upper) {
                // The interval collapsed to adjacent floats; bisecting
                // further cannot move ε.
                break;
            }
            eps = mid;
            if eps < eps_floor {
                return Err(PlacementError::CertificationFailed {
                    detail: format!(
                        "eps bisection reached the floor {eps_floor:.3e} with the gap \
                         still above c*E = {gap_limit:.6e}"
                    ),
                });
            }
        }
        // A coarse first accuracy can skip the bisection entirely; seed the
        // gap test with a greedy run at the initial midpoint ε.
        if latest.is_none() {
            let run = greedy_run(gramians, e_bound, eps, lazy)?;
            let gap = run.exact_saturated - run.state.metric();
            iterations.push(BisectionIteration::Eps {
                eps,
                cardinality: run.state.delta().len(),
                gap,
            });
            latest = Some(run);
        }
        let probe = latest.as_ref().expect("seeded above");
        let probe_gap = probe.exact_saturated - probe.state.metric_regularized_at(eps)?;
        iterations.push(BisectionIteration::Eps {
            eps,
            cardinality: probe.state.delta().len(),
            gap: probe_gap,
        });
        if probe_gap > gap_limit {
            upper = eps;
            eps = 0.5 * (lower + upper);
            if eps < eps_floor {
                return Err(PlacementError::CertificationFailed {
                    detail: format!(
                        "eps bisection reached the floor {eps_floor:.3e} with the gap \
                         still above c*E = {gap_limit:.6e}"
                    ),
                });
            }
        }
        let final_run = greedy_run(gramians, e_bound, eps, lazy)?;
        let final_gap = final_run.exact_saturated - final_run.state.metric();
        iterations.push(BisectionIteration::Eps {
            eps,
            cardinality: final_run.state.delta().len(),
            gap: final_gap,
        });
        if final_gap <= gap_limit {
            return result_from_outcome(gramians, final_run, e_bound, iterations);
        }
        latest = Some(final_run);
        accuracy *= 0.5;
        if accuracy < f64::MIN_POSITIVE {
            return Err(PlacementError::CertificationFailed {
                detail: "the bisection accuracy parameter underflowed before the gap \
                         test could be certified"
                    .to_string(),
            });
        }
    }
}

/// Solver for the budgeted problem: minimize `tr(W_Δ⁻¹)` over `|Δ| ≤ r`.
///
/// Bisects the energy bound over `[tr(W_V⁻¹), tr(W_{Δ_C}⁻¹)]`, where
/// `delta_c` is any controllable set within budget (see
/// [`default_controllable_set`]), running [`min_actuators_bounded_energy`]
/// at each probe and tightening the interval according to whether the
/// returned set fits the budget. Every in-budget probe is a certified
/// feasible solution, so the best one seen (lowest exact metric) is
/// returned, with the bracket resolved to width `a0p`; near the
/// cardinality flip boundary the last probe alone can land on the
/// over-budget side, which must not discard earlier feasible solutions.
/// Only when no probe ever fit the budget is the guaranteed-feasible
/// `delta_c` itself returned. A budget `r ≥ n` short-circuits to the full
/// set.
pub fn min_energy_budgeted(
    gramians: &NodeGramianSet,
    r: usize,
    delta_c: &ActuatorSet,
    c: f64,
    a0: f64,
    a0p: f64,
    lazy: bool,
) -> Result<PlacementResult, PlacementError> {
    if r == 0 {
        return Err(PlacementError::InvalidParameter {
            name: "r",
            value: 0.0,
        });
    }
    validate_positive("c", c)?;
    validate_positive("a0", a0)?;
    validate_positive("a0p", a0p)?;
    let n = gramians.n();
    if r >= n {
        return full_set_result(gramians);
    }
    if !is_controllable(gramians, delta_c)?.controllable {
        return Err(PlacementError::DeltaCNotControllable);
    }
    if delta_c.len() > r {
        return Err(PlacementError::BudgetBelowDeltaC {
            r,
            delta_c_len: delta_c.len(),
        });
    }

    let full = ActuatorSet::full(n);
    let mut lower = energy_metric(gramians, &full, 0.0)?;
    let delta_c_value = energy_metric(gramians, delta_c, 0.0)?;
    debug_assert!(
        lower.is_finite() && delta_c_value.is_finite(),
        "controllability of delta_c guarantees finite traces"
    );
    let mut upper = delta_c_value;
    let mut energy = 0.5 * (lower + upper);
    let mut iterations: Vec<BisectionIteration> = Vec::new();
    // The best certified in-budget solution seen so far; `<=` keeps the
    // probe with the smallest bound among equal-value solutions, so
    // `e_used` reports the tightest certificate.
    let mut best: Option<PlacementResult> = None;

    loop {
        let probe = min_actuators_bounded_energy(gramians, energy, c, a0, lazy)?;
        iterations.push(BisectionIteration::Energy {
            e_bound: energy,
            cardinality: probe.delta.len(),
            achieved: probe.metric_exact,
        });
        if probe.delta.len() > r {
            lower = energy;
        } else {
            upper = energy;
            if best
                .as_ref()
                .map_or(true, |b| probe.metric_exact <= b.metric_exact)
            {
                best = Some(probe);
            }
        }
        if upper - lower <= a0p {
            break;
        }
        let mid = 0.5 * (lower + upper);
        if !(mid > lower && mid < upper) {
            break;
        }
        energy = mid;
    }

    if let Some(mut result) = best {
        iterations.extend(result.iterations);
        result.iterations = iterations;
        return Ok(result);
    }

    // No probe ever fit the budget: fall back to the caller's controllable
    // set, which fits by precondition.
    let eps_used = 1.0 / delta_c_value;
    let metric_eps = energy_metric(gramians, delta_c, eps_used)?;
    iterations.push(BisectionIteration::Energy {
        e_bound: delta_c_value,
        cardinality: delta_c.len(),
        achieved: delta_c_value,
    });
    Ok(PlacementResult {
        delta: delta_c.clone(),
        metric_eps,
        metric_exact: delta_c_value,
        eps_used,
        e_used: delta_c_value,
        bound_f: compute_bound_f(gramians, delta_c_value, eps_used)
            .ok()
            .map(|b| b.value),
        controllable: true,
        trace: GreedyTrace::default(),
        iterations,
    })
}

fn full_set_result(gramians: &NodeGramianSet) -> Result<PlacementResult, PlacementError> {
    let full = ActuatorSet::full(gramians.n());
    let exact = energy_metric(gramians, &full, 0.0)?;
    if !exact.is_finite() {
        return Err(PlacementError::SystemNotControllable);
    }
    let eps_used = 1.0 / exact;
    let metric_eps = energy_metric(gramians, &full, eps_used)?;
    let controllable = is_controllable(gramians, &full)?.controllable;
    Ok(PlacementResult {
        delta: full,
        metric_eps,
        metric_exact: exact,
        eps_used,
        e_used: exact,
        bound_f: compute_bound_f(gramians, exact, eps_used)
            .ok()
            .map(|b| b.value),
        controllable,
        trace: GreedyTrace::default(),
        iterations: Vec::new(),
    })
}

/// A default controllable seed set for [`min_energy_budgeted`]: the
/// ε-solver's answer at an effectively unbounded energy, which yields a
/// (near-)minimal controllable set.
///
/// The bound is `1e12` times the larger of `n/tr(W_V)` (the metric's natural
/// scale) and the feasibility floor `tr(W_V⁻¹)`, so it is always feasible by
/// a wide margin — but capped at [`CONTROLLABLE_SEED_MARGIN`] over the
/// reciprocal controllability tolerance. The cap matters on systems whose
/// node Gramians are numerically singular: certification at energy `E`
/// forces `λ_min(W_Δ) ≥ 1/((1+c)·E) − τ_Δ`, so keeping
/// `E ≤ margin/tolerance` guarantees the returned set passes the exact
/// Gramian controllability test — the precondition of
/// [`min_energy_budgeted`] — rather than only the ε-certificate.
pub fn default_controllable_set(
    gramians: &NodeGramianSet,
    c: f64,
    a0: f64,
    lazy: bool,
) -> Result<PlacementResult, PlacementError> {
    let full = ActuatorSet::full(gramians.n());
    let floor = energy_metric(gramians, &full, 0.0)?;
    if !floor.is_finite() {
        return Err(PlacementError::SystemNotControllable);
    }
    let n = gramians.n() as f64;
    let scale = n / gramians.full_gramian().trace();
    let unbounded = (DELTA_C_SCALE * scale).max(DELTA_C_SCALE * floor);
    let ceiling = CONTROLLABLE_SEED_MARGIN / gramians.controllability_threshold();
    // At least double the floor so the bound stays comfortably feasible
    // even when the ceiling dips below the generic scale.
    let e_large = unbounded.min(ceiling).max(2.0 * floor);
    min_actuators_bounded_energy(gramians, e_large, c, a0, lazy)
}

/// The cardinality-optimality factor
/// `F = 1 + ln[(n·ε⁻¹ − tr((W_V+εI)⁻¹)) / (E − tr((W_V+εI)⁻¹))]`,
/// together with the additive terms of its asymptotic form.
///
/// Any greedy solution at `(E, ε)` has at most `F` times the optimal
/// cardinality. Errors with [`PlacementError::InfeasibleBound`] when the
/// denominator `E − tr((W_V+εI)⁻¹)` is not positive.
pub fn compute_bound_f(
    gramians: &NodeGramianSet,
    e_bound: f64,
    eps: f64,
) -> Result<BoundF, PlacementError> {
    validate_positive("E", e_bound)?;
    validate_positive("eps", eps)?;
    let n = gramians.n() as f64;
    let full = ActuatorSet::full(gramians.n());
    let full_metric_eps = energy_metric(gramians, &full, eps)?;
    let slack = e_bound - full_metric_eps;
    if slack <= 0.0 {
        return Err(PlacementError::InfeasibleBound {
            e_bound,
            floor: full_metric_eps,
        });
    }
    let numerator = n / eps - full_metric_eps;
    let full_metric_exact = energy_metric(gramians, &full, 0.0)?;
    let exact_slack = e_bound - full_metric_exact;
    Ok(BoundF {
        value: 1.0 + (numerator / slack).ln(),
        log_n: n.ln(),
        log_inv_eps: -eps.ln(),
        log_inv_slack: if exact_slack > 0.0 {
            -exact_slack.ln()
        } else {
            f64::INFINITY
        },
    })
}
