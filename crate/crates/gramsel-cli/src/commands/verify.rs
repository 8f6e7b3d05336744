//! `gramsel verify`: sampled property suites over a Gramian cache.
//!
//! Property violations are report content, not process errors: the command
//! exits 0 with `passed: false` and a counterexample dump. Only broken
//! inputs (missing cache, oversized oracle suite) exit nonzero.

use gramsel::baselines::{
    brute_force_min_actuators, brute_force_min_actuators_perturbed,
    brute_force_min_energy_perturbed, fact2_bound, naive_budget_greedy,
};
use gramsel::instances::rng::Stream;
use gramsel::io;
use gramsel::placement::{
    greedy_min_actuators, marginal_gain, min_actuators_bounded_energy, MetricState,
    PlacementError,
};
use gramsel::system::{energy_metric, ActuatorSet, NodeGramianSet};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Params;
use crate::error::CliError;
use crate::{SuiteArg, VerifyArgs};

/// Oracle-backed suites enumerate all 2ⁿ subsets; this keeps them snappy.
const ORACLE_MAX_DIM: usize = 12;
/// Relative slack tolerated before an inequality counts as violated.
const SLACK_TOL: f64 = 1e-9;

/// Machine-readable suite outcome, printed as one JSON object.
#[derive(Serialize)]
struct SuiteReport {
    suite: &'static str,
    n: usize,
    method_tag: String,
    seed: u64,
    samples_requested: usize,
    samples_evaluated: usize,
    passed: bool,
    failures: Vec<Value>,
    stats: Value,
}

pub fn run(args: &VerifyArgs, defaults: &Params) -> Result<(), CliError> {
    let file = io::load_cache_file(&args.cache)?;
    let method_tag = file.method_tag.clone();
    let gramians = file.into_gramians()?;
    let n = gramians.n();

    let (name, default_samples) = match args.suite {
        SuiteArg::Supermodularity => ("supermodularity", 1000),
        SuiteArg::Oracle => ("oracle", 20),
        SuiteArg::Fact1 => ("fact1", 20),
        SuiteArg::Fact2 => ("fact2", 20),
    };
    if args.suite != SuiteArg::Supermodularity && n > ORACLE_MAX_DIM {
        return Err(CliError::Usage(format!(
            "the {name} suite enumerates all actuator subsets and requires \
             n <= {ORACLE_MAX_DIM}, got n = {n}"
        )));
    }
    let samples = args.samples.unwrap_or(default_samples);
    let seed = args.seed.unwrap_or(1);

    let mut stream = Stream::new(seed);
    let body = match args.suite {
        SuiteArg::Supermodularity => supermodularity(&gramians, samples, &mut stream)?,
        SuiteArg::Oracle => oracle(&gramians, samples, &mut stream, defaults)?,
        SuiteArg::Fact1 => fact1(&gramians, samples, &mut stream)?,
        SuiteArg::Fact2 => fact2(
            &gramians,
            samples,
            &mut stream,
            args.eps.unwrap_or(defaults.eps),
        )?,
    };

    let report = SuiteReport {
        suite: name,
        n,
        method_tag,
        seed,
        samples_requested: samples,
        samples_evaluated: body.evaluated,
        passed: body.failures.is_empty(),
        failures: body.failures,
        stats: body.stats,
    };
    eprintln!(
        "{name}: {} ({} of {} samples evaluated)",
        if report.passed { "PASS" } else { "FAIL" },
        report.samples_evaluated,
        report.samples_requested,
    );

    let json = io::to_json_string(&report)?;
    println!("{json}");
    if let Some(path) = &args.out {
        std::fs::write(path, format!("{json}\n"))?;
    }
    Ok(())
}

struct SuiteBody {
    evaluated: usize,
    failures: Vec<Value>,
    stats: Value,
}

/// Diminishing returns of the ε-perturbed metric: for Δ₁ ⊆ Δ₂ and a ∉ Δ₂,
/// the gain of `a` at Δ₁ is at least its gain at Δ₂ (up to rounding slack).
fn supermodularity(
    gramians: &NodeGramianSet,
    samples: usize,
    stream: &mut Stream,
) -> Result<SuiteBody, CliError> {
    let n = gramians.n();
    let mut evaluated = 0;
    let mut failures = Vec::new();
    let mut min_relative_slack = f64::INFINITY;
    // Each attempt leaves at least one candidate with probability ≥ 0.4ⁿ⁻…;
    // in practice almost every attempt is usable, the cap is a safety net.
    let max_attempts = samples.saturating_mul(50).max(50);

    for _ in 0..max_attempts {
        if evaluated == samples {
            break;
        }
        let mut inner_nodes = Vec::new();
        let mut outer_nodes = Vec::new();
        for i in 1..=n {
            let r = stream.uniform();
            if r < 0.30 {
                inner_nodes.push(i);
                outer_nodes.push(i);
            } else if r < 0.60 {
                outer_nodes.push(i);
            }
        }
        let candidates: Vec<usize> = (1..=n).filter(|i| !outer_nodes.contains(i)).collect();
        let pick = stream.next_u64();
        if candidates.is_empty() {
            continue;
        }
        let a = candidates[(pick % candidates.len() as u64) as usize];
        // ε log-uniform on [1e-2, 1): small enough to stress conditioning,
        // large enough to stay far from the rounding floor.
        let eps = 10f64.powf(-2.0 * stream.uniform());

        let inner = ActuatorSet::new(inner_nodes, n).map_err(PlacementError::from)?;
        let outer = ActuatorSet::new(outer_nodes, n).map_err(PlacementError::from)?;
        let inner_state = MetricState::new(gramians, inner.clone(), eps)?;
        let outer_state = MetricState::new(gramians, outer.clone(), eps)?;
        let gain_inner = marginal_gain(&inner_state, a)?;
        let gain_outer = marginal_gain(&outer_state, a)?;

        evaluated += 1;
        let scale = 1.0 + gain_outer.abs();
        let slack = gain_inner - gain_outer;
        min_relative_slack = min_relative_slack.min(slack / scale);
        if slack < -SLACK_TOL * scale {
            failures.push(json!({
                "inner": inner.members(),
                "outer": outer.members(),
                "candidate": a,
                "eps": eps,
                "gain_inner": gain_inner,
                "gain_outer": gain_outer,
                "slack": slack,
            }));
        }
    }

    Ok(SuiteBody {
        evaluated,
        failures,
        stats: json!({ "min_relative_slack": finite_or_null(min_relative_slack) }),
    })
}

/// Bisection solver vs. the exhaustive oracle: the certificates
/// `tr(W_Δ⁻¹) ≤ (1+c)·E`, `tr((W_Δ+εI)⁻¹) ≤ E`, and `|Δ| ≤ F·|Δ*|` must
/// hold on every sampled feasible bound, and the exact oracle can never
/// need more actuators than the solver used.
fn oracle(
    gramians: &NodeGramianSet,
    samples: usize,
    stream: &mut Stream,
    defaults: &Params,
) -> Result<SuiteBody, CliError> {
    let n = gramians.n();
    let full = ActuatorSet::full(n);
    let floor = energy_metric(gramians, &full, 0.0)?;
    if !floor.is_finite() {
        return Err(PlacementError::SystemNotControllable.into());
    }

    let mut failures = Vec::new();
    let mut max_cardinality_ratio = 0.0_f64;
    let mut max_metric_ratio = 0.0_f64;
    for _ in 0..samples {
        // Feasible bounds from 2× the floor up to 2·10⁴× it.
        let e_bound = floor * 2.0 * 10f64.powf(4.0 * stream.uniform());
        let result = min_actuators_bounded_energy(gramians, e_bound, defaults.c, defaults.a0, false)?;
        let exact = brute_force_min_actuators(gramians, e_bound)?;
        let perturbed = brute_force_min_actuators_perturbed(gramians, e_bound, result.eps_used)?;

        let metric_ok = result.metric_exact <= (1.0 + defaults.c) * e_bound * (1.0 + SLACK_TOL);
        let eps_metric_ok = result.metric_eps <= e_bound * (1.0 + SLACK_TOL);
        let cardinality_f_ok = match result.bound_f {
            Some(f) => {
                result.delta.len() as f64
                    <= f * perturbed.optimal_set.len() as f64 * (1.0 + SLACK_TOL)
            }
            None => true,
        };
        let oracle_not_worse = exact.optimal_set.len() <= result.delta.len();

        max_metric_ratio = max_metric_ratio.max(result.metric_exact / e_bound);
        if let Some(f) = result.bound_f {
            max_cardinality_ratio = max_cardinality_ratio.max(
                result.delta.len() as f64 / (f * perturbed.optimal_set.len() as f64),
            );
        }
        if !(metric_ok && eps_metric_ok && cardinality_f_ok && oracle_not_worse) {
            failures.push(json!({
                "e_bound": e_bound,
                "solver_set": result.delta.members(),
                "solver_metric_exact": result.metric_exact,
                "solver_metric_eps": result.metric_eps,
                "eps_used": result.eps_used,
                "bound_f": result.bound_f,
                "oracle_set": exact.optimal_set.members(),
                "oracle_value": exact.optimal_value,
                "perturbed_oracle_set": perturbed.optimal_set.members(),
                "metric_certificate": metric_ok,
                "eps_metric_certificate": eps_metric_ok,
                "cardinality_certificate": cardinality_f_ok,
                "oracle_not_worse": oracle_not_worse,
            }));
        }
    }

    Ok(SuiteBody {
        evaluated: samples,
        failures,
        stats: json!({
            "floor": floor,
            "max_metric_over_bound": max_metric_ratio,
            "max_cardinality_over_guarantee": max_cardinality_ratio,
        }),
    })
}

/// Per-run sharp cardinality guarantee of the plain greedy: with
/// `v(Δ) = tr((W_Δ+εI)⁻¹)` and `l` the first feasible step,
/// `l ≤ (1 + ln[(v(∅)−v(V)) / (v(Δ_{l−1})−v(V))]) · |Δ*|`.
fn fact1(
    gramians: &NodeGramianSet,
    samples: usize,
    stream: &mut Stream,
) -> Result<SuiteBody, CliError> {
    let n = gramians.n();
    let full = ActuatorSet::full(n);
    let floor = energy_metric(gramians, &full, 0.0)?;
    if !floor.is_finite() {
        return Err(PlacementError::SystemNotControllable.into());
    }

    let mut evaluated = 0;
    let mut failures = Vec::new();
    let mut max_ratio = 0.0_f64;
    for _ in 0..samples {
        let e_bound = floor * 2.0 * 10f64.powf(3.0 * stream.uniform());
        // ε ≤ 1/E keeps the run inside the controllability certificate.
        let xi = 0.25 + 0.75 * stream.uniform();
        let eps = xi / e_bound;

        let greedy = greedy_min_actuators(gramians, e_bound, eps, false)?;
        let l = greedy.delta.len();
        if l == 0 {
            // The empty set already meets the bound; the guarantee is void.
            continue;
        }
        let v_empty = n as f64 / eps;
        let v_full = energy_metric(gramians, &full, eps)?;
        let v_prev = if l >= 2 {
            greedy.trace.steps[l - 2].metric_after
        } else {
            v_empty
        };
        let rhs_factor = 1.0 + ((v_empty - v_full) / (v_prev - v_full)).ln();
        let optimum = brute_force_min_actuators_perturbed(gramians, e_bound, eps)?;
        let bound = rhs_factor * optimum.optimal_set.len() as f64;

        evaluated += 1;
        max_ratio = max_ratio.max(l as f64 / bound);
        let feasible = greedy.metric_eps <= e_bound * (1.0 + SLACK_TOL);
        if l as f64 > bound * (1.0 + SLACK_TOL) || !feasible {
            failures.push(json!({
                "e_bound": e_bound,
                "eps": eps,
                "greedy_set": greedy.delta.members(),
                "greedy_cardinality": l,
                "guarantee": bound,
                "optimal_set": optimum.optimal_set.members(),
                "greedy_metric_eps": greedy.metric_eps,
                "feasible": feasible,
            }));
        }
    }

    Ok(SuiteBody {
        evaluated,
        failures,
        stats: json!({
            "floor": floor,
            "max_cardinality_over_guarantee": max_ratio,
        }),
    })
}

/// Additive guarantee of the naive fixed-step budget greedy:
/// `tr((W_Δ+εI)⁻¹) ≤ (1−e^{−l/r})·v* + (n/ε)·e^{−l/r}` with `v*` the
/// ε-perturbed budget optimum from the oracle.
fn fact2(
    gramians: &NodeGramianSet,
    samples: usize,
    stream: &mut Stream,
    eps_base: f64,
) -> Result<SuiteBody, CliError> {
    let n = gramians.n();
    let mut failures = Vec::new();
    let mut over_budget_runs = 0usize;
    let mut uncontrollable_runs = 0usize;
    let mut max_metric_over_bound = 0.0_f64;
    for _ in 0..samples {
        let r = 1 + (stream.next_u64() % n.min(3) as u64) as usize;
        // l = r exercises the in-budget bound, l = 2r the over-budget decay.
        let l = r * (1 + (stream.next_u64() % 2) as usize);
        let eps = eps_base * 10f64.powf(2.0 * stream.uniform() - 1.0);

        let optimum = brute_force_min_energy_perturbed(gramians, r, eps)?;
        let naive = naive_budget_greedy(gramians, r, eps, l)?;
        let bound = fact2_bound(optimum.optimal_value, n, eps, l, r);

        if naive.delta.len() > r {
            over_budget_runs += 1;
        }
        if !naive.controllable {
            uncontrollable_runs += 1;
        }
        max_metric_over_bound = max_metric_over_bound.max(naive.metric_eps / bound);
        if naive.metric_eps > bound * (1.0 + SLACK_TOL) {
            failures.push(json!({
                "r": r,
                "l": l,
                "eps": eps,
                "naive_set": naive.delta.members(),
                "naive_metric_eps": naive.metric_eps,
                "bound": bound,
                "optimal_value": optimum.optimal_value,
                "optimal_set": optimum.optimal_set.members(),
            }));
        }
    }

    Ok(SuiteBody {
        evaluated: samples,
        failures,
        stats: json!({
            "over_budget_runs": over_budget_runs,
            "uncontrollable_runs": uncontrollable_runs,
            "max_metric_over_bound": max_metric_over_bound,
        }),
    })
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
