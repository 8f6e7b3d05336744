//! Acceptance suite: one test per acceptance criterion, each printing a
//! `CRITERION NN PASS|FAIL` line (visible with `--nocapture` or
//! `--show-output`) before propagating any failure.
//!
//! Run with: `cargo test -p gramsel-cli --test acceptance -- --nocapture`

mod support;

use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gramsel::baselines::{
    brute_force_min_actuators_perturbed, brute_force_min_energy, brute_force_min_energy_perturbed,
    fact2_bound, naive_budget_greedy,
};
use gramsel::instances::rng::Stream;
use gramsel::instances::{
    chain_network, erdos_renyi_system, hitting_set_system, HittingSetInstance,
    RandomNetworkConfig,
};
use gramsel::io::{self, RunOutcome, RunRecord};
use gramsel::placement::{
    default_controllable_set, marginal_gain, min_actuators_bounded_energy, min_energy_budgeted,
    MetricState,
};
use gramsel::system::{
    energy_metric, is_controllable, kalman_controllable, node_gramians, ActuatorSet, Horizon,
    LinearSystem,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use tempfile::TempDir;

/// Runs a criterion body and prints its verdict line before propagating
/// any panic, so the transcript always carries one line per criterion.
fn criterion<F: FnOnce()>(number: u8, title: &str, body: F) {
    match std::panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("CRITERION {number:02} PASS — {title}"),
        Err(payload) => {
            println!("CRITERION {number:02} FAIL — {title}");
            std::panic::resume_unwind(payload);
        }
    }
}

fn gramsel_cmd() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gramsel"));
    cmd.env_remove("GRAMSEL_WORKERS");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("the binary should spawn");
    assert_eq!(
        output.status.code(),
        Some(0),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn parse_record(output: &Output) -> RunRecord {
    let text = String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8");
    io::from_json_str(text.trim()).expect("stdout is one RunRecord JSON object")
}

fn placement_members(record: &RunRecord) -> Vec<usize> {
    let RunOutcome::Placement(result) = &record.outcome else {
        panic!("expected a placement outcome");
    };
    result.delta.members.clone()
}

fn placement_metric_exact(record: &RunRecord) -> f64 {
    let RunOutcome::Placement(result) = &record.outcome else {
        panic!("expected a placement outcome");
    };
    result.metric_exact
}

/// Builds the chain n=5 Gramian cache through the binary.
fn build_chain_cache(dir: &Path) -> PathBuf {
    let descriptor = dir.join("chain.json");
    std::fs::write(&descriptor, r#"{"type":"chain","n":5}"#).unwrap();
    let cache = dir.join("chain_cache.json");
    run_ok(gramsel_cmd()
        .arg("gramians")
        .arg("--instance")
        .arg(&descriptor)
        .arg("--out")
        .arg(&cache));
    cache
}

fn rel_err(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

/// Published 5-significant-figure trace values for the 5-node chain on
/// horizon [0, 1].
const CHAIN_REFERENCE: [(&[usize], f64); 5] = [
    (&[1], 8.5175e7),
    (&[1, 2], 3.3234e5),
    (&[1, 3], 2.4209e3),
    (&[1, 4], 2.4221e3),
    (&[1, 5], 3.3594e5),
];

#[test]
fn criterion_01_chain_trace_value_regression() {
    criterion(1, "chain trace-value regression", || {
        let gramians = node_gramians(&chain_network(5)).unwrap();
        for (nodes, reference) in CHAIN_REFERENCE {
            let set = ActuatorSet::new(nodes.iter().copied(), 5).unwrap();
            let value = energy_metric(&gramians, &set, 0.0).unwrap();
            assert!(
                rel_err(value, reference) < 1e-3,
                "tr(W_{{{nodes:?}}}⁻¹) = {value:.6e}, published {reference:.6e}"
            );
        }
    });
}

#[test]
fn criterion_02_chain_selection_bounded_energy() {
    criterion(2, "chain selection under an average-energy bound", || {
        let gramians = node_gramians(&chain_network(5)).unwrap();
        let pair_bound = energy_metric(
            &gramians,
            &ActuatorSet::new([1, 5], 5).unwrap(),
            0.0,
        )
        .unwrap();
        let loose_bound =
            1e10 * energy_metric(&gramians, &ActuatorSet::full(5), 0.0).unwrap();

        let dir = TempDir::new().unwrap();
        let cache = build_chain_cache(dir.path());
        for (e_bound, expected) in [(pair_bound, vec![1, 3]), (loose_bound, vec![1])] {
            let output = run_ok(gramsel_cmd()
                .arg("place-min")
                .arg("--cache")
                .arg(&cache)
                .args(["--E", &format!("{e_bound:.17e}"), "--c", "1e-4", "--a0", "1e-4"]));
            let record = parse_record(&output);
            assert_eq!(
                placement_members(&record),
                expected,
                "E = {e_bound:.6e}"
            );
        }
    });
}

#[test]
fn criterion_03_chain_selection_budgeted() {
    criterion(3, "chain selection under an actuator budget", || {
        let gramians = node_gramians(&chain_network(5)).unwrap();
        let dir = TempDir::new().unwrap();
        let cache = build_chain_cache(dir.path());
        for r in 1..=5usize {
            let output = run_ok(gramsel_cmd()
                .arg("place-budget")
                .arg("--cache")
                .arg(&cache)
                .args(["--r", &r.to_string()]));
            let record = parse_record(&output);
            let members = placement_members(&record);
            let value = placement_metric_exact(&record);

            assert!(members.contains(&1), "r = {r}: head node selected");
            let oracle = brute_force_min_energy(&gramians, r).unwrap();
            assert_eq!(
                members,
                oracle.optimal_set.members(),
                "r = {r}: matches the brute-force minimizer"
            );
            if r == 1 {
                assert!(rel_err(value, 8.5175e7) < 1e-3, "r = 1 value {value:.6e}");
            }
            if r == 3 {
                assert!(rel_err(value, 81.7134) < 1e-3, "r = 3 value {value:.6e}");
            }
        }
    });
}

#[test]
fn criterion_04_supermodularity_property_suite() {
    criterion(4, "supermodularity of the ε-perturbed metric", || {
        let mut stream = Stream::new(0xACC_0004);
        let systems = 24usize;
        let triples_per_system = 50usize;
        let mut evaluated = 0usize;
        let mut min_slack = f64::INFINITY;

        for sys_idx in 0..systems {
            // Both horizon types, alternating deterministically.
            let sys = if sys_idx % 2 == 0 {
                support::random_finite_system(&mut stream, 3, 12)
            } else {
                support::random_stable_system(&mut stream, 3, 12)
            };
            let gramians = node_gramians(&sys).unwrap();
            let n = gramians.n();

            let mut done = 0usize;
            while done < triples_per_system {
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
                let candidates: Vec<usize> =
                    (1..=n).filter(|i| !outer_nodes.contains(i)).collect();
                let pick = stream.next_u64();
                if candidates.is_empty() {
                    continue;
                }
                let a = candidates[(pick % candidates.len() as u64) as usize];
                let eps = 10f64.powf(-2.0 * stream.uniform());

                let inner =
                    MetricState::new(&gramians, ActuatorSet::new(inner_nodes, n).unwrap(), eps)
                        .unwrap();
                let outer =
                    MetricState::new(&gramians, ActuatorSet::new(outer_nodes, n).unwrap(), eps)
                        .unwrap();
                let slack = marginal_gain(&inner, a).unwrap() - marginal_gain(&outer, a).unwrap();
                min_slack = min_slack.min(slack);
                assert!(
                    slack >= -1e-9,
                    "diminishing returns violated: slack {slack:.3e} on system {sys_idx}, \
                     inner {:?}, outer {:?}, a = {a}, ε = {eps:.3e}",
                    inner.delta().members(),
                    outer.delta().members(),
                );
                done += 1;
                evaluated += 1;
            }
        }
        assert!(evaluated >= 1000, "{evaluated} triples evaluated");
        println!("  criterion 4: {evaluated} triples, min slack {min_slack:.3e}");
    });
}

#[test]
fn criterion_05_controllability_certificate() {
    criterion(5, "ε-certificate implies controllability", || {
        let mut stream = Stream::new(0xACC_0005);
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        let target = 500usize;

        'outer: while accepted < target {
            let sys = support::random_system(&mut stream, 2, 12);
            let gramians = node_gramians(&sys).unwrap();
            let n = gramians.n();
            for _ in 0..20 {
                attempts += 1;
                assert!(
                    attempts < 200 * target,
                    "sampler failed to reach {target} accepted cases"
                );
                let nodes = support::random_subset(&mut stream, n, 0.5);
                let omega = 10f64.powf(9.0 * stream.uniform());
                let xi = 10f64.powf(-3.0 * stream.uniform());
                let eps = xi / omega;
                let delta = ActuatorSet::new(nodes, n).unwrap();
                let metric = energy_metric(&gramians, &delta, eps).unwrap();
                if metric > omega {
                    continue;
                }
                let report = is_controllable(&gramians, &delta).unwrap();
                assert!(
                    report.controllable,
                    "metric {metric:.3e} ≤ ω = {omega:.3e} at ε = {eps:.3e} ≤ 1/ω must \
                     certify controllability of {:?}",
                    delta.members()
                );
                accepted += 1;
                if accepted == target {
                    break 'outer;
                }
            }
        }
        println!("  criterion 5: {accepted} certified cases out of {attempts} sampled");
    });
}

#[test]
fn criterion_06_guarantee_certificates() {
    criterion(6, "solver certificates against the exhaustive oracle", || {
        let mut stream = Stream::new(0xACC_0006);
        let instances = 50usize;
        let c = 0.1;
        let a0 = 1.0;

        for idx in 0..instances {
            let sys = support::random_system(&mut stream, 3, 12);
            let gramians = node_gramians(&sys).unwrap();
            let full = ActuatorSet::full(gramians.n());
            let floor = energy_metric(&gramians, &full, 0.0).unwrap();
            if !floor.is_finite() {
                // A numerically uncontrollable draw has no feasible E at all.
                continue;
            }
            let e_bound = floor * 2.0 * 10f64.powf(4.0 * stream.uniform());
            let lazy = idx % 2 == 1;
            let result =
                min_actuators_bounded_energy(&gramians, e_bound, c, a0, lazy).unwrap();

            // Exit condition 1: the greedy stopped because the ε-metric met
            // the bound.
            assert!(
                result.metric_eps <= e_bound * (1.0 + 1e-12),
                "instance {idx}: tr((W+εI)⁻¹) = {:.6e} > E = {e_bound:.6e}",
                result.metric_eps
            );
            // Exit condition 2: the ε-bisection certified the perturbation
            // gap below c·E. The certificate is stated at the solver's
            // working precision (the exact trace saturated at the spectral
            // noise floor), so recombining the reported raw exact value with
            // the working ε-metric can drift by rounding amplified through
            // the inverse — hence the 1e-6 slack.
            assert!(
                result.metric_exact - result.metric_eps <= c * e_bound * (1.0 + 1e-6),
                "instance {idx}: gap {:.6e} > c·E = {:.6e}",
                result.metric_exact - result.metric_eps,
                c * e_bound
            );
            // Combined certificate.
            assert!(
                result.metric_exact <= (1.0 + c) * e_bound * (1.0 + 1e-6),
                "instance {idx}: tr(W⁻¹) = {:.6e} > (1+c)E = {:.6e}",
                result.metric_exact,
                (1.0 + c) * e_bound
            );
            // Cardinality guarantee against the brute-force optimum at the
            // certified ε (the exact optimum can only be larger).
            let bound_f = result.bound_f.expect("feasible runs report F");
            let optimum =
                brute_force_min_actuators_perturbed(&gramians, e_bound, result.eps_used)
                    .unwrap();
            assert!(
                result.delta.len() as f64
                    <= bound_f * optimum.optimal_set.len() as f64 * (1.0 + 1e-9),
                "instance {idx}: |Δ| = {} > F·|Δ*| = {:.3} · {}",
                result.delta.len(),
                bound_f,
                optimum.optimal_set.len()
            );
        }
    });
}

#[test]
fn criterion_07_random_network_trend_reproduction() {
    criterion(7, "random-network sweep trends", || {
        for n in [10usize, 40] {
            let network = erdos_renyi_system(&RandomNetworkConfig { n, seed: 1 }).unwrap();
            let gramians = node_gramians(&network.system).unwrap();
            let floor = energy_metric(&gramians, &ActuatorSet::full(n), 0.0).unwrap();
            assert!(floor.is_finite());

            // Doubling energy sweep: actuator count non-increasing, down to 1.
            let exponents: Vec<i32> = (1..=50).collect();
            let counts: Vec<(i32, usize)> = exponents
                .par_iter()
                .map(|&exp| {
                    let e_bound = 2f64.powi(exp) * floor;
                    let result =
                        min_actuators_bounded_energy(&gramians, e_bound, 0.1, 1.0, true)
                            .unwrap();
                    (exp, result.delta.len())
                })
                .collect();
            for pair in counts.windows(2) {
                assert!(
                    pair[1].1 <= pair[0].1,
                    "n = {n}: actuator count increased from k = 2^{} ({}) to 2^{} ({})",
                    pair[0].0,
                    pair[0].1,
                    pair[1].0,
                    pair[1].1
                );
            }
            let last = counts.last().unwrap().1;
            assert_eq!(last, 1, "n = {n}: the loosest bound admits one actuator");

            // Budget sweep: achieved energy non-increasing over five
            // consecutive budgets. The solver requires r ≥ |Δ_C|, so the
            // sweep starts at the seed's cardinality (1 wherever a single
            // node is controllable at this precision).
            let delta_c = default_controllable_set(&gramians, 0.1, 1.0, true)
                .unwrap()
                .delta;
            let r0 = delta_c.len().max(1);
            let budgets: Vec<usize> = (r0..r0 + 5).collect();
            let mut values = Vec::new();
            for &r in &budgets {
                let result =
                    min_energy_budgeted(&gramians, r, &delta_c, 0.1, 1.0, 1.0, true).unwrap();
                assert!(result.delta.len() <= r, "n = {n}, r = {r}: budget respected");
                values.push(result.metric_exact);
            }
            for (i, pair) in values.windows(2).enumerate() {
                assert!(
                    pair[1] <= pair[0] * (1.0 + 1e-12),
                    "n = {n}: achieved value increased from r = {} ({:.6e}) to r = {} ({:.6e})",
                    budgets[i],
                    pair[0],
                    budgets[i + 1],
                    pair[1]
                );
            }
            println!(
                "  criterion 7, n = {n}: counts 2^1..2^50 start at {}, reach {last}; \
                 budgets {:?} values {:?}",
                counts.first().unwrap().1,
                budgets,
                values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
            );
        }
    });
}

#[test]
fn criterion_08_gramian_cross_validation() {
    criterion(8, "two independent Gramian routes agree", || {
        let mut stream = Stream::new(0xACC_0008);
        // Finite horizon: block-exponential vs adaptive Simpson quadrature.
        for idx in 0..20 {
            let sys = support::random_finite_system(&mut stream, 2, 10);
            let gramians = node_gramians(&sys).unwrap();
            let reference = support::quadrature_node_gramians(&sys);
            for (i, oracle) in reference.iter().enumerate() {
                let err = support::rel_frobenius(gramians.nodes()[i].matrix(), oracle);
                assert!(
                    err <= 1e-7,
                    "system {idx}, node {}: block vs quadrature Frobenius error {err:.3e}",
                    i + 1
                );
            }
        }
        // Infinite horizon: Lyapunov residuals of every instance.
        for idx in 0..20 {
            let sys = support::random_stable_system(&mut stream, 2, 12);
            let gramians = node_gramians(&sys).unwrap();
            let residuals = gramians.residuals().expect("infinite horizon stores residuals");
            for (i, &res) in residuals.iter().enumerate() {
                assert!(
                    (0.0..=1e-8).contains(&res),
                    "system {idx}, node {}: Lyapunov residual {res:.3e}",
                    i + 1
                );
            }
        }
    });
}

#[test]
fn criterion_09_hitting_set_instance_self_checks() {
    criterion(9, "hitting-set reduction self-checks", || {
        let mut stream = Stream::new(0xACC_0009);

        // 10 random instances with m, p ≤ 6: verify the construction
        // against an external rebuild of V, its closed-form inverse, the
        // similarity relation, and the spectrum.
        let mut built_count = 0usize;
        while built_count < 10 {
            let m = support::draw_range(&mut stream, 1, 6);
            let p = support::draw_range(&mut stream, 1, 6);
            let sets: Vec<Vec<usize>> = (0..p)
                .map(|_| support::random_subset(&mut stream, m, 0.5))
                .collect();
            let Ok(inst) = HittingSetInstance::new(m, sets) else {
                continue; // empty set or uncovered element: resample
            };
            built_count += 1;

            let built = hitting_set_system(&inst).unwrap();
            let n = m + inst.p() + 1;
            assert_eq!(built.system.n(), n);

            // External rebuild of V with the documented block layout.
            let mut v = DMatrix::<f64>::zeros(n, n);
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

            // Strict diagonal dominance of every row.
            for i in 0..n {
                let off: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| v[(i, j)].abs())
                    .sum();
                assert!(
                    v[(i, i)].abs() > off,
                    "row {i} of V is not strictly diagonally dominant"
                );
            }

            // Closed-form inverse: element rows [1/2, −1/2-in-last-column],
            // set rows [−1/(2(m+1)) under elements, 1/(m+1) diagonal,
            // |C_k|/(2(m+1)) last column], anchor row e_nᵀ.
            let mut v_inv = DMatrix::<f64>::zeros(n, n);
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
            let identity_dev = (&v_inv * &v - DMatrix::<f64>::identity(n, n)).amax();
            assert!(
                identity_dev <= 1e-12,
                "closed-form V⁻¹ deviates by {identity_dev:.3e}"
            );

            // Similarity: A = V⁻¹ D V ⇔ V A = D V.
            let a = built.system.a();
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                n,
                (1..=n).map(|k| k as f64),
            ));
            let relation_dev = (&v * a - &d * &v).amax();
            assert!(
                relation_dev <= 1e-10 * n as f64,
                "V·A − D·V deviates by {relation_dev:.3e}"
            );

            // Spectrum equals {1, …, n}.
            let mut eigs: Vec<f64> = a
                .complex_eigenvalues()
                .iter()
                .map(|z| {
                    assert!(z.im.abs() <= 1e-8, "complex eigenvalue {z}");
                    z.re
                })
                .collect();
            eigs.sort_by(f64::total_cmp);
            for (idx, eig) in eigs.iter().enumerate() {
                let expected = (idx + 1) as f64;
                assert!(
                    (eig - expected).abs() <= 1e-8 * expected,
                    "eigenvalue {eig} should be {expected}"
                );
            }
        }

        // The m = 3 example: controllability of every small actuator set
        // coincides with the hitting-set prediction.
        let inst = HittingSetInstance::new(3, [vec![1, 2], vec![2, 3]]).unwrap();
        let built = hitting_set_system(&inst).unwrap();
        let n = built.system.n();
        let predicts = |nodes: &[usize]| -> bool {
            nodes.contains(&built.anchor_node())
                && inst.sets().iter().enumerate().all(|(k, set)| {
                    nodes
                        .iter()
                        .any(|&node| node == built.set_node(k + 1) || set.contains(&node))
                })
        };
        for mask in 1u32..(1 << n) {
            if mask.count_ones() > 3 {
                continue;
            }
            let nodes: Vec<usize> = (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect();
            let delta = ActuatorSet::new(nodes.clone(), n).unwrap();
            assert_eq!(
                kalman_controllable(&built.system, &delta).unwrap(),
                predicts(&nodes),
                "controllability and hitting disagree on {nodes:?}"
            );
        }
    });
}

#[test]
fn criterion_10_naive_baseline_bound_and_failure_modes() {
    criterion(10, "naive budget greedy: bound and failure modes", || {
        let mut stream = Stream::new(0xACC_0010);
        // The additive bound with the oracle's v* on 20 random instances.
        for idx in 0..20 {
            let sys = support::random_system(&mut stream, 3, 10);
            let gramians = node_gramians(&sys).unwrap();
            let n = gramians.n();
            let r = 1 + (stream.next_u64() % n.min(3) as u64) as usize;
            let l = r * (1 + (stream.next_u64() % 2) as usize);
            let eps = 10f64.powf(-6.0 + 4.0 * stream.uniform());

            let optimum = brute_force_min_energy_perturbed(&gramians, r, eps).unwrap();
            let naive = naive_budget_greedy(&gramians, r, eps, l).unwrap();
            let bound = fact2_bound(optimum.optimal_value, n, eps, l, r);
            assert!(
                naive.metric_eps <= bound * (1.0 + 1e-9),
                "instance {idx}: tr((W+εI)⁻¹) = {:.6e} > bound {bound:.6e} \
                 (r = {r}, l = {l}, ε = {eps:.3e})",
                naive.metric_eps
            );
        }

        // Constructed failure exhibit: decoupled zero dynamics make W_Δ
        // diagonal, so fewer steps than nodes is provably uncontrollable
        // and more steps than the budget provably overshoots it.
        let sys = LinearSystem::new(
            DMatrix::<f64>::zeros(3, 3),
            Horizon::Finite { t0: 0.0, t1: 1.0 },
        )
        .unwrap();
        let gramians = node_gramians(&sys).unwrap();

        let undershoot = naive_budget_greedy(&gramians, 2, 1e-4, 1).unwrap();
        assert!(
            !undershoot.controllable,
            "one step on three decoupled nodes cannot be controllable"
        );
        assert!(undershoot.metric_exact.is_infinite());

        let overshoot = naive_budget_greedy(&gramians, 2, 1e-4, 3).unwrap();
        assert!(
            overshoot.delta.len() > 2,
            "l = 3 steps must exceed the budget r = 2"
        );
        println!(
            "  criterion 10 diagnostics: l < n gives uncontrollable Δ = {:?} \
             (tr(W_Δ⁻¹) = {}), l > r gives over-budget Δ = {:?} (|Δ| = {} > r = 2)",
            undershoot.delta.members(),
            undershoot.metric_exact,
            overshoot.delta.members(),
            overshoot.delta.len()
        );
    });
}
