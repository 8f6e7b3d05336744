//! `gramsel bench`: reproduce the reference experiments.
//!
//! Writes three kinds of outputs under `--out-dir`:
//!
//! * `chain_anchors.json` — the 5-node chain: per-set metrics, the
//!   bounded-energy solve at the published pair bound, and the budget
//!   sweep r = 1..5.
//! * `place_min_sweep_n{N}.csv` — minimal actuator counts on a random
//!   network as the energy bound doubles, `E = k·tr(W_V⁻¹)`,
//!   k = 2¹..2^max.
//! * `place_budget_sweep_n{N}.csv` — achieved energy as the budget grows
//!   over five budgets starting at the fallback set's cardinality
//!   (r = 1..5 wherever one node is controllable).
//!
//! Sweeps use the reference parameters c = 0.1, a0 = a0' = 1 with the lazy
//! greedy; the chain anchors use the precision defaults c = a0 = 1e-4.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gramsel::instances::{chain_network, erdos_renyi_system, RandomNetworkConfig};
use gramsel::io;
use gramsel::placement::{
    default_controllable_set, min_actuators_bounded_energy, min_energy_budgeted, PlacementResult,
};
use gramsel::system::{energy_metric, node_gramians, ActuatorSet};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{DEFAULT_A0, DEFAULT_C};
use crate::error::CliError;
use crate::report::csv_float;
use crate::BenchArgs;

/// Reference sweep parameters: loose certification, unit bisection
/// accuracy, lazy scanning — the trends, not the last digit, are the point.
const SWEEP_C: f64 = 0.1;
const SWEEP_A0: f64 = 1.0;
const SWEEP_A0P: f64 = 1.0;
/// Budget range of the r-sweep.
const SWEEP_MAX_R: usize = 5;

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&args.out_dir)?;

    let chain_path = args.out_dir.join("chain_anchors.json");
    chain_anchors(&chain_path)?;
    eprintln!("wrote {}", chain_path.display());

    let mut sweep_files = Vec::new();
    for &n in &args.n {
        let (min_path, budget_path) = sweep(args, n)?;
        eprintln!("wrote {}", min_path.display());
        eprintln!("wrote {}", budget_path.display());
        sweep_files.push(min_path);
        sweep_files.push(budget_path);
    }

    let index = json!({
        "chain_anchors": chain_path.display().to_string(),
        "sweeps": sweep_files
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    });
    println!("{}", io::to_json_string(&index)?);
    Ok(())
}

/// The 5-node chain benchmark: exact metrics of the reference sets, the
/// bounded-energy solve at the best pair value, and the full budget sweep.
fn chain_anchors(path: &Path) -> Result<(), CliError> {
    let sys = chain_network(5);
    let gramians = node_gramians(&sys)?;
    let n = gramians.n();

    let reference_sets: Vec<Vec<usize>> =
        vec![vec![1], vec![1, 2], vec![1, 3], vec![1, 4], vec![1, 5]];
    let mut metrics = Vec::new();
    let mut best_pair_value = f64::INFINITY;
    for nodes in &reference_sets {
        let set = ActuatorSet::new(nodes.clone(), n)?;
        let value = energy_metric(&gramians, &set, 0.0)?;
        if nodes.len() == 2 {
            best_pair_value = best_pair_value.min(value);
        }
        metrics.push(json!({ "set": nodes, "trace_of_inverse": value }));
    }
    let full_value = energy_metric(&gramians, &ActuatorSet::full(n), 0.0)?;
    metrics.push(json!({ "set": (1..=n).collect::<Vec<_>>(), "trace_of_inverse": full_value }));

    // Bounded-energy solves at the worst pair value (admits a 2-set) and at
    // a bound so loose one actuator suffices.
    let pair_bound = {
        let set = ActuatorSet::new(vec![1, 5], n)?;
        energy_metric(&gramians, &set, 0.0)?
    };
    let loose_bound = 1e10 * full_value;
    let mut place_min = Vec::new();
    for e_bound in [pair_bound, loose_bound] {
        let result = min_actuators_bounded_energy(&gramians, e_bound, DEFAULT_C, DEFAULT_A0, false)?;
        place_min.push(json!({
            "e_bound": e_bound,
            "delta": result.delta.members(),
            "metric_exact": result.metric_exact,
            "metric_eps": result.metric_eps,
            "eps_used": result.eps_used,
        }));
    }

    let delta_c = default_controllable_set(&gramians, DEFAULT_C, DEFAULT_A0, false)?.delta;
    let mut place_budget = Vec::new();
    for r in 1..=n {
        let result = min_energy_budgeted(
            &gramians,
            r,
            &delta_c,
            DEFAULT_C,
            DEFAULT_A0,
            DEFAULT_A0,
            false,
        )?;
        place_budget.push(json!({
            "r": r,
            "delta": result.delta.members(),
            "metric_exact": result.metric_exact,
            "e_used": result.e_used,
        }));
    }

    let report = json!({
        "instance": { "type": "chain", "n": n },
        "metrics": metrics,
        "best_pair_value": best_pair_value,
        "place_min": place_min,
        "place_budget": place_budget,
    });
    std::fs::write(path, format!("{}\n", io::to_json_string(&report)?))?;
    Ok(())
}

/// One row of the doubling-energy sweep.
struct MinSweepRow {
    exponent: u32,
    e_bound: f64,
    result: PlacementResult,
    wall_time_s: f64,
}

/// Both sweep CSVs for one random network size.
fn sweep(args: &BenchArgs, n: usize) -> Result<(PathBuf, PathBuf), CliError> {
    let cfg = RandomNetworkConfig { n, seed: args.seed };
    let network = erdos_renyi_system(&cfg)?;
    let gramians = node_gramians(&network.system)?;
    let floor = energy_metric(&gramians, &ActuatorSet::full(n), 0.0)?;

    // Energy sweep: independent solves fan out across the worker pool.
    let exponents: Vec<u32> = (1..=args.max_doubling).collect();
    let mut rows = exponents
        .par_iter()
        .map(|&exponent| {
            let e_bound = 2f64.powi(exponent as i32) * floor;
            let started = Instant::now();
            let result =
                min_actuators_bounded_energy(&gramians, e_bound, SWEEP_C, SWEEP_A0, true)?;
            Ok(MinSweepRow {
                exponent,
                e_bound,
                result,
                wall_time_s: started.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    rows.sort_by_key(|row| row.exponent);

    let min_path = args.out_dir.join(format!("place_min_sweep_n{n}.csv"));
    let mut writer = csv::Writer::from_path(&min_path)?;
    writer.write_record([
        "n",
        "seed",
        "k_exponent",
        "k",
        "e_bound",
        "actuators",
        "metric_exact",
        "metric_eps",
        "eps_used",
        "evaluations",
        "wall_time_s",
    ])?;
    for row in &rows {
        writer.write_record([
            n.to_string(),
            args.seed.to_string(),
            row.exponent.to_string(),
            csv_float(2f64.powi(row.exponent as i32)),
            csv_float(row.e_bound),
            row.result.delta.len().to_string(),
            csv_float(row.result.metric_exact),
            csv_float(row.result.metric_eps),
            csv_float(row.result.eps_used),
            row.result.trace.evaluations.to_string(),
            csv_float(row.wall_time_s),
        ])?;
    }
    writer.flush()?;

    // Budget sweep: reuse one fallback set across budgets. The solver
    // requires r ≥ |Δ_C|, so the sweep covers the same number of budgets
    // starting from the seed's cardinality.
    let delta_c = default_controllable_set(&gramians, SWEEP_C, SWEEP_A0, true)?.delta;
    let r_lo = delta_c.len().max(1);
    let budget_path = args.out_dir.join(format!("place_budget_sweep_n{n}.csv"));
    let mut writer = csv::Writer::from_path(&budget_path)?;
    writer.write_record([
        "n",
        "seed",
        "r",
        "cardinality",
        "metric_exact",
        "metric_eps",
        "eps_used",
        "e_used",
        "wall_time_s",
    ])?;
    for r in r_lo..=(r_lo + SWEEP_MAX_R - 1).min(n) {
        let started = Instant::now();
        let result =
            min_energy_budgeted(&gramians, r, &delta_c, SWEEP_C, SWEEP_A0, SWEEP_A0P, true)?;
        writer.write_record([
            n.to_string(),
            args.seed.to_string(),
            r.to_string(),
            result.delta.len().to_string(),
            csv_float(result.metric_exact),
            csv_float(result.metric_eps),
            csv_float(result.eps_used),
            csv_float(result.e_used),
            csv_float(started.elapsed().as_secs_f64()),
        ])?;
    }
    writer.flush()?;

    Ok((min_path, budget_path))
}
