//! Output plumbing: the machine-readable record goes to stdout (and
//! optionally a file), the human summary goes to stderr, CSV rows get
//! lossless float formatting.

use std::path::Path;

use gramsel::io::{self, RunOutcome, RunRecord};
use gramsel::PlacementResult;

use crate::error::CliError;

/// Prints the record as single-line JSON on stdout and optionally writes it
/// to `out`.
pub fn emit_record(record: &RunRecord, out: Option<&Path>) -> Result<(), CliError> {
    let json = io::to_json_string(record)?;
    println!("{json}");
    if let Some(path) = out {
        io::save_run_record(path, record)?;
    }
    Ok(())
}

/// Human summary of a placement on stderr, so stdout stays machine-readable.
pub fn placement_summary(result: &PlacementResult) {
    eprintln!("Δ = {}   |Δ| = {}", result.delta, result.delta.len());
    eprintln!(
        "tr((W_Δ+εI)⁻¹) = {:.6e} at ε = {:.6e}",
        result.metric_eps, result.eps_used
    );
    eprintln!(
        "tr(W_Δ⁻¹) = {:.6e} against bound E = {:.6e}",
        result.metric_exact, result.e_used
    );
    match result.bound_f {
        Some(f) => eprintln!("cardinality bound F = {f:.4}"),
        None => eprintln!("cardinality bound F: not applicable"),
    }
    eprintln!(
        "controllable: {}   greedy evaluations: {}",
        if result.controllable { "yes" } else { "no" },
        result.trace.evaluations
    );
}

/// Formats a float for CSV with the same lossless 17-significant-digit
/// convention as the JSON writer.
pub fn csv_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Wraps a solver outcome plus its provenance into a run record.
pub fn placement_record(
    instance: Option<gramsel::InstanceDescriptor>,
    solver: &str,
    params: io::SolverParams,
    result: &PlacementResult,
    wall_time_s: f64,
    method_tag: &str,
) -> RunRecord {
    RunRecord {
        instance,
        solver: solver.to_string(),
        params,
        outcome: RunOutcome::Placement(result.into()),
        wall_time_s,
        tool_version: io::TOOL_VERSION.to_string(),
        method_tag: method_tag.to_string(),
    }
}
