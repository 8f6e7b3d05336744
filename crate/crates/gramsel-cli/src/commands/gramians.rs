//! `gramsel gramians`: compute per-node Gramians and write the cache file.

use std::time::Instant;

use gramsel::io::{self, GramianCacheFile};
use gramsel::system::{node_gramians, Horizon};
use gramsel::InstanceDescriptor;
use serde::Serialize;

use crate::error::CliError;
use crate::{GramiansArgs, MethodArg};

/// Machine-readable index of the written cache, printed to stdout.
#[derive(Serialize)]
struct CacheIndex<'a> {
    path: String,
    n: usize,
    method_tag: &'a str,
    checksum: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_residual: Option<f64>,
    wall_time_s: f64,
}

pub fn run(args: &GramiansArgs) -> Result<(), CliError> {
    let (sys, descriptor): (_, Option<InstanceDescriptor>) = match (&args.instance, &args.system) {
        (Some(path), None) => {
            let descriptor = io::load_instance(path)?;
            (descriptor.resolve()?, Some(descriptor))
        }
        (None, Some(path)) => (io::load_system(path)?, None),
        // clap's conflicts_with / required_unless_present rule out the rest.
        _ => unreachable!("argument parser admits exactly one input source"),
    };

    if let Some(method) = args.method {
        let compatible = match (method, sys.horizon()) {
            (MethodArg::Finite, Horizon::Finite { .. }) => true,
            (MethodArg::Infinite, Horizon::Infinite) => true,
            _ => false,
        };
        if !compatible {
            return Err(CliError::Usage(format!(
                "--method {} conflicts with the system's {} horizon; the horizon \
                 alone determines the integration method",
                match method {
                    MethodArg::Finite => "finite",
                    MethodArg::Infinite => "infinite",
                },
                match sys.horizon() {
                    Horizon::Finite { .. } => "finite",
                    Horizon::Infinite => "infinite",
                },
            )));
        }
    }

    let started = Instant::now();
    let gramians = node_gramians(&sys)?;
    let wall_time_s = started.elapsed().as_secs_f64();

    let file = GramianCacheFile::from_gramians(&gramians, descriptor.as_ref());
    io::save_gramian_cache(&args.out, &gramians, descriptor.as_ref())?;

    let max_residual = gramians
        .residuals()
        .map(|r| r.iter().fold(0.0_f64, |acc, &x| acc.max(x)));
    eprintln!(
        "computed {} node Gramians (n = {}, method = {}) in {:.3}s",
        gramians.n(),
        gramians.n(),
        gramians.method().tag(),
        wall_time_s,
    );
    if let Some(res) = max_residual {
        eprintln!("max Lyapunov residual: {res:.3e}");
    }

    let index = CacheIndex {
        path: args.out.display().to_string(),
        n: file.n,
        method_tag: gramians.method().tag(),
        checksum: &file.checksum,
        max_residual,
        wall_time_s,
    };
    println!("{}", io::to_json_string(&index)?);
    Ok(())
}
