//! Rebuilds summary tables from a manifest and its stored traces.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use bfmcmc::bernoulli_factory::LoopAccumulator;
use bfmcmc::diagnostics::{ess_batch_means, ReplicationStats, SummaryTable};

use crate::error::{CliError, CliResult};
use crate::experiment::summary_table;
use crate::manifest::RunManifest;
use crate::output::{read_trace_csv, StoredTrace};

/// Replication statistics computed from a stored (possibly thinned) trace.
/// Identical to the run's own statistics when the trace was stored with
/// `thin = 1`.
pub fn stored_stats(trace: &StoredTrace, wall_time_sec: f64) -> CliResult<ReplicationStats> {
    let mut ess = f64::INFINITY;
    for j in 0..trace.dim {
        ess = ess.min(ess_batch_means(&trace.coordinate(j)[1..])?.ess);
    }
    let mut loops = LoopAccumulator::default();
    trace.loops.iter().flatten().for_each(|&l| loops.record(l));
    let n = trace.accepted.len().max(1) as f64;
    Ok(ReplicationStats {
        ess,
        wall_time_sec,
        acceptance_rate: trace.accepted.iter().filter(|&&a| a).count() as f64 / n,
        loops,
    })
}

/// Verifies the output inventory, then recomputes the summary table from
/// the trace files of the successful replications.
pub fn report(manifest_path: &Path) -> CliResult<(RunManifest, SummaryTable)> {
    let manifest = RunManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    manifest.verify_outputs(dir)?;
    let mut stats = Vec::new();
    for rec in manifest.replications.iter().filter(|r| r.is_ok()) {
        let name = rec.trace_file.as_ref().ok_or_else(|| {
            CliError::Inventory(format!("replication {} has no trace file", rec.replication + 1))
        })?;
        let path = dir.join(name);
        let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
        let trace = read_trace_csv(BufReader::new(file), &path)?;
        stats.push(stored_stats(&trace, rec.wall_time_sec.unwrap_or(0.0))?);
    }
    let table = summary_table(&manifest.config.method(), &stats)?;
    Ok((manifest, table))
}
