//! Runs a configured experiment: data, tuning, concurrent replications and
//! the output directory.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use bfmcmc::bernoulli_factory::LoopAccumulator;
use bfmcmc::diagnostics::{ReplicationStats, SummaryRow, SummaryTable};
use bfmcmc::kernels::{tune_scale, ExactKernel, RunOptions, TuneOptions, TwoCoinKernel};
use bfmcmc::models::cox::{
    reference_intensity, simulate_cox_data, CoxModel, FreshMonteCarlo, PluginMhKernel, DEFAULT_LENGTHSCALE,
    DEFAULT_MC_SAMPLES, DEFAULT_SIGMA2, DOMAIN_LENGTH, REFERENCE_INTENSITY_BOUND,
};
use bfmcmc::models::sensor::{reference_locations, SensorData, SensorGibbsKernel, SensorModel, SensorUpdate, UNKNOWN};
use bfmcmc::models::{gamma_target, simulate_sensor_data, DiscreteSystem, GammaTarget};
use bfmcmc::proposals::{trunc_gauss_1d, Interval};
use bfmcmc::{expected_loops, run_chain, two_coin, ChainTrace, Kernel, RngStream};

use crate::config::{Experiment, ExperimentConfig, KernelChoice};
use crate::error::{CliError, CliResult};
use crate::manifest::{
    OutputFile, ReplicationRecord, ReplicationSummary, RunManifest, TuningRecord, MANIFEST_FILE,
    MANIFEST_SCHEMA_VERSION,
};
use crate::output::{emit_density_data, sha256_hex, write_file, write_trace_csv};

pub const DATA_STREAM: u64 = u64::MAX;
pub const TUNING_STREAM: u64 = u64::MAX - 1;
pub const ORACLE_STREAM: u64 = u64::MAX - 2;

pub const DEFAULT_GAMMA_ALPHA: f64 = 2.0;
pub const DEFAULT_GAMMA_BETA: f64 = 1.0;
pub const DEFAULT_N0: usize = 10;
pub const DEFAULT_SENSOR_VARIANCE: f64 = 1.08;
pub const DEFAULT_EPSILON_FRACTION: f64 = 1e-6;
pub const PILOT_STEPS: u64 = 20_000;
pub const TUNING_TOLERANCE: f64 = 0.01;

/// Target acceptance rates for automatic tuning.
pub fn tuning_goal(experiment: Experiment, kernel: KernelChoice) -> Option<f64> {
    match (experiment, kernel) {
        (Experiment::GammaTrunc, KernelChoice::MhExact) => Some(0.44),
        (Experiment::GammaTrunc, _) => Some(0.25),
        (Experiment::CoxGp, KernelChoice::MhInexactCox) => Some(0.23),
        (Experiment::CoxGp, _) => Some(0.16),
        _ => None,
    }
}

/// Model instance shared read-only by all replications.
pub enum Prepared {
    Gamma(GammaTarget<f64>),
    Sensor { model: SensorModel<f64>, init: Vec<f64> },
    Cox(CoxModel<f64>),
    Discrete(DiscreteSystem<f64>),
}

/// Data and model for `cfg`, plus data files worth keeping alongside the run.
pub fn prepare(cfg: &ExperimentConfig) -> CliResult<(Prepared, Vec<(String, Vec<u8>)>)> {
    let m = &cfg.model;
    let mut data_rng = RngStream::new(cfg.seed, DATA_STREAM);
    let open = |p: &PathBuf| File::open(p).map(BufReader::new).map_err(|e| CliError::io(p, e));
    Ok(match cfg.experiment {
        Experiment::GammaTrunc => (
            Prepared::Gamma(gamma_target(
                m.alpha.unwrap_or(DEFAULT_GAMMA_ALPHA),
                m.beta.unwrap_or(DEFAULT_GAMMA_BETA),
            )?),
            vec![],
        ),
        Experiment::DiscreteOracle => (Prepared::Discrete(DiscreteSystem::reference()), vec![]),
        Experiment::RamSensor => {
            let truth = reference_locations::<f64>();
            let data = match &m.data_file {
                Some(p) => SensorData::read_csv(open(p)?, [truth[UNKNOWN], truth[UNKNOWN + 1]])?,
                None => simulate_sensor_data(&truth, &mut data_rng),
            };
            let mut csv = Vec::new();
            data.write_csv(&mut csv).map_err(|e| CliError::io(Path::new("sensor_data.csv"), e))?;
            let init = truth[..UNKNOWN].iter().flatten().copied().collect();
            (
                Prepared::Sensor {
                    model: SensorModel::new(data)?,
                    init,
                },
                vec![("sensor_data.csv".into(), csv)],
            )
        }
        Experiment::CoxGp => {
            let n0 = m.n0.unwrap_or(DEFAULT_N0);
            let obs = match &m.data_file {
                Some(p) => CoxModel::read_observations_csv(open(p)?, n0)?,
                None => simulate_cox_data(DOMAIN_LENGTH, reference_intensity, REFERENCE_INTENSITY_BOUND, n0, &mut data_rng)?,
            };
            let mut csv = Vec::new();
            CoxModel::write_observations_csv(&obs, &mut csv).map_err(|e| CliError::io(Path::new("observations.csv"), e))?;
            let model = CoxModel::new(
                m.m.unwrap_or(10),
                m.sigma2.unwrap_or(DEFAULT_SIGMA2),
                m.lengthscale.unwrap_or(DEFAULT_LENGTHSCALE),
                obs,
            )?;
            (Prepared::Cox(model), vec![("observations.csv".into(), csv)])
        }
    })
}

impl Prepared {
    fn init(&self) -> Vec<f64> {
        match self {
            Prepared::Gamma(g) => vec![g.mode().max(1e-3)],
            Prepared::Sensor { init, .. } => init.clone(),
            Prepared::Cox(c) => c.knot_intensity_estimate(),
            Prepared::Discrete(_) => vec![0.0],
        }
    }
}

/// The kernel selected by `cfg` at proposal scale `scale`, started at `init`.
pub fn build_kernel<'a>(
    cfg: &ExperimentConfig,
    prep: &'a Prepared,
    scale: f64,
    init: Vec<f64>,
) -> CliResult<Box<dyn Kernel<f64> + 'a>> {
    Ok(match (prep, cfg.kernel) {
            (Prepared::Gamma(g), KernelChoice::BarkerBf) => {
                Box::new(TwoCoinKernel::new(g, trunc_gauss_1d(Interval::positive(), scale)?, init)?)
            }
            (Prepared::Gamma(g), KernelChoice::MhExact) => {
                let p = trunc_gauss_1d(Interval::positive(), scale)?.with_evaluated_normalizer();
                Box::new(ExactKernel::metropolis(g, p, init)?)
            }
            (Prepared::Gamma(g), KernelChoice::BarkerExact) => {
                let p = trunc_gauss_1d(Interval::positive(), scale)?.with_evaluated_normalizer();
                Box::new(ExactKernel::barker(g, p, init)?)
            }
            (Prepared::Discrete(s), KernelChoice::BarkerBf) => {
                Box::new(TwoCoinKernel::new(s, s, init)?)
            }
            (Prepared::Discrete(s), KernelChoice::MhExact) => {
                Box::new(ExactKernel::metropolis(s, s.tractable(), init)?)
            }
            (Prepared::Discrete(s), KernelChoice::BarkerExact) => {
                Box::new(ExactKernel::barker(s, s.tractable(), init)?)
            }
            (Prepared::Sensor { model, .. }, k @ (KernelChoice::BarkerBf | KernelChoice::RamAux)) => {
                let update = if k == KernelChoice::BarkerBf {
                    SensorUpdate::TwoCoin
                } else {
                    SensorUpdate::Auxiliary
                };
                let eps = cfg.model.epsilon.unwrap_or(DEFAULT_EPSILON_FRACTION);
                Box::new(SensorGibbsKernel::new(model, update, scale, eps, init)?)
            }
            (Prepared::Cox(c), KernelChoice::BarkerBf) => {
                Box::new(TwoCoinKernel::new(c, c.proposal(scale)?, init)?)
            }
            (Prepared::Cox(c), KernelChoice::MhInexactCox) => {
                let proposal = c.proposal(scale)?;
                let est = FreshMonteCarlo::new(
                    proposal.cholesky().clone(),
                    cfg.model.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES),
                )?
                .with_redraws(cfg.model.redraws.unwrap_or(0));
                Box::new(PluginMhKernel::new(c, proposal, est, init)?)
            }
            (_, k) => {
                return Err(CliError::Config(format!("kernel {k} cannot run experiment {}", cfg.experiment)));
            }
    })
}

pub fn resolve_tuning(cfg: &ExperimentConfig, prep: &Prepared) -> CliResult<TuningRecord> {
    if let Some(scale) = cfg.tuning {
        return Ok(TuningRecord {
            scale,
            source: "config".into(),
            goal: None,
            pilot_rate: None,
            rounds: None,
            stream_id: None,
        });
    }
    let Some(goal) = tuning_goal(cfg.experiment, cfg.kernel) else {
        let scale = if cfg.experiment == Experiment::RamSensor {
            DEFAULT_SENSOR_VARIANCE
        } else {
            1.0
        };
        return Ok(TuningRecord {
            scale,
            source: "default".into(),
            goal: None,
            pilot_rate: None,
            rounds: None,
            stream_id: None,
        });
    };
    let initial = if cfg.experiment == Experiment::CoxGp { 0.05 } else { 1.0 };
    let mut rng = RngStream::new(cfg.seed, TUNING_STREAM);
    let tuned = tune_scale(
        |scale: f64, start: Vec<f64>| {
            build_kernel(cfg, prep, scale, start).map_err(|e| match e {
                CliError::Sampler(s) => s,
                other => bfmcmc::Error::Incompatible(other.to_string()),
            })
        },
        initial,
        prep.init(),
        goal,
        PILOT_STEPS,
        &mut rng,
        TuneOptions {
            tolerance: TUNING_TOLERANCE,
            ..TuneOptions::default()
        },
    )?;
    Ok(TuningRecord {
        scale: tuned.scale,
        source: "tuned".into(),
        goal: Some(goal),
        pilot_rate: Some(tuned.rate),
        rounds: Some(tuned.rounds),
        stream_id: Some(TUNING_STREAM),
    })
}

/// Result of one replication.
pub struct ReplicationOutput {
    pub trace: ChainTrace<f64>,
    /// Per-sensor loop statistics and acceptance counts.
    pub sensors: Option<Vec<(LoopAccumulator, u64)>>,
}

pub fn run_replication(cfg: &ExperimentConfig, prep: &Prepared, scale: f64, rep: u32) -> CliResult<ReplicationOutput> {
    let mut rng = RngStream::new(cfg.seed, rep as u64);
    let opts = RunOptions {
        burn_in: cfg.burn_in,
        record_step_loops: true,
    };
    let init = prep.init();
    if let Prepared::Sensor { model, .. } = prep {
        let update = if cfg.kernel == KernelChoice::BarkerBf {
            SensorUpdate::TwoCoin
        } else {
            SensorUpdate::Auxiliary
        };
        let eps = cfg.model.epsilon.unwrap_or(DEFAULT_EPSILON_FRACTION);
        let mut k = SensorGibbsKernel::new(model, update, scale, eps, init)?;
        // Per-sensor statistics cover the recorded steps only.
        for s in 0..cfg.burn_in {
            k.step(&mut rng).map_err(|e| e.at_step(s))?;
        }
        let (loops0, acc0) = (*k.sensor_loops(), *k.sensor_accepted());
        let trace = run_chain(
            &mut k,
            cfg.n_iter,
            &mut rng,
            scale,
            RunOptions {
                burn_in: 0,
                ..opts
            },
        )?;
        let sensors = (0..UNKNOWN)
            .map(|s| {
                let after = k.sensor_loops()[s];
                let before = loops0[s];
                let recorded = LoopAccumulator {
                    calls: after.calls - before.calls,
                    total_loops: after.total_loops - before.total_loops,
                    max_loops: after.max_loops,
                };
                (recorded, k.sensor_accepted()[s] - acc0[s])
            })
            .collect();
        return Ok(ReplicationOutput {
            trace,
            sensors: Some(sensors),
        });
    }
    let mut k = build_kernel(cfg, prep, scale, init)?;
    let trace = run_chain(&mut k, cfg.n_iter, &mut rng, scale, opts)?;
    Ok(ReplicationOutput { trace, sensors: None })
}

/// Brute-force check of the two-coin acceptance on the discrete system:
/// per ordered pair, exact `α_B` against `flips` factory runs.
pub fn discrete_oracle_report(sys: &DiscreteSystem<f64>, flips: u64, seed: u64) -> CliResult<Vec<u8>> {
    let mut rng = RngStream::new(seed, ORACLE_STREAM);
    let mut out = String::from("x,y,alpha_exact,flips,accepted,alpha_empirical,z,mean_loops,expected_loops\n");
    let n = sys.normalized_pi().len();
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let inputs = sys.two_coin_inputs(x, y)?;
            let (mut hits, mut loops) = (0u64, 0u64);
            for _ in 0..flips {
                let (accepted, stats) = two_coin(&inputs, &mut rng, None)?;
                hits += accepted as u64;
                loops += stats.loops;
            }
            let alpha = sys.exact_barker(x, y);
            let freq = hits as f64 / flips as f64;
            let sd = (alpha * (1.0 - alpha) / flips as f64).sqrt();
            let z = if sd > 0.0 { (freq - alpha) / sd } else { 0.0 };
            let (cx, cy, px, py) = sys.factory_terms(x, y);
            out.push_str(&format!(
                "{x},{y},{alpha},{flips},{hits},{freq},{z},{},{}\n",
                loops as f64 / flips as f64,
                expected_loops(cx, cy, px, py)?
            ));
        }
    }
    Ok(out.into_bytes())
}

struct Collected {
    records: Vec<ReplicationRecord>,
    stats: Vec<ReplicationStats>,
    sensors: Vec<(u32, Vec<(LoopAccumulator, u64)>)>,
}

fn trace_name(rep: u32) -> String {
    format!("trace_rep{:03}.csv", rep + 1)
}

fn density_name(rep: u32) -> String {
    format!("density_rep{:03}.csv", rep + 1)
}

/// Runs the replications on up to `cfg.workers` threads. Each replication
/// owns its RNG stream; a single collector writes files in completion order
/// and results are reported by replication index, so outputs do not depend
/// on scheduling.
fn run_replications(cfg: &ExperimentConfig, prep: &Prepared, scale: f64, written: &mut Vec<String>) -> CliResult<Collected> {
    let next = AtomicU32::new(0);
    let workers = cfg.workers.min(cfg.n_replications as usize).max(1);
    let mut slots: Vec<Option<(ReplicationRecord, Option<ReplicationStats>)>> = vec![None; cfg.n_replications as usize];
    let mut sensors = Vec::new();
    let mut first_io_error = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::sync_channel::<(u32, CliResult<ReplicationOutput>)>(workers);
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let rep = next.fetch_add(1, Ordering::Relaxed);
                if rep >= cfg.n_replications {
                    break;
                }
                if tx.send((rep, run_replication(cfg, prep, scale, rep))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (rep, result) in rx {
            let mut record = ReplicationRecord {
                replication: rep,
                seed: cfg.seed,
                stream_id: rep as u64,
                status: "ok".into(),
                error: None,
                wall_time_sec: None,
                trace_file: None,
                summary: None,
            };
            let outcome = result.and_then(|out| {
                let stats = ReplicationStats::from_trace(&out.trace)?;
                let mut trace_csv = Vec::new();
                let name = trace_name(rep);
                write_trace_csv(&out.trace, cfg.thin, &mut trace_csv).map_err(|e| CliError::io(Path::new(&name), e))?;
                write_file(&cfg.output_dir.join(&name), &trace_csv)?;
                written.push(name.clone());
                let mut density_csv = Vec::new();
                emit_density_data(&out.trace, cfg.density_bins)?
                    .write_csv(&mut density_csv)
                    .map_err(|e| CliError::io(Path::new(&density_name(rep)), e))?;
                write_file(&cfg.output_dir.join(density_name(rep)), &density_csv)?;
                written.push(density_name(rep));
                Ok((out, stats, name))
            });
            let stats = match outcome {
                Ok((out, stats, name)) => {
                    record.wall_time_sec = Some(stats.wall_time_sec);
                    record.trace_file = Some(name);
                    record.summary = Some(ReplicationSummary {
                        ess: stats.ess,
                        acceptance_rate: stats.acceptance_rate,
                        factory_calls: stats.loops.calls,
                        total_loops: stats.loops.total_loops,
                        max_loops: stats.loops.max_loops,
                    });
                    if let Some(s) = out.sensors {
                        sensors.push((rep, s));
                    }
                    Some(stats)
                }
                Err(e @ CliError::Io { .. }) if first_io_error.is_none() => {
                    record.status = "error".into();
                    record.error = Some(e.to_string());
                    first_io_error = Some(e);
                    None
                }
                Err(e) => {
                    record.status = "error".into();
                    record.error = Some(e.to_string());
                    None
                }
            };
            slots[rep as usize] = Some((record, stats));
        }
    });
    if let Some(e) = first_io_error {
        return Err(e);
    }
    let mut records = Vec::new();
    let mut stats = Vec::new();
    for (record, s) in slots.into_iter().flatten() {
        records.push(record);
        stats.extend(s);
    }
    sensors.sort_by_key(|(rep, _)| *rep);
    Ok(Collected { records, stats, sensors })
}

fn sensor_csv(sensors: &[(u32, Vec<(LoopAccumulator, u64)>)]) -> Vec<u8> {
    let mut out = String::from("replication,sensor,mean_loops,max_loops,acceptance_rate\n");
    for (rep, per) in sensors {
        for (k, (loops, acc)) in per.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                rep + 1,
                k + 1,
                loops.mean().unwrap_or(f64::NAN),
                loops.max_loops,
                *acc as f64 / loops.calls.max(1) as f64
            ));
        }
    }
    out.into_bytes()
}

/// Summary built from per-replication statistics in replication order.
pub fn summary_table(method: &str, stats: &[ReplicationStats]) -> CliResult<SummaryTable> {
    let mut table = SummaryTable::default();
    if !stats.is_empty() {
        table.push(SummaryRow::from_stats(method, stats)?);
    }
    Ok(table)
}

/// Writes `summary.csv`, `timing.csv` and `summary.txt`; returns their names.
pub fn write_summary(dir: &Path, table: &SummaryTable) -> CliResult<Vec<String>> {
    let mut csv = Vec::new();
    table.write_csv(&mut csv).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join("summary.csv"), &csv)?;
    let mut timing = Vec::new();
    table.write_timing_csv(&mut timing).map_err(|e| CliError::io(dir, e))?;
    write_file(&dir.join("timing.csv"), &timing)?;
    write_file(&dir.join("summary.txt"), table.to_string().as_bytes())?;
    Ok(vec!["summary.csv".into(), "timing.csv".into(), "summary.txt".into()])
}

pub fn inventory(dir: &Path, names: &[String]) -> CliResult<Vec<OutputFile>> {
    let mut names = names.to_vec();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .map(|name| {
            let path = dir.join(&name);
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            Ok(OutputFile {
                path: name,
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            })
        })
        .collect()
}

/// Runs every replication of `cfg` and writes traces, densities, summary
/// tables, data files and `manifest.json` into `cfg.output_dir`.
///
/// A kernel error aborts only its replication and is recorded in the
/// manifest; configuration, data, tuning and I/O errors abort the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let (prep, data_files) = prepare(cfg)?;
    let mut written = Vec::new();
    let data_stream_id = (!data_files.is_empty() && cfg.model.data_file.is_none()).then_some(DATA_STREAM);
    for (name, bytes) in &data_files {
        write_file(&dir.join(name), bytes)?;
        written.push(name.clone());
    }
    let tuning = resolve_tuning(cfg, &prep)?;
    let collected = run_replications(cfg, &prep, tuning.scale, &mut written)?;
    let table = summary_table(&cfg.method(), &collected.stats)?;
    written.extend(write_summary(dir, &table)?);
    if !collected.sensors.is_empty() {
        write_file(&dir.join("sensor_loops.csv"), &sensor_csv(&collected.sensors))?;
        written.push("sensor_loops.csv".into());
    }
    if let Prepared::Discrete(sys) = &prep {
        write_file(&dir.join("oracle.csv"), &discrete_oracle_report(sys, cfg.n_iter, cfg.seed)?)?;
        written.push("oracle.csv".into());
    }
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        data_stream_id,
        tuning,
        replications: collected.records,
        total_wall_time_sec: start.elapsed().as_secs_f64(),
        outputs: inventory(dir, &written)?,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_file(&dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}
