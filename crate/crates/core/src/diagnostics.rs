//! Run summaries: batch-means ESS, acceptance, autocorrelation,
//! Kolmogorov-Smirnov distance and loop statistics.

use std::fmt;
use std::io::Write;

use crate::bernoulli_factory::LoopAccumulator;
use crate::error::{Error, Result};
use crate::kernels::ChainTrace;
use crate::real::Real;

pub const MIN_ESS_LENGTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssEstimate {
    pub ess: f64,
    pub batch_size: usize,
    pub n: usize,
}

fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = xs.clone().count();
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var, n)
}

/// Batch-means ESS with `floor(√n)` batches of `floor(√n)` draws.
pub fn ess_batch_means<T: Real>(series: &[T]) -> Result<EssEstimate> {
    let n = series.len();
    if n < MIN_ESS_LENGTH {
        return Err(Error::Domain(format!("ESS needs at least {MIN_ESS_LENGTH} draws, got {n}")));
    }
    let b = (n as f64).sqrt().floor() as usize;
    ess_with_batch_size(series, b)
}

pub fn ess_with_batch_size<T: Real>(series: &[T], batch_size: usize) -> Result<EssEstimate> {
    let n = series.len();
    let batches = n / batch_size.max(1);
    if batch_size == 0 || batches < 2 {
        return Err(Error::Domain(format!("batch size {batch_size} leaves fewer than two batches of {n} draws")));
    }
    let xs = series.iter().map(|v| v.to_f64_lossy());
    let (_, var, _) = mean_var(xs);
    if !(var > 0.0) {
        return Err(Error::DegenerateSeries(format!("zero sample variance over {n} draws")));
    }
    let means: Vec<f64> = series[..batches * batch_size]
        .chunks(batch_size)
        .map(|c| c.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / batch_size as f64)
        .collect();
    let (_, var_means, _) = mean_var(means.iter().copied());
    let long_run = batch_size as f64 * var_means;
    if !(long_run > 0.0) {
        return Err(Error::DegenerateSeries("batch means are all equal".into()));
    }
    Ok(EssEstimate {
        ess: n as f64 * var / long_run,
        batch_size,
        n,
    })
}

/// Monte Carlo standard error of the sample mean.
pub fn mcse<T: Real>(series: &[T]) -> Result<f64> {
    let est = ess_batch_means(series)?;
    let (_, var, _) = mean_var(series.iter().map(|v| v.to_f64_lossy()));
    Ok((var / est.ess).sqrt())
}

pub fn acceptance_rate<T: Real>(trace: &ChainTrace<T>) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Domain("acceptance rate of an empty trace".into()));
    }
    Ok(trace.acceptance_rate())
}

/// Sample autocorrelations at lags `0..=max_lag` (biased normalisation).
pub fn autocorrelation<T: Real>(series: &[T], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Domain("autocorrelation needs at least two draws".into()));
    }
    let xs: Vec<f64> = series.iter().map(|v| v.to_f64_lossy()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    if !(c0 > 0.0) {
        return Err(Error::DegenerateSeries("constant series has no autocorrelation".into()));
    }
    Ok((0..=max_lag.min(n - 1))
        .map(|lag| {
            xs.iter()
                .zip(&xs[lag..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / c0
        })
        .collect())
}

/// `sup |F_n - F|` for a sorted sample.
pub fn ks_distance<T: Real>(sorted: &[T], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Domain("KS distance of an empty sample".into()));
    }
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(x.to_f64_lossy());
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Sorts a copy and computes [`ks_distance`].
pub fn ks_distance_unsorted<T: Real>(sample: &[T], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let mut xs: Vec<f64> = sample.iter().map(|v| v.to_f64_lossy()).collect();
    xs.sort_by(f64::total_cmp);
    ks_distance(&xs, cdf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSummary {
    /// Grand mean of loops per factory call across runs.
    pub mean_loops: f64,
    /// Average over runs of the per-run maximum.
    pub mean_of_max_loops: f64,
}

pub fn loop_summary<'a>(runs: impl IntoIterator<Item = &'a LoopAccumulator>) -> Result<LoopSummary> {
    let mut total = LoopAccumulator::default();
    let mut max_sum = 0.0;
    let mut count = 0usize;
    for run in runs {
        total.merge(run);
        max_sum += run.max_loops as f64;
        count += 1;
    }
    match total.mean() {
        Some(mean_loops) => Ok(LoopSummary {
            mean_loops,
            mean_of_max_loops: max_sum / count as f64,
        }),
        None => Err(Error::Domain("no Bernoulli factory loops were recorded".into())),
    }
}

pub fn trace_loop_summary<T: Real>(traces: &[ChainTrace<T>]) -> Result<LoopSummary> {
    loop_summary(traces.iter().map(|t| &t.loops))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub ess: f64,
    pub ess_per_sec: f64,
    pub wall_time_sec: f64,
    pub acceptance_rate: f64,
    pub mean_loops: Option<f64>,
    pub max_loops: Option<f64>,
}

/// Per-replication quantities a summary row is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationStats {
    /// Smallest coordinate ESS.
    pub ess: f64,
    pub wall_time_sec: f64,
    pub acceptance_rate: f64,
    pub loops: LoopAccumulator,
}

impl ReplicationStats {
    pub fn from_trace<T: Real>(trace: &ChainTrace<T>) -> Result<Self> {
        Ok(Self {
            ess: min_coordinate_ess(trace)?.ess,
            wall_time_sec: trace.wall_time_sec,
            acceptance_rate: acceptance_rate(trace)?,
            loops: trace.loops,
        })
    }
}

impl SummaryRow {
    /// Replication averages; multivariate chains use the smallest
    /// coordinate ESS of each run.
    pub fn from_traces<T: Real>(method: &str, traces: &[ChainTrace<T>]) -> Result<Self> {
        let stats = traces.iter().map(ReplicationStats::from_trace).collect::<Result<Vec<_>>>()?;
        Self::from_stats(method, &stats)
    }

    pub fn from_stats(method: &str, stats: &[ReplicationStats]) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::Domain(format!("no traces to summarise for {method}")));
        }
        let reps = stats.len() as f64;
        let ess = stats.iter().map(|s| s.ess).sum::<f64>() / reps;
        let wall = stats.iter().map(|s| s.wall_time_sec).sum::<f64>() / reps;
        let acc = stats.iter().map(|s| s.acceptance_rate).sum::<f64>() / reps;
        let loops = loop_summary(stats.iter().map(|s| &s.loops)).ok();
        Ok(Self {
            method: method.to_string(),
            ess,
            ess_per_sec: if wall > 0.0 { ess / wall } else { f64::INFINITY },
            wall_time_sec: wall,
            acceptance_rate: acc,
            mean_loops: loops.map(|l| l.mean_loops),
            max_loops: loops.map(|l| l.mean_of_max_loops),
        })
    }
}

/// Smallest batch-means ESS over coordinates (states after the initial one).
pub fn min_coordinate_ess<T: Real>(trace: &ChainTrace<T>) -> Result<EssEstimate> {
    let mut best: Option<EssEstimate> = None;
    for j in 0..trace.dim {
        let series = trace.coordinate(j);
        let est = ess_batch_means(&series[1..])?;
        if best.map_or(true, |b| est.ess < b.ess) {
            best = Some(est);
        }
    }
    best.ok_or_else(|| Error::Domain("zero-dimensional trace".into()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl SummaryTable {
    pub fn push(&mut self, row: SummaryRow) {
        self.rows.push(row);
    }

    /// Columns that depend only on the seeds.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "method,ess,acceptance_rate,mean_loops,max_loops")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.method,
                r.ess,
                r.acceptance_rate,
                opt(r.mean_loops),
                opt(r.max_loops)
            )?;
        }
        Ok(())
    }

    /// Machine-dependent columns.
    pub fn write_timing_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "method,ess,ess_per_sec,wall_time_sec")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.method, r.ess, r.ess_per_sec, r.wall_time_sec)?;
        }
        Ok(())
    }
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28} {:>12} {:>12} {:>10} {:>8} {:>10} {:>10}",
            "method", "ESS", "ESS/sec", "time (s)", "accept", "mean loops", "max loops"
        )?;
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        for r in &self.rows {
            writeln!(
                f,
                "{:<28} {:>12.0} {:>12.1} {:>10.3} {:>8.3} {:>10} {:>10}",
                r.method,
                r.ess,
                r.ess_per_sec,
                r.wall_time_sec,
                r.acceptance_rate,
                cell(r.mean_loops),
                cell(r.max_loops)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RngStream;
    use crate::kernels::KernelKind;

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        let sd = (1.0 - rho * rho).sqrt();
        let mut x = rng.standard_normal::<f64>();
        (0..n)
            .map(|_| {
                x = rho * x + sd * rng.standard_normal::<f64>();
                x
            })
            .collect()
    }

    #[test]
    fn iid_series_has_full_ess() {
        let xs = ar1(0.0, 100_000, 1);
        let e = ess_batch_means(&xs).unwrap();
        assert_eq!(e.batch_size, 316);
        let r = e.ess / e.n as f64;
        assert!((0.9..=1.1).contains(&r), "{r}");
    }

    #[test]
    fn ar1_family_matches_analytic_ess() {
        for (i, &rho) in [0.0, 0.3, 0.5, 0.6, 0.9].iter().enumerate() {
            let xs = ar1(rho, 1_000_000, 10 + i as u64);
            let r = ess_batch_means(&xs).unwrap().ess / xs.len() as f64;
            let want = (1.0 - rho) / (1.0 + rho);
            let tol = if rho == 0.5 { 0.15 } else { 0.2 };
            assert!((r / want - 1.0).abs() < tol, "rho={rho}: {r} vs {want}");
        }
    }

    #[test]
    fn degenerate_and_short_series() {
        assert!(matches!(ess_batch_means(&[1.0; 200]), Err(Error::DegenerateSeries(_))));
        assert!(ess_batch_means(&[1.0, 2.0]).is_err());
    }

    fn trace(accepted: Vec<bool>, loops: &[u64]) -> ChainTrace<f64> {
        let mut acc = LoopAccumulator::default();
        for &l in loops {
            acc.record(l);
        }
        ChainTrace {
            dim: 1,
            states: vec![0.0; accepted.len() + 1],
            accepted,
            loops: acc,
            step_loops: None,
            seed: 0,
            stream_id: 0,
            tuning: 1.0,
            kind: KernelKind::BarkerTwoCoin,
            wall_time_sec: 1.0,
        }
    }

    #[test]
    fn acceptance_edges() {
        assert_eq!(acceptance_rate(&trace(vec![true; 10], &[])).unwrap(), 1.0);
        let alt = (0..10).map(|k| k % 2 == 0).collect();
        assert_eq!(acceptance_rate(&trace(alt, &[])).unwrap(), 0.5);
        assert!(acceptance_rate(&trace(vec![], &[])).is_err());
    }

    #[test]
    fn ks_edges() {
        let phi = |x: f64| 0.5 * (1.0 + statrs::function::erf::erf(x / 2f64.sqrt()));
        assert!((ks_distance(&[0.0], phi).unwrap() - 0.5).abs() < 1e-15);
        let mut rng = RngStream::new(4, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.standard_normal::<f64>()).collect();
        assert!(ks_distance_unsorted(&xs, phi).unwrap() < 1.95 / (n as f64).sqrt());
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.5).collect();
        assert!(ks_distance_unsorted(&shifted, phi).unwrap() > 0.1);
    }

    #[test]
    fn loop_summary_cases() {
        let ones = [trace(vec![true; 3], &[1, 1, 1]), trace(vec![true; 2], &[1, 1])];
        let s = trace_loop_summary(&ones).unwrap();
        assert_eq!((s.mean_loops, s.mean_of_max_loops), (1.0, 1.0));
        let a = trace(vec![true; 3], &[1, 2, 9]);
        let b = trace(vec![true; 1], &[4]);
        let ab = trace_loop_summary(&[a.clone(), b.clone()]).unwrap();
        let ba = trace_loop_summary(&[b, a]).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.mean_loops, 4.0);
        assert_eq!(ab.mean_of_max_loops, 6.5);
        assert!(trace_loop_summary(&[trace(vec![true], &[])]).is_err());
    }

    #[test]
    fn autocorrelation_of_ar1() {
        let xs = ar1(0.6, 200_000, 7);
        let acf = autocorrelation(&xs, 3).unwrap();
        assert_eq!(acf[0], 1.0);
        for (lag, r) in acf.iter().enumerate() {
            assert!((r - 0.6f64.powi(lag as i32)).abs() < 0.02);
        }
    }

    #[test]
    fn summary_row_and_csv() {
        let mut t = trace(vec![true, false, true, false], &[1, 3]);
        t.states = ar1(0.2, 201, 3);
        t.accepted = vec![true; 200];
        let row = SummaryRow::from_traces("barker-bf", &[t]).unwrap();
        assert!((row.ess_per_sec - row.ess / row.wall_time_sec).abs() < 1e-9);
        assert_eq!(row.mean_loops, Some(2.0));
        let table = SummaryTable { rows: vec![row] };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,ess,acceptance_rate,mean_loops,max_loops\nbarker-bf,"));
        assert!(table.to_string().contains("barker-bf"));
    }
}
