//! Trace, density and checksum files.
//!
//! Trace CSV (schema version 1): `iteration,x1,...,xd,accepted,loops`.
//! Row 0 is the initial state with empty `accepted` and `loops`; later rows
//! are every `thin`-th iteration. `loops` is empty for kernels without a
//! Bernoulli factory.
//!
//! Density CSV (schema version 1): `series,coordinate,x,value` where
//! `series` is `density` (bin center, normalized frequency) or `acf`
//! (lag, autocorrelation).

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use bfmcmc::diagnostics::autocorrelation;
use bfmcmc::{ChainTrace, KernelKind};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const DENSITY_SCHEMA_VERSION: u32 = 1;
pub const ACF_MAX_LAG: usize = 100;

fn has_loops(kind: KernelKind) -> bool {
    !matches!(kind, KernelKind::MhExact | KernelKind::BarkerExact | KernelKind::MhPluginNormalizer)
}

/// Writes every `thin`-th state of `trace`; needs per-step loops recorded
/// for factory kernels.
pub fn write_trace_csv<W: Write>(trace: &ChainTrace<f64>, thin: u64, mut out: W) -> std::io::Result<()> {
    let mut line = String::from("iteration");
    for j in 1..=trace.dim {
        write!(line, ",x{j}").unwrap();
    }
    line.push_str(",accepted,loops\n");
    out.write_all(line.as_bytes())?;
    let loops = trace.step_loops.as_deref().filter(|_| has_loops(trace.kind));
    let thin = thin.max(1) as usize;
    for i in (0..=trace.len()).step_by(thin) {
        line.clear();
        write!(line, "{i}").unwrap();
        for v in trace.state(i) {
            write!(line, ",{v}").unwrap();
        }
        if i == 0 {
            line.push_str(",,");
        } else {
            write!(line, ",{}", trace.accepted[i - 1] as u8).unwrap();
            match loops {
                Some(l) => write!(line, ",{}", l[i - 1]).unwrap(),
                None => line.push(','),
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// A trace file read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTrace {
    pub dim: usize,
    pub iterations: Vec<u64>,
    /// Row-major states, including row 0.
    pub states: Vec<f64>,
    /// One entry per row after row 0.
    pub accepted: Vec<bool>,
    pub loops: Vec<Option<u64>>,
}

impl StoredTrace {
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.states.iter().skip(j).step_by(self.dim).copied().collect()
    }
}

pub fn read_trace_csv<R: BufRead>(input: R, path: &Path) -> CliResult<StoredTrace> {
    let bad = |reason: String| CliError::Trace {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .map_err(|e| CliError::io(path, e))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[0] != "iteration" || cols[cols.len() - 2..] != ["accepted", "loops"] {
        return Err(bad(format!("unexpected header '{header}'")));
    }
    let dim = cols.len() - 3;
    let mut t = StoredTrace {
        dim,
        iterations: Vec::new(),
        states: Vec::new(),
        accepted: Vec::new(),
        loops: Vec::new(),
    };
    for (row, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(bad(format!("row {} has {} fields, expected {}", row + 1, f.len(), cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("row {}: bad number '{s}'", row + 1)));
        t.iterations
            .push(f[0].parse().map_err(|_| bad(format!("row {}: bad iteration '{}'", row + 1, f[0])))?);
        for v in &f[1..=dim] {
            t.states.push(num(v)?);
        }
        if row > 0 {
            t.accepted.push(match f[dim + 1] {
                "1" => true,
                "0" => false,
                other => return Err(bad(format!("row {}: bad accepted flag '{other}'", row + 1))),
            });
            t.loops.push(match f[dim + 2] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad(format!("row {}: bad loop count '{s}'", row + 1)))?),
            });
        }
    }
    if t.iterations.is_empty() {
        return Err(bad("no rows".into()));
    }
    Ok(t)
}

/// Histogram and autocorrelations of one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateDensity {
    pub centers: Vec<f64>,
    pub width: f64,
    /// Normalized so that `Σ density · width = 1`.
    pub density: Vec<f64>,
    /// Lags `0..=100` (fewer for short chains); empty for a constant series.
    pub acf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityData {
    pub coordinates: Vec<CoordinateDensity>,
}

/// Histogram with `bins` equal bins over the sample range, plus the
/// autocorrelation function, for every coordinate of the recorded states.
pub fn emit_density_data(trace: &ChainTrace<f64>, bins: usize) -> CliResult<DensityData> {
    if trace.is_empty() {
        return Err(bfmcmc::Error::Domain("cannot build a density from an empty trace".into()).into());
    }
    if bins == 0 {
        return Err(CliError::Config("density needs at least one bin".into()));
    }
    let mut coordinates = Vec::with_capacity(trace.dim);
    for j in 0..trace.dim {
        let series = &trace.coordinate(j)[1..];
        coordinates.push(coordinate_density(series, bins));
    }
    Ok(DensityData { coordinates })
}

fn coordinate_density(series: &[f64], bins: usize) -> CoordinateDensity {
    let (mut lo, mut hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in series {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = series.len() as f64;
    let max_lag = ACF_MAX_LAG.min(series.len() - 1);
    CoordinateDensity {
        centers: (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect(),
        width,
        density: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
        acf: autocorrelation(series, max_lag).unwrap_or_default(),
    }
}

impl DensityData {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "series,coordinate,x,value")?;
        for (j, c) in self.coordinates.iter().enumerate() {
            for (x, d) in c.centers.iter().zip(&c.density) {
                writeln!(out, "density,{},{x},{d}", j + 1)?;
            }
            for (lag, r) in c.acf.iter().enumerate() {
                writeln!(out, "acf,{},{lag},{r}", j + 1)?;
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
