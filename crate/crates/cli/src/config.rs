//! Experiment configuration: a TOML file, presets and flag overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GammaTrunc,
    RamSensor,
    CoxGp,
    DiscreteOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    MhExact,
    BarkerExact,
    BarkerBf,
    RamAux,
    MhInexactCox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Paper,
    Desk,
}

macro_rules! kebab_enum {
    ($ty:ty, $($variant:ident => $name:literal),+ $(,)?) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $(Self::$variant => $name,)+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = CliError;

            fn from_str(s: &str) -> CliResult<Self> {
                match s {
                    $($name => Ok(Self::$variant),)+
                    other => Err(CliError::Config(format!(
                        "unknown {} '{other}' (expected one of: {})",
                        stringify!($ty),
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

kebab_enum!(Experiment,
    GammaTrunc => "gamma-trunc",
    RamSensor => "ram-sensor",
    CoxGp => "cox-gp",
    DiscreteOracle => "discrete-oracle",
);
kebab_enum!(KernelChoice,
    MhExact => "mh-exact",
    BarkerExact => "barker-exact",
    BarkerBf => "barker-bf",
    RamAux => "ram-aux",
    MhInexactCox => "mh-inexact-cox",
);
kebab_enum!(Preset, Paper => "paper", Desk => "desk");

/// Model settings; unset fields take the experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    /// Cox knots.
    pub m: Option<usize>,
    /// Cox replicated point patterns.
    pub n0: Option<usize>,
    /// RAM `ε` as a fraction of `π̃` at the initial state.
    pub epsilon: Option<f64>,
    pub sigma2: Option<f64>,
    pub lengthscale: Option<f64>,
    /// Normalizer draws per evaluation for the inexact Cox baseline.
    pub mc_samples: Option<usize>,
    /// Fresh redraws allowed when a normalizer estimate comes out zero.
    pub redraws: Option<u32>,
    /// Gamma shape and rate.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Observation file: Cox point patterns or sensor distances.
    pub data_file: Option<PathBuf>,
}

/// The config file as written; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<Experiment>,
    pub kernel: Option<KernelChoice>,
    pub preset: Option<Preset>,
    pub n_iter: Option<u64>,
    pub n_replications: Option<u32>,
    pub tuning: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    pub density_bins: Option<usize>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub model: ModelOverrides,
}

/// Command-line overrides applied after the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub kernel: Option<KernelChoice>,
    pub n_iter: Option<u64>,
    pub n_replications: Option<u32>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub preset: Option<Preset>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub kernel: KernelChoice,
    pub preset: Preset,
    pub n_iter: u64,
    pub n_replications: u32,
    /// Proposal scale; tuned to the target acceptance rate when absent.
    pub tuning: Option<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub burn_in: u64,
    /// Stored traces keep every `thin`-th iteration.
    pub thin: u64,
    pub density_bins: usize,
    /// Upper bound on concurrently running replications.
    pub workers: usize,
    pub model: ModelOverrides,
}

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_THIN: u64 = 10;
pub const DEFAULT_DENSITY_BINS: usize = 50;

struct Sizes {
    n_iter: u64,
    reps: u32,
    burn_in: u64,
    m: usize,
}

fn preset_sizes(experiment: Experiment, preset: Preset) -> Sizes {
    use Experiment::*;
    let (n_iter, reps, burn_in, m) = match (experiment, preset) {
        (GammaTrunc, Preset::Paper) => (1_000_000, 100, 10_000, 0),
        (GammaTrunc, Preset::Desk) => (100_000, 10, 10_000, 0),
        (RamSensor, Preset::Paper) => (200_000, 100, 10_000, 0),
        (RamSensor, Preset::Desk) => (20_000, 4, 2_000, 0),
        (CoxGp, Preset::Paper) => (1_000_000, 10, 10_000, 100),
        (CoxGp, Preset::Desk) => (100_000, 4, 10_000, 10),
        (DiscreteOracle, Preset::Paper) => (1_000_000, 100, 1_000, 0),
        (DiscreteOracle, Preset::Desk) => (100_000, 4, 1_000, 0),
    };
    Sizes {
        n_iter,
        reps,
        burn_in,
        m,
    }
}

impl RawConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a TOML config, or the config echoed in a run manifest (`.json`).
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: crate::manifest::RunManifest = serde_json::from_str(&text)?;
            return Ok(manifest.config.into());
        }
        Self::from_toml(&text)
    }

    pub fn resolve(mut self, overrides: &Overrides) -> CliResult<ExperimentConfig> {
        macro_rules! take {
            ($($f:ident),+) => { $(if overrides.$f.is_some() { self.$f = overrides.$f.clone(); })+ };
        }
        take!(experiment, kernel, n_iter, n_replications, seed, output_dir, preset);
        let experiment = self
            .experiment
            .ok_or_else(|| CliError::Config("no experiment given (config key `experiment` or --experiment)".into()))?;
        let kernel = self
            .kernel
            .ok_or_else(|| CliError::Config("no kernel given (config key `kernel` or --kernel)".into()))?;
        let preset = self.preset.unwrap_or(Preset::Desk);
        let sizes = preset_sizes(experiment, preset);
        let mut model = self.model;
        if experiment == Experiment::CoxGp && model.m.is_none() {
            model.m = Some(sizes.m);
        }
        let workers = self
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let cfg = ExperimentConfig {
            experiment,
            kernel,
            preset,
            n_iter: self.n_iter.unwrap_or(sizes.n_iter),
            n_replications: self.n_replications.unwrap_or(sizes.reps),
            tuning: self.tuning,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            output_dir: self
                .output_dir
                .unwrap_or_else(|| PathBuf::from(format!("out/{experiment}-{kernel}"))),
            burn_in: self.burn_in.unwrap_or(sizes.burn_in),
            thin: self.thin.unwrap_or(DEFAULT_THIN),
            density_bins: self.density_bins.unwrap_or(DEFAULT_DENSITY_BINS),
            workers,
            model,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<ExperimentConfig> for RawConfig {
    fn from(c: ExperimentConfig) -> Self {
        Self {
            experiment: Some(c.experiment),
            kernel: Some(c.kernel),
            preset: Some(c.preset),
            n_iter: Some(c.n_iter),
            n_replications: Some(c.n_replications),
            tuning: c.tuning,
            seed: Some(c.seed),
            output_dir: Some(c.output_dir),
            burn_in: Some(c.burn_in),
            thin: Some(c.thin),
            density_bins: Some(c.density_bins),
            workers: Some(c.workers),
            model: c.model,
        }
    }
}

/// Kernels each experiment can run.
pub fn compatible_kernels(experiment: Experiment) -> &'static [KernelChoice] {
    use KernelChoice::*;
    match experiment {
        Experiment::GammaTrunc | Experiment::DiscreteOracle => &[MhExact, BarkerExact, BarkerBf],
        Experiment::RamSensor => &[BarkerBf, RamAux],
        Experiment::CoxGp => &[BarkerBf, MhInexactCox],
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if !compatible_kernels(self.experiment).contains(&self.kernel) {
            let allowed: Vec<_> = compatible_kernels(self.experiment).iter().map(|k| k.as_str()).collect();
            return Err(CliError::Config(format!(
                "kernel {} cannot run experiment {} (allowed: {})",
                self.kernel,
                self.experiment,
                allowed.join(", ")
            )));
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Config(format!("{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("tuning", self.tuning)?;
        positive("model.epsilon", self.model.epsilon)?;
        positive("model.sigma2", self.model.sigma2)?;
        positive("model.lengthscale", self.model.lengthscale)?;
        positive("model.alpha", self.model.alpha)?;
        positive("model.beta", self.model.beta)?;
        if self.n_iter < 100 {
            return Err(CliError::Config(format!("n_iter must be at least 100, got {}", self.n_iter)));
        }
        if self.n_replications == 0 || self.thin == 0 || self.workers == 0 || self.density_bins == 0 {
            return Err(CliError::Config(
                "n_replications, thin, workers and density_bins must be positive".into(),
            ));
        }
        if let Some(m) = self.model.m {
            if m < 2 {
                return Err(CliError::Config(format!("model.m must be at least 2, got {m}")));
            }
        }
        if self.model.n0 == Some(0) || self.model.mc_samples == Some(0) {
            return Err(CliError::Config("model.n0 and model.mc_samples must be positive".into()));
        }
        Ok(())
    }

    /// Label used in summary tables.
    pub fn method(&self) -> String {
        format!("{}/{}", self.experiment, self.kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags_then_defaults() {
        let raw = RawConfig::from_toml(
            r#"
experiment = "gamma-trunc"
kernel = "barker-bf"
n_iter = 5000
seed = 3

[model]
alpha = 2.0
"#,
        )
        .unwrap();
        let cfg = raw
            .resolve(&Overrides {
                seed: Some(9),
                ..Overrides::default()
            })
            .unwrap();
        assert_eq!(cfg.n_iter, 5000);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.n_replications, 10);
        assert_eq!(cfg.thin, DEFAULT_THIN);
        assert_eq!(cfg.model.alpha, Some(2.0));
    }

    #[test]
    fn presets_set_sizes() {
        let raw = RawConfig {
            experiment: Some(Experiment::CoxGp),
            kernel: Some(KernelChoice::BarkerBf),
            ..RawConfig::default()
        };
        let paper = raw
            .clone()
            .resolve(&Overrides {
                preset: Some(Preset::Paper),
                ..Overrides::default()
            })
            .unwrap();
        assert_eq!((paper.n_iter, paper.model.m), (1_000_000, Some(100)));
        let desk = raw.resolve(&Overrides::default()).unwrap();
        assert_eq!(desk.model.m, Some(10));
    }

    #[test]
    fn incompatible_kernel_is_refused() {
        for (e, k) in [
            (Experiment::GammaTrunc, KernelChoice::MhInexactCox),
            (Experiment::GammaTrunc, KernelChoice::RamAux),
            (Experiment::CoxGp, KernelChoice::MhExact),
            (Experiment::RamSensor, KernelChoice::BarkerExact),
        ] {
            let raw = RawConfig {
                experiment: Some(e),
                kernel: Some(k),
                ..RawConfig::default()
            };
            assert!(matches!(raw.resolve(&Overrides::default()), Err(CliError::Config(_))), "{e} {k}");
        }
    }

    #[test]
    fn unknown_keys_and_names_are_errors() {
        assert!(RawConfig::from_toml("experimnt = \"cox-gp\"").is_err());
        assert!(RawConfig::from_toml("experiment = \"cox\"").is_err());
        assert!("barker".parse::<KernelChoice>().is_err());
        assert_eq!("ram-aux".parse::<KernelChoice>().unwrap(), KernelChoice::RamAux);
    }

    #[test]
    fn bad_values_are_errors() {
        let raw = RawConfig::from_toml("experiment = \"gamma-trunc\"\nkernel = \"mh-exact\"\ntuning = -1.0").unwrap();
        assert!(raw.resolve(&Overrides::default()).is_err());
        let raw = RawConfig::from_toml("experiment = \"gamma-trunc\"\nkernel = \"mh-exact\"\nn_iter = 10").unwrap();
        assert!(raw.resolve(&Overrides::default()).is_err());
    }
}
