use std::path::{Path, PathBuf};
use std::process::Command;

use bfmcmc_cli::config::compatible_kernels;
use bfmcmc_cli::{report, run_experiment, Experiment, ExperimentConfig, KernelChoice, Overrides, RawConfig, RunManifest};

fn small(experiment: Experiment, kernel: KernelChoice, dir: &Path) -> ExperimentConfig {
    let mut raw = RawConfig {
        experiment: Some(experiment),
        kernel: Some(kernel),
        n_iter: Some(1_500),
        n_replications: Some(2),
        burn_in: Some(100),
        thin: Some(1),
        workers: Some(2),
        output_dir: Some(dir.to_path_buf()),
        // Fixed scales keep these runs short; tuning is covered separately.
        tuning: Some(match experiment {
            Experiment::CoxGp => 0.02,
            Experiment::RamSensor => 1.08,
            _ => 20.0,
        }),
        ..RawConfig::default()
    };
    if experiment == Experiment::DiscreteOracle {
        raw.tuning = None;
    }
    raw.resolve(&Overrides::default()).unwrap()
}

#[test]
fn every_compatible_pair_runs_and_reports_identically() {
    for experiment in [Experiment::GammaTrunc, Experiment::RamSensor, Experiment::CoxGp, Experiment::DiscreteOracle] {
        for &kernel in compatible_kernels(experiment) {
            let dir = tempfile::tempdir().unwrap();
            let cfg = small(experiment, kernel, dir.path());
            let manifest = run_experiment(&cfg).unwrap();
            assert!(manifest.failed().next().is_none(), "{}", cfg.method());
            assert_eq!(manifest.replications.len(), 2);
            let on_disk = RunManifest::load(&dir.path().join("manifest.json")).unwrap();
            assert_eq!(on_disk.replications.len(), 2);
            on_disk.verify_outputs(dir.path()).unwrap();
            for name in ["summary.csv", "timing.csv", "summary.txt", "trace_rep001.csv", "density_rep002.csv"] {
                assert!(dir.path().join(name).is_file(), "{}: missing {name}", cfg.method());
            }
            let (_, table) = report(&dir.path().join("manifest.json")).unwrap();
            let mut rebuilt = Vec::new();
            table.write_csv(&mut rebuilt).unwrap();
            let stored = std::fs::read(dir.path().join("summary.csv")).unwrap();
            assert_eq!(String::from_utf8(rebuilt).unwrap(), String::from_utf8(stored).unwrap(), "{}", cfg.method());
        }
    }
}

#[test]
fn same_seed_gives_identical_summary_and_traces() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = small(Experiment::GammaTrunc, KernelChoice::BarkerBf, dir.path());
            run_experiment(&cfg).unwrap();
            let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
            (read("summary.csv"), read("trace_rep002.csv"))
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn tampered_output_fails_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Experiment::GammaTrunc, KernelChoice::MhExact, dir.path());
    run_experiment(&cfg).unwrap();
    let trace = dir.path().join("trace_rep001.csv");
    let mut text = std::fs::read_to_string(&trace).unwrap();
    text.push_str("9999,1,1,\n");
    std::fs::write(&trace, text).unwrap();
    assert!(report(&dir.path().join("manifest.json")).is_err());
}

#[test]
fn tuned_gamma_run_records_its_pilot() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Experiment::GammaTrunc, KernelChoice::BarkerBf, dir.path());
    cfg.tuning = None;
    let m = run_experiment(&cfg).unwrap();
    assert_eq!(m.tuning.source, "tuned");
    assert_eq!(m.tuning.goal, Some(0.25));
    assert!((m.tuning.pilot_rate.unwrap() - 0.25).abs() <= 0.01);
}

fn config_files() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn shipped_configs_resolve() {
    let files = config_files();
    assert!(files.len() >= 4);
    for f in files {
        let cfg = RawConfig::load(&f).unwrap().resolve(&Overrides::default());
        assert!(cfg.is_ok(), "{}: {:?}", f.display(), cfg.err());
    }
}

#[test]
fn binary_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "experiment = \"discrete-oracle\"\nkernel = \"barker-exact\"\nthin = 1\nworkers = 1\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let bin = env!("CARGO_BIN_EXE_sampler");
    let run = Command::new(bin)
        .args(["run", "--config"])
        .arg(&config)
        .args(["--n", "3000", "--reps", "2", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("discrete-oracle/barker-exact"));
    let rep = Command::new(bin).arg("report").arg(out_dir.join("manifest.json")).output().unwrap();
    assert!(rep.status.success(), "{}", String::from_utf8_lossy(&rep.stderr));

    let bad = Command::new(bin)
        .args(["run", "--config"])
        .arg(&config)
        .args(["--kernel", "ram-aux"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error"));
}
