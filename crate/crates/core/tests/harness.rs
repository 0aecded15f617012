use rsmcast::harness::{
    read_results_file, run_experiment, summarize, write_results_file, Algo, ExperimentConfig, RunOptions,
    RESULTS_HEADER,
};
use rsmcast::model::RunStatus;
use rsmcast::Error;

const SMALL: &str = r#"
snr_grid_db = [0, 10, 20]
n_trials = 2
master_seed = 7
algorithms = ["rs", "tdm"]
output_path = "unused.csv"

[dims]
n_subcarriers = 2
n_tx_antennas = 2
n_groups = 2
n_users = 4

[rs_config]
max_outer = 5
restarts = 1

[sdr_config]
n_randomizations = 50
"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(SMALL).unwrap()
}

fn run_to(cfg: &ExperimentConfig, path: &std::path::Path, resume: bool) -> rsmcast::harness::ExperimentReport {
    run_experiment(cfg, &RunOptions { output: Some(path.to_path_buf()), resume }).unwrap()
}

#[test]
fn cardinality_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let report = run_to(&small(), &path, false);
    assert_eq!(report.rows.len(), 12);
    assert_eq!(report.failures(), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER.join(","));
    assert_eq!(text.lines().count(), 13);
    let rows = read_results_file(&path).unwrap();
    assert_eq!(rows.iter().filter(|r| r.algo == Algo::Rs).count(), 6);
    assert!(rows.iter().all(|r| r.per_subcarrier_rates.len() == 2));
    assert!(rows.iter().all(|r| r.power_used <= 10f64.powf(2.0) * (1.0 + 1e-6)));
}

#[test]
fn same_config_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    run_to(&small(), &a, false);
    run_to(&small(), &b, false);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn resume_fills_only_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.csv");
    let partial = dir.path().join("partial.csv");
    let cfg = small();
    let first = run_to(&cfg, &full, false);

    let kept: Vec<_> = first.rows.iter().filter(|r| r.trial == 0).cloned().collect();
    write_results_file(&kept, &partial).unwrap();
    let resumed = run_to(&cfg, &partial, true);
    assert_eq!(resumed.resumed, kept.len());
    assert_eq!(resumed.computed, 12 - kept.len());
    assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&partial).unwrap());

    // Nothing left to do on a second resume.
    let again = run_to(&cfg, &partial, true);
    assert_eq!(again.computed, 0);
}

#[test]
fn resume_rejects_other_channels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    run_to(&small(), &path, false);
    let mut other = small();
    other.master_seed = 8;
    let err = run_experiment(&other, &RunOptions { output: Some(path), resume: true }).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn bad_configs_are_rejected() {
    for (from, to) in [
        ("n_trials = 2", "n_trials = 0"),
        ("n_users = 4", "n_users = 5"),
        ("\"rs\", \"tdm\"", "\"rs\", \"magic\""),
        ("master_seed = 7", "master_seed = 7\nsurprise = 1"),
    ] {
        let text = SMALL.replace(from, to);
        let parsed = ExperimentConfig::from_toml_str(&text).and_then(|c| c.validate().map(|_| c));
        assert!(matches!(parsed, Err(Error::Config(_))), "{to}: {parsed:?}");
    }
}

#[test]
fn summary_of_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_to(&small(), &dir.path().join("s.csv"), false);
    let s = summarize(&report.rows, 10.0);
    for algo in [Algo::Rs, Algo::Tdm] {
        for snr in [0.0, 10.0, 20.0] {
            let cell = s.cell(algo, snr).unwrap();
            assert_eq!(cell.n, 2);
            assert!(cell.mean.is_finite() && cell.stderr >= 0.0);
        }
    }
    assert_eq!(s.rs_tdm_gap.len(), 3);
    assert!(report.rows.iter().all(|r| r.status != RunStatus::SolverFailure));
}
