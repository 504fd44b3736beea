use std::path::PathBuf;

use fpam_core::reporting::pipeline::{FkReport, TheoremReport};
use fpam_core::reporting::{emit_plot_data, read_plot_csv, run_config_file, PlotKind, RunDir};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"))
}

const ALL: [&str; 11] = [
    "kernels-validate",
    "sample-paths",
    "estimate-hamiltonian",
    "exp-moment",
    "moment",
    "lyapunov",
    "lower-bound",
    "fk-check",
    "lambda",
    "solve-variational",
    "full-theorem-check",
];

#[test]
fn every_shipped_config_runs_into_one_directory() {
    let dir = tempfile::tempdir().unwrap();
    for (i, name) in ALL.iter().enumerate() {
        let s = run_config_file(&config(name), dir.path(), None).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(s.entry.index, i);
        assert_eq!(s.entry.pipeline, *name);
        assert!(!s.entry.outputs.is_empty(), "{name} wrote nothing");
    }
    let run = RunDir::open_existing(dir.path()).unwrap();
    assert_eq!(run.manifest().entries.len(), ALL.len());

    let fk: FkReport =
        serde_json::from_slice(&std::fs::read(dir.path().join("007-fk-check.json")).unwrap()).unwrap();
    assert!(fk.agrees, "{fk:?}");

    let thm: TheoremReport =
        serde_json::from_slice(&std::fs::read(dir.path().join("010-theorem.json")).unwrap()).unwrap();
    assert_eq!(thm.rows.len(), 3);
    assert!(thm.variational.m_estimate > 0.0);
    for w in thm.rows.windows(2) {
        assert!(w[1].prediction / w[1].p > w[0].prediction / w[0].p);
    }

    for kind in [PlotKind::Records, PlotKind::Lyapunov, PlotKind::Scaling] {
        let path = emit_plot_data(&run, kind).unwrap();
        let (header, rows) = read_plot_csv(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(header, kind.columns());
        assert!(!rows.is_empty());
    }
}

#[test]
fn seed_override_changes_records() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_config_file(&config("exp-moment"), a.path(), None).unwrap();
    run_config_file(&config("exp-moment"), b.path(), Some(999)).unwrap();
    let ra = std::fs::read(a.path().join("000-records.json")).unwrap();
    let rb = std::fs::read(b.path().join("000-records.json")).unwrap();
    assert_ne!(ra, rb);
    let run = RunDir::open_existing(b.path()).unwrap();
    assert_eq!(run.manifest().entries[0].master_seed, 999);
}

#[test]
fn plot_round_trip_preserves_values() {
    let dir = tempfile::tempdir().unwrap();
    run_config_file(&config("lyapunov"), dir.path(), None).unwrap();
    let run = RunDir::open_existing(dir.path()).unwrap();
    let text = std::fs::read_to_string(emit_plot_data(&run, PlotKind::Lyapunov).unwrap()).unwrap();
    let (_, rows) = read_plot_csv(&text).unwrap();
    assert_eq!(rows.len(), 4);
    let records: Vec<fpam_core::EstimateRecord> =
        serde_json::from_slice(&std::fs::read(dir.path().join("000-records.json")).unwrap()).unwrap();
    for (row, rec) in rows.iter().zip(&records) {
        assert_eq!(row[0], rec.t);
        assert_eq!(row[2], rec.log_estimate);
        assert_eq!(row[3], rec.log_stderr);
    }
}
