//! Configs, run directories, manifests and plot data.
//!
//! A run directory holds `manifest.json` plus numbered outputs. Each
//! invocation appends one manifest entry and never rewrites earlier files.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod plot;

pub use config::{FieldSource, McSettings, RunConfig};
pub use manifest::{Manifest, ManifestEntry, OutputFile, RunDir};
pub use pipeline::{run_config_file, run_experiment, RunSummary};
pub use plot::{emit_plot_data, plot_csv, read_plot_csv, PlotKind};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use std::path::Path;

    fn run(json: &str, dir: &Path) -> crate::Result<RunSummary> {
        run_experiment(&RunConfig::from_json(json)?, dir, Path::new("."))
    }

    const LYAPUNOV: &str = r#"{"pipeline":"lyapunov","m_value":0.5,
        "experiment":{"spec":{"alpha":2.0,"beta0":0.0,"kernel":{"type":"riesz","beta":0.0},"dim":1},
        "p":2,"rho":1,"t_grid":[0.5,1.0,2.0],"n_replicas":200,"n_steps":16,"master_seed":3}}"#;

    #[test]
    fn kernels_validate_passes_in_full_regime() {
        let dir = tempfile::tempdir().unwrap();
        let s = run(
            r#"{"pipeline":"kernels-validate","spec":{"alpha":1.5,"beta0":0.2,"kernel":{"type":"riesz","beta":0.3},"dim":1}}"#,
            dir.path(),
        )
        .unwrap();
        assert_eq!(s.entry.pipeline, "kernels-validate");
        assert!(dir.path().join("000-kernels.json").exists());
    }

    #[test]
    fn lyapunov_plot_has_one_row_per_horizon() {
        let dir = tempfile::tempdir().unwrap();
        run(LYAPUNOV, dir.path()).unwrap();
        let rd = RunDir::open_existing(dir.path()).unwrap();
        let path = emit_plot_data(&rd, PlotKind::Lyapunov).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let (header, rows) = read_plot_csv(&text).unwrap();
        assert_eq!(header, PlotKind::Lyapunov.columns());
        assert_eq!(rows.len(), 3);
        // flat kernel, β = 0: log E u² = t² exactly, prediction = 2·1·0.5·t²
        for r in &rows {
            assert!((r[2] - r[0] * r[0]).abs() < 1e-9, "{r:?}");
            assert!((r[4] - r[1]).abs() < 1e-12);
        }
        assert_eq!(plot_csv(&rd, PlotKind::Records).unwrap().lines().count(), 4);
    }

    #[test]
    fn empty_run_has_no_records() {
        let dir = tempfile::tempdir().unwrap();
        let rd = RunDir::open(dir.path()).unwrap();
        for kind in [PlotKind::Records, PlotKind::Lyapunov, PlotKind::Scaling] {
            assert!(matches!(plot_csv(&rd, kind), Err(Error::MissingRecords(_))));
        }
    }

    #[test]
    fn invalid_configs_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.json");
        std::fs::write(&cfg, "{ \"pipeline\": ").unwrap();
        let out = dir.path().join("out");
        let e = run_config_file(&cfg, &out, None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(!out.exists());

        std::fs::write(
            &cfg,
            r#"{"pipeline":"moment","experiment":{"spec":{"alpha":1.0,"beta0":0.5,"kernel":{"type":"riesz","beta":0.6},"dim":1},
            "p":2,"rho":0,"t_grid":[1.0],"n_replicas":10,"n_steps":8,"master_seed":1}}"#,
        )
        .unwrap();
        let e = run_config_file(&cfg, &out, None).unwrap_err();
        assert!(matches!(e, Error::RegimeMismatch { .. }), "{e}");
        assert!(!out.exists());
    }

    #[test]
    fn reruns_give_identical_records() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let json = LYAPUNOV.replace("\"beta\":0.0", "\"beta\":0.4");
        run(&json, a.path()).unwrap();
        run(&json, b.path()).unwrap();
        for f in ["000-records.json", "000-lyapunov.json", "000-records.csv"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
    }

    #[test]
    fn scaling_plot_from_variational_run() {
        let dir = tempfile::tempdir().unwrap();
        run(
            r#"{"pipeline":"solve-variational","spec":{"alpha":1.5,"beta0":0.0,"kernel":{"type":"riesz","beta":0.0},"dim":1},
            "box_size":4,"grid_n":16,"n_t":1,"thetas":[1,2],"options":{"restarts":1}}"#,
            dir.path(),
        )
        .unwrap();
        let rd = RunDir::open_existing(dir.path()).unwrap();
        let (_, rows) = read_plot_csv(&plot_csv(&rd, PlotKind::Scaling).unwrap()).unwrap();
        assert_eq!(rows.len(), 2);
        // β = 0: M(θ) = θ/2 exactly
        assert!((rows[0][1] - 0.5).abs() < 1e-6);
        assert!((rows[1][1] - 1.0).abs() < 1e-6);
        assert_eq!(rows[1][2], 2.0);
    }
}
