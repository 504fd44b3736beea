//! Flat CSV plot data derived from a run directory.

use std::path::PathBuf;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::manifest::RunDir;
use super::pipeline::{csv, records_csv, LyapunovReport, VariationalSummary, LYAPUNOV_FILE, RECORDS_FILE, VARIATIONAL_FILE};
use crate::error::{Error, Result};
use crate::montecarlo::{chi, EstimateRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    /// `t, log_estimate, stderr, ess, seed` for every record in the run.
    Records,
    /// `t, tchi, log_estimate, stderr, prediction`.
    Lyapunov,
    /// `theta, M_estimate, predicted_ratio`.
    Scaling,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Records => "records",
            PlotKind::Lyapunov => "lyapunov",
            PlotKind::Scaling => "scaling",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            PlotKind::Records => &["t", "log_estimate", "stderr", "ess", "seed"],
            PlotKind::Lyapunov => &["t", "tchi", "log_estimate", "stderr", "prediction"],
            PlotKind::Scaling => &["theta", "M_estimate", "predicted_ratio"],
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [PlotKind::Records, PlotKind::Lyapunov, PlotKind::Scaling]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::ConfigInvalid {
                field: "plot".into(),
                message: format!("unknown plot `{s}` (records, lyapunov, scaling)"),
            })
    }
}

fn collect<T: DeserializeOwned>(run: &RunDir, file: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for e in &run.manifest().entries {
        for o in e.outputs.iter().filter(|o| o.path.ends_with(&format!("-{file}"))) {
            out.push(serde_json::from_slice(&run.read_output(o)?)?);
        }
    }
    Ok(out)
}

/// Builds the CSV text for `kind` from the run's hash-verified outputs.
pub fn plot_csv(run: &RunDir, kind: PlotKind) -> Result<String> {
    match kind {
        PlotKind::Records => {
            let records: Vec<EstimateRecord> = collect::<Vec<EstimateRecord>>(run, RECORDS_FILE)?.concat();
            if records.is_empty() {
                return Err(Error::MissingRecords("estimate".into()));
            }
            Ok(records_csv(&records))
        }
        PlotKind::Lyapunov => {
            let reports: Vec<LyapunovReport> = collect(run, LYAPUNOV_FILE)?;
            let mut rows = Vec::new();
            for rep in &reports {
                let c = chi(&rep.spec);
                for r in &rep.records {
                    let tchi = r.t.powf(c);
                    let prediction = rep.predicted_slope.map_or(f64::NAN, |s| s * tchi);
                    rows.push(vec![r.t, tchi, r.log_estimate, r.log_stderr, prediction]);
                }
            }
            if rows.is_empty() {
                return Err(Error::MissingRecords("lyapunov".into()));
            }
            Ok(csv(kind.columns(), rows))
        }
        PlotKind::Scaling => {
            let sets: Vec<Vec<VariationalSummary>> = collect(run, VARIATIONAL_FILE)?;
            let mut rows = Vec::new();
            for set in &sets {
                let Some(base) = set.first() else { continue };
                let (a, b) = (base.spec.alpha, base.spec.beta());
                for s in set {
                    rows.push(vec![s.theta, s.m_estimate, (s.theta / base.theta).powf(a / (a - b))]);
                }
            }
            if rows.is_empty() {
                return Err(Error::MissingRecords("variational".into()));
            }
            Ok(csv(kind.columns(), rows))
        }
    }
}

/// Writes `plot-{name}.csv` into the run directory and returns its path.
pub fn emit_plot_data(run: &RunDir, kind: PlotKind) -> Result<PathBuf> {
    let text = plot_csv(run, kind)?;
    let path = run.root().join(format!("plot-{}.csv", kind.name()));
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Parses a plot CSV back into its header and numeric rows.
pub fn read_plot_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty plot file"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>().map_err(|e| Error::invalid(format!("bad cell `{c}`: {e}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}
