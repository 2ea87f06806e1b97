//! Output documents: evaluation reports (TOML), the CCR/FPR curve, training
//! logs and sweep result tables (CSV).

use std::path::Path;

use dmdsc_core::eval::{CurvePoint, EvalReport};
use dmdsc_core::train::TrainLog;
use serde::{Deserialize, Serialize};

use crate::fsutil::{read_to_string, write_atomic};
use crate::{Error, Result};

/// On-disk form of an [`EvalReport`] without its curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub acc: f64,
    pub auroc: f64,
    pub oscr: f64,
    pub num_known_test: usize,
    pub num_unknown_test: usize,
    /// Number of reports averaged into this one.
    pub averaged_over: usize,
}

impl ReportDoc {
    pub fn new(report: &EvalReport, averaged_over: usize) -> Self {
        Self {
            acc: report.acc,
            auroc: report.auroc,
            oscr: report.oscr,
            num_known_test: report.num_known_test,
            num_unknown_test: report.num_unknown_test,
            averaged_over,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        toml::from_str(&read_to_string(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn real(v: f64) -> String {
    format!("{v:?}")
}

pub fn curve_csv(curve: &[CurvePoint]) -> Vec<u8> {
    csv_bytes(&["fpr", "ccr"], curve.iter().map(|p| [real(p.fpr), real(p.ccr)]))
}

/// `epoch,intra,inter,bg,total,train_acc`; `train_acc` is blank on epochs
/// where it was not computed.
pub fn trainlog_csv(log: &TrainLog) -> Vec<u8> {
    csv_bytes(
        &["epoch", "intra", "inter", "bg", "total", "train_acc"],
        log.records.iter().map(|r| {
            [
                r.epoch.to_string(),
                real(r.intra),
                real(r.inter),
                real(r.bg),
                real(r.total),
                r.train_acc.map(real).unwrap_or_default(),
            ]
        }),
    )
}

/// One row of a sweep: a variant and its averaged metrics, or the reason it
/// produced none.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub variant: String,
    /// Sweep coordinates, used for the per-metric plot files.
    pub coords: Vec<String>,
    pub outcome: std::result::Result<EvalReport, String>,
}

impl ResultRow {
    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(_) => "ok".to_string(),
            Err(msg) => msg.clone(),
        }
    }

    pub fn report(&self) -> Option<&EvalReport> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    /// Names of the sweep coordinates, e.g. `["lambda_inter", "lambda_bg"]`.
    pub axes: Vec<String>,
    pub rows: Vec<ResultRow>,
}

pub const METRICS: [&str; 3] = ["acc", "auroc", "oscr"];

fn metric(report: &EvalReport, name: &str) -> f64 {
    match name {
        "acc" => report.acc,
        "auroc" => report.auroc,
        _ => report.oscr,
    }
}

impl ResultsTable {
    /// `variant,acc,auroc,oscr,status`; failed rows leave metrics blank.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut header = vec!["variant"];
        header.extend(METRICS);
        header.push("status");
        csv_bytes(
            &header,
            self.rows.iter().map(|row| {
                let mut fields = vec![row.variant.clone()];
                for m in METRICS {
                    fields.push(row.report().map(|r| real(metric(r, m))).unwrap_or_default());
                }
                fields.push(row.status());
                fields
            }),
        )
    }

    /// Plot data for one metric: the sweep coordinates plus the value, one
    /// line per successful row.
    pub fn plot_csv(&self, metric_name: &str) -> Vec<u8> {
        let mut header: Vec<&str> = self.axes.iter().map(String::as_str).collect();
        header.push(metric_name);
        csv_bytes(
            &header,
            self.rows.iter().filter_map(|row| {
                row.report().map(|r| {
                    let mut fields = row.coords.clone();
                    fields.push(real(metric(r, metric_name)));
                    fields
                })
            }),
        )
    }

    pub fn row(&self, variant: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Writes `results.csv` and `plot_<metric>.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("results.csv"), &self.to_csv())?;
        for m in METRICS {
            write_atomic(&dir.join(format!("plot_{m}.csv")), &self.plot_csv(m))?;
        }
        Ok(())
    }
}
