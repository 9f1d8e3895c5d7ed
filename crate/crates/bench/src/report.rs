//! Experiment reports and their CSV / JSON forms.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use qgrf_core::stats::{mean, sample_std};
use qgrf_core::theory::TheoryRecord;

use crate::Result;

pub const CSV_HEADER: &str = "experiment,graph,metric,scheme,m,repeats,mean,std_dev,std_err";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub graph: String,
    pub n: usize,
    pub p: f64,
    pub sigma: Option<f64>,
    pub walks: Vec<usize>,
    pub schemes: Vec<String>,
    pub delta: Option<f64>,
    pub repeats: usize,
    pub seed: u64,
    /// Experiment-specific settings, e.g. diffusion time or cluster count.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub metric: String,
    pub scheme: String,
    pub m: usize,
    pub repeats: usize,
    pub mean: f64,
    /// Sample standard deviation over repeats.
    pub std_dev: f64,
    /// `std_dev / sqrt(repeats)`.
    pub std_err: f64,
    pub values: Vec<f64>,
}

impl ReportRow {
    pub fn new(metric: &str, scheme: &str, m: usize, values: Vec<f64>) -> Self {
        let std_dev = sample_std(&values);
        Self {
            metric: metric.to_string(),
            scheme: scheme.to_string(),
            m,
            repeats: values.len(),
            mean: mean(&values),
            std_dev,
            std_err: std_dev / (values.len() as f64).sqrt(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ConfigEcho,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn row(&self, scheme: &str, m: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.m == m)
    }

    pub fn metric_row(&self, metric: &str, scheme: &str, m: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.metric == metric && r.scheme == scheme && r.m == m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{:?},{:?},{:?}",
                self.experiment, self.config.graph, r.metric, r.scheme, r.m, r.repeats, r.mean, r.std_dev, r.std_err
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub p: f64,
    pub w: f64,
    pub delta: Option<f64>,
    pub lambdas: Vec<f64>,
    pub c: f64,
    /// Frobenius norm of the antithetic correlation matrix D.
    pub d_frobenius: f64,
    pub records: Vec<TheoryRecord>,
}

impl TheoryReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,w,delta,matrix,lambda_max,frobenius,negative_semidefinite,d_frobenius\n");
        for r in &self.records {
            let delta = r.delta.map(|d| format!("{d:?}")).unwrap_or_default();
            writeln!(
                out,
                "{:?},{:?},{},{},{:?},{:?},{},{:?}",
                r.p, r.w, delta, r.matrix, r.lambda_max, r.frobenius, r.negative_semidefinite, self.d_frobenius
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
