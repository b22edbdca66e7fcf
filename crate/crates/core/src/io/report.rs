use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trajectory::{read_json, write_json, Metadata};
use crate::error::Result;
use crate::metrics::{DistanceKind, MetricReport, StepRecord};

/// How the numbers in a report were computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conventions {
    pub chamfer: String,
    pub emd: String,
    pub step_quality: String,
    pub aggregation: String,
    pub ground_truth: String,
    pub entropic_epsilon: Option<f64>,
    pub entropic_iterations: Option<usize>,
}

impl Conventions {
    pub fn standard() -> Self {
        Conventions {
            chamfer: "mean_a min_b |a-b|^2 + mean_b min_a |b-a|^2".into(),
            emd: "min over bijections of mean |a_i - b_pi(i)|, unit mass per point; entropic variant reports the Sinkhorn plan cost".into(),
            step_quality: "f_t = (1 - alpha_t) d(start, P_t) + alpha_t d(end, P_t)".into(),
            aggregation: "sum_t (alpha_t - alpha_{t-1}) (f_t + f_{t-1}) / 2".into(),
            ground_truth: "supplied start and end clouds".into(),
            entropic_epsilon: None,
            entropic_iterations: None,
        }
    }
}

/// A [`MetricReport`] as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub distance_kind: DistanceKind,
    pub aggregate: f64,
    pub per_checkpoint: Vec<StepRecord>,
    pub conventions: Conventions,
    pub metadata: Metadata,
}

impl ReportDocument {
    pub fn new(report: &MetricReport, conventions: Conventions) -> Self {
        ReportDocument {
            distance_kind: report.distance_kind,
            aggregate: report.aggregate,
            per_checkpoint: report.per_checkpoint.clone(),
            conventions,
            metadata: Metadata::now(),
        }
    }

    pub fn report(&self) -> MetricReport {
        MetricReport {
            distance_kind: self.distance_kind,
            per_checkpoint: self.per_checkpoint.clone(),
            aggregate: self.aggregate,
        }
    }
}

pub fn write_report(doc: &ReportDocument, path: impl AsRef<Path>) -> Result<()> {
    write_json(doc, path.as_ref())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportDocument> {
    read_json(path.as_ref())
}
