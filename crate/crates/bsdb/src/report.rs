//! Per-frame mask scores as key=value text.
//!
//! One line per frame, then one aggregate line:
//!
//! ```text
//! method=sbsdb frame=0 iou=1.000000 precision=1.000000 recall=1.000000
//! method=sbsdb frame=mean iou=1.000000 precision=1.000000 recall=1.000000
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use bsdb_core::mask::{mask_metrics, MaskMetrics};
use bsdb_core::BinaryMask;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Written as a leading `benchmark=` field when set.
    pub benchmark: Option<String>,
    pub method: String,
    pub frames: Vec<MaskMetrics>,
}

impl MetricsReport {
    pub fn evaluate(method: &str, predicted: &[BinaryMask], truth: &[BinaryMask]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(bsdb_core::Error::Shape(format!(
                "{} predicted masks but {} truth masks",
                predicted.len(),
                truth.len()
            ))
            .into());
        }
        let frames = predicted.iter().zip(truth).map(|(p, t)| mask_metrics(p, t)).collect::<Result<_, _>>()?;
        Ok(MetricsReport { benchmark: None, method: method.into(), frames })
    }

    /// Unweighted mean over frames; an empty report scores 1.
    pub fn mean(&self) -> MaskMetrics {
        if self.frames.is_empty() {
            return MaskMetrics { iou: 1.0, precision: 1.0, recall: 1.0 };
        }
        let n = self.frames.len() as f64;
        let sum = |f: fn(&MaskMetrics) -> f64| self.frames.iter().map(f).sum::<f64>() / n;
        MaskMetrics { iou: sum(|m| m.iou), precision: sum(|m| m.precision), recall: sum(|m| m.recall) }
    }

    pub fn with_benchmark(mut self, name: &str) -> Self {
        self.benchmark = Some(name.into());
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (t, m) in self.frames.iter().enumerate() {
            self.push_line(&mut out, &t.to_string(), m);
        }
        self.push_line(&mut out, "mean", &self.mean());
        out
    }

    fn push_line(&self, out: &mut String, frame: &str, m: &MaskMetrics) {
        if let Some(b) = &self.benchmark {
            let _ = write!(out, "benchmark={b} ");
        }
        let _ = writeln!(
            out,
            "method={} frame={frame} iou={:.6} precision={:.6} recall={:.6}",
            self.method, m.iou, m.precision, m.recall
        );
    }
}

/// Splits one report line into its fields.
pub fn parse_line(line: &str) -> Result<BTreeMap<String, String>> {
    line.split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Sequence(format!("report field {kv:?} is not key=value")))
        })
        .collect()
}

/// Reads the aggregate line of each method from report text, keyed by
/// `benchmark/method` when a benchmark field is present.
pub fn parse_means(text: &str) -> Result<Vec<(String, MaskMetrics)>> {
    let mut means = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let fields = parse_line(line)?;
        if fields.get("frame").map(String::as_str) != Some("mean") {
            continue;
        }
        let num = |k: &str| -> Result<f64> {
            fields
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Sequence(format!("report line {line:?} lacks a numeric {k}")))
        };
        let method = fields.get("method").cloned().unwrap_or_default();
        let method = match fields.get("benchmark") {
            Some(b) => format!("{b}/{method}"),
            None => method,
        };
        means.push((method, MaskMetrics { iou: num("iou")?, precision: num("precision")?, recall: num("recall")? }));
    }
    Ok(means)
}
