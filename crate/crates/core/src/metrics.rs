//! One-vs-rest confusion statistics, F1, and plot-ready trend assembly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selector::RoundRecord;

/// One-vs-rest confusion counts for a designated positive target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    /// FP / (FP + TN); 0 when there are no negatives.
    pub fn fp_rate(&self) -> f64 {
        let denom = self.false_positives + self.true_negatives;
        if denom == 0 {
            0.0
        } else {
            self.false_positives as f64 / denom as f64
        }
    }

    /// FN / (FN + TP); 0 when there are no positives.
    pub fn fn_rate(&self) -> f64 {
        let denom = self.false_negatives + self.true_positives;
        if denom == 0 {
            0.0
        } else {
            self.false_negatives as f64 / denom as f64
        }
    }
}

/// Tally one-vs-rest counts with positive class `theta`.
pub fn confusion(predictions: &[usize], truth: &[usize], theta: usize) -> Result<ConfusionCounts> {
    if predictions.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} predictions against {} truths",
            predictions.len(),
            truth.len()
        )));
    }
    let mut counts = ConfusionCounts {
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
    };
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p == theta, t == theta) {
            (true, true) => counts.true_positives += 1,
            (true, false) => counts.false_positives += 1,
            (false, false) => counts.true_negatives += 1,
            (false, true) => counts.false_negatives += 1,
        }
    }
    Ok(counts)
}

/// F1 = 2·TP / (2·TP + FP + FN); defined as 0 when the denominator is 0.
pub fn f1(counts: &ConfusionCounts) -> f64 {
    let denom = 2 * counts.true_positives + counts.false_positives + counts.false_negatives;
    if denom == 0 {
        0.0
    } else {
        2.0 * counts.true_positives as f64 / denom as f64
    }
}

/// Per-feature-count metric arrays, ready for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub features: Vec<usize>,
    pub confidence: Vec<f64>,
    pub confidence_var: Vec<f64>,
    pub fp_rate: Vec<f64>,
    pub fn_rate: Vec<f64>,
    pub f1: Vec<f64>,
}

impl TrendSeries {
    /// Assemble the trend from selection-round records.
    pub fn from_rounds(history: &[RoundRecord]) -> Result<Self> {
        if history.is_empty() {
            return Err(Error::Contract("cannot assemble an empty trend".into()));
        }
        let mut series = Self::empty();
        for record in history {
            series.features.push(record.round);
            series.confidence.push(record.test.confidence);
            series.confidence_var.push(record.test.confidence_var);
            series.fp_rate.push(record.test.fp_rate);
            series.fn_rate.push(record.test.fn_rate);
            series.f1.push(record.test.f1);
        }
        Ok(series)
    }

    /// Assemble the trend from per-prefix metrics (feature counts 1..n).
    pub fn from_prefix_metrics(metrics: &[crate::selector::TestMetrics]) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::Contract("cannot assemble an empty trend".into()));
        }
        let mut series = Self::empty();
        for (i, m) in metrics.iter().enumerate() {
            series.features.push(i + 1);
            series.confidence.push(m.confidence);
            series.confidence_var.push(m.confidence_var);
            series.fp_rate.push(m.fp_rate);
            series.fn_rate.push(m.fn_rate);
            series.f1.push(m.f1);
        }
        Ok(series)
    }

    fn empty() -> Self {
        Self {
            features: Vec::new(),
            confidence: Vec::new(),
            confidence_var: Vec::new(),
            fp_rate: Vec::new(),
            fn_rate: Vec::new(),
            f1: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// F1 at an exact feature count, if that row exists.
    pub fn f1_at(&self, features: usize) -> Option<f64> {
        self.features
            .iter()
            .position(|&f| f == features)
            .map(|i| self.f1[i])
    }

    /// CSV with header `features,confidence,confidence_var,fp_rate,fn_rate,f1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("features,confidence,confidence_var,fp_rate,fn_rate,f1\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.features[i],
                self.confidence[i],
                self.confidence_var[i],
                self.fp_rate[i],
                self.fn_rate[i],
                self.f1[i]
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty trend CSV".into()))?;
        if header != "features,confidence,confidence_var,fp_rate,fn_rate,f1" {
            return Err(Error::Data(format!("unexpected trend header {header:?}")));
        }
        let mut series = Self::empty();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected 6 fields, found {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    row: i + 1,
                    message: format!("cannot parse {s:?}"),
                })
            };
            series
                .features
                .push(fields[0].parse().map_err(|_| Error::Parse {
                    row: i + 1,
                    message: format!("cannot parse {:?}", fields[0]),
                })?);
            series.confidence.push(parse(fields[1])?);
            series.confidence_var.push(parse(fields[2])?);
            series.fp_rate.push(parse(fields[3])?);
            series.fn_rate.push(parse(fields[4])?);
            series.f1.push(parse(fields[5])?);
        }
        Ok(series)
    }
}
