//! Per-target confidence from posterior draws, redundancy scores against the
//! already-acquired features, and the weighted feature value.
//!
//! Confidence in a target is the fraction of that target's rows a sampled
//! model labels correctly, averaged over many posterior draws. Redundancy is
//! measured twice per candidate — summed inverse |correlation| and summed
//! inverse |cosine| against the selected columns — then min-max normalized
//! across the round's candidate cohort.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::vi::{sample_posterior_with, PosteriorSample, VariationalParams};

/// Whether similarity magnitudes use absolute values (an anti-correlated
/// feature counts as redundant) or signed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    #[default]
    Absolute,
    Signed,
}

/// Weights of the combined feature value. Defaults: 0.4 confidence,
/// 0.3 covariance, 0.3 cosine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueWeights {
    pub confidence: f64,
    pub covariance: f64,
    pub cosine: f64,
}

impl Default for ValueWeights {
    fn default() -> Self {
        Self {
            confidence: 0.4,
            covariance: 0.3,
            cosine: 0.3,
        }
    }
}

impl ValueWeights {
    pub fn validate(&self) -> Result<()> {
        if self.confidence < 0.0 || self.covariance < 0.0 || self.cosine < 0.0 {
            return Err(Error::Config("value weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Confidence in one target over `l` posterior draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    /// Mean of `per_sample_precisions`.
    pub confidence: f64,
    /// Population variance of `per_sample_precisions`.
    pub variance: f64,
    pub per_sample_precisions: Vec<f64>,
}

/// A candidate's scores for one selection round. `cov_score` and `cos_score`
/// are the cohort-normalized values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature_index: usize,
    pub confidence: f64,
    pub cov_score: f64,
    pub cos_score: f64,
    pub value: f64,
}

/// Predicted label per row: softmax of `X W' + b'`, argmax with ties broken
/// toward the lowest label index.
pub fn predict_labels(
    sample: &PosteriorSample,
    data: &Dataset,
    subset: &[usize],
) -> Result<Vec<usize>> {
    if subset.len() != sample.n_features || data.n_classes() != sample.n_classes {
        return Err(Error::Contract(format!(
            "sample is {}×{}, asked to predict with {} columns over {} classes",
            sample.n_features,
            sample.n_classes,
            subset.len(),
            data.n_classes()
        )));
    }
    for &col in subset {
        if col >= data.n_features() {
            return Err(Error::Contract(format!(
                "feature index {col} out of bounds"
            )));
        }
    }
    let d = sample.n_classes;
    let mut labels = Vec::with_capacity(data.rows());
    let mut logits = vec![0.0; d];
    for row in 0..data.rows() {
        for (k, l) in logits.iter_mut().enumerate() {
            let mut acc = sample.b[k];
            for (j, &col) in subset.iter().enumerate() {
                acc += data.value(row, col) * sample.w[j * d + k];
            }
            *l = acc;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let mut best = 0usize;
        let mut best_p = f64::NEG_INFINITY;
        for (k, &l) in logits.iter().enumerate() {
            let p = (l - max).exp() / denom;
            if p > best_p {
                best_p = p;
                best = k;
            }
        }
        labels.push(best);
    }
    Ok(labels)
}

/// Fraction of the rows whose true label is `theta` that were predicted as
/// `theta`.
pub fn precision_for_target(predictions: &[usize], truth: &[usize], theta: usize) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} predictions against {} truths",
            predictions.len(),
            truth.len()
        )));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (&p, &t) in predictions.iter().zip(truth) {
        if t == theta {
            total += 1;
            if p == theta {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Data(format!("target {theta} absent from truth")));
    }
    Ok(hits as f64 / total as f64)
}

/// Sample the posterior `l` times, predict, and score the target each time.
/// Deterministic per seed.
pub fn confidence(
    params: &VariationalParams,
    validation: &Dataset,
    subset: &[usize],
    theta: usize,
    l: usize,
    seed: u64,
) -> Result<ConfidenceReport> {
    if l == 0 {
        return Err(Error::Contract("confidence needs at least one draw".into()));
    }
    let mut rng = rng::stream(seed);
    let mut precisions = Vec::with_capacity(l);
    for _ in 0..l {
        let sample = sample_posterior_with(params, &mut rng);
        let labels = predict_labels(&sample, validation, subset)?;
        precisions.push(precision_for_target(&labels, validation.targets(), theta)?);
    }
    let mean = precisions.iter().sum::<f64>() / l as f64;
    let variance = precisions
        .iter()
        .map(|p| (p - mean) * (p - mean))
        .sum::<f64>()
        / l as f64;
    Ok(ConfidenceReport {
        confidence: mean,
        variance,
        per_sample_precisions: precisions,
    })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0; // zero-variance column: correlation defined as 0
    }
    cov / (var_a.sqrt() * var_b.sqrt())
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0; // zero-norm vector: cosine defined as 0
    }
    dot / (na * nb)
}

fn similarity(value: f64, mode: SimilarityMode) -> f64 {
    match mode {
        SimilarityMode::Absolute => value.abs(),
        SimilarityMode::Signed => value,
    }
}

/// Raw redundancy score: summed (1 − correlation) over the selected columns.
/// Empty selection gives 0, which the per-cohort normalization maps to 1.
pub fn cov_score(candidate: &[f64], selected: &[Vec<f64>], mode: SimilarityMode) -> f64 {
    selected
        .iter()
        .map(|col| 1.0 - similarity(pearson(col, candidate), mode))
        .sum()
}

/// Raw redundancy score: summed (1 − cosine similarity) over the selected
/// columns.
pub fn cos_score(candidate: &[f64], selected: &[Vec<f64>], mode: SimilarityMode) -> f64 {
    selected
        .iter()
        .map(|col| 1.0 - similarity(cosine(col, candidate), mode))
        .sum()
}

/// Min-max normalization over a candidate cohort; a degenerate range maps
/// everything to 1.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|&x| (x - min) / (max - min)).collect()
}

/// The weighted feature value.
pub fn combine_value(confidence: f64, cov: f64, cos: f64, weights: &ValueWeights) -> f64 {
    weights.confidence * confidence + weights.covariance * cov + weights.cosine * cos
}
