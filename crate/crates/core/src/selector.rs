//! Greedy budgeted feature acquisition driven by target confidence.
//!
//! Each round trains one model per remaining candidate on the selected set
//! plus that candidate, scores it on the validation set (confidence for the
//! focus target plus the two redundancy scores), acquires the argmax-value
//! feature, then trains a fresh evaluation model and records test metrics.
//! The loop continues while the budget has room, the test FP and FN rates sit
//! above their thresholds, and confidence sits below its threshold.
//!
//! Candidate models inside a round share one training-noise stream and one
//! confidence stream (common random numbers), so scores are comparable and
//! the outcome is independent of candidate evaluation order.

use serde::{Deserialize, Serialize};

use crate::data::SampledSets;
use crate::error::{Error, Result};
use crate::metrics::{confusion, f1};
use crate::rng;
use crate::scoring::{
    combine_value, confidence, cos_score, cov_score, normalize_scores, predict_labels,
    FeatureScore, SimilarityMode, ValueWeights,
};
use crate::vi::{train, PosteriorSample, TrainConfig};

// Stream labels for derived seeds.
const STREAM_CANDIDATE_TRAIN: u64 = 1;
const STREAM_CANDIDATE_CONFIDENCE: u64 = 2;
pub(crate) const STREAM_EVAL_TRAIN: u64 = 3;
pub(crate) const STREAM_EVAL_CONFIDENCE: u64 = 4;

/// Budget and stopping thresholds.
///
/// With `metric_stops_enabled` false only the budget (or candidate
/// exhaustion) ends the loop, which is how fixed-budget benchmark runs are
/// configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub budget: usize,
    /// Stop once the test FP rate is ≤ this.
    pub fp_threshold: f64,
    /// Stop once the test FN rate is ≤ this.
    pub fn_threshold: f64,
    /// Stop once confidence in the focus target is ≥ this.
    pub confidence_threshold: f64,
    pub metric_stops_enabled: bool,
}

impl Thresholds {
    pub fn new(budget: usize, fp: f64, fn_: f64, confidence: f64) -> Result<Self> {
        let t = Self {
            budget,
            fp_threshold: fp,
            fn_threshold: fn_,
            confidence_threshold: confidence,
            metric_stops_enabled: true,
        };
        t.validate()?;
        Ok(t)
    }

    /// Budget-only stopping.
    pub fn budget_only(budget: usize) -> Self {
        Self {
            budget,
            fp_threshold: 0.0,
            fn_threshold: 0.0,
            confidence_threshold: 1.0,
            metric_stops_enabled: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        for (name, v) in [
            ("fp_threshold", self.fp_threshold),
            ("fn_threshold", self.fn_threshold),
            ("confidence_threshold", self.confidence_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Why a selection run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    FpMet,
    FnMet,
    ConfidenceMet,
    Exhausted,
}

/// Test-set metrics for one feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub confidence: f64,
    pub confidence_var: f64,
    pub f1: f64,
}

/// Everything recorded about one acquisition round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based; equals the feature count after this round's acquisition.
    pub round: usize,
    pub chosen_feature: usize,
    /// Scores for every candidate evaluated this round, by feature index.
    pub scores: Vec<FeatureScore>,
    pub test: TestMetrics,
    pub candidate_trainings: usize,
}

/// Final state of a selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    /// Acquired features in acquisition order.
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    /// Bias-only test metrics before the first acquisition.
    pub initial: TestMetrics,
    pub history: Vec<RoundRecord>,
    pub stop_reason: StopReason,
    /// Candidate-model trainings across all rounds.
    pub candidate_trainings: usize,
    /// One evaluation training per completed round.
    pub evaluation_trainings: usize,
    /// Candidate plus evaluation trainings.
    pub total_trainings: usize,
}

/// Everything a selection run needs besides the data and the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub thresholds: Thresholds,
    pub weights: ValueWeights,
    #[serde(default)]
    pub similarity: SimilarityMode,
    pub train: TrainConfig,
    /// Posterior draws per confidence estimate.
    pub confidence_draws: usize,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::budget_only(5),
            weights: ValueWeights::default(),
            similarity: SimilarityMode::Absolute,
            train: TrainConfig::default(),
            confidence_draws: 300,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.weights.validate()?;
        if self.confidence_draws == 0 {
            return Err(Error::Config("confidence_draws must be at least 1".into()));
        }
        Ok(())
    }
}

/// Train on the balanced train set restricted to `feature_set`, then report
/// test FP/FN rates and F1 from posterior-mean predictions plus a sampled
/// confidence estimate.
pub fn evaluate_on_test(
    feature_set: &[usize],
    sets: &SampledSets,
    theta: usize,
    train_cfg: &TrainConfig,
    confidence_draws: usize,
    confidence_seed: u64,
) -> Result<TestMetrics> {
    if !sets.test.targets().contains(&theta) {
        return Err(Error::Data(format!(
            "focus target {theta} absent from the test set"
        )));
    }
    let params = train(&sets.train, feature_set, train_cfg)?;
    let mean_model = PosteriorSample::from_means(&params);
    let predictions = predict_labels(&mean_model, &sets.test, feature_set)?;
    let counts = confusion(&predictions, sets.test.targets(), theta)?;
    let report = confidence(
        &params,
        &sets.test,
        feature_set,
        theta,
        confidence_draws,
        confidence_seed,
    )?;
    Ok(TestMetrics {
        fp_rate: counts.fp_rate(),
        fn_rate: counts.fn_rate(),
        confidence: report.confidence,
        confidence_var: report.variance,
        f1: f1(&counts),
    })
}

fn guard_failure(metrics: &TestMetrics, thresholds: &Thresholds) -> Option<StopReason> {
    if !thresholds.metric_stops_enabled {
        return None;
    }
    if metrics.fp_rate <= thresholds.fp_threshold {
        return Some(StopReason::FpMet);
    }
    if metrics.fn_rate <= thresholds.fn_threshold {
        return Some(StopReason::FnMet);
    }
    if metrics.confidence >= thresholds.confidence_threshold {
        return Some(StopReason::ConfidenceMet);
    }
    None
}

/// Run the greedy acquisition loop. Deterministic per `cfg.seed`.
pub fn run_selection(
    sets: &SampledSets,
    theta: usize,
    cfg: &SelectionConfig,
) -> Result<SelectionState> {
    cfg.validate()?;
    for set in [&sets.train, &sets.validation, &sets.test] {
        if !set.targets().contains(&theta) {
            return Err(Error::Data(format!(
                "focus target {theta} missing from one of the sampled sets"
            )));
        }
    }

    let n_features = sets.train.n_features();
    let mut remaining: Vec<usize> = (0..n_features).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut selected_columns: Vec<Vec<f64>> = Vec::new();
    let mut history: Vec<RoundRecord> = Vec::new();
    let mut candidate_trainings = 0usize;

    // Algorithm guard reads test metrics before the first acquisition; a
    // bias-only evaluation defines them.
    let initial = evaluate_on_test(
        &[],
        sets,
        theta,
        &cfg.train
            .with_seed(rng::mix(cfg.seed, 0, STREAM_EVAL_TRAIN)),
        cfg.confidence_draws,
        rng::mix(cfg.seed, 0, STREAM_EVAL_CONFIDENCE),
    )?;

    let mut last_metrics = initial.clone();
    let stop_reason = loop {
        if selected.len() >= cfg.thresholds.budget {
            break StopReason::Budget;
        }
        if let Some(reason) = guard_failure(&last_metrics, &cfg.thresholds) {
            break reason;
        }
        if remaining.is_empty() {
            break StopReason::Exhausted;
        }

        let round = selected.len() + 1;
        // All candidates in a round share the same training and confidence
        // streams, so candidate values are paired comparisons.
        let train_cfg =
            cfg.train
                .with_seed(rng::mix(cfg.seed, round as u64, STREAM_CANDIDATE_TRAIN));
        let confidence_seed = rng::mix(cfg.seed, round as u64, STREAM_CANDIDATE_CONFIDENCE);

        let mut confidences = Vec::with_capacity(remaining.len());
        let mut raw_cov = Vec::with_capacity(remaining.len());
        let mut raw_cos = Vec::with_capacity(remaining.len());
        for &candidate in &remaining {
            let mut feature_set = selected.clone();
            feature_set.push(candidate);
            let params = train(&sets.train, &feature_set, &train_cfg).map_err(|e| match e {
                Error::Numeric { iteration, message } => Error::Numeric {
                    iteration,
                    message: format!("round {round}, candidate {candidate}: {message}"),
                },
                other => other,
            })?;
            candidate_trainings += 1;
            let report = confidence(
                &params,
                &sets.validation,
                &feature_set,
                theta,
                cfg.confidence_draws,
                confidence_seed,
            )?;
            confidences.push(report.confidence);
            let column = sets.train.column(candidate);
            raw_cov.push(cov_score(&column, &selected_columns, cfg.similarity));
            raw_cos.push(cos_score(&column, &selected_columns, cfg.similarity));
        }

        let norm_cov = normalize_scores(&raw_cov);
        let norm_cos = normalize_scores(&raw_cos);
        let scores: Vec<FeatureScore> = remaining
            .iter()
            .enumerate()
            .map(|(i, &feature_index)| FeatureScore {
                feature_index,
                confidence: confidences[i],
                cov_score: norm_cov[i],
                cos_score: norm_cos[i],
                value: combine_value(confidences[i], norm_cov[i], norm_cos[i], &cfg.weights),
            })
            .collect();

        // Argmax by value; ties go to the lowest feature index (scores are
        // already in ascending index order).
        let best = scores
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                a.value
                    .partial_cmp(&b.value)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(std::cmp::Ordering::Greater) // keep the earlier on ties
            })
            .map(|(i, _)| i)
            .expect("remaining is nonempty");
        let chosen = remaining.remove(best);
        selected.push(chosen);
        selected_columns.push(sets.train.column(chosen));

        let test = evaluate_on_test(
            &selected,
            sets,
            theta,
            &cfg.train
                .with_seed(rng::mix(cfg.seed, round as u64, STREAM_EVAL_TRAIN)),
            cfg.confidence_draws,
            rng::mix(cfg.seed, round as u64, STREAM_EVAL_CONFIDENCE),
        )?;
        last_metrics = test.clone();
        history.push(RoundRecord {
            round,
            chosen_feature: chosen,
            scores,
            test,
            candidate_trainings: remaining.len() + 1,
        });
    };

    let evaluation_trainings = history.len();
    let selected_names = selected
        .iter()
        .map(|&i| sets.train.feature_names()[i].clone())
        .collect();
    Ok(SelectionState {
        selected,
        selected_names,
        initial,
        history,
        stop_reason,
        candidate_trainings,
        evaluation_trainings,
        total_trainings: candidate_trainings + evaluation_trainings,
    })
}
