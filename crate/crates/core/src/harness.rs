//! Experiment orchestration: one config drives data preparation, a selector,
//! metric assembly and artifact output, deterministically per seed.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{
    evaluate_baseline, mi_rank, mrmr_select, parse_order_file, MiConfig, MrmrVariant,
};
use crate::data::{load_csv, prepare_sets, Dataset, SampledSets, SamplingConfig, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::TrendSeries;
use crate::scoring::{SimilarityMode, ValueWeights};
use crate::selector::{run_selection, SelectionConfig, SelectionState, TestMetrics, Thresholds};
use crate::vi::{train, TrainConfig, VariationalParams};

/// Which selector a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    Tf,
    Mi,
    MrmrMid,
    MrmrMiq,
    External,
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SelectorKind::Tf => "tf",
            SelectorKind::Mi => "mi",
            SelectorKind::MrmrMid => "mrmr-mid",
            SelectorKind::MrmrMiq => "mrmr-miq",
            SelectorKind::External => "external",
        };
        f.write_str(name)
    }
}

/// Optional stopping thresholds; absent sections leave the budget as the
/// only stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdSettings {
    pub fp_threshold: f64,
    pub fn_threshold: f64,
    pub confidence_threshold: f64,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        Self {
            fp_threshold: 0.0,
            fn_threshold: 0.0,
            confidence_threshold: 1.0,
        }
    }
}

/// Split fractions (the seed comes from the experiment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSettings {
    pub train_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
            test_fraction: 0.2,
        }
    }
}

fn default_budget() -> usize {
    5
}

fn default_confidence_draws() -> usize {
    300
}

fn default_mi_neighbors() -> usize {
    3
}

fn default_balance_cap() -> f64 {
    1.0
}

fn default_checkpoints() -> Vec<usize> {
    vec![5, 10, 15, 20, 25]
}

/// One experiment, file-loadable from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub target_column: String,
    #[serde(default)]
    pub missing_token: String,
    pub focus_label: String,
    pub selector: SelectorKind,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub external_order: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: Option<ThresholdSettings>,
    #[serde(default)]
    pub weights: ValueWeights,
    #[serde(default)]
    pub similarity: SimilarityMode,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitSettings,
    #[serde(default = "default_balance_cap")]
    pub balance_cap: f64,
    #[serde(default = "default_confidence_draws")]
    pub confidence_draws: usize,
    #[serde(default = "default_mi_neighbors")]
    pub mi_neighbors: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid JSON config {}: {e}", path.display())))
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid TOML config {}: {e}", path.display())))
        }
    }

    fn thresholds(&self) -> Result<Thresholds> {
        match self.thresholds {
            None => Ok(Thresholds::budget_only(self.budget)),
            Some(t) => Thresholds::new(
                self.budget,
                t.fp_threshold,
                t.fn_threshold,
                t.confidence_threshold,
            ),
        }
    }

    fn selection_config(&self) -> Result<SelectionConfig> {
        let cfg = SelectionConfig {
            thresholds: self.thresholds()?,
            weights: self.weights,
            similarity: self.similarity,
            train: self.train.with_seed(self.seed),
            confidence_draws: self.confidence_draws,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn mi_config(&self) -> MiConfig {
        MiConfig {
            k_neighbors: self.mi_neighbors,
            seed: self.seed,
        }
    }
}

/// Selector-specific run result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunResult {
    Selection(SelectionState),
    Baseline {
        order: Vec<usize>,
        order_names: Vec<String>,
        metrics: Vec<TestMetrics>,
    },
}

/// Everything a run produces, with its config echoed for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub config: ExperimentConfig,
    pub dataset_rows: usize,
    pub focus_index: usize,
    pub feature_names: Vec<String>,
    pub result: RunResult,
    pub trend: TrendSeries,
}

impl RunArtifact {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("invalid run artifact: {e}")))
    }

    /// The feature set the run ended on, in acquisition/rank order.
    pub fn final_features(&self) -> &[usize] {
        match &self.result {
            RunResult::Selection(state) => &state.selected,
            RunResult::Baseline { order, .. } => order,
        }
    }
}

/// A finished run plus the data it ran on (for follow-up model dumps).
pub struct RunOutput {
    pub artifact: RunArtifact,
    pub sets: SampledSets,
}

fn load_and_prepare(cfg: &ExperimentConfig) -> Result<(Dataset, SampledSets, usize)> {
    let dataset = load_csv(&cfg.dataset, &cfg.target_column, &cfg.missing_token)?;
    let focus = dataset.label_of(&cfg.focus_label).ok_or_else(|| {
        Error::Config(format!(
            "focus label {:?} not among targets {:?}",
            cfg.focus_label,
            dataset.target_names()
        ))
    })?;
    let sampling = SamplingConfig {
        split: SplitSpec::new(cfg.split.train_fraction, cfg.split.test_fraction, cfg.seed)?,
        balance_cap: cfg.balance_cap,
    };
    let sets = prepare_sets(&dataset, &sampling)?;
    Ok((dataset, sets, focus))
}

/// Run one experiment end to end. Deterministic per config + seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (dataset, sets, focus) = load_and_prepare(cfg)?;
    let (result, trend) = match cfg.selector {
        SelectorKind::Tf => {
            let state = run_selection(&sets, focus, &cfg.selection_config()?)?;
            if state.history.is_empty() {
                return Err(Error::Data(format!(
                    "selection stopped before acquiring any feature ({:?})",
                    state.stop_reason
                )));
            }
            let trend = TrendSeries::from_rounds(&state.history)?;
            (RunResult::Selection(state), trend)
        }
        SelectorKind::Mi
        | SelectorKind::MrmrMid
        | SelectorKind::MrmrMiq
        | SelectorKind::External => {
            let budget = cfg.budget.min(sets.train.n_features());
            let order = match cfg.selector {
                SelectorKind::Mi => mi_rank(&sets.train, budget, &cfg.mi_config())?,
                SelectorKind::MrmrMid => {
                    mrmr_select(&sets.train, budget, MrmrVariant::Mid, &cfg.mi_config())?
                }
                SelectorKind::MrmrMiq => {
                    mrmr_select(&sets.train, budget, MrmrVariant::Miq, &cfg.mi_config())?
                }
                SelectorKind::External => {
                    let path = cfg.external_order.as_ref().ok_or_else(|| {
                        Error::Config("external selector needs external_order".into())
                    })?;
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        Error::Config(format!("cannot read {}: {e}", path.display()))
                    })?;
                    let mut order = parse_order_file(&text, &sets.train)?;
                    order.truncate(budget);
                    order
                }
                SelectorKind::Tf => unreachable!(),
            };
            let metrics = evaluate_baseline(
                &order,
                &sets,
                focus,
                &cfg.train.with_seed(cfg.seed),
                cfg.confidence_draws,
                cfg.seed,
            )?;
            let trend = TrendSeries::from_prefix_metrics(&metrics)?;
            let order_names = order
                .iter()
                .map(|&i| sets.train.feature_names()[i].clone())
                .collect();
            (
                RunResult::Baseline {
                    order,
                    order_names,
                    metrics,
                },
                trend,
            )
        }
    };
    let artifact = RunArtifact {
        config: cfg.clone(),
        dataset_rows: dataset.rows(),
        focus_index: focus,
        feature_names: dataset.feature_names().to_vec(),
        result,
        trend,
    };
    Ok(RunOutput { artifact, sets })
}

/// Train one final model on the run's ending feature set (for `--dump-model`).
pub fn final_model(output: &RunOutput) -> Result<VariationalParams> {
    let cfg = &output.artifact.config;
    train(
        &output.sets.train,
        output.artifact.final_features(),
        &cfg.train.with_seed(cfg.seed),
    )
}

/// Write `run.json` and `trend.csv` under `out_dir`.
pub fn write_outputs(artifact: &RunArtifact, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)?;
    let json_path = out_dir.join("run.json");
    let csv_path = out_dir.join("trend.csv");
    std::fs::write(&json_path, artifact.to_json())?;
    std::fs::write(&csv_path, artifact.trend.to_csv())?;
    Ok((json_path, csv_path))
}

/// F1 per selector at fixed feature-count checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub checkpoints: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub selector: String,
    pub seed: u64,
    pub f1_at: Vec<Option<f64>>,
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<12}", "f")?;
        for row in &self.rows {
            write!(f, " {:>10}", row.selector)?;
        }
        writeln!(f)?;
        for (i, cp) in self.checkpoints.iter().enumerate() {
            write!(f, "{cp:<12}")?;
            for row in &self.rows {
                match row.f1_at[i] {
                    Some(v) => write!(f, " {v:>10.3}")?,
                    None => write!(f, " {:>10}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Build the F1 table from run artifacts of one dataset + focus target.
pub fn compare(artifacts: &[RunArtifact], checkpoints: &[usize]) -> Result<ComparisonTable> {
    let first = artifacts
        .first()
        .ok_or_else(|| Error::Config("compare needs at least one run".into()))?;
    for a in artifacts {
        if a.config.dataset != first.config.dataset
            || a.config.target_column != first.config.target_column
            || a.config.focus_label != first.config.focus_label
        {
            return Err(Error::Config(
                "compared runs must share dataset, target column and focus label".into(),
            ));
        }
    }
    let rows = artifacts
        .iter()
        .map(|a| ComparisonRow {
            selector: a.config.selector.to_string(),
            seed: a.config.seed,
            f1_at: checkpoints.iter().map(|&cp| a.trend.f1_at(cp)).collect(),
        })
        .collect();
    Ok(ComparisonTable {
        checkpoints: checkpoints.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_csv;
    use crate::rng;
    use crate::synthetic::{class_blobs, BlobSpec};

    fn write_blob_csv(dir: &Path, rows: usize, n_features: usize) -> PathBuf {
        let spec = BlobSpec {
            rows,
            n_features,
            informative: 2,
            separation: 3.0,
            noise_sd: 0.5,
            ..BlobSpec::default()
        };
        let mut r = rng::stream(1);
        let ds = class_blobs(&spec, &mut r);
        let path = dir.join("blobs.csv");
        write_csv(&ds, &path, "label", "").unwrap();
        path
    }

    fn quick_experiment(
        dataset: PathBuf,
        selector: SelectorKind,
        budget: usize,
    ) -> ExperimentConfig {
        ExperimentConfig {
            dataset,
            target_column: "label".into(),
            missing_token: String::new(),
            focus_label: "class1".into(),
            selector,
            budget,
            seed: 3,
            external_order: None,
            thresholds: None,
            weights: ValueWeights::default(),
            similarity: SimilarityMode::Absolute,
            train: TrainConfig {
                iterations: 60,
                mc_samples: 4,
                ..TrainConfig::default()
            },
            split: SplitSettings::default(),
            balance_cap: 1.0,
            confidence_draws: 25,
            mi_neighbors: 3,
            checkpoints: vec![1, 2],
        }
    }

    #[test]
    fn config_round_trips_through_toml_and_json() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = quick_experiment(PathBuf::from("x.csv"), SelectorKind::Tf, 3);
        let toml_path = tmp.path().join("cfg.toml");
        std::fs::write(&toml_path, toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::from_file(&toml_path).unwrap(), cfg);
        let json_path = tmp.path().join("cfg.json");
        std::fs::write(&json_path, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::from_file(&json_path).unwrap(), cfg);
    }

    #[test]
    fn minimal_toml_uses_defaults() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("min.toml");
        std::fs::write(
            &path,
            "dataset = \"d.csv\"\ntarget_column = \"y\"\nfocus_label = \"a\"\nselector = \"mi\"\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(cfg.budget, 5);
        assert_eq!(cfg.confidence_draws, 300);
        assert_eq!(cfg.mi_neighbors, 3);
        assert_eq!(cfg.checkpoints, vec![5, 10, 15, 20, 25]);
        assert_eq!(cfg.weights, ValueWeights::default());
        assert_eq!(cfg.train.iterations, 500);
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let data = write_blob_csv(tmp.path(), 80, 4);
        let cfg = quick_experiment(data, SelectorKind::Tf, 2);
        let a = run_experiment(&cfg).unwrap().artifact;
        let b = run_experiment(&cfg).unwrap().artifact;
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.trend.to_csv(), b.trend.to_csv());
    }

    #[test]
    fn budget_beyond_feature_count_exhausts() {
        let tmp = tempfile::tempdir().unwrap();
        let data = write_blob_csv(tmp.path(), 80, 4);
        let cfg = quick_experiment(data, SelectorKind::Tf, 10);
        let artifact = run_experiment(&cfg).unwrap().artifact;
        match &artifact.result {
            RunResult::Selection(state) => {
                assert_eq!(state.selected.len(), 4);
                assert_eq!(state.stop_reason, crate::selector::StopReason::Exhausted);
            }
            _ => panic!("expected a selection result"),
        }
        assert_eq!(artifact.trend.len(), 4);
    }

    #[test]
    fn compare_requires_matching_runs_and_reads_trends() {
        let tmp = tempfile::tempdir().unwrap();
        let data = write_blob_csv(tmp.path(), 80, 4);
        let tf = run_experiment(&quick_experiment(data.clone(), SelectorKind::Tf, 2))
            .unwrap()
            .artifact;
        let mi = run_experiment(&quick_experiment(data.clone(), SelectorKind::Mi, 2))
            .unwrap()
            .artifact;
        let table = compare(&[tf.clone(), mi.clone()], &[1, 2, 5]).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].selector, "tf");
        assert!(table.rows[0].f1_at[0].is_some());
        assert!(table.rows[0].f1_at[2].is_none()); // no row at 5 features
        let rendered = table.to_string();
        assert!(rendered.contains("tf") && rendered.contains("mi"));

        // Identical configs produce identical columns.
        let again = run_experiment(&quick_experiment(data.clone(), SelectorKind::Mi, 2))
            .unwrap()
            .artifact;
        let t2 = compare(&[mi.clone(), again], &[1, 2]).unwrap();
        assert_eq!(t2.rows[0].f1_at, t2.rows[1].f1_at);

        // Mismatched focus labels refuse to compare.
        let mut other = tf;
        other.config.focus_label = "class0".into();
        assert!(matches!(compare(&[mi, other], &[1]), Err(Error::Config(_))));
    }

    #[test]
    fn external_ordering_runs_through_the_same_evaluation() {
        let tmp = tempfile::tempdir().unwrap();
        let data = write_blob_csv(tmp.path(), 80, 4);
        let order_path = tmp.path().join("order.txt");
        std::fs::write(&order_path, "f1\nf0\n").unwrap();
        let mut cfg = quick_experiment(data, SelectorKind::External, 2);
        cfg.external_order = Some(order_path);
        let artifact = run_experiment(&cfg).unwrap().artifact;
        match &artifact.result {
            RunResult::Baseline { order, .. } => assert_eq!(order, &vec![1, 0]),
            _ => panic!("expected a baseline result"),
        }
    }

    #[test]
    fn outputs_land_in_the_requested_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let data = write_blob_csv(tmp.path(), 80, 4);
        let cfg = quick_experiment(data, SelectorKind::Mi, 2);
        let out = run_experiment(&cfg).unwrap();
        let (json_path, csv_path) = write_outputs(&out.artifact, &tmp.path().join("run1")).unwrap();
        let reread = RunArtifact::from_json(&std::fs::read_to_string(json_path).unwrap()).unwrap();
        assert_eq!(reread, out.artifact);
        let trend = TrendSeries::from_csv(&std::fs::read_to_string(csv_path).unwrap()).unwrap();
        assert_eq!(trend, out.artifact.trend);
        // A final model for dumping trains on the run's feature set.
        let model = final_model(&out).unwrap();
        assert_eq!(model.n_features, out.artifact.final_features().len());
    }

    #[test]
    fn tf_and_mi_both_solve_the_separable_fixture() {
        let tmp = tempfile::tempdir().unwrap();
        let spec = BlobSpec {
            rows: 120,
            n_features: 4,
            informative: 2,
            separation: 4.0,
            noise_sd: 0.25,
            ..BlobSpec::default()
        };
        let mut r = rng::stream(2);
        let ds = class_blobs(&spec, &mut r);
        let path = tmp.path().join("clean.csv");
        write_csv(&ds, &path, "label", "").unwrap();
        let mut cfg = quick_experiment(path, SelectorKind::Tf, 2);
        cfg.train.iterations = 200;
        let tf = run_experiment(&cfg).unwrap().artifact;
        cfg.selector = SelectorKind::Mi;
        let mi = run_experiment(&cfg).unwrap().artifact;
        assert_eq!(tf.trend.f1_at(2), Some(1.0));
        assert_eq!(mi.trend.f1_at(2), Some(1.0));
    }
}
