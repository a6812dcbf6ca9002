//! Dataset ingestion, missing-value handling, splitting and sampling.
//!
//! A [`Dataset`] is a dense row-major feature matrix with a missingness mask
//! and integer class labels. The sampling protocol used by the selection
//! benchmarks is: stratified test split, train-column-mean imputation,
//! a class-balanced training sample, a distribution-faithful validation
//! sample, then standardization with the balanced-train statistics.

use rand::seq::SliceRandom;
use rand::RngExt;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;

/// Dense dataset: r rows, c feature columns, integer targets in `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: Vec<f64>,
    missing: Vec<bool>,
    targets: Vec<usize>,
    feature_names: Vec<String>,
    target_names: Vec<String>,
}

impl Dataset {
    /// Build a dataset and validate its invariants: matching shapes, every
    /// label below the class count with every class present, unique feature
    /// names.
    pub fn new(
        values: Vec<f64>,
        missing: Vec<bool>,
        targets: Vec<usize>,
        feature_names: Vec<String>,
        target_names: Vec<String>,
    ) -> Result<Self> {
        let rows = targets.len();
        let cols = feature_names.len();
        if values.len() != rows * cols || missing.len() != rows * cols {
            return Err(Error::Contract(format!(
                "matrix shape mismatch: {} values, {} mask entries, expected {}",
                values.len(),
                missing.len(),
                rows * cols
            )));
        }
        let d = target_names.len();
        if d == 0 {
            return Err(Error::Data("dataset has no classes".into()));
        }
        let mut seen = vec![false; d];
        for &t in &targets {
            if t >= d {
                return Err(Error::Data(format!("target label {t} out of range 0..{d}")));
            }
            seen[t] = true;
        }
        if let Some(miss) = seen.iter().position(|s| !s) {
            return Err(Error::Data(format!(
                "class {:?} has no rows",
                target_names[miss]
            )));
        }
        for (i, a) in feature_names.iter().enumerate() {
            for b in feature_names.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::Data(format!("duplicate feature name {a:?}")));
                }
            }
        }
        Ok(Self {
            values,
            missing,
            targets,
            feature_names,
            target_names,
        })
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.target_names.len()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_features() + col]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.n_features() + col]
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_names(&self) -> &[String] {
        &self.target_names
    }

    /// Copy of one feature column.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.value(r, col)).collect()
    }

    /// Rows per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for &t in &self.targets {
            counts[t] += 1;
        }
        counts
    }

    /// Encoded label for a class name, if present.
    pub fn label_of(&self, name: &str) -> Option<usize> {
        self.target_names.iter().position(|n| n == name)
    }

    /// New dataset holding the given rows (in order, duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let c = self.n_features();
        let mut values = Vec::with_capacity(rows.len() * c);
        let mut missing = Vec::with_capacity(rows.len() * c);
        let mut targets = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.rows() {
                return Err(Error::Contract(format!("row index {r} out of bounds")));
            }
            values.extend_from_slice(&self.values[r * c..(r + 1) * c]);
            missing.extend_from_slice(&self.missing[r * c..(r + 1) * c]);
            targets.push(self.targets[r]);
        }
        Dataset::new(
            values,
            missing,
            targets,
            self.feature_names.clone(),
            self.target_names.clone(),
        )
    }
}

/// Fractions of the whole dataset reserved for training and testing; the
/// remainder is the validation share drawn from the train pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, test_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && test_fraction > 0.0) {
            return Err(Error::Config("split fractions must be positive".into()));
        }
        if train_fraction + test_fraction >= 1.0 {
            return Err(Error::Config(
                "train + test fractions must leave a validation remainder below 1".into(),
            ));
        }
        Ok(Self {
            train_fraction,
            test_fraction,
            seed,
        })
    }

    /// Fraction of the whole dataset left for validation sampling.
    pub fn validation_fraction(&self) -> f64 {
        1.0 - self.train_fraction - self.test_fraction
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// The three working sets: balanced train, faithful validation, held-out test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledSets {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl SampledSets {
    pub fn new(train: Dataset, validation: Dataset, test: Dataset) -> Result<Self> {
        if train.feature_names() != validation.feature_names()
            || train.feature_names() != test.feature_names()
        {
            return Err(Error::Contract(
                "train/validation/test feature columns differ".into(),
            ));
        }
        let counts = train.class_counts();
        let (min, max) = (
            counts.iter().min().copied().unwrap_or(0),
            counts.iter().max().copied().unwrap_or(0),
        );
        if max > min + 1 {
            return Err(Error::Contract(format!(
                "train set is not balanced: class counts {counts:?}"
            )));
        }
        Ok(Self {
            train,
            validation,
            test,
        })
    }
}

/// Load a CSV with a header row into a [`Dataset`].
///
/// Cells equal to `missing_token` (or empty) are masked as absent. Target
/// labels are the sorted distinct values of `target_column`, re-encoded
/// `0..d-1`.
pub fn load_csv(path: &Path, target_column: &str, missing_token: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header of {}: {e}", path.display())))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| {
            Error::Config(format!(
                "target column {target_column:?} not found in {}",
                path.display()
            ))
        })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut raw_targets: Vec<String> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1; // 1-based data row for error messages
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            if i == target_idx {
                if cell.is_empty() || cell == missing_token {
                    return Err(Error::Data(format!("missing target value at row {row}")));
                }
                raw_targets.push(cell.to_string());
            } else if cell.is_empty() || cell == missing_token {
                values.push(0.0);
                missing.push(true);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    message: format!("cannot parse {cell:?} as a number"),
                })?;
                values.push(v);
                missing.push(false);
            }
        }
    }
    if raw_targets.is_empty() {
        return Err(Error::Data(format!(
            "{} contains no data rows",
            path.display()
        )));
    }

    let mut target_names: Vec<String> = raw_targets.clone();
    target_names.sort();
    target_names.dedup();
    let targets: Vec<usize> = raw_targets
        .iter()
        .map(|t| target_names.iter().position(|n| n == t).unwrap())
        .collect();

    Dataset::new(values, missing, targets, feature_names, target_names)
}

/// Write a dataset back to CSV, the inverse of [`load_csv`] up to formatting.
/// Masked cells are written as `missing_token`.
pub fn write_csv(
    dataset: &Dataset,
    path: &Path,
    target_column: &str,
    missing_token: &str,
) -> Result<()> {
    let mut out = String::new();
    for name in dataset.feature_names() {
        let _ = write!(out, "{name},");
    }
    let _ = writeln!(out, "{target_column}");
    for r in 0..dataset.rows() {
        for c in 0..dataset.n_features() {
            if dataset.is_missing(r, c) {
                let _ = write!(out, "{missing_token},");
            } else {
                let _ = write!(out, "{},", dataset.value(r, c));
            }
        }
        let _ = writeln!(out, "{}", dataset.target_names()[dataset.targets()[r]]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Replace every masked cell with the mean of the observed train cells in
/// that column; masks are cleared in all outputs.
pub fn impute_train_means(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>)> {
    let c = train.n_features();
    let mut means = vec![0.0f64; c];
    for (col, mean) in means.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for row in 0..train.rows() {
            if !train.is_missing(row, col) {
                sum += train.value(row, col);
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Data(format!(
                "column {:?} has no observed values in the train split",
                train.feature_names()[col]
            )));
        }
        *mean = sum / n as f64;
    }

    let fill = |set: &Dataset| -> Result<Dataset> {
        let mut values = Vec::with_capacity(set.rows() * c);
        for row in 0..set.rows() {
            for (col, &mean) in means.iter().enumerate() {
                values.push(if set.is_missing(row, col) {
                    mean
                } else {
                    set.value(row, col)
                });
            }
        }
        Dataset::new(
            values,
            vec![false; set.rows() * c],
            set.targets().to_vec(),
            set.feature_names().to_vec(),
            set.target_names().to_vec(),
        )
    };

    let train_out = fill(train)?;
    let others_out: Result<Vec<Dataset>> = others.iter().map(|s| fill(s)).collect();
    Ok((train_out, others_out?))
}

/// Stratified split into (train pool, test). The test set takes
/// `spec.test_fraction` of each class (rounded, within one row); the pool
/// keeps the rest. Deterministic for a fixed seed.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if dataset.rows() == 0 {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let counts = dataset.class_counts();
    if let Some(small) = counts.iter().position(|&n| n < 2) {
        return Err(Error::Data(format!(
            "class {:?} has fewer than 2 rows",
            dataset.target_names()[small]
        )));
    }

    let mut rng = rng::stream(spec.seed);
    let mut test_rows = Vec::new();
    let mut pool_rows = Vec::new();
    for class in 0..dataset.n_classes() {
        let mut rows: Vec<usize> = (0..dataset.rows())
            .filter(|&r| dataset.targets()[r] == class)
            .collect();
        rows.shuffle(&mut rng);
        let mut n_test = (spec.test_fraction * rows.len() as f64).round() as usize;
        n_test = n_test.clamp(1, rows.len() - 1); // both sides keep every class
        test_rows.extend_from_slice(&rows[..n_test]);
        pool_rows.extend_from_slice(&rows[n_test..]);
    }
    test_rows.sort_unstable();
    pool_rows.sort_unstable();
    Ok((
        dataset.select_rows(&pool_rows)?,
        dataset.select_rows(&test_rows)?,
    ))
}

/// Draw exactly `per_class` rows of every class; classes with too few rows
/// are sampled with replacement.
pub fn sample_balanced(pool: &Dataset, per_class: usize, seed: u64) -> Result<Dataset> {
    if per_class == 0 {
        return Err(Error::Contract("per_class must be at least 1".into()));
    }
    let counts = pool.class_counts();
    if let Some(absent) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!(
            "class {:?} absent from pool",
            pool.target_names()[absent]
        )));
    }
    let mut rng = rng::stream(seed);
    let mut chosen = Vec::with_capacity(per_class * pool.n_classes());
    for class in 0..pool.n_classes() {
        let mut rows: Vec<usize> = (0..pool.rows())
            .filter(|&r| pool.targets()[r] == class)
            .collect();
        if rows.len() >= per_class {
            rows.shuffle(&mut rng);
            chosen.extend_from_slice(&rows[..per_class]);
        } else {
            for _ in 0..per_class {
                chosen.push(rows[rng.random_range(0..rows.len())]);
            }
        }
    }
    pool.select_rows(&chosen)
}

/// Stratified sample of `n` rows whose class proportions match the pool's
/// within one row per class (largest-remainder apportionment, every class
/// represented at least once).
pub fn sample_faithful(pool: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n > pool.rows() {
        return Err(Error::Data(format!(
            "requested {n} rows from a pool of {}",
            pool.rows()
        )));
    }
    if n < pool.n_classes() {
        return Err(Error::Data(format!(
            "cannot represent {} classes in {n} rows",
            pool.n_classes()
        )));
    }
    let counts = pool.class_counts();
    let total = pool.rows() as f64;

    // Largest-remainder apportionment of n over class shares.
    let shares: Vec<f64> = counts
        .iter()
        .map(|&c| n as f64 * c as f64 / total)
        .collect();
    let mut take: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut leftover = n - take.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..take.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - take[a] as f64;
        let rb = shares[b] - take[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &class in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        if take[class] < counts[class] {
            take[class] += 1;
            leftover -= 1;
        }
    }
    // Every class appears at least once; steal from the largest allocation.
    for class in 0..take.len() {
        while take[class] == 0 {
            let donor = (0..take.len()).max_by_key(|&i| take[i]).unwrap();
            take[donor] -= 1;
            take[class] += 1;
        }
    }

    let mut rng = rng::stream(seed);
    let mut chosen = Vec::with_capacity(n);
    for class in 0..pool.n_classes() {
        let mut rows: Vec<usize> = (0..pool.rows())
            .filter(|&r| pool.targets()[r] == class)
            .collect();
        rows.shuffle(&mut rng);
        chosen.extend_from_slice(&rows[..take[class]]);
    }
    pool.select_rows(&chosen)
}

/// Per-feature location/scale used by [`standardize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    /// Scale actually applied; 1.0 for zero-variance columns.
    pub sd: f64,
}

/// Shift/scale every feature column to train mean 0 and standard deviation 1
/// (population sd). Zero-variance columns are shifted only. The same stats
/// are applied to each of `others`.
pub fn standardize(
    train: &Dataset,
    others: &[&Dataset],
) -> Result<(Dataset, Vec<Dataset>, Vec<FeatureStats>)> {
    if train.has_missing() {
        return Err(Error::Contract(
            "standardize requires imputation to have been applied".into(),
        ));
    }
    let c = train.n_features();
    let r = train.rows() as f64;
    let mut stats = Vec::with_capacity(c);
    for col in 0..c {
        let mean = (0..train.rows())
            .map(|row| train.value(row, col))
            .sum::<f64>()
            / r;
        let var = (0..train.rows())
            .map(|row| {
                let d = train.value(row, col) - mean;
                d * d
            })
            .sum::<f64>()
            / r;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        stats.push(FeatureStats { mean, sd });
    }
    let apply = |set: &Dataset| -> Result<Dataset> {
        let mut values = Vec::with_capacity(set.rows() * c);
        for row in 0..set.rows() {
            for (col, st) in stats.iter().enumerate() {
                values.push((set.value(row, col) - st.mean) / st.sd);
            }
        }
        Dataset::new(
            values,
            vec![false; set.rows() * c],
            set.targets().to_vec(),
            set.feature_names().to_vec(),
            set.target_names().to_vec(),
        )
    };
    let train_out = apply(train)?;
    let others_out: Result<Vec<Dataset>> = others.iter().map(|s| apply(s)).collect();
    Ok((train_out, others_out?, stats))
}

/// Knobs for [`prepare_sets`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub split: SplitSpec,
    /// Balanced per-class count = floor(min class count in pool × this cap).
    pub balance_cap: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            split: SplitSpec::default(),
            balance_cap: 1.0,
        }
    }
}

/// Full pipeline from a raw dataset to model-ready sets:
/// split → impute with pool means → balanced train + faithful validation
/// drawn from the pool → standardize with balanced-train statistics.
pub fn prepare_sets(dataset: &Dataset, cfg: &SamplingConfig) -> Result<SampledSets> {
    let (pool, test) = split(dataset, &cfg.split)?;
    let (pool, mut others) = impute_train_means(&pool, &[&test])?;
    let test = others.pop().unwrap();

    let min_class = pool.class_counts().into_iter().min().unwrap();
    let per_class = ((min_class as f64 * cfg.balance_cap).floor() as usize).max(1);
    let seed = cfg.split.seed;
    let train = sample_balanced(&pool, per_class, rng::mix(seed, 0xBA1A, 0))?;

    let val_share = cfg.split.validation_fraction();
    let n_val =
        ((dataset.rows() as f64 * val_share).round() as usize).clamp(pool.n_classes(), pool.rows());
    let validation = sample_faithful(&pool, n_val, rng::mix(seed, 0xFA17, 0))?;

    let (train, mut rest, _) = standardize(&train, &[&validation, &test])?;
    let test = rest.pop().unwrap();
    let validation = rest.pop().unwrap();
    SampledSets::new(train, validation, test)
}
