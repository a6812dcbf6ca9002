//! Synthetic dataset generation for tests and benchmarks.

use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, SampledSets};
use crate::rng;

/// Shape of a generated classification problem.
#[derive(Debug, Clone, Copy)]
pub struct BlobSpec {
    pub rows: usize,
    pub n_features: usize,
    /// Leading columns that separate the classes; the rest are pure noise.
    pub informative: usize,
    pub n_classes: usize,
    /// Distance of class centers from the origin along informative columns.
    pub separation: f64,
    pub noise_sd: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            rows: 60,
            n_features: 4,
            informative: 2,
            n_classes: 2,
            separation: 1.5,
            noise_sd: 0.6,
        }
    }
}

/// Round-robin targets with Gaussian class blobs. Informative column `f`
/// places class `t` at `(t − (d−1)/2) · separation · tilt(f)`; tilts make
/// earlier informative columns slightly stronger so rankings have no ties.
pub fn class_blobs(spec: &BlobSpec, rng: &mut ChaCha8Rng) -> Dataset {
    let targets: Vec<usize> = (0..spec.rows).map(|i| i % spec.n_classes).collect();
    let offset = (spec.n_classes as f64 - 1.0) / 2.0;
    let mut values = Vec::with_capacity(spec.rows * spec.n_features);
    for &t in &targets {
        for f in 0..spec.n_features {
            let v = if f < spec.informative {
                let tilt = 1.0 - 0.08 * f as f64;
                let sign = if f % 2 == 0 { 1.0 } else { -1.0 };
                sign * tilt * (t as f64 - offset) * spec.separation
                    + spec.noise_sd * rng::standard_normal(rng)
            } else {
                rng::standard_normal(rng)
            };
            values.push(v);
        }
    }
    Dataset::new(
        values,
        vec![false; spec.rows * spec.n_features],
        targets,
        (0..spec.n_features).map(|f| format!("f{f}")).collect(),
        (0..spec.n_classes).map(|c| format!("class{c}")).collect(),
    )
    .expect("generated dataset is valid")
}

/// Three independent draws of the same blob problem: a balanced train set of
/// `spec.rows`, and validation/test sets of half that size.
pub fn sampled_blob_sets(spec: &BlobSpec, seed: u64) -> SampledSets {
    let mut r = rng::stream(seed);
    let train = class_blobs(spec, &mut r);
    let half = BlobSpec {
        rows: (spec.rows / 2).max(2 * spec.n_classes),
        ..*spec
    };
    let validation = class_blobs(&half, &mut r);
    let test = class_blobs(&half, &mut r);
    SampledSets::new(train, validation, test).expect("blob sets share columns")
}

/// Mask a fraction of cells at random (never target values).
pub fn with_missingness(dataset: &Dataset, fraction: f64, seed: u64) -> Dataset {
    use rand::RngExt;
    let mut r = rng::stream(seed);
    let rows = dataset.rows();
    let cols = dataset.n_features();
    let mut values = Vec::with_capacity(rows * cols);
    let mut missing = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let hide = r.random::<f64>() < fraction;
            missing.push(hide);
            values.push(if hide { 0.0 } else { dataset.value(row, col) });
        }
    }
    Dataset::new(
        values,
        missing,
        dataset.targets().to_vec(),
        dataset.feature_names().to_vec(),
        dataset.target_names().to_vec(),
    )
    .expect("masked dataset is valid")
}
