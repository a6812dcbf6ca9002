//! Target-agnostic comparison selectors: kNN mutual-information ranking and
//! greedy minimum-redundancy / maximum-relevance selection.
//!
//! Both MI estimators work on rank-transformed marginals (mutual information
//! is invariant under strictly monotone transforms, and ranks make the
//! estimator transform-invariant by construction). Ties in raw values are
//! broken by a hash of the value bits, the row index and the config seed, so
//! estimates are deterministic and symmetric in their arguments.
//!
//! Feature-feature MI uses the classic joint k-nearest-neighbor estimator
//! with max-norm distances; feature-label MI uses the mixed variant that
//! finds the k-th nearest same-label neighbor and counts how many points of
//! any label fall inside that radius.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampledSets};
use crate::error::{Error, Result};
use crate::rng;
use crate::selector::{evaluate_on_test, TestMetrics};
use crate::vi::TrainConfig;

/// kNN MI estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiConfig {
    pub k_neighbors: usize,
    /// Seed for deterministic tie-breaking among duplicate values.
    pub seed: u64,
}

impl Default for MiConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 3,
            seed: 0,
        }
    }
}

/// Redundancy combination rule: relevance minus mean redundancy (difference)
/// or relevance over mean redundancy (quotient).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MrmrVariant {
    Mid,
    Miq,
}

const MIQ_REDUNDANCY_FLOOR: f64 = 1e-12;

/// Digamma for x ≥ 1 via upward recurrence into the asymptotic series.
fn digamma(mut x: f64) -> f64 {
    let mut value = 0.0;
    while x < 10.0 {
        value -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    value + x.ln() - 0.5 * inv - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0))
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Ranks 0..n-1 with ties broken by a value-keyed hash, so identical inputs
/// rank identically regardless of which argument slot they occupy.
fn rank_transform(values: &[f64], seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a].partial_cmp(&values[b]).unwrap().then_with(|| {
            let ha = rng::mix(seed, values[a].to_bits(), a as u64);
            let hb = rng::mix(seed, values[b].to_bits(), b as u64);
            ha.cmp(&hb)
        })
    });
    let mut ranks = vec![0usize; values.len()];
    for (rank, &idx) in order.iter().enumerate() {
        ranks[idx] = rank;
    }
    ranks
}

/// Points with an integer rank strictly closer than `radius` to `center`,
/// within 0..n-1. Ranks are a permutation, so this is an interval count.
fn count_within(center: usize, radius: usize, n: usize) -> usize {
    if radius == 0 {
        return 0;
    }
    let lo = center.saturating_sub(radius - 1);
    let hi = (center + radius - 1).min(n - 1);
    hi - lo + 1
}

/// Joint kNN MI between two continuous columns, in nats, clipped at 0.
pub fn mi_between(x: &[f64], y: &[f64], cfg: &MiConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "column lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    let k = cfg.k_neighbors;
    if k == 0 {
        return Err(Error::Config("k_neighbors must be at least 1".into()));
    }
    if n < k + 2 {
        return Err(Error::Data(format!(
            "need at least {} rows, got {n}",
            k + 2
        )));
    }
    if is_constant(x) || is_constant(y) {
        return Ok(0.0);
    }
    let rx = rank_transform(x, cfg.seed);
    let ry = rank_transform(y, cfg.seed);

    let mut distances = vec![0usize; n];
    let mut psi_sum = 0.0;
    for i in 0..n {
        let mut m = 0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = rx[i].abs_diff(rx[j]);
            let dy = ry[i].abs_diff(ry[j]);
            distances[m] = dx.max(dy);
            m += 1;
        }
        let (_, kth, _) = distances[..m].select_nth_unstable(k - 1);
        let eps = *kth;
        let nx = count_within(rx[i], eps, n);
        let ny = count_within(ry[i], eps, n);
        psi_sum += digamma((nx + 1) as f64) + digamma((ny + 1) as f64);
    }
    let mi = digamma(k as f64) + digamma(n as f64) - psi_sum / n as f64;
    Ok(mi.max(0.0))
}

/// Mixed-variant kNN MI between a continuous column and discrete labels,
/// in nats, clipped at 0.
pub fn mi_with_labels(x: &[f64], labels: &[usize], cfg: &MiConfig) -> Result<f64> {
    if x.len() != labels.len() {
        return Err(Error::Contract(format!(
            "column lengths differ: {} vs {}",
            x.len(),
            labels.len()
        )));
    }
    let n = x.len();
    let k = cfg.k_neighbors;
    if k == 0 {
        return Err(Error::Config("k_neighbors must be at least 1".into()));
    }
    if n < k + 2 {
        return Err(Error::Data(format!(
            "need at least {} rows, got {n}",
            k + 2
        )));
    }
    if is_constant(x) {
        return Ok(0.0);
    }
    let n_labels = labels.iter().max().map_or(0, |&m| m + 1);
    let mut class_counts = vec![0usize; n_labels];
    for &l in labels {
        class_counts[l] += 1;
    }
    if class_counts.iter().filter(|&&c| c > 0).count() <= 1 {
        return Ok(0.0);
    }

    let rx = rank_transform(x, cfg.seed);
    // Rank positions of each class, sorted, for 1-D same-label neighbor search.
    let mut class_ranks: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (i, &l) in labels.iter().enumerate() {
        class_ranks[l].push(rx[i]);
    }
    for ranks in &mut class_ranks {
        ranks.sort_unstable();
    }

    let mut evaluated = 0usize;
    let mut psi_m = 0.0;
    let mut psi_class = 0.0;
    let mut psi_k = 0.0;
    for i in 0..n {
        let class = labels[i];
        let count = class_counts[class];
        if count < 2 {
            continue; // singleton classes carry no neighbor information
        }
        let ki = k.min(count - 1);
        let ranks = &class_ranks[class];
        let pos = ranks.binary_search(&rx[i]).expect("own rank is present");
        // k-th nearest same-label neighbor in 1-D: widen the window.
        let mut left = pos;
        let mut right = pos;
        let mut dist = 0usize;
        for _ in 0..ki {
            let left_gap = if left > 0 {
                ranks[pos].abs_diff(ranks[left - 1])
            } else {
                usize::MAX
            };
            let right_gap = if right + 1 < ranks.len() {
                ranks[pos].abs_diff(ranks[right + 1])
            } else {
                usize::MAX
            };
            if left_gap <= right_gap {
                left -= 1;
                dist = left_gap;
            } else {
                right += 1;
                dist = right_gap;
            }
        }
        // All points (any label, self included) strictly inside the radius.
        let m = count_within(rx[i], dist, n);
        evaluated += 1;
        psi_m += digamma(m as f64);
        psi_class += digamma(count as f64);
        psi_k += digamma(ki as f64);
    }
    if evaluated == 0 {
        return Ok(0.0);
    }
    let inv = 1.0 / evaluated as f64;
    let mi = digamma(evaluated as f64) + psi_k * inv - psi_class * inv - psi_m * inv;
    Ok(mi.max(0.0))
}

/// Features ranked by descending MI against the target; ties go to the lower
/// index. Returns the top `budget`.
pub fn mi_rank(data: &Dataset, budget: usize, cfg: &MiConfig) -> Result<Vec<usize>> {
    if budget > data.n_features() {
        return Err(Error::Config(format!(
            "budget {budget} exceeds {} features",
            data.n_features()
        )));
    }
    let relevance = relevance_scores(data, cfg)?;
    let mut order: Vec<usize> = (0..data.n_features()).collect();
    order.sort_by(|&a, &b| {
        relevance[b]
            .partial_cmp(&relevance[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(budget);
    Ok(order)
}

fn relevance_scores(data: &Dataset, cfg: &MiConfig) -> Result<Vec<f64>> {
    (0..data.n_features())
        .map(|f| mi_with_labels(&data.column(f), data.targets(), cfg))
        .collect()
}

/// Greedy mRMR selection.
pub fn mrmr_select(
    data: &Dataset,
    budget: usize,
    variant: MrmrVariant,
    cfg: &MiConfig,
) -> Result<Vec<usize>> {
    mrmr_select_weighted(data, budget, variant, cfg, 1.0)
}

/// Greedy mRMR with a scalable redundancy weight; weight 0 degenerates to
/// pure relevance ranking.
pub fn mrmr_select_weighted(
    data: &Dataset,
    budget: usize,
    variant: MrmrVariant,
    cfg: &MiConfig,
    redundancy_weight: f64,
) -> Result<Vec<usize>> {
    if budget > data.n_features() {
        return Err(Error::Config(format!(
            "budget {budget} exceeds {} features",
            data.n_features()
        )));
    }
    let c = data.n_features();
    let relevance = relevance_scores(data, cfg)?;
    let columns: Vec<Vec<f64>> = (0..c).map(|f| data.column(f)).collect();

    let mut selected: Vec<usize> = Vec::with_capacity(budget);
    let mut remaining: Vec<usize> = (0..c).collect();
    let mut redundancy_sum = vec![0.0f64; c];
    while selected.len() < budget {
        let score = |f: usize| -> f64 {
            if selected.is_empty() {
                return relevance[f];
            }
            let mean_red = redundancy_weight * redundancy_sum[f] / selected.len() as f64;
            match variant {
                MrmrVariant::Mid => relevance[f] - mean_red,
                MrmrVariant::Miq => relevance[f] / mean_red.max(MIQ_REDUNDANCY_FLOOR),
            }
        };
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (slot, &f) in remaining.iter().enumerate() {
            let s = score(f);
            if s > best_score {
                best_score = s;
                best = slot;
            }
        }
        let chosen = remaining.remove(best);
        selected.push(chosen);
        for &f in &remaining {
            redundancy_sum[f] += mi_between(&columns[f], &columns[chosen], cfg)?;
        }
    }
    Ok(selected)
}

/// Evaluate a fixed feature ordering prefix by prefix with the same
/// evaluation model and metrics the selection loop uses, so trends are
/// directly comparable.
pub fn evaluate_baseline(
    order: &[usize],
    sets: &SampledSets,
    theta: usize,
    train_cfg: &TrainConfig,
    confidence_draws: usize,
    seed: u64,
) -> Result<Vec<TestMetrics>> {
    if order.is_empty() {
        return Err(Error::Contract("feature order is empty".into()));
    }
    let mut trend = Vec::with_capacity(order.len());
    for prefix in 1..=order.len() {
        let metrics = evaluate_on_test(
            &order[..prefix],
            sets,
            theta,
            &train_cfg.with_seed(rng::mix(
                seed,
                prefix as u64,
                crate::selector::STREAM_EVAL_TRAIN,
            )),
            confidence_draws,
            rng::mix(seed, prefix as u64, crate::selector::STREAM_EVAL_CONFIDENCE),
        )?;
        trend.push(metrics);
    }
    Ok(trend)
}

/// Parse an externally supplied ordering: one feature name per line, mapped
/// against the dataset's feature names.
pub fn parse_order_file(text: &str, data: &Dataset) -> Result<Vec<usize>> {
    let mut order = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let name = line.trim();
        if name.is_empty() {
            continue;
        }
        let idx = data
            .feature_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::Config(format!("unknown feature {name:?} at line {}", line_no + 1))
            })?;
        if order.contains(&idx) {
            return Err(Error::Config(format!("duplicate feature {name:?}")));
        }
        order.push(idx);
    }
    if order.is_empty() {
        return Err(Error::Config("external ordering file is empty".into()));
    }
    Ok(order)
}
