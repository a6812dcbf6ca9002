//! Acceptance suite: every release gate runs here at its pinned tolerance and
//! prints one PASS/FAIL line. Run with:
//!
//! ```bash
//! cargo test -p tffs --test acceptance -- --nocapture
//! ```

use std::path::PathBuf;

use rand::RngExt;

use tffs::baselines::{mi_between, mrmr_select, MiConfig, MrmrVariant};
use tffs::data::write_csv;
use tffs::harness::{run_experiment, ExperimentConfig, RunResult, SelectorKind, SplitSettings};
use tffs::rng;
use tffs::scoring::{confidence, SimilarityMode, ValueWeights};
use tffs::selector::{run_selection, SelectionConfig, StopReason, Thresholds};
use tffs::synthetic::{class_blobs, sampled_blob_sets, BlobSpec};
use tffs::vi::{elbo, elbo_gradient, train, NoiseBank, TrainConfig, VariationalParams};

fn report(number: u32, name: &str, pass: bool, detail: &str) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPT {number:02} {name}: {verdict} ({detail})");
    pass
}

fn warn(number: u32, name: &str, detail: &str) {
    println!("ACCEPT {number:02} {name}: WARN ({detail})");
}

fn manifest_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

/// Criterion 1: the pathwise gradient matches central finite differences of
/// the ELBO under the same fixed noise; max relative error < 1e-4 with an
/// absolute floor of 1e-6.
#[test]
fn criterion_01_gradient_correctness() {
    const REL_TOL: f64 = 1e-4;
    const ABS_FLOOR: f64 = 1e-6;

    let mut r = rng::stream(41);
    let spec = BlobSpec {
        rows: 20,
        n_features: 3,
        informative: 2,
        n_classes: 2,
        separation: 1.0,
        noise_sd: 0.8,
    };
    let data = class_blobs(&spec, &mut r);
    let subset = vec![0, 1, 2];
    let cfg = TrainConfig::default();

    let mut params = VariationalParams::init(3, 2);
    for (i, v) in params.w_mean.iter_mut().enumerate() {
        *v = 0.25 * (i as f64 - 3.0);
    }
    for (i, v) in params.w_log_sd.iter_mut().enumerate() {
        *v = -1.2 + 0.15 * i as f64;
    }
    params.b_mean = vec![0.3, -0.5];
    params.b_log_sd = vec![-0.8, -1.4];
    let noise = NoiseBank::standard(4, 3, 2, &mut r);
    let grad = elbo_gradient(&params, &data, &subset, &cfg, &noise).unwrap();

    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = |set: &dyn Fn(&mut VariationalParams, f64), base: f64, analytic: f64| {
        let mut plus = params.clone();
        set(&mut plus, base + h);
        let mut minus = params.clone();
        set(&mut minus, base - h);
        let fd = (elbo(&plus, &data, &subset, &cfg, &noise).unwrap()
            - elbo(&minus, &data, &subset, &cfg, &noise).unwrap())
            / (2.0 * h);
        let err = (fd - analytic).abs() / fd.abs().max(ABS_FLOOR);
        if err > worst {
            worst = err;
        }
    };
    for idx in 0..6 {
        let base = params.w_mean[idx];
        probe(&move |p, v| p.w_mean[idx] = v, base, grad.w_mean[idx]);
        let base = params.w_log_sd[idx];
        probe(&move |p, v| p.w_log_sd[idx] = v, base, grad.w_log_sd[idx]);
    }
    for k in 0..2 {
        let base = params.b_mean[k];
        probe(&move |p, v| p.b_mean[k] = v, base, grad.b_mean[k]);
        let base = params.b_log_sd[k];
        probe(&move |p, v| p.b_log_sd[k] = v, base, grad.b_log_sd[k]);
    }
    let pass = worst < REL_TOL;
    assert!(
        report(
            1,
            "gradient_correctness",
            pass,
            &format!("max relative error {worst:.2e} < {REL_TOL:.0e}")
        ),
        "finite-difference mismatch"
    );
}

/// Criterion 2: on a one-feature conjugate Gaussian fixture, the trained
/// variational posterior matches the closed-form posterior within 5% after
/// 2000 iterations.
#[test]
fn criterion_02_conjugate_oracle() {
    const TOL: f64 = 0.05;
    const ITERATIONS: usize = 2000;

    // Zero-mean feature column, classes split by sign: the exact posterior
    // is independent per parameter, so the mean-field family contains it.
    let rows = 20;
    let half = rows / 2;
    let x: Vec<f64> = (0..rows)
        .map(|i| {
            let v = 0.5 + (i % half) as f64 * 0.1;
            if i < half {
                v
            } else {
                -v
            }
        })
        .collect();
    let targets: Vec<usize> = (0..rows).map(|i| usize::from(i >= half)).collect();
    let values: Vec<f64> = x.clone();
    let data = tffs::data::Dataset::new(
        values,
        vec![false; rows],
        targets.clone(),
        vec!["x".into()],
        vec!["neg".into(), "pos".into()],
    )
    .unwrap();

    let cfg = TrainConfig {
        iterations: ITERATIONS,
        learning_rate: 0.015,
        mc_samples: 32,
        ..TrainConfig::default()
    };
    let fitted = train(&data, &[0], &cfg).unwrap();

    // Closed-form posterior: var_w = 1/(1 + xᵀx/σ²), mean_w thrown onto each
    // one-hot output column; likewise for the bias with xᵀx replaced by r.
    let xtx: f64 = x.iter().map(|v| v * v).sum();
    let var_w = 1.0 / (1.0 + xtx);
    let var_b = 1.0 / (1.0 + rows as f64);
    let mut mean_w = [0.0; 2];
    let mut mean_b = [0.0; 2];
    for (n, &t) in targets.iter().enumerate() {
        mean_w[t] += x[n];
        mean_b[t] += 1.0;
    }
    for k in 0..2 {
        mean_w[k] *= var_w;
        mean_b[k] *= var_b;
    }

    let mut worst = 0.0f64;
    let mut check = |got: f64, want: f64| {
        let err = (got - want).abs() / want.abs();
        if err > worst {
            worst = err;
        }
    };
    for k in 0..2 {
        check(fitted.w_mean[k], mean_w[k]);
        check(fitted.w_log_sd[k].exp(), var_w.sqrt());
        check(fitted.b_mean[k], mean_b[k]);
        check(fitted.b_log_sd[k].exp(), var_b.sqrt());
    }
    let pass = worst < TOL;
    assert!(
        report(
            2,
            "conjugate_oracle",
            pass,
            &format!(
                "max relative error {:.1}% after {ITERATIONS} iterations",
                worst * 100.0
            )
        ),
        "posterior mismatch"
    );
}

/// Criterion 3: the confidence report's mean equals the mean of its returned
/// per-sample precisions exactly, and confidence stays in [0, 1], across
/// 1000 randomized fixtures.
#[test]
fn criterion_03_confidence_semantics() {
    let mut r = rng::stream(43);
    let mut checked = 0usize;
    for fixture in 0..1000u64 {
        let rows = 6 + (fixture % 10) as usize;
        let c = 1 + (fixture % 3) as usize;
        let d = 2 + (fixture % 2) as usize;
        let targets: Vec<usize> = (0..rows).map(|i| i % d).collect();
        let columns: Vec<Vec<f64>> = (0..c)
            .map(|_| (0..rows).map(|_| rng::standard_normal(&mut r)).collect())
            .collect();
        let mut values = Vec::with_capacity(rows * c);
        for row in 0..rows {
            for col in &columns {
                values.push(col[row]);
            }
        }
        let data = tffs::data::Dataset::new(
            values,
            vec![false; rows * c],
            targets,
            (0..c).map(|i| format!("f{i}")).collect(),
            (0..d).map(|i| format!("c{i}")).collect(),
        )
        .unwrap();

        let mut params = VariationalParams::init(c, d);
        for v in params.w_mean.iter_mut().chain(params.b_mean.iter_mut()) {
            *v = rng::standard_normal(&mut r);
        }
        for v in params.w_log_sd.iter_mut().chain(params.b_log_sd.iter_mut()) {
            *v = -2.0 + 1.5 * r.random::<f64>();
        }
        let subset: Vec<usize> = (0..c).collect();
        let l = 3 + (fixture % 7) as usize;
        let theta = (fixture % d as u64) as usize;
        let rep = confidence(&params, &data, &subset, theta, l, fixture).unwrap();

        let recomputed = rep.per_sample_precisions.iter().sum::<f64>() / l as f64;
        assert_eq!(
            rep.confidence, recomputed,
            "fixture {fixture}: mean drifted"
        );
        assert!((0.0..=1.0).contains(&rep.confidence), "fixture {fixture}");
        assert!(
            rep.variance >= 0.0 && rep.variance <= 0.25,
            "fixture {fixture}"
        );
        checked += 1;
    }
    assert!(
        report(
            3,
            "confidence_semantics",
            checked == 1000,
            &format!("{checked}/1000 randomized fixtures exact and in range")
        ),
        "confidence semantics violated"
    );
}

/// Criterion 4: with thresholds disabled and N = β = 10, the run performs
/// exactly 10+9+...+1 = 55 candidate trainings.
#[test]
fn criterion_04_complexity_law() {
    let sets = sampled_blob_sets(
        &BlobSpec {
            rows: 200,
            n_features: 10,
            informative: 3,
            n_classes: 2,
            separation: 2.0,
            noise_sd: 0.8,
        },
        44,
    );
    let cfg = SelectionConfig {
        thresholds: Thresholds::budget_only(10),
        weights: ValueWeights::default(),
        similarity: SimilarityMode::Absolute,
        train: TrainConfig {
            iterations: 100,
            ..TrainConfig::default()
        },
        confidence_draws: 50,
        seed: 44,
    };
    let state = run_selection(&sets, 1, &cfg).unwrap();
    let pass = state.candidate_trainings == 55
        && state.selected.len() == 10
        && state.stop_reason == StopReason::Budget;
    assert!(
        report(
            4,
            "complexity_law",
            pass,
            &format!(
                "candidate trainings {} (expected 55), stop {:?}",
                state.candidate_trainings, state.stop_reason
            )
        ),
        "training count law violated"
    );
}

fn breast_cancer_config(selector: SelectorKind) -> ExperimentConfig {
    ExperimentConfig {
        dataset: manifest_path("tests/data/breast_cancer.csv"),
        target_column: "diagnosis".into(),
        missing_token: String::new(),
        focus_label: "Malignant".into(),
        selector,
        budget: 5,
        seed: 0,
        external_order: None,
        thresholds: None,
        weights: ValueWeights::default(),
        similarity: SimilarityMode::Absolute,
        train: TrainConfig::default(),
        split: SplitSettings::default(),
        balance_cap: 1.0,
        confidence_draws: 300,
        mi_neighbors: 3,
        checkpoints: vec![5],
    }
}

/// Criterion 5: the full target-focused pipeline on the Wisconsin breast
/// cancer data reaches F1 ≥ 0.88 for the malignant class at 5 features.
///
/// F1 on the ~113-row test split carries ±0.03 of seed noise (the split, the
/// balanced resample and the optimizer all move it), so the gate is the
/// median over three fixed seeds rather than a single draw.
#[test]
fn criterion_05_breast_cancer_reproduction() {
    const F1_FLOOR: f64 = 0.88;
    const SEEDS: [u64; 3] = [0, 1, 2];

    let mut scores = Vec::new();
    let mut details = Vec::new();
    for seed in SEEDS {
        let mut cfg = breast_cancer_config(SelectorKind::Tf);
        cfg.seed = seed;
        let artifact = run_experiment(&cfg).unwrap().artifact;
        let f1 = artifact.trend.f1_at(5).expect("trend has a 5-feature row");
        let names = match &artifact.result {
            RunResult::Selection(state) => state.selected_names.join(", "),
            _ => unreachable!(),
        };
        details.push(format!("seed {seed}: F1 {f1:.3} [{names}]"));
        scores.push(f1);
    }
    scores.sort_by(f64::total_cmp);
    let median = scores[scores.len() / 2];
    let pass = median >= F1_FLOOR;
    assert!(
        report(
            5,
            "breast_cancer_reproduction",
            pass,
            &format!(
                "median malignant F1 {median:.3} at 5 features; {}",
                details.join("; ")
            )
        ),
        "breast cancer median F1 below {F1_FLOOR}"
    );
}

/// Criterion 6 (soft, warn-not-fail): on Satlog with focus "damp grey soil",
/// target-focused selection at 5 features should beat the in-repo MI
/// baseline and reach F1 ≥ 0.70. The dataset is not redistributable inside
/// this repository; provide it via TFFS_SATLOG_CSV (see README) to run the
/// check. Absent or failing, this prints WARN and does not fail the suite.
#[test]
fn criterion_06_satlog_directional() {
    let path = std::env::var("TFFS_SATLOG_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|_| manifest_path("tests/data/satlog.csv"));
    if !path.exists() {
        warn(
            6,
            "satlog_directional",
            "soft criterion skipped: satlog CSV not present (set TFFS_SATLOG_CSV)",
        );
        return;
    }
    let target = std::env::var("TFFS_SATLOG_TARGET").unwrap_or_else(|_| "label".into());
    let focus = std::env::var("TFFS_SATLOG_FOCUS").unwrap_or_else(|_| "4".into());
    let mut cfg = breast_cancer_config(SelectorKind::Tf);
    cfg.dataset = path;
    cfg.target_column = target;
    cfg.focus_label = focus;
    let tf = run_experiment(&cfg).unwrap().artifact;
    cfg.selector = SelectorKind::Mi;
    let mi = run_experiment(&cfg).unwrap().artifact;
    let tf_f1 = tf.trend.f1_at(5).unwrap_or(0.0);
    let mi_f1 = mi.trend.f1_at(5).unwrap_or(0.0);
    let detail = format!("TF F1 {tf_f1:.3} vs MI F1 {mi_f1:.3} at 5 features");
    if tf_f1 > mi_f1 && tf_f1 >= 0.70 {
        report(6, "satlog_directional", true, &detail);
    } else {
        warn(6, "satlog_directional", &detail);
    }
}

/// Criterion 7: the kNN MI estimator lands within 0.1 nats of the closed
/// form for a ρ = 0.9 bivariate Gaussian (n = 5000, k = 3) and within 0.05
/// nats of zero for an independent pair.
#[test]
fn criterion_07_mi_estimator_accuracy() {
    let cfg = MiConfig {
        k_neighbors: 3,
        seed: 0,
    };
    let mut r = rng::stream(47);
    let n = 5000;
    let rho = 0.9f64;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut x_ind = Vec::with_capacity(n);
    let mut y_ind = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng::standard_normal(&mut r);
        let b = rng::standard_normal(&mut r);
        x.push(a);
        y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
        x_ind.push(rng::standard_normal(&mut r));
        y_ind.push(rng::standard_normal(&mut r));
    }
    let closed_form = -0.5 * (1.0 - rho * rho).ln();
    let correlated = mi_between(&x, &y, &cfg).unwrap();
    let independent = mi_between(&x_ind[..2000], &y_ind[..2000], &cfg).unwrap();
    let corr_err = (correlated - closed_form).abs();
    let pass = corr_err < 0.1 && independent < 0.05;
    assert!(
        report(
            7,
            "mi_estimator_accuracy",
            pass,
            &format!(
                "ρ=0.9: {correlated:.3} vs {closed_form:.3} (err {corr_err:.3}); independent: {independent:.3}"
            )
        ),
        "MI estimator out of tolerance"
    );
}

/// Criterion 8: planted duplicate relevant columns never both appear in the
/// first two mRMR picks, across 20 seeds.
#[test]
fn criterion_08_mrmr_duplicate_rejection() {
    let mut clean = 0usize;
    for seed in 0..20u64 {
        let mut r = rng::stream(1000 + seed);
        let n = 240;
        let targets: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let strong: Vec<f64> = targets
            .iter()
            .map(|&t| t as f64 * 2.0 + 0.4 * rng::standard_normal(&mut r))
            .collect();
        let moderate: Vec<f64> = targets
            .iter()
            .map(|&t| t as f64 + 0.9 * rng::standard_normal(&mut r))
            .collect();
        let noise: Vec<f64> = (0..n).map(|_| rng::standard_normal(&mut r)).collect();
        let mut values = Vec::with_capacity(n * 4);
        for i in 0..n {
            values.extend_from_slice(&[strong[i], strong[i], moderate[i], noise[i]]);
        }
        let data = tffs::data::Dataset::new(
            values,
            vec![false; n * 4],
            targets,
            vec![
                "dup_a".into(),
                "dup_b".into(),
                "other".into(),
                "noise".into(),
            ],
            vec!["c0".into(), "c1".into()],
        )
        .unwrap();
        let cfg = MiConfig {
            k_neighbors: 3,
            seed,
        };
        let mut ok = true;
        for variant in [MrmrVariant::Mid, MrmrVariant::Miq] {
            let picks = mrmr_select(&data, 2, variant, &cfg).unwrap();
            let dup_both = picks.contains(&0) && picks.contains(&1);
            ok &= !dup_both;
        }
        if ok {
            clean += 1;
        }
    }
    assert!(
        report(
            8,
            "mrmr_duplicate_rejection",
            clean == 20,
            &format!("{clean}/20 seeds rejected the duplicate in both variants")
        ),
        "duplicate columns co-selected"
    );
}

/// Criterion 9: rerunning an experiment with an identical config and seed
/// produces byte-identical JSON and CSV artifacts.
#[test]
fn criterion_09_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = BlobSpec {
        rows: 90,
        n_features: 5,
        informative: 2,
        n_classes: 2,
        separation: 2.5,
        noise_sd: 0.7,
    };
    let mut r = rng::stream(49);
    let ds = class_blobs(&spec, &mut r);
    let csv_path = tmp.path().join("blobs.csv");
    write_csv(&ds, &csv_path, "label", "").unwrap();

    let mut pass = true;
    let mut detail = String::new();
    for selector in [SelectorKind::Tf, SelectorKind::Mi, SelectorKind::MrmrMiq] {
        let cfg = ExperimentConfig {
            dataset: csv_path.clone(),
            target_column: "label".into(),
            missing_token: String::new(),
            focus_label: "class1".into(),
            selector,
            budget: 3,
            seed: 11,
            external_order: None,
            thresholds: None,
            weights: ValueWeights::default(),
            similarity: SimilarityMode::Absolute,
            train: TrainConfig {
                iterations: 80,
                mc_samples: 4,
                ..TrainConfig::default()
            },
            split: SplitSettings::default(),
            balance_cap: 1.0,
            confidence_draws: 40,
            mi_neighbors: 3,
            checkpoints: vec![1, 2, 3],
        };
        let a = run_experiment(&cfg).unwrap().artifact;
        let b = run_experiment(&cfg).unwrap().artifact;
        let same = a.to_json() == b.to_json() && a.trend.to_csv() == b.trend.to_csv();
        pass &= same;
        detail.push_str(&format!(
            "{selector}: {} ",
            if same { "identical" } else { "DIFFERS" }
        ));
    }
    assert!(
        report(9, "determinism", pass, detail.trim()),
        "artifacts not byte-identical"
    );
}

/// Criterion 10: every round's normalized similarity cohorts lie in [0, 1]
/// and contain an exact 1.0; the empty-selection round is all 1.0.
#[test]
fn criterion_10_score_normalization() {
    let sets = sampled_blob_sets(
        &BlobSpec {
            rows: 60,
            n_features: 6,
            informative: 3,
            n_classes: 2,
            separation: 2.0,
            noise_sd: 0.8,
        },
        50,
    );
    let cfg = SelectionConfig {
        thresholds: Thresholds::budget_only(6),
        weights: ValueWeights::default(),
        similarity: SimilarityMode::Absolute,
        train: TrainConfig {
            iterations: 60,
            mc_samples: 4,
            ..TrainConfig::default()
        },
        confidence_draws: 25,
        seed: 50,
    };
    let state = run_selection(&sets, 1, &cfg).unwrap();
    let mut pass = true;
    for record in &state.history {
        let cov: Vec<f64> = record.scores.iter().map(|s| s.cov_score).collect();
        let cos: Vec<f64> = record.scores.iter().map(|s| s.cos_score).collect();
        for cohort in [&cov, &cos] {
            pass &= cohort.iter().all(|&v| (0.0..=1.0).contains(&v));
            pass &= cohort.contains(&1.0);
        }
        if record.round == 1 {
            pass &= cov.iter().all(|&v| v == 1.0) && cos.iter().all(|&v| v == 1.0);
        }
    }
    assert!(
        report(
            10,
            "score_normalization",
            pass,
            &format!("{} rounds checked, round 1 all-ones", state.history.len())
        ),
        "normalization contract violated"
    );
}
