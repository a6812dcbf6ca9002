//! Mean-field Gaussian variational Bayesian linear classifier.
//!
//! The model places standard-normal priors on a weight matrix `W` (features ×
//! classes) and bias vector `b`, and a Gaussian likelihood with fixed noise
//! variance on one-hot encoded targets:
//!
//! ```text
//! z_n ~ Normal(X_n W + b, noise_var · I)
//! ```
//!
//! The posterior is approximated by an independent Gaussian per parameter,
//! stored as mean and log standard deviation. Training maximizes a Monte
//! Carlo evidence lower bound whose gradient is taken pathwise: each draw is
//! written as `mean + exp(log_sd) · eps` with external standard-normal noise,
//! so the bound is a deterministic differentiable function of the parameters
//! once the noise is fixed, and the gradients below are exact for that
//! function.

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

const LN_2PI: f64 = 1.8378770664093453;
const LOG_SD_MIN: f64 = -8.0;
const LOG_SD_MAX: f64 = 3.0;

/// Whether the ELBO subtracts a Monte Carlo log-ratio or the closed-form
/// Gaussian KL to the prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlForm {
    #[default]
    MonteCarlo,
    Analytic,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Monte Carlo samples per gradient step.
    pub mc_samples: usize,
    /// Likelihood noise variance.
    pub noise_var: f64,
    pub seed: u64,
    pub kl_form: KlForm,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 0.05,
            mc_samples: 8,
            noise_var: 1.0,
            seed: 0,
            kl_form: KlForm::MonteCarlo,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.mc_samples == 0 {
            return Err(Error::Config(
                "iterations and mc_samples must be at least 1".into(),
            ));
        }
        if self.learning_rate <= 0.0 || self.noise_var <= 0.0 {
            return Err(Error::Config(
                "learning_rate and noise_var must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Mean-field Gaussian posterior over `W` (c×d, feature-major) and `b` (d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalParams {
    pub w_mean: Vec<f64>,
    pub w_log_sd: Vec<f64>,
    pub b_mean: Vec<f64>,
    pub b_log_sd: Vec<f64>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl VariationalParams {
    /// Zero means, sd 0.1 everywhere.
    pub fn init(n_features: usize, n_classes: usize) -> Self {
        let w = n_features * n_classes;
        let log_sd = 0.1f64.ln();
        Self {
            w_mean: vec![0.0; w],
            w_log_sd: vec![log_sd; w],
            b_mean: vec![0.0; n_classes],
            b_log_sd: vec![log_sd; n_classes],
            n_features,
            n_classes,
        }
    }

    /// Parameters matching the standard-normal prior.
    pub fn prior(n_features: usize, n_classes: usize) -> Self {
        let w = n_features * n_classes;
        Self {
            w_mean: vec![0.0; w],
            w_log_sd: vec![0.0; w],
            b_mean: vec![0.0; n_classes],
            b_log_sd: vec![0.0; n_classes],
            n_features,
            n_classes,
        }
    }

    /// Total number of scalar parameters (W entries + biases).
    pub fn dim(&self) -> usize {
        self.n_features * self.n_classes + self.n_classes
    }

    fn clamp_log_sds(&mut self) {
        for v in self.w_log_sd.iter_mut().chain(self.b_log_sd.iter_mut()) {
            *v = v.clamp(LOG_SD_MIN, LOG_SD_MAX);
        }
    }

    fn check_finite(&self) -> bool {
        self.w_mean
            .iter()
            .chain(&self.w_log_sd)
            .chain(&self.b_mean)
            .chain(&self.b_log_sd)
            .all(|v| v.is_finite())
    }
}

/// On-disk posterior format: shape header plus row-major weights, rendered
/// in JSON as nested arrays (one row of class weights per feature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub n_features: usize,
    pub n_classes: usize,
    pub w_mean: Vec<Vec<f64>>,
    pub w_log_sd: Vec<Vec<f64>>,
    pub b_mean: Vec<f64>,
    pub b_log_sd: Vec<f64>,
}

impl From<&VariationalParams> for ModelDump {
    fn from(params: &VariationalParams) -> Self {
        let d = params.n_classes;
        let nest = |flat: &[f64]| flat.chunks(d).map(|row| row.to_vec()).collect();
        Self {
            n_features: params.n_features,
            n_classes: d,
            w_mean: nest(&params.w_mean),
            w_log_sd: nest(&params.w_log_sd),
            b_mean: params.b_mean.clone(),
            b_log_sd: params.b_log_sd.clone(),
        }
    }
}

impl ModelDump {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("invalid model dump: {e}")))
    }

    pub fn into_params(self) -> Result<VariationalParams> {
        let (c, d) = (self.n_features, self.n_classes);
        let flatten = |rows: Vec<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
            if rows.len() != c || rows.iter().any(|r| r.len() != d) {
                return Err(Error::Data(format!("{name} is not {c}×{d}")));
            }
            Ok(rows.into_iter().flatten().collect())
        };
        if self.b_mean.len() != d || self.b_log_sd.len() != d {
            return Err(Error::Data(format!("bias vectors are not length {d}")));
        }
        Ok(VariationalParams {
            w_mean: flatten(self.w_mean, "w_mean")?,
            w_log_sd: flatten(self.w_log_sd, "w_log_sd")?,
            b_mean: self.b_mean,
            b_log_sd: self.b_log_sd,
            n_features: c,
            n_classes: d,
        })
    }
}

/// One concrete draw of the linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl PosteriorSample {
    /// The posterior-mean model (no sampling noise).
    pub fn from_means(params: &VariationalParams) -> Self {
        Self {
            w: params.w_mean.clone(),
            b: params.b_mean.clone(),
            n_features: params.n_features,
            n_classes: params.n_classes,
        }
    }
}

/// Gradient of the ELBO, same layout as [`VariationalParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ElboGradient {
    pub w_mean: Vec<f64>,
    pub w_log_sd: Vec<f64>,
    pub b_mean: Vec<f64>,
    pub b_log_sd: Vec<f64>,
}

impl ElboGradient {
    fn zeros(c: usize, d: usize) -> Self {
        Self {
            w_mean: vec![0.0; c * d],
            w_log_sd: vec![0.0; c * d],
            b_mean: vec![0.0; d],
            b_log_sd: vec![0.0; d],
        }
    }

    fn scale(&mut self, factor: f64) {
        for v in self
            .w_mean
            .iter_mut()
            .chain(&mut self.w_log_sd)
            .chain(&mut self.b_mean)
            .chain(&mut self.b_log_sd)
        {
            *v *= factor;
        }
    }

    pub fn norm(&self) -> f64 {
        self.w_mean
            .iter()
            .chain(&self.w_log_sd)
            .chain(&self.b_mean)
            .chain(&self.b_log_sd)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Fixed standard-normal draws shaped `samples × (c·d + d)`: per sample, the
/// first `c·d` entries perturb W and the last `d` perturb b.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBank {
    draws: Vec<f64>,
    pub samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
}

impl NoiseBank {
    pub fn standard<R: RngExt>(
        samples: usize,
        n_features: usize,
        n_classes: usize,
        rng: &mut R,
    ) -> Self {
        let dim = n_features * n_classes + n_classes;
        let draws = (0..samples * dim)
            .map(|_| rng::standard_normal(rng))
            .collect();
        Self {
            draws,
            samples,
            n_features,
            n_classes,
        }
    }

    pub fn from_vec(
        draws: Vec<f64>,
        samples: usize,
        n_features: usize,
        n_classes: usize,
    ) -> Result<Self> {
        let dim = n_features * n_classes + n_classes;
        if draws.len() != samples * dim {
            return Err(Error::Contract(format!(
                "noise bank has {} entries, expected {}",
                draws.len(),
                samples * dim
            )));
        }
        Ok(Self {
            draws,
            samples,
            n_features,
            n_classes,
        })
    }

    /// Noise for sample `i`, split into (W part, b part).
    fn sample(&self, i: usize) -> (&[f64], &[f64]) {
        let dim = self.n_features * self.n_classes + self.n_classes;
        let row = &self.draws[i * dim..(i + 1) * dim];
        row.split_at(self.n_features * self.n_classes)
    }

    /// A new bank holding only the first sample row.
    pub fn first(&self) -> Self {
        let dim = self.n_features * self.n_classes + self.n_classes;
        Self {
            draws: self.draws[..dim].to_vec(),
            samples: 1,
            n_features: self.n_features,
            n_classes: self.n_classes,
        }
    }
}

/// Closed-form KL from an independent Gaussian to the standard normal.
pub fn kl_to_standard_normal(params: &VariationalParams) -> f64 {
    let term = |mean: f64, log_sd: f64| {
        let var = (2.0 * log_sd).exp();
        0.5 * (var + mean * mean - 1.0) - log_sd
    };
    params
        .w_mean
        .iter()
        .zip(&params.w_log_sd)
        .chain(params.b_mean.iter().zip(&params.b_log_sd))
        .map(|(&m, &s)| term(m, s))
        .sum()
}

struct Problem<'a> {
    data: &'a Dataset,
    subset: &'a [usize],
    one_hot: Vec<f64>, // rows × d
}

impl<'a> Problem<'a> {
    fn new(data: &'a Dataset, subset: &'a [usize]) -> Result<Self> {
        for (i, &col) in subset.iter().enumerate() {
            if col >= data.n_features() {
                return Err(Error::Contract(format!(
                    "feature index {col} out of bounds"
                )));
            }
            if subset[..i].contains(&col) {
                return Err(Error::Contract(format!("duplicate feature index {col}")));
            }
        }
        let d = data.n_classes();
        let mut one_hot = vec![0.0; data.rows() * d];
        for (row, &t) in data.targets().iter().enumerate() {
            one_hot[row * d + t] = 1.0;
        }
        Ok(Self {
            data,
            subset,
            one_hot,
        })
    }

    fn x(&self, row: usize, j: usize) -> f64 {
        self.data.value(row, self.subset[j])
    }
}

/// Monte Carlo ELBO and its exact pathwise gradient under fixed noise.
///
/// Per noise sample: materialize `W = mean + exp(log_sd)·eps`, accumulate the
/// Gaussian data term, and (in Monte Carlo form) the log prior minus log q.
/// In analytic form the sampled part is the data term only and the Gaussian
/// KL is subtracted once at the end.
fn elbo_and_gradient(
    params: &VariationalParams,
    data: &Dataset,
    subset: &[usize],
    cfg: &TrainConfig,
    noise: &NoiseBank,
    want_gradient: bool,
) -> Result<(f64, Option<ElboGradient>)> {
    let c = subset.len();
    let d = data.n_classes();
    if params.n_features != c || params.n_classes != d {
        return Err(Error::Contract(format!(
            "params are {}×{}, data subset is {}×{}",
            params.n_features, params.n_classes, c, d
        )));
    }
    if noise.n_features != c || noise.n_classes != d || noise.samples == 0 {
        return Err(Error::Contract(format!(
            "noise bank shaped {}×({}·{}+{}) does not match",
            noise.samples, noise.n_features, noise.n_classes, noise.n_classes
        )));
    }
    let problem = Problem::new(data, subset)?;
    let rows = data.rows();
    let inv_var = 1.0 / cfg.noise_var;
    let mc_kl = cfg.kl_form == KlForm::MonteCarlo;

    let mut total = 0.0;
    let mut grad = want_gradient.then(|| ElboGradient::zeros(c, d));
    let mut w = vec![0.0; c * d];
    let mut b = vec![0.0; d];
    let mut row_err = vec![0.0; d];
    let mut col_err = vec![0.0; c * d]; // sum over rows of X_nj · e_nk
    let mut bias_err = vec![0.0; d];

    for i in 0..noise.samples {
        let (eps_w, eps_b) = noise.sample(i);
        for (idx, wv) in w.iter_mut().enumerate() {
            *wv = params.w_mean[idx] + params.w_log_sd[idx].exp() * eps_w[idx];
        }
        for (k, bv) in b.iter_mut().enumerate() {
            *bv = params.b_mean[k] + params.b_log_sd[k].exp() * eps_b[k];
        }

        let mut sample_value = 0.0;
        col_err.iter_mut().for_each(|v| *v = 0.0);
        bias_err.iter_mut().for_each(|v| *v = 0.0);
        for n in 0..rows {
            for (k, re) in row_err.iter_mut().enumerate() {
                let mut pred = b[k];
                for j in 0..c {
                    pred += problem.x(n, j) * w[j * d + k];
                }
                let resid = pred - problem.one_hot[n * d + k];
                sample_value +=
                    -0.5 * (LN_2PI + cfg.noise_var.ln()) - 0.5 * resid * resid * inv_var;
                *re = resid * inv_var;
            }
            if want_gradient {
                for j in 0..c {
                    let xnj = problem.x(n, j);
                    for k in 0..d {
                        col_err[j * d + k] += xnj * row_err[k];
                    }
                }
                for k in 0..d {
                    bias_err[k] += row_err[k];
                }
            }
        }

        if mc_kl {
            // log p(W) + log p(b) − log q(W, b); under the substitution the
            // log-q term reduces to −log_sd − eps²/2 − ½ln(2π) per entry.
            for (idx, &wv) in w.iter().enumerate() {
                sample_value += -0.5 * LN_2PI - 0.5 * wv * wv;
                sample_value -=
                    -params.w_log_sd[idx] - 0.5 * eps_w[idx] * eps_w[idx] - 0.5 * LN_2PI;
            }
            for (k, &bv) in b.iter().enumerate() {
                sample_value += -0.5 * LN_2PI - 0.5 * bv * bv;
                sample_value -= -params.b_log_sd[k] - 0.5 * eps_b[k] * eps_b[k] - 0.5 * LN_2PI;
            }
        }
        total += sample_value;

        if let Some(g) = grad.as_mut() {
            for idx in 0..c * d {
                let mut dw = -col_err[idx];
                if mc_kl {
                    dw -= w[idx]; // prior term
                }
                g.w_mean[idx] += dw;
                g.w_log_sd[idx] += dw * eps_w[idx] * params.w_log_sd[idx].exp();
                if mc_kl {
                    g.w_log_sd[idx] += 1.0; // entropy of q
                }
            }
            for k in 0..d {
                let mut db = -bias_err[k];
                if mc_kl {
                    db -= b[k];
                }
                g.b_mean[k] += db;
                g.b_log_sd[k] += db * eps_b[k] * params.b_log_sd[k].exp();
                if mc_kl {
                    g.b_log_sd[k] += 1.0;
                }
            }
        }
    }

    let inv_s = 1.0 / noise.samples as f64;
    total *= inv_s;
    if let Some(g) = grad.as_mut() {
        g.scale(inv_s);
    }

    if !mc_kl {
        total -= kl_to_standard_normal(params);
        if let Some(g) = grad.as_mut() {
            for (idx, gm) in g.w_mean.iter_mut().enumerate() {
                *gm -= params.w_mean[idx];
                g.w_log_sd[idx] -= (2.0 * params.w_log_sd[idx]).exp() - 1.0;
            }
            for (k, gm) in g.b_mean.iter_mut().enumerate() {
                *gm -= params.b_mean[k];
                g.b_log_sd[k] -= (2.0 * params.b_log_sd[k]).exp() - 1.0;
            }
        }
    }

    Ok((total, grad))
}

/// Monte Carlo ELBO under fixed noise. Deterministic given the noise bank.
pub fn elbo(
    params: &VariationalParams,
    data: &Dataset,
    subset: &[usize],
    cfg: &TrainConfig,
    noise: &NoiseBank,
) -> Result<f64> {
    elbo_and_gradient(params, data, subset, cfg, noise, false).map(|(v, _)| v)
}

/// Exact gradient of [`elbo`] for the same fixed noise.
pub fn elbo_gradient(
    params: &VariationalParams,
    data: &Dataset,
    subset: &[usize],
    cfg: &TrainConfig,
    noise: &NoiseBank,
) -> Result<ElboGradient> {
    elbo_and_gradient(params, data, subset, cfg, noise, true).map(|(_, g)| g.unwrap())
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }

    /// One ascent step over the flattened parameter vector.
    fn ascend(&mut self, params: &mut [&mut f64], grads: &[f64], lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let correction = (1.0 - Self::BETA2.powi(t)).sqrt() / (1.0 - Self::BETA1.powi(t));
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            **p += lr * correction * self.m[i] / (self.v[i].sqrt() + Self::EPS);
        }
    }
}

/// Train a model on the given feature subset (possibly empty: bias only).
///
/// Adam ascent on the pathwise ELBO gradient with fresh noise each step;
/// log standard deviations are clamped to [-8, 3] after every update.
/// Deterministic per `cfg.seed`.
pub fn train(data: &Dataset, subset: &[usize], cfg: &TrainConfig) -> Result<VariationalParams> {
    cfg.validate()?;
    let c = subset.len();
    let d = data.n_classes();
    let mut params = VariationalParams::init(c, d);
    let mut adam = Adam::new(2 * params.dim());
    let mut rng = rng::stream(cfg.seed);

    for iter in 0..cfg.iterations {
        let noise = NoiseBank::standard(cfg.mc_samples, c, d, &mut rng);
        let (value, grad) = elbo_and_gradient(&params, data, subset, cfg, &noise, true)?;
        if !value.is_finite() {
            return Err(Error::Numeric {
                iteration: iter,
                message: format!("ELBO became {value}"),
            });
        }
        let g = grad.unwrap();
        let flat_grad: Vec<f64> = g
            .w_mean
            .iter()
            .chain(&g.w_log_sd)
            .chain(&g.b_mean)
            .chain(&g.b_log_sd)
            .copied()
            .collect();
        {
            let mut flat: Vec<&mut f64> = params
                .w_mean
                .iter_mut()
                .chain(params.w_log_sd.iter_mut())
                .chain(params.b_mean.iter_mut())
                .chain(params.b_log_sd.iter_mut())
                .collect();
            adam.ascend(&mut flat, &flat_grad, cfg.learning_rate);
        }
        params.clamp_log_sds();
        if !params.check_finite() {
            return Err(Error::Numeric {
                iteration: iter,
                message: "parameters became non-finite".into(),
            });
        }
    }
    Ok(params)
}

/// One elementwise Gaussian draw from the posterior.
pub fn sample_posterior(params: &VariationalParams, seed: u64) -> PosteriorSample {
    let mut rng = rng::stream(seed);
    sample_posterior_with(params, &mut rng)
}

/// Draw from the posterior using an existing stream (for repeated draws).
pub fn sample_posterior_with<R: RngExt>(
    params: &VariationalParams,
    rng: &mut R,
) -> PosteriorSample {
    let w = params
        .w_mean
        .iter()
        .zip(&params.w_log_sd)
        .map(|(&m, &s)| m + s.exp() * rng::standard_normal(rng))
        .collect();
    let b = params
        .b_mean
        .iter()
        .zip(&params.b_log_sd)
        .map(|(&m, &s)| m + s.exp() * rng::standard_normal(rng))
        .collect();
    PosteriorSample {
        w,
        b,
        n_features: params.n_features,
        n_classes: params.n_classes,
    }
}
