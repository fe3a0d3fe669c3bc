//! Linear classifiers on standardized features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_rows, LabeledVector, MlError, Severity};

/// Columns with a training standard deviation below this are only centered.
pub const STD_GUARD: f64 = 1e-9;

/// Per-feature z-scoring with training-partition statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[LabeledVector]) -> Self {
        let p = rows.first().map_or(0, |r| r.features.len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(&r.features) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; p];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(&r.features).zip(&mean) {
                *v += (x - m).powi(2) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = v.sqrt();
                if s < STD_GUARD {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn target(label: Severity) -> f64 {
    label.index() as f64
}

/// Mean log-loss plus `lambda / 2 * |w|^2` on already-standardized rows.
/// The bias is not penalized.
pub fn logistic_objective(x: &[Vec<f64>], y: &[Severity], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = x.len() as f64;
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = dot(w, row) + b;
            softplus(z) - target(label) * z
        })
        .sum::<f64>()
        / n;
    loss + 0.5 * lambda * dot(w, w)
}

/// Gradient of [`logistic_objective`] with respect to `(w, b)`.
pub fn logistic_gradient(
    x: &[Vec<f64>],
    y: &[Severity],
    w: &[f64],
    b: f64,
    lambda: f64,
) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw: Vec<f64> = w.iter().map(|wi| lambda * wi).collect();
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let r = (sigmoid(dot(w, row) + b) - target(label)) / n;
        for (g, xi) in gw.iter_mut().zip(row) {
            *g += r * xi;
        }
        gb += r;
    }
    (gw, gb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub lambda: f64,
    pub max_steps: usize,
    /// Fixed step size; `None` uses the inverse of a Lipschitz bound on the
    /// gradient, which guarantees descent.
    pub learning_rate: Option<f64>,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            max_steps: 10_000,
            learning_rate: None,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub steps: usize,
    /// False when `max_steps` ran out before the gradient tolerance was met.
    pub converged: bool,
}

impl LogisticModel {
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, &self.standardizer.transform(x)) + self.bias)
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Severity {
        if self.probability(x) >= 0.5 {
            Severity::Severe
        } else {
            Severity::Mild
        }
    }
}

pub fn train_logistic_regression(
    rows: &[LabeledVector],
    params: &LogisticParams,
) -> Result<LogisticModel, MlError> {
    let p = check_rows(rows)?;
    if !(params.lambda >= 0.0 && params.lambda.is_finite()) {
        return Err(MlError::BadParameter(format!("lambda {} must be >= 0", params.lambda)));
    }
    let standardizer = Standardizer::fit(rows);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(&r.features)).collect();
    let y: Vec<Severity> = rows.iter().map(|r| r.label).collect();

    let rate = params.learning_rate.unwrap_or_else(|| {
        let n = x.len() as f64;
        let trace = x.iter().map(|r| dot(r, r) + 1.0).sum::<f64>() / n;
        1.0 / (0.25 * trace + params.lambda)
    });

    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut converged = false;
    let mut steps = 0;
    while steps < params.max_steps {
        let (gw, gb) = logistic_gradient(&x, &y, &w, b, params.lambda);
        if (dot(&gw, &gw) + gb * gb).sqrt() < params.tolerance {
            converged = true;
            break;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= rate * g;
        }
        b -= rate * gb;
        steps += 1;
    }
    if !converged {
        log::warn!("logistic regression stopped at the {} step cap", params.max_steps);
    }
    Ok(LogisticModel {
        standardizer,
        weights: w,
        bias: b,
        lambda: params.lambda,
        steps,
        converged,
    })
}

fn sign(label: Severity) -> f64 {
    match label {
        Severity::Mild => -1.0,
        Severity::Severe => 1.0,
    }
}

/// Mean hinge loss plus `lambda / 2 * |w|^2` on standardized rows.
pub fn svm_objective(x: &[Vec<f64>], y: &[Severity], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = x.len() as f64;
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| (1.0 - sign(label) * (dot(w, row) + b)).max(0.0))
        .sum::<f64>()
        / n;
    hinge + 0.5 * lambda * dot(w, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epochs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, &self.standardizer.transform(x)) + self.bias
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Severity {
        if self.decision(x) >= 0.0 {
            Severity::Severe
        } else {
            Severity::Mild
        }
    }
}

/// Stochastic subgradient descent on the regularized hinge loss with step
/// `1 / (lambda * t)`. Each epoch visits every row once in a seeded order.
pub fn train_linear_svm(
    rows: &[LabeledVector],
    params: &SvmParams,
    seed: u64,
) -> Result<LinearSvm, MlError> {
    let p = check_rows(rows)?;
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(MlError::BadParameter(format!("lambda {} must be > 0", params.lambda)));
    }
    let standardizer = Standardizer::fit(rows);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(&r.features)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut t = 0.0;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1.0;
            let eta = 1.0 / (params.lambda * t);
            let y = sign(rows[i].label);
            let margin = y * (dot(&w, &x[i]) + b);
            let shrink = 1.0 - eta * params.lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += eta * y * xj;
                }
                b += eta * y;
            }
        }
    }
    Ok(LinearSvm {
        standardizer,
        weights: w,
        bias: b,
        lambda: params.lambda,
    })
}
