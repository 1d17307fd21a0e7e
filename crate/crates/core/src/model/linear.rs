use serde::{Deserialize, Serialize};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub l2: f64,
    pub max_iterations: usize,
    /// Stop once every gradient component is below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            l2: 1.0,
            max_iterations: 3000,
            tolerance: 1e-7,
            seed: 42,
        }
    }
}

/// Logistic model `sigmoid(w . x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Vec<f64>,
    intercept: f64,
    config: LinearConfig,
}

impl LinearModel {
    pub fn from_parameters(weights: Vec<f64>, intercept: f64) -> Self {
        Self {
            weights,
            intercept,
            config: LinearConfig::default(),
        }
    }

    pub(crate) fn with_config(weights: Vec<f64>, intercept: f64, config: LinearConfig) -> Self {
        Self {
            weights,
            intercept,
            config,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn config(&self) -> &LinearConfig {
        &self.config
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn train_linear(train: &EncodedDataset, l2: f64, seed: u64) -> Result<LinearModel> {
    train_linear_with(
        train,
        &LinearConfig {
            l2,
            seed,
            ..LinearConfig::default()
        },
    )
}

/// Minimizes mean logistic loss plus `l2 / (2n) * |w|^2` (intercept not
/// penalized) by Nesterov-accelerated gradient descent on standardized
/// columns, starting from zero. Weights are returned in raw column units.
pub fn train_linear_with(train: &EncodedDataset, config: &LinearConfig) -> Result<LinearModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if !(config.l2 >= 0.0) {
        return Err(Error::Invalid("l2 must be non-negative".into()));
    }
    let n = train.len();
    let d = train.matrix.n_cols();
    let nf = n as f64;

    let mut mean = vec![0.0; d];
    for row in train.matrix.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut scale = vec![0.0; d];
    for row in train.matrix.rows() {
        for ((s, v), m) in scale.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let scale: Vec<f64> = scale.iter().map(|s| (s / nf).sqrt()).collect();
    let z: Vec<f64> = train
        .matrix
        .rows()
        .flat_map(|row| {
            row.iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
                .collect::<Vec<_>>()
        })
        .collect();
    let y: Vec<f64> = train.labels.iter().map(|&l| l as f64).collect();

    let penalty = config.l2 / nf;
    let lipschitz = 0.25 * (d as f64).max(1.0) + 0.25 + penalty;
    let step = 1.0 / lipschitz;

    // parameters: d weights followed by the intercept
    let mut theta = vec![0.0; d + 1];
    let mut prev = theta.clone();
    let mut look = theta.clone();
    let mut grad = vec![0.0; d + 1];
    for k in 0..config.max_iterations {
        let momentum = k as f64 / (k as f64 + 3.0);
        for i in 0..=d {
            look[i] = theta[i] + momentum * (theta[i] - prev[i]);
        }
        gradient(&z, &y, d, &look, penalty, &mut grad);
        let done = grad.iter().all(|g| g.abs() < config.tolerance);
        prev.copy_from_slice(&theta);
        for i in 0..=d {
            theta[i] = look[i] - step * grad[i];
        }
        if done {
            break;
        }
    }

    let mut weights = vec![0.0; d];
    let mut intercept = theta[d];
    for j in 0..d {
        if scale[j] > 0.0 {
            weights[j] = theta[j] / scale[j];
            intercept -= weights[j] * mean[j];
        }
    }
    Ok(LinearModel::with_config(weights, intercept, config.clone()))
}

fn gradient(z: &[f64], y: &[f64], d: usize, theta: &[f64], penalty: f64, grad: &mut [f64]) {
    grad.fill(0.0);
    let n = y.len();
    for (row, &yi) in z.chunks_exact(d.max(1)).take(n).zip(y) {
        let s = theta[d] + row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
        let r = sigmoid(s) - yi;
        for (g, v) in grad.iter_mut().zip(row) {
            *g += r * v;
        }
        grad[d] += r;
    }
    let nf = n as f64;
    for j in 0..d {
        grad[j] = grad[j] / nf + penalty * theta[j];
    }
    grad[d] /= nf;
}
