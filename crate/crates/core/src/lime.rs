//! Local surrogate explanations: perturb around an instance, weight the
//! neighborhood by proximity, fit a weighted ridge regression to the black-box
//! probabilities and read feature contributions off the surrogate.
//!
//! Numeric columns are standardized by the training statistics before the
//! distance and the regression are computed; one-hot columns stay 0/1. The
//! contribution of an encoded column is `beta * (x - training mean)` in raw
//! units, and a feature's contribution is the signed sum over its columns.
//! Unlike the bare sum of one-hot coefficients, this sum does not depend on
//! how the ridge penalty splits an effect between collinear columns.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Bernoulli, Distribution, WeightedIndex};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{Attribution, Method, SurrogateFit};
use crate::data::{EncodedDataset, FeatureMapping, FeatureStats, Matrix, TrainingStats};
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Defaults to `0.75 * sqrt(encoded columns)`.
    pub kernel_width: Option<f64>,
    pub ridge_lambda: f64,
    /// Chance that a categorical feature is redrawn from the training
    /// frequencies in a perturbed row. 1.0 draws every categorical value.
    pub resample_probability: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            kernel_width: None,
            ridge_lambda: 1.0,
            resample_probability: 1.0,
            seed: 42,
        }
    }
}

impl LimeConfig {
    pub fn kernel_width_for(&self, n_columns: usize) -> f64 {
        self.kernel_width
            .unwrap_or_else(|| 0.75 * (n_columns as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Invalid("n_samples must be at least 1".into()));
        }
        if let Some(w) = self.kernel_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Invalid("kernel width must be positive".into()));
            }
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::Invalid("ridge lambda must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_probability) {
            return Err(Error::Invalid("resample probability outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Neighborhood of `x` in encoded space. Row 0 is `x`. Every other row adds
/// `N(0, 1) * std` to numeric features and, with probability
/// `resample_probability` per categorical feature, redraws the category from
/// the training frequencies.
pub fn perturb_neighborhood(
    x: &[f64],
    mapping: &FeatureMapping,
    stats: &TrainingStats,
    n_samples: usize,
    resample_probability: f64,
    rng: &mut seed::Rng,
) -> Matrix {
    let samplers: Vec<Option<WeightedIndex<f64>>> = stats
        .features
        .iter()
        .map(|s| match s {
            FeatureStats::Categorical { frequencies, .. } => WeightedIndex::new(frequencies).ok(),
            FeatureStats::Numeric { .. } => None,
        })
        .collect();
    let coin = Bernoulli::new(resample_probability.clamp(0.0, 1.0)).unwrap();
    let mut out = Matrix::with_cols(x.len());
    if n_samples == 0 {
        return out;
    }
    out.push_row(x);
    let mut row = x.to_vec();
    for _ in 1..n_samples {
        row.copy_from_slice(x);
        for (j, s) in stats.features.iter().enumerate() {
            let block = mapping.block(j);
            match s {
                FeatureStats::Numeric { std, .. } => {
                    let z: f64 = StandardNormal.sample(rng);
                    row[block.start] += z * std;
                }
                FeatureStats::Categorical { .. } => {
                    if coin.sample(rng) {
                        if let Some(w) = &samplers[j] {
                            let c = w.sample(rng);
                            row[block.clone()].fill(0.0);
                            row[block.start + c] = 1.0;
                        }
                    }
                }
            }
        }
        out.push_row(&row);
    }
    out
}

/// Exponential kernel `exp(-d^2 / width^2)` on Euclidean distance to `x`.
pub fn proximity_weights(x: &[f64], samples: &Matrix, kernel_width: f64) -> Vec<f64> {
    let w2 = kernel_width * kernel_width;
    samples
        .rows()
        .map(|s| {
            let d2: f64 = s.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / w2).exp().max(f64::MIN_POSITIVE)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl Surrogate {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Weighted ridge regression with an unpenalized intercept, solved through
/// the normal equations `(Xc' W Xc + lambda I) b = Xc' W yc` on weighted-mean
/// centered data.
pub fn fit_surrogate(samples: &Matrix, targets: &[f64], weights: &[f64], ridge_lambda: f64) -> Result<Surrogate> {
    let n = samples.n_rows();
    if n != targets.len() || n != weights.len() {
        return Err(Error::Invalid(format!(
            "{} samples, {} targets, {} weights",
            n,
            targets.len(),
            weights.len()
        )));
    }
    if n == 0 {
        return Err(Error::Empty("neighborhood"));
    }
    if !(ridge_lambda >= 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Invalid("weights and lambda must be non-negative".into()));
    }
    let p = samples.n_cols();
    let sw: f64 = weights.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::Invalid("weights sum to zero".into()));
    }

    let mut mx = vec![0.0; p];
    let mut my = 0.0;
    let mut gram = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    let mut nz = Vec::with_capacity(p);
    for ((row, &y), &w) in samples.rows().zip(targets).zip(weights) {
        my += w * y;
        nz.clear();
        nz.extend(row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)));
        for (k, &(a, va)) in nz.iter().enumerate() {
            let wa = w * va;
            mx[a] += wa;
            xty[a] += wa * y;
            let g = &mut gram[a * p..(a + 1) * p];
            for &(b, vb) in &nz[k..] {
                g[b] += wa * vb;
            }
        }
    }
    mx.iter_mut().for_each(|m| *m /= sw);
    my /= sw;

    let mut a = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = gram[i * p + j] - sw * mx[i] * mx[j];
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a[(i, i)] += ridge_lambda;
    }
    let b = DVector::from_iterator(p, (0..p).map(|i| xty[i] - sw * mx[i] * my));
    let chol = a.cholesky().ok_or(Error::Singular)?;
    let beta = chol.solve(&b);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = my - coefficients.iter().zip(&mx).map(|(b, m)| b * m).sum::<f64>();
    Ok(Surrogate {
        coefficients,
        intercept,
    })
}

/// `1 - SS_res / SS_tot`, both sums kernel-weighted. 1 for a constant target
/// that the surrogate reproduces.
pub fn weighted_r2(surrogate: &Surrogate, samples: &Matrix, targets: &[f64], weights: &[f64]) -> f64 {
    let sw: f64 = weights.iter().sum();
    let my = targets.iter().zip(weights).map(|(y, w)| y * w).sum::<f64>() / sw;
    let (mut res, mut tot) = (0.0, 0.0);
    for ((row, &y), &w) in samples.rows().zip(targets).zip(weights) {
        res += w * (y - surrogate.predict(row)).powi(2);
        tot += w * (y - my).powi(2);
    }
    if tot <= f64::EPSILON * sw {
        return if res <= f64::EPSILON * sw { 1.0 } else { 0.0 };
    }
    1.0 - res / tot
}

#[derive(Debug, Clone)]
pub struct LimeExplainer {
    mapping: Arc<FeatureMapping>,
    stats: Arc<TrainingStats>,
    config: LimeConfig,
    center: Vec<f64>,
    scale: Vec<f64>,
    kernel_width: f64,
}

impl LimeExplainer {
    pub fn new(mapping: Arc<FeatureMapping>, stats: Arc<TrainingStats>, config: LimeConfig) -> Result<Self> {
        config.validate()?;
        if stats.features.len() != mapping.n_features() {
            return Err(Error::Arity {
                expected: mapping.n_features(),
                found: stats.features.len(),
            });
        }
        let p = mapping.n_columns();
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for (j, s) in stats.features.iter().enumerate() {
            if let FeatureStats::Numeric { mean, std, .. } = s {
                let c = mapping.block(j).start;
                center[c] = *mean;
                if *std > 0.0 {
                    scale[c] = *std;
                }
            }
        }
        let kernel_width = config.kernel_width_for(p);
        Ok(Self {
            mapping,
            stats,
            config,
            center,
            scale,
            kernel_width,
        })
    }

    pub fn config(&self) -> &LimeConfig {
        &self.config
    }

    pub fn kernel_width(&self) -> f64 {
        self.kernel_width
    }

    fn standardize(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.n_rows() {
            for ((v, c), s) in out.row_mut(i).iter_mut().zip(&self.center).zip(&self.scale) {
                *v = (*v - c) / s;
            }
        }
        out
    }

    /// Explains `x`; `instance` only feeds the per-instance seed and the label
    /// of the result.
    pub fn explain(&self, model: &dyn Classifier, x: &[f64], instance: usize) -> Result<Attribution> {
        if x.len() != self.mapping.n_columns() || model.n_inputs() != x.len() {
            return Err(Error::Arity {
                expected: self.mapping.n_columns(),
                found: x.len(),
            });
        }
        let mut rng = seed::rng(seed::for_instance(self.config.seed, instance));
        let samples = perturb_neighborhood(
            x,
            &self.mapping,
            &self.stats,
            self.config.n_samples,
            self.config.resample_probability,
            &mut rng,
        );
        let targets = model.predict_proba_rows(&samples);
        let z = self.standardize(&samples);
        let weights = proximity_weights(z.row(0), &z, self.kernel_width);
        let fit = fit_surrogate(&z, &targets, &weights, self.config.ridge_lambda)?;
        let r2 = weighted_r2(&fit, &z, &targets, &weights);

        let column_coefficients: Vec<f64> = fit
            .coefficients
            .iter()
            .zip(&self.scale)
            .map(|(b, s)| b / s)
            .collect();
        let column_contributions: Vec<f64> = column_coefficients
            .iter()
            .zip(x)
            .zip(&self.stats.column_means)
            .map(|((b, v), m)| b * (v - m))
            .collect();
        let d = self.mapping.n_features();
        let mut contributions = vec![0.0; d];
        let mut coefficients = vec![0.0; d];
        for j in 0..d {
            for c in self.mapping.block(j) {
                contributions[j] += column_contributions[c];
                coefficients[j] += column_coefficients[c];
            }
        }
        let local = fit.predict(z.row(0));
        Ok(Attribution {
            instance,
            method: Method::Lime,
            features: self.mapping.feature_names(),
            intercept: local - contributions.iter().sum::<f64>(),
            contributions,
            prediction: targets[0],
            surrogate: Some(SurrogateFit {
                coefficients,
                column_coefficients,
                column_contributions,
                r2,
                kernel_width: self.kernel_width,
            }),
        })
    }

    /// Explains the rows of `data` at `positions`, in parallel. The output is
    /// independent of scheduling.
    pub fn explain_rows(&self, model: &dyn Classifier, data: &EncodedDataset, positions: &[usize]) -> Result<Vec<Attribution>> {
        positions
            .par_iter()
            .map(|&i| {
                if i >= data.len() {
                    return Err(Error::IndexOutOfRange { index: i, len: data.len() });
                }
                self.explain(model, data.row(i), i)
            })
            .collect()
    }
}

/// One-shot LIME explanation.
pub fn explain_lime(
    model: &dyn Classifier,
    x: &[f64],
    mapping: Arc<FeatureMapping>,
    stats: Arc<TrainingStats>,
    config: &LimeConfig,
) -> Result<Attribution> {
    LimeExplainer::new(mapping, stats, config.clone())?.explain(model, x, 0)
}
