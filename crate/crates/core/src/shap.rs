//! Shapley attributions over original features. The game value of a
//! coalition `S` is the mean black-box probability over a background set of
//! hybrid rows that take the features in `S` from the explained instance and
//! every other feature from the background row. A feature's one-hot block
//! always moves as a whole.
//!
//! For forests all `2^d` values are obtained from one pass over each
//! (tree, background row) pair: the walk forks only where the instance and
//! the background row take different branches, and each leaf reached is
//! recorded under the ternary pattern (in S / not in S / free) of the
//! features it forked on. Summing patterns into coalitions is a per-digit
//! transform over the `3^d` table.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{Attribution, Method};
use crate::data::{EncodedDataset, FeatureMapping, Matrix};
use crate::error::{Error, Result};
use crate::model::{Classifier, RandomForest};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapMode {
    Exact,
    Sampled,
    /// Exact up to `exact_feature_limit` features, sampled above.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    pub mode: ShapMode,
    pub background_size: usize,
    pub n_permutations: usize,
    pub exact_feature_limit: usize,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            mode: ShapMode::Auto,
            background_size: 100,
            n_permutations: 2000,
            exact_feature_limit: 12,
            seed: 42,
        }
    }
}

/// Coalitions are bit masks over original features.
pub type Coalition = u64;

const MAX_FEATURES: usize = 64;

/// Value of one coalition, evaluated directly.
pub fn coalition_value(
    model: &dyn Classifier,
    mapping: &FeatureMapping,
    x: &[f64],
    coalition: Coalition,
    background: &Matrix,
) -> f64 {
    let mut hybrids = background.clone();
    for i in 0..hybrids.n_rows() {
        overlay(mapping, x, coalition, hybrids.row_mut(i));
    }
    mean(&model.predict_proba_rows(&hybrids))
}

fn overlay(mapping: &FeatureMapping, x: &[f64], coalition: Coalition, row: &mut [f64]) {
    for j in 0..mapping.n_features() {
        if coalition >> j & 1 == 1 {
            let b = mapping.block(j);
            row[b.clone()].copy_from_slice(&x[b]);
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// All `2^d` coalition values, indexed by mask. Uses the tree walk for
/// forests and direct evaluation otherwise.
pub fn coalition_values(
    model: &dyn Classifier,
    mapping: &FeatureMapping,
    x: &[f64],
    background: &Matrix,
) -> Result<Vec<f64>> {
    let d = mapping.n_features();
    if d > 20 {
        return Err(Error::TooManyFeatures { features: d, limit: 20 });
    }
    if background.n_rows() == 0 {
        return Err(Error::Empty("background"));
    }
    if let Some(forest) = model.as_forest() {
        return Ok(forest_values(forest, mapping, x, background));
    }
    let n = 1usize << d;
    let nb = background.n_rows();
    let mut hybrids = Matrix::with_cols(x.len());
    for s in 0..n as Coalition {
        for row in background.rows() {
            hybrids.push_row(row);
            let last = hybrids.n_rows() - 1;
            overlay(mapping, x, s, hybrids.row_mut(last));
        }
    }
    let p = model.predict_proba_rows(&hybrids);
    Ok(p.chunks(nb).map(mean).collect())
}

fn forest_values(forest: &RandomForest, mapping: &FeatureMapping, x: &[f64], background: &Matrix) -> Vec<f64> {
    let d = mapping.n_features();
    let col_feature = mapping.column_features();
    let pow3: Vec<usize> = (0..=d).map(|j| 3usize.pow(j as u32)).collect();
    let mut table = vec![0u64; pow3[d]];
    for tree in forest.trees() {
        let nodes = tree.nodes();
        for b in background.rows() {
            // (node, in-mask, out-mask, ternary index)
            let mut stack: Vec<(u32, Coalition, Coalition, usize)> = vec![(0, 0, 0, 0)];
            while let Some((mut i, inm, outm, tern)) = stack.pop() {
                loop {
                    let node = &nodes[i as usize];
                    if node.is_leaf() {
                        table[tern] += node.class() as u64;
                        break;
                    }
                    let c = node.feature as usize;
                    let gx = x[c] <= node.threshold;
                    let gb = b[c] <= node.threshold;
                    let next = |left: bool| if left { node.left } else { node.right };
                    if gx == gb {
                        i = next(gx);
                        continue;
                    }
                    let j = col_feature[c];
                    let bit = 1 << j;
                    if inm & bit != 0 {
                        i = next(gx);
                    } else if outm & bit != 0 {
                        i = next(gb);
                    } else {
                        stack.push((next(gb), inm, outm | bit, tern + 2 * pow3[j]));
                        stack.push((next(gx), inm | bit, outm, tern + pow3[j]));
                        break;
                    }
                }
            }
        }
    }
    // Spread each free digit into both of its settled values.
    for j in 0..d {
        let step = pow3[j];
        for idx in 0..table.len() {
            if (idx / step).is_multiple_of(3) {
                let v = table[idx];
                if v != 0 {
                    table[idx + step] += v;
                    table[idx + 2 * step] += v;
                }
            }
        }
    }
    let denom = (forest.trees().len() * background.n_rows()) as f64;
    (0..1usize << d)
        .map(|s| {
            let idx: usize = (0..d).map(|j| if s >> j & 1 == 1 { pow3[j] } else { 2 * pow3[j] }).sum();
            table[idx] as f64 / denom
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact Shapley values from a full value table indexed by coalition mask.
/// Each feature's weighted marginals are summed in sorted order, so features
/// with identical marginal multisets get bit-identical values.
pub fn shapley_from_values(values: &[f64], d: usize) -> Vec<f64> {
    assert_eq!(values.len(), 1 << d);
    let weights: Vec<f64> = (0..d).map(|s| 1.0 / (d as f64 * binomial(d - 1, s))).collect();
    let mut terms = Vec::with_capacity(1 << d.saturating_sub(1));
    (0..d)
        .map(|j| {
            let bit = 1usize << j;
            terms.clear();
            for s in 0..values.len() {
                if s & bit == 0 {
                    let size = s.count_ones() as usize;
                    terms.push(weights[size] * (values[s | bit] - values[s]));
                }
            }
            terms.sort_by(f64::total_cmp);
            terms.iter().sum()
        })
        .collect()
}

/// Exact Shapley values by enumeration of all coalitions.
pub fn exact_shapley(
    model: &dyn Classifier,
    mapping: &FeatureMapping,
    x: &[f64],
    background: &Matrix,
    feature_limit: usize,
) -> Result<ShapleyValues> {
    let d = mapping.n_features();
    if d > feature_limit {
        return Err(Error::TooManyFeatures {
            features: d,
            limit: feature_limit,
        });
    }
    let values = coalition_values(model, mapping, x, background)?;
    Ok(ShapleyValues {
        phi: shapley_from_values(&values, d),
        empty: values[0],
        full: values[values.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyValues {
    pub phi: Vec<f64>,
    /// Value of the empty coalition: mean background probability.
    pub empty: f64,
    /// Value of the full coalition: the instance's probability.
    pub full: f64,
}

/// Permutation-sampling estimate. The residual `v(all) - v(empty) - sum(phi)`
/// is spread evenly so the values add up.
pub fn sampled_shapley(
    model: &dyn Classifier,
    mapping: &FeatureMapping,
    x: &[f64],
    background: &Matrix,
    n_permutations: usize,
    rng: &mut seed::Rng,
) -> Result<ShapleyValues> {
    let d = mapping.n_features();
    if d > MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            features: d,
            limit: MAX_FEATURES,
        });
    }
    if n_permutations == 0 {
        return Err(Error::Invalid("n_permutations must be at least 1".into()));
    }
    if background.n_rows() == 0 {
        return Err(Error::Empty("background"));
    }
    let full_mask: Coalition = if d == 64 { u64::MAX } else { (1u64 << d) - 1 };
    let mut cache: HashMap<Coalition, f64> = HashMap::new();
    let mut value = |s: Coalition| *cache.entry(s).or_insert_with(|| coalition_value(model, mapping, x, s, background));
    let empty = value(0);
    let full = value(full_mask);
    let mut phi = vec![0.0; d];
    let mut order: Vec<usize> = (0..d).collect();
    for _ in 0..n_permutations {
        order.shuffle(rng);
        let (mut s, mut prev) = (0, empty);
        for &j in &order {
            s |= 1 << j;
            let cur = value(s);
            phi[j] += cur - prev;
            prev = cur;
        }
    }
    phi.iter_mut().for_each(|p| *p /= n_permutations as f64);
    if d > 0 {
        let residual = (full - empty - phi.iter().sum::<f64>()) / d as f64;
        phi.iter_mut().for_each(|p| *p += residual);
    }
    Ok(ShapleyValues { phi, empty, full })
}

/// Draws `size` distinct training rows (all rows if fewer), kept in training
/// order.
pub fn sample_background(train: &EncodedDataset, size: usize, seed: u64) -> Matrix {
    let n = train.len();
    let mut idx = if size >= n {
        (0..n).collect()
    } else {
        index::sample(&mut seed::rng(seed), n, size).into_vec()
    };
    idx.sort_unstable();
    let mut m = Matrix::with_cols(train.matrix.n_cols());
    for i in idx {
        m.push_row(train.row(i));
    }
    m
}

#[derive(Debug, Clone)]
pub struct ShapExplainer {
    mapping: Arc<FeatureMapping>,
    background: Matrix,
    config: ShapConfig,
}

impl ShapExplainer {
    pub fn new(train: &EncodedDataset, config: ShapConfig) -> Result<Self> {
        let background = sample_background(train, config.background_size, config.seed);
        Self::with_background(Arc::clone(&train.mapping), background, config)
    }

    pub fn with_background(mapping: Arc<FeatureMapping>, background: Matrix, config: ShapConfig) -> Result<Self> {
        if background.n_rows() == 0 {
            return Err(Error::Empty("background"));
        }
        if background.n_cols() != mapping.n_columns() {
            return Err(Error::Arity {
                expected: mapping.n_columns(),
                found: background.n_cols(),
            });
        }
        if config.mode == ShapMode::Exact && mapping.n_features() > config.exact_feature_limit {
            return Err(Error::TooManyFeatures {
                features: mapping.n_features(),
                limit: config.exact_feature_limit,
            });
        }
        Ok(Self {
            mapping,
            background,
            config,
        })
    }

    pub fn background(&self) -> &Matrix {
        &self.background
    }

    pub fn config(&self) -> &ShapConfig {
        &self.config
    }

    pub fn uses_exact(&self) -> bool {
        match self.config.mode {
            ShapMode::Exact => true,
            ShapMode::Sampled => false,
            ShapMode::Auto => self.mapping.n_features() <= self.config.exact_feature_limit,
        }
    }

    pub fn explain(&self, model: &dyn Classifier, x: &[f64], instance: usize) -> Result<Attribution> {
        if x.len() != self.mapping.n_columns() || model.n_inputs() != x.len() {
            return Err(Error::Arity {
                expected: self.mapping.n_columns(),
                found: x.len(),
            });
        }
        let values = if self.uses_exact() {
            exact_shapley(model, &self.mapping, x, &self.background, self.config.exact_feature_limit)?
        } else {
            let mut rng = seed::rng(seed::for_instance(self.config.seed, instance));
            sampled_shapley(model, &self.mapping, x, &self.background, self.config.n_permutations, &mut rng)?
        };
        Ok(Attribution {
            instance,
            method: Method::Shap,
            features: self.mapping.feature_names(),
            contributions: values.phi,
            intercept: values.empty,
            prediction: values.full,
            surrogate: None,
        })
    }

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
