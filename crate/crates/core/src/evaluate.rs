//! Faithfulness curves for global feature rankings and Cramér's V
//! association between categorical features.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{AggregatedAttribution, CfGroupSummary};
use crate::data::{FeatureMapping, FeatureValue, Matrix, RawDataset, TrainingStats};
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::seed;

/// Feature indices ordered by descending score, ties in schema order.
pub fn rank_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Features by descending absolute signed mean.
pub fn rank_features(agg: &AggregatedAttribution) -> Vec<String> {
    let scores: Vec<f64> = agg.signed_mean.iter().map(|v| v.abs()).collect();
    rank_by_scores(&scores).into_iter().map(|j| agg.features[j].clone()).collect()
}

/// Features by descending change percent.
pub fn cf_rank_features(summary: &CfGroupSummary) -> Vec<String> {
    rank_by_scores(&summary.change_percent)
        .into_iter()
        .map(|j| summary.features[j].clone())
        .collect()
}

/// Resolves feature names to schema indices.
pub fn ranking_indices(mapping: &FeatureMapping, ranking: &[String]) -> Result<Vec<usize>> {
    ranking
        .iter()
        .map(|f| mapping.feature_index(f).ok_or_else(|| Error::UnknownFeature(f.clone())))
        .collect()
}

/// Training mean for numeric features, training mode for categorical ones.
pub fn feature_baselines(stats: &TrainingStats) -> Vec<FeatureValue> {
    stats.features.iter().map(|s| s.baseline()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AopcPoint {
    pub rank: usize,
    pub aopc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AopcCurve {
    pub method: String,
    pub points: Vec<AopcPoint>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl AopcCurve {
    /// Value at the last rank.
    pub fn score(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.aopc)
    }
}

/// Per-instance cumulative-average drop at ranks 1..=k.
fn instance_curve(
    model: &dyn Classifier,
    mapping: &FeatureMapping,
    x: &[f64],
    ranking: &[usize],
    baselines: &[FeatureValue],
) -> Vec<f64> {
    let p0 = model.predict_proba(x);
    // Probability of the class predicted for the untouched instance.
    let class_prob = |p: f64| if p0 >= 0.5 { p } else { 1.0 - p };
    let mut rows = Matrix::with_cols(x.len());
    let mut cur = x.to_vec();
    for &j in ranking {
        mapping.write_value(j, baselines[j], &mut cur);
        rows.push_row(&cur);
    }
    let probs = model.predict_proba_rows(&rows);
    let mut total = 0.0;
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            total += class_prob(p0) - class_prob(p);
            total / (i + 1) as f64
        })
        .collect()
}

/// Mean cumulative-average probability drop when the first `k` features of
/// `ranking` are replaced by their baselines one after another.
pub fn aopc(
    model: &dyn Classifier,
    mapping: &FeatureMapping,
    instances: &Matrix,
    ranking: &[usize],
    baselines: &[FeatureValue],
    k: usize,
    method: impl Into<String>,
) -> Result<AopcCurve> {
    let d = mapping.n_features();
    if k > d || k > ranking.len() {
        return Err(Error::Invalid(format!("cannot perturb {k} of {} ranked features", ranking.len().min(d))));
    }
    if ranking.iter().any(|&j| j >= d) || baselines.len() != d {
        return Err(Error::Arity { expected: d, found: baselines.len() });
    }
    if instances.n_rows() == 0 {
        return Err(Error::Empty("AOPC instance set"));
    }
    let ranking = &ranking[..k];
    let curves: Vec<Vec<f64>> = (0..instances.n_rows())
        .into_par_iter()
        .map(|i| instance_curve(model, mapping, instances.row(i), ranking, baselines))
        .collect();
    let n = curves.len();
    let mut sum = vec![0.0; k];
    for c in &curves {
        for (s, v) in sum.iter_mut().zip(c) {
            *s += v;
        }
    }
    Ok(AopcCurve {
        method: method.into(),
        points: sum
            .into_iter()
            .enumerate()
            .map(|(r, s)| AopcPoint { rank: r + 1, aopc: s / n as f64 })
            .collect(),
        n,
        seed: None,
    })
}

/// Mean AOPC curve over `trials` uniformly random feature orders.
pub fn random_ranking_curve(
    model: &dyn Classifier,
    mapping: &FeatureMapping,
    instances: &Matrix,
    baselines: &[FeatureValue],
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<AopcCurve> {
    if trials == 0 {
        return Err(Error::Invalid("random baseline needs at least one trial".into()));
    }
    let mut rng = seed::rng(seed);
    let mut sum = vec![0.0; k];
    let mut n = 0;
    for _ in 0..trials {
        let mut order: Vec<usize> = (0..mapping.n_features()).collect();
        order.shuffle(&mut rng);
        let c = aopc(model, mapping, instances, &order, baselines, k, "random")?;
        n = c.n;
        for (s, p) in sum.iter_mut().zip(&c.points) {
            *s += p.aopc;
        }
    }
    Ok(AopcCurve {
        method: "random".into(),
        points: sum
            .into_iter()
            .enumerate()
            .map(|(r, s)| AopcPoint { rank: r + 1, aopc: s / trials as f64 })
            .collect(),
        n,
        seed: Some(seed),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let cols = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|r| r.len() != cols) {
            return Err(Error::Invalid("contingency rows differ in length".into()));
        }
        Ok(Self { counts })
    }

    /// Cross-tabulation of two category index columns.
    pub fn from_pairs(a: &[usize], b: &[usize], rows: usize, cols: usize) -> Self {
        let mut counts = vec![vec![0u64; cols]; rows];
        for (&i, &j) in a.iter().zip(b) {
            counts[i][j] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn transposed(&self) -> Self {
        let cols = self.counts.first().map_or(0, Vec::len);
        Self {
            counts: (0..cols).map(|j| self.counts.iter().map(|r| r[j]).collect()).collect(),
        }
    }

    /// Drops all-zero rows and columns.
    fn collapsed(&self) -> Vec<Vec<f64>> {
        let keep_cols: Vec<usize> = (0..self.counts.first().map_or(0, Vec::len))
            .filter(|&j| self.counts.iter().any(|r| r[j] > 0))
            .collect();
        self.counts
            .iter()
            .filter(|r| r.iter().any(|&v| v > 0))
            .map(|r| keep_cols.iter().map(|&j| r[j] as f64).collect())
            .collect()
    }
}

/// Uncorrected Cramér's V.
pub fn cramers_v(table: &ContingencyTable) -> Result<f64> {
    if table.total() == 0 {
        return Err(Error::Degenerate("table has no observations".into()));
    }
    let t = table.collapsed();
    let (r, c) = (t.len(), t[0].len());
    if r < 2 || c < 2 {
        return Err(Error::Degenerate(format!("only {r}x{c} after dropping empty rows and columns")));
    }
    let row_sum: Vec<f64> = t.iter().map(|row| row.iter().sum()).collect();
    let col_sum: Vec<f64> = (0..c).map(|j| t.iter().map(|row| row[j]).sum()).collect();
    let n: f64 = row_sum.iter().sum();
    let mut chi2 = 0.0;
    for (i, row) in t.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = row_sum[i] * col_sum[j] / n;
            if e > 0.0 {
                chi2 += (o - e) * (o - e) / e;
            }
        }
    }
    let v = (chi2 / (n * (r.min(c) - 1) as f64)).sqrt();
    Ok(v.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.features.iter().position(|f| f == a)?;
        let j = self.features.iter().position(|f| f == b)?;
        Some(self.values[i][j])
    }
}

/// Cramér's V for every pair of features of an all-categorical dataset.
pub fn correlation_matrix(disc: &RawDataset) -> Result<CorrelationMatrix> {
    let schema = disc.schema();
    if let Some(f) = schema.features.iter().find(|f| !f.is_categorical()) {
        return Err(Error::Invalid(format!("`{}` is not categorical", f.name)));
    }
    let columns: Vec<Vec<usize>> = schema
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            disc.rows()
                .iter()
                .map(|r| f.category_index(&r[j]).expect("rows are validated on load"))
                .collect()
        })
        .collect();
    let d = columns.len();
    let mut values = vec![vec![1.0; d]; d];
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let vs: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let t = ContingencyTable::from_pairs(
                &columns[i],
                &columns[j],
                schema.features[i].category_list().len(),
                schema.features[j].category_list().len(),
            );
            cramers_v(&t).map_err(|e| {
                Error::Degenerate(format!("{} x {}: {e}", schema.features[i].name, schema.features[j].name))
            })
        })
        .collect::<Result<_>>()?;
    for (&(i, j), v) in pairs.iter().zip(vs) {
        values[i][j] = v;
        values[j][i] = v;
    }
    Ok(CorrelationMatrix {
        features: schema.feature_names(),
        values,
    })
}
