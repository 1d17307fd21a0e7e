use serde::Serialize;

use super::encode::{EncodedDataset, FeatureMapping, FeatureValue};
use super::schema::FeatureKind;

/// Training-split summary of one original feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureStats {
    Numeric {
        mean: f64,
        std: f64,
        min: f64,
        max: f64,
        median: f64,
        /// Median absolute deviation from the median.
        mad: f64,
        /// Sorted distinct observed values.
        #[serde(skip)]
        values: Vec<f64>,
    },
    Categorical {
        /// Relative frequency of each declared category.
        frequencies: Vec<f64>,
        mode: usize,
        /// Categories observed at least once, in declared order.
        #[serde(skip)]
        observed: Vec<usize>,
    },
}

impl FeatureStats {
    /// Replacement used when a feature is "removed": mean or mode.
    pub fn baseline(&self) -> FeatureValue {
        match self {
            FeatureStats::Numeric { mean, .. } => FeatureValue::Numeric(*mean),
            FeatureStats::Categorical { mode, .. } => FeatureValue::Category(*mode),
        }
    }
}

/// Per-feature and per-column statistics of a training split.
#[derive(Debug, Clone)]
pub struct TrainingStats {
    pub features: Vec<FeatureStats>,
    pub column_means: Vec<f64>,
}

impl TrainingStats {
    pub fn from_dataset(train: &EncodedDataset) -> Self {
        let mapping = &train.mapping;
        let n = train.len();
        let features = (0..mapping.n_features())
            .map(|j| feature_stats(train, mapping, j))
            .collect();
        let mut column_means = vec![0.0; mapping.n_columns()];
        for row in train.matrix.rows() {
            for (m, v) in column_means.iter_mut().zip(row) {
                *m += v;
            }
        }
        if n > 0 {
            column_means.iter_mut().for_each(|m| *m /= n as f64);
        }
        Self {
            features,
            column_means,
        }
    }

    pub fn baseline_values(&self) -> Vec<FeatureValue> {
        self.features.iter().map(FeatureStats::baseline).collect()
    }
}

fn feature_stats(train: &EncodedDataset, mapping: &FeatureMapping, j: usize) -> FeatureStats {
    let block = mapping.block(j);
    let n = train.len();
    match mapping.features()[j].kind {
        FeatureKind::Numeric => {
            let mut xs: Vec<f64> = train.matrix.rows().map(|r| r[block.start]).collect();
            if xs.is_empty() {
                return FeatureStats::Numeric {
                    mean: 0.0,
                    std: 0.0,
                    min: 0.0,
                    max: 0.0,
                    median: 0.0,
                    mad: 0.0,
                    values: Vec::new(),
                };
            }
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            xs.sort_by(f64::total_cmp);
            let median = median_sorted(&xs);
            let mut dev: Vec<f64> = xs.iter().map(|x| (x - median).abs()).collect();
            dev.sort_by(f64::total_cmp);
            let mad = median_sorted(&dev);
            let min = xs[0];
            let max = xs[xs.len() - 1];
            xs.dedup();
            FeatureStats::Numeric {
                mean,
                std: var.sqrt(),
                min,
                max,
                median,
                mad,
                values: xs,
            }
        }
        FeatureKind::Categorical => {
            let mut counts = vec![0usize; block.len()];
            for r in train.matrix.rows() {
                if let FeatureValue::Category(k) = mapping.value(r, j) {
                    counts[k] += 1;
                }
            }
            let mode = counts
                .iter()
                .enumerate()
                .fold(0, |best, (k, &c)| if c > counts[best] { k } else { best });
            let frequencies = counts
                .iter()
                .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
                .collect();
            let observed = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, _)| k)
                .collect();
            FeatureStats::Categorical {
                frequencies,
                mode,
                observed,
            }
        }
    }
}

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::encode::Matrix;
    use crate::data::schema::FeatureSpec;
    use std::sync::Arc;

    #[test]
    fn summarizes_numeric_and_categorical() {
        let mapping = Arc::new(FeatureMapping::new(vec![
            FeatureSpec::numeric("x"),
            FeatureSpec::categorical("c", ["a", "b", "z"]),
        ]));
        let rows = [
            [1.0, 1.0, 0.0, 0.0],
            [2.0, 0.0, 1.0, 0.0],
            [2.0, 0.0, 1.0, 0.0],
            [7.0, 0.0, 1.0, 0.0],
        ];
        let ds = EncodedDataset {
            matrix: Matrix::from_rows(&rows),
            labels: vec![0; 4],
            row_ids: (0..4).collect(),
            mapping,
        };
        let stats = TrainingStats::from_dataset(&ds);
        match &stats.features[0] {
            FeatureStats::Numeric {
                mean,
                median,
                mad,
                values,
                min,
                max,
                ..
            } => {
                assert_eq!(*mean, 3.0);
                assert_eq!(*median, 2.0);
                // |x - 2| = 1, 0, 0, 5 -> median 0.5
                assert_eq!(*mad, 0.5);
                assert_eq!(values, &vec![1.0, 2.0, 7.0]);
                assert_eq!((*min, *max), (1.0, 7.0));
            }
            other => panic!("unexpected {other:?}"),
        }
        match &stats.features[1] {
            FeatureStats::Categorical {
                frequencies,
                mode,
                observed,
            } => {
                assert_eq!(frequencies, &vec![0.25, 0.75, 0.0]);
                assert_eq!(*mode, 1);
                assert_eq!(observed, &vec![0, 1]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(stats.column_means, vec![3.0, 0.25, 0.75, 0.0]);
    }
}
