//! The black-box classifier under audit and a transparent linear oracle.

mod forest;
mod linear;
mod snapshot;

pub use forest::{train_random_forest, DecisionTree, ForestConfig, Node, RandomForest, LEAF};
pub use linear::{sigmoid, train_linear, train_linear_with, LinearConfig, LinearModel};
pub use snapshot::{load_snapshot, save_snapshot, SNAPSHOT_VERSION};

use serde::{Deserialize, Serialize};

use crate::data::{EncodedDataset, Matrix};
use crate::error::{Error, Result};

/// Anything that maps an encoded row to a favorable-class score. Explainers
/// only see this interface. Callers guarantee the row arity.
pub trait Classifier: Sync {
    fn n_inputs(&self) -> usize;

    fn predict_proba(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_proba(x) >= 0.5)
    }

    /// `predict_proba` for every row; implementations may batch.
    fn predict_proba_rows(&self, rows: &Matrix) -> Vec<f64> {
        rows.rows().map(|r| self.predict_proba(r)).collect()
    }

    /// Tree structure, when the model is a forest.
    fn as_forest(&self) -> Option<&RandomForest> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Forest,
    Linear,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Forest => "forest",
            ModelKind::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlackBoxModel {
    Forest(RandomForest),
    Linear(LinearModel),
}

impl BlackBoxModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            BlackBoxModel::Forest(_) => ModelKind::Forest,
            BlackBoxModel::Linear(_) => ModelKind::Linear,
        }
    }

    pub fn training_seed(&self) -> u64 {
        match self {
            BlackBoxModel::Forest(f) => f.config().seed,
            BlackBoxModel::Linear(l) => l.config().seed,
        }
    }

    /// Probability of the favorable class, with an arity check.
    pub fn try_predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_inputs() {
            return Err(Error::Arity {
                expected: self.n_inputs(),
                found: x.len(),
            });
        }
        Ok(Classifier::predict_proba(self, x))
    }
}

impl Classifier for BlackBoxModel {
    fn n_inputs(&self) -> usize {
        match self {
            BlackBoxModel::Forest(f) => f.n_inputs(),
            BlackBoxModel::Linear(l) => l.weights().len(),
        }
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            BlackBoxModel::Forest(f) => f.predict_proba(x),
            BlackBoxModel::Linear(l) => l.predict_proba(x),
        }
    }

    fn predict_proba_rows(&self, rows: &Matrix) -> Vec<f64> {
        match self {
            BlackBoxModel::Forest(f) => f.predict_proba_rows(rows),
            BlackBoxModel::Linear(l) => rows.rows().map(|r| l.predict_proba(r)).collect(),
        }
    }

    fn as_forest(&self) -> Option<&RandomForest> {
        match self {
            BlackBoxModel::Forest(f) => Some(f),
            BlackBoxModel::Linear(_) => None,
        }
    }
}

impl Classifier for RandomForest {
    fn n_inputs(&self) -> usize {
        RandomForest::n_inputs(self)
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        RandomForest::predict_proba(self, x)
    }

    fn predict_proba_rows(&self, rows: &Matrix) -> Vec<f64> {
        RandomForest::predict_proba_rows(self, rows)
    }

    fn as_forest(&self) -> Option<&RandomForest> {
        Some(self)
    }
}

impl Classifier for LinearModel {
    fn n_inputs(&self) -> usize {
        self.weights().len()
    }

    fn predict_proba(&self, x: &[f64]) -> f64 {
        LinearModel::predict_proba(self, x)
    }
}

pub fn predict_all(model: &dyn Classifier, data: &EncodedDataset) -> Vec<u8> {
    model
        .predict_proba_rows(&data.matrix)
        .into_iter()
        .map(|p| u8::from(p >= 0.5))
        .collect()
}

/// Fraction of rows whose predicted label equals the true label.
pub fn accuracy(model: &dyn Classifier, test: &EncodedDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let correct = test
        .matrix
        .rows()
        .zip(&test.labels)
        .filter(|(r, &y)| model.predict(r) == y)
        .count();
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureMapping, FeatureSpec, Matrix};
    use std::sync::Arc;

    struct Fixed(Vec<f64>);

    impl Classifier for Fixed {
        fn n_inputs(&self) -> usize {
            1
        }
        fn predict_proba(&self, x: &[f64]) -> f64 {
            self.0[x[0] as usize]
        }
    }

    fn dataset(labels: Vec<u8>) -> EncodedDataset {
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64]).collect();
        EncodedDataset {
            matrix: Matrix::from_rows(&rows),
            row_ids: (0..labels.len()).collect(),
            labels,
            mapping: Arc::new(FeatureMapping::new(vec![FeatureSpec::numeric("i")])),
        }
    }

    #[test]
    fn accuracy_extremes() {
        let labels = vec![1, 0, 1, 1, 0];
        let ds = dataset(labels.clone());
        let perfect = Fixed(labels.iter().map(|&l| l as f64).collect());
        let inverted = Fixed(labels.iter().map(|&l| 1.0 - l as f64).collect());
        assert_eq!(accuracy(&perfect, &ds).unwrap(), 1.0);
        assert_eq!(accuracy(&inverted, &ds).unwrap(), 0.0);
        assert!(matches!(accuracy(&perfect, &ds.subset(&[])), Err(Error::Empty(_))));
    }

    #[test]
    fn threshold_consistency() {
        let m = Fixed(vec![0.49999, 0.5, 0.7, 0.0]);
        for i in 0..4 {
            let x = [i as f64];
            assert_eq!(m.predict(&x) == 1, m.predict_proba(&x) >= 0.5);
        }
    }

    #[test]
    fn arity_is_checked() {
        let m = BlackBoxModel::Linear(LinearModel::from_parameters(vec![1.0, 2.0], 0.0));
        assert!(matches!(m.try_predict_proba(&[1.0]), Err(Error::Arity { .. })));
        assert!(m.try_predict_proba(&[0.0, 0.0]).unwrap() == 0.5);
    }
}
