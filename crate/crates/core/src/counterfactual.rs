//! Single counterfactual per instance: random candidates built from observed
//! training values, then the closest valid ones are pulled back towards the
//! factual by reverting changed features and moving numeric values as close to
//! the factual as validity allows.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EncodedDataset, FeatureMapping, FeatureStats, FeatureValue, Matrix, TrainingStats};
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfConfig {
    /// Class the counterfactual must receive.
    pub target: u8,
    /// Rounds of random candidates before giving up.
    pub max_iterations: usize,
    /// Random candidates per round.
    pub pool_size: usize,
    /// Closest valid candidates that get refined.
    pub refine_top: usize,
    pub seed: u64,
}

impl Default for CfConfig {
    fn default() -> Self {
        Self {
            target: 1,
            max_iterations: 20,
            pool_size: 500,
            refine_top: 10,
            seed: 42,
        }
    }
}

/// Values a feature may take in a counterfactual.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Numeric {
        /// Sorted distinct training values.
        values: Vec<f64>,
        /// Proximity scale: training MAD, or 1 when that is 0.
        scale: f64,
        /// `max - min` of the training values, or 1 when that is 0.
        range: f64,
    },
    Categorical {
        categories: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub domains: Vec<Domain>,
}

impl SearchSpace {
    pub fn from_stats(stats: &TrainingStats) -> Self {
        let domains = stats
            .features
            .iter()
            .map(|s| match s {
                FeatureStats::Numeric { values, mad, min, max, .. } => Domain::Numeric {
                    values: values.clone(),
                    scale: if *mad > 0.0 { *mad } else { 1.0 },
                    range: if max > min { max - min } else { 1.0 },
                },
                FeatureStats::Categorical { observed, .. } => Domain::Categorical {
                    categories: observed.clone(),
                },
            })
            .collect();
        Self { domains }
    }

    /// Mixed distance: numeric `|a - b| / MAD`, categorical 0/1, summed.
    pub fn proximity(&self, a: &[FeatureValue], b: &[FeatureValue]) -> f64 {
        self.domains
            .iter()
            .zip(a.iter().zip(b))
            .map(|(d, pair)| self.feature_cost(d, pair))
            .sum()
    }

    fn feature_cost(&self, domain: &Domain, pair: (&FeatureValue, &FeatureValue)) -> f64 {
        match (domain, pair) {
            (Domain::Numeric { scale, .. }, (FeatureValue::Numeric(a), FeatureValue::Numeric(b))) => (a - b).abs() / scale,
            (_, (a, b)) => f64::from(u8::from(a != b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    /// Position of the factual row in the evaluated set.
    pub instance: usize,
    pub factual: Vec<String>,
    pub counterfactual: Vec<String>,
    pub valid: bool,
    pub changed: Vec<String>,
    pub proximity: f64,
    /// Numeric columns min-max scaled by training ranges.
    pub encoded_euclidean: f64,
    pub encoded_euclidean_unscaled: f64,
    pub factual_probability: f64,
    pub counterfactual_probability: f64,
}

/// Names of features whose values differ.
pub fn changed_features(mapping: &FeatureMapping, a: &[FeatureValue], b: &[FeatureValue]) -> Vec<String> {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(j, _)| mapping.features()[j].name.clone())
        .collect()
}

/// Euclidean distance between encoded rows, numeric columns divided by the
/// training range of their feature.
pub fn encoded_euclidean(mapping: &FeatureMapping, space: &SearchSpace, a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (j, d) in space.domains.iter().enumerate() {
        let block = mapping.block(j);
        let range = match d {
            Domain::Numeric { range, .. } => *range,
            Domain::Categorical { .. } => 1.0,
        };
        for c in block {
            sum += ((a[c] - b[c]) / range).powi(2);
        }
    }
    sum.sqrt()
}

pub fn encoded_euclidean_unscaled(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct CfExplainer {
    mapping: Arc<FeatureMapping>,
    space: Arc<SearchSpace>,
    config: CfConfig,
}

struct Candidate {
    values: Vec<FeatureValue>,
    proximity: f64,
    order: usize,
}

impl CfExplainer {
    pub fn new(mapping: Arc<FeatureMapping>, space: Arc<SearchSpace>, config: CfConfig) -> Result<Self> {
        if config.pool_size == 0 || config.refine_top == 0 {
            return Err(Error::Invalid("counterfactual pool sizes must be at least 1".into()));
        }
        if space.domains.len() != mapping.n_features() {
            return Err(Error::Arity {
                expected: mapping.n_features(),
                found: space.domains.len(),
            });
        }
        Ok(Self { mapping, space, config })
    }

    pub fn config(&self) -> &CfConfig {
        &self.config
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn encode_all(&self, rows: &[Vec<FeatureValue>]) -> Matrix {
        let mut m = Matrix::with_cols(self.mapping.n_columns());
        let mut buf = vec![0.0; self.mapping.n_columns()];
        for r in rows {
            buf.fill(0.0);
            self.mapping.write_values(r, &mut buf);
            m.push_row(&buf);
        }
        m
    }

    fn valid_mask(&self, model: &dyn Classifier, rows: &[Vec<FeatureValue>]) -> Vec<bool> {
        if rows.is_empty() {
            return Vec::new();
        }
        let target = self.config.target;
        model
            .predict_proba_rows(&self.encode_all(rows))
            .into_iter()
            .map(|p| u8::from(p >= 0.5) == target)
            .collect()
    }

    fn random_candidate(&self, factual: &[FeatureValue], rng: &mut seed::Rng) -> Vec<FeatureValue> {
        let d = factual.len();
        let k = rng.gen_range(1..=d);
        let mut out = factual.to_vec();
        for j in index::sample(rng, d, k) {
            out[j] = match &self.space.domains[j] {
                Domain::Numeric { values, .. } if !values.is_empty() => {
                    FeatureValue::Numeric(values[rng.gen_range(0..values.len())])
                }
                Domain::Categorical { categories } if !categories.is_empty() => {
                    FeatureValue::Category(categories[rng.gen_range(0..categories.len())])
                }
                _ => factual[j],
            };
        }
        out
    }

    /// Reverts changed features one at a time, always taking the valid
    /// reversion that saves the most proximity, until none is valid.
    fn revert(&self, model: &dyn Classifier, factual: &[FeatureValue], cf: &mut Vec<FeatureValue>) {
        loop {
            let changed: Vec<usize> = (0..cf.len()).filter(|&j| cf[j] != factual[j]).collect();
            let trials: Vec<Vec<FeatureValue>> = changed
                .iter()
                .map(|&j| {
                    let mut t = cf.clone();
                    t[j] = factual[j];
                    t
                })
                .collect();
            let valid = self.valid_mask(model, &trials);
            let best = trials
                .into_iter()
                .zip(valid)
                .filter(|(_, v)| *v)
                .map(|(t, _)| (self.space.proximity(factual, &t), t))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            match best {
                Some((_, t)) => *cf = t,
                None => return,
            }
        }
    }

    /// Moves each changed numeric feature to the observed value closest to
    /// the factual that keeps the candidate valid.
    fn tighten(&self, model: &dyn Classifier, factual: &[FeatureValue], cf: &mut [FeatureValue]) {
        for j in 0..cf.len() {
            let (FeatureValue::Numeric(x), FeatureValue::Numeric(cur)) = (factual[j], cf[j]) else {
                continue;
            };
            if x == cur {
                continue;
            }
            let Domain::Numeric { values, .. } = &self.space.domains[j] else {
                continue;
            };
            let limit = (cur - x).abs();
            let mut options: Vec<f64> = values.iter().copied().filter(|v| (v - x).abs() < limit).collect();
            options.sort_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()).then(a.total_cmp(b)));
            let trials: Vec<Vec<FeatureValue>> = options
                .iter()
                .map(|&v| {
                    let mut t = cf.to_vec();
                    t[j] = FeatureValue::Numeric(v);
                    t
                })
                .collect();
            let valid = self.valid_mask(model, &trials);
            if let Some(i) = valid.iter().position(|v| *v) {
                cf[j] = FeatureValue::Numeric(options[i]);
            }
        }
    }

    /// Search for one valid counterfactual of the encoded row `x`.
    pub fn find(&self, model: &dyn Classifier, x: &[f64], instance: usize) -> Result<Counterfactual> {
        if x.len() != self.mapping.n_columns() || model.n_inputs() != x.len() {
            return Err(Error::Arity {
                expected: self.mapping.n_columns(),
                found: x.len(),
            });
        }
        let p0 = model.predict_proba(x);
        if u8::from(p0 >= 0.5) == self.config.target {
            return Err(Error::AlreadyTarget);
        }
        let factual = self.mapping.values(x);
        let mut rng = seed::rng(seed::for_instance(self.config.seed, instance));

        let mut found: Vec<Candidate> = Vec::new();
        for _ in 0..self.config.max_iterations {
            let pool: Vec<Vec<FeatureValue>> = (0..self.config.pool_size)
                .map(|_| self.random_candidate(&factual, &mut rng))
                .collect();
            let valid = self.valid_mask(model, &pool);
            for (values, ok) in pool.into_iter().zip(valid) {
                if ok && !found.iter().any(|c| c.values == values) {
                    found.push(Candidate {
                        proximity: self.space.proximity(&factual, &values),
                        order: found.len(),
                        values,
                    });
                }
            }
            if !found.is_empty() {
                break;
            }
        }
        if found.is_empty() {
            return Err(Error::NoCounterfactual);
        }
        found.sort_by(|a, b| a.proximity.total_cmp(&b.proximity).then(a.order.cmp(&b.order)));
        found.truncate(self.config.refine_top);

        let mut best: Option<(f64, usize, Vec<FeatureValue>)> = None;
        for cand in found {
            let mut cf = cand.values;
            self.revert(model, &factual, &mut cf);
            self.tighten(model, &factual, &mut cf);
            self.revert(model, &factual, &mut cf);
            let prox = self.space.proximity(&factual, &cf);
            let n_changed = cf.iter().zip(&factual).filter(|(a, b)| a != b).count();
            let better = match &best {
                None => true,
                Some((bp, bn, _)) => prox < *bp || (prox == *bp && n_changed < *bn),
            };
            if better {
                best = Some((prox, n_changed, cf));
            }
        }
        let (proximity, _, cf) = best.expect("at least one refined candidate");
        let encoded = self.mapping.encode_values(&cf);
        let p1 = model.predict_proba(&encoded);
        let decode = |v: &[FeatureValue]| -> Vec<String> {
            v.iter().enumerate().map(|(j, v)| self.mapping.format_value(j, *v)).collect()
        };
        Ok(Counterfactual {
            instance,
            factual: decode(&factual),
            counterfactual: decode(&cf),
            valid: (u8::from(p1 >= 0.5) == self.config.target) && u8::from(p0 >= 0.5) != u8::from(p1 >= 0.5),
            changed: changed_features(&self.mapping, &factual, &cf),
            proximity,
            encoded_euclidean: encoded_euclidean(&self.mapping, &self.space, x, &encoded),
            encoded_euclidean_unscaled: encoded_euclidean_unscaled(x, &encoded),
            factual_probability: p0,
            counterfactual_probability: p1,
        })
    }

    /// Counterfactuals for the rows at `positions`, in parallel; each entry is
    /// the search result for that row.
    pub fn find_rows(
        &self,
        model: &dyn Classifier,
        data: &EncodedDataset,
        positions: &[usize],
    ) -> Vec<Result<Counterfactual>> {
        positions
            .par_iter()
            .map(|&i| {
                if i >= data.len() {
                    return Err(Error::IndexOutOfRange { index: i, len: data.len() });
                }
                self.find(model, data.row(i), i)
            })
            .collect()
    }
}

pub fn find_counterfactual(
    model: &dyn Classifier,
    x: &[f64],
    mapping: Arc<FeatureMapping>,
    space: Arc<SearchSpace>,
    config: &CfConfig,
) -> Result<Counterfactual> {
    CfExplainer::new(mapping, space, config.clone())?.find(model, x, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSpec;
    use proptest::prelude::*;

    fn dataset(mapping: Arc<FeatureMapping>, rows: Vec<Vec<f64>>) -> EncodedDataset {
        let n = rows.len();
        EncodedDataset {
            matrix: Matrix::from_rows(&rows),
            labels: vec![0; n],
            row_ids: (0..n).collect(),
            mapping,
        }
    }

    struct Threshold;

    impl Classifier for Threshold {
        fn n_inputs(&self) -> usize {
            2
        }
        fn predict_proba(&self, x: &[f64]) -> f64 {
            f64::from(u8::from(x[0] > 50.0))
        }
    }

    #[test]
    fn threshold_fixture_moves_to_smallest_observed_value() {
        let mapping = Arc::new(FeatureMapping::new(vec![
            FeatureSpec::numeric("hours"),
            FeatureSpec::numeric("age"),
        ]));
        let hours = [20.0, 35.0, 40.0, 45.0, 50.0, 52.0, 55.0, 60.0, 70.0, 99.0];
        let rows: Vec<Vec<f64>> = hours.iter().enumerate().map(|(i, h)| vec![*h, 20.0 + i as f64]).collect();
        let stats = TrainingStats::from_dataset(&dataset(mapping.clone(), rows));
        let space = Arc::new(SearchSpace::from_stats(&stats));
        let cf = find_counterfactual(&Threshold, &[40.0, 30.0], mapping, space, &CfConfig::default()).unwrap();
        assert!(cf.valid);
        assert_eq!(cf.changed, vec!["hours".to_string()]);
        assert_eq!(cf.counterfactual[0], "52");
    }

    #[test]
    fn already_favorable_is_rejected() {
        let mapping = Arc::new(FeatureMapping::new(vec![FeatureSpec::numeric("hours"), FeatureSpec::numeric("age")]));
        let rows = vec![vec![10.0, 1.0], vec![60.0, 2.0]];
        let stats = TrainingStats::from_dataset(&dataset(mapping.clone(), rows));
        let space = Arc::new(SearchSpace::from_stats(&stats));
        let r = find_counterfactual(&Threshold, &[70.0, 1.0], mapping, space, &CfConfig::default());
        assert!(matches!(r, Err(Error::AlreadyTarget)));
    }

    #[test]
    fn distances() {
        let mapping = FeatureMapping::new(vec![
            FeatureSpec::numeric("a"),
            FeatureSpec::categorical("c", ["p", "q", "r"]),
        ]);
        let space = SearchSpace {
            domains: vec![
                Domain::Numeric { values: vec![0.0, 10.0], scale: 2.0, range: 10.0 },
                Domain::Categorical { categories: vec![0, 1, 2] },
            ],
        };
        let x = [3.0, 1.0, 0.0, 0.0];
        let y = [3.0, 0.0, 0.0, 1.0];
        let z = [8.0, 1.0, 0.0, 0.0];
        assert_eq!(encoded_euclidean(&mapping, &space, &x, &x), 0.0);
        assert_eq!(encoded_euclidean(&mapping, &space, &x, &y), 2f64.sqrt());
        assert_eq!(encoded_euclidean(&mapping, &space, &x, &z), 0.5);
        assert_eq!(encoded_euclidean_unscaled(&x, &z), 5.0);
        let (vx, vy) = (mapping.values(&x), mapping.values(&y));
        assert_eq!(space.proximity(&vx, &vy), 1.0);
        assert_eq!(space.proximity(&vx, &mapping.values(&z)), 2.5);
        assert!(changed_features(&mapping, &vx, &vx).is_empty());
        assert_eq!(changed_features(&mapping, &vx, &vy), vec!["c".to_string()]);
    }

    /// Truth table over three binary categorical features.
    struct Table(u8);

    impl Classifier for Table {
        fn n_inputs(&self) -> usize {
            6
        }
        fn predict_proba(&self, x: &[f64]) -> f64 {
            let idx = (0..3).fold(0, |acc, j| acc | (usize::from(x[2 * j + 1] == 1.0) << j));
            f64::from(self.0 >> idx & 1)
        }
    }

    fn binary_fixture() -> (Arc<FeatureMapping>, Arc<SearchSpace>) {
        let mapping = Arc::new(FeatureMapping::new(
            (0..3).map(|j| FeatureSpec::categorical(format!("b{j}"), ["0", "1"])).collect(),
        ));
        let rows: Vec<Vec<f64>> = (0..8usize)
            .map(|p| {
                let mut r = vec![0.0; 6];
                for j in 0..3 {
                    r[2 * j + (p >> j & 1)] = 1.0;
                }
                r
            })
            .collect();
        let stats = TrainingStats::from_dataset(&dataset(mapping.clone(), rows));
        (mapping, Arc::new(SearchSpace::from_stats(&stats)))
    }

    #[test]
    fn minimal_on_every_binary_fixture() {
        let (mapping, space) = binary_fixture();
        let explainer = CfExplainer::new(mapping, space, CfConfig::default()).unwrap();
        for table in 1u16..255 {
            let model = Table(table as u8);
            for p in 0..8usize {
                if table >> p & 1 == 1 {
                    continue;
                }
                let oracle = (0..8usize)
                    .filter(|q| table >> q & 1 == 1)
                    .map(|q| (p ^ q).count_ones() as usize)
                    .min()
                    .unwrap();
                let mut x = vec![0.0; 6];
                for j in 0..3 {
                    x[2 * j + (p >> j & 1)] = 1.0;
                }
                let cf = explainer.find(&model, &x, p).unwrap();
                assert!(cf.valid);
                assert_eq!(cf.changed.len(), oracle, "table {table:08b} point {p}");
            }
        }
    }

    proptest! {
        #[test]
        fn reversion_keeps_validity_and_never_moves_away(table in 1u8..255, start in 0usize..8, seed in 0u64..500) {
            let (mapping, space) = binary_fixture();
            let explainer = CfExplainer::new(mapping.clone(), space.clone(), CfConfig::default()).unwrap();
            let model = Table(table);
            let factual: Vec<FeatureValue> = (0..3).map(|j| FeatureValue::Category(start >> j & 1)).collect();
            let mut rng = seed::rng(seed);
            let mut cf = explainer.random_candidate(&factual, &mut rng);
            prop_assume!(explainer.valid_mask(&model, &[cf.clone()])[0]);
            let before = space.proximity(&factual, &cf);
            explainer.revert(&model, &factual, &mut cf);
            prop_assert!(explainer.valid_mask(&model, &[cf.clone()])[0]);
            prop_assert!(space.proximity(&factual, &cf) <= before);
        }

        #[test]
        fn euclidean_symmetry(a in proptest::collection::vec(0.0f64..5.0, 4), b in proptest::collection::vec(0.0f64..5.0, 4)) {
            prop_assert_eq!(encoded_euclidean_unscaled(&a, &b), encoded_euclidean_unscaled(&b, &a));
        }
    }
}
