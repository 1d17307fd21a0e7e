use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EncodedDataset, Matrix};
use crate::error::{Error, Result};
use crate::seed;

/// Marker in `Node::feature` for leaves.
pub const LEAF: u32 = u32::MAX;

/// Tree node. Internal nodes send `x[feature] <= threshold` left; leaves store
/// their class in `left`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub feature: u32,
    pub left: u32,
    pub right: u32,
    pub threshold: f64,
}

impl Node {
    fn leaf(class: u8) -> Self {
        Self {
            feature: LEAF,
            left: class as u32,
            right: 0,
            threshold: 0.0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }

    pub fn class(&self) -> u8 {
        self.left as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Snapshot("tree without nodes".into()));
        }
        let n = nodes.len() as u32;
        for node in &nodes {
            if !node.is_leaf() && (node.left >= n || node.right >= n) {
                return Err(Error::Snapshot("child index out of range".into()));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut i = 0usize;
        loop {
            let node = &self.nodes[i];
            if node.is_leaf() {
                return node.class();
            }
            i = if x[node.feature as usize] <= node.threshold {
                node.left
            } else {
                node.right
            } as usize;
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    /// Columns examined per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            bootstrap: true,
            max_features: None,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0
            || self.min_leaf == 0
            || self.max_depth == Some(0)
            || self.max_features == Some(0)
        {
            return Err(Error::Invalid("forest counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Bagged CART trees with Gini splits. The probability of the favorable class
/// is the fraction of trees voting for it.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    config: ForestConfig,
    n_inputs: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn from_parts(config: ForestConfig, n_inputs: usize, trees: Vec<DecisionTree>) -> Self {
        Self {
            config,
            n_inputs,
            trees,
        }
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn votes(&self, x: &[f64]) -> usize {
        self.trees.iter().map(|t| t.predict(x) as usize).sum()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.votes(x) as f64 / self.trees.len() as f64
    }

    /// Same values as `predict_proba` per row, walking one tree over all rows
    /// at a time.
    pub fn predict_proba_rows(&self, rows: &Matrix) -> Vec<f64> {
        const LANES: usize = 8;
        let n = rows.n_rows();
        let d = rows.n_cols();
        let data = rows.as_slice();
        let mut votes = vec![0u32; n];
        for tree in &self.trees {
            let nodes = tree.nodes();
            let mut start = 0;
            while start < n {
                let lanes = LANES.min(n - start);
                // Several independent walks at once hide memory latency.
                let mut cur = [0usize; LANES];
                let mut live = lanes;
                let mut done = [false; LANES];
                while live > 0 {
                    for k in 0..lanes {
                        if done[k] {
                            continue;
                        }
                        let node = &nodes[cur[k]];
                        if node.is_leaf() {
                            votes[start + k] += node.left;
                            done[k] = true;
                            live -= 1;
                        } else {
                            let v = data[(start + k) * d + node.feature as usize];
                            cur[k] = if v <= node.threshold { node.left } else { node.right } as usize;
                        }
                    }
                }
                start += lanes;
            }
        }
        let t = self.trees.len() as f64;
        votes.into_iter().map(|v| v as f64 / t).collect()
    }
}

struct Grower<'a> {
    columns: Vec<Vec<f64>>,
    binary: Vec<bool>,
    labels: &'a [u8],
    config: &'a ForestConfig,
    max_features: usize,
}

pub fn train_random_forest(train: &EncodedDataset, config: &ForestConfig) -> Result<RandomForest> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let d = train.matrix.n_cols();
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|c| train.matrix.rows().map(|r| r[c]).collect())
        .collect();
    let binary = columns
        .iter()
        .map(|col| col.iter().all(|&v| v == 0.0 || v == 1.0))
        .collect();
    let max_features = config
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let grower = Grower {
        columns,
        binary,
        labels: &train.labels,
        config,
        max_features,
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| grower.grow(config.seed.wrapping_add(t as u64)))
        .collect();
    Ok(RandomForest {
        config: config.clone(),
        n_inputs: d,
        trees,
    })
}

#[derive(Clone, Copy)]
struct Split {
    column: usize,
    threshold: f64,
    score: f64,
}

struct Scratch {
    sorted: Vec<(f64, u32, u8)>,
    order: Vec<usize>,
}

impl Grower<'_> {
    fn grow(&self, tree_seed: u64) -> DecisionTree {
        let mut rng = seed::rng(tree_seed);
        let n = self.labels.len();
        let mut weights = vec![0u32; n];
        if self.config.bootstrap {
            for _ in 0..n {
                weights[rng.gen_range(0..n)] += 1;
            }
        } else {
            weights.fill(1);
        }
        let mut indices: Vec<u32> = (0..n as u32).filter(|&i| weights[i as usize] > 0).collect();
        let mut scratch = Scratch {
            sorted: Vec::with_capacity(indices.len()),
            order: (0..self.columns.len()).collect(),
        };

        let mut nodes = vec![Node::leaf(0)];
        let mut stack = vec![(0usize, 0usize, indices.len(), 0usize)];
        while let Some((id, start, end, depth)) = stack.pop() {
            let idx = &mut indices[start..end];
            let (mut w0, mut w1) = (0u64, 0u64);
            for &i in idx.iter() {
                let w = weights[i as usize] as u64;
                if self.labels[i as usize] == 1 {
                    w1 += w;
                } else {
                    w0 += w;
                }
            }
            // ties go to the unfavorable class
            let class = u8::from(w1 > w0);
            let depth_reached = self.config.max_depth.is_some_and(|m| depth >= m);
            if w0 == 0 || w1 == 0 || depth_reached || w0 + w1 < 2 * self.config.min_leaf as u64 {
                nodes[id] = Node::leaf(class);
                continue;
            }
            let Some(split) = self.best_split(idx, &weights, &mut rng, &mut scratch) else {
                nodes[id] = Node::leaf(class);
                continue;
            };
            let col = &self.columns[split.column];
            let mid = partition(idx, |i| col[i as usize] <= split.threshold);
            let left = nodes.len();
            nodes.push(Node::leaf(0));
            nodes.push(Node::leaf(0));
            nodes[id] = Node {
                feature: split.column as u32,
                left: left as u32,
                right: left as u32 + 1,
                threshold: split.threshold,
            };
            stack.push((left + 1, start + mid, end, depth + 1));
            stack.push((left, start, start + mid, depth + 1));
        }
        DecisionTree { nodes }
    }

    /// Examines columns in random order until `max_features` non-constant
    /// ones have been scored.
    fn best_split(
        &self,
        idx: &[u32],
        weights: &[u32],
        rng: &mut seed::Rng,
        scratch: &mut Scratch,
    ) -> Option<Split> {
        let d = scratch.order.len();
        let mut best: Option<Split> = None;
        let mut scored = 0;
        for k in 0..d {
            let pick = rng.gen_range(k..d);
            scratch.order.swap(k, pick);
            let column = scratch.order[k];
            let candidate = if self.binary[column] {
                self.split_binary(column, idx, weights)
            } else {
                self.split_sorted(column, idx, weights, &mut scratch.sorted)
            };
            let Some(candidate) = candidate else { continue };
            scored += 1;
            if let Some(s) = candidate {
                if best.is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
            if scored >= self.max_features && best.is_some() {
                break;
            }
        }
        best
    }

    /// `None` when the column is constant in the node; `Some(None)` when no
    /// split satisfies `min_leaf`.
    fn split_binary(&self, column: usize, idx: &[u32], weights: &[u32]) -> Option<Option<Split>> {
        let col = &self.columns[column];
        let mut c = [[0u64; 2]; 2];
        for &i in idx {
            let i = i as usize;
            let side = usize::from(col[i] > 0.5);
            c[side][self.labels[i] as usize] += weights[i] as u64;
        }
        let nl = c[0][0] + c[0][1];
        let nr = c[1][0] + c[1][1];
        if nl == 0 || nr == 0 {
            return None;
        }
        let min_leaf = self.config.min_leaf as u64;
        if nl < min_leaf || nr < min_leaf {
            return Some(None);
        }
        Some(Some(Split {
            column,
            threshold: 0.5,
            score: purity(c[0][0], c[0][1]) + purity(c[1][0], c[1][1]),
        }))
    }

    fn split_sorted(
        &self,
        column: usize,
        idx: &[u32],
        weights: &[u32],
        sorted: &mut Vec<(f64, u32, u8)>,
    ) -> Option<Option<Split>> {
        let col = &self.columns[column];
        sorted.clear();
        sorted.extend(idx.iter().map(|&i| {
            let i = i as usize;
            (col[i], weights[i], self.labels[i])
        }));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if sorted[0].0 == sorted[sorted.len() - 1].0 {
            return None;
        }
        let mut total = [0u64; 2];
        for &(_, w, y) in sorted.iter() {
            total[y as usize] += w as u64;
        }
        let min_leaf = self.config.min_leaf as u64;
        let mut left = [0u64; 2];
        let mut best: Option<Split> = None;
        for k in 0..sorted.len() - 1 {
            let (v, w, y) = sorted[k];
            left[y as usize] += w as u64;
            let next = sorted[k + 1].0;
            if v == next {
                continue;
            }
            let nl = left[0] + left[1];
            let nr = total[0] + total[1] - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let score = purity(left[0], left[1]) + purity(total[0] - left[0], total[1] - left[1]);
            if best.is_none_or(|b| score > b.score) {
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Split {
                    column,
                    threshold,
                    score,
                });
            }
        }
        Some(best)
    }
}

/// `n * (1 - gini)`; maximizing the sum over children minimizes weighted Gini.
fn purity(c0: u64, c1: u64) -> f64 {
    let n = (c0 + c1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (a, b) = (c0 as f64, c1 as f64);
    (a * a + b * b) / n
}

fn partition(idx: &mut [u32], goes_left: impl Fn(u32) -> bool) -> usize {
    let mut mid = 0;
    for k in 0..idx.len() {
        if goes_left(idx[k]) {
            idx.swap(mid, k);
            mid += 1;
        }
    }
    mid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureMapping, FeatureSpec, Matrix};
    use rand::Rng;
    use std::sync::Arc;

    pub(crate) fn numeric_dataset(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> EncodedDataset {
        let d = rows[0].len();
        let mapping = FeatureMapping::new((0..d).map(|j| FeatureSpec::numeric(format!("x{j}"))).collect());
        EncodedDataset {
            matrix: Matrix::from_rows(&rows),
            row_ids: (0..labels.len()).collect(),
            labels,
            mapping: Arc::new(mapping),
        }
    }

    fn xor_fixture() -> EncodedDataset {
        let mut rng = seed::rng(3);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..200 {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            labels.push(u8::from((a > 0.0) != (b > 0.0)));
            rows.push(vec![a, b]);
        }
        numeric_dataset(rows, labels)
    }

    #[test]
    fn constant_labels_give_constant_predictor() {
        let ds = numeric_dataset(vec![vec![1.0], vec![2.0], vec![3.0]], vec![1, 1, 1]);
        let forest = train_random_forest(&ds, &ForestConfig::default()).unwrap();
        for x in [0.0, 2.5, 100.0] {
            assert_eq!(forest.predict_proba(&[x]), 1.0);
        }
    }

    #[test]
    fn fits_xor() {
        let ds = xor_fixture();
        let forest = train_random_forest(&ds, &ForestConfig::default()).unwrap();
        let correct = (0..ds.len())
            .filter(|&i| u8::from(forest.predict_proba(ds.row(i)) >= 0.5) == ds.labels[i])
            .count();
        assert!(correct as f64 / ds.len() as f64 >= 0.95);
    }

    #[test]
    fn probabilities_are_vote_fractions() {
        let ds = xor_fixture();
        let cfg = ForestConfig {
            n_trees: 7,
            ..ForestConfig::default()
        };
        let forest = train_random_forest(&ds, &cfg).unwrap();
        for i in 0..ds.len() {
            let p = forest.predict_proba(ds.row(i));
            let votes = p * 7.0;
            assert!((votes - votes.round()).abs() < 1e-12);
            assert_eq!(forest.votes(ds.row(i)) as f64 / 7.0, p);
        }
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let ds = xor_fixture();
        let a = train_random_forest(&ds, &ForestConfig { n_trees: 10, ..Default::default() }).unwrap();
        let b = train_random_forest(&ds, &ForestConfig { n_trees: 10, ..Default::default() }).unwrap();
        assert_eq!(a, b);
        let c = train_random_forest(&ds, &ForestConfig { n_trees: 12, ..Default::default() }).unwrap();
        assert_eq!(a.trees(), &c.trees()[..10]);
    }

    #[test]
    fn monotone_on_threshold_fixture() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let labels = (0..100).map(|i| u8::from(i >= 60)).collect();
        let forest = train_random_forest(&numeric_dataset(rows, labels), &ForestConfig::default()).unwrap();
        let mut last = 0.0;
        for i in 0..200 {
            let p = forest.predict_proba(&[i as f64 * 0.5]);
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn depth_limit_and_errors() {
        let ds = xor_fixture();
        let forest = train_random_forest(
            &ds,
            &ForestConfig {
                n_trees: 3,
                max_depth: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(forest.trees().iter().all(|t| t.depth() <= 2));
        let empty = ds.subset(&[]);
        assert!(matches!(
            train_random_forest(&empty, &ForestConfig::default()),
            Err(Error::Empty(_))
        ));
        assert!(train_random_forest(&ds, &ForestConfig { n_trees: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn majority_tie_goes_to_unfavorable() {
        // identical inputs, opposite labels: no split possible
        let ds = numeric_dataset(vec![vec![1.0], vec![1.0]], vec![0, 1]);
        let cfg = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            ..Default::default()
        };
        let forest = train_random_forest(&ds, &cfg).unwrap();
        assert_eq!(forest.predict_proba(&[1.0]), 0.0);
    }
}
