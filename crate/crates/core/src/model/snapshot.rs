//! Binary model snapshots.
//!
//! Layout (little endian): magic `FAUDSNAP`, `u32` version, `u32` length of a
//! JSON header (kind, config, input count), the header bytes, then the
//! parameters. Forest: `u32` tree count, then per tree a `u32` node count and
//! nodes as `(u32 feature, u32 left, u32 right, f64 threshold)`. Linear: `u32`
//! weight count, the weights, then the intercept, all `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BlackBoxModel, DecisionTree, ForestConfig, LinearConfig, LinearModel, Node, RandomForest};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FAUDSNAP";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Header {
    Forest { config: ForestConfig, n_inputs: usize },
    Linear { config: LinearConfig },
}

pub fn to_bytes(model: &BlackBoxModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, SNAPSHOT_VERSION);
    let header = match model {
        BlackBoxModel::Forest(f) => Header::Forest {
            config: f.config().clone(),
            n_inputs: f.n_inputs(),
        },
        BlackBoxModel::Linear(l) => Header::Linear {
            config: l.config().clone(),
        },
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    put_u32(&mut out, header.len() as u32);
    out.extend_from_slice(&header);
    match model {
        BlackBoxModel::Forest(f) => {
            put_u32(&mut out, f.trees().len() as u32);
            for tree in f.trees() {
                put_u32(&mut out, tree.nodes().len() as u32);
                for node in tree.nodes() {
                    put_u32(&mut out, node.feature);
                    put_u32(&mut out, node.left);
                    put_u32(&mut out, node.right);
                    out.extend_from_slice(&node.threshold.to_le_bytes());
                }
            }
        }
        BlackBoxModel::Linear(l) => {
            put_u32(&mut out, l.weights().len() as u32);
            for w in l.weights() {
                out.extend_from_slice(&w.to_le_bytes());
            }
            out.extend_from_slice(&l.intercept().to_le_bytes());
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<BlackBoxModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = r.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(len)?)?;
    let model = match header {
        Header::Forest { config, n_inputs } => {
            let n_trees = r.u32()? as usize;
            let mut trees = Vec::with_capacity(n_trees);
            for _ in 0..n_trees {
                let n_nodes = r.u32()? as usize;
                let mut nodes = Vec::with_capacity(n_nodes);
                for _ in 0..n_nodes {
                    let feature = r.u32()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    let threshold = r.f64()?;
                    if feature != super::LEAF && feature as usize >= n_inputs {
                        return Err(Error::Snapshot("split column out of range".into()));
                    }
                    nodes.push(Node {
                        feature,
                        left,
                        right,
                        threshold,
                    });
                }
                trees.push(DecisionTree::from_nodes(nodes)?);
            }
            BlackBoxModel::Forest(RandomForest::from_parts(config, n_inputs, trees))
        }
        Header::Linear { config } => {
            let n = r.u32()? as usize;
            let weights = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let intercept = r.f64()?;
            BlackBoxModel::Linear(LinearModel::with_config(weights, intercept, config))
        }
    };
    if r.pos != bytes.len() {
        return Err(Error::Snapshot("trailing bytes".into()));
    }
    Ok(model)
}

pub fn save_snapshot(model: &BlackBoxModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<BlackBoxModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Snapshot("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EncodedDataset, FeatureMapping, FeatureSpec, Matrix};
    use crate::model::{train_random_forest, Classifier};
    use std::sync::Arc;

    #[test]
    fn forest_round_trip_preserves_predictions() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 13) as f64, (i % 5) as f64 * 0.3]).collect();
        let labels = (0..60).map(|i| u8::from(i % 13 > 6 || i % 5 == 0)).collect();
        let ds = EncodedDataset {
            matrix: Matrix::from_rows(&rows),
            row_ids: (0..60).collect(),
            labels,
            mapping: Arc::new(FeatureMapping::new(vec![FeatureSpec::numeric("a"), FeatureSpec::numeric("b")])),
        };
        let cfg = ForestConfig {
            n_trees: 5,
            ..Default::default()
        };
        let model = BlackBoxModel::Forest(train_random_forest(&ds, &cfg).unwrap());
        let back = from_bytes(&to_bytes(&model)).unwrap();
        assert_eq!(back, model);
        for r in ds.matrix.rows() {
            assert_eq!(back.predict_proba(r), model.predict_proba(r));
        }
    }

    #[test]
    fn linear_round_trip_is_exact() {
        let model = BlackBoxModel::Linear(LinearModel::from_parameters(vec![0.1, -1.0 / 3.0], 0.7));
        assert_eq!(from_bytes(&to_bytes(&model)).unwrap(), model);
    }

    #[test]
    fn rejects_corrupt_input() {
        let model = BlackBoxModel::Linear(LinearModel::from_parameters(vec![1.0], 0.0));
        let bytes = to_bytes(&model);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(from_bytes(b"NOTASNAPSHOT").is_err());
    }
}
