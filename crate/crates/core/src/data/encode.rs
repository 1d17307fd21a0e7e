use std::ops::Range;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::raw::RawDataset;
use super::schema::{FeatureKind, FeatureSpec};
use crate::error::{Error, Result};
use crate::seed;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    data: Vec<f64>,
    n_cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, n_cols: usize) -> Self {
        assert!(n_cols > 0 && data.len().is_multiple_of(n_cols), "ragged matrix");
        Self { data, n_cols }
    }

    pub fn with_cols(n_cols: usize) -> Self {
        Self {
            data: Vec::new(),
            n_cols,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), n_cols, "ragged matrix");
            data.extend_from_slice(r.as_ref());
        }
        Self { data, n_cols }
    }

    pub fn n_rows(&self) -> usize {
        if self.n_cols == 0 {
            0
        } else {
            self.data.len() / self.n_cols
        }
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n_cols, "row arity");
        self.data.extend_from_slice(row);
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Typed value of one original feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Numeric(f64),
    Category(usize),
}

/// Source of one encoded column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub feature: usize,
    pub category: Option<usize>,
}

/// Links encoded columns back to original features. Categorical features
/// occupy one contiguous one-hot block in declared category order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapping {
    features: Vec<FeatureSpec>,
    columns: Vec<EncodedColumn>,
    blocks: Vec<Range<usize>>,
}

impl FeatureMapping {
    pub fn new(features: Vec<FeatureSpec>) -> Self {
        let mut columns = Vec::new();
        let mut blocks = Vec::with_capacity(features.len());
        for (j, f) in features.iter().enumerate() {
            let start = columns.len();
            match f.kind {
                FeatureKind::Numeric => columns.push(EncodedColumn {
                    feature: j,
                    category: None,
                }),
                FeatureKind::Categorical => {
                    for k in 0..f.category_list().len() {
                        columns.push(EncodedColumn {
                            feature: j,
                            category: Some(k),
                        });
                    }
                }
            }
            blocks.push(start..columns.len());
        }
        Self {
            features,
            columns,
            blocks,
        }
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[EncodedColumn] {
        &self.columns
    }

    pub fn block(&self, feature: usize) -> Range<usize> {
        self.blocks[feature].clone()
    }

    /// Original feature index of each encoded column.
    pub fn column_features(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.feature).collect()
    }

    pub fn column_name(&self, col: usize) -> String {
        let c = self.columns[col];
        let f = &self.features[c.feature];
        match c.category {
            Some(k) => format!("{}={}", f.name, f.category_list()[k]),
            None => f.name.clone(),
        }
    }

    pub fn parse(&self, row: &[String]) -> Result<Vec<FeatureValue>> {
        if row.len() != self.features.len() {
            return Err(Error::Arity {
                expected: self.features.len(),
                found: row.len(),
            });
        }
        self.features
            .iter()
            .zip(row)
            .map(|(f, v)| match f.kind {
                FeatureKind::Numeric => v
                    .parse::<f64>()
                    .map(FeatureValue::Numeric)
                    .map_err(|_| Error::NotNumeric {
                        row: 0,
                        feature: f.name.clone(),
                        value: v.clone(),
                    }),
                FeatureKind::Categorical => f
                    .category_index(v)
                    .map(FeatureValue::Category)
                    .ok_or_else(|| Error::UnknownCategory {
                        row: 0,
                        feature: f.name.clone(),
                        value: v.clone(),
                    }),
            })
            .collect()
    }

    pub fn encode_values(&self, values: &[FeatureValue]) -> Vec<f64> {
        let mut out = vec![0.0; self.columns.len()];
        self.write_values(values, &mut out);
        out
    }

    pub fn write_values(&self, values: &[FeatureValue], out: &mut [f64]) {
        for (j, v) in values.iter().enumerate() {
            self.write_value(j, *v, out);
        }
    }

    /// Overwrites the block of one feature in an encoded row.
    pub fn write_value(&self, feature: usize, value: FeatureValue, out: &mut [f64]) {
        let block = self.block(feature);
        match value {
            FeatureValue::Numeric(x) => out[block.start] = x,
            FeatureValue::Category(k) => {
                out[block.clone()].fill(0.0);
                out[block.start + k] = 1.0;
            }
        }
    }

    pub fn encode_text(&self, row: &[String]) -> Result<Vec<f64>> {
        Ok(self.encode_values(&self.parse(row)?))
    }

    pub fn values(&self, encoded: &[f64]) -> Vec<FeatureValue> {
        (0..self.features.len()).map(|j| self.value(encoded, j)).collect()
    }

    pub fn value(&self, encoded: &[f64], feature: usize) -> FeatureValue {
        let block = self.block(feature);
        match self.features[feature].kind {
            FeatureKind::Numeric => FeatureValue::Numeric(encoded[block.start]),
            FeatureKind::Categorical => {
                let slice = &encoded[block];
                let k = slice
                    .iter()
                    .enumerate()
                    .fold(0, |best, (k, v)| if *v > slice[best] { k } else { best });
                FeatureValue::Category(k)
            }
        }
    }

    pub fn format_value(&self, feature: usize, value: FeatureValue) -> String {
        match value {
            FeatureValue::Numeric(x) => x.to_string(),
            FeatureValue::Category(k) => self.features[feature].category_list()[k].clone(),
        }
    }

    /// Inverse of encoding: text cells in schema order.
    pub fn decode(&self, encoded: &[f64]) -> Vec<String> {
        self.values(encoded)
            .into_iter()
            .enumerate()
            .map(|(j, v)| self.format_value(j, v))
            .collect()
    }
}

/// Numeric matrix plus binary labels (1 = favorable). `row_ids` index the
/// rows of the source raw dataset.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    pub matrix: Matrix,
    pub labels: Vec<u8>,
    pub row_ids: Vec<usize>,
    pub mapping: Arc<FeatureMapping>,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut matrix = Matrix::with_cols(self.matrix.n_cols());
        for &i in indices {
            matrix.push_row(self.row(i));
        }
        Self {
            matrix,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
            mapping: Arc::clone(&self.mapping),
        }
    }

    /// Positions of rows whose source row id is in `ids` (which must be sorted).
    pub fn positions_of(&self, ids: &[usize]) -> Vec<usize> {
        self.row_ids
            .iter()
            .enumerate()
            .filter(|(_, id)| ids.binary_search(id).is_ok())
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn encode(raw: &RawDataset) -> EncodedDataset {
    let schema = raw.schema();
    let mapping = Arc::new(FeatureMapping::new(schema.features.clone()));
    let mut matrix = Matrix::with_cols(mapping.n_columns());
    let mut buf = vec![0.0; mapping.n_columns()];
    for row in raw.rows() {
        let values = mapping
            .parse(row)
            .expect("raw dataset rows are validated on construction");
        buf.fill(0.0);
        mapping.write_values(&values, &mut buf);
        matrix.push_row(&buf);
    }
    let labels = raw
        .targets()
        .iter()
        .map(|t| u8::from(*t == schema.target.favorable))
        .collect();
    EncodedDataset {
        matrix,
        labels,
        row_ids: (0..raw.len()).collect(),
        mapping,
    }
}

/// Seeded shuffle split. `round(test_fraction * N)` rows go to the test part;
/// both parts keep ascending row order.
pub fn split(ds: &EncodedDataset, test_fraction: f64, seed: u64) -> Result<(EncodedDataset, EncodedDataset)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::Invalid(format!(
            "test fraction {test_fraction} outside [0, 1]"
        )));
    }
    let (train_idx, test_idx) = split_indices(ds.len(), test_fraction, seed);
    Ok((ds.subset(&train_idx), ds.subset(&test_idx)))
}

pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{Schema, TargetSpec};
    use proptest::prelude::*;

    fn fixture() -> RawDataset {
        let schema = Schema::new(
            vec![
                FeatureSpec::numeric("age"),
                FeatureSpec::categorical("c", ["a", "b", "c"]),
                FeatureSpec::numeric("hours"),
            ],
            TargetSpec {
                name: "y".into(),
                favorable: "yes".into(),
            },
            vec![],
        )
        .unwrap();
        let cells = [
            ("39", "a", "40"),
            ("50", "b", "13"),
            ("38", "c", "40"),
            ("53", "a", "40"),
            ("28", "b", "40"),
            ("37", "b", "40"),
            ("49", "c", "16"),
            ("52", "a", "45"),
            ("31.5", "c", "50"),
            ("42", "b", "40"),
        ];
        let rows = cells
            .iter()
            .map(|(a, c, h)| vec![a.to_string(), c.to_string(), h.to_string()])
            .collect();
        let targets = (0..10).map(|i| if i % 3 == 0 { "yes" } else { "no" }.to_string()).collect();
        RawDataset::new(schema, rows, targets).unwrap()
    }

    #[test]
    fn one_hot_and_passthrough() {
        let ds = encode(&fixture());
        // row 1: age 50, c = "b", hours 13
        assert_eq!(ds.row(1), [50.0, 0.0, 1.0, 0.0, 13.0]);
        assert_eq!(ds.row(0)[0], 39.0);
        assert_eq!(ds.labels[..4], [1, 0, 0, 1]);
        assert_eq!(ds.mapping.column_name(2), "c=b");
        for row in ds.matrix.rows() {
            assert_eq!(row[1..4].iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn decode_inverts_encode_on_every_row() {
        let raw = fixture();
        let ds = encode(&raw);
        for i in 0..raw.len() {
            assert_eq!(ds.mapping.decode(ds.row(i)), raw.row(i));
        }
    }

    #[test]
    fn mapping_is_a_bijection() {
        let ds = encode(&fixture());
        let mut seen = std::collections::HashSet::new();
        for c in ds.mapping.columns() {
            assert!(seen.insert((c.feature, c.category)));
        }
        assert_eq!(seen.len(), ds.mapping.n_columns());
    }

    #[test]
    fn dropped_feature_has_no_columns() {
        let ds = encode(&fixture().drop_feature("c").unwrap());
        assert!(ds.mapping.columns().iter().all(|c| ds.mapping.features()[c.feature].name != "c"));
        assert_eq!(ds.mapping.n_columns(), 2);
    }

    #[test]
    fn split_boundaries_and_determinism() {
        let ds = encode(&fixture());
        let (train, test) = split(&ds, 0.0, 1).unwrap();
        assert!(test.is_empty());
        assert_eq!(train.row_ids, ds.row_ids);

        let (_, a) = split(&ds, 0.3, 7).unwrap();
        let (_, b) = split(&ds, 0.3, 7).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.row_ids, b.row_ids);

        assert!(split(&ds, 1.5, 7).is_err());
    }

    #[test]
    fn different_seeds_give_different_partitions() {
        let (_, a) = split_indices(1000, 0.3, 1);
        let (_, b) = split_indices(1000, 0.3, 2);
        assert_ne!(a, b);
    }

    proptest! {
        #[test]
        fn split_is_an_exact_cover(n in 0usize..300, frac in 0.0f64..=1.0, seed in any::<u64>()) {
            let (train, test) = split_indices(n, frac, seed);
            prop_assert_eq!(test.len(), (frac * n as f64).round() as usize);
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn encoding_round_trips(age in 0u32..120, cat in 0usize..3, hours in 1u32..99) {
            let raw = fixture();
            let mapping = FeatureMapping::new(raw.schema().features.clone());
            let row = vec![age.to_string(), ["a", "b", "c"][cat].to_string(), hours.to_string()];
            let enc = mapping.encode_text(&row).unwrap();
            prop_assert_eq!(enc[1..4].iter().sum::<f64>(), 1.0);
            prop_assert_eq!(mapping.decode(&enc), row);
        }
    }
}
