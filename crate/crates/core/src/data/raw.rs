use std::io::Read;
use std::path::Path;

use serde::Serialize;

use super::schema::{FeatureKind, GroupSpec, Schema};
use crate::error::{Error, Result};

/// Text-valued dataset; cells follow the schema's feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    schema: Schema,
    rows: Vec<Vec<String>>,
    targets: Vec<String>,
}

/// Row indices of the two demographic groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupIndices {
    pub protected: Vec<usize>,
    pub non_protected: Vec<usize>,
}

impl RawDataset {
    /// Builds a dataset, checking every cell against the schema. Row numbers in
    /// errors are 1-based data rows.
    pub fn new(schema: Schema, rows: Vec<Vec<String>>, targets: Vec<String>) -> Result<Self> {
        schema.validate()?;
        if rows.len() != targets.len() {
            return Err(Error::Invalid(format!(
                "{} rows but {} target values",
                rows.len(),
                targets.len()
            )));
        }
        for (i, (row, target)) in rows.iter().zip(&targets).enumerate() {
            check_row(&schema, row, target, i + 1)?;
        }
        Ok(Self {
            schema,
            rows,
            targets,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[String] {
        &self.rows[i]
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All values of one feature column.
    pub fn column(&self, name: &str) -> Result<Vec<&str>> {
        let j = self
            .schema
            .feature_index(name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    /// Removes one feature from the schema and every row. Protected-group
    /// definitions on the removed attribute are dropped with it.
    pub fn drop_feature(&self, name: &str) -> Result<Self> {
        let j = self
            .schema
            .feature_index(name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
        let mut schema = self.schema.clone();
        schema.features.remove(j);
        schema.protected.retain(|g| g.attribute != name);
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.remove(j);
                r
            })
            .collect();
        Ok(Self {
            schema,
            rows,
            targets: self.targets.clone(),
        })
    }

    /// Rows whose raw attribute value is the protected / non-protected value.
    /// Rows with any other value belong to neither group.
    pub fn group_indices(&self, group: &GroupSpec) -> Result<GroupIndices> {
        let values = self.column(&group.attribute)?;
        let mut out = GroupIndices {
            protected: Vec::new(),
            non_protected: Vec::new(),
        };
        for (i, v) in values.into_iter().enumerate() {
            if v == group.protected_value {
                out.protected.push(i);
            } else if v == group.non_protected_value {
                out.non_protected.push(i);
            }
        }
        Ok(out)
    }
}

fn check_row(schema: &Schema, row: &[String], target: &str, row_no: usize) -> Result<()> {
    if row.len() != schema.features.len() {
        return Err(Error::RowArity {
            row: row_no,
            expected: schema.features.len(),
            found: row.len(),
        });
    }
    for (feature, value) in schema.features.iter().zip(row) {
        if value.is_empty() {
            return Err(Error::MissingValue {
                row: row_no,
                feature: feature.name.clone(),
            });
        }
        match feature.kind {
            FeatureKind::Numeric => {
                let ok = value.parse::<f64>().map(f64::is_finite).unwrap_or(false);
                if !ok {
                    return Err(Error::NotNumeric {
                        row: row_no,
                        feature: feature.name.clone(),
                        value: value.clone(),
                    });
                }
            }
            FeatureKind::Categorical => {
                if feature.category_index(value).is_none() {
                    return Err(Error::UnknownCategory {
                        row: row_no,
                        feature: feature.name.clone(),
                        value: value.clone(),
                    });
                }
            }
        }
    }
    if target.is_empty() {
        return Err(Error::MissingValue {
            row: row_no,
            feature: schema.target.name.clone(),
        });
    }
    Ok(())
}

/// Reads a header-led, comma-separated file. Columns not named by the schema
/// are ignored; cells are trimmed.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<RawDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let feature_cols = schema
        .features
        .iter()
        .map(|f| position(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let target_col = position(&schema.target.name)?;

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        if record.len() != header.len() {
            return Err(Error::RowArity {
                row: row_no,
                expected: header.len(),
                found: record.len(),
            });
        }
        let row: Vec<String> = feature_cols.iter().map(|&c| record[c].to_string()).collect();
        let target = record[target_col].to_string();
        check_row(schema, &row, &target, row_no)?;
        rows.push(row);
        targets.push(target);
    }
    Ok(RawDataset {
        schema: schema.clone(),
        rows,
        targets,
    })
}
