//! Binning of numeric features and grouping of categorical ones, producing an
//! all-categorical dataset for association analysis.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::raw::RawDataset;
use super::schema::{FeatureKind, FeatureSpec, Schema};
use crate::error::{Error, Result};

/// Interval `[min, max]` with per-end inclusivity; a missing end is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default = "yes")]
    pub min_inclusive: bool,
    #[serde(default)]
    pub max_inclusive: bool,
}

fn yes() -> bool {
    true
}

impl Bin {
    pub fn contains(&self, x: f64) -> bool {
        let above = match self.min {
            None => true,
            Some(m) if self.min_inclusive => x >= m,
            Some(m) => x > m,
        };
        let below = match self.max {
            None => true,
            Some(m) if self.max_inclusive => x <= m,
            Some(m) => x < m,
        };
        above && below
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryGroup {
    pub label: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    /// Numeric feature; first matching bin wins. Several bins may share a label.
    Bins { bins: Vec<Bin> },
    /// Categorical feature; categories outside every group map to `otherwise`
    /// when it is set, and are an error when it is not.
    Groups {
        groups: Vec<CategoryGroup>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        otherwise: Option<String>,
    },
    /// Categorical feature kept as is.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRule {
    pub feature: String,
    #[serde(flatten)]
    pub kind: RuleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationRules {
    pub rules: Vec<FeatureRule>,
}

impl DiscretizationRules {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn rule(&self, feature: &str) -> Option<&RuleKind> {
        self.rules.iter().find(|r| r.feature == feature).map(|r| &r.kind)
    }
}

impl RuleKind {
    fn labels(&self, spec: &FeatureSpec) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut add = |l: &str| {
            if !out.iter().any(|o| o == l) {
                out.push(l.to_string());
            }
        };
        match self {
            RuleKind::Bins { bins } => bins.iter().for_each(|b| add(&b.label)),
            RuleKind::Groups { groups, otherwise } => {
                groups.iter().for_each(|g| add(&g.label));
                if let Some(o) = otherwise {
                    add(o);
                }
            }
            RuleKind::Identity => spec.category_list().iter().for_each(|c| add(c)),
        }
        out
    }

    fn apply<'a>(&'a self, feature: &str, value: &'a str) -> Result<&'a str> {
        let uncovered = || Error::Uncovered {
            feature: feature.to_string(),
            value: value.to_string(),
        };
        match self {
            RuleKind::Bins { bins } => {
                let x: f64 = value.parse().map_err(|_| uncovered())?;
                bins.iter()
                    .find(|b| b.contains(x))
                    .map(|b| b.label.as_str())
                    .ok_or_else(uncovered)
            }
            RuleKind::Groups { groups, otherwise } => groups
                .iter()
                .find(|g| g.members.iter().any(|m| m == value))
                .map(|g| g.label.as_str())
                .or(otherwise.as_deref())
                .ok_or_else(uncovered),
            RuleKind::Identity => Ok(value),
        }
    }
}

/// Applies the rules to every feature they name. Features without a rule are
/// left out of the result. Group definitions survive only when both of their
/// values are still categories of the discretized attribute.
pub fn discretize(raw: &RawDataset, rules: &DiscretizationRules) -> Result<RawDataset> {
    let schema = raw.schema();
    for r in &rules.rules {
        let spec = schema
            .feature(&r.feature)
            .ok_or_else(|| Error::UnknownFeature(r.feature.clone()))?;
        let ok = matches!(
            (&r.kind, spec.kind),
            (RuleKind::Bins { .. }, FeatureKind::Numeric)
                | (RuleKind::Groups { .. }, FeatureKind::Categorical)
                | (RuleKind::Identity, FeatureKind::Categorical)
        );
        if !ok {
            return Err(Error::Invalid(format!(
                "rule for `{}` does not fit its feature kind",
                r.feature
            )));
        }
    }

    let kept: Vec<(usize, &RuleKind)> = schema
        .features
        .iter()
        .enumerate()
        .filter_map(|(j, f)| rules.rule(&f.name).map(|r| (j, r)))
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty("discretization rule set"));
    }

    let features: Vec<FeatureSpec> = kept
        .iter()
        .map(|&(j, rule)| {
            let spec = &schema.features[j];
            FeatureSpec::categorical(spec.name.clone(), rule.labels(spec))
        })
        .collect();

    let mut rows = Vec::with_capacity(raw.len());
    for row in raw.rows() {
        let out = kept
            .iter()
            .map(|&(j, rule)| rule.apply(&schema.features[j].name, &row[j]).map(str::to_string))
            .collect::<Result<Vec<_>>>()?;
        rows.push(out);
    }

    let protected = schema
        .protected
        .iter()
        .filter(|g| {
            features.iter().any(|f| {
                f.name == g.attribute
                    && f.category_index(&g.protected_value).is_some()
                    && f.category_index(&g.non_protected_value).is_some()
            })
        })
        .cloned()
        .collect();
    let schema = Schema::new(features, schema.target.clone(), protected)?;
    RawDataset::new(schema, rows, raw.targets().to_vec())
}
