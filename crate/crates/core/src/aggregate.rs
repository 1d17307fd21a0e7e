//! Per-group, per-outcome-category reductions of local explanations.

use std::collections::HashMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::attribution::{Attribution, Method};
use crate::counterfactual::Counterfactual;
use crate::data::{EncodedDataset, GroupSpec, RawDataset};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeCategory {
    P,
    TP,
    FP,
    N,
    FN,
    TN,
}

impl OutcomeCategory {
    pub const ALL: [OutcomeCategory; 6] = [Self::P, Self::TP, Self::FP, Self::N, Self::FN, Self::TN];
    /// Cells explained by the attribution methods.
    pub const POSITIVE: [OutcomeCategory; 3] = [Self::P, Self::TP, Self::FP];
    /// Cells explained by counterfactuals.
    pub const NEGATIVE: [OutcomeCategory; 3] = [Self::N, Self::FN, Self::TN];

    pub fn contains(self, prediction: u8, label: u8) -> bool {
        match self {
            Self::P => prediction == 1,
            Self::TP => prediction == 1 && label == 1,
            Self::FP => prediction == 1 && label == 0,
            Self::N => prediction == 0,
            Self::FN => prediction == 0 && label == 1,
            Self::TN => prediction == 0 && label == 0,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Self::P | Self::TP | Self::FP)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::P => "P",
            Self::TP => "TP",
            Self::FP => "FP",
            Self::N => "N",
            Self::FN => "FN",
            Self::TN => "TN",
        }
    }

    fn empty_message(self) -> &'static str {
        match self {
            Self::P => "instances in category P",
            Self::TP => "instances in category TP",
            Self::FP => "instances in category FP",
            Self::N => "instances in category N",
            Self::FN => "instances in category FN",
            Self::TN => "instances in category TN",
        }
    }
}

impl std::fmt::Display for OutcomeCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Evaluated-set positions of each side of a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPositions {
    pub protected: Vec<usize>,
    pub non_protected: Vec<usize>,
}

pub fn group_positions(test: &EncodedDataset, raw: &RawDataset, group: &GroupSpec) -> Result<GroupPositions> {
    let ids = raw.group_indices(group)?;
    let out = GroupPositions {
        protected: test.positions_of(&ids.protected),
        non_protected: test.positions_of(&ids.non_protected),
    };
    for (side, value) in [(&out.protected, &group.protected_value), (&out.non_protected, &group.non_protected_value)] {
        if side.is_empty() {
            return Err(Error::EmptyGroup {
                group: format!("{}={}", group.attribute, value),
                what: "rows in the evaluated set",
            });
        }
    }
    Ok(out)
}

/// Members (evaluated-set positions) falling into `category`, subsampled
/// uniformly to `cap` when there are more. The result is sorted.
pub fn select_category(
    predictions: &[u8],
    labels: &[u8],
    members: &[usize],
    category: OutcomeCategory,
    cap: Option<usize>,
    seed: u64,
) -> Result<Vec<usize>> {
    let all: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&i| category.contains(predictions[i], labels[i]))
        .collect();
    if all.is_empty() {
        return Err(Error::Empty(category.empty_message()));
    }
    match cap {
        Some(cap) if all.len() > cap => {
            let mut rng = seed::rng(seed::derive(seed, category.as_str()));
            let mut picked: Vec<usize> = index::sample(&mut rng, all.len(), cap).into_iter().map(|k| all[k]).collect();
            picked.sort_unstable();
            Ok(picked)
        }
        _ => Ok(all),
    }
}

fn check_same_features(attributions: &[Attribution]) -> Result<&[String]> {
    let first = attributions.first().ok_or(Error::Empty("attribution list"))?;
    if attributions.iter().any(|a| a.features != first.features) {
        return Err(Error::Invalid("attributions cover different feature sets".into()));
    }
    Ok(&first.features)
}

fn mean_by(attributions: &[Attribution], f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let d = check_same_features(attributions)?.len();
    let mut sum = vec![0.0; d];
    for a in attributions {
        for (s, c) in sum.iter_mut().zip(&a.contributions) {
            *s += f(*c);
        }
    }
    let n = attributions.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Per-feature mean of the signed contributions.
pub fn signed_mean(attributions: &[Attribution]) -> Result<Vec<f64>> {
    mean_by(attributions, |c| c)
}

/// Per-feature mean of the absolute contributions.
pub fn abs_mean(attributions: &[Attribution]) -> Result<Vec<f64>> {
    mean_by(attributions, f64::abs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedAttribution {
    pub attribute: String,
    /// Attribute value defining the aggregated group.
    pub group: String,
    pub category: OutcomeCategory,
    pub method: Method,
    pub features: Vec<String>,
    pub signed_mean: Vec<f64>,
    pub abs_mean: Vec<f64>,
    pub n: usize,
}

impl AggregatedAttribution {
    pub fn new(
        attribute: impl Into<String>,
        group: impl Into<String>,
        category: OutcomeCategory,
        attributions: &[Attribution],
    ) -> Result<Self> {
        let features = check_same_features(attributions)?.to_vec();
        let method = attributions[0].method;
        if attributions.iter().any(|a| a.method != method) {
            return Err(Error::Invalid("attributions come from different methods".into()));
        }
        if !category.is_positive() && method != Method::Random {
            return Err(Error::Invalid(format!(
                "attributions are aggregated over positive categories only, not {category}"
            )));
        }
        Ok(Self {
            attribute: attribute.into(),
            group: group.into(),
            category,
            method,
            features,
            signed_mean: signed_mean(attributions)?,
            abs_mean: abs_mean(attributions)?,
            n: attributions.len(),
        })
    }

    pub fn signed(&self, feature: &str) -> Option<f64> {
        self.features.iter().position(|f| f == feature).map(|j| self.signed_mean[j])
    }
}

/// `a - b` of the signed means for `feature`.
pub fn contribution_diff(a: &AggregatedAttribution, b: &AggregatedAttribution, feature: &str) -> Result<f64> {
    if a.method != b.method || a.category != b.category {
        return Err(Error::Invalid(format!(
            "cannot compare {}/{} with {}/{}",
            a.method, a.category, b.method, b.category
        )));
    }
    let va = a.signed(feature).ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
    let vb = b.signed(feature).ok_or_else(|| Error::UnknownFeature(feature.to_string()))?;
    Ok(va - vb)
}

fn valid_only(cfs: &[Counterfactual]) -> Result<Vec<&Counterfactual>> {
    if cfs.is_empty() {
        return Err(Error::Empty("counterfactual list"));
    }
    let valid: Vec<&Counterfactual> = cfs.iter().filter(|c| c.valid).collect();
    if valid.is_empty() {
        return Err(Error::Empty("set of valid counterfactuals"));
    }
    Ok(valid)
}

/// Percentage of valid counterfactuals that change each of `features`.
pub fn feature_change_percent(cfs: &[Counterfactual], features: &[String]) -> Result<Vec<f64>> {
    let valid = valid_only(cfs)?;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for cf in &valid {
        for f in &cf.changed {
            *counts.entry(f.as_str()).or_default() += 1;
        }
    }
    let n = valid.len() as f64;
    Ok(features
        .iter()
        .map(|f| 100.0 * counts.get(f.as_str()).copied().unwrap_or(0) as f64 / n)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Burden {
    /// Mean encoded distance with numeric columns min-max scaled.
    pub scaled: f64,
    /// Mean encoded distance in raw units.
    pub unscaled: f64,
}

/// Mean factual-to-counterfactual distance over the valid counterfactuals.
pub fn burden(cfs: &[Counterfactual]) -> Result<Burden> {
    let valid = valid_only(cfs)?;
    let n = valid.len() as f64;
    Ok(Burden {
        scaled: valid.iter().map(|c| c.encoded_euclidean).sum::<f64>() / n,
        unscaled: valid.iter().map(|c| c.encoded_euclidean_unscaled).sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfGroupSummary {
    pub attribute: String,
    pub group: String,
    pub category: OutcomeCategory,
    pub features: Vec<String>,
    pub change_percent: Vec<f64>,
    pub burden: Burden,
    /// Valid counterfactuals summarized.
    pub n: usize,
    /// Instances whose search failed or returned an invalid counterfactual.
    pub n_failed: usize,
}

impl CfGroupSummary {
    pub fn new(
        attribute: impl Into<String>,
        group: impl Into<String>,
        category: OutcomeCategory,
        features: &[String],
        cfs: &[Counterfactual],
        n_failed: usize,
    ) -> Result<Self> {
        if category.is_positive() {
            return Err(Error::Invalid(format!(
                "counterfactuals are summarized over negative categories only, not {category}"
            )));
        }
        let change_percent = feature_change_percent(cfs, features)?;
        let burden = burden(cfs)?;
        let n = cfs.iter().filter(|c| c.valid).count();
        Ok(Self {
            attribute: attribute.into(),
            group: group.into(),
            category,
            features: features.to_vec(),
            change_percent,
            burden,
            n,
            n_failed: n_failed + cfs.len() - n,
        })
    }

    pub fn percent(&self, feature: &str) -> Option<f64> {
        self.features.iter().position(|f| f == feature).map(|j| self.change_percent[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationShift {
    pub group: String,
    pub category: OutcomeCategory,
    pub method: Method,
    /// Features present after ablation.
    pub features: Vec<String>,
    /// `after - before` signed mean per surviving feature.
    pub shift: Vec<f64>,
    /// Features that no longer exist after ablation.
    pub removed: Vec<String>,
}

pub fn ablation_shift(before: &AggregatedAttribution, after: &AggregatedAttribution) -> Result<AblationShift> {
    if before.group != after.group || before.category != after.category || before.method != after.method {
        return Err(Error::Invalid(format!(
            "mismatched cells: {}/{}/{} vs {}/{}/{}",
            before.group, before.category, before.method, after.group, after.category, after.method
        )));
    }
    let mut shift = Vec::with_capacity(after.features.len());
    for (f, v) in after.features.iter().zip(&after.signed_mean) {
        let b = before.signed(f).ok_or_else(|| Error::UnknownFeature(f.clone()))?;
        shift.push(v - b);
    }
    let removed = before
        .features
        .iter()
        .filter(|f| !after.features.contains(f))
        .cloned()
        .collect();
    Ok(AblationShift {
        group: after.group.clone(),
        category: after.category,
        method: after.method,
        features: after.features.clone(),
        shift,
        removed,
    })
}
