//! Group fairness of model outcomes: rate differences between the
//! non-protected and the protected group, with pooled two-proportion z-scores.

use serde::Serialize;

use crate::data::{EncodedDataset, GroupSpec, RawDataset};
use crate::error::{Error, Result};
use crate::model::{accuracy, predict_all, Classifier};

/// Confusion counts for one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, predicted: u8, label: u8) {
        match (predicted, label) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn predicted_positive(&self) -> usize {
        self.tp + self.fp
    }

    pub fn actual_positive(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn actual_negative(&self) -> usize {
        self.fp + self.tn
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupConfusion {
    pub group: GroupSpec,
    pub protected: Confusion,
    pub non_protected: Confusion,
}

impl GroupConfusion {
    pub fn swapped(&self) -> Self {
        Self {
            group: self.group.swapped(),
            protected: self.non_protected,
            non_protected: self.protected,
        }
    }
}

/// Tallies predictions of the test rows belonging to either group. Test rows
/// are matched to raw rows through `test.row_ids`.
pub fn confusion_by_group(
    model: &dyn Classifier,
    test: &EncodedDataset,
    raw: &RawDataset,
    group: &GroupSpec,
) -> Result<GroupConfusion> {
    let predictions = predict_all(model, test);
    confusion_from_predictions(&predictions, test, raw, group)
}

pub fn confusion_from_predictions(
    predictions: &[u8],
    test: &EncodedDataset,
    raw: &RawDataset,
    group: &GroupSpec,
) -> Result<GroupConfusion> {
    let members = raw.group_indices(group)?;
    let mut out = GroupConfusion {
        group: group.clone(),
        protected: Confusion::default(),
        non_protected: Confusion::default(),
    };
    for i in test.positions_of(&members.protected) {
        out.protected.add(predictions[i], test.labels[i]);
    }
    for i in test.positions_of(&members.non_protected) {
        out.non_protected.add(predictions[i], test.labels[i]);
    }
    for (c, value) in [
        (&out.protected, &group.protected_value),
        (&out.non_protected, &group.non_protected_value),
    ] {
        if c.n() == 0 {
            return Err(Error::EmptyGroup {
                group: format!("{}={}", group.attribute, value),
                what: "rows in the evaluated set",
            });
        }
    }
    Ok(out)
}

fn rate(k: usize, n: usize) -> f64 {
    k as f64 / n as f64
}

/// Positive prediction rate difference, non-protected minus protected.
pub fn pr_diff(c: &GroupConfusion) -> f64 {
    rate(c.non_protected.predicted_positive(), c.non_protected.n())
        - rate(c.protected.predicted_positive(), c.protected.n())
}

pub fn tpr_diff(c: &GroupConfusion) -> Result<f64> {
    for (conf, v) in [(&c.protected, &c.group.protected_value), (&c.non_protected, &c.group.non_protected_value)] {
        if conf.actual_positive() == 0 {
            return Err(Error::EmptyGroup {
                group: format!("{}={}", c.group.attribute, v),
                what: "ground-truth positives",
            });
        }
    }
    Ok(rate(c.non_protected.tp, c.non_protected.actual_positive()) - rate(c.protected.tp, c.protected.actual_positive()))
}

pub fn fpr_diff(c: &GroupConfusion) -> Result<f64> {
    for (conf, v) in [(&c.protected, &c.group.protected_value), (&c.non_protected, &c.group.non_protected_value)] {
        if conf.actual_negative() == 0 {
            return Err(Error::EmptyGroup {
                group: format!("{}={}", c.group.attribute, v),
                what: "ground-truth negatives",
            });
        }
    }
    Ok(rate(c.non_protected.fp, c.non_protected.actual_negative()) - rate(c.protected.fp, c.protected.actual_negative()))
}

/// Pooled two-proportion z statistic for `k1/n1 - k2/n2`. Zero when the
/// pooled proportion is 0 or 1.
pub fn two_proportion_z(k1: usize, n1: usize, k2: usize, n2: usize) -> Result<f64> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::Invalid("two-proportion z needs nonempty samples".into()));
    }
    if k1 > n1 || k2 > n2 {
        return Err(Error::Invalid("success count exceeds sample size".into()));
    }
    let (p1, p2) = (rate(k1, n1), rate(k2, n2));
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    if pooled <= 0.0 || pooled >= 1.0 {
        return Ok(0.0);
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    Ok((p1 - p2) / se)
}

/// One row of the fairness table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDiff {
    pub metric: &'static str,
    pub diff: f64,
    pub z: f64,
    pub rate_non_protected: f64,
    pub rate_protected: f64,
    /// Denominators of the two rates.
    pub n_non_protected: usize,
    pub n_protected: usize,
}

impl MetricDiff {
    fn new(metric: &'static str, k_np: usize, n_np: usize, k_p: usize, n_p: usize) -> Result<Self> {
        let (rate_non_protected, rate_protected) = (rate(k_np, n_np), rate(k_p, n_p));
        Ok(Self {
            metric,
            diff: rate_non_protected - rate_protected,
            z: two_proportion_z(k_np, n_np, k_p, n_p)?,
            rate_non_protected,
            rate_protected,
            n_non_protected: n_np,
            n_protected: n_p,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub group: GroupSpec,
    pub accuracy: f64,
    pub n_protected: usize,
    pub n_non_protected: usize,
    pub confusion: GroupConfusion,
    pub metrics: Vec<MetricDiff>,
    pub z_test: &'static str,
    pub sign: &'static str,
}

impl FairnessReport {
    pub fn metric(&self, name: &str) -> Option<&MetricDiff> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    pub fn pr(&self) -> &MetricDiff {
        &self.metrics[0]
    }

    pub fn tpr(&self) -> &MetricDiff {
        &self.metrics[1]
    }

    pub fn fpr(&self) -> &MetricDiff {
        &self.metrics[2]
    }
}

pub const Z_TEST: &str = "pooled two-proportion z: (p1 - p2) / sqrt(p(1 - p)(1/n1 + 1/n2))";

pub fn report_from_confusion(c: &GroupConfusion, accuracy: f64) -> Result<FairnessReport> {
    tpr_diff(c)?;
    fpr_diff(c)?;
    let (np, p) = (&c.non_protected, &c.protected);
    let metrics = vec![
        MetricDiff::new("PR", np.predicted_positive(), np.n(), p.predicted_positive(), p.n())?,
        MetricDiff::new("TPR", np.tp, np.actual_positive(), p.tp, p.actual_positive())?,
        MetricDiff::new("FPR", np.fp, np.actual_negative(), p.fp, p.actual_negative())?,
    ];
    Ok(FairnessReport {
        group: c.group.clone(),
        accuracy,
        n_protected: p.n(),
        n_non_protected: np.n(),
        confusion: c.clone(),
        metrics,
        z_test: Z_TEST,
        sign: "non_protected - protected",
    })
}

pub fn fairness_report(
    model: &dyn Classifier,
    test: &EncodedDataset,
    raw: &RawDataset,
    group: &GroupSpec,
) -> Result<FairnessReport> {
    let c = confusion_by_group(model, test, raw, group)?;
    report_from_confusion(&c, accuracy(model, test)?)
}
