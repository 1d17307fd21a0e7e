//! End-to-end audit pipeline behind the command-line tool: split, train,
//! measure group fairness, explain per group and outcome category,
//! aggregate, compare, and write `report.json` plus plot-ready CSVs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::{
    ablation_shift, contribution_diff, group_positions, select_category, AblationShift, AggregatedAttribution,
    CfGroupSummary, OutcomeCategory,
};
use crate::attribution::{Attribution, Method};
use crate::counterfactual::{CfConfig, CfExplainer, Counterfactual, SearchSpace};
use crate::data::{
    discretize, encode, load_csv, split, DiscretizationRules, EncodedDataset, GroupSpec, RawDataset, Schema,
    TrainingStats,
};
use crate::error::{Error, Result, StageExt};
use crate::evaluate::{
    aopc, correlation_matrix, feature_baselines, random_ranking_curve, rank_by_scores, AopcCurve, CorrelationMatrix,
};
use crate::fairness::{confusion_from_predictions, report_from_confusion, FairnessReport};
use crate::lime::{LimeConfig, LimeExplainer};
use crate::model::{
    accuracy, predict_all, save_snapshot, train_linear_with, train_random_forest, BlackBoxModel, Classifier,
    ForestConfig, LinearConfig, ModelKind,
};
use crate::seed;
use crate::shap::{ShapConfig, ShapExplainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    /// Discretization rules for the correlation matrix; defaults to the
    /// `*.rules.json` file next to the schema.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    /// Protected attributes to audit; empty means every group in the schema.
    pub protected: Vec<String>,
    pub model: ModelKind,
    /// Master seed; every stochastic stage derives its own seed from it.
    pub seed: u64,
    /// Most instances explained per (group, category) cell.
    pub cap: usize,
    pub test_fraction: f64,
    pub aopc_instances: usize,
    pub aopc_trials: usize,
    pub forest: ForestConfig,
    pub linear: LinearConfig,
    pub lime: LimeConfig,
    pub shap: ShapConfig,
    pub cf: CfConfig,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub keep_raw: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            schema: PathBuf::new(),
            rules: None,
            protected: Vec::new(),
            model: ModelKind::Forest,
            seed: 42,
            cap: 100,
            test_fraction: 0.3,
            aopc_instances: 200,
            aopc_trials: 20,
            forest: ForestConfig::default(),
            linear: LinearConfig::default(),
            lime: LimeConfig::default(),
            shap: ShapConfig::default(),
            cf: CfConfig::default(),
            out: PathBuf::from("audit-out"),
            keep_raw: false,
        }
    }
}

impl AuditConfig {
    pub fn new(data: impl Into<PathBuf>, schema: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            data: data.into(),
            schema: schema.into(),
            out: out.into(),
            ..Self::default()
        }
    }

    /// Copy with every stage seed derived from the master seed.
    pub fn seeded(&self) -> Self {
        let mut c = self.clone();
        c.forest.seed = seed::derive(self.seed, "forest");
        c.linear.seed = seed::derive(self.seed, "linear");
        c.lime.seed = seed::derive(self.seed, "lime");
        c.shap.seed = seed::derive(self.seed, "shap");
        c.cf.seed = seed::derive(self.seed, "counterfactual");
        c
    }

    pub fn stage_seeds(&self) -> BTreeMap<&'static str, u64> {
        ["split", "forest", "linear", "lime", "shap", "counterfactual", "select", "aopc", "random"]
            .into_iter()
            .map(|s| (s, seed::derive(self.seed, s)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.data, &self.schema] {
            if !p.is_file() {
                return Err(Error::MissingInput(p.clone()));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Invalid(format!("test fraction {} is outside (0, 1)", self.test_fraction)));
        }
        if self.cap == 0 {
            return Err(Error::Invalid("cap must be at least 1".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(bytes))
    }

    fn rules_path(&self) -> Option<PathBuf> {
        if let Some(r) = &self.rules {
            return Some(r.clone());
        }
        let name = self.schema.file_name()?.to_str()?;
        let stem = name.strip_suffix(".schema.json")?;
        Some(self.schema.with_file_name(format!("{stem}.rules.json")))
    }
}

const NOTES: &[&str] = &[
    "contribution diffs are non-protected minus protected signed means",
    "change-percent diffs are protected minus non-protected",
    "attribution cells cover P, TP, FP; counterfactual cells cover N, FN, TN",
    "each outcome category is subsampled independently to the cap",
    "burden is reported as the mean encoded Euclidean distance, min-max scaled and unscaled",
    "AOPC replaces numeric features by the training mean and categorical features by the training mode",
    "AOPC drops are measured on the probability of the class predicted for the unperturbed instance",
    "instance indices are positions in the test split",
];

#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub rows: usize,
    pub train: usize,
    pub test: usize,
    pub features: Vec<String>,
    pub encoded_columns: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: AuditConfig,
    pub config_hash: String,
    pub seeds: BTreeMap<&'static str, u64>,
    pub dataset: DatasetInfo,
    pub notes: Vec<&'static str>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Distributive {
    pub accuracy: f64,
    pub groups: Vec<FairnessReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContributionDiff {
    pub attribute: String,
    pub method: Method,
    pub category: OutcomeCategory,
    pub feature: String,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfDiff {
    pub attribute: String,
    pub category: OutcomeCategory,
    pub feature: String,
    /// Protected minus non-protected change percent.
    pub change_percent_diff: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Procedural {
    pub attributions: Vec<AggregatedAttribution>,
    pub counterfactuals: Vec<CfGroupSummary>,
    pub contribution_diffs: Vec<ContributionDiff>,
    pub change_percent_diffs: Vec<CfDiff>,
    /// Returned counterfactuals that failed to flip the prediction.
    pub invalid_counterfactuals: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRecord {
    pub attribute: String,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub before: FairnessReport,
    pub after: FairnessReport,
    pub after_attributions: Vec<AggregatedAttribution>,
    pub shifts: Vec<AblationShift>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Evaluation {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub aopc: Vec<AopcCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub stage: &'static str,
    pub attribute: String,
    pub group: String,
    pub category: Option<OutcomeCategory>,
    pub method: Option<Method>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub metadata: Metadata,
    pub distributive_fairness: Option<Distributive>,
    pub procedural_fairness: Option<Procedural>,
    pub ablation: Vec<AblationRecord>,
    pub evaluation: Option<Evaluation>,
    pub skipped: Vec<Skipped>,
}

/// Everything derived from the inputs before any explanation runs.
pub struct Prepared {
    pub config: AuditConfig,
    pub schema: Schema,
    pub raw: RawDataset,
    pub groups: Vec<GroupSpec>,
    pub train: EncodedDataset,
    pub test: EncodedDataset,
    pub stats: Arc<TrainingStats>,
    pub model: BlackBoxModel,
    pub predictions: Vec<u8>,
    pub accuracy: f64,
}

pub fn train_model(cfg: &AuditConfig, train: &EncodedDataset) -> Result<BlackBoxModel> {
    Ok(match cfg.model {
        ModelKind::Forest => BlackBoxModel::Forest(train_random_forest(train, &cfg.forest)?),
        ModelKind::Linear => BlackBoxModel::Linear(train_linear_with(train, &cfg.linear)?),
    })
}

fn select_groups(schema: &Schema, names: &[String]) -> Result<Vec<GroupSpec>> {
    if names.is_empty() {
        if schema.protected.is_empty() {
            return Err(Error::Invalid("the schema declares no protected groups".into()));
        }
        return Ok(schema.protected.clone());
    }
    names
        .iter()
        .map(|n| {
            schema
                .protected
                .iter()
                .find(|g| &g.attribute == n)
                .cloned()
                .ok_or_else(|| Error::Invalid(format!("protected attribute `{n}` is not declared in the schema")))
        })
        .collect()
}

fn fit(cfg: &AuditConfig, raw: &RawDataset) -> Result<(EncodedDataset, EncodedDataset, BlackBoxModel)> {
    let enc = encode(raw);
    let (train, test) = split(&enc, cfg.test_fraction, seed::derive(cfg.seed, "split")).stage("split")?;
    let model = train_model(cfg, &train).stage("train")?;
    Ok((train, test, model))
}

/// Loads the inputs, splits, and trains the configured model.
pub fn prepare(config: &AuditConfig) -> Result<Prepared> {
    config.validate().stage("config")?;
    let cfg = config.seeded();
    let schema = Schema::from_path(&cfg.schema).stage("load")?;
    let groups = select_groups(&schema, &cfg.protected).stage("config")?;
    let raw = load_csv(&cfg.data, &schema).stage("load")?;
    let (train, test, model) = fit(&cfg, &raw)?;
    let stats = Arc::new(TrainingStats::from_dataset(&train));
    let predictions = predict_all(&model, &test);
    let accuracy = accuracy(&model, &test).stage("train")?;
    Ok(Prepared {
        config: cfg,
        schema,
        raw,
        groups,
        train,
        test,
        stats,
        model,
        predictions,
        accuracy,
    })
}

impl Prepared {
    pub fn lime(&self) -> Result<LimeExplainer> {
        LimeExplainer::new(self.train.mapping.clone(), self.stats.clone(), self.config.lime.clone())
    }

    pub fn shap(&self) -> Result<ShapExplainer> {
        ShapExplainer::new(&self.train, self.config.shap.clone())
    }

    pub fn counterfactuals(&self) -> Result<CfExplainer> {
        let space = Arc::new(SearchSpace::from_stats(&self.stats));
        CfExplainer::new(self.train.mapping.clone(), space, self.config.cf.clone())
    }

    pub fn fairness(&self) -> Result<Vec<FairnessReport>> {
        self.groups
            .iter()
            .map(|g| {
                let c = confusion_from_predictions(&self.predictions, &self.test, &self.raw, g)?;
                report_from_confusion(&c, self.accuracy)
            })
            .collect::<Result<_>>()
            .stage("fairness")
    }

    fn metadata(&self, command: &str) -> Metadata {
        Metadata {
            tool: "fairaudit",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: self.config.clone(),
            config_hash: self.config.hash(),
            seeds: self.config.stage_seeds(),
            dataset: DatasetInfo {
                rows: self.raw.len(),
                train: self.train.len(),
                test: self.test.len(),
                features: self.train.mapping.feature_names(),
                encoded_columns: self.train.mapping.n_columns(),
            },
            notes: NOTES.to_vec(),
        }
    }

    fn empty_report(&self, command: &str) -> AuditReport {
        AuditReport {
            metadata: self.metadata(command),
            distributive_fairness: None,
            procedural_fairness: None,
            ablation: Vec::new(),
            evaluation: None,
            skipped: Vec::new(),
        }
    }

    fn position(&self, index: usize) -> Result<&[f64]> {
        if index >= self.test.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.test.len(),
            });
        }
        Ok(self.test.row(index))
    }
}

/// One (group side, outcome category) selection.
#[derive(Debug, Clone)]
pub struct Cell {
    pub attribute: String,
    pub group: String,
    pub protected: bool,
    pub category: OutcomeCategory,
    pub positions: Vec<usize>,
}

/// Selects the cells of `categories` for both sides of `group`; empty cells
/// go to `skipped`.
#[allow(clippy::too_many_arguments)]
pub fn select_cells(
    predictions: &[u8],
    test: &EncodedDataset,
    raw: &RawDataset,
    group: &GroupSpec,
    categories: &[OutcomeCategory],
    cap: usize,
    master_seed: u64,
    skipped: &mut Vec<Skipped>,
) -> Result<Vec<Cell>> {
    let members = group_positions(test, raw, group)?;
    let mut cells = Vec::new();
    for (protected, value, pos) in [
        (true, &group.protected_value, &members.protected),
        (false, &group.non_protected_value, &members.non_protected),
    ] {
        let seed = seed::derive(master_seed, &format!("select/{}/{}", group.attribute, value));
        for &category in categories {
            match select_category(predictions, &test.labels, pos, category, Some(cap), seed) {
                Ok(positions) => cells.push(Cell {
                    attribute: group.attribute.clone(),
                    group: value.clone(),
                    protected,
                    category,
                    positions,
                }),
                Err(e) => skipped.push(Skipped {
                    stage: "select",
                    attribute: group.attribute.clone(),
                    group: value.clone(),
                    category: Some(category),
                    method: None,
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok(cells)
}

fn union_positions(cells: &[Cell]) -> Vec<usize> {
    let mut all: Vec<usize> = cells.iter().flat_map(|c| c.positions.iter().copied()).collect();
    all.sort_unstable();
    all.dedup();
    all
}

/// Attributions keyed by test position; each instance is explained once even
/// when it falls in several cells.
pub fn explain_positions(
    model: &dyn Classifier,
    test: &EncodedDataset,
    method: Method,
    lime: &LimeExplainer,
    shap: &ShapExplainer,
    positions: &[usize],
) -> Result<BTreeMap<usize, Attribution>> {
    let list = match method {
        Method::Lime => lime.explain_rows(model, test, positions).stage("lime")?,
        Method::Shap => shap.explain_rows(model, test, positions).stage("shap")?,
        other => return Err(Error::Invalid(format!("{other} is not an attribution method"))),
    };
    Ok(positions.iter().copied().zip(list).collect())
}

fn aggregate_cells(
    cells: &[Cell],
    cache: &BTreeMap<usize, Attribution>,
) -> Result<Vec<AggregatedAttribution>> {
    cells
        .iter()
        .map(|c| {
            let list: Vec<Attribution> = c.positions.iter().map(|p| cache[p].clone()).collect();
            AggregatedAttribution::new(&c.attribute, &c.group, c.category, &list)
        })
        .collect()
}

fn pair_diffs(aggs: &[AggregatedAttribution], group: &GroupSpec) -> Result<Vec<ContributionDiff>> {
    let mut out = Vec::new();
    for p in aggs.iter().filter(|a| a.attribute == group.attribute && a.group == group.protected_value) {
        let Some(np) = aggs.iter().find(|a| {
            a.attribute == group.attribute
                && a.group == group.non_protected_value
                && a.category == p.category
                && a.method == p.method
        }) else {
            continue;
        };
        for f in &p.features {
            out.push(ContributionDiff {
                attribute: group.attribute.clone(),
                method: p.method,
                category: p.category,
                feature: f.clone(),
                diff: contribution_diff(np, p, f)?,
            });
        }
    }
    Ok(out)
}

struct Raw {
    attributions: Vec<Attribution>,
    counterfactuals: Vec<Counterfactual>,
}

fn procedural(prep: &Prepared, skipped: &mut Vec<Skipped>, raw_out: &mut Raw) -> Result<(Procedural, Vec<Vec<String>>)> {
    let lime = prep.lime().stage("lime")?;
    let shap = prep.shap().stage("shap")?;
    let cfx = prep.counterfactuals().stage("counterfactual")?;
    let features = prep.train.mapping.feature_names();
    let mut out = Procedural::default();

    let mut pos_cells = Vec::new();
    let mut neg_cells = Vec::new();
    for g in &prep.groups {
        let sel = |cats: &[OutcomeCategory], skipped: &mut Vec<Skipped>| {
            select_cells(&prep.predictions, &prep.test, &prep.raw, g, cats, prep.config.cap, prep.config.seed, skipped)
        };
        pos_cells.extend(sel(&OutcomeCategory::POSITIVE, skipped).stage("select")?);
        neg_cells.extend(sel(&OutcomeCategory::NEGATIVE, skipped).stage("select")?);
    }

    let positions = union_positions(&pos_cells);
    let mut dist = Vec::new();
    for method in [Method::Lime, Method::Shap] {
        let cache = explain_positions(&prep.model, &prep.test, method, &lime, &shap, &positions)?;
        out.attributions.extend(aggregate_cells(&pos_cells, &cache).stage("aggregate")?);
        dist.extend(distribution_rows(prep, &pos_cells, method, &cache));
        if prep.config.keep_raw {
            raw_out.attributions.extend(cache.into_values());
        }
    }

    let positions = union_positions(&neg_cells);
    let found: BTreeMap<usize, Result<Counterfactual>> = positions
        .iter()
        .copied()
        .zip(cfx.find_rows(&prep.model, &prep.test, &positions))
        .collect();
    for cf in found.values().flatten() {
        let encoded = prep.train.mapping.encode_text(&cf.counterfactual).stage("counterfactual")?;
        let flips = prep.model.predict(&encoded) != u8::from(cf.factual_probability >= 0.5);
        if !cf.valid || !flips {
            out.invalid_counterfactuals += 1;
        }
    }
    for c in &neg_cells {
        let ok: Vec<Counterfactual> = c.positions.iter().filter_map(|p| found[p].as_ref().ok().cloned()).collect();
        let failed = c.positions.len() - ok.len();
        match CfGroupSummary::new(&c.attribute, &c.group, c.category, &features, &ok, failed) {
            Ok(s) => out.counterfactuals.push(s),
            Err(e) => skipped.push(Skipped {
                stage: "counterfactual",
                attribute: c.attribute.clone(),
                group: c.group.clone(),
                category: Some(c.category),
                method: Some(Method::Cf),
                reason: e.to_string(),
            }),
        }
    }
    if prep.config.keep_raw {
        raw_out.counterfactuals.extend(found.into_values().flatten());
    }

    for g in &prep.groups {
        out.contribution_diffs.extend(pair_diffs(&out.attributions, g).stage("aggregate")?);
        for p in out.counterfactuals.iter().filter(|s| s.attribute == g.attribute && s.group == g.protected_value) {
            let Some(np) = out
                .counterfactuals
                .iter()
                .find(|s| s.attribute == g.attribute && s.group == g.non_protected_value && s.category == p.category)
            else {
                continue;
            };
            for (j, f) in p.features.iter().enumerate() {
                out.change_percent_diffs.push(CfDiff {
                    attribute: g.attribute.clone(),
                    category: p.category,
                    feature: f.clone(),
                    change_percent_diff: p.change_percent[j] - np.change_percent[j],
                });
            }
        }
    }
    Ok((out, dist))
}

/// Writes files under the output directory and removes them again if the
/// command fails before finishing.
struct Output {
    root: PathBuf,
    created: Vec<PathBuf>,
    finished: bool,
}

impl Output {
    fn new(root: &Path) -> Result<Self> {
        let mut out = Self {
            root: root.to_path_buf(),
            created: Vec::new(),
            finished: false,
        };
        out.dir(Path::new(""))?;
        Ok(out)
    }

    fn dir(&mut self, rel: &Path) -> Result<PathBuf> {
        let path = self.root.join(rel);
        let mut missing = Vec::new();
        let mut p = path.as_path();
        while !p.as_os_str().is_empty() && !p.exists() {
            missing.push(p.to_path_buf());
            p = match p.parent() {
                Some(q) => q,
                None => break,
            };
        }
        fs::create_dir_all(&path).map_err(|e| Error::io(&path, e))?;
        self.created.extend(missing.into_iter().rev());
        Ok(path)
    }

    fn file(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel.as_ref());
        if let Some(parent) = rel.as_ref().parent() {
            self.dir(parent)?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.created.push(path.clone());
        Ok(path)
    }

    fn csv(&mut self, family: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        self.file(Path::new("csv").join(format!("{family}.csv")), &bytes)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.file(rel, &bytes)
    }

    fn model(&mut self, name: &str, model: &BlackBoxModel) -> Result<PathBuf> {
        let dir = self.dir(Path::new("models"))?;
        let path = dir.join(format!("{name}.snapshot"));
        save_snapshot(model, &path)?;
        self.created.push(path.clone());
        Ok(path)
    }

    fn finish(mut self) {
        self.finished = true;
    }
}

impl Drop for Output {
    fn drop(&mut self) {
        if self.finished {
            return;
        }
        for p in self.created.iter().rev() {
            if p.is_dir() {
                let _ = fs::remove_dir(p);
            } else {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn fairness_rows(reports: &[FairnessReport], label: &str) -> Vec<Vec<String>> {
    reports
        .iter()
        .flat_map(|r| {
            r.metrics.iter().map(move |m| {
                vec![
                    label.to_string(),
                    r.group.attribute.clone(),
                    m.metric.to_string(),
                    num(m.diff),
                    num(m.z),
                    num(m.rate_non_protected),
                    num(m.rate_protected),
                    num(r.accuracy),
                ]
            })
        })
        .collect()
}

const FAIRNESS_HEADER: &[&str] = &["model", "attribute", "metric", "diff", "z", "rate_non_protected", "rate_protected", "accuracy"];

fn attribution_rows(aggs: &[AggregatedAttribution]) -> Vec<Vec<String>> {
    aggs.iter()
        .flat_map(|a| {
            a.features.iter().enumerate().map(move |(j, f)| {
                vec![
                    a.method.to_string(),
                    a.attribute.clone(),
                    a.group.clone(),
                    a.category.to_string(),
                    f.clone(),
                    num(a.signed_mean[j]),
                    num(a.abs_mean[j]),
                    a.n.to_string(),
                ]
            })
        })
        .collect()
}

const ATTRIBUTION_HEADER: &[&str] = &["method", "attribute", "group", "category", "feature", "signed_mean", "abs_mean", "n"];

fn write_procedural(out: &mut Output, p: &Procedural, raw: &Raw, prep: &Prepared) -> Result<()> {
    out.csv("attributions", ATTRIBUTION_HEADER, attribution_rows(&p.attributions))?;
    out.csv(
        "contribution_diff",
        &["method", "attribute", "category", "feature", "diff"],
        p.contribution_diffs
            .iter()
            .map(|d| vec![d.method.to_string(), d.attribute.clone(), d.category.to_string(), d.feature.clone(), num(d.diff)])
            .collect(),
    )?;
    out.csv(
        "change_percent",
        &["attribute", "group", "category", "feature", "percent"],
        p.counterfactuals
            .iter()
            .flat_map(|s| {
                s.features.iter().enumerate().map(move |(j, f)| {
                    vec![s.attribute.clone(), s.group.clone(), s.category.to_string(), f.clone(), num(s.change_percent[j])]
                })
            })
            .collect(),
    )?;
    out.csv(
        "change_percent_diff",
        &["attribute", "category", "feature", "diff"],
        p.change_percent_diffs
            .iter()
            .map(|d| vec![d.attribute.clone(), d.category.to_string(), d.feature.clone(), num(d.change_percent_diff)])
            .collect(),
    )?;
    out.csv(
        "burden",
        &["attribute", "group", "category", "burden_scaled", "burden_unscaled", "n", "n_failed"],
        p.counterfactuals
            .iter()
            .map(|s| {
                vec![
                    s.attribute.clone(),
                    s.group.clone(),
                    s.category.to_string(),
                    num(s.burden.scaled),
                    num(s.burden.unscaled),
                    s.n.to_string(),
                    s.n_failed.to_string(),
                ]
            })
            .collect(),
    )?;
    if prep.config.keep_raw {
        out.json("raw/attributions.json", &raw.attributions)?;
        out.json("raw/counterfactuals.json", &raw.counterfactuals)?;
    }
    Ok(())
}

/// Per-instance protected-attribute contributions for the P cells, the data
/// behind the contribution distribution plots.
fn distribution_rows(prep: &Prepared, cells: &[Cell], method: Method, cache: &BTreeMap<usize, Attribution>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for c in cells.iter().filter(|c| c.category == OutcomeCategory::P) {
        let Some(j) = prep.train.mapping.feature_index(&c.attribute) else {
            continue;
        };
        for p in &c.positions {
            rows.push(vec![method.to_string(), c.attribute.clone(), c.group.clone(), p.to_string(), num(cache[p].contributions[j])]);
        }
    }
    rows
}

fn run<F>(config: &AuditConfig, command: &str, body: F) -> Result<AuditReport>
where
    F: FnOnce(&Prepared, &mut AuditReport, &mut Output) -> Result<()>,
{
    let prep = prepare(config)?;
    let mut out = Output::new(&config.out).stage("output")?;
    let mut report = prep.empty_report(command);
    body(&prep, &mut report, &mut out)?;
    out.json("report.json", &report).stage("output")?;
    out.finish();
    Ok(report)
}

fn audit_body(prep: &Prepared, report: &mut AuditReport, out: &mut Output) -> Result<()> {
    out.model(&prep.config.model.to_string(), &prep.model).stage("output")?;
    let groups = prep.fairness()?;
    out.csv("fairness", FAIRNESS_HEADER, fairness_rows(&groups, "full")).stage("output")?;
    report.distributive_fairness = Some(Distributive {
        accuracy: prep.accuracy,
        groups,
    });
    let mut raw = Raw {
        attributions: Vec::new(),
        counterfactuals: Vec::new(),
    };
    let (p, dist) = procedural(prep, &mut report.skipped, &mut raw)?;
    write_procedural(out, &p, &raw, prep).stage("output")?;
    out.csv("distribution", &["method", "attribute", "group", "instance", "contribution"], dist).stage("output")?;
    report.procedural_fairness = Some(p);
    Ok(())
}

/// Full audit: fairness table, per-cell aggregated explanations, diffs.
pub fn cmd_audit(config: &AuditConfig) -> Result<AuditReport> {
    run(config, "audit", audit_body)
}

/// Retrains without `group`'s attribute, measures fairness again and
/// aggregates the same positive cells under the new model. Shifts are taken
/// against the matching cells of `before_aggs`.
pub fn ablate_attribute(
    prep: &Prepared,
    group: &GroupSpec,
    before: &FairnessReport,
    before_aggs: &[AggregatedAttribution],
) -> Result<(AblationRecord, BlackBoxModel)> {
    let raw_after = prep.raw.drop_feature(&group.attribute).stage("ablate")?;
    let (train, test, model) = fit(&prep.config, &raw_after)?;
    let predictions = predict_all(&model, &test);
    let acc = accuracy(&model, &test).stage("ablate")?;
    let after = report_from_confusion(&confusion_from_predictions(&predictions, &test, &prep.raw, group)?, acc)
        .stage("ablate")?;

    let mut skipped = Vec::new();
    let cells = select_cells(
        &predictions,
        &test,
        &prep.raw,
        group,
        &OutcomeCategory::POSITIVE,
        prep.config.cap,
        prep.config.seed,
        &mut skipped,
    )
    .stage("select")?;
    let stats = Arc::new(TrainingStats::from_dataset(&train));
    let lime = LimeExplainer::new(train.mapping.clone(), stats, prep.config.lime.clone()).stage("lime")?;
    let shap = ShapExplainer::new(&train, prep.config.shap.clone()).stage("shap")?;

    let mut after_attributions = Vec::new();
    let mut shifts = Vec::new();
    let positions = union_positions(&cells);
    for method in [Method::Lime, Method::Shap] {
        let cache = explain_positions(&model, &test, method, &lime, &shap, &positions)?;
        let aggs = aggregate_cells(&cells, &cache).stage("aggregate")?;
        for a in &aggs {
            let prior = before_aggs
                .iter()
                .find(|b| b.attribute == a.attribute && b.group == a.group && b.category == a.category && b.method == a.method);
            if let Some(b) = prior {
                shifts.push(ablation_shift(b, a).stage("aggregate")?);
            }
        }
        after_attributions.extend(aggs);
    }
    Ok((
        AblationRecord {
            attribute: group.attribute.clone(),
            accuracy_before: prep.accuracy,
            accuracy_after: acc,
            before: before.clone(),
            after,
            after_attributions,
            shifts,
        },
        model,
    ))
}

/// Audit plus, for every audited attribute, a retrained model without it.
pub fn cmd_ablate(config: &AuditConfig) -> Result<AuditReport> {
    run(config, "ablate", |prep, report, out| {
        audit_body(prep, report, out)?;
        let before = report.distributive_fairness.as_ref().expect("audit fills fairness").groups.clone();
        let before_aggs = report.procedural_fairness.as_ref().expect("audit fills attributions").attributions.clone();
        let mut fair_rows = Vec::new();
        let mut shift_rows = Vec::new();
        for (g, b) in prep.groups.iter().zip(&before) {
            let (rec, model) = ablate_attribute(prep, g, b, &before_aggs)?;
            out.model(&format!("{}-without-{}", prep.config.model, g.attribute), &model).stage("output")?;
            fair_rows.extend(fairness_rows(std::slice::from_ref(&rec.before), "full"));
            fair_rows.extend(fairness_rows(std::slice::from_ref(&rec.after), &format!("without {}", g.attribute)));
            for s in &rec.shifts {
                for (f, v) in s.features.iter().zip(&s.shift) {
                    shift_rows.push(vec![
                        g.attribute.clone(),
                        s.method.to_string(),
                        s.group.clone(),
                        s.category.to_string(),
                        f.clone(),
                        num(*v),
                    ]);
                }
            }
            report.ablation.push(rec);
        }
        out.csv("ablation_fairness", FAIRNESS_HEADER, fair_rows).stage("output")?;
        out.csv("ablation_shift", &["removed", "method", "group", "category", "feature", "shift"], shift_rows)
            .stage("output")?;
        Ok(())
    })
}

/// AOPC curves of the LIME, SHAP and counterfactual global rankings on a
/// seeded sample of test instances, plus the random-order baseline.
pub fn aopc_curves(prep: &Prepared) -> Result<Vec<AopcCurve>> {
    let n = prep.config.aopc_instances.min(prep.test.len());
    if n == 0 {
        return Err(Error::Empty("AOPC sample"));
    }
    let mut rng = seed::rng(seed::derive(prep.config.seed, "aopc"));
    let mut sample = index::sample(&mut rng, prep.test.len(), n).into_vec();
    sample.sort_unstable();
    let instances = prep.test.subset(&sample);
    let mapping = &prep.train.mapping;
    let d = mapping.n_features();
    let baselines = feature_baselines(&prep.stats);
    let lime = prep.lime().stage("lime")?;
    let shap = prep.shap().stage("shap")?;
    let all: Vec<usize> = (0..instances.len()).collect();

    let mut curves = Vec::new();
    for method in [Method::Lime, Method::Shap] {
        // Each explanation is oriented towards the class predicted for its
        // instance, the class whose probability the curve tracks.
        let atts: Vec<Attribution> = explain_positions(&prep.model, &instances, method, &lime, &shap, &all)?
            .into_values()
            .map(|mut a| {
                if prep.model.predict(instances.row(a.instance)) == 0 {
                    a.contributions.iter_mut().for_each(|c| *c = -*c);
                }
                a
            })
            .collect();
        let mean = crate::aggregate::signed_mean(&atts).stage("aopc")?;
        let scores: Vec<f64> = mean.iter().map(|v| v.abs()).collect();
        let mut c = aopc(&prep.model, mapping, &instances.matrix, &rank_by_scores(&scores), &baselines, d, method.as_str())
            .stage("aopc")?;
        c.seed = Some(seed::derive(prep.config.seed, "aopc"));
        curves.push(c);
    }

    let negatives: Vec<usize> = all.iter().copied().filter(|&i| prep.model.predict(instances.row(i)) == 0).collect();
    let cfs: Vec<Counterfactual> = prep
        .counterfactuals()
        .stage("counterfactual")?
        .find_rows(&prep.model, &instances, &negatives)
        .into_iter()
        .flatten()
        .collect();
    let names = mapping.feature_names();
    let percents = crate::aggregate::feature_change_percent(&cfs, &names).stage("aopc")?;
    let mut c = aopc(&prep.model, mapping, &instances.matrix, &rank_by_scores(&percents), &baselines, d, Method::Cf.as_str())
        .stage("aopc")?;
    c.seed = Some(seed::derive(prep.config.seed, "aopc"));
    curves.push(c);

    curves.push(
        random_ranking_curve(
            &prep.model,
            mapping,
            &instances.matrix,
            &baselines,
            d,
            prep.config.aopc_trials,
            seed::derive(prep.config.seed, "random"),
        )
        .stage("aopc")?,
    );
    Ok(curves)
}

pub fn cmd_aopc(config: &AuditConfig) -> Result<AuditReport> {
    run(config, "aopc", |prep, report, out| {
        let curves = aopc_curves(prep)?;
        out.csv(
            "aopc",
            &["method", "rank", "aopc"],
            curves
                .iter()
                .flat_map(|c| c.points.iter().map(move |p| vec![c.method.clone(), p.rank.to_string(), num(p.aopc)]))
                .collect(),
        )
        .stage("output")?;
        report.evaluation = Some(Evaluation {
            aopc: curves,
            correlation: None,
        });
        Ok(())
    })
}

/// Cramér's V between every pair of discretized features.
pub fn correlation(config: &AuditConfig, raw: &RawDataset) -> Result<CorrelationMatrix> {
    let path = config
        .rules_path()
        .ok_or_else(|| Error::Invalid("no discretization rules given".into()))?;
    let rules = DiscretizationRules::from_path(&path).stage("correlate")?;
    correlation_matrix(&discretize(raw, &rules).stage("correlate")?).stage("correlate")
}

pub fn cmd_correlate(config: &AuditConfig) -> Result<AuditReport> {
    run(config, "correlate", |prep, report, out| {
        let m = correlation(&prep.config, &prep.raw)?;
        let mut header = vec!["feature"];
        header.extend(m.features.iter().map(String::as_str));
        let rows = m
            .features
            .iter()
            .zip(&m.values)
            .map(|(f, r)| std::iter::once(f.clone()).chain(r.iter().map(|v| num(*v))).collect())
            .collect();
        out.csv("correlation", &header, rows).stage("output")?;
        report.evaluation = Some(Evaluation {
            aopc: Vec::new(),
            correlation: Some(m),
        });
        Ok(())
    })
}

/// Explains the test instance at `index` with LIME or SHAP.
pub fn cmd_explain(config: &AuditConfig, index: usize, method: Method) -> Result<Attribution> {
    let prep = prepare(config)?;
    let x = prep.position(index)?;
    match method {
        Method::Lime => prep.lime()?.explain(&prep.model, x, index).stage("lime"),
        Method::Shap => prep.shap()?.explain(&prep.model, x, index).stage("shap"),
        other => Err(Error::Invalid(format!("{other} is not an attribution method"))),
    }
}

/// Counterfactual for the test instance at `index`.
pub fn cmd_counterfactual(config: &AuditConfig, index: usize) -> Result<Counterfactual> {
    let prep = prepare(config)?;
    let x = prep.position(index)?;
    prep.counterfactuals()?.find(&prep.model, x, index).stage("counterfactual")
}

impl Error {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::MissingInput(_) => 2,
            Error::AlreadyTarget => 3,
            Error::IndexOutOfRange { .. } => 4,
            _ => 1,
        }
    }
}
