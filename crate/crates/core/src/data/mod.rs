//! Dataset ingestion, encoding, splitting, discretization and group membership.

mod discretize;
mod encode;
mod raw;
mod schema;
mod stats;

pub use discretize::{discretize, Bin, CategoryGroup, DiscretizationRules, FeatureRule, RuleKind};
pub use encode::{
    encode, split, split_indices, EncodedColumn, EncodedDataset, FeatureMapping, FeatureValue, Matrix,
};
pub use raw::{load_csv, read_csv, GroupIndices, RawDataset};
pub use schema::{FeatureKind, FeatureSpec, GroupSpec, Schema, TargetSpec};
pub use stats::{FeatureStats, TrainingStats};
