use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
            categories: None,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
            categories: Some(categories.into_iter().map(Into::into).collect()),
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == FeatureKind::Categorical
    }

    /// Declared categories; empty for numeric features.
    pub fn category_list(&self) -> &[String] {
        self.categories.as_deref().unwrap_or(&[])
    }

    pub fn category_index(&self, value: &str) -> Option<usize> {
        self.category_list().iter().position(|c| c == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub favorable: String,
}

/// Protected attribute with the value defining the protected group (G+)
/// and the value defining the non-protected group (G-).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupSpec {
    #[serde(rename = "name")]
    pub attribute: String,
    pub protected_value: String,
    pub non_protected_value: String,
}

impl GroupSpec {
    pub fn new(
        attribute: impl Into<String>,
        protected_value: impl Into<String>,
        non_protected_value: impl Into<String>,
    ) -> Self {
        Self {
            attribute: attribute.into(),
            protected_value: protected_value.into(),
            non_protected_value: non_protected_value.into(),
        }
    }

    /// The same attribute with the two roles exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(
            self.attribute.clone(),
            self.non_protected_value.clone(),
            self.protected_value.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSpec>,
    pub target: TargetSpec,
    #[serde(default)]
    pub protected: Vec<GroupSpec>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>, target: TargetSpec, protected: Vec<GroupSpec>) -> Result<Self> {
        let schema = Self {
            features,
            target,
            protected,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            match (f.kind, &f.categories) {
                (FeatureKind::Categorical, Some(cats)) if !cats.is_empty() => {
                    let distinct: HashSet<_> = cats.iter().collect();
                    if distinct.len() != cats.len() {
                        return Err(Error::Schema(format!("duplicate category in `{}`", f.name)));
                    }
                }
                (FeatureKind::Categorical, _) => {
                    return Err(Error::Schema(format!(
                        "categorical feature `{}` declares no categories",
                        f.name
                    )))
                }
                (FeatureKind::Numeric, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "numeric feature `{}` declares categories",
                        f.name
                    )))
                }
                (FeatureKind::Numeric, None) => {}
            }
        }
        if seen.contains(self.target.name.as_str()) {
            return Err(Error::Schema(format!(
                "target `{}` is also listed as a feature",
                self.target.name
            )));
        }
        for g in &self.protected {
            let feature = self.feature(&g.attribute).ok_or_else(|| {
                Error::Schema(format!("protected attribute `{}` is not a feature", g.attribute))
            })?;
            if !feature.is_categorical() {
                return Err(Error::Schema(format!(
                    "protected attribute `{}` must be categorical",
                    g.attribute
                )));
            }
            if g.protected_value == g.non_protected_value {
                return Err(Error::Schema(format!(
                    "protected attribute `{}` uses the same value for both groups",
                    g.attribute
                )));
            }
            for v in [&g.protected_value, &g.non_protected_value] {
                if feature.category_index(v).is_none() {
                    return Err(Error::Schema(format!(
                        "`{v}` is not a category of `{}`",
                        g.attribute
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn group(&self, attribute: &str) -> Option<&GroupSpec> {
        self.protected.iter().find(|g| g.attribute == attribute)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target() -> TargetSpec {
        TargetSpec {
            name: "y".into(),
            favorable: "1".into(),
        }
    }

    #[test]
    fn parses_json_document() {
        let text = r#"{
            "features": [
                {"name": "age", "kind": "numeric"},
                {"name": "sex", "kind": "categorical", "categories": ["Female", "Male"]}
            ],
            "target": {"name": "income", "favorable": ">50K"},
            "protected": [{"name": "sex", "protected_value": "Female", "non_protected_value": "Male"}]
        }"#;
        let schema = Schema::from_json(text).unwrap();
        assert_eq!(schema.feature_names(), vec!["age", "sex"]);
        assert_eq!(schema.group("sex").unwrap().protected_value, "Female");
    }

    #[test]
    fn rejects_invalid_schemas() {
        let dup = Schema::new(
            vec![FeatureSpec::numeric("a"), FeatureSpec::numeric("a")],
            target(),
            vec![],
        );
        assert!(matches!(dup, Err(Error::Schema(_))));

        let target_as_feature = Schema::new(vec![FeatureSpec::numeric("y")], target(), vec![]);
        assert!(target_as_feature.is_err());

        let numeric_protected = Schema::new(
            vec![FeatureSpec::numeric("a")],
            target(),
            vec![GroupSpec::new("a", "1", "2")],
        );
        assert!(numeric_protected.is_err());

        let same_values = Schema::new(
            vec![FeatureSpec::categorical("s", ["F", "M"])],
            target(),
            vec![GroupSpec::new("s", "F", "F")],
        );
        assert!(same_values.is_err());

        let undeclared = Schema::new(
            vec![FeatureSpec::categorical("s", ["F", "M"])],
            target(),
            vec![GroupSpec::new("s", "F", "X")],
        );
        assert!(undeclared.is_err());
    }
}
