use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lime,
    Shap,
    Cf,
    Random,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lime => "lime",
            Method::Shap => "shap",
            Method::Cf => "cf",
            Method::Random => "random",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Local surrogate details kept alongside a LIME attribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFit {
    /// Per original feature: sum of the raw-unit coefficients of its columns.
    pub coefficients: Vec<f64>,
    /// Per encoded column, raw units.
    pub column_coefficients: Vec<f64>,
    /// Per encoded column: `coefficient * (x - training mean)`.
    pub column_contributions: Vec<f64>,
    /// Kernel-weighted R^2 on the neighborhood.
    pub r2: f64,
    pub kernel_width: f64,
}

/// Signed contribution of each original feature to one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    /// Position of the explained row in the evaluated set.
    pub instance: usize,
    pub method: Method,
    pub features: Vec<String>,
    pub contributions: Vec<f64>,
    /// Baseline value: `intercept + sum(contributions)` reconstructs the
    /// explained score.
    pub intercept: f64,
    /// Black-box favorable-class probability of the instance.
    pub prediction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateFit>,
}

impl Attribution {
    pub fn contribution(&self, feature: &str) -> Option<f64> {
        self.features
            .iter()
            .position(|f| f == feature)
            .map(|j| self.contributions[j])
    }
}
