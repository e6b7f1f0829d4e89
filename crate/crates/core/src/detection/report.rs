use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::IntensityLevel;
use crate::llm::{BackendConfig, Flavor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionItem {
    pub value_id: String,
    /// Verbatim quotes from the analysed text; may be empty.
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatedValue {
    pub value_id: String,
    pub intensity: IntensityLevel,
    pub justification: String,
}

/// Model identity and sampling settings of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageModel {
    pub flavor: Flavor,
    pub model: String,
    pub temperature: f64,
    pub seed: i64,
}

impl From<&BackendConfig> for StageModel {
    fn from(c: &BackendConfig) -> Self {
        Self {
            flavor: c.flavor,
            model: c.model_name.clone(),
            temperature: c.temperature,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub detect: StageModel,
    /// Absent when the rating stage was disabled.
    pub rate: Option<StageModel>,
}

/// Result of analysing one text.
///
/// `ratings` is `None` when the rating stage was disabled for the run.
/// Otherwise its ids equal the detected ids, in the same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub text_id: String,
    pub input_text: String,
    pub theory_id: String,
    pub theory_version: u64,
    pub detected: Vec<DetectionItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratings: Option<Vec<RatedValue>>,
    pub no_values_flag: bool,
    pub model_metadata: ModelMetadata,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    /// Checks the structural invariants; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        for d in &self.detected {
            if !seen.insert(d.value_id.as_str()) {
                return Err(format!("duplicate detected value {:?}", d.value_id));
            }
        }
        if self.no_values_flag != self.detected.is_empty() {
            return Err("no_values_flag disagrees with detected list".into());
        }
        if let Some(ratings) = &self.ratings {
            let detected: Vec<&str> = self.detected.iter().map(|d| d.value_id.as_str()).collect();
            let rated: Vec<&str> = ratings.iter().map(|r| r.value_id.as_str()).collect();
            if detected != rated {
                return Err(format!("rated {rated:?} differ from detected {detected:?}"));
            }
            if let Some(r) = ratings.iter().find(|r| r.intensity == IntensityLevel::NoValues) {
                return Err(format!("value {:?} rated no_values", r.value_id));
            }
            if let Some(r) = ratings.iter().find(|r| r.justification.trim().is_empty()) {
                return Err(format!("value {:?} has an empty justification", r.value_id));
            }
        }
        Ok(())
    }

    pub fn rating(&self, value_id: &str) -> Option<&RatedValue> {
        self.ratings.as_ref()?.iter().find(|r| r.value_id == value_id)
    }
}
