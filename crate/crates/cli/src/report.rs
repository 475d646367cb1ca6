//! Machine-readable evaluation summary. Every number in it can be recomputed
//! from the raw prediction files written next to it.

use std::collections::BTreeMap;
use std::path::Path;

use imfilm::imitation::train::MseTable;
use imfilm::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleScore {
    pub accuracy: f64,
    pub mean_diagonal: f64,
    /// Counts, rows are true classes in `StyleLabel::ALL` order.
    pub confusion: [[usize; 5]; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImitationScores {
    pub dual: MseTable,
    pub baseline: MseTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationScore {
    pub mixtures: usize,
    pub correct: usize,
    pub labels_correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub style: String,
    pub demos: usize,
    pub recovery: f64,
    pub contract_pass: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Keyed by variant name.
    pub style: Option<BTreeMap<String, StyleScore>>,
    pub imitation: Option<ImitationScores>,
    pub segmentation: Option<SegmentationScore>,
    pub recovery: Option<Vec<RecoveryRow>>,
}

impl EvalReport {
    /// The stored report, or an empty one.
    pub fn load_or_default(path: &Path) -> imfilm::Result<Self> {
        if !path.is_file() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
