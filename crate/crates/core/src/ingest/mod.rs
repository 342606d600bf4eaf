//! Raw cohort tables: typed records, delimited-text loading, integrity
//! checks, and the study cohort filter.

mod filter;
mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{
    apply_cohort_filter, canonical_antibiotic, canonical_organism, CohortFilter,
    STUDY_ANTIBIOTICS, STUDY_ORGANISMS,
};
pub use table::{load_tables, read_micro, read_stays, write_micro, write_stays, MICRO_COLUMNS, STAY_COLUMNS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: missing required column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}: row {row}, column `{column}`: {message}")]
    Cell {
        file: String,
        row: u64,
        column: String,
        message: String,
    },
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
}

/// Laboratory susceptibility result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensitivityLabel {
    Sensitive,
    Intermediate,
    Resistant,
}

impl SensitivityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SensitivityLabel::Sensitive => "Sensitive",
            SensitivityLabel::Intermediate => "Intermediate",
            SensitivityLabel::Resistant => "Resistant",
        }
    }
}

impl fmt::Display for SensitivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensitivityLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sensitive" => Ok(SensitivityLabel::Sensitive),
            "intermediate" => Ok(SensitivityLabel::Intermediate),
            "resistant" => Ok(SensitivityLabel::Resistant),
            _ => Err(format!(
                "unknown sensitivity label {s:?} (expected Sensitive, Intermediate or Resistant)"
            )),
        }
    }
}

/// Resistant is the positive class; Sensitive and Intermediate are pooled as
/// non-resistant.
pub fn binarize_label(label: SensitivityLabel) -> u8 {
    match label {
        SensitivityLabel::Resistant => 1,
        SensitivityLabel::Sensitive | SensitivityLabel::Intermediate => 0,
    }
}

/// One ICU unit stay with its demographic and admission context.
///
/// Categorical fields hold `None` for an empty cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientStay {
    pub patient_unit_stay_id: String,
    pub patient_id: String,
    pub gender: Option<String>,
    pub age: u32,
    pub ethnicity: Option<String>,
    pub height_cm: Option<f64>,
    pub admit_weight_kg: Option<f64>,
    pub discharge_weight_kg: Option<f64>,
    pub unit_location_id: Option<String>,
    pub unit_type: Option<String>,
    pub unit_stay_type: Option<String>,
    pub unit_admit_source: Option<String>,
    pub hospital_admit_source: Option<String>,
    /// Minutes from unit admission to hospital admission (usually negative).
    pub hospital_admit_offset_min: Option<i64>,
    pub icu_visit_number: u32,
    pub admission_dx: Option<String>,
    pub unit_admit_year: i32,
}

/// One culture x antibiotic susceptibility result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrobiologyTest {
    pub test_id: String,
    pub patient_unit_stay_id: String,
    /// Minutes from unit admission to culture; negative for pre-admission cultures.
    pub culture_taken_offset_min: i64,
    pub culture_taken_year: i32,
    pub culture_site: Option<String>,
    pub organism: String,
    pub antibiotic: String,
    pub sensitivity: SensitivityLabel,
}

impl MicrobiologyTest {
    pub fn label(&self) -> u8 {
        binarize_label(self.sensitivity)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cohort {
    pub stays: Vec<PatientStay>,
    pub tests: Vec<MicrobiologyTest>,
}

impl Cohort {
    /// Checks unique stay and test ids and that every test references a stay.
    pub fn validate(&self) -> Result<(), IngestError> {
        let mut stay_ids = std::collections::HashSet::with_capacity(self.stays.len());
        for s in &self.stays {
            if !stay_ids.insert(s.patient_unit_stay_id.as_str()) {
                return Err(IngestError::Integrity(format!(
                    "duplicate patient_unit_stay_id {:?}",
                    s.patient_unit_stay_id
                )));
            }
            if s.icu_visit_number < 1 {
                return Err(IngestError::Integrity(format!(
                    "stay {:?}: icu_visit_number must be >= 1",
                    s.patient_unit_stay_id
                )));
            }
        }
        let mut test_ids = std::collections::HashSet::with_capacity(self.tests.len());
        for t in &self.tests {
            if !test_ids.insert(t.test_id.as_str()) {
                return Err(IngestError::Integrity(format!(
                    "duplicate test_id {:?}",
                    t.test_id
                )));
            }
            if !stay_ids.contains(t.patient_unit_stay_id.as_str()) {
                return Err(IngestError::Integrity(format!(
                    "test {:?} references unknown patient_unit_stay_id {:?}",
                    t.test_id, t.patient_unit_stay_id
                )));
            }
        }
        Ok(())
    }

    pub fn stay_index(&self) -> std::collections::HashMap<&str, &PatientStay> {
        self.stays
            .iter()
            .map(|s| (s.patient_unit_stay_id.as_str(), s))
            .collect()
    }

    pub fn resistant_fraction(&self) -> Option<f64> {
        if self.tests.is_empty() {
            return None;
        }
        let r = self.tests.iter().map(|t| t.label() as usize).sum::<usize>();
        Some(r as f64 / self.tests.len() as f64)
    }
}
