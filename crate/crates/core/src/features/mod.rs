//! Feature generation and pre-processing.
//!
//! [`build_study_rows`] joins tests with their stays and derives the
//! row-level features that need no fitting (anti-organism key, prior
//! resistance, time transforms). [`fit_pipeline`] then learns every
//! statistic from training rows only, and [`PipelineState::apply`] replays
//! them on any row set.

mod matrix;
mod pipeline;
pub mod stats;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Cohort;

pub use matrix::{FeatureMatrix, RowMeta};
pub use pipeline::{
    eliminate_correlated, fit_pipeline, impute_missing, select_by_ttest, winsorize_record,
    Bounds, NumericRecord, PipelineOptions, PipelineState, ScaleBounds, CATEGORICAL_SOURCES,
    NUMERIC_COLUMNS, PIPELINE_VERSION, WINSORIZED_COLUMNS,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no fitting rows")]
    Empty,
    #[error("column `{0}` has no observed training values; cannot fit its statistics")]
    NoObservedValues(String),
    #[error("training rows contain a single class; the t-test needs both")]
    SingleClass,
    #[error("feature matrix: {0}")]
    Matrix(String),
    #[error("unsupported pipeline state version {0}")]
    Version(u32),
}

/// Minutes in the prior-resistance look-back exclusion window (48 hours).
pub const PRIOR_WINDOW_MIN: i64 = 48 * 60;

/// Interaction key between antibiotic and organism, e.g.
/// `ao_vancomycin_Staphylococcus epidermidis`.
pub fn make_anti_organism(antibiotic: &str, organism: &str) -> String {
    format!("ao_{antibiotic}_{organism}")
}

/// Minutes to `(days, ln(1 + max(days, 0)))`.
pub fn transform_times(offset_min: f64) -> (f64, f64) {
    let days = offset_min / 1440.0;
    (days, days.max(0.0).ln_1p())
}

/// One earlier result in a patient's history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedOutcome<'a> {
    pub anti_organism: &'a str,
    /// Culture time on the patient's clock, in minutes.
    pub time_min: i64,
    pub label: u8,
}

/// Mean outcome of the same-key tests taken strictly more than 48 hours
/// before `time_min`; `None` when none qualify.
pub fn compute_prior_resistance(history: &[TimedOutcome<'_>], anti_organism: &str, time_min: i64) -> Option<f64> {
    let (mut n, mut r) = (0usize, 0usize);
    for h in history {
        if h.anti_organism == anti_organism && time_min - h.time_min > PRIOR_WINDOW_MIN {
            n += 1;
            r += h.label as usize;
        }
    }
    (n > 0).then(|| r as f64 / n as f64)
}

/// One-hot indicators of `value` over a training vocabulary; values outside
/// the vocabulary encode as all zeros.
pub fn one_hot_encode(value: &str, vocabulary: &[String]) -> Vec<u8> {
    vocabulary.iter().map(|c| u8::from(c == value)).collect()
}

pub fn winsorize(values: &[f64], bounds: Bounds) -> Vec<f64> {
    values.iter().map(|&v| bounds.clamp(v)).collect()
}

pub fn minmax_scale(values: &[f64], bounds: ScaleBounds) -> Vec<f64> {
    values.iter().map(|&v| bounds.scale(v)).collect()
}

/// A test joined with its stay, plus the derived row-level features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub test_id: String,
    pub stay_id: String,
    pub patient_id: String,
    pub label: u8,
    pub organism: String,
    pub antibiotic: String,
    pub anti_organism: String,
    pub culture_site: Option<String>,
    pub gender: Option<String>,
    pub ethnicity: Option<String>,
    pub unit_location_id: Option<String>,
    pub unit_type: Option<String>,
    pub unit_stay_type: Option<String>,
    pub unit_admit_source: Option<String>,
    pub hospital_admit_source: Option<String>,
    pub admission_dx: Option<String>,
    pub age: f64,
    pub height_cm: Option<f64>,
    pub admit_weight_kg: Option<f64>,
    pub discharge_weight_kg: Option<f64>,
    pub hospital_admit_offset_min: Option<f64>,
    pub culture_taken_offset_min: f64,
    pub icu_visit_number: f64,
    pub culture_taken_year: i32,
    pub unit_admit_year: i32,
    pub y_pre: Option<f64>,
}

impl StudyRow {
    pub fn meta(&self) -> RowMeta {
        RowMeta {
            anti_organism: self.anti_organism.clone(),
            organism: self.organism.clone(),
            antibiotic: self.antibiotic.clone(),
            unit_admit_year: self.unit_admit_year,
            culture_taken_year: self.culture_taken_year,
        }
    }
}

/// Culture time on the patient's hospital clock: minutes since hospital
/// admission, i.e. the unit-relative culture offset minus the unit-relative
/// hospital admission offset.
pub fn patient_clock_min(culture_offset_min: i64, hospital_admit_offset_min: Option<i64>) -> i64 {
    culture_offset_min - hospital_admit_offset_min.unwrap_or(0)
}

/// Joins a validated cohort into study rows, in test order.
pub fn build_study_rows(cohort: &Cohort) -> Vec<StudyRow> {
    let stays = cohort.stay_index();
    let keys: Vec<String> = cohort
        .tests
        .iter()
        .map(|t| make_anti_organism(&t.antibiotic, &t.organism))
        .collect();

    let mut by_patient: HashMap<&str, Vec<TimedOutcome<'_>>> = HashMap::new();
    let mut clock = Vec::with_capacity(cohort.tests.len());
    for (t, key) in cohort.tests.iter().zip(&keys) {
        let stay = stays[t.patient_unit_stay_id.as_str()];
        let time_min = patient_clock_min(t.culture_taken_offset_min, stay.hospital_admit_offset_min);
        clock.push(time_min);
        by_patient.entry(stay.patient_id.as_str()).or_default().push(TimedOutcome {
            anti_organism: key,
            time_min,
            label: t.label(),
        });
    }

    cohort
        .tests
        .iter()
        .zip(&keys)
        .zip(&clock)
        .map(|((t, key), &time_min)| {
            let stay = stays[t.patient_unit_stay_id.as_str()];
            let history = &by_patient[stay.patient_id.as_str()];
            StudyRow {
                test_id: t.test_id.clone(),
                stay_id: t.patient_unit_stay_id.clone(),
                patient_id: stay.patient_id.clone(),
                label: t.label(),
                organism: t.organism.clone(),
                antibiotic: t.antibiotic.clone(),
                anti_organism: key.clone(),
                culture_site: t.culture_site.clone(),
                gender: stay.gender.clone(),
                ethnicity: stay.ethnicity.clone(),
                unit_location_id: stay.unit_location_id.clone(),
                unit_type: stay.unit_type.clone(),
                unit_stay_type: stay.unit_stay_type.clone(),
                unit_admit_source: stay.unit_admit_source.clone(),
                hospital_admit_source: stay.hospital_admit_source.clone(),
                admission_dx: stay.admission_dx.clone(),
                age: f64::from(stay.age),
                height_cm: stay.height_cm,
                admit_weight_kg: stay.admit_weight_kg,
                discharge_weight_kg: stay.discharge_weight_kg,
                hospital_admit_offset_min: stay.hospital_admit_offset_min.map(|v| v as f64),
                culture_taken_offset_min: t.culture_taken_offset_min as f64,
                icu_visit_number: f64::from(stay.icu_visit_number),
                culture_taken_year: t.culture_taken_year,
                unit_admit_year: stay.unit_admit_year,
                y_pre: compute_prior_resistance(history, key, time_min),
            }
        })
        .collect()
}
