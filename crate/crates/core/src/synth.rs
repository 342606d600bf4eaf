//! Synthetic cohorts drawn from a known logistic model, for checking every
//! downstream step against ground truth.
//!
//! Each test's log-odds is
//! `intercept + w_ao[key] + w_ypre * y_pre + age and weight slopes + w_dx[dx] +
//! (global + slope[key]) * (year - center_year)`,
//! where `y_pre` is computed from the patient's earlier sampled outcomes
//! exactly as the feature pipeline computes it. The intercept is solved by
//! bisection so that the mean true probability over study rows equals the
//! configured prevalence.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::auc;
use crate::features::{compute_prior_resistance, make_anti_organism, patient_clock_min, TimedOutcome};
use crate::ingest::{
    write_micro, write_stays, Cohort, MicrobiologyTest, PatientStay, SensitivityLabel, STUDY_ANTIBIOTICS,
    STUDY_ORGANISMS,
};
use crate::scalar::sigmoid;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("generator configuration: {0}")]
    Config(String),
    #[error("writing {path}: {message}")]
    Write { path: String, message: String },
}

/// Organisms outside the study grid, emitted so the cohort filter has work.
pub const OTHER_ORGANISMS: [&str; 3] = ["Proteus mirabilis", "Enterococcus faecalis", "Acinetobacter baumannii"];

const GENDERS: [&str; 2] = ["Female", "Male"];
const ETHNICITIES: [&str; 5] = ["African American", "Asian", "Caucasian", "Hispanic", "Other/Unknown"];
const LOCATIONS: [&str; 8] = ["L101", "L102", "L107", "L115", "L120", "L133", "L141", "L158"];
const UNIT_TYPES: [&str; 6] = ["CCU-CTICU", "CSICU", "MICU", "Med-Surg ICU", "Neuro ICU", "SICU"];
const UNIT_STAY_TYPES: [&str; 3] = ["admit", "stepdown/other", "transfer"];
const UNIT_ADMIT_SOURCES: [&str; 5] = ["Direct Admit", "Emergency Department", "Floor", "Operating Room", "Other Hospital"];
const HOSPITAL_ADMIT_SOURCES: [&str; 5] = ["Direct Admit", "Emergency Department", "Floor", "Operating Room", "Other Hospital"];
const ADMISSION_DX: [&str; 12] = [
    "CHF, congestive heart failure",
    "Cardiac arrest",
    "GI perforation/rupture",
    "Infarction, acute myocardial",
    "Overdose, other toxin",
    "Pneumonia, bacterial",
    "Respiratory failure",
    "Sepsis, pulmonary",
    "Sepsis, renal/UTI",
    "Spinal cord surgery, other",
    "Trauma, multiple",
    "Ventriculostomy",
];
const CULTURE_SITES: [&str; 6] = [
    "Blood, Venipuncture",
    "Bronchial Lavage",
    "Sputum, Tracheal Specimen",
    "Urine, Catheter Specimen",
    "Wound, Surgical",
    "Other",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedModel {
    /// Log-odds weight per anti-organism key.
    pub anti_organism: BTreeMap<String, f64>,
    /// Standard deviation of small random weights given to every key not
    /// listed in `anti_organism`.
    pub background_sd: f64,
    pub y_pre: f64,
    /// Per 10 years of age above 60.
    pub age_per_decade: f64,
    /// Per 10 kg of admission weight above 80 kg.
    pub weight_per_10kg: f64,
    /// Log-odds weight per admission diagnosis.
    pub admission_dx: BTreeMap<String, f64>,
}

impl Default for PlantedModel {
    fn default() -> Self {
        let ao = [
            ("nitrofurantoin", "Staphylococcus aureus", -5.0),
            ("vancomycin", "Staphylococcus epidermidis", -5.0),
            ("imipenem/cilastatin", "Escherichia coli", -4.5),
            ("vancomycin", "Staphylococcus aureus", -4.0),
            ("cefazolin", "Enterobacter cloacae", 4.5),
            ("ampicillin", "Pseudomonas aeruginosa", 4.5),
            ("ampicillin", "Klebsiella pneumoniae", 4.0),
            ("ampicillin/sulbactam", "Pseudomonas aeruginosa", 4.0),
            ("nitrofurantoin", "Pseudomonas aeruginosa", 3.5),
            ("imipenem/cilastatin", "Klebsiella pneumoniae", -3.0),
            ("nitrofurantoin", "Staphylococcus epidermidis", -3.0),
            ("trimethoprim/sulfamethoxazole", "Pseudomonas aeruginosa", 3.0),
            ("cefazolin", "Pseudomonas aeruginosa", 3.0),
            ("imipenem/cilastatin", "Enterobacter cloacae", -2.5),
            ("nitrofurantoin", "Escherichia coli", -2.5),
            ("ampicillin", "Enterobacter cloacae", 2.5),
            ("ampicillin", "Staphylococcus epidermidis", 2.5),
            ("oxacillin", "Staphylococcus aureus", 2.0),
            ("ciprofloxacin", "Escherichia coli", 2.0),
            ("cefipime", "Staphylococcus aureus", -2.0),
        ];
        Self {
            anti_organism: ao.iter().map(|(a, o, w)| (make_anti_organism(a, o), *w)).collect(),
            background_sd: 0.4,
            y_pre: 3.0,
            age_per_decade: 0.15,
            weight_per_10kg: 0.1,
            admission_dx: [("Ventriculostomy".to_string(), -3.0), ("Spinal cord surgery, other".to_string(), -2.5)]
                .into_iter()
                .collect(),
        }
    }
}

impl PlantedModel {
    /// No signal at all: every true probability equals the base rate.
    pub fn null() -> Self {
        Self {
            anti_organism: BTreeMap::new(),
            background_sd: 0.0,
            y_pre: 0.0,
            age_per_decade: 0.0,
            weight_per_10kg: 0.0,
            admission_dx: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalDrift {
    /// Log-odds change per year shared by every key.
    pub global_per_year: f64,
    /// Fraction of keys that also get their own yearly slope.
    pub drifting_key_fraction: f64,
    pub key_slope_sd: f64,
    pub center_year: i32,
}

impl Default for TemporalDrift {
    fn default() -> Self {
        Self { global_per_year: 0.08, drifting_key_fraction: 0.5, key_slope_sd: 0.45, center_year: 2010 }
    }
}

impl TemporalDrift {
    pub fn none() -> Self {
        Self { global_per_year: 0.0, drifting_key_fraction: 0.0, key_slope_sd: 0.0, center_year: 2010 }
    }
}

/// Probability that a field is written empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Missingness {
    pub height: f64,
    pub admit_weight: f64,
    pub discharge_weight: f64,
    pub hospital_admit_offset: f64,
    pub categorical: f64,
    pub culture_site: f64,
}

impl Default for Missingness {
    fn default() -> Self {
        Self { height: 0.1, admit_weight: 0.08, discharge_weight: 0.25, hospital_admit_offset: 0.02, categorical: 0.03, culture_site: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_stays: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Mean of the Poisson number of cultures after the first in a stay.
    pub extra_cultures_mean: f64,
    /// Chance a later culture grows the stay's previous organism again.
    pub repeat_organism: f64,
    /// Relative frequency of each study organism, in study order.
    pub organism_weights: Vec<f64>,
    /// Chance each study antibiotic is on a culture's panel, in study order.
    pub antibiotic_panel: Vec<f64>,
    pub other_organism_fraction: f64,
    pub pediatric_fraction: f64,
    /// Chance a patient returns to the ICU within the same hospitalization.
    pub readmission: f64,
    /// Mean true probability over study rows.
    pub prevalence: f64,
    /// Share of non-resistant results labelled Intermediate.
    pub intermediate_fraction: f64,
    pub planted: PlantedModel,
    pub drift: TemporalDrift,
    pub missingness: Missingness,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_stays: 1300,
            first_year: 2007,
            last_year: 2013,
            extra_cultures_mean: 0.6,
            repeat_organism: 0.6,
            organism_weights: vec![0.28, 0.22, 0.14, 0.16, 0.12, 0.08],
            antibiotic_panel: vec![0.4; 10],
            other_organism_fraction: 0.03,
            pediatric_fraction: 0.02,
            readmission: 0.12,
            prevalence: 0.285,
            intermediate_fraction: 0.038,
            planted: PlantedModel::default(),
            drift: TemporalDrift::default(),
            missingness: Missingness::default(),
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.n_stays == 0 {
            return bad("n_stays must be positive");
        }
        if self.first_year > self.last_year {
            return bad("first_year is after last_year");
        }
        if self.organism_weights.len() != STUDY_ORGANISMS.len() || self.antibiotic_panel.len() != STUDY_ANTIBIOTICS.len() {
            return bad("organism_weights needs 6 entries and antibiotic_panel 10");
        }
        let probs = [
            self.repeat_organism,
            self.other_organism_fraction,
            self.pediatric_fraction,
            self.readmission,
            self.intermediate_fraction,
            self.drift.drifting_key_fraction,
            self.missingness.height,
            self.missingness.admit_weight,
            self.missingness.discharge_weight,
            self.missingness.hospital_admit_offset,
            self.missingness.categorical,
            self.missingness.culture_site,
        ];
        if probs.iter().chain(&self.antibiotic_panel).any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.organism_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return bad("organism weights must be finite and non-negative");
        }
        if self.organism_weights.iter().sum::<f64>() <= 0.0 || self.antibiotic_panel.iter().all(|&p| p == 0.0) {
            return bad("every study cell would be empty");
        }
        if self.other_organism_fraction >= 1.0 || self.pediatric_fraction >= 1.0 {
            return bad("no study rows would remain after filtering");
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return bad("prevalence must lie in (0, 1)");
        }
        if !(self.extra_cultures_mean >= 0.0) || self.planted.background_sd < 0.0 || self.drift.key_slope_sd < 0.0 {
            return bad("means and standard deviations must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueRow {
    pub test_id: String,
    pub probability: f64,
    /// Survives the default cohort filter.
    pub in_study: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub intercept: f64,
    /// Every planted log-odds weight by feature name, including background
    /// anti-organism weights.
    pub coefficients: BTreeMap<String, f64>,
    pub drift_global_per_year: f64,
    pub drift_key_slopes: BTreeMap<String, f64>,
    pub drift_center_year: i32,
    pub target_prevalence: f64,
    /// Mean true probability over study rows.
    pub mean_probability: f64,
    pub empirical_prevalence: f64,
    /// AUC of study labels scored by their true probabilities.
    pub bayes_auc: f64,
    pub n_stays: usize,
    pub n_tests: usize,
    pub rows: Vec<TrueRow>,
}

impl GroundTruth {
    pub fn probability_of(&self) -> BTreeMap<&str, f64> {
        self.rows.iter().map(|r| (r.test_id.as_str(), r.probability)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub cohort: Cohort,
    pub truth: GroundTruth,
}

/// Per-test quantities fixed before the labels are drawn.
struct Draft {
    patient: usize,
    clock_min: i64,
    key: String,
    in_study: bool,
    /// Log-odds contribution of everything but the intercept and `y_pre`.
    fixed: f64,
    u_label: f64,
    u_intermediate: f64,
}

/// Sub-seed for stream `k` of a generator seeded with `seed`.
fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn weighted(rng: &mut ChaCha8Rng, w: &[f64]) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Labels and true probabilities for a given intercept, with the uniforms
/// held fixed (common random numbers) so the mean is monotone in it.
fn simulate(drafts: &[Draft], by_patient: &[Vec<usize>], w_ypre: f64, intercept: f64) -> (Vec<f64>, Vec<u8>) {
    let mut p = vec![0.0; drafts.len()];
    let mut y = vec![0u8; drafts.len()];
    for tests in by_patient {
        let mut history: Vec<TimedOutcome<'_>> = Vec::with_capacity(tests.len());
        for &i in tests {
            let d = &drafts[i];
            let prior = compute_prior_resistance(&history, &d.key, d.clock_min).unwrap_or(0.0);
            p[i] = sigmoid(intercept + d.fixed + w_ypre * prior);
            y[i] = u8::from(d.u_label < p[i]);
            history.push(TimedOutcome { anti_organism: &d.key, time_min: d.clock_min, label: y[i] });
        }
    }
    (p, y)
}

fn study_mean(p: &[f64], drafts: &[Draft]) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for (pi, d) in p.iter().zip(drafts) {
        if d.in_study {
            s += pi;
            n += 1;
        }
    }
    s / n.max(1) as f64
}

pub fn generate(cfg: &GeneratorConfig) -> Result<Generated, SynthError> {
    cfg.validate()?;
    let planted = &cfg.planted;

    // background and drift weights for every key, study grid first
    let mut keys: Vec<String> = Vec::new();
    for o in STUDY_ORGANISMS.iter().chain(&OTHER_ORGANISMS) {
        for a in STUDY_ANTIBIOTICS {
            keys.push(make_anti_organism(a, o));
        }
    }
    let mut coef_rng = stream(cfg.seed, u64::MAX);
    let mut ao_weight: BTreeMap<String, f64> = BTreeMap::new();
    let mut slopes: BTreeMap<String, f64> = BTreeMap::new();
    let bg = Normal::<f64>::new(0.0, planted.background_sd.max(0.0)).expect("finite sd");
    let sl = Normal::<f64>::new(0.0, cfg.drift.key_slope_sd.max(0.0)).expect("finite sd");
    for (k, key) in keys.iter().enumerate() {
        let study = k < STUDY_ORGANISMS.len() * STUDY_ANTIBIOTICS.len();
        let b = bg.sample(&mut coef_rng);
        let drifts = coef_rng.random::<f64>() < cfg.drift.drifting_key_fraction;
        let s = sl.sample(&mut coef_rng);
        if study {
            ao_weight.insert(key.clone(), planted.anti_organism.get(key).copied().unwrap_or(b));
            if drifts && s != 0.0 {
                slopes.insert(key.clone(), s);
            }
        }
    }

    let mut stays: Vec<PatientStay> = Vec::with_capacity(cfg.n_stays);
    let mut tests: Vec<MicrobiologyTest> = Vec::new();
    let mut drafts: Vec<Draft> = Vec::new();
    let mut by_patient: Vec<Vec<usize>> = Vec::new();
    let mis = &cfg.missingness;
    let years = (cfg.last_year - cfg.first_year + 1) as usize;
    let extra = (cfg.extra_cultures_mean > 0.0).then(|| Poisson::new(cfg.extra_cultures_mean).expect("positive mean"));
    let stay_len = Exp::new(1.0 / 5.0).expect("positive rate");

    let mut patient = 0usize;
    while stays.len() < cfg.n_stays {
        let mut rng = stream(cfg.seed, patient as u64);
        let pid = format!("P{patient:05}");
        let year = cfg.first_year + rng.random_range(0..years) as i32;
        let pediatric = rng.random::<f64>() < cfg.pediatric_fraction;
        let age: u32 = if pediatric {
            rng.random_range(1..16)
        } else {
            Normal::<f64>::new(63.0, 16.0).expect("sd").sample(&mut rng).round().clamp(16.0, 90.0) as u32
        };
        let gender = pick(&mut rng, &GENDERS);
        let male = gender == "Male";
        let height: f64 = Normal::<f64>::new(if male { 176.0 } else { 163.0 }, 8.0).expect("sd").sample(&mut rng);
        let weight0: f64 = Normal::<f64>::new(if male { 86.0 } else { 74.0 }, 18.0).expect("sd").sample(&mut rng).clamp(35.0, 250.0);
        let ethnicity = pick(&mut rng, &ETHNICITIES);
        let dx = pick(&mut rng, &ADMISSION_DX);
        let hospital_source = pick(&mut rng, &HOSPITAL_ADMIT_SOURCES);
        let mut hospital_offset: i64 = -(rng.random_range(0..3 * 1440) as i64);

        let mut visit = 1u32;
        let mut patient_tests = Vec::new();
        loop {
            let sid = format!("S{:05}", stays.len());
            let len_days = 1.0 + stay_len.sample(&mut rng);
            let weight = weight0 + Normal::<f64>::new(0.0, 2.0).expect("sd").sample(&mut rng);
            let discharge = weight + Normal::<f64>::new(-1.0, 3.0).expect("sd").sample(&mut rng);
            let categorical = |rng: &mut ChaCha8Rng, v: &str| (rng.random::<f64>() >= mis.categorical).then(|| v.to_string());
            let unit_location = pick(&mut rng, &LOCATIONS);
            let unit_type = pick(&mut rng, &UNIT_TYPES);
            let unit_stay_type = if visit == 1 { pick(&mut rng, &UNIT_STAY_TYPES[..2]) } else { "transfer" };
            let unit_source = pick(&mut rng, &UNIT_ADMIT_SOURCES);
            let stay = PatientStay {
                patient_unit_stay_id: sid.clone(),
                patient_id: pid.clone(),
                gender: categorical(&mut rng, gender),
                age,
                ethnicity: categorical(&mut rng, ethnicity),
                height_cm: (rng.random::<f64>() >= mis.height).then(|| (height * 10.0).round() / 10.0),
                admit_weight_kg: (rng.random::<f64>() >= mis.admit_weight).then(|| (weight * 10.0).round() / 10.0),
                discharge_weight_kg: (rng.random::<f64>() >= mis.discharge_weight).then(|| (discharge * 10.0).round() / 10.0),
                unit_location_id: categorical(&mut rng, unit_location),
                unit_type: categorical(&mut rng, unit_type),
                unit_stay_type: categorical(&mut rng, unit_stay_type),
                unit_admit_source: categorical(&mut rng, unit_source),
                hospital_admit_source: categorical(&mut rng, hospital_source),
                hospital_admit_offset_min: (rng.random::<f64>() >= mis.hospital_admit_offset).then_some(hospital_offset),
                icu_visit_number: visit,
                admission_dx: categorical(&mut rng, dx),
                unit_admit_year: year,
            };

            let n_cultures = 1 + extra.as_ref().map_or(0, |e| e.sample(&mut rng) as usize);
            let mut times: Vec<i64> = (0..n_cultures)
                .map(|_| rng.random_range(-1440..(len_days * 1440.0) as i64 + 1))
                .collect();
            times.sort_unstable();
            let mut organism: Option<&str> = None;
            for &t in &times {
                let org = match organism {
                    Some(o) if rng.random::<f64>() < cfg.repeat_organism => o,
                    _ => {
                        if rng.random::<f64>() < cfg.other_organism_fraction {
                            pick(&mut rng, &OTHER_ORGANISMS)
                        } else {
                            STUDY_ORGANISMS[weighted(&mut rng, &cfg.organism_weights)]
                        }
                    }
                };
                organism = Some(org);
                let site = pick(&mut rng, &CULTURE_SITES);
                let site = (rng.random::<f64>() >= mis.culture_site).then(|| site.to_string());
                let mut panel: Vec<usize> = (0..STUDY_ANTIBIOTICS.len()).filter(|&a| rng.random::<f64>() < cfg.antibiotic_panel[a]).collect();
                if panel.is_empty() {
                    panel.push(weighted(&mut rng, &cfg.antibiotic_panel));
                }
                for a in panel {
                    let ab = STUDY_ANTIBIOTICS[a];
                    let key = make_anti_organism(ab, org);
                    let in_grid = STUDY_ORGANISMS.contains(&org);
                    let dt = f64::from(year - cfg.drift.center_year);
                    let mut fixed = ao_weight.get(&key).copied().unwrap_or(0.0)
                        + planted.age_per_decade * (f64::from(age) - 60.0) / 10.0
                        + planted.weight_per_10kg * (weight - 80.0) / 10.0
                        + planted.admission_dx.get(dx).copied().unwrap_or(0.0)
                        + cfg.drift.global_per_year * dt;
                    fixed += slopes.get(&key).copied().unwrap_or(0.0) * dt;
                    patient_tests.push(drafts.len());
                    drafts.push(Draft {
                        patient,
                        clock_min: patient_clock_min(t, Some(hospital_offset)),
                        key,
                        in_study: in_grid && !pediatric,
                        fixed,
                        u_label: rng.random(),
                        u_intermediate: rng.random(),
                    });
                    tests.push(MicrobiologyTest {
                        test_id: format!("T{:06}", tests.len()),
                        patient_unit_stay_id: sid.clone(),
                        culture_taken_offset_min: t,
                        culture_taken_year: year,
                        culture_site: site.clone(),
                        organism: org.to_string(),
                        antibiotic: ab.to_string(),
                        sensitivity: SensitivityLabel::Sensitive,
                    });
                }
            }
            stays.push(stay);
            if stays.len() >= cfg.n_stays || visit >= 3 || rng.random::<f64>() >= cfg.readmission {
                break;
            }
            // the next unit stay starts later in the same hospitalization
            let gap = ((len_days + rng.random_range(1.0..10.0)) * 1440.0) as i64;
            hospital_offset -= gap;
            visit += 1;
        }
        debug_assert!(patient_tests.iter().all(|&i| drafts[i].patient == patient));
        by_patient.push(patient_tests);
        patient += 1;
    }
    for tests in &mut by_patient {
        tests.sort_by_key(|&i| (drafts[i].clock_min, i));
    }
    if !drafts.iter().any(|d| d.in_study) {
        return Err(SynthError::Config("no generated test falls in the study grid".into()));
    }

    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let (p, _) = simulate(&drafts, &by_patient, planted.y_pre, mid);
        if study_mean(&p, &drafts) < cfg.prevalence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let intercept = 0.5 * (lo + hi);
    let (p, y) = simulate(&drafts, &by_patient, planted.y_pre, intercept);

    for ((t, d), &label) in tests.iter_mut().zip(&drafts).zip(&y) {
        t.sensitivity = if label == 1 {
            SensitivityLabel::Resistant
        } else if d.u_intermediate < cfg.intermediate_fraction {
            SensitivityLabel::Intermediate
        } else {
            SensitivityLabel::Sensitive
        };
    }

    let study: Vec<usize> = (0..drafts.len()).filter(|&i| drafts[i].in_study).collect();
    let sp: Vec<f64> = study.iter().map(|&i| p[i]).collect();
    let sy: Vec<u8> = study.iter().map(|&i| y[i]).collect();
    let bayes_auc = auc(&sp, &sy).unwrap_or(0.5);
    let mut coefficients: BTreeMap<String, f64> = ao_weight;
    coefficients.insert("y_pre".into(), planted.y_pre);
    coefficients.insert("age_per_decade".into(), planted.age_per_decade);
    coefficients.insert("admit_weight_per_10kg".into(), planted.weight_per_10kg);
    for (dx, w) in &planted.admission_dx {
        coefficients.insert(format!("apacheadmissiondx_{dx}"), *w);
    }
    let truth = GroundTruth {
        seed: cfg.seed,
        intercept,
        coefficients,
        drift_global_per_year: cfg.drift.global_per_year,
        drift_key_slopes: slopes,
        drift_center_year: cfg.drift.center_year,
        target_prevalence: cfg.prevalence,
        mean_probability: study_mean(&p, &drafts),
        empirical_prevalence: sy.iter().map(|&v| v as usize).sum::<usize>() as f64 / sy.len() as f64,
        bayes_auc,
        n_stays: stays.len(),
        n_tests: tests.len(),
        rows: tests
            .iter()
            .zip(&drafts)
            .zip(&p)
            .map(|((t, d), &pr)| TrueRow { test_id: t.test_id.clone(), probability: pr, in_study: d.in_study })
            .collect(),
    };
    Ok(Generated { cohort: Cohort { stays, tests }, truth })
}

/// Writes `stays.csv`, `micro.csv` and `ground_truth.json` into `dir`.
pub fn write_outputs(dir: &Path, g: &Generated, header_comment: Option<&str>) -> Result<(), SynthError> {
    let err = |path: &Path, e: &dyn std::fmt::Display| SynthError::Write { path: path.display().to_string(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(|e| err(dir, &e))?;
    let stays = dir.join("stays.csv");
    let f = std::fs::File::create(&stays).map_err(|e| err(&stays, &e))?;
    write_stays(std::io::BufWriter::new(f), &g.cohort.stays, header_comment).map_err(|e| err(&stays, &e))?;
    let micro = dir.join("micro.csv");
    let f = std::fs::File::create(&micro).map_err(|e| err(&micro, &e))?;
    write_micro(std::io::BufWriter::new(f), &g.cohort.tests, header_comment).map_err(|e| err(&micro, &e))?;
    let truth = dir.join("ground_truth.json");
    let mut body = serde_json::to_value(&g.truth).map_err(|e| err(&truth, &e))?;
    if let (Some(h), Some(obj)) = (header_comment, body.as_object_mut()) {
        obj.insert("header".into(), serde_json::Value::String(h.to_string()));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(&truth).map_err(|e| err(&truth, &e))?);
    serde_json::to_writer_pretty(&mut f, &body).map_err(|e| err(&truth, &e))?;
    writeln!(f).and_then(|_| f.flush()).map_err(|e| err(&truth, &e))?;
    Ok(())
}
