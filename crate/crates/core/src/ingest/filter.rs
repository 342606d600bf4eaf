use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::Cohort;

pub const STUDY_ORGANISMS: [&str; 6] = [
    "Staphylococcus aureus",
    "Escherichia coli",
    "Klebsiella pneumoniae",
    "Pseudomonas aeruginosa",
    "Staphylococcus epidermidis",
    "Enterobacter cloacae",
];

// Spellings follow the source study's list, including "cefipime".
pub const STUDY_ANTIBIOTICS: [&str; 10] = [
    "vancomycin",
    "imipenem/cilastatin",
    "cefipime",
    "oxacillin",
    "ciprofloxacin",
    "nitrofurantoin",
    "trimethoprim/sulfamethoxazole",
    "cefazolin",
    "ampicillin/sulbactam",
    "ampicillin",
];

fn canonical(list: &'static [&'static str], name: &str) -> Option<&'static str> {
    let needle = name.trim();
    list.iter().copied().find(|c| c.eq_ignore_ascii_case(needle))
}

pub fn canonical_organism(name: &str) -> Option<&'static str> {
    canonical(&STUDY_ORGANISMS, name)
}

pub fn canonical_antibiotic(name: &str) -> Option<&'static str> {
    canonical(&STUDY_ANTIBIOTICS, name)
}

/// Study inclusion rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortFilter {
    pub min_age: u32,
    /// When set, cultures taken earlier than this many minutes relative to
    /// unit admission are excluded. Unset keeps pre-admission cultures.
    pub min_culture_offset_min: Option<i64>,
}

impl Default for CohortFilter {
    fn default() -> Self {
        Self {
            min_age: 16,
            min_culture_offset_min: None,
        }
    }
}

impl CohortFilter {
    /// Keeps adult tests on the 6 x 10 organism/antibiotic grid, with names
    /// rewritten to their canonical spelling; drops stays left without tests.
    pub fn apply(&self, cohort: &Cohort) -> Cohort {
        let stays = cohort.stay_index();
        let mut tests = Vec::with_capacity(cohort.tests.len());
        for t in &cohort.tests {
            let Some(stay) = stays.get(t.patient_unit_stay_id.as_str()) else {
                continue;
            };
            if stay.age < self.min_age {
                continue;
            }
            if let Some(min) = self.min_culture_offset_min {
                if t.culture_taken_offset_min < min {
                    continue;
                }
            }
            let (Some(org), Some(ab)) = (canonical_organism(&t.organism), canonical_antibiotic(&t.antibiotic)) else {
                continue;
            };
            let mut kept = t.clone();
            kept.organism = org.to_string();
            kept.antibiotic = ab.to_string();
            tests.push(kept);
        }
        let used: HashSet<&str> = tests.iter().map(|t| t.patient_unit_stay_id.as_str()).collect();
        let stays = cohort
            .stays
            .iter()
            .filter(|s| used.contains(s.patient_unit_stay_id.as_str()))
            .cloned()
            .collect();
        Cohort { stays, tests }
    }
}

pub fn apply_cohort_filter(cohort: &Cohort) -> Cohort {
    CohortFilter::default().apply(cohort)
}
