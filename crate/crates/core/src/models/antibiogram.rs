use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::features::FeatureMatrix;
use crate::scalar::{decimal, Scalar};

/// Per anti-organism resistant fractions with a global fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct AntibiogramModel<T> {
    #[serde(with = "decimal::map")]
    pub cell_rates: BTreeMap<String, T>,
    /// (resistant, total) per key.
    pub cell_counts: BTreeMap<String, (usize, usize)>,
    #[serde(with = "decimal")]
    pub global_rate: T,
}

impl<T: Scalar> AntibiogramModel<T> {
    pub fn rate(&self, key: &str) -> T {
        self.cell_rates.get(key).copied().unwrap_or(self.global_rate)
    }

    pub fn predict(&self, rows: &FeatureMatrix<T>) -> Vec<T> {
        rows.meta.iter().map(|m| self.rate(&m.anti_organism)).collect()
    }
}

/// Counts resistant fractions per `meta.anti_organism` key.
pub fn fit_antibiogram<T: Scalar>(rows: &FeatureMatrix<T>) -> Result<AntibiogramModel<T>, ModelError> {
    if rows.n_rows() == 0 {
        return Err(ModelError::Empty);
    }
    let mut cell_counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (m, &y) in rows.meta.iter().zip(&rows.labels) {
        let c = cell_counts.entry(m.anti_organism.clone()).or_default();
        c.0 += y as usize;
        c.1 += 1;
    }
    let cell_rates = cell_counts
        .iter()
        .map(|(k, &(r, n))| (k.clone(), T::of_usize(r) / T::of_usize(n)))
        .collect();
    Ok(AntibiogramModel {
        cell_rates,
        cell_counts,
        global_rate: T::of_usize(rows.positives()) / T::of_usize(rows.n_rows()),
    })
}
