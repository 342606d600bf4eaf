use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::stats::{pearson, percentile_linear, sorted_finite, welch_p_value};
use super::{transform_times, FeatureError, FeatureMatrix, StudyRow};
use crate::scalar::Scalar;

pub const PIPELINE_VERSION: u32 = 1;

pub const NUMERIC_COLUMNS: [&str; 10] = [
    "age",
    "height_cm",
    "admit_weight_kg",
    "icu_visit_number",
    "hospital_admit_days",
    "hospital_admit_log_days",
    "culture_taken_days",
    "culture_taken_log_days",
    "culture_taken_year",
    "y_pre",
];

const ADMIT_WEIGHT: usize = 2;

pub const WINSORIZED_COLUMNS: [&str; 6] = [
    "height_cm",
    "admit_weight_kg",
    "hospital_admit_days",
    "hospital_admit_log_days",
    "culture_taken_days",
    "culture_taken_log_days",
];

/// One-hot source columns by output prefix. The anti-organism key already
/// carries its `ao_` prefix and is used verbatim as the column name.
pub const CATEGORICAL_SOURCES: [&str; 10] = [
    "ao",
    "gender",
    "ethnicity",
    "locationid",
    "unittype",
    "unitstaytype",
    "unitadmitsource",
    "hospitaladmitsource",
    "apacheadmissiondx",
    "culturesite",
];

/// Category used for an empty categorical cell.
pub const MISSING_CATEGORY: &str = "(missing)";

fn category(row: &StudyRow, source: usize) -> &str {
    let v = match source {
        0 => return &row.anti_organism,
        1 => &row.gender,
        2 => &row.ethnicity,
        3 => &row.unit_location_id,
        4 => &row.unit_type,
        5 => &row.unit_stay_type,
        6 => &row.unit_admit_source,
        7 => &row.hospital_admit_source,
        8 => &row.admission_dx,
        9 => &row.culture_site,
        _ => unreachable!("unknown categorical source {source}"),
    };
    v.as_deref().unwrap_or(MISSING_CATEGORY)
}

fn indicator_name(source: usize, cat: &str) -> String {
    if source == 0 {
        cat.to_string()
    } else {
        format!("{}_{}", CATEGORICAL_SOURCES[source], cat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleBounds {
    pub min: f64,
    pub max: f64,
}

impl ScaleBounds {
    /// Maps into `[0, 1]`; a constant training column maps everything to 0.
    pub fn scale(&self, v: f64) -> f64 {
        let range = self.max - self.min;
        if range <= 0.0 {
            0.0
        } else {
            ((v - self.min) / range).clamp(0.0, 1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    /// Winsorization quantiles, as fractions.
    pub winsor_lower: f64,
    pub winsor_upper: f64,
    /// Columns are kept when their two-sided Welch p-value is below this.
    pub ttest_threshold: f64,
    /// Pairs with |r| above this lose their later column.
    pub correlation_threshold: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            winsor_lower: 0.005,
            winsor_upper: 0.995,
            ttest_threshold: 0.1,
            correlation_threshold: 0.75,
        }
    }
}

/// Raw numeric features of one row before winsorizing and imputation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericRecord {
    pub values: [Option<f64>; NUMERIC_COLUMNS.len()],
    pub discharge_weight_kg: Option<f64>,
}

impl NumericRecord {
    pub fn from_row(row: &StudyRow) -> Self {
        let hosp = row.hospital_admit_offset_min.map(transform_times);
        let (cd, cl) = transform_times(row.culture_taken_offset_min);
        Self {
            values: [
                Some(row.age),
                row.height_cm,
                row.admit_weight_kg,
                Some(row.icu_visit_number),
                hosp.map(|h| h.0),
                hosp.map(|h| h.1),
                Some(cd),
                Some(cl),
                Some(f64::from(row.culture_taken_year)),
                row.y_pre,
            ],
            discharge_weight_kg: row.discharge_weight_kg,
        }
    }
}

/// Every statistic fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub version: u32,
    pub winsor_bounds: BTreeMap<String, Bounds>,
    pub medians: BTreeMap<String, f64>,
    pub selected_columns: Vec<String>,
    pub scale_bounds: BTreeMap<String, ScaleBounds>,
    pub vocabularies: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Numeric(usize),
    Indicator(usize, String),
}

fn generated_columns(vocabularies: &BTreeMap<String, Vec<String>>) -> Vec<(String, Source)> {
    let mut cols: Vec<(String, Source)> = NUMERIC_COLUMNS
        .iter()
        .enumerate()
        .map(|(k, n)| (n.to_string(), Source::Numeric(k)))
        .collect();
    for (s, prefix) in CATEGORICAL_SOURCES.iter().enumerate() {
        if let Some(vocab) = vocabularies.get(*prefix) {
            for cat in vocab {
                cols.push((indicator_name(s, cat), Source::Indicator(s, cat.clone())));
            }
        }
    }
    cols
}

/// Clamps the winsorized columns in place; the discharge weight (used as the
/// admit-weight fallback) is clamped with the admit-weight bounds.
pub fn winsorize_record(rec: &mut NumericRecord, bounds: &BTreeMap<String, Bounds>) {
    for (k, name) in NUMERIC_COLUMNS.iter().enumerate() {
        if let (Some(b), Some(v)) = (bounds.get(*name), rec.values[k].as_mut()) {
            *v = b.clamp(*v);
        }
    }
    if let (Some(b), Some(v)) = (bounds.get(NUMERIC_COLUMNS[ADMIT_WEIGHT]), rec.discharge_weight_kg.as_mut()) {
        *v = b.clamp(*v);
    }
}

fn admit_weight_fallback(rec: &mut NumericRecord) {
    if rec.values[ADMIT_WEIGHT].is_none() {
        rec.values[ADMIT_WEIGHT] = rec.discharge_weight_kg;
    }
}

/// Fills a missing admit weight from the discharge weight, then every
/// remaining gap from the training median.
pub fn impute_missing(
    rec: &NumericRecord,
    medians: &BTreeMap<String, f64>,
) -> Result<[f64; NUMERIC_COLUMNS.len()], FeatureError> {
    let mut r = *rec;
    admit_weight_fallback(&mut r);
    let mut out = [0.0; NUMERIC_COLUMNS.len()];
    for (k, name) in NUMERIC_COLUMNS.iter().enumerate() {
        out[k] = match r.values[k] {
            Some(v) => v,
            None => *medians
                .get(*name)
                .ok_or_else(|| FeatureError::NoObservedValues(name.to_string()))?,
        };
    }
    Ok(out)
}

/// Indices of columns whose class means differ with two-sided Welch
/// p-value below `threshold`. Constant columns are dropped.
pub fn select_by_ttest<T: Scalar>(m: &FeatureMatrix<T>, threshold: f64) -> Result<Vec<usize>, FeatureError> {
    if !m.has_both_classes() {
        return Err(FeatureError::SingleClass);
    }
    let mut kept = Vec::new();
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for j in 0..m.n_cols() {
        pos.clear();
        neg.clear();
        for i in 0..m.n_rows() {
            let v = m.get(i, j).as_f64();
            if m.labels[i] == 1 {
                pos.push(v);
            } else {
                neg.push(v);
            }
        }
        if let Some(p) = welch_p_value(&pos, &neg) {
            if p < threshold {
                kept.push(j);
            }
        }
    }
    Ok(kept)
}

/// Scans `kept` pairs in ascending column order and drops the later column of
/// any pair with |r| > `threshold`. No surviving pair exceeds the threshold.
pub fn eliminate_correlated<T: Scalar>(m: &FeatureMatrix<T>, kept: &[usize], threshold: f64) -> Vec<usize> {
    let mut order = kept.to_vec();
    order.sort_unstable();
    order.dedup();
    let cols: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| m.column(j).into_iter().map(|v| v.as_f64()).collect())
        .collect();
    let mut dropped = vec![false; order.len()];
    for a in 0..order.len() {
        if dropped[a] {
            continue;
        }
        for b in a + 1..order.len() {
            if dropped[b] {
                continue;
            }
            if let Some(r) = pearson(&cols[a], &cols[b]) {
                if r.abs() > threshold {
                    dropped[b] = true;
                }
            }
        }
    }
    order
        .into_iter()
        .zip(dropped)
        .filter_map(|(j, d)| (!d).then_some(j))
        .collect()
}

/// Fits the pipeline on `rows[fit_rows]` in the order: vocabularies,
/// winsor bounds, medians, t-test selection, correlation elimination,
/// scale bounds. Rows outside `fit_rows` are never read.
pub fn fit_pipeline(
    rows: &[StudyRow],
    fit_rows: &[usize],
    opts: &PipelineOptions,
) -> Result<PipelineState, FeatureError> {
    if fit_rows.is_empty() {
        return Err(FeatureError::Empty);
    }
    let train: Vec<&StudyRow> = fit_rows.iter().map(|&i| &rows[i]).collect();

    let mut vocabularies = BTreeMap::new();
    for (s, prefix) in CATEGORICAL_SOURCES.iter().enumerate() {
        let cats: BTreeSet<&str> = train.iter().map(|r| category(r, s)).collect();
        vocabularies.insert(prefix.to_string(), cats.into_iter().map(str::to_string).collect::<Vec<_>>());
    }

    let mut recs: Vec<NumericRecord> = train.iter().map(|r| NumericRecord::from_row(r)).collect();

    let mut winsor_bounds = BTreeMap::new();
    for name in WINSORIZED_COLUMNS {
        let k = NUMERIC_COLUMNS.iter().position(|c| *c == name).expect("winsorized column is numeric");
        let sorted = sorted_finite(recs.iter().filter_map(|r| r.values[k]));
        let (Some(lower), Some(upper)) = (
            percentile_linear(&sorted, opts.winsor_lower),
            percentile_linear(&sorted, opts.winsor_upper),
        ) else {
            return Err(FeatureError::NoObservedValues(name.to_string()));
        };
        winsor_bounds.insert(name.to_string(), Bounds { lower, upper });
    }
    for r in &mut recs {
        winsorize_record(r, &winsor_bounds);
        admit_weight_fallback(r);
    }

    let mut medians = BTreeMap::new();
    for (k, name) in NUMERIC_COLUMNS.iter().enumerate() {
        let sorted = sorted_finite(recs.iter().filter_map(|r| r.values[k]));
        let m = percentile_linear(&sorted, 0.5).ok_or_else(|| FeatureError::NoObservedValues(name.to_string()))?;
        medians.insert(name.to_string(), m);
    }

    let generated = generated_columns(&vocabularies);
    let mut values = Vec::with_capacity(train.len() * generated.len());
    for (row, rec) in train.iter().zip(&recs) {
        let numeric = impute_missing(rec, &medians)?;
        values.extend(generated.iter().map(|(_, src)| match src {
            Source::Numeric(k) => numeric[*k],
            Source::Indicator(s, cat) => f64::from(u8::from(category(row, *s) == cat)),
        }));
    }
    let full = FeatureMatrix::<f64>::new(
        generated.iter().map(|(n, _)| n.clone()).collect(),
        values,
        train.iter().map(|r| r.test_id.clone()).collect(),
        train.iter().map(|r| r.label).collect(),
        train.iter().map(|r| r.stay_id.clone()).collect(),
        train.iter().map(|r| r.meta()).collect(),
    )?;

    let kept = select_by_ttest(&full, opts.ttest_threshold)?;
    let kept = eliminate_correlated(&full, &kept, opts.correlation_threshold);

    let mut selected_columns = Vec::with_capacity(kept.len());
    let mut scale_bounds = BTreeMap::new();
    for j in kept {
        let name = full.column_names()[j].clone();
        let col = full.column(j);
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        scale_bounds.insert(name.clone(), ScaleBounds { min, max });
        selected_columns.push(name);
    }

    Ok(PipelineState {
        version: PIPELINE_VERSION,
        winsor_bounds,
        medians,
        selected_columns,
        scale_bounds,
        vocabularies,
    })
}

impl PipelineState {
    fn selected_sources(&self) -> Result<Vec<(Source, ScaleBounds)>, FeatureError> {
        let lookup: HashMap<String, Source> = generated_columns(&self.vocabularies).into_iter().collect();
        self.selected_columns
            .iter()
            .map(|name| {
                let src = lookup
                    .get(name)
                    .cloned()
                    .ok_or_else(|| FeatureError::Matrix(format!("selected column `{name}` is not generated")))?;
                let b = *self
                    .scale_bounds
                    .get(name)
                    .ok_or_else(|| FeatureError::Matrix(format!("no scale bounds for `{name}`")))?;
                Ok((src, b))
            })
            .collect()
    }

    /// Replays the fitted transforms; the output has exactly the selected
    /// columns, each scaled into `[0, 1]`.
    pub fn apply<T: Scalar>(&self, rows: &[StudyRow]) -> Result<FeatureMatrix<T>, FeatureError> {
        if self.version != PIPELINE_VERSION {
            return Err(FeatureError::Version(self.version));
        }
        let sources = self.selected_sources()?;
        let mut values = Vec::with_capacity(rows.len() * sources.len());
        for row in rows {
            let mut rec = NumericRecord::from_row(row);
            winsorize_record(&mut rec, &self.winsor_bounds);
            let numeric = impute_missing(&rec, &self.medians)?;
            for (src, b) in &sources {
                let raw = match src {
                    Source::Numeric(k) => numeric[*k],
                    Source::Indicator(s, cat) => f64::from(u8::from(category(row, *s) == cat)),
                };
                values.push(T::of(b.scale(raw)));
            }
        }
        FeatureMatrix::new(
            self.selected_columns.clone(),
            values,
            rows.iter().map(|r| r.test_id.clone()).collect(),
            rows.iter().map(|r| r.label).collect(),
            rows.iter().map(|r| r.stay_id.clone()).collect(),
            rows.iter().map(|r| r.meta()).collect(),
        )
    }
}
