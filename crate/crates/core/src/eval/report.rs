use std::collections::BTreeMap;
use std::io::Write;

use super::{auc, roc_curve, EvalError, RocCurve};
use crate::features::{FeatureMatrix, StudyRow};
use crate::ingest::{STUDY_ANTIBIOTICS, STUDY_ORGANISMS};
use crate::models::{AntibiogramModel, LinearModel, ModelFamily, TrainedModel};
use crate::scalar::Scalar;

/// Minimum tests per key for the yearly series.
pub const DEFAULT_HIGH_FREQUENCY: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelScore {
    pub family: ModelFamily,
    pub auc: f64,
    pub roc: RocCurve,
}

/// Scores every model on `test`, in roster order.
pub fn evaluate_all<T: Scalar>(
    models: &BTreeMap<ModelFamily, TrainedModel<T>>,
    test: &FeatureMatrix<T>,
) -> Result<Vec<ModelScore>, EvalError> {
    use rayon::prelude::*;
    models
        .par_iter()
        .map(|(&family, m)| {
            let s = m.predict(test).map_err(|e| EvalError::Model(e.to_string()))?;
            Ok(ModelScore { family, auc: auc(&s, &test.labels)?, roc: roc_curve(&s, &test.labels)? })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucRow {
    pub family: ModelFamily,
    pub auc: Option<f64>,
    pub auc_time: Option<f64>,
}

impl AucRow {
    /// Joins random-split and temporal-split scores into roster rows.
    pub fn join(random: &[ModelScore], temporal: &[ModelScore]) -> Vec<AucRow> {
        let find = |v: &[ModelScore], f| v.iter().find(|s| s.family == f).map(|s| s.auc);
        ModelFamily::ALL
            .iter()
            .map(|&f| AucRow { family: f, auc: find(random, f), auc_time: find(temporal, f) })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrganismRow {
    pub organism: String,
    pub auc: Option<f64>,
    pub auc_ab: Option<f64>,
    pub sample_size: usize,
    pub evaluable: bool,
}

/// One row per organism present in `test`, scored by that organism's own
/// model and by the antibiogram. Evaluable rows come first, by descending
/// model AUC; organisms without a model or with one class are flagged.
pub fn evaluate_per_organism<T: Scalar>(
    test: &FeatureMatrix<T>,
    per_organism: &BTreeMap<String, TrainedModel<T>>,
    ab: &AntibiogramModel<T>,
) -> Result<Vec<OrganismRow>, EvalError> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, m) in test.meta.iter().enumerate() {
        groups.entry(m.organism.as_str()).or_default().push(i);
    }
    let mut out = Vec::new();
    for (org, idx) in groups {
        let sub = test.select_rows(&idx);
        let mut row = OrganismRow { organism: org.to_string(), auc: None, auc_ab: None, sample_size: idx.len(), evaluable: false };
        if sub.has_both_classes() {
            row.auc_ab = Some(auc(&ab.predict(&sub), &sub.labels)?);
            if let Some(m) = per_organism.get(org) {
                let s = m.predict(&sub).map_err(|e| EvalError::Model(e.to_string()))?;
                row.auc = Some(auc(&s, &sub.labels)?);
                row.evaluable = true;
            }
        }
        out.push(row);
    }
    out.sort_by(|a, b| {
        b.evaluable
            .cmp(&a.evaluable)
            .then(b.auc.unwrap_or(f64::NEG_INFINITY).total_cmp(&a.auc.unwrap_or(f64::NEG_INFINITY)))
            .then(a.organism.cmp(&b.organism))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub feature: String,
    pub coefficient: f64,
}

/// Nonzero weights by descending magnitude, at most `top`.
pub fn coefficient_table<T: Scalar>(model: &LinearModel<T>, names: &[String], top: usize) -> Vec<Coefficient> {
    let mut v: Vec<Coefficient> = model
        .weights
        .iter()
        .zip(names)
        .filter(|(w, _)| **w != T::zero())
        .map(|(w, n)| Coefficient { feature: n.clone(), coefficient: w.as_f64() })
        .collect();
    v.sort_by(|a, b| b.coefficient.abs().total_cmp(&a.coefficient.abs()).then(a.feature.cmp(&b.feature)));
    v.truncate(top);
    v
}

/// Study grid summaries; rows are organisms, columns antibiotics, both in
/// study order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGrids {
    pub organisms: Vec<String>,
    pub antibiotics: Vec<String>,
    pub counts: Vec<Vec<usize>>,
    pub resistant: Vec<Vec<usize>>,
    pub rates: Vec<Vec<Option<f64>>>,
    /// Rows whose organism or antibiotic is outside the grid.
    pub outside: usize,
}

impl RateGrids {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn total_resistant(&self) -> usize {
        self.resistant.iter().flatten().sum()
    }
}

pub fn summarize_rates(rows: &[StudyRow]) -> RateGrids {
    let organisms: Vec<String> = STUDY_ORGANISMS.iter().map(|s| s.to_string()).collect();
    let antibiotics: Vec<String> = STUDY_ANTIBIOTICS.iter().map(|s| s.to_string()).collect();
    let mut counts = vec![vec![0usize; antibiotics.len()]; organisms.len()];
    let mut resistant = counts.clone();
    let mut outside = 0;
    for r in rows {
        let o = organisms.iter().position(|x| *x == r.organism);
        let a = antibiotics.iter().position(|x| *x == r.antibiotic);
        match (o, a) {
            (Some(o), Some(a)) => {
                counts[o][a] += 1;
                resistant[o][a] += r.label as usize;
            }
            _ => outside += 1,
        }
    }
    let rates = counts
        .iter()
        .zip(&resistant)
        .map(|(c, r)| c.iter().zip(r).map(|(&c, &r)| (c > 0).then(|| r as f64 / c as f64)).collect())
        .collect();
    RateGrids { organisms, antibiotics, counts, resistant, rates, outside }
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearlySeries {
    pub organism: String,
    pub antibiotic: String,
    /// `(year, rate, count)` in year order.
    pub points: Vec<(i32, f64, usize)>,
}

impl YearlySeries {
    pub fn total(&self) -> usize {
        self.points.iter().map(|p| p.2).sum()
    }
}

/// Per-year resistant fraction by culture year for every key with at least
/// `min_count` tests.
pub fn rates_over_time(rows: &[StudyRow], min_count: usize) -> Vec<YearlySeries> {
    let mut acc: BTreeMap<(&str, &str), BTreeMap<i32, (usize, usize)>> = BTreeMap::new();
    for r in rows {
        let c = acc
            .entry((r.organism.as_str(), r.antibiotic.as_str()))
            .or_default()
            .entry(r.culture_taken_year)
            .or_default();
        c.0 += r.label as usize;
        c.1 += 1;
    }
    acc.into_iter()
        .filter(|(_, years)| years.values().map(|c| c.1).sum::<usize>() >= min_count)
        .map(|((o, a), years)| YearlySeries {
            organism: o.to_string(),
            antibiotic: a.to_string(),
            points: years.into_iter().map(|(y, (r, n))| (y, r as f64 / n as f64, n)).collect(),
        })
        .collect()
}

fn writer<W: Write>(mut w: W, header_comment: Option<&str>) -> Result<csv::Writer<W>, EvalError> {
    if let Some(c) = header_comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `method,auc,auc_time`
pub fn write_auc_report<W: Write>(w: W, rows: &[AucRow], header_comment: Option<&str>) -> Result<(), EvalError> {
    let mut c = writer(w, header_comment)?;
    c.write_record(["method", "auc", "auc_time"])?;
    for r in rows {
        c.write_record([r.family.label().to_string(), opt(r.auc), opt(r.auc_time)])?;
    }
    c.flush()?;
    Ok(())
}

/// `organism,auc,auc_ab,sample_size,evaluable`
pub fn write_organism_report<W: Write>(w: W, rows: &[OrganismRow], header_comment: Option<&str>) -> Result<(), EvalError> {
    let mut c = writer(w, header_comment)?;
    c.write_record(["organism", "auc", "auc_ab", "sample_size", "evaluable"])?;
    for r in rows {
        c.write_record([r.organism.clone(), opt(r.auc), opt(r.auc_ab), r.sample_size.to_string(), r.evaluable.to_string()])?;
    }
    c.flush()?;
    Ok(())
}

/// `feature,coefficient`
pub fn write_coefficients<W: Write>(w: W, rows: &[Coefficient], header_comment: Option<&str>) -> Result<(), EvalError> {
    let mut c = writer(w, header_comment)?;
    c.write_record(["feature", "coefficient"])?;
    for r in rows {
        c.write_record([r.feature.clone(), r.coefficient.to_string()])?;
    }
    c.flush()?;
    Ok(())
}

/// `fpr,tpr,threshold`
pub fn write_roc<W: Write>(w: W, roc: &RocCurve, header_comment: Option<&str>) -> Result<(), EvalError> {
    let mut c = writer(w, header_comment)?;
    c.write_record(["fpr", "tpr", "threshold"])?;
    for (&(x, y), t) in roc.points.iter().zip(&roc.thresholds) {
        c.write_record([x.to_string(), y.to_string(), t.to_string()])?;
    }
    c.flush()?;
    Ok(())
}

/// Wide grid: `organism,<antibiotic>...`; missing rates are empty cells.
pub fn write_rate_grid<W: Write>(w: W, g: &RateGrids, header_comment: Option<&str>) -> Result<(), EvalError> {
    let mut c = writer(w, header_comment)?;
    c.write_record(std::iter::once("organism").chain(g.antibiotics.iter().map(String::as_str)))?;
    for (o, row) in g.organisms.iter().zip(&g.rates) {
        c.write_record(std::iter::once(o.clone()).chain(row.iter().map(|&v| opt(v))))?;
    }
    c.flush()?;
    Ok(())
}

/// Wide count grid in the layout of [`write_rate_grid`].
pub fn write_count_grid<W: Write>(w: W, g: &RateGrids, counts: &[Vec<usize>], header_comment: Option<&str>) -> Result<(), EvalError> {
    let mut c = writer(w, header_comment)?;
    c.write_record(std::iter::once("organism").chain(g.antibiotics.iter().map(String::as_str)))?;
    for (o, row) in g.organisms.iter().zip(counts) {
        c.write_record(std::iter::once(o.clone()).chain(row.iter().map(|v| v.to_string())))?;
    }
    c.flush()?;
    Ok(())
}

/// `organism,antibiotic,year,rate,count`
pub fn write_yearly<W: Write>(w: W, series: &[YearlySeries], header_comment: Option<&str>) -> Result<(), EvalError> {
    let mut c = writer(w, header_comment)?;
    c.write_record(["organism", "antibiotic", "year", "rate", "count"])?;
    for s in series {
        for &(y, r, n) in &s.points {
            c.write_record([s.organism.clone(), s.antibiotic.clone(), y.to_string(), r.to_string(), n.to_string()])?;
        }
    }
    c.flush()?;
    Ok(())
}
