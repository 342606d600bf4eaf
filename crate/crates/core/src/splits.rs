//! Stay-grouped dataset partitions: a seeded random 60/20/20 split and a
//! temporal split by unit admission year.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("need at least 3 distinct stays, found {0}")]
    TooFewStays(usize),
    #[error("invalid split fractions {0:?}: each must be > 0 and they must sum to 1")]
    Fractions((f64, f64, f64)),
    #[error("temporal split needs a cutoff year")]
    MissingCutoff,
    #[error("cutoff year {cutoff} leaves the {side} side empty or too small")]
    EmptySide { cutoff: i32, side: &'static str },
    #[error("split mode mismatch: expected {0}")]
    Mode(&'static str),
    #[error("stay {0:?} has rows with different admit years")]
    InconsistentYear(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    RandomByStay,
    TemporalByYear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fold {
    Train,
    Validation,
    Test,
}

impl Fold {
    pub fn as_str(self) -> &'static str {
        match self {
            Fold::Train => "train",
            Fold::Validation => "validation",
            Fold::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    /// (train, validation, test) stay fractions for the random mode.
    pub fractions: (f64, f64, f64),
    pub cutoff_year: Option<i32>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn random(seed: u64) -> Self {
        Self { mode: SplitMode::RandomByStay, fractions: (0.6, 0.2, 0.2), cutoff_year: None, seed }
    }

    pub fn temporal(cutoff_year: i32, seed: u64) -> Self {
        Self { mode: SplitMode::TemporalByYear, fractions: (0.6, 0.2, 0.2), cutoff_year: Some(cutoff_year), seed }
    }

    fn check_fractions(&self) -> Result<(), SplitError> {
        let (a, b, c) = self.fractions;
        if a <= 0.0 || b <= 0.0 || c <= 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(SplitError::Fractions(self.fractions));
        }
        Ok(())
    }

    /// Share of pre-cutoff stays carved out for validation, so that train and
    /// validation keep their 60:20 proportion.
    fn temporal_validation_share(&self) -> f64 {
        let (a, b, _) = self.fractions;
        b / (a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub fold_of_row: Vec<Fold>,
}

impl SplitAssignment {
    pub fn rows(&self, fold: Fold) -> Vec<usize> {
        self.fold_of_row
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| (f == fold).then_some(i))
            .collect()
    }

    pub fn rows_in(&self, folds: &[Fold]) -> Vec<usize> {
        self.fold_of_row
            .iter()
            .enumerate()
            .filter_map(|(i, f)| folds.contains(f).then_some(i))
            .collect()
    }

    /// Writes `test_id,fold` lines.
    pub fn write_csv<W: Write>(&self, mut w: W, row_keys: &[String], header_comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = header_comment {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        writeln!(w, "test_id,fold")?;
        for (k, f) in row_keys.iter().zip(&self.fold_of_row) {
            writeln!(w, "{k},{}", f.as_str())?;
        }
        Ok(())
    }
}

/// Distinct groups in first-appearance order.
fn distinct(group_ids: &[String]) -> Vec<&str> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for g in group_ids {
        if seen.insert(g.as_str(), ()).is_none() {
            out.push(g.as_str());
        }
    }
    out
}

/// Largest-remainder allocation of `n` items over `fractions`; remainder ties
/// go to the earlier part.
pub fn largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Moves one item from the largest part into every empty part.
fn ensure_nonempty(counts: &mut [usize]) {
    for k in 0..counts.len() {
        if counts[k] == 0 {
            let (big, _) = counts.iter().enumerate().max_by_key(|(i, &c)| (c, std::cmp::Reverse(*i))).unwrap();
            if counts[big] > 1 {
                counts[big] -= 1;
                counts[k] += 1;
            }
        }
    }
}

fn shuffled<'a>(groups: &[&'a str], seed: u64) -> Vec<&'a str> {
    let mut g = groups.to_vec();
    g.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    g.shuffle(&mut rng);
    g
}

fn assign_rows(group_ids: &[String], fold_of_group: &HashMap<&str, Fold>) -> SplitAssignment {
    SplitAssignment {
        fold_of_row: group_ids.iter().map(|g| fold_of_group[g.as_str()]).collect(),
    }
}

/// Shuffles the distinct stays with `spec.seed` and allocates them to
/// train/validation/test by `spec.fractions`; rows inherit their stay's fold.
pub fn split_random_by_stay(group_ids: &[String], spec: &SplitSpec) -> Result<SplitAssignment, SplitError> {
    if spec.mode != SplitMode::RandomByStay {
        return Err(SplitError::Mode("random_by_stay"));
    }
    spec.check_fractions()?;
    let groups = distinct(group_ids);
    if groups.len() < 3 {
        return Err(SplitError::TooFewStays(groups.len()));
    }
    let (a, b, c) = spec.fractions;
    let mut counts = largest_remainder(groups.len(), &[a, b, c]);
    ensure_nonempty(&mut counts);
    let order = shuffled(&groups, spec.seed);
    let mut fold_of_group = HashMap::with_capacity(order.len());
    for (i, g) in order.into_iter().enumerate() {
        let f = if i < counts[0] {
            Fold::Train
        } else if i < counts[0] + counts[1] {
            Fold::Validation
        } else {
            Fold::Test
        };
        fold_of_group.insert(g, f);
    }
    Ok(assign_rows(group_ids, &fold_of_group))
}

/// Stays admitted before `spec.cutoff_year` go to train/validation (a seeded
/// 75/25 carve for the default fractions); the rest go to test.
pub fn split_temporal(group_ids: &[String], admit_years: &[i32], spec: &SplitSpec) -> Result<SplitAssignment, SplitError> {
    if spec.mode != SplitMode::TemporalByYear {
        return Err(SplitError::Mode("temporal_by_year"));
    }
    spec.check_fractions()?;
    let cutoff = spec.cutoff_year.ok_or(SplitError::MissingCutoff)?;
    let mut year_of: HashMap<&str, i32> = HashMap::new();
    for (g, &y) in group_ids.iter().zip(admit_years) {
        if *year_of.entry(g.as_str()).or_insert(y) != y {
            return Err(SplitError::InconsistentYear(g.clone()));
        }
    }
    let groups = distinct(group_ids);
    let (pre, post): (Vec<&str>, Vec<&str>) = groups.iter().partition(|g| year_of[**g] < cutoff);
    if post.is_empty() {
        return Err(SplitError::EmptySide { cutoff, side: "test" });
    }
    if pre.len() < 2 {
        return Err(SplitError::EmptySide { cutoff, side: "train" });
    }
    let share = spec.temporal_validation_share();
    let mut counts = largest_remainder(pre.len(), &[1.0 - share, share]);
    ensure_nonempty(&mut counts);
    let order = shuffled(&pre, spec.seed);
    let mut fold_of_group = HashMap::with_capacity(groups.len());
    for (i, g) in order.into_iter().enumerate() {
        fold_of_group.insert(g, if i < counts[0] { Fold::Train } else { Fold::Validation });
    }
    for g in post {
        fold_of_group.insert(g, Fold::Test);
    }
    Ok(assign_rows(group_ids, &fold_of_group))
}

/// Cutoff year that puts the share of stays admitted before it closest to
/// 80%, among the years that leave both sides non-empty. Ties pick the later year.
pub fn default_cutoff_year(group_ids: &[String], admit_years: &[i32]) -> Option<i32> {
    let mut year_of: HashMap<&str, i32> = HashMap::new();
    for (g, &y) in group_ids.iter().zip(admit_years) {
        year_of.entry(g.as_str()).or_insert(y);
    }
    let mut per_year: BTreeMap<i32, usize> = BTreeMap::new();
    for y in year_of.values() {
        *per_year.entry(*y).or_default() += 1;
    }
    let total = year_of.len() as f64;
    let mut before = 0usize;
    let mut best: Option<(f64, i32)> = None;
    for (i, (&y, &c)) in per_year.iter().enumerate() {
        if i > 0 {
            let gap = (before as f64 / total - 0.8).abs();
            if best.is_none_or(|(g, _)| gap <= g) {
                best = Some((gap, y));
            }
        }
        before += c;
    }
    best.map(|(_, y)| y)
}
