//! ROC/AUC and the summary tables and figure data built on them.

mod report;

use thiserror::Error;

use crate::scalar::Scalar;

pub use report::{
    coefficient_table, evaluate_all, evaluate_per_organism, rates_over_time, summarize_rates, write_auc_report,
    write_coefficients, write_count_grid, write_organism_report, write_rate_grid, write_roc, write_yearly, AucRow,
    Coefficient, ModelScore, OrganismRow, RateGrids, YearlySeries, DEFAULT_HIGH_FREQUENCY,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("AUC needs both classes; got {positives} positive and {negatives} negative rows")]
    SingleClass { positives: usize, negatives: usize },
    #[error("{scores} scores for {labels} labels")]
    Length { scores: usize, labels: usize },
    #[error("score {0} is not finite")]
    NonFinite(f64),
    #[error("scoring failed: {0}")]
    Model(String),
    #[error("writing report: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing report: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from threshold +inf down to -inf.
    pub points: Vec<(f64, f64)>,
    /// Score threshold reached at each point; the first is +inf.
    pub thresholds: Vec<f64>,
}

impl RocCurve {
    /// Trapezoidal area.
    pub fn area(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5).sum()
    }
}

fn checked<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<(Vec<f64>, usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Length { scores: scores.len(), labels: labels.len() });
    }
    let s: Vec<f64> = scores.iter().map(|v| v.as_f64()).collect();
    if let Some(&bad) = s.iter().find(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(bad));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass { positives, negatives });
    }
    Ok((s, positives, negatives))
}

/// Mann-Whitney AUC with mid-rank credit for ties.
pub fn auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64, EvalError> {
    let (s, p, n) = checked(scores, labels)?;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    // twice the rank sum keeps mid-ranks integral
    let mut rank2_pos: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && s[idx[j + 1]] == s[idx[i]] {
            j += 1;
        }
        let mid2 = (i + 1 + j + 1) as u128;
        let pos = idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        rank2_pos += mid2 * pos;
        i = j + 1;
    }
    let p128 = p as u128;
    let u2 = rank2_pos - p128 * (p128 + 1);
    Ok(u2 as f64 / (2.0 * p as f64 * n as f64))
}

/// ROC points at every distinct score; tied scores move together.
pub fn roc_curve<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<RocCurve, EvalError> {
    let (s, p, n) = checked(scores, labels)?;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let t = s[idx[i]];
        while i < idx.len() && s[idx[i]] == t {
            if labels[idx[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
        thresholds.push(t);
    }
    Ok(RocCurve { points, thresholds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(s: &[f64], y: &[u8]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &yi) in y.iter().enumerate() {
            for (j, &yj) in y.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    den += 1.0;
                    num += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    #[test]
    fn worked_example() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let y = [0, 0, 1, 1];
        assert_eq!(auc(&s, &y).unwrap(), 0.75);
        let r = roc_curve(&s, &y).unwrap();
        assert_eq!(r.points, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]);
        assert_eq!(r.area(), 0.75);
    }

    #[test]
    fn perfect_and_constant() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        let r = roc_curve(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert!(r.points.contains(&(0.0, 1.0)));
        assert_eq!(auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        let r = roc_curve(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap();
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn ties_match_brute_force() {
        let s = [0.2, 0.2, 0.5, 0.5, 0.5, 0.9, 0.1];
        let y = [1, 0, 1, 0, 0, 1, 0];
        assert_eq!(auc(&s, &y).unwrap(), brute(&s, &y));
        assert!((roc_curve(&s, &y).unwrap().area() - brute(&s, &y)).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(EvalError::SingleClass { .. })));
        assert!(matches!(roc_curve(&[0.1], &[0]), Err(EvalError::SingleClass { .. })));
        assert!(matches!(auc(&[0.1], &[0, 1]), Err(EvalError::Length { .. })));
        assert!(matches!(auc(&[f64::NAN, 0.2], &[0, 1]), Err(EvalError::NonFinite(_))));
    }
}
