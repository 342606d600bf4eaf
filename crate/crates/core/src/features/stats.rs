//! Small descriptive and inferential statistics used while fitting the
//! pipeline. Inputs are plain `f64` slices.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Percentile with linear interpolation between order statistics
/// (`pos = q * (n - 1)` on the sorted sample). `q` is in `[0, 1]`.
pub fn percentile_linear(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub fn sorted_finite(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    percentile_linear(&sorted_finite(values), 0.5)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Two-sided Welch t-test p-value for equal means.
///
/// Returns `None` when both groups are constant at the same value (the
/// statistic is undefined) or a group is empty. Two constant groups at
/// different values give `Some(0.0)`.
pub fn welch_p_value(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let sa = va / a.len() as f64;
    let sb = vb / b.len() as f64;
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return if ma == mb { None } else { Some(0.0) };
    }
    let t = (ma - mb) / se2.sqrt();
    let mut denom = 0.0;
    if a.len() > 1 {
        denom += sa * sa / (a.len() - 1) as f64;
    }
    if b.len() > 1 {
        denom += sb * sb / (b.len() - 1) as f64;
    }
    let df = if denom > 0.0 { (se2 * se2 / denom).max(1.0) } else { 1.0 };
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((2.0 * dist.sf(t.abs())).clamp(0.0, 1.0))
}

/// Pearson correlation; `None` if either column is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_on_one_to_thousand() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        // pos = 0.995 * 999 = 994.005 -> 995 + 0.005
        assert!((percentile_linear(&v, 0.995).unwrap() - 995.005).abs() < 1e-9);
        // pos = 0.005 * 999 = 4.995 -> 5 + 0.995
        assert!((percentile_linear(&v, 0.005).unwrap() - 5.995).abs() < 1e-9);
        assert_eq!(percentile_linear(&v, 0.0), Some(1.0));
        assert_eq!(percentile_linear(&v, 1.0), Some(1000.0));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median([3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median([4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(std::iter::empty()), None);
    }

    /// Student-t upper tail by Simpson integration of the density, as an
    /// oracle independent of the incomplete-beta route.
    fn t_tail_oracle(t: f64, df: f64) -> f64 {
        let ln_c = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
        let pdf = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
        let (a, b, n) = (t, t + 60.0, 200_000);
        let h = (b - a) / n as f64;
        let mut s = pdf(a) + pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn ln_gamma(x: f64) -> f64 {
        // Lanczos, g = 7
        const C: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let x = x - 1.0;
        let mut a = C[0];
        let t = x + 7.5;
        for (i, c) in C.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }

    #[test]
    fn welch_matches_integration_oracle() {
        // Means 0 and 1, unit sample sd, n = 50 each: t = -1/sqrt(2/50) = -5, df = 98.
        let mut a: Vec<f64> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        for i in 0..50 {
            let z = if i % 2 == 0 { 1.0 } else { -1.0 };
            a.push(z * (49.0f64 / 50.0).sqrt());
            b.push(1.0 + z * (49.0f64 / 50.0).sqrt());
        }
        let p = welch_p_value(&a, &b).unwrap();
        let oracle = 2.0 * t_tail_oracle(5.0, 98.0);
        assert!(p < 1e-4);
        assert!((p - oracle).abs() < 1e-9 * oracle.max(1e-12) + 1e-12, "{p} vs {oracle}");
        // frozen from the oracle: 2 * P(T_98 > 5) ~ 2.5e-6
        assert!((p - 2.5e-6).abs() < 0.3e-6, "{p}");
    }

    #[test]
    fn welch_degenerate_cases() {
        assert_eq!(welch_p_value(&[1.0, 1.0], &[1.0, 1.0, 1.0]), None);
        assert_eq!(welch_p_value(&[0.0, 0.0], &[1.0, 1.0]), Some(0.0));
        let p = welch_p_value(&[0.0, 1.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_signs() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let y = [4.0, 3.0, 2.0, 1.0];
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[2.0; 4]), None);
    }
}
