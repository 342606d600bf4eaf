use serde::{Deserialize, Serialize};

use super::{prevalence, ModelError};
use crate::features::FeatureMatrix;
use crate::scalar::{decimal, logit, sigmoid, softplus, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct LinearModel<T> {
    #[serde(with = "decimal::vec")]
    pub weights: Vec<T>,
    #[serde(with = "decimal")]
    pub intercept: T,
    pub lambda: f64,
    pub converged: bool,
    pub sweeps: usize,
}

impl<T: Scalar> LinearModel<T> {
    pub fn margin_row(&self, x: &[T]) -> T {
        self.intercept + self.weights.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>()
    }

    pub fn predict_row(&self, x: &[T]) -> T {
        sigmoid(self.margin_row(x))
    }

    /// Largest violation of the L1 optimality conditions on `train`: zero
    /// weights need `|g_j| <= lambda`, nonzero weights `g_j + lambda sign(w_j) = 0`,
    /// and the unpenalized intercept a zero gradient.
    pub fn kkt_violation(&self, train: &FeatureMatrix<T>) -> f64 {
        let (g0, g) = mean_gradient(train, &self.weights, self.intercept);
        let lam = self.lambda;
        let mut worst = g0.abs();
        for (&w, &gj) in self.weights.iter().zip(&g) {
            let v = if w == T::zero() {
                (gj.abs() - lam).max(0.0)
            } else {
                (gj + lam * w.signum().as_f64()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}

pub fn soft_threshold<T: Scalar>(x: T, t: T) -> T {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        T::zero()
    }
}

/// Mean logistic loss plus `lambda * |w|_1`.
pub fn l1_objective<T: Scalar>(train: &FeatureMatrix<T>, weights: &[T], intercept: T, lambda: f64) -> f64 {
    let n = train.n_rows().max(1) as f64;
    let mut loss = 0.0;
    for (x, &y) in train.rows().zip(&train.labels) {
        let z = (intercept + weights.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>()).as_f64();
        loss += softplus(z) - f64::from(y) * z;
    }
    loss / n + lambda * weights.iter().map(|w| w.as_f64().abs()).sum::<f64>()
}

/// `(d/db, d/dw)` of the mean logistic loss, accumulated in `f64`.
fn mean_gradient<T: Scalar>(train: &FeatureMatrix<T>, weights: &[T], intercept: T) -> (f64, Vec<f64>) {
    let n = train.n_rows().max(1) as f64;
    let mut g = vec![0.0; train.n_cols()];
    let mut g0 = 0.0;
    for (x, &y) in train.rows().zip(&train.labels) {
        let z = intercept + weights.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>();
        let r = sigmoid(z.as_f64()) - f64::from(y);
        g0 += r;
        for (gj, &v) in g.iter_mut().zip(x) {
            *gj += r * v.as_f64();
        }
    }
    (g0 / n, g.into_iter().map(|v| v / n).collect())
}

/// Smallest lambda at which the all-zero weight vector is optimal.
pub fn lambda_max<T: Scalar>(train: &FeatureMatrix<T>) -> Result<f64, ModelError> {
    let p = prevalence(train)?;
    if !train.has_both_classes() {
        return Err(ModelError::SingleClass);
    }
    let (_, g) = mean_gradient(train, &vec![T::zero(); train.n_cols()], logit(p));
    Ok(g.iter().fold(0.0, |m, v| m.max(v.abs())))
}

struct Problem {
    n: f64,
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    lambda: f64,
}

impl Problem {
    fn smooth_loss(&self, z: &[f64]) -> f64 {
        z.iter().zip(&self.y).map(|(&z, &y)| softplus(z) - y * z).sum::<f64>() / self.n
    }

    /// Prox-Newton step on one coordinate (`None` is the intercept) with
    /// halving backtracking; returns the accepted change or 0.
    fn update(&self, j: Option<usize>, w: f64, z: &mut [f64], trial: &mut [f64]) -> f64 {
        let col = j.map(|j| self.cols[j].as_slice());
        let x = |i: usize| col.map_or(1.0, |c| c[i]);
        let (mut g, mut h, mut loss) = (0.0, 0.0, 0.0);
        for (i, (&zi, &yi)) in z.iter().zip(&self.y).enumerate() {
            let p = sigmoid(zi);
            let xi = x(i);
            g += (p - yi) * xi;
            h += p * (1.0 - p) * xi * xi;
            loss += softplus(zi) - yi * zi;
        }
        g /= self.n;
        h = (h / self.n).max(1e-12);
        let lam = if j.is_some() { self.lambda } else { 0.0 };
        let target = soft_threshold(h * w - g, lam) / h;
        let mut delta = target - w;
        if delta == 0.0 || !delta.is_finite() {
            return 0.0;
        }
        let before = loss / self.n + lam * w.abs();
        for _ in 0..40 {
            for (i, t) in trial.iter_mut().enumerate() {
                *t = z[i] + delta * x(i);
            }
            let after = self.smooth_loss(trial) + lam * (w + delta).abs();
            if after <= before {
                z.copy_from_slice(trial);
                return delta;
            }
            delta *= 0.5;
        }
        0.0
    }
}

/// Cyclic coordinate descent on mean logistic loss + `lambda * |w|_1` with an
/// unpenalized intercept. Each sweep visits the intercept and then every
/// coordinate; between full sweeps the active set is iterated to
/// convergence. Stops once a full sweep lowers the objective by less than
/// `tolerance`.
pub fn fit_l1_logistic<T: Scalar>(
    train: &FeatureMatrix<T>,
    lambda: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<LinearModel<T>, ModelError> {
    let p = prevalence(train)?.as_f64();
    if !train.has_both_classes() {
        return Err(ModelError::SingleClass);
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ModelError::Config(format!("lambda must be positive, got {lambda}")));
    }
    let d = train.n_cols();
    let prob = Problem {
        n: train.n_rows() as f64,
        cols: (0..d).map(|j| train.column(j).iter().map(|v| v.as_f64()).collect()).collect(),
        y: train.labels.iter().map(|&y| f64::from(y)).collect(),
        lambda,
    };
    let mut w = vec![0.0; d];
    let mut b = logit(p);
    let mut z = vec![b; train.n_rows()];
    let objective = |z: &[f64], w: &[f64]| prob.smooth_loss(z) + lambda * w.iter().map(|v| v.abs()).sum::<f64>();
    let mut obj = objective(&z, &w);
    let mut converged = false;
    let mut sweeps = 0;

    let mut trial = vec![0.0; train.n_rows()];
    let nonzero_col: Vec<bool> = prob.cols.iter().map(|c| c.iter().any(|&v| v != 0.0)).collect();
    let mut sweep = |coords: &[usize], w: &mut [f64], b: &mut f64, z: &mut [f64]| {
        *b += prob.update(None, *b, z, &mut trial);
        for &j in coords {
            if nonzero_col[j] {
                w[j] += prob.update(Some(j), w[j], z, &mut trial);
            }
        }
    };

    let all: Vec<usize> = (0..d).collect();
    while sweeps < max_iterations {
        sweep(&all, &mut w, &mut b, &mut z);
        sweeps += 1;
        let full = objective(&z, &w);
        if obj - full < tolerance {
            obj = full;
            converged = true;
            break;
        }
        obj = full;
        let active: Vec<usize> = (0..d).filter(|&j| w[j] != 0.0).collect();
        while sweeps < max_iterations {
            sweep(&active, &mut w, &mut b, &mut z);
            sweeps += 1;
            let next = objective(&z, &w);
            let gain = obj - next;
            obj = next;
            if gain < tolerance * 0.1 {
                break;
            }
        }
    }
    if !converged {
        log::warn!("L1 logistic regression stopped at {max_iterations} sweeps before converging (lambda {lambda}, objective {obj})");
    }
    Ok(LinearModel {
        weights: w.into_iter().map(T::of).collect(),
        intercept: T::of(b),
        lambda,
        converged,
        sweeps,
    })
}
