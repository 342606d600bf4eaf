use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{prevalence, ModelError};
use crate::features::FeatureMatrix;
use crate::scalar::{sigmoid, softplus, Scalar};

pub fn relu<T: Scalar>(z: T) -> T {
    z.max(T::zero())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden_sizes: Vec<usize>,
    /// Passes over the training rows.
    pub max_iterations: usize,
    pub step_size: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 penalty `l2/2 * |W|^2` on weights (not biases); 0 gives plain
    /// mean logistic loss.
    pub l2: f64,
    /// Stop after this many passes without the mean training loss improving by `tol`.
    pub n_iter_no_change: usize,
    pub tol: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![32],
            max_iterations: 200,
            step_size: 1e-3,
            batch_size: 200,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            l2: 0.0,
            n_iter_no_change: 10,
            tol: 1e-4,
        }
    }
}

/// Fully connected network, ReLU hidden layers, one sigmoid output.
/// `weights[l]` is row-major `layer_sizes[l + 1] x layer_sizes[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MlpModel<T> {
    pub layer_sizes: Vec<usize>,
    #[serde(with = "nested")]
    pub weights: Vec<Vec<T>>,
    #[serde(with = "nested")]
    pub biases: Vec<Vec<T>>,
    pub hyperparameters: MlpParams,
}

mod nested {
    use crate::scalar::{decimal, Scalar};
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, T: Scalar>(v: &[Vec<T>], s: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<Vec<String>> = v.iter().map(|l| l.iter().map(|&x| decimal::format(x)).collect()).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Scalar>(d: D) -> Result<Vec<Vec<T>>, D::Error> {
        let raw = Vec::<Vec<String>>::deserialize(d)?;
        raw.iter()
            .map(|l| l.iter().map(|s| decimal::parse(s).map_err(D::Error::custom)).collect())
            .collect()
    }
}

impl<T: Scalar> MlpModel<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn init(n_inputs: usize, hp: &MlpParams, seed: u64) -> Result<Self, ModelError> {
        if hp.hidden_sizes.is_empty() || hp.hidden_sizes.contains(&0) {
            return Err(ModelError::Config("the network needs at least one non-empty hidden layer".into()));
        }
        let mut layer_sizes = vec![n_inputs];
        layer_sizes.extend(&hp.hidden_sizes);
        layer_sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push((0..fan_in * fan_out).map(|_| T::of(rng.random_range(-bound..=bound))).collect());
            biases.push(vec![T::zero(); fan_out]);
        }
        Ok(Self { layer_sizes, weights, biases, hyperparameters: hp.clone() })
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    /// Output log-odds.
    pub fn margin_row(&self, x: &[T]) -> T {
        let mut a: Vec<T> = x.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let n_in = self.layer_sizes[l];
            a = b
                .iter()
                .enumerate()
                .map(|(o, &bo)| {
                    let z = bo + w[o * n_in..(o + 1) * n_in].iter().zip(&a).map(|(&wi, &ai)| wi * ai).sum::<T>();
                    if l == last {
                        z
                    } else {
                        relu(z)
                    }
                })
                .collect();
        }
        a[0]
    }

    pub fn predict_row(&self, x: &[T]) -> T {
        sigmoid(self.margin_row(x))
    }

    /// Flattened parameters: for each layer, weights then biases.
    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params_flat(&mut self, p: &[T]) {
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&p[k..k + nw]);
            k += nw;
            b.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
    }

    /// Mean logistic loss (plus the L2 term) over `rows` of `data`, and its
    /// gradient in [`MlpModel::params_flat`] order.
    pub fn loss_and_gradient(&self, data: &FeatureMatrix<T>, rows: &[usize]) -> (T, Vec<T>) {
        let n_layers = self.weights.len();
        let mut gw: Vec<Vec<T>> = self.weights.iter().map(|w| vec![T::zero(); w.len()]).collect();
        let mut gb: Vec<Vec<T>> = self.biases.iter().map(|b| vec![T::zero(); b.len()]).collect();
        let mut loss = T::zero();
        let mut acts: Vec<Vec<T>> = Vec::with_capacity(n_layers + 1);
        for &i in rows {
            acts.clear();
            acts.push(data.row(i).to_vec());
            for l in 0..n_layers {
                let n_in = self.layer_sizes[l];
                let w = &self.weights[l];
                let a = &acts[l];
                let z: Vec<T> = self.biases[l]
                    .iter()
                    .enumerate()
                    .map(|(o, &bo)| bo + w[o * n_in..(o + 1) * n_in].iter().zip(a).map(|(&wi, &ai)| wi * ai).sum::<T>())
                    .collect();
                acts.push(if l + 1 == n_layers { z } else { z.into_iter().map(relu).collect() });
            }
            let z = acts[n_layers][0];
            let y = T::of(f64::from(data.labels[i]));
            loss += softplus(z) - y * z;
            // delta holds dL/dz for the current layer
            let mut delta = vec![sigmoid(z) - y];
            for l in (0..n_layers).rev() {
                let n_in = self.layer_sizes[l];
                let a = &acts[l];
                for (o, &d) in delta.iter().enumerate() {
                    gb[l][o] += d;
                    for (g, &ai) in gw[l][o * n_in..(o + 1) * n_in].iter_mut().zip(a) {
                        *g += d * ai;
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    delta = (0..n_in)
                        .map(|j| {
                            if a[j] > T::zero() {
                                delta.iter().enumerate().map(|(o, &d)| d * w[o * n_in + j]).sum()
                            } else {
                                T::zero()
                            }
                        })
                        .collect();
                }
            }
        }
        let inv = T::one() / T::of_usize(rows.len().max(1));
        loss *= inv;
        let lam = T::of(self.hyperparameters.l2);
        let mut grad = Vec::new();
        for (l, (gwl, gbl)) in gw.iter().zip(&gb).enumerate() {
            for (g, &w) in gwl.iter().zip(&self.weights[l]) {
                grad.push(*g * inv + lam * w);
            }
            grad.extend(gbl.iter().map(|&g| g * inv));
        }
        if lam > T::zero() {
            let sq: T = self.weights.iter().flatten().map(|&w| w * w).sum();
            loss += lam * T::half() * sq;
        }
        (loss, grad)
    }
}

/// Mini-batch Adam on mean logistic loss. Rows are reshuffled every pass.
pub fn fit_mlp<T: Scalar>(train: &FeatureMatrix<T>, hp: &MlpParams, seed: u64) -> Result<MlpModel<T>, ModelError> {
    prevalence(train)?;
    if hp.batch_size == 0 || !(hp.step_size > 0.0) {
        return Err(ModelError::Config("batch_size and step_size must be positive".into()));
    }
    let mut model = MlpModel::init(train.n_cols(), hp, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A_0F0F_F0F0);
    let mut theta = model.params_flat();
    let mut m = vec![T::zero(); theta.len()];
    let mut v = vec![T::zero(); theta.len()];
    let (b1, b2, eps, lr) = (T::of(hp.beta1), T::of(hp.beta2), T::of(hp.epsilon), T::of(hp.step_size));
    let mut order: Vec<usize> = (0..train.n_rows()).collect();
    let mut t = 0i32;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..hp.max_iterations {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hp.batch_size) {
            model.set_params_flat(&theta);
            let (loss, g) = model.loss_and_gradient(train, batch);
            epoch_loss += loss.as_f64() * batch.len() as f64;
            t += 1;
            let c1 = T::one() - b1.powi(t);
            let c2 = T::one() - b2.powi(t);
            for k in 0..theta.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                let mh = m[k] / c1;
                let vh = v[k] / c2;
                theta[k] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        epoch_loss /= train.n_rows() as f64;
        if epoch_loss > best - hp.tol {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(epoch_loss);
        if hp.n_iter_no_change > 0 && stale >= hp.n_iter_no_change {
            break;
        }
    }
    model.set_params_flat(&theta);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn and_fixture() -> FeatureMatrix<f64> {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        FeatureMatrix::from_rows(vec!["a".into(), "b".into()], &rows, vec![0, 0, 0, 1]).unwrap()
    }

    #[test]
    fn relu_and_output_range() {
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu(2.5), 2.5);
        let m = MlpModel::<f64>::init(3, &MlpParams { hidden_sizes: vec![4, 3], ..MlpParams::default() }, 1).unwrap();
        assert_eq!(m.n_layers(), 4);
        for x in [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [50.0, -50.0, 3.0]] {
            let p = m.predict_row(&x);
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn learns_and() {
        let data = and_fixture();
        let hp = MlpParams { hidden_sizes: vec![4], max_iterations: 2000, step_size: 0.01, batch_size: 4, n_iter_no_change: 0, ..MlpParams::default() };
        let m = fit_mlp(&data, &hp, 3).unwrap();
        for (x, &y) in data.rows().zip(&data.labels) {
            assert_eq!(u8::from(m.predict_row(x) > 0.5), y);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<u8> = (0..12).map(|i| (i % 3 == 0) as u8).collect();
        let data = FeatureMatrix::from_rows(vec!["a".into(), "b".into(), "c".into()], &rows, labels).unwrap();
        let idx: Vec<usize> = (0..12).collect();
        let hp = MlpParams { hidden_sizes: vec![5, 4], l2: 1e-3, ..MlpParams::default() };
        let mut m = MlpModel::<f64>::init(3, &hp, 2).unwrap();
        let (_, g) = m.loss_and_gradient(&data, &idx);
        let theta = m.params_flat();
        let h = 1e-6;
        for k in 0..theta.len() {
            let mut t = theta.clone();
            t[k] += h;
            m.set_params_flat(&t);
            let up = m.loss_and_gradient(&data, &idx).0;
            t[k] -= 2.0 * h;
            m.set_params_flat(&t);
            let dn = m.loss_and_gradient(&data, &idx).0;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(g[k].abs()).max(1e-3), "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn rejects_empty_hidden_layers() {
        let hp = MlpParams { hidden_sizes: vec![], ..MlpParams::default() };
        assert!(matches!(fit_mlp(&and_fixture(), &hp, 0), Err(ModelError::Config(_))));
    }
}
