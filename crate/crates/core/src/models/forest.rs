use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{BinnedMatrix, Node, Tree};
use super::{prevalence, ModelError, TreeEnsembleModel, TreeKind, TreeParams};
use crate::features::FeatureMatrix;
use crate::scalar::{logit, Scalar};

/// Sub-seed for tree `t` of a fit seeded with `seed`.
pub(crate) fn tree_seed(seed: u64, t: usize) -> u64 {
    seed ^ (t as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Features examined per split.
fn mtry(hp: &TreeParams, d: usize) -> usize {
    let k = match hp.feature_subsample {
        Some(f) => (f * d as f64).round() as usize,
        None => (d as f64).sqrt().round() as usize,
    };
    k.clamp(1, d.max(1))
}

/// Bagged Gini trees, each split drawn over a fresh random feature subset.
/// Tree `t` depends only on `(data, hp, seed, t)`, so the fit is identical
/// under any thread count.
pub fn fit_random_forest<T: Scalar>(
    train: &FeatureMatrix<T>,
    hp: &TreeParams,
    seed: u64,
) -> Result<TreeEnsembleModel<T>, ModelError> {
    let prior = prevalence(train)?;
    let binned = BinnedMatrix::new(train, hp.max_bins);
    let n = train.n_rows();
    let trees: Vec<Tree<T>> = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(seed, t));
            let rows: Vec<u32> = if hp.bootstrap {
                (0..n).map(|_| rng.random_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            let mut g = Grower { b: &binned, y: &train.labels, hp, mtry: mtry(hp, binned.n_features()), rng, nodes: Vec::new() };
            g.grow(rows, 0);
            Tree { nodes: g.nodes }
        })
        .collect();
    Ok(TreeEnsembleModel {
        family: TreeKind::RandomForest,
        n_features: train.n_cols(),
        trees,
        learning_rate: T::one(),
        base_score: logit(prior),
        hyperparameters: hp.clone(),
    })
}

struct Grower<'a, T> {
    b: &'a BinnedMatrix<T>,
    y: &'a [u8],
    hp: &'a TreeParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node<T>>,
}

/// `sum over children of (p^2 + q^2) / n`; larger is purer.
fn purity(n: f64, p: f64) -> f64 {
    let q = n - p;
    (p * p + q * q) / n
}

impl<T: Scalar> Grower<'_, T> {
    fn grow(&mut self, rows: Vec<u32>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| self.y[i as usize] == 1).count();
        // an empty bootstrap can only occur for n == 0, which fit rejects
        self.nodes.push(Node::Leaf { value: T::of_usize(pos) / T::of_usize(n.max(1)) });
        let min_leaf = self.hp.min_samples_leaf.max(1);
        if self.hp.max_depth.is_some_and(|m| depth >= m) || n < 2 * min_leaf || pos == 0 || pos == n {
            return id;
        }
        let d = self.b.n_features();
        let parent = purity(n as f64, pos as f64);
        let mut best: Option<(f64, usize, usize)> = None;
        let feats = sample(&mut self.rng, d, self.mtry.min(d));
        for f in feats.iter() {
            let nb = self.b.n_bins(f);
            if nb < 2 {
                continue;
            }
            let codes = &self.b.bins[f];
            let mut cnt = vec![0usize; nb];
            let mut pcnt = vec![0usize; nb];
            for &i in &rows {
                let c = codes[i as usize] as usize;
                cnt[c] += 1;
                pcnt[c] += self.y[i as usize] as usize;
            }
            let (mut nl, mut pl) = (0usize, 0usize);
            for bin in 0..nb - 1 {
                nl += cnt[bin];
                pl += pcnt[bin];
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let gain = purity(nl as f64, pl as f64) + purity(nr as f64, (pos - pl) as f64) - parent;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, bin));
                }
            }
        }
        let Some((_, f, bin)) = best else { return id };
        let codes = &self.b.bins[f];
        let (left, right): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&i| codes[i as usize] as usize <= bin);
        drop(rows);
        let threshold = self.b.thresholds[f][bin];
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature: f, threshold, left: l, right: r };
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TrainedModel;

    fn separable() -> FeatureMatrix<f64> {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 7) as f64, i as f64 / 60.0, ((i * 13) % 5) as f64]).collect();
        let labels = (0..60).map(|i| u8::from(i >= 27)).collect();
        FeatureMatrix::from_rows(vec!["a".into(), "b".into(), "c".into()], &rows, labels).unwrap()
    }

    #[test]
    fn depth_zero_predicts_prevalence() {
        let m = separable();
        let hp = TreeParams { n_trees: 5, max_depth: Some(0), bootstrap: false, ..TreeParams::default() };
        let f = fit_random_forest(&m, &hp, 1).unwrap();
        for t in &f.trees {
            assert_eq!(t.nodes.len(), 1);
        }
        let prev = 33.0 / 60.0;
        for x in m.rows() {
            assert_eq!(f.predict_row(x), prev);
        }
    }

    /// Exhaustive single-threshold search confirms the fixture is separable.
    fn separable_by_one_threshold(m: &FeatureMatrix<f64>) -> bool {
        (0..m.n_cols()).any(|j| {
            let col = m.column(j);
            col.iter().any(|&t| {
                let side: Vec<bool> = col.iter().map(|&v| v <= t).collect();
                side.iter().zip(&m.labels).all(|(&s, &y)| s == (y == 0))
                    || side.iter().zip(&m.labels).all(|(&s, &y)| s == (y == 1))
            })
        })
    }

    #[test]
    fn separable_fixture_is_fit_exactly() {
        let m = separable();
        assert!(separable_by_one_threshold(&m));
        let hp = TreeParams { n_trees: 25, feature_subsample: Some(1.0), ..TreeParams::default() };
        let f = fit_random_forest(&m, &hp, 7).unwrap();
        for (x, &y) in m.rows().zip(&m.labels) {
            assert_eq!(u8::from(f.predict_row(x) > 0.5), y);
        }
    }

    #[test]
    fn averaging_bound_and_determinism() {
        let m = separable();
        let hp = TreeParams { n_trees: 10, max_depth: Some(3), ..TreeParams::default() };
        let a = fit_random_forest(&m, &hp, 3).unwrap();
        let b = fit_random_forest(&m, &hp, 3).unwrap();
        assert_eq!(a, b);
        for x in m.rows() {
            let per: Vec<f64> = a.trees.iter().map(|t| t.predict(x)).collect();
            let p = a.predict_row(x);
            let lo = per.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = per.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= p && p <= hi);
            assert!(a.trees.iter().all(|t| t.depth() <= 3));
        }
        let c = fit_random_forest(&m, &hp, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_row_gives_prior_leaves() {
        let m = FeatureMatrix::<f64>::from_rows(vec!["a".into()], &[vec![0.3]], vec![1]).unwrap();
        let f = fit_random_forest(&m, &TreeParams::forest(3, None), 0).unwrap();
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
        let p = TrainedModel::TreeEnsemble(f).predict(&m).unwrap();
        assert_eq!(p, vec![1.0]);
    }
}
