use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::forest::tree_seed;
use super::tree::{BinnedMatrix, Node, Tree};
use super::{prevalence, ModelError, TreeEnsembleModel, TreeKind, TreeParams};
use crate::features::FeatureMatrix;
use crate::scalar::{logit, sigmoid, softplus, Scalar};

/// Mean logistic loss of probabilities against labels.
pub fn log_loss<T: Scalar>(p: &[T], y: &[u8]) -> f64 {
    let n = p.len().max(1) as f64;
    p.iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.as_f64();
            -if y == 1 { p.ln() } else { (1.0 - p).ln() }
        })
        .sum::<f64>()
        / n
}

/// Log-odds `z` of `p` nudged by a few ulps so that `sigmoid(z) == p`
/// whenever some nearby `z` achieves it.
fn calibrated_logit<T: Scalar>(p: T) -> T {
    let z0 = logit(p);
    if !z0.is_finite() {
        return z0;
    }
    let step = z0.abs().max(T::min_positive_value()) * T::epsilon();
    let mut best = z0;
    let mut err = (sigmoid(z0) - p).abs();
    for k in 1..=64 {
        for s in [T::one(), -T::one()] {
            if err == T::zero() {
                return best;
            }
            let z = z0 + s * step * T::of_usize(k);
            let e = (sigmoid(z) - p).abs();
            if e < err {
                best = z;
                err = e;
            }
        }
    }
    best
}

fn margin_loss(z: f64, y: f64) -> f64 {
    softplus(z) - y * z
}

/// Boosting with logistic loss; see [`fit_gbm_traced`].
pub fn fit_gbm<T: Scalar>(train: &FeatureMatrix<T>, hp: &TreeParams, seed: u64) -> Result<TreeEnsembleModel<T>, ModelError> {
    fit_gbm_traced(train, hp, seed).map(|(m, _)| m)
}

/// Leaf-wise gradient boosting. Returns the model and the mean training
/// log-loss before the first round and after every round; a leaf whose
/// Newton value would raise its rows' loss is halved until it does not, so
/// the trace never increases.
pub fn fit_gbm_traced<T: Scalar>(
    train: &FeatureMatrix<T>,
    hp: &TreeParams,
    seed: u64,
) -> Result<(TreeEnsembleModel<T>, Vec<f64>), ModelError> {
    let prior = prevalence(train)?;
    if !train.has_both_classes() {
        return Err(ModelError::SingleClass);
    }
    if hp.max_leaves < 2 && hp.n_trees > 0 {
        return Err(ModelError::Config("boosting needs max_leaves >= 2".into()));
    }
    let base_score = calibrated_logit(prior);
    let lr = T::of(hp.learning_rate);
    let lr64 = lr.as_f64();
    let n = train.n_rows();
    let y: Vec<f64> = train.labels.iter().map(|&v| f64::from(v)).collect();
    let binned = BinnedMatrix::new(train, hp.max_bins);
    let d = binned.n_features();

    // margins replay prediction: base + lr * (sum of leaf values so far)
    let mut leaf_sum = vec![0.0f64; n];
    let margin = |s: f64| base_score.as_f64() + lr64 * s;
    let total_loss = |ls: &[f64]| ls.iter().zip(&y).map(|(&s, &t)| margin_loss(margin(s), t)).sum::<f64>() / n as f64;
    let mut trace = vec![total_loss(&leaf_sum)];
    let mut trees = Vec::with_capacity(hp.n_trees);

    for round in 0..hp.n_trees {
        let feats: Vec<usize> = match hp.feature_subsample {
            Some(f) if f < 1.0 => {
                let k = ((f * d as f64).round() as usize).clamp(1, d.max(1)).min(d);
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(seed, round));
                let mut v = sample(&mut rng, d, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..d).collect(),
        };
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(margin(leaf_sum[i]));
            g[i] = p - y[i];
            h[i] = p * (1.0 - p);
        }
        let grower = LeafWise { b: &binned, g: &g, h: &h, hp, feats: &feats };
        let (mut nodes, leaves) = grower.grow(n);

        for (node, rows) in leaves {
            let Node::Leaf { value } = &mut nodes[node] else { unreachable!() };
            let gs: f64 = rows.iter().map(|&i| g[i as usize]).sum();
            let hs: f64 = rows.iter().map(|&i| h[i as usize]).sum();
            let mut v = T::of(-gs / (hs + hp.l2));
            let before: f64 = rows.iter().map(|&i| margin_loss(margin(leaf_sum[i as usize]), y[i as usize])).sum();
            let mut accepted = false;
            for _ in 0..40 {
                let vv = v.as_f64();
                let after: f64 = rows
                    .iter()
                    .map(|&i| margin_loss(margin(leaf_sum[i as usize] + vv), y[i as usize]))
                    .sum();
                if after <= before {
                    accepted = true;
                    break;
                }
                v *= T::half();
            }
            if !accepted {
                v = T::zero();
            }
            *value = v;
            for &i in &rows {
                leaf_sum[i as usize] += v.as_f64();
            }
        }
        trace.push(total_loss(&leaf_sum));
        trees.push(Tree { nodes });
    }
    Ok((
        TreeEnsembleModel {
            family: TreeKind::GradientBoosted,
            n_features: train.n_cols(),
            trees,
            learning_rate: lr,
            base_score,
            hyperparameters: hp.clone(),
        },
        trace,
    ))
}

#[derive(Clone, Copy)]
struct Cand {
    gain: f64,
    feat: usize,
    bin: usize,
}

struct Leaf {
    node: usize,
    rows: Vec<u32>,
    depth: usize,
    /// `(sum g, sum h, count)` per bin of every feature in `feats`, laid end to end.
    hist: Vec<(f64, f64, u32)>,
    best: Option<Cand>,
}

struct LeafWise<'a, T> {
    b: &'a BinnedMatrix<T>,
    g: &'a [f64],
    h: &'a [f64],
    hp: &'a TreeParams,
    feats: &'a [usize],
}

impl<T: Scalar> LeafWise<'_, T> {
    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.feats.len() + 1);
        let mut acc = 0;
        for &f in self.feats {
            off.push(acc);
            acc += self.b.n_bins(f);
        }
        off.push(acc);
        off
    }

    fn histogram(&self, rows: &[u32], off: &[usize]) -> Vec<(f64, f64, u32)> {
        let mut hist = vec![(0.0, 0.0, 0u32); off[self.feats.len()]];
        for (k, &f) in self.feats.iter().enumerate() {
            let codes = &self.b.bins[f];
            let hk = &mut hist[off[k]..off[k + 1]];
            for &i in rows {
                let c = &mut hk[codes[i as usize] as usize];
                c.0 += self.g[i as usize];
                c.1 += self.h[i as usize];
                c.2 += 1;
            }
        }
        hist
    }

    fn best_split(&self, hist: &[(f64, f64, u32)], off: &[usize], depth: usize) -> Option<Cand> {
        if self.hp.max_depth.is_some_and(|m| depth >= m) {
            return None;
        }
        let lam = self.hp.l2;
        let min_leaf = self.hp.min_samples_leaf.max(1) as u32;
        let (gt, ht, nt) = hist[off[0]..off[1]].iter().fold((0.0, 0.0, 0u32), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
        let parent = gt * gt / (ht + lam);
        let mut best: Option<Cand> = None;
        for (k, &f) in self.feats.iter().enumerate() {
            let hk = &hist[off[k]..off[k + 1]];
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0u32);
            for (bin, c) in hk.iter().enumerate().take(hk.len().saturating_sub(1)) {
                gl += c.0;
                hl += c.1;
                nl += c.2;
                let (gr, hr, nr) = (gt - gl, ht - hl, nt - nl);
                if nl < min_leaf || nr < min_leaf || hl < self.hp.min_hessian || hr < self.hp.min_hessian {
                    continue;
                }
                let gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                    best = Some(Cand { gain, feat: f, bin });
                }
            }
        }
        best
    }

    /// Grows one tree; returns its nodes and the rows of every leaf.
    fn grow(&self, n: usize) -> (Vec<Node<T>>, Vec<(usize, Vec<u32>)>) {
        let off = self.offsets();
        let mut nodes = vec![Node::Leaf { value: T::zero() }];
        let rows: Vec<u32> = (0..n as u32).collect();
        let hist = self.histogram(&rows, &off);
        let best = self.best_split(&hist, &off, 0);
        let mut leaves = vec![Leaf { node: 0, rows, depth: 0, hist, best }];
        while leaves.len() < self.hp.max_leaves {
            let mut pick: Option<usize> = None;
            for (k, l) in leaves.iter().enumerate() {
                if let Some(c) = l.best {
                    if pick.is_none_or(|p| c.gain > leaves[p].best.map_or(f64::NEG_INFINITY, |b| b.gain)) {
                        pick = Some(k);
                    }
                }
            }
            let Some(k) = pick else { break };
            let leaf = leaves.swap_remove(k);
            let Cand { feat, bin, .. } = leaf.best.expect("picked leaf has a split");
            let codes = &self.b.bins[feat];
            let (lrows, rrows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&i| codes[i as usize] as usize <= bin);
            // build the smaller child and subtract for the larger
            let (small, large_is_left) = if lrows.len() <= rrows.len() { (&lrows, false) } else { (&rrows, true) };
            let hs = self.histogram(small, &off);
            let hl: Vec<(f64, f64, u32)> = leaf.hist.iter().zip(&hs).map(|(p, s)| (p.0 - s.0, p.1 - s.1, p.2 - s.2)).collect();
            let (lhist, rhist) = if large_is_left { (hl, hs) } else { (hs, hl) };
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { value: T::zero() });
            nodes.push(Node::Leaf { value: T::zero() });
            nodes[leaf.node] = Node::Split { feature: feat, threshold: self.b.thresholds[feat][bin], left: li, right: ri };
            let depth = leaf.depth + 1;
            let lb = self.best_split(&lhist, &off, depth);
            let rb = self.best_split(&rhist, &off, depth);
            leaves.push(Leaf { node: li, rows: lrows, depth, hist: lhist, best: lb });
            leaves.push(Leaf { node: ri, rows: rrows, depth, hist: rhist, best: rb });
        }
        let mut out: Vec<(usize, Vec<u32>)> = leaves.into_iter().map(|l| (l.node, l.rows)).collect();
        out.sort_by_key(|l| l.0);
        (nodes, out)
    }
}
