//! Resistance learners: the antibiogram baseline, L1 logistic regression,
//! random forest, leaf-wise gradient boosting, a multilayer perceptron and
//! their averaging ensemble.

mod antibiogram;
mod boosting;
mod ensemble;
mod forest;
mod logistic;
mod mlp;
pub mod tree;
mod tuning;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

pub use antibiogram::{fit_antibiogram, AntibiogramModel};
pub use boosting::{fit_gbm, fit_gbm_traced, log_loss};
pub use ensemble::{ensemble_average, EnsembleModel};
pub use forest::fit_random_forest;
pub use logistic::{fit_l1_logistic, lambda_max, l1_objective, soft_threshold, LinearModel};
pub use mlp::{fit_mlp, relu, MlpModel, MlpParams};
pub use tree::{Node, Tree};
pub use tuning::{fit_family, tune_hyperparameters, HyperParams, TuningOutcome};

/// Serialized model files carry this version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no fitting rows")]
    Empty,
    #[error("fitting rows contain a single class")]
    SingleClass,
    #[error("model expects {expected} features, rows have {found}")]
    Dimension { expected: usize, found: usize },
    #[error("model configuration: {0}")]
    Config(String),
    #[error("validation scoring: {0}")]
    Eval(#[from] crate::eval::EvalError),
}

/// Report roster, in the order reports list them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Antibiogram,
    L1Logistic,
    RandomForest,
    NeuralNetwork,
    GradientBoosted,
    Ensemble,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 6] = [
        ModelFamily::Antibiogram,
        ModelFamily::L1Logistic,
        ModelFamily::RandomForest,
        ModelFamily::NeuralNetwork,
        ModelFamily::GradientBoosted,
        ModelFamily::Ensemble,
    ];

    /// Short report label.
    pub fn label(self) -> &'static str {
        match self {
            ModelFamily::Antibiogram => "AB",
            ModelFamily::L1Logistic => "L1LR",
            ModelFamily::RandomForest => "RF",
            ModelFamily::NeuralNetwork => "NN",
            ModelFamily::GradientBoosted => "GBM",
            ModelFamily::Ensemble => "ensemble",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    RandomForest,
    GradientBoosted,
}

/// Shared tree-learner settings. Fields a learner does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub n_trees: usize,
    /// Depth limit; `None` leaves depth unbounded.
    pub max_depth: Option<usize>,
    /// Leaf budget per tree (boosting).
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features considered per split (forest) or per tree
    /// (boosting). `None` means `sqrt(d)` per split for the forest and all
    /// features for boosting.
    pub feature_subsample: Option<f64>,
    pub learning_rate: f64,
    /// Added to the Hessian sum in boosting leaf values and split gains.
    pub l2: f64,
    pub min_hessian: f64,
    pub bootstrap: bool,
    pub max_bins: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            max_leaves: 31,
            min_samples_leaf: 1,
            feature_subsample: None,
            learning_rate: 0.1,
            l2: 1.0,
            min_hessian: 1e-3,
            bootstrap: true,
            max_bins: 255,
        }
    }
}

impl TreeParams {
    pub fn forest(n_trees: usize, max_depth: Option<usize>) -> Self {
        Self { n_trees, max_depth, ..Self::default() }
    }

    pub fn boosting(n_trees: usize, max_leaves: usize, min_samples_leaf: usize) -> Self {
        Self { n_trees, max_leaves, min_samples_leaf, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct TreeEnsembleModel<T> {
    pub family: TreeKind,
    pub n_features: usize,
    pub trees: Vec<Tree<T>>,
    #[serde(with = "crate::scalar::decimal")]
    pub learning_rate: T,
    #[serde(with = "crate::scalar::decimal")]
    pub base_score: T,
    pub hyperparameters: TreeParams,
}

impl<T: Scalar> TreeEnsembleModel<T> {
    pub fn predict_row(&self, x: &[T]) -> T {
        match self.family {
            TreeKind::RandomForest => {
                if self.trees.is_empty() {
                    return crate::scalar::sigmoid(self.base_score);
                }
                let s: T = self.trees.iter().map(|t| t.predict(x)).sum();
                s / T::of_usize(self.trees.len())
            }
            TreeKind::GradientBoosted => crate::scalar::sigmoid(self.margin_row(x)),
        }
    }

    /// Boosting log-odds `base_score + learning_rate * sum(leaf values)`.
    pub fn margin_row(&self, x: &[T]) -> T {
        let s: T = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score + self.learning_rate * s
    }
}

/// Any fitted model, tagged by kind when serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum TrainedModel<T> {
    Antibiogram(AntibiogramModel<T>),
    Linear(LinearModel<T>),
    TreeEnsemble(TreeEnsembleModel<T>),
    Mlp(MlpModel<T>),
    Ensemble(EnsembleModel<T>),
}

impl<T: Scalar> TrainedModel<T> {
    pub fn family(&self) -> ModelFamily {
        match self {
            TrainedModel::Antibiogram(_) => ModelFamily::Antibiogram,
            TrainedModel::Linear(_) => ModelFamily::L1Logistic,
            TrainedModel::TreeEnsemble(m) => match m.family {
                TreeKind::RandomForest => ModelFamily::RandomForest,
                TreeKind::GradientBoosted => ModelFamily::GradientBoosted,
            },
            TrainedModel::Mlp(_) => ModelFamily::NeuralNetwork,
            TrainedModel::Ensemble(_) => ModelFamily::Ensemble,
        }
    }

    /// Feature count the model was fitted on; `None` for the antibiogram,
    /// which reads only row keys.
    pub fn n_features(&self) -> Option<usize> {
        match self {
            TrainedModel::Antibiogram(_) => None,
            TrainedModel::Linear(m) => Some(m.weights.len()),
            TrainedModel::TreeEnsemble(m) => Some(m.n_features),
            TrainedModel::Mlp(m) => Some(m.layer_sizes[0]),
            TrainedModel::Ensemble(m) => m.members.first().and_then(|x| x.n_features()),
        }
    }

    /// One probability per row.
    pub fn predict(&self, rows: &FeatureMatrix<T>) -> Result<Vec<T>, ModelError> {
        if let Some(expected) = self.n_features() {
            if rows.n_cols() != expected {
                return Err(ModelError::Dimension { expected, found: rows.n_cols() });
            }
        }
        Ok(match self {
            TrainedModel::Antibiogram(m) => m.predict(rows),
            TrainedModel::Linear(m) => rows.rows().map(|x| m.predict_row(x)).collect(),
            TrainedModel::TreeEnsemble(m) => {
                use rayon::prelude::*;
                (0..rows.n_rows()).into_par_iter().map(|i| m.predict_row(rows.row(i))).collect()
            }
            TrainedModel::Mlp(m) => rows.rows().map(|x| m.predict_row(x)).collect(),
            TrainedModel::Ensemble(m) => m.predict(rows)?,
        })
    }
}

/// Training prevalence; errors on empty input.
pub(crate) fn prevalence<T: Scalar>(train: &FeatureMatrix<T>) -> Result<T, ModelError> {
    if train.n_rows() == 0 {
        return Err(ModelError::Empty);
    }
    Ok(T::of_usize(train.positives()) / T::of_usize(train.n_rows()))
}
