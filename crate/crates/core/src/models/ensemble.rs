use serde::{Deserialize, Serialize};

use super::{ModelError, ModelFamily, TrainedModel};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

/// Unweighted mean of an MLP, a gradient-boosted and a random-forest model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct EnsembleModel<T> {
    pub members: Vec<TrainedModel<T>>,
}

impl<T: Scalar> EnsembleModel<T> {
    pub fn predict(&self, rows: &FeatureMatrix<T>) -> Result<Vec<T>, ModelError> {
        let mut sum = vec![T::zero(); rows.n_rows()];
        for m in &self.members {
            for (s, p) in sum.iter_mut().zip(m.predict(rows)?) {
                *s += p;
            }
        }
        let k = T::of_usize(self.members.len());
        Ok(sum.into_iter().map(|s| s / k).collect())
    }
}

/// Requires exactly one each of NN, GBM and RF over one feature space.
pub fn ensemble_average<T: Scalar>(members: Vec<TrainedModel<T>>) -> Result<EnsembleModel<T>, ModelError> {
    if members.len() != 3 {
        return Err(ModelError::Config(format!("the ensemble takes 3 members, got {}", members.len())));
    }
    let mut kinds: Vec<ModelFamily> = members.iter().map(|m| m.family()).collect();
    kinds.sort();
    if kinds != [ModelFamily::RandomForest, ModelFamily::NeuralNetwork, ModelFamily::GradientBoosted] {
        return Err(ModelError::Config(format!("ensemble members must be NN, GBM and RF, got {kinds:?}")));
    }
    let widths: Vec<Option<usize>> = members.iter().map(|m| m.n_features()).collect();
    if widths.windows(2).any(|w| w[0] != w[1]) {
        return Err(ModelError::Config(format!("ensemble members disagree on feature count: {widths:?}")));
    }
    Ok(EnsembleModel { members })
}
