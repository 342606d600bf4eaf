use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_gbm, fit_l1_logistic, fit_mlp, fit_random_forest, MlpParams, ModelError, TrainedModel, TreeParams};
use crate::eval::auc;
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

/// One grid point for one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum HyperParams {
    L1Logistic { lambda: f64, tolerance: f64, max_iterations: usize },
    RandomForest(TreeParams),
    GradientBoosted(TreeParams),
    Mlp(MlpParams),
}

pub fn fit_family<T: Scalar>(hp: &HyperParams, train: &FeatureMatrix<T>, seed: u64) -> Result<TrainedModel<T>, ModelError> {
    Ok(match hp {
        HyperParams::L1Logistic { lambda, tolerance, max_iterations } => {
            TrainedModel::Linear(fit_l1_logistic(train, *lambda, *tolerance, *max_iterations)?)
        }
        HyperParams::RandomForest(p) => TrainedModel::TreeEnsemble(fit_random_forest(train, p, seed)?),
        HyperParams::GradientBoosted(p) => TrainedModel::TreeEnsemble(fit_gbm(train, p, seed)?),
        HyperParams::Mlp(p) => TrainedModel::Mlp(fit_mlp(train, p, seed)?),
    })
}

#[derive(Debug, Clone)]
pub struct TuningOutcome<T> {
    pub best_index: usize,
    pub best: HyperParams,
    /// Fitted on the training fold only.
    pub model: TrainedModel<T>,
    /// Validation AUC per grid point, in grid order.
    pub validation_auc: Vec<f64>,
}

/// Fits every grid point on `train`, scores AUC on `validation` and keeps
/// the best; ties go to the earliest point.
pub fn tune_hyperparameters<T: Scalar>(
    grid: &[HyperParams],
    train: &FeatureMatrix<T>,
    validation: &FeatureMatrix<T>,
    seed: u64,
) -> Result<TuningOutcome<T>, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::Config("empty hyperparameter grid".into()));
    }
    let fitted: Vec<(TrainedModel<T>, f64)> = grid
        .par_iter()
        .map(|hp| {
            let m = fit_family(hp, train, seed)?;
            let s = m.predict(validation)?;
            let a = auc(&s, &validation.labels)?;
            Ok((m, a))
        })
        .collect::<Result<_, ModelError>>()?;
    let mut best_index = 0;
    for (k, (_, a)) in fitted.iter().enumerate() {
        if *a > fitted[best_index].1 {
            best_index = k;
        }
    }
    let validation_auc = fitted.iter().map(|f| f.1).collect();
    let model = fitted.into_iter().nth(best_index).expect("non-empty grid").0;
    Ok(TuningOutcome { best_index, best: grid[best_index].clone(), model, validation_auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn informative(n: usize, seed: u64) -> FeatureMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let labels = rows
            .iter()
            .map(|r| u8::from(rng.random::<f64>() < crate::scalar::sigmoid(4.0 * r[0] - 2.0)))
            .collect();
        FeatureMatrix::from_rows(vec!["a".into(), "b".into()], &rows, labels).unwrap()
    }

    fn l1(lambda: f64) -> HyperParams {
        HyperParams::L1Logistic { lambda, tolerance: 1e-8, max_iterations: 500 }
    }

    #[test]
    fn singleton_and_empty_grids() {
        let (tr, va) = (informative(200, 1), informative(100, 2));
        let out = tune_hyperparameters(&[l1(0.01)], &tr, &va, 0).unwrap();
        assert_eq!(out.best_index, 0);
        assert!(matches!(tune_hyperparameters::<f64>(&[], &tr, &va, 0), Err(ModelError::Config(_))));
    }

    #[test]
    fn moderate_lambda_beats_huge() {
        let (tr, va) = (informative(400, 3), informative(200, 4));
        let out = tune_hyperparameters(&[l1(10.0), l1(0.01)], &tr, &va, 0).unwrap();
        assert_eq!(out.validation_auc[0], 0.5);
        assert!(out.validation_auc[1] > 0.6);
        assert_eq!(out.best_index, 1);
        // the returned model is the train-only fit
        assert_eq!(out.model, fit_family(&l1(0.01), &tr, 0).unwrap());
    }

    #[test]
    fn ties_go_to_first_point() {
        let (tr, va) = (informative(200, 5), informative(100, 6));
        let out = tune_hyperparameters(&[l1(10.0), l1(20.0)], &tr, &va, 0).unwrap();
        assert_eq!(out.validation_auc[0], out.validation_auc[1]);
        assert_eq!(out.best_index, 0);
    }
}
