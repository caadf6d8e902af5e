//! Stacked ensembles over partners' released models.
//!
//! The target partner's rows are scored by every base model; those scores
//! become the features of a boosted stacker trained on the target's labels.
//! Only released [`PrivateModel`]s cross the silo boundary, never records.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{fit_gbdt, Forest, GbdtParams};
use crate::loss::sigmoid;
use crate::model::PrivateModel;

pub const ENSEMBLE_FORMAT: &str = "silo-dp/ensemble";
pub const ENSEMBLE_FORMAT_VERSION: u32 = 2;

/// Column `k` holds `sigmoid(w⁽ᵏ⁾·xᵢ)`.
pub fn build_stack_features(x: ArrayView2<'_, f64>, models: &[PrivateModel]) -> Result<Array2<f64>> {
    Ok(build_stack_margins(x, models)?.mapv(sigmoid))
}

/// Column `k` holds the margin `w⁽ᵏ⁾·xᵢ`, the logit of the matching stack feature.
///
/// The stacker trains on these. Tree splits only depend on the order of each
/// column, which the logistic link preserves, but released weights can be large
/// enough that `sigmoid` rounds whole blocks of rows to exactly 0 or 1.
pub fn build_stack_margins(x: ArrayView2<'_, f64>, models: &[PrivateModel]) -> Result<Array2<f64>> {
    let mut out = Array2::<f64>::zeros((x.nrows(), models.len()));
    for (k, model) in models.iter().enumerate() {
        if model.dim() != x.ncols() {
            return Err(Error::Dimension {
                expected: x.ncols(),
                actual: model.dim(),
            });
        }
        out.column_mut(k).assign(&x.dot(model.weights.as_array()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub target_partner: String,
    pub base_models: Vec<PrivateModel>,
    pub stacker: Forest,
    /// Set when the stacker saw one class only and predicts a constant.
    #[serde(default)]
    pub constant_stacker: bool,
}

/// Result of stacker training, with the margins it produced on its own rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StackerFit {
    pub stacker: Forest,
    pub train_margins: Array1<f64>,
    pub loss_history: Vec<f64>,
    pub single_class: bool,
}

/// Trains the boosted stacker. Training is deterministic; `_seed` is accepted
/// so callers can record it alongside runs that do sample.
pub fn train_stacker(features: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, params: &GbdtParams, _seed: u64) -> Result<StackerFit> {
    if features.nrows() < 10 {
        return Err(Error::InvalidDataset(format!(
            "stacker needs at least 10 rows, got {}",
            features.nrows()
        )));
    }
    let out = fit_gbdt(features, y, params)?;
    Ok(StackerFit {
        stacker: out.forest,
        train_margins: out.train_margins,
        loss_history: out.loss_history,
        single_class: out.single_class,
    })
}

/// Builds stack features for the target's training rows and fits the stacker.
pub fn train_ensemble(
    target_partner: &str,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    base_models: Vec<PrivateModel>,
    params: &GbdtParams,
    seed: u64,
) -> Result<(EnsembleModel, StackerFit)> {
    let features = build_stack_margins(x, &base_models)?;
    let fit = train_stacker(features.view(), y, params, seed)?;
    let ensemble = EnsembleModel {
        target_partner: target_partner.to_string(),
        base_models,
        stacker: fit.stacker.clone(),
        constant_stacker: fit.single_class,
    };
    Ok((ensemble, fit))
}

/// Stacker margins; rank metrics should use these rather than probabilities.
pub fn ensemble_margins(ens: &EnsembleModel, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let features = build_stack_margins(x, &ens.base_models)?;
    ens.stacker.predict_margins(features.view())
}

pub fn predict_ensemble(ens: &EnsembleModel, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    Ok(ensemble_margins(ens, x)?.mapv(sigmoid))
}

#[derive(Serialize, Deserialize)]
struct EnsembleDocument {
    format: String,
    version: u32,
    ensemble: EnsembleModel,
}

impl EnsembleModel {
    pub fn to_json(&self) -> Result<String> {
        let doc = EnsembleDocument {
            format: ENSEMBLE_FORMAT.to_string(),
            version: ENSEMBLE_FORMAT_VERSION,
            ensemble: self.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EnsembleDocument =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if doc.format != ENSEMBLE_FORMAT {
            return Err(Error::Serialization(format!("unexpected format tag {:?}", doc.format)));
        }
        if doc.version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported ensemble version {} (expected {ENSEMBLE_FORMAT_VERSION})",
                doc.version
            )));
        }
        let ens = doc.ensemble;
        ens.stacker.validate()?;
        if ens.stacker.n_features != ens.base_models.len() {
            return Err(Error::Serialization(format!(
                "stacker expects {} inputs but {} base models are listed",
                ens.stacker.n_features,
                ens.base_models.len()
            )));
        }
        Ok(ens)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::WeightVector;
    use crate::model::Algorithm;
    use crate::noise::PrivacyBudget;
    use crate::rng::rng_from_seed;
    use ndarray::array;
    use rand::Rng;

    fn model(id: &str, w: Vec<f64>) -> PrivateModel {
        PrivateModel {
            weights: WeightVector::from(w),
            algorithm: Algorithm::Dppsgd,
            budget: PrivacyBudget::pure(0.01).unwrap(),
            partner_id: id.into(),
            seed: 0,
            degenerate_labels: false,
        }
    }

    fn rows(m: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = rng_from_seed(seed);
        let x = Array2::from_shape_fn((m, 3), |(_, j)| if j == 2 { 0.4 } else { rng.random_range(-0.5..0.5) });
        let y = Array1::from_shape_fn(m, |i| {
            if rng.random::<f64>() < sigmoid(5.0 * x[[i, 0]]) { 1.0 } else { 0.0 }
        });
        (x, y)
    }

    #[test]
    fn stack_features_shape_and_range() {
        let (x, _) = rows(5, 1);
        let models = vec![
            model("a", vec![1.0, 2.0, 0.0]),
            model("b", vec![0.0, 0.0, 0.0]),
            model("c", vec![-3.0, 0.5, 1.0]),
        ];
        let f = build_stack_features(x.view(), &models).unwrap();
        assert_eq!(f.dim(), (5, 3));
        assert!(f.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(f.column(1).iter().all(|&v| v == 0.5));
        assert!(build_stack_features(x.view(), &[model("d", vec![1.0])]).is_err());
    }

    #[test]
    fn ensemble_predictions_reproduce_training_margins() {
        let (x, y) = rows(120, 2);
        let models = vec![model("a", vec![4.0, 0.1, 0.0]), model("b", vec![-1.0, 2.0, 0.3])];
        let (ens, fit) = train_ensemble("a", x.view(), y.view(), models, &GbdtParams::default(), 0).unwrap();
        assert_eq!(ensemble_margins(&ens, x.view()).unwrap(), fit.train_margins);
        let p = predict_ensemble(&ens, x.view()).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn margins_keep_order_where_probabilities_saturate() {
        let x = array![[0.1, 0.0, 0.4], [0.2, 0.0, 0.4], [0.3, 0.0, 0.4]];
        let models = vec![model("big", vec![1000.0, 0.0, 0.0])];
        let p = build_stack_features(x.view(), &models).unwrap();
        assert_eq!(p[[1, 0]], p[[2, 0]]);
        let z = build_stack_margins(x.view(), &models).unwrap();
        assert!(z[[0, 0]] < z[[1, 0]] && z[[1, 0]] < z[[2, 0]]);
        assert_eq!(z.mapv(sigmoid), p);
    }

    #[test]
    fn constant_stacker_scores_are_equal() {
        let (x, _) = rows(20, 3);
        let y = Array1::zeros(20);
        let (ens, _) = train_ensemble("a", x.view(), y.view(), vec![model("a", vec![1.0, 1.0, 1.0])], &GbdtParams::default(), 0).unwrap();
        assert!(ens.constant_stacker);
        let p = predict_ensemble(&ens, x.view()).unwrap();
        assert!(p.iter().all(|&v| v == p[0]));
    }

    #[test]
    fn stack_features_ignore_target_labels() {
        let (x, y) = rows(30, 4);
        let models = vec![model("a", vec![1.0, -1.0, 0.5])];
        let flipped = y.mapv(|v| 1.0 - v);
        let a = build_stack_features(x.view(), &models).unwrap();
        let (ens1, _) = train_ensemble("t", x.view(), y.view(), models.clone(), &GbdtParams::default(), 0).unwrap();
        let (ens2, _) = train_ensemble("t", x.view(), flipped.view(), models, &GbdtParams::default(), 0).unwrap();
        assert_eq!(a, build_stack_features(x.view(), &ens1.base_models).unwrap());
        assert_eq!(a, build_stack_features(x.view(), &ens2.base_models).unwrap());
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let (x, y) = rows(60, 5);
        let models = vec![model("a", vec![2.0, 0.0, 0.0]), model("b", vec![0.0, 1.0, 0.0])];
        let (ens, _) = train_ensemble("a", x.view(), y.view(), models, &GbdtParams::default(), 0).unwrap();
        let text = ens.to_json().unwrap();
        assert!(text.contains("\"version\": 2"));
        let back = EnsembleModel::from_json(&text).unwrap();
        assert_eq!(back, ens);
        assert_eq!(predict_ensemble(&back, x.view()).unwrap(), predict_ensemble(&ens, x.view()).unwrap());

        let bumped = text.replace("\"version\": 2", "\"version\": 9");
        assert!(EnsembleModel::from_json(&bumped).is_err());
    }

    #[test]
    fn too_few_rows() {
        let (x, y) = rows(5, 6);
        let f = build_stack_features(x.view(), &[model("a", vec![1.0, 0.0, 0.0])]).unwrap();
        assert!(train_stacker(f.view(), y.view(), &GbdtParams::default(), 0).is_err());
    }
}
