use std::fmt;

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{sigmoid, WeightVector};
use crate::noise::PrivacyBudget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Dppsgd,
    Amp,
    NonPrivate,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Dppsgd => "DPPSGD",
            Algorithm::Amp => "AMP",
            Algorithm::NonPrivate => "NON_PRIVATE",
        })
    }
}

/// A released logistic-regression model and the metadata needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateModel {
    pub weights: WeightVector,
    pub algorithm: Algorithm,
    #[serde(with = "budget_serde")]
    pub budget: PrivacyBudget,
    pub partner_id: String,
    pub seed: u64,
    /// Set when the training labels were all one class.
    #[serde(default)]
    pub degenerate_labels: bool,
}

impl PrivateModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check_dim(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    /// Raw margins `w·x`; ranking by these avoids the ties a saturated sigmoid creates.
    pub fn margins(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(&x)?;
        Ok(x.dot(self.weights.as_array()))
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.margins(x)?.mapv(sigmoid))
    }
}

/// JSON has no infinity; the noise-free budget is written as the string `"inf"`.
mod budget_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::noise::PrivacyBudget;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Eps {
        Finite(f64),
        Tag(String),
    }

    #[derive(Serialize, Deserialize)]
    struct Repr {
        epsilon: Eps,
        delta: f64,
    }

    pub fn serialize<S: Serializer>(b: &PrivacyBudget, s: S) -> Result<S::Ok, S::Error> {
        let epsilon = if b.epsilon.is_finite() {
            Eps::Finite(b.epsilon)
        } else {
            Eps::Tag("inf".into())
        };
        Repr {
            epsilon,
            delta: b.delta,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PrivacyBudget, D::Error> {
        let r = Repr::deserialize(d)?;
        let epsilon = match r.epsilon {
            Eps::Finite(v) => v,
            Eps::Tag(t) if t == "inf" => f64::INFINITY,
            Eps::Tag(t) => return Err(serde::de::Error::custom(format!("bad epsilon {t:?}"))),
        };
        Ok(PrivacyBudget {
            epsilon,
            delta: r.delta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn noise_free_budget_survives_json() {
        let model = PrivateModel {
            weights: WeightVector::from(vec![0.5, -1.0]),
            algorithm: Algorithm::NonPrivate,
            budget: PrivacyBudget::non_private(),
            partner_id: "p00".into(),
            seed: 3,
            degenerate_labels: false,
        };
        let text = serde_json::to_string(&model).unwrap();
        assert!(text.contains("\"inf\""));
        let back: PrivateModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn predictions_check_dimension() {
        let model = PrivateModel {
            weights: WeightVector::from(vec![0.0, 0.0]),
            algorithm: Algorithm::Dppsgd,
            budget: PrivacyBudget::pure(1.0).unwrap(),
            partner_id: "p".into(),
            seed: 0,
            degenerate_labels: false,
        };
        let p = model.predict_proba(array![[0.1, 0.2]].view()).unwrap();
        assert_eq!(p[0], 0.5);
        assert!(model.margins(array![[0.1]].view()).is_err());
    }
}
