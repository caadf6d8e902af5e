//! Regularized logistic loss and the constants that drive both private trainers.
//!
//! Data rows carry the bias as their last coordinate, so a weight vector for
//! `d` raw features has `d + 1` entries and there is no separate intercept.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model weights; the last coordinate multiplies the bias column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Array1<f64>);

impl WeightVector {
    pub fn new(values: Array1<f64>) -> Self {
        WeightVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        WeightVector(Array1::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(self.0.view())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }
}

impl From<Array1<f64>> for WeightVector {
    fn from(values: Array1<f64>) -> Self {
        WeightVector(values)
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(values: Vec<f64>) -> Self {
        WeightVector(Array1::from(values))
    }
}

/// Loss weight `c`, l2 penalty `lambda` and hypothesis-ball radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub c: f64,
    pub lambda: f64,
    pub radius: f64,
}

impl LossConfig {
    pub fn new(c: f64, lambda: f64, radius: f64) -> Result<Self> {
        let cfg = LossConfig { c, lambda, radius };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `R = 1 / lambda`, the radius used by the permutation SGD trainer.
    pub fn with_inverse_radius(c: f64, lambda: f64) -> Result<Self> {
        Self::new(c, lambda, 1.0 / lambda)
    }

    pub fn validate(&self) -> Result<()> {
        // `!(x > 0)` also rejects NaN.
        if !(self.c > 0.0) || !(self.lambda > 0.0) || !(self.radius > 0.0) {
            return Err(Error::Configuration(format!(
                "loss config requires c, lambda, radius > 0 (got c={}, lambda={}, radius={})",
                self.c, self.lambda, self.radius
            )));
        }
        Ok(())
    }
}

/// Lipschitz, smoothness and strong-convexity constants of the loss, plus the
/// L2-sensitivity once a noise mechanism has been calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBounds {
    pub lipschitz: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub sensitivity: f64,
}

/// Logistic function, saturating instead of underflowing to exactly zero.
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.max(f64::MIN_POSITIVE)
}

pub(crate) fn l2_norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Cross-entropy of one example with margin `z = w·x`, in log-sum-exp form.
#[inline]
fn example_cross_entropy(z: f64, y: f64) -> f64 {
    (-z.abs()).exp().ln_1p() + z.max(0.0) - z * y
}

fn check_shapes(w: &WeightVector, x: &ArrayView2<'_, f64>, y: &ArrayView1<'_, f64>) -> Result<()> {
    if w.len() != x.ncols() {
        return Err(Error::Dimension {
            expected: x.ncols(),
            actual: w.len(),
        });
    }
    if y.len() != x.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidDataset("loss over zero records".into()));
    }
    Ok(())
}

/// `-(C/m) Σ [y ln ŷ + (1-y) ln(1-ŷ)] + (λ/2)‖w‖²`.
pub fn loss(
    w: &WeightVector,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    cfg: &LossConfig,
) -> Result<f64> {
    check_shapes(w, &x, &y)?;
    let wv = w.view();
    let sum: f64 = x
        .rows()
        .into_iter()
        .zip(y.iter())
        .map(|(row, &label)| example_cross_entropy(row.dot(&wv), label))
        .sum();
    let m = x.nrows() as f64;
    Ok(cfg.c * sum / m + 0.5 * cfg.lambda * wv.dot(&wv))
}

/// `(C/m) Σ (ŷᵢ - yᵢ) xᵢ + λ w`.
pub fn loss_gradient(
    w: &WeightVector,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    cfg: &LossConfig,
) -> Result<Array1<f64>> {
    check_shapes(w, &x, &y)?;
    Ok(gradient_over(w.view(), x, y, 0..x.nrows(), cfg))
}

/// Gradient restricted to the rows yielded by `rows`. Shapes are assumed checked.
pub(crate) fn gradient_over<I>(
    w: ArrayView1<'_, f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    rows: I,
    cfg: &LossConfig,
) -> Array1<f64>
where
    I: IntoIterator<Item = usize>,
{
    let mut acc = Array1::<f64>::zeros(w.len());
    let mut count = 0usize;
    for i in rows {
        let row = x.row(i);
        let residual = sigmoid(row.dot(&w)) - y[i];
        acc.scaled_add(residual, &row);
        count += 1;
    }
    let scale = cfg.c / count.max(1) as f64;
    acc.mapv_inplace(|v| v * scale);
    acc.scaled_add(cfg.lambda, &w);
    acc
}

/// Projects onto the ball of radius `radius`. Vectors already inside are
/// returned bit-identical, and the result of a projection is a fixed point.
pub fn project_to_ball(w: WeightVector, radius: f64) -> WeightVector {
    let norm = w.norm();
    if norm <= radius {
        return w;
    }
    let mut v = w.into_inner();
    v.mapv_inplace(|x| x * (radius / norm));
    // Rounding can leave the norm a hair above the radius.
    while l2_norm(v.view()) > radius {
        v.mapv_inplace(|x| x * (1.0 - f64::EPSILON));
    }
    WeightVector(v)
}

/// `L = C + λR`, `β = C + λ`, `γ = λ`; sensitivity is left at zero.
pub fn derive_bounds(cfg: &LossConfig) -> LossBounds {
    LossBounds {
        lipschitz: cfg.c + cfg.lambda * cfg.radius,
        smoothness: cfg.c + cfg.lambda,
        strong_convexity: cfg.lambda,
        sensitivity: 0.0,
    }
}
