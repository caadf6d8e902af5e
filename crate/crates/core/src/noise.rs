//! Sensitivity calibration, noise samplers and privacy-budget splitting.

use ndarray::Array1;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossBounds;

/// An `(ε, δ)` budget. `ε = +∞` is accepted as the noise-free sentinel used by
/// baselines and audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Calibration(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Calibration(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(PrivacyBudget { epsilon, delta })
    }

    /// Pure ε-DP.
    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub fn non_private() -> Self {
        PrivacyBudget {
            epsilon: f64::INFINITY,
            delta: 0.0,
        }
    }

    pub fn is_noise_free(&self) -> bool {
        self.epsilon.is_infinite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSplit {
    pub eps_obj: f64,
    pub delta_obj: f64,
    pub eps_out: f64,
    pub delta_out: f64,
}

/// Splits a budget between objective and output noise. The output share is
/// computed by subtraction so the parts re-sum to the original.
pub fn split_budget(budget: &PrivacyBudget, frac_obj: f64) -> Result<BudgetSplit> {
    if !(frac_obj > 0.0 && frac_obj < 1.0) {
        return Err(Error::Calibration(format!(
            "objective fraction must lie in (0, 1), got {frac_obj}"
        )));
    }
    let eps_obj = frac_obj * budget.epsilon;
    let delta_obj = frac_obj * budget.delta;
    Ok(BudgetSplit {
        eps_obj,
        delta_obj,
        eps_out: budget.epsilon - eps_obj,
        delta_out: budget.delta - delta_obj,
    })
}

/// L2-sensitivity of one pass of permutation mini-batch SGD on a
/// γ-strongly convex, L-Lipschitz loss: `Δ₂ = 2L / (γ m)`.
///
/// The batch size only enters through validation; under the single-pass bound
/// the `b` factors cancel.
pub fn dppsgd_sensitivity(bounds: &mut LossBounds, m: usize, batch_size: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidDataset("sensitivity of an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Configuration("batch size must be positive".into()));
    }
    let delta2 = 2.0 * bounds.lipschitz / (bounds.strong_convexity * m as f64);
    bounds.sensitivity = delta2;
    Ok(delta2)
}

/// Draws from the density proportional to `exp(-(ε/Δ₂)‖z‖₂)` in `d` dimensions:
/// a uniform direction scaled by a `Gamma(d, Δ₂/ε)` radius.
pub fn sample_l2_laplace<R: Rng + ?Sized>(
    d: usize,
    delta2: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Array1<f64>> {
    if d == 0 {
        return Err(Error::Dimension {
            expected: 1,
            actual: 0,
        });
    }
    if epsilon.is_infinite() && epsilon > 0.0 {
        return Ok(Array1::zeros(d));
    }
    if !(delta2 > 0.0) || !(epsilon > 0.0) || !delta2.is_finite() {
        return Err(Error::Calibration(format!(
            "l2-laplace needs delta2 > 0 and epsilon > 0 (got {delta2}, {epsilon})"
        )));
    }
    let radius_dist = Gamma::new(d as f64, delta2 / epsilon)
        .map_err(|e| Error::Calibration(format!("gamma radius: {e}")))?;
    let direction = unit_direction(d, rng);
    let radius = radius_dist.sample(rng);
    Ok(direction * radius)
}

fn unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// Classic Gaussian-mechanism scale `(Δ/ε)·√(2 ln(1.25/δ))`, valid for `ε ≤ 1`.
pub fn gaussian_sigma(sensitivity: f64, epsilon: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Calibration(format!(
            "gaussian mechanism needs 0 < delta < 1, got {delta}"
        )));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Calibration(format!(
            "gaussian mechanism needs 0 < epsilon <= 1, got {epsilon}"
        )));
    }
    if !(sensitivity >= 0.0) || !sensitivity.is_finite() {
        return Err(Error::Calibration(format!("invalid sensitivity {sensitivity}")));
    }
    Ok(sensitivity / epsilon * (2.0 * (1.25 / delta).ln()).sqrt())
}

/// I.i.d. `N(0, σ²)` coordinates. A zero scale returns zeros without touching the generator.
pub fn sample_gaussian_vec<R: Rng + ?Sized>(d: usize, sigma: f64, rng: &mut R) -> Array1<f64> {
    if sigma == 0.0 {
        return Array1::zeros(d);
    }
    (0..d)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{derive_bounds, LossConfig};
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sensitivity_reference_points() {
        let mut b = derive_bounds(&LossConfig::with_inverse_radius(5.0, 0.001).unwrap());
        let s = dppsgd_sensitivity(&mut b, 10_000, 100).unwrap();
        assert_abs_diff_eq!(s, 1.2, epsilon = 1e-12);
        assert_eq!(b.sensitivity, s);

        let mut b = LossBounds {
            lipschitz: 1.0,
            smoothness: 1.0,
            strong_convexity: 1.0,
            sensitivity: 0.0,
        };
        assert_eq!(dppsgd_sensitivity(&mut b, 2, 1).unwrap(), 1.0);
        let s1 = dppsgd_sensitivity(&mut b, 1000, 16).unwrap();
        let s2 = dppsgd_sensitivity(&mut b, 2000, 16).unwrap();
        assert_eq!(s1, 2.0 * s2);
        assert!(matches!(dppsgd_sensitivity(&mut b, 0, 1), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn sensitivity_is_monotone() {
        let mut b = derive_bounds(&LossConfig::with_inverse_radius(5.0, 0.001).unwrap());
        let mut prev = f64::INFINITY;
        for m in [10, 100, 1000, 10_000] {
            let s = dppsgd_sensitivity(&mut b, m, 16).unwrap();
            assert!(s < prev);
            prev = s;
        }
        let mut big = derive_bounds(&LossConfig::with_inverse_radius(50.0, 0.001).unwrap());
        assert!(dppsgd_sensitivity(&mut big, 100, 16).unwrap() > dppsgd_sensitivity(&mut b, 100, 16).unwrap());
    }

    #[test]
    fn gaussian_sigma_reference_points() {
        let s = gaussian_sigma(1.0, 1.0, 1e-5).unwrap();
        assert_abs_diff_eq!(s, (2.0 * 125_000f64.ln()).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s, 4.8448, epsilon = 1e-4);
        assert_abs_diff_eq!(gaussian_sigma(2.0, 1.0, 1e-5).unwrap(), 2.0 * s, epsilon = 1e-12);
        assert!(gaussian_sigma(1.0, 1.0, 1.25).is_err());
        assert!(gaussian_sigma(1.0, 1.5, 1e-5).is_err());
        assert!(gaussian_sigma(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn budget_split_reference_points() {
        let split = split_budget(&PrivacyBudget::new(0.01, 1e-4).unwrap(), 0.99).unwrap();
        assert_abs_diff_eq!(split.eps_obj, 0.0099, epsilon = 1e-15);
        assert_abs_diff_eq!(split.eps_out, 0.0001, epsilon = 1e-15);
        assert_abs_diff_eq!(split.delta_obj, 9.9e-5, epsilon = 1e-18);
        assert_eq!(split.eps_obj + split.eps_out, 0.01);
        assert_eq!(split.delta_obj + split.delta_out, 1e-4);

        let m = 100.0f64;
        let delta = 1.0 / (m * m);
        assert_abs_diff_eq!(delta, 1e-4, epsilon = 1e-18);

        assert!(split_budget(&PrivacyBudget::new(1.0, 0.0).unwrap(), 1.0).is_err());
        assert!(split_budget(&PrivacyBudget::new(1.0, 0.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(0.0, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(1.0, -0.1).is_err());
        assert!(PrivacyBudget::non_private().is_noise_free());
    }

    #[test]
    fn samplers_are_reproducible() {
        let a = sample_l2_laplace(5, 1.0, 0.5, &mut rng_from_seed(3)).unwrap();
        let b = sample_l2_laplace(5, 1.0, 0.5, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
        let a = sample_gaussian_vec(5, 2.0, &mut rng_from_seed(3));
        let b = sample_gaussian_vec(5, 2.0, &mut rng_from_seed(3));
        assert_eq!(a, b);
        assert_eq!(sample_gaussian_vec(4, 0.0, &mut rng_from_seed(1)), Array1::<f64>::zeros(4));
    }

    #[test]
    fn l2_laplace_edge_cases() {
        let mut rng = rng_from_seed(0);
        assert!(matches!(sample_l2_laplace(0, 1.0, 1.0, &mut rng), Err(Error::Dimension { .. })));
        assert!(sample_l2_laplace(3, 0.0, 1.0, &mut rng).is_err());
        let z = sample_l2_laplace(3, 1.0, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(z, Array1::<f64>::zeros(3));
    }

    #[test]
    fn gaussian_variance_matches() {
        // 10⁵ draws of a 1-d vector; sample variance within 2% of σ².
        let mut rng = rng_from_seed(11);
        let sigma = 1.7;
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_gaussian_vec(1, sigma, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.02, "variance ratio {}", var / (sigma * sigma));
    }
}
