//! Approximate minima perturbation.
//!
//! The objective is perturbed with a Gaussian linear term, minimized only
//! until its gradient norm drops below `h`, and the approximate minimizer is
//! released with a second Gaussian vector whose scale grows linearly in `h`.

use std::collections::VecDeque;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::PartnerDataset;
use crate::error::{Error, Result};
use crate::loss::{gradient_over, l2_norm, loss, LossConfig, WeightVector};
use crate::model::{Algorithm, PrivateModel};
use crate::noise::{gaussian_sigma, sample_gaussian_vec, split_budget, BudgetSplit, PrivacyBudget};
use crate::rng::child_rng;

/// A smooth convex function that can be handed to [`minimize_perturbed`].
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, w: ArrayView1<'_, f64>) -> f64;
    fn gradient(&self, w: ArrayView1<'_, f64>) -> Array1<f64>;
}

/// Logistic loss (C = 1) with an l2 penalty plus the linear term `⟨b₁, w⟩`.
#[derive(Debug, Clone)]
pub struct PerturbedObjective<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: ArrayView1<'a, f64>,
    pub loss: LossConfig,
    pub linear: Array1<f64>,
}

impl Objective for PerturbedObjective<'_> {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, w: ArrayView1<'_, f64>) -> f64 {
        let wv = WeightVector::new(w.to_owned());
        loss(&wv, self.x, self.y, &self.loss).expect("shapes checked at construction") + self.linear.dot(&w)
    }

    fn gradient(&self, w: ArrayView1<'_, f64>) -> Array1<f64> {
        gradient_over(w, self.x, self.y, 0..self.x.nrows(), &self.loss) + &self.linear
    }
}

const LBFGS_MEMORY: usize = 10;
const ARMIJO_C: f64 = 1e-4;

/// Returns the first iterate whose gradient norm is at most `h`.
///
/// Iterates with L-BFGS directions and a backtracking Armijo line search,
/// falling back to steepest descent whenever the quasi-Newton direction is
/// not a descent direction. Near the optimum, where value differences sink
/// below rounding, a step is also accepted if it shrinks the gradient.
pub fn minimize_perturbed<O: Objective + ?Sized>(
    objective: &O,
    w0: Array1<f64>,
    h: f64,
    max_iterations: usize,
) -> Result<Array1<f64>> {
    if !(h > 0.0) {
        return Err(Error::Configuration(format!("threshold h must be positive, got {h}")));
    }
    if w0.len() != objective.dim() {
        return Err(Error::Dimension {
            expected: objective.dim(),
            actual: w0.len(),
        });
    }
    let mut w = w0;
    let mut g = objective.gradient(w.view());
    let mut g_norm = l2_norm(g.view());
    if g_norm <= h {
        return Ok(w);
    }
    let mut f = objective.value(w.view());
    let mut history: VecDeque<(Array1<f64>, Array1<f64>, f64)> = VecDeque::with_capacity(LBFGS_MEMORY);

    for _ in 0..max_iterations {
        let mut direction = two_loop(&g, &history);
        let mut slope = g.dot(&direction);
        if !(slope < 0.0) {
            history.clear();
            direction = -&g;
            slope = -g_norm * g_norm;
        }
        let mut alpha = if history.is_empty() { (1.0 / g_norm).min(1.0) } else { 1.0 };

        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &w + &(&direction * alpha);
            let f_new = objective.value(candidate.view());
            if f_new <= f + ARMIJO_C * alpha * slope {
                accepted = Some((candidate, f_new, None));
                break;
            }
            if (f_new - f).abs() <= 16.0 * f64::EPSILON * f.abs().max(1.0) {
                let g_new = objective.gradient(candidate.view());
                if l2_norm(g_new.view()) < g_norm {
                    accepted = Some((candidate, f_new, Some(g_new)));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((w_new, f_new, g_new)) = accepted else {
            break;
        };
        let g_new = g_new.unwrap_or_else(|| objective.gradient(w_new.view()));
        let s = &w_new - &w;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        w = w_new;
        g = g_new;
        f = f_new;
        g_norm = l2_norm(g.view());
        if g_norm <= h {
            return Ok(w);
        }
    }
    Err(Error::Convergence {
        iterations: max_iterations,
        last_gradient_norm: g_norm,
    })
}

fn two_loop(g: &Array1<f64>, history: &VecDeque<(Array1<f64>, Array1<f64>, f64)>) -> Array1<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * s.dot(&q);
        q.scaled_add(-a, y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.scaled_add(a - b, s);
    }
    -q
}

/// What the calibration step needs to know about a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationInput {
    pub m: usize,
    pub split: BudgetSplit,
    pub h: f64,
    pub lipschitz: f64,
}

/// Regularizer and noise scales for one run. `objective_sigma` is the
/// per-coordinate standard deviation of `b₁` as added to the averaged loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpCalibration {
    pub lambda: f64,
    pub objective_sigma: f64,
    pub output_sigma: f64,
}

/// Signature of a calibration rule; swap one in through [`AmpHyperparams::calibration`].
pub type CalibrationFn = fn(&CalibrationInput) -> Result<AmpCalibration>;

/// Per-example smoothness of the logistic loss with `C = 1` on unit-norm rows.
pub const PER_EXAMPLE_SMOOTHNESS: f64 = 1.0;

/// Default constants:
///
/// - `λ = 2β / (m ε_obj)`
/// - `σ₁ = L √(8 ln(2/δ_obj) + 4 ε_obj) / ε_obj`, applied as `b₁ ~ N(0, (σ₁/m)²)`
/// - `σ₂` from the Gaussian mechanism with sensitivity `2h/λ` at `(ε_out, δ_out)`
pub fn default_calibration(input: &CalibrationInput) -> Result<AmpCalibration> {
    let BudgetSplit {
        eps_obj,
        delta_obj,
        eps_out,
        delta_out,
    } = input.split;
    if input.m == 0 {
        return Err(Error::InvalidDataset("AMP on zero records".into()));
    }
    if !(delta_obj > 0.0) || !(delta_out > 0.0) {
        return Err(Error::Calibration("AMP requires delta > 0".into()));
    }
    if !(eps_obj > 0.0 && eps_obj.is_finite()) {
        return Err(Error::Calibration(format!("objective epsilon {eps_obj} must be finite and positive")));
    }
    let m = input.m as f64;
    let lambda = 2.0 * PER_EXAMPLE_SMOOTHNESS / (m * eps_obj);
    let sigma1 = input.lipschitz * (8.0 * (2.0 / delta_obj).ln() + 4.0 * eps_obj).sqrt() / eps_obj;
    let output_sigma = gaussian_sigma(2.0 * input.h / lambda, eps_out, delta_out)?;
    Ok(AmpCalibration {
        lambda,
        objective_sigma: sigma1 / m,
        output_sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseMode {
    Enabled,
    /// Both noise vectors are zero; calibration still runs. For audits and tests.
    Disabled,
}

#[derive(Debug, Clone, Copy)]
pub struct AmpHyperparams {
    pub budget: PrivacyBudget,
    pub frac_obj: f64,
    pub h: f64,
    pub lipschitz: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub noise: NoiseMode,
    pub calibration: CalibrationFn,
}

impl AmpHyperparams {
    /// `h = δ = 1/m²`, 99% of the budget on the objective, `L = 1`.
    pub fn defaults(m: usize, epsilon: f64, seed: u64) -> Result<Self> {
        let inv_sq = 1.0 / (m as f64 * m as f64);
        Ok(AmpHyperparams {
            budget: PrivacyBudget::new(epsilon, inv_sq)?,
            frac_obj: 0.99,
            h: inv_sq,
            lipschitz: 1.0,
            seed,
            max_iterations: 10_000,
            noise: NoiseMode::Enabled,
            calibration: default_calibration,
        })
    }

    pub fn calibrate(&self, m: usize) -> Result<AmpCalibration> {
        if self.budget.delta == 0.0 {
            return Err(Error::Calibration("AMP requires delta > 0".into()));
        }
        let split = split_budget(&self.budget, self.frac_obj)?;
        (self.calibration)(&CalibrationInput {
            m,
            split,
            h: self.h,
            lipschitz: self.lipschitz,
        })
    }
}

/// Everything a run produced, kept apart so the release can be re-derived.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpFit {
    pub model: PrivateModel,
    pub approx_minimizer: Array1<f64>,
    pub objective_noise: Array1<f64>,
    pub output_noise: Array1<f64>,
    pub calibration: AmpCalibration,
    pub loss: LossConfig,
}

impl AmpFit {
    /// Recomputes the perturbed gradient norm at the stored minimizer.
    pub fn certificate(&self, data: &PartnerDataset) -> f64 {
        let objective = PerturbedObjective {
            x: data.x.view(),
            y: data.y.view(),
            loss: self.loss,
            linear: self.objective_noise.clone(),
        };
        l2_norm(objective.gradient(self.approx_minimizer.view()).view())
    }
}

pub fn fit_amp(data: &PartnerDataset, hp: &AmpHyperparams) -> Result<AmpFit> {
    if data.m() == 0 {
        return Err(Error::InvalidDataset(format!("partner {} has no records", data.partner_id)));
    }
    data.check_unit_rows()?;
    let calibration = hp.calibrate(data.m())?;
    let d = data.x.ncols();
    let (b1, b2) = match hp.noise {
        NoiseMode::Enabled => {
            let mut rng = child_rng(hp.seed, &data.partner_id, "amp-objective-noise", 0);
            let b1 = sample_gaussian_vec(d, calibration.objective_sigma, &mut rng);
            let mut rng = child_rng(hp.seed, &data.partner_id, "amp-output-noise", 0);
            let b2 = sample_gaussian_vec(d, calibration.output_sigma, &mut rng);
            (b1, b2)
        }
        NoiseMode::Disabled => (Array1::zeros(d), Array1::zeros(d)),
    };
    let loss_cfg = LossConfig {
        c: 1.0,
        lambda: calibration.lambda,
        radius: f64::INFINITY,
    };
    let objective = PerturbedObjective {
        x: data.x.view(),
        y: data.y.view(),
        loss: loss_cfg,
        linear: b1.clone(),
    };
    let w_approx = minimize_perturbed(&objective, Array1::zeros(d), hp.h, hp.max_iterations)?;
    let released = &w_approx + &b2;
    let budget = match hp.noise {
        NoiseMode::Enabled => hp.budget,
        NoiseMode::Disabled => PrivacyBudget::non_private(),
    };
    let algorithm = match hp.noise {
        NoiseMode::Enabled => Algorithm::Amp,
        NoiseMode::Disabled => Algorithm::NonPrivate,
    };
    Ok(AmpFit {
        model: PrivateModel {
            weights: WeightVector::new(released),
            algorithm,
            budget,
            partner_id: data.partner_id.clone(),
            seed: hp.seed,
            degenerate_labels: !data.has_both_classes(),
        },
        approx_minimizer: w_approx,
        objective_noise: b1,
        output_noise: b2,
        calibration,
        loss: loss_cfg,
    })
}

/// Trains and releases an AMP model. Deterministic in `hp.seed`.
pub fn train_amp(data: &PartnerDataset, hp: &AmpHyperparams) -> Result<PrivateModel> {
    fit_amp(data, hp).map(|fit| fit.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Period;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::Rng;

    struct Quadratic {
        center: Array1<f64>,
        curvature: Array1<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn value(&self, w: ArrayView1<'_, f64>) -> f64 {
            let diff = &w - &self.center;
            0.5 * (&self.curvature * &diff).dot(&diff)
        }
        fn gradient(&self, w: ArrayView1<'_, f64>) -> Array1<f64> {
            &self.curvature * &(&w - &self.center)
        }
    }

    fn toy(m: usize, seed: u64) -> PartnerDataset {
        let mut rng = rng_from_seed(seed);
        let x = Array2::from_shape_fn((m, 3), |(_, j)| if j == 2 { 0.5 } else { rng.random_range(-0.6..0.6) });
        let y = Array1::from_shape_fn(m, |i| {
            let p = crate::loss::sigmoid(4.0 * x[[i, 0]] - 2.0 * x[[i, 1]]);
            if rng.random::<f64>() < p { 1.0 } else { 0.0 }
        });
        PartnerDataset::new("toy", Period::ColdStart, x, y, 2).unwrap()
    }

    #[test]
    fn isotropic_quadratic_is_solved() {
        let q = Quadratic {
            center: array![1.0, -2.0, 0.5],
            curvature: Array1::ones(3),
        };
        let w = minimize_perturbed(&q, Array1::zeros(3), 1e-6, 100).unwrap();
        assert!(l2_norm((&w - &q.center).view()) <= 1e-6);
    }

    #[test]
    fn certified_start_returns_immediately() {
        let q = Quadratic {
            center: array![0.1],
            curvature: array![1.0],
        };
        let w0 = array![0.0];
        let w = minimize_perturbed(&q, w0.clone(), 0.2, 0).unwrap();
        assert_eq!(w, w0);
    }

    #[test]
    fn distance_bound_from_strong_convexity() {
        let q = Quadratic {
            center: array![3.0, -1.0, 2.0, 0.0],
            curvature: array![0.5, 2.0, 8.0, 1.0],
        };
        let h = 1e-5;
        let w = minimize_perturbed(&q, Array1::zeros(4), h, 500).unwrap();
        assert!(l2_norm(q.gradient(w.view()).view()) <= h);
        assert!(l2_norm((&w - &q.center).view()) <= h / 0.5);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let q = Quadratic {
            center: array![100.0, -50.0],
            curvature: array![1e-3, 1.0],
        };
        match minimize_perturbed(&q, Array1::zeros(2), 1e-12, 1) {
            Err(Error::Convergence { last_gradient_norm, .. }) => assert!(last_gradient_norm > 1e-12),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn table_split_and_calibration() {
        let hp = AmpHyperparams::defaults(100, 0.01, 0).unwrap();
        let split = split_budget(&hp.budget, hp.frac_obj).unwrap();
        assert_abs_diff_eq!(split.eps_obj, 0.0099, epsilon = 1e-15);
        assert_abs_diff_eq!(split.eps_out, 0.0001, epsilon = 1e-15);
        assert_abs_diff_eq!(hp.h, 1e-4, epsilon = 1e-18);
        let cal = hp.calibrate(100).unwrap();
        assert_abs_diff_eq!(cal.lambda, 2.0 / (100.0 * 0.0099), epsilon = 1e-12);
    }

    #[test]
    fn output_sigma_is_linear_in_h() {
        let mut hp = AmpHyperparams::defaults(500, 0.5, 0).unwrap();
        let a = hp.calibrate(500).unwrap().output_sigma;
        hp.h *= 2.0;
        let b = hp.calibrate(500).unwrap().output_sigma;
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-15 * b);
    }

    #[test]
    fn zero_delta_is_rejected() {
        let data = toy(50, 1);
        let mut hp = AmpHyperparams::defaults(50, 0.5, 0).unwrap();
        hp.budget.delta = 0.0;
        assert!(matches!(train_amp(&data, &hp), Err(Error::Calibration(_))));
    }

    #[test]
    fn release_is_minimizer_plus_output_noise() {
        let data = toy(200, 2);
        let hp = AmpHyperparams::defaults(200, 0.5, 17).unwrap();
        let fit = fit_amp(&data, &hp).unwrap();
        assert!(fit.certificate(&data) <= hp.h);
        let rebuilt = &fit.approx_minimizer + &fit.output_noise;
        assert_eq!(rebuilt, *fit.model.weights.as_array());
        assert_eq!(fit_amp(&data, &hp).unwrap(), fit);
        assert_eq!(fit.model.algorithm, Algorithm::Amp);
    }

    #[test]
    fn disabled_noise_certifies_the_clean_objective() {
        let data = toy(200, 3);
        let hp = AmpHyperparams {
            noise: NoiseMode::Disabled,
            ..AmpHyperparams::defaults(200, 0.5, 5).unwrap()
        };
        let fit = fit_amp(&data, &hp).unwrap();
        assert_eq!(fit.objective_noise, Array1::<f64>::zeros(3));
        assert_eq!(fit.approx_minimizer, *fit.model.weights.as_array());
        let g = crate::loss::loss_gradient(&fit.model.weights, data.x.view(), data.y.view(), &fit.loss).unwrap();
        assert!(l2_norm(g.view()) <= hp.h);
    }

    #[test]
    fn calibration_hook_is_used() {
        fn fixed(_: &CalibrationInput) -> Result<AmpCalibration> {
            Ok(AmpCalibration {
                lambda: 0.5,
                objective_sigma: 0.0,
                output_sigma: 0.0,
            })
        }
        let data = toy(100, 4);
        let hp = AmpHyperparams {
            calibration: fixed,
            ..AmpHyperparams::defaults(100, 0.5, 1).unwrap()
        };
        let fit = fit_amp(&data, &hp).unwrap();
        assert_eq!(fit.loss.lambda, 0.5);
        assert_eq!(fit.output_noise, Array1::<f64>::zeros(3));
    }
}
