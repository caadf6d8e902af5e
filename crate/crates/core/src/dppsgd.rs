//! Strongly convex permutation-based mini-batch SGD with output perturbation.
//!
//! Training runs projected SGD over random permutations of the records,
//! rescales the final iterate onto the sphere of radius R and releases it plus
//! L2-Laplace noise calibrated to the single-pass sensitivity `2L / (γ m)`.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{train_test_split, PartnerDataset};
use crate::error::{Error, Result};
use crate::evaluation::auc;
use crate::loss::{derive_bounds, gradient_over, project_to_ball, LossBounds, LossConfig, WeightVector};
use crate::model::{Algorithm, PrivateModel};
use crate::noise::{dppsgd_sensitivity, sample_l2_laplace, PrivacyBudget};
use crate::rng::{child_rng, DpRng};

pub const DEFAULT_LAMBDA: f64 = 0.001;
pub const C_GRID: [f64; 5] = [5.0, 10.0, 50.0, 100.0, 500.0];

/// `max(16, ⌊m/100⌋)`.
pub fn default_batch_size(m: usize) -> usize {
    (m / 100).max(16)
}

/// What happens to the last SGD iterate before noise is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStep {
    /// Rescale to norm R, so the released direction dominates the noise.
    #[default]
    ScaleToRadius,
    /// Project onto the R-ball, which leaves interior iterates untouched.
    Project,
}

impl FinalStep {
    pub fn apply(self, w: WeightVector, radius: f64) -> WeightVector {
        match self {
            FinalStep::Project => project_to_ball(w, radius),
            FinalStep::ScaleToRadius => {
                let norm = w.norm();
                if norm == 0.0 {
                    return w;
                }
                project_to_ball(WeightVector::new(w.into_inner() * (radius / norm)), radius)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DppsgdHyperparams {
    pub loss: LossConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub budget: PrivacyBudget,
    pub seed: u64,
    #[serde(default)]
    pub final_step: FinalStep,
}

impl DppsgdHyperparams {
    /// λ = 0.001, R = 1/λ, default batch size for `m` records, one epoch, δ = 0.
    pub fn defaults(m: usize, c: f64, epsilon: f64, seed: u64) -> Result<Self> {
        Ok(DppsgdHyperparams {
            loss: LossConfig::with_inverse_radius(c, DEFAULT_LAMBDA)?,
            batch_size: default_batch_size(m),
            epochs: 1,
            budget: PrivacyBudget::pure(epsilon)?,
            seed,
            final_step: FinalStep::default(),
        })
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        self.loss = LossConfig::new(c, self.loss.lambda, self.loss.radius)?;
        Ok(self)
    }

    /// Same settings with the batch size recomputed for `m` records.
    pub fn for_size(mut self, m: usize) -> Self {
        self.batch_size = default_batch_size(m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Configuration("batch size and epochs must be positive".into()));
        }
        if self.budget.delta != 0.0 {
            return Err(Error::Calibration("DPPSGD is pure ε-DP; delta must be 0".into()));
        }
        if !(self.budget.epsilon > 0.0) {
            return Err(Error::Calibration("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// `η_t = min(1/β, 1/(γ t))` for the 1-based global update index `t`.
pub fn learning_rate(bounds: &LossBounds, t: u64) -> f64 {
    (1.0 / bounds.smoothness).min(1.0 / (bounds.strong_convexity * t as f64))
}

/// One pass over a fresh random permutation of the records, in consecutive
/// mini-batches of `hp.batch_size` (the last one may be short). `step` is the
/// global update counter and keeps counting across epochs.
pub fn psgd_epoch<R: Rng + ?Sized>(
    w: WeightVector,
    data: &PartnerDataset,
    hp: &DppsgdHyperparams,
    bounds: &LossBounds,
    step: &mut u64,
    rng: &mut R,
) -> Result<WeightVector> {
    if w.len() != data.x.ncols() {
        return Err(Error::Dimension {
            expected: data.x.ncols(),
            actual: w.len(),
        });
    }
    data.check_unit_rows()?;
    let mut order: Vec<usize> = (0..data.m()).collect();
    order.shuffle(rng);

    let mut w = w;
    for batch in order.chunks(hp.batch_size.max(1)) {
        *step += 1;
        let grad = gradient_over(w.view(), data.x.view(), data.y.view(), batch.iter().copied(), &hp.loss);
        let eta = learning_rate(bounds, *step);
        let mut next = w.into_inner();
        next.scaled_add(-eta, &grad);
        w = project_to_ball(WeightVector::new(next), hp.loss.radius);
    }
    Ok(w)
}

/// A trained model before any noise is added.
#[derive(Debug, Clone, PartialEq)]
pub struct DppsgdFit {
    /// Last projected SGD iterate.
    pub iterate: WeightVector,
    /// `iterate` after the final step; the noise is added to this.
    pub weights: WeightVector,
    pub bounds: LossBounds,
    pub partner_id: String,
    pub m: usize,
    pub hp: DppsgdHyperparams,
    pub degenerate_labels: bool,
}

impl DppsgdFit {
    pub fn sensitivity(&self) -> f64 {
        self.bounds.sensitivity
    }

    /// Adds L2-Laplace noise for `budget.epsilon` (none when it is infinite).
    pub fn release<R: Rng + ?Sized>(&self, budget: PrivacyBudget, seed: u64, rng: &mut R) -> Result<PrivateModel> {
        let noise = sample_l2_laplace(self.weights.len(), self.sensitivity(), budget.epsilon, rng)?;
        let algorithm = if budget.is_noise_free() {
            Algorithm::NonPrivate
        } else {
            Algorithm::Dppsgd
        };
        Ok(PrivateModel {
            weights: WeightVector::new(self.weights.as_array() + &noise),
            algorithm,
            budget,
            partner_id: self.partner_id.clone(),
            seed,
            degenerate_labels: self.degenerate_labels,
        })
    }
}

/// Runs `hp.epochs` passes from zero and applies `hp.final_step`.
pub fn fit_dppsgd(data: &PartnerDataset, hp: &DppsgdHyperparams) -> Result<DppsgdFit> {
    hp.validate()?;
    if data.m() == 0 {
        return Err(Error::InvalidDataset(format!("partner {} has no records", data.partner_id)));
    }
    let mut bounds = derive_bounds(&hp.loss);
    let mut rng: DpRng = child_rng(hp.seed, &data.partner_id, "dppsgd-permutation", 0);
    let mut w = WeightVector::zeros(data.x.ncols());
    let mut step = 0u64;
    for _ in 0..hp.epochs {
        w = psgd_epoch(w, data, hp, &bounds, &mut step, &mut rng)?;
    }
    let iterate = project_to_ball(w, hp.loss.radius);
    let weights = hp.final_step.apply(iterate.clone(), hp.loss.radius);
    dppsgd_sensitivity(&mut bounds, data.m(), hp.batch_size)?;
    Ok(DppsgdFit {
        iterate,
        weights,
        bounds,
        partner_id: data.partner_id.clone(),
        m: data.m(),
        hp: *hp,
        degenerate_labels: !data.has_both_classes(),
    })
}

/// Trains and releases a DPPSGD model. Deterministic in `hp.seed`.
pub fn train_dppsgd(data: &PartnerDataset, hp: &DppsgdHyperparams) -> Result<PrivateModel> {
    let fit = fit_dppsgd(data, hp)?;
    let mut rng = child_rng(hp.seed, &data.partner_id, "dppsgd-output-noise", 0);
    fit.release(hp.budget, hp.seed, &mut rng)
}

/// Noise-free fit of the same procedure, used for baselines and tuning.
pub fn train_non_private(data: &PartnerDataset, hp: &DppsgdHyperparams) -> Result<PrivateModel> {
    let hp = DppsgdHyperparams {
        budget: PrivacyBudget::non_private(),
        ..*hp
    };
    train_dppsgd(data, &hp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub validation_fraction: f64,
    /// Validation AUCs closer than this to the best count as tied.
    pub auc_tie_tolerance: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            validation_fraction: 0.2,
            auc_tie_tolerance: 1e-3,
        }
    }
}

/// Picks `C` on the target partner's own (public) data with default options.
pub fn tune_c(public_data: &PartnerDataset, grid: &[f64], template: &DppsgdHyperparams) -> Result<f64> {
    tune_c_with(public_data, grid, template, &TuneOptions::default())
}

/// Trains a non-private model per grid value on a train split and returns the
/// value with the best validation AUC; near-ties go to the smallest `C`.
pub fn tune_c_with(
    public_data: &PartnerDataset,
    grid: &[f64],
    template: &DppsgdHyperparams,
    options: &TuneOptions,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Configuration("empty C grid".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() == 1 {
        return Ok(sorted[0]);
    }
    let split_seed = crate::rng::child_seed(template.seed, &public_data.partner_id, "tune-split", 0);
    let split = train_test_split(public_data, options.validation_fraction, split_seed)?;
    let hp = template.for_size(split.train.m());

    let mut scores = Vec::with_capacity(sorted.len());
    for &c in &sorted {
        let model = train_non_private(&split.train, &hp.with_c(c)?)?;
        let margins = model.margins(split.test.x.view())?;
        let score = auc(margins.as_slice().expect("contiguous"), split.test.y.as_slice().expect("contiguous"))?;
        scores.push(score);
    }
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pick = sorted
        .iter()
        .zip(&scores)
        .find(|(_, &s)| s >= best - options.auc_tie_tolerance)
        .map(|(&c, _)| c)
        .expect("grid is non-empty");
    Ok(pick)
}

/// Convenience for the noise vector that a fit would receive.
pub fn output_noise(fit: &DppsgdFit, epsilon: f64, rng: &mut DpRng) -> Result<Array1<f64>> {
    sample_l2_laplace(fit.weights.len(), fit.sensitivity(), epsilon, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Period;
    use crate::loss::loss;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    fn toy(m: usize, seed: u64) -> PartnerDataset {
        let mut rng = rng_from_seed(seed);
        let x = Array2::from_shape_fn((m, 3), |(_, j)| {
            if j == 2 {
                0.5
            } else {
                rng.random_range(-0.6..0.6)
            }
        });
        let y = Array1::from_shape_fn(m, |i| if x[[i, 0]] + 0.3 * x[[i, 1]] > 0.0 { 1.0 } else { 0.0 });
        PartnerDataset::new("toy", Period::RampedUp, x, y, 2).unwrap()
    }

    #[test]
    fn schedule_switches_after_one_over_beta() {
        let b = derive_bounds(&LossConfig::with_inverse_radius(5.0, 0.001).unwrap());
        assert_eq!(learning_rate(&b, 1), 1.0 / 5.001);
        assert_eq!(learning_rate(&b, 5001), 1.0 / 5.001);
        assert_abs_diff_eq!(learning_rate(&b, 5002), 1.0 / (0.001 * 5002.0), epsilon = 1e-15);
        assert!(learning_rate(&b, 10_000) < 1.0 / 5.001);
    }

    #[test]
    fn batch_size_default() {
        assert_eq!(default_batch_size(100), 16);
        assert_eq!(default_batch_size(1600), 16);
        assert_eq!(default_batch_size(10_000), 100);
        assert_eq!(default_batch_size(12_345), 123);
    }

    #[test]
    fn full_batch_epoch_is_one_gradient_step() {
        let data = toy(40, 1);
        let mut hp = DppsgdHyperparams::defaults(40, 5.0, 1.0, 0).unwrap();
        hp.batch_size = 100;
        let bounds = derive_bounds(&hp.loss);
        let mut step = 0;
        let w = psgd_epoch(WeightVector::zeros(3), &data, &hp, &bounds, &mut step, &mut rng_from_seed(2)).unwrap();
        assert_eq!(step, 1);
        let g = crate::loss::loss_gradient(&WeightVector::zeros(3), data.x.view(), data.y.view(), &hp.loss).unwrap();
        let expected = g * (-1.0 / 5.001);
        for (a, b) in w.view().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn step_counter_spans_epochs() {
        let data = toy(100, 3);
        let hp = DppsgdHyperparams::defaults(100, 5.0, 1.0, 0).unwrap();
        let bounds = derive_bounds(&hp.loss);
        let mut step = 0;
        let mut rng = rng_from_seed(4);
        let w = psgd_epoch(WeightVector::zeros(3), &data, &hp, &bounds, &mut step, &mut rng).unwrap();
        assert_eq!(step, 7); // ceil(100 / 16)
        psgd_epoch(w, &data, &hp, &bounds, &mut step, &mut rng).unwrap();
        assert_eq!(step, 14);
    }

    #[test]
    fn unnormalized_rows_are_rejected() {
        let x = array![[0.9, 0.9, 0.1]];
        let data = PartnerDataset::new("p", Period::ColdStart, x, array![1.0], 2).unwrap();
        let hp = DppsgdHyperparams::defaults(1, 5.0, 1.0, 0).unwrap();
        assert!(matches!(fit_dppsgd(&data, &hp), Err(Error::Precondition(_))));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let data = PartnerDataset::new("p", Period::ColdStart, Array2::zeros((0, 3)), Array1::zeros(0), 2).unwrap();
        let hp = DppsgdHyperparams::defaults(1, 5.0, 1.0, 0).unwrap();
        assert!(matches!(train_dppsgd(&data, &hp), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn single_class_trains_with_flag() {
        let mut data = toy(50, 5);
        data.y.fill(1.0);
        let model = train_dppsgd(&data, &DppsgdHyperparams::defaults(50, 5.0, 1.0, 0).unwrap()).unwrap();
        assert!(model.degenerate_labels);
        assert!(model.weights.is_finite());
    }

    #[test]
    fn noise_free_release_is_the_projected_solution() {
        let data = toy(200, 6);
        let hp = DppsgdHyperparams {
            budget: PrivacyBudget::non_private(),
            ..DppsgdHyperparams::defaults(200, 5.0, 1.0, 9).unwrap()
        };
        let fit = fit_dppsgd(&data, &hp).unwrap();
        let model = train_dppsgd(&data, &hp).unwrap();
        assert_eq!(model.weights, fit.weights);
        assert_eq!(model.algorithm, Algorithm::NonPrivate);
        assert!(fit.weights.norm() <= hp.loss.radius);
        assert!(fit.weights.norm() > hp.loss.radius * (1.0 - 1e-12));
        let ratio = fit.iterate.as_array() / fit.weights.as_array();
        assert!(ratio.iter().all(|r| (r - ratio[0]).abs() < 1e-12));
    }

    #[test]
    fn project_step_keeps_interior_iterate() {
        let data = toy(200, 6);
        let hp = DppsgdHyperparams {
            budget: PrivacyBudget::non_private(),
            final_step: FinalStep::Project,
            ..DppsgdHyperparams::defaults(200, 5.0, 1.0, 9).unwrap()
        };
        let fit = fit_dppsgd(&data, &hp).unwrap();
        assert!(fit.iterate.norm() < hp.loss.radius);
        assert_eq!(fit.weights, fit.iterate);
        let zero = WeightVector::zeros(3);
        assert_eq!(FinalStep::ScaleToRadius.apply(zero.clone(), 5.0), zero);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy(300, 7);
        let hp = DppsgdHyperparams::defaults(300, 10.0, 0.5, 42).unwrap();
        assert_eq!(train_dppsgd(&data, &hp).unwrap(), train_dppsgd(&data, &hp).unwrap());
        let other = DppsgdHyperparams { seed: 43, ..hp };
        assert_ne!(train_dppsgd(&data, &hp).unwrap(), train_dppsgd(&data, &other).unwrap());
    }

    #[test]
    fn release_minus_noise_lies_in_ball() {
        let data = toy(300, 8);
        let mut hp = DppsgdHyperparams::defaults(300, 5.0, 1.0, 1).unwrap();
        hp.loss = LossConfig::new(5.0, 0.001, 0.5).unwrap();
        let fit = fit_dppsgd(&data, &hp).unwrap();
        for draw in 0..20 {
            let mut rng = child_rng(1, "toy", "draw", draw);
            let noise = output_noise(&fit, 1.0, &mut rng).unwrap();
            let mut rng = child_rng(1, "toy", "draw", draw);
            let model = fit.release(hp.budget, draw, &mut rng).unwrap();
            let clean = model.weights.as_array() - &noise;
            assert!(clean.dot(&clean).sqrt() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn more_epochs_reduce_loss() {
        let data = toy(400, 10);
        let one = DppsgdHyperparams {
            budget: PrivacyBudget::non_private(),
            ..DppsgdHyperparams::defaults(400, 5.0, 1.0, 2).unwrap()
        };
        let many = DppsgdHyperparams { epochs: 30, ..one };
        let l = |hp: &DppsgdHyperparams| {
            let w = fit_dppsgd(&data, hp).unwrap().iterate;
            loss(&w, data.x.view(), data.y.view(), &hp.loss).unwrap()
        };
        assert!(l(&many) < l(&one));
    }

    #[test]
    fn tune_c_contract() {
        let data = toy(500, 11);
        let hp = DppsgdHyperparams::defaults(500, 5.0, 1.0, 3).unwrap();
        assert_eq!(tune_c(&data, &[5.0], &hp).unwrap(), 5.0);
        assert!(matches!(tune_c(&data, &[], &hp), Err(Error::Configuration(_))));
        let a = tune_c(&data, &C_GRID, &hp).unwrap();
        assert!(C_GRID.contains(&a));
        let mut reversed = C_GRID;
        reversed.reverse();
        assert_eq!(tune_c(&data, &reversed, &hp).unwrap(), a);
    }
}
