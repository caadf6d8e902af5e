//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use silo_dp::data::{PartnerDataset, Period};
use silo_dp::loss::{loss, LossConfig, WeightVector};
use statrs::distribution::{ContinuousCDF, Gamma};

/// Central finite-difference gradient of the regularized loss.
pub fn finite_difference_gradient(w: &Array1<f64>, x: &Array2<f64>, y: &Array1<f64>, cfg: &LossConfig, h: f64) -> Array1<f64> {
    let mut g = Array1::zeros(w.len());
    for j in 0..w.len() {
        let mut plus = w.clone();
        let mut minus = w.clone();
        plus[j] += h;
        minus[j] -= h;
        let lp = loss(&WeightVector::new(plus), x.view(), y.view(), cfg).unwrap();
        let lm = loss(&WeightVector::new(minus), x.view(), y.view(), cfg).unwrap();
        g[j] = (lp - lm) / (2.0 * h);
    }
    g
}

/// AUC by counting concordant pairs, ties counted as one half. Returned as
/// the exact fraction `(2·wins + ties) / (2·pairs)` evaluated once.
pub fn brute_force_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let mut doubled: u64 = 0;
    let mut pairs: u64 = 0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1.0 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0.0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                doubled += 2;
            } else if si == sj {
                doubled += 1;
            }
        }
    }
    doubled as f64 / (2 * pairs) as f64
}

/// Rows drawn uniformly inside the unit ball with a bias-like last column.
pub fn unit_ball_rows<R: Rng>(m: usize, d: usize, rng: &mut R) -> Array2<f64> {
    let mut x = Array2::zeros((m, d));
    for mut row in x.rows_mut() {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let r: f64 = rng.random::<f64>().powf(1.0 / d as f64);
        for (dst, src) in row.iter_mut().zip(&v) {
            *dst = src / n * r;
        }
    }
    x
}

pub fn random_labels<R: Rng>(m: usize, rng: &mut R) -> Array1<f64> {
    (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect()
}

/// Uniform point in the ball of radius `r` in `d` dimensions.
pub fn point_in_ball<R: Rng>(d: usize, r: f64, rng: &mut R) -> Array1<f64> {
    let v: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = v.dot(&v).sqrt();
    let radius = r * rng.random::<f64>().powf(1.0 / d as f64);
    v * (radius / n)
}

/// Plain full-batch gradient descent on the loss with step 1/β and many iterations.
pub fn full_batch_oracle(x: &Array2<f64>, y: &Array1<f64>, cfg: &LossConfig, iterations: usize) -> f64 {
    let beta = cfg.c + cfg.lambda;
    let mut w = Array1::<f64>::zeros(x.ncols());
    let m = x.nrows() as f64;
    for _ in 0..iterations {
        let margins = x.dot(&w);
        let residual = margins.mapv(|z| 1.0 / (1.0 + (-z).exp())) - y;
        let grad = x.t().dot(&residual) * (cfg.c / m) + &w * cfg.lambda;
        w = w - grad / beta;
    }
    loss(&WeightVector::new(w), x.view(), y.view(), cfg).unwrap()
}

/// Kolmogorov-Smirnov distance between a sample and Gamma(shape, scale).
pub fn ks_distance_to_gamma(sample: &mut [f64], shape: f64, scale: f64) -> f64 {
    let dist = Gamma::new(shape, 1.0 / scale).unwrap();
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = dist.cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Linearly separable 2-D toy set (already inside the unit ball, bias last).
pub fn separable_toy(m: usize, seed: u64) -> PartnerDataset {
    let mut rng = silo_dp::rng::rng_from_seed(seed);
    let mut x = Array2::zeros((m, 2));
    let mut y = Array1::zeros(m);
    for i in 0..m {
        let label = i % 2;
        let u: f64 = rng.random_range(0.1..0.6);
        x[[i, 0]] = if label == 1 { u } else { -u };
        x[[i, 1]] = 0.5;
        y[i] = label as f64;
    }
    PartnerDataset::new("toy", Period::ColdStart, x, y, 1).unwrap()
}
