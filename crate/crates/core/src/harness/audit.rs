//! Monte Carlo check of the (ε, δ)-DP inequality on one pair of neighbouring datasets.
//!
//! The mechanism is run `trials` times on each dataset and its (1 to 3
//! dimensional) output is histogrammed over a binning fixed before the main
//! runs. Every bin must satisfy `P̂[bin|D] ≤ e^ε P̂[bin|D′] + δ + slack` in both
//! directions, where the slack is three binomial standard errors of the
//! left-hand side minus the scaled right-hand side.

use serde::{Deserialize, Serialize};

use crate::data::PartnerDataset;
use crate::error::{Error, Result};
use crate::rng::{child_rng, DpRng};

pub const MIN_AUDIT_TRIALS: usize = 10_000;
const SLACK_STANDARD_ERRORS: f64 = 3.0;

/// Axis-aligned histogram bins. Each dimension has sorted interior edges; a
/// value `v` falls in the bin after the last edge strictly below it, so values
/// beyond the outer edges land in open-ended overflow bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    edges: Vec<Vec<f64>>,
}

impl Binning {
    pub fn new(edges: Vec<Vec<f64>>) -> Result<Self> {
        if edges.is_empty() || edges.len() > 3 {
            return Err(Error::Configuration(format!(
                "audit outputs must have 1 to 3 dimensions, got {}",
                edges.len()
            )));
        }
        for e in &edges {
            if e.iter().any(|v| !v.is_finite()) || e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Configuration("bin edges must be finite and strictly increasing".into()));
            }
        }
        Ok(Binning { edges })
    }

    /// `n` equal-width bins on `[lo, hi]` plus the two overflow bins.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || n == 0 {
            return Err(Error::Configuration(format!("bad uniform binning [{lo}, {hi}] x {n}")));
        }
        let width = (hi - lo) / n as f64;
        Binning::new(vec![(0..=n).map(|i| lo + width * i as f64).collect()])
    }

    /// Quantile edges per dimension from pilot outputs that were drawn
    /// independently of the audited runs. Duplicate edges collapse.
    pub fn from_pilot(samples: &[Vec<f64>], bins_per_dim: usize) -> Result<Self> {
        let dims = samples.first().map(Vec::len).unwrap_or(0);
        if bins_per_dim < 2 || samples.iter().any(|s| s.len() != dims) {
            return Err(Error::Configuration("pilot samples must share one dimension and bins >= 2".into()));
        }
        let mut edges = Vec::with_capacity(dims);
        for j in 0..dims {
            let mut column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            column.sort_by(f64::total_cmp);
            let mut e: Vec<f64> = (1..bins_per_dim)
                .map(|q| {
                    let pos = q as f64 / bins_per_dim as f64 * (column.len() - 1) as f64;
                    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
                    column[lo] + (column[hi] - column[lo]) * (pos - lo as f64)
                })
                .collect();
            e.dedup();
            edges.push(e);
        }
        Binning::new(edges)
    }

    pub fn dims(&self) -> usize {
        self.edges.len()
    }

    pub fn n_bins(&self) -> usize {
        self.edges.iter().map(|e| e.len() + 1).product()
    }

    pub fn index(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dims() {
            return Err(Error::Dimension {
                expected: self.dims(),
                actual: point.len(),
            });
        }
        if point.iter().any(|v| v.is_nan()) {
            return Err(Error::Arithmetic("mechanism produced NaN".into()));
        }
        let mut idx = 0;
        for (e, &v) in self.edges.iter().zip(point) {
            idx = idx * (e.len() + 1) + e.partition_point(|&x| x < v);
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub passed: bool,
    /// Largest `|ln(P̂[bin|D] / P̂[bin|D′])|` over bins hit by both datasets;
    /// `None` when no bin was.
    pub max_log_ratio: Option<f64>,
    /// Largest violation of the inequality after slack (negative means room to spare).
    pub worst_excess: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    pub n_bins: usize,
}

/// Runs the audit. `mechanism` gets a dataset and a generator and returns the
/// reduced output; both datasets get their own child stream of `seed`.
pub fn empirical_dp_check<D, M>(
    mut mechanism: M,
    dataset: &D,
    neighbor: &D,
    epsilon: f64,
    delta: f64,
    trials: usize,
    binning: &Binning,
    seed: u64,
) -> Result<AuditOutcome>
where
    D: ?Sized,
    M: FnMut(&D, &mut DpRng) -> Result<Vec<f64>>,
{
    if trials < MIN_AUDIT_TRIALS {
        return Err(Error::Configuration(format!(
            "{trials} audit trials is too few for a meaningful slack (minimum {MIN_AUDIT_TRIALS})"
        )));
    }
    if !(epsilon >= 0.0) || !(0.0..1.0).contains(&delta) {
        return Err(Error::Configuration(format!("audit needs epsilon >= 0 and delta in [0, 1), got ({epsilon}, {delta})")));
    }
    let mut counts = [vec![0u64; binning.n_bins()], vec![0u64; binning.n_bins()]];
    for (side, data) in [dataset, neighbor].into_iter().enumerate() {
        let mut rng = child_rng(seed, if side == 0 { "D" } else { "D'" }, "audit", 0);
        for _ in 0..trials {
            let out = mechanism(data, &mut rng)?;
            counts[side][binning.index(&out)?] += 1;
        }
    }

    let n = trials as f64;
    let scale = epsilon.exp();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut max_log_ratio: Option<f64> = None;
    for (&ca, &cb) in counts[0].iter().zip(&counts[1]) {
        let (pa, pb) = (ca as f64 / n, cb as f64 / n);
        for (p, q) in [(pa, pb), (pb, pa)] {
            let se = (p * (1.0 - p) / n + scale * scale * q * (1.0 - q) / n).sqrt();
            let excess = p - scale * q - delta - SLACK_STANDARD_ERRORS * se;
            worst_excess = worst_excess.max(excess);
        }
        if ca > 0 && cb > 0 {
            let r = (pa / pb).ln().abs();
            max_log_ratio = Some(max_log_ratio.map_or(r, |m| m.max(r)));
        }
    }
    Ok(AuditOutcome {
        passed: worst_excess <= 0.0,
        max_log_ratio,
        worst_excess,
        epsilon,
        delta,
        trials,
        n_bins: binning.n_bins(),
    })
}

/// True when both datasets have the same size and differ in exactly one record.
pub fn differ_in_one_record(a: &PartnerDataset, b: &PartnerDataset) -> bool {
    if a.x.dim() != b.x.dim() || a.m() != b.m() {
        return false;
    }
    let differing = (0..a.m())
        .filter(|&i| a.y[i] != b.y[i] || a.x.row(i) != b.x.row(i))
        .count();
    differing == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn randomized_response(bit: &bool, eps: f64, rng: &mut DpRng) -> Result<Vec<f64>> {
        let flip = rng.random::<f64>() < 1.0 / (1.0 + eps.exp());
        Ok(vec![if *bit ^ flip { 1.0 } else { 0.0 }])
    }

    #[test]
    fn binning_indexing() {
        let b = Binning::new(vec![vec![0.0, 1.0], vec![0.5]]).unwrap();
        assert_eq!(b.n_bins(), 6);
        assert_eq!(b.index(&[-1.0, 0.0]).unwrap(), 0);
        assert_eq!(b.index(&[0.0, 0.0]).unwrap(), 0);
        assert_eq!(b.index(&[0.5, 0.6]).unwrap(), 3);
        assert_eq!(b.index(&[2.0, 0.6]).unwrap(), 5);
        assert!(b.index(&[0.0]).is_err());
        assert!(Binning::new(vec![vec![1.0, 0.0]]).is_err());
        assert!(Binning::new(vec![]).is_err());
    }

    #[test]
    fn randomized_response_at_exact_and_half_epsilon() {
        let bins = Binning::new(vec![vec![0.5]]).unwrap();
        let eps = 1.0;
        let mech = |b: &bool, rng: &mut DpRng| randomized_response(b, eps, rng);
        let at = empirical_dp_check(mech, &true, &false, eps, 0.0, 20_000, &bins, 3).unwrap();
        assert!(at.passed, "{at:?}");
        assert!((at.max_log_ratio.unwrap() - eps).abs() < 0.1);
        let half = empirical_dp_check(mech, &true, &false, eps / 2.0, 0.0, 20_000, &bins, 3).unwrap();
        assert!(!half.passed);
    }

    #[test]
    fn too_few_trials_is_a_configuration_error() {
        let bins = Binning::uniform(0.0, 1.0, 4).unwrap();
        let err = empirical_dp_check(|_: &u8, _: &mut DpRng| Ok(vec![0.0]), &0, &1, 1.0, 0.0, 9_999, &bins, 0).unwrap_err();
        assert_eq!(err.kind(), "configuration");
    }

    #[test]
    fn pilot_binning_separates_point_masses() {
        let samples: Vec<Vec<f64>> = (0..100).map(|i| vec![if i % 2 == 0 { 0.3 } else { 0.7 }]).collect();
        let b = Binning::from_pilot(&samples, 10).unwrap();
        assert_ne!(b.index(&[0.3]).unwrap(), b.index(&[0.7]).unwrap());
    }
}
