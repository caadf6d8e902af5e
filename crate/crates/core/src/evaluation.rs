//! AUC, relative lift and cross-partner summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mann–Whitney AUC with half credit for ties, via rank sums in `O(m log m)`.
///
/// Ranks are kept doubled in integers so the result is the exact rational
/// `(correct pairs + ½ ties) / pairs`, rounded once.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Positions start..end share the average rank (start + 1 + end) / 2.
        let doubled_rank = (start + 1 + end) as u128;
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1.0).count() as u128;
        doubled_rank_sum += doubled_rank * positives;
        start = end;
    }
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// Signed percentage change of `value` over `baseline`.
pub fn relative_lift(value: f64, baseline: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::Arithmetic(format!("lift against non-positive baseline {baseline}")));
    }
    Ok(100.0 * (value - baseline) / baseline)
}

/// Five-number summary with linear interpolation between closest ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub const QUARTILE_METHOD: &str = "linear";

fn interpolate(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn quartiles(values: &[f64]) -> Result<Quartiles> {
    if values.is_empty() {
        return Err(Error::Configuration("quartiles of an empty set".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Quartiles {
        min: sorted[0],
        q1: interpolate(&sorted, 0.25),
        median: interpolate(&sorted, 0.5),
        q3: interpolate(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mu = mean(values);
    (values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn sample_variance(values: &[f64]) -> f64 {
    std_dev(values).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerStats {
    pub auc_mean: f64,
    pub auc_std: f64,
    pub n_splits: usize,
    pub n_noise_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_partner: BTreeMap<String, PartnerStats>,
    pub lifts: BTreeMap<String, f64>,
    pub summary: Quartiles,
    pub quartile_method: String,
}

impl EvalReport {
    /// Mean of the per-partner AUC means.
    pub fn mean_auc(&self) -> f64 {
        let means: Vec<f64> = self.per_partner.values().map(|s| s.auc_mean).collect();
        mean(&means)
    }
}

/// Builds a report from each partner's AUC samples (one per split × noise draw).
pub fn summarize(
    per_partner_values: &BTreeMap<String, Vec<f64>>,
    n_splits: usize,
    n_noise_draws: usize,
) -> Result<EvalReport> {
    if per_partner_values.is_empty() {
        return Err(Error::Configuration("summary over zero partners".into()));
    }
    let mut per_partner = BTreeMap::new();
    for (id, values) in per_partner_values {
        if values.is_empty() {
            return Err(Error::Configuration(format!("partner {id} has no AUC samples")));
        }
        per_partner.insert(
            id.clone(),
            PartnerStats {
                auc_mean: mean(values),
                auc_std: std_dev(values),
                n_splits,
                n_noise_draws,
            },
        );
    }
    let means: Vec<f64> = per_partner.values().map(|s| s.auc_mean).collect();
    Ok(EvalReport {
        summary: quartiles(&means)?,
        per_partner,
        lifts: BTreeMap::new(),
        quartile_method: QUARTILE_METHOD.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn auc_reference_points() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 0.75);
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn auc_errors() {
        assert!(matches!(auc(&[0.1, 0.2], &[1.0, 1.0]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(auc(&[0.1], &[1.0, 0.0]), Err(Error::Dimension { .. })));
        assert!(auc(&[f64::NAN, 0.2], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn lift_reference_points() {
        assert_abs_diff_eq!(relative_lift(0.55, 0.50).unwrap(), 10.0, epsilon = 1e-12);
        assert_eq!(relative_lift(0.7, 0.7).unwrap(), 0.0);
        assert!(matches!(relative_lift(0.7, 0.0), Err(Error::Arithmetic(_))));
    }

    #[test]
    fn quartile_reference_points() {
        let q = quartiles(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let q = quartiles(&[0.7]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (0.7, 0.7, 0.7, 0.7, 0.7));
        assert!(quartiles(&[]).is_err());
    }

    #[test]
    fn summarize_averages_per_partner() {
        let mut values = BTreeMap::new();
        values.insert("a".to_string(), vec![0.6, 0.8]);
        values.insert("b".to_string(), vec![0.5]);
        let report = summarize(&values, 2, 1).unwrap();
        assert_abs_diff_eq!(report.per_partner["a"].auc_mean, 0.7, epsilon = 1e-12);
        assert_eq!(report.per_partner["b"].auc_std, 0.0);
        assert_abs_diff_eq!(report.summary.median, 0.6, epsilon = 1e-12);
        assert_eq!(report.quartile_method, "linear");
        assert!(summarize(&BTreeMap::new(), 1, 1).is_err());
    }
}
