//! Empirical differential-privacy checks: a custom mechanism audited on a
//! neighboring pair, followed by the built-in audit suite.
//!
//!     cargo run --release --example privacy_audit

use rand::Rng;
use silo_dp::harness::{empirical_dp_check, run_audit_suite, Binning, ExperimentConfig};

fn main() -> silo_dp::Result<()> {
    // Laplace mechanism on a bounded sum: sensitivity 1, epsilon 1.
    let data: Vec<f64> = vec![0.0; 20];
    let mut neighbor = data.clone();
    neighbor[0] = 1.0;
    let laplace = |d: &Vec<f64>, rng: &mut silo_dp::rng::DpRng| -> silo_dp::Result<Vec<f64>> {
        let u: f64 = rng.random_range(-0.5..0.5);
        let noise = -u.signum() * (1.0 - 2.0 * u.abs()).ln();
        Ok(vec![d.iter().sum::<f64>() + noise])
    };
    let bins = Binning::uniform(-4.0, 5.0, 18)?;
    for eps in [1.0, 0.5] {
        let out = empirical_dp_check(laplace, &data, &neighbor, eps, 0.0, 50_000, &bins, 3)?;
        println!(
            "Laplace(1) audited at epsilon {eps}: {} (max log ratio {:.3})",
            if out.passed { "pass" } else { "fail" },
            out.max_log_ratio.unwrap_or(f64::NAN)
        );
    }

    let cfg = ExperimentConfig::default();
    for row in run_audit_suite(&cfg)?.rows {
        println!(
            "{:<26} epsilon {:<5} {} (expected {})",
            row.mechanism,
            row.outcome.epsilon,
            if row.outcome.passed { "pass" } else { "fail" },
            if row.expected_pass { "pass" } else { "fail" }
        );
    }
    Ok(())
}
