//! Sensitivity, the L2-Laplace output mechanism, Gaussian calibration and the
//! budget split used by approximate minima perturbation.
//!
//!     cargo run --example noise_mechanisms

use silo_dp::loss::{derive_bounds, LossConfig};
use silo_dp::noise::{dppsgd_sensitivity, gaussian_sigma, sample_gaussian_vec, sample_l2_laplace, split_budget, PrivacyBudget};
use silo_dp::rng::child_rng;

fn main() -> silo_dp::Result<()> {
    let cfg = LossConfig::with_inverse_radius(5.0, 0.001)?;
    let d = 20;

    println!("{:>10} {:>12} {:>14}", "m", "sensitivity", "E|noise| @0.01");
    for m in [1_000, 10_000, 100_000, 1_000_000] {
        let mut bounds = derive_bounds(&cfg);
        let delta2 = dppsgd_sensitivity(&mut bounds, m, (m / 100).max(16))?;
        println!("{m:>10} {delta2:>12.4} {:>14.1}", d as f64 * delta2 / 0.01);
    }

    // Draw a few noise vectors and compare their norms with the expectation.
    let mut rng = child_rng(7, "example", "laplace", 0);
    let mut bounds = derive_bounds(&cfg);
    let delta2 = dppsgd_sensitivity(&mut bounds, 50_000, 500)?;
    let draws = 2_000;
    let mean_norm = (0..draws)
        .map(|_| {
            let z = sample_l2_laplace(d, delta2, 0.01, &mut rng).unwrap();
            z.dot(&z).sqrt()
        })
        .sum::<f64>()
        / draws as f64;
    println!("L2-Laplace: mean norm {mean_norm:.2}, expected {:.2}", d as f64 * delta2 / 0.01);

    let budget = PrivacyBudget::new(0.01, 1e-8)?;
    let split = split_budget(&budget, 0.99)?;
    println!(
        "AMP split: objective ({}, {:e}), output ({}, {:e})",
        split.eps_obj, split.delta_obj, split.eps_out, split.delta_out
    );
    let sigma = gaussian_sigma(1.0, 0.5, 1e-5)?;
    let v = sample_gaussian_vec(4, sigma, &mut rng);
    println!("Gaussian sigma for sensitivity 1 at (0.5, 1e-5): {sigma:.4}; sample {v:.3}");
    Ok(())
}
