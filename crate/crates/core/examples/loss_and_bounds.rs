//! Regularized logistic loss, its gradient, and the constants the private
//! trainers are calibrated from.
//!
//!     cargo run --example loss_and_bounds

use ndarray::array;
use silo_dp::loss::{derive_bounds, loss, loss_gradient, project_to_ball, sigmoid, LossConfig, WeightVector};

fn main() -> silo_dp::Result<()> {
    // Three normalized records (bias in the last column) and their labels.
    let x = array![[0.30, -0.10, 0.25], [-0.20, 0.40, 0.25], [0.05, 0.05, 0.25]];
    let y = array![1.0, 0.0, 1.0];

    for c in [5.0, 50.0, 500.0] {
        let cfg = LossConfig::with_inverse_radius(c, 0.001)?;
        let b = derive_bounds(&cfg);
        println!(
            "C = {c:>5}: R = {}, L = {}, beta = {}, gamma = {}",
            cfg.radius, b.lipschitz, b.smoothness, b.strong_convexity
        );
    }

    let cfg = LossConfig::with_inverse_radius(5.0, 0.001)?;
    let w = WeightVector::from(vec![1.5, -2.0, 0.3]);
    println!("loss at w       = {:.6}", loss(&w, x.view(), y.view(), &cfg)?);
    println!("gradient at w   = {:.6}", loss_gradient(&w, x.view(), y.view(), &cfg)?);
    println!("p(y=1 | row 0)  = {:.4}", sigmoid(x.row(0).dot(w.as_array())));

    let far = WeightVector::from(vec![3000.0, -4000.0, 0.0]);
    let projected = project_to_ball(far, cfg.radius);
    println!("projected norm  = {} (radius {})", projected.norm(), cfg.radius);
    Ok(())
}
