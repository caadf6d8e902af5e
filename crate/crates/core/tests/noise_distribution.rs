mod common;

use silo_dp::noise::{gaussian_sigma, sample_gaussian_vec, sample_l2_laplace};
use silo_dp::rng::rng_from_seed;

use common::ks_distance_to_gamma;

#[test]
fn l2_laplace_norm_follows_gamma() {
    let (d, delta2, eps) = (20usize, 1.2, 0.01);
    let mut rng = rng_from_seed(17);
    let n = 20_000;
    let mut norms = Vec::with_capacity(n);
    let mut sum = ndarray::Array1::<f64>::zeros(d);
    for _ in 0..n {
        let z = sample_l2_laplace(d, delta2, eps, &mut rng).unwrap();
        norms.push(z.dot(&z).sqrt());
        sum += &z;
    }
    let scale = delta2 / eps;
    let mean = norms.iter().sum::<f64>() / n as f64;
    assert!((mean / (d as f64 * scale) - 1.0).abs() < 0.01, "mean norm {mean}");
    // Each coordinate is symmetric about zero; its standard deviation is
    // sqrt(E‖z‖² / d) = scale·sqrt(d + 1).
    let coord_se = scale * ((d + 1) as f64).sqrt() / (n as f64).sqrt();
    for v in sum.iter() {
        assert!((v / n as f64).abs() < 4.0 * coord_se);
    }
    assert!(ks_distance_to_gamma(&mut norms, d as f64, scale) < 0.015);
}

#[test]
fn infinite_epsilon_draws_nothing() {
    let mut a = rng_from_seed(1);
    let z = sample_l2_laplace(5, 1.0, f64::INFINITY, &mut a).unwrap();
    assert!(z.iter().all(|&v| v == 0.0));
    let mut b = rng_from_seed(1);
    use rand::RngCore;
    assert_eq!(a.next_u64(), b.next_u64());
}

#[test]
fn gaussian_vector_matches_calibrated_sigma() {
    let sigma = gaussian_sigma(0.5, 0.5, 1e-5).unwrap();
    let mut rng = rng_from_seed(5);
    let n = 50_000;
    let mut sq = 0.0;
    for _ in 0..n {
        let v = sample_gaussian_vec(4, sigma, &mut rng);
        sq += v.dot(&v);
    }
    let var = sq / (4 * n) as f64;
    assert!((var / (sigma * sigma) - 1.0).abs() < 0.03);
}
