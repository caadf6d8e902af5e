mod common;

use silo_dp::amp::{fit_amp, AmpHyperparams};
use silo_dp::data::{normalize_records, NormalizationConfig, PartnerDataset, Period};
use silo_dp::dppsgd::{fit_dppsgd, DppsgdHyperparams};
use silo_dp::loss::loss;
use silo_dp::rng::rng_from_seed;

use common::{full_batch_oracle, random_labels, separable_toy};

#[test]
fn full_batch_dppsgd_matches_gradient_descent_oracle() {
    let data = separable_toy(40, 3);
    let mut hp = DppsgdHyperparams::defaults(40, 5.0, f64::INFINITY, 1).unwrap();
    hp.batch_size = 40;
    hp.epochs = 60_000;
    let fit = fit_dppsgd(&data, &hp).unwrap();
    let ours = loss(&fit.iterate, data.x.view(), data.y.view(), &hp.loss).unwrap();
    let oracle = full_batch_oracle(&data.x, &data.y, &hp.loss, 120_000);
    assert!((ours - oracle).abs() < 1e-3, "dppsgd {ours} oracle {oracle}");
}

#[test]
fn amp_certificate_holds_on_recomputation() {
    use rand::Rng;
    for run in 0..5u64 {
        let mut rng = rng_from_seed(100 + run);
        let m = 200;
        let raw = ndarray::Array2::from_shape_fn((m, 3), |_| rng.random_range(-1.0..1.0));
        let norm = normalize_records(raw.view(), 3, &NormalizationConfig::new(3.0, 1.0).unwrap()).unwrap();
        let y = random_labels(norm.x.nrows(), &mut rng);
        let data = PartnerDataset::new("amp", Period::ColdStart, norm.x, y, 3).unwrap();
        let hp = AmpHyperparams::defaults(data.m(), 0.5, run).unwrap();
        let fit = fit_amp(&data, &hp).unwrap();
        assert!(fit.certificate(&data) <= hp.h, "run {run}: {}", fit.certificate(&data));
    }
}
