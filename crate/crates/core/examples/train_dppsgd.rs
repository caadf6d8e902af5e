//! Train a DPPSGD logistic regression on one synthetic partner, tune C on the
//! partner's own data, and compare test AUC across privacy levels.
//!
//!     cargo run --release --example train_dppsgd

use rand::SeedableRng;
use silo_dp::data::{reference_threshold, train_test_split, NormalizationConfig, SyntheticConfig, SyntheticGenerator};
use silo_dp::dppsgd::{fit_dppsgd, tune_c, DppsgdHyperparams, C_GRID};
use silo_dp::evaluation::auc;
use silo_dp::noise::PrivacyBudget;
use silo_dp::rng::DpRng;

fn main() -> silo_dp::Result<()> {
    let cfg = SyntheticConfig {
        size_range: (60_000, 60_000),
        ..SyntheticConfig::default()
    };
    let generator = SyntheticGenerator::new(cfg, 5)?;
    let t = reference_threshold(generator.reference_sample(50_000).view(), 0.99)?;
    let data = generator.partner(0)?.ramped.normalized(&NormalizationConfig::new(t, 1.0)?)?;
    let split = train_test_split(&data, 0.2, 1)?;

    let template = DppsgdHyperparams::defaults(split.train.m(), C_GRID[0], 0.01, 42)?;
    let c = tune_c(&split.train, &C_GRID, &template)?;
    let hp = template.with_c(c)?;
    println!("{} training rows, batch size {}, tuned C = {c}", split.train.m(), hp.batch_size);

    // One fit, many releases: only the output noise depends on epsilon.
    let fit = fit_dppsgd(&split.train, &hp)?;
    println!("sensitivity {:.4}, released weight norm {:.1}", fit.sensitivity(), fit.weights.norm());
    let labels = split.test.y.as_slice().expect("contiguous");
    let mut rng = DpRng::seed_from_u64(9);
    for eps in [f64::INFINITY, 1.0, 0.1, 0.01, 1e-4, 1e-6] {
        let model = fit.release(PrivacyBudget::pure(eps)?, 42, &mut rng)?;
        let margins = model.margins(split.test.x.view())?;
        println!("epsilon {eps:>8}: test AUC {:.4}", auc(margins.as_slice().expect("contiguous"), labels)?);
    }
    Ok(())
}
