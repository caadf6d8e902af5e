//! Approximate minima perturbation: objective noise, a certified approximate
//! minimizer, then Gaussian output noise.
//!
//!     cargo run --release --example train_amp

use silo_dp::amp::{fit_amp, AmpHyperparams, NoiseMode};
use silo_dp::data::{reference_threshold, train_test_split, NormalizationConfig, SyntheticConfig, SyntheticGenerator};
use silo_dp::evaluation::auc;

fn main() -> silo_dp::Result<()> {
    let generator = SyntheticGenerator::new(SyntheticConfig::default(), 8)?;
    let t = reference_threshold(generator.reference_sample(50_000).view(), 0.99)?;
    let data = generator.partner(3)?.ramped.normalized(&NormalizationConfig::new(t, 1.0)?)?;
    let split = train_test_split(&data, 0.2, 2)?;
    let labels = split.test.y.as_slice().expect("contiguous");

    for (label, eps, noise) in [("no noise", 1.0, NoiseMode::Disabled), ("eps 1", 1.0, NoiseMode::Enabled), ("eps 0.01", 0.01, NoiseMode::Enabled)] {
        let mut hp = AmpHyperparams::defaults(split.train.m(), eps, 17)?;
        hp.noise = noise;
        let fit = fit_amp(&split.train, &hp)?;
        let margins = fit.model.margins(split.test.x.view())?;
        println!(
            "{label:>9}: certificate {:.2e} <= h {:.2e}, objective sigma {:.3e}, output sigma {:.3e}, AUC {:.4}",
            fit.certificate(&split.train),
            hp.h,
            fit.calibration.objective_sigma,
            fit.calibration.output_sigma,
            auc(margins.as_slice().expect("contiguous"), labels)?
        );
    }
    Ok(())
}
