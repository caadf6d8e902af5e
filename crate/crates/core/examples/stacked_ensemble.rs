//! A cold-start partner stacks released models from ramped-up peers with a
//! boosted tree model trained on its own few labels, then saves the ensemble.
//!
//!     cargo run --release --example stacked_ensemble

use silo_dp::aggregation::{ensemble_margins, train_ensemble, EnsembleModel};
use silo_dp::data::{reference_threshold, train_test_split, NormalizationConfig, SyntheticConfig, SyntheticGenerator};
use silo_dp::dppsgd::{train_dppsgd, train_non_private, DppsgdHyperparams};
use silo_dp::evaluation::{auc, relative_lift};
use silo_dp::gbdt::GbdtParams;

fn main() -> silo_dp::Result<()> {
    let cfg = SyntheticConfig {
        n_partners: 6,
        size_range: (20_000, 400_000),
        ..SyntheticConfig::default()
    };
    let generator = SyntheticGenerator::new(cfg, 21)?;
    let t = reference_threshold(generator.reference_sample(50_000).view(), 0.99)?;
    let norm = NormalizationConfig::new(t, 1.0)?;

    let target = generator.partner(0)?.cold.normalized(&norm)?;
    let split = train_test_split(&target, 0.2, 4)?;
    let labels = split.test.y.as_slice().expect("contiguous");

    // The target's own cold-start model, kept private like every other one.
    let hp = DppsgdHyperparams::defaults(split.train.m(), 5.0, 0.01, 1)?;
    let mut base_models = vec![train_dppsgd(&split.train, &hp)?];
    for k in 1..generator.n_partners() {
        let peer = generator.partner(k)?.ramped.normalized(&norm)?;
        let hp = DppsgdHyperparams::defaults(peer.m(), 5.0, 0.01, 100 + k as u64)?;
        base_models.push(train_dppsgd(&peer, &hp)?);
        println!("peer {} released a model from {} rows", peer.partner_id, peer.m());
    }

    let baseline = train_non_private(&split.train, &hp)?;
    let baseline_auc = auc(baseline.margins(split.test.x.view())?.as_slice().expect("contiguous"), labels)?;

    let (ensemble, _) = train_ensemble(&target.partner_id, split.train.x.view(), split.train.y.view(), base_models, &GbdtParams::default(), 0)?;
    let scores = ensemble_margins(&ensemble, split.test.x.view())?;
    let ensemble_auc = auc(scores.as_slice().expect("contiguous"), labels)?;
    println!(
        "cold-start baseline AUC {baseline_auc:.4}, ensemble AUC {ensemble_auc:.4}, lift {:+.2}%",
        relative_lift(ensemble_auc, baseline_auc)?
    );

    let path = std::env::temp_dir().join("silo-dp-ensemble.json");
    ensemble.save(&path)?;
    let restored = EnsembleModel::load(&path)?;
    assert_eq!(ensemble_margins(&restored, split.test.x.view())?, scores);
    println!("saved and reloaded {}", path.display());
    std::fs::remove_file(path).ok();
    Ok(())
}
