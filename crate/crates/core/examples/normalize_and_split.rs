//! Writing and reading partner CSV files, outlier filtering with unit-norm
//! scaling, and stratified train/test splits.
//!
//!     cargo run --example normalize_and_split

use ndarray::array;
use silo_dp::data::{
    load_partner_csv, normalize_records, reference_threshold, train_test_split, write_partner_csv, NormalizationConfig,
    PartnerDataset, Period, SyntheticConfig, SyntheticGenerator,
};

fn main() -> silo_dp::Result<()> {
    // The threshold comes from public reference data, never from a partner.
    let generator = SyntheticGenerator::new(SyntheticConfig::default(), 3)?;
    let t = reference_threshold(generator.reference_sample(50_000).view(), 0.99)?;
    let norm = NormalizationConfig::new(t, 1.0)?;
    println!("outlier threshold t = {t:.3}");

    let raw = array![[2.0, 0.0], [0.0, 0.0], [1.0, 1.9], [1.0, 2.1]];
    let small = normalize_records(raw.view(), 2, &NormalizationConfig::new(4.0, 1.0)?)?;
    println!("kept rows {:?}\n{:.4}", small.kept, small.x);

    let dir = tempfile_dir();
    let pair = generator.partner(0)?;
    let path = write_partner_csv(&pair.cold, &dir)?;
    let loaded = load_partner_csv(&path, 19)?;
    println!("round-tripped {} ({} rows, {} positives)", path.display(), loaded.m(), loaded.positives());

    let normalized = loaded.normalized(&norm)?;
    let split = train_test_split(&normalized, 0.2, 11)?;
    println!(
        "normalized {} of {} rows; train {} / test {} (stratified: {})",
        normalized.m(),
        loaded.m(),
        split.train.m(),
        split.test.m(),
        split.stratified
    );

    let tiny = PartnerDataset::new("demo", Period::ColdStart, array![[0.1, 0.2]], array![1.0], 1)?;
    println!("{} has {} record", tiny.file_name(), tiny.m());
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("silo-dp-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}
