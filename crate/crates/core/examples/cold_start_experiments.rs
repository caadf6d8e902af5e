//! The three cold-start experiments on a small synthetic population, with
//! reports written to a directory.
//!
//!     cargo run --release --example cold_start_experiments [out_dir]

use silo_dp::harness::{run_command, run_experiment1, run_experiment2, run_experiment3, Command, ExperimentConfig};
use silo_dp::model::Algorithm;

fn main() -> silo_dp::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        seed = 7
        n_splits = 3
        n_noise_draws = 5
        partner_counts = [3, 6, 9]
        n_subsample_repeats = 4

        [generator]
        n_partners = 10
        size_range = [20000, 400000]
        "#,
    )?;

    let exp1 = run_experiment1(&cfg)?;
    for (eps, a) in exp1.mean_auc_curve(Algorithm::Dppsgd) {
        println!("exp1 epsilon {eps:>8}: mean AUC {a:.4}");
    }
    if let Some(clean) = exp1.no_noise() {
        println!("exp1 no noise:        mean AUC {:.4}", clean.mean_auc());
    }

    let exp2 = run_experiment2(&cfg)?;
    for row in &exp2.rows {
        println!(
            "exp2 {}: cold {:>5} rows, baseline {:.4}, ensemble {:.4}, lift {:+.2}%",
            row.partner, row.cold_train_size, row.cold_baseline_auc, row.ensemble_auc, row.lift_vs_cold
        );
    }

    let exp3 = run_experiment3(&cfg)?;
    for p in &exp3.points {
        println!("exp3 k = {}: mean lift {:+.2}%, variance {:.3}", p.k, p.mean_lift, p.lift_variance);
    }

    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("silo-dp-reports"));
    let files = run_command(Command::Baseline, &cfg, &out)?;
    println!("baseline reports: {files:?}");
    Ok(())
}
