//! AUC on scores, relative lift in percent and quartile summaries.
//!
//!     cargo run --example evaluate_scores

use silo_dp::evaluation::{auc, mean, quartiles, relative_lift, std_dev};

fn main() -> silo_dp::Result<()> {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0.0, 0.0, 1.0, 1.0];
    println!("AUC of {scores:?} against {labels:?} = {}", auc(&scores, &labels)?);
    println!("tied scores give {}", auc(&[0.5, 0.5], &[0.0, 1.0])?);

    println!("lift of 0.78 over 0.75 = {:+.3}%", relative_lift(0.78, 0.75)?);

    let per_partner = [0.61, 0.72, 0.55, 0.80, 0.67, 0.74, 0.70];
    let q = quartiles(&per_partner)?;
    println!(
        "min {} q1 {} median {} q3 {} max {}; mean {:.4} sd {:.4}",
        q.min,
        q.q1,
        q.median,
        q.q3,
        q.max,
        mean(&per_partner),
        std_dev(&per_partner)
    );
    Ok(())
}
