//! CSV tables, a JSON summary and a short text summary per command.
//!
//! Floats are written with Rust's shortest round-trip formatting and all maps
//! are ordered, so identical inputs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evaluation::QUARTILE_METHOD;

use super::config::ExperimentConfig;
use super::experiments::{AuditReport, BaselineReport, Experiment1Report, Experiment2Report, Experiment3Report};

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn epsilon_label(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "no_noise".to_string())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
    let ser = |e: csv::Error| Error::Serialization(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(ser)?;
    for row in rows {
        w.write_record(row).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Envelope shared by every JSON summary.
fn summary(command: &str, cfg: &ExperimentConfig, results: Value) -> Result<Value> {
    let config = serde_json::to_value(cfg).map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(json!({
        "command": command,
        "seed": cfg.seed,
        "config": config,
        "results": results,
    }))
}

fn finish(dir: &Path, command: &str, cfg: &ExperimentConfig, results: Value, text: String) -> Result<Vec<PathBuf>> {
    let json_path = dir.join(format!("{command}_summary.json"));
    write_json(&json_path, &summary(command, cfg, results)?)?;
    let text_path = dir.join(format!("{command}_summary.txt"));
    write_text(&text_path, &text)?;
    Ok(vec![json_path, text_path])
}

pub fn write_baselines(dir: &Path, cfg: &ExperimentConfig, report: &BaselineReport) -> Result<Vec<PathBuf>> {
    let path = dir.join("baselines.csv");
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.partner.clone(),
                r.cold_train_size.to_string(),
                r.ramped_train_size.to_string(),
                num(r.cold_auc_mean),
                num(r.cold_auc_std),
                num(r.ramped_auc_mean),
                num(r.ramped_auc_std),
            ]
        })
        .collect();
    write_csv(
        &path,
        &["partner", "cold_train_size", "ramped_train_size", "cold_auc_mean", "cold_auc_std", "ramped_auc_mean", "ramped_auc_std"],
        &rows,
    )?;
    let results = json!({
        "cold_mean_auc": report.cold.mean_auc(),
        "ramped_mean_auc": report.ramped.mean_auc(),
        "cold_quartiles": report.cold.summary,
        "ramped_quartiles": report.ramped.summary,
        "quartile_method": QUARTILE_METHOD,
        "n_partners": report.rows.len(),
    });
    let text = format!(
        "baselines over {} partners\ncold-start mean AUC {:.4}\nramped-up mean AUC {:.4}\n",
        report.rows.len(),
        report.cold.mean_auc(),
        report.ramped.mean_auc()
    );
    let mut files = vec![path];
    files.extend(finish(dir, "baseline", cfg, results, text)?);
    Ok(files)
}

pub fn write_experiment1(dir: &Path, cfg: &ExperimentConfig, report: &Experiment1Report) -> Result<Vec<PathBuf>> {
    let partner_path = dir.join("exp1_partner_auc.csv");
    let mut partner_rows = Vec::new();
    let quartile_path = dir.join("exp1_quartiles.csv");
    let mut quartile_rows = Vec::new();
    let mut text = String::from("experiment 1: mean cold-start AUC by epsilon\n");
    let mut curve = Vec::new();
    for row in &report.rows {
        let eps = epsilon_label(row.epsilon);
        for (id, stats) in &row.report.per_partner {
            partner_rows.push(vec![
                row.algorithm.to_string(),
                eps.clone(),
                id.clone(),
                num(stats.auc_mean),
                num(stats.auc_std),
                stats.n_splits.to_string(),
                stats.n_noise_draws.to_string(),
            ]);
        }
        let q = row.report.summary;
        let m = row.report.mean_auc();
        quartile_rows.push(vec![
            row.algorithm.to_string(),
            eps.clone(),
            num(q.min),
            num(q.q1),
            num(q.median),
            num(q.q3),
            num(q.max),
            num(m),
        ]);
        text.push_str(&format!("{:<12} {:>10} {:.4}\n", row.algorithm.to_string(), eps, m));
        curve.push(json!({
            "algorithm": row.algorithm,
            "epsilon": eps,
            "mean_auc": m,
            "quartiles": q,
        }));
    }
    write_csv(
        &partner_path,
        &["algorithm", "epsilon", "partner", "auc_mean", "auc_std", "n_splits", "n_noise_draws"],
        &partner_rows,
    )?;
    write_csv(
        &quartile_path,
        &["algorithm", "epsilon", "min", "q1", "median", "q3", "max", "mean"],
        &quartile_rows,
    )?;
    let results = json!({ "rows": curve, "quartile_method": QUARTILE_METHOD });
    let mut files = vec![partner_path, quartile_path];
    files.extend(finish(dir, "exp1", cfg, results, text)?);
    Ok(files)
}

pub fn write_experiment2(dir: &Path, cfg: &ExperimentConfig, report: &Experiment2Report) -> Result<Vec<PathBuf>> {
    let path = dir.join("exp2_lifts.csv");
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.partner.clone(),
                r.algorithm.to_string(),
                r.cold_train_size.to_string(),
                r.ramped_train_size.to_string(),
                num(r.tuned_c),
                num(r.cold_baseline_auc),
                num(r.ramped_baseline_auc),
                num(r.ensemble_auc),
                num(r.lift_vs_cold),
                num(r.lift_vs_ramped),
                opt(r.ramped_ensemble_auc),
                opt(r.ramped_variant_lift),
            ]
        })
        .collect();
    write_csv(
        &path,
        &[
            "partner",
            "algorithm",
            "cold_train_size",
            "ramped_train_size",
            "tuned_c",
            "cold_baseline_auc",
            "ramped_baseline_auc",
            "ensemble_auc",
            "lift_vs_cold_pct",
            "lift_vs_ramped_pct",
            "ramped_ensemble_auc",
            "ramped_variant_lift_pct",
        ],
        &rows,
    )?;
    let mut text = String::from("experiment 2: aggregation lift (percent)\n");
    for (alg, s) in &report.summary {
        text.push_str(&format!(
            "{alg}: vs cold-start {:.3}, vs ramped-up {:.3}, ramped variant {}, positive {}/{}\n",
            s.mean_lift_vs_cold,
            s.mean_lift_vs_ramped,
            s.mean_ramped_variant_lift.map_or("n/a".to_string(), |v| format!("{v:.3}")),
            s.partners_with_positive_lift,
            s.n_partners
        ));
    }
    let summary: serde_json::Map<String, Value> = report
        .summary
        .iter()
        .map(|(alg, s)| (alg.to_string(), json!(s)))
        .collect();
    let mut files = vec![path];
    files.extend(finish(dir, "exp2", cfg, Value::Object(summary), text)?);
    Ok(files)
}

pub fn write_experiment3(dir: &Path, cfg: &ExperimentConfig, report: &Experiment3Report) -> Result<Vec<PathBuf>> {
    let repeats_path = dir.join("exp3_repeats.csv");
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.algorithm.to_string(),
                r.k.to_string(),
                r.repeat.to_string(),
                r.partners.join(" "),
                num(r.mean_lift),
            ]
        })
        .collect();
    write_csv(&repeats_path, &["algorithm", "k", "repeat", "partners", "mean_lift_pct"], &rows)?;
    let points_path = dir.join("exp3_lift_by_k.csv");
    let rows: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| {
            vec![
                p.algorithm.to_string(),
                p.k.to_string(),
                num(p.mean_lift),
                num(p.lift_variance),
                p.repeats.to_string(),
            ]
        })
        .collect();
    write_csv(&points_path, &["algorithm", "k", "mean_lift_pct", "lift_variance", "repeats"], &rows)?;
    let mut text = String::from("experiment 3: lift by number of partners\n");
    for p in &report.points {
        text.push_str(&format!(
            "{} k={:<3} mean {:.3} variance {:.4}\n",
            p.algorithm, p.k, p.mean_lift, p.lift_variance
        ));
    }
    let results = json!({ "points": report.points });
    let mut files = vec![repeats_path, points_path];
    files.extend(finish(dir, "exp3", cfg, results, text)?);
    Ok(files)
}

pub fn write_audit(dir: &Path, cfg: &ExperimentConfig, report: &AuditReport) -> Result<Vec<PathBuf>> {
    let path = dir.join("audit.csv");
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.mechanism.clone(),
                opt(r.mechanism_epsilon),
                num(r.outcome.epsilon),
                r.outcome.trials.to_string(),
                r.outcome.n_bins.to_string(),
                r.outcome.passed.to_string(),
                r.expected_pass.to_string(),
                opt(r.outcome.max_log_ratio),
                num(r.outcome.worst_excess),
            ]
        })
        .collect();
    write_csv(
        &path,
        &[
            "mechanism",
            "mechanism_epsilon",
            "tested_epsilon",
            "trials",
            "bins",
            "passed",
            "expected_pass",
            "max_log_ratio",
            "worst_excess",
        ],
        &rows,
    )?;
    let mut text = String::from("empirical privacy audit\n");
    for r in &report.rows {
        text.push_str(&format!(
            "{:<24} tested at {:<6} {} (expected {})\n",
            r.mechanism,
            r.outcome.epsilon,
            if r.outcome.passed { "pass" } else { "fail" },
            if r.expected_pass { "pass" } else { "fail" }
        ));
    }
    let results = json!({
        "rows": report.rows,
        "all_as_expected": report.rows.iter().all(|r| r.as_expected()),
    });
    let mut files = vec![path];
    files.extend(finish(dir, "audit", cfg, results, text)?);
    Ok(files)
}

/// One row per partner describing what `generate` wrote.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedPartner {
    pub partner: String,
    pub ramped_size: usize,
    pub cold_size: usize,
    pub ramped_positive_rate: f64,
    pub cold_positive_rate: f64,
}

pub fn write_generation(dir: &Path, cfg: &ExperimentConfig, partners: &[GeneratedPartner]) -> Result<Vec<PathBuf>> {
    let path = dir.join("partners.csv");
    let rows: Vec<Vec<String>> = partners
        .iter()
        .map(|p| {
            vec![
                p.partner.clone(),
                p.ramped_size.to_string(),
                p.cold_size.to_string(),
                num(p.ramped_positive_rate),
                num(p.cold_positive_rate),
            ]
        })
        .collect();
    write_csv(
        &path,
        &["partner", "ramped_size", "cold_size", "ramped_positive_rate", "cold_positive_rate"],
        &rows,
    )?;
    let total: usize = partners.iter().map(|p| p.ramped_size).sum();
    let text = format!("generated {} partners, {} ramped-up records in total\n", partners.len(), total);
    let results = json!({ "partners": partners, "total_ramped_records": total });
    let mut files = vec![path];
    files.extend(finish(dir, "generate", cfg, results, text)?);
    Ok(files)
}
