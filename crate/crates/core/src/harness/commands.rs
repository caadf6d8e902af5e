use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::write_partner_csv;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::experiments::{run_audit_suite, run_baselines, run_experiment1, run_experiment2, run_experiment3};
use super::report::{self, GeneratedPartner};
use super::source::PartnerSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Generate,
    Baseline,
    Exp1,
    Exp2,
    Exp3,
    Audit,
}

/// Writes every partner's raw CSV files plus a size table into `out`.
pub fn generate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let source = PartnerSource::from_config(cfg)?;
    let mut files = Vec::new();
    let mut partners = Vec::new();
    for k in 0..source.n_partners() {
        let pair = source.raw_pair(k)?;
        let rate = |d: &crate::data::PartnerDataset| d.positives() as f64 / d.m() as f64;
        partners.push(GeneratedPartner {
            partner: pair.ramped.partner_id.clone(),
            ramped_size: pair.ramped.m(),
            cold_size: pair.cold.m(),
            ramped_positive_rate: rate(&pair.ramped),
            cold_positive_rate: rate(&pair.cold),
        });
        files.push(write_partner_csv(&pair.ramped, out)?);
        files.push(write_partner_csv(&pair.cold, out)?);
    }
    files.extend(report::write_generation(out, cfg, &partners)?);
    Ok(files)
}

/// Runs one command and writes its reports into `out` (created if missing).
pub fn run_command(command: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    match command {
        Command::Generate => generate(cfg, out),
        Command::Baseline => report::write_baselines(out, cfg, &run_baselines(cfg)?),
        Command::Exp1 => report::write_experiment1(out, cfg, &run_experiment1(cfg)?),
        Command::Exp2 => report::write_experiment2(out, cfg, &run_experiment2(cfg)?),
        Command::Exp3 => report::write_experiment3(out, cfg, &run_experiment3(cfg)?),
        Command::Audit => report::write_audit(out, cfg, &run_audit_suite(cfg)?),
    }
}
