use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{
    load_partner_csv, partner_id, reference_threshold, NormalizationConfig, PartnerPair, Period,
    SyntheticGenerator,
};
use crate::error::{Error, Result};

use super::config::ExperimentConfig;

#[derive(Debug, Clone)]
enum Origin {
    Synthetic(SyntheticGenerator),
    Files { d: usize, files: Vec<(String, PathBuf, PathBuf)> },
}

/// Where partner data comes from: the synthetic generator, or a directory of
/// `<partner>_<ramped|cold>.csv` files. Partners are produced one at a time.
#[derive(Debug, Clone)]
pub struct PartnerSource {
    origin: Origin,
    normalization: NormalizationConfig,
}

impl PartnerSource {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let bias = cfg.normalization.bias;
        match &cfg.data_dir {
            Some(dir) => {
                let t = cfg.normalization.t_norm.ok_or_else(|| {
                    Error::Configuration("loading CSV data requires normalization.t_norm".into())
                })?;
                Ok(PartnerSource {
                    origin: Origin::Files {
                        d: cfg.generator.d,
                        files: scan_dir(dir)?,
                    },
                    normalization: NormalizationConfig::new(t, bias)?,
                })
            }
            None => {
                let generator = SyntheticGenerator::new(cfg.generator.clone(), cfg.seed)?;
                let t = match cfg.normalization.t_norm {
                    Some(t) => t,
                    None => {
                        let reference = generator.reference_sample(cfg.normalization.reference_size);
                        reference_threshold(reference.view(), cfg.normalization.reference_quantile)?
                    }
                };
                Ok(PartnerSource {
                    origin: Origin::Synthetic(generator),
                    normalization: NormalizationConfig::new(t, bias)?,
                })
            }
        }
    }

    pub fn n_partners(&self) -> usize {
        match &self.origin {
            Origin::Synthetic(g) => g.n_partners(),
            Origin::Files { files, .. } => files.len(),
        }
    }

    pub fn partner_ids(&self) -> Vec<String> {
        match &self.origin {
            Origin::Synthetic(g) => (0..g.n_partners()).map(partner_id).collect(),
            Origin::Files { files, .. } => files.iter().map(|(id, _, _)| id.clone()).collect(),
        }
    }

    pub fn normalization(&self) -> NormalizationConfig {
        self.normalization
    }

    pub fn raw_pair(&self, index: usize) -> Result<PartnerPair> {
        match &self.origin {
            Origin::Synthetic(g) => g.partner(index),
            Origin::Files { d, files } => {
                let (_, ramped, cold) = files.get(index).ok_or_else(|| {
                    Error::Configuration(format!("partner index {index} out of range (n = {})", files.len()))
                })?;
                Ok(PartnerPair {
                    ramped: load_partner_csv(ramped, *d)?,
                    cold: load_partner_csv(cold, *d)?,
                })
            }
        }
    }

    /// The pair after outlier removal, bias append and scaling to the unit ball.
    pub fn normalized_pair(&self, index: usize) -> Result<PartnerPair> {
        let raw = self.raw_pair(index)?;
        Ok(PartnerPair {
            ramped: raw.ramped.normalized(&self.normalization)?,
            cold: raw.cold.normalized(&self.normalization)?,
        })
    }
}

fn scan_dir(dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let mut found: BTreeMap<String, (Option<PathBuf>, Option<PathBuf>)> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let Some((id, tag)) = stem.rsplit_once('_') else {
            continue;
        };
        let Ok(period) = tag.parse::<Period>() else {
            continue;
        };
        let slot = found.entry(id.to_string()).or_default();
        match period {
            Period::RampedUp => slot.0 = Some(path.clone()),
            Period::ColdStart => slot.1 = Some(path.clone()),
        }
    }
    let mut files = Vec::with_capacity(found.len());
    for (id, pair) in found {
        match pair {
            (Some(r), Some(c)) => files.push((id, r, c)),
            _ => {
                return Err(Error::Schema(format!(
                    "partner {id} needs both {id}_ramped.csv and {id}_cold.csv"
                )))
            }
        }
    }
    if files.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "{} holds {} complete partner(s); at least 2 are needed",
            dir.display(),
            files.len()
        )));
    }
    Ok(files)
}
