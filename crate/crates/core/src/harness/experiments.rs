use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::aggregation::{ensemble_margins, train_ensemble};
use crate::amp::{train_amp, AmpHyperparams};
use crate::data::{normalize_records, train_test_split, NormalizationConfig, PartnerDataset, Period, TrainTestSplit};
use crate::dppsgd::{fit_dppsgd, train_dppsgd, tune_c, DppsgdFit, DppsgdHyperparams};
use crate::error::{Error, Result};
use crate::evaluation::{auc, mean, relative_lift, sample_variance, summarize, EvalReport};
use crate::model::{Algorithm, PrivateModel};
use crate::noise::{sample_l2_laplace, PrivacyBudget};
use crate::rng::{child_rng, child_seed, DpRng};

use super::audit::{differ_in_one_record, empirical_dp_check, AuditOutcome, Binning};
use super::config::{ExperimentConfig, TargetModel};
use super::source::PartnerSource;

fn slice(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("owned arrays are contiguous")
}

fn auc_of(weights: &Array1<f64>, data: &PartnerDataset) -> Result<f64> {
    let margins = data.x.dot(weights);
    auc(slice(&margins), slice(&data.y))
}

/// A split of one partner's data plus the tuned, noise-free model on its training part.
struct SplitFit {
    split: TrainTestSplit,
    c: f64,
    fit: DppsgdFit,
}

fn fit_split(cfg: &ExperimentConfig, data: &PartnerDataset, index: usize) -> Result<SplitFit> {
    let id = &data.partner_id;
    let tag = data.period.file_tag();
    let split_seed = child_seed(cfg.seed, id, &format!("{tag}-split"), index as u64);
    let split = train_test_split(data, cfg.test_fraction, split_seed)?;
    let fit_seed = child_seed(cfg.seed, id, &format!("{tag}-fit"), index as u64);
    let template = DppsgdHyperparams::defaults(split.train.m(), cfg.c_grid[0], cfg.epsilon_main, fit_seed)?;
    let c = tune_c(&split.train, &cfg.c_grid, &template)?;
    let fit = fit_dppsgd(&split.train, &template.with_c(c)?)?;
    Ok(SplitFit { split, c, fit })
}

// ---------------------------------------------------------------------------
// Baselines

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub partner: String,
    pub cold_train_size: usize,
    pub ramped_train_size: usize,
    pub cold_auc_mean: f64,
    pub cold_auc_std: f64,
    pub ramped_auc_mean: f64,
    pub ramped_auc_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub cold: EvalReport,
    pub ramped: EvalReport,
    pub rows: Vec<BaselineRow>,
}

/// Noise-free models per partner on both periods, averaged over `n_splits` splits.
pub fn run_baselines(cfg: &ExperimentConfig) -> Result<BaselineReport> {
    cfg.validate()?;
    let source = PartnerSource::from_config(cfg)?;
    let mut cold = BTreeMap::new();
    let mut ramped = BTreeMap::new();
    let mut sizes = BTreeMap::new();
    for k in 0..source.n_partners() {
        let pair = source.normalized_pair(k)?;
        let id = pair.cold.partner_id.clone();
        let mut size = (0, 0);
        for (data, acc, slot) in [(&pair.cold, &mut cold, 0), (&pair.ramped, &mut ramped, 1)] {
            let mut values = Vec::with_capacity(cfg.n_splits);
            for s in 0..cfg.n_splits {
                let sf = fit_split(cfg, data, s)?;
                values.push(auc_of(sf.fit.weights.as_array(), &sf.split.test)?);
                if s == 0 {
                    if slot == 0 {
                        size.0 = sf.split.train.m();
                    } else {
                        size.1 = sf.split.train.m();
                    }
                }
            }
            acc.insert(id.clone(), values);
        }
        sizes.insert(id, size);
    }
    let cold = summarize(&cold, cfg.n_splits, 1)?;
    let ramped = summarize(&ramped, cfg.n_splits, 1)?;
    let rows = sizes
        .iter()
        .map(|(id, &(cs, rs))| BaselineRow {
            partner: id.clone(),
            cold_train_size: cs,
            ramped_train_size: rs,
            cold_auc_mean: cold.per_partner[id].auc_mean,
            cold_auc_std: cold.per_partner[id].auc_std,
            ramped_auc_mean: ramped.per_partner[id].auc_mean,
            ramped_auc_std: ramped.per_partner[id].auc_std,
        })
        .collect();
    Ok(BaselineReport { cold, ramped, rows })
}

// ---------------------------------------------------------------------------
// Experiment 1: individual private models across ε

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment1Row {
    pub algorithm: Algorithm,
    /// `None` for the noise-free row.
    pub epsilon: Option<f64>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment1Report {
    pub rows: Vec<Experiment1Row>,
}

impl Experiment1Report {
    /// `(ε, mean AUC across partners)` for one algorithm, in grid order.
    pub fn mean_auc_curve(&self, algorithm: Algorithm) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.algorithm == algorithm)
            .filter_map(|r| r.epsilon.map(|e| (e, r.report.mean_auc())))
            .collect()
    }

    pub fn no_noise(&self) -> Option<&EvalReport> {
        self.rows.iter().find(|r| r.epsilon.is_none()).map(|r| &r.report)
    }
}

/// Cold-start AUC of each partner's private model for every ε in the grid.
///
/// DPPSGD is fitted once per split and only the output noise is redrawn; AMP
/// retrains for each draw since its noise enters the objective.
pub fn run_experiment1(cfg: &ExperimentConfig) -> Result<Experiment1Report> {
    cfg.validate()?;
    let source = PartnerSource::from_config(cfg)?;
    let algorithms = cfg.algorithm.algorithms();
    let grid = &cfg.epsilon_grid;
    let mut noisy: BTreeMap<(usize, usize), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut clean: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    for k in 0..source.n_partners() {
        let cold = source.normalized_pair(k)?.cold;
        let id = cold.partner_id.clone();
        for s in 0..cfg.n_splits {
            let sf = fit_split(cfg, &cold, s)?;
            let test = &sf.split.test;
            clean.entry(id.clone()).or_default().push(auc_of(sf.fit.weights.as_array(), test)?);
            for (a, &algorithm) in algorithms.iter().enumerate() {
                for (i, &eps) in grid.iter().enumerate() {
                    let values = noisy.entry((a, i)).or_default().entry(id.clone()).or_default();
                    for r in 0..cfg.n_noise_draws {
                        let draw = ((s * grid.len() + i) * cfg.n_noise_draws + r) as u64;
                        let weights = match algorithm {
                            Algorithm::Amp => {
                                let seed = child_seed(cfg.seed, &id, "exp1-amp", draw);
                                let hp = AmpHyperparams::defaults(sf.split.train.m(), eps, seed)?;
                                train_amp(&sf.split.train, &hp)?.weights.into_inner()
                            }
                            _ => {
                                let mut rng = child_rng(cfg.seed, &id, "exp1-dppsgd-noise", draw);
                                let noise = sample_l2_laplace(sf.fit.weights.len(), sf.fit.sensitivity(), eps, &mut rng)?;
                                sf.fit.weights.as_array() + &noise
                            }
                        };
                        values.push(auc_of(&weights, test)?);
                    }
                }
            }
        }
    }

    let mut rows = Vec::new();
    for (a, &algorithm) in algorithms.iter().enumerate() {
        for (i, &eps) in grid.iter().enumerate() {
            rows.push(Experiment1Row {
                algorithm,
                epsilon: Some(eps),
                report: summarize(&noisy[&(a, i)], cfg.n_splits, cfg.n_noise_draws)?,
            });
        }
    }
    rows.push(Experiment1Row {
        algorithm: Algorithm::NonPrivate,
        epsilon: None,
        report: summarize(&clean, cfg.n_splits, 1)?,
    });
    Ok(Experiment1Report { rows })
}

// ---------------------------------------------------------------------------
// Shared state for experiments 2 and 3

/// What one partner contributes to the aggregation experiments, computed on
/// split 0 of each period.
struct PanelPartner {
    id: String,
    cold_train: PartnerDataset,
    cold_test: PartnerDataset,
    cold_c: f64,
    cold_baseline: f64,
    ramped_train_size: usize,
    ramped_c: f64,
    ramped_baseline: f64,
    /// The target's own cold-start model per algorithm.
    own_cold: BTreeMap<Algorithm, PrivateModel>,
    /// The target's own ramped-up model per algorithm (ramped variant only).
    own_ramped: BTreeMap<Algorithm, PrivateModel>,
    /// Released ramped-up DPPSGD models, one per C in the grid.
    shared_dppsgd: Vec<(f64, PrivateModel)>,
    shared_amp: Option<PrivateModel>,
    /// Stacker rows and test rows of the ramped-up period (ramped variant only).
    ramped_eval: Option<(PartnerDataset, PartnerDataset)>,
}

impl PanelPartner {
    /// The model this partner shares with a target that tuned `c`.
    fn shared(&self, algorithm: Algorithm, c: f64) -> Result<&PrivateModel> {
        match algorithm {
            Algorithm::Amp => self
                .shared_amp
                .as_ref()
                .ok_or_else(|| Error::Precondition(format!("no AMP model for {}", self.id))),
            _ => self
                .shared_dppsgd
                .iter()
                .find(|(gc, _)| *gc == c)
                .map(|(_, m)| m)
                .ok_or_else(|| Error::Precondition(format!("no DPPSGD model for {} at C = {c}", self.id))),
        }
    }
}

fn non_private_model(fit: &DppsgdFit, seed: u64) -> PrivateModel {
    PrivateModel {
        weights: fit.weights.clone(),
        algorithm: Algorithm::NonPrivate,
        budget: PrivacyBudget::non_private(),
        partner_id: fit.partner_id.clone(),
        seed,
        degenerate_labels: fit.degenerate_labels,
    }
}

fn private_from_fit(fit: &DppsgdFit, cfg: &ExperimentConfig, purpose: &str, index: u64) -> Result<PrivateModel> {
    let mut rng = child_rng(cfg.seed, &fit.partner_id, purpose, index);
    fit.release(PrivacyBudget::pure(cfg.epsilon_main)?, cfg.seed, &mut rng)
}

fn amp_model(data: &PartnerDataset, cfg: &ExperimentConfig, purpose: &str) -> Result<PrivateModel> {
    let seed = child_seed(cfg.seed, &data.partner_id, purpose, 0);
    train_amp(data, &AmpHyperparams::defaults(data.m(), cfg.epsilon_main, seed)?)
}

/// Target's own model: private like everyone else's, or its noise-free fit.
fn own_model(
    cfg: &ExperimentConfig,
    algorithm: Algorithm,
    sf: &SplitFit,
    purpose: &str,
) -> Result<PrivateModel> {
    match (cfg.target_model, algorithm) {
        (TargetModel::NonPrivate, _) => Ok(non_private_model(&sf.fit, cfg.seed)),
        (TargetModel::Private, Algorithm::Amp) => amp_model(&sf.split.train, cfg, &format!("{purpose}-amp")),
        (TargetModel::Private, _) => private_from_fit(&sf.fit, cfg, &format!("{purpose}-noise"), 0),
    }
}

fn cap_rows(data: &PartnerDataset, max_rows: usize, seed: u64) -> PartnerDataset {
    if data.m() <= max_rows {
        return data.clone();
    }
    let mut rng: DpRng = crate::rng::rng_from_seed(seed);
    let mut rows = sample(&mut rng, data.m(), max_rows).into_vec();
    rows.sort_unstable();
    data.select(&rows)
}

fn build_panel(cfg: &ExperimentConfig, source: &PartnerSource, ramped_variant: bool) -> Result<Vec<PanelPartner>> {
    let algorithms = cfg.algorithm.algorithms();
    let mut grid = cfg.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut panel = Vec::with_capacity(source.n_partners());
    for k in 0..source.n_partners() {
        let pair = source.normalized_pair(k)?;
        let id = pair.cold.partner_id.clone();
        let cold = fit_split(cfg, &pair.cold, 0)?;
        let ramped = fit_split(cfg, &pair.ramped, 0)?;
        let cold_baseline = auc_of(cold.fit.weights.as_array(), &cold.split.test)?;
        let ramped_baseline = auc_of(ramped.fit.weights.as_array(), &ramped.split.test)?;

        let mut own_cold = BTreeMap::new();
        let mut own_ramped = BTreeMap::new();
        for &algorithm in &algorithms {
            own_cold.insert(algorithm, own_model(cfg, algorithm, &cold, "exp2-own-cold")?);
            if ramped_variant {
                own_ramped.insert(algorithm, own_model(cfg, algorithm, &ramped, "exp2-own-ramped")?);
            }
        }

        let train = &ramped.split.train;
        let mut shared_dppsgd = Vec::new();
        if algorithms.contains(&Algorithm::Dppsgd) {
            for (ci, &c) in grid.iter().enumerate() {
                let seed = child_seed(cfg.seed, &id, "exp2-shared-fit", ci as u64);
                let hp = DppsgdHyperparams::defaults(train.m(), c, cfg.epsilon_main, seed)?;
                shared_dppsgd.push((c, train_dppsgd(train, &hp)?));
            }
        }
        let shared_amp = if algorithms.contains(&Algorithm::Amp) {
            Some(amp_model(train, cfg, "exp2-shared-amp")?)
        } else {
            None
        };
        let ramped_eval = if ramped_variant {
            let rows_seed = child_seed(cfg.seed, &id, "stacker-rows-ramped", 0);
            Some((cap_rows(train, cfg.stacker_max_rows, rows_seed), ramped.split.test.clone()))
        } else {
            None
        };
        panel.push(PanelPartner {
            id,
            cold_train: cold.split.train.clone(),
            cold_test: cold.split.test.clone(),
            cold_c: cold.c,
            cold_baseline,
            ramped_train_size: train.m(),
            ramped_c: ramped.c,
            ramped_baseline,
            own_cold,
            own_ramped,
            shared_dppsgd,
            shared_amp,
            ramped_eval,
        });
    }
    Ok(panel)
}

/// Stacks `models` on the target's training rows and scores the test rows.
fn ensemble_auc(
    cfg: &ExperimentConfig,
    target: &str,
    train: &PartnerDataset,
    test: &PartnerDataset,
    models: Vec<PrivateModel>,
) -> Result<f64> {
    let rows = cap_rows(train, cfg.stacker_max_rows, child_seed(cfg.seed, target, "stacker-rows", 0));
    let (ensemble, _) = train_ensemble(target, rows.x.view(), rows.y.view(), models, &cfg.gbdt, cfg.seed)?;
    let margins = ensemble_margins(&ensemble, test.x.view())?;
    auc(slice(&margins), slice(&test.y))
}

/// Cold-start ensemble AUC for `target` using the shared models of `others`.
fn cold_ensemble_auc<'a>(
    cfg: &ExperimentConfig,
    algorithm: Algorithm,
    target: &PanelPartner,
    others: impl Iterator<Item = &'a PanelPartner>,
) -> Result<f64> {
    let mut models = vec![target.own_cold[&algorithm].clone()];
    for q in others {
        models.push(q.shared(algorithm, target.cold_c)?.clone());
    }
    ensemble_auc(cfg, &target.id, &target.cold_train, &target.cold_test, models)
}

// ---------------------------------------------------------------------------
// Experiment 2: aggregation over all partners

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment2Row {
    pub partner: String,
    pub algorithm: Algorithm,
    pub cold_train_size: usize,
    pub ramped_train_size: usize,
    pub tuned_c: f64,
    pub cold_baseline_auc: f64,
    pub ramped_baseline_auc: f64,
    pub ensemble_auc: f64,
    pub lift_vs_cold: f64,
    pub lift_vs_ramped: f64,
    pub ramped_ensemble_auc: Option<f64>,
    /// Lift of the all-ramped-up ensemble over the ramped-up baseline.
    pub ramped_variant_lift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment2Summary {
    pub mean_lift_vs_cold: f64,
    pub mean_lift_vs_ramped: f64,
    pub mean_ramped_variant_lift: Option<f64>,
    pub partners_with_positive_lift: usize,
    pub n_partners: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment2Report {
    pub rows: Vec<Experiment2Row>,
    pub summary: BTreeMap<Algorithm, Experiment2Summary>,
}

/// Each partner in turn is the target: its own cold-start model plus every
/// other partner's released ramped-up model feed a stacker trained on the
/// target's cold-start training rows.
pub fn run_experiment2(cfg: &ExperimentConfig) -> Result<Experiment2Report> {
    cfg.validate()?;
    let source = PartnerSource::from_config(cfg)?;
    if source.n_partners() < 2 {
        return Err(Error::Precondition("experiment 2 needs at least 2 partners".into()));
    }
    let panel = build_panel(cfg, &source, cfg.ramped_variant)?;
    let mut rows = Vec::new();
    let mut summary = BTreeMap::new();
    for algorithm in cfg.algorithm.algorithms() {
        let mut lifts = Vec::new();
        let mut ramped_lifts = Vec::new();
        let mut lifts_vs_ramped = Vec::new();
        for (p, target) in panel.iter().enumerate() {
            let others = panel.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, x)| x);
            let ens_auc = cold_ensemble_auc(cfg, algorithm, target, others)?;

            let (ramped_ensemble_auc, ramped_variant_lift) = match &target.ramped_eval {
                Some((train, test)) => {
                    let mut models = vec![target.own_ramped[&algorithm].clone()];
                    for (q, other) in panel.iter().enumerate() {
                        if q != p {
                            models.push(other.shared(algorithm, target.ramped_c)?.clone());
                        }
                    }
                    let a = ensemble_auc(cfg, &target.id, train, test, models)?;
                    let lift = relative_lift(a, target.ramped_baseline)?;
                    ramped_lifts.push(lift);
                    (Some(a), Some(lift))
                }
                None => (None, None),
            };
            let lift_vs_cold = relative_lift(ens_auc, target.cold_baseline)?;
            let lift_vs_ramped = relative_lift(ens_auc, target.ramped_baseline)?;
            lifts.push(lift_vs_cold);
            lifts_vs_ramped.push(lift_vs_ramped);
            rows.push(Experiment2Row {
                partner: target.id.clone(),
                algorithm,
                cold_train_size: target.cold_train.m(),
                ramped_train_size: target.ramped_train_size,
                tuned_c: target.cold_c,
                cold_baseline_auc: target.cold_baseline,
                ramped_baseline_auc: target.ramped_baseline,
                ensemble_auc: ens_auc,
                lift_vs_cold,
                lift_vs_ramped,
                ramped_ensemble_auc,
                ramped_variant_lift,
            });
        }
        summary.insert(
            algorithm,
            Experiment2Summary {
                mean_lift_vs_cold: mean(&lifts),
                mean_lift_vs_ramped: mean(&lifts_vs_ramped),
                mean_ramped_variant_lift: (!ramped_lifts.is_empty()).then(|| mean(&ramped_lifts)),
                partners_with_positive_lift: lifts.iter().filter(|&&l| l > 0.0).count(),
                n_partners: lifts.len(),
            },
        );
    }
    Ok(Experiment2Report { rows, summary })
}

// ---------------------------------------------------------------------------
// Experiment 3: number of partners

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment3Row {
    pub algorithm: Algorithm,
    pub k: usize,
    pub repeat: usize,
    pub partners: Vec<String>,
    /// Mean cold-start lift over the targets in the subset.
    pub mean_lift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment3Point {
    pub algorithm: Algorithm,
    pub k: usize,
    pub mean_lift: f64,
    pub lift_variance: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment3Report {
    pub rows: Vec<Experiment3Row>,
    pub points: Vec<Experiment3Point>,
}

impl Experiment3Report {
    pub fn point(&self, algorithm: Algorithm, k: usize) -> Option<&Experiment3Point> {
        self.points.iter().find(|p| p.algorithm == algorithm && p.k == k)
    }
}

/// For each `k`, draws `n_subsample_repeats` subsets of `k` partners. Within a
/// subset every member is a target aggregating the others' models; the
/// subset's value is the mean lift over its members.
pub fn run_experiment3(cfg: &ExperimentConfig) -> Result<Experiment3Report> {
    cfg.validate()?;
    let source = PartnerSource::from_config(cfg)?;
    let n = source.n_partners();
    if let Some(&k) = cfg.partner_counts.iter().find(|&&k| k > n) {
        return Err(Error::Precondition(format!("partner count {k} exceeds the {n} available partners")));
    }
    let panel = build_panel(cfg, &source, false)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for algorithm in cfg.algorithm.algorithms() {
        for &k in &cfg.partner_counts {
            let mut values = Vec::with_capacity(cfg.n_subsample_repeats);
            for r in 0..cfg.n_subsample_repeats {
                let mut rng = child_rng(cfg.seed, &format!("k{k}"), "exp3-subset", r as u64);
                let mut subset = sample(&mut rng, n, k).into_vec();
                subset.sort_unstable();
                let mut lifts = Vec::with_capacity(k);
                for &p in &subset {
                    let target = &panel[p];
                    let others = subset.iter().filter(|&&q| q != p).map(|&q| &panel[q]);
                    let a = cold_ensemble_auc(cfg, algorithm, target, others)?;
                    lifts.push(relative_lift(a, target.cold_baseline)?);
                }
                let value = mean(&lifts);
                values.push(value);
                rows.push(Experiment3Row {
                    algorithm,
                    k,
                    repeat: r,
                    partners: subset.iter().map(|&p| panel[p].id.clone()).collect(),
                    mean_lift: value,
                });
            }
            points.push(Experiment3Point {
                algorithm,
                k,
                mean_lift: mean(&values),
                lift_variance: sample_variance(&values),
                repeats: values.len(),
            });
        }
    }
    Ok(Experiment3Report { rows, points })
}

// ---------------------------------------------------------------------------
// Privacy audit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub mechanism: String,
    /// The ε the mechanism was built for; `None` for a non-private mechanism.
    pub mechanism_epsilon: Option<f64>,
    pub expected_pass: bool,
    pub outcome: AuditOutcome,
}

impl AuditRow {
    pub fn as_expected(&self) -> bool {
        self.outcome.passed == self.expected_pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
}

/// The 1-D toy pair: `records` points on a grid in `[-1, 1]` with a threshold
/// label; the neighbour replaces the last record with its mirror image and
/// flipped label. Both are normalized with `t = 1` and bias 1.
pub fn audit_toy_pair(records: usize) -> Result<(PartnerDataset, PartnerDataset)> {
    if records < 2 {
        return Err(Error::Configuration("the audit toy pair needs at least 2 records".into()));
    }
    let xs: Vec<f64> = (0..records).map(|i| -1.0 + 2.0 * i as f64 / (records - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
    let make = |xs: Vec<f64>, ys: Vec<f64>, id: &str| -> Result<PartnerDataset> {
        let raw = Array2::from_shape_vec((xs.len(), 1), xs).map_err(|e| Error::Configuration(e.to_string()))?;
        let norm = normalize_records(raw.view(), 1, &NormalizationConfig::new(1.0, 1.0)?)?;
        let y: Array1<f64> = norm.kept.iter().map(|&i| ys[i]).collect();
        PartnerDataset::new(id, Period::ColdStart, norm.x, y, 1)
    };
    let mut xs2 = xs.clone();
    let mut ys2 = ys.clone();
    let last = records - 1;
    xs2[last] = -xs[last];
    ys2[last] = 1.0 - ys[last];
    let a = make(xs, ys, "audit")?;
    let b = make(xs2, ys2, "audit")?;
    debug_assert!(differ_in_one_record(&a, &b));
    Ok((a, b))
}

fn randomized_response(bit: bool, epsilon: f64, rng: &mut DpRng) -> Vec<f64> {
    use rand::Rng;
    let flip = rng.random::<f64>() < 1.0 / (1.0 + epsilon.exp());
    vec![if bit ^ flip { 1.0 } else { 0.0 }]
}

/// Randomized response at its own ε and at half of it, a noise-free mean and
/// DPPSGD's first weight coordinate on the toy pair.
pub fn run_audit_suite(cfg: &ExperimentConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let settings = &cfg.audit;
    let trials = settings.trials;
    let mut rows = Vec::new();

    let rr_eps = settings.randomized_response_epsilon;
    let bits = Binning::new(vec![vec![0.5]])?;
    let rr = |b: &bool, rng: &mut DpRng| Ok(randomized_response(*b, rr_eps, rng));
    for (test_eps, expected) in [(rr_eps, true), (rr_eps / 2.0, false)] {
        let seed = child_seed(cfg.seed, "audit", "randomized-response", rows.len() as u64);
        rows.push(AuditRow {
            mechanism: "randomized_response".into(),
            mechanism_epsilon: Some(rr_eps),
            expected_pass: expected,
            outcome: empirical_dp_check(rr, &true, &false, test_eps, 0.0, trials, &bits, seed)?,
        });
    }

    let (toy, toy_neighbor) = audit_toy_pair(settings.records)?;
    if !differ_in_one_record(&toy, &toy_neighbor) {
        return Err(Error::Precondition("audit datasets must differ in exactly one record".into()));
    }

    let mean_release = |d: &PartnerDataset, _: &mut DpRng| Ok(vec![d.x.column(0).sum() / d.m() as f64]);
    let pilot = vec![
        vec![toy.x.column(0).sum() / toy.m() as f64],
        vec![toy_neighbor.x.column(0).sum() / toy_neighbor.m() as f64],
    ];
    let bins = Binning::from_pilot(&pilot, 2)?;
    rows.push(AuditRow {
        mechanism: "noise_free_mean".into(),
        mechanism_epsilon: None,
        expected_pass: false,
        outcome: empirical_dp_check(
            mean_release,
            &toy,
            &toy_neighbor,
            settings.randomized_response_epsilon,
            0.0,
            trials,
            &bins,
            child_seed(cfg.seed, "audit", "noise-free-mean", 0),
        )?,
    });

    let eps = settings.epsilon;
    let dppsgd_first = |d: &PartnerDataset, rng: &mut DpRng| -> Result<Vec<f64>> {
        use rand::RngCore;
        let hp = DppsgdHyperparams::defaults(d.m(), cfg.c_grid[0], eps, rng.next_u64())?;
        Ok(vec![train_dppsgd(d, &hp)?.weights.as_array()[0]])
    };
    let mut pilot_rng = child_rng(cfg.seed, "audit", "dppsgd-pilot", 0);
    let mut pilot = Vec::with_capacity(4000);
    for d in [&toy, &toy_neighbor] {
        for _ in 0..2000 {
            pilot.push(dppsgd_first(d, &mut pilot_rng)?);
        }
    }
    let bins = Binning::from_pilot(&pilot, settings.bins)?;
    rows.push(AuditRow {
        mechanism: "dppsgd_first_coordinate".into(),
        mechanism_epsilon: Some(eps),
        expected_pass: true,
        outcome: empirical_dp_check(
            dppsgd_first,
            &toy,
            &toy_neighbor,
            eps,
            0.0,
            trials,
            &bins,
            child_seed(cfg.seed, "audit", "dppsgd", 0),
        )?,
    });
    Ok(AuditReport { rows })
}
