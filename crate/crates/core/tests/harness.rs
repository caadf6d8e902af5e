use silo_dp::harness::{
    audit_toy_pair, run_audit_suite, run_baselines, run_command, run_experiment1, run_experiment2, run_experiment3,
    AlgorithmChoice, Command, ExperimentConfig, PartnerSource,
};
use silo_dp::model::Algorithm;

fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(
        r#"
seed = 11
n_splits = 2
n_noise_draws = 3
partner_counts = [2, 4]
n_subsample_repeats = 3
stacker_max_rows = 2000

[generator]
n_partners = 5
size_range = [400, 3000]

[normalization]
reference_size = 5000

[gbdt]
n_rounds = 10
max_depth = 3
learning_rate = 0.3
min_child_weight = 1.0

[audit]
trials = 10000
"#,
    )
    .unwrap()
}

#[test]
fn no_noise_row_equals_cold_baseline() {
    let cfg = small_config();
    let baselines = run_baselines(&cfg).unwrap();
    let exp1 = run_experiment1(&cfg).unwrap();
    assert_eq!(exp1.no_noise().unwrap().per_partner, baselines.cold.per_partner);
    let curve = exp1.mean_auc_curve(Algorithm::Dppsgd);
    assert_eq!(curve.len(), cfg.epsilon_grid.len());
    assert_eq!(exp1.rows.len(), cfg.epsilon_grid.len() + 1);
}

#[test]
fn experiment2_reports_every_partner_and_sizes() {
    let cfg = small_config();
    let report = run_experiment2(&cfg).unwrap();
    assert_eq!(report.rows.len(), 5);
    for row in &report.rows {
        assert!(row.cold_train_size > 0 && row.ramped_train_size > row.cold_train_size);
        assert!(row.ramped_variant_lift.is_some());
        assert!(cfg.c_grid.contains(&row.tuned_c));
    }
    let s = &report.summary[&Algorithm::Dppsgd];
    assert_eq!(s.n_partners, 5);
}

#[test]
fn clone_population_benefits_from_noise_free_aggregation() {
    let mut cfg = small_config();
    cfg.generator.shift_scale = 0.0;
    cfg.generator.mean_scale = 0.0;
    cfg.generator.scale_spread = 0.0;
    cfg.generator.size_range = (3000, 20000);
    cfg.generator.min_cold_size = 40;
    cfg.generator.cold_fraction = 0.01;
    cfg.epsilon_main = 1e12;
    cfg.ramped_variant = false;
    let report = run_experiment2(&cfg).unwrap();
    let s = &report.summary[&Algorithm::Dppsgd];
    assert!(s.mean_lift_vs_cold > 0.0, "{s:?}");
}

#[test]
fn experiment3_has_one_point_per_k() {
    let cfg = small_config();
    let report = run_experiment3(&cfg).unwrap();
    assert_eq!(report.points.len(), 2);
    assert_eq!(report.rows.len(), 2 * 3);
    for row in &report.rows {
        assert_eq!(row.partners.len(), row.k);
    }
    let mut too_many = cfg.clone();
    too_many.partner_counts = vec![6];
    assert_eq!(run_experiment3(&too_many).unwrap_err().kind(), "precondition");
}

#[test]
fn amp_runs_end_to_end() {
    let mut cfg = small_config();
    cfg.algorithm = AlgorithmChoice::Both;
    cfg.epsilon_grid = vec![0.1];
    cfg.n_splits = 1;
    cfg.n_noise_draws = 2;
    cfg.ramped_variant = false;
    let exp1 = run_experiment1(&cfg).unwrap();
    assert_eq!(exp1.mean_auc_curve(Algorithm::Amp).len(), 1);
    let exp2 = run_experiment2(&cfg).unwrap();
    assert!(exp2.summary.contains_key(&Algorithm::Amp));
    assert!(exp2.summary.contains_key(&Algorithm::Dppsgd));
}

#[test]
fn audit_suite_behaves_as_expected() {
    let cfg = small_config();
    let report = run_audit_suite(&cfg).unwrap();
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows {
        assert!(row.as_expected(), "{row:?}");
    }
    let (a, b) = audit_toy_pair(50).unwrap();
    assert_eq!(a.m(), 50);
    assert_eq!(b.m(), 50);
}

#[test]
fn generated_files_load_back() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    run_command(Command::Generate, &cfg, dir.path()).unwrap();
    let mut from_files = cfg.clone();
    from_files.data_dir = Some(dir.path().to_path_buf());
    let t = PartnerSource::from_config(&cfg).unwrap().normalization().t_norm;
    from_files.normalization.t_norm = Some(t);
    let synthetic = PartnerSource::from_config(&cfg).unwrap();
    let loaded = PartnerSource::from_config(&from_files).unwrap();
    assert_eq!(loaded.partner_ids(), synthetic.partner_ids());
    let a = synthetic.normalized_pair(2).unwrap();
    let b = loaded.normalized_pair(2).unwrap();
    assert_eq!(a.cold.y, b.cold.y);
    assert_eq!(a.ramped.x, b.ramped.x);
}

#[test]
fn reports_are_byte_identical_on_rerun() {
    let cfg = small_config();
    for command in [Command::Baseline, Command::Exp2] {
        let first = tempfile::tempdir().unwrap();
        let second = tempfile::tempdir().unwrap();
        let a = run_command(command, &cfg, first.path()).unwrap();
        let b = run_command(command, &cfg, second.path()).unwrap();
        assert_eq!(a.len(), b.len());
        for (fa, fb) in a.iter().zip(&b) {
            assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap(), "{}", fa.display());
        }
    }
}

#[test]
fn shipped_configs_parse() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let full = ExperimentConfig::load(root.join("default.toml")).unwrap();
    assert_eq!(full, ExperimentConfig::default());
    let small = ExperimentConfig::load(root.join("small.toml")).unwrap();
    assert_eq!(small.generator.n_partners, 6);
}
