//! End-to-end experiments, baselines and the empirical privacy audit.
//!
//! Every run is a pure function of an [`ExperimentConfig`] (which carries the
//! root seed); reports are assembled with ordered maps so a rerun writes
//! byte-identical files.

pub mod audit;
pub mod commands;
pub mod config;
pub mod experiments;
pub mod report;
pub mod source;

pub use commands::{run_command, Command};
pub use audit::{empirical_dp_check, AuditOutcome, Binning};
pub use config::{AlgorithmChoice, ExperimentConfig, TargetModel};
pub use experiments::{
    audit_toy_pair, run_audit_suite, run_baselines, run_experiment1, run_experiment2, run_experiment3, AuditReport,
    AuditRow, BaselineReport, BaselineRow, Experiment1Report, Experiment1Row, Experiment2Report, Experiment2Row,
    Experiment2Summary, Experiment3Point, Experiment3Report, Experiment3Row,
};
pub use source::PartnerSource;
