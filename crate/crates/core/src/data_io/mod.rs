//! Dataset model, CSV ingestion, configuration and output writers.

mod config;
mod dataset;
mod report;
mod scatter;

pub use config::{
    AnalysisConfig, EpsilonChoice, GammaChoice, HopkinsProbes, KernelKind, CONFIG_KEYS,
};
pub use dataset::{
    parse_dataset, read_dataset, serialize_dataset, write_dataset, RepeatedMeasuresDataset,
};
pub use report::{
    read_report, read_score_table, write_report, write_scores_csv, ClusterabilitySection,
    ComponentReport, Report, ScoreTable,
};
pub use scatter::{render_scatter, write_scatter};
