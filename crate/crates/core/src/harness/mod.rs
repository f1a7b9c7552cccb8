//! Experiment orchestration: TOML configs, multi-seed runs, the results
//! store, external score ingestion, and report emission.
//!
//! Store layout under the output directory:
//!
//! - `scores.csv`: `language,model,metric,seed,value` (internal runs)
//! - `aggregates.csv`: `language,model,metric,mean,sd` (all models)
//! - `languages.csv`: training size and MATTR per language
//! - `failures.csv`: runs that did not finish
//! - `manifests/<lang>_seed<n>.json`: config hash, data checksums, result
//! - `report/*.tsv`: report tables and plot data

mod config;
mod report;
mod run;
mod store;

pub use config::{ExperimentConfig, LanguageConfig, ModelKind, SyntheticLanguage};
pub use report::{
    check_baseline, emit_report, language_order, mattr_lrt, mattr_table, rer_table, scaling_fit,
    scaling_observations, AnalysisOptions, MattrRow, ReportBundle, RerEntry, ScalingSummary,
};
pub use run::{
    collect_language_info, prepare_language, run_experiment, search_language, write_outcome, ExperimentOutcome,
    PreparedLanguage, RunManifest,
};
pub use store::{
    ingest_external_scores, Aggregate, LanguageInfo, ResultsStore, RunFailure, ScoreSource,
    ScoreSummary, SeedScore, AGGREGATES_FILE, FAILURES_FILE, LANGUAGES_FILE, SCORES_FILE,
};
