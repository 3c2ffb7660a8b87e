//! Derived quantities over instances and transcripts.

mod baseline;
mod bootstrap;
mod metrics;
mod replay;
mod selection;
mod survey;

pub use baseline::{p_win_closed, p_win_oracle, simulate_random_baseline, CHANCE_LINE, NAIVE_CHANCE_LINE};
pub use bootstrap::{bootstrap_ci, DEFAULT_BOOTSTRAP_ITERATIONS};
pub use metrics::{METRICS_HEADER, 
    count_moves, metrics_csv, persuasion_success, tidy_csv, GroupField, MetricsReport, MoveCounts,
};
pub use replay::{ends_in_tie, rational_replay, utility_category, UtilityCategory};
pub use selection::select_game;
pub use survey::{exclusion_filter, infer_valence, likert_to_valence, Excluded, ExclusionMode, LikertResponse};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("input is empty")]
    EmptyInput,
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error("confidence level must lie in (0, 1)")]
    BadLevel,
    #[error("persuader message at turn {0} has no classification")]
    MissingClassification(usize),
    #[error("every instance in the pool has been seen")]
    PoolExhausted,
    #[error("unknown survey label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
