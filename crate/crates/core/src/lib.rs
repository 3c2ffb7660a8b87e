//! Persuasion games between a persuader and a target with hidden information.
//!
//! The target sees only part of a 3x3 payoff matrix and picks the proposal
//! with the highest utility under its valences. The persuader wins when the
//! target's final choice equals the persuader's goal.

pub mod agents;
pub mod analytics;
pub mod bot;
pub mod classify;
pub mod forge;
pub mod llm;
pub mod model;
pub mod scenario;
pub mod session;
pub mod transcript;

pub use bot::{BotState, Claim, ResponsePlan};
pub use classify::{Classification, Classifier, ClassifierKind};
pub use forge::{check_instance, generate, GenerateOptions};
pub use model::{CellMask, Effect, GameInstance, PayoffMatrix, Proposal, Valence, ValenceVector};
pub use scenario::Scenario;
pub use session::{run_bot_game, Session, SessionConfig, Transcript};
