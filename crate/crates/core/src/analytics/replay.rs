use serde::{Deserialize, Serialize};

use crate::bot::BotState;
use crate::model::{utility_vector, KnownnessMask, Proposal};
use crate::session::Transcript;

use super::AnalyticsError;

fn replay_bot(t: &Transcript) -> Result<BotState, AnalyticsError> {
    let mut bot = BotState::with_valence(&t.config.instance, t.config.target_valence());
    for e in t.persuader_events() {
        let c = e
            .classification
            .as_ref()
            .ok_or(AnalyticsError::MissingClassification(e.turn))?;
        if !c.disclosures.is_empty() {
            bot.ingest(&c.disclosures);
        }
    }
    Ok(bot)
}

/// The choice a fresh rational bot would make from the persuader's disclosures
/// alone, message by message, and whether it equals the persuader's goal.
pub fn rational_replay(t: &Transcript) -> Result<(Proposal, bool), AnalyticsError> {
    let choice = replay_bot(t)?.choice();
    Ok((choice, choice == t.config.instance.persuader_goal))
}

/// Whether the replayed bot ends with two or more proposals sharing the top utility.
pub fn ends_in_tie(t: &Transcript) -> Result<bool, AnalyticsError> {
    Ok(replay_bot(t)?.is_tied())
}

/// How the actual final choice compares with the replayed rational choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UtilityCategory {
    #[serde(rename = "R=T")]
    Agree,
    #[serde(rename = "U(T)=U(R)")]
    AsGood,
    #[serde(rename = "U(R)>U(T)")]
    Worse,
    #[serde(rename = "U(T)>U(R)")]
    Better,
}

impl UtilityCategory {
    pub fn label(self) -> &'static str {
        match self {
            UtilityCategory::Agree => "R=T",
            UtilityCategory::AsGood => "U(T)=U(R)",
            UtilityCategory::Worse => "U(R)>U(T)",
            UtilityCategory::Better => "U(T)>U(R)",
        }
    }
}

/// Compare under full information and the target's values.
pub fn utility_category(t: &Transcript) -> Result<UtilityCategory, AnalyticsError> {
    let (r, _) = rational_replay(t)?;
    let actual = t.final_choice;
    if r == actual {
        return Ok(UtilityCategory::Agree);
    }
    let u = utility_vector(&t.config.instance.matrix, &t.config.target_valence(), &KnownnessMask::ALL_KNOWN);
    Ok(match u[actual.index()].cmp(&u[r.index()]) {
        std::cmp::Ordering::Equal => UtilityCategory::AsGood,
        std::cmp::Ordering::Less => UtilityCategory::Worse,
        std::cmp::Ordering::Greater => UtilityCategory::Better,
    })
}
