use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{knownness_from, strict_argmax, utility_vector, CellMask, Proposal, Valence, ValenceVector};
use crate::session::{TargetKind, Transcript};

use super::AnalyticsError;

/// One answer to "would you prefer if <attribute> ...".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LikertResponse {
    #[serde(rename = "Increased a lot")]
    IncreasedALot,
    #[serde(rename = "Increased")]
    Increased,
    #[serde(rename = "Stayed the same")]
    StayedTheSame,
    #[serde(rename = "Decreased")]
    Decreased,
    #[serde(rename = "Decreased a lot")]
    DecreasedALot,
}

impl LikertResponse {
    pub const ALL: [LikertResponse; 5] = [
        LikertResponse::IncreasedALot,
        LikertResponse::Increased,
        LikertResponse::StayedTheSame,
        LikertResponse::Decreased,
        LikertResponse::DecreasedALot,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LikertResponse::IncreasedALot => "Increased a lot",
            LikertResponse::Increased => "Increased",
            LikertResponse::StayedTheSame => "Stayed the same",
            LikertResponse::Decreased => "Decreased",
            LikertResponse::DecreasedALot => "Decreased a lot",
        }
    }
}

impl FromStr for LikertResponse {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        LikertResponse::ALL
            .into_iter()
            .find(|r| r.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| AnalyticsError::UnknownLabel(s.to_string()))
    }
}

pub fn likert_to_valence(response: LikertResponse) -> Valence {
    match response {
        LikertResponse::IncreasedALot | LikertResponse::Increased => Valence::Like,
        LikertResponse::StayedTheSame => Valence::Indifferent,
        LikertResponse::Decreased | LikertResponse::DecreasedALot => Valence::Dislike,
    }
}

/// Valence vector from one answer per attribute.
pub fn infer_valence(responses: [LikertResponse; 3]) -> ValenceVector {
    ValenceVector::new(responses.map(likert_to_valence))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExclusionMode {
    Assigned,
    Inferred,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Excluded {
    pub transcript: Transcript,
    pub reason: String,
}

fn initial_best(t: &Transcript, valence: &ValenceVector) -> Option<Proposal> {
    let inst = &t.config.instance;
    let known = knownness_from(inst.hidden, CellMask::EMPTY).ok()?;
    strict_argmax(&utility_vector(&inst.matrix, valence, &known))
}

/// Keep human-target games whose pre-choice was the strict best option on the
/// initially visible cells. Bot-target games are always kept.
pub fn exclusion_filter(transcripts: Vec<Transcript>, mode: ExclusionMode) -> (Vec<Transcript>, Vec<Excluded>) {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for t in transcripts {
        if t.config.target_kind == TargetKind::Bot {
            kept.push(t);
            continue;
        }
        let valence = match mode {
            ExclusionMode::Assigned => Some(t.config.instance.target_valence),
            ExclusionMode::Inferred => t.config.inferred_valence,
        };
        let reason = match (t.pre_choice, valence) {
            (None, _) => Some("missing pre-choice".to_string()),
            (Some(_), None) => Some("missing inferred valence".to_string()),
            (Some(pre), Some(v)) => match initial_best(&t, &v) {
                Some(best) if best == pre => None,
                Some(best) => Some(format!("pre-choice {pre} is not the initial best {best}")),
                None => Some("no strict initial best under these values".to_string()),
            },
        };
        match reason {
            None => kept.push(t),
            Some(reason) => excluded.push(Excluded { transcript: t, reason }),
        }
    }
    (kept, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn likert_coding() {
        assert_eq!(likert_to_valence("Decreased a lot".parse().unwrap()), Valence::Dislike);
        assert_eq!(likert_to_valence("Stayed the same".parse().unwrap()), Valence::Indifferent);
        assert_eq!(likert_to_valence("Increased".parse().unwrap()), Valence::Like);
        assert!("Somewhat more".parse::<LikertResponse>().is_err());
        let image: std::collections::HashSet<_> = LikertResponse::ALL.into_iter().map(likert_to_valence).collect();
        assert_eq!(image.len(), 3);
    }

    #[test]
    fn serde_labels() {
        assert_eq!(serde_json::to_string(&LikertResponse::StayedTheSame).unwrap(), "\"Stayed the same\"");
    }
}
