//! JSONL codecs for transcripts and instance corpora.
//!
//! A transcript is a block of lines: one `game` header, its `message` lines,
//! `choice` lines, and a closing `outcome`. Files hold any number of blocks.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GameInstance, Proposal};
use crate::session::{ChoiceStage, MessageEvent, SessionConfig, Transcript};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {reason}")]
    Structure { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Line {
    Game(Box<SessionConfig>),
    Message(MessageEvent),
    Choice {
        stage: ChoiceStage,
        proposal: Proposal,
    },
    Outcome {
        success: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        incomplete: Option<String>,
    },
}

pub fn transcript_lines(t: &Transcript) -> Vec<Line> {
    let mut lines = vec![Line::Game(Box::new(t.config.clone()))];
    if let Some(p) = t.pre_choice {
        lines.push(Line::Choice {
            stage: ChoiceStage::Pre,
            proposal: p,
        });
    }
    lines.extend(t.events.iter().cloned().map(Line::Message));
    lines.push(Line::Choice {
        stage: ChoiceStage::Final,
        proposal: t.final_choice,
    });
    lines.push(Line::Outcome {
        success: t.success,
        incomplete: t.incomplete.clone(),
    });
    lines
}

pub fn to_jsonl(t: &Transcript) -> String {
    let mut out = String::new();
    for line in transcript_lines(t) {
        out.push_str(&serde_json::to_string(&line).expect("transcript lines serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<W: Write>(mut w: W, transcripts: &[Transcript]) -> std::io::Result<()> {
    for t in transcripts {
        w.write_all(to_jsonl(t).as_bytes())?;
    }
    Ok(())
}

#[derive(Default)]
struct Partial {
    config: Option<SessionConfig>,
    events: Vec<MessageEvent>,
    pre: Option<Proposal>,
    fin: Option<Proposal>,
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<Transcript>, CodecError> {
    let mut out = Vec::new();
    let mut cur: Option<Partial> = None;
    for (n, raw) in r.lines().enumerate() {
        let line = n + 1;
        let raw = raw?;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&raw).map_err(|source| CodecError::Json { line, source })?;
        let structure = |reason: &str| CodecError::Structure {
            line,
            reason: reason.to_string(),
        };
        match parsed {
            Line::Game(config) => {
                if cur.is_some() {
                    return Err(structure("game header before previous outcome"));
                }
                cur = Some(Partial {
                    config: Some(*config),
                    ..Default::default()
                });
            }
            Line::Message(e) => cur
                .as_mut()
                .ok_or_else(|| structure("message outside a game"))?
                .events
                .push(e),
            Line::Choice { stage, proposal } => {
                let p = cur.as_mut().ok_or_else(|| structure("choice outside a game"))?;
                match stage {
                    ChoiceStage::Pre => p.pre = Some(proposal),
                    ChoiceStage::Final => p.fin = Some(proposal),
                }
            }
            Line::Outcome {
                success,
                incomplete,
            } => {
                let p = cur.take().ok_or_else(|| structure("outcome outside a game"))?;
                let final_choice = p.fin.ok_or_else(|| structure("game has no final choice"))?;
                let config = p.config.expect("set with header");
                if success != (final_choice == config.instance.persuader_goal) {
                    return Err(structure("outcome disagrees with final choice"));
                }
                out.push(Transcript {
                    config,
                    events: p.events,
                    pre_choice: p.pre,
                    final_choice,
                    success,
                    incomplete,
                });
            }
        }
    }
    if cur.is_some() {
        return Err(CodecError::Structure {
            line: 0,
            reason: "file ends inside a game".into(),
        });
    }
    Ok(out)
}

/// Parse an instance corpus: either one JSON array or one instance per line.
pub fn read_instances(text: &str) -> Result<Vec<GameInstance>, CodecError> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|source| CodecError::Json { line: 1, source });
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|source| CodecError::Json { line: n + 1, source }))
        .collect()
}

pub fn instances_to_jsonl(instances: &[GameInstance]) -> String {
    instances
        .iter()
        .map(|i| serde_json::to_string(i).expect("instances serialize") + "\n")
        .collect()
}
