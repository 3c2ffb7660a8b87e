#![allow(dead_code)]

use std::sync::Arc;

use mindgames_core::agents::{AgentError, AgentView, Persuader, PersuaderKind};
use mindgames_core::classify::{ClassifierKind, StructuredClassifier};
use mindgames_core::forge::{generate, GenerateOptions};
use mindgames_core::model::{GameInstance, Proposal};
use mindgames_core::scenario;
use mindgames_core::session::{run_bot_game, Condition, Mode, Role, Session, SessionConfig, TargetKind, Transcript};

pub struct Scripted(pub Vec<String>);

impl Persuader for Scripted {
    fn next_message(&mut self, _: &AgentView) -> Result<Option<String>, AgentError> {
        Ok(if self.0.is_empty() { None } else { Some(self.0.remove(0)) })
    }
}

pub fn instances(seed: u64, scenario_id: &str, n: usize) -> Vec<GameInstance> {
    generate(seed, &scenario::by_id(scenario_id).unwrap(), n, &GenerateOptions::default()).unwrap()
}

pub fn bot_game(instance: GameInstance, condition: Condition, lines: &[&str]) -> Transcript {
    let cfg = SessionConfig::bot_game(instance, condition, PersuaderKind::Human, ClassifierKind::Structured);
    let mut p = Scripted(lines.iter().map(|s| s.to_string()).collect());
    run_bot_game(cfg, Arc::new(StructuredClassifier), &mut p).unwrap()
}

/// A human-target game driven through the structured channel.
pub fn human_game(
    instance: GameInstance,
    pre: Proposal,
    exchanges: &[(&str, Option<&str>)],
    final_choice: Proposal,
) -> Transcript {
    let mut cfg = SessionConfig::bot_game(instance, Condition::Hidden, PersuaderKind::Human, ClassifierKind::Structured);
    cfg.target_kind = TargetKind::Human;
    cfg.mode = Mode::RolePlay;
    let mut s = Session::new(cfg, Arc::new(StructuredClassifier)).unwrap();
    s.pre_choice(pre).unwrap();
    for (persuader, target) in exchanges {
        s.post(Role::Persuader, persuader).unwrap();
        if let Some(t) = target {
            s.post(Role::Target, t).unwrap();
        }
    }
    s.final_choice(final_choice).unwrap();
    s.transcript().unwrap()
}

pub fn disclose_line(inst: &GameInstance, cells: impl IntoIterator<Item = mindgames_core::model::Cell>) -> String {
    cells
        .into_iter()
        .map(|c| format!("DISCLOSE {} {} {}", c.proposal, c.attribute.index(), inst.matrix.effect(c).token()))
        .collect::<Vec<_>>()
        .join("\n")
}
