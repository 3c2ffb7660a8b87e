//! Persuader agents and the view they act on.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bot::{render_facts, render_valence, Claim};
use crate::classify::Classification;
use crate::llm::{ChatClient, ChatMessage, LlmError};
use crate::model::{
    strict_argmax, utility_vector, Cell, CellMask, KnownnessMask, PayoffMatrix, Proposal,
    ValenceVector, CELLS,
};
use crate::scenario::Scenario;
use crate::session::{Condition, MessageEvent, Role};

pub const DEFAULT_MESSAGE_CHARS: usize = 300;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("no disclosure subset makes proposal {0} the strict favourite")]
    NoWinningSubset(Proposal),
    #[error("target never answered the {0} question")]
    MissingAnswer(&'static str),
    #[error("llm persuader failed: {0}")]
    Llm(#[from] LlmError),
}

/// What the target's mind looks like to a persuader in the revealed condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetMentalState {
    pub valence: ValenceVector,
    pub known_cells: CellMask,
}

/// Everything a persuader may see. Target mental state is present only when revealed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentView {
    pub scenario: Scenario,
    pub matrix: PayoffMatrix,
    pub persuader_goal: Proposal,
    pub persuader_valence: Option<ValenceVector>,
    pub condition: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetMentalState>,
    pub history: Vec<MessageEvent>,
}

/// Produces the persuader's next message, or `None` when it has nothing more to say.
pub trait Persuader: Send {
    fn next_message(&mut self, view: &AgentView) -> Result<Option<String>, AgentError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PersuaderKind {
    Human,
    Optimal,
    Random,
    Llm,
}

/// `draws` cell indices in `0..9`, uniform and with replacement.
pub fn persuader_random(seed: u64, draws: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws).map(|_| rng.gen_range(0..CELLS)).collect()
}

fn disclose_line(matrix: &PayoffMatrix, cell: Cell) -> String {
    Classification {
        disclosures: vec![Claim::new(cell.proposal, cell.attribute, matrix.effect(cell))],
        ..Default::default()
    }
    .to_structured()
}

/// Discloses one randomly drawn cell per turn, with its true effect.
pub struct RandomPersuader {
    schedule: Vec<usize>,
    next: usize,
}

impl RandomPersuader {
    pub fn new(seed: u64, draws: usize) -> Self {
        RandomPersuader {
            schedule: persuader_random(seed, draws),
            next: 0,
        }
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }
}

impl Persuader for RandomPersuader {
    fn next_message(&mut self, view: &AgentView) -> Result<Option<String>, AgentError> {
        let Some(&index) = self.schedule.get(self.next) else {
            return Ok(None);
        };
        self.next += 1;
        let cell = Cell::from_index(index).expect("schedule draws are in range");
        Ok(Some(disclose_line(&view.matrix, cell)))
    }
}

/// Smallest set of target-unknown cells whose truthful disclosure makes `goal`
/// the strict maximum; ties on size go to the lowest bitmask.
pub fn minimal_winning_subset(
    matrix: &PayoffMatrix,
    valence: &ValenceVector,
    known: CellMask,
    goal: Proposal,
) -> Option<CellMask> {
    let mut candidates = known.complement().subsets();
    candidates.sort_by_key(|s| (s.len(), s.bits()));
    candidates.into_iter().find(|s| {
        let k = KnownnessMask::from_known(known.union(*s));
        strict_argmax(&utility_vector(matrix, valence, &k)) == Some(goal)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AskValues,
    AskInfo,
    Disclose,
    Done,
}

/// Scripted persuader for the rational bot over the structured channel.
///
/// Revealed: one message disclosing a minimal winning subset.
/// Hidden: ask for values, ask what is known, then disclose.
pub struct OptimalPersuader {
    phase: Phase,
    disclosed: Option<CellMask>,
}

impl OptimalPersuader {
    pub fn new() -> Self {
        OptimalPersuader {
            phase: Phase::AskValues,
            disclosed: None,
        }
    }

    /// The subset disclosed so far, if any.
    pub fn disclosed(&self) -> Option<CellMask> {
        self.disclosed
    }

    fn disclose(
        &mut self,
        view: &AgentView,
        valence: ValenceVector,
        known: CellMask,
    ) -> Result<Option<String>, AgentError> {
        let subset = minimal_winning_subset(&view.matrix, &valence, known, view.persuader_goal)
            .ok_or(AgentError::NoWinningSubset(view.persuader_goal))?;
        self.disclosed = Some(subset);
        self.phase = Phase::Done;
        let c = Classification {
            disclosures: subset
                .cells()
                .map(|cell| Claim::new(cell.proposal, cell.attribute, view.matrix.effect(cell)))
                .collect(),
            ..Default::default()
        };
        Ok(Some(c.to_structured()))
    }
}

impl Default for OptimalPersuader {
    fn default() -> Self {
        Self::new()
    }
}

fn target_plans(view: &AgentView) -> impl Iterator<Item = &crate::bot::ResponsePlan> {
    view.history
        .iter()
        .rev()
        .filter(|e| e.role == Role::Target)
        .filter_map(|e| e.response.as_ref())
}

impl Persuader for OptimalPersuader {
    fn next_message(&mut self, view: &AgentView) -> Result<Option<String>, AgentError> {
        if self.phase == Phase::Done {
            return Ok(None);
        }
        if let Some(target) = &view.target {
            return self.disclose(view, target.valence, target.known_cells);
        }
        match self.phase {
            Phase::AskValues => {
                self.phase = Phase::AskInfo;
                Ok(Some("ASK-VALUES".to_string()))
            }
            Phase::AskInfo => {
                self.phase = Phase::Disclose;
                Ok(Some("ASK-INFO".to_string()))
            }
            Phase::Disclose => {
                let valence = target_plans(view)
                    .find_map(|p| p.valence())
                    .ok_or(AgentError::MissingAnswer("values"))?;
                let known: CellMask = target_plans(view)
                    .find_map(|p| {
                        p.segments.iter().find_map(|s| match s {
                            crate::bot::Segment::FactAnswer { scope: None, facts } => {
                                Some(facts.iter().map(Claim::cell).collect())
                            }
                            _ => None,
                        })
                    })
                    .ok_or(AgentError::MissingAnswer("information"))?;
                self.disclose(view, valence, known)
            }
            Phase::Done => Ok(None),
        }
    }
}

fn truncate_chars(text: &str, max: usize) -> String {
    match text.char_indices().nth(max) {
        Some((i, _)) => text[..i].to_string(),
        None => text.to_string(),
    }
}

/// The system prompt and conversation so far, from the persuader's side.
pub fn persuader_prompt(view: &AgentView) -> Vec<ChatMessage> {
    let s = &view.scenario;
    let facts: Vec<Claim> = Cell::all()
        .map(|c| Claim::new(c.proposal, c.attribute, view.matrix.effect(c)))
        .collect();
    let mut system = format!(
        "You are playing a persuasion game with another player.\n\nScenario: {}\n\n\
         There are three proposals (A, B and C). Their effects are:\n{}\n\n\
         You want the other player to choose proposal {}.",
        s.cover_story,
        render_facts(&facts, s),
        view.persuader_goal
    );
    if let Some(v) = &view.persuader_valence {
        system.push_str(&format!(" Your own values: {}", render_valence(v, s)));
    }
    system.push_str(
        "\n\nThe other player may not know every effect and may value the attributes differently from you. \
         They will choose the proposal that is best for them given what they know.",
    );
    if let Some(t) = &view.target {
        let known: Vec<Claim> = facts
            .iter()
            .copied()
            .filter(|c| t.known_cells.contains(c.cell()))
            .collect();
        system.push_str(&format!(
            "\n\nWhat the other player knows:\n{}\nTheir values: {}",
            render_facts(&known, s),
            render_valence(&t.valence, s).replace("I ", "They ")
        ));
    }
    system.push_str("\n\nWrite your next message to the other player. Keep it short.");
    let mut messages = vec![ChatMessage::system(system)];
    for e in &view.history {
        messages.push(match e.role {
            Role::Persuader => ChatMessage::assistant(&e.text),
            Role::Target => ChatMessage::user(&e.text),
        });
    }
    messages
}

pub struct LlmPersuader {
    client: Arc<dyn ChatClient>,
    max_chars: usize,
}

impl LlmPersuader {
    pub fn new(client: Arc<dyn ChatClient>, max_chars: usize) -> Self {
        LlmPersuader { client, max_chars }
    }
}

impl Persuader for LlmPersuader {
    fn next_message(&mut self, view: &AgentView) -> Result<Option<String>, AgentError> {
        let reply = self.client.complete(&persuader_prompt(view))?;
        Ok(Some(truncate_chars(reply.trim(), self.max_chars)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_schedule_basics() {
        assert!(persuader_random(3, 0).is_empty());
        assert_eq!(persuader_random(3, 50), persuader_random(3, 50));
        assert_ne!(persuader_random(3, 50), persuader_random(4, 50));
        assert!(persuader_random(9, 1000).iter().all(|i| *i < 9));
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        assert_eq!(truncate_chars("héllo", 2), "hé");
        assert_eq!(truncate_chars("hi", 10), "hi");
    }
}
