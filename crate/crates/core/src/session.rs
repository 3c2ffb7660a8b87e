//! One game between a persuader and a target.
//!
//! A session owns the ordered event stream. The persuader always moves first;
//! a bot target answers every persuader message immediately, a human target
//! may answer once per persuader message.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentView, Persuader, PersuaderKind, TargetMentalState};
use crate::bot::{render_response, BotState, Claim, ResponsePlan};
use crate::classify::{Classification, Classifier, ClassifierKind, ClassifyError};
use crate::forge::check_instance;
use crate::model::{CellMask, GameInstance, Proposal, ValenceVector};
use crate::scenario::{self, Scenario};

pub const DEFAULT_MAX_PERSUADER_TURNS: usize = 10;
pub const TARGET_INSTRUCTION: &str = "You should listen to the other player to help make your choice.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Hidden,
    Revealed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Persuader,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Bot,
    Human,
}

/// Which study design a game belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Target is the rational bot.
    RationalBot,
    /// Human target role-plays an assigned value function.
    RolePlay,
    /// Human target acts on survey-inferred values.
    RealPersuasion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChoiceStage {
    Pre,
    Final,
}

fn default_turns() -> usize {
    DEFAULT_MAX_PERSUADER_TURNS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub instance: GameInstance,
    pub condition: Condition,
    pub persuader_kind: PersuaderKind,
    pub target_kind: TargetKind,
    pub classifier_kind: ClassifierKind,
    #[serde(default = "default_turns")]
    pub max_persuader_turns: usize,
    #[serde(default)]
    pub seed: u64,
    pub mode: Mode,
    /// Persuader participant id, for per-participant averaging.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_participant: Option<String>,
    /// Survey-inferred target values (real-persuasion mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inferred_valence: Option<ValenceVector>,
    /// Number of draws for the random persuader.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_draws: Option<usize>,
}

impl SessionConfig {
    /// A bot-target game with default budget.
    pub fn bot_game(
        instance: GameInstance,
        condition: Condition,
        persuader_kind: PersuaderKind,
        classifier_kind: ClassifierKind,
    ) -> Self {
        SessionConfig {
            instance,
            condition,
            persuader_kind,
            target_kind: TargetKind::Bot,
            classifier_kind,
            max_persuader_turns: DEFAULT_MAX_PERSUADER_TURNS,
            seed: 0,
            mode: Mode::RationalBot,
            participant: None,
            target_participant: None,
            inferred_valence: None,
            random_draws: None,
        }
    }

    /// The values the target acts on (inferred in real-persuasion mode).
    pub fn target_valence(&self) -> ValenceVector {
        self.inferred_valence.unwrap_or(self.instance.target_valence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEvent {
    pub turn: usize,
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ResponsePlan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: SessionConfig,
    pub events: Vec<MessageEvent>,
    pub pre_choice: Option<Proposal>,
    pub final_choice: Proposal,
    pub success: bool,
    /// Set when the game stopped early because an agent or classifier failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incomplete: Option<String>,
}

impl Transcript {
    pub fn persuader_events(&self) -> impl Iterator<Item = &MessageEvent> {
        self.events.iter().filter(|e| e.role == Role::Persuader)
    }

    /// Persuader disclosure claims in message order.
    pub fn persuader_claims(&self) -> Vec<Claim> {
        self.persuader_events()
            .filter_map(|e| e.classification.as_ref())
            .flat_map(|c| c.disclosures.iter().copied())
            .collect()
    }

    /// Turn numbers strictly increase and the target never speaks twice in a row or first.
    pub fn turns_well_formed(&self) -> bool {
        let increasing = self.events.windows(2).all(|w| w[0].turn < w[1].turn);
        let mut last = None;
        let alternation = self.events.iter().all(|e| {
            let ok = e.role == Role::Persuader || last == Some(Role::Persuader);
            last = Some(e.role);
            ok
        });
        increasing && alternation
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("instance fails its constraints: {0:?}")]
    InvalidInstance(crate::forge::ConstraintReport),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("it is not the {0:?}'s turn")]
    OutOfTurn(Role),
    #[error("persuader turn budget exhausted")]
    BudgetExhausted,
    #[error("session has ended")]
    Ended,
    #[error("{0:?} choice already recorded")]
    AlreadyChosen(ChoiceStage),
    #[error("pre-choice must come before any message")]
    PreChoiceTooLate,
    #[error("the target must record a pre-choice before the conversation starts")]
    PreChoiceRequired,
    #[error("the bot makes its own choices")]
    BotChooses,
    #[error("session is still open")]
    StillOpen,
    #[error(transparent)]
    Classifier(#[from] ClassifyError),
}

/// What the target sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetView {
    pub scenario: Scenario,
    pub condition: Condition,
    pub known_facts: Vec<Claim>,
    pub valence: ValenceVector,
    pub instruction: String,
    pub history: Vec<MessageEvent>,
    pub pre_choice: Option<Proposal>,
    pub final_choice: Option<Proposal>,
    pub ended: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum RoleView {
    Persuader(AgentView),
    Target(TargetView),
}

pub struct Session {
    config: SessionConfig,
    scenario: Scenario,
    classifier: Arc<dyn Classifier>,
    bot: Option<BotState>,
    events: Vec<MessageEvent>,
    persuader_turns: usize,
    pre_choice: Option<Proposal>,
    final_choice: Option<Proposal>,
    incomplete: Option<String>,
}

impl Session {
    pub fn new(config: SessionConfig, classifier: Arc<dyn Classifier>) -> Result<Self, SessionError> {
        if config.max_persuader_turns == 0 {
            return Err(SessionError::Config("max_persuader_turns must be at least 1".into()));
        }
        let report = check_instance(&config.instance);
        if !report.is_valid() {
            return Err(SessionError::InvalidInstance(report));
        }
        let scenario = scenario::by_id(&config.instance.scenario_id)
            .ok_or_else(|| SessionError::UnknownScenario(config.instance.scenario_id.clone()))?;
        if config.target_kind == TargetKind::Bot && config.mode != Mode::RationalBot {
            return Err(SessionError::Config("bot targets only play in rational-bot mode".into()));
        }
        let bot = (config.target_kind == TargetKind::Bot)
            .then(|| BotState::with_valence(&config.instance, config.target_valence()));
        Ok(Session {
            config,
            scenario,
            classifier,
            bot,
            events: Vec::new(),
            persuader_turns: 0,
            pre_choice: None,
            final_choice: None,
            incomplete: None,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn bot(&self) -> Option<&BotState> {
        self.bot.as_ref()
    }

    pub fn events(&self) -> &[MessageEvent] {
        &self.events
    }

    pub fn is_ended(&self) -> bool {
        self.final_choice.is_some()
    }

    pub fn persuader_turns_left(&self) -> usize {
        self.config.max_persuader_turns - self.persuader_turns
    }

    /// Cells the target currently knows.
    fn target_known(&self) -> CellMask {
        match &self.bot {
            Some(bot) => bot
                .answer_info(None)
                .iter()
                .map(Claim::cell)
                .collect(),
            None => {
                let disclosed: CellMask = self
                    .events
                    .iter()
                    .filter(|e| e.role == Role::Persuader)
                    .filter_map(|e| e.classification.as_ref())
                    .flat_map(|c| c.disclosures.iter().map(Claim::cell))
                    .collect();
                self.config.instance.visible().union(disclosed)
            }
        }
    }

    pub fn agent_view(&self) -> AgentView {
        let i = &self.config.instance;
        AgentView {
            scenario: self.scenario.clone(),
            matrix: i.matrix,
            persuader_goal: i.persuader_goal,
            persuader_valence: i.persuader_valence,
            condition: self.config.condition,
            target: (self.config.condition == Condition::Revealed).then(|| TargetMentalState {
                valence: self.config.target_valence(),
                known_cells: self.target_known(),
            }),
            history: self.events.clone(),
        }
    }

    pub fn target_view(&self) -> TargetView {
        let known_facts = match &self.bot {
            Some(bot) => bot.answer_info(None),
            None => {
                let i = &self.config.instance;
                i.visible()
                    .cells()
                    .map(|c| Claim::new(c.proposal, c.attribute, i.matrix.effect(c)))
                    .collect()
            }
        };
        TargetView {
            scenario: self.scenario.clone(),
            condition: self.config.condition,
            known_facts,
            valence: self.config.target_valence(),
            instruction: TARGET_INSTRUCTION.to_string(),
            history: self.events.clone(),
            pre_choice: self.pre_choice,
            final_choice: self.final_choice,
            ended: self.is_ended(),
        }
    }

    pub fn view(&self, role: Role) -> RoleView {
        match role {
            Role::Persuader => RoleView::Persuader(self.agent_view()),
            Role::Target => RoleView::Target(self.target_view()),
        }
    }

    fn next_turn(&self) -> usize {
        self.events.len()
    }

    /// Who may post right now. A human target may answer the latest persuader message.
    pub fn may_post(&self, role: Role) -> Result<(), SessionError> {
        if self.is_ended() {
            return Err(SessionError::Ended);
        }
        match role {
            Role::Persuader => {
                if self.config.target_kind == TargetKind::Human && self.pre_choice.is_none() {
                    return Err(SessionError::PreChoiceRequired);
                }
                if self.persuader_turns >= self.config.max_persuader_turns {
                    return Err(SessionError::BudgetExhausted);
                }
                Ok(())
            }
            Role::Target => {
                let answered = self.events.last().map(|e| e.role) != Some(Role::Persuader);
                if self.config.target_kind == TargetKind::Bot || answered {
                    return Err(SessionError::OutOfTurn(Role::Target));
                }
                Ok(())
            }
        }
    }

    /// Post a message; returns the events appended (the bot's reply included).
    pub fn post(&mut self, role: Role, text: &str) -> Result<Vec<MessageEvent>, SessionError> {
        self.may_post(role)?;
        let classification = self.classifier.classify(text, &self.scenario)?;
        let start = self.events.len();
        self.events.push(MessageEvent {
            turn: self.next_turn(),
            role,
            text: text.to_string(),
            classification: Some(classification.clone()),
            response: None,
        });
        if role == Role::Persuader {
            self.persuader_turns += 1;
            if let Some(bot) = self.bot.as_mut() {
                let plan = bot.respond(&classification);
                let reply = render_response(&plan, &self.scenario);
                let turn = self.events.len();
                self.events.push(MessageEvent {
                    turn,
                    role: Role::Target,
                    text: reply,
                    classification: None,
                    response: Some(plan),
                });
                if self.persuader_turns >= self.config.max_persuader_turns {
                    self.final_choice = Some(bot.choice());
                }
            }
        }
        Ok(self.events[start..].to_vec())
    }

    pub fn pre_choice(&mut self, proposal: Proposal) -> Result<(), SessionError> {
        if self.bot.is_some() {
            return Err(SessionError::BotChooses);
        }
        if self.is_ended() {
            return Err(SessionError::Ended);
        }
        if self.pre_choice.is_some() {
            return Err(SessionError::AlreadyChosen(ChoiceStage::Pre));
        }
        if !self.events.is_empty() {
            return Err(SessionError::PreChoiceTooLate);
        }
        self.pre_choice = Some(proposal);
        Ok(())
    }

    /// Record a human target's final choice, ending the session.
    pub fn final_choice(&mut self, proposal: Proposal) -> Result<(), SessionError> {
        if self.final_choice.is_some() {
            return Err(SessionError::AlreadyChosen(ChoiceStage::Final));
        }
        if self.bot.is_some() {
            return Err(SessionError::BotChooses);
        }
        if self.pre_choice.is_none() {
            return Err(SessionError::PreChoiceRequired);
        }
        self.final_choice = Some(proposal);
        Ok(())
    }

    /// End a bot game now; the final choice is the bot's.
    pub fn finish(&mut self) -> Result<Proposal, SessionError> {
        if self.final_choice.is_some() {
            return Err(SessionError::Ended);
        }
        let bot = self.bot.as_ref().ok_or(SessionError::Config(
            "human-target sessions end with an explicit final choice".into(),
        ))?;
        let choice = bot.choice();
        self.final_choice = Some(choice);
        Ok(choice)
    }

    /// Stop the game because a participant failed; it is kept but marked incomplete.
    pub fn abort(&mut self, reason: impl Into<String>) {
        if self.final_choice.is_none() {
            let fallback = match &self.bot {
                Some(bot) => bot.choice(),
                None => self.pre_choice.unwrap_or(self.config.instance.p_init),
            };
            self.final_choice = Some(fallback);
            self.incomplete = Some(reason.into());
        }
    }

    pub fn transcript(&self) -> Result<Transcript, SessionError> {
        let final_choice = self.final_choice.ok_or(SessionError::StillOpen)?;
        Ok(Transcript {
            config: self.config.clone(),
            events: self.events.clone(),
            pre_choice: self.pre_choice,
            final_choice,
            success: final_choice == self.config.instance.persuader_goal,
            incomplete: self.incomplete.clone(),
        })
    }
}

/// Play a bot game to the end with an automated persuader.
///
/// Agent or classifier failures end the game early and mark it incomplete.
pub fn run_bot_game(
    config: SessionConfig,
    classifier: Arc<dyn Classifier>,
    persuader: &mut dyn Persuader,
) -> Result<Transcript, SessionError> {
    let mut session = Session::new(config, classifier)?;
    while !session.is_ended() {
        match persuader.next_message(&session.agent_view()) {
            Ok(Some(text)) => {
                if let Err(e) = session.post(Role::Persuader, &text) {
                    session.abort(e.to_string());
                }
            }
            Ok(None) => {
                session.finish()?;
            }
            Err(e) => session.abort(e.to_string()),
        }
    }
    session.transcript()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::OptimalPersuader;
    use crate::classify::StructuredClassifier;
    use crate::forge::{generate, GenerateOptions};

    fn instance() -> GameInstance {
        generate(21, &scenario::by_id("llm").unwrap(), 1, &GenerateOptions::default())
            .unwrap()
            .remove(0)
    }

    fn classifier() -> Arc<dyn Classifier> {
        Arc::new(StructuredClassifier)
    }

    fn bot_config(condition: Condition) -> SessionConfig {
        SessionConfig::bot_game(instance(), condition, PersuaderKind::Human, ClassifierKind::Structured)
    }

    fn human_config() -> SessionConfig {
        SessionConfig {
            target_kind: TargetKind::Human,
            mode: Mode::RolePlay,
            ..bot_config(Condition::Hidden)
        }
    }

    fn disclose(inst: &GameInstance, cells: CellMask) -> String {
        Classification {
            disclosures: cells
                .cells()
                .map(|c| Claim::new(c.proposal, c.attribute, inst.matrix.effect(c)))
                .collect(),
            ..Default::default()
        }
        .to_structured()
    }

    #[test]
    fn new_session_basics() {
        let s = Session::new(bot_config(Condition::Hidden), classifier()).unwrap();
        assert_eq!(s.bot().unwrap().choice(), s.config().instance.p_init);
        match s.view(Role::Persuader) {
            RoleView::Persuader(v) => assert!(v.target.is_none()),
            _ => unreachable!(),
        }
        let mut cfg = bot_config(Condition::Hidden);
        cfg.max_persuader_turns = 0;
        assert!(matches!(Session::new(cfg, classifier()), Err(SessionError::Config(_))));
        let mut cfg = bot_config(Condition::Hidden);
        cfg.instance.hidden = CellMask::EMPTY;
        assert!(matches!(
            Session::new(cfg, classifier()),
            Err(SessionError::InvalidInstance(_))
        ));
    }

    #[test]
    fn views_respect_condition() {
        let s = Session::new(bot_config(Condition::Revealed), classifier()).unwrap();
        let RoleView::Persuader(v) = s.view(Role::Persuader) else {
            unreachable!()
        };
        assert_eq!(v.target.unwrap().valence, s.config().instance.target_valence);
        let target = serde_json::to_string(&s.view(Role::Target)).unwrap();
        assert!(!target.contains("persuader_goal"));
        let hidden = Session::new(bot_config(Condition::Hidden), classifier()).unwrap();
        let json = serde_json::to_string(&hidden.view(Role::Persuader)).unwrap();
        assert!(!json.contains("\"target\""));
        assert!(!json.contains("known_cells"));
    }

    #[test]
    fn witness_disclosure_wins() {
        let mut s = Session::new(bot_config(Condition::Hidden), classifier()).unwrap();
        let inst = s.config().instance.clone();
        let events = s.post(Role::Persuader, &disclose(&inst, inst.witness)).unwrap();
        assert_eq!(events.len(), 2);
        let pref = events[1].response.as_ref().unwrap().preference().unwrap();
        assert_eq!(pref.choice, inst.persuader_goal);
        s.finish().unwrap();
        assert!(s.transcript().unwrap().success);
    }

    #[test]
    fn chat_gets_generic_reply_and_target_cannot_post() {
        let mut s = Session::new(bot_config(Condition::Hidden), classifier()).unwrap();
        let events = s.post(Role::Persuader, "CHAT hello").unwrap();
        assert!(events[1].text.starts_with("I am a perfectly rational agent."));
        assert!(matches!(
            s.post(Role::Target, "hi"),
            Err(SessionError::OutOfTurn(Role::Target))
        ));
    }

    #[test]
    fn classifier_failure_is_not_committed() {
        let mut s = Session::new(bot_config(Condition::Hidden), classifier()).unwrap();
        assert!(matches!(
            s.post(Role::Persuader, "DISCLOSE Q 0 +1"),
            Err(SessionError::Classifier(_))
        ));
        assert!(s.events().is_empty());
    }

    #[test]
    fn budget_auto_finishes_bot_game() {
        let mut cfg = bot_config(Condition::Hidden);
        cfg.max_persuader_turns = 2;
        let mut s = Session::new(cfg, classifier()).unwrap();
        s.post(Role::Persuader, "CHAT a").unwrap();
        assert!(!s.is_ended());
        s.post(Role::Persuader, "CHAT b").unwrap();
        assert!(s.is_ended());
        let t = s.transcript().unwrap();
        assert_eq!(t.final_choice, t.config.instance.p_init);
        assert!(matches!(s.post(Role::Persuader, "CHAT c"), Err(SessionError::Ended)));
    }

    #[test]
    fn zero_message_game() {
        let mut s = Session::new(bot_config(Condition::Hidden), classifier()).unwrap();
        assert!(matches!(s.transcript(), Err(SessionError::StillOpen)));
        s.finish().unwrap();
        let t = s.transcript().unwrap();
        assert_eq!(t.final_choice, t.config.instance.p_init);
        assert!(!t.success);
        assert!(matches!(s.finish(), Err(SessionError::Ended)));
    }

    #[test]
    fn human_target_flow() {
        let mut s = Session::new(human_config(), classifier()).unwrap();
        assert!(matches!(s.post(Role::Persuader, "CHAT hi"), Err(SessionError::PreChoiceRequired)));
        let p_init = s.config().instance.p_init;
        s.pre_choice(p_init).unwrap();
        assert!(matches!(s.pre_choice(p_init), Err(SessionError::AlreadyChosen(ChoiceStage::Pre))));
        assert!(matches!(s.post(Role::Target, "hello"), Err(SessionError::OutOfTurn(_))));
        let ev = s.post(Role::Persuader, "CHAT hi").unwrap();
        assert_eq!(ev.len(), 1);
        s.post(Role::Target, "CHAT hey").unwrap();
        assert!(matches!(s.post(Role::Target, "CHAT again"), Err(SessionError::OutOfTurn(_))));
        s.final_choice(Proposal::A).unwrap();
        assert!(matches!(
            s.final_choice(Proposal::B),
            Err(SessionError::AlreadyChosen(ChoiceStage::Final))
        ));
        let t = s.transcript().unwrap();
        assert!(t.turns_well_formed());
        assert_eq!(t.pre_choice, Some(p_init));
    }

    #[test]
    fn bot_games_reject_external_choices() {
        let mut s = Session::new(bot_config(Condition::Hidden), classifier()).unwrap();
        assert!(matches!(s.pre_choice(Proposal::A), Err(SessionError::BotChooses)));
        assert!(matches!(s.final_choice(Proposal::A), Err(SessionError::BotChooses)));
    }

    #[test]
    fn optimal_game_succeeds_in_both_conditions() {
        for condition in [Condition::Hidden, Condition::Revealed] {
            let t = run_bot_game(bot_config(condition), classifier(), &mut OptimalPersuader::new()).unwrap();
            assert!(t.success, "{condition:?}");
            assert!(t.turns_well_formed());
        }
    }
}
