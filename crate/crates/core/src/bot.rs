//! The naively rational target.
//!
//! The bot believes every claim about a cell it does not know yet, answers
//! questions truthfully from its beliefs, never volunteers anything, and
//! picks the utility maximum with sticky tie-breaking.

use serde::{Deserialize, Serialize};

use crate::classify::Classification;
use crate::model::{
    argmax_set, choose, AttributeId, Cell, Effect, GameInstance, Proposal, Utilities,
    ValenceVector, CELLS, PROPOSALS,
};
use crate::scenario::Scenario;

/// A statement that a proposal has a given effect on an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Claim {
    pub proposal: Proposal,
    pub attribute: AttributeId,
    pub effect: Effect,
}

impl Claim {
    pub fn new(proposal: Proposal, attribute: AttributeId, effect: Effect) -> Self {
        Claim {
            proposal,
            attribute,
            effect,
        }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.proposal, self.attribute)
    }
}

/// The bot's current ranking: tiers of equal utility, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preference {
    pub tiers: Vec<Vec<Proposal>>,
    pub choice: Proposal,
}

impl Preference {
    pub fn from_utilities(utilities: &Utilities, choice: Proposal) -> Self {
        let mut levels: Vec<i32> = utilities.to_vec();
        levels.sort_unstable_by(|a, b| b.cmp(a));
        levels.dedup();
        let tiers = levels
            .into_iter()
            .map(|u| {
                Proposal::ALL
                    .into_iter()
                    .filter(|p| utilities[p.index()] == u)
                    .collect()
            })
            .collect();
        Preference { tiers, choice }
    }

    pub fn top_is_tied(&self) -> bool {
        self.tiers.first().is_some_and(|t| t.len() > 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Echo { claims: Vec<Claim> },
    FactAnswer {
        scope: Option<Proposal>,
        facts: Vec<Claim>,
    },
    ValenceAnswer { valence: ValenceVector },
    PreferenceStatement(Preference),
    Generic,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponsePlan {
    pub segments: Vec<Segment>,
}

impl ResponsePlan {
    pub fn is_generic(&self) -> bool {
        matches!(self.segments.as_slice(), [Segment::Generic])
    }

    pub fn valence(&self) -> Option<ValenceVector> {
        self.segments.iter().find_map(|s| match s {
            Segment::ValenceAnswer { valence } => Some(*valence),
            _ => None,
        })
    }

    /// Every fact the bot stated in answer to an informational question.
    pub fn answered_facts(&self) -> impl Iterator<Item = &Claim> {
        self.segments.iter().flat_map(|s| match s {
            Segment::FactAnswer { facts, .. } => facts.as_slice(),
            _ => &[],
        })
    }

    pub fn preference(&self) -> Option<&Preference> {
        self.segments.iter().find_map(|s| match s {
            Segment::PreferenceStatement(p) => Some(p),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotState {
    pub instance: GameInstance,
    pub beliefs: [Option<Effect>; CELLS],
    pub valence: ValenceVector,
    pub history: Vec<Proposal>,
    pub current_choice: Proposal,
}

impl BotState {
    /// A bot that sees every non-hidden cell and holds the instance's target valence.
    pub fn new(instance: &GameInstance) -> Self {
        Self::with_valence(instance, instance.target_valence)
    }

    /// Same as [`BotState::new`] but with an arbitrary value function, as used
    /// when replaying against a survey-inferred valence.
    pub fn with_valence(instance: &GameInstance, valence: ValenceVector) -> Self {
        let mut beliefs = [None; CELLS];
        for cell in instance.visible().cells() {
            beliefs[cell.index()] = Some(instance.matrix.effect(cell));
        }
        let mut bot = BotState {
            instance: instance.clone(),
            beliefs,
            valence,
            history: Vec::new(),
            current_choice: Proposal::A,
        };
        bot.current_choice = choose(&bot.utilities(), &[]);
        bot.history.push(bot.current_choice);
        bot
    }

    pub fn belief(&self, cell: Cell) -> Option<Effect> {
        self.beliefs[cell.index()]
    }

    pub fn utilities(&self) -> Utilities {
        let mut u = [0; PROPOSALS];
        for cell in Cell::all() {
            if let Some(effect) = self.belief(cell) {
                u[cell.proposal.index()] += self.valence.get(cell.attribute).value() * effect.value();
            }
        }
        u
    }

    pub fn choice(&self) -> Proposal {
        self.current_choice
    }

    pub fn preference(&self) -> Preference {
        Preference::from_utilities(&self.utilities(), self.current_choice)
    }

    /// Take claims at face value. Cells already believed are never overwritten.
    /// Returns true when the choice changed.
    pub fn ingest(&mut self, claims: &[Claim]) -> bool {
        for claim in claims {
            let slot = &mut self.beliefs[claim.cell().index()];
            if slot.is_none() {
                *slot = Some(claim.effect);
            }
        }
        let next = choose(&self.utilities(), &self.history);
        if next != self.current_choice {
            self.current_choice = next;
            self.history.push(next);
            true
        } else {
            false
        }
    }

    /// Believed facts, row-major, optionally restricted to one proposal.
    pub fn answer_info(&self, scope: Option<Proposal>) -> Vec<Claim> {
        Cell::all()
            .filter(|c| scope.is_none_or(|p| c.proposal == p))
            .filter_map(|c| {
                self.belief(c)
                    .map(|effect| Claim::new(c.proposal, c.attribute, effect))
            })
            .collect()
    }

    pub fn answer_valence(&self) -> ValenceVector {
        self.valence
    }

    /// Apply a classified persuader message and plan the canned reply.
    pub fn respond(&mut self, classification: &Classification) -> ResponsePlan {
        let mut segments = Vec::new();
        let mut changed = false;
        if !classification.disclosures.is_empty() {
            changed = self.ingest(&classification.disclosures);
            segments.push(Segment::Echo {
                claims: classification.disclosures.clone(),
            });
        }
        let mut scopes: Vec<Option<Proposal>> = Vec::new();
        for scope in &classification.info_appeals {
            if !scopes.contains(scope) {
                scopes.push(*scope);
            }
        }
        for scope in scopes {
            segments.push(Segment::FactAnswer {
                scope,
                facts: self.answer_info(scope),
            });
        }
        if classification.motivational_appeal {
            segments.push(Segment::ValenceAnswer {
                valence: self.answer_valence(),
            });
        }
        if changed || classification.preference_query {
            segments.push(Segment::PreferenceStatement(self.preference()));
        }
        if segments.is_empty() {
            segments.push(Segment::Generic);
        }
        ResponsePlan { segments }
    }

    /// True when the top utility is shared by two or more proposals.
    pub fn is_tied(&self) -> bool {
        argmax_set(&self.utilities()).len() > 1
    }
}

pub const GENERIC_REPLY: &str = "I am a perfectly rational agent. I will choose the best proposal given what I know. I will echo back information that is revealed to me, and I will answer questions about what I know or like.";

pub const TIE_NOTE: &str =
    "When I prefer the top proposals the same, I choose whichever of them I had preferred first.";

fn effect_phrase(effect: Effect, attribute: &str) -> String {
    match effect {
        Effect::Increase => format!("will increase {attribute}"),
        Effect::Decrease => format!("will decrease {attribute}"),
        Effect::NoEffect => format!("will have no effect on {attribute}"),
    }
}

/// `a`, `a and b`, `a, b and c`.
fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn proposals_phrase(group: &[Proposal]) -> String {
    let labels: Vec<String> = group.iter().map(|p| p.label().to_string()).collect();
    if group.len() == 1 {
        format!("proposal {}", labels[0])
    } else {
        format!("proposals {}", join_list(&labels))
    }
}

/// "Proposal A will increase x and will decrease y." grouped by proposal in first-mention order.
pub fn render_facts(facts: &[Claim], scenario: &Scenario) -> String {
    let mut order: Vec<Proposal> = Vec::new();
    for f in facts {
        if !order.contains(&f.proposal) {
            order.push(f.proposal);
        }
    }
    order
        .into_iter()
        .map(|p| {
            let phrases: Vec<String> = facts
                .iter()
                .filter(|f| f.proposal == p)
                .map(|f| effect_phrase(f.effect, scenario.attribute_name(f.attribute)))
                .collect();
            format!("Proposal {} {}.", p, phrases.join(" and "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_valence(valence: &ValenceVector, scenario: &Scenario) -> String {
    let parts: Vec<String> = AttributeId::ALL
        .into_iter()
        .map(|a| {
            let name = scenario.attribute_name(a);
            match valence.get(a) {
                crate::model::Valence::Like => format!("I like {name}"),
                crate::model::Valence::Dislike => format!("I dislike {name}"),
                crate::model::Valence::Indifferent => format!("I am indifferent to {name}"),
            }
        })
        .collect();
    format!("{}.", join_list(&parts))
}

pub fn render_preference(pref: &Preference) -> String {
    let mut sentences: Vec<String> = pref
        .tiers
        .iter()
        .filter(|t| t.len() > 1)
        .map(|t| format!("I prefer {} the same.", proposals_phrase(t)))
        .collect();
    for pair in pref.tiers.windows(2) {
        sentences.push(format!(
            "I prefer {} over {}.",
            proposals_phrase(&pair[0]),
            proposals_phrase(&pair[1])
        ));
    }
    let mut text = sentences.join(" ");
    if pref.top_is_tied() {
        text.push_str(&format!("\n\n{TIE_NOTE} Right now, that is {}.", pref.choice));
    }
    text
}

fn render_segment(segment: &Segment, scenario: &Scenario) -> String {
    match segment {
        Segment::Echo { claims } => render_facts(claims, scenario),
        Segment::FactAnswer { scope, facts } if facts.is_empty() => match scope {
            Some(p) => format!("I do not know anything about proposal {p}."),
            None => "I do not know anything about the proposals.".to_string(),
        },
        Segment::FactAnswer { facts, .. } => render_facts(facts, scenario),
        Segment::ValenceAnswer { valence } => render_valence(valence, scenario),
        Segment::PreferenceStatement(p) => render_preference(p),
        Segment::Generic => GENERIC_REPLY.to_string(),
    }
}

/// Expand a plan into the bot's message text.
pub fn render_response(plan: &ResponsePlan, scenario: &Scenario) -> String {
    plan.segments
        .iter()
        .map(|s| render_segment(s, scenario))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::{generate, GenerateOptions};
    use crate::model::{CellMask, Valence};
    use crate::scenario;

    fn instance() -> GameInstance {
        let opts = GenerateOptions {
            canonical_only: true,
            ..Default::default()
        };
        generate(11, &scenario::by_id("llm").unwrap(), 1, &opts)
            .unwrap()
            .remove(0)
    }

    fn truthful(inst: &GameInstance, cells: CellMask) -> Vec<Claim> {
        cells
            .cells()
            .map(|c| Claim::new(c.proposal, c.attribute, inst.matrix.effect(c)))
            .collect()
    }

    fn flip(e: Effect) -> Effect {
        match e {
            Effect::Increase => Effect::Decrease,
            _ => Effect::Increase,
        }
    }

    #[test]
    fn init_matches_p_init_and_hides_four() {
        let inst = instance();
        let bot = BotState::new(&inst);
        assert_eq!(bot.choice(), inst.p_init);
        assert_eq!(bot.history, vec![inst.p_init]);
        assert_eq!(bot.beliefs.iter().filter(|b| b.is_none()).count(), 4);
    }

    #[test]
    fn nothing_hidden_chooses_full() {
        let mut inst = instance();
        inst.hidden = CellMask::EMPTY;
        inst.witness = CellMask::EMPTY;
        assert_eq!(BotState::new(&inst).choice(), inst.p_full);
    }

    #[test]
    fn false_claim_on_known_cell_ignored() {
        let inst = instance();
        let mut bot = BotState::new(&inst);
        let before = bot.clone();
        let cell = inst.visible().cells().next().unwrap();
        bot.ingest(&[Claim::new(cell.proposal, cell.attribute, flip(inst.matrix.effect(cell)))]);
        assert_eq!(bot.beliefs, before.beliefs);
        assert_eq!(bot.choice(), before.choice());
    }

    #[test]
    fn reference_disclosures() {
        let inst = instance();
        let mut bot = BotState::new(&inst);
        bot.ingest(&truthful(&inst, inst.witness));
        assert_eq!(bot.choice(), inst.persuader_goal);

        let mut bot = BotState::new(&inst);
        bot.ingest(&truthful(&inst, inst.hidden));
        assert_eq!(bot.choice(), inst.p_full);
    }

    #[test]
    fn first_claim_wins_and_face_value() {
        let inst = instance();
        let mut bot = BotState::new(&inst);
        let cell = inst.hidden.cells().next().unwrap();
        let lie = flip(inst.matrix.effect(cell));
        bot.ingest(&[Claim::new(cell.proposal, cell.attribute, lie)]);
        bot.ingest(&[Claim::new(cell.proposal, cell.attribute, inst.matrix.effect(cell))]);
        assert_eq!(bot.belief(cell), Some(lie));
        assert!(bot
            .answer_info(None)
            .contains(&Claim::new(cell.proposal, cell.attribute, lie)));
    }

    #[test]
    fn answer_info_examples() {
        let inst = instance();
        let mut bot = BotState::new(&inst);
        assert_eq!(bot.answer_info(None).len(), 5);
        let cell = inst.hidden.cells().next().unwrap();
        let claim = Claim::new(cell.proposal, cell.attribute, inst.matrix.effect(cell));
        bot.ingest(&[claim]);
        let facts = bot.answer_info(None);
        assert_eq!(facts.len(), 6);
        assert!(facts.contains(&claim));

        // a proposal whose three cells are all hidden has nothing to report
        let mut blind = inst.clone();
        blind.hidden = [0, 1, 2, 4].into_iter().map(|i| Cell::from_index(i).unwrap()).collect();
        let bot = BotState::new(&blind);
        assert!(bot.answer_info(Some(Proposal::A)).is_empty());
    }

    #[test]
    fn valence_rendering() {
        let s = scenario::by_id("education-e1").unwrap();
        let v = ValenceVector::from_values([-1, -1, -1]).unwrap();
        assert_eq!(
            render_valence(&v, &s),
            "I dislike student achievement, I dislike teacher satisfaction and I dislike economic competitiveness."
        );
        let z = ValenceVector::new([Valence::Indifferent; 3]);
        let text = render_valence(&z, &s);
        assert_eq!(text.matches("I am indifferent to").count(), 3);
    }

    #[test]
    fn valence_answer_idempotent() {
        let bot = BotState::new(&instance());
        assert_eq!(bot.answer_valence(), bot.answer_valence());
    }

    #[test]
    fn echo_rendering() {
        let s = scenario::by_id("llm").unwrap();
        let plan = ResponsePlan {
            segments: vec![Segment::Echo {
                claims: vec![Claim::new(Proposal::A, AttributeId::new(1).unwrap(), Effect::Increase)],
            }],
        };
        assert_eq!(
            render_response(&plan, &s),
            "Proposal A will increase development speed of LLMs."
        );
        let grouped = vec![
            Claim::new(Proposal::A, AttributeId::new(1).unwrap(), Effect::Increase),
            Claim::new(Proposal::B, AttributeId::new(1).unwrap(), Effect::Decrease),
            Claim::new(Proposal::A, AttributeId::new(2).unwrap(), Effect::Increase),
            Claim::new(Proposal::C, AttributeId::new(2).unwrap(), Effect::NoEffect),
        ];
        assert_eq!(
            render_facts(&grouped, &s),
            "Proposal A will increase development speed of LLMs and will increase public trust in LLMs. \
             Proposal B will decrease development speed of LLMs. \
             Proposal C will have no effect on public trust in LLMs."
        );
    }

    #[test]
    fn generic_rendering() {
        let s = scenario::by_id("llm").unwrap();
        let plan = ResponsePlan {
            segments: vec![Segment::Generic],
        };
        let text = render_response(&plan, &s);
        assert!(text.starts_with("I am a perfectly rational agent."));
        assert_eq!(text, render_response(&plan, &s));
    }

    #[test]
    fn preference_rendering() {
        let p = Preference::from_utilities(&[1, 1, 2], Proposal::C);
        assert_eq!(
            render_preference(&p),
            "I prefer proposals A and B the same. I prefer proposal C over proposals A and B."
        );
        let p = Preference::from_utilities(&[0, 2, 2], Proposal::B);
        assert_eq!(
            render_preference(&p),
            "I prefer proposals B and C the same. I prefer proposals B and C over proposal A.\n\n\
             When I prefer the top proposals the same, I choose whichever of them I had preferred first. Right now, that is B."
        );
        let p = Preference::from_utilities(&[3, 1, 2], Proposal::A);
        assert_eq!(
            render_preference(&p),
            "I prefer proposal A over proposal C. I prefer proposal C over proposal B."
        );
    }

    #[test]
    fn respond_policy() {
        let inst = instance();
        let mut bot = BotState::new(&inst);
        let plan = bot.respond(&Classification::generic());
        assert!(plan.is_generic());

        let plan = bot.respond(&Classification {
            motivational_appeal: true,
            ..Default::default()
        });
        assert_eq!(
            plan.segments,
            vec![Segment::ValenceAnswer {
                valence: inst.target_valence
            }]
        );

        // disclosing the witness one cell at a time ends with the goal announced
        let mut last = None;
        for claim in truthful(&inst, inst.witness) {
            let plan = bot.respond(&Classification {
                disclosures: vec![claim],
                ..Default::default()
            });
            assert!(matches!(plan.segments[0], Segment::Echo { .. }));
            last = Some(plan);
        }
        let pref = last.unwrap().preference().cloned().unwrap();
        assert_eq!(pref.choice, inst.persuader_goal);
        assert_eq!(pref.tiers[0], vec![inst.persuader_goal]);
    }
}
