//! Reading persuader (and human target) messages into [`Classification`]s.
//!
//! Two offline classifiers live here: an exact parser for the line-oriented
//! structured grammar and a best-effort rule matcher for free text. The
//! model-backed classifier is in [`crate::llm`].

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bot::Claim;
use crate::model::{AttributeId, Effect, Proposal};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub disclosures: Vec<Claim>,
    /// One entry per informational question; `None` asks about every proposal.
    pub info_appeals: Vec<Option<Proposal>>,
    pub motivational_appeal: bool,
    /// The message asks which proposal the target currently chooses.
    #[serde(default)]
    pub preference_query: bool,
    pub generic: bool,
}

impl Classification {
    pub fn generic() -> Self {
        Classification {
            generic: true,
            ..Default::default()
        }
    }

    pub fn has_appeal(&self) -> bool {
        !self.info_appeals.is_empty() || self.motivational_appeal
    }

    /// Recompute `generic` from the other fields.
    pub fn normalized(mut self) -> Self {
        self.generic =
            self.disclosures.is_empty() && !self.has_appeal() && !self.preference_query;
        self
    }

    /// Render as structured-grammar lines. Parsing the result gives back `self`.
    pub fn to_structured(&self) -> String {
        let mut lines: Vec<String> = self
            .disclosures
            .iter()
            .map(|c| {
                format!(
                    "DISCLOSE {} {} {}",
                    c.proposal,
                    c.attribute.index(),
                    c.effect.token()
                )
            })
            .collect();
        for scope in &self.info_appeals {
            lines.push(match scope {
                Some(p) => format!("ASK-INFO {p}"),
                None => "ASK-INFO".to_string(),
            });
        }
        if self.motivational_appeal {
            lines.push("ASK-VALUES".to_string());
        }
        if self.preference_query {
            lines.push("ASK-CHOICE".to_string());
        }
        if lines.is_empty() {
            lines.push("CHAT".to_string());
        }
        lines.join("\n")
    }
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("line {line}: unexpected token {token:?}")]
    Parse { line: usize, token: String },
    #[error("line {line}: {command} is missing an argument")]
    MissingArgument { line: usize, command: String },
    #[error("classifier transport failed: {0}")]
    Transport(String),
    #[error("classifier reply invalid after {attempts} attempts: {reason}")]
    InvalidReply { attempts: u32, reason: String },
}

/// Anything that can turn message text into a classification.
pub trait Classifier: Send + Sync {
    fn classify(&self, text: &str, scenario: &Scenario) -> Result<Classification, ClassifyError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Structured,
    Rules,
    Llm,
}

fn parse_effect(token: &str) -> Option<Effect> {
    match token {
        "+1" => Some(Effect::Increase),
        "0" => Some(Effect::NoEffect),
        "-1" => Some(Effect::Decrease),
        _ => None,
    }
}

/// Exact parser for the structured grammar:
///
/// ```text
/// DISCLOSE <A|B|C> <0|1|2> <+1|0|-1>
/// ASK-INFO [<A|B|C>]
/// ASK-VALUES
/// ASK-CHOICE
/// CHAT <freetext>
/// ```
pub fn classify_structured(text: &str) -> Result<Classification, ClassifyError> {
    let mut out = Classification::default();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let mut tokens = raw.split_whitespace();
        let Some(command) = tokens.next() else {
            continue;
        };
        let bad = |token: &str| ClassifyError::Parse {
            line,
            token: token.to_string(),
        };
        let missing = || ClassifyError::MissingArgument {
            line,
            command: command.to_string(),
        };
        match command {
            "DISCLOSE" => {
                let p = tokens.next().ok_or_else(missing)?;
                let a = tokens.next().ok_or_else(missing)?;
                let e = tokens.next().ok_or_else(missing)?;
                let proposal = Proposal::from_label(p).map_err(|_| bad(p))?;
                let attribute = a
                    .parse::<usize>()
                    .ok()
                    .and_then(|i| AttributeId::new(i).ok())
                    .ok_or_else(|| bad(a))?;
                let effect = parse_effect(e).ok_or_else(|| bad(e))?;
                if let Some(extra) = tokens.next() {
                    return Err(bad(extra));
                }
                out.disclosures.push(Claim::new(proposal, attribute, effect));
            }
            "ASK-INFO" => {
                let scope = match tokens.next() {
                    None => None,
                    Some(p) => Some(Proposal::from_label(p).map_err(|_| bad(p))?),
                };
                if let Some(extra) = tokens.next() {
                    return Err(bad(extra));
                }
                out.info_appeals.push(scope);
            }
            "ASK-VALUES" | "ASK-CHOICE" => {
                if let Some(extra) = tokens.next() {
                    return Err(bad(extra));
                }
                if command == "ASK-VALUES" {
                    out.motivational_appeal = true;
                } else {
                    out.preference_query = true;
                }
            }
            "CHAT" => {}
            other => return Err(bad(other)),
        }
    }
    Ok(out.normalized())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StructuredClassifier;

impl Classifier for StructuredClassifier {
    fn classify(&self, text: &str, _scenario: &Scenario) -> Result<Classification, ClassifyError> {
        classify_structured(text)
    }
}

struct Patterns {
    sentence: Regex,
    clause_split: Regex,
    proposal_group: Regex,
    bare_letter: Regex,
    no_effect: Regex,
    increase: Regex,
    decrease: Regex,
    question_start: Regex,
    info: Regex,
    motive: Regex,
    choice: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        sentence: Regex::new(r"[^.!?\n]+[.!?]*").unwrap(),
        clause_split: Regex::new(r"(?i)\s*(?:[,;:]|\bwhile\b|\bwhereas\b|\bbut\b|\bhowever\b)\s*").unwrap(),
        proposal_group: Regex::new(
            r"(?i)\b(?:proposals?|options?|plans?|policy|policies)\s+([abc](?:\s*(?:,|and|&|or)\s*[abc])*)\b",
        )
        .unwrap(),
        bare_letter: Regex::new(
            r"\b([BC])\b|\b(A)\s+(?:will|would|does|doesn't|increases|decreases|has|is|also|only|keeps)\b",
        )
        .unwrap(),
        no_effect: Regex::new(
            r"(?i)\b(?:no effect|no impact|no change|not affect\w*|doesn'?t affect\w*|not change\w*|doesn'?t change\w*|unchanged|stay\w* the same|neutral on)\b",
        )
        .unwrap(),
        increase: Regex::new(
            r"(?i)\b(?:increas\w*|rais\w*|boost\w*|improv\w*|expand\w*|accelerat\w*|strengthen\w*|go(?:es)? up|more)\b",
        )
        .unwrap(),
        decrease: Regex::new(
            r"(?i)\b(?:decreas\w*|reduc\w*|lower\w*|cuts?|cutting|slash\w*|hurt\w*|harm\w*|worsen\w*|slow\w*|weaken\w*|go(?:es)? down|less)\b",
        )
        .unwrap(),
        question_start: Regex::new(
            r"(?i)^\s*(?:what|which|how|why|do|does|did|are|is|would|could|can|will|have|tell me)\b",
        )
        .unwrap(),
        info: Regex::new(r"(?i)\b(?:know\w*|information|info|aware|told|heard|learn\w*|see)\b").unwrap(),
        motive: Regex::new(r"(?i)\b(?:like\w*|prefer\w*|value\w*|feel\w*|care\w*|want\w*|dislike\w*)\b").unwrap(),
        choice: Regex::new(
            r"(?i)\b(?:choos\w*|chose|choice|pick\w*|select\w*|go(?:ing)? with|vote\w*|which proposal)\b",
        )
        .unwrap(),
    })
}

fn letters_in(group: &str) -> Vec<Proposal> {
    group
        .chars()
        .filter_map(|c| Proposal::from_label(&c.to_ascii_uppercase().to_string()).ok())
        .collect()
}

fn proposals_in(text: &str) -> Vec<Proposal> {
    let p = patterns();
    let mut found: Vec<(usize, Proposal)> = Vec::new();
    for m in p.proposal_group.captures_iter(text) {
        let g = m.get(1).unwrap();
        for prop in letters_in(g.as_str()) {
            found.push((g.start(), prop));
        }
    }
    for m in p.bare_letter.captures_iter(text) {
        let g = m.get(1).or_else(|| m.get(2)).unwrap();
        found.push((g.start(), Proposal::from_label(g.as_str()).unwrap()));
    }
    found.sort();
    let mut out = Vec::new();
    for (_, prop) in found {
        if !out.contains(&prop) {
            out.push(prop);
        }
    }
    out
}

/// Non-overlapping attribute mentions, longest phrase first, as (position, attribute).
fn attributes_in(text: &str, scenario: &Scenario) -> Vec<(usize, AttributeId)> {
    let lower = text.to_lowercase();
    let mut phrases: Vec<(String, AttributeId)> = Vec::new();
    for a in AttributeId::ALL {
        phrases.push((scenario.attribute_name(a).to_lowercase(), a));
        for alias in &scenario.aliases[a.index()] {
            phrases.push((alias.to_lowercase(), a));
        }
    }
    phrases.sort_by(|x, y| y.0.len().cmp(&x.0.len()));
    let mut taken: Vec<(usize, usize, AttributeId)> = Vec::new();
    for (phrase, attr) in phrases {
        let pat = format!(r"\b{}\b", regex::escape(&phrase));
        let re = Regex::new(&pat).expect("escaped phrase");
        for m in re.find_iter(&lower) {
            let overlaps = taken.iter().any(|(s, e, _)| m.start() < *e && *s < m.end());
            if !overlaps {
                taken.push((m.start(), m.end(), attr));
            }
        }
    }
    taken.sort();
    taken.into_iter().map(|(s, _, a)| (s, a)).collect()
}

fn effects_in(text: &str) -> Vec<(usize, Effect)> {
    let p = patterns();
    let mut out: Vec<(usize, Effect)> = p.no_effect.find_iter(text).map(|m| (m.start(), Effect::NoEffect)).collect();
    let covered: Vec<(usize, usize)> = p.no_effect.find_iter(text).map(|m| (m.start(), m.end())).collect();
    let free = |start: usize| !covered.iter().any(|(s, e)| start >= *s && start < *e);
    out.extend(
        p.increase
            .find_iter(text)
            .filter(|m| free(m.start()))
            .map(|m| (m.start(), Effect::Increase)),
    );
    out.extend(
        p.decrease
            .find_iter(text)
            .filter(|m| free(m.start()))
            .map(|m| (m.start(), Effect::Decrease)),
    );
    out.sort();
    out
}

fn claims_in_sentence(sentence: &str, scenario: &Scenario) -> Vec<Claim> {
    let p = patterns();
    let mut claims = Vec::new();
    let mut carried: Vec<Proposal> = Vec::new();
    for clause in p.clause_split.split(sentence) {
        let mentioned = proposals_in(clause);
        if !mentioned.is_empty() {
            carried = mentioned;
        }
        let attrs = attributes_in(clause, scenario);
        let effects = effects_in(clause);
        if carried.is_empty() || attrs.is_empty() || effects.is_empty() {
            continue;
        }
        for (pos, attr) in attrs {
            // nearest verb before the attribute, otherwise the first one after it
            let effect = effects
                .iter()
                .rev()
                .find(|(e, _)| *e < pos)
                .or_else(|| effects.iter().find(|(e, _)| *e > pos))
                .map(|(_, e)| *e)
                .unwrap();
            for prop in &carried {
                let claim = Claim::new(*prop, attr, effect);
                if !claims.contains(&claim) {
                    claims.push(claim);
                }
            }
        }
    }
    claims
}

/// Best-effort free-text reading. Structured-grammar input is parsed exactly.
pub fn classify_rules(text: &str, scenario: &Scenario) -> Classification {
    if let Ok(c) = classify_structured(text) {
        if text.lines().any(|l| !l.trim().is_empty()) {
            return c;
        }
    }
    let p = patterns();
    let mut out = Classification::default();
    for m in p.sentence.find_iter(text) {
        let sentence = m.as_str().trim();
        if sentence.is_empty() {
            continue;
        }
        for claim in claims_in_sentence(sentence, scenario) {
            if !out.disclosures.contains(&claim) {
                out.disclosures.push(claim);
            }
        }
        let question = sentence.ends_with('?') || p.question_start.is_match(sentence);
        if !question {
            continue;
        }
        if p.choice.is_match(sentence) {
            out.preference_query = true;
        } else if p.motive.is_match(sentence) {
            out.motivational_appeal = true;
        }
        if p.info.is_match(sentence) {
            let scope = match proposals_in(sentence).as_slice() {
                [only] => Some(*only),
                _ => None,
            };
            if !out.info_appeals.contains(&scope) {
                out.info_appeals.push(scope);
            }
        }
    }
    out.normalized()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleClassifier;

impl Classifier for RuleClassifier {
    fn classify(&self, text: &str, scenario: &Scenario) -> Result<Classification, ClassifyError> {
        Ok(classify_rules(text, scenario))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    fn attr(i: usize) -> AttributeId {
        AttributeId::new(i).unwrap()
    }

    #[test]
    fn structured_examples() {
        let c = classify_structured("DISCLOSE A 1 +1").unwrap();
        assert_eq!(c.disclosures, vec![Claim::new(Proposal::A, attr(1), Effect::Increase)]);
        assert!(!c.generic);
        assert!(classify_structured("ASK-VALUES").unwrap().motivational_appeal);
        assert!(classify_structured("CHAT hello").unwrap().generic);
        assert!(classify_structured("").unwrap().generic);
        let c = classify_structured("ASK-INFO B\nASK-INFO").unwrap();
        assert_eq!(c.info_appeals, vec![Some(Proposal::B), None]);
    }

    #[test]
    fn structured_errors_name_the_token() {
        let e = classify_structured("DISCLOSE D 1 +1").unwrap_err();
        assert!(matches!(e, ClassifyError::Parse { ref token, .. } if token == "D"));
        let e = classify_structured("DISCLOSE A 3 +1").unwrap_err();
        assert!(matches!(e, ClassifyError::Parse { ref token, .. } if token == "3"));
        let e = classify_structured("DISCLOSE A 1 1").unwrap_err();
        assert!(matches!(e, ClassifyError::Parse { ref token, .. } if token == "1"));
        let e = classify_structured("CHAT hi\nSHOUT").unwrap_err();
        assert!(matches!(e, ClassifyError::Parse { line: 2, ref token } if token == "SHOUT"));
        assert!(matches!(
            classify_structured("DISCLOSE A"),
            Err(ClassifyError::MissingArgument { .. })
        ));
    }

    #[test]
    fn rules_examples() {
        let s = scenario::by_id("llm").unwrap();
        let c = classify_rules("Proposal A will increase development speed of LLMs.", &s);
        assert_eq!(c.disclosures, vec![Claim::new(Proposal::A, attr(1), Effect::Increase)]);
        let c = classify_rules("What do you know about the proposals?", &s);
        assert_eq!(c.info_appeals, vec![None]);
        assert!(classify_rules("Nice weather!", &s).generic);
    }

    #[test]
    fn rules_mixed_messages() {
        let s = scenario::by_id("llm").unwrap();
        let c = classify_rules(
            "Proposal C will decrease safety and control of LLMs, while B increases public trust. How do you feel about the attributes?",
            &s,
        );
        assert_eq!(
            c.disclosures,
            vec![
                Claim::new(Proposal::C, attr(0), Effect::Decrease),
                Claim::new(Proposal::B, attr(2), Effect::Increase),
            ]
        );
        assert!(c.motivational_appeal);
        let c = classify_rules("Proposal B will have no effect on public trust.", &s);
        assert_eq!(c.disclosures, vec![Claim::new(Proposal::B, attr(2), Effect::NoEffect)]);
        let c = classify_rules("Which proposal are you choosing?", &s);
        assert!(c.preference_query);
        let c = classify_rules("What do you know about proposal B?", &s);
        assert_eq!(c.info_appeals, vec![Some(Proposal::B)]);
    }

    #[test]
    fn rules_defer_to_structured_grammar() {
        let s = scenario::by_id("moon").unwrap();
        for text in ["DISCLOSE B 2 -1", "ASK-INFO C\nASK-VALUES", "CHAT hi there", "ASK-CHOICE"] {
            assert_eq!(classify_rules(text, &s), classify_structured(text).unwrap());
        }
    }
}
