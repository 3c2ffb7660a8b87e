use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::session::{Role, TargetKind, Transcript};

use super::{bootstrap_ci, rational_replay, AnalyticsError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCounts {
    pub persuader_disclosures: usize,
    pub info_appeals: usize,
    pub motivational_appeals: usize,
    /// Claims volunteered by a human target; always zero for bot targets.
    pub target_disclosures: usize,
}

pub fn count_moves(t: &Transcript) -> MoveCounts {
    let mut m = MoveCounts::default();
    for e in &t.events {
        let Some(c) = &e.classification else { continue };
        match e.role {
            Role::Persuader => {
                m.persuader_disclosures += c.disclosures.len();
                m.info_appeals += c.info_appeals.len();
                m.motivational_appeals += usize::from(c.motivational_appeal);
            }
            Role::Target if t.config.target_kind == TargetKind::Human => {
                m.target_disclosures += c.disclosures.len();
            }
            Role::Target => {}
        }
    }
    m
}

/// A transcript attribute that rows can be grouped on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupField {
    Persuader,
    Condition,
    Mode,
    Target,
    Classifier,
    Scenario,
}

impl GroupField {
    pub const DEFAULT: [GroupField; 3] = [GroupField::Persuader, GroupField::Condition, GroupField::Mode];

    fn name(self) -> &'static str {
        match self {
            GroupField::Persuader => "persuader",
            GroupField::Condition => "condition",
            GroupField::Mode => "mode",
            GroupField::Target => "target",
            GroupField::Classifier => "classifier",
            GroupField::Scenario => "scenario",
        }
    }

    fn value(self, t: &Transcript) -> String {
        let json = |v: serde_json::Value| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
        let c = &t.config;
        match self {
            GroupField::Persuader => json(serde_json::to_value(c.persuader_kind).unwrap_or_default()),
            GroupField::Condition => json(serde_json::to_value(c.condition).unwrap_or_default()),
            GroupField::Mode => json(serde_json::to_value(c.mode).unwrap_or_default()),
            GroupField::Target => json(serde_json::to_value(c.target_kind).unwrap_or_default()),
            GroupField::Classifier => json(serde_json::to_value(c.classifier_kind).unwrap_or_default()),
            GroupField::Scenario => c.instance.scenario_id.clone(),
        }
    }
}

impl FromStr for GroupField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            GroupField::Persuader,
            GroupField::Condition,
            GroupField::Mode,
            GroupField::Target,
            GroupField::Classifier,
            GroupField::Scenario,
        ]
        .into_iter()
        .find(|f| f.name() == s.trim())
        .ok_or_else(|| format!("unknown group field {s:?}"))
    }
}

/// One row per group. Success is averaged per participant first; games
/// without a participant id count as their own participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub group: String,
    pub games: usize,
    pub participants: usize,
    pub incomplete: usize,
    pub persuasion_success: f64,
    pub persuasion_success_ci95: (f64, f64),
    /// The same rate with every game weighted equally.
    pub persuasion_success_by_game: f64,
    pub rational_bot_success: f64,
    pub rational_bot_success_ci95: (f64, f64),
    pub mean_persuader_disclosures: f64,
    pub mean_info_appeals: f64,
    pub mean_motivational_appeals: f64,
    pub mean_target_disclosures: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn participant_means(games: &[(&str, f64)]) -> Vec<f64> {
    let mut by: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (p, x) in games {
        by.entry(p).or_default().push(*x);
    }
    by.values().map(|v| mean(v)).collect()
}

/// Interval widened to include the estimate; percentile intervals can exclude it on skewed data.
fn ci_around(values: &[f64], estimate: f64, iterations: usize, seed: u64) -> Result<(f64, f64), AnalyticsError> {
    let (lo, hi) = bootstrap_ci(values, iterations, 0.95, seed)?;
    Ok((lo.min(estimate), hi.max(estimate)))
}

pub fn persuasion_success(
    transcripts: &[Transcript],
    group_by: &[GroupField],
    iterations: usize,
    seed: u64,
) -> Result<Vec<MetricsReport>, AnalyticsError> {
    let mut groups: BTreeMap<String, Vec<(usize, &Transcript)>> = BTreeMap::new();
    for (i, t) in transcripts.iter().enumerate() {
        let key = if group_by.is_empty() {
            "all".to_string()
        } else {
            group_by
                .iter()
                .map(|f| format!("{}={}", f.name(), f.value(t)))
                .collect::<Vec<_>>()
                .join(";")
        };
        groups.entry(key).or_default().push((i, t));
    }

    let mut rows = Vec::new();
    for (group, members) in groups {
        let incomplete = members.iter().filter(|(_, t)| t.incomplete.is_some()).count();
        let complete: Vec<(String, &Transcript)> = members
            .iter()
            .filter(|(_, t)| t.incomplete.is_none())
            .map(|(i, t)| (t.config.participant.clone().unwrap_or_else(|| format!("game-{i}")), *t))
            .collect();
        if complete.is_empty() {
            continue;
        }
        let success: Vec<(&str, f64)> = complete
            .iter()
            .map(|(p, t)| (p.as_str(), f64::from(u8::from(t.success))))
            .collect();
        let rational: Vec<(&str, f64)> = complete
            .iter()
            .map(|(p, t)| rational_replay(t).map(|(_, ok)| (p.as_str(), f64::from(u8::from(ok)))))
            .collect::<Result<_, _>>()?;
        let moves: Vec<MoveCounts> = complete.iter().map(|(_, t)| count_moves(t)).collect();
        let move_mean = |f: fn(&MoveCounts) -> usize| mean(&moves.iter().map(|m| f(m) as f64).collect::<Vec<_>>());

        let sp = participant_means(&success);
        let rp = participant_means(&rational);
        let ps = mean(&sp);
        let rs = mean(&rp);
        rows.push(MetricsReport {
            group,
            games: complete.len(),
            participants: sp.len(),
            incomplete,
            persuasion_success: ps,
            persuasion_success_ci95: ci_around(&sp, ps, iterations, seed)?,
            persuasion_success_by_game: mean(&success.iter().map(|(_, x)| *x).collect::<Vec<_>>()),
            rational_bot_success: rs,
            rational_bot_success_ci95: ci_around(&rp, rs, iterations, seed.wrapping_add(1))?,
            mean_persuader_disclosures: move_mean(|m| m.persuader_disclosures),
            mean_info_appeals: move_mean(|m| m.info_appeals),
            mean_motivational_appeals: move_mean(|m| m.motivational_appeals),
            mean_target_disclosures: move_mean(|m| m.target_disclosures),
        });
    }
    Ok(rows)
}

pub const METRICS_HEADER: [&str; 16] = [
    "group",
    "games",
    "participants",
    "incomplete",
    "persuasion_success",
    "persuasion_success_lo",
    "persuasion_success_hi",
    "persuasion_success_by_game",
    "rational_bot_success",
    "rational_bot_success_lo",
    "rational_bot_success_hi",
    "mean_persuader_disclosures",
    "mean_info_appeals",
    "mean_motivational_appeals",
    "mean_target_disclosures",
    "chance_line",
];

/// One row per group with the columns in [`METRICS_HEADER`].
pub fn metrics_csv(rows: &[MetricsReport]) -> Result<String, AnalyticsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            r.games.to_string(),
            r.participants.to_string(),
            r.incomplete.to_string(),
            r.persuasion_success.to_string(),
            r.persuasion_success_ci95.0.to_string(),
            r.persuasion_success_ci95.1.to_string(),
            r.persuasion_success_by_game.to_string(),
            r.rational_bot_success.to_string(),
            r.rational_bot_success_ci95.0.to_string(),
            r.rational_bot_success_ci95.1.to_string(),
            r.mean_persuader_disclosures.to_string(),
            r.mean_info_appeals.to_string(),
            r.mean_motivational_appeals.to_string(),
            r.mean_target_disclosures.to_string(),
            super::CHANCE_LINE.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv output is utf-8"))
}

/// Long-format rows `group,metric,value,lo,hi` for plotting.
pub fn tidy_csv(rows: &[MetricsReport]) -> Result<String, AnalyticsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "metric", "value", "lo", "hi"])?;
    for r in rows {
        let with_ci = [
            ("persuasion_success", r.persuasion_success, Some(r.persuasion_success_ci95)),
            ("rational_bot_success", r.rational_bot_success, Some(r.rational_bot_success_ci95)),
            ("persuader_disclosures", r.mean_persuader_disclosures, None),
            ("info_appeals", r.mean_info_appeals, None),
            ("motivational_appeals", r.mean_motivational_appeals, None),
            ("target_disclosures", r.mean_target_disclosures, None),
        ];
        for (metric, value, ci) in with_ci {
            let (lo, hi) = ci.map(|(l, h)| (l.to_string(), h.to_string())).unwrap_or_default();
            w.write_record([r.group.as_str(), metric, &value.to_string(), &lo, &hi])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv output is utf-8"))
}
