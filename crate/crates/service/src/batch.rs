use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mindgames_core::agents::{LlmPersuader, OptimalPersuader, Persuader, PersuaderKind, RandomPersuader, DEFAULT_MESSAGE_CHARS};
use mindgames_core::analytics::{metrics_csv, persuasion_success, GroupField, MetricsReport, DEFAULT_BOOTSTRAP_ITERATIONS};
use mindgames_core::classify::ClassifierKind;
use mindgames_core::forge::{generate, GenerateOptions};
use mindgames_core::llm::{build_classifier, ChatClient};
use mindgames_core::model::GameInstance;
use mindgames_core::scenario;
use mindgames_core::session::{run_bot_game, Condition, SessionConfig, TargetKind, Transcript, DEFAULT_MAX_PERSUADER_TURNS};
use mindgames_core::transcript::to_jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub scenarios: Vec<String>,
    pub instance_seed: u64,
    /// Distinct instances drawn per scenario; games cycle through them.
    pub instances_per_scenario: usize,
    pub canonical_only: bool,
    pub games_per_condition: usize,
    pub persuader: PersuaderKind,
    pub target: TargetKind,
    pub classifier: ClassifierKind,
    pub conditions: Vec<Condition>,
    /// Seed for agent randomness; game `g` of condition `c` derives its own stream.
    pub seed: u64,
    pub random_draws: usize,
    pub max_persuader_turns: usize,
    pub bootstrap_iterations: usize,
    pub out: Option<PathBuf>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            scenarios: scenario::bot_wording().into_iter().map(|s| s.id).collect(),
            instance_seed: 0,
            instances_per_scenario: 40,
            canonical_only: false,
            games_per_condition: 200,
            persuader: PersuaderKind::Optimal,
            target: TargetKind::Bot,
            classifier: ClassifierKind::Structured,
            conditions: vec![Condition::Revealed, Condition::Hidden],
            seed: 0,
            random_draws: 6,
            max_persuader_turns: DEFAULT_MAX_PERSUADER_TURNS,
            bootstrap_iterations: DEFAULT_BOOTSTRAP_ITERATIONS,
            out: None,
        }
    }
}

#[derive(Debug)]
pub struct BatchResult {
    pub transcripts: Vec<Transcript>,
    pub rows: Vec<MetricsReport>,
    pub transcripts_path: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
}

/// `runs.jsonl` -> `runs.metrics.csv`.
pub fn metrics_path_for(out: &Path) -> PathBuf {
    out.with_extension("metrics.csv")
}

fn game_seed(base: u64, condition: usize, game: usize) -> u64 {
    base ^ ((condition as u64) << 48) ^ (game as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn instance_pool(config: &BatchConfig) -> Result<Vec<GameInstance>> {
    let opts = GenerateOptions {
        canonical_only: config.canonical_only,
        ..Default::default()
    };
    let mut pool = Vec::new();
    for id in &config.scenarios {
        let s = scenario::by_id(id).with_context(|| format!("unknown scenario {id:?}"))?;
        pool.extend(generate(config.instance_seed, &s, config.instances_per_scenario, &opts)?);
    }
    // Interleave scenarios so a short batch still covers all of them.
    let per = config.instances_per_scenario;
    let n = config.scenarios.len();
    Ok((0..pool.len()).map(|i| pool[(i % n) * per + i / n].clone()).collect())
}

/// Play every game, write transcripts and metrics when `out` is set.
///
/// Agent failures (an unreachable model endpoint, say) mark that game
/// incomplete and the batch carries on.
pub fn run_batch(config: &BatchConfig, llm: Option<Arc<dyn ChatClient>>) -> Result<BatchResult> {
    if config.games_per_condition == 0 {
        bail!("games per condition must be at least 1");
    }
    if config.conditions.is_empty() || config.scenarios.is_empty() {
        bail!("at least one condition and one scenario are required");
    }
    if config.instances_per_scenario == 0 {
        bail!("instances per scenario must be at least 1");
    }
    if config.target != TargetKind::Bot {
        bail!("batches run against the rational bot; human targets play through `serve`");
    }
    if config.persuader == PersuaderKind::Human {
        bail!("batches need an automated persuader (optimal, random or llm)");
    }
    if (config.persuader == PersuaderKind::Llm || config.classifier == ClassifierKind::Llm) && llm.is_none() {
        bail!("an llm agent or classifier needs a chat endpoint");
    }
    let classifier = build_classifier(config.classifier, llm.clone())?;
    let pool = instance_pool(config)?;

    let mut transcripts = Vec::new();
    for (ci, condition) in config.conditions.iter().enumerate() {
        for g in 0..config.games_per_condition {
            let seed = game_seed(config.seed, ci, g);
            let mut persuader: Box<dyn Persuader> = match config.persuader {
                PersuaderKind::Optimal => Box::new(OptimalPersuader::new()),
                PersuaderKind::Random => Box::new(RandomPersuader::new(seed, config.random_draws)),
                PersuaderKind::Llm => Box::new(LlmPersuader::new(llm.clone().expect("checked above"), DEFAULT_MESSAGE_CHARS)),
                PersuaderKind::Human => unreachable!("rejected above"),
            };
            let mut cfg = SessionConfig::bot_game(pool[g % pool.len()].clone(), *condition, config.persuader, config.classifier);
            cfg.seed = seed;
            cfg.max_persuader_turns = config.max_persuader_turns;
            if config.persuader == PersuaderKind::Random {
                cfg.random_draws = Some(config.random_draws);
            }
            transcripts.push(run_bot_game(cfg, classifier.clone(), persuader.as_mut())?);
        }
    }

    let rows = persuasion_success(&transcripts, &GroupField::DEFAULT, config.bootstrap_iterations, config.seed)?;
    let (mut transcripts_path, mut metrics_path) = (None, None);
    if let Some(out) = &config.out {
        let text: String = transcripts.iter().map(to_jsonl).collect();
        fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
        let mp = metrics_path_for(out);
        fs::write(&mp, metrics_csv(&rows)?).with_context(|| format!("writing {}", mp.display()))?;
        transcripts_path = Some(out.clone());
        metrics_path = Some(mp);
    }
    Ok(BatchResult {
        transcripts,
        rows,
        transcripts_path,
        metrics_path,
    })
}

/// Fixed-width table of the main columns.
pub fn format_table(rows: &[MetricsReport]) -> String {
    let mut out = format!(
        "{:<48} {:>6} {:>8} {:>17} {:>8} {:>6} {:>6} {:>6}\n",
        "group", "games", "success", "95% ci", "rational", "discl", "info", "motiv"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<48} {:>6} {:>8.4} {:>17} {:>8.4} {:>6.2} {:>6.2} {:>6.2}\n",
            r.group,
            r.games,
            r.persuasion_success,
            format!("[{:.3}, {:.3}]", r.persuasion_success_ci95.0, r.persuasion_success_ci95.1),
            r.rational_bot_success,
            r.mean_persuader_disclosures,
            r.mean_info_appeals,
            r.mean_motivational_appeals,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_games_rejected() {
        let cfg = BatchConfig { games_per_condition: 0, ..Default::default() };
        assert!(run_batch(&cfg, None).is_err());
    }

    #[test]
    fn llm_without_endpoint_rejected() {
        let cfg = BatchConfig { persuader: PersuaderKind::Llm, games_per_condition: 1, ..Default::default() };
        assert!(run_batch(&cfg, None).unwrap_err().to_string().contains("endpoint"));
    }

    #[test]
    fn pool_interleaves_scenarios() {
        let cfg = BatchConfig { instances_per_scenario: 2, ..Default::default() };
        let pool = instance_pool(&cfg).unwrap();
        let first: Vec<_> = pool.iter().take(5).map(|i| i.scenario_id.clone()).collect();
        assert_eq!(first, cfg.scenarios);
    }
}
