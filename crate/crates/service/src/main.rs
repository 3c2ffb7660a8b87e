use std::fs;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mindgames_core::agents::PersuaderKind;
use mindgames_core::analytics::{
    ends_in_tie, exclusion_filter, metrics_csv, p_win_closed, p_win_oracle, persuasion_success, rational_replay,
    tidy_csv, utility_category, ExclusionMode, GroupField, DEFAULT_BOOTSTRAP_ITERATIONS,
};
use mindgames_core::classify::ClassifierKind;
use mindgames_core::forge::{check_instance, generate, GenerateOptions};
use mindgames_core::llm::{ChatClient, HttpChatClient, LlmClientConfig};
use mindgames_core::scenario;
use mindgames_core::session::{Condition, TargetKind, DEFAULT_MAX_PERSUADER_TURNS};
use mindgames_core::transcript::{instances_to_jsonl, read_instances, read_jsonl};
use mindgames_service::batch::{format_table, run_batch, BatchConfig};
use mindgames_service::server::{router, AppState};

#[derive(Parser)]
#[command(name = "mindgames", version, about = "Persuasion games with a rational target")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PersuaderArg {
    Optimal,
    Random,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Bot,
    Human,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditionArg {
    Revealed,
    Hidden,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Structured,
    Rules,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExcludeArg {
    Assigned,
    Inferred,
}

#[derive(Subcommand)]
enum Command {
    /// Generate game instances as JSON lines.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario id, or `all` for the five bot-game scenarios.
        #[arg(long, default_value = "all")]
        scenario: String,
        #[arg(long, default_value_t = 40)]
        count: usize,
        #[arg(long)]
        canonical_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate instances from a JSON array or JSON-lines file.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Play automated persuaders against the rational bot.
    Simulate {
        #[arg(long, value_enum, default_value = "optimal")]
        persuader: PersuaderArg,
        #[arg(long, value_enum, default_value = "bot")]
        target: TargetArg,
        #[arg(long, value_enum, default_value = "both")]
        condition: ConditionArg,
        /// Games per condition.
        #[arg(long, default_value_t = 200)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated scenario ids; defaults to the five bot-game scenarios.
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<String>,
        #[arg(long, default_value_t = 0)]
        instance_seed: u64,
        #[arg(long, default_value_t = 40)]
        instances_per_scenario: usize,
        #[arg(long)]
        canonical_only: bool,
        #[arg(long, value_enum, default_value = "structured")]
        classifier: ClassifierArg,
        /// Disclosures drawn by the random persuader.
        #[arg(long, default_value_t = 6)]
        draws: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_PERSUADER_TURNS)]
        max_turns: usize,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_ITERATIONS)]
        bootstrap_iters: usize,
    },
    /// Print the random-disclosure win probability for n = 0..=n_max.
    Baseline {
        #[arg(long, default_value_t = 20)]
        n_max: u32,
    },
    /// Replay transcripts through a fresh rational bot.
    Replay {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Success rates, move counts and intervals from transcripts.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated: persuader, condition, mode, target, classifier, scenario.
        #[arg(long, value_delimiter = ',', default_value = "persuader,condition,mode")]
        group_by: Vec<GroupField>,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_ITERATIONS)]
        bootstrap_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Drop human-target games whose pre-choice was not the initial best option.
        #[arg(long, value_enum)]
        exclude: Option<ExcludeArg>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        tidy: Option<PathBuf>,
    },
    /// Serve live sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Games generated per scenario for selection.
        #[arg(long, default_value_t = 40)]
        pool_size: usize,
    },
}

fn llm_client() -> Result<Arc<dyn ChatClient>> {
    Ok(Arc::new(HttpChatClient::new(LlmClientConfig::from_env())?))
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn read_transcripts(input: &PathBuf) -> Result<Vec<mindgames_core::session::Transcript>> {
    let f = fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    Ok(read_jsonl(BufReader::new(f))?)
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Generate {
            seed,
            scenario: id,
            count,
            canonical_only,
            out,
        } => {
            let scenarios = if id == "all" {
                scenario::bot_wording()
            } else {
                vec![scenario::by_id(&id).with_context(|| format!("unknown scenario {id:?}"))?]
            };
            let opts = GenerateOptions {
                canonical_only,
                ..Default::default()
            };
            let mut all = Vec::new();
            for s in &scenarios {
                all.extend(generate(seed, s, count, &opts)?);
            }
            write_out(&out, &instances_to_jsonl(&all))?;
        }
        Command::Check { input } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let instances = read_instances(&text)?;
            let mut bad = 0;
            for (i, inst) in instances.iter().enumerate() {
                let report = check_instance(inst);
                if !report.is_valid() {
                    bad += 1;
                    println!("{i}: INVALID {}", serde_json::to_string(&report)?);
                }
            }
            println!("{} instances, {} valid, {bad} invalid", instances.len(), instances.len() - bad);
            if bad > 0 {
                std::process::exit(1);
            }
        }
        Command::Simulate {
            persuader,
            target,
            condition,
            games,
            seed,
            out,
            scenarios,
            instance_seed,
            instances_per_scenario,
            canonical_only,
            classifier,
            draws,
            max_turns,
            bootstrap_iters,
        } => {
            let mut config = BatchConfig {
                instance_seed,
                instances_per_scenario,
                canonical_only,
                games_per_condition: games,
                persuader: match persuader {
                    PersuaderArg::Optimal => PersuaderKind::Optimal,
                    PersuaderArg::Random => PersuaderKind::Random,
                    PersuaderArg::Llm => PersuaderKind::Llm,
                },
                target: match target {
                    TargetArg::Bot => TargetKind::Bot,
                    TargetArg::Human => TargetKind::Human,
                },
                classifier: match classifier {
                    ClassifierArg::Structured => ClassifierKind::Structured,
                    ClassifierArg::Rules => ClassifierKind::Rules,
                    ClassifierArg::Llm => ClassifierKind::Llm,
                },
                conditions: match condition {
                    ConditionArg::Revealed => vec![Condition::Revealed],
                    ConditionArg::Hidden => vec![Condition::Hidden],
                    ConditionArg::Both => vec![Condition::Revealed, Condition::Hidden],
                },
                seed,
                random_draws: draws,
                max_persuader_turns: max_turns,
                bootstrap_iterations: bootstrap_iters,
                out,
                ..Default::default()
            };
            if !scenarios.is_empty() {
                config.scenarios = scenarios;
            }
            let needs_llm = config.persuader == PersuaderKind::Llm || config.classifier == ClassifierKind::Llm;
            let llm = if needs_llm { Some(llm_client()?) } else { None };
            let result = run_batch(&config, llm)?;
            print!("{}", format_table(&result.rows));
            if let (Some(t), Some(m)) = (&result.transcripts_path, &result.metrics_path) {
                println!("transcripts: {}\nmetrics: {}", t.display(), m.display());
            }
        }
        Command::Baseline { n_max } => {
            println!("n,p_win_closed,p_win_dp");
            for n in 0..=n_max {
                println!("{n},{:.10},{:.10}", p_win_closed(n), p_win_oracle(n));
            }
        }
        Command::Replay { input } => {
            let transcripts = read_transcripts(&input)?;
            let mut agree = 0;
            println!("game,final,replay,agree,category,tie_at_end");
            for (i, t) in transcripts.iter().enumerate() {
                let (r, _) = rational_replay(t)?;
                agree += usize::from(r == t.final_choice);
                println!(
                    "{i},{},{r},{},{},{}",
                    t.final_choice,
                    r == t.final_choice,
                    utility_category(t)?.label(),
                    ends_in_tie(t)?
                );
            }
            eprintln!("{agree}/{} final choices match the replay", transcripts.len());
        }
        Command::Analyze {
            input,
            group_by,
            bootstrap_iters,
            seed,
            exclude,
            csv,
            json,
            tidy,
        } => {
            let mut transcripts = read_transcripts(&input)?;
            if let Some(mode) = exclude {
                let mode = match mode {
                    ExcludeArg::Assigned => ExclusionMode::Assigned,
                    ExcludeArg::Inferred => ExclusionMode::Inferred,
                };
                let (kept, excluded) = exclusion_filter(transcripts, mode);
                eprintln!("excluded {} games", excluded.len());
                transcripts = kept;
            }
            if transcripts.is_empty() {
                bail!("no transcripts to analyze");
            }
            let rows = persuasion_success(&transcripts, &group_by, bootstrap_iters, seed)?;
            print!("{}", format_table(&rows));
            if let Some(p) = csv {
                fs::write(&p, metrics_csv(&rows)?)?;
            }
            if let Some(p) = json {
                fs::write(&p, serde_json::to_string_pretty(&rows)?)?;
            }
            if let Some(p) = tidy {
                fs::write(&p, tidy_csv(&rows)?)?;
            }
        }
        Command::Serve {
            port,
            static_dir,
            seed,
            pool_size,
        } => {
            let llm = std::env::var(mindgames_core::llm::DEFAULT_ENDPOINT_ENV)
                .is_ok()
                .then(llm_client)
                .transpose()?;
            let state = Arc::new(AppState::new(seed, pool_size, llm)?);
            let app = router(state, static_dir);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
                log::info!("listening on {}", listener.local_addr()?);
                axum::serve(listener, app).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}
