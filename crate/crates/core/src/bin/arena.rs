use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use arena_core::config::ExperimentConfig;
use arena_core::prompting::Templates;
use arena_core::report::{
    census_table, cmd_classify, cmd_enumerate, cmd_play, cmd_report, cmd_tournament, cmd_validate_prompts,
    default_golden_dir, round_table, PlayOptions, TournamentOptions,
};

#[derive(Parser)]
#[command(name = "arena", about = "Repeated 2x2 game tournaments", version)]
struct Cli {
    /// Experiment config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Refuse any network provider
    #[arg(long, global = true)]
    offline: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the 144 ordinal games as JSON lines and print the family census
    Enumerate,
    /// Family and equilibria of one game
    Classify { game: String },
    /// Play one match and print the round table
    Play {
        #[arg(long, default_value = "pd")]
        game: String,
        #[arg(long = "p1")]
        p1: String,
        #[arg(long = "p2")]
        p2: String,
        #[arg(long, default_value_t = 10)]
        rounds: u32,
        #[arg(long, default_value = "fj-given-points")]
        variant: String,
        #[arg(long, default_value = "none")]
        intervention: String,
        /// Prediction mode for LLM seats
        #[arg(long, default_value = "none")]
        mode: String,
    },
    /// Run the config's grid
    Tournament {
        /// Play all 144 games, not only the named families
        #[arg(long)]
        include_other_families: bool,
    },
    /// Rebuild metrics and charts for a run directory
    Report { run_dir: PathBuf },
    /// Check prompt renderings against the golden files
    ValidatePrompts {
        #[arg(long)]
        goldens: Option<PathBuf>,
        /// Rewrite the golden files from the current templates
        #[arg(long)]
        bless: bool,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Option<ExperimentConfig>> {
    path.as_ref().map(|p| ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))).transpose()
}

fn run(cli: Cli) -> Result<bool> {
    let config = load_config(&cli.config)?;
    match cli.command {
        Command::Enumerate => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("games.jsonl"));
            let census = cmd_enumerate(&out)?;
            print!("{}", census_table(&census));
            eprintln!("wrote {}", out.display());
            Ok(true)
        }
        Command::Classify { game } => {
            let c = cmd_classify(&game)?;
            println!("{}", serde_json::to_string_pretty(&c)?);
            Ok(true)
        }
        Command::Play { game, p1, p2, rounds, variant, intervention, mode } => {
            let out = cli.out.or_else(|| config.as_ref().map(|c| c.out_dir())).unwrap_or_else(|| PathBuf::from("runs"));
            let mut opts = PlayOptions::new(game, p1, p2, out);
            opts.rounds = rounds;
            opts.variant = variant;
            opts.intervention = intervention;
            opts.mode = mode;
            opts.seed = cli.seed.unwrap_or(0);
            opts.offline = cli.offline;
            let r = cmd_play(config.as_ref(), &opts)?;
            print!("{}", round_table(&r.transcript));
            eprintln!("wrote {}", r.path.display());
            Ok(r.transcript.valid)
        }
        Command::Tournament { include_other_families } => {
            let Some(config) = config else { bail!("tournament needs --config") };
            let opts = TournamentOptions { out: cli.out, offline: cli.offline, include_other_families, seed: cli.seed };
            let r = cmd_tournament(&config, &opts)?;
            let s = &r.summary;
            println!(
                "{} configs: {} played, {} reused, {} invalid, {} failed",
                r.configs,
                s.executed,
                s.reused,
                s.invalid,
                s.failures.len() - s.invalid
            );
            println!("provider calls: {} ({} network)", r.backend_calls, r.network_calls);
            for f in &s.failures {
                eprintln!(
                    "  {} {} vs {} on {}: {}",
                    &f.config_hash[..12],
                    f.agents[0],
                    f.agents[1],
                    f.game_id,
                    f.error
                );
            }
            println!("run directory: {}", r.run_dir.display());
            Ok(s.all_valid())
        }
        Command::Report { run_dir } => {
            let ts = cmd_report(&run_dir)?;
            let invalid = ts.iter().filter(|t| !t.valid).count();
            println!("{} transcripts, {invalid} invalid; reports in {}", ts.len(), run_dir.display());
            Ok(invalid == 0)
        }
        Command::ValidatePrompts { goldens, bless } => {
            let templates = match &config {
                Some(c) => c.templates()?,
                None => Templates::base(),
            };
            let dir = goldens.unwrap_or_else(default_golden_dir);
            let r = cmd_validate_prompts(&templates, &dir, bless)?;
            if bless {
                println!("blessed {} golden files in {}", r.blessed, dir.display());
            }
            for m in &r.mismatches {
                println!("MISMATCH {} line {}\n  - {}\n  + {}", m.name, m.line, m.expected, m.actual);
            }
            for n in &r.missing {
                println!("MISSING {n}");
            }
            for n in &r.stale {
                println!("STALE {n}");
            }
            for n in r.round_trip_failures.iter().chain(&r.payoff_changes) {
                println!("FAIL {n}");
            }
            println!(
                "{} goldens checked, {} parse round trips; {}",
                r.checked,
                r.round_trips,
                if r.passed() { "pass" } else { "FAIL" }
            );
            Ok(r.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
