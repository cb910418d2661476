//! Expand and run a small grid, then aggregate scores per agent and family.
//!
//! `cargo run --example tournament_grid`

use arena_core::engine::MatchContext;
use arena_core::game::Seat;
use arena_core::prompting::Templates;
use arena_core::tournament::{aggregate, expand_grid, run_grid, Focus, GridSpec, GroupKey, RunDir};

fn main() -> anyhow::Result<()> {
    let mut spec = GridSpec::new(["constant:0", "defect-then-cooperate", "alternator"]);
    spec.games = vec!["family:prisoners-dilemma".into(), "family:biased".into()];
    let configs = expand_grid(&spec)?;
    println!("{} matches", configs.len());

    let dir = tempfile::tempdir()?;
    let templates = Templates::base();
    let ctx = MatchContext { client: None, templates: &templates };
    let run = RunDir::new(dir.path());
    let summary = run_grid(&configs, ctx, &run, None)?;
    println!("played {}, invalid {}", summary.executed, summary.invalid);

    for row in aggregate(&summary.transcripts, &[GroupKey::Agent, GroupKey::Family], Focus::EachSeat) {
        println!(
            "{:<24} {:<18} n={:<3} score {:.3} +/- {:.3}",
            row.agent.unwrap(),
            row.family.unwrap(),
            row.n,
            row.mean_score,
            row.ci_half_width
        );
    }
    let again = run_grid(&configs, ctx, &run, None)?;
    println!("second run reused {} transcripts", again.reused);
    let p1 = aggregate(&summary.transcripts, &[GroupKey::Agent, GroupKey::Opponent], Focus::Seat(Seat::P1));
    println!("{} agent x opponent cells", p1.len());
    Ok(())
}
