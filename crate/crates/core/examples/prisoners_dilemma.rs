//! Scripted strategies in the repeated Prisoner's Dilemma.
//!
//! `cargo run --example prisoners_dilemma`

use arena_core::agents::AgentSpec;
use arena_core::engine::{play_match, MatchConfig, MatchContext};
use arena_core::game::PayoffGame;
use arena_core::prompting::Templates;
use arena_core::report::round_table;

fn main() -> anyhow::Result<()> {
    let templates = Templates::base();
    let ctx = MatchContext { client: None, templates: &templates };
    let cfg = MatchConfig::new(
        "pd",
        PayoffGame::prisoners_dilemma(),
        AgentSpec::Constant { action: 0 },
        AgentSpec::DefectThenCooperate,
    );
    let t = play_match(&cfg, ctx)?.transcript;
    println!("always defect vs defect once, then cooperate");
    print!("{}", round_table(&t));
    let m = t.metrics.expect("valid match");
    println!("defection rates {:?}", m.defection_rate);
    Ok(())
}
