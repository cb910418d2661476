//! Coordination in the Battle of the Sexes: fixed choices versus alternation.
//!
//! `cargo run --example battle_of_the_sexes`

use arena_core::agents::AgentSpec;
use arena_core::engine::{play_match, MatchConfig, MatchContext};
use arena_core::game::PayoffGame;
use arena_core::prompting::Templates;

fn main() -> anyhow::Result<()> {
    let templates = Templates::base();
    let ctx = MatchContext { client: None, templates: &templates };
    let pairs = [
        ("both always F", AgentSpec::Constant { action: 0 }, AgentSpec::Constant { action: 0 }),
        ("two alternators", AgentSpec::Alternator, AgentSpec::Alternator),
        ("F vs alternator", AgentSpec::Constant { action: 0 }, AgentSpec::Alternator),
    ];
    for (name, a, b) in pairs {
        let cfg = MatchConfig::new("bos", PayoffGame::battle_of_the_sexes(), a, b);
        let t = play_match(&cfg, ctx)?.transcript;
        let m = t.metrics.expect("valid match");
        let moves: String =
            t.rounds.iter().map(|r| format!("{}{} ", ["F", "J"][r.actions[0]], ["F", "J"][r.actions[1]])).collect();
        println!("{name:<16} {moves}");
        println!(
            "{:<16} totals {:?}  coordination {:.1}  preferred option {:?}",
            "", t.totals, m.coordination_rate, m.preferred_option_rate
        );
    }
    Ok(())
}
