//! Render one round prompt under a few presentation variants and parse answers back.
//!
//! `cargo run --example prompt_variants`

use arena_core::agents::{History, Round};
use arena_core::game::{PayoffGame, Seat};
use arena_core::prompting::{parse_choice, variant_space, Frame, Intervention, Query, Templates};

fn main() -> anyhow::Result<()> {
    let t = Templates::base();
    let game = PayoffGame::prisoners_dilemma();
    let history: History = [Round::played(&game, 1, 0)].into_iter().collect();
    let frame = Frame::Player(Seat::P1);
    let variants = variant_space();
    for v in [variants[0], variants[10], variants[17]] {
        let rules = t.render_rules(&game, frame, &v, 10);
        let prompt = t.render_round_prompt(&rules, frame, &history, &Intervention::FallibleOpponent, Query::Act, &v)?;
        println!("=== {v}\n{prompt}");
        for answer in [v.label(0).to_string(), format!("Option {}.", v.label(1)), "maybe".into()] {
            println!("  {answer:?} -> {:?}", parse_choice(&answer, &v).map_err(|e| e.to_string()));
        }
    }
    Ok(())
}
