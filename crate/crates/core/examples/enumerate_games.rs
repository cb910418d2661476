//! List the 144 strict-ordinal 2x2 games with their families.
//!
//! `cargo run --example enumerate_games`

use arena_core::game::{classify, enumerate_games, family_census};

fn main() {
    let games = enumerate_games();
    for (i, g) in games.iter().enumerate().take(12) {
        let [p1, p2] = g.ranks();
        println!("ordinal:{i:<3} p1 {p1:?}  p2 {p2:?}  {}", classify(g));
    }
    println!("... {} games in all\n", games.len());
    for (family, n) in family_census() {
        println!("{:<18} {n}", family.name());
    }
}
