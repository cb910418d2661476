//! Pure equilibria and dominant actions of the two classic games and one cyclic game.
//!
//! `cargo run --example equilibria`

use arena_core::game::{classify, enumerate_games, equilibrium_report, GameFamily, PayoffGame};

fn main() {
    for game in [PayoffGame::prisoners_dilemma(), PayoffGame::battle_of_the_sexes()] {
        let r = equilibrium_report(&game);
        let cells: Vec<String> =
            r.pure_nash.iter().map(|c| format!("({}, {})", game.actions[0][c.row], game.actions[1][c.col])).collect();
        println!("{}: equilibria {}", game.label(), cells.join(" "));
        println!("  dominant actions p1 {:?} p2 {:?}", r.dominant_p1, r.dominant_p2);
        if let Some(ord) = game.ordinal() {
            println!("  family {}", classify(&ord.canonicalize()));
        }
    }

    let cyclic = enumerate_games().into_iter().find(|g| classify(g) == GameFamily::Cyclic).unwrap();
    let r = equilibrium_report(&cyclic);
    println!(
        "first cyclic game {:?}: {} equilibria, best responses cycle: {}",
        cyclic.ranks(),
        r.pure_nash.len(),
        r.best_response_cycle
    );
}
