//! Two-player, two-action games.
//!
//! [`PayoffGame`] is the concrete bimatrix a match is played on. [`OrdinalGame`] is the
//! strict-ordinal abstraction used for the 144-game taxonomy: each player ranks the four
//! outcomes 1 (worst) to 4 (best) without ties. Ordinal games are identified up to
//! relabeling of each player's actions (swap rows, swap columns, or both); player seats
//! are never swapped, so every game has an orbit of exactly four raw rank tables.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// One of the two seats at the table. Player 1 picks the row, Player 2 the column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Seat {
    P1,
    P2,
}

impl Seat {
    pub const BOTH: [Seat; 2] = [Seat::P1, Seat::P2];

    pub fn index(self) -> usize {
        match self {
            Seat::P1 => 0,
            Seat::P2 => 1,
        }
    }

    pub fn other(self) -> Seat {
        match self {
            Seat::P1 => Seat::P2,
            Seat::P2 => Seat::P1,
        }
    }

    /// 1 or 2, as printed in reports.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Player {}", self.number())
    }
}

/// An outcome of the game: Player 1's action (row) and Player 2's action (column).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const ALL: [Cell; 4] =
        [Cell { row: 0, col: 0 }, Cell { row: 0, col: 1 }, Cell { row: 1, col: 0 }, Cell { row: 1, col: 1 }];

    pub fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    /// The action `seat` plays in this cell.
    pub fn action_of(self, seat: Seat) -> usize {
        match seat {
            Seat::P1 => self.row,
            Seat::P2 => self.col,
        }
    }

    /// The cell where `seat` plays `own` and the opponent plays `other`.
    pub fn from_seat(seat: Seat, own: usize, other: usize) -> Self {
        match seat {
            Seat::P1 => Cell::new(own, other),
            Seat::P2 => Cell::new(other, own),
        }
    }

    fn flat(self) -> usize {
        self.row * 2 + self.col
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GameError {
    #[error("ranks for player {player} are not a permutation of 1..=4: {ranks:?}")]
    NotAPermutation { player: u8, ranks: [u8; 4] },
    #[error("player {player} needs two distinct, non-empty action labels")]
    BadActions { player: u8 },
    #[error("not a coordination game: both same-action cells must be pure equilibria")]
    NotCoordination,
    #[error("sweep needs at least one step")]
    ZeroSteps,
    #[error("{0}")]
    Invalid(String),
}

/// Anything with a payoff for each seat in each of the four cells.
pub trait Bimatrix {
    fn value(&self, seat: Seat, cell: Cell) -> i64;
}

/// A concrete payoff bimatrix with non-negative integer payoffs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPayoffGame")]
pub struct PayoffGame {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `actions[player][action]`.
    pub actions: [[String; 2]; 2],
    /// `payoffs[player][row][col]`.
    pub payoffs: [[[u32; 2]; 2]; 2],
}

#[derive(Deserialize)]
struct RawPayoffGame {
    name: Option<String>,
    actions: [[String; 2]; 2],
    payoffs: [[[u32; 2]; 2]; 2],
}

impl TryFrom<RawPayoffGame> for PayoffGame {
    type Error = GameError;

    fn try_from(raw: RawPayoffGame) -> Result<Self, GameError> {
        PayoffGame::new(raw.name, raw.actions, raw.payoffs)
    }
}

impl PayoffGame {
    pub fn new(
        name: Option<String>,
        actions: [[String; 2]; 2],
        payoffs: [[[u32; 2]; 2]; 2],
    ) -> Result<Self, GameError> {
        for (i, pair) in actions.iter().enumerate() {
            if pair[0].trim().is_empty() || pair[1].trim().is_empty() || pair[0] == pair[1] {
                return Err(GameError::BadActions { player: i as u8 + 1 });
            }
        }
        Ok(PayoffGame { name, actions, payoffs })
    }

    /// Default Prisoner's Dilemma. Action 0 is defection, action 1 cooperation.
    pub fn prisoners_dilemma() -> Self {
        PayoffGame {
            name: Some("prisoners-dilemma".into()),
            actions: [["Defect".into(), "Cooperate".into()], ["Defect".into(), "Cooperate".into()]],
            // rows/cols: [D, C]
            payoffs: [[[5, 10], [0, 8]], [[5, 0], [10, 8]]],
        }
    }

    /// Default Battle of the Sexes. Player 1 prefers coordinating on action 0, Player 2 on action 1.
    pub fn battle_of_the_sexes() -> Self {
        PayoffGame {
            name: Some("battle-of-the-sexes".into()),
            actions: [["Football".into(), "Ballet".into()], ["Football".into(), "Ballet".into()]],
            payoffs: [[[10, 0], [0, 7]], [[7, 0], [0, 10]]],
        }
    }

    pub fn payoff(&self, seat: Seat, cell: Cell) -> u32 {
        self.payoffs[seat.index()][cell.row][cell.col]
    }

    pub fn max_payoff(&self, seat: Seat) -> u32 {
        Cell::ALL.iter().map(|&c| self.payoff(seat, c)).max().unwrap_or(0)
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("unnamed")
    }

    /// The strict-ordinal game this matrix induces, if neither player has tied payoffs.
    pub fn ordinal(&self) -> Option<OrdinalGame> {
        let mut ranks = [[0u8; 4]; 2];
        for seat in Seat::BOTH {
            let values: Vec<u32> = Cell::ALL.iter().map(|&c| self.payoff(seat, c)).collect();
            for (i, v) in values.iter().enumerate() {
                if values.iter().filter(|w| *w == v).count() > 1 {
                    return None;
                }
                ranks[seat.index()][i] = 1 + values.iter().filter(|w| *w < v).count() as u8;
            }
        }
        OrdinalGame::new(ranks).ok()
    }
}

impl Bimatrix for PayoffGame {
    fn value(&self, seat: Seat, cell: Cell) -> i64 {
        i64::from(self.payoff(seat, cell))
    }
}

/// A strict-ordinal 2x2 game: `ranks[player][row * 2 + col]`, 4 = best.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[[u8; 4]; 2]", into = "[[u8; 4]; 2]")]
pub struct OrdinalGame {
    ranks: [[u8; 4]; 2],
}

impl TryFrom<[[u8; 4]; 2]> for OrdinalGame {
    type Error = GameError;

    fn try_from(ranks: [[u8; 4]; 2]) -> Result<Self, GameError> {
        OrdinalGame::new(ranks)
    }
}

impl From<OrdinalGame> for [[u8; 4]; 2] {
    fn from(g: OrdinalGame) -> Self {
        g.ranks
    }
}

/// Relabelings applied to both players' tables at once.
const RELABELINGS: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];

impl OrdinalGame {
    pub fn new(ranks: [[u8; 4]; 2]) -> Result<Self, GameError> {
        for (i, table) in ranks.iter().enumerate() {
            let mut seen = [false; 4];
            for &r in table {
                if !(1..=4).contains(&r) || seen[usize::from(r - 1)] {
                    return Err(GameError::NotAPermutation { player: i as u8 + 1, ranks: *table });
                }
                seen[usize::from(r - 1)] = true;
            }
        }
        Ok(OrdinalGame { ranks })
    }

    pub fn ranks(&self) -> [[u8; 4]; 2] {
        self.ranks
    }

    pub fn rank(&self, seat: Seat, cell: Cell) -> u8 {
        self.ranks[seat.index()][cell.flat()]
    }

    /// Apply a row swap and/or column swap to both players' tables.
    pub fn relabel(&self, swap_rows: bool, swap_cols: bool) -> OrdinalGame {
        let mut ranks = [[0u8; 4]; 2];
        for (p, table) in ranks.iter_mut().enumerate() {
            for cell in Cell::ALL {
                let src = Cell::new(cell.row ^ usize::from(swap_rows), cell.col ^ usize::from(swap_cols));
                table[cell.flat()] = self.ranks[p][src.flat()];
            }
        }
        OrdinalGame { ranks }
    }

    /// The four members of this game's relabeling orbit.
    pub fn orbit(&self) -> [OrdinalGame; 4] {
        RELABELINGS.map(|(r, c)| self.relabel(r, c))
    }

    /// Lexicographically smallest member of the orbit (Player 1's table first).
    pub fn canonicalize(&self) -> OrdinalGame {
        self.orbit().into_iter().min().expect("orbit is non-empty")
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonicalize()
    }

    /// Ranks used directly as payoffs, with neutral action labels.
    pub fn to_payoff_game(&self, name: Option<String>) -> PayoffGame {
        let mut payoffs = [[[0u32; 2]; 2]; 2];
        for seat in Seat::BOTH {
            for cell in Cell::ALL {
                payoffs[seat.index()][cell.row][cell.col] = u32::from(self.rank(seat, cell));
            }
        }
        PayoffGame { name, actions: [["F".into(), "J".into()], ["F".into(), "J".into()]], payoffs }
    }
}

impl Bimatrix for OrdinalGame {
    fn value(&self, seat: Seat, cell: Cell) -> i64 {
        i64::from(self.rank(seat, cell))
    }
}

impl fmt::Display for OrdinalGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.ranks;
        write!(f, "[{}/{} {}/{} | {}/{} {}/{}]", r[0][0], r[1][0], r[0][1], r[1][1], r[0][2], r[1][2], r[0][3], r[1][3])
    }
}

/// All canonical strict-ordinal games, sorted.
///
/// Every orbit has exactly one member with Player 1's worst outcome in the top-left
/// cell, and that member is the lexicographic minimum, so the canonical forms are
/// exactly the tables with `ranks[0][0] == 1`.
pub fn enumerate_games() -> Vec<OrdinalGame> {
    let perms = permutations_of_four();
    let mut games = Vec::with_capacity(144);
    for p1 in perms.iter().filter(|p| p[0] == 1) {
        for p2 in &perms {
            games.push(OrdinalGame { ranks: [*p1, *p2] });
        }
    }
    games.sort();
    debug_assert!(games.iter().all(OrdinalGame::is_canonical));
    games
}

fn permutations_of_four() -> Vec<[u8; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 1..=4u8 {
        for b in (1..=4).filter(|&b| b != a) {
            for c in (1..=4).filter(|&c| c != a && c != b) {
                out.push([a, b, c, 10 - a - b - c]);
            }
        }
    }
    out
}

/// Cells where each player's action is a strict best response to the other's.
pub fn pure_nash<G: Bimatrix + ?Sized>(game: &G) -> Vec<Cell> {
    Cell::ALL
        .into_iter()
        .filter(|&cell| {
            let row_dev = Cell::new(1 - cell.row, cell.col);
            let col_dev = Cell::new(cell.row, 1 - cell.col);
            game.value(Seat::P1, cell) > game.value(Seat::P1, row_dev)
                && game.value(Seat::P2, cell) > game.value(Seat::P2, col_dev)
        })
        .collect()
}

/// The action that is strictly better for `seat` against both opponent actions.
pub fn dominant_action<G: Bimatrix + ?Sized>(game: &G, seat: Seat) -> Option<usize> {
    (0..2).find(|&own| {
        (0..2).all(|other| {
            game.value(seat, Cell::from_seat(seat, own, other))
                > game.value(seat, Cell::from_seat(seat, 1 - own, other))
        })
    })
}

/// True if some cell is strictly better than `cell` for both players.
pub fn pareto_dominated<G: Bimatrix + ?Sized>(game: &G, cell: Cell) -> bool {
    Cell::ALL.iter().any(|&o| {
        game.value(Seat::P1, o) > game.value(Seat::P1, cell) && game.value(Seat::P2, o) > game.value(Seat::P2, cell)
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub pure_nash: Vec<Cell>,
    pub dominant_p1: Option<usize>,
    pub dominant_p2: Option<usize>,
    pub best_response_cycle: bool,
}

pub fn equilibrium_report<G: Bimatrix + ?Sized>(game: &G) -> EquilibriumReport {
    let pure_nash = pure_nash(game);
    EquilibriumReport {
        best_response_cycle: pure_nash.is_empty(),
        dominant_p1: dominant_action(game, Seat::P1),
        dominant_p2: dominant_action(game, Seat::P2),
        pure_nash,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameFamily {
    WinWin,
    PrisonersDilemma,
    Unfair,
    Cyclic,
    Biased,
    SecondBest,
    Other,
}

impl GameFamily {
    pub const ALL: [GameFamily; 7] = [
        GameFamily::WinWin,
        GameFamily::PrisonersDilemma,
        GameFamily::Unfair,
        GameFamily::Cyclic,
        GameFamily::Biased,
        GameFamily::SecondBest,
        GameFamily::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GameFamily::WinWin => "win-win",
            GameFamily::PrisonersDilemma => "prisoners-dilemma",
            GameFamily::Unfair => "unfair",
            GameFamily::Cyclic => "cyclic",
            GameFamily::Biased => "biased",
            GameFamily::SecondBest => "second-best",
            GameFamily::Other => "other",
        }
    }

    pub fn from_name(s: &str) -> Option<GameFamily> {
        GameFamily::ALL.into_iter().find(|f| f.name() == s || format!("{f:?}") == s)
    }
}

impl fmt::Display for GameFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Family of a strict-ordinal game. The first matching rule wins:
///
/// 1. win-win: some outcome is ranked 4 by both players;
/// 2. Prisoner's Dilemma family: some pure equilibrium is Pareto-dominated;
/// 3. unfair: every pure equilibrium gives one player 4 and the other 2;
/// 4. cyclic: no pure equilibrium;
/// 5. biased: some pure equilibrium is ranked 4 by one player and 3 by the other;
/// 6. second-best: some pure equilibrium is ranked 3 by both;
/// 7. other.
pub fn classify(game: &OrdinalGame) -> GameFamily {
    let ranks = |c: Cell| (game.rank(Seat::P1, c), game.rank(Seat::P2, c));
    if Cell::ALL.iter().any(|&c| ranks(c) == (4, 4)) {
        return GameFamily::WinWin;
    }
    let nash = pure_nash(game);
    if nash.iter().any(|&c| pareto_dominated(game, c)) {
        return GameFamily::PrisonersDilemma;
    }
    if !nash.is_empty() && nash.iter().all(|&c| matches!(ranks(c), (4, 2) | (2, 4))) {
        return GameFamily::Unfair;
    }
    if nash.is_empty() {
        return GameFamily::Cyclic;
    }
    if nash.iter().any(|&c| matches!(ranks(c), (4, 3) | (3, 4))) {
        return GameFamily::Biased;
    }
    if nash.iter().any(|&c| ranks(c) == (3, 3)) {
        return GameFamily::SecondBest;
    }
    GameFamily::Other
}

/// Number of canonical games per family; every family is present, possibly with zero.
pub fn family_census() -> BTreeMap<GameFamily, usize> {
    let mut census: BTreeMap<GameFamily, usize> = GameFamily::ALL.iter().map(|&f| (f, 0)).collect();
    for g in enumerate_games() {
        *census.entry(classify(&g)).or_default() += 1;
    }
    census
}

/// `steps` games moving Player 1's preference from one coordination outcome to the other.
///
/// Only the two same-action cells change. Each of their payoffs moves linearly from its
/// base value to the value of the opposite coordination cell, so the last game is the
/// base with the two coordination outcomes swapped. Intermediate values are rounded half
/// away from zero.
pub fn payoff_sweep(base: &PayoffGame, steps: usize) -> Result<Vec<PayoffGame>, GameError> {
    if steps == 0 {
        return Err(GameError::ZeroSteps);
    }
    let nash = pure_nash(base);
    let diag = [Cell::new(0, 0), Cell::new(1, 1)];
    if !diag.iter().all(|c| nash.contains(c)) {
        return Err(GameError::NotCoordination);
    }
    let mut out = Vec::with_capacity(steps);
    for i in 0..steps {
        let t = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
        let mut game = base.clone();
        for seat in Seat::BOTH {
            for (k, cell) in diag.iter().enumerate() {
                let from = f64::from(base.payoff(seat, *cell));
                let to = f64::from(base.payoff(seat, diag[1 - k]));
                game.payoffs[seat.index()][cell.row][cell.col] = (from + t * (to - from)).round() as u32;
            }
        }
        game.name = Some(format!("{}-sweep-{}", base.label(), i));
        out.push(game);
    }
    Ok(out)
}
