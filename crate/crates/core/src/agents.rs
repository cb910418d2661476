//! Players and the scripted strategies.
//!
//! Scripted strategies only ever look at the game and history from their own seat,
//! through [`SeatView`] and [`SeatRound`]. That is what lets the mock provider run the
//! same strategies from nothing but a rendered prompt.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::game::{Cell, PayoffGame, Seat};

/// Action index used as "defect" (label F) in dilemma framings.
pub const DEFECT: usize = 0;
/// Action index used as "cooperate" (label J) in dilemma framings.
pub const COOPERATE: usize = 1;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AgentSpec {
    /// Always plays the same action.
    Constant { action: usize },
    /// Defects in round 1, cooperates afterwards.
    DefectThenCooperate,
    /// Alternates every round, starting with the opponent's preferred option.
    Alternator,
    /// Chat-model player behind a registered provider.
    Llm { provider: String },
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AgentError {
    #[error("action {0} out of range, games have two actions")]
    InvalidAction(usize),
    #[error("preferred option is ambiguous: two candidate cells tie at {0}")]
    PreferenceTie(i64),
    #[error("llm agent '{0}' needs a completion client")]
    NeedsProvider(String),
    #[error("unknown agent '{0}' (expected constant:<0|1>, defect-then-cooperate, alternator or llm:<provider>)")]
    UnknownAgent(String),
}

impl AgentSpec {
    pub fn is_llm(&self) -> bool {
        matches!(self, AgentSpec::Llm { .. })
    }

    pub fn provider(&self) -> Option<&str> {
        match self {
            AgentSpec::Llm { provider } => Some(provider),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        match self {
            AgentSpec::Constant { action } if *action > 1 => Err(AgentError::InvalidAction(*action)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Constant { action } => write!(f, "constant:{action}"),
            AgentSpec::DefectThenCooperate => f.write_str("defect-then-cooperate"),
            AgentSpec::Alternator => f.write_str("alternator"),
            AgentSpec::Llm { provider } => write!(f, "llm:{provider}"),
        }
    }
}

impl FromStr for AgentSpec {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, AgentError> {
        let unknown = || AgentError::UnknownAgent(s.to_string());
        let spec = match s.split_once(':') {
            Some(("constant", a)) => AgentSpec::Constant { action: a.parse().map_err(|_| unknown())? },
            Some(("llm", p)) if !p.is_empty() => AgentSpec::Llm { provider: p.to_string() },
            None if s == "defect-then-cooperate" => AgentSpec::DefectThenCooperate,
            None if s == "alternator" => AgentSpec::Alternator,
            _ => return Err(unknown()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// One completed round, stored in absolute seat order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub actions: [usize; 2],
    pub payoffs: [u32; 2],
}

impl Round {
    pub fn played(game: &PayoffGame, p1: usize, p2: usize) -> Round {
        let cell = Cell::new(p1, p2);
        Round { actions: [p1, p2], payoffs: [game.payoff(Seat::P1, cell), game.payoff(Seat::P2, cell)] }
    }

    pub fn from_seat(&self, seat: Seat) -> SeatRound {
        let (me, them) = (seat.index(), seat.other().index());
        SeatRound {
            own: self.actions[me],
            other: self.actions[them],
            own_payoff: self.payoffs[me],
            other_payoff: self.payoffs[them],
        }
    }
}

/// A round as seen from one seat.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeatRound {
    pub own: usize,
    pub other: usize,
    pub own_payoff: u32,
    pub other_payoff: u32,
}

/// Rounds played so far. A round is only appended once both actions are known.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History {
    rounds: Vec<Round>,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn push(&mut self, round: Round) {
        self.rounds.push(round);
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn from_seat(&self, seat: Seat) -> Vec<SeatRound> {
        self.rounds.iter().map(|r| r.from_seat(seat)).collect()
    }
}

impl FromIterator<Round> for History {
    fn from_iter<I: IntoIterator<Item = Round>>(iter: I) -> Self {
        History { rounds: iter.into_iter().collect() }
    }
}

/// The game from one seat: `own[a][b]` is this seat's payoff when it plays `a` and the
/// opponent plays `b`; `other[a][b]` is the opponent's payoff in the same cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeatView {
    pub own: [[i64; 2]; 2],
    pub other: [[i64; 2]; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Own,
    Other,
}

impl SeatView {
    pub fn of(game: &PayoffGame, seat: Seat) -> SeatView {
        let mut view = SeatView { own: [[0; 2]; 2], other: [[0; 2]; 2] };
        for a in 0..2 {
            for b in 0..2 {
                let cell = Cell::from_seat(seat, a, b);
                view.own[a][b] = i64::from(game.payoff(seat, cell));
                view.other[a][b] = i64::from(game.payoff(seat.other(), cell));
            }
        }
        view
    }

    fn is_nash(&self, a: usize, b: usize) -> bool {
        self.own[a][b] > self.own[1 - a][b] && self.other[a][b] > self.other[a][1 - b]
    }

    /// Both same-label outcomes are pure equilibria.
    pub fn is_coordination(&self) -> bool {
        self.is_nash(0, 0) && self.is_nash(1, 1)
    }

    fn preferred(&self, side: Side) -> Result<usize, AgentError> {
        let candidates: Vec<(usize, usize)> =
            if self.is_coordination() { vec![(0, 0), (1, 1)] } else { vec![(0, 0), (0, 1), (1, 0), (1, 1)] };
        let value = |&(a, b): &(usize, usize)| match side {
            Side::Own => self.own[a][b],
            Side::Other => self.other[a][b],
        };
        let best = candidates.iter().map(value).max().expect("non-empty");
        let winners: Vec<_> = candidates.iter().filter(|c| value(c) == best).collect();
        if winners.len() > 1 {
            return Err(AgentError::PreferenceTie(best));
        }
        let (a, b) = *winners[0];
        Ok(match side {
            Side::Own => a,
            Side::Other => b,
        })
    }

    /// This seat's action in its best cell (among coordination outcomes when the game is a
    /// coordination game).
    pub fn own_preferred(&self) -> Result<usize, AgentError> {
        self.preferred(Side::Own)
    }

    /// The opponent's action in the opponent's best cell.
    pub fn other_preferred(&self) -> Result<usize, AgentError> {
        self.preferred(Side::Other)
    }
}

pub fn preferred_option(game: &PayoffGame, seat: Seat) -> Result<usize, AgentError> {
    SeatView::of(game, seat).own_preferred()
}

/// Move of a scripted agent given its own view of the game and of the past rounds.
pub fn scripted_move(spec: &AgentSpec, view: &SeatView, past: &[SeatRound]) -> Result<usize, AgentError> {
    match spec {
        AgentSpec::Constant { action } => {
            spec.validate()?;
            Ok(*action)
        }
        AgentSpec::DefectThenCooperate => Ok(if past.is_empty() { DEFECT } else { COOPERATE }),
        AgentSpec::Alternator => {
            let start = view.other_preferred()?;
            Ok(if past.len().is_multiple_of(2) { start } else { 1 - start })
        }
        AgentSpec::Llm { provider } => Err(AgentError::NeedsProvider(provider.clone())),
    }
}

/// Next action for a scripted agent. LLM agents are driven by the match engine.
pub fn next_move(spec: &AgentSpec, seat: Seat, game: &PayoffGame, history: &History) -> Result<usize, AgentError> {
    scripted_move(spec, &SeatView::of(game, seat), &history.from_seat(seat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn history_of(game: &PayoffGame, pairs: &[(usize, usize)]) -> History {
        pairs.iter().map(|&(a, b)| Round::played(game, a, b)).collect()
    }

    #[test]
    fn constant_ignores_history() {
        let pd = PayoffGame::prisoners_dilemma();
        let spec = AgentSpec::Constant { action: DEFECT };
        for h in [history_of(&pd, &[]), history_of(&pd, &[(1, 1), (0, 1)])] {
            assert_eq!(next_move(&spec, Seat::P1, &pd, &h), Ok(DEFECT));
        }
    }

    #[test]
    fn defect_then_cooperate() {
        let pd = PayoffGame::prisoners_dilemma();
        let spec = AgentSpec::DefectThenCooperate;
        assert_eq!(next_move(&spec, Seat::P2, &pd, &History::new()), Ok(DEFECT));
        assert_eq!(next_move(&spec, Seat::P2, &pd, &history_of(&pd, &[(0, 0)])), Ok(COOPERATE));
        assert_eq!(next_move(&spec, Seat::P2, &pd, &history_of(&pd, &[(0, 0), (0, 1), (0, 1)])), Ok(COOPERATE));
    }

    #[test]
    fn alternator_as_player_two_starts_with_player_one_preference() {
        let bos = PayoffGame::battle_of_the_sexes();
        let mut h = History::new();
        let mut moves = vec![];
        for _ in 0..6 {
            let m = next_move(&AgentSpec::Alternator, Seat::P2, &bos, &h).unwrap();
            moves.push(m);
            h.push(Round::played(&bos, 0, m));
        }
        assert_eq!(moves, vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn preferred_options() {
        let bos = PayoffGame::battle_of_the_sexes();
        assert_eq!(preferred_option(&bos, Seat::P1), Ok(0));
        assert_eq!(preferred_option(&bos, Seat::P2), Ok(1));
        // max over four cells: (D, C) is worth 10 to Player 1
        assert_eq!(preferred_option(&PayoffGame::prisoners_dilemma(), Seat::P1), Ok(DEFECT));
        assert_eq!(preferred_option(&PayoffGame::prisoners_dilemma(), Seat::P2), Ok(DEFECT));
    }

    #[test]
    fn preferred_option_tie_is_an_error() {
        let mut g = PayoffGame::battle_of_the_sexes();
        g.payoffs[0][1][1] = 10;
        assert_eq!(preferred_option(&g, Seat::P1), Err(AgentError::PreferenceTie(10)));
    }

    #[test]
    fn llm_needs_provider() {
        let pd = PayoffGame::prisoners_dilemma();
        let spec = AgentSpec::Llm { provider: "gpt".into() };
        assert!(matches!(next_move(&spec, Seat::P1, &pd, &History::new()), Err(AgentError::NeedsProvider(_))));
    }

    #[test]
    fn agent_strings_round_trip() {
        for s in ["constant:0", "constant:1", "defect-then-cooperate", "alternator", "llm:gpt-4"] {
            let spec: AgentSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("constant:2".parse::<AgentSpec>().is_err());
        assert!("tit-for-tat".parse::<AgentSpec>().is_err());
        assert!("llm:".parse::<AgentSpec>().is_err());
    }

    #[test]
    fn agent_spec_serde_shape() {
        let spec: AgentSpec =
            toml::from_str::<toml::Table>("kind = \"llm\"\nprovider = \"m\"").unwrap().try_into().unwrap();
        assert_eq!(spec, AgentSpec::Llm { provider: "m".into() });
        let json = serde_json::to_string(&AgentSpec::Constant { action: 1 }).unwrap();
        assert_eq!(json, r#"{"kind":"constant","action":1}"#);
    }

    fn scripted() -> impl Strategy<Value = AgentSpec> {
        prop_oneof![
            (0usize..2).prop_map(|action| AgentSpec::Constant { action }),
            Just(AgentSpec::DefectThenCooperate),
            Just(AgentSpec::Alternator),
        ]
    }

    fn strict_game() -> impl Strategy<Value = PayoffGame> {
        // distinct payoffs per player so preferences never tie
        (Just([0u32, 1, 2, 3]).prop_shuffle(), Just([0u32, 1, 2, 3]).prop_shuffle()).prop_map(|(a, b)| {
            let mut g = PayoffGame::prisoners_dilemma();
            g.payoffs = [[[a[0], a[1]], [a[2], a[3]]], [[b[0], b[1]], [b[2], b[3]]]];
            g
        })
    }

    proptest! {
        #[test]
        fn scripted_moves_are_legal_and_pure(
            spec in scripted(),
            game in strict_game(),
            seat in prop_oneof![Just(Seat::P1), Just(Seat::P2)],
            pairs in proptest::collection::vec((0usize..2, 0usize..2), 0..10),
        ) {
            let h = history_of(&game, &pairs);
            let a = next_move(&spec, seat, &game, &h).unwrap();
            prop_assert!(a < 2);
            prop_assert_eq!(next_move(&spec, seat, &game, &h).unwrap(), a);
        }

        #[test]
        fn alternator_always_switches(
            game in strict_game(),
            seat in prop_oneof![Just(Seat::P1), Just(Seat::P2)],
            opp in proptest::collection::vec(0usize..2, 1..12),
        ) {
            let mut h = History::new();
            let mut prev = None;
            for o in opp {
                let m = next_move(&AgentSpec::Alternator, seat, &game, &h).unwrap();
                if let Some(p) = prev { prop_assert_ne!(p, m); }
                prev = Some(m);
                let (a, b) = if seat == Seat::P1 { (m, o) } else { (o, m) };
                h.push(Round::played(&game, a, b));
            }
        }

        #[test]
        fn defect_then_cooperate_defects_once(
            game in strict_game(),
            opp in proptest::collection::vec(0usize..2, 1..12),
        ) {
            let mut h = History::new();
            let mut defections = vec![];
            for (i, o) in opp.iter().enumerate() {
                let m = next_move(&AgentSpec::DefectThenCooperate, Seat::P1, &game, &h).unwrap();
                if m == DEFECT { defections.push(i); }
                h.push(Round::played(&game, m, *o));
            }
            prop_assert_eq!(defections, vec![0]);
        }
    }
}
