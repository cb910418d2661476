//! Prompt rendering and completion parsing.
//!
//! A prompt is rules, an optional intervention, the history so far, and a one-token
//! query, in that order. Wording lives in plain-text template files with `{name}`
//! placeholders; a template set is addressed by id so that experiments pin their wording.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::agents::{History, Round};
use crate::game::{Cell, PayoffGame, Seat};

pub const DEFAULT_TEMPLATES: &str = "base-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    #[serde(rename = "letters_FJ")]
    LettersFJ,
    LettersOther,
    Numeric,
}

impl LabelScheme {
    pub const ALL: [LabelScheme; 3] = [LabelScheme::LettersFJ, LabelScheme::LettersOther, LabelScheme::Numeric];

    /// Labels for action 0 and action 1.
    pub fn labels(self) -> [&'static str; 2] {
        match self {
            LabelScheme::LettersFJ => ["F", "J"],
            LabelScheme::LettersOther => ["Q", "Z"],
            LabelScheme::Numeric => ["1", "2"],
        }
    }

    /// Which scheme and action a label belongs to.
    pub fn lookup(label: &str) -> Option<(LabelScheme, usize)> {
        LabelScheme::ALL.into_iter().find_map(|s| s.labels().iter().position(|l| *l == label).map(|i| (s, i)))
    }

    fn id(self) -> &'static str {
        match self {
            LabelScheme::LettersFJ => "fj",
            LabelScheme::LettersOther => "qz",
            LabelScheme::Numeric => "num",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionOrder {
    Given,
    Swapped,
}

impl OptionOrder {
    pub const ALL: [OptionOrder; 2] = [OptionOrder::Given, OptionOrder::Swapped];

    /// Action indices in presentation order.
    pub fn sequence(self) -> [usize; 2] {
        match self {
            OptionOrder::Given => [0, 1],
            OptionOrder::Swapped => [1, 0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Points,
    Dollars,
    Coins,
}

impl Unit {
    pub const ALL: [Unit; 3] = [Unit::Points, Unit::Dollars, Unit::Coins];

    pub fn plural(self) -> &'static str {
        match self {
            Unit::Points => "points",
            Unit::Dollars => "dollars",
            Unit::Coins => "coins",
        }
    }

    pub fn amount(self, n: u32) -> String {
        if n == 1 {
            format!("1 {}", &self.plural()[..self.plural().len() - 1])
        } else {
            format!("{n} {}", self.plural())
        }
    }
}

/// Presentation of a game: option labels, option order and payoff unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PromptVariant {
    pub label_scheme: LabelScheme,
    pub option_order: OptionOrder,
    pub unit: Unit,
}

impl Default for PromptVariant {
    fn default() -> Self {
        PromptVariant { label_scheme: LabelScheme::LettersFJ, option_order: OptionOrder::Given, unit: Unit::Points }
    }
}

impl PromptVariant {
    pub fn label(&self, action: usize) -> &'static str {
        self.label_scheme.labels()[action]
    }

    /// Labels in presentation order.
    pub fn presented(&self) -> [&'static str; 2] {
        self.option_order.sequence().map(|a| self.label(a))
    }

    pub fn id(&self) -> String {
        format!("{}-{}-{}", self.label_scheme.id(), self.option_order_id(), self.unit.plural())
    }

    fn option_order_id(&self) -> &'static str {
        match self.option_order {
            OptionOrder::Given => "given",
            OptionOrder::Swapped => "swapped",
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, PromptError> {
        variant_space().into_iter().find(|v| v.id() == s).ok_or_else(|| PromptError::UnknownVariant(s.to_string()))
    }
}

impl Serialize for PromptVariant {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for PromptVariant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// All label schemes x option orders x units, in that nesting order.
pub fn variant_space() -> Vec<PromptVariant> {
    let mut out = Vec::with_capacity(18);
    for label_scheme in LabelScheme::ALL {
        for option_order in OptionOrder::ALL {
            for unit in Unit::ALL {
                out.push(PromptVariant { label_scheme, option_order, unit });
            }
        }
    }
    out
}

/// Extra information given to an LLM seat about its opponent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Intervention {
    #[default]
    None,
    FallibleOpponent,
    /// Free text; `{option0}` and `{option1}` are replaced by the variant's labels.
    ExplicitSchedule(String),
}

impl Intervention {
    /// The opponent defects once, then cooperates.
    pub fn defect_once_schedule() -> Intervention {
        Intervention::ExplicitSchedule(
            "The other player will choose Option {option0} in round 1 and Option {option1} in every round after that."
                .into(),
        )
    }

    pub fn id(&self) -> &'static str {
        match self {
            Intervention::None => "none",
            Intervention::FallibleOpponent => "fallible-opponent",
            Intervention::ExplicitSchedule(_) => "explicit-schedule",
        }
    }
}

impl FromStr for Intervention {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, PromptError> {
        match s {
            "none" => Ok(Intervention::None),
            "fallible" | "fallible-opponent" => Ok(Intervention::FallibleOpponent),
            "defect-once" | "explicit-schedule" => Ok(Intervention::defect_once_schedule()),
            _ => match s.strip_prefix("schedule:") {
                Some(text) => Ok(Intervention::ExplicitSchedule(text.to_string())),
                None => Err(PromptError::UnknownIntervention(s.to_string())),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    #[default]
    None,
    /// Also asked, as a player, to predict the opponent's move.
    PredictAsPlayer,
    /// A separate observer prompt predicts the opponent's move; it never chooses.
    PredictAsObserver,
    /// Predict first, then choose with the prediction in context.
    PredictThenAct,
}

impl FromStr for PredictionMode {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, PromptError> {
        match s {
            "none" => Ok(PredictionMode::None),
            "predict-as-player" => Ok(PredictionMode::PredictAsPlayer),
            "predict-as-observer" => Ok(PredictionMode::PredictAsObserver),
            "predict-then-act" => Ok(PredictionMode::PredictThenAct),
            _ => Err(PromptError::UnknownMode(s.to_string())),
        }
    }
}

impl PredictionMode {
    pub fn id(&self) -> &'static str {
        match self {
            PredictionMode::None => "none",
            PredictionMode::PredictAsPlayer => "predict-as-player",
            PredictionMode::PredictAsObserver => "predict-as-observer",
            PredictionMode::PredictThenAct => "predict-then-act",
        }
    }
}

/// Who the prompt addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Player(Seat),
    Observer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Query {
    Act,
    /// Player frame: predict the opponent's next move.
    PredictOpponent,
    /// Player frame: choose, with this earlier prediction of the opponent restated.
    ActAfterPrediction(usize),
    /// Observer frame: predict the given player's next move.
    PredictPlayer(Seat),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown prompt variant '{0}'")]
    UnknownVariant(String),
    #[error("unknown intervention '{0}'")]
    UnknownIntervention(String),
    #[error("unknown prediction mode '{0}'")]
    UnknownMode(String),
    #[error("unknown template set '{0}'")]
    UnknownTemplates(String),
    #[error("template '{name}': {reason}")]
    Template { name: String, reason: String },
    #[error("query {query:?} does not fit frame {frame:?}")]
    FrameMismatch { frame: Frame, query: Query },
    #[error("cannot read prompt: {0}")]
    Unreadable(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseFailure {
    NoMatch,
    Ambiguous,
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
#[error("completion {raw:?} is not a legal option ({kind:?})")]
pub struct ParseError {
    pub raw: String,
    pub kind: ParseFailure,
}

/// Map a one-token completion back to an action index.
pub fn parse_choice(completion: &str, variant: &PromptVariant) -> Result<usize, ParseError> {
    let trimmed = completion.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let labels = variant.label_scheme.labels();
    if let Some(i) = labels.iter().position(|l| l.eq_ignore_ascii_case(trimmed)) {
        return Ok(i);
    }
    let tokens: Vec<&str> =
        completion.split(|c: char| c.is_whitespace() || c.is_ascii_punctuation()).filter(|t| !t.is_empty()).collect();
    let both = labels.iter().all(|l| tokens.iter().any(|t| t.eq_ignore_ascii_case(l)));
    Err(ParseError {
        raw: completion.to_string(),
        kind: if both { ParseFailure::Ambiguous } else { ParseFailure::NoMatch },
    })
}

const TEMPLATE_NAMES: [&str; 13] = [
    "prompt",
    "rules_player",
    "outcome_player",
    "rules_observer",
    "outcome_observer",
    "history_header",
    "history_player",
    "history_observer",
    "fallible",
    "prediction_note",
    "query_act",
    "query_predict_player",
    "query_predict_observer",
];

const BASE_V1: [&str; 13] = [
    include_str!("../templates/base-v1/prompt.txt"),
    include_str!("../templates/base-v1/rules_player.txt"),
    include_str!("../templates/base-v1/outcome_player.txt"),
    include_str!("../templates/base-v1/rules_observer.txt"),
    include_str!("../templates/base-v1/outcome_observer.txt"),
    include_str!("../templates/base-v1/history_header.txt"),
    include_str!("../templates/base-v1/history_player.txt"),
    include_str!("../templates/base-v1/history_observer.txt"),
    include_str!("../templates/base-v1/fallible.txt"),
    include_str!("../templates/base-v1/prediction_note.txt"),
    include_str!("../templates/base-v1/query_act.txt"),
    include_str!("../templates/base-v1/query_predict_player.txt"),
    include_str!("../templates/base-v1/query_predict_observer.txt"),
];

/// A named set of prompt templates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Templates {
    pub id: String,
    texts: [String; 13],
}

fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

impl Templates {
    pub fn builtin(id: &str) -> Result<Templates, PromptError> {
        match id {
            "base-v1" => Ok(Templates::from_texts(id, BASE_V1.map(str::to_string))),
            _ => Err(PromptError::UnknownTemplates(id.to_string())),
        }
    }

    pub fn base() -> Templates {
        Templates::builtin(DEFAULT_TEMPLATES).expect("builtin templates")
    }

    /// Load `<name>.txt` files from a directory; the directory name is the id.
    pub fn load_dir(dir: &Path) -> Result<Templates, PromptError> {
        let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or("custom").to_string();
        let mut texts: [String; 13] = Default::default();
        for (slot, name) in texts.iter_mut().zip(TEMPLATE_NAMES) {
            *slot = fs::read_to_string(dir.join(format!("{name}.txt")))
                .map_err(|e| PromptError::Template { name: name.into(), reason: e.to_string() })?;
        }
        Ok(Templates::from_texts(&id, texts))
    }

    fn from_texts(id: &str, texts: [String; 13]) -> Templates {
        Templates { id: id.to_string(), texts: texts.map(|t| t.trim_end_matches('\n').to_string()) }
    }

    fn get(&self, name: &str) -> &str {
        let i = TEMPLATE_NAMES.iter().position(|n| *n == name).expect("known template name");
        &self.texts[i]
    }

    /// Barebones game description: both options and all four outcomes, no story.
    pub fn render_rules(&self, game: &PayoffGame, frame: Frame, variant: &PromptVariant, rounds: u32) -> String {
        let order = variant.option_order.sequence();
        let unit = variant.unit;
        let mut outcomes = Vec::with_capacity(4);
        for a in order {
            for b in order {
                let line = match frame {
                    Frame::Player(seat) => {
                        let cell = Cell::from_seat(seat, a, b);
                        fill(
                            self.get("outcome_player"),
                            &[
                                ("own", variant.label(a)),
                                ("other", variant.label(b)),
                                ("own_payoff", &unit.amount(game.payoff(seat, cell))),
                                ("other_payoff", &unit.amount(game.payoff(seat.other(), cell))),
                            ],
                        )
                    }
                    Frame::Observer => {
                        let cell = Cell::new(a, b);
                        fill(
                            self.get("outcome_observer"),
                            &[
                                ("p1", variant.label(a)),
                                ("p2", variant.label(b)),
                                ("p1_payoff", &unit.amount(game.payoff(Seat::P1, cell))),
                                ("p2_payoff", &unit.amount(game.payoff(Seat::P2, cell))),
                            ],
                        )
                    }
                };
                outcomes.push(line);
            }
        }
        let name = match frame {
            Frame::Player(_) => "rules_player",
            Frame::Observer => "rules_observer",
        };
        let [first, second] = variant.presented();
        fill(
            self.get(name),
            &[
                ("first", first),
                ("second", second),
                ("rounds", &rounds.to_string()),
                ("outcomes", &outcomes.join("\n")),
            ],
        )
    }

    fn history_line(&self, frame: Frame, number: usize, round: &Round, variant: &PromptVariant) -> String {
        let unit = variant.unit;
        let n = number.to_string();
        match frame {
            Frame::Player(seat) => {
                let r = round.from_seat(seat);
                fill(
                    self.get("history_player"),
                    &[
                        ("round", &n),
                        ("own", variant.label(r.own)),
                        ("other", variant.label(r.other)),
                        ("own_payoff", &unit.amount(r.own_payoff)),
                        ("other_payoff", &unit.amount(r.other_payoff)),
                    ],
                )
            }
            Frame::Observer => fill(
                self.get("history_observer"),
                &[
                    ("round", &n),
                    ("p1", variant.label(round.actions[0])),
                    ("p2", variant.label(round.actions[1])),
                    ("p1_payoff", &unit.amount(round.payoffs[0])),
                    ("p2_payoff", &unit.amount(round.payoffs[1])),
                ],
            ),
        }
    }

    /// Full prompt for the next round: rules, intervention, history, query.
    pub fn render_round_prompt(
        &self,
        rules: &str,
        frame: Frame,
        history: &History,
        intervention: &Intervention,
        query: Query,
        variant: &PromptVariant,
    ) -> Result<String, PromptError> {
        let round = (history.len() + 1).to_string();
        let [first, second] = variant.presented();
        let options = [("round", round.as_str()), ("first", first), ("second", second)];
        let query_text = match (frame, query) {
            (Frame::Player(_), Query::Act) => fill(self.get("query_act"), &options),
            (Frame::Player(_), Query::PredictOpponent) => fill(self.get("query_predict_player"), &options),
            (Frame::Player(_), Query::ActAfterPrediction(p)) => format!(
                "{}\n{}",
                fill(self.get("prediction_note"), &[("prediction", variant.label(p)), ("round", &round)]),
                fill(self.get("query_act"), &options)
            ),
            (Frame::Observer, Query::PredictPlayer(target)) => {
                let target = target.number().to_string();
                let mut values = options.to_vec();
                values.push(("target", &target));
                fill(self.get("query_predict_observer"), &values)
            }
            _ => return Err(PromptError::FrameMismatch { frame, query }),
        };

        let intervention_text = match (frame, intervention) {
            (Frame::Observer, _) | (_, Intervention::None) => String::new(),
            (_, Intervention::FallibleOpponent) => format!("\n{}\n", self.get("fallible")),
            (_, Intervention::ExplicitSchedule(text)) => {
                format!("\n{}\n", fill(text, &[("option0", variant.label(0)), ("option1", variant.label(1))]))
            }
        };

        let history_text = if history.is_empty() {
            String::new()
        } else {
            let lines: Vec<String> =
                history.rounds().iter().enumerate().map(|(i, r)| self.history_line(frame, i + 1, r, variant)).collect();
            format!("\n{}\n{}\n", self.get("history_header"), lines.join("\n"))
        };

        Ok(fill(
            self.get("prompt"),
            &[
                ("rules", rules),
                ("intervention", &intervention_text),
                ("history", &history_text),
                ("query", &format!("\n{query_text}")),
            ],
        ) + "\n")
    }

    /// Regex readers for this template set, used to reconstruct a prompt's content.
    pub fn reader(&self) -> Result<PromptReader, PromptError> {
        PromptReader::new(self)
    }
}

/// What a rendered prompt says, recovered from its text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptContent {
    /// For player prompts the addressee is Player 1 here and the opponent Player 2.
    pub game: PayoffGame,
    pub history: History,
    pub frame: Frame,
    pub query: Query,
    pub scheme: LabelScheme,
}

/// Inverse of rendering for one template set.
#[derive(Clone, Debug)]
pub struct PromptReader {
    outcome_player: Regex,
    outcome_observer: Regex,
    history_player: Regex,
    history_observer: Regex,
    query_act: Regex,
    query_predict_player: Regex,
    query_predict_observer: Regex,
}

fn line_regex(name: &str, template: &str) -> Result<Regex, PromptError> {
    let placeholder = Regex::new(r"\{([a-z0-9_]+)\}").expect("static regex");
    let mut pattern = String::from("^");
    let mut last = 0;
    for m in placeholder.captures_iter(template) {
        let whole = m.get(0).expect("match");
        pattern.push_str(&regex::escape(&template[last..whole.start()]));
        pattern.push_str(&format!("(?P<{}>.+?)", &m[1]));
        last = whole.end();
    }
    pattern.push_str(&regex::escape(&template[last..]));
    pattern.push('$');
    Regex::new(&pattern).map_err(|e| PromptError::Template { name: name.into(), reason: e.to_string() })
}

fn cap<'h>(c: &regex::Captures<'h>, name: &str) -> &'h str {
    c.name(name).map_or("", |m| m.as_str())
}

fn amount(s: &str) -> Result<u32, PromptError> {
    s.split_whitespace()
        .next()
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| PromptError::Unreadable(format!("bad amount '{s}'")))
}

impl PromptReader {
    fn new(t: &Templates) -> Result<PromptReader, PromptError> {
        let r = |name: &str| line_regex(name, t.get(name));
        Ok(PromptReader {
            outcome_player: r("outcome_player")?,
            outcome_observer: r("outcome_observer")?,
            history_player: r("history_player")?,
            history_observer: r("history_observer")?,
            query_act: r("query_act")?,
            query_predict_player: r("query_predict_player")?,
            query_predict_observer: r("query_predict_observer")?,
        })
    }

    pub fn read(&self, prompt: &str) -> Result<PromptContent, PromptError> {
        let mut scheme = None;
        let mut label = |s: &str| -> Result<usize, PromptError> {
            let (sch, a) =
                LabelScheme::lookup(s).ok_or_else(|| PromptError::Unreadable(format!("unknown label '{s}'")))?;
            match scheme {
                Some(prev) if prev != sch => Err(PromptError::Unreadable("mixed label schemes".into())),
                _ => {
                    scheme = Some(sch);
                    Ok(a)
                }
            }
        };
        let mut payoffs = [[[0u32; 2]; 2]; 2];
        let mut outcomes = 0;
        let mut rounds: Vec<Round> = Vec::new();
        let mut frame = None;
        let mut query = None;

        for line in prompt.lines() {
            let (p1, p2, v1, v2, observer) = if let Some(c) = self.outcome_player.captures(line) {
                (
                    cap(&c, "own"),
                    cap(&c, "other"),
                    amount(cap(&c, "own_payoff"))?,
                    amount(cap(&c, "other_payoff"))?,
                    false,
                )
            } else if let Some(c) = self.outcome_observer.captures(line) {
                (cap(&c, "p1"), cap(&c, "p2"), amount(cap(&c, "p1_payoff"))?, amount(cap(&c, "p2_payoff"))?, true)
            } else if let Some(c) = self.history_player.captures(line).or_else(|| self.history_observer.captures(line))
            {
                let (a, b, x, y) = if c.name("own").is_some() {
                    (cap(&c, "own"), cap(&c, "other"), cap(&c, "own_payoff"), cap(&c, "other_payoff"))
                } else {
                    (cap(&c, "p1"), cap(&c, "p2"), cap(&c, "p1_payoff"), cap(&c, "p2_payoff"))
                };
                rounds.push(Round { actions: [label(a)?, label(b)?], payoffs: [amount(x)?, amount(y)?] });
                continue;
            } else {
                if self.query_act.is_match(line) {
                    query = Some(Query::Act);
                } else if self.query_predict_player.is_match(line) {
                    query = Some(Query::PredictOpponent);
                } else if let Some(c) = self.query_predict_observer.captures(line) {
                    let seat = match cap(&c, "target") {
                        "1" => Seat::P1,
                        "2" => Seat::P2,
                        other => return Err(PromptError::Unreadable(format!("bad target '{other}'"))),
                    };
                    query = Some(Query::PredictPlayer(seat));
                }
                continue;
            };
            frame = Some(if observer { Frame::Observer } else { Frame::Player(Seat::P1) });
            let (a, b) = (label(p1)?, label(p2)?);
            payoffs[0][a][b] = v1;
            payoffs[1][a][b] = v2;
            outcomes += 1;
        }

        if outcomes != 4 {
            return Err(PromptError::Unreadable(format!("expected 4 outcomes, found {outcomes}")));
        }
        let scheme = scheme.expect("labels seen");
        let labels = scheme.labels().map(str::to_string);
        let game = PayoffGame::new(None, [labels.clone(), labels], payoffs)
            .map_err(|e| PromptError::Unreadable(e.to_string()))?;
        Ok(PromptContent {
            game,
            history: rounds.into_iter().collect(),
            frame: frame.expect("outcomes seen"),
            query: query.ok_or_else(|| PromptError::Unreadable("no query".into()))?,
            scheme,
        })
    }
}

/// One golden prompt: a stable name and the text it must render to.
#[derive(Clone, Debug)]
pub struct GoldenCase {
    pub name: String,
    pub text: String,
}

fn sample_history(game: &PayoffGame, pairs: &[(usize, usize)]) -> History {
    pairs.iter().map(|&(a, b)| Round::played(game, a, b)).collect()
}

/// The prompts frozen as goldens: every variant for both default games, with and without
/// history, plus one prompt for each intervention and prediction framing.
pub fn golden_corpus(t: &Templates) -> Result<Vec<GoldenCase>, PromptError> {
    let rounds = 10;
    let games = [
        ("pd", PayoffGame::prisoners_dilemma(), [(0, 1), (1, 1), (0, 0)]),
        ("bos", PayoffGame::battle_of_the_sexes(), [(0, 1), (1, 1), (0, 0)]),
    ];
    let mut out = Vec::new();
    for (gname, game, pairs) in &games {
        let histories = [History::new(), sample_history(game, pairs)];
        for variant in variant_space() {
            let rules = t.render_rules(game, Frame::Player(Seat::P1), &variant, rounds);
            for h in &histories {
                out.push(GoldenCase {
                    name: format!("{gname}__{variant}__h{}", h.len()),
                    text: t.render_round_prompt(
                        &rules,
                        Frame::Player(Seat::P1),
                        h,
                        &Intervention::None,
                        Query::Act,
                        &variant,
                    )?,
                });
            }
        }
        let v = PromptVariant::default();
        let h = &histories[1];
        let p2 = Frame::Player(Seat::P2);
        let rules_p2 = t.render_rules(game, p2, &v, rounds);
        let observer_rules = t.render_rules(game, Frame::Observer, &v, rounds);
        let extras = [
            ("p2-act", t.render_round_prompt(&rules_p2, p2, h, &Intervention::None, Query::Act, &v)?),
            ("p2-fallible", t.render_round_prompt(&rules_p2, p2, h, &Intervention::FallibleOpponent, Query::Act, &v)?),
            (
                "p2-schedule",
                t.render_round_prompt(&rules_p2, p2, h, &Intervention::defect_once_schedule(), Query::Act, &v)?,
            ),
            ("p2-predict", t.render_round_prompt(&rules_p2, p2, h, &Intervention::None, Query::PredictOpponent, &v)?),
            (
                "p2-act-after-prediction",
                t.render_round_prompt(&rules_p2, p2, h, &Intervention::None, Query::ActAfterPrediction(1), &v)?,
            ),
            (
                "observer-predict-p2",
                t.render_round_prompt(
                    &observer_rules,
                    Frame::Observer,
                    h,
                    &Intervention::None,
                    Query::PredictPlayer(Seat::P2),
                    &v,
                )?,
            ),
        ];
        for (name, text) in extras {
            out.push(GoldenCase { name: format!("{gname}__{name}"), text });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd_rules(variant: &PromptVariant) -> String {
        Templates::base().render_rules(&PayoffGame::prisoners_dilemma(), Frame::Player(Seat::P1), variant, 10)
    }

    #[test]
    fn variant_space_is_full_cross_product() {
        let vs = variant_space();
        assert_eq!(vs.len(), 18);
        assert!(vs.contains(&PromptVariant::default()));
        let mut ids: Vec<String> = vs.iter().map(PromptVariant::id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 18);
        for v in vs {
            assert_eq!(v.id().parse::<PromptVariant>().unwrap(), v);
        }
    }

    #[test]
    fn rules_name_both_options_and_four_outcomes() {
        let rules = pd_rules(&PromptVariant::default());
        assert!(rules.contains("Option F") && rules.contains("Option J"));
        assert_eq!(rules.matches("If you choose").count(), 4);
        assert!(rules.contains("you win 10 points and the other player wins 0 points"));
        assert!(!rules.to_lowercase().contains("prison"));
    }

    #[test]
    fn unit_substitution_only() {
        let base = pd_rules(&PromptVariant::default());
        let dollars = pd_rules(&PromptVariant { unit: Unit::Dollars, ..Default::default() });
        assert_eq!(base.replace("points", "dollars"), dollars);
    }

    #[test]
    fn singular_amounts() {
        assert_eq!(Unit::Coins.amount(1), "1 coin");
        assert_eq!(Unit::Dollars.amount(0), "0 dollars");
    }

    #[test]
    fn swapped_order_reverses_outcomes() {
        let given: Vec<String> = pd_rules(&PromptVariant::default()).lines().skip(1).map(String::from).collect();
        let swapped: Vec<String> =
            pd_rules(&PromptVariant { option_order: OptionOrder::Swapped, ..Default::default() })
                .lines()
                .skip(1)
                .map(String::from)
                .collect();
        let mut rev = given.clone();
        rev.reverse();
        assert_eq!(swapped, rev);
    }

    #[test]
    fn empty_history_is_rules_plus_query() {
        let t = Templates::base();
        let v = PromptVariant::default();
        let rules = pd_rules(&v);
        let p = t
            .render_round_prompt(&rules, Frame::Player(Seat::P1), &History::new(), &Intervention::None, Query::Act, &v)
            .unwrap();
        assert_eq!(
            p,
            format!("{rules}\n\nRound 1 is next. Which option do you choose, Option F or Option J? Reply with the option label only.\n")
        );
    }

    #[test]
    fn history_lines_from_seat_perspective() {
        let t = Templates::base();
        let v = PromptVariant::default();
        let game = PayoffGame::prisoners_dilemma();
        let h = sample_history(&game, &[(0, 1), (1, 1)]);
        let rules = t.render_rules(&game, Frame::Player(Seat::P2), &v, 10);
        let p =
            t.render_round_prompt(&rules, Frame::Player(Seat::P2), &h, &Intervention::None, Query::Act, &v).unwrap();
        assert_eq!(p.matches("In round ").count(), 2);
        assert!(p.contains(
            "In round 1, you chose Option J and earned 0 points; the other player chose Option F and earned 10 points."
        ));
        assert!(p.contains("Round 3 is next."));
    }

    #[test]
    fn observer_prompt_has_no_action_query() {
        let t = Templates::base();
        let v = PromptVariant::default();
        let game = PayoffGame::battle_of_the_sexes();
        let rules = t.render_rules(&game, Frame::Observer, &v, 10);
        let p = t
            .render_round_prompt(
                &rules,
                Frame::Observer,
                &History::new(),
                &Intervention::FallibleOpponent,
                Query::PredictPlayer(Seat::P2),
                &v,
            )
            .unwrap();
        assert!(p.starts_with("Player 1 and Player 2 are playing"));
        assert!(p.contains("Which option do you think Player 2 will choose"));
        assert!(!p.contains("do you choose"));
        assert!(!p.contains("mistakes"));
        assert!(matches!(
            t.render_round_prompt(&rules, Frame::Observer, &History::new(), &Intervention::None, Query::Act, &v),
            Err(PromptError::FrameMismatch { .. })
        ));
    }

    #[test]
    fn interventions_follow_rules() {
        let t = Templates::base();
        let v = PromptVariant { label_scheme: LabelScheme::Numeric, ..Default::default() };
        let rules = pd_rules(&v);
        let p = t
            .render_round_prompt(
                &rules,
                Frame::Player(Seat::P1),
                &History::new(),
                &Intervention::defect_once_schedule(),
                Query::Act,
                &v,
            )
            .unwrap();
        assert!(p.starts_with(&format!("{rules}\n\nThe other player will choose Option 1 in round 1 and Option 2")));
        let f = t
            .render_round_prompt(
                &rules,
                Frame::Player(Seat::P1),
                &History::new(),
                &Intervention::FallibleOpponent,
                Query::Act,
                &v,
            )
            .unwrap();
        assert!(f.starts_with(&format!("{rules}\n\nKeep in mind that the other player can sometimes make mistakes.\n")));
    }

    #[test]
    fn parse_choice_examples() {
        let v = PromptVariant::default();
        assert_eq!(parse_choice("J", &v), Ok(1));
        assert_eq!(parse_choice(" F.", &v), Ok(0));
        assert_eq!(parse_choice("j\n", &v), Ok(1));
        assert_eq!(parse_choice("K", &v).unwrap_err().kind, ParseFailure::NoMatch);
        let amb = parse_choice("F or J", &v).unwrap_err();
        assert_eq!(amb.kind, ParseFailure::Ambiguous);
        assert_eq!(amb.raw, "F or J");
        let num = PromptVariant { label_scheme: LabelScheme::Numeric, ..Default::default() };
        assert_eq!(parse_choice("2", &num), Ok(1));
        assert!(parse_choice("F", &num).is_err());
    }

    #[test]
    fn intervention_and_mode_strings() {
        assert_eq!("fallible".parse::<Intervention>(), Ok(Intervention::FallibleOpponent));
        assert_eq!(
            "schedule:always {option1}".parse::<Intervention>(),
            Ok(Intervention::ExplicitSchedule("always {option1}".into()))
        );
        assert!("bogus".parse::<Intervention>().is_err());
        assert_eq!("predict-then-act".parse::<PredictionMode>(), Ok(PredictionMode::PredictThenAct));
        let json = serde_json::to_string(&Intervention::FallibleOpponent).unwrap();
        assert_eq!(json, "\"fallible-opponent\"");
    }

    #[test]
    fn reader_recovers_player_prompt() {
        let t = Templates::base();
        let reader = t.reader().unwrap();
        let game = PayoffGame::prisoners_dilemma();
        let h = sample_history(&game, &[(0, 1), (1, 1), (0, 0)]);
        for v in variant_space() {
            let rules = t.render_rules(&game, Frame::Player(Seat::P2), &v, 10);
            let p = t
                .render_round_prompt(
                    &rules,
                    Frame::Player(Seat::P2),
                    &h,
                    &Intervention::FallibleOpponent,
                    Query::PredictOpponent,
                    &v,
                )
                .unwrap();
            let c = reader.read(&p).unwrap();
            assert_eq!(c.frame, Frame::Player(Seat::P1));
            assert_eq!(c.query, Query::PredictOpponent);
            assert_eq!(c.scheme, v.label_scheme);
            // seat 2's view becomes Player 1 in the recovered game
            assert_eq!(c.game.payoffs[0], [[5, 10], [0, 8]]);
            assert_eq!(c.history.len(), 3);
            assert_eq!(c.history.rounds()[0].actions, [1, 0]);
        }
    }
}
