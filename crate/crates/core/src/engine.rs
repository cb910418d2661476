//! Playing one finitely repeated match and scoring it.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{next_move, preferred_option, AgentError, AgentSpec, History, Round, DEFECT};
use crate::game::{GameFamily, PayoffGame, Seat};
use crate::prompting::{
    parse_choice, Frame, Intervention, PredictionMode, PromptError, PromptVariant, Query, Templates, DEFAULT_TEMPLATES,
};
use crate::provider::{CompletionClient, CompletionRecord, CompletionRequest, ProviderError};

pub const DEFAULT_ROUNDS: u32 = 10;

/// Re-asks allowed after an unparsable completion, with the same prompt.
pub const PARSE_RETRIES: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub game_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<GameFamily>,
    pub game: PayoffGame,
    pub agents: [AgentSpec; 2],
    pub rounds: u32,
    pub variant: PromptVariant,
    /// Only LLM seats take interventions.
    #[serde(default)]
    pub interventions: [Intervention; 2],
    /// Only LLM seats take prediction modes.
    #[serde(default)]
    pub prediction: [PredictionMode; 2],
    #[serde(default)]
    pub seed: u64,
    pub templates: String,
}

impl MatchConfig {
    pub fn new(game_id: impl Into<String>, game: PayoffGame, p1: AgentSpec, p2: AgentSpec) -> Self {
        MatchConfig {
            game_id: game_id.into(),
            family: game.ordinal().map(|g| crate::game::classify(&g.canonicalize())),
            game,
            agents: [p1, p2],
            rounds: DEFAULT_ROUNDS,
            variant: PromptVariant::default(),
            interventions: Default::default(),
            prediction: Default::default(),
            seed: 0,
            templates: DEFAULT_TEMPLATES.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), MatchError> {
        let bad = |m: String| Err(MatchError::InvalidConfig(m));
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        for seat in Seat::BOTH {
            let agent = &self.agents[seat.index()];
            agent.validate().map_err(|e| MatchError::InvalidConfig(e.to_string()))?;
            if !agent.is_llm()
                && (self.interventions[seat.index()] != Intervention::None
                    || self.prediction[seat.index()] != PredictionMode::None)
            {
                return bad(format!("{seat} is scripted ({agent}) and cannot take interventions or prediction modes"));
            }
        }
        Ok(())
    }

    /// Hex digest of the serialized config; names the transcript file.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Purpose {
    Act,
    Predict,
}

/// Pointer from a round into the run log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRef {
    pub seat: Seat,
    pub purpose: Purpose,
    pub attempt: u32,
    pub key: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub actions: [usize; 2],
    pub payoffs: [u32; 2],
    /// `predictions[s]` is seat `s`'s prediction of its opponent's action this round.
    pub predictions: [Option<usize>; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub completions: Vec<CompletionRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub config_hash: String,
    pub config: MatchConfig,
    pub rounds: Vec<RoundRecord>,
    pub totals: [u64; 2],
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MatchMetrics>,
}

impl Transcript {
    pub fn history(&self) -> History {
        self.rounds.iter().map(|r| Round { actions: r.actions, payoffs: r.payoffs }).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchMetrics {
    pub normalized_score: [f64; 2],
    /// Share of rounds on action 0 (F, defection in dilemma framings).
    pub defection_rate: [f64; 2],
    /// `None` when the seat's preferred option is ambiguous.
    pub preferred_option_rate: [Option<f64>; 2],
    pub coordination_rate: f64,
    pub prediction_lock_round: [Option<u32>; 2],
}

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{seat} answered {raw:?}, not a legal option, after {attempts} attempts")]
    Unparsable { seat: Seat, raw: String, attempts: u32 },
    #[error("transcript is invalid")]
    InvalidTranscript,
    #[error("{0} has no positive payoff to normalize by")]
    ZeroMaximum(Seat),
}

/// What a match needs beyond its config.
#[derive(Clone, Copy)]
pub struct MatchContext<'a> {
    pub client: Option<&'a CompletionClient>,
    pub templates: &'a Templates,
}

#[derive(Clone, Debug)]
pub struct MatchOutput {
    pub transcript: Transcript,
    /// Every provider call made for this match, in call order.
    pub completions: Vec<CompletionRecord>,
}

struct Turn {
    action: usize,
    prediction: Option<usize>,
}

struct Runner<'a> {
    config: &'a MatchConfig,
    ctx: MatchContext<'a>,
    rules: [String; 2],
    observer_rules: String,
    refs: Vec<CompletionRef>,
    records: Vec<CompletionRecord>,
}

impl<'a> Runner<'a> {
    fn ask(&mut self, seat: Seat, provider: &str, prompt: &str, purpose: Purpose) -> Result<usize, MatchError> {
        let client = self.ctx.client.ok_or_else(|| AgentError::NeedsProvider(provider.to_string()))?;
        let mut last = String::new();
        for attempt in 0..=PARSE_RETRIES {
            let done =
                client.complete(&CompletionRequest { provider, prompt, attempt, seed: Some(self.config.seed) })?;
            self.refs.push(CompletionRef { seat, purpose, attempt, key: done.record.key.clone() });
            self.records.push(done.record);
            match parse_choice(&done.text, &self.config.variant) {
                Ok(a) => return Ok(a),
                Err(e) => last = e.raw,
            }
        }
        Err(MatchError::Unparsable { seat, raw: last, attempts: PARSE_RETRIES + 1 })
    }

    fn turn(&mut self, seat: Seat, history: &History) -> Result<Turn, MatchError> {
        let cfg = self.config;
        let agent = &cfg.agents[seat.index()];
        let Some(provider) = agent.provider() else {
            return Ok(Turn { action: next_move(agent, seat, &cfg.game, history)?, prediction: None });
        };
        let t = self.ctx.templates;
        let frame = Frame::Player(seat);
        let intervention = &cfg.interventions[seat.index()];
        let variant = &cfg.variant;
        let rules = self.rules[seat.index()].clone();
        let prompt = |q: Query| t.render_round_prompt(&rules, frame, history, intervention, q, variant);

        let prediction = match cfg.prediction[seat.index()] {
            PredictionMode::None => None,
            PredictionMode::PredictAsPlayer | PredictionMode::PredictThenAct => {
                Some(self.ask(seat, provider, &prompt(Query::PredictOpponent)?, Purpose::Predict)?)
            }
            PredictionMode::PredictAsObserver => {
                let p = t.render_round_prompt(
                    &self.observer_rules,
                    Frame::Observer,
                    history,
                    &Intervention::None,
                    Query::PredictPlayer(seat.other()),
                    variant,
                )?;
                Some(self.ask(seat, provider, &p, Purpose::Predict)?)
            }
        };
        let query = match (cfg.prediction[seat.index()], prediction) {
            (PredictionMode::PredictThenAct, Some(p)) => Query::ActAfterPrediction(p),
            _ => Query::Act,
        };
        let action = self.ask(seat, provider, &prompt(query)?, Purpose::Act)?;
        Ok(Turn { action, prediction })
    }
}

/// Play the match. Seats move simultaneously: each sees only completed rounds.
///
/// A failure during play does not fail the call. It ends the match early with an invalid
/// transcript that records the cause.
pub fn play_match(config: &MatchConfig, ctx: MatchContext<'_>) -> Result<MatchOutput, MatchError> {
    play_match_in_order(config, ctx, [Seat::P1, Seat::P2])
}

pub(crate) fn play_match_in_order(
    config: &MatchConfig,
    ctx: MatchContext<'_>,
    order: [Seat; 2],
) -> Result<MatchOutput, MatchError> {
    config.validate()?;
    if config.templates != ctx.templates.id {
        return Err(MatchError::InvalidConfig(format!(
            "config wants templates '{}' but '{}' were supplied",
            config.templates, ctx.templates.id
        )));
    }
    let t = ctx.templates;
    let mut runner = Runner {
        config,
        ctx,
        rules: Seat::BOTH.map(|s| t.render_rules(&config.game, Frame::Player(s), &config.variant, config.rounds)),
        observer_rules: t.render_rules(&config.game, Frame::Observer, &config.variant, config.rounds),
        refs: Vec::new(),
        records: Vec::new(),
    };

    let mut history = History::new();
    let mut rounds = Vec::with_capacity(config.rounds as usize);
    let mut error = None;
    'play: for number in 1..=config.rounds {
        let mut turns: [Option<Turn>; 2] = [None, None];
        for seat in order {
            match runner.turn(seat, &history) {
                Ok(turn) => turns[seat.index()] = Some(turn),
                Err(e) => {
                    error = Some(format!("round {number}: {e}"));
                    break 'play;
                }
            }
        }
        let [Some(t1), Some(t2)] = turns else { unreachable!("both seats moved") };
        let round = Round::played(&config.game, t1.action, t2.action);
        history.push(round);
        // keep refs in seat order regardless of query order
        let mut completions = std::mem::take(&mut runner.refs);
        completions.sort_by_key(|r| r.seat);
        rounds.push(RoundRecord {
            round: number,
            actions: round.actions,
            payoffs: round.payoffs,
            predictions: [t1.prediction, t2.prediction],
            completions,
        });
    }

    let totals = Seat::BOTH.map(|s| rounds.iter().map(|r: &RoundRecord| u64::from(r.payoffs[s.index()])).sum());
    let mut transcript = Transcript {
        config_hash: config.hash(),
        config: config.clone(),
        rounds,
        totals,
        valid: error.is_none(),
        error,
        metrics: None,
    };
    transcript.metrics = match_metrics(&transcript).ok();
    Ok(MatchOutput { transcript, completions: runner.records })
}

/// Total payoff over `rounds` times the seat's largest matrix entry.
pub fn normalized_score(t: &Transcript, seat: Seat) -> Result<f64, MatchError> {
    if !t.valid {
        return Err(MatchError::InvalidTranscript);
    }
    let max = t.config.game.max_payoff(seat);
    if max == 0 {
        return Err(MatchError::ZeroMaximum(seat));
    }
    Ok(t.totals[seat.index()] as f64 / (f64::from(t.config.rounds) * f64::from(max)))
}

/// First round from which every prediction by `seat` matched the opponent's actual move.
pub fn prediction_lock_round(rounds: &[RoundRecord], seat: Seat) -> Option<u32> {
    let opponent = seat.other().index();
    let correct_suffix =
        rounds.iter().rev().take_while(|r| r.predictions[seat.index()] == Some(r.actions[opponent])).count();
    (correct_suffix > 0).then(|| rounds[rounds.len() - correct_suffix].round)
}

pub fn match_metrics(t: &Transcript) -> Result<MatchMetrics, MatchError> {
    let n = t.config.rounds as f64;
    let share = |pred: &dyn Fn(&RoundRecord) -> bool| t.rounds.iter().filter(|r| pred(r)).count() as f64 / n;
    let normalized_score = [normalized_score(t, Seat::P1)?, normalized_score(t, Seat::P2)?];
    let defection_rate = Seat::BOTH.map(|s| share(&|r| r.actions[s.index()] == DEFECT));
    let preferred_option_rate =
        Seat::BOTH.map(|s| preferred_option(&t.config.game, s).ok().map(|p| share(&|r| r.actions[s.index()] == p)));
    Ok(MatchMetrics {
        normalized_score,
        defection_rate,
        preferred_option_rate,
        coordination_rate: share(&|r| r.actions[0] == r.actions[1]),
        prediction_lock_round: Seat::BOTH.map(|s| prediction_lock_round(&t.rounds, s)),
    })
}
