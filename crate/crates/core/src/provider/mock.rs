use std::collections::VecDeque;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, ProviderParams};
use crate::agents::{scripted_move, AgentSpec, SeatView};
use crate::game::Seat;
use crate::prompting::{PromptReader, Query, Templates};

/// How a policy-mode mock answers prediction queries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predictor {
    /// The opponent repeats its last action; in round 1, its preferred option.
    #[default]
    RepeatLast,
    /// The opponent is assumed to follow this scripted strategy.
    Assume(AgentSpec),
}

impl FromStr for Predictor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "repeat-last" {
            return Ok(Predictor::RepeatLast);
        }
        match s.parse::<AgentSpec>() {
            Ok(spec) if !spec.is_llm() => Ok(Predictor::Assume(spec)),
            _ => Err(format!("unknown predictor '{s}'")),
        }
    }
}

enum Mode {
    Scripted(Mutex<VecDeque<String>>),
    Policy { act: AgentSpec, predict: Predictor, reader: Box<PromptReader> },
}

/// Deterministic stand-in for a chat model.
///
/// Scripted mode returns queued completions in order. Policy mode reads the prompt back
/// and answers as the given scripted strategy would, so a seat goes through the same
/// prompt path as with a real model.
pub struct MockProvider {
    id: String,
    mode: Mode,
    calls: AtomicU64,
}

impl MockProvider {
    pub fn scripted<I, S>(id: impl Into<String>, completions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MockProvider {
            id: id.into(),
            mode: Mode::Scripted(Mutex::new(completions.into_iter().map(Into::into).collect())),
            calls: AtomicU64::new(0),
        }
    }

    pub fn policy(
        id: impl Into<String>,
        act: AgentSpec,
        predict: Predictor,
        templates: &Templates,
    ) -> Result<Self, String> {
        if act.is_llm() {
            return Err("policy mocks need a scripted strategy".into());
        }
        let reader = templates.reader().map_err(|e| e.to_string())?;
        Ok(MockProvider {
            id: id.into(),
            mode: Mode::Policy { act, predict, reader: Box::new(reader) },
            calls: AtomicU64::new(0),
        })
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn answer(
        act: &AgentSpec,
        predict: &Predictor,
        reader: &PromptReader,
        prompt: &str,
    ) -> Result<String, BackendError> {
        let content = reader.read(prompt).map_err(|e| BackendError::Mock(e.to_string()))?;
        let game = &content.game;
        let fail = |e: crate::agents::AgentError| BackendError::Mock(e.to_string());
        let action = match content.query {
            Query::Act | Query::ActAfterPrediction(_) => {
                scripted_move(act, &SeatView::of(game, Seat::P1), &content.history.from_seat(Seat::P1)).map_err(fail)?
            }
            Query::PredictOpponent | Query::PredictPlayer(_) => {
                let target = match content.query {
                    Query::PredictPlayer(seat) => seat,
                    _ => Seat::P2,
                };
                let view = SeatView::of(game, target);
                let past = content.history.from_seat(target);
                match predict {
                    Predictor::RepeatLast => match past.last() {
                        Some(r) => r.own,
                        None => view.own_preferred().unwrap_or(0),
                    },
                    Predictor::Assume(spec) => scripted_move(spec, &view, &past).map_err(fail)?,
                }
            }
        };
        Ok(content.scheme.labels()[action].to_string())
    }
}

impl Backend for MockProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn is_network(&self) -> bool {
        false
    }

    fn complete(&self, prompt: &str, _params: &ProviderParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match &self.mode {
            Mode::Scripted(queue) => queue
                .lock()
                .expect("mock queue poisoned")
                .pop_front()
                .ok_or_else(|| BackendError::Mock("script exhausted".into())),
            Mode::Policy { act, predict, reader } => Self::answer(act, predict, reader, prompt),
        }
    }
}
