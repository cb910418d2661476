//! Grids of matches and their aggregate statistics.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::AgentSpec;
use crate::engine::{play_match, MatchConfig, MatchContext, Transcript};
use crate::game::{classify, enumerate_games, GameFamily, PayoffGame, Seat};
use crate::prompting::{variant_space, Intervention, PredictionMode, PromptVariant, DEFAULT_TEMPLATES};

/// z-score for a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("grid has no agents")]
    NoAgents,
    #[error("grid has no games")]
    NoGames,
    #[error("grid expands to no matches")]
    Empty,
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("bad {what} '{value}': {message}")]
    Parse { what: &'static str, value: String, message: String },
    #[error("reading game file {path}: {message}")]
    GameFile { path: PathBuf, message: String },
    #[error("run directory {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn parse_err(what: &'static str, value: &str, e: impl ToString) -> GridError {
    GridError::Parse { what, value: value.to_string(), message: e.to_string() }
}

/// A game ready to play, with the id it is referred to by.
#[derive(Clone, Debug, PartialEq)]
pub struct GameEntry {
    pub id: String,
    pub game: PayoffGame,
    pub family: Option<GameFamily>,
}

impl GameEntry {
    fn new(id: String, game: PayoffGame) -> Self {
        let family = game.ordinal().map(|g| classify(&g.canonicalize()));
        GameEntry { id, game, family }
    }
}

/// The 144 canonical ordinal games as `ordinal:<index>` entries, with payoffs equal to ranks.
pub fn ordinal_entries() -> Vec<GameEntry> {
    enumerate_games()
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let id = format!("ordinal:{i}");
            GameEntry { game: g.to_payoff_game(Some(id.clone())), family: Some(classify(&g)), id }
        })
        .collect()
}

/// Resolve `pd`, `bos`, `ordinal:<index>` or a path to a JSON game file.
pub fn resolve_game(id: &str) -> Result<GameEntry, GridError> {
    match id {
        "pd" => return Ok(GameEntry::new(id.into(), PayoffGame::prisoners_dilemma())),
        // tied off-diagonal payoffs leave it without an ordinal form; it is the biased archetype
        "bos" => {
            return Ok(GameEntry {
                id: id.into(),
                game: PayoffGame::battle_of_the_sexes(),
                family: Some(GameFamily::Biased),
            })
        }
        _ => {}
    }
    if let Some(i) = id.strip_prefix("ordinal:") {
        let i: usize = i.parse().map_err(|e| parse_err("game id", id, e))?;
        return ordinal_entries()
            .into_iter()
            .nth(i)
            .ok_or_else(|| parse_err("game id", id, "ordinal index must be below 144"));
    }
    let path = Path::new(id);
    if path.extension().is_some_and(|e| e == "json") {
        let text =
            fs::read_to_string(path).map_err(|e| GridError::GameFile { path: path.into(), message: e.to_string() })?;
        let game: PayoffGame = serde_json::from_str(&text)
            .map_err(|e| GridError::GameFile { path: path.into(), message: e.to_string() })?;
        return Ok(GameEntry::new(id.into(), game));
    }
    Err(parse_err("game id", id, "expected pd, bos, ordinal:<index> or a .json file"))
}

fn default_games() -> Vec<String> {
    vec!["families".into()]
}
fn default_rounds() -> u32 {
    crate::engine::DEFAULT_ROUNDS
}
fn default_variants() -> Vec<String> {
    vec![PromptVariant::default().id()]
}
fn default_none() -> Vec<String> {
    vec!["none".into()]
}
fn default_one() -> u32 {
    1
}
fn default_true() -> bool {
    true
}
fn default_templates() -> String {
    DEFAULT_TEMPLATES.into()
}

/// What to play. Entries are strings so the spec reads naturally from a config file.
///
/// `games` entries: `families` (the 136 games in named families, or all 144 with
/// `include_other_families`), `all`, `family:<name>`, or any id accepted by [`resolve_game`].
/// `variants` entries: a variant id or `all`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub agents: Vec<String>,
    #[serde(default = "default_games")]
    pub games: Vec<String>,
    #[serde(default)]
    pub include_other_families: bool,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default = "default_variants")]
    pub variants: Vec<String>,
    #[serde(default = "default_none")]
    pub interventions: Vec<String>,
    #[serde(default = "default_none")]
    pub prediction_modes: Vec<String>,
    #[serde(default = "default_one")]
    pub repetitions: u32,
    #[serde(default = "default_true")]
    pub self_play: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_templates")]
    pub templates: String,
    /// Worker threads; defaults to the number of CPUs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concurrency: Option<usize>,
}

impl GridSpec {
    pub fn new<S: Into<String>>(agents: impl IntoIterator<Item = S>) -> Self {
        GridSpec {
            agents: agents.into_iter().map(Into::into).collect(),
            games: default_games(),
            include_other_families: false,
            rounds: default_rounds(),
            variants: default_variants(),
            interventions: default_none(),
            prediction_modes: default_none(),
            repetitions: 1,
            self_play: true,
            seed: 0,
            templates: default_templates(),
            concurrency: None,
        }
    }

    pub fn agent_specs(&self) -> Result<Vec<AgentSpec>, GridError> {
        self.agents.iter().map(|a| a.parse().map_err(|e| parse_err("agent", a, e))).collect()
    }

    pub fn game_entries(&self) -> Result<Vec<GameEntry>, GridError> {
        let mut out: Vec<GameEntry> = Vec::new();
        let mut seen = HashSet::new();
        let mut add = |entries: Vec<GameEntry>, out: &mut Vec<GameEntry>| {
            for e in entries {
                if seen.insert(e.id.clone()) {
                    out.push(e);
                }
            }
        };
        for sel in &self.games {
            let entries = match sel.as_str() {
                "all" => ordinal_entries(),
                "families" => ordinal_entries()
                    .into_iter()
                    .filter(|e| self.include_other_families || e.family != Some(GameFamily::Other))
                    .collect(),
                s => match s.strip_prefix("family:") {
                    Some(name) => {
                        let fam =
                            GameFamily::from_name(name).ok_or_else(|| parse_err("family", name, "unknown family"))?;
                        ordinal_entries().into_iter().filter(|e| e.family == Some(fam)).collect()
                    }
                    None => vec![resolve_game(s)?],
                },
            };
            add(entries, &mut out);
        }
        Ok(out)
    }

    pub fn variant_list(&self) -> Result<Vec<PromptVariant>, GridError> {
        let mut out = Vec::new();
        for v in &self.variants {
            if v == "all" {
                out.extend(variant_space());
            } else {
                out.push(v.parse().map_err(|e| parse_err("variant", v, e))?);
            }
        }
        Ok(out)
    }

    /// Stable digest naming the run directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.concurrency = None;
        hex::encode(Sha256::digest(serde_json::to_vec(&canonical).expect("grid spec serializes")))
    }
}

/// Every match in the grid, in a fixed order: ordered agent pair, game, variant,
/// intervention, prediction mode, repetition.
///
/// Interventions and prediction modes apply only to LLM seats, so configs that end up
/// identical (scripted pairs across interventions) are kept once.
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<MatchConfig>, GridError> {
    let agents = spec.agent_specs()?;
    if agents.is_empty() {
        return Err(GridError::NoAgents);
    }
    if spec.repetitions == 0 {
        return Err(GridError::NoRepetitions);
    }
    let games = spec.game_entries()?;
    if games.is_empty() {
        return Err(GridError::NoGames);
    }
    let variants = spec.variant_list()?;
    let interventions: Vec<Intervention> = spec
        .interventions
        .iter()
        .map(|s| s.parse().map_err(|e| parse_err("intervention", s, e)))
        .collect::<Result<_, _>>()?;
    let modes: Vec<PredictionMode> = spec
        .prediction_modes
        .iter()
        .map(|s| s.parse().map_err(|e| parse_err("prediction mode", s, e)))
        .collect::<Result<_, _>>()?;

    let mut pairs = Vec::new();
    for (i, a) in agents.iter().enumerate() {
        for (j, b) in agents.iter().enumerate() {
            if i != j || spec.self_play {
                pairs.push([a.clone(), b.clone()]);
            }
        }
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for pair in &pairs {
        let llm = pair.clone().map(|a| a.is_llm());
        for g in &games {
            for v in &variants {
                for iv in &interventions {
                    for mode in &modes {
                        for rep in 0..spec.repetitions {
                            let mut cfg =
                                MatchConfig::new(g.id.clone(), g.game.clone(), pair[0].clone(), pair[1].clone());
                            cfg.family = g.family;
                            cfg.rounds = spec.rounds;
                            cfg.variant = *v;
                            cfg.interventions = llm.map(|l| if l { iv.clone() } else { Intervention::None });
                            cfg.prediction = llm.map(|l| if l { *mode } else { PredictionMode::None });
                            cfg.seed = spec.seed.wrapping_add(u64::from(rep));
                            cfg.templates = spec.templates.clone();
                            if seen.insert(cfg.hash()) {
                                out.push(cfg);
                            }
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(GridError::Empty);
    }
    Ok(out)
}

/// Layout of a run directory.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    /// `<out>/run-<first 12 hex digits of the grid hash>`
    pub fn for_grid(out: &Path, spec: &GridSpec) -> Self {
        RunDir::new(out.join(format!("run-{}", &spec.hash()[..12])))
    }

    pub fn transcript_path(&self, config_hash: &str) -> PathBuf {
        self.root.join("transcripts").join(format!("{config_hash}.json"))
    }

    pub fn completions_path(&self, config_hash: &str) -> PathBuf {
        self.root.join("completions").join(format!("{config_hash}.jsonl"))
    }

    pub fn load_transcript(&self, config_hash: &str) -> Option<Transcript> {
        let bytes = fs::read(self.transcript_path(config_hash)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    /// Every transcript in the directory, sorted by file name.
    pub fn load_all(&self) -> Result<Vec<Transcript>, GridError> {
        let dir = self.root.join("transcripts");
        let io_err = |source| GridError::Io { path: dir.clone(), source };
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|source| GridError::Io { path: p.clone(), source })?;
                serde_json::from_slice(&bytes).map_err(|e| GridError::Io {
                    path: p.clone(),
                    source: io::Error::new(io::ErrorKind::InvalidData, e),
                })
            })
            .collect()
    }
}

/// Write `bytes` via a temp file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("part");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn persist(run: &RunDir, out: &crate::engine::MatchOutput) -> io::Result<()> {
    let hash = &out.transcript.config_hash;
    let mut log = Vec::new();
    for rec in &out.completions {
        serde_json::to_writer(&mut log, rec)?;
        log.push(b'\n');
    }
    if !log.is_empty() {
        write_atomic(&run.completions_path(hash), &log)?;
    }
    let mut doc = serde_json::to_vec_pretty(&out.transcript)?;
    doc.push(b'\n');
    write_atomic(&run.transcript_path(hash), &doc)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub config_hash: String,
    pub game_id: String,
    pub agents: [String; 2],
    pub error: String,
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    /// Transcripts in grid order; configs that could not be played are absent.
    pub transcripts: Vec<Transcript>,
    pub executed: usize,
    pub reused: usize,
    pub invalid: usize,
    /// Configs without a valid transcript, with the cause.
    pub failures: Vec<Failure>,
}

impl RunSummary {
    pub fn all_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

enum Outcome {
    Reused(Transcript),
    Played(Transcript),
    Failed(String),
}

/// Play every config not already finished in `run`.
///
/// Valid transcripts found on disk are reused; invalid ones are played again. Matches run
/// on a pool of `concurrency` threads (all CPUs when `None`).
pub fn run_grid(
    configs: &[MatchConfig],
    ctx: MatchContext<'_>,
    run: &RunDir,
    concurrency: Option<usize>,
) -> Result<RunSummary, GridError> {
    for sub in ["transcripts", "completions"] {
        let p = run.root.join(sub);
        fs::create_dir_all(&p).map_err(|source| GridError::Io { path: p, source })?;
    }
    let play = |cfg: &MatchConfig| -> Outcome {
        let hash = cfg.hash();
        if let Some(t) = run.load_transcript(&hash).filter(|t| t.valid && t.config == *cfg) {
            return Outcome::Reused(t);
        }
        match play_match(cfg, ctx) {
            Ok(out) => match persist(run, &out) {
                Ok(()) => Outcome::Played(out.transcript),
                Err(e) => Outcome::Failed(format!("writing transcript: {e}")),
            },
            Err(e) => Outcome::Failed(e.to_string()),
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = concurrency {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| GridError::Io { path: run.root.clone(), source: io::Error::other(e) })?;
    let outcomes: Vec<Outcome> = pool.install(|| configs.par_iter().map(play).collect());

    let mut summary = RunSummary::default();
    for (cfg, outcome) in configs.iter().zip(outcomes) {
        let failure = |error: String| Failure {
            config_hash: cfg.hash(),
            game_id: cfg.game_id.clone(),
            agents: cfg.agents.clone().map(|a| a.to_string()),
            error,
        };
        let t = match outcome {
            Outcome::Reused(t) => {
                summary.reused += 1;
                t
            }
            Outcome::Played(t) => {
                summary.executed += 1;
                t
            }
            Outcome::Failed(e) => {
                summary.failures.push(failure(e));
                continue;
            }
        };
        if !t.valid {
            summary.invalid += 1;
            summary.failures.push(failure(t.error.clone().unwrap_or_default()));
        }
        summary.transcripts.push(t);
    }
    Ok(summary)
}

/// Row keys for [`aggregate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKey {
    Agent,
    Opponent,
    Family,
    Game,
    Variant,
    Intervention,
    PredictionMode,
    Seat,
}

/// Which seats of each transcript are observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Focus {
    Seat(Seat),
    /// Both seats, each seen from its own side; a transcript counts twice.
    EachSeat,
}

/// One cell of an aggregate table. Keys not grouped on are empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub agent: Option<String>,
    pub opponent: Option<String>,
    pub family: Option<String>,
    pub game: Option<String>,
    pub variant: Option<String>,
    pub intervention: Option<String>,
    pub prediction_mode: Option<String>,
    pub seat: Option<u8>,
    /// Valid observations.
    pub n: usize,
    /// Invalid transcripts that fell in this cell and were left out.
    pub invalid: usize,
    pub mean_score: f64,
    pub ci_half_width: f64,
    /// Fewer than two observations, so the interval says nothing.
    pub low_n: bool,
    pub defection_rate: f64,
    pub coordination_rate: f64,
    /// Mean over observations where the preferred option is defined.
    pub preferred_option_rate: Option<f64>,
}

/// Sample mean and 95% normal-approximation half-width. One value gives width 0.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z_95 * var.sqrt() / n.sqrt())
}

fn key_of(t: &Transcript, seat: Seat, keys: &[GroupKey]) -> MetricsRow {
    let c = &t.config;
    let i = seat.index();
    let mut row = MetricsRow::default();
    for k in keys {
        match k {
            GroupKey::Agent => row.agent = Some(c.agents[i].to_string()),
            GroupKey::Opponent => row.opponent = Some(c.agents[1 - i].to_string()),
            GroupKey::Family => row.family = Some(c.family.map_or("unclassified".into(), |f| f.name().to_string())),
            GroupKey::Game => row.game = Some(c.game_id.clone()),
            GroupKey::Variant => row.variant = Some(c.variant.id()),
            GroupKey::Intervention => row.intervention = Some(c.interventions[i].id().to_string()),
            GroupKey::PredictionMode => row.prediction_mode = Some(c.prediction[i].id().to_string()),
            GroupKey::Seat => row.seat = Some(seat.number()),
        }
    }
    row
}

type RowKey = (
    Option<String>,
    Option<String>,
    Option<String>,
    Option<String>,
    Option<String>,
    Option<String>,
    Option<String>,
    Option<u8>,
);

fn sort_key(r: &MetricsRow) -> RowKey {
    (
        r.agent.clone(),
        r.opponent.clone(),
        r.family.clone(),
        r.game.clone(),
        r.variant.clone(),
        r.intervention.clone(),
        r.prediction_mode.clone(),
        r.seat,
    )
}

#[derive(Default)]
struct Acc {
    scores: Vec<f64>,
    defection: Vec<f64>,
    coordination: Vec<f64>,
    preferred: Vec<f64>,
    invalid: usize,
}

/// Group per-seat observations by `keys` and summarize each group.
///
/// Rows are sorted by key. Groups holding only invalid transcripts produce no row; their
/// count is in the run's failure list.
pub fn aggregate(transcripts: &[Transcript], keys: &[GroupKey], focus: Focus) -> Vec<MetricsRow> {
    let seats: &[Seat] = match focus {
        Focus::Seat(Seat::P1) => &[Seat::P1],
        Focus::Seat(Seat::P2) => &[Seat::P2],
        Focus::EachSeat => &Seat::BOTH,
    };
    let mut groups: BTreeMap<RowKey, (MetricsRow, Acc)> = BTreeMap::new();
    for t in transcripts {
        for &seat in seats {
            let row = key_of(t, seat, keys);
            let (_, acc) = groups.entry(sort_key(&row)).or_insert_with(|| (row, Acc::default()));
            let metrics = t.metrics.as_ref().filter(|_| t.valid);
            let Some(m) = metrics else {
                acc.invalid += 1;
                continue;
            };
            let i = seat.index();
            acc.scores.push(m.normalized_score[i]);
            acc.defection.push(m.defection_rate[i]);
            acc.coordination.push(m.coordination_rate);
            if let Some(p) = m.preferred_option_rate[i] {
                acc.preferred.push(p);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    groups
        .into_values()
        .filter(|(_, acc)| !acc.scores.is_empty())
        .map(|(mut row, acc)| {
            let (m, hw) = mean_ci(&acc.scores);
            row.n = acc.scores.len();
            row.invalid = acc.invalid;
            row.mean_score = m;
            row.ci_half_width = hw;
            row.low_n = row.n < 2;
            row.defection_rate = mean(&acc.defection);
            row.coordination_rate = mean(&acc.coordination);
            row.preferred_option_rate = (!acc.preferred.is_empty()).then(|| mean(&acc.preferred));
            row
        })
        .collect()
}

pub fn write_rows_csv(rows: &[MetricsRow], w: impl io::Write) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rows_json(rows: &[MetricsRow], mut w: impl io::Write) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, rows)?;
    w.write_all(b"\n")
}
