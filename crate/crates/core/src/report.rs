//! Command operations behind the `arena` binary, plus report files and chart specs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::AgentSpec;
use crate::config::{ConfigError, ExperimentConfig};
use crate::engine::{play_match, MatchConfig, MatchContext, MatchError, Transcript};
use crate::game::{
    classify, dominant_action, enumerate_games, equilibrium_report, family_census, pure_nash, EquilibriumReport,
    GameFamily, OrdinalGame, PayoffGame, Seat,
};
use crate::prompting::{
    golden_corpus, parse_choice, variant_space, Frame, Intervention, PredictionMode, PromptError, PromptVariant, Query,
    Templates,
};
use crate::provider::{ClientOptions, Clock, CompletionClient};
use crate::tournament::{
    aggregate, expand_grid, resolve_game, run_grid, write_atomic, write_rows_csv, Failure, Focus, GridError, GroupKey,
    MetricsRow, RunDir, RunSummary,
};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("bad {what} '{value}': {message}")]
    Arg { what: &'static str, value: String, message: String },
    #[error("config has no [grid] section")]
    NoGrid,
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    write_atomic(path, bytes).map_err(io_at(path))
}

fn pretty(v: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

/// One line of the enumeration dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerationRecord {
    pub index: usize,
    pub id: String,
    pub ranks: OrdinalGame,
    pub family: GameFamily,
    pub nash: Vec<[usize; 2]>,
    pub dominant: [Option<usize>; 2],
}

pub fn enumeration() -> Vec<EnumerationRecord> {
    enumerate_games()
        .into_iter()
        .enumerate()
        .map(|(index, g)| EnumerationRecord {
            index,
            id: format!("ordinal:{index}"),
            ranks: g,
            family: classify(&g),
            nash: pure_nash(&g).into_iter().map(|c| [c.row, c.col]).collect(),
            dominant: Seat::BOTH.map(|s| dominant_action(&g, s)),
        })
        .collect()
}

pub fn census_table(census: &BTreeMap<GameFamily, usize>) -> String {
    let mut out = String::new();
    for (f, n) in census {
        let _ = writeln!(out, "{:<18} {n:>3}", f.name());
    }
    let _ = writeln!(out, "{:<18} {:>3}", "total", census.values().sum::<usize>());
    out
}

/// Write the 144 games as JSON lines; returns the family census.
pub fn cmd_enumerate(out: &Path) -> Result<BTreeMap<GameFamily, usize>, ReportError> {
    let mut body = Vec::new();
    for rec in enumeration() {
        serde_json::to_writer(&mut body, &rec).expect("serializable");
        body.push(b'\n');
    }
    write_file(out, &body)?;
    Ok(family_census())
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub id: String,
    pub family: Option<GameFamily>,
    /// Canonical representative of the game's ordinal form, if it has one.
    pub canonical: Option<OrdinalGame>,
    pub equilibria: EquilibriumReport,
}

pub fn cmd_classify(id: &str) -> Result<Classification, ReportError> {
    let entry = resolve_game(id)?;
    Ok(Classification {
        id: entry.id,
        family: entry.family,
        canonical: entry.game.ordinal().map(|g| g.canonicalize()),
        equilibria: equilibrium_report(&entry.game),
    })
}

fn arg_err(what: &'static str, value: &str, e: impl ToString) -> ReportError {
    ReportError::Arg { what, value: value.to_string(), message: e.to_string() }
}

/// Everything `play` takes besides the config file.
#[derive(Clone, Debug)]
pub struct PlayOptions {
    pub game: String,
    pub agents: [String; 2],
    pub rounds: u32,
    pub variant: String,
    /// Applied to LLM seats only.
    pub intervention: String,
    /// Applied to LLM seats only.
    pub mode: String,
    pub seed: u64,
    pub offline: bool,
    pub out: PathBuf,
}

impl PlayOptions {
    pub fn new(game: impl Into<String>, p1: impl Into<String>, p2: impl Into<String>, out: impl Into<PathBuf>) -> Self {
        PlayOptions {
            game: game.into(),
            agents: [p1.into(), p2.into()],
            rounds: crate::engine::DEFAULT_ROUNDS,
            variant: PromptVariant::default().id(),
            intervention: "none".into(),
            mode: "none".into(),
            seed: 0,
            offline: false,
            out: out.into(),
        }
    }
}

#[derive(Debug)]
pub struct PlayResult {
    pub transcript: Transcript,
    pub path: PathBuf,
}

fn empty_client(offline: bool) -> CompletionClient {
    CompletionClient::new(ClientOptions { offline, clock: Clock::Frozen, ..Default::default() })
}

/// Play one match and write its transcript under `<out>/transcripts/`.
pub fn cmd_play(config: Option<&ExperimentConfig>, opts: &PlayOptions) -> Result<PlayResult, ReportError> {
    let entry = resolve_game(&opts.game)?;
    let agents: Vec<AgentSpec> =
        opts.agents.iter().map(|a| a.parse().map_err(|e| arg_err("agent", a, e))).collect::<Result<_, _>>()?;
    let mut cfg = MatchConfig::new(entry.id.clone(), entry.game, agents[0].clone(), agents[1].clone());
    cfg.family = entry.family;
    cfg.rounds = opts.rounds;
    cfg.variant = opts.variant.parse()?;
    let intervention: Intervention = opts.intervention.parse()?;
    let mode: PredictionMode = opts.mode.parse()?;
    let llm = cfg.agents.clone().map(|a| a.is_llm());
    cfg.interventions = llm.map(|l| if l { intervention.clone() } else { Intervention::None });
    cfg.prediction = llm.map(|l| if l { mode } else { PredictionMode::None });
    cfg.seed = opts.seed;

    let (templates, client) = match config {
        Some(c) => {
            c.check_agents(&cfg.agents)?;
            let t = c.templates()?;
            let client = c.build_client(&opts.out, opts.offline, &t)?;
            (t, client)
        }
        None => (Templates::base(), empty_client(opts.offline)),
    };
    cfg.templates = templates.id.clone();
    let out = play_match(&cfg, MatchContext { client: Some(&client), templates: &templates })?;
    let run = RunDir::new(&opts.out);
    let path = run.transcript_path(&out.transcript.config_hash);
    if !out.completions.is_empty() {
        let log_path = run.completions_path(&out.transcript.config_hash);
        let mut log = Vec::new();
        for r in &out.completions {
            serde_json::to_writer(&mut log, r).expect("serializable");
            log.push(b'\n');
        }
        write_file(&log_path, &log)?;
    }
    write_file(&path, &pretty(&out.transcript))?;
    Ok(PlayResult { transcript: out.transcript, path })
}

/// Per-round table with actions shown as the variant's labels.
pub fn round_table(t: &Transcript) -> String {
    let v = &t.config.variant;
    let predicting = t.rounds.iter().any(|r| r.predictions.iter().any(Option::is_some));
    let mut out = String::new();
    let _ = write!(out, "{:>5}  {:>3} {:>3}  {:>5} {:>5}", "round", "P1", "P2", "pay1", "pay2");
    if predicting {
        let _ = write!(out, "  {:>5} {:>5}", "pred1", "pred2");
    }
    out.push('\n');
    for r in &t.rounds {
        let _ = write!(
            out,
            "{:>5}  {:>3} {:>3}  {:>5} {:>5}",
            r.round,
            v.label(r.actions[0]),
            v.label(r.actions[1]),
            r.payoffs[0],
            r.payoffs[1]
        );
        if predicting {
            let p = |x: Option<usize>| x.map_or("-", |a| v.label(a));
            let _ = write!(out, "  {:>5} {:>5}", p(r.predictions[0]), p(r.predictions[1]));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "total  {:>13} {:>5}", t.totals[0], t.totals[1]);
    match &t.metrics {
        Some(m) => {
            let _ = writeln!(out, "normalized score  {:.3} {:.3}", m.normalized_score[0], m.normalized_score[1]);
        }
        None => {
            let _ = writeln!(out, "INVALID: {}", t.error.as_deref().unwrap_or("unknown error"));
        }
    }
    out
}

/// Overrides for `tournament` from the command line.
#[derive(Clone, Debug, Default)]
pub struct TournamentOptions {
    pub out: Option<PathBuf>,
    pub offline: bool,
    pub include_other_families: bool,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct TournamentResult {
    pub run_dir: PathBuf,
    pub configs: usize,
    pub summary: RunSummary,
    pub backend_calls: u64,
    pub network_calls: u64,
}

/// Run the config's grid into `<out>/run-<grid hash>` and write reports there.
pub fn cmd_tournament(config: &ExperimentConfig, opts: &TournamentOptions) -> Result<TournamentResult, ReportError> {
    let mut grid = config.grid.clone().ok_or(ReportError::NoGrid)?;
    grid.include_other_families |= opts.include_other_families;
    if let Some(seed) = opts.seed {
        grid.seed = seed;
    }
    let out = opts.out.clone().unwrap_or_else(|| config.out_dir());
    let configs = expand_grid(&grid)?;
    config.check_agents(&grid.agent_specs()?)?;
    let templates = config.templates()?;
    let run = RunDir::for_grid(&out, &grid);
    let client = config.build_client(&run.root, opts.offline, &templates)?;
    write_file(&run.root.join("grid.json"), &pretty(&grid))?;
    let summary =
        run_grid(&configs, MatchContext { client: Some(&client), templates: &templates }, &run, grid.concurrency)?;
    write_reports(&run, &summary.transcripts, &summary.failures)?;
    Ok(TournamentResult {
        run_dir: run.root,
        configs: configs.len(),
        summary,
        backend_calls: client.backend_calls(),
        network_calls: client.network_calls(),
    })
}

/// Rebuild reports from the transcripts already in a run directory.
pub fn cmd_report(run_dir: &Path) -> Result<Vec<Transcript>, ReportError> {
    let run = RunDir::new(run_dir);
    let transcripts = run.load_all()?;
    let failures: Vec<Failure> = transcripts
        .iter()
        .filter(|t| !t.valid)
        .map(|t| Failure {
            config_hash: t.config_hash.clone(),
            game_id: t.config.game_id.clone(),
            agents: t.config.agents.clone().map(|a| a.to_string()),
            error: t.error.clone().unwrap_or_default(),
        })
        .collect();
    write_reports(&run, &transcripts, &failures)?;
    Ok(transcripts)
}

/// Aggregate tables written by [`write_reports`]: file stem, keys, focus.
pub const TABLES: &[(&str, &[GroupKey], Focus)] = &[
    ("by_agent_family", &[GroupKey::Agent, GroupKey::Family], Focus::EachSeat),
    ("by_agent", &[GroupKey::Agent], Focus::EachSeat),
    ("by_pair_family", &[GroupKey::Agent, GroupKey::Opponent, GroupKey::Family], Focus::Seat(Seat::P1)),
    ("by_pair_game", &[GroupKey::Agent, GroupKey::Opponent, GroupKey::Game], Focus::Seat(Seat::P1)),
    (
        "by_agent_treatment",
        &[GroupKey::Agent, GroupKey::Variant, GroupKey::Intervention, GroupKey::PredictionMode],
        Focus::EachSeat,
    ),
];

#[derive(Serialize)]
struct RunReport<'a> {
    transcripts: usize,
    valid: usize,
    invalid: usize,
    failures: &'a [Failure],
}

#[derive(Serialize)]
struct TrajectoryRow<'a> {
    config_hash: &'a str,
    game: &'a str,
    agent_p1: String,
    agent_p2: String,
    variant: String,
    round: u32,
    action_p1: &'static str,
    action_p2: &'static str,
    payoff_p1: u32,
    payoff_p2: u32,
    prediction_p1: Option<&'static str>,
    prediction_p2: Option<&'static str>,
}

/// Write metrics tables (CSV and JSON), per-round trajectories, the failure report and
/// chart specs into `run`. Output depends only on the transcripts.
pub fn write_reports(run: &RunDir, transcripts: &[Transcript], failures: &[Failure]) -> Result<(), ReportError> {
    let mut sorted: Vec<&Transcript> = transcripts.iter().collect();
    sorted.sort_by(|a, b| a.config_hash.cmp(&b.config_hash));
    let owned: Vec<Transcript> = sorted.iter().map(|t| (*t).clone()).collect();

    let metrics_dir = run.root.join("metrics");
    let mut tables = BTreeMap::new();
    for (stem, keys, focus) in TABLES {
        let rows = aggregate(&owned, keys, *focus);
        let mut csv = Vec::new();
        let path = metrics_dir.join(format!("{stem}.csv"));
        write_rows_csv(&rows, &mut csv).map_err(|e| ReportError::Io { path: path.clone(), source: e.into() })?;
        write_file(&path, &csv)?;
        write_file(&metrics_dir.join(format!("{stem}.json")), &pretty(&rows))?;
        tables.insert(*stem, rows);
    }

    let mut traj = csv::Writer::from_writer(Vec::new());
    let traj_path = run.root.join("trajectories.csv");
    for t in &sorted {
        let v = &t.config.variant;
        for r in &t.rounds {
            traj.serialize(TrajectoryRow {
                config_hash: &t.config_hash,
                game: &t.config.game_id,
                agent_p1: t.config.agents[0].to_string(),
                agent_p2: t.config.agents[1].to_string(),
                variant: v.id(),
                round: r.round,
                action_p1: v.label(r.actions[0]),
                action_p2: v.label(r.actions[1]),
                payoff_p1: r.payoffs[0],
                payoff_p2: r.payoffs[1],
                prediction_p1: r.predictions[0].map(|a| v.label(a)),
                prediction_p2: r.predictions[1].map(|a| v.label(a)),
            })
            .map_err(|e| ReportError::Io { path: traj_path.clone(), source: e.into() })?;
        }
    }
    let bytes = traj.into_inner().map_err(|e| ReportError::Io { path: traj_path.clone(), source: e.into_error() })?;
    write_file(&traj_path, &bytes)?;

    let valid = transcripts.iter().filter(|t| t.valid).count();
    let report = RunReport { transcripts: transcripts.len(), valid, invalid: transcripts.len() - valid, failures };
    write_file(&run.root.join("summary.json"), &pretty(&report))?;

    let plots = run.root.join("plots");
    write_file(&plots.join("family_scores.vl.json"), &pretty(&family_bar_chart(&tables["by_agent_family"])))?;
    for (metric, title) in HEATMAP_METRICS {
        let spec = heatmap(&tables["by_pair_family"], metric, title);
        write_file(&plots.join(format!("heatmap_{metric}.vl.json")), &pretty(&spec))?;
    }
    Ok(())
}

/// Metrics drawn as agent x opponent heatmaps, faceted by family.
pub const HEATMAP_METRICS: [(&str, &str); 4] = [
    ("mean_score", "Player 1 normalized score"),
    ("defection_rate", "Player 1 defection rate"),
    ("coordination_rate", "Coordination rate"),
    ("preferred_option_rate", "Player 1 preferred-option rate"),
];

fn row_value(r: &MetricsRow) -> Value {
    json!({
        "agent": r.agent,
        "opponent": r.opponent,
        "family": r.family,
        "n": r.n,
        "mean_score": r.mean_score,
        "ci_low": r.mean_score - r.ci_half_width,
        "ci_high": r.mean_score + r.ci_half_width,
        "defection_rate": r.defection_rate,
        "coordination_rate": r.coordination_rate,
        "preferred_option_rate": r.preferred_option_rate,
    })
}

/// Bars of mean normalized score per (agent, family) with 95% intervals, agents ordered
/// best to worst within each family panel.
pub fn family_bar_chart(rows: &[MetricsRow]) -> Value {
    let values: Vec<Value> = rows.iter().map(row_value).collect();
    json!({
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "title": "Normalized score by game family",
        "data": {"values": values},
        "facet": {"column": {"field": "family", "type": "nominal"}},
        "spec": {
            "encoding": {
                "x": {"field": "agent", "type": "nominal", "sort": "-y"},
            },
            "layer": [
                {
                    "mark": "bar",
                    "encoding": {"y": {"field": "mean_score", "type": "quantitative", "scale": {"domain": [0, 1]}}}
                },
                {
                    "mark": "errorbar",
                    "encoding": {
                        "y": {"field": "ci_low", "type": "quantitative"},
                        "y2": {"field": "ci_high"}
                    }
                }
            ]
        },
        "resolve": {"scale": {"x": "independent"}}
    })
}

pub fn heatmap(rows: &[MetricsRow], metric: &str, title: &str) -> Value {
    let values: Vec<Value> = rows.iter().map(row_value).collect();
    json!({
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "title": title,
        "data": {"values": values},
        "facet": {"column": {"field": "family", "type": "nominal"}},
        "spec": {
            "mark": "rect",
            "encoding": {
                "x": {"field": "opponent", "type": "nominal", "title": "Player 2"},
                "y": {"field": "agent", "type": "nominal", "title": "Player 1"},
                "color": {"field": metric, "type": "quantitative", "scale": {"domain": [0, 1]}}
            }
        }
    })
}

/// A golden file that does not match its rendering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub name: String,
    /// Line number (1-based) of the first difference, with both versions of that line.
    pub line: usize,
    pub expected: String,
    pub actual: String,
}

#[derive(Clone, Debug, Default)]
pub struct PromptValidation {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
    pub missing: Vec<String>,
    /// Files in the golden directory no case produces.
    pub stale: Vec<String>,
    pub round_trips: usize,
    pub round_trip_failures: Vec<String>,
    /// Variants whose rendered prompt reads back to different payoffs.
    pub payoff_changes: Vec<String>,
    pub blessed: usize,
}

impl PromptValidation {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
            && self.missing.is_empty()
            && self.stale.is_empty()
            && self.round_trip_failures.is_empty()
            && self.payoff_changes.is_empty()
    }
}

fn first_difference(expected: &str, actual: &str) -> (usize, String, String) {
    let mut e = expected.split('\n');
    let mut a = actual.split('\n');
    let mut line = 1;
    loop {
        match (e.next(), a.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (x, y) => return (line, x.unwrap_or("<end of file>").into(), y.unwrap_or("<end of file>").into()),
        }
    }
}

/// Compare the golden corpus against `dir/<case>.txt`; with `bless`, rewrite the files
/// first. Also checks label round trips and that no variant alters the payoffs.
pub fn cmd_validate_prompts(templates: &Templates, dir: &Path, bless: bool) -> Result<PromptValidation, ReportError> {
    let cases = golden_corpus(templates)?;
    let mut report = PromptValidation::default();
    if bless {
        if dir.exists() {
            for e in fs::read_dir(dir).map_err(io_at(dir))? {
                let p = e.map_err(io_at(dir))?.path();
                if p.extension().is_some_and(|x| x == "txt") {
                    fs::remove_file(&p).map_err(io_at(&p))?;
                }
            }
        }
        for c in &cases {
            write_file(&dir.join(format!("{}.txt", c.name)), c.text.as_bytes())?;
        }
        report.blessed = cases.len();
    }
    for c in &cases {
        let path = dir.join(format!("{}.txt", c.name));
        match fs::read_to_string(&path) {
            Ok(expected) => {
                report.checked += 1;
                if expected != c.text {
                    let (line, expected, actual) = first_difference(&expected, &c.text);
                    report.mismatches.push(Mismatch { name: c.name.clone(), line, expected, actual });
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => report.missing.push(c.name.clone()),
            Err(e) => return Err(ReportError::Io { path, source: e }),
        }
    }
    if dir.exists() {
        let names: std::collections::HashSet<&str> = cases.iter().map(|c| c.name.as_str()).collect();
        let mut stale = Vec::new();
        for e in fs::read_dir(dir).map_err(io_at(dir))? {
            let p = e.map_err(io_at(dir))?.path();
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            if p.extension().is_some_and(|x| x == "txt") && !names.contains(stem.as_str()) {
                stale.push(stem);
            }
        }
        stale.sort();
        report.stale = stale;
    }

    for v in variant_space() {
        for action in 0..2 {
            report.round_trips += 1;
            if parse_choice(v.label(action), &v).ok() != Some(action) {
                report.round_trip_failures.push(format!("{v} action {action}"));
            }
        }
    }
    report.payoff_changes = payoff_changes(templates)?;
    Ok(report)
}

/// Variants whose prompt, read back, shows payoffs different from the game's.
pub fn payoff_changes(templates: &Templates) -> Result<Vec<String>, ReportError> {
    let reader = templates.reader()?;
    let mut changed = Vec::new();
    for (name, game) in [("pd", PayoffGame::prisoners_dilemma()), ("bos", PayoffGame::battle_of_the_sexes())] {
        for v in variant_space() {
            let rules = templates.render_rules(&game, Frame::Player(Seat::P1), &v, 10);
            let prompt = templates.render_round_prompt(
                &rules,
                Frame::Player(Seat::P1),
                &Default::default(),
                &Intervention::None,
                Query::Act,
                &v,
            )?;
            let read = reader.read(&prompt)?;
            if read.game.payoffs != game.payoffs {
                changed.push(format!("{name} {v}"));
            }
        }
    }
    Ok(changed)
}

/// Golden files shipped with the crate.
pub fn default_golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_dump() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("games.jsonl");
        let census = cmd_enumerate(&p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 144);
        assert_eq!(census.values().sum::<usize>(), 144);
        let first: EnumerationRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first.id, "ordinal:0");
        cmd_enumerate(&dir.path().join("again.jsonl")).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(dir.path().join("again.jsonl")).unwrap());
        assert!(census_table(&census).contains("total              144"));
    }

    #[test]
    fn classify_named_games() {
        let pd = cmd_classify("pd").unwrap();
        assert_eq!(pd.family, Some(GameFamily::PrisonersDilemma));
        assert_eq!(pd.equilibria.pure_nash.len(), 1);
        assert!(cmd_classify("chess").is_err());
    }

    #[test]
    fn play_scripted_match() {
        let dir = tempfile::tempdir().unwrap();
        let opts = PlayOptions::new("pd", "constant:0", "defect-then-cooperate", dir.path());
        let r = cmd_play(None, &opts).unwrap();
        assert_eq!(r.transcript.totals, [95, 5]);
        assert!(r.path.exists());
        let table = round_table(&r.transcript);
        assert!(table.contains("total"));
        assert!(table.contains("0.950 0.050"));
    }

    #[test]
    fn play_predict_then_act_with_mock() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::parse(
            "[cache]\nenabled = false\n[[providers]]\nkind = \"mock\"\nid = \"m\"\npolicy = \"constant:0\"\npredictor = \"alternator\"\n",
        )
        .unwrap();
        let mut opts = PlayOptions::new("bos", "llm:m", "alternator", dir.path());
        opts.mode = "predict-then-act".into();
        opts.offline = true;
        let r = cmd_play(Some(&cfg), &opts).unwrap();
        assert!(r.transcript.valid);
        assert!(r.transcript.rounds.iter().all(|x| x.predictions[0].is_some()));
        assert!(round_table(&r.transcript).contains("pred1"));
    }

    #[test]
    fn play_unknown_game_fails() {
        let opts = PlayOptions::new("nope", "alternator", "alternator", "unused");
        assert!(matches!(cmd_play(None, &opts), Err(ReportError::Grid(_))));
    }

    #[test]
    fn validate_detects_template_edit() {
        let dir = tempfile::tempdir().unwrap();
        let t = Templates::base();
        let blessed = cmd_validate_prompts(&t, dir.path(), true).unwrap();
        assert!(blessed.passed());
        assert_eq!(blessed.round_trips, 36);
        assert_eq!(blessed.checked, blessed.blessed);

        let one = dir.path().join("pd__fj-given-points__h0.txt");
        let text = fs::read_to_string(&one).unwrap();
        fs::write(&one, text.replacen("you win", "you gain", 1)).unwrap();
        let r = cmd_validate_prompts(&t, dir.path(), false).unwrap();
        assert!(!r.passed());
        assert_eq!(r.mismatches.len(), 1);
        assert!(r.mismatches[0].expected.contains("you gain"));
        fs::write(dir.path().join("orphan.txt"), "x").unwrap();
        fs::remove_file(&one).unwrap();
        let r = cmd_validate_prompts(&t, dir.path(), false).unwrap();
        assert_eq!(r.missing, vec!["pd__fj-given-points__h0".to_string()]);
        assert_eq!(r.stale, vec!["orphan".to_string()]);
    }

    #[test]
    fn chart_specs_have_inline_data() {
        let rows = vec![
            MetricsRow {
                agent: Some("a".into()),
                family: Some("biased".into()),
                n: 2,
                mean_score: 0.5,
                ..Default::default()
            },
            MetricsRow {
                agent: Some("b".into()),
                family: Some("biased".into()),
                n: 2,
                mean_score: 0.7,
                ..Default::default()
            },
        ];
        let bar = family_bar_chart(&rows);
        assert_eq!(bar["data"]["values"].as_array().unwrap().len(), 2);
        let hm = heatmap(&rows, "defection_rate", "t");
        assert_eq!(hm["spec"]["encoding"]["color"]["field"], "defection_rate");
    }
}
