//! One line per acceptance criterion. Run with `cargo test --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use arena_core::agents::{AgentSpec, Round};
use arena_core::config::ExperimentConfig;
use arena_core::engine::{match_metrics, play_match, MatchConfig, MatchContext, MatchMetrics, RoundRecord, Transcript};
use arena_core::game::{enumerate_games, family_census, GameFamily, OrdinalGame, PayoffGame};
use arena_core::prompting::Templates;
use arena_core::report::{cmd_tournament, cmd_validate_prompts, default_golden_dir, TournamentOptions};
use arena_core::tournament::{aggregate, expand_grid, Focus, GridSpec, GroupKey};

const ENUMERATION_BUDGET: Duration = Duration::from_secs(1);
const OFFLINE_GRID_BUDGET: Duration = Duration::from_secs(60);
const STAT_REL_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

/// name, transcript, then hand values: p1 score, p1 defection rate, coordination, p1 lock round
type MetricCase = (&'static str, Transcript, f64, f64, f64, Option<u32>);
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn brute_force_canonical_set() -> BTreeSet<[[u8; 4]; 2]> {
    let perms: Vec<[u8; 4]> = (0..256u32)
        .map(|n| [0, 1, 2, 3].map(|i| ((n >> (2 * i)) & 3) as u8 + 1))
        .filter(|p| p.iter().collect::<BTreeSet<_>>().len() == 4)
        .collect();
    let relabel = |t: [[u8; 4]; 2], sr: bool, sc: bool| {
        let mut out = [[0u8; 4]; 2];
        for p in 0..2 {
            for r in 0..2 {
                for c in 0..2 {
                    out[p][(r ^ sr as usize) * 2 + (c ^ sc as usize)] = t[p][r * 2 + c];
                }
            }
        }
        out
    };
    let mut set = BTreeSet::new();
    for a in &perms {
        for b in &perms {
            let t = [*a, *b];
            let orbit = [(false, false), (true, false), (false, true), (true, true)].map(|(r, c)| relabel(t, r, c));
            set.insert(*orbit.iter().min().unwrap());
        }
    }
    set
}

fn enumeration() -> Outcome {
    let started = Instant::now();
    let games = enumerate_games();
    let took = started.elapsed();
    let ours: BTreeSet<[[u8; 4]; 2]> = games.iter().map(OrdinalGame::ranks).collect();
    let oracle = brute_force_canonical_set();
    check(
        games.len() == 144 && ours.len() == 144 && ours == oracle && took < ENUMERATION_BUDGET,
        format!(
            "{} games, {} distinct, oracle {} (equal: {}), {:?}",
            games.len(),
            ours.len(),
            oracle.len(),
            ours == oracle,
            took
        ),
    )
}

fn grid_bookkeeping() -> Outcome {
    let spec = GridSpec::new(["llm:a", "llm:b", "llm:c"]);
    let n = expand_grid(&spec).map_err(|e| e.to_string())?.len();
    let named: usize = family_census().iter().filter(|(f, _)| **f != GameFamily::Other).map(|(_, n)| n).sum();
    check(n == 1224 && named == 136, format!("{named} family games x 9 ordered pairs = {n} configs"))
}

fn census() -> Outcome {
    let c = family_census();
    let got: Vec<usize> = GameFamily::ALL[..6].iter().map(|f| c[f]).collect();
    check(
        got == [36, 7, 19, 18, 44, 12] && c.values().sum::<usize>() == 144,
        format!("{got:?} + other {} (target [36, 7, 19, 18, 44, 12])", c[&GameFamily::Other]),
    )
}

fn scripted(game: PayoffGame, a: AgentSpec, b: AgentSpec) -> Result<Transcript, String> {
    let t = Templates::base();
    let cfg = MatchConfig::new("g", game, a, b);
    play_match(&cfg, MatchContext { client: None, templates: &t }).map(|o| o.transcript).map_err(|e| e.to_string())
}

fn matchups() -> Outcome {
    let pd =
        || scripted(PayoffGame::prisoners_dilemma(), AgentSpec::Constant { action: 0 }, AgentSpec::DefectThenCooperate);
    let bos = || {
        scripted(
            PayoffGame::battle_of_the_sexes(),
            AgentSpec::Constant { action: 0 },
            AgentSpec::Constant { action: 0 },
        )
    };
    let (a, b) = (pd()?, bos()?);
    let same = serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&pd()?).unwrap()
        && serde_json::to_vec(&b).unwrap() == serde_json::to_vec(&bos()?).unwrap();
    let sa = a.metrics.as_ref().unwrap().normalized_score;
    let sb = b.metrics.as_ref().unwrap().normalized_score;
    check(
        a.totals == [95, 5] && sa == [0.95, 0.05] && b.totals == [100, 70] && sb == [1.0, 0.7] && same,
        format!("PD {:?} -> {sa:?}; BoS {:?} -> {sb:?}; reruns identical: {same}", a.totals, b.totals),
    )
}

fn synthetic(game: PayoffGame, moves: &[(usize, usize)], preds: &[Option<usize>]) -> Transcript {
    let mut cfg = MatchConfig::new("s", game.clone(), AgentSpec::Alternator, AgentSpec::Alternator);
    cfg.rounds = moves.len() as u32;
    let rounds: Vec<RoundRecord> = moves
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let r = Round::played(&game, a, b);
            RoundRecord {
                round: i as u32 + 1,
                actions: r.actions,
                payoffs: r.payoffs,
                predictions: [preds.get(i).copied().flatten(), None],
                completions: vec![],
            }
        })
        .collect();
    let totals = [0, 1].map(|s| rounds.iter().map(|r| u64::from(r.payoffs[s])).sum());
    Transcript { config_hash: String::new(), config: cfg, rounds, totals, valid: true, error: None, metrics: None }
}

/// Opponent alternates J, F, J, ...; seat 1's predictions are wrong before `lock`.
fn locking(lock: usize) -> Transcript {
    let moves: Vec<(usize, usize)> = (1..=10).map(|r| (0, r % 2)).collect();
    let preds: Vec<Option<usize>> =
        moves.iter().enumerate().map(|(i, &(_, b))| Some(if i + 1 < lock { 1 - b } else { b })).collect();
    synthetic(PayoffGame::battle_of_the_sexes(), &moves, &preds)
}

fn metric_correctness() -> Outcome {
    let pd = PayoffGame::prisoners_dilemma;
    let bos = PayoffGame::battle_of_the_sexes;
    let alt: Vec<(usize, usize)> = (0..10).map(|i| (i % 2, i % 2)).collect();
    let mut grim = vec![(1, 1); 3];
    grim.extend([(0, 1); 7]);
    let cases: Vec<MetricCase> = vec![
        ("pd all defect", synthetic(pd(), &[(0, 0); 10], &[]), 0.5, 1.0, 1.0, None),
        ("pd all cooperate", synthetic(pd(), &[(1, 1); 10], &[]), 0.8, 0.0, 1.0, None),
        ("pd defect vs cooperate", synthetic(pd(), &[(0, 1); 10], &[]), 1.0, 1.0, 0.0, None),
        ("pd turns on round 4", synthetic(pd(), &grim, &[]), 0.94, 0.7, 0.3, None),
        ("bos all F", synthetic(bos(), &[(0, 0); 10], &[]), 1.0, 1.0, 1.0, None),
        ("bos all J", synthetic(bos(), &[(1, 1); 10], &[]), 0.7, 0.0, 1.0, None),
        ("bos alternating together", synthetic(bos(), &alt, &[]), 0.85, 0.5, 1.0, None),
        ("bos never meet", synthetic(bos(), &[(1, 0); 10], &[]), 0.0, 0.0, 0.0, None),
        ("bos 4 rounds", synthetic(bos(), &[(0, 0), (0, 1), (1, 1), (1, 0)], &[]), 0.425, 0.5, 0.5, None),
        ("lock from round 5", locking(5), 0.5, 1.0, 0.5, Some(5)),
        ("lock from round 3", locking(3), 0.5, 1.0, 0.5, Some(3)),
        ("lock from round 6", locking(6), 0.5, 1.0, 0.5, Some(6)),
        ("never locked", synthetic(bos(), &[(0, 0); 10], &[Some(1); 10]), 1.0, 1.0, 1.0, None),
    ];
    let mut bad = Vec::new();
    for (name, t, score, defect, coord, lock) in &cases {
        let m: MatchMetrics = match_metrics(t).map_err(|e| e.to_string())?;
        if m.normalized_score[0] != *score
            || m.defection_rate[0] != *defect
            || m.coordination_rate != *coord
            || m.prediction_lock_round[0] != *lock
        {
            bad.push(format!("{name}: {m:?}"));
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() { format!("{} transcripts match hand values", cases.len()) } else { bad.join("; ") },
    )
}

fn prompt_suite() -> Outcome {
    let r = cmd_validate_prompts(&Templates::base(), &default_golden_dir(), false).map_err(|e| e.to_string())?;
    check(
        r.passed() && r.round_trips == 36 && r.checked > 0,
        format!(
            "{} goldens ({} mismatched, {} missing), {} round trips ({} failed), payoff changes {:?}",
            r.checked,
            r.mismatches.len(),
            r.missing.len(),
            r.round_trips,
            r.round_trip_failures.len(),
            r.payoff_changes
        ),
    )
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn offline_end_to_end() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/mock_engines.toml");
    let cfg = ExperimentConfig::load(&path).map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    let mut details = Vec::new();
    let mut ok = true;
    for _ in 0..2 {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let started = Instant::now();
        let opts = TournamentOptions { out: Some(out.path().into()), offline: true, ..Default::default() };
        let r = cmd_tournament(&cfg, &opts).map_err(|e| e.to_string())?;
        let took = started.elapsed();
        ok &= r.configs == 1224
            && r.summary.transcripts.len() == 1224
            && r.summary.invalid == 0
            && r.summary.all_valid()
            && r.network_calls == 0
            && took < OFFLINE_GRID_BUDGET;
        details.push(format!(
            "{} matches, {} invalid, {} network calls, {:.1?}",
            r.configs, r.summary.invalid, r.network_calls, took
        ));
        trees.push(read_tree(&r.run_dir));
    }
    let identical = trees[0] == trees[1];
    check(ok && identical, format!("{}; {} files, identical: {identical}", details.join("; "), trees[0].len()))
}

fn scored(score: f64) -> Transcript {
    let mut t = synthetic(PayoffGame::prisoners_dilemma(), &[(0, 0)], &[]);
    let mut m = match_metrics(&t).unwrap();
    m.normalized_score[0] = score;
    t.metrics = Some(m);
    t
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= STAT_REL_TOL * b.abs().max(f64::MIN_POSITIVE)
}

fn statistics() -> Outcome {
    // (scores, mean, sample sd), hand computed
    let groups: [(&[f64], f64, f64); 3] =
        [(&[0.4, 0.6], 0.5, 0.141_421_356_237_309_5), (&[0.2, 0.5, 0.8], 0.5, 0.3), (&[0.3, 0.3, 0.3, 0.3], 0.3, 0.0)];
    let mut details = Vec::new();
    let mut ok = true;
    for (scores, mean, sd) in groups {
        let ts: Vec<Transcript> = scores.iter().map(|&s| scored(s)).collect();
        let rows = aggregate(&ts, &[GroupKey::Agent], Focus::Seat(arena_core::game::Seat::P1));
        let r = &rows[0];
        let hw = 1.96 * sd / (scores.len() as f64).sqrt();
        let good = rows.len() == 1
            && r.n == scores.len()
            && rel_close(r.mean_score, mean)
            && (rel_close(r.ci_half_width, hw) || (hw == 0.0 && r.ci_half_width == 0.0));
        ok &= good;
        details.push(format!("{scores:?} -> {:.6} +/- {:.6}", r.mean_score, r.ci_half_width));
    }
    let single = aggregate(&[scored(0.9)], &[GroupKey::Agent], Focus::Seat(arena_core::game::Seat::P1));
    ok &= single[0].ci_half_width == 0.0 && single[0].low_n;
    check(ok, details.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("enumeration: 144 canonical games equal to the brute-force orbit set, under 1 s", enumeration),
        ("grid bookkeeping: 9 ordered pairs x 136 family games = 1224 configs", grid_bookkeeping),
        ("census calibration: 36/7/19/18/44/12", census),
        ("deterministic matchups: PD (95,5)/(0.95,0.05), BoS (100,70)/(1.0,0.7)", matchups),
        ("metric correctness on synthetic transcripts", metric_correctness),
        ("prompt suite: goldens, 36 parse round trips, payoffs unchanged by variants", prompt_suite),
        (
            "offline end-to-end: 1224 mock matches, no network, none invalid, < 60 s, byte-identical reruns",
            offline_end_to_end,
        ),
        ("statistics: means and 1.96 SE half-widths to 1e-9 relative", statistics),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS [{}] {name} :: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name} :: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
