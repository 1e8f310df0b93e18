//! Acceptance checks, one line per criterion. Runs without network access;
//! criterion 11 only runs when EMOMAS_LIVE_ENDPOINT and EMOMAS_LIVE_MODEL are set.

use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emomas::coherence::{aggregate as score, apply_diversity, AssessmentMatrix, CoherenceConfig};
use emomas::context::{determine_phase, NegotiationContext, Phase, Status};
use emomas::emotion::{Emotion, EmotionDistribution};
use emomas::experiment::{run_experiment, ExperimentConfig, ScenarioSource};
use emomas::game_theory::{payoff_lookup, wsls_select, WslsState};
use emomas::llm::BackendConfig;
use emomas::metrics::{aggregate, behavior_metrics, outcome_metric, BehaviorJudge, MarkerBehaviorJudge, OutcomeRecord, TurnView};
use emomas::negotiation::PolicyKind;
use emomas::orchestrator::{agent_accuracy, fuse, AgentId, AgentRecommendation, ReliabilityConfig, ReliabilityWeights};
use emomas::rl::{QParams, QTable, RlState};
use emomas::scenarios::{generate_synthetic, Domain, OpponentStrategy};
use Emotion::*;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// (client, agent) payoffs with the client emotion on rows, copied from the
/// published table.
const PUBLISHED: [[(u8, u8); 7]; 7] = [
    [(4, 4), (2, 3), (1, 2), (2, 1), (3, 3), (2, 2), (3, 3)],
    [(3, 2), (3, 3), (1, 2), (2, 1), (2, 2), (1, 1), (2, 3)],
    [(2, 1), (2, 1), (1, 1), (1, 0), (1, 2), (0, 1), (1, 2)],
    [(1, 2), (1, 2), (0, 1), (2, 2), (1, 2), (0, 1), (2, 3)],
    [(3, 3), (2, 2), (2, 1), (2, 1), (4, 4), (1, 2), (3, 3)],
    [(2, 2), (1, 1), (1, 0), (1, 0), (2, 1), (2, 2), (2, 2)],
    [(3, 3), (2, 3), (2, 1), (3, 2), (3, 3), (2, 2), (3, 3)],
];
const ORDER: [Emotion; 7] = [Joy, Sadness, Anger, Fear, Surprise, Disgust, Neutral];

fn c1_payoff() -> Check {
    let start = Instant::now();
    for (i, c) in ORDER.into_iter().enumerate() {
        for (j, a) in ORDER.into_iter().enumerate() {
            let got = payoff_lookup(c, a);
            let want = PUBLISHED[i][j];
            ensure(got == want, || format!("({c}, {a}) = {got:?}, want {want:?}"))?;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(1), || format!("took {t:?}"))?;
    Ok(format!("49 entries exact in {t:?}"))
}

/// Index of the row maximum, earliest emotion on ties.
fn brute_argmax(row: &[u8; 7]) -> usize {
    let mut best = 0;
    for k in 1..7 {
        if row[k] > row[best] {
            best = k;
        }
    }
    best
}

/// Second entry of the row sorted by descending payoff, ties in canonical order.
fn brute_second(row: &[u8; 7]) -> usize {
    let mut idx: Vec<usize> = (0..7).collect();
    idx.sort_by(|a, b| row[*b].cmp(&row[*a]).then(a.cmp(b)));
    idx[1]
}

fn agent_row(client: usize) -> [u8; 7] {
    PUBLISHED[client].map(|(_, a)| a)
}

fn c2_wsls() -> Check {
    for (i, c) in ORDER.into_iter().enumerate() {
        let mut s = WslsState::default();
        let pick = wsls_select(c, &mut s).pick;
        let want = ORDER[brute_argmax(&agent_row(i))];
        ensure(pick == want, || format!("client {c}: picked {pick}, brute force {want}"))?;
    }
    let mut shifts = 0;
    for (pi, pc) in ORDER.into_iter().enumerate() {
        for (pj, pa) in ORDER.into_iter().enumerate() {
            let lost = f64::from(PUBLISHED[pi][pj].1) < 2.0;
            for (i, c) in ORDER.into_iter().enumerate() {
                let mut s = WslsState {
                    last_client_emotion: Some(pc),
                    last_agent_emotion: Some(pa),
                    ..WslsState::default()
                };
                let pick = wsls_select(c, &mut s).pick;
                let fresh = wsls_select(c, &mut WslsState::default()).pick;
                if lost {
                    let want = ORDER[brute_second(&agent_row(i))];
                    ensure(pick == want, || format!("after ({pc},{pa}) client {c}: {pick}, want shift to {want}"))?;
                    shifts += 1;
                } else {
                    ensure(pick == fresh, || format!("after ({pc},{pa}) client {c}: {pick}, want stay {fresh}"))?;
                }
            }
        }
    }
    Ok(format!("7 empty-history picks exact; {shifts} of 343 sweep cases shift"))
}

fn c3_bandit() -> Check {
    let params = QParams {
        discount: 0.0,
        ..QParams::default()
    };
    let mut q = QTable::new(params.clone(), 2024).map_err(|e| e.to_string())?;
    let states = [
        RlState::from_parts(Neutral, Neutral, 0, 1.0).unwrap(),
        RlState::from_parts(Anger, Fear, 20, 0.0).unwrap(),
    ];
    let best = [Surprise, Sadness];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for step in 0..500 {
        let s = step % 2;
        let a = q.select_with(states[s], &mut rng).pick;
        let r = if a == best[s] { 1.0 } else { 0.0 };
        q.update(states[s], a, r, states[s]).map_err(|e| e.to_string())?;
    }
    let masses: Vec<f64> = (0..2).map(|s| q.distribution(states[s]).prob(best[s])).collect();
    ensure(masses.iter().all(|m| *m > 0.95), || format!("optimal-action mass {masses:?}"))?;

    // one update by hand: Q + alpha * (r + gamma * max Q' - Q)
    let p = QParams::default();
    let mut t = QTable::new(p.clone(), 5).map_err(|e| e.to_string())?;
    let (s, s2) = (states[0], states[1]);
    let before = t.get(s, Fear);
    let max_next = ORDER.iter().map(|a| t.get(s2, *a)).fold(f64::NEG_INFINITY, f64::max);
    t.update(s, Fear, 0.7, s2).map_err(|e| e.to_string())?;
    let want = before + p.learning_rate * (0.7 + p.discount * max_next - before);
    let got = t.get(s, Fear);
    ensure((got - want).abs() < 1e-12, || format!("update gave {got}, hand value {want}"))?;
    Ok(format!("masses {:.4} / {:.4}; update within 1e-12", masses[0], masses[1]))
}

fn peaked(agent: AgentId, pick: Emotion, rng: &mut ChaCha8Rng) -> AgentRecommendation {
    let mut w = [0.0; 7];
    for x in &mut w {
        *x = rng.random_range(0.001..0.05);
    }
    w[pick.index()] = rng.random_range(0.5..1.0);
    AgentRecommendation::new(agent, EmotionDistribution::from_weights(w).unwrap(), pick)
}

fn random_rec(agent: AgentId, rng: &mut ChaCha8Rng) -> AgentRecommendation {
    let mut w = [0.0; 7];
    for x in &mut w {
        *x = rng.random_range(0.0..1.0f64).powi(3) + 1e-12;
    }
    let d = EmotionDistribution::from_weights(w).unwrap();
    let pick = d.sample(rng);
    AgentRecommendation::new(agent, d, pick)
}

fn c4_orchestrator() -> Check {
    let mut reached = Vec::new();
    for good in AgentId::ALL {
        let mut w = ReliabilityWeights::new(ReliabilityConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(4 + good.index() as u64);
        let mut first = None;
        for n in 1..=50 {
            let mut turns = Vec::new();
            for _ in 0..10 {
                let best = ORDER[rng.random_range(0..7)];
                let recs: Vec<_> = AgentId::ALL
                    .into_iter()
                    .map(|a| {
                        let hit = if a == good { 0.9 } else { 0.33 };
                        let pick = if rng.random::<f64>() < hit {
                            best
                        } else {
                            let others: Vec<_> = ORDER.into_iter().filter(|e| *e != best).collect();
                            others[rng.random_range(0..6)]
                        };
                        peaked(a, pick, &mut rng)
                    })
                    .collect();
                w.micro_update(&recs, best).map_err(|e| e.to_string())?;
                turns.push((recs, best));
            }
            w.macro_update(true, Some(0.1), agent_accuracy(&turns)).map_err(|e| e.to_string())?;
            if first.is_none() && w.weight(good) > 0.5 {
                first = Some(n);
            }
        }
        let n = first.ok_or_else(|| format!("{good} never exceeded 0.5: {:?}", w.weights()))?;
        reached.push(format!("{good}@{n}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    for seq in 0..10_000 {
        let mut w = ReliabilityWeights::new(ReliabilityConfig::default());
        for _ in 0..rng.random_range(1..20) {
            let recs: Vec<_> = AgentId::ALL.into_iter().map(|a| random_rec(a, &mut rng)).collect();
            if rng.random_bool(0.8) {
                let sel = ORDER[rng.random_range(0..7)];
                w.micro_update(&recs, sel).map_err(|e| e.to_string())?;
            } else {
                let acc = [rng.random(), rng.random(), rng.random()];
                let success = rng.random_bool(0.5);
                let outcome = success.then(|| rng.random_range(-1.0..1.0));
                w.macro_update(success, outcome, acc).map_err(|e| e.to_string())?;
            }
            let ws = w.weights();
            let sum: f64 = ws.iter().sum();
            ensure(ws.iter().all(|x| *x > 0.0 && x.is_finite()) && (sum - 1.0).abs() < 1e-9, || {
                format!("sequence {seq}: weights {ws:?}")
            })?;
        }
    }
    Ok(format!("aligned agent above 0.5 at negotiation {}; 10000 fuzzed sequences unit-sum", reached.join(", ")))
}

fn c5_union() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..10_000 {
        let recs: Vec<_> = AgentId::ALL.into_iter().map(|a| random_rec(a, &mut rng)).collect();
        let w = [rng.random_range(0.001..1.0), rng.random_range(0.001..1.0), rng.random_range(0.001..1.0)];
        let f = fuse(&recs, &w).map_err(|e| e.to_string())?;
        let union: Vec<Emotion> = ORDER
            .into_iter()
            .filter(|e| recs.iter().any(|r| r.recommended.contains(e)))
            .collect();
        ensure(union.contains(&f.selected), || format!("call {i}: {} outside {union:?}", f.selected))?;
    }
    Ok("10000 fused picks inside the union".into())
}

fn c6_metrics() -> Check {
    let cases = [
        (Domain::Debt, 30.0, 20.0, 10.0 / 30.0),
        (Domain::Medical, 60.0, 45.0, 15.0 / 60.0),
        (Domain::Emergency, 40.0, 50.0, 10.0 / 40.0),
        (Domain::Education, 30.0, 45.0, 15.0 / 30.0),
    ];
    for (d, t, a, want) in cases {
        let got = outcome_metric(d, t, a).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("{d} T={t} A={a}: {got}, want {want}"))?;
    }
    // rounds of 1, 2 and 3: mean 2, s = 1, t(0.975, 2) = 4.3027; lower bound clamped at 0
    let recs: Vec<OutcomeRecord> = (1..=3)
        .map(|r| OutcomeRecord::new(Domain::Debt, r.to_string(), Status::Failure, r, 10.0, None, vec![]).unwrap())
        .collect();
    let s = aggregate(&recs).map_err(|e| e.to_string())?;
    let (lo, hi) = (s.rounds.lower, s.rounds.upper);
    ensure(s.rounds.mean == 2.0 && lo.abs() < 1e-3 && (hi - 4.4841).abs() < 1e-3, || format!("CI [{lo}, {hi}]"))?;
    Ok(format!("four domain formulas exact; CI [{lo:.4}, {hi:.4}]"))
}

fn c7_determinism() -> Check {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut dirs = Vec::new();
    let mut slowest = Duration::ZERO;
    for run in ["a", "b"] {
        let start = Instant::now();
        let mut cfg = ExperimentConfig::scripted(Domain::Debt, PolicyKind::EmoMasBayes, root.path().join(run));
        cfg.opponent_strategy = OpponentStrategy::Vanilla;
        cfg.scenarios = ScenarioSource::Generate(20);
        cfg.seed = 7;
        run_experiment(&cfg).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        dirs.push(cfg.out);
    }
    let mut files: Vec<_> = fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    for f in &files {
        let a = fs::read(dirs[0].join(f)).unwrap();
        let b = fs::read(dirs[1].join(f)).map_err(|e| format!("{f:?} missing in second run: {e}"))?;
        ensure(a == b, || format!("{f:?} differs between runs"))?;
    }
    ensure(slowest < Duration::from_secs(10), || format!("a run took {slowest:?}"))?;
    Ok(format!("{} files byte-identical; slowest run {slowest:?}", files.len()))
}

fn c8_scenarios() -> Check {
    let set = generate_synthetic(Domain::Medical, 1000, 8).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 3];
    for s in &set.scenarios {
        match s.fields["Urgency_Level"].as_str() {
            Some("High") => counts[0] += 1,
            Some("Medium") => counts[1] += 1,
            Some("Low") => counts[2] += 1,
            other => return Err(format!("unexpected urgency {other:?}")),
        }
    }
    let shares = counts.map(|c| c as f64 / 1000.0);
    for (got, want) in shares.iter().zip([0.4, 0.4, 0.2]) {
        ensure((got - want).abs() <= 0.03, || format!("urgency shares {shares:?}"))?;
    }
    let debt = generate_synthetic(Domain::Debt, 1000, 8).map_err(|e| e.to_string())?;
    for s in &debt.scenarios {
        let v = s.fields["Original_Amount_USD"].as_f64().unwrap();
        ensure((20_688.0..=49_775.0).contains(&v), || format!("{}: amount {v}", s.case_id))?;
    }
    Ok(format!("urgency split {shares:?}; 1000 debt amounts in range"))
}

fn c9_coherence() -> Check {
    let cfg = CoherenceConfig::default();
    // joy repeated past the limit, fear absent, sadness at the limit
    let window = [Joy, Joy, Joy, Sadness, Sadness];
    let out = apply_diversity(&[0.5; 7], &window, &cfg);
    for (e, want) in [(Joy, 0.3), (Fear, 0.65), (Sadness, 0.5)] {
        ensure((out[e.index()] - want).abs() < 1e-12, || format!("diversity {e}: {}, want {want}", out[e.index()]))?;
    }
    let phases = [(0, Phase::Opening), (3, Phase::Opening), (4, Phase::Development), (7, Phase::Development), (8, Phase::Intensive), (12, Phase::Intensive), (13, Phase::Closing), (30, Phase::Closing)];
    for (r, want) in phases {
        ensure(determine_phase(r) == want, || format!("round {r}: {:?}", determine_phase(r)))?;
    }
    let mut p = [0.0; 7];
    p[Joy.index()] = 1.0;
    let zero = [0.0; 7];
    let m = AssessmentMatrix::from_columns(p, zero, zero, zero);
    for (round, want) in [(5, 0.4), (2, 0.5 / 1.1)] {
        let ctx = NegotiationContext::synthetic(Neutral, Neutral, round, 0.2);
        let s = score(&m, &cfg, &ctx)[Joy.index()];
        ensure((s - want).abs() < 1e-12, || format!("round {round}: score {s}, want {want}"))?;
    }
    let mut s = [0.0; 7];
    s[Joy.index()] = 1.0;
    let m = AssessmentMatrix::from_columns(zero, zero, s, zero);
    let ctx = NegotiationContext::synthetic(Neutral, Neutral, 20, 0.2);
    let got = score(&m, &cfg, &ctx)[Joy.index()];
    let want = 0.375 / 1.075;
    ensure((got - want).abs() < 1e-12, || format!("closing strategic score {got}, want {want}"))?;
    ensure(cfg.diversity_decay == 0.6 && cfg.diversity_bonus == 1.3 && cfg.history_window == 5, || "constants".into())?;
    Ok("decay, bonus, phase schedule and phase emphasis exact".into())
}

fn c10_behavior() -> Check {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::scripted(Domain::Emergency, PolicyKind::EmoMasBayes, root.path());
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let b = report.summary.behavior.ok_or("no behavior summary")?;
    ensure(b.tracking.rate_percent == 100.0 && b.tracking.count == b.turns, || format!("tracking {:?}", b.tracking))?;

    // Two scenarios of five turns; four manipulative turns in total.
    let msgs = [
        ["[EMO:joy] [OFFER:1] [TACTIC]", "[EMO:joy] [OFFER:1]", "[EMO:joy] [TACTIC]", "[EMO:joy]", "[EMO:fear] [OFFER:2]"],
        ["[EMO:joy]", "[TACTIC] [OFFER:3]", "[EMO:anger] [OFFER:1]", "[EMO:joy] [TACTIC]", "plain"],
    ];
    let judgments: Vec<Vec<_>> = msgs
        .iter()
        .map(|turns| {
            turns
                .iter()
                .map(|m| {
                    MarkerBehaviorJudge
                        .judge(&TurnView { round: 1, selected: Some(Joy), previous_offer: None, message: m })
                        .unwrap()
                })
                .collect()
        })
        .collect();
    let s = behavior_metrics(&[5, 5], &judgments).map_err(|e| e.to_string())?;
    ensure(s.manipulation.count == 4 && s.manipulation.per_scenario == 2.0 && s.manipulation.rate_percent == 40.0, || {
        format!("manipulation {:?}", s.manipulation)
    })?;
    ensure(s.tracking.count == 6 && s.tracking.rate_percent == 60.0, || format!("tracking {:?}", s.tracking))?;
    ensure(s.consistency.count == 4, || format!("consistency {:?}", s.consistency))?;
    Ok(format!("tracking 100% over {} scripted turns; X_m = 2.0, rate 40%", b.turns))
}

fn c11_live() -> Option<Check> {
    let endpoint = std::env::var("EMOMAS_LIVE_ENDPOINT").ok()?;
    let model = std::env::var("EMOMAS_LIVE_MODEL").ok()?;
    Some((|| {
        let root = tempfile::tempdir().map_err(|e| e.to_string())?;
        let backend = BackendConfig::remote(endpoint, model);
        let mut cfg = ExperimentConfig::scripted(Domain::Debt, PolicyKind::EmoMasBayes, root.path());
        cfg.negotiator_backend = backend.clone();
        cfg.opponent_backend = backend.clone();
        cfg.judge_backend = backend;
        cfg.scenarios = ScenarioSource::Generate(1);
        cfg.max_rounds = 6;
        cfg.evaluate_behavior = false;
        let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
        if let Some(e) = report.summary.aborted {
            return Err(e);
        }
        let text = fs::read_to_string(root.path().join("transcripts.jsonl")).map_err(|e| e.to_string())?;
        let back = emomas::negotiation::Transcript::from_jsonl(&text).map_err(|e| e.to_string())?;
        ensure(back.len() == 1 && !back[0].turns.is_empty(), || "empty transcript".into())?;
        Ok(format!("{} after {} rounds", back[0].summary.status, back[0].summary.rounds))
    })())
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Check);
    let checks: [Criterion; 10] = [
        ("payoff oracle", c1_payoff),
        ("WSLS oracle", c2_wsls),
        ("Q-learning convergence", c3_bandit),
        ("orchestrator convergence", c4_orchestrator),
        ("union restriction", c5_union),
        ("metric formulas", c6_metrics),
        ("determinism", c7_determinism),
        ("scenario generation", c8_scenarios),
        ("coherence pipeline", c9_coherence),
        ("behavioral metrics", c10_behavior),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    match c11_live() {
        None => println!("criterion 11 SKIP  live smoke test: set EMOMAS_LIVE_ENDPOINT and EMOMAS_LIVE_MODEL to run"),
        Some(Ok(detail)) => println!("criterion 11 PASS  live smoke test: {detail}"),
        Some(Err(why)) => {
            failed += 1;
            println!("criterion 11 FAIL  live smoke test: {why}");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
