//! Acceptance suite. Each criterion prints one PASS/FAIL line on standard
//! output and then asserts.

use std::collections::HashSet;
use std::io::Write;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use locklimit::automata::{action_count, complement_small_nba, ParityNta};
use locklimit::crosscheck::compare_trees;
use locklimit::game::{brute_force_solve, verify_with, zielonka_solve, Arena, Player, VerifyOptions};
use locklimit::limitaut::{build_limit_automaton, chain_tracker, ev_tracker, FiniteView, LimitConfig};
use locklimit::model::{parse_system, validate, Operation, ProcId, System};
use locklimit::nested::{check_nested, path_violates, witness_violates};
use locklimit::objectives::{conjunction, parse_word_automaton, template, Template};
use locklimit::oracle::{check_syntactic, hs_matches_held, search_colorings, semantic_coloring, syntactic_hs, HsMode};
use locklimit::pushdown::{
    build_al, build_limit_pta, fixpoint_w, pda_accepting_states, pta_times_parity, stackless_accepting_states,
    verify_pushdown, WordPda,
};
use locklimit::random::{random_batch, random_source, RandomParams};
use locklimit::semantics::{
    enumerate_delta_trees, enumerate_fair_finite_limits, enumerate_fair_finite_limits_with_budget, is_fair,
    same_config, ConfigTree,
};
use locklimit::model::{StackInstr, StackSym};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEADLOCK_TIME_LIMIT: Duration = Duration::from_secs(60);
const LIVENESS_TIME_LIMIT: Duration = Duration::from_secs(600);
const REQUIRED_AGREEMENT: f64 = 1.0;
const RANDOM_SYSTEMS: usize = 100;
const TREE_BOUNDS: [usize; 5] = [8, 12, 16, 20, 24];
const DELTA_CAP: usize = 2_000;
const ENUMERATION_BUDGET: usize = 50_000;
const ARENAS: usize = 500;
const LASSOS_PER_TRACKER: usize = 1_000;
const MAX_LASSO_PART: usize = 3;
const NESTED_BRUTE_FORCE_DEPTH: usize = 9;
const SCALING_BUDGET: usize = 60_000_000;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: usize, title: &str, pass: bool, detail: &str) -> bool {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{verdict} criterion {n:>2} {title}: {detail}").unwrap();
    pass
}

fn corpus(name: &str) -> System {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_system(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn read_objective(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../corpus/objectives/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn ratio(good: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        good as f64 / total as f64
    }
}

#[test]
fn criterion_01_philosophers_deadlock() {
    let _g = serial();
    let s = corpus("philosophers.dlss");
    let start = Instant::now();
    let obj = template(&s, &Template::GlobalDeadlock).unwrap();
    let v = verify_with(&s, &obj, &VerifyOptions::default()).unwrap();
    let replayed = v.schedule.as_ref().filter(|_| v.schedule_complete).and_then(|r| r.replay(&s).ok());
    let elapsed = start.elapsed();
    let fair_replay = replayed.as_ref().is_some_and(|t| is_fair(&s, t));

    let enum_start = Instant::now();
    let limits = enumerate_fair_finite_limits(&s, 40).unwrap();
    let enum_time = enum_start.elapsed();
    let same = replayed.as_ref().is_some_and(|t| limits.iter().any(|l| same_config(l, t)));
    let pass = v.satisfiable && v.exact && fair_replay && !limits.is_empty() && same && elapsed < DEADLOCK_TIME_LIMIT;
    report(
        1,
        "philosophers deadlock",
        pass,
        &format!(
            "verify sat={} exact={} in {:.1?}, replay fair={fair_replay}, {} fair finite limits <= 40 nodes in {:.1?}, replay among them={same}",
            v.satisfiable,
            v.exact,
            elapsed,
            limits.len(),
            enum_time
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_philosophers_liveness() {
    let _g = serial();
    let s = corpus("philosophers.dlss");
    let inf = parse_word_automaton(&read_objective("eat_inf.wa"), &s).unwrap();
    let fin = parse_word_automaton(&read_objective("eat_fin.wa"), &s).unwrap();
    let parts = [
        template(&s, &Template::FinitelyManySpawns).unwrap(),
        template(&s, &Template::SomeInstanceIn { process: "phil".into(), word: inf }).unwrap(),
        template(&s, &Template::SomeInstanceIn { process: "phil".into(), word: fin }).unwrap(),
    ];
    let obj = conjunction(&parts, action_count(&s)).unwrap();
    let start = Instant::now();
    let v = verify_with(&s, &obj, &VerifyOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let pass = !v.satisfiable && v.exact && elapsed < LIVENESS_TIME_LIMIT;
    report(
        2,
        "philosophers liveness",
        pass,
        &format!(
            "sat={} exact={} in {:.1?}, {} automaton states, {} positions",
            v.satisfiable, v.exact, elapsed, v.stats.automaton_states, v.stats.positions
        ),
    );
    assert!(pass);
}

/// A system of the finite-tree suite with its trees.
struct Entry {
    name: String,
    system: System,
    delta_bound: usize,
    delta: Vec<ConfigTree>,
    limit_bound: usize,
    fair: Vec<ConfigTree>,
}

fn entry(name: String, system: System) -> Option<Entry> {
    let mut e = Entry { name, system, delta_bound: 0, delta: Vec::new(), limit_bound: 0, fair: Vec::new() };
    let mut delta_open = true;
    for n in TREE_BOUNDS {
        let Ok(fair) = enumerate_fair_finite_limits_with_budget(&e.system, n, ENUMERATION_BUDGET) else { break };
        e.fair = fair;
        e.limit_bound = n;
        if delta_open {
            match enumerate_delta_trees(&e.system, n, DELTA_CAP) {
                Some(d) => {
                    e.delta = d;
                    e.delta_bound = n;
                }
                None => delta_open = false,
            }
        }
    }
    (e.limit_bound > 0).then_some(e)
}

fn suite() -> &'static [Entry] {
    static SUITE: OnceLock<Vec<Entry>> = OnceLock::new();
    SUITE.get_or_init(|| {
        let mut out = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut k = 0;
        while out.len() < RANDOM_SYSTEMS {
            for s in random_batch(&mut rng, &RandomParams::default(), RANDOM_SYSTEMS) {
                if out.len() < RANDOM_SYSTEMS {
                    out.extend(entry(format!("random#{k}"), s));
                    k += 1;
                }
            }
        }
        for name in
            ["philosophers.dlss", "philosophers_ring2.dlss", "deadlock_pair.dlss", "nop_loop.dlss", "stuck.dlss", "scaling/philosophers_4.dlss"]
        {
            out.extend(entry(name.into(), corpus(name)));
        }
        out
    })
}

#[test]
fn criterion_03_three_way_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let (mut trees, mut agreeing, mut fair, mut accepted) = (0, 0, 0, 0);
    let mut failures = Vec::new();
    let mut bounds = [0usize; 25];
    for e in suite() {
        let aut = build_limit_automaton(&e.system).unwrap();
        let view = FiniteView(&aut);
        let keys: HashSet<Vec<u32>> = e.fair.iter().map(ConfigTree::canonical_key).collect();
        let seen: HashSet<Vec<u32>> = e.delta.iter().map(ConfigTree::canonical_key).collect();
        let mut all = e.delta.clone();
        all.extend(e.fair.iter().filter(|t| !seen.contains(&t.canonical_key())).cloned());
        let a = compare_trees(&e.system, &view, &all, &keys);
        trees += a.trees;
        agreeing += a.agreeing();
        fair += e.fair.len();
        accepted += a.cells.iter().filter(|c| c.automaton).map(|c| c.count).sum::<usize>();
        bounds[e.limit_bound] += 1;
        if let Some(d) = a.disagreements.first() {
            failures.push(format!("{}:\n{}", e.name, d));
        }
    }
    let random = suite().iter().filter(|e| e.name.starts_with("random")).count();
    let share = ratio(agreeing, trees);
    let pass = share >= REQUIRED_AGREEMENT && random >= RANDOM_SYSTEMS;
    let reached: Vec<String> =
        TREE_BOUNDS.iter().map(|&b| format!("{b}:{}", bounds[b])).collect();
    report(
        3,
        "three-way finite-tree equivalence",
        pass,
        &format!(
            "{random} random + {} corpus systems, {trees} trees ({fair} fair limits, {accepted} accepted), agreement {:.2}%, systems per node bound [{}], {:.1?}",
            suite().len() - random,
            100.0 * share,
            reached.join(" "),
            start.elapsed()
        ),
    );
    for f in failures.iter().take(3) {
        eprintln!("{f}");
    }
    assert!(pass);
}

#[test]
fn criterion_04_unique_semantic_coloring() {
    let _g = serial();
    let (mut trees, mut good) = (0, 0);
    for e in suite() {
        for t in &e.fair {
            trees += 1;
            let sem = semantic_coloring(&e.system, t);
            let passes = check_syntactic(&e.system, t, &sem).all();
            let correct: Vec<_> = search_colorings(&e.system, t, 10_000)
                .into_iter()
                .filter(|c| check_syntactic(&e.system, t, c).all())
                .collect();
            let unique = correct.len() == 1 && correct[0] == sem;
            good += (passes && unique) as usize;
        }
    }
    let share = ratio(good, trees);
    let pass = share >= REQUIRED_AGREEMENT;
    report(
        4,
        "unique semantic coloring",
        pass,
        &format!("{good}/{trees} fair limits: semantic coloring syntactically correct and the only one"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_held_set_labeling() {
    let _g = serial();
    let (mut trees, mut amended, mut strict) = (0, 0, 0);
    let mut strict_cases = Vec::new();
    for e in suite() {
        for t in &e.fair {
            trees += 1;
            let sem = semantic_coloring(&e.system, t);
            amended += hs_matches_held(t, &syntactic_hs(&e.system, t, &sem, HsMode::Amended)) as usize;
            if hs_matches_held(t, &syntactic_hs(&e.system, t, &sem, HsMode::Strict)) {
                strict += 1;
            } else if strict_cases.len() < 3 {
                strict_cases.push(format!("{} ({} nodes)", e.name, t.len()));
            }
        }
    }
    let pass = ratio(amended, trees) >= REQUIRED_AGREEMENT;
    report(
        5,
        "held-set labeling",
        pass,
        &format!(
            "amended rule {amended}/{trees}; literal rule {strict}/{trees}, first disagreements: [{}]",
            strict_cases.join(", ")
        ),
    );
    assert!(pass);
}

fn random_arena(rng: &mut ChaCha8Rng) -> Arena {
    let n = rng.gen_range(1..=8);
    let mut a = Arena::default();
    for _ in 0..n {
        let owner = if rng.gen_bool(0.5) { Player::Automaton } else { Player::Pathfinder };
        a.add(owner, rng.gen_range(0..=4));
    }
    for v in 0..n {
        for _ in 0..rng.gen_range(1..=3) {
            let w = rng.gen_range(0..n);
            if !a.moves[v].contains(&w) {
                a.moves[v].push(w);
            }
        }
    }
    a
}

#[test]
fn criterion_06_parity_solver() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut good = 0;
    for _ in 0..ARENAS {
        let a = random_arena(&mut rng);
        good += (zielonka_solve(&a).winner == brute_force_solve(&a)) as usize;
    }
    let pass = ratio(good, ARENAS) >= REQUIRED_AGREEMENT;
    report(6, "parity solver", pass, &format!("Zielonka equals brute force on {good}/{ARENAS} arenas"));
    assert!(pass);
}

#[test]
fn criterion_07_nba_complementation() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parts = Vec::new();
    let mut pass = true;
    // the exhaustive complement search on chain/3 (7 states) is out of reach,
    // so only the canonical run used by the limit automaton is checked there
    for (name, nba, exhaustive) in [
        ("ev/1", ev_tracker(1), true),
        ("ev/2", ev_tracker(2), true),
        ("ev/3", ev_tracker(3), true),
        ("chain/1", chain_tracker(1), true),
        ("chain/2", chain_tracker(2), true),
        ("chain/3", chain_tracker(3), false),
    ] {
        let c = complement_small_nba(&nba).unwrap();
        let (mut exact, mut sound) = (0, 0);
        for _ in 0..LASSOS_PER_TRACKER {
            let word = |rng: &mut ChaCha8Rng, lo: usize| -> Vec<usize> {
                (0..rng.gen_range(lo..=MAX_LASSO_PART)).map(|_| rng.gen_range(0..nba.letters)).collect()
            };
            let prefix = word(&mut rng, 0);
            let cycle = word(&mut rng, 1);
            let orig = nba.accepts_lasso(&prefix, &cycle);
            if exhaustive {
                exact += (orig != c.accepts_lasso(&prefix, &cycle)) as usize;
            }
            sound += !(orig && c.canonical_accepts_lasso(&prefix, &cycle)) as usize;
        }
        pass &= sound == LASSOS_PER_TRACKER && (!exhaustive || exact == LASSOS_PER_TRACKER);
        parts.push(if exhaustive {
            format!("{name} exactly one {exact}/{LASSOS_PER_TRACKER}")
        } else {
            format!("{name} canonical run sound {sound}/{LASSOS_PER_TRACKER}")
        });
    }
    report(7, "NBA complementation", pass, &parts.join(", "));
    assert!(pass);
}

fn random_stackless(rng: &mut ChaCha8Rng) -> WordPda {
    let n = rng.gen_range(1..=8);
    let mut pda = WordPda::new(n, 1);
    for q in 0..n {
        pda.priority[q] = rng.gen_range(1..=4);
        for _ in 0..rng.gen_range(0..=2) {
            pda.add(q, StackSym::BOTTOM, rng.gen_range(0..n), StackInstr::Skip);
        }
        pda.leaf[q][0] = rng.gen_bool(0.1);
    }
    pda
}

#[test]
fn criterion_08_pushdown_cross_check() {
    let _g = serial();
    let instances: Vec<(&str, Vec<Template>)> = vec![
        ("philosophers.dlss", vec![Template::GlobalDeadlock]),
        (
            "philosophers_ring2.dlss",
            vec![
                Template::GlobalDeadlock,
                Template::FinitelyManySpawns,
                Template::InstanceRunsForever { process: "phil".into() },
            ],
        ),
        (
            "deadlock_pair.dlss",
            vec![Template::GlobalDeadlock, Template::InstanceRunsForever { process: "right".into() }],
        ),
        (
            "nop_loop.dlss",
            vec![
                Template::GlobalDeadlock,
                Template::InstanceRunsForever { process: "holder".into() },
                Template::SomeInstanceBlocked { process: "holder".into(), regex: "holder.take".into() },
            ],
        ),
        ("stuck.dlss", vec![Template::GlobalDeadlock, Template::InstanceRunsForever { process: "p_init".into() }]),
        ("scaling/philosophers_4.dlss", vec![Template::GlobalDeadlock]),
    ];
    let (mut total, mut agree) = (0, 0);
    let mut rows = Vec::new();
    let (mut pda_total, mut pda_agree) = (0, 0);
    for (file, templates) in &instances {
        let s = corpus(file);
        for t in templates {
            let obj = template(&s, t).unwrap();
            let game = verify_with(&s, &obj, &VerifyOptions::default()).unwrap();
            let pd = verify_pushdown(&s, &obj, &VerifyOptions::default()).unwrap();
            total += 1;
            agree += (game.satisfiable == pd.satisfiable) as usize;
            rows.push(format!("{file} {t:?}: {}", if game.satisfiable { "sat" } else { "unsat" }));
            if s.actions.len() <= 12 {
                let (a, b) = pda_agreement(&s, &obj);
                pda_total += a;
                pda_agree += b;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let pda = random_stackless(&mut rng);
        pda_total += 1;
        pda_agree += (pda_accepting_states(&pda) == stackless_accepting_states(&pda)) as usize;
    }
    for r in &rows {
        eprintln!("{r}");
    }
    let pass = ratio(agree, total) >= REQUIRED_AGREEMENT && ratio(pda_agree, pda_total) >= REQUIRED_AGREEMENT;
    report(
        8,
        "pushdown cross-check",
        pass,
        &format!("verdicts agree on {agree}/{total} corpus instances, saturation equals SCC oracle on {pda_agree}/{pda_total} PDAs"),
    );
    assert!(pass);
}

/// Compares saturation with the SCC oracle on the left-path PDAs of an
/// instance, for the all-true sets and for the fixpoint's result.
fn pda_agreement(s: &System, obj: &ParityNta) -> (usize, usize) {
    let config = LimitConfig { chains: false, ..LimitConfig::FULL };
    let (pta, _) = build_limit_pta(s, config, 1_000_000).unwrap();
    let pta = pta_times_parity(&pta, obj, 1_000_000).unwrap();
    let d = pta.max_priority().max(1) as usize;
    let w = fixpoint_w(&pta);
    let mut good = 0;
    for sets in [vec![vec![true; pta.len()]; d + 1], vec![w; d + 1]] {
        let pda = build_al(&pta, &sets);
        good += (pda_accepting_states(&pda) == stackless_accepting_states(&pda)) as usize;
    }
    (2, good)
}

/// Whether some path of at most `depth` transitions of `p` breaks the stack discipline.
fn brute_force_violation(s: &System, p: ProcId, depth: usize) -> bool {
    fn go(s: &System, p: ProcId, state: locklimit::model::StateId, ops: &mut Vec<Operation>, depth: usize) -> bool {
        if path_violates(ops) {
            return true;
        }
        if ops.len() == depth {
            return false;
        }
        for t in s.process(p).outgoing(state) {
            ops.push(s.op(t.action).clone());
            let hit = go(s, p, t.to, ops, depth);
            ops.pop();
            if hit {
                return true;
            }
        }
        false
    }
    go(s, p, s.process(p).init, &mut Vec::new(), depth)
}

#[test]
fn criterion_09_nestedness() {
    let _g = serial();
    let phil = check_nested(&corpus("philosophers.dlss")).is_nested();
    let crossed = corpus("crossed_locks.dlss");
    let v = check_nested(&crossed);
    let witness_ok = v
        .first_violation()
        .and_then(|p| p.witness.as_ref().map(|w| witness_violates(&crossed, p.process, w)))
        .unwrap_or(false);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = RandomParams { max_procs: 2, max_arity: 2, max_states: 3, max_transitions: 4 };
    let (mut systems, mut agree, mut non_nested) = (0, 0, 0);
    while systems < 300 {
        let Ok(s) = parse_system(&random_source(&mut rng, &params)) else { continue };
        if !validate(&s).is_empty() || s.processes.iter().map(|p| p.states.len()).sum::<usize>() > 6 {
            continue;
        }
        systems += 1;
        let verdict = check_nested(&s);
        let brute = s.proc_ids().all(|p| !brute_force_violation(&s, p, NESTED_BRUTE_FORCE_DEPTH));
        agree += (verdict.is_nested() == brute) as usize;
        non_nested += !brute as usize;
    }
    let pass = phil && !v.is_nested() && witness_ok && agree == systems;
    report(
        9,
        "nestedness",
        pass,
        &format!(
            "philosophers nested={phil}, crossed locks flagged={} with replayable witness={witness_ok}, brute force agrees on {agree}/{systems} systems ({non_nested} non-nested)",
            !v.is_nested()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_scaling() {
    let _g = serial();
    let mut points = Vec::new();
    let mut pass = true;
    for n in [4usize, 8, 16] {
        let s = corpus(&format!("scaling/philosophers_{n}.dlss"));
        let obj = template(&s, &Template::GlobalDeadlock).unwrap();
        let start = Instant::now();
        let opts = VerifyOptions { budget: SCALING_BUDGET, ..VerifyOptions::default() };
        match verify_with(&s, &obj, &opts) {
            Ok(v) => {
                pass &= v.satisfiable;
                points.push((n, start.elapsed(), v.stats.automaton_states, v.stats.positions));
            }
            Err(e) => {
                pass = false;
                eprintln!("{n} processes: {e}");
            }
        }
    }
    let slopes: Vec<String> = points
        .windows(2)
        .map(|w| {
            let k = (w[1].0 as f64 / w[0].0 as f64).ln();
            format!(
                "{}->{}: time^{:.2} states^{:.2}",
                w[0].0,
                w[1].0,
                (w[1].1.as_secs_f64() / w[0].1.as_secs_f64().max(1e-3)).ln() / k,
                (w[1].2 as f64 / w[0].2 as f64).ln() / k
            )
        })
        .collect();
    let table: Vec<String> =
        points.iter().map(|(n, t, s, p)| format!("{n} procs {t:.1?} {s} states {p} positions")).collect();
    report(
        10,
        "scaling",
        pass,
        &format!("{}; log-log exponents {}", table.join(", "), slopes.join(", ")),
    );
    assert!(pass);
}
