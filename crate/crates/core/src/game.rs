//! Emptiness of parity tree automata as a two-player parity game.
//!
//! Automaton picks a letter and a transition at each state, Pathfinder picks
//! the child to follow. Automaton wins a play reaching ⊤ or one whose largest
//! priority seen infinitely often is even.

use std::collections::{HashMap, HashSet, VecDeque};
use std::hash::Hash;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::automata::{BuchiTimesParity, ParityNta, Succ, TreeAutomaton, TreeLetter};
use crate::limitaut::{build_limit_automaton_with, LimitConfig, LimitError};
use crate::model::{ActionId, System};
use crate::semantics::{initial_config, step_mut, Addr, ConfigTree, Event, Run};

pub const DEFAULT_BUDGET: usize = 5_000_000;

/// Position budget, overridable through `LOCKLIMIT_BUDGET`.
pub fn default_budget() -> usize {
    std::env::var("LOCKLIMIT_BUDGET").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("process {0} does not lock in stack order")]
    NotNested(String),
    #[error("more than {0} game positions")]
    BudgetExceeded(usize),
    #[error("the system has pushdown processes")]
    Pushdown,
    #[error("objective has {0} actions but the system has {1}")]
    AlphabetMismatch(usize, usize),
    #[error(transparent)]
    Limit(LimitError),
}

impl From<LimitError> for GameError {
    fn from(e: LimitError) -> Self {
        match e {
            LimitError::NotNested(p) => GameError::NotNested(p),
            e => GameError::Limit(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Player {
    Automaton,
    Pathfinder,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Automaton => Player::Pathfinder,
            Player::Pathfinder => Player::Automaton,
        }
    }

    /// The player favoured by a priority.
    pub fn of_priority(p: u8) -> Player {
        if p.is_multiple_of(2) {
            Player::Automaton
        } else {
            Player::Pathfinder
        }
    }
}

/// Finite game graph. Every position has at least one move.
#[derive(Clone, Debug, Default)]
pub struct Arena {
    pub owner: Vec<Player>,
    pub priority: Vec<u8>,
    pub moves: Vec<Vec<usize>>,
}

impl Arena {
    pub fn add(&mut self, owner: Player, priority: u8) -> usize {
        self.owner.push(owner);
        self.priority.push(priority);
        self.moves.push(Vec::new());
        self.owner.len() - 1
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.len()];
        for (v, ms) in self.moves.iter().enumerate() {
            for &w in ms {
                pred[w].push(v);
            }
        }
        pred
    }
}

/// Winner of every position and a positional strategy for the winner.
#[derive(Clone, Debug)]
pub struct Solution {
    pub winner: Vec<Player>,
    pub strategy: Vec<Option<usize>>,
}

struct Zielonka<'a> {
    arena: &'a Arena,
    pred: Vec<Vec<usize>>,
    alive: Vec<bool>,
    mark: Vec<u32>,
    count: Vec<u32>,
    stamp: u32,
    winner: Vec<Player>,
    strategy: Vec<Option<usize>>,
}

impl Zielonka<'_> {
    /// Attractor of `target` for `player` inside the live subgame.
    fn attractor(&mut self, player: Player, target: &[usize]) -> Vec<usize> {
        self.stamp += 1;
        let s = self.stamp;
        let mut out = Vec::with_capacity(target.len());
        let mut queue = VecDeque::new();
        for &v in target {
            if self.mark[v] != s {
                self.mark[v] = s;
                self.count[v] = u32::MAX;
                out.push(v);
                queue.push_back(v);
            }
        }
        while let Some(v) = queue.pop_front() {
            for i in 0..self.pred[v].len() {
                let u = self.pred[v][i];
                if !self.alive[u] || (self.mark[u] == s && self.count[u] == u32::MAX) {
                    continue;
                }
                let take = if self.arena.owner[u] == player {
                    self.strategy[u] = Some(v);
                    true
                } else {
                    if self.mark[u] != s {
                        self.mark[u] = s;
                        self.count[u] = self.arena.moves[u].iter().filter(|&&w| self.alive[w]).count() as u32;
                    }
                    self.count[u] -= 1;
                    self.count[u] == 0
                };
                if take {
                    self.mark[u] = s;
                    self.count[u] = u32::MAX;
                    out.push(u);
                    queue.push_back(u);
                }
            }
        }
        out
    }

    /// Solves the subgame on `nodes`, all alive. Leaves liveness unchanged.
    fn solve(&mut self, nodes: Vec<usize>) {
        let mut nodes = nodes;
        let mut removed: Vec<usize> = Vec::new();
        while !nodes.is_empty() {
            let d = nodes.iter().map(|&v| self.arena.priority[v]).max().unwrap();
            let me = Player::of_priority(d);
            let top: Vec<usize> = nodes.iter().copied().filter(|&v| self.arena.priority[v] == d).collect();
            let attr = self.attractor(me, &top);
            for &v in &attr {
                self.alive[v] = false;
            }
            let rest: Vec<usize> = nodes.iter().copied().filter(|&v| self.alive[v]).collect();
            self.solve(rest.clone());
            for &v in &attr {
                self.alive[v] = true;
            }
            let lost: Vec<usize> = rest.iter().copied().filter(|&v| self.winner[v] != me).collect();
            if lost.is_empty() {
                for &v in &top {
                    if self.arena.owner[v] == me {
                        self.strategy[v] = self.arena.moves[v].iter().copied().find(|&w| self.alive[w]);
                    }
                }
                for &v in &nodes {
                    self.winner[v] = me;
                }
                break;
            }
            let opp = me.opponent();
            let b = self.attractor(opp, &lost);
            for &v in &b {
                self.winner[v] = opp;
                self.alive[v] = false;
            }
            removed.extend(b);
            nodes.retain(|&v| self.alive[v]);
        }
        for v in removed {
            self.alive[v] = true;
        }
    }
}

/// Recursive Zielonka algorithm for max-parity games.
pub fn zielonka_solve(arena: &Arena) -> Solution {
    let n = arena.len();
    let mut z = Zielonka {
        arena,
        pred: arena.predecessors(),
        alive: vec![true; n],
        mark: vec![0; n],
        count: vec![0; n],
        stamp: 0,
        winner: vec![Player::Automaton; n],
        strategy: vec![None; n],
    };
    z.solve((0..n).collect());
    let mut strategy = z.strategy;
    for (v, s) in strategy.iter_mut().enumerate() {
        if arena.owner[v] != z.winner[v] {
            *s = None;
        }
    }
    Solution { winner: z.winner, strategy }
}

/// Winner of the play where every position follows `choice`.
fn play_winner(arena: &Arena, choice: &[usize], start: usize) -> Player {
    let mut seen = vec![usize::MAX; arena.len()];
    let mut path = Vec::new();
    let mut v = start;
    while seen[v] == usize::MAX {
        seen[v] = path.len();
        path.push(v);
        v = arena.moves[v][choice[v]];
    }
    let top = path[seen[v]..].iter().map(|&w| arena.priority[w]).max().unwrap();
    Player::of_priority(top)
}

/// Winners by enumerating all positional strategy pairs. Exponential: for
/// small arenas only.
pub fn brute_force_solve(arena: &Arena) -> Vec<Player> {
    let n = arena.len();
    let of = |p: Player| -> Vec<usize> { (0..n).filter(|&v| arena.owner[v] == p).collect() };
    let (mine, theirs) = (of(Player::Automaton), of(Player::Pathfinder));
    let profiles = |ps: &[usize]| -> Vec<Vec<usize>> {
        let mut all = vec![vec![]];
        for &v in ps {
            all = all
                .into_iter()
                .flat_map(|p: Vec<usize>| {
                    (0..arena.moves[v].len()).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        all
    };
    let (sigma, tau) = (profiles(&mine), profiles(&theirs));
    let mut wins = vec![false; n];
    let mut choice = vec![0; n];
    for s in &sigma {
        for (&v, &i) in mine.iter().zip(s) {
            choice[v] = i;
        }
        let mut all = vec![true; n];
        for t in &tau {
            for (&v, &i) in theirs.iter().zip(t) {
                choice[v] = i;
            }
            for (start, w) in all.iter_mut().enumerate() {
                if *w && play_winner(arena, &choice, start) != Player::Automaton {
                    *w = false;
                }
            }
        }
        for v in 0..n {
            wins[v] |= all[v];
        }
    }
    wins.into_iter().map(|w| if w { Player::Automaton } else { Player::Pathfinder }).collect()
}

/// What a position of an emptiness arena stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Position<S> {
    State(S),
    Move(TreeLetter, Succ<usize>),
    Win,
    Lose,
}

/// Arena of the emptiness game of a tree automaton, explored from its
/// initial state.
#[derive(Clone, Debug)]
pub struct EmptinessGame<S> {
    pub arena: Arena,
    pub positions: Vec<Position<S>>,
    pub initial: usize,
    pub states: usize,
}

const WIN: usize = 0;
const LOSE: usize = 1;

pub fn emptiness_arena<A: TreeAutomaton>(aut: &A, budget: usize) -> Result<EmptinessGame<A::State>, GameError> {
    let mut arena = Arena::default();
    let mut positions = Vec::new();
    for (p, pos) in [(2, Position::Win), (1, Position::Lose)] {
        let v = arena.add(Player::Automaton, p);
        arena.moves[v].push(v);
        positions.push(pos);
    }
    let mut index: HashMap<A::State, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut intern = |q: A::State, arena: &mut Arena, positions: &mut Vec<Position<A::State>>, queue: &mut VecDeque<usize>| {
        if let Some(&v) = index.get(&q) {
            return v;
        }
        let v = arena.add(Player::Automaton, aut.priority(&q));
        index.insert(q.clone(), v);
        positions.push(Position::State(q));
        queue.push_back(v);
        v
    };
    let initial = intern(aut.initial(), &mut arena, &mut positions, &mut queue);
    while let Some(v) = queue.pop_front() {
        let Position::State(q) = positions[v].clone() else { unreachable!() };
        let mut seen = HashSet::new();
        for (l, s) in aut.moves(&q) {
            let s = s.map(|c| intern(c, &mut arena, &mut positions, &mut queue));
            if !seen.insert((l, s.clone())) {
                continue;
            }
            let m = arena.add(Player::Pathfinder, 0);
            arena.moves[m] = match &s {
                Succ::Top => vec![WIN],
                Succ::One(a) => vec![*a],
                Succ::Two(a, b) => vec![*a, *b],
            };
            positions.push(Position::Move(l, s));
            arena.moves[v].push(m);
        }
        if arena.moves[v].is_empty() {
            arena.moves[v].push(LOSE);
        }
        if arena.len() > budget {
            return Err(GameError::BudgetExceeded(budget));
        }
    }
    let states = positions.iter().filter(|p| matches!(p, Position::State(_))).count();
    Ok(EmptinessGame { arena, positions, initial, states })
}

/// One node of a witness strategy graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessNode {
    pub state: String,
    pub priority: u8,
    /// Action labelling the tree node, `None` for ⊥.
    pub letter: Option<ActionId>,
    pub children: Vec<usize>,
}

/// Finite graph whose unfolding from node 0 is an accepted tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub nodes: Vec<WitnessNode>,
}

impl Witness {
    pub fn is_finite(&self) -> bool {
        let sccs = crate::automata::tarjan(&self.nodes.iter().map(|n| n.children.clone()).collect::<Vec<_>>());
        self.nodes.iter().enumerate().all(|(v, n)| sccs.size[sccs.comp[v]] == 1 && !n.children.contains(&v))
    }

    /// Action names, with `BOT` for ⊥.
    pub fn letter_name(&self, system: &System, v: usize) -> String {
        self.nodes[v].letter.map_or("BOT".into(), |a| system.action(a).name.clone())
    }

    pub fn to_dot(&self, system: &System) -> String {
        let mut s = String::from("digraph witness {\n  node [shape=box];\n");
        for (v, n) in self.nodes.iter().enumerate() {
            s += &format!("  n{v} [label=\"{}\\n{}\"];\n", self.letter_name(system, v), n.state.replace('"', "'"));
            for (i, c) in n.children.iter().enumerate() {
                s += &format!("  n{v} -> n{c} [label=\"{i}\"];\n");
            }
        }
        s + "}\n"
    }
}

/// Automaton's strategy restricted to the positions it reaches from the
/// initial one.
pub fn extract_witness<S: std::fmt::Debug + Clone>(
    game: &EmptinessGame<S>,
    solution: &Solution,
    priority: impl Fn(&S) -> u8,
) -> Option<Witness> {
    if solution.winner[game.initial] != Player::Automaton {
        return None;
    }
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut queue = VecDeque::from([game.initial]);
    index.insert(game.initial, 0);
    nodes.push(None);
    while let Some(v) = queue.pop_front() {
        let m = solution.strategy[v].expect("winning strategy defined");
        let (Position::State(q), Position::Move(l, succ)) = (&game.positions[v], &game.positions[m]) else {
            unreachable!("automaton positions move to transitions")
        };
        let mut children = Vec::new();
        for c in succ.states() {
            let id = *index.entry(*c).or_insert_with(|| {
                nodes.push(None);
                queue.push_back(*c);
                nodes.len() - 1
            });
            children.push(id);
        }
        nodes[index[&v]] = Some(WitnessNode { state: format!("{q:?}"), priority: priority(q), letter: l.action, children });
    }
    Some(Witness { nodes: nodes.into_iter().map(|n| n.expect("every node visited")).collect() })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub automaton_states: usize,
    pub positions: usize,
    pub priorities: u8,
    pub millis: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub satisfiable: bool,
    /// False when the verdict may be an artefact of the bounded ranks of
    /// the chain tracker.
    pub exact: bool,
    pub witness: Option<Witness>,
    /// Run reaching the witness tree (finite witness) or a prefix of it.
    pub schedule: Option<Run>,
    /// Whether the schedule executed every action of the witness up to the
    /// replay depth.
    pub schedule_complete: bool,
    pub stats: Stats,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub budget: usize,
    pub config: LimitConfig,
    pub replay_depth: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { budget: default_budget(), config: LimitConfig::default(), replay_depth: 20 }
    }
}

pub fn verify(system: &System, objective: &ParityNta) -> Result<Verdict, GameError> {
    verify_with(system, objective, &VerifyOptions::default())
}

/// Decides whether some fair run has a limit configuration accepted by
/// `objective`.
///
/// The limit automaton is first solved without the chain tracker, which only
/// enlarges its language on infinite trees: an empty product or a finite
/// witness there is final. Otherwise the configured automaton is solved.
pub fn verify_with(system: &System, objective: &ParityNta, opts: &VerifyOptions) -> Result<Verdict, GameError> {
    let start = Instant::now();
    if system.is_pushdown() {
        return Err(GameError::Pushdown);
    }
    if objective.actions != system.actions.len() {
        return Err(GameError::AlphabetMismatch(objective.actions, system.actions.len()));
    }
    let relaxed = LimitConfig { chains: false, ..opts.config };
    let mut stats = Stats::default();
    let mut verdict = solve_once(system, objective, relaxed, opts, &mut stats)?;
    verdict.exact = !verdict.satisfiable
        || accepts_only_finite(objective)
        || verdict.witness.as_ref().is_some_and(Witness::is_finite);
    if !verdict.exact && opts.config.chains {
        verdict = solve_once(system, objective, opts.config, opts, &mut stats)?;
        verdict.exact = verdict.satisfiable;
    }
    stats.millis = start.elapsed().as_millis();
    verdict.stats = stats;
    Ok(verdict)
}

fn solve_once(
    system: &System,
    objective: &ParityNta,
    config: LimitConfig,
    opts: &VerifyOptions,
    stats: &mut Stats,
) -> Result<Verdict, GameError> {
    let limit = build_limit_automaton_with(system, config)?;
    let game = emptiness_arena(&limit, opts.budget)?;
    let solution = zielonka_solve(&game.arena);
    stats.automaton_states += game.states;
    stats.positions += game.arena.len();
    let alive = winning_states(&game, &solution);
    drop(game);
    let pruned = Pruned { inner: &limit, alive };
    let product = BuchiTimesParity::new(&pruned, objective);
    let game = emptiness_arena(&product, opts.budget)?;
    let solution = zielonka_solve(&game.arena);
    let satisfiable = solution.winner[game.initial] == Player::Automaton;
    let witness = extract_witness(&game, &solution, |q| product.priority(q));
    let (schedule, schedule_complete) = match &witness {
        Some(w) => {
            let (run, complete) = schedule_for(system, w, opts.replay_depth);
            (Some(run), complete)
        }
        None => (None, false),
    };
    tracing::debug!(positions = game.arena.len(), states = game.states, satisfiable, chains = config.chains, "game solved");
    stats.automaton_states += game.states;
    stats.positions += game.arena.len();
    stats.priorities = stats.priorities.max(game.arena.priority.iter().copied().max().unwrap_or(0));
    Ok(Verdict { satisfiable, exact: true, witness, schedule, schedule_complete, stats: Stats::default() })
}

/// Every infinite branch of a run sees an odd priority infinitely often.
pub fn accepts_only_finite(objective: &ParityNta) -> bool {
    objective.priority.iter().all(|p| p % 2 == 1)
}

/// States from which Automaton wins.
pub fn winning_states<S: Clone + Eq + Hash>(game: &EmptinessGame<S>, solution: &Solution) -> HashSet<S> {
    game.positions
        .iter()
        .zip(&solution.winner)
        .filter_map(|(p, w)| match p {
            Position::State(q) if *w == Player::Automaton => Some(q.clone()),
            _ => None,
        })
        .collect()
}

/// Restriction of an automaton to moves whose successors all lie in `alive`.
pub struct Pruned<'a, A: TreeAutomaton> {
    pub inner: &'a A,
    pub alive: HashSet<A::State>,
}

impl<A: TreeAutomaton> TreeAutomaton for Pruned<'_, A> {
    type State = A::State;

    fn initial(&self) -> A::State {
        self.inner.initial()
    }

    fn priority(&self, q: &A::State) -> u8 {
        self.inner.priority(q)
    }

    fn actions(&self) -> usize {
        self.inner.actions()
    }

    fn moves(&self, q: &A::State) -> Vec<(TreeLetter, Succ<A::State>)> {
        if !self.alive.contains(q) {
            return Vec::new();
        }
        let mut v = self.inner.moves(q);
        v.retain(|(_, s)| s.states().into_iter().all(|c| self.alive.contains(c)));
        v
    }

    fn moves_on(&self, q: &A::State, letter: TreeLetter) -> Vec<Succ<A::State>> {
        if !self.alive.contains(q) {
            return Vec::new();
        }
        let mut v = self.inner.moves_on(q, letter);
        v.retain(|s| s.states().into_iter().all(|c| self.alive.contains(c)));
        v
    }
}

/// Pending action: execute `action` at the leaf `addr`, which unfolds
/// witness node `node`.
#[derive(Clone, Debug)]
struct Pending {
    addr: Addr,
    node: usize,
    action: ActionId,
}

fn pending_of(w: &Witness, node: usize, addr: Addr, depth: usize) -> Option<Pending> {
    let first = *w.nodes[node].children.first()?;
    let action = w.nodes[first].letter?;
    (addr.0.len() < depth).then_some(Pending { addr, node, action })
}

fn execute(system: &System, tree: &mut ConfigTree, w: &Witness, p: &Pending, depth: usize, pending: &mut Vec<Pending>) -> bool {
    let Some(leaf) = tree.find(&p.addr) else { return false };
    if step_mut(system, tree, leaf, p.action).is_err() {
        return false;
    }
    for (d, &c) in w.nodes[p.node].children.iter().enumerate() {
        pending.extend(pending_of(w, c, p.addr.child(d as u8), depth));
    }
    true
}

/// Schedules the actions of the witness unfolding down to `depth`. Actions
/// run in breadth-first order when enabled; finite witnesses fall back to a
/// search over orders. Returns the run and whether all actions ran.
pub fn schedule_for(system: &System, w: &Witness, depth: usize) -> (Run, bool) {
    let mut tree = initial_config(system);
    let mut pending: Vec<Pending> = pending_of(w, 0, Addr::root(), depth).into_iter().collect();
    let mut run = Run::default();
    while let Some(i) = (0..pending.len()).find(|&i| {
        let mut t = tree.clone();
        let mut more = Vec::new();
        execute(system, &mut t, w, &pending[i], depth, &mut more)
    }) {
        let p = pending.remove(i);
        run.events.push(Event { addr: p.addr.clone(), action: p.action });
        execute(system, &mut tree, w, &p, depth, &mut pending);
    }
    if pending.is_empty() || !w.is_finite() {
        return (run, pending.is_empty());
    }
    match search_schedule(system, w, depth) {
        Some(r) => (r, true),
        None => (run, false),
    }
}

/// Depth-first search over interleavings of a finite witness, memoized on
/// the set of executed actions.
fn search_schedule(system: &System, w: &Witness, depth: usize) -> Option<Run> {
    const CAP: usize = 100_000;
    let mut seen: HashSet<Vec<Addr>> = HashSet::new();
    let mut stack = vec![(initial_config(system), pending_of(w, 0, Addr::root(), depth).into_iter().collect::<Vec<_>>(), Run::default())];
    while let Some((tree, pending, run)) = stack.pop() {
        if pending.is_empty() {
            return Some(run);
        }
        let mut key: Vec<Addr> = run.events.iter().map(|e| e.addr.clone()).collect();
        key.sort();
        if !seen.insert(key) || seen.len() > CAP {
            continue;
        }
        for i in 0..pending.len() {
            let mut t = tree.clone();
            let mut rest = pending.clone();
            let p = rest.remove(i);
            if execute(system, &mut t, w, &p, depth, &mut rest) {
                let mut r = run.clone();
                r.events.push(Event { addr: p.addr, action: p.action });
                stack.push((t, rest, r));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_system;
    use crate::semantics::is_fair;
    use crate::objectives::{template, Template};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_arena(rng: &mut ChaCha8Rng) -> Arena {
        let n = rng.gen_range(1..=8);
        let mut a = Arena::default();
        for _ in 0..n {
            let owner = if rng.gen_bool(0.5) { Player::Automaton } else { Player::Pathfinder };
            a.add(owner, rng.gen_range(1..=4));
        }
        for v in 0..n {
            let k = rng.gen_range(1..=2);
            for _ in 0..k {
                let w = rng.gen_range(0..n);
                if !a.moves[v].contains(&w) {
                    a.moves[v].push(w);
                }
            }
        }
        a
    }

    #[test]
    fn self_loops() {
        for (p, who) in [(2, Player::Automaton), (1, Player::Pathfinder)] {
            let mut a = Arena::default();
            let v = a.add(Player::Automaton, p);
            a.moves[v].push(v);
            assert_eq!(zielonka_solve(&a).winner, vec![who]);
        }
    }

    #[test]
    fn zielonka_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = random_arena(&mut rng);
            let sol = zielonka_solve(&a);
            assert_eq!(sol.winner, brute_force_solve(&a), "{a:?}");
            // the winner's strategy stays in its region and wins against
            // every positional counter strategy
            let mut choice = vec![0; a.len()];
            for (v, s) in sol.strategy.iter().enumerate() {
                if let Some(w) = *s {
                    assert_eq!(sol.winner[w], sol.winner[v]);
                    choice[v] = a.moves[v].iter().position(|&x| x == w).unwrap();
                }
            }
            for v in 0..a.len() {
                assert!(play_winner(&a, &choice, v) == sol.winner[v] || sol.strategy[v].is_none());
            }
        }
    }

    #[test]
    fn trivial_automata() {
        let empty = ParityNta::empty(3);
        let g = emptiness_arena(&empty, 100).unwrap();
        assert_eq!(zielonka_solve(&g.arena).winner[g.initial], Player::Pathfinder);
        let all = ParityNta::universal(3);
        let g = emptiness_arena(&all, 100).unwrap();
        let sol = zielonka_solve(&g.arena);
        assert_eq!(sol.winner[g.initial], Player::Automaton);
        assert!(extract_witness(&g, &sol, |q| all.priority[*q]).is_some());
        assert_eq!(emptiness_arena(&all, 3).unwrap_err(), GameError::BudgetExceeded(3));
    }

    #[test]
    fn stuck_process_never_runs_forever() {
        let s = parse_system("system t process p_init arity 0 init s { }").unwrap();
        let obj = template(&s, &Template::InstanceRunsForever { process: "p_init".into() }).unwrap();
        assert!(!verify(&s, &obj).unwrap().satisfiable);
        let dl = template(&s, &Template::GlobalDeadlock).unwrap();
        let v = verify(&s, &dl).unwrap();
        assert!(v.satisfiable && v.schedule_complete);
        assert!(v.schedule.unwrap().events.is_empty());
    }

    #[test]
    fn ring_of_two_deadlocks() {
        let s = parse_system(include_str!("../../../corpus/philosophers_ring2.dlss")).unwrap();
        let dl = template(&s, &Template::GlobalDeadlock).unwrap();
        let v = verify(&s, &dl).unwrap();
        assert!(v.satisfiable);
        let w = v.witness.unwrap();
        assert!(w.is_finite());
        assert!(v.schedule_complete);
        let tree = v.schedule.unwrap().replay(&s).unwrap();
        assert!(is_fair(&s, &tree));
    }
}
