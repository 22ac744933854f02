//! Emptiness of right-resetting pushdown parity tree automata and
//! verification of pushdown systems.
//!
//! Each tree is cut into left paths. A left path is a run of a word pushdown
//! automaton whose binary transitions are allowed when the state sent to the
//! right child belongs to a set chosen by the running maximal priority. The
//! winning states are the solution of an alternating fixpoint over these
//! sets.

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::automata::{tarjan, ParityNta, Succ, TreeAutomaton, TreeLetter};
use crate::game::{accepts_only_finite, Stats, Verdict, VerifyOptions};
use crate::limitaut::{build_limit_automaton_with, LimitConfig, LimitError, LimitState};
use crate::model::{StackInstr, StackSym, System};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PushdownError {
    #[error("process {0} does not lock in stack order")]
    NotNested(String),
    #[error("more than {0} automaton states")]
    BudgetExceeded(usize),
    #[error("binary transition of state {0} does not reset the right branch")]
    NotRightResetting(usize),
    #[error("objective has {0} actions but the system has {1}")]
    AlphabetMismatch(usize, usize),
    #[error(transparent)]
    Limit(LimitError),
}

impl From<LimitError> for PushdownError {
    fn from(e: LimitError) -> Self {
        match e {
            LimitError::NotNested(p) => PushdownError::NotNested(p),
            e => PushdownError::Limit(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum PtaInstr {
    Skip,
    Pop,
    Push(StackSym),
    /// Continue with the empty stack.
    Reset,
}

impl From<StackInstr> for PtaInstr {
    fn from(i: StackInstr) -> Self {
        match i {
            StackInstr::Skip => PtaInstr::Skip,
            StackInstr::Pop => PtaInstr::Pop,
            StackInstr::Push(g) => PtaInstr::Push(g),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PtaMove {
    pub letter: TreeLetter,
    pub succ: Succ<usize>,
    pub left: PtaInstr,
    pub right: PtaInstr,
}

/// Pushdown parity tree automaton whose right branches always reset the
/// stack.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RightResetPta {
    pub names: Vec<String>,
    pub initial: usize,
    pub priority: Vec<u8>,
    pub stack_symbols: usize,
    /// Moves per state and top symbol.
    pub delta: Vec<Vec<Vec<PtaMove>>>,
    pub actions: usize,
}

impl RightResetPta {
    pub fn new(actions: usize, stack_symbols: usize) -> Self {
        RightResetPta {
            names: Vec::new(),
            initial: 0,
            priority: Vec::new(),
            stack_symbols: stack_symbols.max(1),
            delta: Vec::new(),
            actions,
        }
    }

    pub fn add_state(&mut self, name: impl Into<String>, priority: u8) -> usize {
        self.names.push(name.into());
        self.priority.push(priority);
        self.delta.push(vec![Vec::new(); self.stack_symbols]);
        self.names.len() - 1
    }

    pub fn add_move(&mut self, q: usize, top: StackSym, m: PtaMove) -> Result<(), PushdownError> {
        if matches!(m.succ, Succ::Two(..)) && m.right != PtaInstr::Reset {
            return Err(PushdownError::NotRightResetting(q));
        }
        let v = &mut self.delta[q][top.0 as usize];
        if !v.contains(&m) {
            v.push(m);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn max_priority(&self) -> u8 {
        self.priority.iter().copied().max().unwrap_or(0)
    }

    /// The same automaton without a stack: every move is allowed at the
    /// bottom symbol.
    pub fn from_nta(nta: &ParityNta) -> Self {
        let mut pta = RightResetPta::new(nta.actions, 1);
        for q in 0..nta.len() {
            pta.add_state(nta.names[q].clone(), nta.priority[q]);
        }
        pta.initial = nta.initial;
        for (q, moves) in nta.delta.iter().enumerate() {
            for (l, succs) in moves {
                for s in succs {
                    let right = if s.arity() == 2 { PtaInstr::Reset } else { PtaInstr::Skip };
                    pta.add_move(q, StackSym::BOTTOM, PtaMove { letter: *l, succ: s.clone(), left: PtaInstr::Skip, right })
                        .expect("right branches reset");
                }
            }
        }
        pta
    }

    /// Whether a finite tree is accepted, simulating the stack of each left
    /// path.
    pub fn accepts_finite_tree(&self, tree: &crate::automata::LetterTree) -> bool {
        fn go(a: &RightResetPta, t: &crate::automata::LetterTree, n: usize, q: usize, stack: &[StackSym]) -> bool {
            let top = *stack.last().unwrap_or(&StackSym::BOTTOM);
            let kids = &t.children[n];
            a.delta[q][top.0 as usize].iter().filter(|m| m.letter == t.letters[n]).any(|m| {
                let mut s = stack.to_vec();
                match m.left {
                    PtaInstr::Skip => {}
                    PtaInstr::Pop => {
                        if s.pop().is_none() {
                            return false;
                        }
                    }
                    PtaInstr::Push(g) => s.push(g),
                    PtaInstr::Reset => s.clear(),
                }
                match m.succ {
                    Succ::Top => kids.is_empty(),
                    Succ::One(l) => kids.len() == 1 && go(a, t, kids[0], l, &s),
                    Succ::Two(l, r) => kids.len() == 2 && go(a, t, kids[0], l, &s) && go(a, t, kids[1], r, &[]),
                }
            })
        }
        go(self, tree, 0, self.initial, &[])
    }
}

fn stack_symbols(system: &System) -> usize {
    system.processes.iter().map(|p| p.stack_symbols()).max().unwrap_or(1)
}

/// The limit automaton with the stack of every process simulated on the left
/// branch. Spawned processes start with the empty stack.
pub fn build_limit_pta(system: &System, config: LimitConfig, budget: usize) -> Result<(RightResetPta, Vec<LimitState>), PushdownError> {
    let limit = build_limit_automaton_with(system, config)?;
    let gamma = stack_symbols(system);
    let mut pta = RightResetPta::new(system.actions.len(), gamma);
    let mut index: HashMap<LimitState, usize> = HashMap::new();
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |q: LimitState, pta: &mut RightResetPta, states: &mut Vec<LimitState>, queue: &mut VecDeque<usize>| {
        *index.entry(q).or_insert_with(|| {
            let v = pta.add_state(format!("b{}", states.len()), limit.priority(&q));
            states.push(q);
            queue.push_back(v);
            v
        })
    };
    intern(limit.initial(), &mut pta, &mut states, &mut queue);
    while let Some(v) = queue.pop_front() {
        if pta.len() > budget {
            return Err(PushdownError::BudgetExceeded(budget));
        }
        let q = states[v];
        for g in 0..gamma {
            let top = StackSym(g as u16);
            // symbols beyond the process alphabet never occur
            if g >= system.process(q.process).stack_symbols() {
                continue;
            }
            for m in limit.limit_moves(&q, None, Some(top)) {
                let succ = m.succ.map(|c| intern(c, &mut pta, &mut states, &mut queue));
                let right = if succ.arity() == 2 { PtaInstr::Reset } else { PtaInstr::Skip };
                pta.add_move(v, top, PtaMove { letter: m.letter, succ, left: m.instr.into(), right })?;
            }
        }
    }
    Ok((pta, states))
}

/// Intersection of a Büchi pushdown automaton with a parity objective, as
/// in [`crate::automata::BuchiTimesParity`].
pub fn pta_times_parity(pta: &RightResetPta, objective: &ParityNta, budget: usize) -> Result<RightResetPta, PushdownError> {
    if pta.actions != objective.actions {
        return Err(PushdownError::AlphabetMismatch(objective.actions, pta.actions));
    }
    let mut out = RightResetPta::new(pta.actions, pta.stack_symbols);
    let mut index: HashMap<(usize, usize, u8), usize> = HashMap::new();
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    let prio = |(b, _, m): (usize, usize, u8)| if pta.priority[b] == 2 { m } else { 1 };
    let mut intern = |s: (usize, usize, u8), out: &mut RightResetPta, states: &mut Vec<(usize, usize, u8)>, queue: &mut VecDeque<usize>| {
        *index.entry(s).or_insert_with(|| {
            let v = out.add_state(format!("{}.{}.{}", pta.names[s.0], objective.names[s.1], s.2), prio(s));
            states.push(s);
            queue.push_back(v);
            v
        })
    };
    let p0 = objective.initial;
    intern((pta.initial, p0, objective.priority[p0]), &mut out, &mut states, &mut queue);
    while let Some(v) = queue.pop_front() {
        if out.len() > budget {
            return Err(PushdownError::BudgetExceeded(budget));
        }
        let (b, p, m) = states[v];
        let reset = pta.priority[b] == 2;
        let next = |p: usize| {
            let o = objective.priority[p];
            (p, if reset { o } else { m.max(o) })
        };
        for g in 0..pta.stack_symbols {
            for mv in &pta.delta[b][g] {
                let Some(ps) = objective.delta[p].get(&mv.letter) else { continue };
                for sp in ps {
                    let succ = match (&mv.succ, sp) {
                        (Succ::Top, Succ::Top) => Succ::Top,
                        (Succ::One(b1), Succ::One(p1)) => {
                            let (p1, m1) = next(*p1);
                            Succ::One(intern((*b1, p1, m1), &mut out, &mut states, &mut queue))
                        }
                        (Succ::Two(b1, b2), Succ::Two(p1, p2)) => {
                            let (p1, m1) = next(*p1);
                            let (p2, m2) = next(*p2);
                            let l = intern((*b1, p1, m1), &mut out, &mut states, &mut queue);
                            let r = intern((*b2, p2, m2), &mut out, &mut states, &mut queue);
                            Succ::Two(l, r)
                        }
                        _ => continue,
                    };
                    out.add_move(v, StackSym(g as u16), PtaMove { succ, ..mv.clone() })?;
                }
            }
        }
    }
    Ok(out)
}

/// Word pushdown automaton. Its input letters are irrelevant for emptiness
/// and are not stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordPda {
    pub priority: Vec<u8>,
    pub stack_symbols: usize,
    /// Rules per state and top symbol.
    pub rules: Vec<Vec<Vec<(usize, StackInstr)>>>,
    /// Whether a run may stop in a state with a given top symbol.
    pub leaf: Vec<Vec<bool>>,
}

impl WordPda {
    pub fn new(states: usize, stack_symbols: usize) -> Self {
        WordPda {
            priority: vec![1; states],
            stack_symbols,
            rules: vec![vec![Vec::new(); stack_symbols]; states],
            leaf: vec![vec![false; stack_symbols]; states],
        }
    }

    pub fn len(&self) -> usize {
        self.priority.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priority.is_empty()
    }

    pub fn add(&mut self, q: usize, top: StackSym, to: usize, instr: StackInstr) {
        // the bottom symbol is never popped
        if instr == StackInstr::Pop && top == StackSym::BOTTOM {
            return;
        }
        let v = &mut self.rules[q][top.0 as usize];
        if !v.contains(&(to, instr)) {
            v.push((to, instr));
        }
    }
}

/// Sets `G_1..G_d`, indexed by priority; index 0 is unused.
pub type StateSets = Vec<Vec<bool>>;

/// Word automaton simulating the left path of the tree automaton. State
/// `(q, e)` has index `q * d + e - 1` and records the largest priority seen
/// since the start of the path. A binary transition is kept when its right
/// state `q_r` lies in `G_max(e, Ω(q_r))`.
pub fn build_al(pta: &RightResetPta, sets: &StateSets) -> WordPda {
    let d = pta.max_priority().max(1) as usize;
    let id = |q: usize, e: u8| q * d + e.max(1) as usize - 1;
    let mut pda = WordPda::new(pta.len() * d, pta.stack_symbols);
    for q in 0..pta.len() {
        for e in 1..=d as u8 {
            let v = id(q, e);
            pda.priority[v] = pta.priority[q];
            for (g, moves) in pta.delta[q].iter().enumerate() {
                let top = StackSym(g as u16);
                for m in moves {
                    let instr = match m.left {
                        PtaInstr::Skip => StackInstr::Skip,
                        PtaInstr::Pop => StackInstr::Pop,
                        PtaInstr::Push(s) => StackInstr::Push(s),
                        PtaInstr::Reset => unreachable!("left branches keep the stack"),
                    };
                    match m.succ {
                        Succ::Top => pda.leaf[v][g] = true,
                        Succ::One(l) => pda.add(v, top, id(l, e.max(pta.priority[l])), instr),
                        Succ::Two(l, r) => {
                            let k = e.max(pta.priority[r]) as usize;
                            if sets.get(k).is_some_and(|s| s[r]) {
                                pda.add(v, top, id(l, e.max(pta.priority[l])), instr);
                            }
                        }
                    }
                }
            }
        }
    }
    pda
}

/// For each pair `(q, γ)`, the states reachable by popping `γ`, with whether
/// an accepting state was seen on the way.
type Summaries = Vec<HashMap<usize, bool>>;

fn summaries(pda: &WordPda, allowed: &[bool], acc: &[bool]) -> Summaries {
    let g = pda.stack_symbols;
    let mut pops: Summaries = vec![HashMap::new(); pda.len() * g];
    let add = |pops: &mut Summaries, k: usize, q: usize, f: bool| -> bool {
        match pops[k].get(&q) {
            Some(&old) if old || !f => false,
            _ => {
                pops[k].insert(q, f);
                true
            }
        }
    };
    let mut changed = true;
    while changed {
        changed = false;
        for q in (0..pda.len()).filter(|&q| allowed[q]) {
            for (s, rules) in pda.rules[q].iter().enumerate() {
                let k = q * g + s;
                for &(t, instr) in rules {
                    if !allowed[t] {
                        continue;
                    }
                    let found: Vec<(usize, bool)> = match instr {
                        StackInstr::Pop => vec![(t, acc[q] || acc[t])],
                        StackInstr::Skip => pops[t * g + s].iter().map(|(&r, &f)| (r, acc[q] || f)).collect(),
                        StackInstr::Push(h) => pops[t * g + h.0 as usize]
                            .iter()
                            .flat_map(|(&r1, &f1)| pops[r1 * g + s].iter().map(move |(&r2, &f2)| (r2, acc[q] || f1 || f2)))
                            .collect(),
                    };
                    for (r, f) in found {
                        changed |= add(&mut pops, k, r, f);
                    }
                }
            }
        }
    }
    pops
}

/// Graph on heads `(q, γ)`: an edge means the second head occurs on top of
/// an extension of the stack below the first. Edges carry whether an
/// accepting state was seen.
fn head_graph(pda: &WordPda, allowed: &[bool], acc: &[bool], pops: &Summaries) -> Vec<Vec<(usize, bool)>> {
    let g = pda.stack_symbols;
    let mut edges = vec![Vec::new(); pda.len() * g];
    for q in (0..pda.len()).filter(|&q| allowed[q]) {
        for (s, rules) in pda.rules[q].iter().enumerate() {
            for &(t, instr) in rules {
                if !allowed[t] {
                    continue;
                }
                let from = q * g + s;
                match instr {
                    StackInstr::Pop => {}
                    StackInstr::Skip => edges[from].push((t * g + s, acc[q] || acc[t])),
                    StackInstr::Push(h) => {
                        edges[from].push((t * g + h.0 as usize, acc[q] || acc[t]));
                        for (&r, &f) in &pops[t * g + h.0 as usize] {
                            edges[from].push((r * g + s, acc[q] || f));
                        }
                    }
                }
            }
        }
    }
    edges
}

fn backward_reach(edges: &[Vec<(usize, bool)>], targets: &[bool]) -> Vec<bool> {
    let mut pred = vec![Vec::new(); edges.len()];
    for (v, es) in edges.iter().enumerate() {
        for &(w, _) in es {
            pred[w].push(v);
        }
    }
    let mut seen = targets.to_vec();
    let mut stack: Vec<usize> = (0..edges.len()).filter(|&v| seen[v]).collect();
    while let Some(v) = stack.pop() {
        for &u in &pred[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen
}

/// States from which some run starting with the bottom stack is accepting:
/// infinite with even largest priority seen infinitely often, or finite and
/// stopping at a leaf.
pub fn pda_accepting_states(pda: &WordPda) -> Vec<bool> {
    let n = pda.len();
    let g = pda.stack_symbols;
    let bottom = |reach: &[bool], q: usize| reach[q * g];
    let all = vec![true; n];
    let none = vec![false; n];
    let pops = summaries(pda, &all, &none);
    let all_edges = head_graph(pda, &all, &none, &pops);
    let leaves: Vec<bool> = (0..n * g).map(|h| pda.leaf[h / g][h % g]).collect();
    let fin = backward_reach(&all_edges, &leaves);
    let mut result: Vec<bool> = (0..n).map(|q| bottom(&fin, q)).collect();
    let mut thresholds: Vec<u8> = pda.priority.iter().copied().filter(|p| p % 2 == 0).collect();
    thresholds.sort();
    thresholds.dedup();
    for k in thresholds {
        let allowed: Vec<bool> = pda.priority.iter().map(|&p| p <= k).collect();
        let acc: Vec<bool> = pda.priority.iter().map(|&p| p == k).collect();
        let pops = summaries(pda, &allowed, &acc);
        let edges = head_graph(pda, &allowed, &acc, &pops);
        let plain: Vec<Vec<usize>> = edges.iter().map(|es| es.iter().map(|e| e.0).collect()).collect();
        let sccs = tarjan(&plain);
        let mut good = vec![false; sccs.size.len()];
        for (v, es) in edges.iter().enumerate() {
            for &(w, f) in es {
                if f && sccs.comp[v] == sccs.comp[w] {
                    good[sccs.comp[v]] = true;
                }
            }
        }
        let repeating: Vec<bool> = (0..n * g).map(|h| good[sccs.comp[h]]).collect();
        // the prefix before the threshold holds is unrestricted
        let inf = backward_reach(&all_edges, &backward_reach(&edges, &repeating));
        for (q, r) in result.iter_mut().enumerate() {
            *r |= bottom(&inf, q);
        }
    }
    result
}

/// Same answer for a PDA that never pushes or pops, from cycles of the
/// transition graph.
pub fn stackless_accepting_states(pda: &WordPda) -> Vec<bool> {
    let n = pda.len();
    let succ: Vec<Vec<usize>> = (0..n).map(|q| pda.rules[q][0].iter().map(|r| r.0).collect()).collect();
    let mut good: Vec<bool> = (0..n).map(|q| pda.leaf[q][0]).collect();
    for k in (2..=pda.priority.iter().copied().max().unwrap_or(0)).step_by(2) {
        let sub: Vec<Vec<usize>> = (0..n)
            .map(|q| if pda.priority[q] <= k { succ[q].iter().copied().filter(|&r| pda.priority[r] <= k).collect() } else { vec![] })
            .collect();
        let sccs = tarjan(&sub);
        for q in 0..n {
            let c = sccs.comp[q];
            let cyclic = sccs.size[c] > 1 || sub[q].contains(&q);
            let has_k = (0..n).any(|r| sccs.comp[r] == c && pda.priority[r] == k);
            if pda.priority[q] <= k && cyclic && has_k {
                good[q] = true;
            }
        }
    }
    // anything that reaches a good state
    let mut changed = true;
    while changed {
        changed = false;
        for q in 0..n {
            if !good[q] && succ[q].iter().any(|&r| good[r]) {
                good[q] = true;
                changed = true;
            }
        }
    }
    good
}

/// Evaluation order of the alternating fixpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixpointOrder {
    /// Inner variables restart from ∅ or Q whenever an outer one changes.
    Restart,
    /// Inner variables of the same kind as the changing one keep their last
    /// value.
    WarmStart,
}

struct Fixpoint<'a> {
    pta: &'a RightResetPta,
    order: FixpointOrder,
    sets: StateSets,
    memo: Vec<Option<Vec<bool>>>,
    evaluations: usize,
}

impl Fixpoint<'_> {
    fn start(&self, i: usize) -> Vec<bool> {
        vec![i.is_multiple_of(2); self.pta.len()]
    }

    fn eval(&mut self) -> Vec<bool> {
        self.evaluations += 1;
        let d = self.pta.max_priority().max(1) as usize;
        let acc = pda_accepting_states(&build_al(self.pta, &self.sets));
        (0..self.pta.len()).map(|q| acc[q * d + self.pta.priority[q].max(1) as usize - 1]).collect()
    }

    /// Odd variables are least fixpoints, even ones greatest.
    fn solve(&mut self, i: usize) -> Vec<bool> {
        if i == 0 {
            return self.eval();
        }
        let mut x = match (self.order, &self.memo[i]) {
            (FixpointOrder::WarmStart, Some(m)) => m.clone(),
            _ => self.start(i),
        };
        loop {
            self.sets[i] = x.clone();
            let y = self.solve(i - 1);
            debug_assert!(
                (0..x.len()).all(|q| if i % 2 == 1 { !x[q] || y[q] } else { x[q] || !y[q] }),
                "fixpoint iteration is not monotone"
            );
            if y == x {
                break;
            }
            x = y;
            for j in (1..i).filter(|j| j % 2 != i % 2) {
                self.memo[j] = None;
            }
        }
        self.memo[i] = Some(x.clone());
        x
    }
}

/// Winning states of the tree automaton for subtrees started with the empty
/// stack.
pub fn fixpoint_w(pta: &RightResetPta) -> Vec<bool> {
    fixpoint_w_with(pta, FixpointOrder::WarmStart).0
}

/// Also returns the number of word automaton evaluations.
pub fn fixpoint_w_with(pta: &RightResetPta, order: FixpointOrder) -> (Vec<bool>, usize) {
    if pta.is_empty() {
        return (Vec::new(), 0);
    }
    let d = pta.max_priority().max(1) as usize;
    let mut f = Fixpoint { pta, order, sets: vec![Vec::new(); d + 1], memo: vec![None; d + 1], evaluations: 0 };
    let w = f.solve(d);
    (w, f.evaluations)
}

/// Pushdown counterpart of [`crate::game::verify_with`]. Produces no witness.
pub fn verify_pushdown(system: &System, objective: &ParityNta, opts: &VerifyOptions) -> Result<Verdict, PushdownError> {
    let start = Instant::now();
    if objective.actions != system.actions.len() {
        return Err(PushdownError::AlphabetMismatch(objective.actions, system.actions.len()));
    }
    let mut stats = Stats::default();
    let run = |config: LimitConfig, stats: &mut Stats| -> Result<bool, PushdownError> {
        let (pta, _) = build_limit_pta(system, config, opts.budget)?;
        let product = pta_times_parity(&pta, objective, opts.budget)?;
        stats.automaton_states += pta.len() + product.len();
        stats.priorities = stats.priorities.max(product.max_priority());
        let w = fixpoint_w(&product);
        Ok(w[product.initial])
    };
    let relaxed = LimitConfig { chains: false, ..opts.config };
    let mut satisfiable = run(relaxed, &mut stats)?;
    let mut exact = !satisfiable || accepts_only_finite(objective);
    if !exact && opts.config.chains {
        satisfiable = run(opts.config, &mut stats)?;
        exact = satisfiable;
    }
    stats.millis = start.elapsed().as_millis();
    Ok(Verdict { satisfiable, exact, witness: None, schedule: None, schedule_complete: false, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{emptiness_arena, zielonka_solve, Player};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn loop_pda(p: u8) -> WordPda {
        let mut pda = WordPda::new(1, 1);
        pda.priority[0] = p;
        pda.add(0, StackSym::BOTTOM, 0, StackInstr::Skip);
        pda
    }

    #[test]
    fn single_loops() {
        assert_eq!(pda_accepting_states(&loop_pda(2)), vec![true]);
        assert_eq!(pda_accepting_states(&loop_pda(1)), vec![false]);
    }

    #[test]
    fn counter_needs_the_stack() {
        // pushes forever at priority 1 and visits priority 2 only while
        // popping, which is impossible below the bottom
        let mut pda = WordPda::new(2, 2);
        pda.priority = vec![1, 2];
        let a = StackSym(1);
        for top in [StackSym::BOTTOM, a] {
            pda.add(0, top, 0, StackInstr::Push(a));
        }
        pda.add(0, a, 1, StackInstr::Pop);
        pda.add(1, a, 1, StackInstr::Pop);
        assert_eq!(pda_accepting_states(&pda), vec![false, false]);
        // a leaf after popping everything
        pda.leaf[1][0] = true;
        assert_eq!(pda_accepting_states(&pda), vec![true, true]);
        // push and pop forever with priority 2 in between
        let mut pda = WordPda::new(2, 2);
        pda.priority = vec![1, 2];
        pda.add(0, StackSym::BOTTOM, 1, StackInstr::Push(a));
        pda.add(1, a, 0, StackInstr::Pop);
        assert_eq!(pda_accepting_states(&pda), vec![true, false]);
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
    fn saturation_matches_scc_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let pda = random_stackless(&mut rng);
            assert_eq!(pda_accepting_states(&pda), stackless_accepting_states(&pda), "{pda:?}");
        }
    }

    fn random_nta(rng: &mut ChaCha8Rng) -> ParityNta {
        let n = rng.gen_range(1..=5);
        let mut a = ParityNta::new(1);
        for i in 0..n {
            a.add_state(format!("q{i}"), rng.gen_range(1..=3));
        }
        for q in 0..n {
            for _ in 0..rng.gen_range(0..=3) {
                let s = match rng.gen_range(0..6) {
                    0 => Succ::Top,
                    1 | 2 => Succ::One(rng.gen_range(0..n)),
                    _ => Succ::Two(rng.gen_range(0..n), rng.gen_range(0..n)),
                };
                let l = TreeLetter::new(None, s.arity());
                a.add_move(q, l, s);
            }
        }
        a
    }

    #[test]
    fn fixpoint_matches_game_on_stackless_automata() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let nta = random_nta(&mut rng);
            let game = emptiness_arena(&nta, 10_000).unwrap();
            let sol = zielonka_solve(&game.arena);
            let pta = RightResetPta::from_nta(&nta);
            let (w, _) = fixpoint_w_with(&pta, FixpointOrder::Restart);
            let (w2, _) = fixpoint_w_with(&pta, FixpointOrder::WarmStart);
            assert_eq!(w, w2);
            for (v, p) in game.positions.iter().enumerate() {
                if let crate::game::Position::State(q) = p {
                    assert_eq!(w[*q], sol.winner[v] == Player::Automaton, "{nta:?} state {q}");
                }
            }
        }
    }

    #[test]
    fn al_extremes() {
        let mut nta = ParityNta::new(1);
        let q = nta.add_state("q", 2);
        nta.add_move(q, TreeLetter::new(None, 2), Succ::Two(q, q));
        let pta = RightResetPta::from_nta(&nta);
        let full: StateSets = vec![vec![true]; 3];
        let empty: StateSets = vec![vec![false]; 3];
        assert_eq!(build_al(&pta, &full).rules[1][0].len(), 1);
        assert!(build_al(&pta, &empty).rules.iter().all(|r| r[0].is_empty()));
        assert_eq!(fixpoint_w(&pta), vec![true]);
        let mut bad = RightResetPta::new(1, 1);
        bad.add_state("q", 1);
        let m = PtaMove { letter: TreeLetter::new(None, 2), succ: Succ::Two(0, 0), left: PtaInstr::Skip, right: PtaInstr::Skip };
        assert_eq!(bad.add_move(0, StackSym::BOTTOM, m), Err(PushdownError::NotRightResetting(0)));
    }
}
