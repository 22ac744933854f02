//! Tree automata over the branching-annotated action alphabet, plus the small
//! Büchi word automata used as trackers inside the limit automaton.
//!
//! Parity conditions are max-parity: a path is accepted when the largest
//! priority seen infinitely often is even.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ActionId, System};
use crate::semantics::ConfigTree;

/// A node label: the action (`None` for ⊥) and the number of children.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TreeLetter {
    pub action: Option<ActionId>,
    pub branching: u8,
}

impl TreeLetter {
    pub fn new(action: Option<ActionId>, branching: u8) -> Self {
        TreeLetter { action, branching }
    }

    /// All letters over `actions` action ids.
    pub fn alphabet(actions: usize) -> impl Iterator<Item = TreeLetter> {
        (0..=actions).flat_map(|a| {
            let action = (a > 0).then(|| ActionId(a as u32 - 1));
            (0..3).map(move |b| TreeLetter::new(action, b))
        })
    }
}

/// Successors of a transition; the shape matches the letter's branching.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Succ<Q> {
    Top,
    One(Q),
    Two(Q, Q),
}

impl<Q> Succ<Q> {
    pub fn arity(&self) -> u8 {
        match self {
            Succ::Top => 0,
            Succ::One(_) => 1,
            Succ::Two(..) => 2,
        }
    }

    pub fn map<R>(self, mut f: impl FnMut(Q) -> R) -> Succ<R> {
        match self {
            Succ::Top => Succ::Top,
            Succ::One(a) => Succ::One(f(a)),
            Succ::Two(a, b) => Succ::Two(f(a), f(b)),
        }
    }

    pub fn states(&self) -> Vec<&Q> {
        match self {
            Succ::Top => vec![],
            Succ::One(a) => vec![a],
            Succ::Two(a, b) => vec![a, b],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomataError {
    #[error("automata disagree on the alphabet ({0} vs {1} actions)")]
    AlphabetMismatch(usize, usize),
    #[error("component {0} uses priorities outside {{1, 2}}")]
    NotBuchi(usize),
    #[error("automaton has {0} states, limit is {1}")]
    TooLarge(usize, usize),
}

/// A nondeterministic parity tree automaton given by its successor function.
pub trait TreeAutomaton {
    type State: Clone + Eq + Hash + Debug;

    fn initial(&self) -> Self::State;

    fn priority(&self, q: &Self::State) -> u8;

    /// Number of action ids in the alphabet.
    fn actions(&self) -> usize;

    fn moves(&self, q: &Self::State) -> Vec<(TreeLetter, Succ<Self::State>)>;

    fn moves_on(&self, q: &Self::State, letter: TreeLetter) -> Vec<Succ<Self::State>> {
        self.moves(q).into_iter().filter(|(l, _)| *l == letter).map(|(_, s)| s).collect()
    }
}

/// Explicit parity tree automaton.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParityNta {
    pub names: Vec<String>,
    pub initial: usize,
    pub priority: Vec<u8>,
    pub delta: Vec<BTreeMap<TreeLetter, Vec<Succ<usize>>>>,
    pub actions: usize,
}

impl ParityNta {
    pub fn new(actions: usize) -> Self {
        ParityNta { names: Vec::new(), initial: 0, priority: Vec::new(), delta: Vec::new(), actions }
    }

    pub fn add_state(&mut self, name: impl Into<String>, priority: u8) -> usize {
        self.names.push(name.into());
        self.priority.push(priority);
        self.delta.push(BTreeMap::new());
        self.names.len() - 1
    }

    pub fn add_move(&mut self, q: usize, letter: TreeLetter, succ: Succ<usize>) {
        debug_assert_eq!(letter.branching, succ.arity());
        let v = self.delta[q].entry(letter).or_default();
        if !v.contains(&succ) {
            v.push(succ);
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// One state of priority 2 accepting every tree.
    pub fn universal(actions: usize) -> Self {
        let mut a = ParityNta::new(actions);
        let q = a.add_state("all", 2);
        for l in TreeLetter::alphabet(actions) {
            a.add_move(q, l, all_to(l, q));
        }
        a
    }

    /// One state without moves.
    pub fn empty(actions: usize) -> Self {
        let mut a = ParityNta::new(actions);
        a.add_state("none", 1);
        a
    }

    pub fn max_priority(&self) -> u8 {
        self.priority.iter().copied().max().unwrap_or(0)
    }

    pub fn is_buchi(&self) -> bool {
        self.priority.iter().all(|p| matches!(p, 1 | 2))
    }
}

fn all_to(l: TreeLetter, q: usize) -> Succ<usize> {
    match l.branching {
        0 => Succ::Top,
        1 => Succ::One(q),
        _ => Succ::Two(q, q),
    }
}

impl TreeAutomaton for ParityNta {
    type State = usize;

    fn initial(&self) -> usize {
        self.initial
    }

    fn priority(&self, q: &usize) -> u8 {
        self.priority[*q]
    }

    fn actions(&self) -> usize {
        self.actions
    }

    fn moves(&self, q: &usize) -> Vec<(TreeLetter, Succ<usize>)> {
        self.delta[*q].iter().flat_map(|(l, v)| v.iter().map(move |s| (*l, s.clone()))).collect()
    }

    fn moves_on(&self, q: &usize, letter: TreeLetter) -> Vec<Succ<usize>> {
        self.delta[*q].get(&letter).cloned().unwrap_or_default()
    }
}

/// Explores the reachable states of `aut` into an explicit automaton.
pub fn materialize<A: TreeAutomaton>(aut: &A, cap: usize) -> Result<ParityNta, AutomataError> {
    let mut out = ParityNta::new(aut.actions());
    let mut index: HashMap<A::State, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let q0 = aut.initial();
    index.insert(q0.clone(), out.add_state(format!("{q0:?}"), aut.priority(&q0)));
    queue.push_back(q0);
    while let Some(q) = queue.pop_front() {
        let i = index[&q];
        for (l, s) in aut.moves(&q) {
            let mut id = |r: A::State| -> Result<usize, AutomataError> {
                if let Some(&j) = index.get(&r) {
                    return Ok(j);
                }
                if index.len() >= cap {
                    return Err(AutomataError::TooLarge(index.len() + 1, cap));
                }
                let j = out.add_state(format!("{r:?}"), aut.priority(&r));
                index.insert(r.clone(), j);
                queue.push_back(r);
                Ok(j)
            };
            let s = match s {
                Succ::Top => Succ::Top,
                Succ::One(a) => Succ::One(id(a)?),
                Succ::Two(a, b) => {
                    let a = id(a)?;
                    Succ::Two(a, id(b)?)
                }
            };
            out.add_move(i, l, s);
        }
    }
    Ok(out)
}

/// Intersection of Büchi and safety automata. Büchi components are visited
/// round-robin through a counter kept in the state.
pub fn product(list: &[ParityNta]) -> Result<ParityNta, AutomataError> {
    let Some(first) = list.first() else {
        return Ok(ParityNta::universal(0));
    };
    for (i, a) in list.iter().enumerate() {
        if a.actions != first.actions {
            return Err(AutomataError::AlphabetMismatch(first.actions, a.actions));
        }
        if !a.is_buchi() {
            return Err(AutomataError::NotBuchi(i));
        }
    }
    let buchi: Vec<usize> = (0..list.len()).filter(|&i| list[i].priority.contains(&1)).collect();
    let prod = Product { parts: list, buchi };
    materialize(&prod, usize::MAX)
}

struct Product<'a> {
    parts: &'a [ParityNta],
    buchi: Vec<usize>,
}

impl Product<'_> {
    fn accepting(&self, q: &(Vec<usize>, usize), k: usize) -> bool {
        let c = self.buchi[k];
        self.parts[c].priority[q.0[c]] == 2
    }
}

impl TreeAutomaton for Product<'_> {
    type State = (Vec<usize>, usize);

    fn initial(&self) -> Self::State {
        (self.parts.iter().map(|a| a.initial).collect(), 0)
    }

    fn priority(&self, q: &Self::State) -> u8 {
        if self.buchi.is_empty() || (q.1 == 0 && self.accepting(q, 0)) {
            2
        } else {
            1
        }
    }

    fn actions(&self) -> usize {
        self.parts[0].actions
    }

    fn moves(&self, q: &Self::State) -> Vec<(TreeLetter, Succ<Self::State>)> {
        let c = if self.buchi.is_empty() {
            0
        } else if self.accepting(q, q.1) {
            (q.1 + 1) % self.buchi.len()
        } else {
            q.1
        };
        let mut out = Vec::new();
        for (l, first) in &self.parts[0].delta[q.0[0]] {
            // partial tuples of successors, one component at a time
            let mut acc: Vec<Succ<Vec<usize>>> = first.iter().map(|s| s.clone().map(|x| vec![x])).collect();
            for (i, a) in self.parts.iter().enumerate().skip(1) {
                let Some(opts) = a.delta[q.0[i]].get(l) else {
                    acc.clear();
                    break;
                };
                let mut next = Vec::new();
                for s in &acc {
                    for o in opts {
                        next.push(match (s, o) {
                            (Succ::Top, Succ::Top) => Succ::Top,
                            (Succ::One(v), Succ::One(x)) => Succ::One(push(v, *x)),
                            (Succ::Two(v, w), Succ::Two(x, y)) => Succ::Two(push(v, *x), push(w, *y)),
                            _ => continue,
                        });
                    }
                }
                acc = next;
            }
            out.extend(acc.into_iter().map(|s| (*l, s.map(|v| (v, c)))));
        }
        out
    }
}

fn push(v: &[usize], x: usize) -> Vec<usize> {
    let mut v = v.to_vec();
    v.push(x);
    v
}

/// Intersection of a Büchi automaton with a parity automaton. Between two
/// accepting Büchi states the maximal objective priority is stored and shown
/// at the next accepting state; other states get priority 1.
pub struct BuchiTimesParity<'a, B, P> {
    pub buchi: &'a B,
    pub parity: &'a P,
}

impl<'a, B: TreeAutomaton, P: TreeAutomaton> BuchiTimesParity<'a, B, P> {
    pub fn new(buchi: &'a B, parity: &'a P) -> Self {
        BuchiTimesParity { buchi, parity }
    }
}

impl<B: TreeAutomaton, P: TreeAutomaton> TreeAutomaton for BuchiTimesParity<'_, B, P> {
    type State = (B::State, P::State, u8);

    fn initial(&self) -> Self::State {
        let p = self.parity.initial();
        let m = self.parity.priority(&p);
        (self.buchi.initial(), p, m)
    }

    fn priority(&self, q: &Self::State) -> u8 {
        if self.buchi.priority(&q.0) == 2 {
            q.2
        } else {
            1
        }
    }

    fn actions(&self) -> usize {
        self.buchi.actions()
    }

    fn moves(&self, q: &Self::State) -> Vec<(TreeLetter, Succ<Self::State>)> {
        let reset = self.buchi.priority(&q.0) == 2;
        let next = |p: P::State| {
            let o = self.parity.priority(&p);
            let m = if reset { o } else { q.2.max(o) };
            (p, m)
        };
        let mut by_letter: HashMap<TreeLetter, Vec<Succ<P::State>>> = HashMap::new();
        for (l, s) in self.parity.moves(&q.1) {
            by_letter.entry(l).or_default().push(s);
        }
        let mut out = Vec::new();
        for (l, sb) in self.buchi.moves(&q.0) {
            let Some(ps) = by_letter.get(&l) else { continue };
            for sp in ps {
                let s = match (&sb, sp) {
                    (Succ::Top, Succ::Top) => Succ::Top,
                    (Succ::One(b), Succ::One(p)) => {
                        let (p, m) = next(p.clone());
                        Succ::One((b.clone(), p, m))
                    }
                    (Succ::Two(b0, b1), Succ::Two(p0, p1)) => {
                        let (p0, m0) = next(p0.clone());
                        let (p1, m1) = next(p1.clone());
                        Succ::Two((b0.clone(), p0, m0), (b1.clone(), p1, m1))
                    }
                    _ => continue,
                };
                out.push((l, s));
            }
        }
        out
    }

    fn moves_on(&self, q: &Self::State, letter: TreeLetter) -> Vec<Succ<Self::State>> {
        let reset = self.buchi.priority(&q.0) == 2;
        let next = |p: P::State| {
            let o = self.parity.priority(&p);
            let m = if reset { o } else { q.2.max(o) };
            (p, m)
        };
        let ps = self.parity.moves_on(&q.1, letter);
        let mut out = Vec::new();
        for sb in self.buchi.moves_on(&q.0, letter) {
            for sp in &ps {
                out.push(match (&sb, sp) {
                    (Succ::Top, Succ::Top) => Succ::Top,
                    (Succ::One(b), Succ::One(p)) => {
                        let (p, m) = next(p.clone());
                        Succ::One((b.clone(), p, m))
                    }
                    (Succ::Two(b0, b1), Succ::Two(p0, p1)) => {
                        let (p0, m0) = next(p0.clone());
                        let (p1, m1) = next(p1.clone());
                        Succ::Two((b0.clone(), p0, m0), (b1.clone(), p1, m1))
                    }
                    _ => continue,
                });
            }
        }
        out
    }
}

pub fn buchi_times_parity(buchi: &ParityNta, objective: &ParityNta) -> Result<ParityNta, AutomataError> {
    if buchi.actions != objective.actions {
        return Err(AutomataError::AlphabetMismatch(buchi.actions, objective.actions));
    }
    if !buchi.is_buchi() {
        return Err(AutomataError::NotBuchi(0));
    }
    materialize(&BuchiTimesParity::new(buchi, objective), usize::MAX)
}

/// A finite tree of letters stored as an arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LetterTree {
    pub letters: Vec<TreeLetter>,
    pub children: Vec<Vec<usize>>,
}

impl LetterTree {
    pub fn leaf(letter: TreeLetter) -> Self {
        LetterTree { letters: vec![letter], children: vec![vec![]] }
    }

    /// Adds a node with the given children and returns its index.
    pub fn add(&mut self, action: Option<ActionId>, children: Vec<usize>) -> usize {
        self.letters.push(TreeLetter::new(action, children.len() as u8));
        self.children.push(children);
        self.letters.len() - 1
    }

    /// Builds a tree bottom-up; the last node added becomes the root.
    pub fn build(f: impl FnOnce(&mut LetterTree) -> usize) -> Self {
        let mut t = LetterTree { letters: Vec::new(), children: Vec::new() };
        let root = f(&mut t);
        t.reroot(root)
    }

    fn reroot(self, root: usize) -> Self {
        let mut order = Vec::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            order.push(n);
            stack.extend(self.children[n].iter().rev());
        }
        let pos: HashMap<usize, usize> = order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        LetterTree {
            letters: order.iter().map(|&n| self.letters[n]).collect(),
            children: order.iter().map(|&n| self.children[n].iter().map(|c| pos[c]).collect()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// Keeps only the actions of a configuration, with the branching of each node.
pub fn encode_config(tree: &ConfigTree) -> LetterTree {
    let mut letters = Vec::with_capacity(tree.len());
    let mut children = Vec::with_capacity(tree.len());
    for n in &tree.nodes {
        let kids: Vec<usize> = n.children.iter().flatten().copied().collect();
        letters.push(TreeLetter::new(n.action, kids.len() as u8));
        children.push(kids);
    }
    LetterTree { letters, children }
}

/// Whether some run of `aut` on the finite tree reaches ⊤ at every leaf.
pub fn accepts_finite_tree<A: TreeAutomaton>(aut: &A, tree: &LetterTree) -> bool {
    let mut memo = HashMap::new();
    accepts_at(aut, tree, 0, aut.initial(), &mut memo)
}

fn accepts_at<A: TreeAutomaton>(
    aut: &A,
    tree: &LetterTree,
    n: usize,
    q: A::State,
    memo: &mut HashMap<(A::State, usize), bool>,
) -> bool {
    if let Some(&r) = memo.get(&(q.clone(), n)) {
        return r;
    }
    let kids = &tree.children[n];
    let r = aut.moves_on(&q, tree.letters[n]).into_iter().any(|s| match s {
        Succ::Top => kids.is_empty(),
        Succ::One(a) => kids.len() == 1 && accepts_at(aut, tree, kids[0], a, memo),
        Succ::Two(a, b) => {
            kids.len() == 2 && accepts_at(aut, tree, kids[0], a, memo) && accepts_at(aut, tree, kids[1], b, memo)
        }
    });
    memo.insert((q, n), r);
    r
}

/// Büchi word automaton over letters `0..letters`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Nba {
    pub states: usize,
    pub letters: usize,
    pub initial: Vec<usize>,
    pub accepting: Vec<bool>,
    /// `delta[q][a]` lists the successors of `q` on letter `a`.
    pub delta: Vec<Vec<Vec<usize>>>,
}

impl Nba {
    pub fn new(states: usize, letters: usize) -> Self {
        Nba {
            states,
            letters,
            initial: Vec::new(),
            accepting: vec![false; states],
            delta: vec![vec![Vec::new(); letters]; states],
        }
    }

    pub fn add(&mut self, q: usize, a: usize, r: usize) {
        if !self.delta[q][a].contains(&r) {
            self.delta[q][a].push(r);
        }
    }

    /// Whether `prefix · cycle^ω` is accepted. `cycle` must be non-empty.
    pub fn accepts_lasso(&self, prefix: &[usize], cycle: &[usize]) -> bool {
        let mut cur: Vec<usize> = self.initial.clone();
        for &a in prefix {
            let mut next: Vec<usize> = cur.iter().flat_map(|&q| self.delta[q][a].iter().copied()).collect();
            next.sort_unstable();
            next.dedup();
            cur = next;
        }
        lasso_accepts(
            cur.into_iter().map(|q| (q, 0)).collect(),
            |&(q, i): &(usize, usize)| {
                self.delta[q][cycle[i]].iter().map(|&r| (r, (i + 1) % cycle.len())).collect()
            },
            |&(q, _)| self.accepting[q],
        )
    }
}

/// Büchi acceptance on a finite graph: some accepting node reachable from
/// `start` lies on a cycle.
fn lasso_accepts<N: Clone + Eq + Hash>(
    start: Vec<N>,
    succ: impl Fn(&N) -> Vec<N>,
    accepting: impl Fn(&N) -> bool,
) -> bool {
    let mut index: HashMap<N, usize> = HashMap::new();
    let mut nodes: Vec<N> = Vec::new();
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    for s in start {
        if !index.contains_key(&s) {
            index.insert(s.clone(), nodes.len());
            nodes.push(s);
            edges.push(Vec::new());
            queue.push_back(nodes.len() - 1);
        }
    }
    while let Some(i) = queue.pop_front() {
        for r in succ(&nodes[i]) {
            let j = match index.get(&r) {
                Some(&j) => j,
                None => {
                    index.insert(r.clone(), nodes.len());
                    nodes.push(r);
                    edges.push(Vec::new());
                    queue.push_back(nodes.len() - 1);
                    nodes.len() - 1
                }
            };
            edges[i].push(j);
        }
    }
    let scc = tarjan(&edges);
    (0..nodes.len()).any(|i| {
        accepting(&nodes[i]) && (scc.size[scc.comp[i]] > 1 || edges[i].contains(&i))
    })
}

pub(crate) struct Sccs {
    pub comp: Vec<usize>,
    pub size: Vec<usize>,
}

/// Strongly connected components, iterative Tarjan.
pub(crate) fn tarjan(edges: &[Vec<usize>]) -> Sccs {
    let n = edges.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut size = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call = vec![(root, 0usize)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut k)) = call.last_mut() {
            if let Some(&w) = edges[v].get(*k) {
                *k += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(u, _)) = call.last() {
                low[u] = low[u].min(low[v]);
            }
            if low[v] == index[v] {
                let c = size.len();
                let mut s = 0;
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp[w] = c;
                    s += 1;
                    if w == v {
                        break;
                    }
                }
                size.push(s);
            }
        }
    }
    Sccs { comp, size }
}

pub const MAX_COMPLEMENT_STATES: usize = 12;

/// Marks a state absent from a level ranking.
pub const NO_RANK: u8 = u8::MAX;

/// A state of the rank-based complement: a level ranking and the set of
/// even-ranked states still owing a visit to an odd rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RankState {
    pub ranks: [u8; MAX_COMPLEMENT_STATES],
    pub owing: u32,
}

/// Rank-based complement of a small NBA, explored on the fly.
#[derive(Clone, Debug, Serialize)]
pub struct NbaComplement {
    pub nba: Nba,
    pub max_rank: u8,
}

pub fn complement_small_nba(nba: &Nba) -> Result<NbaComplement, AutomataError> {
    if nba.states > MAX_COMPLEMENT_STATES {
        return Err(AutomataError::TooLarge(nba.states, MAX_COMPLEMENT_STATES));
    }
    Ok(NbaComplement { nba: nba.clone(), max_rank: 2 * nba.states as u8 })
}

impl NbaComplement {
    pub fn with_max_rank(mut self, max_rank: u8) -> Self {
        self.max_rank = max_rank.min(NO_RANK - 1);
        self
    }

    /// Largest rank `q` may take under `bound`: even for accepting states,
    /// otherwise odd when possible.
    fn top_rank(&self, q: usize, bound: u8) -> u8 {
        if self.nba.accepting[q] {
            bound - bound % 2
        } else if bound % 2 == 1 || bound == 0 {
            bound
        } else {
            bound - 1
        }
    }

    pub fn initial(&self) -> RankState {
        let mut ranks = [NO_RANK; MAX_COMPLEMENT_STATES];
        for &q in &self.nba.initial {
            ranks[q] = self.top_rank(q, self.max_rank);
        }
        let owing = even_set(&ranks);
        RankState { ranks, owing }
    }

    pub fn is_accepting(&self, s: &RankState) -> bool {
        s.owing == 0
    }

    /// Upper bound for each successor state: the least rank among predecessors.
    fn bounds(&self, s: &RankState, a: usize) -> [u8; MAX_COMPLEMENT_STATES] {
        let mut bound = [NO_RANK; MAX_COMPLEMENT_STATES];
        for (q, &r) in s.ranks.iter().enumerate() {
            if r == NO_RANK {
                continue;
            }
            for &t in &self.nba.delta[q][a] {
                bound[t] = bound[t].min(r);
            }
        }
        bound
    }

    fn owing_after(&self, s: &RankState, a: usize, ranks: &[u8]) -> u32 {
        let even = even_set(ranks);
        if s.owing == 0 {
            return even;
        }
        let mut reach = 0u32;
        for q in 0..self.nba.states {
            if s.owing >> q & 1 == 1 {
                for &t in &self.nba.delta[q][a] {
                    reach |= 1 << t;
                }
            }
        }
        reach & even
    }

    /// The successor that gives every state the largest rank allowed. Accepting
    /// states take the largest even rank; the others the largest odd rank, or
    /// 0 when only 0 is left.
    pub fn canonical_successor(&self, s: &RankState, a: usize) -> RankState {
        let bound = self.bounds(s, a);
        let mut ranks = bound;
        for (q, r) in ranks.iter_mut().enumerate() {
            if *r != NO_RANK {
                *r = self.top_rank(q, *r);
            }
        }
        let owing = self.owing_after(s, a, &ranks);
        RankState { ranks, owing }
    }

    /// Every successor allowed by the construction.
    pub fn successors(&self, s: &RankState, a: usize) -> Vec<RankState> {
        let bound = self.bounds(s, a);
        let mut out = vec![[NO_RANK; MAX_COMPLEMENT_STATES]];
        for (q, &b) in bound.iter().enumerate() {
            if b == NO_RANK {
                continue;
            }
            let choices: Vec<u8> = (0..=b).filter(|r| !self.nba.accepting[q] || r % 2 == 0).collect();
            out = out
                .into_iter()
                .flat_map(|v| {
                    choices.iter().map(move |&r| {
                        let mut w = v;
                        w[q] = r;
                        w
                    })
                })
                .collect();
        }
        out.into_iter()
            .map(|ranks| {
                let owing = self.owing_after(s, a, &ranks);
                RankState { ranks, owing }
            })
            .collect()
    }

    pub fn accepts_lasso(&self, prefix: &[usize], cycle: &[usize]) -> bool {
        let mut cur: HashSet<RankState> = HashSet::from([self.initial()]);
        for &a in prefix {
            cur = cur.iter().flat_map(|s| self.successors(s, a)).collect();
        }
        lasso_accepts(
            cur.into_iter().map(|s| (s, 0)).collect(),
            |(s, i): &(RankState, usize)| {
                self.successors(s, cycle[*i]).into_iter().map(|t| (t, (i + 1) % cycle.len())).collect()
            },
            |(s, _)| self.is_accepting(s),
        )
    }

    /// Whether the canonical run on `prefix · cycle^ω` is accepting.
    pub fn canonical_accepts_lasso(&self, prefix: &[usize], cycle: &[usize]) -> bool {
        let mut s = self.initial();
        for &a in prefix {
            s = self.canonical_successor(&s, a);
        }
        lasso_accepts(
            vec![(s, 0)],
            |(s, i): &(RankState, usize)| vec![(self.canonical_successor(s, cycle[*i]), (i + 1) % cycle.len())],
            |(s, _)| self.is_accepting(s),
        )
    }

    /// The reachable part as an explicit NBA.
    pub fn to_nba(&self, cap: usize) -> Result<Nba, AutomataError> {
        let mut index: HashMap<RankState, usize> = HashMap::new();
        let mut states = vec![self.initial()];
        index.insert(states[0], 0);
        let mut edges: Vec<Vec<Vec<usize>>> = Vec::new();
        let mut i = 0;
        while i < states.len() {
            let mut row = Vec::with_capacity(self.nba.letters);
            for a in 0..self.nba.letters {
                let mut targets = Vec::new();
                for t in self.successors(&states[i], a) {
                    let j = match index.get(&t) {
                        Some(&j) => j,
                        None => {
                            if states.len() >= cap {
                                return Err(AutomataError::TooLarge(states.len() + 1, cap));
                            }
                            index.insert(t, states.len());
                            states.push(t);
                            states.len() - 1
                        }
                    };
                    targets.push(j);
                }
                row.push(targets);
            }
            edges.push(row);
            i += 1;
        }
        let mut out = Nba::new(states.len(), self.nba.letters);
        out.initial = vec![0];
        out.accepting = states.iter().map(|s| self.is_accepting(s)).collect();
        out.delta = edges;
        Ok(out)
    }
}

fn even_set(ranks: &[u8]) -> u32 {
    ranks
        .iter()
        .enumerate()
        .filter(|(_, &r)| r != NO_RANK && r % 2 == 0)
        .fold(0, |m, (q, _)| m | 1 << q)
}

/// Letters of `system` as the alphabet size used by automata.
pub fn action_count(system: &System) -> usize {
    system.actions.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const A: Option<ActionId> = Some(ActionId(0));
    const B: Option<ActionId> = Some(ActionId(1));

    /// "letter `l` occurs infinitely often on every path", over two actions.
    fn inf_often(l: Option<ActionId>) -> ParityNta {
        let mut n = ParityNta::new(2);
        let wait = n.add_state("wait", 1);
        let seen = n.add_state("seen", 2);
        for q in [wait, seen] {
            for letter in TreeLetter::alphabet(2) {
                let r = if letter.action == l { seen } else { wait };
                n.add_move(q, letter, all_to(letter, r));
            }
        }
        n
    }

    /// Single infinite path following `word` from its second letter on.
    fn accepts_path<A: TreeAutomaton>(aut: &A, cycle: &[Option<ActionId>]) -> bool {
        // states reachable along the path; Büchi condition via lasso search
        let start = vec![(aut.initial(), 0usize)];
        lasso_accepts(
            start,
            |(q, i): &(A::State, usize)| {
                aut.moves_on(q, TreeLetter::new(cycle[*i], 1))
                    .into_iter()
                    .filter_map(|s| match s {
                        Succ::One(r) => Some((r, (i + 1) % cycle.len())),
                        _ => None,
                    })
                    .collect()
            },
            |(q, _)| aut.priority(q) % 2 == 0,
        )
    }

    #[test]
    fn product_of_two_buchi() {
        let p = product(&[inf_often(A), inf_often(B)]).unwrap();
        assert!(accepts_path(&p, &[A, B]));
        assert!(!accepts_path(&p, &[A]));
        assert!(!accepts_path(&p, &[B]));
    }

    #[test]
    fn product_identity_and_idempotence() {
        let a = inf_often(A);
        let u = ParityNta::universal(2);
        let pu = product(&[a.clone(), u]).unwrap();
        let pa = product(&[a.clone(), a.clone()]).unwrap();
        for cycle in [vec![A], vec![B], vec![A, B], vec![B, B, A], vec![None, B]] {
            let want = accepts_path(&a, &cycle);
            assert_eq!(accepts_path(&pu, &cycle), want);
            assert_eq!(accepts_path(&pa, &cycle), want);
        }
    }

    #[test]
    fn mismatched_alphabets() {
        assert_eq!(
            product(&[ParityNta::universal(2), ParityNta::universal(3)]),
            Err(AutomataError::AlphabetMismatch(2, 3))
        );
    }

    #[test]
    fn buchi_times_parity_on_paths() {
        // objective: priority 2 on a, 1 on b; accepts paths with infinitely many a
        let mut obj = ParityNta::new(2);
        let qa = obj.add_state("a", 2);
        let qb = obj.add_state("b", 1);
        for q in [qa, qb] {
            for letter in TreeLetter::alphabet(2) {
                let r = if letter.action == A { qa } else { qb };
                obj.add_move(q, letter, all_to(letter, r));
            }
        }
        let buchi = inf_often(B);
        let lazy = BuchiTimesParity::new(&buchi, &obj);
        let explicit = buchi_times_parity(&buchi, &obj).unwrap();
        for cycle in [vec![A], vec![B], vec![A, B], vec![A, A, B], vec![None]] {
            let want = accepts_path(&buchi, &cycle) && accepts_path(&obj, &cycle);
            assert_eq!(accepts_path(&lazy, &cycle), want, "{cycle:?}");
            assert_eq!(accepts_path(&explicit, &cycle), want, "{cycle:?}");
        }
        let u = ParityNta::universal(2);
        for cycle in [vec![A], vec![B], vec![A, B]] {
            assert_eq!(accepts_path(&BuchiTimesParity::new(&u, &obj), &cycle), accepts_path(&obj, &cycle));
            assert_eq!(accepts_path(&BuchiTimesParity::new(&buchi, &u), &cycle), accepts_path(&buchi, &cycle));
        }
    }

    #[test]
    fn finite_trees() {
        let t = LetterTree::build(|t| {
            let l = t.add(A, vec![]);
            let r = t.add(None, vec![]);
            let s = t.add(B, vec![l, r]);
            t.add(None, vec![s])
        });
        assert_eq!(t.letters[0], TreeLetter::new(None, 1));
        assert!(accepts_finite_tree(&ParityNta::universal(2), &t));
        let mut no_top = ParityNta::new(2);
        let q = no_top.add_state("q", 2);
        for l in TreeLetter::alphabet(2).filter(|l| l.branching > 0) {
            no_top.add_move(q, l, all_to(l, q));
        }
        assert!(!accepts_finite_tree(&no_top, &t));
    }

    fn inf_a_nba() -> Nba {
        let mut n = Nba::new(2, 2);
        n.initial = vec![0];
        n.accepting[1] = true;
        for q in 0..2 {
            n.add(q, 0, 1);
            n.add(q, 1, 0);
        }
        n
    }

    #[test]
    fn complement_infinitely_many_a() {
        let c = complement_small_nba(&inf_a_nba()).unwrap();
        assert!(c.accepts_lasso(&[], &[1]));
        assert!(!c.accepts_lasso(&[], &[0, 1]));
        assert!(c.accepts_lasso(&[0, 0], &[1]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let p: Vec<usize> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..2)).collect();
            let cy: Vec<usize> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..2)).collect();
            assert_ne!(inf_a_nba().accepts_lasso(&p, &cy), c.accepts_lasso(&p, &cy));
            if c.canonical_accepts_lasso(&p, &cy) {
                assert!(!inf_a_nba().accepts_lasso(&p, &cy));
            }
        }
    }

    #[test]
    fn complement_extremes() {
        let mut empty = Nba::new(1, 2);
        empty.initial = vec![0];
        let mut univ = Nba::new(1, 2);
        univ.initial = vec![0];
        univ.accepting[0] = true;
        univ.add(0, 0, 0);
        univ.add(0, 1, 0);
        let ce = complement_small_nba(&empty).unwrap();
        let cu = complement_small_nba(&univ).unwrap();
        for cycle in [vec![0], vec![1], vec![0, 1]] {
            assert!(ce.accepts_lasso(&[1], &cycle));
            assert!(!cu.accepts_lasso(&[1], &cycle));
        }
        assert_eq!(complement_small_nba(&Nba::new(13, 1)).unwrap_err(), AutomataError::TooLarge(13, 12));
    }

    #[test]
    fn complement_as_explicit_nba() {
        let c = complement_small_nba(&inf_a_nba()).unwrap();
        let e = c.to_nba(10_000).unwrap();
        assert!(e.accepts_lasso(&[], &[1]));
        assert!(!e.accepts_lasso(&[], &[1, 0]));
    }
}
