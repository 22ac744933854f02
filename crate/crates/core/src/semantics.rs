//! Configuration trees, transitions, runs and fairness.
//!
//! A node stores its process, state and the action that created it. Lock maps
//! and held sets are derived from those labels when a node is added, so every
//! tree built here, sound or not, carries consistent `L` and `H` labels.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{ActionId, Operation, ProcId, Source, StackInstr, StackSym, StateId, System, Transition, Var};

/// Node address, a word over {0, 1}.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Addr(pub Vec<u8>);

impl Addr {
    pub fn root() -> Self {
        Addr(Vec::new())
    }

    pub fn child(&self, d: u8) -> Self {
        let mut v = self.0.clone();
        v.push(d);
        Addr(v)
    }

    pub fn is_prefix_of(&self, other: &Addr) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for Addr {
    type Err = SemanticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ε" || s == "e" || s == "-" {
            return Ok(Addr::root());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(SemanticsError::BadAddress(s.to_string())),
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(Addr)
    }
}

/// A lock, minted at spawn node `origin` for child variable `var`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LockId {
    pub origin: Addr,
    pub var: Var,
}

impl fmt::Display for LockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l[{},y{}]", self.origin, self.var.0 as usize + 1)
    }
}

/// Index of a lock in the tree's lock table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LockRef(pub u32);

pub type NodeIdx = usize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Node {
    pub addr: Addr,
    pub process: ProcId,
    pub state: StateId,
    /// `None` for roots of local runs.
    pub action: Option<ActionId>,
    pub lockmap: Vec<LockRef>,
    /// Locks held by this process after `action`, sorted.
    pub held: Vec<LockRef>,
    /// Stack contents, bottom first; empty for finite-state processes.
    pub stack: Vec<StackSym>,
    pub parent: Option<NodeIdx>,
    pub children: [Option<NodeIdx>; 2],
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children[0].is_none()
    }

    pub fn holds(&self, l: LockRef) -> bool {
        self.held.binary_search(&l).is_ok()
    }

    pub fn holds_var(&self, x: Var) -> bool {
        self.holds(self.lockmap[x.0 as usize])
    }

    pub fn lock(&self, x: Var) -> LockRef {
        self.lockmap[x.0 as usize]
    }

    pub fn var_of(&self, l: LockRef) -> Option<Var> {
        self.lockmap.iter().position(|&m| m == l).map(|i| Var(i as u8))
    }

    pub fn top(&self) -> Option<StackSym> {
        self.stack.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("action {action} is not enabled at {addr}")]
    NotEnabled { addr: Addr, action: String },
    #[error("no transition for action {action} at {addr}")]
    NoTransition { addr: Addr, action: String },
    #[error("no node at address {0}")]
    UnknownNode(Addr),
    #[error("node {0} is not a leaf")]
    NotALeaf(Addr),
    #[error("bad address `{0}`")]
    BadAddress(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("trace line {line}: {message}")]
    BadTrace { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigTree {
    pub nodes: Vec<Node>,
    pub locks: Vec<LockId>,
}

impl ConfigTree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: NodeIdx) -> &Node {
        &self.nodes[i]
    }

    pub fn find(&self, addr: &Addr) -> Option<NodeIdx> {
        let mut cur = 0;
        for &d in &addr.0 {
            cur = self.nodes[cur].children[d as usize]?;
        }
        Some(cur)
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.nodes[i].is_leaf())
    }

    pub fn lock_id(&self, l: LockRef) -> &LockId {
        &self.locks[l.0 as usize]
    }

    pub fn lock_ref(&self, id: &LockId) -> Option<LockRef> {
        self.locks.iter().position(|l| l == id).map(|i| LockRef(i as u32))
    }

    /// Nodes in preorder (left before right).
    pub fn preorder(&self) -> Vec<NodeIdx> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            out.push(n);
            let [l, r] = self.nodes[n].children;
            stack.extend(r);
            stack.extend(l);
        }
        out
    }

    /// Nodes below `n` on its leftmost path, excluding `n`.
    pub fn leftmost_below(&self, n: NodeIdx) -> impl Iterator<Item = NodeIdx> + '_ {
        std::iter::successors(self.nodes[n].children[0], move |&m| self.nodes[m].children[0])
    }

    pub fn is_ancestor(&self, a: NodeIdx, b: NodeIdx) -> bool {
        let (a, b) = (&self.nodes[a].addr, &self.nodes[b].addr);
        a.0.len() < b.0.len() && a.is_prefix_of(b)
    }

    /// `H(τ)`: union of the held sets at the leaves.
    pub fn held_union(&self) -> BTreeSet<LockRef> {
        self.leaves().flat_map(|l| self.nodes[l].held.iter().copied()).collect()
    }

    /// Preorder encoding of (action, child mask); process, state, locks and
    /// stacks are determined by it.
    pub fn canonical_key(&self) -> Vec<u32> {
        self.preorder()
            .into_iter()
            .map(|n| {
                let node = &self.nodes[n];
                let a = node.action.map_or(0, |a| a.0 + 1);
                let mask = node.children[0].is_some() as u32 | (node.children[1].is_some() as u32) << 1;
                a << 2 | mask
            })
            .collect()
    }

    fn push_node(&mut self, node: Node) -> NodeIdx {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn mint(&mut self, id: LockId) -> LockRef {
        self.locks.push(id);
        LockRef(self.locks.len() as u32 - 1)
    }

    /// Adds the children created by `t` at `leaf`, without checking lock
    /// availability. Held sets are updated as sets, so unsound trees stay
    /// representable.
    pub fn extend_unchecked(&mut self, system: &System, leaf: NodeIdx, t: &Transition) {
        debug_assert!(self.nodes[leaf].is_leaf());
        let parent = &self.nodes[leaf];
        let op = system.op(t.action).clone();
        let mut held = parent.held.clone();
        let lockmap = parent.lockmap.clone();
        let mut stack = parent.stack.clone();
        match t.instr {
            StackInstr::Skip => {}
            StackInstr::Pop => {
                stack.pop();
            }
            StackInstr::Push(g) => stack.push(g),
        }
        match op {
            Operation::Get(x) => {
                let l = lockmap[x.0 as usize];
                if let Err(i) = held.binary_search(&l) {
                    held.insert(i, l);
                }
            }
            Operation::Rel(x) => {
                let l = lockmap[x.0 as usize];
                if let Ok(i) = held.binary_search(&l) {
                    held.remove(i);
                }
            }
            _ => {}
        }
        let addr = parent.addr.clone();
        let process = parent.process;
        let left = Node {
            addr: addr.child(0),
            process,
            state: t.to,
            action: Some(t.action),
            lockmap: lockmap.clone(),
            held,
            stack,
            parent: Some(leaf),
            children: [None, None],
        };
        let li = self.push_node(left);
        self.nodes[leaf].children[0] = Some(li);
        if let Operation::Spawn { target, subst } = op {
            let q = system.process(target);
            let child_map: Vec<LockRef> = subst
                .iter()
                .enumerate()
                .map(|(y, s)| match s {
                    Source::Parent(x) => lockmap[x.0 as usize],
                    Source::New => self.mint(LockId { origin: addr.clone(), var: Var(y as u8) }),
                })
                .collect();
            let right = Node {
                addr: addr.child(1),
                process: target,
                state: q.init,
                action: None,
                lockmap: child_map,
                held: Vec::new(),
                stack: if q.is_pushdown() { vec![StackSym::BOTTOM] } else { Vec::new() },
                parent: Some(leaf),
                children: [None, None],
            };
            let ri = self.push_node(right);
            self.nodes[leaf].children[1] = Some(ri);
        }
    }

    /// Transitions of δ available at a leaf, ignoring locks but respecting stack guards.
    pub fn structural_moves<'a>(&'a self, system: &'a System, leaf: NodeIdx) -> impl Iterator<Item = &'a Transition> + 'a {
        let node = &self.nodes[leaf];
        let decl = system.process(node.process);
        let pd = decl.is_pushdown();
        let top = node.top();
        decl.outgoing(node.state).filter(move |t| {
            if !pd {
                return true;
            }
            if t.top.is_some() && t.top != top {
                return false;
            }
            !(t.instr == StackInstr::Pop && top == Some(StackSym::BOTTOM))
        })
    }

    pub fn to_dot(&self, system: &System) -> String {
        let mut s = String::from("digraph config {\n  node [shape=box, fontname=monospace];\n");
        for n in &self.nodes {
            let p = system.process(n.process);
            let act = n.action.map_or("⊥".to_string(), |a| system.action(a).local_name().to_string());
            let held: Vec<String> = n.held.iter().map(|l| self.lock_id(*l).to_string()).collect();
            s += &format!(
                "  \"{}\" [label=\"{}\\n{} {} {}\\nH={{{}}}\"];\n",
                n.addr,
                n.addr,
                p.name,
                p.state_name(n.state),
                act,
                held.join(",")
            );
            for c in n.children.iter().flatten() {
                s += &format!("  \"{}\" -> \"{}\";\n", n.addr, self.nodes[*c].addr);
            }
        }
        s.push_str("}\n");
        s
    }
}

pub fn initial_config(system: &System) -> ConfigTree {
    let p = system.process(system.initial);
    ConfigTree {
        nodes: vec![Node {
            addr: Addr::root(),
            process: system.initial,
            state: p.init,
            action: None,
            lockmap: Vec::new(),
            held: Vec::new(),
            stack: if p.is_pushdown() { vec![StackSym::BOTTOM] } else { Vec::new() },
            parent: None,
            children: [None, None],
        }],
        locks: Vec::new(),
    }
}

pub fn ultimately_held(tree: &ConfigTree) -> BTreeSet<LockId> {
    tree.held_union().into_iter().map(|l| tree.lock_id(l).clone()).collect()
}

/// Whether `t` may fire at `leaf` given `H(τ)`.
fn lock_allows(system: &System, tree: &ConfigTree, leaf: NodeIdx, t: &Transition, union: &BTreeSet<LockRef>) -> bool {
    let node = tree.node(leaf);
    match system.op(t.action) {
        Operation::Get(x) => !union.contains(&node.lock(*x)),
        Operation::Rel(x) => node.holds_var(*x),
        _ => true,
    }
}

pub fn enabled(system: &System, tree: &ConfigTree) -> Vec<(NodeIdx, ActionId)> {
    let union = tree.held_union();
    let mut out = Vec::new();
    for leaf in tree.leaves() {
        for t in tree.structural_moves(system, leaf) {
            if lock_allows(system, tree, leaf, t, &union) {
                out.push((leaf, t.action));
            }
        }
    }
    out
}

fn find_transition<'a>(system: &'a System, tree: &'a ConfigTree, leaf: NodeIdx, action: ActionId) -> Option<&'a Transition> {
    tree.structural_moves(system, leaf).find(|t| t.action == action)
}

/// Executes `action` at `leaf` in place.
pub fn step_mut(system: &System, tree: &mut ConfigTree, leaf: NodeIdx, action: ActionId) -> Result<(), SemanticsError> {
    let node = tree.nodes.get(leaf).ok_or(SemanticsError::UnknownNode(Addr::root()))?;
    let err = |tree: &ConfigTree| SemanticsError::NotEnabled {
        addr: tree.nodes[leaf].addr.clone(),
        action: system.action(action).name.clone(),
    };
    if !node.is_leaf() {
        return Err(SemanticsError::NotALeaf(node.addr.clone()));
    }
    let t = find_transition(system, tree, leaf, action).ok_or_else(|| err(tree))?.clone();
    if !lock_allows(system, tree, leaf, &t, &tree.held_union()) {
        return Err(err(tree));
    }
    tree.extend_unchecked(system, leaf, &t);
    debug_assert!(lockmaps_injective(tree));
    Ok(())
}

pub fn step(system: &System, tree: &ConfigTree, leaf: NodeIdx, action: ActionId) -> Result<ConfigTree, SemanticsError> {
    let mut t = tree.clone();
    step_mut(system, &mut t, leaf, action)?;
    Ok(t)
}

pub fn is_fair(system: &System, tree: &ConfigTree) -> bool {
    enabled(system, tree).is_empty()
}

pub fn lockmaps_injective(tree: &ConfigTree) -> bool {
    tree.nodes.iter().all(|n| {
        let s: HashSet<_> = n.lockmap.iter().collect();
        s.len() == n.lockmap.len()
    })
}

/// Rebuilds the tree from its (process, state, action) labels alone and
/// compares the derived lock maps and held sets.
pub fn recompute_matches(system: &System, tree: &ConfigTree) -> bool {
    let Some(r) = rebuild(system, &tree.canonical_key()) else {
        return false;
    };
    let locks = |t: &ConfigTree, v: &[LockRef]| -> Vec<LockId> { v.iter().map(|l| t.lock_id(*l).clone()).collect() };
    tree.nodes.iter().all(|n| {
        let Some(m) = r.find(&n.addr) else { return false };
        let m = r.node(m);
        n.process == m.process
            && n.state == m.state
            && n.action == m.action
            && n.stack == m.stack
            && locks(tree, &n.lockmap) == locks(&r, &m.lockmap)
            && locks(tree, &n.held).into_iter().collect::<BTreeSet<_>>()
                == locks(&r, &m.held).into_iter().collect::<BTreeSet<_>>()
    })
}

/// Inverse of `canonical_key`: replays the encoded shape from the initial configuration.
pub fn rebuild(system: &System, key: &[u32]) -> Option<ConfigTree> {
    let mut tree = initial_config(system);
    let mut pos = 0;
    let mut todo = vec![0usize];
    while let Some(n) = todo.pop() {
        let code = *key.get(pos)?;
        pos += 1;
        let mask = code & 3;
        if mask == 0 {
            continue;
        }
        let node_code = |i: usize| key.get(i).map(|c| c >> 2);
        let a = node_code(pos)?.checked_sub(1)?;
        let action = ActionId(a);
        let t = find_transition(system, &tree, n, action)?.clone();
        let spawns = system.op(action).is_spawn();
        if spawns != (mask == 3) || mask == 2 {
            return None;
        }
        tree.extend_unchecked(system, n, &t);
        let [l, r] = tree.nodes[n].children;
        todo.extend(r);
        todo.extend(l);
    }
    (pos == key.len()).then_some(tree)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Event {
    pub addr: Addr,
    pub action: ActionId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Run {
    pub events: Vec<Event>,
}

impl Run {
    pub fn replay(&self, system: &System) -> Result<ConfigTree, SemanticsError> {
        let mut tree = initial_config(system);
        for e in &self.events {
            let n = tree.find(&e.addr).ok_or_else(|| SemanticsError::UnknownNode(e.addr.clone()))?;
            step_mut(system, &mut tree, n, e.action)?;
        }
        Ok(tree)
    }

    pub fn to_trace(&self, system: &System) -> String {
        self.events.iter().map(|e| format!("{} {}\n", e.addr, system.action(e.action).name)).collect()
    }

    pub fn parse_trace(system: &System, text: &str) -> Result<Run, SemanticsError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: String| SemanticsError::BadTrace { line: i + 1, message: m };
            let mut it = line.split_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(bad("expected `ADDRESS ACTION`".into()));
            };
            let addr: Addr = a.parse().map_err(|e: SemanticsError| bad(e.to_string()))?;
            let action = system.action_id(b).ok_or_else(|| bad(format!("unknown action {b}")))?;
            events.push(Event { addr, action });
        }
        Ok(Run { events })
    }
}

pub fn check_strong_fairness(system: &System, run: &Run) -> Result<bool, SemanticsError> {
    Ok(is_fair(system, &run.replay(system)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheduler {
    Random(u64),
    RoundRobin,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub run: Run,
    pub tree: ConfigTree,
    pub fair: bool,
    pub bound_hit: bool,
}

pub fn simulate(system: &System, scheduler: Scheduler, max_steps: usize) -> Simulation {
    let mut tree = initial_config(system);
    let mut run = Run::default();
    let mut rng = match scheduler {
        Scheduler::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Scheduler::RoundRobin => None,
    };
    let mut turn = 0usize;
    loop {
        let en = enabled(system, &tree);
        if en.is_empty() {
            return Simulation { run, tree, fair: true, bound_hit: false };
        }
        if run.events.len() >= max_steps {
            return Simulation { run, tree, fair: false, bound_hit: true };
        }
        let (leaf, action) = match rng.as_mut() {
            Some(r) => *en.choose(r).unwrap(),
            None => {
                // leaves by address; the next leaf after the previous turn moves
                let mut leaves: Vec<NodeIdx> = en.iter().map(|e| e.0).collect();
                leaves.dedup();
                leaves.sort_by(|a, b| tree.node(*a).addr.cmp(&tree.node(*b).addr));
                leaves.dedup();
                let leaf = leaves[turn % leaves.len()];
                turn += 1;
                *en.iter().find(|e| e.0 == leaf).unwrap()
            }
        };
        run.events.push(Event { addr: tree.node(leaf).addr.clone(), action });
        step_mut(system, &mut tree, leaf, action).expect("enabled action must step");
    }
}

#[derive(Debug, Clone, Error)]
#[error("enumeration budget of {budget} configurations exceeded ({} fair limits found so far)", partial.len())]
pub struct EnumerationBudget {
    pub budget: usize,
    pub partial: Vec<ConfigTree>,
}

pub const DEFAULT_ENUMERATION_BUDGET: usize = 2_000_000;

/// All fair finite configurations with at most `max_nodes` nodes reachable
/// from the initial configuration, sorted by canonical key.
pub fn enumerate_fair_finite_limits(system: &System, max_nodes: usize) -> Result<Vec<ConfigTree>, EnumerationBudget> {
    enumerate_fair_finite_limits_with_budget(system, max_nodes, DEFAULT_ENUMERATION_BUDGET)
}

/// Expands only one process whenever some leaf has no `get` among its moves:
/// such moves commute with every move of the other processes and stay
/// enabled, so every reachable terminal configuration is still reached.
pub fn enumerate_fair_finite_limits_with_budget(
    system: &System,
    max_nodes: usize,
    budget: usize,
) -> Result<Vec<ConfigTree>, EnumerationBudget> {
    enumerate_terminal(system, max_nodes, budget, true)
}

/// The same set as [`enumerate_fair_finite_limits_with_budget`], exploring
/// every interleaving.
pub fn enumerate_fair_finite_limits_exhaustive(
    system: &System,
    max_nodes: usize,
    budget: usize,
) -> Result<Vec<ConfigTree>, EnumerationBudget> {
    enumerate_terminal(system, max_nodes, budget, false)
}

/// Enabled moves of a leaf whose moves never acquire a lock, if any.
fn persistent_moves(system: &System, tree: &ConfigTree, en: &[(NodeIdx, ActionId)]) -> Option<Vec<(NodeIdx, ActionId)>> {
    let (leaf, _) = *en.iter().find(|&&(leaf, _)| {
        tree.structural_moves(system, leaf).all(|t| !matches!(system.op(t.action), Operation::Get(_)))
    })?;
    Some(en.iter().copied().filter(|&(l, _)| l == leaf).collect())
}

fn enumerate_terminal(
    system: &System,
    max_nodes: usize,
    budget: usize,
    reduce: bool,
) -> Result<Vec<ConfigTree>, EnumerationBudget> {
    let init = initial_config(system);
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    seen.insert(init.canonical_key());
    let mut stack = vec![init];
    let mut fair: Vec<(Vec<u32>, ConfigTree)> = Vec::new();
    while let Some(tree) = stack.pop() {
        let en = enabled(system, &tree);
        if en.is_empty() {
            fair.push((tree.canonical_key(), tree));
            continue;
        }
        let en = if reduce { persistent_moves(system, &tree, &en).unwrap_or(en) } else { en };
        for (leaf, action) in en {
            let grow = if system.op(action).is_spawn() { 2 } else { 1 };
            if tree.len() + grow > max_nodes {
                continue;
            }
            let next = step(system, &tree, leaf, action).expect("enabled");
            if seen.insert(next.canonical_key()) {
                if seen.len() > budget {
                    fair.sort_by(|a, b| a.0.cmp(&b.0));
                    return Err(EnumerationBudget { budget, partial: fair.into_iter().map(|x| x.1).collect() });
                }
                stack.push(next);
            }
        }
    }
    fair.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(fair.into_iter().map(|x| x.1).collect())
}

/// Every tree with at most `max_nodes` nodes whose labels follow δ, ignoring
/// locks. Used to test that the limit conditions reject exactly the trees
/// that are not fair limits. Returns `None` when more than `cap` trees exist.
pub fn enumerate_delta_trees(system: &System, max_nodes: usize, cap: usize) -> Option<Vec<ConfigTree>> {
    let init = initial_config(system);
    let mut seen: HashMap<Vec<u32>, ()> = HashMap::new();
    seen.insert(init.canonical_key(), ());
    let mut stack = vec![init];
    let mut out = Vec::new();
    while let Some(tree) = stack.pop() {
        let leaves: Vec<NodeIdx> = tree.leaves().collect();
        for leaf in leaves {
            let moves: Vec<Transition> = tree.structural_moves(system, leaf).cloned().collect();
            for t in moves {
                let grow = if system.op(t.action).is_spawn() { 2 } else { 1 };
                if tree.len() + grow > max_nodes {
                    continue;
                }
                let mut next = tree.clone();
                next.extend_unchecked(system, leaf, &t);
                if seen.insert(next.canonical_key(), ()).is_none() {
                    if seen.len() > cap {
                        return None;
                    }
                    stack.push(next);
                }
            }
        }
        out.push(tree);
    }
    out.sort_by_key(|t| t.canonical_key());
    Some(out)
}

/// Structural equality of configurations, independent of node numbering.
pub fn same_config(a: &ConfigTree, b: &ConfigTree) -> bool {
    a.canonical_key() == b.canonical_key()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_system;

    fn phil() -> System {
        parse_system(include_str!("../../../corpus/philosophers.dlss")).unwrap()
    }

    fn ring2() -> System {
        parse_system(include_str!("../../../corpus/philosophers_ring2.dlss")).unwrap()
    }

    fn act(s: &System, n: &str) -> ActionId {
        s.action_id(n).unwrap()
    }

    pub(crate) fn deadlock_run(s: &System) -> Run {
        let text = "ε p_init.start\n1 first.phil\n10 first.next\n11 phil.getl\n101 next.close\n1011 phil.getl\n";
        Run::parse_trace(s, text).unwrap()
    }

    #[test]
    fn initial_config_is_root() {
        let s = phil();
        let t = initial_config(&s);
        assert_eq!(t.len(), 1);
        let r = t.root();
        assert_eq!(s.process(r.process).name, "p_init");
        assert_eq!(s.process(r.process).state_name(r.state), "s0");
        assert!(r.action.is_none() && r.lockmap.is_empty() && r.held.is_empty());
        assert!(ultimately_held(&t).is_empty());
        assert!(!is_fair(&s, &t));
        assert_eq!(enabled(&s, &t), vec![(0, act(&s, "p_init.start"))]);
    }

    #[test]
    fn first_spawn_mints_two_locks() {
        let s = phil();
        let t = step(&s, &initial_config(&s), 0, act(&s, "p_init.start")).unwrap();
        assert_eq!(t.len(), 3);
        let right = t.find(&"1".parse().unwrap()).unwrap();
        let m = &t.node(right).lockmap;
        assert_eq!(m.len(), 2);
        assert_ne!(m[0], m[1]);
    }

    #[test]
    fn ring2_deadlock() {
        let s = ring2();
        let t = deadlock_run(&s).replay(&s).unwrap();
        assert_eq!(ultimately_held(&t).len(), 2);
        assert!(is_fair(&s, &t));
        assert!(check_strong_fairness(&s, &deadlock_run(&s)).unwrap());
        assert!(recompute_matches(&s, &t));
        let all = enumerate_fair_finite_limits(&s, 40).unwrap();
        assert!(all.iter().any(|f| same_config(f, &t)));
    }

    #[test]
    fn get_then_rel_restores_held() {
        let s = ring2();
        let text = "ε p_init.start\n1 first.phil\n11 phil.getl\n110 phil.getr\n1100 phil.eat\n11000 phil.relr\n";
        let t = Run::parse_trace(&s, text).unwrap().replay(&s).unwrap();
        let n = t.find(&"11000".parse().unwrap()).unwrap();
        let before = t.find(&"110".parse().unwrap()).unwrap();
        let after = t.node(t.leftmost_below(n).next().unwrap());
        assert_eq!(after.held, t.node(before).held);
    }

    #[test]
    fn blocked_get_not_enabled() {
        let s = parse_system(
            "system t process p_init arity 0 init a { a -s-> b spawn q(new) }\n\
             process q arity 1 init a { a -g-> b get x1 b -g2-> c get x1 }",
        )
        .unwrap();
        let run = Run::parse_trace(&s, "ε p_init.s\n1 q.g\n").unwrap();
        let t = run.replay(&s).unwrap();
        assert_eq!(ultimately_held(&t).len(), 1);
        assert!(enabled(&s, &t).is_empty());
        let leaf = t.find(&"10".parse().unwrap()).unwrap();
        assert!(matches!(step(&s, &t, leaf, act(&s, "q.g2")), Err(SemanticsError::NotEnabled { .. })));
    }

    #[test]
    fn stuck_and_loop_systems() {
        let stuck = parse_system("system t process p_init arity 0 init s { }").unwrap();
        let sim = simulate(&stuck, Scheduler::Random(1), 10);
        assert!(sim.fair && sim.run.events.is_empty());
        assert_eq!(enumerate_fair_finite_limits(&stuck, 10).unwrap().len(), 1);
        assert!(check_strong_fairness(&stuck, &Run::default()).unwrap());

        let lp = parse_system("system t process p_init arity 0 init s { s -n-> s nop }").unwrap();
        let sim = simulate(&lp, Scheduler::RoundRobin, 50);
        assert!(sim.bound_hit && !sim.fair);
        assert!(enumerate_fair_finite_limits(&lp, 20).unwrap().is_empty());
    }

    #[test]
    fn simulate_is_deterministic() {
        let s = phil();
        let a = simulate(&s, Scheduler::Random(7), 10_000);
        let b = simulate(&s, Scheduler::Random(7), 10_000);
        assert_eq!(a.run, b.run);
        assert!(a.fair || a.bound_hit);
        assert_eq!(a.run.replay(&s).unwrap(), a.tree);
    }

    #[test]
    fn rebuild_inverts_key() {
        let s = ring2();
        for t in enumerate_fair_finite_limits(&s, 20).unwrap() {
            let r = rebuild(&s, &t.canonical_key()).unwrap();
            assert!(same_config(&r, &t));
        }
    }
}
