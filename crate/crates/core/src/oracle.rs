//! Direct checks of the limit conditions on finite configuration trees.
//!
//! Everything here works on an explicit tree and serves as ground truth for
//! the automaton construction in [`crate::limitaut`].

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{Operation, System, Var, VarSet};
use crate::semantics::{ConfigTree, LockId, LockRef, NodeIdx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Color {
    Keeps,
    EvKeeps,
    Avoids,
    EvAvoids,
    Uncolored,
}

impl Color {
    pub const ALL: [Color; 5] = [Color::Keeps, Color::EvKeeps, Color::Avoids, Color::EvAvoids, Color::Uncolored];

    pub fn is_eventual(self) -> bool {
        matches!(self, Color::EvKeeps | Color::EvAvoids)
    }

    /// Avoids now or on every path later.
    pub fn avoiding(self) -> bool {
        matches!(self, Color::Avoids | Color::EvAvoids)
    }

    pub fn short(self) -> &'static str {
        match self {
            Color::Keeps => "K",
            Color::EvKeeps => "EK",
            Color::Avoids => "A",
            Color::EvAvoids => "EA",
            Color::Uncolored => "U",
        }
    }
}

/// Colors per node (indexed like `tree.nodes`) and variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Coloring(pub Vec<Vec<Color>>);

impl Coloring {
    pub fn get(&self, n: NodeIdx, x: Var) -> Color {
        self.0[n][x.0 as usize]
    }
}

/// `H^s` per node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HsLabeling(pub Vec<VarSet>);

/// Per node, the ordered variables from smallest to largest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderLabeling(pub Vec<Vec<Var>>);

impl OrderLabeling {
    fn less(&self, n: NodeIdx, a: Var, b: Var) -> bool {
        let o = &self.0[n];
        match (o.iter().position(|v| *v == a), o.iter().position(|v| *v == b)) {
            (Some(i), Some(j)) => i < j,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("unknown lock {0}")]
    UnknownLock(String),
}

/// Nodes whose lock map contains `lock`.
pub fn lock_scope(tree: &ConfigTree, lock: &LockId) -> Result<Vec<NodeIdx>, OracleError> {
    let l = tree.lock_ref(lock).ok_or_else(|| OracleError::UnknownLock(lock.to_string()))?;
    Ok(scope_of(tree, l))
}

fn scope_of(tree: &ConfigTree, l: LockRef) -> Vec<NodeIdx> {
    tree.preorder().into_iter().filter(|&n| tree.node(n).lockmap.contains(&l)).collect()
}

/// Whether `nodes` is a subtree: one top node, and each other node's parent is in the set.
pub fn is_subtree(tree: &ConfigTree, nodes: &[NodeIdx]) -> bool {
    let set: BTreeSet<_> = nodes.iter().copied().collect();
    let tops = nodes
        .iter()
        .filter(|&&n| tree.node(n).parent.is_none_or(|p| !set.contains(&p)))
        .count();
    nodes.is_empty() || tops == 1
}

fn operated_var(system: &System, tree: &ConfigTree, n: NodeIdx) -> Option<(bool, Var)> {
    match system.op(tree.node(n).action?) {
        Operation::Get(x) => Some((true, *x)),
        Operation::Rel(x) => Some((false, *x)),
        _ => None,
    }
}

/// Nodes labeled `get x` with no `rel x` later on their leftmost path.
pub fn unmatched_gets(system: &System, tree: &ConfigTree) -> Vec<(NodeIdx, Var)> {
    tree.preorder()
        .into_iter()
        .filter_map(|n| match operated_var(system, tree, n) {
            Some((true, x)) => {
                let released = tree.leftmost_below(n).any(|m| operated_var(system, tree, m) == Some((false, x)));
                (!released).then_some((n, x))
            }
            _ => None,
        })
        .collect()
}

/// `ℓ ≺_H ℓ'`: an unmatched get of ℓ is a proper ancestor of a get of ℓ', both in `H(τ)`.
pub fn holds_relation(system: &System, tree: &ConfigTree) -> BTreeSet<(LockId, LockId)> {
    let union = tree.held_union();
    let gets: Vec<(NodeIdx, LockRef)> = tree
        .preorder()
        .into_iter()
        .filter_map(|n| match operated_var(system, tree, n) {
            Some((true, x)) => Some((n, tree.node(n).lock(x))),
            _ => None,
        })
        .collect();
    let mut rel = BTreeSet::new();
    for (n, x) in unmatched_gets(system, tree) {
        let l = tree.node(n).lock(x);
        for &(m, l2) in &gets {
            if tree.is_ancestor(n, m) && union.contains(&l) && union.contains(&l2) {
                rel.insert((tree.lock_id(l).clone(), tree.lock_id(l2).clone()));
            }
        }
    }
    rel
}

fn has_cycle(rel: &BTreeSet<(LockId, LockId)>) -> bool {
    topo_sort(rel, &BTreeSet::new()).is_none()
}

/// Topological order of `extra ∪ nodes of rel`, smallest `LockId` first among ready nodes.
fn topo_sort(rel: &BTreeSet<(LockId, LockId)>, extra: &BTreeSet<LockId>) -> Option<Vec<LockId>> {
    let mut nodes: BTreeSet<LockId> = extra.clone();
    for (a, b) in rel {
        nodes.insert(a.clone());
        nodes.insert(b.clone());
    }
    let mut indeg: BTreeMap<LockId, usize> = nodes.iter().map(|n| (n.clone(), 0)).collect();
    for (_, b) in rel {
        *indeg.get_mut(b).unwrap() += 1;
    }
    let mut ready: BTreeSet<LockId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| n.clone()).collect();
    let mut out = Vec::new();
    while let Some(n) = ready.pop_first() {
        for (a, b) in rel.range((n.clone(), LockId { origin: Default::default(), var: Var(0) })..) {
            if *a != n {
                break;
            }
            let d = indeg.get_mut(b).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(b.clone());
            }
        }
        out.push(n);
    }
    (out.len() == nodes.len()).then_some(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FVerdict {
    pub f1: bool,
    pub f2: bool,
    pub f3: bool,
    pub f4: bool,
    pub f5: bool,
}

impl FVerdict {
    pub fn all(&self) -> bool {
        self.f1 && self.f2 && self.f3 && self.f4 && self.f5
    }
}

/// Labels follow δ, the spawn rule, and local soundness (no get of an own
/// held lock, no release of an unheld one).
pub fn check_f1(system: &System, tree: &ConfigTree) -> bool {
    let root = tree.root();
    let init = system.process(system.initial);
    if root.process != system.initial || root.state != init.init || root.action.is_some() {
        return false;
    }
    for (n, node) in tree.nodes.iter().enumerate() {
        let Some(l) = node.children[0] else {
            if node.children[1].is_some() {
                return false;
            }
            continue;
        };
        let left = tree.node(l);
        let Some(a) = left.action else { return false };
        let legal = tree
            .structural_moves(system, n)
            .any(|t| t.action == a && t.to == left.state);
        if !legal || left.process != node.process {
            return false;
        }
        match system.op(a) {
            Operation::Get(x) if node.holds_var(*x) => return false,
            Operation::Rel(x) if !node.holds_var(*x) => return false,
            Operation::Spawn { target, .. } => {
                let Some(r) = node.children[1] else { return false };
                let right = tree.node(r);
                if right.process != *target
                    || right.state != system.process(*target).init
                    || right.action.is_some()
                    || !right.held.is_empty()
                {
                    return false;
                }
            }
            _ => {
                if node.children[1].is_some() {
                    return false;
                }
            }
        }
    }
    true
}

/// Every transition available at a leaf is a get of a lock in `H(τ)`. A
/// release of a lock the leaf does not hold can never fire and is ignored.
pub fn check_f2(system: &System, tree: &ConfigTree) -> bool {
    let union = tree.held_union();
    tree.leaves().all(|leaf| {
        let node = tree.node(leaf);
        tree.structural_moves(system, leaf).all(|t| match system.op(t.action) {
            Operation::Get(x) => union.contains(&node.lock(*x)),
            Operation::Rel(x) => !node.holds_var(*x),
            _ => false,
        })
    })
}

/// Exactly one unmatched get per lock in `H(τ)`.
pub fn check_f3(system: &System, tree: &ConfigTree) -> bool {
    let mut count: BTreeMap<LockRef, usize> = BTreeMap::new();
    for (n, x) in unmatched_gets(system, tree) {
        *count.entry(tree.node(n).lock(x)).or_default() += 1;
    }
    tree.held_union().iter().all(|l| count.get(l) == Some(&1))
}

pub fn check_f(system: &System, tree: &ConfigTree) -> FVerdict {
    FVerdict {
        f1: check_f1(system, tree),
        f2: check_f2(system, tree),
        f3: check_f3(system, tree),
        f4: !has_cycle(&holds_relation(system, tree)),
        // finite trees have no infinite chains
        f5: true,
    }
}

/// Child of `n` holding the same lock as `(n, x)`, with its variable: the left
/// child keeps `x`, the right child gets the variable `x` is passed to.
fn successors(system: &System, tree: &ConfigTree, n: NodeIdx, x: Var) -> Vec<(NodeIdx, Var)> {
    let node = tree.node(n);
    let mut out = Vec::new();
    if let Some(l) = node.children[0] {
        out.push((l, x));
        if let Some(r) = node.children[1] {
            let a = tree.node(l).action.expect("left child has an action");
            if let Some(y) = system.op(a).passed_to(x) {
                out.push((r, y));
            }
        }
    }
    out
}

/// The coloring given by the predicate definitions.
pub fn semantic_coloring(system: &System, tree: &ConfigTree) -> Coloring {
    let n = tree.len();
    let ar = |i: NodeIdx| tree.node(i).lockmap.len();
    let mut k = vec![Vec::new(); n];
    let mut a = vec![Vec::new(); n];
    let mut d = vec![Vec::new(); n];
    let mut p = vec![Vec::new(); n];
    let order = tree.preorder();
    for &i in order.iter().rev() {
        let node = tree.node(i);
        for xi in 0..ar(i) {
            let x = Var(xi as u8);
            let held = node.holds_var(x);
            let succ = successors(system, tree, i, x);
            let at = |v: &Vec<Vec<bool>>, (c, y): (NodeIdx, Var)| v[c][y.0 as usize];
            // keeps: held here and on every left descendant
            let kk = held && node.children[0].is_none_or(|l| k[l][xi]);
            // avoids: not held here nor at any descendant in scope
            let aa = !held && succ.iter().all(|&s| at(&a, s));
            let dd = kk || succ.iter().any(|&s| at(&d, s));
            let pp = aa || (!succ.is_empty() && succ.iter().all(|&s| at(&p, s)));
            k[i].push(kk);
            a[i].push(aa);
            d[i].push(dd);
            p[i].push(pp);
        }
    }
    Coloring(
        (0..n)
            .map(|i| {
                (0..ar(i))
                    .map(|x| {
                        if k[i][x] {
                            Color::Keeps
                        } else if d[i][x] {
                            Color::EvKeeps
                        } else if a[i][x] {
                            Color::Avoids
                        } else if p[i][x] {
                            Color::EvAvoids
                        } else {
                            Color::Uncolored
                        }
                    })
                    .collect()
            })
            .collect(),
    )
}

fn get_rule(c: Color, c0: Color) -> bool {
    use Color::*;
    matches!((c, c0), (EvKeeps, Keeps | EvKeeps) | (EvAvoids, EvAvoids) | (Uncolored, Uncolored))
}

fn rel_rule(c: Color, c0: Color) -> bool {
    use Color::*;
    matches!((c, c0), (EvKeeps, EvKeeps) | (EvAvoids, Avoids | EvAvoids) | (Uncolored, Uncolored))
}

fn spawn_rule(c: Color, c0: Color, c1: Color) -> bool {
    use Color::*;
    match c {
        Keeps => c0 == Keeps && c1 == Avoids,
        Avoids => c0 == Avoids && c1 == Avoids,
        EvKeeps => (c0 == EvKeeps && c1.avoiding()) || (c1 == EvKeeps && c0.avoiding()),
        EvAvoids => c0.avoiding() && c1.avoiding() && !(c0 == Avoids && c1 == Avoids),
        Uncolored => {
            let ok = |c: Color| c.avoiding() || c == Uncolored;
            ok(c0) && ok(c1) && (c0 == Uncolored || c1 == Uncolored)
        }
    }
}

/// Rule violations at node `n`, given its own and its children's colors.
pub fn node_violations(system: &System, tree: &ConfigTree, coloring: &Coloring, n: NodeIdx) -> Vec<String> {
    let node = tree.node(n);
    let mut out = Vec::new();
    for xi in 0..node.lockmap.len() {
        let x = Var(xi as u8);
        let c = coloring.get(n, x);
        let held = node.holds_var(x);
        let why = |m: &str| format!("{} {x}: {m}", node.addr);
        if c == Color::Keeps && !held {
            out.push(why("keeps without holding"));
        }
        if c == Color::Avoids && held {
            out.push(why("avoids while holding"));
        }
        let Some(l) = node.children[0] else {
            let want = if held { Color::Keeps } else { Color::Avoids };
            if c != want {
                out.push(why("leaf must keep or avoid"));
            }
            continue;
        };
        let c0 = coloring.get(l, x);
        let a = tree.node(l).action.expect("left child has an action");
        let ok = match system.op(a) {
            Operation::Get(v) if *v == x => get_rule(c, c0),
            Operation::Rel(v) if *v == x => rel_rule(c, c0),
            op @ Operation::Spawn { .. } => match op.passed_to(x) {
                Some(y) => spawn_rule(c, c0, coloring.get(node.children[1].unwrap(), y)),
                None => c == c0,
            },
            _ => c == c0,
        };
        if !ok {
            out.push(why("branch rule"));
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SyntacticVerdict {
    pub branch: bool,
    pub eventuality: bool,
    pub recurrence: bool,
    pub violations: Vec<String>,
}

impl SyntacticVerdict {
    pub fn all(&self) -> bool {
        self.branch && self.eventuality && self.recurrence
    }
}

/// Longest ev-trace starting at `(n, x)`.
fn ev_trace_len(system: &System, tree: &ConfigTree, coloring: &Coloring, n: NodeIdx, x: Var) -> usize {
    if !coloring.get(n, x).is_eventual() {
        return 0;
    }
    1 + successors(system, tree, n, x)
        .into_iter()
        .map(|(c, y)| ev_trace_len(system, tree, coloring, c, y))
        .max()
        .unwrap_or(0)
}

pub fn check_syntactic(system: &System, tree: &ConfigTree, coloring: &Coloring) -> SyntacticVerdict {
    let violations: Vec<String> = (0..tree.len()).flat_map(|n| node_violations(system, tree, coloring, n)).collect();
    // every ev-trace of a finite tree is bounded by the depth
    let depth = tree.nodes.iter().map(|n| n.addr.0.len()).max().unwrap_or(0);
    let eventuality = (0..tree.len()).all(|n| {
        (0..tree.node(n).lockmap.len()).all(|x| ev_trace_len(system, tree, coloring, n, Var(x as u8)) <= depth + 1)
    });
    let recurrence = coloring.0.iter().flatten().all(|c| *c != Color::Uncolored);
    SyntacticVerdict { branch: violations.is_empty(), eventuality, recurrence, violations }
}

/// Every coloring that passes the branch rules, found by backtracking from
/// the leaves up. Stops after `limit` solutions.
pub fn search_colorings(system: &System, tree: &ConfigTree, limit: usize) -> Vec<Coloring> {
    let order: Vec<NodeIdx> = tree.preorder().into_iter().rev().collect();
    let mut col = Coloring(tree.nodes.iter().map(|n| vec![Color::Uncolored; n.lockmap.len()]).collect());
    let mut out = Vec::new();
    fn go(
        system: &System,
        tree: &ConfigTree,
        order: &[NodeIdx],
        k: usize,
        col: &mut Coloring,
        out: &mut Vec<Coloring>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        let Some(&n) = order.get(k) else {
            out.push(col.clone());
            return;
        };
        let ar = tree.node(n).lockmap.len();
        let total = 5usize.pow(ar as u32);
        for code in 0..total {
            let mut c = code;
            for x in 0..ar {
                col.0[n][x] = Color::ALL[c % 5];
                c /= 5;
            }
            if node_violations(system, tree, col, n).is_empty() {
                go(system, tree, order, k + 1, col, out, limit);
            }
        }
    }
    go(system, tree, &order, 0, &mut col, &mut out, limit);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HsMode {
    /// Passed variables inherit membership from the parent's `H^s`.
    Amended,
    /// Passed variables are members when the parent ev-keeps them.
    Strict,
}

pub fn syntactic_hs(system: &System, tree: &ConfigTree, coloring: &Coloring, mode: HsMode) -> HsLabeling {
    let mut hs = vec![VarSet::EMPTY; tree.len()];
    for n in tree.preorder() {
        let node = tree.node(n);
        let Some(l) = node.children[0] else { continue };
        hs[l] = hs[n];
        let Some(r) = node.children[1] else { continue };
        let Operation::Spawn { subst, .. } = system.op(tree.node(l).action.unwrap()) else { continue };
        let mut set = VarSet::EMPTY;
        for (yi, s) in subst.iter().enumerate() {
            let y = Var(yi as u8);
            let member = match (s, mode) {
                (crate::model::Source::New, _) => coloring.get(r, y) == Color::EvKeeps,
                (crate::model::Source::Parent(x), HsMode::Amended) => hs[n].contains(*x),
                (crate::model::Source::Parent(x), HsMode::Strict) => coloring.get(n, *x) == Color::EvKeeps,
            };
            if member {
                set = set.with(y);
            }
        }
        hs[r] = set;
    }
    HsLabeling(hs)
}

/// `x ∈ H^s(ν)` iff `L(ν)(x) ∈ H(τ)`, at every node.
pub fn hs_matches_held(tree: &ConfigTree, hs: &HsLabeling) -> bool {
    let union = tree.held_union();
    tree.nodes.iter().enumerate().all(|(n, node)| {
        node.lockmap
            .iter()
            .enumerate()
            .all(|(x, l)| union.contains(l) == hs.0[n].contains(Var(x as u8)))
    })
}

/// F2 stated with `H^s`: every available leaf transition is a get of a member of `H^s`.
pub fn check_f2_hs(system: &System, tree: &ConfigTree, hs: &HsLabeling) -> bool {
    tree.leaves().all(|leaf| {
        let node = tree.node(leaf);
        tree.structural_moves(system, leaf).all(|t| match system.op(t.action) {
            Operation::Get(x) => hs.0[leaf].contains(*x),
            Operation::Rel(x) => !node.holds_var(*x),
            _ => false,
        })
    })
}

/// Conditions 1 to 4 of a consistent order labeling.
pub fn check_order_conditions(
    system: &System,
    tree: &ConfigTree,
    coloring: &Coloring,
    hs: &HsLabeling,
    ord: &OrderLabeling,
) -> bool {
    for (n, node) in tree.nodes.iter().enumerate() {
        let o = &ord.0[n];
        let dom: VarSet = o.iter().copied().collect();
        if dom != hs.0[n] || dom.len() != o.len() {
            return false;
        }
        if let Some(l) = node.children[0] {
            for (i, &a) in o.iter().enumerate() {
                for &b in &o[i + 1..] {
                    if !ord.less(l, a, b) {
                        return false;
                    }
                }
            }
            if let Some(r) = node.children[1] {
                let op = system.op(tree.node(l).action.unwrap());
                for (i, &a) in o.iter().enumerate() {
                    for &b in &o[i + 1..] {
                        if let (Some(ya), Some(yb)) = (op.passed_to(a), op.passed_to(b)) {
                            if !ord.less(r, ya, yb) {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        for (i, &x) in o.iter().enumerate() {
            if coloring.get(n, x) != Color::Keeps {
                continue;
            }
            for &y in &o[..i] {
                if !matches!(coloring.get(n, y), Color::Keeps | Color::Avoids) {
                    return false;
                }
            }
        }
    }
    true
}

/// Conditions F4.1 to F4.3 stated on locks.
pub fn check_limitlocal(system: &System, tree: &ConfigTree, ord: &OrderLabeling) -> bool {
    let union = tree.held_union();
    let rel = holds_relation(system, tree);
    for (n, node) in tree.nodes.iter().enumerate() {
        let o = &ord.0[n];
        for (xi, l) in node.lockmap.iter().enumerate() {
            if union.contains(l) != o.contains(&Var(xi as u8)) {
                return false;
            }
        }
        for c in node.children.iter().flatten() {
            let child = tree.node(*c);
            for (i, &a) in o.iter().enumerate() {
                for &b in &o[i + 1..] {
                    let (la, lb) = (node.lock(a), node.lock(b));
                    if let (Some(ya), Some(yb)) = (child.var_of(la), child.var_of(lb)) {
                        if !ord.less(*c, ya, yb) {
                            return false;
                        }
                    }
                }
            }
        }
        for (a, la) in node.lockmap.iter().enumerate() {
            for (b, lb) in node.lockmap.iter().enumerate() {
                let pair = (tree.lock_id(*la).clone(), tree.lock_id(*lb).clone());
                if rel.contains(&pair) && !ord.less(n, Var(a as u8), Var(b as u8)) {
                    return false;
                }
            }
        }
    }
    true
}

/// Projects a linearization of `≺_H` (smallest `LockId` first among
/// unordered locks) to every node, then checks the result.
pub fn search_order_labeling(
    system: &System,
    tree: &ConfigTree,
    coloring: &Coloring,
    hs: &HsLabeling,
) -> Option<OrderLabeling> {
    let held: BTreeSet<LockId> = tree.held_union().into_iter().map(|l| tree.lock_id(l).clone()).collect();
    let lin = topo_sort(&holds_relation(system, tree), &held)?;
    let rank: BTreeMap<&LockId, usize> = lin.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let mut out = Vec::with_capacity(tree.len());
    for (n, node) in tree.nodes.iter().enumerate() {
        let mut vars: Vec<(usize, Var)> = Vec::new();
        for x in hs.0[n].iter() {
            let id = tree.lock_id(node.lock(x));
            vars.push((*rank.get(id)?, x));
        }
        vars.sort();
        out.push(vars.into_iter().map(|(_, x)| x).collect());
    }
    let ord = OrderLabeling(out);
    (check_order_conditions(system, tree, coloring, hs, &ord) && check_limitlocal(system, tree, &ord)).then_some(ord)
}

fn permutations(items: &[Var]) -> Vec<Vec<Var>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Exhaustive search for a consistent order labeling, guessing the order of
/// each spawned root among those compatible with its parent.
pub fn bruteforce_order_labeling(
    system: &System,
    tree: &ConfigTree,
    coloring: &Coloring,
    hs: &HsLabeling,
) -> Option<OrderLabeling> {
    let pre = tree.preorder();
    let mut ord = OrderLabeling(vec![Vec::new(); tree.len()]);
    fn go(
        system: &System,
        tree: &ConfigTree,
        coloring: &Coloring,
        hs: &HsLabeling,
        pre: &[NodeIdx],
        k: usize,
        ord: &mut OrderLabeling,
    ) -> bool {
        let Some(&n) = pre.get(k) else {
            return check_order_conditions(system, tree, coloring, hs, ord);
        };
        let node = tree.node(n);
        let candidates: Vec<Vec<Var>> = match node.parent {
            None => permutations(&hs.0[n].iter().collect::<Vec<_>>()),
            Some(p) if tree.node(p).children[0] == Some(n) => vec![ord.0[p].clone()],
            Some(p) => {
                let l = tree.node(p).children[0].unwrap();
                let op = system.op(tree.node(l).action.unwrap()).clone();
                let carried: Vec<Var> = ord.0[p].iter().filter_map(|x| op.passed_to(*x)).collect();
                permutations(&hs.0[n].iter().collect::<Vec<_>>())
                    .into_iter()
                    .filter(|perm| {
                        let pos: Vec<Option<usize>> = carried.iter().map(|y| perm.iter().position(|v| v == y)).collect();
                        pos.iter().all(|p| p.is_some()) && pos.windows(2).all(|w| w[0] < w[1])
                    })
                    .collect()
            }
        };
        for c in candidates {
            let keeps_ok = c.iter().enumerate().all(|(i, &x)| {
                coloring.get(n, x) != Color::Keeps
                    || c[..i].iter().all(|&y| matches!(coloring.get(n, y), Color::Keeps | Color::Avoids))
            });
            if !keeps_ok {
                continue;
            }
            ord.0[n] = c;
            if go(system, tree, coloring, hs, pre, k + 1, ord) {
                return true;
            }
        }
        false
    }
    go(system, tree, coloring, hs, &pre, 0, &mut ord).then_some(ord)
}

/// A syntactic certificate for a finite tree: a coloring passing the rules,
/// `H^s`, F2 through `H^s`, and a consistent order labeling, all found by
/// search on the explicit tree.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub coloring: Coloring,
    pub hs: HsLabeling,
    pub order: OrderLabeling,
}

pub fn certificate_search(system: &System, tree: &ConfigTree) -> Option<Certificate> {
    if !check_f1(system, tree) {
        return None;
    }
    for coloring in search_colorings(system, tree, 4) {
        if !check_syntactic(system, tree, &coloring).all() {
            continue;
        }
        let hs = syntactic_hs(system, tree, &coloring, HsMode::Amended);
        if !check_f2_hs(system, tree, &hs) {
            continue;
        }
        if let Some(order) = bruteforce_order_labeling(system, tree, &coloring, &hs) {
            return Some(Certificate { coloring, hs, order });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_system;
    use crate::semantics::{enumerate_fair_finite_limits, Run};

    fn ring2() -> System {
        parse_system(include_str!("../../../corpus/philosophers_ring2.dlss")).unwrap()
    }

    fn deadlock(s: &System) -> ConfigTree {
        let text = "ε p_init.start\n1 first.phil\n10 first.next\n11 phil.getl\n101 next.close\n1011 phil.getl\n";
        Run::parse_trace(s, text).unwrap().replay(s).unwrap()
    }

    fn tree_of(src: &str, trace: &str) -> (System, ConfigTree) {
        let s = parse_system(src).unwrap();
        let t = Run::parse_trace(&s, trace).unwrap().replay(&s).unwrap();
        (s, t)
    }

    #[test]
    fn deadlock_tree_passes_f() {
        let s = ring2();
        let t = deadlock(&s);
        assert!(check_f(&s, &t).all());
        assert_eq!(unmatched_gets(&s, &t).len(), 2);
        assert!(holds_relation(&s, &t).is_empty());
        let c = semantic_coloring(&s, &t);
        assert!(check_syntactic(&s, &t, &c).all());
        let hs = syntactic_hs(&s, &t, &c, HsMode::Amended);
        assert!(hs_matches_held(&t, &hs));
        for n in 0..t.len() {
            if s.process(t.node(n).process).name == "phil" {
                assert_eq!(hs.0[n].len(), 2);
            }
        }
        assert!(search_order_labeling(&s, &t, &c, &hs).is_some());
        assert!(certificate_search(&s, &t).is_some());
    }

    #[test]
    fn fork_scope_is_subtree() {
        let s = ring2();
        let t = deadlock(&s);
        for l in &t.locks {
            let sc = lock_scope(&t, l).unwrap();
            assert!(is_subtree(&t, &sc));
            if l.origin.0.is_empty() {
                assert!(sc.len() > 5);
            }
        }
        let bogus = LockId { origin: "0000".parse().unwrap(), var: Var(0) };
        assert!(lock_scope(&t, &bogus).is_err());
    }

    #[test]
    fn enabled_nop_fails_f2() {
        let (s, t) = tree_of("system t process p_init arity 0 init s { s -n-> s nop }", "");
        assert!(!check_f(&s, &t).f2);
    }

    #[test]
    fn two_unmatched_gets_fail_f3() {
        // two processes both end up holding the same lock: reachable only as a labeled tree
        let src = "system t process p_init arity 0 init a { a -s-> b spawn q(new) }\n\
                   process q arity 1 init a { a -s-> b spawn r(x1) b -g-> c get x1 }\n\
                   process r arity 1 init a { a -g-> b get x1 }";
        let s = parse_system(src).unwrap();
        let mut t = crate::semantics::initial_config(&s);
        for (addr, act) in [("", "p_init.s"), ("1", "q.s"), ("10", "q.g"), ("11", "r.g")] {
            let n = t.find(&addr.parse().unwrap_or_default()).unwrap();
            let tr = t.structural_moves(&s, n).find(|tr| tr.action == s.action_id(act).unwrap()).unwrap().clone();
            t.extend_unchecked(&s, n, &tr);
        }
        assert!(check_f1(&s, &t));
        assert!(!check_f3(&s, &t));
    }

    #[test]
    fn get_rel_colors() {
        let (s, t) = tree_of(
            "system t process p_init arity 0 init a { a -s-> b spawn q(new) }\n\
             process q arity 1 init a { a -n-> b nop b -g-> c get x1 c -r-> d rel x1 }",
            "ε p_init.s\n1 q.n\n10 q.g\n100 q.r\n",
        );
        let c = semantic_coloring(&s, &t);
        let at = |a: &str| c.get(t.find(&a.parse().unwrap()).unwrap(), Var(0));
        assert_eq!(at("1"), Color::EvAvoids);
        assert_eq!(at("10"), Color::EvAvoids);
        assert_eq!(at("100"), Color::EvAvoids);
        assert_eq!(at("1000"), Color::Avoids);
        assert!(check_syntactic(&s, &t, &c).all());
    }

    #[test]
    fn leaf_held_is_keeps() {
        let (s, t) = tree_of(
            "system t process p_init arity 0 init a { a -s-> b spawn q(new) }\n\
             process q arity 1 init a { a -g-> b get x1 }",
            "ε p_init.s\n1 q.g\n",
        );
        let mut c = semantic_coloring(&s, &t);
        let leaf = t.find(&"10".parse().unwrap()).unwrap();
        assert_eq!(c.get(leaf, Var(0)), Color::Keeps);
        c.0[leaf][0] = Color::Avoids;
        assert!(!check_syntactic(&s, &t, &c).branch);
    }

    #[test]
    fn spawn_ev_keeps_needs_a_keeper() {
        let (s, t) = tree_of(
            "system t process p_init arity 0 init a { a -s-> b spawn q(new) }\n\
             process q arity 1 init a { a -s-> b spawn r(x1) }\n\
             process r arity 1 init a { a -g-> b get x1 }",
            "ε p_init.s\n1 q.s\n11 r.g\n",
        );
        let mut c = semantic_coloring(&s, &t);
        let q = t.find(&"1".parse().unwrap()).unwrap();
        assert_eq!(c.get(q, Var(0)), Color::EvKeeps);
        let (l, r) = (t.node(q).children[0].unwrap(), t.node(q).children[1].unwrap());
        c.0[l][0] = Color::Avoids;
        c.0[r][0] = Color::Avoids;
        assert!(!check_syntactic(&s, &t, &c).branch);
    }

    #[test]
    fn keeper_passes_lock_to_child() {
        // q keeps x1 and then spawns r with it; r's variable is in H^s
        let (s, t) = tree_of(
            "system t process p_init arity 0 init a { a -s-> b spawn q(new) }\n\
             process q arity 1 init a { a -g-> b get x1 b -s-> c spawn r(x1) }\n\
             process r arity 1 init a { }",
            "ε p_init.s\n1 q.g\n10 q.s\n",
        );
        let c = semantic_coloring(&s, &t);
        assert!(check_syntactic(&s, &t, &c).all());
        let hs = syntactic_hs(&s, &t, &c, HsMode::Amended);
        assert!(hs_matches_held(&t, &hs));
        let r = t.find(&"101".parse().unwrap()).unwrap();
        assert!(hs.0[r].contains(Var(0)));
        let strict = syntactic_hs(&s, &t, &c, HsMode::Strict);
        assert!(!strict.0[r].contains(Var(0)));
    }

    fn nested_pair() -> (System, ConfigTree) {
        // q takes a and keeps it, then spawns r which takes b and keeps it
        tree_of(
            "system t process p_init arity 0 init a { a -s-> b spawn q(new, new) }\n\
             process q arity 2 init a { a -g-> b get x1 b -s-> c spawn r(x1, x2) }\n\
             process r arity 2 init a { a -g-> b get x2 }",
            "ε p_init.s\n1 q.g\n10 q.s\n101 r.g\n",
        )
    }

    #[test]
    fn holds_pair_and_order() {
        let (s, t) = nested_pair();
        let rel = holds_relation(&s, &t);
        assert_eq!(rel.len(), 1);
        let (a, b) = rel.iter().next().unwrap();
        assert_eq!(a.var, Var(0));
        assert_eq!(b.var, Var(1));
        let c = semantic_coloring(&s, &t);
        let hs = syntactic_hs(&s, &t, &c, HsMode::Amended);
        let ord = search_order_labeling(&s, &t, &c, &hs).unwrap();
        let r = t.find(&"101".parse().unwrap()).unwrap();
        assert_eq!(ord.0[r], vec![Var(0), Var(1)]);
        assert!(bruteforce_order_labeling(&s, &t, &c, &hs).is_some());
    }

    #[test]
    fn crossing_holds_cycle() {
        // two processes take a and b in opposite orders and keep both; each
        // second get is below the other lock's unmatched get
        let (s, t) = tree_of(
            "system t process p_init arity 0 init a { a -s-> b spawn q(new, new) }\n\
             process q arity 2 init a { a -s-> b spawn r(x1, x2) b -g-> c get x1 c -h-> d get x2 }\n\
             process r arity 2 init a { a -g-> b get x2 b -h-> c get x1 }",
            "ε p_init.s\n1 q.s\n10 q.g\n100 q.h\n",
        );
        // r cannot run any more; build its gets structurally
        let mut t = t;
        let n = t.find(&"11".parse().unwrap()).unwrap();
        for act in ["r.g", "r.h"] {
            let cur = std::iter::once(n).chain(t.leftmost_below(n)).last().unwrap();
            let tr = t.structural_moves(&s, cur).find(|tr| tr.action == s.action_id(act).unwrap()).unwrap().clone();
            t.extend_unchecked(&s, cur, &tr);
        }
        let rel = holds_relation(&s, &t);
        assert!(rel.len() >= 2);
        assert!(!check_f(&s, &t).f4);
        let c = semantic_coloring(&s, &t);
        let hs = syntactic_hs(&s, &t, &c, HsMode::Amended);
        assert!(search_order_labeling(&s, &t, &c, &hs).is_none());
    }

    #[test]
    fn fair_limits_have_unique_coloring() {
        let s = ring2();
        for t in enumerate_fair_finite_limits(&s, 16).unwrap() {
            assert!(check_f(&s, &t).all());
            let sem = semantic_coloring(&s, &t);
            let all = search_colorings(&s, &t, 3);
            assert_eq!(all, vec![sem]);
        }
    }
}
