//! Static check that every process acquires and releases locks in stack order.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::model::{ActionId, Operation, ProcId, StateId, System, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProcessVerdict {
    pub process: ProcId,
    pub name: String,
    pub nested: bool,
    /// Path from the initial state whose last action breaks the stack discipline.
    pub witness: Option<Vec<ActionId>>,
    /// Number of (state, stack) pairs visited.
    pub explored: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NestedVerdict {
    pub processes: Vec<ProcessVerdict>,
}

impl NestedVerdict {
    pub fn is_nested(&self) -> bool {
        self.processes.iter().all(|p| p.nested)
    }

    pub fn first_violation(&self) -> Option<&ProcessVerdict> {
        self.processes.iter().find(|p| !p.nested)
    }
}

pub fn check_nested(system: &System) -> NestedVerdict {
    NestedVerdict { processes: system.proc_ids().map(|p| check_process(system, p)).collect() }
}

type Node = (StateId, Vec<Var>);

fn check_process(system: &System, p: ProcId) -> ProcessVerdict {
    let decl = system.process(p);
    let start: Node = (decl.init, Vec::new());
    let mut parent: HashMap<Node, Option<(Node, ActionId)>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    let mut witness = None;
    'bfs: while let Some(node) = queue.pop_front() {
        let (s, stack) = &node;
        for t in decl.outgoing(*s) {
            let mut next = stack.clone();
            match system.op(t.action) {
                Operation::Get(x) => {
                    if stack.contains(x) {
                        witness = Some(path_to(&parent, &node, t.action));
                        break 'bfs;
                    }
                    next.push(*x);
                }
                Operation::Rel(x) => match stack.iter().position(|v| v == x) {
                    Some(i) if i + 1 == stack.len() => {
                        next.pop();
                    }
                    Some(_) => {
                        witness = Some(path_to(&parent, &node, t.action));
                        break 'bfs;
                    }
                    None => {}
                },
                _ => {}
            }
            let succ = (t.to, next);
            if !parent.contains_key(&succ) {
                parent.insert(succ.clone(), Some((node.clone(), t.action)));
                queue.push_back(succ);
            }
        }
    }
    ProcessVerdict {
        process: p,
        name: decl.name.clone(),
        nested: witness.is_none(),
        witness,
        explored: parent.len(),
    }
}

fn path_to(parent: &HashMap<Node, Option<(Node, ActionId)>>, node: &Node, last: ActionId) -> Vec<ActionId> {
    let mut path = vec![last];
    let mut cur = node;
    while let Some(Some((prev, a))) = parent.get(cur) {
        path.push(*a);
        cur = prev;
    }
    path.reverse();
    path
}

/// Replays `path` from the initial state of `p` and reports whether it is a
/// valid path that breaks the stack discipline: some `get x ... rel x` window
/// (no `rel x` in between) contains a `get y` with no later `rel y` inside the
/// window, or a variable is acquired twice without release in between.
pub fn witness_violates(system: &System, p: ProcId, path: &[ActionId]) -> bool {
    let decl = system.process(p);
    let mut s = decl.init;
    let mut ops = Vec::with_capacity(path.len());
    for &a in path {
        let Some(t) = decl.outgoing(s).find(|t| t.action == a) else {
            return false;
        };
        ops.push(system.op(a).clone());
        s = t.to;
    }
    path_violates(&ops)
}

/// Definition-level check on a sequence of operations.
pub fn path_violates(ops: &[Operation]) -> bool {
    let n = ops.len();
    for j in 0..n {
        let Operation::Get(x) = ops[j] else { continue };
        // double acquisition: another get x before any rel x
        for o in &ops[j + 1..] {
            match o {
                Operation::Rel(v) if *v == x => break,
                Operation::Get(v) if *v == x => return true,
                _ => {}
            }
        }
        let Some(end) = (j + 1..n).find(|&k| ops[k] == Operation::Rel(x)) else { continue };
        for i in j + 1..end {
            if let Operation::Get(y) = ops[i] {
                if !ops[i + 1..end].contains(&Operation::Rel(y)) {
                    return true;
                }
            }
        }
    }
    false
}
