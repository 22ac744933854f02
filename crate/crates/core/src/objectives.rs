//! Objectives: parity tree automata read from text, and built-in templates.
//!
//! Objective files are line oriented:
//!
//! ```text
//! states q0 q1
//! init q0
//! parity max
//! priority q0 2
//! priority q1 1
//! trans q0 get|rel/1 -> q1
//! trans q0 spawn/2 -> q0 q1
//! trans q1 any -> q1
//! leaf q0 any
//! ```
//!
//! A transition without arity and with one target is added for every
//! branching, sending the target to each child. Letter classes are `any`,
//! `BOT`, `get`, `rel`, `nop`, `spawn`, `spawn:P`, `@P` (actions of process
//! `P`), full action names, unions with `|` and a leading `!` for the
//! complement.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

use crate::automata::{buchi_times_parity, product, AutomataError, ParityNta, Succ, TreeLetter};
use crate::model::{lex, ActionId, Cursor, Operation, ProcId, SyntaxError, System, Tok, Token};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectiveError {
    #[error("{0}")]
    Syntax(SyntaxError),
    #[error("unknown action or letter class `{0}`")]
    UnknownAction(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown process `{0}`")]
    UnknownProcess(String),
    #[error("state `{0}` has no priority")]
    MissingPriority(String),
    #[error("priorities {0:?} are not a contiguous range starting at 1 or 2")]
    NonContiguous(Vec<u8>),
    #[error("bad regular expression: {0}")]
    BadRegex(String),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("cannot read `{0}`: {1}")]
    Io(String, String),
    #[error("a conjunction may contain at most one objective that is not Büchi")]
    NotConjunctive,
    #[error(transparent)]
    Automata(#[from] AutomataError),
}

impl From<SyntaxError> for ObjectiveError {
    fn from(e: SyntaxError) -> Self {
        ObjectiveError::Syntax(e)
    }
}

/// A set of letters over `Σ ∪ {⊥}`, indexed by `action + 1` with ⊥ at 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LetterClass(pub Vec<bool>);

impl LetterClass {
    pub fn contains(&self, a: Option<ActionId>) -> bool {
        self.0[a.map_or(0, |a| a.0 as usize + 1)]
    }

    pub fn members(&self) -> impl Iterator<Item = Option<ActionId>> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| (i > 0).then(|| ActionId(i as u32 - 1)))
    }

    fn negate(&mut self) {
        for b in &mut self.0 {
            *b = !*b;
        }
    }
}

fn is_spawn_of(system: &System, a: Option<ActionId>, p: ProcId) -> bool {
    matches!(a.map(|a| system.op(a)), Some(Operation::Spawn { target, .. }) if *target == p)
}

/// Resolves one class name.
pub fn resolve_class(system: &System, name: &str) -> Result<LetterClass, ObjectiveError> {
    let n = system.actions.len();
    let mut set = vec![false; n + 1];
    let ops = |f: &dyn Fn(&Operation) -> bool, set: &mut Vec<bool>| {
        for a in system.action_ids() {
            if f(system.op(a)) {
                set[a.0 as usize + 1] = true;
            }
        }
    };
    match name {
        "any" => set.iter_mut().for_each(|b| *b = true),
        "BOT" => set[0] = true,
        "get" => ops(&|o| matches!(o, Operation::Get(_)), &mut set),
        "rel" => ops(&|o| matches!(o, Operation::Rel(_)), &mut set),
        "nop" => ops(&|o| matches!(o, Operation::Nop), &mut set),
        "spawn" => ops(&|o| o.is_spawn(), &mut set),
        _ => {
            if let Some(p) = name.strip_prefix("spawn:") {
                let p = system.proc_id(p).ok_or_else(|| ObjectiveError::UnknownProcess(p.into()))?;
                for a in system.action_ids() {
                    set[a.0 as usize + 1] = is_spawn_of(system, Some(a), p);
                }
            } else if let Some(p) = name.strip_prefix('@') {
                let p = system.proc_id(p).ok_or_else(|| ObjectiveError::UnknownProcess(p.into()))?;
                for a in system.action_ids() {
                    set[a.0 as usize + 1] = system.action(a).process == p;
                }
            } else {
                let a = system.action_id(name).ok_or_else(|| ObjectiveError::UnknownAction(name.into()))?;
                set[a.0 as usize + 1] = true;
            }
        }
    }
    Ok(LetterClass(set))
}

/// Parses `[!] NAME (| NAME)*` from the cursor.
fn class(cur: &mut Cursor, system: &System) -> Result<LetterClass, ObjectiveError> {
    let negate = cur.is_punct('!');
    if negate {
        cur.next();
    }
    let mut acc = resolve_class(system, &cur.ident("letter class")?)?;
    while cur.is_punct('|') {
        cur.next();
        let more = resolve_class(system, &cur.ident("letter class")?)?;
        for (a, b) in acc.0.iter_mut().zip(more.0) {
            *a |= b;
        }
    }
    if negate {
        acc.negate();
    }
    Ok(acc)
}

/// Splits tokens into lines.
fn lines(text: &str) -> Result<Vec<(Vec<Token>, usize)>, SyntaxError> {
    let mut out: Vec<(Vec<Token>, usize)> = Vec::new();
    for t in lex(text)? {
        match out.last_mut() {
            Some((v, line)) if *line == t.line => v.push(t),
            _ => {
                let line = t.line;
                out.push((vec![t], line));
            }
        }
    }
    Ok(out)
}

fn end_of_line(cur: &Cursor) -> Result<(), SyntaxError> {
    if cur.at_end() {
        Ok(())
    } else {
        Err(cur.err("unexpected token at end of line"))
    }
}

pub fn parse_objective(text: &str, system: &System) -> Result<ParityNta, ObjectiveError> {
    let mut nta = ParityNta::new(system.actions.len());
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut prio: Vec<Option<u8>> = Vec::new();
    let mut init = None;
    let mut min_parity = false;
    for (toks, _) in lines(text)? {
        let mut cur = Cursor::new(toks, text);
        let kw = cur.ident("a keyword")?;
        let state = |cur: &mut Cursor, index: &HashMap<String, usize>| -> Result<usize, ObjectiveError> {
            let name = cur.ident("state name")?;
            index.get(&name).copied().ok_or(ObjectiveError::UnknownState(name))
        };
        match kw.as_str() {
            "states" => {
                while !cur.at_end() {
                    let name = cur.ident("state name")?;
                    if index.contains_key(&name) {
                        return Err(cur.err_prev(format!("duplicate state `{name}`")).into());
                    }
                    index.insert(name.clone(), nta.add_state(name, 0));
                    prio.push(None);
                }
            }
            "init" => init = Some(state(&mut cur, &index)?),
            "parity" => {
                let kind = cur.ident("`max` or `min`")?;
                min_parity = match kind.as_str() {
                    "max" => false,
                    "min" => true,
                    _ => return Err(cur.err_prev("expected `max` or `min`").into()),
                };
            }
            "priority" => {
                let q = state(&mut cur, &index)?;
                let p = cur.num("priority")?;
                if !(1..=250).contains(&p) {
                    return Err(cur.err_prev("priority out of range").into());
                }
                prio[q] = Some(p as u8);
            }
            "trans" => {
                let q = state(&mut cur, &index)?;
                let c = class(&mut cur, system)?;
                let arity = if cur.is_punct('/') {
                    cur.next();
                    if cur.is_punct('*') {
                        cur.next();
                        None
                    } else {
                        let n = cur.num("arity")?;
                        if n > 2 {
                            return Err(cur.err_prev("arity must be 0, 1, 2 or *").into());
                        }
                        Some(n as u8)
                    }
                } else {
                    None
                };
                let mut targets = Vec::new();
                if arity != Some(0) {
                    match cur.next() {
                        Some(Tok::Arrow(s)) if s.is_empty() => {}
                        _ => return Err(cur.err_prev("expected `->`").into()),
                    }
                    while !cur.at_end() {
                        targets.push(state(&mut cur, &index)?);
                    }
                }
                let succs: Vec<Succ<usize>> = match (arity, targets.as_slice()) {
                    (Some(0), []) => vec![Succ::Top],
                    (Some(1), [a]) => vec![Succ::One(*a)],
                    (Some(2) | None, [a, b]) => vec![Succ::Two(*a, *b)],
                    (None, [a]) => vec![Succ::Top, Succ::One(*a), Succ::Two(*a, *a)],
                    _ => return Err(cur.err_prev("number of targets does not match the arity").into()),
                };
                for l in c.members() {
                    for s in &succs {
                        nta.add_move(q, TreeLetter::new(l, s.arity()), s.clone());
                    }
                }
            }
            "leaf" => {
                let q = state(&mut cur, &index)?;
                let c = class(&mut cur, system)?;
                for l in c.members() {
                    nta.add_move(q, TreeLetter::new(l, 0), Succ::Top);
                }
            }
            _ => return Err(cur.err_prev(format!("unknown keyword `{kw}`")).into()),
        }
        end_of_line(&cur)?;
    }
    if nta.is_empty() {
        return Err(SyntaxError { line: 1, col: 1, message: "no states declared".into() }.into());
    }
    for (q, p) in prio.iter().enumerate() {
        nta.priority[q] = p.ok_or_else(|| ObjectiveError::MissingPriority(nta.names[q].clone()))?;
    }
    check_contiguous(&nta.priority)?;
    if min_parity {
        let hi = nta.max_priority();
        let k = if (hi + 1).is_multiple_of(2) { hi + 1 } else { hi + 2 };
        for p in &mut nta.priority {
            *p = k - *p;
        }
    }
    nta.initial = init.unwrap_or(0);
    Ok(nta)
}

fn check_contiguous(priorities: &[u8]) -> Result<(), ObjectiveError> {
    let set: BTreeSet<u8> = priorities.iter().copied().collect();
    let (lo, hi) = (*set.first().unwrap(), *set.last().unwrap());
    if lo > 2 || set.len() != (hi - lo + 1) as usize {
        return Err(ObjectiveError::NonContiguous(set.into_iter().collect()));
    }
    Ok(())
}

fn letter_name(system: &System, a: Option<ActionId>) -> &str {
    a.map_or("BOT", |a| &system.action(a).name)
}

/// Text form accepted by [`parse_objective`], one transition per line.
pub fn render_objective(nta: &ParityNta, system: &System) -> String {
    let mut s = format!("states {}\ninit {}\n", nta.names.join(" "), nta.names[nta.initial]);
    for (q, p) in nta.priority.iter().enumerate() {
        s += &format!("priority {} {p}\n", nta.names[q]);
    }
    for (q, moves) in nta.delta.iter().enumerate() {
        for (l, succs) in moves {
            for succ in succs {
                let name = letter_name(system, l.action);
                s += &match succ {
                    Succ::Top => format!("leaf {} {name}\n", nta.names[q]),
                    Succ::One(a) => format!("trans {} {name}/1 -> {}\n", nta.names[q], nta.names[*a]),
                    Succ::Two(a, b) => format!("trans {} {name}/2 -> {} {}\n", nta.names[q], nta.names[*a], nta.names[*b]),
                };
            }
        }
    }
    s
}

/// Büchi word automaton over letter classes. `fin` marks states in which a
/// finite word may end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordAutomaton {
    pub names: Vec<String>,
    pub init: usize,
    pub accept: Vec<bool>,
    pub fin: Vec<bool>,
    pub trans: Vec<(usize, LetterClass, usize)>,
}

impl WordAutomaton {
    fn step(&self, q: usize, a: Option<ActionId>) -> impl Iterator<Item = usize> + '_ {
        self.trans.iter().filter(move |(p, c, _)| *p == q && c.contains(a)).map(|t| t.2)
    }
}

pub fn parse_word_automaton(text: &str, system: &System) -> Result<WordAutomaton, ObjectiveError> {
    let mut w = WordAutomaton { names: Vec::new(), init: 0, accept: Vec::new(), fin: Vec::new(), trans: Vec::new() };
    let mut index: HashMap<String, usize> = HashMap::new();
    for (toks, _) in lines(text)? {
        let mut cur = Cursor::new(toks, text);
        let kw = cur.ident("a keyword")?;
        let state = |cur: &mut Cursor, index: &HashMap<String, usize>| -> Result<usize, ObjectiveError> {
            let name = cur.ident("state name")?;
            index.get(&name).copied().ok_or(ObjectiveError::UnknownState(name))
        };
        match kw.as_str() {
            "states" => {
                while !cur.at_end() {
                    let name = cur.ident("state name")?;
                    index.insert(name.clone(), w.names.len());
                    w.names.push(name);
                    w.accept.push(false);
                    w.fin.push(false);
                }
            }
            "init" => w.init = state(&mut cur, &index)?,
            "accept" | "final" => {
                while !cur.at_end() {
                    let q = state(&mut cur, &index)?;
                    if kw == "accept" {
                        w.accept[q] = true;
                    } else {
                        w.fin[q] = true;
                    }
                }
            }
            "trans" => {
                let q = state(&mut cur, &index)?;
                let c = class(&mut cur, system)?;
                match cur.next() {
                    Some(Tok::Arrow(s)) if s.is_empty() => {}
                    _ => return Err(cur.err_prev("expected `->`").into()),
                }
                let r = state(&mut cur, &index)?;
                w.trans.push((q, c, r));
            }
            _ => return Err(cur.err_prev(format!("unknown keyword `{kw}`")).into()),
        }
        end_of_line(&cur)?;
    }
    if w.names.is_empty() {
        return Err(SyntaxError { line: 1, col: 1, message: "no states declared".into() }.into());
    }
    Ok(w)
}

/// Nondeterministic finite automaton without ε-moves.
#[derive(Clone, Debug)]
struct Nfa {
    init: BTreeSet<usize>,
    fin: Vec<bool>,
    trans: Vec<Vec<(LetterClass, usize)>>,
}

#[derive(Clone, Debug)]
enum Re {
    Eps,
    Class(LetterClass),
    Cat(Box<Re>, Box<Re>),
    Alt(Box<Re>, Box<Re>),
    Star(Box<Re>),
}

fn parse_regex(text: &str, system: &System) -> Result<Re, ObjectiveError> {
    let toks = lex(text).map_err(|e| ObjectiveError::BadRegex(e.message))?;
    let mut cur = Cursor::new(toks, text);
    let re = regex_alt(&mut cur, system)?;
    if !cur.at_end() {
        return Err(ObjectiveError::BadRegex(cur.err("unexpected token").to_string()));
    }
    Ok(re)
}

fn regex_alt(cur: &mut Cursor, system: &System) -> Result<Re, ObjectiveError> {
    let mut re = regex_seq(cur, system)?;
    while cur.is_punct('|') {
        cur.next();
        re = Re::Alt(Box::new(re), Box::new(regex_seq(cur, system)?));
    }
    Ok(re)
}

fn regex_seq(cur: &mut Cursor, system: &System) -> Result<Re, ObjectiveError> {
    let mut re = Re::Eps;
    loop {
        let atom = match cur.peek() {
            Some(Tok::Ident(name)) => {
                let c = resolve_class(system, &name.clone())?;
                cur.next();
                Re::Class(c)
            }
            Some(Tok::Punct('!')) => {
                cur.next();
                let mut c = resolve_class(system, &cur.ident("letter class").map_err(|e| ObjectiveError::BadRegex(e.message))?)?;
                c.negate();
                Re::Class(c)
            }
            Some(Tok::Punct('(')) => {
                cur.next();
                let inner = regex_alt(cur, system)?;
                cur.punct(')').map_err(|e| ObjectiveError::BadRegex(e.to_string()))?;
                inner
            }
            _ => return Ok(re),
        };
        let mut atom = atom;
        loop {
            if cur.is_punct('*') {
                atom = Re::Star(Box::new(atom));
            } else if cur.is_punct('+') {
                atom = Re::Cat(Box::new(atom.clone()), Box::new(Re::Star(Box::new(atom))));
            } else if cur.is_punct('?') {
                atom = Re::Alt(Box::new(atom), Box::new(Re::Eps));
            } else {
                break;
            }
            cur.next();
        }
        re = match re {
            Re::Eps => atom,
            r => Re::Cat(Box::new(r), Box::new(atom)),
        };
    }
}

/// Thompson construction followed by ε-elimination.
fn regex_to_nfa(re: &Re) -> Nfa {
    struct B {
        eps: Vec<Vec<usize>>,
        sym: Vec<Vec<(LetterClass, usize)>>,
    }
    impl B {
        fn node(&mut self) -> usize {
            self.eps.push(Vec::new());
            self.sym.push(Vec::new());
            self.eps.len() - 1
        }
        fn build(&mut self, re: &Re) -> (usize, usize) {
            let (s, t) = (self.node(), self.node());
            match re {
                Re::Eps => self.eps[s].push(t),
                Re::Class(c) => self.sym[s].push((c.clone(), t)),
                Re::Cat(a, b) => {
                    let (a0, a1) = self.build(a);
                    let (b0, b1) = self.build(b);
                    self.eps[s].push(a0);
                    self.eps[a1].push(b0);
                    self.eps[b1].push(t);
                }
                Re::Alt(a, b) => {
                    for r in [a, b] {
                        let (r0, r1) = self.build(r);
                        self.eps[s].push(r0);
                        self.eps[r1].push(t);
                    }
                }
                Re::Star(a) => {
                    let (a0, a1) = self.build(a);
                    self.eps[s].extend([a0, t]);
                    self.eps[a1].extend([a0, t]);
                }
            }
            (s, t)
        }
        fn closure(&self, q: usize) -> BTreeSet<usize> {
            let mut seen = BTreeSet::from([q]);
            let mut stack = vec![q];
            while let Some(p) = stack.pop() {
                for &r in &self.eps[p] {
                    if seen.insert(r) {
                        stack.push(r);
                    }
                }
            }
            seen
        }
    }
    let mut b = B { eps: Vec::new(), sym: Vec::new() };
    let (s, t) = b.build(re);
    let n = b.eps.len();
    let closures: Vec<BTreeSet<usize>> = (0..n).map(|q| b.closure(q)).collect();
    let fin = (0..n).map(|q| closures[q].contains(&t)).collect();
    let trans = (0..n)
        .map(|q| {
            closures[q]
                .iter()
                .flat_map(|&p| b.sym[p].iter().cloned())
                .collect()
        })
        .collect();
    Nfa { init: BTreeSet::from([s]), fin, trans }
}

#[derive(Clone, Debug)]
pub enum Template {
    GlobalDeadlock,
    SomeInstanceBlocked { process: String, regex: String },
    InstanceRunsForever { process: String },
    FinitelyManySpawns,
    AllInstancesIn { process: String, word: WordAutomaton },
    SomeInstanceIn { process: String, word: WordAutomaton },
}

/// Explores the modes reachable from `init` and collects their moves. Several
/// initial modes are merged into a fresh start state.
fn compile<M: Clone + Eq + Hash + Debug>(
    actions: usize,
    init: Vec<M>,
    name: impl Fn(&M) -> String,
    priority: impl Fn(&M) -> u8,
    step: impl Fn(&M, TreeLetter) -> Vec<Succ<M>>,
) -> ParityNta {
    let mut nta = ParityNta::new(actions);
    let mut index: HashMap<M, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut id = |m: M, nta: &mut ParityNta, queue: &mut VecDeque<M>| -> usize {
        *index.entry(m.clone()).or_insert_with(|| {
            queue.push_back(m.clone());
            nta.add_state(name(&m), priority(&m))
        })
    };
    if init.len() > 1 {
        let start = nta.add_state("start", 2);
        for l in TreeLetter::alphabet(actions) {
            for m in &init {
                for s in step(m, l) {
                    let s = s.map(|x| id(x, &mut nta, &mut queue));
                    nta.add_move(start, l, s);
                }
            }
        }
    } else {
        id(init[0].clone(), &mut nta, &mut queue);
    }
    while let Some(m) = queue.pop_front() {
        let q = id(m.clone(), &mut nta, &mut queue);
        for l in TreeLetter::alphabet(actions) {
            for s in step(&m, l) {
                let s = s.map(|x| id(x, &mut nta, &mut queue));
                nta.add_move(q, l, s);
            }
        }
    }
    nta
}

/// Same successor on every child.
fn spread<M: Clone>(l: TreeLetter, m: M) -> Succ<M> {
    match l.branching {
        0 => Succ::Top,
        1 => Succ::One(m),
        _ => Succ::Two(m.clone(), m),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Mode {
    Any,
    Seek,
    All,
    /// Word automaton state before the node's letter is read.
    Word(usize),
}

/// Requirement on the letter of the node a state sits on. A spawned process
/// starts at a right child labelled ⊥ while the spawn action labels the left
/// child.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Check {
    Free,
    SpawnOf,
    NotSpawnOf,
}

fn proc(system: &System, name: &str) -> Result<ProcId, ObjectiveError> {
    system.proc_id(name).ok_or_else(|| ObjectiveError::UnknownProcess(name.into()))
}

/// Some (or every) instance of `p` has a local run accepted by `word`. A
/// finite local run ends at a leaf and is accepted in a `fin` state.
fn instances(system: &System, p: ProcId, word: &WordAutomaton, universal: bool) -> ParityNta {
    use Check::*;
    let start = (Mode::Word(word.init), Free);
    let init = match (system.initial == p, universal) {
        (true, true) => vec![start],
        (true, false) => vec![start, (Mode::Seek, Free)],
        (false, true) => vec![(Mode::All, Free)],
        (false, false) => vec![(Mode::Seek, Free)],
    };
    let step = |&(m, c): &(Mode, Check), l: TreeLetter| -> Vec<Succ<(Mode, Check)>> {
        let spawns = is_spawn_of(system, l.action, p);
        if (c == SpawnOf && !spawns) || (c == NotSpawnOf && spawns) {
            return vec![];
        }
        match (m, l.branching) {
            (Mode::Any, _) => vec![spread(l, (Mode::Any, Free))],
            (Mode::Seek, 0) => vec![],
            (Mode::Seek, 1) => vec![Succ::One((Mode::Seek, Free))],
            (Mode::Seek, _) => vec![
                Succ::Two((Mode::Seek, Free), (Mode::Any, Free)),
                Succ::Two((Mode::Any, Free), (Mode::Seek, Free)),
                Succ::Two((Mode::Any, SpawnOf), start),
            ],
            (Mode::All, 2) => {
                vec![Succ::Two((Mode::All, SpawnOf), start), Succ::Two((Mode::All, NotSpawnOf), (Mode::All, Free))]
            }
            (Mode::All, _) => vec![spread(l, (Mode::All, Free))],
            (Mode::Word(w), b) => {
                // ⊥ marks the first node of the instance and is not read
                let next: Vec<usize> = match l.action {
                    None => vec![w],
                    Some(_) => word.step(w, l.action).collect(),
                };
                let mut out = Vec::new();
                for t in next {
                    let t = Mode::Word(t);
                    match b {
                        0 => {
                            if matches!(t, Mode::Word(q) if word.fin[q]) {
                                out.push(Succ::Top);
                            }
                        }
                        1 => out.push(Succ::One((t, Free))),
                        _ if universal => {
                            out.push(Succ::Two((t, SpawnOf), start));
                            out.push(Succ::Two((t, NotSpawnOf), (Mode::All, Free)));
                        }
                        _ => out.push(Succ::Two((t, Free), (Mode::Any, Free))),
                    }
                }
                out.dedup();
                out
            }
        }
    };
    let name = |&(m, c): &(Mode, Check)| {
        let base = match m {
            Mode::Any => "any".to_string(),
            Mode::Seek => "seek".to_string(),
            Mode::All => "all".to_string(),
            Mode::Word(q) => format!("w.{}", word.names[q]),
        };
        match c {
            Free => base,
            SpawnOf => format!("{base}.spawn"),
            NotSpawnOf => format!("{base}.other"),
        }
    };
    let priority = |&(m, _): &(Mode, Check)| match m {
        Mode::Seek => 1,
        Mode::Word(q) if !word.accept[q] => 1,
        _ => 2,
    };
    compile(system.actions.len(), init, name, priority, step)
}

pub fn template(system: &System, t: &Template) -> Result<ParityNta, ObjectiveError> {
    let n = system.actions.len();
    match t {
        Template::GlobalDeadlock => {
            let mut a = ParityNta::new(n);
            let q = a.add_state("finite", 1);
            for l in TreeLetter::alphabet(n) {
                a.add_move(q, l, spread(l, q));
            }
            Ok(a)
        }
        Template::FinitelyManySpawns => {
            let mut a = ParityNta::new(n);
            let left = a.add_state("left", 2);
            let right = a.add_state("right", 3);
            for q in [left, right] {
                for l in TreeLetter::alphabet(n) {
                    let s = match l.branching {
                        0 => Succ::Top,
                        1 => Succ::One(left),
                        _ => Succ::Two(left, right),
                    };
                    a.add_move(q, l, s);
                }
            }
            Ok(a)
        }
        Template::InstanceRunsForever { process } => {
            let p = proc(system, process)?;
            // a one-state Büchi word automaton accepting every infinite run
            let word = WordAutomaton {
                names: vec!["run".into()],
                init: 0,
                accept: vec![true],
                fin: vec![false],
                trans: vec![(0, LetterClass(vec![true; n + 1]), 0)],
            };
            Ok(instances(system, p, &word, false))
        }
        Template::SomeInstanceIn { process, word } => Ok(instances(system, proc(system, process)?, word, false)),
        Template::AllInstancesIn { process, word } => Ok(instances(system, proc(system, process)?, word, true)),
        Template::SomeInstanceBlocked { process, regex } => {
            let p = proc(system, process)?;
            let nfa = regex_to_nfa(&parse_regex(regex, system)?);
            let states = nfa.fin.len();
            let init = *nfa.init.first().expect("one initial state");
            let word = WordAutomaton {
                names: (0..states).map(|i| format!("r{i}")).collect(),
                init,
                accept: vec![false; states],
                fin: nfa.fin.clone(),
                trans: nfa
                    .trans
                    .iter()
                    .enumerate()
                    .flat_map(|(q, v)| v.iter().map(move |(c, r)| (q, c.clone(), *r)))
                    .collect(),
            };
            Ok(instances(system, p, &word, false))
        }
    }
}

/// Parses `TAG[:ARG[:ARG]]`. Word automaton arguments are file names read
/// through `read`.
pub fn parse_template(
    spec: &str,
    system: &System,
    read: impl Fn(&str) -> Result<String, String>,
) -> Result<Template, ObjectiveError> {
    let (tag, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let (first, second) = rest.split_once(':').unwrap_or((rest, ""));
    let word = |path: &str| -> Result<WordAutomaton, ObjectiveError> {
        let text = read(path).map_err(|e| ObjectiveError::Io(path.into(), e))?;
        parse_word_automaton(&text, system)
    };
    let need = |s: &str| -> Result<String, ObjectiveError> {
        if s.is_empty() {
            Err(ObjectiveError::UnknownTemplate(format!("{spec} (missing argument)")))
        } else {
            Ok(s.to_string())
        }
    };
    Ok(match tag {
        "global-deadlock" => Template::GlobalDeadlock,
        "finitely-many-spawns" => Template::FinitelyManySpawns,
        "instance-runs-forever" => Template::InstanceRunsForever { process: need(first)? },
        "some-instance-blocked" => {
            Template::SomeInstanceBlocked { process: need(first)?, regex: need(second)? }
        }
        "all-instances-in" => Template::AllInstancesIn { process: need(first)?, word: word(&need(second)?)? },
        "some-instance-in" => Template::SomeInstanceIn { process: need(first)?, word: word(&need(second)?)? },
        _ => return Err(ObjectiveError::UnknownTemplate(spec.into())),
    })
}

/// Intersection of objectives: Büchi ones are combined with a product, and
/// at most one other parity objective is added on top.
pub fn conjunction(list: &[ParityNta], actions: usize) -> Result<ParityNta, ObjectiveError> {
    let (buchi, other): (Vec<ParityNta>, Vec<ParityNta>) = list.iter().cloned().partition(|a| a.is_buchi());
    if other.len() > 1 {
        return Err(ObjectiveError::NotConjunctive);
    }
    if buchi.is_empty() {
        return Ok(other.into_iter().next().unwrap_or_else(|| ParityNta::universal(actions)));
    }
    let b = if buchi.len() == 1 { buchi.into_iter().next().unwrap() } else { product(&buchi)? };
    match other.into_iter().next() {
        None => Ok(b),
        Some(p) => Ok(buchi_times_parity(&b, &p)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{accepts_finite_tree, encode_config, LetterTree};
    use crate::model::parse_system;
    use crate::semantics::{initial_config, Run};

    fn ring2() -> System {
        parse_system(include_str!("../../../corpus/philosophers_ring2.dlss")).unwrap()
    }

    fn deadlock(s: &System) -> LetterTree {
        let text = "ε p_init.start\n1 first.phil\n10 first.next\n11 phil.getl\n101 next.close\n1011 phil.getl\n";
        encode_config(&Run::parse_trace(s, text).unwrap().replay(s).unwrap())
    }

    #[test]
    fn universal_objective() {
        let s = ring2();
        let a = parse_objective("states q\ninit q\npriority q 2\ntrans q any -> q\n", &s).unwrap();
        assert_eq!(a.delta, ParityNta::universal(s.actions.len()).delta);
        assert!(accepts_finite_tree(&a, &deadlock(&s)));
    }

    #[test]
    fn no_spawn_below_root() {
        let s = ring2();
        let text = "states top below\ninit top\npriority top 2\npriority below 2\n\
                    trans top any/* -> below\ntrans below any/0\ntrans below any/1 -> below\n";
        let a = parse_objective(text, &s).unwrap();
        assert!(accepts_finite_tree(&a, &encode_config(&initial_config(&s))));
        assert!(!accepts_finite_tree(&a, &deadlock(&s)));
    }

    #[test]
    fn priorities_must_be_contiguous() {
        let s = ring2();
        let err = parse_objective("states a b\npriority a 1\npriority b 3\ntrans a any -> b\n", &s).unwrap_err();
        assert_eq!(err, ObjectiveError::NonContiguous(vec![1, 3]));
        let err = parse_objective("states a\ntrans a any -> a\n", &s).unwrap_err();
        assert_eq!(err, ObjectiveError::MissingPriority("a".into()));
    }

    #[test]
    fn min_parity_is_converted() {
        let s = ring2();
        let a = parse_objective("states a b\nparity min\npriority a 0\npriority b 1\ntrans a any -> b\ntrans b any -> a\n", &s);
        assert!(a.is_err());
        let a = parse_objective("states a b\nparity min\npriority a 1\npriority b 2\ntrans a any -> b\ntrans b any -> a\n", &s)
            .unwrap();
        assert_eq!(a.priority, vec![3, 2]);
    }

    #[test]
    fn unknown_action_reported() {
        let s = ring2();
        let err = parse_objective("states a\npriority a 2\ntrans a phil.dance -> a\n", &s).unwrap_err();
        assert_eq!(err, ObjectiveError::UnknownAction("phil.dance".into()));
    }

    #[test]
    fn letter_classes() {
        let s = ring2();
        let gets: Vec<_> = resolve_class(&s, "get").unwrap().members().collect();
        assert_eq!(gets.len(), 2);
        let phil_spawns: Vec<_> = resolve_class(&s, "spawn:phil").unwrap().members().collect();
        assert_eq!(phil_spawns.len(), 2);
        assert_eq!(resolve_class(&s, "@p_init").unwrap().members().count(), 1);
        assert!(resolve_class(&s, "BOT").unwrap().contains(None));
    }

    #[test]
    fn templates_on_finite_trees() {
        let s = ring2();
        let dl = template(&s, &Template::GlobalDeadlock).unwrap();
        assert!(accepts_finite_tree(&dl, &deadlock(&s)));
        let stuck = parse_system("system t process p_init arity 0 init s { }").unwrap();
        let forever = template(&stuck, &Template::InstanceRunsForever { process: "p_init".into() }).unwrap();
        assert!(!accepts_finite_tree(&forever, &encode_config(&initial_config(&stuck))));
        let blocked = Template::SomeInstanceBlocked { process: "phil".into(), regex: "phil.getl".into() };
        assert!(accepts_finite_tree(&template(&s, &blocked).unwrap(), &deadlock(&s)));
        let blocked = Template::SomeInstanceBlocked { process: "phil".into(), regex: "phil.getr".into() };
        assert!(!accepts_finite_tree(&template(&s, &blocked).unwrap(), &deadlock(&s)));
        let blocked = Template::SomeInstanceBlocked { process: "first".into(), regex: "(@first)*".into() };
        assert!(accepts_finite_tree(&template(&s, &blocked).unwrap(), &deadlock(&s)));
    }

    #[test]
    fn all_instances_on_finite_trees() {
        let s = ring2();
        let one_get = parse_word_automaton("states a b\ninit a\nfinal b\ntrans a phil.getl -> b\n", &s).unwrap();
        let all = template(&s, &Template::AllInstancesIn { process: "phil".into(), word: one_get.clone() }).unwrap();
        assert!(accepts_finite_tree(&all, &deadlock(&s)));
        let none = parse_word_automaton("states a\ninit a\nfinal a\n", &s).unwrap();
        let all = template(&s, &Template::AllInstancesIn { process: "phil".into(), word: none.clone() }).unwrap();
        assert!(!accepts_finite_tree(&all, &deadlock(&s)));
        let some = template(&s, &Template::SomeInstanceIn { process: "phil".into(), word: none }).unwrap();
        assert!(!accepts_finite_tree(&some, &deadlock(&s)));
    }

    #[test]
    fn templates_round_trip() {
        let s = ring2();
        let w = parse_word_automaton("states a b\ninit a\naccept b\ntrans a any -> b\ntrans b any -> a\n", &s).unwrap();
        for t in [
            Template::GlobalDeadlock,
            Template::FinitelyManySpawns,
            Template::InstanceRunsForever { process: "phil".into() },
            Template::SomeInstanceBlocked { process: "phil".into(), regex: "phil.getl (phil.eat | nop)*".into() },
            Template::AllInstancesIn { process: "phil".into(), word: w.clone() },
            Template::SomeInstanceIn { process: "next".into(), word: w.clone() },
        ] {
            let a = template(&s, &t).unwrap();
            assert!(a.max_priority() <= 3);
            assert_eq!(parse_objective(&render_objective(&a, &s), &s).unwrap(), a, "{t:?}");
        }
    }

    #[test]
    fn template_specs() {
        let s = ring2();
        let read = |p: &str| -> Result<String, String> {
            match p {
                "w" => Ok("states a\ninit a\naccept a\ntrans a any -> a\n".into()),
                _ => Err("missing".into()),
            }
        };
        assert!(matches!(parse_template("global-deadlock", &s, read), Ok(Template::GlobalDeadlock)));
        assert!(matches!(parse_template("some-instance-in:phil:w", &s, read), Ok(Template::SomeInstanceIn { .. })));
        assert!(matches!(parse_template("some-instance-in:phil:x", &s, read), Err(ObjectiveError::Io(..))));
        assert!(matches!(parse_template("bogus", &s, read), Err(ObjectiveError::UnknownTemplate(_))));
    }
}
