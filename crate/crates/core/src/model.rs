//! DLSS data model: processes, operations, the text format and structural checks.
//!
//! A system file looks like
//!
//! ```text
//! system phil2
//! process p_init arity 0 init s0 {
//!   s0 -go-> s1 spawn first(y1=new, y2=new)
//! }
//! ```
//!
//! Action names are local to their process in the file and are stored
//! prefixed (`p_init.go`), which keeps alphabets disjoint.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ProcId(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StateId(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ActionId(pub u32);

/// Variable index, 0-based (`x1` is `Var(0)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Var(pub u8);

/// Stack symbol of a pushdown process. `StackSym::BOTTOM` is the bottom marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StackSym(pub u16);

impl StackSym {
    pub const BOTTOM: StackSym = StackSym(0);
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0 as usize + 1)
    }
}

/// Set of variables of one process, as a bit mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarSet(pub u32);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn full(arity: usize) -> Self {
        VarSet(((1u64 << arity) - 1) as u32)
    }

    pub fn contains(self, x: Var) -> bool {
        self.0 >> x.0 & 1 == 1
    }

    pub fn with(self, x: Var) -> Self {
        VarSet(self.0 | 1 << x.0)
    }

    pub fn without(self, x: Var) -> Self {
        VarSet(self.0 & !(1 << x.0))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Var> {
        (0..32u8).filter(move |i| self.0 >> i & 1 == 1).map(Var)
    }
}

impl FromIterator<Var> for VarSet {
    fn from_iter<I: IntoIterator<Item = Var>>(iter: I) -> Self {
        iter.into_iter().fold(VarSet::EMPTY, VarSet::with)
    }
}

/// Where a child variable gets its lock from at a spawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Source {
    Parent(Var),
    New,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Operation {
    Nop,
    Get(Var),
    Rel(Var),
    /// `subst[i]` is the source of child variable `i`.
    Spawn { target: ProcId, subst: Vec<Source> },
}

impl Operation {
    pub fn is_spawn(&self) -> bool {
        matches!(self, Operation::Spawn { .. })
    }

    /// Child variable that receives parent variable `x`, if any.
    pub fn passed_to(&self, x: Var) -> Option<Var> {
        match self {
            Operation::Spawn { subst, .. } => subst
                .iter()
                .position(|s| *s == Source::Parent(x))
                .map(|i| Var(i as u8)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum StackInstr {
    Skip,
    Pop,
    Push(StackSym),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub from: StateId,
    pub action: ActionId,
    pub to: StateId,
    /// Required top of stack, `None` for any.
    pub top: Option<StackSym>,
    pub instr: StackInstr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActionDecl {
    /// Full name, `process.local`.
    pub name: String,
    pub process: ProcId,
    pub op: Operation,
}

impl ActionDecl {
    pub fn local_name(&self) -> &str {
        self.name.split_once('.').map(|(_, l)| l).unwrap_or(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StackDecl {
    /// Symbol names; index 0 is the bottom marker `bot`.
    pub symbols: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProcessDecl {
    pub name: String,
    pub arity: usize,
    pub states: Vec<String>,
    pub init: StateId,
    pub actions: Vec<ActionId>,
    pub transitions: Vec<Transition>,
    pub stack: Option<StackDecl>,
    #[serde(skip)]
    out: Vec<Vec<usize>>,
}

impl ProcessDecl {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        states: Vec<String>,
        init: StateId,
        transitions: Vec<Transition>,
        stack: Option<StackDecl>,
    ) -> Self {
        let mut actions: Vec<ActionId> = transitions.iter().map(|t| t.action).collect();
        actions.sort();
        actions.dedup();
        let mut p = ProcessDecl {
            name: name.into(),
            arity,
            states,
            init,
            actions,
            transitions,
            stack,
            out: Vec::new(),
        };
        p.reindex();
        p
    }

    fn reindex(&mut self) {
        self.out = vec![Vec::new(); self.states.len()];
        for (i, t) in self.transitions.iter().enumerate() {
            if let Some(v) = self.out.get_mut(t.from.0 as usize) {
                v.push(i);
            }
        }
    }

    pub fn outgoing(&self, s: StateId) -> impl Iterator<Item = &Transition> + '_ {
        self.out
            .get(s.0 as usize)
            .into_iter()
            .flatten()
            .map(move |&i| &self.transitions[i])
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.arity).map(|i| Var(i as u8))
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0 as usize]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(|i| StateId(i as u16))
    }

    pub fn is_pushdown(&self) -> bool {
        self.stack.is_some()
    }

    pub fn stack_symbols(&self) -> usize {
        self.stack.as_ref().map_or(1, |s| s.symbols.len())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct System {
    pub name: String,
    pub processes: Vec<ProcessDecl>,
    pub actions: Vec<ActionDecl>,
    pub initial: ProcId,
}

impl System {
    pub fn process(&self, p: ProcId) -> &ProcessDecl {
        &self.processes[p.0 as usize]
    }

    pub fn action(&self, a: ActionId) -> &ActionDecl {
        &self.actions[a.0 as usize]
    }

    pub fn op(&self, a: ActionId) -> &Operation {
        &self.action(a).op
    }

    pub fn proc_id(&self, name: &str) -> Option<ProcId> {
        self.processes
            .iter()
            .position(|p| p.name == name)
            .map(|i| ProcId(i as u16))
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions
            .iter()
            .position(|a| a.name == name)
            .map(|i| ActionId(i as u32))
    }

    pub fn proc_ids(&self) -> impl Iterator<Item = ProcId> {
        (0..self.processes.len()).map(|i| ProcId(i as u16))
    }

    pub fn action_ids(&self) -> impl Iterator<Item = ActionId> {
        (0..self.actions.len()).map(|i| ActionId(i as u32))
    }

    pub fn is_pushdown(&self) -> bool {
        self.processes.iter().any(|p| p.is_pushdown())
    }

    pub fn state_count(&self) -> usize {
        self.processes.iter().map(|p| p.states.len()).sum()
    }

    /// Rebuilds per-state transition indices; call after editing `processes` by hand.
    pub fn reindex(&mut self) {
        for p in &mut self.processes {
            let mut acts: Vec<ActionId> = p.transitions.iter().map(|t| t.action).collect();
            acts.sort();
            acts.dedup();
            p.actions = acts;
            p.reindex();
        }
    }
}

pub fn max_arity(system: &System) -> usize {
    system.processes.iter().map(|p| p.arity).max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Violation {
    InitArityNonZero { process: String, arity: usize },
    AlphabetOverlap { action: String },
    UnknownSpawnTarget { action: String },
    SubstitutionArity { action: String, expected: usize, found: usize },
    SubstitutionNotInjective { action: String },
    VarOutOfRange { action: String, var: usize },
    DuplicateTransition { process: String, state: String, action: String },
    ActionProcessMismatch { action: String, process: String },
    UnknownState { process: String, index: usize },
    NondeterministicStack { process: String, state: String, action: String },
    BadStackSymbol { process: String, index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            InitArityNonZero { process, arity } => {
                write!(f, "initial process {process} has arity {arity}, expected 0")
            }
            AlphabetOverlap { action } => write!(f, "action {action} is used by several processes"),
            UnknownSpawnTarget { action } => write!(f, "action {action} spawns an unknown process"),
            SubstitutionArity { action, expected, found } => write!(
                f,
                "action {action}: substitution has {found} entries, target arity is {expected}"
            ),
            SubstitutionNotInjective { action } => {
                write!(f, "action {action}: substitution not injective")
            }
            VarOutOfRange { action, var } => {
                write!(f, "action {action}: variable x{} out of range", var + 1)
            }
            DuplicateTransition { process, state, action } => {
                write!(f, "process {process}: duplicate transition {state} -{action}->")
            }
            ActionProcessMismatch { action, process } => {
                write!(f, "action {action} used by process {process} it does not belong to")
            }
            UnknownState { process, index } => {
                write!(f, "process {process}: state index {index} out of range")
            }
            NondeterministicStack { process, state, action } => write!(
                f,
                "process {process}: overlapping stack guards for {state} -{action}->"
            ),
            BadStackSymbol { process, index } => {
                write!(f, "process {process}: stack symbol {index} out of range")
            }
        }
    }
}

/// Structural checks. The result is sorted, so it does not depend on declaration order.
pub fn validate(system: &System) -> Vec<Violation> {
    let mut out = BTreeSet::new();
    if let Some(p) = system.processes.get(system.initial.0 as usize) {
        if p.arity != 0 {
            out.insert(Violation::InitArityNonZero { process: p.name.clone(), arity: p.arity });
        }
    }
    let mut owner: HashMap<ActionId, BTreeSet<u16>> = HashMap::new();
    for (pi, p) in system.processes.iter().enumerate() {
        let mut keys: BTreeMap<(StateId, ActionId), Vec<Option<StackSym>>> = BTreeMap::new();
        for t in &p.transitions {
            owner.entry(t.action).or_default().insert(pi as u16);
            for s in [t.from, t.to] {
                if s.0 as usize >= p.states.len() {
                    out.insert(Violation::UnknownState { process: p.name.clone(), index: s.0 as usize });
                }
            }
            let nsym = p.stack_symbols();
            let mut syms: Vec<StackSym> = t.top.into_iter().collect();
            if let StackInstr::Push(g) = t.instr {
                syms.push(g);
            }
            for g in syms {
                if g.0 as usize >= nsym {
                    out.insert(Violation::BadStackSymbol { process: p.name.clone(), index: g.0 as usize });
                }
            }
            keys.entry((t.from, t.action)).or_default().push(t.top);
            let Some(decl) = system.actions.get(t.action.0 as usize) else {
                continue;
            };
            if decl.process.0 as usize != pi {
                out.insert(Violation::ActionProcessMismatch {
                    action: decl.name.clone(),
                    process: p.name.clone(),
                });
            }
            check_op(system, p, decl, &mut out);
        }
        for ((s, a), guards) in keys {
            if guards.len() < 2 {
                continue;
            }
            let state = p.states.get(s.0 as usize).cloned().unwrap_or_default();
            let action = system.actions.get(a.0 as usize).map(|d| d.name.clone()).unwrap_or_default();
            if p.stack.is_none() {
                out.insert(Violation::DuplicateTransition { process: p.name.clone(), state, action });
                continue;
            }
            let any = guards.iter().filter(|g| g.is_none()).count();
            let mut specific: Vec<_> = guards.iter().flatten().collect();
            let n = specific.len();
            specific.sort();
            specific.dedup();
            if any > 0 || specific.len() != n {
                out.insert(Violation::NondeterministicStack { process: p.name.clone(), state, action });
            }
        }
    }
    for (a, procs) in owner {
        if procs.len() > 1 {
            if let Some(d) = system.actions.get(a.0 as usize) {
                out.insert(Violation::AlphabetOverlap { action: d.name.clone() });
            }
        }
    }
    out.into_iter().collect()
}

fn check_op(system: &System, p: &ProcessDecl, decl: &ActionDecl, out: &mut BTreeSet<Violation>) {
    let in_range = |v: Var| (v.0 as usize) < p.arity;
    match &decl.op {
        Operation::Nop => {}
        Operation::Get(v) | Operation::Rel(v) => {
            if !in_range(*v) {
                out.insert(Violation::VarOutOfRange { action: decl.name.clone(), var: v.0 as usize });
            }
        }
        Operation::Spawn { target, subst } => {
            let Some(q) = system.processes.get(target.0 as usize) else {
                out.insert(Violation::UnknownSpawnTarget { action: decl.name.clone() });
                return;
            };
            if q.arity != subst.len() {
                out.insert(Violation::SubstitutionArity {
                    action: decl.name.clone(),
                    expected: q.arity,
                    found: subst.len(),
                });
            }
            let mut seen = BTreeSet::new();
            for s in subst {
                if let Source::Parent(v) = s {
                    if !in_range(*v) {
                        out.insert(Violation::VarOutOfRange { action: decl.name.clone(), var: v.0 as usize });
                    }
                    if !seen.insert(*v) {
                        out.insert(Violation::SubstitutionNotInjective { action: decl.name.clone() });
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Text format

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// All errors found while reading a system file.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
pub struct ParseErrors(pub Vec<SyntaxError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Num(usize),
    Arrow(String),
    Punct(char),
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '@'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '\'' || c == ':' || c == '@'
}

pub(crate) fn lex(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut toks = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let at = |tok| Token { tok, line: li + 1, col };
            if c == '#' {
                break;
            } else if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let n = s.parse().map_err(|_| SyntaxError {
                    line: li + 1,
                    col,
                    message: format!("number too large: {s}"),
                })?;
                toks.push(at(Tok::Num(n)));
            } else if is_ident_start(c) {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                toks.push(at(Tok::Ident(chars[start..i].iter().collect())));
            } else if c == '-' {
                if chars.get(i + 1) == Some(&'>') {
                    toks.push(at(Tok::Arrow(String::new())));
                    i += 2;
                    continue;
                }
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                if j == start || chars.get(j) != Some(&'-') || chars.get(j + 1) != Some(&'>') {
                    return Err(SyntaxError {
                        line: li + 1,
                        col,
                        message: "expected `-ACTION->`".into(),
                    });
                }
                toks.push(at(Tok::Arrow(chars[start..j].iter().collect())));
                i = j + 2;
            } else if "{}(),=;/[]|*+?!".contains(c) {
                toks.push(at(Tok::Punct(c)));
                i += 1;
            } else {
                return Err(SyntaxError { line: li + 1, col, message: format!("unexpected character `{c}`") });
            }
        }
    }
    Ok(toks)
}

pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Cursor {
    pub fn new(toks: Vec<Token>, text: &str) -> Self {
        let lines = text.lines().count().max(1);
        let last = text.lines().last().map_or(0, |l| l.chars().count());
        Cursor { toks, pos: 0, end: (lines, last + 1) }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn err(&self, message: impl Into<String>) -> SyntaxError {
        let (line, col) = self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.col));
        SyntaxError { line, col, message: message.into() }
    }

    pub fn err_prev(&self, message: impl Into<String>) -> SyntaxError {
        let t = &self.toks[self.pos.saturating_sub(1).min(self.toks.len() - 1)];
        SyntaxError { line: t.line, col: t.col, message: message.into() }
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    pub fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    pub fn num(&mut self, what: &str) -> Result<usize, SyntaxError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    pub fn keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{kw}`"))),
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    pub fn punct(&mut self, c: char) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(Tok::Punct(p)) if *p == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{c}`"))),
        }
    }

    pub fn is_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(Tok::Punct(p)) if *p == c)
    }

    pub fn position(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.col))
    }
}

#[derive(Debug)]
enum RawOp {
    Nop,
    Get(usize),
    Rel(usize),
    Spawn { target: String, args: Vec<(Option<usize>, Option<usize>)> },
}

#[derive(Debug)]
struct RawTrans {
    from: String,
    action: String,
    to: String,
    op: RawOp,
    instr: Option<Result<String, bool>>,
    top: Option<String>,
    at: (usize, usize),
}

#[derive(Debug)]
struct RawProc {
    name: String,
    arity: usize,
    stack: Option<Vec<String>>,
    init: String,
    trans: Vec<RawTrans>,
    at: (usize, usize),
}

fn parse_var(s: &str, prefix: char) -> Option<usize> {
    let rest = s.strip_prefix(prefix)?;
    let n: usize = rest.parse().ok()?;
    (n >= 1).then(|| n - 1)
}

fn parse_raw_trans(c: &mut Cursor) -> Result<RawTrans, SyntaxError> {
    let at = c.position();
    let from = c.ident("source state")?;
    let action = match c.next() {
        Some(Tok::Arrow(a)) if !a.is_empty() => a,
        _ => return Err(c.err_prev("expected `-ACTION->`")),
    };
    let to = c.ident("target state")?;
    let kw = c.ident("operation (nop, get, rel, spawn)")?;
    let op = match kw.as_str() {
        "nop" => RawOp::Nop,
        "get" | "rel" => {
            let v = c.ident("variable")?;
            let i = parse_var(&v, 'x').ok_or_else(|| c.err_prev(format!("bad variable `{v}`")))?;
            if kw == "get" {
                RawOp::Get(i)
            } else {
                RawOp::Rel(i)
            }
        }
        "spawn" => {
            let target = c.ident("process name")?;
            c.punct('(')?;
            let mut args = Vec::new();
            while !c.is_punct(')') {
                if !args.is_empty() {
                    c.punct(',')?;
                }
                let first = c.ident("argument")?;
                let (name, src) = if c.is_punct('=') {
                    c.next();
                    let y = parse_var(&first, 'y')
                        .ok_or_else(|| c.err_prev(format!("bad child variable `{first}`")))?;
                    (Some(y), c.ident("argument")?)
                } else {
                    (None, first)
                };
                let src = if src == "new" {
                    None
                } else {
                    Some(parse_var(&src, 'x').ok_or_else(|| c.err_prev(format!("bad argument `{src}`")))?)
                };
                args.push((name, src));
            }
            c.punct(')')?;
            RawOp::Spawn { target, args }
        }
        other => return Err(c.err_prev(format!("unknown operation `{other}`"))),
    };
    let mut instr = None;
    if c.is_punct(';') {
        c.next();
        let k = c.ident("stack instruction")?;
        instr = Some(match k.as_str() {
            "push" => Ok(c.ident("stack symbol")?),
            "pop" => Err(true),
            "skip" => Err(false),
            other => return Err(c.err_prev(format!("unknown stack instruction `{other}`"))),
        });
    }
    let mut top = None;
    if c.is_punct('(') {
        c.next();
        c.keyword("top")?;
        c.punct('=')?;
        top = Some(c.ident("stack symbol")?);
        c.punct(')')?;
    }
    Ok(RawTrans { from, action, to, op, instr, top, at })
}

fn parse_raw(text: &str) -> Result<(String, Option<String>, Vec<RawProc>), SyntaxError> {
    let mut c = Cursor::new(lex(text)?, text);
    c.keyword("system")?;
    let name = c.ident("system name")?;
    let mut initial = None;
    if c.is_keyword("initial") {
        c.next();
        initial = Some(c.ident("process name")?);
    }
    let mut procs = Vec::new();
    while !c.at_end() {
        let at = c.position();
        c.keyword("process")?;
        let pname = c.ident("process name")?;
        c.keyword("arity")?;
        let arity = c.num("arity")?;
        let mut stack = None;
        if c.is_keyword("stack") {
            c.next();
            c.punct('{')?;
            let mut syms = Vec::new();
            while !c.is_punct('}') {
                syms.push(c.ident("stack symbol")?);
            }
            c.next();
            stack = Some(syms);
        }
        c.keyword("init")?;
        let init = c.ident("initial state")?;
        c.punct('{')?;
        let mut trans = Vec::new();
        while !c.is_punct('}') {
            if c.at_end() {
                return Err(c.err("unterminated process body"));
            }
            trans.push(parse_raw_trans(&mut c)?);
        }
        c.next();
        procs.push(RawProc { name: pname, arity, stack, init, trans, at });
    }
    Ok((name, initial, procs))
}

fn serr(at: (usize, usize), message: impl Into<String>) -> SyntaxError {
    SyntaxError { line: at.0, col: at.1, message: message.into() }
}

/// Parses a system file. Declarations are stored in canonical (sorted) order,
/// so `parse_system(&render_system(&s)) == Ok(s)` for every parsed `s`.
pub fn parse_system(text: &str) -> Result<System, ParseErrors> {
    let (name, initial, mut raw) = parse_raw(text).map_err(|e| ParseErrors(vec![e]))?;
    let mut errors = Vec::new();
    raw.sort_by(|a, b| a.name.cmp(&b.name));
    for w in raw.windows(2) {
        if w[0].name == w[1].name {
            errors.push(serr(w[1].at, format!("duplicate declaration of process {}", w[1].name)));
        }
    }
    if !errors.is_empty() {
        return Err(ParseErrors(errors));
    }
    let pid: HashMap<&str, usize> = raw.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    let initial_name = initial.clone().unwrap_or_else(|| {
        if pid.contains_key("p_init") {
            "p_init".to_string()
        } else {
            raw.first().map(|p| p.name.clone()).unwrap_or_default()
        }
    });
    let Some(&init_idx) = pid.get(initial_name.as_str()) else {
        return Err(ParseErrors(vec![serr((1, 1), format!("unknown initial process `{initial_name}`"))]));
    };

    // Actions: collect, check consistent ops, assign sorted ids.
    let mut action_ops: BTreeMap<String, (usize, Operation, (usize, usize))> = BTreeMap::new();
    for (pi, p) in raw.iter().enumerate() {
        for t in &p.trans {
            let full = format!("{}.{}", p.name, t.action);
            let op = match resolve_op(&t.op, p, &pid, &raw) {
                Ok(op) => op,
                Err(m) => {
                    errors.push(serr(t.at, m));
                    continue;
                }
            };
            match action_ops.get(&full) {
                Some((_, prev, _)) if *prev != op => {
                    errors.push(serr(t.at, format!("action {} used with two different operations", t.action)))
                }
                Some(_) => {}
                None => {
                    action_ops.insert(full, (pi, op, t.at));
                }
            }
        }
    }
    let actions: Vec<ActionDecl> = action_ops
        .iter()
        .map(|(n, (pi, op, _))| ActionDecl { name: n.clone(), process: ProcId(*pi as u16), op: op.clone() })
        .collect();
    let aid: HashMap<&str, ActionId> =
        action_ops.keys().enumerate().map(|(i, n)| (n.as_str(), ActionId(i as u32))).collect();

    let mut processes = Vec::new();
    for p in &raw {
        let mut states: BTreeSet<String> = BTreeSet::new();
        states.insert(p.init.clone());
        for t in &p.trans {
            states.insert(t.from.clone());
            states.insert(t.to.clone());
        }
        let states: Vec<String> = states.into_iter().collect();
        let sid = |s: &str| StateId(states.iter().position(|x| x == s).unwrap() as u16);
        let symbols: Option<Vec<String>> = p.stack.as_ref().map(|syms| {
            let mut v = vec!["bot".to_string()];
            let mut sorted: Vec<String> = syms.iter().filter(|s| *s != "bot").cloned().collect();
            sorted.sort();
            sorted.dedup();
            v.extend(sorted);
            v
        });
        if let Some(syms) = &p.stack {
            let mut seen = BTreeSet::new();
            for s in syms {
                if !seen.insert(s) {
                    errors.push(serr(p.at, format!("duplicate stack symbol {s}")));
                }
            }
        }
        let sym = |name: &str, at| -> Result<StackSym, SyntaxError> {
            match &symbols {
                None => Err(serr(at, format!("process {} has no stack", p.name))),
                Some(v) => v
                    .iter()
                    .position(|x| x == name)
                    .map(|i| StackSym(i as u16))
                    .ok_or_else(|| serr(at, format!("unknown stack symbol `{name}`"))),
            }
        };
        let mut transitions = Vec::new();
        let mut keys = BTreeSet::new();
        for t in &p.trans {
            let full = format!("{}.{}", p.name, t.action);
            let Some(&a) = aid.get(full.as_str()) else { continue };
            let instr = match &t.instr {
                None | Some(Err(false)) => StackInstr::Skip,
                Some(Err(true)) => StackInstr::Pop,
                Some(Ok(g)) => match sym(g, t.at) {
                    Ok(s) if s != StackSym::BOTTOM => StackInstr::Push(s),
                    Ok(_) => {
                        errors.push(serr(t.at, "cannot push the bottom symbol"));
                        continue;
                    }
                    Err(e) => {
                        errors.push(e);
                        continue;
                    }
                },
            };
            if symbols.is_none() && instr != StackInstr::Skip {
                errors.push(serr(t.at, format!("process {} has no stack", p.name)));
                continue;
            }
            let top = match &t.top {
                None => None,
                Some(g) => match sym(g, t.at) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        errors.push(e);
                        continue;
                    }
                },
            };
            if !keys.insert((t.from.clone(), t.action.clone(), top)) {
                errors.push(serr(t.at, format!("duplicate transition {} -{}->", t.from, t.action)));
                continue;
            }
            transitions.push(Transition { from: sid(&t.from), action: a, to: sid(&t.to), top, instr });
        }
        transitions.sort_by_key(|t| (t.from, t.action, t.top));
        let init = sid(&p.init);
        processes.push(ProcessDecl::new(
            p.name.clone(),
            p.arity,
            states,
            init,
            transitions,
            symbols.map(|symbols| StackDecl { symbols }),
        ));
    }
    if !errors.is_empty() {
        return Err(ParseErrors(errors));
    }
    Ok(System { name, processes, actions, initial: ProcId(init_idx as u16) })
}

fn resolve_op(
    op: &RawOp,
    p: &RawProc,
    pid: &HashMap<&str, usize>,
    raw: &[RawProc],
) -> Result<Operation, String> {
    let var = |i: usize| -> Result<Var, String> {
        if i < p.arity {
            Ok(Var(i as u8))
        } else {
            Err(format!("unknown variable x{} in process {} of arity {}", i + 1, p.name, p.arity))
        }
    };
    Ok(match op {
        RawOp::Nop => Operation::Nop,
        RawOp::Get(i) => Operation::Get(var(*i)?),
        RawOp::Rel(i) => Operation::Rel(var(*i)?),
        RawOp::Spawn { target, args } => {
            let &q = pid.get(target.as_str()).ok_or_else(|| format!("unknown process `{target}`"))?;
            let qa = raw[q].arity;
            let mut subst: Vec<Option<Source>> = vec![None; qa];
            let named = args.iter().any(|(n, _)| n.is_some());
            if named && args.iter().any(|(n, _)| n.is_none()) {
                return Err("mixing named and positional spawn arguments".into());
            }
            if args.len() != qa {
                return Err(format!("spawn {target}: expected {qa} arguments, found {}", args.len()));
            }
            for (k, (n, src)) in args.iter().enumerate() {
                let y = n.unwrap_or(k);
                if y >= qa {
                    return Err(format!("spawn {target}: unknown child variable y{}", y + 1));
                }
                if subst[y].is_some() {
                    return Err(format!("spawn {target}: child variable y{} given twice", y + 1));
                }
                subst[y] = Some(match src {
                    None => Source::New,
                    Some(i) => Source::Parent(var(*i)?),
                });
            }
            let subst: Vec<Source> = subst.into_iter().map(|s| s.unwrap()).collect();
            let mut seen = BTreeSet::new();
            for s in &subst {
                if let Source::Parent(v) = s {
                    if !seen.insert(*v) {
                        return Err("substitution not injective".into());
                    }
                }
            }
            Operation::Spawn { target: ProcId(q as u16), subst }
        }
    })
}

/// Canonical text form: processes sorted by name, transitions sorted.
pub fn render_system(system: &System) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system {}", system.name);
    let _ = writeln!(out, "initial {}", system.process(system.initial).name);
    let mut order: Vec<&ProcessDecl> = system.processes.iter().collect();
    order.sort_by(|a, b| a.name.cmp(&b.name));
    for p in order {
        let _ = write!(out, "process {} arity {}", p.name, p.arity);
        if let Some(st) = &p.stack {
            let _ = write!(out, " stack {{");
            for s in st.symbols.iter().skip(1) {
                let _ = write!(out, " {s}");
            }
            let _ = write!(out, " }}");
        }
        let _ = writeln!(out, " init {} {{", p.state_name(p.init));
        let mut ts: Vec<&Transition> = p.transitions.iter().collect();
        ts.sort_by_key(|t| (p.state_name(t.from).to_string(), system.action(t.action).name.clone(), t.top));
        for t in ts {
            let decl = system.action(t.action);
            let _ = write!(
                out,
                "  {} -{}-> {} {}",
                p.state_name(t.from),
                decl.local_name(),
                p.state_name(t.to),
                render_op(system, &decl.op)
            );
            if let Some(st) = &p.stack {
                match t.instr {
                    StackInstr::Skip => {}
                    StackInstr::Pop => out.push_str("; pop"),
                    StackInstr::Push(g) => {
                        let _ = write!(out, "; push {}", st.symbols[g.0 as usize]);
                    }
                }
                if let Some(g) = t.top {
                    let _ = write!(out, " (top={})", st.symbols[g.0 as usize]);
                }
            }
            out.push('\n');
        }
        out.push_str("}\n");
    }
    out
}

pub fn render_op(system: &System, op: &Operation) -> String {
    match op {
        Operation::Nop => "nop".into(),
        Operation::Get(v) => format!("get {v}"),
        Operation::Rel(v) => format!("rel {v}"),
        Operation::Spawn { target, subst } => {
            let args: Vec<String> = subst
                .iter()
                .enumerate()
                .map(|(i, s)| match s {
                    Source::New => format!("y{}=new", i + 1),
                    Source::Parent(v) => format!("y{}={v}", i + 1),
                })
                .collect();
            format!("spawn {}({})", system.process(*target).name, args.join(", "))
        }
    }
}
