//! The Büchi tree automaton accepting limit configurations of fair runs.
//!
//! A state describes one node: its process label, the variables it holds, and
//! the guessed certificate (coloring, `H^s`, order) together with the states
//! of three acceptance trackers. Components can be switched off through
//! [`LimitConfig`] so each one can be tested on its own.
//!
//! Recurrence of uncolored slots is checked with obligations. Every
//! uncolored slot asks for a get or release of its lock strictly below, along
//! a guessed path in the lock's scope, and a held uncolored slot asks for a
//! release on the leftmost path. A breakpoint set of watched obligations must
//! empty infinitely often on every branch.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::automata::{complement_small_nba, Nba, NbaComplement, RankState, Succ, TreeAutomaton, TreeLetter};
use crate::model::{ActionId, Operation, ProcId, Source, StackInstr, StackSym, StateId, System, Transition, Var, VarSet};
use crate::nested::check_nested;
use crate::oracle::{Color, HsMode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LimitError {
    #[error("process {0} does not lock in stack order")]
    NotNested(String),
    #[error("arity {0} exceeds the supported maximum of 8")]
    ArityTooLarge(usize),
}

/// Which components take part in the product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LimitConfig {
    pub coloring: bool,
    pub hs: bool,
    pub f2: bool,
    pub order: bool,
    pub chains: bool,
    pub hs_mode: HsMode,
    /// Largest rank used by the complemented chain tracker.
    pub chain_rank_bound: Option<u8>,
}

impl LimitConfig {
    pub const B1: LimitConfig = LimitConfig {
        coloring: false,
        hs: false,
        f2: false,
        order: false,
        chains: false,
        hs_mode: HsMode::Amended,
        chain_rank_bound: None,
    };
    pub const BC: LimitConfig = LimitConfig { coloring: true, ..Self::B1 };
    pub const BH: LimitConfig = LimitConfig { hs: true, ..Self::BC };
    pub const B2: LimitConfig = LimitConfig { f2: true, ..Self::BH };
    pub const BO: LimitConfig = LimitConfig { order: true, ..Self::BH };
    pub const B5: LimitConfig = LimitConfig { chains: true, ..Self::BO };
    pub const FULL: LimitConfig = LimitConfig { f2: true, ..Self::B5 };
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self::FULL
    }
}

pub const MAX_SLOTS: usize = 8;

/// A short inline vector of per-slot values.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SlotVec<T> {
    len: u8,
    items: [T; MAX_SLOTS],
}

impl<T: Copy> SlotVec<T> {
    pub fn new(fill: T) -> Self {
        SlotVec { len: 0, items: [fill; MAX_SLOTS] }
    }

    pub fn filled(fill: T, len: usize) -> Self {
        SlotVec { len: len as u8, items: [fill; MAX_SLOTS] }
    }

    pub fn push(&mut self, x: T) {
        self.items[self.len as usize] = x;
        self.len += 1;
    }

    pub fn insert(&mut self, i: usize, x: T) {
        let n = self.len as usize;
        self.items.copy_within(i..n, i + 1);
        self.items[i] = x;
        self.len += 1;
    }
}

impl<T: fmt::Debug> fmt::Debug for SlotVec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.items[..self.len as usize]).finish()
    }
}

impl<T> std::ops::Deref for SlotVec<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.items[..self.len as usize]
    }
}

impl<T> std::ops::DerefMut for SlotVec<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.items[..self.len as usize]
    }
}

pub type SlotColors = SlotVec<Color>;
pub type SlotOrder = SlotVec<Var>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LimitState {
    pub process: ProcId,
    pub state: StateId,
    pub action: Option<ActionId>,
    pub held: VarSet,
    pub colors: SlotColors,
    pub hs: VarSet,
    /// Variables of `hs`, smallest first.
    pub order: SlotOrder,
    /// Operation obligations routed into this node.
    pub ob: VarSet,
    pub watch_ob: VarSet,
    pub watch_rel: VarSet,
    pub ev: RankState,
    pub chain: RankState,
    pub counter: u8,
}

impl LimitState {
    fn color(&self, x: Var) -> Color {
        self.colors.get(x.0 as usize).copied().unwrap_or(Color::Avoids)
    }

    fn with_color(&self, c: Color) -> VarSet {
        self.colors.iter().enumerate().filter(|(_, &k)| k == c).map(|(i, _)| Var(i as u8)).collect()
    }

    fn uncolored(&self) -> VarSet {
        self.with_color(Color::Uncolored)
    }

    fn eventual(&self) -> VarSet {
        self.colors.iter().enumerate().filter(|(_, k)| k.is_eventual()).map(|(i, _)| Var(i as u8)).collect()
    }

    fn pending_ob(&self) -> VarSet {
        VarSet(self.ob.0 | self.uncolored().0)
    }

    fn pending_rel(&self) -> VarSet {
        VarSet(self.uncolored().0 & self.held.0)
    }

    fn breakpoint(&self) -> bool {
        self.watch_ob.is_empty() && self.watch_rel.is_empty()
    }
}

/// A transition of the limit automaton together with the stack instruction
/// of the process transition it simulates on the left branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LimitMove {
    pub letter: TreeLetter,
    pub succ: Succ<LimitState>,
    pub instr: StackInstr,
}

pub struct LimitAutomaton<'a> {
    pub system: &'a System,
    pub config: LimitConfig,
    /// Number of variable slots: the maximal arity.
    pub slots: usize,
    pub ev: NbaComplement,
    pub chain: NbaComplement,
}

fn radix(slots: usize) -> usize {
    slots + 1
}

/// Letter of the ev-trace tracker: where each parent slot goes in the child,
/// and which child slots are eventually colored.
pub fn ev_letter(slots: usize, map: &[Option<Var>], eventual: VarSet) -> usize {
    map_code(slots, map) * (1 << slots) + eventual.0 as usize
}

/// Letter of the chain tracker: the slot map and the order at the parent.
pub fn chain_letter(slots: usize, map: &[Option<Var>], order: &[Var]) -> usize {
    let mut pos = vec![None; slots];
    for (i, x) in order.iter().enumerate() {
        pos[x.0 as usize] = Some(Var(i as u8));
    }
    map_code(slots, map) * radix(slots).pow(slots as u32) + map_code(slots, &pos)
}

fn map_code(slots: usize, map: &[Option<Var>]) -> usize {
    let r = radix(slots);
    (0..slots).rev().fold(0, |acc, i| acc * r + map.get(i).copied().flatten().map_or(slots, |v| v.0 as usize))
}

fn decode_map(slots: usize, mut code: usize) -> Vec<Option<Var>> {
    let r = radix(slots);
    (0..slots)
        .map(|_| {
            let v = code % r;
            code /= r;
            (v < slots).then_some(Var(v as u8))
        })
        .collect()
}

/// NBA accepting branches along which some ev-trace is infinite. State 0 is
/// idle, state `1 + i` follows slot `i`.
pub fn ev_tracker(slots: usize) -> Nba {
    let letters = radix(slots).pow(slots as u32) << slots;
    let mut nba = Nba::new(slots + 1, letters);
    nba.initial = vec![0];
    for i in 0..slots {
        nba.accepting[1 + i] = true;
    }
    for a in 0..letters {
        let map = decode_map(slots, a >> slots);
        let ev = VarSet((a & ((1 << slots) - 1)) as u32);
        nba.add(0, a, 0);
        for j in ev.iter() {
            nba.add(0, a, 1 + j.0 as usize);
        }
        for (i, m) in map.iter().enumerate() {
            if let Some(j) = m {
                if ev.contains(*j) {
                    nba.add(1 + i, a, 1 + j.0 as usize);
                }
            }
        }
    }
    nba
}

/// NBA accepting branches carrying an infinite descending chain. State 0 is
/// idle, `1 + i` follows slot `i`, and `1 + slots + i` has just dropped to
/// slot `i`.
pub fn chain_tracker(slots: usize) -> Nba {
    let r = radix(slots).pow(slots as u32);
    let letters = r * r;
    let mut nba = Nba::new(2 * slots + 1, letters);
    nba.initial = vec![0];
    for i in 0..slots {
        nba.accepting[1 + slots + i] = true;
    }
    for a in 0..letters {
        let map = decode_map(slots, a / r);
        let pos = decode_map(slots, a % r);
        nba.add(0, a, 0);
        for i in 0..slots {
            if let (Some(_), Some(j)) = (pos[i], map[i]) {
                nba.add(0, a, 1 + j.0 as usize);
            }
        }
        for i in 0..slots {
            let Some(pi) = pos[i] else { continue };
            for from in [1 + i, 1 + slots + i] {
                if let Some(j) = map[i] {
                    nba.add(from, a, 1 + j.0 as usize);
                }
                for k in 0..slots {
                    if let (Some(pk), Some(j)) = (pos[k], map[k]) {
                        if pk < pi {
                            nba.add(from, a, 1 + slots + j.0 as usize);
                        }
                    }
                }
            }
        }
    }
    nba
}

pub fn build_b1(system: &System) -> LimitAutomaton<'_> {
    LimitAutomaton::new(system, LimitConfig::B1)
}

pub fn build_bc(system: &System) -> LimitAutomaton<'_> {
    LimitAutomaton::new(system, LimitConfig::BC)
}

pub fn build_bh(system: &System) -> LimitAutomaton<'_> {
    LimitAutomaton::new(system, LimitConfig::BH)
}

pub fn build_b2(system: &System) -> LimitAutomaton<'_> {
    LimitAutomaton::new(system, LimitConfig::B2)
}

pub fn build_bo(system: &System) -> LimitAutomaton<'_> {
    LimitAutomaton::new(system, LimitConfig::BO)
}

pub fn build_b5(system: &System) -> LimitAutomaton<'_> {
    LimitAutomaton::new(system, LimitConfig::B5)
}

/// The full product, refusing systems that are not nested.
pub fn build_limit_automaton(system: &System) -> Result<LimitAutomaton<'_>, LimitError> {
    build_limit_automaton_with(system, LimitConfig::FULL)
}

pub fn build_limit_automaton_with(system: &System, config: LimitConfig) -> Result<LimitAutomaton<'_>, LimitError> {
    if let Some(bad) = check_nested(system).first_violation() {
        return Err(LimitError::NotNested(bad.name.clone()));
    }
    let ar = crate::model::max_arity(system);
    if ar > 8 {
        return Err(LimitError::ArityTooLarge(ar));
    }
    Ok(LimitAutomaton::new(system, config))
}

impl<'a> LimitAutomaton<'a> {
    /// Builds the automaton without the nestedness check.
    pub fn new(system: &'a System, config: LimitConfig) -> Self {
        let slots = crate::model::max_arity(system);
        let ev = complement_small_nba(&ev_tracker(if config.coloring { slots } else { 0 })).expect("tracker fits");
        let chain_slots = if config.chains { slots } else { 0 };
        let mut chain = complement_small_nba(&chain_tracker(chain_slots)).expect("tracker fits");
        if let Some(b) = config.chain_rank_bound {
            chain = chain.with_max_rank(b);
        }
        LimitAutomaton { system, config, slots, ev, chain }
    }

    fn ev_slots(&self) -> usize {
        if self.config.coloring {
            self.slots
        } else {
            0
        }
    }

    fn chain_slots(&self) -> usize {
        if self.config.chains {
            self.slots
        } else {
            0
        }
    }

    fn priority_of(&self, q: &LimitState) -> u8 {
        if q.counter == 0 && self.event(q, 0) {
            2
        } else {
            1
        }
    }

    fn event(&self, q: &LimitState, k: u8) -> bool {
        match k {
            0 => self.ev.is_accepting(&q.ev),
            1 => self.chain.is_accepting(&q.chain),
            _ => q.breakpoint(),
        }
    }

    fn next_counter(&self, q: &LimitState) -> u8 {
        if self.event(q, q.counter) {
            (q.counter + 1) % 3
        } else {
            q.counter
        }
    }

    /// Transitions available at `(p, s)` under the given stack top. `None`
    /// ignores stack guards.
    fn transitions(&self, q: &LimitState, top: Option<StackSym>) -> impl Iterator<Item = &'a Transition> + '_ {
        self.system.process(q.process).outgoing(q.state).filter(move |t| match top {
            None => true,
            Some(g) => {
                (t.top.is_none() || t.top == Some(g)) && !(t.instr == StackInstr::Pop && g == StackSym::BOTTOM)
            }
        })
    }

    /// Local side conditions of a single node.
    fn valid(&self, q: &LimitState) -> bool {
        for (i, c) in q.colors.iter().enumerate() {
            let held = q.held.contains(Var(i as u8));
            if (*c == Color::Keeps && !held) || (*c == Color::Avoids && held) {
                return false;
            }
        }
        if self.config.order {
            for (i, &x) in q.order.iter().enumerate() {
                if q.color(x) == Color::Keeps
                    && !q.order[..i].iter().all(|&y| matches!(q.color(y), Color::Keeps | Color::Avoids))
                {
                    return false;
                }
            }
        }
        true
    }

    fn leaf_ok(&self, q: &LimitState, top: Option<StackSym>) -> bool {
        if self.config.coloring {
            for (i, c) in q.colors.iter().enumerate() {
                let want = if q.held.contains(Var(i as u8)) { Color::Keeps } else { Color::Avoids };
                if *c != want {
                    return false;
                }
            }
        }
        if !q.ob.is_empty() {
            return false;
        }
        if self.config.f2 {
            return self.transitions(q, top).all(|t| match self.system.op(t.action) {
                Operation::Get(x) => q.hs.contains(*x),
                Operation::Rel(x) => !q.held.contains(*x),
                _ => false,
            });
        }
        true
    }

    pub fn initial_state(&self) -> LimitState {
        let p = self.system.initial;
        LimitState {
            process: p,
            state: self.system.process(p).init,
            action: None,
            held: VarSet::EMPTY,
            colors: SlotColors::new(Color::Avoids),
            hs: VarSet::EMPTY,
            order: SlotOrder::new(Var(0)),
            ob: VarSet::EMPTY,
            watch_ob: VarSet::EMPTY,
            watch_rel: VarSet::EMPTY,
            ev: self.ev.initial(),
            chain: self.chain.initial(),
            counter: 0,
        }
    }

    /// Finishes a child: tracker steps, obligations and breakpoints.
    #[allow(clippy::too_many_arguments)]
    fn finish_child(
        &self,
        parent: &LimitState,
        mut child: LimitState,
        map: &[Option<Var>],
        routed: VarSet,
        left: bool,
        counter: u8,
    ) -> LimitState {
        let discharged = match child.action.map(|a| self.system.op(a)) {
            Some(Operation::Get(x) | Operation::Rel(x)) if left => VarSet::EMPTY.with(*x),
            _ => VarSet::EMPTY,
        };
        let carry = |set: VarSet| -> VarSet {
            set.iter().filter_map(|x| map.get(x.0 as usize).copied().flatten()).filter(|y| !discharged.contains(*y)).collect()
        };
        child.ob = carry(routed);
        if parent.breakpoint() {
            child.watch_ob = child.pending_ob();
            child.watch_rel = child.pending_rel();
        } else {
            child.watch_ob = VarSet(carry(VarSet(parent.watch_ob.0 & routed.0)).0);
            child.watch_rel = if left {
                VarSet(carry(parent.watch_rel).0 & child.pending_rel().0)
            } else {
                VarSet::EMPTY
            };
        }
        if self.ev_slots() > 0 {
            let a = ev_letter(self.slots, map, child.eventual());
            child.ev = self.ev.canonical_successor(&parent.ev, a);
        }
        if self.chain_slots() > 0 {
            let a = chain_letter(self.slots, map, &parent.order);
            child.chain = self.chain.canonical_successor(&parent.chain, a);
        }
        child.counter = counter;
        child
    }

    fn identity_map(&self, q: &LimitState) -> Vec<Option<Var>> {
        (0..self.slots).map(|i| (i < self.arity(q.process)).then_some(Var(i as u8))).collect()
    }

    fn arity(&self, p: ProcId) -> usize {
        self.system.process(p).arity
    }

    /// All moves from `q`, restricted to `letter` when given.
    pub fn limit_moves(&self, q: &LimitState, letter: Option<TreeLetter>, top: Option<StackSym>) -> Vec<LimitMove> {
        let mut out = Vec::new();
        let wants = |br: u8| letter.is_none_or(|l| l.action == q.action && l.branching == br);
        if wants(0) && self.leaf_ok(q, top) {
            out.push(LimitMove { letter: TreeLetter::new(q.action, 0), succ: Succ::Top, instr: StackInstr::Skip });
        }
        if !(wants(1) || wants(2)) {
            return out;
        }
        let counter = self.next_counter(q);
        for t in self.transitions(q, top) {
            let op = self.system.op(t.action);
            if op.is_spawn() {
                if wants(2) {
                    self.spawn_moves(q, t, counter, &mut out);
                }
            } else if wants(1) {
                self.unary_moves(q, t, counter, &mut out);
            }
        }
        out
    }

    fn unary_moves(&self, q: &LimitState, t: &Transition, counter: u8, out: &mut Vec<LimitMove>) {
        let op = self.system.op(t.action);
        let mut held = q.held;
        let mut touched = None;
        match op {
            Operation::Get(x) => {
                if held.contains(*x) {
                    return;
                }
                held = held.with(*x);
                touched = Some((true, *x));
            }
            Operation::Rel(x) => {
                if !held.contains(*x) {
                    return;
                }
                held = held.without(*x);
                touched = Some((false, *x));
            }
            _ => {}
        }
        let base = LimitState { state: t.to, action: Some(t.action), held, ..*q };
        let mut options = vec![base.colors];
        if let (Some((get, x)), true) = (touched, self.config.coloring) {
            let c = q.color(x);
            let next: &[Color] = match (get, c) {
                (true, Color::EvKeeps) => &[Color::Keeps, Color::EvKeeps],
                (true, Color::EvAvoids) => &[Color::EvAvoids],
                (false, Color::EvKeeps) => &[Color::EvKeeps],
                (false, Color::EvAvoids) => &[Color::Avoids, Color::EvAvoids],
                (_, Color::Uncolored) => &[Color::Uncolored],
                _ => &[],
            };
            options = next
                .iter()
                .map(|&k| {
                    let mut v = base.colors;
                    v[x.0 as usize] = k;
                    v
                })
                .collect();
        }
        let map = self.identity_map(q);
        for colors in options {
            let child = LimitState { colors, ..base };
            if !self.valid(&child) {
                continue;
            }
            let child = self.finish_child(q, child, &map, q.pending_ob(), true, counter);
            out.push(LimitMove { letter: TreeLetter::new(q.action, 1), succ: Succ::One(child), instr: t.instr });
        }
    }

    fn spawn_moves(&self, q: &LimitState, t: &Transition, counter: u8, out: &mut Vec<LimitMove>) {
        let op = self.system.op(t.action);
        let Operation::Spawn { target, subst } = op else { return };
        let ar_r = subst.len();
        let left_base = LimitState { state: t.to, action: Some(t.action), ..*q };
        let right_base = LimitState {
            process: *target,
            state: self.system.process(*target).init,
            action: None,
            held: VarSet::EMPTY,
            colors: SlotColors::filled(Color::Avoids, ar_r),
            hs: VarSet::EMPTY,
            order: SlotOrder::new(Var(0)),
            ..*q
        };
        let lmap = self.identity_map(q);
        let rmap: Vec<Option<Var>> = (0..self.slots).map(|i| op.passed_to(Var(i as u8))).collect();

        // color pairs per parent slot, then colors for fresh right slots
        let mut pairs: Vec<(SlotColors, SlotColors)> = vec![(SlotColors::new(Color::Avoids), right_base.colors)];
        if self.config.coloring {
            for (xi, &c) in q.colors.iter().enumerate() {
                let slot = rmap[xi];
                let mut next = Vec::with_capacity(pairs.len() * 4);
                for (l, r) in &pairs {
                    match slot {
                        None => {
                            let mut l = *l;
                            l.push(c);
                            next.push((l, *r));
                        }
                        Some(y) => {
                            for (a, b) in spawn_pairs(c) {
                                let (mut l, mut r) = (*l, *r);
                                l.push(a);
                                r[y.0 as usize] = b;
                                next.push((l, r));
                            }
                        }
                    }
                }
                pairs = next;
            }
            for (yi, s) in subst.iter().enumerate() {
                if *s != Source::New {
                    continue;
                }
                let mut next = Vec::with_capacity(pairs.len() * 4);
                for (l, r) in &pairs {
                    for k in [Color::EvKeeps, Color::Avoids, Color::EvAvoids, Color::Uncolored] {
                        let mut r = *r;
                        r[yi] = k;
                        next.push((*l, r));
                    }
                }
                pairs = next;
            }
        } else {
            pairs = vec![(SlotColors::new(Color::Avoids), SlotColors::new(Color::Avoids))];
        }

        let pending = q.pending_ob();
        let movable: Vec<Var> = pending.iter().filter(|x| rmap[x.0 as usize].is_some()).collect();
        for (lc, rc) in pairs {
            let left = LimitState { colors: lc, ..left_base };
            if !self.valid(&left) {
                continue;
            }
            let mut right = LimitState { colors: rc, ..right_base };
            if self.config.hs {
                right.hs = subst
                    .iter()
                    .enumerate()
                    .filter(|(yi, s)| match (s, self.config.hs_mode) {
                        (Source::New, _) => rc[*yi] == Color::EvKeeps,
                        (Source::Parent(x), HsMode::Amended) => q.hs.contains(*x),
                        (Source::Parent(x), HsMode::Strict) => q.color(*x) == Color::EvKeeps,
                    })
                    .map(|(yi, _)| Var(yi as u8))
                    .collect();
            }
            let orders = if self.config.order {
                let carried: Vec<Var> = q.order.iter().filter_map(|&x| rmap[x.0 as usize]).collect();
                interleavings(&carried, right.hs)
            } else {
                vec![SlotOrder::new(Var(0))]
            };
            for order in orders {
                let right = LimitState { order, ..right };
                if !self.valid(&right) {
                    continue;
                }
                for mask in 0..(1u32 << movable.len()) {
                    let to_right: VarSet =
                        movable.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x).collect();
                    let to_left = VarSet(pending.0 & !to_right.0);
                    let l = self.finish_child(q, left, &lmap, to_left, true, counter);
                    let r = self.finish_child(q, right, &rmap, to_right, false, counter);
                    out.push(LimitMove { letter: TreeLetter::new(q.action, 2), succ: Succ::Two(l, r), instr: t.instr });
                }
            }
        }
    }
}


/// Colors of (left, right) allowed when a slot colored `c` is passed on.
fn spawn_pairs(c: Color) -> Vec<(Color, Color)> {
    use Color::*;
    let avoiding = [Avoids, EvAvoids];
    match c {
        Keeps => vec![(Keeps, Avoids)],
        Avoids => vec![(Avoids, Avoids)],
        EvKeeps => {
            let mut v: Vec<(Color, Color)> = avoiding.iter().map(|&a| (EvKeeps, a)).collect();
            v.extend(avoiding.iter().map(|&a| (a, EvKeeps)));
            v
        }
        EvAvoids => vec![(Avoids, EvAvoids), (EvAvoids, Avoids), (EvAvoids, EvAvoids)],
        Uncolored => {
            let ok = [Avoids, EvAvoids, Uncolored];
            let mut v = Vec::new();
            for a in ok {
                for b in ok {
                    if a == Uncolored || b == Uncolored {
                        v.push((a, b));
                    }
                }
            }
            v
        }
    }
}

/// Orders on `dom` that list `carried` in the given relative order.
fn interleavings(carried: &[Var], dom: VarSet) -> Vec<SlotOrder> {
    let mut base = SlotOrder::new(Var(0));
    for &x in carried.iter().filter(|x| dom.contains(**x)) {
        base.push(x);
    }
    let mut out = vec![base];
    for x in dom.iter().filter(|x| !carried.contains(x)) {
        out = out
            .into_iter()
            .flat_map(|o| {
                (0..=o.len()).map(move |i| {
                    let mut o = o;
                    o.insert(i, x);
                    o
                })
            })
            .collect();
    }
    out
}

impl TreeAutomaton for LimitAutomaton<'_> {
    type State = LimitState;

    fn initial(&self) -> LimitState {
        self.initial_state()
    }

    fn priority(&self, q: &LimitState) -> u8 {
        self.priority_of(q)
    }

    fn actions(&self) -> usize {
        self.system.actions.len()
    }

    fn moves(&self, q: &LimitState) -> Vec<(TreeLetter, Succ<LimitState>)> {
        self.limit_moves(q, None, None).into_iter().map(|m| (m.letter, m.succ)).collect()
    }

    fn moves_on(&self, q: &LimitState, letter: TreeLetter) -> Vec<Succ<LimitState>> {
        self.limit_moves(q, Some(letter), None).into_iter().map(|m| m.succ).collect()
    }
}

/// The limit automaton with the acceptance-only components (trackers,
/// breakpoints and the event counter) reset at every node. Tracker steps are
/// total, so a finite tree is accepted by this view iff it is accepted by
/// the automaton itself, while far fewer states are distinguished.
pub struct FiniteView<'b, 'a>(pub &'b LimitAutomaton<'a>);

impl FiniteView<'_, '_> {
    fn strip(&self, q: LimitState) -> LimitState {
        let init = self.0.initial_state();
        LimitState { ev: init.ev, chain: init.chain, counter: 0, watch_ob: VarSet::EMPTY, watch_rel: VarSet::EMPTY, ..q }
    }
}

impl TreeAutomaton for FiniteView<'_, '_> {
    type State = LimitState;

    fn initial(&self) -> LimitState {
        self.strip(self.0.initial_state())
    }

    fn priority(&self, _: &LimitState) -> u8 {
        1
    }

    fn actions(&self) -> usize {
        self.0.actions()
    }

    fn moves(&self, q: &LimitState) -> Vec<(TreeLetter, Succ<LimitState>)> {
        let mut out: Vec<_> = self.0.moves(q).into_iter().map(|(l, s)| (l, s.map(|c| self.strip(c)))).collect();
        out.sort();
        out.dedup();
        out
    }

    fn moves_on(&self, q: &LimitState, letter: TreeLetter) -> Vec<Succ<LimitState>> {
        let mut out: Vec<_> = self.0.moves_on(q, letter).into_iter().map(|s| s.map(|c| self.strip(c))).collect();
        out.sort();
        out.dedup();
        out
    }
}
