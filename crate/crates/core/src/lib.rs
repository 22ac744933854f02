//! Model checking of dynamic lock-sharing systems under process fairness.
//!
//! A system spawns processes that share locks through substitutions at spawn
//! time. Executions are represented as configuration trees, fair limits are
//! characterised by a finite set of local conditions, and those conditions
//! are checked by a Büchi tree automaton combined with an objective and
//! decided by a parity game.

pub mod automata;
pub mod crosscheck;
pub mod game;
pub mod limitaut;
pub mod model;
pub mod nested;
pub mod objectives;
pub mod oracle;
pub mod pushdown;
pub mod random;
pub mod semantics;

pub use model::{parse_system, render_system, validate, System};
