//! Random small systems for differential testing.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{parse_system, validate, System};
use crate::nested::check_nested;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomParams {
    pub max_procs: usize,
    pub max_arity: usize,
    pub max_states: usize,
    pub max_transitions: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams { max_procs: 3, max_arity: 2, max_states: 4, max_transitions: 5 }
    }
}

/// Source text of a random system. Process `p0` is initial with arity 0.
pub fn random_source(rng: &mut impl Rng, params: &RandomParams) -> String {
    let procs = rng.gen_range(1..=params.max_procs.max(1));
    let arities: Vec<usize> =
        (0..procs).map(|i| if i == 0 { 0 } else { rng.gen_range(0..=params.max_arity) }).collect();
    let mut text = String::from("system random\n");
    for (p, &arity) in arities.iter().enumerate() {
        let states = rng.gen_range(1..=params.max_states.max(1));
        text += &format!("process p{p} arity {arity} init s0 {{\n");
        for a in 0..rng.gen_range(0..=params.max_transitions) {
            let from = rng.gen_range(0..states);
            let to = rng.gen_range(0..states);
            let op = match rng.gen_range(0..4) {
                1 | 2 if arity > 0 => {
                    let kw = ["get", "rel"][rng.gen_range(0..2)];
                    format!("{kw} x{}", rng.gen_range(1..=arity))
                }
                3 if procs > 1 => {
                    let target = rng.gen_range(1..procs);
                    let args: Vec<String> = (0..arities[target])
                        .map(|_| {
                            if arity > 0 && rng.gen_bool(0.6) {
                                format!("x{}", rng.gen_range(1..=arity))
                            } else {
                                "new".to_string()
                            }
                        })
                        .collect();
                    format!("spawn p{target}({})", args.join(", "))
                }
                _ => "nop".to_string(),
            };
            text += &format!("  s{from} -a{a}-> s{to} {op}\n");
        }
        text += "}\n";
    }
    text
}

/// A random system that parses, validates and is nested.
pub fn random_nested_system(rng: &mut impl Rng, params: &RandomParams) -> System {
    loop {
        let text = random_source(rng, params);
        let Ok(system) = parse_system(&text) else { continue };
        if validate(&system).is_empty() && check_nested(&system).is_nested() {
            return system;
        }
    }
}

/// `n` random nested systems; every other one is required to spawn.
pub fn random_batch(rng: &mut impl Rng, params: &RandomParams, n: usize) -> Vec<System> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s = random_nested_system(rng, params);
        let spawns = s.actions.iter().any(|a| a.op.is_spawn());
        if spawns || out.len() % 2 == 1 {
            out.push(s);
        }
    }
    out.shuffle(rng);
    out
}
