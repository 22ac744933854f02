//! Three independent characterisations of finite fair limits compared on the
//! same trees: the limit automaton, the direct checks with a certificate
//! search, and explicit enumeration of runs.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::automata::{accepts_finite_tree, encode_config, ParityNta};
use crate::limitaut::{build_limit_automaton, FiniteView, LimitError};
use crate::model::System;
use crate::oracle::{certificate_search, check_f};
use crate::semantics::{
    enumerate_delta_trees, enumerate_fair_finite_limits_with_budget, ConfigTree, EnumerationBudget,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Limits {
    pub max_nodes: usize,
    /// Largest number of δ-trees compared; beyond it only the fair limits are.
    pub delta_cap: usize,
    pub enumeration_budget: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_nodes: 12, delta_cap: 2_000, enumeration_budget: 200_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub automaton: bool,
    pub oracle: bool,
    pub fair_limit: bool,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Agreement {
    pub trees: usize,
    pub fair_limits: usize,
    /// The δ-tree enumeration exceeded its cap and was skipped.
    pub delta_capped: bool,
    pub cells: Vec<Cell>,
    /// Fair limits accepted by the objective, when one was given.
    pub objective_accepted: Option<usize>,
    /// Graphviz renderings of the trees the three methods disagree on.
    pub disagreements: Vec<String>,
}

impl Agreement {
    pub fn agreeing(&self) -> usize {
        self.cells.iter().filter(|c| c.automaton == c.oracle && c.oracle == c.fair_limit).map(|c| c.count).sum()
    }

    pub fn all_agree(&self) -> bool {
        self.disagreements.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CrosscheckError {
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Budget(#[from] EnumerationBudget),
}

/// Compares the three methods on every δ-tree up to `limits.max_nodes`
/// nodes (when there are at most `delta_cap` of them) and on every fair
/// limit of that size.
pub fn three_way(
    system: &System,
    limits: &Limits,
    objective: Option<&ParityNta>,
) -> Result<Agreement, CrosscheckError> {
    let aut = build_limit_automaton(system)?;
    let view = FiniteView(&aut);
    let fair = enumerate_fair_finite_limits_with_budget(system, limits.max_nodes, limits.enumeration_budget)?;
    let fair_keys: HashSet<Vec<u32>> = fair.iter().map(ConfigTree::canonical_key).collect();
    let delta = if limits.max_nodes == 0 { Some(Vec::new()) } else { enumerate_delta_trees(system, limits.max_nodes, limits.delta_cap) };
    let delta_capped = delta.is_none();
    let mut trees = delta.unwrap_or_default();
    let seen: HashSet<Vec<u32>> = trees.iter().map(ConfigTree::canonical_key).collect();
    trees.extend(fair.iter().filter(|t| !seen.contains(&t.canonical_key())).cloned());

    let mut agreement = compare_trees(system, &view, &trees, &fair_keys);
    let objective_accepted =
        objective.map(|obj| fair.iter().filter(|t| accepts_finite_tree(obj, &encode_config(t))).count());
    agreement.fair_limits = fair.len();
    agreement.delta_capped = delta_capped;
    agreement.objective_accepted = objective_accepted;
    Ok(agreement)
}

/// Runs the three methods on `trees`; `fair_keys` are the canonical keys of
/// the enumerated fair limits.
pub fn compare_trees(
    system: &System,
    view: &FiniteView,
    trees: &[ConfigTree],
    fair_keys: &HashSet<Vec<u32>>,
) -> Agreement {
    let mut cells: BTreeMap<(bool, bool, bool), usize> = BTreeMap::new();
    let mut disagreements = Vec::new();
    for t in trees {
        let a = accepts_finite_tree(view, &encode_config(t));
        let o = check_f(system, t).all() && certificate_search(system, t).is_some();
        let e = fair_keys.contains(&t.canonical_key());
        *cells.entry((a, o, e)).or_default() += 1;
        if a != e || o != e {
            disagreements.push(t.to_dot(system));
        }
    }
    Agreement {
        trees: trees.len(),
        cells: cells
            .into_iter()
            .map(|((automaton, oracle, fair_limit), count)| Cell { automaton, oracle, fair_limit, count })
            .collect(),
        disagreements,
        ..Agreement::default()
    }
}
