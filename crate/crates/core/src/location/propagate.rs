//! Neighbourhood propagation of feature labels.
//!
//! Each element is a declaration (class, interface, method, constructor,
//! field). Neighbours are linked by call edges, field accesses, class
//! membership (member–class and member–co-member) and inheritance, all
//! undirected. In every round, each element without an effective feature
//! looks at its labelled neighbours `N(e)`; when `|N(e)| ≥ k`, every
//! feature `f` held by a fraction `≥ θ` of them is added. Rounds are
//! synchronous: scores read the previous round's labels only.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub threshold: f64,
    pub min_neighbors: usize,
    pub max_rounds: usize,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams { threshold: 0.6, min_neighbors: 2, max_rounds: 20 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("threshold must be in (0, 1], got {0}")]
    Threshold(f64),
    #[error("min_neighbors must be positive")]
    MinNeighbors,
    #[error("max_rounds must be positive")]
    MaxRounds,
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(ParamsError::Threshold(self.threshold));
        }
        if self.min_neighbors == 0 {
            return Err(ParamsError::MinNeighbors);
        }
        if self.max_rounds == 0 {
            return Err(ParamsError::MaxRounds);
        }
        Ok(())
    }
}

/// Element graph with initial labels. `parent` links an element to its
/// enclosing element so that a label on a class also covers its members.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelGraph {
    pub labels: Vec<BTreeSet<String>>,
    pub parent: Vec<Option<usize>>,
    pub neighbors: Vec<BTreeSet<usize>>,
}

impl LabelGraph {
    pub fn new(n: usize) -> Self {
        LabelGraph { labels: vec![BTreeSet::new(); n], parent: vec![None; n], neighbors: vec![BTreeSet::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Undirected edge; self-loops are ignored.
    pub fn link(&mut self, a: usize, b: usize) {
        if a != b {
            self.neighbors[a].insert(b);
            self.neighbors[b].insert(a);
        }
    }

    /// Own labels plus those of all enclosing elements.
    pub fn effective(&self, own: &[BTreeSet<String>], e: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut cur = Some(e);
        while let Some(i) = cur {
            out.extend(own[i].iter().cloned());
            cur = self.parent[i];
        }
        out
    }

    /// Renumber elements: element `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> LabelGraph {
        let mut g = LabelGraph::new(self.len());
        for i in 0..self.len() {
            g.labels[perm[i]] = self.labels[i].clone();
            g.parent[perm[i]] = self.parent[i].map(|p| perm[p]);
            g.neighbors[perm[i]] = self.neighbors[i].iter().map(|&n| perm[n]).collect();
        }
        g
    }
}

/// Score of every feature among the labelled neighbours of `e` under
/// `effective`, with the labelled-neighbour count.
pub fn neighbor_scores(graph: &LabelGraph, effective: &[BTreeSet<String>], e: usize) -> (usize, BTreeMap<String, f64>) {
    let labelled: Vec<usize> = graph.neighbors[e].iter().copied().filter(|&n| !effective[n].is_empty()).collect();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for &n in &labelled {
        for f in &effective[n] {
            *counts.entry(f.clone()).or_insert(0) += 1;
        }
    }
    let total = labelled.len();
    (total, counts.into_iter().map(|(f, c)| (f, c as f64 / total as f64)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Addition {
    pub element: usize,
    pub feature: String,
    pub round: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphOutcome {
    pub additions: Vec<Addition>,
    /// Rounds executed, including the final one that changed nothing.
    pub rounds: usize,
    pub converged: bool,
    /// Last computed scores of each element that was ever scored with
    /// enough labelled neighbours.
    pub scores: BTreeMap<usize, BTreeMap<String, f64>>,
    /// Own labels after propagation.
    pub labels: Vec<BTreeSet<String>>,
}

impl GraphOutcome {
    /// Effective labels per element after propagation.
    pub fn effective(&self, graph: &LabelGraph) -> Vec<BTreeSet<String>> {
        (0..graph.len()).map(|e| graph.effective(&self.labels, e)).collect()
    }
}

pub fn propagate_graph(graph: &LabelGraph, params: &PropagationParams, exec: Execution) -> Result<GraphOutcome, ParamsError> {
    params.validate()?;
    let mut own = graph.labels.clone();
    let mut additions = Vec::new();
    let mut scores = BTreeMap::new();
    let elements: Vec<usize> = (0..graph.len()).collect();
    let mut rounds = 0;
    let mut converged = false;
    while rounds < params.max_rounds {
        rounds += 1;
        let effective: Vec<BTreeSet<String>> = elements.iter().map(|&e| graph.effective(&own, e)).collect();
        let scored = exec::map(exec, &elements, |&e| {
            if !effective[e].is_empty() {
                return None;
            }
            let (n, s) = neighbor_scores(graph, &effective, e);
            (n >= params.min_neighbors).then_some((e, s))
        });
        let mut changed = false;
        for (e, s) in scored.into_iter().flatten() {
            for (f, &score) in &s {
                if score >= params.threshold {
                    own[e].insert(f.clone());
                    additions.push(Addition { element: e, feature: f.clone(), round: rounds, score });
                    changed = true;
                }
            }
            scores.insert(e, s);
        }
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(GraphOutcome { additions, rounds, converged, scores, labels: own })
}
