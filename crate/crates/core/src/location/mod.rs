//! Trace-seeded annotation and label propagation over the project index.

mod propagate;
mod trace;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::annotation::{AnnotationSet, Origin};
use crate::exec::Execution;
use crate::java::{DeclId, DeclKind, ProjectIndex};
use crate::model::FeatureModel;

pub use propagate::{
    neighbor_scores, propagate_graph, Addition, GraphOutcome, LabelGraph, ParamsError, PropagationParams,
};
pub use trace::{parse_trace, read_trace_file, trace_file_name, TraceEntry, TraceError, TraceRecording, TRACE_HEADER, TRACE_SUFFIX};

#[derive(Debug, Error)]
pub enum LocationError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SeedReport {
    pub feature: String,
    /// Qualified names of the declarations that received a record.
    pub seeded: Vec<String>,
    /// Resolved but already carrying the feature.
    pub already_annotated: Vec<String>,
    /// Trace names with no declaration in the project (library code).
    pub unresolved: Vec<String>,
}

impl SeedReport {
    pub fn unresolved_ratio(&self, recording: &TraceRecording) -> f64 {
        let names: BTreeSet<&str> = recording.entries.iter().map(|e| e.method_name.as_str()).collect();
        if names.is_empty() {
            0.0
        } else {
            self.unresolved.len() as f64 / names.len() as f64
        }
    }
}

/// Annotate every traced method found in the project with the
/// recording's feature, at declaration level.
pub fn seed_annotations(
    index: &ProjectIndex,
    annots: &mut AnnotationSet,
    model: &FeatureModel,
    recording: &TraceRecording,
) -> Result<SeedReport, LocationError> {
    let feature = &recording.feature;
    if !model.contains(feature) {
        return Err(LocationError::UnknownFeature(feature.clone()));
    }
    let mut report = SeedReport { feature: feature.clone(), ..Default::default() };
    let mut done = BTreeSet::new();
    for entry in &recording.entries {
        if !done.insert(entry.method_name.as_str()) {
            continue;
        }
        let decls = index.resolve_method_name(&entry.method_name);
        if decls.is_empty() {
            report.unresolved.push(entry.method_name.clone());
            continue;
        }
        for id in decls {
            let d = index.decl(id);
            let tree = index.tree(&d.file).expect("indexed file");
            match annots.annotate_node(tree, &d.node_path, feature, Origin::Seed) {
                Some(_) => report.seeded.push(d.qualified_name.clone()),
                None => report.already_annotated.push(d.qualified_name.clone()),
            }
        }
    }
    Ok(report)
}

/// Element graph over all declarations: element `i` is `DeclId(i)`.
pub fn project_graph(index: &ProjectIndex, annots: &AnnotationSet) -> LabelGraph {
    let decls = index.decls();
    let mut g = LabelGraph::new(decls.len());
    let mut maps = BTreeMap::new();
    for d in decls {
        let tree = index.tree(&d.file).expect("indexed file");
        let map = maps.entry(d.file.clone()).or_insert_with(|| annots.effective_map(tree));
        g.labels[d.id.0] = map.get(&d.node_path).cloned().unwrap_or_default();
        g.parent[d.id.0] = d.owner.map(|o| o.0);
    }
    for e in &index.call_edges {
        if let Some(c) = e.callee.decl() {
            g.link(e.caller.0, c.0);
        }
    }
    for e in &index.field_edges {
        if let Some(f) = e.field.decl() {
            g.link(e.accessor.0, f.0);
        }
    }
    for e in &index.inherit_edges {
        if let Some(s) = e.sup.decl() {
            g.link(e.sub.0, s.0);
        }
    }
    for d in decls.iter().filter(|d| d.kind.is_type()) {
        let members: Vec<DeclId> = index.members(d.id).iter().copied().filter(|m| !index.decl(*m).kind.is_type()).collect();
        for (i, m) in members.iter().enumerate() {
            g.link(d.id.0, m.0);
            for n in &members[i + 1..] {
                g.link(m.0, n.0);
            }
        }
        // nested types are members of their outer class too
        for m in index.members(d.id).iter().filter(|m| index.decl(**m).kind.is_type()) {
            g.link(d.id.0, m.0);
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropagatedRecord {
    pub element: String,
    pub kind: DeclKind,
    pub file: String,
    pub start: usize,
    pub end: usize,
    pub feature: String,
    pub round: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropagationReport {
    pub params: PropagationParams,
    pub rounds: usize,
    pub converged: bool,
    pub added: Vec<PropagatedRecord>,
    /// Qualified element name → feature → last score.
    pub scores: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Propagate labels over the project and add the resulting records with
/// origin `propagated`. Existing records are never touched.
pub fn propagate(
    index: &ProjectIndex,
    annots: &mut AnnotationSet,
    params: &PropagationParams,
    exec: Execution,
) -> Result<PropagationReport, LocationError> {
    let graph = project_graph(index, annots);
    let outcome = propagate_graph(&graph, params, exec)?;
    let mut added = Vec::new();
    for a in &outcome.additions {
        let d = index.decl(DeclId(a.element));
        let tree = index.tree(&d.file).expect("indexed file");
        // a member labelled in the same round as its class is already covered
        if let Some(rec) = annots.annotate_node(tree, &d.node_path, &a.feature, Origin::Propagated) {
            added.push(PropagatedRecord {
                element: d.qualified_name.clone(),
                kind: d.kind,
                file: d.file.clone(),
                start: rec.start,
                end: rec.end,
                feature: a.feature.clone(),
                round: a.round,
                score: a.score,
            });
        }
    }
    let scores = outcome
        .scores
        .iter()
        .map(|(e, s)| (display_name(index, DeclId(*e)), s.clone()))
        .collect();
    Ok(PropagationReport { params: *params, rounds: outcome.rounds, converged: outcome.converged, added, scores })
}

fn display_name(index: &ProjectIndex, id: DeclId) -> String {
    let d = index.decl(id);
    match d.arity {
        Some(n) if index.lookup(&d.qualified_name).len() > 1 => format!("{}/{n}", d.qualified_name),
        _ => d.qualified_name.clone(),
    }
}
