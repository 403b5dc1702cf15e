//! `requires` and `mutual exclude` suggestions between features.
//!
//! * requires(a → b): a declaration carrying `a` but not `b` calls, or
//!   reads a field of, a declaration carrying `b` but not `a`.
//! * mutual_exclude(a, b): sibling classes of one supertype carry `a` and
//!   `b` and neither feature is annotated anywhere else; or `a` and `b`
//!   annotate code in opposite branches of one `if`, or in different
//!   cases of one `switch`.
//!
//! Suggestions are advisory; only [`accept`] changes a model.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::AnnotationSet;
use crate::exec::Execution;
use crate::java::{Access, AstNode, DeclId, ProjectIndex, Site, Span, StatementKind, Target};
use crate::model::{entails_with, FeatureModel, Formula, ModelError};

#[derive(Debug, Error)]
pub enum InteractionError {
    #[error("suggestion `{id}` names unknown feature `{feature}`")]
    UnknownFeature { id: String, feature: String },
    #[error("unknown suggestion id `{0}`")]
    UnknownSuggestion(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Requires,
    MutualExclude,
}

impl InteractionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InteractionKind::Requires => "requires",
            InteractionKind::MutualExclude => "mutual_exclude",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Evidence {
    pub file: String,
    pub start: usize,
    pub end: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    /// `requires:a:b` or `mutual_exclude:a:b`.
    pub id: String,
    pub kind: InteractionKind,
    pub source: String,
    pub target: String,
    pub evidence: Vec<Evidence>,
}

impl Suggestion {
    pub fn formula(&self) -> Formula {
        let (a, b) = (Formula::Var(self.source.clone()), Formula::Var(self.target.clone()));
        match self.kind {
            InteractionKind::Requires => Formula::Implies(Box::new(a), Box::new(b)),
            InteractionKind::MutualExclude => Formula::Not(Box::new(Formula::and(vec![a, b]))),
        }
    }
}

fn suggestion_id(kind: InteractionKind, a: &str, b: &str) -> String {
    format!("{}:{a}:{b}", kind.as_str())
}

/// Accumulates evidence per (kind, source, target).
#[derive(Default)]
struct Collector {
    found: BTreeMap<(InteractionKind, String, String), BTreeSet<Evidence>>,
}

impl Collector {
    fn add(&mut self, kind: InteractionKind, a: &str, b: &str, ev: Evidence) {
        let (a, b) = if kind == InteractionKind::MutualExclude && b < a { (b, a) } else { (a, b) };
        self.found.entry((kind, a.to_string(), b.to_string())).or_default().insert(ev);
    }

    fn finish(self) -> Vec<Suggestion> {
        self.found
            .into_iter()
            .map(|((kind, source, target), ev)| Suggestion {
                id: suggestion_id(kind, &source, &target),
                kind,
                source,
                target,
                evidence: ev.into_iter().collect(),
            })
            .collect()
    }
}

/// Effective features of every declaration.
fn decl_features(index: &ProjectIndex, annots: &AnnotationSet) -> Vec<BTreeSet<String>> {
    let mut maps = BTreeMap::new();
    index
        .decls()
        .iter()
        .map(|d| {
            let tree = index.tree(&d.file).expect("indexed file");
            let map = maps.entry(d.file.clone()).or_insert_with(|| annots.effective_map(tree));
            map.get(&d.node_path).cloned().unwrap_or_default()
        })
        .collect()
}

pub fn find_requires(index: &ProjectIndex, annots: &AnnotationSet) -> Vec<Suggestion> {
    let features = decl_features(index, annots);
    let mut out = Collector::default();
    let mut edge = |from: DeclId, to: &Target, site: &Site, verb: &str| {
        let Some(to) = to.decl() else { return };
        let (src, dst) = (&features[from.0], &features[to.0]);
        for a in src.difference(dst) {
            for b in dst.difference(src) {
                let reason = format!(
                    "{} ({a}) {verb} {} ({b})",
                    index.decl(from).qualified_name,
                    index.decl(to).qualified_name
                );
                out.add(
                    InteractionKind::Requires,
                    a,
                    b,
                    Evidence { file: site.file.clone(), start: site.span.start, end: site.span.end, reason },
                );
            }
        }
    };
    for e in &index.call_edges {
        edge(e.caller, &e.callee, &e.site, "calls");
    }
    for e in index.field_edges.iter().filter(|e| e.access == Access::Read) {
        edge(e.accessor, &e.field, &e.site, "reads");
    }
    out.finish()
}

/// Features of records located inside `node` (the node itself included).
fn features_within(annots: &AnnotationSet, file: &str, node: &AstNode) -> BTreeMap<String, Vec<Span>> {
    let mut out: BTreeMap<String, Vec<Span>> = BTreeMap::new();
    for r in annots.records(file).iter().filter(|r| !r.dangling && node.span.contains(r.span())) {
        out.entry(r.feature.clone()).or_default().push(r.span());
    }
    out
}

pub fn find_mutual_excludes(index: &ProjectIndex, annots: &AnnotationSet) -> Vec<Suggestion> {
    let features = decl_features(index, annots);
    let mut out = Collector::default();

    // (a) sibling subclasses with features confined to themselves
    let mut subs: BTreeMap<&Target, BTreeSet<DeclId>> = BTreeMap::new();
    for e in &index.inherit_edges {
        subs.entry(&e.sup).or_default().insert(e.sub);
    }
    let confined = |f: &str, class: DeclId| {
        let d = index.decl(class);
        annots.iter().filter(|(_, r)| r.feature == f && !r.dangling).all(|(p, r)| p == d.file && d.span.contains(r.span()))
    };
    for (sup, siblings) in &subs {
        let siblings: Vec<DeclId> = siblings.iter().copied().collect();
        for (i, &c1) in siblings.iter().enumerate() {
            for &c2 in &siblings[i + 1..] {
                let (f1s, f2s) = (&features[c1.0], &features[c2.0]);
                for a in f1s.difference(f2s) {
                    for b in f2s.difference(f1s) {
                        if !(confined(a, c1) && confined(b, c2)) {
                            continue;
                        }
                        let sup_name = match sup {
                            Target::Decl(d) => index.decl(*d).qualified_name.clone(),
                            Target::External(n) => n.clone(),
                        };
                        for (c, f) in [(c1, a), (c2, b)] {
                            let d = index.decl(c);
                            out.add(
                                InteractionKind::MutualExclude,
                                a,
                                b,
                                Evidence {
                                    file: d.file.clone(),
                                    start: d.span.start,
                                    end: d.span.end,
                                    reason: format!("{} ({f}) is a sibling subtype of {sup_name}", d.qualified_name),
                                },
                            );
                        }
                    }
                }
            }
        }
    }

    // (b) opposite branches of an if, distinct cases of a switch
    for (path, tree) in index.trees() {
        let effective = annots.effective_map(tree);
        for node in tree.walk() {
            let arms: Vec<(&AstNode, &str)> = match node.statement_kind() {
                Some(StatementKind::If) => match node.if_branches() {
                    Some((then, Some(els))) => vec![(then, "then branch"), (els, "else branch")],
                    _ => continue,
                },
                Some(StatementKind::Switch) => node.switch_cases().into_iter().map(|c| (c, "case")).collect(),
                _ => continue,
            };
            let outer = &effective[&node.node_path];
            let per_arm: Vec<BTreeMap<String, Vec<Span>>> = arms
                .iter()
                .map(|(arm, _)| features_within(annots, path, arm).into_iter().filter(|(f, _)| !outer.contains(f)).collect())
                .collect();
            for i in 0..arms.len() {
                for j in i + 1..arms.len() {
                    for (a, spans_a) in &per_arm[i] {
                        for (b, spans_b) in &per_arm[j] {
                            if a == b || per_arm[j].contains_key(a) || per_arm[i].contains_key(b) {
                                continue;
                            }
                            let line = crate::model::Position::of_offset(&tree.text, node.span.start).line;
                            let what = if arms[i].1 == "case" { "switch" } else { "if" };
                            for (spans, f, label) in [(spans_a, a, arms[i].1), (spans_b, b, arms[j].1)] {
                                for s in spans {
                                    out.add(
                                        InteractionKind::MutualExclude,
                                        a,
                                        b,
                                        Evidence {
                                            file: path.clone(),
                                            start: s.start,
                                            end: s.end,
                                            reason: format!("{f} in {label} of the {what} at line {line}"),
                                        },
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.finish()
}

/// All suggestions, requires first, each group ordered by id.
pub fn find_interactions(index: &ProjectIndex, annots: &AnnotationSet) -> Vec<Suggestion> {
    let mut out = find_requires(index, annots);
    out.extend(find_mutual_excludes(index, annots));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProposedConstraint {
    pub id: String,
    pub formula: Formula,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConstraintSuggestions {
    pub additions: Vec<ProposedConstraint>,
    /// Suggestions the model already implies.
    pub entailed: Vec<String>,
    pub warnings: Vec<String>,
}

/// Turn suggestions into constraint formulas, dropping those the model
/// already entails. Larger models skip the entailment check with a warning.
pub fn suggest_constraints(
    model: &FeatureModel,
    suggestions: &[Suggestion],
    exec: Execution,
) -> Result<ConstraintSuggestions, InteractionError> {
    let mut out = ConstraintSuggestions::default();
    let mut warned = false;
    for s in suggestions {
        for f in [&s.source, &s.target] {
            if !model.contains(f) {
                return Err(InteractionError::UnknownFeature { id: s.id.clone(), feature: f.clone() });
            }
        }
        let formula = s.formula();
        match entails_with(model, &formula, exec) {
            Ok(true) => {
                out.entailed.push(s.id.clone());
                continue;
            }
            Ok(false) => {}
            Err(ModelError::TooManyFeatures { features, limit }) => {
                if !warned {
                    out.warnings.push(format!(
                        "model has {features} features (limit {limit}); entailment not checked"
                    ));
                    warned = true;
                }
            }
            Err(e) => return Err(e.into()),
        }
        out.additions.push(ProposedConstraint { id: s.id.clone(), formula });
    }
    Ok(out)
}

/// Model with the constraints of the chosen suggestions added.
pub fn accept(model: &FeatureModel, suggestions: &[Suggestion], ids: &[String]) -> Result<FeatureModel, InteractionError> {
    let mut formulas = Vec::new();
    for id in ids {
        let s = suggestions.iter().find(|s| &s.id == id).ok_or_else(|| InteractionError::UnknownSuggestion(id.clone()))?;
        let f = s.formula();
        if !model.constraints().contains(&f) {
            formulas.push(f);
        }
    }
    Ok(model.with_constraints(formulas)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InteractionReport {
    pub suggestions: Vec<Suggestion>,
    pub constraints: ConstraintSuggestions,
}
