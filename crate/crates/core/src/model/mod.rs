//! Feature models in the `featuremodel.afm` grammar and their propositional
//! semantics.
//!
//! A model is a tree of productions. Each production names a compound
//! feature and lists its child slots: either a sequence of mandatory and
//! optional children, or a single or-group / alternative-group. At most one
//! group is allowed per production; mixed bodies need an intermediate
//! compound feature.

mod afm;
mod config;
mod formula;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use afm::{parse_afm, parse_constraint, serialize_afm};
pub use config::{
    count_configurations, count_configurations_with, entails, entails_with, enumerate_configurations,
    enumerate_configurations_with, validate_configuration, Configuration, Validation, Violation,
    ENUMERATION_LIMIT,
};
pub use formula::Formula;
pub(crate) use formula::Compiled;

/// Words reserved by the constraint syntax.
pub const KEYWORDS: [&str; 4] = ["not", "and", "or", "implies"];

/// Line/column position (both 1-based) in an input text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl Position {
    pub fn of_offset(text: &str, offset: usize) -> Self {
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
        Position { line, column }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

fn at(pos: &Option<Position>) -> String {
    pos.map(|p| format!(" at {p}")).unwrap_or_default()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: Position, message: String },
    #[error("invalid feature name `{0}`")]
    InvalidName(String),
    #[error("duplicate feature `{name}`{}", at(.position))]
    DuplicateFeature { name: String, position: Option<Position> },
    #[error("undefined feature `{name}` in constraint{}", at(.position))]
    UndefinedFeature { name: String, position: Option<Position> },
    #[error("cyclic production reference through `{0}`")]
    Cycle(String),
    #[error("production for `{0}` is not reachable from the root")]
    Disconnected(String),
    #[error("group under `{0}` needs at least two members")]
    GroupTooSmall(String),
    #[error("production for `{0}` mixes a group with other children")]
    MixedProduction(String),
    #[error("production for `{0}` has no children")]
    EmptyProduction(String),
    #[error("the first production must define the root `{0}`")]
    RootMismatch(String),
    #[error("constraint `{0}` uses operators outside not/and/or/implies")]
    UnsupportedConstraint(String),
    #[error("configuration does not match the model: missing {missing:?}, unknown {unknown:?}")]
    DomainMismatch { missing: Vec<String>, unknown: Vec<String> },
    #[error("model has {features} features; brute-force enumeration is limited to {limit}")]
    TooManyFeatures { features: usize, limit: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Mandatory,
    Optional,
    OrGroup,
    AlternativeGroup,
}

impl SlotKind {
    pub fn is_group(self) -> bool {
        matches!(self, SlotKind::OrGroup | SlotKind::AlternativeGroup)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildSlot {
    pub kind: SlotKind,
    pub members: Vec<String>,
}

impl ChildSlot {
    pub fn mandatory(name: impl Into<String>) -> Self {
        ChildSlot { kind: SlotKind::Mandatory, members: vec![name.into()] }
    }

    pub fn optional(name: impl Into<String>) -> Self {
        ChildSlot { kind: SlotKind::Optional, members: vec![name.into()] }
    }

    pub fn group<S: Into<String>>(kind: SlotKind, members: impl IntoIterator<Item = S>) -> Self {
        ChildSlot { kind, members: members.into_iter().map(Into::into).collect() }
    }
}

/// Children of one compound feature. `generator` keeps a `:: _Name` suffix
/// verbatim; it has no semantics.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Production {
    pub feature: String,
    pub slots: Vec<ChildSlot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

/// A validated feature model. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FeatureModel {
    root: String,
    productions: Vec<Production>,
    constraints: Vec<Formula>,
    #[serde(skip)]
    parent: HashMap<String, String>,
}

#[derive(Deserialize)]
struct RawModel {
    root: String,
    #[serde(default)]
    productions: Vec<Production>,
    #[serde(default)]
    constraints: Vec<Formula>,
}

impl<'de> Deserialize<'de> for FeatureModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawModel::deserialize(d)?;
        FeatureModel::new(raw.root, raw.productions, raw.constraints)
            .map_err(serde::de::Error::custom)
    }
}

/// Where a clause of the propositional encoding comes from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClauseOrigin {
    Root { feature: String },
    Mandatory { parent: String, child: String },
    Optional { parent: String, child: String },
    OrGroup { parent: String },
    AlternativeGroup { parent: String },
    GroupMember { parent: String, member: String },
    Constraint { index: usize },
}

impl fmt::Display for ClauseOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClauseOrigin::Root { feature } => write!(f, "root `{feature}`"),
            ClauseOrigin::Mandatory { parent, child } => {
                write!(f, "mandatory child `{child}` of `{parent}`")
            }
            ClauseOrigin::Optional { parent, child } => {
                write!(f, "optional child `{child}` of `{parent}`")
            }
            ClauseOrigin::OrGroup { parent } => write!(f, "or-group under `{parent}`"),
            ClauseOrigin::AlternativeGroup { parent } => {
                write!(f, "alternative group (exactly one) under `{parent}`")
            }
            ClauseOrigin::GroupMember { parent, member } => {
                write!(f, "group member `{member}` of `{parent}`")
            }
            ClauseOrigin::Constraint { index } => write!(f, "cross-tree constraint #{index}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Clause {
    pub origin: ClauseOrigin,
    pub formula: Formula,
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A valid feature name: an identifier that is not a constraint keyword.
pub fn is_feature_name(name: &str) -> bool {
    is_identifier(name) && !KEYWORDS.contains(&name)
}

impl FeatureModel {
    /// Model with a single root feature and no children.
    pub fn root_only(root: impl Into<String>) -> Result<Self, ModelError> {
        Self::new(root, Vec::new(), Vec::new())
    }

    /// Build and validate a model. A root without a production gets an
    /// empty one, so a root-only model has a single production either way.
    pub fn new(
        root: impl Into<String>,
        mut productions: Vec<Production>,
        constraints: Vec<Formula>,
    ) -> Result<Self, ModelError> {
        let root = root.into();
        if !is_feature_name(&root) {
            return Err(ModelError::InvalidName(root));
        }
        if productions.is_empty() {
            productions.push(Production { feature: root.clone(), slots: Vec::new(), generator: None });
        }
        if let Some(first) = productions.first() {
            if first.feature != root {
                return Err(ModelError::RootMismatch(root));
            }
        }

        let mut defined = BTreeSet::new();
        let mut parent: HashMap<String, String> = HashMap::new();
        for (i, p) in productions.iter().enumerate() {
            if !is_feature_name(&p.feature) {
                return Err(ModelError::InvalidName(p.feature.clone()));
            }
            if !defined.insert(p.feature.clone()) {
                return Err(ModelError::DuplicateFeature { name: p.feature.clone(), position: None });
            }
            if p.slots.is_empty() && !(i == 0 && p.feature == root) {
                return Err(ModelError::EmptyProduction(p.feature.clone()));
            }
            if p.slots.iter().any(|s| s.kind.is_group()) && p.slots.len() > 1 {
                return Err(ModelError::MixedProduction(p.feature.clone()));
            }
            for slot in &p.slots {
                let expected_single = !slot.kind.is_group();
                if expected_single && slot.members.len() != 1 {
                    return Err(ModelError::MixedProduction(p.feature.clone()));
                }
                if !expected_single && slot.members.len() < 2 {
                    return Err(ModelError::GroupTooSmall(p.feature.clone()));
                }
                for m in &slot.members {
                    if !is_feature_name(m) {
                        return Err(ModelError::InvalidName(m.clone()));
                    }
                    if *m == root {
                        return Err(ModelError::Cycle(root.clone()));
                    }
                    if parent.insert(m.clone(), p.feature.clone()).is_some() {
                        return Err(ModelError::DuplicateFeature { name: m.clone(), position: None });
                    }
                }
            }
        }

        // every compound feature other than the root must hang off the root
        for p in &productions {
            let mut seen = BTreeSet::new();
            let mut cur = p.feature.as_str();
            while cur != root {
                if !seen.insert(cur) {
                    return Err(ModelError::Cycle(p.feature.clone()));
                }
                match parent.get(cur) {
                    Some(up) => cur = up,
                    None => return Err(ModelError::Disconnected(cur.to_string())),
                }
            }
        }

        let model = FeatureModel { root, productions, constraints, parent };
        let known: BTreeSet<String> = model.features().into_iter().collect();
        for c in &model.constraints {
            if !c.is_constraint_form() {
                return Err(ModelError::UnsupportedConstraint(c.to_string()));
            }
            if let Some(undef) = c.variables().into_iter().find(|v| !known.contains(*v)) {
                return Err(ModelError::UndefinedFeature { name: undef.to_string(), position: None });
            }
        }
        Ok(model)
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn constraints(&self) -> &[Formula] {
        &self.constraints
    }

    pub fn production(&self, feature: &str) -> Option<&Production> {
        self.productions.iter().find(|p| p.feature == feature)
    }

    pub fn parent_of(&self, feature: &str) -> Option<&str> {
        self.parent.get(feature).map(String::as_str)
    }

    /// All features in depth-first pre-order from the root.
    pub fn features(&self) -> Vec<String> {
        let by_name: HashMap<&str, &Production> =
            self.productions.iter().map(|p| (p.feature.as_str(), p)).collect();
        let mut out = Vec::new();
        let mut stack = vec![self.root.as_str()];
        while let Some(f) = stack.pop() {
            out.push(f.to_string());
            if let Some(p) = by_name.get(f) {
                let children: Vec<&str> = p
                    .slots
                    .iter()
                    .flat_map(|s| s.members.iter().map(String::as_str))
                    .collect();
                stack.extend(children.into_iter().rev());
            }
        }
        out
    }

    pub fn feature_count(&self) -> usize {
        self.parent.len() + 1
    }

    pub fn contains(&self, feature: &str) -> bool {
        feature == self.root || self.parent.contains_key(feature)
    }

    /// Copy of this model with extra cross-tree constraints appended.
    pub fn with_constraints(&self, extra: impl IntoIterator<Item = Formula>) -> Result<Self, ModelError> {
        let mut constraints = self.constraints.clone();
        constraints.extend(extra);
        FeatureModel::new(self.root.clone(), self.productions.clone(), constraints)
    }

    /// The propositional encoding, clause by clause.
    pub fn clauses(&self) -> Vec<Clause> {
        let var = |s: &str| Formula::var(s);
        let mut out = vec![Clause {
            origin: ClauseOrigin::Root { feature: self.root.clone() },
            formula: var(&self.root),
        }];
        for p in &self.productions {
            let parent = p.feature.as_str();
            for slot in &p.slots {
                match slot.kind {
                    SlotKind::Mandatory => {
                        let child = &slot.members[0];
                        out.push(Clause {
                            origin: ClauseOrigin::Mandatory { parent: parent.into(), child: child.clone() },
                            formula: Formula::iff(var(child), var(parent)),
                        });
                    }
                    SlotKind::Optional => {
                        let child = &slot.members[0];
                        out.push(Clause {
                            origin: ClauseOrigin::Optional { parent: parent.into(), child: child.clone() },
                            formula: Formula::implies(var(child), var(parent)),
                        });
                    }
                    SlotKind::OrGroup | SlotKind::AlternativeGroup => {
                        let members: Vec<Formula> = slot.members.iter().map(|m| var(m)).collect();
                        let (origin, body) = if slot.kind == SlotKind::OrGroup {
                            (ClauseOrigin::OrGroup { parent: parent.into() }, Formula::or(members))
                        } else {
                            (
                                ClauseOrigin::AlternativeGroup { parent: parent.into() },
                                Formula::exactly_one(&members),
                            )
                        };
                        out.push(Clause { origin, formula: Formula::iff(var(parent), body) });
                        for m in &slot.members {
                            out.push(Clause {
                                origin: ClauseOrigin::GroupMember { parent: parent.into(), member: m.clone() },
                                formula: Formula::implies(var(m), var(parent)),
                            });
                        }
                    }
                }
            }
        }
        for (index, c) in self.constraints.iter().enumerate() {
            out.push(Clause { origin: ClauseOrigin::Constraint { index }, formula: c.clone() });
        }
        out
    }

    pub fn to_formula(&self) -> Formula {
        Formula::and(self.clauses().into_iter().map(|c| c.formula).collect())
    }

    /// Feature name → bit index, in [`features`](Self::features) order.
    pub(crate) fn bit_index(&self) -> BTreeMap<String, u32> {
        self.features().into_iter().enumerate().map(|(i, f)| (f, i as u32)).collect()
    }
}
