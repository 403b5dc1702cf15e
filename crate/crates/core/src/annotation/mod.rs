//! Feature annotations over AST node spans.
//!
//! Records are stored per file as byte spans plus the SHA-256 of the file
//! they were made against; a record whose span no longer matches a node of
//! the current parse (or whose file hash changed) is *dangling*. Annotating
//! a node implicitly annotates its subtree, so a record that an ancestor
//! already implies is never stored.

mod color;
mod ifdef;
mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::java::{AstNode, RangeError, SourceTree, Span};
use crate::model::FeatureModel;

pub use color::{assign_colors, hsl_to_hex, ColorMap, LIGHTNESS, SATURATION, GOLDEN_ANGLE};
pub use ifdef::{export_ifdef, strip_ifdef};
pub use store::{color_file_path, load_annotations, parse_color_xml, save_annotations, to_color_xml, LoadReport};

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("{path}: {source}")]
    Range { path: String, source: RangeError },
    #[error("{path}:{line}:{column}: {message}")]
    Malformed { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {count} dangling annotation(s)")]
    Dangling { path: String, count: usize },
    #[error("no distinct color left for feature `{0}`")]
    ColorExhausted(String),
    #[error("invalid color `{color}` for feature `{feature}`")]
    InvalidColor { feature: String, color: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Manual,
    Seed,
    Propagated,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Manual => "manual",
            Origin::Seed => "seed",
            Origin::Propagated => "propagated",
        }
    }

    pub fn parse(s: &str) -> Option<Origin> {
        match s {
            "manual" => Some(Origin::Manual),
            "seed" => Some(Origin::Seed),
            "propagated" => Some(Origin::Propagated),
            _ => None,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub start: usize,
    pub end: usize,
    pub feature: String,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dangling: bool,
}

impl AnnotationRecord {
    pub fn new(span: Span, feature: impl Into<String>, origin: Origin) -> Self {
        AnnotationRecord { start: span.start, end: span.end, feature: feature.into(), origin, dangling: false }
    }

    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

/// Records for one file, kept sorted by (start, end, feature).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileAnnotations {
    /// Hex SHA-256 of the file bytes the spans refer to.
    pub hash: String,
    pub records: Vec<AnnotationRecord>,
}

impl FileAnnotations {
    pub fn dangling_count(&self) -> usize {
        self.records.iter().filter(|r| r.dangling).count()
    }

    fn insert(&mut self, rec: AnnotationRecord) -> bool {
        let key = |r: &AnnotationRecord| (r.start, r.end, r.feature.clone());
        match self.records.binary_search_by(|r| key(r).cmp(&key(&rec))) {
            Ok(_) => false,
            Err(i) => {
                self.records.insert(i, rec);
                true
            }
        }
    }

    /// Features per record span, for live records only.
    pub fn features_by_span(&self) -> HashMap<Span, Vec<&str>> {
        let mut m: HashMap<Span, Vec<&str>> = HashMap::new();
        for r in self.records.iter().filter(|r| !r.dangling) {
            m.entry(r.span()).or_default().push(&r.feature);
        }
        m
    }
}

/// Annotations for a whole project, keyed by project-relative path.
/// Cloning is cheap enough to use as a copy-on-write snapshot.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnotationSet {
    pub files: BTreeMap<String, FileAnnotations>,
}

pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn file(&self, path: &str) -> Option<&FileAnnotations> {
        self.files.get(path)
    }

    pub fn records(&self, path: &str) -> &[AnnotationRecord] {
        self.files.get(path).map_or(&[], |f| f.records.as_slice())
    }

    pub fn len(&self) -> usize {
        self.files.values().map(|f| f.records.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &AnnotationRecord)> {
        self.files.iter().flat_map(|(p, f)| f.records.iter().map(move |r| (p.as_str(), r)))
    }

    pub fn dangling_count(&self) -> usize {
        self.files.values().map(FileAnnotations::dangling_count).sum()
    }

    /// Every feature referenced by some record.
    pub fn features(&self) -> BTreeSet<&str> {
        self.iter().map(|(_, r)| r.feature.as_str()).collect()
    }

    fn file_mut(&mut self, tree: &SourceTree) -> &mut FileAnnotations {
        let hash = content_hash(&tree.text);
        let fa = self.files.entry(tree.path.clone()).or_default();
        if fa.hash != hash {
            // spans recorded against other content cannot be trusted
            for r in &mut fa.records {
                r.dangling = true;
            }
            fa.hash = hash;
        }
        fa
    }

    /// Annotate every maximal node in `[start, end)` with `feature`. Returns
    /// the records actually added: a node that already carries `feature`
    /// directly or through an ancestor is skipped.
    pub fn annotate_range(
        &mut self,
        tree: &SourceTree,
        model: &FeatureModel,
        start: usize,
        end: usize,
        feature: &str,
        origin: Origin,
    ) -> Result<Vec<AnnotationRecord>, AnnotationError> {
        if !model.contains(feature) {
            return Err(AnnotationError::UnknownFeature(feature.to_string()));
        }
        let nodes = tree
            .nodes_in_range(start, end)
            .map_err(|source| AnnotationError::Range { path: tree.path.clone(), source })?;
        let paths: Vec<Vec<usize>> = nodes.iter().map(|n| n.node_path.clone()).collect();
        let mut added = Vec::new();
        for path in paths {
            if let Some(rec) = self.annotate_node(tree, &path, feature, origin) {
                added.push(rec);
            }
        }
        Ok(added)
    }

    /// Annotate the node at `path`, unless `feature` is already effective
    /// there. The feature is not checked against a model.
    pub fn annotate_node(&mut self, tree: &SourceTree, path: &[usize], feature: &str, origin: Origin) -> Option<AnnotationRecord> {
        let node = tree.node_at(path)?;
        if self.effective_features(tree, path).contains(feature) {
            return None;
        }
        let rec = AnnotationRecord::new(node.span, feature, origin);
        self.file_mut(tree).insert(rec.clone()).then_some(rec)
    }

    /// Remove the records with exactly this span and feature. Returns how
    /// many were removed.
    pub fn remove(&mut self, path: &str, span: Span, feature: &str) -> usize {
        let Some(fa) = self.files.get_mut(path) else { return 0 };
        let before = fa.records.len();
        fa.records.retain(|r| !(r.span() == span && r.feature == feature));
        let removed = before - fa.records.len();
        if fa.records.is_empty() {
            self.files.remove(path);
        }
        removed
    }

    /// Features effective at the node at `path`: its own and all ancestors'.
    pub fn effective_features(&self, tree: &SourceTree, path: &[usize]) -> BTreeSet<String> {
        let Some(fa) = self.files.get(&tree.path) else { return BTreeSet::new() };
        let by_span = fa.features_by_span();
        let mut out = BTreeSet::new();
        for k in 0..=path.len() {
            if let Some(n) = tree.node_at(&path[..k]) {
                if let Some(fs) = by_span.get(&n.span) {
                    out.extend(fs.iter().map(|f| f.to_string()));
                }
            }
        }
        out
    }

    /// Effective features of every node in `tree`, keyed by node path.
    pub fn effective_map(&self, tree: &SourceTree) -> HashMap<Vec<usize>, BTreeSet<String>> {
        fn go(node: &AstNode, inherited: &BTreeSet<String>, by_span: &HashMap<Span, Vec<&str>>, out: &mut HashMap<Vec<usize>, BTreeSet<String>>) {
            let mut here = inherited.clone();
            if let Some(fs) = by_span.get(&node.span) {
                here.extend(fs.iter().map(|f| f.to_string()));
            }
            for c in &node.children {
                go(c, &here, by_span, out);
            }
            out.insert(node.node_path.clone(), here);
        }
        let empty = FileAnnotations::default();
        let fa = self.files.get(&tree.path).unwrap_or(&empty);
        let mut out = HashMap::new();
        go(&tree.root, &BTreeSet::new(), &fa.features_by_span(), &mut out);
        out
    }

    /// Re-check every record of `tree`'s file against its current parse:
    /// all records dangle if the content hash changed, otherwise those whose
    /// span matches no node. Returns the number of dangling records.
    pub fn mark_dangling(&mut self, tree: &SourceTree) -> usize {
        let Some(fa) = self.files.get_mut(&tree.path) else { return 0 };
        let hash_ok = fa.hash == content_hash(&tree.text);
        let spans: HashSet<Span> = tree.walk().map(|n| n.span).collect();
        for r in &mut fa.records {
            r.dangling = r.dangling || !hash_ok || !spans.contains(&r.span());
        }
        fa.dangling_count()
    }

    /// Restrict to records whose feature satisfies `keep`.
    pub fn retain_features(&mut self, mut keep: impl FnMut(&str) -> bool) {
        for fa in self.files.values_mut() {
            fa.records.retain(|r| keep(&r.feature));
        }
        self.files.retain(|_, fa| !fa.records.is_empty());
    }

    /// Records naming features absent from `model`.
    pub fn unknown_features(&self, model: &FeatureModel) -> BTreeSet<String> {
        self.iter().filter(|(_, r)| !model.contains(&r.feature)).map(|(_, r)| r.feature.clone()).collect()
    }
}

#[cfg(test)]
mod tests;
