//! Configuration-driven variant extraction.
//!
//! Every node carrying a deselected feature (directly or through an
//! ancestor) is cut out of the original bytes; a node that also carries
//! selected features is removed as well. Lines that a cut leaves blank are
//! collapsed into a single empty line. Retained code keeps its formatting
//! byte for byte.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::annotation::{AnnotationRecord, AnnotationSet, FileAnnotations};
use crate::exec::{self, Execution};
use crate::fsio;
use crate::java::{build_index, parse_source, IndexError, JavaError, ProjectIndex, SourceTree, Span, Target};
use crate::model::{validate_configuration, Configuration, FeatureModel, ModelError, Violation};

pub const MANIFEST_NAME: &str = "variant-manifest.json";

#[derive(Debug, Error)]
pub enum VariantError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("configuration is invalid: {}", .0.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    InvalidConfiguration(Vec<Violation>),
    #[error("{path}: {count} dangling annotation(s); re-annotate before extracting")]
    Dangling { path: String, count: usize },
    #[error("extraction defect: emitted file does not parse: {0}")]
    Reparse(JavaError),
    #[error("variant index: {0}")]
    Index(#[from] IndexError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FilePlan {
    /// Ascending, disjoint node spans to delete.
    pub removals: Vec<Span>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VariantPlan {
    pub config: Configuration,
    pub files: BTreeMap<String, FilePlan>,
    pub retained_files: Vec<String>,
    pub dropped_files: Vec<String>,
}

impl VariantPlan {
    pub fn removal_count(&self) -> usize {
        self.files.values().map(|f| f.removals.len()).sum()
    }
}

/// Outermost record spans carrying a deselected feature.
fn removals_for(fa: Option<&FileAnnotations>, deselected: &BTreeSet<&str>) -> Vec<Span> {
    let Some(fa) = fa else { return Vec::new() };
    let mut spans: Vec<Span> = fa.records.iter().filter(|r| deselected.contains(r.feature.as_str())).map(AnnotationRecord::span).collect();
    spans.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    let mut out: Vec<Span> = Vec::new();
    for s in spans {
        match out.last() {
            Some(last) if last.contains(s) => {}
            _ => out.push(s),
        }
    }
    out
}

pub fn plan_variant<'a>(
    trees: impl IntoIterator<Item = &'a SourceTree>,
    annots: &AnnotationSet,
    model: &FeatureModel,
    config: &Configuration,
) -> Result<VariantPlan, VariantError> {
    let validation = validate_configuration(model, config)?;
    if !validation.is_valid() {
        return Err(VariantError::InvalidConfiguration(validation.violations));
    }
    let deselected: BTreeSet<&str> = config.deselected().collect();
    let mut plan = VariantPlan { config: config.clone(), files: BTreeMap::new(), retained_files: Vec::new(), dropped_files: Vec::new() };
    for tree in trees {
        let fa = annots.file(&tree.path);
        if let Some(fa) = fa {
            let n = fa.dangling_count();
            if n > 0 {
                return Err(VariantError::Dangling { path: tree.path.clone(), count: n });
            }
        }
        let removals = removals_for(fa, &deselected);
        let removed = |span: Span| removals.iter().any(|r| r.contains(span));
        let types: Vec<Span> = tree.root.children.iter().filter(|c| c.kind.is_type()).map(|c| c.span).collect();
        let whole = (!tree.is_empty() && removed(tree.root.span)) || (!types.is_empty() && types.iter().all(|t| removed(*t)));
        if whole {
            plan.dropped_files.push(tree.path.clone());
        } else {
            plan.retained_files.push(tree.path.clone());
        }
        plan.files.insert(tree.path.clone(), FilePlan { removals });
    }
    Ok(plan)
}

/// Original offset of every byte kept in a rendered variant file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OffsetMap {
    kept: Vec<usize>,
    original_len: usize,
}

impl OffsetMap {
    /// Variant offset of an original offset that starts a retained node.
    pub fn map_start(&self, orig: usize) -> Option<usize> {
        if orig == self.original_len {
            return Some(self.kept.len());
        }
        self.kept.binary_search(&orig).ok()
    }

    /// Variant offset for an exclusive end offset of a retained node.
    pub fn map_end(&self, orig: usize) -> Option<usize> {
        if orig == 0 {
            return Some(0);
        }
        self.kept.binary_search(&(orig - 1)).ok().map(|i| i + 1)
    }

    pub fn map_span(&self, span: Span) -> Option<Span> {
        Some(Span::new(self.map_start(span.start)?, self.map_end(span.end)?))
    }

    /// Original offset of a variant offset.
    pub fn original(&self, pos: usize) -> usize {
        self.kept.get(pos).copied().unwrap_or(self.original_len)
    }
}

/// Delete `removals` from `text` and collapse the lines they leave blank.
pub fn render(text: &str, removals: &[Span]) -> (String, OffsetMap) {
    let bytes = text.as_bytes();
    let mut kept: Vec<usize> = Vec::with_capacity(bytes.len());
    let mut cuts: Vec<usize> = Vec::new(); // positions in `kept` right after a deletion
    let mut pos = 0;
    for r in removals {
        kept.extend(pos..r.start);
        cuts.push(kept.len());
        pos = r.end;
    }
    kept.extend(pos..bytes.len());

    // lines of the cut text as [start, end) in `kept`, end after '\n'
    let mut lines = Vec::new();
    let mut start = 0;
    for (i, &o) in kept.iter().enumerate() {
        if bytes[o] == b'\n' {
            lines.push((start, i + 1));
            start = i + 1;
        }
    }
    if start < kept.len() || lines.is_empty() {
        lines.push((start, kept.len()));
    }
    let line_of = |p: usize| lines.partition_point(|&(_, e)| e <= p).min(lines.len() - 1);
    let blank = |(s, e): (usize, usize)| kept[s..e].iter().all(|&o| matches!(bytes[o], b' ' | b'\t' | b'\r' | b'\n'));
    let mut touched: BTreeSet<usize> = cuts.iter().map(|&c| line_of(c)).filter(|&l| blank(lines[l])).collect();
    // a cut at the very start of a line also exposes the previous line end
    for &c in &cuts {
        if c > 0 && c < kept.len() && bytes[kept[c - 1]] == b'\n' {
            let prev = line_of(c - 1);
            if blank(lines[prev]) {
                touched.insert(prev);
            }
        }
    }
    let mut drop = vec![false; kept.len()];
    let touched: Vec<usize> = touched.into_iter().collect();
    let mut i = 0;
    while i < touched.len() {
        let mut j = i;
        while j + 1 < touched.len() && touched[j + 1] == touched[j] + 1 {
            j += 1;
        }
        // keep a single newline for the whole run
        let (s, _) = lines[touched[i]];
        let (_, e) = lines[touched[j]];
        let keep_nl = (s..e).rev().find(|&k| bytes[kept[k]] == b'\n');
        for (k, d) in drop.iter_mut().enumerate().take(e).skip(s) {
            *d = Some(k) != keep_nl;
        }
        i = j + 1;
    }
    let kept: Vec<usize> = kept.into_iter().zip(drop).filter(|(_, d)| !d).map(|(o, _)| o).collect();
    let out: Vec<u8> = kept.iter().map(|&o| bytes[o]).collect();
    let out = String::from_utf8(out).expect("deletions fall on character boundaries");
    (out, OffsetMap { kept, original_len: bytes.len() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReferenceWarning {
    pub file: String,
    /// Span of the reference in the variant file.
    pub start: usize,
    pub end: usize,
    pub from: String,
    pub to: String,
    pub message: String,
}

/// Rendered variant, not yet written.
#[derive(Clone, Debug)]
pub struct Variant {
    pub trees: Vec<SourceTree>,
    pub maps: BTreeMap<String, OffsetMap>,
    pub removal_counts: BTreeMap<String, usize>,
}

/// Render and re-parse every retained file.
pub fn build_variant(trees: &BTreeMap<String, SourceTree>, plan: &VariantPlan, exec: Execution) -> Result<Variant, VariantError> {
    let jobs: Vec<(&SourceTree, &[Span])> = plan
        .retained_files
        .iter()
        .map(|p| (&trees[p], plan.files.get(p).map_or(&[][..], |f| f.removals.as_slice())))
        .collect();
    let rendered = exec::map(exec, &jobs, |(tree, removals)| {
        let (text, map) = render(&tree.text, removals);
        parse_source(tree.path.clone(), text).map(|t| (t, map))
    });
    let mut v = Variant { trees: Vec::new(), maps: BTreeMap::new(), removal_counts: BTreeMap::new() };
    for r in rendered {
        let (tree, map) = r.map_err(VariantError::Reparse)?;
        v.removal_counts.insert(tree.path.clone(), plan.files.get(&tree.path).map_or(0, |f| f.removals.len()));
        v.maps.insert(tree.path.clone(), map);
        v.trees.push(tree);
    }
    Ok(v)
}

/// Annotations of the original project carried over to the variant's
/// offsets; records on removed code are dropped.
pub fn restrict_annotations(annots: &AnnotationSet, variant: &Variant) -> AnnotationSet {
    let mut out = AnnotationSet::new();
    for tree in &variant.trees {
        let Some(fa) = annots.file(&tree.path) else { continue };
        let map = &variant.maps[&tree.path];
        let mut records = Vec::new();
        for r in &fa.records {
            if let Some(span) = map.map_span(r.span()) {
                // a record is kept only if its node survived intact
                if map.original(span.start) == r.start && tree.node_with_span(span).is_some() {
                    records.push(AnnotationRecord { start: span.start, end: span.end, ..r.clone() });
                }
            }
        }
        if !records.is_empty() {
            records.sort_by(|a, b| (a.start, a.end, &a.feature).cmp(&(b.start, b.end, &b.feature)));
            out.files.insert(tree.path.clone(), FileAnnotations { hash: crate::annotation::content_hash(&tree.text), records });
        }
    }
    out
}

/// Re-index the variant and report references that resolved to a
/// declaration in the original project but point nowhere in the variant.
pub fn check_variant_references(original: &ProjectIndex, variant: &Variant) -> Result<Vec<ReferenceWarning>, VariantError> {
    let vidx = build_index(variant.trees.iter().cloned())?;
    let mut orig_calls: HashMap<(&str, usize, &str), Vec<&Target>> = HashMap::new();
    for e in &original.call_edges {
        orig_calls.entry((e.site.file.as_str(), e.site.span.start, e.name.as_str())).or_default().push(&e.callee);
    }
    let mut orig_fields: HashMap<(&str, usize), Vec<&Target>> = HashMap::new();
    for e in &original.field_edges {
        orig_fields.entry((e.site.file.as_str(), e.site.span.start)).or_default().push(&e.field);
    }
    let mut out = Vec::new();
    let mut warn = |file: &str, span: Span, from: String, targets: Option<&Vec<&Target>>, what: &str| {
        for t in targets.into_iter().flatten() {
            if let Some(d) = t.decl() {
                let to = original.decl(d).qualified_name.clone();
                let w = ReferenceWarning {
                    file: file.to_string(),
                    start: span.start,
                    end: span.end,
                    message: format!("{from} {what} {to}, which is not in the variant"),
                    from: from.clone(),
                    to,
                };
                if !out.contains(&w) {
                    out.push(w);
                }
            }
        }
    };
    for e in vidx.call_edges.iter().filter(|e| e.callee.decl().is_none()) {
        let at = variant.maps[&e.site.file].original(e.site.span.start);
        let from = vidx.decl(e.caller).qualified_name.clone();
        warn(&e.site.file, e.site.span, from, orig_calls.get(&(e.site.file.as_str(), at, e.name.as_str())), "calls");
    }
    // field uses that no longer resolve do not produce edges; compare against
    // original field edges whose site survived
    let vfield_sites: BTreeSet<(&str, usize)> = vidx.field_edges.iter().map(|e| (e.site.file.as_str(), e.site.span.start)).collect();
    for tree in &variant.trees {
        let map = &variant.maps[&tree.path];
        for e in original.field_edges.iter().filter(|e| e.site.file == tree.path) {
            let Some(span) = map.map_span(e.site.span) else { continue };
            if map.original(span.start) != e.site.span.start || span.len() != e.site.span.len() {
                continue;
            }
            if !vfield_sites.contains(&(tree.path.as_str(), span.start)) {
                let from = vidx.enclosing_decl(&tree.path, span).map_or_else(|| tree.path.clone(), |d| vidx.decl(d).qualified_name.clone());
                warn(&tree.path, span, from, orig_fields.get(&(e.site.file.as_str(), e.site.span.start)), "uses");
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub configuration: Configuration,
    pub removals: BTreeMap<String, usize>,
    pub dropped_files: Vec<String>,
    pub warnings: Vec<ReferenceWarning>,
}

/// Build the variant, write its sources under `out_dir` and the manifest
/// last. Annotation files are not copied.
pub fn apply_variant(
    original: &ProjectIndex,
    plan: &VariantPlan,
    out_dir: &Path,
    exec: Execution,
) -> Result<(Variant, Manifest), VariantError> {
    let variant = build_variant(original.trees(), plan, exec)?;
    let warnings = check_variant_references(original, &variant)?;
    for tree in &variant.trees {
        let path = out_dir.join(&tree.path);
        fsio::write_atomic(&path, tree.text.as_bytes()).map_err(|source| VariantError::Io { path: path.display().to_string(), source })?;
    }
    let manifest = Manifest {
        configuration: plan.config.clone(),
        removals: variant.removal_counts.clone(),
        dropped_files: plan.dropped_files.clone(),
        warnings,
    };
    let path = out_dir.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fsio::write_atomic(&path, json.as_bytes()).map_err(|source| VariantError::Io { path: path.display().to_string(), source })?;
    Ok((variant, manifest))
}

/// True when no byte of `variant` came from a node carrying one of `features`.
pub fn excludes_features(original: &SourceTree, annots: &AnnotationSet, variant_map: &OffsetMap, features: &BTreeSet<&str>) -> bool {
    let Some(fa) = annots.file(&original.path) else { return true };
    let spans: Vec<Span> = fa.records.iter().filter(|r| features.contains(r.feature.as_str())).map(AnnotationRecord::span).collect();
    variant_map.kept.iter().all(|&o| !spans.iter().any(|s| s.start <= o && o < s.end))
}
