//! `<file>.color` persistence.
//!
//! ```xml
//! <annotations file="src/Reader.java" hash="…">
//!   <annotation feature="push" start="120" end="245" origin="manual"/>
//! </annotations>
//! ```
//!
//! A sibling `<file>.xml` with the same schema is read when no `.color`
//! file exists; it is never written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{content_hash, AnnotationError, AnnotationRecord, AnnotationSet, FileAnnotations, Origin};
use crate::fsio;
use crate::java::SourceTree;
use crate::model::{FeatureModel, Position};

/// `src/Reader.java` → `<root>/src/Reader.color`.
pub fn color_file_path(root: &Path, source: &str) -> PathBuf {
    root.join(source).with_extension("color")
}

fn xml_file_path(root: &Path, source: &str) -> PathBuf {
    root.join(source).with_extension("xml")
}

fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

pub fn to_color_xml(path: &str, fa: &FileAnnotations) -> String {
    let mut out = format!("<annotations file=\"{}\" hash=\"{}\">\n", escape(path), escape(&fa.hash));
    for r in &fa.records {
        out.push_str(&format!(
            "  <annotation feature=\"{}\" start=\"{}\" end=\"{}\" origin=\"{}\"{}/>\n",
            escape(&r.feature),
            r.start,
            r.end,
            r.origin,
            if r.dangling { " dangling=\"true\"" } else { "" }
        ));
    }
    out.push_str("</annotations>\n");
    out
}

/// Parse the XML annotation format. `path` is used for diagnostics only;
/// the returned string is the `file` attribute.
pub fn parse_color_xml(path: &str, text: &str) -> Result<(String, FileAnnotations), AnnotationError> {
    let malformed = |offset: usize, message: String| {
        let Position { line, column } = Position::of_offset(text, offset.min(text.len()));
        AnnotationError::Malformed { path: path.to_string(), line, column, message }
    };
    let mut reader = Reader::from_str(text);
    let mut file = None;
    let mut fa = FileAnnotations::default();
    let mut closed = false;
    loop {
        let pos = reader.buffer_position() as usize;
        let event = reader.read_event().map_err(|e| malformed(pos, e.to_string()))?;
        match event {
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"annotations" => {
                if file.is_some() {
                    return Err(malformed(pos, "nested <annotations>".into()));
                }
                let attrs = attributes(&e).map_err(|m| malformed(pos, m))?;
                file = Some(require(&attrs, "file").map_err(|m| malformed(pos, m))?);
                fa.hash = require(&attrs, "hash").map_err(|m| malformed(pos, m))?;
            }
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"annotation" => {
                if file.is_none() || closed {
                    return Err(malformed(pos, "<annotation> outside <annotations>".into()));
                }
                let attrs = attributes(&e).map_err(|m| malformed(pos, m))?;
                let num = |k: &str| -> Result<usize, AnnotationError> {
                    let v = require(&attrs, k).map_err(|m| malformed(pos, m))?;
                    v.parse().map_err(|_| malformed(pos, format!("attribute `{k}` is not an offset: `{v}`")))
                };
                let (start, end) = (num("start")?, num("end")?);
                if start > end {
                    return Err(malformed(pos, format!("start {start} is after end {end}")));
                }
                let origin_s = attrs.get("origin").cloned().unwrap_or_else(|| "manual".into());
                let origin = Origin::parse(&origin_s).ok_or_else(|| malformed(pos, format!("unknown origin `{origin_s}`")))?;
                let feature = require(&attrs, "feature").map_err(|m| malformed(pos, m))?;
                let dangling = attrs.get("dangling").is_some_and(|v| v == "true");
                let rec = AnnotationRecord { start, end, feature, origin, dangling };
                if !fa.insert(rec) {
                    return Err(malformed(pos, "duplicate annotation".into()));
                }
            }
            Event::End(e) if e.name().as_ref() == b"annotations" => closed = true,
            Event::End(_) | Event::Text(_) | Event::Comment(_) | Event::Decl(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Eof => break,
            Event::Start(e) | Event::Empty(e) => {
                return Err(malformed(pos, format!("unexpected element <{}>", String::from_utf8_lossy(e.name().as_ref()))))
            }
            Event::CData(_) => return Err(malformed(pos, "unexpected CDATA".into())),
        }
    }
    let file = file.ok_or_else(|| malformed(0, "missing <annotations> element".into()))?;
    Ok((file, fa))
}

fn attributes(e: &BytesStart<'_>) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for a in e.attributes() {
        let a = a.map_err(|err| err.to_string())?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a.unescape_value().map_err(|err| err.to_string())?.into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn require(attrs: &BTreeMap<String, String>, key: &str) -> Result<String, String> {
    attrs.get(key).cloned().ok_or_else(|| format!("missing attribute `{key}`"))
}

/// What loading found beyond the records themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct LoadReport {
    /// Dangling record count per file (only files with at least one).
    pub dangling: BTreeMap<String, usize>,
    /// Files read from the `.xml` import format.
    pub imported: Vec<String>,
}

impl LoadReport {
    pub fn total_dangling(&self) -> usize {
        self.dangling.values().sum()
    }
}

/// Load annotations for every tree, flagging records that no longer match
/// the current parse. Features must exist in `model`.
pub fn load_annotations<'a>(
    root: &Path,
    trees: impl IntoIterator<Item = &'a SourceTree>,
    model: &FeatureModel,
) -> Result<(AnnotationSet, LoadReport), AnnotationError> {
    let mut set = AnnotationSet::new();
    let mut report = LoadReport::default();
    for tree in trees {
        let color = color_file_path(root, &tree.path);
        let xml = xml_file_path(root, &tree.path);
        let (file, imported) = if color.is_file() {
            (color, false)
        } else if xml.is_file() {
            (xml, true)
        } else {
            continue;
        };
        let shown = file.display().to_string();
        let text = std::fs::read_to_string(&file).map_err(|source| AnnotationError::Io { path: shown.clone(), source })?;
        let (_, fa) = parse_color_xml(&shown, &text)?;
        if let Some(r) = fa.records.iter().find(|r| !model.contains(&r.feature)) {
            return Err(AnnotationError::UnknownFeature(r.feature.clone()));
        }
        if imported {
            report.imported.push(tree.path.clone());
        }
        if fa.records.is_empty() {
            continue;
        }
        set.files.insert(tree.path.clone(), fa);
        let n = set.mark_dangling(tree);
        if n > 0 {
            log::warn!("{}: {n} dangling annotation(s)", tree.path);
            report.dangling.insert(tree.path.clone(), n);
        }
    }
    Ok((set, report))
}

/// Write one `.color` file per annotated source and delete the `.color`
/// file of every listed source without records. Each write is atomic.
pub fn save_annotations<'a>(
    root: &Path,
    sources: impl IntoIterator<Item = &'a SourceTree>,
    annots: &AnnotationSet,
) -> Result<(), AnnotationError> {
    for tree in sources {
        let target = color_file_path(root, &tree.path);
        let io = |source| AnnotationError::Io { path: target.display().to_string(), source };
        match annots.file(&tree.path).filter(|fa| !fa.records.is_empty()) {
            Some(fa) => {
                let mut fa = fa.clone();
                if fa.hash.is_empty() {
                    fa.hash = content_hash(&tree.text);
                }
                fsio::write_atomic(&target, to_color_xml(&tree.path, &fa).as_bytes()).map_err(io)?;
            }
            None => {
                fsio::remove_if_exists(&target).map_err(io)?;
            }
        }
    }
    Ok(())
}
