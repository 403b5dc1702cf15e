//! Export to the comment-based preprocessor scheme.
//!
//! Each annotated node is bracketed by `//#ifdef F` and `//#endif` line
//! comments. When the node starts a line (only whitespace before it), the
//! opening marker is placed on its own line above it; otherwise it is
//! inserted right before the node, followed by a newline. Closing markers
//! work the same way around the node end. Markers are never indented, so
//! every inserted byte belongs to a marker.
//! Only comment text is ever inserted, so the result still compiles and
//! [`strip_ifdef`] recovers the original bytes.

use std::sync::OnceLock;

use regex::Regex;

use super::{AnnotationError, FileAnnotations};
use crate::java::SourceTree;

#[derive(Debug)]
struct Marker {
    at: usize,
    /// 0 = closing, 1 = opening; closings go first at a shared offset.
    phase: u8,
    start: usize,
    end: usize,
    feature: String,
    text: String,
}

fn line_start(text: &str, at: usize) -> usize {
    text[..at].rfind('\n').map_or(0, |i| i + 1)
}

/// Render `tree` with the markers for `annots`. Unannotated files come
/// back unchanged. Dangling records abort the export.
pub fn export_ifdef(tree: &SourceTree, annots: Option<&FileAnnotations>) -> Result<String, AnnotationError> {
    let text = tree.text.as_str();
    let Some(fa) = annots.filter(|fa| !fa.records.is_empty()) else {
        return Ok(text.to_string());
    };
    let dangling = fa.dangling_count();
    if dangling > 0 {
        return Err(AnnotationError::Dangling { path: tree.path.clone(), count: dangling });
    }
    let mut markers = Vec::with_capacity(fa.records.len() * 2);
    for r in &fa.records {
        let (start, end) = (r.start, r.end);
        let ls = line_start(text, start);
        let open = if text[ls..start].trim_matches([' ', '\t']).is_empty() {
            Marker { at: ls, phase: 1, start, end, feature: r.feature.clone(), text: format!("//#ifdef {}\n", r.feature) }
        } else {
            Marker { at: start, phase: 1, start, end, feature: r.feature.clone(), text: format!("//#ifdef {}\n", r.feature) }
        };
        let rest = &text[end..];
        let eol = rest.find('\n');
        let close = match eol {
            Some(i) if rest[..i].trim_matches([' ', '\t', '\r']).is_empty() => Marker {
                at: end + i + 1,
                phase: 0,
                start,
                end,
                feature: r.feature.clone(),
                text: "//#endif\n".into(),
            },
            _ => Marker { at: end, phase: 0, start, end, feature: r.feature.clone(), text: "//#endif\n".into() },
        };
        markers.push(open);
        markers.push(close);
    }
    // closings: innermost first; openings: outermost first; features on a
    // shared span open in lexicographic order and close in reverse
    markers.sort_by(|a, b| {
        a.at.cmp(&b.at).then(a.phase.cmp(&b.phase)).then_with(|| {
            let outer_first = a.start.cmp(&b.start).then(b.end.cmp(&a.end)).then_with(|| a.feature.cmp(&b.feature));
            if a.phase == 1 {
                outer_first
            } else {
                outer_first.reverse()
            }
        })
    });
    let mut out = String::with_capacity(text.len() + markers.iter().map(|m| m.text.len()).sum::<usize>());
    let mut pos = 0;
    for m in &markers {
        out.push_str(&text[pos..m.at]);
        out.push_str(&m.text);
        pos = m.at;
    }
    out.push_str(&text[pos..]);
    Ok(out)
}

/// Remove the markers inserted by [`export_ifdef`].
pub fn strip_ifdef(text: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"//#(?:ifdef [^\n]*|endif)\n").expect("valid regex")
    });
    re.replace_all(text, "").into_owned()
}
