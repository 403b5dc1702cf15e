//! Static HTML view of an annotated project.
//!
//! Each annotated span becomes a `<span>` with the feature's background
//! color; spans nest, so the innermost feature is the one painted. No
//! scripts are emitted.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::annotation::{AnnotationSet, ColorMap};
use crate::java::SourceTree;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// `feature` → CSS class token.
fn class_name(feature: &str) -> String {
    format!("f-{feature}")
}

/// The source of one file with annotation spans, without the page shell.
pub fn render_source(tree: &SourceTree, annots: &AnnotationSet, colors: &ColorMap) -> String {
    let text = tree.text.as_str();
    let mut records: Vec<(usize, usize, &str)> = annots
        .records(&tree.path)
        .iter()
        .filter(|r| !r.dangling)
        .map(|r| (r.start, r.end, r.feature.as_str()))
        .collect();
    // outer first; same span in feature order
    records.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
    let mut out = String::new();
    let mut open: Vec<usize> = Vec::new(); // end offsets of open spans
    let mut pos = 0;
    for (start, end, feature) in records {
        while let Some(&e) = open.last() {
            if e <= start {
                out.push_str(&escape(&text[pos..e]));
                out.push_str("</span>");
                pos = e;
                open.pop();
            } else {
                break;
            }
        }
        out.push_str(&escape(&text[pos..start]));
        pos = start;
        let color = colors.get(feature).unwrap_or("#FFFFFF");
        let _ = write!(out, "<span class=\"{}\" data-feature=\"{}\" style=\"background-color:{}\">", class_name(feature), escape(feature), color);
        open.push(end);
    }
    while let Some(e) = open.pop() {
        out.push_str(&escape(&text[pos..e]));
        out.push_str("</span>");
        pos = e;
    }
    out.push_str(&escape(&text[pos..]));
    out
}

/// A self-contained HTML page listing every file with its coloring.
pub fn render_html<'a>(title: &str, trees: impl IntoIterator<Item = &'a SourceTree>, annots: &AnnotationSet, colors: &ColorMap) -> String {
    let trees: Vec<&SourceTree> = trees.into_iter().collect();
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>\nbody {{ font-family: sans-serif; }}\npre {{ font-family: monospace; border: 1px solid #ccc; padding: 0.5em; }}\n.swatch {{ display: inline-block; padding: 0 0.5em; margin-right: 0.5em; }}\n</style>\n</head>\n<body>\n<h1>{}</h1>\n",
        escape(title),
        escape(title)
    );
    let used: BTreeSet<&str> = annots.features();
    out.push_str("<p class=\"legend\">");
    for (f, c) in &colors.0 {
        if used.contains(f.as_str()) {
            let _ = write!(out, "<span class=\"swatch\" style=\"background-color:{c}\">{}</span>", escape(f));
        }
    }
    out.push_str("</p>\n");
    for tree in trees {
        let dangling = annots.file(&tree.path).map_or(0, |f| f.dangling_count());
        let _ = writeln!(out, "<h2>{}</h2>", escape(&tree.path));
        if dangling > 0 {
            let _ = writeln!(out, "<p class=\"dangling\">{dangling} dangling annotation(s) not shown</p>");
        }
        let _ = writeln!(out, "<pre>{}</pre>", render_source(tree, annots, colors));
    }
    out.push_str("</body>\n</html>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Origin;
    use crate::java::parse_source;
    use crate::model::parse_afm;

    #[test]
    fn nested_spans_and_escaping() {
        let tree = parse_source("A.java", "class A { void m() { if (a < b) x(); } }").unwrap();
        let m = parse_afm("R : [p] [q] ;").unwrap();
        let mut a = AnnotationSet::new();
        let method = &tree.root.children[0].children[0];
        a.annotate_node(&tree, &method.node_path, "p", Origin::Manual).unwrap();
        let at = tree.text.find("if").unwrap();
        a.annotate_range(&tree, &m, at, tree.text.find("();").unwrap() + 3, "q", Origin::Manual).unwrap();
        let mut colors = ColorMap::default();
        colors.0.insert("p".into(), "#111111".into());
        colors.0.insert("q".into(), "#222222".into());
        let html = render_source(&tree, &a, &colors);
        assert_eq!(
            html,
            "class A { <span class=\"f-p\" data-feature=\"p\" style=\"background-color:#111111\">void m() { \
             <span class=\"f-q\" data-feature=\"q\" style=\"background-color:#222222\">if (a &lt; b) x();</span> }</span> }"
        );
        let page = render_html("demo", [&tree], &a, &colors);
        assert!(page.contains("<pre>class A"));
        assert!(!page.contains("<script"));
    }

    #[test]
    fn unannotated_is_plain() {
        let tree = parse_source("A.java", "class A {}").unwrap();
        assert_eq!(render_source(&tree, &AnnotationSet::new(), &ColorMap::default()), "class A {}");
    }
}
