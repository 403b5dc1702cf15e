use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::java::{parse_source, NodeKind, StatementKind};
use crate::model::parse_afm;

const STACK: &str = include_str!("../../tests/fixtures/stack/src/Stack.java");

fn model() -> FeatureModel {
    parse_afm("Stack : [push] [pop] [lock] ;").unwrap()
}

fn stack() -> SourceTree {
    parse_source("src/Stack.java", STACK).unwrap()
}

fn method<'a>(tree: &'a SourceTree, name: &str) -> &'a AstNode {
    tree.walk().find(|n| n.kind == NodeKind::MethodDecl && n.name.as_deref() == Some(name)).unwrap()
}

fn set(fs: &[&str]) -> BTreeSet<String> {
    fs.iter().map(|s| s.to_string()).collect()
}

/// Reference coloring of the stack fixture: push, pop (with two lock statements), lock members and class Lock.
fn stack_annotations(tree: &SourceTree) -> AnnotationSet {
    let m = model();
    let mut a = AnnotationSet::new();
    let span = |name: &str| method(tree, name).span;
    a.annotate_range(tree, &m, span("push").start, span("push").end, "push", Origin::Manual).unwrap();
    a.annotate_range(tree, &m, span("pop").start, span("pop").end, "pop", Origin::Manual).unwrap();
    let pop = method(tree, "pop");
    let stmts: Vec<_> = pop.walk().filter(|n| n.kind == NodeKind::Statement).collect();
    for s in [stmts[0], stmts[2]] {
        a.annotate_range(tree, &m, s.span.start, s.span.end, "lock", Origin::Manual).unwrap();
    }
    let from = span("lock").start;
    let to = tree.root.children[1].span.end;
    a.annotate_range(tree, &m, from, span("getLockVersion").end, "lock", Origin::Manual).unwrap();
    a.annotate_range(tree, &m, tree.root.children[1].span.start, to, "lock", Origin::Manual).unwrap();
    a
}

#[test]
fn whole_method_gives_one_record() {
    let tree = stack();
    let mut a = AnnotationSet::new();
    let push = method(&tree, "push");
    let added = a.annotate_range(&tree, &model(), push.span.start, push.span.end, "push", Origin::Manual).unwrap();
    assert_eq!(added, vec![AnnotationRecord::new(push.span, "push", Origin::Manual)]);
    // a statement inside is already covered
    let stmt = push.walk().find(|n| n.kind == NodeKind::Statement).unwrap();
    let again = a.annotate_range(&tree, &model(), stmt.span.start, stmt.span.end, "push", Origin::Manual).unwrap();
    assert!(again.is_empty());
    assert_eq!(a.len(), 1);
    assert_eq!(a.effective_features(&tree, &stmt.node_path), set(&["push"]));
}

#[test]
fn mixed_statement_coloring() {
    let tree = stack();
    let a = stack_annotations(&tree);
    let pop = method(&tree, "pop");
    let stmts: Vec<_> = pop.walk().filter(|n| n.kind == NodeKind::Statement).collect();
    assert_eq!(a.effective_features(&tree, &stmts[0].node_path), set(&["lock", "pop"]));
    assert_eq!(a.effective_features(&tree, &stmts[1].node_path), set(&["pop"]));
    assert_eq!(a.effective_features(&tree, &stmts[3].node_path), set(&["pop"]));
    // lock, unlock, getLockVersion → three method records; class Lock → one
    assert_eq!(a.records("src/Stack.java").iter().filter(|r| r.feature == "lock").count(), 6);
    let field = tree.root.children[0].children.iter().find(|c| c.kind == NodeKind::FieldDecl).unwrap();
    assert!(a.effective_features(&tree, &field.node_path).is_empty());
    let map = a.effective_map(&tree);
    for n in tree.walk() {
        assert_eq!(map[&n.node_path], a.effective_features(&tree, &n.node_path));
    }
}

#[test]
fn annotate_errors() {
    let tree = stack();
    let mut a = AnnotationSet::new();
    assert!(matches!(a.annotate_range(&tree, &model(), 0, 5, "nope", Origin::Manual), Err(AnnotationError::UnknownFeature(_))));
    assert!(matches!(a.annotate_range(&tree, &model(), 0, STACK.len() + 3, "push", Origin::Manual), Err(AnnotationError::Range { .. })));
    assert!(a.is_empty());
}

#[test]
fn remove_records() {
    let tree = stack();
    let mut a = stack_annotations(&tree);
    let push = method(&tree, "push");
    assert_eq!(a.remove("src/Stack.java", push.span, "push"), 1);
    assert_eq!(a.remove("src/Stack.java", push.span, "push"), 0);
    assert!(a.effective_features(&tree, &push.node_path).is_empty());
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let tree = stack();
    let a = stack_annotations(&tree);
    save_annotations(dir.path(), [&tree], &a).unwrap();
    assert!(dir.path().join("src/Stack.color").is_file());
    let (b, report) = load_annotations(dir.path(), [&tree], &model()).unwrap();
    assert_eq!(a, b);
    assert_eq!(report.total_dangling(), 0);

    save_annotations(dir.path(), [&tree], &AnnotationSet::new()).unwrap();
    assert!(!dir.path().join("src/Stack.color").exists());
}

#[test]
fn shifted_source_dangles() {
    let dir = tempfile::tempdir().unwrap();
    let tree = stack();
    let a = stack_annotations(&tree);
    save_annotations(dir.path(), [&tree], &a).unwrap();
    let edited = parse_source("src/Stack.java", format!("// header\n{STACK}")).unwrap();
    let (b, report) = load_annotations(dir.path(), [&edited], &model()).unwrap();
    assert_eq!(report.dangling["src/Stack.java"], a.len());
    assert!(b.records("src/Stack.java").iter().all(|r| r.dangling));
    assert!(b.effective_features(&edited, &[0]).is_empty());
}

#[test]
fn xml_import_and_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let tree = stack();
    let a = stack_annotations(&tree);
    std::fs::create_dir_all(dir.path().join("src")).unwrap();
    let xml = to_color_xml("src/Stack.java", a.file("src/Stack.java").unwrap());
    std::fs::write(dir.path().join("src/Stack.xml"), &xml).unwrap();
    let (b, report) = load_annotations(dir.path(), [&tree], &model()).unwrap();
    assert_eq!(a, b);
    assert_eq!(report.imported, ["src/Stack.java"]);

    let bad = "<annotations file=\"x\" hash=\"00\">\n  <annotation feature=\"a\" start=\"9\" end=\"oops\"/>\n</annotations>\n";
    match parse_color_xml("x.color", bad) {
        Err(AnnotationError::Malformed { line, column, .. }) => assert_eq!((line, column), (2, 3)),
        other => panic!("{other:?}"),
    }
    assert!(parse_color_xml("x.color", "<annotations file=\"x\">").is_err());
    assert!(parse_color_xml("x.color", "<annotations file=\"x\" hash=\"\"><annotation").is_err());
}

#[test]
fn colors_are_stable_distinct_and_preserved() {
    let m = model();
    let a = assign_colors(&m, None).unwrap();
    assert_eq!(a, assign_colors(&m, None).unwrap());
    assert_eq!(a.len(), 4);
    let distinct: BTreeSet<_> = a.0.values().collect();
    assert_eq!(distinct.len(), 4);
    assert!(a.problems(&m).is_empty());

    // independent oracle: i-th feature gets hue i·golden angle
    for (i, f) in m.features().iter().enumerate() {
        let hue = (i as f64 * 137.507_764_050_037_85) % 360.0;
        assert_eq!(a.get(f).unwrap(), oracle_hex(hue, SATURATION, LIGHTNESS));
    }

    let mut existing = ColorMap::default();
    existing.0.insert("push".into(), "#CCCCCC".into());
    let b = assign_colors(&m, Some(&existing)).unwrap();
    assert_eq!(b.get("push"), Some("#CCCCCC"));
    assert_eq!(b.len(), 4);
    let json = b.to_json();
    let keys: Vec<_> = json.lines().filter_map(|l| l.trim().split('"').nth(1)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

/// HSL → RGB through the hue-to-channel formulation.
fn oracle_hex(h: f64, s: f64, l: f64) -> String {
    let q = if l < 0.5 { l * (1.0 + s) } else { l + s - l * s };
    let p = 2.0 * l - q;
    let channel = |mut t: f64| {
        t = t.rem_euclid(1.0);
        let v = if t < 1.0 / 6.0 {
            p + (q - p) * 6.0 * t
        } else if t < 0.5 {
            q
        } else if t < 2.0 / 3.0 {
            p + (q - p) * (2.0 / 3.0 - t) * 6.0
        } else {
            p
        };
        (v * 255.0).round() as u8
    };
    let h = h / 360.0;
    format!("#{:02X}{:02X}{:02X}", channel(h + 1.0 / 3.0), channel(h), channel(h - 1.0 / 3.0))
}

#[test]
fn ifdef_export() {
    let tree = stack();
    assert_eq!(export_ifdef(&tree, None).unwrap(), STACK);

    let mut a = AnnotationSet::new();
    let push = method(&tree, "push");
    a.annotate_range(&tree, &model(), push.span.start, push.span.end, "push", Origin::Manual).unwrap();
    let out = export_ifdef(&tree, a.file(&tree.path)).unwrap();
    assert!(out.contains("//#ifdef push\n  void push(Object o){\n"));
    assert!(out.contains("    unlock(l);\n  }\n//#endif\n  Object pop(){"));
    assert_eq!(strip_ifdef(&out), STACK);

    let full = stack_annotations(&tree);
    let out = export_ifdef(&tree, full.file(&tree.path)).unwrap();
    assert!(out.contains("//#ifdef pop\n  Object pop(){\n//#ifdef lock\n    Lock l = lock();\n//#endif\n"));
    assert_eq!(strip_ifdef(&out), STACK);
    let reparsed = parse_source("src/Stack.java", out).unwrap();
    assert_eq!(reparsed.root.children.iter().filter(|c| c.kind == NodeKind::ClassDecl).count(), 2);
}

#[test]
fn ifdef_inline_and_shared_span() {
    let src = "class A { void m() { a(); b(); } }";
    let tree = parse_source("A.java", src).unwrap();
    let m = parse_afm("R : [x] [y] ;").unwrap();
    let mut a = AnnotationSet::new();
    let stmts: Vec<_> = tree.walk().filter(|n| n.statement_kind() == Some(StatementKind::Expression)).cloned().collect();
    a.annotate_range(&tree, &m, stmts[1].span.start, stmts[1].span.end, "y", Origin::Manual).unwrap();
    a.annotate_range(&tree, &m, stmts[1].span.start, stmts[1].span.end, "x", Origin::Manual).unwrap();
    a.annotate_range(&tree, &m, stmts[0].span.start, stmts[0].span.end, "x", Origin::Manual).unwrap();
    let out = export_ifdef(&tree, a.file("A.java")).unwrap();
    assert_eq!(
        out,
        "class A { void m() { //#ifdef x\na();//#endif\n //#ifdef x\n//#ifdef y\nb();//#endif\n//#endif\n } }"
    );
    assert_eq!(strip_ifdef(&out), src);
    parse_source("A.java", out).unwrap();
}

#[test]
fn ifdef_rejects_dangling() {
    let tree = stack();
    let mut a = stack_annotations(&tree);
    let edited = parse_source("src/Stack.java", format!(" {STACK}")).unwrap();
    a.mark_dangling(&edited);
    assert!(matches!(export_ifdef(&edited, a.file(&tree.path)), Err(AnnotationError::Dangling { .. })));
}

fn arb_source() -> impl Strategy<Value = String> {
    let stmt = prop_oneof![
        "q[a-z]{0,3}".prop_map(|n| format!("{n}();")),
        "q[a-z]{0,3}".prop_map(|n| format!("int {n} = 1;")),
        "q[a-z]{0,3}".prop_map(|n| format!("if ({n}) {{ {n}(); }} else {{ return; }}")),
        "q[a-z]{0,3}".prop_map(|n| format!("while ({n}) {n}--;")),
    ];
    let sep = prop_oneof![Just(" "), Just("\n    "), Just("\n")];
    let method = (prop::collection::vec((stmt, sep), 0..5), "q[a-z]{0,3}")
        .prop_map(|(body, n)| format!("  void {n}_m() {{{}}}\n", body.into_iter().map(|(s, w)| format!("{w}{s}")).collect::<String>()));
    prop::collection::vec(method, 1..4).prop_map(|ms| format!("class T {{\n{}}}\n", ms.concat()))
}

proptest! {
    #[test]
    fn subsumption_never_changes_effective_features(
        src in arb_source(),
        picks in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0usize..3), 1..6),
        probe in any::<prop::sample::Index>(),
    ) {
        let tree = parse_source("T.java", src).unwrap();
        let m = parse_afm("R : [f0] [f1] [f2] ;").unwrap();
        let nodes: Vec<&AstNode> = tree.walk().filter(|n| !n.node_path.is_empty()).collect();
        let mut a = AnnotationSet::new();
        for (i, _, f) in &picks {
            let n = i.get(&nodes);
            a.annotate_node(&tree, &n.node_path, &format!("f{f}"), Origin::Manual);
        }
        let before = a.effective_map(&tree);
        // annotate a descendant of an annotated node with that node's feature
        let annotated: Vec<(&AstNode, String)> = tree
            .walk()
            .filter_map(|n| a.records("T.java").iter().find(|r| r.span() == n.span).map(|r| (n, r.feature.clone())))
            .collect();
        let (anc, feature) = probe.get(&annotated);
        let descendants: Vec<&AstNode> = anc.walk().collect();
        let d = picks[0].1.get(&descendants);
        let result = a.annotate_range(&tree, &m, d.span.start, d.span.end, feature, Origin::Manual).unwrap();
        prop_assert!(result.is_empty());
        prop_assert_eq!(a.effective_map(&tree), before);
    }

    #[test]
    fn strip_inverts_export(src in arb_source(), picks in prop::collection::vec((any::<prop::sample::Index>(), 0usize..3), 0..8)) {
        let tree = parse_source("T.java", src.clone()).unwrap();
        let nodes: Vec<&AstNode> = tree.walk().filter(|n| !n.node_path.is_empty()).collect();
        let mut a = AnnotationSet::new();
        for (i, f) in &picks {
            a.annotate_node(&tree, &i.get(&nodes).node_path, &format!("f{f}"), Origin::Manual);
        }
        let out = export_ifdef(&tree, a.file("T.java")).unwrap();
        prop_assert_eq!(strip_ifdef(&out), src);
        prop_assert!(parse_source("T.java", out).is_ok());
    }
}
