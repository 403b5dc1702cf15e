mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fixture, scratch};

fn run(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_featurekit")).arg("-C").arg(root).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn check_model_root_only() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("featuremodel.afm"), "Root : ;\n").unwrap();
    let out = stdout(&run(dir.path(), &["check-model"]));
    assert!(out.contains("1 feature, 1 valid configuration\n"), "{out}");
}

#[test]
fn check_model_with_configuration() {
    let (dir, root) = scratch("languages");
    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"App":true,"f_CHN":true,"f_GBR":false}"#).unwrap();
    let out = stdout(&run(&root, &["check-model", "--config", good.to_str().unwrap()]));
    assert!(out.contains("3 features, 4 valid configurations"), "{out}");
    assert!(out.ends_with("configuration valid\n"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"App":false,"f_CHN":true,"f_GBR":false}"#).unwrap();
    let o = run(&root, &["check-model", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("violation: violates root `App`"));

    let partial = dir.path().join("partial.json");
    std::fs::write(&partial, r#"{"App":true}"#).unwrap();
    let o = run(&root, &["check-model", "--config", partial.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("f_CHN"));
}

#[test]
fn broken_model_fails_with_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("featuremodel.afm"), "A : [b\n").unwrap();
    let o = run(dir.path(), &["check-model"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: ") && err.contains("featuremodel.afm"), "{err}");
}

#[test]
fn view_uses_color_file_values() {
    let (dir, root) = scratch("stack");
    let html_path = dir.path().join("view.html");
    stdout(&run(&root, &["view", "-o", html_path.to_str().unwrap()]));
    let html = std::fs::read_to_string(&html_path).unwrap();
    for (f, c) in [("push", "#D9D9D9"), ("pop", "#FFF7B3"), ("lock", "#D8F5A2")] {
        assert!(html.contains(&format!("data-feature=\"{f}\" style=\"background-color:{c}\"")), "{f}");
    }
    assert!(!html.contains("<script"));
}

#[test]
fn extract_all_selected_is_identical() {
    let (dir, root) = scratch("stack");
    let cfg = dir.path().join("all.json");
    std::fs::write(&cfg, r#"{"Stack":true,"push":true,"pop":true,"lock":true}"#).unwrap();
    let out_dir = dir.path().join("variant");
    stdout(&run(&root, &["extract", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    assert_eq!(
        std::fs::read(out_dir.join("src/Stack.java")).unwrap(),
        std::fs::read(fixture("stack").join("src/Stack.java")).unwrap()
    );
    assert!(out_dir.join("variant-manifest.json").exists());
    // the project copy is untouched and the variant directory is ignored on reload
    stdout(&run(&root, &["check-model"]));
}

#[test]
fn extract_rejects_project_root_and_dry_run_writes_nothing() {
    let (dir, root) = scratch("stack-methods");
    let cfg = dir.path().join("nolock.json");
    std::fs::write(&cfg, r#"{"Stack":true,"push":true,"pop":true,"lock":false}"#).unwrap();
    let o = run(&root, &["extract", "--config", cfg.to_str().unwrap(), "--out", root.to_str().unwrap()]);
    assert!(!o.status.success());
    let out = stdout(&run(&root, &["extract", "--config", cfg.to_str().unwrap(), "--dry-run"]));
    assert!(out.contains("warning: src/Stack.java:"), "{out}");
    assert!(out.contains("Stack.push calls Stack.lock"));
    assert!(out.lines().any(|l| l.starts_with("remove src/Stack.java:")));
}

#[test]
fn annotate_then_remove_roundtrips_color_file() {
    let (_dir, root) = scratch("offline");
    let color = root.join("src/Sync.color");
    let before = std::fs::read_to_string(&color).unwrap();
    let text = std::fs::read_to_string(root.join("src/Sync.java")).unwrap();
    let start = text.find("void upload").unwrap();
    let end = start + text[start..].find('}').unwrap() + 1;
    let (s, e) = (start.to_string(), end.to_string());
    let out = stdout(&run(&root, &["annotate", "--file", "src/Sync.java", "--start", &s, "--end", &e, "--feature", "online"]));
    assert!(out.starts_with(&format!("src/Sync.java:{start}..{end} online")), "{out}");
    assert_ne!(std::fs::read_to_string(&color).unwrap(), before);
    stdout(&run(&root, &["annotate", "--file", "src/Sync.java", "--start", &s, "--end", &e, "--feature", "online", "--remove"]));
    assert_eq!(std::fs::read_to_string(&color).unwrap(), before);

    let o = run(&root, &["annotate", "--file", "src/Sync.java", "--start", &s, "--end", &e, "--feature", "nope"]);
    assert!(!o.status.success());
    assert_eq!(std::fs::read_to_string(&color).unwrap(), before);
}

#[test]
fn seed_and_propagate_update_color_files() {
    let (_dir, root) = scratch("stack");
    let color = root.join("src/Stack.color");
    std::fs::remove_file(&color).unwrap();
    let out = stdout(&run(&root, &["seed"]));
    assert!(out.contains("seeded 2, already annotated 0, unresolved 1"), "{out}");
    let xml = std::fs::read_to_string(&color).unwrap();
    assert_eq!(xml.matches("origin=\"seed\"").count(), 2);

    let out = stdout(&run(&root, &["propagate", "--dry-run", "--json"]));
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["params"]["threshold"], 0.6);
    assert_eq!(std::fs::read_to_string(&color).unwrap(), xml);
    stdout(&run(&root, &["propagate"]));
    let after = std::fs::read_to_string(&color).unwrap();
    assert_eq!(after.matches("origin=\"propagated\"").count(), report["added"].as_array().unwrap().len());
}

#[test]
fn interactions_write_and_accept() {
    let (dir, root) = scratch("stack");
    let out = dir.path().join("suggestions.json");
    let msg = stdout(&run(&root, &["interactions", "-o", out.to_str().unwrap(), "--accept", "requires:pop:lock"]));
    assert_eq!(msg, "1 constraint added to the model\n");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let ids: Vec<&str> = report["suggestions"].as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["requires:pop:lock", "requires:push:lock"]);
    let afm = std::fs::read_to_string(root.join("featuremodel.afm")).unwrap();
    assert!(afm.contains("pop implies lock"), "{afm}");
    let o = run(&root, &["interactions", "--accept", "requires:nope"]);
    assert!(!o.status.success());
}

#[test]
fn export_ifdef_strips_back() {
    let (dir, root) = scratch("stack");
    let out = dir.path().join("ifdef");
    stdout(&run(&root, &["export-ifdef", "-o", out.to_str().unwrap()]));
    let exported = std::fs::read_to_string(out.join("src/Stack.java")).unwrap();
    assert!(exported.contains("//#ifdef lock\n"));
    assert_eq!(featurekit::annotation::strip_ifdef(&exported), std::fs::read_to_string(root.join("src/Stack.java")).unwrap());
}

#[test]
fn colors_complete_missing_entries() {
    let (_dir, root) = scratch("offline");
    let _ = std::fs::remove_file(root.join("color.json"));
    let out = stdout(&run(&root, &["colors", "--write"]));
    assert!(out.contains("(assigned)"));
    let again = stdout(&run(&root, &["colors"]));
    assert!(!again.contains("(assigned)"), "{again}");
}

#[test]
fn recommend_reads_description() {
    let out = stdout(&run(&fixture("ankidroid"), &["recommend", "--top", "5"]));
    assert_eq!(out.lines().count(), 5, "{out}");
}

#[test]
fn sequential_flag_gives_same_output() {
    let a = stdout(&run(&fixture("ankidroid"), &["check-model"]));
    let b = stdout(&run(&fixture("ankidroid"), &["--sequential", "check-model"]));
    assert_eq!(a, b);
}
