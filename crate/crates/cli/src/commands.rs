//! Subcommand implementations. Each writes its report to `out`.
use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use log::info;

use featurekit::annotation::{export_ifdef, Origin};
use featurekit::discovery::{rank_terms, recommend_features, PosLexicon};
use featurekit::interaction::{accept, find_interactions, suggest_constraints, InteractionReport};
use featurekit::java::Span;
use featurekit::location::{propagate, read_trace_file, seed_annotations, PropagationParams};
use featurekit::model::{count_configurations_with, validate_configuration, Configuration, FeatureModel, ENUMERATION_LIMIT};
use featurekit::project::{load_model, Project, COLOR_FILE};
use featurekit::report::render_html;
use featurekit::variant::{apply_variant, build_variant, check_variant_references, plan_variant};
use featurekit::{fsio, Execution};

use crate::{Cli, Command, ParamArgs};

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let root = cli.project.as_path();
    let exec = cli.exec();
    match &cli.command {
        Command::CheckModel { config } => check_model(root, config.as_deref(), exec, out),
        Command::Recommend { top, description, lexicon } => recommend(root, *top, description.as_deref(), lexicon.as_deref(), exec, out),
        Command::Seed { traces, json } => seed(root, traces, *json, exec, out),
        Command::Propagate { params, dry_run, json } => run_propagate(root, params, *dry_run, *json, exec, out),
        Command::Interactions { out: path, accept, accept_all } => interactions(root, path.as_deref(), accept, *accept_all, exec, out),
        Command::Annotate { file, start, end, feature, remove } => annotate(root, file, Span::new(*start, *end), feature, *remove, exec, out),
        Command::View { out: path } => view(root, path, exec, out),
        Command::Extract { config, out: dir, dry_run } => extract(root, config, dir.as_deref(), *dry_run, exec, out),
        Command::Colors { write } => colors(root, *write, exec, out),
        Command::ExportIfdef { out: dir } => ifdef(root, dir, exec, out),
        Command::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::server::serve(root.to_path_buf(), addr, exec))
        }
    }
}

fn load(root: &Path, exec: Execution) -> Result<Project> {
    Project::load(root, exec).with_context(|| format!("loading project {}", root.display()))
}

fn plural(n: u64, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// Read a configuration file: a JSON object mapping every feature to a bool.
pub fn read_configuration(path: &Path) -> Result<Configuration> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: expected a JSON object of feature → bool", path.display()))
}

pub fn model_summary(model: &FeatureModel, exec: Execution) -> Result<String> {
    let n = model.feature_count();
    let mut s = format!("root {}\n", model.root());
    if n > ENUMERATION_LIMIT {
        s += &format!("{}; configuration count skipped (more than {ENUMERATION_LIMIT} features)\n", plural(n as u64, "feature"));
    } else {
        let count = count_configurations_with(model, exec)?;
        s += &format!("{}, {}\n", plural(n as u64, "feature"), plural(count, "valid configuration"));
    }
    let groups = model.productions().iter().flat_map(|p| &p.slots).filter(|c| c.kind.is_group()).count();
    s += &format!(
        "{}, {}, {}\n",
        plural(model.productions().len() as u64, "production"),
        plural(groups as u64, "group"),
        plural(model.constraints().len() as u64, "constraint")
    );
    Ok(s)
}

fn check_model(root: &Path, config: Option<&Path>, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let model = load_model(root)?;
    write!(out, "{}", model_summary(&model, exec)?)?;
    if let Some(path) = config {
        let config = read_configuration(path)?;
        let v = validate_configuration(&model, &config)?;
        if !v.is_valid() {
            for x in &v.violations {
                writeln!(out, "violation: {} ({})", x.message, x.clause)?;
            }
            bail!("{} is invalid: {} violation(s)", path.display(), v.violations.len());
        }
        writeln!(out, "configuration valid")?;
    }
    Ok(())
}

fn recommend(root: &Path, top: usize, description: Option<&Path>, lexicon: Option<&Path>, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let project = load(root, exec)?;
    let text = match description {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => project.description.clone().unwrap_or_default(),
    };
    let mut lex = PosLexicon::builtin();
    if let Some(p) = lexicon {
        lex.extend(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?;
    }
    let terms = rank_terms(&project.index);
    for name in recommend_features(&text, &lex, &terms, top) {
        let known = if project.model.contains(&name) { "  (in model)" } else { "" };
        writeln!(out, "{name}{known}")?;
    }
    Ok(())
}

fn seed(root: &Path, traces: &[PathBuf], json: bool, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let mut project = load(root, exec)?;
    let files = if traces.is_empty() { project.trace_files()? } else { traces.to_vec() };
    ensure!(!files.is_empty(), "no trace files given and none under traces/");
    let mut reports = Vec::new();
    for f in &files {
        let rec = read_trace_file(f)?;
        let report = seed_annotations(&project.index, &mut project.annotations, &project.model, &rec)
            .with_context(|| format!("seeding from {}", f.display()))?;
        if !json {
            writeln!(
                out,
                "{}: seeded {}, already annotated {}, unresolved {} ({:.0}% of traced methods)",
                f.display(),
                report.seeded.len(),
                report.already_annotated.len(),
                report.unresolved.len(),
                100.0 * report.unresolved_ratio(&rec)
            )?;
        }
        reports.push(report);
    }
    project.save_annotations()?;
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&reports)?)?;
    }
    Ok(())
}

fn run_propagate(root: &Path, p: &ParamArgs, dry_run: bool, json: bool, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let mut project = load(root, exec)?;
    let params = PropagationParams { threshold: p.threshold, min_neighbors: p.min_neighbors, max_rounds: p.max_rounds };
    let report = propagate(&project.index, &mut project.annotations, &params, exec)?;
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        for r in &report.added {
            writeln!(out, "{} +{} (round {}, score {:.2})", r.element, r.feature, r.round, r.score)?;
        }
        let state = if report.converged { "converged" } else { "stopped at max rounds" };
        writeln!(out, "{} added in {} ({state})", plural(report.added.len() as u64, "record"), plural(report.rounds as u64, "round"))?;
    }
    if !dry_run {
        project.save_annotations()?;
    }
    Ok(())
}

pub fn interaction_report(project: &Project, exec: Execution) -> Result<InteractionReport> {
    let suggestions = find_interactions(&project.index, &project.annotations);
    let constraints = suggest_constraints(&project.model, &suggestions, exec)?;
    Ok(InteractionReport { suggestions, constraints })
}

fn interactions(root: &Path, path: Option<&Path>, ids: &[String], all: bool, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let mut project = load(root, exec)?;
    let report = interaction_report(&project, exec)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match path {
        Some(p) => fsio::write_atomic(p, json.as_bytes()).with_context(|| format!("writing {}", p.display()))?,
        None => write!(out, "{json}")?,
    }
    let ids: Vec<String> = if all { report.constraints.additions.iter().map(|c| c.id.clone()).collect() } else { ids.to_vec() };
    if !ids.is_empty() {
        let before = project.model.constraints().len();
        project.model = accept(&project.model, &report.suggestions, &ids)?;
        project.save_model()?;
        let added = project.model.constraints().len() - before;
        info!("accepted {} suggestion(s)", ids.len());
        if path.is_some() {
            writeln!(out, "{} added to the model", plural(added as u64, "constraint"))?;
        }
    }
    Ok(())
}

fn annotate(root: &Path, file: &str, span: Span, feature: &str, remove: bool, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let mut project = load(root, exec)?;
    let tree = project.index.tree(file).with_context(|| format!("{file} is not a project source"))?;
    if remove {
        let n = project.annotations.remove(file, span, feature);
        ensure!(n > 0, "{file}: no `{feature}` record at {}..{}", span.start, span.end);
        writeln!(out, "removed {}", plural(n as u64, "record"))?;
    } else {
        let added = project.annotations.annotate_range(tree, &project.model, span.start, span.end, feature, Origin::Manual)?;
        for r in &added {
            writeln!(out, "{file}:{}..{} {}", r.start, r.end, r.feature)?;
        }
        if added.is_empty() {
            writeln!(out, "nothing to add: `{feature}` already covers the range")?;
        }
    }
    project.save_annotations()?;
    Ok(())
}

fn view(root: &Path, path: &Path, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let project = load(root, exec)?;
    let colors = project.effective_colors()?;
    let title = format!("{} — features", project.model.root());
    let html = render_html(&title, project.trees(), &project.annotations, &colors);
    fsio::write_atomic(path, html.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

/// Refuse output directories that would overwrite the project itself.
pub fn check_out_dir(root: &Path, dir: &Path) -> Result<()> {
    let root = std::fs::canonicalize(root)?;
    if let Ok(d) = std::fs::canonicalize(dir) {
        ensure!(!root.starts_with(&d), "output directory {} would overwrite the project", dir.display());
    }
    Ok(())
}

fn extract(root: &Path, config: &Path, dir: Option<&Path>, dry_run: bool, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let project = load(root, exec)?;
    let config = read_configuration(config)?;
    let plan = plan_variant(project.trees(), &project.annotations, &project.model, &config)?;
    let warnings = if dry_run {
        let variant = build_variant(project.index.trees(), &plan, exec)?;
        for (path, fp) in &plan.files {
            for s in &fp.removals {
                writeln!(out, "remove {path}:{}..{}", s.start, s.end)?;
            }
        }
        for f in &plan.dropped_files {
            writeln!(out, "drop {f}")?;
        }
        check_variant_references(&project.index, &variant)?
    } else {
        let dir = dir.expect("clap requires --out");
        check_out_dir(root, dir)?;
        let (_, manifest) = apply_variant(&project.index, &plan, dir, exec)?;
        writeln!(
            out,
            "wrote {} to {} ({} removed, {} dropped)",
            plural(plan.retained_files.len() as u64, "file"),
            dir.display(),
            plural(plan.removal_count() as u64, "range"),
            plural(manifest.dropped_files.len() as u64, "file")
        )?;
        manifest.warnings
    };
    for w in &warnings {
        writeln!(out, "warning: {}:{}..{}: {}", w.file, w.start, w.end, w.message)?;
    }
    Ok(())
}

fn colors(root: &Path, write: bool, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let mut project = load(root, exec)?;
    let colors = project.effective_colors()?;
    for (f, c) in &colors.0 {
        let src = if project.colors.as_ref().and_then(|m| m.get(f)).is_some() { "" } else { "  (assigned)" };
        writeln!(out, "{f} {c}{src}")?;
    }
    if write {
        project.colors = Some(colors);
        project.save_colors()?;
        writeln!(out, "wrote {}", root.join(COLOR_FILE).display())?;
    }
    Ok(())
}

fn ifdef(root: &Path, dir: &Path, exec: Execution, out: &mut dyn Write) -> Result<()> {
    let project = load(root, exec)?;
    check_out_dir(root, dir)?;
    let known: BTreeSet<&str> = project.annotations.features();
    for tree in project.trees() {
        let text = export_ifdef(tree, project.annotations.file(&tree.path))?;
        let path = dir.join(&tree.path);
        fsio::write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    }
    writeln!(out, "exported {} with {} to {}", plural(project.index.trees().len() as u64, "file"), plural(known.len() as u64, "feature"), dir.display())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use featurekit::model::parse_afm;

    #[test]
    fn summary_lines() {
        let m = parse_afm("R : ;\n").unwrap();
        assert_eq!(model_summary(&m, Execution::Sequential).unwrap(), "root R\n1 feature, 1 valid configuration\n1 production, 0 groups, 0 constraints\n");
        let m = parse_afm("R : A [c] ;\nA : (a | b) ;\n%%\nc implies a ;\n").unwrap();
        let s = model_summary(&m, Execution::Parallel).unwrap();
        assert!(s.contains("5 features, 3 valid configurations\n2 productions, 1 group, 1 constraint\n"), "{s}");
    }

    #[test]
    fn large_models_skip_counting() {
        let names: Vec<String> = (0..30).map(|i| format!("[f{i}]")).collect();
        let m = parse_afm(&format!("R : {} ;\n", names.join(" "))).unwrap();
        assert!(model_summary(&m, Execution::Sequential).unwrap().contains("31 features; configuration count skipped"));
    }

    #[test]
    fn out_dir_guard() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("p");
        std::fs::create_dir(&root).unwrap();
        assert!(check_out_dir(&root, &root).is_err());
        assert!(check_out_dir(&root, dir.path()).is_err());
        assert!(check_out_dir(&root, &root.join("variant")).is_ok());
        assert!(check_out_dir(&root, &dir.path().join("elsewhere")).is_ok());
    }
}
