//! On-disk project layout.
//!
//! ```text
//! <root>/featuremodel.afm     feature model (required)
//! <root>/color.json           feature colors (optional)
//! <root>/description.txt      app description (optional)
//! <root>/traces/*.trace.csv   method traces
//! <root>/**/X.java            sources, each with an optional X.color
//! ```
//!
//! Hidden directories and emitted variants (directories holding a
//! `variant-manifest.json`) are not part of the project sources.

use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use crate::annotation::{self, AnnotationError, AnnotationSet, ColorMap, LoadReport};
use crate::exec::Execution;
use crate::fsio;
use crate::java::{self, build_index, IndexError, JavaError, ProjectIndex, SourceTree};
use crate::model::{parse_afm, serialize_afm, FeatureModel, ModelError};
use crate::variant::MANIFEST_NAME;

pub const MODEL_FILE: &str = "featuremodel.afm";
pub const COLOR_FILE: &str = "color.json";
pub const DESCRIPTION_FILE: &str = "description.txt";
pub const TRACE_DIR: &str = "traces";

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Model { path: String, source: ModelError },
    #[error(transparent)]
    Java(#[from] JavaError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io { path: path.display().to_string(), source }
}

/// A loaded project: model, parsed sources, annotations and colors.
#[derive(Clone, Debug)]
pub struct Project {
    pub root: PathBuf,
    pub model: FeatureModel,
    pub colors: Option<ColorMap>,
    pub description: Option<String>,
    pub index: ProjectIndex,
    pub annotations: AnnotationSet,
    pub load_report: LoadReport,
}

/// Project-relative paths of all `.java` sources, sorted.
pub fn source_files(root: &Path) -> Result<Vec<String>, ProjectError> {
    let mut out = Vec::new();
    let walker = WalkDir::new(root).follow_links(false).into_iter().filter_entry(|e| {
        if e.depth() == 0 || !e.file_type().is_dir() {
            return true;
        }
        let hidden = e.file_name().to_string_lossy().starts_with('.');
        !hidden && !e.path().join(MANIFEST_NAME).exists()
    });
    for entry in walker {
        let entry = entry.map_err(|e| ProjectError::Io {
            path: e.path().map_or_else(|| root.display().to_string(), |p| p.display().to_string()),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "java") {
            out.push(java::relative_path(root, entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_model(root: &Path) -> Result<FeatureModel, ProjectError> {
    let path = root.join(MODEL_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    parse_afm(&text).map_err(|source| ProjectError::Model { path: path.display().to_string(), source })
}

/// Parse the given sources (parallel when enabled).
pub fn parse_files(root: &Path, files: &[String], exec: Execution) -> Result<Vec<SourceTree>, ProjectError> {
    let mut inputs = Vec::with_capacity(files.len());
    for f in files {
        let path = root.join(f);
        inputs.push((f.clone(), std::fs::read_to_string(&path).map_err(io_err(&path))?));
    }
    java::parse_sources(&inputs, exec).into_iter().map(|r| r.map_err(ProjectError::from)).collect()
}

impl Project {
    pub fn load(root: impl Into<PathBuf>, exec: Execution) -> Result<Project, ProjectError> {
        let root = root.into();
        let model = load_model(&root)?;
        let color_path = root.join(COLOR_FILE);
        let colors = if color_path.is_file() { Some(ColorMap::load(&color_path)?) } else { None };
        let desc_path = root.join(DESCRIPTION_FILE);
        let description = if desc_path.is_file() { Some(std::fs::read_to_string(&desc_path).map_err(io_err(&desc_path))?) } else { None };
        let files = source_files(&root)?;
        let trees = parse_files(&root, &files, exec)?;
        let index = build_index(trees)?;
        let (annotations, load_report) = annotation::load_annotations(&root, index.trees().values(), &model)?;
        Ok(Project { root, model, colors, description, index, annotations, load_report })
    }

    pub fn trees(&self) -> impl Iterator<Item = &SourceTree> {
        self.index.trees().values()
    }

    pub fn tree(&self, path: &str) -> Option<&SourceTree> {
        self.index.tree(path)
    }

    /// Colors from color.json completed over the model.
    pub fn effective_colors(&self) -> Result<ColorMap, AnnotationError> {
        annotation::assign_colors(&self.model, self.colors.as_ref())
    }

    pub fn save_annotations(&self) -> Result<(), ProjectError> {
        annotation::save_annotations(&self.root, self.trees(), &self.annotations)?;
        Ok(())
    }

    pub fn save_model(&self) -> Result<(), ProjectError> {
        let path = self.root.join(MODEL_FILE);
        fsio::write_atomic(&path, serialize_afm(&self.model).as_bytes()).map_err(io_err(&path))
    }

    pub fn save_colors(&self) -> Result<(), ProjectError> {
        if let Some(c) = &self.colors {
            c.save(&self.root.join(COLOR_FILE))?;
        }
        Ok(())
    }

    /// Trace files under `traces/`, sorted by name.
    pub fn trace_files(&self) -> Result<Vec<PathBuf>, ProjectError> {
        let dir = self.root.join(TRACE_DIR);
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for e in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let p = e.map_err(io_err(&dir))?.path();
            if p.is_file() && p.to_string_lossy().ends_with(crate::location::TRACE_SUFFIX) {
                out.push(p);
            }
        }
        out.sort();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixtures() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
    }

    #[test]
    fn loads_every_fixture_cleanly() {
        for name in ["stack", "stack-statements", "stack-methods", "languages", "offline", "ankidroid"] {
            let p = Project::load(fixtures().join(name), Execution::Parallel).unwrap();
            assert_eq!(p.load_report.total_dangling(), 0, "{name}");
            assert!(p.annotations.unknown_features(&p.model).is_empty(), "{name}");
            assert!(p.effective_colors().unwrap().problems(&p.model).is_empty(), "{name}");
        }
    }

    #[test]
    fn stack_records_match_color_file() {
        let root = fixtures().join("stack");
        let p = Project::load(&root, Execution::Sequential).unwrap();
        let xml = std::fs::read_to_string(root.join("src/Stack.color")).unwrap();
        let (path, fa) = annotation::parse_color_xml("src/Stack.color", &xml).unwrap();
        assert_eq!(path, "src/Stack.java");
        assert_eq!(p.annotations.records("src/Stack.java"), fa.records.as_slice());
        assert_eq!(p.trace_files().unwrap().len(), 1);
        assert!(p.description.is_none());
    }

    #[test]
    fn skips_hidden_and_variant_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::write(root.join(MODEL_FILE), "R : ;\n").unwrap();
        for d in ["src", ".git", "out"] {
            std::fs::create_dir_all(root.join(d)).unwrap();
            std::fs::write(root.join(d).join("A.java"), "class A {}\n").unwrap();
        }
        std::fs::write(root.join("out").join(MANIFEST_NAME), "{}").unwrap();
        assert_eq!(source_files(root).unwrap(), ["src/A.java"]);
        let p = Project::load(root, Execution::Sequential).unwrap();
        assert_eq!(p.index.decls().len(), 1);
    }

    #[test]
    fn missing_model_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Project::load(dir.path(), Execution::Sequential), Err(ProjectError::Io { .. })));
        std::fs::write(dir.path().join(MODEL_FILE), "R : [\n").unwrap();
        assert!(matches!(Project::load(dir.path(), Execution::Sequential), Err(ProjectError::Model { .. })));
    }
}
