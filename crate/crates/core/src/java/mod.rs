//! Spanned AST for a Java subset, plus the project-wide index used by the
//! analyses.
//!
//! Supported: packages, imports, classes and interfaces (single
//! inheritance plus interface lists), fields, methods, constructors,
//! initializer blocks, and the statements expression, local variable,
//! if/else, while, do/while, for, for-each, switch/case, return,
//! try/catch/finally, throw, break, continue, synchronized, assert and
//! block. Expressions are opaque spans; identifier uses inside them are
//! extracted for call and field resolution.
//!
//! Node identity is the `node_path` (child indices from the root).

mod ast;
mod index;
pub(crate) mod lexer;
pub(crate) mod parser;

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub use ast::{
    Access, AstNode, NodeDetail, NodeKind, Receiver, RefKind, Reference, Span, StatementKind, Walk,
};
pub use index::{
    build_index, CallEdge, Decl, DeclId, DeclKind, FieldEdge, IndexError, InheritEdge, InheritKind,
    ProjectIndex, Site, Target,
};

use crate::exec::{self, Execution};
use crate::model::Position;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{path}:{line}:{column}: {message}")]
pub struct JavaError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub offset: usize,
    pub message: String,
}

impl JavaError {
    pub(crate) fn syntax(path: &str, text: &str, offset: usize, message: &str) -> Self {
        let Position { line, column } = Position::of_offset(text, offset);
        JavaError { path: path.to_string(), line, column, offset, message: message.to_string() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("range {start}..{end} is outside 0..{len}")]
pub struct RangeError {
    pub start: usize,
    pub end: usize,
    pub len: usize,
}

/// A parsed source file. `path` is relative to the project root and uses `/`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SourceTree {
    pub path: String,
    pub text: String,
    pub root: AstNode,
}

pub fn parse_source(path: impl Into<String>, text: impl Into<String>) -> Result<SourceTree, JavaError> {
    let path = path.into();
    let text = text.into();
    let root = parser::parse(&path, &text)?;
    Ok(SourceTree { path, text, root })
}

/// Parse many files, in parallel when enabled. Results keep input order.
pub fn parse_sources(files: &[(String, String)], exec: Execution) -> Vec<Result<SourceTree, JavaError>> {
    exec::map(exec, files, |(path, text)| parse_source(path.clone(), text.clone()))
}

impl SourceTree {
    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    pub fn slice(&self, span: Span) -> &str {
        &self.text[span.range()]
    }

    pub fn node_at(&self, path: &[usize]) -> Option<&AstNode> {
        let mut node = &self.root;
        for &i in path {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    /// Ancestors of the node at `path`, from the root down, excluding the node itself.
    pub fn ancestors(&self, path: &[usize]) -> Vec<&AstNode> {
        (0..path.len()).filter_map(|k| self.node_at(&path[..k])).collect()
    }

    /// Nodes whose span equals `span`, outermost first.
    pub fn nodes_with_span(&self, span: Span) -> Vec<&AstNode> {
        let mut out = Vec::new();
        let mut node = &self.root;
        loop {
            if node.span == span {
                out.push(node);
            }
            match node.children.iter().find(|c| c.span.contains(span)) {
                Some(c) => node = c,
                None => return out,
            }
        }
    }

    /// The outermost node with exactly this span.
    pub fn node_with_span(&self, span: Span) -> Option<&AstNode> {
        self.nodes_with_span(span).into_iter().next()
    }

    /// Deepest node containing `span`.
    pub fn innermost_containing(&self, span: Span) -> &AstNode {
        let mut node = &self.root;
        while let Some(c) = node.children.iter().find(|c| c.span.contains(span)) {
            node = c;
        }
        node
    }

    /// Maximal nodes entirely covered by `[start, end)`: a covered node is
    /// returned only if its parent is not covered.
    pub fn nodes_in_range(&self, start: usize, end: usize) -> Result<Vec<&AstNode>, RangeError> {
        if start > end || end > self.text.len() {
            return Err(RangeError { start, end, len: self.text.len() });
        }
        let mut out = Vec::new();
        if start == end {
            return Ok(out);
        }
        let range = Span::new(start, end);
        collect_covered(&self.root, range, &mut out);
        Ok(out)
    }

    pub fn walk(&self) -> Walk<'_> {
        self.root.walk()
    }

    /// Checks the span invariants; returns a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        fn check(node: &AstNode, len: usize) -> Result<(), String> {
            if node.span.end > len {
                return Err(format!("{} {} exceeds text", node.kind, node.span));
            }
            let mut prev_end = node.span.start;
            for (i, c) in node.children.iter().enumerate() {
                if !node.span.contains(c.span) {
                    return Err(format!("{} {} escapes parent {}", c.kind, c.span, node.span));
                }
                if c.span.start < prev_end {
                    return Err(format!("{} {} overlaps previous sibling", c.kind, c.span));
                }
                let mut expected = node.node_path.clone();
                expected.push(i);
                if c.node_path != expected {
                    return Err(format!("{} {} has path {:?}", c.kind, c.span, c.node_path));
                }
                if matches!(c.kind, NodeKind::MethodDecl | NodeKind::FieldDecl | NodeKind::ClassDecl)
                    && c.name.as_deref().is_none_or(str::is_empty)
                {
                    return Err(format!("{} {} has no name", c.kind, c.span));
                }
                prev_end = c.span.end;
                check(c, len)?;
            }
            Ok(())
        }
        if self.root.span != Span::new(0, self.text.len()) {
            return Err("compilation unit does not span the file".into());
        }
        check(&self.root, self.text.len())
    }
}

fn collect_covered<'a>(node: &'a AstNode, range: Span, out: &mut Vec<&'a AstNode>) {
    if range.contains(node.span) && !node.span.is_empty() {
        out.push(node);
        return;
    }
    for c in node.children.iter().filter(|c| c.span.overlaps(range)) {
        collect_covered(c, range, out);
    }
}

/// Project-relative path with `/` separators.
pub fn relative_path(root: &Path, file: &Path) -> String {
    let rel = file.strip_prefix(root).unwrap_or(file);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}
