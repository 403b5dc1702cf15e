use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Half-open byte range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(self) -> bool {
        self.start == self.end
    }

    pub fn range(self) -> Range<usize> {
        self.start..self.end
    }

    pub fn contains(self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(self, other: Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn cover(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    CompilationUnit,
    PackageDecl,
    ImportDecl,
    ClassDecl,
    InterfaceDecl,
    FieldDecl,
    MethodDecl,
    ConstructorDecl,
    Parameter,
    Block,
    Statement,
    SwitchCase,
    Expression,
    AnnotationUse,
    Comment,
}

impl NodeKind {
    pub fn is_type(self) -> bool {
        matches!(self, NodeKind::ClassDecl | NodeKind::InterfaceDecl)
    }

    /// Declarations that take part in the project index and in propagation.
    pub fn is_member_or_type(self) -> bool {
        matches!(
            self,
            NodeKind::ClassDecl
                | NodeKind::InterfaceDecl
                | NodeKind::FieldDecl
                | NodeKind::MethodDecl
                | NodeKind::ConstructorDecl
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::CompilationUnit => "compilation_unit",
            NodeKind::PackageDecl => "package_decl",
            NodeKind::ImportDecl => "import_decl",
            NodeKind::ClassDecl => "class_decl",
            NodeKind::InterfaceDecl => "interface_decl",
            NodeKind::FieldDecl => "field_decl",
            NodeKind::MethodDecl => "method_decl",
            NodeKind::ConstructorDecl => "constructor_decl",
            NodeKind::Parameter => "parameter",
            NodeKind::Block => "block",
            NodeKind::Statement => "statement",
            NodeKind::SwitchCase => "switch_case",
            NodeKind::Expression => "expression",
            NodeKind::AnnotationUse => "annotation_use",
            NodeKind::Comment => "comment",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Expression,
    LocalVariable,
    If,
    While,
    DoWhile,
    For,
    ForEach,
    Switch,
    Return,
    Try,
    Catch,
    Throw,
    Break,
    Continue,
    Synchronized,
    Assert,
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Read,
    Write,
}

/// The thing before a `.` in a member access.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Receiver {
    This,
    Super,
    /// A single identifier: a variable, a field or a type name.
    Name(String),
    /// Anything more complex (call results, chains, indexing).
    Complex,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RefKind {
    Call { arity: usize },
    New { arity: usize },
    Name { access: Vec<Access> },
}

/// An identifier use inside an expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reference {
    pub name: String,
    pub receiver: Option<Receiver>,
    pub kind: RefKind,
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeDetail {
    #[default]
    None,
    Type {
        extends: Vec<String>,
        implements: Vec<String>,
    },
    Method {
        params: Vec<(String, String)>,
        return_type: Option<String>,
    },
    Field {
        ty: String,
        names: Vec<String>,
    },
    Parameter {
        ty: String,
    },
    Statement {
        kind: StatementKind,
        /// `(type, name)` for local variables and catch/for-each variables.
        declares: Vec<(String, String)>,
    },
    Expression {
        references: Vec<Reference>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: NodeKind,
    pub span: Span,
    pub name: Option<String>,
    pub children: Vec<AstNode>,
    pub node_path: Vec<usize>,
    pub detail: NodeDetail,
}

impl AstNode {
    pub(crate) fn new(kind: NodeKind, span: Span) -> Self {
        AstNode { kind, span, name: None, children: Vec::new(), node_path: Vec::new(), detail: NodeDetail::None }
    }

    pub(crate) fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub(crate) fn with_detail(mut self, detail: NodeDetail) -> Self {
        self.detail = detail;
        self
    }

    pub(crate) fn with_children(mut self, children: Vec<AstNode>) -> Self {
        self.children = children;
        self
    }

    pub fn statement_kind(&self) -> Option<StatementKind> {
        match &self.detail {
            NodeDetail::Statement { kind, .. } => Some(*kind),
            _ => None,
        }
    }

    pub fn arity(&self) -> Option<usize> {
        match &self.detail {
            NodeDetail::Method { params, .. } => Some(params.len()),
            _ => None,
        }
    }

    /// Children that are not comments.
    pub fn code_children(&self) -> impl Iterator<Item = &AstNode> {
        self.children.iter().filter(|c| c.kind != NodeKind::Comment)
    }

    /// Then/else branches of an `if` statement.
    pub fn if_branches(&self) -> Option<(&AstNode, Option<&AstNode>)> {
        if self.statement_kind() != Some(StatementKind::If) {
            return None;
        }
        let mut branches = self.code_children().filter(|c| c.kind != NodeKind::Expression);
        let then = branches.next()?;
        Some((then, branches.next()))
    }

    /// `case`/`default` groups of a `switch` statement.
    pub fn switch_cases(&self) -> Vec<&AstNode> {
        self.children.iter().filter(|c| c.kind == NodeKind::SwitchCase).collect()
    }

    /// Pre-order traversal.
    pub fn walk(&self) -> Walk<'_> {
        Walk { stack: vec![self] }
    }

    pub(crate) fn assign_paths(&mut self, path: &mut Vec<usize>) {
        self.node_path = path.clone();
        for (i, child) in self.children.iter_mut().enumerate() {
            path.push(i);
            child.assign_paths(path);
            path.pop();
        }
    }
}

pub struct Walk<'a> {
    stack: Vec<&'a AstNode>,
}

impl<'a> Iterator for Walk<'a> {
    type Item = &'a AstNode;

    fn next(&mut self) -> Option<&'a AstNode> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}
