//! Recursive-descent parser for the supported Java subset.
//!
//! Declarations and statements get structured nodes; expressions are kept
//! as opaque spans from which identifier uses are extracted for name
//! resolution. Constructs outside the subset (generics, lambdas, method
//! references, enums, records, anonymous and local classes, try-with-resources,
//! switch arrows, labels) are rejected with a positioned diagnostic.

use super::ast::{
    Access, AstNode, NodeDetail, NodeKind, Receiver, RefKind, Reference, Span, StatementKind,
};
use super::lexer::{lex, TokKind, Token};
use super::JavaError;

pub(crate) const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while", "true", "false", "null",
];

const MODIFIERS: &[&str] = &[
    "public", "protected", "private", "static", "final", "abstract", "native", "synchronized",
    "transient", "volatile", "strictfp", "default",
];

const PRIMITIVES: &[&str] = &["boolean", "byte", "char", "short", "int", "long", "float", "double", "void"];

const STATEMENT_KEYWORDS: &[&str] = &[
    "if", "else", "for", "while", "do", "switch", "case", "default", "try", "catch", "finally",
    "return", "throw", "break", "continue", "class", "interface", "enum", "synchronized", "assert",
    "import", "package",
];

const COMPOUND_ASSIGN: &[&str] = &["+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>="];

pub(crate) fn parse(path: &str, text: &str) -> Result<AstNode, JavaError> {
    let lexed = lex(path, text)?;
    let mut p = Parser { path, text, toks: lexed.tokens, pos: 0 };
    let mut root = p.compilation_unit()?;
    for c in lexed.comments {
        insert_comment(&mut root, AstNode::new(NodeKind::Comment, c));
    }
    root.assign_paths(&mut Vec::new());
    Ok(root)
}

fn insert_comment(node: &mut AstNode, comment: AstNode) {
    if let Some(child) = node
        .children
        .iter_mut()
        .find(|c| c.kind != NodeKind::Comment && c.span.contains(comment.span) && c.span != comment.span)
    {
        insert_comment(child, comment);
        return;
    }
    let at = node.children.iter().position(|c| c.span.start >= comment.span.end).unwrap_or(node.children.len());
    node.children.insert(at, comment);
}

type PResult<T> = Result<T, JavaError>;

struct Parser<'a> {
    path: &'a str,
    text: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn text_at(&self, i: usize) -> &'a str {
        self.toks.get(i).map_or("", |t| &self.text[t.span.range()])
    }

    fn peek_text(&self, ahead: usize) -> &'a str {
        self.text_at(self.pos + ahead)
    }

    fn at(&self, s: &str) -> bool {
        self.toks.get(self.pos).is_some_and(|t| &self.text[t.span.range()] == s && t.kind != TokKind::Str)
    }

    fn at_eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.at(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn start(&self) -> usize {
        self.toks.get(self.pos).map_or(self.text.len(), |t| t.span.start)
    }

    fn prev_end(&self) -> usize {
        self.pos.checked_sub(1).map_or(0, |i| self.toks[i].span.end)
    }

    fn error_at(&self, offset: usize, msg: impl AsRef<str>) -> JavaError {
        JavaError::syntax(self.path, self.text, offset, msg.as_ref())
    }

    fn error(&self, msg: impl AsRef<str>) -> JavaError {
        self.error_at(self.start(), msg)
    }

    fn found(&self) -> String {
        if self.at_eof() {
            "end of input".to_string()
        } else {
            format!("`{}`", self.peek_text(0))
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`, found {}", self.found())))
        }
    }

    fn is_ident_at(&self, i: usize) -> bool {
        self.toks.get(i).is_some_and(|t| t.kind == TokKind::Ident && !KEYWORDS.contains(&self.text_at(i)))
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        if self.is_ident_at(self.pos) {
            let t = self.toks[self.pos];
            self.pos += 1;
            Ok((self.text[t.span.range()].to_string(), t.span))
        } else {
            Err(self.error(format!("expected identifier, found {}", self.found())))
        }
    }

    fn qualified_name(&mut self) -> PResult<String> {
        let mut name = self.ident()?.0;
        while self.at(".") && self.is_ident_at(self.pos + 1) {
            self.pos += 1;
            name.push('.');
            name.push_str(&self.ident()?.0);
        }
        Ok(name)
    }

    fn reject_generics(&self) -> PResult<()> {
        if self.at("<") {
            Err(self.error("generic type arguments are not supported"))
        } else {
            Ok(())
        }
    }

    fn parse_type(&mut self) -> PResult<String> {
        let mut ty = if PRIMITIVES.contains(&self.peek_text(0)) {
            self.pos += 1;
            self.text_at(self.pos - 1).to_string()
        } else {
            self.qualified_name()?
        };
        self.reject_generics()?;
        while self.at("[") && self.peek_text(1) == "]" {
            self.pos += 2;
            ty.push_str("[]");
        }
        Ok(ty)
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        let from = self.start();
        self.expect(open)?;
        let mut depth = 1;
        while depth > 0 {
            if self.at_eof() {
                return Err(self.error_at(from, format!("unclosed `{open}`")));
            }
            if self.at(open) {
                depth += 1;
            } else if self.at(close) {
                depth -= 1;
            }
            self.pos += 1;
        }
        Ok(())
    }

    /// Annotations and modifiers before a declaration.
    fn modifiers(&mut self) -> PResult<Vec<AstNode>> {
        let mut annotations = Vec::new();
        loop {
            if self.at("@") && self.peek_text(1) != "interface" {
                let start = self.start();
                self.pos += 1;
                let name = self.qualified_name()?;
                if self.at("(") {
                    self.skip_balanced("(", ")")?;
                }
                annotations.push(AstNode::new(NodeKind::AnnotationUse, Span::new(start, self.prev_end())).named(name));
            } else if MODIFIERS.contains(&self.peek_text(0)) {
                self.pos += 1;
            } else {
                return Ok(annotations);
            }
        }
    }

    fn compilation_unit(&mut self) -> PResult<AstNode> {
        let mut children = Vec::new();
        if self.at("package") {
            let start = self.start();
            self.pos += 1;
            let name = self.qualified_name()?;
            self.expect(";")?;
            children.push(AstNode::new(NodeKind::PackageDecl, Span::new(start, self.prev_end())).named(name));
        }
        while self.at("import") {
            let start = self.start();
            self.pos += 1;
            let is_static = self.eat("static");
            let mut name = self.qualified_name()?;
            if self.at(".") && self.peek_text(1) == "*" {
                self.pos += 2;
                name.push_str(".*");
            }
            self.expect(";")?;
            if is_static {
                name.insert_str(0, "static ");
            }
            children.push(AstNode::new(NodeKind::ImportDecl, Span::new(start, self.prev_end())).named(name));
        }
        while !self.at_eof() {
            if self.eat(";") {
                continue;
            }
            let start = self.start();
            let annotations = self.modifiers()?;
            children.push(self.type_decl(start, annotations)?);
        }
        Ok(AstNode::new(NodeKind::CompilationUnit, Span::new(0, self.text.len())).with_children(children))
    }

    fn type_decl(&mut self, start: usize, annotations: Vec<AstNode>) -> PResult<AstNode> {
        match self.peek_text(0) {
            "class" => self.class_decl(start, annotations, false),
            "interface" => self.class_decl(start, annotations, true),
            "enum" => Err(self.error("enum declarations are not supported")),
            "record" if self.is_ident_at(self.pos + 1) => Err(self.error("record declarations are not supported")),
            "@" => Err(self.error("annotation type declarations are not supported")),
            _ => Err(self.error(format!("expected class or interface declaration, found {}", self.found()))),
        }
    }

    fn type_list(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.parse_type()?];
        while self.eat(",") {
            out.push(self.parse_type()?);
        }
        Ok(out)
    }

    fn class_decl(&mut self, start: usize, annotations: Vec<AstNode>, interface: bool) -> PResult<AstNode> {
        self.pos += 1;
        let (name, _) = self.ident()?;
        if self.at("<") {
            return Err(self.error("generic type parameters are not supported"));
        }
        let mut extends = Vec::new();
        let mut implements = Vec::new();
        if self.eat("extends") {
            extends = if interface { self.type_list()? } else { vec![self.parse_type()?] };
        }
        if !interface && self.eat("implements") {
            implements = self.type_list()?;
        }
        self.expect("{")?;
        let mut children = annotations;
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.error(format!("expected `}}` to close `{name}`")));
            }
            if self.eat(";") {
                continue;
            }
            children.push(self.member(&name)?);
        }
        self.pos += 1;
        let kind = if interface { NodeKind::InterfaceDecl } else { NodeKind::ClassDecl };
        Ok(AstNode::new(kind, Span::new(start, self.prev_end()))
            .named(name)
            .with_detail(NodeDetail::Type { extends, implements })
            .with_children(children))
    }

    fn member(&mut self, class_name: &str) -> PResult<AstNode> {
        let start = self.start();
        let annotations = self.modifiers()?;
        if self.at("{") {
            let mut block = self.block()?;
            block.span.start = start;
            let mut children = annotations;
            children.extend(block.children);
            block.children = children;
            return Ok(block);
        }
        match self.peek_text(0) {
            "class" | "interface" | "enum" | "@" => return self.type_decl(start, annotations),
            "record" if self.is_ident_at(self.pos + 1) => return self.type_decl(start, annotations),
            "<" => return Err(self.error("generic methods are not supported")),
            _ => {}
        }
        if self.peek_text(0) == class_name && self.peek_text(1) == "(" {
            let (name, _) = self.ident()?;
            return self.method(start, annotations, None, name, NodeKind::ConstructorDecl);
        }
        let ty = self.parse_type()?;
        let (name, _) = self.ident()?;
        if self.at("(") {
            self.method(start, annotations, Some(ty), name, NodeKind::MethodDecl)
        } else {
            self.field(start, annotations, ty, name)
        }
    }

    fn method(
        &mut self,
        start: usize,
        annotations: Vec<AstNode>,
        return_type: Option<String>,
        name: String,
        kind: NodeKind,
    ) -> PResult<AstNode> {
        let params = self.parameters()?;
        while self.at("[") && self.peek_text(1) == "]" {
            self.pos += 2;
        }
        if self.eat("throws") {
            self.type_list()?;
        }
        let mut children = annotations;
        let signature: Vec<(String, String)> = params
            .iter()
            .map(|p| match &p.detail {
                NodeDetail::Parameter { ty } => (ty.clone(), p.name.clone().unwrap_or_default()),
                _ => unreachable!(),
            })
            .collect();
        children.extend(params);
        if self.at("{") {
            children.push(self.block()?);
        } else {
            self.expect(";")?;
        }
        Ok(AstNode::new(kind, Span::new(start, self.prev_end()))
            .named(name)
            .with_detail(NodeDetail::Method { params: signature, return_type })
            .with_children(children))
    }

    fn parameters(&mut self) -> PResult<Vec<AstNode>> {
        self.expect("(")?;
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            let start = self.start();
            let annotations = self.modifiers()?;
            let mut ty = self.parse_type()?;
            if self.eat("...") {
                ty.push_str("...");
            }
            let (name, _) = self.ident()?;
            while self.at("[") && self.peek_text(1) == "]" {
                self.pos += 2;
                ty.push_str("[]");
            }
            out.push(
                AstNode::new(NodeKind::Parameter, Span::new(start, self.prev_end()))
                    .named(name)
                    .with_detail(NodeDetail::Parameter { ty })
                    .with_children(annotations),
            );
            if self.eat(")") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn field(&mut self, start: usize, annotations: Vec<AstNode>, ty: String, first: String) -> PResult<AstNode> {
        let mut names = vec![first.clone()];
        let mut children = annotations;
        loop {
            while self.at("[") && self.peek_text(1) == "]" {
                self.pos += 2;
            }
            if self.eat("=") {
                children.push(self.var_initializer()?);
            }
            if !self.eat(",") {
                break;
            }
            names.push(self.ident()?.0);
        }
        self.expect(";")?;
        Ok(AstNode::new(NodeKind::FieldDecl, Span::new(start, self.prev_end()))
            .named(first)
            .with_detail(NodeDetail::Field { ty, names })
            .with_children(children))
    }

    fn var_initializer(&mut self) -> PResult<AstNode> {
        if self.at("{") {
            let first = self.pos;
            self.skip_balanced("{", "}")?;
            return Ok(self.expression_node(first));
        }
        self.expr_until(&[",", ";"])
    }

    fn block(&mut self) -> PResult<AstNode> {
        let start = self.start();
        self.expect("{")?;
        let mut children = Vec::new();
        while !self.at("}") {
            if self.at_eof() {
                return Err(self.error_at(start, "unclosed block"));
            }
            children.push(self.statement()?);
        }
        self.pos += 1;
        Ok(AstNode::new(NodeKind::Block, Span::new(start, self.prev_end())).with_children(children))
    }

    fn stmt(&self, kind: StatementKind, start: usize, children: Vec<AstNode>) -> AstNode {
        AstNode::new(NodeKind::Statement, Span::new(start, self.prev_end()))
            .with_detail(NodeDetail::Statement { kind, declares: Vec::new() })
            .with_children(children)
    }

    fn paren_expr(&mut self) -> PResult<AstNode> {
        self.expect("(")?;
        let e = self.expr_until(&[")"])?;
        self.expect(")")?;
        Ok(e)
    }

    fn statement(&mut self) -> PResult<AstNode> {
        let start = self.start();
        match self.peek_text(0) {
            "{" => self.block(),
            ";" => {
                self.pos += 1;
                Ok(self.stmt(StatementKind::Empty, start, vec![]))
            }
            "if" => {
                self.pos += 1;
                let mut children = vec![self.paren_expr()?, self.statement()?];
                if self.eat("else") {
                    children.push(self.statement()?);
                }
                Ok(self.stmt(StatementKind::If, start, children))
            }
            "while" => {
                self.pos += 1;
                let children = vec![self.paren_expr()?, self.statement()?];
                Ok(self.stmt(StatementKind::While, start, children))
            }
            "do" => {
                self.pos += 1;
                let body = self.statement()?;
                self.expect("while")?;
                let cond = self.paren_expr()?;
                self.expect(";")?;
                Ok(self.stmt(StatementKind::DoWhile, start, vec![body, cond]))
            }
            "for" => self.for_statement(),
            "switch" => self.switch_statement(),
            "return" | "throw" => {
                let kind = if self.peek_text(0) == "return" { StatementKind::Return } else { StatementKind::Throw };
                self.pos += 1;
                let mut children = Vec::new();
                if kind == StatementKind::Throw || !self.at(";") {
                    children.push(self.expr_until(&[";"])?);
                }
                self.expect(";")?;
                Ok(self.stmt(kind, start, children))
            }
            "break" | "continue" => {
                let kind = if self.peek_text(0) == "break" { StatementKind::Break } else { StatementKind::Continue };
                self.pos += 1;
                if self.is_ident_at(self.pos) {
                    self.pos += 1;
                }
                self.expect(";")?;
                Ok(self.stmt(kind, start, vec![]))
            }
            "try" => self.try_statement(),
            "synchronized" => {
                self.pos += 1;
                let children = vec![self.paren_expr()?, self.block()?];
                Ok(self.stmt(StatementKind::Synchronized, start, children))
            }
            "assert" => {
                self.pos += 1;
                let mut children = vec![self.expr_until(&[":", ";"])?];
                if self.eat(":") {
                    children.push(self.expr_until(&[";"])?);
                }
                self.expect(";")?;
                Ok(self.stmt(StatementKind::Assert, start, children))
            }
            "class" | "interface" | "enum" => Err(self.error("local type declarations are not supported")),
            "else" | "case" | "default" | "catch" | "finally" => {
                Err(self.error(format!("unexpected `{}`", self.peek_text(0))))
            }
            _ if self.is_ident_at(self.pos) && self.peek_text(1) == ":" => {
                Err(self.error("labeled statements are not supported"))
            }
            _ => {
                if self.at("final") || self.at("@") || self.looks_like_declaration(&["=", ";", ",", "["])? {
                    let node = self.local_variable(start)?;
                    self.expect(";")?;
                    let mut node = node;
                    node.span.end = self.prev_end();
                    Ok(node)
                } else {
                    let e = self.expr_until(&[";"])?;
                    self.expect(";")?;
                    Ok(self.stmt(StatementKind::Expression, start, vec![e]))
                }
            }
        }
    }

    /// `Type name` followed by one of `followers`, checked without consuming.
    fn looks_like_declaration(&mut self, followers: &[&str]) -> PResult<bool> {
        let save = self.pos;
        let result = (|| -> PResult<bool> {
            if PRIMITIVES.contains(&self.peek_text(0)) {
                self.pos += 1;
            } else {
                if !self.is_ident_at(self.pos) {
                    return Ok(false);
                }
                self.pos += 1;
                while self.at(".") && self.is_ident_at(self.pos + 1) {
                    self.pos += 2;
                }
                if self.at("<") && self.is_ident_at(self.pos + 1) && matches!(self.peek_text(2), ">" | "," | "." | "<" | "[") {
                    return Err(self.error("generic type arguments are not supported"));
                }
            }
            while self.at("[") && self.peek_text(1) == "]" {
                self.pos += 2;
            }
            Ok(self.is_ident_at(self.pos) && followers.contains(&self.peek_text(1)))
        })();
        self.pos = save;
        result
    }

    /// Local variable declaration without the terminating `;`.
    fn local_variable(&mut self, start: usize) -> PResult<AstNode> {
        let mut children = self.modifiers()?;
        let ty = self.parse_type()?;
        let mut declares = Vec::new();
        loop {
            let (name, _) = self.ident()?;
            let mut var_ty = ty.clone();
            while self.at("[") && self.peek_text(1) == "]" {
                self.pos += 2;
                var_ty.push_str("[]");
            }
            declares.push((var_ty, name));
            if self.eat("=") {
                children.push(self.var_initializer()?);
            }
            if !self.eat(",") {
                break;
            }
        }
        let first = declares[0].1.clone();
        Ok(AstNode::new(NodeKind::Statement, Span::new(start, self.prev_end()))
            .named(first)
            .with_detail(NodeDetail::Statement { kind: StatementKind::LocalVariable, declares })
            .with_children(children))
    }

    fn for_statement(&mut self) -> PResult<AstNode> {
        let start = self.start();
        self.pos += 1;
        self.expect("(")?;
        let mut children = Vec::new();
        if self.at("final") || self.at("@") || self.looks_like_declaration(&[":"])? {
            let vstart = self.start();
            children.push(self.local_variable(vstart)?);
            self.expect(":")?;
            children.push(self.expr_until(&[")"])?);
            self.expect(")")?;
            children.push(self.statement()?);
            return Ok(self.stmt(StatementKind::ForEach, start, children));
        }
        if !self.at(";") {
            if self.looks_like_declaration(&["=", ";", ",", "["])? {
                let vstart = self.start();
                children.push(self.local_variable(vstart)?);
            } else {
                children.push(self.expr_until(&[",", ";"])?);
                while self.eat(",") {
                    children.push(self.expr_until(&[",", ";"])?);
                }
            }
        }
        self.expect(";")?;
        if !self.at(";") {
            children.push(self.expr_until(&[";"])?);
        }
        self.expect(";")?;
        if !self.at(")") {
            children.push(self.expr_until(&[",", ")"])?);
            while self.eat(",") {
                children.push(self.expr_until(&[",", ")"])?);
            }
        }
        self.expect(")")?;
        children.push(self.statement()?);
        Ok(self.stmt(StatementKind::For, start, children))
    }

    fn switch_statement(&mut self) -> PResult<AstNode> {
        let start = self.start();
        self.pos += 1;
        let mut children = vec![self.paren_expr()?];
        self.expect("{")?;
        while !self.at("}") {
            let cstart = self.start();
            let mut case_children = Vec::new();
            if self.eat("case") {
                case_children.push(self.expr_until(&[":"])?);
                self.expect(":")?;
            } else if self.eat("default") {
                if self.at("->") {
                    return Err(self.error("switch arrows are not supported"));
                }
                self.expect(":")?;
            } else {
                return Err(self.error(format!("expected `case`, `default` or `}}`, found {}", self.found())));
            }
            while !(self.at("case") || self.at("default") || self.at("}")) {
                if self.at_eof() {
                    return Err(self.error_at(start, "unclosed switch"));
                }
                case_children.push(self.statement()?);
            }
            children.push(AstNode::new(NodeKind::SwitchCase, Span::new(cstart, self.prev_end())).with_children(case_children));
        }
        self.pos += 1;
        Ok(self.stmt(StatementKind::Switch, start, children))
    }

    fn try_statement(&mut self) -> PResult<AstNode> {
        let start = self.start();
        self.pos += 1;
        if self.at("(") {
            return Err(self.error("try-with-resources is not supported"));
        }
        let mut children = vec![self.block()?];
        let mut handlers = 0;
        while self.at("catch") {
            let cstart = self.start();
            self.pos += 1;
            self.expect("(")?;
            let pstart = self.start();
            let annotations = self.modifiers()?;
            let mut ty = self.parse_type()?;
            while self.eat("|") {
                ty.push('|');
                ty.push_str(&self.parse_type()?);
            }
            let (name, _) = self.ident()?;
            let param = AstNode::new(NodeKind::Parameter, Span::new(pstart, self.prev_end()))
                .named(name.clone())
                .with_detail(NodeDetail::Parameter { ty: ty.clone() })
                .with_children(annotations);
            self.expect(")")?;
            let body = self.block()?;
            children.push(
                AstNode::new(NodeKind::Statement, Span::new(cstart, self.prev_end()))
                    .with_detail(NodeDetail::Statement { kind: StatementKind::Catch, declares: vec![(ty, name)] })
                    .with_children(vec![param, body]),
            );
            handlers += 1;
        }
        if self.eat("finally") {
            children.push(self.block()?);
            handlers += 1;
        }
        if handlers == 0 {
            return Err(self.error("expected `catch` or `finally`"));
        }
        Ok(self.stmt(StatementKind::Try, start, children))
    }

    /// Opaque expression up to (not including) a depth-0 token in `stops` or
    /// an unbalanced closing bracket.
    fn expr_until(&mut self, stops: &[&str]) -> PResult<AstNode> {
        let first = self.pos;
        let mut depth: Vec<&str> = Vec::new();
        loop {
            if self.at_eof() {
                return Err(self.error("unexpected end of input in expression"));
            }
            let tok = self.toks[self.pos];
            let t = self.peek_text(0);
            if tok.kind == TokKind::Punct || tok.kind == TokKind::Ident {
                if depth.is_empty() && stops.contains(&t) {
                    break;
                }
                match t {
                    "(" | "[" => depth.push(t),
                    "{" => {
                        let prev = if self.pos > first { self.text_at(self.pos - 1) } else { "" };
                        if prev == ")" {
                            return Err(self.error("anonymous classes are not supported"));
                        }
                        depth.push(t);
                    }
                    ")" | "]" | "}" => {
                        let open = match t {
                            ")" => "(",
                            "]" => "[",
                            _ => "{",
                        };
                        match depth.last() {
                            None => break,
                            Some(o) if *o == open => {
                                depth.pop();
                            }
                            Some(_) => return Err(self.error(format!("mismatched `{t}`"))),
                        }
                    }
                    "->" => return Err(self.error("lambda expressions are not supported")),
                    "::" => return Err(self.error("method references are not supported")),
                    "new" => {
                        let mut j = self.pos + 1;
                        while self.is_ident_at(j) && self.text_at(j + 1) == "." {
                            j += 2;
                        }
                        if self.is_ident_at(j) && self.text_at(j + 1) == "<" {
                            return Err(self.error_at(self.toks[j + 1].span.start, "generic type arguments are not supported"));
                        }
                    }
                    kw if tok.kind == TokKind::Ident
                        && STATEMENT_KEYWORDS.contains(&kw)
                        && !(kw == "class" && self.pos > 0 && self.text_at(self.pos - 1) == ".") =>
                    {
                        return Err(self.error(format!("unexpected `{kw}` in expression")));
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
        if self.pos == first {
            return Err(self.error(format!("expected expression, found {}", self.found())));
        }
        Ok(self.expression_node(first))
    }

    fn expression_node(&self, first: usize) -> AstNode {
        let span = Span::new(self.toks[first].span.start, self.toks[self.pos - 1].span.end);
        let references = extract_references(self.text, &self.toks[first..self.pos]);
        AstNode::new(NodeKind::Expression, span).with_detail(NodeDetail::Expression { references })
    }
}

fn extract_references(text: &str, toks: &[Token]) -> Vec<Reference> {
    let t = |i: usize| toks.get(i).map_or("", |tok| &text[tok.span.range()]);
    let is_ident = |i: usize| toks.get(i).is_some_and(|tok| tok.kind == TokKind::Ident && !KEYWORDS.contains(&t(i)));
    let matching = |open: usize| -> usize {
        let (o, c) = if t(open) == "(" { ("(", ")") } else { ("[", "]") };
        let mut depth = 0;
        for i in open..toks.len() {
            if t(i) == o {
                depth += 1;
            } else if t(i) == c {
                depth -= 1;
                if depth == 0 {
                    return i;
                }
            }
        }
        toks.len().saturating_sub(1)
    };
    let arity = |open: usize| -> usize {
        let close = matching(open);
        if close == open + 1 {
            return 0;
        }
        let mut depth = 0;
        let mut commas = 0;
        for i in open + 1..close {
            match t(i) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                "," if depth == 0 => commas += 1,
                _ => {}
            }
        }
        commas + 1
    };
    let receiver = |k: usize| -> Receiver {
        let before_is_dot = k > 0 && t(k - 1) == ".";
        match t(k) {
            "this" if !before_is_dot => Receiver::This,
            "super" if !before_is_dot => Receiver::Super,
            _ if is_ident(k) && !before_is_dot => Receiver::Name(t(k).to_string()),
            _ => Receiver::Complex,
        }
    };

    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if !is_ident(i) {
            i += 1;
            continue;
        }
        let prev = if i > 0 { t(i - 1) } else { "" };
        if prev == "new" {
            let mut j = i;
            let mut name = t(i).to_string();
            while t(j + 1) == "." && is_ident(j + 2) {
                name.push('.');
                name.push_str(t(j + 2));
                j += 2;
            }
            if t(j + 1) == "(" {
                out.push(Reference {
                    name,
                    receiver: None,
                    kind: RefKind::New { arity: arity(j + 1) },
                    span: Span::new(toks[i - 1].span.start, toks[matching(j + 1)].span.end),
                });
            }
            i = j + 1;
            continue;
        }
        let recv = (prev == "." && i >= 2).then(|| receiver(i - 2));
        let name = t(i).to_string();
        if t(i + 1) == "(" {
            let close = matching(i + 1);
            let start = match &recv {
                Some(Receiver::Complex) | None => toks[i].span.start,
                Some(_) => toks[i - 2].span.start,
            };
            out.push(Reference {
                name,
                receiver: recv,
                kind: RefKind::Call { arity: arity(i + 1) },
                span: Span::new(start, toks[close].span.end),
            });
        } else {
            let mut j = i + 1;
            while t(j) == "[" {
                j = matching(j) + 1;
            }
            let after = t(j);
            let pre_inc = matches!(prev, "++" | "--") || (i >= 3 && prev == "." && matches!(t(i - 3), "++" | "--"));
            let access = if after == "=" {
                vec![Access::Write]
            } else if COMPOUND_ASSIGN.contains(&after) || matches!(after, "++" | "--") || pre_inc {
                vec![Access::Read, Access::Write]
            } else {
                vec![Access::Read]
            };
            out.push(Reference { name, receiver: recv, kind: RefKind::Name { access }, span: toks[i].span });
        }
        i += 1;
    }
    out
}
