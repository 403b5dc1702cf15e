//! Declarations and syntactic dependency edges across a project.
//!
//! Resolution is purely syntactic: an identifier plus call arity, looked up
//! through the enclosing class, its supertypes and its outer classes.
//! Receivers are typed only from declared types of parameters, locals and
//! fields. Overloads with the same arity all become callees. Anything not
//! found inside the project is an [`Target::External`] endpoint.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{Access, AstNode, NodeDetail, NodeKind, Receiver, RefKind, Reference, Span};
use super::SourceTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeclId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclKind {
    Class,
    Interface,
    Method,
    Constructor,
    Field,
}

impl DeclKind {
    pub fn is_type(self) -> bool {
        matches!(self, DeclKind::Class | DeclKind::Interface)
    }

    pub fn is_callable(self) -> bool {
        matches!(self, DeclKind::Method | DeclKind::Constructor)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decl {
    pub id: DeclId,
    pub kind: DeclKind,
    /// `pkg.Outer.Inner.member`; constructors are `pkg.Type.<init>`.
    pub qualified_name: String,
    pub name: String,
    pub file: String,
    pub span: Span,
    pub node_path: Vec<usize>,
    /// Enclosing type for members and nested types.
    pub owner: Option<DeclId>,
    pub arity: Option<usize>,
    /// Declared type of a field, return type of a method.
    pub ty: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Target {
    Decl(DeclId),
    External(String),
}

impl Target {
    pub fn decl(&self) -> Option<DeclId> {
        match self {
            Target::Decl(id) => Some(*id),
            Target::External(_) => None,
        }
    }
}

/// Where in the source an edge was observed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Site {
    pub file: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CallEdge {
    pub caller: DeclId,
    pub callee: Target,
    /// Called identifier and arity as written.
    pub name: String,
    pub arity: usize,
    pub site: Site,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FieldEdge {
    pub accessor: DeclId,
    pub field: Target,
    pub access: Access,
    pub site: Site,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InheritKind {
    Extends,
    Implements,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct InheritEdge {
    pub sub: DeclId,
    pub sup: Target,
    pub kind: InheritKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("duplicate declaration `{name}` in {first} and {second}")]
    DuplicateDeclaration { name: String, first: String, second: String },
}

#[derive(Clone, Debug, Default)]
pub struct ProjectIndex {
    trees: BTreeMap<String, SourceTree>,
    decls: Vec<Decl>,
    by_name: BTreeMap<String, Vec<DeclId>>,
    by_node: HashMap<(String, Vec<usize>), DeclId>,
    members: HashMap<DeclId, Vec<DeclId>>,
    pub call_edges: Vec<CallEdge>,
    pub field_edges: Vec<FieldEdge>,
    pub inherit_edges: Vec<InheritEdge>,
}

struct FileCtx {
    package: String,
    imports: Vec<String>,
}

pub fn build_index(trees: impl IntoIterator<Item = SourceTree>) -> Result<ProjectIndex, IndexError> {
    let mut idx = ProjectIndex::default();
    for t in trees {
        idx.trees.insert(t.path.clone(), t);
    }
    let mut ctx: BTreeMap<String, FileCtx> = BTreeMap::new();
    let paths: Vec<String> = idx.trees.keys().cloned().collect();
    for path in &paths {
        let tree = &idx.trees[path];
        let mut fc = FileCtx { package: String::new(), imports: Vec::new() };
        let mut pending = Vec::new();
        for node in &tree.root.children {
            match node.kind {
                NodeKind::PackageDecl => fc.package = node.name.clone().unwrap_or_default(),
                NodeKind::ImportDecl => fc.imports.push(node.name.clone().unwrap_or_default()),
                k if k.is_type() => pending.push(node.clone()),
                _ => {}
            }
        }
        let prefix = if fc.package.is_empty() { String::new() } else { format!("{}.", fc.package) };
        for node in pending {
            idx.add_type(path, &node, &prefix, None)?;
        }
        ctx.insert(path.clone(), fc);
    }

    let mut resolver = Resolver { idx: &idx, ctx: &ctx };
    let (calls, fields, inherits) = resolver.edges();
    idx.call_edges = calls;
    idx.field_edges = fields;
    idx.inherit_edges = inherits;
    Ok(idx)
}

impl ProjectIndex {
    fn add_decl(&mut self, decl: Decl, names: &[String]) -> Result<DeclId, IndexError> {
        let id = decl.id;
        let unique = !decl.kind.is_callable();
        for qn in names {
            let entry = self.by_name.entry(qn.clone()).or_default();
            if unique {
                if let Some(prev) = entry.iter().find(|d| {
                    let k = self.decls[d.0].kind;
                    k.is_type() == decl.kind.is_type() && !k.is_callable()
                }) {
                    return Err(IndexError::DuplicateDeclaration {
                        name: qn.clone(),
                        first: self.decls[prev.0].file.clone(),
                        second: decl.file.clone(),
                    });
                }
            }
            entry.push(id);
        }
        if let Some(owner) = decl.owner {
            self.members.entry(owner).or_default().push(id);
        }
        self.by_node.insert((decl.file.clone(), decl.node_path.clone()), id);
        self.decls.push(decl);
        Ok(id)
    }

    fn add_type(&mut self, file: &str, node: &AstNode, prefix: &str, owner: Option<DeclId>) -> Result<DeclId, IndexError> {
        let name = node.name.clone().unwrap_or_default();
        let qname = format!("{prefix}{name}");
        let kind = if node.kind == NodeKind::InterfaceDecl { DeclKind::Interface } else { DeclKind::Class };
        let id = DeclId(self.decls.len());
        let decl = Decl {
            id,
            kind,
            qualified_name: qname.clone(),
            name,
            file: file.to_string(),
            span: node.span,
            node_path: node.node_path.clone(),
            owner,
            arity: None,
            ty: None,
        };
        self.add_decl(decl, std::slice::from_ref(&qname))?;
        let member_prefix = format!("{qname}.");
        for child in &node.children {
            let (kind, qn, names, arity, ty) = match (&child.kind, &child.detail) {
                (k, _) if k.is_type() => {
                    self.add_type(file, child, &member_prefix, Some(id))?;
                    continue;
                }
                (NodeKind::FieldDecl, NodeDetail::Field { ty, names }) => {
                    let qns: Vec<String> = names.iter().map(|n| format!("{member_prefix}{n}")).collect();
                    (DeclKind::Field, qns[0].clone(), qns, None, Some(ty.clone()))
                }
                (NodeKind::MethodDecl, NodeDetail::Method { params, return_type }) => {
                    let qn = format!("{member_prefix}{}", child.name.as_deref().unwrap_or_default());
                    (DeclKind::Method, qn.clone(), vec![qn], Some(params.len()), return_type.clone())
                }
                (NodeKind::ConstructorDecl, NodeDetail::Method { params, .. }) => {
                    let qn = format!("{member_prefix}<init>");
                    (DeclKind::Constructor, qn.clone(), vec![qn], Some(params.len()), None)
                }
                _ => continue,
            };
            let decl = Decl {
                id: DeclId(self.decls.len()),
                kind,
                qualified_name: qn,
                name: child.name.clone().unwrap_or_default(),
                file: file.to_string(),
                span: child.span,
                node_path: child.node_path.clone(),
                owner: Some(id),
                arity,
                ty,
            };
            self.add_decl(decl, &names)?;
        }
        Ok(id)
    }

    pub fn trees(&self) -> &BTreeMap<String, SourceTree> {
        &self.trees
    }

    pub fn tree(&self, path: &str) -> Option<&SourceTree> {
        self.trees.get(path)
    }

    pub fn into_trees(self) -> BTreeMap<String, SourceTree> {
        self.trees
    }

    pub fn decls(&self) -> &[Decl] {
        &self.decls
    }

    pub fn decl(&self, id: DeclId) -> &Decl {
        &self.decls[id.0]
    }

    pub fn node(&self, id: DeclId) -> &AstNode {
        let d = self.decl(id);
        self.trees[&d.file].node_at(&d.node_path).expect("declaration node")
    }

    /// All declarations registered under a qualified name.
    pub fn lookup(&self, qualified_name: &str) -> &[DeclId] {
        self.by_name.get(qualified_name).map_or(&[], Vec::as_slice)
    }

    pub fn decl_at(&self, file: &str, node_path: &[usize]) -> Option<DeclId> {
        self.by_node.get(&(file.to_string(), node_path.to_vec())).copied()
    }

    /// Innermost declaration whose node contains `span`.
    pub fn enclosing_decl(&self, file: &str, span: Span) -> Option<DeclId> {
        let tree = self.trees.get(file)?;
        let mut node = &tree.root;
        let mut found = None;
        while let Some(c) = node.children.iter().find(|c| c.span.contains(span)) {
            node = c;
            if let Some(id) = self.decl_at(file, &c.node_path) {
                found = Some(id);
            }
        }
        found
    }

    pub fn slice_site(&self, site: &Site) -> &str {
        self.trees.get(&site.file).map_or("", |t| t.slice(site.span))
    }

    pub fn members(&self, ty: DeclId) -> &[DeclId] {
        self.members.get(&ty).map_or(&[], Vec::as_slice)
    }

    /// Resolve a method name from a trace (`pkg.Type.method`, optionally in
    /// `pkg/Type$Inner.method (sig)` form) to callable declarations.
    pub fn resolve_method_name(&self, raw: &str) -> Vec<DeclId> {
        let name = normalize_method_name(raw);
        let callable = |ids: &[DeclId]| -> Vec<DeclId> {
            ids.iter().copied().filter(|d| self.decl(*d).kind.is_callable()).collect()
        };
        let exact = callable(self.lookup(&name));
        if !exact.is_empty() {
            return exact;
        }
        // suffix match at a `.` boundary in either direction, accepted when unambiguous
        let mut owners = BTreeSet::new();
        let mut hits = Vec::new();
        for (qn, ids) in &self.by_name {
            let matches = qn.ends_with(&format!(".{name}")) || name.ends_with(&format!(".{qn}"));
            if matches {
                for id in callable(ids) {
                    owners.insert(self.decl(id).owner);
                    hits.push(id);
                }
            }
        }
        if owners.len() == 1 {
            hits
        } else {
            Vec::new()
        }
    }
}

fn normalize_method_name(raw: &str) -> String {
    let cut = raw.find(|c: char| c == '(' || c.is_whitespace()).unwrap_or(raw.len());
    raw[..cut].trim().replace(['/', '$'], ".")
}

struct Resolver<'a> {
    idx: &'a ProjectIndex,
    ctx: &'a BTreeMap<String, FileCtx>,
}

#[derive(Default)]
struct EdgeSink {
    calls: Vec<CallEdge>,
    fields: Vec<FieldEdge>,
    seen_calls: HashSet<CallEdge>,
    seen_fields: HashSet<FieldEdge>,
}

impl<'a> Resolver<'a> {
    fn edges(&mut self) -> (Vec<CallEdge>, Vec<FieldEdge>, Vec<InheritEdge>) {
        let mut inherits = Vec::new();
        let mut sink = EdgeSink::default();
        for decl in self.idx.decls() {
            let node = self.idx.node(decl.id);
            if decl.kind.is_type() {
                if let NodeDetail::Type { extends, implements } = &node.detail {
                    let sup_kind = if decl.kind == DeclKind::Interface { InheritKind::Implements } else { InheritKind::Extends };
                    for s in extends {
                        inherits.push(InheritEdge { sub: decl.id, sup: self.resolve_type(s, decl.id), kind: sup_kind });
                    }
                    for s in implements {
                        inherits.push(InheritEdge { sub: decl.id, sup: self.resolve_type(s, decl.id), kind: InheritKind::Implements });
                    }
                }
                // initializer blocks belong to the type itself
                for child in node.children.iter().filter(|c| c.kind == NodeKind::Block) {
                    self.member_edges(decl.id, decl.id, child, &mut sink);
                }
            } else {
                let owner = decl.owner.expect("member has an owner");
                self.member_edges(decl.id, owner, node, &mut sink);
            }
        }
        (sink.calls, sink.fields, inherits)
    }

    fn member_edges(&self, accessor: DeclId, class: DeclId, body: &AstNode, sink: &mut EdgeSink) {
        let file = self.idx.decl(accessor).file.clone();
        let mut scope: HashMap<String, String> = HashMap::new();
        for n in body.walk() {
            match &n.detail {
                NodeDetail::Parameter { ty } => {
                    if let Some(name) = &n.name {
                        scope.insert(name.clone(), ty.clone());
                    }
                }
                NodeDetail::Statement { declares, .. } => {
                    for (ty, name) in declares {
                        scope.insert(name.clone(), ty.clone());
                    }
                }
                _ => {}
            }
        }
        for n in body.walk() {
            if let NodeDetail::Expression { references } = &n.detail {
                for r in references {
                    self.resolve_reference(accessor, class, &scope, &file, r, sink);
                }
            }
        }
    }

    fn resolve_reference(
        &self,
        accessor: DeclId,
        class: DeclId,
        scope: &HashMap<String, String>,
        file: &str,
        r: &Reference,
        sink: &mut EdgeSink,
    ) {
        let site = Site { file: file.to_string(), span: r.span };
        match &r.kind {
            RefKind::Call { arity } => {
                let targets = self.resolve_call(class, scope, r, *arity);
                for callee in targets {
                    let e = CallEdge { caller: accessor, callee, name: r.name.clone(), arity: *arity, site: site.clone() };
                    if sink.seen_calls.insert(e.clone()) {
                        sink.calls.push(e);
                    }
                }
            }
            RefKind::New { arity } => {
                let callee = match self.resolve_type(&r.name, class) {
                    Target::Decl(ty) => {
                        let ctors: Vec<DeclId> = self
                            .idx
                            .members(ty)
                            .iter()
                            .copied()
                            .filter(|m| self.idx.decl(*m).kind == DeclKind::Constructor)
                            .collect();
                        let exact: Vec<DeclId> =
                            ctors.iter().copied().filter(|c| self.idx.decl(*c).arity == Some(*arity)).collect();
                        if !exact.is_empty() {
                            exact.into_iter().map(Target::Decl).collect()
                        } else if !ctors.is_empty() {
                            ctors.into_iter().map(Target::Decl).collect()
                        } else {
                            vec![Target::Decl(ty)]
                        }
                    }
                    ext => vec![ext],
                };
                for c in callee {
                    let e = CallEdge { caller: accessor, callee: c, name: r.name.clone(), arity: *arity, site: site.clone() };
                    if sink.seen_calls.insert(e.clone()) {
                        sink.calls.push(e);
                    }
                }
            }
            RefKind::Name { access } => {
                let fields = match &r.receiver {
                    None if scope.contains_key(&r.name) => Vec::new(),
                    None | Some(Receiver::This) => self.lookup_in_hierarchy(class, &r.name, true, |_| true, DeclKind::Field),
                    Some(Receiver::Super) => self.lookup_in_supers(class, &r.name, |_| true, DeclKind::Field),
                    Some(Receiver::Name(x)) => match self.receiver_type(class, scope, x) {
                        Some(Target::Decl(ty)) => self.lookup_in_hierarchy(ty, &r.name, false, |_| true, DeclKind::Field),
                        _ => Vec::new(),
                    },
                    Some(Receiver::Complex) => Vec::new(),
                };
                for f in fields {
                    for a in access {
                        let e = FieldEdge { accessor, field: Target::Decl(f), access: *a, site: site.clone() };
                        if sink.seen_fields.insert(e.clone()) {
                            sink.fields.push(e);
                        }
                    }
                }
            }
        }
    }

    fn resolve_call(&self, class: DeclId, scope: &HashMap<String, String>, r: &Reference, arity: usize) -> Vec<Target> {
        let wants = |d: &Decl| d.arity == Some(arity);
        let external = |prefix: Option<&str>| {
            vec![Target::External(match prefix {
                Some(p) => format!("{p}.{}/{arity}", r.name),
                None => format!("{}/{arity}", r.name),
            })]
        };
        let found = match &r.receiver {
            None | Some(Receiver::This) => self.lookup_in_hierarchy(class, &r.name, true, wants, DeclKind::Method),
            Some(Receiver::Super) => self.lookup_in_supers(class, &r.name, wants, DeclKind::Method),
            Some(Receiver::Name(x)) => match self.receiver_type(class, scope, x) {
                Some(Target::Decl(ty)) => self.lookup_in_hierarchy(ty, &r.name, false, wants, DeclKind::Method),
                Some(Target::External(ty)) => return external(Some(&ty)),
                None => self.project_wide(&r.name, arity),
            },
            Some(Receiver::Complex) => self.project_wide(&r.name, arity),
        };
        if found.is_empty() {
            let prefix = match &r.receiver {
                Some(Receiver::Name(x)) => Some(x.as_str()),
                _ => None,
            };
            external(prefix)
        } else {
            found.into_iter().map(Target::Decl).collect()
        }
    }

    /// Static type of a receiver identifier: a variable or field's declared
    /// type, or the identifier itself when it names a type.
    fn receiver_type(&self, class: DeclId, scope: &HashMap<String, String>, x: &str) -> Option<Target> {
        if let Some(ty) = scope.get(x) {
            return Some(self.resolve_type(ty, class));
        }
        let fields = self.lookup_in_hierarchy(class, x, true, |_| true, DeclKind::Field);
        if let Some(f) = fields.first() {
            let ty = self.idx.decl(*f).ty.clone().unwrap_or_default();
            return Some(self.resolve_type(&ty, class));
        }
        match self.resolve_type(x, class) {
            Target::Decl(d) => Some(Target::Decl(d)),
            ext if x.starts_with(|c: char| c.is_ascii_uppercase()) => Some(ext),
            _ => None,
        }
    }

    fn project_wide(&self, name: &str, arity: usize) -> Vec<DeclId> {
        self.idx
            .decls()
            .iter()
            .filter(|d| d.kind == DeclKind::Method && d.name == name && d.arity == Some(arity))
            .map(|d| d.id)
            .collect()
    }

    fn own_members(&self, ty: DeclId, name: &str, kind: DeclKind, pred: &dyn Fn(&Decl) -> bool) -> Vec<DeclId> {
        let all: Vec<DeclId> = self
            .idx
            .members(ty)
            .iter()
            .copied()
            .filter(|m| {
                let d = self.idx.decl(*m);
                d.kind == kind && member_names(self.idx, d).any(|n| n == name)
            })
            .collect();
        let preferred: Vec<DeclId> = all.iter().copied().filter(|m| pred(self.idx.decl(*m))).collect();
        if preferred.is_empty() {
            all
        } else {
            preferred
        }
    }

    fn supertypes(&self, ty: DeclId) -> Vec<DeclId> {
        let node = self.idx.node(ty);
        match &node.detail {
            NodeDetail::Type { extends, implements } => extends
                .iter()
                .chain(implements)
                .filter_map(|s| self.resolve_type(s, ty).decl())
                .filter(|d| *d != ty)
                .collect(),
            _ => Vec::new(),
        }
    }

    fn lookup_in_supers(&self, ty: DeclId, name: &str, pred: impl Fn(&Decl) -> bool, kind: DeclKind) -> Vec<DeclId> {
        let mut visited = HashSet::from([ty]);
        let mut level: Vec<DeclId> = self.supertypes(ty);
        while !level.is_empty() {
            let mut hits = Vec::new();
            let mut next = Vec::new();
            for t in level {
                if !visited.insert(t) {
                    continue;
                }
                hits.extend(self.own_members(t, name, kind, &pred));
                next.extend(self.supertypes(t));
            }
            if !hits.is_empty() {
                return hits;
            }
            level = next;
        }
        Vec::new()
    }

    /// Members named `name` in `ty`, then its supertypes (breadth first),
    /// then, if `outer`, the same search from each enclosing type.
    fn lookup_in_hierarchy(&self, ty: DeclId, name: &str, outer: bool, pred: impl Fn(&Decl) -> bool, kind: DeclKind) -> Vec<DeclId> {
        let mut cur = Some(ty);
        while let Some(t) = cur {
            let own = self.own_members(t, name, kind, &pred);
            if !own.is_empty() {
                return own;
            }
            let inherited = self.lookup_in_supers(t, name, &pred, kind);
            if !inherited.is_empty() {
                return inherited;
            }
            if !outer {
                break;
            }
            cur = self.idx.decl(t).owner;
        }
        Vec::new()
    }

    fn type_named(&self, qname: &str) -> Option<DeclId> {
        self.idx.lookup(qname).iter().copied().find(|d| self.idx.decl(*d).kind.is_type())
    }

    fn resolve_type(&self, raw: &str, from: DeclId) -> Target {
        let name = raw.trim_end_matches("[]").trim_end_matches("...");
        let file = &self.idx.decl(from).file;
        let fc = &self.ctx[file];
        let (head, rest) = match name.split_once('.') {
            Some((h, r)) => (h, Some(r)),
            None => (name, None),
        };
        if rest.is_some() {
            if let Some(d) = self.type_named(name) {
                return Target::Decl(d);
            }
        }
        let head_decl = self.resolve_simple_type(head, from, fc);
        match (head_decl, rest) {
            (Some(d), None) => Target::Decl(d),
            (Some(d), Some(r)) => {
                let qn = format!("{}.{r}", self.idx.decl(d).qualified_name);
                self.type_named(&qn).map_or(Target::External(name.to_string()), Target::Decl)
            }
            (None, _) => Target::External(name.to_string()),
        }
    }

    fn resolve_simple_type(&self, name: &str, from: DeclId, fc: &FileCtx) -> Option<DeclId> {
        // nested types visible from the enclosing chain
        let mut cur = Some(from);
        while let Some(t) = cur {
            let d = self.idx.decl(t);
            if d.kind.is_type() {
                if d.name == name {
                    return Some(t);
                }
                if let Some(n) = self.type_named(&format!("{}.{name}", d.qualified_name)) {
                    return Some(n);
                }
            }
            cur = d.owner;
        }
        let pkg = if fc.package.is_empty() { name.to_string() } else { format!("{}.{name}", fc.package) };
        if let Some(d) = self.type_named(&pkg) {
            return Some(d);
        }
        for imp in &fc.imports {
            if imp.strip_prefix("static ").is_some() {
                continue;
            }
            if let Some(p) = imp.strip_suffix(".*") {
                if let Some(d) = self.type_named(&format!("{p}.{name}")) {
                    return Some(d);
                }
            } else if imp.rsplit('.').next() == Some(name) {
                if let Some(d) = self.type_named(imp) {
                    return Some(d);
                }
            }
        }
        let candidates: Vec<&Decl> = self.idx.decls().iter().filter(|d| d.kind.is_type() && d.name == name).collect();
        match candidates.as_slice() {
            [only] => Some(only.id),
            _ => None,
        }
    }
}

fn member_names<'a>(idx: &'a ProjectIndex, d: &'a Decl) -> Box<dyn Iterator<Item = &'a str> + 'a> {
    if d.kind == DeclKind::Field {
        if let NodeDetail::Field { names, .. } = &idx.node(d.id).detail {
            return Box::new(names.iter().map(String::as_str));
        }
    }
    Box::new(std::iter::once(d.name.as_str()))
}
