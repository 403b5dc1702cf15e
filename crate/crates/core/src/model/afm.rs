//! `featuremodel.afm` reader and writer.
//!
//! ```text
//! file        := production+ ("%%" constraint* )?
//! production  := NAME ":" termlist ("::" GENNAME)? ";"
//! termlist    := term+ | orlist | altlist
//! term        := NAME | "[" NAME "]"
//! orlist      := "(" NAME ("|" NAME)+ ")" "+"
//! altlist     := "(" NAME ("|" NAME)+ ")"
//! constraint  := formula ";"
//! ```
//!
//! Constraint formulas use `not`, `and`, `or`, `implies` (tightest to
//! loosest, `implies` associates to the right) and parentheses. `//` starts
//! a line comment. The root production may have an empty term list
//! (`Root : ;`) so that a root-only model can be written down.

use std::fmt::Write as _;

use super::{ChildSlot, FeatureModel, Formula, ModelError, Position, Production, SlotKind};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Name(String),
    Colon,
    ColonColon,
    Semi,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Bar,
    Plus,
    Sections,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Colon => "`:`".into(),
            Tok::ColonColon => "`::`".into(),
            Tok::Semi => "`;`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Sections => "`%%`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(text: &'a str) -> Result<Vec<(Tok, usize)>, ModelError> {
        let mut lx = Lexer { text, toks: Vec::new() };
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => i += 1,
                b'/' if bytes.get(i + 1) == Some(&b'/') => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                }
                b':' if bytes.get(i + 1) == Some(&b':') => {
                    lx.toks.push((Tok::ColonColon, i));
                    i += 2;
                }
                b'%' if bytes.get(i + 1) == Some(&b'%') => {
                    lx.toks.push((Tok::Sections, i));
                    i += 2;
                }
                b':' | b';' | b'[' | b']' | b'(' | b')' | b'|' | b'+' => {
                    let t = match c {
                        b':' => Tok::Colon,
                        b';' => Tok::Semi,
                        b'[' => Tok::LBracket,
                        b']' => Tok::RBracket,
                        b'(' => Tok::LParen,
                        b')' => Tok::RParen,
                        b'|' => Tok::Bar,
                        _ => Tok::Plus,
                    };
                    lx.toks.push((t, i));
                    i += 1;
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let start = i;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                        i += 1;
                    }
                    lx.toks.push((Tok::Name(text[start..i].to_string()), start));
                }
                _ => {
                    let ch = text[i..].chars().next().unwrap();
                    return Err(lx.error(i, format!("unexpected character `{ch}`")));
                }
            }
        }
        lx.toks.push((Tok::Eof, text.len()));
        Ok(lx.toks)
    }

    fn error(&self, offset: usize, message: String) -> ModelError {
        ModelError::Syntax { position: Position::of_offset(self.text, offset), message }
    }
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, ModelError> {
        Ok(Parser { text, toks: Lexer::run(text)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        &self.toks[(self.pos + ahead).min(self.toks.len() - 1)].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn position(&self) -> Position {
        Position::of_offset(self.text, self.offset())
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ModelError {
        ModelError::Syntax { position: self.position(), message: message.into() }
    }

    fn unexpected(&self, wanted: &str) -> ModelError {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ModelError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn name(&mut self) -> Result<(String, Position), ModelError> {
        let pos = self.position();
        match self.peek().clone() {
            Tok::Name(n) if !super::KEYWORDS.contains(&n.as_str()) => {
                self.bump();
                Ok((n, pos))
            }
            Tok::Name(n) => Err(self.error(format!("`{n}` is a reserved word"))),
            _ => Err(self.unexpected("a feature name")),
        }
    }

    fn production(&mut self, is_first: bool) -> Result<(Production, Vec<(String, Position)>), ModelError> {
        let (feature, _) = self.name()?;
        self.expect(Tok::Colon)?;
        let mut slots = Vec::new();
        let mut mentioned = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            let mut members = vec![self.name()?];
            while *self.peek() == Tok::Bar {
                self.bump();
                members.push(self.name()?);
            }
            if members.len() < 2 {
                return Err(self.error("a group needs at least two alternatives"));
            }
            self.expect(Tok::RParen)?;
            let kind = if *self.peek() == Tok::Plus {
                self.bump();
                SlotKind::OrGroup
            } else {
                SlotKind::AlternativeGroup
            };
            slots.push(ChildSlot::group(kind, members.iter().map(|(n, _)| n.clone())));
            mentioned.extend(members);
        } else {
            loop {
                match self.peek() {
                    Tok::Name(_) => {
                        let m = self.name()?;
                        slots.push(ChildSlot::mandatory(m.0.clone()));
                        mentioned.push(m);
                    }
                    Tok::LBracket => {
                        self.bump();
                        let m = self.name()?;
                        self.expect(Tok::RBracket)?;
                        slots.push(ChildSlot::optional(m.0.clone()));
                        mentioned.push(m);
                    }
                    Tok::LParen => {
                        return Err(self.error("a group must be the only term list of its production"))
                    }
                    _ => break,
                }
            }
            if slots.is_empty() && !is_first {
                return Err(self.unexpected("a term"));
            }
        }
        let generator = if *self.peek() == Tok::ColonColon {
            self.bump();
            Some(self.name()?.0)
        } else {
            None
        };
        self.expect(Tok::Semi)?;
        Ok((Production { feature, slots, generator }, mentioned))
    }

    // formula := or ("implies" formula)?
    fn formula(&mut self, names: &mut Vec<(String, Position)>) -> Result<Formula, ModelError> {
        let lhs = self.disjunction(names)?;
        if self.at_keyword("implies") {
            self.bump();
            let rhs = self.formula(names)?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self, names: &mut Vec<(String, Position)>) -> Result<Formula, ModelError> {
        let mut items = vec![self.conjunction(names)?];
        while self.at_keyword("or") {
            self.bump();
            items.push(self.conjunction(names)?);
        }
        Ok(Formula::or(items))
    }

    fn conjunction(&mut self, names: &mut Vec<(String, Position)>) -> Result<Formula, ModelError> {
        let mut items = vec![self.unary(names)?];
        while self.at_keyword("and") {
            self.bump();
            items.push(self.unary(names)?);
        }
        Ok(Formula::and(items))
    }

    fn unary(&mut self, names: &mut Vec<(String, Position)>) -> Result<Formula, ModelError> {
        if self.at_keyword("not") {
            self.bump();
            return Ok(Formula::not(self.unary(names)?));
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let f = self.formula(names)?;
            self.expect(Tok::RParen)?;
            return Ok(f);
        }
        let (n, pos) = self.name()?;
        names.push((n.clone(), pos));
        Ok(Formula::Var(n))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }
}

/// Parse a `featuremodel.afm` text.
pub fn parse_afm(text: &str) -> Result<FeatureModel, ModelError> {
    let mut p = Parser::new(text)?;
    let mut productions = Vec::new();
    let mut mentions: Vec<(String, Position)> = Vec::new();
    let mut lhs_positions = Vec::new();
    while matches!(p.peek(), Tok::Name(_)) {
        let pos = p.position();
        let (prod, mentioned) = p.production(productions.is_empty())?;
        lhs_positions.push((prod.feature.clone(), pos));
        mentions.extend(mentioned);
        productions.push(prod);
    }
    if productions.is_empty() {
        return Err(p.unexpected("a production"));
    }
    let mut constraints = Vec::new();
    let mut constraint_names = Vec::new();
    if *p.peek() == Tok::Sections {
        p.bump();
        while *p.peek() != Tok::Eof {
            let f = p.formula(&mut constraint_names)?;
            p.expect(Tok::Semi)?;
            constraints.push(f);
        }
    }
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("a production, `%%` or end of input"));
    }

    let root = productions[0].feature.clone();
    FeatureModel::new(root, productions, constraints).map_err(|e| match e {
        ModelError::DuplicateFeature { name, .. } => {
            // report the second occurrence
            let position = lhs_positions
                .iter()
                .filter(|(n, _)| *n == name)
                .chain(mentions.iter().filter(|(n, _)| *n == name))
                .map(|(_, p)| *p)
                .max_by_key(|p| (p.line, p.column));
            ModelError::DuplicateFeature { name, position }
        }
        ModelError::UndefinedFeature { name, .. } => {
            let position = constraint_names.iter().find(|(n, _)| *n == name).map(|(_, p)| *p);
            ModelError::UndefinedFeature { name, position }
        }
        other => other,
    })
}

/// Parse a single constraint formula (no trailing `;`).
pub fn parse_constraint(text: &str) -> Result<Formula, ModelError> {
    let mut p = Parser::new(text)?;
    let f = p.formula(&mut Vec::new())?;
    if *p.peek() == Tok::Semi && *p.peek_at(1) == Tok::Eof {
        p.bump();
    }
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of formula"));
    }
    Ok(f)
}

/// Write a model in `featuremodel.afm` syntax; re-parsing yields an equal model.
pub fn serialize_afm(model: &FeatureModel) -> String {
    let mut out = String::new();
    for p in model.productions() {
        let _ = write!(out, "{} :", p.feature);
        for slot in &p.slots {
            match slot.kind {
                SlotKind::Mandatory => {
                    let _ = write!(out, " {}", slot.members[0]);
                }
                SlotKind::Optional => {
                    let _ = write!(out, " [{}]", slot.members[0]);
                }
                SlotKind::OrGroup | SlotKind::AlternativeGroup => {
                    let _ = write!(out, " ({})", slot.members.join(" | "));
                    if slot.kind == SlotKind::OrGroup {
                        out.push('+');
                    }
                }
            }
        }
        if let Some(g) = &p.generator {
            let _ = write!(out, " :: {g}");
        }
        out.push_str(" ;\n");
    }
    if !model.constraints().is_empty() {
        out.push_str("%%\n");
        for c in model.constraints() {
            let _ = writeln!(out, "{c} ;");
        }
    }
    out
}
