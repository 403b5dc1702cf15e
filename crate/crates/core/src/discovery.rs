//! Candidate feature names from descriptions and code identifiers.
//!
//! Descriptions are POS-tagged from a word lexicon (unknown words are
//! nouns) and chunked into noun phrases `(ADJ|NN)* NN` and verb phrases
//! `VB [DT] NP`. Code terms are ranked by tf-idf with classes as
//! documents: raw counts times `ln(N / df)`, no smoothing.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::java::lexer::{lex, TokKind};
use crate::java::parser::KEYWORDS as JAVA_KEYWORDS;
use crate::java::{AstNode, ProjectIndex, SourceTree, Span};
use crate::model::is_feature_name;

const BUILTIN_LEXICON: &str = include_str!("../data/pos_lexicon.tsv");

const STOP_WORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by",
    "can", "could", "did", "do", "does", "each", "for", "from", "get", "had", "has", "have", "he", "her",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "me", "my", "no", "not", "of", "on", "or",
    "our", "out", "set", "she", "so", "some", "than", "that", "the", "their", "them", "then", "there",
    "these", "they", "to", "too", "up", "us", "was", "we", "were", "what", "when", "where", "which",
    "who", "why", "will", "with", "would", "you", "your",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Tag {
    NN,
    VB,
    ADJ,
    DT,
    IN,
    OTHER,
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "NN" => Tag::NN,
            "VB" => Tag::VB,
            "ADJ" => Tag::ADJ,
            "DT" => Tag::DT,
            "IN" => Tag::IN,
            "OTHER" => Tag::OTHER,
            _ => return Err(format!("unknown tag `{s}`")),
        })
    }
}

#[derive(Debug, Error)]
#[error("lexicon line {line}: {message}")]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

/// Lowercase word → tag.
#[derive(Clone, Debug)]
pub struct PosLexicon {
    words: HashMap<String, Tag>,
}

impl Default for PosLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PosLexicon {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON).expect("builtin lexicon is well-formed")
    }

    /// Parse `word<TAB>TAG` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = PosLexicon { words: HashMap::new() };
        lex.extend(text)?;
        if lex.words.is_empty() {
            return Err(LexiconError { line: 0, message: "empty lexicon".into() });
        }
        Ok(lex)
    }

    /// Add or override entries from more `word<TAB>TAG` lines.
    pub fn extend(&mut self, text: &str) -> Result<(), LexiconError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| LexiconError { line: i + 1, message };
            let (word, tag) = line.split_once('\t').ok_or_else(|| err("expected `word<TAB>TAG`".into()))?;
            let tag: Tag = tag.trim().parse().map_err(err)?;
            self.words.insert(word.trim().to_lowercase(), tag);
        }
        Ok(())
    }

    pub fn tag(&self, word: &str) -> Tag {
        if word.starts_with(|c: char| c.is_ascii_digit()) {
            return Tag::OTHER;
        }
        self.words.get(&word.to_lowercase()).copied().unwrap_or(Tag::NN)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhraseKind {
    Noun,
    Verb,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Phrase {
    pub kind: PhraseKind,
    /// Lowercase words, determiners dropped.
    pub words: Vec<String>,
}

impl Phrase {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }

    pub fn camel_case(&self) -> String {
        self.words.iter().map(|w| capitalize(w)).collect()
    }
}

impl fmt::Display for Phrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Words of a sentence, with `None` at punctuation that breaks a chunk.
fn words(text: &str) -> Vec<Option<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else {
            if !cur.is_empty() {
                out.push(Some(std::mem::take(&mut cur).to_lowercase()));
            }
            // apostrophes and hyphens stay inside a chunk; everything else
            // except plain whitespace ends it
            if !(ch.is_whitespace() || ch == '\'' || ch == '-') {
                out.push(None);
            }
        }
    }
    if !cur.is_empty() {
        out.push(Some(cur.to_lowercase()));
    }
    out
}

/// Noun and verb phrases in order of appearance, deduplicated
/// case-insensitively.
pub fn extract_phrases(description: &str, lexicon: &PosLexicon) -> Vec<Phrase> {
    let toks: Vec<Option<(String, Tag)>> =
        words(description).into_iter().map(|w| w.map(|w| { let t = lexicon.tag(&w); (w, t) })).collect();
    let tag_at = |i: usize| toks.get(i).and_then(|t| t.as_ref()).map(|t| t.1);
    // longest NP starting at i: (ADJ|NN)+ trimmed back to its last NN
    let np_at = |i: usize| -> Option<usize> {
        let mut j = i;
        let mut last_nn = None;
        while let Some(t) = tag_at(j) {
            match t {
                Tag::NN => last_nn = Some(j + 1),
                Tag::ADJ => {}
                _ => break,
            }
            j += 1;
        }
        last_nn
    };
    let word = |i: usize| toks[i].as_ref().expect("word token").0.clone();

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut i = 0;
    while i < toks.len() {
        let phrase = match tag_at(i) {
            Some(Tag::VB) => {
                let np_start = if tag_at(i + 1) == Some(Tag::DT) { i + 2 } else { i + 1 };
                np_at(np_start).map(|end| {
                    let mut w = vec![word(i)];
                    w.extend((np_start..end).map(word));
                    (Phrase { kind: PhraseKind::Verb, words: w }, end)
                })
            }
            Some(Tag::NN | Tag::ADJ) => np_at(i).map(|end| (Phrase { kind: PhraseKind::Noun, words: (i..end).map(word).collect() }, end)),
            _ => None,
        };
        match phrase {
            Some((p, end)) => {
                if seen.insert(p.text()) {
                    out.push(p);
                }
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermScore {
    pub term: String,
    pub score: f64,
    /// Number of documents containing the term.
    pub documents: usize,
}

/// Split an identifier on underscores, digits and case changes:
/// `getLockVersion` → get, lock, version; `HTTPServer2x` → http, server, x.
pub fn split_identifier(ident: &str) -> Vec<String> {
    let mut out = Vec::new();
    for part in ident.split(|c: char| !c.is_alphabetic()) {
        let chars: Vec<char> = part.chars().collect();
        let mut start = 0;
        for k in 1..chars.len() {
            let (prev, cur) = (chars[k - 1], chars[k]);
            let lower_to_upper = prev.is_lowercase() && cur.is_uppercase();
            // end of an acronym: `HTTPServer` splits before `S`
            let acronym_end = prev.is_uppercase() && cur.is_uppercase() && chars.get(k + 1).is_some_and(|n| n.is_lowercase());
            if lower_to_upper || acronym_end {
                out.push(chars[start..k].iter().collect::<String>().to_lowercase());
                start = k;
            }
        }
        if start < chars.len() {
            out.push(chars[start..].iter().collect::<String>().to_lowercase());
        }
    }
    out
}

fn is_stop(term: &str) -> bool {
    term.chars().count() < 2 || STOP_WORDS.contains(&term) || JAVA_KEYWORDS.contains(&term)
}

/// Terms of an identifier after splitting and stop-word removal.
pub fn identifier_terms(ident: &str) -> Vec<String> {
    split_identifier(ident).into_iter().filter(|t| !is_stop(t)).collect()
}

/// tf-idf over pre-tokenized documents. Documents without terms do not
/// count towards N.
pub fn rank_documents<S: AsRef<str>>(documents: &[Vec<S>]) -> Vec<TermScore> {
    let docs: Vec<BTreeMap<&str, usize>> = documents
        .iter()
        .filter(|d| !d.is_empty())
        .map(|d| {
            let mut tf = BTreeMap::new();
            for t in d {
                *tf.entry(t.as_ref()).or_insert(0) += 1;
            }
            tf
        })
        .collect();
    let n = docs.len() as f64;
    let mut acc: BTreeMap<&str, (usize, usize)> = BTreeMap::new(); // term → (Σ tf, df)
    for d in &docs {
        for (t, c) in d {
            let e = acc.entry(t).or_insert((0, 0));
            e.0 += c;
            e.1 += 1;
        }
    }
    // with idf constant per term, Σ_d tf·idf = (Σ_d tf)·idf
    let mut out: Vec<TermScore> = acc
        .into_iter()
        .map(|(term, (tf, df))| TermScore { term: term.to_string(), score: tf as f64 * (n / df as f64).ln(), documents: df })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
    out
}

/// Identifier terms of one class, excluding the text of nested classes.
pub fn class_terms(tree: &SourceTree, class: &AstNode) -> Vec<String> {
    let nested: Vec<Span> = class.children.iter().filter(|c| c.kind.is_type()).map(|c| c.span).collect();
    let text = tree.slice(class.span);
    let Ok(lexed) = lex(&tree.path, text) else { return Vec::new() };
    lexed
        .tokens
        .iter()
        .filter(|t| t.kind == TokKind::Ident)
        .filter(|t| {
            let abs = Span::new(t.span.start + class.span.start, t.span.end + class.span.start);
            !nested.iter().any(|n| n.contains(abs))
        })
        .flat_map(|t| identifier_terms(&text[t.span.range()]))
        .collect()
}

/// Rank code terms over every class and interface of the project.
pub fn rank_terms(index: &ProjectIndex) -> Vec<TermScore> {
    let mut docs = Vec::new();
    for tree in index.trees().values() {
        for node in tree.walk().filter(|n| n.kind.is_type()) {
            docs.push(class_terms(tree, node));
        }
    }
    rank_documents(&docs)
}

/// Phrases first, in description order, then code terms with a positive
/// score whose word is not already part of a phrase. Names are CamelCase
/// and unique; the list is cut at `k`.
pub fn recommend_features(description: &str, lexicon: &PosLexicon, terms: &[TermScore], k: usize) -> Vec<String> {
    let phrases = extract_phrases(description, lexicon);
    let covered: BTreeSet<&str> = phrases.iter().flat_map(|p| p.words.iter().map(String::as_str)).collect();
    let mut seen = HashSet::new();
    let candidates = phrases
        .iter()
        .map(Phrase::camel_case)
        .chain(terms.iter().filter(|t| t.score > 0.0 && !covered.contains(t.term.as_str())).map(|t| capitalize(&t.term)));
    let mut out = Vec::new();
    for name in candidates {
        if out.len() >= k {
            break;
        }
        if is_feature_name(&name) && seen.insert(name.to_lowercase()) {
            out.push(name);
        }
    }
    out
}
