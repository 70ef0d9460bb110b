//! Ground RDF terms, triples and datasets.
//!
//! Blank nodes are not modelled: identifiers such as `B1` are plain IRIs.
//! A dataset file holds one triple per line, three whitespace-separated
//! fields, where a bare token (`[A-Za-z0-9_.:/@#-]+`) is an IRI and a
//! double-quoted token is a literal. Blank lines and lines starting with `#`
//! are ignored.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::syntax::{self, ParseError, ParseErrorKind, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermKind {
    Iri,
    Literal,
}

/// An IRI or literal constant.
///
/// Ordering is by text first, then kind, so datasets and mapping tables sort
/// by the text a reader sees.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    kind: TermKind,
    text: Arc<str>,
}

impl Term {
    /// # Panics
    /// If `text` is empty.
    pub fn iri(text: impl Into<Arc<str>>) -> Self {
        Self::new(TermKind::Iri, text)
    }

    /// # Panics
    /// If `text` is empty.
    pub fn literal(text: impl Into<Arc<str>>) -> Self {
        Self::new(TermKind::Literal, text)
    }

    pub fn new(kind: TermKind, text: impl Into<Arc<str>>) -> Self {
        let text = text.into();
        assert!(!text.is_empty(), "term text must be non-empty");
        Term { kind, text }
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_iri(&self) -> bool {
        self.kind == TermKind::Iri
    }

    /// Whether the text can be written back in the line format and reparsed.
    pub fn is_serializable(&self) -> bool {
        match self.kind {
            TermKind::Iri => syntax::is_bare_token(&self.text),
            TermKind::Literal => syntax::is_literal_text(&self.text),
        }
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        self.text
            .cmp(&other.text)
            .then_with(|| self.kind.cmp(&other.kind))
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TermKind::Iri => f.write_str(&self.text),
            TermKind::Literal => write!(f, "\"{}\"", self.text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TripleError {
    #[error("subject must be an IRI")]
    LiteralSubject,
    #[error("predicate must be an IRI")]
    LiteralPredicate,
}

/// A ground triple. Subject and predicate are always IRIs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    subject: Term,
    predicate: Term,
    object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, TripleError> {
        if !subject.is_iri() {
            return Err(TripleError::LiteralSubject);
        }
        if !predicate.is_iri() {
            return Err(TripleError::LiteralPredicate);
        }
        Ok(Triple {
            subject,
            predicate,
            object,
        })
    }

    pub fn subject(&self) -> &Term {
        &self.subject
    }

    pub fn predicate(&self) -> &Term {
        &self.predicate
    }

    pub fn object(&self) -> &Term {
        &self.object
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.subject, &self.predicate, &self.object]
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// A finite set of ground triples, iterated in sorted order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Dataset {
    triples: BTreeSet<Triple>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` if the triple was not already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        self.triples.insert(triple)
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    /// Parses the line format described at module level.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_dataset(text)
    }

    /// Renders the dataset in the line format, one sorted triple per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(&t.to_string());
            out.push('\n');
        }
        out
    }
}

impl FromIterator<Triple> for Dataset {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        Dataset {
            triples: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Triple;
    type IntoIter = std::collections::btree_set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

/// Membership test `t ∈ D`.
pub fn dataset_contains(dataset: &Dataset, triple: &Triple) -> bool {
    dataset.contains(triple)
}

pub fn parse_dataset(text: &str) -> Result<Dataset, ParseError> {
    let mut dataset = Dataset::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens = syntax::tokenize(raw, line_no)?;
        if tokens.len() != 3 {
            return Err(ParseError {
                line: line_no,
                column: 1,
                kind: ParseErrorKind::FieldCount(tokens.len()),
            });
        }
        let mut terms = Vec::with_capacity(3);
        for spanned in &tokens {
            let err = |kind| ParseError {
                line: spanned.line,
                column: spanned.column,
                kind,
            };
            let term = match &spanned.token {
                Token::Bare(s) => Term::iri(s.as_str()),
                Token::Literal(s) => Term::literal(s.as_str()),
                Token::Var(_) => return Err(err(ParseErrorKind::VariableInData)),
                other => {
                    return Err(err(ParseErrorKind::Expected {
                        expected: "a term".into(),
                        found: other.to_string(),
                    }))
                }
            };
            terms.push(term);
        }
        let object = terms.pop().unwrap();
        let predicate = terms.pop().unwrap();
        let subject = terms.pop().unwrap();
        let triple = Triple::new(subject, predicate, object).map_err(|e| {
            let (pos, at) = match e {
                TripleError::LiteralSubject => ("subject", &tokens[0]),
                TripleError::LiteralPredicate => ("predicate", &tokens[1]),
            };
            ParseError {
                line: at.line,
                column: at.column,
                kind: ParseErrorKind::LiteralPosition(pos),
            }
        })?;
        dataset.insert(triple);
    }
    Ok(dataset)
}
