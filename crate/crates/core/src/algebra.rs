//! Graph patterns, FILTER conditions and their fully parenthesized syntax.
//!
//! ```text
//! pattern := triple | "(" pattern ("AND"|"OPT"|"UNION") pattern ")"
//!          | "(" pattern "FILTER" cond ")"
//! triple  := "(" termv termv termv ")"
//! termv   := bare-token | quoted-literal | "?"name
//! cond    := "bound" "(" var ")" | var "=" (term|var)
//!          | "(" "!" cond ")" | "(" cond ("||"|"&&") cond ")" | "(" cond ")"
//! ```
//!
//! The parser mirrors the parenthesization exactly and never reassociates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::deep;
use crate::rdf::Term;
use crate::syntax::{self, ParseError, ParseErrorKind, Spanned, Token};

/// A query variable, written `?name`. The stored name excludes the `?`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(Arc<str>);

impl Variable {
    /// # Panics
    /// If `name` is empty.
    pub fn new(name: impl Into<Arc<str>>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "variable name must be non-empty");
        Variable(name)
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

/// One position of a triple pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermPattern {
    Term(Term),
    Var(Variable),
}

impl TermPattern {
    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            TermPattern::Var(v) => Some(v),
            TermPattern::Term(_) => None,
        }
    }
}

impl From<Term> for TermPattern {
    fn from(t: Term) -> Self {
        TermPattern::Term(t)
    }
}

impl From<Variable> for TermPattern {
    fn from(v: Variable) -> Self {
        TermPattern::Var(v)
    }
}

impl fmt::Display for TermPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermPattern::Term(t) => t.fmt(f),
            TermPattern::Var(v) => v.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TriplePatternError {
    #[error("literal in subject position")]
    LiteralSubject,
    #[error("literal in predicate position")]
    LiteralPredicate,
}

/// A triple whose positions may be variables. Subject and predicate are
/// variables or IRIs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    subject: TermPattern,
    predicate: TermPattern,
    object: TermPattern,
}

impl TriplePattern {
    pub fn new(
        subject: impl Into<TermPattern>,
        predicate: impl Into<TermPattern>,
        object: impl Into<TermPattern>,
    ) -> Result<Self, TriplePatternError> {
        let (subject, predicate, object) = (subject.into(), predicate.into(), object.into());
        if matches!(&subject, TermPattern::Term(t) if !t.is_iri()) {
            return Err(TriplePatternError::LiteralSubject);
        }
        if matches!(&predicate, TermPattern::Term(t) if !t.is_iri()) {
            return Err(TriplePatternError::LiteralPredicate);
        }
        Ok(TriplePattern {
            subject,
            predicate,
            object,
        })
    }

    pub fn subject(&self) -> &TermPattern {
        &self.subject
    }

    pub fn predicate(&self) -> &TermPattern {
        &self.predicate
    }

    pub fn object(&self) -> &TermPattern {
        &self.object
    }

    pub fn positions(&self) -> [&TermPattern; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn variables(&self) -> BTreeSet<Variable> {
        self.positions()
            .into_iter()
            .filter_map(|p| p.as_var().cloned())
            .collect()
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.subject, self.predicate, self.object)
    }
}

/// A FILTER built-in condition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Bound(Variable),
    EqConst(Variable, Term),
    EqVar(Variable, Variable),
    Not(Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    And(Box<Condition>, Box<Condition>),
}

    #[allow(clippy::should_implement_trait)]
impl Condition {
    pub fn not(c: Condition) -> Self {
        Condition::Not(Box::new(c))
    }

    pub fn or(a: Condition, b: Condition) -> Self {
        Condition::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Condition, b: Condition) -> Self {
        Condition::And(Box::new(a), Box::new(b))
    }

    pub fn variables(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<Variable>) {
        let mut stack = vec![self];
        while let Some(c) = stack.pop() {
            match c {
                Condition::Bound(v) | Condition::EqConst(v, _) => {
                    out.insert(v.clone());
                }
                Condition::EqVar(a, b) => {
                    out.insert(a.clone());
                    out.insert(b.clone());
                }
                Condition::Not(inner) => stack.push(inner),
                Condition::Or(a, b) | Condition::And(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
            }
        }
    }

    /// Number of variable occurrences, counting repeats.
    pub(crate) fn count_occurrences(&self, counts: &mut BTreeMap<Variable, usize>) {
        let mut stack = vec![self];
        while let Some(c) = stack.pop() {
            match c {
                Condition::Bound(v) | Condition::EqConst(v, _) => {
                    *counts.entry(v.clone()).or_default() += 1;
                }
                Condition::EqVar(a, b) => {
                    *counts.entry(a.clone()).or_default() += 1;
                    *counts.entry(b.clone()).or_default() += 1;
                }
                Condition::Not(inner) => stack.push(inner),
                Condition::Or(a, b) | Condition::And(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let tokens = syntax::tokenize(text, 1)?;
        let mut parser = Parser::new(&tokens);
        let cond = parser.condition()?;
        parser.finish()?;
        Ok(cond)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        deep(|| match self {
            Condition::Bound(v) => write!(f, "bound({v})"),
            Condition::EqConst(v, c) => write!(f, "{v} = {c}"),
            Condition::EqVar(a, b) => write!(f, "{a} = {b}"),
            Condition::Not(c) => write!(f, "(! {c})"),
            Condition::Or(a, b) => write!(f, "({a} || {b})"),
            Condition::And(a, b) => write!(f, "({a} && {b})"),
        })
    }
}

/// A graph pattern expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GraphPattern {
    Triple(TriplePattern),
    And(Box<GraphPattern>, Box<GraphPattern>),
    Opt(Box<GraphPattern>, Box<GraphPattern>),
    Union(Box<GraphPattern>, Box<GraphPattern>),
    Filter(Box<GraphPattern>, Condition),
}

/// Binary operator of a compound pattern node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    And,
    Opt,
    Union,
}

impl BinaryOp {
    pub fn keyword(self) -> &'static str {
        match self {
            BinaryOp::And => "AND",
            BinaryOp::Opt => "OPT",
            BinaryOp::Union => "UNION",
        }
    }
}

impl GraphPattern {
    pub fn and(a: GraphPattern, b: GraphPattern) -> Self {
        GraphPattern::And(Box::new(a), Box::new(b))
    }

    pub fn opt(a: GraphPattern, b: GraphPattern) -> Self {
        GraphPattern::Opt(Box::new(a), Box::new(b))
    }

    pub fn union(a: GraphPattern, b: GraphPattern) -> Self {
        GraphPattern::Union(Box::new(a), Box::new(b))
    }

    pub fn filter(p: GraphPattern, cond: Condition) -> Self {
        GraphPattern::Filter(Box::new(p), cond)
    }

    pub fn binary(op: BinaryOp, a: GraphPattern, b: GraphPattern) -> Self {
        match op {
            BinaryOp::And => Self::and(a, b),
            BinaryOp::Opt => Self::opt(a, b),
            BinaryOp::Union => Self::union(a, b),
        }
    }

    /// Folds `parts` left-deep with `op`: `((p1 op p2) op p3) …`.
    /// Returns `None` for an empty iterator.
    pub fn fold(op: BinaryOp, parts: impl IntoIterator<Item = GraphPattern>) -> Option<Self> {
        parts.into_iter().reduce(|acc, p| Self::binary(op, acc, p))
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        parse_pattern(text)
    }

    /// Direct children, left to right.
    pub fn children(&self) -> Vec<&GraphPattern> {
        match self {
            GraphPattern::Triple(_) => vec![],
            GraphPattern::And(a, b) | GraphPattern::Opt(a, b) | GraphPattern::Union(a, b) => {
                vec![a, b]
            }
            GraphPattern::Filter(p, _) => vec![p],
        }
    }

    /// Pre-order traversal without recursion.
    pub fn nodes(&self) -> impl Iterator<Item = &GraphPattern> + '_ {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            match node {
                GraphPattern::Triple(_) => {}
                GraphPattern::And(a, b) | GraphPattern::Opt(a, b) | GraphPattern::Union(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                GraphPattern::Filter(p, _) => stack.push(p),
            }
            Some(node)
        })
    }

    /// Triple pattern leaves, left to right.
    pub fn triple_patterns(&self) -> impl Iterator<Item = &TriplePattern> + '_ {
        self.nodes().filter_map(|n| match n {
            GraphPattern::Triple(t) => Some(t),
            _ => None,
        })
    }

    /// Number of nodes in the parse tree.
    pub fn size(&self) -> usize {
        self.nodes().count()
    }

    /// Height of the parse tree; a lone triple pattern has depth 1.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self, 1usize)];
        while let Some((node, d)) = stack.pop() {
            best = best.max(d);
            for c in node.children() {
                stack.push((c, d + 1));
            }
        }
        best
    }

    /// All variables, including those appearing only in FILTER conditions.
    pub fn variables(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        for node in self.nodes() {
            match node {
                GraphPattern::Triple(t) => {
                    out.extend(t.positions().into_iter().filter_map(|p| p.as_var().cloned()))
                }
                GraphPattern::Filter(_, c) => c.collect_variables(&mut out),
                _ => {}
            }
        }
        out
    }

    /// Variables occurring in triple patterns only.
    pub fn triple_variables(&self) -> BTreeSet<Variable> {
        self.triple_patterns().flat_map(|t| t.variables()).collect()
    }

    /// Occurrence counts of each variable in triples and conditions.
    pub fn variable_occurrences(&self) -> BTreeMap<Variable, usize> {
        let mut counts = BTreeMap::new();
        for node in self.nodes() {
            match node {
                GraphPattern::Triple(t) => {
                    for v in t.positions().into_iter().filter_map(|p| p.as_var()) {
                        *counts.entry(v.clone()).or_default() += 1;
                    }
                }
                GraphPattern::Filter(_, c) => c.count_occurrences(&mut counts),
                _ => {}
            }
        }
        counts
    }

    pub fn is_union_free(&self) -> bool {
        is_union_free(self)
    }

    pub fn is_filter_free(&self) -> bool {
        !self.nodes().any(|n| matches!(n, GraphPattern::Filter(..)))
    }

    pub fn is_opt_free(&self) -> bool {
        !self.nodes().any(|n| matches!(n, GraphPattern::Opt(..)))
    }

    /// Built from triple patterns with AND and FILTER only.
    pub fn is_and_filter_only(&self) -> bool {
        self.nodes().all(|n| {
            matches!(
                n,
                GraphPattern::Triple(_) | GraphPattern::And(..) | GraphPattern::Filter(..)
            )
        })
    }

    /// A conjunction of triple patterns: triples joined by AND only.
    pub fn is_triple_conjunction(&self) -> bool {
        self.nodes()
            .all(|n| matches!(n, GraphPattern::Triple(_) | GraphPattern::And(..)))
    }

    /// The sub-pattern at `path`, if the path is valid.
    pub fn at(&self, path: &PatternPath) -> Option<&GraphPattern> {
        let mut node = self;
        for step in &path.0 {
            node = match (step, node) {
                (Step::Left, GraphPattern::And(a, _))
                | (Step::Left, GraphPattern::Opt(a, _))
                | (Step::Left, GraphPattern::Union(a, _)) => a,
                (Step::Right, GraphPattern::And(_, b))
                | (Step::Right, GraphPattern::Opt(_, b))
                | (Step::Right, GraphPattern::Union(_, b)) => b,
                (Step::Inner, GraphPattern::Filter(p, _)) => p,
                _ => return None,
            };
        }
        Some(node)
    }

    /// Pre-order traversal yielding each node together with its path.
    pub fn nodes_with_paths(&self) -> Vec<(PatternPath, &GraphPattern)> {
        let mut out = Vec::new();
        let mut stack = vec![(PatternPath::root(), self)];
        while let Some((path, node)) = stack.pop() {
            match node {
                GraphPattern::Triple(_) => {}
                GraphPattern::And(a, b) | GraphPattern::Opt(a, b) | GraphPattern::Union(a, b) => {
                    stack.push((path.child(Step::Right), b));
                    stack.push((path.child(Step::Left), a));
                }
                GraphPattern::Filter(p, _) => stack.push((path.child(Step::Inner), p)),
            }
            out.push((path, node));
        }
        out
    }

    /// Replaces the sub-pattern at `path`, returning `None` for a bad path.
    pub fn replace_at(&self, path: &PatternPath, replacement: GraphPattern) -> Option<Self> {
        fn go(node: &GraphPattern, steps: &[Step], repl: GraphPattern) -> Option<GraphPattern> {
            let Some((first, rest)) = steps.split_first() else {
                return Some(repl);
            };
            deep(|| {
                Some(match (first, node) {
                    (Step::Left, GraphPattern::And(a, b)) => GraphPattern::and(go(a, rest, repl)?, (**b).clone()),
                    (Step::Left, GraphPattern::Opt(a, b)) => GraphPattern::opt(go(a, rest, repl)?, (**b).clone()),
                    (Step::Left, GraphPattern::Union(a, b)) => GraphPattern::union(go(a, rest, repl)?, (**b).clone()),
                    (Step::Right, GraphPattern::And(a, b)) => GraphPattern::and((**a).clone(), go(b, rest, repl)?),
                    (Step::Right, GraphPattern::Opt(a, b)) => GraphPattern::opt((**a).clone(), go(b, rest, repl)?),
                    (Step::Right, GraphPattern::Union(a, b)) => GraphPattern::union((**a).clone(), go(b, rest, repl)?),
                    (Step::Inner, GraphPattern::Filter(p, c)) => GraphPattern::filter(go(p, rest, repl)?, c.clone()),
                    _ => return None,
                })
            })
        }
        go(self, &path.0, replacement)
    }
}

impl From<TriplePattern> for GraphPattern {
    fn from(t: TriplePattern) -> Self {
        GraphPattern::Triple(t)
    }
}

impl fmt::Display for GraphPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        deep(|| match self {
            GraphPattern::Triple(t) => t.fmt(f),
            GraphPattern::And(a, b) => write!(f, "({a} AND {b})"),
            GraphPattern::Opt(a, b) => write!(f, "({a} OPT {b})"),
            GraphPattern::Union(a, b) => write!(f, "({a} UNION {b})"),
            GraphPattern::Filter(p, c) => write!(f, "({p} FILTER {c})"),
        })
    }
}

/// One edge from a compound node to a child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    Left,
    Right,
    /// The pattern under a FILTER.
    Inner,
}

/// Location of a sub-pattern occurrence, as a sequence of steps from the
/// root. Displays as `root`, `root.left.right`, and so on.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternPath(pub Vec<Step>);

impl PatternPath {
    pub fn root() -> Self {
        PatternPath(Vec::new())
    }

    pub fn child(&self, step: Step) -> Self {
        let mut steps = self.0.clone();
        steps.push(step);
        PatternPath(steps)
    }

    pub fn is_prefix_of(&self, other: &PatternPath) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for PatternPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("root")?;
        for s in &self.0 {
            f.write_str(match s {
                Step::Left => ".left",
                Step::Right => ".right",
                Step::Inner => ".inner",
            })?;
        }
        Ok(())
    }
}

pub fn vars_of_pattern(p: &GraphPattern) -> BTreeSet<Variable> {
    p.variables()
}

pub fn vars_of_condition(c: &Condition) -> BTreeSet<Variable> {
    c.variables()
}

pub fn is_union_free(p: &GraphPattern) -> bool {
    !p.nodes().any(|n| matches!(n, GraphPattern::Union(..)))
}

/// A FILTER node whose condition mentions variables its pattern lacks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeViolation {
    pub path: PatternPath,
    pub condition: Condition,
    pub out_of_scope: BTreeSet<Variable>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScopeReport {
    pub violations: Vec<ScopeViolation>,
}

impl ScopeReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ScopeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return writeln!(f, "filter scope: ok");
        }
        writeln!(f, "filter scope: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            let vars: Vec<String> = v.out_of_scope.iter().map(|x| x.to_string()).collect();
            writeln!(
                f,
                "  at {}: condition {} uses {} outside its pattern",
                v.path,
                v.condition,
                vars.join(", ")
            )?;
        }
        Ok(())
    }
}

/// Checks `var(R) ⊆ var(P)` at every `(P FILTER R)` node.
pub fn validate_filter_scope(p: &GraphPattern) -> ScopeReport {
    let mut report = ScopeReport::default();
    for (path, node) in p.nodes_with_paths() {
        if let GraphPattern::Filter(inner, cond) = node {
            let scope = inner.variables();
            let out: BTreeSet<Variable> = cond.variables().difference(&scope).cloned().collect();
            if !out.is_empty() {
                report.violations.push(ScopeViolation {
                    path,
                    condition: cond.clone(),
                    out_of_scope: out,
                });
            }
        }
    }
    report
}

pub fn parse_pattern(text: &str) -> Result<GraphPattern, ParseError> {
    let tokens = syntax::tokenize(text, 1)?;
    let mut parser = Parser::new(&tokens);
    let pattern = parser.pattern()?;
    parser.finish()?;
    Ok(pattern)
}

struct Parser<'a> {
    tokens: &'a [Spanned],
    pos: usize,
}

fn keyword(token: &Token) -> Option<&'static str> {
    match token {
        Token::Bare(s) => ["AND", "OPT", "UNION", "FILTER"]
            .into_iter()
            .find(|k| k == s),
        _ => None,
    }
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [Spanned]) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn peek(&self) -> Option<&'a Spanned> {
        self.tokens.get(self.pos)
    }

    fn peek_token(&self) -> Option<&'a Token> {
        self.peek().map(|s| &s.token)
    }

    fn next(&mut self) -> Option<&'a Spanned> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn error_here(&self, kind: ParseErrorKind) -> ParseError {
        match self.peek().or(self.tokens.last()) {
            Some(s) => ParseError {
                line: s.line,
                column: s.column,
                kind,
            },
            None => ParseError {
                line: 1,
                column: 1,
                kind,
            },
        }
    }

    fn expected(&self, what: &str) -> ParseError {
        let found = match self.peek() {
            Some(s) => s.token.to_string(),
            None => "end of input".to_string(),
        };
        self.error_here(ParseErrorKind::Expected {
            expected: what.to_string(),
            found,
        })
    }

    fn expect(&mut self, token: Token, what: &str) -> Result<(), ParseError> {
        if self.peek_token() == Some(&token) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.expected(what))
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek_token() {
            None => Ok(()),
            Some(t) => match keyword(t) {
                Some(k) => Err(self.error_here(ParseErrorKind::Unparenthesized(k.to_string()))),
                None => Err(self.expected("end of input")),
            },
        }
    }

    fn pattern(&mut self) -> Result<GraphPattern, ParseError> {
        deep(|| {
            self.expect(Token::LParen, "'('")?;
            if self.peek_token() == Some(&Token::LParen) {
                let left = self.pattern()?;
                let op = match self.peek_token().and_then(keyword) {
                    Some(k) => k,
                    None => return Err(self.expected("AND, OPT, UNION or FILTER")),
                };
                self.pos += 1;
                let node = match op {
                    "FILTER" => GraphPattern::filter(left, self.condition()?),
                    "AND" => GraphPattern::and(left, self.pattern()?),
                    "OPT" => GraphPattern::opt(left, self.pattern()?),
                    _ => GraphPattern::union(left, self.pattern()?),
                };
                if let Some(k) = self.peek_token().and_then(keyword) {
                    return Err(self.error_here(ParseErrorKind::Unparenthesized(k.to_string())));
                }
                self.expect(Token::RParen, "')'")?;
                Ok(node)
            } else {
                let s = self.term_or_var("subject")?;
                let p = self.term_or_var("predicate")?;
                let o = self.term_or_var("object")?;
                self.expect(Token::RParen, "')' closing the triple pattern")?;
                Ok(GraphPattern::Triple(TriplePattern {
                    subject: s,
                    predicate: p,
                    object: o,
                }))
            }
        })
    }

    fn term_or_var(&mut self, position: &'static str) -> Result<TermPattern, ParseError> {
        let Some(spanned) = self.peek() else {
            return Err(self.expected("a term or variable"));
        };
        let tp = match &spanned.token {
            Token::Bare(s) => TermPattern::Term(Term::iri(s.as_str())),
            Token::Var(v) => TermPattern::Var(Variable::new(v.as_str())),
            Token::Literal(s) => {
                if position != "object" {
                    return Err(self.error_here(ParseErrorKind::LiteralPosition(position)));
                }
                TermPattern::Term(Term::literal(s.as_str()))
            }
            _ => return Err(self.expected("a term or variable")),
        };
        self.pos += 1;
        Ok(tp)
    }

    fn variable(&mut self) -> Result<Variable, ParseError> {
        match self.peek_token() {
            Some(Token::Var(v)) => {
                self.pos += 1;
                Ok(Variable::new(v.as_str()))
            }
            _ => Err(self.expected("a variable")),
        }
    }

    fn condition(&mut self) -> Result<Condition, ParseError> {
        deep(|| match self.peek_token() {
            Some(Token::Bare(b)) if b == "bound" => {
                self.pos += 1;
                self.expect(Token::LParen, "'(' after bound")?;
                let v = self.variable()?;
                self.expect(Token::RParen, "')'")?;
                Ok(Condition::Bound(v))
            }
            Some(Token::Var(_)) => {
                let v = self.variable()?;
                self.expect(Token::Eq, "'='")?;
                match self.next().map(|s| &s.token) {
                    Some(Token::Var(w)) => Ok(Condition::EqVar(v, Variable::new(w.as_str()))),
                    Some(Token::Bare(c)) => Ok(Condition::EqConst(v, Term::iri(c.as_str()))),
                    Some(Token::Literal(c)) => {
                        Ok(Condition::EqConst(v, Term::literal(c.as_str())))
                    }
                    _ => {
                        self.pos -= 1;
                        Err(self.expected("a term or variable after '='"))
                    }
                }
            }
            Some(Token::LParen) => {
                self.pos += 1;
                if self.peek_token() == Some(&Token::Bang) {
                    self.pos += 1;
                    let inner = self.condition()?;
                    self.expect(Token::RParen, "')'")?;
                    return Ok(Condition::not(inner));
                }
                let left = self.condition()?;
                let node = match self.peek_token() {
                    Some(Token::OrOr) => {
                        self.pos += 1;
                        Condition::or(left, self.condition()?)
                    }
                    Some(Token::AndAnd) => {
                        self.pos += 1;
                        Condition::and(left, self.condition()?)
                    }
                    _ => left,
                };
                if matches!(self.peek_token(), Some(Token::OrOr | Token::AndAnd)) {
                    let op = if self.peek_token() == Some(&Token::OrOr) { "||" } else { "&&" };
                    return Err(self.error_here(ParseErrorKind::Unparenthesized(op.to_string())));
                }
                self.expect(Token::RParen, "')'")?;
                Ok(node)
            }
            _ => Err(self.expected("a condition")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: &str) -> Variable {
        Variable::new(n)
    }

    fn vars(names: &[&str]) -> BTreeSet<Variable> {
        names.iter().map(|n| var(n)).collect()
    }

    fn tp(s: &str) -> GraphPattern {
        parse_pattern(s).unwrap()
    }

    #[test]
    fn parses_opt_of_two_triples() {
        let p = tp("((?A email ?E) OPT (?A webPage ?W))");
        let expected = GraphPattern::opt(
            TriplePattern::new(var("A"), Term::iri("email"), var("E")).unwrap().into(),
            TriplePattern::new(var("A"), Term::iri("webPage"), var("W")).unwrap().into(),
        );
        assert_eq!(p, expected);
    }

    #[test]
    fn parses_single_triple() {
        assert!(matches!(tp("(?X p ?Y)"), GraphPattern::Triple(_)));
    }

    #[test]
    fn parenthesized_bound_parses_but_is_out_of_scope() {
        let p = tp("((?X p ?Y) FILTER (bound(?Z)))");
        let report = validate_filter_scope(&p);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].out_of_scope, vars(&["Z"]));
        assert_eq!(report.violations[0].path, PatternPath::root());
    }

    #[test]
    fn keeps_parenthesization() {
        let a = tp("(((?A name ?N) OPT (?A email ?E)) OPT (?A webPage ?W))");
        let b = tp("((?A name ?N) OPT ((?A email ?E) OPT (?A webPage ?W)))");
        assert_ne!(a, b);
    }

    #[test]
    fn rejects_unparenthesized_operators() {
        let e = parse_pattern("((?X p ?Y) AND (?Y q ?Z) AND (?Z r ?W))").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unparenthesized("AND".into()));
        let e = parse_pattern("(?X p ?Y) UNION (?Y q ?Z)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unparenthesized("UNION".into()));
        assert_eq!((e.line, e.column), (1, 11));
        let e = parse_pattern("((?X p ?Y) FILTER (bound(?X) || bound(?Y) || bound(?X)))").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unparenthesized("||".into()));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_pattern("((?X p ?Y)\n  MINUS (?Y q ?Z))").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        let e = parse_pattern("(?X p)").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Expected { .. }));
        let e = parse_pattern("(\"lit\" p ?o)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::LiteralPosition("subject"));
        let e = parse_pattern("(?s \"lit\" ?o)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::LiteralPosition("predicate"));
    }

    #[test]
    fn literal_objects_and_conditions() {
        let p = tp("(((?A name ?N) OPT (?A phone ?P)) FILTER ?P = \"777-3426\")");
        let GraphPattern::Filter(_, c) = &p else { panic!() };
        assert_eq!(*c, Condition::EqConst(var("P"), Term::literal("777-3426")));
        assert_eq!(vars_of_condition(c), vars(&["P"]));
        assert!(validate_filter_scope(&p).is_ok());
    }

    #[test]
    fn variables_of_patterns() {
        let p1 = tp("((?A email ?E) OPT (?A webPage ?W))");
        assert_eq!(vars_of_pattern(&p1), vars(&["A", "E", "W"]));
        assert!(vars_of_pattern(&tp("(a b c)")).is_empty());
        assert_eq!(
            vars_of_pattern(&tp("((?X p ?Y) FILTER ?X = c)")),
            vars(&["X", "Y"])
        );
    }

    #[test]
    fn variables_of_conditions() {
        assert_eq!(vars_of_condition(&Condition::parse("bound(?X)").unwrap()), vars(&["X"]));
        let c = Condition::parse("(?X = ?Y || (! bound(?Z)))").unwrap();
        assert_eq!(vars_of_condition(&c), vars(&["X", "Y", "Z"]));
    }

    #[test]
    fn scope_violations_are_listed() {
        let p = tp("((?X p ?Y) FILTER ?A = ?B)");
        let report = validate_filter_scope(&p);
        assert_eq!(report.violations[0].out_of_scope, vars(&["A", "B"]));
        assert!(validate_filter_scope(&tp("(a b c)")).is_ok());
        let nested = tp("(((?X p ?Y) FILTER bound(?Q)) AND ((?Z p ?W) FILTER bound(?X)))");
        let r = validate_filter_scope(&nested);
        assert_eq!(r.violations.len(), 2);
        assert_eq!(r.violations[0].path.to_string(), "root.left");
        assert_eq!(r.violations[1].path.to_string(), "root.right");
    }

    #[test]
    fn union_freeness() {
        let p4 = tp("((?A name ?N) AND ((?A email ?E) UNION (?A webPage ?W)))");
        assert!(!is_union_free(&p4));
        assert!(is_union_free(&tp("((?A email ?E) OPT (?A webPage ?W))")));
        assert!(is_union_free(&tp("(?X p ?Y)")));
    }

    #[test]
    fn display_round_trips_examples() {
        for s in [
            "((?A name ?N) AND ((?A email ?E) UNION (?A webPage ?W)))",
            "(((?A name ?N) OPT (?A phone ?P)) FILTER ?P = \"777-3426\")",
            "((?X p ?Y) FILTER ((! bound(?X)) || (?X = ?Y && ?Y = a)))",
        ] {
            assert_eq!(tp(s).to_string(), s);
        }
    }

    #[test]
    fn iri_named_like_a_keyword_is_a_term() {
        let p = tp("(AND FILTER UNION)");
        assert_eq!(p.to_string(), "(AND FILTER UNION)");
    }

    #[test]
    fn paths_and_replacement() {
        let p = tp("((?X p ?Y) AND ((?Y q ?Z) OPT (?Z r ?W)))");
        let path = PatternPath::root().child(Step::Right).child(Step::Left);
        assert_eq!(p.at(&path).unwrap().to_string(), "(?Y q ?Z)");
        let r = p.replace_at(&path, tp("(a b c)")).unwrap();
        assert_eq!(r.to_string(), "((?X p ?Y) AND ((a b c) OPT (?Z r ?W)))");
        assert!(p.at(&PatternPath::root().child(Step::Inner)).is_none());
    }

    #[test]
    fn deep_nesting_parses_and_prints() {
        let depth = 10_000;
        let mut text = String::new();
        for _ in 0..depth {
            text.push('(');
        }
        text.push_str("(?X p ?Y)");
        for _ in 0..depth {
            text.push_str(" AND (?X q ?Z))");
        }
        let p = parse_pattern(&text).unwrap();
        assert_eq!(p.depth(), depth + 1);
        assert_eq!(p.to_string(), text);
    }
}
