//! OPT normal form of well-designed, UNION- and FILTER-free patterns.
//!
//! The single rule `(X AND (Y OPT Z)) → ((X AND Y) OPT Z)` is applied
//! modulo associativity and commutativity of AND. Terms are kept with AND
//! flattened into n-ary nodes, so a redex is an AND node with an OPT
//! operand, and the rule becomes
//! `AND(S, OPT(Y, Z)) → OPT(AND(S, Y), Z)` with `Y` spliced when it is
//! itself an AND.
//!
//! Termination measure: for every OPT node, count the maximal AND regions
//! above it, and sum. Each rule application lowers it by at least one and
//! it is zero exactly on normal forms.

use std::fmt;

use crate::algebra::{BinaryOp, GraphPattern, TriplePattern};
use crate::deep;

use super::{is_well_designed, RewriteError};

/// `(((t1 AND … AND tk) OPT O1) … OPT On)` with each `Oj` of the same form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OptNormalForm {
    /// Sorted by serialization; never empty.
    pub mandatory: Vec<TriplePattern>,
    /// In left-to-right extraction order.
    pub optionals: Vec<OptNormalForm>,
}

impl OptNormalForm {
    pub fn to_pattern(&self) -> GraphPattern {
        deep(|| {
            let block = GraphPattern::fold(
                BinaryOp::And,
                self.mandatory.iter().cloned().map(GraphPattern::Triple),
            )
            .expect("mandatory block is never empty");
            self.optionals
                .iter()
                .fold(block, |acc, o| GraphPattern::opt(acc, o.to_pattern()))
        })
    }

    /// Recognizes a pattern already in normal form.
    pub fn from_pattern(p: &GraphPattern) -> Option<Self> {
        deep(|| match p {
            GraphPattern::Opt(l, r) => {
                let mut nf = Self::from_pattern(l)?;
                nf.optionals.push(Self::from_pattern(r)?);
                Some(nf)
            }
            _ if p.is_triple_conjunction() => {
                let mut mandatory: Vec<TriplePattern> = p.triple_patterns().cloned().collect();
                sort_triples(&mut mandatory);
                Some(OptNormalForm {
                    mandatory,
                    optionals: Vec::new(),
                })
            }
            _ => None,
        })
    }

    /// Representative of the class modulo AC of AND and OPT permutation:
    /// optionals sorted recursively.
    pub fn canonical(&self) -> OptNormalForm {
        deep(|| {
            let mut optionals: Vec<OptNormalForm> = self.optionals.iter().map(|o| o.canonical()).collect();
            optionals.sort();
            OptNormalForm {
                mandatory: self.mandatory.clone(),
                optionals,
            }
        })
    }

    pub fn equivalent_modulo_e(&self, other: &OptNormalForm) -> bool {
        self.canonical() == other.canonical()
    }

    /// Checks the structural invariants: non-empty sorted mandatory blocks
    /// at every level.
    pub fn is_shape_valid(&self) -> bool {
        let sorted = self
            .mandatory
            .windows(2)
            .all(|w| w[0].to_string() <= w[1].to_string());
        !self.mandatory.is_empty() && sorted && self.optionals.iter().all(|o| o.is_shape_valid())
    }
}

impl fmt::Display for OptNormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_pattern().fmt(f)
    }
}

fn sort_triples(ts: &mut [TriplePattern]) {
    ts.sort_by_cached_key(|t| t.to_string());
}

/// Which redex to rewrite when several exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// First redex in post-order.
    #[default]
    LeftmostInnermost,
    /// First redex in pre-order.
    LeftmostOutermost,
}

/// Pattern term with AND flattened. `And` has at least two operands, none
/// of which is an `And`.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Term {
    Triple(TriplePattern),
    And(Vec<Term>),
    Opt(Box<Term>, Box<Term>),
}

impl Term {
    /// Caller guarantees a UNION- and FILTER-free pattern.
    fn from_pattern(p: &GraphPattern) -> Term {
        deep(|| match p {
            GraphPattern::Triple(t) => Term::Triple(t.clone()),
            GraphPattern::Opt(a, b) => Term::Opt(Box::new(Self::from_pattern(a)), Box::new(Self::from_pattern(b))),
            GraphPattern::And(a, b) => {
                let mut ops = Vec::new();
                for side in [a, b] {
                    match Self::from_pattern(side) {
                        Term::And(inner) => ops.extend(inner),
                        other => ops.push(other),
                    }
                }
                Term::And(ops)
            }
            GraphPattern::Union(..) | GraphPattern::Filter(..) => {
                unreachable!("checked by the caller")
            }
        })
    }

    fn to_pattern(&self) -> GraphPattern {
        deep(|| match self {
            Term::Triple(t) => GraphPattern::Triple(t.clone()),
            Term::And(ops) => GraphPattern::fold(BinaryOp::And, ops.iter().map(Term::to_pattern))
                .expect("AND has operands"),
            Term::Opt(a, b) => GraphPattern::opt(a.to_pattern(), b.to_pattern()),
        })
    }

    fn children(&self) -> Vec<&Term> {
        match self {
            Term::Triple(_) => vec![],
            Term::And(ops) => ops.iter().collect(),
            Term::Opt(a, b) => vec![a, b],
        }
    }

    fn is_redex(&self) -> bool {
        matches!(self, Term::And(ops) if ops.iter().any(|o| matches!(o, Term::Opt(..))))
    }

    /// Path (child indices) of the redex chosen by `strategy`.
    fn find_redex(&self, strategy: Strategy) -> Option<Vec<usize>> {
        // Explicit stack: (node, path, children already pushed).
        let mut stack = vec![(self, Vec::new(), false)];
        while let Some((node, path, expanded)) = stack.pop() {
            match strategy {
                Strategy::LeftmostOutermost => {
                    if node.is_redex() {
                        return Some(path);
                    }
                    for (i, c) in node.children().into_iter().enumerate().rev() {
                        let mut p = path.clone();
                        p.push(i);
                        stack.push((c, p, false));
                    }
                }
                Strategy::LeftmostInnermost => {
                    if expanded {
                        if node.is_redex() {
                            return Some(path);
                        }
                        continue;
                    }
                    stack.push((node, path.clone(), true));
                    for (i, c) in node.children().into_iter().enumerate().rev() {
                        let mut p = path.clone();
                        p.push(i);
                        stack.push((c, p, false));
                    }
                }
            }
        }
        None
    }

    fn at_mut(&mut self, path: &[usize]) -> &mut Term {
        let mut node = self;
        for &i in path {
            node = match node {
                Term::And(ops) => &mut ops[i],
                Term::Opt(a, b) => {
                    if i == 0 {
                        a
                    } else {
                        b
                    }
                }
                Term::Triple(_) => unreachable!("path leads through compound nodes"),
            };
        }
        node
    }

    /// Applies the rule at the redex `path` using its first OPT operand.
    fn rewrite_at(&mut self, path: &[usize]) {
        let node = self.at_mut(path);
        let Term::And(mut ops) = std::mem::replace(node, Term::And(Vec::new())) else {
            unreachable!("redex is an AND node")
        };
        let i = ops
            .iter()
            .position(|o| matches!(o, Term::Opt(..)))
            .expect("redex has an OPT operand");
        let Term::Opt(y, z) = ops.remove(i) else {
            unreachable!()
        };
        match *y {
            Term::And(inner) => {
                ops.splice(i..i, inner);
            }
            other => ops.insert(i, other),
        }
        *node = Term::Opt(Box::new(Term::And(ops)), z);
    }

    fn measure(&self) -> usize {
        let mut total = 0;
        let mut stack = vec![(self, 0usize)];
        while let Some((node, regions)) = stack.pop() {
            let below = match node {
                Term::Opt(..) => {
                    total += regions;
                    regions
                }
                Term::And(_) => regions + 1,
                Term::Triple(_) => regions,
            };
            for c in node.children() {
                stack.push((c, below));
            }
        }
        total
    }

    /// Caller guarantees measure zero.
    fn extract(&self) -> OptNormalForm {
        deep(|| match self {
            Term::Triple(t) => OptNormalForm {
                mandatory: vec![t.clone()],
                optionals: Vec::new(),
            },
            Term::And(ops) => {
                let mut mandatory: Vec<TriplePattern> = ops
                    .iter()
                    .map(|o| match o {
                        Term::Triple(t) => t.clone(),
                        _ => unreachable!("normal form has only triples under AND"),
                    })
                    .collect();
                sort_triples(&mut mandatory);
                OptNormalForm {
                    mandatory,
                    optionals: Vec::new(),
                }
            }
            Term::Opt(l, r) => {
                let mut nf = l.extract();
                nf.optionals.push(r.extract());
                nf
            }
        })
    }
}

/// The termination measure: for every OPT node, the number of maximal AND
/// regions among its ancestors, summed. A region starts at an AND node
/// whose parent is not an AND.
pub fn opt_in_and_measure(p: &GraphPattern) -> usize {
    let mut total = 0;
    let mut stack = vec![(p, 0usize, false)];
    while let Some((node, regions, parent_is_and)) = stack.pop() {
        let is_and = matches!(node, GraphPattern::And(..));
        if matches!(node, GraphPattern::Opt(..)) {
            total += regions;
        }
        let below = if is_and && !parent_is_and { regions + 1 } else { regions };
        for c in node.children() {
            stack.push((c, below, is_and));
        }
    }
    total
}

fn check_preconditions(p: &GraphPattern) -> Result<(), RewriteError> {
    if !p.is_union_free() {
        return Err(RewriteError::UnionPresent);
    }
    if !p.is_filter_free() {
        return Err(RewriteError::FilterPresent);
    }
    let report = is_well_designed(p)?;
    if !report.is_well_designed {
        return Err(RewriteError::NotWellDesigned(report));
    }
    Ok(())
}

pub fn to_opt_normal_form(p: &GraphPattern) -> Result<OptNormalForm, RewriteError> {
    to_opt_normal_form_with(p, Strategy::default(), &mut |_| {})
}

/// Normalizes with the given strategy, passing each intermediate pattern
/// (after every rule application) to `observe`.
pub fn to_opt_normal_form_with(
    p: &GraphPattern,
    strategy: Strategy,
    observe: &mut dyn FnMut(&GraphPattern),
) -> Result<OptNormalForm, RewriteError> {
    check_preconditions(p)?;
    let mut term = Term::from_pattern(p);
    while let Some(path) = term.find_redex(strategy) {
        term.rewrite_at(&path);
        observe(&term.to_pattern());
    }
    debug_assert_eq!(term.measure(), 0);
    Ok(term.extract())
}
