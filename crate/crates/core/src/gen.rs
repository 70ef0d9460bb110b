//! Random datasets, conditions and patterns for property suites and
//! benchmarks. Everything is drawn from a small vocabulary so that random
//! patterns actually match random data.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::algebra::{Condition, GraphPattern, TermPattern, TriplePattern, Variable};
use crate::rdf::{Dataset, Term, Triple};

pub const IRIS: [&str; 5] = ["a", "b", "c", "d", "e"];
pub const LITERAL: &str = "lit";
pub const VARIABLES: [&str; 4] = ["X", "Y", "Z", "W"];

/// The five IRIs followed by the single literal.
pub fn vocabulary() -> Vec<Term> {
    IRIS.iter()
        .map(|s| Term::iri(*s))
        .chain(std::iter::once(Term::literal(LITERAL)))
        .collect()
}

fn random_iri<R: Rng + ?Sized>(rng: &mut R) -> Term {
    Term::iri(*IRIS.choose(rng).expect("non-empty"))
}

fn random_object<R: Rng + ?Sized>(rng: &mut R) -> Term {
    if rng.gen_ratio(1, 6) {
        Term::literal(LITERAL)
    } else {
        random_iri(rng)
    }
}

/// Up to `max_triples` distinct triples; literals only in object position.
pub fn random_dataset<R: Rng + ?Sized>(rng: &mut R, max_triples: usize) -> Dataset {
    let n = rng.gen_range(0..=max_triples);
    (0..n)
        .map(|_| {
            Triple::new(random_iri(rng), random_iri(rng), random_object(rng))
                .expect("IRI subject and predicate")
        })
        .collect()
}

pub fn default_variables() -> Vec<Variable> {
    VARIABLES.iter().map(|v| Variable::new(*v)).collect()
}

fn position<R: Rng + ?Sized>(rng: &mut R, vars: &[Variable], constant: Term) -> TermPattern {
    if !vars.is_empty() && rng.gen_ratio(3, 4) {
        vars.choose(rng).expect("non-empty").clone().into()
    } else {
        constant.into()
    }
}

pub fn random_triple_pattern<R: Rng + ?Sized>(rng: &mut R, vars: &[Variable]) -> TriplePattern {
    let c = random_iri(rng);
    let s = position(rng, vars, c);
    let c = random_iri(rng);
    let p = if rng.gen_ratio(1, 3) {
        position(rng, vars, c)
    } else {
        c.into()
    };
    let c = random_object(rng);
    let o = position(rng, vars, c);
    TriplePattern::new(s, p, o).expect("IRI subject and predicate")
}

/// A condition of nesting depth at most `depth` over `vars`, which must be
/// non-empty.
pub fn random_condition<R: Rng + ?Sized>(rng: &mut R, vars: &[Variable], depth: usize) -> Condition {
    let pick = |rng: &mut R| vars.choose(rng).expect("non-empty").clone();
    let atom_only = depth == 0 || rng.gen_ratio(1, 2);
    if atom_only {
        return match rng.gen_range(0..3) {
            0 => Condition::Bound(pick(rng)),
            1 => Condition::EqConst(pick(rng), random_object(rng)),
            _ => Condition::EqVar(pick(rng), pick(rng)),
        };
    }
    match rng.gen_range(0..3) {
        0 => Condition::not(random_condition(rng, vars, depth - 1)),
        1 => Condition::or(
            random_condition(rng, vars, depth - 1),
            random_condition(rng, vars, depth - 1),
        ),
        _ => Condition::and(
            random_condition(rng, vars, depth - 1),
            random_condition(rng, vars, depth - 1),
        ),
    }
}

/// Which operators a random pattern may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternShape {
    pub max_depth: usize,
    pub union: bool,
    pub opt: bool,
    pub filter: bool,
}

impl Default for PatternShape {
    fn default() -> Self {
        PatternShape {
            max_depth: 5,
            union: true,
            opt: true,
            filter: true,
        }
    }
}

impl PatternShape {
    pub fn union_free(self) -> Self {
        PatternShape { union: false, ..self }
    }

    pub fn filter_free(self) -> Self {
        PatternShape { filter: false, ..self }
    }
}

/// A random pattern whose FILTER conditions only mention triple variables
/// of the filtered sub-pattern, so it passes scope validation.
pub fn random_pattern<R: Rng + ?Sized>(rng: &mut R, shape: PatternShape) -> GraphPattern {
    let vars = default_variables();
    pattern_rec(rng, shape, shape.max_depth, &vars)
}

fn pattern_rec<R: Rng + ?Sized>(rng: &mut R, shape: PatternShape, depth: usize, vars: &[Variable]) -> GraphPattern {
    if depth == 0 || rng.gen_ratio(1, 3) {
        return random_triple_pattern(rng, vars).into();
    }
    let mut ops = vec![0];
    if shape.opt {
        ops.push(1);
    }
    if shape.union {
        ops.push(2);
    }
    if shape.filter {
        ops.push(3);
    }
    match *ops.choose(rng).expect("non-empty") {
        0 => GraphPattern::and(
            pattern_rec(rng, shape, depth - 1, vars),
            pattern_rec(rng, shape, depth - 1, vars),
        ),
        1 => GraphPattern::opt(
            pattern_rec(rng, shape, depth - 1, vars),
            pattern_rec(rng, shape, depth - 1, vars),
        ),
        2 => GraphPattern::union(
            pattern_rec(rng, shape, depth - 1, vars),
            pattern_rec(rng, shape, depth - 1, vars),
        ),
        _ => {
            let inner = pattern_rec(rng, shape, depth - 1, vars);
            let scope: Vec<Variable> = inner.triple_variables().into_iter().collect();
            if scope.is_empty() {
                inner
            } else {
                let c = random_condition(rng, &scope, 2);
                GraphPattern::filter(inner, c)
            }
        }
    }
}

/// A random UNION-free well-designed pattern. Variables private to an
/// optional side are fresh (`?F0`, `?F1`, ...) and never reused elsewhere;
/// FILTER conditions only use variables that the filtered pattern binds in
/// every solution.
pub fn random_well_designed<R: Rng + ?Sized>(rng: &mut R, max_depth: usize, filter: bool) -> GraphPattern {
    let mut fresh = 0usize;
    let shared: BTreeSet<Variable> = default_variables().into_iter().take(3).collect();
    well_designed_rec(rng, max_depth, &shared, filter, &mut fresh).0
}

/// Returns the pattern and the variables it binds in every solution.
fn well_designed_rec<R: Rng + ?Sized>(
    rng: &mut R,
    depth: usize,
    allowed: &BTreeSet<Variable>,
    filter: bool,
    fresh: &mut usize,
) -> (GraphPattern, BTreeSet<Variable>) {
    if depth == 0 || rng.gen_ratio(1, 3) {
        let mut pool: Vec<Variable> = allowed.iter().cloned().collect();
        if pool.is_empty() || rng.gen_ratio(1, 2) {
            pool.push(Variable::new(format!("F{fresh}")));
            *fresh += 1;
        }
        let t = random_triple_pattern(rng, &pool);
        let vars = t.variables();
        return (t.into(), vars);
    }
    match rng.gen_range(0..if filter { 3 } else { 2 }) {
        0 => {
            let (p1, m1) = well_designed_rec(rng, depth - 1, allowed, filter, fresh);
            let widened: BTreeSet<Variable> = allowed.union(&m1).cloned().collect();
            let (p2, m2) = well_designed_rec(rng, depth - 1, &widened, filter, fresh);
            (GraphPattern::and(p1, p2), m1.union(&m2).cloned().collect())
        }
        1 => {
            let (p1, m1) = well_designed_rec(rng, depth - 1, allowed, filter, fresh);
            let (p2, _) = well_designed_rec(rng, depth - 1, &m1, filter, fresh);
            (GraphPattern::opt(p1, p2), m1)
        }
        _ => {
            let (inner, m) = well_designed_rec(rng, depth - 1, allowed, filter, fresh);
            if m.is_empty() {
                return (inner, m);
            }
            let scope: Vec<Variable> = m.iter().cloned().collect();
            let c = random_condition(rng, &scope, 2);
            (GraphPattern::filter(inner, c), m)
        }
    }
}
