#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparql_algebra::{Condition, Dataset, GraphPattern, Mapping, MappingSet, Term, TermPattern, Variable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn people() -> Dataset {
    Dataset::parse(
        "B1 name paul\nB1 phone \"777-3426\"\nB2 name john\nB2 email john@acd.edu\n\
         B3 name george\nB3 webPage www.george.edu\nB4 name ringo\nB4 email ringo@acd.edu\n\
         B4 webPage www.starr.edu\nB4 phone \"888-4537\"",
    )
    .unwrap()
}

pub fn pat(s: &str) -> GraphPattern {
    GraphPattern::parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn iri(s: &str) -> Term {
    Term::iri(s)
}

pub fn lit(s: &str) -> Term {
    Term::literal(s)
}

pub fn mu(pairs: &[(&str, Term)]) -> Mapping {
    pairs.iter().map(|(v, t)| (Variable::new(*v), t.clone())).collect()
}

pub fn set(ms: Vec<Mapping>) -> MappingSet {
    ms.into_iter().collect()
}

// A deliberately naive evaluator: plain vectors of BTreeMaps, nested loops,
// no hashing and no shared code with the library operators.

type Row = BTreeMap<Variable, Term>;

fn row(m: &Mapping) -> Row {
    m.iter().map(|(v, t)| (v.clone(), t.clone())).collect()
}

fn agree(a: &Row, b: &Row) -> bool {
    a.iter().all(|(v, t)| b.get(v).is_none_or(|u| u == t))
}

fn dedup(rows: Vec<Row>) -> Vec<Row> {
    let mut out: Vec<Row> = Vec::new();
    for r in rows {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

pub fn naive_join(a: &MappingSet, b: &MappingSet) -> MappingSet {
    to_set(join_rows(&rows(a), &rows(b)))
}

pub fn naive_minus(a: &MappingSet, b: &MappingSet) -> MappingSet {
    to_set(minus_rows(&rows(a), &rows(b)))
}

pub fn naive_left_join(a: &MappingSet, b: &MappingSet) -> MappingSet {
    let (a, b) = (rows(a), rows(b));
    let mut out = join_rows(&a, &b);
    out.extend(minus_rows(&a, &b));
    to_set(out)
}

fn rows(s: &MappingSet) -> Vec<Row> {
    s.iter().map(row).collect()
}

fn to_set(rows: Vec<Row>) -> MappingSet {
    rows.into_iter()
        .map(|r| r.into_iter().collect::<Mapping>())
        .collect()
}

fn join_rows(a: &[Row], b: &[Row]) -> Vec<Row> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            if agree(x, y) {
                let mut z = x.clone();
                z.extend(y.iter().map(|(k, v)| (k.clone(), v.clone())));
                out.push(z);
            }
        }
    }
    dedup(out)
}

fn minus_rows(a: &[Row], b: &[Row]) -> Vec<Row> {
    a.iter()
        .filter(|x| !b.iter().any(|y| agree(x, y)))
        .cloned()
        .collect()
}

fn naive_triple(d: &Dataset, t: &sparql_algebra::TriplePattern) -> Vec<Row> {
    let mut out = Vec::new();
    'triples: for tr in d.iter() {
        let mut r = Row::new();
        for (p, term) in t.positions().into_iter().zip(tr.terms()) {
            match p {
                TermPattern::Term(c) => {
                    if c != term {
                        continue 'triples;
                    }
                }
                TermPattern::Var(v) => {
                    if let Some(prev) = r.get(v) {
                        if prev != term {
                            continue 'triples;
                        }
                    }
                    r.insert(v.clone(), term.clone());
                }
            }
        }
        out.push(r);
    }
    dedup(out)
}

/// Structural recursion straight from the definition of `⟦P⟧_D`.
pub fn reference_eval(d: &Dataset, p: &GraphPattern) -> MappingSet {
    to_set(reference_rows(d, p))
}

fn reference_rows(d: &Dataset, p: &GraphPattern) -> Vec<Row> {
    match p {
        GraphPattern::Triple(t) => naive_triple(d, t),
        GraphPattern::And(a, b) => join_rows(&reference_rows(d, a), &reference_rows(d, b)),
        GraphPattern::Opt(a, b) => {
            let (x, y) = (reference_rows(d, a), reference_rows(d, b));
            let mut out = join_rows(&x, &y);
            out.extend(minus_rows(&x, &y));
            dedup(out)
        }
        GraphPattern::Union(a, b) => {
            let mut out = reference_rows(d, a);
            out.extend(reference_rows(d, b));
            dedup(out)
        }
        GraphPattern::Filter(a, r) => reference_rows(d, a)
            .into_iter()
            .filter(|x| holds(x, r))
            .collect(),
    }
}

fn holds(x: &Row, r: &Condition) -> bool {
    match r {
        Condition::Bound(v) => x.contains_key(v),
        Condition::EqConst(v, c) => x.get(v) == Some(c),
        Condition::EqVar(a, b) => x.contains_key(a) && x.get(a) == x.get(b),
        Condition::Not(c) => !holds(x, c),
        Condition::Or(a, b) => holds(x, a) || holds(x, b),
        Condition::And(a, b) => holds(x, a) && holds(x, b),
    }
}

/// Variables with a triple occurrence that is not inside the right operand
/// of any OPT.
pub fn mandatory_triple_variables(p: &GraphPattern) -> BTreeSet<Variable> {
    match p {
        GraphPattern::Triple(t) => t.variables(),
        GraphPattern::And(a, b) => {
            let mut v = mandatory_triple_variables(a);
            v.extend(mandatory_triple_variables(b));
            v
        }
        GraphPattern::Union(a, b) => mandatory_triple_variables(a)
            .intersection(&mandatory_triple_variables(b))
            .cloned()
            .collect(),
        GraphPattern::Opt(a, _) | GraphPattern::Filter(a, _) => mandatory_triple_variables(a),
    }
}
