//! The compositional semantics `⟦P⟧_D`, the depth-first semantics
//! `Eval_D(P)`, FILTER satisfaction and membership checks.

use crate::algebra::{validate_filter_scope, Condition, GraphPattern, ScopeReport, TermPattern, TriplePattern, Variable};
use crate::deep;
use crate::mappings::{self, apply_mapping, Mapping, MappingSet};
use crate::par::Execution;
use crate::rdf::Dataset;
use crate::rewriter::to_union_normal_form;

use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Scope(ScopeReport),
    #[error("depth-first evaluation is undefined on UNION; enable union support to evaluate per union-normal-form branch")]
    UnionInDepthFirst,
    #[error("operator {0} is not supported here; only AND and FILTER are")]
    UnsupportedOperator(&'static str),
    #[error("mapping domain {{{found}}} differs from the pattern variables {{{expected}}}")]
    DomainMismatch { expected: String, found: String },
}

fn var_list(vars: &BTreeSet<Variable>) -> String {
    vars.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn check_scope(p: &GraphPattern) -> Result<(), EvalError> {
    let report = validate_filter_scope(p);
    if report.is_ok() {
        Ok(())
    } else {
        Err(EvalError::Scope(report))
    }
}

/// `μ ⊨ R`, two-valued: an atom over an unbound variable is false.
pub fn satisfies(m: &Mapping, r: &Condition) -> bool {
    deep(|| match r {
        Condition::Bound(v) => m.is_bound(v),
        Condition::EqConst(v, c) => m.get(v) == Some(c),
        Condition::EqVar(a, b) => match (m.get(a), m.get(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
        Condition::Not(c) => !satisfies(m, c),
        Condition::Or(a, b) => satisfies(m, a) || satisfies(m, b),
        Condition::And(a, b) => satisfies(m, a) && satisfies(m, b),
    })
}

/// All mappings `μ` with `dom(μ) = var(t)` and `μ(t) ∈ D`.
pub fn eval_triple(d: &Dataset, t: &TriplePattern) -> MappingSet {
    d.iter()
        .filter_map(|triple| {
            let mut mu = Mapping::empty();
            for (pat, term) in t.positions().into_iter().zip(triple.terms()) {
                match pat {
                    TermPattern::Term(c) if c != term => return None,
                    TermPattern::Term(_) => {}
                    TermPattern::Var(v) => match mu.get(v) {
                        Some(prev) if prev != term => return None,
                        Some(_) => {}
                        None => {
                            mu.insert(v.clone(), term.clone());
                        }
                    },
                }
            }
            Some(mu)
        })
        .collect()
}

/// `⟦P⟧_D`. Fails if some FILTER mentions a variable outside its pattern.
pub fn eval_compositional(d: &Dataset, p: &GraphPattern) -> Result<MappingSet, EvalError> {
    eval_compositional_with(d, p, Execution::default())
}

pub fn eval_compositional_with(
    d: &Dataset,
    p: &GraphPattern,
    exec: Execution,
) -> Result<MappingSet, EvalError> {
    check_scope(p)?;
    Ok(compositional(d, p, exec, 0))
}

/// Subtrees deeper than this are evaluated sequentially; spawning tasks for
/// every node of a deep chain costs more than it saves.
const PARALLEL_DEPTH: usize = 6;

fn compositional(d: &Dataset, p: &GraphPattern, exec: Execution, level: usize) -> MappingSet {
    deep(|| {
        let both = |a: &GraphPattern, b: &GraphPattern| {
            if level < PARALLEL_DEPTH {
                exec.join(
                    || compositional(d, a, exec, level + 1),
                    || compositional(d, b, exec, level + 1),
                )
            } else {
                (
                    compositional(d, a, exec, level + 1),
                    compositional(d, b, exec, level + 1),
                )
            }
        };
        match p {
            GraphPattern::Triple(t) => eval_triple(d, t),
            GraphPattern::And(a, b) => {
                let (x, y) = both(a, b);
                mappings::join_with(&x, &y, exec)
            }
            GraphPattern::Opt(a, b) => {
                let (x, y) = both(a, b);
                mappings::left_outer_join_with(&x, &y, exec)
            }
            GraphPattern::Union(a, b) => {
                let (x, y) = both(a, b);
                mappings::union(&x, &y)
            }
            GraphPattern::Filter(inner, r) => {
                compositional(d, inner, exec, level + 1).filter(|m| satisfies(m, r))
            }
        }
    })
}

/// Options for [`eval_depth_first_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DepthFirstOptions {
    /// Evaluate UNION patterns by running each branch of the union normal
    /// form depth-first and taking the union. This extends `Eval_D`, which
    /// is only defined on UNION-free patterns.
    pub allow_union: bool,
    pub exec: Execution,
}

/// `Eval_D(P, {μ∅})`. Rejects UNION.
pub fn eval_depth_first(d: &Dataset, p: &GraphPattern) -> Result<MappingSet, EvalError> {
    eval_depth_first_with(d, p, DepthFirstOptions::default())
}

pub fn eval_depth_first_with(
    d: &Dataset,
    p: &GraphPattern,
    opts: DepthFirstOptions,
) -> Result<MappingSet, EvalError> {
    check_scope(p)?;
    if p.is_union_free() {
        return Ok(depth_first(d, p, MappingSet::unit(), opts.exec, &mut |_, _, _| {}));
    }
    if !opts.allow_union {
        return Err(EvalError::UnionInDepthFirst);
    }
    let branches = to_union_normal_form(p);
    let results = opts.exec.map(&branches, |b| {
        depth_first(d, b, MappingSet::unit(), opts.exec, &mut |_, _, _| {})
    });
    Ok(results.into_iter().flatten().collect())
}

/// Runs `Eval_D(P, Ω)` and reports every recursive call to `observe` as
/// `(sub-pattern, Ω, result)`, innermost calls first.
pub fn eval_depth_first_observed(
    d: &Dataset,
    p: &GraphPattern,
    omega: MappingSet,
    observe: &mut dyn FnMut(&GraphPattern, &MappingSet, &MappingSet),
) -> Result<MappingSet, EvalError> {
    check_scope(p)?;
    if !p.is_union_free() {
        return Err(EvalError::UnionInDepthFirst);
    }
    Ok(depth_first(d, p, omega, Execution::default(), observe))
}

fn depth_first(
    d: &Dataset,
    p: &GraphPattern,
    omega: MappingSet,
    exec: Execution,
    observe: &mut dyn FnMut(&GraphPattern, &MappingSet, &MappingSet),
) -> MappingSet {
    deep(|| {
        let out = if omega.is_empty() {
            MappingSet::new()
        } else {
            match p {
                GraphPattern::Triple(t) => mappings::join_with(&omega, &eval_triple(d, t), exec),
                GraphPattern::And(a, b) => {
                    let left = depth_first(d, a, omega.clone(), exec, observe);
                    depth_first(d, b, left, exec, observe)
                }
                GraphPattern::Opt(a, b) => {
                    let left = depth_first(d, a, omega.clone(), exec, observe);
                    let right = depth_first(d, b, left.clone(), exec, observe);
                    mappings::left_outer_join_with(&left, &right, exec)
                }
                GraphPattern::Filter(inner, r) => {
                    depth_first(d, inner, omega.clone(), exec, observe).filter(|m| satisfies(m, r))
                }
                GraphPattern::Union(..) => unreachable!("callers reject UNION"),
            }
        };
        observe(p, &omega, &out);
        out
    })
}

/// Decides `μ ∈ ⟦P⟧_D` for patterns built from AND and FILTER only, in
/// `O(|P| · log |D|)` without enumerating `⟦P⟧_D`: every triple is
/// instantiated and looked up, then every FILTER condition is checked.
pub fn membership_fast(d: &Dataset, p: &GraphPattern, m: &Mapping) -> Result<bool, EvalError> {
    for node in p.nodes() {
        match node {
            GraphPattern::Opt(..) => return Err(EvalError::UnsupportedOperator("OPT")),
            GraphPattern::Union(..) => return Err(EvalError::UnsupportedOperator("UNION")),
            _ => {}
        }
    }
    check_scope(p)?;
    let vars = p.variables();
    let domain = m.domain();
    if domain != vars {
        return Err(EvalError::DomainMismatch {
            expected: var_list(&vars),
            found: var_list(&domain),
        });
    }
    // With a valid scope, every FILTER variable is bound by a triple below
    // it, so checking conditions against all of μ equals checking them
    // against μ restricted to each sub-pattern.
    for node in p.nodes() {
        let ok = match node {
            GraphPattern::Triple(t) => match apply_mapping(m, t) {
                Ok(ground) => d.contains(&ground),
                Err(_) => false,
            },
            GraphPattern::Filter(_, r) => satisfies(m, r),
            _ => true,
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Decides `μ ∈ ⟦P⟧_D` for any pattern by evaluating it.
pub fn membership(d: &Dataset, p: &GraphPattern, m: &Mapping) -> Result<bool, EvalError> {
    Ok(eval_compositional(d, p)?.contains(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::Term;

    fn data() -> Dataset {
        Dataset::parse(
            "B1 name paul\nB1 phone \"777-3426\"\nB2 name john\nB2 email john@acd.edu\n\
             B3 name george\nB3 webPage www.george.edu\nB4 name ringo\nB4 email ringo@acd.edu\n\
             B4 webPage www.starr.edu\nB4 phone \"888-4537\"",
        )
        .unwrap()
    }

    fn pat(s: &str) -> GraphPattern {
        GraphPattern::parse(s).unwrap()
    }

    fn mu(pairs: &[(&str, Term)]) -> Mapping {
        pairs.iter().map(|(v, t)| (Variable::new(*v), t.clone())).collect()
    }

    fn iri(s: &str) -> Term {
        Term::iri(s)
    }

    #[test]
    fn satisfaction_cases() {
        let m = mu(&[("A", iri("B1")), ("N", iri("paul")), ("P", Term::literal("777-3426"))]);
        assert!(satisfies(&m, &Condition::parse("?P = \"777-3426\"").unwrap()));
        assert!(!satisfies(&m, &Condition::parse("?P = 777-3426").unwrap()));
        let bound_x = Condition::parse("bound(?X)").unwrap();
        assert!(!satisfies(&Mapping::empty(), &bound_x));
        assert!(satisfies(&Mapping::empty(), &Condition::not(bound_x)));
        assert!(!satisfies(&Mapping::empty(), &Condition::parse("?X = ?Y").unwrap()));
        assert!(satisfies(&m, &Condition::parse("(?X = a || ?A = B1)").unwrap()));
        assert!(!satisfies(&m, &Condition::parse("(?X = a && ?A = B1)").unwrap()));
    }

    #[test]
    fn triple_evaluation() {
        let d = data();
        let t = |s: &str| match pat(s) {
            GraphPattern::Triple(t) => t,
            _ => unreachable!(),
        };
        let got = eval_triple(&d, &t("(?A email ?E)"));
        let want: MappingSet = [
            mu(&[("A", iri("B2")), ("E", iri("john@acd.edu"))]),
            mu(&[("A", iri("B4")), ("E", iri("ringo@acd.edu"))]),
        ]
        .into_iter()
        .collect();
        assert_eq!(got, want);
        assert_eq!(eval_triple(&d, &t("(B1 name paul)")), MappingSet::unit());
        assert!(eval_triple(&d, &t("(B1 name john)")).is_empty());
    }

    #[test]
    fn repeated_variable_must_match_twice() {
        let d = Dataset::parse("a p a\na p b").unwrap();
        let GraphPattern::Triple(t) = pat("(?X p ?X)") else { unreachable!() };
        assert_eq!(eval_triple(&d, &t).len(), 1);
    }

    #[test]
    fn compositional_rejects_out_of_scope_filters() {
        let e = eval_compositional(&data(), &pat("((?X p ?Y) FILTER bound(?Z))")).unwrap_err();
        assert!(matches!(e, EvalError::Scope(_)));
    }

    #[test]
    fn depth_first_rejects_union_unless_enabled() {
        let p = pat("((?A name ?N) AND ((?A email ?E) UNION (?A webPage ?W)))");
        assert_eq!(eval_depth_first(&data(), &p), Err(EvalError::UnionInDepthFirst));
        let opts = DepthFirstOptions { allow_union: true, ..Default::default() };
        let got = eval_depth_first_with(&data(), &p, opts).unwrap();
        assert_eq!(got, eval_compositional(&data(), &p).unwrap());
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn depth_first_on_nested_optional() {
        let p = pat("((?X name paul) OPT ((?Y name george) OPT (?X email ?Z)))");
        let df = eval_depth_first(&data(), &p).unwrap();
        assert_eq!(df, [mu(&[("X", iri("B1")), ("Y", iri("B3"))])].into_iter().collect());
        let c = eval_compositional(&data(), &p).unwrap();
        assert_eq!(c, [mu(&[("X", iri("B1"))])].into_iter().collect());
    }

    #[test]
    fn observer_sees_every_call() {
        let p = pat("(((?A name ?N) OPT (?A email ?E)) OPT (?A webPage ?W))");
        let mut calls = 0;
        eval_depth_first_observed(&data(), &p, MappingSet::unit(), &mut |_, _, _| calls += 1).unwrap();
        assert_eq!(calls, 5);
    }

    #[test]
    fn fast_membership_examples() {
        let d = data();
        let p = pat("((?A name ?N) AND (?A phone ?P))");
        let yes = mu(&[("A", iri("B4")), ("N", iri("ringo")), ("P", Term::literal("888-4537"))]);
        let no = mu(&[("A", iri("B1")), ("N", iri("ringo")), ("P", Term::literal("777-3426"))]);
        assert_eq!(membership_fast(&d, &p, &yes), Ok(true));
        assert_eq!(membership_fast(&d, &p, &no), Ok(false));
        assert_eq!(membership(&d, &p, &yes), Ok(true));
        assert_eq!(membership(&d, &p, &no), Ok(false));

        let f = pat("((?A name ?N) FILTER (! bound(?A)))");
        for m in eval_triple(&d, &match pat("(?A name ?N)") {
            GraphPattern::Triple(t) => t,
            _ => unreachable!(),
        }) {
            assert_eq!(membership_fast(&d, &f, &m), Ok(false));
            assert_eq!(membership(&d, &f, &m), Ok(false));
        }
    }

    #[test]
    fn fast_membership_preconditions() {
        let d = data();
        let opt = pat("((?A name ?N) OPT (?A phone ?P))");
        assert_eq!(
            membership_fast(&d, &opt, &Mapping::empty()),
            Err(EvalError::UnsupportedOperator("OPT"))
        );
        let p = pat("(?A name ?N)");
        assert!(matches!(
            membership_fast(&d, &p, &mu(&[("A", iri("B1"))])),
            Err(EvalError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let p = pat("(((?A name ?N) OPT (?A email ?E)) OPT (?A webPage ?W))");
        assert_eq!(
            eval_compositional_with(&data(), &p, Execution::Sequential).unwrap(),
            eval_compositional_with(&data(), &p, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn very_deep_pattern_evaluates() {
        let t = pat("(?X p ?Y)");
        let mut p = t.clone();
        for _ in 0..10_000 {
            p = GraphPattern::and(p, t.clone());
        }
        let d = Dataset::parse("a p b\nb p c").unwrap();
        assert_eq!(eval_compositional(&d, &p).unwrap().len(), 2);
        assert_eq!(eval_depth_first(&d, &p).unwrap().len(), 2);
    }
}
