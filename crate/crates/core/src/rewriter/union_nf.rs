//! UNION normal form: an equivalent list of UNION-free branches.
//!
//! AND, the left side of OPT and FILTER distribute over UNION. The right
//! side of OPT does not: `(P1 OPT (B1 UNION B2))` can keep a mapping of `P1`
//! that `(P1 OPT B2)` extends. It is rewritten as the branches
//! `(P1 AND Bi)` plus one branch holding the mappings of `P1` compatible
//! with no `Bi`:
//!
//! ```text
//! ((((P1 OPT (B1 AND F)) FILTER (! bound(?f))) OPT (B2 AND F)) FILTER (! bound(?f)))
//! ```
//!
//! where `F = (?f ?g ?h)` uses variables not in the input. `F` matches every
//! triple, so `(Bi AND F)` extends each mapping of `Bi` with a binding of
//! `?f`, and the filter keeps exactly the mappings left unextended.
//!
//! Pushing a FILTER into a branch can leave it mentioning variables that
//! branch never binds. Such atoms are false on every mapping of the branch,
//! so they are replaced by false and the condition simplified. A branch
//! whose filter becomes false is empty and is dropped.

use std::collections::{BTreeSet, VecDeque};

use crate::algebra::{Condition, GraphPattern, Step, TriplePattern, Variable};
use crate::deep;

/// The branches of an equivalent union of UNION-free patterns. An empty
/// list denotes a pattern with no solutions on any dataset.
pub fn to_union_normal_form(p: &GraphPattern) -> Vec<GraphPattern> {
    let fresh = Fresh::for_pattern(p);
    branches(p, &fresh)
}

/// Folds branches back into one pattern, `((B1 UNION B2) UNION B3) …`.
pub fn union_of(branches: Vec<GraphPattern>) -> Option<GraphPattern> {
    GraphPattern::fold(crate::algebra::BinaryOp::Union, branches)
}

/// Upper bound on the number of branches, exact for FILTER-free input.
pub fn union_branch_bound(p: &GraphPattern) -> usize {
    deep(|| match p {
        GraphPattern::Triple(_) => 1,
        GraphPattern::Union(a, b) => union_branch_bound(a).saturating_add(union_branch_bound(b)),
        GraphPattern::And(a, b) => union_branch_bound(a).saturating_mul(union_branch_bound(b)),
        GraphPattern::Opt(a, b) => {
            let right = match union_branch_bound(b) {
                0 | 1 => 1,
                k => k + 1,
            };
            union_branch_bound(a).saturating_mul(right)
        }
        GraphPattern::Filter(inner, _) => union_branch_bound(inner),
    })
}

struct Fresh {
    s: Variable,
    p: Variable,
    o: Variable,
}

impl Fresh {
    fn for_pattern(p: &GraphPattern) -> Self {
        let used = p.variables();
        (0..)
            .map(|k| Fresh {
                s: Variable::new(format!("_u{k}s")),
                p: Variable::new(format!("_u{k}p")),
                o: Variable::new(format!("_u{k}o")),
            })
            .find(|f| ![&f.s, &f.p, &f.o].iter().any(|v| used.contains(*v)))
            .expect("some suffix is unused")
    }

    fn triple(&self) -> GraphPattern {
        TriplePattern::new(self.s.clone(), self.p.clone(), self.o.clone())
            .expect("variables are valid everywhere")
            .into()
    }

    fn unbound(&self) -> Condition {
        Condition::not(Condition::Bound(self.s.clone()))
    }
}

fn branches(p: &GraphPattern, fresh: &Fresh) -> Vec<GraphPattern> {
    deep(|| match p {
        GraphPattern::Triple(_) => vec![p.clone()],
        GraphPattern::Union(a, b) => {
            let mut out = branches(a, fresh);
            out.extend(branches(b, fresh));
            out
        }
        GraphPattern::And(a, b) => {
            let xs = branches(a, fresh);
            let ys = branches(b, fresh);
            xs.iter()
                .flat_map(|x| ys.iter().map(move |y| GraphPattern::and(x.clone(), y.clone())))
                .collect()
        }
        GraphPattern::Opt(a, b) => {
            let ys = branches(b, fresh);
            branches(a, fresh)
                .into_iter()
                .flat_map(|x| optional_branches(x, &ys, fresh))
                .collect()
        }
        GraphPattern::Filter(inner, r) => branches(inner, fresh)
            .into_iter()
            .filter_map(|x| filter_branch(x, r))
            .collect(),
    })
}

/// Branches equivalent to `(x OPT (y1 UNION … UNION yk))`.
fn optional_branches(x: GraphPattern, ys: &[GraphPattern], fresh: &Fresh) -> Vec<GraphPattern> {
    match ys {
        [] => vec![x],
        [y] => vec![GraphPattern::opt(x, y.clone())],
        _ => {
            let mut out: Vec<GraphPattern> = ys
                .iter()
                .map(|y| GraphPattern::and(x.clone(), y.clone()))
                .collect();
            out.push(unmatched(x, ys, fresh));
            out
        }
    }
}

/// The mappings of `x` compatible with no mapping of any `ys`. The chain
/// order does not matter semantically; sorting makes the result independent
/// of the order in which branches were produced.
fn unmatched(x: GraphPattern, ys: &[GraphPattern], fresh: &Fresh) -> GraphPattern {
    let mut ys: Vec<&GraphPattern> = ys.iter().collect();
    ys.sort();
    ys.into_iter().fold(x, |acc, y| {
        GraphPattern::filter(
            GraphPattern::opt(acc, GraphPattern::and(y.clone(), fresh.triple())),
            fresh.unbound(),
        )
    })
}

enum Residual {
    True,
    False,
    Cond(Condition),
}

/// Partially evaluates `c` with every atom over a variable outside `scope`
/// fixed to false. Returns `c` unchanged when no atom is affected.
fn restrict(c: &Condition, scope: &BTreeSet<Variable>) -> Residual {
    deep(|| match c {
        Condition::Bound(v) | Condition::EqConst(v, _) if !scope.contains(v) => Residual::False,
        Condition::EqVar(a, b) if !scope.contains(a) || !scope.contains(b) => Residual::False,
        Condition::Bound(_) | Condition::EqConst(..) | Condition::EqVar(..) => {
            Residual::Cond(c.clone())
        }
        Condition::Not(inner) => match restrict(inner, scope) {
            Residual::True => Residual::False,
            Residual::False => Residual::True,
            Residual::Cond(x) => Residual::Cond(Condition::not(x)),
        },
        Condition::Or(a, b) => match (restrict(a, scope), restrict(b, scope)) {
            (Residual::True, _) | (_, Residual::True) => Residual::True,
            (Residual::False, r) | (r, Residual::False) => r,
            (Residual::Cond(x), Residual::Cond(y)) => Residual::Cond(Condition::or(x, y)),
        },
        Condition::And(a, b) => match (restrict(a, scope), restrict(b, scope)) {
            (Residual::False, _) | (_, Residual::False) => Residual::False,
            (Residual::True, r) | (r, Residual::True) => r,
            (Residual::Cond(x), Residual::Cond(y)) => Residual::Cond(Condition::and(x, y)),
        },
    })
}

/// `(x FILTER r)` with `r` cut down to the variables `x` can bind, or
/// `None` if no mapping of `x` can satisfy it.
fn filter_branch(x: GraphPattern, r: &Condition) -> Option<GraphPattern> {
    match restrict(r, &x.triple_variables()) {
        Residual::True => Some(x),
        Residual::False => None,
        Residual::Cond(c) => Some(GraphPattern::filter(x, c)),
    }
}

/// The same branches as [`to_union_normal_form`], produced by repeatedly
/// lifting the outermost UNION one step instead of working bottom-up.
pub fn to_union_normal_form_stepwise(p: &GraphPattern) -> Vec<GraphPattern> {
    let fresh = Fresh::for_pattern(p);
    stepwise(p.clone(), &fresh)
}

fn stepwise(p: GraphPattern, fresh: &Fresh) -> Vec<GraphPattern> {
    let mut done = Vec::new();
    let mut work = VecDeque::from([p]);
    while let Some(b) = work.pop_front() {
        match step(&b, fresh) {
            None => done.push(b),
            Some(next) => {
                for n in next.into_iter().rev() {
                    work.push_front(n);
                }
            }
        }
    }
    done
}

/// Nodes reachable without entering the right side of an OPT, pre-order.
fn distributive_nodes(p: &GraphPattern) -> Vec<(Vec<Step>, &GraphPattern)> {
    let mut out = Vec::new();
    let mut stack = vec![(Vec::new(), p)];
    while let Some((path, node)) = stack.pop() {
        let child = |s: Step| {
            let mut next = path.clone();
            next.push(s);
            next
        };
        match node {
            GraphPattern::Triple(_) => {}
            GraphPattern::And(a, b) | GraphPattern::Union(a, b) => {
                stack.push((child(Step::Right), b));
                stack.push((child(Step::Left), a));
            }
            GraphPattern::Opt(a, _) => stack.push((child(Step::Left), a)),
            GraphPattern::Filter(inner, _) => stack.push((child(Step::Inner), inner)),
        }
        out.push((path, node));
    }
    out
}

/// One rewrite of `b`, or `None` if it is already UNION-free.
fn step(b: &GraphPattern, fresh: &Fresh) -> Option<Vec<GraphPattern>> {
    let nodes = distributive_nodes(b);
    if let Some((path, GraphPattern::Union(l, r))) =
        nodes.iter().find(|(_, n)| matches!(n, GraphPattern::Union(..)))
    {
        return Some(
            [l, r]
                .into_iter()
                .filter_map(|side| replace(b, path, (**side).clone()))
                .collect(),
        );
    }
    let (path, node) = nodes
        .into_iter()
        .find(|(_, n)| matches!(n, GraphPattern::Opt(_, r) if !r.is_union_free()))?;
    let GraphPattern::Opt(x, right) = node else {
        unreachable!()
    };
    let ys = stepwise((**right).clone(), fresh);
    let replacement = match optional_branches((**x).clone(), &ys, fresh).into_iter().reduce(GraphPattern::union) {
        Some(p) => p,
        None => unreachable!("optional_branches never returns an empty list"),
    };
    Some(replace(b, &path, replacement).into_iter().collect())
}

/// Substitutes `repl` at `path`, repairing FILTER conditions on the way up
/// and propagating emptiness. `None` means the whole pattern is empty.
fn replace(node: &GraphPattern, path: &[Step], repl: GraphPattern) -> Option<GraphPattern> {
    let Some((first, rest)) = path.split_first() else {
        return Some(repl);
    };
    deep(|| match (first, node) {
        (Step::Left, GraphPattern::And(a, b)) => {
            Some(GraphPattern::and(replace(a, rest, repl)?, (**b).clone()))
        }
        (Step::Right, GraphPattern::And(a, b)) => {
            Some(GraphPattern::and((**a).clone(), replace(b, rest, repl)?))
        }
        (Step::Left, GraphPattern::Opt(a, b)) => {
            Some(GraphPattern::opt(replace(a, rest, repl)?, (**b).clone()))
        }
        (Step::Right, GraphPattern::Opt(a, b)) => Some(match replace(b, rest, repl) {
            Some(nb) => GraphPattern::opt((**a).clone(), nb),
            None => (**a).clone(),
        }),
        (Step::Left, GraphPattern::Union(a, b)) => Some(match replace(a, rest, repl) {
            Some(na) => GraphPattern::union(na, (**b).clone()),
            None => (**b).clone(),
        }),
        (Step::Right, GraphPattern::Union(a, b)) => Some(match replace(b, rest, repl) {
            Some(nb) => GraphPattern::union((**a).clone(), nb),
            None => (**a).clone(),
        }),
        (Step::Inner, GraphPattern::Filter(inner, r)) => filter_branch(replace(inner, rest, repl)?, r),
        _ => unreachable!("path was taken from this pattern"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::validate_filter_scope;
    use crate::eval::eval_compositional;
    use crate::rdf::Dataset;

    fn pat(s: &str) -> GraphPattern {
        GraphPattern::parse(s).unwrap()
    }

    fn texts(ps: &[GraphPattern]) -> Vec<String> {
        ps.iter().map(|p| p.to_string()).collect()
    }

    #[test]
    fn and_distributes() {
        let p4 = pat("((?A name ?N) AND ((?A email ?E) UNION (?A webPage ?W)))");
        assert_eq!(
            texts(&to_union_normal_form(&p4)),
            ["((?A name ?N) AND (?A email ?E))", "((?A name ?N) AND (?A webPage ?W))"]
        );
    }

    #[test]
    fn union_free_is_unchanged() {
        let p = pat("(((?A name ?N) OPT (?A phone ?P)) FILTER ?P = \"777-3426\")");
        assert_eq!(to_union_normal_form(&p), vec![p.clone()]);
        assert_eq!(to_union_normal_form_stepwise(&p), vec![p]);
    }

    #[test]
    fn opt_left_distributes() {
        let p = pat("(((?X a ?Y) UNION (?X b ?Y)) OPT (?Y c ?Z))");
        assert_eq!(
            texts(&to_union_normal_form(&p)),
            ["((?X a ?Y) OPT (?Y c ?Z))", "((?X b ?Y) OPT (?Y c ?Z))"]
        );
    }

    #[test]
    fn opt_right_union_gets_a_remainder_branch() {
        let p = pat("((?X p o) OPT ((?X q ?Y) UNION (?X r ?Z)))");
        let got = texts(&to_union_normal_form(&p));
        assert_eq!(
            got,
            [
                "((?X p o) AND (?X q ?Y))",
                "((?X p o) AND (?X r ?Z))",
                "(((((?X p o) OPT ((?X q ?Y) AND (?_u0s ?_u0p ?_u0o))) FILTER (! bound(?_u0s))) \
                 OPT ((?X r ?Z) AND (?_u0s ?_u0p ?_u0o))) FILTER (! bound(?_u0s)))"
            ]
        );
        let d = Dataset::parse("a p o\na q b\nc p o").unwrap();
        let joined = union_of(to_union_normal_form(&p)).unwrap();
        assert_eq!(eval_compositional(&d, &joined), eval_compositional(&d, &p));
    }

    #[test]
    fn fresh_names_avoid_existing_variables() {
        let p = pat("((?_u0s p o) OPT ((?_u0s q ?Y) UNION (?_u0s r ?Z)))");
        let out = union_of(to_union_normal_form(&p)).unwrap().to_string();
        assert!(out.contains("?_u1s"));
    }

    #[test]
    fn filter_over_union_repairs_scope() {
        let p = pat("(((?X p ?Y) UNION (?X q ?Z)) FILTER (bound(?Y) || ?X = a))");
        let got = to_union_normal_form(&p);
        assert_eq!(
            texts(&got),
            ["((?X p ?Y) FILTER (bound(?Y) || ?X = a))", "((?X q ?Z) FILTER ?X = a)"]
        );
        assert!(got.iter().all(|b| validate_filter_scope(b).is_ok()));
    }

    #[test]
    fn branch_with_false_filter_is_dropped() {
        let p = pat("(((?X p ?Y) UNION (?X q ?Z)) FILTER bound(?Y))");
        assert_eq!(texts(&to_union_normal_form(&p)), ["((?X p ?Y) FILTER bound(?Y))"]);
        let none = pat("((((?X p ?Y) UNION (?X q ?Z)) FILTER bound(?Y)) FILTER bound(?Z))");
        assert!(to_union_normal_form(&none).is_empty());
        assert!(to_union_normal_form_stepwise(&none).is_empty());
    }

    #[test]
    fn negated_out_of_scope_atom_becomes_true() {
        let p = pat("(((?X p ?Y) UNION (?X q ?Z)) FILTER (! bound(?Y)))");
        assert_eq!(
            texts(&to_union_normal_form(&p)),
            ["((?X p ?Y) FILTER (! bound(?Y)))", "(?X q ?Z)"]
        );
    }

    #[test]
    fn strategies_agree_on_examples() {
        for s in [
            "((?A name ?N) AND ((?A email ?E) UNION (?A webPage ?W)))",
            "((((?X a ?Y) UNION (?X b ?Y)) AND ((?Y c ?Z) UNION (?Y d ?Z))) FILTER bound(?Z))",
            "(((?X p o) UNION (?X s o)) OPT ((?X q ?Y) UNION ((?X r ?Z) UNION (?X t ?Z))))",
            "((?X p o) OPT (((?X q ?Y) UNION (?X r ?Z)) FILTER bound(?Y)))",
        ] {
            let p = pat(s);
            let a: BTreeSet<String> = texts(&to_union_normal_form(&p)).into_iter().collect();
            let b: BTreeSet<String> = texts(&to_union_normal_form_stepwise(&p)).into_iter().collect();
            assert_eq!(a, b, "{s}");
        }
    }

    #[test]
    fn branch_bound_examples() {
        let p4 = pat("((?A name ?N) AND ((?A email ?E) UNION (?A webPage ?W)))");
        assert_eq!(union_branch_bound(&p4), 2);
        let p = pat("((?X p o) OPT ((?X q ?Y) UNION (?X r ?Z)))");
        assert_eq!(union_branch_bound(&p), 3);
        assert_eq!(to_union_normal_form(&p).len(), 3);
    }
}
