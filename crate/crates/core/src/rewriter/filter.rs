use crate::algebra::{Condition, GraphPattern};
use crate::deep;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterRewriteOptions {
    /// Also rewrite `(P FILTER (R1 || R2))` into
    /// `((P FILTER R1) UNION (P FILTER R2))`. Off by default since it
    /// duplicates `P`.
    pub split_or: bool,
}

/// Merges stacked filters and pulls filters out of AND when both operands
/// are conjunctions of triple patterns.
pub fn apply_filter_rewrites(p: &GraphPattern) -> GraphPattern {
    apply_filter_rewrites_with(p, FilterRewriteOptions::default())
}

pub fn apply_filter_rewrites_with(p: &GraphPattern, opts: FilterRewriteOptions) -> GraphPattern {
    deep(|| match p {
        GraphPattern::Triple(_) => p.clone(),
        GraphPattern::And(a, b) => pushout(
            apply_filter_rewrites_with(a, opts),
            apply_filter_rewrites_with(b, opts),
        ),
        GraphPattern::Opt(a, b) => GraphPattern::opt(
            apply_filter_rewrites_with(a, opts),
            apply_filter_rewrites_with(b, opts),
        ),
        GraphPattern::Union(a, b) => GraphPattern::union(
            apply_filter_rewrites_with(a, opts),
            apply_filter_rewrites_with(b, opts),
        ),
        GraphPattern::Filter(inner, r) => {
            let merged = match apply_filter_rewrites_with(inner, opts) {
                GraphPattern::Filter(q, r1) => GraphPattern::filter(*q, Condition::and(r1, r.clone())),
                other => GraphPattern::filter(other, r.clone()),
            };
            if opts.split_or {
                split_or(merged)
            } else {
                merged
            }
        }
    })
}

/// `((P1 FILTER R) AND P2) → ((P1 AND P2) FILTER R)` and its mirror image,
/// only when `P1` and `P2` are conjunctions of triple patterns.
fn pushout(a: GraphPattern, b: GraphPattern) -> GraphPattern {
    match (a, b) {
        (GraphPattern::Filter(p1, r), p2) if p1.is_triple_conjunction() && p2.is_triple_conjunction() => {
            GraphPattern::filter(GraphPattern::and(*p1, p2), r)
        }
        (p1, GraphPattern::Filter(p2, r)) if p1.is_triple_conjunction() && p2.is_triple_conjunction() => {
            GraphPattern::filter(GraphPattern::and(p1, *p2), r)
        }
        (a, b) => GraphPattern::and(a, b),
    }
}

fn split_or(p: GraphPattern) -> GraphPattern {
    deep(|| match p {
        GraphPattern::Filter(q, Condition::Or(r1, r2)) => GraphPattern::union(
            split_or(GraphPattern::filter((*q).clone(), *r1)),
            split_or(GraphPattern::filter(*q, *r2)),
        ),
        other => other,
    })
}
