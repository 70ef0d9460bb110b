use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::algebra::{GraphPattern, PatternPath, Step, Variable};
use crate::deep;

use super::RewriteError;

/// One offending pair: an OPT occurrence and a variable of its right side
/// that occurs outside the occurrence but not in its left side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WdViolation {
    pub location: PatternPath,
    pub opt: GraphPattern,
    pub variable: Variable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellDesignedReport {
    pub is_well_designed: bool,
    pub violations: Vec<WdViolation>,
}

impl fmt::Display for WellDesignedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_well_designed {
            return writeln!(f, "well designed: yes");
        }
        writeln!(f, "well designed: no")?;
        for v in &self.violations {
            writeln!(
                f,
                "  at {}: {} occurs in the optional side of {} and outside it, but not in its left side",
                v.location, v.variable, v.opt
            )?;
        }
        Ok(())
    }
}

/// Checks every OPT occurrence `P' = (P1 OPT P2)` of a UNION-free pattern:
/// each variable of `P2` that also occurs outside `P'` must occur in `P1`.
/// Occurrences inside FILTER conditions count.
pub fn is_well_designed(p: &GraphPattern) -> Result<WellDesignedReport, RewriteError> {
    if !p.is_union_free() {
        return Err(RewriteError::UnionPresent);
    }
    let mut opts = Vec::new();
    let total = occurrences(p, PatternPath::root(), &mut opts);
    let mut violations = Vec::new();
    for seen in opts {
        for v in seen.right.difference(&seen.left) {
            if total[v] > seen.inside[v] {
                violations.push(WdViolation {
                    location: seen.location.clone(),
                    opt: seen.node.clone(),
                    variable: v.clone(),
                });
            }
        }
    }
    Ok(WellDesignedReport {
        is_well_designed: violations.is_empty(),
        violations,
    })
}

struct OptSeen<'a> {
    location: PatternPath,
    node: &'a GraphPattern,
    inside: BTreeMap<Variable, usize>,
    left: BTreeSet<Variable>,
    right: BTreeSet<Variable>,
}

/// Occurrence counts of `p`, recording the counts under every OPT node in
/// pre-order so that reports list outer occurrences first.
fn occurrences<'a>(
    p: &'a GraphPattern,
    location: PatternPath,
    opts: &mut Vec<OptSeen<'a>>,
) -> BTreeMap<Variable, usize> {
    deep(|| match p {
        GraphPattern::Triple(_) => p.variable_occurrences(),
        GraphPattern::And(a, b) | GraphPattern::Union(a, b) => {
            let mut counts = occurrences(a, location.child(Step::Left), opts);
            merge(&mut counts, occurrences(b, location.child(Step::Right), opts));
            counts
        }
        GraphPattern::Opt(a, b) => {
            let slot = opts.len();
            opts.push(OptSeen {
                location: location.clone(),
                node: p,
                inside: BTreeMap::new(),
                left: BTreeSet::new(),
                right: BTreeSet::new(),
            });
            let mut counts = occurrences(a, location.child(Step::Left), opts);
            let right = occurrences(b, location.child(Step::Right), opts);
            opts[slot].left = counts.keys().cloned().collect();
            opts[slot].right = right.keys().cloned().collect();
            merge(&mut counts, right);
            opts[slot].inside = counts.clone();
            counts
        }
        GraphPattern::Filter(inner, c) => {
            let mut counts = occurrences(inner, location.child(Step::Inner), opts);
            c.count_occurrences(&mut counts);
            counts
        }
    })
}

fn merge(into: &mut BTreeMap<Variable, usize>, from: BTreeMap<Variable, usize>) {
    for (v, n) in from {
        *into.entry(v).or_default() += n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(s: &str) -> WellDesignedReport {
        is_well_designed(&GraphPattern::parse(s).unwrap()).unwrap()
    }

    #[test]
    fn nested_optional_example_is_not_well_designed() {
        let r = report("((?X name paul) OPT ((?Y name george) OPT (?X email ?Z)))");
        assert!(!r.is_well_designed);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].variable, Variable::new("X"));
        assert_eq!(r.violations[0].location, PatternPath(vec![Step::Right]));
    }

    #[test]
    fn left_nested_optionals_are_well_designed() {
        assert!(report("(((?A name ?N) OPT (?A email ?E)) OPT (?A webPage ?W))").is_well_designed);
        assert!(report("(?X p ?Y)").is_well_designed);
    }

    #[test]
    fn and_with_optional_on_the_left() {
        assert!(!report("(((?Y name george) OPT (?X email ?Z)) AND (?X name paul))").is_well_designed);
        assert!(report("(((?X name ?Y) OPT (?X email ?E)) AND (?X phone \"888-4537\"))").is_well_designed);
    }

    #[test]
    fn filter_occurrences_count() {
        assert!(report("(((?X p ?Y) OPT (?Y q ?Z)) FILTER bound(?Y))").is_well_designed);
        let r = report("(((?X p ?Y) OPT (?Y q ?Z)) FILTER bound(?Z))");
        assert!(!r.is_well_designed);
        let r = report("((((?X p ?Y) OPT (?W q ?Z)) AND (?X r ?V)) FILTER ?Z = ?V)");
        assert!(!r.is_well_designed);
        assert_eq!(r.violations[0].variable, Variable::new("Z"));
    }

    #[test]
    fn union_is_rejected() {
        let p = GraphPattern::parse("((?X p ?Y) UNION (?X q ?Y))").unwrap();
        assert_eq!(is_well_designed(&p), Err(RewriteError::UnionPresent));
    }

    #[test]
    fn report_lists_location() {
        let text = report("((?X name paul) OPT ((?Y name george) OPT (?X email ?Z)))").to_string();
        assert!(text.starts_with("well designed: no"));
        assert!(text.contains("at root.right: ?X"));
    }
}
