//! Equivalence-preserving rewrites: UNION normal form, well-designedness,
//! the OPT normal form and the FILTER identities.

mod filter;
mod opt_nf;
mod union_nf;
mod well_designed;

pub use filter::{apply_filter_rewrites, apply_filter_rewrites_with, FilterRewriteOptions};
pub use opt_nf::{
    opt_in_and_measure, to_opt_normal_form, to_opt_normal_form_with, OptNormalForm, Strategy,
};
pub use union_nf::{
    to_union_normal_form, to_union_normal_form_stepwise, union_branch_bound, union_of,
};
pub use well_designed::{is_well_designed, WdViolation, WellDesignedReport};

use crate::algebra::GraphPattern;
use crate::eval::{eval_compositional, EvalError};
use crate::rdf::Dataset;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("pattern contains UNION")]
    UnionPresent,
    #[error("pattern contains FILTER")]
    FilterPresent,
    #[error("pattern is not well designed\n{0}")]
    NotWellDesigned(WellDesignedReport),
}

/// Whether `⟦p1⟧_D = ⟦p2⟧_D` on this one dataset.
pub fn equivalent_on(p1: &GraphPattern, p2: &GraphPattern, d: &Dataset) -> Result<bool, EvalError> {
    Ok(eval_compositional(d, p1)? == eval_compositional(d, p2)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::Dataset;

    fn example_data() -> Dataset {
        Dataset::parse(
            "B1 name paul\nB1 phone \"777-3426\"\nB2 name john\nB2 email john@acd.edu\n\
             B3 name george\nB3 webPage www.george.edu\nB4 name ringo\nB4 email ringo@acd.edu\n\
             B4 webPage www.starr.edu\nB4 phone \"888-4537\"",
        )
        .unwrap()
    }

    #[test]
    fn equivalent_on_examples() {
        let d = example_data();
        let p4 = GraphPattern::parse("((?A name ?N) AND ((?A email ?E) UNION (?A webPage ?W)))").unwrap();
        let unf = union_of(to_union_normal_form(&p4)).unwrap();
        assert!(equivalent_on(&p4, &unf, &d).unwrap());
        let p2 = GraphPattern::parse("(((?A name ?N) OPT (?A email ?E)) OPT (?A webPage ?W))").unwrap();
        let p3 = GraphPattern::parse("((?A name ?N) OPT ((?A email ?E) OPT (?A webPage ?W)))").unwrap();
        assert!(!equivalent_on(&p2, &p3, &d).unwrap());
        assert!(equivalent_on(&p2, &p2, &d).unwrap());
    }
}
