//! Partial mappings from variables to terms and the operators over sets of
//! them.
//!
//! Joins and differences hash on the variables shared by each pair of
//! domain classes, so the cost is roughly linear in input plus output
//! instead of quadratic.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::algebra::{TermPattern, TriplePattern, Variable};
use crate::par::Execution;
use crate::rdf::{Term, Triple, TripleError};

/// A partial function from variables to terms. Absence from the domain is
/// what "unbound" means; there is no null marker.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mapping(BTreeMap<Variable, Term>);

impl Mapping {
    /// The mapping with empty domain.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn is_bound(&self, v: &Variable) -> bool {
        self.0.contains_key(v)
    }

    /// Binds `v`, returning the previous value if any.
    pub fn insert(&mut self, v: Variable, t: Term) -> Option<Term> {
        self.0.insert(v, t)
    }

    pub fn domain(&self) -> BTreeSet<Variable> {
        self.0.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> + '_ {
        self.0.iter()
    }

    pub fn is_compatible(&self, other: &Mapping) -> bool {
        compatible(self, other)
    }

    /// `self ∪ other`, assuming compatibility.
    fn merged(&self, other: &Mapping) -> Mapping {
        let (big, small) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = big.clone();
        for (v, t) in small.iter() {
            out.0.entry(v.clone()).or_insert_with(|| t.clone());
        }
        out
    }

    /// Whether every binding of `self` also appears in `other`.
    pub fn is_sub_mapping_of(&self, other: &Mapping) -> bool {
        self.iter().all(|(v, t)| other.get(v) == Some(t))
    }

    /// Restriction to the given variables.
    pub fn restrict(&self, vars: &BTreeSet<Variable>) -> Mapping {
        Mapping(
            self.0
                .iter()
                .filter(|(v, _)| vars.contains(*v))
                .map(|(v, t)| (v.clone(), t.clone()))
                .collect(),
        )
    }

    /// Parses a JSON object of the structured output format, e.g.
    /// `{"?X": "a", "?Y": "\"lit\""}`.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        let obj = value.as_object().ok_or("expected a JSON object")?;
        let mut m = Mapping::empty();
        for (k, v) in obj {
            let name = k
                .strip_prefix('?')
                .filter(|n| !n.is_empty())
                .ok_or_else(|| format!("key {k:?} is not a variable"))?;
            let text = v
                .as_str()
                .ok_or_else(|| format!("value for {k} is not a string"))?;
            m.insert(Variable::new(name), parse_term_text(text)?);
        }
        Ok(m)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.iter()
                .map(|(v, t)| (v.to_string(), serde_json::Value::String(t.to_string())))
                .collect(),
        )
    }
}

fn parse_term_text(text: &str) -> Result<Term, String> {
    if let Some(inner) = text.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
        if inner.is_empty() || inner.contains('"') {
            return Err(format!("bad literal {text:?}"));
        }
        Ok(Term::literal(inner))
    } else if crate::syntax::is_bare_token(text) {
        Ok(Term::iri(text))
    } else {
        Err(format!("bad term {text:?}"))
    }
}

impl FromIterator<(Variable, Term)> for Mapping {
    fn from_iter<I: IntoIterator<Item = (Variable, Term)>>(iter: I) -> Self {
        Mapping(iter.into_iter().collect())
    }
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} -> {t}")?;
        }
        f.write_str("}")
    }
}

/// A set of mappings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MappingSet(BTreeSet<Mapping>);

impl MappingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// `{μ∅}`, the identity of join.
    pub fn unit() -> Self {
        MappingSet([Mapping::empty()].into_iter().collect())
    }

    pub fn insert(&mut self, m: Mapping) -> bool {
        self.0.insert(m)
    }

    pub fn contains(&self, m: &Mapping) -> bool {
        self.0.contains(m)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mapping> + '_ {
        self.0.iter()
    }

    pub fn is_subset(&self, other: &MappingSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Members satisfying `keep`.
    pub fn filter(&self, keep: impl Fn(&Mapping) -> bool) -> MappingSet {
        self.iter().filter(|m| keep(m)).cloned().collect()
    }

    /// Union of all domains, sorted.
    pub fn variables(&self) -> BTreeSet<Variable> {
        self.iter().flat_map(|m| m.0.keys().cloned()).collect()
    }

    /// Tab-separated table: a header of sorted `?var` names, then one sorted
    /// row per mapping with an empty cell where a variable is unbound.
    pub fn to_table(&self) -> String {
        let vars: Vec<Variable> = self.variables().into_iter().collect();
        let mut rows: Vec<Vec<String>> = self
            .iter()
            .map(|m| {
                vars.iter()
                    .map(|v| m.get(v).map(|t| t.to_string()).unwrap_or_default())
                    .collect()
            })
            .collect();
        rows.sort();
        let mut out = vars.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\t");
        out.push('\n');
        for row in rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    /// JSON array of `{"?var": "term"}` objects in set order.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.iter().map(Mapping::to_json).collect())
    }
}

impl FromIterator<Mapping> for MappingSet {
    fn from_iter<I: IntoIterator<Item = Mapping>>(iter: I) -> Self {
        MappingSet(iter.into_iter().collect())
    }
}

impl IntoIterator for MappingSet {
    type Item = Mapping;
    type IntoIter = std::collections::btree_set::IntoIter<Mapping>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<'a> IntoIterator for &'a MappingSet {
    type Item = &'a Mapping;
    type IntoIter = std::collections::btree_set::Iter<'a, Mapping>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for MappingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            m.fmt(f)?;
        }
        f.write_str("}")
    }
}

/// Whether the two mappings agree on every shared variable.
pub fn compatible(m1: &Mapping, m2: &Mapping) -> bool {
    let (small, big) = if m1.len() <= m2.len() { (m1, m2) } else { (m2, m1) };
    small
        .iter()
        .all(|(v, t)| big.get(v).is_none_or(|u| u == t))
}

/// Mappings grouped by domain, so each group shares one key layout.
fn group_by_domain(set: &MappingSet) -> Vec<(Vec<Variable>, Vec<&Mapping>)> {
    let mut groups: BTreeMap<Vec<Variable>, Vec<&Mapping>> = BTreeMap::new();
    for m in set.iter() {
        groups.entry(m.0.keys().cloned().collect()).or_default().push(m);
    }
    groups.into_iter().collect()
}

fn shared(a: &[Variable], b: &[Variable]) -> Vec<Variable> {
    a.iter().filter(|v| b.binary_search(v).is_ok()).cloned().collect()
}

fn key<'m>(m: &'m Mapping, vars: &[Variable]) -> Vec<&'m Term> {
    vars.iter().map(|v| &m.0[v]).collect()
}

/// Rows of one domain group keyed by their values on the shared variables.
type Index<'m> = HashMap<Vec<&'m Term>, Vec<&'m Mapping>>;

fn index<'m>(group: &[&'m Mapping], vars: &[Variable]) -> Index<'m> {
    let mut idx: HashMap<Vec<&Term>, Vec<&Mapping>> = HashMap::new();
    for m in group {
        idx.entry(key(m, vars)).or_default().push(m);
    }
    idx
}

pub fn join(o1: &MappingSet, o2: &MappingSet) -> MappingSet {
    join_with(o1, o2, Execution::default())
}

/// `{ μ1 ∪ μ2 | μ1 ∈ o1, μ2 ∈ o2, μ1 ~ μ2 }`.
pub fn join_with(o1: &MappingSet, o2: &MappingSet, exec: Execution) -> MappingSet {
    if o1.is_empty() || o2.is_empty() {
        return MappingSet::new();
    }
    let g1 = group_by_domain(o1);
    let g2 = group_by_domain(o2);
    let mut out = BTreeSet::new();
    for (d1, ms1) in &g1 {
        for (d2, ms2) in &g2 {
            let vars = shared(d1, d2);
            let idx = index(ms2, &vars);
            let probe = |m: &&Mapping| -> Vec<Mapping> {
                idx.get(&key(m, &vars))
                    .map(|hits| hits.iter().map(|h| m.merged(h)).collect())
                    .unwrap_or_default()
            };
            if exec.use_parallel_for(ms1.len() * ms2.len()) {
                out.extend(exec.map(ms1, probe).into_iter().flatten());
            } else {
                out.extend(ms1.iter().flat_map(probe));
            }
        }
    }
    MappingSet(out)
}

pub fn union(o1: &MappingSet, o2: &MappingSet) -> MappingSet {
    MappingSet(o1.0.union(&o2.0).cloned().collect())
}

pub fn difference(o1: &MappingSet, o2: &MappingSet) -> MappingSet {
    difference_with(o1, o2, Execution::default())
}

/// Members of `o1` compatible with no member of `o2`.
pub fn difference_with(o1: &MappingSet, o2: &MappingSet, exec: Execution) -> MappingSet {
    if o2.is_empty() {
        return o1.clone();
    }
    let g2 = group_by_domain(o2);
    let mut out = BTreeSet::new();
    for (d1, ms1) in group_by_domain(o1) {
        let indexes: Vec<(Vec<Variable>, Index)> = g2
            .iter()
            .map(|(d2, ms2)| {
                let vars = shared(&d1, d2);
                let idx = index(ms2, &vars);
                (vars, idx)
            })
            .collect();
        let survives = |m: &&Mapping| -> bool {
            indexes
                .iter()
                .all(|(vars, idx)| !idx.contains_key(&key(m, vars)))
        };
        if exec.use_parallel_for(ms1.len() * indexes.len()) {
            let keep = exec.map(&ms1, survives);
            out.extend(ms1.iter().zip(keep).filter(|(_, k)| *k).map(|(m, _)| (*m).clone()));
        } else {
            out.extend(ms1.iter().filter(|m| survives(m)).map(|m| (*m).clone()));
        }
    }
    MappingSet(out)
}

pub fn left_outer_join(o1: &MappingSet, o2: &MappingSet) -> MappingSet {
    left_outer_join_with(o1, o2, Execution::default())
}

/// `(o1 ⋈ o2) ∪ (o1 ∖ o2)`.
pub fn left_outer_join_with(o1: &MappingSet, o2: &MappingSet, exec: Execution) -> MappingSet {
    let (joined, rest) = exec.join(
        || join_with(o1, o2, exec),
        || difference_with(o1, o2, exec),
    );
    let mut out = joined.0;
    out.extend(rest.0);
    MappingSet(out)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("variable {0} is unbound")]
    Unbound(Variable),
    #[error("instantiated triple is not valid RDF: {0}")]
    InvalidTriple(TripleError),
}

/// `μ(t)`: replaces every variable of `t` by its binding.
pub fn apply_mapping(m: &Mapping, t: &TriplePattern) -> Result<Triple, ApplyError> {
    let ground = |p: &TermPattern| match p {
        TermPattern::Term(term) => Ok(term.clone()),
        TermPattern::Var(v) => m.get(v).cloned().ok_or_else(|| ApplyError::Unbound(v.clone())),
    };
    Triple::new(ground(t.subject())?, ground(t.predicate())?, ground(t.object())?)
        .map_err(ApplyError::InvalidTriple)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(pairs: &[(&str, &str)]) -> Mapping {
        pairs
            .iter()
            .map(|(v, t)| (Variable::new(*v), Term::iri(*t)))
            .collect()
    }

    fn set(ms: &[Mapping]) -> MappingSet {
        ms.iter().cloned().collect()
    }

    #[test]
    fn compatibility_cases() {
        assert!(compatible(&m(&[("X", "a")]), &m(&[("Y", "b")])));
        assert!(compatible(&Mapping::empty(), &m(&[("X", "a")])));
        assert!(!compatible(&m(&[("X", "a")]), &m(&[("X", "b")])));
    }

    #[test]
    fn join_cases() {
        let x_a = set(&[m(&[("X", "a")])]);
        assert_eq!(
            join(&x_a, &set(&[m(&[("Y", "b")])])),
            set(&[m(&[("X", "a"), ("Y", "b")])])
        );
        assert!(join(&x_a, &set(&[m(&[("X", "b")])])).is_empty());
        assert_eq!(join(&MappingSet::unit(), &x_a), x_a);
        assert!(join(&MappingSet::new(), &x_a).is_empty());
    }

    #[test]
    fn union_cases() {
        let x_a = set(&[m(&[("X", "a")])]);
        assert_eq!(union(&x_a, &set(&[m(&[("Y", "b")])])).len(), 2);
        assert_eq!(union(&x_a, &MappingSet::new()), x_a);
        assert_eq!(union(&x_a, &x_a).len(), 1);
    }

    #[test]
    fn difference_cases() {
        let x_a = set(&[m(&[("X", "a")])]);
        assert_eq!(difference(&x_a, &set(&[m(&[("X", "b")])])), x_a);
        assert!(difference(&x_a, &set(&[m(&[("Y", "b")])])).is_empty());
        assert_eq!(difference(&x_a, &MappingSet::new()), x_a);
    }

    #[test]
    fn left_outer_join_cases() {
        let x_a = set(&[m(&[("X", "a")])]);
        assert_eq!(left_outer_join(&x_a, &MappingSet::new()), x_a);
        let ext = set(&[m(&[("X", "a"), ("Y", "b")])]);
        assert_eq!(left_outer_join(&x_a, &ext), ext);
    }

    #[test]
    fn apply_mapping_cases() {
        let t = TriplePattern::new(Variable::new("A"), Term::iri("name"), Term::iri("paul")).unwrap();
        let got = apply_mapping(&m(&[("A", "B1")]), &t).unwrap();
        assert_eq!(got.to_string(), "B1 name paul");
        let ground = TriplePattern::new(Term::iri("a"), Term::iri("b"), Term::iri("c")).unwrap();
        assert_eq!(apply_mapping(&m(&[("Z", "q")]), &ground).unwrap().to_string(), "a b c");
        let open = TriplePattern::new(Variable::new("X"), Term::iri("p"), Term::iri("o")).unwrap();
        assert_eq!(
            apply_mapping(&Mapping::empty(), &open),
            Err(ApplyError::Unbound(Variable::new("X")))
        );
    }

    #[test]
    fn literal_bound_to_subject_is_rejected() {
        let t = TriplePattern::new(Variable::new("S"), Term::iri("p"), Term::iri("o")).unwrap();
        let mu: Mapping = [(Variable::new("S"), Term::literal("x"))].into_iter().collect();
        assert!(matches!(apply_mapping(&mu, &t), Err(ApplyError::InvalidTriple(_))));
    }

    #[test]
    fn table_and_json_rendering() {
        let s = set(&[
            m(&[("A", "B4"), ("E", "ringo@acd.edu"), ("W", "www.starr.edu")]),
            m(&[("A", "B2"), ("E", "john@acd.edu")]),
        ]);
        assert_eq!(
            s.to_table(),
            "?A\t?E\t?W\nB2\tjohn@acd.edu\t\nB4\tringo@acd.edu\twww.starr.edu\n"
        );
        let json = s.to_json();
        assert_eq!(json[0]["?A"], "B2");
        assert!(json[0].get("?W").is_none());
        let back: MappingSet = json
            .as_array()
            .unwrap()
            .iter()
            .map(|v| Mapping::from_json(v).unwrap())
            .collect();
        assert_eq!(back, s);
    }

    #[test]
    fn json_keeps_literal_quotes() {
        let mu: Mapping = [(Variable::new("P"), Term::literal("777-3426"))].into_iter().collect();
        let v = mu.to_json();
        assert_eq!(v["?P"], "\"777-3426\"");
        assert_eq!(Mapping::from_json(&v).unwrap(), mu);
    }

    fn naive_join(o1: &MappingSet, o2: &MappingSet) -> MappingSet {
        let mut out = MappingSet::new();
        for a in o1 {
            for b in o2 {
                if compatible(a, b) {
                    let mut c = a.clone();
                    for (v, t) in b.iter() {
                        c.insert(v.clone(), t.clone());
                    }
                    out.insert(c);
                }
            }
        }
        out
    }

    fn naive_difference(o1: &MappingSet, o2: &MappingSet) -> MappingSet {
        o1.filter(|a| o2.iter().all(|b| !compatible(a, b)))
    }

    fn arb_mapping() -> impl Strategy<Value = Mapping> {
        prop::collection::btree_map(
            prop::sample::select(vec!["X", "Y", "Z", "W"]),
            prop::sample::select(vec!["a", "b", "c"]),
            0..4,
        )
        .prop_map(|bm| bm.into_iter().map(|(v, t)| (Variable::new(v), Term::iri(t))).collect())
    }

    fn arb_set() -> impl Strategy<Value = MappingSet> {
        prop::collection::vec(arb_mapping(), 0..12).prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn join_matches_nested_loop(a in arb_set(), b in arb_set()) {
            prop_assert_eq!(join_with(&a, &b, Execution::Sequential), naive_join(&a, &b));
            prop_assert_eq!(join_with(&a, &b, Execution::Parallel), naive_join(&a, &b));
        }

        #[test]
        fn difference_matches_nested_loop(a in arb_set(), b in arb_set()) {
            prop_assert_eq!(difference(&a, &b), naive_difference(&a, &b));
        }

        #[test]
        fn join_is_commutative_and_associative(a in arb_set(), b in arb_set(), c in arb_set()) {
            prop_assert_eq!(join(&a, &b), join(&b, &a));
            prop_assert_eq!(join(&join(&a, &b), &c), join(&a, &join(&b, &c)));
        }

        #[test]
        fn unit_and_annihilator(a in arb_set()) {
            prop_assert_eq!(join(&MappingSet::unit(), &a), a.clone());
            prop_assert_eq!(join(&a, &MappingSet::unit()), a.clone());
            prop_assert!(join(&a, &MappingSet::new()).is_empty());
        }

        #[test]
        fn difference_through_join(a in arb_set(), b in arb_set()) {
            prop_assert_eq!(difference(&a, &b), difference(&a, &join(&a, &b)));
        }

        #[test]
        fn join_difference_containment(a in arb_set(), b in arb_set(), c in arb_set()) {
            let lhs = join(&a, &difference(&b, &c));
            let rhs = difference(&join(&a, &b), &c);
            prop_assert!(lhs.is_subset(&rhs));
        }

        #[test]
        fn left_outer_join_extends_left(a in arb_set(), b in arb_set()) {
            let out = left_outer_join(&a, &b);
            for mu in &out {
                prop_assert!(a.iter().any(|m1| m1.is_sub_mapping_of(mu)));
            }
            prop_assert_eq!(out, union(&naive_join(&a, &b), &naive_difference(&a, &b)));
        }
    }
}
