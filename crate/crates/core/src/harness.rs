//! SAT-CNF and QBF reductions to pattern membership, with brute-force
//! oracles and instance generators.
//!
//! Both reductions use fixed datasets over the IRIs `a`, `b`, `c`, `tv`,
//! `true`, `false`, `0` and `1`. A formula is satisfiable (respectively
//! valid) iff the target mapping belongs to the evaluation of the built
//! pattern.

use rand::Rng;

use crate::algebra::{BinaryOp, Condition, GraphPattern, TriplePattern, Variable};
use crate::eval::{membership, EvalError};
use crate::mappings::Mapping;
use crate::rdf::{Dataset, Term, Triple};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormulaError {
    #[error("formula needs at least one variable")]
    NoVariables,
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("literal {literal} in clause {clause} is out of range 1..={max}")]
    LiteralOutOfRange { clause: usize, literal: i32, max: usize },
    #[error("QBF needs at least one quantifier block")]
    NoBlocks,
    #[error("{what} has {got} variables, above the configured cap of {cap}")]
    CapExceeded { what: &'static str, got: usize, cap: usize },
}

/// Conjunction of clauses; a clause is a disjunction of signed 1-based
/// variable indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i32>>) -> Result<Self, FormulaError> {
        if num_vars == 0 {
            return Err(FormulaError::NoVariables);
        }
        for (i, clause) in clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(FormulaError::EmptyClause(i + 1));
            }
            if let Some(&l) = clause
                .iter()
                .find(|l| **l == 0 || l.unsigned_abs() as usize > num_vars)
            {
                return Err(FormulaError::LiteralOutOfRange {
                    clause: i + 1,
                    literal: l,
                    max: num_vars,
                });
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// `assignment[i]` is the value of variable `i + 1`.
    pub fn is_satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0))
        })
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                out.push_str(&format!("{l} "));
            }
            out.push_str("0\n");
        }
        out
    }
}

/// `∀x1 ∃y1 … ∀xm ∃ym ψ`. In the matrix, variable `2i - 1` is `xi` and
/// variable `2i` is `yi`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QbfFormula {
    num_blocks: usize,
    matrix: CnfFormula,
}

impl QbfFormula {
    pub fn new(num_blocks: usize, clauses: Vec<Vec<i32>>) -> Result<Self, FormulaError> {
        if num_blocks == 0 {
            return Err(FormulaError::NoBlocks);
        }
        Ok(QbfFormula {
            num_blocks,
            matrix: CnfFormula::new(2 * num_blocks, clauses)?,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn matrix(&self) -> &CnfFormula {
        &self.matrix
    }

    pub fn to_dimacs(&self) -> String {
        let cnf = self.matrix.to_dimacs();
        let (header, body) = cnf.split_once('\n').expect("header line");
        format!("{header}\nb {}\n{body}", self.num_blocks)
    }
}

/// Sizes above which the brute-force oracles refuse to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_sat_vars: usize,
    pub max_qbf_blocks: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_sat_vars: 24,
            max_qbf_blocks: 6,
        }
    }
}

pub fn brute_force_sat(f: &CnfFormula) -> Result<bool, FormulaError> {
    brute_force_sat_with(f, OracleLimits::default())
}

/// Truth-table search over all `2^n` assignments.
pub fn brute_force_sat_with(f: &CnfFormula, limits: OracleLimits) -> Result<bool, FormulaError> {
    if f.num_vars > limits.max_sat_vars {
        return Err(FormulaError::CapExceeded {
            what: "CNF formula",
            got: f.num_vars,
            cap: limits.max_sat_vars,
        });
    }
    let n = f.num_vars;
    let mut assignment = vec![false; n];
    Ok((0u64..1 << n).any(|bits| {
        for (i, slot) in assignment.iter_mut().enumerate() {
            *slot = bits >> i & 1 == 1;
        }
        f.is_satisfied_by(&assignment)
    }))
}

pub fn brute_force_qbf(f: &QbfFormula) -> Result<bool, FormulaError> {
    brute_force_qbf_with(f, OracleLimits::default())
}

/// Game-tree evaluation of the quantifier prefix.
pub fn brute_force_qbf_with(f: &QbfFormula, limits: OracleLimits) -> Result<bool, FormulaError> {
    if f.num_blocks > limits.max_qbf_blocks {
        return Err(FormulaError::CapExceeded {
            what: "QBF prefix",
            got: f.num_blocks,
            cap: limits.max_qbf_blocks,
        });
    }
    fn play(f: &QbfFormula, assignment: &mut Vec<bool>) -> bool {
        let next = assignment.len();
        if next == f.matrix.num_vars {
            return f.matrix.is_satisfied_by(assignment);
        }
        let universal = next.is_multiple_of(2);
        let outcome = |value: bool, assignment: &mut Vec<bool>| {
            assignment.push(value);
            let r = play(f, assignment);
            assignment.pop();
            r
        };
        if universal {
            outcome(false, assignment) && outcome(true, assignment)
        } else {
            outcome(false, assignment) || outcome(true, assignment)
        }
    }
    Ok(play(f, &mut Vec::with_capacity(f.matrix.num_vars)))
}

/// A membership instance: does `mapping` belong to `⟦pattern⟧_dataset`?
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub dataset: Dataset,
    pub pattern: GraphPattern,
    pub mapping: Mapping,
}

impl Reduction {
    /// Decides the instance with the compositional evaluator.
    pub fn decide(&self) -> Result<bool, EvalError> {
        membership(&self.dataset, &self.pattern, &self.mapping)
    }
}

fn iri(s: &str) -> Term {
    Term::iri(s)
}

fn var(name: String) -> Variable {
    Variable::new(name)
}

fn triple(s: &str, p: &str, v: Variable) -> GraphPattern {
    TriplePattern::new(iri(s), iri(p), v)
        .expect("IRI subject and predicate")
        .into()
}

fn ground(s: &str, p: &str, o: &str) -> Triple {
    Triple::new(iri(s), iri(p), iri(o)).expect("IRI subject and predicate")
}

fn conjunction(parts: Vec<GraphPattern>) -> Option<GraphPattern> {
    GraphPattern::fold(BinaryOp::And, parts)
}

/// `D = {(a, b, c)}`; `?Xi` and `?Yi` stand for `xi` and `¬xi`.
pub fn reduce_sat_cnf(f: &CnfFormula) -> Reduction {
    let x = |i: usize| var(format!("X{i}"));
    let y = |i: usize| var(format!("Y{i}"));
    let n = f.num_vars;
    let lit_var = |l: i32| {
        let i = l.unsigned_abs() as usize;
        if l > 0 {
            x(i)
        } else {
            y(i)
        }
    };

    let p = conjunction(
        (1..=n)
            .map(|i| triple("a", "b", x(i)))
            .chain((1..=n).map(|i| triple("a", "b", y(i))))
            .collect(),
    )
    .expect("at least one variable");

    let clause_patterns: Vec<GraphPattern> = f
        .clauses
        .iter()
        .map(|c| {
            GraphPattern::fold(BinaryOp::Union, c.iter().map(|&l| triple("a", "b", lit_var(l))))
                .expect("clauses are non-empty")
        })
        .collect();

    // A conjunct for xi only makes sense when both ?Xi and ?Yi occur in the
    // clause patterns; otherwise one of them is never bound there and the
    // conjunct is always true.
    let positive = |i: usize| f.clauses.iter().flatten().any(|&l| l == i as i32);
    let negative = |i: usize| f.clauses.iter().flatten().any(|&l| l == -(i as i32));
    let r = (1..=n)
        .filter(|&i| positive(i) && negative(i))
        .map(|i| {
            Condition::or(
                Condition::not(Condition::Bound(x(i))),
                Condition::not(Condition::Bound(y(i))),
            )
        })
        .reduce(Condition::and);

    let pattern = match conjunction(clause_patterns) {
        None => p,
        Some(clauses) => {
            let filtered = match r {
                Some(r) => GraphPattern::filter(clauses, r),
                None => clauses,
            };
            GraphPattern::and(p, filtered)
        }
    };

    let c = iri("c");
    let mapping = (1..=n)
        .flat_map(|i| [(x(i), c.clone()), (y(i), c.clone())])
        .collect();
    Reduction {
        dataset: [ground("a", "b", "c")].into_iter().collect(),
        pattern,
        mapping,
    }
}

/// The fixed four-triple dataset, the `Pi`/`Qi` ladder and
/// `μ = {?B0 → 1}`.
pub fn reduce_qbf(f: &QbfFormula) -> Reduction {
    let m = f.num_blocks;
    let x = |i: usize| var(format!("X{i}"));
    let y = |i: usize| var(format!("Y{i}"));
    let a = |i: usize| var(format!("A{i}"));
    let b = |i: usize| var(format!("B{i}"));

    let p_i = |i: usize| {
        let mut parts: Vec<GraphPattern> = (1..=i).map(|j| triple("a", "tv", x(j))).collect();
        parts.extend((1..i).map(|j| triple("a", "tv", y(j))));
        parts.push(triple("a", "false", a(i - 1)));
        parts.push(triple("a", "true", a(i)));
        conjunction(parts).expect("non-empty")
    };
    let q_i = |i: usize| {
        let mut parts: Vec<GraphPattern> = (1..=i).map(|j| triple("a", "tv", x(j))).collect();
        parts.extend((1..=i).map(|j| triple("a", "tv", y(j))));
        parts.push(triple("a", "false", b(i - 1)));
        parts.push(triple("a", "true", b(i)));
        conjunction(parts).expect("non-empty")
    };

    let matrix_var = |k: usize| if k % 2 == 1 { x(k.div_ceil(2)) } else { y(k / 2) };
    let psi = conjunction(
        f.matrix
            .clauses
            .iter()
            .map(|c| {
                GraphPattern::fold(
                    BinaryOp::Union,
                    c.iter().map(|&l| {
                        let v = matrix_var(l.unsigned_abs() as usize);
                        triple("a", if l > 0 { "true" } else { "false" }, v)
                    }),
                )
                .expect("clauses are non-empty")
            })
            .collect(),
    );

    if let Some(psi) = &psi {
        let control: std::collections::BTreeSet<Variable> =
            (0..=m).flat_map(|i| [a(i), b(i)]).collect();
        assert!(
            psi.variables().is_disjoint(&control),
            "matrix variables collide with ladder variables"
        );
    }

    let last = match psi {
        Some(psi) => GraphPattern::and(q_i(m), psi),
        None => q_i(m),
    };
    let mut ladder = GraphPattern::opt(p_i(m), last);
    for i in (1..m).rev() {
        ladder = GraphPattern::opt(p_i(i), GraphPattern::opt(q_i(i), ladder));
    }
    let pattern = GraphPattern::opt(triple("a", "true", b(0)), ladder);

    Reduction {
        dataset: [
            ground("a", "tv", "0"),
            ground("a", "tv", "1"),
            ground("a", "false", "0"),
            ground("a", "true", "1"),
        ]
        .into_iter()
        .collect(),
        pattern,
        mapping: [(b(0), iri("1"))].into_iter().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimacsInstance {
    Cnf(CnfFormula),
    Qbf(QbfFormula),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct DimacsError {
    pub line: usize,
    pub message: String,
}

/// Reads `p cnf <vars> <clauses>`, an optional `b <m>` line for QBF, and
/// clauses of signed integers each terminated by `0`. Lines starting with
/// `c` are comments.
pub fn parse_dimacs(text: &str) -> Result<DimacsInstance, DimacsError> {
    let err = |line: usize, message: String| DimacsError { line, message };
    let mut header: Option<(usize, usize, usize)> = None;
    let mut blocks: Option<usize> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "p" => {
                if header.is_some() {
                    return Err(err(line_no, "duplicate problem line".into()));
                }
                match fields.as_slice() {
                    ["p", "cnf", v, c] => {
                        let v = v.parse().map_err(|_| err(line_no, format!("bad variable count {v:?}")))?;
                        let c = c.parse().map_err(|_| err(line_no, format!("bad clause count {c:?}")))?;
                        header = Some((v, c, line_no));
                    }
                    _ => return Err(err(line_no, "expected \"p cnf <vars> <clauses>\"".into())),
                }
            }
            "b" => {
                if header.is_none() {
                    return Err(err(line_no, "block line before problem line".into()));
                }
                match fields.as_slice() {
                    ["b", m] => {
                        blocks = Some(m.parse().map_err(|_| err(line_no, format!("bad block count {m:?}")))?);
                    }
                    _ => return Err(err(line_no, "expected \"b <blocks>\"".into())),
                }
            }
            _ => {
                let Some((num_vars, _, _)) = header else {
                    return Err(err(line_no, "clause before problem line".into()));
                };
                for tok in fields {
                    let l: i32 = tok.parse().map_err(|_| err(line_no, format!("bad literal {tok:?}")))?;
                    if l == 0 {
                        if current.is_empty() {
                            return Err(err(line_no, "empty clause".into()));
                        }
                        clauses.push(std::mem::take(&mut current));
                    } else if l.unsigned_abs() as usize > num_vars {
                        return Err(err(line_no, format!("literal {l} exceeds {num_vars} variables")));
                    } else {
                        current.push(l);
                    }
                }
            }
        }
    }
    let Some((num_vars, num_clauses, header_line)) = header else {
        return Err(err(last_line.max(1), "missing problem line".into()));
    };
    if !current.is_empty() {
        return Err(err(last_line, "last clause is not terminated by 0".into()));
    }
    if clauses.len() != num_clauses {
        return Err(err(
            header_line,
            format!("header declares {num_clauses} clauses, found {}", clauses.len()),
        ));
    }
    match blocks {
        Some(m) => {
            if num_vars > 2 * m {
                return Err(err(
                    header_line,
                    format!("{num_vars} variables exceed the 2 * {m} of the quantifier prefix"),
                ));
            }
            QbfFormula::new(m, clauses)
                .map(DimacsInstance::Qbf)
                .map_err(|e| err(header_line, e.to_string()))
        }
        None => CnfFormula::new(num_vars, clauses)
            .map(DimacsInstance::Cnf)
            .map_err(|e| err(header_line, e.to_string())),
    }
}

fn random_clauses<R: Rng + ?Sized>(rng: &mut R, num_vars: usize, max_clauses: usize, max_width: usize) -> Vec<Vec<i32>> {
    let count = rng.gen_range(0..=max_clauses);
    (0..count)
        .map(|_| {
            let width = rng.gen_range(1..=max_width);
            (0..width)
                .map(|_| {
                    let v = rng.gen_range(1..=num_vars) as i32;
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect()
}

/// A random formula with `1..=max_vars` variables and up to `max_clauses`
/// clauses of width `1..=max_width`.
pub fn random_cnf<R: Rng + ?Sized>(rng: &mut R, max_vars: usize, max_clauses: usize, max_width: usize) -> CnfFormula {
    let n = rng.gen_range(1..=max_vars);
    CnfFormula::new(n, random_clauses(rng, n, max_clauses, max_width)).expect("generated in range")
}

pub fn random_qbf<R: Rng + ?Sized>(rng: &mut R, max_blocks: usize, max_clauses: usize, max_width: usize) -> QbfFormula {
    let m = rng.gen_range(1..=max_blocks);
    QbfFormula::new(m, random_clauses(rng, 2 * m, max_clauses, max_width)).expect("generated in range")
}

/// Clauses of one or two distinct variables over `1..=n`, every sign
/// combination.
fn small_clauses(n: usize) -> Vec<Vec<i32>> {
    let n = n as i32;
    let mut out = Vec::new();
    for v in 1..=n {
        out.push(vec![v]);
        out.push(vec![-v]);
    }
    for v in 1..=n {
        for w in v + 1..=n {
            for (sv, sw) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                out.push(vec![sv * v, sw * w]);
            }
        }
    }
    out
}

/// Multisets of up to `k` items from `0..n`, as non-decreasing index lists.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for prefix in &frontier {
            let start = prefix.last().copied().unwrap_or(0);
            for i in start..n {
                let mut p: Vec<usize> = prefix.clone();
                p.push(i);
                next.push(p);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Every formula over `1..=max_vars` variables made of up to `max_clauses`
/// clauses, each clause having one or two distinct variables.
pub fn enumerate_cnf(max_vars: usize, max_clauses: usize) -> Vec<CnfFormula> {
    let mut out = Vec::new();
    for n in 1..=max_vars {
        let universe = small_clauses(n);
        for pick in multisets(universe.len(), max_clauses) {
            let clauses = pick.iter().map(|&i| universe[i].clone()).collect();
            out.push(CnfFormula::new(n, clauses).expect("in range"));
        }
    }
    out
}

/// Every QBF with `1..=max_blocks` blocks whose matrix has up to
/// `max_clauses` clauses of one or two distinct variables.
pub fn enumerate_qbf(max_blocks: usize, max_clauses: usize) -> Vec<QbfFormula> {
    let mut out = Vec::new();
    for m in 1..=max_blocks {
        let universe = small_clauses(2 * m);
        for pick in multisets(universe.len(), max_clauses) {
            let clauses = pick.iter().map(|&i| universe[i].clone()).collect();
            out.push(QbfFormula::new(m, clauses).expect("in range"));
        }
    }
    out
}
