//! `sparql-algebra`: evaluate, analyse, rewrite and reduce graph patterns.
//!
//! Exit codes: 0 ok or equal, 1 semantic difference, 2 parse / validation /
//! I/O error, 3 unsupported input, 4 failed precondition.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparql_algebra::eval::{eval_depth_first_with, DepthFirstOptions};
use sparql_algebra::harness::{
    brute_force_qbf, brute_force_sat, parse_dimacs, random_cnf, random_qbf, reduce_qbf, reduce_sat_cnf,
    DimacsInstance,
};
use sparql_algebra::rewriter::{
    apply_filter_rewrites_with, is_well_designed, to_opt_normal_form, to_union_normal_form, FilterRewriteOptions,
    RewriteError,
};
use sparql_algebra::{
    algebra::validate_filter_scope, eval_compositional, Dataset, EvalError, GraphPattern, MappingSet,
};

const SEED_VAR: &str = "SPARQL_ALGEBRA_SEED";

#[derive(Parser)]
#[command(name = "sparql-algebra", version, about = "Graph-pattern algebra for SPARQL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a pattern over a dataset and print the solution table.
    Eval(EvalArgs),
    /// Report well-designedness and FILTER scope of a pattern.
    Check(PatternArg),
    /// Rewrite a pattern into a normal form.
    Normalize(NormalizeArgs),
    /// Compare the compositional and depth-first answers.
    Diff(DataPatternArgs),
    /// Build a pattern membership instance from a SAT or QBF formula.
    Reduce(ReduceArgs),
}

#[derive(Args)]
struct PatternArg {
    /// File holding the pattern text.
    #[arg(long)]
    pattern: PathBuf,
}

#[derive(Args)]
struct DataPatternArgs {
    /// Dataset file, one `subject predicate object` triple per line.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    pattern: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    io: DataPatternArgs,
    #[arg(long, value_enum, default_value_t = Semantics::Compositional)]
    semantics: Semantics,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Let depth-first evaluation run per UNION normal form branch.
    #[arg(long)]
    allow_union_in_df: bool,
}

#[derive(Args)]
struct NormalizeArgs {
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long, value_enum)]
    form: Form,
    /// With `--form filter`, also split disjunctive conditions into UNION.
    #[arg(long)]
    split_or: bool,
}

#[derive(Args)]
struct ReduceArgs {
    /// DIMACS-like formula file (`p cnf`, optional `b <m>` for QBF).
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    input: Option<PathBuf>,
    /// Generate a random formula seeded from SPARQL_ALGEBRA_SEED.
    #[arg(long)]
    random: bool,
    /// Formula kind for `--random`.
    #[arg(long, value_enum, default_value_t = Kind::Sat)]
    kind: Kind,
    /// Directory receiving dataset.txt, pattern.txt and mapping.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Decide the instance and compare with the brute-force oracle.
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Semantics {
    Compositional,
    #[value(alias = "depth-first")]
    Depthfirst,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Union,
    Opt,
    Filter,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sat,
    Qbf,
}

/// A finished command: text for stdout plus the exit status.
struct Outcome {
    code: u8,
    out: String,
}

impl Outcome {
    fn ok(out: String) -> Self {
        Outcome { code: 0, out }
    }
}

/// An early exit with a message for stderr.
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl std::fmt::Display) -> Failure {
    Failure { code, message: message.to_string() }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

fn load_pattern(path: &Path) -> Result<GraphPattern, Failure> {
    GraphPattern::parse(&read(path)?).map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    Dataset::parse(&read(path)?).map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::UnionInDepthFirst => fail(3, e),
        _ => fail(2, e),
    }
}

fn render(set: &MappingSet, format: Format) -> String {
    match format {
        Format::Table => set.to_table(),
        Format::Structured => format!("{:#}\n", set.to_json()),
    }
}

fn run_eval(args: &EvalArgs) -> Result<Outcome, Failure> {
    let d = load_dataset(&args.io.data)?;
    let p = load_pattern(&args.io.pattern)?;
    let answers = match args.semantics {
        Semantics::Compositional => eval_compositional(&d, &p),
        Semantics::Depthfirst => eval_depth_first_with(
            &d,
            &p,
            DepthFirstOptions { allow_union: args.allow_union_in_df, ..Default::default() },
        ),
    }
    .map_err(eval_failure)?;
    Ok(Outcome::ok(render(&answers, args.format)))
}

fn run_check(args: &PatternArg) -> Result<Outcome, Failure> {
    let p = load_pattern(&args.pattern)?;
    let scope = validate_filter_scope(&p);
    let mut out = String::new();
    let code = match is_well_designed(&p) {
        Ok(report) => {
            out.push_str(&report.to_string());
            if report.is_well_designed { 0 } else { 4 }
        }
        Err(e) => {
            let _ = writeln!(out, "well designed: not applicable ({e})");
            3
        }
    };
    out.push_str(&scope.to_string());
    let code = if scope.is_ok() { code } else { 2 };
    Ok(Outcome { code, out })
}

fn run_normalize(args: &NormalizeArgs) -> Result<Outcome, Failure> {
    let p = load_pattern(&args.pattern)?;
    let scope = validate_filter_scope(&p);
    if !scope.is_ok() {
        return Err(fail(2, scope));
    }
    let mut out = String::new();
    match args.form {
        Form::Union => {
            for branch in to_union_normal_form(&p) {
                let _ = writeln!(out, "{branch}");
            }
        }
        Form::Opt => {
            let nf = to_opt_normal_form(&p).map_err(|e| match e {
                RewriteError::NotWellDesigned(report) => fail(4, report),
                other => fail(4, other),
            })?;
            let _ = writeln!(out, "{}", nf.to_pattern());
        }
        Form::Filter => {
            let opts = FilterRewriteOptions { split_or: args.split_or };
            let _ = writeln!(out, "{}", apply_filter_rewrites_with(&p, opts));
        }
    }
    Ok(Outcome::ok(out))
}

fn run_diff(args: &DataPatternArgs) -> Result<Outcome, Failure> {
    let d = load_dataset(&args.data)?;
    let p = load_pattern(&args.pattern)?;
    if !p.is_union_free() {
        return Err(fail(3, "diff needs a UNION-free pattern"));
    }
    let comp = eval_compositional(&d, &p).map_err(eval_failure)?;
    let df = eval_depth_first_with(&d, &p, DepthFirstOptions::default()).map_err(eval_failure)?;
    let report = is_well_designed(&p).map_err(|e| fail(3, e))?;
    let mut out = report.to_string();
    if comp == df {
        out.push_str("EQUAL\n");
        return Ok(Outcome::ok(out));
    }
    for (label, mine, other) in [("compositional", &comp, &df), ("depth-first", &df, &comp)] {
        let _ = writeln!(out, "only in {label}:");
        for m in mine.iter().filter(|m| !other.contains(m)) {
            let _ = writeln!(out, "  {m}");
        }
    }
    Ok(Outcome { code: 1, out })
}

fn seed_from_env() -> Result<u64, Failure> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| fail(2, format!("{SEED_VAR} must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(0),
    }
}

fn run_reduce(args: &ReduceArgs) -> Result<Outcome, Failure> {
    let instance = match &args.input {
        Some(path) => parse_dimacs(&read(path)?).map_err(|e| fail(2, format!("{}: {e}", path.display())))?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_from_env()?);
            match args.kind {
                Kind::Sat => DimacsInstance::Cnf(random_cnf(&mut rng, 6, 6, 3)),
                Kind::Qbf => DimacsInstance::Qbf(random_qbf(&mut rng, 2, 4, 3)),
            }
        }
    };
    let (reduction, formula_text, oracle) = match &instance {
        DimacsInstance::Cnf(f) => (reduce_sat_cnf(f), f.to_dimacs(), brute_force_sat(f)),
        DimacsInstance::Qbf(f) => (reduce_qbf(f), f.to_dimacs(), brute_force_qbf(f)),
    };
    let dir = &args.out_dir;
    let write = |name: &str, body: String| {
        fs::write(dir.join(name), body).map_err(|e| fail(2, format!("{}: {e}", dir.join(name).display())))
    };
    fs::create_dir_all(dir).map_err(|e| fail(2, format!("{}: {e}", dir.display())))?;
    write("formula.dimacs", formula_text)?;
    write("dataset.txt", reduction.dataset.to_text())?;
    write("pattern.txt", format!("{}\n", reduction.pattern))?;
    write("mapping.json", format!("{:#}\n", reduction.mapping.to_json()))?;
    let mut out = format!(
        "wrote {} triples, a pattern of size {} and mapping {} to {}\n",
        reduction.dataset.len(),
        reduction.pattern.size(),
        reduction.mapping,
        dir.display()
    );
    if !args.check {
        return Ok(Outcome::ok(out));
    }
    let oracle = oracle.map_err(|e| fail(4, e))?;
    let member = reduction.decide().map_err(eval_failure)?;
    let _ = writeln!(out, "oracle: {oracle}\nmembership: {member}");
    Ok(Outcome { code: if oracle == member { 0 } else { 1 }, out })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Eval(a) => run_eval(a),
        Command::Check(a) => run_check(a),
        Command::Normalize(a) => run_normalize(a),
        Command::Diff(a) => run_diff(a),
        Command::Reduce(a) => run_reduce(a),
    };
    match result {
        Ok(o) => {
            print!("{}", o.out);
            ExitCode::from(o.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message.trim_end());
            ExitCode::from(f.code)
        }
    }
}
