//! `rdfplus`: check RDF⁺ formulas, export solver scripts, build witnesses,
//! run the built-in corpus and sample elastic functions.

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, ValueEnum};
use num_bigint::BigInt;
use serde_json::{json, Value};

use rdf_core::ast::{Formula, Rat};
use rdf_core::check::{branch_script, check, cleared, CheckConfig, CheckError, CheckReport, ModelCheck, Outcome};
use rdf_core::corpus::{negate_conclusion, scop177_concave, CORPUS};
use rdf_core::elastic::{eval_elastic, eval_elastic_deriv, make_defined};
use rdf_core::elim::{pipeline, Mode as Target, PipelineConfig};
use rdf_core::parser::parse_formula;
use rdf_core::smt::{SolverConfig, Verdict};
use rdf_core::witness::{search_alpha, WitnessError};

const EXIT_FAILURE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    CheckValid,
    CheckSat,
    EmitSmt,
    Witness,
    Corpus,
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "rdfplus", version, about = "Decide RDF⁺ formulas over real C¹ functions")]
struct Cli {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Formula file, `-` for stdin, or the formula text itself.
    input: Option<String>,
    /// Solver command line (default: $RDF_SOLVER_CMD, else `z3 -in`).
    #[arg(long)]
    solver: Option<String>,
    /// Per-branch solver timeout in seconds.
    #[arg(long, default_value_t = 30.0, value_parser = positive_seconds)]
    timeout: f64,
    /// Grid points per segment when verifying witnesses.
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Branches solved in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// Largest number of domain variables ordered in one conjunct.
    #[arg(long, default_value_t = 8)]
    branch_cap: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// emit-smt: directory receiving one `.smt2` file per branch.
    #[arg(long, default_value = "smt")]
    out_dir: PathBuf,
    /// emit-smt: encode the formula itself instead of its negation.
    #[arg(long)]
    sat: bool,
    /// corpus: run only these entries.
    #[arg(long = "only")]
    only: Vec<String>,
    /// corpus: negate the conclusion of these entries.
    #[arg(long = "negate")]
    negate: Vec<String>,
    /// corpus: weaken the `Linear` premise of scop177 to `Concave`.
    #[arg(long)]
    weaken_scop177: bool,
    /// sample: α.
    #[arg(long, value_parser = parse_rat, allow_hyphen_values = true)]
    alpha: Option<Rat>,
    /// sample: slope at 0.
    #[arg(long, value_parser = parse_rat, allow_hyphen_values = true)]
    theta1: Option<Rat>,
    /// sample: slope at 1.
    #[arg(long, value_parser = parse_rat, allow_hyphen_values = true)]
    theta2: Option<Rat>,
    /// sample: number of subintervals; rows are written at `k/n`, `k = 0..=n`.
    #[arg(long, default_value_t = 512)]
    n: usize,
}

fn positive_seconds(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
        _ => Err(format!("`{s}` is not a positive number of seconds")),
    }
}

/// Integers, `p/q` and decimals such as `-0.25`.
fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if let Ok(q) = s.parse::<Rat>() {
        return Ok(q);
    }
    let bad = || format!("`{s}` is not a rational number");
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (ip, fp) = body.split_once('.').ok_or_else(bad)?;
    if (ip.is_empty() && fp.is_empty()) || !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{ip}{fp}").parse().map_err(|_| bad())?;
    let q = Rat::new(digits, BigInt::from(10).pow(fp.len() as u32));
    Ok(if neg { -q } else { q })
}

/// Failure carrying its exit status.
struct Fail(u8, String);

impl From<CheckError> for Fail {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Solver(_) => Fail(EXIT_SOLVER, e.to_string()),
            other => Fail(EXIT_FAILURE, other.to_string()),
        }
    }
}

fn read_formula(input: Option<&str>) -> Result<Formula, Fail> {
    let text = match input {
        None => return Err(Fail(EXIT_PARSE, "no formula given".into())),
        Some("-") => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| Fail(EXIT_PARSE, e.to_string()))?;
            s
        }
        Some(p) if std::path::Path::new(p).is_file() => {
            std::fs::read_to_string(p).map_err(|e| Fail(EXIT_PARSE, format!("{p}: {e}")))?
        }
        Some(inline) => inline.to_string(),
    };
    parse_formula(&text).map_err(|e| Fail(EXIT_PARSE, format!("parse error: {e}")))
}

fn config(cli: &Cli) -> CheckConfig {
    let mut solver = SolverConfig::from_env(cli.solver.as_deref());
    solver.timeout = Duration::from_secs_f64(cli.timeout);
    let mut cfg = CheckConfig { pipeline: PipelineConfig { branch_cap: cli.branch_cap }, solver, ..Default::default() };
    if let Some(j) = cli.jobs {
        cfg.jobs = j.max(1);
    }
    cfg
}

fn model_json(m: &rdf_core::tarski::NumericModel) -> Value {
    serde_json::to_value(m).unwrap_or(Value::Null)
}

fn report_json(r: &CheckReport) -> Value {
    let branches: Vec<Value> = r
        .branches
        .iter()
        .map(|b| {
            let mut v = json!({
                "index": b.terminal.index,
                "chain": b.terminal.branch.chain,
                "verdict": b.verdict.label(),
            });
            match &b.verdict {
                Verdict::Sat(m) => {
                    v["model"] = model_json(m);
                    v["model_check"] = json!(b.model_check);
                }
                Verdict::Unknown(why) => v["reason"] = json!(why),
                Verdict::Unsat => {}
            }
            v
        })
        .collect();
    json!({
        "mode": match r.mode { Target::Validity => "validity", Target::Satisfiability => "satisfiability" },
        "outcome": r.outcome.label(),
        "branches": branches,
    })
}

fn print_report(r: &CheckReport) {
    let count = |l: &str| r.branches.iter().filter(|b| b.verdict.label() == l).count();
    println!(
        "{} ({} branches: {} unsat, {} sat, {} unknown)",
        r.outcome.label(),
        r.branches.len(),
        count("unsat"),
        count("sat"),
        count("unknown")
    );
    for b in &r.branches {
        match &b.verdict {
            Verdict::Sat(m) => {
                let check = b.model_check.map(|c| format!("{c:?}")).unwrap_or_default();
                println!("branch {}: sat ({check}), chain {}", b.terminal.index, b.terminal.branch.chain.join(" < "));
                for (k, v) in &m.assignment {
                    println!("  {k} = {v}");
                }
            }
            Verdict::Unknown(why) => println!("branch {}: unknown ({why})", b.terminal.index),
            Verdict::Unsat => {}
        }
    }
}

fn cmd_check(cli: &Cli, target: Target) -> Result<(), Fail> {
    let f = read_formula(cli.input.as_deref())?;
    let r = check(&f, target, &config(cli))?;
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report_json(&r)).unwrap()),
        Format::Text => print_report(&r),
    }
    match r.outcome {
        Outcome::Valid | Outcome::Sat | Outcome::Unsat => Ok(()),
        Outcome::Invalid => Err(Fail(EXIT_FAILURE, String::new())),
        Outcome::Unknown => Err(Fail(EXIT_FAILURE, "some branch is unknown".into())),
    }
}

fn cmd_emit(cli: &Cli) -> Result<(), Fail> {
    let f = read_formula(cli.input.as_deref())?;
    let target = if cli.sat { Target::Satisfiability } else { Target::Validity };
    let terminals = pipeline(&f, target, &PipelineConfig { branch_cap: cli.branch_cap })
        .map_err(|e| Fail(EXIT_FAILURE, e.to_string()))?;
    let io = |e: std::io::Error| Fail(EXIT_FAILURE, format!("{}: {e}", cli.out_dir.display()));
    std::fs::create_dir_all(&cli.out_dir).map_err(io)?;
    let mut files = Vec::new();
    for t in &terminals {
        let c = cleared(t).map_err(|e| Fail(EXIT_FAILURE, e.to_string()))?;
        let path = cli.out_dir.join(format!("branch_{:03}.smt2", t.index));
        std::fs::write(&path, branch_script(t, &c)).map_err(io)?;
        files.push(path.display().to_string());
    }
    match cli.format {
        Format::Json => println!("{}", json!({ "branches": terminals.len(), "files": files })),
        Format::Text => {
            for p in &files {
                println!("{p}");
            }
        }
    }
    Ok(())
}

fn cmd_witness(cli: &Cli) -> Result<(), Fail> {
    let f = read_formula(cli.input.as_deref())?;
    let r = check(&f, Target::Satisfiability, &config(cli))?;
    let usable = |b: &&rdf_core::check::BranchResult| {
        matches!(b.model_check, Some(ModelCheck::Exact | ModelCheck::ApproximateAccepted))
    };
    // a rationalized model that fails re-verification still gets a
    // best-effort witness, flagged as approximate
    let Some(b) = r.branches.iter().find(usable).or_else(|| r.first_sat()) else {
        return Err(Fail(EXIT_FAILURE, "no model".into()));
    };
    let Verdict::Sat(model) = &b.verdict else { unreachable!() };
    let (search, failure) = match search_alpha(&b.terminal.branch, model, cli.grid) {
        Ok(s) => (Some(s), None),
        Err(WitnessError::AlphaSearchExhausted { alpha, iterations, report }) => {
            (None, Some((alpha, iterations, *report)))
        }
        Err(e) => return Err(Fail(EXIT_FAILURE, e.to_string())),
    };
    let out = match (&search, &failure) {
        (Some(s), _) => json!({
            "branch": b.terminal.index,
            "alpha": s.alpha.to_string(),
            "iterations": s.iterations,
            "approximate": s.report.approximate,
            "model_check": b.model_check,
            "model": model_json(model),
            "witnesses": s.witnesses,
            "report": s.report,
        }),
        (None, Some((alpha, iterations, report))) => json!({
            "branch": b.terminal.index,
            "alpha": alpha.to_string(),
            "iterations": iterations,
            "approximate": report.approximate,
            "model_check": b.model_check,
            "model": model_json(model),
            "report": report,
        }),
        _ => unreachable!(),
    };
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&out).unwrap()),
        Format::Text => {
            let report = search.as_ref().map(|s| &s.report).or(failure.as_ref().map(|f| &f.2)).unwrap();
            println!("branch {}: alpha = {}, {} iteration(s)", out["branch"], out["alpha"].as_str().unwrap(), out["iterations"]);
            if b.model_check == Some(ModelCheck::ApproximateRejected) {
                println!("approximate model failed exact re-verification: no guarantees");
            } else if report.approximate {
                println!("model is approximate: strict checks use a margin");
            }
            for c in &report.checks {
                let mark = if c.pass { "pass" } else { "FAIL" };
                let note = if c.note.is_empty() { String::new() } else { format!(" {}", c.note) };
                println!("  {mark}  {}  (margin {:e}){note}", c.literal, c.worst_margin + 0.0);
            }
            println!("stitch residual {:e}", report.stitch_residual);
            if let Some(s) = &search {
                println!("{}", serde_json::to_string_pretty(&s.witnesses).unwrap());
            }
        }
    }
    match failure {
        None => Ok(()),
        Some((_, n, _)) => Err(Fail(EXIT_FAILURE, format!("alpha search exhausted after {n} tries"))),
    }
}

fn cmd_corpus(cli: &Cli) -> Result<(), Fail> {
    let cfg = config(cli);
    for n in cli.only.iter().chain(&cli.negate) {
        if !CORPUS.iter().any(|e| e.name == n) {
            return Err(Fail(EXIT_PARSE, format!("unknown corpus entry `{n}`")));
        }
    }
    let mut rows = Vec::new();
    let mut deviations = 0;
    for e in CORPUS.iter().filter(|e| cli.only.is_empty() || cli.only.iter().any(|n| n == e.name)) {
        let mut f = e.formula().map_err(|err| Fail(EXIT_PARSE, format!("{}: {err}", e.name)))?;
        let mut label = e.name.to_string();
        if cli.weaken_scop177 && e.name == "scop177" {
            f = scop177_concave();
            label.push_str(" (Concave premise)");
        }
        if cli.negate.iter().any(|n| n == e.name) {
            f = negate_conclusion(&f).ok_or_else(|| Fail(EXIT_FAILURE, format!("{}: not an implication", e.name)))?;
            label.push_str(" (conclusion negated)");
        }
        let start = Instant::now();
        let r = check(&f, Target::Validity, &cfg)?;
        let secs = start.elapsed().as_secs_f64();
        if r.outcome != Outcome::Valid {
            deviations += 1;
        }
        rows.push((label, r.outcome, r.branches.len(), secs));
    }
    match cli.format {
        Format::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|(n, o, b, s)| json!({ "name": n, "outcome": o.label(), "branches": b, "seconds": s }))
                .collect();
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
        }
        Format::Text => {
            let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(4);
            println!("{:<w$}  {:<8} {:>8} {:>9}", "name", "verdict", "branches", "seconds");
            for (n, o, b, s) in &rows {
                println!("{n:<w$}  {:<8} {b:>8} {s:>9.3}", o.label());
            }
        }
    }
    if deviations > 0 {
        return Err(Fail(EXIT_FAILURE, format!("{deviations} entr{} not VALID", if deviations == 1 { "y" } else { "ies" })));
    }
    Ok(())
}

fn cmd_sample(cli: &Cli) -> Result<(), Fail> {
    let (Some(a), Some(t1), Some(t2)) = (&cli.alpha, &cli.theta1, &cli.theta2) else {
        return Err(Fail(EXIT_PARSE, "sample needs --alpha, --theta1 and --theta2".into()));
    };
    if cli.n == 0 {
        return Err(Fail(EXIT_PARSE, "--n must be positive".into()));
    }
    let spec = make_defined(a, t1, t2).map_err(|e| Fail(EXIT_FAILURE, e.to_string()))?;
    let mut out = String::from("x,value,derivative\n");
    for k in 0..=cli.n {
        let x = k as f64 / cli.n as f64;
        let v = eval_elastic(&spec, x).map_err(|e| Fail(EXIT_FAILURE, e.to_string()))?;
        let d = eval_elastic_deriv(&spec, x).map_err(|e| Fail(EXIT_FAILURE, e.to_string()))?;
        // adding zero turns -0 into 0
        out.push_str(&format!("{x},{},{}\n", v + 0.0, d + 0.0));
    }
    print!("{out}");
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Fail> {
    match cli.mode {
        Mode::CheckValid => cmd_check(cli, Target::Validity),
        Mode::CheckSat => cmd_check(cli, Target::Satisfiability),
        Mode::EmitSmt => cmd_emit(cli),
        Mode::Witness => cmd_witness(cli),
        Mode::Corpus => cmd_corpus(cli),
        Mode::Sample => cmd_sample(cli),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            if !msg.is_empty() {
                eprintln!("rdfplus: {msg}");
            }
            ExitCode::from(code)
        }
    }
}
