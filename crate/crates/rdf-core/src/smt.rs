//! SMT-LIB2 output, the external solver driver and model parsing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use wait_timeout::ChildExt;

use crate::ast::{Cmp, Rat};
use crate::tarski::{Expr, Mono, NumericModel, PolyAtom, TarskiFormula};

pub const DEFAULT_SOLVER: &str = "z3 -in";
pub const SOLVER_ENV: &str = "RDF_SOLVER_CMD";

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub command: Vec<String>,
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::from_env(None)
    }
}

impl SolverConfig {
    /// Explicit command, else `RDF_SOLVER_CMD`, else `z3 -in`; 30 s timeout.
    pub fn from_env(explicit: Option<&str>) -> SolverConfig {
        let env = std::env::var(SOLVER_ENV).ok().filter(|s| !s.trim().is_empty());
        let line = explicit.map(String::from).or(env).unwrap_or_else(|| DEFAULT_SOLVER.into());
        let command = shlex::split(&line).unwrap_or_else(|| line.split_whitespace().map(String::from).collect());
        SolverConfig { command, timeout: Duration::from_secs(30) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Sat(NumericModel),
    Unsat,
    Unknown(String),
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown(_) => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("solver not found: {0}")]
    SolverNotFound(String),
    #[error("solver timed out after {0:?}")]
    SolverTimeout(Duration),
    #[error("unexpected solver output: {0}")]
    SolverProtocolError(String),
    #[error(transparent)]
    Model(#[from] ModelParseError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot parse model: {0}")]
pub struct ModelParseError(pub String);

const RESERVED: &[&str] = &[
    "and", "or", "not", "xor", "ite", "let", "forall", "exists", "true", "false", "distinct", "assert", "model",
    "par", "as", "match", "define-fun", "declare-const",
];

/// SMT-LIB symbol for a variable name.
pub fn symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "_.$".contains(c))
        && !RESERVED.contains(&name);
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn int_lit(n: &BigInt) -> String {
    if n.is_negative() {
        format!("(- {})", -n)
    } else {
        n.to_string()
    }
}

fn rat_lit(q: &Rat) -> String {
    if q.is_integer() {
        int_lit(q.numer())
    } else {
        let body = format!("(/ {} {})", q.numer().abs(), q.denom());
        if q.is_negative() {
            format!("(- {body})")
        } else {
            body
        }
    }
}

fn expr_sexp(e: &Expr) -> String {
    match e {
        Expr::Var(v) => symbol(v),
        Expr::Const(c) => rat_lit(c),
        Expr::Add(a, b) => format!("(+ {} {})", expr_sexp(a), expr_sexp(b)),
        Expr::Sub(a, b) => format!("(- {} {})", expr_sexp(a), expr_sexp(b)),
        Expr::Mul(a, b) => format!("(* {} {})", expr_sexp(a), expr_sexp(b)),
        Expr::Div(a, b) => format!("(/ {} {})", expr_sexp(a), expr_sexp(b)),
    }
}

fn mono_sexp(m: &Mono, c: &BigInt) -> String {
    let mut factors: Vec<String> = Vec::new();
    if !c.is_one() || m.is_empty() {
        factors.push(int_lit(c));
    }
    for (v, k) in m {
        for _ in 0..*k {
            factors.push(symbol(v));
        }
    }
    if factors.len() == 1 {
        factors.pop().unwrap()
    } else {
        format!("(* {})", factors.join(" "))
    }
}

fn rel_sexp(c: Cmp, a: String, b: String) -> String {
    match c {
        Cmp::Ne => format!("(not (= {a} {b}))"),
        c => format!("({} {a} {b})", c.symbol()),
    }
}

fn poly_sexp(p: &PolyAtom) -> String {
    let terms: Vec<String> = p.lhs.iter().map(|(m, c)| mono_sexp(m, c)).collect();
    let lhs = match terms.len() {
        0 => "0".to_string(),
        1 => terms[0].clone(),
        _ => format!("(+ {})", terms.join(" ")),
    };
    rel_sexp(p.rel, lhs, "0".into())
}

pub fn formula_sexp(f: &TarskiFormula) -> String {
    let list = |op: &str, v: &[TarskiFormula], empty: &str| -> String {
        match v.len() {
            0 => empty.into(),
            1 => formula_sexp(&v[0]),
            _ => format!("({op} {})", v.iter().map(formula_sexp).collect::<Vec<_>>().join(" ")),
        }
    };
    match f {
        TarskiFormula::True => "true".into(),
        TarskiFormula::False => "false".into(),
        TarskiFormula::Cmp(a, c, b) => rel_sexp(*c, expr_sexp(a), expr_sexp(b)),
        TarskiFormula::Poly(p) => poly_sexp(p),
        TarskiFormula::And(v) => list("and", v, "true"),
        TarskiFormula::Or(v) => list("or", v, "false"),
        TarskiFormula::Not(a) => format!("(not {})", formula_sexp(a)),
        TarskiFormula::Implies(a, b) => format!("(=> {} {})", formula_sexp(a), formula_sexp(b)),
    }
}

/// QF_NRA script: one `assert` per top-level conjunct.
pub fn emit_smtlib(f: &TarskiFormula) -> String {
    emit_smtlib_with_header(f, &[])
}

/// As [`emit_smtlib`], with leading `;` comment lines.
pub fn emit_smtlib_with_header(f: &TarskiFormula, header: &[String]) -> String {
    let mut s = String::new();
    for h in header {
        for line in h.lines() {
            let _ = writeln!(s, "; {line}");
        }
    }
    s.push_str("(set-logic QF_NRA)\n");
    for v in f.free_vars() {
        let _ = writeln!(s, "(declare-const {} Real)", symbol(&v));
    }
    for c in f.conjuncts() {
        let _ = writeln!(s, "(assert {})", formula_sexp(c));
    }
    s.push_str("(check-sat)\n(get-model)\n(exit)\n");
    s
}

/// Runs the solver on a script. Satisfiable answers come back with a parsed
/// model; values the solver reports as algebraic numbers are rationalized from
/// a second, decimal model dump.
pub fn solve_external(script: &str, cfg: &SolverConfig) -> Result<Verdict, SolverError> {
    let (prog, args) = cfg.command.split_first().ok_or_else(|| SolverError::SolverNotFound("<empty>".into()))?;
    let body = script.trim_end().strip_suffix("(exit)").unwrap_or(script);
    let full = format!(
        "{body}\n(set-option :pp.decimal true)\n(set-option :pp.decimal_precision 40)\n(get-model)\n(exit)\n"
    );
    let mut child = Command::new(prog)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SolverError::SolverNotFound(format!("{prog}: {e}")))?;
    let mut stdin = child.stdin.take().unwrap();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(full.as_bytes());
    });
    let mut stdout = child.stdout.take().unwrap();
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let status = child.wait_timeout(cfg.timeout).map_err(|e| SolverError::SolverProtocolError(e.to_string()))?;
    if status.is_none() {
        let _ = child.kill();
        let _ = child.wait();
        return Err(SolverError::SolverTimeout(cfg.timeout));
    }
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    parse_solver_output(&out)
}

/// Interprets the full stdout of a solver run.
pub fn parse_solver_output(out: &str) -> Result<Verdict, SolverError> {
    let trimmed = out.trim_start();
    let (first, rest) = trimmed.split_once('\n').unwrap_or((trimmed, ""));
    match first.trim() {
        "sat" => Ok(Verdict::Sat(parse_model(rest)?)),
        "unsat" => Ok(Verdict::Unsat),
        "unknown" => Ok(Verdict::Unknown("solver answered unknown".into())),
        _ => Err(SolverError::SolverProtocolError(out.chars().take(400).collect())),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn read_sexps(s: &str) -> Result<Vec<Sexp>, ModelParseError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                stack.push(Vec::new());
            }
            ')' => {
                chars.next();
                let l = stack.pop().unwrap();
                stack.last_mut().ok_or_else(|| ModelParseError("unbalanced `)`".into()))?.push(Sexp::List(l));
            }
            ';' => {
                while chars.next().is_some_and(|c| c != '\n') {}
            }
            '"' => {
                chars.next();
                let mut a = String::from('"');
                for c in chars.by_ref() {
                    a.push(c);
                    if c == '"' {
                        break;
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Atom(a));
            }
            '|' => {
                chars.next();
                let a: String = chars.by_ref().take_while(|&c| c != '|').collect();
                stack.last_mut().unwrap().push(Sexp::Atom(a));
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut a = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    a.push(c);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(a));
            }
        }
    }
    if stack.len() != 1 {
        return Err(ModelParseError("unbalanced `(`".into()));
    }
    Ok(stack.pop().unwrap())
}

/// Whether every parenthesis in `s` is balanced.
pub fn is_balanced(s: &str) -> bool {
    read_sexps(s).is_ok()
}

/// Value of a model term: exact, approximate (decimal with trailing `?`) or
/// not numeric (an algebraic `root-obj`).
enum Val {
    Exact(Rat),
    Approx(Rat),
    Algebraic,
}

fn decimal(a: &str) -> Option<Val> {
    let (body, approx) = match a.strip_suffix('?') {
        Some(b) => (b, true),
        None => (a, false),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() || !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let q = Rat::new(digits, num_traits::pow(BigInt::from(10), frac.len()));
    Some(if approx { Val::Approx(q) } else { Val::Exact(q) })
}

fn value(e: &Sexp) -> Result<Val, ModelParseError> {
    let bad = || ModelParseError(format!("unsupported value {e:?}"));
    match e {
        Sexp::Atom(a) => decimal(a).ok_or_else(bad),
        Sexp::List(l) => {
            let Some(Sexp::Atom(op)) = l.first() else { return Err(bad()) };
            if op == "root-obj" {
                return Ok(Val::Algebraic);
            }
            let args = l[1..].iter().map(value).collect::<Result<Vec<_>, _>>()?;
            let mut approx = false;
            let mut nums = Vec::new();
            for a in args {
                match a {
                    Val::Exact(q) => nums.push(q),
                    Val::Approx(q) => {
                        approx = true;
                        nums.push(q)
                    }
                    Val::Algebraic => return Ok(Val::Algebraic),
                }
            }
            let q = match (op.as_str(), nums.len()) {
                ("-", 1) => -nums[0].clone(),
                ("-", n) if n > 1 => nums[1..].iter().fold(nums[0].clone(), |a, b| a - b),
                ("+", _) => nums.iter().fold(Rat::zero(), |a, b| a + b),
                ("*", _) => nums.iter().fold(Rat::one(), |a, b| a * b),
                ("/", 2) if !nums[1].is_zero() => nums[0].clone() / nums[1].clone(),
                _ => return Err(bad()),
            };
            Ok(if approx { Val::Approx(q) } else { Val::Exact(q) })
        }
    }
}

/// `define-fun` entries of every model block in `s`, in order of appearance.
fn model_blocks(s: &str) -> Result<Vec<BTreeMap<String, Sexp>>, ModelParseError> {
    let mut out = Vec::new();
    for top in read_sexps(s)? {
        let Sexp::List(items) = top else { continue };
        let items: &[Sexp] = match items.first() {
            Some(Sexp::Atom(a)) if a == "model" => &items[1..],
            Some(Sexp::Atom(a)) if a == "error" => continue,
            _ => &items,
        };
        let mut block = BTreeMap::new();
        for it in items {
            let Sexp::List(d) = it else { continue };
            match d.as_slice() {
                [Sexp::Atom(k), Sexp::Atom(name), Sexp::List(params), Sexp::Atom(_sort), v]
                    if k == "define-fun" && params.is_empty() =>
                {
                    block.insert(name.clone(), v.clone());
                }
                _ => {}
            }
        }
        if !block.is_empty() || items.is_empty() {
            out.push(block);
        }
    }
    Ok(out)
}

/// Parses the `get-model` output. Integer, rational and plain decimal
/// literals are exact; approximated or algebraic values are replaced by the
/// simplest rational within 10⁻¹² and mark the model inexact.
pub fn parse_model(solver_output: &str) -> Result<NumericModel, ModelParseError> {
    let blocks = model_blocks(solver_output)?;
    let Some(first) = blocks.first() else {
        return Err(ModelParseError("no model in solver output".into()));
    };
    let tol = Rat::new(BigInt::one(), num_traits::pow(BigInt::from(10), 12));
    let mut m = NumericModel { assignment: BTreeMap::new(), exact: true };
    for (name, v) in first {
        let q = match value(v)? {
            Val::Exact(q) => q,
            Val::Approx(q) => {
                m.exact = false;
                rationalize(&q, &tol)
            }
            Val::Algebraic => {
                let approx = blocks[1..]
                    .iter()
                    .find_map(|b| b.get(name))
                    .ok_or_else(|| ModelParseError(format!("algebraic value of {name} without approximation")))?;
                let (Val::Approx(q) | Val::Exact(q)) = value(approx)? else {
                    return Err(ModelParseError(format!("algebraic value of {name} without approximation")));
                };
                m.exact = false;
                rationalize(&q, &tol)
            }
        };
        m.assignment.insert(name.clone(), q);
    }
    Ok(m)
}

/// Simplest rational (smallest denominator) in `[x - tol, x + tol]`.
pub fn rationalize(x: &Rat, tol: &Rat) -> Rat {
    simplest_between(&(x - tol), &(x + tol))
}

fn simplest_between(lo: &Rat, hi: &Rat) -> Rat {
    if !lo.is_positive() && !hi.is_negative() {
        return Rat::zero();
    }
    if hi.is_negative() {
        return -simplest_between(&-hi, &-lo);
    }
    let c = lo.ceil();
    if c <= *hi {
        return c;
    }
    let fl = lo.floor();
    fl.clone() + Rat::one() / simplest_between(&(Rat::one() / (hi - &fl)), &(Rat::one() / (lo - &fl)))
}

/// Fills variables the solver left out of its model with zero.
pub fn complete_model(m: &mut NumericModel, vars: impl IntoIterator<Item = String>) {
    for v in vars {
        m.assignment.entry(v).or_insert_with(Rat::zero);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::rat;
    use crate::tarski::eval_tarski;

    fn x_gt_0() -> TarskiFormula {
        TarskiFormula::cmp(Expr::var("x"), Cmp::Gt, Expr::zero())
    }

    #[test]
    fn emits_assert() {
        let s = emit_smtlib(&x_gt_0());
        assert!(s.contains("(assert (> x 0))"), "{s}");
        assert!(s.contains("(declare-const x Real)"));
        assert!(is_balanced(&s));
    }

    #[test]
    fn emits_guard() {
        let g = TarskiFormula::implies(
            TarskiFormula::cmp(Expr::var("s"), Cmp::Eq, Expr::var("y")),
            TarskiFormula::And(vec![
                TarskiFormula::cmp(Expr::var("t1"), Cmp::Eq, Expr::var("y")),
                TarskiFormula::cmp(Expr::var("t2"), Cmp::Eq, Expr::var("y")),
            ]),
        );
        let s = emit_smtlib(&TarskiFormula::And(vec![g]));
        assert!(s.contains("(assert (=> (= s y) (and (= t1 y) (= t2 y))))"), "{s}");
    }

    #[test]
    fn quotes_odd_names() {
        assert_eq!(symbol("x"), "x");
        assert_eq!(symbol("and"), "|and|");
        assert_eq!(symbol("x'"), "|x'|");
    }

    #[test]
    fn parses_exact_values() {
        let m = parse_model("(\n (define-fun x () Real (/ 1 3))\n (define-fun y () Real (- 2.5)))").unwrap();
        assert_eq!(m.get("x"), Some(&rat(1, 3)));
        assert_eq!(m.get("y"), Some(&rat(-5, 2)));
        assert!(m.exact);
    }

    #[test]
    fn parses_root_object_via_decimal_dump() {
        let out = "sat\n(\n  (define-fun x () Real\n    (root-obj (+ (^ x 2) (- 2)) 2))\n)\n(\n  (define-fun x () Real\n    1.4142135623730950488016887242096980785696?)\n)\n";
        let Verdict::Sat(m) = parse_solver_output(out).unwrap() else { panic!() };
        assert!(!m.exact);
        let x = m.get("x").unwrap();
        let err = (x * x - rat(2, 1)).abs();
        assert!(err < rat(1, 100_000_000_000));
    }

    #[test]
    fn rationalize_finds_simplest() {
        assert_eq!(rationalize(&rat(333_333, 1_000_000), &rat(1, 1000)), rat(1, 3));
        assert_eq!(rationalize(&rat(-7, 2), &rat(1, 10)), rat(-7, 2));
        assert_eq!(rationalize(&rat(1, 1000), &rat(1, 100)), rat(0, 1));
    }

    #[test]
    fn protocol_error_on_garbage() {
        assert!(matches!(parse_solver_output("(error \"x\")"), Err(SolverError::SolverProtocolError(_))));
    }

    fn z3() -> Option<SolverConfig> {
        let cfg = SolverConfig::from_env(None);
        Command::new(&cfg.command[0]).arg("-version").output().ok().map(|_| cfg)
    }

    #[test]
    fn solver_round_trip() {
        let Some(cfg) = z3() else { return };
        let unsat = TarskiFormula::And(vec![
            x_gt_0(),
            TarskiFormula::cmp(Expr::var("x"), Cmp::Lt, Expr::zero()),
        ]);
        assert_eq!(solve_external(&emit_smtlib(&unsat), &cfg).unwrap(), Verdict::Unsat);
        let sat = TarskiFormula::And(vec![
            x_gt_0(),
            TarskiFormula::cmp(Expr::mul(Expr::int(3), Expr::var("x")), Cmp::Eq, Expr::int(1)),
        ]);
        let Verdict::Sat(m) = solve_external(&emit_smtlib(&sat), &cfg).unwrap() else { panic!() };
        assert!(m.exact);
        assert!(eval_tarski(&sat, &m).unwrap());
        let irr = TarskiFormula::And(vec![
            x_gt_0(),
            TarskiFormula::cmp(Expr::mul(Expr::var("x"), Expr::var("x")), Cmp::Eq, Expr::int(2)),
        ]);
        let Verdict::Sat(m) = solve_external(&emit_smtlib(&irr), &cfg).unwrap() else { panic!() };
        assert!(!m.exact);
    }

    #[test]
    fn missing_solver_is_reported() {
        let cfg = SolverConfig { command: vec!["/nonexistent/solver".into()], timeout: Duration::from_secs(1) };
        assert!(matches!(solve_external("(check-sat)", &cfg), Err(SolverError::SolverNotFound(_))));
    }
}
