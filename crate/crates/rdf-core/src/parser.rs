//! Text syntax for formulas and the canonical printer.
//!
//! ```text
//! # comments run to the end of the line
//! formula := iff ; iff := imp ("<->" imp)* ; imp := or ("->" imp)?
//! or := and ("|" and)* ; and := not ("&" not)* ; not := "!" not | "(" formula ")" | atom
//! atom := term cmp term | Pred "(" f ["," g|term] ")" "on" interval | "(" "D[" f "]" cmp term ")" "on" interval
//! ```

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::ast::{Atom, Cmp, ExtEnd, Formula, IntervalSpec, NumTerm, PredKind, Rat, FRESH_PREFIX};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {}..{}: expected {}, found {found}", span.start, span.end, expected.join(" or "))]
    Syntax { span: SourceSpan, expected: Vec<String>, found: String },
    #[error("arity error at {}..{}: {msg}", span.start, span.end)]
    Arity { span: SourceSpan, msg: String },
}

impl ParseError {
    pub fn span(&self) -> SourceSpan {
        match self {
            ParseError::Syntax { span, .. } | ParseError::Arity { span, .. } => *span,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(Rat),
    NegInf,
    PosInf,
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Num(n) => write!(f, "number `{n}`"),
            Tok::NegInf => write!(f, "`-inf`"),
            Tok::PosInf => write!(f, "`+inf`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const SYMBOLS: [&str; 20] = [
    "<->", "->", "!=", "<=", ">=", "(", ")", "[", "]", ",", "+", "-", "*", "/", "=", "<", ">", "!",
    "&", "|",
];

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        // `#` starts a comment running to the end of the line
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let rest = &text[i..];
        if (rest.starts_with("-inf") || rest.starts_with("+inf"))
            && !rest[4..].chars().next().is_some_and(is_ident_char)
        {
            let tok = if c == '-' { Tok::NegInf } else { Tok::PosInf };
            out.push((tok, SourceSpan { start: i, end: i + 4 }));
            i += 4;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let mut digits = text[start..i].to_string();
            let mut scale = 0u32;
            if i + 1 < bytes.len() && bytes[i] == b'.' && (bytes[i + 1] as char).is_ascii_digit() {
                i += 1;
                let fs = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                digits.push_str(&text[fs..i]);
                scale = (i - fs) as u32;
            }
            let n: BigInt = digits.parse().expect("digits");
            let q = Rat::new(n, BigInt::from(10).pow(scale));
            out.push((Tok::Num(q), SourceSpan { start, end: i }));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && is_ident_char(bytes[i] as char) {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), SourceSpan { start, end: i }));
            continue;
        }
        if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            out.push((Tok::Sym(sym), SourceSpan { start: i, end: i + sym.len() }));
            i += sym.len();
            continue;
        }
        let ch_len = rest.chars().next().map_or(1, |ch| ch.len_utf8());
        return Err(ParseError::Syntax {
            span: SourceSpan { start: i, end: i + ch_len },
            expected: vec!["a token".into()],
            found: format!("character `{}`", rest.chars().next().unwrap_or(' ')),
        });
    }
    out.push((Tok::Eof, SourceSpan { start: text.len(), end: text.len() }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    /// furthest failure seen, reported when every alternative fails
    best: Option<ParseError>,
}

type PResult<T> = Result<T, ParseError>;

fn cmp_of(s: &str) -> Option<Cmp> {
    Some(match s {
        "=" => Cmp::Eq,
        "!=" => Cmp::Ne,
        "<" => Cmp::Lt,
        "<=" => Cmp::Le,
        ">" => Cmp::Gt,
        ">=" => Cmp::Ge,
        _ => return None,
    })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }
    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }
    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }
    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn fail<T>(&mut self, expected: &[&str]) -> PResult<T> {
        let err = ParseError::Syntax {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        };
        self.record(&err);
        Err(err)
    }

    fn record(&mut self, err: &ParseError) {
        let further = match &self.best {
            None => true,
            Some(b) => err.span().start > b.span().start,
        };
        if further {
            self.best = Some(err.clone());
        }
    }

    fn expect_sym(&mut self, s: &'static str) -> PResult<()> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.fail(&[&format!("`{s}`")])
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if s != "on" => {
                if s.starts_with('_') || s.starts_with(FRESH_PREFIX) {
                    let err = ParseError::Syntax {
                        span: self.span(),
                        expected: vec![format!("{what} not starting with `_`")],
                        found: format!("reserved identifier `{s}`"),
                    };
                    self.record(&err);
                    return Err(err);
                }
                self.bump();
                Ok(s)
            }
            _ => self.fail(&[what]),
        }
    }

    fn formula(&mut self) -> PResult<Formula> {
        let mut lhs = self.imp()?;
        while self.is_sym("<->") {
            self.bump();
            let rhs = self.imp()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn imp(&mut self) -> PResult<Formula> {
        let lhs = self.or()?;
        if self.is_sym("->") {
            self.bump();
            let rhs = self.imp()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> PResult<Formula> {
        let mut lhs = self.and()?;
        while self.is_sym("|") {
            self.bump();
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> PResult<Formula> {
        let mut lhs = self.not()?;
        while self.is_sym("&") {
            self.bump();
            let rhs = self.not()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> PResult<Formula> {
        if self.is_sym("!") {
            self.bump();
            return Ok(Formula::not(self.not()?));
        }
        if self.is_sym("(") {
            // derivative predicate: "(" "D" "[" f "]" cmp
            let is_deriv = matches!(self.peek_at(1), Tok::Ident(d) if d == "D")
                && matches!(self.peek_at(2), Tok::Sym("["))
                && matches!(self.peek_at(3), Tok::Ident(_))
                && matches!(self.peek_at(4), Tok::Sym("]"))
                && matches!(self.peek_at(5), Tok::Sym(s) if cmp_of(s).is_some());
            if is_deriv {
                return self.deriv_atom();
            }
            let save = self.pos;
            self.bump();
            if let Ok(f) = self.formula() {
                if self.is_sym(")") {
                    self.bump();
                    return Ok(f);
                }
                let _ = self.fail::<()>(&["`)`"]);
            }
            self.pos = save;
            return self.atom();
        }
        self.atom()
    }

    fn deriv_atom(&mut self) -> PResult<Formula> {
        self.expect_sym("(")?;
        self.bump(); // D
        self.expect_sym("[")?;
        let f = self.ident("function variable")?;
        self.expect_sym("]")?;
        let c = match self.bump() {
            Tok::Sym(s) => cmp_of(s).expect("checked"),
            _ => unreachable!(),
        };
        let t = self.term()?;
        self.expect_sym(")")?;
        self.expect_on()?;
        let i = self.interval()?;
        Ok(Formula::Atom(Atom::Deriv(f, c, t, i)))
    }

    fn expect_on(&mut self) -> PResult<()> {
        if self.is_kw("on") {
            self.bump();
            Ok(())
        } else {
            self.fail(&["`on`"])
        }
    }

    fn atom(&mut self) -> PResult<Formula> {
        if let Tok::Ident(name) = self.peek().clone() {
            let pred = match name.as_str() {
                "Eq" | "Gt" => true,
                n => PredKind::from_name(n).is_some(),
            };
            if pred && matches!(self.peek_at(1), Tok::Sym("(")) {
                let save = self.pos;
                match self.pred_atom(&name) {
                    Ok(f) => return Ok(f),
                    Err(e @ ParseError::Arity { .. }) => return Err(e),
                    Err(_) => self.pos = save,
                }
            }
        }
        let lhs = self.term()?;
        let c = match self.peek() {
            Tok::Sym(s) if cmp_of(s).is_some() => cmp_of(s).expect("checked"),
            _ => return self.fail(&["comparison operator"]),
        };
        self.bump();
        let rhs = self.term()?;
        Ok(Formula::num(lhs, c, rhs))
    }

    fn pred_atom(&mut self, name: &str) -> PResult<Formula> {
        let start = self.span();
        self.bump();
        self.expect_sym("(")?;
        let f = self.ident("function variable")?;
        let atom_of = |p: &mut Parser, second: Option<Second>| -> PResult<Atom> {
            p.expect_sym(")")?;
            p.expect_on()?;
            let i = p.interval()?;
            Ok(match (name, second) {
                ("Eq", Some(Second::Fun(g))) => Atom::FunEq(f.clone(), g, i),
                ("Gt", Some(Second::Fun(g))) => Atom::FunGt(f.clone(), g, i),
                ("Up", Some(Second::Term(s))) => Atom::PointMono { up: true, f: f.clone(), at: s, ival: i },
                ("Down", Some(Second::Term(s))) => Atom::PointMono { up: false, f: f.clone(), at: s, ival: i },
                (n, None) => Atom::Pred(PredKind::from_name(n).expect("pred"), f.clone(), i),
                _ => unreachable!(),
            })
        };
        let second = if self.is_sym(",") {
            self.bump();
            match name {
                "Eq" | "Gt" => Some(Second::Fun(self.ident("function variable")?)),
                "Up" | "Down" => Some(Second::Term(self.term()?)),
                _ => {
                    return Err(ParseError::Arity {
                        span: SourceSpan { start: start.start, end: self.span().end },
                        msg: format!("{name} takes one function argument"),
                    })
                }
            }
        } else {
            if name == "Eq" || name == "Gt" {
                return Err(ParseError::Arity {
                    span: SourceSpan { start: start.start, end: self.span().end },
                    msg: format!("{name} takes two function arguments"),
                });
            }
            None
        };
        Ok(Formula::Atom(atom_of(self, second)?))
    }

    fn interval(&mut self) -> PResult<IntervalSpec> {
        let lo_closed = match self.peek() {
            Tok::Sym("[") => true,
            Tok::Sym("(") | Tok::Sym("]") => false,
            _ => return self.fail(&["`[`", "`(`", "`]`"]),
        };
        self.bump();
        let lo = match self.peek() {
            Tok::NegInf => {
                self.bump();
                ExtEnd::NegInf
            }
            _ => ExtEnd::Term(self.term()?),
        };
        self.expect_sym(",")?;
        let hi = match self.peek() {
            Tok::PosInf => {
                self.bump();
                ExtEnd::PosInf
            }
            Tok::Ident(s) if s == "inf" => {
                self.bump();
                ExtEnd::PosInf
            }
            _ => ExtEnd::Term(self.term()?),
        };
        let hi_closed = match self.peek() {
            Tok::Sym("]") => true,
            Tok::Sym(")") | Tok::Sym("[") => false,
            _ => return self.fail(&["`]`", "`)`", "`[`"]),
        };
        let close_span = self.span();
        self.bump();
        if (lo_closed && !lo.is_finite()) || (hi_closed && !hi.is_finite()) {
            return Err(ParseError::Syntax {
                span: close_span,
                expected: vec!["open bracket at an infinite end".into()],
                found: "closed bracket".into(),
            });
        }
        Ok(IntervalSpec { lo, hi, lo_closed, hi_closed })
    }

    fn term(&mut self) -> PResult<NumTerm> {
        let mut lhs = self.product()?;
        loop {
            if self.is_sym("+") {
                self.bump();
                lhs = NumTerm::add(lhs, self.product()?);
            } else if self.is_sym("-") {
                self.bump();
                lhs = NumTerm::sub(lhs, self.product()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> PResult<NumTerm> {
        let mut lhs = self.unary()?;
        loop {
            if self.is_sym("*") {
                self.bump();
                lhs = NumTerm::mul(lhs, self.unary()?);
            } else if self.is_sym("/") {
                self.bump();
                lhs = NumTerm::div(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> PResult<NumTerm> {
        if self.is_sym("-") {
            self.bump();
            return Ok(NumTerm::sub(NumTerm::Zero, self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<NumTerm> {
        match self.peek().clone() {
            Tok::Num(q) => {
                self.bump();
                Ok(if q.is_zero() {
                    NumTerm::Zero
                } else if q.is_one() {
                    NumTerm::One
                } else {
                    NumTerm::Num(q)
                })
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.term()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            Tok::Ident(d) if d == "D" && matches!(self.peek_at(1), Tok::Sym("[")) => {
                let start = self.span();
                self.bump();
                self.bump();
                let f = self.ident("function variable")?;
                self.expect_sym("]")?;
                if !self.is_sym("(") {
                    return Err(ParseError::Arity {
                        span: SourceSpan { start: start.start, end: self.span().end },
                        msg: format!("D[{f}] must be applied to exactly one argument"),
                    });
                }
                self.bump();
                let t = self.term()?;
                if !self.is_sym(")") {
                    return Err(ParseError::Arity {
                        span: SourceSpan { start: start.start, end: self.span().end },
                        msg: format!("D[{f}](…) takes exactly one argument"),
                    });
                }
                self.bump();
                Ok(NumTerm::dapply(&f, t))
            }
            Tok::Ident(_) => {
                let name = self.ident("variable")?;
                if self.is_sym("(") {
                    self.bump();
                    let t = self.term()?;
                    self.expect_sym(")")?;
                    Ok(NumTerm::apply(&name, t))
                } else {
                    Ok(NumTerm::Var(name))
                }
            }
            _ => self.fail(&["term"]),
        }
    }
}

enum Second {
    Fun(String),
    Term(NumTerm),
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, best: None };
    match p.formula() {
        Ok(f) if matches!(p.peek(), Tok::Eof) => Ok(f),
        Ok(_) => {
            let e = p.fail::<()>(&["end of input", "connective"]).unwrap_err();
            Err(p.best.clone().filter(|b| b.span().start > e.span().start).unwrap_or(e))
        }
        Err(e @ ParseError::Arity { .. }) => Err(e),
        Err(e) => Err(p.best.clone().unwrap_or(e)),
    }
}

pub fn render_term(t: &NumTerm) -> String {
    match t {
        NumTerm::Var(v) => v.clone(),
        NumTerm::Zero => "0".into(),
        NumTerm::One => "1".into(),
        NumTerm::Num(q) => render_rat(q),
        NumTerm::Add(a, b) => format!("({} + {})", render_term(a), render_term(b)),
        NumTerm::Sub(a, b) => format!("({} - {})", render_term(a), render_term(b)),
        NumTerm::Mul(a, b) => format!("({} * {})", render_term(a), render_term(b)),
        NumTerm::Div(a, b) => format!("({} / {})", render_term(a), render_term(b)),
        NumTerm::Apply(f, a) => format!("{f}({})", render_term(a)),
        NumTerm::DApply(f, a) => format!("D[{f}]({})", render_term(a)),
    }
}

/// Integers and terminating decimals print as literals; anything else as a quotient.
fn render_rat(q: &Rat) -> String {
    if q.is_negative() {
        return format!("(0 - {})", render_rat(&-q));
    }
    if q.is_integer() {
        return q.numer().to_string();
    }
    let mut d = q.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let mut scale = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        scale += 1;
    }
    let mut s5 = 0u32;
    while (&d % &five).is_zero() {
        d /= &five;
        s5 += 1;
    }
    if !d.is_one() {
        return format!("({} / {})", q.numer(), q.denom());
    }
    // q = n / (2^a 5^b); scale to 10^max(a,b)
    let k = scale.max(s5);
    let scaled = q * Rat::from_integer(BigInt::from(10).pow(k));
    let digits = scaled.to_integer().to_string();
    let k = k as usize;
    let padded = format!("{:0>width$}", digits, width = k + 1);
    let (ip, fp) = padded.split_at(padded.len() - k);
    format!("{ip}.{fp}")
}

pub fn render_interval(i: &IntervalSpec) -> String {
    let lo = match &i.lo {
        ExtEnd::Term(t) => render_term(t),
        ExtEnd::NegInf => "-inf".into(),
        ExtEnd::PosInf => "+inf".into(),
    };
    let hi = match &i.hi {
        ExtEnd::Term(t) => render_term(t),
        ExtEnd::NegInf => "-inf".into(),
        ExtEnd::PosInf => "+inf".into(),
    };
    format!(
        "{}{lo},{hi}{}",
        if i.lo_closed { "[" } else { "(" },
        if i.hi_closed { "]" } else { ")" }
    )
}

pub fn render_atom(a: &Atom) -> String {
    match a {
        Atom::Num(s, c, t) => format!("({} {} {})", render_term(s), c.symbol(), render_term(t)),
        Atom::FunEq(f, g, i) => format!("Eq({f},{g}) on {}", render_interval(i)),
        Atom::FunGt(f, g, i) => format!("Gt({f},{g}) on {}", render_interval(i)),
        Atom::Pred(k, f, i) => format!("{}({f}) on {}", k.name(), render_interval(i)),
        Atom::PointMono { up, f, at, ival } => format!(
            "{}({f},{}) on {}",
            if *up { "Up" } else { "Down" },
            render_term(at),
            render_interval(ival)
        ),
        Atom::Deriv(f, c, t, i) => {
            format!("(D[{f}] {} {}) on {}", c.symbol(), render_term(t), render_interval(i))
        }
    }
}

pub fn render_formula(f: &Formula) -> String {
    match f {
        Formula::Atom(a) => render_atom(a),
        Formula::Not(a) => match a.as_ref() {
            Formula::Atom(Atom::Num(..)) | Formula::Not(_) => format!("!{}", render_formula(a)),
            Formula::Atom(_) => format!("!({})", render_formula(a)),
            _ => format!("!{}", render_formula(a)),
        },
        Formula::And(a, b) => format!("({} & {})", render_formula(a), render_formula(b)),
        Formula::Or(a, b) => format!("({} | {})", render_formula(a), render_formula(b)),
        Formula::Implies(a, b) => format!("({} -> {})", render_formula(a), render_formula(b)),
        Formula::Iff(a, b) => format!("({} <-> {})", render_formula(a), render_formula(b)),
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_formula(self))
    }
}

impl fmt::Display for NumTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_term(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> NumTerm {
        NumTerm::var(s)
    }

    #[test]
    fn two_one_parses() {
        let f = parse_formula("(D[f] > 0) on (a,b) -> StrictUp(f) on [a,b]").unwrap();
        let expect = Formula::implies(
            Formula::Atom(Atom::Deriv("f".into(), Cmp::Gt, NumTerm::Zero, IntervalSpec::open(v("a"), v("b")))),
            Formula::Atom(Atom::Pred(PredKind::StrictUp, "f".into(), IntervalSpec::closed(v("a"), v("b")))),
        );
        assert_eq!(f, expect);
    }

    #[test]
    fn conjunction_of_comparisons() {
        let f = parse_formula("x > y & y > x").unwrap();
        assert_eq!(
            f,
            Formula::and(Formula::num(v("x"), Cmp::Gt, v("y")), Formula::num(v("y"), Cmp::Gt, v("x")))
        );
    }

    #[test]
    fn application_of_sum() {
        let f = parse_formula("f(x+1) = g(x)").unwrap();
        assert_eq!(
            f,
            Formula::num(
                NumTerm::apply("f", NumTerm::add(v("x"), NumTerm::One)),
                Cmp::Eq,
                NumTerm::apply("g", v("x"))
            )
        );
    }

    #[test]
    fn renders_canonically() {
        assert_eq!(render_formula(&Formula::num(v("x"), Cmp::Gt, v("y"))), "(x > y)");
        let a = Atom::Pred(
            PredKind::StrictConvex,
            "f".into(),
            IntervalSpec::new(ExtEnd::Term(v("a")), ExtEnd::Term(v("b")), false, true),
        );
        assert_eq!(render_atom(&a), "StrictConvex(f) on (a,b]");
    }

    #[test]
    fn paper_brackets_are_accepted() {
        let a = parse_formula("Gt(f,g) on ]a,b]").unwrap();
        let b = parse_formula("Gt(f,g) on (a,b]").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unbounded_intervals() {
        let f = parse_formula("Convex(f) on (-inf, +inf)").unwrap();
        assert_eq!(f, Formula::Atom(Atom::Pred(PredKind::Convex, "f".into(), IntervalSpec::real_line())));
        assert!(parse_formula("Convex(f) on [-inf, 1]").is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse_formula("a > b -> c > d -> e > g").unwrap();
        match f {
            Formula::Implies(_, rhs) => assert!(matches!(*rhs, Formula::Implies(..))),
            _ => panic!("expected implication"),
        }
        let g = parse_formula("!a > b & c > d | e > g").unwrap();
        assert!(matches!(g, Formula::Or(..)));
    }

    #[test]
    fn parenthesised_terms_and_formulas() {
        let f = parse_formula("((x + 1) > y)").unwrap();
        assert_eq!(f, Formula::num(NumTerm::add(v("x"), NumTerm::One), Cmp::Gt, v("y")));
        let g = parse_formula("(D[f](a) + 1 > 0)").unwrap();
        assert!(matches!(g, Formula::Atom(Atom::Num(..))));
    }

    #[test]
    fn errors_have_spans_inside_input() {
        for bad in ["x >", "(x > y", "Convex(f) [a,b]", "x @ y", "Eq(f) on [a,b]", "_t1 > 0", "D[f] > 0"] {
            let e = parse_formula(bad).unwrap_err();
            let s = e.span();
            assert!(s.start <= s.end && s.end <= bad.len(), "{bad}: {e}");
        }
        assert!(matches!(parse_formula("Eq(f) on [a,b]"), Err(ParseError::Arity { .. })));
        assert!(matches!(parse_formula("D[f] > 0"), Err(ParseError::Arity { .. })));
    }

    #[test]
    fn decimals_and_fractions() {
        let f = parse_formula("x = 2.5").unwrap();
        assert_eq!(f, Formula::num(v("x"), Cmp::Eq, NumTerm::Num(crate::ast::rat(5, 2))));
        assert_eq!(render_formula(&f), "(x = 2.5)");
        assert_eq!(parse_formula(&render_formula(&f)).unwrap(), f);
    }
}
