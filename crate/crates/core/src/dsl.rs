//! Candidate expressions.
//!
//! A candidate is a real-valued expression in the overlap `z`. The grammar
//! is LL(1):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;
//! atom    = number | constant | variable
//!         | function "(" expr ")" | "(" expr ")" ;
//! number  = digit { digit } [ "." { digit } ] [ exponent ]
//!         | "." digit { digit } [ exponent ] ;
//! exponent = ("e" | "E") [ "+" | "-" ] digit { digit } ;
//! constant = "pi" | "e" ;
//! variable = "r" | "phi" | "re" | "im" ;
//! function = "abs" | "sqrt" | "sin" | "cos" | "exp" | "ln" ;
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so
//! `-r^2 = -(r^2)` and `2^3^2 = 2^(3^2)`. Variables are bound to
//! `r = |z|`, `phi = arg z ∈ (−π, π]` with `arg 0 = 0`, `re = Re z` and
//! `im = Im z`.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Overlaps up to this modulus are accepted; beyond is a domain error.
pub const DOMAIN_SLACK: f64 = 1e-9;
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    R,
    Phi,
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Abs,
    Sqrt,
    Sin,
    Cos,
    Exp,
    Ln,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Constant),
    Var(Variable),
    Neg(Box<Expr>),
    Call(Function, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("parse error at offset {position}: expected {}, found {found}", expected.join(" or "))]
    Parse {
        position: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown name `{name}` at offset {position}")]
    Name { position: usize, name: String },
}

impl DslError {
    pub fn position(&self) -> usize {
        match self {
            DslError::Parse { position, .. } | DslError::Name { position, .. } => *position,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of a non-positive number")]
    LogNonPositive,
    #[error("square root of a negative number")]
    SqrtNegative,
    #[error("non-integer power of a negative base")]
    NegativeBase,
    #[error("overlap modulus {0} lies outside the closed unit disk")]
    OutOfDomain(f64),
}

impl Variable {
    fn name(self) -> &'static str {
        match self {
            Variable::R => "r",
            Variable::Phi => "phi",
            Variable::Re => "re",
            Variable::Im => "im",
        }
    }
}

impl Constant {
    fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }

    fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

impl Function {
    fn name(self) -> &'static str {
        match self {
            Function::Abs => "abs",
            Function::Sqrt => "sqrt",
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Exp => "exp",
            Function::Ln => "ln",
        }
    }

    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Function::Abs,
            "sqrt" => Function::Sqrt,
            "sin" => Function::Sin,
            "cos" => Function::Cos,
            "exp" => Function::Exp,
            "ln" => Function::Ln,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn parse_error(position: usize, expected: &[&str], found: String) -> DslError {
    DslError::Parse {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, DslError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let tok = match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                let digits = |i: &mut usize| {
                    let s = *i;
                    while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                        *i += 1;
                    }
                    *i - s
                };
                let mut n = digits(&mut i);
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    n += digits(&mut i);
                }
                if n == 0 {
                    return Err(parse_error(start, &["digit"], "`.`".into()));
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        digits(&mut i);
                    }
                }
                let value: f64 = src[start..i]
                    .parse()
                    .map_err(|_| parse_error(start, &["number"], format!("`{}`", &src[start..i])))?;
                if !value.is_finite() {
                    return Err(parse_error(start, &["finite number"], format!("`{}`", &src[start..i])));
                }
                out.push((Tok::Num(value), start));
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(parse_error(
                    start,
                    &["number", "name", "operator", "parenthesis"],
                    format!("`{ch}`"),
                ));
            }
        };
        i += 1;
        out.push((tok, start));
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

const OPERAND: &[&str] = &["number", "name", "`(`", "`-`"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> DslError {
        parse_error(self.offset(), expected, self.peek().describe())
    }

    fn enter(&mut self) -> Result<(), DslError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(parse_error(self.offset(), &["shallower nesting"], self.peek().describe()));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        self.enter()?;
        let e = if *self.peek() == Tok::Minus {
            self.bump();
            Expr::Neg(Box::new(self.unary()?))
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(e)
    }

    fn power(&mut self) -> Result<Expr, DslError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn parenthesized(&mut self) -> Result<Expr, DslError> {
        if *self.peek() != Tok::LParen {
            return Err(self.unexpected(&["`(`"]));
        }
        self.bump();
        let inner = self.expr()?;
        if *self.peek() != Tok::RParen {
            return Err(self.unexpected(&["`+`", "`-`", "`*`", "`/`", "`^`", "`)`"]));
        }
        self.bump();
        Ok(inner)
    }

    fn atom(&mut self) -> Result<Expr, DslError> {
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::Num(x))
            }
            Tok::LParen => self.parenthesized(),
            Tok::Ident(name) => {
                let (_, position) = self.bump();
                match name.as_str() {
                    "r" => Ok(Expr::Var(Variable::R)),
                    "phi" => Ok(Expr::Var(Variable::Phi)),
                    "re" => Ok(Expr::Var(Variable::Re)),
                    "im" => Ok(Expr::Var(Variable::Im)),
                    "pi" => Ok(Expr::Const(Constant::Pi)),
                    "e" => Ok(Expr::Const(Constant::E)),
                    other => match Function::lookup(other) {
                        Some(f) => Ok(Expr::Call(f, Box::new(self.parenthesized()?))),
                        None => Err(DslError::Name {
                            position,
                            name: name.clone(),
                        }),
                    },
                }
            }
            _ => Err(self.unexpected(OPERAND)),
        }
    }
}

pub fn parse_candidate(source: &str) -> Result<Expr, DslError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected(&["`+`", "`-`", "`*`", "`/`", "`^`", "end of input"]));
    }
    Ok(e)
}

/// `arg z` in `(−π, π]`, with `arg 0 = 0`.
fn arg(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    if a == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

struct Env {
    r: f64,
    phi: f64,
    re: f64,
    im: f64,
}

fn eval_in(e: &Expr, env: &Env) -> Result<f64, EvalError> {
    Ok(match e {
        Expr::Num(x) => *x,
        Expr::Const(c) => c.value(),
        Expr::Var(v) => match v {
            Variable::R => env.r,
            Variable::Phi => env.phi,
            Variable::Re => env.re,
            Variable::Im => env.im,
        },
        Expr::Neg(a) => -eval_in(a, env)?,
        Expr::Call(f, a) => {
            let x = eval_in(a, env)?;
            match f {
                Function::Abs => x.abs(),
                Function::Sqrt if x < 0.0 => return Err(EvalError::SqrtNegative),
                Function::Sqrt => x.sqrt(),
                Function::Sin => x.sin(),
                Function::Cos => x.cos(),
                Function::Exp => x.exp(),
                Function::Ln if !(x > 0.0) => return Err(EvalError::LogNonPositive),
                Function::Ln => x.ln(),
            }
        }
        Expr::Binary(op, a, b) => {
            let x = eval_in(a, env)?;
            let y = eval_in(b, env)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div if y == 0.0 => return Err(EvalError::DivisionByZero),
                BinOp::Div => x / y,
                BinOp::Pow => {
                    if x < 0.0 && y.fract() != 0.0 {
                        return Err(EvalError::NegativeBase);
                    }
                    if x == 0.0 && y < 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    x.powf(y)
                }
            }
        }
    })
}

pub fn eval_expr(e: &Expr, z: Complex64) -> Result<f64, EvalError> {
    let r = z.norm();
    if !(r <= 1.0 + DOMAIN_SLACK) {
        return Err(EvalError::OutOfDomain(r));
    }
    let env = Env {
        r,
        phi: arg(z),
        re: z.re,
        im: z.im,
    };
    eval_in(e, &env)
}

impl Expr {
    pub fn eval(&self, z: Complex64) -> Result<f64, EvalError> {
        eval_expr(self, z)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints with the fewest parentheses that reparse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Const(c) => f.write_str(c.name()),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_wrapped(f, a, a.precedence() < 3)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(BinOp::Pow, a, b) => {
                write_wrapped(f, a, a.precedence() < 5)?;
                f.write_str("^")?;
                write_wrapped(f, b, b.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let p = self.precedence();
                write_wrapped(f, a, a.precedence() < p)?;
                f.write_str(match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => unreachable!(),
                })?;
                write_wrapped(f, b, b.precedence() <= p)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_chacha::rand_core::RngCore;

    fn num(x: f64) -> Box<Expr> {
        Box::new(Expr::Num(x))
    }

    fn var(v: Variable) -> Box<Expr> {
        Box::new(Expr::Var(v))
    }

    #[test]
    fn parses_power() {
        assert_eq!(
            parse_candidate("r^2").unwrap(),
            Expr::Binary(BinOp::Pow, var(Variable::R), num(2.0))
        );
    }

    #[test]
    fn parses_sum_with_call() {
        let want = Expr::Binary(
            BinOp::Add,
            Box::new(Expr::Binary(BinOp::Pow, var(Variable::R), num(2.0))),
            Box::new(Expr::Binary(
                BinOp::Mul,
                num(0.1),
                Box::new(Expr::Call(Function::Sin, var(Variable::Phi))),
            )),
        );
        assert_eq!(parse_candidate("r^2 + 0.1*sin(phi)").unwrap(), want);
    }

    #[test]
    fn double_caret_is_error_at_two() {
        let err = parse_candidate("r^^2").unwrap_err();
        assert!(matches!(err, DslError::Parse { position: 2, .. }), "{err}");
    }

    #[test]
    fn name_error_has_position() {
        assert_eq!(
            parse_candidate("r + foo").unwrap_err(),
            DslError::Name {
                position: 4,
                name: "foo".into()
            }
        );
    }

    #[test]
    fn other_errors() {
        for (src, pos) in [("", 0), ("(r", 2), ("sin r", 4), ("r)", 1), ("2 3", 2), ("r $", 2), ("1e999", 0)] {
            let err = parse_candidate(src).unwrap_err();
            assert_eq!(err.position(), pos, "{src}: {err}");
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_candidate("-r^2").unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Binary(BinOp::Pow, var(Variable::R), num(2.0)))));
        let z = Complex64::new(0.5, 0.0);
        assert_eq!(parse_candidate("2^3^2").unwrap().eval(z).unwrap(), 512.0);
        assert_eq!(parse_candidate("8 - 3 - 2").unwrap().eval(z).unwrap(), 3.0);
        assert_eq!(parse_candidate("8/4/2").unwrap().eval(z).unwrap(), 1.0);
        assert_eq!(parse_candidate("r^-1").unwrap().eval(z).unwrap(), 2.0);
        assert_eq!(parse_candidate("2*-r").unwrap().eval(z).unwrap(), -1.0);
    }

    #[test]
    fn eval_examples() {
        let e = parse_candidate("r^2").unwrap();
        assert!((e.eval(Complex64::new(0.6, 0.8)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(e.eval(Complex64::new(0.5, 0.0)).unwrap(), 0.25);
        let re = parse_candidate("re").unwrap();
        let z = Complex64::from_polar(0.3, std::f64::consts::FRAC_PI_2);
        assert!(re.eval(z).unwrap().abs() < 1e-15);
    }

    #[test]
    fn phi_conventions() {
        let phi = parse_candidate("phi").unwrap();
        assert_eq!(phi.eval(Complex64::new(0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(phi.eval(Complex64::new(-0.5, -0.0)).unwrap(), std::f64::consts::PI);
        assert_eq!(phi.eval(Complex64::new(-0.5, 0.0)).unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn eval_errors() {
        let z = Complex64::new(0.0, 0.0);
        let cases = [
            ("1/r", EvalError::DivisionByZero),
            ("ln(r)", EvalError::LogNonPositive),
            ("sqrt(-1)", EvalError::SqrtNegative),
            ("(-1)^0.5", EvalError::NegativeBase),
            ("r^-2", EvalError::DivisionByZero),
        ];
        for (src, want) in cases {
            assert_eq!(parse_candidate(src).unwrap().eval(z).unwrap_err(), want, "{src}");
        }
        assert_eq!(parse_candidate("(-2)^3").unwrap().eval(z).unwrap(), -8.0);
        assert!(matches!(
            parse_candidate("r").unwrap().eval(Complex64::new(1.1, 0.0)),
            Err(EvalError::OutOfDomain(_))
        ));
        assert!(parse_candidate("r").unwrap().eval(Complex64::new(1.0 + 5e-10, 0.0)).is_ok());
    }

    const FIXTURES: &[&str] = &[
        "r^2",
        "r",
        "r^4",
        "r^2 + 0.05",
        "r^2*(1 + 0.1*sin(phi))",
        "r^2 + 0.1*sin(phi)",
        "-r^2 + 2*r",
        "(r - 1)^2",
        "2^3^2",
        "(2^3)^2",
        "re - (im - r)",
        "re^2 + im^2",
        "exp(-r)/(1 + cos(phi))",
        "-(r + 1)",
        "--r",
        "(-r)^2",
        "r^(1/2)",
        "r^-1",
        "abs(sqrt(ln(e + pi)))",
        "8/(4/2)",
        "0.0000001*r",
    ];

    #[test]
    fn print_parse_round_trip() {
        let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        for src in FIXTURES {
            let e = parse_candidate(src).unwrap_or_else(|err| panic!("{src}: {err}"));
            assert_eq!(strip(&e.to_string()), strip(src), "{src}");
            assert_eq!(parse_candidate(&e.to_string()).unwrap(), e);
        }
    }

    #[test]
    fn fuzz_parser_is_total() {
        let alphabet = b"r^*/+-()0123456789.e phisnqrtcoxlabmpE";
        let mut s = rng::stream(2024, 0);
        for i in 0..100_000 {
            let len = (s.next_u64() % 24) as usize;
            let bytes: Vec<u8> = (0..len)
                .map(|_| {
                    let x = s.next_u64();
                    if i % 2 == 0 {
                        alphabet[(x % alphabet.len() as u64) as usize]
                    } else {
                        x as u8
                    }
                })
                .collect();
            let src = String::from_utf8_lossy(&bytes);
            if let Ok(e) = parse_candidate(&src) {
                let _ = e.eval(Complex64::new(0.3, 0.4));
                assert_eq!(parse_candidate(&e.to_string()).unwrap(), e);
            }
        }
        let deep = "(".repeat(100_000);
        assert!(parse_candidate(&deep).is_err());
        let negs = "-".repeat(100_000) + "r";
        assert!(parse_candidate(&negs).is_err());
    }

    #[test]
    fn evaluation_is_bitwise_pure() {
        let e = parse_candidate("r^2*(1 + 0.1*sin(phi)) + exp(re)*cos(im)").unwrap();
        let z = Complex64::new(0.31, -0.47);
        let a = e.eval(z).unwrap().to_bits();
        assert!((0..100).all(|_| e.eval(z).unwrap().to_bits() == a));
    }
}
