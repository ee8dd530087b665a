//! Arithmetic expressions over indexed variables.
//!
//! ```text
//! expr    = term (('+' | '-') term)*
//! term    = unary (('*' | '/') unary)*
//! unary   = ('-' | '+') unary | power
//! power   = primary ('^' unary)?
//! primary = number | variable | 'pi' | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative, so `-q1^2`
//! is `-(q1^2)` and `2^3^2` is `2^9`. Variables are `q1.., y1.., p1.., u1..`,
//! the time `t` and the step `h`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {}: {message}", .pos + 1)]
pub struct ParseError {
    /// Byte offset into the parsed text.
    pub pos: usize,
    pub message: String,
}

impl ParseError {
    fn new(pos: usize, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Q,
    Y,
    P,
    U,
}

impl VarKind {
    pub fn letter(self) -> char {
        match self {
            VarKind::Q => 'q',
            VarKind::Y => 'y',
            VarKind::P => 'p',
            VarKind::U => 'u',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// One-based index as written.
    Indexed(VarKind, usize),
    Time,
    Step,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Indexed(k, i) => write!(f, "{}{i}", k.letter()),
            Var::Time => f.write_str("t"),
            Var::Step => f.write_str("h"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn prec(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

const NEG_PREC: u8 = 3;
const ATOM_PREC: u8 = 5;

/// Values bound to the variables during evaluation. Out-of-range indices
/// evaluate to NaN.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub t: f64,
    pub h: f64,
    pub q: &'a [f64],
    pub y: &'a [f64],
    pub p: &'a [f64],
    pub u: &'a [f64],
}

impl Expr {
    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::Var(v) => match v {
                Var::Time => env.t,
                Var::Step => env.h,
                Var::Indexed(k, i) => {
                    let slice = match k {
                        VarKind::Q => env.q,
                        VarKind::Y => env.y,
                        VarKind::P => env.p,
                        VarKind::U => env.u,
                    };
                    i.checked_sub(1).and_then(|j| slice.get(j)).copied().unwrap_or(f64::NAN)
                }
            },
            Expr::Neg(a) => -a.eval(env),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(env), b.eval(env));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => pow(x, y),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(env)),
        }
    }

    /// Every variable occurrence, in order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        self.vars().contains(&var)
    }

    /// Symbolic partial derivative with respect to `var`, lightly simplified.
    /// `None` when the expression contains `abs`, whose derivative is left
    /// to finite differences.
    pub fn derivative(&self, var: Var) -> Option<Expr> {
        use Expr::*;
        Some(match self {
            Num(_) => Num(0.0),
            Var(v) => Num(if *v == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)?),
            Bin(op, a, b) => {
                let (da, db) = (a.derivative(var)?, b.derivative(var)?);
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b.clone()), mul(a, db)),
                    BinOp::Div => sub(div(da, b.clone()), div(mul(a, db), mul(b.clone(), b))),
                    BinOp::Pow if is_zero(&db) => {
                        let lowered = bin(BinOp::Pow, a.clone(), sub(b.clone(), Num(1.0)));
                        mul(mul(b, lowered), da)
                    }
                    BinOp::Pow => {
                        let whole = bin(BinOp::Pow, a.clone(), b.clone());
                        let log_a = Call(Func::Log, Box::new(a.clone()));
                        mul(whole, add(mul(db, log_a), div(mul(b, da), a)))
                    }
                }
            }
            Call(f, a) => {
                let da = a.derivative(var)?;
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => Call(Func::Cos, Box::new(a)),
                    Func::Cos => neg(Call(Func::Sin, Box::new(a))),
                    Func::Tan => {
                        let c = Call(Func::Cos, Box::new(a));
                        div(Num(1.0), mul(c.clone(), c))
                    }
                    Func::Exp => Call(Func::Exp, Box::new(a)),
                    Func::Log => div(Num(1.0), a),
                    Func::Sqrt => div(Num(0.5), Call(Func::Sqrt, Box::new(a))),
                    Func::Abs => return None,
                };
                mul(outer, da)
            }
        })
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Num(x) if x.is_sign_negative() => NEG_PREC,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => ATOM_PREC,
            Expr::Neg(_) => NEG_PREC,
            Expr::Bin(op, ..) => op.prec(),
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(x) if *x == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(x) if *x == 1.0)
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    Expr::Bin(op, Box::new(a), Box::new(b))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (is_zero(&a), is_zero(&b)) {
        (true, _) => b,
        (_, true) => a,
        _ => bin(BinOp::Add, a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (is_zero(&a), is_zero(&b)) {
        (_, true) => a,
        (true, _) => neg(b),
        _ => bin(BinOp::Sub, a, b),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Num(0.0)
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        bin(BinOp::Mul, a, b)
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Num(0.0)
    } else if is_one(&b) {
        a
    } else {
        bin(BinOp::Div, a, b)
    }
}

/// Integer powers by repeated multiplication, so that `x^2` is exactly `x*x`.
fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= 64.0 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

/// Shortest decimal that parses back to the same `f64`; exponent notation
/// outside `[1e-5, 1e16)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if x.is_finite() && x.is_sign_negative() => write!(f, "-{}", format_float(-x)),
            Expr::Num(x) if x.is_finite() => f.write_str(&format_float(*x)),
            Expr::Num(x) if x.is_nan() => f.write_str("(0/0)"),
            Expr::Num(x) if *x > 0.0 => f.write_str("(1/0)"),
            Expr::Num(_) => f.write_str("(-1/0)"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.prec() < NEG_PREC)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => {
                let p = op.prec();
                if *op == BinOp::Pow {
                    write_child(f, a, a.prec() <= p)?;
                    f.write_str("^")?;
                    write_child(f, b, b.prec() < NEG_PREC)
                } else {
                    write_child(f, a, a.prec() < p)?;
                    write!(f, " {} ", op.symbol())?;
                    write_child(f, b, b.prec() <= p)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(start) else {
            return Ok((start, Tok::End));
        };
        if c.is_ascii_digit() || c == b'.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let x: f64 = text
                .parse()
                .map_err(|_| ParseError::new(start, format!("malformed number '{text}'")))?;
            self.pos = end;
            return Ok((start, Tok::Num(x)));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((start, Tok::Ident(self.src[start..end].to_string())));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((start, Tok::Op(c as char)));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError::new(start, format!("unexpected character '{ch}'")))
    }
}

/// Nesting limit, which keeps hostile input from exhausting the stack.
const MAX_DEPTH: usize = 200;

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lex = Lexer { src, pos: 0 };
        let (pos, tok) = lex.next()?;
        Ok(Parser {
            lex,
            tok,
            pos,
            depth: 0,
        })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (pos, tok) = self.lex.next()?;
        self.pos = pos;
        self.tok = tok;
        Ok(())
    }

    fn describe(&self) -> String {
        match &self.tok {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::End => "end of input".to_string(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.tok == Tok::Op(c) {
            self.bump()
        } else {
            Err(ParseError::new(
                self.pos,
                format!("expected '{c}', found {}", self.describe()),
            ))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError::new(self.pos, "expression nested too deeply"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => break,
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => break,
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let e = match self.tok {
            Tok::Op('-') => {
                self.bump()?;
                Expr::Neg(Box::new(self.unary()?))
            }
            Tok::Op('+') => {
                self.bump()?;
                self.unary()?
            }
            _ => self.power()?,
        };
        self.depth -= 1;
        Ok(e)
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos;
        match self.tok.clone() {
            Tok::Num(x) => {
                self.bump()?;
                Ok(Expr::Num(x))
            }
            Tok::Op('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    return self.call(func, pos);
                }
                if self.tok == Tok::Op('(') {
                    return Err(ParseError::new(pos, format!("unknown function '{name}'")));
                }
                identifier(&name).ok_or_else(|| ParseError::new(pos, format!("unknown identifier '{name}'")))
            }
            _ => Err(ParseError::new(
                pos,
                format!("expected a value, found {}", self.describe()),
            )),
        }
    }

    fn call(&mut self, func: Func, pos: usize) -> Result<Expr, ParseError> {
        if self.tok != Tok::Op('(') {
            return Err(ParseError::new(
                self.pos,
                format!("expected '(' after '{}'", func.name()),
            ));
        }
        self.bump()?;
        if self.tok == Tok::Op(')') {
            return Err(ParseError::new(pos, format!("{} takes 1 argument, got 0", func.name())));
        }
        let arg = self.expr()?;
        let mut count = 1;
        while self.tok == Tok::Op(',') {
            self.bump()?;
            self.expr()?;
            count += 1;
        }
        if count != 1 {
            return Err(ParseError::new(
                pos,
                format!("{} takes 1 argument, got {count}", func.name()),
            ));
        }
        self.expect(')')?;
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

fn identifier(name: &str) -> Option<Expr> {
    match name {
        "pi" => return Some(Expr::Num(std::f64::consts::PI)),
        "t" => return Some(Expr::Var(Var::Time)),
        "h" => return Some(Expr::Var(Var::Step)),
        _ => {}
    }
    let mut chars = name.chars();
    let kind = match chars.next()? {
        'q' => VarKind::Q,
        'y' => VarKind::Y,
        'p' => VarKind::P,
        'u' => VarKind::U,
        _ => return None,
    };
    let digits = chars.as_str();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let index = digits.parse().ok()?;
    Some(Expr::Var(Var::Indexed(kind, index)))
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(ParseError::new(
            p.pos,
            format!("unexpected {} after expression", p.describe()),
        ));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(text: &str, q: &[f64], y: &[f64]) -> f64 {
        parse_expr(text).unwrap().eval(&Env { q, y, ..Env::default() })
    }

    #[test]
    fn derivative_matches_central_differences() {
        let cases = [
            "0.5*y1^2 - 0.5*q1^2",
            "sin(q1)*y1^3 + exp(q1*y1)",
            "log(2 + q1^2) / sqrt(1 + y1^2)",
            "tan(0.3*q1) - cos(y1)^2",
            "(1 + q1^2)^(0.5*y1)",
        ];
        let q1 = Var::Indexed(VarKind::Q, 1);
        for text in cases {
            let e = parse_expr(text).unwrap();
            let d = e.derivative(q1).unwrap();
            for (q, y) in [(0.3, -0.7), (-1.1, 0.4), (0.9, 1.3)] {
                let step = 1e-5;
                let fd = (at(text, &[q + step], &[y]) - at(text, &[q - step], &[y])) / (2.0 * step);
                let exact = d.eval(&Env {
                    q: &[q],
                    y: &[y],
                    ..Env::default()
                });
                assert!(
                    (fd - exact).abs() <= 1e-7 * exact.abs().max(1.0),
                    "{text}: {fd} vs {exact}"
                );
            }
        }
        assert!(parse_expr("abs(q1)").unwrap().derivative(q1).is_none());
        assert_eq!(parse_expr("y1^2").unwrap().derivative(q1), Some(Expr::Num(0.0)));
    }

    #[test]
    fn precedence() {
        assert_eq!(at("q1^2 + y1*y1", &[2.0], &[3.0]), 13.0);
        assert_eq!(at("-q1^2", &[2.0], &[]), -4.0);
        assert_eq!(at("2^3^2", &[], &[]), 512.0);
        assert_eq!(at("2^-1", &[], &[]), 0.5);
        assert_eq!(at("8/2/2", &[], &[]), 2.0);
        assert_eq!(at("1 - 2 - 3", &[], &[]), -4.0);
        assert_eq!(at("-2*3", &[], &[]), -6.0);
        assert!((at("sin(q1)/q1", &[1e-8], &[]) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn errors_carry_positions() {
        let cases = [
            ("q1 +", 4),
            ("(q1", 3),
            ("q1 $ 2", 3),
            ("foo(1)", 0),
            ("z1", 0),
            ("sin(1, 2)", 0),
            ("sin 1", 4),
            ("q0", 0),
            ("1 2", 2),
            ("", 0),
        ];
        for (text, pos) in cases {
            let e = parse_expr(text).unwrap_err();
            assert_eq!(e.pos, pos, "{text}: {e}");
        }
    }

    #[test]
    fn printing_preserves_structure() {
        for text in [
            "-q1^2",
            "(-q1)^2",
            "q1 - (y1 - 2)",
            "2^3^2",
            "(2^3)^2",
            "-(q1*y1)",
            "q1/(y1*2)",
            "2^-q1",
        ] {
            let e = parse_expr(text).unwrap();
            assert_eq!(parse_expr(&e.to_string()).unwrap(), e, "{text} -> {e}");
        }
    }

    #[test]
    fn deep_nesting_is_an_error() {
        let text = "(".repeat(10_000) + "1" + &")".repeat(10_000);
        assert!(parse_expr(&text).is_err());
        let text = "-".repeat(10_000) + "1";
        assert!(parse_expr(&text).is_err());
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1e-8, 123456.789, 1e300, 5e-324, 2.0f64.sqrt()] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
