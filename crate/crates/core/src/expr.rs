//! A tiny expression language for basis and weight functions.
//!
//! One-variable expressions use the variable `t`; the model layer binds it to
//! `x` or `y` depending on the axis. Two-variable expressions (used for the
//! right-hand side of second-kind equations) use `x` and `y` and do not allow
//! `piecewise`.
//!
//! ```text
//! expr     := term (('+'|'-') term)* ;
//! term     := factor (('*'|'/') factor)* ;
//! factor   := unary ('^' factor)? ;
//! unary    := '-'? atom ;
//! atom     := NUMBER | VAR | 'pi' | FUNC '(' expr ')' | '(' expr ')' | piecewise ;
//! piecewise:= 'piecewise' '(' seg (';' seg)* ')' ;
//! seg      := '[' BOUND ',' BOUND ']' ':' expr ;
//! ```
//!
//! `BOUND` is a `NUMBER` with an optional leading `-` so that segments can live
//! on intervals with negative ends. Piecewise segments are left-closed and
//! right-open, except that a point equal to the upper end of a segment is
//! accepted by that segment when no other segment contains it (this closes
//! the last segment).

use std::fmt;

use thiserror::Error;

/// Errors raised while parsing expression text.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("piecewise with no segments at byte {offset}")]
    EmptyPiecewise { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::EmptyPiecewise { offset } => *offset,
        }
    }
}

/// Evaluation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("sqrt of negative value {0}")]
    SqrtNegative(f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("fractional power {exponent} of negative base {base}")]
    FractionalPowerOfNegative { base: f64, exponent: f64 },
    #[error("no piecewise segment contains {0}")]
    OutsideSegments(f64),
    #[error("non-finite result at {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, v: f64) -> Result<f64, DomainError> {
        match self {
            Func::Sin => Ok(v.sin()),
            Func::Cos => Ok(v.cos()),
            Func::Exp => Ok(v.exp()),
            Func::Log if v <= 0.0 => Err(DomainError::LogNonPositive(v)),
            Func::Log => Ok(v.ln()),
            Func::Sqrt if v < 0.0 => Err(DomainError::SqrtNegative(v)),
            Func::Sqrt => Ok(v.sqrt()),
            Func::Abs => Ok(v.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub body: Node,
}

impl Segment {
    fn contains_half_open(&self, t: f64) -> bool {
        self.lo <= t && t < self.hi
    }
}

/// Expression tree. Variables are referenced by index into the variable list
/// the expression was parsed with.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Pi,
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    Piecewise(Vec<Segment>),
}

/// How the piecewise argument is chosen during evaluation.
#[derive(Clone, Copy)]
enum Selector {
    /// Use the evaluation point itself.
    Point,
    /// Use a fixed representative point (the midpoint of a smooth piece), which
    /// yields one-sided limits at piece boundaries.
    Fixed(f64),
}

impl Node {
    fn eval(&self, vars: &[f64], sel: Selector) -> Result<f64, DomainError> {
        match self {
            Node::Num(v) => Ok(*v),
            Node::Pi => Ok(std::f64::consts::PI),
            Node::Var(i) => Ok(vars[*i]),
            Node::Neg(a) => Ok(-a.eval(vars, sel)?),
            Node::Bin(op, a, b) => {
                let a = a.eval(vars, sel)?;
                let b = b.eval(vars, sel)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div if b == 0.0 => Err(DomainError::DivisionByZero),
                    BinOp::Div => Ok(a / b),
                    BinOp::Pow => power(a, b),
                }
            }
            Node::Call(f, a) => f.apply(a.eval(vars, sel)?),
            Node::Piecewise(segs) => {
                let t = match sel {
                    Selector::Point => vars[0],
                    Selector::Fixed(m) => m,
                };
                let seg = segs
                    .iter()
                    .find(|s| s.contains_half_open(t))
                    .or_else(|| segs.iter().rev().find(|s| s.hi == t))
                    .ok_or(DomainError::OutsideSegments(t))?;
                seg.body.eval(vars, sel)
            }
        }
    }

    /// True if the node is built from literals only, once piecewise nodes are
    /// resolved at `sel`.
    fn is_literal(&self, sel: Selector) -> bool {
        match self {
            Node::Num(_) | Node::Pi => true,
            Node::Var(_) => false,
            Node::Neg(a) | Node::Call(_, a) => a.is_literal(sel),
            Node::Bin(_, a, b) => a.is_literal(sel) && b.is_literal(sel),
            Node::Piecewise(segs) => match sel {
                Selector::Point => segs.iter().all(|s| s.body.is_literal(sel)),
                Selector::Fixed(m) => segs
                    .iter()
                    .find(|s| s.contains_half_open(m))
                    .or_else(|| segs.iter().rev().find(|s| s.hi == m))
                    .is_some_and(|s| s.body.is_literal(sel)),
            },
        }
    }

    fn collect_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            Node::Num(_) | Node::Pi | Node::Var(_) => {}
            Node::Neg(a) | Node::Call(_, a) => a.collect_breakpoints(out),
            Node::Bin(_, a, b) => {
                a.collect_breakpoints(out);
                b.collect_breakpoints(out);
            }
            Node::Piecewise(segs) => {
                let hull_lo = segs.iter().map(|s| s.lo).fold(f64::INFINITY, f64::min);
                let hull_hi = segs.iter().map(|s| s.hi).fold(f64::NEG_INFINITY, f64::max);
                for s in segs {
                    for b in [s.lo, s.hi] {
                        if b != hull_lo && b != hull_hi {
                            out.push(b);
                        }
                    }
                    s.body.collect_breakpoints(out);
                }
            }
        }
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, DomainError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(DomainError::FractionalPowerOfNegative { base, exponent });
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(DomainError::DivisionByZero);
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        Ok(base.powi(exponent as i32))
    } else {
        Ok(base.powf(exponent))
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, &["t"])
    }
}

impl Node {
    fn write(&self, f: &mut fmt::Formatter<'_>, names: &[&str]) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v}"),
            Node::Pi => f.write_str("pi"),
            Node::Var(i) => f.write_str(names[*i]),
            Node::Neg(a) => {
                f.write_str("(-")?;
                a.write(f, names)?;
                f.write_str(")")
            }
            Node::Bin(op, a, b) => {
                f.write_str("(")?;
                a.write(f, names)?;
                write!(f, " {} ", op.symbol())?;
                b.write(f, names)?;
                f.write_str(")")
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f, names)?;
                f.write_str(")")
            }
            Node::Piecewise(segs) => {
                f.write_str("piecewise(")?;
                for (i, s) in segs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "[{},{}]:", s.lo, s.hi)?;
                    s.body.write(f, names)?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
    allow_piecewise: bool,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn syntax<T>(&self, offset: usize, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::Syntax {
            offset,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> PResult<()> {
        match self.peek() {
            Some(b) if b == c => {
                self.pos += 1;
                Ok(())
            }
            Some(b) => self.syntax(
                self.pos,
                format!("expected `{}`, found `{}`", c as char, b as char),
            ),
            None => self.syntax(
                self.pos,
                format!("expected `{}`, found end of input", c as char),
            ),
        }
    }

    fn expr(&mut self) -> PResult<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<Node> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> PResult<Node> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> PResult<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let a = self.atom()?;
            return Ok(Node::Neg(Box::new(a)));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Node> {
        let start = {
            self.skip_ws();
            self.pos
        };
        match self.peek() {
            None => self.syntax(start, "unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b) if b.is_ascii_digit() || b == b'.' => Ok(Node::Num(self.number()?)),
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                let name = self.ident();
                if name == "pi" {
                    return Ok(Node::Pi);
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                if let Some(func) = Func::from_name(name) {
                    self.expect(b'(')?;
                    let arg = self.expr()?;
                    self.expect(b')')?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if name == "piecewise" && self.allow_piecewise {
                    return self.piecewise(start);
                }
                Err(ParseError::UnknownIdentifier {
                    name: name.to_string(),
                    offset: start,
                })
            }
            Some(b) => self.syntax(start, format!("unexpected `{}`", b as char)),
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        // identifiers are ASCII by construction
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn number(&mut self) -> PResult<f64> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return self.syntax(start, "malformed number");
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return self.syntax(save, "malformed exponent");
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => self.syntax(start, format!("numeric literal `{text}` out of range")),
        }
    }

    fn bound(&mut self) -> PResult<f64> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(-self.number()?);
        }
        self.number()
    }

    fn piecewise(&mut self, start: usize) -> PResult<Node> {
        self.expect(b'(')?;
        if self.peek() == Some(b')') {
            return Err(ParseError::EmptyPiecewise { offset: start });
        }
        let mut segs = Vec::new();
        loop {
            self.expect(b'[')?;
            let at = self.pos;
            let lo = self.bound()?;
            self.expect(b',')?;
            let hi = self.bound()?;
            self.expect(b']')?;
            if lo >= hi {
                return self.syntax(at, format!("empty segment [{lo},{hi}]"));
            }
            self.expect(b':')?;
            let body = self.expr()?;
            segs.push(Segment { lo, hi, body });
            match self.peek() {
                Some(b';') => self.pos += 1,
                _ => break,
            }
        }
        self.expect(b')')?;
        Ok(Node::Piecewise(segs))
    }
}

fn parse_with(text: &str, vars: &[&str], allow_piecewise: bool) -> PResult<Node> {
    if let Some(i) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(ParseError::Syntax {
            offset: i,
            message: "non-ASCII input".into(),
        });
    }
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars,
        allow_piecewise,
    };
    if p.peek().is_none() {
        return p.syntax(p.pos, "empty expression");
    }
    let node = p.expr()?;
    if let Some(b) = p.peek() {
        return p.syntax(p.pos, format!("unexpected trailing `{}`", b as char));
    }
    Ok(node)
}

/// A parsed one-variable expression in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr1D {
    ast: Node,
    breakpoints: Vec<f64>,
    source: String,
}

/// Parse a one-variable expression.
pub fn parse_expr(text: &str) -> Result<Expr1D, ParseError> {
    let ast = parse_with(text, &["t"], true)?;
    let mut breakpoints = Vec::new();
    ast.collect_breakpoints(&mut breakpoints);
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    Ok(Expr1D {
        ast,
        breakpoints,
        source: text.to_string(),
    })
}

impl Expr1D {
    pub fn ast(&self) -> &Node {
        &self.ast
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Interior piecewise boundaries, sorted and deduplicated.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Breakpoints strictly inside `(lo, hi)`.
    pub fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.breakpoints
            .iter()
            .copied()
            .filter(|&b| b > lo && b < hi)
            .collect()
    }

    pub fn eval(&self, t: f64) -> Result<f64, DomainError> {
        finite(self.ast.eval(&[t], Selector::Point)?, t)
    }

    /// Evaluate the smooth continuation of the piece that contains `piece_mid`.
    /// At a piece end this gives the one-sided limit from inside the piece.
    pub fn eval_on_piece(&self, t: f64, piece_mid: f64) -> Result<f64, DomainError> {
        finite(self.ast.eval(&[t], Selector::Fixed(piece_mid))?, t)
    }

    /// Constant detection on the piece `[lo, hi]` (which must lie between two
    /// consecutive breakpoints): literal trees are constant, otherwise 257
    /// equispaced samples must agree to `1e-12 * (1 + max|value|)`.
    /// On failure the offending sample point is returned with the error.
    pub fn is_constant_on(&self, lo: f64, hi: f64) -> Result<bool, (f64, DomainError)> {
        let mid = 0.5 * (lo + hi);
        if self.ast.is_literal(Selector::Fixed(mid)) {
            return Ok(true);
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut amax: f64 = 0.0;
        for i in 0..257 {
            let t = lo + (hi - lo) * i as f64 / 256.0;
            let v = self.eval_on_piece(t, mid).map_err(|e| (t, e))?;
            min = min.min(v);
            max = max.max(v);
            amax = amax.max(v.abs());
        }
        Ok(max - min < 1e-12 * (1.0 + amax))
    }
}

impl fmt::Display for Expr1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.write(f, &["t"])
    }
}

fn finite(v: f64, at: f64) -> Result<f64, DomainError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DomainError::NonFinite(at))
    }
}

/// A parsed two-variable expression in `x` and `y` (no `piecewise`).
#[derive(Debug, Clone, PartialEq)]
pub struct Expr2D {
    ast: Node,
    source: String,
}

pub fn parse_expr2(text: &str) -> Result<Expr2D, ParseError> {
    let ast = parse_with(text, &["x", "y"], false)?;
    Ok(Expr2D {
        ast,
        source: text.to_string(),
    })
}

impl Expr2D {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, DomainError> {
        let v = self.ast.eval(&[x, y], Selector::Point)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainError::NonFinite(x))
        }
    }
}

impl fmt::Display for Expr2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.write(f, &["x", "y"])
    }
}
