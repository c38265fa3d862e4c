//! Scalar expressions over named variables.
//!
//! Every coefficient function in the crate (anchors, structure functions,
//! splittings, cocycles, cube maps) is an [`Expr`]. Trees are immutable and
//! share subtrees through `Arc`, so cloning and differentiating are cheap.
//!
//! The grammar is the usual infix one: `^` binds tighter than unary minus,
//! which binds tighter than `*` and `/`, then `+` and `-`. Exponents must be
//! integer literals. Functions: `sin cos exp log sqrt`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("exponent at offset {offset} must be a constant integer")]
    NonConstantExponent { offset: usize },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl ExprError {
    /// Byte offset into the source text, when the error came from parsing.
    pub fn offset(&self) -> Option<usize> {
        match self {
            ExprError::Syntax { offset, .. }
            | ExprError::UnknownFunction { offset, .. }
            | ExprError::NonConstantExponent { offset } => Some(*offset),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> Result<f64, ExprError> {
        Ok(match self {
            UnaryOp::Neg => -x,
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => {
                if !(x > 0.0) {
                    return Err(ExprError::Domain(format!("log of non-positive value {x}")));
                }
                x.ln()
            }
            UnaryOp::Sqrt => {
                if !(x >= 0.0) {
                    return Err(ExprError::Domain(format!("sqrt of negative value {x}")));
                }
                x.sqrt()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn apply(self, a: f64, b: f64) -> Result<f64, ExprError> {
        Ok(match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b == 0.0 {
                    return Err(ExprError::Domain("division by zero".into()));
                }
                a / b
            }
        })
    }

    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

fn powi(base: f64, exp: i32) -> Result<f64, ExprError> {
    if exp < 0 && base == 0.0 {
        return Err(ExprError::Domain("zero raised to a negative power".into()));
    }
    Ok(base.powi(exp))
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Arc<str>),
    Unary(UnaryOp, Arc<Expr>),
    Binary(BinaryOp, Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
}

/// Variable bindings for [`Expr::eval`].
pub type Env = BTreeMap<String, f64>;

impl Default for Expr {
    fn default() -> Self {
        Expr::Const(0.0)
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::Const(v)
    }
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn one() -> Self {
        Expr::Const(1.0)
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(Arc::from(name))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    // Folding constructors. Only constants are folded, plus the neutral and
    // absorbing elements of + and *.

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        if let Expr::Const(c) = e {
            if let Ok(v) = op.apply(c) {
                return Expr::Const(v);
            }
        }
        if op == UnaryOp::Neg {
            if let Expr::Unary(UnaryOp::Neg, inner) = &e {
                return (**inner).clone();
            }
        }
        Expr::Unary(op, Arc::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        match (op, a.as_const(), b.as_const()) {
            (_, Some(x), Some(y)) => {
                if let Ok(v) = op.apply(x, y) {
                    return Expr::Const(v);
                }
            }
            (BinaryOp::Add, Some(x), _) if x == 0.0 => return b,
            (BinaryOp::Add | BinaryOp::Sub, _, Some(y)) if y == 0.0 => return a,
            (BinaryOp::Sub, Some(x), _) if x == 0.0 => return Expr::unary(UnaryOp::Neg, b),
            (BinaryOp::Mul, Some(x), _) | (BinaryOp::Mul, _, Some(x)) if x == 0.0 => {
                return Expr::zero()
            }
            (BinaryOp::Mul, Some(x), _) if x == 1.0 => return b,
            (BinaryOp::Mul | BinaryOp::Div, _, Some(y)) if y == 1.0 => return a,
            (BinaryOp::Mul, Some(x), _) if x == -1.0 => return Expr::unary(UnaryOp::Neg, b),
            (BinaryOp::Mul, _, Some(y)) if y == -1.0 => return Expr::unary(UnaryOp::Neg, a),
            (BinaryOp::Div, Some(x), _) if x == 0.0 => return Expr::zero(),
            _ => {}
        }
        Expr::Binary(op, Arc::new(a), Arc::new(b))
    }

    pub fn pow(base: Expr, exp: i32) -> Expr {
        match exp {
            0 => return Expr::one(),
            1 => return base,
            _ => {}
        }
        if let Expr::Const(c) = base {
            if let Ok(v) = powi(c, exp) {
                return Expr::Const(v);
            }
        }
        Expr::Pow(Arc::new(base), exp)
    }

    pub fn sin(self) -> Expr {
        Expr::unary(UnaryOp::Sin, self)
    }
    pub fn cos(self) -> Expr {
        Expr::unary(UnaryOp::Cos, self)
    }
    pub fn exp(self) -> Expr {
        Expr::unary(UnaryOp::Exp, self)
    }
    pub fn log(self) -> Expr {
        Expr::unary(UnaryOp::Log, self)
    }
    pub fn sqrt(self) -> Expr {
        Expr::unary(UnaryOp::Sqrt, self)
    }
    pub fn powi(self, k: i32) -> Expr {
        Expr::pow(self, k)
    }

    /// Sum of an iterator of expressions, folded left.
    pub fn sum<I: IntoIterator<Item = Expr>>(it: I) -> Expr {
        it.into_iter().fold(Expr::zero(), |acc, e| acc + e)
    }

    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        Parser::new(text).parse_all()
    }

    pub fn eval(&self, env: &Env) -> Result<f64, ExprError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(name) => env
                .get(&**name)
                .copied()
                .ok_or_else(|| ExprError::Unbound(name.to_string())),
            Expr::Unary(op, e) => op.apply(e.eval(env)?),
            Expr::Binary(op, a, b) => op.apply(a.eval(env)?, b.eval(env)?),
            Expr::Pow(b, k) => powi(b.eval(env)?, *k),
        }
    }

    /// Exact symbolic derivative with respect to `var`.
    pub fn diff(&self, var: &str) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(name) => {
                if &**name == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Unary(op, e) => {
                let de = e.diff(var);
                if de.is_zero() {
                    return Expr::zero();
                }
                let inner = (**e).clone();
                match op {
                    UnaryOp::Neg => -de,
                    UnaryOp::Sin => inner.cos() * de,
                    UnaryOp::Cos => -(inner.sin() * de),
                    UnaryOp::Exp => self.clone() * de,
                    UnaryOp::Log => de / inner,
                    UnaryOp::Sqrt => de / (Expr::Const(2.0) * self.clone()),
                }
            }
            Expr::Binary(op, a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinaryOp::Add => da + db,
                    BinaryOp::Sub => da - db,
                    BinaryOp::Mul => da * b + a * db,
                    BinaryOp::Div => {
                        if db.is_zero() {
                            da / b
                        } else {
                            (da * b.clone() - a * db) / Expr::pow(b, 2)
                        }
                    }
                }
            }
            Expr::Pow(b, k) => {
                let db = b.diff(var);
                if db.is_zero() {
                    return Expr::zero();
                }
                Expr::Const(*k as f64) * Expr::pow((**b).clone(), k - 1) * db
            }
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(n) => {
                out.insert(n.to_string());
            }
            Expr::Unary(_, e) | Expr::Pow(e, _) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(n) => &**n == var,
            Expr::Unary(_, e) | Expr::Pow(e, _) => e.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Replace variables by expressions.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(n) => map.get(&**n).cloned().unwrap_or_else(|| self.clone()),
            Expr::Unary(op, e) => Expr::unary(*op, e.substitute(map)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(map), b.substitute(map)),
            Expr::Pow(b, k) => Expr::pow(b.substitute(map), *k),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, e) | Expr::Pow(e, _) => 1 + e.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Compile against a fixed variable ordering for fast repeated evaluation.
    pub fn compile(&self, names: &[&str]) -> Result<Compiled, ExprError> {
        let mut prog = Vec::new();
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        self.emit(names, &mut prog, &mut depth, &mut max_depth)?;
        Ok(Compiled { prog, max_depth })
    }

    fn emit(
        &self,
        names: &[&str],
        prog: &mut Vec<Op>,
        depth: &mut usize,
        max_depth: &mut usize,
    ) -> Result<(), ExprError> {
        match self {
            Expr::Const(c) => {
                prog.push(Op::Const(*c));
                *depth += 1;
            }
            Expr::Var(n) => {
                let idx = names
                    .iter()
                    .position(|m| *m == &**n)
                    .ok_or_else(|| ExprError::Unbound(n.to_string()))?;
                prog.push(Op::Var(idx));
                *depth += 1;
            }
            Expr::Unary(op, e) => {
                e.emit(names, prog, depth, max_depth)?;
                prog.push(Op::Unary(*op));
            }
            Expr::Pow(b, k) => {
                b.emit(names, prog, depth, max_depth)?;
                prog.push(Op::Pow(*k));
            }
            Expr::Binary(op, a, b) => {
                a.emit(names, prog, depth, max_depth)?;
                b.emit(names, prog, depth, max_depth)?;
                prog.push(Op::Binary(*op));
                *depth -= 1;
            }
        }
        *max_depth = (*max_depth).max(*depth);
        Ok(())
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, self, rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, self, rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, self, rhs)
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, self, rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}

impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(self, rhs: f64) -> Expr {
        Expr::Const(rhs) * self
    }
}

// Printing precedence levels: 1 = additive, 2 = multiplicative, 3 = unary
// minus, 4 = power, 5 = atom.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
        Expr::Const(_) | Expr::Var(_) => 5,
        Expr::Unary(UnaryOp::Neg, _) => 3,
        Expr::Unary(_, _) => 5,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => 1,
        Expr::Binary(_, _, _) => 2,
        Expr::Pow(_, _) => 4,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "-{:?}", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Unary(UnaryOp::Neg, e) => {
                write!(f, "-")?;
                // -(-x) and -(a*b) keep their parentheses
                write_wrapped(f, e, 4)
            }
            Expr::Unary(op, e) => write!(f, "{}({e})", op.name()),
            Expr::Binary(op, a, b) => {
                let (lmin, rmin) = match op {
                    BinaryOp::Add => (1, 1),
                    BinaryOp::Sub => (1, 2),
                    BinaryOp::Mul => (2, 3),
                    BinaryOp::Div => (2, 4),
                };
                write_wrapped(f, a, lmin)?;
                write!(f, " {} ", op.symbol())?;
                write_wrapped(f, b, rmin)
            }
            Expr::Pow(b, k) => {
                write_wrapped(f, b, 5)?;
                if *k < 0 {
                    write!(f, "^(-{})", -(*k as i64))
                } else {
                    write!(f, "^{k}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Unary(UnaryOp),
    Binary(BinaryOp),
    Pow(i32),
}

/// Stack-machine form of an [`Expr`] with variables resolved to slots.
#[derive(Debug, Clone)]
pub struct Compiled {
    prog: Vec<Op>,
    max_depth: usize,
}

impl Compiled {
    pub fn eval(&self, vars: &[f64]) -> Result<f64, ExprError> {
        const INLINE: usize = 48;
        if self.max_depth <= INLINE {
            let mut stack = [0.0f64; INLINE];
            self.run(vars, &mut stack)
        } else {
            let mut stack = vec![0.0f64; self.max_depth];
            self.run(vars, &mut stack)
        }
    }

    fn run(&self, vars: &[f64], stack: &mut [f64]) -> Result<f64, ExprError> {
        let mut sp = 0usize;
        for op in &self.prog {
            match *op {
                Op::Const(c) => {
                    stack[sp] = c;
                    sp += 1;
                }
                Op::Var(i) => {
                    stack[sp] = vars[i];
                    sp += 1;
                }
                Op::Unary(u) => stack[sp - 1] = u.apply(stack[sp - 1])?,
                Op::Pow(k) => stack[sp - 1] = powi(stack[sp - 1], k)?,
                Op::Binary(b) => {
                    sp -= 1;
                    stack[sp - 1] = b.apply(stack[sp - 1], stack[sp])?;
                }
            }
        }
        Ok(stack[0])
    }

    /// True when the program is a single constant.
    pub fn constant(&self) -> Option<f64> {
        match self.prog.as_slice() {
            [Op::Const(c)] => Some(*c),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_start: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            tok: Tok::End,
            tok_start: 0,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.tok_start,
            message: message.into(),
        })
    }

    fn advance(&mut self) -> Result<(), ExprError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        if self.pos >= bytes.len() {
            self.tok = Tok::End;
            return Ok(());
        }
        let c = bytes[self.pos];
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            let mut integral = true;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos < bytes.len() && bytes[self.pos] == b'.' {
                integral = false;
                self.pos += 1;
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
            if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
                let save = self.pos;
                self.pos += 1;
                if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                    self.pos += 1;
                }
                if self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    integral = false;
                    while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                } else {
                    self.pos = save;
                }
            }
            let text = &self.src[start..self.pos];
            match text.parse::<f64>() {
                Ok(v) => self.tok = Tok::Num(v, integral),
                Err(_) => return self.err(format!("malformed number `{text}`")),
            }
            return Ok(());
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            self.tok = Tok::Ident(self.src[start..self.pos].to_string());
            return Ok(());
        }
        self.pos += 1;
        self.tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                // report the full character, not a byte of it
                let ch = self.src[self.tok_start..].chars().next().unwrap_or('?');
                return self.err(format!("unexpected character `{ch}`"));
            }
        };
        Ok(())
    }

    fn parse_all(mut self) -> Result<Expr, ExprError> {
        self.advance()?;
        let e = self.expr()?;
        if self.tok != Tok::End {
            return self.err("unexpected trailing input");
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Arc::new(lhs), Arc::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Arc::new(lhs), Arc::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.tok == Tok::Op('-') {
            self.advance()?;
            let e = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Arc::new(e)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.tok != Tok::Op('^') {
            return Ok(base);
        }
        self.advance()?;
        let exp_offset = self.tok_start;
        let k = self.exponent().map_err(|e| match e {
            ExprError::Syntax { .. } => ExprError::NonConstantExponent { offset: exp_offset },
            other => other,
        })?;
        Ok(Expr::Pow(Arc::new(base), k))
    }

    fn exponent(&mut self) -> Result<i32, ExprError> {
        let paren = self.tok == Tok::LParen;
        if paren {
            self.advance()?;
        }
        let negative = self.tok == Tok::Op('-');
        if negative {
            self.advance()?;
        }
        let k = match self.tok {
            Tok::Num(v, true) if v <= i32::MAX as f64 => v as i32,
            _ => return self.err("expected integer exponent"),
        };
        self.advance()?;
        if paren {
            if self.tok != Tok::RParen {
                return self.err("expected `)`");
            }
            self.advance()?;
        }
        if self.tok == Tok::Op('^') {
            return self.err("chained exponents are not supported");
        }
        Ok(if negative { -k } else { k })
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.tok.clone() {
            Tok::Num(v, _) => {
                self.advance()?;
                Ok(Expr::Const(v))
            }
            Tok::Ident(name) => {
                let start = self.tok_start;
                self.advance()?;
                if self.tok == Tok::LParen {
                    let op = UnaryOp::from_name(&name).ok_or(ExprError::UnknownFunction {
                        name: name.clone(),
                        offset: start,
                    })?;
                    self.advance()?;
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return self.err("expected `)`");
                    }
                    self.advance()?;
                    Ok(Expr::Unary(op, Arc::new(arg)))
                } else {
                    Ok(Expr::Var(Arc::from(name.as_str())))
                }
            }
            Tok::LParen => {
                self.advance()?;
                let e = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.err("expected `)`");
                }
                self.advance()?;
                Ok(e)
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::Op(c) => self.err(format!("unexpected operator `{c}`")),
            Tok::RParen => self.err("unexpected `)`"),
        }
    }
}
