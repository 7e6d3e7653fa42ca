//! Arithmetic expression language for scalar coefficient functions.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := unary ("^" factor)?
//! unary  := "-"? atom
//! atom   := NUMBER | "x" | IDENT "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Precedence: `^` (right-associative) binds tighter than unary minus,
//! so `-x^2` parses as `-(x^2)`. Functions: exp, log, sqrt, abs, sgn,
//! sin, cos, tanh, min, max, pow. Constants: pi, e (folded to literals
//! at parse time).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { offset: usize, name: String },
    #[error("function `{name}` takes {arity} argument(s), got {got} (byte {offset})")]
    Arity {
        offset: usize,
        name: String,
        arity: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Sgn,
    Sin,
    Cos,
    Tanh,
    Min,
    Max,
    Pow,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sgn => "sgn",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sgn" => Func::Sgn,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => return None,
        })
    }
}

/// Immutable expression tree. Evaluation is pure; trees are cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Expr {
    /// Parses a single-variable expression in `x`.
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        Parser::new(src, false).parse_full()
    }

    /// Parses a two-variable expression in `x` and `y` (used for
    /// state-dependent jump densities).
    pub fn parse_xy(src: &str) -> Result<Expr, ParseError> {
        Parser::new(src, true).parse_full()
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_xy(x, f64::NAN)
    }

    pub fn eval_xy(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Neg(e) => -e.eval_xy(x, y),
            Expr::Bin(op, a, b) => {
                let a = a.eval_xy(x, y);
                let b = b.eval_xy(x, y);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval_xy(x, y);
                match f {
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Sgn => sgn(a),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tanh => a.tanh(),
                    Func::Min => a.min(args[1].eval_xy(x, y)),
                    Func::Max => a.max(args[1].eval_xy(x, y)),
                    Func::Pow => a.powf(args[1].eval_xy(x, y)),
                }
            }
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 1.0)
    }

    /// Symbolic derivative with respect to `x`. Total on the supported
    /// grammar; abs/sgn/min/max differentiate to their a.e. derivatives.
    pub fn differentiate(&self) -> Expr {
        use BinOp::*;
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(Var::X) => Expr::Num(1.0),
            Expr::Var(Var::Y) => Expr::Num(0.0),
            Expr::Neg(e) => neg(e.differentiate()),
            Expr::Bin(Add, a, b) => add(a.differentiate(), b.differentiate()),
            Expr::Bin(Sub, a, b) => sub(a.differentiate(), b.differentiate()),
            Expr::Bin(Mul, a, b) => add(
                mul(a.differentiate(), (**b).clone()),
                mul((**a).clone(), b.differentiate()),
            ),
            Expr::Bin(Div, a, b) => {
                // (a/b)' = a'/b - a b'/b^2
                sub(
                    div(a.differentiate(), (**b).clone()),
                    div(
                        mul((**a).clone(), b.differentiate()),
                        pow((**b).clone(), Expr::Num(2.0)),
                    ),
                )
            }
            Expr::Bin(Pow, a, b) => diff_pow(a, b),
            Expr::Call(f, args) => {
                let a = args[0].clone();
                let da = args[0].differentiate();
                match f {
                    Func::Exp => mul(Expr::Call(Func::Exp, vec![a]), da),
                    Func::Log => div(da, a),
                    Func::Sqrt => div(
                        da,
                        mul(Expr::Num(2.0), Expr::Call(Func::Sqrt, vec![a])),
                    ),
                    Func::Abs => mul(Expr::Call(Func::Sgn, vec![a]), da),
                    Func::Sgn => Expr::Num(0.0),
                    Func::Sin => mul(Expr::Call(Func::Cos, vec![a]), da),
                    Func::Cos => neg(mul(Expr::Call(Func::Sin, vec![a]), da)),
                    Func::Tanh => {
                        // 1 - tanh(a)^2
                        mul(
                            sub(
                                Expr::Num(1.0),
                                pow(Expr::Call(Func::Tanh, vec![a]), Expr::Num(2.0)),
                            ),
                            da,
                        )
                    }
                    Func::Min | Func::Max => {
                        // a.e. derivative: pick the branch that attains the
                        // extremum, averaging on ties via sgn.
                        let b = args[1].clone();
                        let db = args[1].differentiate();
                        let s = if *f == Func::Min {
                            Expr::Call(Func::Sgn, vec![sub(b.clone(), a.clone())])
                        } else {
                            Expr::Call(Func::Sgn, vec![sub(a.clone(), b.clone())])
                        };
                        let half = Expr::Num(0.5);
                        add(
                            mul(
                                mul(half.clone(), add(Expr::Num(1.0), s.clone())),
                                da,
                            ),
                            mul(mul(half, sub(Expr::Num(1.0), s)), db),
                        )
                    }
                    Func::Pow => diff_pow(&args[0], &args[1]),
                }
            }
        }
    }
}

fn diff_pow(a: &Expr, b: &Expr) -> Expr {
    let da = a.differentiate();
    let db = b.differentiate();
    if db.is_zero() {
        // b * a^(b-1) * a'
        mul(
            mul(
                b.clone(),
                pow(a.clone(), sub(b.clone(), Expr::Num(1.0))),
            ),
            da,
        )
    } else {
        // a^b (b' log a + b a'/a)
        mul(
            pow(a.clone(), b.clone()),
            add(
                mul(db, Expr::Call(Func::Log, vec![a.clone()])),
                div(mul(b.clone(), da), a.clone()),
            ),
        )
    }
}

// Light constant folding so derivative trees stay small.
fn add(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_zero() {
        return a;
    }
    if a.is_zero() {
        return neg(b);
    }
    if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
        return Expr::Num(x - y);
    }
    Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
}

fn neg(a: Expr) -> Expr {
    if a.is_zero() {
        return a;
    }
    Expr::Neg(Box::new(a))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        return Expr::Num(0.0);
    }
    if a.is_one() {
        return b;
    }
    if b.is_one() {
        return a;
    }
    Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
}

fn div(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        return a;
    }
    if b.is_one() {
        return a;
    }
    Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

fn pow(a: Expr, b: Expr) -> Expr {
    if b.is_one() {
        return a;
    }
    if b.is_zero() {
        return Expr::Num(1.0);
    }
    Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

// ---------------------------------------------------------------------------
// Printing (minimal parentheses; parse(print(parse(s))) == parse(s))

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Expr {
    // precedence levels: 0 add/sub, 1 mul/div, 2 unary minus, 3 pow, 4 atom
    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 0,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 1,
            Expr::Neg(_) => 2,
            Expr::Bin(BinOp::Pow, ..) => 3,
            Expr::Num(v) if *v < 0.0 => 2,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.prec();
        let parens = p < min;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Num(v) => {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    write!(f, "{}", *v as i64)?;
                } else {
                    write!(f, "{v:?}")?;
                }
            }
            Expr::Var(Var::X) => write!(f, "x")?,
            Expr::Var(Var::Y) => write!(f, "y")?,
            Expr::Neg(e) => {
                write!(f, "-")?;
                // unary minus binds looser than ^, tighter than * /
                e.fmt_prec(f, 3)?;
            }
            Expr::Bin(op, a, b) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => ("+", 0, 1),
                    BinOp::Sub => ("-", 0, 1),
                    BinOp::Mul => ("*", 1, 2),
                    BinOp::Div => ("/", 1, 2),
                    // right-associative; left operand must be an atom to
                    // survive re-parsing (factor := unary ("^" factor)?)
                    BinOp::Pow => ("^", 4, 2),
                };
                a.fmt_prec(f, lp)?;
                write!(f, "{sym}")?;
                b.fmt_prec(f, rp)?;
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                write!(f, ")")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    allow_y: bool,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, allow_y: bool) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
            allow_y,
        }
    }

    fn parse_full(mut self) -> Result<Expr, ParseError> {
        let e = self.parse_expr()?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(ParseError::Syntax {
                offset: self.pos,
                expected: "end of input or operator".into(),
            });
        }
        Ok(e)
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

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // factor handles both unary minus and right-associative ^ with
    // ^ binding tighter: -x^2 == -(x^2), 2^-3 == 2^(-3).
    fn parse_factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.parse_factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.parse_factor()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(ParseError::Syntax {
                        offset: self.pos,
                        expected: "`)`".into(),
                    });
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            _ => Err(ParseError::Syntax {
                offset: self.pos,
                expected: "number, `x`, identifier, `(`, or `-`".into(),
            }),
        }
    }

    fn parse_number(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // optional exponent
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mut p = self.pos + 1;
            if p < self.src.len() && (self.src[p] == b'+' || self.src[p] == b'-') {
                p += 1;
            }
            if p < self.src.len() && self.src[p].is_ascii_digit() {
                self.pos = p;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                expected: "valid decimal number".into(),
            })
    }

    fn parse_ident(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if self.peek() == Some(b'(') {
            let func = Func::from_name(name).ok_or_else(|| ParseError::UnknownIdent {
                offset: start,
                name: name.into(),
            })?;
            self.pos += 1;
            let mut args = vec![self.parse_expr()?];
            while self.peek() == Some(b',') {
                self.pos += 1;
                args.push(self.parse_expr()?);
            }
            if self.peek() != Some(b')') {
                return Err(ParseError::Syntax {
                    offset: self.pos,
                    expected: "`,` or `)`".into(),
                });
            }
            self.pos += 1;
            if args.len() != func.arity() {
                return Err(ParseError::Arity {
                    offset: start,
                    name: name.into(),
                    arity: func.arity(),
                    got: args.len(),
                });
            }
            return Ok(Expr::Call(func, args));
        }
        match name {
            "x" => Ok(Expr::Var(Var::X)),
            "y" if self.allow_y => Ok(Expr::Var(Var::Y)),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "e" => Ok(Expr::Num(std::f64::consts::E)),
            _ => Err(ParseError::UnknownIdent {
                offset: start,
                name: name.into(),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// ScalarFunction

type DynFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function of one variable: either a parsed expression (with
/// symbolic derivatives) or an opaque closure (derivatives by central
/// finite differences).
#[derive(Clone)]
pub enum ScalarFunction {
    Expr(Arc<Expr>),
    Closure(DynFn),
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFunction::Expr(e) => write!(f, "ScalarFunction({e})"),
            ScalarFunction::Closure(_) => write!(f, "ScalarFunction(<closure>)"),
        }
    }
}

const FD_STEP: f64 = 1e-5;

impl ScalarFunction {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        Ok(ScalarFunction::Expr(Arc::new(Expr::parse(src)?)))
    }

    pub fn constant(v: f64) -> Self {
        ScalarFunction::Expr(Arc::new(Expr::Num(v)))
    }

    pub fn from_expr(e: Expr) -> Self {
        ScalarFunction::Expr(Arc::new(e))
    }

    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFunction::Closure(Arc::new(f))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            ScalarFunction::Expr(e) => e.eval(x),
            ScalarFunction::Closure(f) => f(x),
        }
    }

    pub fn derivative(&self) -> ScalarFunction {
        match self {
            ScalarFunction::Expr(e) => ScalarFunction::Expr(Arc::new(e.differentiate())),
            ScalarFunction::Closure(f) => {
                let f = f.clone();
                ScalarFunction::from_fn(move |x| {
                    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
                })
            }
        }
    }

    pub fn second_derivative(&self) -> ScalarFunction {
        self.derivative().derivative()
    }

    pub fn is_zero_expr(&self) -> bool {
        matches!(self, ScalarFunction::Expr(e) if e.is_zero())
    }
}
