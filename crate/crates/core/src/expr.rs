//! Closed-form scalar expressions used for coefficients, data and boundary maps.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr    := cmp
//! cmp     := sum (("<" | "<=" | ">" | ">=") sum)?
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" unary)?
//! primary := number | ident | ident "(" args ")" | "(" expr ")"
//! ```
//!
//! Variables are `x`, `t`, `z` (alias of `z1`) and `z1`, `z2`, ...; the
//! constant `pi` is predefined. Functions: `sin cos exp abs` plus `sqrt log
//! tanh sign` and the three-argument `piecewise(cond, a, b)`, which yields `a`
//! where `cond` is nonzero and `b` otherwise. Comparisons evaluate to 1 or 0.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    T,
    /// Zero-based index into the `z` vector.
    Z(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Log,
    Tanh,
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Piecewise(Box<Expr>, Box<Expr>, Box<Expr>),
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub x: f64,
    pub t: f64,
    pub z: &'a [f64],
}

impl<'a> Env<'a> {
    pub fn xt(x: f64, t: f64) -> Env<'static> {
        Env { x, t, z: &[] }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X) => env.x,
            Expr::Var(Var::T) => env.t,
            Expr::Var(Var::Z(i)) => env.z.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Neg(a) => -a.eval(env),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => a.eval(env) / b.eval(env),
            Expr::Pow(a, b) => {
                let base = a.eval(env);
                match b.as_ref() {
                    Expr::Const(c) if c.fract() == 0.0 && c.abs() < 64.0 => base.powi(*c as i32),
                    _ => base.powf(b.eval(env)),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(env);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                    Func::Sqrt => v.sqrt(),
                    Func::Log => v.ln(),
                    Func::Tanh => v.tanh(),
                    Func::Sign => {
                        if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
            Expr::Cmp(op, a, b) => {
                let (l, r) = (a.eval(env), b.eval(env));
                let hit = match op {
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                };
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
            Expr::Piecewise(c, a, b) => {
                if c.eval(env) != 0.0 {
                    a.eval(env)
                } else {
                    b.eval(env)
                }
            }
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Cmp(_, a, b) => a.depends_on(var) || b.depends_on(var),
            Expr::Piecewise(c, a, b) => c.depends_on(var) || a.depends_on(var) || b.depends_on(var),
        }
    }

    pub fn is_constant(&self) -> bool {
        !self.depends_on(Var::X) && !self.depends_on(Var::T) && !self.any_z()
    }

    fn any_z(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => matches!(v, Var::Z(_)),
            Expr::Neg(a) | Expr::Call(_, a) => a.any_z(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Cmp(_, a, b) => a.any_z() || b.any_z(),
            Expr::Piecewise(c, a, b) => c.any_z() || a.any_z() || b.any_z(),
        }
    }

    /// True when the expression is the literal constant zero after folding.
    pub fn is_zero(&self) -> bool {
        matches!(self.simplify(), Expr::Const(c) if c == 0.0)
    }

    /// Abscissae `c` appearing in comparisons `x ? c` with constant `c`.
    pub fn x_breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breaks(&mut out);
        out
    }

    fn collect_breaks(&self, out: &mut Vec<f64>) {
        match self {
            Expr::Cmp(_, a, b) => {
                let env = Env::default();
                if matches!(a.as_ref(), Expr::Var(Var::X)) && b.is_constant() {
                    out.push(b.eval(&env));
                } else if matches!(b.as_ref(), Expr::Var(Var::X)) && a.is_constant() {
                    out.push(a.eval(&env));
                }
                a.collect_breaks(out);
                b.collect_breaks(out);
            }
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_breaks(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.collect_breaks(out);
                b.collect_breaks(out);
            }
            Expr::Piecewise(c, a, b) => {
                c.collect_breaks(out);
                a.collect_breaks(out);
                b.collect_breaks(out);
            }
        }
    }

    /// Symbolic derivative with respect to `var`.
    ///
    /// Comparisons are treated as locally constant, so the derivative of a
    /// piecewise expression is the piecewise derivative.
    pub fn diff(&self, var: Var) -> Expr {
        use Expr::*;
        let d = match self {
            Const(_) => Const(0.0),
            Var(v) => Const(if *v == var { 1.0 } else { 0.0 }),
            Neg(a) => Neg(Box::new(a.diff(var))),
            Add(a, b) => Add(Box::new(a.diff(var)), Box::new(b.diff(var))),
            Sub(a, b) => Sub(Box::new(a.diff(var)), Box::new(b.diff(var))),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.diff(var)), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.diff(var)))),
            ),
            Div(a, b) => Div(
                Box::new(Sub(
                    Box::new(Mul(Box::new(a.diff(var)), b.clone())),
                    Box::new(Mul(a.clone(), Box::new(b.diff(var)))),
                )),
                Box::new(Mul(b.clone(), b.clone())),
            ),
            Pow(a, b) => {
                if !b.depends_on(var) {
                    // b * a^(b-1) * a'
                    Mul(
                        Box::new(Mul(
                            b.clone(),
                            Box::new(Pow(a.clone(), Box::new(Sub(b.clone(), Box::new(Const(1.0)))))),
                        )),
                        Box::new(a.diff(var)),
                    )
                } else {
                    // a^b * (b' ln a + b a'/a)
                    Mul(
                        Box::new(self.clone()),
                        Box::new(Add(
                            Box::new(Mul(Box::new(b.diff(var)), Box::new(Call(Func::Log, a.clone())))),
                            Box::new(Div(Box::new(Mul(b.clone(), Box::new(a.diff(var)))), a.clone())),
                        )),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.diff(var);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(Box::new(Call(Func::Sin, a.clone()))),
                    Func::Exp => Call(Func::Exp, a.clone()),
                    Func::Abs => Call(Func::Sign, a.clone()),
                    Func::Sqrt => Div(
                        Box::new(Const(0.5)),
                        Box::new(Call(Func::Sqrt, a.clone())),
                    ),
                    Func::Log => Div(Box::new(Const(1.0)), a.clone()),
                    Func::Tanh => Sub(
                        Box::new(Const(1.0)),
                        Box::new(Pow(Box::new(Call(Func::Tanh, a.clone())), Box::new(Const(2.0)))),
                    ),
                    Func::Sign => Const(0.0),
                };
                Mul(Box::new(outer), Box::new(inner))
            }
            Cmp(..) => Const(0.0),
            Piecewise(c, a, b) => Piecewise(c.clone(), Box::new(a.diff(var)), Box::new(b.diff(var))),
        };
        d.simplify()
    }

    /// Constant folding and removal of additive/multiplicative identities.
    pub fn simplify(&self) -> Expr {
        use Expr::*;
        let fold = |e: Expr| -> Expr {
            if e.is_constant() && !matches!(e, Const(_)) {
                Const(e.eval(&Env::default()))
            } else {
                e
            }
        };
        let is = |e: &Expr, v: f64| matches!(e, Const(c) if *c == v);
        match self {
            Const(_) | Var(_) => self.clone(),
            Neg(a) => {
                let a = a.simplify();
                if is(&a, 0.0) {
                    Const(0.0)
                } else {
                    fold(Neg(Box::new(a)))
                }
            }
            Add(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&a, 0.0) {
                    b
                } else if is(&b, 0.0) {
                    a
                } else {
                    fold(Add(Box::new(a), Box::new(b)))
                }
            }
            Sub(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&b, 0.0) {
                    a
                } else if is(&a, 0.0) {
                    fold(Neg(Box::new(b)))
                } else {
                    fold(Sub(Box::new(a), Box::new(b)))
                }
            }
            Mul(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&a, 0.0) || is(&b, 0.0) {
                    Const(0.0)
                } else if is(&a, 1.0) {
                    b
                } else if is(&b, 1.0) {
                    a
                } else {
                    fold(Mul(Box::new(a), Box::new(b)))
                }
            }
            Div(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&a, 0.0) {
                    Const(0.0)
                } else if is(&b, 1.0) {
                    a
                } else {
                    fold(Div(Box::new(a), Box::new(b)))
                }
            }
            Pow(a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                if is(&b, 0.0) {
                    Const(1.0)
                } else if is(&b, 1.0) {
                    a
                } else {
                    fold(Pow(Box::new(a), Box::new(b)))
                }
            }
            Call(f, a) => fold(Call(*f, Box::new(a.simplify()))),
            Cmp(op, a, b) => fold(Cmp(*op, Box::new(a.simplify()), Box::new(b.simplify()))),
            Piecewise(c, a, b) => {
                let (c, a, b) = (c.simplify(), a.simplify(), b.simplify());
                if let Const(cv) = c {
                    return if cv != 0.0 { a } else { b };
                }
                if a == b {
                    return a;
                }
                Piecewise(Box::new(c), Box::new(a), Box::new(b))
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Var(Var::Z(i)) => write!(f, "z{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Abs => "abs",
                    Func::Sqrt => "sqrt",
                    Func::Log => "log",
                    Func::Tanh => "tanh",
                    Func::Sign => "sign",
                };
                write!(f, "{name}({a})")
            }
            Expr::Cmp(op, a, b) => {
                let s = match op {
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Piecewise(c, a, b) => write!(f, "piecewise({c}, {a}, {b})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Some(b'<') => {
                self.pos += 1;
                if self.eat(b'=') {
                    CmpOp::Le
                } else {
                    CmpOp::Lt
                }
            }
            Some(b'>') => {
                self.pos += 1;
                if self.eat(b'=') {
                    CmpOp::Ge
                } else {
                    CmpOp::Gt
                }
            }
            _ => return Ok(lhs),
        };
        let rhs = self.sum()?;
        Ok(Expr::Cmp(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut acc = self.product()?;
        loop {
            if self.eat(b'+') {
                acc = Expr::Add(Box::new(acc), Box::new(self.product()?));
            } else if self.eat(b'-') {
                acc = Expr::Sub(Box::new(acc), Box::new(self.product()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                acc = Expr::Div(Box::new(acc), Box::new(self.unary()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| Error::Parse {
                pos: start,
                msg: format!("bad number `{text}`"),
            })
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default().to_string();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.err("expected `)` after arguments"));
            }
            return self.call(start, &name, args);
        }
        match name.as_str() {
            "x" => Ok(Expr::Var(Var::X)),
            "t" => Ok(Expr::Var(Var::T)),
            "z" => Ok(Expr::Var(Var::Z(0))),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            _ => {
                if let Some(idx) = name.strip_prefix('z').and_then(|d| d.parse::<usize>().ok()) {
                    if idx >= 1 {
                        return Ok(Expr::Var(Var::Z(idx - 1)));
                    }
                }
                Err(Error::UnknownVariable(name))
            }
        }
    }

    fn call(&self, pos: usize, name: &str, mut args: Vec<Expr>) -> Result<Expr> {
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::Parse {
                    pos,
                    msg: format!("`{name}` takes {n} argument(s), got {}", args.len()),
                })
            }
        };
        if name == "piecewise" {
            arity(3)?;
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            let c = args.pop().unwrap();
            return Ok(Expr::Piecewise(Box::new(c), Box::new(a), Box::new(b)));
        }
        let func = match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            "tanh" => Func::Tanh,
            "sign" => Func::Sign,
            _ => {
                return Err(Error::Parse {
                    pos,
                    msg: format!("unknown function `{name}`"),
                })
            }
        };
        arity(1)?;
        Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64, t: f64) -> f64 {
        Expr::parse(src).unwrap().eval(&Env::xt(x, t))
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert!((ev("2 + sin(t)", 0.0, 1.0) - (2.0 + 1f64.sin())).abs() < 1e-15);
        assert_eq!(ev("1.5e1", 0.0, 0.0), 15.0);
    }

    #[test]
    fn piecewise_and_breakpoints() {
        let e = Expr::parse("piecewise(x < 0.5, 1, 2)").unwrap();
        assert_eq!(e.eval(&Env::xt(0.25, 0.0)), 1.0);
        assert_eq!(e.eval(&Env::xt(0.75, 0.0)), 2.0);
        assert_eq!(e.x_breakpoints(), vec![0.5]);
    }

    #[test]
    fn z_variables() {
        let e = Expr::parse("0.5*z1 + z2").unwrap();
        let z = [2.0, 3.0];
        assert_eq!(e.eval(&Env { x: 0.0, t: 0.0, z: &z }), 4.0);
        assert_eq!(Expr::parse("z").unwrap(), Expr::Var(Var::Z(0)));
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("y").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("piecewise(1, 2)").is_err());
    }

    #[test]
    fn symbolic_time_derivative_matches_central_difference() {
        for src in ["2 + sin(t)", "x*t^2 + exp(-t)*cos(3*x*t)", "abs(t - 0.3) + sqrt(1 + t^2)", "tanh(x + t) / (2 + t)"] {
            let e = Expr::parse(src).unwrap();
            let d = e.diff(Var::T);
            for &(x, t) in &[(0.2, 0.7), (0.9, 1.3), (0.5, 2.1)] {
                let h = 1e-5;
                let fd = (e.eval(&Env::xt(x, t + h)) - e.eval(&Env::xt(x, t - h))) / (2.0 * h);
                assert!((d.eval(&Env::xt(x, t)) - fd).abs() < 1e-7, "{src}");
            }
        }
    }

    #[test]
    fn diff_of_time_independent_is_zero() {
        let e = Expr::parse("1 + x^2").unwrap();
        assert!(e.diff(Var::T).is_zero());
    }
}
