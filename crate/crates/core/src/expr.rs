//! Closed-form scalar expressions over torus coordinates.
//!
//! Grammar (usual precedence, `^` binds tightest and is right-associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'pi' | 'x' | 'y' | 't' | func '(' args ')' | '(' expr ')'
//! func   := sin | cos | exp | bump
//! ```
//!
//! The exponent of `^` must be constant. `bump(cx, cy, r)` is the smooth
//! compactly supported bump `exp(1 - 1/(1 - d²/r²))` for `d < r` (zero
//! outside), where `d` is the periodic distance from `(x, y)` to `(cx, cy)`;
//! it peaks at 1 and all its arguments must be constant.
//!
//! Expressions compile to a postfix program evaluated either on plain `f64`
//! or on [`Dual`] numbers carrying the two coordinate partials.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

const MAX_STACK: usize = 64;

/// Value together with its partial derivatives in `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Dual {
    pub const fn constant(v: f64) -> Self {
        Dual { v, dx: 0.0, dy: 0.0 }
    }

    fn chain(self, f: f64, df: f64) -> Self {
        Dual {
            v: f,
            dx: df * self.dx,
            dy: df * self.dy,
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            dx: self.dx - o.dx,
            dy: self.dy - o.dy,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        let v = self.v / o.v;
        Dual {
            v,
            dx: (self.dx - v * o.dx) * inv,
            dy: (self.dy - v * o.dy) * inv,
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            dx: -self.dx,
            dy: -self.dy,
        }
    }
}

/// Arithmetic needed by the expression interpreter.
pub trait Num:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn var_x(x: f64) -> Self;
    fn var_y(y: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn powf(self, e: f64) -> Self;
    fn bump(x: f64, y: f64, cx: f64, cy: f64, r: f64) -> Self;
}

impl Num for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn var_x(x: f64) -> Self {
        x
    }
    fn var_y(y: f64) -> Self {
        y
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    fn bump(x: f64, y: f64, cx: f64, cy: f64, r: f64) -> Self {
        bump_eval(x, y, cx, cy, r).v
    }
}

impl Num for Dual {
    fn constant(c: f64) -> Self {
        Dual::constant(c)
    }
    fn var_x(x: f64) -> Self {
        Dual { v: x, dx: 1.0, dy: 0.0 }
    }
    fn var_y(y: f64) -> Self {
        Dual { v: y, dx: 0.0, dy: 1.0 }
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn powf(self, e: f64) -> Self {
        if e == 0.0 {
            return Dual::constant(1.0);
        }
        let d = if e == 1.0 { 1.0 } else { e * self.v.powf(e - 1.0) };
        self.chain(self.v.powf(e), d)
    }
    fn bump(x: f64, y: f64, cx: f64, cy: f64, r: f64) -> Self {
        bump_eval(x, y, cx, cy, r)
    }
}

fn wrap_half(d: f64) -> f64 {
    d - d.round()
}

fn bump_eval(x: f64, y: f64, cx: f64, cy: f64, r: f64) -> Dual {
    let ddx = wrap_half(x - cx);
    let ddy = wrap_half(y - cy);
    let s = (ddx * ddx + ddy * ddy) / (r * r);
    if s >= 1.0 {
        return Dual::default();
    }
    let one_minus = 1.0 - s;
    let v = (1.0 - 1.0 / one_minus).exp();
    let dv_ds = -v / (one_minus * one_minus);
    Dual {
        v,
        dx: dv_ds * 2.0 * ddx / (r * r),
        dy: dv_ds * 2.0 * ddy / (r * r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    X,
    Y,
    T,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sin,
    Cos,
    Exp,
    Pow(f64),
    Bump { cx: f64, cy: f64, r: f64 },
}

/// A compiled expression. Keeps its source text for serialization.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    program: Vec<Op>,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
        };
        let ast = parser.expr()?;
        if parser.pos != tokens.len() {
            return Err(Error::Expression(format!("unexpected trailing input in {source:?}")));
        }
        let mut program = Vec::new();
        ast.emit(&mut program);
        let depth = max_depth(&program);
        if depth > MAX_STACK {
            return Err(Error::Expression(format!(
                "expression needs a stack of depth {depth} (limit {MAX_STACK})"
            )));
        }
        Ok(Expr {
            source: source.trim().to_string(),
            program,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// `c * (self)`, with the source text rewritten to match.
    pub fn scaled(&self, c: f64) -> Expr {
        let mut program = Vec::with_capacity(self.program.len() + 2);
        program.push(Op::Const(c));
        program.extend_from_slice(&self.program);
        program.push(Op::Mul);
        Expr {
            source: format!("{c:e}*({})", self.source),
            program,
        }
    }

    /// `self + c`.
    pub fn shifted(&self, c: f64) -> Expr {
        let mut program = self.program.clone();
        program.push(Op::Const(c));
        program.push(Op::Add);
        Expr {
            source: format!("({})+({c:e})", self.source),
            program,
        }
    }

    pub fn uses_coordinates(&self) -> bool {
        self.program
            .iter()
            .any(|op| matches!(op, Op::X | Op::Y | Op::T | Op::Bump { .. }))
    }

    /// Evaluates at `(x, y)`; the variable `t` is bound to `x`.
    pub fn eval<N: Num>(&self, x: f64, y: f64) -> N {
        let mut stack = [N::constant(0.0); MAX_STACK];
        let mut sp = 0usize;
        for op in &self.program {
            match *op {
                Op::Const(c) => {
                    stack[sp] = N::constant(c);
                    sp += 1;
                }
                Op::X | Op::T => {
                    stack[sp] = N::var_x(x);
                    sp += 1;
                }
                Op::Y => {
                    stack[sp] = N::var_y(y);
                    sp += 1;
                }
                Op::Bump { cx, cy, r } => {
                    stack[sp] = N::bump(x, y, cx, cy, r);
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Sin => stack[sp - 1] = stack[sp - 1].sin(),
                Op::Cos => stack[sp - 1] = stack[sp - 1].cos(),
                Op::Exp => stack[sp - 1] = stack[sp - 1].exp(),
                Op::Pow(e) => stack[sp - 1] = stack[sp - 1].powf(e),
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack[sp - 1];
                    let a = stack[sp - 2];
                    sp -= 1;
                    stack[sp - 1] = match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        _ => a / b,
                    };
                }
            }
        }
        stack[0]
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.eval::<f64>(x, y)
    }

    pub fn dual(&self, x: f64, y: f64) -> Dual {
        self.eval::<Dual>(x, y)
    }
}

fn max_depth(program: &[Op]) -> usize {
    let mut depth = 0usize;
    let mut max = 0usize;
    for op in program {
        match op {
            Op::Const(_) | Op::X | Op::Y | Op::T | Op::Bump { .. } => depth += 1,
            Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
            _ => {}
        }
        max = max.max(depth);
    }
    max
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number {text:?}")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Token::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Ast {
    Const(f64),
    X,
    Y,
    T,
    Unary(Op, Box<Ast>),
    Binary(Op, Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, f64),
    Bump(f64, f64, f64),
}

impl Ast {
    fn constant_value(&self) -> Option<f64> {
        let is_const = {
            let mut prog = Vec::new();
            self.emit(&mut prog);
            prog.iter()
                .all(|op| !matches!(op, Op::X | Op::Y | Op::T | Op::Bump { .. }))
                .then_some(prog)
        };
        is_const.map(|prog| {
            Expr {
                source: String::new(),
                program: prog,
            }
            .value(0.0, 0.0)
        })
    }

    fn emit(&self, out: &mut Vec<Op>) {
        match self {
            Ast::Const(c) => out.push(Op::Const(*c)),
            Ast::X => out.push(Op::X),
            Ast::Y => out.push(Op::Y),
            Ast::T => out.push(Op::T),
            Ast::Unary(op, a) => {
                a.emit(out);
                out.push(*op);
            }
            Ast::Binary(op, a, b) => {
                a.emit(out);
                b.emit(out);
                out.push(*op);
            }
            Ast::Pow(a, e) => {
                a.emit(out);
                out.push(Op::Pow(*e));
            }
            Ast::Bump(cx, cy, r) => out.push(Op::Bump {
                cx: *cx,
                cy: *cy,
                r: *r,
            }),
        }
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Token::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(Error::Expression(format!("expected {c:?} at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_sym('+') {
                lhs = Ast::Binary(Op::Add, Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_sym('-') {
                lhs = Ast::Binary(Op::Sub, Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_sym('*') {
                lhs = Ast::Binary(Op::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_sym('/') {
                lhs = Ast::Binary(Op::Div, Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Ast> {
        if self.eat_sym('-') {
            return Ok(Ast::Unary(Op::Neg, Box::new(self.unary()?)));
        }
        if self.eat_sym('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if self.eat_sym('^') {
            let exponent = self.unary()?;
            let e = exponent
                .constant_value()
                .ok_or_else(|| Error::Expression("exponent of '^' must be constant".to_string()))?;
            return Ok(Ast::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Ast>> {
        self.expect_sym('(')?;
        let mut args = vec![self.expr()?];
        while self.eat_sym(',') {
            args.push(self.expr()?);
        }
        self.expect_sym(')')?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<Ast> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Ast::Const(v))
            }
            Some(Token::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(Ast::X),
                    "y" => Ok(Ast::Y),
                    "t" => Ok(Ast::T),
                    "pi" => Ok(Ast::Const(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        let mut args = self.args()?;
                        if args.len() != 1 {
                            return Err(Error::Expression(format!("{name} takes one argument")));
                        }
                        let op = match name.as_str() {
                            "sin" => Op::Sin,
                            "cos" => Op::Cos,
                            _ => Op::Exp,
                        };
                        Ok(Ast::Unary(op, Box::new(args.remove(0))))
                    }
                    "bump" => {
                        let args = self.args()?;
                        if args.len() != 3 {
                            return Err(Error::Expression("bump takes (cx, cy, radius)".to_string()));
                        }
                        let vals: Option<Vec<f64>> = args.iter().map(Ast::constant_value).collect();
                        let vals =
                            vals.ok_or_else(|| Error::Expression("bump arguments must be constant".to_string()))?;
                        if !(vals[2] > 0.0 && vals[2] < 0.5) {
                            return Err(Error::Expression("bump radius must lie in (0, 0.5)".to_string()));
                        }
                        Ok(Ast::Bump(vals[0], vals[1], vals[2]))
                    }
                    other => Err(Error::Expression(format!("unknown identifier {other:?}"))),
                }
            }
            Some(tok) => Err(Error::Expression(format!("unexpected token {tok:?}"))),
            None => Err(Error::Expression("unexpected end of expression".to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn precedence_and_power() {
        let e = Expr::parse("1 + 2*3^2 - -4/2").unwrap();
        assert_eq!(e.value(0.0, 0.0), 1.0 + 18.0 + 2.0);
        let e = Expr::parse("2^3^2").unwrap();
        assert_eq!(e.value(0.0, 0.0), 512.0);
        let e = Expr::parse("-x^2").unwrap();
        assert_eq!(e.value(3.0, 0.0), -9.0);
    }

    #[test]
    fn functions_and_constants() {
        let e = Expr::parse("sin(pi*x)^2 + cos(2*pi*y) + exp(0)").unwrap();
        assert_relative_eq!(e.value(0.5, 0.5), 1.0 - 1.0 + 1.0, epsilon = 1e-15);
        let e = Expr::parse("1.5e-1 * 2E1").unwrap();
        assert_relative_eq!(e.value(0.0, 0.0), 3.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expr::parse("x +").is_err());
        assert!(Expr::parse("x^y").is_err());
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("sin(x, y)").is_err());
        assert!(Expr::parse("bump(x, 0.5, 0.1)").is_err());
        assert!(Expr::parse("bump(0.5, 0.5, 0.7)").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x $ y").is_err());
    }

    #[test]
    fn dual_partials_match_finite_differences() {
        let e = Expr::parse("(1 + 0.3*sin(2*pi*x)*cos(2*pi*y))^1.5 / (2 + exp(-(x-0.4)^2)) + 0.2*bump(0.5, 0.5, 0.3)")
            .unwrap();
        let h = 1e-6;
        for &(x, y) in &[(0.1, 0.2), (0.45, 0.61), (0.77, 0.33)] {
            let d = e.dual(x, y);
            let fx = (e.value(x + h, y) - e.value(x - h, y)) / (2.0 * h);
            let fy = (e.value(x, y + h) - e.value(x, y - h)) / (2.0 * h);
            assert_relative_eq!(d.v, e.value(x, y), epsilon = 1e-15);
            assert_relative_eq!(d.dx, fx, epsilon = 1e-7, max_relative = 1e-6);
            assert_relative_eq!(d.dy, fy, epsilon = 1e-7, max_relative = 1e-6);
        }
    }

    #[test]
    fn bump_is_periodic_and_compact() {
        let e = Expr::parse("bump(0.05, 0.5, 0.1)").unwrap();
        assert_eq!(e.value(0.05, 0.5), 1.0);
        assert_eq!(e.value(0.5, 0.5), 0.0);
        assert_relative_eq!(e.value(0.99, 0.5), e.value(1.99, 0.5), epsilon = 1e-15);
        assert!(e.value(0.99, 0.5) > 0.0);
    }

    #[test]
    fn scaled_and_shifted() {
        let e = Expr::parse("1 + x").unwrap();
        assert_eq!(e.scaled(2.0).value(1.0, 0.0), 4.0);
        assert_eq!(e.shifted(-1.0).value(3.0, 0.0), 3.0);
        let again = Expr::parse(e.scaled(0.5).source()).unwrap();
        assert_eq!(again.value(1.0, 0.0), 1.0);
    }
}
