//! Closed-form coefficient expressions.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' factor)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers are `t`, `x1`, `x2`; functions are `sin cos exp abs sign` and the
//! binary `min max`. There is no unary minus: write `0-1` for `-1`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier '{name}' at position {pos}")]
    UnknownIdent { name: String, pos: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    T,
    X1,
    X2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Call(Func, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

impl Node {
    fn eval(&self, t: f64, x: [f64; 2]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(Var::T) => t,
            Node::Var(Var::X1) => x[0],
            Node::Var(Var::X2) => x[1],
            Node::Call(f, a) => {
                let a = a.eval(t, x);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Sign => {
                        if a > 0.0 {
                            1.0
                        } else if a < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(t, x), b.eval(t, x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                    BinOp::Min => a.min(b),
                    BinOp::Max => a.max(b),
                }
            }
        }
    }

    fn uses(&self, v: Var) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(w) => *w == v,
            Node::Call(_, a) => a.uses(v),
            Node::Bin(_, a, b) => a.uses(v) || b.uses(v),
        }
    }
}

/// A parsed coefficient expression in `(t, x1, x2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffExpr {
    root: Node,
}

impl CoeffExpr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(CoeffExpr { root })
    }

    pub fn constant(v: f64) -> Self {
        CoeffExpr { root: Node::Num(v) }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn from_node(root: Node) -> Self {
        CoeffExpr { root }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, t: f64, x: [f64; 2]) -> f64 {
        self.root.eval(t, x)
    }

    pub fn depends_on_time(&self) -> bool {
        self.root.uses(Var::T)
    }

    pub fn depends_on_space(&self) -> bool {
        self.root.uses(Var::X1) || self.root.uses(Var::X2)
    }

    /// Literal zero (after parsing), used to skip work.
    pub fn is_zero(&self) -> bool {
        matches!(self.root, Node::Num(v) if v == 0.0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    /// `self + other`, folding literal zeros.
    pub fn plus(&self, other: &CoeffExpr) -> CoeffExpr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        CoeffExpr::from_node(Node::Bin(
            BinOp::Add,
            Box::new(self.root.clone()),
            Box::new(other.root.clone()),
        ))
    }

    /// `c · self`.
    pub fn times(&self, c: f64) -> CoeffExpr {
        CoeffExpr::from_node(Node::Bin(
            BinOp::Mul,
            Box::new(Node::Num(c)),
            Box::new(self.root.clone()),
        ))
    }

    /// `0 - self`.
    pub fn negated(&self) -> CoeffExpr {
        match self.root {
            Node::Num(v) => CoeffExpr::constant(-v),
            _ => CoeffExpr::from_node(Node::Bin(
                BinOp::Sub,
                Box::new(Node::Num(0.0)),
                Box::new(self.root.clone()),
            )),
        }
    }

    /// `amp · sin(2π m v)`.
    pub fn sine_wave(amp: f64, m: f64, v: Var) -> CoeffExpr {
        let arg = Node::Bin(
            BinOp::Mul,
            Box::new(Node::Num(2.0 * std::f64::consts::PI * m)),
            Box::new(Node::Var(v)),
        );
        CoeffExpr::from_node(Node::Bin(
            BinOp::Mul,
            Box::new(Node::Num(amp)),
            Box::new(Node::Call(Func::Sin, Box::new(arg))),
        ))
    }
}

impl std::str::FromStr for CoeffExpr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, ExprError> {
        CoeffExpr::parse(s)
    }
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => 1,
        BinOp::Mul | BinOp::Div => 2,
        BinOp::Pow => 3,
        BinOp::Min | BinOp::Max => 4,
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    // the grammar has no unary minus
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(0-{})", -v)
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write_num(f, *v),
            Node::Var(Var::T) => f.write_str("t"),
            Node::Var(Var::X1) => f.write_str("x1"),
            Node::Var(Var::X2) => f.write_str("x2"),
            Node::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Abs => "abs",
                    Func::Sign => "sign",
                };
                write!(f, "{name}({a})")
            }
            Node::Bin(op @ (BinOp::Min | BinOp::Max), a, b) => {
                let name = if *op == BinOp::Min { "min" } else { "max" };
                write!(f, "{name}({a}, {b})")
            }
            Node::Bin(op, a, b) => {
                let p = prec(*op);
                let wrap = |n: &Node, right: bool| -> bool {
                    match n {
                        Node::Bin(o, _, _) if !matches!(o, BinOp::Min | BinOp::Max) => {
                            let q = prec(*o);
                            if *op == BinOp::Pow {
                                // right-associative
                                if right {
                                    q < p
                                } else {
                                    q <= p
                                }
                            } else if right {
                                q <= p
                            } else {
                                q < p
                            }
                        }
                        _ => false,
                    }
                };
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    _ => "^",
                };
                if wrap(a, false) {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                f.write_str(sym)?;
                if wrap(b, true) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            pos: self.pos,
            msg: msg.into(),
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

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.error(format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > b
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < s.len() && s[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(self.error("malformed number"));
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            }
        }
        let text = std::str::from_utf8(&s[start..p]).expect("ascii");
        self.pos = p;
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| ExprError::Syntax {
                pos: start,
                msg: format!("malformed number '{text}'"),
            })
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let var = match name {
            "t" => Some(Var::T),
            "x1" => Some(Var::X1),
            "x2" => Some(Var::X2),
            _ => None,
        };
        if let Some(v) = var {
            return Ok(Node::Var(v));
        }
        let unary = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "abs" => Some(Func::Abs),
            "sign" => Some(Func::Sign),
            _ => None,
        };
        let binary = match name {
            "min" => Some(BinOp::Min),
            "max" => Some(BinOp::Max),
            _ => None,
        };
        if unary.is_none() && binary.is_none() {
            return Err(ExprError::UnknownIdent {
                name: name.to_string(),
                pos: start,
            });
        }
        self.expect(b'(')?;
        let a = self.expr()?;
        let node = if let Some(f) = unary {
            Node::Call(f, Box::new(a))
        } else {
            self.expect(b',')?;
            let b = self.expr()?;
            Node::Bin(binary.expect("checked"), Box::new(a), Box::new(b))
        };
        self.expect(b')')?;
        Ok(node)
    }
}
