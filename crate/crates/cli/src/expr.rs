//! Arithmetic expressions for coefficient fields.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("+" | "-") unary | power
//! power   := atom ("^" unary)?
//! atom    := number | constant | variable | call | "(" expr ")" | "|" expr "|"
//! call    := name "(" expr ("," expr)* ")"
//! ```
//!
//! Variables are the state components `x1, …, xd` and, in jump densities, the
//! jump components `y1, …, yd`. `|x|` and `|y|` are the Euclidean norms (any
//! other `|e|` is the absolute value). Constants: `pi`, `e`. Functions:
//! `sin cos tan asin acos atan sinh cosh tanh exp ln log sqrt abs sign` (one
//! argument) and `min max pow atan2` (two arguments).

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Comp(Var, usize),
    Norm(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy)]
enum Func {
    Unary(fn(f64) -> f64),
    Binary(fn(f64, f64) -> f64),
}

fn unary(name: &str) -> Option<fn(f64) -> f64> {
    Some(match name {
        "sin" => f64::sin,
        "cos" => f64::cos,
        "tan" => f64::tan,
        "asin" => f64::asin,
        "acos" => f64::acos,
        "atan" => f64::atan,
        "sinh" => f64::sinh,
        "cosh" => f64::cosh,
        "tanh" => f64::tanh,
        "exp" => f64::exp,
        "ln" | "log" => f64::ln,
        "sqrt" => f64::sqrt,
        "abs" => f64::abs,
        "sign" => |v: f64| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        },
        _ => return None,
    })
}

fn binary(name: &str) -> Option<fn(f64, f64) -> f64> {
    Some(match name {
        "min" => f64::min,
        "max" => f64::max,
        "pow" => f64::powf,
        "atan2" => f64::atan2,
        _ => return None,
    })
}

/// A parsed expression, evaluable at a state `x` and optionally a jump `y`.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        eval(&self.root, x, &[])
    }

    pub fn eval_xy(&self, x: &[f64], y: &[f64]) -> f64 {
        eval(&self.root, x, y)
    }

    /// Largest component index used for `var` (1-based; 0 when unused).
    pub fn max_index(&self, var: Var) -> usize {
        fn walk(n: &Node, v: Var) -> usize {
            match n {
                Node::Comp(w, i) if *w == v => *i,
                Node::Neg(a) => walk(a, v),
                Node::Bin(_, a, b) => walk(a, v).max(walk(b, v)),
                Node::Call(_, args) => args.iter().map(|a| walk(a, v)).max().unwrap_or(0),
                _ => 0,
            }
        }
        walk(&self.root, var)
    }

    pub fn uses(&self, var: Var) -> bool {
        fn walk(n: &Node, v: Var) -> bool {
            match n {
                Node::Comp(w, _) | Node::Norm(w) => *w == v,
                Node::Neg(a) => walk(a, v),
                Node::Bin(_, a, b) => walk(a, v) || walk(b, v),
                Node::Call(_, args) => args.iter().any(|a| walk(a, v)),
                Node::Num(_) => false,
            }
        }
        walk(&self.root, var)
    }

    /// The value when the expression uses neither `x` nor `y`.
    pub fn constant_value(&self) -> Option<f64> {
        (!self.uses(Var::X) && !self.uses(Var::Y)).then(|| self.eval(&[]))
    }
}

fn component(v: &[f64], i: usize) -> f64 {
    v.get(i - 1).copied().unwrap_or(f64::NAN)
}

fn eval(n: &Node, x: &[f64], y: &[f64]) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Comp(Var::X, i) => component(x, *i),
        Node::Comp(Var::Y, i) => component(y, *i),
        Node::Norm(Var::X) => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Node::Norm(Var::Y) => y.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Node::Neg(a) => -eval(a, x, y),
        Node::Bin(op, a, b) => {
            let (u, v) = (eval(a, x, y), eval(b, x, y));
            match op {
                '+' => u + v,
                '-' => u - v,
                '*' => u * v,
                '/' => u / v,
                _ => u.powf(v),
            }
        }
        Node::Call(Func::Unary(f), args) => f(eval(&args[0], x, y)),
        Node::Call(Func::Binary(f), args) => f(eval(&args[0], x, y), eval(&args[1], x, y)),
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    /// Nesting depth of `|…|` groups, so a closing bar is not read as an
    /// opening one.
    bars: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            offset,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.src[self.pos..].chars().next() {
            self.pos += c.len_utf8();
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(d) if d == c => {
                self.bump();
                Ok(())
            }
            Some(d) => self.err(self.pos, format!("expected '{c}', found '{d}'")),
            None => self.err(self.pos, format!("expected '{c}', found end of input")),
        }
    }

    fn expr(&mut self) -> Result<Node, SyntaxError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, SyntaxError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, SyntaxError> {
        match self.peek() {
            Some('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, SyntaxError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, SyntaxError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        match self.peek() {
            None => self.err(start, "expected an operand, found end of input"),
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some('|') => {
                self.bump();
                self.bars += 1;
                let inner_start = self.pos;
                let e = self.expr()?;
                self.bars -= 1;
                self.expect('|')?;
                let inner = self.src[inner_start..self.pos - 1].trim();
                Ok(match inner {
                    "x" => Node::Norm(Var::X),
                    "y" => Node::Norm(Var::Y),
                    _ => Node::Call(Func::Unary(f64::abs), vec![e]),
                })
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(start),
            Some(c) if c.is_ascii_alphabetic() => self.name(start),
            Some(c) => self.err(start, format!("unexpected character '{c}'")),
        }
    }

    fn number(&mut self, start: usize) -> Result<Node, SyntaxError> {
        let bytes = self.src.as_bytes();
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
        self.pos = end;
        text.parse::<f64>()
            .map(Node::Num)
            .or_else(|_| self.err(start, format!("malformed number '{text}'")))
    }

    fn name(&mut self, start: usize) -> Result<Node, SyntaxError> {
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
            end += 1;
        }
        let name = &self.src[start..end];
        self.pos = end;
        if self.peek() == Some('(') {
            self.bump();
            let mut args = vec![self.expr()?];
            while self.peek() == Some(',') {
                self.bump();
                args.push(self.expr()?);
            }
            self.expect(')')?;
            let f = if let Some(f) = unary(name) {
                (Func::Unary(f), 1)
            } else if let Some(f) = binary(name) {
                (Func::Binary(f), 2)
            } else {
                return self.err(start, format!("unknown function '{name}'"));
            };
            if args.len() != f.1 {
                return self.err(start, format!("'{name}' takes {} argument(s), got {}", f.1, args.len()));
            }
            return Ok(Node::Call(f.0, args));
        }
        match name {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            "x" if self.bars > 0 => return Ok(Node::Norm(Var::X)),
            "y" if self.bars > 0 => return Ok(Node::Norm(Var::Y)),
            _ => {}
        }
        let (var, idx) = name.split_at(1);
        let var = match var {
            "x" => Var::X,
            "y" => Var::Y,
            _ => return self.err(start, format!("unknown name '{name}'")),
        };
        match idx.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(Node::Comp(var, i)),
            _ => self.err(start, format!("unknown name '{name}' (components are numbered from 1)")),
        }
    }
}

pub fn parse_expression(source: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser {
        src: source,
        pos: 0,
        bars: 0,
    };
    let root = p.expr()?;
    if let Some(c) = p.peek() {
        return p.err(p.pos, format!("unexpected '{c}' after a complete expression"));
    }
    Ok(Expr {
        root,
        source: source.to_string(),
    })
}
