//! Math expression parsing and black-box evaluation.
//!
//! Expressions use variables `x1..xn`, standard infix operators with
//! precedence `^` > unary minus > `*` `/` > `+` `-` (left-associative except
//! `^`, which is right-associative), and the unary functions
//! `abs, sin, cos, exp, log, sqrt, tanh`. All builders consume the parsed
//! tree as an opaque evaluable; derivatives come from central finite
//! differences, never symbolically.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub message: String,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation error at byte {position}: {message}")]
pub struct EvalError {
    pub message: String,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Abs => "abs",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum NodeKind {
    Const(f64),
    /// Zero-based variable index; `x1` parses to index 0.
    Var(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    kind: NodeKind,
    pos: usize,
}

/// A parsed expression together with its declared dimension.
///
/// Immutable after parse; evaluation is a pure recursive walk, so shared
/// references may be evaluated concurrently.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    root: Node,
    dim: usize,
}

impl ExprAst {
    pub fn parse(source: &str, dimension: usize) -> Result<ExprAst, ParseError> {
        if dimension == 0 {
            return Err(ParseError {
                message: "dimension must be positive".into(),
                position: 0,
            });
        }
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens,
            idx: 0,
            dim: dimension,
            src_len: source.len(),
        };
        let root = parser.parse_expr()?;
        match parser.peek() {
            Some(tok) => Err(ParseError {
                message: format!("unexpected trailing input `{}`", tok.describe()),
                position: tok.pos(),
            }),
            None => Ok(ExprAst {
                root,
                dim: dimension,
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        if x.len() != self.dim {
            return Err(EvalError {
                message: format!("expected {} coordinates, got {}", self.dim, x.len()),
                position: 0,
            });
        }
        eval_node(&self.root, x)
    }

    /// Set of distinct variable indices (zero-based) referenced by the tree.
    pub fn variables(&self) -> Vec<usize> {
        let mut vars = Vec::new();
        collect_vars(&self.root, &mut vars);
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// View the expression as a univariate function of coordinate `var`
    /// (zero-based), with all other coordinates pinned to zero.
    pub fn univariate_in(&self, var: usize) -> impl Fn(f64) -> Result<f64, EvalError> + '_ {
        let dim = self.dim;
        move |t| {
            let mut x = vec![0.0; dim];
            x[var] = t;
            self.eval(&x)
        }
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

fn collect_vars(node: &Node, out: &mut Vec<usize>) {
    match &node.kind {
        NodeKind::Const(_) => {}
        NodeKind::Var(j) => out.push(*j),
        NodeKind::Unary(_, a) => collect_vars(a, out),
        NodeKind::Binary(_, a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
    }
}

// Fully parenthesized so the printed form reparses to an identical tree.
fn write_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match &node.kind {
        NodeKind::Const(c) => {
            if *c < 0.0 || c.is_sign_negative() {
                write!(f, "({c})")
            } else {
                write!(f, "{c}")
            }
        }
        NodeKind::Var(j) => write!(f, "x{}", j + 1),
        NodeKind::Unary(UnaryOp::Neg, a) => {
            write!(f, "(-")?;
            write_node(a, f)?;
            write!(f, ")")
        }
        NodeKind::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_node(a, f)?;
            write!(f, ")")
        }
        NodeKind::Binary(op, a, b) => {
            write!(f, "(")?;
            write_node(a, f)?;
            write!(f, "{}", op.symbol())?;
            write_node(b, f)?;
            write!(f, ")")
        }
    }
}

fn eval_node(node: &Node, x: &[f64]) -> Result<f64, EvalError> {
    match &node.kind {
        NodeKind::Const(c) => Ok(*c),
        NodeKind::Var(j) => Ok(x[*j]),
        NodeKind::Unary(op, a) => {
            let v = eval_node(a, x)?;
            match op {
                UnaryOp::Neg => Ok(-v),
                UnaryOp::Abs => Ok(v.abs()),
                UnaryOp::Sin => Ok(v.sin()),
                UnaryOp::Cos => Ok(v.cos()),
                UnaryOp::Exp => Ok(v.exp()),
                UnaryOp::Tanh => Ok(v.tanh()),
                UnaryOp::Log => {
                    if v <= 0.0 {
                        Err(EvalError {
                            message: format!("log of non-positive value {v}"),
                            position: node.pos,
                        })
                    } else {
                        Ok(v.ln())
                    }
                }
                UnaryOp::Sqrt => {
                    if v < 0.0 {
                        Err(EvalError {
                            message: format!("sqrt of negative value {v}"),
                            position: node.pos,
                        })
                    } else {
                        Ok(v.sqrt())
                    }
                }
            }
        }
        NodeKind::Binary(op, a, b) => {
            let u = eval_node(a, x)?;
            let v = eval_node(b, x)?;
            match op {
                BinaryOp::Add => Ok(u + v),
                BinaryOp::Sub => Ok(u - v),
                BinaryOp::Mul => Ok(u * v),
                BinaryOp::Div => {
                    if v == 0.0 {
                        Err(EvalError {
                            message: "division by zero".into(),
                            position: node.pos,
                        })
                    } else {
                        Ok(u / v)
                    }
                }
                BinaryOp::Pow => pow(u, v, node.pos),
            }
        }
    }
}

fn pow(base: f64, exponent: f64, pos: usize) -> Result<f64, EvalError> {
    let is_integer = exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64;
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError {
            message: "zero raised to a negative power".into(),
            position: pos,
        });
    }
    if is_integer {
        // powi keeps small integer powers exact (x^2 == x*x).
        Ok(base.powi(exponent as i32))
    } else if base < 0.0 {
        Err(EvalError {
            message: format!("negative base {base} with non-integer exponent {exponent}"),
            position: pos,
        })
    } else {
        Ok(base.powf(exponent))
    }
}

/// Central-difference gradient of an arbitrary target callable.
///
/// Component `j` is `(f(x + h e_j) - f(x - h e_j)) / (2h)`.
pub fn gradient_fd<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let mut grad = vec![0.0; x.len()];
    let mut pt = x.to_vec();
    for j in 0..x.len() {
        pt[j] = x[j] + h;
        let fp = f(&pt)?;
        pt[j] = x[j] - h;
        let fm = f(&pt)?;
        pt[j] = x[j];
        grad[j] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Second-order central-stencil Hessian, symmetrized as `(H + H^T) / 2`.
pub fn hessian_fd<F>(f: F, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let n = x.len();
    let mut hess = vec![vec![0.0; n]; n];
    let f0 = f(x)?;
    let mut pt = x.to_vec();
    for j in 0..n {
        pt[j] = x[j] + h;
        let fp = f(&pt)?;
        pt[j] = x[j] - h;
        let fm = f(&pt)?;
        pt[j] = x[j];
        hess[j][j] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            pt[j] = x[j] + h;
            pt[k] = x[k] + h;
            let fpp = f(&pt)?;
            pt[k] = x[k] - h;
            let fpm = f(&pt)?;
            pt[j] = x[j] - h;
            let fmm = f(&pt)?;
            pt[k] = x[k] + h;
            let fmp = f(&pt)?;
            pt[j] = x[j];
            pt[k] = x[k];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[j][k] = v;
            hess[k][j] = v;
        }
    }
    Ok(hess)
}

impl ExprAst {
    pub fn gradient_fd(&self, x: &[f64], h: f64) -> Result<Vec<f64>, EvalError> {
        gradient_fd(|p| self.eval(p), x, h)
    }

    pub fn hessian_fd(&self, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>, EvalError> {
        hessian_fd(|p| self.eval(p), x, h)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64, usize),
    Ident(String, usize),
    Op(char, usize),
    LParen(usize),
    RParen(usize),
}

impl Token {
    fn pos(&self) -> usize {
        match self {
            Token::Num(_, p)
            | Token::Ident(_, p)
            | Token::Op(_, p)
            | Token::LParen(p)
            | Token::RParen(p) => *p,
        }
    }

    fn describe(&self) -> String {
        match self {
            Token::Num(v, _) => v.to_string(),
            Token::Ident(s, _) => s.clone(),
            Token::Op(c, _) => c.to_string(),
            Token::LParen(_) => "(".into(),
            Token::RParen(_) => ")".into(),
        }
    }
}

fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                tokens.push(Token::LParen(i));
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen(i));
                i += 1;
            }
            '+' | '-' | '*' | '/' | '^' => {
                tokens.push(Token::Op(c, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent suffix: 1e-3, 2.5E+7
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError {
                    message: format!("invalid number `{text}`"),
                    position: start,
                })?;
                tokens.push(Token::Num(value, start));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                tokens.push(Token::Ident(source[start..i].to_string(), start));
            }
            _ => {
                return Err(ParseError {
                    message: format!("unexpected character `{c}`"),
                    position: i,
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    dim: usize,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.idx).cloned();
        if tok.is_some() {
            self.idx += 1;
        }
        tok
    }

    fn eof_err(&self, expected: &str) -> ParseError {
        ParseError {
            message: format!("expected {expected}, found end of input"),
            position: self.src_len,
        }
    }

    fn parse_expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_term()?;
        while let Some(Token::Op(c @ ('+' | '-'), pos)) = self.peek().cloned() {
            self.idx += 1;
            let rhs = self.parse_term()?;
            let op = if c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Node {
                kind: NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                pos,
            };
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.parse_unary()?;
        while let Some(Token::Op(c @ ('*' | '/'), pos)) = self.peek().cloned() {
            self.idx += 1;
            let rhs = self.parse_unary()?;
            let op = if c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Node {
                kind: NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)),
                pos,
            };
        }
        Ok(lhs)
    }

    // `^` binds tighter than unary minus, so -x1^2 parses as -(x1^2).
    fn parse_unary(&mut self) -> Result<Node, ParseError> {
        if let Some(Token::Op('-', pos)) = self.peek().cloned() {
            self.idx += 1;
            let inner = self.parse_unary()?;
            return Ok(Node {
                kind: NodeKind::Unary(UnaryOp::Neg, Box::new(inner)),
                pos,
            });
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Node, ParseError> {
        let base = self.parse_atom()?;
        if let Some(Token::Op('^', pos)) = self.peek().cloned() {
            self.idx += 1;
            // right-associative; the exponent may carry a unary minus
            let exponent = self.parse_unary()?;
            return Ok(Node {
                kind: NodeKind::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)),
                pos,
            });
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Node, ParseError> {
        let tok = match self.next() {
            Some(tok) => tok,
            None => return Err(self.eof_err("an operand")),
        };
        match tok {
            Token::Num(v, pos) => Ok(Node {
                kind: NodeKind::Const(v),
                pos,
            }),
            Token::LParen(pos) => {
                let inner = self.parse_expr()?;
                match self.next() {
                    Some(Token::RParen(_)) => Ok(inner),
                    Some(other) => Err(ParseError {
                        message: format!("expected `)`, found `{}`", other.describe()),
                        position: other.pos(),
                    }),
                    None => Err(ParseError {
                        message: "unbalanced parenthesis".into(),
                        position: pos,
                    }),
                }
            }
            Token::Ident(name, pos) => self.parse_ident(name, pos),
            other => Err(ParseError {
                message: format!("expected an operand, found `{}`", other.describe()),
                position: other.pos(),
            }),
        }
    }

    fn parse_ident(&mut self, name: String, pos: usize) -> Result<Node, ParseError> {
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(index) = rest.parse::<usize>() {
                if index == 0 {
                    return Err(ParseError {
                        message: "variable indices start at x1".into(),
                        position: pos,
                    });
                }
                if index > self.dim {
                    return Err(ParseError {
                        message: format!(
                            "variable x{index} exceeds declared dimension {}",
                            self.dim
                        ),
                        position: pos,
                    });
                }
                return Ok(Node {
                    kind: NodeKind::Var(index - 1),
                    pos,
                });
            }
        }
        let op = match name.as_str() {
            "abs" => UnaryOp::Abs,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "tanh" => UnaryOp::Tanh,
            _ => {
                return Err(ParseError {
                    message: format!("unknown identifier `{name}`"),
                    position: pos,
                })
            }
        };
        match self.next() {
            Some(Token::LParen(_)) => {}
            Some(other) => {
                return Err(ParseError {
                    message: format!("expected `(` after `{name}`"),
                    position: other.pos(),
                })
            }
            None => return Err(self.eof_err("`(`")),
        }
        let arg = self.parse_expr()?;
        match self.next() {
            Some(Token::RParen(_)) => Ok(Node {
                kind: NodeKind::Unary(op, Box::new(arg)),
                pos,
            }),
            Some(other) => Err(ParseError {
                message: format!("expected `)`, found `{}`", other.describe()),
                position: other.pos(),
            }),
            None => Err(self.eof_err("`)`")),
        }
    }
}
