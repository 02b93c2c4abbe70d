//! Arithmetic expressions in a single variable.
//!
//! Grammar (whitespace insignificant, `^` right-associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := unary ('^' factor)?
//! unary   := '-' unary | primary
//! primary := number | variable | func '(' expr ')' | '(' expr ')' | 'pi' | 'e'
//! func    := sin | cos | exp | log | sqrt
//! ```
//!
//! Note that unary minus binds tighter than `^`, so `-u^2` is `(-u)^2`.

use std::f64::consts;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
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
        }
    }

    fn apply(self, x: f64) -> Result<f64> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => Ok(x.exp()),
            Func::Log if x <= 0.0 => Err(Error::Domain(format!("log of non-positive value {x}"))),
            Func::Log => Ok(x.ln()),
            Func::Sqrt if x < 0.0 => Err(Error::Domain(format!("sqrt of negative value {x}"))),
            Func::Sqrt => Ok(x.sqrt()),
        }
    }
}

/// A node of the expression tree. `Var` always refers to the tree's single
/// declared variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Parsed, immutable expression in one named variable.
#[derive(Debug, Clone)]
pub struct ExprTree {
    root: Arc<Node>,
    var: Arc<str>,
}

impl ExprTree {
    pub fn parse(source: &str, variable: &str) -> Result<ExprTree> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            var: variable,
        };
        if parser.peek().kind == Tok::End {
            return Err(Error::Syntax {
                offset: 0,
                message: "empty expression".into(),
            });
        }
        let root = parser.expr()?;
        let next = parser.peek();
        if next.kind != Tok::End {
            return Err(Error::Syntax {
                offset: next.offset,
                message: format!("unexpected {}", next.kind.describe()),
            });
        }
        Ok(ExprTree {
            root: Arc::new(root),
            var: variable.into(),
        })
    }

    pub fn from_node(root: Node, variable: &str) -> ExprTree {
        ExprTree {
            root: Arc::new(root),
            var: variable.into(),
        }
    }

    pub fn constant(value: f64, variable: &str) -> ExprTree {
        ExprTree::from_node(Node::Num(value), variable)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variable(&self) -> &str {
        &self.var
    }

    /// Evaluates the tree at `x`. Any non-finite intermediate is reported as a
    /// domain error.
    pub fn eval(&self, x: f64) -> Result<f64> {
        eval_node(&self.root, x)
    }

    /// Exact symbolic derivative with respect to `variable`. Differentiating
    /// with respect to anything other than the tree's own variable yields 0.
    pub fn differentiate(&self, variable: &str) -> ExprTree {
        let root = if variable == &*self.var {
            diff(&self.root)
        } else {
            Node::Num(0.0)
        };
        ExprTree {
            root: Arc::new(root),
            var: self.var.clone(),
        }
    }

    pub fn is_constant(&self) -> bool {
        is_const(&self.root)
    }

    /// Returns `factor * self` as a new tree.
    pub fn scaled(&self, factor: f64) -> ExprTree {
        ExprTree {
            root: Arc::new(mul(Node::Num(factor), (*self.root).clone())),
            var: self.var.clone(),
        }
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.var)
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, var: &str) -> fmt::Result {
    match node {
        Node::Num(v) if *v < 0.0 => write!(f, "(-{:?})", -v),
        Node::Num(v) => write!(f, "{v:?}"),
        Node::Var => f.write_str(var),
        Node::Neg(a) => {
            f.write_str("(-")?;
            write_node(f, a, var)?;
            f.write_str(")")
        }
        Node::Binary(op, a, b) => {
            f.write_str("(")?;
            write_node(f, a, var)?;
            write!(f, " {} ", op.symbol())?;
            write_node(f, b, var)?;
            f.write_str(")")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, var)?;
            f.write_str(")")
        }
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{what} produced a non-finite value")))
    }
}

fn power(base: f64, exponent: f64) -> Result<f64> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        if base == 0.0 && exponent < 0.0 {
            return Err(Error::Domain("zero raised to a negative power".into()));
        }
        return finite(base.powi(exponent as i32), "power");
    }
    if base < 0.0 {
        return Err(Error::Domain(format!(
            "fractional power {exponent} of negative base {base}"
        )));
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(Error::Domain("zero raised to a negative power".into()));
    }
    finite(base.powf(exponent), "power")
}

fn eval_node(node: &Node, x: f64) -> Result<f64> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Var => Ok(x),
        Node::Neg(a) => Ok(-eval_node(a, x)?),
        Node::Binary(op, a, b) => {
            let l = eval_node(a, x)?;
            let r = eval_node(b, x)?;
            match op {
                BinOp::Add => finite(l + r, "addition"),
                BinOp::Sub => finite(l - r, "subtraction"),
                BinOp::Mul => finite(l * r, "multiplication"),
                BinOp::Div if r == 0.0 => Err(Error::Domain("division by zero".into())),
                BinOp::Div => finite(l / r, "division"),
                BinOp::Pow => power(l, r),
            }
        }
        Node::Call(func, a) => {
            let v = func.apply(eval_node(a, x)?)?;
            finite(v, func.name())
        }
    }
}

fn is_const(node: &Node) -> bool {
    match node {
        Node::Num(_) => true,
        Node::Var => false,
        Node::Neg(a) | Node::Call(_, a) => is_const(a),
        Node::Binary(_, a, b) => is_const(a) && is_const(b),
    }
}

fn as_num(node: &Node) -> Option<f64> {
    match node {
        Node::Num(v) => Some(*v),
        _ => None,
    }
}

// Constant-folding constructors. Folding only happens when the result is a
// finite number; otherwise the node is kept so the error surfaces at
// evaluation time.

fn fold_binary(op: BinOp, a: Node, b: Node) -> Node {
    if let (Some(x), Some(y)) = (as_num(&a), as_num(&b)) {
        let folded = match op {
            BinOp::Add => Some(x + y),
            BinOp::Sub => Some(x - y),
            BinOp::Mul => Some(x * y),
            BinOp::Div if y != 0.0 => Some(x / y),
            BinOp::Pow => power(x, y).ok(),
            _ => None,
        };
        if let Some(v) = folded.filter(|v| v.is_finite()) {
            return Node::Num(v);
        }
    }
    Node::Binary(op, Box::new(a), Box::new(b))
}

fn add(a: Node, b: Node) -> Node {
    match (as_num(&a), as_num(&b)) {
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => fold_binary(BinOp::Add, a, b),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (as_num(&a), as_num(&b)) {
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => fold_binary(BinOp::Sub, a, b),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (as_num(&a), as_num(&b)) {
        (Some(0.0), _) | (_, Some(0.0)) => Node::Num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => fold_binary(BinOp::Mul, a, b),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (as_num(&a), as_num(&b)) {
        (_, Some(1.0)) => a,
        (Some(x), Some(y)) if x == 0.0 && y != 0.0 => Node::Num(0.0),
        _ => fold_binary(BinOp::Div, a, b),
    }
}

fn pow(a: Node, b: Node) -> Node {
    match as_num(&b) {
        Some(1.0) => a,
        Some(0.0) => Node::Num(1.0),
        _ => fold_binary(BinOp::Pow, a, b),
    }
}

fn neg(a: Node) -> Node {
    match a {
        Node::Num(v) => Node::Num(-v),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn call(func: Func, a: Node) -> Node {
    if let Some(v) = as_num(&a).and_then(|x| func.apply(x).ok()) {
        if v.is_finite() {
            return Node::Num(v);
        }
    }
    Node::Call(func, Box::new(a))
}

fn diff(node: &Node) -> Node {
    match node {
        Node::Num(_) => Node::Num(0.0),
        Node::Var => Node::Num(1.0),
        Node::Neg(a) => neg(diff(a)),
        Node::Binary(op, a, b) => {
            let (a, b) = (a.as_ref(), b.as_ref());
            match op {
                BinOp::Add => add(diff(a), diff(b)),
                BinOp::Sub => sub(diff(a), diff(b)),
                BinOp::Mul => add(mul(diff(a), b.clone()), mul(a.clone(), diff(b))),
                BinOp::Div => div(
                    sub(mul(diff(a), b.clone()), mul(a.clone(), diff(b))),
                    mul(b.clone(), b.clone()),
                ),
                BinOp::Pow if is_const(b) => {
                    let reduced = pow(a.clone(), sub(b.clone(), Node::Num(1.0)));
                    mul(mul(b.clone(), reduced), diff(a))
                }
                BinOp::Pow if is_const(a) => mul(mul(pow(a.clone(), b.clone()), call(Func::Log, a.clone())), diff(b)),
                BinOp::Pow => mul(
                    pow(a.clone(), b.clone()),
                    add(
                        mul(diff(b), call(Func::Log, a.clone())),
                        div(mul(b.clone(), diff(a)), a.clone()),
                    ),
                ),
            }
        }
        Node::Call(func, a) => {
            let inner = a.as_ref();
            let outer = match func {
                Func::Sin => call(Func::Cos, inner.clone()),
                Func::Cos => neg(call(Func::Sin, inner.clone())),
                Func::Exp => call(Func::Exp, inner.clone()),
                Func::Log => div(Node::Num(1.0), inner.clone()),
                Func::Sqrt => div(Node::Num(1.0), mul(Node::Num(2.0), call(Func::Sqrt, inner.clone()))),
            };
            mul(outer, diff(inner))
        }
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
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(offset, ch)) = chars.peek() {
        if ch.is_whitespace() {
            chars.next();
            continue;
        }
        let kind = match ch {
            '+' => Tok::Plus,
            '-' | '\u{2212}' => Tok::Minus,
            '*' | '\u{00d7}' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                let mut end = offset;
                let mut prev = ' ';
                while let Some(&(i, c)) = chars.peek() {
                    let exp_sign = (c == '+' || c == '-') && (prev == 'e' || prev == 'E');
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                        // `2e` not followed by an exponent ends the number at `2`
                        if (c == 'e' || c == 'E') && !exponent_follows(&src[i + 1..]) {
                            break;
                        }
                        end = i + c.len_utf8();
                        prev = c;
                        chars.next();
                    } else {
                        break;
                    }
                }
                let text = &src[offset..end];
                let value = text.parse::<f64>().map_err(|_| Error::Syntax {
                    offset,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push(Token {
                    kind: Tok::Num(value),
                    offset,
                });
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut end = offset;
                while let Some(&(i, c)) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        end = i + c.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    kind: Tok::Ident(src[offset..end].to_string()),
                    offset,
                });
                continue;
            }
            other => {
                return Err(Error::Syntax {
                    offset,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        chars.next();
        out.push(Token { kind, offset });
    }
    out.push(Token {
        kind: Tok::End,
        offset: src.len(),
    });
    Ok(out)
}

fn exponent_follows(rest: &str) -> bool {
    let mut it = rest.chars();
    match it.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some('+') | Some('-') => it.next().is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    var: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: Tok) -> Result<()> {
        let t = self.advance();
        if t.kind == kind {
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: t.offset,
                message: format!("expected {}, found {}", kind.describe(), t.kind.describe()),
            })
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().kind {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.factor()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node> {
        let base = self.unary()?;
        if self.peek().kind == Tok::Caret {
            self.advance();
            let exponent = self.factor()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek().kind == Tok::Minus {
            self.advance();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node> {
        let t = self.advance();
        match t.kind {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek().kind == Tok::LParen {
                    let func = Func::from_name(&name).ok_or(Error::UnknownFunction {
                        name: name.clone(),
                        offset: t.offset,
                    })?;
                    self.advance();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if name == self.var {
                    Ok(Node::Var)
                } else if name == "pi" {
                    Ok(Node::Num(consts::PI))
                } else if name == "e" {
                    Ok(Node::Num(consts::E))
                } else if Func::from_name(&name).is_some() {
                    Err(Error::Syntax {
                        offset: t.offset,
                        message: format!("function `{name}` requires an argument"),
                    })
                } else {
                    Err(Error::UnknownIdentifier {
                        name,
                        offset: t.offset,
                        expected: self.var.to_string(),
                    })
                }
            }
            other => Err(Error::Syntax {
                offset: t.offset,
                message: format!("expected number, identifier or '(', found {}", other.describe()),
            }),
        }
    }
}

/// Central finite difference with step `step`; used by tests and diagnostics.
pub fn central_difference(tree: &ExprTree, x: f64, step: f64) -> Result<f64> {
    Ok((tree.eval(x + step)? - tree.eval(x - step)?) / (2.0 * step))
}
