//! A small expression language for coefficient functions of `x`.
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" unary)?
//! atom  := number | "x" | "pi" | name "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Functions: `exp ln sin cos sqrt abs` (one argument), `gaussian(u, c, s)`
//! for `exp(−(u − c)²/(2s²))`, and `piecewise(e0, b1, e1, …, bn, en)` which
//! takes `e_i` on `[b_i, b_{i+1})`. Breakpoints must be constant and
//! increasing.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    Gaussian(Box<[Node; 3]>),
    Piecewise { pieces: Vec<Node>, breaks: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

/// Parse failure with the byte offset into the source.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ExprError {}

/// A parsed expression in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src, pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Expr { root })
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval(&self.root, x)
    }

    /// Breakpoints of every `piecewise` in the expression.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        collect_breaks(&self.root, &mut out);
        out
    }
}

fn eval(n: &Node, x: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::X => x,
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x), eval(b, x));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, x);
            match f {
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
            }
        }
        Node::Gaussian(args) => {
            let [u, c, s] = &**args;
            let (u, c, s) = (eval(u, x), eval(c, x), eval(s, x));
            (-(u - c) * (u - c) / (2.0 * s * s)).exp()
        }
        Node::Piecewise { pieces, breaks } => {
            let i = breaks.iter().take_while(|b| x >= **b).count();
            eval(&pieces[i], x)
        }
    }
}

fn collect_breaks(n: &Node, out: &mut Vec<f64>) {
    match n {
        Node::Num(_) | Node::X => {}
        Node::Neg(a) | Node::Call(_, a) => collect_breaks(a, out),
        Node::Bin(_, a, b) => {
            collect_breaks(a, out);
            collect_breaks(b, out);
        }
        Node::Gaussian(args) => args.iter().for_each(|a| collect_breaks(a, out)),
        Node::Piecewise { pieces, breaks } => {
            out.extend(breaks);
            pieces.iter().for_each(|p| collect_breaks(p, out));
        }
    }
}

fn has_x(n: &Node) -> bool {
    match n {
        Node::Num(_) => false,
        Node::X => true,
        Node::Neg(a) | Node::Call(_, a) => has_x(a),
        Node::Bin(_, a, b) => has_x(a) || has_x(b),
        Node::Gaussian(args) => args.iter().any(has_x),
        Node::Piecewise { .. } => true,
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> ExprError {
        ExprError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                '+'
            } else if self.eat('-') {
                '-'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                '*'
            } else if self.eat('/') {
                '/'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let rest = &self.src[start..];
                let mut end = rest
                    .find(|c: char| !(c.is_ascii_digit() || c == '.'))
                    .unwrap_or(rest.len());
                // Exponent part.
                if rest[end..].starts_with(['e', 'E']) {
                    let tail = &rest[end + 1..];
                    let sign = usize::from(tail.starts_with(['+', '-']));
                    let digits = tail[sign..]
                        .find(|c: char| !c.is_ascii_digit())
                        .unwrap_or(tail.len() - sign);
                    if digits > 0 {
                        end += 1 + sign + digits;
                    }
                }
                let v: f64 = rest[..end].parse().map_err(|_| self.err("malformed number"))?;
                self.pos += end;
                Ok(Node::Num(v))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let rest = &self.src[start..];
                let end = rest
                    .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                    .unwrap_or(rest.len());
                let name = &rest[..end];
                self.pos += end;
                match name {
                    "x" => Ok(Node::X),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    _ => self.call(name, start),
                }
            }
            _ => Err(self.err("expected a number, x, a function or '('")),
        }
    }

    fn call(&mut self, name: &str, start: usize) -> Result<Node, ExprError> {
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        self.expect(')')?;
        let at = |msg: String| ExprError {
            offset: start,
            message: msg,
        };
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(at(format!("{name} takes {n} argument(s), got {}", args.len())))
            }
        };
        let func = match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "gaussian" => {
                arity(3)?;
                let [u, c, s]: [Node; 3] = args.try_into().expect("arity checked");
                return Ok(Node::Gaussian(Box::new([u, c, s])));
            }
            "piecewise" => {
                if args.len() % 2 == 0 {
                    return Err(at("piecewise takes e0, b1, e1, …, bn, en".into()));
                }
                let mut pieces = Vec::new();
                let mut breaks = Vec::new();
                for (i, a) in args.into_iter().enumerate() {
                    if i % 2 == 0 {
                        pieces.push(a);
                    } else {
                        if has_x(&a) {
                            return Err(at("piecewise breakpoints must be constant".into()));
                        }
                        let b = eval(&a, 0.0);
                        if breaks.last().is_some_and(|l| b <= *l) || !b.is_finite() {
                            return Err(at("piecewise breakpoints must increase".into()));
                        }
                        breaks.push(b);
                    }
                }
                return Ok(Node::Piecewise { pieces, breaks });
            }
            _ => return Err(at(format!("unknown function '{name}'"))),
        };
        arity(1)?;
        Ok(Node::Call(func, Box::new(args.pop().expect("one argument"))))
    }
}
