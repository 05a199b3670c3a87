//! Arithmetic expressions over chart coordinates `x1 .. xn`.
//!
//! The grammar, left-associative with the usual precedence:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' integer)?
//! base   := number | variable | '(' expr ')' | func '(' expr ')'
//! func   := sqrt | exp | log | sin | cos | abs
//! ```
//!
//! Numbers are unsigned decimal literals (`2`, `0.5`, `1e-3`); there is
//! no unary minus, so negation is written `0 - x1`. Variables are `x`
//! followed by a 1-based coordinate index. Error offsets are 1-based
//! byte positions into the source text.
//!
//! Printing is tree-exact: the printed form reparses to the same tree,
//! so a round trip evaluates bit-for-bit identically.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

/// Parse or bind error with a 1-based byte offset into the source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExprError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "offset {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for ExprError {}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, ExprError> {
    Err(ExprError {
        offset,
        message: message.into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "sqrt" => Some(Func::Sqrt),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sqrt => v.sqrt(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Number(f64),
    /// 0-based coordinate index plus the 1-based source offset of the
    /// variable token, kept for bind-time range errors.
    Variable(usize, usize),
    Call(Func, Box<Node>),
    Power(Box<Node>, i32),
    Binary(BinOp, Box<Node>, Box<Node>),
}

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Binary(op, ..) => op.precedence(),
            Node::Power(..) => 3,
            _ => 4,
        }
    }

    fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Node::Number(v) => *v,
            Node::Variable(k, _) => x[*k],
            Node::Call(f, inner) => f.apply(inner.eval(x)),
            Node::Power(base, k) => base.eval(x).powi(*k),
            Node::Binary(op, lhs, rhs) => {
                let (a, b) = (lhs.eval(x), rhs.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
        }
    }

    fn max_variable(&self) -> usize {
        match self {
            Node::Number(_) => 0,
            Node::Variable(k, _) => k + 1,
            Node::Call(_, inner) => inner.max_variable(),
            Node::Power(base, _) => base.max_variable(),
            Node::Binary(_, lhs, rhs) => lhs.max_variable().max(rhs.max_variable()),
        }
    }

    fn check_bound(&self, dim: usize) -> Result<(), ExprError> {
        match self {
            Node::Number(_) => Ok(()),
            Node::Variable(k, offset) => {
                if *k >= dim {
                    err(
                        *offset,
                        format!("variable x{} exceeds chart dimension {dim}", k + 1),
                    )
                } else {
                    Ok(())
                }
            }
            Node::Call(_, inner) => inner.check_bound(dim),
            Node::Power(base, _) => base.check_bound(dim),
            Node::Binary(_, lhs, rhs) => {
                lhs.check_bound(dim)?;
                rhs.check_bound(dim)
            }
        }
    }

    fn print(&self, out: &mut String) {
        match self {
            Node::Number(v) => {
                // Display of f64 never uses scientific notation and
                // round-trips exactly, so the output stays a literal.
                out.push_str(&format!("{v}"));
            }
            Node::Variable(k, _) => {
                out.push_str(&format!("x{}", k + 1));
            }
            Node::Call(f, inner) => {
                out.push_str(f.name());
                out.push('(');
                inner.print(out);
                out.push(')');
            }
            Node::Power(base, k) => {
                // Grammar restricts a power's base to atoms, so any
                // compound base must reparse from parentheses.
                let atom = matches!(
                    **base,
                    Node::Number(_) | Node::Variable(..) | Node::Call(..)
                );
                if atom {
                    base.print(out);
                } else {
                    out.push('(');
                    base.print(out);
                    out.push(')');
                }
                out.push('^');
                out.push_str(&format!("{k}"));
            }
            Node::Binary(op, lhs, rhs) => {
                // Left-associative reparse: the left child keeps equal
                // precedence bare, the right child does not.
                let prec = op.precedence();
                Self::print_child(lhs, prec, false, out);
                out.push(' ');
                out.push(op.symbol());
                out.push(' ');
                Self::print_child(rhs, prec, true, out);
            }
        }
    }

    fn print_child(child: &Node, parent: u8, right: bool, out: &mut String) {
        let wrap = if right {
            child.precedence() <= parent
        } else {
            child.precedence() < parent
        };
        if wrap {
            out.push('(');
            child.print(out);
            out.push(')');
        } else {
            child.print(out);
        }
    }
}

/// A parsed scalar field over chart coordinates.
#[derive(Clone, Debug)]
pub struct FieldExpression {
    source: String,
    root: Arc<Node>,
}

impl FieldExpression {
    /// The original source text.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Canonical printed form; reparses to the same tree.
    pub fn print(&self) -> String {
        let mut out = String::new();
        self.root.print(&mut out);
        out
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.root.eval(x)
    }

    /// Largest 1-based coordinate index referenced; zero when constant.
    pub fn max_variable(&self) -> usize {
        self.root.max_variable()
    }

    /// Rejects references to coordinates beyond the chart dimension.
    pub fn bind(&self, dim: usize) -> Result<(), ExprError> {
        self.root.check_bound(dim)
    }

    /// An evaluation closure detached from the expression's lifetime,
    /// ready to back a library field.
    pub fn evaluator(&self) -> impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static {
        let root = Arc::clone(&self.root);
        move |x| root.eval(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Token {
    Number(f64),
    Variable(usize),
    Func(Func),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Open,
    Close,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number(v) => format!("number {v}"),
            Token::Variable(k) => format!("variable x{}", k + 1),
            Token::Func(f) => format!("function {}", f.name()),
            Token::Plus => "'+'".into(),
            Token::Minus => "'-'".into(),
            Token::Star => "'*'".into(),
            Token::Slash => "'/'".into(),
            Token::Caret => "'^'".into(),
            Token::Open => "'('".into(),
            Token::Close => "')'".into(),
            Token::End => "end of input".into(),
        }
    }
}

/// Token plus the 1-based byte offset of its first character.
#[derive(Clone, Copy)]
struct Spanned {
    token: Token,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        let offset = i + 1;
        match c {
            b' ' | b'\t' => {
                i += 1;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' => {
                let token = match c {
                    b'+' => Token::Plus,
                    b'-' => Token::Minus,
                    b'*' => Token::Star,
                    b'/' => Token::Slash,
                    b'^' => Token::Caret,
                    b'(' => Token::Open,
                    _ => Token::Close,
                };
                tokens.push(Spanned { token, offset });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let literal = &text[start..i];
                let Ok(value) = literal.parse::<f64>() else {
                    return err(offset, format!("malformed number '{literal}'"));
                };
                tokens.push(Spanned {
                    token: Token::Number(value),
                    offset,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                let word = &text[start..i];
                let token = if let Some(rest) = word.strip_prefix('x') {
                    if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                        let index: usize = rest.parse().map_err(|_| ExprError {
                            offset,
                            message: format!("variable index too large in '{word}'"),
                        })?;
                        if index == 0 {
                            return err(offset, "variable indices start at x1");
                        }
                        Token::Variable(index - 1)
                    } else if let Some(f) = Func::from_name(word) {
                        Token::Func(f)
                    } else {
                        return err(offset, format!("unknown identifier '{word}'"));
                    }
                } else if let Some(f) = Func::from_name(word) {
                    Token::Func(f)
                } else {
                    return err(offset, format!("unknown identifier '{word}'"));
                };
                tokens.push(Spanned { token, offset });
            }
            _ => {
                let c = text[i..].chars().next().unwrap_or('?');
                return err(offset, format!("unexpected character '{c}'"));
            }
        }
    }
    tokens.push(Spanned {
        token: Token::End,
        offset: bytes.len() + 1,
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Spanned>,
    cursor: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.cursor]
    }

    fn advance(&mut self) -> Spanned {
        let spanned = self.tokens[self.cursor];
        if self.cursor + 1 < self.tokens.len() {
            self.cursor += 1;
        }
        spanned
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().token {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().token {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.factor()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        let base = self.base()?;
        if self.peek().token != Token::Caret {
            return Ok(base);
        }
        self.advance();
        let negative = if self.peek().token == Token::Minus {
            self.advance();
            true
        } else {
            false
        };
        let spanned = self.advance();
        let Token::Number(value) = spanned.token else {
            return err(spanned.offset, "expected integer exponent");
        };
        if value.fract() != 0.0 || value > i32::MAX as f64 {
            return err(spanned.offset, "expected integer exponent");
        }
        let mut exponent = value as i32;
        if negative {
            exponent = -exponent;
        }
        Ok(Node::Power(Box::new(base), exponent))
    }

    fn base(&mut self) -> Result<Node, ExprError> {
        let spanned = self.advance();
        let offset = spanned.offset;
        match spanned.token {
            Token::Number(v) => Ok(Node::Number(v)),
            Token::Variable(k) => Ok(Node::Variable(k, offset)),
            Token::Func(f) => {
                let open = self.advance();
                if open.token != Token::Open {
                    return err(
                        open.offset,
                        format!(
                            "expected '(' after {}, found {}",
                            f.name(),
                            open.token.describe()
                        ),
                    );
                }
                let inner = self.expr()?;
                let close = self.advance();
                if close.token != Token::Close {
                    return err(
                        close.offset,
                        format!("expected ')', found {}", close.token.describe()),
                    );
                }
                Ok(Node::Call(f, Box::new(inner)))
            }
            Token::Open => {
                let inner = self.expr()?;
                let close = self.advance();
                if close.token != Token::Close {
                    return err(
                        close.offset,
                        format!("expected ')', found {}", close.token.describe()),
                    );
                }
                Ok(inner)
            }
            other => err(
                offset,
                format!("expected an expression, found {}", other.describe()),
            ),
        }
    }
}

/// Parses the expression language. Errors carry 1-based byte offsets.
pub fn parse_field(text: &str) -> Result<FieldExpression, ExprError> {
    if text.trim().is_empty() {
        return err(1, "empty expression");
    }
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, cursor: 0 };
    let root = parser.expr()?;
    let trailing = parser.peek();
    if trailing.token != Token::End {
        return err(
            trailing.offset,
            format!("unexpected trailing {}", trailing.token.describe()),
        );
    }
    Ok(FieldExpression {
        source: text.to_string(),
        root: Arc::new(root),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_at(text: &str, coords: &[f64]) -> f64 {
        let expr = parse_field(text).unwrap();
        expr.eval(&DVector::from_column_slice(coords))
    }

    #[test]
    fn evaluates_polynomials_and_coordinates() {
        assert_eq!(eval_at("1 - x1^2 - x2^2", &[0.0, 0.0]), 1.0);
        assert_eq!(eval_at("x2", &[3.0, 0.25]), 0.25);
        assert_eq!(eval_at("2 + 3 * 4", &[0.0]), 14.0);
        assert_eq!(eval_at("(2 + 3) * 4", &[0.0]), 20.0);
        // A factor takes at most one exponent; chains need parentheses.
        assert_eq!(parse_field("2 ^ 3 ^ 1").unwrap_err().offset, 7);
        assert_eq!(eval_at("(2^3) ^ 2", &[0.0]), 64.0);
    }

    #[test]
    fn division_and_subtraction_associate_left() {
        assert_eq!(eval_at("8 / 4 / 2", &[0.0]), 1.0);
        assert_eq!(eval_at("8 - 4 - 2", &[0.0]), 2.0);
    }

    #[test]
    fn functions_and_negative_exponents() {
        assert_eq!(eval_at("sqrt(abs(0 - 9))", &[0.0]), 3.0);
        assert_eq!(eval_at("1 / x2^2", &[0.0, 2.0]), 0.25);
        assert_eq!(eval_at("x2^-2", &[0.0, 2.0]), 0.25);
        assert!((eval_at("log(exp(1))", &[0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(eval_at("sin(0) + cos(0)", &[0.0]), 1.0);
    }

    #[test]
    fn malformed_operator_is_reported_at_its_byte() {
        let e = parse_field("1 - x1^^2").unwrap_err();
        assert_eq!(e.offset, 8);
        assert!(e.message.contains("integer exponent"), "{e}");
    }

    #[test]
    fn errors_carry_one_based_offsets() {
        assert_eq!(parse_field("").unwrap_err().offset, 1);
        assert_eq!(parse_field("1 + ").unwrap_err().offset, 5);
        assert_eq!(parse_field("foo(1)").unwrap_err().offset, 1);
        assert_eq!(parse_field("1 + bar").unwrap_err().offset, 5);
        assert_eq!(parse_field("(1 + 2").unwrap_err().offset, 7);
        assert_eq!(parse_field("1 ? 2").unwrap_err().offset, 3);
        assert_eq!(parse_field("1 2").unwrap_err().offset, 3);
        assert_eq!(parse_field("sqrt 2").unwrap_err().offset, 6);
        assert_eq!(parse_field("x0 + 1").unwrap_err().offset, 1);
    }

    #[test]
    fn bind_rejects_out_of_range_variables() {
        let expr = parse_field("x1 + x3").unwrap();
        assert!(expr.bind(3).is_ok());
        let e = expr.bind(2).unwrap_err();
        assert_eq!(e.offset, 6);
        assert!(e.message.contains("x3"), "{e}");
        assert_eq!(expr.max_variable(), 3);
    }

    #[test]
    fn printing_reparses_to_the_same_tree() {
        let battery = [
            "1 - x1^2 - x2^2",
            "1 / x2^2",
            "x2^-2",
            "(x1 + x2) * (x1 - x2)",
            "1 - (x1 - 2) * (x1 - 2)",
            "sqrt(x1^2 + x2^2) - 1",
            "8 - 4 - 2",
            "8 / 4 / 2",
            "2 * (3 + 4) ^ 2",
            "abs(sin(x1) * cos(x2))",
            "0.5 * x1 + 1e-3",
        ];
        for text in battery {
            let first = parse_field(text).unwrap();
            let printed = first.print();
            let second = parse_field(&printed).unwrap();
            assert_eq!(first.root, second.root, "{text} -> {printed}");
            assert_eq!(second.print(), printed, "printing must be idempotent");
        }
    }

    #[test]
    fn printer_preserves_grouping_against_associativity() {
        // 8 - (4 - 2) must not print as the left-associative 8 - 4 - 2.
        let expr = parse_field("8 - (4 - 2)").unwrap();
        let printed = expr.print();
        let again = parse_field(&printed).unwrap();
        assert_eq!(
            expr.eval(&DVector::zeros(1)),
            again.eval(&DVector::zeros(1))
        );
        assert_eq!(expr.eval(&DVector::zeros(1)), 6.0);
    }
}
