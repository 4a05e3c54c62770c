//! Arithmetic expressions over `x` (arclength) and `t` (time).
//!
//! Grammar (power is right-associative, unary sign binds looser than `^`):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('+' | '-') unary | power
//! power   := primary ('^' unary)?
//! primary := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers and call arities are resolved while parsing, so a parsed
//! [`Expression`] can always be evaluated; evaluation only fails on domain
//! errors such as `log(0)`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    T,
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
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Var(Var),
    Pi,
    E,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// AST node with the source span it was parsed from.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    // Structural equality ignores spans.
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone)]
pub struct Expression {
    src: Arc<str>,
    root: Expr,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

/// Evaluation point. `x` is arclength on the current edge, `t` is time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalScope {
    pub x: f64,
    pub t: f64,
}

impl EvalScope {
    pub fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {}", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
    },
    #[error("unknown identifier `{name}` at byte {}", span.start)]
    UnknownIdentifier { name: String, span: Span },
    #[error("`{name}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        name: &'static str,
        expected: usize,
        found: usize,
        span: Span,
    },
    #[error("domain error in `{snippet}`: {reason}")]
    Domain {
        reason: &'static str,
        span: Span,
        snippet: String,
    },
}

impl ExprError {
    /// Byte span of the offending input, if any.
    pub fn span(&self) -> Span {
        match self {
            ExprError::Syntax { offset, .. } => Span {
                start: *offset,
                end: *offset,
            },
            ExprError::UnknownIdentifier { span, .. }
            | ExprError::ArityMismatch { span, .. }
            | ExprError::Domain { span, .. } => *span,
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
    Comma,
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_token(&mut self) -> Result<(Tok, Span), ExprError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((Tok::Eof, Span { start, end: start }));
        }
        let c = bytes[start];
        let single = |tok| Ok((tok, Span { start, end: start + 1 }));
        match c {
            b'+' => {
                self.pos += 1;
                single(Tok::Plus)
            }
            b'-' => {
                self.pos += 1;
                single(Tok::Minus)
            }
            b'*' => {
                self.pos += 1;
                single(Tok::Star)
            }
            b'/' => {
                self.pos += 1;
                single(Tok::Slash)
            }
            b'^' => {
                self.pos += 1;
                single(Tok::Caret)
            }
            b'(' => {
                self.pos += 1;
                single(Tok::LParen)
            }
            b')' => {
                self.pos += 1;
                single(Tok::RParen)
            }
            b',' => {
                self.pos += 1;
                single(Tok::Comma)
            }
            b'0'..=b'9' | b'.' => self.number(start),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let span = Span {
                    start,
                    end: self.pos,
                };
                Ok((Tok::Ident(self.src[start..self.pos].to_string()), span))
            }
            _ => Err(ExprError::Syntax {
                offset: start,
                expected: vec!["number", "identifier", "'('"],
            }),
        }
    }

    fn number(&mut self, start: usize) -> Result<(Tok, Span), ExprError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let s = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - s
        };
        let mut pos = start;
        let mut n = digits(&mut pos);
        if pos < bytes.len() && bytes[pos] == b'.' {
            pos += 1;
            n += digits(&mut pos);
        }
        if n == 0 {
            return Err(ExprError::Syntax {
                offset: start,
                expected: vec!["number"],
            });
        }
        if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
            let mut p = pos + 1;
            if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                p += 1;
            }
            // Only treat it as an exponent when digits follow; otherwise `e`
            // starts the next token and the parser reports it.
            if digits(&mut p) > 0 {
                pos = p;
            }
        }
        self.pos = pos;
        let text = &self.src[start..pos];
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            expected: vec!["number"],
        })?;
        Ok((Tok::Num(value), Span { start, end: pos }))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    span: Span,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ExprError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, span) = lexer.next_token()?;
        Ok(Self { lexer, tok, span })
    }

    fn bump(&mut self) -> Result<(), ExprError> {
        let (tok, span) = self.lexer.next_token()?;
        self.tok = tok;
        self.span = span;
        Ok(())
    }

    fn expect(&mut self, tok: Tok, what: &'static str) -> Result<Span, ExprError> {
        if self.tok == tok {
            let span = self.span;
            self.bump()?;
            Ok(span)
        } else {
            Err(ExprError::Syntax {
                offset: self.span.start,
                expected: vec![what],
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        let negate = match self.tok {
            Tok::Plus => false,
            Tok::Minus => true,
            _ => return self.power(),
        };
        let sign_span = self.span;
        self.bump()?;
        if !self.starts_operand() {
            // Point at the dangling sign rather than at what follows it.
            return Err(ExprError::Syntax {
                offset: sign_span.start,
                expected: vec!["operand"],
            });
        }
        let inner = self.unary()?;
        if negate {
            let span = Span {
                start: sign_span.start,
                end: inner.span.end,
            };
            Ok(Expr {
                kind: ExprKind::Neg(Box::new(inner)),
                span,
            })
        } else {
            Ok(inner)
        }
    }

    fn starts_operand(&self) -> bool {
        matches!(
            self.tok,
            Tok::Num(_) | Tok::Ident(_) | Tok::LParen | Tok::Plus | Tok::Minus
        )
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.tok == Tok::Caret {
            self.bump()?;
            let exponent = self.unary()?;
            return Ok(binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let span = self.span;
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr {
                    kind: ExprKind::Num(v),
                    span,
                })
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                let close = self.expect(Tok::RParen, "')'")?;
                Ok(Expr {
                    kind: inner.kind,
                    span: Span {
                        start: span.start,
                        end: close.end,
                    },
                })
            }
            Tok::Ident(name) => {
                self.bump()?;
                if self.tok == Tok::LParen {
                    let func = Func::lookup(&name).ok_or(ExprError::UnknownIdentifier {
                        name: name.clone(),
                        span,
                    })?;
                    self.bump()?;
                    let mut args = vec![self.expr()?];
                    while self.tok == Tok::Comma {
                        self.bump()?;
                        args.push(self.expr()?);
                    }
                    let close = self.expect(Tok::RParen, "')' or ','")?;
                    let full = Span {
                        start: span.start,
                        end: close.end,
                    };
                    if args.len() != func.arity() {
                        return Err(ExprError::ArityMismatch {
                            name: func.name(),
                            expected: func.arity(),
                            found: args.len(),
                            span: full,
                        });
                    }
                    return Ok(Expr {
                        kind: ExprKind::Call(func, args),
                        span: full,
                    });
                }
                let kind = match name.as_str() {
                    "x" => ExprKind::Var(Var::X),
                    "t" => ExprKind::Var(Var::T),
                    "pi" => ExprKind::Pi,
                    "e" => ExprKind::E,
                    _ => {
                        return Err(if let Some(func) = Func::lookup(&name) {
                            ExprError::ArityMismatch {
                                name: func.name(),
                                expected: func.arity(),
                                found: 0,
                                span,
                            }
                        } else {
                            ExprError::UnknownIdentifier { name, span }
                        })
                    }
                };
                Ok(Expr { kind, span })
            }
            _ => Err(ExprError::Syntax {
                offset: span.start,
                expected: vec!["number", "identifier", "'('"],
            }),
        }
    }
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = Span {
        start: lhs.span.start,
        end: rhs.span.end,
    };
    Expr {
        kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
        span,
    }
}

/// Parses `src` into an expression.
pub fn parse_expression(src: &str) -> Result<Expression, ExprError> {
    let mut parser = Parser::new(src)?;
    if parser.tok == Tok::Eof {
        return Err(ExprError::Syntax {
            offset: 0,
            expected: vec!["expression"],
        });
    }
    let root = parser.expr()?;
    if parser.tok != Tok::Eof {
        return Err(ExprError::Syntax {
            offset: parser.span.start,
            expected: vec!["operator", "end of input"],
        });
    }
    Ok(Expression {
        src: Arc::from(src),
        root,
    })
}

impl Expression {
    /// Expression that always evaluates to `value`.
    pub fn constant(value: f64) -> Self {
        let src = Arc::<str>::from(format_number(value).as_str());
        let span = Span {
            start: 0,
            end: src.len(),
        };
        Expression {
            src,
            root: Expr {
                kind: ExprKind::Num(value),
                span,
            },
        }
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// Height of the tree; leaves have depth 0.
    pub fn depth(&self) -> usize {
        fn go(e: &Expr) -> usize {
            match &e.kind {
                ExprKind::Num(_) | ExprKind::Var(_) | ExprKind::Pi | ExprKind::E => 0,
                ExprKind::Neg(inner) => 1 + go(inner),
                ExprKind::Binary(_, l, r) => 1 + go(l).max(go(r)),
                ExprKind::Call(_, args) => 1 + args.iter().map(go).max().unwrap_or(0),
            }
        }
        go(&self.root)
    }

    /// True when the expression mentions `t`.
    pub fn depends_on_time(&self) -> bool {
        fn go(e: &Expr) -> bool {
            match &e.kind {
                ExprKind::Var(Var::T) => true,
                ExprKind::Num(_) | ExprKind::Var(_) | ExprKind::Pi | ExprKind::E => false,
                ExprKind::Neg(inner) => go(inner),
                ExprKind::Binary(_, l, r) => go(l) || go(r),
                ExprKind::Call(_, args) => args.iter().any(go),
            }
        }
        go(&self.root)
    }

    pub fn evaluate(&self, scope: EvalScope) -> Result<f64, ExprError> {
        self.eval_node(&self.root, scope)
    }

    fn domain(&self, e: &Expr, reason: &'static str) -> ExprError {
        let snippet = self
            .src
            .get(e.span.start..e.span.end)
            .unwrap_or_default()
            .to_string();
        ExprError::Domain {
            reason,
            span: e.span,
            snippet,
        }
    }

    fn eval_node(&self, e: &Expr, scope: EvalScope) -> Result<f64, ExprError> {
        let value = match &e.kind {
            ExprKind::Num(v) => *v,
            ExprKind::Var(Var::X) => scope.x,
            ExprKind::Var(Var::T) => scope.t,
            ExprKind::Pi => std::f64::consts::PI,
            ExprKind::E => std::f64::consts::E,
            ExprKind::Neg(inner) => -self.eval_node(inner, scope)?,
            ExprKind::Binary(op, l, r) => {
                let a = self.eval_node(l, scope)?;
                let b = self.eval_node(r, scope)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.domain(e, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => self.checked_pow(e, a, b)?,
                }
            }
            ExprKind::Call(func, args) => {
                let a = self.eval_node(&args[0], scope)?;
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Tanh => a.tanh(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(self.domain(e, "logarithm of a non-positive number"));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(self.domain(e, "square root of a negative number"));
                        }
                        a.sqrt()
                    }
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
                    Func::Min => a.min(self.eval_node(&args[1], scope)?),
                    Func::Max => a.max(self.eval_node(&args[1], scope)?),
                    Func::Pow => {
                        let b = self.eval_node(&args[1], scope)?;
                        self.checked_pow(e, a, b)?
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.domain(e, "non-finite result"))
        }
    }

    fn checked_pow(&self, e: &Expr, base: f64, exponent: f64) -> Result<f64, ExprError> {
        if base < 0.0 && exponent.fract() != 0.0 {
            return Err(self.domain(e, "fractional power of a negative number"));
        }
        if base == 0.0 && exponent < 0.0 {
            return Err(self.domain(e, "division by zero"));
        }
        Ok(base.powf(exponent))
    }
}

fn format_number(v: f64) -> String {
    // `{:?}` prints the shortest representation that round-trips.
    let s = format!("{v:?}");
    if v < 0.0 {
        format!("({s})")
    } else {
        s
    }
}

/// Fully parenthesised rendering; reparses to a structurally equal tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match &e.kind {
                ExprKind::Num(v) => write!(f, "{}", format_number(*v)),
                ExprKind::Var(Var::X) => write!(f, "x"),
                ExprKind::Var(Var::T) => write!(f, "t"),
                ExprKind::Pi => write!(f, "pi"),
                ExprKind::E => write!(f, "e"),
                ExprKind::Neg(inner) => {
                    write!(f, "(-")?;
                    go(inner, f)?;
                    write!(f, ")")
                }
                ExprKind::Binary(op, l, r) => {
                    let sym = match op {
                        BinOp::Add => "+",
                        BinOp::Sub => "-",
                        BinOp::Mul => "*",
                        BinOp::Div => "/",
                        BinOp::Pow => "^",
                    };
                    write!(f, "(")?;
                    go(l, f)?;
                    write!(f, " {sym} ")?;
                    go(r, f)?;
                    write!(f, ")")
                }
                ExprKind::Call(func, args) => {
                    write!(f, "{}(", func.name())?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        go(a, f)?;
                    }
                    write!(f, ")")
                }
            }
        }
        go(&self.root, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x: f64) -> f64 {
        parse_expression(src)
            .unwrap()
            .evaluate(EvalScope::new(x, 0.0))
            .unwrap()
    }

    #[test]
    fn parses_and_evaluates_examples() {
        let e = parse_expression("sin(pi*x)+2").unwrap();
        assert_eq!(e.depth(), 3);
        assert!((e.evaluate(EvalScope::new(0.5, 0.0)).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(eval("x^2", 3.0), 9.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("2+3*4", 0.0), 14.0);
        assert_eq!(eval("2^3^2", 0.0), 512.0);
        assert_eq!(eval("-x^2", 3.0), -9.0);
        assert_eq!(eval("2^-1", 0.0), 0.5);
        assert_eq!(eval("8/4/2", 0.0), 1.0);
        assert_eq!(eval("1-2-3", 0.0), -4.0);
        assert_eq!(eval("--2", 0.0), 2.0);
        assert_eq!(eval("1.5e2 + .5", 0.0), 150.5);
        assert_eq!(eval("max(1, min(x, 4))", 7.0), 4.0);
        assert_eq!(eval("pow(2, 10)", 0.0), 1024.0);
        assert_eq!(eval("sign(-3) + abs(-2)", 0.0), 1.0);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse_expression("2*+") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_expression("(1+2") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse_expression("1 2") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_expression(""),
            Err(ExprError::Syntax { offset: 0, .. })
        ));
        assert!(matches!(
            parse_expression("1 # 2"),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn identifiers_and_arity_checked_at_parse_time() {
        match parse_expression("foo(x)") {
            Err(ExprError::UnknownIdentifier { name, span }) => {
                assert_eq!(name, "foo");
                assert_eq!(span, Span { start: 0, end: 3 });
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_expression("y + 1"),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_expression("max(1)"),
            Err(ExprError::ArityMismatch {
                expected: 2,
                found: 1,
                ..
            })
        ));
        assert!(matches!(
            parse_expression("sin(1, 2)"),
            Err(ExprError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn domain_errors_carry_the_subexpression() {
        let e = parse_expression("1 + log(x)").unwrap();
        match e.evaluate(EvalScope::new(0.0, 0.0)) {
            Err(ExprError::Domain { span, snippet, .. }) => {
                assert_eq!(snippet, "log(x)");
                assert_eq!(span, Span { start: 4, end: 10 });
            }
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_expression("sqrt(x - 2)").unwrap();
        assert!(e.evaluate(EvalScope::new(1.0, 0.0)).is_err());
        let e = parse_expression("1/(x-1)").unwrap();
        assert!(e.evaluate(EvalScope::new(1.0, 0.0)).is_err());
        let e = parse_expression("(-2)^0.5").unwrap();
        assert!(e.evaluate(EvalScope::default()).is_err());
    }

    #[test]
    fn time_dependence_detected() {
        assert!(parse_expression("sin(t)*x").unwrap().depends_on_time());
        assert!(!parse_expression("sin(x)").unwrap().depends_on_time());
    }

    #[test]
    fn constant_expression_round_trips() {
        let c = Expression::constant(-2.5);
        assert_eq!(c.evaluate(EvalScope::default()).unwrap(), -2.5);
        let again = parse_expression(&c.to_string()).unwrap();
        assert_eq!(again.evaluate(EvalScope::default()).unwrap(), -2.5);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn arb_source() -> impl Strategy<Value = String> {
            let leaf = prop_oneof![
                (0.0f64..100.0).prop_map(|v| format!("{v}")),
                Just("x".to_string()),
                Just("t".to_string()),
                Just("pi".to_string()),
                Just("e".to_string()),
            ];
            leaf.prop_recursive(5, 48, 3, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "^"]))
                        .prop_map(|(a, b, op)| format!("{a} {op} {b}")),
                    inner.clone().prop_map(|a| format!("-{a}")),
                    inner.clone().prop_map(|a| format!("({a})")),
                    inner.clone().prop_map(|a| format!("sin({a})")),
                    (inner.clone(), inner).prop_map(|(a, b)| format!("max({a}, {b})")),
                ]
            })
        }

        proptest! {
            #[test]
            fn display_reparses_to_equal_tree(src in arb_source()) {
                let e = parse_expression(&src).unwrap();
                let again = parse_expression(&e.to_string()).unwrap();
                prop_assert_eq!(&e, &again);
            }

            #[test]
            fn evaluation_is_pure(src in arb_source(), x in -3.0f64..3.0, t in 0.0f64..2.0) {
                let e = parse_expression(&src).unwrap();
                let a = e.evaluate(EvalScope::new(x, t));
                let b = e.evaluate(EvalScope::new(x, t));
                match (a, b) {
                    (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                    (Err(a), Err(b)) => prop_assert_eq!(a, b),
                    _ => prop_assert!(false, "evaluation not deterministic"),
                }
            }
        }
    }
}
