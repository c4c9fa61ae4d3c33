//! Scalar coefficient expressions in one variable `t`.
//!
//! Used for the coefficients `a(t)`, `b(t)` and histories `psi(t)` given in
//! configuration files. Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = factor { ("*" | "/") factor } ;
//! factor  = "-" factor | power ;
//! power   = atom [ "^" factor ] ;          (* right-associative *)
//! atom    = number | "t" | func "(" expr ")" | "(" expr ")" ;
//! func    = "exp" | "log" | "sin" | "cos" | "sqrt" | "abs" ;
//! number  = digits [ "." digits ] [ ("e"|"E") ["+"|"-"] digits ] ;
//! ```
//!
//! There is no implicit multiplication: `2t` is a syntax error. The exponent
//! of `^` must be a constant (no `t`). `format` produces a canonical fully
//! parenthesized rendering, e.g. `(-1.5)`, and `parse(format(e))` returns a
//! structurally identical tree; unary minus applied directly to a number
//! literal is folded into a negative literal at parse time to keep that
//! round-trip exact.

use std::fmt;
use thiserror::Error;

/// Half-open byte range of a subexpression in its source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{offset}: {message}")]
pub struct SyntaxError {
    /// 0-based character offset of the offending token.
    pub offset: usize,
    /// What was found and the set of tokens that would have been accepted.
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NonFiniteResult,
}

impl fmt::Display for EvalErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvalErrorKind::DivisionByZero => "division by zero",
            EvalErrorKind::LogOfNonPositive => "log of a non-positive value",
            EvalErrorKind::SqrtOfNegative => "square root of a negative value",
            EvalErrorKind::NonFiniteResult => "result is not finite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{}..{}: {kind}", span.start, span.end)]
pub struct EvalError {
    pub kind: EvalErrorKind,
    /// Source span of the offending subexpression.
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub enum ExprNode {
    Lit(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// A parsed expression; every node remembers its source span for error
/// reporting. Equality is structural and ignores spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub node: ExprNode,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.node, &other.node) {
            (ExprNode::Lit(a), ExprNode::Lit(b)) => a == b,
            (ExprNode::Var, ExprNode::Var) => true,
            (ExprNode::Neg(a), ExprNode::Neg(b)) => a == b,
            (ExprNode::Bin(o1, a1, b1), ExprNode::Bin(o2, a2, b2)) => {
                o1 == o2 && a1 == a2 && b1 == b2
            }
            (ExprNode::Call(f1, a1), ExprNode::Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

const NO_SPAN: Span = Span { start: 0, end: 0 };

impl Expr {
    pub fn lit(v: f64) -> Expr {
        Expr { node: ExprNode::Lit(v), span: NO_SPAN }
    }

    pub fn var() -> Expr {
        Expr { node: ExprNode::Var, span: NO_SPAN }
    }

    /// Negation; folds a literal operand into a negative literal so the
    /// canonical form has a single representation of `-1.5`.
    pub fn neg(e: Expr) -> Expr {
        match e.node {
            ExprNode::Lit(v) => Expr { node: ExprNode::Lit(-v), span: e.span },
            _ => {
                let span = e.span;
                Expr { node: ExprNode::Neg(Box::new(e)), span }
            }
        }
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        let span = Span { start: lhs.span.start, end: rhs.span.end };
        Expr { node: ExprNode::Bin(op, Box::new(lhs), Box::new(rhs)), span }
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        let span = arg.span;
        Expr { node: ExprNode::Call(f, Box::new(arg)), span }
    }

    /// True when the expression does not mention `t`.
    pub fn is_constant(&self) -> bool {
        match &self.node {
            ExprNode::Lit(_) => true,
            ExprNode::Var => false,
            ExprNode::Neg(e) => e.is_constant(),
            ExprNode::Bin(_, a, b) => a.is_constant() && b.is_constant(),
            ExprNode::Call(_, a) => a.is_constant(),
        }
    }

    /// IEEE double evaluation at `t`; domain errors carry the span of the
    /// offending subexpression.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let fail = |kind| EvalError { kind, span: self.span };
        let v = match &self.node {
            ExprNode::Lit(v) => *v,
            ExprNode::Var => t,
            ExprNode::Neg(e) => -e.eval(t)?,
            ExprNode::Bin(op, a, b) => {
                let x = a.eval(t)?;
                let y = b.eval(t)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(fail(EvalErrorKind::DivisionByZero));
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
            ExprNode::Call(f, a) => {
                let x = a.eval(t)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(fail(EvalErrorKind::LogOfNonPositive));
                        }
                        x.ln()
                    }
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(fail(EvalErrorKind::SqrtOfNegative));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fail(EvalErrorKind::NonFiniteResult))
        }
    }

    /// Canonical fully parenthesized rendering. `parse(format(e))` is
    /// structurally equal to `e`.
    pub fn format(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut String) {
        match &self.node {
            ExprNode::Lit(v) => {
                if v.is_sign_negative() {
                    out.push_str(&format!("(-{:?})", -v));
                } else {
                    out.push_str(&format!("{v:?}"));
                }
            }
            ExprNode::Var => out.push('t'),
            ExprNode::Neg(e) => {
                out.push_str("(-");
                e.write(out);
                out.push(')');
            }
            ExprNode::Bin(op, a, b) => {
                out.push('(');
                a.write(out);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                b.write(out);
                out.push(')');
            }
            ExprNode::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write(out);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format())
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
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v:?}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Span)>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            if self.pos >= self.src.len() {
                out.push((Tok::Eof, Span { start, end: start }));
                return Ok(out);
            }
            let c = self.src[self.pos];
            let tok = match c {
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'^' => Tok::Caret,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b'0'..=b'9' => {
                    let v = self.lex_number()?;
                    out.push((Tok::Num(v), Span { start, end: self.pos }));
                    continue;
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    while self.pos < self.src.len()
                        && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    out.push((Tok::Ident(name.to_string()), Span { start, end: self.pos }));
                    continue;
                }
                other => {
                    return Err(SyntaxError {
                        offset: start,
                        message: format!(
                            "unexpected character '{}'; expected one of: number, 't', function name, '(', ')', '+', '-', '*', '/', '^'",
                            other as char
                        ),
                    });
                }
            };
            self.pos += 1;
            out.push((tok, Span { start, end: self.pos }));
        }
    }

    fn lex_number(&mut self) -> Result<f64, SyntaxError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            if self.pos >= self.src.len() || !self.src[self.pos].is_ascii_digit() {
                return Err(SyntaxError {
                    offset: self.pos,
                    message: "expected digits after decimal point".into(),
                });
            }
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let mut p = self.pos + 1;
            if p < self.src.len() && (self.src[p] == b'+' || self.src[p] == b'-') {
                p += 1;
            }
            // only consume the exponent if digits follow; otherwise it is an identifier
            if p < self.src.len() && self.src[p].is_ascii_digit() {
                self.pos = p;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map_err(|_| SyntaxError {
            offset: start,
            message: format!("malformed number '{text}'"),
        })
    }
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, Span) {
        &self.toks[self.idx]
    }

    fn advance(&mut self) -> (Tok, Span) {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> SyntaxError {
        let (tok, span) = self.peek();
        SyntaxError {
            offset: span.start,
            message: format!("found {}; expected one of: {expected}", tok.describe()),
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().0 {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().0 {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.factor()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        if matches!(self.peek().0, Tok::Minus) {
            let (_, span) = self.advance();
            let inner = self.factor()?;
            let end = inner.span.end;
            let mut e = Expr::neg(inner);
            e.span = Span { start: span.start, end };
            return Ok(e);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.atom()?;
        if matches!(self.peek().0, Tok::Caret) {
            self.advance();
            let expo_offset = self.peek().1.start;
            let expo = self.factor()?;
            if !expo.is_constant() {
                return Err(SyntaxError {
                    offset: expo_offset,
                    message: "exponent of '^' must be a constant (must not mention 't')".into(),
                });
            }
            return Ok(Expr::bin(BinOp::Pow, base, expo));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        const EXPECTED: &str = "number, 't', function name, '(', '-'";
        match self.peek().0.clone() {
            Tok::Num(v) => {
                let (_, span) = self.advance();
                Ok(Expr { node: ExprNode::Lit(v), span })
            }
            Tok::Ident(name) => {
                let (_, span) = self.advance();
                if name == "t" {
                    return Ok(Expr { node: ExprNode::Var, span });
                }
                let f = Func::from_name(&name).ok_or(SyntaxError {
                    offset: span.start,
                    message: format!("unknown identifier '{name}'; expected one of: {EXPECTED}"),
                })?;
                if !matches!(self.peek().0, Tok::LParen) {
                    return Err(self.err("'('"));
                }
                self.advance();
                let arg = self.expr()?;
                if !matches!(self.peek().0, Tok::RParen) {
                    return Err(self.err("')'"));
                }
                let (_, rp) = self.advance();
                let mut e = Expr::call(f, arg);
                e.span = Span { start: span.start, end: rp.end };
                Ok(e)
            }
            Tok::LParen => {
                let (_, lp) = self.advance();
                let mut inner = self.expr()?;
                if !matches!(self.peek().0, Tok::RParen) {
                    return Err(self.err("')'"));
                }
                let (_, rp) = self.advance();
                inner.span = Span { start: lp.start, end: rp.end };
                Ok(inner)
            }
            _ => Err(self.err(EXPECTED)),
        }
    }
}

/// Parse an expression in the variable `t`.
pub fn parse(text: &str) -> Result<Expr, SyntaxError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, idx: 0 };
    let e = p.expr()?;
    if !matches!(p.peek().0, Tok::Eof) {
        return Err(p.err("'+', '-', '*', '/', '^', ')', end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_negative_fraction() {
        let e = parse("-3/2").unwrap();
        assert_eq!(e.eval(0.0).unwrap(), -1.5);
        // unary minus on a literal folds, so this is (-3)/2
        assert_eq!(e, Expr::bin(BinOp::Div, Expr::lit(-3.0), Expr::lit(2.0)));
    }

    #[test]
    fn evaluates_spec_examples() {
        assert_eq!(parse("2*exp(-t)+1").unwrap().eval(0.0).unwrap(), 3.0);
        assert_eq!(parse("t*t - 1").unwrap().eval(2.0).unwrap(), 3.0);
        assert_eq!(parse("sqrt(t^2+1)").unwrap().eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn precedence_and_associativity() {
        // ^ binds tighter than unary minus
        assert_eq!(parse("-2^2").unwrap().eval(0.0).unwrap(), -4.0);
        // right-associative: 2^(3^2)
        assert_eq!(parse("2^3^2").unwrap().eval(0.0).unwrap(), 512.0);
        assert_eq!(parse("1+2*3").unwrap().eval(0.0).unwrap(), 7.0);
        assert_eq!(parse("6/3/2").unwrap().eval(0.0).unwrap(), 1.0);
        assert_eq!(parse("1-2-3").unwrap().eval(0.0).unwrap(), -4.0);
        // exponent position admits a sign
        assert_eq!(parse("2^-1").unwrap().eval(0.0).unwrap(), 0.5);
    }

    #[test]
    fn whitespace_is_insignificant() {
        let a = parse("1+2*t").unwrap();
        let b = parse("  1 +\t2 * t ").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dangling_caret_errors_at_offset_2() {
        let err = parse("t^").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn implicit_multiplication_is_rejected() {
        let err = parse("2t").unwrap_err();
        assert_eq!(err.offset, 1);
    }

    #[test]
    fn unknown_identifier_is_rejected() {
        let err = parse("tan(t)").unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(err.message.contains("tan"));
    }

    #[test]
    fn unbalanced_paren_is_rejected() {
        let err = parse("(1+2").unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn variable_exponent_is_rejected() {
        let err = parse("2^t").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn division_by_zero_reports_span() {
        let err = parse("1/t").unwrap().eval(0.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        assert_eq!(err.span, Span { start: 0, end: 3 });
    }

    #[test]
    fn domain_errors_carry_offending_span() {
        let e = parse("1 + log(t)").unwrap();
        let err = e.eval(-1.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::LogOfNonPositive);
        assert_eq!(err.span, Span { start: 4, end: 10 });
        let err = parse("sqrt(-1)").unwrap().eval(0.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::SqrtOfNegative);
        let err = parse("exp(1000)^9").unwrap().eval(0.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::NonFiniteResult);
    }

    #[test]
    fn negative_literal_formats_parenthesized() {
        assert_eq!(Expr::lit(-1.5).format(), "(-1.5)");
        assert_eq!(parse("(-1.5)").unwrap(), Expr::lit(-1.5));
    }

    #[test]
    fn format_round_trips_spec_examples() {
        for src in ["2*exp(-t)+1", "2^3^2", "-t^2 - abs(t)/3", "sqrt(t^2+1)"] {
            let e = parse(src).unwrap();
            let again = parse(&e.format()).unwrap();
            assert_eq!(e, again, "round trip failed for {src}: {}", e.format());
        }
    }

    #[test]
    fn syntax_error_display_starts_with_offset() {
        let err = parse("t^").unwrap_err();
        assert!(err.to_string().starts_with("2: "));
    }

    /// Canonical ASTs of bounded depth. `^` exponents are literal constants
    /// and negation is never applied directly to a literal (the parser folds
    /// that case), so every generated tree is reachable from `parse`.
    fn arb_expr(depth: u32) -> BoxedStrategy<Expr> {
        let lit = prop_oneof![
            any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Expr::lit),
            (-100i32..100).prop_map(|k| Expr::lit(k as f64)),
        ];
        let leaf = prop_oneof![lit.clone(), Just(Expr::var())];
        leaf.prop_recursive(depth, 64, 2, move |inner| {
            let func = prop_oneof![
                Just(Func::Exp),
                Just(Func::Log),
                Just(Func::Sin),
                Just(Func::Cos),
                Just(Func::Sqrt),
                Just(Func::Abs)
            ];
            let op = prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div)
            ];
            prop_oneof![
                (inner.clone())
                    .prop_filter("no literal under neg", |e| !matches!(e.node, ExprNode::Lit(_)))
                    .prop_map(Expr::neg),
                (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::bin(o, a, b)),
                (inner.clone(), -3i32..4).prop_map(|(b, k)| {
                    Expr::bin(BinOp::Pow, b, Expr::lit(k as f64))
                }),
                (func, inner).prop_map(|(f, a)| Expr::call(f, a)),
            ]
            .boxed()
        })
        .boxed()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip_structural_equality(e in arb_expr(6)) {
            let printed = e.format();
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e, "printed: {}", printed);
        }

        #[test]
        fn eval_matches_reference_bit_for_bit(e in arb_expr(6), t in -10.0f64..10.0) {
            fn reference(e: &Expr, t: f64) -> Option<f64> {
                let v = match &e.node {
                    ExprNode::Lit(v) => *v,
                    ExprNode::Var => t,
                    ExprNode::Neg(a) => -reference(a, t)?,
                    ExprNode::Bin(op, a, b) => {
                        let x = reference(a, t)?;
                        let y = reference(b, t)?;
                        match op {
                            BinOp::Add => x + y,
                            BinOp::Sub => x - y,
                            BinOp::Mul => x * y,
                            BinOp::Div => { if y == 0.0 { return None; } x / y }
                            BinOp::Pow => x.powf(y),
                        }
                    }
                    ExprNode::Call(f, a) => {
                        let x = reference(a, t)?;
                        match f {
                            Func::Exp => x.exp(),
                            Func::Log => { if x <= 0.0 { return None; } x.ln() }
                            Func::Sin => x.sin(),
                            Func::Cos => x.cos(),
                            Func::Sqrt => { if x < 0.0 { return None; } x.sqrt() }
                            Func::Abs => x.abs(),
                        }
                    }
                };
                v.is_finite().then_some(v)
            }
            match (e.eval(t), reference(&e, t)) {
                (Ok(a), Some(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                (Err(_), None) => {}
                (got, want) => prop_assert!(false, "mismatch: {:?} vs {:?}", got, want),
            }
        }
    }
}
