//! Precedence-climbing expression parser.
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' exponent)?
//! exponent:= ('-' | '+')* power          (right-associative)
//! primary := number | 'i' | '(' sum ')' | 'sqrt' '(' sum ')'
//!          | 'D' '[' fn (',' var)+ ']' | fn '(' ident,* ')' | ident
//! ```

use std::sync::Arc;

use num_rational::Rational64;
use num_traits::ToPrimitive;

use super::lexer::{Tok, Token};
use super::{ParseError, ParseErrorKind, SourceSpan};
use crate::scalar::Scalar;
use crate::symexpr::{normalize, Expr, OpaqueApp, OpaqueSig, PartialAtom, Symbol, SymbolKind, SymbolTable};

/// Names that cannot be declared as symbols.
pub const RESERVED: &[&str] = &["i", "sqrt", "D", "W"];

pub(crate) struct Cursor<'a> {
    pub toks: Vec<Token>,
    pub pos: usize,
    pub table: &'a SymbolTable,
    /// Kind given to unknown identifiers; `None` makes them errors.
    pub auto_declare: Option<SymbolKind>,
    pub declared: Vec<Symbol>,
}

impl<'a> Cursor<'a> {
    pub fn new(toks: Vec<Token>, table: &'a SymbolTable, auto_declare: Option<SymbolKind>) -> Self {
        Cursor { toks, pos: 0, table, auto_declare, declared: Vec::new() }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        let idx = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    pub fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    pub fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::new(
            ParseErrorKind::Syntax,
            self.span(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    pub fn expect(&mut self, tok: Tok) -> Result<SourceSpan, ParseError> {
        if self.peek() == &tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    pub fn ident(&mut self) -> Result<(String, SourceSpan), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    pub fn expect_end(&self) -> Result<(), ParseError> {
        if self.peek() == &Tok::End {
            Ok(())
        } else {
            Err(self.unexpected("an operator or end of input"))
        }
    }

    pub fn resolve(&mut self, name: &str, span: SourceSpan) -> Result<Symbol, ParseError> {
        if let Some(s) = self.table.get(name) {
            return Ok(s.clone());
        }
        if let Some(s) = self.declared.iter().find(|s| s.name() == name) {
            return Ok(s.clone());
        }
        match self.auto_declare {
            Some(kind) if !RESERVED.contains(&name) => {
                let s = Symbol::new(name, kind);
                self.declared.push(s.clone());
                Ok(s)
            }
            _ => Err(ParseError::new(
                ParseErrorKind::UnknownIdentifier,
                span,
                format!("unknown identifier `{name}`"),
            )),
        }
    }

    pub fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.product()?];
        loop {
            if self.eat(&Tok::Plus) {
                terms.push(self.product()?);
            } else if self.eat(&Tok::Minus) {
                terms.push(-self.product()?);
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::sum(terms) })
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.unary()?];
        loop {
            if self.eat(&Tok::Star) {
                factors.push(self.unary()?);
            } else if self.eat(&Tok::Slash) {
                factors.push(self.unary()?.recip());
            } else {
                break;
            }
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::product(factors) })
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(-self.unary()?);
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        self.power()
    }

    pub fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat(&Tok::Caret) {
            return Ok(base);
        }
        let start = self.span();
        let exp = self.exponent()?;
        let span = start.join(self.prev_span());
        let r = rational_exponent(&exp).ok_or_else(|| {
            ParseError::new(ParseErrorKind::Syntax, span, "exponent must be a rational constant")
        })?;
        Ok(base.pow(r))
    }

    fn exponent(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(-self.exponent()?);
        }
        if self.eat(&Tok::Plus) {
            return self.exponent();
        }
        self.power()
    }

    pub fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::constant(Scalar::from_rational(n)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let span = self.bump().span;
                match name.as_str() {
                    "i" => Ok(Expr::imag()),
                    "sqrt" if self.peek() == &Tok::LParen => {
                        self.bump();
                        let e = self.sum()?;
                        self.expect(Tok::RParen)?;
                        Ok(e.sqrt())
                    }
                    "D" if self.peek() == &Tok::LBrack => self.partial(span),
                    _ => {
                        if let Some(sig) = self.table.opaque(&name).cloned() {
                            let app = self.application(&sig, span)?;
                            return Ok(Expr::from_node(crate::symexpr::Node::Apply(app)));
                        }
                        Ok(Expr::sym(&self.resolve(&name, span)?))
                    }
                }
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    /// `f` or `f(a, b, ..)` after the name has been consumed.
    fn application(&mut self, sig: &Arc<OpaqueSig>, name_span: SourceSpan) -> Result<OpaqueApp, ParseError> {
        if !self.eat(&Tok::LParen) {
            return Ok(OpaqueApp { sig: sig.clone(), args: sig.params.clone() });
        }
        let mut args = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let (a, sp) = self.ident()?;
                args.push(self.resolve(&a, sp)?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let close = self.expect(Tok::RParen)?;
        if args.len() != sig.arity() {
            return Err(ParseError::new(
                ParseErrorKind::Arity,
                name_span.join(close),
                format!("`{}` takes {} argument(s), got {}", sig.name, sig.arity(), args.len()),
            ));
        }
        Ok(OpaqueApp { sig: sig.clone(), args })
    }

    fn partial(&mut self, d_span: SourceSpan) -> Result<Expr, ParseError> {
        self.expect(Tok::LBrack)?;
        let (fname, fspan) = self.ident()?;
        let sig = self.table.opaque(&fname).cloned().ok_or_else(|| {
            ParseError::new(
                ParseErrorKind::UnknownIdentifier,
                fspan,
                format!("`{fname}` is not an opaque function"),
            )
        })?;
        let app = self.application(&sig, fspan)?;
        let mut orders = vec![0u32; sig.arity()];
        while self.eat(&Tok::Comma) {
            let (v, vspan) = self.ident()?;
            let slot = sig.slot_of(&v).ok_or_else(|| {
                ParseError::new(
                    ParseErrorKind::UnknownVariable,
                    vspan,
                    format!("`{fname}` has no argument slot `{v}`"),
                )
            })?;
            orders[slot] += 1;
        }
        let close = self.expect(Tok::RBrack)?;
        if orders.iter().all(|o| *o == 0) {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                d_span.join(close),
                "partial derivative needs at least one variable",
            ));
        }
        Ok(Expr::partial(PartialAtom { app, orders }))
    }
}

fn rational_exponent(e: &Expr) -> Option<Rational64> {
    let n = normalize(e);
    let c = n.as_constant()?;
    if !c.is_real() {
        return None;
    }
    Some(Rational64::new(c.re.numer().to_i64()?, c.re.denom().to_i64()?))
}

/// Parses an expression against `table`. Unknown identifiers are errors.
pub fn parse_expr(text: &str, table: &SymbolTable) -> Result<Expr, ParseError> {
    parse_expr_with(text, table, None).map(|(e, _)| e)
}

/// Parses an expression, declaring unknown identifiers with `auto_declare`
/// when given. Returns the expression and the newly declared symbols.
pub fn parse_expr_with(
    text: &str,
    table: &SymbolTable,
    auto_declare: Option<SymbolKind>,
) -> Result<(Expr, Vec<Symbol>), ParseError> {
    parse_expr_at(text, 0, table, auto_declare)
}

pub(crate) fn parse_expr_at(
    text: &str,
    base: usize,
    table: &SymbolTable,
    auto_declare: Option<SymbolKind>,
) -> Result<(Expr, Vec<Symbol>), ParseError> {
    let toks = super::lexer::lex(text, base)?;
    let mut c = Cursor::new(toks, table, auto_declare);
    let e = c.sum()?;
    c.expect_end()?;
    Ok((normalize(&e), c.declared))
}

/// Lenient parse: unknown identifiers become parameters.
pub fn parse_expr_lenient(text: &str, table: &SymbolTable) -> Result<(Expr, Vec<Symbol>), ParseError> {
    parse_expr_with(text, table, Some(SymbolKind::Parameter))
}
