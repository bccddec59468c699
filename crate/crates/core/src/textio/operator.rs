//! Operator literals.
//!
//! ```text
//! op     := term (('+' | '-') term)*
//! term   := '-'? factor (('*' | '/')? factor)*
//! factor := ('W' | 'D') '[' ident ']' ('^' integer)? | power
//! ```
//!
//! Juxtaposed factors compose, the leftmost acting last. Any other factor
//! is a coefficient and acts by multiplication.

use num_traits::ToPrimitive;

use super::expr::Cursor;
use super::lexer::{lex, Tok};
use super::{ParseError, ParseErrorKind, SourceSpan};
use crate::depctx::DependencyContext;
use crate::diffop::{DifferentialOperator, Generator, OperatorError};

pub fn parse_operator(text: &str, ctx: &DependencyContext) -> Result<DifferentialOperator, ParseError> {
    let toks = lex(text, 0)?;
    let mut c = Cursor::new(toks, ctx.table(), None);
    let mut acc = term(&mut c, ctx)?;
    loop {
        let neg = if c.eat(&Tok::Plus) {
            false
        } else if c.eat(&Tok::Minus) {
            true
        } else {
            break;
        };
        let t = term(&mut c, ctx)?;
        acc = acc.add(&if neg { t.neg() } else { t }).expect("same context");
    }
    c.expect_end()?;
    Ok(acc)
}

fn starts_factor(t: &Tok) -> bool {
    matches!(t, Tok::Num(_) | Tok::Ident(_) | Tok::LParen)
}

fn term(c: &mut Cursor<'_>, ctx: &DependencyContext) -> Result<DifferentialOperator, ParseError> {
    let start = c.span();
    let neg = c.eat(&Tok::Minus);
    let mut acc = factor(c, ctx)?;
    loop {
        let divide = if c.eat(&Tok::Star) {
            false
        } else if c.eat(&Tok::Slash) {
            true
        } else if starts_factor(c.peek()) {
            false
        } else {
            break;
        };
        let f = if divide {
            let s = c.span();
            if is_generator(c) {
                return Err(ParseError::new(ParseErrorKind::Syntax, s, "cannot divide by a derivative"));
            }
            let e = c.power()?;
            DifferentialOperator::multiplication(ctx, &e.recip())
        } else {
            factor(c, ctx)?
        };
        let span = start.join(c.prev_span());
        acc = acc.compose(&f).map_err(|e| invalid(span, e))?;
    }
    Ok(if neg { acc.neg() } else { acc })
}

fn invalid(span: SourceSpan, e: OperatorError) -> ParseError {
    ParseError::new(ParseErrorKind::Invalid, span, e.to_string())
}

fn is_generator(c: &Cursor<'_>) -> bool {
    matches!(c.peek(), Tok::Ident(s) if s == "W" || s == "D")
        && c.peek_at(1) == &Tok::LBrack
        && matches!(c.peek_at(2), Tok::Ident(_))
        && c.peek_at(3) == &Tok::RBrack
}

fn factor(c: &mut Cursor<'_>, ctx: &DependencyContext) -> Result<DifferentialOperator, ParseError> {
    if !is_generator(c) {
        let e = c.power()?;
        return Ok(DifferentialOperator::multiplication(ctx, &e));
    }
    let (tag, tag_span) = c.ident()?;
    c.expect(Tok::LBrack)?;
    let (var, var_span) = c.ident()?;
    let close = c.expect(Tok::RBrack)?;
    let known = ctx.is_independent(&var) || ctx.is_dependent(&var) || ctx.is_parameter(&var);
    let Some(sym) = ctx.symbol(&var).filter(|_| known) else {
        return Err(ParseError::new(
            ParseErrorKind::UnknownVariable,
            var_span,
            format!("derivative variable `{var}` not in context"),
        ));
    };
    let g = if tag == "W" { Generator::whole(sym) } else { Generator::plain(sym) };
    let gen = DifferentialOperator::generator(ctx, &g).map_err(|e| invalid(tag_span.join(close), e))?;
    if !c.eat(&Tok::Caret) {
        return Ok(gen);
    }
    let n = match c.peek().clone() {
        Tok::Num(n) if n.is_integer() && n.numer().to_u32().is_some_and(|k| (1..=16).contains(&k)) => {
            c.bump();
            n.numer().to_u32().unwrap()
        }
        _ => return Err(c.unexpected("a derivative order between 1 and 16")),
    };
    let mut acc = gen.clone();
    for _ in 1..n {
        acc = acc.compose(&gen).expect("same context");
    }
    Ok(acc)
}
