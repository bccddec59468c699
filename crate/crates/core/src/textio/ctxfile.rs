//! `.ctx` dependency-context files.
//!
//! One statement per line, `#` starts a comment:
//!
//! ```text
//! independent p1 p2 p3
//! param m
//! dependent E
//! representation dE/dp1 = p1/E
//! constraint E^2 - p1^2 - p2^2 - p3^2 - m^2 = 0 solves E
//! opaque f(p1,p2,p3,E)
//! commutator [p1,p2] = k12
//! ```
//!
//! Declarations are read first so statements may appear in any order.
//! Identifiers on the right of a `commutator` statement that are not declared
//! elsewhere become central commutator symbols.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::expr::RESERVED;
use super::lexer::{lex, Tok, Token};
use super::{parse_expr_at, print_text, ParseError, ParseErrorKind, SourceSpan};
use crate::depctx::{Constraint, ContextParts, DependencyContext, Diagnostic, Origin};
use crate::symexpr::{OpaqueSig, Symbol, SymbolKind, SymbolTable};

type Name = (String, SourceSpan);

struct ExprText {
    start: usize,
    end: usize,
}

enum Stmt {
    Names(SymbolKind, Vec<Name>),
    Representation { dep: Name, indep: Name, rhs: ExprText, span: SourceSpan },
    Constraint { lhs: ExprText, rhs: ExprText, solves: Name, span: SourceSpan },
    Opaque { name: Name, params: Vec<Name>, span: SourceSpan },
    Commutator { a: Name, b: Name, rhs: ExprText, span: SourceSpan },
}

struct Line {
    toks: Vec<Token>,
    pos: usize,
}

impl Line {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, wanted: &str) -> ParseError {
        let t = self.peek();
        ParseError::new(ParseErrorKind::Syntax, t.span, format!("expected {wanted}, found {}", t.tok.describe()))
    }

    fn expect(&mut self, tok: Tok) -> Result<SourceSpan, ParseError> {
        if self.peek().tok == tok {
            Ok(self.bump().span)
        } else {
            Err(self.err(&tok.describe()))
        }
    }

    fn ident(&mut self) -> Result<Name, ParseError> {
        match self.peek().tok.clone() {
            Tok::Ident(s) => Ok((s, self.bump().span)),
            _ => Err(self.err("an identifier")),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        if self.peek().tok == Tok::End {
            Ok(())
        } else {
            Err(self.err("end of line"))
        }
    }

    /// Text from the current token up to (not including) token `until`.
    fn text_until(&self, until: usize) -> Result<ExprText, ParseError> {
        if until <= self.pos {
            return Err(self.err("an expression"));
        }
        Ok(ExprText { start: self.toks[self.pos].span.start, end: self.toks[until - 1].span.end })
    }

    fn find(&self, tok: &Tok) -> Option<usize> {
        (self.pos..self.toks.len()).find(|&k| &self.toks[k].tok == tok)
    }

    fn rfind_ident(&self, name: &str) -> Option<usize> {
        (self.pos..self.toks.len()).rev().find(|&k| matches!(&self.toks[k].tok, Tok::Ident(s) if s == name))
    }

    fn rest(&self) -> Result<ExprText, ParseError> {
        self.text_until(self.toks.len() - 1)
    }

    fn whole_span(&self) -> SourceSpan {
        self.toks[0].span.join(self.toks[self.toks.len() - 1].span)
    }
}

fn split_d(name: &Name) -> Result<Name, ParseError> {
    let (s, sp) = name;
    match s.strip_prefix('d') {
        Some(rest) if !rest.is_empty() => Ok((rest.to_string(), SourceSpan::new(sp.start + 1, sp.end))),
        _ => Err(ParseError::new(
            ParseErrorKind::Syntax,
            *sp,
            format!("expected `d<variable>`, found `{s}`"),
        )),
    }
}

fn parse_line(line: &mut Line) -> Result<Option<Stmt>, ParseError> {
    if line.peek().tok == Tok::End {
        return Ok(None);
    }
    let (kw, kw_span) = line.ident()?;
    let span = line.whole_span();
    let stmt = match kw.as_str() {
        "independent" | "param" | "dependent" => {
            let kind = match kw.as_str() {
                "independent" => SymbolKind::Independent,
                "param" => SymbolKind::Parameter,
                _ => SymbolKind::Dependent,
            };
            let mut names = Vec::new();
            while line.peek().tok != Tok::End {
                names.push(line.ident()?);
                if line.peek().tok == Tok::Comma {
                    line.bump();
                }
            }
            if names.is_empty() {
                return Err(line.err("at least one identifier"));
            }
            Stmt::Names(kind, names)
        }
        "representation" => {
            let dep = split_d(&line.ident()?)?;
            line.expect(Tok::Slash)?;
            let indep = split_d(&line.ident()?)?;
            line.expect(Tok::Eq)?;
            Stmt::Representation { dep, indep, rhs: line.rest()?, span }
        }
        "constraint" => {
            let solves_at = line
                .rfind_ident("solves")
                .ok_or_else(|| ParseError::new(ParseErrorKind::Syntax, span, "constraint needs `solves <dependent>`"))?;
            let eq_at = line
                .find(&Tok::Eq)
                .filter(|k| *k < solves_at)
                .ok_or_else(|| ParseError::new(ParseErrorKind::Syntax, span, "constraint needs `= 0`"))?;
            let lhs = line.text_until(eq_at)?;
            line.pos = eq_at + 1;
            let rhs = line.text_until(solves_at)?;
            line.pos = solves_at + 1;
            let solves = line.ident()?;
            line.end()?;
            Stmt::Constraint { lhs, rhs, solves, span }
        }
        "opaque" => {
            let name = line.ident()?;
            line.expect(Tok::LParen)?;
            let mut params = Vec::new();
            if line.peek().tok != Tok::RParen {
                loop {
                    params.push(line.ident()?);
                    if line.peek().tok == Tok::Comma {
                        line.bump();
                    } else {
                        break;
                    }
                }
            }
            line.expect(Tok::RParen)?;
            line.end()?;
            Stmt::Opaque { name, params, span }
        }
        "commutator" => {
            line.expect(Tok::LBrack)?;
            let a = line.ident()?;
            line.expect(Tok::Comma)?;
            let b = line.ident()?;
            line.expect(Tok::RBrack)?;
            line.expect(Tok::Eq)?;
            Stmt::Commutator { a, b, rhs: line.rest()?, span }
        }
        _ => {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                kw_span,
                format!("unknown statement `{kw}`"),
            ))
        }
    };
    Ok(Some(stmt))
}

fn statements(src: &str) -> Result<Vec<Stmt>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for raw in src.split_inclusive('\n') {
        let body = raw.split('#').next().unwrap_or("");
        let body = body.trim_end_matches(['\n', '\r']);
        let toks = lex(body, offset)?;
        let mut line = Line { toks, pos: 0 };
        if let Some(stmt) = parse_line(&mut line)? {
            out.push(stmt);
        }
        offset += raw.len();
    }
    Ok(out)
}

/// Union-find over commutator pairs; each connected component gets its own
/// nonzero class, numbered in order of first appearance.
fn classes(pairs: &[(String, String)]) -> BTreeMap<String, u32> {
    let mut parent: BTreeMap<String, String> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
        let p = parent.get(x).cloned().unwrap_or_else(|| x.to_string());
        if p == x {
            return p;
        }
        let root = find(parent, &p);
        parent.insert(x.to_string(), root.clone());
        root
    }
    let mut order = Vec::new();
    for (a, b) in pairs {
        for n in [a, b] {
            if !parent.contains_key(n) {
                parent.insert(n.clone(), n.clone());
                order.push(n.clone());
            }
        }
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent.insert(rb, ra);
        }
    }
    let mut ids: BTreeMap<String, u32> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for n in order {
        let root = find(&mut parent, &n);
        let next = ids.len() as u32 + 1;
        let id = *ids.entry(root).or_insert(next);
        out.insert(n, id);
    }
    out
}

/// Parses a `.ctx` file. Syntax and name-resolution problems are errors;
/// semantic problems are recorded and reported by `validate`.
pub fn parse_context(src: &str) -> Result<DependencyContext, ParseError> {
    let stmts = statements(src)?;
    let mut issues = Vec::new();
    let issue = |issues: &mut Vec<Diagnostic>, span: SourceSpan, msg: String| {
        issues.push(Diagnostic::error(msg, Some(span)));
    };

    // pass 1: names and kinds
    let mut kinds: BTreeMap<String, (SymbolKind, SourceSpan)> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut declare = |issues: &mut Vec<Diagnostic>, name: &Name, kind: SymbolKind| {
        // `__` names belong to the engine
        if RESERVED.contains(&name.0.as_str()) || name.0.starts_with("__") {
            issue(issues, name.1, format!("`{}` is reserved", name.0));
            return;
        }
        if let Some((prev, _)) = kinds.get(&name.0) {
            issue(
                issues,
                name.1,
                format!("duplicate declaration of `{}` (already {})", name.0, prev.as_str()),
            );
            return;
        }
        kinds.insert(name.0.clone(), (kind, name.1));
        order.push(name.0.clone());
    };
    for s in &stmts {
        match s {
            Stmt::Names(kind, names) => names.iter().for_each(|n| declare(&mut issues, n, *kind)),
            Stmt::Opaque { name, .. } => declare(&mut issues, name, SymbolKind::Opaque),
            _ => {}
        }
    }

    let mut pairs = Vec::new();
    for s in &stmts {
        if let Stmt::Commutator { a, b, span, .. } = s {
            for n in [a, b] {
                match kinds.get(&n.0) {
                    None => {
                        return Err(ParseError::new(
                            ParseErrorKind::UnknownIdentifier,
                            n.1,
                            format!("unknown identifier `{}`", n.0),
                        ))
                    }
                    Some((SymbolKind::Opaque, _)) => {
                        return Err(ParseError::new(
                            ParseErrorKind::Invalid,
                            n.1,
                            format!("`{}` is a function, not a symbol", n.0),
                        ))
                    }
                    Some(_) => {}
                }
            }
            if a.0 == b.0 {
                issue(&mut issues, *span, format!("commutator of `{}` with itself", a.0));
                continue;
            }
            pairs.push((a.0.clone(), b.0.clone()));
        }
    }
    let class_of = classes(&pairs);

    let mut table = SymbolTable::new();
    let (mut independents, mut parameters, mut dependents) = (Vec::new(), Vec::new(), Vec::new());
    for name in &order {
        let (kind, _) = kinds[name];
        if kind == SymbolKind::Opaque {
            continue;
        }
        let sym = Symbol::with_class(name, kind, class_of.get(name).copied().unwrap_or(0));
        table.declare(sym.clone()).expect("names deduplicated above");
        match kind {
            SymbolKind::Independent => independents.push(sym),
            SymbolKind::Parameter => parameters.push(sym),
            SymbolKind::Dependent => dependents.push(sym),
            _ => {}
        }
    }

    let mut opaques = Vec::new();
    for s in &stmts {
        if let Stmt::Opaque { name, params, span } = s {
            if kinds.get(&name.0).map(|(k, sp)| (*k, *sp)) != Some((SymbolKind::Opaque, name.1)) {
                // a duplicate; already reported
                continue;
            }
            let mut syms = Vec::new();
            for p in params {
                let sym = table.get(&p.0).cloned().ok_or_else(|| {
                    ParseError::new(ParseErrorKind::UnknownIdentifier, p.1, format!("unknown identifier `{}`", p.0))
                })?;
                if syms.contains(&sym) {
                    issue(&mut issues, p.1, format!("repeated argument `{}` of `{}`", p.0, name.0));
                }
                syms.push(sym);
            }
            if syms.is_empty() {
                issue(&mut issues, *span, format!("opaque function `{}` has no arguments", name.0));
            }
            let sig = OpaqueSig::new(&name.0, syms);
            table.declare_opaque(sig.clone()).expect("opaque names deduplicated above");
            opaques.push(sig);
        }
    }

    // pass 2: expressions; commutator values first, they may introduce symbols
    let text = |t: &ExprText| &src[t.start..t.end];
    let mut commutators = Vec::new();
    let mut commutator_symbols: Vec<Symbol> = Vec::new();
    for s in &stmts {
        if let Stmt::Commutator { a, b, rhs, span } = s {
            let (value, new) = parse_expr_at(text(rhs), rhs.start, &table, Some(SymbolKind::Commutator))?;
            for sym in new {
                table.declare(sym.clone()).expect("fresh symbol");
                commutator_symbols.push(sym);
            }
            if a.0 == b.0 {
                continue;
            }
            let (sa, sb) = (table.get(&a.0).unwrap().clone(), table.get(&b.0).unwrap().clone());
            commutators.push((sa, sb, value, Some(*span)));
        }
    }

    let mut representations = Vec::new();
    let mut constraints = Vec::new();
    for s in &stmts {
        match s {
            Stmt::Representation { dep, indep, rhs, span } => {
                let (expr, _) = parse_expr_at(text(rhs), rhs.start, &table, None)?;
                let d = lookup(&table, dep)?;
                let v = lookup(&table, indep)?;
                if d.kind() != SymbolKind::Dependent {
                    issue(&mut issues, dep.1, format!("`{}` is not a dependent variable", dep.0));
                    continue;
                }
                if v.kind() != SymbolKind::Independent {
                    issue(&mut issues, indep.1, format!("`{}` is not an independent variable", indep.0));
                    continue;
                }
                representations.push((d, v, expr, Some(*span)));
            }
            Stmt::Constraint { lhs, rhs, solves, span } => {
                let (l, _) = parse_expr_at(text(lhs), lhs.start, &table, None)?;
                let (r, _) = parse_expr_at(text(rhs), rhs.start, &table, None)?;
                let u = lookup(&table, solves)?;
                if u.kind() != SymbolKind::Dependent {
                    issue(&mut issues, solves.1, format!("`{}` is not a dependent variable", solves.0));
                    continue;
                }
                constraints.push((Constraint { g: crate::symexpr::normalize(&(l - r)), solves: u }, Some(*span)));
            }
            _ => {}
        }
    }

    Ok(DependencyContext::assemble(ContextParts {
        table,
        independents,
        parameters,
        dependents,
        commutator_symbols,
        opaques,
        representations,
        constraints,
        commutators,
        issues,
    }))
}

fn lookup(table: &SymbolTable, name: &Name) -> Result<Symbol, ParseError> {
    table.get(&name.0).cloned().ok_or_else(|| {
        ParseError::new(ParseErrorKind::UnknownIdentifier, name.1, format!("unknown identifier `{}`", name.0))
    })
}

/// `.ctx` source for a context. Only declared representations are written;
/// derived ones are recomputed on parse.
pub fn print_context(ctx: &DependencyContext) -> String {
    let mut out = String::new();
    let names = |xs: &[Symbol]| xs.iter().map(|s| s.name()).collect::<Vec<_>>().join(" ");
    if !ctx.independents().is_empty() {
        let _ = writeln!(out, "independent {}", names(ctx.independents()));
    }
    if !ctx.parameters().is_empty() {
        let _ = writeln!(out, "param {}", names(ctx.parameters()));
    }
    for d in ctx.dependents() {
        let _ = writeln!(out, "dependent {d}");
    }
    for c in ctx.constraints() {
        let _ = writeln!(out, "constraint {} = 0 solves {}", print_text(&c.g), c.solves);
    }
    for r in ctx.representations().filter(|r| r.origin == Origin::Declared) {
        let _ = writeln!(out, "representation d{}/d{} = {}", r.dependent, r.independent, print_text(&r.expr));
    }
    for sig in ctx.opaques() {
        let params: Vec<&str> = sig.params.iter().map(|p| p.name()).collect();
        let _ = writeln!(out, "opaque {}({})", sig.name, params.join(","));
    }
    for (a, b, v) in ctx.commutators().entries() {
        let _ = writeln!(out, "commutator [{a},{b}] = {}", print_text(v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MASS_SHELL: &str = "# mass shell\r\n\
        independent p1 p2 p3\r\n\
        param m\n\
        dependent E\n\
        constraint E^2 - p1^2 - p2^2 - p3^2 - m^2 = 0 solves E\n\
        representation dE/dp1 = p1/E\n\
        opaque f(p1,p2,p3,E)\n\
        commutator [p1,p2] = k12\n";

    #[test]
    fn parses_crlf_and_comments() {
        let ctx = parse_context(MASS_SHELL).unwrap();
        assert_eq!(ctx.independents().len(), 3);
        assert_eq!(ctx.dependents().len(), 1);
        assert_eq!(ctx.constraints().len(), 1);
        assert_eq!(ctx.symbol("k12").unwrap().kind(), SymbolKind::Commutator);
        assert_eq!(ctx.symbol("p1").unwrap().class(), ctx.symbol("p2").unwrap().class());
        assert_ne!(ctx.symbol("p1").unwrap().class(), 0);
        assert_eq!(ctx.symbol("p3").unwrap().class(), 0);
    }

    #[test]
    fn engine_names_are_reserved() {
        let ctx = parse_context("independent p1\nopaque __probe(p1)\n").unwrap();
        assert!(ctx.validate().iter().any(|d| d.message == "`__probe` is reserved"), "{:?}", ctx.validate());
    }

    #[test]
    fn error_spans_are_file_offsets() {
        let src = "independent p1\nrepresentation dE/dp1 = p1 +* 2\n";
        let err = parse_context(src).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!(&src[err.span.start..err.span.end], "*");
    }

    #[test]
    fn duplicate_dependent_is_a_semantic_issue() {
        let ctx = parse_context("independent p1\ndependent E\ndependent E\n").unwrap();
        assert!(ctx.issues().iter().any(|d| d.message.contains("duplicate")));
    }

    #[test]
    fn printed_context_reparses() {
        let ctx = parse_context(MASS_SHELL).unwrap();
        let again = parse_context(&print_context(&ctx)).unwrap();
        assert_eq!(print_context(&again), print_context(&ctx));
    }
}
