//! Plain and whole partial derivatives.
//!
//! The whole derivative in an independent `v` is
//! `∂_v e + Σ_u (∂_u e)·(∂u/∂v)`, with the chain-rule coefficient written to
//! the right of the plain partial. In a dependent it is the plain partial.
//! Repeated derivatives keep the coefficients as placeholders until the end,
//! so the `paper` ordering mode can symmetrize their products.

use std::fmt;

use itertools::Itertools;
use num_traits::One;
use serde::Serialize;
use thiserror::Error;

use crate::depctx::{DependencyContext, OrderingMode};
use crate::scalar::Scalar;
use crate::symexpr::poly::{canon_product, Base, Factor, Poly};
use crate::symexpr::{normal_order, normalize, Expr, Node, OrderError, PartialAtom, RepSlot, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivMode {
    Plain,
    Whole,
}

/// One derivative: `D[v]` (plain) or `W[v]` (whole).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    pub var: Symbol,
    pub mode: DerivMode,
}

impl Generator {
    pub fn plain(var: &Symbol) -> Self {
        Generator { var: var.clone(), mode: DerivMode::Plain }
    }

    pub fn whole(var: &Symbol) -> Self {
        Generator { var: var.clone(), mode: DerivMode::Whole }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.mode {
            DerivMode::Plain => 'D',
            DerivMode::Whole => 'W',
        };
        write!(f, "{tag}[{}]", self.var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivError {
    #[error("`{0}` is not a variable of the context")]
    NotInContext(String),
    #[error("whole derivative in parameter `{0}`")]
    WholeOfParameter(String),
    #[error("missing representation ({dependent},{independent})")]
    MissingRepresentation { dependent: String, independent: String },
    #[error(transparent)]
    Order(#[from] OrderError),
}

/// Partial of `e` in `v` with every other symbol held fixed.
pub fn plain_partial(e: &Expr, v: &Symbol) -> Expr {
    diff(&Poly::from_expr(e), v, None).to_expr()
}

pub(crate) fn diff(p: &Poly, v: &Symbol, ctx: Option<&DependencyContext>) -> Poly {
    let mut out = Poly::zero();
    for (m, c) in &p.terms {
        for k in 0..m.0.len() {
            let d = diff_factor(&m.0[k], v, ctx);
            if d.is_zero() {
                continue;
            }
            let left = canon_product(c.clone(), m.0[..k].to_vec());
            let right = canon_product(Scalar::one(), m.0[k + 1..].to_vec());
            out.add_assign(&left.mul(&d).mul(&right));
        }
    }
    out
}

fn diff_factor(f: &Factor, v: &Symbol, ctx: Option<&DependencyContext>) -> Poly {
    let db = diff_base(&f.base, v, ctx);
    if db.is_zero() {
        return db;
    }
    if f.exp.is_one() {
        return db;
    }
    Poly::factor(f.base.clone(), f.exp - 1)
        .scale(&Scalar::from_rational64(f.exp))
        .mul(&db)
}

fn bump(atom: &PartialAtom, slot: usize) -> Poly {
    let mut orders = atom.orders.clone();
    orders[slot] += 1;
    Poly::atom(Base::Partial(PartialAtom { app: atom.app.clone(), orders }))
}

fn diff_base(b: &Base, v: &Symbol, ctx: Option<&DependencyContext>) -> Poly {
    match b {
        Base::Sym(s) if s.name() == v.name() => Poly::one(),
        Base::Sym(_) => Poly::zero(),
        Base::Opaque(app) => {
            let atom = PartialAtom { app: app.clone(), orders: vec![0; app.args.len()] };
            diff_atom(&atom, v)
        }
        Base::Partial(atom) => diff_atom(atom, v),
        Base::Rep(r) => match ctx.and_then(|c| c.representation(r.dependent.name(), r.independent.name())) {
            Some(rep) => diff(&Poly::from_expr(&rep.expr), v, ctx),
            None => Poly::zero(),
        },
        Base::Compound(e) => {
            if e.as_constant().is_some() || !e.mentions(v.name()) && !e.has_rep() {
                return Poly::zero();
            }
            diff(&Poly::from_expr(e), v, ctx)
        }
    }
}

fn diff_atom(atom: &PartialAtom, v: &Symbol) -> Poly {
    let mut out = Poly::zero();
    for (slot, a) in atom.app.args.iter().enumerate() {
        if a.name() == v.name() {
            out.add_assign(&bump(atom, slot));
        }
    }
    out
}

/// Checks that `g` is a usable derivative in `ctx`; whole derivatives in a
/// dependent come back as plain ones.
pub fn resolve_generator(g: &Generator, ctx: &DependencyContext) -> Result<Generator, DerivError> {
    let name = g.var.name();
    let sym = ctx.symbol(name).ok_or_else(|| DerivError::NotInContext(name.to_string()))?;
    let known = ctx.is_independent(name) || ctx.is_dependent(name) || ctx.is_parameter(name);
    if !known {
        return Err(DerivError::NotInContext(name.to_string()));
    }
    match g.mode {
        DerivMode::Plain => Ok(Generator::plain(sym)),
        DerivMode::Whole if ctx.is_parameter(name) => Err(DerivError::WholeOfParameter(name.to_string())),
        DerivMode::Whole if ctx.is_dependent(name) => Ok(Generator::plain(sym)),
        DerivMode::Whole => Ok(Generator::whole(sym)),
    }
}

/// One whole step, chain-rule coefficients left as placeholders.
pub(crate) fn whole_step(p: &Poly, v: &Symbol, ctx: &DependencyContext) -> Result<Poly, DerivError> {
    if ctx.is_dependent(v.name()) {
        return Ok(diff(p, v, Some(ctx)));
    }
    if ctx.is_parameter(v.name()) {
        return Err(DerivError::WholeOfParameter(v.name().to_string()));
    }
    if !ctx.is_independent(v.name()) {
        return Err(DerivError::NotInContext(v.name().to_string()));
    }
    let mut out = diff(p, v, Some(ctx));
    for u in ctx.dependents() {
        let du = diff(p, u, Some(ctx));
        if du.is_zero() {
            continue;
        }
        let rep = ctx.representation(u.name(), v.name()).ok_or_else(|| DerivError::MissingRepresentation {
            dependent: u.name().to_string(),
            independent: v.name().to_string(),
        })?;
        let slot = RepSlot {
            dependent: u.clone(),
            independent: v.clone(),
            classes: rep.expr.classes().into_iter().collect(),
        };
        out.add_assign(&du.mul(&Poly::atom(Base::Rep(slot))));
    }
    Ok(out)
}

pub(crate) fn step(p: &Poly, g: &Generator, ctx: &DependencyContext) -> Result<Poly, DerivError> {
    match g.mode {
        DerivMode::Plain => Ok(diff(p, &g.var, Some(ctx))),
        DerivMode::Whole => whole_step(p, &g.var, ctx),
    }
}

/// Applies `word` (rightmost generator first) without expanding
/// placeholders.
pub(crate) fn apply_word(word: &[Generator], p: &Poly, ctx: &DependencyContext) -> Result<Poly, DerivError> {
    let mut acc = p.clone();
    for g in word.iter().rev() {
        if acc.is_zero() {
            break;
        }
        acc = step(&acc, g, ctx)?;
    }
    Ok(acc)
}

/// Averages every monomial over the orderings of its chain-rule
/// placeholders.
fn symmetrize(p: &Poly) -> Poly {
    let mut out = Poly::zero();
    for (m, c) in &p.terms {
        let slots: Vec<usize> = m.0.iter().positions(|f| matches!(f.base, Base::Rep(_))).collect();
        if slots.len() < 2 {
            out.add_assign(&canon_product(c.clone(), m.0.clone()));
            continue;
        }
        let reps: Vec<&Factor> = slots.iter().map(|&i| &m.0[i]).collect();
        let perms: Vec<Vec<&&Factor>> = reps.iter().permutations(reps.len()).collect();
        let weight = c * &Scalar::from_ratio(1, perms.len() as i64);
        for perm in perms {
            let mut fs = m.0.clone();
            for (slot, f) in slots.iter().zip(perm) {
                fs[*slot] = (**f).clone();
            }
            out.add_assign(&canon_product(weight.clone(), fs));
        }
    }
    out
}

/// Replaces placeholders by the context's representation expressions.
pub(crate) fn expand(e: &Expr, ctx: &DependencyContext) -> Result<Expr, DerivError> {
    Ok(match e.node() {
        Node::Rep(r) => ctx
            .representation(r.dependent.name(), r.independent.name())
            .map(|rep| rep.expr.clone())
            .ok_or_else(|| DerivError::MissingRepresentation {
                dependent: r.dependent.name().to_string(),
                independent: r.independent.name().to_string(),
            })?,
        Node::Sum(xs) => Expr::sum(xs.iter().map(|x| expand(x, ctx)).collect::<Result<_, _>>()?),
        Node::Product(xs) => Expr::product(xs.iter().map(|x| expand(x, ctx)).collect::<Result<_, _>>()?),
        Node::Pow(b, r) => expand(b, ctx)?.pow(*r),
        _ => e.clone(),
    })
}

/// Mode-dependent symmetrization, placeholder expansion and, when `order`
/// is set and the context has noncommuting symbols, normal ordering.
pub(crate) fn finish(p: &Poly, ctx: &DependencyContext, order: bool) -> Result<Expr, DerivError> {
    let p = if ctx.ordering() == OrderingMode::Paper { symmetrize(p) } else { p.clone() };
    let e = normalize(&expand(&p.to_expr(), ctx)?);
    if order && ctx.has_noncommuting() {
        return Ok(normal_order(&e, &ctx.ordering_table())?);
    }
    Ok(e)
}

/// Whole partial of `e` in the independent `v`.
pub fn whole_partial(e: &Expr, v: &Symbol, ctx: &DependencyContext) -> Result<Expr, DerivError> {
    if ctx.is_dependent(v.name()) {
        return Ok(whole_partial_wrt_dependent(e, v));
    }
    finish(&whole_step(&Poly::from_expr(e), v, ctx)?, ctx, false)
}

/// Whole partial in a dependent: the plain partial.
pub fn whole_partial_wrt_dependent(e: &Expr, u: &Symbol) -> Expr {
    plain_partial(e, u)
}

/// `W_v2 W_v1 e - W_v1 W_v2 e`, normal-ordered when the context has
/// noncommuting symbols.
pub fn mixed_difference(e: &Expr, v1: &Symbol, v2: &Symbol, ctx: &DependencyContext) -> Result<Expr, DerivError> {
    let p = Poly::from_expr(e);
    let g1 = resolve_generator(&Generator::whole(v1), ctx)?;
    let g2 = resolve_generator(&Generator::whole(v2), ctx)?;
    let a = apply_word(&[g2.clone(), g1.clone()], &p, ctx)?;
    let b = apply_word(&[g1, g2], &p, ctx)?;
    finish(&a.sub(&b), ctx, true)
}

/// Applies a word of generators to `e`; the result is finished as by
/// operator application.
pub fn apply_generators(word: &[Generator], e: &Expr, ctx: &DependencyContext) -> Result<Expr, DerivError> {
    let word: Vec<Generator> = word.iter().map(|g| resolve_generator(g, ctx)).collect::<Result<_, _>>()?;
    finish(&apply_word(&word, &Poly::from_expr(e), ctx)?, ctx, true)
}

/// A single derivative request.
#[derive(Clone, Debug)]
pub struct DerivativeRequest {
    pub target: Expr,
    pub variable: Symbol,
    pub mode: DerivMode,
    pub context: DependencyContext,
}

impl DerivativeRequest {
    pub fn run(&self) -> Result<Expr, DerivError> {
        match self.mode {
            DerivMode::Plain => Ok(plain_partial(&self.target, &self.variable)),
            DerivMode::Whole => {
                let name = self.variable.name();
                if !(self.context.is_independent(name) || self.context.is_dependent(name)) {
                    if self.context.is_parameter(name) {
                        return Err(DerivError::WholeOfParameter(name.to_string()));
                    }
                    return Err(DerivError::NotInContext(name.to_string()));
                }
                whole_partial(&self.target, &self.variable, &self.context)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::equals_canonical;
    use crate::textio::parse_expr;

    const SHELL: &str = "independent p1 p2 p3\nparam m\ndependent E\n\
        constraint E^2 - p1^2 - p2^2 - p3^2 - m^2 = 0 solves E\n\
        representation dE/dp1 = p1/E\nopaque f(p1,p2,p3,E)\n";

    fn shell() -> DependencyContext {
        DependencyContext::parse(SHELL).unwrap()
    }

    fn nc(mode: OrderingMode) -> DependencyContext {
        DependencyContext::parse(&format!("{SHELL}commutator [p1,p2] = k12\n")).unwrap().with_ordering(mode)
    }

    fn px(ctx: &DependencyContext, s: &str) -> Expr {
        parse_expr(s, ctx.table()).unwrap()
    }

    fn sym<'a>(ctx: &'a DependencyContext, s: &str) -> &'a Symbol {
        ctx.symbol(s).unwrap()
    }

    #[test]
    fn plain_power_rule() {
        let c = shell();
        assert!(equals_canonical(&plain_partial(&px(&c, "p1^2*E"), sym(&c, "p1")), &px(&c, "2*p1*E")));
        assert!(equals_canonical(&plain_partial(&px(&c, "p1/E"), sym(&c, "E")), &px(&c, "-p1/E^2")));
        assert_eq!(plain_partial(&px(&c, "f"), sym(&c, "E")), px(&c, "D[f,E]"));
    }

    #[test]
    fn whole_partial_examples() {
        let c = shell();
        let p1 = sym(&c, "p1");
        let got = whole_partial(&px(&c, "f"), p1, &c).unwrap();
        assert!(equals_canonical(&got, &px(&c, "D[f,p1] + D[f,E]*p1/E")));
        assert_eq!(whole_partial(&px(&c, "p1^2"), p1, &c).unwrap(), px(&c, "2*p1"));
        assert!(equals_canonical(&whole_partial(&px(&c, "E"), p1, &c).unwrap(), &px(&c, "p1/E")));
    }

    #[test]
    fn dependent_leg_is_plain() {
        let c = shell();
        let e = sym(&c, "E");
        assert_eq!(whole_partial_wrt_dependent(&px(&c, "f"), e), px(&c, "D[f,E]"));
        assert!(equals_canonical(&whole_partial_wrt_dependent(&px(&c, "p1/E"), e), &px(&c, "-p1/E^2")));
        assert!(whole_partial_wrt_dependent(&px(&c, "p1"), e).is_zero());
    }

    #[test]
    fn parameter_is_rejected() {
        let c = shell();
        let err = whole_partial(&px(&c, "f"), sym(&c, "m"), &c).unwrap_err();
        assert_eq!(err, DerivError::WholeOfParameter("m".into()));
    }

    #[test]
    fn missing_representation_is_named() {
        let c = DependencyContext::parse("independent x\ndependent u\nopaque g(x,u)\n").unwrap();
        let err = whole_partial(&px(&c, "g"), sym(&c, "x"), &c).unwrap_err();
        assert_eq!(err.to_string(), "missing representation (u,x)");
        // no dependence on u, no representation needed
        assert!(whole_partial(&px(&c, "x^2"), sym(&c, "x"), &c).is_ok());
    }

    #[test]
    fn mixed_difference_by_mode() {
        let c = shell();
        let (p1, p2) = (sym(&c, "p1"), sym(&c, "p2"));
        assert!(mixed_difference(&px(&c, "f"), p1, p2, &c).unwrap().is_zero());
        assert!(mixed_difference(&px(&c, "p1^2 + p2^2"), p1, p2, &c).unwrap().is_zero());

        let c = nc(OrderingMode::Operator);
        let (p1, p2) = (sym(&c, "p1"), sym(&c, "p2"));
        let got = mixed_difference(&px(&c, "f"), p2, p1, &c).unwrap();
        let want = px(&c, "k12*(D[f,E]/E^3 - D[f,E,E]/E^2)");
        assert!(equals_canonical(&got, &want), "{}", crate::textio::print_text(&got));

        let c = nc(OrderingMode::Paper);
        let got = mixed_difference(&px(&c, "f"), p2, p1, &c).unwrap();
        assert!(equals_canonical(&got, &px(&c, "k12*D[f,E]/E^3")));

        let c = nc(OrderingMode::Commuting);
        assert!(mixed_difference(&px(&c, "f"), p2, p1, &c).unwrap().is_zero());
    }

    #[test]
    fn request_dispatch() {
        let c = shell();
        let r = DerivativeRequest {
            target: px(&c, "E"),
            variable: sym(&c, "p2").clone(),
            mode: DerivMode::Whole,
            context: c.clone(),
        };
        assert!(equals_canonical(&r.run().unwrap(), &px(&c, "p2/E")));
        let r = DerivativeRequest { mode: DerivMode::Plain, ..r };
        assert!(r.run().unwrap().is_zero());
    }
}
