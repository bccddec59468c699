//! Differential operators: finite sums `coefficient · G1 G2 .. Gn` of
//! derivative words. The rightmost generator acts first and the coefficient
//! multiplies from the left.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::depctx::{DependencyContext, OrderingMode};
use crate::scalar::Scalar;
use crate::symexpr::poly::{canon_product, Base, Poly};
use crate::symexpr::{normal_order, normalize, Expr, OpaqueSig, Symbol};
use crate::textio::{print_latex, print_text};
use crate::wholederiv::{self, apply_word, finish, plain_partial, resolve_generator, DerivError};

pub use crate::wholederiv::{DerivMode, Generator};

/// Name of the generic function operators are applied to when they are
/// compared or reduced.
pub const PROBE: &str = "__probe";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OperatorError {
    #[error("operators belong to different contexts")]
    ContextMismatch,
    #[error("`{0}` is not a variable of the context")]
    NotInContext(String),
    #[error("whole derivative in parameter `{0}`")]
    WholeOfParameter(String),
    #[error("cannot move W[{generator}] past coefficient {coefficient}: its chain-rule term does not commute")]
    NonCommutingCoefficient { generator: String, coefficient: String },
    #[error(transparent)]
    Derivative(DerivError),
}

impl From<DerivError> for OperatorError {
    fn from(e: DerivError) -> Self {
        match e {
            DerivError::NotInContext(v) => OperatorError::NotInContext(v),
            DerivError::WholeOfParameter(v) => OperatorError::WholeOfParameter(v),
            other => OperatorError::Derivative(other),
        }
    }
}

type Word = Vec<Generator>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferentialOperator {
    ctx: DependencyContext,
    terms: BTreeMap<Word, Expr>,
}

impl DifferentialOperator {
    pub fn zero(ctx: &DependencyContext) -> Self {
        DifferentialOperator { ctx: ctx.clone(), terms: BTreeMap::new() }
    }

    pub fn identity(ctx: &DependencyContext) -> Self {
        DifferentialOperator::multiplication(ctx, &Expr::one())
    }

    /// Multiplication by `coef`.
    pub fn multiplication(ctx: &DependencyContext, coef: &Expr) -> Self {
        DifferentialOperator::term(ctx, coef, Vec::new())
    }

    /// `coef · word`, without checking the generators.
    fn term(ctx: &DependencyContext, coef: &Expr, word: Word) -> Self {
        let mut op = DifferentialOperator::zero(ctx);
        op.add_term(word, coef.clone());
        op
    }

    /// A single generator; whole derivatives in a dependent become plain.
    pub fn generator(ctx: &DependencyContext, g: &Generator) -> Result<Self, OperatorError> {
        let g = resolve_generator(g, ctx)?;
        Ok(DifferentialOperator::term(ctx, &Expr::one(), vec![g]))
    }

    pub fn whole(ctx: &DependencyContext, v: &str) -> Result<Self, OperatorError> {
        let s = ctx.symbol(v).ok_or_else(|| OperatorError::NotInContext(v.to_string()))?;
        DifferentialOperator::generator(ctx, &Generator::whole(s))
    }

    pub fn plain(ctx: &DependencyContext, v: &str) -> Result<Self, OperatorError> {
        let s = ctx.symbol(v).ok_or_else(|| OperatorError::NotInContext(v.to_string()))?;
        DifferentialOperator::generator(ctx, &Generator::plain(s))
    }

    /// Operator from `(coefficient, word)` pairs; generators are checked.
    pub fn from_terms(ctx: &DependencyContext, terms: Vec<(Expr, Word)>) -> Result<Self, OperatorError> {
        let mut op = DifferentialOperator::zero(ctx);
        for (c, w) in terms {
            let w = w.iter().map(|g| resolve_generator(g, ctx)).collect::<Result<Word, _>>()?;
            op.add_term(w, c);
        }
        Ok(op)
    }

    pub fn context(&self) -> &DependencyContext {
        &self.ctx
    }

    /// `(word, coefficient)` pairs in canonical order, zero terms pruned.
    pub fn terms(&self) -> impl Iterator<Item = (&[Generator], &Expr)> {
        self.terms.iter().map(|(w, c)| (w.as_slice(), c))
    }

    pub fn coefficient(&self, word: &[Generator]) -> Expr {
        self.terms.get(word).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, word: Word, coef: Expr) {
        let sum = match self.terms.remove(&word) {
            Some(prev) => normalize(&(prev + coef)),
            None => normalize(&coef),
        };
        if !sum.is_zero() {
            self.terms.insert(word, sum);
        }
    }

    fn same_ctx(&self, other: &Self) -> Result<(), OperatorError> {
        if self.ctx == other.ctx {
            Ok(())
        } else {
            Err(OperatorError::ContextMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, OperatorError> {
        self.same_ctx(other)?;
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        self.scale(&Expr::int(-1))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, OperatorError> {
        self.add(&other.neg())
    }

    /// Left multiplication of every coefficient by `s`.
    pub fn scale(&self, s: &Expr) -> Self {
        let mut out = DifferentialOperator::zero(&self.ctx);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), s * c);
        }
        out
    }

    /// `A ∘ B`: derivatives of `A` are pushed through the coefficients of
    /// `B` with the product rule.
    pub fn compose(&self, other: &Self) -> Result<Self, OperatorError> {
        self.same_ctx(other)?;
        let mut out = DifferentialOperator::zero(&self.ctx);
        for (wa, ca) in &self.terms {
            // wa acting on Σ cb·wb, one generator at a time from the right
            let mut acc: BTreeMap<Word, Expr> = other.terms.clone();
            for g in wa.iter().rev() {
                acc = self.push(g, &acc)?;
            }
            for (w, c) in acc {
                out.add_term(w, ca * c);
            }
        }
        Ok(out)
    }

    /// `g ∘ Σ c·w = Σ (g c)·w + c·(g w)`.
    fn push(&self, g: &Generator, terms: &BTreeMap<Word, Expr>) -> Result<BTreeMap<Word, Expr>, OperatorError> {
        let mut out = DifferentialOperator::zero(&self.ctx);
        for (w, c) in terms {
            let mut gw = vec![g.clone()];
            gw.extend(w.iter().cloned());
            out.add_term(gw, c.clone());
            let dc = match g.mode {
                DerivMode::Plain => plain_partial(c, &g.var),
                DerivMode::Whole => {
                    self.check_pushable(g, c)?;
                    wholederiv::whole_partial(c, &g.var, &self.ctx)?
                }
            };
            out.add_term(w.clone(), dc);
        }
        Ok(out.terms)
    }

    /// With noncommuting symbols the chain-rule term of `W[v](c·X)` lands
    /// to the right of `X`, so `c` must not depend on any dependent.
    fn check_pushable(&self, g: &Generator, c: &Expr) -> Result<(), OperatorError> {
        if !self.ctx.has_noncommuting() || self.ctx.ordering() == OrderingMode::Commuting {
            return Ok(());
        }
        for u in self.ctx.dependents() {
            if !plain_partial(c, u).is_zero() {
                return Err(OperatorError::NonCommutingCoefficient {
                    generator: g.var.name().to_string(),
                    coefficient: print_text(c),
                });
            }
        }
        Ok(())
    }

    /// `[A, B] = A∘B − B∘A`.
    pub fn commutator(&self, other: &Self) -> Result<Self, OperatorError> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    /// Applies the operator to `e`; normal-ordered when the context has
    /// noncommuting symbols.
    pub fn apply(&self, e: &Expr) -> Result<Expr, OperatorError> {
        let p = Poly::from_expr(e);
        let mut acc = Poly::zero();
        for (w, c) in &self.terms {
            let r = apply_word(w, &p, &self.ctx)?;
            acc.add_assign(&Poly::from_expr(c).mul(&r));
        }
        Ok(finish(&acc, &self.ctx, true)?)
    }

    /// Generic function of every variable and parameter of the context.
    pub fn probe(ctx: &DependencyContext) -> Arc<OpaqueSig> {
        let mut params: Vec<Symbol> = ctx.independents().to_vec();
        params.extend(ctx.dependents().iter().cloned());
        params.extend(ctx.parameters().iter().cloned());
        OpaqueSig::new(PROBE, params)
    }

    /// Equivalent operator made of sorted plain-derivative words, read off
    /// from the action on a generic function.
    pub fn reduce(&self) -> Result<Self, OperatorError> {
        let sig = DifferentialOperator::probe(&self.ctx);
        let applied = self.apply(&sig.apply_default())?;
        let mut out = DifferentialOperator::zero(&self.ctx);
        for (m, c) in &Poly::from_expr(&applied).terms {
            let pos = m.0.iter().position(|f| match &f.base {
                Base::Opaque(a) => a.sig.name.name() == PROBE,
                Base::Partial(p) => p.app.sig.name.name() == PROBE,
                _ => false,
            });
            let Some(pos) = pos else {
                return Err(OperatorError::Derivative(DerivError::NotInContext(PROBE.into())));
            };
            let mut word = Vec::new();
            if let Base::Partial(atom) = &m.0[pos].base {
                for (var, k) in atom.index() {
                    word.extend(std::iter::repeat_n(Generator::plain(var), k as usize));
                }
            }
            word.sort();
            let mut rest = m.0.clone();
            rest.remove(pos);
            let coef = canon_product(c.clone(), rest).to_expr();
            out.add_term(word, coef);
        }
        Ok(out)
    }

    /// Canonical equality: identical after merging like words, or equal
    /// action on a generic function.
    pub fn op_equals(&self, other: &Self) -> Result<bool, OperatorError> {
        let diff = self.sub(other)?;
        if diff.is_zero() {
            return Ok(true);
        }
        Ok(diff.reduce()?.is_zero())
    }

    /// Coefficients normal-ordered under the context's commutators.
    pub fn normal_ordered(&self) -> Result<Self, OperatorError> {
        if !self.ctx.has_noncommuting() {
            return Ok(self.clone());
        }
        let table = self.ctx.ordering_table();
        let mut out = DifferentialOperator::zero(&self.ctx);
        for (w, c) in &self.terms {
            let c = normal_order(c, &table).map_err(|e| OperatorError::Derivative(e.into()))?;
            out.add_term(w.clone(), c);
        }
        Ok(out)
    }

    /// Same terms with every coefficient passed through `f`.
    pub fn map_coefficients(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        let mut out = DifferentialOperator::zero(&self.ctx);
        for (w, c) in &self.terms {
            out.add_term(w.clone(), f(c));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(w, c)| {
                let gens: Vec<Value> = w
                    .iter()
                    .map(|g| json!({"var": g.var.name(), "mode": g.mode}))
                    .collect();
                json!({"coefficient": print_text(c), "generators": gens})
            })
            .collect();
        json!({"text": self.to_string(), "terms": terms})
    }

    /// LaTeX with `\hat\partial` for whole and `\partial` for plain generators.
    pub fn to_latex(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, c)| {
                let word: Vec<String> = w
                    .iter()
                    .map(|g| match g.mode {
                        DerivMode::Whole => format!("\\hat{{\\partial}}_{{{}}}", g.var),
                        DerivMode::Plain => format!("\\partial_{{{}}}", g.var),
                    })
                    .collect();
                let one = c.as_constant().is_some_and(Scalar::is_one);
                match (w.is_empty(), one) {
                    (true, _) => print_latex(c),
                    (false, true) => word.join(" "),
                    (false, false) => format!("\\left({}\\right) {}", print_latex(c), word.join(" ")),
                }
            })
            .collect();
        parts.join(" + ")
    }
}

fn word_text(w: &[Generator]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < w.len() {
        let mut j = i + 1;
        while j < w.len() && w[j] == w[i] {
            j += 1;
        }
        let n = j - i;
        parts.push(if n == 1 { w[i].to_string() } else { format!("{}^{n}", w[i]) });
        i = j;
    }
    parts.join("*")
}

impl fmt::Display for DifferentialOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            let minus_one = c.as_constant().is_some_and(|s| (-s).is_one());
            match (k, minus_one && !w.is_empty()) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let coef = print_text(c);
            match (w.is_empty(), c.as_constant().is_some_and(Scalar::is_one) || minus_one) {
                (true, _) => write!(f, "({coef})")?,
                (false, true) => f.write_str(&word_text(w))?,
                (false, false) => write!(f, "({coef})*{}", word_text(w))?,
            }
        }
        Ok(())
    }
}
