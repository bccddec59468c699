//! Canonical sum-of-monomials form used by normalization, differentiation
//! and normal ordering.
//!
//! A monomial is an ordered list of `(base, exponent)` factors. Bases are
//! atoms (symbols, opaque applications, partial atoms, representation slots)
//! or compound expressions that cannot be split further without domain
//! assumptions, such as `(m^2 + p1^2)^(1/2)` or `(E^2)^(1/2)`.
//!
//! Invariants of a canonical monomial:
//! - factors appear in the lexicographically least order reachable by
//!   swapping adjacent factors that commute;
//! - adjacent equal bases are merged and zero exponents dropped;
//! - sum bases carry exponents below 1 (integer parts are expanded);
//! - constant bases carry exponents in `(0, 1)` and are not perfect powers.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};

use super::{Expr, Node, OpaqueApp, PartialAtom, RepSlot, Symbol, SymbolKind};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Base {
    Opaque(OpaqueApp),
    Partial(PartialAtom),
    Sym(Symbol),
    Rep(RepSlot),
    /// Canonical constant, sum, or single-term expression.
    Compound(Expr),
}

impl Base {
    pub(crate) fn to_expr(&self) -> Expr {
        match self {
            Base::Opaque(a) => Expr::from_node(Node::Apply(a.clone())),
            Base::Partial(p) => Expr::from_node(Node::Partial(p.clone())),
            Base::Sym(s) => Expr::sym(s),
            Base::Rep(r) => Expr::from_node(Node::Rep(r.clone())),
            Base::Compound(e) => e.clone(),
        }
    }

    pub(crate) fn classes(&self) -> BTreeSet<u32> {
        match self {
            Base::Opaque(_) | Base::Partial(_) => BTreeSet::new(),
            Base::Sym(s) if s.class() != 0 => [s.class()].into_iter().collect(),
            Base::Sym(_) => BTreeSet::new(),
            Base::Rep(r) => r.classes.iter().copied().collect(),
            Base::Compound(e) => e.classes(),
        }
    }

    #[cfg(test)]
    pub(crate) fn as_symbol(&self) -> Option<&Symbol> {
        match self {
            Base::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Atoms that print in front of the rational part of a term.
    pub(crate) fn is_function_atom(&self) -> bool {
        matches!(self, Base::Opaque(_) | Base::Partial(_) | Base::Rep(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Factor {
    pub base: Base,
    pub exp: Rational64,
}

impl Factor {
    pub fn new(base: Base, exp: Rational64) -> Self {
        Factor { base, exp }
    }
}

/// Ordered factor list; compared graded (fewer factors first) then
/// lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub(crate) struct Monomial(pub Vec<Factor>);

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub(crate) struct Poly {
    pub terms: BTreeMap<Monomial, Scalar>,
}

fn commute(a: &Factor, ac: &BTreeSet<u32>, b: &Factor, bc: &BTreeSet<u32>) -> bool {
    a.base == b.base || ac.is_disjoint(bc)
}

/// Lexicographically least arrangement under the partial commutation
/// relation, merging adjacent equal bases.
fn sort_merge(factors: Vec<Factor>) -> Vec<Factor> {
    let mut current = factors;
    loop {
        let mut rest: Vec<(Factor, BTreeSet<u32>)> = current
            .into_iter()
            .filter(|f| !f.exp.is_zero())
            .map(|f| {
                let c = f.base.classes();
                (f, c)
            })
            .collect();
        let mut out: Vec<Factor> = Vec::with_capacity(rest.len());
        let mut merged = false;
        while !rest.is_empty() {
            let mut best: Option<usize> = None;
            for j in 0..rest.len() {
                let free = (0..j).all(|k| commute(&rest[k].0, &rest[k].1, &rest[j].0, &rest[j].1));
                if !free {
                    continue;
                }
                best = match best {
                    Some(b) if rest[b].0 <= rest[j].0 => Some(b),
                    _ => Some(j),
                };
            }
            let (f, _) = rest.remove(best.expect("first factor is always free"));
            match out.last_mut() {
                Some(last) if last.base == f.base => {
                    last.exp += f.exp;
                    merged = true;
                }
                _ => out.push(f),
            }
        }
        if !merged {
            return out;
        }
        // merging may have produced zero exponents or new adjacencies
        current = out;
    }
}

enum Fixup {
    Keep,
    Replace(Poly),
}

fn floor_rat(r: Rational64) -> i64 {
    r.floor().to_integer()
}

/// Decide whether a merged factor must be rewritten into something else.
fn fixup(f: &Factor) -> Fixup {
    if f.exp.is_zero() {
        return Fixup::Replace(Poly::one());
    }
    let e = match &f.base {
        Base::Compound(e) => e,
        _ => return Fixup::Keep,
    };
    match e.node() {
        Node::Const(c) => {
            if let Some(v) = c.exact_pow(f.exp) {
                return Fixup::Replace(Poly::constant(v));
            }
            if c.is_zero() {
                return if f.exp.is_positive() {
                    Fixup::Replace(Poly::zero())
                } else {
                    Fixup::Keep
                };
            }
            let n = floor_rat(f.exp);
            if n == 0 {
                return Fixup::Keep;
            }
            let frac = f.exp - Rational64::from_integer(n);
            let int_part = c.powi(n).expect("nonzero base");
            let mut p = Poly::constant(int_part);
            p = p.mul(&Poly::raw_factor(Factor::new(f.base.clone(), frac)));
            Fixup::Replace(p)
        }
        _ => {
            let inner = Poly::from_expr(e);
            if f.exp.is_integer() {
                let n = f.exp.to_integer();
                if n > 0 || inner.terms.len() == 1 {
                    return Fixup::Replace(inner.pow_int(n));
                }
                return Fixup::Keep;
            }
            if f.exp > Rational64::one() {
                let n = floor_rat(f.exp);
                let frac = f.exp - Rational64::from_integer(n);
                let p = inner
                    .pow_int(n)
                    .mul(&Poly::raw_factor(Factor::new(f.base.clone(), frac)));
                return Fixup::Replace(p);
            }
            Fixup::Keep
        }
    }
}

/// Canonical polynomial for `coeff · factors` (factors in written order).
pub(crate) fn canon_product(coeff: Scalar, factors: Vec<Factor>) -> Poly {
    if coeff.is_zero() {
        return Poly::zero();
    }
    let sorted = sort_merge(factors);
    for idx in 0..sorted.len() {
        if let Fixup::Replace(rep) = fixup(&sorted[idx]) {
            let left = canon_product(coeff, sorted[..idx].to_vec());
            let right = canon_product(Scalar::one(), sorted[idx + 1..].to_vec());
            return left.mul(&rep).mul(&right);
        }
    }
    let mut terms = BTreeMap::new();
    terms.insert(Monomial(sorted), coeff);
    Poly { terms }
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Scalar::one())
    }

    pub fn constant(c: Scalar) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::default(), c);
        }
        Poly { terms }
    }

    /// A single factor without canonicalization; callers must only pass
    /// factors that are already canonical on their own.
    fn raw_factor(f: Factor) -> Self {
        if f.exp.is_zero() {
            return Poly::one();
        }
        let mut terms = BTreeMap::new();
        terms.insert(Monomial(vec![f]), Scalar::one());
        Poly { terms }
    }

    pub fn factor(base: Base, exp: Rational64) -> Self {
        canon_product(Scalar::one(), vec![Factor::new(base, exp)])
    }

    pub fn atom(base: Base) -> Self {
        Poly::factor(base, Rational64::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, m: Monomial, c: Scalar) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn add_assign(&mut self, other: &Poly) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn neg(&self) -> Poly {
        self.scale(&Scalar::from_int(-1))
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &Scalar) -> Poly {
        if s.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect() }
    }

    /// Ordered product `self · other`.
    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut fs = m1.0.clone();
                fs.extend(m2.0.iter().cloned());
                out.add_assign(&canon_product(c1 * c2, fs));
            }
        }
        out
    }

    /// Integer power. Negative powers invert single-term polynomials and
    /// wrap sums as compound bases.
    pub fn pow_int(&self, n: i64) -> Poly {
        if n == 0 {
            return Poly::one();
        }
        if n > 0 {
            let mut acc = self.clone();
            for _ in 1..n {
                acc = acc.mul(self);
            }
            return acc;
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if let Some(inv) = c.inv() {
                // (c·a·b)^-1 = c^-1 · b^-1 · a^-1
                let fs: Vec<Factor> =
                    m.0.iter().rev().map(|f| Factor::new(f.base.clone(), -f.exp)).collect();
                return canon_product(inv, fs).pow_int(-n);
            }
        }
        Poly::factor(Base::Compound(self.to_expr()), Rational64::from_integer(n))
    }

    /// Rational power following principal-branch rules: only positive real
    /// coefficients are split off, `(x^a)^r` is never rewritten to `x^(a·r)`
    /// for fractional `r`.
    pub fn pow_rat(&self, r: Rational64) -> Poly {
        if r.is_integer() {
            return self.pow_int(r.to_integer());
        }
        if self.is_zero() {
            return if r.is_positive() {
                Poly::zero()
            } else {
                Poly::factor(Base::Compound(Expr::zero()), r)
            };
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if m.0.is_empty() {
                return Poly::factor(Base::Compound(Expr::constant(c.clone())), r);
            }
            if c.is_positive_real() {
                let coeff = Poly::factor(Base::Compound(Expr::constant(c.clone())), r);
                let rest = if m.0.len() == 1 && m.0[0].exp.is_one() {
                    Poly::factor(m.0[0].base.clone(), r)
                } else {
                    let mut terms = BTreeMap::new();
                    terms.insert(m.clone(), Scalar::one());
                    Poly::factor(Base::Compound(Poly { terms }.to_expr()), r)
                };
                return coeff.mul(&rest);
            }
        }
        Poly::factor(Base::Compound(self.to_expr()), r)
    }

    pub fn from_expr(e: &Expr) -> Poly {
        match e.node() {
            Node::Const(c) => Poly::constant(c.clone()),
            Node::Sym(s) => Poly::atom(Base::Sym(s.clone())),
            Node::Apply(a) => Poly::atom(Base::Opaque(a.clone())),
            Node::Partial(p) => {
                if p.orders.iter().all(|o| *o == 0) {
                    Poly::atom(Base::Opaque(p.app.clone()))
                } else {
                    Poly::atom(Base::Partial(p.clone()))
                }
            }
            Node::Rep(r) => Poly::atom(Base::Rep(r.clone())),
            Node::Sum(xs) => {
                let mut out = Poly::zero();
                for x in xs {
                    out.add_assign(&Poly::from_expr(x));
                }
                out
            }
            Node::Product(xs) => {
                let mut out = Poly::one();
                for x in xs {
                    out = out.mul(&Poly::from_expr(x));
                    if out.is_zero() {
                        break;
                    }
                }
                out
            }
            Node::Pow(b, r) => Poly::from_expr(b).pow_rat(*r),
        }
    }

    pub fn to_expr(&self) -> Expr {
        let mut terms: Vec<Expr> = self.terms.iter().map(|(m, c)| term_expr(c, m)).collect();
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.pop().unwrap(),
            _ => Expr::sum(terms),
        }
    }

    /// Degree in commutator-kind symbols of a monomial.
    pub fn kappa_degree(m: &Monomial) -> i64 {
        m.0.iter()
            .filter_map(|f| match &f.base {
                Base::Sym(s) if s.kind() == SymbolKind::Commutator => {
                    Some(if f.exp.is_integer() { f.exp.to_integer().max(1) } else { 1 })
                }
                _ => None,
            })
            .sum()
    }

    /// Zero test after clearing sum-valued denominators.
    ///
    /// Each compound factor `S^e` with `e < 0` is written `S^(e+k) / S^k`
    /// with `k = ceil(-e)`; the numerators are brought over the common
    /// denominator `Π S^kmax` and the resulting polynomial is tested.
    pub fn is_rationally_zero(&self) -> bool {
        if self.is_zero() {
            return true;
        }
        let mut den: BTreeMap<Expr, i64> = BTreeMap::new();
        let mut split = Vec::new();
        for (m, c) in &self.terms {
            let mut num = Vec::new();
            let mut local: BTreeMap<Expr, i64> = BTreeMap::new();
            for f in &m.0 {
                match &f.base {
                    Base::Compound(e) if f.exp.is_negative() && e.as_constant().is_none() => {
                        let k = (-f.exp).ceil().to_integer();
                        let rest = f.exp + Rational64::from_integer(k);
                        if !rest.is_zero() {
                            num.push(Factor::new(f.base.clone(), rest));
                        }
                        *local.entry(e.clone()).or_insert(0) += k;
                    }
                    _ => num.push(f.clone()),
                }
            }
            for (e, k) in &local {
                let slot = den.entry(e.clone()).or_insert(0);
                *slot = (*slot).max(*k);
            }
            split.push((c.clone(), num, local));
        }
        if den.is_empty() {
            return false;
        }
        let mut total = Poly::zero();
        for (c, num, local) in split {
            let mut p = canon_product(c, num);
            for (e, kmax) in &den {
                let have = local.get(e).copied().unwrap_or(0);
                if kmax - have > 0 {
                    p = p.mul(&Poly::from_expr(e).pow_int(kmax - have));
                }
            }
            total.add_assign(&p);
        }
        total.is_zero()
    }
}

fn term_expr(c: &Scalar, m: &Monomial) -> Expr {
    let mut factors: Vec<Expr> = m
        .0
        .iter()
        .map(|f| {
            let b = f.base.to_expr();
            if f.exp.is_one() {
                b
            } else {
                b.pow(f.exp)
            }
        })
        .collect();
    if factors.is_empty() {
        return Expr::constant(c.clone());
    }
    if c.is_one() {
        if factors.len() == 1 {
            return factors.pop().unwrap();
        }
        return Expr::product(factors);
    }
    factors.insert(0, Expr::constant(c.clone()));
    Expr::product(factors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(name: &str, class: u32) -> Expr {
        Expr::sym(&Symbol::with_class(name, SymbolKind::Independent, class))
    }

    #[test]
    fn lex_least_respects_blocking() {
        // E commutes with everything; p2 p1 must stay in that order.
        let e = Poly::from_expr(&Expr::product(vec![s("p2", 1), s("E", 0), s("p1", 1)]));
        let (m, _) = e.terms.iter().next().unwrap();
        let names: Vec<String> =
            m.0.iter().map(|f| f.base.as_symbol().unwrap().name().to_string()).collect();
        assert_eq!(names, ["E", "p2", "p1"]);
    }

    #[test]
    fn merges_across_commuting_factors() {
        let e = Poly::from_expr(&Expr::product(vec![s("x", 0), s("y", 0), s("x", 0)]));
        let (m, _) = e.terms.iter().next().unwrap();
        assert_eq!(m.0.len(), 2);
        assert_eq!(m.0[0].exp, Rational64::from_integer(2));
    }

    #[test]
    fn noncommuting_same_symbol_merges_only_when_adjacent() {
        let e = Poly::from_expr(&Expr::product(vec![s("p1", 1), s("p2", 1), s("p1", 1)]));
        let (m, _) = e.terms.iter().next().unwrap();
        assert_eq!(m.0.len(), 3);
    }

    #[test]
    fn expands_integer_powers_of_sums() {
        let x = s("x", 0);
        let sum = Expr::sum(vec![x.clone(), Expr::one()]);
        let sq = Poly::from_expr(&sum.powi(2));
        assert_eq!(sq.terms.len(), 3);
        let back = Poly::from_expr(&sum.pow(Rational64::new(3, 2)));
        // (x+1)^(3/2) = x·(x+1)^(1/2) + (x+1)^(1/2)
        assert_eq!(back.terms.len(), 2);
    }

    #[test]
    fn inverse_reverses_noncommuting_order() {
        let p = Poly::from_expr(&Expr::product(vec![s("p1", 1), s("p2", 1)]));
        let inv = p.pow_int(-1);
        let (m, _) = inv.terms.iter().next().unwrap();
        assert_eq!(m.0[0].base.as_symbol().unwrap().name(), "p2");
    }
}
