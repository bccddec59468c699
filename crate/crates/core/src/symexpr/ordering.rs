//! Normal ordering of noncommuting symbols to first order in commutators.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use num_traits::{One, Signed};
use thiserror::Error;

use super::poly::{canon_product, Base, Factor, Poly};
use super::{equals_canonical, normalize, Expr, Symbol};
use crate::scalar::Scalar;
use crate::wholederiv::diff;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("no commutator declared for noncommuting pair [{0},{1}]")]
    Undeclared(String, String),
    #[error("cannot reorder unexpanded representation placeholder in {0}·{1}")]
    Composite(String, String),
}

/// Declared commutators `[a,b] = value`. Values must be central.
///
/// Entries are stored once per unordered pair; lookups in the other order
/// return the negated value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommutatorTable {
    entries: BTreeMap<(Symbol, Symbol), Expr>,
    commuting: bool,
}

impl CommutatorTable {
    pub fn new() -> Self {
        CommutatorTable::default()
    }

    /// Table for the commuting limit: every pair commutes, all values zero.
    pub fn commuting_limit() -> Self {
        CommutatorTable { entries: BTreeMap::new(), commuting: true }
    }

    pub fn is_commuting_limit(&self) -> bool {
        self.commuting
    }

    /// Same entries with every value treated as zero.
    pub fn to_commuting_limit(&self) -> Self {
        CommutatorTable { entries: self.entries.clone(), commuting: true }
    }

    /// Inserts `[a,b] = value`. Returns the previous canonical entry when it
    /// disagrees with the new one under antisymmetry.
    pub fn insert(&mut self, a: &Symbol, b: &Symbol, value: Expr) -> Result<(), Expr> {
        let (key, val) = if a <= b {
            ((a.clone(), b.clone()), normalize(&value))
        } else {
            ((b.clone(), a.clone()), normalize(&-value))
        };
        if let Some(prev) = self.entries.get(&key) {
            if !equals_canonical(prev, &val) {
                return Err(prev.clone());
            }
            return Ok(());
        }
        self.entries.insert(key, val);
        Ok(())
    }

    /// `[a,b]`, with antisymmetry applied.
    pub fn get(&self, a: &Symbol, b: &Symbol) -> Option<Expr> {
        if a == b {
            return Some(Expr::zero());
        }
        if a < b {
            self.entries.get(&(a.clone(), b.clone())).cloned()
        } else {
            self.entries.get(&(b.clone(), a.clone())).map(|v| normalize(&-v))
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Symbol, &Symbol, &Expr)> {
        self.entries.iter().map(|((a, b), v)| (a, b, v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

struct Work {
    coeff: Scalar,
    factors: Vec<Factor>,
    order: i64,
}

fn describe(f: &Factor) -> String {
    let mut terms = BTreeMap::new();
    terms.insert(super::poly::Monomial(vec![f.clone()]), Scalar::one());
    crate::textio::print_text(&Poly { terms }.to_expr())
}

/// Rewrites every out-of-order pair `a·b` of noncommuting factors as
/// `b·a + [a,b]`, dropping terms of second or higher order in commutators.
/// Powers and compound factors use `[a,b] = Σ ∂a/∂s·∂b/∂t·[s,t]`.
pub fn normal_order(e: &Expr, table: &CommutatorTable) -> Result<Expr, OrderError> {
    let p = Poly::from_expr(e);
    let mut out = Poly::zero();
    let mut stack: Vec<Work> = p
        .terms
        .iter()
        .map(|(m, c)| Work { coeff: c.clone(), factors: m.0.clone(), order: Poly::kappa_degree(m) })
        .collect();

    while let Some(w) = stack.pop() {
        if w.order >= 2 {
            continue;
        }
        let fs = explode(w.factors);
        let classes: Vec<BTreeSet<u32>> = fs.iter().map(|f| f.base.classes()).collect();
        let commutes = |i: usize, j: usize| fs[i].base == fs[j].base || classes[i].is_disjoint(&classes[j]);

        // first pair i < j that can be made adjacent and is out of order
        let mut found = None;
        'outer: for j in 1..fs.len() {
            for i in (0..j).rev() {
                if commutes(i, j) {
                    continue;
                }
                if fs[i].base > fs[j].base {
                    found = Some((i, j));
                    break 'outer;
                }
                // blocked by a noncommuting factor already in order
                break;
            }
        }

        let Some((i, j)) = found else {
            out.add_assign(&canon_product(w.coeff, fs));
            continue;
        };
        // move fs[j] next to fs[i]; everything in between commutes with it
        let mut seq = fs.clone();
        let moved = seq.remove(j);
        seq.insert(i + 1, moved);
        let (a, b) = (&seq[i], &seq[i + 1]);

        let mut swapped = seq.clone();
        swapped.swap(i, i + 1);

        if table.is_commuting_limit() {
            stack.push(Work { coeff: w.coeff, factors: swapped, order: w.order });
            continue;
        }
        let value = bracket(a, b, table)?;
        stack.push(Work { coeff: w.coeff.clone(), factors: swapped, order: w.order });

        // a·b = b·a + [a,b]
        for (vm, vc) in &value.terms {
            let mut fs2 = seq[..i].to_vec();
            fs2.extend(vm.0.iter().cloned());
            fs2.extend(seq[i + 2..].iter().cloned());
            stack.push(Work { coeff: &w.coeff * vc, factors: fs2, order: w.order + 1 });
        }
    }
    Ok(out.to_expr())
}

fn noncommuting_symbols(f: &Factor) -> BTreeSet<Symbol> {
    match &f.base {
        Base::Sym(s) if s.class() != 0 => [s.clone()].into_iter().collect(),
        Base::Compound(e) => e.symbols().into_iter().filter(|s| s.class() != 0).collect(),
        _ => BTreeSet::new(),
    }
}

/// `[a,b]` to first order for central commutators:
/// `Σ ∂a/∂s · ∂b/∂t · [s,t]` over the noncommuting symbols `s` of `a` and `t` of `b`.
fn bracket(a: &Factor, b: &Factor, table: &CommutatorTable) -> Result<Poly, OrderError> {
    if matches!(a.base, Base::Rep(_)) || matches!(b.base, Base::Rep(_)) {
        return Err(OrderError::Composite(describe(a), describe(b)));
    }
    let (pa, pb) = (Poly::factor(a.base.clone(), a.exp), Poly::factor(b.base.clone(), b.exp));
    let tb = noncommuting_symbols(b);
    let mut out = Poly::zero();
    for s in noncommuting_symbols(a) {
        let da = diff(&pa, &s, None);
        if da.is_zero() {
            continue;
        }
        for t in tb.iter().filter(|t| t.class() == s.class() && **t != s) {
            let value = table
                .get(&s, t)
                .ok_or_else(|| OrderError::Undeclared(s.name().to_string(), t.name().to_string()))?;
            if value.is_zero() {
                continue;
            }
            out.add_assign(&da.mul(&diff(&pb, t, None)).mul(&Poly::from_expr(&value)));
        }
    }
    Ok(out)
}

/// Splits positive integer powers of noncommuting symbols into repeated
/// factors so single symbols can be moved.
fn explode(fs: Vec<Factor>) -> Vec<Factor> {
    let mut out = Vec::with_capacity(fs.len());
    for f in fs {
        match &f.base {
            Base::Sym(s) if s.class() != 0 && f.exp.is_integer() && f.exp.is_positive() => {
                for _ in 0..f.exp.to_integer() {
                    out.push(Factor::new(f.base.clone(), Rational64::one()));
                }
            }
            _ => out.push(f),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::SymbolKind;

    fn setup() -> (Symbol, Symbol, Symbol, CommutatorTable) {
        let p1 = Symbol::with_class("p1", SymbolKind::Independent, 1);
        let p2 = Symbol::with_class("p2", SymbolKind::Independent, 1);
        let k12 = Symbol::new("k12", SymbolKind::Commutator);
        let mut t = CommutatorTable::new();
        t.insert(&p1, &p2, Expr::sym(&k12)).unwrap();
        (p1, p2, k12, t)
    }

    #[test]
    fn swaps_with_commutator_term() {
        let (p1, p2, k12, t) = setup();
        let e = Expr::sym(&p2) * Expr::sym(&p1);
        let got = normal_order(&e, &t).unwrap();
        let want = Expr::sym(&p1) * Expr::sym(&p2) - Expr::sym(&k12);
        assert!(equals_canonical(&got, &want));
    }

    #[test]
    fn commutator_of_symbols() {
        let (p1, p2, k12, t) = setup();
        let e = Expr::sym(&p1) * Expr::sym(&p2) - Expr::sym(&p2) * Expr::sym(&p1);
        assert_eq!(normal_order(&e, &t).unwrap(), Expr::sym(&k12));
    }

    #[test]
    fn commuting_limit_sorts() {
        let (p1, p2, _, t) = setup();
        let e = Expr::sym(&p2) * Expr::sym(&p1);
        let got = normal_order(&e, &t.to_commuting_limit()).unwrap();
        assert_eq!(got, normalize(&(Expr::sym(&p1) * Expr::sym(&p2))));
    }

    #[test]
    fn truncates_second_order() {
        let (p1, p2, k12, t) = setup();
        // p2 p1 p2 p1 produces a k12^2 term that must vanish
        let e = Expr::product(vec![Expr::sym(&p2), Expr::sym(&p1), Expr::sym(&p2), Expr::sym(&p1)]);
        let got = normal_order(&e, &t).unwrap();
        // (p1 p2 - k)^2 with p2 p1 = p1 p2 - k  =>  p1^2 p2^2 - 3 k p1 p2 + O(k^2)
        let (a, b, k) = (Expr::sym(&p1), Expr::sym(&p2), Expr::sym(&k12));
        let want = a.powi(2) * b.powi(2) - Expr::int(3) * k * a * b;
        assert!(equals_canonical(&got, &want), "{got:?}");
        assert_eq!(normal_order(&got, &t).unwrap(), got);
    }

    #[test]
    fn inverse_powers_reorder() {
        let (p1, p2, k12, t) = setup();
        // p2·p1⁻¹ = p1⁻¹·(p1·p2)·p1⁻¹ = p1⁻¹·p2 + k12·p1⁻²
        let e = Expr::sym(&p2) * Expr::sym(&p1).powi(-1);
        let got = normal_order(&e, &t).unwrap();
        let want = Expr::sym(&p1).powi(-1) * Expr::sym(&p2) + Expr::sym(&k12) * Expr::sym(&p1).powi(-2);
        assert!(equals_canonical(&got, &want), "{got:?}");
    }

    #[test]
    fn compound_factors_reorder() {
        let (p1, p2, k12, t) = setup();
        // symbols sort before compounds: √c·p2 = p2·√c + [√c, p2], [√c, p2] = k12·p1/√c
        let c = Expr::sym(&p1).powi(2) + Expr::int(1);
        let e = c.sqrt() * Expr::sym(&p2);
        let got = normal_order(&e, &t).unwrap();
        let want = Expr::sym(&p2) * c.sqrt() + Expr::sym(&k12) * Expr::sym(&p1) * c.pow(Rational64::new(-1, 2));
        assert!(equals_canonical(&got, &want), "{got:?}");
    }

    #[test]
    fn undeclared_pair_errors() {
        let p1 = Symbol::with_class("p1", SymbolKind::Independent, 1);
        let p3 = Symbol::with_class("p3", SymbolKind::Independent, 1);
        let e = Expr::sym(&p3) * Expr::sym(&p1);
        let err = normal_order(&e, &CommutatorTable::new()).unwrap_err();
        assert_eq!(err, OrderError::Undeclared("p3".into(), "p1".into()));
    }
}
