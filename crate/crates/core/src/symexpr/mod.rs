//! Immutable symbolic expressions over exact Gaussian-rational scalars.
//!
//! An [`Expr`] is a reference-counted tree. Trees built with the arithmetic
//! operators are raw; [`normalize`] turns any tree into its canonical form:
//! a flattened sum of ordered monomials with folded constants and merged
//! exponents. Factors that share a nonzero commutativity class keep their
//! relative order, everything else is sorted.

mod ordering;
pub(crate) mod poly;
mod subst;
mod table;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_rational::Rational64;

use crate::scalar::Scalar;

pub use ordering::{normal_order, CommutatorTable, OrderError};
pub use subst::{substitute, SubstError};
pub use table::SymbolTable;

use poly::Poly;

/// What role a symbol plays in a dependency context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKind {
    Independent,
    Dependent,
    Parameter,
    Opaque,
    /// A central symbol standing for a commutator value such as `[p1,p2]`.
    Commutator,
}

impl SymbolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::Independent => "independent",
            SymbolKind::Dependent => "dependent",
            SymbolKind::Parameter => "parameter",
            SymbolKind::Opaque => "opaque",
            SymbolKind::Commutator => "commutator",
        }
    }
}

/// A named atom. Class 0 commutes with everything; symbols that share a
/// nonzero class keep their written order inside products.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    name: Arc<str>,
    kind: SymbolKind,
    class: u32,
}

impl Symbol {
    pub fn new(name: &str, kind: SymbolKind) -> Self {
        Symbol::with_class(name, kind, 0)
    }

    pub fn with_class(name: &str, kind: SymbolKind, class: u32) -> Self {
        // commutator values are central whatever the caller asks for
        let class = if kind == SymbolKind::Commutator { 0 } else { class };
        Symbol { name: Arc::from(name), kind, class }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn class(&self) -> u32 {
        self.class
    }

    pub fn is_central(&self) -> bool {
        self.class == 0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Signature of an opaque (uninterpreted, smooth) function: its name and the
/// symbols naming its argument slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpaqueSig {
    pub name: Symbol,
    pub params: Vec<Symbol>,
}

impl OpaqueSig {
    pub fn new(name: &str, params: Vec<Symbol>) -> Arc<Self> {
        Arc::new(OpaqueSig { name: Symbol::new(name, SymbolKind::Opaque), params })
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Application to the declared parameter symbols.
    pub fn apply_default(self: &Arc<Self>) -> Expr {
        Expr::from_node(Node::Apply(OpaqueApp { sig: self.clone(), args: self.params.clone() }))
    }

    pub fn slot_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name() == name)
    }
}

/// `f(a1, .., an)` with symbol arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpaqueApp {
    pub sig: Arc<OpaqueSig>,
    pub args: Vec<Symbol>,
}

impl OpaqueApp {
    pub fn uses_default_args(&self) -> bool {
        self.args == self.sig.params
    }
}

/// A plain partial derivative of an opaque application. The multi-index is
/// stored as one order per argument slot, so mixed partials taken in either
/// order are the same atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialAtom {
    pub app: OpaqueApp,
    pub orders: Vec<u32>,
}

impl PartialAtom {
    pub fn total_order(&self) -> u32 {
        self.orders.iter().sum()
    }

    /// `(slot parameter, order)` pairs with nonzero order.
    pub fn index(&self) -> impl Iterator<Item = (&Symbol, u32)> {
        self.app
            .sig
            .params
            .iter()
            .zip(self.orders.iter().copied())
            .filter(|(_, o)| *o > 0)
    }
}

/// Unexpanded chain-rule coefficient `∂dependent/∂independent`. Only the
/// derivative engine creates these and it expands them before returning.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RepSlot {
    pub dependent: Symbol,
    pub independent: Symbol,
    pub(crate) classes: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Const(Scalar),
    Sym(Symbol),
    Sum(Vec<Expr>),
    /// Ordered product.
    Product(Vec<Expr>),
    Pow(Expr, Rational64),
    Apply(OpaqueApp),
    Partial(PartialAtom),
    Rep(RepSlot),
}

/// Immutable, cheaply clonable expression tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: Scalar) -> Self {
        Expr::from_node(Node::Const(c))
    }

    pub fn int(n: i64) -> Self {
        Expr::constant(Scalar::from_int(n))
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Expr::constant(Scalar::from_ratio(num, den))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    /// The imaginary unit.
    pub fn imag() -> Self {
        Expr::constant(Scalar::i())
    }

    pub fn sym(s: &Symbol) -> Self {
        Expr::from_node(Node::Sym(s.clone()))
    }

    pub fn sum(terms: Vec<Expr>) -> Self {
        Expr::from_node(Node::Sum(terms))
    }

    pub fn product(factors: Vec<Expr>) -> Self {
        Expr::from_node(Node::Product(factors))
    }

    pub fn pow(&self, exp: Rational64) -> Self {
        Expr::from_node(Node::Pow(self.clone(), exp))
    }

    pub fn powi(&self, exp: i64) -> Self {
        self.pow(Rational64::from_integer(exp))
    }

    pub fn sqrt(&self) -> Self {
        self.pow(Rational64::new(1, 2))
    }

    pub fn recip(&self) -> Self {
        self.powi(-1)
    }

    pub fn apply(sig: &Arc<OpaqueSig>, args: Vec<Symbol>) -> Self {
        Expr::from_node(Node::Apply(OpaqueApp { sig: sig.clone(), args }))
    }

    pub fn partial(atom: PartialAtom) -> Self {
        Expr::from_node(Node::Partial(atom))
    }

    pub fn as_constant(&self) -> Option<&Scalar> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// True if the canonical form is zero. Cheap when `self` is already
    /// normalized.
    pub fn is_zero(&self) -> bool {
        match self.node() {
            Node::Const(c) => c.is_zero(),
            _ => Poly::from_expr(self).is_zero(),
        }
    }

    /// All symbols mentioned, including opaque argument symbols.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Sym(s) => {
                out.insert(s.clone());
            }
            Node::Sum(xs) | Node::Product(xs) => xs.iter().for_each(|x| x.collect_symbols(out)),
            Node::Pow(b, _) => b.collect_symbols(out),
            Node::Apply(app) => out.extend(app.args.iter().cloned()),
            Node::Partial(p) => out.extend(p.app.args.iter().cloned()),
            Node::Rep(r) => {
                out.insert(r.dependent.clone());
                out.insert(r.independent.clone());
            }
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.symbols().iter().any(|s| s.name() == name)
    }

    /// True if any opaque application or partial atom occurs.
    pub fn has_opaque(&self) -> bool {
        match self.node() {
            Node::Apply(_) | Node::Partial(_) => true,
            Node::Sum(xs) | Node::Product(xs) => xs.iter().any(Expr::has_opaque),
            Node::Pow(b, _) => b.has_opaque(),
            _ => false,
        }
    }

    pub(crate) fn has_rep(&self) -> bool {
        match self.node() {
            Node::Rep(_) => true,
            Node::Sum(xs) | Node::Product(xs) => xs.iter().any(Expr::has_rep),
            Node::Pow(b, _) => b.has_rep(),
            _ => false,
        }
    }

    /// Nonzero commutativity classes of the symbols in this expression.
    pub fn classes(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.collect_classes(&mut out);
        out
    }

    fn collect_classes(&self, out: &mut BTreeSet<u32>) {
        match self.node() {
            Node::Sym(s) if s.class() != 0 => {
                out.insert(s.class());
            }
            Node::Sum(xs) | Node::Product(xs) => xs.iter().for_each(|x| x.collect_classes(out)),
            Node::Pow(b, _) => b.collect_classes(out),
            Node::Rep(r) => out.extend(r.classes.iter().copied()),
            _ => {}
        }
    }

    /// Depth of the tree, used to bound generated corpora.
    pub fn depth(&self) -> usize {
        match self.node() {
            Node::Sum(xs) | Node::Product(xs) => 1 + xs.iter().map(Expr::depth).max().unwrap_or(0),
            Node::Pow(b, _) => 1 + b.depth(),
            _ => 1,
        }
    }
}

/// Canonical form. Idempotent and value-preserving.
pub fn normalize(e: &Expr) -> Expr {
    Poly::from_expr(e).to_expr()
}

/// Rational-function equality: `a - b` reduces to zero after bringing all
/// sum-valued denominators to a common denominator.
pub fn equals_canonical(a: &Expr, b: &Expr) -> bool {
    let diff = Poly::from_expr(a).sub(&Poly::from_expr(b));
    diff.is_zero() || diff.is_rationally_zero()
}

impl From<&Symbol> for Expr {
    fn from(s: &Symbol) -> Self {
        Expr::sym(s)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                (&self).$method(rhs)
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum(vec![a.clone(), b.clone()]));
binop!(Sub, sub, |a, b| Expr::sum(vec![a.clone(), -b]));
binop!(Mul, mul, |a, b| Expr::product(vec![a.clone(), b.clone()]));
binop!(Div, div, |a, b| Expr::product(vec![a.clone(), b.recip()]));

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::product(vec![Expr::int(-1), self.clone()])
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}
