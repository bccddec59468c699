//! Concrete stand-ins for opaque functions.

use std::sync::Arc;

use num_traits::{One, Zero};

use super::C64;

/// A smooth test function bound to an opaque symbol. Arguments arrive in the
/// opaque function's slot order.
pub trait OpaqueModel: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, args: &[C64]) -> C64;

    /// Analytic partial with per-slot orders, if known.
    fn partial(&self, _orders: &[u32], _args: &[C64]) -> Option<C64> {
        None
    }
}

/// `p · h(E)` with `p` the first slot and `E` the last; middle slots are
/// ignored. Partials follow from the one-dimensional derivatives of `h`.
fn separable(orders: &[u32], args: &[C64], h: impl Fn(u32, C64) -> C64) -> C64 {
    let n = args.len();
    let e = args[n - 1];
    if n == 1 {
        return h(orders[0], e);
    }
    if orders[1..n - 1].iter().any(|o| *o > 0) {
        return C64::zero();
    }
    let p_part = match orders[0] {
        0 => args[0],
        1 => C64::one(),
        _ => return C64::zero(),
    };
    p_part * h(orders[n - 1], e)
}

/// `f = p · E²`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PolyModel;

impl OpaqueModel for PolyModel {
    fn name(&self) -> &str {
        "poly"
    }

    fn value(&self, args: &[C64]) -> C64 {
        separable(&vec![0; args.len()], args, poly_h)
    }

    fn partial(&self, orders: &[u32], args: &[C64]) -> Option<C64> {
        Some(separable(orders, args, poly_h))
    }
}

fn poly_h(k: u32, e: C64) -> C64 {
    match k {
        0 => e * e,
        1 => e * 2.0,
        2 => C64::new(2.0, 0.0),
        _ => C64::zero(),
    }
}

/// `f = p / (1 + E²)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct RationalModel;

impl OpaqueModel for RationalModel {
    fn name(&self) -> &str {
        "rational"
    }

    fn value(&self, args: &[C64]) -> C64 {
        separable(&vec![0; args.len()], args, rational_h)
    }

    fn partial(&self, orders: &[u32], args: &[C64]) -> Option<C64> {
        Some(separable(orders, args, rational_h))
    }
}

/// k-th derivative of `1/(1+E²)` from `(1+E²)h = 1` differentiated k times:
/// `(1+E²)h⁽ᵏ⁾ + 2kE h⁽ᵏ⁻¹⁾ + k(k-1) h⁽ᵏ⁻²⁾ = 0`.
fn rational_h(k: u32, e: C64) -> C64 {
    let q = C64::one() + e * e;
    let mut prev2 = C64::zero();
    let mut prev = q.inv();
    for j in 1..=k {
        let jf = j as f64;
        let next = -(e * (2.0 * jf) * prev + prev2 * (jf * (jf - 1.0))) / q;
        prev2 = prev;
        prev = next;
    }
    prev
}

/// `f = p · exp(E)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpModel;

impl OpaqueModel for ExpModel {
    fn name(&self) -> &str {
        "exp"
    }

    fn value(&self, args: &[C64]) -> C64 {
        separable(&vec![0; args.len()], args, |_, e| e.exp())
    }

    fn partial(&self, orders: &[u32], args: &[C64]) -> Option<C64> {
        Some(separable(orders, args, |_, e| e.exp()))
    }
}

/// The three shipped models, in a fixed order.
pub fn shipped_models() -> Vec<Arc<dyn OpaqueModel>> {
    vec![Arc::new(PolyModel), Arc::new(RationalModel), Arc::new(ExpModel)]
}

type ValueFn = dyn Fn(&[C64]) -> C64 + Send + Sync;

/// Model from a closure; partials fall back to finite differences.
#[derive(Clone)]
pub struct ClosureModel {
    name: String,
    f: Arc<ValueFn>,
}

impl ClosureModel {
    pub fn new(name: &str, f: impl Fn(&[C64]) -> C64 + Send + Sync + 'static) -> Self {
        ClosureModel { name: name.to_string(), f: Arc::new(f) }
    }
}

impl OpaqueModel for ClosureModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, args: &[C64]) -> C64 {
        (self.f)(args)
    }
}
