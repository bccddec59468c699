//! Centered finite differences, including derivatives along a constraint
//! surface and the nested momentum/energy commutator.

use thiserror::Error;

use super::{evaluate, EvalError, NumericBinding, C64};
use crate::depctx::{resolve_near, DependencyContext, SampleError, EXCLUDED_RADIUS};
use crate::symexpr::{Expr, Symbol};

/// Default step for first-order differences.
pub const STEP: f64 = 1e-5;
/// Default step for nested differences.
pub const NESTED_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Solve(#[from] SampleError),
    #[error("step {0:e} does not move `{1}`")]
    StepUnderflow(f64, String),
    #[error("energy {0} is too close to zero")]
    Singular(f64),
    #[error("index {0} is outside 1..={1}")]
    BadIndex(usize, usize),
    #[error("`{0}` is not bound")]
    Unbound(String),
}

fn displaced(b: &NumericBinding, v: &str, h: f64) -> Result<(NumericBinding, NumericBinding), FdError> {
    let x = b.get(v).ok_or_else(|| FdError::Unbound(v.to_string()))?;
    if h <= 0.0 || x.re + h == x.re {
        return Err(FdError::StepUnderflow(h, v.to_string()));
    }
    let (mut up, mut down) = (b.clone(), b.clone());
    up.set(v, x + h);
    down.set(v, x - h);
    Ok((up, down))
}

/// Plain centered difference of `e` in `v`, all other values fixed.
pub fn fd_derivative(e: &Expr, v: &Symbol, b: &NumericBinding, h: f64) -> Result<C64, FdError> {
    let (up, down) = displaced(b, v.name(), h)?;
    Ok((evaluate(e, &up)? - evaluate(e, &down)?) / (2.0 * h))
}

/// Centered difference of `e` along the constraint surface: dependents are
/// re-solved (nearest root, same sheet) at each displaced point.
pub fn fd_whole(e: &Expr, v: &Symbol, ctx: &DependencyContext, b: &NumericBinding, h: f64) -> Result<C64, FdError> {
    let (up, down) = displaced(b, v.name(), h)?;
    if ctx.is_dependent(v.name()) {
        return Ok((evaluate(e, &up)? - evaluate(e, &down)?) / (2.0 * h));
    }
    let up = resolve_near(ctx, &up)?;
    let down = resolve_near(ctx, &down)?;
    Ok((evaluate(e, &up)? - evaluate(e, &down)?) / (2.0 * h))
}

/// `[W_i, ∂_E] f` by nested centered differences of an explicit function of
/// `(p_1, .., p_d, E)`, with `W_i g = ∂_i g + (p_i/E) ∂_E g`. `i` is 1-based.
pub fn fd_commutator_pe<F>(f: F, i: usize, point: &[f64], h: f64) -> Result<f64, FdError>
where
    F: Fn(&[f64]) -> f64,
{
    let d = point.len().saturating_sub(1);
    if i == 0 || i > d {
        return Err(FdError::BadIndex(i, d));
    }
    let e_slot = d;
    let e = point[e_slot];
    if e.abs() < EXCLUDED_RADIUS.max(4.0 * h) {
        return Err(FdError::Singular(e));
    }
    if h <= 0.0 || e + h == e {
        return Err(FdError::StepUnderflow(h, "E".into()));
    }

    let diff = |g: &dyn Fn(&[f64]) -> f64, slot: usize, x: &[f64]| {
        let (mut up, mut down) = (x.to_vec(), x.to_vec());
        up[slot] += h;
        down[slot] -= h;
        (g(&up) - g(&down)) / (2.0 * h)
    };
    let fe = |x: &[f64]| diff(&f, e_slot, x);
    let whole = |g: &dyn Fn(&[f64]) -> f64, x: &[f64]| diff(g, i - 1, x) + x[i - 1] / x[e_slot] * diff(g, e_slot, x);
    let wf = |x: &[f64]| whole(&f, x);

    Ok(whole(&fe, point) - diff(&wf, e_slot, point))
}
