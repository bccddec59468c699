//! Deterministic sampling of points on (or near) the constraint surface.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{binding_text, DependencyContext};
use crate::numcheck::{evaluate, NumericBinding, C64};
use crate::symexpr::{Expr, Symbol};
use crate::wholederiv::plain_partial;

/// Dependents closer to zero than this are rejected and redrawn.
pub const EXCLUDED_RADIUS: f64 = 1e-6;

const ROOT_TOL: f64 = 1e-12;
const MAX_REDRAWS: usize = 64;

/// Sheet of a two-sheeted constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_i32(s: i32) -> Option<Sign> {
        match s {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }
}

/// How a dependent's root is located.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Branch {
    /// Root of the given sign nearest to zero, found by a geometric scan.
    Sheet(Sign),
    /// First root found scanning the interval from left to right.
    Bracket(f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSpec {
    pub branch: Branch,
    /// Branch overrides per dependent.
    pub branches: BTreeMap<String, Branch>,
    /// Fixed values that replace the random draw.
    pub overrides: BTreeMap<String, f64>,
}

impl SampleSpec {
    pub fn sheet(sign: Sign) -> Self {
        SampleSpec { branch: Branch::Sheet(sign), branches: BTreeMap::new(), overrides: BTreeMap::new() }
    }

    pub fn bracket(lo: f64, hi: f64) -> Self {
        SampleSpec { branch: Branch::Bracket(lo, hi), branches: BTreeMap::new(), overrides: BTreeMap::new() }
    }

    pub fn with_override(mut self, name: &str, value: f64) -> Self {
        self.overrides.insert(name.to_string(), value);
        self
    }

    fn branch_for(&self, dep: &str) -> Branch {
        self.branches.get(dep).copied().unwrap_or(self.branch)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("no constraint determines `{0}`")]
    NoConstraint(String),
    #[error("could not bracket a root for `{dependent}` at {binding}")]
    NoBracket { dependent: String, binding: String },
    #[error("root solve for `{dependent}` did not converge at {binding}")]
    NotConverged { dependent: String, binding: String },
    #[error("evaluation failed while solving for `{dependent}`: {message}")]
    Evaluation { dependent: String, message: String },
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn draw_free(ctx: &DependencyContext, rng: &mut ChaCha8Rng, overrides: &BTreeMap<String, f64>) -> NumericBinding {
    let mut b = NumericBinding::new();
    for s in ctx.independents() {
        let x: f64 = rng.random_range(-2.0..2.0);
        b.set(s.name(), overrides.get(s.name()).copied().unwrap_or(x));
    }
    for s in ctx.parameters() {
        let x: f64 = rng.random_range(0.5..2.0);
        b.set(s.name(), overrides.get(s.name()).copied().unwrap_or(x));
    }
    // commutator values have no numeric model; they evaluate as zero
    for s in ctx.commutator_symbols() {
        b.set(s.name(), 0.0);
    }
    b
}

/// `count` on-shell bindings on the given sheet.
pub fn sample_on_shell(
    ctx: &DependencyContext,
    count: usize,
    seed: u64,
    sign: Sign,
) -> Result<Vec<NumericBinding>, SampleError> {
    sample_with(ctx, count, seed, &SampleSpec::sheet(sign))
}

/// Sample `index` is drawn from its own stream, so results do not depend on
/// `count` or on evaluation order.
pub fn sample_with(
    ctx: &DependencyContext,
    count: usize,
    seed: u64,
    spec: &SampleSpec,
) -> Result<Vec<NumericBinding>, SampleError> {
    (0..count).map(|i| sample_point(ctx, seed, i, spec)).collect()
}

/// Sample number `index` of the stream seeded by `seed`.
pub fn sample_point(
    ctx: &DependencyContext,
    seed: u64,
    index: usize,
    spec: &SampleSpec,
) -> Result<NumericBinding, SampleError> {
    let mut rng = rng_for(seed, index);
    let mut last = None;
    for _ in 0..MAX_REDRAWS {
        let b = draw_free(ctx, &mut rng, &spec.overrides);
        match solve_all(ctx, b, spec) {
            Ok(b) => return Ok(b),
            Err(e @ SampleError::NoConstraint(_)) => return Err(e),
            Err(e) => last = Some(e),
        }
        if spec.overrides.len() >= ctx.independents().len() + ctx.parameters().len() {
            // nothing left to redraw
            break;
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Off-shell box: dependents are drawn as `sign·U[1/2, 2]`.
pub fn sample_off_shell(
    ctx: &DependencyContext,
    count: usize,
    seed: u64,
    sign: Sign,
) -> Vec<NumericBinding> {
    (0..count)
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let mut b = draw_free(ctx, &mut rng, &BTreeMap::new());
            for d in ctx.dependents() {
                let x: f64 = rng.random_range(0.5..2.0);
                b.set(d.name(), sign.value() * x);
            }
            b
        })
        .collect()
}

/// Fills in the dependents of `values` from their constraints.
pub fn complete_on_shell(
    ctx: &DependencyContext,
    values: &BTreeMap<String, f64>,
    branch: Branch,
) -> Result<NumericBinding, SampleError> {
    let mut b = NumericBinding::new();
    for (k, v) in values {
        b.set(k, *v);
    }
    for s in ctx.commutator_symbols() {
        if b.get(s.name()).is_none() {
            b.set(s.name(), 0.0);
        }
    }
    let spec = SampleSpec { branch, branches: BTreeMap::new(), overrides: BTreeMap::new() };
    solve_all(ctx, b, &spec)
}

fn solve_all(ctx: &DependencyContext, mut b: NumericBinding, spec: &SampleSpec) -> Result<NumericBinding, SampleError> {
    for d in ctx.dependents() {
        let c = ctx.constraint_for(d.name()).ok_or_else(|| SampleError::NoConstraint(d.name().to_string()))?;
        let x = solve_root(&c.g, d, &b, spec.branch_for(d.name()))?;
        b.set(d.name(), x);
    }
    Ok(b)
}

struct Scalar1D<'a> {
    g: &'a Expr,
    gu: Expr,
    u: &'a Symbol,
    b: NumericBinding,
}

impl Scalar1D<'_> {
    fn at(&mut self, x: f64) -> Result<f64, SampleError> {
        self.b.set(self.u.name(), x);
        real(evaluate(self.g, &self.b), self.u)
    }

    fn slope(&mut self, x: f64) -> Result<f64, SampleError> {
        self.b.set(self.u.name(), x);
        real(evaluate(&self.gu, &self.b), self.u)
    }

    fn fail_bracket(&self) -> SampleError {
        SampleError::NoBracket { dependent: self.u.name().to_string(), binding: binding_text(&self.b) }
    }

    fn fail_converge(&self) -> SampleError {
        SampleError::NotConverged { dependent: self.u.name().to_string(), binding: binding_text(&self.b) }
    }

    /// Bisection on `[lo, hi]` followed by Newton polishing.
    fn refine(&mut self, mut lo: f64, mut hi: f64) -> Result<f64, SampleError> {
        let mut flo = self.at(lo)?;
        if flo == 0.0 {
            return Ok(lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let fm = self.at(mid)?;
            if fm == 0.0 {
                return Ok(mid);
            }
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        self.polish(&mut x)?;
        Ok(x)
    }

    fn polish(&mut self, x: &mut f64) -> Result<(), SampleError> {
        let mut fx = self.at(*x)?;
        for _ in 0..4 {
            if fx.abs() <= ROOT_TOL * 1e-2 {
                break;
            }
            let s = self.slope(*x)?;
            if s == 0.0 || !s.is_finite() {
                break;
            }
            let next = *x - fx / s;
            let fn_ = self.at(next)?;
            if fn_.abs() >= fx.abs() {
                break;
            }
            *x = next;
            fx = fn_;
        }
        if fx.abs() > ROOT_TOL {
            self.b.set(self.u.name(), *x);
            return Err(self.fail_converge());
        }
        Ok(())
    }
}

fn real(v: Result<C64, crate::numcheck::EvalError>, u: &Symbol) -> Result<f64, SampleError> {
    match v {
        Ok(c) if c.re.is_finite() => Ok(c.re),
        Ok(c) => Err(SampleError::Evaluation { dependent: u.name().to_string(), message: format!("non-finite value {c}") }),
        Err(e) => Err(SampleError::Evaluation { dependent: u.name().to_string(), message: e.to_string() }),
    }
}

fn solve_root(g: &Expr, u: &Symbol, b: &NumericBinding, branch: Branch) -> Result<f64, SampleError> {
    let mut f = Scalar1D { g, gu: plain_partial(g, u), u, b: b.clone() };
    let (lo, hi) = match branch {
        Branch::Sheet(sign) => {
            let s = sign.value();
            let mut prev_x = s * EXCLUDED_RADIUS;
            let mut prev = f.at(prev_x)?;
            let mut found = None;
            for k in 1..=40 {
                let x = s * EXCLUDED_RADIUS * 2f64.powi(k);
                let fx = f.at(x)?;
                if fx == 0.0 || (fx < 0.0) != (prev < 0.0) {
                    found = Some((prev_x, x));
                    break;
                }
                prev_x = x;
                prev = fx;
            }
            found.ok_or_else(|| f.fail_bracket())?
        }
        Branch::Bracket(a, z) => {
            const STEPS: usize = 256;
            let mut prev_x = a;
            let mut prev = f.at(a)?;
            let mut found = None;
            for k in 1..=STEPS {
                let x = a + (z - a) * k as f64 / STEPS as f64;
                let fx = f.at(x)?;
                if fx == 0.0 || (fx < 0.0) != (prev < 0.0) {
                    found = Some((prev_x, x));
                    break;
                }
                prev_x = x;
                prev = fx;
            }
            found.ok_or_else(|| f.fail_bracket())?
        }
    };
    let x = f.refine(lo, hi)?;
    if x.abs() < EXCLUDED_RADIUS {
        return Err(f.fail_bracket());
    }
    Ok(x)
}

/// Re-solves every dependent of `b` starting from its current value, keeping
/// the nearest root. Used after displacing an independent variable.
pub fn resolve_near(ctx: &DependencyContext, b: &NumericBinding) -> Result<NumericBinding, SampleError> {
    let mut out = b.clone();
    for d in ctx.dependents() {
        let c = ctx.constraint_for(d.name()).ok_or_else(|| SampleError::NoConstraint(d.name().to_string()))?;
        let x0 = b.get(d.name()).map(|v| v.re).unwrap_or(0.0);
        let mut f = Scalar1D { g: &c.g, gu: plain_partial(&c.g, d), u: d, b: out.clone() };
        let x = newton_near(&mut f, x0)?;
        out.set(d.name(), x);
    }
    Ok(out)
}

fn newton_near(f: &mut Scalar1D<'_>, x0: f64) -> Result<f64, SampleError> {
    let mut x = x0;
    for _ in 0..60 {
        let fx = f.at(x)?;
        if fx.abs() <= ROOT_TOL * 1e-2 {
            return Ok(x);
        }
        let s = f.slope(x)?;
        if s == 0.0 || !s.is_finite() {
            break;
        }
        let next = x - fx / s;
        if (next - x).abs() <= 1e-16 * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    if f.at(x)?.abs() <= ROOT_TOL {
        return Ok(x);
    }
    // local bracket around the starting point
    let mut delta = 1e-6 * x0.abs().max(1.0);
    for _ in 0..40 {
        for (lo, hi) in [(x0 - delta, x0), (x0, x0 + delta)] {
            let (fl, fh) = (f.at(lo)?, f.at(hi)?);
            if (fl < 0.0) != (fh < 0.0) || fl == 0.0 || fh == 0.0 {
                return f.refine(lo, hi);
            }
        }
        delta *= 2.0;
    }
    Err(f.fail_bracket())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shell() -> DependencyContext {
        DependencyContext::parse(
            "independent p1 p2 p3\nparam m\ndependent E\nconstraint E^2 - p1^2 - p2^2 - p3^2 - m^2 = 0 solves E\n",
        )
        .unwrap()
    }

    #[test]
    fn upper_sheet_is_above_mass() {
        let ctx = shell();
        for b in sample_on_shell(&ctx, 20, 3, Sign::Plus).unwrap() {
            let e = b.get("E").unwrap().re;
            let m = b.get("m").unwrap().re;
            assert!(e >= m && m > 0.0);
            let g = evaluate(&ctx.constraints()[0].g, &b).unwrap();
            assert!(g.norm() <= 1e-12);
        }
    }

    #[test]
    fn lower_sheet_is_below_minus_mass() {
        for b in sample_on_shell(&shell(), 20, 3, Sign::Minus).unwrap() {
            assert!(b.get("E").unwrap().re <= -b.get("m").unwrap().re);
        }
    }

    #[test]
    fn three_four_five() {
        let ctx = shell();
        let spec = SampleSpec::sheet(Sign::Plus)
            .with_override("p1", 3.0)
            .with_override("p2", 0.0)
            .with_override("p3", 0.0)
            .with_override("m", 4.0);
        let b = sample_with(&ctx, 1, 0, &spec).unwrap().pop().unwrap();
        assert!((b.get("E").unwrap().re - 5.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_index() {
        let ctx = shell();
        let a = sample_on_shell(&ctx, 5, 11, Sign::Plus).unwrap();
        let b = sample_on_shell(&ctx, 3, 11, Sign::Plus).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values().collect::<Vec<_>>(), y.values().collect::<Vec<_>>());
        }
    }

    #[test]
    fn re_solve_follows_the_sheet() {
        let ctx = shell();
        let mut b = sample_on_shell(&ctx, 1, 5, Sign::Minus).unwrap().pop().unwrap();
        let p1 = b.get("p1").unwrap().re;
        b.set("p1", p1 + 1e-3);
        let moved = resolve_near(&ctx, &b).unwrap();
        assert!(moved.get("E").unwrap().re < 0.0);
        assert!(evaluate(&ctx.constraints()[0].g, &moved).unwrap().norm() <= 1e-12);
    }
}
