//! Numeric evaluation, finite differences and identity verification.

mod fd;
mod models;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::symexpr::{Expr, Node, PartialAtom};

pub use fd::{fd_commutator_pe, fd_derivative, fd_whole, FdError, NESTED_STEP, STEP};
pub use models::{shipped_models, ClosureModel, ExpModel, OpaqueModel, PolyModel, RationalModel};
pub use verify::{
    verify_identity, verify_with, Check, FailureDiagnostic, Sampler, Tolerance, VerificationReport, Verdict,
    VerifyOptions,
};

pub type C64 = Complex64;

/// Magnitudes below this are treated as zero when dividing.
pub const SINGULAR_EPS: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("no model bound for opaque function `{0}`")]
    UnboundOpaque(String),
    #[error("division by a value of magnitude {0:e}")]
    Singular(f64),
    #[error("non-finite result")]
    Overflow,
    #[error("unexpanded chain-rule placeholder")]
    Placeholder,
}

/// Values for symbols plus models for opaque functions.
#[derive(Clone, Default)]
pub struct NumericBinding {
    values: BTreeMap<String, C64>,
    models: BTreeMap<String, Arc<dyn OpaqueModel>>,
}

impl fmt::Debug for NumericBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NumericBinding")
            .field("values", &self.values)
            .field("models", &self.models.iter().map(|(k, m)| (k, m.name())).collect::<Vec<_>>())
            .finish()
    }
}

impl NumericBinding {
    pub fn new() -> Self {
        NumericBinding::default()
    }

    pub fn set(&mut self, name: &str, value: impl Into<C64>) {
        self.values.insert(name.to_string(), value.into());
    }

    pub fn with(mut self, name: &str, value: impl Into<C64>) -> Self {
        self.set(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<C64> {
        self.values.get(name).copied()
    }

    pub fn values(&self) -> impl Iterator<Item = (&String, &C64)> {
        self.values.iter()
    }

    pub fn bind_model(&mut self, function: &str, model: Arc<dyn OpaqueModel>) {
        self.models.insert(function.to_string(), model);
    }

    pub fn with_model(mut self, function: &str, model: Arc<dyn OpaqueModel>) -> Self {
        self.bind_model(function, model);
        self
    }

    pub fn model(&self, function: &str) -> Option<&Arc<dyn OpaqueModel>> {
        self.models.get(function)
    }
}

fn check(v: C64) -> Result<C64, EvalError> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Overflow)
    }
}

/// Evaluates `e` under `b` in double precision.
pub fn evaluate(e: &Expr, b: &NumericBinding) -> Result<C64, EvalError> {
    let v = match e.node() {
        Node::Const(c) => {
            let (re, im) = c.to_f64_pair();
            C64::new(re, im)
        }
        Node::Sym(s) => b.get(s.name()).ok_or_else(|| EvalError::Unbound(s.name().to_string()))?,
        Node::Sum(xs) => {
            let mut acc = C64::zero();
            for x in xs {
                acc += evaluate(x, b)?;
            }
            acc
        }
        Node::Product(xs) => {
            let mut acc = C64::new(1.0, 0.0);
            for x in xs {
                acc *= evaluate(x, b)?;
            }
            acc
        }
        Node::Pow(base, r) => {
            let x = evaluate(base, b)?;
            if *r.numer() < 0 && x.norm() < SINGULAR_EPS {
                return Err(EvalError::Singular(x.norm()));
            }
            if r.is_integer() {
                let n = r.to_integer();
                match i32::try_from(n) {
                    Ok(n) => x.powi(n),
                    Err(_) => x.powf(n as f64),
                }
            } else if *r == num_rational::Rational64::new(1, 2) {
                x.sqrt()
            } else if x.norm() == 0.0 {
                C64::zero()
            } else {
                x.powf(r.to_f64().unwrap_or(f64::NAN))
            }
        }
        Node::Apply(app) => {
            let model = b.model(app.sig.name.name()).ok_or_else(|| EvalError::UnboundOpaque(app.sig.name.to_string()))?;
            let args = args_of(&app.args, b)?;
            model.value(&args)
        }
        Node::Partial(p) => partial_value(p, b)?,
        Node::Rep(_) => return Err(EvalError::Placeholder),
    };
    check(v)
}

fn args_of(args: &[crate::symexpr::Symbol], b: &NumericBinding) -> Result<Vec<C64>, EvalError> {
    args.iter().map(|a| b.get(a.name()).ok_or_else(|| EvalError::Unbound(a.name().to_string()))).collect()
}

fn partial_value(p: &PartialAtom, b: &NumericBinding) -> Result<C64, EvalError> {
    let name = p.app.sig.name.name();
    let model = b.model(name).ok_or_else(|| EvalError::UnboundOpaque(name.to_string()))?;
    let args = args_of(&p.app.args, b)?;
    Ok(model_partial(model.as_ref(), &p.orders, &args))
}

/// Analytic partial when the model has one, otherwise nested central
/// differences with step [`STEP`] per order.
pub fn model_partial(model: &dyn OpaqueModel, orders: &[u32], args: &[C64]) -> C64 {
    if orders.iter().all(|o| *o == 0) {
        return model.value(args);
    }
    if let Some(v) = model.partial(orders, args) {
        return v;
    }
    let slot = orders.iter().position(|o| *o > 0).expect("some nonzero order");
    let mut lower = orders.to_vec();
    lower[slot] -= 1;
    let (mut up, mut down) = (args.to_vec(), args.to_vec());
    up[slot] += STEP;
    down[slot] -= STEP;
    (model_partial(model, &lower, &up) - model_partial(model, &lower, &down)) / (2.0 * STEP)
}
