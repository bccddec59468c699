//! Sampled comparison of two sides of an identity.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate, NumericBinding, OpaqueModel, C64};
use crate::depctx::{sample_off_shell, sample_point, Branch, DependencyContext, SampleSpec, Sign};
use crate::symexpr::Expr;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Tolerance { rel, ..Tolerance::default() }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-6, abs: 1e-8 }
    }
}

/// Where sample points come from.
#[derive(Clone, Debug, PartialEq)]
pub enum Sampler {
    OnShell(SampleSpec),
    /// Independent box draw; dependents `sign·U[1/2, 2]`.
    OffShell(Sign),
}

impl Sampler {
    pub fn on_shell(sign: Sign) -> Self {
        Sampler::OnShell(SampleSpec::sheet(sign))
    }

    pub fn label(&self) -> String {
        let s = |sign: &Sign| if *sign == Sign::Plus { "+" } else { "-" };
        match self {
            Sampler::OnShell(spec) => match spec.branch {
                Branch::Sheet(sign) => format!("on-shell{}", s(&sign)),
                Branch::Bracket(a, b) => format!("on-shell[{a},{b}]"),
            },
            Sampler::OffShell(sign) => format!("off-shell{}", s(sign)),
        }
    }
}

#[derive(Clone)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    pub sampler: Sampler,
    pub tol: Tolerance,
    /// Each model is bound to every opaque function of the context and
    /// checked at every sample point. Empty means no models.
    pub models: Vec<Arc<dyn OpaqueModel>>,
}

impl VerifyOptions {
    pub fn new(samples: usize, seed: u64, sampler: Sampler, tol: Tolerance) -> Self {
        VerifyOptions { samples, seed, sampler, tol, models: Vec::new() }
    }

    pub fn with_models(mut self, models: Vec<Arc<dyn OpaqueModel>>) -> Self {
        self.models = models;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureDiagnostic {
    pub sample: usize,
    pub model: Option<String>,
    pub binding: BTreeMap<String, f64>,
    pub lhs: Option<[f64; 2]>,
    pub rhs: Option<[f64; 2]>,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
    pub error: Option<String>,
}

/// Diagnostics beyond this many failures are counted but not listed.
pub const MAX_LISTED_FAILURES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub failures: usize,
    /// Failures where no sample point could be produced.
    pub sampling_errors: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub tolerance: Tolerance,
    pub sampler: String,
    pub seed: u64,
    pub diagnostics: Vec<FailureDiagnostic>,
    pub verdict: Verdict,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Deterministic JSON.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// One comparison: both sides, or the reason they could not be computed.
pub type Check = Result<(C64, C64), String>;

struct Outcome {
    sample: usize,
    model: Option<String>,
    binding: BTreeMap<String, f64>,
    check: Check,
    unsampled: bool,
}

fn binding_map(b: &NumericBinding) -> BTreeMap<String, f64> {
    b.values().map(|(k, v)| (k.clone(), v.re)).collect()
}

fn pair(c: C64) -> [f64; 2] {
    [c.re, c.im]
}

/// Runs `check` on every sample point (and every model) and reduces the
/// results in index order, so the report does not depend on scheduling.
pub fn verify_with<F>(ctx: &DependencyContext, opts: &VerifyOptions, check: F) -> VerificationReport
where
    F: Fn(&NumericBinding) -> Check + Sync,
{
    let off = match &opts.sampler {
        Sampler::OffShell(sign) => Some(sample_off_shell(ctx, opts.samples, opts.seed, *sign)),
        Sampler::OnShell(_) => None,
    };
    let models: Vec<Option<&Arc<dyn OpaqueModel>>> =
        if opts.models.is_empty() { vec![None] } else { opts.models.iter().map(Some).collect() };

    let outcomes: Vec<Vec<Outcome>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| {
            let point = match (&off, &opts.sampler) {
                (Some(pts), _) => Ok(pts[i].clone()),
                (None, Sampler::OnShell(spec)) => sample_with_index(ctx, opts.seed, i, spec),
                (None, Sampler::OffShell(_)) => unreachable!(),
            };
            models
                .iter()
                .map(|m| {
                    let model = m.map(|m| m.name().to_string());
                    match &point {
                        Err(e) => Outcome { sample: i, model, binding: BTreeMap::new(), check: Err(e.clone()), unsampled: true },
                        Ok(p) => {
                            let mut b = p.clone();
                            if let Some(m) = m {
                                for sig in ctx.opaques() {
                                    b.bind_model(sig.name.name(), (*m).clone());
                                }
                            }
                            Outcome { sample: i, model, binding: binding_map(p), check: check(&b), unsampled: false }
                        }
                    }
                })
                .collect()
        })
        .collect();

    let mut report = VerificationReport {
        samples: 0,
        failures: 0,
        sampling_errors: 0,
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        tolerance: opts.tol,
        sampler: opts.sampler.label(),
        seed: opts.seed,
        diagnostics: Vec::new(),
        verdict: Verdict::Pass,
    };
    for o in outcomes.into_iter().flatten() {
        report.samples += 1;
        let diag = match o.check {
            Ok((l, r)) => {
                let abs = (l - r).norm();
                let scale = l.norm().max(r.norm());
                let rel = if scale > 0.0 { abs / scale } else { 0.0 };
                let bad = !abs.is_finite() || (abs > opts.tol.abs && rel > opts.tol.rel);
                if abs.is_finite() {
                    report.max_abs_err = report.max_abs_err.max(abs);
                    report.max_rel_err = report.max_rel_err.max(rel);
                }
                bad.then(|| FailureDiagnostic {
                    sample: o.sample,
                    model: o.model,
                    binding: o.binding,
                    lhs: Some(pair(l)),
                    rhs: Some(pair(r)),
                    abs_err: Some(abs),
                    rel_err: Some(rel),
                    error: None,
                })
            }
            Err(msg) => Some(FailureDiagnostic {
                sample: o.sample,
                model: o.model,
                binding: o.binding,
                lhs: None,
                rhs: None,
                abs_err: None,
                rel_err: None,
                error: Some(msg),
            }),
        };
        if let Some(d) = diag {
            report.failures += 1;
            report.sampling_errors += usize::from(o.unsampled);
            if report.diagnostics.len() < MAX_LISTED_FAILURES {
                report.diagnostics.push(d);
            }
        }
    }
    report.verdict = if report.failures == 0 { Verdict::Pass } else { Verdict::Fail };
    report
}

fn sample_with_index(ctx: &DependencyContext, seed: u64, i: usize, spec: &SampleSpec) -> Result<NumericBinding, String> {
    sample_point(ctx, seed, i, spec).map_err(|e| e.to_string())
}

/// Compares `lhs` and `rhs` numerically at sampled points.
pub fn verify_identity(lhs: &Expr, rhs: &Expr, ctx: &DependencyContext, opts: &VerifyOptions) -> VerificationReport {
    verify_with(ctx, opts, |b| {
        let l = evaluate(lhs, b).map_err(|e| format!("lhs: {e}"))?;
        let r = evaluate(rhs, b).map_err(|e| format!("rhs: {e}"))?;
        Ok((l, r))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::parse_expr;

    fn shell() -> DependencyContext {
        DependencyContext::parse(
            "independent p1 p2 p3\nparam m\ndependent E\nconstraint E^2 - p1^2 - p2^2 - p3^2 - m^2 = 0 solves E\n\
             opaque f(p1,p2,p3,E)\n",
        )
        .unwrap()
    }

    #[test]
    fn negative_control_fails_with_diagnostics() {
        let ctx = shell();
        let l = parse_expr("p1", ctx.table()).unwrap();
        let r = parse_expr("p2", ctx.table()).unwrap();
        let opts = VerifyOptions::new(10, 0, Sampler::on_shell(Sign::Plus), Tolerance::default());
        let rep = verify_identity(&l, &r, &ctx, &opts);
        assert_eq!(rep.verdict, Verdict::Fail);
        assert_eq!(rep.failures, 10);
        assert!(!rep.diagnostics.is_empty());
    }

    #[test]
    fn shell_identity_passes_and_is_deterministic() {
        let ctx = shell();
        let l = parse_expr("E^2", ctx.table()).unwrap();
        let r = parse_expr("p1^2 + p2^2 + p3^2 + m^2", ctx.table()).unwrap();
        let opts = VerifyOptions::new(40, 7, Sampler::on_shell(Sign::Minus), Tolerance::rel(1e-12));
        let a = verify_identity(&l, &r, &ctx, &opts);
        assert!(a.passed());
        let b = verify_identity(&l, &r, &ctx, &opts);
        assert_eq!(a.to_json().to_string(), b.to_json().to_string());
    }

    #[test]
    fn models_multiply_the_checks() {
        let ctx = shell();
        let f = parse_expr("f", ctx.table()).unwrap();
        let opts = VerifyOptions::new(5, 1, Sampler::OffShell(Sign::Plus), Tolerance::default())
            .with_models(crate::numcheck::shipped_models());
        let rep = verify_identity(&f, &f, &ctx, &opts);
        assert_eq!(rep.samples, 15);
        assert!(rep.passed());
    }
}
