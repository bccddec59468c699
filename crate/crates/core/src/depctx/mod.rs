//! Dependency contexts: which symbols are independent, which depend on them,
//! and the expressions standing for the dependents' partials.

mod sample;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::numcheck::{evaluate, NumericBinding};
use crate::symexpr::{
    equals_canonical, normalize, CommutatorTable, Expr, OpaqueSig, Symbol, SymbolKind, SymbolTable,
};
use crate::textio::{self, ParseError, SourceSpan};
use crate::wholederiv::plain_partial;

pub use sample::{
    complete_on_shell, resolve_near, sample_off_shell, sample_on_shell, sample_point, sample_with, Branch, SampleError,
    SampleSpec, Sign, EXCLUDED_RADIUS,
};

/// Convention for products of chain-rule coefficients in repeated whole
/// derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderingMode {
    /// Every symbol commutes; declared commutators are treated as zero.
    Commuting,
    /// Products of two chain-rule coefficients are symmetrized before
    /// normal ordering.
    Paper,
    /// Written order is kept and normal-ordered at the end.
    #[default]
    Operator,
}

impl OrderingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OrderingMode::Commuting => "commuting",
            OrderingMode::Paper => "paper",
            OrderingMode::Operator => "operator",
        }
    }
}

impl fmt::Display for OrderingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OrderingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "commuting" => Ok(OrderingMode::Commuting),
            "paper" => Ok(OrderingMode::Paper),
            "operator" => Ok(OrderingMode::Operator),
            _ => Err(format!("unknown ordering mode `{s}` (expected commuting, paper or operator)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Declared,
    Derived,
}

/// Expression used for `∂dependent/∂independent`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Representation {
    pub dependent: Symbol,
    pub independent: Symbol,
    pub expr: Expr,
    pub origin: Origin,
}

/// `g = 0` determining `solves`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub g: Expr,
    pub solves: Symbol,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Option<SourceSpan>,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, span: Option<SourceSpan>) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into(), span }
    }

    pub fn warning(message: impl Into<String>, span: Option<SourceSpan>) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into(), span }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.span {
            Some(sp) => write!(f, "{sev} at {sp}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImplicitError {
    #[error("constraint does not determine {0}")]
    NotDetermined(String),
    #[error("constraint does not mention {0}")]
    NotMentioned(String),
}

/// `∂u/∂v` from `g(u, v, ..) = 0`: `-(∂g/∂v) / (∂g/∂u)`.
pub fn implicit_partial(g: &Expr, u: &Symbol, v: &Symbol) -> Result<Expr, ImplicitError> {
    if !g.mentions(u.name()) {
        return Err(ImplicitError::NotMentioned(u.name().to_string()));
    }
    let gu = plain_partial(g, u);
    if gu.is_zero() {
        return Err(ImplicitError::NotDetermined(u.name().to_string()));
    }
    let gv = plain_partial(g, v);
    Ok(normalize(&(-(gv * gu.recip()))))
}

/// Everything the `.ctx` parser collected, before derivation.
pub(crate) struct ContextParts {
    pub table: SymbolTable,
    pub independents: Vec<Symbol>,
    pub parameters: Vec<Symbol>,
    pub dependents: Vec<Symbol>,
    pub commutator_symbols: Vec<Symbol>,
    pub opaques: Vec<Arc<OpaqueSig>>,
    pub representations: Vec<(Symbol, Symbol, Expr, Option<SourceSpan>)>,
    pub constraints: Vec<(Constraint, Option<SourceSpan>)>,
    pub commutators: Vec<(Symbol, Symbol, Expr, Option<SourceSpan>)>,
    pub issues: Vec<Diagnostic>,
}

type Pair = (String, String);

#[derive(Clone, Debug, PartialEq, Eq)]
struct Inner {
    table: SymbolTable,
    independents: Vec<Symbol>,
    parameters: Vec<Symbol>,
    dependents: Vec<Symbol>,
    commutator_symbols: Vec<Symbol>,
    opaques: Vec<Arc<OpaqueSig>>,
    declared: BTreeMap<Pair, Representation>,
    derived: BTreeMap<Pair, Representation>,
    constraints: Vec<Constraint>,
    commutators: CommutatorTable,
    issues: Vec<Diagnostic>,
    ordering: OrderingMode,
}

/// Immutable, cheaply clonable dependency context.
#[derive(Clone, Debug)]
pub struct DependencyContext(Arc<Inner>);

impl PartialEq for DependencyContext {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl Eq for DependencyContext {}

impl DependencyContext {
    /// Parses `.ctx` source.
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        textio::parse_context(src)
    }

    pub(crate) fn assemble(parts: ContextParts) -> Self {
        let mut issues = parts.issues;
        let is_dep = |s: &Symbol| parts.dependents.iter().any(|d| d.name() == s.name());

        let mut declared = BTreeMap::new();
        for (dep, indep, expr, span) in parts.representations {
            let key = (dep.name().to_string(), indep.name().to_string());
            if expr.has_opaque() {
                issues.push(Diagnostic::error(
                    format!("representation ({dep},{indep}) uses an opaque function"),
                    span,
                ));
            }
            if let Some(other) = expr.symbols().into_iter().find(|s| is_dep(s) && s.name() != dep.name()) {
                issues.push(Diagnostic::error(
                    format!("representation ({dep},{indep}) depends on another dependent `{other}`"),
                    span,
                ));
            }
            if declared.contains_key(&key) {
                issues.push(Diagnostic::error(format!("duplicate representation ({dep},{indep})"), span));
                continue;
            }
            let rep = Representation { dependent: dep, independent: indep, expr: normalize(&expr), origin: Origin::Declared };
            declared.insert(key, rep);
        }

        let mut derived = BTreeMap::new();
        let mut constraints: Vec<Constraint> = Vec::new();
        for (c, span) in parts.constraints {
            if constraints.iter().any(|k| k.solves.name() == c.solves.name()) {
                issues.push(Diagnostic::error(format!("second constraint for `{}`", c.solves), span));
                continue;
            }
            if c.g.has_opaque() {
                issues.push(Diagnostic::error(format!("constraint for `{}` uses an opaque function", c.solves), span));
            }
            if let Some(other) = c.g.symbols().into_iter().find(|s| is_dep(s) && s.name() != c.solves.name()) {
                issues.push(Diagnostic::error(
                    format!("constraint for `{}` depends on another dependent `{other}`", c.solves),
                    span,
                ));
            }
            for v in &parts.independents {
                match implicit_partial(&c.g, &c.solves, v) {
                    Ok(expr) => {
                        let key = (c.solves.name().to_string(), v.name().to_string());
                        let rep = Representation {
                            dependent: c.solves.clone(),
                            independent: v.clone(),
                            expr,
                            origin: Origin::Derived,
                        };
                        derived.insert(key, rep);
                    }
                    Err(e) => {
                        issues.push(Diagnostic::error(e.to_string(), span));
                        break;
                    }
                }
            }
            constraints.push(c);
        }

        let mut commutators = CommutatorTable::new();
        for (a, b, value, span) in parts.commutators {
            if !value.classes().is_empty() {
                issues.push(Diagnostic::error(format!("commutator [{a},{b}] has a non-central value"), span));
                continue;
            }
            if let Err(prev) = commutators.insert(&a, &b, value) {
                issues.push(Diagnostic::error(
                    format!("commutator [{a},{b}] conflicts with earlier value {}", textio::print_text(&prev)),
                    span,
                ));
            }
        }

        DependencyContext(Arc::new(Inner {
            table: parts.table,
            independents: parts.independents,
            parameters: parts.parameters,
            dependents: parts.dependents,
            commutator_symbols: parts.commutator_symbols,
            opaques: parts.opaques,
            declared,
            derived,
            constraints,
            commutators,
            issues,
            ordering: OrderingMode::default(),
        }))
    }

    pub fn independents(&self) -> &[Symbol] {
        &self.0.independents
    }

    pub fn parameters(&self) -> &[Symbol] {
        &self.0.parameters
    }

    pub fn dependents(&self) -> &[Symbol] {
        &self.0.dependents
    }

    /// Central symbols introduced by commutator values.
    pub fn commutator_symbols(&self) -> &[Symbol] {
        &self.0.commutator_symbols
    }

    pub fn opaques(&self) -> &[Arc<OpaqueSig>] {
        &self.0.opaques
    }

    pub fn opaque(&self, name: &str) -> Option<&Arc<OpaqueSig>> {
        self.0.table.opaque(name)
    }

    pub fn table(&self) -> &SymbolTable {
        &self.0.table
    }

    pub fn symbol(&self, name: &str) -> Option<&Symbol> {
        self.0.table.get(name)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.0.constraints
    }

    pub fn constraint_for(&self, dependent: &str) -> Option<&Constraint> {
        self.0.constraints.iter().find(|c| c.solves.name() == dependent)
    }

    pub fn commutators(&self) -> &CommutatorTable {
        &self.0.commutators
    }

    /// Problems found while reading the context.
    pub fn issues(&self) -> &[Diagnostic] {
        &self.0.issues
    }

    pub fn ordering(&self) -> OrderingMode {
        self.0.ordering
    }

    pub fn with_ordering(&self, mode: OrderingMode) -> Self {
        if mode == self.0.ordering {
            return self.clone();
        }
        let mut inner = (*self.0).clone();
        inner.ordering = mode;
        DependencyContext(Arc::new(inner))
    }

    pub fn is_independent(&self, name: &str) -> bool {
        self.0.independents.iter().any(|s| s.name() == name)
    }

    pub fn is_dependent(&self, name: &str) -> bool {
        self.0.dependents.iter().any(|s| s.name() == name)
    }

    pub fn is_parameter(&self, name: &str) -> bool {
        self.0.parameters.iter().any(|s| s.name() == name)
    }

    /// The representation the derivative engine uses: declared if present,
    /// otherwise derived from a constraint.
    pub fn representation(&self, dependent: &str, independent: &str) -> Option<&Representation> {
        let key = (dependent.to_string(), independent.to_string());
        self.0.declared.get(&key).or_else(|| self.0.derived.get(&key))
    }

    pub fn declared_representation(&self, dependent: &str, independent: &str) -> Option<&Representation> {
        self.0.declared.get(&(dependent.to_string(), independent.to_string()))
    }

    pub fn derived_representation(&self, dependent: &str, independent: &str) -> Option<&Representation> {
        self.0.derived.get(&(dependent.to_string(), independent.to_string()))
    }

    /// Resolved representations in (dependent, independent) declaration order.
    pub fn representations(&self) -> impl Iterator<Item = &Representation> + '_ {
        self.0.dependents.iter().flat_map(move |d| {
            self.0.independents.iter().filter_map(move |v| self.representation(d.name(), v.name()))
        })
    }

    /// True if any declared symbol belongs to a nonzero commutativity class.
    pub fn has_noncommuting(&self) -> bool {
        self.0.table.symbols().any(|s| s.class() != 0)
    }

    /// Commutator table as seen by normal ordering under the current mode.
    pub fn ordering_table(&self) -> CommutatorTable {
        match self.0.ordering {
            OrderingMode::Commuting => self.0.commutators.to_commuting_limit(),
            _ => self.0.commutators.clone(),
        }
    }

    /// The same context with every dependent turned into a parameter.
    pub fn without_dependents(&self) -> Self {
        let mut src = String::new();
        let names = |xs: &[Symbol]| xs.iter().map(|s| s.name()).collect::<Vec<_>>().join(" ");
        if !self.0.independents.is_empty() {
            src.push_str(&format!("independent {}\n", names(&self.0.independents)));
        }
        let mut params = self.0.parameters.clone();
        params.extend(self.0.dependents.iter().cloned());
        if !params.is_empty() {
            src.push_str(&format!("param {}\n", names(&params)));
        }
        for sig in &self.0.opaques {
            let ps: Vec<&str> = sig.params.iter().map(|p| p.name()).collect();
            src.push_str(&format!("opaque {}({})\n", sig.name, ps.join(",")));
        }
        for (a, b, v) in self.0.commutators.entries() {
            src.push_str(&format!("commutator [{a},{b}] = {}\n", textio::print_text(v)));
        }
        DependencyContext::parse(&src)
            .expect("regenerated context parses")
            .with_ordering(self.0.ordering)
    }

    /// `.ctx` source text for this context.
    pub fn to_source(&self) -> String {
        textio::print_context(self)
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        validate(self)
    }

    pub fn is_valid(&self) -> bool {
        self.validate().iter().all(|d| d.severity != Severity::Error)
    }
}

/// Number of on-shell points used to compare declared and derived
/// representations.
const AGREEMENT_SAMPLES: usize = 8;
const AGREEMENT_TOL: f64 = 1e-9;

/// Diagnostics for a context; empty when it is fully usable.
pub fn validate(ctx: &DependencyContext) -> Vec<Diagnostic> {
    let mut out = ctx.issues().to_vec();
    for d in ctx.dependents() {
        for v in ctx.independents() {
            if ctx.representation(d.name(), v.name()).is_none() {
                out.push(Diagnostic::error(format!("missing representation ({d},{v})"), None));
            }
        }
    }
    for d in ctx.dependents() {
        for v in ctx.independents() {
            let (Some(decl), Some(der)) = (
                ctx.declared_representation(d.name(), v.name()),
                ctx.derived_representation(d.name(), v.name()),
            ) else {
                continue;
            };
            if equals_canonical(&decl.expr, &der.expr) {
                continue;
            }
            if let Some(msg) = numeric_disagreement(ctx, d, &decl.expr, &der.expr) {
                out.push(Diagnostic::warning(
                    format!("declared representation ({d},{v}) disagrees with the constraint: {msg}"),
                    None,
                ));
            }
        }
    }
    out
}

fn numeric_disagreement(ctx: &DependencyContext, dep: &Symbol, a: &Expr, b: &Expr) -> Option<String> {
    let spec = SampleSpec::sheet(Sign::Plus);
    let points = match sample_with(ctx, AGREEMENT_SAMPLES, 0, &spec) {
        Ok(p) => p,
        Err(e) => return Some(format!("could not sample the constraint for `{dep}` ({e})")),
    };
    for b_ in points {
        let (x, y) = match (evaluate(a, &b_), evaluate(b, &b_)) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(e), _) | (_, Err(e)) => return Some(e.to_string()),
        };
        let scale = x.norm().max(y.norm()).max(f64::MIN_POSITIVE);
        if (x - y).norm() / scale > AGREEMENT_TOL {
            return Some(format!("{x} vs {y} at {}", binding_text(&b_)));
        }
    }
    None
}

pub(crate) fn binding_text(b: &NumericBinding) -> String {
    b.values()
        .map(|(k, v)| if v.im == 0.0 { format!("{k}={}", v.re) } else { format!("{k}={v}") })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Symbols of kind `kind` in declaration order.
pub fn symbols_of_kind(ctx: &DependencyContext, kind: SymbolKind) -> Vec<Symbol> {
    ctx.table().symbols().filter(|s| s.kind() == kind).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::parse_expr;

    const SHELL: &str = "independent p1 p2 p3\nparam m\ndependent E\n\
        constraint E^2 - p1^2 - p2^2 - p3^2 - m^2 = 0 solves E\n";

    #[test]
    fn implicit_partial_on_the_mass_shell() {
        let ctx = DependencyContext::parse(SHELL).unwrap();
        let g = &ctx.constraints()[0].g;
        let e = ctx.symbol("E").unwrap();
        for v in ctx.independents() {
            let got = implicit_partial(g, e, v).unwrap();
            let want = parse_expr(&format!("{v}/E"), ctx.table()).unwrap();
            assert!(equals_canonical(&got, &want));
        }
    }

    #[test]
    fn identity_constraint() {
        let ctx = DependencyContext::parse("independent x\ndependent u\nconstraint u - x = 0 solves u\n").unwrap();
        let rep = ctx.representation("u", "x").unwrap();
        assert_eq!(rep.expr, Expr::one());
        assert_eq!(rep.origin, Origin::Derived);
    }

    #[test]
    fn undetermined_constraint() {
        let t = DependencyContext::parse("independent x\ndependent u\n").unwrap();
        let g = parse_expr("x^2 - 1", t.table()).unwrap();
        let err = implicit_partial(&g, t.symbol("u").unwrap(), t.symbol("x").unwrap()).unwrap_err();
        assert!(matches!(err, ImplicitError::NotMentioned(_)));
        let g = parse_expr("u - u + x", t.table()).unwrap();
        assert!(implicit_partial(&g, t.symbol("u").unwrap(), t.symbol("x").unwrap()).is_err());
    }

    #[test]
    fn missing_representation_is_reported() {
        let ctx = DependencyContext::parse("independent p1\ndependent E\n").unwrap();
        let diags = validate(&ctx);
        assert!(diags.iter().any(|d| d.message == "missing representation (E,p1)"));
    }

    #[test]
    fn declared_and_derived_forms_agree() {
        let src = format!("{SHELL}representation dE/dp1 = p1/E\n");
        assert!(validate(&DependencyContext::parse(&src).unwrap()).is_empty());
        let src = format!("{SHELL}representation dE/dp1 = p1/sqrt(m^2+p1^2+p2^2+p3^2)\n");
        assert!(validate(&DependencyContext::parse(&src).unwrap()).is_empty());
        let src = format!("{SHELL}representation dE/dp1 = 2*p1/E\n");
        let diags = validate(&DependencyContext::parse(&src).unwrap());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
    }

    #[test]
    fn declared_form_wins() {
        let src = format!("{SHELL}representation dE/dp1 = p1/sqrt(m^2+p1^2+p2^2+p3^2)\n");
        let ctx = DependencyContext::parse(&src).unwrap();
        assert_eq!(ctx.representation("E", "p1").unwrap().origin, Origin::Declared);
        assert_eq!(ctx.representation("E", "p2").unwrap().origin, Origin::Derived);
    }

    #[test]
    fn validation_is_pure() {
        let ctx = DependencyContext::parse(&format!("{SHELL}representation dE/dp1 = 3*p1/E\n")).unwrap();
        assert_eq!(validate(&ctx), validate(&ctx));
    }
}
