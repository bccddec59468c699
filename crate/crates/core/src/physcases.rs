//! Prebuilt scenarios: the relativistic mass shell with optional momentum
//! commutators, the position-operator commutator table, and a 1-D retarded
//! time.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::depctx::{Branch, DependencyContext, OrderingMode, SampleSpec, Sign};
use crate::diffop::{DifferentialOperator, Generator, OperatorError};
use crate::symexpr::{normalize, substitute, Expr, Symbol, SymbolKind, SymbolTable};
use crate::textio::{parse_expr_lenient, print_text, ParseError};
use crate::wholederiv::plain_partial;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("dimension must be at least 1")]
    Dimension,
    #[error("the Feynman commutators need 3 momentum components, got {0}")]
    FeynmanDimension(usize),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("trajectory must not mention the observation symbol `{0}`")]
    TrajectoryMentions(String),
    #[error("trajectory speed {0} is not below 1: the constraint does not determine tp")]
    Superluminal(String),
    #[error("context is not shaped like a mass shell: {0}")]
    NotMassShell(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Which expression stands for `∂E/∂p_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RepresentationForm {
    /// `p_i/E`.
    #[default]
    ThroughEnergy,
    /// `p_i·(m² + Σp²)^(-1/2)`.
    EnergyFree,
    /// None declared; derived from the constraint (also `p_i/E`).
    Derived,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MassShellScenario {
    pub dimension: usize,
    pub sign: Sign,
    pub ordering: OrderingMode,
    pub feynman: bool,
    pub representation: RepresentationForm,
}

impl Default for MassShellScenario {
    fn default() -> Self {
        MassShellScenario {
            dimension: 3,
            sign: Sign::Plus,
            ordering: OrderingMode::Commuting,
            feynman: false,
            representation: RepresentationForm::ThroughEnergy,
        }
    }
}

impl MassShellScenario {
    pub fn sample_spec(&self) -> SampleSpec {
        SampleSpec::sheet(self.sign)
    }
}

fn momenta(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("p{i}")).collect()
}

/// Name of the central symbol standing for `[p_i, p_j]`, `i < j`.
pub fn kappa_name(d: usize, i: usize, j: usize) -> String {
    if d > 9 {
        format!("k{i}_{j}")
    } else {
        format!("k{i}{j}")
    }
}

/// `[p_i, p_j] = i·ε_ijk·B_k` for `i < j` in three dimensions.
fn feynman_value(i: usize, j: usize) -> &'static str {
    match (i, j) {
        (1, 2) => "i*B3",
        (2, 3) => "i*B1",
        (1, 3) => "-i*B2",
        _ => unreachable!("three components"),
    }
}

/// `.ctx` source for the scenario.
pub fn mass_shell_source(s: &MassShellScenario) -> Result<String, ScenarioError> {
    let d = s.dimension;
    if d == 0 {
        return Err(ScenarioError::Dimension);
    }
    if s.feynman && d != 3 {
        return Err(ScenarioError::FeynmanDimension(d));
    }
    let ps = momenta(d);
    let mut src = format!("independent {}\n", ps.join(" "));
    src.push_str(if s.feynman { "param m B1 B2 B3\n" } else { "param m\n" });
    src.push_str("dependent E\n");
    let squares: Vec<String> = ps.iter().map(|p| format!("{p}^2")).collect();
    src.push_str(&format!("constraint E^2 - {} - m^2 = 0 solves E\n", squares.join(" - ")));
    for p in &ps {
        match s.representation {
            RepresentationForm::ThroughEnergy => src.push_str(&format!("representation dE/d{p} = {p}/E\n")),
            RepresentationForm::EnergyFree => src.push_str(&format!(
                "representation dE/d{p} = {p}*(m^2 + {})^(-1/2)\n",
                squares.join(" + ")
            )),
            RepresentationForm::Derived => {}
        }
    }
    src.push_str(&format!("opaque f({},E)\n", ps.join(",")));
    if s.feynman || s.ordering != OrderingMode::Commuting {
        for i in 1..=d {
            for j in i + 1..=d {
                let value = if s.feynman { feynman_value(i, j).to_string() } else { kappa_name(d, i, j) };
                src.push_str(&format!("commutator [p{i},p{j}] = {value}\n"));
            }
        }
    }
    Ok(src)
}

/// Mass-shell context: momenta `p1..pd`, mass `m`, energy `E`, opaque `f`.
pub fn build_mass_shell(s: &MassShellScenario) -> Result<DependencyContext, ScenarioError> {
    let src = mass_shell_source(s)?;
    Ok(DependencyContext::parse(&src)?.with_ordering(s.ordering))
}

/// `κ_ij ↦ i·ε_ijk·B_k` for the central symbols of a three-dimensional
/// noncommutative mass shell. The `B_k` are fresh parameters.
pub fn feynman_substitution(ctx: &DependencyContext) -> BTreeMap<Symbol, Expr> {
    let mut table = ctx.table().clone();
    for b in ["B1", "B2", "B3"] {
        let _ = table.declare(Symbol::new(b, SymbolKind::Parameter));
    }
    let mut out = BTreeMap::new();
    for (i, j) in [(1, 2), (1, 3), (2, 3)] {
        if let Some(k) = ctx.symbol(&kappa_name(3, i, j)) {
            let v = crate::textio::parse_expr(feynman_value(i, j), &table).expect("fixed text parses");
            out.insert(k.clone(), v);
        }
    }
    out
}

/// Applies [`feynman_substitution`] to `e`.
pub fn install_feynman(ctx: &DependencyContext, e: &Expr) -> Expr {
    substitute(e, &feynman_substitution(ctx)).expect("no cycles: values mention only B_k")
}

/// Declares `[p_i, p_j]` for every pair of momenta `p1..pd` found among the
/// independents of `ctx`, as central `κ_ij` or, with `feynman`, as
/// `i·ε_ijk·B_k`. Pairs that already have a commutator are left alone.
pub fn with_momentum_commutators(ctx: &DependencyContext, feynman: bool) -> Result<DependencyContext, ScenarioError> {
    let d = (1..).take_while(|i| ctx.is_independent(&format!("p{i}"))).count();
    if d == 0 {
        return Err(ScenarioError::NotMassShell("no independent `p1`".into()));
    }
    if feynman && d != 3 {
        return Err(ScenarioError::FeynmanDimension(d));
    }
    let declared: Vec<(String, String)> =
        ctx.commutators().entries().map(|(a, b, _)| (a.name().to_string(), b.name().to_string())).collect();
    let mut src = ctx.to_source();
    if feynman {
        let missing: Vec<&str> = ["B1", "B2", "B3"].into_iter().filter(|b| ctx.symbol(b).is_none()).collect();
        if !missing.is_empty() {
            src.push_str(&format!("param {}\n", missing.join(" ")));
        }
    }
    for i in 1..=d {
        for j in i + 1..=d {
            let (a, b) = (format!("p{i}"), format!("p{j}"));
            if declared.iter().any(|(x, y)| (x == &a && y == &b) || (x == &b && y == &a)) {
                continue;
            }
            let value = if feynman { feynman_value(i, j).to_string() } else { kappa_name(d, i, j) };
            src.push_str(&format!("commutator [{a},{b}] = {value}\n"));
        }
    }
    Ok(DependencyContext::parse(&src)?.with_ordering(ctx.ordering()))
}

struct Shell<'a> {
    ctx: &'a DependencyContext,
    f: Expr,
}

fn shell(ctx: &DependencyContext) -> Result<Shell<'_>, ScenarioError> {
    if !ctx.is_dependent("E") {
        return Err(ScenarioError::NotMassShell("no dependent `E`".into()));
    }
    let sig = ctx.opaque("f").ok_or_else(|| ScenarioError::NotMassShell("no opaque `f`".into()))?;
    Ok(Shell { ctx, f: sig.apply_default() })
}

fn momentum(ctx: &DependencyContext, i: usize) -> Result<DifferentialOperator, ScenarioError> {
    let name = format!("p{i}");
    if !ctx.is_independent(&name) {
        return Err(ScenarioError::NotMassShell(format!("no independent `{name}`")));
    }
    Ok(DifferentialOperator::whole(ctx, &name)?)
}

/// `[W[p_i], D[E]] f`.
pub fn momentum_energy_commutator(ctx: &DependencyContext, i: usize) -> Result<Expr, ScenarioError> {
    let s = shell(ctx)?;
    let w = momentum(s.ctx, i)?;
    let de = DifferentialOperator::plain(s.ctx, "E")?;
    Ok(w.commutator(&de)?.apply(&s.f)?)
}

/// `[W[p_i], W[p_j]] f` under the context's ordering mode.
pub fn momentum_momentum_commutator(ctx: &DependencyContext, i: usize, j: usize) -> Result<Expr, ScenarioError> {
    let s = shell(ctx)?;
    let a = momentum(s.ctx, i)?;
    let b = momentum(s.ctx, j)?;
    Ok(a.commutator(&b)?.apply(&s.f)?)
}

/// `[x̂^μ, x̂^ν]` with `x̂⁰ = i·D[E]` and `x̂^k = −i·W[p_k]`, each entry
/// reduced to plain-derivative words.
#[derive(Clone, Debug)]
pub struct PositionCommutatorTable {
    pub dimension: usize,
    pub entries: Vec<Vec<DifferentialOperator>>,
}

/// Position operators `x̂⁰ .. x̂^d`.
pub fn position_operators(ctx: &DependencyContext) -> Result<Vec<DifferentialOperator>, ScenarioError> {
    shell(ctx)?;
    let d = ctx.independents().len();
    let mut out = vec![DifferentialOperator::plain(ctx, "E")?.scale(&Expr::imag())];
    for k in 1..=d {
        out.push(momentum(ctx, k)?.scale(&-Expr::imag()));
    }
    Ok(out)
}

pub fn position_commutator_table(ctx: &DependencyContext) -> Result<PositionCommutatorTable, ScenarioError> {
    let x = position_operators(ctx)?;
    let n = x.len();
    let mut entries = vec![vec![DifferentialOperator::zero(ctx); n]; n];
    for mu in 0..n {
        for nu in mu + 1..n {
            let e = x[mu].commutator(&x[nu])?.reduce()?;
            entries[nu][mu] = e.neg();
            entries[mu][nu] = e;
        }
    }
    Ok(PositionCommutatorTable { dimension: n - 1, entries })
}

impl PositionCommutatorTable {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn is_antisymmetric(&self) -> Result<bool, OperatorError> {
        let n = self.size();
        for mu in 0..n {
            for nu in 0..n {
                if !self.entries[mu][nu].op_equals(&self.entries[nu][mu].neg())? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn has_zero_diagonal(&self) -> bool {
        self.entries.iter().enumerate().all(|(k, row)| row[k].is_zero())
    }

    /// `c` when the entry is exactly `c·D[E]`, the shape `ω F^{μν} ∂/∂E`.
    pub fn ansatz_coefficient(&self, mu: usize, nu: usize) -> Option<Expr> {
        let op = &self.entries[mu][nu];
        let e = op.context().symbol("E")?;
        let word = [Generator::plain(e)];
        let mut terms = op.terms();
        match (terms.next(), terms.next()) {
            (Some((w, c)), None) if w == word => Some(c.clone()),
            (None, None) => Some(Expr::zero()),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .entries
            .iter()
            .map(|row| Value::Array(row.iter().map(|op| Value::String(op.to_string())).collect()))
            .collect();
        let ansatz: Vec<Value> = (0..self.size())
            .map(|mu| {
                Value::Array(
                    (0..self.size())
                        .map(|nu| match self.ansatz_coefficient(mu, nu) {
                            Some(c) => Value::String(print_text(&c)),
                            None => Value::Null,
                        })
                        .collect(),
                )
            })
            .collect();
        json!({
            "convention": "x0 = i*D[E], xk = -i*W[pk]",
            "dimension": self.dimension,
            "entries": rows,
            "energy_coefficient": ansatz,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# x0 = i*D[E], xk = -i*W[pk]\n");
        for mu in 0..self.size() {
            for nu in mu + 1..self.size() {
                s.push_str(&format!("[x{mu},x{nu}] = {}\n", self.entries[mu][nu]));
            }
        }
        s
    }
}

/// Source moving on `x₀(tp)`, observer at `(x, t)`, `c = 1`, `x > x₀`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetardedScenario {
    /// `x₀` as an expression in `tp` and parameters.
    pub trajectory: String,
}

impl RetardedScenario {
    pub fn new(trajectory: &str) -> Self {
        RetardedScenario { trajectory: trajectory.to_string() }
    }

    /// Retarded times are found by scanning a wide bracket.
    pub fn sample_spec() -> SampleSpec {
        SampleSpec { branch: Branch::Bracket(-1e3, 1e3), ..SampleSpec::sheet(Sign::Plus) }
    }
}

/// `.ctx` source for the scenario.
pub fn retarded_source(s: &RetardedScenario) -> Result<String, ScenarioError> {
    let mut table = SymbolTable::new();
    for (n, k) in [("x", SymbolKind::Independent), ("t", SymbolKind::Independent), ("tp", SymbolKind::Dependent)] {
        table.declare(Symbol::new(n, k)).expect("fresh table");
    }
    let (traj, params) = parse_expr_lenient(&s.trajectory, &table)?;
    for obs in ["x", "t"] {
        if traj.mentions(obs) {
            return Err(ScenarioError::TrajectoryMentions(obs.into()));
        }
    }
    let speed = normalize(&plain_partial(&traj, table.get("tp").unwrap()));
    if let Some(c) = speed.as_constant() {
        let (re, im) = c.to_f64_pair();
        if im == 0.0 && re.abs() >= 1.0 {
            return Err(ScenarioError::Superluminal(print_text(&speed)));
        }
    }
    let mut src = String::from("independent x t\n");
    if !params.is_empty() {
        let names: Vec<&str> = params.iter().map(|p| p.name()).collect();
        src.push_str(&format!("param {}\n", names.join(" ")));
    }
    src.push_str("dependent tp\n");
    src.push_str(&format!("constraint tp + (x - ({})) - t = 0 solves tp\n", print_text(&traj)));
    src.push_str("opaque g(x,tp)\n");
    Ok(src)
}

/// Retarded-time context with representations derived from the constraint.
pub fn build_retarded(s: &RetardedScenario) -> Result<DependencyContext, ScenarioError> {
    Ok(DependencyContext::parse(&retarded_source(s)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::equals_canonical;
    use crate::textio::parse_expr;

    fn px(ctx: &DependencyContext, s: &str) -> Expr {
        parse_expr(s, ctx.table()).unwrap()
    }

    #[test]
    fn default_context_validates() {
        let ctx = build_mass_shell(&MassShellScenario::default()).unwrap();
        assert!(ctx.validate().is_empty(), "{:?}", ctx.validate());
        assert_eq!(ctx.independents().len(), 3);
    }

    #[test]
    fn feynman_needs_three_components() {
        let s = MassShellScenario { dimension: 2, feynman: true, ..Default::default() };
        assert_eq!(build_mass_shell(&s).unwrap_err(), ScenarioError::FeynmanDimension(2));
        let s = MassShellScenario { dimension: 0, ..Default::default() };
        assert_eq!(build_mass_shell(&s).unwrap_err(), ScenarioError::Dimension);
    }

    #[test]
    fn feynman_commutators() {
        let s = MassShellScenario { feynman: true, ..Default::default() };
        let ctx = build_mass_shell(&s).unwrap();
        let p = |n: &str| ctx.symbol(n).unwrap();
        let t = ctx.commutators();
        assert_eq!(t.get(p("p1"), p("p2")).unwrap(), px(&ctx, "i*B3"));
        assert_eq!(t.get(p("p2"), p("p3")).unwrap(), px(&ctx, "i*B1"));
        assert_eq!(t.get(p("p3"), p("p1")).unwrap(), px(&ctx, "i*B2"));
    }

    #[test]
    fn energy_commutator_in_one_dimension() {
        let s = MassShellScenario { dimension: 1, ..Default::default() };
        let ctx = build_mass_shell(&s).unwrap();
        let got = momentum_energy_commutator(&ctx, 1).unwrap();
        assert!(equals_canonical(&got, &px(&ctx, "p1/E^2*D[f,E]")));
    }

    #[test]
    fn energy_free_form_kills_the_commutator() {
        let s = MassShellScenario { representation: RepresentationForm::EnergyFree, ..Default::default() };
        let ctx = build_mass_shell(&s).unwrap();
        for i in 1..=3 {
            assert!(momentum_energy_commutator(&ctx, i).unwrap().is_zero());
        }
    }

    #[test]
    fn momentum_commutator_modes() {
        let mk = |ordering, feynman| {
            build_mass_shell(&MassShellScenario { ordering, feynman, ..Default::default() }).unwrap()
        };
        let c = mk(OrderingMode::Commuting, false);
        assert!(momentum_momentum_commutator(&c, 1, 2).unwrap().is_zero());
        let c = mk(OrderingMode::Paper, false);
        let got = momentum_momentum_commutator(&c, 1, 2).unwrap();
        assert!(equals_canonical(&got, &px(&c, "k12*D[f,E]/E^3")));
        let via = install_feynman(&c, &got);
        let c = mk(OrderingMode::Paper, true);
        let direct = momentum_momentum_commutator(&c, 1, 2).unwrap();
        assert!(equals_canonical(&direct, &px(&c, "i*B3*D[f,E]/E^3")));
        assert_eq!(print_text(&via), print_text(&direct));
    }

    #[test]
    fn commutators_installed_after_the_fact() {
        let plain = build_mass_shell(&MassShellScenario::default()).unwrap().with_ordering(OrderingMode::Paper);
        let c = with_momentum_commutators(&plain, true).unwrap();
        let got = momentum_momentum_commutator(&c, 1, 2).unwrap();
        assert!(equals_canonical(&got, &px(&c, "i*B3*D[f,E]/E^3")));
        let again = with_momentum_commutators(&c, true).unwrap();
        assert_eq!(again.to_source(), c.to_source());
        let k = with_momentum_commutators(&plain, false).unwrap();
        assert!(k.symbol("k13").is_some());
        let one = build_mass_shell(&MassShellScenario { dimension: 1, ..Default::default() }).unwrap();
        assert_eq!(with_momentum_commutators(&one, true).unwrap_err(), ScenarioError::FeynmanDimension(1));
    }

    #[test]
    fn position_table() {
        let s = MassShellScenario { ordering: OrderingMode::Paper, feynman: true, ..Default::default() };
        let ctx = build_mass_shell(&s).unwrap();
        let t = position_commutator_table(&ctx).unwrap();
        assert!(t.is_antisymmetric().unwrap());
        assert!(t.has_zero_diagonal());
        let c01 = t.ansatz_coefficient(0, 1).unwrap();
        assert!(equals_canonical(&c01, &px(&ctx, "-p1/E^2")));
        let c12 = t.ansatz_coefficient(1, 2).unwrap();
        assert!(equals_canonical(&c12, &px(&ctx, "-i*B3/E^3")));
    }

    #[test]
    fn retarded_representations() {
        let ctx = build_retarded(&RetardedScenario::new("0.5*tp")).unwrap();
        assert_eq!(ctx.representation("tp", "t").unwrap().expr, Expr::int(2));
        assert_eq!(ctx.representation("tp", "x").unwrap().expr, Expr::int(-2));
        let ctx = build_retarded(&RetardedScenario::new("x0")).unwrap();
        assert_eq!(ctx.representation("tp", "t").unwrap().expr, Expr::int(1));
        assert_eq!(ctx.representation("tp", "x").unwrap().expr, Expr::int(-1));
    }

    #[test]
    fn retarded_rejects_bad_trajectories() {
        assert!(matches!(build_retarded(&RetardedScenario::new("2*tp")), Err(ScenarioError::Superluminal(_))));
        assert!(matches!(build_retarded(&RetardedScenario::new("tp + t")), Err(ScenarioError::TrajectoryMentions(_))));
    }

    #[test]
    fn retarded_commutator_follows_the_representation() {
        let ctx = build_retarded(&RetardedScenario::new("a*tp^2")).unwrap();
        let wx = DifferentialOperator::whole(&ctx, "x").unwrap();
        let dtp = DifferentialOperator::plain(&ctx, "tp").unwrap();
        let got = wx.commutator(&dtp).unwrap().apply(&px(&ctx, "g")).unwrap();
        // [W_x, D_tp] g = -(D_tp r) D[g,tp] with r = dtp/dx
        let r = &ctx.representation("tp", "x").unwrap().expr;
        let want = -plain_partial(r, ctx.symbol("tp").unwrap()) * px(&ctx, "D[g,tp]");
        assert!(equals_canonical(&got, &want));
        assert!(!got.is_zero());
    }
}
