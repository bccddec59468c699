//! `wholediff` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failed, 2 parse or usage error,
//! 3 invalid context, 4 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use wholediff::depctx::{Severity, Sign};
use wholediff::diffop::OperatorError;
use wholediff::numcheck::{fd_whole, shipped_models, Check, ExpModel, OpaqueModel, PolyModel, RationalModel, STEP};
use wholediff::physcases::{
    build_mass_shell, build_retarded, momentum_energy_commutator, position_commutator_table,
    with_momentum_commutators, MassShellScenario, RepresentationForm, RetardedScenario, ScenarioError,
};
use wholediff::textio::{expr_json, print_latex, print_text};
use wholediff::wholederiv::{DerivativeRequest, DerivError};
use wholediff::{
    evaluate, parse_expr, parse_operator, verify_identity, DependencyContext, DerivMode, DifferentialOperator, Expr,
    OrderingMode, ParseError, SampleSpec, Sampler, Tolerance, VerificationReport, VerifyOptions,
};

#[derive(Parser, Debug)]
#[command(name = "wholediff", version, about = "Whole derivatives and commutators under dependency constraints")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutFormat::Text, global = true)]
    format: OutFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Text,
    Json,
    Latex,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Whole (default) or plain partial derivative of an expression.
    Derive(DeriveArgs),
    /// Commutator of two operator literals, optionally applied to an expression.
    Commutator(CommutatorArgs),
    /// Build a named scenario and write its context and results.
    Scenario(ScenarioArgs),
    /// Compare two expressions numerically at sampled points.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Ordering {
    Commuting,
    Paper,
    Operator,
}

impl From<Ordering> for OrderingMode {
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Commuting => OrderingMode::Commuting,
            Ordering::Paper => OrderingMode::Paper,
            Ordering::Operator => OrderingMode::Operator,
        }
    }
}

#[derive(Args, Debug)]
struct ContextArgs {
    /// Context file (`.ctx`).
    ctx: PathBuf,
    /// Ordering mode for products of noncommuting coefficients.
    #[arg(long, value_enum, default_value_t = Ordering::Commuting)]
    ordering: Ordering,
    /// Declare [p_i,p_j] = i*eps_ijk*B_k for the momenta p1 p2 p3.
    #[arg(long, conflicts_with = "kappa")]
    feynman: bool,
    /// Declare central symbols k_ij for every pair of momenta p_i, p_j.
    #[arg(long)]
    kappa: bool,
}

#[derive(Args, Debug)]
struct DeriveArgs {
    #[command(flatten)]
    context: ContextArgs,
    #[arg(long, allow_hyphen_values = true)]
    expr: String,
    #[arg(long)]
    wrt: String,
    /// Plain partial instead of the whole derivative.
    #[arg(long)]
    plain: bool,
}

#[derive(Args, Debug)]
struct CommutatorArgs {
    #[command(flatten)]
    context: ContextArgs,
    #[arg(long, allow_hyphen_values = true)]
    a: String,
    #[arg(long, allow_hyphen_values = true)]
    b: String,
    /// Apply the commutator to this expression.
    #[arg(long, allow_hyphen_values = true)]
    apply: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SignArg {
    #[value(alias = "+")]
    Plus,
    #[value(alias = "-")]
    Minus,
}

impl From<SignArg> for Sign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Plus => Sign::Plus,
            SignArg::Minus => Sign::Minus,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RepresentationArg {
    ThroughEnergy,
    EnergyFree,
    Derived,
}

impl From<RepresentationArg> for RepresentationForm {
    fn from(r: RepresentationArg) -> Self {
        match r {
            RepresentationArg::ThroughEnergy => RepresentationForm::ThroughEnergy,
            RepresentationArg::EnergyFree => RepresentationForm::EnergyFree,
            RepresentationArg::Derived => RepresentationForm::Derived,
        }
    }
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// `mass-shell` or `retarded`.
    name: String,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, value_enum, default_value_t = SignArg::Plus)]
    sign: SignArg,
    #[arg(long, value_enum, default_value_t = Ordering::Commuting)]
    ordering: Ordering,
    #[arg(long)]
    feynman: bool,
    #[arg(long, value_enum, default_value_t = RepresentationArg::ThroughEnergy)]
    representation: RepresentationArg,
    /// Source trajectory x0(tp) for `retarded`.
    #[arg(long)]
    trajectory: Option<String>,
    /// Directory for the written files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    #[value(name = "on-shell+", alias = "on-shell")]
    OnShellPlus,
    #[value(name = "on-shell-")]
    OnShellMinus,
    #[value(name = "off-shell+", alias = "off-shell")]
    OffShellPlus,
    #[value(name = "off-shell-")]
    OffShellMinus,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Poly,
    Rational,
    Exp,
    All,
    None,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    context: ContextArgs,
    #[arg(long, allow_hyphen_values = true)]
    lhs: String,
    #[arg(long, required_unless_present = "fd_wrt", conflicts_with = "fd_wrt", allow_hyphen_values = true)]
    rhs: Option<String>,
    /// Operator applied to the left-hand side before comparing.
    #[arg(long, allow_hyphen_values = true)]
    op: Option<String>,
    /// Compare the whole derivative of `--lhs` with its finite difference.
    #[arg(long)]
    fd_wrt: Option<String>,
    /// Finite-difference step.
    #[arg(long, default_value_t = STEP)]
    h: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Relative tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    abs_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerArg::OnShellPlus)]
    sampler: SamplerArg,
    /// Root bracket for on-shell sampling instead of a sheet.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    bracket: Option<Vec<f64>>,
    /// Closures bound to the opaque functions. Defaults to `all` when an
    /// expression contains one, `none` otherwise.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    InvalidContext(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::InvalidContext(_) => 3,
        }
    }

    fn parse(what: &str, src: &str, e: &ParseError) -> Self {
        CliError::Usage(format!("{what}: {}", e.render(src)))
    }
}

impl From<DerivError> for CliError {
    fn from(e: DerivError) -> Self {
        match e {
            DerivError::MissingRepresentation { .. } => CliError::InvalidContext(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<OperatorError> for CliError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Derivative(d) => d.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Superluminal(_) | ScenarioError::NotMassShell(_) => CliError::InvalidContext(e.to_string()),
            ScenarioError::Operator(o) => o.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// What a command prints, in each format.
struct Output {
    command: &'static str,
    context: Value,
    result: Value,
    /// Extra top-level JSON keys.
    extra: Map<String, Value>,
    text: String,
    latex: String,
    code: u8,
}

impl Output {
    fn render(&self, format: OutFormat) -> String {
        match format {
            OutFormat::Text => self.text.clone(),
            OutFormat::Latex => self.latex.clone(),
            OutFormat::Json => {
                let mut top = Map::new();
                top.insert("command".into(), json!(self.command));
                top.insert("context".into(), self.context.clone());
                top.insert("result".into(), self.result.clone());
                top.extend(self.extra.clone());
                serde_json::to_string_pretty(&Value::Object(top)).expect("json values serialize")
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            println!("{}", out.render(cli.format));
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Derive(a) => derive(a),
        Command::Commutator(a) => commutator(a),
        Command::Scenario(a) => scenario(a),
        Command::Verify(a) => verify(a),
    }
}

struct Loaded {
    ctx: DependencyContext,
    json: Value,
}

fn load_context(a: &ContextArgs) -> Result<Loaded, CliError> {
    let src = fs::read_to_string(&a.ctx)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", a.ctx.display())))?;
    let ctx = DependencyContext::parse(&src).map_err(|e| CliError::parse(&a.ctx.display().to_string(), &src, &e))?;
    let mut problems = Vec::new();
    for d in ctx.validate() {
        let at = d.span.map(|s| format!(" at {s}")).unwrap_or_default();
        match d.severity {
            Severity::Error => problems.push(format!("{}{at}", d.message)),
            Severity::Warning => eprintln!("warning: {}{at}", d.message),
        }
    }
    if !problems.is_empty() {
        return Err(CliError::InvalidContext(format!("{}: {}", a.ctx.display(), problems.join("; "))));
    }
    let mut ctx = ctx.with_ordering(a.ordering.into());
    if a.feynman || a.kappa {
        ctx = with_momentum_commutators(&ctx, a.feynman)?;
    }
    let json = json!({
        "path": a.ctx.display().to_string(),
        "ordering": ctx.ordering(),
        "source": ctx.to_source(),
    });
    Ok(Loaded { ctx, json })
}

fn expr_arg(what: &str, src: &str, ctx: &DependencyContext) -> Result<Expr, CliError> {
    parse_expr(src, ctx.table()).map_err(|e| CliError::parse(what, src, &e))
}

fn operator_arg(what: &str, src: &str, ctx: &DependencyContext) -> Result<DifferentialOperator, CliError> {
    parse_operator(src, ctx).map_err(|e| CliError::parse(what, src, &e))
}

fn variable_arg(what: &str, name: &str, ctx: &DependencyContext) -> Result<wholediff::Symbol, CliError> {
    let known = ctx.is_independent(name) || ctx.is_dependent(name) || ctx.is_parameter(name);
    match ctx.symbol(name).filter(|_| known) {
        Some(s) => Ok(s.clone()),
        None => {
            let span = wholediff::SourceSpan::new(0, name.len());
            let e = ParseError::new(
                wholediff::textio::ParseErrorKind::UnknownVariable,
                span,
                format!("derivative variable `{name}` not in context"),
            );
            Err(CliError::parse(what, name, &e))
        }
    }
}

fn expr_output(command: &'static str, context: Value, e: &Expr, mut result: Map<String, Value>) -> Output {
    let text = print_text(e);
    result.insert("expression".into(), json!(text));
    result.insert("tree".into(), expr_json(e));
    Output {
        command,
        context,
        result: Value::Object(result),
        extra: Map::new(),
        latex: print_latex(e),
        text,
        code: 0,
    }
}

fn derive(a: &DeriveArgs) -> Result<Output, CliError> {
    let Loaded { ctx, json: context } = load_context(&a.context)?;
    let target = expr_arg("--expr", &a.expr, &ctx)?;
    let variable = variable_arg("--wrt", &a.wrt, &ctx)?;
    let mode = if a.plain { DerivMode::Plain } else { DerivMode::Whole };
    let req = DerivativeRequest { target, variable, mode, context: ctx };
    let d = req.run()?;
    let mut result = Map::new();
    result.insert("mode".into(), json!(mode));
    result.insert("wrt".into(), json!(a.wrt));
    Ok(expr_output("derive", context, &d, result))
}

fn commutator(a: &CommutatorArgs) -> Result<Output, CliError> {
    let Loaded { ctx, json: context } = load_context(&a.context)?;
    let x = operator_arg("--a", &a.a, &ctx)?;
    let y = operator_arg("--b", &a.b, &ctx)?;
    let c = x.commutator(&y)?;
    if let Some(src) = &a.apply {
        let e = expr_arg("--apply", src, &ctx)?;
        let got = c.apply(&e)?;
        let mut result = Map::new();
        result.insert("operator".into(), c.to_json());
        return Ok(expr_output("commutator", context, &got, result));
    }
    let reduced = c.reduce()?;
    Ok(Output {
        command: "commutator",
        context,
        result: json!({"operator": c.to_json(), "reduced": reduced.to_json()}),
        extra: Map::new(),
        text: reduced.to_string(),
        latex: reduced.to_latex(),
        code: 0,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<String, CliError> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.display().to_string())
}

fn scenario(a: &ScenarioArgs) -> Result<Output, CliError> {
    match a.name.as_str() {
        "mass-shell" | "retarded" => {}
        other => {
            return Err(CliError::Usage(format!("unknown scenario `{other}` (expected mass-shell or retarded)")));
        }
    }
    fs::create_dir_all(&a.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", a.out.display())))?;
    if a.name == "retarded" {
        return retarded(a);
    }
    let s = MassShellScenario {
        dimension: a.dim,
        sign: a.sign.into(),
        ordering: a.ordering.into(),
        feynman: a.feynman,
        representation: a.representation.into(),
    };
    let ctx = build_mass_shell(&s)?;
    let table = position_commutator_table(&ctx)?;
    let table_json = serde_json::to_string_pretty(&table.to_json()).expect("json values serialize");
    let ctx_path = write_file(&a.out.join("mass-shell.ctx"), &ctx.to_source())?;
    let json_path = write_file(&a.out.join("mass-shell.table.json"), &(table_json + "\n"))?;
    let text_path = write_file(&a.out.join("mass-shell.table.txt"), &table.to_text())?;

    let mut energy = Vec::new();
    for i in 1..=a.dim {
        energy.push(json!({"index": i, "applied": print_text(&momentum_energy_commutator(&ctx, i)?)}));
    }
    let mut latex = String::from("\\begin{array}{l}\n");
    for mu in 0..table.size() {
        for nu in mu + 1..table.size() {
            latex.push_str(&format!("[x^{mu}, x^{nu}] = {} \\\\\n", table.entries[mu][nu].to_latex()));
        }
    }
    latex.push_str("\\end{array}");
    Ok(Output {
        command: "scenario",
        context: json!({"scenario": "mass-shell", "ordering": ctx.ordering(), "source": ctx.to_source()}),
        result: json!({
            "table": table.to_json(),
            "momentum_energy": energy,
            "files": [ctx_path, json_path, text_path],
        }),
        extra: Map::new(),
        text: table.to_text().trim_end().to_string(),
        latex,
        code: 0,
    })
}

fn retarded(a: &ScenarioArgs) -> Result<Output, CliError> {
    let trajectory = a
        .trajectory
        .as_deref()
        .ok_or_else(|| CliError::Usage("scenario retarded needs --trajectory".into()))?;
    let ctx = build_retarded(&RetardedScenario::new(trajectory))?;
    let mut reps = Vec::new();
    let mut text = Vec::new();
    let mut latex = Vec::new();
    for r in ctx.representations() {
        let value = print_text(&r.expr);
        text.push(format!("d{}/d{} = {value}", r.dependent, r.independent));
        latex.push(format!("\\frac{{\\partial {}}}{{\\partial {}}} = {}", r.dependent, r.independent, print_latex(&r.expr)));
        reps.push(json!({"dependent": r.dependent.name(), "independent": r.independent.name(), "expression": value}));
    }
    let ctx_path = write_file(&a.out.join("retarded.ctx"), &ctx.to_source())?;
    let reps_json = serde_json::to_string_pretty(&json!(reps)).expect("json values serialize");
    let reps_path = write_file(&a.out.join("retarded.representations.json"), &(reps_json + "\n"))?;
    Ok(Output {
        command: "scenario",
        context: json!({"scenario": "retarded", "trajectory": trajectory, "source": ctx.to_source()}),
        result: json!({"representations": reps, "files": [ctx_path, reps_path]}),
        extra: Map::new(),
        text: text.join("\n"),
        latex: latex.join(" \\\\\n"),
        code: 0,
    })
}

fn models(choice: ModelArg) -> Vec<std::sync::Arc<dyn OpaqueModel>> {
    match choice {
        ModelArg::Poly => vec![std::sync::Arc::new(PolyModel)],
        ModelArg::Rational => vec![std::sync::Arc::new(RationalModel)],
        ModelArg::Exp => vec![std::sync::Arc::new(ExpModel)],
        ModelArg::All => shipped_models(),
        ModelArg::None => Vec::new(),
    }
}

fn verify(a: &VerifyArgs) -> Result<Output, CliError> {
    let Loaded { ctx, json: context } = load_context(&a.context)?;
    let mut lhs = expr_arg("--lhs", &a.lhs, &ctx)?;
    if let Some(op) = &a.op {
        lhs = operator_arg("--op", op, &ctx)?.apply(&lhs)?;
    }
    let sampler = match (&a.bracket, a.sampler) {
        (Some(b), _) => Sampler::OnShell(SampleSpec::bracket(b[0], b[1])),
        (None, SamplerArg::OnShellPlus) => Sampler::on_shell(Sign::Plus),
        (None, SamplerArg::OnShellMinus) => Sampler::on_shell(Sign::Minus),
        (None, SamplerArg::OffShellPlus) => Sampler::OffShell(Sign::Plus),
        (None, SamplerArg::OffShellMinus) => Sampler::OffShell(Sign::Minus),
    };
    if !(a.tol >= 0.0 && a.abs_tol >= 0.0) {
        return Err(CliError::Usage("tolerances must be non-negative".into()));
    }
    let tol = Tolerance { rel: a.tol, abs: a.abs_tol };

    let (rhs, report) = if let Some(wrt) = &a.fd_wrt {
        if matches!(sampler, Sampler::OffShell(_)) {
            return Err(CliError::Usage("--fd-wrt re-solves the constraint and needs an on-shell sampler".into()));
        }
        if a.h.is_nan() || a.h <= 0.0 {
            return Err(CliError::Usage("--h must be positive".into()));
        }
        let v = variable_arg("--fd-wrt", wrt, &ctx)?;
        let symbolic = DerivativeRequest { target: lhs.clone(), variable: v.clone(), mode: DerivMode::Whole, context: ctx.clone() }
            .run()?;
        let model = a.model.unwrap_or(if lhs.has_opaque() { ModelArg::All } else { ModelArg::None });
        let opts = VerifyOptions::new(a.samples, a.seed, sampler, tol).with_models(models(model));
        let report = wholediff::numcheck::verify_with(&ctx, &opts, |b| -> Check {
            let s = evaluate(&symbolic, b).map_err(|e| format!("symbolic: {e}"))?;
            let n = fd_whole(&lhs, &v, &ctx, b, a.h).map_err(|e| format!("finite difference: {e}"))?;
            Ok((s, n))
        });
        lhs = symbolic;
        (format!("fd_whole({}, {wrt}, h={})", a.lhs, a.h), report)
    } else {
        let src = a.rhs.as_deref().expect("clap requires --rhs without --fd-wrt");
        let rhs = expr_arg("--rhs", src, &ctx)?;
        let default = if lhs.has_opaque() || rhs.has_opaque() { ModelArg::All } else { ModelArg::None };
        let opts = VerifyOptions::new(a.samples, a.seed, sampler, tol).with_models(models(a.model.unwrap_or(default)));
        (print_text(&rhs), verify_identity(&lhs, &rhs, &ctx, &opts))
    };

    let code = if report.sampling_errors > 0 {
        eprintln!("error: {} of {} samples could not be placed on the constraint surface", report.sampling_errors, report.samples);
        4
    } else if report.passed() {
        0
    } else {
        1
    };
    let mut extra = Map::new();
    extra.insert("samples".into(), json!(report.samples));
    extra.insert("failures".into(), json!(report.failures));
    extra.insert("max_abs_err".into(), json!(report.max_abs_err));
    extra.insert("max_rel_err".into(), json!(report.max_rel_err));
    extra.insert("verdict".into(), json!(report.verdict));
    let lhs_text = print_text(&lhs);
    Ok(Output {
        command: "verify",
        context,
        result: json!({"lhs": lhs_text, "rhs": rhs, "report": report.to_json()}),
        extra,
        text: report_text(&lhs_text, &rhs, &report),
        latex: format!("{} \\overset{{?}}{{=}} {}", print_latex(&lhs), rhs),
        code,
    })
}

fn report_text(lhs: &str, rhs: &str, r: &VerificationReport) -> String {
    let verdict = if r.passed() { "pass" } else { "fail" };
    let mut out = format!(
        "lhs: {lhs}\nrhs: {rhs}\nsampler: {} (seed {})\nsamples: {}\nfailures: {}\nmax_abs_err: {:e}\nmax_rel_err: {:e}\nverdict: {verdict}",
        r.sampler, r.seed, r.samples, r.failures, r.max_abs_err, r.max_rel_err
    );
    for d in &r.diagnostics {
        let at: Vec<String> = d.binding.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let model = d.model.as_deref().map(|m| format!(" [{m}]")).unwrap_or_default();
        let what = match (&d.error, d.lhs, d.rhs) {
            (Some(e), _, _) => e.clone(),
            (None, Some(l), Some(r)) => format!(
                "lhs={}{:+}i rhs={}{:+}i abs={:e} rel={:e}",
                l[0],
                l[1],
                r[0],
                r[1],
                d.abs_err.unwrap_or(f64::NAN),
                d.rel_err.unwrap_or(f64::NAN)
            ),
            _ => String::new(),
        };
        out.push_str(&format!("\n  sample {}{model} at {}: {what}", d.sample, at.join(" ")));
    }
    if r.failures > r.diagnostics.len() {
        out.push_str(&format!("\n  ... {} more", r.failures - r.diagnostics.len()));
    }
    out
}
