//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use wholediff::corpus::{corpus, CorpusOptions, ExprGen};
use wholediff::numcheck::{fd_commutator_pe, shipped_models, verify_with, OpaqueModel, C64};
use wholediff::physcases::{
    build_mass_shell, build_retarded, kappa_name, momentum_energy_commutator, momentum_momentum_commutator,
    position_commutator_table, MassShellScenario, RepresentationForm, RetardedScenario,
};
use wholediff::textio::print_text;
use wholediff::{
    equals_canonical, evaluate, fd_whole, mixed_difference, normalize, parse_expr, plain_partial, sample_on_shell,
    verify_identity, whole_partial, DependencyContext, DifferentialOperator, Expr, NumericBinding, OrderingMode,
    Sampler, Scalar, Sign, Tolerance, VerifyOptions,
};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);
type Closure = (&'static str, fn(&[f64]) -> f64);

// negated so that NaN comparisons fail
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn shell(s: MassShellScenario) -> DependencyContext {
    build_mass_shell(&s).expect("scenario builds")
}

fn ordered(ordering: OrderingMode) -> DependencyContext {
    shell(MassShellScenario { ordering, ..Default::default() })
}

fn px(ctx: &DependencyContext, s: &str) -> Expr {
    parse_expr(s, ctx.table()).unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn sym(ctx: &DependencyContext, n: &str) -> wholediff::Symbol {
    ctx.symbol(n).unwrap_or_else(|| panic!("no symbol {n}")).clone()
}

fn expect_eq(ctx: &DependencyContext, got: &Expr, want: &str) -> Outcome {
    ensure!(equals_canonical(got, &px(ctx, want)), "got {}, want {want}", print_text(got));
    Ok(())
}

/// Deterministic seed stream for the randomized checks.
fn seeds(n: u64, salt: u64) -> impl Iterator<Item = u64> {
    (0..n).map(move |k| (k ^ salt).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(23))
}

fn eq1() -> Outcome {
    for dimension in 1..=3 {
        let ctx = shell(MassShellScenario { dimension, ..Default::default() });
        let f = px(&ctx, "f");
        for i in 1..=dimension {
            let w = DifferentialOperator::whole(&ctx, &format!("p{i}")).map_err(|e| e.to_string())?;
            let got = w.apply(&f).map_err(|e| e.to_string())?;
            expect_eq(&ctx, &got, &format!("D[f,p{i}] + D[f,E]*(p{i}/E)"))?;
        }
    }
    Ok(())
}

fn eq2() -> Outcome {
    let ctx = ordered(OrderingMode::Commuting);
    let f = px(&ctx, "f");
    for i in 1..=3 {
        let w = DifferentialOperator::whole(&ctx, &format!("p{i}")).unwrap();
        let de = DifferentialOperator::plain(&ctx, "E").unwrap();
        let got = w.commutator(&de).and_then(|c| c.apply(&f)).map_err(|e| e.to_string())?;
        let want = format!("(p{i}/E^2)*D[f,E]");
        expect_eq(&ctx, &got, &want)?;
        let opts = VerifyOptions::new(100, 7, Sampler::OffShell(Sign::Plus), Tolerance::rel(1e-9))
            .with_models(shipped_models());
        let rep = verify_identity(&got, &px(&ctx, &want), &ctx, &opts);
        ensure!(rep.samples == 300 && rep.passed(), "p{i}: {} failures, max rel {:e}", rep.failures, rep.max_rel_err);
    }
    Ok(())
}

fn representation_sensitivity() -> Outcome {
    let ctx = shell(MassShellScenario { representation: RepresentationForm::EnergyFree, ..Default::default() });
    for i in 1..=3 {
        let rep = ctx.representation("E", &format!("p{i}")).ok_or("missing representation")?;
        // E-free: p_i (m² + Σp²)^(-1/2)
        expect_eq(&ctx, &rep.expr, &format!("p{i}*(m^2 + p1^2 + p2^2 + p3^2)^(-1/2)"))?;
        let c = momentum_energy_commutator(&ctx, i).map_err(|e| e.to_string())?;
        ensure!(c.is_zero(), "p{i}: {}", print_text(&c));
    }
    Ok(())
}

fn eq3() -> Outcome {
    let commuting = ordered(OrderingMode::Commuting);
    let paper = ordered(OrderingMode::Paper);
    let operator = ordered(OrderingMode::Operator);
    for (i, j) in [(1, 2), (1, 3), (2, 3)] {
        let k = kappa_name(3, i, j);
        let c = momentum_momentum_commutator(&commuting, i, j).map_err(|e| e.to_string())?;
        ensure!(c.is_zero(), "commuting [{i},{j}]: {}", print_text(&c));
        let c = momentum_momentum_commutator(&paper, i, j).map_err(|e| e.to_string())?;
        expect_eq(&paper, &c, &format!("(1/E^3)*D[f,E]*{k}"))?;
        let c = momentum_momentum_commutator(&operator, i, j).map_err(|e| e.to_string())?;
        expect_eq(&operator, &c, &format!("({k}/E^3)*D[f,E] - ({k}/E^2)*D[f,E,E]"))?;
    }
    Ok(())
}

fn feynman() -> Outcome {
    let ctx = shell(MassShellScenario { ordering: OrderingMode::Paper, feynman: true, ..Default::default() });
    let c = momentum_momentum_commutator(&ctx, 1, 2).map_err(|e| e.to_string())?;
    expect_eq(&ctx, &c, "(i/E^3)*B3*D[f,E]")?;
    let c = momentum_momentum_commutator(&ctx, 2, 3).map_err(|e| e.to_string())?;
    expect_eq(&ctx, &c, "(i/E^3)*B1*D[f,E]")?;
    let c = momentum_momentum_commutator(&ctx, 3, 1).map_err(|e| e.to_string())?;
    expect_eq(&ctx, &c, "(i/E^3)*B2*D[f,E]")
}

fn position_table() -> Outcome {
    let ctx = shell(MassShellScenario { ordering: OrderingMode::Paper, feynman: true, ..Default::default() });
    let t = position_commutator_table(&ctx).map_err(|e| e.to_string())?;
    let f = px(&ctx, "f");
    for mu in 0..4 {
        ensure!(t.entries[mu][mu].is_zero(), "diagonal {mu}");
        for nu in 0..4 {
            let sum = t.entries[mu][nu].add(&t.entries[nu][mu]).map_err(|e| e.to_string())?;
            ensure!(sum.reduce().map_err(|e| e.to_string())?.is_zero(), "[{mu}][{nu}] not antisymmetric");
        }
    }
    for k in 1..=3 {
        let got = t.entries[0][k].apply(&f).map_err(|e| e.to_string())?;
        let want = px(&ctx, &format!("(p{k}/E^2)*D[f,E]"));
        let phase = [Scalar::one(), -&Scalar::one(), Scalar::i(), -&Scalar::i()]
            .into_iter()
            .find(|c| equals_canonical(&got, &(Expr::constant(c.clone()) * want.clone())));
        ensure!(phase.is_some(), "[0][{k}] f = {} is not a unit phase times p{k}/E^2 D[f,E]", print_text(&got));
    }
    Ok(())
}

/// `f = E²` with exact partials.
struct Square;

impl OpaqueModel for Square {
    fn name(&self) -> &str {
        "square"
    }

    fn value(&self, args: &[C64]) -> C64 {
        args[3] * args[3]
    }

    fn partial(&self, orders: &[u32], args: &[C64]) -> Option<C64> {
        let e = args[3];
        Some(match (orders[..3].iter().sum::<u32>(), orders[3]) {
            (0, 0) => e * e,
            (0, 1) => e * 2.0,
            (0, 2) => C64::new(2.0, 0.0),
            _ => C64::new(0.0, 0.0),
        })
    }
}

fn fd_agreement() -> Outcome {
    let ctx = ordered(OrderingMode::Commuting);
    for src in ["E", "p1*E", "sqrt(m^2 + p1^2 + p2^2 + p3^2)*p2"] {
        let e = px(&ctx, src);
        for sign in [Sign::Plus, Sign::Minus] {
            for i in 1..=3 {
                let p = sym(&ctx, &format!("p{i}"));
                let symbolic = whole_partial(&e, &p, &ctx).map_err(|e| e.to_string())?;
                let opts = VerifyOptions::new(50, 19, Sampler::on_shell(sign), Tolerance::rel(1e-6));
                let rep = verify_with(&ctx, &opts, |b| {
                    let s = evaluate(&symbolic, b).map_err(|e| e.to_string())?;
                    let n = fd_whole(&e, &p, &ctx, b, 1e-5).map_err(|e| e.to_string())?;
                    Ok((s, n))
                });
                ensure!(rep.passed(), "{src} wrt p{i} on {sign:?}: {} failures, max rel {:e}", rep.failures, rep.max_rel_err);
            }
        }
    }

    // nested differences of plain closures against the closed form
    let closures: [Closure; 3] = [
        ("poly", |x| x[0] * x[3] * x[3]),
        ("rational", |x| x[0] / (1.0 + x[3] * x[3])),
        ("exp", |x| x[0] * x[3].exp()),
    ];
    let models = shipped_models();
    let points = sample_on_shell(&ctx, 50, 23, Sign::Plus).map_err(|e| e.to_string())?;
    for ((name, g), model) in closures.iter().zip(&models) {
        ensure!(model.name() == *name, "model order {} vs {name}", model.name());
        for i in 1..=3 {
            let closed = momentum_energy_commutator(&ctx, i).map_err(|e| e.to_string())?;
            for b in &points {
                let x: Vec<f64> = ["p1", "p2", "p3", "E"].iter().map(|n| b.get(n).unwrap().re).collect();
                let fd = fd_commutator_pe(g, i, &x, 1e-4).map_err(|e| e.to_string())?;
                let want = evaluate(&closed, &b.clone().with_model("f", model.clone())).map_err(|e| e.to_string())?.re;
                ensure!((fd - want).abs() <= 1e-3 * want.abs().max(1e-3), "{name} p{i} at {x:?}: {fd} vs {want}");
            }
        }
    }

    // spot value: f = E², p = (3,0,0), m = 4, E = 5; closed form 2 p1/E
    let b = NumericBinding::new().with("p1", 3.0).with("p2", 0.0).with("p3", 0.0).with("m", 4.0).with("E", 5.0);
    let sq: Arc<dyn OpaqueModel> = Arc::new(Square);
    let closed = evaluate(&momentum_energy_commutator(&ctx, 1).unwrap(), &b.with_model("f", sq)).unwrap().re;
    let oracle = 2.0 * 3.0 / 5.0;
    ensure!((closed - oracle).abs() < 1e-12, "symbolic spot {closed}");
    let fd = fd_commutator_pe(|x: &[f64]| x[3] * x[3], 1, &[3.0, 0.0, 0.0, 5.0], 1e-4).unwrap();
    ensure!((fd - oracle).abs() <= 1e-3 * oracle, "fd spot {fd}");
    Ok(())
}

/// `tp + |x - v0 tp| - t = 0` by bisection.
fn retarded_root(x: f64, t: f64, v0: f64) -> f64 {
    let g = |tp: f64| tp + (x - v0 * tp).abs() - t;
    let (mut lo, mut hi) = (-1e4, 1e4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(lo) * g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn retarded() -> Outcome {
    let ctx = build_retarded(&RetardedScenario::new("0.5*tp")).map_err(|e| e.to_string())?;
    let rep = ctx.representation("tp", "t").ok_or("missing representation")?;
    ensure!(normalize(&rep.expr).as_constant().and_then(Scalar::as_integer) == Some(2), "dtp/dt = {}", print_text(&rep.expr));
    let v0 = 0.5;
    for (k, s) in seeds(20, 8).enumerate() {
        // observer ahead of the source: x > v0 t
        let t = (s % 1000) as f64 / 100.0 - 5.0;
        let x = v0 * t + 0.1 + (k as f64) * 0.37;
        let tp = retarded_root(x, t, v0);
        ensure!((tp - (t - x) / (1.0 - v0)).abs() < 1e-9, "root {tp} at x={x} t={t}");
        let h = 1e-5;
        let fd = (retarded_root(x, t + h, v0) - retarded_root(x, t - h, v0)) / (2.0 * h);
        let b = NumericBinding::new().with("x", x).with("t", t).with("tp", tp);
        let sym_val = evaluate(&rep.expr, &b).map_err(|e| e.to_string())?.re;
        ensure!((fd - sym_val).abs() <= 1e-5 * sym_val.abs(), "x={x} t={t}: fd {fd} vs {sym_val}");
    }
    Ok(())
}

const CASES: u64 = 200;

fn algebra() -> Outcome {
    let ctx = ordered(OrderingMode::Commuting);
    let opts = CorpusOptions::default();
    for seed in seeds(CASES, 1) {
        let mut g = ExprGen::new(&ctx, seed, opts);
        let (a, b) = (g.expr(), g.expr());
        let p = sym(&ctx, &format!("p{}", seed % 3 + 1));
        let (al, be) = (Expr::constant(Scalar::from_ratio(3, 7)), Expr::constant(Scalar::from_ratio(-5, 2)));
        let wp = |e: &Expr| whole_partial(e, &p, &ctx).map_err(|e| e.to_string());
        let lin = wp(&(al.clone() * a.clone() + be.clone() * b.clone()))?;
        ensure!(equals_canonical(&lin, &(al.clone() * wp(&a)? + be.clone() * wp(&b)?)), "linearity, seed {seed}");
        let leib = wp(&(a.clone() * b.clone()))?;
        ensure!(equals_canonical(&leib, &(wp(&a)? * b.clone() + a.clone() * wp(&b)?)), "Leibniz, seed {seed}");

        let vars: Vec<_> = ctx.independents().iter().chain(ctx.dependents()).cloned().collect();
        let (u, v) = (&vars[(seed % 4) as usize], &vars[((seed / 4) % 4) as usize]);
        let uv = plain_partial(&plain_partial(&a, u), v);
        ensure!(equals_canonical(&uv, &plain_partial(&plain_partial(&a, v), u)), "plain partials, seed {seed}");

        let q = sym(&ctx, &format!("p{}", (seed / 3) % 3 + 1));
        let d = mixed_difference(&a, &p, &q, &ctx).map_err(|e| e.to_string())?;
        ensure!(d.is_zero(), "mixed whole, seed {seed}: {}", print_text(&d));

        let ops: Vec<_> = (0..3).map(|_| g.operator(2, 2)).collect();
        let (x, y, z) = (&ops[0], &ops[1], &ops[2]);
        let err = |e: wholediff::OperatorError| e.to_string();
        let xy = x.commutator(y).map_err(err)?;
        ensure!(xy.op_equals(&y.commutator(x).map_err(err)?.neg()).map_err(err)?, "antisymmetry, seed {seed}");
        let mix = x.scale(&al).add(&y.scale(&be)).map_err(err)?;
        let lhs = mix.commutator(z).map_err(err)?;
        let rhs = x.commutator(z).map_err(err)?.scale(&al).add(&y.commutator(z).map_err(err)?.scale(&be)).map_err(err)?;
        ensure!(lhs.op_equals(&rhs).map_err(err)?, "bilinearity, seed {seed}");
        let jac = xy
            .commutator(z)
            .and_then(|j| j.add(&y.commutator(z)?.commutator(x)?))
            .and_then(|j| j.add(&z.commutator(x)?.commutator(y)?))
            .map_err(err)?;
        ensure!(jac.reduce().map_err(err)?.is_zero(), "Jacobi, seed {seed}");
    }

    // noncommuting modes: mixed whole derivatives give the commutator term
    for (mode, form) in [
        (OrderingMode::Paper, "(K/E^3)*D[f,E]"),
        (OrderingMode::Operator, "(K/E^3)*D[f,E] - (K/E^2)*D[f,E,E]"),
    ] {
        let nc = ordered(mode);
        for (i, j) in [(1, 2), (1, 3), (2, 3)] {
            let k = kappa_name(3, i, j);
            let (pi, pj) = (sym(&nc, &format!("p{i}")), sym(&nc, &format!("p{j}")));
            // [W_i, W_j] f
            let d = mixed_difference(&px(&nc, "f"), &pj, &pi, &nc).map_err(|e| e.to_string())?;
            expect_eq(&nc, &d, &form.replace('K', &k))?;
        }
    }
    Ok(())
}

fn round_trip_and_cli() -> Outcome {
    let ctx = ordered(OrderingMode::Paper);
    let exprs = corpus(&ctx, 1000, 2024, CorpusOptions::default());
    ensure!(exprs.len() >= 1000, "corpus has {}", exprs.len());
    for e in &exprs {
        let text = print_text(e);
        let back = parse_expr(&text, ctx.table()).map_err(|err| format!("{text}: {err}"))?;
        ensure!(equals_canonical(&back, e), "round trip changed {text} into {}", print_text(&back));
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = dir.path();
    std::fs::write(dir.join("shell.ctx"), ctx.with_ordering(OrderingMode::Commuting).to_source()).unwrap();
    std::fs::write(dir.join("bad.ctx"), "independent p1\ndependent E\n").unwrap();
    std::fs::write(
        dir.join("empty.ctx"),
        "independent p1\ndependent E\nconstraint E^2 + p1^2 + 1 = 0 solves E\nrepresentation dE/dp1 = -p1/E\n",
    )
    .unwrap();
    let cases: [(&[&str], i32); 8] = [
        (&["derive", "shell.ctx", "--expr", "f", "--wrt", "p1"], 0),
        (&["verify", "shell.ctx", "--lhs", "E^2", "--rhs", "m^2 + p1^2 + p2^2 + p3^2", "--samples", "20"], 0),
        (&["verify", "shell.ctx", "--lhs", "p1", "--rhs", "p2", "--samples", "20"], 1),
        (&["derive", "shell.ctx", "--expr", "f", "--wrt", "q"], 2),
        (&["scenario", "unknown"], 2),
        (&["derive", "bad.ctx", "--expr", "E", "--wrt", "p1"], 3),
        (&["scenario", "retarded", "--trajectory", "2*tp", "--out", "."], 3),
        (&["verify", "empty.ctx", "--lhs", "E", "--rhs", "E", "--samples", "5"], 4),
    ];
    for (args, want) in cases {
        let code = cli(dir, args).0;
        ensure!(code == want, "{args:?} exited {code}, want {want}");
    }
    let args = [
        "--format", "json", "verify", "shell.ctx", "--lhs", "f", "--op", "W[p1]", "--rhs", "D[f,p1] + p1/E*D[f,E]",
        "--seed", "5",
    ];
    let (code, first) = cli(dir, &args);
    ensure!(code == 0, "json verify exited {code}");
    ensure!(first == cli(dir, &args).1, "verification JSON differs between identical runs");
    let v: serde_json::Value = serde_json::from_str(&first).map_err(|e| e.to_string())?;
    for key in ["command", "context", "result", "samples", "failures", "max_abs_err", "max_rel_err", "verdict"] {
        ensure!(v.get(key).is_some(), "JSON lacks {key}");
    }
    Ok(())
}

fn cli(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_wholediff")).current_dir(dir).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("whole derivative structure, dimensions 1-3", eq1),
        ("momentum-energy commutator closed form", eq2),
        ("energy-free representation gives zero", representation_sensitivity),
        ("momentum-momentum commutator per ordering mode", eq3),
        ("Feynman substitution", feynman),
        ("position commutator table", position_table),
        ("finite-difference agreement", fd_agreement),
        ("retarded time", retarded),
        ("algebraic properties", algebra),
        ("round trip, exit codes, stable JSON", round_trip_and_cli),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(()) => println!("criterion {:>2} PASS  {name}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", n + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
