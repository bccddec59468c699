//! Randomized algebraic properties. Every case draws a seed and builds its
//! inputs from the seeded corpus generator.

use std::collections::BTreeMap;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wholediff::corpus::{CorpusOptions, ExprGen};
use wholediff::physcases::{build_mass_shell, MassShellScenario};
use wholediff::textio::print_text;
use wholediff::{
    equals_canonical, evaluate, mixed_difference, normal_order, normalize, parse_expr, plain_partial, substitute,
    whole_partial, DependencyContext, DifferentialOperator, Expr, NumericBinding, OrderingMode, Scalar,
};

const CASES: u32 = 256;

fn shell(ordering: OrderingMode) -> DependencyContext {
    build_mass_shell(&MassShellScenario { ordering, ..Default::default() }).unwrap()
}

fn classes_ctx() -> DependencyContext {
    DependencyContext::parse(
        "independent a b c d x y\nparam m\ncommutator [a,b] = k\ncommutator [c,d] = l\nopaque h(a,x)\n",
    )
    .unwrap()
}

fn concrete() -> CorpusOptions {
    CorpusOptions { opaques: false, ..CorpusOptions::default() }
}

fn random_binding(ctx: &DependencyContext, seed: u64) -> NumericBinding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NumericBinding::new();
    for s in ctx.independents().iter().chain(ctx.parameters()).chain(ctx.dependents()) {
        b.set(s.name(), rng.random_range(0.5..2.0));
    }
    for s in ctx.commutator_symbols() {
        b.set(s.name(), 0.0);
    }
    b
}

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    let scale = a.norm().max(b.norm()).max(1.0);
    (a - b).norm() <= rel * scale
}

fn sym(ctx: &DependencyContext, name: &str) -> wholediff::Symbol {
    ctx.symbol(name).unwrap().clone()
}

fn rational(rng: &mut ChaCha8Rng) -> Expr {
    let n = rng.random_range(-6i64..=6);
    let d = rng.random_range(1i64..=5);
    Expr::constant(Scalar::from_ratio(n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Paper);
        let e = ExprGen::new(&ctx, seed, CorpusOptions::default()).expr();
        let once = normalize(&e);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn normal_order_is_idempotent(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Operator);
        let e = ExprGen::new(&ctx, seed, CorpusOptions::default()).expr();
        let t = ctx.ordering_table();
        let once = normal_order(&e, &t).unwrap();
        prop_assert_eq!(normal_order(&once, &t).unwrap(), once);
    }

    #[test]
    fn normal_order_keeps_values_with_vanishing_commutators(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Operator);
        let e = ExprGen::new(&ctx, seed, concrete()).expr();
        let ordered = normal_order(&e, &ctx.ordering_table()).unwrap();
        let b = random_binding(&ctx, seed ^ 0x5eed);
        let (Ok(x), Ok(y)) = (evaluate(&e, &b), evaluate(&ordered, &b)) else {
            return Err(TestCaseError::reject("singular sample"));
        };
        prop_assert!(close(x, y, 1e-12), "{} vs {}", x, y);
    }

    #[test]
    fn equals_canonical_is_an_equivalence(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Paper);
        let mut g = ExprGen::new(&ctx, seed, CorpusOptions::default());
        let a = g.expr();
        let other = g.expr();
        // b and c are rewritings of a
        let b = Expr::sum(vec![other.clone(), a.clone(), -other.clone()]);
        let c = Expr::product(vec![Expr::int(2), b.clone()]) / Expr::int(2);
        prop_assert!(equals_canonical(&a, &a));
        prop_assert_eq!(equals_canonical(&a, &other), equals_canonical(&other, &a));
        prop_assert!(equals_canonical(&a, &b) && equals_canonical(&b, &a));
        prop_assert!(equals_canonical(&b, &c));
        prop_assert!(equals_canonical(&a, &c));
    }

    #[test]
    fn products_across_classes_reorder_freely(seed in any::<u64>()) {
        let ctx = classes_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = ["a", "b", "c", "d", "x", "y", "m"];
        let mut factors: Vec<Expr> = (0..rng.random_range(2..6))
            .map(|_| Expr::sym(&sym(&ctx, names[rng.random_range(0..names.len())])).powi(rng.random_range(1..3)))
            .collect();
        let e = Expr::product(factors.clone());
        // swap one adjacent pair whose classes differ or are both zero
        let classes: Vec<u32> = factors
            .iter()
            .map(|f| f.classes().into_iter().next().unwrap_or(0))
            .collect();
        let swappable: Vec<usize> = (0..factors.len() - 1)
            .filter(|&k| classes[k] != classes[k + 1] || classes[k] == 0)
            .collect();
        if let Some(&k) = swappable.first() {
            factors.swap(k, k + 1);
            prop_assert!(equals_canonical(&e, &Expr::product(factors)));
        }
    }

    #[test]
    fn parse_print_round_trip(seed in any::<u64>()) {
        for ctx in [shell(OrderingMode::Commuting), shell(OrderingMode::Paper), classes_ctx()] {
            let e = ExprGen::new(&ctx, seed, CorpusOptions::default()).expr();
            let text = print_text(&e);
            let back = parse_expr(&text, ctx.table()).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
            prop_assert!(equals_canonical(&back, &e), "{}", text);
        }
    }

    #[test]
    fn parse_error_spans_lie_inside_the_input(text in "[pEm1-3f+*/^() ,\\[\\]DW.-]{0,24}") {
        let ctx = shell(OrderingMode::Commuting);
        if let Err(err) = parse_expr(&text, ctx.table()) {
            prop_assert!(err.span.start <= err.span.end && err.span.end <= text.len(), "{:?} in {:?}", err.span, text);
        }
        if let Err(err) = wholediff::parse_operator(&text, &ctx) {
            prop_assert!(err.span.end <= text.len(), "{:?} in {:?}", err.span, text);
        }
    }

    #[test]
    fn whole_partial_is_linear(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Commuting);
        let mut g = ExprGen::new(&ctx, seed, CorpusOptions::default());
        let (a, b) = (g.expr(), g.expr());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (al, be) = (rational(&mut rng), rational(&mut rng));
        let p = sym(&ctx, &format!("p{}", rng.random_range(1..=3)));
        let lhs = whole_partial(&(al.clone() * a.clone() + be.clone() * b.clone()), &p, &ctx).unwrap();
        let rhs = al * whole_partial(&a, &p, &ctx).unwrap() + be * whole_partial(&b, &p, &ctx).unwrap();
        prop_assert!(equals_canonical(&lhs, &rhs));
    }

    #[test]
    fn whole_partial_obeys_leibniz(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Commuting);
        let mut g = ExprGen::new(&ctx, seed, CorpusOptions::default());
        let (a, b) = (g.expr(), g.expr());
        let p = sym(&ctx, &format!("p{}", seed % 3 + 1));
        let lhs = whole_partial(&(a.clone() * b.clone()), &p, &ctx).unwrap();
        let rhs = whole_partial(&a, &p, &ctx).unwrap() * b.clone() + a * whole_partial(&b, &p, &ctx).unwrap();
        prop_assert!(equals_canonical(&lhs, &rhs));
    }

    #[test]
    fn whole_equals_plain_without_dependents(seed in any::<u64>()) {
        let flat = shell(OrderingMode::Commuting).without_dependents();
        let e = ExprGen::new(&flat, seed, CorpusOptions::default()).expr();
        for p in flat.independents() {
            prop_assert!(equals_canonical(&whole_partial(&e, p, &flat).unwrap(), &plain_partial(&e, p)));
        }
    }

    #[test]
    fn plain_mixed_partials_commute(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Commuting);
        let e = ExprGen::new(&ctx, seed, CorpusOptions::default()).expr();
        let vars: Vec<_> = ctx.independents().iter().chain(ctx.dependents()).cloned().collect();
        let a = &vars[(seed % 4) as usize];
        let b = &vars[((seed / 4) % 4) as usize];
        let ab = plain_partial(&plain_partial(&e, a), b);
        let ba = plain_partial(&plain_partial(&e, b), a);
        prop_assert!(equals_canonical(&ab, &ba));
    }

    #[test]
    fn mixed_whole_derivatives_commute_in_commuting_mode(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Commuting);
        let e = ExprGen::new(&ctx, seed, CorpusOptions::default()).expr();
        let (i, j) = ((seed % 3 + 1) as usize, ((seed / 3) % 3 + 1) as usize);
        let d = mixed_difference(&e, &sym(&ctx, &format!("p{i}")), &sym(&ctx, &format!("p{j}")), &ctx).unwrap();
        prop_assert!(d.is_zero(), "{}", print_text(&d));
    }

    #[test]
    fn vanishing_kappa_recovers_the_commuting_mode(seed in any::<u64>()) {
        for mode in [OrderingMode::Paper, OrderingMode::Operator] {
            let ctx = shell(mode);
            let e = ExprGen::new(&ctx, seed, CorpusOptions::default()).expr();
            let d = mixed_difference(&e, &sym(&ctx, "p1"), &sym(&ctx, "p2"), &ctx).unwrap();
            let zero: BTreeMap<_, _> = ctx.commutator_symbols().iter().map(|k| (k.clone(), Expr::zero())).collect();
            let d0 = substitute(&d, &zero).unwrap();
            prop_assert!(d0.is_zero(), "{:?}: {}", mode, print_text(&d0));
        }
    }
}

fn operators(seed: u64, n: usize, ctx: &DependencyContext) -> Vec<DifferentialOperator> {
    let mut g = ExprGen::new(ctx, seed, CorpusOptions::default());
    (0..n).map(|_| g.operator(2, 2)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn commutator_is_antisymmetric(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Commuting);
        let ops = operators(seed, 2, &ctx);
        let (a, b) = (&ops[0], &ops[1]);
        let ab = a.commutator(b).unwrap();
        let ba = b.commutator(a).unwrap();
        prop_assert!(ab.op_equals(&ba.neg()).unwrap());
        prop_assert!(a.commutator(a).unwrap().reduce().unwrap().is_zero());
    }

    #[test]
    fn commutator_is_bilinear(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Commuting);
        let ops = operators(seed, 3, &ctx);
        let (a, b, c) = (&ops[0], &ops[1], &ops[2]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (al, be) = (rational(&mut rng), rational(&mut rng));
        let mix = a.scale(&al).add(&b.scale(&be)).unwrap();
        let lhs = mix.commutator(c).unwrap();
        let rhs = a.commutator(c).unwrap().scale(&al).add(&b.commutator(c).unwrap().scale(&be)).unwrap();
        prop_assert!(lhs.op_equals(&rhs).unwrap());
        let lhs = c.commutator(&mix).unwrap();
        let rhs = c.commutator(a).unwrap().scale(&al).add(&c.commutator(b).unwrap().scale(&be)).unwrap();
        prop_assert!(lhs.op_equals(&rhs).unwrap());
    }

    #[test]
    fn commutator_satisfies_jacobi(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Commuting);
        let ops = operators(seed, 3, &ctx);
        let (a, b, c) = (&ops[0], &ops[1], &ops[2]);
        let j = a.commutator(b).unwrap().commutator(c).unwrap()
            .add(&b.commutator(c).unwrap().commutator(a).unwrap()).unwrap()
            .add(&c.commutator(a).unwrap().commutator(b).unwrap()).unwrap();
        prop_assert!(j.op_equals(&DifferentialOperator::zero(&ctx)).unwrap());
    }

    #[test]
    fn apply_is_coherent_with_compose(seed in any::<u64>()) {
        let ctx = shell(OrderingMode::Commuting);
        let ops = operators(seed, 2, &ctx);
        let e = ExprGen::new(&ctx, seed.rotate_left(17), CorpusOptions::default()).expr();
        let lhs = ops[0].compose(&ops[1]).unwrap().apply(&e).unwrap();
        let rhs = ops[0].apply(&ops[1].apply(&e).unwrap()).unwrap();
        prop_assert!(equals_canonical(&lhs, &rhs));
    }

    #[test]
    fn whole_generators_commute_on_a_flat_context(seed in 0u64..9) {
        let flat = shell(OrderingMode::Commuting).without_dependents();
        let v = &flat.independents()[(seed % 3) as usize];
        let w = &flat.independents()[(seed / 3) as usize];
        let c = DifferentialOperator::whole(&flat, v.name()).unwrap()
            .commutator(&DifferentialOperator::whole(&flat, w.name()).unwrap()).unwrap();
        prop_assert!(c.reduce().unwrap().is_zero());
    }
}
