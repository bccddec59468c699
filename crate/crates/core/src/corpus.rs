//! Seeded random expressions and operators over a context, for round-trip
//! and property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use num_rational::Rational64;

use crate::depctx::DependencyContext;
use crate::diffop::{DifferentialOperator, Generator};
use crate::scalar::Scalar;
use crate::symexpr::{Expr, PartialAtom, Symbol};

#[derive(Clone, Copy, Debug)]
pub struct CorpusOptions {
    pub max_depth: usize,
    /// Allow opaque applications and partial atoms.
    pub opaques: bool,
    /// Allow fractional exponents.
    pub roots: bool,
    /// Allow the imaginary unit in constants.
    pub complex: bool,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions { max_depth: 3, opaques: true, roots: true, complex: true }
    }
}

pub struct ExprGen<'a> {
    ctx: &'a DependencyContext,
    vars: Vec<Symbol>,
    pub opts: CorpusOptions,
    rng: ChaCha8Rng,
}

impl<'a> ExprGen<'a> {
    pub fn new(ctx: &'a DependencyContext, seed: u64, opts: CorpusOptions) -> Self {
        let mut vars: Vec<Symbol> = ctx.independents().to_vec();
        vars.extend(ctx.dependents().iter().cloned());
        vars.extend(ctx.parameters().iter().cloned());
        ExprGen { ctx, vars, opts, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn constant(&mut self) -> Expr {
        let num = self.rng.random_range(-5i64..=5);
        let den = self.rng.random_range(1i64..=4);
        let mut c = Scalar::from_ratio(num, den);
        if self.opts.complex && self.rng.random_bool(0.15) {
            c = &c * &Scalar::i();
        }
        if c.is_zero() {
            c = Scalar::one();
        }
        Expr::constant(c)
    }

    fn leaf(&mut self) -> Expr {
        let opaque = self.opts.opaques && !self.ctx.opaques().is_empty() && self.rng.random_bool(0.2);
        if opaque {
            let k = self.rng.random_range(0..self.ctx.opaques().len());
            let sig = self.ctx.opaques()[k].clone();
            let mut orders = vec![0u32; sig.arity()];
            if sig.arity() > 0 {
                for _ in 0..self.rng.random_range(0..=2) {
                    let slot = self.rng.random_range(0..sig.arity());
                    orders[slot] += 1;
                }
            }
            let app = crate::symexpr::OpaqueApp { sig: sig.clone(), args: sig.params.clone() };
            return Expr::partial(PartialAtom { app, orders });
        }
        if self.vars.is_empty() || self.rng.random_bool(0.25) {
            return self.constant();
        }
        let k = self.rng.random_range(0..self.vars.len());
        Expr::sym(&self.vars[k])
    }

    /// Positive-leaning base for fractional powers, so that values stay real
    /// where the sampling boxes put them.
    fn root_base(&mut self) -> Expr {
        let x = self.leaf();
        let c = self.rng.random_range(1i64..=3);
        x.powi(2) + Expr::int(c)
    }

    pub fn expr(&mut self) -> Expr {
        let d = self.opts.max_depth;
        self.sized(d)
    }

    fn sized(&mut self, depth: usize) -> Expr {
        if depth <= 1 || self.rng.random_bool(0.2) {
            return self.leaf();
        }
        match self.rng.random_range(0..10) {
            0..=2 => {
                let n = self.rng.random_range(2..=3);
                Expr::sum((0..n).map(|_| self.sized(depth - 1)).collect())
            }
            3..=5 => {
                let n = self.rng.random_range(2..=3);
                Expr::product((0..n).map(|_| self.sized(depth - 1)).collect())
            }
            6 => {
                let k = self.rng.random_range(-2i64..=3);
                let b = self.sized(depth - 1);
                // negative powers of a leaf only, to keep denominators simple
                if k < 0 {
                    self.leaf_nonconst().powi(k)
                } else {
                    b.powi(k)
                }
            }
            7 if self.opts.roots => {
                let r = [Rational64::new(1, 2), Rational64::new(-1, 2), Rational64::new(3, 2)]
                    [self.rng.random_range(0..3)];
                self.root_base().pow(r)
            }
            8 => -self.sized(depth - 1),
            _ => {
                let a = self.sized(depth - 1);
                let b = self.leaf_nonconst();
                a / b
            }
        }
    }

    fn leaf_nonconst(&mut self) -> Expr {
        if self.vars.is_empty() {
            return Expr::int(2);
        }
        let k = self.rng.random_range(0..self.vars.len());
        Expr::sym(&self.vars[k])
    }

    /// Random operator with up to `max_terms` terms of up to `max_gens`
    /// generators; coefficients are free of opaque functions.
    pub fn operator(&mut self, max_terms: usize, max_gens: usize) -> DifferentialOperator {
        let saved = self.opts;
        self.opts = CorpusOptions { opaques: false, max_depth: 2, ..saved };
        let mut op = DifferentialOperator::zero(self.ctx);
        let n = self.rng.random_range(1..=max_terms);
        for _ in 0..n {
            let coef = self.sized(2);
            let len = self.rng.random_range(0..=max_gens);
            let word: Vec<Generator> = (0..len).map(|_| self.generator()).collect();
            let t = DifferentialOperator::from_terms(self.ctx, vec![(coef, word)]).expect("generated generators are valid");
            op = op.add(&t).expect("same context");
        }
        self.opts = saved;
        op
    }

    fn generator(&mut self) -> Generator {
        let mut pool: Vec<Generator> = self.ctx.independents().iter().map(Generator::whole).collect();
        pool.extend(self.ctx.independents().iter().map(Generator::plain));
        pool.extend(self.ctx.dependents().iter().map(Generator::plain));
        pool[self.rng.random_range(0..pool.len())].clone()
    }
}

/// `n` expressions from `seed`.
pub fn corpus(ctx: &DependencyContext, n: usize, seed: u64, opts: CorpusOptions) -> Vec<Expr> {
    let mut g = ExprGen::new(ctx, seed, opts);
    (0..n).map(|_| g.expr()).collect()
}
