//! Shared fixtures for the engine benchmarks.

use wholediff::corpus::{corpus, CorpusOptions};
use wholediff::physcases::{build_mass_shell, MassShellScenario};
use wholediff::{DependencyContext, Expr, OrderingMode};

pub fn mass_shell(ordering: OrderingMode) -> DependencyContext {
    build_mass_shell(&MassShellScenario { ordering, ..Default::default() }).expect("default scenario builds")
}

/// Fixed corpus so runs are comparable.
pub fn sample_exprs(ctx: &DependencyContext, n: usize) -> Vec<Expr> {
    corpus(ctx, n, 7, CorpusOptions::default())
}
