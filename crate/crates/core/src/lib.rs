//! Whole partial derivatives for functions with explicit and implicit
//! dependencies, commutators of the resulting differential operators, and
//! a finite-difference oracle to check them.
//!
//! ```
//! use wholediff::{parse_expr, whole_partial, DependencyContext, equals_canonical};
//!
//! let ctx = DependencyContext::parse(
//!     "independent p1\nparam m\ndependent E\nconstraint E^2 - p1^2 - m^2 = 0 solves E\n",
//! )
//! .unwrap();
//! let e = parse_expr("E", ctx.table()).unwrap();
//! let d = whole_partial(&e, ctx.symbol("p1").unwrap(), &ctx).unwrap();
//! assert!(equals_canonical(&d, &parse_expr("p1/E", ctx.table()).unwrap()));
//! ```

pub mod corpus;
pub mod depctx;
pub mod diffop;
pub mod numcheck;
pub mod physcases;
pub mod scalar;
pub mod symexpr;
pub mod textio;
pub mod wholederiv;

pub use depctx::{
    implicit_partial, sample_on_shell, validate, Branch, DependencyContext, Diagnostic, OrderingMode, Origin,
    Representation, SampleSpec, Severity, Sign,
};
pub use diffop::{DerivMode, DifferentialOperator, Generator, OperatorError};
pub use numcheck::{
    evaluate, fd_commutator_pe, fd_whole, verify_identity, NumericBinding, Sampler, Tolerance, VerificationReport,
    VerifyOptions,
};
pub use scalar::Scalar;
pub use symexpr::{equals_canonical, normal_order, normalize, substitute, Expr, Symbol, SymbolKind};
pub use textio::{parse_context, parse_expr, parse_operator, print_expr, Format, ParseError, SourceSpan};
pub use wholederiv::{mixed_difference, plain_partial, whole_partial, whole_partial_wrt_dependent, DerivError};
