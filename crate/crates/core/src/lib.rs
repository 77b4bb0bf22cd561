//! Backward tree recursion for path-dependent PDEs of the form
//!
//! ```text
//! −∂_t u − G(t, ω, u, ∂_ω u, ∂²_ω u) = 0,   u(T, ω) = g(ω)
//! ```
//!
//! on discrete path skeletons, with a monotonicity auditor, reference oracles
//! and a convergence harness.
//!
//! ```
//! use ppde_core::{solve, GeneratorKind, GeneratorSpec, ProblemSpec, SchemeParams,
//!     SolveOptions, TerminalKind, TerminalSpec, TimeGrid};
//!
//! let problem = ProblemSpec::new(
//!     TimeGrid::new(1.0, 4).unwrap(),
//!     GeneratorSpec::new(GeneratorKind::Heat, 1).unwrap(),
//!     TerminalSpec::new(TerminalKind::Square, 1).unwrap(),
//! )
//! .unwrap();
//! let params = SchemeParams::uniform(1, 1.0, 2.0);
//! let r = solve(&problem, &params, &SolveOptions::default()).unwrap();
//! assert!((r.value - 1.0).abs() < 1e-12);
//! ```

pub mod functionals;
pub mod harness;
pub mod oracles;
pub mod path;
pub mod rng;
pub mod scheme;
pub mod stencil;

pub use functionals::{
    eval_generator, eval_terminal, eval_test_functional, generator_derivs, path_radius,
    CustomGenerator, CustomTerminal, DerivMethod, DerivativeBundle, FunctionalError,
    FunctionalValue, GeneratorKind, GeneratorPoint, GeneratorSpec, Matrix, Registry, Shape,
    TerminalKind, TerminalSpec, TestFunctionalSpec,
};
pub use harness::{
    consistency_sweep, convergence_study, emit, fit_slope, render, stability_probe, Anchor,
    ConsistencyTable, ConvergenceRow, ConvergenceTable, HarnessError, OutputFormat,
    PerturbationSpec, StabilityReport,
};
pub use oracles::{
    brute_force_solve, closed_form, mc_reference, mc_sup_reference, OracleError, ReferenceKind,
    ReferenceValue,
};
pub use path::{d_metric, make_grid, DiscretePath, PathError, TimeGrid};
pub use rng::StreamRng;
pub use scheme::{
    apply_step, apply_step_with, check_monotonicity, diff_operators, evaluate_uh,
    monotonicity_weights, solve, suggest_params, DiffOps, MemoPolicy, MonotonicityReport,
    ProblemSpec, SampleSpec, SchemeError, SolveOptions, SolveResult, StencilWeights, Verdict,
    DEFAULT_BUDGET,
};
pub use stencil::{
    hermite_rule, measure_ids, step_children, step_expectation, HermiteRule, MeasureId,
    SchemeParams, StencilError, StencilSet,
};
