//! Reference values for validating the scheme: closed forms, Monte Carlo
//! estimates and a brute-force tree evaluator.
//!
//! All oracles use the discrete monitoring convention of the terminal
//! conditions, so the only discrepancy left against `u^h` is scheme error.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::functionals::{FunctionalError, GeneratorKind, Shape, TerminalKind};
use crate::path::{DiscretePath, PathError};
use crate::rng::StreamRng;
use crate::scheme::{diff_operators, ProblemSpec, SchemeError};
use crate::stencil::{SchemeParams, StencilSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("no {oracle} oracle for {what}")]
    Unsupported { oracle: &'static str, what: String },
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    ClosedForm,
    MonteCarlo,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceValue {
    pub value: f64,
    pub kind: ReferenceKind,
    /// Standard error; zero for deterministic kinds.
    pub stderr: f64,
    pub note: String,
}

impl ReferenceValue {
    fn exact(value: f64, kind: ReferenceKind, note: String) -> Self {
        Self {
            value,
            kind,
            stderr: 0.0,
            note,
        }
    }
}

fn unsupported(oracle: &'static str, what: impl Into<String>) -> OracleError {
    OracleError::Unsupported {
        oracle,
        what: what.into(),
    }
}

fn check_anchor(problem: &ProblemSpec, i: usize, path: &DiscretePath) -> Result<(), OracleError> {
    if path.grid() != &problem.grid || path.dim() != problem.dim() {
        return Err(OracleError::BadArgument(
            "path does not live on the problem grid".into(),
        ));
    }
    if path.last_index() != i {
        return Err(OracleError::Scheme(SchemeError::WrongIndex {
            expected: i,
            got: path.last_index(),
        }));
    }
    Ok(())
}

/// `E[g]` for Brownian motion with volatility `vol` started from the path at
/// `t_i`, for terminal kinds with a known formula.
fn linear_expectation(problem: &ProblemSpec, path: &DiscretePath, vol: f64) -> Result<f64, OracleError> {
    let g = &problem.terminal;
    let i = path.last_index();
    let n = problem.grid.steps();
    let tau = problem.grid.horizon() - path.time();
    let x = path.current();
    let base = match &g.kind {
        TerminalKind::Constant { value } => *value,
        TerminalKind::Coordinate { index } => x[*index],
        TerminalKind::Square => {
            x.iter().map(|v| v * v).sum::<f64>() + problem.dim() as f64 * vol * vol * tau
        }
        TerminalKind::Average { index } => {
            let past: f64 = path.rows().skip(1).map(|r| r[*index]).sum();
            (past + (n - i) as f64 * x[*index]) / n as f64
        }
        TerminalKind::Call { index, strike } => {
            let m = x[*index] - strike;
            let s = vol * tau.sqrt();
            if s == 0.0 {
                m.max(0.0)
            } else {
                let phi = Normal::standard();
                m * phi.cdf(m / s) + s * phi.pdf(m / s)
            }
        }
        TerminalKind::Max { .. } | TerminalKind::Custom(_) => {
            return Err(unsupported("closed-form", format!("terminal `{}`", g.name())))
        }
    };
    Ok(g.scale * base)
}

/// Exact `u(t_i, ω)` for the registered instances with a formula.
///
/// Heat and semilinear generators use the Brownian expectation (times
/// `e^{λ(T−t)}`); g-heat uses it at `σ_high` for convex or affine terminals and
/// at `σ_low` for concave ones.
pub fn closed_form(problem: &ProblemSpec, i: usize, path: &DiscretePath) -> Result<ReferenceValue, OracleError> {
    check_anchor(problem, i, path)?;
    let tau = problem.grid.horizon() - path.time();
    let (value, note) = match &problem.generator.kind {
        GeneratorKind::Heat => (linear_expectation(problem, path, 1.0)?, "heat".to_string()),
        GeneratorKind::Semilinear { lambda } => (
            linear_expectation(problem, path, 1.0)? * (lambda * tau).exp(),
            format!("semilinear lambda={lambda}"),
        ),
        GeneratorKind::GHeat {
            sigma_low,
            sigma_high,
        } => {
            let vol = match problem.terminal.shape() {
                Shape::Affine | Shape::Convex => *sigma_high,
                Shape::Concave => *sigma_low,
                Shape::Unknown => {
                    return Err(unsupported(
                        "closed-form",
                        "g-heat with a terminal that is neither convex nor concave",
                    ))
                }
            };
            (linear_expectation(problem, path, vol)?, format!("g-heat at sigma={vol}"))
        }
        GeneratorKind::Custom(c) => {
            return Err(unsupported("closed-form", format!("generator `{}`", c.name())))
        }
    };
    Ok(ReferenceValue::exact(
        value,
        ReferenceKind::ClosedForm,
        format!("{note}, terminal {}", problem.terminal.name()),
    ))
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Samples per random sub-stream.
pub const MC_CHUNK: usize = 1 << 14;

struct Moments {
    mean: f64,
    stderr: f64,
}

/// Mean and standard error of `g` over `samples` skeletons of `vol · W`
/// started from `path`. Chunk `k` draws from sub-stream `k`; chunk sums are
/// combined in chunk order, so the result does not depend on thread count.
fn simulate(
    problem: &ProblemSpec,
    path: &DiscretePath,
    vol: f64,
    samples: usize,
    seed: u64,
) -> Result<Moments, OracleError> {
    if samples < 2 {
        return Err(OracleError::BadArgument(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let grid = problem.grid;
    let d = problem.dim();
    let remaining = grid.steps() - path.last_index();
    let scale = vol * grid.step().sqrt();
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = StreamRng::substream(seed, k as u64);
            let count = MC_CHUNK.min(samples - k * MC_CHUNK);
            let (mut s1, mut s2) = (Neumaier::default(), Neumaier::default());
            let mut buf = Vec::with_capacity(d * (grid.steps() + 1));
            for _ in 0..count {
                buf.clear();
                buf.extend_from_slice(path.as_flat());
                let mut last = buf.len() - d;
                for _ in 0..remaining {
                    for c in 0..d {
                        let next = buf[last + c] + scale * rng.normal();
                        buf.push(next);
                    }
                    last += d;
                }
                let skeleton = DiscretePath::from_flat(grid, d, buf.clone())?;
                let v = problem.terminal.eval(&skeleton)?;
                s1.add(v);
                s2.add(v * v);
            }
            Ok::<_, OracleError>((s1, s2))
        })
        .collect::<Vec<_>>();
    let (mut s1, mut s2) = (Neumaier::default(), Neumaier::default());
    for p in partial {
        let (a, b) = p?;
        s1.add(a.value());
        s2.add(b.value());
    }
    let n = samples as f64;
    let mean = s1.value() / n;
    let var = ((s2.value() / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok(Moments {
        mean,
        stderr: (var / n).sqrt(),
    })
}

/// Feynman–Kac estimate of `u(t_i, ω)` for heat and semilinear problems.
pub fn mc_reference(
    problem: &ProblemSpec,
    i: usize,
    path: &DiscretePath,
    samples: usize,
    seed: u64,
) -> Result<ReferenceValue, OracleError> {
    check_anchor(problem, i, path)?;
    let lambda = problem.generator.linear_y_coefficient().ok_or_else(|| {
        unsupported(
            "monte-carlo",
            format!("generator `{}` (needs heat or semilinear)", problem.generator.name()),
        )
    })?;
    let m = simulate(problem, path, 1.0, samples, seed)?;
    let factor = (lambda * (problem.grid.horizon() - path.time())).exp();
    Ok(ReferenceValue {
        value: factor * m.mean,
        kind: ReferenceKind::MonteCarlo,
        stderr: factor * m.stderr,
        note: format!("N={samples} seed={seed}"),
    })
}

/// Largest Monte Carlo value over constant volatilities for a 1-d g-heat
/// problem at the origin.
///
/// Every volatility reuses the same normals, so enlarging the grid never
/// lowers the result. This is a lower bound on the g-heat value, and equals
/// it for convex or concave terminals when the grid contains the matching
/// endpoint of `[σ_low, σ_high]`.
pub fn mc_sup_reference(
    problem: &ProblemSpec,
    vols: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ReferenceValue, OracleError> {
    if problem.dim() != 1 {
        return Err(unsupported(
            "sup-over-volatility",
            format!("dimension {}", problem.dim()),
        ));
    }
    if !matches!(problem.generator.kind, GeneratorKind::GHeat { .. }) {
        return Err(unsupported(
            "sup-over-volatility",
            format!("generator `{}`", problem.generator.name()),
        ));
    }
    if vols.is_empty() || vols.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(OracleError::BadArgument(format!(
            "volatility grid must be non-empty and non-negative, got {vols:?}"
        )));
    }
    let origin = problem.origin();
    let mut best: Option<(f64, Moments)> = None;
    for &vol in vols {
        let m = simulate(problem, &origin, vol, samples, seed)?;
        if best.as_ref().is_none_or(|(_, b)| m.mean > b.mean) {
            best = Some((vol, m));
        }
    }
    let (vol, m) = best.expect("grid is non-empty");
    Ok(ReferenceValue {
        value: m.mean,
        kind: ReferenceKind::MonteCarlo,
        stderr: m.stderr,
        note: format!("argmax sigma={vol} over {} volatilities, N={samples} seed={seed}", vols.len()),
    })
}

/// Full-tree evaluation of `u^h(0, 0)` without memoisation.
///
/// Shares the stencils with the scheme but walks the tree and assembles the
/// difference operators on its own.
pub fn brute_force_solve(
    problem: &ProblemSpec,
    params: &SchemeParams,
    budget: u64,
) -> Result<ReferenceValue, OracleError> {
    params.validate().map_err(SchemeError::from)?;
    if params.dim() != problem.dim() {
        return Err(OracleError::BadArgument(format!(
            "scheme parameters have dimension {}, problem has {}",
            params.dim(),
            problem.dim()
        )));
    }
    let set = StencilSet::new(params, problem.grid.step()).map_err(SchemeError::from)?;
    let b = set.branching() as f64;
    let n = problem.grid.steps();
    let nodes: f64 = (0..=n).map(|k| b.powi(k as i32)).sum();
    if nodes > budget as f64 {
        return Err(SchemeError::BudgetExceeded {
            budget,
            required: Some(nodes),
        }
        .into());
    }

    fn walk(problem: &ProblemSpec, set: &StencilSet, path: &DiscretePath) -> Result<f64, OracleError> {
        if path.is_terminal() {
            return Ok(problem.terminal.eval(path)?);
        }
        let mut ex = std::collections::BTreeMap::new();
        for stencil in &set.stencils {
            let mut e = 0.0;
            for child in &stencil.children {
                e += child.weight * walk(problem, set, &path.concat(&child.increment)?)?;
            }
            ex.insert(stencil.id, e);
        }
        let ops = diff_operators(&ex, &set.params, set.h)?;
        let g = problem
            .generator
            .eval(path.time(), path, ops.d0, &ops.d1, &ops.d2)?;
        Ok(ops.d0 + set.h * g)
    }

    let value = walk(problem, &set, &problem.origin())?;
    Ok(ReferenceValue::exact(
        value,
        ReferenceKind::BruteForce,
        format!("{nodes} nodes"),
    ))
}
