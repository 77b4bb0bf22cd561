//! The one-step operator `T_h`, the backward recursion for `u^h`, and the
//! monotonicity auditor.
//!
//! `T_h[φ] = D0 + h G(t, ω, D0, D1, D2)` where the difference operators are
//! built from the one-step expectations of `φ` under every step measure.

mod audit;
mod memo;
mod solve;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::functionals::{FunctionalError, GeneratorSpec, Matrix, TerminalSpec};
use crate::path::{DiscretePath, PathError, TimeGrid};
use crate::stencil::{measure_ids, MeasureId, SchemeParams, StencilError, StencilSet};

pub use audit::{
    check_monotonicity, monotonicity_weights, suggest_params, FamilyMinima, MonotonicityReport,
    SampleSpec, SlackMinima, StencilWeights, Verdict, Witness,
};
pub use memo::MemoPolicy;
pub use solve::{evaluate_uh, solve, MemoStats, SolveOptions, SolveResult, DEFAULT_BUDGET};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Stencil(#[from] StencilError),
    #[error("no expectation supplied for measure {0}")]
    MissingMeasure(MeasureId),
    #[error("node budget of {budget} evaluations exceeded{}", required.map(|r| format!(" (tree needs {r:.3e})")).unwrap_or_default())]
    BudgetExceeded { budget: u64, required: Option<f64> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("path must be defined up to index {expected}, got {got}")]
    WrongIndex { expected: usize, got: usize },
    #[error("step index {0} is terminal")]
    TerminalStep(usize),
    #[error("parameter search failed: {0}")]
    SearchFailed(String),
}

/// A PPDE instance: generator and terminal condition on a time grid.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: TimeGrid,
    pub generator: GeneratorSpec,
    pub terminal: TerminalSpec,
}

impl ProblemSpec {
    pub fn new(
        grid: TimeGrid,
        generator: GeneratorSpec,
        terminal: TerminalSpec,
    ) -> Result<Self, SchemeError> {
        if generator.dim != terminal.dim {
            return Err(SchemeError::Dimension(format!(
                "generator has dimension {}, terminal has {}",
                generator.dim, terminal.dim
            )));
        }
        Ok(Self {
            grid,
            generator,
            terminal,
        })
    }

    pub fn dim(&self) -> usize {
        self.generator.dim
    }

    pub fn with_steps(&self, steps: usize) -> Result<Self, SchemeError> {
        Ok(Self {
            grid: TimeGrid::new(self.grid.horizon(), steps)?,
            ..self.clone()
        })
    }

    pub fn origin(&self) -> DiscretePath {
        DiscretePath::origin(self.grid, self.dim()).expect("dimension is validated")
    }

    pub(crate) fn check_params(&self, params: &SchemeParams) -> Result<(), SchemeError> {
        params.validate()?;
        if params.dim() != self.dim() {
            return Err(SchemeError::Dimension(format!(
                "scheme parameters have dimension {}, problem has {}",
                params.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Discrete value, gradient and Hessian `(D0, D1, D2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffOps {
    pub d0: f64,
    pub d1: Vec<f64>,
    #[serde(serialize_with = "serialize_matrix")]
    pub d2: Matrix,
}

pub(crate) fn serialize_matrix<S: serde::Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in 0..m.nrows() {
        let row: Vec<f64> = (0..m.ncols()).map(|c| m[(r, c)]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Position of `id` in [`measure_ids`] order.
pub(crate) fn measure_slot(id: MeasureId, d: usize) -> usize {
    match id {
        MeasureId::Origin => 0,
        MeasureId::Drift(i) => 1 + i,
        MeasureId::Diffusion(i) => 1 + d + i,
        MeasureId::Cross(i, j) => 1 + 2 * d + i * (d - 1) + if j < i { j } else { j - 1 },
    }
}

/// Difference operators from `e0 = E^{P0}[φ]` and the centred expectations
/// `E^P[φ] − e0`, given in [`measure_ids`] order (slot 0 is ignored).
pub(crate) fn diff_ops_from_slots(e0: f64, centred: &[f64], params: &SchemeParams, h: f64) -> DiffOps {
    let d = params.dim();
    let c = |id| centred[measure_slot(id, d)];
    let d1 = (0..d)
        .map(|i| c(MeasureId::Drift(i)) / (params.mu[i] * h))
        .collect();
    let mut d2 = Matrix::zeros(d, d);
    for i in 0..d {
        let s = params.sigma[i];
        d2[(i, i)] = c(MeasureId::Diffusion(i)) / (s * s * h / 2.0);
    }
    for i in 0..d {
        for j in 0..d {
            if i != j {
                d2[(i, j)] = (c(MeasureId::Cross(i, j))
                    - c(MeasureId::Diffusion(i))
                    - c(MeasureId::Diffusion(j)))
                    / (params.sigma[i] * params.sigma[j] * h);
            }
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (d2[(i, j)] + d2[(j, i)]);
            d2[(i, j)] = avg;
            d2[(j, i)] = avg;
        }
    }
    DiffOps { d0: e0, d1, d2 }
}

/// `(D0, D1, D2)` from a map of one-step expectations.
pub fn diff_operators(
    ex: &BTreeMap<MeasureId, f64>,
    params: &SchemeParams,
    h: f64,
) -> Result<DiffOps, SchemeError> {
    let ids = measure_ids(params.dim());
    let slots = ids
        .iter()
        .map(|id| ex.get(id).copied().ok_or(SchemeError::MissingMeasure(*id)))
        .collect::<Result<Vec<_>, _>>()?;
    let e0 = slots[0];
    let centred: Vec<f64> = slots.iter().map(|e| e - e0).collect();
    Ok(diff_ops_from_slots(e0, &centred, params, h))
}

/// `T_h` applied to child values listed stencil by stencil, child by child.
pub(crate) fn operator_from_children(
    set: &StencilSet,
    generator: &GeneratorSpec,
    path: &DiscretePath,
    child_values: &[f64],
) -> Result<f64, SchemeError> {
    // the first stencil is P0 with a single child
    let e0 = child_values[0];
    let mut centred = Vec::with_capacity(set.stencils.len());
    let mut next = 0;
    for stencil in &set.stencils {
        let mut acc = 0.0;
        for child in &stencil.children {
            acc += child.weight * (child_values[next] - e0);
            next += 1;
        }
        centred.push(acc);
    }
    let ops = diff_ops_from_slots(e0, &centred, &set.params, set.h);
    let g = generator.eval(path.time(), path, ops.d0, &ops.d1, &ops.d2)?;
    Ok(ops.d0 + set.h * g)
}

/// All children of `path`, in the order expected by [`operator_from_children`].
pub(crate) fn child_paths(
    set: &StencilSet,
    path: &DiscretePath,
) -> Result<Vec<DiscretePath>, SchemeError> {
    let mut out = Vec::with_capacity(set.branching());
    for stencil in &set.stencils {
        for child in &stencil.children {
            out.push(path.concat(&child.increment)?);
        }
    }
    Ok(out)
}

/// One application of `T_h` at `(t_i, ω)` with a prepared stencil set.
pub fn apply_step_with<F>(
    set: &StencilSet,
    generator: &GeneratorSpec,
    path: &DiscretePath,
    mut phi: F,
) -> Result<f64, SchemeError>
where
    F: FnMut(&DiscretePath) -> Result<f64, SchemeError>,
{
    if path.dim() != set.dim() {
        return Err(SchemeError::Dimension(format!(
            "path has dimension {}, stencils {}",
            path.dim(),
            set.dim()
        )));
    }
    let values = child_paths(set, path)?
        .iter()
        .map(&mut phi)
        .collect::<Result<Vec<_>, _>>()?;
    operator_from_children(set, generator, path, &values)
}

/// `T_h^{t_i, ω}[φ]` for a path defined up to `i`, with `h` the grid step.
pub fn apply_step<F>(
    problem: &ProblemSpec,
    params: &SchemeParams,
    i: usize,
    path: &DiscretePath,
    phi: F,
) -> Result<f64, SchemeError>
where
    F: FnMut(&DiscretePath) -> Result<f64, SchemeError>,
{
    problem.check_params(params)?;
    if i >= problem.grid.steps() {
        return Err(SchemeError::TerminalStep(i));
    }
    if path.last_index() != i {
        return Err(SchemeError::WrongIndex {
            expected: i,
            got: path.last_index(),
        });
    }
    let set = StencilSet::new(params, problem.grid.step())?;
    apply_step_with(&set, &problem.generator, path, phi)
}
