//! Step measures realised as finite stencils.
//!
//! Each one-step measure is a list of `(weight, increment)` children:
//!
//! * `P0`: no move.
//! * `P(i)`: deterministic drift `μ_i h e_i`.
//! * `P(ii)`: coordinate `i` diffuses with variance `σ_i² h`.
//! * `P(ij)`, `i ≠ j`: coordinates `i` and `j` move together on one shared
//!   Gaussian factor with volatilities `σ_i`, `σ_j`.
//!
//! Gaussian factors are integrated with a `q`-point Gauss–Hermite rule, so
//! every stochastic stencil has exactly `q` children and a one-step
//! expectation of a polynomial of degree `≤ 2q − 1` in the increment is exact.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::path::{DiscretePath, PathError};

/// Largest supported quadrature order.
pub const MAX_QUAD_ORDER: usize = 64;

/// Quadrature order used when none is configured.
pub const DEFAULT_QUAD_ORDER: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StencilError {
    #[error("quadrature order must be in 1..={MAX_QUAD_ORDER}, got {0}")]
    QuadOrder(usize),
    #[error("invalid scheme parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("measure index {index} out of range for dimension {dim}")]
    BadIndex { index: usize, dim: usize },
    #[error("cross measure needs two distinct coordinates, got ({0}, {0})")]
    DiagonalCross(usize),
    #[error("step size must be positive, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Probabilists' Gauss–Hermite rule: `E[p(X)] = Σ w_k p(x_k)` for `X ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Nodes ascending, weights summing to one, exactly symmetric about zero.
pub fn hermite_rule(q: usize) -> Result<HermiteRule, StencilError> {
    if q == 0 || q > MAX_QUAD_ORDER {
        return Err(StencilError::QuadOrder(q));
    }
    // Newton iteration on the orthonormal physicists' Hermite recurrence,
    // largest root first. Roots z map to probabilists' nodes √2 z.
    let n = q;
    let nf = n as f64;
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let half = n.div_ceil(2);
    let mut roots = vec![0.0; half];
    let mut raw_w = vec![0.0; half];

    let eval = |z: f64| {
        let (mut p1, mut p2) = (pim4, 0.0);
        for j in 1..=n {
            let jf = j as f64;
            let p3 = p2;
            p2 = p1;
            p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        }
        (p1, (2.0 * nf).sqrt() * p2)
    };

    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots[0],
            3 => 1.91 * z - 0.91 * roots[1],
            _ => 2.0 * z - roots[i - 2],
        };
        let middle = n % 2 == 1 && i == half - 1;
        if middle {
            z = 0.0;
        } else {
            for _ in 0..100 {
                let (p, dp) = eval(z);
                let step = p / dp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
        }
        let (_, dp) = eval(z);
        roots[i] = z;
        raw_w[i] = 2.0 / (dp * dp);
    }

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..half {
        let x = std::f64::consts::SQRT_2 * roots[i];
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = raw_w[i];
        weights[i] = raw_w[i];
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(HermiteRule { nodes, weights })
}

/// Identifier of a step measure. Coordinates are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeasureId {
    Origin,
    Drift(usize),
    Diffusion(usize),
    Cross(usize, usize),
}

impl fmt::Display for MeasureId {
    // one-based, matching the usual P(i), P(ij) labels
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MeasureId::Origin => write!(f, "P0"),
            MeasureId::Drift(i) => write!(f, "P({})", i + 1),
            MeasureId::Diffusion(i) => write!(f, "P({},{})", i + 1, i + 1),
            MeasureId::Cross(i, j) => write!(f, "P({},{})", i + 1, j + 1),
        }
    }
}

impl Serialize for MeasureId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// All measure ids for dimension `d`: `P0`, then drifts, diffusions, and
/// ordered cross pairs `(i, j)`, `i ≠ j`.
pub fn measure_ids(d: usize) -> Vec<MeasureId> {
    let mut ids = Vec::with_capacity(1 + 2 * d + d * d.saturating_sub(1));
    ids.push(MeasureId::Origin);
    ids.extend((0..d).map(MeasureId::Drift));
    ids.extend((0..d).map(MeasureId::Diffusion));
    for i in 0..d {
        for j in 0..d {
            if i != j {
                ids.push(MeasureId::Cross(i, j));
            }
        }
    }
    ids
}

/// Scheme constants: drift sizes `μ`, volatilities `σ`, quadrature order and
/// the monotonicity margin `ε₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub quad_order: usize,
    pub epsilon0: f64,
}

impl SchemeParams {
    /// Equal `μ_i = mu`, `σ_i = sigma` in dimension `d`.
    pub fn uniform(d: usize, mu: f64, sigma: f64) -> Self {
        Self {
            mu: vec![mu; d],
            sigma: vec![sigma; d],
            quad_order: DEFAULT_QUAD_ORDER,
            epsilon0: 0.5,
        }
    }

    pub fn with_quad_order(mut self, q: usize) -> Self {
        self.quad_order = q;
        self
    }

    pub fn with_epsilon0(mut self, eps: f64) -> Self {
        self.epsilon0 = eps;
        self
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<(), StencilError> {
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if self.mu.is_empty() || !positive(&self.mu) {
            return Err(StencilError::InvalidParam {
                field: "mu",
                reason: format!("entries must be positive, got {:?}", self.mu),
            });
        }
        if self.sigma.len() != self.mu.len() || !positive(&self.sigma) {
            return Err(StencilError::InvalidParam {
                field: "sigma",
                reason: format!(
                    "need {} positive entries, got {:?}",
                    self.mu.len(),
                    self.sigma
                ),
            });
        }
        if self.quad_order == 0 || self.quad_order > MAX_QUAD_ORDER {
            return Err(StencilError::InvalidParam {
                field: "quad_order",
                reason: format!("must be in 1..={MAX_QUAD_ORDER}, got {}", self.quad_order),
            });
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 1.0) {
            return Err(StencilError::InvalidParam {
                field: "epsilon0",
                reason: format!("must lie in (0, 1), got {}", self.epsilon0),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Child {
    pub weight: f64,
    pub increment: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub id: MeasureId,
    pub children: Vec<Child>,
}

impl Stencil {
    /// `Σ_k w_k φ(ω ⊗ Δ_k)`.
    pub fn expectation<E, F>(&self, path: &DiscretePath, mut phi: F) -> Result<f64, E>
    where
        F: FnMut(&DiscretePath) -> Result<f64, E>,
        E: From<PathError>,
    {
        let mut acc = 0.0;
        for child in &self.children {
            acc += child.weight * phi(&path.concat(&child.increment)?)?;
        }
        Ok(acc)
    }
}

fn build_stencil(
    id: MeasureId,
    params: &SchemeParams,
    rule: &HermiteRule,
    h: f64,
) -> Result<Stencil, StencilError> {
    let d = params.dim();
    let check = |i: usize| {
        if i < d {
            Ok(())
        } else {
            Err(StencilError::BadIndex { index: i, dim: d })
        }
    };
    let unit = |pairs: &[(usize, f64)]| {
        let mut v = vec![0.0; d];
        for &(i, x) in pairs {
            v[i] = x;
        }
        v
    };
    let root_h = h.sqrt();
    let gaussian = |pairs: &[(usize, f64)]| {
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| Child {
                weight: w,
                increment: unit(
                    &pairs
                        .iter()
                        .map(|&(i, s)| (i, s * root_h * x))
                        .collect::<Vec<_>>(),
                ),
            })
            .collect()
    };
    let children = match id {
        MeasureId::Origin => vec![Child {
            weight: 1.0,
            increment: vec![0.0; d],
        }],
        MeasureId::Drift(i) => {
            check(i)?;
            vec![Child {
                weight: 1.0,
                increment: unit(&[(i, params.mu[i] * h)]),
            }]
        }
        MeasureId::Diffusion(i) => {
            check(i)?;
            gaussian(&[(i, params.sigma[i])])
        }
        MeasureId::Cross(i, j) => {
            check(i)?;
            check(j)?;
            if i == j {
                return Err(StencilError::DiagonalCross(i));
            }
            // coordinates listed in ascending order so that P(ij) and P(ji)
            // produce bit-identical increments
            let (a, b) = (i.min(j), i.max(j));
            gaussian(&[(a, params.sigma[a]), (b, params.sigma[b])])
        }
    };
    Ok(Stencil { id, children })
}

/// Children of one step measure over a step of size `h`.
pub fn step_children(id: MeasureId, params: &SchemeParams, h: f64) -> Result<Stencil, StencilError> {
    params.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(StencilError::BadStep(h));
    }
    build_stencil(id, params, &hermite_rule(params.quad_order)?, h)
}

/// One-step expectation `E^P[φ]` of a functional of the extended path.
pub fn step_expectation<E, F>(
    id: MeasureId,
    params: &SchemeParams,
    h: f64,
    path: &DiscretePath,
    phi: F,
) -> Result<f64, E>
where
    F: FnMut(&DiscretePath) -> Result<f64, E>,
    E: From<PathError> + From<StencilError>,
{
    step_children(id, params, h)?.expectation(path, phi)
}

/// Every stencil for one `(params, h)` pair, in [`measure_ids`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilSet {
    pub params: SchemeParams,
    pub h: f64,
    pub stencils: Vec<Stencil>,
}

impl StencilSet {
    pub fn new(params: &SchemeParams, h: f64) -> Result<Self, StencilError> {
        params.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(StencilError::BadStep(h));
        }
        let rule = hermite_rule(params.quad_order)?;
        let stencils = measure_ids(params.dim())
            .into_iter()
            .map(|id| build_stencil(id, params, &rule, h))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            params: params.clone(),
            h,
            stencils,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Number of children of one node: `1 + d + (d + d(d − 1)) q`.
    pub fn branching(&self) -> usize {
        self.stencils.iter().map(|s| s.children.len()).sum()
    }
}
