//! Stencil weights and the sampled monotonicity audit.
//!
//! Writing `T_h φ − T_h ψ` as a mixture of child differences gives the weights
//!
//! ```text
//! a0   = 1 + h ∂_y G − Σ ∂_{z_i}G/μ_i − Σ 2∂_{γ_ii}G/σ_i² + Σ_{i≠j} ∂_{γ_ij}G/(σ_iσ_j)
//! a_i  = ∂_{z_i}G / μ_i
//! a_ii = 2∂_{γ_ii}G/σ_i² − Σ_{j≠i} (∂_{γ_ij}G + ∂_{γ_ji}G)/(σ_iσ_j)
//! a_ij = ∂_{γ_ij}G / (σ_iσ_j)
//! ```
//!
//! which sum to `1 + h ∂_y G`. The audit samples derivative bundles over a box
//! and reports the smallest weight and slack seen; it certifies the box, not
//! the whole domain.

use serde::{Deserialize, Serialize};

use super::{serialize_matrix, SchemeError};
use crate::functionals::{DerivativeBundle, GeneratorPoint, GeneratorSpec, Matrix};
use crate::path::{DiscretePath, TimeGrid};
use crate::rng::StreamRng;
use crate::stencil::SchemeParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StencilWeights {
    pub a0: f64,
    pub a_drift: Vec<f64>,
    pub a_diag: Vec<f64>,
    /// Off-diagonal `a_ij`; the diagonal is zero.
    #[serde(serialize_with = "serialize_matrix")]
    pub a_cross: Matrix,
    pub dy: f64,
    pub sum_residual: f64,
}

impl StencilWeights {
    fn min_cross(&self) -> Option<f64> {
        let d = self.a_drift.len();
        let mut m: Option<f64> = None;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    let v = self.a_cross[(i, j)];
                    m = Some(m.map_or(v, |x| x.min(v)));
                }
            }
        }
        m
    }
}

pub fn monotonicity_weights(b: &DerivativeBundle, params: &SchemeParams, h: f64) -> StencilWeights {
    let d = b.dim();
    let (mu, sigma) = (&params.mu, &params.sigma);
    let a_drift: Vec<f64> = (0..d).map(|i| b.dz[i] / mu[i]).collect();
    let mut a_cross = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                a_cross[(i, j)] = b.dgamma[(i, j)] / (sigma[i] * sigma[j]);
            }
        }
    }
    let a_diag: Vec<f64> = (0..d)
        .map(|i| {
            let own = 2.0 * b.dgamma[(i, i)] / (sigma[i] * sigma[i]);
            let cross: f64 = (0..d)
                .filter(|&j| j != i)
                .map(|j| (b.dgamma[(i, j)] + b.dgamma[(j, i)]) / (sigma[i] * sigma[j]))
                .sum();
            own - cross
        })
        .collect();
    let drift_part: f64 = a_drift.iter().sum();
    let diag_part: f64 = (0..d)
        .map(|i| 2.0 * b.dgamma[(i, i)] / (sigma[i] * sigma[i]))
        .sum();
    let cross_part: f64 = a_cross.iter().sum();
    let a0 = 1.0 + h * b.dy - drift_part - diag_part + cross_part;
    let total = a0 + drift_part + a_diag.iter().sum::<f64>() + cross_part;
    StencilWeights {
        a0,
        a_drift,
        a_diag,
        a_cross,
        dy: b.dy,
        sum_residual: total - (1.0 + h * b.dy),
    }
}

/// Box from which audit points are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub horizon: f64,
    /// Grid on which sample skeletons are drawn; `t` is a grid node.
    pub steps: usize,
    /// Skeleton increments are `path_scale · √h · N(0, 1)`.
    pub path_scale: f64,
    pub y_range: [f64; 2],
    pub z_range: [f64; 2],
    pub gamma_range: [f64; 2],
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            count: 1000,
            seed: 0,
            horizon: 1.0,
            steps: 8,
            path_scale: 1.0,
            y_range: [-2.0, 2.0],
            z_range: [-2.0, 2.0],
            gamma_range: [-2.0, 2.0],
        }
    }
}

impl SampleSpec {
    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), SchemeError> {
        for (name, [lo, hi]) in [
            ("y_range", self.y_range),
            ("z_range", self.z_range),
            ("gamma_range", self.gamma_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SchemeError::Dimension(format!(
                    "sample {name} must be a finite interval, got [{lo}, {hi}]"
                )));
            }
        }
        if !(self.path_scale.is_finite() && self.path_scale >= 0.0) {
            return Err(SchemeError::Dimension(format!(
                "sample path_scale must be non-negative, got {}",
                self.path_scale
            )));
        }
        TimeGrid::new(self.horizon, self.steps)?;
        Ok(())
    }

    /// The sampled generator points in dimension `d`.
    pub fn points(&self, d: usize) -> Result<Vec<GeneratorPoint>, SchemeError> {
        self.validate()?;
        let grid = TimeGrid::new(self.horizon, self.steps)?;
        let mut rng = StreamRng::new(self.seed);
        let scale = self.path_scale * grid.step().sqrt();
        let mut out = Vec::with_capacity(self.count);
        for _ in 0..self.count {
            let upto = (rng.next_u64() % self.steps as u64) as usize;
            let mut path = DiscretePath::origin(grid, d)?;
            for _ in 0..upto {
                let delta: Vec<f64> = (0..d).map(|_| scale * rng.normal()).collect();
                path = path.concat(&delta)?;
            }
            let [ylo, yhi] = self.y_range;
            let [zlo, zhi] = self.z_range;
            let [glo, ghi] = self.gamma_range;
            let y = rng.uniform_in(ylo, yhi);
            let z = (0..d).map(|_| rng.uniform_in(zlo, zhi)).collect();
            let mut gamma = Matrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let v = rng.uniform_in(glo, ghi);
                    gamma[(i, j)] = v;
                    gamma[(j, i)] = v;
                }
            }
            out.push(GeneratorPoint {
                t: path.time(),
                path,
                y,
                z,
                gamma,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Smallest weight seen per family; `None` for families that are empty in
/// dimension 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyMinima {
    pub a0: f64,
    pub a_drift: f64,
    pub a_diag: f64,
    pub a_cross: Option<f64>,
}

/// Smallest slack of each inequality of the monotonicity condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackMinima {
    /// `∂_{z_i} G ≥ 0`
    pub drift: f64,
    /// `∂_{γ_ij} G ≥ 0` for `i ≠ j`
    pub cross: Option<f64>,
    /// `2∂_{γ_ii}G/σ_i − Σ_{j≠i} (∂_{γ_ij}G + ∂_{γ_ji}G)/σ_j ≥ 0`
    pub diagonal: f64,
    /// `1 − ε₀` minus `Σ ∂_{z_i}G/μ_i + Σ 2∂_{γ_ii}G/σ_i² − Σ_{i≠j} ∂_{γ_ij}G/(σ_iσ_j)`
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalDominance {
    pub holds: bool,
    /// `min (2∂_{γ_ii}G − Σ_{j≠i}(∂_{γ_ij}G + ∂_{γ_ji}G))` over points and `i`.
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub index: usize,
    pub reason: String,
    pub value: f64,
    pub t: f64,
    pub path: Vec<Vec<f64>>,
    pub y: f64,
    pub z: Vec<f64>,
    #[serde(serialize_with = "serialize_matrix")]
    pub gamma: Matrix,
}

impl Witness {
    fn new(index: usize, point: &GeneratorPoint, reason: String, value: f64) -> Self {
        Self {
            index,
            reason,
            value,
            t: point.t,
            path: point.path.rows().map(<[f64]>::to_vec).collect(),
            y: point.y,
            z: point.z.clone(),
            gamma: point.gamma.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub generator: String,
    pub params: SchemeParams,
    pub h: f64,
    pub points: usize,
    pub sample: SampleSpec,
    /// Lipschitz constant of `G` in `(z, γ)`, informational.
    pub l0: f64,
    pub min_weights: FamilyMinima,
    pub slack: SlackMinima,
    pub max_sum_residual: f64,
    pub diagonal_dominance: DiagonalDominance,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

struct PointCheck {
    weights: StencilWeights,
    drift_slack: f64,
    cross_slack: Option<f64>,
    diag_slack: f64,
    diag_slack_at: usize,
    margin: f64,
    drift_part: f64,
    gamma_part: f64,
    dominance: f64,
}

fn check_point(b: &DerivativeBundle, params: &SchemeParams, h: f64) -> PointCheck {
    let d = b.dim();
    let (mu, sigma) = (&params.mu, &params.sigma);
    let weights = monotonicity_weights(b, params, h);
    let drift_slack = b.dz.iter().copied().fold(f64::INFINITY, f64::min);
    let mut cross_slack: Option<f64> = None;
    let mut gamma_part = 0.0;
    let mut diag_slack = f64::INFINITY;
    let mut diag_slack_at = 0;
    let mut dominance = f64::INFINITY;
    for i in 0..d {
        gamma_part += 2.0 * b.dgamma[(i, i)] / (sigma[i] * sigma[i]);
        let mut third = 2.0 * b.dgamma[(i, i)] / sigma[i];
        let mut dom = 2.0 * b.dgamma[(i, i)];
        for j in 0..d {
            if j == i {
                continue;
            }
            let v = b.dgamma[(i, j)];
            cross_slack = Some(cross_slack.map_or(v, |x| x.min(v)));
            gamma_part -= v / (sigma[i] * sigma[j]);
            let pair = b.dgamma[(i, j)] + b.dgamma[(j, i)];
            third -= pair / sigma[j];
            dom -= pair;
        }
        if third < diag_slack {
            diag_slack = third;
            diag_slack_at = i;
        }
        dominance = dominance.min(dom);
    }
    let drift_part: f64 = (0..d).map(|i| b.dz[i] / mu[i]).sum();
    let margin = (1.0 - params.epsilon0) - (drift_part + gamma_part);
    PointCheck {
        weights,
        drift_slack,
        cross_slack,
        diag_slack,
        diag_slack_at,
        margin,
        drift_part,
        gamma_part,
        dominance,
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn first_violation(c: &PointCheck) -> Option<(String, f64)> {
    let w = &c.weights;
    if !w.a0.is_finite() || !c.margin.is_finite() {
        return Some(("non-finite derivatives".into(), f64::NAN));
    }
    if w.a0 < 0.0 {
        return Some(("a0 < 0".into(), w.a0));
    }
    if let Some((i, v)) = w.a_drift.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Some((format!("a_{} < 0", i + 1), *v));
    }
    if let Some((i, v)) = w.a_diag.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Some((format!("a_{0}{0} < 0", i + 1), *v));
    }
    if let Some(v) = w.min_cross().filter(|v| *v < 0.0) {
        return Some(("a_ij < 0".into(), v));
    }
    if c.margin < 0.0 {
        return Some(("margin 1 - eps0 exceeded".into(), c.margin));
    }
    None
}

fn bundles(
    generator: &GeneratorSpec,
    points: &[GeneratorPoint],
) -> Result<Vec<DerivativeBundle>, SchemeError> {
    points
        .iter()
        .map(|p| generator.derivatives(p).map_err(SchemeError::from))
        .collect()
}

fn report_from(
    generator: &GeneratorSpec,
    params: &SchemeParams,
    h: f64,
    sample: &SampleSpec,
    points: &[GeneratorPoint],
    bundles: &[DerivativeBundle],
) -> (MonotonicityReport, Vec<PointCheck>) {
    let checks: Vec<PointCheck> = bundles.iter().map(|b| check_point(b, params, h)).collect();
    let inf = f64::INFINITY;
    let mut minima = FamilyMinima {
        a0: inf,
        a_drift: inf,
        a_diag: inf,
        a_cross: None,
    };
    let mut slack = SlackMinima {
        drift: inf,
        cross: None,
        diagonal: inf,
        margin: inf,
    };
    let mut residual: f64 = 0.0;
    let mut dominance = inf;
    let mut witness = None;
    for (k, c) in checks.iter().enumerate() {
        let w = &c.weights;
        minima.a0 = minima.a0.min(w.a0);
        minima.a_drift = w.a_drift.iter().copied().fold(minima.a_drift, f64::min);
        minima.a_diag = w.a_diag.iter().copied().fold(minima.a_diag, f64::min);
        minima.a_cross = min_opt(minima.a_cross, w.min_cross());
        slack.drift = slack.drift.min(c.drift_slack);
        slack.cross = min_opt(slack.cross, c.cross_slack);
        slack.diagonal = slack.diagonal.min(c.diag_slack);
        slack.margin = slack.margin.min(c.margin);
        residual = residual.max(w.sum_residual.abs());
        dominance = dominance.min(c.dominance);
        if witness.is_none() {
            if let Some((reason, value)) = first_violation(c) {
                witness = Some(Witness::new(k, &points[k], reason, value));
            }
        }
    }
    let verdict = if witness.is_none() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let report = MonotonicityReport {
        generator: generator.name().to_string(),
        params: params.clone(),
        h,
        points: points.len(),
        sample: sample.clone(),
        l0: generator.lipschitz(),
        min_weights: minima,
        slack,
        max_sum_residual: residual,
        diagonal_dominance: DiagonalDominance {
            holds: dominance >= 0.0,
            min_margin: dominance,
        },
        verdict,
        witness,
    };
    (report, checks)
}

/// Audit `params` for `generator` on the sampled box.
pub fn check_monotonicity(
    generator: &GeneratorSpec,
    params: &SchemeParams,
    h: f64,
    sample: &SampleSpec,
) -> Result<MonotonicityReport, SchemeError> {
    params.validate()?;
    if params.dim() != generator.dim {
        return Err(SchemeError::Dimension(format!(
            "scheme parameters have dimension {}, generator has {}",
            params.dim(),
            generator.dim
        )));
    }
    let points = sample.points(generator.dim)?;
    let b = bundles(generator, &points)?;
    Ok(report_from(generator, params, h, sample, &points, &b).0)
}

const SEARCH_CAP: usize = 60;

/// Doubling search for `μ`, `σ` starting from unit values.
///
/// With diagonal dominance on the sample all `σ_i` stay equal; otherwise the
/// `σ_j`, `j ≠ i`, are doubled wherever the diagonal inequality fails at `i`.
pub fn suggest_params(
    generator: &GeneratorSpec,
    sample: &SampleSpec,
    epsilon0: f64,
    h: f64,
    quad_order: usize,
) -> Result<SchemeParams, SchemeError> {
    let d = generator.dim;
    let mut params = SchemeParams::uniform(d, 1.0, 1.0)
        .with_epsilon0(epsilon0)
        .with_quad_order(quad_order);
    params.validate()?;
    let points = sample.points(d)?;
    let b = bundles(generator, &points)?;
    if let Some(k) = b.iter().position(|x| !x.is_finite()) {
        return Err(SchemeError::SearchFailed(format!(
            "derivatives are not finite at sample point {k}"
        )));
    }
    for _ in 0..SEARCH_CAP {
        let (report, checks) = report_from(generator, &params, h, sample, &points, &b);
        if report.verdict.passed() {
            return Ok(params);
        }
        if report.slack.drift < 0.0 {
            return Err(SchemeError::SearchFailed(format!(
                "dG/dz >= 0 fails (min {:.3e}); no choice of mu repairs it",
                report.slack.drift
            )));
        }
        if report.slack.cross.is_some_and(|v| v < 0.0) {
            return Err(SchemeError::SearchFailed(format!(
                "dG/dgamma_ij >= 0 fails (min {:.3e}); no choice of sigma repairs it",
                report.slack.cross.unwrap_or_default()
            )));
        }
        let mut grow_mu = false;
        let mut grow_sigma = vec![false; d];
        let mut changed = false;
        for c in &checks {
            if c.diag_slack < 0.0 {
                for (j, g) in grow_sigma.iter_mut().enumerate() {
                    *g |= j != c.diag_slack_at;
                }
                changed = true;
            } else if c.margin < 0.0 {
                if c.drift_part > 0.0 {
                    grow_mu = true;
                    changed = true;
                }
                if c.gamma_part > 0.0 {
                    grow_sigma.iter_mut().for_each(|g| *g = true);
                    changed = true;
                }
            }
        }
        if !changed {
            return Err(SchemeError::SearchFailed(format!(
                "a0 < 0 (min {:.3e}) with the margin satisfied: h * dG/dy is too negative, reduce h",
                report.min_weights.a0
            )));
        }
        if grow_mu {
            params.mu.iter_mut().for_each(|m| *m *= 2.0);
        }
        for (s, g) in params.sigma.iter_mut().zip(&grow_sigma) {
            if *g {
                *s *= 2.0;
            }
        }
    }
    let (report, _) = report_from(generator, &params, h, sample, &points, &b);
    Err(SchemeError::SearchFailed(format!(
        "no passing parameters after {SEARCH_CAP} doublings; binding inequality: {}",
        report
            .witness
            .map(|w| w.reason)
            .unwrap_or_else(|| "none".into())
    )))
}
