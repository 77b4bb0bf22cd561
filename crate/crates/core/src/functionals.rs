//! Terminal conditions `g(ω)`, generators `G(t, ω, y, z, γ)` and smooth test
//! functionals with known path derivatives.
//!
//! Built-in kinds are plain enum variants so that oracles can recognise them;
//! anything else goes through the `Custom` variants and a [`Registry`] entry
//! added in code.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::path::{euclidean, DiscretePath, PathError};

pub type Matrix = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("terminal condition needs a terminal path (defined up to {upto} of {steps})")]
    NotTerminal { upto: usize, steps: usize },
    #[error("gamma is not symmetric (entry ({row}, {col}))")]
    AsymmetricGamma { row: usize, col: usize },
    #[error("argument has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate index {index} out of range for dimension {dim}")]
    CoordinateOutOfRange { index: usize, dim: usize },
    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
    #[error("parameter `{name}`: {reason}")]
    BadParameter { name: String, reason: String },
}

/// Curvature of a terminal condition, used by oracles to pick a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Affine,
    Convex,
    Concave,
    Unknown,
}

impl Shape {
    fn scaled(self, scale: f64) -> Shape {
        match self {
            Shape::Convex if scale < 0.0 => Shape::Concave,
            Shape::Concave if scale < 0.0 => Shape::Convex,
            _ if scale == 0.0 => Shape::Affine,
            s => s,
        }
    }
}

/// A terminal condition implemented outside this crate.
pub trait CustomTerminal: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    /// Evaluates on a terminal path.
    fn eval(&self, path: &DiscretePath) -> f64;
    /// Lipschitz constant in the skeleton sup-norm, valid on paths with sup-norm ≤ `radius`.
    fn lipschitz(&self, radius: f64) -> f64;
    fn shape(&self) -> Shape {
        Shape::Unknown
    }
}

#[derive(Debug, Clone)]
pub enum TerminalKind {
    Constant { value: f64 },
    /// `ω_T[index]`
    Coordinate { index: usize },
    /// `|ω_T|²`
    Square,
    /// `(1/n) Σ_{j=1..n} ω_{t_j}[index]`
    Average { index: usize },
    /// `max_{0≤j≤n} |ω_{t_j}[index]|`
    Max { index: usize },
    /// `(ω_T[index] - strike)⁺`
    Call { index: usize, strike: f64 },
    Custom(Arc<dyn CustomTerminal>),
}

/// `g(ω) = scale * base(ω)`.
#[derive(Debug, Clone)]
pub struct TerminalSpec {
    pub kind: TerminalKind,
    pub scale: f64,
    pub dim: usize,
}

impl TerminalSpec {
    pub fn new(kind: TerminalKind, dim: usize) -> Result<Self, FunctionalError> {
        Self::scaled(kind, 1.0, dim)
    }

    pub fn scaled(kind: TerminalKind, scale: f64, dim: usize) -> Result<Self, FunctionalError> {
        let index = match &kind {
            TerminalKind::Coordinate { index }
            | TerminalKind::Average { index }
            | TerminalKind::Max { index }
            | TerminalKind::Call { index, .. } => Some(*index),
            _ => None,
        };
        if let Some(index) = index {
            if index >= dim {
                return Err(FunctionalError::CoordinateOutOfRange { index, dim });
            }
        }
        if !scale.is_finite() {
            return Err(FunctionalError::BadParameter {
                name: "scale".into(),
                reason: "must be finite".into(),
            });
        }
        Ok(Self { kind, scale, dim })
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            TerminalKind::Constant { .. } => "constant",
            TerminalKind::Coordinate { .. } => "coordinate",
            TerminalKind::Square => "square",
            TerminalKind::Average { .. } => "average",
            TerminalKind::Max { .. } => "max",
            TerminalKind::Call { .. } => "call",
            TerminalKind::Custom(c) => c.name(),
        }
    }

    pub fn eval(&self, path: &DiscretePath) -> Result<f64, FunctionalError> {
        if !path.is_terminal() {
            return Err(FunctionalError::NotTerminal {
                upto: path.last_index(),
                steps: path.grid().steps(),
            });
        }
        if path.dim() != self.dim {
            return Err(FunctionalError::DimensionMismatch {
                expected: self.dim,
                got: path.dim(),
            });
        }
        let end = path.current();
        let base = match &self.kind {
            TerminalKind::Constant { value } => *value,
            TerminalKind::Coordinate { index } => end[*index],
            TerminalKind::Square => end.iter().map(|x| x * x).sum(),
            TerminalKind::Average { index } => {
                let n = path.grid().steps();
                path.rows().skip(1).map(|r| r[*index]).sum::<f64>() / n as f64
            }
            TerminalKind::Max { index } => path.rows().map(|r| r[*index].abs()).fold(0.0, f64::max),
            TerminalKind::Call { index, strike } => (end[*index] - strike).max(0.0),
            TerminalKind::Custom(c) => c.eval(path),
        };
        Ok(self.scale * base)
    }

    /// Lipschitz constant `L_g` in the skeleton sup-norm, valid on paths whose
    /// sup-norm does not exceed `radius`. Finite for every built-in kind.
    pub fn lipschitz(&self, radius: f64) -> f64 {
        let base = match &self.kind {
            TerminalKind::Constant { .. } => 0.0,
            TerminalKind::Coordinate { .. }
            | TerminalKind::Average { .. }
            | TerminalKind::Max { .. }
            | TerminalKind::Call { .. } => 1.0,
            TerminalKind::Square => 2.0 * radius,
            TerminalKind::Custom(c) => c.lipschitz(radius),
        };
        self.scale.abs() * base
    }

    pub fn shape(&self) -> Shape {
        let base = match &self.kind {
            TerminalKind::Constant { .. }
            | TerminalKind::Coordinate { .. }
            | TerminalKind::Average { .. } => Shape::Affine,
            TerminalKind::Square | TerminalKind::Max { .. } | TerminalKind::Call { .. } => {
                Shape::Convex
            }
            TerminalKind::Custom(c) => c.shape(),
        };
        base.scaled(self.scale)
    }
}

/// Free-function form of [`TerminalSpec::eval`].
pub fn eval_terminal(g: &TerminalSpec, path: &DiscretePath) -> Result<f64, FunctionalError> {
    g.eval(path)
}

/// A generator implemented outside this crate.
pub trait CustomGenerator: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn eval(&self, t: f64, path: &DiscretePath, y: f64, z: &[f64], gamma: &Matrix) -> f64;
    /// Analytic `(∂_y G, ∂_z G, ∂_γ G)`; `None` falls back to central differences.
    fn derivatives(
        &self,
        _t: f64,
        _path: &DiscretePath,
        _y: f64,
        _z: &[f64],
        _gamma: &Matrix,
    ) -> Option<(f64, Vec<f64>, Matrix)> {
        None
    }
    /// Lipschitz constant in `(z, γ)`.
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone)]
pub enum GeneratorKind {
    /// `½ tr γ`
    Heat,
    /// `½ tr γ + λ y`
    Semilinear { lambda: f64 },
    /// `½ Σ_i (σ_high² (γ_ii)⁺ − σ_low² (γ_ii)⁻)`
    GHeat { sigma_low: f64, sigma_high: f64 },
    Custom(Arc<dyn CustomGenerator>),
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub dim: usize,
}

/// Point at which a generator is evaluated or differentiated.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorPoint {
    pub t: f64,
    pub path: DiscretePath,
    pub y: f64,
    pub z: Vec<f64>,
    pub gamma: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DerivMethod {
    Analytic,
    CentralDifference { delta: f64 },
}

/// `(∂_y G, ∂_z G, ∂_γ G)` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub dy: f64,
    pub dz: Vec<f64>,
    pub dgamma: Matrix,
    pub method: DerivMethod,
    pub point: GeneratorPoint,
}

impl DerivativeBundle {
    pub fn dim(&self) -> usize {
        self.dz.len()
    }

    pub fn is_finite(&self) -> bool {
        self.dy.is_finite()
            && self.dz.iter().all(|v| v.is_finite())
            && self.dgamma.iter().all(|v| v.is_finite())
    }
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, dim: usize) -> Result<Self, FunctionalError> {
        if dim == 0 {
            return Err(FunctionalError::Path(PathError::ZeroDimension));
        }
        match &kind {
            GeneratorKind::Semilinear { lambda } if !lambda.is_finite() => {
                return Err(FunctionalError::BadParameter {
                    name: "lambda".into(),
                    reason: "must be finite".into(),
                })
            }
            GeneratorKind::GHeat {
                sigma_low,
                sigma_high,
            } if !(*sigma_low >= 0.0 && sigma_high >= sigma_low && sigma_high.is_finite()) => {
                return Err(FunctionalError::BadParameter {
                    name: "sigma_high".into(),
                    reason: format!("need 0 <= sigma_low <= sigma_high, got {sigma_low}, {sigma_high}"),
                })
            }
            _ => {}
        }
        Ok(Self { kind, dim })
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            GeneratorKind::Heat => "heat",
            GeneratorKind::Semilinear { .. } => "semilinear",
            GeneratorKind::GHeat { .. } => "g-heat",
            GeneratorKind::Custom(c) => c.name(),
        }
    }

    /// Lipschitz constant `L₀` of `G` in `(z, γ)` (Frobenius norm on γ).
    pub fn lipschitz(&self) -> f64 {
        let root_d = (self.dim as f64).sqrt();
        match &self.kind {
            GeneratorKind::Heat | GeneratorKind::Semilinear { .. } => 0.5 * root_d,
            GeneratorKind::GHeat { sigma_high, .. } => 0.5 * sigma_high * sigma_high * root_d,
            GeneratorKind::Custom(c) => c.lipschitz(),
        }
    }

    /// `λ` when `G = ½ tr γ + λ y`.
    pub fn linear_y_coefficient(&self) -> Option<f64> {
        match self.kind {
            GeneratorKind::Heat => Some(0.0),
            GeneratorKind::Semilinear { lambda } => Some(lambda),
            _ => None,
        }
    }

    fn check_args(&self, z: &[f64], gamma: &Matrix) -> Result<(), FunctionalError> {
        if z.len() != self.dim {
            return Err(FunctionalError::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        if gamma.nrows() != self.dim || gamma.ncols() != self.dim {
            return Err(FunctionalError::DimensionMismatch {
                expected: self.dim,
                got: gamma.nrows().max(gamma.ncols()),
            });
        }
        for r in 0..self.dim {
            for c in (r + 1)..self.dim {
                if gamma[(r, c)] != gamma[(c, r)] {
                    return Err(FunctionalError::AsymmetricGamma { row: r, col: c });
                }
            }
        }
        Ok(())
    }

    /// `G(t, ω, y, z, γ)`. `γ` must be exactly symmetric.
    pub fn eval(
        &self,
        t: f64,
        path: &DiscretePath,
        y: f64,
        z: &[f64],
        gamma: &Matrix,
    ) -> Result<f64, FunctionalError> {
        self.check_args(z, gamma)?;
        Ok(self.eval_unchecked(t, path, y, z, gamma))
    }

    fn eval_unchecked(&self, t: f64, path: &DiscretePath, y: f64, z: &[f64], gamma: &Matrix) -> f64 {
        match &self.kind {
            GeneratorKind::Heat => 0.5 * gamma.trace(),
            GeneratorKind::Semilinear { lambda } => 0.5 * gamma.trace() + lambda * y,
            GeneratorKind::GHeat {
                sigma_low,
                sigma_high,
            } => {
                let (lo, hi) = (sigma_low * sigma_low, sigma_high * sigma_high);
                0.5 * gamma
                    .diagonal()
                    .iter()
                    .map(|&g| if g >= 0.0 { hi * g } else { lo * g })
                    .sum::<f64>()
            }
            GeneratorKind::Custom(c) => c.eval(t, path, y, z, gamma),
        }
    }

    /// Derivative bundle: analytic for built-ins (and customs that provide
    /// it), central differences otherwise.
    ///
    /// For g-heat the kink at `γ_ii = 0` reports the upper slope `½σ_high²`.
    pub fn derivatives(&self, point: &GeneratorPoint) -> Result<DerivativeBundle, FunctionalError> {
        self.check_args(&point.z, &point.gamma)?;
        let d = self.dim;
        let analytic = match &self.kind {
            GeneratorKind::Heat => Some((0.0, vec![0.0; d], Matrix::identity(d, d) * 0.5)),
            GeneratorKind::Semilinear { lambda } => {
                Some((*lambda, vec![0.0; d], Matrix::identity(d, d) * 0.5))
            }
            GeneratorKind::GHeat {
                sigma_low,
                sigma_high,
            } => {
                let mut dg = Matrix::zeros(d, d);
                for i in 0..d {
                    let s = if point.gamma[(i, i)] >= 0.0 {
                        sigma_high
                    } else {
                        sigma_low
                    };
                    dg[(i, i)] = 0.5 * s * s;
                }
                Some((0.0, vec![0.0; d], dg))
            }
            GeneratorKind::Custom(c) => {
                c.derivatives(point.t, &point.path, point.y, &point.z, &point.gamma)
            }
        };
        match analytic {
            Some((dy, dz, dgamma)) => Ok(DerivativeBundle {
                dy,
                dz,
                dgamma,
                method: DerivMethod::Analytic,
                point: point.clone(),
            }),
            None => self.central_difference(point, 1.0),
        }
    }

    /// Symmetric central differences with step `δ = scale · ε^{1/3} · max(1, |arg|)`.
    ///
    /// Off-diagonal γ entries are bumped symmetrically, so the reported
    /// `∂_{γ_ij} G` is half the derivative along the symmetric direction.
    pub fn central_difference(
        &self,
        point: &GeneratorPoint,
        scale: f64,
    ) -> Result<DerivativeBundle, FunctionalError> {
        self.check_args(&point.z, &point.gamma)?;
        let d = self.dim;
        let base = f64::EPSILON.cbrt() * scale;
        let step = |x: f64| base * x.abs().max(1.0);
        let p = point;
        let g = |y: f64, z: &[f64], gamma: &Matrix| self.eval_unchecked(p.t, &p.path, y, z, gamma);

        let dy = {
            let h = step(p.y);
            (g(p.y + h, &p.z, &p.gamma) - g(p.y - h, &p.z, &p.gamma)) / (2.0 * h)
        };
        let mut dz = vec![0.0; d];
        let mut z = p.z.clone();
        for i in 0..d {
            let h = step(p.z[i]);
            z[i] = p.z[i] + h;
            let up = g(p.y, &z, &p.gamma);
            z[i] = p.z[i] - h;
            let down = g(p.y, &z, &p.gamma);
            z[i] = p.z[i];
            dz[i] = (up - down) / (2.0 * h);
        }
        let mut dgamma = Matrix::zeros(d, d);
        let mut gm = p.gamma.clone();
        for i in 0..d {
            for j in i..d {
                let h = step(p.gamma[(i, j)]);
                let bump = |m: &mut Matrix, v: f64| {
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                };
                bump(&mut gm, p.gamma[(i, j)] + h);
                let up = g(p.y, &p.z, &gm);
                bump(&mut gm, p.gamma[(i, j)] - h);
                let down = g(p.y, &p.z, &gm);
                bump(&mut gm, p.gamma[(i, j)]);
                let slope = (up - down) / (2.0 * h);
                if i == j {
                    dgamma[(i, i)] = slope;
                } else {
                    dgamma[(i, j)] = 0.5 * slope;
                    dgamma[(j, i)] = 0.5 * slope;
                }
            }
        }
        Ok(DerivativeBundle {
            dy,
            dz,
            dgamma,
            method: DerivMethod::CentralDifference { delta: base },
            point: point.clone(),
        })
    }
}

/// Free-function form of [`GeneratorSpec::eval`] at grid index `i`.
pub fn eval_generator(
    g: &GeneratorSpec,
    i: usize,
    path: &DiscretePath,
    y: f64,
    z: &[f64],
    gamma: &Matrix,
) -> Result<f64, FunctionalError> {
    g.eval(path.grid().time(i), path, y, z, gamma)
}

/// Free-function form of [`GeneratorSpec::derivatives`].
pub fn generator_derivs(
    g: &GeneratorSpec,
    point: &GeneratorPoint,
) -> Result<DerivativeBundle, FunctionalError> {
    g.derivatives(point)
}

/// Value of a test functional together with its path derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalValue {
    pub value: f64,
    pub dt: f64,
    pub dx: Vec<f64>,
    pub dxx: Matrix,
}

/// Smooth `f(t, x)` for cylinder functionals `φ(t, ω) = f(t, ω_t)`.
pub trait CylinderBase: Send + Sync + fmt::Debug {
    fn eval(&self, t: f64, x: &[f64]) -> FunctionalValue;
}

/// Smooth `f(t, x, I)` for integral functionals; returns the value with
/// `(∂_t f, ∂_x f, ∂²_x f)` and `∂_I f`.
pub trait IntegralBase: Send + Sync + fmt::Debug {
    fn eval(&self, t: f64, x: &[f64], integral: f64) -> (FunctionalValue, f64);
}

/// `t^time_power · x[coordinate]^space_power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub time_power: u32,
    pub space_power: u32,
    pub coordinate: usize,
}

fn pow_and_derivs(x: f64, p: u32) -> (f64, f64, f64) {
    let pi = p as i32;
    let v = x.powi(pi);
    let d1 = if p >= 1 { p as f64 * x.powi(pi - 1) } else { 0.0 };
    let d2 = if p >= 2 {
        (p * (p - 1)) as f64 * x.powi(pi - 2)
    } else {
        0.0
    };
    (v, d1, d2)
}

impl CylinderBase for Monomial {
    fn eval(&self, t: f64, x: &[f64]) -> FunctionalValue {
        let d = x.len();
        let (tv, td, _) = pow_and_derivs(t, self.time_power);
        let (xv, xd, xdd) = pow_and_derivs(x[self.coordinate], self.space_power);
        let mut dx = vec![0.0; d];
        dx[self.coordinate] = tv * xd;
        let mut dxx = Matrix::zeros(d, d);
        dxx[(self.coordinate, self.coordinate)] = tv * xdd;
        FunctionalValue {
            value: tv * xv,
            dt: td * xv,
            dx,
            dxx,
        }
    }
}

/// `f(t, x, I) = I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegralIdentity;

impl IntegralBase for IntegralIdentity {
    fn eval(&self, _t: f64, x: &[f64], integral: f64) -> (FunctionalValue, f64) {
        let d = x.len();
        (
            FunctionalValue {
                value: integral,
                dt: 0.0,
                dx: vec![0.0; d],
                dxx: Matrix::zeros(d, d),
            },
            1.0,
        )
    }
}

#[derive(Debug, Clone)]
pub enum TestFunctionalSpec {
    /// `φ(t, ω) = f(t, ω_t)`
    Cylinder(Arc<dyn CylinderBase>),
    /// `φ(t_i, ω) = f(t_i, ω_{t_i}, Σ_{j=1..i} ω_{t_j}[coordinate] h)`
    Integral {
        base: Arc<dyn IntegralBase>,
        coordinate: usize,
    },
}

impl TestFunctionalSpec {
    pub fn monomial(time_power: u32, space_power: u32, coordinate: usize) -> Self {
        Self::Cylinder(Arc::new(Monomial {
            time_power,
            space_power,
            coordinate,
        }))
    }

    /// Value and path derivatives at `(t_i, ω)`.
    pub fn eval(&self, i: usize, path: &DiscretePath) -> Result<FunctionalValue, FunctionalError> {
        let x = path.row(i)?;
        let t = path.grid().time(i);
        match self {
            Self::Cylinder(f) => Ok(f.eval(t, x)),
            Self::Integral { base, coordinate } => {
                if *coordinate >= path.dim() {
                    return Err(FunctionalError::CoordinateOutOfRange {
                        index: *coordinate,
                        dim: path.dim(),
                    });
                }
                let h = path.grid().step();
                let integral: f64 = (1..=i)
                    .map(|j| path.row(j).map(|r| r[*coordinate]))
                    .sum::<Result<f64, _>>()?
                    * h;
                let (mut fv, d_integral) = base.eval(t, x, integral);
                // the running integral grows at rate ω_t
                fv.dt += d_integral * x[*coordinate];
                Ok(fv)
            }
        }
    }
}

/// Free-function form of [`TestFunctionalSpec::eval`].
pub fn eval_test_functional(
    phi: &TestFunctionalSpec,
    i: usize,
    path: &DiscretePath,
) -> Result<FunctionalValue, FunctionalError> {
    phi.eval(i, path)
}

pub type GeneratorFactory =
    Arc<dyn Fn(&Value, usize) -> Result<GeneratorSpec, FunctionalError> + Send + Sync>;
pub type TerminalFactory =
    Arc<dyn Fn(&Value, usize) -> Result<TerminalSpec, FunctionalError> + Send + Sync>;

/// Name-keyed constructors for generators and terminal conditions.
#[derive(Clone)]
pub struct Registry {
    generators: BTreeMap<String, GeneratorFactory>,
    terminals: BTreeMap<String, TerminalFactory>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("generators", &self.generators.keys().collect::<Vec<_>>())
            .field("terminals", &self.terminals.keys().collect::<Vec<_>>())
            .finish()
    }
}

fn param_f64(params: &Value, name: &str, default: Option<f64>) -> Result<f64, FunctionalError> {
    match params.get(name) {
        None | Some(Value::Null) => default.ok_or_else(|| FunctionalError::BadParameter {
            name: name.into(),
            reason: "missing".into(),
        }),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| FunctionalError::BadParameter {
                name: name.into(),
                reason: format!("expected a finite number, got {v}"),
            }),
    }
}

fn param_index(params: &Value) -> Result<usize, FunctionalError> {
    match params.get("index") {
        None | Some(Value::Null) => Ok(0),
        Some(v) => v
            .as_u64()
            .map(|i| i as usize)
            .ok_or_else(|| FunctionalError::BadParameter {
                name: "index".into(),
                reason: format!("expected a non-negative integer, got {v}"),
            }),
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self {
            generators: BTreeMap::new(),
            terminals: BTreeMap::new(),
        };
        r.register_generator("heat", Arc::new(|_, d| GeneratorSpec::new(GeneratorKind::Heat, d)));
        r.register_generator(
            "semilinear",
            Arc::new(|p, d| {
                let lambda = param_f64(p, "lambda", None)?;
                GeneratorSpec::new(GeneratorKind::Semilinear { lambda }, d)
            }),
        );
        r.register_generator(
            "g-heat",
            Arc::new(|p, d| {
                let sigma_low = param_f64(p, "sigma_low", None)?;
                let sigma_high = param_f64(p, "sigma_high", None)?;
                GeneratorSpec::new(
                    GeneratorKind::GHeat {
                        sigma_low,
                        sigma_high,
                    },
                    d,
                )
            }),
        );

        let scaled = |kind: TerminalKind, p: &Value, d: usize| {
            TerminalSpec::scaled(kind, param_f64(p, "scale", Some(1.0))?, d)
        };
        r.register_terminal(
            "constant",
            Arc::new(move |p, d| {
                let value = param_f64(p, "value", Some(1.0))?;
                scaled(TerminalKind::Constant { value }, p, d)
            }),
        );
        r.register_terminal(
            "coordinate",
            Arc::new(move |p, d| scaled(TerminalKind::Coordinate { index: param_index(p)? }, p, d)),
        );
        r.register_terminal("square", Arc::new(move |p, d| scaled(TerminalKind::Square, p, d)));
        r.register_terminal(
            "average",
            Arc::new(move |p, d| scaled(TerminalKind::Average { index: param_index(p)? }, p, d)),
        );
        r.register_terminal(
            "max",
            Arc::new(move |p, d| scaled(TerminalKind::Max { index: param_index(p)? }, p, d)),
        );
        r.register_terminal(
            "call",
            Arc::new(move |p, d| {
                let strike = param_f64(p, "strike", None)?;
                scaled(
                    TerminalKind::Call {
                        index: param_index(p)?,
                        strike,
                    },
                    p,
                    d,
                )
            }),
        );
        r
    }
}

impl Registry {
    pub fn register_generator(&mut self, name: &str, factory: GeneratorFactory) {
        self.generators.insert(name.to_owned(), factory);
    }

    pub fn register_terminal(&mut self, name: &str, factory: TerminalFactory) {
        self.terminals.insert(name.to_owned(), factory);
    }

    pub fn generator(
        &self,
        name: &str,
        params: &Value,
        dim: usize,
    ) -> Result<GeneratorSpec, FunctionalError> {
        let factory = self
            .generators
            .get(name)
            .ok_or_else(|| FunctionalError::UnknownName {
                kind: "generator",
                name: name.into(),
            })?;
        factory(params, dim)
    }

    pub fn terminal(
        &self,
        name: &str,
        params: &Value,
        dim: usize,
    ) -> Result<TerminalSpec, FunctionalError> {
        let factory = self
            .terminals
            .get(name)
            .ok_or_else(|| FunctionalError::UnknownName {
                kind: "terminal",
                name: name.into(),
            })?;
        factory(params, dim)
    }

    pub fn generator_names(&self) -> impl Iterator<Item = &str> {
        self.generators.keys().map(String::as_str)
    }

    pub fn terminal_names(&self) -> impl Iterator<Item = &str> {
        self.terminals.keys().map(String::as_str)
    }
}

/// Largest Euclidean row norm of the path, i.e. `‖ω‖_T`.
pub fn path_radius(path: &DiscretePath) -> f64 {
    path.rows().map(euclidean).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::TimeGrid;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use serde_json::json;

    fn path(t: f64, rows: &[f64]) -> DiscretePath {
        let g = TimeGrid::new(t, rows.len() - 1).unwrap();
        DiscretePath::from_rows(g, &rows.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    fn scalar(x: f64) -> Matrix {
        Matrix::from_element(1, 1, x)
    }

    #[test]
    fn terminal_examples() {
        let p = path(1.0, &[0.0, 0.3]);
        let coord = TerminalSpec::new(TerminalKind::Coordinate { index: 0 }, 1).unwrap();
        assert_eq!(coord.eval(&p).unwrap(), 0.3);
        let sq = TerminalSpec::new(TerminalKind::Square, 1).unwrap();
        assert_abs_diff_eq!(sq.eval(&p).unwrap(), 0.09, epsilon = 1e-16);
        let avg = TerminalSpec::new(TerminalKind::Average { index: 0 }, 1).unwrap();
        assert_abs_diff_eq!(avg.eval(&path(1.0, &[0.0, 0.2, 0.4])).unwrap(), 0.3, epsilon = 1e-16);
        let max = TerminalSpec::new(TerminalKind::Max { index: 0 }, 1).unwrap();
        assert_eq!(max.eval(&path(1.0, &[0.0, -0.5, 0.4])).unwrap(), 0.5);
        let call = TerminalSpec::new(TerminalKind::Call { index: 0, strike: 0.1 }, 1).unwrap();
        assert_abs_diff_eq!(call.eval(&p).unwrap(), 0.2, epsilon = 1e-16);
    }

    #[test]
    fn terminal_needs_terminal_path() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let p = DiscretePath::origin(g, 1).unwrap().concat(&[0.1]).unwrap();
        let sq = TerminalSpec::new(TerminalKind::Square, 1).unwrap();
        assert_eq!(sq.eval(&p), Err(FunctionalError::NotTerminal { upto: 1, steps: 2 }));
        assert!(matches!(
            TerminalSpec::new(TerminalKind::Coordinate { index: 1 }, 1),
            Err(FunctionalError::CoordinateOutOfRange { .. })
        ));
    }

    #[test]
    fn shapes() {
        let r = Registry::default();
        let neg = r.terminal("square", &json!({"scale": -1.0}), 1).unwrap();
        assert_eq!(neg.shape(), Shape::Concave);
        assert_eq!(r.terminal("average", &json!({}), 1).unwrap().shape(), Shape::Affine);
        assert_eq!(r.terminal("call", &json!({"strike": 0.0}), 1).unwrap().shape(), Shape::Convex);
    }

    #[test]
    fn generator_examples() {
        let p = path(1.0, &[0.0, 0.0]);
        let heat = GeneratorSpec::new(GeneratorKind::Heat, 1).unwrap();
        assert_eq!(eval_generator(&heat, 0, &p, 0.0, &[0.0], &scalar(2.0)).unwrap(), 1.0);
        let semi = GeneratorSpec::new(GeneratorKind::Semilinear { lambda: 1.0 }, 1).unwrap();
        assert_eq!(semi.eval(0.0, &p, 3.0, &[0.0], &scalar(0.0)).unwrap(), 3.0);
        let gh = GeneratorSpec::new(
            GeneratorKind::GHeat {
                sigma_low: 0.5,
                sigma_high: 1.0,
            },
            1,
        )
        .unwrap();
        assert_eq!(gh.eval(0.0, &p, 0.0, &[0.0], &scalar(-2.0)).unwrap(), -0.25);
        assert_eq!(gh.eval(0.0, &p, 0.0, &[0.0], &scalar(2.0)).unwrap(), 1.0);
    }

    #[test]
    fn asymmetric_gamma_rejected() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let p = DiscretePath::origin(g, 2).unwrap();
        let heat = GeneratorSpec::new(GeneratorKind::Heat, 2).unwrap();
        let gamma = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert_eq!(
            heat.eval(0.0, &p, 0.0, &[0.0, 0.0], &gamma),
            Err(FunctionalError::AsymmetricGamma { row: 0, col: 1 })
        );
    }

    fn point(d: usize, y: f64, gamma: Matrix) -> GeneratorPoint {
        let g = TimeGrid::new(1.0, 1).unwrap();
        GeneratorPoint {
            t: 0.0,
            path: DiscretePath::origin(g, d).unwrap(),
            y,
            z: vec![0.0; d],
            gamma,
        }
    }

    #[test]
    fn derivative_examples() {
        let heat = GeneratorSpec::new(GeneratorKind::Heat, 2).unwrap();
        let b = heat.derivatives(&point(2, 0.7, Matrix::identity(2, 2))).unwrap();
        assert_eq!(b.dy, 0.0);
        assert_eq!(b.dz, vec![0.0, 0.0]);
        assert_eq!(b.dgamma, Matrix::identity(2, 2) * 0.5);
        assert_eq!(b.method, DerivMethod::Analytic);

        let semi = GeneratorSpec::new(GeneratorKind::Semilinear { lambda: 1.0 }, 1).unwrap();
        let b = semi.derivatives(&point(1, 0.0, scalar(0.0))).unwrap();
        assert_eq!(b.dy, 1.0);
        assert_eq!(b.dgamma[(0, 0)], 0.5);

        let gh = GeneratorSpec::new(
            GeneratorKind::GHeat {
                sigma_low: 0.5,
                sigma_high: 1.0,
            },
            1,
        )
        .unwrap();
        assert_eq!(gh.derivatives(&point(1, 0.0, scalar(3.0))).unwrap().dgamma[(0, 0)], 0.5);
        assert_eq!(gh.derivatives(&point(1, 0.0, scalar(-3.0))).unwrap().dgamma[(0, 0)], 0.125);
        // kink: upper envelope
        assert_eq!(gh.derivatives(&point(1, 0.0, scalar(0.0))).unwrap().dgamma[(0, 0)], 0.5);
    }

    /// Smooth nonlinear generator used to check the finite-difference order.
    #[derive(Debug)]
    struct Smooth;

    impl CustomGenerator for Smooth {
        fn name(&self) -> &str {
            "smooth"
        }
        fn eval(&self, _t: f64, _p: &DiscretePath, y: f64, z: &[f64], g: &Matrix) -> f64 {
            y.sin() + z.iter().map(|v| v.exp()).sum::<f64>() + (g.trace()).exp() + g[(0, 1)].powi(3)
        }
        fn derivatives(
            &self,
            _t: f64,
            _p: &DiscretePath,
            y: f64,
            z: &[f64],
            g: &Matrix,
        ) -> Option<(f64, Vec<f64>, Matrix)> {
            let e = g.trace().exp();
            let c = 1.5 * g[(0, 1)].powi(2);
            Some((
                y.cos(),
                z.iter().map(|v| v.exp()).collect(),
                Matrix::from_row_slice(2, 2, &[e, c, c, e]),
            ))
        }
        fn lipschitz(&self) -> f64 {
            f64::INFINITY
        }
    }

    fn max_error(a: &DerivativeBundle, b: &DerivativeBundle) -> f64 {
        let mut e = (a.dy - b.dy).abs();
        for (x, y) in a.dz.iter().zip(&b.dz) {
            e = e.max((x - y).abs());
        }
        for (x, y) in a.dgamma.iter().zip(b.dgamma.iter()) {
            e = e.max((x - y).abs());
        }
        e
    }

    #[test]
    fn central_difference_is_second_order() {
        let gen = GeneratorSpec::new(GeneratorKind::Custom(Arc::new(Smooth)), 2).unwrap();
        let mut rng = crate::rng::StreamRng::new(11);
        for _ in 0..100 {
            let mut pt = point(2, rng.uniform_in(-1.0, 1.0), Matrix::zeros(2, 2));
            pt.z = vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)];
            let off = rng.uniform_in(-0.5, 0.5);
            pt.gamma = Matrix::from_row_slice(
                2,
                2,
                &[rng.uniform_in(-0.5, 0.5), off, off, rng.uniform_in(-0.5, 0.5)],
            );
            let exact = gen.derivatives(&pt).unwrap();
            // a coarse step keeps truncation well above roundoff
            let coarse = max_error(&gen.central_difference(&pt, 1e3).unwrap(), &exact);
            let fine = max_error(&gen.central_difference(&pt, 5e2).unwrap(), &exact);
            assert!(fine <= coarse / 4.0 * 1.1 + 1e-12, "coarse {coarse} fine {fine}");
            let default = gen.central_difference(&pt, 1.0).unwrap();
            assert!(max_error(&default, &exact) < 1e-8);
        }
    }

    #[test]
    fn central_difference_matches_builtins() {
        let r = Registry::default();
        for (name, params) in [
            ("heat", json!({})),
            ("semilinear", json!({"lambda": 1.0})),
            ("g-heat", json!({"sigma_low": 0.5, "sigma_high": 1.0})),
        ] {
            let gen = r.generator(name, &params, 2).unwrap();
            let pt = point(2, 0.4, Matrix::from_row_slice(2, 2, &[0.7, 0.2, 0.2, -0.9]));
            let a = gen.derivatives(&pt).unwrap();
            let c = gen.central_difference(&pt, 1.0).unwrap();
            assert!(max_error(&a, &c) < 1e-9, "{name}");
        }
    }

    #[test]
    fn test_functional_examples() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let p = DiscretePath::from_rows(g, &[vec![0.0], vec![0.3]]).unwrap();
        let sq = TestFunctionalSpec::monomial(0, 2, 0);
        let v = eval_test_functional(&sq, 1, &p).unwrap();
        assert_abs_diff_eq!(v.value, 0.09, epsilon = 1e-16);
        assert_eq!((v.dt, v.dx[0], v.dxx[(0, 0)]), (0.0, 0.6, 2.0));

        let tx = TestFunctionalSpec::monomial(1, 1, 0);
        let v = tx.eval(1, &p).unwrap();
        assert_abs_diff_eq!(v.value, 0.15, epsilon = 1e-16);
        assert_eq!((v.dt, v.dx[0], v.dxx[(0, 0)]), (0.3, 0.5, 0.0));

        let integral = TestFunctionalSpec::Integral {
            base: Arc::new(IntegralIdentity),
            coordinate: 0,
        };
        let p = DiscretePath::from_rows(g, &[vec![0.0], vec![0.2], vec![0.4]]).unwrap();
        let v = integral.eval(2, &p).unwrap();
        assert_abs_diff_eq!(v.value, 0.3, epsilon = 1e-16);
        assert_eq!((v.dt, v.dx[0], v.dxx[(0, 0)]), (0.4, 0.0, 0.0));
        assert!(integral.eval(3, &p).is_err());
    }

    #[test]
    fn registry_lookup_errors() {
        let r = Registry::default();
        assert!(matches!(
            r.generator("nope", &json!({}), 1),
            Err(FunctionalError::UnknownName { .. })
        ));
        assert!(matches!(
            r.generator("semilinear", &json!({}), 1),
            Err(FunctionalError::BadParameter { .. })
        ));
        assert!(matches!(
            r.generator("g-heat", &json!({"sigma_low": 2.0, "sigma_high": 1.0}), 1),
            Err(FunctionalError::BadParameter { .. })
        ));
        assert!(r.terminal("call", &json!({"strike": "x"}), 1).is_err());
        assert_eq!(r.generator_names().collect::<Vec<_>>(), ["g-heat", "heat", "semilinear"]);
    }

    fn spd_bump(entries: &[f64]) -> Matrix {
        let a = Matrix::from_row_slice(2, 2, entries);
        &a * a.transpose()
    }

    proptest! {
        #[test]
        fn generators_are_parabolic(
            g in prop::collection::vec(-3.0f64..3.0, 3),
            a in prop::collection::vec(-2.0f64..2.0, 4),
            y in -2.0f64..2.0,
        ) {
            let r = Registry::default();
            let p = DiscretePath::origin(TimeGrid::new(1.0, 1).unwrap(), 2).unwrap();
            let low = Matrix::from_row_slice(2, 2, &[g[0], g[1], g[1], g[2]]);
            let high = &low + spd_bump(&a);
            let high = (&high + high.transpose()) * 0.5;
            for (name, params) in [
                ("heat", json!({})),
                ("semilinear", json!({"lambda": -0.7})),
                ("g-heat", json!({"sigma_low": 0.5, "sigma_high": 1.0})),
            ] {
                let gen = r.generator(name, &params, 2).unwrap();
                let lo = gen.eval(0.0, &p, y, &[0.0, 0.0], &low).unwrap();
                let hi = gen.eval(0.0, &p, y, &[0.0, 0.0], &high).unwrap();
                prop_assert!(lo <= hi + 1e-12, "{name}: {lo} > {hi}");
            }
        }

        #[test]
        fn terminal_lipschitz(
            a in prop::collection::vec(-1.0f64..1.0, 8),
            b in prop::collection::vec(-1.0f64..1.0, 8),
        ) {
            let g = TimeGrid::new(1.0, 4).unwrap();
            let build = |v: &[f64]| {
                let mut rows = vec![vec![0.0, 0.0]];
                rows.extend(v.chunks(2).map(|c| c.to_vec()));
                DiscretePath::from_rows(g, &rows).unwrap()
            };
            let (pa, pb) = (build(&a), build(&b));
            let dist = pa.rows().zip(pb.rows())
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let radius = path_radius(&pa).max(path_radius(&pb));
            let r = Registry::default();
            for (name, params) in [
                ("constant", json!({"value": 2.0})),
                ("coordinate", json!({"index": 1})),
                ("square", json!({"scale": -0.5})),
                ("average", json!({})),
                ("max", json!({"index": 1})),
                ("call", json!({"strike": 0.1, "scale": 2.0})),
            ] {
                let t = r.terminal(name, &params, 2).unwrap();
                let diff = (t.eval(&pa).unwrap() - t.eval(&pb).unwrap()).abs();
                prop_assert!(diff <= t.lipschitz(radius) * dist + 1e-12, "{name}");
            }
        }
    }
}
