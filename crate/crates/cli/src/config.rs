//! The JSON run configuration and its validation.

use std::io::Read;
use std::path::PathBuf;

use ppde_core::{
    Anchor, FunctionalError, GeneratorSpec, MemoPolicy, OutputFormat, ProblemSpec, Registry,
    SampleSpec, SchemeParams, StencilError, TerminalSpec, TestFunctionalSpec, TimeGrid,
    DEFAULT_BUDGET,
};
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedConfig {
    pub name: String,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "one")]
    pub dimension: usize,
    #[serde(default = "unit")]
    pub horizon: f64,
    pub generator: NamedConfig,
    pub terminal: NamedConfig,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

/// A scalar applied to every coordinate, or one value per coordinate.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerCoordinate {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PerCoordinate {
    fn expand(&self, d: usize, field: &str) -> Result<Vec<f64>, CliError> {
        match self {
            PerCoordinate::Scalar(x) => Ok(vec![*x; d]),
            PerCoordinate::Vector(v) if v.len() == d => Ok(v.clone()),
            PerCoordinate::Vector(v) => Err(CliError::config(
                field,
                format!("expected {d} entries, got {}", v.len()),
            )),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    pub mu: Option<PerCoordinate>,
    pub sigma: Option<PerCoordinate>,
    pub quad_order: usize,
    pub epsilon0: f64,
    pub memo: Option<String>,
    pub budget: u64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            mu: None,
            sigma: None,
            quad_order: ppde_core::stencil::DEFAULT_QUAD_ORDER,
            epsilon0: 0.5,
            memo: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalConfig {
    /// `t^time_power · x[coordinate]^space_power`
    Monomial {
        #[serde(default)]
        time_power: u32,
        space_power: u32,
        #[serde(default)]
        coordinate: usize,
    },
    /// The running integral `Σ ω_{t_j}[coordinate] h`.
    Integral {
        #[serde(default)]
        coordinate: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfig {
    pub t: f64,
    pub x: PerCoordinate,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub h_list: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub sample: Option<SampleSpec>,
    pub functional: Option<FunctionalConfig>,
    pub anchor: Option<AnchorConfig>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub budget: Option<u64>,
}

impl RunConfig {
    /// Reads JSON from `path`, or from stdin when `path` is `-`.
    pub fn load(path: &str) -> Result<Self, CliError> {
        let text = if path == "-" {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| CliError::config("config", format!("cannot read stdin: {e}")))?;
            s
        } else {
            std::fs::read_to_string(path)
                .map_err(|e| CliError::config("config", format!("cannot read {path}: {e}")))?
        };
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "config".to_string() } else { path };
            CliError::config(&field, e.into_inner().to_string())
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.n.is_some() {
            self.run.n = o.n;
        }
        if o.seed.is_some() {
            self.run.seed = o.seed;
        }
        if o.out.is_some() {
            self.run.out.clone_from(&o.out);
        }
        if o.format.is_some() {
            self.run.format.clone_from(&o.format);
        }
        if let Some(b) = o.budget {
            self.scheme.budget = b;
        }
    }

    pub fn dim(&self) -> usize {
        self.problem.dimension
    }

    fn check_problem_scalars(&self) -> Result<(), CliError> {
        if self.problem.dimension == 0 {
            return Err(CliError::config("problem.dimension", "must be at least 1"));
        }
        let t = self.problem.horizon;
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::config(
                "problem.horizon",
                format!("must be positive and finite, got {t}"),
            ));
        }
        Ok(())
    }

    pub fn generator(&self) -> Result<GeneratorSpec, CliError> {
        self.check_problem_scalars()?;
        let g = &self.problem.generator;
        Registry::default()
            .generator(&g.name, &g.params, self.dim())
            .map_err(|e| registry_error("problem.generator", e))
    }

    pub fn terminal(&self) -> Result<TerminalSpec, CliError> {
        self.check_problem_scalars()?;
        let g = &self.problem.terminal;
        Registry::default()
            .terminal(&g.name, &g.params, self.dim())
            .map_err(|e| registry_error("problem.terminal", e))
    }

    pub fn steps(&self) -> Result<usize, CliError> {
        match self.run.n {
            Some(0) => Err(CliError::config("run.n", "must be at least 1")),
            Some(n) => Ok(n),
            None => Err(CliError::config("run.n", "missing (set it in the config or pass --n)")),
        }
    }

    pub fn problem(&self, steps: usize) -> Result<ProblemSpec, CliError> {
        let generator = self.generator()?;
        let terminal = self.terminal()?;
        let grid = TimeGrid::new(self.problem.horizon, steps)
            .map_err(|e| CliError::config("run.n", e.to_string()))?;
        ProblemSpec::new(grid, generator, terminal).map_err(CliError::internal)
    }

    pub fn params(&self) -> Result<SchemeParams, CliError> {
        let d = self.dim();
        let s = &self.scheme;
        let mu = s
            .mu
            .as_ref()
            .ok_or_else(|| CliError::config("scheme.mu", "missing"))?
            .expand(d, "scheme.mu")?;
        let sigma = s
            .sigma
            .as_ref()
            .ok_or_else(|| CliError::config("scheme.sigma", "missing"))?
            .expand(d, "scheme.sigma")?;
        let params = SchemeParams {
            mu,
            sigma,
            quad_order: s.quad_order,
            epsilon0: s.epsilon0,
        };
        params.validate().map_err(stencil_error)?;
        Ok(params)
    }

    /// Checks the fields that only `--suggest` reads.
    pub fn check_search_fields(&self) -> Result<(), CliError> {
        let probe = SchemeParams::uniform(self.dim().max(1), 1.0, 1.0)
            .with_quad_order(self.scheme.quad_order)
            .with_epsilon0(self.scheme.epsilon0);
        probe.validate().map_err(stencil_error)
    }

    pub fn memo(&self) -> Result<Option<MemoPolicy>, CliError> {
        self.scheme
            .memo
            .as_deref()
            .filter(|m| *m != "none")
            .map(|m| m.parse().map_err(|e: String| CliError::config("scheme.memo", e)))
            .transpose()
    }

    pub fn budget(&self) -> Result<u64, CliError> {
        match self.scheme.budget {
            0 => Err(CliError::config("scheme.budget", "must be at least 1")),
            b => Ok(b),
        }
    }

    pub fn format(&self, default: OutputFormat) -> Result<OutputFormat, CliError> {
        self.run
            .format
            .as_deref()
            .map(|f| f.parse().map_err(|e: String| CliError::config("run.format", e)))
            .unwrap_or(Ok(default))
    }

    pub fn n_list(&self) -> Result<Vec<usize>, CliError> {
        self.run
            .n_list
            .clone()
            .ok_or_else(|| CliError::config("run.n_list", "missing"))
    }

    pub fn h_list(&self) -> Result<Vec<f64>, CliError> {
        let hs = self
            .run
            .h_list
            .clone()
            .ok_or_else(|| CliError::config("run.h_list", "missing"))?;
        if hs.is_empty() || hs.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(CliError::config("run.h_list", "entries must be positive"));
        }
        Ok(hs)
    }

    pub fn sample(&self) -> SampleSpec {
        let mut s = self.run.sample.clone().unwrap_or_default();
        if let Some(seed) = self.run.seed {
            s.seed = seed;
        }
        s
    }

    pub fn functional(&self) -> Result<TestFunctionalSpec, CliError> {
        let d = self.dim();
        let f = self
            .run
            .functional
            .as_ref()
            .ok_or_else(|| CliError::config("run.functional", "missing"))?;
        let coordinate = match f {
            FunctionalConfig::Monomial { coordinate, .. } | FunctionalConfig::Integral { coordinate } => {
                *coordinate
            }
        };
        if coordinate >= d {
            return Err(CliError::config(
                "run.functional.coordinate",
                format!("{coordinate} is out of range for dimension {d}"),
            ));
        }
        Ok(match f {
            FunctionalConfig::Monomial {
                time_power,
                space_power,
                coordinate,
            } => TestFunctionalSpec::monomial(*time_power, *space_power, *coordinate),
            FunctionalConfig::Integral { coordinate } => TestFunctionalSpec::Integral {
                base: std::sync::Arc::new(ppde_core::functionals::IntegralIdentity),
                coordinate: *coordinate,
            },
        })
    }

    pub fn anchor(&self) -> Result<Anchor, CliError> {
        let a = self
            .run
            .anchor
            .as_ref()
            .ok_or_else(|| CliError::config("run.anchor", "missing"))?;
        if !(a.t.is_finite() && a.t >= 0.0) {
            return Err(CliError::config("run.anchor.t", "must be non-negative"));
        }
        Ok(Anchor {
            t: a.t,
            x: a.x.expand(self.dim(), "run.anchor.x")?,
        })
    }
}

fn stencil_error(e: StencilError) -> CliError {
    match e {
        StencilError::InvalidParam { field, reason } => {
            CliError::config(&format!("scheme.{field}"), reason)
        }
        other => CliError::config("scheme", other.to_string()),
    }
}

fn registry_error(prefix: &str, e: FunctionalError) -> CliError {
    match e {
        FunctionalError::UnknownName { .. } => CliError::config(&format!("{prefix}.name"), e.to_string()),
        FunctionalError::BadParameter { name, reason } => {
            CliError::config(&format!("{prefix}.params.{name}"), reason)
        }
        FunctionalError::CoordinateOutOfRange { .. } => {
            CliError::config(&format!("{prefix}.params.index"), e.to_string())
        }
        other => CliError::config(prefix, other.to_string()),
    }
}
