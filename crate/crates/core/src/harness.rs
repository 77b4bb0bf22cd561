//! Convergence studies, consistency sweeps and stability probes, with CSV and
//! JSON output.

use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::functionals::{FunctionalError, GeneratorSpec, TestFunctionalSpec};
use crate::oracles::{closed_form, OracleError};
use crate::path::{euclidean, DiscretePath, PathError, TimeGrid};
use crate::rng::StreamRng;
use crate::scheme::{apply_step_with, evaluate_uh, solve, ProblemSpec, SchemeError, SolveOptions};
use crate::stencil::{SchemeParams, StencilSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Errors at or below this many ulps of the reference scale count as exact.
pub const EXACT_ULPS: f64 = 64.0;

fn is_exact(error: f64, scale: f64) -> bool {
    error <= EXACT_ULPS * f64::EPSILON * scale.abs().max(1.0)
}

/// Least-squares slope of `ln e` against `ln h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// 95% Student-t half-width; needs at least three points.
    pub halfwidth: Option<f64>,
    pub points: usize,
}

/// Fits `ln e = a + s ln h` over the points with `e > 0`. Returns `None` with
/// fewer than two usable points.
pub fn fit_slope(hs: &[f64], errors: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errors)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    let m = pts.len();
    if m < 2 {
        return None;
    }
    let mf = m as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let halfwidth = (m >= 3).then(|| {
        let intercept = my - slope * mx;
        let ssr: f64 = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        let df = mf - 2.0;
        let t = StudentsT::new(0.0, 1.0, df)
            .expect("df is positive")
            .inverse_cdf(0.975);
        t * (ssr / df / sxx).sqrt()
    });
    Some(SlopeFit {
        slope,
        halfwidth,
        points: m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `None` when the table is exact or has too few nonzero errors.
    pub slope: Option<f64>,
    pub slope_halfwidth: Option<f64>,
    pub exact: bool,
}

impl ConvergenceTable {
    /// Builds the table from rows, sorting by decreasing `h` and fitting the
    /// slope unless every error is at roundoff level.
    pub fn from_rows(mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by(|a, b| b.h.total_cmp(&a.h));
        let exact = !rows.is_empty() && rows.iter().all(|r| is_exact(r.error, r.reference));
        let fit = if exact {
            None
        } else {
            let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
            let es: Vec<f64> = rows.iter().map(|r| r.error).collect();
            fit_slope(&hs, &es)
        };
        Self {
            rows,
            slope: fit.map(|f| f.slope),
            slope_halfwidth: fit.and_then(|f| f.halfwidth),
            exact,
        }
    }

    pub fn errors_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

fn check_steps(ns: &[usize]) -> Result<(), HarnessError> {
    if ns.len() < 3 {
        return Err(HarnessError::BadInput(format!(
            "need at least 3 step counts, got {}",
            ns.len()
        )));
    }
    if let Some(n) = ns.iter().find(|&&n| n < 2) {
        return Err(HarnessError::BadInput(format!("step counts must be >= 2, got {n}")));
    }
    let mut sorted = ns.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != ns.len() {
        return Err(HarnessError::BadInput("step counts must be distinct".into()));
    }
    Ok(())
}

/// `|u^h(0, 0) − u(0, 0)|` over several step counts, against the closed form.
pub fn convergence_study(
    problem: &ProblemSpec,
    params: &SchemeParams,
    ns: &[usize],
    options: &SolveOptions,
) -> Result<ConvergenceTable, HarnessError> {
    check_steps(ns)?;
    let reference = closed_form(problem, 0, &problem.origin())?.value;
    let rows = ns
        .par_iter()
        .map(|&n| {
            let pr = problem.with_steps(n)?;
            let r = solve(&pr, params, options)?;
            Ok(ConvergenceRow {
                n,
                h: pr.grid.step(),
                value: r.value,
                reference,
                error: (r.value - reference).abs(),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(ConvergenceTable::from_rows(rows))
}

/// Anchor `(t, x)` of a consistency sweep. On each grid the anchor path is
/// the straight line from the origin to `x` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub t: f64,
    pub x: Vec<f64>,
}

impl Anchor {
    /// The anchor skeleton on a grid of step `h` ending one step after `t`.
    pub fn skeleton(&self, h: f64) -> Result<(usize, DiscretePath), HarnessError> {
        let ratio = self.t / h;
        let i = ratio.round();
        if h.is_nan() || h <= 0.0 || (ratio - i).abs() > 1e-9 * ratio.max(1.0) {
            return Err(HarnessError::BadInput(format!(
                "anchor time {} is not a multiple of h = {h}",
                self.t
            )));
        }
        let i = i as usize;
        if i == 0 && self.x.iter().any(|v| *v != 0.0) {
            return Err(HarnessError::BadInput(
                "anchor at t = 0 must sit at the origin".into(),
            ));
        }
        let grid = TimeGrid::new(h * (i + 1) as f64, i + 1)?;
        let rows: Vec<Vec<f64>> = (0..=i)
            .map(|j| self.x.iter().map(|v| v * j as f64 / i.max(1) as f64).collect())
            .collect();
        Ok((i, DiscretePath::from_rows(grid, &rows)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub h: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyTable {
    pub rows: Vec<ConsistencyRow>,
    pub slope: Option<f64>,
    pub slope_halfwidth: Option<f64>,
    pub exact: bool,
}

/// `|(φ(t, ω) − T_h[φ(t + h, ·)])/h − 𝓛φ(t, ω)|` for each `h`, where
/// `𝓛φ = −∂_tφ − G(t, ω, φ, ∂_ωφ, ∂²_ωφ)`.
pub fn consistency_sweep(
    phi: &TestFunctionalSpec,
    generator: &GeneratorSpec,
    params: &SchemeParams,
    anchor: &Anchor,
    hs: &[f64],
) -> Result<ConsistencyTable, HarnessError> {
    if hs.is_empty() {
        return Err(HarnessError::BadInput("empty step list".into()));
    }
    if anchor.x.len() != generator.dim {
        return Err(HarnessError::BadInput(format!(
            "anchor has dimension {}, generator {}",
            anchor.x.len(),
            generator.dim
        )));
    }
    let mut scale: f64 = 0.0;
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let (i, path) = anchor.skeleton(h)?;
        let set = StencilSet::new(params, h).map_err(SchemeError::from)?;
        let here = phi.eval(i, &path)?;
        let stepped = apply_step_with(&set, generator, &path, |child| {
            Ok(phi.eval(i + 1, child)?.value)
        })?;
        let g = generator.eval(path.time(), &path, here.value, &here.dx, &here.dxx)?;
        let op = -here.dt - g;
        scale = scale.max(op.abs()).max(here.value.abs());
        rows.push(ConsistencyRow {
            h,
            residual: ((here.value - stepped) / h - op).abs(),
        });
    }
    rows.sort_by(|a, b| b.h.total_cmp(&a.h));
    let exact = rows.iter().all(|r| is_exact(r.residual, scale));
    let fit = if exact {
        None
    } else {
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let rs: Vec<f64> = rows.iter().map(|r| r.residual).collect();
        fit_slope(&hs, &rs)
    };
    Ok(ConsistencyTable {
        rows,
        slope: fit.map(|f| f.slope),
        slope_halfwidth: fit.and_then(|f| f.halfwidth),
        exact,
    })
}

/// Random skeleton bumps for [`stability_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationSpec {
    /// Pairs drawn for each of the two ratios.
    pub count: usize,
    /// Bumps are uniform in `[−magnitude, magnitude]` per entry.
    pub magnitude: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            count: 16,
            magnitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub n: usize,
    pub h: f64,
    /// `sup |u^h(t_i, ω¹) − u^h(t_i, ω²)| / ‖ω¹ − ω²‖_{t_i}`
    pub lipschitz_ratio: f64,
    pub lipschitz_pairs: usize,
    /// `sup |u^h(t_i, ω) − u^h(t_j, ω_{·∧t_i})| / √(t_j − t_i + h)`
    pub time_ratio: f64,
    pub time_pairs: usize,
}

/// Empirical space and time regularity of `u^h` on an `n`-step grid.
///
/// The first space pair shifts every non-origin node by the same amount; the
/// first time pair is `(0, T)` on the zero path.
pub fn stability_probe(
    problem: &ProblemSpec,
    params: &SchemeParams,
    n: usize,
    perturbation: &PerturbationSpec,
    seed: u64,
    options: &SolveOptions,
) -> Result<StabilityReport, HarnessError> {
    if !(perturbation.magnitude.is_finite() && perturbation.magnitude >= 0.0) {
        return Err(HarnessError::BadInput(format!(
            "perturbation magnitude must be non-negative, got {}",
            perturbation.magnitude
        )));
    }
    let pr = problem.with_steps(n)?;
    let grid = pr.grid;
    let d = pr.dim();
    let h = grid.step();
    let mut rng = StreamRng::new(seed);
    let uh = |i: usize, w: &DiscretePath| evaluate_uh(&pr, params, i, w, options).map(|r| r.value);

    let random_path = |rng: &mut StreamRng, upto: usize| -> Result<DiscretePath, HarnessError> {
        let mut w = pr.origin();
        for _ in 0..upto {
            let delta: Vec<f64> = (0..d).map(|_| h.sqrt() * rng.normal()).collect();
            w = w.concat(&delta)?;
        }
        Ok(w)
    };

    let mut lipschitz: f64 = 0.0;
    let mut lipschitz_pairs = 0;
    for k in 0..perturbation.count {
        let i = 1 + (rng.next_u64() % n as u64) as usize;
        let base = random_path(&mut rng, i)?;
        let shift: Vec<f64> = (0..d)
            .map(|_| rng.uniform_in(-1.0, 1.0) * perturbation.magnitude)
            .collect();
        let mut values = base.as_flat().to_vec();
        for row in values.chunks_mut(d).skip(1) {
            for (c, v) in row.iter_mut().enumerate() {
                *v += if k == 0 {
                    shift[c]
                } else {
                    rng.uniform_in(-1.0, 1.0) * perturbation.magnitude
                };
            }
        }
        let bumped = DiscretePath::from_flat(grid, d, values)?;
        let dist = base
            .rows()
            .zip(bumped.rows())
            .map(|(a, b)| {
                let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                euclidean(&diff)
            })
            .fold(0.0, f64::max);
        if dist == 0.0 {
            continue;
        }
        let du = (uh(i, &base)? - uh(i, &bumped)?).abs();
        lipschitz = lipschitz.max(du / dist);
        lipschitz_pairs += 1;
    }

    let mut time_ratio: f64 = 0.0;
    let mut time_pairs = 0;
    for k in 0..perturbation.count.max(1) {
        let (i, j, base) = if k == 0 {
            (0, n, pr.origin())
        } else {
            let i = (rng.next_u64() % n as u64) as usize;
            let j = i + 1 + (rng.next_u64() % (n - i) as u64) as usize;
            (i, j, random_path(&mut rng, i)?)
        };
        let frozen = base.frozen_until(j)?;
        let du = (uh(i, &base)? - uh(j, &frozen)?).abs();
        let dt = grid.time(j) - grid.time(i);
        time_ratio = time_ratio.max(du / (dt + h).sqrt());
        time_pairs += 1;
    }

    Ok(StabilityReport {
        n,
        h,
        lipschitz_ratio: lipschitz,
        lipschitz_pairs,
        time_ratio,
        time_pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// A table that [`emit`] can write.
pub trait Tabular: Serialize {
    fn csv_header(&self) -> &'static str;
    fn csv_rows(&self) -> Vec<Vec<String>>;
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl Tabular for ConvergenceTable {
    fn csv_header(&self) -> &'static str {
        "n,h,value,reference,error"
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    num(r.h),
                    num(r.value),
                    num(r.reference),
                    num(r.error),
                ]
            })
            .collect()
    }
}

impl Tabular for ConsistencyTable {
    fn csv_header(&self) -> &'static str {
        "h,residual"
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| vec![num(r.h), num(r.residual)])
            .collect()
    }
}

/// The table as CSV (floats in `{:.16e}`, `\n` line ends) or a single JSON object.
pub fn render<T: Tabular>(table: &T, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::new();
            out.push_str(table.csv_header());
            out.push('\n');
            for row in table.csv_rows() {
                let _ = writeln!(out, "{}", row.join(","));
            }
            out
        }
        OutputFormat::Json => {
            let mut s = serde_json::to_string(table).expect("tables serialise");
            s.push('\n');
            s
        }
    }
}

/// Writes [`render`] output to `path`.
pub fn emit<T: Tabular>(table: &T, path: &Path, format: OutputFormat) -> io::Result<()> {
    std::fs::write(path, render(table, format))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{GeneratorKind, TerminalKind, TerminalSpec};
    use crate::scheme::MemoPolicy;
    use proptest::prelude::*;

    fn problem(kind: GeneratorKind, terminal: TerminalKind, n: usize) -> ProblemSpec {
        ProblemSpec::new(
            TimeGrid::new(1.0, n).unwrap(),
            GeneratorSpec::new(kind, 1).unwrap(),
            TerminalSpec::new(terminal, 1).unwrap(),
        )
        .unwrap()
    }

    fn params() -> SchemeParams {
        SchemeParams::uniform(1, 1.0, 2.0)
    }

    #[test]
    fn slope_self_test() {
        let hs = [0.5, 0.25, 0.125, 0.0625];
        let es: Vec<f64> = hs.iter().map(|h| 3.7 * h).collect();
        let fit = fit_slope(&hs, &es).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
        assert!(fit.halfwidth.unwrap() < 1e-9);
        assert!(fit_slope(&[0.5], &[0.1]).is_none());
        assert!(fit_slope(&[0.5, 0.25], &[0.0, 0.0]).is_none());
        assert_eq!(fit_slope(&[0.5, 0.25], &[0.2, 0.1]).unwrap().halfwidth, None);
    }

    proptest! {
        #[test]
        fn slope_recovers_power_laws(c in 0.01f64..100.0, p in 0.2f64..3.0, k in 3usize..7) {
            let hs: Vec<f64> = (0..k).map(|j| 0.5f64.powi(j as i32)).collect();
            let es: Vec<f64> = hs.iter().map(|h| c * h.powf(p)).collect();
            let fit = fit_slope(&hs, &es).unwrap();
            prop_assert!((fit.slope - p).abs() < 1e-9);
        }
    }

    #[test]
    fn convergence_examples() {
        let semi = problem(
            GeneratorKind::Semilinear { lambda: 1.0 },
            TerminalKind::Constant { value: 1.0 },
            2,
        );
        let q3 = params().with_quad_order(3);
        let t = convergence_study(&semi, &q3, &[32, 4, 16, 8], &SolveOptions::with_memo(MemoPolicy::Markov))
            .unwrap();
        assert_eq!(t.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![4, 8, 16, 32]);
        assert!(!t.exact);
        let s = t.slope.unwrap();
        assert!((0.9..=1.1).contains(&s), "slope {s}");
        assert!(t.errors_decreasing());

        let heat = problem(GeneratorKind::Heat, TerminalKind::Square, 2);
        let t = convergence_study(&heat, &params(), &[2, 4, 8], &SolveOptions::with_memo(MemoPolicy::Markov))
            .unwrap();
        assert!(t.exact);
        assert_eq!(t.slope, None);

        let avg = problem(GeneratorKind::Heat, TerminalKind::Average { index: 0 }, 2);
        let t = convergence_study(
            &avg,
            &params().with_quad_order(3),
            &[2, 4, 8],
            &SolveOptions::with_memo(MemoPolicy::MarkovRunningSum),
        )
        .unwrap();
        assert!(t.exact, "{:?}", t.rows);
    }

    #[test]
    fn convergence_rejects_bad_lists() {
        let heat = problem(GeneratorKind::Heat, TerminalKind::Square, 2);
        let o = SolveOptions::default();
        assert!(convergence_study(&heat, &params(), &[2, 4], &o).is_err());
        assert!(convergence_study(&heat, &params(), &[1, 2, 4], &o).is_err());
        assert!(convergence_study(&heat, &params(), &[2, 4, 4], &o).is_err());
        let max = problem(GeneratorKind::Heat, TerminalKind::Max { index: 0 }, 2);
        assert!(matches!(
            convergence_study(&max, &params(), &[2, 3, 4], &o),
            Err(HarnessError::Oracle(_))
        ));
    }

    fn hs() -> Vec<f64> {
        (3..=7).map(|k| 0.5f64.powi(k)).collect()
    }

    #[test]
    fn consistency_examples() {
        let heat = GeneratorSpec::new(GeneratorKind::Heat, 1).unwrap();
        let anchor = Anchor { t: 0.5, x: vec![0.3] };
        let t = consistency_sweep(&TestFunctionalSpec::monomial(0, 1, 0), &heat, &params(), &anchor, &hs())
            .unwrap();
        assert!(t.exact);

        let t = consistency_sweep(&TestFunctionalSpec::monomial(1, 2, 0), &heat, &params(), &anchor, &hs())
            .unwrap();
        assert!(!t.exact);
        assert!(t.slope.unwrap() >= 0.9, "{t:?}");

        let t = consistency_sweep(&TestFunctionalSpec::monomial(0, 4, 0), &heat, &params(), &anchor, &hs())
            .unwrap();
        assert!(t.slope.unwrap() >= 0.9, "{t:?}");
    }

    #[test]
    fn anchor_must_sit_on_the_grid() {
        let anchor = Anchor { t: 0.3, x: vec![0.3] };
        assert!(anchor.skeleton(0.125).is_err());
        let origin = Anchor { t: 0.0, x: vec![0.0] };
        let (i, w) = origin.skeleton(0.25).unwrap();
        assert_eq!((i, w.grid().steps()), (0, 1));
    }

    #[test]
    fn stability_examples() {
        let pr = problem(GeneratorKind::Heat, TerminalKind::Coordinate { index: 0 }, 2);
        let opts = SolveOptions::with_memo(MemoPolicy::Markov);
        let r = stability_probe(&pr, &params(), 4, &PerturbationSpec::default(), 1, &opts).unwrap();
        assert!((r.lipschitz_ratio - 1.0).abs() < 1e-9, "{r:?}");
        assert!(r.lipschitz_pairs > 0);

        let zero = PerturbationSpec {
            count: 4,
            magnitude: 0.0,
        };
        let r = stability_probe(&pr, &params(), 4, &zero, 1, &opts).unwrap();
        assert_eq!(r.lipschitz_pairs, 0);
        assert_eq!(r.lipschitz_ratio, 0.0);

        let sq = problem(GeneratorKind::Heat, TerminalKind::Square, 2);
        let one = PerturbationSpec {
            count: 1,
            magnitude: 0.1,
        };
        let r = stability_probe(&sq, &params(), 4, &one, 1, &opts).unwrap();
        assert!((r.time_ratio - 1.0 / 1.25f64.sqrt()).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn emit_formats() {
        let empty = ConvergenceTable::from_rows(vec![]);
        assert_eq!(render(&empty, OutputFormat::Csv), "n,h,value,reference,error\n");

        let rows = (1..=3)
            .map(|k| ConvergenceRow {
                n: 1 << k,
                h: 1.0 / (1 << k) as f64,
                value: 1.0 + 0.1 / k as f64,
                reference: 1.0,
                error: 0.1 / k as f64,
            })
            .collect();
        let t = ConvergenceTable::from_rows(rows);
        let csv = render(&t, OutputFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "2,5.0000000000000000e-1,1.1000000000000001e0,1.0000000000000000e0,1.0000000000000001e-1");
        assert!(!csv.contains('\r'));

        let v: serde_json::Value = serde_json::from_str(&render(&t, OutputFormat::Json)).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 3);
        assert!(v["slope"].is_number());
        assert_eq!(v["exact"], false);

        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("t.csv");
        emit(&t, &file, OutputFormat::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&file).unwrap(), csv);
        let err = emit(&t, &dir.path().join("missing/t.csv"), OutputFormat::Csv).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::NotFound);
        assert_eq!("json".parse::<OutputFormat>(), Ok(OutputFormat::Json));
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
