use std::io::Write;
use std::path::Path;

use ppde_core::harness::Tabular;
use ppde_core::{
    check_monotonicity, consistency_sweep, convergence_study, render, solve, suggest_params,
    MonotonicityReport, OutputFormat, SchemeParams, SolveOptions,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
    s.push('\n');
    Ok(s)
}

fn print(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(CliError::internal)
}

fn write_out(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::config("run.out", format!("cannot write {}: {e}", path.display())))
}

fn solve_options(cfg: &RunConfig) -> Result<SolveOptions, CliError> {
    Ok(SolveOptions {
        memo: cfg.memo()?,
        budget: cfg.budget()?,
        ..SolveOptions::default()
    })
}

/// Sends a document to `run.out` if set, otherwise to stdout.
fn deliver(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.run.out {
        Some(p) => write_out(p, text),
        None => print(text),
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let steps = cfg.steps()?;
    let problem = cfg.problem(steps)?;
    let params = cfg.params()?;
    let options = solve_options(cfg)?;
    let result = solve(&problem, &params, &options)?;
    deliver(cfg, &json(&result)?)
}

#[derive(Serialize)]
struct Suggestion<'a> {
    params: &'a SchemeParams,
    report: &'a MonotonicityReport,
}

pub fn cmd_check(cfg: &RunConfig, suggest: bool) -> Result<(), CliError> {
    let generator = cfg.generator()?;
    let sample = cfg.sample();
    let n = match cfg.run.n {
        Some(_) => cfg.steps()?,
        None => sample.steps.max(1),
    };
    let h = cfg.problem.horizon / n as f64;
    if suggest {
        cfg.check_search_fields()?;
        let params = suggest_params(
            &generator,
            &sample,
            cfg.scheme.epsilon0,
            h,
            cfg.scheme.quad_order,
        )?;
        let report = check_monotonicity(&generator, &params, h, &sample)?;
        deliver(
            cfg,
            &json(&Suggestion {
                params: &params,
                report: &report,
            })?,
        )?;
        if !report.verdict.passed() {
            return Err(CliError::Check("suggested parameters failed the audit".into()));
        }
        return Ok(());
    }
    let params = cfg.params()?;
    let report = check_monotonicity(&generator, &params, h, &sample)?;
    deliver(cfg, &json(&report)?)?;
    match &report.witness {
        _ if report.verdict.passed() => Ok(()),
        Some(w) => Err(CliError::Check(format!(
            "monotonicity FAIL at sample {}: {} = {:e}",
            w.index, w.reason, w.value
        ))),
        None => Err(CliError::Check("monotonicity FAIL".into())),
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    out: &'a Path,
    rows: usize,
    slope: Option<f64>,
    slope_halfwidth: Option<f64>,
    exact: bool,
}

fn finish_table<T: Tabular>(
    cfg: &RunConfig,
    table: &T,
    rows: usize,
    slope: Option<f64>,
    slope_halfwidth: Option<f64>,
    exact: bool,
) -> Result<(), CliError> {
    let format = cfg.format(OutputFormat::Csv)?;
    let text = render(table, format);
    match &cfg.run.out {
        Some(p) => {
            write_out(p, &text)?;
            print(&json(&Summary {
                out: p,
                rows,
                slope,
                slope_halfwidth,
                exact,
            })?)
        }
        None => print(&text),
    }
}

pub fn cmd_converge(cfg: &RunConfig) -> Result<(), CliError> {
    let ns = cfg.n_list()?;
    let first = *ns
        .first()
        .ok_or_else(|| CliError::config("run.n_list", "must not be empty"))?;
    if first == 0 {
        return Err(CliError::config("run.n_list", "entries must be at least 1"));
    }
    let problem = cfg.problem(first)?;
    let params = cfg.params()?;
    let options = solve_options(cfg)?;
    let table = convergence_study(&problem, &params, &ns, &options)?;
    finish_table(
        cfg,
        &table,
        table.rows.len(),
        table.slope,
        table.slope_halfwidth,
        table.exact,
    )
}

pub fn cmd_consistency(cfg: &RunConfig) -> Result<(), CliError> {
    let generator = cfg.generator()?;
    let params = cfg.params()?;
    let phi = cfg.functional()?;
    let anchor = cfg.anchor()?;
    let hs = cfg.h_list()?;
    let table = consistency_sweep(&phi, &generator, &params, &anchor, &hs)?;
    finish_table(
        cfg,
        &table,
        table.rows.len(),
        table.slope,
        table.slope_halfwidth,
        table.exact,
    )
}
