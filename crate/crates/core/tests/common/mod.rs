#![allow(dead_code)]

use ppde_core::{
    GeneratorSpec, MemoPolicy, ProblemSpec, Registry, TerminalKind, TerminalSpec, TimeGrid,
};
use serde_json::{json, Value};

pub fn generator_params(name: &str) -> Value {
    match name {
        "semilinear" => json!({ "lambda": 1.0 }),
        "g-heat" => json!({ "sigma_low": 0.5, "sigma_high": 1.0 }),
        _ => json!({}),
    }
}

pub fn terminal_params(name: &str) -> Value {
    match name {
        "call" => json!({ "strike": 0.1 }),
        "constant" => json!({ "value": 1.5 }),
        _ => json!({}),
    }
}

pub fn registered_generators(dim: usize) -> Vec<GeneratorSpec> {
    let reg = Registry::default();
    reg.generator_names()
        .map(|n| reg.generator(n, &generator_params(n), dim).unwrap())
        .collect()
}

pub fn registered_terminals(dim: usize) -> Vec<TerminalSpec> {
    let reg = Registry::default();
    reg.terminal_names()
        .map(|n| reg.terminal(n, &terminal_params(n), dim).unwrap())
        .collect()
}

/// Policies whose key determines `u^h` for this terminal and a Markov generator.
pub fn sound_policies(terminal: &TerminalSpec) -> Vec<MemoPolicy> {
    match terminal.kind {
        TerminalKind::Average { .. } => vec![MemoPolicy::FullPrefix, MemoPolicy::MarkovRunningSum],
        TerminalKind::Max { .. } => vec![MemoPolicy::FullPrefix, MemoPolicy::MarkovRunningMax],
        _ => MemoPolicy::ALL.to_vec(),
    }
}

pub fn problem(generator: &GeneratorSpec, terminal: &TerminalSpec, n: usize) -> ProblemSpec {
    ProblemSpec::new(
        TimeGrid::new(1.0, n).unwrap(),
        generator.clone(),
        terminal.clone(),
    )
    .unwrap()
}
