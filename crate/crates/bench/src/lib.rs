//! Fixture problems shared by the benchmarks.

use ppde_core::{
    GeneratorKind, GeneratorSpec, ProblemSpec, SchemeParams, TerminalKind, TerminalSpec, TimeGrid,
};

/// G-heat with a call payoff on `[0, 1]` in dimension `d` with `n` steps.
pub fn g_heat_call(d: usize, n: usize) -> ProblemSpec {
    ProblemSpec::new(
        TimeGrid::new(1.0, n).expect("valid grid"),
        GeneratorSpec::new(
            GeneratorKind::GHeat {
                sigma_low: 0.5,
                sigma_high: 1.0,
            },
            d,
        )
        .expect("valid generator"),
        TerminalSpec::new(TerminalKind::Call { index: 0, strike: 0.1 }, d).expect("valid terminal"),
    )
    .expect("valid problem")
}

/// Heat with the running average of the first coordinate.
pub fn heat_average(n: usize) -> ProblemSpec {
    ProblemSpec::new(
        TimeGrid::new(1.0, n).expect("valid grid"),
        GeneratorSpec::new(GeneratorKind::Heat, 1).expect("valid generator"),
        TerminalSpec::new(TerminalKind::Average { index: 0 }, 1).expect("valid terminal"),
    )
    .expect("valid problem")
}

pub fn params(d: usize, quad_order: usize) -> SchemeParams {
    SchemeParams::uniform(d, 1.0, 2.0).with_quad_order(quad_order)
}
