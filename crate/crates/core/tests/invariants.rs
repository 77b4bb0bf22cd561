mod common;

use ppde_core::{
    apply_step_with, brute_force_solve, closed_form, convergence_study, mc_sup_reference, solve,
    suggest_params, GeneratorKind, GeneratorSpec, MemoPolicy, ProblemSpec, SampleSpec,
    SchemeParams, SolveOptions, StencilSet, StreamRng, TerminalKind, TerminalSpec, TimeGrid,
};
use proptest::prelude::*;

use common::{problem, registered_generators, registered_terminals, sound_policies};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step_operator_is_monotone(d in 1usize..3, which in 0usize..3, seed in any::<u64>(), h in 0.01f64..0.5) {
        let gens = registered_generators(d);
        let g = &gens[which % gens.len()];
        let sample = SampleSpec::default().with_count(200).with_seed(seed);
        let p = suggest_params(g, &sample, 0.5, h, 3).unwrap();
        let set = StencilSet::new(&p, h).unwrap();
        let path = &sample.points(d).unwrap()[0].path;
        let mut rng = StreamRng::new(seed);
        let phi: Vec<f64> = (0..set.branching()).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let psi: Vec<f64> = phi.iter().map(|v| v + rng.uniform_in(0.0, 0.5)).collect();
        let step = |vals: &[f64]| {
            let mut it = vals.iter();
            apply_step_with(&set, g, path, |_| Ok(*it.next().unwrap())).unwrap()
        };
        prop_assert!(step(&phi) <= step(&psi) + 1e-12);
    }

    #[test]
    fn memoised_solve_matches_brute_force(
        gi in 0usize..3,
        ti in 0usize..6,
        n in 1usize..5,
        mu in 0.5f64..3.0,
        sigma in 1.0f64..4.0,
    ) {
        let gens = registered_generators(1);
        let terms = registered_terminals(1);
        let pr = problem(&gens[gi], &terms[ti], n);
        let p = SchemeParams::uniform(1, mu, sigma).with_quad_order(3);
        let b = brute_force_solve(&pr, &p, 10_000_000).unwrap().value;
        for policy in sound_policies(&pr.terminal) {
            let v = solve(&pr, &p, &SolveOptions::with_memo(policy)).unwrap().value;
            prop_assert!((v - b).abs() <= 1e-12, "{policy}: {v} vs {b}");
        }
        let plain = solve(&pr, &p, &SolveOptions::default()).unwrap();
        prop_assert!((plain.value - b).abs() <= 1e-12);
        let branching = 1 + 1 + 3;
        let expected: Vec<u64> = (0..=n).map(|k| (branching as u64).pow(k as u32)).collect();
        prop_assert_eq!(plain.level_nodes, expected);
    }

    #[test]
    fn constants_scale_by_the_linear_term(lambda in -2.0f64..2.0, c in -5.0f64..5.0, n in 1usize..6) {
        let pr = ProblemSpec::new(
            TimeGrid::new(1.0, n).unwrap(),
            GeneratorSpec::new(GeneratorKind::Semilinear { lambda }, 1).unwrap(),
            TerminalSpec::new(TerminalKind::Constant { value: c }, 1).unwrap(),
        ).unwrap();
        let p = SchemeParams::uniform(1, 1.0, 2.0).with_quad_order(3);
        let set = StencilSet::new(&p, pr.grid.step()).unwrap();
        let v = apply_step_with(&set, &pr.generator, &pr.origin(), |_| Ok(c)).unwrap();
        prop_assert_eq!(v, c + pr.grid.step() * (lambda * c));
    }

    #[test]
    fn multidimensional_square_is_exact(d in 1usize..4, n in 1usize..3, sigma in 1.5f64..3.0) {
        let pr = ProblemSpec::new(
            TimeGrid::new(1.0, n).unwrap(),
            GeneratorSpec::new(GeneratorKind::Heat, d).unwrap(),
            TerminalSpec::new(TerminalKind::Square, d).unwrap(),
        ).unwrap();
        let p = SchemeParams::uniform(d, 1.0, sigma).with_quad_order(2);
        let v = solve(&pr, &p, &SolveOptions::with_memo(MemoPolicy::Markov)).unwrap().value;
        let c = closed_form(&pr, 0, &pr.origin()).unwrap().value;
        prop_assert!((v - c).abs() <= 1e-12);
    }
}

#[test]
fn convergence_study_is_deterministic() {
    let pr = problem(
        &GeneratorSpec::new(
            GeneratorKind::GHeat {
                sigma_low: 0.5,
                sigma_high: 1.0,
            },
            1,
        )
        .unwrap(),
        &TerminalSpec::new(TerminalKind::Call { index: 0, strike: 0.2 }, 1).unwrap(),
        2,
    );
    let p = SchemeParams::uniform(1, 1.0, 2.0);
    let opts = SolveOptions::with_memo(MemoPolicy::Markov);
    let a = convergence_study(&pr, &p, &[2, 4, 8], &opts).unwrap();
    let b = convergence_study(&pr, &p, &[8, 2, 4], &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sup_reference_grows_with_the_grid() {
    let pr = problem(
        &GeneratorSpec::new(
            GeneratorKind::GHeat {
                sigma_low: 0.2,
                sigma_high: 1.0,
            },
            1,
        )
        .unwrap(),
        &TerminalSpec::new(TerminalKind::Call { index: 0, strike: 0.3 }, 1).unwrap(),
        3,
    );
    let mut grid = vec![0.2];
    let mut last = f64::NEG_INFINITY;
    for v in [1.0, 0.6, 0.4, 0.8] {
        grid.push(v);
        let r = mc_sup_reference(&pr, &grid, 20_000, 8).unwrap();
        assert!(r.value >= last);
        last = r.value;
    }
}
