//! Depth-first backward recursion for `u^h`.
//!
//! `u^h(t_n, ω) = g(ω)` and `u^h(t_i, ω) = T_h[u^h(t_{i+1}, ·)]`. The tree
//! has `b = 1 + d + (d + d(d − 1)) q` children per node and does not
//! recombine unless a [`MemoPolicy`] says it may.
//!
//! The children of the root are evaluated in parallel, each subtree with its
//! own memo table, so results do not depend on the number of worker threads.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use super::{child_paths, operator_from_children, MemoPolicy, ProblemSpec, SchemeError};
use crate::path::DiscretePath;
use crate::stencil::{SchemeParams, StencilSet};

/// Default cap on node evaluations.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub memo: Option<MemoPolicy>,
    /// Maximum number of node evaluations (memo hits are free).
    pub budget: u64,
    pub parallel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            memo: None,
            budget: DEFAULT_BUDGET,
            parallel: true,
        }
    }
}

impl SolveOptions {
    pub fn with_memo(memo: MemoPolicy) -> Self {
        Self {
            memo: Some(memo),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MemoStats {
    pub policy: Option<MemoPolicy>,
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    /// `u^h(t_i, ω)` at the root; `u^h(0, 0)` for [`solve`].
    pub value: f64,
    pub root_index: usize,
    pub steps: usize,
    pub step: f64,
    /// Evaluated nodes per grid level (memo hits excluded).
    pub level_nodes: Vec<u64>,
    pub evaluations: u64,
    pub branching: usize,
    pub memo: MemoStats,
    pub params: SchemeParams,
}

struct Walker<'a> {
    problem: &'a ProblemSpec,
    set: &'a StencilSet,
    policy: Option<MemoPolicy>,
    budget: u64,
    counter: &'a AtomicU64,
    table: HashMap<(usize, Vec<i64>), f64>,
    levels: Vec<u64>,
    hits: u64,
    misses: u64,
}

impl<'a> Walker<'a> {
    fn new(
        problem: &'a ProblemSpec,
        set: &'a StencilSet,
        options: &SolveOptions,
        counter: &'a AtomicU64,
    ) -> Self {
        Self {
            problem,
            set,
            policy: options.memo,
            budget: options.budget,
            counter,
            table: HashMap::new(),
            levels: vec![0; problem.grid.steps() + 1],
            hits: 0,
            misses: 0,
        }
    }

    fn charge(&mut self, level: usize) -> Result<(), SchemeError> {
        let used = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        if used > self.budget {
            return Err(SchemeError::BudgetExceeded {
                budget: self.budget,
                required: None,
            });
        }
        self.levels[level] += 1;
        Ok(())
    }

    fn value(&mut self, path: &DiscretePath) -> Result<f64, SchemeError> {
        let level = path.last_index();
        let key = self.policy.map(|p| (level, p.key(path)));
        if let Some(k) = &key {
            if let Some(&v) = self.table.get(k) {
                self.hits += 1;
                return Ok(v);
            }
        }
        self.charge(level)?;
        let v = if path.is_terminal() {
            self.problem.terminal.eval(path)?
        } else {
            let children = child_paths(self.set, path)?;
            let mut values = Vec::with_capacity(children.len());
            for child in &children {
                values.push(self.value(child)?);
            }
            operator_from_children(self.set, &self.problem.generator, path, &values)?
        };
        if let Some(k) = key {
            self.misses += 1;
            self.table.insert(k, v);
        }
        Ok(v)
    }
}

/// Number of nodes in the full tree below a node `depth` levels above the leaves.
pub(crate) fn tree_size(branching: usize, depth: usize) -> f64 {
    (0..=depth).map(|k| (branching as f64).powi(k as i32)).sum()
}

/// `u^h(t_i, ω)` for a path defined up to `i`.
pub fn evaluate_uh(
    problem: &ProblemSpec,
    params: &SchemeParams,
    i: usize,
    path: &DiscretePath,
    options: &SolveOptions,
) -> Result<SolveResult, SchemeError> {
    problem.check_params(params)?;
    if path.last_index() != i {
        return Err(SchemeError::WrongIndex {
            expected: i,
            got: path.last_index(),
        });
    }
    if path.grid() != &problem.grid || path.dim() != problem.dim() {
        return Err(SchemeError::Dimension(
            "path does not live on the problem grid".into(),
        ));
    }
    let set = StencilSet::new(params, problem.grid.step())?;
    let n = problem.grid.steps();
    let branching = set.branching();

    let recombines = options.memo.is_some_and(MemoPolicy::recombines);
    if !recombines {
        let required = tree_size(branching, n - i);
        if required > options.budget as f64 {
            return Err(SchemeError::BudgetExceeded {
                budget: options.budget,
                required: Some(required),
            });
        }
    }

    let counter = AtomicU64::new(0);
    let mut levels = vec![0u64; n + 1];
    let mut stats = MemoStats {
        policy: options.memo,
        ..MemoStats::default()
    };

    let value = if path.is_terminal() {
        let mut w = Walker::new(problem, &set, options, &counter);
        let v = w.value(path)?;
        levels = w.levels;
        v
    } else {
        if counter.fetch_add(1, Ordering::Relaxed) + 1 > options.budget {
            return Err(SchemeError::BudgetExceeded {
                budget: options.budget,
                required: None,
            });
        }
        levels[i] += 1;
        let children = child_paths(&set, path)?;
        let run = |child: &DiscretePath| {
            let mut w = Walker::new(problem, &set, options, &counter);
            let v = w.value(child);
            v.map(|v| (v, w.levels, w.hits, w.misses))
        };
        let results: Vec<_> = if options.parallel {
            children.par_iter().map(run).collect()
        } else {
            children.iter().map(run).collect()
        };
        let mut values = Vec::with_capacity(results.len());
        for r in results {
            let (v, lv, hits, misses) = r?;
            values.push(v);
            for (acc, x) in levels.iter_mut().zip(lv) {
                *acc += x;
            }
            stats.hits += hits;
            stats.misses += misses;
        }
        operator_from_children(&set, &problem.generator, path, &values)?
    };
    if options.memo.is_some() && i == n {
        stats.misses += 1;
    }

    Ok(SolveResult {
        value,
        root_index: i,
        steps: n,
        step: problem.grid.step(),
        evaluations: levels.iter().sum(),
        level_nodes: levels,
        branching,
        memo: stats,
        params: params.clone(),
    })
}

/// `u^h(0, 0)`.
pub fn solve(
    problem: &ProblemSpec,
    params: &SchemeParams,
    options: &SolveOptions,
) -> Result<SolveResult, SchemeError> {
    evaluate_uh(problem, params, 0, &problem.origin(), options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{GeneratorKind, GeneratorSpec, TerminalKind, TerminalSpec};
    use crate::path::TimeGrid;
    use approx::assert_relative_eq;

    fn problem(kind: GeneratorKind, terminal: TerminalKind, n: usize) -> ProblemSpec {
        ProblemSpec::new(
            TimeGrid::new(1.0, n).unwrap(),
            GeneratorSpec::new(kind, 1).unwrap(),
            TerminalSpec::new(terminal, 1).unwrap(),
        )
        .unwrap()
    }

    fn params() -> SchemeParams {
        SchemeParams::uniform(1, 1.0, 2f64.sqrt())
    }

    #[test]
    fn martingale_terminal_solves_to_zero() {
        for n in 1..=4 {
            let pr = problem(GeneratorKind::Heat, TerminalKind::Coordinate { index: 0 }, n);
            let r = solve(&pr, &params(), &SolveOptions::with_memo(MemoPolicy::Markov)).unwrap();
            assert!(r.value.abs() < 1e-14, "n={n}: {}", r.value);
        }
    }

    #[test]
    fn square_terminal_is_exact() {
        for n in [1, 2, 3, 5] {
            let pr = problem(GeneratorKind::Heat, TerminalKind::Square, n);
            let r = solve(&pr, &params(), &SolveOptions::default()).unwrap();
            assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn semilinear_constant_is_geometric() {
        for n in [1, 2, 4, 6] {
            let pr = problem(
                GeneratorKind::Semilinear { lambda: 1.0 },
                TerminalKind::Constant { value: 1.0 },
                n,
            );
            let r = solve(&pr, &params(), &SolveOptions::with_memo(MemoPolicy::Markov)).unwrap();
            let h = 1.0 / n as f64;
            assert_relative_eq!(r.value, (1.0 + h).powi(n as i32), epsilon = 1e-12);
        }
    }

    #[test]
    fn interior_evaluations() {
        let pr = problem(GeneratorKind::Heat, TerminalKind::Square, 4);
        let p = params();
        let h = pr.grid.step();
        let mut w = pr.origin();
        for _ in 0..3 {
            w = w.concat(&[0.1]).unwrap();
        }
        let r = evaluate_uh(&pr, &p, 3, &w, &SolveOptions::default()).unwrap();
        assert_relative_eq!(r.value, w.current()[0].powi(2) + h, epsilon = 1e-14);

        let end = w.concat(&[0.2]).unwrap();
        let r = evaluate_uh(&pr, &p, 4, &end, &SolveOptions::default()).unwrap();
        assert_eq!(r.value, pr.terminal.eval(&end).unwrap());

        let semi = problem(
            GeneratorKind::Semilinear { lambda: 1.0 },
            TerminalKind::Constant { value: 1.0 },
            4,
        );
        let mut w = semi.origin();
        for i in 0..=4 {
            let r = evaluate_uh(&semi, &p, i, &w, &SolveOptions::default()).unwrap();
            assert_relative_eq!(r.value, (1.0 + h).powi(4 - i as i32), epsilon = 1e-13);
            if i < 4 {
                w = w.concat(&[0.05]).unwrap();
            }
        }
    }

    #[test]
    fn node_counts_follow_branching() {
        let pr = problem(GeneratorKind::Heat, TerminalKind::Square, 3);
        let p = params().with_quad_order(3);
        let r = solve(&pr, &p, &SolveOptions::default()).unwrap();
        let b = 1 + 1 + 3;
        assert_eq!(r.branching, b);
        assert_eq!(r.level_nodes, vec![1, b as u64, (b * b) as u64, (b * b * b) as u64]);
        assert_eq!(r.memo.hits, 0);
    }

    #[test]
    fn budget_is_enforced() {
        let pr = problem(GeneratorKind::Heat, TerminalKind::Square, 12);
        let opts = SolveOptions {
            budget: 1000,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve(&pr, &params(), &opts),
            Err(SchemeError::BudgetExceeded { budget: 1000, required: Some(_) })
        ));
        let opts = SolveOptions {
            budget: 50,
            memo: Some(MemoPolicy::Markov),
            parallel: false,
        };
        assert!(matches!(
            solve(&pr, &params(), &opts),
            Err(SchemeError::BudgetExceeded { budget: 50, required: None })
        ));
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let pr = problem(
            GeneratorKind::GHeat {
                sigma_low: 0.5,
                sigma_high: 1.0,
            },
            TerminalKind::Call {
                index: 0,
                strike: 0.1,
            },
            6,
        );
        let p = SchemeParams::uniform(1, 1.0, 2.0);
        let par = solve(&pr, &p, &SolveOptions::with_memo(MemoPolicy::Markov)).unwrap();
        let ser = solve(
            &pr,
            &p,
            &SolveOptions {
                parallel: false,
                ..SolveOptions::with_memo(MemoPolicy::Markov)
            },
        )
        .unwrap();
        assert_eq!(par.value.to_bits(), ser.value.to_bits());
        assert_eq!(par.level_nodes, ser.level_nodes);
        assert!(par.memo.hits > 0);
    }
}
