//! State-key policies for memoising the backward recursion.
//!
//! A policy maps a path defined up to `t_i` to a key. Using it declares that
//! `u^h(t_i, ·)` depends on the path only through that key; nothing checks
//! this at runtime. `full-prefix` is always sound but never recombines.
//!
//! Continuous state components are quantised to multiples of `2^-40` so that
//! nodes reached by the same increments in a different order (which differ
//! only by summation roundoff) share a key.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::path::DiscretePath;

const QUANTUM_INV: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MemoPolicy {
    /// Key is the exact bit pattern of the whole skeleton.
    #[serde(rename = "full-prefix")]
    FullPrefix,
    /// Key is the current value `ω_{t_i}`.
    #[serde(rename = "markov")]
    Markov,
    /// Current value plus `Σ_{j=1..i} ω_{t_j}` per coordinate.
    #[serde(rename = "markov+running-sum")]
    MarkovRunningSum,
    /// Current value plus `max_{j≤i} |ω_{t_j}|` per coordinate.
    #[serde(rename = "markov+running-max")]
    MarkovRunningMax,
}

impl MemoPolicy {
    pub const ALL: [MemoPolicy; 4] = [
        MemoPolicy::FullPrefix,
        MemoPolicy::Markov,
        MemoPolicy::MarkovRunningSum,
        MemoPolicy::MarkovRunningMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MemoPolicy::FullPrefix => "full-prefix",
            MemoPolicy::Markov => "markov",
            MemoPolicy::MarkovRunningSum => "markov+running-sum",
            MemoPolicy::MarkovRunningMax => "markov+running-max",
        }
    }

    /// Whether distinct skeletons can share a key.
    pub fn recombines(self) -> bool {
        !matches!(self, MemoPolicy::FullPrefix)
    }

    pub fn key(self, path: &DiscretePath) -> Vec<i64> {
        let quantise = |x: f64| (x * QUANTUM_INV).round() as i64;
        let d = path.dim();
        match self {
            MemoPolicy::FullPrefix => path.as_flat().iter().map(|x| x.to_bits() as i64).collect(),
            MemoPolicy::Markov => path.current().iter().map(|&x| quantise(x)).collect(),
            MemoPolicy::MarkovRunningSum => {
                let mut sum = vec![0.0; d];
                for row in path.rows().skip(1) {
                    for (s, x) in sum.iter_mut().zip(row) {
                        *s += x;
                    }
                }
                path.current()
                    .iter()
                    .chain(&sum)
                    .map(|&x| quantise(x))
                    .collect()
            }
            MemoPolicy::MarkovRunningMax => {
                let mut max = vec![0.0f64; d];
                for row in path.rows() {
                    for (m, x) in max.iter_mut().zip(row) {
                        *m = m.max(x.abs());
                    }
                }
                path.current()
                    .iter()
                    .chain(&max)
                    .map(|&x| quantise(x))
                    .collect()
            }
        }
    }
}

impl fmt::Display for MemoPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MemoPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown memo policy `{s}`"))
    }
}
