//! Path skeletons on a uniform time grid.
//!
//! A path is stored only at the grid nodes `t_i = i * h`. Every functional in
//! this crate reads the skeleton, so nothing between two nodes is ever
//! represented. Paths start at the origin and are immutable: extending a path
//! by one step returns a new value.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("number of steps must be at least 1")]
    ZeroSteps,
    #[error("path dimension must be at least 1")]
    ZeroDimension,
    #[error("path is already terminal at index {0}")]
    Terminal(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} out of range (path defined up to {upto})")]
    IndexOutOfRange { index: usize, upto: usize },
    #[error("paths live on different grids")]
    GridMismatch,
    #[error("path must start at the origin")]
    NonZeroOrigin,
    #[error("malformed path data: {0}")]
    Malformed(String),
}

/// Uniform grid `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    step: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, PathError> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(PathError::InvalidHorizon(horizon));
        }
        if steps == 0 {
            return Err(PathError::ZeroSteps);
        }
        Ok(Self {
            horizon,
            steps,
            step: horizon / steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// The step size `h = T / n`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Time of node `i`; the last node is pinned to the horizon exactly.
    pub fn time(&self, i: usize) -> f64 {
        if i >= self.steps {
            self.horizon
        } else {
            i as f64 * self.step
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }
}

/// Convenience wrapper around [`TimeGrid::new`].
pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid, PathError> {
    TimeGrid::new(horizon, steps)
}

/// A `d`-dimensional skeleton defined on nodes `0..=k` of its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    grid: TimeGrid,
    dim: usize,
    // row-major, (k + 1) * dim entries
    values: Vec<f64>,
}

impl DiscretePath {
    /// The path sitting at the origin at time zero.
    pub fn origin(grid: TimeGrid, dim: usize) -> Result<Self, PathError> {
        if dim == 0 {
            return Err(PathError::ZeroDimension);
        }
        Ok(Self {
            grid,
            dim,
            values: vec![0.0; dim],
        })
    }

    /// Builds a path from its rows. Row 0 must be the zero vector.
    pub fn from_rows(grid: TimeGrid, rows: &[Vec<f64>]) -> Result<Self, PathError> {
        let first = rows
            .first()
            .ok_or_else(|| PathError::Malformed("no rows".into()))?;
        let dim = first.len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(PathError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(grid, dim, values)
    }

    /// Builds a path from row-major values.
    pub fn from_flat(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self, PathError> {
        if dim == 0 {
            return Err(PathError::ZeroDimension);
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(PathError::Malformed(format!(
                "{} values do not form rows of width {dim}",
                values.len()
            )));
        }
        let rows = values.len() / dim;
        if rows > grid.steps() + 1 {
            return Err(PathError::Malformed(format!(
                "{rows} rows exceed the {} grid nodes",
                grid.steps() + 1
            )));
        }
        if values[..dim].iter().any(|&v| v != 0.0) {
            return Err(PathError::NonZeroOrigin);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PathError::Malformed("non-finite value".into()));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Index `k` of the last defined node.
    pub fn last_index(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn is_terminal(&self) -> bool {
        self.last_index() == self.grid.steps()
    }

    /// Time of the last defined node.
    pub fn time(&self) -> f64 {
        self.grid.time(self.last_index())
    }

    /// Row `i`, i.e. `ω_{t_i}`.
    pub fn row(&self, i: usize) -> Result<&[f64], PathError> {
        let upto = self.last_index();
        if i > upto {
            return Err(PathError::IndexOutOfRange { index: i, upto });
        }
        Ok(&self.values[i * self.dim..(i + 1) * self.dim])
    }

    /// The current value `ω_{t_k}`.
    pub fn current(&self) -> &[f64] {
        &self.values[self.values.len() - self.dim..]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Extends the path by one step: the new last row is `ω_{t_k} + delta`.
    pub fn concat(&self, delta: &[f64]) -> Result<Self, PathError> {
        let k = self.last_index();
        if k >= self.grid.steps() {
            return Err(PathError::Terminal(k));
        }
        if delta.len() != self.dim {
            return Err(PathError::DimensionMismatch {
                expected: self.dim,
                got: delta.len(),
            });
        }
        let mut values = Vec::with_capacity(self.values.len() + self.dim);
        values.extend_from_slice(&self.values);
        values.extend(self.current().iter().zip(delta).map(|(x, d)| x + d));
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            values,
        })
    }

    /// The path stopped at its current node and held constant up to index `j`.
    pub fn frozen_until(&self, j: usize) -> Result<Self, PathError> {
        let k = self.last_index();
        if j > self.grid.steps() {
            return Err(PathError::IndexOutOfRange {
                index: j,
                upto: self.grid.steps(),
            });
        }
        let mut path = self.truncated(j.min(k))?;
        let zero = vec![0.0; self.dim];
        while path.last_index() < j {
            path = path.concat(&zero)?;
        }
        Ok(path)
    }

    /// The prefix defined on nodes `0..=k`.
    pub fn truncated(&self, k: usize) -> Result<Self, PathError> {
        let upto = self.last_index();
        if k > upto {
            return Err(PathError::IndexOutOfRange { index: k, upto });
        }
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            values: self.values[..(k + 1) * self.dim].to_vec(),
        })
    }

    /// `‖ω‖_{t_k}`: the largest Euclidean norm among rows `0..=k`.
    pub fn sup_norm(&self, k: usize) -> Result<f64, PathError> {
        let upto = self.last_index();
        if k > upto {
            return Err(PathError::IndexOutOfRange { index: k, upto });
        }
        Ok(self
            .rows()
            .take(k + 1)
            .map(euclidean)
            .fold(0.0, f64::max))
    }
}

pub(crate) fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pseudometric between `(t_i, ω)` and `(t_j, ω')`:
/// `sqrt|t_i - t_j|` plus the sup over all grid nodes of the distance between
/// the two paths, each stopped at its own index.
pub fn d_metric(
    i: usize,
    a: &DiscretePath,
    j: usize,
    b: &DiscretePath,
) -> Result<f64, PathError> {
    if a.grid != b.grid {
        return Err(PathError::GridMismatch);
    }
    if a.dim != b.dim {
        return Err(PathError::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    // validates both indices
    a.row(i)?;
    b.row(j)?;
    let grid = a.grid;
    let mut sup: f64 = 0.0;
    for m in 0..=grid.steps() {
        let ra = a.row(m.min(i))?;
        let rb = b.row(m.min(j))?;
        let dist = ra
            .iter()
            .zip(rb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(dist);
    }
    Ok((grid.time(i) - grid.time(j)).abs().sqrt() + sup)
}
