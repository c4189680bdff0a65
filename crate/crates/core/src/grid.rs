//! Time grids and grid-sampled vector functions.

use crate::error::{Error, Result};
use crate::linalg::{self, Point};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Strictly increasing time nodes covering `[t0, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid with the largest step not exceeding `h`. Nodes are
    /// `t0 + (t_end - t0) * k / n`, so both endpoints are exact.
    pub fn uniform(t0: f64, t_end: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("step {h} must be positive")));
        }
        if !(t0 < t_end) {
            return Err(Error::InvalidGrid(format!("empty interval [{t0}, {t_end}]")));
        }
        let steps = ((t_end - t0) / h - 1e-9).ceil().max(1.0);
        if steps > 1e8 {
            return Err(Error::InvalidGrid(format!("step {h} gives too many nodes")));
        }
        Self::with_steps(t0, t_end, steps as usize)
    }

    pub fn with_steps(t0: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t0 < t_end) {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        let span = t_end - t0;
        let mut nodes: Vec<f64> = (0..=steps).map(|k| t0 + span * k as f64 / steps as f64).collect();
        nodes[steps] = t_end;
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("at least two nodes required".into()));
        }
        if !nodes.iter().all(|t| t.is_finite()) || nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid(
                "nodes must be finite and strictly increasing".into(),
            ));
        }
        Ok(TimeGrid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `t_{k+1} - t_k`
    pub fn step(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    pub fn max_step(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Splits every interval into `factor` equal parts. Original nodes are
    /// kept bit-exact at indices `factor * k`.
    pub fn refine(&self, factor: usize) -> TimeGrid {
        let factor = factor.max(1);
        let mut nodes = Vec::with_capacity(self.steps() * factor + 1);
        for w in self.nodes.windows(2) {
            for j in 0..factor {
                nodes.push(w[0] + (w[1] - w[0]) * j as f64 / factor as f64);
            }
        }
        nodes.push(self.t_end());
        TimeGrid { nodes }
    }

    /// Index `k` with `t_k <= t < t_{k+1}` (clamped to the grid).
    pub fn locate(&self, t: f64) -> usize {
        match self.nodes.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(k) => k.min(self.steps()),
            Err(0) => 0,
            Err(k) => (k - 1).min(self.steps()),
        }
    }

    /// Sum of steps `sum_{j<k} h_j`.
    pub fn elapsed(&self, k: usize) -> f64 {
        self.nodes[k] - self.nodes[0]
    }
}

/// Interpolation semantics of a [`GridFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Piecewise linear between nodes.
    State,
    /// `values[k]` holds on `[t_k, t_{k+1})`.
    Selection,
    /// Backward differences stored at the right node: `values[k]` holds on
    /// `(t_{k-1}, t_k]`.
    Derivative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Arc<TimeGrid>,
    pub values: Vec<Point>,
    pub kind: GridKind,
}

impl GridFunction {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<Point>, kind: GridKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(first) = values.first() {
            let d = first.len();
            if values.iter().any(|v| v.len() != d) {
                return Err(Error::InvalidGrid("values have mixed dimensions".into()));
            }
        }
        if !values.iter().all(|v| linalg::all_finite(v)) {
            return Err(Error::InvalidGrid("values must be finite".into()));
        }
        Ok(GridFunction { grid, values, kind })
    }

    pub fn constant(grid: Arc<TimeGrid>, value: &[f64], kind: GridKind) -> Self {
        let values = vec![value.to_vec(); grid.len()];
        GridFunction { grid, values, kind }
    }

    pub fn zeros(grid: Arc<TimeGrid>, dim: usize, kind: GridKind) -> Self {
        Self::constant(grid, &linalg::zeros(dim), kind)
    }

    pub fn from_fn(grid: Arc<TimeGrid>, kind: GridKind, f: impl Fn(f64) -> Point) -> Self {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        GridFunction { grid, values, kind }
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Evaluates with the interpolation semantics of `kind`; clamps outside
    /// the grid.
    pub fn eval(&self, t: f64) -> Point {
        let nodes = self.grid.nodes();
        let n = self.grid.steps();
        if t <= nodes[0] {
            return self.values[0].clone();
        }
        if t >= nodes[n] {
            return self.values[n].clone();
        }
        let k = self.grid.locate(t);
        match self.kind {
            GridKind::Selection => self.values[k].clone(),
            GridKind::Derivative => {
                if t == nodes[k] {
                    self.values[k].clone()
                } else {
                    self.values[k + 1].clone()
                }
            }
            GridKind::State => {
                let w = (t - nodes[k]) / (nodes[k + 1] - nodes[k]);
                linalg::axpy(&linalg::scale(&self.values[k], 1.0 - w), w, &self.values[k + 1])
            }
        }
    }

    /// Samples onto another grid with the same semantics.
    pub fn resample(&self, grid: Arc<TimeGrid>) -> GridFunction {
        let kind = self.kind;
        let values = grid.nodes().iter().map(|&t| self.eval(t)).collect();
        GridFunction { grid, values, kind }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    /// `max_k |a_k - b_k|`
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| linalg::dist(a, b))
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| linalg::norm(v)).fold(0.0, f64::max)
    }
}
