//! Time grids, response ensembles, centering and periodic mirroring.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};

/// Uniform grid `t_j = t0 + j (te - t0) / (n_t - 1)`, `j = 0..n_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    te: f64,
    n_t: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, te: f64, n_t: usize) -> Result<Self> {
        if !(t0.is_finite() && te.is_finite()) || te <= t0 {
            return Err(invalid(format!("time grid needs te > t0, got [{t0}, {te}]")));
        }
        if n_t < 2 {
            return Err(invalid("time grid needs at least 2 nodes"));
        }
        Ok(Self { t0, te, n_t })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn te(&self) -> f64 {
        self.te
    }

    pub fn len(&self) -> usize {
        self.n_t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.te - self.t0) / (self.n_t - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j + 1 == self.n_t {
            self.te
        } else {
            self.t0 + j as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_t).map(|j| self.node(j)).collect()
    }

    /// Nodes of one period of the mirrored extension: `2 n_t - 2` points
    /// starting at `t0` with the same step, period `2 (te - t0)`.
    pub fn mirrored_nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..2 * self.n_t - 2).map(|j| self.t0 + j as f64 * h).collect()
    }

    /// Recovers the grid from a list of nodes, checking uniformity.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(invalid("need at least two time nodes"));
        }
        let grid = TimeGrid::new(nodes[0], nodes[nodes.len() - 1], nodes.len())?;
        let tol = 1e-6 * grid.step();
        for (j, &t) in nodes.iter().enumerate() {
            if (t - grid.node(j)).abs() > tol {
                return Err(invalid(format!("time nodes are not uniform at index {j}")));
            }
        }
        Ok(grid)
    }
}

/// `N` input vectors paired with `N` response curves on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseEnsemble {
    pub inputs: DMatrix<f64>,
    pub responses: DMatrix<f64>,
    pub grid: TimeGrid,
    pub input_names: Vec<String>,
}

impl ResponseEnsemble {
    pub fn new(
        inputs: DMatrix<f64>,
        responses: DMatrix<f64>,
        grid: TimeGrid,
        input_names: Vec<String>,
    ) -> Result<Self> {
        if inputs.nrows() != responses.nrows() {
            return Err(shape(format!(
                "{} input rows vs {} response rows",
                inputs.nrows(),
                responses.nrows()
            )));
        }
        if responses.ncols() != grid.len() {
            return Err(shape(format!(
                "responses have {} columns, grid has {} nodes",
                responses.ncols(),
                grid.len()
            )));
        }
        if input_names.len() != inputs.ncols() {
            return Err(shape("input name count does not match input columns"));
        }
        if inputs.iter().chain(responses.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("ensemble contains non-finite entries"));
        }
        Ok(Self {
            inputs,
            responses,
            grid,
            input_names,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn input(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }

    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.responses.row(i).iter().copied().collect()
    }

    /// Rows `idx` as a new ensemble.
    pub fn subset(&self, idx: &[usize]) -> ResponseEnsemble {
        ResponseEnsemble {
            inputs: self.inputs.select_rows(idx),
            responses: self.responses.select_rows(idx),
            grid: self.grid,
            input_names: self.input_names.clone(),
        }
    }
}

/// Subtracts the across-curve mean from every row.
pub fn center_ensemble(responses: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = responses.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot center an empty ensemble".into()));
    }
    let mean = DVector::from_iterator(
        responses.ncols(),
        responses.column_iter().map(|c| c.sum() / n as f64),
    );
    let mut centered = responses.clone();
    for mut row in centered.row_iter_mut() {
        for (v, m) in row.iter_mut().zip(mean.iter()) {
            *v -= m;
        }
    }
    Ok((mean, centered))
}

/// `[y_1..y_n, y_{n-1}..y_2]`: one period of the even periodic extension,
/// without repeating the end points.
pub fn mirror_periodic(curve: &[f64]) -> Result<Vec<f64>> {
    let n = curve.len();
    if n < 2 {
        return Err(invalid("mirroring needs at least two samples"));
    }
    let mut out = Vec::with_capacity(2 * n - 2);
    out.extend_from_slice(curve);
    out.extend(curve[1..n - 1].iter().rev());
    Ok(out)
}
