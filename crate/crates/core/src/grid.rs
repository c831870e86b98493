//! Uniform cell-centered mesh on a bounded interval, mirror ghost cells and
//! second-order difference operators.
//!
//! Cells are indexed `0..n`, faces `0..=n`; face `j` separates cells `j - 1`
//! and `j`, so faces `0` and `n` are the domain boundary. Homogeneous Neumann
//! data (`f_x = f_xxx = 0`) is realized by the even reflection
//! `f[-k] = f[k - 1]`, `f[n + k - 1] = f[n - k]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_left: f64,
    x_right: f64,
    n_cells: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite()) || x_right <= x_left {
            return Err(Error::InvalidGrid(format!(
                "need finite x_left < x_right, got ({x_left}, {x_right})"
            )));
        }
        if n_cells < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        Ok(Self {
            x_left,
            x_right,
            n_cells,
            dx: (x_right - x_left) / n_cells as f64,
        })
    }

    /// The unit interval `(0, 1)` with `n_cells` cells.
    pub fn unit(n_cells: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_cells)
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// |Ω|
    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    pub fn face(&self, j: usize) -> f64 {
        self.x_left + j as f64 * self.dx
    }

    /// Maps a possibly out-of-range cell index onto the mirrored interior cell.
    #[inline]
    pub(crate) fn reflect(&self, i: isize) -> usize {
        let n = self.n_cells as isize;
        let r = if i < 0 {
            -i - 1
        } else if i >= n {
            2 * n - 1 - i
        } else {
            i
        };
        r as usize
    }
}

/// A grid function sampled at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.n_cells(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value {} at cell {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_cells()],
        }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.centers().into_iter().map(f).collect(),
        }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec_unchecked(self.grid, self.values.iter().map(|&x| f(x)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Field::from_vec_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// Largest absolute value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm `(dx Σ f²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

/// Even extension with `layers` ghost cells on each side.
///
/// The returned vector has length `n + 2 * layers`; interior cell `i` sits
/// at index `i + layers`.
pub fn extend_mirror(f: &Field, layers: usize) -> Result<Vec<f64>> {
    if !(1..=2).contains(&layers) {
        return Err(Error::Precondition(format!(
            "mirror extension supports 1 or 2 ghost layers, got {layers}"
        )));
    }
    let n = f.len() as isize;
    let l = layers as isize;
    Ok((-l..n + l)
        .map(|i| f.values[f.grid.reflect(i)])
        .collect())
}

/// Central first derivative `(f[i+1] - f[i-1]) / 2dx`.
pub fn diff1(f: &Field) -> Field {
    let g = extend_mirror(f, 1).expect("one layer is valid");
    let inv = 0.5 / f.grid.dx();
    let values = (0..f.len()).map(|i| (g[i + 2] - g[i]) * inv).collect();
    Field::from_vec_unchecked(f.grid, values)
}

/// Central second derivative `(f[i+1] - 2 f[i] + f[i-1]) / dx²`.
pub fn diff2(f: &Field) -> Field {
    let g = extend_mirror(f, 1).expect("one layer is valid");
    let inv = 1.0 / (f.grid.dx() * f.grid.dx());
    let values = (0..f.len())
        .map(|i| (g[i + 2] - 2.0 * g[i + 1] + g[i]) * inv)
        .collect();
    Field::from_vec_unchecked(f.grid, values)
}

/// Central third derivative `(f[i+2] - 2 f[i+1] + 2 f[i-1] - f[i-2]) / 2dx³`.
pub fn diff3(f: &Field) -> Field {
    let g = extend_mirror(f, 2).expect("two layers are valid");
    let dx = f.grid.dx();
    let inv = 0.5 / (dx * dx * dx);
    let values = (0..f.len())
        .map(|i| {
            let c = i + 2;
            (g[c + 2] - 2.0 * g[c + 1] + 2.0 * g[c - 1] - g[c - 2]) * inv
        })
        .collect();
    Field::from_vec_unchecked(f.grid, values)
}

/// Conservative divergence `(flux[i+1] - flux[i]) / dx` of face fluxes.
///
/// The boundary faces must carry zero flux.
pub fn face_divergence(flux: &[f64], grid: &Grid1D) -> Result<Field> {
    let n = grid.n_cells();
    if flux.len() != n + 1 {
        return Err(Error::InvalidField(format!(
            "face flux needs {} entries, got {}",
            n + 1,
            flux.len()
        )));
    }
    for face in [0, n] {
        if flux[face] != 0.0 {
            return Err(Error::BoundaryFlux {
                face,
                value: flux[face],
            });
        }
    }
    Ok(divergence_unchecked(flux, grid))
}

pub(crate) fn divergence_unchecked(flux: &[f64], grid: &Grid1D) -> Field {
    let inv = 1.0 / grid.dx();
    let values = flux.windows(2).map(|w| (w[1] - w[0]) * inv).collect();
    Field::from_vec_unchecked(*grid, values)
}

/// Midpoint rule `dx Σ f_i`.
pub fn integrate(f: &Field) -> f64 {
    f.grid.dx() * f.values.iter().sum::<f64>()
}

/// Arithmetic face means of a cell quantity; boundary faces are set to zero.
pub(crate) fn face_mean(cell: &[f64]) -> Vec<f64> {
    let n = cell.len();
    let mut out = vec![0.0; n + 1];
    for j in 1..n {
        out[j] = 0.5 * (cell[j - 1] + cell[j]);
    }
    out
}

/// Face gradient `(f[j] - f[j-1]) / dx`; zero on boundary faces.
pub(crate) fn face_gradient(cell: &[f64], dx: f64) -> Vec<f64> {
    let n = cell.len();
    let mut out = vec![0.0; n + 1];
    for j in 1..n {
        out[j] = (cell[j] - cell[j - 1]) / dx;
    }
    out
}

/// Face third derivative, the difference of mirrored cell second derivatives.
pub(crate) fn face_third(cell: &[f64], grid: &Grid1D) -> Vec<f64> {
    let lap = diff2(&Field::from_vec_unchecked(*grid, cell.to_vec()));
    face_gradient(lap.values(), grid.dx())
}

/// Linear stencils of the face operators used by the implicit solvers.
///
/// Entry `j` lists `(cell, weight)` pairs such that the face quantity at
/// interior face `j` is `Σ weight · w[cell]`. Mirror folding can repeat a
/// cell index; consumers must accumulate.
#[derive(Debug, Clone)]
pub(crate) struct FaceStencils {
    pub gradient: Vec<[(usize, f64); 2]>,
    pub third: Vec<[(usize, f64); 4]>,
}

impl FaceStencils {
    pub fn new(grid: &Grid1D) -> Self {
        let n = grid.n_cells();
        let dx = grid.dx();
        let inv1 = 1.0 / dx;
        let inv3 = 1.0 / (dx * dx * dx);
        let mut gradient = vec![[(0, 0.0); 2]; n + 1];
        let mut third = vec![[(0, 0.0); 4]; n + 1];
        for j in 1..n {
            gradient[j] = [(j - 1, -inv1), (j, inv1)];
            let ji = j as isize;
            third[j] = [
                (grid.reflect(ji - 2), -inv3),
                (j - 1, 3.0 * inv3),
                (j, -3.0 * inv3),
                (grid.reflect(ji + 1), inv3),
            ];
        }
        Self { gradient, third }
    }
}
