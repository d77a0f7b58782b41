//! Periodic 2D grid geometry and node-indexed scalar data.

use nalgebra::Vector2;
use oscint::OscError;

/// Uniform periodic grid on [0,L1) × [0,L2) with power-of-two node counts
/// (required by the spectral field solve).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    n1: usize,
    n2: usize,
    l1: f64,
    l2: f64,
    dx1: f64,
    dx2: f64,
}

impl Grid2D {
    pub fn new(n1: usize, n2: usize, l1: f64, l2: f64) -> Result<Self, OscError> {
        for n in [n1, n2] {
            if n < 4 || !n.is_power_of_two() {
                return Err(OscError::InvalidConfig(format!(
                    "grid sizes must be powers of two >= 4, got {n1}x{n2}"
                )));
            }
        }
        for l in [l1, l2] {
            if !(l.is_finite() && l > 0.0) {
                return Err(OscError::InvalidConfig(format!(
                    "domain lengths must be positive and finite, got {l1} x {l2}"
                )));
            }
        }
        Ok(Self {
            n1,
            n2,
            l1,
            l2,
            dx1: l1 / n1 as f64,
            dx2: l2 / n2 as f64,
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn dx1(&self) -> f64 {
        self.dx1
    }
    pub fn dx2(&self) -> f64 {
        self.dx2
    }
    pub fn node_count(&self) -> usize {
        self.n1 * self.n2
    }
    pub fn cell_area(&self) -> f64 {
        self.dx1 * self.dx2
    }

    /// Coordinates of node (i1, i2).
    pub fn node(&self, i1: usize, i2: usize) -> Vector2<f64> {
        Vector2::new(i1 as f64 * self.dx1, i2 as f64 * self.dx2)
    }

    /// Wrap a position into the periodic domain [0,L1) × [0,L2).
    pub fn wrap(&self, p: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(p.x.rem_euclid(self.l1), p.y.rem_euclid(self.l2))
    }

    /// Wrap a (possibly negative) node index into 0..n.
    pub(crate) fn wrap_index(i: i64, n: usize) -> usize {
        (i.rem_euclid(n as i64)) as usize
    }
}

/// Node-indexed scalar field, row-major in (i1, i2).
#[derive(Clone, Debug, PartialEq)]
pub struct GridData {
    n1: usize,
    n2: usize,
    data: Vec<f64>,
}

impl GridData {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            n1: grid.n1,
            n2: grid.n2,
            data: vec![0.0; grid.node_count()],
        }
    }

    /// Build from a function of the node coordinates.
    pub fn from_fn(grid: &Grid2D, mut f: impl FnMut(Vector2<f64>) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for i1 in 0..grid.n1 {
            for i2 in 0..grid.n2 {
                out[(i1, i2)] = f(grid.node(i1, i2));
            }
        }
        out
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Mean value over all nodes.
    pub fn mean(&self) -> f64 {
        kahan_sum(self.data.iter().copied()) / self.data.len() as f64
    }

    /// In-place accumulation of another field (used by the deposition merge).
    pub(crate) fn accumulate(&mut self, other: &GridData) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

impl std::ops::Index<(usize, usize)> for GridData {
    type Output = f64;
    fn index(&self, (i1, i2): (usize, usize)) -> &f64 {
        &self.data[i1 * self.n2 + i2]
    }
}

impl std::ops::IndexMut<(usize, usize)> for GridData {
    fn index_mut(&mut self, (i1, i2): (usize, usize)) -> &mut f64 {
        &mut self.data[i1 * self.n2 + i2]
    }
}

/// Compensated (Kahan) summation; the diagnostics sums stay accurate over
/// long time series without depending on summation order tricks.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}
