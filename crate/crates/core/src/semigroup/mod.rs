//! L_A = −div(A∇·) on a periodic grid, the semigroup exp(−tL_A), and both
//! sides of the bilinear embedding together with the heat-flow energy check.
//!
//! Grid points are ordered with the first axis fastest: index = i₀ + N·i₁.

mod embedding;
mod evolve;
mod operator;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use embedding::{
    embedding_lhs, embedding_rhs, heat_flow_check, refinement_study, trajectory, verify_embedding, DataSpec,
    EmbeddingConfig, EmbeddingRun, HeatFlowOptions, LhsEstimate, RhsForm, TMax, TimeGrid, TimeRecord,
};
pub use evolve::{bicgstab, evolve, expm_evolve, fourier_evolve, fourier_symbol, Evolver, EvolverStats, SolveStats};
pub use operator::DiscreteOperator;

/// Periodic grid of N^d points on the torus of side `length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: usize,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    pub length: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, length: f64) -> Result<Self> {
        let g = Self { d, n, length };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d == 1 || self.d == 2) {
            return Err(Error::Config(format!("grid dimension {} not in {{1, 2}}", self.d)));
        }
        if self.n < 8 {
            return Err(Error::Config(format!("grid needs N >= 8, got {}", self.n)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::Config(format!("grid length {} must be positive", self.length)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn size(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Per-axis integer coordinates of a flat index.
    pub fn coords(&self, i: usize) -> [usize; 2] {
        [i % self.n, i / self.n]
    }

    pub fn index(&self, c: [usize; 2]) -> usize {
        c[0] + if self.d == 2 { self.n * c[1] } else { 0 }
    }

    /// Index of the neighbour `step` cells along `axis`, with periodic wrap.
    pub fn shift(&self, i: usize, axis: usize, step: isize) -> usize {
        let mut c = self.coords(i);
        c[axis] = (c[axis] as isize + step).rem_euclid(self.n as isize) as usize;
        self.index(c)
    }

    /// Physical coordinates of every point.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let h = self.h();
        (0..self.size())
            .map(|i| {
                let c = self.coords(i);
                (0..self.d).map(|k| c[k] as f64 * h).collect()
            })
            .collect()
    }

    /// Smallest nonzero eigenvalue of the discrete Laplacian, (2 − 2cos(2π/N))/h².
    pub fn sigma_min(&self) -> f64 {
        (2.0 - 2.0 * (std::f64::consts::TAU / self.n as f64).cos()) / self.h().powi(2)
    }
}

/// Complex values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::GridMismatch(format!("{} values for {} points", values.len(), grid.size())));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Config("grid function has non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.size()] }
    }

    pub fn constant(grid: Grid, c: Complex64) -> Self {
        Self { grid, values: vec![c; grid.size()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = grid.points().iter().map(|x| f(x)).collect();
        Self { grid, values }
    }

    /// (Σ|f|² h^d)^{1/2}
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(GridFunction { grid: self.grid, values })
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().map(|z| z * c).collect() }
    }

    /// ‖f − g‖ / ‖g‖
    pub fn relative_distance(&self, reference: &GridFunction) -> f64 {
        let diff: f64 = self.values.iter().zip(&reference.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let base: f64 = reference.values.iter().map(|z| z.norm_sqr()).sum();
        (diff / base).sqrt()
    }
}

/// Forward periodic differences (f(x + h e_j) − f(x))/h, one function per axis.
pub fn discrete_gradient(f: &GridFunction) -> Vec<GridFunction> {
    let g = f.grid;
    let h = g.h();
    (0..g.d)
        .map(|axis| {
            let values = (0..g.size()).map(|i| (f.values[g.shift(i, axis, 1)] - f.values[i]) / h).collect();
            GridFunction { grid: g, values }
        })
        .collect()
}

/// Pointwise Euclidean magnitude |∇_h f|.
pub fn gradient_magnitude(f: &GridFunction) -> Vec<f64> {
    let parts = discrete_gradient(f);
    (0..f.grid.size())
        .map(|i| parts.iter().map(|p| p.values[i].norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(3, 16, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(1, 16, 0.0).is_err());
        let g = Grid::new(2, 8, 2.0).unwrap();
        assert_eq!(g.size(), 64);
        assert_eq!(g.cell_volume(), 0.0625);
        assert_eq!(g.shift(g.index([7, 3]), 0, 1), g.index([0, 3]));
        assert_eq!(g.shift(g.index([2, 0]), 1, -1), g.index([2, 7]));
    }

    #[test]
    fn config_uses_capital_n() {
        let g: Grid = serde_json::from_str(r#"{"d": 1, "N": 64, "length": 6.0}"#).unwrap();
        assert_eq!(g.n, 64);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let f = GridFunction::constant(g, Complex64::new(3.0, -1.0));
        assert!(gradient_magnitude(&f).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_of_fourier_mode() {
        let g = Grid::new(1, 32, 3.0).unwrap();
        let k = std::f64::consts::TAU * 5.0 / g.length;
        let f = GridFunction::from_fn(g, |x| Complex64::from_polar(1.0, k * x[0]));
        let expect = (Complex64::from_polar(1.0, g.h() * k) - 1.0).norm() / g.h();
        for m in gradient_magnitude(&f) {
            assert!((m - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn gradient_is_linear() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let f = GridFunction::from_fn(g, |x| Complex64::new(x[0] * x[1], x[0]));
        let h = GridFunction::from_fn(g, |x| Complex64::new(x[1].sin(), 0.0));
        let sum = discrete_gradient(&f.add(&h).unwrap());
        let (gf, gh) = (discrete_gradient(&f), discrete_gradient(&h));
        for axis in 0..2 {
            for i in 0..g.size() {
                let direct = (f.values[g.shift(i, axis, 1)] + h.values[g.shift(i, axis, 1)]
                    - (f.values[i] + h.values[i]))
                    / g.h();
                assert_eq!(sum[axis].values[i], direct);
                assert!((sum[axis].values[i] - gf[axis].values[i] - gh[axis].values[i]).norm() < 1e-12);
            }
        }
    }
}
