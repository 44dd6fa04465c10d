//! Flux-form assembly of −div_h(A∇_h ·).
//!
//! Forward differences from node x give the gradient on the cell with lower
//! corner x; A on that cell is the mean of A at its 2^d corners; the
//! divergence uses backward differences. The discrete form is
//! ⟨L f, g⟩ = Σ_cells ⟨A_cell ∇f, ∇g⟩ h^d.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{Grid, GridFunction};
use crate::ellipticity::{hermitian_min_eig, lambda_min, max_singular_value, CMatrix, MatrixField};
use crate::error::{Error, Result};

/// Sparse N^d × N^d operator in CSR form. The diagonal is stored last in
/// each row and equals minus the sum of the off-diagonal entries, so row
/// sums vanish in floating point.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub name: String,
    /// min over cells of the smallest eigenvalue of Re A_cell
    pub lambda: f64,
    /// max over cells of ‖A_cell‖
    pub big_lambda: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

fn cell_matrices(a: &MatrixField, grid: &Grid) -> Result<Vec<CMatrix>> {
    if a.dim() != grid.d {
        return Err(Error::GridMismatch(format!("{}x{} matrix on a {}-dimensional grid", a.dim(), a.dim(), grid.d)));
    }
    if a.is_constant() {
        return Ok(vec![a.at(0).clone()]);
    }
    if a.len() != grid.size() {
        return Err(Error::GridMismatch(format!("field with {} values on {} points", a.len(), grid.size())));
    }
    let corners = 1usize << grid.d;
    Ok((0..grid.size())
        .map(|i| {
            let mut sum = CMatrix::zeros(grid.d, grid.d);
            for mask in 0..corners {
                let mut j = i;
                for axis in 0..grid.d {
                    if mask >> axis & 1 == 1 {
                        j = grid.shift(j, axis, 1);
                    }
                }
                sum += a.at(j);
            }
            sum / Complex64::new(corners as f64, 0.0)
        })
        .collect())
}

impl DiscreteOperator {
    /// Requires λ(A) > 0.
    pub fn assemble(a: &MatrixField, grid: Grid) -> Result<Self> {
        grid.validate()?;
        let lam = lambda_min(a);
        if !(lam > 0.0) {
            return Err(Error::NotElliptic { matrix: a.name().to_string(), lambda: lam });
        }
        let cells = cell_matrices(a, &grid)?;
        let cell = |i: usize| if cells.len() == 1 { &cells[0] } else { &cells[i] };
        let h2 = grid.h().powi(2);
        let mut rows: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); grid.size()];
        for x in 0..grid.size() {
            let m = cell(x);
            for j in 0..grid.d {
                let xj = grid.shift(x, j, 1);
                for k in 0..grid.d {
                    let c = m[(j, k)] / h2;
                    let xk = grid.shift(x, k, 1);
                    // row x: −F_j(x)/h,  row x + e_j: +F_j(x)/h,  F_j = Σ_k A_jk (f(x+e_k) − f(x))/h
                    *rows[x].entry(xk).or_default() -= c;
                    *rows[x].entry(x).or_default() += c;
                    *rows[xj].entry(xk).or_default() += c;
                    *rows[xj].entry(x).or_default() -= c;
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(grid.size() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (r, entries) in rows.into_iter().enumerate() {
            let mut off = Complex64::new(0.0, 0.0);
            for (c, v) in entries {
                if c != r {
                    cols.push(c);
                    vals.push(v);
                    off += v;
                }
            }
            cols.push(r);
            vals.push(-off);
            row_ptr.push(cols.len());
        }
        let lambda = cells.iter().map(hermitian_min_eig).fold(f64::INFINITY, f64::min);
        let big_lambda = cells.iter().map(max_singular_value).fold(0.0, f64::max);
        Ok(Self { grid, name: a.name().to_string(), lambda, big_lambda, row_ptr, cols, vals })
    }

    pub fn size(&self) -> usize {
        self.grid.size()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// out = L x
    pub fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *o = s;
        }
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch("operator and function grids differ".into()));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.size()];
        self.apply_into(&f.values, &mut out);
        Ok(GridFunction { grid: self.grid, values: out })
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.size()).map(|r| self.vals[self.row_ptr[r + 1] - 1]).collect()
    }

    pub fn row_sums(&self) -> Vec<Complex64> {
        (0..self.size())
            .map(|r| self.vals[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum())
            .collect()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.size(), self.size());
        for r in 0..self.size() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// ⟨L f, f⟩ = Σ (L f)(x) conj f(x) h^d
    pub fn form(&self, f: &GridFunction) -> Result<Complex64> {
        let lf = self.apply(f)?;
        Ok(lf.values.iter().zip(&f.values).map(|(a, b)| a * b.conj()).sum::<Complex64>() * self.grid.cell_volume())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipticity::random_elliptic;
    use crate::sampling::{sample_rng, standard_normal};
    use crate::semigroup::{discrete_gradient, fourier_symbol};

    fn random_function(grid: Grid, seed: u64) -> GridFunction {
        let mut rng = sample_rng(seed, 0);
        let values = (0..grid.size())
            .map(|_| Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng)))
            .collect();
        GridFunction::new(grid, values).unwrap()
    }

    #[test]
    fn laplacian_stencil() {
        let g = Grid::new(1, 16, 2.0).unwrap();
        let op = DiscreteOperator::assemble(&MatrixField::identity(1), g).unwrap();
        let m = op.to_dense();
        let h2 = g.h().powi(2);
        for r in 0..16 {
            for c in 0..16 {
                let expect = match (c + 16 - r) % 16 {
                    0 => 2.0 / h2,
                    1 | 15 => -1.0 / h2,
                    _ => 0.0,
                };
                assert!((m[(r, c)] - Complex64::new(expect, 0.0)).norm() < 1e-12 / h2);
            }
        }
    }

    #[test]
    fn row_sums_vanish_exactly() {
        let mut rng = sample_rng(4, 0);
        let a = MatrixField::constant("r", random_elliptic(&mut rng, 2, 4.0)).unwrap();
        let op = DiscreteOperator::assemble(&a, Grid::new(2, 8, 1.3).unwrap()).unwrap();
        assert!(op.row_sums().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        let ones = GridFunction::constant(op.grid, Complex64::new(1.0, 0.0));
        assert!(op.apply(&ones).unwrap().values.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn fourier_diagonalization() {
        let mut rng = sample_rng(5, 0);
        let am = random_elliptic(&mut rng, 2, 4.0);
        let a = MatrixField::constant("r", am.clone()).unwrap();
        let g = Grid::new(2, 8, 2.5).unwrap();
        let op = DiscreteOperator::assemble(&a, g).unwrap();
        for m in [[0i64, 0], [1, 0], [0, 3], [2, -1], [4, 4]] {
            let kappa: Vec<f64> = m.iter().map(|&mi| std::f64::consts::TAU * mi as f64 / g.length).collect();
            let f = GridFunction::from_fn(g, |x| Complex64::from_polar(1.0, kappa[0] * x[0] + kappa[1] * x[1]));
            let lf = op.apply(&f).unwrap();
            let s = fourier_symbol(&am, &g, &m);
            let scale = op.big_lambda / g.h().powi(2);
            for (a, b) in lf.values.iter().zip(&f.values) {
                assert!((a - s * b).norm() < 1e-12 * scale, "{m:?}");
            }
        }
    }

    #[test]
    fn accretive_form() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let mut rng = sample_rng(6, 0);
        let a = MatrixField::constant("r", random_elliptic(&mut rng, 2, 4.0)).unwrap();
        let op = DiscreteOperator::assemble(&a, g).unwrap();
        for seed in 0..20 {
            let f = random_function(g, seed);
            let grad: f64 = discrete_gradient(&f)
                .iter()
                .flat_map(|p| p.values.iter().map(|z| z.norm_sqr()))
                .sum::<f64>()
                * g.cell_volume();
            let re = op.form(&f).unwrap().re;
            assert!(re >= lambda_min(&a) * grad * (1.0 - 1e-12), "{re} vs {grad}");
        }
    }

    #[test]
    fn pointwise_field_and_errors() {
        use crate::ellipticity::MatrixSpec;
        let g = Grid::new(1, 16, 1.0).unwrap();
        let spec: MatrixSpec = serde_json::from_str(r#"{"kind":"modulated_rotation","phi":0.3,"d":1}"#).unwrap();
        let a = spec.build_on(&g.points(), g.length).unwrap();
        let op = DiscreteOperator::assemble(&a, g).unwrap();
        assert!(op.row_sums().iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!(op.lambda >= lambda_min(&a));
        let bad = MatrixField::rotation(2.0, 1);
        assert!(matches!(DiscreteOperator::assemble(&bad, g), Err(Error::NotElliptic { .. })));
        let wrong_dim = MatrixField::identity(2);
        assert!(matches!(DiscreteOperator::assemble(&wrong_dim, g), Err(Error::GridMismatch(_))));
    }
}
