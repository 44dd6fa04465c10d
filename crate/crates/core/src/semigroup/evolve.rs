//! Crank–Nicolson time stepping with step-doubling error control, and the
//! Fourier and dense matrix-exponential oracles.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::{DiscreteOperator, Grid, GridFunction};
use crate::ellipticity::CMatrix;
use crate::error::{Error, Result};

type C = Complex64;

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned BiCGSTAB for (I + a L) x = b; `x` holds the initial
/// guess on entry.
pub fn bicgstab(op: &DiscreteOperator, a: f64, b: &[C], x: &mut [C], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = b.len();
    let inv_diag: Vec<C> = op.diagonal().iter().map(|d| 1.0 / (1.0 + a * d)).collect();
    let mut tmp = vec![C::new(0.0, 0.0); n];
    let apply = |v: &[C], out: &mut [C], tmp: &mut [C]| {
        op.apply_into(v, tmp);
        for i in 0..n {
            out[i] = v[i] + a * tmp[i];
        }
    };
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        return Ok(SolveStats::default());
    }
    let mut r = vec![C::new(0.0, 0.0); n];
    apply(x, &mut r, &mut tmp);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = norm(&r) / bn;
    if res <= tol {
        return Ok(SolveStats { iterations: 0, residual: res });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (C::new(1.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 0.0));
    let mut v = vec![C::new(0.0, 0.0); n];
    let mut p = vec![C::new(0.0, 0.0); n];
    let mut y = vec![C::new(0.0, 0.0); n];
    let mut s = vec![C::new(0.0, 0.0); n];
    let mut z = vec![C::new(0.0, 0.0); n];
    let mut t = vec![C::new(0.0, 0.0); n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.norm() == 0.0 {
            return Err(Error::LinearSolve { iterations: it, residual: res });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = inv_diag[i] * p[i];
        }
        apply(&y, &mut v, &mut tmp);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bn <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(SolveStats { iterations: it, residual: norm(&s) / bn });
        }
        for i in 0..n {
            z[i] = inv_diag[i] * s[i];
        }
        apply(&z, &mut t, &mut tmp);
        let tt = dot(&t, &t);
        omega = if tt.norm() == 0.0 { C::new(0.0, 0.0) } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / bn;
        if res <= tol {
            return Ok(SolveStats { iterations: it, residual: res });
        }
        if omega.norm() == 0.0 || !res.is_finite() {
            return Err(Error::LinearSolve { iterations: it, residual: res });
        }
    }
    Err(Error::LinearSolve { iterations: max_iter, residual: res })
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EvolverStats {
    pub steps: usize,
    pub rejected: usize,
    pub solver_iterations: usize,
}

/// Adaptive Crank–Nicolson propagator. One full step is compared with two
/// half steps; the two-half-step result is kept when the relative
/// difference is below `tolerance`. Local errors add up over the steps, so
/// the default sits two orders below the 1e-8 per-step target.
#[derive(Debug, Clone)]
pub struct Evolver<'a> {
    op: &'a DiscreteOperator,
    pub tolerance: f64,
    dt: f64,
    pub stats: EvolverStats,
}

impl<'a> Evolver<'a> {
    pub const TOLERANCE: f64 = 1e-10;
    const SOLVE_TOL: f64 = 1e-14;
    const MAX_ITER: usize = 2000;

    pub fn new(op: &'a DiscreteOperator) -> Self {
        let stiff = op.diagonal().iter().map(|d| d.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        Self { op, tolerance: Self::TOLERANCE, dt: 0.1 / stiff, stats: EvolverStats::default() }
    }

    fn cn_step(&mut self, u: &[C], dt: f64) -> Result<Vec<C>> {
        let n = u.len();
        let mut lu = vec![C::new(0.0, 0.0); n];
        self.op.apply_into(u, &mut lu);
        let rhs: Vec<C> = (0..n).map(|i| u[i] - 0.5 * dt * lu[i]).collect();
        let mut x = u.to_vec();
        let s = bicgstab(self.op, 0.5 * dt, &rhs, &mut x, Self::SOLVE_TOL, Self::MAX_ITER)?;
        self.stats.solver_iterations += s.iterations;
        Ok(x)
    }

    /// Advances `u` in place by `t ≥ 0`.
    pub fn advance(&mut self, u: &mut Vec<C>, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::Config(format!("negative evolution time {t}")));
        }
        let mut remaining = t;
        while remaining > 0.0 {
            let truncated = self.dt >= remaining;
            let dt = if truncated { remaining } else { self.dt };
            let full = self.cn_step(u, dt)?;
            let half = self.cn_step(u, 0.5 * dt)?;
            let two = self.cn_step(&half, 0.5 * dt)?;
            let scale = norm(&two);
            let diff: Vec<C> = two.iter().zip(&full).map(|(a, b)| a - b).collect();
            let err = if scale > 0.0 { norm(&diff) / scale } else { 0.0 };
            let factor = if err == 0.0 { 5.0 } else { (0.9 * (self.tolerance / err).cbrt()).clamp(0.2, 5.0) };
            if err <= self.tolerance || dt < 1e-15 * t.max(1e-300) {
                *u = two;
                self.stats.steps += 1;
                remaining = if truncated { 0.0 } else { remaining - dt };
                if !truncated || factor < 1.0 {
                    self.dt = dt * factor;
                }
            } else {
                self.stats.rejected += 1;
                self.dt = dt * factor.min(0.9);
            }
        }
        Ok(())
    }
}

/// T_t f = exp(−t L) f by adaptive Crank–Nicolson.
pub fn evolve(op: &DiscreteOperator, f: &GridFunction, t: f64) -> Result<GridFunction> {
    if f.grid != op.grid {
        return Err(Error::GridMismatch("operator and function grids differ".into()));
    }
    let mut u = f.values.clone();
    Evolver::new(op).advance(&mut u, t)?;
    Ok(GridFunction { grid: f.grid, values: u })
}

/// Symbol of the flux-form operator with constant A on the Fourier mode
/// with integer wave numbers `m`: Σ_jk A_jk (e^{−ihκ_j} − 1)(e^{ihκ_k} − 1)/h²,
/// κ = 2πm/ℓ.
pub fn fourier_symbol(a: &CMatrix, grid: &Grid, m: &[i64]) -> C {
    let h = grid.h();
    let e: Vec<C> = (0..grid.d)
        .map(|j| C::from_polar(1.0, std::f64::consts::TAU * m[j] as f64 / grid.n as f64) - 1.0)
        .collect();
    let mut s = C::new(0.0, 0.0);
    for j in 0..grid.d {
        for k in 0..grid.d {
            s += a[(j, k)] * e[j].conj() * e[k];
        }
    }
    s / (h * h)
}

/// exp(−tL) f for constant A through the discrete Fourier transform.
pub fn fourier_evolve(a: &CMatrix, f: &GridFunction, t: f64) -> Result<GridFunction> {
    let g = f.grid;
    if a.nrows() != g.d {
        return Err(Error::GridMismatch("matrix and grid dimensions differ".into()));
    }
    let n = g.n;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut data = f.values.clone();
    let along = |data: &mut Vec<C>, plan: &std::sync::Arc<dyn rustfft::Fft<f64>>, axis: usize| {
        if axis == 0 {
            for row in data.chunks_mut(n) {
                plan.process(row);
            }
        } else {
            let mut col = vec![C::new(0.0, 0.0); n];
            for i0 in 0..n {
                for i1 in 0..n {
                    col[i1] = data[i0 + n * i1];
                }
                plan.process(&mut col);
                for i1 in 0..n {
                    data[i0 + n * i1] = col[i1];
                }
            }
        }
    };
    for axis in 0..g.d {
        along(&mut data, &fwd, axis);
    }
    for (i, z) in data.iter_mut().enumerate() {
        let c = g.coords(i);
        let m = [c[0] as i64, c[1] as i64];
        *z *= (-t * fourier_symbol(a, &g, &m[..g.d])).exp();
    }
    for axis in 0..g.d {
        along(&mut data, &inv, axis);
    }
    let scale = 1.0 / g.size() as f64;
    Ok(GridFunction { grid: g, values: data.into_iter().map(|z| z * scale).collect() })
}

/// exp(−tL) f with a dense matrix exponential; limited to N^d ≤ 4096.
pub fn expm_evolve(op: &DiscreteOperator, f: &GridFunction, t: f64) -> Result<GridFunction> {
    if op.size() > 4096 {
        return Err(Error::Config(format!("dense exponential needs N^d <= 4096, got {}", op.size())));
    }
    let e = (op.to_dense() * C::new(-t, 0.0)).exp();
    let v = e * nalgebra::DVector::from_column_slice(&f.values);
    Ok(GridFunction { grid: f.grid, values: v.iter().copied().collect() })
}
