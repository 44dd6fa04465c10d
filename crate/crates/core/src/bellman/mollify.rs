//! Convolution of 𝔛 with the bump c·exp(−1/(1−|x|²)) scaled to radius ν
//! on ℂ² ≅ ℝ⁴.
//!
//! Each ℂ slot is written in polar coordinates; the radii use Gauss–Legendre
//! on ρ₁ ∈ [0, ν], ρ₂ ∈ [0, (ν² − ρ₁²)^{1/2}] and the angles the trapezoid
//! rule. Weights are normalized to sum to one, and the difference between
//! the fine rule and a rule with half the nodes per axis is reported as the
//! quadrature tolerance.

use num_complex::Complex64;
use rayon::prelude::*;

use super::hessian::{hessian_pairing, radial_hessian};
use super::BellmanContext;
use crate::ellipticity::CMatrix;
use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, integrate, QuadOptions};

#[derive(Debug, Clone)]
struct Rule {
    /// (w, z, weight)
    nodes: Vec<(Complex64, Complex64, f64)>,
    /// |Σ raw weights − 1| before normalization
    raw_deviation: f64,
}

fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// ∫_{ℝ⁴} exp(−1/(1−|x|²)) dx = 2π² ∫₀¹ r³ exp(−1/(1−r²)) dr
fn bump_mass() -> Result<f64> {
    let radial = integrate(|r| r.powi(3) * bump(r * r), 0.0, 1.0, QuadOptions::default())?;
    Ok(2.0 * std::f64::consts::PI.powi(2) * radial.value)
}

impl Rule {
    fn new(nu: f64, n: usize, mass: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let dtheta = std::f64::consts::TAU / n as f64;
        let norm = 1.0 / (mass * nu.powi(4));
        let mut nodes = Vec::with_capacity(n.pow(4));
        let mut raw = 0.0;
        for (x1, w1) in x.iter().zip(&w) {
            let r1 = 0.5 * nu * (x1 + 1.0);
            let top = (nu * nu - r1 * r1).max(0.0).sqrt();
            for (x2, w2) in x.iter().zip(&w) {
                let r2 = 0.5 * top * (x2 + 1.0);
                let radial = 0.5 * nu * w1 * 0.5 * top * w2 * r1 * r2;
                let density = norm * bump((r1 * r1 + r2 * r2) / (nu * nu));
                let weight = radial * density * dtheta * dtheta;
                for k1 in 0..n {
                    let wpt = Complex64::from_polar(r1, k1 as f64 * dtheta);
                    for k2 in 0..n {
                        let zpt = Complex64::from_polar(r2, (k2 as f64 + 0.5) * dtheta);
                        nodes.push((wpt, zpt, weight));
                        raw += weight;
                    }
                }
            }
        }
        for node in &mut nodes {
            node.2 /= raw;
        }
        Rule { nodes, raw_deviation: (raw - 1.0).abs() }
    }
}

#[derive(Debug, Clone)]
pub struct Mollifier {
    pub nu: f64,
    fine: Rule,
    coarse: Rule,
}

#[derive(Debug, Clone, Copy)]
pub struct MollifiedValue {
    pub value: f64,
    /// |fine − coarse|
    pub tolerance: f64,
}

/// Everything the Proposition-type checks need at one point.
#[derive(Debug, Clone, Copy)]
pub struct MollifiedSample {
    pub value: MollifiedValue,
    pub du: Complex64,
    pub dv: Complex64,
    pub du_tolerance: f64,
    pub dv_tolerance: f64,
    /// H^{A,B}_{𝔛_ν}[(u, v); (ζ, η)]
    pub hessian: f64,
    pub hessian_tolerance: f64,
    /// Σ weight·‖Hess‖_F, an upper scale for |hessian| per unit Λ|Z|²
    pub hessian_scale: f64,
}

#[derive(Default, Clone, Copy)]
struct Acc {
    value: f64,
    du: Complex64,
    dv: Complex64,
    h: f64,
    h_scale: f64,
}

impl Mollifier {
    pub const DEFAULT_NODES: usize = 16;

    pub fn new(nu: f64) -> Result<Self> {
        Self::with_nodes(nu, Self::DEFAULT_NODES)
    }

    pub fn with_nodes(nu: f64, n: usize) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::Config(format!("mollifier radius {nu} outside (0, 1]")));
        }
        let mass = bump_mass()?;
        Ok(Self { nu, fine: Rule::new(nu, n, mass), coarse: Rule::new(nu, (n / 2).max(2), mass) })
    }

    /// Deviation of the unnormalized fine-rule weights from one.
    pub fn weight_deviation(&self) -> f64 {
        self.fine.raw_deviation
    }

    pub fn node_count(&self) -> usize {
        self.fine.nodes.len()
    }

    fn accumulate(
        rule: &Rule,
        ctx: &BellmanContext,
        u: Complex64,
        v: Complex64,
        hess: Option<(&CMatrix, &CMatrix, &[Complex64], &[Complex64])>,
    ) -> Result<Acc> {
        let mut acc = Acc::default();
        for &(w, z, wt) in &rule.nodes {
            let (x, y) = (u - w, v - z);
            let (a, b) = (x.norm(), y.norm());
            let (_, d) = ctx.radial(a, b)?;
            acc.value += wt * d.value;
            if a > 0.0 {
                acc.du += x * (0.5 * wt * d.d1 / a);
            }
            if b > 0.0 {
                acc.dv += y * (0.5 * wt * d.d2 / b);
            }
            if let Some((am, bm, zeta, eta)) = hess {
                if a > 0.0 && b > 0.0 {
                    let h = radial_hessian(x, y, &d);
                    acc.h += wt * hessian_pairing(&h, am, bm, zeta, eta);
                    acc.h_scale += wt * h.norm();
                }
            }
        }
        Ok(acc)
    }

    /// 𝔛_ν(u, v)
    pub fn value(&self, ctx: &BellmanContext, u: Complex64, v: Complex64) -> Result<MollifiedValue> {
        let f = Self::accumulate(&self.fine, ctx, u, v, None)?;
        let c = Self::accumulate(&self.coarse, ctx, u, v, None)?;
        Ok(MollifiedValue { value: f.value, tolerance: (f.value - c.value).abs() })
    }

    /// (𝔛_ν, ∂ū𝔛_ν, ∂v̄𝔛_ν) with the fine rule.
    pub fn value_gradient(&self, ctx: &BellmanContext, u: Complex64, v: Complex64) -> Result<(f64, Complex64, Complex64)> {
        let f = Self::accumulate(&self.fine, ctx, u, v, None)?;
        Ok((f.value, f.du, f.dv))
    }

    /// Value, gradient and generalized Hessian of 𝔛_ν in one pass over the nodes.
    #[allow(clippy::too_many_arguments)]
    pub fn sample(
        &self,
        ctx: &BellmanContext,
        u: Complex64,
        v: Complex64,
        a_mat: &CMatrix,
        b_mat: &CMatrix,
        zeta: &[Complex64],
        eta: &[Complex64],
    ) -> Result<MollifiedSample> {
        let h = Some((a_mat, b_mat, zeta, eta));
        let f = Self::accumulate(&self.fine, ctx, u, v, h)?;
        let c = Self::accumulate(&self.coarse, ctx, u, v, h)?;
        Ok(MollifiedSample {
            value: MollifiedValue { value: f.value, tolerance: (f.value - c.value).abs() },
            du: f.du,
            dv: f.dv,
            du_tolerance: (f.du - c.du).norm(),
            dv_tolerance: (f.dv - c.dv).norm(),
            hessian: f.h,
            hessian_tolerance: (f.h - c.h).abs(),
            hessian_scale: f.h_scale,
        })
    }

    /// Values at many points in parallel.
    pub fn values(&self, ctx: &BellmanContext, points: &[(Complex64, Complex64)]) -> Result<Vec<MollifiedValue>> {
        points.par_iter().map(|&(u, v)| self.value(ctx, u, v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::{ConjugatePair, FamilySpec};

    fn ctx() -> BellmanContext {
        let pair = ConjugatePair::from_spec(FamilySpec::PowerLaw { p: 4.0 }).unwrap();
        BellmanContext::identity(pair, 1).unwrap()
    }

    #[test]
    fn weights_nearly_normalized() {
        let m = Mollifier::new(0.05).unwrap();
        assert_eq!(m.node_count(), 65536);
        assert!(m.weight_deviation() < 1e-3, "{}", m.weight_deviation());
    }

    #[test]
    fn radial_symmetry() {
        let x = ctx();
        let m = Mollifier::new(0.1).unwrap();
        let (u, v) = (Complex64::new(0.7, 0.2), Complex64::new(-0.3, 0.5));
        let a = m.value(&x, u, v).unwrap();
        let r1 = Complex64::from_polar(1.0, 1.1);
        let r2 = Complex64::from_polar(1.0, -2.3);
        let b = m.value(&x, u * r1, v * r2).unwrap();
        assert!((a.value - b.value).abs() <= 10.0 * (a.tolerance + b.tolerance) + 1e-12 * a.value);
    }

    #[test]
    fn small_radius_limit() {
        let x = ctx();
        let m = Mollifier::new(1e-2).unwrap();
        let (u, v) = (Complex64::new(1.2, 0.0), Complex64::new(0.0, 0.4));
        let mv = m.value(&x, u, v).unwrap();
        let exact = x.eval(u, v).unwrap();
        assert!((mv.value - exact).abs() < 1e-2 * exact);
    }

    #[test]
    fn far_from_singular_sets_is_second_order_close() {
        // 𝔛_ν − 𝔛 ≈ (ν² / 12)·Δ𝔛 for the unit-mass bump; only the size is checked
        let x = ctx();
        let m = Mollifier::new(0.05).unwrap();
        let (u, v) = (Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0));
        let mv = m.value(&x, u, v).unwrap();
        let exact = x.eval(u, v).unwrap();
        assert!((mv.value - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(Mollifier::new(0.0).is_err());
        assert!(Mollifier::new(1.5).is_err());
    }
}
