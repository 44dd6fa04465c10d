//! Real 4×4 Hessians in (Re u, Im u, Re v, Im v) and their pairing with
//! complex coefficient matrices.

use std::sync::Arc;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::Serialize;

use super::{BellmanContext, RadialDerivs, Region};
use crate::ellipticity::CMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HessianSource {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianForm {
    pub matrix: Matrix4<f64>,
    pub source: HessianSource,
    pub region: Region,
}

impl HessianForm {
    /// max |H_ij − H_ji| relative to max |H_ij|
    pub fn asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let scale = m.amax().max(f64::MIN_POSITIVE);
        (m - m.transpose()).amax() / scale
    }
}

/// Chain rule for F(u, v) = f(|u|, |v|) at u, v ≠ 0:
/// uu block f₁₁ êêᵀ + (f₁/a)(I − êêᵀ), likewise vv, and f₁₂ ê_u ê_vᵀ across.
pub fn radial_hessian(u: Complex64, v: Complex64, d: &RadialDerivs) -> Matrix4<f64> {
    let (a, b) = (u.norm(), v.norm());
    let eu = [u.re / a, u.im / a];
    let ev = [v.re / b, v.im / b];
    let mut h = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            h[(i, j)] = d.d11 * eu[i] * eu[j] + d.d1 / a * (id - eu[i] * eu[j]);
            h[(2 + i, 2 + j)] = d.d22 * ev[i] * ev[j] + d.d2 / b * (id - ev[i] * ev[j]);
            h[(i, 2 + j)] = d.d12 * eu[i] * ev[j];
            h[(2 + j, i)] = h[(i, 2 + j)];
        }
    }
    h
}

/// Pairs `(Hess ⊗ I_d)Z` with `𝒜Z`, where Z = (Re ζ, Im ζ, Re η, Im η) and
/// 𝒜Z = (Re Aζ, Im Aζ, Re Bη, Im Bη).
pub fn hessian_pairing(h: &Matrix4<f64>, a: &CMatrix, b: &CMatrix, zeta: &[Complex64], eta: &[Complex64]) -> f64 {
    let d = zeta.len();
    let az: Vec<Complex64> = (0..d).map(|i| (0..d).map(|j| a[(i, j)] * zeta[j]).sum()).collect();
    let be: Vec<Complex64> = (0..d).map(|i| (0..d).map(|j| b[(i, j)] * eta[j]).sum()).collect();
    let mut total = 0.0;
    for k in 0..d {
        let z = [zeta[k].re, zeta[k].im, eta[k].re, eta[k].im];
        let w = [az[k].re, az[k].im, be[k].re, be[k].im];
        for r in 0..4 {
            let hz: f64 = (0..4).map(|c| h[(r, c)] * z[c]).sum();
            total += hz * w[r];
        }
    }
    total
}

/// A function on ℂ² with a computable real Hessian.
pub trait TwoSlotField: Sync {
    fn hessian(&self, u: Complex64, v: Complex64) -> Result<Matrix4<f64>>;
}

impl TwoSlotField for BellmanContext {
    fn hessian(&self, u: Complex64, v: Complex64) -> Result<Matrix4<f64>> {
        Ok(self.hessian_form(u, v)?.matrix)
    }
}

type Radial = Arc<dyn Fn(f64, f64) -> RadialDerivs + Send + Sync>;

/// f(|u|, |v|) given through its radial derivatives.
#[derive(Clone)]
pub struct RadialShape {
    derivs: Radial,
}

impl RadialShape {
    pub fn new(f: impl Fn(f64, f64) -> RadialDerivs + Send + Sync + 'static) -> Self {
        Self { derivs: Arc::new(f) }
    }

    /// P(|u|) + Q(|v|); each closure returns (value, first, second derivative).
    pub fn sum(
        p: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
        q: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        Self::new(move |a, b| {
            let (pp, qq) = (p(a), q(b));
            RadialDerivs { value: pp[0] + qq[0], d1: pp[1], d2: qq[1], d11: pp[2], d12: 0.0, d22: qq[2] }
        })
    }

    /// |u|² R(|v|)
    pub fn product(r: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Self::new(move |a, b| {
            let rr = r(b);
            RadialDerivs {
                value: a * a * rr[0],
                d1: 2.0 * a * rr[0],
                d2: a * a * rr[1],
                d11: 2.0 * rr[0],
                d12: 2.0 * a * rr[1],
                d22: a * a * rr[2],
            }
        })
    }

    pub fn derivs(&self, a: f64, b: f64) -> RadialDerivs {
        (self.derivs)(a, b)
    }
}

impl TwoSlotField for RadialShape {
    fn hessian(&self, u: Complex64, v: Complex64) -> Result<Matrix4<f64>> {
        if u.norm() == 0.0 {
            return Err(Error::Pole("u"));
        }
        if v.norm() == 0.0 {
            return Err(Error::Pole("v"));
        }
        Ok(radial_hessian(u, v, &self.derivs(u.norm(), v.norm())))
    }
}

/// A field with a constant Hessian, e.g. a quadratic polynomial.
impl TwoSlotField for Matrix4<f64> {
    fn hessian(&self, _u: Complex64, _v: Complex64) -> Result<Matrix4<f64>> {
        Ok(*self)
    }
}

/// H^{A,B}_F[(u, v); (ζ, η)]
pub fn generalized_hessian<F: TwoSlotField + ?Sized>(
    f: &F,
    a: &CMatrix,
    b: &CMatrix,
    u: Complex64,
    v: Complex64,
    zeta: &[Complex64],
    eta: &[Complex64],
) -> Result<f64> {
    Ok(hessian_pairing(&f.hessian(u, v)?, a, b, zeta, eta))
}

/// H̃: the generalized Hessian at (ζ u/|u|, η v/|v|).
pub fn hessian_tilde<F: TwoSlotField + ?Sized>(
    f: &F,
    a: &CMatrix,
    b: &CMatrix,
    u: Complex64,
    v: Complex64,
    zeta: &[Complex64],
    eta: &[Complex64],
) -> Result<f64> {
    if u.norm() == 0.0 {
        return Err(Error::Pole("u"));
    }
    if v.norm() == 0.0 {
        return Err(Error::Pole("v"));
    }
    let (pu, pv) = (u / u.norm(), v / v.norm());
    let z: Vec<Complex64> = zeta.iter().map(|x| x * pu).collect();
    let e: Vec<Complex64> = eta.iter().map(|x| x * pv).collect();
    generalized_hessian(f, a, b, u, v, &z, &e)
}

/// ⟨x, y⟩ = Σ xᵢ ȳᵢ
fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

fn apply(m: &CMatrix, x: &[Complex64]) -> Vec<Complex64> {
    (0..x.len()).map(|i| (0..x.len()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

/// Closed form of H̃ for P(|u|) + Q(|v|), from P′, P″ at a and Q′, Q″ at b.
#[allow(clippy::too_many_arguments)]
pub fn radial_sum_tilde(
    a_mat: &CMatrix,
    b_mat: &CMatrix,
    a: f64,
    b: f64,
    p: [f64; 2],
    q: [f64; 2],
    zeta: &[Complex64],
    eta: &[Complex64],
) -> f64 {
    let side = |m: &CMatrix, x: &[Complex64], d1: f64, d2: f64, r: f64| {
        let (plus, minus) = (0.5 * (d2 + d1 / r), 0.5 * (d2 - d1 / r));
        let y: Vec<Complex64> = x.iter().map(|z| z * plus + z.conj() * minus).collect();
        inner(&apply(m, x), &y).re
    };
    side(a_mat, zeta, p[0], p[1], a) + side(b_mat, eta, q[0], q[1], b)
}

/// Closed form of H̃ for |u|² R(|v|), from R, R′, R″ at b.
#[allow(clippy::too_many_arguments)]
pub fn radial_product_tilde(
    a_mat: &CMatrix,
    b_mat: &CMatrix,
    a: f64,
    b: f64,
    r: [f64; 3],
    zeta: &[Complex64],
    eta: &[Complex64],
) -> f64 {
    let y1: Vec<Complex64> = zeta
        .iter()
        .zip(eta)
        .map(|(z, e)| z * (2.0 * r[0]) + 2.0 * a * r[1] * e.re)
        .collect();
    let y2: Vec<Complex64> = zeta
        .iter()
        .zip(eta)
        .map(|(z, e)| {
            Complex64::new(2.0 * a * r[1] * z.re + a * a * r[2] * e.re, a * a * r[1] / b * e.im)
        })
        .collect();
    inner(&apply(a_mat, zeta), &y1).re + inner(&apply(b_mat, eta), &y2).re
}

impl BellmanContext {
    /// Analytic 4×4 Hessian, defined off the coordinate planes and the
    /// critical curve.
    pub fn hessian_form(&self, u: Complex64, v: Complex64) -> Result<HessianForm> {
        let (a, b) = (u.norm(), v.norm());
        if a == 0.0 {
            return Err(Error::Pole("u"));
        }
        if b == 0.0 {
            return Err(Error::Pole("v"));
        }
        if b == self.pair.phi.try_d1(a)? {
            return Err(Error::OnCriticalSurface);
        }
        self.hessian_unchecked(u, v)
    }

    /// Analytic Hessian of the branch selected at (u, v), without the
    /// critical-curve check; ties use the lower branch.
    pub fn hessian_unchecked(&self, u: Complex64, v: Complex64) -> Result<HessianForm> {
        let (region, d) = self.radial(u.norm(), v.norm())?;
        Ok(HessianForm { matrix: radial_hessian(u, v, &d), source: HessianSource::Analytic, region })
    }

    /// Real gradient (∂/∂Re u, ∂/∂Im u, ∂/∂Re v, ∂/∂Im v) = 2(Re ∂ū, Im ∂ū, Re ∂v̄, Im ∂v̄).
    pub fn real_gradient(&self, u: Complex64, v: Complex64) -> Result<[f64; 4]> {
        let (du, dv) = self.gradient_extended(u, v)?;
        Ok([2.0 * du.re, 2.0 * du.im, 2.0 * dv.re, 2.0 * dv.im])
    }

    /// Central differences of the analytic gradient with steps 1e-5·|u| and 1e-5·|v|.
    pub fn hessian_fd(&self, u: Complex64, v: Complex64) -> Result<HessianForm> {
        let (a, b) = (u.norm(), v.norm());
        if a == 0.0 {
            return Err(Error::Pole("u"));
        }
        if b == 0.0 {
            return Err(Error::Pole("v"));
        }
        let steps = [1e-5 * a, 1e-5 * a, 1e-5 * b, 1e-5 * b];
        let mut m = Matrix4::zeros();
        for k in 0..4 {
            let shift = |sign: f64| {
                let mut x = [u.re, u.im, v.re, v.im];
                x[k] += sign * steps[k];
                (Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3]))
            };
            let (up, vp) = shift(1.0);
            let (um, vm) = shift(-1.0);
            let gp = self.real_gradient(up, vp)?;
            let gm = self.real_gradient(um, vm)?;
            for r in 0..4 {
                m[(r, k)] = (gp[r] - gm[r]) / (2.0 * steps[k]);
            }
        }
        let region = self.classify(u, v).region;
        Ok(HessianForm { matrix: m, source: HessianSource::FiniteDifference, region })
    }

    /// H̃ of 𝔛 through the closed forms for radial sums and products.
    pub fn hessian_tilde_closed_form(
        &self,
        a_mat: &CMatrix,
        b_mat: &CMatrix,
        u: Complex64,
        v: Complex64,
        zeta: &[Complex64],
        eta: &[Complex64],
    ) -> Result<f64> {
        let (a, b) = (u.norm(), v.norm());
        let (region, d) = self.radial(a, b)?;
        match region {
            Region::Lower => Ok(radial_sum_tilde(a_mat, b_mat, a, b, [d.d1, d.d11], [d.d2, d.d22], zeta, eta)),
            Region::Upper => {
                let (_, f1, f2) = self.pair.phi.try_triple(a)?;
                let (_, g1, g2) = self.pair.psi.try_triple(b)?;
                let j = self.pair.aux_j(b)?;
                let base = radial_sum_tilde(a_mat, b_mat, a, b, [f1, f2], [g1, g2], zeta, eta);
                let r = [j, 1.0 / g1, -g2 / (g1 * g1)];
                Ok(base + self.delta * radial_product_tilde(a_mat, b_mat, a, b, r, zeta, eta))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_rng, unit_complex_vector};
    use crate::ellipticity::random_elliptic;
    use crate::young::{ConjugatePair, FamilySpec};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn quadratic_and_affine_fields() {
        let mut rng = sample_rng(1, 0);
        let a = random_elliptic(&mut rng, 2, 4.0);
        let b = random_elliptic(&mut rng, 2, 4.0);
        let zeta = unit_complex_vector(&mut rng, 2);
        let eta = unit_complex_vector(&mut rng, 2);
        // |u|² has Hessian 2I on the u block
        let mut h = Matrix4::zeros();
        h[(0, 0)] = 2.0;
        h[(1, 1)] = 2.0;
        let got = generalized_hessian(&h, &a, &b, c(1.0, 2.0), c(0.0, 1.0), &zeta, &eta).unwrap();
        let expect = 2.0 * inner(&apply(&a, &zeta), &zeta).re;
        assert!(rel(got, expect) < 1e-13);
        // Re u is affine
        let zero = Matrix4::<f64>::zeros();
        assert_eq!(generalized_hessian(&zero, &a, &b, c(1.0, 0.0), c(1.0, 0.0), &zeta, &eta).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms_match_assembly() {
        let sum = RadialShape::sum(|t| [t.powi(4), 4.0 * t.powi(3), 12.0 * t * t], |t| [t * t, 2.0 * t, 2.0]);
        let prod = RadialShape::product(|t| [t, 1.0, 0.0]);
        let mut rng = sample_rng(2, 0);
        for _ in 0..200 {
            let a = random_elliptic(&mut rng, 2, 4.0);
            let b = random_elliptic(&mut rng, 2, 4.0);
            let zeta = unit_complex_vector(&mut rng, 2);
            let eta = unit_complex_vector(&mut rng, 2);
            let u = unit_complex_vector(&mut rng, 1)[0] * 1.7;
            let v = unit_complex_vector(&mut rng, 1)[0] * 0.4;
            let (ua, va) = (u.norm(), v.norm());
            let h1 = hessian_tilde(&sum, &a, &b, u, v, &zeta, &eta).unwrap();
            let e1 = radial_sum_tilde(&a, &b, ua, va, [4.0 * ua.powi(3), 12.0 * ua * ua], [2.0 * va, 2.0], &zeta, &eta);
            assert!(rel(h1, e1) < 1e-12, "{h1} vs {e1}");
            let h2 = hessian_tilde(&prod, &a, &b, u, v, &zeta, &eta).unwrap();
            let e2 = radial_product_tilde(&a, &b, ua, va, [va, 1.0, 0.0], &zeta, &eta);
            assert!(rel(h2, e2) < 1e-12, "{h2} vs {e2}");
        }
    }

    #[test]
    fn tilde_equals_plain_for_positive_real_arguments() {
        let shape = RadialShape::product(|t| [t, 1.0, 0.0]);
        let mut rng = sample_rng(3, 0);
        let a = random_elliptic(&mut rng, 2, 4.0);
        let zeta = unit_complex_vector(&mut rng, 2);
        let eta = unit_complex_vector(&mut rng, 2);
        let (u, v) = (c(0.8, 0.0), c(1.3, 0.0));
        let t = hessian_tilde(&shape, &a, &a, u, v, &zeta, &eta).unwrap();
        let p = generalized_hessian(&shape, &a, &a, u, v, &zeta, &eta).unwrap();
        assert!(rel(t, p) < 1e-15);
    }

    #[test]
    fn bellman_lower_branch_has_no_mixed_block() {
        let pair = ConjugatePair::from_spec(FamilySpec::ZygmundLog { r: 3.0 }).unwrap();
        let x = BellmanContext::identity(pair, 1).unwrap();
        let h = x.hessian_form(c(2.0, 1.0), c(0.1, 0.3)).unwrap();
        assert_eq!(h.region, Region::Lower);
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(h.matrix[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn power_law_upper_second_derivative() {
        let pair = ConjugatePair::from_spec(FamilySpec::PowerLaw { p: 4.0 }).unwrap();
        let x = BellmanContext::identity(pair, 1).unwrap();
        let (a, b) = (0.5, 3.0);
        let (_, d) = x.radial(a, b).unwrap();
        let q: f64 = 4.0 / 3.0;
        let (g1, g2) = (b.powf(q - 1.0), (q - 1.0) * b.powf(q - 2.0));
        assert!(rel(d.d22, g2 * (1.0 - x.delta * a * a / (g1 * g1))) < 1e-14);
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for spec in [
            FamilySpec::PowerLaw { p: 4.0 },
            FamilySpec::ZygmundLog { r: 3.0 },
            FamilySpec::DualPowerSum { q: 1.5, r: 1.8 },
        ] {
            let x = BellmanContext::identity(ConjugatePair::from_spec(spec).unwrap(), 1).unwrap();
            for (u, v) in [(c(0.6, 0.3), c(0.1, -0.05)), (c(0.3, -0.2), c(2.0, 1.0))] {
                let an = x.hessian_form(u, v).unwrap();
                let fd = x.hessian_fd(u, v).unwrap();
                let err = (an.matrix - fd.matrix).amax() / an.matrix.amax();
                assert!(err < 1e-6, "{spec}: {err}");
                assert!(an.asymmetry() < 1e-12 && fd.asymmetry() < 1e-5);
            }
        }
    }

    #[test]
    fn critical_surface_is_rejected() {
        let pair = ConjugatePair::from_spec(FamilySpec::PowerLaw { p: 4.0 }).unwrap();
        let x = BellmanContext::identity(pair, 1).unwrap();
        assert_eq!(x.hessian_form(c(1.0, 0.0), c(1.0, 0.0)).unwrap_err(), Error::OnCriticalSurface);
    }
}
