//! The Bellman function
//!
//! ```text
//! 𝔛(u, v) = (1+δ)(Φ(|u|) + Ψ(|v|)) + δ|u|² I(|u|)    if |v| ≤ Φ′(|u|)
//!         = Φ(|u|) + Ψ(|v|) + δ|u|² J(|v|)            otherwise
//! ```
//!
//! with its first and second derivatives, generalized Hessian, mollification
//! and the sampled checks of its size, gradient and convexity bounds.

mod hessian;
mod mollify;
mod verify;

use num_complex::Complex64;
use serde::Serialize;

use crate::ellipticity::{c_p_constant, delta_param, MatrixField};
use crate::error::{Error, Result};
use crate::young::ConjugatePair;

pub use hessian::{
    generalized_hessian, hessian_tilde, radial_product_tilde, radial_sum_tilde, radial_hessian, HessianForm,
    HessianSource, RadialShape, TwoSlotField,
};
pub use mollify::{Mollifier, MollifiedValue};
pub use verify::{
    verify_gradient_bounds, verify_hessian_lower, verify_mollified, verify_upper_bound, SampleOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    /// |v| ≤ Φ′(|u|), including the critical curve
    Lower,
    /// |v| > Φ′(|u|)
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionTag {
    pub region: Region,
    /// Φ′(|u|) − |v|
    pub distance: f64,
}

/// A function of (a, b) = (|u|, |v|) with its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadialDerivs {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

/// A conjugate pair, the two coefficient fields and the parameter δ.
#[derive(Debug, Clone)]
pub struct BellmanContext {
    pub pair: ConjugatePair,
    pub a: MatrixField,
    pub b: MatrixField,
    pub delta: f64,
    /// C_p(A, B) at p = M̃ + 1
    pub c_p: f64,
}

impl BellmanContext {
    /// δ and C_p are computed from the matrices.
    pub fn new(pair: ConjugatePair, a: MatrixField, b: MatrixField) -> Result<Self> {
        let delta = delta_param(&a, &b, &pair)?;
        let c_p = c_p_constant(&a, &b, pair.quantities.p)?;
        Ok(Self { pair, a, b, delta, c_p })
    }

    /// Context with A = B = I_d.
    pub fn identity(pair: ConjugatePair, d: usize) -> Result<Self> {
        Self::new(pair, MatrixField::identity(d), MatrixField::identity(d))
    }

    /// Same context with δ overridden.
    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }

    /// Same context with tabulated auxiliary integrals on `[lo, hi]`.
    pub fn with_tables(&self, lo: f64, hi: f64) -> Result<Self> {
        Ok(Self { pair: self.pair.with_tables(lo, hi)?, ..self.clone() })
    }

    pub fn classify(&self, u: Complex64, v: Complex64) -> RegionTag {
        let distance = self.pair.phi.d1(u.norm()) - v.norm();
        RegionTag {
            region: if distance >= 0.0 { Region::Lower } else { Region::Upper },
            distance,
        }
    }

    /// 𝔅(a, b) and its partial derivatives on the branch selected by (a, b).
    pub fn radial(&self, a: f64, b: f64) -> Result<(Region, RadialDerivs)> {
        let dl = self.delta;
        let (f0, f1, f2) = self.pair.phi.try_triple(a)?;
        let (g0, g1, g2) = self.pair.psi.try_triple(b)?;
        if b <= f1 {
            let i = self.pair.aux_i(a)?;
            let d = RadialDerivs {
                value: (1.0 + dl) * (f0 + g0) + dl * a * a * i,
                d1: (1.0 + 2.0 * dl) * f1 + 2.0 * dl * a * i,
                d2: (1.0 + dl) * g1,
                d11: (1.0 + 2.0 * dl) * f2 + 2.0 * dl * i + if a > 0.0 { 2.0 * dl * f1 / a } else { 0.0 },
                d12: 0.0,
                d22: (1.0 + dl) * g2,
            };
            Ok((Region::Lower, d))
        } else {
            let j = self.pair.aux_j(b)?;
            let d = RadialDerivs {
                value: f0 + g0 + dl * a * a * j,
                d1: f1 + 2.0 * dl * a * j,
                d2: g1 + dl * a * a / g1,
                d11: f2 + 2.0 * dl * j,
                d12: 2.0 * dl * a / g1,
                d22: g2 - dl * a * a * g2 / (g1 * g1),
            };
            Ok((Region::Upper, d))
        }
    }

    /// 𝔛(u, v)
    pub fn eval(&self, u: Complex64, v: Complex64) -> Result<f64> {
        Ok(self.radial(u.norm(), v.norm())?.1.value)
    }

    /// Value of the branch formula that is *not* selected at (a, b).
    pub fn other_branch(&self, a: f64, b: f64) -> Result<f64> {
        let dl = self.delta;
        let (f0, g0) = (self.pair.phi.try_eval(a)?, self.pair.psi.try_eval(b)?);
        if b <= self.pair.phi.try_d1(a)? {
            Ok(f0 + g0 + dl * a * a * self.pair.aux_j(b)?)
        } else {
            Ok((1.0 + dl) * (f0 + g0) + dl * a * a * self.pair.aux_i(a)?)
        }
    }

    /// (∂ū𝔛, ∂v̄𝔛); undefined on the coordinate planes.
    pub fn gradient(&self, u: Complex64, v: Complex64) -> Result<(Complex64, Complex64)> {
        if u == Complex64::new(0.0, 0.0) {
            return Err(Error::Pole("u"));
        }
        if v == Complex64::new(0.0, 0.0) {
            return Err(Error::Pole("v"));
        }
        self.gradient_extended(u, v)
    }

    /// Gradient with the continuous extension 0 on the coordinate planes.
    pub fn gradient_extended(&self, u: Complex64, v: Complex64) -> Result<(Complex64, Complex64)> {
        let (a, b) = (u.norm(), v.norm());
        let (_, d) = self.radial(a, b)?;
        let du = if a > 0.0 { u * (0.5 * d.d1 / a) } else { Complex64::new(0.0, 0.0) };
        let dv = if b > 0.0 { v * (0.5 * d.d2 / b) } else { Complex64::new(0.0, 0.0) };
        Ok((du, dv))
    }

    /// 2 max{1, M/m̃}(Φ(a) + Ψ(b)), the size bound.
    pub fn size_bound(&self, a: f64, b: f64) -> f64 {
        self.pair.quantities.size_factor() * (self.pair.phi.eval(a) + self.pair.psi.eval(b))
    }

    /// (1/10)(M̃(m̃−1)/(m̃(M̃−1)))^{1/2} / C_p, the convexity constant.
    pub fn convexity_constant(&self) -> f64 {
        self.pair.quantities.convexity_factor() / self.c_p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::FamilySpec;

    fn ctx(spec: FamilySpec) -> BellmanContext {
        BellmanContext::identity(ConjugatePair::from_spec(spec).unwrap(), 2).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn classification() {
        let x = ctx(FamilySpec::PowerLaw { p: 4.0 });
        assert_eq!(x.classify(c(1.0, 0.0), c(0.5, 0.0)).region, Region::Lower);
        assert_eq!(x.classify(c(1.0, 0.0), c(1.0, 0.0)).region, Region::Lower);
        assert_eq!(x.classify(c(1.0, 0.0), c(2.0, 0.0)).region, Region::Upper);
    }

    #[test]
    fn origin_and_phase_invariance() {
        let x = ctx(FamilySpec::ZygmundLog { r: 3.0 });
        assert_eq!(x.eval(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
        let (u, v) = (c(0.3, -1.2), c(2.0, 0.5));
        let rot = Complex64::from_polar(1.0, 0.7);
        let (e0, e1) = (x.eval(u, v).unwrap(), x.eval(u * rot, v).unwrap());
        assert!((e0 - e1).abs() < 1e-14 * e0);
    }

    #[test]
    fn power_law_specialization() {
        // δ/p + δ/(p−2) = 2δ/(p(2−q)) turns the lower branch into
        // (1+δ)|u|^p/p + ... ; compare both branches with the explicit formula
        let p: f64 = 4.0;
        let q = p / (p - 1.0);
        let x = ctx(FamilySpec::PowerLaw { p });
        let dl = x.delta;
        for (a, b) in [(0.7f64, 0.2f64), (1.5, 0.1), (0.2, 3.0), (2.0, 9.0)] {
            let expect = if b <= a.powf(p - 1.0) {
                (1.0 + dl) * (a.powf(p) / p + b.powf(q) / q) + dl * a.powf(p) / (p - 2.0)
            } else {
                a.powf(p) / p + b.powf(q) / q + dl * a * a * b.powf(2.0 - q) / (2.0 - q)
            };
            let got = x.eval(c(a, 0.0), c(0.0, b)).unwrap();
            assert!((got - expect).abs() < 1e-13 * expect);
        }
    }

    #[test]
    fn branches_meet_on_critical_curve() {
        for spec in [FamilySpec::ZygmundLog { r: 3.0 }, FamilySpec::DualPowerSum { q: 1.5, r: 1.8 }] {
            let x = ctx(spec);
            for a in [0.05, 0.8, 4.0, 30.0] {
                let b = x.pair.phi.d1(a);
                let lo = x.eval(c(a, 0.0), c(b, 0.0)).unwrap();
                let hi = x.other_branch(a, b).unwrap();
                assert!((lo - hi).abs() < 1e-9 * lo, "{spec} a={a}: {lo} vs {hi}");
            }
        }
    }

    #[test]
    fn gradient_poles() {
        let x = ctx(FamilySpec::PowerLaw { p: 4.0 });
        assert_eq!(x.gradient(c(0.0, 0.0), c(1.0, 0.0)), Err(Error::Pole("u")));
        assert_eq!(x.gradient(c(1.0, 0.0), c(0.0, 0.0)), Err(Error::Pole("v")));
        let (du, dv) = x.gradient_extended(c(0.0, 0.0), c(1.0, 1.0)).unwrap();
        assert_eq!(du, c(0.0, 0.0));
        assert!(dv.norm() > 0.0);
    }
}
