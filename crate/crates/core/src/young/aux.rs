//! The auxiliary integrals
//!
//! ```text
//! I(t) = ∫₀ᵗ Φ′(s)/s² ds,    J(t) = ∫₀ᵗ ds/Ψ′(s).
//! ```
//!
//! Power laws and power sums have closed antiderivatives (for J through the
//! substitution s = Φ′(σ)). Otherwise the integral is computed in the log
//! variable on `[x_lo, x]`, with the piece on `[0, x_lo]` replaced by the
//! midpoint of the a-priori sandwich; `x_lo` is pushed down until that
//! sandwich is negligible against the total.
//!
//! When one side is a numeric conjugate the integral is rewritten in the
//! variable of the closed-form side, so no root-finding happens inside the
//! quadrature.

use std::sync::Arc;

use super::{CharQuantities, Family, YoungFunction};
use crate::error::Result;
use crate::quad::{integrate, QuadOptions};

/// Head contributions below this fraction of the total are accepted.
const HEAD_FRACTION: f64 = 1e-17;

#[derive(Debug, Clone)]
pub struct AuxIntegrals {
    phi: YoungFunction,
    psi: YoungFunction,
    /// I(t)·t/Φ′(t) ∈ [1/(M̃−1), 1/(m̃−1)]
    i_bounds: (f64, f64),
    /// J(t)·Ψ′(t)/t ∈ [M̃/(M̃−1), m̃/(m̃−1)]
    j_bounds: (f64, f64),
    tables: Option<Arc<(AuxTable, AuxTable)>>,
}

/// Value of `∫_{x_lo}^{x} g` in the log variable plus a sandwich head.
fn log_integral<G, H>(g: G, x: f64, head: H) -> Result<f64>
where
    G: Fn(f64) -> f64,
    H: Fn(f64) -> (f64, f64),
{
    let scale = head(x).0;
    let mut x_lo = x;
    loop {
        x_lo *= 1e-3;
        if x_lo < 1e-290 || head(x_lo).1 < HEAD_FRACTION * scale {
            break;
        }
    }
    let (h_lo, h_hi) = head(x_lo);
    let body = integrate(
        |y: f64| {
            let s = y.exp();
            g(s) * s
        },
        x_lo.ln(),
        x.ln(),
        QuadOptions::default(),
    )?;
    Ok(0.5 * (h_lo + h_hi) + body.value)
}

impl AuxIntegrals {
    pub fn new(phi: &YoungFunction, psi: &YoungFunction, q: &CharQuantities) -> Self {
        let (mt, bmt) = (q.m_tilde, q.big_m_tilde);
        Self {
            phi: phi.clone(),
            psi: psi.clone(),
            i_bounds: (1.0 / (bmt - 1.0), 1.0 / (mt - 1.0)),
            j_bounds: (bmt / (bmt - 1.0), mt / (mt - 1.0)),
            tables: None,
        }
    }

    /// A-priori bracket for I(t).
    pub fn i_sandwich(&self, t: f64) -> (f64, f64) {
        let base = self.phi.d1(t) / t;
        (self.i_bounds.0 * base, self.i_bounds.1 * base)
    }

    /// A-priori bracket for J(t).
    pub fn j_sandwich(&self, t: f64) -> (f64, f64) {
        let base = t / self.psi.d1(t);
        (self.j_bounds.0 * base, self.j_bounds.1 * base)
    }

    pub fn i(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if let Some(v) = self.tables.as_ref().and_then(|tb| tb.0.eval(t)) {
            return Ok(v);
        }
        self.i_direct(t)
    }

    pub fn j(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if let Some(v) = self.tables.as_ref().and_then(|tb| tb.1.eval(t)) {
            return Ok(v);
        }
        self.j_direct(t)
    }

    /// I(t) without table lookup.
    pub fn i_direct(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let (lo_c, hi_c) = self.i_bounds;
        match *self.phi.family() {
            Family::PowerLaw { p } => Ok(t.powf(p - 2.0) / (p - 2.0)),
            Family::PowerSum { p, r, eps } => {
                Ok(p * t.powf(p - 2.0) / (p - 2.0) + eps * r * t.powf(r - 2.0) / (r - 2.0))
            }
            Family::NumericConjugate(ref psi) => {
                // s = Ψ′(σ): I(t) = ∫₀^{Φ′(t)} σΨ″(σ)/Ψ′(σ)² dσ
                let top = self.phi.try_d1(t)?;
                log_integral(
                    |s| {
                        let d = psi.d1(s);
                        s * psi.d2(s) / (d * d)
                    },
                    top,
                    |s| {
                        let base = s / psi.d1(s);
                        (lo_c * base, hi_c * base)
                    },
                )
            }
            _ => {
                let phi = &self.phi;
                log_integral(
                    |s| phi.d1(s) / (s * s),
                    t,
                    |s| {
                        let base = phi.d1(s) / s;
                        (lo_c * base, hi_c * base)
                    },
                )
            }
        }
    }

    /// J(t) without table lookup.
    pub fn j_direct(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let (lo_c, hi_c) = self.j_bounds;
        match *self.psi.family() {
            Family::PowerLaw { p: q } => Ok(t.powf(2.0 - q) / (2.0 - q)),
            Family::NumericConjugate(ref phi) => {
                // s = Φ′(σ): J(t) = ∫₀^{Ψ′(t)} Φ″(σ)/σ dσ
                let top = self.psi.try_d1(t)?;
                match *phi.family() {
                    Family::PowerSum { p, r, eps } => Ok(p * (p - 1.0) * top.powf(p - 2.0)
                        / (p - 2.0)
                        + eps * r * (r - 1.0) * top.powf(r - 2.0) / (r - 2.0)),
                    _ => log_integral(
                        |s| phi.d2(s) / s,
                        top,
                        |s| {
                            let base = phi.d1(s) / s;
                            (lo_c * base, hi_c * base)
                        },
                    ),
                }
            }
            _ => {
                let psi = &self.psi;
                log_integral(
                    |s| 1.0 / psi.d1(s),
                    t,
                    |s| {
                        let base = s / psi.d1(s);
                        (lo_c * base, hi_c * base)
                    },
                )
            }
        }
    }

    /// Copy that answers from quintic Hermite tables on `[lo, hi]` and falls
    /// back to direct evaluation outside.
    pub fn tabulated(&self, lo: f64, hi: f64) -> Result<Self> {
        let phi = self.phi.clone();
        let psi = self.psi.clone();
        let ti = AuxTable::build(lo, hi, |t| {
            let v = self.i_direct(t)?;
            let d1 = phi.d1(t);
            // t I′ and t² I″
            Ok((v, d1 / t, phi.d2(t) - 2.0 * d1 / t))
        })?;
        let tj = AuxTable::build(lo, hi, |t| {
            let v = self.j_direct(t)?;
            let d1 = psi.d1(t);
            Ok((v, t / d1, -t * t * psi.d2(t) / (d1 * d1)))
        })?;
        let mut out = self.clone();
        out.tables = Some(Arc::new((ti, tj)));
        Ok(out)
    }

    pub fn is_tabulated(&self) -> bool {
        self.tables.is_some()
    }
}

/// Quintic Hermite interpolant of `ln F` in `y = ln t` on a uniform grid.
///
/// The auxiliary integrals behave like powers, so `ln F` is close to affine
/// in `y` and the interpolant is accurate to roughly 1e-12 relative.
#[derive(Debug, Clone)]
pub struct AuxTable {
    y0: f64,
    dy: f64,
    g: Vec<f64>,
    gy: Vec<f64>,
    gyy: Vec<f64>,
}

impl AuxTable {
    pub const NODES_PER_DECADE: usize = 128;

    /// `sample(t)` returns `(F, tF′, t²F″)`.
    pub fn build<S>(lo: f64, hi: f64, sample: S) -> Result<Self>
    where
        S: Fn(f64) -> Result<(f64, f64, f64)> + Sync,
    {
        let decades = (hi / lo).log10();
        let n = ((decades * Self::NODES_PER_DECADE as f64).ceil() as usize).max(2) + 1;
        let y0 = lo.ln();
        let dy = (hi.ln() - y0) / (n - 1) as f64;
        use rayon::prelude::*;
        let rows: Vec<(f64, f64, f64)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let t = (y0 + k as f64 * dy).exp();
                let (f, tf1, t2f2) = sample(t)?;
                let gy = tf1 / f;
                let gyy = (tf1 + t2f2) / f - gy * gy;
                Ok((f.ln(), gy, gyy))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            y0,
            dy,
            g: rows.iter().map(|r| r.0).collect(),
            gy: rows.iter().map(|r| r.1).collect(),
            gyy: rows.iter().map(|r| r.2).collect(),
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (
            self.y0.exp(),
            (self.y0 + self.dy * (self.g.len() - 1) as f64).exp(),
        )
    }

    /// Interpolated value, or `None` outside the table.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let x = (t.ln() - self.y0) / self.dy;
        let last = self.g.len() - 1;
        if !(x >= 0.0 && x <= last as f64) {
            return None;
        }
        let k = (x.floor() as usize).min(last - 1);
        let s = x - k as f64;
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);
        let h = self.dy;
        let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
        let h3 = 0.5 * s3 - s4 + 0.5 * s5;
        let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let g = self.g[k] * h0
            + h * self.gy[k] * h1
            + h * h * self.gyy[k] * h2
            + h * h * self.gyy[k + 1] * h3
            + h * self.gy[k + 1] * h4
            + self.g[k + 1] * h5;
        Some(g.exp())
    }
}

#[cfg(test)]
mod tests {
    use crate::quad::gk15;
    use crate::young::{ConjugatePair, FamilySpec};

    fn kronrod(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        gk15(&f, a, b).0
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn power_law_closed_forms() {
        let pair = ConjugatePair::from_spec(FamilySpec::PowerLaw { p: 4.0 }).unwrap();
        for t in [1e-3, 0.5, 2.0, 1e3] {
            assert!(rel(pair.aux_i(t).unwrap(), t * t / 2.0) < 1e-14);
            assert!(rel(pair.aux_j(t).unwrap(), 1.5 * t.powf(2.0 / 3.0)) < 1e-14);
        }
        assert_eq!(pair.aux_integrals(0.0).unwrap(), (0.0, 0.0));
    }

    /// Plain quadrature of the defining integrals on a log grid, used as an
    /// oracle for every evaluation path.
    fn brute(g: impl Fn(f64) -> f64, t: f64) -> f64 {
        let lo = t * 1e-40;
        let n = 4000;
        let (a, b) = (lo.ln(), t.ln());
        let h = (b - a) / n as f64;
        (0..n)
            .map(|k| kronrod(|y| g(y.exp()) * y.exp(), a + k as f64 * h, a + (k + 1) as f64 * h))
            .sum()
    }

    #[test]
    fn every_path_matches_brute_force() {
        for spec in [
            FamilySpec::ZygmundLog { r: 3.0 },
            FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 0.3 },
            FamilySpec::DualPowerSum { q: 1.5, r: 1.8 },
        ] {
            let pair = ConjugatePair::from_spec(spec).unwrap();
            for t in [1e-2, 0.7, 5.0, 300.0] {
                let bi = brute(|s| pair.phi.d1(s) / (s * s), t);
                let bj = brute(|s| 1.0 / pair.psi.d1(s), t);
                assert!(rel(pair.aux_i(t).unwrap(), bi) < 1e-9, "{spec} I({t})");
                assert!(rel(pair.aux_j(t).unwrap(), bj) < 1e-9, "{spec} J({t})");
            }
        }
    }

    #[test]
    fn sandwich_holds() {
        for spec in [
            FamilySpec::ZygmundLog { r: 3.0 },
            FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 1.0 },
            FamilySpec::DualPowerSum { q: 1.5, r: 1.8 },
        ] {
            let pair = ConjugatePair::from_spec(spec).unwrap();
            for t in crate::sampling::log_grid(1e-4, 1e4, 33) {
                let (lo, hi) = pair.aux.i_sandwich(t);
                let i = pair.aux_i(t).unwrap();
                assert!(i >= lo * (1.0 - 1e-9) && i <= hi * (1.0 + 1e-9), "{spec} I({t})");
                let (lo, hi) = pair.aux.j_sandwich(t);
                let j = pair.aux_j(t).unwrap();
                assert!(j >= lo * (1.0 - 1e-9) && j <= hi * (1.0 + 1e-9), "{spec} J({t})");
            }
        }
    }

    #[test]
    fn tables_agree_with_direct() {
        let pair = ConjugatePair::from_spec(FamilySpec::ZygmundLog { r: 3.0 }).unwrap();
        let tab = pair.with_tables(1e-3, 1e3).unwrap();
        for t in crate::sampling::log_grid(1.3e-3, 0.9e3, 57) {
            assert!(rel(tab.aux_i(t).unwrap(), pair.aux_i(t).unwrap()) < 1e-10);
            assert!(rel(tab.aux_j(t).unwrap(), pair.aux_j(t).unwrap()) < 1e-10);
        }
        // outside the table range the direct path answers
        assert_eq!(tab.aux_i(5e3).unwrap(), pair.aux_i(5e3).unwrap());
    }
}
