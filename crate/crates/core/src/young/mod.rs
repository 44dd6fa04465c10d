//! Young functions, their numerical conjugates, characteristic quantities,
//! Luxemburg norms and the auxiliary integrals that enter the Bellman
//! function.
//!
//! A [`YoungFunction`] carries evaluators for Φ, Φ′ and Φ″. Closed-form
//! families cover power laws, `s^r log(s+e)`, and superpositions of powers;
//! any of them can be conjugated numerically, with Ψ′ = (Φ′)⁻¹ obtained by a
//! bracketed safeguarded Newton iteration in log-coordinates.

mod aux;
mod cianchi;
mod norm;
mod pair;
mod scan;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aux::{AuxIntegrals, AuxTable};
pub use cianchi::{cianchi_probe, CianchiVerdict};
pub use norm::luxemburg_norm;
pub use pair::{
    char_quantities, doubling_constants, verify_dual_quantities, CharQuantities, ConjugatePair,
    DoublingReport, DualQuantityRow,
};
pub use scan::{scan_extrema, Extrema, ScanWindow};

/// Serialized family description, e.g. `{"family": "power_sum", "p": 4, "r": 3, "eps": 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    PowerLaw { p: f64 },
    ZygmundLog { r: f64 },
    PowerSum { p: f64, r: f64, eps: f64 },
    DualPowerSum { q: f64, r: f64 },
}

impl FamilySpec {
    /// Parses the compact CLI form: `power:4`, `zygmund:3`,
    /// `power-sum:4,3,1`, `dual-power-sum:1.5,1.8`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, args) = text
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("family '{text}' lacks ':<params>'")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number '{a}' in family '{text}'")))
            })
            .collect::<Result<_>>()?;
        let want = |n: usize| -> Result<()> {
            if nums.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!("family '{name}' takes {n} parameter(s)")))
            }
        };
        match name {
            "power" | "power_law" | "power-law" => {
                want(1)?;
                Ok(FamilySpec::PowerLaw { p: nums[0] })
            }
            "zygmund" | "zygmund_log" | "zygmund-log" => {
                want(1)?;
                Ok(FamilySpec::ZygmundLog { r: nums[0] })
            }
            "power-sum" | "power_sum" => {
                want(3)?;
                Ok(FamilySpec::PowerSum { p: nums[0], r: nums[1], eps: nums[2] })
            }
            "dual-power-sum" | "dual_power_sum" => {
                want(2)?;
                Ok(FamilySpec::DualPowerSum { q: nums[0], r: nums[1] })
            }
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FamilySpec::PowerLaw { p } => write!(f, "power:{p}"),
            FamilySpec::ZygmundLog { r } => write!(f, "zygmund:{r}"),
            FamilySpec::PowerSum { p, r, eps } => write!(f, "power-sum:{p},{r},{eps}"),
            FamilySpec::DualPowerSum { q, r } => write!(f, "dual-power-sum:{q},{r}"),
        }
    }
}

/// Which side of a complementary pair a function naturally lives on.
///
/// Φ-side functions have Φ′(s)/s → 0 at the origin, Ψ-side functions have
/// Ψ′(s)/s → ∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Phi,
    Psi,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Phi => Side::Psi,
            Side::Psi => Side::Phi,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    /// s^p / p. Exponents below 2 only arise as conjugates.
    PowerLaw { p: f64 },
    /// s^r log(s + e)
    ZygmundLog { r: f64 },
    /// s^p + ε s^r
    PowerSum { p: f64, r: f64, eps: f64 },
    /// s^q + s^r, a Ψ-side function
    DualPowerSum { q: f64, r: f64 },
    /// Legendre conjugate of another Young function
    NumericConjugate(YoungFunction),
}

#[derive(Debug, Clone)]
pub struct YoungFunction {
    family: Arc<Family>,
}

fn check(ok: bool, family: &'static str, constraint: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            family,
            constraint: constraint.to_string(),
        })
    }
}

/// Builds the closed-form evaluators for a family, validating parameters.
pub fn make_family(spec: FamilySpec) -> Result<YoungFunction> {
    let family = match spec {
        FamilySpec::PowerLaw { p } => {
            check(p.is_finite() && p > 2.0, "PowerLaw", "p in (2, inf)")?;
            Family::PowerLaw { p }
        }
        FamilySpec::ZygmundLog { r } => {
            check(r.is_finite() && r > 2.0, "ZygmundLog", "r in (2, inf)")?;
            Family::ZygmundLog { r }
        }
        FamilySpec::PowerSum { p, r, eps } => {
            check(r > 2.0 && r < p && p.is_finite(), "PowerSum", "2 < r < p < inf")?;
            check(eps > 0.0 && eps <= 1.0, "PowerSum", "eps in (0, 1]")?;
            Family::PowerSum { p, r, eps }
        }
        FamilySpec::DualPowerSum { q, r } => {
            check(q > 1.0 && q < r && r < 2.0, "DualPowerSum", "1 < q < r < 2")?;
            Family::DualPowerSum { q, r }
        }
    };
    Ok(YoungFunction::from_family(family))
}

/// Complementary Young function. Power laws conjugate in closed form;
/// everything else gets numeric evaluators.
pub fn conjugate(phi: &YoungFunction) -> YoungFunction {
    match *phi.family {
        Family::PowerLaw { p } => YoungFunction::from_family(Family::PowerLaw { p: p / (p - 1.0) }),
        _ => YoungFunction::from_family(Family::NumericConjugate(phi.clone())),
    }
}

impl YoungFunction {
    fn from_family(family: Family) -> Self {
        Self {
            family: Arc::new(family),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn side(&self) -> Side {
        match *self.family {
            Family::PowerLaw { p } if p < 2.0 => Side::Psi,
            Family::PowerLaw { .. } | Family::ZygmundLog { .. } | Family::PowerSum { .. } => Side::Phi,
            Family::DualPowerSum { .. } => Side::Psi,
            Family::NumericConjugate(ref of) => of.side().flip(),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(*self.family, Family::NumericConjugate(_))
    }

    /// True when I or J built on this function has a closed antiderivative.
    pub fn supports_closed_integrals(&self) -> bool {
        matches!(*self.family, Family::PowerLaw { .. } | Family::PowerSum { .. })
    }

    pub fn try_eval(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        Ok(match *self.family {
            Family::PowerLaw { p } => s.powf(p) / p,
            Family::ZygmundLog { r } => s.powf(r) * (s + std::f64::consts::E).ln(),
            Family::PowerSum { p, r, eps } => s.powf(p) + eps * s.powf(r),
            Family::DualPowerSum { q, r } => s.powf(q) + s.powf(r),
            Family::NumericConjugate(ref of) => {
                // Young's equality on the curve t = of'(σ)
                let sigma = of.inverse_d1(s)?;
                s * sigma - of.try_eval(sigma)?
            }
        })
    }

    pub fn try_d1(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        Ok(match *self.family {
            Family::PowerLaw { p } => s.powf(p - 1.0),
            Family::ZygmundLog { r } => {
                let a = s + std::f64::consts::E;
                r * s.powf(r - 1.0) * a.ln() + s.powf(r) / a
            }
            Family::PowerSum { p, r, eps } => p * s.powf(p - 1.0) + eps * r * s.powf(r - 1.0),
            Family::DualPowerSum { q, r } => q * s.powf(q - 1.0) + r * s.powf(r - 1.0),
            Family::NumericConjugate(ref of) => of.inverse_d1(s)?,
        })
    }

    pub fn try_d2(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(match self.side() {
                Side::Phi => 0.0,
                Side::Psi => f64::INFINITY,
            });
        }
        Ok(match *self.family {
            Family::PowerLaw { p } => (p - 1.0) * s.powf(p - 2.0),
            Family::ZygmundLog { r } => {
                let a = s + std::f64::consts::E;
                r * (r - 1.0) * s.powf(r - 2.0) * a.ln() + 2.0 * r * s.powf(r - 1.0) / a
                    - s.powf(r) / (a * a)
            }
            Family::PowerSum { p, r, eps } => {
                p * (p - 1.0) * s.powf(p - 2.0) + eps * r * (r - 1.0) * s.powf(r - 2.0)
            }
            Family::DualPowerSum { q, r } => {
                q * (q - 1.0) * s.powf(q - 2.0) + r * (r - 1.0) * s.powf(r - 2.0)
            }
            Family::NumericConjugate(ref of) => 1.0 / of.try_d2(of.inverse_d1(s)?)?,
        })
    }

    /// (Φ(s), Φ′(s), Φ″(s)) with a single root solve for numeric conjugates.
    pub fn try_triple(&self, s: f64) -> Result<(f64, f64, f64)> {
        if s <= 0.0 {
            return Ok((0.0, 0.0, self.try_d2(0.0)?));
        }
        match *self.family {
            Family::NumericConjugate(ref of) => {
                let sigma = of.inverse_d1(s)?;
                Ok((s * sigma - of.try_eval(sigma)?, sigma, 1.0 / of.try_d2(sigma)?))
            }
            _ => Ok((self.try_eval(s)?, self.try_d1(s)?, self.try_d2(s)?)),
        }
    }

    /// Φ(s); NaN if a numeric conjugate cannot bracket its root.
    pub fn eval(&self, s: f64) -> f64 {
        self.try_eval(s).unwrap_or(f64::NAN)
    }

    pub fn d1(&self, s: f64) -> f64 {
        self.try_d1(s).unwrap_or(f64::NAN)
    }

    pub fn d2(&self, s: f64) -> f64 {
        self.try_d2(s).unwrap_or(f64::NAN)
    }

    /// Solves Φ′(s) = t for s ≥ 0.
    pub fn inverse_d1(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        match *self.family {
            Family::PowerLaw { p } => Ok(t.powf(1.0 / (p - 1.0))),
            // the conjugate's derivative is the inverse of ours
            Family::NumericConjugate(ref of) => of.try_d1(t),
            _ => invert_increasing(|s| self.try_d1(s), |s| self.try_d2(s), t),
        }
    }

    /// Closed forms are scanned on [`ScanWindow::CLOSED`]. A numeric
    /// conjugate is scanned on the hull of that window and its image under
    /// the derivative of the function it conjugates, so it sees at least the
    /// range seen from the closed side.
    pub fn scan_window(&self) -> ScanWindow {
        let w = ScanWindow::CLOSED;
        match *self.family {
            Family::NumericConjugate(ref of) => ScanWindow {
                lo: w.lo.min(of.d1(w.lo)),
                hi: w.hi.max(of.d1(w.hi)),
                ..w
            },
            _ => ScanWindow::CLOSED,
        }
    }

    pub fn describe(&self) -> String {
        match *self.family {
            Family::PowerLaw { p } => format!("PowerLaw({p})"),
            Family::ZygmundLog { r } => format!("ZygmundLog({r})"),
            Family::PowerSum { p, r, eps } => format!("PowerSum({p},{r},{eps})"),
            Family::DualPowerSum { q, r } => format!("DualPowerSum({q},{r})"),
            Family::NumericConjugate(ref of) => format!("Conjugate[{}]", of.describe()),
        }
    }
}

/// Inverts an increasing bijection `f` of (0, ∞) with derivative `df`.
///
/// Works in x = ln s where ln f(e^x) has slope s f′/f, bounded away from 0
/// and ∞ for every family here, so Newton converges in a handful of steps.
/// The bracket starts at [1e-12, 1] and grows geometrically in the exponent.
fn invert_increasing<F, D>(f: F, df: D, target: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> Result<f64>,
{
    let ln_t = target.ln();
    let g = |x: f64| -> Result<f64> { Ok(f(x.exp())?.ln() - ln_t) };
    let mut lo = 1e-12f64.ln();
    let mut hi = 0.0f64;
    let mut step = 1.0f64.max(hi - lo);
    // grow the upper end until f(hi) >= target
    loop {
        let v = g(hi)?;
        let overflow = v.is_nan() || v == f64::INFINITY;
        if (overflow && hi - lo < 1e-9) || hi > 710.0 {
            return Err(Error::DomainLimit {
                target,
                reachable_lo: f(1e-12).unwrap_or(0.0),
                reachable_hi: f(lo.exp()).unwrap_or(f64::MAX),
            });
        }
        if overflow {
            // back off towards the last finite point
            hi = 0.5 * (lo + hi);
            step = hi - lo;
            continue;
        }
        if v >= 0.0 {
            break;
        }
        lo = lo.max(hi);
        hi += step;
        step *= 2.0;
    }
    // shrink the lower end until f(lo) <= target
    step = 1.0f64.max(hi - lo);
    loop {
        let v = g(lo)?;
        if v <= 0.0 || v.is_nan() {
            break;
        }
        if lo < -740.0 {
            return Err(Error::DomainLimit {
                target,
                reachable_lo: f(lo.exp()).unwrap_or(0.0),
                reachable_hi: f(hi.exp()).unwrap_or(f64::MAX),
            });
        }
        hi = hi.min(lo);
        lo -= step;
        step *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let s = x.exp();
        let fs = f(s)?;
        let gx = fs.ln() - ln_t;
        if gx == 0.0 {
            return Ok(s);
        }
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = s * df(s)? / fs;
        let mut next = x - gx / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * x.abs().max(1.0) {
            return Ok(next.exp());
        }
        x = next;
    }
    Ok(x.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn direct_evaluations() {
        let pl = make_family(FamilySpec::PowerLaw { p: 4.0 }).unwrap();
        assert_eq!(pl.eval(2.0), 4.0);
        let ps = make_family(FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 1.0 }).unwrap();
        assert_eq!(ps.eval(1.0), 2.0);
        let z = make_family(FamilySpec::ZygmundLog { r: 3.0 }).unwrap();
        assert_eq!(z.eval(0.0), 0.0);
        assert!(z.d1(1e-8) / 1e-8 < 1e-6);
    }

    #[test]
    fn rejects_out_of_range() {
        let e = make_family(FamilySpec::PowerLaw { p: 1.5 }).unwrap_err();
        assert!(matches!(e, Error::InvalidParameter { family: "PowerLaw", .. }));
        assert!(make_family(FamilySpec::PowerSum { p: 3.0, r: 3.5, eps: 1.0 }).is_err());
        assert!(make_family(FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 0.0 }).is_err());
        assert!(make_family(FamilySpec::ZygmundLog { r: 2.0 }).is_err());
        assert!(make_family(FamilySpec::DualPowerSum { q: 1.8, r: 1.5 }).is_err());
    }

    #[test]
    fn power_law_conjugates_in_closed_form() {
        let psi = conjugate(&make_family(FamilySpec::PowerLaw { p: 4.0 }).unwrap());
        match psi.family() {
            Family::PowerLaw { p } => assert!((p - 4.0 / 3.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(rel(psi.eval(2.0), 2f64.powf(4.0 / 3.0) * 0.75) < 1e-15);
        assert_eq!(psi.side(), Side::Psi);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let specs = [
            FamilySpec::PowerLaw { p: 3.0 },
            FamilySpec::ZygmundLog { r: 3.0 },
            FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 0.5 },
            FamilySpec::DualPowerSum { q: 1.5, r: 1.8 },
        ];
        for spec in specs {
            let f = make_family(spec).unwrap();
            for g in [f.clone(), conjugate(&f)] {
                for s in crate::sampling::log_grid(1e-3, 1e3, 25) {
                    let h = 1e-5 * s;
                    let fd1 = (g.eval(s + h) - g.eval(s - h)) / (2.0 * h);
                    let fd2 = (g.d1(s + h) - g.d1(s - h)) / (2.0 * h);
                    assert!(rel(fd1, g.d1(s)) < 1e-6, "{} d1 at {s}", g.describe());
                    assert!(rel(fd2, g.d2(s)) < 1e-6, "{} d2 at {s}", g.describe());
                }
            }
        }
    }

    #[test]
    fn inverse_derivative_round_trip() {
        let f = make_family(FamilySpec::ZygmundLog { r: 3.0 }).unwrap();
        for t in crate::sampling::log_grid(1e-30, 1e40, 71) {
            let s = f.inverse_d1(t).unwrap();
            assert!(rel(f.d1(s), t) < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn domain_limit_reports_range() {
        let f = make_family(FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 1.0 }).unwrap();
        match f.inverse_d1(f64::MAX).unwrap_err() {
            Error::DomainLimit { reachable_hi, .. } => assert!(reachable_hi > 1e250 && reachable_hi.is_finite()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_compact_specs() {
        assert_eq!(FamilySpec::parse("power:4").unwrap(), FamilySpec::PowerLaw { p: 4.0 });
        assert_eq!(
            FamilySpec::parse("power-sum:4,3,0.01").unwrap(),
            FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 0.01 }
        );
        assert!(FamilySpec::parse("power").is_err());
        assert!(FamilySpec::parse("cosh:1").is_err());
        let json = serde_json::to_string(&FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 1.0 }).unwrap();
        assert_eq!(json, r#"{"family":"power_sum","p":4.0,"r":3.0,"eps":1.0}"#);
    }
}
