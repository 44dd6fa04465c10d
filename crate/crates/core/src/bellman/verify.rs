//! Sampled checks of the size, gradient and convexity bounds of 𝔛 and 𝔛_ν.
//!
//! Margins are relative: each is divided by a scale that bounds both sides
//! of its inequality, so tolerances are dimensionless.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BellmanContext, Mollifier};
use crate::ellipticity::lambda_max_norm;
use crate::report::{sweep, MarginReport, Sample};
use crate::sampling::{log_uniform, random_phase, sample_rng, unit_complex_vector};

#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    pub samples: usize,
    pub seed: u64,
    /// |u| and |v| are log-uniform on [lo, hi]
    pub lo: f64,
    pub hi: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0, lo: 1e-3, hi: 1e3 }
    }
}

/// Relative distance |v|/Φ′(|u|) − 1 below which a sample counts as near 𝒴.
pub const NEAR_CRITICAL: f64 = 1e-3;

fn at(u: Complex64, v: Complex64) -> [f64; 4] {
    [u.re, u.im, v.re, v.im]
}

fn draw_point(rng: &mut ChaCha8Rng, o: &SampleOptions) -> (Complex64, Complex64) {
    let a = log_uniform(rng, o.lo, o.hi);
    let b = log_uniform(rng, o.lo, o.hi);
    (random_phase(rng) * a, random_phase(rng) * b)
}

/// 2 max{1, M/m̃}(Φ(|u|) + Ψ(|v|)) − 𝔛(u, v) ≥ 0, relative to the bound.
/// Sample 0 is the origin.
pub fn verify_upper_bound(ctx: &BellmanContext, o: &SampleOptions) -> MarginReport {
    let s = sweep(o.samples, o.seed, |i, rng| {
        let (u, v) = if i == 0 { (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)) } else { draw_point(rng, o) };
        let bound = ctx.size_bound(u.norm(), v.norm());
        let margin = match ctx.eval(u, v) {
            Ok(x) if bound > 0.0 => (bound - x) / bound,
            Ok(x) => bound - x,
            Err(_) => f64::NAN,
        };
        Sample::Regular { margin, at: at(u, v) }
    });
    s.report("bellman.size_bound", 1e-9)
}

/// |∂ū𝔛| ≤ max{Φ′(|u|), |v|} and |∂v̄𝔛| ≤ Ψ′(|v|), relative to the bounds.
pub fn verify_gradient_bounds(ctx: &BellmanContext, o: &SampleOptions) -> [MarginReport; 2] {
    let per_slot = |slot: usize| {
        sweep(o.samples, o.seed, |_, rng| {
            let (u, v) = draw_point(rng, o);
            let margin = match ctx.gradient(u, v) {
                Ok((du, dv)) => {
                    if slot == 0 {
                        let bound = ctx.pair.phi.d1(u.norm()).max(v.norm());
                        (bound - du.norm()) / bound
                    } else {
                        let bound = ctx.pair.psi.d1(v.norm());
                        (bound - dv.norm()) / bound
                    }
                }
                Err(_) => f64::NAN,
            };
            Sample::Regular { margin, at: at(u, v) }
        })
    };
    [
        per_slot(0).report("bellman.gradient_u", 1e-9),
        per_slot(1).report("bellman.gradient_v", 1e-9),
    ]
}

/// H^{A,B}_𝔛 ≥ κ C_p⁻¹ |ζ||η| off 𝒴 and the coordinate planes. One sample in
/// ten is placed within 10⁻² to 10⁻¹⁰ (relative) of 𝒴; samples within
/// [`NEAR_CRITICAL`] of 𝒴 go to the second report.
pub fn verify_hessian_lower(ctx: &BellmanContext, o: &SampleOptions) -> [MarginReport; 2] {
    let kappa = ctx.convexity_constant();
    let big = lambda_max_norm(&ctx.a).max(lambda_max_norm(&ctx.b));
    let d = ctx.a.dim();
    let points = ctx.a.len().max(ctx.b.len());
    let s = sweep(o.samples, o.seed, |i, rng| {
        let (u, mut v) = draw_point(rng, o);
        if i % 10 == 9 {
            let offset = 10f64.powf(-rng.random_range(2.0..10.0));
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            v *= ctx.pair.phi.d1(u.norm()) * (1.0 + sign * offset) / v.norm();
        }
        if u.norm() == 0.0 || v.norm() == 0.0 {
            return Sample::Skip;
        }
        let zeta: Vec<Complex64> = unit_complex_vector(rng, d).into_iter().map(|z| z * log_uniform(rng, 0.1, 10.0)).collect();
        let eta: Vec<Complex64> = unit_complex_vector(rng, d).into_iter().map(|z| z * log_uniform(rng, 0.1, 10.0)).collect();
        let k = rng.random_range(0..points);
        let (am, bm) = (ctx.a.at(k % ctx.a.len()), ctx.b.at(k % ctx.b.len()));
        let margin = match ctx.hessian_unchecked(u, v) {
            Ok(h) => {
                let value = super::hessian::hessian_pairing(&h.matrix, am, bm, &zeta, &eta);
                let nz = zeta.iter().map(|z| z.norm_sqr()).sum::<f64>();
                let ne = eta.iter().map(|z| z.norm_sqr()).sum::<f64>();
                let bound = kappa * nz.sqrt() * ne.sqrt();
                let scale = h.matrix.norm() * big * (nz + ne);
                (value - bound) / scale
            }
            Err(_) => f64::NAN,
        };
        let gap = (v.norm() / ctx.pair.phi.d1(u.norm()) - 1.0).abs();
        if gap < NEAR_CRITICAL {
            Sample::Near { margin, at: at(u, v) }
        } else {
            Sample::Regular { margin, at: at(u, v) }
        }
    });
    [
        s.report("bellman.convexity", 1e-6),
        s.near_report("bellman.convexity_near_critical", 1e-6),
    ]
}

/// The three mollified bounds with ν-shifted arguments: size, the two
/// gradient bounds, and the convexity bound. Tolerances are the largest
/// relative fine-versus-coarse quadrature difference over the samples.
/// Sample 0 sits on the plane u = 0.
pub fn verify_mollified(ctx: &BellmanContext, nu: f64, samples: usize, seed: u64) -> Vec<MarginReport> {
    const NAMES: [&str; 4] = [
        "mollified.size_bound",
        "mollified.gradient_u",
        "mollified.gradient_v",
        "mollified.convexity",
    ];
    let prepared = Mollifier::new(nu).and_then(|m| Ok((m, ctx.with_tables(1e-6, 1e4)?)));
    let (moll, tctx) = match prepared {
        Ok(x) => x,
        Err(e) => return NAMES.iter().map(|n| MarginReport::failed(*n, e.to_string())).collect(),
    };
    let kappa = ctx.convexity_constant();
    let big = lambda_max_norm(&ctx.a).max(lambda_max_norm(&ctx.b));
    let d = ctx.a.dim();
    let points = ctx.a.len().max(ctx.b.len());
    type Row = ([f64; 4], [f64; 4], [f64; 4]);
    let rows: Vec<Option<Row>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let o = SampleOptions { samples, seed, lo: 1e-2, hi: 10.0 };
            let (mut u, v) = draw_point(&mut rng, &o);
            if i == 0 {
                u = Complex64::new(0.0, 0.0);
            }
            let zeta = unit_complex_vector(&mut rng, d);
            let eta = unit_complex_vector(&mut rng, d);
            let k = rng.random_range(0..points);
            let (am, bm) = (ctx.a.at(k % ctx.a.len()), ctx.b.at(k % ctx.b.len()));
            let s = moll.sample(&tctx, u, v, am, bm, &zeta, &eta).ok()?;
            let (a, b) = (u.norm(), v.norm());
            let size = ctx.size_bound(a + nu, b + nu);
            let gu = ctx.pair.phi.d1(a + nu).max(b + nu);
            let gv = ctx.pair.psi.d1(b + nu);
            let hscale = s.hessian_scale * big * 2.0;
            let margins = [
                (size - s.value.value) / size,
                (gu - s.du.norm()) / gu,
                (gv - s.dv.norm()) / gv,
                (s.hessian - kappa) / hscale,
            ];
            let tols = [
                s.value.tolerance / size,
                s.du_tolerance / gu,
                s.dv_tolerance / gv,
                s.hessian_tolerance / hscale,
            ];
            Some((margins, tols, at(u, v)))
        })
        .collect();
    (0..4)
        .map(|c| {
            let mut worst = f64::INFINITY;
            let mut arg = vec![];
            let mut tol: f64 = 0.0;
            let mut count = 0;
            for r in &rows {
                match r {
                    Some((m, t, p)) => {
                        count += 1;
                        tol = tol.max(t[c]);
                        if m[c] < worst || m[c].is_nan() {
                            worst = m[c];
                            arg = p.to_vec();
                        }
                    }
                    None => worst = f64::NAN,
                }
            }
            MarginReport::new(NAMES[c], count, worst, arg, tol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::{ConjugatePair, FamilySpec};

    fn ctx(spec: FamilySpec) -> BellmanContext {
        BellmanContext::identity(ConjugatePair::from_spec(spec).unwrap(), 2).unwrap()
    }

    #[test]
    fn bounds_hold_on_small_budget() {
        let o = SampleOptions { samples: 2000, seed: 3, ..Default::default() };
        for spec in [FamilySpec::PowerLaw { p: 4.0 }, FamilySpec::ZygmundLog { r: 3.0 }] {
            let x = ctx(spec);
            let r = verify_upper_bound(&x, &o);
            assert!(r.pass, "{r:?}");
            for r in verify_gradient_bounds(&x, &o) {
                assert!(r.pass, "{r:?}");
            }
            for r in verify_hessian_lower(&x, &o) {
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn origin_has_zero_size_margin() {
        let x = ctx(FamilySpec::PowerLaw { p: 4.0 });
        let r = verify_upper_bound(&x, &SampleOptions { samples: 1, ..Default::default() });
        assert_eq!(r.min_margin, 0.0);
    }

    #[test]
    fn mollified_bounds_small_budget() {
        let x = ctx(FamilySpec::PowerLaw { p: 4.0 });
        for r in verify_mollified(&x, 0.05, 4, 1) {
            assert!(r.pass, "{r:?}");
        }
    }
}
