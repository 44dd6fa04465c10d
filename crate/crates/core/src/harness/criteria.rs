//! The acceptance matrix. Each criterion returns its margin reports;
//! failures to construct an object become failed reports, never panics.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;

use super::oracles::{legendre_sup, power_bellman};
use super::{family_label, reference_pairs, RunConfig};
use crate::bellman::{hessian_tilde, verify_gradient_bounds, verify_hessian_lower, verify_mollified, verify_upper_bound, BellmanContext, SampleOptions};
use crate::ellipticity::{
    cm_dissipativity_check, delta_p, delta_phi, lambda_max_norm, lambda_min, random_elliptic, MatrixField, MatrixSpec,
};
use crate::error::Error;
use crate::report::{sweep, MarginReport, Sample};
use crate::sampling::{log_grid, log_uniform, random_phase, sample_rng, unit_complex_vector};
use crate::semigroup::{
    evolve, expm_evolve, fourier_evolve, refinement_study, verify_embedding, DataSpec, DiscreteOperator,
    EmbeddingConfig, Grid, GridFunction, HeatFlowOptions, TMax,
};
use crate::young::{conjugate, make_family, verify_dual_quantities, ConjugatePair, FamilySpec};

type C = Complex64;

/// Margin −dev against tolerance `tol`.
fn deviation(check: impl Into<String>, samples: usize, dev: f64, tol: f64) -> MarginReport {
    MarginReport::new(check, samples, -dev, vec![], tol)
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}

fn max_dev(devs: impl IntoIterator<Item = f64>) -> f64 {
    // NaN propagates
    devs.into_iter().fold(0.0, |m: f64, d| if d.is_nan() || m.is_nan() { f64::NAN } else { m.max(d) })
}

/// Characteristic quantities of the closed-form examples.
pub fn c1_quantities(_cfg: &RunConfig) -> Vec<MarginReport> {
    let mut out = Vec::new();
    let check = |spec: FamilySpec, expect: [f64; 4], tol: f64| -> (MarginReport, Option<[f64; 4]>) {
        let name = format!("c1.quantities.{}", family_label(&spec));
        match ConjugatePair::from_spec(spec) {
            Ok(pair) => {
                let q = pair.quantities;
                let got = [q.m, q.big_m, q.m_tilde, q.big_m_tilde];
                let dev = max_dev(got.iter().zip(&expect).map(|(g, e)| (g - e).abs()));
                (deviation(name, 1, dev, tol), Some(got))
            }
            Err(e) => (MarginReport::failed(name, e.to_string()), None),
        }
    };
    for p in [2.5, 3.0, 4.0, 6.0] {
        out.push(check(FamilySpec::PowerLaw { p }, [p, p, p - 1.0, p - 1.0], 1e-6).0);
    }
    let (r1, q1) = check(FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 1.0 }, [3.0, 4.0, 2.0, 3.0], 1e-3);
    let (r2, q2) = check(FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 0.01 }, [3.0, 4.0, 2.0, 3.0], 1e-3);
    out.push(r1);
    out.push(r2);
    out.push(match (q1, q2) {
        (Some(a), Some(b)) => deviation(
            "c1.eps_independence.power-sum_4_3",
            2,
            max_dev(a.iter().zip(&b).map(|(x, y)| (x - y).abs())),
            1e-3,
        ),
        _ => MarginReport::failed("c1.eps_independence.power-sum_4_3", "construction failed"),
    });
    out.push(check(FamilySpec::DualPowerSum { q: 1.5, r: 1.8 }, [2.25, 3.0, 1.25, 2.0], 1e-3).0);
    out
}

/// D for power laws, Δ₂ = λ, and Δ_Φ = Δ_{M̃+1}.
pub fn c2_constants(cfg: &RunConfig) -> Vec<MarginReport> {
    let mut out = Vec::new();
    for p in [2.5, 3.0, 4.0, 6.0] {
        let spec = FamilySpec::PowerLaw { p };
        let name = format!("c2.d_constant.{}", family_label(&spec));
        out.push(match ConjugatePair::from_spec(spec) {
            Ok(pair) => deviation(name, 1, (pair.quantities.d - p / (p - 1.0)).abs(), 1e-9),
            Err(e) => MarginReport::failed(name, e.to_string()),
        });
    }
    let matrices = |n: usize, stream: u64| -> Vec<MatrixField> {
        (0..n)
            .map(|i| {
                let mut rng = sample_rng(cfg.seed ^ stream, i as u64);
                MatrixField::constant(format!("random{i}"), random_elliptic(&mut rng, 2, 4.0)).expect("finite")
            })
            .collect()
    };
    let ms = matrices(100, 0x2);
    let dev = max_dev(ms.iter().map(|a| (delta_p(a, 2.0).unwrap_or(f64::NAN) - lambda_min(a)).abs()));
    out.push(deviation("c2.delta2_equals_lambda", ms.len(), dev, 1e-10));
    let ms = matrices(20, 0x3);
    for spec in &cfg.families {
        let name = format!("c2.delta_phi.{}", family_label(spec));
        out.push(match ConjugatePair::from_spec(*spec) {
            Ok(pair) => {
                let dev = max_dev(
                    ms.iter()
                        .map(|a| (delta_phi(a, &pair.phi).value - delta_p(a, pair.quantities.p).unwrap_or(f64::NAN)).abs()),
                );
                deviation(name, ms.len(), dev, 1e-6)
            }
            Err(e) => MarginReport::failed(name, e.to_string()),
        });
    }
    out
}

/// Numerical conjugate against brute-force suprema, and double conjugation.
pub fn c3_conjugation(_cfg: &RunConfig) -> Vec<MarginReport> {
    let spec = FamilySpec::PowerSum { p: 3.0, r: 2.5, eps: 1.0 };
    let phi = match make_family(spec) {
        Ok(f) => f,
        Err(e) => return vec![MarginReport::failed("c3.legendre_oracle", e.to_string())],
    };
    let psi = conjugate(&phi);
    let ts = log_grid(1e-3, 1e3, 100);
    let dev = max_dev(ts.par_iter().map(|&t| rel(psi.eval(t), legendre_sup(|s| phi.eval(s), t))).collect::<Vec<_>>());
    let phi2 = conjugate(&psi);
    let dev2 = max_dev(ts.par_iter().map(|&s| rel(phi2.eval(s), phi.eval(s))).collect::<Vec<_>>());
    vec![
        deviation("c3.legendre_oracle.power-sum_3_2.5_1", ts.len(), dev, 1e-5),
        deviation("c3.double_conjugate.power-sum_3_2.5_1", ts.len(), dev2, 1e-6),
    ]
}

/// Generic evaluator against the explicit power-law form, and agreement
/// of the two branches on the critical curve.
pub fn c4_bellman(cfg: &RunConfig) -> Vec<MarginReport> {
    let mut out = Vec::new();
    for p in [3.0, 4.0] {
        let spec = FamilySpec::PowerLaw { p };
        let name = format!("c4.power_form.{}", family_label(&spec));
        let ctx = match ConjugatePair::from_spec(spec).and_then(|pair| BellmanContext::identity(pair, 2)) {
            Ok(c) => c,
            Err(e) => {
                out.push(MarginReport::failed(name, e.to_string()));
                continue;
            }
        };
        let s = sweep(10_000, cfg.seed ^ 0x4, |_, rng| {
            let (a, b) = (log_uniform(rng, 1e-3, 1e3), log_uniform(rng, 1e-3, 1e3));
            let (u, v) = (random_phase(rng) * a, random_phase(rng) * b);
            let exact = power_bellman(p, ctx.delta, a, b);
            let got = ctx.eval(u, v).unwrap_or(f64::NAN);
            Sample::Regular { margin: -rel(got, exact), at: [u.re, u.im, v.re, v.im] }
        });
        out.push(s.report(name, 1e-10));
    }
    for spec in &cfg.families {
        let name = format!("c4.critical_agreement.{}", family_label(spec));
        let ctx = match ConjugatePair::from_spec(*spec).and_then(|pair| BellmanContext::identity(pair, 2)) {
            Ok(c) => c,
            Err(e) => {
                out.push(MarginReport::failed(name, e.to_string()));
                continue;
            }
        };
        let s = sweep(1000, cfg.seed ^ 0x44, |_, rng| {
            let a = log_uniform(rng, 1e-3, 1e3);
            let b = ctx.pair.phi.d1(a);
            let margin = match (ctx.radial(a, b), ctx.other_branch(a, b)) {
                (Ok((_, d)), Ok(o)) => -rel(o, d.value),
                _ => f64::NAN,
            };
            Sample::Regular { margin, at: [a, 0.0, b, 0.0] }
        });
        out.push(s.report(name, 1e-8));
    }
    out
}

fn random_pair_ctx(spec: FamilySpec, seed: u64) -> crate::Result<BellmanContext> {
    let pair = ConjugatePair::from_spec(spec)?;
    let mut rng = sample_rng(seed, 0);
    let a = MatrixField::constant("random A", random_elliptic(&mut rng, 2, 4.0))?;
    let b = MatrixField::constant("random B", random_elliptic(&mut rng, 2, 4.0))?;
    BellmanContext::new(pair, a, b)
}

fn max_abs(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0, |x: f64, y| x.max(y.abs()))
}

/// Assembly against closed forms and against finite differences.
pub fn c5_hessian(cfg: &RunConfig) -> Vec<MarginReport> {
    let mut out = Vec::new();
    for spec in &cfg.families {
        let label = family_label(spec);
        let ctx = match random_pair_ctx(*spec, cfg.seed ^ 0x5) {
            Ok(c) => c,
            Err(e) => {
                out.push(MarginReport::failed(format!("c5.closed_form.{label}"), e.to_string()));
                out.push(MarginReport::failed(format!("c5.finite_difference.{label}"), e.to_string()));
                continue;
            }
        };
        let big = lambda_max_norm(&ctx.a).max(lambda_max_norm(&ctx.b));
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| loop {
            let (a, b) = (log_uniform(rng, 1e-2, 1e2), log_uniform(rng, 1e-2, 1e2));
            if (b / ctx.pair.phi.d1(a) - 1.0).abs() > 1e-3 {
                return (random_phase(rng) * a, random_phase(rng) * b);
            }
        };
        let closed = sweep(1000, cfg.seed ^ 0x55, |_, rng| {
            let (u, v) = draw(rng);
            let zeta = unit_complex_vector(rng, 2);
            let eta = unit_complex_vector(rng, 2);
            let margin = match (
                hessian_tilde(&ctx, ctx.a.at(0), ctx.b.at(0), u, v, &zeta, &eta),
                ctx.hessian_tilde_closed_form(ctx.a.at(0), ctx.b.at(0), u, v, &zeta, &eta),
                ctx.hessian_form(u, v),
            ) {
                (Ok(x), Ok(y), Ok(h)) => -(x - y).abs() / (h.matrix.norm() * big * 2.0),
                _ => f64::NAN,
            };
            Sample::Regular { margin, at: [u.re, u.im, v.re, v.im] }
        });
        out.push(closed.report(format!("c5.closed_form.{label}"), 1e-9));
        let fd = sweep(1000, cfg.seed ^ 0x56, |_, rng| {
            let (u, v) = draw(rng);
            let (a, b) = (u.norm(), v.norm());
            let zone = 10.0 * (1e-5 * b + ctx.pair.phi.d2(a) * 1e-5 * a);
            if (b - ctx.pair.phi.d1(a)).abs() <= zone {
                return Sample::Skip;
            }
            let margin = match (ctx.hessian_form(u, v), ctx.hessian_fd(u, v)) {
                (Ok(h), Ok(f)) => -max_abs(&(h.matrix - f.matrix)) / max_abs(&h.matrix),
                _ => f64::NAN,
            };
            Sample::Regular { margin, at: [u.re, u.im, v.re, v.im] }
        });
        out.push(fd.report(format!("c5.finite_difference.{label}"), 1e-4));
    }
    out
}

/// Size, gradient and convexity bounds of 𝔛 and the mollified bounds, over
/// families × matrix pairs.
pub fn c6_bounds(cfg: &RunConfig) -> Vec<MarginReport> {
    let jobs: Vec<(FamilySpec, &'static str, MatrixSpec, MatrixSpec)> = cfg
        .families
        .iter()
        .flat_map(|f| reference_pairs(2).into_iter().map(move |(l, a, b)| (*f, l, a, b)))
        .collect();
    jobs.par_iter()
        .flat_map_iter(|(spec, pl, a, b)| {
            let prefix = format!("c6.{}.{pl}", family_label(spec));
            let built = (|| {
                let pair = ConjugatePair::from_spec(*spec)?;
                let ctx = BellmanContext::new(pair, a.build()?, b.build()?)?;
                let tctx = ctx.with_tables(1e-4, 1e4)?;
                Ok::<_, Error>((ctx, tctx))
            })();
            let (ctx, tctx) = match built {
                Ok(x) => x,
                Err(e) => return vec![MarginReport::failed(format!("{prefix}.construct"), e.to_string())],
            };
            let o = SampleOptions { samples: cfg.samples, seed: cfg.seed ^ 0x6, ..Default::default() };
            let mut out = vec![verify_upper_bound(&tctx, &o)];
            out.extend(verify_gradient_bounds(&tctx, &o));
            out.extend(verify_hessian_lower(&tctx, &o));
            out.extend(verify_mollified(&ctx, 0.05, cfg.mollified_samples, cfg.seed ^ 0x66));
            for r in &mut out {
                r.check = format!("{prefix}.{}", r.check);
            }
            out
        })
        .collect()
}

fn c7_grid() -> Grid {
    Grid { d: 1, n: 64, length: std::f64::consts::TAU }
}

fn c7_data(g: Grid) -> GridFunction {
    let f = DataSpec::GaussianBump { center: vec![3.0], width: 0.5, amplitude: 1.0, wave: vec![1.0] };
    f.build(&g).expect("valid bump")
}

/// Semigroup oracles, semigroup property and L² contraction.
pub fn c7_semigroup(cfg: &RunConfig) -> Vec<MarginReport> {
    let g = c7_grid();
    let f = c7_data(g);
    let mut rng = sample_rng(cfg.seed ^ 0x7, 0);
    let fields = vec![
        ("identity", MatrixField::identity(1)),
        ("rotation_0.2", MatrixField::rotation(0.2, 1)),
        ("random", MatrixField::constant("random", random_elliptic(&mut rng, 1, 4.0)).expect("finite")),
    ];
    fields
        .par_iter()
        .flat_map_iter(|(label, a)| {
            let op = match DiscreteOperator::assemble(a, g) {
                Ok(op) => op,
                Err(e) => return vec![MarginReport::failed(format!("c7.{label}.assemble"), e.to_string())],
            };
            let times = [0.01, 0.1, 1.0];
            let oracle = max_dev(times.iter().map(|&t| {
                match (evolve(&op, &f, t), fourier_evolve(a.at(0), &f, t), expm_evolve(&op, &f, t)) {
                    (Ok(u), Ok(x), Ok(y)) => u.relative_distance(&x).max(u.relative_distance(&y)),
                    _ => f64::NAN,
                }
            }));
            let (s, t) = (0.1, 0.3);
            let semigroup = match (evolve(&op, &f, s).and_then(|x| evolve(&op, &x, t)), evolve(&op, &f, s + t)) {
                (Ok(x), Ok(y)) => x.relative_distance(&y),
                _ => f64::NAN,
            };
            let mut norms = vec![f.l2_norm()];
            let mut u = f.clone();
            let mut ok = true;
            for _ in 0..40 {
                match evolve(&op, &u, 0.05) {
                    Ok(x) => u = x,
                    Err(_) => ok = false,
                }
                norms.push(u.l2_norm());
            }
            let growth = if ok {
                max_dev(norms.windows(2).map(|w| ((w[1] - w[0]) / norms[0]).max(0.0)))
            } else {
                f64::NAN
            };
            let one = GridFunction::constant(g, C::new(1.0, 0.0));
            let constant = match evolve(&op, &one, 0.7) {
                Ok(x) => x.values.iter().map(|z| (z - one.values[0]).norm()).fold(0.0, f64::max),
                Err(_) => f64::NAN,
            };
            vec![
                deviation(format!("c7.{label}.oracle"), times.len(), oracle, 1e-6),
                deviation(format!("c7.{label}.semigroup_property"), 1, semigroup, 1e-7),
                deviation(format!("c7.{label}.l2_contraction"), norms.len(), growth, 1e-7),
                deviation(format!("c7.{label}.constant_invariance"), 1, constant, 0.0),
            ]
        })
        .collect()
}

/// The reference embedding runs.
pub fn reference_embedding_configs(families: &[FamilySpec]) -> Vec<(String, EmbeddingConfig)> {
    let ell = std::f64::consts::TAU;
    let mut out = Vec::new();
    for spec in families {
        for (d, n) in [(1usize, 64usize), (1, 128), (2, 32)] {
            for (pl, a, b) in reference_pairs(d) {
                let c = vec![ell / 2.0; d];
                let cfg = EmbeddingConfig {
                    young: *spec,
                    a,
                    b,
                    grid: Grid { d, n, length: ell },
                    data: DataSpec::GaussianBump { center: c.clone(), width: 0.5, amplitude: 1.0, wave: vec![] },
                    data_g: Some(DataSpec::GaussianBump {
                        center: c.iter().map(|x| x + 0.4).collect(),
                        width: 0.7,
                        amplitude: 0.6,
                        wave: vec![1.0; d],
                    }),
                    t_max: TMax::Auto,
                    heat_flow: HeatFlowOptions::default(),
                };
                out.push((format!("c8.{}.{pl}.d{d}_n{n}", family_label(spec)), cfg));
            }
        }
    }
    out
}

/// End-to-end embedding inequality and heat-flow chain.
pub fn c8_embedding(cfg: &RunConfig) -> Vec<MarginReport> {
    reference_embedding_configs(&cfg.families)
        .par_iter()
        .flat_map_iter(|(prefix, c)| match verify_embedding(c) {
            Ok(run) => run.reports(prefix),
            Err(e) => vec![MarginReport::failed(format!("{prefix}.run"), e.to_string())],
        })
        .collect()
}

/// Negative controls: each report passes when the control is detected.
pub fn c9_negative(cfg: &RunConfig) -> Vec<MarginReport> {
    let mut out = Vec::new();
    for spec in &cfg.families {
        let name = format!("c9.delta_x10_breaks_gradient_bound.{}", family_label(spec));
        out.push(match ConjugatePair::from_spec(*spec).and_then(|p| BellmanContext::identity(p, 2)) {
            Ok(ctx) => {
                let inflated = match ctx.with_delta(10.0 * ctx.delta).with_tables(1e-4, 1e4) {
                    Ok(c) => c,
                    Err(e) => {
                        out.push(MarginReport::failed(name, e.to_string()));
                        continue;
                    }
                };
                let o = SampleOptions { samples: cfg.samples, seed: cfg.seed ^ 0x9, ..Default::default() };
                let r = verify_gradient_bounds(&inflated, &o);
                let broke = r.iter().any(|x| !x.pass);
                MarginReport::verdict(
                    name,
                    broke,
                    format!(
                        "delta = {:e}; min relative gradient margins u: {:e}, v: {:e}",
                        inflated.delta, r[0].min_margin, r[1].min_margin
                    ),
                )
            }
            Err(e) => MarginReport::failed(name, e.to_string()),
        });
    }
    let rot = MatrixField::rotation(1.5, 2);
    let d4 = delta_p(&rot, 4.0).unwrap_or(f64::NAN);
    out.push(MarginReport::verdict("c9.rotation_1.5.delta_p_nonpositive", d4 <= 0.0, format!("Delta_4 = {d4:e}")));
    let mut run = reference_embedding_configs(&[FamilySpec::PowerLaw { p: 4.0 }]).swap_remove(0).1;
    run.a = MatrixSpec::rotation(1.5, 1);
    let refused = match verify_embedding(&run) {
        Err(Error::Stage { ref source, .. }) => matches!(**source, Error::NotPElliptic { .. }),
        _ => false,
    };
    out.push(MarginReport::verdict("c9.rotation_1.5.embedding_refused", refused, "expects a non-ellipticity error"));
    let bad = ConjugatePair::from_spec(FamilySpec::PowerLaw { p: 1.5 });
    out.push(MarginReport::verdict(
        "c9.power_1.5.rejected",
        bad.is_err(),
        bad.err().map(|e| e.to_string()).unwrap_or_else(|| "accepted".into()),
    ));
    out
}

/// Module invariants not covered by a numbered criterion.
pub fn invariants(cfg: &RunConfig) -> Vec<MarginReport> {
    let mut out = Vec::new();
    for spec in &cfg.families {
        let label = family_label(spec);
        let pair = match ConjugatePair::from_spec(*spec) {
            Ok(p) => p,
            Err(e) => {
                out.push(MarginReport::failed(format!("young.construct.{label}"), e.to_string()));
                continue;
            }
        };
        let rows = verify_dual_quantities(&pair);
        out.push(deviation(
            format!("young.dual_quantities.{label}"),
            rows.len(),
            max_dev(rows.iter().map(|r| r.discrepancy.abs())),
            super::scan_tolerance(spec),
        ));
        let young = sweep(2000, cfg.seed ^ 0x11, |_, rng| {
            let (s, t) = (log_uniform(rng, 1e-3, 1e3), log_uniform(rng, 1e-3, 1e3));
            let rhs = pair.phi.eval(s) + pair.psi.eval(t);
            Sample::Regular { margin: (rhs - s * t) / rhs, at: [s, 0.0, t, 0.0] }
        });
        out.push(young.report(format!("young.young_inequality.{label}"), 1e-12));
        match BellmanContext::identity(pair.clone(), 2) {
            Ok(ctx) => out.push(gradient_fd(&ctx, cfg.seed ^ 0x12, format!("bellman.gradient_fd.{label}"))),
            Err(e) => out.push(MarginReport::failed(format!("bellman.gradient_fd.{label}"), e.to_string())),
        }
        let real = MatrixField::constant(
            "real",
            crate::ellipticity::CMatrix::from_row_slice(2, 2, &[C::new(2.0, 0.0), C::new(0.5, 0.0), C::new(0.3, 0.0), C::new(1.0, 0.0)]),
        )
        .expect("finite");
        out.push(match cm_dissipativity_check(&real, &pair, 2000, cfg.seed ^ 0x13) {
            Ok(r) => {
                let mut m = r.margin;
                m.check = format!("ellipticity.dissipativity_real.{label}");
                m
            }
            Err(e) => MarginReport::failed(format!("ellipticity.dissipativity_real.{label}"), e.to_string()),
        });
    }
    out.push(refinement(cfg));
    out
}

/// Central differences of 𝔛 against the analytic gradient, relative to the
/// gradient bound. Points near 𝒴 and ill-conditioned differences are skipped.
fn gradient_fd(ctx: &BellmanContext, seed: u64, name: String) -> MarginReport {
    let s = sweep(2000, seed, |_, rng| {
        let (a, b) = (log_uniform(rng, 1e-2, 1e2), log_uniform(rng, 1e-2, 1e2));
        let (u, v) = (random_phase(rng) * a, random_phase(rng) * b);
        let x = [u.re, u.im, v.re, v.im];
        let (hu, hv) = (1e-6 * a.max(1.0), 1e-6 * b.max(1.0));
        if (b - ctx.pair.phi.d1(a)).abs() <= 10.0 * (hv + ctx.pair.phi.d2(a) * hu) {
            return Sample::Skip;
        }
        let (Ok(g), Ok(val)) = (ctx.real_gradient(u, v), ctx.eval(u, v)) else {
            return Sample::Regular { margin: f64::NAN, at: x };
        };
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            let h = if k < 2 { hu } else { hv };
            let at = |sign: f64| {
                let mut y = x;
                y[k] += sign * h;
                ctx.eval(C::new(y[0], y[1]), C::new(y[2], y[3])).unwrap_or(f64::NAN)
            };
            let fd = (at(1.0) - at(-1.0)) / (2.0 * h);
            let bound = if k < 2 { ctx.pair.phi.d1(a).max(b) } else { ctx.pair.psi.d1(b) };
            if f64::EPSILON * val / (h * bound) > 1e-7 {
                return Sample::Skip;
            }
            worst = worst.max((fd - g[k]).abs() / bound);
        }
        Sample::Regular { margin: -worst, at: x }
    });
    s.report(name, 1e-6)
}

/// lhs at N, 2N, 4N, 8N: successive differences shrink by a bounded ratio.
fn refinement(_cfg: &RunConfig) -> MarginReport {
    let mut c = reference_embedding_configs(&[FamilySpec::PowerLaw { p: 4.0 }]).swap_remove(0).1;
    c.grid.n = 32;
    let name = "semigroup.refinement_ratio";
    match refinement_study(&c, &[32, 64, 128, 256]) {
        Ok(v) => {
            let diffs: Vec<f64> = v.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
            let ratios: Vec<f64> = diffs.windows(2).map(|w| w[0] / w[1]).collect();
            // ratio in [1, 16]: shrinking differences, at most fourth order
            let margin = ratios.iter().map(|r| (r - 1.0).min(16.0 - r)).fold(f64::INFINITY, f64::min);
            MarginReport::new(name, v.len(), margin, ratios, 0.0)
        }
        Err(e) => MarginReport::failed(name, e.to_string()),
    }
}
