//! Both sides of the bilinear embedding on the torus and the heat-flow
//! energy E(t) = Σ 𝔛(T_t^A f, T_t^B g) h^d.
//!
//! The time integral runs over a geometric grid t_k = T_max·ρ^{k−K}. The
//! trapezoid rule is applied in the variable ln t, where the integrand
//! t·F(t) decays at both ends; [0, t_0] contributes F(t_0)·t_0 and the tail
//! beyond T_max is bounded by ‖T_T f − f̄‖‖T_T g − ḡ‖ / (2(λ_A λ_B)^{1/2}),
//! which follows from d/dt‖T_t f‖² ≤ −2λ‖∇T_t f‖² and Cauchy–Schwarz.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evolve::{Evolver, EvolverStats};
use super::{gradient_magnitude, DiscreteOperator, Grid, GridFunction};
use crate::bellman::{BellmanContext, Mollifier};
use crate::ellipticity::{c_p_constant, MatrixField, MatrixSpec};
use crate::error::{Error, Result};
use crate::report::MarginReport;
use crate::young::{luxemburg_norm, ConjugatePair, FamilySpec};

type C = Complex64;

/// Initial data on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSpec {
    /// amplitude·exp(−|x − center|²/(2 width²)) with the periodic distance,
    /// times e^{i wave·x} when `wave` is given.
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
        #[serde(default)]
        wave: Vec<f64>,
    },
    /// amplitude·e^{iκ·x}, κ = 2πk/ℓ
    FourierMode { k: Vec<i64>, amplitude: f64 },
    Constant { value: f64 },
    Zero,
}

impl DataSpec {
    pub fn build(&self, grid: &Grid) -> Result<GridFunction> {
        let ell = grid.length;
        match self {
            DataSpec::GaussianBump { center, width, amplitude, wave } => {
                if center.len() != grid.d || !(wave.is_empty() || wave.len() == grid.d) {
                    return Err(Error::Config(format!("bump center/wave must have {} coordinates", grid.d)));
                }
                if !(*width > 0.0) {
                    return Err(Error::Config("bump width must be positive".into()));
                }
                Ok(GridFunction::from_fn(*grid, |x| {
                    let r2: f64 = x
                        .iter()
                        .zip(center)
                        .map(|(xi, ci)| {
                            let dx = (xi - ci).rem_euclid(ell);
                            dx.min(ell - dx).powi(2)
                        })
                        .sum();
                    let phase: f64 = wave.iter().zip(x).map(|(k, xi)| k * xi).sum();
                    C::from_polar(amplitude * (-r2 / (2.0 * width * width)).exp(), phase)
                }))
            }
            DataSpec::FourierMode { k, amplitude } => {
                if k.len() != grid.d {
                    return Err(Error::Config(format!("mode needs {} wave numbers", grid.d)));
                }
                Ok(GridFunction::from_fn(*grid, |x| {
                    let phase: f64 =
                        k.iter().zip(x).map(|(&ki, xi)| std::f64::consts::TAU * ki as f64 * xi / ell).sum();
                    C::from_polar(*amplitude, phase)
                }))
            }
            DataSpec::Constant { value } => Ok(GridFunction::constant(*grid, C::new(*value, 0.0))),
            DataSpec::Zero => Ok(GridFunction::zeros(*grid)),
        }
    }
}

/// `"auto"` or an explicit horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "TMaxRaw", into = "TMaxRaw")]
pub enum TMax {
    #[default]
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TMaxRaw {
    Number(f64),
    Text(String),
}

impl TryFrom<TMaxRaw> for TMax {
    type Error = String;
    fn try_from(r: TMaxRaw) -> std::result::Result<Self, String> {
        match r {
            TMaxRaw::Number(t) if t > 0.0 && t.is_finite() => Ok(TMax::Value(t)),
            TMaxRaw::Number(t) => Err(format!("T_max must be positive, got {t}")),
            TMaxRaw::Text(s) if s == "auto" => Ok(TMax::Auto),
            TMaxRaw::Text(s) => Err(format!("T_max must be a number or \"auto\", got \"{s}\"")),
        }
    }
}

impl From<TMax> for TMaxRaw {
    fn from(t: TMax) -> Self {
        match t {
            TMax::Auto => TMaxRaw::Text("auto".into()),
            TMax::Value(v) => TMaxRaw::Number(v),
        }
    }
}

impl TMax {
    /// Auto: e^{−2λσ_min T_max} = 1e-10, λ the smaller cell ellipticity.
    pub fn resolve(self, a: &DiscreteOperator, b: &DiscreteOperator) -> f64 {
        match self {
            TMax::Value(t) => t,
            TMax::Auto => 1e10f64.ln() / (2.0 * a.lambda.min(b.lambda) * a.grid.sigma_min()),
        }
    }
}

/// Geometric time grid on [t_max·ρ^{−K}, t_max].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub rho: f64,
}

impl TimeGrid {
    pub const RHO: f64 = 1.15;
    /// t₀ / T_max
    pub const SPAN: f64 = 1e-8;

    pub fn geometric(t_max: f64, t_min: f64, rho: f64) -> Result<Self> {
        if !(t_max > t_min && t_min > 0.0 && rho > 1.0) {
            return Err(Error::Config(format!("bad time grid: t_min {t_min}, t_max {t_max}, rho {rho}")));
        }
        let k = ((t_max / t_min).ln() / rho.ln()).ceil() as i32;
        let times = (0..=k).map(|i| t_max * rho.powi(i - k)).collect();
        Ok(Self { times, rho })
    }

    /// (head, body) for integrand samples at `times`.
    pub fn integrate(&self, values: &[f64]) -> (f64, f64) {
        let step = self.rho.ln();
        let last = self.times.len() - 1;
        let body = self
            .times
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (t, v))| if i == 0 || i == last { 0.5 } else { 1.0 } * step * t * v)
            .sum();
        (values[0] * self.times[0], body)
    }
}

/// Quantities at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeRecord {
    pub t: f64,
    /// Σ|∇T_t^A f||∇T_t^B g| h^d
    pub integrand: f64,
    /// E(t)
    pub energy: Option<f64>,
    /// −E′(t) through the chain rule and the semi-discrete equation
    pub dissipation: Option<f64>,
    /// κ C_p⁻¹ × integrand
    pub lower_bound: Option<f64>,
}

#[derive(Clone, Copy)]
enum Energy<'a> {
    Plain(&'a BellmanContext),
    Mollified(&'a BellmanContext, &'a Mollifier),
}

impl Energy<'_> {
    fn ctx(&self) -> &BellmanContext {
        match self {
            Energy::Plain(c) | Energy::Mollified(c, _) => c,
        }
    }

    fn terms(&self, u: C, v: C) -> Result<(f64, C, C)> {
        match self {
            Energy::Plain(ctx) => {
                let (a, b) = (u.norm(), v.norm());
                let (_, d) = ctx.radial(a, b)?;
                let du = if a > 0.0 { u * (0.5 * d.d1 / a) } else { C::new(0.0, 0.0) };
                let dv = if b > 0.0 { v * (0.5 * d.d2 / b) } else { C::new(0.0, 0.0) };
                Ok((d.value, du, dv))
            }
            Energy::Mollified(ctx, m) => m.value_gradient(ctx, u, v),
        }
    }
}

/// States of both flows at a list of times.
struct Flow {
    states: Vec<(Vec<C>, Vec<C>)>,
    stats: EvolverStats,
}

fn flow(op_a: &DiscreteOperator, op_b: &DiscreteOperator, f: &GridFunction, g: &GridFunction, times: &[f64]) -> Result<Flow> {
    f.same_grid(g)?;
    if f.grid != op_a.grid || g.grid != op_b.grid {
        return Err(Error::GridMismatch("data and operator grids differ".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::Config("times must be nonnegative and strictly increasing".into()));
    }
    let run = |op: &DiscreteOperator, init: &GridFunction| -> Result<(Vec<Vec<C>>, EvolverStats)> {
        let mut ev = Evolver::new(op);
        let mut u = init.values.clone();
        let mut now = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            ev.advance(&mut u, t - now)?;
            now = t;
            out.push(u.clone());
        }
        Ok((out, ev.stats))
    };
    let (ra, rb) = rayon::join(|| run(op_a, f), || run(op_b, g));
    let ((sa, ea), (sb, eb)) = (ra?, rb?);
    let stats = EvolverStats {
        steps: ea.steps + eb.steps,
        rejected: ea.rejected + eb.rejected,
        solver_iterations: ea.solver_iterations + eb.solver_iterations,
    };
    Ok(Flow { states: sa.into_iter().zip(sb).collect(), stats })
}

fn record(
    op_a: &DiscreteOperator,
    op_b: &DiscreteOperator,
    t: f64,
    u: &[C],
    v: &[C],
    energy: Option<Energy>,
) -> Result<TimeRecord> {
    let grid = op_a.grid;
    let vol = grid.cell_volume();
    let gu = gradient_magnitude(&GridFunction { grid, values: u.to_vec() });
    let gv = gradient_magnitude(&GridFunction { grid, values: v.to_vec() });
    let integrand = gu.iter().zip(&gv).map(|(a, b)| a * b).sum::<f64>() * vol;
    let mut rec = TimeRecord { t, integrand, energy: None, dissipation: None, lower_bound: None };
    if let Some(en) = energy {
        let mut lu = vec![C::new(0.0, 0.0); u.len()];
        let mut lv = vec![C::new(0.0, 0.0); v.len()];
        op_a.apply_into(u, &mut lu);
        op_b.apply_into(v, &mut lv);
        let (mut e, mut diss) = (0.0, 0.0);
        for i in 0..u.len() {
            let (x, du, dv) = en.terms(u[i], v[i])?;
            e += x;
            diss += 2.0 * (du.conj() * lu[i] + dv.conj() * lv[i]).re;
        }
        rec.energy = Some(e * vol);
        rec.dissipation = Some(diss * vol);
        rec.lower_bound = Some(en.ctx().convexity_constant() * integrand);
    }
    Ok(rec)
}

/// Records at `times` (strictly increasing, first ≥ 0); energies when a
/// Bellman context is given.
pub fn trajectory(
    op_a: &DiscreteOperator,
    op_b: &DiscreteOperator,
    f: &GridFunction,
    g: &GridFunction,
    times: &[f64],
    ctx: Option<&BellmanContext>,
) -> Result<Vec<TimeRecord>> {
    Ok(records(op_a, op_b, f, g, times, ctx.map(Energy::Plain))?.0)
}

fn records(
    op_a: &DiscreteOperator,
    op_b: &DiscreteOperator,
    f: &GridFunction,
    g: &GridFunction,
    times: &[f64],
    energy: Option<Energy>,
) -> Result<(Vec<TimeRecord>, Flow)> {
    let fl = flow(op_a, op_b, f, g, times)?;
    let recs = times
        .par_iter()
        .zip(&fl.states)
        .map(|(&t, (u, v))| record(op_a, op_b, t, u, v, energy))
        .collect::<Result<Vec<_>>>()?;
    Ok((recs, fl))
}

#[derive(Debug, Clone, Serialize)]
pub struct LhsEstimate {
    /// head + body
    pub lhs: f64,
    pub head: f64,
    pub body: f64,
    pub tail_bound: f64,
    pub t_max: f64,
    pub time_points: usize,
    pub work: EvolverStats,
    #[serde(skip)]
    pub records: Vec<TimeRecord>,
}

fn lhs_with(
    op_a: &DiscreteOperator,
    op_b: &DiscreteOperator,
    f: &GridFunction,
    g: &GridFunction,
    t_max: TMax,
    extra: &[f64],
    energy: Option<Energy>,
) -> Result<LhsEstimate> {
    let horizon = t_max.resolve(op_a, op_b);
    let tg = TimeGrid::geometric(horizon, TimeGrid::SPAN * horizon, TimeGrid::RHO)?;
    let mut times: Vec<f64> = std::iter::once(0.0)
        .chain(tg.times.iter().copied())
        .chain(extra.iter().copied().filter(|&t| t > 0.0 && t < horizon))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (recs, fl) = records(op_a, op_b, f, g, &times, energy)?;
    let on_grid: Vec<f64> = tg
        .times
        .iter()
        .map(|t| recs[times.binary_search_by(|x| x.total_cmp(t)).expect("grid time present")].integrand)
        .collect();
    let (head, body) = tg.integrate(&on_grid);
    let (u, v) = fl.states.last().expect("nonempty time list");
    let centered = |w: &[C]| {
        let mean = w.iter().sum::<C>() / w.len() as f64;
        (w.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() * f.grid.cell_volume()).sqrt()
    };
    let tail_bound = centered(u) * centered(v) / (2.0 * (op_a.lambda * op_b.lambda).sqrt());
    Ok(LhsEstimate {
        lhs: head + body,
        head,
        body,
        tail_bound,
        t_max: horizon,
        time_points: tg.times.len(),
        work: fl.stats,
        records: recs,
    })
}

/// ∫₀^{T_max} Σ|∇T_t^A f||∇T_t^B g| h^d dt with its tail bound.
pub fn embedding_lhs(
    op_a: &DiscreteOperator,
    op_b: &DiscreteOperator,
    f: &GridFunction,
    g: &GridFunction,
    t_max: TMax,
) -> Result<LhsEstimate> {
    lhs_with(op_a, op_b, f, g, t_max, &[], None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsForm {
    /// 40 C_p D ‖f‖_Φ ‖g‖_Ψ
    Homogeneous,
    /// 20 C_p D (ΣΦ(|f|) + ΣΨ(|g|)) h^d
    Dehomogenized,
}

pub fn embedding_rhs(
    pair: &ConjugatePair,
    a: &MatrixField,
    b: &MatrixField,
    f: &GridFunction,
    g: &GridFunction,
    form: RhsForm,
) -> Result<f64> {
    f.same_grid(g)?;
    let c_p = c_p_constant(a, b, pair.quantities.p)?;
    let k = c_p * pair.quantities.d;
    let vol = f.grid.cell_volume();
    Ok(match form {
        RhsForm::Homogeneous => {
            40.0 * k * luxemburg_norm(&pair.phi, &f.magnitudes(), vol) * luxemburg_norm(&pair.psi, &g.magnitudes(), vol)
        }
        RhsForm::Dehomogenized => {
            let mf: f64 = f.magnitudes().iter().map(|&s| pair.phi.eval(s)).sum();
            let mg: f64 = g.magnitudes().iter().map(|&s| pair.psi.eval(s)).sum();
            20.0 * k * (mf + mg) * vol
        }
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatFlowOptions {
    pub times: Vec<f64>,
    /// Margins are relative to E(0).
    pub tolerance: f64,
    /// Use 𝔛_ν with this ν instead of 𝔛.
    pub mollify: Option<f64>,
}

impl Default for HeatFlowOptions {
    fn default() -> Self {
        Self { times: vec![0.01, 0.05, 0.1, 0.5], tolerance: 1e-6, mollify: None }
    }
}

/// Margin reports from records that start at t = 0.
fn heat_flow_reports(prefix: &str, recs: &[TimeRecord], size_bound: f64, tolerance: f64) -> Vec<MarginReport> {
    let e0 = recs[0].energy.unwrap_or(0.0);
    let scale = if e0 > 0.0 { e0 } else { 1.0 };
    let mut diss = (f64::INFINITY, f64::NAN);
    let mut mono = (f64::INFINITY, f64::NAN);
    for (i, r) in recs.iter().enumerate() {
        let m = (r.dissipation.unwrap_or(f64::NAN) - r.lower_bound.unwrap_or(f64::NAN)) / scale;
        if r.t > 0.0 && (m < diss.0 || m.is_nan()) {
            diss = (m, r.t);
        }
        if i > 0 {
            let m = (recs[i - 1].energy.unwrap_or(f64::NAN) - r.energy.unwrap_or(f64::NAN)) / scale;
            if m < mono.0 || m.is_nan() {
                mono = (m, r.t);
            }
        }
    }
    let n = recs.len();
    let fix = |x: (f64, f64)| if x.0 == f64::INFINITY { (0.0, 0.0) } else { x };
    let (diss, mono) = (fix(diss), fix(mono));
    let size = if size_bound > 0.0 { (size_bound - e0) / size_bound } else { size_bound - e0 };
    vec![
        MarginReport::new(format!("{prefix}.dissipation"), n - 1, diss.0, vec![diss.1], tolerance),
        MarginReport::new(format!("{prefix}.monotone"), n - 1, mono.0, vec![mono.1], tolerance),
        MarginReport::new(format!("{prefix}.initial_size"), 1, size, vec![0.0], 1e-9),
    ]
}

/// −E′(t) ≥ κ C_p⁻¹ Σ|∇T_t^A f||∇T_t^B g| h^d at each time, E nonincreasing,
/// and E(0) within the size bound. The torus has no cutoff, so no
/// remainder term enters.
pub fn heat_flow_check(
    ctx: &BellmanContext,
    op_a: &DiscreteOperator,
    op_b: &DiscreteOperator,
    f: &GridFunction,
    g: &GridFunction,
    opts: &HeatFlowOptions,
) -> Result<Vec<MarginReport>> {
    let mut times: Vec<f64> = std::iter::once(0.0).chain(opts.times.iter().copied().filter(|&t| t > 0.0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let moll = opts.mollify.map(Mollifier::new).transpose()?;
    let energy = match &moll {
        Some(m) => Energy::Mollified(ctx, m),
        None => Energy::Plain(ctx),
    };
    let (recs, _) = records(op_a, op_b, f, g, &times, Some(energy))?;
    let prefix = if moll.is_some() { "heat_flow_mollified" } else { "heat_flow" };
    Ok(heat_flow_reports(prefix, &recs, size_bound(ctx, f, g), opts.tolerance))
}

/// 2 max{1, M/m̃}(ΣΦ(|f|) + ΣΨ(|g|)) h^d
fn size_bound(ctx: &BellmanContext, f: &GridFunction, g: &GridFunction) -> f64 {
    let vol = f.grid.cell_volume();
    f.values.iter().zip(&g.values).map(|(u, v)| ctx.size_bound(u.norm(), v.norm())).sum::<f64>() * vol
}

/// Declarative description of one embedding run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub young: FamilySpec,
    #[serde(rename = "A")]
    pub a: MatrixSpec,
    #[serde(rename = "B")]
    pub b: MatrixSpec,
    pub grid: Grid,
    /// f, and g unless `data_g` is given
    pub data: DataSpec,
    #[serde(default)]
    pub data_g: Option<DataSpec>,
    #[serde(rename = "T_max", default)]
    pub t_max: TMax,
    #[serde(default)]
    pub heat_flow: HeatFlowOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct Margins {
    pub homogeneous: f64,
    pub dehomogenized: f64,
    pub homogeneous_relative: f64,
    pub dehomogenized_relative: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConstants {
    pub c_p: f64,
    pub d: f64,
    pub delta: f64,
    pub kappa: f64,
    pub norm_f_phi: f64,
    pub norm_g_psi: f64,
}

/// Deterministic work counters; wall-clock time is not part of the report.
#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub time_points: usize,
    pub cn_steps: usize,
    pub rejected_steps: usize,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingRun {
    pub label: &'static str,
    pub family: String,
    pub a: String,
    pub b: String,
    pub grid: Grid,
    pub t_max: f64,
    /// quadrature over (0, T_max]
    pub lhs: f64,
    pub tail_bound: f64,
    pub rhs_homogeneous: f64,
    pub rhs_dehomogenized: f64,
    /// rhs − (lhs + tail_bound)
    pub margins: Margins,
    pub constants: RunConstants,
    pub heat_flow: Vec<MarginReport>,
    pub timings: Timings,
    pub pass: bool,
    #[serde(skip)]
    pub records: Vec<TimeRecord>,
}

impl EmbeddingRun {
    pub const CSV_HEADER: &'static str = "t,integrand,energy,dissipation,lower_bound";

    pub fn time_series_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t,
                r.integrand,
                opt(r.energy),
                opt(r.dissipation),
                opt(r.lower_bound)
            ));
        }
        out
    }

    /// Margin reports for aggregation: the two embedding forms and the
    /// heat-flow checks.
    pub fn reports(&self, prefix: &str) -> Vec<MarginReport> {
        let mut out = vec![
            MarginReport::new(
                format!("{prefix}.embedding_homogeneous"),
                1,
                self.margins.homogeneous_relative,
                vec![],
                0.0,
            ),
            MarginReport::new(
                format!("{prefix}.embedding_dehomogenized"),
                1,
                self.margins.dehomogenized_relative,
                vec![],
                0.0,
            ),
        ];
        for r in &self.heat_flow {
            let mut r = r.clone();
            r.check = format!("{prefix}.{}", r.check);
            out.push(r);
        }
        out
    }
}

struct Prepared {
    pair: ConjugatePair,
    a: MatrixField,
    b: MatrixField,
    op_a: DiscreteOperator,
    op_b: DiscreteOperator,
    f: GridFunction,
    g: GridFunction,
}

fn prepare(cfg: &EmbeddingConfig) -> Result<Prepared> {
    let grid = cfg.grid;
    grid.validate().map_err(|e| e.at("grid"))?;
    let pair = ConjugatePair::from_spec(cfg.young).map_err(|e| e.at("young"))?;
    let points = grid.points();
    let a = cfg.a.build_on(&points, grid.length).map_err(|e| e.at("matrix A"))?;
    let b = cfg.b.build_on(&points, grid.length).map_err(|e| e.at("matrix B"))?;
    let op_a = DiscreteOperator::assemble(&a, grid).map_err(|e| e.at("assemble A"))?;
    let op_b = DiscreteOperator::assemble(&b, grid).map_err(|e| e.at("assemble B"))?;
    let f = cfg.data.build(&grid).map_err(|e| e.at("data"))?;
    let g = cfg.data_g.as_ref().unwrap_or(&cfg.data).build(&grid).map_err(|e| e.at("data"))?;
    Ok(Prepared { pair, a, b, op_a, op_b, f, g })
}

/// Full run: lhs with tail bound, both right-hand sides, and the heat-flow
/// checks at every sampled time.
pub fn verify_embedding(cfg: &EmbeddingConfig) -> Result<EmbeddingRun> {
    let p = prepare(cfg)?;
    let ctx = BellmanContext::new(p.pair.clone(), p.a.clone(), p.b.clone()).map_err(|e| e.at("ellipticity"))?;
    let tctx = ctx.with_tables(1e-10, 1e4).map_err(|e| e.at("tables"))?;
    let est = lhs_with(&p.op_a, &p.op_b, &p.f, &p.g, cfg.t_max, &cfg.heat_flow.times, Some(Energy::Plain(&tctx)))
        .map_err(|e| e.at("evolve"))?;
    let rhs_h = embedding_rhs(&p.pair, &p.a, &p.b, &p.f, &p.g, RhsForm::Homogeneous).map_err(|e| e.at("rhs"))?;
    let rhs_d = embedding_rhs(&p.pair, &p.a, &p.b, &p.f, &p.g, RhsForm::Dehomogenized).map_err(|e| e.at("rhs"))?;
    let mut heat = heat_flow_reports("heat_flow", &est.records, size_bound(&ctx, &p.f, &p.g), cfg.heat_flow.tolerance);
    if cfg.heat_flow.mollify.is_some() {
        heat.extend(
            heat_flow_check(&tctx, &p.op_a, &p.op_b, &p.f, &p.g, &cfg.heat_flow).map_err(|e| e.at("heat flow"))?,
        );
    }
    let total = est.lhs + est.tail_bound;
    let rel = |rhs: f64, m: f64| if rhs > 0.0 { m / rhs } else { m };
    let margins = Margins {
        homogeneous: rhs_h - total,
        dehomogenized: rhs_d - total,
        homogeneous_relative: rel(rhs_h, rhs_h - total),
        dehomogenized_relative: rel(rhs_d, rhs_d - total),
    };
    let vol = p.f.grid.cell_volume();
    let pass = margins.homogeneous > 0.0 && margins.dehomogenized > 0.0 && heat.iter().all(|r| r.pass);
    Ok(EmbeddingRun {
        label: "torus analogue",
        family: cfg.young.to_string(),
        a: p.a.name().to_string(),
        b: p.b.name().to_string(),
        grid: cfg.grid,
        t_max: est.t_max,
        lhs: est.lhs,
        tail_bound: est.tail_bound,
        rhs_homogeneous: rhs_h,
        rhs_dehomogenized: rhs_d,
        margins,
        constants: RunConstants {
            c_p: ctx.c_p,
            d: p.pair.quantities.d,
            delta: ctx.delta,
            kappa: ctx.convexity_constant(),
            norm_f_phi: luxemburg_norm(&p.pair.phi, &p.f.magnitudes(), vol),
            norm_g_psi: luxemburg_norm(&p.pair.psi, &p.g.magnitudes(), vol),
        },
        heat_flow: heat,
        timings: Timings {
            time_points: est.time_points,
            cn_steps: est.work.steps,
            rejected_steps: est.work.rejected,
            solver_iterations: est.work.solver_iterations,
        },
        pass,
        records: est.records,
    })
}

/// lhs at each N (other settings from `cfg`), computed in parallel.
pub fn refinement_study(cfg: &EmbeddingConfig, levels: &[usize]) -> Result<Vec<(usize, f64)>> {
    levels
        .par_iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.grid.n = n;
            let p = prepare(&c)?;
            let est = embedding_lhs(&p.op_a, &p.op_b, &p.f, &p.g, c.t_max)?;
            Ok((n, est.lhs))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::FamilySpec;

    fn grid() -> Grid {
        Grid::new(1, 64, std::f64::consts::TAU).unwrap()
    }

    fn identity_ops(g: Grid) -> (DiscreteOperator, DiscreteOperator) {
        let op = DiscreteOperator::assemble(&MatrixField::identity(g.d), g).unwrap();
        (op.clone(), op)
    }

    fn bump_config() -> EmbeddingConfig {
        serde_json::from_str(
            r#"{"young": {"family": "power_law", "p": 4},
                "A": {"kind": "identity", "d": 1}, "B": {"kind": "identity", "d": 1},
                "grid": {"d": 1, "N": 64, "length": 6.283185307179586},
                "data": {"kind": "gaussian-bump", "center": [3.0], "width": 0.5, "amplitude": 1.0},
                "T_max": "auto", "samples": 10, "seed": 1}"#,
        )
        .unwrap()
    }

    #[test]
    fn t_max_parsing() {
        assert_eq!(serde_json::from_str::<TMax>("\"auto\"").unwrap(), TMax::Auto);
        assert_eq!(serde_json::from_str::<TMax>("2.5").unwrap(), TMax::Value(2.5));
        assert!(serde_json::from_str::<TMax>("\"soon\"").is_err());
        assert!(serde_json::from_str::<TMax>("-1").is_err());
    }

    #[test]
    fn log_trapezoid_integrates_exponential() {
        let tg = TimeGrid::geometric(40.0, 4e-7, TimeGrid::RHO).unwrap();
        let vals: Vec<f64> = tg.times.iter().map(|t| (-t).exp()).collect();
        let (head, body) = tg.integrate(&vals);
        assert!((head + body - (1.0 - (-40f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn zero_and_constant_data_give_zero() {
        let g = grid();
        let (a, b) = identity_ops(g);
        let bump = DataSpec::GaussianBump { center: vec![3.0], width: 0.5, amplitude: 1.0, wave: vec![] }.build(&g).unwrap();
        let zero = GridFunction::zeros(g);
        let c = GridFunction::constant(g, C::new(2.0, 0.0));
        assert_eq!(embedding_lhs(&a, &b, &zero, &bump, TMax::Auto).unwrap().lhs, 0.0);
        let e = embedding_lhs(&a, &b, &bump, &c, TMax::Auto).unwrap();
        assert_eq!(e.lhs, 0.0);
        assert_eq!(e.tail_bound, 0.0);
    }

    #[test]
    fn single_mode_closed_form() {
        let g = grid();
        let (a, b) = identity_ops(g);
        let k = 3;
        let f = DataSpec::FourierMode { k: vec![k], amplitude: 1.0 }.build(&g).unwrap();
        let sigma = (2.0 - 2.0 * (g.h() * k as f64).cos()) / g.h().powi(2);
        let grad2: f64 = gradient_magnitude(&f).iter().map(|x| x * x).sum::<f64>() * g.cell_volume();
        let est = embedding_lhs(&a, &b, &f, &f, TMax::Auto).unwrap();
        let exact_tail = grad2 * (-2.0 * sigma * est.t_max).exp() / (2.0 * sigma);
        let expect = grad2 / (2.0 * sigma);
        assert!((est.lhs + exact_tail - expect).abs() < 1e-6 * expect, "{} vs {expect}", est.lhs);
        assert!(est.tail_bound >= exact_tail);
    }

    #[test]
    fn rhs_constants_and_homogeneity() {
        let g = grid();
        let pair = ConjugatePair::from_spec(FamilySpec::PowerLaw { p: 4.0 }).unwrap();
        let id = MatrixField::identity(1);
        let f = DataSpec::GaussianBump { center: vec![1.0], width: 0.4, amplitude: 1.0, wave: vec![] }.build(&g).unwrap();
        let vol = g.cell_volume();
        let nf = luxemburg_norm(&pair.phi, &f.magnitudes(), vol);
        let ng = luxemburg_norm(&pair.psi, &f.magnitudes(), vol);
        let r = embedding_rhs(&pair, &id, &id, &f, &f, RhsForm::Homogeneous).unwrap();
        assert!((r - 320.0 / 3.0 * nf * ng).abs() < 1e-9 * r);
        let r2 = embedding_rhs(&pair, &id, &id, &f.scale(C::new(2.0, 0.0)), &f, RhsForm::Homogeneous).unwrap();
        assert!((r2 - 2.0 * r).abs() < 1e-12 * r);
        let z = GridFunction::zeros(g);
        assert_eq!(embedding_rhs(&pair, &id, &id, &z, &f, RhsForm::Homogeneous).unwrap(), 0.0);
    }

    #[test]
    fn heat_flow_zero_data() {
        let g = grid();
        let (a, b) = identity_ops(g);
        let ctx = BellmanContext::identity(ConjugatePair::from_spec(FamilySpec::PowerLaw { p: 4.0 }).unwrap(), 1).unwrap();
        let z = GridFunction::zeros(g);
        for r in heat_flow_check(&ctx, &a, &b, &z, &z, &HeatFlowOptions::default()).unwrap() {
            assert_eq!(r.min_margin, 0.0, "{r:?}");
            assert!(r.pass);
        }
    }

    #[test]
    fn heat_flow_power_law_bump() {
        let cfg = bump_config();
        let p = prepare(&cfg).unwrap();
        let ctx = BellmanContext::new(p.pair.clone(), p.a.clone(), p.b.clone()).unwrap();
        for r in heat_flow_check(&ctx, &p.op_a, &p.op_b, &p.f, &p.g, &HeatFlowOptions::default()).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn standard_run_has_positive_margins() {
        let run = verify_embedding(&bump_config()).unwrap();
        assert!(run.pass, "{run:#?}");
        assert!(run.margins.homogeneous > 0.0 && run.margins.dehomogenized > 0.0);
        assert!(run.lhs > 0.0 && run.records.len() > 100);
        assert!(run.time_series_csv().starts_with(EmbeddingRun::CSV_HEADER));
    }

    #[test]
    fn rotation_beyond_threshold_is_refused() {
        let mut cfg = bump_config();
        cfg.a = MatrixSpec::rotation(1.5, 1);
        let err = verify_embedding(&cfg).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "ellipticity", ref source } if matches!(**source, Error::NotPElliptic { .. })));
    }
}
