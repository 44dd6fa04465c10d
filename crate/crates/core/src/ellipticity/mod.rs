//! Ellipticity constants of complex coefficient matrices.
//!
//! Every constant is the smallest (or largest) eigenvalue of an explicit real
//! symmetric matrix: a complex quadratic form Re⟨Aξ, ξ + c ξ̄⟩ in ξ = α + iβ
//! is a real quadratic form in (α, β) ∈ ℝ^{2d}.

mod dissipativity;
mod spec;

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::standard_normal;
use crate::young::{scan_extrema, ConjugatePair, YoungFunction};

pub use dissipativity::{cm_dissipativity_check, CmReport};
pub use spec::{MatrixSpec, NamedMatrix};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone)]
enum Values {
    Constant(CMatrix),
    /// One matrix per grid point, in grid order.
    Pointwise(Vec<CMatrix>),
}

/// A constant matrix or one matrix per grid point.
#[derive(Debug, Clone)]
pub struct MatrixField {
    name: String,
    dim: usize,
    values: Values,
    cached: OnceLock<(f64, f64)>,
}

impl MatrixField {
    pub fn constant(name: impl Into<String>, m: CMatrix) -> Result<Self> {
        check_matrix(&m)?;
        Ok(Self {
            name: name.into(),
            dim: m.nrows(),
            values: Values::Constant(m),
            cached: OnceLock::new(),
        })
    }

    pub fn pointwise(name: impl Into<String>, values: Vec<CMatrix>) -> Result<Self> {
        let first = values
            .first()
            .ok_or_else(|| Error::Config("empty matrix field".into()))?;
        let dim = first.nrows();
        for m in &values {
            check_matrix(m)?;
            if m.nrows() != dim {
                return Err(Error::Config("matrix field with mixed dimensions".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            dim,
            values: Values::Pointwise(values),
            cached: OnceLock::new(),
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::constant("I", CMatrix::identity(d, d)).expect("identity is finite")
    }

    /// e^{iφ} I_d
    pub fn rotation(phi: f64, d: usize) -> Self {
        let m = CMatrix::identity(d, d) * Complex64::from_polar(1.0, phi);
        Self::constant(format!("rotation({phi})"), m).expect("rotation is finite")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.values, Values::Constant(_))
    }

    /// Number of stored matrices (1 for a constant field).
    pub fn len(&self) -> usize {
        match &self.values {
            Values::Constant(_) => 1,
            Values::Pointwise(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Matrix at grid index `i`; constant fields ignore the index.
    pub fn at(&self, i: usize) -> &CMatrix {
        match &self.values {
            Values::Constant(m) => m,
            Values::Pointwise(v) => &v[i],
        }
    }

    pub fn matrices(&self) -> impl Iterator<Item = &CMatrix> {
        let slice: &[CMatrix] = match &self.values {
            Values::Constant(m) => std::slice::from_ref(m),
            Values::Pointwise(v) => v,
        };
        slice.iter()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let k = Complex64::new(factor, 0.0);
        let values = match &self.values {
            Values::Constant(m) => Values::Constant(m * k),
            Values::Pointwise(v) => Values::Pointwise(v.iter().map(|m| m * k).collect()),
        };
        Self {
            name: format!("{factor}*{}", self.name),
            dim: self.dim,
            values,
            cached: OnceLock::new(),
        }
    }

    fn lambdas(&self) -> (f64, f64) {
        *self.cached.get_or_init(|| {
            let lo = self.matrices().map(hermitian_min_eig).fold(f64::INFINITY, f64::min);
            let hi = self.matrices().map(max_singular_value).fold(0.0, f64::max);
            (lo, hi)
        })
    }
}

fn check_matrix(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Config(format!("matrix must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Config("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// `[[Re A, −Im A], [Im A, Re A]]`, the action of A on (Re ξ, Im ξ).
pub fn real_embedding(a: &CMatrix) -> DMatrix<f64> {
    let d = a.nrows();
    DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = a[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn min_sym_eig(s: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(s).eigenvalues.min()
}

/// Smallest eigenvalue of (A + A*)/2, i.e. min over unit ξ of Re⟨Aξ, ξ⟩.
pub fn hermitian_min_eig(a: &CMatrix) -> f64 {
    let r = real_embedding(a);
    min_sym_eig((&r + r.transpose()) * 0.5)
}

pub fn max_singular_value(a: &CMatrix) -> f64 {
    a.clone().svd(false, false).singular_values.max()
}

/// The symmetric 2d×2d matrix of ξ ↦ Re⟨Aξ, ξ + c ξ̄⟩ in (α, β).
pub fn form_matrix(a: &CMatrix, c: f64) -> DMatrix<f64> {
    let d = a.nrows();
    // Re(ξᵀAξ) = αᵀRα − βᵀRβ − αᵀIβ − βᵀIα
    let conj_part = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = a[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) => z.re,
            (false, false) => -z.re,
            _ => -z.im,
        }
    });
    let m = real_embedding(a) + conj_part * c;
    (&m + m.transpose()) * 0.5
}

/// min over unit ξ of Re⟨Aξ, ξ + c ξ̄⟩.
pub fn form_min(a: &CMatrix, c: f64) -> f64 {
    min_sym_eig(form_matrix(a, c))
}

/// |1 − 2/p|
pub fn p_coefficient(p: f64) -> f64 {
    (1.0 - 2.0 / p).abs()
}

/// λ(A): minimum over grid points of the smallest eigenvalue of the Hermitian part.
pub fn lambda_min(a: &MatrixField) -> f64 {
    a.lambdas().0
}

/// Λ(A): maximum over grid points of the largest singular value.
pub fn lambda_max_norm(a: &MatrixField) -> f64 {
    a.lambdas().1
}

/// Δ_p(A) for p ≥ 2.
pub fn delta_p(a: &MatrixField, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::ExponentBelowTwo(p));
    }
    let c = p_coefficient(p);
    Ok(a.matrices().map(|m| form_min(m, c)).fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeltaPhi {
    pub value: f64,
    /// s at which the extreme coefficient was found
    pub at_s: f64,
    pub coefficient: f64,
    pub on_boundary: bool,
}

/// Δ_Φ(A) with the coefficient (sΦ″ − Φ′)/(sΦ″ + Φ′) scanned over s.
///
/// For fixed ξ the form is affine in the coefficient, so the infimum over s
/// is attained where the coefficient is extreme; both scan extremes are
/// tested.
pub fn delta_phi(a: &MatrixField, f: &YoungFunction) -> DeltaPhi {
    let window = f.scan_window();
    let coefficient = |s: f64| {
        let (d1, d2) = (f.d1(s), f.d2(s));
        (s * d2 - d1) / (s * d2 + d1)
    };
    let e = scan_extrema(coefficient, window);
    let mut best = DeltaPhi { value: f64::INFINITY, at_s: f64::NAN, coefficient: f64::NAN, on_boundary: false };
    for (c, s, edge) in [(e.inf, e.inf_at, e.inf_on_boundary), (e.sup, e.sup_at, e.sup_on_boundary)] {
        let v = a.matrices().map(|m| form_min(m, c)).fold(f64::INFINITY, f64::min);
        if v < best.value {
            best = DeltaPhi { value: v, at_s: s, coefficient: c, on_boundary: edge };
        }
    }
    best
}

fn require_p_elliptic(a: &MatrixField, p: f64) -> Result<f64> {
    let d = delta_p(a, p)?;
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::NotPElliptic { matrix: a.name.clone(), p, delta: d })
    }
}

/// C_p(A, B) = max Λ / (min Δ_p · min λ).
pub fn c_p_constant(a: &MatrixField, b: &MatrixField, p: f64) -> Result<f64> {
    let (da, db) = (require_p_elliptic(a, p)?, require_p_elliptic(b, p)?);
    let big = lambda_max_norm(a).max(lambda_max_norm(b));
    Ok(big / (da.min(db) * lambda_min(a).min(lambda_min(b))))
}

/// δ = ((m̃−1)/m̃)·min{Δ_p(A)/(8Λ(A)), Δ_p(B)/(4Λ(B)), λ(A)Δ_p(B)/(100 max{Λ(A)², Λ(B)²})}
pub fn delta_param(a: &MatrixField, b: &MatrixField, pair: &ConjugatePair) -> Result<f64> {
    let q = &pair.quantities;
    let (da, db) = (require_p_elliptic(a, q.p)?, require_p_elliptic(b, q.p)?);
    let (la, lb) = (lambda_max_norm(a), lambda_max_norm(b));
    let terms = [
        da / (8.0 * la),
        db / (4.0 * lb),
        lambda_min(a) * db / (100.0 * la.max(lb).powi(2)),
    ];
    Ok((q.m_tilde - 1.0) / q.m_tilde * terms.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MatrixConstants {
    pub lambda: f64,
    pub big_lambda: f64,
    pub delta_p: f64,
    pub delta_phi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    pub a_name: String,
    pub b_name: String,
    pub a: MatrixConstants,
    /// For B the Young-function constant is computed from Ψ.
    pub b: MatrixConstants,
    pub p: f64,
    pub c_p: f64,
    pub delta_param: f64,
}

impl EllipticityReport {
    pub fn compute(a: &MatrixField, b: &MatrixField, pair: &ConjugatePair) -> Result<Self> {
        let p = pair.quantities.p;
        let consts = |m: &MatrixField, f: &YoungFunction| -> Result<MatrixConstants> {
            Ok(MatrixConstants {
                lambda: lambda_min(m),
                big_lambda: lambda_max_norm(m),
                delta_p: delta_p(m, p)?,
                delta_phi: delta_phi(m, f).value,
            })
        };
        Ok(Self {
            a_name: a.name.clone(),
            b_name: b.name.clone(),
            a: consts(a, &pair.phi)?,
            b: consts(b, &pair.psi)?,
            p,
            c_p: c_p_constant(a, b, p)?,
            delta_param: delta_param(a, b, pair)?,
        })
    }

    /// `(name, value)` rows for CSV output.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (tag, m) in [("A", &self.a), ("B", &self.b)] {
            out.push((format!("lambda({tag})"), m.lambda));
            out.push((format!("Lambda({tag})"), m.big_lambda));
            out.push((format!("Delta_p({tag})"), m.delta_p));
            out.push((format!("Delta_young({tag})"), m.delta_phi));
        }
        out.push(("p".into(), self.p));
        out.push(("C_p".into(), self.c_p));
        out.push(("delta".into(), self.delta_param));
        out
    }
}

/// I + 0.35·G with G complex Gaussian, redrawn until Δ_p ≥ 0.1.
pub fn random_elliptic<R: Rng>(rng: &mut R, d: usize, p: f64) -> CMatrix {
    loop {
        let m = CMatrix::from_fn(d, d, |i, j| {
            let g = Complex64::new(standard_normal(rng), standard_normal(rng)) * 0.35;
            if i == j {
                g + 1.0
            } else {
                g
            }
        });
        if form_min(&m, p_coefficient(p)) >= 0.1 {
            return m;
        }
    }
}
