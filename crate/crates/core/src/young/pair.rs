use serde::Serialize;

use super::aux::AuxIntegrals;
use super::scan::{scan_extrema, Extrema, ScanWindow};
use super::{conjugate, make_family, FamilySpec, Side, YoungFunction};
use crate::error::{Error, Result};

/// The four characteristic quantities and what follows from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharQuantities {
    /// inf sΦ′/Φ
    pub m: f64,
    /// sup sΦ′/Φ
    pub big_m: f64,
    /// inf sΦ″/Φ′
    pub m_tilde: f64,
    /// sup sΦ″/Φ′
    pub big_m_tilde: f64,
    /// Ellipticity exponent, M̃ + 1.
    pub p: f64,
    /// max{1, M/m̃} · (m̃(M̃−1) / (M̃(m̃−1)))^{1/2}
    pub d: f64,
    pub numeric_tolerance: f64,
    #[serde(skip)]
    pub window: ScanWindow,
    /// Per quantity (m, M, m̃, M̃): extremum found on the window edge.
    pub on_boundary: [bool; 4],
}

impl CharQuantities {
    pub fn from_values(m: f64, big_m: f64, m_tilde: f64, big_m_tilde: f64) -> Self {
        let d = (1f64).max(big_m / m_tilde)
            * ((m_tilde / big_m_tilde) * (big_m_tilde - 1.0) / (m_tilde - 1.0)).sqrt();
        Self {
            m,
            big_m,
            m_tilde,
            big_m_tilde,
            p: big_m_tilde + 1.0,
            d,
            numeric_tolerance: 0.0,
            window: ScanWindow::CLOSED,
            on_boundary: [false; 4],
        }
    }

    /// Coefficient of |ζ||η| in the generalized-convexity lower bound,
    /// (1/10)(M̃(m̃−1) / (m̃(M̃−1)))^{1/2} before division by C_p.
    pub fn convexity_factor(&self) -> f64 {
        0.1 * ((self.big_m_tilde / self.m_tilde) * (self.m_tilde - 1.0)
            / (self.big_m_tilde - 1.0))
            .sqrt()
    }

    /// 2 max{1, M/m̃}, the size constant of the Bellman function.
    pub fn size_factor(&self) -> f64 {
        2.0 * (1f64).max(self.big_m / self.m_tilde)
    }
}

/// Scans sΦ′/Φ and sΦ″/Φ′ over the window to obtain (m, M, m̃, M̃).
pub fn char_quantities(phi: &YoungFunction) -> Result<CharQuantities> {
    let window = phi.scan_window();
    let growth: Extrema = scan_extrema(|s| s * phi.d1(s) / phi.eval(s), window);
    let convexity: Extrema = scan_extrema(|s| s * phi.d2(s) / phi.d1(s), window);
    for e in [&growth, &convexity] {
        if !(e.inf.is_finite() && e.sup.is_finite()) {
            return Err(Error::InvalidYoungPair {
                quantity: "ratio scan",
                value: f64::NAN,
                condition: "finite evaluators on the scan window",
            });
        }
    }
    if convexity.inf < 1.0 + 1e-9 {
        return Err(Error::InvalidYoungPair {
            quantity: "inf s Phi''/Phi'",
            value: convexity.inf,
            condition: "inf s Phi''/Phi' > 1",
        });
    }
    if growth.inf < 2.0 - 1e-9 {
        return Err(Error::InvalidYoungPair {
            quantity: "inf s Phi'/Phi",
            value: growth.inf,
            condition: "m >= 2",
        });
    }
    let mut q = CharQuantities::from_values(growth.inf, growth.sup, convexity.inf, convexity.sup);
    q.window = window;
    q.numeric_tolerance = if phi.is_numeric() { 1e-9 } else { 1e-12 };
    q.on_boundary = [
        growth.inf_on_boundary,
        growth.sup_on_boundary,
        convexity.inf_on_boundary,
        convexity.sup_on_boundary,
    ];
    Ok(q)
}

/// Mutually complementary Young functions with their characteristic
/// quantities and auxiliary integrals.
#[derive(Debug, Clone)]
pub struct ConjugatePair {
    pub phi: YoungFunction,
    pub psi: YoungFunction,
    pub quantities: CharQuantities,
    pub aux: AuxIntegrals,
}

impl ConjugatePair {
    pub fn from_spec(spec: FamilySpec) -> Result<Self> {
        let f = make_family(spec)?;
        match f.side() {
            Side::Phi => Self::from_phi(f),
            Side::Psi => Self::from_psi(f),
        }
    }

    pub fn from_phi(phi: YoungFunction) -> Result<Self> {
        let psi = conjugate(&phi);
        Self::assemble(phi, psi)
    }

    pub fn from_psi(psi: YoungFunction) -> Result<Self> {
        let phi = conjugate(&psi);
        Self::assemble(phi, psi)
    }

    fn assemble(phi: YoungFunction, psi: YoungFunction) -> Result<Self> {
        let quantities = char_quantities(&phi)?;
        let aux = AuxIntegrals::new(&phi, &psi, &quantities);
        Ok(Self {
            phi,
            psi,
            quantities,
            aux,
        })
    }

    /// I(t) = ∫₀ᵗ Φ′(s)/s² ds
    pub fn aux_i(&self, t: f64) -> Result<f64> {
        self.aux.i(t)
    }

    /// J(t) = ∫₀ᵗ ds/Ψ′(s)
    pub fn aux_j(&self, t: f64) -> Result<f64> {
        self.aux.j(t)
    }

    /// Both auxiliary integrals at the same argument.
    pub fn aux_integrals(&self, t: f64) -> Result<(f64, f64)> {
        Ok((self.aux_i(t)?, self.aux_j(t)?))
    }

    /// Returns a copy whose auxiliary integrals are served from
    /// interpolation tables on `[lo, hi]`.
    pub fn with_tables(&self, lo: f64, hi: f64) -> Result<Self> {
        let mut out = self.clone();
        out.aux = self.aux.tabulated(lo, hi)?;
        Ok(out)
    }

    pub fn describe(&self) -> String {
        format!("({}, {})", self.phi.describe(), self.psi.describe())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualQuantityRow {
    pub quantity: &'static str,
    pub computed: f64,
    pub expected: f64,
    /// (computed − expected) / expected
    pub discrepancy: f64,
}

/// Rescans the Ψ side independently and compares with the values implied
/// by (m, M, m̃, M̃).
pub fn verify_dual_quantities(pair: &ConjugatePair) -> Vec<DualQuantityRow> {
    let q = &pair.quantities;
    let psi = &pair.psi;
    let window = psi.scan_window();
    let growth = scan_extrema(|t| t * psi.d1(t) / psi.eval(t), window);
    let convexity = scan_extrema(|t| t * psi.d2(t) / psi.d1(t), window);
    let row = |quantity, computed: f64, expected: f64| DualQuantityRow {
        quantity,
        computed,
        expected,
        discrepancy: (computed - expected) / expected,
    };
    vec![
        row("inf t Psi'/Psi", growth.inf, q.big_m / (q.big_m - 1.0)),
        row("sup t Psi'/Psi", growth.sup, q.m / (q.m - 1.0)),
        row("inf t Psi''/Psi'", convexity.inf, 1.0 / q.big_m_tilde),
        row("sup t Psi''/Psi'", convexity.sup, 1.0 / q.m_tilde),
    ]
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DoublingReport {
    pub k_phi: f64,
    pub k_psi: f64,
    /// 2^M
    pub bound_phi: f64,
    /// 2^{m/(m−1)}
    pub bound_psi: f64,
    pub phi_within_bound: bool,
    pub psi_within_bound: bool,
}

/// Scans Φ(2s)/Φ(s) and Ψ(2s)/Ψ(s).
pub fn doubling_constants(pair: &ConjugatePair) -> DoublingReport {
    let q = &pair.quantities;
    let phi_w = pair.phi.scan_window();
    let psi_w = pair.psi.scan_window();
    let k_phi = scan_extrema(|s| pair.phi.eval(2.0 * s) / pair.phi.eval(s), phi_w).sup;
    let k_psi = scan_extrema(|s| pair.psi.eval(2.0 * s) / pair.psi.eval(s), psi_w).sup;
    let bound_phi = 2f64.powf(q.big_m);
    let bound_psi = 2f64.powf(q.m / (q.m - 1.0));
    let slack = 1.0 + 1e-9;
    DoublingReport {
        k_phi,
        k_psi,
        bound_phi,
        bound_psi,
        phi_within_bound: k_phi <= bound_phi * slack,
        psi_within_bound: k_psi <= bound_psi * slack && bound_psi <= 4.0 * slack,
    }
}
