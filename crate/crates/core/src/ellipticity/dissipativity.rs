//! Pointwise dissipativity condition for matrices with symmetric imaginary part.
//!
//! With x(s) = sΦ″(s)/Φ′(s), the condition divided by Φ′(s)/s reads
//!
//! ```text
//! |x(s) − 1|·|⟨Im A ξ, ξ⟩| ≤ 2 x(s)^{1/2} ⟨Re A ξ, ξ⟩,   ξ ∈ ℝ^d,
//! ```
//!
//! which for Φ = s^p/p is literally the power-case condition with x ≡ p − 1.

use serde::Serialize;

use super::MatrixField;
use crate::error::{Error, Result};
use crate::report::MarginReport;
use crate::sampling::{log_grid, sample_rng, unit_real_vector};
use crate::young::{ConjugatePair, Family};

#[derive(Debug, Clone, Serialize)]
pub struct CmReport {
    pub margin: MarginReport,
    /// For power laws: largest |margin − power-case margin| over all samples.
    pub power_law_deviation: Option<f64>,
}

const S_POINTS: usize = 400;

/// Minimum of RHS − LHS over `samples` random real unit ξ, all grid points
/// (cycled) and a log grid of s.
pub fn cm_dissipativity_check(a: &MatrixField, pair: &ConjugatePair, samples: usize, seed: u64) -> Result<CmReport> {
    for (k, m) in a.matrices().enumerate() {
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)].im - m[(j, i)].im).abs() > 1e-12 * scale {
                    return Err(Error::Inapplicable(format!(
                        "Im {} is not symmetric at grid point {k}",
                        a.name()
                    )));
                }
            }
        }
    }
    let phi = &pair.phi;
    let window = phi.scan_window();
    let xs: Vec<f64> = log_grid(window.lo, window.hi, S_POINTS)
        .into_iter()
        .map(|s| s * phi.d2(s) / phi.d1(s))
        .collect();
    let power = match *phi.family() {
        Family::PowerLaw { p } => Some(p),
        _ => None,
    };
    let d = a.dim();
    let npts = a.len();
    let mut worst = f64::INFINITY;
    let mut argmin = Vec::new();
    let mut deviation: f64 = 0.0;
    for i in 0..samples {
        let mut rng = sample_rng(seed, i as u64);
        let xi = unit_real_vector(&mut rng, d);
        let m = a.at(i % npts);
        let (mut re_q, mut im_q) = (0.0, 0.0);
        for r in 0..d {
            for c in 0..d {
                re_q += m[(r, c)].re * xi[r] * xi[c];
                im_q += m[(r, c)].im * xi[r] * xi[c];
            }
        }
        for (k, &x) in xs.iter().enumerate() {
            let margin = 2.0 * x.sqrt() * re_q - (x - 1.0).abs() * im_q.abs();
            if let Some(p) = power {
                let reference = 2.0 * (p - 1.0).sqrt() * re_q - (p - 2.0).abs() * im_q.abs();
                deviation = deviation.max((margin - reference).abs());
            }
            if margin < worst {
                worst = margin;
                argmin = xi.iter().copied().chain([k as f64]).collect();
            }
        }
    }
    Ok(CmReport {
        margin: MarginReport::new(format!("dissipativity[{}]", a.name()), samples, worst, argmin, 0.0),
        power_law_deviation: power.map(|_| deviation),
    })
}
