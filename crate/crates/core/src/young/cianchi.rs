use serde::Serialize;

use super::YoungFunction;
use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::quad::QuadOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CianchiVerdict {
    Convergent,
    Divergent,
    Indeterminate,
}

const BLOCKS: usize = 60;
const TAIL: usize = 12;

/// Tests convergence of `∫₁^∞ Φ(s)/s^{p+1} ds` from the dyadic block sums
/// `b_k = ∫_{2^k}^{2^{k+1}}`. Late ratios `b_{k+1}/b_k` all at most 0.9 mean
/// a geometric tail; all at least 0.99 mean the blocks do not decay.
pub fn cianchi_probe(phi: &YoungFunction, p: f64) -> Result<CianchiVerdict> {
    if !(p > 2.0) {
        return Err(Error::ExponentBelowTwo(p));
    }
    let ln2 = std::f64::consts::LN_2;
    let blocks: Vec<f64> = (0..BLOCKS)
        .map(|k| {
            let a = k as f64 * ln2;
            integrate(
                |y: f64| {
                    let s = y.exp();
                    phi.eval(s) * s.powf(-p)
                },
                a,
                a + ln2,
                QuadOptions { rel_tol: 1e-10, ..Default::default() },
            )
            .map(|r| r.value)
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = blocks.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len() - TAIL..];
    Ok(if tail.iter().all(|&r| r <= 0.9) {
        CianchiVerdict::Convergent
    } else if tail.iter().all(|&r| r >= 0.99) {
        CianchiVerdict::Divergent
    } else {
        CianchiVerdict::Indeterminate
    })
}
