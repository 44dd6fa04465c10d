//! Dense log-grid scans for inf/sup of smooth ratios on (0, ∞).

/// Evaluation window for the inf/sup scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanWindow {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl ScanWindow {
    /// Window for closed-form evaluators.
    pub const CLOSED: ScanWindow = ScanWindow {
        lo: 1e-12,
        hi: 1e12,
        points: 20_000,
    };

    pub fn grid(&self) -> Vec<f64> {
        crate::sampling::log_grid(self.lo, self.hi, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrema {
    pub inf: f64,
    pub inf_at: f64,
    pub sup: f64,
    pub sup_at: f64,
    /// The grid minimum sat on the window edge, so the true infimum may
    /// lie outside the scanned range.
    pub inf_on_boundary: bool,
    pub sup_on_boundary: bool,
}

/// Golden-section search for the minimum of `f(exp(x))` on `[a, b]`.
fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c.exp());
    let mut fd = f(d.exp());
    for _ in 0..80 {
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d.exp());
        }
    }
    if fc < fd {
        (c.exp(), fc)
    } else {
        (d.exp(), fd)
    }
}

/// Scans `ratio` on the window and refines both extrema by a golden-section
/// search between the neighbours of the best grid node.
pub fn scan_extrema<F: Fn(f64) -> f64>(ratio: F, window: ScanWindow) -> Extrema {
    let grid = window.grid();
    let values: Vec<f64> = grid.iter().map(|&s| ratio(s)).collect();
    let mut imin = 0;
    let mut imax = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[imin] {
            imin = i;
        }
        if *v > values[imax] {
            imax = i;
        }
    }
    let last = grid.len() - 1;
    let refine = |i: usize, sign: f64| -> (f64, f64) {
        let a = grid[i.saturating_sub(1)].ln();
        let b = grid[(i + 1).min(last)].ln();
        let (at, v) = golden_min(&|s| sign * ratio(s), a, b);
        let grid_v = sign * values[i];
        if v < grid_v {
            (at, sign * v)
        } else {
            (grid[i], values[i])
        }
    };
    let (inf_at, inf) = refine(imin, 1.0);
    let (sup_at, sup) = refine(imax, -1.0);
    Extrema {
        inf,
        inf_at,
        sup,
        sup_at,
        inf_on_boundary: imin == 0 || imin == last,
        sup_on_boundary: imax == 0 || imax == last,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_extremum_refined() {
        // peak of s/(1+s^2) at s = 1 with value 1/2
        let e = scan_extrema(
            |s| s / (1.0 + s * s),
            ScanWindow { lo: 1e-3, hi: 1e3, points: 101 },
        );
        assert!((e.sup - 0.5).abs() < 1e-14);
        assert!((e.sup_at - 1.0).abs() < 1e-6);
        assert!(!e.sup_on_boundary);
        assert!(e.inf_on_boundary);
    }
}
