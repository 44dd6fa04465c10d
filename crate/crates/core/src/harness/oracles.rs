//! Reference values computed without the library's own machinery.

use crate::sampling::log_grid;

/// sup_{s>0} (s t − Φ(s)) by a dense log-grid scan refined with golden
/// section in ln s. Independent of any derivative inversion.
pub fn legendre_sup(phi: impl Fn(f64) -> f64, t: f64) -> f64 {
    let g = |ls: f64| {
        let s = ls.exp();
        s * t - phi(s)
    };
    let grid = log_grid(1e-12, 1e12, 4001);
    let (mut best, mut at) = (f64::NEG_INFINITY, 0);
    for (i, s) in grid.iter().enumerate() {
        let v = g(s.ln());
        if v > best {
            best = v;
            at = i;
        }
    }
    let (mut lo, mut hi) = (grid[at.saturating_sub(1)].ln(), grid[(at + 1).min(grid.len() - 1)].ln());
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - r * (hi - lo), lo + r * (hi - lo));
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = g(x1);
        }
    }
    best.max(f1).max(f2).max(0.0)
}

/// The Bellman function for Φ(s) = s^p/p, Ψ(t) = t^q/q in its explicit
/// two-branch form.
pub fn power_bellman(p: f64, delta: f64, a: f64, b: f64) -> f64 {
    let q = p / (p - 1.0);
    let (ap, bq) = (a.powf(p), b.powf(q));
    let extra = if ap >= bq {
        2.0 / p * ap + (2.0 / q - 1.0) * bq
    } else {
        a * a * b.powf(2.0 - q)
    };
    ap / p + bq / q + delta / (2.0 - q) * extra
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_of_power_law() {
        // (s^3/3)* = t^{3/2}/(3/2)
        for t in [1e-3, 0.5, 2.0, 1e3] {
            let got = legendre_sup(|s| s.powi(3) / 3.0, t);
            let exact = t.powf(1.5) / 1.5;
            assert!((got - exact).abs() < 1e-10 * exact, "{t}: {got} vs {exact}");
        }
    }

    #[test]
    fn power_bellman_branches_meet() {
        let (p, delta) = (4.0, 0.01);
        let a: f64 = 1.3;
        let b = a.powf(p - 1.0);
        let q = p / (p - 1.0);
        let upper = a.powf(p) / p + b.powf(q) / q + delta / (2.0 - q) * a * a * b.powf(2.0 - q);
        assert!((power_bellman(p, delta, a, b) - upper).abs() < 1e-12 * upper);
    }
}
