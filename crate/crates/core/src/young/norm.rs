use super::YoungFunction;

/// Luxemburg norm `inf{α > 0 : Σ Φ(|fᵢ|/α)·vol ≤ 1}` of sampled magnitudes.
///
/// The modular is continuous and strictly decreasing in α wherever it is
/// positive, so the infimum is the unique root of `modular(α) = 1`, found by
/// bisection in `ln α` to relative accuracy 1e-13.
pub fn luxemburg_norm(phi: &YoungFunction, magnitudes: &[f64], cell_volume: f64) -> f64 {
    let peak = magnitudes.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let modular = |alpha: f64| -> f64 {
        let s: f64 = magnitudes.iter().map(|&x| phi.eval(x.abs() / alpha)).sum();
        // an evaluator failure only happens for huge arguments
        if s.is_nan() {
            f64::INFINITY
        } else {
            s * cell_volume
        }
    };
    let mut hi = peak;
    while modular(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    while modular(lo) <= 1.0 {
        lo *= 0.5;
    }
    while hi / lo - 1.0 > 1e-13 {
        let mid = (lo * hi).sqrt();
        if modular(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::{conjugate, make_family, FamilySpec};

    #[test]
    fn zero_function() {
        let phi = make_family(FamilySpec::PowerLaw { p: 4.0 }).unwrap();
        assert_eq!(luxemburg_norm(&phi, &[0.0; 5], 0.1), 0.0);
    }

    #[test]
    fn indicator_of_unit_measure() {
        // Φ(c/α) = 1 on a set of measure 1 gives α = c / 4^{1/4}
        let phi = make_family(FamilySpec::PowerLaw { p: 4.0 }).unwrap();
        let c = 3.0;
        let n = luxemburg_norm(&phi, &[c; 4], 0.25);
        assert!((n - c / 4f64.powf(0.25)).abs() < 1e-12 * n);
    }

    #[test]
    fn homogeneous() {
        let phi = make_family(FamilySpec::ZygmundLog { r: 3.0 }).unwrap();
        let psi = conjugate(&phi);
        let f: Vec<f64> = (0..50).map(|i| ((i * 37 % 11) as f64 * 0.3).sin().abs()).collect();
        let f2: Vec<f64> = f.iter().map(|x| 2.0 * x).collect();
        for g in [&phi, &psi] {
            let a = luxemburg_norm(g, &f, 0.1);
            let b = luxemburg_norm(g, &f2, 0.1);
            assert!((b - 2.0 * a).abs() < 1e-10 * b);
        }
    }
}
