//! One-dimensional bracketing searches.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` inside `(lo, hi)`, stopping
/// once the bracket is narrower than `width`. Endpoints are never evaluated.
///
/// Returns `(x_min, f_min)`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > width {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Locate the switch point of `below` on `[lo, hi]`, where `below(lo)` is
/// true and `below(hi)` is false, to a bracket of `width`. Returns the
/// bracket midpoint.
pub fn bisect(below: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, width: f64) -> Result<f64> {
    if !below(lo) || below(hi) {
        return Err(Error::NoSignChange { lo, hi });
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, fx) = golden_section_min(|x| (x - 0.3).powi(2) + 2.0, 0.0, 1.0, 1e-9);
        // a flat minimum only pins x to about sqrt(eps)
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn golden_on_monotone_goes_to_edge() {
        let (x, _) = golden_section_min(|x| -x, 0.0, 1.0, 1e-6);
        assert!(x > 1.0 - 1e-6 && x < 1.0);
    }

    #[test]
    fn bisect_cube_root() {
        let r = bisect(|x| x * x * x < 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
        assert!(matches!(bisect(|x| x < 5.0, 0.0, 2.0, 1e-3), Err(Error::NoSignChange { .. })));
    }
}
