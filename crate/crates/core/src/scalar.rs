//! Golden-section search for convex functions of one variable.

/// Best point found by [`golden_section`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMin {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes a convex (hence unimodal) `f` over `[lo, hi]` until the bracket
/// is narrower than `tol`. Both endpoints are probed, and the best probed
/// point is returned, so minima at the boundary are found exactly.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> ScalarMin {
    assert!(lo <= hi, "empty bracket [{lo}, {hi}]");
    let mut best = ScalarMin {
        x: lo,
        value: f(lo),
        evaluations: 1,
    };
    let consider = |x: f64, v: f64, best: &mut ScalarMin| {
        best.evaluations += 1;
        if v < best.value {
            best.x = x;
            best.value = v;
        }
    };
    if hi == lo {
        return best;
    }
    let fhi = f(hi);
    consider(hi, fhi, &mut best);

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    consider(c, fc, &mut best);
    let mut fd = f(d);
    consider(d, fd, &mut best);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            if !(c > a && c < d) {
                break;
            }
            fc = f(c);
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            if !(d > c && d < b) {
                break;
            }
            fd = f(d);
            consider(d, fd, &mut best);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_quadratic() {
        let r = golden_section(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-10);
        assert!((r.x - 0.3).abs() < 1e-8);
        assert!((r.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kinked_and_boundary_minima() {
        let r = golden_section(|x| (x - 1.0).abs(), 0.0, 4.0, 1e-12);
        assert!((r.x - 1.0).abs() < 1e-11);
        let r = golden_section(|x| x, 0.0, 4.0, 1e-9);
        assert_eq!(r.x, 0.0);
        let r = golden_section(|x| -x, 0.0, 4.0, 1e-9);
        assert_eq!(r.x, 4.0);
        let r = golden_section(|x| x * x, 2.0, 2.0, 1e-9);
        assert_eq!((r.x, r.evaluations), (2.0, 1));
    }

    #[test]
    fn plateau() {
        let r = golden_section(|x: f64| (x - 1.0).max(0.0) + (2.0 - x).max(0.0), 0.0, 10.0, 1e-9);
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.x >= 1.0 - 1e-9 && r.x <= 2.0 + 1e-9);
    }
}
