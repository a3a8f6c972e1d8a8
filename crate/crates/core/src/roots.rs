//! Bracketed bisection.

use crate::error::{CfsError, Result};

/// Root of a monotone `f` on `[lo, hi]` to absolute tolerance `tol`.
///
/// The direction is read from the endpoint signs; an endpoint that is
/// already a root is returned as is.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(CfsError::RootOutsideBracket { lo, hi });
    }
    let neg_at_a = fa < 0.0;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
