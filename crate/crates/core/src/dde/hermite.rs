//! Cubic Hermite interpolation on one interval.

/// Value of the cubic Hermite interpolant at `theta in [0, 1]`.
#[inline]
pub(crate) fn value(theta: f64, dt: f64, y0: f64, m0: f64, y1: f64, m1: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * dt * m0 + h01 * y1 + h11 * dt * m1
}

/// Time derivative of the same interpolant.
#[inline]
pub(crate) fn slope(theta: f64, dt: f64, y0: f64, m0: f64, y1: f64, m1: f64) -> f64 {
    let t2 = theta * theta;
    let d00 = 6.0 * t2 - 6.0 * theta;
    let d10 = 3.0 * t2 - 4.0 * theta + 1.0;
    let d01 = -d00;
    let d11 = 3.0 * t2 - 2.0 * theta;
    (d00 * y0 + d01 * y1) / dt + d10 * m0 + d11 * m1
}

/// Interpolates a whole state vector between two knots.
pub(crate) fn fill(
    theta: f64,
    dt: f64,
    y0: &[f64],
    m0: &[f64],
    y1: &[f64],
    m1: &[f64],
    out: &mut [f64],
    derivative: bool,
) {
    if theta == 0.0 && !derivative {
        out.copy_from_slice(y0);
        return;
    }
    for k in 0..out.len() {
        out[k] = if derivative {
            slope(theta, dt, y0[k], m0[k], y1[k], m1[k])
        } else {
            value(theta, dt, y0[k], m0[k], y1[k], m1[k])
        };
    }
}
