use crate::error::{domain, Error, Result};

/// Relative tolerance for closed-form vs recurrence cross-checks.
pub const CROSS_CHECK_TOL: f64 = 1e-10;

/// Closed form of `Z^k_sigma`. Accepts `k = -1`, where it evaluates to 0.
pub fn z_closed_form(sigma: f64, k: i64) -> f64 {
    let r = (sigma * (1.0 + sigma)).sqrt();
    let (a, b) = (1.0 + sigma + r, 1.0 + sigma - r);
    let p = (k + 1) as i32;
    (a.powi(p) - b.powi(p)) / (2.0 * r)
}

/// `Z^0..Z^k` by the three-term recurrence, cross-checked against the
/// closed form.
pub fn z_sequence(sigma: f64, k: usize) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    let mut z = Vec::with_capacity(k + 1);
    z.push(1.0);
    if k >= 1 {
        z.push(2.0 * (1.0 + sigma));
    }
    for n in 2..=k {
        z.push((1.0 + sigma) * (2.0 * z[n - 1] - z[n - 2]));
    }
    for (n, &v) in z.iter().enumerate() {
        let c = z_closed_form(sigma, n as i64);
        if (v - c).abs() > CROSS_CHECK_TOL * v.abs().max(c.abs()) {
            return Err(Error::Consistency(format!(
                "Z^{n} recurrence {v} disagrees with closed form {c} (sigma = {sigma})"
            )));
        }
    }
    Ok(z)
}

/// Number of reaction-delay windows needed to cover `[0, 2 tau]`,
/// `K = ceil(2 tau / sigma)`. Ratios within 1e-9 of an integer are rounded so
/// that `sigma = tau` gives exactly 2.
pub fn window_count(sigma: f64, tau: f64) -> Result<usize> {
    if !(sigma > 0.0) {
        return Err(domain(format!("window count needs sigma > 0, got {sigma}")));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(domain(format!("tau must be finite and >= 0, got {tau}")));
    }
    let r = 2.0 * tau / sigma;
    let near = r.round();
    let k = if (r - near).abs() <= 1e-9 * r.max(1.0) { near } else { r.ceil() };
    Ok(k as usize)
}

/// Amplification constant `Z^K + Z^{K-1} beta (1 - (1 + 2 tau) e^{-2 tau})`.
pub fn cal_z(sigma: f64, tau: f64, k: usize, beta: f64) -> Result<f64> {
    if k < 1 {
        return Err(domain("cal_z needs K >= 1"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(domain(format!("beta must be positive, got {beta}")));
    }
    let z = z_sequence(sigma, k)?;
    Ok(z[k] + z[k - 1] * beta * memory_weight(tau))
}

/// `1 - (1 + 2 tau) e^{-2 tau}`, the value of `int_0^{2 tau} u e^{-u} du`.
pub fn memory_weight(tau: f64) -> f64 {
    let x = 2.0 * tau;
    // -expm1(-x) - x e^{-x}, accurate for small tau
    -(-x).exp_m1() - x * (-x).exp()
}

/// Position bootstrap constant `Z^K - (1 + sigma)(Z^{K-1} + 1)`, checked
/// against `sigma * sum_{k=1}^{K-1} Z^k`.
pub fn cal_w(sigma: f64, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(domain("cal_w needs K >= 1"));
    }
    let z = z_sequence(sigma, k)?;
    let direct = z[k] - (1.0 + sigma) * (z[k - 1] + 1.0);
    let summed = sigma * z[1..k].iter().sum::<f64>();
    let scale = z[k].abs().max(1.0);
    if (direct - summed).abs() > CROSS_CHECK_TOL * scale {
        return Err(Error::Consistency(format!(
            "W^{k}: {direct} vs summed form {summed} (sigma = {sigma})"
        )));
    }
    Ok(summed)
}

/// Principal branch of the Lambert W function for `s >= 0`.
pub fn lambert_w(s: f64) -> Result<f64> {
    if !(s >= 0.0) || s.is_infinite() {
        return Err(domain(format!("lambert_w needs finite s >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let mut w = s.ln_1p();
    for _ in 0..100 {
        let ew = w.exp();
        let step = (w * ew - s) / (ew * (w + 1.0));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    Ok(w)
}

/// Largest total delay certified in the linear case `psi = 1` on the diagonal.
pub fn linear_threshold() -> f64 {
    0.5 * (1.0 - lambert_w(std::f64::consts::E / 2.0).expect("positive argument"))
}

/// Upper end `ln(2)/2` of the admissible delays.
pub fn tau_limit() -> f64 {
    0.5 * std::f64::consts::LN_2
}

/// Smallest `beta` with `4 tau <= beta (2 e^{-2 tau} - 1)`.
pub fn beta_min(tau: f64) -> Result<f64> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(domain(format!("tau must be finite and >= 0, got {tau}")));
    }
    let den = 2.0 * (-2.0 * tau).exp() - 1.0;
    if !(den > 0.0) {
        return Err(Error::Hypothesis(format!(
            "no admissible beta for tau = {tau} (needs tau < ln(2)/2)"
        )));
    }
    Ok(4.0 * tau / den)
}

/// `e^{x tau}(e^{x tau} alpha + gamma) + x - eta`.
pub fn halanay_residual(x: f64, alpha: f64, gamma: f64, eta: f64, tau: f64) -> f64 {
    let e = (x * tau).exp();
    e * (e * alpha + gamma) + x - eta
}

/// Decay rate `Gamma in (0, eta]` solving the Halanay equation.
///
/// `alpha = gamma = 0` is allowed and gives `Gamma = eta`.
pub fn halanay_gamma(alpha: f64, gamma: f64, eta: f64, tau: f64) -> Result<f64> {
    for (name, v) in [("alpha", alpha), ("gamma", gamma), ("eta", eta), ("tau", tau)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(domain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    if !(alpha + gamma < eta) {
        return Err(Error::Hypothesis(format!(
            "alpha + gamma must be below eta ({alpha} + {gamma} >= {eta})"
        )));
    }
    if tau == 0.0 || (alpha == 0.0 && gamma == 0.0) {
        return Ok(eta - (alpha + gamma));
    }
    let f = |x: f64| halanay_residual(x, alpha, gamma, eta, tau);
    let (mut lo, mut hi) = (0.0, eta);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || hi - lo <= f64::EPSILON * eta {
            break;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let e = (mid * tau).exp();
    let slope = 2.0 * alpha * tau * e * e + gamma * tau * e + 1.0;
    let polished = mid - f(mid) / slope;
    if polished > lo && polished < hi && f(polished).abs() <= f(mid).abs() {
        Ok(polished)
    } else {
        Ok(mid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn z_spot_values() {
        for s in [0.01, 0.5, 2.0] {
            let z = z_sequence(s, 1).unwrap();
            assert_eq!(z[0], 1.0);
            assert_eq!(z[1], 2.0 * (1.0 + s));
        }
        assert_relative_eq!(z_sequence(1.0, 2).unwrap()[2], 14.0, max_relative = 1e-15);
        assert!(z_sequence(0.0, 3).is_err());
        assert_eq!(z_closed_form(0.3, -1), 0.0);
    }

    #[test]
    fn defining_recurrence_holds() {
        // Z^K = Z^0 + (1 + s) Z^{K-1} + s sum_{k<K} Z^k
        let s = 0.37;
        let z = z_sequence(s, 12).unwrap();
        for k in 1..=12 {
            let rhs = 1.0 + (1.0 + s) * z[k - 1] + s * z[..k].iter().sum::<f64>();
            assert_relative_eq!(z[k], rhs, max_relative = 1e-13);
        }
    }

    #[test]
    fn cal_z_and_w_examples() {
        let want = 14.0 + 4.0 * (1.0 - 3.0 * (-2.0f64).exp());
        assert_relative_eq!(cal_z(1.0, 1.0, 2, 1.0).unwrap(), want, max_relative = 1e-12);
        assert_relative_eq!(cal_z(0.4, 0.0, 3, 5.0).unwrap(), z_sequence(0.4, 3).unwrap()[3]);
        assert_eq!(cal_w(0.7, 1).unwrap(), 0.0);
        assert_relative_eq!(cal_w(1.0, 2).unwrap(), 4.0, max_relative = 1e-15);
        let z = z_sequence(0.5, 3).unwrap();
        let direct = z[3] - 1.5 * (z[2] + 1.0);
        assert!((cal_w(0.5, 3).unwrap() - direct).abs() <= 1e-12);
    }

    #[test]
    fn window_count_rounds_near_integers() {
        assert_eq!(window_count(0.1, 0.1).unwrap(), 2);
        assert_eq!(window_count(0.1, 0.3).unwrap(), 6);
        assert_eq!(window_count(0.02, 0.1).unwrap(), 10);
        assert_eq!(window_count(0.3, 0.4).unwrap(), 3);
        assert!(window_count(0.0, 0.1).is_err());
    }

    #[test]
    fn lambert_w_values() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert_relative_eq!(lambert_w(std::f64::consts::E).unwrap(), 1.0, max_relative = 1e-14);
        let w = lambert_w(std::f64::consts::E / 2.0).unwrap();
        assert_relative_eq!(w * w.exp(), std::f64::consts::E / 2.0, max_relative = 1e-14);
        assert!((w - 0.685_077).abs() < 1e-6);
        assert!((linear_threshold() - 0.157).abs() < 5e-3);
        for s in [1e-8, 0.3, 10.0, 1e6] {
            let w = lambert_w(s).unwrap();
            assert!((w * w.exp() - s).abs() <= 1e-13 * s.max(1.0));
        }
    }

    #[test]
    fn beta_min_values() {
        assert_eq!(beta_min(0.0).unwrap(), 0.0);
        let want = 0.4 / (2.0 * (-0.2f64).exp() - 1.0);
        assert_relative_eq!(beta_min(0.1).unwrap(), want, max_relative = 1e-15);
        assert!((beta_min(0.1).unwrap() - 0.62749).abs() < 1e-5);
        let b = beta_min(0.346).unwrap();
        assert!(b.is_finite() && b > 100.0);
        assert!(matches!(beta_min(0.35), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn halanay_examples() {
        assert_eq!(halanay_gamma(0.1, 0.2, 1.0, 0.0).unwrap(), 0.7);
        let g = halanay_gamma(0.4, 0.3, 1.0, 0.1).unwrap();
        assert!(halanay_residual(0.0, 0.4, 0.3, 1.0, 0.1) < 0.0);
        assert!(halanay_residual(0.3, 0.4, 0.3, 1.0, 0.1) > 0.0);
        assert!(g > 0.0 && g < 0.3);
        assert!(halanay_residual(g, 0.4, 0.3, 1.0, 0.1).abs() <= 1e-12);
        assert!(matches!(halanay_gamma(0.5, 0.6, 1.0, 0.1), Err(Error::Hypothesis(_))));
        assert_eq!(halanay_gamma(0.0, 0.0, 0.8, 0.3).unwrap(), 0.8);
    }
}
