//! Approximation bounds, concentration bounds and the constants that size
//! bands and intervals.

use serde::Serialize;

use crate::binomial::{binomial_small, falling_factorial};
use crate::error::{check_alpha, Error, Result};
use crate::functions::sigma;
use crate::smoothness::SmoothnessSpec;

/// `tau(eps) = (1 + eps) ln(1 + eps) - eps`.
pub fn tau(eps: f64) -> Result<f64> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::invalid("eps", format!("{eps} must be non-negative")));
    }
    Ok(tau_unchecked(eps))
}

fn tau_unchecked(eps: f64) -> f64 {
    if eps < 0.01 {
        // sum_{j >= 2} (-1)^j eps^j / (j (j - 1))
        let mut term = eps * eps;
        let mut acc = 0.0;
        for j in 2..14 {
            let jf = j as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / (jf * (jf - 1.0));
            term *= eps;
        }
        acc
    } else {
        (1.0 + eps) * eps.ln_1p() - eps
    }
}

/// The `eps >= 0` with `tau(eps) = y`, by bisection.
pub fn tau_inverse(y: f64) -> Result<f64> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::invalid("y", format!("{y} must be non-negative")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0 + 2.0 * std::f64::consts::E * y.sqrt();
    while tau_unchecked(hi) < y {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tau_unchecked(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Binary relative entropy `theta ln(theta / x) + (1 - theta) ln((1 - theta) / (1 - x))`.
pub fn entropy_r(x: f64, theta: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::invalid("x", format!("{x} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid("theta", format!("{theta} must lie in [0, 1]")));
    }
    let term = |t: f64, p: f64| if t == 0.0 { 0.0 } else { t * (t / p).ln() };
    Ok((term(theta, x) + term(1.0 - theta, 1.0 - x)).max(0.0))
}

/// A probability bound as computed, and clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityBound {
    pub raw: f64,
    pub clamped: f64,
}

impl ProbabilityBound {
    pub fn new(raw: f64) -> Self {
        Self {
            raw,
            clamped: raw.clamp(0.0, 1.0),
        }
    }
}

/// `P(sup |Y_n - F| > delta) <= 2 exp(-2 n delta^2)`.
pub fn dkw_bound(n: usize, delta: f64) -> Result<ProbabilityBound> {
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be positive"));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::invalid("delta", format!("{delta} must be non-negative")));
    }
    Ok(ProbabilityBound::new(2.0 * (-2.0 * n as f64 * delta * delta).exp()))
}

/// Half-width solving `2 exp(-2 n delta^2) = alpha`.
pub fn dkw_half_width(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Pointwise and uniform approximation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBound {
    pub pointwise: Option<f64>,
    pub uniform: Option<f64>,
}

impl ErrorBound {
    pub fn pointwise(&self) -> Result<f64> {
        self.pointwise
            .ok_or_else(|| Error::invalid("x", "a pointwise bound needs an evaluation point"))
    }
}

/// Bounds on `|B_{m,k}(f; x) - f(x)|` from the first modulus at `1/m` and
/// the second moduli: `omega_2(f; sigma(x)/sqrt(m))` for the pointwise bound
/// and `omega_2^sigma(f; 1/sqrt(m))` for the uniform one.
///
/// pointwise: `2k omega(f; 1/m) + 3/2 omega_2(f; sigma(x)/sqrt(m))`;
/// uniform: `2k omega(f; 1/m) + 5/2 omega_2^sigma(f; 1/sqrt(m))`.
pub fn kantorovich_error_bound(
    k: usize,
    m: usize,
    omega1: f64,
    omega2_local: Option<f64>,
    omega2_dt: Option<f64>,
) -> Result<ErrorBound> {
    if m <= k {
        return Err(Error::DegreeNotAboveOrder { m, k });
    }
    let shift = 2.0 * k as f64 * if k == 0 { 0.0 } else { omega1 };
    Ok(ErrorBound {
        pointwise: omega2_local.map(|w| shift + 1.5 * w),
        uniform: omega2_dt.map(|w| shift + 2.5 * w),
    })
}

/// Bounds for `B_{m,k}` acting on `F^(order)`, with moduli from `spec`.
pub fn kantorovich_error_bound_for(
    spec: &SmoothnessSpec,
    order: usize,
    k: usize,
    m: usize,
    x: Option<f64>,
) -> Result<ErrorBound> {
    if m == 0 || m <= k {
        return Err(Error::DegreeNotAboveOrder { m, k });
    }
    let mf = m as f64;
    let omega1 = if k == 0 { 0.0 } else { spec.omega(order, 1.0 / mf)? };
    let local = match x {
        Some(x) => {
            crate::error::check_unit(x)?;
            Some(spec.omega2(order, sigma(x) / mf.sqrt())?)
        }
        None => None,
    };
    let dt = spec.omega2_dt(order, 1.0 / mf.sqrt())?;
    kantorovich_error_bound(k, m, omega1, local, Some(dt))
}

/// Bounds on `|B_m(F; x) - F(x)|`: `3/2 omega_2(F; sigma(x)/sqrt(m))`
/// pointwise and `5/2 omega_2^sigma(F; 1/sqrt(m))` uniformly.
pub fn bernstein_error_bound(spec: &SmoothnessSpec, m: usize, x: Option<f64>) -> Result<ErrorBound> {
    kantorovich_error_bound_for(spec, 0, 0, m, x)
}

/// Admissible window `(m a / (m - k), (m b - k) / (m - k))` for the
/// flat-region bound.
pub fn flat_region_window(m: usize, k: usize, a: f64, b: f64) -> Result<(f64, f64)> {
    if m <= k {
        return Err(Error::DegreeNotAboveOrder { m, k });
    }
    if !(0.0 < a && a < b && b < 1.0) {
        return Err(Error::invalid("a, b", format!("need 0 < a < b < 1, got a = {a}, b = {b}")));
    }
    let (mf, kf) = (m as f64, k as f64);
    Ok((mf * a / (mf - kf), (mf * b - kf) / (mf - kf)))
}

/// Exponential bound for `f` equal to a constant `c` on `(a, b)`:
/// `||f - c|| (exp(-(m - k) r(x, lo)) + exp(-(m - k) r(x, hi)))` with
/// `(lo, hi)` from [`flat_region_window`]. The window edges are accepted.
pub fn flat_region_bound(m: usize, k: usize, x: f64, a: f64, b: f64, sup_dev: f64) -> Result<f64> {
    let (lo, hi) = flat_region_window(m, k, a, b)?;
    if !(lo <= x && x <= hi) || !(0.0 < x && x < 1.0) {
        return Err(Error::OutsideFlatWindow { x, lo, hi });
    }
    let e = (m - k) as f64;
    Ok(sup_dev * ((-e * entropy_r(x, lo)?).exp() + (-e * entropy_r(x, hi)?).exp()))
}

/// `2 exp(-n c tau(eps))`, the bound on `P(|sum| >= n c d eps)` for a sum
/// of `n` centred variables bounded by `d` with variance proxy `c d^2`.
pub fn concentration_bound(n: usize, c: f64, d: f64, eps: f64) -> Result<ProbabilityBound> {
    if c.is_nan() || c < 0.0 {
        return Err(Error::invalid("c", format!("{c} must be non-negative")));
    }
    if !(d > 0.0) {
        return Err(Error::invalid("d", format!("{d} must be positive")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", format!("{eps} must be positive")));
    }
    Ok(ProbabilityBound::new(2.0 * (-(n as f64) * c * tau_unchecked(eps)).exp()))
}

/// `l_alpha = sqrt(3 ln(2 e^(1/3) / alpha)) = sqrt(1 + 3 ln(2 / alpha))`.
pub fn l_alpha(alpha: f64) -> f64 {
    (1.0 + 3.0 * (2.0 / alpha).ln()).sqrt()
}

/// Interval width multiplier `2 l_alpha + 1 / l_alpha`.
pub fn width_multiplier(alpha: f64) -> f64 {
    let l = l_alpha(alpha);
    2.0 * l + 1.0 / l
}

/// `l_{k,alpha}(m) = 2^k (m)_k sqrt(2 ln(2 / alpha))`.
pub fn l_k_alpha(alpha: f64, m: usize, k: usize) -> f64 {
    2f64.powi(k as i32) * falling_factorial(m, k) * (2.0 * (2.0 / alpha).ln()).sqrt()
}

/// `q_m(x) = 1 - x^m - (1 - x)^m`.
pub fn q_m(m: usize, x: f64) -> f64 {
    1.0 - x.powi(m as i32) - (1.0 - x).powi(m as i32)
}

/// Constants of order `k >= 1`: `d_k`, `C(2(k-1), k-1)`, `r_k(m)`, `s_k(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderConstants {
    /// `d_k = C(k - 1, floor(k / 2))`.
    pub d_k: f64,
    /// `C(2(k - 1), k - 1)`.
    pub central: f64,
    /// `r_k(m) = m d_k / ((m)_k C(2(k-1), k-1))`.
    pub r_k_m: f64,
    /// `s_k(m) = (m)_k / sqrt(m) sqrt(C(2(k-1), k-1))`.
    pub s_k_m: f64,
}

pub fn order_constants(m: usize, k: usize) -> Result<OrderConstants> {
    if k == 0 {
        return Err(Error::invalid("k", "order constants need k >= 1"));
    }
    if m <= k {
        return Err(Error::DegreeNotAboveOrder { m, k });
    }
    let d_k = binomial_small(k - 1, k / 2, k)?;
    let central = binomial_small(2 * (k - 1), k - 1, k)?;
    let mf = m as f64;
    let falling = falling_factorial(m, k);
    Ok(OrderConstants {
        d_k,
        central,
        r_k_m: mf * d_k / (falling * central),
        s_k_m: falling / mf.sqrt() * central.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub alpha: f64,
    pub m: usize,
    pub k: usize,
    pub l_alpha: f64,
    /// `2 l_alpha + 1 / l_alpha`.
    pub width_multiplier: f64,
    pub l_k_alpha_m: f64,
    /// `None` for `k = 0`.
    pub order: Option<OrderConstants>,
    /// `q_m(x)` when a point is given.
    pub q_m_x: Option<f64>,
}

pub fn constants_for(alpha: f64, m: usize, k: usize, x: Option<f64>) -> Result<BoundConstants> {
    check_alpha(alpha)?;
    if m <= k {
        return Err(Error::DegreeNotAboveOrder { m, k });
    }
    if let Some(x) = x {
        crate::error::check_unit(x)?;
    }
    let l = l_alpha(alpha);
    Ok(BoundConstants {
        alpha,
        m,
        k,
        l_alpha: l,
        width_multiplier: 2.0 * l + 1.0 / l,
        l_k_alpha_m: l_k_alpha(alpha, m, k),
        order: if k == 0 { None } else { Some(order_constants(m, k)?) },
        q_m_x: x.map(|x| q_m(m, x)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Function1D, PowerCdf, PowerDensity};
    use crate::operators::{bernstein_apply, kantorovich_apply, OperatorParams, ShiftLaw};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn tau_examples() {
        assert_eq!(tau(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(tau(1.0).unwrap(), 2.0 * 2f64.ln() - 1.0, epsilon = 1e-15);
        assert!(tau(0.5).unwrap() >= 0.25 / 3.0);
        assert!(tau(-0.1).is_err());
        // series and closed form agree near the switch
        let e = 0.0099;
        let closed = (1.0 + e) * f64::ln_1p(e) - e;
        assert!((tau(e).unwrap() - closed).abs() < 1e-15);
    }

    #[test]
    fn tau_lower_bounds() {
        for i in 0..=1000 {
            let e = i as f64 / 1000.0;
            let t = tau(e).unwrap();
            let cubic = e * e / 2.0 - e.powi(3) / 6.0;
            assert!(t >= cubic - 1e-16, "eps={e}");
            assert!(cubic >= e * e / 3.0 - 1e-16, "eps={e}");
        }
    }

    #[test]
    fn tau_inverse_examples() {
        assert_eq!(tau_inverse(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(tau_inverse(2.0 * 2f64.ln() - 1.0).unwrap(), 1.0, epsilon = 1e-12);
        for y in [1e-12, 1e-6, 0.3, 5.0, 1e3, 1e6] {
            let e = tau_inverse(y).unwrap();
            assert!((tau(e).unwrap() - y).abs() <= 1e-12 * y.max(1.0), "y={y}");
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_r(0.5, 0.5).unwrap(), 0.0);
        let want = 0.25 * (0.5f64).ln() + 0.75 * (1.5f64).ln();
        assert_abs_diff_eq!(entropy_r(0.5, 0.25).unwrap(), want, epsilon = 1e-15);
        assert_abs_diff_eq!(entropy_r(0.5, 0.25).unwrap(), 0.130_812, epsilon = 1e-6);
        assert!(entropy_r(0.0, 0.3).is_err());
        assert_abs_diff_eq!(entropy_r(0.3, 0.0).unwrap(), -(0.7f64).ln(), epsilon = 1e-15);
    }

    #[test]
    fn entropy_is_the_binomial_chernoff_exponent() {
        // P(Bin(m, x) <= m theta) decays like exp(-m r(x, theta)) up to a
        // polynomial factor.
        let (x, theta) = (0.5, 0.25);
        let r = entropy_r(x, theta).unwrap();
        let tail = |m: usize| -> f64 {
            (0..=(m as f64 * theta) as usize)
                .map(|k| crate::operators::bernstein_basis(m, k, x).unwrap())
                .sum()
        };
        let rate = -(tail(4000).ln() - tail(2000).ln()) / 2000.0;
        assert!((rate - r).abs() < 1e-3, "{rate} vs {r}");
    }

    #[test]
    fn dkw_examples() {
        assert_abs_diff_eq!(dkw_bound(49, 0.194_015).unwrap().raw, 0.05, epsilon = 1e-5);
        assert!(dkw_bound(49, 1e3).unwrap().raw < 1e-300);
        let b = dkw_bound(10, 0.0).unwrap();
        assert_eq!((b.raw, b.clamped), (2.0, 1.0));
        assert_abs_diff_eq!(dkw_half_width(49, 0.05), 0.194_015, epsilon = 1e-6);
    }

    #[test]
    fn bernstein_bound_examples() {
        let affine = SmoothnessSpec::power(1.0);
        let b = bernstein_error_bound(&affine, 50, Some(0.3)).unwrap();
        assert_eq!((b.pointwise, b.uniform), (Some(0.0), Some(0.0)));
        let b = bernstein_error_bound(&SmoothnessSpec::power(0.5), 100, Some(0.5)).unwrap();
        let want = 1.5 * (2f64.sqrt() - 2.0).abs() * (0.5f64 / 10.0).sqrt();
        assert_abs_diff_eq!(b.pointwise.unwrap(), want, epsilon = 1e-15);
        assert_abs_diff_eq!(want, 0.196_479, epsilon = 1e-6);
        assert!(bernstein_error_bound(&SmoothnessSpec::power(0.5), 100, None).unwrap().pointwise().is_err());
    }

    #[test]
    fn kantorovich_bound_reduces_at_order_zero() {
        let spec = SmoothnessSpec::power(1.7);
        let a = kantorovich_error_bound_for(&spec, 0, 0, 40, Some(0.2)).unwrap();
        let b = bernstein_error_bound(&spec, 40, Some(0.2)).unwrap();
        assert_eq!(a, b);
        assert!(kantorovich_error_bound(2, 2, 0.1, Some(0.1), None).is_err());
    }

    #[test]
    fn density_bound_matches_displayed_form() {
        // 2 omega(rho; 1/m) + 3/2 omega_2(rho; sigma/sqrt m) for rho = 1.5 sqrt(x)
        let beta: f64 = 1.5;
        let (m, x) = (64usize, 0.3);
        let spec = SmoothnessSpec::power(beta);
        let b = kantorovich_error_bound_for(&spec, 1, 1, m, Some(x)).unwrap().pointwise.unwrap();
        let mf = m as f64;
        let want = 2.0 * beta / mf.powf(beta - 1.0)
            + 1.5 * beta * (2.0 - 2f64.powf(beta - 1.0)) * sigma(x).powf(beta - 1.0) / mf.powf((beta - 1.0) / 2.0);
        assert_abs_diff_eq!(b, want, epsilon = 1e-12);
    }

    #[test]
    fn bounds_dominate_operator_error() {
        for beta in [0.5, 1.5, 2.0, 3.0] {
            let spec = SmoothnessSpec::power(beta);
            let f = PowerCdf::new(beta);
            let rho = PowerDensity::new(beta);
            for m in [4usize, 16, 64, 256] {
                for i in 0..=100 {
                    let x = i as f64 / 100.0;
                    let err = (bernstein_apply(&f, m, x).unwrap() - f.eval(x)).abs();
                    let b = bernstein_error_bound(&spec, m, Some(x)).unwrap();
                    assert!(err <= b.pointwise.unwrap() + 1e-15, "beta={beta} m={m} x={x}");
                    assert!(err <= b.uniform.unwrap() + 1e-15);
                    if beta >= 1.0 {
                        let p = OperatorParams::new(m, 1).unwrap();
                        let err = (kantorovich_apply(&rho, p, ShiftLaw::irwin_hall(1), x).unwrap() - rho.eval(x)).abs();
                        let b = kantorovich_error_bound_for(&spec, 1, 1, m, Some(x)).unwrap();
                        assert!(err <= b.pointwise.unwrap() + 1e-12, "beta={beta} m={m} x={x}");
                    }
                }
            }
        }
    }

    #[test]
    fn flat_region_examples() {
        let b = flat_region_bound(200, 0, 0.5, 0.25, 0.75, 0.5).unwrap();
        let want = (-200.0 * entropy_r(0.5, 0.25).unwrap()).exp();
        assert_abs_diff_eq!(b, want, epsilon = 1e-25);
        assert!((b / 4.3e-12 - 1.0).abs() < 0.05);
        let (lo, hi) = flat_region_window(200, 0, 0.25, 0.75).unwrap();
        assert!(flat_region_bound(200, 0, lo, 0.25, 0.75, 0.5).unwrap() >= 0.5);
        assert!(flat_region_bound(200, 0, hi, 0.25, 0.75, 0.5).unwrap() >= 0.5);
        assert!(matches!(
            flat_region_bound(200, 0, 0.1, 0.25, 0.75, 0.5),
            Err(Error::OutsideFlatWindow { .. })
        ));
        let (lo1, hi1) = flat_region_window(10, 1, 0.3, 0.6).unwrap();
        assert_abs_diff_eq!(lo1, 3.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi1, 5.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn concentration_examples() {
        let b = concentration_bound(100, 0.25, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(b.raw, 2.0 * (-25.0 * tau(1.0).unwrap()).exp(), epsilon = 1e-18);
        assert_abs_diff_eq!(b.raw, 1.2791e-4, epsilon = 1e-7);
        let tiny = concentration_bound(100, 0.25, 1.0, 1e-12).unwrap();
        assert!((tiny.raw - 2.0).abs() < 1e-10);
        assert_eq!(tiny.clamped, 1.0);
        assert!(concentration_bound(100, 0.25, 0.0, 1.0).is_err());
    }

    #[test]
    fn constants_examples() {
        assert_abs_diff_eq!(width_multiplier(0.05), 7.2353, epsilon = 5e-4);
        let c = constants_for(0.05, 9, 1, Some(0.3)).unwrap();
        let o = c.order.unwrap();
        assert_eq!(o.d_k, 1.0);
        assert_abs_diff_eq!(o.s_k_m, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(o.r_k_m, 1.0, epsilon = 1e-15);
        let c = constants_for(0.05, 2, 0, Some(0.3)).unwrap();
        assert_abs_diff_eq!(c.q_m_x.unwrap(), 2.0 * 0.3 * 0.7, epsilon = 1e-15);
        assert!(c.order.is_none());
        assert!(constants_for(1.0, 5, 1, None).is_err());
        assert!(constants_for(0.05, 3, 3, None).is_err());
        let o = order_constants(10, 4).unwrap();
        assert_eq!((o.d_k, o.central), (3.0, 20.0));
        assert!(order_constants(40, 31).is_err());
    }

    #[test]
    fn uniform_variance_identity() {
        // B_m(sigma^2; x) = (m - 1)/m sigma^2(x)
        for m in [2usize, 3, 10, 77] {
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                let v = bernstein_apply(&crate::functions::sigma2, m, x).unwrap();
                let want = (m as f64 - 1.0) / m as f64 * crate::functions::sigma2(x);
                assert!((v - want).abs() <= 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn tau_is_convex(a in 0.0f64..20.0, b in 0.0f64..20.0, l in 0.0f64..=1.0) {
            let mid = tau(l * a + (1.0 - l) * b).unwrap();
            prop_assert!(mid <= l * tau(a).unwrap() + (1.0 - l) * tau(b).unwrap() + 1e-12);
        }

        #[test]
        fn tau_round_trip(y in 0.0f64..1e4) {
            let e = tau_inverse(y).unwrap();
            prop_assert!((tau(e).unwrap() - y).abs() <= 1e-12 * y.max(1.0));
        }

        #[test]
        fn entropy_is_nonnegative(x in 0.001f64..0.999, t in 0.0f64..=1.0) {
            prop_assert!(entropy_r(x, t).unwrap() >= 0.0);
        }

        #[test]
        fn concentration_is_monotone(n in 1usize..500, c in 0.01f64..2.0, e in 0.01f64..5.0) {
            let b = |n: usize, c: f64, e: f64| concentration_bound(n, c, 1.0, e).unwrap().raw;
            prop_assert!(b(n + 1, c, e) <= b(n, c, e));
            prop_assert!(b(n, c * 1.1, e) <= b(n, c, e));
            prop_assert!(b(n, c, e * 1.1) <= b(n, c, e));
        }
    }
}
