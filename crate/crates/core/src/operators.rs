//! Bernstein polynomials, forward differences and Kantorovich-type
//! operators.
//!
//! For large degrees the binomial weights are concentrated on
//! `O(sqrt(m))` indices around `m x`; sums are restricted to a window of
//! `14 sd + 40` indices around the mode, outside of which the total mass is
//! below `1e-40`.

use crate::binomial::{binomial_exact, binomial_pmf, falling_factorial};
use crate::error::{check_unit, Error, Result};
use crate::functions::Function1D;
use crate::quadrature::{GaussLegendre, DEFAULT_NODES};

/// Degree, derivative order and falling factorial `(m)_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParams {
    pub m: usize,
    pub k: usize,
    pub falling: f64,
}

impl OperatorParams {
    pub fn new(m: usize, k: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "degree must be at least 1"));
        }
        Ok(Self {
            m,
            k,
            falling: falling_factorial(m, k),
        })
    }

    fn require_above_order(&self) -> Result<()> {
        if self.m > self.k {
            Ok(())
        } else {
            Err(Error::DegreeNotAboveOrder { m: self.m, k: self.k })
        }
    }
}

/// Law of the shift added to the binomial index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftKind {
    /// No shift: plain Bernstein sampling.
    None,
    /// Sum of `k` independent uniforms.
    IrwinHall(usize),
    /// `R + V` with `P(R = j) = C(k-1, j)^2 / C(2(k-1), k-1)` and `V`
    /// uniform.
    RPlusV(usize),
}

impl ShiftKind {
    pub fn order(&self) -> usize {
        match *self {
            ShiftKind::None => 0,
            ShiftKind::IrwinHall(k) | ShiftKind::RPlusV(k) => k,
        }
    }
}

/// Quadrature used for the uniform components of a shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub nodes_per_unit: usize,
    /// When set, evaluations whose error estimate exceeds this value fail.
    pub tolerance: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes_per_unit: DEFAULT_NODES,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftLaw {
    pub kind: ShiftKind,
    pub quadrature: QuadratureSpec,
}

impl ShiftLaw {
    pub fn none() -> Self {
        Self::from(ShiftKind::None)
    }

    pub fn irwin_hall(k: usize) -> Self {
        Self::from(ShiftKind::IrwinHall(k))
    }

    pub fn r_plus_v(k: usize) -> Self {
        Self::from(ShiftKind::RPlusV(k))
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.quadrature.tolerance = Some(tolerance);
        self
    }
}

impl From<ShiftKind> for ShiftLaw {
    fn from(kind: ShiftKind) -> Self {
        Self {
            kind,
            quadrature: QuadratureSpec::default(),
        }
    }
}

/// Value of a quadrature-based operator with its accumulated error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub error_estimate: f64,
}

/// `p_{m,k}(x) = C(m, k) x^k (1 - x)^(m - k)`.
pub fn bernstein_basis(m: usize, k: usize, x: f64) -> Result<f64> {
    if k > m {
        return Err(Error::IndexOutOfRange { index: k, degree: m });
    }
    check_unit(x)?;
    Ok(pmf(k, m, x))
}

/// Below this degree the product formula with an exact coefficient is used.
const DIRECT_DEGREE: usize = 60;

fn pmf(k: usize, m: usize, x: f64) -> f64 {
    if m <= DIRECT_DEGREE {
        let c = binomial_exact(m as u64, k as u64).unwrap_or(0) as f64;
        c * x.powi(k as i32) * (1.0 - x).powi((m - k) as i32)
    } else {
        binomial_pmf(k, m, x, 1.0 - x)
    }
}

/// Binomial weights `p_{m,k}(x)` for `k` in `lo..lo + weights.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisWindow {
    pub lo: usize,
    pub weights: Vec<f64>,
}

impl BasisWindow {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(i, &w)| (self.lo + i, w))
    }
}

const REANCHOR: usize = 128;

/// The non-negligible part of `k -> p_{m,k}(x)`.
pub fn bernstein_weights(m: usize, x: f64) -> Result<BasisWindow> {
    check_unit(x)?;
    Ok(weights_unchecked(m, x))
}

pub(crate) fn weights_unchecked(m: usize, x: f64) -> BasisWindow {
    if x == 0.0 {
        return BasisWindow { lo: 0, weights: vec![1.0] };
    }
    if x == 1.0 {
        return BasisWindow { lo: m, weights: vec![1.0] };
    }
    if m <= DIRECT_DEGREE {
        let weights = (0..=m).map(|k| pmf(k, m, x)).collect();
        return BasisWindow { lo: 0, weights };
    }
    let q = 1.0 - x;
    let mf = m as f64;
    let sd = (mf * x * q).sqrt();
    let half = 14.0 * sd + 40.0;
    let lo = (mf * x - half).floor().max(0.0) as usize;
    let hi = ((mf * x + half).ceil() as usize).min(m);
    let mode = (((mf + 1.0) * x).floor() as usize).clamp(lo, hi);

    let mut weights = vec![0.0; hi - lo + 1];
    let ratio_up = x / q;
    let ratio_down = q / x;

    weights[mode - lo] = binomial_pmf(mode, m, x, q);
    let mut w = weights[mode - lo];
    for k in mode + 1..=hi {
        w = if (k - mode) % REANCHOR == 0 {
            binomial_pmf(k, m, x, q)
        } else {
            w * ((m - k + 1) as f64 / k as f64) * ratio_up
        };
        weights[k - lo] = w;
    }
    let mut w = weights[mode - lo];
    for k in (lo..mode).rev() {
        w = if (mode - k) % REANCHOR == 0 {
            binomial_pmf(k, m, x, q)
        } else {
            w * ((k + 1) as f64 / (m - k) as f64) * ratio_down
        };
        weights[k - lo] = w;
    }
    BasisWindow { lo, weights }
}

/// Grid point `i / m` computed without accumulated rounding.
#[inline]
pub(crate) fn node(i: usize, m: usize) -> f64 {
    i as f64 / m as f64
}

/// `B_m(f; x) = sum_k f(k/m) p_{m,k}(x)`.
pub fn bernstein_apply<F: Function1D + ?Sized>(f: &F, m: usize, x: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "degree must be at least 1"));
    }
    let window = bernstein_weights(m, x)?;
    Ok(window.iter().map(|(k, w)| w * f.eval(node(k, m))).sum())
}

/// `Delta_h^k f(x) = sum_j C(k, j) (-1)^(k - j) f(x + j h)`.
pub fn forward_difference<F: Function1D + ?Sized>(f: &F, h: f64, k: usize, x: f64) -> Result<f64> {
    if h < 0.0 || !h.is_finite() {
        return Err(Error::invalid("h", format!("step {h} must be non-negative")));
    }
    check_unit(x)?;
    let end = x + k as f64 * h;
    if end > 1.0 + 1e-12 {
        return Err(Error::DomainOverflow { end });
    }
    let mut acc = 0.0;
    for j in 0..=k {
        let c = binomial_exact(k as u64, j as u64).ok_or(Error::BinomialOverflow { k })? as f64;
        let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * c * f.eval((x + j as f64 * h).min(1.0));
    }
    Ok(acc)
}

/// Signed coefficients `C(k, j) (-1)^(k - j)`, `j = 0..=k`.
pub(crate) fn difference_coefficients(k: usize) -> Result<Vec<f64>> {
    (0..=k)
        .map(|j| {
            let c = binomial_exact(k as u64, j as u64).ok_or(Error::BinomialOverflow { k })? as f64;
            Ok(if (k - j) % 2 == 0 { c } else { -c })
        })
        .collect()
}

/// `P(R = j) = C(k-1, j)^2 / C(2(k-1), k-1)`, `j = 0..k`.
pub fn r_law(k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("k", "the R law needs k >= 1"));
    }
    let n = (k - 1) as u64;
    let total = binomial_exact(2 * n, n).ok_or(Error::BinomialOverflow { k })? as f64;
    (0..=n)
        .map(|j| {
            let c = binomial_exact(n, j).ok_or(Error::BinomialOverflow { k })? as f64;
            Ok(c * c / total)
        })
        .collect()
}

/// Irwin-Hall density of the sum of `k` uniforms.
pub fn irwin_hall_density(k: usize, t: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", "order must be at least 1"));
    }
    if !(0.0..=k as f64).contains(&t) {
        return Err(Error::invalid("t", format!("{t} lies outside [0, {k}]")));
    }
    Ok(irwin_hall_density_unchecked(k, t))
}

fn irwin_hall_density_unchecked(k: usize, t: f64) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let kf = falling_factorial(k - 1, k - 1);
    let top = (t.floor() as usize).min(k);
    let mut acc = 0.0;
    for j in 0..=top {
        let c = binomial_exact(k as u64, j as u64).unwrap_or(0) as f64;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * c * (t - j as f64).powi(k as i32 - 1);
    }
    (acc / kf).max(0.0)
}

/// Irwin-Hall distribution function.
pub fn irwin_hall_cdf(k: usize, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= k as f64 {
        return 1.0;
    }
    let kf = falling_factorial(k, k);
    let top = (t.floor() as usize).min(k);
    let mut acc = 0.0;
    for j in 0..=top {
        let c = binomial_exact(k as u64, j as u64).unwrap_or(0) as f64;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * c * (t - j as f64).powi(k as i32);
    }
    (acc / kf).clamp(0.0, 1.0)
}

/// Integrals of `f((c + t) / m)` against shift densities.
struct Integrator<'a, F: ?Sized> {
    f: &'a F,
    m: f64,
    rule: std::borrow::Cow<'static, GaussLegendre>,
}

impl<'a, F: Function1D + ?Sized> Integrator<'a, F> {
    fn new(f: &'a F, m: usize, quadrature: &QuadratureSpec) -> Self {
        let rule = if quadrature.nodes_per_unit == DEFAULT_NODES {
            std::borrow::Cow::Borrowed(GaussLegendre::standard())
        } else {
            std::borrow::Cow::Owned(GaussLegendre::new(quadrature.nodes_per_unit.max(1)))
        };
        Self { f, m: m as f64, rule }
    }

    fn at(&self, c: f64, t: f64) -> f64 {
        self.f.eval(((c + t) / self.m).clamp(0.0, 1.0))
    }

    /// Pieces of `[t0, t1]` on which a step function is constant.
    fn step_pieces(&self, jumps: &[f64], c: f64, t0: f64, t1: f64) -> Vec<f64> {
        let mut cuts = vec![t0];
        let lo_x = (c + t0) / self.m;
        let hi_x = (c + t1) / self.m;
        let start = jumps.partition_point(|&b| b <= lo_x);
        for &b in &jumps[start..] {
            if b >= hi_x {
                break;
            }
            cuts.push(b * self.m - c);
        }
        cuts.push(t1);
        cuts
    }

    /// `int_0^1 f((c + v) / m) dv`.
    fn unit(&self, c: f64) -> Evaluation {
        if let (Some(g1), Some(g0)) = (
            self.f.antiderivative(((c + 1.0) / self.m).min(1.0)),
            self.f.antiderivative((c / self.m).min(1.0)),
        ) {
            return Evaluation {
                value: self.m * (g1 - g0),
                error_estimate: 0.0,
            };
        }
        if let Some(jumps) = self.f.jumps() {
            let cuts = self.step_pieces(jumps, c, 0.0, 1.0);
            let value = cuts
                .windows(2)
                .map(|w| (w[1] - w[0]) * self.at(c, 0.5 * (w[0] + w[1])))
                .sum();
            return Evaluation {
                value,
                error_estimate: 0.0,
            };
        }
        let (value, error_estimate) = self.rule.integrate_with_estimate(0.0, 1.0, |v| self.at(c, v));
        Evaluation { value, error_estimate }
    }

    /// `E f((c + T_k) / m)` with `T_k` Irwin-Hall of order `k`.
    fn irwin_hall(&self, c: f64, k: usize) -> Evaluation {
        if k == 1 {
            return self.unit(c);
        }
        if let Some(jumps) = self.f.jumps() {
            let cuts = self.step_pieces(jumps, c, 0.0, k as f64);
            let value = cuts
                .windows(2)
                .map(|w| {
                    let mass = irwin_hall_cdf(k, w[1]) - irwin_hall_cdf(k, w[0]);
                    mass * self.at(c, 0.5 * (w[0] + w[1]))
                })
                .sum();
            return Evaluation {
                value,
                error_estimate: 0.0,
            };
        }
        let mut total = Evaluation {
            value: 0.0,
            error_estimate: 0.0,
        };
        for i in 0..k {
            let a = i as f64;
            let (v, e) = self.rule.integrate_with_estimate(a, a + 1.0, |t| {
                self.at(c, t) * irwin_hall_density_unchecked(k, t)
            });
            total.value += v;
            total.error_estimate += e;
        }
        total
    }
}

fn check_shift(params: &OperatorParams, shift: &ShiftLaw) -> Result<()> {
    if shift.kind.order() != params.k {
        return Err(Error::invalid(
            "shift",
            format!("shift order {} does not match k = {}", shift.kind.order(), params.k),
        ));
    }
    Ok(())
}

/// `sum_l p_{m-k,l}(x) E f((l + T) / m)` together with the quadrature error
/// estimate.
pub fn kantorovich_eval<F: Function1D + ?Sized>(
    f: &F,
    params: OperatorParams,
    shift: ShiftLaw,
    x: f64,
) -> Result<Evaluation> {
    params.require_above_order()?;
    check_shift(&params, &shift)?;
    check_unit(x)?;
    let m = params.m;
    let window = weights_unchecked(m - params.k, x);
    let mut out = Evaluation {
        value: 0.0,
        error_estimate: 0.0,
    };
    match shift.kind {
        ShiftKind::None => {
            out.value = window.iter().map(|(l, w)| w * f.eval(node(l, m))).sum();
        }
        _ => {
            let law = match shift.kind {
                ShiftKind::RPlusV(k) => r_law(k)?,
                _ => Vec::new(),
            };
            let integ = Integrator::new(f, m, &shift.quadrature);
            for (l, w) in window.iter() {
                let e = cell(&integ, shift.kind, &law, l);
                out.value += w * e.value;
                out.error_estimate += w * e.error_estimate;
            }
        }
    }
    if let Some(tolerance) = shift.quadrature.tolerance {
        if out.error_estimate > tolerance {
            return Err(Error::QuadratureNotConverged {
                estimate: out.error_estimate,
                tolerance,
            });
        }
    }
    Ok(out)
}

/// Shifted average `E f((l + T) / m)` of cell `l`.
fn cell<F: Function1D + ?Sized>(integ: &Integrator<'_, F>, kind: ShiftKind, r_law: &[f64], l: usize) -> Evaluation {
    match kind {
        ShiftKind::None => Evaluation {
            value: integ.f.eval(node(l, integ.m as usize)),
            error_estimate: 0.0,
        },
        ShiftKind::IrwinHall(k) => integ.irwin_hall(l as f64, k),
        ShiftKind::RPlusV(_) => {
            let mut out = Evaluation {
                value: 0.0,
                error_estimate: 0.0,
            };
            for (j, &pj) in r_law.iter().enumerate() {
                let e = integ.unit((l + j) as f64);
                out.value += pj * e.value;
                out.error_estimate += pj * e.error_estimate;
            }
            out
        }
    }
}

/// Cell averages of a shifted operator, computed once for evaluation at
/// many points.
#[derive(Debug, Clone)]
pub struct KantorovichCells {
    pub params: OperatorParams,
    pub values: Vec<f64>,
    pub error_estimates: Vec<f64>,
}

impl KantorovichCells {
    pub fn new<F: Function1D + ?Sized>(f: &F, params: OperatorParams, shift: ShiftLaw) -> Result<Self> {
        params.require_above_order()?;
        check_shift(&params, &shift)?;
        let law = match shift.kind {
            ShiftKind::RPlusV(k) => r_law(k)?,
            _ => Vec::new(),
        };
        let integ = Integrator::new(f, params.m, &shift.quadrature);
        let (values, error_estimates) = (0..=params.m - params.k)
            .map(|l| {
                let e = cell(&integ, shift.kind, &law, l);
                (e.value, e.error_estimate)
            })
            .unzip();
        Ok(Self {
            params,
            values,
            error_estimates,
        })
    }

    /// Same value as [`kantorovich_eval`] at `x`.
    pub fn eval(&self, x: f64) -> Result<Evaluation> {
        check_unit(x)?;
        let window = weights_unchecked(self.params.m - self.params.k, x);
        let mut out = Evaluation {
            value: 0.0,
            error_estimate: 0.0,
        };
        for (l, w) in window.iter() {
            out.value += w * self.values[l];
            out.error_estimate += w * self.error_estimates[l];
        }
        Ok(out)
    }
}

/// Value of [`kantorovich_eval`]. With `k = 0` and no shift this is
/// `B_m(f; x)`; with an Irwin-Hall shift it is `B_{m,k}(f; x)`.
pub fn kantorovich_apply<F: Function1D + ?Sized>(
    f: &F,
    params: OperatorParams,
    shift: ShiftLaw,
    x: f64,
) -> Result<f64> {
    kantorovich_eval(f, params, shift, x).map(|e| e.value)
}

/// `L_{m,k}(rho; x) = E rho((S_{m-k}(x) + R + V) / m)`.
pub fn lmk_rplusv_apply<F: Function1D + ?Sized>(rho: &F, params: OperatorParams, x: f64) -> Result<f64> {
    if params.k == 0 {
        return Err(Error::invalid("k", "L_{m,k} needs k >= 1"));
    }
    kantorovich_apply(rho, params, ShiftLaw::r_plus_v(params.k), x)
}

/// `B_m^(k)(f; x) = (m)_k sum_l p_{m-k,l}(x) Delta_{1/m}^k f(l/m)`.
pub fn bernstein_derivative_apply<F: Function1D + ?Sized>(f: &F, params: OperatorParams, x: f64) -> Result<f64> {
    check_unit(x)?;
    let (m, k) = (params.m, params.k);
    if k == 0 {
        return bernstein_apply(f, m, x);
    }
    params.require_above_order()?;
    let coeffs = difference_coefficients(k)?;
    let window = weights_unchecked(m - k, x);
    let mut acc = 0.0;
    for (l, w) in window.iter() {
        let diff: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * f.eval(node(l + j, m)))
            .sum();
        acc += w * diff;
    }
    Ok(params.falling * acc)
}

/// `(m)_k / m^k B_{m,k}(f^(k); x)`, the Kantorovich form of the Bernstein
/// derivative, using the analytic `k`-th derivative of `f`.
pub fn bernstein_derivative_via_kantorovich<F: Function1D + ?Sized>(
    f: &F,
    params: OperatorParams,
    x: f64,
) -> Result<f64> {
    let k = params.k;
    if f.derivative(k, 0.5).is_none() {
        return Err(Error::MissingOracle("analytic derivative"));
    }
    let dk = |t: f64| f.derivative(k, t).unwrap_or(f64::NAN);
    let shift = if k == 0 { ShiftLaw::none() } else { ShiftLaw::irwin_hall(k) };
    let v = kantorovich_apply(&dk, params, shift, x)?;
    Ok(params.falling / (params.m as f64).powi(k as i32) * v)
}
