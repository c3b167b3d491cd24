//! Moduli of smoothness on a uniform grid, closed forms for the power
//! family, and Lipschitz-profile fitting.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{falling_real, sigma, Function1D, PowerCdf, PowerDensity};

pub const DEFAULT_RESOLUTION: usize = 10_000;

/// Uniform grid `{i / G : i = 0..=G}` replacing the sup over `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModulusGrid {
    /// Number of subintervals `G`.
    pub resolution: usize,
}

impl ModulusGrid {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { resolution })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    fn check(&self) -> Result<()> {
        if self.resolution < 2 {
            Err(Error::EmptyGrid)
        } else {
            Ok(())
        }
    }

    fn point(&self, i: usize) -> f64 {
        i as f64 / self.resolution as f64
    }

    fn sample<F: Function1D + ?Sized>(&self, f: &F) -> Vec<f64> {
        (0..=self.resolution)
            .into_par_iter()
            .map(|i| f.eval(self.point(i)))
            .collect()
    }

    /// Number of whole grid steps in `delta`.
    fn steps(&self, delta: f64) -> usize {
        ((delta * self.resolution as f64) + 1e-9).floor() as usize
    }
}

impl Default for ModulusGrid {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

fn check_delta(delta: f64, max: f64) -> Result<()> {
    if delta.is_nan() || delta < 0.0 || delta > max {
        return Err(Error::invalid("delta", format!("{delta} must lie in [0, {max}]")));
    }
    Ok(())
}

/// `omega(f; delta) = sup_{|x - y| <= delta} |f(x) - f(y)|` over grid pairs.
pub fn modulus1<F: Function1D + ?Sized>(f: &F, delta: f64, grid: &ModulusGrid) -> Result<f64> {
    check_delta(delta, 1.0)?;
    grid.check()?;
    let values = grid.sample(f);
    Ok(sliding_range(&values, grid.steps(delta)))
}

/// Largest `max - min` over windows of `width + 1` consecutive values.
fn sliding_range(values: &[f64], width: usize) -> f64 {
    if width == 0 {
        return 0.0;
    }
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut best = 0.0f64;
    for (i, &v) in values.iter().enumerate() {
        while maxq.back().is_some_and(|&j| values[j] <= v) {
            maxq.pop_back();
        }
        maxq.push_back(i);
        while minq.back().is_some_and(|&j| values[j] >= v) {
            minq.pop_back();
        }
        minq.push_back(i);
        let start = i.saturating_sub(width);
        while maxq.front().is_some_and(|&j| j < start) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&j| j < start) {
            minq.pop_front();
        }
        best = best.max(values[maxq[0]] - values[minq[0]]);
    }
    best
}

/// `omega_2(f; delta) = sup |f(x + h) - 2 f(x) + f(x - h)|` over
/// `0 <= h <= delta` and `x +- h` in `[0, 1]`.
pub fn modulus2<F: Function1D + ?Sized>(f: &F, delta: f64, grid: &ModulusGrid) -> Result<f64> {
    check_delta(delta, 0.5)?;
    grid.check()?;
    let values = grid.sample(f);
    let g = grid.resolution;
    let steps = grid.steps(delta).min(g / 2);
    let on_grid = (1..=steps)
        .into_par_iter()
        .map(|s| {
            (s..=g - s)
                .map(|i| (values[i + s] - 2.0 * values[i] + values[i - s]).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    // the step h = delta itself, off the grid
    let exact_step = if (delta * g as f64 - steps as f64).abs() > 1e-9 && delta > 0.0 {
        (0..=g)
            .into_par_iter()
            .filter_map(|i| {
                let x = grid.point(i);
                (x - delta >= 0.0 && x + delta <= 1.0)
                    .then(|| (f.eval(x + delta) - 2.0 * values[i] + f.eval(x - delta)).abs())
            })
            .reduce(|| 0.0, f64::max)
    } else {
        0.0
    };
    Ok(on_grid.max(exact_step))
}

/// Weighted second modulus with `phi = sigma`: the step at `x` is
/// `h sigma(x)`, `0 <= h <= delta`, subject to `x +- h sigma(x)` in `[0, 1]`.
pub fn modulus2_dt<F: Function1D + ?Sized>(f: &F, delta: f64, grid: &ModulusGrid) -> Result<f64> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::invalid("delta", format!("{delta} must be non-negative")));
    }
    grid.check()?;
    let values = grid.sample(f);
    let g = grid.resolution;
    let best = (1..g)
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let reach = (delta * sigma(x)).min(x).min(1.0 - x);
            let steps = grid.steps(reach).min(i).min(g - i);
            let mut best = (1..=steps)
                .map(|s| (values[i + s] - 2.0 * values[i] + values[i - s]).abs())
                .fold(0.0, f64::max);
            if reach > 0.0 && (reach * g as f64 - steps as f64).abs() > 1e-9 {
                let lo = (x - reach).max(0.0);
                let hi = (x + reach).min(1.0);
                best = best.max((f.eval(hi) - 2.0 * values[i] + f.eval(lo)).abs());
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Whether a closed-form modulus is attained or only an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BoundKind {
    Exact,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModulusValue {
    pub value: f64,
    pub kind: BoundKind,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PowerModuli {
    pub omega: ModulusValue,
    pub omega2: ModulusValue,
}

fn power_omega(beta: f64, h: f64) -> ModulusValue {
    if beta <= 1.0 {
        ModulusValue {
            value: h.powf(beta),
            kind: BoundKind::Exact,
        }
    } else {
        ModulusValue {
            value: beta * h,
            kind: BoundKind::UpperBound,
        }
    }
}

fn power_omega2(beta: f64, h: f64) -> ModulusValue {
    if beta <= 2.0 {
        ModulusValue {
            value: (2f64.powf(beta) - 2.0).abs() * h.powf(beta),
            kind: BoundKind::Exact,
        }
    } else {
        ModulusValue {
            value: beta * (beta - 1.0) * h * h,
            kind: BoundKind::UpperBound,
        }
    }
}

/// First and second moduli of `F(x) = x^beta` at step `h <= 1/2`.
pub fn power_family_moduli(beta: f64, h: f64) -> Result<PowerModuli> {
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::invalid("beta", format!("{beta} must be positive")));
    }
    check_delta(h, 0.5)?;
    Ok(PowerModuli {
        omega: power_omega(beta, h),
        omega2: power_omega2(beta, h),
    })
}

/// Least-squares fit of `modulus(delta) <= C delta^beta` on log scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LipschitzFit {
    pub c: f64,
    pub beta: f64,
    /// Root mean square of the log-scale residuals.
    pub rms_residual: f64,
    /// Largest log-scale residual `ln v - ln(C delta^beta)`; positive values
    /// mark samples lying above the fitted profile.
    pub max_residual: f64,
    /// All samples were zero: the function is affine at this resolution.
    /// `c` is then `0`.
    pub exactly_smooth: bool,
}

/// Smallest exponent reported by [`fit_lipschitz`].
pub const MIN_FITTED_BETA: f64 = 1e-6;

pub fn fit_lipschitz(samples: &[(f64, f64)]) -> Result<LipschitzFit> {
    if samples.len() < 2 {
        return Err(Error::DegenerateFit("need at least two samples".into()));
    }
    if samples.iter().any(|&(d, v)| !(d > 0.0) || !(v >= 0.0) || !d.is_finite() || !v.is_finite()) {
        return Err(Error::DegenerateFit("steps must be positive and values non-negative".into()));
    }
    if samples.iter().all(|&(_, v)| v == 0.0) {
        return Ok(LipschitzFit {
            c: 0.0,
            beta: 2.0,
            rms_residual: 0.0,
            max_residual: 0.0,
            exactly_smooth: true,
        });
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, v)| v > 0.0)
        .map(|&(d, v)| (d.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit("fewer than two positive values".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all steps are equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = (sxy / sxx).clamp(MIN_FITTED_BETA, 2.0);
    let ln_c = my - beta * mx;
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - ln_c - beta * p.0).collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let max_residual = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LipschitzFit {
        c: ln_c.exp(),
        beta,
        rms_residual: rms,
        max_residual,
        exactly_smooth: false,
    })
}

/// Which modulus a fitted profile was measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ModulusKind {
    First,
    Second,
    DitzianTotik,
}

/// A user-supplied or fitted profile `modulus(h) <= C h^beta`, applied to
/// every modulus a bound needs. The first modulus uses exponent
/// `min(beta, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FittedProfile {
    pub c: f64,
    pub beta: f64,
    pub modulus: ModulusKind,
    /// Bound on the sup norm of the target, needed by derivative
    /// conditions of order two and above.
    pub sup_norm: Option<f64>,
}

/// Known distribution: the CDF, optionally its density, and the grid used
/// for numerical moduli.
#[derive(Clone)]
pub struct Oracle {
    pub cdf: Arc<dyn Function1D>,
    pub density: Option<Arc<dyn Function1D>>,
    pub grid: ModulusGrid,
    pub label: String,
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("label", &self.label)
            .field("has_density", &self.density.is_some())
            .field("grid", &self.grid)
            .finish()
    }
}

impl Oracle {
    pub fn new(cdf: Arc<dyn Function1D>, label: impl Into<String>) -> Self {
        Self {
            cdf,
            density: None,
            grid: ModulusGrid::default(),
            label: label.into(),
        }
    }

    pub fn with_density(mut self, density: Arc<dyn Function1D>) -> Self {
        self.density = Some(density);
        self
    }

    pub fn with_grid(mut self, grid: ModulusGrid) -> Self {
        self.grid = grid;
        self
    }

    /// `F(x) = x^beta` with its density.
    pub fn power(beta: f64) -> Self {
        Self::new(Arc::new(PowerCdf::new(beta)), format!("power({beta})"))
            .with_density(Arc::new(PowerDensity::new(beta)))
    }

    pub fn uniform() -> Self {
        Self::power(1.0)
    }

    /// `F^(order)(x)`, or `None` when no analytic form is available.
    pub fn derivative_at(&self, order: usize, x: f64) -> Option<f64> {
        match order {
            0 => Some(self.cdf.eval(x)),
            _ => match &self.density {
                Some(d) if order == 1 => Some(d.eval(x)),
                Some(d) => d.derivative(order - 1, x),
                None => self.cdf.derivative(order, x),
            },
        }
    }

    /// `F^(order)` as a function, failing when it is unavailable.
    pub fn derivative_fn(&self, order: usize) -> Result<DerivativeOf<'_>> {
        if self.derivative_at(order, 0.5).is_none() {
            return Err(Error::MissingOracle("derivative of the oracle CDF"));
        }
        Ok(DerivativeOf { oracle: self, order })
    }
}

/// `F^(order)` of an [`Oracle`], keeping the primitive when it is `F^(order-1)`.
pub struct DerivativeOf<'a> {
    oracle: &'a Oracle,
    order: usize,
}

impl Function1D for DerivativeOf<'_> {
    fn eval(&self, x: f64) -> f64 {
        self.oracle.derivative_at(self.order, x).unwrap_or(f64::NAN)
    }

    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        self.oracle.derivative_at(self.order + order, x)
    }

    fn antiderivative(&self, x: f64) -> Option<f64> {
        match self.order {
            0 => self.oracle.cdf.antiderivative(x),
            o => self.oracle.derivative_at(o - 1, x),
        }
    }
}

/// How the smoothness of the target distribution is known.
#[derive(Debug, Clone)]
pub enum SmoothnessSpec {
    /// `F(x) = x^beta`, moduli from closed forms.
    PowerFamily { beta: f64 },
    /// A `(C, beta)` Lipschitz profile; point values come from plug-in
    /// estimates.
    Fitted(FittedProfile),
    /// Known `F`, moduli computed on a grid and conditions evaluated exactly.
    Oracle(Oracle),
}

impl SmoothnessSpec {
    pub fn power(beta: f64) -> Self {
        SmoothnessSpec::PowerFamily { beta }
    }

    pub fn fitted(c: f64, beta: f64) -> Self {
        SmoothnessSpec::Fitted(FittedProfile {
            c,
            beta,
            modulus: ModulusKind::DitzianTotik,
            sup_norm: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SmoothnessSpec::PowerFamily { beta } if !(*beta > 0.0) => {
                Err(Error::invalid("beta", format!("{beta} must be positive")))
            }
            SmoothnessSpec::Fitted(p) if !(p.c > 0.0) => {
                Err(Error::invalid("C", format!("{} must be positive", p.c)))
            }
            SmoothnessSpec::Fitted(p) if !(p.beta > 0.0 && p.beta <= 2.0) => {
                Err(Error::invalid("beta", format!("{} must lie in (0, 2]", p.beta)))
            }
            _ => Ok(()),
        }
    }

    /// `true` when the target distribution itself is known.
    pub fn is_oracle(&self) -> bool {
        !matches!(self, SmoothnessSpec::Fitted(_))
    }

    /// `F^(order)(x)` when the distribution is known.
    pub fn derivative_at(&self, order: usize, x: f64) -> Option<f64> {
        match self {
            SmoothnessSpec::PowerFamily { beta } => PowerCdf::new(*beta).derivative(order, x),
            SmoothnessSpec::Oracle(o) => o.derivative_at(order, x),
            SmoothnessSpec::Fitted(_) => None,
        }
    }

    /// Sup norm of `F^(order)` over `[0, 1]`, when available.
    pub fn sup_norm(&self, order: usize) -> Option<f64> {
        match self {
            SmoothnessSpec::PowerFamily { beta } => {
                let e = beta - order as f64;
                if e < 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(falling_real(*beta, order).abs())
                }
            }
            SmoothnessSpec::Fitted(p) => {
                if order == 0 {
                    Some(1.0)
                } else {
                    p.sup_norm
                }
            }
            SmoothnessSpec::Oracle(o) => {
                let g = o.grid;
                (0..=g.resolution)
                    .map(|i| o.derivative_at(order, g.point(i)).map(f64::abs))
                    .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
            }
        }
    }

    /// Power-family target `F^(order) = (beta)_order x^(beta - order)`.
    fn power_target(beta: f64, order: usize) -> Result<(f64, f64)> {
        let e = beta - order as f64;
        if e < 0.0 {
            return Err(Error::Unsupported(format!(
                "derivative of order {order} of x^{beta} is unbounded"
            )));
        }
        Ok((falling_real(beta, order).abs(), e))
    }

    /// Bound on `omega(F^(order); h)`.
    pub fn omega(&self, order: usize, h: f64) -> Result<f64> {
        match self {
            SmoothnessSpec::PowerFamily { beta } => {
                let (scale, e) = Self::power_target(*beta, order)?;
                if e == 0.0 {
                    return Ok(0.0);
                }
                Ok(scale * power_omega(e, h).value)
            }
            SmoothnessSpec::Fitted(p) => Ok(p.c * h.powf(p.beta.min(1.0))),
            SmoothnessSpec::Oracle(o) => modulus1(&o.derivative_fn(order)?, h.min(1.0), &o.grid),
        }
    }

    /// Bound on `omega_2(F^(order); h)`, `h <= 1/2`.
    pub fn omega2(&self, order: usize, h: f64) -> Result<f64> {
        match self {
            SmoothnessSpec::PowerFamily { beta } => {
                let (scale, e) = Self::power_target(*beta, order)?;
                if e == 0.0 || e == 1.0 {
                    return Ok(0.0);
                }
                Ok(scale * power_omega2(e, h).value)
            }
            SmoothnessSpec::Fitted(p) => Ok(p.c * h.powf(p.beta)),
            SmoothnessSpec::Oracle(o) => modulus2(&o.derivative_fn(order)?, h.min(0.5), &o.grid),
        }
    }

    /// Bound on `omega_2^sigma(F^(order); delta)`. For the power family this
    /// uses `omega_2^sigma(f; delta) <= omega_2(f; delta / 2)`, valid since
    /// `sigma <= 1/2`.
    pub fn omega2_dt(&self, order: usize, delta: f64) -> Result<f64> {
        match self {
            SmoothnessSpec::PowerFamily { .. } => self.omega2(order, (0.5 * delta).min(0.5)),
            SmoothnessSpec::Fitted(p) => Ok(p.c * delta.powf(p.beta)),
            SmoothnessSpec::Oracle(o) => modulus2_dt(&o.derivative_fn(order)?, delta, &o.grid),
        }
    }

    /// Bound on `omega_2(sigma^2(F); h)` where `sigma^2(F) = F (1 - F)`.
    pub fn omega2_variance(&self, h: f64) -> Result<f64> {
        match self {
            SmoothnessSpec::PowerFamily { beta } => {
                // F - F^2 with F^2 = x^(2 beta); subadditivity in f.
                Ok(power_omega2(*beta, h).value + power_omega2(2.0 * beta, h).value)
            }
            SmoothnessSpec::Fitted(p) => Ok(p.c * h.powf(p.beta)),
            SmoothnessSpec::Oracle(o) => {
                let cdf = o.cdf.clone();
                let v = move |t: f64| {
                    let f = cdf.eval(t);
                    f * (1.0 - f)
                };
                modulus2(&v, h.min(0.5), &o.grid)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid() -> ModulusGrid {
        ModulusGrid::default()
    }

    #[test]
    fn first_modulus_examples() {
        assert_abs_diff_eq!(modulus1(&|x: f64| x, 0.2, &grid()).unwrap(), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(modulus1(&PowerCdf::new(0.5), 0.25, &grid()).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(modulus1(&|_| 3.0, 0.4, &grid()).unwrap(), 0.0);
        assert!(matches!(ModulusGrid::new(1), Err(Error::EmptyGrid)));
        assert!(matches!(
            modulus1(&|x: f64| x, 0.2, &ModulusGrid { resolution: 0 }),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn second_modulus_examples() {
        assert!(modulus2(&|x: f64| 3.0 * x - 1.0, 0.3, &grid()).unwrap() < 1e-12);
        let want = (2f64.sqrt() - 2.0).abs() * 0.5;
        assert_abs_diff_eq!(modulus2(&PowerCdf::new(0.5), 0.25, &grid()).unwrap(), want, epsilon = 1e-12);
        for d in [0.05, 0.123_45, 0.5] {
            assert_abs_diff_eq!(modulus2(&|x: f64| x * x, d, &grid()).unwrap(), 2.0 * d * d, epsilon = 1e-12);
        }
        assert!(modulus2(&|x: f64| x, 0.6, &grid()).is_err());
    }

    #[test]
    fn weighted_modulus_examples() {
        assert!(modulus2_dt(&|x: f64| 1.0 - x, 0.7, &grid()).unwrap() < 1e-12);
        assert_abs_diff_eq!(modulus2_dt(&|x: f64| x * x, 0.1, &grid()).unwrap(), 0.005, epsilon = 1e-12);
        assert_eq!(modulus2_dt(&|_| 0.3, 0.4, &grid()).unwrap(), 0.0);
    }

    #[test]
    fn power_family_closed_forms() {
        let m = power_family_moduli(0.5, 0.25).unwrap();
        assert_abs_diff_eq!(m.omega.value, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.omega2.value, 0.292_893_218_813_452_5, epsilon = 1e-12);
        let m = power_family_moduli(1.0, 0.3).unwrap();
        assert_eq!((m.omega.value, m.omega2.value), (0.3, 0.0));
        let m = power_family_moduli(2.0, 0.2).unwrap();
        assert_eq!(m.omega.kind, BoundKind::UpperBound);
        assert_abs_diff_eq!(m.omega.value, 0.4, epsilon = 1e-15);
        assert_eq!(m.omega2.kind, BoundKind::Exact);
        assert_abs_diff_eq!(m.omega2.value, 0.08, epsilon = 1e-15);
        assert_eq!(power_family_moduli(3.0, 0.1).unwrap().omega2.kind, BoundKind::UpperBound);
        assert!(power_family_moduli(1.0, 0.6).is_err());
        assert!(power_family_moduli(0.0, 0.1).is_err());
    }

    #[test]
    fn grid_moduli_match_closed_forms() {
        let g = grid();
        let tol = 5.0 / g.resolution as f64;
        for beta in [0.5, 1.0, 1.5, 2.0] {
            let f = PowerCdf::new(beta);
            for h in [0.05, 0.2, 0.5] {
                let closed = power_family_moduli(beta, h).unwrap();
                let w1 = modulus1(&f, h, &g).unwrap();
                let w2 = modulus2(&f, h, &g).unwrap();
                match closed.omega.kind {
                    BoundKind::Exact => assert!((w1 - closed.omega.value).abs() <= tol),
                    BoundKind::UpperBound => assert!(w1 <= closed.omega.value + tol),
                }
                assert!((w2 - closed.omega2.value).abs() <= tol, "beta={beta} h={h}: {w2}");
            }
        }
    }

    #[test]
    fn fit_recovers_profiles() {
        let root: Vec<_> = [0.01, 0.02, 0.05, 0.1, 0.2].iter().map(|&d: &f64| (d, d.sqrt())).collect();
        let fit = fit_lipschitz(&root).unwrap();
        assert_abs_diff_eq!(fit.c, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.beta, 0.5, epsilon = 1e-10);
        let quad: Vec<_> = [0.01, 0.03, 0.1, 0.3].iter().map(|&d: &f64| (d, 3.0 * d * d)).collect();
        let fit = fit_lipschitz(&quad).unwrap();
        assert_abs_diff_eq!(fit.c, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.beta, 2.0, epsilon = 1e-10);
        let zero = fit_lipschitz(&[(0.1, 0.0), (0.2, 0.0)]).unwrap();
        assert!(zero.exactly_smooth);
        assert_eq!(zero.c, 0.0);
        assert!(fit_lipschitz(&[(0.1, 1.0)]).is_err());
        assert!(fit_lipschitz(&[(0.1, 1.0), (0.1, 2.0)]).is_err());
        // beta above 2 is clamped
        let cubic: Vec<_> = [0.1, 0.2, 0.4].iter().map(|&d: &f64| (d, d.powi(3))).collect();
        assert_eq!(fit_lipschitz(&cubic).unwrap().beta, 2.0);
    }

    #[test]
    fn spec_moduli_agree_with_oracle_grid() {
        let power = SmoothnessSpec::power(1.5);
        let oracle = SmoothnessSpec::Oracle(Oracle::power(1.5));
        let h = 0.1;
        let tol = 5e-4;
        assert!(oracle.omega2(0, h).unwrap() <= power.omega2(0, h).unwrap() + tol);
        assert!(oracle.omega(0, h).unwrap() <= power.omega(0, h).unwrap() + tol);
        assert!(oracle.omega2_dt(0, 2.0 * h).unwrap() <= power.omega2_dt(0, 2.0 * h).unwrap() + tol);
        assert!(oracle.omega2_variance(h).unwrap() <= power.omega2_variance(h).unwrap() + tol);
        // density rho = 1.5 sqrt(x)
        let w = oracle.omega(1, 0.01).unwrap();
        assert_abs_diff_eq!(w, power.omega(1, 0.01).unwrap(), epsilon = 1e-9);
        assert!(SmoothnessSpec::power(0.5).omega(1, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn moduli_are_monotone(d1 in 0.0f64..0.5, d2 in 0.0f64..0.5, beta in 0.2f64..3.0) {
            let (a, b) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let g = ModulusGrid::new(400).unwrap();
            let f = PowerCdf::new(beta);
            prop_assert!(modulus1(&f, a, &g).unwrap() <= modulus1(&f, b, &g).unwrap() + 1e-15);
            prop_assert!(modulus2(&f, a, &g).unwrap() <= modulus2(&f, b, &g).unwrap() + 1e-15);
            prop_assert!(modulus2_dt(&f, a, &g).unwrap() <= modulus2_dt(&f, b, &g).unwrap() + 1e-15);
        }

        #[test]
        fn first_modulus_is_subadditive(s1 in 0usize..250, s2 in 0usize..250) {
            let g = ModulusGrid::new(500).unwrap();
            let (d1, d2) = (s1 as f64 / 500.0, s2 as f64 / 500.0);
            let f = |x: f64| (7.0 * x).sin() + x.sqrt();
            let lhs = modulus1(&f, d1 + d2, &g).unwrap();
            let rhs = modulus1(&f, d1, &g).unwrap() + modulus1(&f, d2, &g).unwrap();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn second_modulus_scaling(a in 0.1f64..1.0, delta in 0.0f64..0.5) {
            // f_a(y) = f(a y): omega_2(f_a; delta) <= omega_2(f; a delta)
            let g = ModulusGrid::new(600).unwrap();
            let f = |x: f64| x.powf(0.7) + (3.0 * x).cos();
            let fa = |y: f64| f(a * y);
            let lhs = modulus2(&fa, delta, &g).unwrap();
            let rhs = modulus2(&f, a * delta, &g).unwrap();
            // f_a is sampled at a y_i, off the grid of f
            let tol = 4.0 * modulus1(&f, g.spacing(), &g).unwrap();
            prop_assert!(lhs <= rhs + tol, "{} vs {} + {}", lhs, rhs, tol);
        }
    }
}
