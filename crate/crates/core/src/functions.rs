//! Functions on `[0, 1]` consumed by the operators.

use crate::binomial::falling_factorial;

/// A real function on `[0, 1]`.
///
/// Only [`eval`](Function1D::eval) is required. The optional hooks let
/// operators use exact information when it exists: analytic derivatives,
/// an antiderivative for exact cell averages, and the jump locations of a
/// piecewise-constant function.
pub trait Function1D: Send + Sync {
    fn eval(&self, x: f64) -> f64;

    /// `f^(order)(x)` when known analytically. `order = 0` is `f` itself.
    fn derivative(&self, _order: usize, _x: f64) -> Option<f64> {
        None
    }

    /// A primitive `G` with `G' = f`, when known.
    fn antiderivative(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Breakpoints of a piecewise-constant function, sorted. `None` for
    /// functions that are not step functions.
    fn jumps(&self) -> Option<&[f64]> {
        None
    }
}

impl<F> Function1D for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// `sigma(x) = sqrt(x (1 - x))`.
pub fn sigma(x: f64) -> f64 {
    (x * (1.0 - x)).max(0.0).sqrt()
}

/// `sigma^2(x) = x (1 - x)`.
pub fn sigma2(x: f64) -> f64 {
    x * (1.0 - x)
}

/// Generalized falling product `b (b - 1) ... (b - j + 1)` for real `b`.
pub(crate) fn falling_real(b: f64, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (b - i as f64))
}

/// The power family `F(x) = x^beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCdf {
    pub beta: f64,
}

impl PowerCdf {
    pub fn new(beta: f64) -> Self {
        assert!(beta > 0.0, "beta must be positive");
        Self { beta }
    }

    /// Quantile `u^(1/beta)`.
    pub fn quantile(&self, u: f64) -> f64 {
        u.powf(1.0 / self.beta)
    }
}

fn power_term(scale: f64, p: f64, x: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else if p == 0.0 {
        scale
    } else {
        scale * x.powf(p)
    }
}

impl Function1D for PowerCdf {
    fn eval(&self, x: f64) -> f64 {
        x.powf(self.beta)
    }

    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        let c = falling_real(self.beta, order);
        Some(power_term(c, self.beta - order as f64, x))
    }

    fn antiderivative(&self, x: f64) -> Option<f64> {
        Some(x.powf(self.beta + 1.0) / (self.beta + 1.0))
    }
}

/// Density of the power family, `rho(x) = beta x^(beta - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDensity {
    pub beta: f64,
}

impl PowerDensity {
    pub fn new(beta: f64) -> Self {
        assert!(beta > 0.0, "beta must be positive");
        Self { beta }
    }
}

impl Function1D for PowerDensity {
    fn eval(&self, x: f64) -> f64 {
        power_term(self.beta, self.beta - 1.0, x)
    }

    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        let c = self.beta * falling_real(self.beta - 1.0, order);
        Some(power_term(c, self.beta - 1.0 - order as f64, x))
    }

    fn antiderivative(&self, x: f64) -> Option<f64> {
        Some(x.powf(self.beta))
    }
}

/// Polynomial with coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

impl Function1D for Polynomial {
    fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        let v = self
            .coeffs
            .iter()
            .enumerate()
            .skip(order)
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * x + c * falling_factorial(i, order));
        Some(v)
    }

    fn antiderivative(&self, x: f64) -> Option<f64> {
        let v = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * x + c / (i as f64 + 1.0));
        Some(v * x)
    }
}

/// Continuous CDF that is constant on `[a, b]`: linear from `0` to
/// `level` on `[0, a]`, flat on `[a, b]`, linear from `level` to `1` on
/// `[b, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseFlatCdf {
    pub a: f64,
    pub b: f64,
    pub level: f64,
}

impl PiecewiseFlatCdf {
    pub fn new(a: f64, b: f64, level: f64) -> Self {
        assert!(0.0 < a && a < b && b < 1.0, "need 0 < a < b < 1");
        assert!((0.0..=1.0).contains(&level), "level must lie in [0, 1]");
        Self { a, b, level }
    }

    /// `sup |F - level|` over `[0, 1]`.
    pub fn sup_deviation(&self) -> f64 {
        self.level.max(1.0 - self.level)
    }
}

impl Function1D for PiecewiseFlatCdf {
    fn eval(&self, x: f64) -> f64 {
        if x <= self.a {
            self.level * x / self.a
        } else if x <= self.b {
            self.level
        } else {
            self.level + (1.0 - self.level) * (x - self.b) / (1.0 - self.b)
        }
    }

    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        match order {
            0 => Some(self.eval(x)),
            1 => Some(if x < self.a {
                self.level / self.a
            } else if x <= self.b {
                0.0
            } else {
                (1.0 - self.level) / (1.0 - self.b)
            }),
            _ => Some(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_family_values() {
        let f = PowerCdf::new(0.5);
        assert_eq!(f.eval(0.25), 0.5);
        assert_eq!(f.quantile(0.5), 0.25);
        let d = PowerDensity::new(2.0);
        assert_eq!(d.eval(0.3), 0.6);
        assert_eq!(d.derivative(1, 0.3), Some(2.0));
        assert_eq!(d.derivative(2, 0.3), Some(0.0));
        assert_eq!(PowerCdf::new(3.0).derivative(2, 0.5), Some(3.0));
    }

    #[test]
    fn polynomial_calculus() {
        // 1 + 2x + 3x^2
        let p = Polynomial::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.eval(2.0), 17.0);
        assert_eq!(p.derivative(1, 2.0), Some(14.0));
        assert_eq!(p.derivative(2, 2.0), Some(6.0));
        assert_eq!(p.derivative(3, 2.0), Some(0.0));
        assert_eq!(p.antiderivative(1.0), Some(3.0));
    }

    #[test]
    fn flat_cdf_is_continuous() {
        let f = PiecewiseFlatCdf::new(0.25, 0.75, 0.4);
        assert!((f.eval(0.25) - 0.4).abs() < 1e-15);
        assert_eq!(f.eval(0.5), 0.4);
        assert!((f.eval(0.75) - 0.4).abs() < 1e-15);
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.sup_deviation(), 0.6);
    }

    #[test]
    fn closures_are_functions() {
        let f = |x: f64| 2.0 * x;
        assert_eq!(Function1D::eval(&f, 0.25), 0.5);
        assert!(f.jumps().is_none());
    }
}
