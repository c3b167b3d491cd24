//! Empirical, random Bernstein and kernel estimators.

use std::fmt;
use std::io::BufRead;
use std::sync::Arc;

use crate::error::{check_unit, Error, Result};
use crate::functions::{sigma2, Function1D};
use crate::operators::{difference_coefficients, node, weights_unchecked, OperatorParams};

/// Sorted observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    in_unit: bool,
}

impl Sample {
    /// Observations in `[0, 1]`; values outside are reported by index.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let bad: Vec<(usize, f64)> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| !(0.0..=1.0).contains(*v))
            .map(|(i, &v)| (i + 1, v))
            .collect();
        if !bad.is_empty() {
            return Err(Error::ValuesOutsideUnit(bad));
        }
        Self::unrestricted(values)
    }

    /// Finite observations anywhere on the real line, for the kernel
    /// estimator.
    pub fn unrestricted(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("sample", format!("observation {} is not finite", i + 1)));
        }
        values.sort_by(f64::total_cmp);
        let in_unit = values[0] >= 0.0 && values[values.len() - 1] <= 1.0;
        Ok(Self { values, in_unit })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn in_unit_interval(&self) -> bool {
        self.in_unit
    }

    fn require_unit(&self) -> Result<()> {
        if self.in_unit {
            Ok(())
        } else {
            let bad = self
                .values
                .iter()
                .filter(|v| !(0.0..=1.0).contains(*v))
                .map(|&v| (0, v))
                .collect();
            Err(Error::ValuesOutsideUnit(bad))
        }
    }

    /// `#{X_r <= x}`.
    pub fn count_le(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }

    /// `#{X_r <= i/m}` for `i = 0..=m`, by one merge pass.
    pub fn grid_counts(&self, m: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(m + 1);
        let mut j = 0;
        for i in 0..=m {
            let t = node(i, m);
            while j < self.values.len() && self.values[j] <= t {
                j += 1;
            }
            out.push(j);
        }
        out
    }
}

/// Reads one observation per line; blank lines are skipped and an optional
/// first-line header `x` is accepted. A trailing comma-separated column
/// list uses its first field.
pub fn read_observations<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        if i == 0 && field.trim_matches('"').eq_ignore_ascii_case("x") {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push((i + 1, v)),
            _ => {
                return Err(Error::Malformed {
                    line: i + 1,
                    content: field.to_string(),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(out.into_iter().map(|(_, v)| v).collect())
}

/// Reads observations and requires them to lie in `[0, 1]`, reporting
/// offending values with their line numbers.
pub fn read_unit_sample<R: BufRead>(reader: R) -> Result<Sample> {
    let mut lines = Vec::new();
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || (i == 0 && field.trim_matches('"').eq_ignore_ascii_case("x")) {
            continue;
        }
        let v = field
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Malformed {
                line: i + 1,
                content: field.to_string(),
            })?;
        lines.push(i + 1);
        values.push(v);
    }
    let bad: Vec<(usize, f64)> = lines
        .iter()
        .zip(&values)
        .filter(|(_, v)| !(0.0..=1.0).contains(*v))
        .map(|(&l, &v)| (l, v))
        .collect();
    if !bad.is_empty() {
        return Err(Error::ValuesOutsideUnit(bad));
    }
    Sample::new(values)
}

/// `Y_n(x) = #{X_r <= x} / n`, right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sample: Sample,
}

impl EmpiricalCdf {
    pub fn new(sample: Sample) -> Self {
        Self { sample }
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }
}

impl Function1D for EmpiricalCdf {
    fn eval(&self, x: f64) -> f64 {
        self.sample.count_le(x) as f64 / self.sample.len() as f64
    }

    fn jumps(&self) -> Option<&[f64]> {
        Some(self.sample.values())
    }
}

/// `Y_n(x)`.
pub fn empirical_cdf(sample: &Sample, x: f64) -> f64 {
    sample.count_le(x) as f64 / sample.len() as f64
}

/// Kolmogorov distance `sup_x |Y_n(x) - F(x)|` for a continuous `F`.
pub fn ks_distance<F: Function1D + ?Sized>(sample: &Sample, f: &F) -> f64 {
    let n = sample.len() as f64;
    let v = sample.values();
    let mut best = 0.0f64;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let fx = f.eval(v[i]);
        best = best.max((fx - i as f64 / n).abs()).max(((j + 1) as f64 / n - fx).abs());
        i = j + 1;
    }
    best
}

/// `B_m(Y_n; x)` with the grid values `Y_n(k/m)` computed once.
#[derive(Debug, Clone)]
pub struct BernsteinEstimator {
    m: usize,
    grid: Vec<f64>,
}

impl BernsteinEstimator {
    pub fn new(sample: &Sample, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("m", format!("degree {m} must be at least 2")));
        }
        sample.require_unit()?;
        let n = sample.len() as f64;
        let grid = sample.grid_counts(m).into_iter().map(|c| c as f64 / n).collect();
        Ok(Self { m, grid })
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        weights_unchecked(self.m, x).iter().map(|(k, w)| w * self.grid[k]).sum()
    }
}

/// `B_m(Y_n; x) = sum_k Y_n(k/m) p_{m,k}(x)`.
pub fn bernstein_cdf_estimate(sample: &Sample, m: usize, x: f64) -> Result<f64> {
    check_unit(x)?;
    if m < 2 {
        return Err(Error::invalid("m", format!("degree {m} must be at least 2")));
    }
    sample.require_unit()?;
    let n = sample.len() as f64;
    Ok(weights_unchecked(m, x)
        .iter()
        .map(|(k, w)| w * sample.count_le(node(k, m)) as f64 / n)
        .sum())
}

/// Closed form `B_2(Y_n; x) = 2 sigma^2(x) Y_n(1/2) + x^2`. It coincides
/// with the degree-2 Bernstein estimator when no observation sits at `0`.
pub fn b2_uniform_estimate(sample: &Sample, x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(2.0 * sigma2(x) * empirical_cdf(sample, 0.5) + x * x)
}

/// `B_m^(k)(Y_n; x)` from the bin counts
/// `#{X_r in ((l + j)/m, (l + j + 1)/m]}`. Observations at `0` fall in no
/// bin.
#[derive(Debug, Clone)]
pub struct DerivativeEstimator {
    params: OperatorParams,
    /// Bin counts divided by `n`.
    bins: Vec<f64>,
    coeffs: Vec<f64>,
}

impl DerivativeEstimator {
    pub fn new(sample: &Sample, m: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "use BernsteinEstimator for k = 0"));
        }
        if m <= k {
            return Err(Error::DegreeNotAboveOrder { m, k });
        }
        sample.require_unit()?;
        let params = OperatorParams::new(m, k)?;
        let n = sample.len() as f64;
        let counts = sample.grid_counts(m);
        let bins = counts.windows(2).map(|w| (w[1] - w[0]) as f64 / n).collect();
        Ok(Self {
            params,
            bins,
            coeffs: difference_coefficients(k - 1)?,
        })
    }

    pub fn params(&self) -> OperatorParams {
        self.params
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        let OperatorParams { m, k, falling } = self.params;
        let acc: f64 = weights_unchecked(m - k, x)
            .iter()
            .map(|(l, w)| {
                let d: f64 = self.coeffs.iter().enumerate().map(|(j, c)| c * self.bins[l + j]).sum();
                w * d
            })
            .sum();
        Ok(falling * acc)
    }
}

pub fn bernstein_derivative_estimate(sample: &Sample, m: usize, k: usize, x: f64) -> Result<f64> {
    DerivativeEstimator::new(sample, m, k)?.eval(x)
}

/// Kernel CDF `F~` on the real line.
#[derive(Clone)]
pub enum KernelCdf {
    /// Standard normal CDF.
    Gaussian,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for KernelCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelCdf::Gaussian => f.write_str("Gaussian"),
            KernelCdf::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl KernelCdf {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            KernelCdf::Gaussian => standard_normal_cdf(t),
            KernelCdf::Custom(f) => f(t),
        }
    }
}

/// `Phi(t)` through the complementary error function.
pub fn standard_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kernel: KernelCdf,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Self {
        Self {
            kernel: KernelCdf::Gaussian,
            bandwidth,
        }
    }
}

/// `(1/n) sum_r F~((x - X_r) / h)`.
pub fn kernel_cdf_estimate(sample: &Sample, kernel: &KernelSpec, x: f64) -> Result<f64> {
    if !(kernel.bandwidth > 0.0) {
        return Err(Error::invalid("bandwidth", format!("{} must be positive", kernel.bandwidth)));
    }
    let h = kernel.bandwidth;
    let s: f64 = sample.values().iter().map(|&v| kernel.kernel.eval((x - v) / h)).sum();
    Ok(s / sample.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{bernstein_apply, bernstein_derivative_apply};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empirical_examples() {
        let s = sample(&[0.6, 0.2]);
        assert_eq!(s.values(), &[0.2, 0.6]);
        assert_eq!(empirical_cdf(&s, 0.1), 0.0);
        assert_eq!(empirical_cdf(&s, 0.5), 0.5);
        assert_eq!(empirical_cdf(&s, 0.6), 1.0);
        assert_eq!(EmpiricalCdf::new(s).eval(1.0), 1.0);
        assert!(matches!(Sample::new(vec![0.2, 1.5]), Err(Error::ValuesOutsideUnit(v)) if v == vec![(2, 1.5)]));
        assert!(matches!(Sample::new(vec![]), Err(Error::EmptySample)));
    }

    #[test]
    fn reading_observations() {
        let text = "x\n0.25\n\n0.5,ignored\n 0.75 \n";
        assert_eq!(read_observations(text.as_bytes()).unwrap(), vec![0.25, 0.5, 0.75]);
        let err = read_unit_sample("0.1\n1.5\n0.2\n-3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::ValuesOutsideUnit(ref v) if v == &vec![(2, 1.5), (4, -3.0)]));
        let err = read_observations("0.1\nabc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn bernstein_estimate_examples() {
        let zeros = sample(&[0.0, 0.0, 0.0]);
        for x in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(bernstein_cdf_estimate(&zeros, 7, x).unwrap(), 1.0, epsilon = 1e-14);
        }
        let s = sample(&[0.25, 0.75]);
        // direct weighted sum with exact grid values Y(k/10)
        let direct: f64 = (0..=10usize)
            .map(|k| {
                let y = empirical_cdf(&s, k as f64 / 10.0);
                let c = crate::binomial::binomial_exact(10, k as u64).unwrap() as f64;
                y * c * 0.5f64.powi(10)
            })
            .sum();
        assert_abs_diff_eq!(bernstein_cdf_estimate(&s, 10, 0.5).unwrap(), direct, epsilon = 1e-15);
        assert!(bernstein_cdf_estimate(&s, 1, 0.5).is_err());
        let est = BernsteinEstimator::new(&s, 10).unwrap();
        assert_eq!(est.eval(0.5).unwrap(), bernstein_cdf_estimate(&s, 10, 0.5).unwrap());
    }

    #[test]
    fn b2_examples() {
        let s = sample(&[0.1, 0.2, 0.9]);
        assert_abs_diff_eq!(b2_uniform_estimate(&s, 0.4).unwrap(), 0.48, epsilon = 1e-15);
        let half = sample(&[0.3, 0.7]);
        for x in [0.0, 0.1, 0.5, 0.93, 1.0] {
            assert_abs_diff_eq!(b2_uniform_estimate(&half, x).unwrap(), x, epsilon = 1e-15);
        }
        assert_eq!(b2_uniform_estimate(&s, 0.0).unwrap(), 0.0);
        assert_eq!(b2_uniform_estimate(&s, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            b2_uniform_estimate(&s, 0.4).unwrap(),
            bernstein_cdf_estimate(&s, 2, 0.4).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn derivative_examples() {
        let ones = sample(&[1.0, 1.0, 1.0, 1.0]);
        for x in [0.0, 0.4, 1.0] {
            // only the last bin is occupied: 4 p_{3,3}(x)
            assert_abs_diff_eq!(bernstein_derivative_estimate(&ones, 4, 1, x).unwrap(), 4.0 * x.powi(3), epsilon = 1e-14);
        }
        let s = sample(&[0.25, 0.75]);
        assert_abs_diff_eq!(bernstein_derivative_estimate(&s, 2, 1, 0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(bernstein_derivative_estimate(&s, 2, 2, 0.5), Err(Error::DegreeNotAboveOrder { .. })));
        // observations at zero fall in no bin
        let z = sample(&[0.0, 0.0]);
        assert_eq!(bernstein_derivative_estimate(&z, 5, 1, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn kernel_examples() {
        let s = Sample::unrestricted(vec![0.5]).unwrap();
        let k = KernelSpec::gaussian(0.1);
        assert_abs_diff_eq!(kernel_cdf_estimate(&s, &k, 0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_cdf_estimate(&s, &k, 1e6).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_cdf_estimate(&s, &k, 0.6).unwrap(), 0.841_344_746_068_542_9, epsilon = 1e-10);
        assert!(kernel_cdf_estimate(&s, &KernelSpec::gaussian(0.0), 0.5).is_err());
        let logistic = KernelSpec {
            kernel: KernelCdf::Custom(Arc::new(|t: f64| 1.0 / (1.0 + (-t).exp()))),
            bandwidth: 1.0,
        };
        assert_abs_diff_eq!(kernel_cdf_estimate(&s, &logistic, 0.5).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn normal_cdf_matches_series() {
        // Phi(t) = 1/2 + phi(t) sum_j t^(2j+1) / (1 3 5 ... (2j+1))
        for &t in &[-3.0f64, -1.0, -0.2, 0.0, 0.7, 1.0, 2.5] {
            let mut term = t;
            let mut sum = t;
            for j in 1..200 {
                term *= t * t / (2 * j + 1) as f64;
                sum += term;
            }
            let series = 0.5 + (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() * sum;
            assert!((standard_normal_cdf(t) - series).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn ks_distance_examples() {
        let s = sample(&[0.5]);
        assert_abs_diff_eq!(ks_distance(&s, &|x: f64| x), 0.5, epsilon = 1e-15);
        let s = sample(&[0.2, 0.2, 0.9]);
        let brute = (0..=100_000)
            .map(|i| {
                let x = i as f64 / 100_000.0;
                (empirical_cdf(&s, x) - x).abs()
            })
            .fold(0.0, f64::max);
        assert!((ks_distance(&s, &|x: f64| x) - brute).abs() < 1e-4);
    }

    fn uniform_samples() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0001f64..1.0, 1..60)
    }

    proptest! {
        #[test]
        fn estimates_are_monotone_and_bounded(v in uniform_samples(), m in 2usize..80) {
            let s = Sample::new(v).unwrap();
            let est = BernsteinEstimator::new(&s, m).unwrap();
            let k = KernelSpec::gaussian(0.05);
            let (mut pb, mut pk) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for i in 0..=1000 {
                let x = i as f64 / 1000.0;
                let b = est.eval(x).unwrap();
                let kv = kernel_cdf_estimate(&s, &k, x).unwrap();
                prop_assert!((-1e-14..=1.0 + 1e-14).contains(&b));
                prop_assert!((0.0..=1.0).contains(&kv));
                prop_assert!(b >= pb - 1e-13);
                prop_assert!(kv >= pk - 1e-15);
                pb = b;
                pk = kv;
            }
        }

        #[test]
        fn derivative_formulas_agree(v in uniform_samples(), m in 2usize..60, k in 1usize..4, x in 0.0f64..=1.0) {
            prop_assume!(m > k);
            let s = Sample::new(v).unwrap();
            let bins = bernstein_derivative_estimate(&s, m, k, x).unwrap();
            let ecdf = EmpiricalCdf::new(s);
            let diff = bernstein_derivative_apply(&ecdf, OperatorParams::new(m, k).unwrap(), x).unwrap();
            // rounding in the k-th difference scales like (m)_k
            let scale = crate::binomial::falling_factorial(m, k) * (1u64 << k) as f64;
            prop_assert!((bins - diff).abs() <= 1e-14 * scale, "{} vs {}", bins, diff);
        }

        #[test]
        fn error_decomposition(v in uniform_samples(), m in 2usize..100, x in 0.0f64..=1.0) {
            let f = |t: f64| t.powf(1.3);
            let s = Sample::new(v).unwrap();
            let ecdf = EmpiricalCdf::new(s.clone());
            let lhs = bernstein_cdf_estimate(&s, m, x).unwrap() - f(x);
            let noise = bernstein_apply(&|t: f64| ecdf.eval(t) - f(t), m, x).unwrap();
            let bias = bernstein_apply(&f, m, x).unwrap() - f(x);
            prop_assert!((lhs - noise - bias).abs() <= 1e-12);
        }

        #[test]
        fn derivative_estimate_integrates(v in uniform_samples(), m in 2usize..40) {
            let s = Sample::new(v).unwrap();
            let d = DerivativeEstimator::new(&s, m, 1).unwrap();
            let rule = crate::quadrature::GaussLegendre::new(32);
            let integral = rule.integrate(0.0, 1.0, |x| d.eval(x).unwrap());
            let b = BernsteinEstimator::new(&s, m).unwrap();
            let want = b.eval(1.0).unwrap() - b.eval(0.0).unwrap();
            prop_assert!((integral - want).abs() < 1e-6);
        }

        #[test]
        fn b2_depends_only_on_the_middle_count(v in uniform_samples(), shift in 0.0f64..0.49, x in 0.0f64..=1.0) {
            // move every observation within its half of [0, 1]
            let s = Sample::new(v.clone()).unwrap();
            let moved: Vec<f64> = v.iter().map(|&t| if t <= 0.5 { (t * (1.0 - shift)).max(1e-9) } else { 0.5 + (t - 0.5) * (1.0 - shift) + 1e-9 }).collect();
            let s2 = Sample::new(moved).unwrap();
            prop_assert_eq!(empirical_cdf(&s, 0.5), empirical_cdf(&s2, 0.5));
            prop_assert_eq!(b2_uniform_estimate(&s, x).unwrap(), b2_uniform_estimate(&s2, x).unwrap());
        }
    }
}
