//! Binomial probabilities and coefficients.
//!
//! The probability mass function uses Loader's saddle-point expansion
//! (Stirling remainder plus deviance `bd0`), which stays accurate to a few
//! ulps of relative error for degrees far beyond the point where
//! `C(m, k) x^k (1-x)^(m-k)` overflows or loses precision.

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

// Stirling series coefficients: 1/12, 1/360, 1/1260, 1/1680, 1/1188.
const S0: f64 = 0.083_333_333_333_333_33;
const S1: f64 = 0.002_777_777_777_777_778;
const S2: f64 = 0.000_793_650_793_650_793_7;
const S3: f64 = 0.000_595_238_095_238_095_2;
const S4: f64 = 0.000_841_750_841_750_841_8;

// ln(n!) - ln(sqrt(2 pi n) (n/e)^n) at n = 0, 0.5, ..., 15.
const SFERR_HALVES: [f64; 31] = [
    0.0,
    0.153_426_409_720_027_35,
    0.081_061_466_795_327_26,
    0.054_814_121_051_917_65,
    0.041_340_695_955_409_29,
    0.033_162_873_519_936_29,
    0.027_677_925_684_998_34,
    0.023_746_163_656_297_5,
    0.020_790_672_103_765_09,
    0.018_488_450_532_673_19,
    0.016_644_691_189_821_19,
    0.015_134_973_221_917_38,
    0.013_876_128_823_070_75,
    0.012_810_465_242_920_23,
    0.011_896_709_945_891_77,
    0.011_104_559_758_206_92,
    0.010_411_265_261_972_1,
    0.009_799_416_126_158_803,
    0.009_255_462_182_712_733,
    0.008_768_700_134_139_385,
    0.008_330_563_433_362_871,
    0.007_934_114_564_314_021,
    0.007_573_675_487_951_841,
    0.007_244_554_301_320_383,
    0.006_942_840_107_209_53,
    0.006_665_247_032_707_682,
    0.006_408_994_188_004_207,
    0.006_171_712_263_039_458,
    0.005_951_370_112_758_848,
    0.005_746_216_513_010_116,
    0.005_554_733_551_962_801,
];

/// Stirling remainder for integer arguments.
fn stirlerr(n: f64) -> f64 {
    if n <= 15.0 {
        return SFERR_HALVES[(n + n) as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `P(Bin(n, p) = k)` with `q = 1 - p` supplied separately.
pub(crate) fn binomial_pmf(k: usize, n: usize, p: f64, q: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let (kf, nf) = (k as f64, n as f64);
    if k == 0 {
        if n == 0 {
            return 1.0;
        }
        let lc = if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
        return lc.exp();
    }
    if k == n {
        let lc = if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
        return lc.exp();
    }
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(nf - kf) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = LN_2PI + kf.ln() + (-kf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// Exact `C(n, k)` in 128-bit arithmetic, or `None` on overflow.
pub fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// Largest derivative order for which the exact combinatorial constants
/// are computed.
pub const MAX_EXACT_ORDER: usize = 30;

/// `C(n, k)` as `f64` for the small arguments used by derivative orders,
/// failing beyond [`MAX_EXACT_ORDER`].
pub(crate) fn binomial_small(n: usize, k: usize, order: usize) -> Result<f64> {
    if order > MAX_EXACT_ORDER {
        return Err(Error::BinomialOverflow { k: order });
    }
    binomial_exact(n as u64, k as u64)
        .map(|c| c as f64)
        .ok_or(Error::BinomialOverflow { k: order })
}

/// Falling factorial `(m)_k = m (m-1) ... (m-k+1)`, with `(m)_0 = 1`.
pub fn falling_factorial(m: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m as f64 - i as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct product formula, adequate for small degrees.
    fn pmf_naive(k: usize, n: usize, p: f64) -> f64 {
        let c = binomial_exact(n as u64, k as u64).unwrap() as f64;
        c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }

    #[test]
    fn pmf_matches_product_formula() {
        for n in [1usize, 2, 3, 7, 16, 31, 60] {
            for &p in &[0.01, 0.2, 0.5, 0.73, 0.999] {
                for k in 0..=n {
                    let a = binomial_pmf(k, n, p, 1.0 - p);
                    let b = pmf_naive(k, n, p);
                    assert!((a - b).abs() <= 1e-13 * b + 1e-300, "n={n} k={k} p={p}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn pmf_large_degree_sums_to_one() {
        let n = 100_000;
        let p = 0.37;
        let s: f64 = (0..=n).map(|k| binomial_pmf(k, n, p, 1.0 - p)).sum();
        assert!((s - 1.0).abs() < 1e-12, "{s}");
    }

    #[test]
    fn exact_binomials() {
        assert_eq!(binomial_exact(58, 29), Some(30_067_266_499_541_040));
        assert_eq!(binomial_exact(4, 2), Some(6));
        assert_eq!(binomial_exact(3, 5), Some(0));
        assert!(binomial_small(70, 35, 31).is_err());
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling_factorial(5, 0), 1.0);
        assert_eq!(falling_factorial(5, 2), 20.0);
        assert_eq!(falling_factorial(5, 5), 120.0);
    }
}
