//! Monte Carlo experiments: power-family sampling, coverage and width of
//! the bands and intervals, MSE/MISE of the degree-2 estimator, figure
//! data and empirical checks of the deterministic and probabilistic bounds.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bounds::{bernstein_error_bound, dkw_half_width, flat_region_bound, flat_region_window, kantorovich_error_bound_for};
use crate::confidence::{
    b2_band_delta, b2_interval_delta, b2_interval_weakened_bound, cdf_deviation_bound, derivative_deviation_bound,
    fmt_float, plan_band_for_cdf, plan_band_for_derivative, plan_interval_for_cdf, plan_interval_for_derivative,
    CenterEstimator, RegionPlan, SearchOptions,
};
use crate::error::{check_alpha, check_unit, Error, Result};
use crate::estimators::{
    b2_uniform_estimate, empirical_cdf, ks_distance, BernsteinEstimator, DerivativeEstimator, Sample,
};
use crate::functions::{sigma2, Function1D, PiecewiseFlatCdf, PowerCdf, PowerDensity};
use crate::operators::{bernstein_apply, KantorovichCells, OperatorParams, ShiftLaw};
use crate::smoothness::{Oracle, SmoothnessSpec};

/// Replicates per block of the deterministic reduction.
const BLOCK: usize = 256;

/// The splitmix64 finalizer, a bijection of `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `rep`, independent of execution order.
pub fn replicate_seed(seed: u64, rep: u64) -> u64 {
    mix64(mix64(seed) ^ rep.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// `n` draws `U^(1/beta)` with `U` uniform, i.e. a sample from `F(x) = x^beta`.
pub fn sample_power(beta: f64, n: usize, seed: u64) -> Result<Sample> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", format!("{beta} must be positive")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = PowerCdf::new(beta);
    Sample::new((0..n).map(|_| q.quantile(rng.random::<f64>())).collect())
}

fn replicate_sample(cfg: &ExperimentConfig, rep: usize) -> Result<Sample> {
    sample_power(cfg.beta, cfg.n, replicate_seed(cfg.seed, rep as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1Band,
    Fig1Interval,
    Fig2Cdf,
    Fig3Density,
    MiseB2,
    Coverage,
    BoundCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Fig1Band,
        Experiment::Fig1Interval,
        Experiment::Fig2Cdf,
        Experiment::Fig3Density,
        Experiment::MiseB2,
        Experiment::Coverage,
        Experiment::BoundCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Fig1Band => "fig1_band",
            Experiment::Fig1Interval => "fig1_interval",
            Experiment::Fig2Cdf => "fig2_cdf",
            Experiment::Fig3Density => "fig3_density",
            Experiment::MiseB2 => "mise_b2",
            Experiment::Coverage => "coverage",
            Experiment::BoundCheck => "bound_check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid("experiment", format!("unknown experiment {s:?}")))
    }
}

/// Which bound `bound_check` examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// `|B_m(F_beta; x) - F_beta(x)|` against the pointwise modulus bound.
    Bernstein,
    /// Kantorovich operators on `rho_beta` against their pointwise bound.
    Kantorovich,
    /// Piecewise-flat CDF against the exponential bound.
    Flat,
    /// Deviation frequency of `B_m(Y_n; x)` against its probability bound.
    CdfConcentration,
    /// Deviation frequency of `B_m'(Y_n; x)` against its probability bound.
    DerivativeConcentration,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [
        BoundKind::Bernstein,
        BoundKind::Kantorovich,
        BoundKind::Flat,
        BoundKind::CdfConcentration,
        BoundKind::DerivativeConcentration,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Bernstein => "bernstein",
            BoundKind::Kantorovich => "kantorovich",
            BoundKind::Flat => "flat",
            BoundKind::CdfConcentration => "cdf-concentration",
            BoundKind::DerivativeConcentration => "derivative-concentration",
        }
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid("bound", format!("unknown bound kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub beta: f64,
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub x_grid: Vec<f64>,
    /// Replaces the selected degree in the constructions that select one,
    /// and the degree of `bound_check`.
    pub m_override: Option<usize>,
    pub bound: Option<BoundKind>,
}

/// `count + 1` equally spaced points from `lo` to `hi`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect()
}

/// `0.1, 0.2, ..., 0.9`.
fn deciles() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

impl ExperimentConfig {
    /// Settings of the published setups; seed `0`.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            beta: 1.0,
            n: 49,
            reps: 1,
            alpha: 0.05,
            seed: 0,
            x_grid: linear_grid(0.0, 1.0, 100),
            m_override: None,
            bound: None,
        };
        match experiment {
            Experiment::Fig1Band => base,
            Experiment::Fig1Interval => ExperimentConfig { x_grid: deciles(), ..base },
            Experiment::Fig2Cdf => ExperimentConfig {
                beta: 2.0,
                n: 1500,
                reps: 3,
                x_grid: deciles(),
                ..base
            },
            Experiment::Fig3Density => ExperimentConfig {
                beta: 3.0,
                n: 2500,
                reps: 3,
                x_grid: (3..=9).map(|i| i as f64 / 10.0).collect(),
                ..base
            },
            Experiment::MiseB2 => ExperimentConfig {
                n: 100,
                reps: 10_000,
                x_grid: linear_grid(0.0, 1.0, 200),
                ..base
            },
            Experiment::Coverage => ExperimentConfig {
                reps: 20_000,
                x_grid: deciles(),
                ..base
            },
            Experiment::BoundCheck => ExperimentConfig {
                bound: Some(BoundKind::Bernstein),
                beta: 0.5,
                ..base
            },
        }
    }

    /// Defaults of `bound_check` for one bound kind.
    pub fn bound_check(kind: BoundKind) -> Self {
        let base = ExperimentConfig {
            bound: Some(kind),
            ..Self::defaults(Experiment::BoundCheck)
        };
        match kind {
            BoundKind::Bernstein => base,
            BoundKind::Kantorovich => ExperimentConfig { beta: 2.0, ..base },
            BoundKind::Flat => ExperimentConfig {
                m_override: Some(200),
                ..base
            },
            BoundKind::CdfConcentration => ExperimentConfig {
                beta: 2.0,
                n: 200,
                reps: 100_000,
                m_override: Some(20),
                x_grid: vec![0.3, 0.5, 0.7],
                ..base
            },
            BoundKind::DerivativeConcentration => ExperimentConfig {
                beta: 2.0,
                n: 500,
                reps: 100_000,
                m_override: Some(10),
                x_grid: vec![0.3, 0.5, 0.7],
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid("reps", "at least one replicate is needed"));
        }
        if self.n == 0 {
            return Err(Error::invalid("n", "sample size must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta", format!("{} must be positive", self.beta)));
        }
        check_alpha(self.alpha)?;
        if self.x_grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        self.x_grid.iter().try_for_each(|&x| check_unit(x))?;
        match self.experiment {
            Experiment::Fig1Band | Experiment::Fig1Interval | Experiment::MiseB2 if self.beta != 1.0 => Err(Error::invalid(
                "beta",
                format!("{} uses uniform observations, beta must be 1", self.experiment),
            )),
            Experiment::Fig3Density if self.beta <= 1.0 => Err(Error::invalid(
                "beta",
                "density experiments need beta > 1 so that the density is continuous on [0, 1]",
            )),
            Experiment::Fig1Interval if self.x_grid.iter().any(|&x| x == 0.0 || x == 1.0) => {
                Err(Error::invalid("x_grid", "pointwise intervals need 0 < x < 1"))
            }
            Experiment::BoundCheck if self.bound.is_none() => Err(Error::invalid("bound", "bound_check needs a bound kind")),
            _ => Ok(()),
        }
    }
}

/// CSV cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Float(v) => f.write_str(&fmt_float(*v)),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Values of a float column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[i] {
                    Cell::Float(v) => *v,
                    Cell::Int(v) => *v as f64,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub runtime_seconds: f64,
}

impl ExperimentResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.summary.get(key).copied()
    }

    /// SHA-256 over every table name and CSV body, in order.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tables {
            h.update(t.name.as_bytes());
            h.update(b"\n");
            h.update(t.to_csv().as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes `<experiment>_<table>.csv` for each table and
    /// `<experiment>_summary.json`; returns the written paths.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = self.config.experiment.name();
        let mut paths = Vec::new();
        let mut files = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{stem}_{}.csv", t.name));
            let body = t.to_csv();
            std::fs::write(&path, &body)?;
            let digest: String = Sha256::digest(body.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
            files.push(serde_json::json!({ "table": t.name, "file": path.file_name().map(|f| f.to_string_lossy().into_owned()), "sha256": digest }));
            paths.push(path);
        }
        let summary = serde_json::json!({
            "config": self.config,
            "summary": self.summary,
            "notes": self.notes,
            "files": files,
            "content_hash": self.content_hash(),
            "runtime_seconds": self.runtime_seconds,
        });
        let path = dir.join(format!("{stem}_summary.json"));
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        paths.push(path);
        Ok(paths)
    }
}

/// Per-slot sums over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl Moments {
    fn new(width: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; width],
            sum_sq: vec![0.0; width],
        }
    }

    fn add(&mut self, v: &[f64]) {
        self.count += 1;
        for (i, &x) in v.iter().enumerate() {
            self.sum[i] += x;
            self.sum_sq[i] += x * x;
        }
    }

    fn merge(&mut self, o: &Moments) {
        self.count += o.count;
        for i in 0..self.sum.len() {
            self.sum[i] += o.sum[i];
            self.sum_sq[i] += o.sum_sq[i];
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.count as f64
    }

    /// Standard error of the mean.
    pub fn se(&self, i: usize) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let mean = self.mean(i);
        let var = ((self.sum_sq[i] - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Runs `f` on every replicate, filling `width` values, and reduces blocks
/// of [`BLOCK`] replicates in parallel and the block sums in order, so the
/// result does not depend on scheduling.
pub fn replicate_moments<F>(reps: usize, width: usize, f: F) -> Result<Moments>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let blocks: Vec<Moments> = (0..reps.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut m = Moments::new(width);
            let mut buf = vec![0.0; width];
            for rep in b * BLOCK..((b + 1) * BLOCK).min(reps) {
                f(rep, &mut buf)?;
                m.add(&buf);
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let mut total = Moments::new(width);
    for b in &blocks {
        total.merge(b);
    }
    Ok(total)
}

/// Interval `B_m(Y_n; x) +- z_{alpha/2} sqrt(F^(1 - F^) / n)` with
/// `m = ceil(n^(2/3))`, justified only asymptotically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineInterval {
    pub label: &'static str,
    pub x: f64,
    pub m: usize,
    pub z: f64,
    pub center: f64,
    pub half_width: f64,
}

pub const BASELINE_LABEL: &str = "ASYMPTOTIC-BASELINE";

/// `ceil(n^(2/3))`, robust to rounding at perfect cubes.
pub fn baseline_degree(n: usize) -> usize {
    let v = (n as f64).cbrt().powi(2);
    let r = v.round();
    let m = if (v - r).abs() < 1e-9 * r.max(1.0) { r } else { v.ceil() };
    (m as usize).max(2)
}

/// `z_{alpha/2}`, the upper `alpha/2` standard normal quantile.
pub fn normal_quantile_upper(alpha: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

pub fn asymptotic_interval_baseline(sample: &Sample, x: f64, alpha: f64) -> Result<BaselineInterval> {
    check_alpha(alpha)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Precondition {
            constraint: "sigma(x) > 0, i.e. 0 < x < 1",
            lhs: x,
            rhs: 0.0,
        });
    }
    let m = baseline_degree(sample.len());
    let center = BernsteinEstimator::new(sample, m)?.eval(x)?;
    let z = normal_quantile_upper(alpha);
    Ok(BaselineInterval {
        label: BASELINE_LABEL,
        x,
        m,
        z,
        center,
        half_width: z * (sigma2(center) / sample.len() as f64).sqrt(),
    })
}

/// Dispatches on `config.experiment`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let mut out = ExperimentResult {
        config: config.clone(),
        tables: Vec::new(),
        summary: BTreeMap::new(),
        notes: Vec::new(),
        runtime_seconds: 0.0,
    };
    match config.experiment {
        Experiment::Fig1Band => fig1_band(config, &mut out)?,
        Experiment::Fig1Interval => fig1_interval(config, &mut out)?,
        Experiment::Fig2Cdf => figure_regions(config, 0, &mut out)?,
        Experiment::Fig3Density => figure_regions(config, 1, &mut out)?,
        Experiment::MiseB2 => mise(config, &mut out)?,
        Experiment::Coverage => coverage(config, &mut out)?,
        Experiment::BoundCheck => match config.bound.expect("validated") {
            BoundKind::Bernstein => check_bernstein(config, &mut out)?,
            BoundKind::Kantorovich => check_kantorovich(config, &mut out)?,
            BoundKind::Flat => check_flat(config, &mut out)?,
            BoundKind::CdfConcentration => check_cdf_concentration(config, &mut out)?,
            BoundKind::DerivativeConcentration => check_derivative_concentration(config, &mut out)?,
        },
    }
    out.notes.push(format!("replicate r uses seed replicate_seed({}, r)", config.seed));
    out.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// MSE and MISE of the degree-2 estimator for uniform samples of size `n`.
pub fn mse_mise_b2(n: usize, reps: usize, seed: u64, x_grid: &[f64]) -> Result<ExperimentResult> {
    run_experiment(&ExperimentConfig {
        n,
        reps,
        seed,
        x_grid: x_grid.to_vec(),
        ..ExperimentConfig::defaults(Experiment::MiseB2)
    })
}

/// Composite Simpson rule on equally spaced values over `[0, 1]`.
fn simpson(values: &[f64]) -> f64 {
    let p = values.len() - 1;
    debug_assert!(p % 2 == 0);
    let h = 1.0 / p as f64;
    let mut s = values[0] + values[p];
    for (i, v) in values.iter().enumerate().take(p).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

fn fig1_band(cfg: &ExperimentConfig, out: &mut ExperimentResult) -> Result<()> {
    let (n, alpha) = (cfg.n, cfg.alpha);
    let delta = b2_band_delta(n, alpha);
    let dkw = dkw_half_width(n, alpha);
    let s = replicate_sample(cfg, 0)?;
    let mut t = Table::new("curves", &["x", "truth", "b2", "b2_lower", "b2_upper", "ecdf", "dkw_lower", "dkw_upper"]);
    for &x in &cfg.x_grid {
        let b = b2_uniform_estimate(&s, x)?;
        let e = empirical_cdf(&s, x);
        t.push(vec![x.into(), x.into(), b.into(), (b - delta).into(), (b + delta).into(), e.into(), (e - dkw).into(), (e + dkw).into()]);
    }
    out.tables.push(t);
    out.summary.insert("b2_half_width".into(), delta);
    out.summary.insert("dkw_half_width".into(), dkw);
    out.summary.insert("width_ratio".into(), delta / dkw);
    if cfg.reps > 1 {
        let m = replicate_moments(cfg.reps, 2, |rep, v| {
            let s = replicate_sample(cfg, rep)?;
            // sup |B_2(Y_n) - x| = |Y_n(1/2) - 1/2| / 2 for uniform F
            v[0] = ((empirical_cdf(&s, 0.5) - 0.5).abs() / 2.0 > delta) as u8 as f64;
            v[1] = (ks_distance(&s, &|x: f64| x) > dkw) as u8 as f64;
            Ok(())
        })?;
        out.summary.insert("b2_noncoverage".into(), m.mean(0));
        out.summary.insert("dkw_noncoverage".into(), m.mean(1));
    }
    Ok(())
}

fn fig1_interval(cfg: &ExperimentConfig, out: &mut ExperimentResult) -> Result<()> {
    let (n, alpha) = (cfg.n, cfg.alpha);
    let delta = b2_interval_delta(n, alpha)?;
    let s = replicate_sample(cfg, 0)?;
    let mut t = Table::new("intervals", &["x", "truth", "estimate", "lower", "upper", "half_width"]);
    for &x in &cfg.x_grid {
        let b = b2_uniform_estimate(&s, x)?;
        let h = 4.0 * sigma2(x) * delta;
        t.push(vec![x.into(), x.into(), b.into(), (b - h).into(), (b + h).into(), h.into()]);
    }
    out.tables.push(t);
    out.summary.insert("delta".into(), delta);
    if let Some(w) = b2_interval_weakened_bound(n, delta) {
        out.summary.insert("weakened_bound".into(), w);
    }
    if cfg.reps > 1 {
        let xs = &cfg.x_grid;
        let m = replicate_moments(cfg.reps, xs.len(), |rep, v| {
            let s = replicate_sample(cfg, rep)?;
            for (i, &x) in xs.iter().enumerate() {
                v[i] = ((b2_uniform_estimate(&s, x)? - x).abs() > 4.0 * sigma2(x) * delta) as u8 as f64;
            }
            Ok(())
        })?;
        let mut c = Table::new("coverage", &["x", "noncoverage", "se"]);
        for (i, &x) in xs.iter().enumerate() {
            c.push(vec![x.into(), m.mean(i).into(), m.se(i).into()]);
        }
        out.summary.insert("max_noncoverage".into(), (0..xs.len()).map(|i| m.mean(i)).fold(0.0, f64::max));
        out.tables.push(c);
    }
    Ok(())
}

fn override_degree(plan: &mut RegionPlan, m: usize) {
    plan.m_selected = m;
    plan.estimator = match plan.estimator {
        CenterEstimator::Bernstein { .. } => CenterEstimator::Bernstein { m },
        CenterEstimator::Derivative { k, .. } => CenterEstimator::Derivative { m, k },
        e => e,
    };
    plan.parameters.insert("m_override", m as f64);
}

/// Band and pointwise intervals for `F^(order)` of a power-family oracle
/// on the grid, with per-replicate curves and coverage.
fn figure_regions(cfg: &ExperimentConfig, order: usize, out: &mut ExperimentResult) -> Result<()> {
    let oracle = Oracle::power(cfg.beta);
    let spec = SmoothnessSpec::Oracle(oracle.clone());
    let opts = SearchOptions::default();
    let xs = &cfg.x_grid;
    let mut band = if order == 0 {
        plan_band_for_cdf(cfg.n, cfg.alpha, &spec, xs, &opts)?
    } else {
        plan_band_for_derivative(cfg.n, order, cfg.alpha, &spec, xs, &opts)?
    };
    let mut intervals = Vec::with_capacity(xs.len());
    for &x in xs {
        let plan = if order == 0 {
            plan_interval_for_cdf(cfg.n, x, cfg.alpha, &spec, None, &opts)
        } else {
            plan_interval_for_derivative(cfg.n, x, order, cfg.alpha, &spec, None, &opts)
        };
        match plan {
            Ok(p) => intervals.push(Some(p)),
            Err(e) => {
                out.notes.push(format!("no interval at x = {x}: {e}"));
                intervals.push(None);
            }
        }
    }
    if let Some(m) = cfg.m_override {
        override_degree(&mut band, m);
        intervals.iter_mut().flatten().for_each(|p| override_degree(p, m));
        out.notes.push(format!("degree overridden to m = {m}"));
    }
    let mut degrees = Table::new("degrees", &["region", "x", "m", "half_width"]);
    degrees.push(vec!["band".into(), Cell::Text(String::new()), band.m_selected.into(), band.half_width[0].into()]);
    for (p, &x) in intervals.iter().zip(xs) {
        if let Some(p) = p {
            degrees.push(vec!["interval".into(), x.into(), p.m_selected.into(), p.half_width[0].into()]);
        }
    }
    let rule = (cfg.n as f64).powf(1.0 / if order == 0 { cfg.beta } else { cfg.beta.min(3.0) });
    out.summary.insert("band_m".into(), band.m_selected as f64);
    out.summary.insert("degree_rule".into(), rule);
    let truth: Vec<f64> = xs.iter().map(|&x| oracle.derivative_at(order, x).unwrap_or(f64::NAN)).collect();

    struct Rep {
        rows: Vec<Vec<Cell>>,
        band_ok: bool,
        all_ok: bool,
        per_x: Vec<bool>,
    }
    let reps: Vec<Rep> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let s = replicate_sample(cfg, rep)?;
            let b = band.realize(&s)?;
            let mut rows = Vec::with_capacity(xs.len());
            let mut per_x = Vec::with_capacity(xs.len());
            for (i, &x) in xs.iter().enumerate() {
                let (bc, bh) = (b.center[i], b.plan.half_width[i]);
                let (ic, ih) = match &intervals[i] {
                    Some(p) => {
                        let r = p.realize(&s)?;
                        (r.center[0], r.plan.half_width[0])
                    }
                    None => (f64::NAN, f64::NAN),
                };
                per_x.push(intervals[i].is_none() || (truth[i] - ic).abs() <= ih);
                rows.push(vec![
                    rep.into(),
                    x.into(),
                    truth[i].into(),
                    bc.into(),
                    (bc - bh).into(),
                    (bc + bh).into(),
                    ic.into(),
                    (ic - ih).into(),
                    (ic + ih).into(),
                ]);
            }
            Ok(Rep {
                band_ok: b.center.iter().zip(&truth).zip(&b.plan.half_width).all(|((c, t), h)| (c - t).abs() <= *h),
                all_ok: per_x.iter().all(|&v| v),
                rows,
                per_x,
            })
        })
        .collect::<Result<_>>()?;

    let mut curves = Table::new(
        "replicates",
        &["rep", "x", "truth", "band_center", "band_lower", "band_upper", "interval_center", "interval_lower", "interval_upper"],
    );
    let mut cover = Table::new("coverage", &["x", "m", "interval_coverage"]);
    for r in &reps {
        r.rows.iter().for_each(|row| curves.push(row.clone()));
    }
    let r = cfg.reps as f64;
    for (i, &x) in xs.iter().enumerate() {
        let m = intervals[i].as_ref().map_or(f64::NAN, |p| p.m_selected as f64);
        let c = reps.iter().filter(|rep| rep.per_x[i]).count() as f64 / r;
        cover.push(vec![x.into(), m.into(), c.into()]);
    }
    out.summary.insert("band_coverage".into(), reps.iter().filter(|x| x.band_ok).count() as f64 / r);
    out.summary.insert("interval_coverage_all".into(), reps.iter().filter(|x| x.all_ok).count() as f64 / r);
    out.summary.insert("intervals_built".into(), intervals.iter().flatten().count() as f64);
    out.tables.push(curves);
    out.tables.push(cover);
    out.tables.push(degrees);
    Ok(())
}

fn mise(cfg: &ExperimentConfig, out: &mut ExperimentResult) -> Result<()> {
    let xs = &cfg.x_grid;
    let quad = linear_grid(0.0, 1.0, 200);
    let width = xs.len() + 1;
    let m = replicate_moments(cfg.reps, width, |rep, v| {
        let s = replicate_sample(cfg, rep)?;
        for (i, &x) in xs.iter().enumerate() {
            v[i] = (b2_uniform_estimate(&s, x)? - x).powi(2);
        }
        let sq: Vec<f64> = quad.iter().map(|&x| b2_uniform_estimate(&s, x).map(|b| (b - x).powi(2))).collect::<Result<_>>()?;
        v[xs.len()] = simpson(&sq);
        Ok(())
    })?;
    let n = cfg.n as f64;
    let mut t = Table::new("mse", &["x", "mse", "se", "theory"]);
    for (i, &x) in xs.iter().enumerate() {
        t.push(vec![x.into(), m.mean(i).into(), m.se(i).into(), (sigma2(x).powi(2) / n).into()]);
    }
    out.tables.push(t);
    out.summary.insert("mise".into(), m.mean(xs.len()));
    out.summary.insert("mise_se".into(), m.se(xs.len()));
    out.summary.insert("mise_theory".into(), 1.0 / (30.0 * n));
    Ok(())
}

fn coverage(cfg: &ExperimentConfig, out: &mut ExperimentResult) -> Result<()> {
    let (n, alpha) = (cfg.n, cfg.alpha);
    let xs: Vec<f64> = cfg.x_grid.iter().copied().filter(|&x| x > 0.0 && x < 1.0).collect();
    let truth = PowerCdf::new(cfg.beta);
    let dkw = dkw_half_width(n, alpha);
    let base_m = baseline_degree(n);
    let z = normal_quantile_upper(alpha);

    // (label, x, half-width, degree) for every region; indicator slots follow this order
    let mut regions: Vec<(&'static str, Option<f64>, f64, usize)> = vec![("dkw-band", None, dkw, 0)];
    let uniform = cfg.beta == 1.0;
    let mut band_plan = None;
    let mut interval_plans = Vec::new();
    if uniform {
        let delta = b2_band_delta(n, alpha);
        regions.push(("b2-uniform-band", None, delta, 2));
        let d = b2_interval_delta(n, alpha)?;
        for &x in &xs {
            regions.push(("b2-uniform-interval", Some(x), 4.0 * sigma2(x) * d, 2));
        }
    } else {
        let spec = SmoothnessSpec::Oracle(Oracle::power(cfg.beta));
        let opts = SearchOptions::default();
        let p = plan_band_for_cdf(n, alpha, &spec, &cfg.x_grid, &opts)?;
        regions.push(("bernstein-cdf-band", None, p.half_width[0], p.m_selected));
        band_plan = Some(p);
        for &x in &xs {
            match plan_interval_for_cdf(n, x, alpha, &spec, None, &opts) {
                Ok(p) => {
                    regions.push(("bernstein-cdf-interval", Some(x), p.half_width[0], p.m_selected));
                    interval_plans.push(p);
                }
                Err(e) => out.notes.push(format!("no interval at x = {x}: {e}")),
            }
        }
    }
    for &x in &xs {
        regions.push((BASELINE_LABEL, Some(x), f64::NAN, base_m));
    }
    let width = regions.len();
    let m = replicate_moments(cfg.reps, width, |rep, v| {
        let s = replicate_sample(cfg, rep)?;
        let mut slot = 0;
        let mut put = |miss: bool| {
            v[slot] = miss as u8 as f64;
            slot += 1;
        };
        put(ks_distance(&s, &truth) > dkw);
        if uniform {
            let y = empirical_cdf(&s, 0.5);
            put((y - 0.5).abs() / 2.0 > b2_band_delta(n, alpha));
            let d = b2_interval_delta(n, alpha)?;
            for &x in &xs {
                put((b2_uniform_estimate(&s, x)? - x).abs() > 4.0 * sigma2(x) * d);
            }
        } else {
            let b = band_plan.as_ref().expect("built above").realize(&s)?;
            put(!b.contains(&truth));
            for p in &interval_plans {
                put(!p.realize(&s)?.contains(&truth));
            }
        }
        let est = BernsteinEstimator::new(&s, base_m)?;
        for &x in &xs {
            let c = est.eval(x)?;
            put((c - truth.eval(x)).abs() > z * (sigma2(c) / n as f64).sqrt());
        }
        Ok(())
    })?;
    let mut t = Table::new("coverage", &["region", "x", "m", "half_width", "noncoverage", "se", "allowance"]);
    let allowance = alpha + 3.0 * (alpha * (1.0 - alpha) / cfg.reps as f64).sqrt();
    let mut worst: f64 = 0.0;
    for (i, (label, x, hw, deg)) in regions.iter().enumerate() {
        let xcell = x.map_or(Cell::Text(String::new()), Cell::Float);
        t.push(vec![(*label).into(), xcell, (*deg).into(), (*hw).into(), m.mean(i).into(), m.se(i).into(), allowance.into()]);
        if *label != BASELINE_LABEL {
            worst = worst.max(m.mean(i));
        }
    }
    out.tables.push(t);
    out.summary.insert("max_noncoverage".into(), worst);
    out.summary.insert("allowance".into(), allowance);
    out.summary.insert("baseline_z".into(), z);
    Ok(())
}

fn ratio(err: f64, bound: f64) -> f64 {
    if err == 0.0 {
        0.0
    } else {
        err / bound
    }
}

/// `err <= bound` up to rounding relative to the size `scale` of the target.
fn within(err: f64, bound: f64, scale: f64) -> bool {
    err <= bound + 1e-12 * bound.max(scale.abs()).max(1e-2)
}

fn degree_range(cfg: &ExperimentConfig, lo: usize) -> Vec<usize> {
    match cfg.m_override {
        Some(m) => vec![m],
        None => (lo..=256).collect(),
    }
}

fn check_bernstein(cfg: &ExperimentConfig, out: &mut ExperimentResult) -> Result<()> {
    let f = PowerCdf::new(cfg.beta);
    let spec = SmoothnessSpec::power(cfg.beta);
    let ms = degree_range(cfg, 4);
    let rows: Vec<Vec<(usize, f64, f64, f64, f64)>> = ms
        .par_iter()
        .map(|&m| {
            cfg.x_grid
                .iter()
                .map(|&x| {
                    let fx = f.eval(x);
                    let err = (bernstein_apply(&f, m, x)? - fx).abs();
                    let b = bernstein_error_bound(&spec, m, Some(x))?.pointwise()?;
                    Ok((m, x, err, b, fx))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    push_ratio_table(out, rows.into_iter().flatten().map(|(m, x, e, b, fx)| (m, 0, x, e, b, fx)));
    Ok(())
}

fn check_kantorovich(cfg: &ExperimentConfig, out: &mut ExperimentResult) -> Result<()> {
    if cfg.beta < 1.0 {
        return Err(Error::invalid("beta", "the density x^(beta-1) is unbounded for beta < 1"));
    }
    let rho = PowerDensity::new(cfg.beta);
    let spec = SmoothnessSpec::power(cfg.beta);
    let ms = degree_range(cfg, 4);
    let jobs: Vec<(usize, usize)> = [1usize, 2].iter().flat_map(|&k| ms.iter().filter(move |&&m| m > k).map(move |&m| (m, k))).collect();
    let rows: Vec<Vec<(usize, usize, f64, f64, f64, f64)>> = jobs
        .par_iter()
        .map(|&(m, k)| {
            let cells = KantorovichCells::new(&rho, OperatorParams::new(m, k)?, ShiftLaw::irwin_hall(k))?;
            cfg.x_grid
                .iter()
                .map(|&x| {
                    let v = cells.eval(x)?.value;
                    let b = kantorovich_error_bound_for(&spec, 1, k, m, Some(x))?.pointwise()?;
                    let r = rho.eval(x);
                    Ok((m, k, x, (v - r).abs(), b, r))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    push_ratio_table(out, rows.into_iter().flatten());
    Ok(())
}

fn push_ratio_table(out: &mut ExperimentResult, rows: impl Iterator<Item = (usize, usize, f64, f64, f64, f64)>) {
    let mut t = Table::new("ratios", &["m", "k", "x", "error", "bound", "ratio"]);
    let (mut worst, mut violations, mut count) = (0.0f64, 0usize, 0usize);
    for (m, k, x, e, b, target) in rows {
        let r = ratio(e, b);
        if b > 0.0 {
            worst = worst.max(r);
        }
        violations += !within(e, b, target) as usize;
        count += 1;
        t.push(vec![m.into(), k.into(), x.into(), e.into(), b.into(), r.into()]);
    }
    out.tables.push(t);
    out.summary.insert("max_ratio".into(), worst);
    out.summary.insert("violations".into(), violations as f64);
    out.summary.insert("checked".into(), count as f64);
}

/// Flat CDF of [`check_flat`]: linear to `1/2` on `[0, 1/4]`, flat on
/// `[1/4, 3/4]`, linear to `1` on `[3/4, 1]`.
pub fn flat_example() -> PiecewiseFlatCdf {
    PiecewiseFlatCdf::new(0.25, 0.75, 0.5)
}

fn check_flat(cfg: &ExperimentConfig, out: &mut ExperimentResult) -> Result<()> {
    let f = flat_example();
    let m = cfg.m_override.unwrap_or(200);
    let (lo, hi) = flat_region_window(m, 0, f.a, f.b)?;
    let mut rows = Vec::new();
    for &x in cfg.x_grid.iter().filter(|&&x| lo <= x && x <= hi && x > 0.0 && x < 1.0) {
        let err = (bernstein_apply(&f, m, x)? - f.eval(x)).abs();
        let b = flat_region_bound(m, 0, x, f.a, f.b, f.sup_deviation())?;
        rows.push((m, 0, x, err, b, 0.0));
    }
    if rows.is_empty() {
        return Err(Error::invalid("x_grid", format!("no grid point in the flat window [{lo}, {hi}]")));
    }
    push_ratio_table(out, rows.into_iter());
    out.summary.insert("bound_at_half".into(), flat_region_bound(m, 0, 0.5, f.a, f.b, f.sup_deviation())?);
    out.summary.insert("window_lo".into(), lo);
    out.summary.insert("window_hi".into(), hi);
    Ok(())
}

/// Radii multipliers used by the concentration checks.
pub const DEVIATION_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.4, 0.7, 1.0];

fn push_frequency_table(out: &mut ExperimentResult, cells: &[(f64, f64, f64, f64)], m: &Moments) {
    let mut t = Table::new("frequencies", &["x", "scale", "radius", "bound", "frequency", "se"]);
    let mut violations = 0usize;
    let mut worst: f64 = 0.0;
    for (i, &(x, e, radius, bound)) in cells.iter().enumerate() {
        let freq = m.mean(i);
        violations += (freq > bound) as usize;
        if bound > 0.0 {
            worst = worst.max(freq / bound);
        }
        t.push(vec![x.into(), e.into(), radius.into(), bound.into(), freq.into(), m.se(i).into()]);
    }
    out.tables.push(t);
    out.summary.insert("violations".into(), violations as f64);
    out.summary.insert("max_frequency_over_bound".into(), worst);
}

fn check_cdf_concentration(cfg: &ExperimentConfig, out: &mut ExperimentResult) -> Result<()> {
    let f = PowerCdf::new(cfg.beta);
    let m = cfg.m_override.unwrap_or(20);
    let mut cells = Vec::new();
    for &x in &cfg.x_grid {
        for &e in &DEVIATION_GRID {
            let d = cdf_deviation_bound(&f, cfg.n, m, x, e)?;
            cells.push((x, e, d.radius, d.bound.clamped));
        }
    }
    let moments = replicate_moments(cfg.reps, cells.len(), |rep, v| {
        let s = replicate_sample(cfg, rep)?;
        let est = BernsteinEstimator::new(&s, m)?;
        for (i, &(x, _, radius, _)) in cells.iter().enumerate() {
            v[i] = ((est.eval(x)? - f.eval(x)).abs() >= radius) as u8 as f64;
        }
        Ok(())
    })?;
    push_frequency_table(out, &cells, &moments);
    Ok(())
}

fn check_derivative_concentration(cfg: &ExperimentConfig, out: &mut ExperimentResult) -> Result<()> {
    let oracle = Oracle::power(cfg.beta);
    if cfg.beta < 1.0 {
        return Err(Error::invalid("beta", "the density x^(beta-1) is unbounded for beta < 1"));
    }
    let m = cfg.m_override.unwrap_or(10);
    let k = 1;
    let mut cells = Vec::new();
    for &x in &cfg.x_grid {
        for &d in &DEVIATION_GRID {
            let b = derivative_deviation_bound(&oracle, cfg.n, m, k, x, d)?;
            cells.push((x, d, b.radius, b.bound.clamped));
        }
    }
    let moments = replicate_moments(cfg.reps, cells.len(), |rep, v| {
        let s = replicate_sample(cfg, rep)?;
        let est = DerivativeEstimator::new(&s, m, k)?;
        for (i, &(x, _, radius, _)) in cells.iter().enumerate() {
            let target = oracle.derivative_at(k, x).unwrap_or(f64::NAN);
            v[i] = ((est.eval(x)? - target).abs() >= radius) as u8 as f64;
        }
        Ok(())
    })?;
    push_frequency_table(out, &cells, &moments);
    Ok(())
}
