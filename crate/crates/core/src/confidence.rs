//! Minimal-degree selection and explicit confidence bands and intervals for
//! `F` and its derivatives.
//!
//! Every construction is split into a [`RegionPlan`] (degree, half-widths,
//! the conditions checked) and a center computed from the sample. In oracle
//! mode the plan does not depend on the sample, so simulations build it
//! once and realize it per replicate.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::binomial::falling_factorial;
use crate::bounds::{
    dkw_half_width, kantorovich_error_bound_for, l_alpha, l_k_alpha, order_constants, q_m, tau, tau_inverse,
    width_multiplier, ProbabilityBound,
};
use crate::error::{check_alpha, check_unit, Error, Result};
use crate::estimators::{
    b2_uniform_estimate, bernstein_cdf_estimate, bernstein_derivative_estimate, BernsteinEstimator,
    DerivativeEstimator, Sample,
};
use crate::functions::{sigma, sigma2, Function1D, PowerCdf, PowerDensity};
use crate::operators::{bernstein_apply, bernstein_derivative_apply, lmk_rplusv_apply, OperatorParams};
use crate::smoothness::{Oracle, SmoothnessSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    Band,
    PointwiseInterval,
}

/// Whether the target distribution is known or replaced by plug-in values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Oracle,
    PlugIn,
}

/// How the left sides of the degree conditions were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionSource {
    /// Evaluated with the known `F`.
    Exact,
    /// Modulus bounds from the power-family closed forms.
    ClosedForm,
    /// Modulus bounds from a `(C, beta)` profile.
    Profile,
    /// No degree search was needed.
    None,
}

impl ConditionSource {
    fn of(spec: &SmoothnessSpec) -> Self {
        match spec {
            SmoothnessSpec::Oracle(_) => ConditionSource::Exact,
            SmoothnessSpec::PowerFamily { .. } => ConditionSource::ClosedForm,
            SmoothnessSpec::Fitted(_) => ConditionSource::Profile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRecord {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl ConditionRecord {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// All conditions evaluated at one degree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub m: usize,
    pub conditions: Vec<ConditionRecord>,
    pub satisfied: bool,
}

impl ConditionCheck {
    pub fn new(m: usize, conditions: Vec<ConditionRecord>) -> Self {
        let satisfied = conditions.iter().all(ConditionRecord::holds);
        Self {
            m,
            conditions,
            satisfied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeSearchReport {
    pub m_selected: Option<usize>,
    pub m_min: usize,
    pub m_max: usize,
    pub satisfied: bool,
    /// Largest degree seen failing below the selected one.
    pub last_failing: Option<ConditionCheck>,
    pub first_passing: Option<ConditionCheck>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub m_max: usize,
    /// Points of the grid over `[0, 1]` on which sup norms are taken in
    /// exact mode.
    pub oracle_grid: usize,
    /// Degrees scanned one by one before doubling.
    pub linear_scan: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            m_max: 1_000_000,
            oracle_grid: 1001,
            linear_scan: 64,
        }
    }
}

/// Finds the least `m` in `[m_min, m_max]` passing `eval`: a linear scan,
/// then doubling, then bisection between the last failure and the first
/// success.
pub fn search_degree<F>(m_min: usize, opts: &SearchOptions, eval: F) -> Result<DegreeSearchReport>
where
    F: Fn(usize) -> Result<ConditionCheck>,
{
    let mut report = DegreeSearchReport {
        m_selected: None,
        m_min,
        m_max: opts.m_max,
        satisfied: false,
        last_failing: None,
        first_passing: None,
        evaluations: 0,
    };
    let run = |m: usize, report: &mut DegreeSearchReport| -> Result<ConditionCheck> {
        report.evaluations += 1;
        eval(m)
    };
    let fail = |report: DegreeSearchReport| Err(Error::DegreeSearchFailed(Box::new(report)));
    if m_min > opts.m_max {
        return fail(report);
    }
    let scan_end = (m_min + opts.linear_scan.max(1) - 1).min(opts.m_max);
    for m in m_min..=scan_end {
        let check = run(m, &mut report)?;
        if check.satisfied {
            report.m_selected = Some(m);
            report.satisfied = true;
            report.first_passing = Some(check);
            return Ok(report);
        }
        report.last_failing = Some(check);
    }
    let mut lo = scan_end;
    let mut hi = None;
    while lo < opts.m_max {
        let m = (2 * lo).min(opts.m_max);
        let check = run(m, &mut report)?;
        if check.satisfied {
            hi = Some((m, check));
            break;
        }
        report.last_failing = Some(check);
        lo = m;
    }
    let Some((mut hi, mut passing)) = hi else {
        return fail(report);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let check = run(mid, &mut report)?;
        if check.satisfied {
            hi = mid;
            passing = check;
        } else {
            lo = mid;
            report.last_failing = Some(check);
        }
    }
    report.m_selected = Some(hi);
    report.satisfied = true;
    report.first_passing = Some(passing);
    Ok(report)
}

/// The condition sets of the degree selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionSet {
    /// `||B_m(F) - F|| <= (1/2) sqrt(2 ln(2/alpha) / n)`.
    CdfBand,
    /// `||(m)_k/m^k B_{m,k}(F^(k)) - F^(k)|| <= (1/2) l_{k,alpha}(m) / sqrt(n)`.
    DerivativeBand { k: usize },
    /// Variance and bias conditions at `x`.
    CdfInterval { x: f64 },
    /// Density-operator and bias conditions at `x`.
    DerivativeInterval { x: f64, k: usize },
}

impl ConditionSet {
    /// Smallest admissible degree: `2`, and above the derivative order.
    pub fn floor(&self) -> usize {
        match *self {
            ConditionSet::CdfBand | ConditionSet::CdfInterval { .. } => 2,
            ConditionSet::DerivativeBand { k } | ConditionSet::DerivativeInterval { k, .. } => (k + 1).max(2),
        }
    }
}

/// Point values `F(x)` and `rho(x)`, given or plugged in.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointValues {
    pub f_x: Option<f64>,
    pub rho_x: Option<f64>,
}

fn known_cdf(spec: &SmoothnessSpec) -> Option<Arc<dyn Function1D>> {
    match spec {
        SmoothnessSpec::Oracle(o) => Some(o.cdf.clone()),
        SmoothnessSpec::PowerFamily { beta } => Some(Arc::new(PowerCdf::new(*beta))),
        SmoothnessSpec::Fitted(_) => None,
    }
}

fn known_density(spec: &SmoothnessSpec) -> Result<Arc<dyn Function1D>> {
    match spec {
        SmoothnessSpec::Oracle(o) => match &o.density {
            Some(d) => Ok(d.clone()),
            None => {
                o.derivative_fn(1)?;
                let o = o.clone();
                Ok(Arc::new(move |t: f64| o.derivative_at(1, t).unwrap_or(f64::NAN)))
            }
        },
        SmoothnessSpec::PowerFamily { beta } => Ok(Arc::new(PowerDensity::new(*beta))),
        SmoothnessSpec::Fitted(_) => Err(Error::MissingOracle("density")),
    }
}

fn unit_grid(points: usize) -> Vec<f64> {
    let p = points.max(2) - 1;
    (0..=p).map(|i| i as f64 / p as f64).collect()
}

fn grid_max<G: Fn(f64) -> Result<f64> + Sync>(grid: &[f64], g: G) -> Result<f64> {
    let vals: Vec<f64> = grid.par_iter().map(|&x| g(x)).collect::<Result<_>>()?;
    // NaN propagates as a failure of the comparison downstream
    Ok(vals.into_iter().fold(0.0, |acc, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) }))
}

fn sup_norm_required(spec: &SmoothnessSpec, k: usize) -> Result<f64> {
    spec.sup_norm(k).ok_or_else(|| {
        Error::Unsupported(format!(
            "conditions of order {k} need a bound on the sup norm of F^({k}); supply it with the profile"
        ))
    })
}

/// Bound on `|(m)_k/m^k B_{m,k}(F^(k); x) - F^(k)(x)|` (uniform when `x`
/// is `None`) from the modulus bounds of `spec`. `target_abs` bounds
/// `|F^(k)|` at `x` or uniformly.
fn scaled_kantorovich_bound(spec: &SmoothnessSpec, k: usize, m: usize, x: Option<f64>, target_abs: f64) -> Result<f64> {
    let b = kantorovich_error_bound_for(spec, k, k, m, x)?;
    let core = match x {
        Some(_) => b.pointwise()?,
        None => b.uniform.unwrap_or(f64::INFINITY),
    };
    let ratio = falling_factorial(m, k) / (m as f64).powi(k as i32);
    Ok(ratio * core + (1.0 - ratio) * target_abs)
}

struct Evaluator<'a> {
    set: ConditionSet,
    n: usize,
    alpha: f64,
    spec: &'a SmoothnessSpec,
    values: PointValues,
    grid: Vec<f64>,
    cdf: Option<Arc<dyn Function1D>>,
    density: Option<Arc<dyn Function1D>>,
}

impl Evaluator<'_> {
    fn exact(&self) -> bool {
        matches!(self.spec, SmoothnessSpec::Oracle(_))
    }

    fn cdf(&self) -> Result<&Arc<dyn Function1D>> {
        self.cdf.as_ref().ok_or(Error::MissingOracle("distribution function"))
    }

    fn density(&self) -> Result<&Arc<dyn Function1D>> {
        self.density.as_ref().ok_or(Error::MissingOracle("density"))
    }

    fn f_x(&self) -> Result<f64> {
        self.values.f_x.ok_or(Error::MissingOracle("F(x)"))
    }

    fn rho_x(&self) -> Result<f64> {
        self.values.rho_x.ok_or(Error::MissingOracle("rho(x)"))
    }

    fn check(&self, m: usize) -> Result<ConditionCheck> {
        let nf = self.n as f64;
        let l = l_alpha(self.alpha);
        let conditions = match self.set {
            ConditionSet::CdfBand => {
                // half of the band half-width sqrt(2 ln(2/alpha) / n)
                let rhs = dkw_half_width(self.n, self.alpha);
                let lhs = if self.exact() {
                    let f = self.cdf()?;
                    grid_max(&self.grid, |x| Ok((bernstein_apply(f.as_ref(), m, x)? - f.eval(x)).abs()))?
                } else {
                    crate::bounds::bernstein_error_bound(self.spec, m, None)?
                        .uniform
                        .unwrap_or(f64::INFINITY)
                };
                vec![ConditionRecord {
                    name: "band-bias",
                    lhs,
                    rhs,
                }]
            }
            ConditionSet::DerivativeBand { k } => {
                let rhs = 0.5 * l_k_alpha(self.alpha, m, k) / nf.sqrt();
                let lhs = if self.exact() {
                    let f = self.cdf()?;
                    let SmoothnessSpec::Oracle(o) = self.spec else { unreachable!() };
                    let params = OperatorParams::new(m, k)?;
                    grid_max(&self.grid, |x| {
                        let target = o.derivative_at(k, x).ok_or(Error::MissingOracle("F^(k)"))?;
                        Ok((bernstein_derivative_apply(f.as_ref(), params, x)? - target).abs())
                    })?
                } else {
                    let sup = if k == 1 { 0.0 } else { sup_norm_required(self.spec, k)? };
                    scaled_kantorovich_bound(self.spec, k, m, None, sup)?
                };
                vec![ConditionRecord {
                    name: "derivative-band-bias",
                    lhs,
                    rhs,
                }]
            }
            ConditionSet::CdfInterval { x } => {
                let fx = self.f_x()?;
                let v = sigma2(fx);
                let (var_lhs, bias_lhs) = if self.exact() {
                    let f = self.cdf()?;
                    let var = |t: f64| {
                        let y = f.eval(t);
                        y * (1.0 - y)
                    };
                    (
                        (bernstein_apply(&var, m, x)? - v).abs(),
                        (bernstein_apply(f.as_ref(), m, x)? - fx).abs(),
                    )
                } else {
                    let h = sigma(x) / (m as f64).sqrt();
                    (
                        1.5 * self.spec.omega2_variance(h)?,
                        crate::bounds::bernstein_error_bound(self.spec, m, Some(x))?.pointwise()?,
                    )
                };
                vec![
                    ConditionRecord {
                        name: "variance-approximation",
                        lhs: var_lhs,
                        rhs: v / (l * l),
                    },
                    ConditionRecord {
                        name: "cdf-bias",
                        lhs: bias_lhs,
                        rhs: v.sqrt() * l / nf.sqrt(),
                    },
                ]
            }
            ConditionSet::DerivativeInterval { x, k } => {
                let rho = self.rho_x()?;
                let params = OperatorParams::new(m, k)?;
                let s_k = order_constants(m, k)?.s_k_m;
                let bias_rhs = l * (rho / nf).sqrt() * s_k;
                let bias_lhs = if self.exact() {
                    let SmoothnessSpec::Oracle(o) = self.spec else { unreachable!() };
                    let target = o.derivative_at(k, x).ok_or(Error::MissingOracle("F^(k)(x)"))?;
                    (bernstein_derivative_apply(self.cdf()?.as_ref(), params, x)? - target).abs()
                } else {
                    let target = match self.spec.derivative_at(k, x) {
                        Some(v) => v.abs(),
                        None if k == 1 => rho.abs(),
                        None => sup_norm_required(self.spec, k)?,
                    };
                    scaled_kantorovich_bound(self.spec, k, m, Some(x), target)?
                };
                if k == 1 {
                    // L_{m,1} = B_{m,1} and (m)_1/m = 1: both conditions bound
                    // the same quantity
                    vec![ConditionRecord {
                        name: "density-combined",
                        lhs: bias_lhs,
                        rhs: (rho / (l * l)).min(bias_rhs),
                    }]
                } else {
                    let op_lhs = match self.spec {
                        SmoothnessSpec::Fitted(_) => kantorovich_error_bound_for(self.spec, 1, k, m, Some(x))?.pointwise()?,
                        _ => (lmk_rplusv_apply(self.density()?.as_ref(), params, x)? - rho).abs(),
                    };
                    vec![
                        ConditionRecord {
                            name: "density-operator",
                            lhs: op_lhs,
                            rhs: rho / (l * l),
                        },
                        ConditionRecord {
                            name: "derivative-bias",
                            lhs: bias_lhs,
                            rhs: bias_rhs,
                        },
                    ]
                }
            }
        };
        Ok(ConditionCheck::new(m, conditions))
    }
}

/// Minimal degree for a condition set. Point values default to the known
/// distribution and must be supplied for profile specs.
pub fn select_degree(
    set: ConditionSet,
    n: usize,
    alpha: f64,
    spec: &SmoothnessSpec,
    values: PointValues,
    opts: &SearchOptions,
) -> Result<DegreeSearchReport> {
    check_alpha(alpha)?;
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be positive"));
    }
    let mut values = values;
    match set {
        ConditionSet::CdfInterval { x } => {
            check_unit(x)?;
            if values.f_x.is_none() {
                values.f_x = spec.derivative_at(0, x);
            }
        }
        ConditionSet::DerivativeInterval { x, .. } => {
            check_unit(x)?;
            if values.rho_x.is_none() {
                values.rho_x = spec.derivative_at(1, x);
            }
        }
        _ => {}
    }
    let needs_density = matches!(set, ConditionSet::DerivativeInterval { k, .. } if k >= 2)
        && !matches!(spec, SmoothnessSpec::Fitted(_));
    let ev = Evaluator {
        set,
        n,
        alpha,
        spec,
        values,
        grid: unit_grid(opts.oracle_grid),
        cdf: known_cdf(spec),
        density: if needs_density { Some(known_density(spec)?) } else { None },
    };
    search_degree(set.floor(), opts, |m| ev.check(m))
}

/// Estimator that produces the center of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterEstimator {
    Bernstein { m: usize },
    B2Uniform,
    Derivative { m: usize, k: usize },
}

/// Everything about a region except its center.
#[derive(Debug, Clone, Serialize)]
pub struct RegionPlan {
    pub kind: RegionKind,
    pub order: usize,
    pub alpha: f64,
    pub n: usize,
    pub x: Vec<f64>,
    pub half_width: Vec<f64>,
    pub m_selected: usize,
    pub method: &'static str,
    pub mode: Mode,
    pub source: ConditionSource,
    /// Plug-in values entered the conditions or the half-width.
    pub approximate: bool,
    pub estimator: CenterEstimator,
    pub search: Option<DegreeSearchReport>,
    pub parameters: BTreeMap<&'static str, f64>,
}

impl RegionPlan {
    /// Computes the center on the plan's grid.
    pub fn realize(&self, sample: &Sample) -> Result<ConfidenceRegion> {
        if sample.len() != self.n {
            return Err(Error::invalid(
                "sample",
                format!("plan was built for n = {}, sample has {}", self.n, sample.len()),
            ));
        }
        let center = match self.estimator {
            CenterEstimator::Bernstein { m } => {
                let est = BernsteinEstimator::new(sample, m)?;
                self.x.iter().map(|&x| est.eval(x)).collect::<Result<_>>()?
            }
            CenterEstimator::B2Uniform => self.x.iter().map(|&x| b2_uniform_estimate(sample, x)).collect::<Result<_>>()?,
            CenterEstimator::Derivative { m, k } => {
                let est = DerivativeEstimator::new(sample, m, k)?;
                self.x.iter().map(|&x| est.eval(x)).collect::<Result<_>>()?
            }
        };
        Ok(ConfidenceRegion {
            plan: self.clone(),
            center,
        })
    }

    /// Conditions recorded at the selected degree.
    pub fn conditions(&self) -> &[ConditionRecord] {
        self.search
            .as_ref()
            .and_then(|s| s.first_passing.as_ref())
            .map(|c| c.conditions.as_slice())
            .unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfidenceRegion {
    #[serde(flatten)]
    pub plan: RegionPlan,
    pub center: Vec<f64>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    alpha: f64,
    m: usize,
    method: &'static str,
    mode: Mode,
    kind: RegionKind,
    order: usize,
    n: usize,
    source: ConditionSource,
    approximate: bool,
    conditions: &'a [ConditionRecord],
    parameters: &'a BTreeMap<&'static str, f64>,
    search: &'a Option<DegreeSearchReport>,
}

impl ConfidenceRegion {
    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().zip(&self.plan.half_width).map(|(c, h)| c - h).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().zip(&self.plan.half_width).map(|(c, h)| c + h).collect()
    }

    /// `true` when `target(x_i)` lies in every interval.
    pub fn contains<F: Function1D + ?Sized>(&self, target: &F) -> bool {
        self.plan
            .x
            .iter()
            .zip(self.center.iter().zip(&self.plan.half_width))
            .all(|(&x, (c, h))| (target.eval(x) - c).abs() <= *h)
    }

    /// Columns `x, estimate, lower, upper`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,estimate,lower,upper")?;
        for (i, &x) in self.plan.x.iter().enumerate() {
            let (c, h) = (self.center[i], self.plan.half_width[i]);
            writeln!(w, "{},{},{},{}", fmt_float(x), fmt_float(c), fmt_float(c - h), fmt_float(c + h))?;
        }
        Ok(())
    }

    /// JSON sidecar with the level, degree, method and the conditions
    /// checked at the selected degree.
    pub fn write_sidecar<W: Write>(&self, w: W) -> Result<()> {
        let p = &self.plan;
        let car = Sidecar {
            alpha: p.alpha,
            m: p.m_selected,
            method: p.method,
            mode: p.mode,
            kind: p.kind,
            order: p.order,
            n: p.n,
            source: p.source,
            approximate: p.approximate,
            conditions: p.conditions(),
            parameters: &p.parameters,
            search: &p.search,
        };
        serde_json::to_writer_pretty(w, &car).map_err(|e| Error::Io(e.to_string()))
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn mode_of(spec: &SmoothnessSpec) -> Mode {
    if spec.is_oracle() {
        Mode::Oracle
    } else {
        Mode::PlugIn
    }
}

fn check_interior(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition {
            constraint: "sigma(x) > 0, i.e. 0 < x < 1",
            lhs: x,
            rhs: 0.0,
        })
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    grid.iter().try_for_each(|&x| check_unit(x))
}

fn selected(report: &DegreeSearchReport) -> usize {
    report.m_selected.expect("a successful search selects a degree")
}

/// Band for `F` with half-width `sqrt(2 ln(2/alpha) / n)`.
pub fn plan_band_for_cdf(n: usize, alpha: f64, spec: &SmoothnessSpec, grid: &[f64], opts: &SearchOptions) -> Result<RegionPlan> {
    check_grid(grid)?;
    let report = select_degree(ConditionSet::CdfBand, n, alpha, spec, PointValues::default(), opts)?;
    let m = selected(&report);
    let hw = 2.0 * dkw_half_width(n, alpha);
    Ok(RegionPlan {
        kind: RegionKind::Band,
        order: 0,
        alpha,
        n,
        x: grid.to_vec(),
        half_width: vec![hw; grid.len()],
        m_selected: m,
        method: "bernstein-cdf-band",
        mode: mode_of(spec),
        source: ConditionSource::of(spec),
        approximate: !spec.is_oracle(),
        estimator: CenterEstimator::Bernstein { m },
        search: Some(report),
        parameters: BTreeMap::from([("dkw_half_width", dkw_half_width(n, alpha))]),
    })
}

pub fn band_for_cdf(sample: &Sample, alpha: f64, spec: &SmoothnessSpec, grid: &[f64], opts: &SearchOptions) -> Result<ConfidenceRegion> {
    plan_band_for_cdf(sample.len(), alpha, spec, grid, opts)?.realize(sample)
}

/// Band for `F^(k)` with half-width `l_{k,alpha}(m) / sqrt(n)`; `k = 0` is
/// the band for `F`.
pub fn plan_band_for_derivative(
    n: usize,
    k: usize,
    alpha: f64,
    spec: &SmoothnessSpec,
    grid: &[f64],
    opts: &SearchOptions,
) -> Result<RegionPlan> {
    if k == 0 {
        return plan_band_for_cdf(n, alpha, spec, grid, opts);
    }
    check_grid(grid)?;
    let report = select_degree(ConditionSet::DerivativeBand { k }, n, alpha, spec, PointValues::default(), opts)?;
    let m = selected(&report);
    let l = l_k_alpha(alpha, m, k);
    Ok(RegionPlan {
        kind: RegionKind::Band,
        order: k,
        alpha,
        n,
        x: grid.to_vec(),
        half_width: vec![l / (n as f64).sqrt(); grid.len()],
        m_selected: m,
        method: "bernstein-derivative-band",
        mode: mode_of(spec),
        source: ConditionSource::of(spec),
        approximate: !spec.is_oracle(),
        estimator: CenterEstimator::Derivative { m, k },
        search: Some(report),
        parameters: BTreeMap::from([("l_k_alpha", l)]),
    })
}

pub fn band_for_derivative(
    sample: &Sample,
    k: usize,
    alpha: f64,
    spec: &SmoothnessSpec,
    grid: &[f64],
    opts: &SearchOptions,
) -> Result<ConfidenceRegion> {
    plan_band_for_derivative(sample.len(), k, alpha, spec, grid, opts)?.realize(sample)
}

/// `delta = sqrt(ln(2/alpha) / (8n))`, solving `2 exp(-8 n delta^2) = alpha`.
pub fn b2_band_delta(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (8.0 * n as f64)).sqrt()
}

/// Band of half-width [`b2_band_delta`] around the degree-2 estimator, for
/// uniform observations.
pub fn plan_band_uniform_b2(n: usize, alpha: f64, grid: &[f64]) -> Result<RegionPlan> {
    check_alpha(alpha)?;
    check_grid(grid)?;
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be positive"));
    }
    let delta = b2_band_delta(n, alpha);
    Ok(RegionPlan {
        kind: RegionKind::Band,
        order: 0,
        alpha,
        n,
        x: grid.to_vec(),
        half_width: vec![delta; grid.len()],
        m_selected: 2,
        method: "b2-uniform-band",
        mode: Mode::Oracle,
        source: ConditionSource::None,
        approximate: false,
        estimator: CenterEstimator::B2Uniform,
        search: None,
        parameters: BTreeMap::from([("delta", delta), ("dkw_half_width", dkw_half_width(n, alpha))]),
    })
}

pub fn band_uniform_b2(sample: &Sample, alpha: f64, grid: &[f64]) -> Result<ConfidenceRegion> {
    plan_band_uniform_b2(sample.len(), alpha, grid)?.realize(sample)
}

/// `delta = tau^{-1}(4 ln(2/alpha) / n) / 8`, solving
/// `2 exp(-n tau(8 delta) / 4) = alpha`.
pub fn b2_interval_delta(n: usize, alpha: f64) -> Result<f64> {
    Ok(tau_inverse(4.0 * (2.0 / alpha).ln() / n as f64)? / 8.0)
}

/// `2 exp(-8 n delta^2 (1 - 8 delta / 3))`, valid for `delta <= 1/8`.
pub fn b2_interval_weakened_bound(n: usize, delta: f64) -> Option<f64> {
    (delta <= 0.125).then(|| 2.0 * (-8.0 * n as f64 * delta * delta * (1.0 - 8.0 * delta / 3.0)).exp())
}

pub fn plan_interval_uniform_b2(n: usize, x: f64, alpha: f64) -> Result<RegionPlan> {
    check_alpha(alpha)?;
    check_interior(x)?;
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be positive"));
    }
    let delta = b2_interval_delta(n, alpha)?;
    let mut parameters = BTreeMap::from([("delta", delta)]);
    if let Some(b) = b2_interval_weakened_bound(n, delta) {
        parameters.insert("weakened_bound", b);
    }
    Ok(RegionPlan {
        kind: RegionKind::PointwiseInterval,
        order: 0,
        alpha,
        n,
        x: vec![x],
        half_width: vec![4.0 * sigma2(x) * delta],
        m_selected: 2,
        method: "b2-uniform-interval",
        mode: Mode::Oracle,
        source: ConditionSource::None,
        approximate: false,
        estimator: CenterEstimator::B2Uniform,
        search: None,
        parameters,
    })
}

pub fn interval_uniform_b2(sample: &Sample, x: f64, alpha: f64) -> Result<ConfidenceRegion> {
    plan_interval_uniform_b2(sample.len(), x, alpha)?.realize(sample)
}

/// Pilot degree `max(2, ceil(sqrt n))` for the plug-in `F(x)`.
pub fn pilot_cdf_degree(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(2)
}

/// Pilot degree `max(2, ceil(n^(1/3)))` for the plug-in `rho(x)`.
pub fn pilot_density_degree(n: usize) -> usize {
    ((n as f64).cbrt().ceil() as usize).max(2)
}

/// Interval for `F(x)` of half-width `(2 l + 1/l) sigma(F(x)) / sqrt(n)`.
/// `f_of_x` overrides the value of `F(x)` taken from the spec; profile
/// specs without it fail here, see [`interval_for_cdf`].
pub fn plan_interval_for_cdf(
    n: usize,
    x: f64,
    alpha: f64,
    spec: &SmoothnessSpec,
    f_of_x: Option<f64>,
    opts: &SearchOptions,
) -> Result<RegionPlan> {
    check_alpha(alpha)?;
    check_interior(x)?;
    let fx = f_of_x.or_else(|| spec.derivative_at(0, x)).ok_or(Error::MissingOracle("F(x)"))?;
    let l = l_alpha(alpha);
    let v = sigma2(fx);
    let need = l * l / v;
    if !((n as f64) >= need) {
        return Err(Error::Precondition {
            constraint: "n >= l_alpha^2 / sigma^2(F(x))",
            lhs: n as f64,
            rhs: need,
        });
    }
    let values = PointValues {
        f_x: Some(fx),
        rho_x: None,
    };
    let report = select_degree(ConditionSet::CdfInterval { x }, n, alpha, spec, values, opts)?;
    let m = selected(&report);
    Ok(RegionPlan {
        kind: RegionKind::PointwiseInterval,
        order: 0,
        alpha,
        n,
        x: vec![x],
        half_width: vec![width_multiplier(alpha) * v.sqrt() / (n as f64).sqrt()],
        m_selected: m,
        method: "bernstein-cdf-interval",
        mode: mode_of(spec),
        source: ConditionSource::of(spec),
        approximate: !spec.is_oracle(),
        estimator: CenterEstimator::Bernstein { m },
        search: Some(report),
        parameters: BTreeMap::from([("f_x", fx), ("l_alpha", l), ("width_multiplier", width_multiplier(alpha))]),
    })
}

/// As [`plan_interval_for_cdf`], plugging in `B_{m0}(Y_n; x)` with
/// [`pilot_cdf_degree`] when neither `f_of_x` nor a known `F` is available.
pub fn interval_for_cdf(
    sample: &Sample,
    x: f64,
    alpha: f64,
    spec: &SmoothnessSpec,
    f_of_x: Option<f64>,
    opts: &SearchOptions,
) -> Result<ConfidenceRegion> {
    check_interior(x)?;
    let mut f = f_of_x.or_else(|| spec.derivative_at(0, x));
    let plugged = f.is_none();
    if plugged {
        f = Some(bernstein_cdf_estimate(sample, pilot_cdf_degree(sample.len()), x)?);
    }
    let mut plan = plan_interval_for_cdf(sample.len(), x, alpha, spec, f, opts)?;
    if plugged {
        plan.approximate = true;
        plan.mode = Mode::PlugIn;
        plan.parameters.insert("pilot_m", pilot_cdf_degree(sample.len()) as f64);
    }
    plan.realize(sample)
}

/// Interval for `F^(k)(x)` of half-width `(2 l + 1/l) sqrt(rho(x)/n) s_k(m)`,
/// with the constraint `m/n <= rho(x) C(2(k-1), k-1) / (l^2 d_k^2)` checked
/// at the selected degree.
pub fn plan_interval_for_derivative(
    n: usize,
    x: f64,
    k: usize,
    alpha: f64,
    spec: &SmoothnessSpec,
    rho_of_x: Option<f64>,
    opts: &SearchOptions,
) -> Result<RegionPlan> {
    check_alpha(alpha)?;
    check_interior(x)?;
    if k == 0 {
        return Err(Error::invalid("k", "derivative intervals need k >= 1"));
    }
    let rho = rho_of_x.or_else(|| spec.derivative_at(1, x)).ok_or(Error::MissingOracle("rho(x)"))?;
    if !(rho > 0.0) {
        return Err(Error::Precondition {
            constraint: "rho(x) > 0",
            lhs: rho,
            rhs: 0.0,
        });
    }
    let values = PointValues {
        f_x: None,
        rho_x: Some(rho),
    };
    let report = select_degree(ConditionSet::DerivativeInterval { x, k }, n, alpha, spec, values, opts)?;
    let m = selected(&report);
    let c = order_constants(m, k)?;
    let l = l_alpha(alpha);
    let lhs = m as f64 / n as f64;
    let rhs = rho * c.central / (l * l * c.d_k * c.d_k);
    if lhs > rhs {
        return Err(Error::Precondition {
            constraint: "m/n <= rho(x) C(2(k-1), k-1) / (l_alpha^2 d_k^2)",
            lhs,
            rhs,
        });
    }
    Ok(RegionPlan {
        kind: RegionKind::PointwiseInterval,
        order: k,
        alpha,
        n,
        x: vec![x],
        half_width: vec![width_multiplier(alpha) * (rho / n as f64).sqrt() * c.s_k_m],
        m_selected: m,
        method: "bernstein-derivative-interval",
        mode: mode_of(spec),
        source: ConditionSource::of(spec),
        approximate: !spec.is_oracle(),
        estimator: CenterEstimator::Derivative { m, k },
        search: Some(report),
        parameters: BTreeMap::from([
            ("rho_x", rho),
            ("l_alpha", l),
            ("s_k_m", c.s_k_m),
            ("d_k", c.d_k),
            ("r_k_m", c.r_k_m),
        ]),
    })
}

/// As [`plan_interval_for_derivative`], plugging in `B_{m1}'(Y_n; x)` with
/// [`pilot_density_degree`] when `rho(x)` is not otherwise known.
pub fn interval_for_derivative(
    sample: &Sample,
    x: f64,
    k: usize,
    alpha: f64,
    spec: &SmoothnessSpec,
    rho_of_x: Option<f64>,
    opts: &SearchOptions,
) -> Result<ConfidenceRegion> {
    check_interior(x)?;
    let mut rho = rho_of_x.or_else(|| spec.derivative_at(1, x));
    let plugged = rho.is_none();
    if plugged {
        rho = Some(bernstein_derivative_estimate(sample, pilot_density_degree(sample.len()), 1, x)?);
    }
    let mut plan = plan_interval_for_derivative(sample.len(), x, k, alpha, spec, rho, opts)?;
    if plugged {
        plan.approximate = true;
        plan.mode = Mode::PlugIn;
        plan.parameters.insert("pilot_m", pilot_density_degree(sample.len()) as f64);
    }
    plan.realize(sample)
}

/// Radius of a deviation event and the bound on its probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationBound {
    pub radius: f64,
    pub bound: ProbabilityBound,
}

/// `P(|B_m(Y_n; x) - F(x)| >= eps B_m(sigma^2(F); x) + |B_m(F; x) - F(x)|)
/// <= 2 exp(-(n / q_m(x)) B_m(sigma^2(F); x) tau(eps))`.
pub fn cdf_deviation_bound<F: Function1D + ?Sized>(cdf: &F, n: usize, m: usize, x: f64, eps: f64) -> Result<DeviationBound> {
    check_interior(x)?;
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", format!("{eps} must be positive")));
    }
    let var = |t: f64| sigma2(cdf.eval(t));
    let bv = bernstein_apply(&var, m, x)?;
    let bias = (bernstein_apply(cdf, m, x)? - cdf.eval(x)).abs();
    let raw = 2.0 * (-(n as f64) / q_m(m, x) * bv * tau(eps)?).exp();
    Ok(DeviationBound {
        radius: eps * bv + bias,
        bound: ProbabilityBound::new(raw),
    })
}

/// `P(|B_m^(k)(Y_n; x) - F^(k)(x)| >= delta L_{m,k}(rho; x) + bias)
/// <= 2 exp(-(n / ((m)_k d_k r_k(m))) L_{m,k}(rho; x) tau(r_k(m) delta))`.
pub fn derivative_deviation_bound(oracle: &Oracle, n: usize, m: usize, k: usize, x: f64, delta: f64) -> Result<DeviationBound> {
    check_interior(x)?;
    if k == 0 {
        return Err(Error::invalid("k", "use cdf_deviation_bound for k = 0"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", format!("{delta} must be positive")));
    }
    let params = OperatorParams::new(m, k)?;
    let c = order_constants(m, k)?;
    let rho = oracle.derivative_fn(1)?;
    let lmk = lmk_rplusv_apply(&rho, params, x)?;
    let target = oracle.derivative_at(k, x).ok_or(Error::MissingOracle("F^(k)(x)"))?;
    let bias = (bernstein_derivative_apply(oracle.cdf.as_ref(), params, x)? - target).abs();
    let raw = 2.0 * (-(n as f64) / (params.falling * c.d_k * c.r_k_m) * lmk * tau(c.r_k_m * delta)?).exp();
    Ok(DeviationBound {
        radius: delta * lmk + bias,
        bound: ProbabilityBound::new(raw),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn uniform() -> SmoothnessSpec {
        SmoothnessSpec::Oracle(Oracle::uniform())
    }

    fn grid101() -> Vec<f64> {
        (0..=100).map(|i| i as f64 / 100.0).collect()
    }

    fn sample(n: usize) -> Sample {
        Sample::new((0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()).unwrap()
    }

    #[test]
    fn search_finds_threshold() {
        let opts = SearchOptions::default();
        for t in [2usize, 5, 65, 66, 67, 1000, 33_883, 999_999, 1_000_000] {
            let r = search_degree(2, &opts, |m| {
                Ok(ConditionCheck::new(m, vec![ConditionRecord { name: "t", lhs: t as f64, rhs: m as f64 }]))
            })
            .unwrap();
            assert_eq!(r.m_selected, Some(t));
            if t > 2 {
                assert_eq!(r.last_failing.unwrap().m, t - 1);
            }
            assert!(r.evaluations <= 64 + 2 * 20);
        }
        let err = search_degree(2, &SearchOptions { m_max: 500, ..opts }, |m| {
            Ok(ConditionCheck::new(m, vec![ConditionRecord { name: "never", lhs: 1.0, rhs: 0.0 }]))
        })
        .unwrap_err();
        match err {
            Error::DegreeSearchFailed(r) => {
                assert!(!r.satisfied);
                assert_eq!(r.m_max, 500);
                assert_eq!(r.last_failing.unwrap().m, 500);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn uniform_oracle_band() {
        let opts = SearchOptions::default();
        let s = sample(49);
        let r = band_for_cdf(&s, 0.05, &uniform(), &grid101(), &opts).unwrap();
        assert_eq!(r.plan.m_selected, 2);
        assert_abs_diff_eq!(r.plan.half_width[0], (2.0 * 40f64.ln() / 49.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.plan.half_width[0], 0.388_029, epsilon = 1e-6);
        let b2 = band_uniform_b2(&s, 0.05, &grid101()).unwrap();
        for (a, b) in r.center.iter().zip(&b2.center) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert_eq!(b2.plan.half_width[0] / dkw_half_width(49, 0.05), 0.5);
        // alpha near 1
        let hw = plan_band_for_cdf(49, 1.0 - 1e-12, &uniform(), &grid101(), &opts).unwrap().half_width[0];
        assert_abs_diff_eq!(hw, (2.0 * 2f64.ln() / 49.0).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn derivative_band_reduces_and_uniform() {
        let opts = SearchOptions::default();
        let g = grid101();
        let p0 = plan_band_for_derivative(100, 0, 0.05, &uniform(), &g, &opts).unwrap();
        let pc = plan_band_for_cdf(100, 0.05, &uniform(), &g, &opts).unwrap();
        assert_eq!(p0.half_width, pc.half_width);
        assert_eq!(p0.m_selected, pc.m_selected);
        let p1 = plan_band_for_derivative(100, 1, 0.05, &uniform(), &g, &opts).unwrap();
        assert_eq!(p1.m_selected, 2);
        assert_abs_diff_eq!(p1.half_width[0], 4.0 * (2.0 * 40f64.ln() / 100.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn plug_in_band_closed_form() {
        let opts = SearchOptions::default();
        let spec = SmoothnessSpec::fitted(1.0, 1.0);
        let r = select_degree(ConditionSet::CdfBand, 10_000, 0.05, &spec, PointValues::default(), &opts).unwrap();
        let thr = 0.5 * (2.0 * 40f64.ln() / 1e4).sqrt();
        assert_abs_diff_eq!(thr, 0.013_581, epsilon = 1e-6);
        assert_eq!(r.m_selected, Some((2.5 / thr).powi(2).ceil() as usize));
        // (2.5 / thr)^2 = 33885.63 with the unrounded threshold
        assert_eq!(r.m_selected, Some(33_886));
        let spec2 = SmoothnessSpec::fitted(1.0, 2.0);
        let mut ns = 100usize;
        while ns <= 100_000 / 4 {
            let a = select_degree(ConditionSet::CdfBand, ns, 0.05, &spec2, PointValues::default(), &opts).unwrap();
            let b = select_degree(ConditionSet::CdfBand, 4 * ns, 0.05, &spec2, PointValues::default(), &opts).unwrap();
            let ratio = b.m_selected.unwrap() as f64 / a.m_selected.unwrap() as f64;
            assert!((1.8..=2.2).contains(&ratio), "n={ns}: {ratio}");
            ns *= 4;
        }
    }

    #[test]
    fn b2_interval_constants() {
        let d = b2_interval_delta(49, 0.05).unwrap();
        assert_abs_diff_eq!(tau(8.0 * d).unwrap(), 4.0 * 40f64.ln() / 49.0, epsilon = 1e-12);
        assert_abs_diff_eq!(2.0 * (-49.0 * tau(8.0 * d).unwrap() / 4.0).exp(), 0.05, epsilon = 1e-12);
        let p5 = plan_interval_uniform_b2(49, 0.5, 0.05).unwrap();
        let p1 = plan_interval_uniform_b2(49, 0.1, 0.05).unwrap();
        assert_abs_diff_eq!(p1.half_width[0] / p5.half_width[0], 0.36, epsilon = 1e-12);
        assert_eq!(p1.parameters["delta"], p5.parameters["delta"]);
        assert!(p5.parameters.contains_key("weakened_bound"));
        assert!(matches!(plan_interval_uniform_b2(49, 0.0, 0.05), Err(Error::Precondition { .. })));
        // the theorem with m = 2 and eps = 8 delta reproduces the same bound
        for x in [0.1, 0.5, 0.8] {
            let dev = cdf_deviation_bound(&|t: f64| t, 49, 2, x, 8.0 * d).unwrap();
            assert_abs_diff_eq!(dev.radius, 4.0 * sigma2(x) * d, epsilon = 1e-15);
            assert_abs_diff_eq!(dev.bound.raw, 0.05, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_cdf_interval_needs_degree_13() {
        let opts = SearchOptions::default();
        for n in [50usize, 500, 5000] {
            let p = plan_interval_for_cdf(n, 0.5, 0.05, &uniform(), None, &opts).unwrap();
            assert_eq!(p.m_selected, 13, "n={n}");
            assert_abs_diff_eq!(p.half_width[0], width_multiplier(0.05) * 0.5 / (n as f64).sqrt(), epsilon = 1e-15);
        }
        let err = plan_interval_for_cdf(40, 0.05, 0.05, &uniform(), None, &opts).unwrap_err();
        assert!(matches!(err, Error::Precondition { constraint, .. } if constraint.contains("sigma^2(F(x))")));
        assert!(matches!(
            plan_interval_for_cdf(100, 1.0, 0.05, &uniform(), None, &opts),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn density_interval_k1_matches_direct_operator() {
        let opts = SearchOptions::default();
        let spec = SmoothnessSpec::Oracle(Oracle::power(2.0));
        let p = plan_interval_for_derivative(2000, 0.3, 1, 0.05, &spec, None, &opts).unwrap();
        let m = p.m_selected;
        let l = l_alpha(0.05);
        assert_abs_diff_eq!(
            p.half_width[0],
            width_multiplier(0.05) * (m as f64 * 0.6 / 2000.0).sqrt(),
            epsilon = 1e-14
        );
        // exact bias of B_{m,1}(2t) at x: |1 - 2x| / m
        let c = &p.conditions()[0];
        assert_abs_diff_eq!(c.lhs, 0.4 / m as f64, epsilon = 1e-13);
        assert!(0.4 / (m - 1) as f64 > (0.6 / (l * l)).min(l * ((m - 1) as f64 * 0.6 / 2000.0).sqrt()));
        let d = OperatorParams::new(m, 1).unwrap();
        let lm = lmk_rplusv_apply(&PowerDensity::new(2.0), d, 0.3).unwrap();
        let direct = bernstein_derivative_apply(&PowerCdf::new(2.0), d, 0.3).unwrap();
        assert_abs_diff_eq!(lm, direct, epsilon = 1e-13);
    }

    #[test]
    fn derivative_interval_constraint_and_errors() {
        let opts = SearchOptions::default();
        let spec = SmoothnessSpec::Oracle(Oracle::power(2.0));
        // tiny n makes m/n exceed the constraint
        let err = plan_interval_for_derivative(20, 0.3, 1, 0.05, &spec, None, &opts).unwrap_err();
        assert!(matches!(err, Error::Precondition { constraint, .. } if constraint.starts_with("m/n")));
        assert!(matches!(
            plan_interval_for_derivative(2000, 0.0, 1, 0.05, &spec, None, &opts),
            Err(Error::Precondition { .. })
        ));
        let fitted = SmoothnessSpec::fitted(1.0, 1.0);
        assert!(matches!(
            plan_interval_for_derivative(2000, 0.3, 1, 0.05, &fitted, None, &opts),
            Err(Error::MissingOracle(_))
        ));
        let p = plan_interval_for_derivative(100_000, 0.5, 2, 0.05, &SmoothnessSpec::Oracle(Oracle::power(4.0)), None, &opts).unwrap();
        assert_eq!(p.conditions().len(), 2);
        assert!(matches!(
            plan_band_for_derivative(1000, 2, 0.05, &fitted, &grid101(), &opts),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn plug_in_interval_is_flagged() {
        let opts = SearchOptions::default();
        let s = sample(2000);
        let spec = SmoothnessSpec::fitted(1.0, 1.0);
        let r = interval_for_cdf(&s, 0.4, 0.05, &spec, None, &opts).unwrap();
        assert!(r.plan.approximate);
        assert_eq!(r.plan.mode, Mode::PlugIn);
        let fhat = bernstein_cdf_estimate(&s, pilot_cdf_degree(2000), 0.4).unwrap();
        assert_eq!(r.plan.parameters["f_x"], fhat);
        let r = interval_for_derivative(&s, 0.4, 1, 0.05, &spec, None, &opts).unwrap();
        assert!(r.plan.approximate);
    }

    #[test]
    fn deviation_bound_limits() {
        let f = PowerCdf::new(2.0);
        let tiny = cdf_deviation_bound(&f, 200, 20, 0.5, 1e-9).unwrap();
        assert!(tiny.bound.raw > 1.99 && tiny.bound.clamped == 1.0);
        let o = Oracle::power(2.0);
        let mut last = (0.0, f64::INFINITY);
        for d in [0.01, 0.1, 0.5, 1.0, 2.0] {
            let b = derivative_deviation_bound(&o, 500, 10, 1, 0.5, d).unwrap();
            assert!(b.radius > last.0 && b.bound.raw < last.1);
            last = (b.radius, b.bound.raw);
        }
        assert_eq!(order_constants(10, 1).unwrap().r_k_m, 1.0);
    }

    #[test]
    fn region_output() {
        let s = sample(49);
        let r = band_uniform_b2(&s, 0.05, &[0.0, 0.5, 1.0]).unwrap();
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,estimate,lower,upper");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("5.0000000000000000e-1,"));
        assert!(!text.contains('\r'));
        let mut js = Vec::new();
        band_for_cdf(&s, 0.05, &uniform(), &[0.5], &SearchOptions::default())
            .unwrap()
            .write_sidecar(&mut js)
            .unwrap();
        let v: serde_json::Value = serde_json::from_slice(&js).unwrap();
        assert_eq!(v["m"], 2);
        assert_eq!(v["mode"], "oracle");
        assert_eq!(v["conditions"][0]["name"], "band-bias");
        assert!(v["conditions"][0]["lhs"].as_f64().unwrap() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn plug_in_degree_is_monotone(n in 50usize..20_000, a1 in 0.01f64..0.5, a2 in 0.01f64..0.5, beta in 0.3f64..2.0) {
            let opts = SearchOptions::default();
            let spec = SmoothnessSpec::fitted(1.0, beta);
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let sel = |n, a| select_degree(ConditionSet::CdfBand, n, a, &spec, PointValues::default(), &opts).ok().and_then(|r| r.m_selected);
            // a larger alpha narrows the band and tightens the bias condition
            if let (Some(m_lo), Some(m_hi)) = (sel(n, lo), sel(n, hi)) {
                prop_assert!(m_lo <= m_hi);
            }
            if let (Some(m1), Some(m2)) = (sel(n, lo), sel(2 * n, lo)) {
                prop_assert!(m1 <= m2);
            }
        }

        #[test]
        fn selected_degree_is_minimal(n in 100usize..50_000, x in 0.05f64..0.95, beta in 0.4f64..3.0) {
            let opts = SearchOptions::default();
            let spec = SmoothnessSpec::Oracle(Oracle::power(beta));
            let values = PointValues::default();
            let set = ConditionSet::CdfInterval { x };
            let fx = x.powf(beta);
            prop_assume!(n as f64 >= l_alpha(0.05).powi(2) / sigma2(fx));
            if let Ok(r) = select_degree(set, n, 0.05, &spec, values, &opts) {
                let m = r.m_selected.unwrap();
                let ev = r.first_passing.as_ref().unwrap();
                prop_assert!(ev.conditions.iter().all(|c| c.lhs <= c.rhs));
                if m > 2 {
                    let prev = r.last_failing.as_ref().unwrap();
                    prop_assert_eq!(prev.m, m - 1);
                    prop_assert!(!prev.satisfied);
                }
            }
        }
    }
}
