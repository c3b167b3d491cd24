//! Command-line adapter over the library.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | i/o failure |
//! | 2 | usage error, malformed input or invalid experiment configuration |
//! | 3 | parameter violation (for example `m <= k`, `alpha` outside `(0, 1)`) |
//! | 4 | degree search failed below `m_max` |
//! | 5 | precondition violated (the inequality is named) |

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::confidence::{
    band_for_derivative, band_uniform_b2, fmt_float, interval_for_cdf, interval_for_derivative, interval_uniform_b2,
    ConfidenceRegion, SearchOptions,
};
use crate::error::{Error, Result};
use crate::estimators::{
    b2_uniform_estimate, kernel_cdf_estimate, read_observations, read_unit_sample, BernsteinEstimator,
    DerivativeEstimator, KernelSpec, Sample,
};
use crate::functions::PowerCdf;
use crate::sim::{linear_grid, run_experiment, BoundKind, Experiment, ExperimentConfig};
use crate::smoothness::{
    fit_lipschitz, modulus1, modulus2, modulus2_dt, power_family_moduli, FittedProfile, ModulusGrid, ModulusKind,
    Oracle, SmoothnessSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARAMETER: i32 = 3;
pub const EXIT_SEARCH: i32 = 4;
pub const EXIT_PRECONDITION: i32 = 5;

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Malformed { .. } | Error::ValuesOutsideUnit(_) | Error::EmptySample => EXIT_USAGE,
        Error::DegreeSearchFailed(_) => EXIT_SEARCH,
        Error::Precondition { .. } => EXIT_PRECONDITION,
        _ => EXIT_PARAMETER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "bernband", version, about = "Bernstein estimators with explicit finite-sample confidence bands and intervals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate an estimator on a grid.
    Estimate(EstimateArgs),
    /// Confidence band over a grid.
    Band(BandArgs),
    /// Pointwise confidence interval.
    Interval(IntervalArgs),
    /// Moduli of smoothness of x^beta on a grid, with closed forms.
    Moduli(ModuliArgs),
    /// Run a simulation experiment.
    Simulate(SimulateArgs),
    /// Empirical check of an approximation or probability bound.
    BoundCheck(BoundCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    BernsteinCdf,
    BernsteinDerivative,
    KernelCdf,
    B2Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeFlag {
    Oracle,
    Plugin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegionMethod {
    /// Degree selected from the smoothness conditions.
    Bernstein,
    /// Degree-2 construction for uniform observations.
    B2Uniform,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Observations, one per line or a single column with optional header `x`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: EstimatorKind,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Number of equally spaced grid points on [0, 1].
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args, Clone)]
pub struct SpecArgs {
    /// Exponent of the power family, or of the profile when --C is given.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Constant of a (C, beta) smoothness profile; selects plug-in mode.
    #[arg(long = "C", id = "C")]
    pub c: Option<f64>,
    /// Sup-norm bound of F^(k) for profiles used with k >= 2.
    #[arg(long)]
    pub sup_norm: Option<f64>,
    /// True F(x) = x^beta, conditions evaluated exactly.
    #[arg(long, conflicts_with_all = ["beta", "C"])]
    pub oracle_family: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeFlag>,
    #[arg(long, default_value_t = 1_000_000)]
    pub m_max: usize,
}

impl SpecArgs {
    fn spec(&self) -> std::result::Result<SmoothnessSpec, String> {
        let spec = match (self.oracle_family, self.c, self.beta) {
            (Some(b), None, None) => SmoothnessSpec::Oracle(Oracle::power(b)),
            (None, Some(c), Some(beta)) => SmoothnessSpec::Fitted(FittedProfile {
                c,
                beta,
                modulus: ModulusKind::DitzianTotik,
                sup_norm: self.sup_norm,
            }),
            (None, Some(_), None) => return Err("--C needs --beta".into()),
            (None, None, Some(b)) => SmoothnessSpec::power(b),
            (None, None, None) => {
                return Err("a smoothness spec is required: --beta B, --C C --beta B, or --oracle-family B".into())
            }
            _ => return Err("--oracle-family excludes --beta and --C".into()),
        };
        match (self.mode, spec.is_oracle()) {
            (Some(ModeFlag::Plugin), true) => Err("--mode plugin needs a profile: --C C --beta B".into()),
            (Some(ModeFlag::Oracle), false) => Err("--mode oracle needs --beta B or --oracle-family B".into()),
            _ => Ok(spec),
        }
    }

    fn options(&self) -> SearchOptions {
        SearchOptions {
            m_max: self.m_max,
            ..SearchOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct BandArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Region CSV; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON sidecar; defaults to the output path with extension `json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = RegionMethod::Bernstein)]
    pub method: RegionMethod,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Debug, Args)]
pub struct IntervalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub x: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Known F(x), overriding the spec and plug-in value.
    #[arg(long)]
    pub f_x: Option<f64>,
    /// Known rho(x), overriding the spec and plug-in value.
    #[arg(long)]
    pub rho_x: Option<f64>,
    #[arg(long, value_enum, default_value_t = RegionMethod::Bernstein)]
    pub method: RegionMethod,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Debug, Args)]
pub struct ModuliArgs {
    #[arg(long)]
    pub beta: f64,
    /// Comma-separated step sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5])]
    pub h: Vec<f64>,
    #[arg(long, default_value_t = crate::smoothness::DEFAULT_RESOLUTION)]
    pub resolution: usize,
    /// Also fit C h^beta to the weighted second modulus.
    #[arg(long)]
    pub fit: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub experiment: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated evaluation points.
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Bound kind for `bound_check`.
    #[arg(long)]
    pub bound: Option<String>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundCheckArgs {
    /// bernstein, kantorovich, flat, cdf-concentration or derivative-concentration.
    #[arg(long)]
    pub bound: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Reason a command stopped.
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::from(e))
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, out),
        Command::Band(a) => cmd_band(&a, out),
        Command::Interval(a) => cmd_interval(&a, out),
        Command::Moduli(a) => cmd_moduli(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::BoundCheck(a) => cmd_bound_check(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::DegreeSearchFailed(report) = &e {
                if let Some(c) = &report.last_failing {
                    let _ = writeln!(err, "residuals at m = {}:", c.m);
                    for r in &c.conditions {
                        let _ = writeln!(err, "  {}: lhs = {} rhs = {}", r.name, fmt_float(r.lhs), fmt_float(r.rhs));
                    }
                }
            }
            exit_code(&e)
        }
    }
}

/// Entry point used by the binary: honours `BERNBAND_THREADS`.
pub fn main_with_env() -> i32 {
    if let Some(t) = std::env::var("BERNBAND_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn unit_sample(path: &Path) -> Result<Sample> {
    read_unit_sample(open(path)?)
}

fn emit(output: &Option<PathBuf>, out: &mut dyn Write, body: &[u8]) -> CmdResult {
    match output {
        Some(p) => std::fs::write(p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => out.write_all(body)?,
    }
    Ok(())
}

fn grid_points(count: usize) -> std::result::Result<Vec<f64>, Failure> {
    if count < 2 {
        return Err(Failure::Usage("--grid needs at least 2 points".into()));
    }
    Ok(linear_grid(0.0, 1.0, count - 1))
}

fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write) -> CmdResult {
    let xs = grid_points(a.grid)?;
    let values: Vec<f64> = match a.kind {
        EstimatorKind::KernelCdf => {
            let h = a.bandwidth.ok_or_else(|| Failure::Usage("kernel-cdf needs --bandwidth".into()))?;
            let s = Sample::unrestricted(read_observations(open(&a.input)?)?)?;
            let k = KernelSpec::gaussian(h);
            xs.iter().map(|&x| kernel_cdf_estimate(&s, &k, x)).collect::<Result<_>>()?
        }
        EstimatorKind::B2Uniform => {
            let s = unit_sample(&a.input)?;
            xs.iter().map(|&x| b2_uniform_estimate(&s, x)).collect::<Result<_>>()?
        }
        EstimatorKind::BernsteinCdf => {
            let m = a.m.ok_or_else(|| Failure::Usage("bernstein-cdf needs --m".into()))?;
            let s = unit_sample(&a.input)?;
            let est = BernsteinEstimator::new(&s, m)?;
            xs.iter().map(|&x| est.eval(x)).collect::<Result<_>>()?
        }
        EstimatorKind::BernsteinDerivative => {
            let m = a.m.ok_or_else(|| Failure::Usage("bernstein-derivative needs --m".into()))?;
            let s = unit_sample(&a.input)?;
            let est = DerivativeEstimator::new(&s, m, a.k)?;
            xs.iter().map(|&x| est.eval(x)).collect::<Result<_>>()?
        }
    };
    let body = match a.format {
        Format::Csv => {
            let mut s = String::from("x,estimate\n");
            for (x, v) in xs.iter().zip(&values) {
                s.push_str(&format!("{},{}\n", fmt_float(*x), fmt_float(*v)));
            }
            s
        }
        Format::Json => {
            let v = serde_json::json!({ "x": xs, "estimate": values });
            serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))? + "\n"
        }
    };
    emit(&a.output, out, body.as_bytes())
}

fn write_region(region: &ConfidenceRegion, output: &Option<PathBuf>, report: &Option<PathBuf>, out: &mut dyn Write) -> CmdResult {
    let mut csv = Vec::new();
    region.write_csv(&mut csv)?;
    emit(output, out, &csv)?;
    let sidecar = report.clone().or_else(|| output.as_ref().map(|p| p.with_extension("json")));
    if let Some(p) = sidecar {
        let f = File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        let mut w = BufWriter::new(f);
        region.write_sidecar(&mut w)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn usage_spec(spec: &SpecArgs) -> std::result::Result<SmoothnessSpec, Failure> {
    spec.spec().map_err(Failure::Usage)
}

fn cmd_band(a: &BandArgs, out: &mut dyn Write) -> CmdResult {
    let xs = grid_points(a.grid)?;
    let region = match a.method {
        RegionMethod::B2Uniform => {
            if a.k != 0 {
                return Err(Failure::Usage("the b2-uniform band is for k = 0".into()));
            }
            band_uniform_b2(&unit_sample(&a.input)?, a.alpha, &xs)?
        }
        RegionMethod::Bernstein => {
            let spec = usage_spec(&a.spec)?;
            band_for_derivative(&unit_sample(&a.input)?, a.k, a.alpha, &spec, &xs, &a.spec.options())?
        }
    };
    write_region(&region, &a.output, &a.report, out)
}

fn cmd_interval(a: &IntervalArgs, out: &mut dyn Write) -> CmdResult {
    let region = match a.method {
        RegionMethod::B2Uniform => {
            if a.k != 0 {
                return Err(Failure::Usage("the b2-uniform interval is for k = 0".into()));
            }
            interval_uniform_b2(&unit_sample(&a.input)?, a.x, a.alpha)?
        }
        RegionMethod::Bernstein => {
            let spec = usage_spec(&a.spec)?;
            let s = unit_sample(&a.input)?;
            let opts = a.spec.options();
            if a.k == 0 {
                interval_for_cdf(&s, a.x, a.alpha, &spec, a.f_x, &opts)?
            } else {
                interval_for_derivative(&s, a.x, a.k, a.alpha, &spec, a.rho_x, &opts)?
            }
        }
    };
    write_region(&region, &a.output, &a.report, out)
}

fn cmd_moduli(a: &ModuliArgs, out: &mut dyn Write) -> CmdResult {
    let grid = ModulusGrid::new(a.resolution)?;
    let f = PowerCdf::new(a.beta);
    let mut s = String::from("h,omega,omega2,omega2_dt,closed_omega,closed_omega2\n");
    let mut dt = Vec::new();
    for &h in &a.h {
        let closed = power_family_moduli(a.beta, h)?;
        let w = (modulus1(&f, h, &grid)?, modulus2(&f, h, &grid)?, modulus2_dt(&f, h, &grid)?);
        dt.push((h, w.2));
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_float(h),
            fmt_float(w.0),
            fmt_float(w.1),
            fmt_float(w.2),
            fmt_float(closed.omega.value),
            fmt_float(closed.omega2.value)
        ));
    }
    emit(&a.output, out, s.as_bytes())?;
    if a.fit {
        let fit = fit_lipschitz(&dt)?;
        writeln!(out, "# fit C = {} beta = {} rms = {}", fmt_float(fit.c), fmt_float(fit.beta), fmt_float(fit.rms_residual))?;
    }
    Ok(())
}

fn report_experiment(cfg: &ExperimentConfig, dir: &Path, out: &mut dyn Write) -> CmdResult {
    let result = run_experiment(cfg)?;
    let paths = result.write_outputs(dir)?;
    for p in &paths {
        writeln!(out, "wrote {}", p.display())?;
    }
    for (k, v) in &result.summary {
        writeln!(out, "{k} = {}", fmt_float(*v))?;
    }
    for n in &result.notes {
        writeln!(out, "note: {n}")?;
    }
    Ok(())
}

fn invalid_config(e: Error) -> Failure {
    match e {
        Error::InvalidParameter { .. } | Error::EmptyGrid | Error::OutsideUnitInterval { .. } => {
            Failure::Usage(format!("invalid configuration: {e}"))
        }
        e => Failure::Lib(e),
    }
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let experiment: Experiment = a.experiment.parse().map_err(invalid_config)?;
    let mut cfg = match (&a.bound, experiment) {
        (Some(b), Experiment::BoundCheck) => ExperimentConfig::bound_check(b.parse().map_err(invalid_config)?),
        (Some(_), _) => return Err(Failure::Usage("--bound applies to bound_check only".into())),
        (None, e) => ExperimentConfig::defaults(e),
    };
    cfg.seed = a.seed;
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.beta {
        cfg.beta = v;
    }
    if let Some(v) = a.reps {
        cfg.reps = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = &a.x {
        cfg.x_grid = v.clone();
    }
    if a.m.is_some() {
        cfg.m_override = a.m;
    }
    cfg.validate().map_err(invalid_config)?;
    report_experiment(&cfg, &a.out_dir, out)
}

fn cmd_bound_check(a: &BoundCheckArgs, out: &mut dyn Write) -> CmdResult {
    let kind: BoundKind = a.bound.parse().map_err(invalid_config)?;
    let mut cfg = ExperimentConfig::bound_check(kind);
    cfg.seed = a.seed;
    if let Some(v) = a.beta {
        cfg.beta = v;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.reps {
        cfg.reps = v;
    }
    if a.m.is_some() {
        cfg.m_override = a.m;
    }
    if let Some(v) = &a.x {
        cfg.x_grid = v.clone();
    }
    cfg.validate().map_err(invalid_config)?;
    report_experiment(&cfg, &a.out_dir, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("bernband").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn exit_code_table() {
        assert_eq!(exit_code(&Error::Io("x".into())), 1);
        assert_eq!(exit_code(&Error::Malformed { line: 1, content: "a".into() }), 2);
        assert_eq!(exit_code(&Error::DegreeNotAboveOrder { m: 2, k: 2 }), 3);
        assert_eq!(exit_code(&Error::Precondition { constraint: "c", lhs: 0.0, rhs: 1.0 }), 5);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_str(&[]).0, EXIT_USAGE);
        assert_eq!(run_str(&["simulate", "--experiment", "fig1_band"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["--help"]).0, EXIT_OK);
        let spec = SpecArgs {
            beta: Some(1.0),
            c: None,
            sup_norm: None,
            oracle_family: None,
            mode: Some(ModeFlag::Plugin),
            m_max: 10,
        };
        assert!(spec.spec().is_err());
    }

    #[test]
    fn moduli_command() {
        let (code, out, _) = run_str(&["moduli", "--beta", "2", "--h", "0.1,0.2", "--resolution", "1000"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 3);
    }
}
