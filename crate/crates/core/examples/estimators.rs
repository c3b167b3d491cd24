//! Estimators of F and its density from one simulated sample.

use bernband::estimators::{
    b2_uniform_estimate, empirical_cdf, kernel_cdf_estimate, ks_distance, BernsteinEstimator, DerivativeEstimator,
    KernelSpec,
};
use bernband::functions::PowerCdf;
use bernband::sim::sample_power;
use bernband::Function1D;

fn main() -> bernband::Result<()> {
    let beta = 2.0;
    let sample = sample_power(beta, 500, 7)?;
    let truth = PowerCdf::new(beta);
    let cdf = BernsteinEstimator::new(&sample, 20)?;
    let density = DerivativeEstimator::new(&sample, 20, 1)?;
    let kernel = KernelSpec::gaussian(0.05);
    println!("x     F(x)    Y_n     B_20    B_2     kernel  rho(x)  B'_20");
    for i in 1..10 {
        let x = i as f64 / 10.0;
        println!(
            "{x:.1}  {:.4}  {:.4}  {:.4}  {:.4}  {:.4}  {:.4}  {:.4}",
            truth.eval(x),
            empirical_cdf(&sample, x),
            cdf.eval(x)?,
            b2_uniform_estimate(&sample, x)?,
            kernel_cdf_estimate(&sample, &kernel, x)?,
            2.0 * x,
            density.eval(x)?
        );
    }
    println!("KS distance of Y_n: {:.4}", ks_distance(&sample, &truth));
    Ok(())
}
