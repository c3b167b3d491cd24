//! Approximation and concentration bounds.

use bernband::bounds::{
    bernstein_error_bound, concentration_bound, dkw_bound, flat_region_bound, flat_region_window, tau, width_multiplier,
};
use bernband::functions::PowerCdf;
use bernband::operators::bernstein_apply;
use bernband::sim::flat_example;
use bernband::smoothness::SmoothnessSpec;
use bernband::Function1D;

fn main() -> bernband::Result<()> {
    println!("2 l + 1/l at alpha = 0.05: {:.4}", width_multiplier(0.05));
    println!("tau(1) = {:.6}", tau(1.0)?);
    println!("DKW P(|Y_n - F| > 0.1), n = 200: {:.4e}", dkw_bound(200, 0.1)?.clamped);
    println!("concentration bound n = 200, c = 1, d = 1, eps = 0.5: {:.4e}", concentration_bound(200, 1.0, 1.0, 0.5)?.clamped);

    let beta = 0.5;
    let f = PowerCdf::new(beta);
    let spec = SmoothnessSpec::power(beta);
    for m in [10, 100, 1000] {
        let x = 0.25;
        let err = (bernstein_apply(&f, m, x)? - f.eval(x)).abs();
        let b = bernstein_error_bound(&spec, m, Some(x))?.pointwise()?;
        println!("m = {m:<5} |B_m F - F|(0.25) = {err:.3e} <= {b:.3e}");
    }

    let g = flat_example();
    let (lo, hi) = flat_region_window(200, 0, g.a, g.b)?;
    let b = flat_region_bound(200, 0, 0.5, g.a, g.b, g.sup_deviation())?;
    println!("flat window at m = 200: [{lo:.4}, {hi:.4}], bound at 0.5 = {b:.3e}");
    Ok(())
}
