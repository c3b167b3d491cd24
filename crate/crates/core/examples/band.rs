//! Confidence bands for F: oracle, plug-in and the degree-2 band for the uniform.

use bernband::confidence::{band_for_cdf, band_uniform_b2, SearchOptions};
use bernband::sim::{linear_grid, sample_power};
use bernband::smoothness::{Oracle, SmoothnessSpec};

fn main() -> bernband::Result<()> {
    let grid = linear_grid(0.0, 1.0, 100);
    let opts = SearchOptions::default();

    let s = sample_power(1.5, 1500, 3)?;
    let oracle = band_for_cdf(&s, 0.05, &SmoothnessSpec::Oracle(Oracle::power(1.5)), &grid, &opts)?;
    println!("oracle band: m = {}, half-width {:.4}", oracle.plan.m_selected, oracle.plan.half_width[0]);

    let plugin = band_for_cdf(&s, 0.05, &SmoothnessSpec::fitted(1.0, 1.0), &grid, &opts)?;
    println!("plug-in band (C = 1, beta = 1): m = {}", plugin.plan.m_selected);

    let u = sample_power(1.0, 49, 3)?;
    let b2 = band_uniform_b2(&u, 0.05, &grid)?;
    println!("degree-2 uniform band: half-width {:.6}", b2.plan.half_width[0]);

    let mut out = Vec::new();
    oracle.write_sidecar(&mut out)?;
    println!("{}", String::from_utf8_lossy(&out));
    Ok(())
}
