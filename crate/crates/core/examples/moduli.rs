//! Grid moduli of smoothness of F(x) = x^beta against the closed forms, and a
//! Lipschitz profile fit.

use bernband::functions::PowerCdf;
use bernband::smoothness::{fit_lipschitz, modulus1, modulus2, modulus2_dt, power_family_moduli, ModulusGrid};

fn main() -> bernband::Result<()> {
    let grid = ModulusGrid::new(10_000)?;
    let beta = 1.5;
    let f = PowerCdf::new(beta);
    let mut dt = Vec::new();
    println!("h      omega     closed    omega2    closed    omega2_dt");
    for h in [0.02, 0.05, 0.1, 0.2, 0.4] {
        let c = power_family_moduli(beta, h)?;
        let w2dt = modulus2_dt(&f, h, &grid)?;
        dt.push((h, w2dt));
        println!(
            "{h:<6} {:.6}  {:.6}  {:.6}  {:.6}  {w2dt:.6}",
            modulus1(&f, h, &grid)?,
            c.omega.value,
            modulus2(&f, h, &grid)?,
            c.omega2.value
        );
    }
    let fit = fit_lipschitz(&dt)?;
    println!("omega2_dt(h) ~ {:.4} h^{:.4}", fit.c, fit.beta);
    Ok(())
}
