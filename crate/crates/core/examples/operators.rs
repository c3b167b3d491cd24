//! Bernstein and Kantorovich operators applied to x^2 and a power-family density.

use bernband::functions::{Polynomial, PowerDensity};
use bernband::operators::{
    bernstein_apply, bernstein_basis, bernstein_derivative_apply, bernstein_derivative_via_kantorovich, kantorovich_apply,
    OperatorParams, ShiftLaw,
};

fn main() -> bernband::Result<()> {
    let square = Polynomial::new(vec![0.0, 0.0, 1.0]);
    println!("p_(10,3)(0.4) = {:.6}", bernstein_basis(10, 3, 0.4)?);
    for m in [5, 20, 80] {
        // B_m(x^2; x) = x^2 + x(1 - x)/m
        let v = bernstein_apply(&square, m, 0.3)?;
        println!("B_{m}(x^2; 0.3) = {v:.6}, exact {:.6}", 0.09 + 0.21 / m as f64);
    }

    let p = OperatorParams::new(30, 1)?;
    let a = bernstein_derivative_apply(&square, p, 0.3)?;
    let b = bernstein_derivative_via_kantorovich(&square, p, 0.3)?;
    println!("B'_30(x^2; 0.3): difference form {a:.12}, Kantorovich form {b:.12}");

    let rho = PowerDensity::new(2.5);
    for k in [1, 2] {
        let v = kantorovich_apply(&rho, OperatorParams::new(40, k)?, ShiftLaw::irwin_hall(k), 0.5)?;
        println!("B_(40,{k})(rho; 0.5) = {v:.6}, rho(0.5) = {:.6}", 2.5 * 0.5f64.powf(1.5));
    }
    Ok(())
}
