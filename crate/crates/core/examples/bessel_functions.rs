//! Tabulates J0, Y0, J1, Y1 and the Hankel function H0^(1) across the three
//! evaluation regimes and checks the Wronskian on the way.

use std::f64::consts::PI;

use scatter_kalman::specfun::{bessel_all, hankel1_0};

fn main() -> scatter_kalman::Result<()> {
    println!("{:>8} {:>22} {:>22} {:>22} {:>22} {:>10}", "x", "J0", "Y0", "J1", "Y1", "wronskian");
    for x in [1e-3, 0.1, 1.0, 2.404825557695773, 8.0, 8.5, 25.0, 40.0, 200.0] {
        let v = bessel_all(x)?;
        let w = (v.j1 * v.y0 - v.j0 * v.y1) * PI * x / 2.0 - 1.0;
        println!("{x:>8} {:>22.15e} {:>22.15e} {:>22.15e} {:>22.15e} {w:>10.1e}", v.j0, v.y0, v.j1, v.y1);
    }
    let h = hankel1_0(1.0)?;
    println!("H0(1) = {} + {}i", h.re, h.im);
    match hankel1_0(0.0) {
        Err(e) => println!("H0(0): {e}"),
        Ok(v) => println!("H0(0) = {v}"),
    }
    Ok(())
}
