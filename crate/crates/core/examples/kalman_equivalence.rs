//! The sequential Kalman filter reproduces the full-data Tikhonov solution,
//! and a Kalman-filter Levenberg–Marquardt sweep reproduces one full-data
//! Levenberg–Marquardt step.

use scatter_kalman::experiments::{equivalence_harness, Scale};

fn main() -> scatter_kalman::Result<()> {
    let scale = match std::env::args().nth(1) {
        Some(s) => s.parse()?,
        None => Scale::Tiny,
    };
    let report = equivalence_harness(scale, 7)?;
    println!("linear problem, D = 8, J = 4, N = 5");
    for (alpha, dev) in &report.linear {
        println!("  alpha = {alpha:<5} relative deviation {dev:.2e}");
    }
    println!("scattering problem ({scale} scale)");
    for (i, dev) in &report.nonlinear {
        println!("  outer iteration {i}: relative deviation {dev:.2e}");
    }
    Ok(())
}
