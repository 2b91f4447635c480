//! Final and best errors of the four Kalman variants over a range of noise
//! levels, run in parallel.
//!
//! Usage: `cargo run --release --example noise_sweep [alpha] [iterations]`

use rayon::prelude::*;
use scatter_kalman::experiments::{run_reconstruction, synthesize_measurements, Algorithm, ScenarioConfig};
use scatter_kalman::filters::RegularizationSchedule;

fn main() -> scatter_kalman::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let alpha = args.next().unwrap_or(100.0);
    let iterations = args.next().unwrap_or(5.0) as usize;
    let sigmas = [0.6, 0.9, 1.2];

    let rows: Vec<String> = sigmas
        .par_iter()
        .map(|&sigma| -> scatter_kalman::Result<Vec<String>> {
            let base = ScenarioConfig {
                sigma,
                seed: 1,
                outer_iterations: iterations,
                schedule: RegularizationSchedule::constant(alpha)?,
                ..ScenarioConfig::default()
            };
            let model = base.forward_model()?;
            let q_true = base.true_contrast()?;
            let data = synthesize_measurements(&q_true, &base, &model)?;
            Algorithm::KALMAN_VARIANTS
                .par_iter()
                .map(|&algorithm| {
                    let cfg = ScenarioConfig { algorithm, ..base.clone() };
                    let h = run_reconstruction(&cfg, &data, &q_true, &model)?;
                    let e = h.mse_values();
                    let best = e.iter().copied().fold(f64::INFINITY, f64::min);
                    Ok(format!("{sigma:>5} {:<10} {:>9.4} {:>9.4}", algorithm.name(), e[e.len() - 1], best))
                })
                .collect()
        })
        .collect::<scatter_kalman::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    println!("sigma algorithm  final_mse  min_mse   (alpha = {alpha}, {iterations} iterations)");
    for row in rows {
        println!("{row}");
    }
    Ok(())
}
