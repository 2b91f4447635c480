//! Reconstructs the unit-disk contrast with each algorithm and prints the
//! error history.
//!
//! Usage: `cargo run --release --example reconstruct_disk [sigma] [alpha] [iterations]`

use std::time::Instant;

use scatter_kalman::experiments::{run_reconstruction, synthesize_measurements, Algorithm, ScenarioConfig};
use scatter_kalman::filters::RegularizationSchedule;

fn main() -> scatter_kalman::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let sigma = args.next().unwrap_or(0.0);
    let alpha = args.next().unwrap_or(100.0);
    let iterations = args.next().unwrap_or(10.0) as usize;

    let base = ScenarioConfig {
        sigma,
        schedule: RegularizationSchedule::constant(alpha)?,
        outer_iterations: iterations,
        seed: 1,
        ..ScenarioConfig::default()
    };
    let model = base.forward_model()?;
    let q_true = base.true_contrast()?;
    let data = synthesize_measurements(&q_true, &base, &model)?;
    println!("sigma = {sigma}, alpha = {alpha}, D = {}", model.grid().num_cells());

    for algorithm in Algorithm::ALL {
        let config = ScenarioConfig { algorithm, ..base.clone() };
        let started = Instant::now();
        let history = run_reconstruction(&config, &data, &q_true, &model)?;
        let errors: Vec<String> = history.mse_values().iter().map(|e| format!("{e:.3}")).collect();
        println!("{:<10} {:>7.2}s  {}", algorithm.name(), started.elapsed().as_secs_f64(), errors.join(" "));
        if let Some(err) = history.failure {
            println!("  stopped: {err}");
        }
    }
    Ok(())
}
