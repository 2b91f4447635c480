//! Chooses the regularization parameter by the discrepancy principle for a
//! few target fractions and shows the linearized residual it achieves.

use scatter_kalman::experiments::{synthesize_measurements, ScenarioConfig};
use scatter_kalman::filters::{linearize_problem, DiscrepancyCurve};
use scatter_kalman::forward::MeasurementWeight;
use scatter_kalman::grid::MediumField;
use scatter_kalman::Error;

fn main() -> scatter_kalman::Result<()> {
    let config = ScenarioConfig {
        sigma: 0.5,
        seed: 3,
        ..ScenarioConfig::default()
    };
    let model = config.forward_model()?;
    let q_true = config.true_contrast()?;
    let data = synthesize_measurements(&q_true, &config, &model)?;
    let q0 = MediumField::zeros(*model.grid());

    let (ops, lin_data) = linearize_problem(&model, &q0, &data)?;
    // at q0 = 0 the linearized data equal the current misfit
    let curve = DiscrepancyCurve::new(&ops, lin_data, MeasurementWeight::identity())?;
    println!("residual at q0: {:.4}", curve.residual_norm());
    for alpha in [1e-2, 1.0, 1e2, 1e4, 1e6] {
        println!("  alpha = {alpha:>8.0e}  linearized residual = {:.4}", curve.residual(alpha));
    }
    let floor = curve.residual(1e-8) / curve.residual_norm();
    println!("least-squares floor: {floor:.4} of the residual");
    for rho in [0.5, 0.8, 0.9] {
        match curve.solve(rho) {
            Ok(alpha) => {
                let ratio = curve.residual(alpha) / curve.residual_norm();
                println!("rho = {rho}: alpha = {alpha:.4e}, achieved fraction {ratio:.5}");
            }
            Err(Error::NoBracket { .. }) => println!("rho = {rho}: unreachable, below the floor"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
