//! Finite-difference check of the Fréchet derivative: the linearization
//! error shrinks quadratically with the step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scatter_kalman::forward::ForwardModel;
use scatter_kalman::grid::{phantom, AngleSet, Grid, MediumField, PhantomKind};
use scatter_kalman::C64;

fn main() -> scatter_kalman::Result<()> {
    let grid = Grid::new(3.0, 6)?;
    let model = ForwardModel::new(grid, 7.0, AngleSet::equispaced(60)?)?;
    let theta = [1.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = MediumField::from_fn(grid, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));

    for (label, q) in [("q = 0", MediumField::zeros(grid)), ("disk", phantom(grid, PhantomKind::Disk))] {
        let lin = model.linearize(&q)?;
        let base = lin.far_field(theta)?;
        let derivative = lin.frechet_matrix(theta)?.matrix() * m.values();
        println!("{label}");
        let mut previous: Option<f64> = None;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let shifted = MediumField::new(grid, q.values() + m.values() * C64::new(eps, 0.0))?;
            let moved = model.linearize(&shifted)?.far_field(theta)?;
            let err = (moved.values() - base.values() - &derivative * C64::new(eps, 0.0)).norm();
            let slope = previous.map_or(String::new(), |p| format!("slope {:.3}", (p / err).log10()));
            println!("  eps = {eps:.0e}  error = {err:.3e}  {slope}");
            previous = Some(err);
        }
    }
    Ok(())
}
