//! Scatters plane waves off the unit disk at the default resolution, prints the
//! far-field pattern for one direction and cross-checks the dense solver
//! against the FFT-accelerated GMRES path and against reciprocity.

use scatter_kalman::forward::{solve_total_field_iterative, ForwardModel, ToeplitzGreen};
use scatter_kalman::grid::{phantom, AngleSet, Grid, PhantomKind};

fn main() -> scatter_kalman::Result<()> {
    let k = 7.0;
    let grid = Grid::new(3.0, 6)?;
    let angles = AngleSet::equispaced(60)?;
    let model = ForwardModel::new(grid, k, angles.clone())?;
    let q = phantom(grid, PhantomKind::Disk);
    let lin = model.linearize(&q)?;

    let theta = angles.get(59); // direction (1, 0)
    let far = lin.far_field(theta)?;
    println!("far field for incident direction ({:.3}, {:.3}):", theta[0], theta[1]);
    for (j, v) in far.values().iter().enumerate().step_by(6) {
        println!("  obs {:>2}  |u_inf| = {:.6}  arg = {:+.4}", j + 1, v.norm(), v.arg());
    }

    let dense = lin.total_field(theta)?;
    let fast = solve_total_field_iterative(&ToeplitzGreen::new(grid, k)?, &q, theta, 1e-13)?;
    let gap = (dense.values() - fast.values()).norm() / dense.values().norm();
    println!("dense vs FFT/GMRES total field: {gap:.2e}");

    // u_inf(xhat_j, theta_n) = u_inf(-theta_n, -xhat_j); with shared angles,
    // -angle_i is angle_{i + 30}
    let n_dirs = angles.len();
    let table: Vec<_> = (0..n_dirs).map(|n| lin.far_field(angles.get(n))).collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for n in 0..n_dirs {
        for j in 0..n_dirs {
            let a = table[n].values()[j];
            let b = table[(j + n_dirs / 2) % n_dirs].values()[(n + n_dirs / 2) % n_dirs];
            worst = worst.max((a - b).norm() / a.norm().max(b.norm()));
        }
    }
    println!("worst reciprocity deviation: {worst:.2e}");
    Ok(())
}
