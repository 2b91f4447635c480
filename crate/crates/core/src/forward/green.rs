use std::f64::consts::{FRAC_1_PI, PI};

use crate::grid::Grid;
use crate::specfun::{hankel1_0_unchecked, EULER_GAMMA};
use crate::{CMatrix, Error, Result, C64};

/// Fundamental solution `Phi(r) = (i/4) H_0^(1)(k r)` for `r > 0`.
pub fn fundamental_solution(k: f64, r: f64) -> C64 {
    C64::new(0.0, 0.25) * hankel1_0_unchecked(k * r)
}

/// Discretized volume potential `G[i][j] ~ integral over cell j of Phi(y_i, y)`.
///
/// Off-diagonal entries use the midpoint rule, `h^2 Phi(|y_i - y_j|)`.
/// Diagonal entries integrate the weakly singular kernel over the square
/// self-cell, see [`self_cell_integral`].
#[derive(Debug, Clone)]
pub struct GreenMatrix {
    grid: Grid,
    wavenumber: f64,
    entries: CMatrix,
}

impl GreenMatrix {
    pub fn assemble(grid: Grid, wavenumber: f64) -> Result<Self> {
        check_wavenumber(wavenumber)?;
        let d = grid.num_cells();
        let h2 = grid.cell_area();
        let diag = self_cell_integral(grid.cell_width(), wavenumber);
        // the kernel depends only on the integer cell offset, so tabulate it
        let side = grid.side() as i64;
        let span = (2 * side - 1) as usize;
        let mut table = vec![C64::new(0.0, 0.0); span * span];
        let h = grid.cell_width();
        for di in 0..span {
            for dj in 0..span {
                let (ox, oy) = (di as i64 - (side - 1), dj as i64 - (side - 1));
                table[di * span + dj] = if ox == 0 && oy == 0 {
                    diag
                } else {
                    let r = h * ((ox * ox + oy * oy) as f64).sqrt();
                    fundamental_solution(wavenumber, r) * h2
                };
            }
        }
        let offsets: Vec<(i64, i64)> = (0..d).map(|c| grid.cell(c)).collect();
        let entries = CMatrix::from_fn(d, d, |i, j| {
            let (ox, oy) = (offsets[i].0 - offsets[j].0, offsets[i].1 - offsets[j].1);
            table[(ox + side - 1) as usize * span + (oy + side - 1) as usize]
        });
        Ok(GreenMatrix {
            grid,
            wavenumber,
            entries,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }
}

pub(crate) fn check_wavenumber(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "wavenumber",
            value: k,
        })
    }
}

/// `integral over [-h/2, h/2]^2 of Phi(|y|) dy`.
///
/// The logarithmic part `-(1/2pi) ln r` is integrated in closed form over the
/// square; the bounded remainder `Phi(r) + (1/2pi) ln r` is integrated in
/// polar coordinates over the eight symmetric triangles with Gauss–Legendre
/// rules in both variables.
pub fn self_cell_integral(h: f64, k: f64) -> C64 {
    let a = 0.5 * h;
    // integral of ln r over [-a, a]^2
    let log_integral = a * a * (4.0 * a.ln() + 2.0 * 2f64.ln() - 6.0 + PI);
    let singular = -0.5 * FRAC_1_PI * log_integral;

    let remainder = |r: f64| fundamental_solution(k, r) + 0.5 * FRAC_1_PI * r.ln();
    let (nodes, weights) = gauss_legendre(24);
    let quarter = 0.25 * PI;
    let mut triangle = C64::new(0.0, 0.0);
    for (&tp, &wp) in nodes.iter().zip(&weights) {
        let phi = 0.5 * quarter * (tp + 1.0);
        let rmax = a / phi.cos();
        let mut radial = C64::new(0.0, 0.0);
        for (&tr, &wr) in nodes.iter().zip(&weights) {
            let r = 0.5 * rmax * (tr + 1.0);
            radial += remainder(r) * (r * wr);
        }
        triangle += radial * (0.5 * rmax * wp);
    }
    triangle *= 0.5 * quarter;
    C64::new(singular, 0.0) + triangle * 8.0
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Leading-order small-argument form of `Phi`, `i/4 - (1/2pi)(ln(kr/2) + gamma)`.
pub fn fundamental_solution_small(k: f64, r: f64) -> C64 {
    C64::new(-0.5 * FRAC_1_PI * ((0.5 * k * r).ln() + EULER_GAMMA), 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(24);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(46)).sum();
        assert!((m - 2.0 / 47.0).abs() < 1e-14);
    }

    #[test]
    fn small_argument_form_matches_kernel_near_zero() {
        let k = 3.0;
        let r = 1e-5;
        let exact = fundamental_solution(k, r);
        let approx = fundamental_solution_small(k, r);
        assert!((exact - approx).norm() < 1e-8);
    }

    #[test]
    fn green_matrix_symmetric_and_midpoint() {
        let g = Grid::new(1.0, 1).unwrap();
        let gm = GreenMatrix::assemble(g, 1.0).unwrap();
        let e = gm.entries();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(e[(i, j)], e[(j, i)]);
            }
        }
        // cells 0 and 1 are one unit apart, h^2 = 1
        let expected = C64::new(0.0, 0.25) * crate::specfun::hankel1_0(1.0).unwrap();
        assert!((e[(0, 1)] - expected).norm() < 1e-15);
    }

    #[test]
    fn rejects_bad_wavenumber() {
        let g = Grid::new(1.0, 1).unwrap();
        assert!(matches!(
            GreenMatrix::assemble(g, 0.0),
            Err(Error::Domain { .. })
        ));
        assert!(GreenMatrix::assemble(g, -2.0).is_err());
    }

    #[test]
    fn entries_decay_along_a_row() {
        let g = Grid::new(3.0, 6).unwrap();
        let gm = GreenMatrix::assemble(g, 1.0).unwrap();
        let row = g.index(-6, 0).unwrap();
        // |H_0^(1)| decreases monotonically, starting at distance 2h
        let mut prev = f64::INFINITY;
        for m1 in -4..6 {
            let col = g.index(m1, 0).unwrap();
            let v = gm.entries()[(row, col)].norm();
            assert!(v < prev, "m1 = {m1}");
            prev = v;
        }
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> C64, a: f64, b: f64, tol: f64, depth: u32) -> C64 {
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
        simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
    }

    #[allow(clippy::too_many_arguments)]
    fn simpson_step(f: &dyn Fn(f64) -> C64, a: f64, b: f64, fa: C64, fm: C64, fb: C64, whole: C64, tol: f64, depth: u32) -> C64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
        let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
        if depth == 0 || (left + right - whole).norm() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    /// Integral of Phi over the square cell: adaptive polar quadrature outside
    /// a disk of radius `eps`, plus the small-argument form integrated over
    /// the disk analytically.
    fn self_cell_oracle(h: f64, k: f64) -> C64 {
        let a = 0.5 * h;
        let eps = 1e-6 * a;
        let angular = |phi: f64| {
            let rmax = a / phi.cos();
            let radial = |r: f64| fundamental_solution(k, r) * r;
            adaptive_simpson(&radial, eps, rmax, 1e-13, 40)
        };
        let octant = adaptive_simpson(&angular, 0.0, 0.25 * PI, 1e-12, 30);
        // int_0^eps 2 pi r [i/4 - (ln(k r / 2) + gamma) / (2 pi)] dr
        let disk = C64::new(
            -(0.5 * eps * eps * ((0.5 * k * eps).ln() + EULER_GAMMA) - 0.25 * eps * eps),
            0.25 * PI * eps * eps,
        );
        octant * 8.0 + disk
    }

    #[test]
    fn diagonal_matches_adaptive_quadrature() {
        for &(h, k) in &[(1.0, 1.0), (0.5, 7.0), (0.25, 3.0)] {
            let fast = self_cell_integral(h, k);
            let oracle = self_cell_oracle(h, k);
            let rel = (fast - oracle).norm() / oracle.norm();
            assert!(rel <= 1e-3, "h = {h}, k = {k}: {fast} vs {oracle}");
        }
        let g = Grid::new(1.0, 1).unwrap();
        let gm = GreenMatrix::assemble(g, 1.0).unwrap();
        let oracle = self_cell_oracle(1.0, 1.0);
        assert!((gm.entries()[(2, 2)] - oracle).norm() <= 1e-3 * oracle.norm());
    }
}
