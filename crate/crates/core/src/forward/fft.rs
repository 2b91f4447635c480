//! Matrix-free alternative to the dense solver.
//!
//! The Green matrix is block Toeplitz with Toeplitz blocks (entries depend only
//! on the integer offset between cells), so `G x` is a 2-D discrete
//! convolution. It is evaluated by embedding the kernel in a circulant of
//! twice the grid side and using FFTs; the Lippmann–Schwinger system is then
//! solved with GMRES.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::green::{check_wavenumber, fundamental_solution, self_cell_integral};
use super::{incident_field, TotalField};
use crate::grid::{Grid, MediumField};
use crate::{CVector, Error, Result, C64};

pub struct ToeplitzGreen {
    grid: Grid,
    wavenumber: f64,
    ext: usize,
    kernel_hat: Vec<C64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ToeplitzGreen {
    pub fn new(grid: Grid, wavenumber: f64) -> Result<Self> {
        check_wavenumber(wavenumber)?;
        let side = grid.side();
        let ext = 2 * side;
        let h = grid.cell_width();
        let h2 = grid.cell_area();
        let diag = self_cell_integral(h, wavenumber);
        let mut kernel = vec![C64::new(0.0, 0.0); ext * ext];
        let reach = side as i64 - 1;
        for oy in -reach..=reach {
            for ox in -reach..=reach {
                let value = if ox == 0 && oy == 0 {
                    diag
                } else {
                    let r = h * ((ox * ox + oy * oy) as f64).sqrt();
                    fundamental_solution(wavenumber, r) * h2
                };
                let row = oy.rem_euclid(ext as i64) as usize;
                let col = ox.rem_euclid(ext as i64) as usize;
                kernel[row * ext + col] = value;
            }
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(ext);
        let inverse = planner.plan_fft_inverse(ext);
        fft2(&mut kernel, ext, forward.as_ref());
        Ok(ToeplitzGreen {
            grid,
            wavenumber,
            ext,
            kernel_hat: kernel,
            forward,
            inverse,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// `G x` in `O(D log D)`.
    pub fn apply(&self, x: &CVector) -> CVector {
        let side = self.grid.side();
        let ext = self.ext;
        let mut buf = vec![C64::new(0.0, 0.0); ext * ext];
        for row in 0..side {
            buf[row * ext..row * ext + side].copy_from_slice(&x.as_slice()[row * side..(row + 1) * side]);
        }
        fft2(&mut buf, ext, self.forward.as_ref());
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        fft2(&mut buf, ext, self.inverse.as_ref());
        let scale = 1.0 / (ext * ext) as f64;
        CVector::from_iterator(
            side * side,
            (0..side).flat_map(|row| buf[row * ext..row * ext + side].iter().map(move |v| v * scale).collect::<Vec<_>>()),
        )
    }
}

fn fft2(data: &mut [C64], n: usize, plan: &dyn Fft<f64>) {
    for row in data.chunks_exact_mut(n) {
        plan.process(row);
    }
    transpose(data, n);
    for row in data.chunks_exact_mut(n) {
        plan.process(row);
    }
    transpose(data, n);
}

fn transpose(data: &mut [C64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Solves `(I - k^2 G diag(q)) u = u_inc` with restarted GMRES.
pub fn solve_total_field_iterative(
    green: &ToeplitzGreen,
    q: &MediumField,
    direction: [f64; 2],
    tolerance: f64,
) -> Result<TotalField> {
    if q.grid() != green.grid() {
        return Err(Error::GridMismatch);
    }
    let k2 = green.wavenumber() * green.wavenumber();
    let qv = q.values();
    let rhs = incident_field(green.grid(), green.wavenumber(), direction);
    let op = |x: &CVector| -> CVector { x - green.apply(&x.component_mul(qv)) * C64::new(k2, 0.0) };
    let d = rhs.len();
    let u = gmres(op, &rhs, tolerance, d.min(200), 20 * d)?;
    Ok(TotalField {
        grid: *green.grid(),
        direction,
        values: u,
    })
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations, started
/// from zero. Stops when `||b - A x|| <= tolerance * ||b||`.
pub fn gmres(
    op: impl Fn(&CVector) -> CVector,
    b: &CVector,
    tolerance: f64,
    restart: usize,
    max_iterations: usize,
) -> Result<CVector> {
    let n = b.len();
    let b_norm = b.norm();
    let mut x = CVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let target = tolerance * b_norm;
    let mut iterations = 0;
    let mut residual = b.clone();
    let mut res_norm = b_norm;
    while iterations < max_iterations {
        let m = restart.min(max_iterations - iterations).max(1);
        let mut basis: Vec<CVector> = Vec::with_capacity(m + 1);
        basis.push(&residual / C64::new(res_norm, 0.0));
        let mut hess = vec![vec![C64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![C64::new(0.0, 0.0); m];
        let mut sn = vec![C64::new(0.0, 0.0); m];
        let mut g = vec![C64::new(0.0, 0.0); m + 1];
        g[0] = C64::new(res_norm, 0.0);
        let mut used = 0;
        for j in 0..m {
            let mut w = op(&basis[j]);
            for (i, v) in basis.iter().enumerate() {
                let hij = v.dotc(&w);
                hess[i][j] = hij;
                w -= v * hij;
            }
            let wn = w.norm();
            hess[j + 1][j] = C64::new(wn, 0.0);
            for i in 0..j {
                let (a, bb) = (hess[i][j], hess[i + 1][j]);
                hess[i][j] = cs[i].conj() * a + sn[i].conj() * bb;
                hess[i + 1][j] = -sn[i] * a + cs[i] * bb;
            }
            let (a, bb) = (hess[j][j], hess[j + 1][j]);
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == 0.0 {
                used = j;
                break;
            }
            cs[j] = a / denom;
            sn[j] = bb / denom;
            hess[j][j] = C64::new(denom, 0.0);
            hess[j + 1][j] = C64::new(0.0, 0.0);
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j].conj() * g[j];
            used = j + 1;
            iterations += 1;
            if g[j + 1].norm() <= 0.1 * target || wn == 0.0 {
                break;
            }
            basis.push(w / C64::new(wn, 0.0));
        }
        // back substitution on the leading `used` block
        let mut y = vec![C64::new(0.0, 0.0); used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for l in i + 1..used {
                s -= hess[i][l] * y[l];
            }
            y[i] = s / hess[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            x += v * *yi;
        }
        residual = b - op(&x);
        res_norm = residual.norm();
        if res_norm <= target {
            return Ok(x);
        }
        if used == 0 {
            break;
        }
    }
    Err(Error::NotConverged {
        iterations,
        residual: res_norm / b_norm,
    })
}
