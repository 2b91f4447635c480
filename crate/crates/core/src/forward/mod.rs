//! Discretized Lippmann–Schwinger forward problem.
//!
//! With `T = I - k^2 G diag(q)`, the total field for incident direction
//! `theta` solves `T u = u_inc`, the far field is `C (q . u)` and the Fréchet
//! derivative in direction `m` is `C (q . v + m . u)` with
//! `T v = k^2 G (m . u)`. Columnwise this gives
//!
//! ```text
//! F'[q] = (C + C diag(q) T^-1 k^2 G) diag(u)
//! ```
//!
//! where the bracket does not depend on `theta`. [`Linearization`] factors
//! `T` once per linearization point and caches that bracket, so all
//! directions and all Fréchet columns share one LU decomposition.

mod fft;
mod green;

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{Dyn, LU};

pub use fft::{gmres, solve_total_field_iterative, ToeplitzGreen};
pub use green::{fundamental_solution, fundamental_solution_small, self_cell_integral, GreenMatrix};

use crate::grid::{FarFieldData, Grid, MediumField, ObservationSet};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Relative residual every dense solve must meet.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Pivot-ratio threshold above which `T` is treated as numerically singular.
const PIVOT_RATIO_LIMIT: f64 = 1e13;

/// Weights of the discrete inner products on the state space (`h^2`) and
/// the data space (`2 pi / J`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceWeights {
    pub state: f64,
    pub data: f64,
}

impl SpaceWeights {
    pub fn new(state: f64, data: f64) -> Self {
        SpaceWeights { state, data }
    }

    /// Plain Euclidean inner products on both sides.
    pub fn unit() -> Self {
        SpaceWeights {
            state: 1.0,
            data: 1.0,
        }
    }

    pub fn for_grid(grid: &Grid, observations: usize) -> Self {
        SpaceWeights {
            state: grid.cell_area(),
            data: 2.0 * PI / observations as f64,
        }
    }

    /// `w_Y / w_X`, the factor between the weighted adjoint and `conj(A)^T`.
    pub fn ratio(&self) -> f64 {
        self.data / self.state
    }
}

/// Measurement weight `R = r I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementWeight(f64);

impl MeasurementWeight {
    pub fn new(r: f64) -> Result<Self> {
        if r > 0.0 && r.is_finite() {
            Ok(MeasurementWeight(r))
        } else {
            Err(Error::Domain {
                what: "measurement weight r",
                value: r,
            })
        }
    }

    pub fn identity() -> Self {
        MeasurementWeight(1.0)
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl Default for MeasurementWeight {
    fn default() -> Self {
        MeasurementWeight::identity()
    }
}

/// Plane wave `exp(i k y . theta)` at the cell centers.
pub fn incident_field(grid: &Grid, k: f64, direction: [f64; 2]) -> CVector {
    CVector::from_iterator(
        grid.num_cells(),
        grid.centers()
            .into_iter()
            .map(|[x, y]| C64::from_polar(1.0, k * (x * direction[0] + y * direction[1]))),
    )
}

/// Far-field quadrature rows,
/// `C[j][c] = k^2 e^{i pi/4} / sqrt(8 pi k) * h^2 * exp(-i k xhat_j . y_c)`.
#[derive(Debug, Clone)]
pub struct FarFieldOperator {
    grid: Grid,
    wavenumber: f64,
    observations: ObservationSet,
    entries: CMatrix,
}

impl FarFieldOperator {
    pub fn assemble(grid: Grid, wavenumber: f64, observations: ObservationSet) -> Result<Self> {
        green::check_wavenumber(wavenumber)?;
        let centers = grid.centers();
        let constant = C64::from_polar(
            wavenumber * wavenumber / (8.0 * PI * wavenumber).sqrt() * grid.cell_area(),
            0.25 * PI,
        );
        let entries = CMatrix::from_fn(observations.len(), grid.num_cells(), |j, c| {
            let [ox, oy] = observations.get(j);
            let [x, y] = centers[c];
            constant * C64::from_polar(1.0, -wavenumber * (ox * x + oy * y))
        });
        Ok(FarFieldOperator {
            grid,
            wavenumber,
            observations,
            entries,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.observations
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn weights(&self) -> SpaceWeights {
        SpaceWeights::for_grid(&self.grid, self.observations.len())
    }
}

/// Total field `u_q(., theta)` at the cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalField {
    pub(crate) grid: Grid,
    pub(crate) direction: [f64; 2],
    pub(crate) values: CVector,
}

impl TotalField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }

    pub fn values(&self) -> &CVector {
        &self.values
    }
}

/// Dense matrix of a linear observation operator `X -> Y`, together with the
/// inner-product weights needed for its adjoint. For scattering problems this
/// is the Fréchet derivative for one incident direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedOperator {
    matrix: CMatrix,
    weights: SpaceWeights,
    direction: Option<[f64; 2]>,
}

impl LinearizedOperator {
    pub fn new(matrix: CMatrix, weights: SpaceWeights) -> Self {
        LinearizedOperator {
            matrix,
            weights,
            direction: None,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn weights(&self) -> SpaceWeights {
        self.weights
    }

    /// Incident direction, when the operator is a Fréchet derivative.
    pub fn direction(&self) -> Option<[f64; 2]> {
        self.direction
    }

    /// `(rows, cols) = (J, D)`.
    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    /// `A^H = (w_Y / w_X) conj(A)^T`, the adjoint with respect to the
    /// unweighted-by-`R` inner products.
    pub fn adjoint(&self) -> CMatrix {
        self.matrix.adjoint() * C64::new(self.weights.ratio(), 0.0)
    }
}

/// `A* = (w_Y / w_X) conj(A)^T R^-1`, so that
/// `<A m, f>_{Y, R^-1} = <m, A* f>_X`.
pub fn weighted_adjoint(a: &LinearizedOperator, r: MeasurementWeight) -> Result<CMatrix> {
    MeasurementWeight::new(r.value())?;
    Ok(a.adjoint() / C64::new(r.value(), 0.0))
}

/// Everything needed to evaluate the far-field map and its derivative for
/// one wavenumber, grid and observation set.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    green: GreenMatrix,
    far: FarFieldOperator,
}

impl ForwardModel {
    pub fn new(grid: Grid, wavenumber: f64, observations: ObservationSet) -> Result<Self> {
        Ok(ForwardModel {
            green: GreenMatrix::assemble(grid, wavenumber)?,
            far: FarFieldOperator::assemble(grid, wavenumber, observations)?,
        })
    }

    pub fn from_parts(green: GreenMatrix, far: FarFieldOperator) -> Result<Self> {
        if green.grid() != far.grid() {
            return Err(Error::GridMismatch);
        }
        if green.wavenumber() != far.wavenumber() {
            return Err(Error::Domain {
                what: "wavenumber mismatch between Green and far-field operators",
                value: far.wavenumber(),
            });
        }
        Ok(ForwardModel { green, far })
    }

    pub fn grid(&self) -> &Grid {
        self.green.grid()
    }

    pub fn wavenumber(&self) -> f64 {
        self.green.wavenumber()
    }

    pub fn green(&self) -> &GreenMatrix {
        &self.green
    }

    pub fn far_field_operator(&self) -> &FarFieldOperator {
        &self.far
    }

    pub fn weights(&self) -> SpaceWeights {
        self.far.weights()
    }

    pub fn linearize(&self, q: &MediumField) -> Result<Linearization<'_>> {
        Linearization::new(&self.green, &self.far, q)
    }
}

/// Factorization of `T = I - k^2 G diag(q)` at a fixed contrast `q`.
#[derive(Debug)]
pub struct Linearization<'a> {
    green: &'a GreenMatrix,
    far: &'a FarFieldOperator,
    q: MediumField,
    lu: LU<C64, Dyn, Dyn>,
    sensitivity: OnceLock<CMatrix>,
}

impl<'a> Linearization<'a> {
    pub fn new(green: &'a GreenMatrix, far: &'a FarFieldOperator, q: &MediumField) -> Result<Self> {
        if q.grid() != green.grid() || far.grid() != green.grid() {
            return Err(Error::GridMismatch);
        }
        let k2 = green.wavenumber() * green.wavenumber();
        let d = q.len();
        let mut system = green.entries().clone();
        for (j, qj) in q.values().iter().enumerate() {
            let scale = -qj * k2;
            system.column_mut(j).iter_mut().for_each(|v| *v *= scale);
        }
        for i in 0..d {
            system[(i, i)] += C64::new(1.0, 0.0);
        }
        let lu = system.lu();
        let pivots = (0..d).map(|i| lu.u()[(i, i)].norm());
        let (lo, hi) = pivots.fold((f64::INFINITY, 0.0_f64), |(lo, hi), p| (lo.min(p), hi.max(p)));
        if !(lo > 0.0) || hi / lo > PIVOT_RATIO_LIMIT {
            return Err(Error::Singular(format!(
                "Lippmann-Schwinger matrix has pivot ratio {:e}",
                hi / lo
            )));
        }
        Ok(Linearization {
            green,
            far,
            q: q.clone(),
            lu,
            sensitivity: OnceLock::new(),
        })
    }

    pub fn point(&self) -> &MediumField {
        &self.q
    }

    fn solve(&self, rhs: &CVector) -> Result<CVector> {
        self.lu
            .solve(rhs)
            .ok_or_else(|| Error::Singular("Lippmann-Schwinger matrix".into()))
    }

    /// Applies `T = I - k^2 G diag(q)`.
    fn apply_system(&self, u: &CVector) -> CVector {
        let k2 = self.green.wavenumber() * self.green.wavenumber();
        u - self.green.entries() * u.component_mul(self.q.values()) * C64::new(k2, 0.0)
    }

    pub fn total_field(&self, direction: [f64; 2]) -> Result<TotalField> {
        let grid = *self.green.grid();
        let rhs = incident_field(&grid, self.green.wavenumber(), direction);
        let u = self.solve(&rhs)?;
        let residual = (self.apply_system(&u) - &rhs).norm();
        let tolerance = RESIDUAL_TOLERANCE * rhs.norm();
        if !(residual <= tolerance) {
            return Err(Error::Residual {
                residual,
                tolerance,
            });
        }
        Ok(TotalField {
            grid,
            direction,
            values: u,
        })
    }

    pub fn far_field(&self, direction: [f64; 2]) -> Result<FarFieldData> {
        let u = self.total_field(direction)?;
        Ok(self.far_field_of(&u))
    }

    fn far_field_of(&self, u: &TotalField) -> FarFieldData {
        FarFieldData::from_raw(self.far.entries() * u.values.component_mul(self.q.values()))
    }

    /// Fréchet derivative applied to one perturbation, by solving the
    /// linearized Lippmann–Schwinger equation directly.
    pub fn frechet_apply(&self, m: &MediumField, direction: [f64; 2]) -> Result<FarFieldData> {
        if m.grid() != self.q.grid() {
            return Err(Error::GridMismatch);
        }
        let u = self.total_field(direction)?;
        let k2 = self.green.wavenumber() * self.green.wavenumber();
        let source = u.values.component_mul(m.values());
        let v = self.solve(&(self.green.entries() * &source * C64::new(k2, 0.0)))?;
        let density = v.component_mul(self.q.values()) + source;
        Ok(FarFieldData::from_raw(self.far.entries() * density))
    }

    /// `C + C diag(q) T^-1 k^2 G`, independent of the incident direction.
    pub fn sensitivity(&self) -> Result<&CMatrix> {
        if let Some(s) = self.sensitivity.get() {
            return Ok(s);
        }
        let k2 = self.green.wavenumber() * self.green.wavenumber();
        let scaled = self.green.entries() * C64::new(k2, 0.0);
        let x = self
            .lu
            .solve(&scaled)
            .ok_or_else(|| Error::Singular("Lippmann-Schwinger matrix".into()))?;
        let mut cq = self.far.entries().clone();
        for (j, qj) in self.q.values().iter().enumerate() {
            cq.column_mut(j).iter_mut().for_each(|v| *v *= qj);
        }
        let s = self.far.entries() + cq * x;
        Ok(self.sensitivity.get_or_init(|| s))
    }

    /// Far field and Fréchet matrix for one direction, sharing the solve.
    pub fn observe(&self, direction: [f64; 2]) -> Result<(FarFieldData, LinearizedOperator)> {
        let u = self.total_field(direction)?;
        let far = self.far_field_of(&u);
        let mut a = self.sensitivity()?.clone();
        for (j, uj) in u.values.iter().enumerate() {
            a.column_mut(j).iter_mut().for_each(|v| *v *= uj);
        }
        Ok((
            far,
            LinearizedOperator {
                matrix: a,
                weights: self.far.weights(),
                direction: Some(direction),
            },
        ))
    }

    pub fn frechet_matrix(&self, direction: [f64; 2]) -> Result<LinearizedOperator> {
        Ok(self.observe(direction)?.1)
    }
}

/// Solves the discrete Lippmann–Schwinger equation with a dense LU.
pub fn solve_total_field(green: &GreenMatrix, q: &MediumField, direction: [f64; 2]) -> Result<TotalField> {
    let grid = *green.grid();
    // a far-field operator is not needed for the solve itself
    let far = FarFieldOperator {
        grid,
        wavenumber: green.wavenumber(),
        observations: ObservationSet::equispaced(1)?,
        entries: CMatrix::zeros(0, grid.num_cells()),
    };
    Linearization::new(green, &far, q)?.total_field(direction)
}

/// `C (q . u_q)` for one incident direction.
pub fn far_field(
    far: &FarFieldOperator,
    green: &GreenMatrix,
    q: &MediumField,
    direction: [f64; 2],
) -> Result<FarFieldData> {
    Linearization::new(green, far, q)?.far_field(direction)
}

/// `F'_theta[q] m`.
pub fn frechet_apply(
    far: &FarFieldOperator,
    green: &GreenMatrix,
    q: &MediumField,
    m: &MediumField,
    direction: [f64; 2],
) -> Result<FarFieldData> {
    Linearization::new(green, far, q)?.frechet_apply(m, direction)
}

/// Dense `J x D` matrix of `F'_theta[q]`.
pub fn assemble_frechet_matrix(
    far: &FarFieldOperator,
    green: &GreenMatrix,
    q: &MediumField,
    direction: [f64; 2],
) -> Result<LinearizedOperator> {
    Linearization::new(green, far, q)?.frechet_matrix(direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{phantom, PhantomKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, scale: f64, rng: &mut impl Rng) -> MediumField {
        MediumField::from_fn(grid, |_| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
        })
    }

    fn small_model() -> ForwardModel {
        let grid = Grid::new(1.0, 1).unwrap();
        ForwardModel::new(grid, 1.0, ObservationSet::equispaced(6).unwrap()).unwrap()
    }

    #[test]
    fn zero_contrast_gives_incident_field() {
        let model = small_model();
        let q = MediumField::zeros(*model.grid());
        let theta = [0.6, 0.8];
        let u = solve_total_field(model.green(), &q, theta).unwrap();
        assert_eq!(u.values(), &incident_field(model.grid(), 1.0, theta));
        let f = far_field(model.far_field_operator(), model.green(), &q, theta).unwrap();
        assert!(f.values().iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn residual_of_random_small_contrast() {
        let model = small_model();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_field(*model.grid(), 0.3, &mut rng);
        let theta = [1.0, 0.0];
        let u = solve_total_field(model.green(), &q, theta).unwrap();
        let uinc = incident_field(model.grid(), 1.0, theta);
        let r = u.values() - &uinc - model.green().entries() * u.values().component_mul(q.values());
        assert!(r.norm() <= 1e-10 * uinc.norm());
    }

    #[test]
    fn far_field_constant_modulus() {
        let model = small_model();
        let c = model.far_field_operator();
        let expected = 1.0 / (8.0 * PI).sqrt();
        for v in c.entries().iter() {
            assert!((v.norm() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn frechet_zero_direction_and_linearity() {
        let model = small_model();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_field(*model.grid(), 0.5, &mut rng);
        let lin = model.linearize(&q).unwrap();
        let theta = [0.0, 1.0];
        let zero = lin.frechet_apply(&MediumField::zeros(*model.grid()), theta).unwrap();
        assert!(zero.values().iter().all(|v| v.norm() == 0.0));

        let m1 = random_field(*model.grid(), 1.0, &mut rng);
        let m2 = random_field(*model.grid(), 1.0, &mut rng);
        let (a, b) = (C64::new(0.3, -1.2), C64::new(-0.7, 0.4));
        let combo = MediumField::new(*model.grid(), m1.values() * a + m2.values() * b).unwrap();
        let lhs = lin.frechet_apply(&combo, theta).unwrap().into_values();
        let rhs = lin.frechet_apply(&m1, theta).unwrap().into_values() * a
            + lin.frechet_apply(&m2, theta).unwrap().into_values() * b;
        assert!((&lhs - &rhs).norm() <= 1e-12 * rhs.norm());
    }

    #[test]
    fn frechet_matrix_matches_per_vector_path() {
        let grid = Grid::new(3.0, 3).unwrap();
        let model = ForwardModel::new(grid, 2.0, ObservationSet::equispaced(10).unwrap()).unwrap();
        let q = phantom(grid, PhantomKind::Disk);
        let lin = model.linearize(&q).unwrap();
        let theta = [0.8, -0.6];
        let a = lin.frechet_matrix(theta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_field(grid, 1.0, &mut rng);
        let direct = lin.frechet_apply(&m, theta).unwrap().into_values();
        let via_matrix = a.matrix() * m.values();
        assert!((&direct - &via_matrix).norm() <= 1e-12 * direct.norm());
        for c in [0, 7, 20, 35] {
            let mut e = CVector::zeros(grid.num_cells());
            e[c] = C64::new(1.0, 0.0);
            let col = lin.frechet_apply(&MediumField::new(grid, e).unwrap(), theta).unwrap();
            let diff = (a.matrix().column(c) - col.values()).norm();
            assert!(diff <= 1e-12 * col.values().norm(), "column {c}: {diff}");
        }
    }

    #[test]
    fn frechet_matrix_at_zero_is_born_kernel() {
        let model = small_model();
        let q = MediumField::zeros(*model.grid());
        let theta = [0.6, -0.8];
        let a = assemble_frechet_matrix(model.far_field_operator(), model.green(), &q, theta).unwrap();
        let uinc = incident_field(model.grid(), 1.0, theta);
        let mut born = model.far_field_operator().entries().clone();
        for (j, u) in uinc.iter().enumerate() {
            born.column_mut(j).iter_mut().for_each(|v| *v *= u);
        }
        assert_eq!(a.matrix(), &born);
    }

    #[test]
    fn weighted_adjoint_identity() {
        let grid = Grid::new(3.0, 2).unwrap();
        let model = ForwardModel::new(grid, 1.5, ObservationSet::equispaced(7).unwrap()).unwrap();
        let q = phantom(grid, PhantomKind::Disk);
        let a = model.linearize(&q).unwrap().frechet_matrix([1.0, 0.0]).unwrap();
        let r = MeasurementWeight::new(2.5).unwrap();
        let adj = weighted_adjoint(&a, r).unwrap();
        let w = a.weights();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let m = random_field(grid, 1.0, &mut rng).into_values();
            let f = CVector::from_fn(7, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let lhs = (a.matrix() * &m).dotc(&f) * (w.data / r.value());
            let rhs = m.dotc(&(&adj * &f)) * w.state;
            let scale = (a.matrix() * &m).norm() * f.norm() * w.data;
            assert!((lhs - rhs).norm() <= 1e-12 * scale);
        }
        // doubling r halves the adjoint
        let adj2 = weighted_adjoint(&a, MeasurementWeight::new(5.0).unwrap()).unwrap();
        assert!((&adj2 * C64::new(2.0, 0.0) - &adj).norm() <= 1e-14 * adj.norm());
        assert!(MeasurementWeight::new(0.0).is_err());
        assert!(MeasurementWeight::new(-1.0).is_err());
    }

    #[test]
    fn adjoint_is_conjugate_transpose_when_weights_cancel() {
        let a = CMatrix::from_fn(3, 4, |i, j| C64::new(i as f64 + 0.5, j as f64 - 1.0));
        let op = LinearizedOperator::new(a.clone(), SpaceWeights::new(0.25, 0.25));
        assert_eq!(weighted_adjoint(&op, MeasurementWeight::identity()).unwrap(), a.adjoint());
    }

    #[test]
    fn near_singular_system_is_rejected() {
        // pick a contrast that makes I - k^2 G diag(q) exactly singular on a
        // one-cell grid: q = 1 / (k^2 G_00)
        let grid = Grid::new(0.5, 1).unwrap();
        let model = ForwardModel::new(grid, 1.0, ObservationSet::equispaced(4).unwrap()).unwrap();
        let g = model.green().entries().clone();
        // uniform q makes T = I - q G; choose q so one eigenvalue of G hits 1/q
        let eig = g.clone().eigenvalues().unwrap();
        let q0 = C64::new(1.0, 0.0) / eig[0];
        let q = MediumField::from_fn(grid, |_| q0);
        assert!(matches!(model.linearize(&q), Err(Error::Singular(_))));
    }

    #[test]
    fn fft_matvec_matches_dense() {
        let grid = Grid::new(3.0, 3).unwrap();
        let dense = GreenMatrix::assemble(grid, 4.0).unwrap();
        let fast = ToeplitzGreen::new(grid, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_field(grid, 1.0, &mut rng).into_values();
        let a = dense.entries() * &x;
        let b = fast.apply(&x);
        assert!((&a - &b).norm() <= 1e-13 * a.norm());
    }
}
