//! Regularized reconstructions.
//!
//! All algorithms act on the raw coefficient vector of the contrast so the
//! linear pieces ([`kalman_update`], [`full_tikhonov`]) can be exercised on
//! arbitrary operators, not just Fréchet derivatives.
//!
//! The weighted adjoint convention of [`crate::forward::weighted_adjoint`] is
//! used throughout: `A^H = (w_Y / w_X) conj(A)^T`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, SymmetricEigen};
use rayon::prelude::*;

use crate::forward::{ForwardModel, LinearizedOperator, MeasurementWeight};
use crate::grid::{DirectionSet, FarFieldData, MediumField};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Search interval for the discrepancy principle.
pub const MOROZOV_BRACKET: (f64, f64) = (1e-8, 1e12);

/// Estimate, weight operator `B` and the position `(i, n)` in the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    estimate: CVector,
    weight: CMatrix,
    outer: usize,
    inner: usize,
}

impl FilterState {
    pub fn new(estimate: CVector, weight: CMatrix) -> Result<Self> {
        let d = estimate.len();
        if weight.shape() != (d, d) {
            return Err(Error::Dimension {
                what: "weight operator",
                expected: d,
                found: weight.nrows(),
            });
        }
        if estimate.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "estimate" });
        }
        Ok(FilterState {
            estimate,
            weight,
            outer: 0,
            inner: 0,
        })
    }

    /// `B = (1/alpha) I`.
    pub fn with_alpha(estimate: CVector, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let d = estimate.len();
        FilterState::new(estimate, CMatrix::identity(d, d) * C64::new(1.0 / alpha, 0.0))
    }

    pub fn estimate(&self) -> &CVector {
        &self.estimate
    }

    pub fn into_estimate(self) -> CVector {
        self.estimate
    }

    pub fn weight(&self) -> &CMatrix {
        &self.weight
    }

    pub fn outer(&self) -> usize {
        self.outer
    }

    pub fn inner(&self) -> usize {
        self.inner
    }

    pub fn at(mut self, outer: usize, inner: usize) -> Self {
        self.outer = outer;
        self.inner = inner;
        self
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "regularization parameter alpha",
            value: alpha,
        })
    }
}

/// How the regularization parameter of each outer iteration is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularizationSchedule {
    Constant(f64),
    /// Discrepancy principle with target fraction `rho` of the current residual.
    Morozov(f64),
}

impl RegularizationSchedule {
    pub fn constant(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(RegularizationSchedule::Constant(alpha))
    }

    pub fn morozov(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho < 1.0 {
            Ok(RegularizationSchedule::Morozov(rho))
        } else {
            Err(Error::Domain {
                what: "discrepancy fraction rho",
                value: rho,
            })
        }
    }
}

/// Starting weight of each Kalman sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightPolicy {
    /// `B_{i,0} = (1/alpha_i) I`.
    Initialize,
    /// `B_{i,0} = B_{i-1,N}`; the first sweep still starts from `(1/alpha_0) I`.
    CarryOver,
}

impl fmt::Display for WeightPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightPolicy::Initialize => "initialize",
            WeightPolicy::CarryOver => "carry_over",
        })
    }
}

impl FromStr for WeightPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initialize" => Ok(WeightPolicy::Initialize),
            "carry_over" => Ok(WeightPolicy::CarryOver),
            other => Err(Error::config("weight_policy", format!("unknown policy `{other}`"))),
        }
    }
}

/// Far-field data for every incident direction.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub directions: DirectionSet,
    pub data: Vec<FarFieldData>,
    pub sigma: f64,
    pub seed: u64,
}

impl MeasurementSet {
    pub fn new(directions: DirectionSet, data: Vec<FarFieldData>, sigma: f64, seed: u64) -> Result<Self> {
        if data.len() != directions.len() {
            return Err(Error::Dimension {
                what: "measurement set",
                expected: directions.len(),
                found: data.len(),
            });
        }
        if let Some(first) = data.first() {
            if let Some(bad) = data.iter().find(|d| d.len() != first.len()) {
                return Err(Error::Dimension {
                    what: "far-field vector",
                    expected: first.len(),
                    found: bad.len(),
                });
            }
        }
        Ok(MeasurementSet {
            directions,
            data,
            sigma,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn check_against(&self, model: &ForwardModel) -> Result<()> {
        let j = model.far_field_operator().observations().len();
        match self.data.iter().find(|d| d.len() != j) {
            Some(bad) => Err(Error::Dimension {
                what: "far-field vector",
                expected: j,
                found: bad.len(),
            }),
            None => Ok(()),
        }
    }
}

/// Solves `S X = Y` for a matrix that is Hermitian positive definite in exact
/// arithmetic, falling back to LU when Cholesky breaks down.
fn solve_hermitian(s: CMatrix, rhs: &CMatrix, what: &str) -> Result<CMatrix> {
    if let Some(chol) = Cholesky::new(s.clone()) {
        return Ok(chol.solve(rhs));
    }
    s.lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular(what.to_string()))
}

fn hermitize(b: &mut CMatrix) {
    let d = b.nrows();
    for i in 0..d {
        b[(i, i)].im = 0.0;
        for j in i + 1..d {
            let avg = (b[(i, j)] + b[(j, i)].conj()) * 0.5;
            b[(i, j)] = avg;
            b[(j, i)] = avg.conj();
        }
    }
}

/// One Kalman step:
///
/// ```text
/// K  = B A^H (R + A B A^H)^-1
/// x' = x + K (f - A x)
/// B' = (I - K A) B,  then (B' + B'^H) / 2
/// ```
pub fn kalman_update(
    state: &FilterState,
    a: &LinearizedOperator,
    f: &CVector,
    r: MeasurementWeight,
) -> Result<FilterState> {
    let (j, d) = a.shape();
    if d != state.estimate.len() {
        return Err(Error::Dimension {
            what: "operator columns",
            expected: state.estimate.len(),
            found: d,
        });
    }
    if f.len() != j {
        return Err(Error::Dimension {
            what: "measurement",
            expected: j,
            found: f.len(),
        });
    }
    let m = a.matrix();
    let bah = &state.weight * a.adjoint();
    let mut innovation_cov = m * &bah;
    for i in 0..j {
        innovation_cov[(i, i)] += C64::new(r.value(), 0.0);
    }
    // K = bah S^-1  <=>  S^T K^T = bah^T, and S^T is Hermitian too
    let gain = solve_hermitian(innovation_cov.transpose(), &bah.transpose(), "innovation matrix")?.transpose();
    let innovation = f - m * &state.estimate;
    let estimate = &state.estimate + &gain * innovation;
    if estimate.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "estimate" });
    }
    let mut weight = &state.weight - &gain * (m * &state.weight);
    hermitize(&mut weight);
    Ok(FilterState {
        estimate,
        weight,
        outer: state.outer,
        inner: state.inner + 1,
    })
}

/// Applies [`kalman_update`] for every `(A_n, f_n)` in turn.
pub fn kalman_sweep(
    state: &FilterState,
    operators: &[LinearizedOperator],
    data: &[CVector],
    r: MeasurementWeight,
) -> Result<FilterState> {
    if operators.len() != data.len() {
        return Err(Error::Dimension {
            what: "data list",
            expected: operators.len(),
            found: data.len(),
        });
    }
    let mut current = state.clone();
    for (n, (a, f)) in operators.iter().zip(data).enumerate() {
        current = kalman_update(&current, a, f, r).map_err(|e| e.at_step(state.outer, n + 1))?;
    }
    Ok(current)
}

/// Normal matrix `(1/r) sum_n A_n^H A_n` and right-hand side
/// `(1/r) sum_n A_n^H g_n`.
fn normal_equations(operators: &[LinearizedOperator], residuals: &[CVector], r: MeasurementWeight) -> (CMatrix, CVector) {
    let d = operators.first().map_or(0, |a| a.shape().1);
    let mut normal = CMatrix::zeros(d, d);
    let mut rhs = CVector::zeros(d);
    for (a, g) in operators.iter().zip(residuals) {
        let ah = a.adjoint();
        normal += &ah * a.matrix();
        rhs += &ah * g;
    }
    let scale = C64::new(1.0 / r.value(), 0.0);
    (normal * scale, rhs * scale)
}

fn check_lists(prior: &CVector, operators: &[LinearizedOperator], data: &[CVector]) -> Result<()> {
    if operators.len() != data.len() {
        return Err(Error::Dimension {
            what: "data list",
            expected: operators.len(),
            found: data.len(),
        });
    }
    for (a, f) in operators.iter().zip(data) {
        let (j, d) = a.shape();
        if d != prior.len() {
            return Err(Error::Dimension {
                what: "operator columns",
                expected: prior.len(),
                found: d,
            });
        }
        if f.len() != j {
            return Err(Error::Dimension {
                what: "measurement",
                expected: j,
                found: f.len(),
            });
        }
    }
    Ok(())
}

/// Minimizer of `alpha ||x - p||_X^2 + sum_n ||A_n x - f_n||_{Y,R^-1}^2`:
///
/// ```text
/// x = p + (alpha I + sum A_n^H R^-1 A_n)^-1 sum A_n^H R^-1 (f_n - A_n p)
/// ```
pub fn full_tikhonov(
    prior: &CVector,
    operators: &[LinearizedOperator],
    data: &[CVector],
    alpha: f64,
    r: MeasurementWeight,
) -> Result<CVector> {
    check_alpha(alpha)?;
    check_lists(prior, operators, data)?;
    let residuals: Vec<CVector> = operators.iter().zip(data).map(|(a, f)| f - a.matrix() * prior).collect();
    let (mut normal, rhs) = normal_equations(operators, &residuals, r);
    for i in 0..prior.len() {
        normal[(i, i)] += C64::new(alpha, 0.0);
    }
    hermitize(&mut normal);
    let chol = Cholesky::new(normal)
        .ok_or_else(|| Error::Internal("regularized normal matrix is not positive definite".into()))?;
    Ok(prior + chol.solve(&rhs))
}

/// Far fields and Fréchet matrices for every direction at one point.
fn observe_all(
    model: &ForwardModel,
    q: &MediumField,
    directions: &DirectionSet,
) -> Result<(Vec<FarFieldData>, Vec<LinearizedOperator>)> {
    let lin = model.linearize(q)?;
    lin.sensitivity()?;
    let results: Vec<Result<(FarFieldData, LinearizedOperator)>> = (0..directions.len())
        .into_par_iter()
        .map(|n| lin.observe(directions.get(n)).map_err(|e| e.at_direction(n + 1)))
        .collect();
    results.into_iter().collect::<Result<Vec<_>>>().map(|v| v.into_iter().unzip())
}

/// Linearized problem at `q`: operators `A_n` and data
/// `f_n = u_n - F_n(q) + A_n q`.
pub fn linearize_problem(
    model: &ForwardModel,
    q: &MediumField,
    measurements: &MeasurementSet,
) -> Result<(Vec<LinearizedOperator>, Vec<CVector>)> {
    measurements.check_against(model)?;
    let (far, ops) = observe_all(model, q, &measurements.directions)?;
    let data = ops
        .iter()
        .zip(&far)
        .zip(&measurements.data)
        .map(|((a, fq), u)| u.values() - fq.values() + a.matrix() * q.values())
        .collect();
    Ok((ops, data))
}

fn field(model: &ForwardModel, values: CVector) -> Result<MediumField> {
    MediumField::new(*model.grid(), values)
}

/// One full-data Levenberg–Marquardt step `q_i -> q_{i+1}`.
pub fn flm_step(
    q: &MediumField,
    measurements: &MeasurementSet,
    alpha: f64,
    model: &ForwardModel,
    r: MeasurementWeight,
) -> Result<MediumField> {
    let (ops, data) = linearize_problem(model, q, measurements)?;
    field(model, full_tikhonov(q.values(), &ops, &data, alpha, r)?)
}

/// Kalman-filter Levenberg–Marquardt sweep: linearize once at the incoming
/// estimate, then run the Kalman filter through all measurements.
pub fn kfl_sweep(
    state: &FilterState,
    measurements: &MeasurementSet,
    model: &ForwardModel,
    r: MeasurementWeight,
) -> Result<FilterState> {
    let q0 = field(model, state.estimate.clone())?;
    let (ops, data) = linearize_problem(model, &q0, measurements).map_err(|e| e.at_step(state.outer, 0))?;
    let start = state.clone().at(state.outer, 0);
    kalman_sweep(&start, &ops, &data, r)
}

/// Iterative extended Kalman filter sweep: relinearize at the current
/// estimate before every measurement.
pub fn ekf_sweep(
    state: &FilterState,
    measurements: &MeasurementSet,
    model: &ForwardModel,
    r: MeasurementWeight,
) -> Result<FilterState> {
    measurements.check_against(model)?;
    let mut current = state.clone().at(state.outer, 0);
    for n in 0..measurements.len() {
        let step = |current: &FilterState| -> Result<FilterState> {
            let q = field(model, current.estimate.clone())?;
            let lin = model.linearize(&q)?;
            let (fq, a) = lin.observe(measurements.directions.get(n))?;
            let f = measurements.data[n].values() - fq.values() + a.matrix() * q.values();
            kalman_update(current, &a, &f, r)
        };
        current = step(&current).map_err(|e| e.at_step(state.outer, n + 1))?;
    }
    Ok(current)
}

/// Starting state of sweep `i`. The estimate always continues from the
/// previous sweep (or `initial` when there is none); the weight follows the
/// policy. Carry-over without a previous state falls back to initialization.
pub fn apply_weight_policy(
    prev: Option<&FilterState>,
    initial: &CVector,
    alpha: f64,
    policy: WeightPolicy,
) -> Result<FilterState> {
    let outer = prev.map_or(0, |p| p.outer + 1);
    let estimate = prev.map_or_else(|| initial.clone(), |p| p.estimate.clone());
    let state = match (policy, prev) {
        (WeightPolicy::CarryOver, Some(p)) => FilterState::new(estimate, p.weight.clone())?,
        _ => FilterState::with_alpha(estimate, alpha)?,
    };
    Ok(state.at(outer, 0))
}

/// Linearized residual `alpha -> ||g - A delta(alpha)||` of a stacked
/// Tikhonov problem, evaluated through one eigendecomposition of the normal
/// matrix.
pub struct DiscrepancyCurve<'a> {
    operators: &'a [LinearizedOperator],
    residuals: Vec<CVector>,
    eigenvectors: CMatrix,
    eigenvalues: Vec<f64>,
    /// `V^H (1/r) sum A_n^H g_n`
    projected_rhs: CVector,
    residual_norm: f64,
}

impl<'a> DiscrepancyCurve<'a> {
    /// `residuals` are the current data misfits `g_n = u_n - F_n(q)`.
    pub fn new(operators: &'a [LinearizedOperator], residuals: Vec<CVector>, r: MeasurementWeight) -> Result<Self> {
        if operators.len() != residuals.len() {
            return Err(Error::Dimension {
                what: "residual list",
                expected: operators.len(),
                found: residuals.len(),
            });
        }
        let residual_norm = residuals.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        if residual_norm == 0.0 {
            return Err(Error::ZeroResidual);
        }
        let (mut normal, rhs) = normal_equations(operators, &residuals, r);
        hermitize(&mut normal);
        let eig = SymmetricEigen::new(normal);
        let projected_rhs = eig.eigenvectors.adjoint() * rhs;
        Ok(DiscrepancyCurve {
            operators,
            residuals,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors: eig.eigenvectors,
            projected_rhs,
            residual_norm,
        })
    }

    /// `||g||` over all directions.
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// Tikhonov increment `delta(alpha)`.
    pub fn step(&self, alpha: f64) -> CVector {
        let scaled = CVector::from_iterator(
            self.projected_rhs.len(),
            self.projected_rhs
                .iter()
                .zip(&self.eigenvalues)
                .map(|(c, l)| c / (alpha + l.max(0.0))),
        );
        &self.eigenvectors * scaled
    }

    /// `||g - A delta(alpha)||`.
    pub fn residual(&self, alpha: f64) -> f64 {
        let delta = self.step(alpha);
        self.operators
            .iter()
            .zip(&self.residuals)
            .map(|(a, g)| (g - a.matrix() * &delta).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Bisection on `log alpha` for `residual(alpha) = rho ||g||` within
    /// `1e-3 ||g||`.
    pub fn solve(&self, rho: f64) -> Result<f64> {
        RegularizationSchedule::morozov(rho)?;
        let target = rho * self.residual_norm;
        let tolerance = 1e-3 * self.residual_norm;
        let (lo, hi) = MOROZOV_BRACKET;
        let (mut a, mut b) = (lo.ln(), hi.ln());
        let (ra, rb) = (self.residual(lo), self.residual(hi));
        if (ra - target).abs() <= tolerance {
            return Ok(lo);
        }
        if (rb - target).abs() <= tolerance {
            return Ok(hi);
        }
        if ra > target || rb < target {
            return Err(Error::NoBracket { lo, hi });
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let rm = self.residual(mid.exp());
            if (rm - target).abs() <= tolerance {
                return Ok(mid.exp());
            }
            if rm < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Err(Error::NotConverged {
            iterations: 200,
            residual: (self.residual((0.5 * (a + b)).exp()) - target).abs() / self.residual_norm,
        })
    }
}

/// Regularization parameter from the discrepancy principle at `q`.
pub fn morozov_alpha(
    q: &MediumField,
    measurements: &MeasurementSet,
    rho: f64,
    model: &ForwardModel,
    r: MeasurementWeight,
) -> Result<f64> {
    RegularizationSchedule::morozov(rho)?;
    measurements.check_against(model)?;
    let (far, ops) = observe_all(model, q, &measurements.directions)?;
    let residuals = far
        .iter()
        .zip(&measurements.data)
        .map(|(fq, u)| u.values() - fq.values())
        .collect();
    DiscrepancyCurve::new(&ops, residuals, r)?.solve(rho)
}
