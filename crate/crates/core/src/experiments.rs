//! Scenario orchestration: synthetic data, reconstruction runs and the
//! equivalence checks between the Kalman and full-data formulations.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::filters::{
    apply_weight_policy, ekf_sweep, flm_step, full_tikhonov, kalman_sweep, kfl_sweep, morozov_alpha, FilterState,
    MeasurementSet, RegularizationSchedule, WeightPolicy,
};
use crate::forward::{ForwardModel, LinearizedOperator, MeasurementWeight, SpaceWeights};
use crate::grid::{mse, phantom, DirectionSet, FarFieldData, Grid, MediumField, ObservationSet, PhantomKind};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Reconstruction algorithm and, for the Kalman variants, the weight policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Flm,
    KflInit,
    KflCarry,
    EkfInit,
    EkfCarry,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Flm,
        Algorithm::KflInit,
        Algorithm::KflCarry,
        Algorithm::EkfInit,
        Algorithm::EkfCarry,
    ];

    /// The four Kalman variants compared in sweeps.
    pub const KALMAN_VARIANTS: [Algorithm; 4] = [
        Algorithm::EkfInit,
        Algorithm::EkfCarry,
        Algorithm::KflInit,
        Algorithm::KflCarry,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Flm => "flm",
            Algorithm::KflInit => "kfl_init",
            Algorithm::KflCarry => "kfl_carry",
            Algorithm::EkfInit => "ekf_init",
            Algorithm::EkfCarry => "ekf_carry",
        }
    }

    pub fn weight_policy(&self) -> Option<WeightPolicy> {
        match self {
            Algorithm::Flm => None,
            Algorithm::KflInit | Algorithm::EkfInit => Some(WeightPolicy::Initialize),
            Algorithm::KflCarry | Algorithm::EkfCarry => Some(WeightPolicy::CarryOver),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config("algorithm", format!("unknown algorithm `{s}`")))
    }
}

/// How measurement noise is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseModel {
    /// Real and imaginary parts each `N(0, sigma^2 / 2)`.
    Complex,
    /// Real part `N(0, sigma^2)`, imaginary part untouched.
    Real,
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseModel::Complex => "complex",
            NoiseModel::Real => "real",
        })
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(NoiseModel::Complex),
            "real" => Ok(NoiseModel::Real),
            other => Err(Error::config("noise", format!("unknown noise model `{other}`"))),
        }
    }
}

/// One reconstruction scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub wavenumber: f64,
    pub half_width: f64,
    pub half_divisions: usize,
    pub directions: usize,
    pub observations: usize,
    pub phantom: PhantomKind,
    pub algorithm: Algorithm,
    pub schedule: RegularizationSchedule,
    pub sigma: f64,
    pub noise: NoiseModel,
    pub seed: u64,
    pub outer_iterations: usize,
    /// `R = r I`.
    pub r: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            wavenumber: 7.0,
            half_width: 3.0,
            half_divisions: 6,
            directions: 60,
            observations: 60,
            phantom: PhantomKind::Disk,
            algorithm: Algorithm::EkfInit,
            schedule: RegularizationSchedule::Constant(100.0),
            sigma: 0.0,
            noise: NoiseModel::Complex,
            seed: 0,
            outer_iterations: 10,
            r: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        positive("k", self.wavenumber)?;
        positive("S", self.half_width)?;
        positive("r", self.r)?;
        for (key, v) in [("M", self.half_divisions), ("N", self.directions), ("J", self.observations)] {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma", format!("must be non-negative, got {}", self.sigma)));
        }
        match self.schedule {
            RegularizationSchedule::Constant(a) => positive("alpha", a)?,
            RegularizationSchedule::Morozov(rho) => {
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(Error::config("rho", format!("must lie in (0, 1), got {rho}")));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_width, self.half_divisions)
    }

    pub fn direction_set(&self) -> Result<DirectionSet> {
        DirectionSet::equispaced(self.directions)
    }

    pub fn forward_model(&self) -> Result<ForwardModel> {
        ForwardModel::new(self.grid()?, self.wavenumber, ObservationSet::equispaced(self.observations)?)
    }

    pub fn true_contrast(&self) -> Result<MediumField> {
        Ok(phantom(self.grid()?, self.phantom))
    }

    pub fn measurement_weight(&self) -> Result<MeasurementWeight> {
        MeasurementWeight::new(self.r)
    }
}

/// `F_n(q_true) + eps_n` for every direction.
///
/// Direction `n` (zero-based) draws its noise from `ChaCha8Rng` seeded with
/// `seed` on stream `n`, so the data do not depend on evaluation order or
/// thread count.
pub fn synthesize_measurements(
    q_true: &MediumField,
    config: &ScenarioConfig,
    model: &ForwardModel,
) -> Result<MeasurementSet> {
    let directions = config.direction_set()?;
    let lin = model.linearize(q_true)?;
    let exact: Vec<Result<FarFieldData>> = (0..directions.len())
        .into_par_iter()
        .map(|n| lin.far_field(directions.get(n)).map_err(|e| e.at_direction(n + 1)))
        .collect();
    let mut data = Vec::with_capacity(directions.len());
    for (n, far) in exact.into_iter().enumerate() {
        let far = far?;
        if config.sigma == 0.0 {
            data.push(far);
            continue;
        }
        let noise = noise_vector(far.len(), config.sigma, config.noise, config.seed, n as u64)?;
        data.push(FarFieldData::new(far.into_values() + noise)?);
    }
    MeasurementSet::new(directions, data, config.sigma, config.seed)
}

/// Noise added to the data of direction `stream`.
pub fn noise_vector(len: usize, sigma: f64, model: NoiseModel, seed: u64, stream: u64) -> Result<CVector> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            what: "noise standard deviation",
            value: sigma,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let std = match model {
        NoiseModel::Complex => sigma / SQRT_2,
        NoiseModel::Real => sigma,
    };
    let normal = Normal::new(0.0, std).map_err(|_| Error::Domain {
        what: "noise standard deviation",
        value: sigma,
    })?;
    Ok(CVector::from_iterator(
        len,
        (0..len).map(|_| {
            let re = normal.sample(&mut rng);
            let im = match model {
                NoiseModel::Complex => normal.sample(&mut rng),
                NoiseModel::Real => 0.0,
            };
            C64::new(re, im)
        }),
    ))
}

/// Error after outer iteration `iteration` (0 is the initial guess).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mse: f64,
    pub wall_ms: f64,
    /// Regularization parameter used to reach this iterate.
    pub alpha: Option<f64>,
}

#[derive(Debug)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
    /// Estimates after each outer iteration, when kept in memory.
    pub snapshots: Vec<MediumField>,
    pub final_estimate: MediumField,
    /// Error that stopped the run early, if any.
    pub failure: Option<Error>,
}

impl RunHistory {
    pub fn mse_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mse).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Runs the configured algorithm from `q_0 = 0`, keeping every estimate.
pub fn run_reconstruction(
    config: &ScenarioConfig,
    measurements: &MeasurementSet,
    q_true: &MediumField,
    model: &ForwardModel,
) -> Result<RunHistory> {
    let mut snapshots = Vec::new();
    let mut history = run_reconstruction_with(config, measurements, q_true, model, |_, q| {
        snapshots.push(q.clone());
        Ok(())
    })?;
    history.snapshots = snapshots;
    Ok(history)
}

/// Like [`run_reconstruction`], but hands each estimate to `observer`
/// instead of storing it. An observer error stops the run and is recorded as
/// the failure.
pub fn run_reconstruction_with(
    config: &ScenarioConfig,
    measurements: &MeasurementSet,
    q_true: &MediumField,
    model: &ForwardModel,
    mut observer: impl FnMut(&IterationRecord, &MediumField) -> Result<()>,
) -> Result<RunHistory> {
    config.validate()?;
    if q_true.grid() != model.grid() {
        return Err(Error::GridMismatch);
    }
    let r = config.measurement_weight()?;
    let initial = MediumField::zeros(*model.grid());
    let first = IterationRecord {
        iteration: 0,
        mse: mse(&initial, q_true)?,
        wall_ms: 0.0,
        alpha: None,
    };
    let mut records = vec![first];
    let mut failure = observer(&first, &initial).err();
    let mut q = initial.clone();
    let mut state: Option<FilterState> = None;

    for i in 0..config.outer_iterations {
        if failure.is_some() {
            break;
        }
        let started = Instant::now();
        let step = || -> Result<(f64, MediumField, Option<FilterState>)> {
            let alpha = match config.schedule {
                RegularizationSchedule::Constant(a) => a,
                RegularizationSchedule::Morozov(rho) => {
                    morozov_alpha(&q, measurements, rho, model, r).map_err(|e| e.at_step(i, 0))?
                }
            };
            match config.algorithm.weight_policy() {
                None => {
                    let next = flm_step(&q, measurements, alpha, model, r).map_err(|e| e.at_step(i, 0))?;
                    Ok((alpha, next, None))
                }
                Some(policy) => {
                    let start = apply_weight_policy(state.as_ref(), initial.values(), alpha, policy)?.at(i, 0);
                    let end = match config.algorithm {
                        Algorithm::KflInit | Algorithm::KflCarry => kfl_sweep(&start, measurements, model, r)?,
                        _ => ekf_sweep(&start, measurements, model, r)?,
                    };
                    let next = MediumField::new(*model.grid(), end.estimate().clone())?;
                    Ok((alpha, next, Some(end)))
                }
            }
        };
        match step() {
            Ok((alpha, next, end)) => {
                q = next;
                state = end;
                let record = IterationRecord {
                    iteration: i + 1,
                    mse: mse(&q, q_true)?,
                    wall_ms: started.elapsed().as_secs_f64() * 1e3,
                    alpha: Some(alpha),
                };
                records.push(record);
                failure = observer(&record, &q).err();
            }
            Err(e) => failure = Some(e),
        }
    }
    Ok(RunHistory {
        records,
        snapshots: Vec::new(),
        final_estimate: q,
        failure,
    })
}

/// Problem size for [`equivalence_harness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Tiny,
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(Scale::Tiny),
            "full" => Ok(Scale::Full),
            other => Err(Error::config("scale", format!("unknown scale `{other}`"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Tiny => "tiny",
            Scale::Full => "full",
        })
    }
}

/// Relative deviations found by [`equivalence_harness`].
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub scale: Scale,
    pub seed: u64,
    /// `(alpha, ||x_kalman - x_tikhonov|| / ||x_tikhonov||)` on random
    /// linear operators.
    pub linear: Vec<(f64, f64)>,
    /// `(i, ||q_kfl_{i,N} - q_flm_{i+1}|| / ||q_flm_{i+1}||)` on a scattering
    /// problem.
    pub nonlinear: Vec<(usize, f64)>,
}

impl EquivalenceReport {
    pub fn max_linear(&self) -> f64 {
        self.linear.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    pub fn max_nonlinear(&self) -> f64 {
        self.nonlinear.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Alphas used by the linear check.
pub const LINEAR_CHECK_ALPHAS: [f64; 3] = [0.1, 1.0, 10.0];

/// Sequential Kalman sweep versus the full-data Tikhonov minimizer on random
/// complex operators (`D = 8`, `J = 4`, `N = 5`).
pub fn linear_equivalence(seed: u64) -> Result<Vec<(f64, f64)>> {
    let (d, j, n) = (8, 4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let weights = SpaceWeights::new(0.5, 2.0 * PI / j as f64);
    let ops: Vec<LinearizedOperator> = (0..n)
        .map(|_| LinearizedOperator::new(CMatrix::from_fn(j, d, |_, _| sample()), weights))
        .collect();
    let data: Vec<CVector> = (0..n).map(|_| CVector::from_fn(j, |_, _| sample())).collect();
    let prior = CVector::from_fn(d, |_, _| sample());
    let r = MeasurementWeight::identity();
    LINEAR_CHECK_ALPHAS
        .iter()
        .map(|&alpha| {
            let tik = full_tikhonov(&prior, &ops, &data, alpha, r)?;
            let kf = kalman_sweep(&FilterState::with_alpha(prior.clone(), alpha)?, &ops, &data, r)?;
            Ok((alpha, (kf.estimate() - &tik).norm() / tik.norm()))
        })
        .collect()
}

/// Three outer iterations of KFL (weight reset every sweep) and FLM, run as
/// independent sequences from `q_0 = 0`; returns the deviation after each.
pub fn nonlinear_equivalence(config: &ScenarioConfig) -> Result<Vec<(usize, f64)>> {
    let alpha = match config.schedule {
        RegularizationSchedule::Constant(a) => a,
        RegularizationSchedule::Morozov(_) => {
            return Err(Error::config("schedule", "the equivalence check needs a constant alpha"))
        }
    };
    let model = config.forward_model()?;
    let q_true = config.true_contrast()?;
    let measurements = synthesize_measurements(&q_true, config, &model)?;
    let r = config.measurement_weight()?;
    let initial = MediumField::zeros(*model.grid());
    let mut q_flm = initial.clone();
    let mut state: Option<FilterState> = None;
    let mut out = Vec::new();
    for i in 0..config.outer_iterations {
        q_flm = flm_step(&q_flm, &measurements, alpha, &model, r)?;
        let start = apply_weight_policy(state.as_ref(), initial.values(), alpha, WeightPolicy::Initialize)?.at(i, 0);
        let end = kfl_sweep(&start, &measurements, &model, r)?;
        out.push((i, (end.estimate() - q_flm.values()).norm() / q_flm.values().norm()));
        state = Some(end);
    }
    Ok(out)
}

/// Scenario used by the nonlinear check at each scale.
pub fn equivalence_scenario(scale: Scale, seed: u64) -> ScenarioConfig {
    let base = ScenarioConfig {
        seed,
        outer_iterations: 3,
        algorithm: Algorithm::KflInit,
        ..ScenarioConfig::default()
    };
    match scale {
        Scale::Tiny => ScenarioConfig {
            wavenumber: 1.0,
            half_width: 3.0,
            half_divisions: 3,
            directions: 8,
            observations: 16,
            schedule: RegularizationSchedule::Constant(1.0),
            ..base
        },
        Scale::Full => base,
    }
}

/// Runs both equivalence checks.
pub fn equivalence_harness(scale: Scale, seed: u64) -> Result<EquivalenceReport> {
    Ok(EquivalenceReport {
        scale,
        seed,
        linear: linear_equivalence(seed)?,
        nonlinear: nonlinear_equivalence(&equivalence_scenario(scale, seed))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ScenarioConfig {
        ScenarioConfig {
            wavenumber: 1.0,
            half_width: 3.0,
            half_divisions: 2,
            directions: 4,
            observations: 8,
            outer_iterations: 2,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("kfl".parse::<Algorithm>().is_err());
    }

    #[test]
    fn noise_streams_are_independent_and_deterministic() {
        let a = noise_vector(10, 1.0, NoiseModel::Complex, 7, 0).unwrap();
        let b = noise_vector(10, 1.0, NoiseModel::Complex, 7, 0).unwrap();
        let c = noise_vector(10, 1.0, NoiseModel::Complex, 7, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let real = noise_vector(10, 1.0, NoiseModel::Real, 7, 0).unwrap();
        assert!(real.iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn zero_iterations_record_initial_error_only() {
        let config = ScenarioConfig {
            outer_iterations: 0,
            ..tiny_config()
        };
        let model = config.forward_model().unwrap();
        let q_true = config.true_contrast().unwrap();
        let ms = synthesize_measurements(&q_true, &config, &model).unwrap();
        let h = run_reconstruction(&config, &ms, &q_true, &model).unwrap();
        assert_eq!(h.records.len(), 1);
        let support = q_true.values().iter().filter(|v| v.re == 1.0).count();
        assert_eq!(h.records[0].mse, support as f64);
    }

    #[test]
    fn exact_initial_guess_is_a_fixed_point() {
        // with zero contrast as truth, noise-free data vanish and q = 0 stays put
        let config = tiny_config();
        let model = config.forward_model().unwrap();
        let q_true = MediumField::zeros(*model.grid());
        let ms = synthesize_measurements(&q_true, &config, &model).unwrap();
        for algorithm in Algorithm::ALL {
            let cfg = ScenarioConfig { algorithm, ..config.clone() };
            let h = run_reconstruction(&cfg, &ms, &q_true, &model).unwrap();
            assert!(h.mse_values().iter().all(|&e| e == 0.0), "{algorithm}");
        }
    }

    #[test]
    fn failure_is_recorded_not_raised() {
        let config = tiny_config();
        let model = config.forward_model().unwrap();
        let q_true = config.true_contrast().unwrap();
        let ms = synthesize_measurements(&q_true, &config, &model).unwrap();
        let h = run_reconstruction_with(&config, &ms, &q_true, &model, |rec, _| {
            if rec.iteration == 1 {
                Err(Error::Internal("stop".into()))
            } else {
                Ok(())
            }
        })
        .unwrap();
        assert_eq!(h.records.len(), 2);
        assert!(matches!(h.failure, Some(Error::Internal(_))));
    }

    #[test]
    fn config_validation_names_keys() {
        let bad = ScenarioConfig {
            half_divisions: 0,
            ..ScenarioConfig::default()
        };
        match bad.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "M"),
            other => panic!("{other:?}"),
        }
    }
}
