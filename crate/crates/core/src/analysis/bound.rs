use crate::error::{check, Error, Result};
use crate::special::{gamma_p, poisson_pmf};

/// Lower-bound ingredients for a one-memory channel with ratio `r = π_0/π_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    pub r: f64,
    pub threshold: u32,
    pub theta: f64,
    /// `log(2 r^{T+1}) / (r - 1)`, the lower limit on `a_1` at a stationary point.
    pub a: f64,
    /// `T / (r + 1)`, the lower limit on `a_2`.
    pub b: f64,
    pub value: f64,
    /// `r > θ(T)`.
    pub r_above_theta: bool,
    /// `T ≥ 5`, i.e. above the crossover `T*`.
    pub threshold_ok: bool,
}

impl BoundResult {
    pub fn valid(&self) -> bool {
        self.r_above_theta && self.threshold_ok
    }
}

fn theta_residual(theta: f64, t: f64) -> f64 {
    (core::f64::consts::LN_2 + (t + 1.0) * libm::log(theta)) / (theta - 1.0) - t
}

/// Unique `θ > 1` with `log(2 θ^{T+1}) / (θ - 1) = T`.
pub fn compute_theta(threshold: u32) -> Result<f64> {
    if threshold == 0 {
        return Err(Error::NoRoot("log(2θ)/(θ-1) is positive for every θ > 1"));
    }
    let t = f64::from(threshold);
    // residual is +∞ at θ → 1⁺ and decreasing
    let mut low = 1.0 + 1e-12;
    let mut high = 2.0;
    while theta_residual(high, t) > 0.0 {
        low = high;
        high *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (low + high);
        if theta_residual(mid, t) > 0.0 {
            low = mid;
        } else {
            high = mid;
        }
        if high - low < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (low + high))
}

/// `𝕃(x, y)` for ratio `r` and threshold `T`.
pub fn lower_bound_value(x: f64, y: f64, r: f64, threshold: u32) -> f64 {
    let t1 = f64::from(threshold) + 1.0;
    let first = poisson_pmf(x, threshold) * (x / (8.0 * t1) + 1.0 / (8.0 * r));
    let second =
        poisson_pmf(y, threshold) * (y / (16.0 * t1) + 1.0 / (16.0 * r) - 1.0 / (16.0 * r * r));
    first + second
}

/// Evaluates the bound at `(A, B)`. Out-of-regime inputs still produce a value
/// with the validity flags cleared.
pub fn lower_bound(r: f64, threshold: u32) -> Result<BoundResult> {
    check(r > 1.0 && r.is_finite(), "r", r)?;
    let theta = compute_theta(threshold)?;
    let t = f64::from(threshold);
    let a = (core::f64::consts::LN_2 + (t + 1.0) * libm::log(r)) / (r - 1.0);
    let b = t / (r + 1.0);
    Ok(BoundResult {
        r,
        threshold,
        theta,
        a,
        b,
        value: lower_bound_value(a, b, r, threshold),
        r_above_theta: r > theta,
        threshold_ok: threshold >= t_star_threshold(),
    })
}

/// Difference of the two sides of the crossover equation at real `t`.
pub fn t_star_residual(t: f64) -> f64 {
    let ln_gamma = libm::lgamma(t + 1.0);
    // Σ_{y>T} T^y e^{-T} / y! extended to real T via the regularized lower gamma
    let tail = gamma_p(t + 1.0, t);
    let mode = libm::exp(t * libm::log(t) - t - ln_gamma);
    let half = libm::exp(t * libm::log(0.5 * t) - 0.5 * t - ln_gamma);
    0.125 * tail - (0.25 * mode + 3.0 / 64.0 * half)
}

/// Crossover threshold `T*` where the `a_1 > T` lower estimate meets the
/// upper estimate of the bound, with `T` treated as continuous.
pub fn compute_t_star() -> f64 {
    let (mut low, mut high) = (2.0, 10.0);
    debug_assert!(t_star_residual(low) < 0.0 && t_star_residual(high) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (low + high);
        if t_star_residual(mid) < 0.0 {
            low = mid;
        } else {
            high = mid;
        }
        if high - low < 1e-14 {
            break;
        }
    }
    0.5 * (low + high)
}

/// Smallest integer threshold above `T*`.
pub fn t_star_threshold() -> u32 {
    libm::ceil(compute_t_star()) as u32
}
