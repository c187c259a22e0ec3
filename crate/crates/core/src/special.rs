//! Scalar special functions shared by the channel and analysis modules.

use crate::error::{check, Result};
use core::f64::consts::{PI, SQRT_2};

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub(crate) fn ln_factorial(n: u32) -> f64 {
    libm::lgamma(f64::from(n) + 1.0)
}

/// `e^{-x} x^t / t!`, the Poisson mass at `t`. Also the (negated) derivative of
/// the Poisson CDF with respect to its rate.
pub fn poisson_pmf(x: f64, t: u32) -> f64 {
    if x <= 0.0 {
        return if t == 0 { 1.0 } else { 0.0 };
    }
    libm::exp(f64::from(t) * libm::log(x) - x - ln_factorial(t))
}

/// Returns `(P[Y <= t], P[Y > t])` for `Y ~ Poisson(lambda)`; the smaller of the
/// two is always summed directly so neither side suffers cancellation.
pub(crate) fn poisson_tails(lambda: f64, t: u32) -> (f64, f64) {
    if lambda <= 0.0 {
        return (1.0, 0.0);
    }
    let ln_lambda = libm::log(lambda);
    let tf = f64::from(t);
    if lambda > tf {
        // walk down from y = t; ratios y / lambda < 1
        let mut term = libm::exp(tf * ln_lambda - lambda - ln_factorial(t));
        let mut acc = Compensated::default();
        acc.add(term);
        let mut y = t;
        while y > 0 {
            term *= f64::from(y) / lambda;
            acc.add(term);
            if term <= acc.value() * 1e-18 {
                break;
            }
            y -= 1;
        }
        let cdf = acc.value().min(1.0);
        (cdf, 1.0 - cdf)
    } else {
        // walk up from y = t + 1; ratios lambda / y < 1
        let mut term = libm::exp((tf + 1.0) * ln_lambda - lambda - ln_factorial(t + 1));
        let mut acc = Compensated::default();
        acc.add(term);
        let mut y = tf + 2.0;
        loop {
            term *= lambda / y;
            acc.add(term);
            if term <= acc.value() * 1e-18 || term == 0.0 {
                break;
            }
            y += 1.0;
        }
        let sf = acc.value().min(1.0);
        (1.0 - sf, sf)
    }
}

/// Poisson CDF `e^{-lambda} sum_{y=0}^{t} lambda^y / y!`.
pub fn poisson_cdf(lambda: f64, t: u32) -> Result<f64> {
    check(lambda >= 0.0 && lambda.is_finite(), "lambda", lambda)?;
    Ok(poisson_tails(lambda, t).0)
}

/// Upper tail `P[Y > t]`, computed without forming `1 - cdf` when it is small.
pub fn poisson_sf(lambda: f64, t: u32) -> Result<f64> {
    check(lambda >= 0.0 && lambda.is_finite(), "lambda", lambda)?;
    Ok(poisson_tails(lambda, t).1)
}

/// Regularized lower incomplete gamma `P(a, x)` for real `a > 0`.
pub(crate) fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_prefactor = a * libm::log(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if libm::fabs(del) < libm::fabs(sum) * 1e-17 {
                break;
            }
        }
        sum * libm::exp(ln_prefactor)
    } else {
        1.0 - gamma_q_continued_fraction(a, x, ln_prefactor)
    }
}

fn gamma_q_continued_fraction(a: f64, x: f64, ln_prefactor: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -f64::from(i) * (f64::from(i) - a);
        b += 2.0;
        d = an * d + b;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) < 1e-16 {
            break;
        }
    }
    libm::exp(ln_prefactor) * h
}

/// Standard normal CDF.
pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `exp(shift) * Phi(-x)` for `x >= 0`, stable when `shift` is large and
/// `Phi(-x)` underflows.
pub(crate) fn exp_times_normal_sf(shift: f64, x: f64) -> f64 {
    let z = x / SQRT_2;
    if z < 5.0 {
        let tail = libm::erfc(z);
        if tail == 0.0 {
            return 0.0;
        }
        0.5 * libm::exp(shift + libm::log(tail))
    } else {
        // erfc(z) = exp(-z^2) erfcx(z), continued fraction for erfcx
        let mut t = z;
        for k in (1..=100).rev() {
            t = z + 0.5 * f64::from(k) / t;
        }
        0.5 * libm::exp(shift - z * z) / (t * libm::sqrt(PI))
    }
}
