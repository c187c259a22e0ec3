//! Optimal release for a fixed discrete interference law.
//!
//! The interference takes value `a_j` with probability `p_j`; the transmitter
//! adds `b_j = π_0 f(a_j) ≥ 0` and the bit-1 miss probability
//! `Σ_j p_j P(Poisson(a_j + b_j) ≤ T)` is minimized subject to
//! `Σ_j p_j b_j = π_0 K`.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::pg::{minimize, Feasible, Objective, PgOptions};
use crate::error::{check, Result};
use crate::special::{poisson_pmf, poisson_tails};

const RANDOM_STARTS: usize = 20;

/// Where an atom ends up at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomRole {
    /// `a_j + b_j` equals the common level above `T`.
    AtLevel,
    /// `b_j = 0` because `a_j` already exceeds the common level.
    Saturated,
    /// `b_j = 0` although `a_j` is below the common level.
    Silent,
    /// `b_j > 0` with `a_j + b_j` on the low root below `T`.
    LowBranch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedDistSolution {
    pub b: Vec<f64>,
    /// Release rates `b_j / π_0`.
    pub f: Vec<f64>,
    pub objective: f64,
    /// Common received rate shared by the `AtLevel` atoms, if any.
    pub level: Option<f64>,
    pub roles: Vec<AtomRole>,
}

impl FixedDistSolution {
    /// Atoms that are neither at the common level nor above it.
    pub fn exceptions(&self) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, AtomRole::Silent | AtomRole::LowBranch))
            .map(|(j, _)| j)
            .collect()
    }
}

struct MissProb<'a> {
    a: &'a [f64],
    p: &'a [f64],
    threshold: u32,
}

impl Objective for MissProb<'_> {
    fn value(&self, b: &[f64]) -> f64 {
        fixed_dist_objective(self.a, self.p, b, self.threshold)
    }
    fn gradient(&self, b: &[f64], g: &mut [f64]) {
        for j in 0..b.len() {
            g[j] = -self.p[j] * poisson_pmf(self.a[j] + b[j], self.threshold);
        }
    }
}

/// `Σ_j p_j P(Poisson(a_j + b_j) ≤ T)`.
pub fn fixed_dist_objective(a: &[f64], p: &[f64], b: &[f64], threshold: u32) -> f64 {
    a.iter()
        .zip(p)
        .zip(b)
        .map(|((a, p), b)| p * poisson_tails(a + b, threshold).0)
        .sum()
}

/// `b_j = max(0, C - a_j)` with `C` chosen to meet the budget; atoms in `skip` get nothing.
fn water_fill(a: &[f64], p: &[f64], budget: f64, skip: Option<usize>) -> Vec<f64> {
    let used = |c: f64| -> f64 {
        (0..a.len())
            .filter(|&j| Some(j) != skip)
            .map(|j| p[j] * (c - a[j]).max(0.0))
            .sum()
    };
    let mut lo = 0.0;
    let mut hi = a.iter().fold(0.0f64, |m, &v| m.max(v))
        + budget / p.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if used(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    (0..a.len())
        .map(|j| {
            if Some(j) == skip {
                0.0
            } else {
                (c - a[j]).max(0.0)
            }
        })
        .collect()
}

fn classify(a: &[f64], b: &[f64], threshold: u32) -> (Option<f64>, Vec<AtomRole>) {
    let t = f64::from(threshold);
    let tiny = 1e-9 * (1.0 + b.iter().fold(0.0f64, |m, &v| m.max(v)));
    let level = (0..a.len())
        .filter(|&j| b[j] > tiny && a[j] + b[j] >= t)
        .map(|j| a[j] + b[j])
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
    let roles = (0..a.len())
        .map(|j| {
            let s = a[j] + b[j];
            match level {
                Some(c) if b[j] > tiny && (s - c).abs() <= 1e-5 * c.max(1.0) => AtomRole::AtLevel,
                Some(c) if b[j] <= tiny && a[j] >= c - 1e-5 * c.max(1.0) => AtomRole::Saturated,
                _ if b[j] <= tiny => AtomRole::Silent,
                _ => AtomRole::LowBranch,
            }
        })
        .collect();
    (level, roles)
}

/// Minimizes the bit-1 miss probability over the release `b_j ≥ 0` for each
/// interference atom `(a_j, p_j)` under the mean-power constraint.
pub fn optimize_fixed_dist(
    atoms: &[(f64, f64)],
    power: f64,
    threshold: u32,
    pi0: f64,
) -> Result<FixedDistSolution> {
    check(!atoms.is_empty(), "atoms.len", 0.0)?;
    check(power >= 0.0 && power.is_finite(), "power", power)?;
    check(pi0 > 0.0 && pi0 <= 1.0, "pi0", pi0)?;
    let mut total = 0.0;
    for &(a, p) in atoms {
        check(a >= 0.0 && a.is_finite(), "a_j", a)?;
        check(p > 0.0, "p_j", p)?;
        total += p;
    }
    check((total - 1.0).abs() <= 1e-9, "sum p_j", total)?;

    let a: Vec<f64> = atoms.iter().map(|x| x.0).collect();
    let p: Vec<f64> = atoms.iter().map(|x| x.1).collect();
    let n = a.len();
    let budget = pi0 * power;
    let b = if budget == 0.0 {
        vec![0.0; n]
    } else if n == 1 {
        vec![budget / p[0]]
    } else {
        let obj = MissProb {
            a: &a,
            p: &p,
            threshold,
        };
        let feasible = Feasible::Budget {
            weights: p.clone(),
            budget,
        };
        let opts = PgOptions {
            tolerance: 1e-14,
            accept: 1e-9,
            ..PgOptions::default()
        };
        let mut starts = vec![water_fill(&a, &p, budget, None)];
        starts.extend((0..n).map(|j| water_fill(&a, &p, budget, Some(j))));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..RANDOM_STARTS {
            let u: Vec<f64> = (0..n)
                .map(|_| ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64)
                .collect();
            let mass: f64 = u.iter().zip(&p).map(|(u, p)| u * p).sum();
            starts.push(u.iter().map(|u| u * budget / mass).collect());
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for x0 in starts {
            let out = minimize(&obj, &feasible, &x0, &opts);
            if best.as_ref().is_none_or(|(v, _)| out.value < *v) {
                best = Some((out.value, out.x));
            }
        }
        best.expect("starts").1
    };
    let objective = fixed_dist_objective(&a, &p, &b, threshold);
    let (level, roles) = classify(&a, &b, threshold);
    let f = b.iter().map(|b| b / pi0).collect();
    Ok(FixedDistSolution {
        b,
        f,
        objective,
        level,
        roles,
    })
}
