//! Projected gradient on `{x ≥ 0}` or on `{x ≥ 0, w·x = c}` with `w > 0`.
//!
//! On the weighted simplex the step is taken in the metric `diag(w)`, which
//! turns the projection into a uniform shift `x_j = max(0, y_j - τ)`.

use alloc::vec;
use alloc::vec::Vec;

pub(crate) trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

#[derive(Debug, Clone)]
pub(crate) enum Feasible {
    Orthant,
    Budget { weights: Vec<f64>, budget: f64 },
}

impl Feasible {
    fn scale(&self, j: usize) -> f64 {
        match self {
            Feasible::Orthant => 1.0,
            Feasible::Budget { weights, .. } => weights[j],
        }
    }

    pub(crate) fn project(&self, y: &mut [f64]) {
        match self {
            Feasible::Orthant => y.iter_mut().for_each(|v| *v = v.max(0.0)),
            Feasible::Budget { weights, budget } => {
                let mass = |tau: f64| -> f64 {
                    y.iter()
                        .zip(weights)
                        .map(|(v, w)| w * (v - tau).max(0.0))
                        .sum()
                };
                let wsum: f64 = weights.iter().sum();
                let max_y = y.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                // mass(hi) = 0 ≤ budget ≤ mass(lo)
                let mut hi = max_y;
                let mut lo = max_y - budget / wsum - 1.0;
                while mass(lo) < *budget {
                    lo -= 2.0 * (hi - lo);
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mass(mid) > *budget {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-16 * (1.0 + hi.abs()) {
                        break;
                    }
                }
                // finish exactly on the active set
                let tau = 0.5 * (lo + hi);
                let (mut wa, mut wya) = (0.0, 0.0);
                for (v, w) in y.iter().zip(weights) {
                    if *v > tau {
                        wa += w;
                        wya += w * v;
                    }
                }
                let tau = if wa > 0.0 { (wya - budget) / wa } else { tau };
                y.iter_mut().for_each(|v| *v = (*v - tau).max(0.0));
            }
        }
    }

    /// First-order KKT violation at `x` for gradient `g`.
    pub(crate) fn kkt_residual(&self, x: &[f64], g: &[f64]) -> f64 {
        match self {
            Feasible::Orthant => x
                .iter()
                .zip(g)
                .map(|(&xi, &gi)| if xi > 0.0 { gi.abs() } else { (-gi).max(0.0) })
                .fold(0.0, f64::max),
            Feasible::Budget { weights, .. } => {
                let (mut num, mut den) = (0.0, 0.0);
                for ((&xi, &gi), &w) in x.iter().zip(g).zip(weights) {
                    if xi > 0.0 {
                        num += w * gi;
                        den += w * w;
                    }
                }
                let nu = if den > 0.0 {
                    num / den
                } else {
                    g.iter()
                        .zip(weights)
                        .map(|(gi, w)| gi / w)
                        .fold(f64::INFINITY, f64::min)
                };
                x.iter()
                    .zip(g)
                    .zip(weights)
                    .map(|((&xi, &gi), &w)| {
                        let r = gi - nu * w;
                        if xi > 0.0 {
                            r.abs()
                        } else {
                            (-r).max(0.0)
                        }
                    })
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Iteration controls for the projected-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgOptions {
    pub max_iterations: usize,
    /// Stop once the KKT residual falls below this.
    pub tolerance: f64,
    /// Residual below which a run counts as converged.
    pub accept: f64,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            tolerance: 1e-12,
            accept: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PgOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn minimize(
    obj: &impl Objective,
    feasible: &Feasible,
    x0: &[f64],
    opts: &PgOptions,
) -> PgOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    feasible.project(&mut x);
    let mut g = vec![0.0; n];
    obj.gradient(&x, &mut g);
    let mut f = obj.value(&x);
    let mut residual = feasible.kkt_residual(&x, &g);
    let norm = |v: &[f64]| v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let dir = |g: &[f64], j: usize| g[j] / feasible.scale(j);
    let mut step = {
        let dmax = (0..n).map(|j| dir(&g, j).abs()).fold(0.0, f64::max);
        if dmax > 0.0 {
            (1.0 + norm(&x)) / dmax
        } else {
            1.0
        }
    };
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut stalled = 0;
    for _ in 0..opts.max_iterations {
        if residual <= opts.tolerance {
            break;
        }
        let mut accepted = false;
        let mut f_new = f;
        for _ in 0..80 {
            for j in 0..n {
                trial[j] = x[j] - step * dir(&g, j);
            }
            feasible.project(&mut trial);
            let descent: f64 = (0..n).map(|j| g[j] * (trial[j] - x[j])).sum();
            f_new = obj.value(&trial);
            if f_new <= f + 1e-4 * descent || descent == 0.0 {
                accepted = descent < 0.0 || f_new < f;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            stalled += 1;
            if stalled > 3 {
                break;
            }
            step = step.max(1e-300) * 0.5;
            continue;
        }
        stalled = 0;
        obj.gradient(&trial, &mut g_new);
        // Barzilai-Borwein step in the weighted metric: sᵀWs / sᵀΔg
        let (mut sws, mut sy) = (0.0, 0.0);
        for j in 0..n {
            let s = trial[j] - x[j];
            sws += feasible.scale(j) * s * s;
            sy += s * (g_new[j] - g[j]);
        }
        step = if sy > 0.0 {
            (sws / sy).clamp(1e-12, 1e12)
        } else {
            (step * 4.0).min(1e12)
        };
        core::mem::swap(&mut x, &mut trial);
        core::mem::swap(&mut g, &mut g_new);
        f = f_new;
        residual = feasible.kkt_residual(&x, &g);
    }
    PgOutcome {
        converged: residual <= opts.accept,
        x,
        value: f,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        center: Vec<f64>,
        curvature: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter()
                .zip(&self.center)
                .zip(&self.curvature)
                .map(|((x, c), k)| 0.5 * k * (x - c) * (x - c))
                .sum()
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            for j in 0..x.len() {
                g[j] = self.curvature[j] * (x[j] - self.center[j]);
            }
        }
    }

    #[test]
    fn projection_hits_budget() {
        let f = Feasible::Budget {
            weights: vec![0.5, 0.25, 0.125, 0.125],
            budget: 3.0,
        };
        let mut y = vec![4.0, -1.0, 10.0, 0.5];
        f.project(&mut y);
        let mass: f64 = y
            .iter()
            .zip([0.5, 0.25, 0.125, 0.125])
            .map(|(a, w)| a * w)
            .sum();
        assert!((mass - 3.0).abs() < 1e-12);
        assert!(y.iter().all(|&v| v >= 0.0));
        // uniform shift: active entries moved by the same amount
        assert!(((4.0 - y[0]) - (10.0 - y[2])).abs() < 1e-12);
    }

    #[test]
    fn orthant_quadratic() {
        let q = Quadratic {
            center: vec![1.0, -2.0, 3.0],
            curvature: vec![1.0, 10.0, 0.1],
        };
        let out = minimize(
            &q,
            &Feasible::Orthant,
            &[5.0, 5.0, 5.0],
            &PgOptions::default(),
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-9 && out.x[1] == 0.0 && (out.x[2] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn budget_quadratic_matches_lagrange_solution() {
        // min ½Σ(x-c)² s.t. Σ x = 1 → x = c - τ on the active set
        let q = Quadratic {
            center: vec![0.9, 0.5, -0.4],
            curvature: vec![1.0; 3],
        };
        let f = Feasible::Budget {
            weights: vec![1.0; 3],
            budget: 1.0,
        };
        let out = minimize(&q, &f, &[0.2, 0.2, 0.6], &PgOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 0.7).abs() < 1e-9 && (out.x[1] - 0.3).abs() < 1e-9 && out.x[2] == 0.0);
    }
}
