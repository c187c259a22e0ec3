//! Self-check battery behind `molrate verify`.

use molrate_core::analysis::{
    compute_t_star, compute_theta, error_eq3, error_eq5, fixed_dist_objective, lower_bound,
    minimize_eq5, one_memory_law, optimize_fixed_dist, p_reduced, p_reduced_gradient,
    reduced_stationary_points, t_star_residual, verify_zero_for_zero, OneMemProblem, StateRates,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

const GRID: usize = 200;

/// Smallest reduced error on a `GRID × GRID` lattice over `[0, 4T]²`.
fn reduced_grid_min(r: f64, t: u32) -> f64 {
    let span = 4.0 * f64::from(t);
    (0..=GRID)
        .into_par_iter()
        .map(|i| {
            let a1 = span * i as f64 / GRID as f64;
            (0..=GRID)
                .map(|j| p_reduced(a1, span * j as f64 / GRID as f64, r, t))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

fn problem_for(r: f64, t: u32) -> OneMemProblem {
    // interference rates of order T: π1 K ≈ T
    let pi1 = 0.9 / (r + 1.0);
    OneMemProblem::new(r, t, f64::from(t) / pi1, pi1).expect("valid instance")
}

fn t_star() -> Check {
    let t = compute_t_star();
    let res = t_star_residual(t).abs();
    Check::new(
        "t_star",
        (4.8..=4.95).contains(&t) && res < 1e-8,
        format!("T* = {t:.6}, residual {res:.2e}"),
    )
}

fn theta() -> Check {
    let worst = (1..=30u32)
        .map(|t| {
            let th = compute_theta(t).unwrap_or(f64::NAN);
            ((2.0 * th.powi(t as i32 + 1)).ln() / (th - 1.0) - f64::from(t)).abs()
        })
        .fold(0.0f64, f64::max);
    Check::new(
        "theta",
        worst < 1e-8,
        format!("max residual over T = 1..30: {worst:.2e}"),
    )
}

fn lower_bound_grid() -> Check {
    let mut worst_ratio = f64::INFINITY;
    let mut ok = true;
    let mut n = 0;
    for t in 5..=10u32 {
        for r in [2.0, 3.0, 4.0, 6.0] {
            let b = match lower_bound(r, t) {
                Ok(b) if b.valid() => b,
                _ => continue,
            };
            let m = reduced_grid_min(r, t);
            ok &= b.value <= m;
            worst_ratio = worst_ratio.min(b.value / m);
            n += 1;
        }
    }
    ok &= n > 0 && worst_ratio >= 0.1;
    Check::new(
        "lower_bound_grid",
        ok,
        format!("{n} instances, min bound/grid-min ratio {worst_ratio:.3}"),
    )
}

fn lower_bound_optimizer() -> Check {
    let cases = [(3.0, 5u32), (4.0, 8), (6.0, 6)];
    let out: Vec<(bool, String)> = cases
        .par_iter()
        .map(|&(r, t)| {
            let b = lower_bound(r, t).expect("r > 1");
            let sol = minimize_eq5(&problem_for(r, t));
            let ok = sol.converged && b.value <= sol.error;
            (
                ok,
                format!(
                    "r={r} T={t}: bound {:.3e} <= min {:.3e}",
                    b.value, sol.error
                ),
            )
        })
        .collect();
    let ok = out.iter().all(|o| o.0);
    Check::new(
        "lower_bound_optimizer",
        ok,
        out.into_iter().map(|o| o.1).collect::<Vec<_>>().join("; "),
    )
}

fn stationary_points() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases: Vec<(f64, u32)> = (0..10)
        .map(|_| {
            let t = rng.random_range(5..=12u32);
            let theta = compute_theta(t).expect("T > 0");
            (rng.random_range(theta * 1.05..8.0), t)
        })
        .collect();
    let out: Vec<(bool, usize)> = cases
        .par_iter()
        .enumerate()
        .map(|(j, &(r, t))| {
            let a = lower_bound(r, t).expect("r > 1").a;
            let pts = reduced_stationary_points(r, t, 20, j as u64);
            let inside = pts.iter().all(|p| p.a2 < f64::from(t) && p.a1 > a);
            let edge = (1..=40).all(|k| {
                let v = f64::from(t) * k as f64 / 10.0;
                p_reduced_gradient(0.0, v, r, t)[0] < 0.0
                    && p_reduced_gradient(v, 0.0, r, t)[1] < 0.0
            });
            (inside && edge && !pts.is_empty(), pts.len())
        })
        .collect();
    let ok = out.iter().all(|o| o.0);
    let total: usize = out.iter().map(|o| o.1).sum();
    Check::new(
        "stationary_points",
        ok,
        format!("{} instances, {total} minimizers", cases.len()),
    )
}

fn zero_for_zero() -> Check {
    let cases = [(3.0, 5u32), (2.5, 7), (5.0, 6), (4.0, 9)];
    let out: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|&(r, t)| {
            let rep = verify_zero_for_zero(&problem_for(r, t));
            (rep.a0, rep.delta)
        })
        .collect();
    let max_a0 = out.iter().map(|o| o.0).fold(0.0f64, f64::max);
    let min_delta = out.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
    Check::new(
        "zero_for_zero",
        max_a0 < 1e-6 && min_delta >= -1e-8,
        format!("max a0 {max_a0:.2e}, min error gain from a0 {min_delta:.2e}"),
    )
}

fn fixed_dist() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut ok = true;
    let n = 5;
    for _ in 0..n {
        let t = rng.random_range(3..=10u32);
        let tf = f64::from(t);
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..tf)).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
        let p: Vec<f64> = w.iter().map(|x| x / w.iter().sum::<f64>()).collect();
        let pi0 = rng.random_range(0.2..0.8);
        let budget = rng.random_range(1.5 * tf..3.0 * tf);
        let atoms: Vec<(f64, f64)> = a.iter().copied().zip(p.iter().copied()).collect();
        let sol = match optimize_fixed_dist(&atoms, budget / pi0, t, pi0) {
            Ok(s) => s,
            Err(_) => return Check::new("fixed_dist_structure", false, "optimizer error".into()),
        };
        let steps = 300;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let b0 = budget / p[0] * i as f64 / steps as f64;
                let b1 = budget / p[1] * j as f64 / steps as f64;
                let rest = budget - p[0] * b0 - p[1] * b1;
                if rest >= 0.0 {
                    best = best.min(fixed_dist_objective(&a, &p, &[b0, b1, rest / p[2]], t));
                }
            }
        }
        ok &= sol.objective <= best + 1e-12 && sol.exceptions().len() <= 1;
    }
    Check::new(
        "fixed_dist_structure",
        ok,
        format!("{n} random three-atom laws"),
    )
}

fn error_forms() -> Check {
    let p = problem_for(3.0, 6);
    let rates = StateRates {
        a: (0..p.n_states)
            .map(|i| 2.0 + 3.0 * (i as f64).cos().abs())
            .collect(),
    };
    let e5 = error_eq5(&p, &rates).unwrap_or(f64::NAN);
    let e3 = one_memory_law(&p, &rates)
        .map(|law| error_eq3(&law, p.threshold, 0.0))
        .unwrap_or(f64::NAN);
    let d = (e3 - e5).abs();
    Check::new(
        "error_forms_agree",
        d < 1e-9,
        format!("|difference| {d:.2e}"),
    )
}

/// Runs every check; independent checks run in parallel.
pub fn run_battery() -> Vec<Check> {
    let checks: [fn() -> Check; 8] = [
        t_star,
        theta,
        lower_bound_grid,
        lower_bound_optimizer,
        stationary_points,
        zero_for_zero,
        fixed_dist,
        error_forms,
    ];
    checks.par_iter().map(|c| c()).collect()
}
