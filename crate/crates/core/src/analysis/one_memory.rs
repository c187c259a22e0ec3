//! The channel with one symbol of memory (`π_0 > π_1`, `π_k = 0` for `k ≥ 2`).
//!
//! A `0` bit resets the transmitter to `S'_0`; `i` consecutive ones lead to
//! `S'_i`, visited with probability `P_i = 2^{-(i+1)}`. `a_i` is the
//! interference rate in `S'_i` and `a_0 = 0`. The chain is truncated at `N`
//! by folding every state past `N` into `S'_N` (probability `2^{-N}`, successor
//! rate `a_{N+1} := a_N`), which keeps the truncated law exactly normalized.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::error_prob::{p_reduced, p_reduced_gradient, Atom, InterferenceLaw};
use super::pg::{minimize, Feasible, Objective, PgOptions, PgOutcome};
use crate::error::{check, Result};
use crate::special::{poisson_pmf, poisson_tails};

pub const DEFAULT_STATES: usize = 24;
const RANDOM_STARTS: usize = 20;
const DP_GRID: usize = 121;
const DP_BISECTIONS: usize = 40;
const EXPLORE_ITERATIONS: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneMemProblem {
    /// `π_0 / π_1`.
    pub r: f64,
    pub threshold: u32,
    /// Power budget `K` in `Σ_i P_i a_{i+1} / π_1 = K`.
    pub power: f64,
    pub pi1: f64,
    /// Truncation `N` of the state chain.
    pub n_states: usize,
}

impl OneMemProblem {
    pub fn new(r: f64, threshold: u32, power: f64, pi1: f64) -> Result<Self> {
        let p = Self {
            r,
            threshold,
            power,
            pi1,
            n_states: DEFAULT_STATES,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_states(mut self, n_states: usize) -> Result<Self> {
        self.n_states = n_states;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        check(self.r > 1.0 && self.r.is_finite(), "r", self.r)?;
        check(
            self.pi1 > 0.0 && self.pi1 * (self.r + 1.0) <= 1.0 + 1e-12,
            "pi1",
            self.pi1,
        )?;
        check(
            self.power >= 0.0 && self.power.is_finite(),
            "power",
            self.power,
        )?;
        check(self.n_states >= 2, "n_states", self.n_states as f64)
    }

    pub fn pi0(&self) -> f64 {
        self.r * self.pi1
    }

    /// Folded state probabilities `P_0..P_N`.
    pub fn state_probs(&self) -> Vec<f64> {
        let n = self.n_states;
        let mut p: Vec<f64> = (0..n).map(|i| libm::ldexp(1.0, -(i as i32 + 1))).collect();
        p.push(libm::ldexp(1.0, -(n as i32)));
        p
    }

    /// Probability mass of the states beyond `N` that the fold merges into `S'_N`.
    pub fn truncation_tail(&self) -> f64 {
        libm::ldexp(1.0, -(self.n_states as i32 + 1))
    }

    /// Weights `w_j` of `a_j` in the power constraint `Σ_j w_j a_j = π_1 K`.
    fn constraint_weights(&self) -> Vec<f64> {
        let p = self.state_probs();
        let n = self.n_states;
        let mut w: Vec<f64> = p[..n].to_vec();
        w[n - 1] += p[n];
        w
    }

    fn budget(&self) -> f64 {
        self.pi1 * self.power
    }
}

/// Interference rates `a_1..a_N` (`a_0 = 0` is implicit).
#[derive(Debug, Clone, PartialEq)]
pub struct StateRates {
    pub a: Vec<f64>,
}

impl StateRates {
    pub fn zeros(n: usize) -> Self {
        Self { a: vec![0.0; n] }
    }

    /// `a_i` with `a_0 = 0` and `a_i = a_N` past the fold.
    pub fn get(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.a[(i - 1).min(self.a.len() - 1)]
        }
    }

    /// Release rate `f(a_i) = a_{i+1} / π_1` used in state `S'_i`.
    pub fn release_rate(&self, i: usize, pi1: f64) -> f64 {
        self.get(i + 1) / pi1
    }
}

/// How the bit-0 release is handled.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ZeroRate {
    Silent,
    Free,
    Fixed(f64),
}

struct ChainObjective {
    r: f64,
    threshold: u32,
    probs: Vec<f64>,
    /// Number of free rates `a_1..a_active`; the rest are pinned at zero.
    active: usize,
    zero: ZeroRate,
}

impl ChainObjective {
    fn new(problem: &OneMemProblem, active: usize, zero: ZeroRate) -> Self {
        Self {
            r: problem.r,
            threshold: problem.threshold,
            probs: problem.state_probs(),
            active,
            zero,
        }
    }

    fn offset(&self) -> usize {
        usize::from(self.zero == ZeroRate::Free)
    }

    /// Expands the variable vector into `a_0..a_N`.
    fn full(&self, x: &[f64]) -> Vec<f64> {
        let n = self.probs.len() - 1;
        let mut a = vec![0.0; n + 1];
        a[0] = match self.zero {
            ZeroRate::Silent => 0.0,
            ZeroRate::Free => x[0],
            ZeroRate::Fixed(v) => v,
        };
        let off = self.offset();
        a[1..=self.active].copy_from_slice(&x[off..off + self.active]);
        a
    }

    fn var_index(&self, state: usize) -> Option<usize> {
        match state {
            0 => (self.zero == ZeroRate::Free).then_some(0),
            s if s <= self.active => Some(self.offset() + s - 1),
            _ => None,
        }
    }
}

impl Objective for ChainObjective {
    fn value(&self, x: &[f64]) -> f64 {
        let a = self.full(x);
        let n = a.len() - 1;
        let t = self.threshold;
        (0..=n)
            .map(|i| {
                let next = a[(i + 1).min(n)];
                let one = poisson_tails(a[i] + self.r * next, t).0;
                let zero = poisson_tails(a[i] + self.r * a[0], t).1;
                0.5 * self.probs[i] * (one + zero)
            })
            .sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let a = self.full(x);
        let n = a.len() - 1;
        let t = self.threshold;
        let mut add = |state: usize, v: f64| {
            if let Some(j) = self.var_index(state) {
                grad[j] += v;
            }
        };
        for i in 0..=n {
            let half = 0.5 * self.probs[i];
            let next = (i + 1).min(n);
            let g1 = poisson_pmf(a[i] + self.r * a[next], t);
            add(i, -half * g1);
            add(next, -half * self.r * g1);
            let g0 = poisson_pmf(a[i] + self.r * a[0], t);
            add(i, half * g0);
            add(0, half * self.r * g0);
        }
    }
}

/// Error probability of the one-memory system for the given state rates.
pub fn error_eq5(problem: &OneMemProblem, rates: &StateRates) -> Result<f64> {
    check(
        rates.a.len() == problem.n_states,
        "rates.len",
        rates.a.len() as f64,
    )?;
    for &v in &rates.a {
        check(v >= 0.0 && v.is_finite(), "a_i", v)?;
    }
    let obj = ChainObjective::new(problem, problem.n_states, ZeroRate::Silent);
    Ok(obj.value(&rates.a))
}

/// Stationary (interference, signal) law of the one-memory system.
pub fn one_memory_law(problem: &OneMemProblem, rates: &StateRates) -> Result<InterferenceLaw> {
    let probs = problem.state_probs();
    let atoms = probs
        .iter()
        .enumerate()
        .map(|(i, &prob)| Atom {
            prob,
            interference: rates.get(i),
            signal: problem.r * rates.get((i + 1).min(problem.n_states)),
        })
        .collect();
    InterferenceLaw::new(atoms)
}

/// Multi-start settings shared by the one-memory optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiStart {
    pub random_starts: usize,
    pub seed: u64,
    pub pg: PgOptions,
}

impl Default for MultiStart {
    fn default() -> Self {
        Self {
            random_starts: RANDOM_STARTS,
            seed: 0,
            pg: PgOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneMemSolution {
    pub rates: StateRates,
    pub error: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Bit-0 interference; zero unless it was a free variable.
    pub a0: f64,
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Candidate rates `a_1..a_N` from a Lagrangian dynamic program on a grid.
///
/// Each error term couples only neighbouring states, so with a price `ν` on
/// power the relaxed problem is solved exactly on the grid by one backward
/// pass. `ν` is bisected until the grid solution meets the budget; the two
/// bracketing solutions are made feasible by scaling down or by parking the
/// remainder in the last free state.
fn lagrangian_starts(obj: &ChainObjective, weights: &[f64], budget: f64, a0: f64) -> Vec<Vec<f64>> {
    let n = obj.probs.len() - 1;
    let m = DP_GRID;
    let (r, t) = (obj.r, obj.threshold);
    let top = 4.0 * f64::from(t.max(1));
    let grid: Vec<f64> = (0..m).map(|p| top * p as f64 / (m - 1) as f64).collect();
    let miss = |x: f64| poisson_tails(x, t).0;
    let false_alarm = |x: f64| poisson_tails(x, t).1;
    let mut fm = vec![0.0; m * m];
    for p in 0..m {
        for q in 0..m {
            fm[p * m + q] = miss(grid[p] + r * grid[q]);
        }
    }
    let f0: Vec<f64> = grid.iter().map(|&g| miss(a0 + r * g)).collect();
    let fd: Vec<f64> = grid.iter().map(|&g| miss(g + r * g)).collect();
    let sv: Vec<f64> = grid.iter().map(|&g| false_alarm(g + r * a0)).collect();
    let width = |j: usize| if j <= obj.active { m } else { 1 };
    let weight = |j: usize| if j <= obj.active { weights[j - 1] } else { 0.0 };

    let path_for = |nu: f64| -> Vec<f64> {
        let mut choice = vec![0usize; n * m];
        let mut v: Vec<f64> = (0..width(n))
            .map(|p| 0.5 * obj.probs[n] * (fd[p] + sv[p]) + nu * weight(n) * grid[p])
            .collect();
        for i in (1..n).rev() {
            let half = 0.5 * obj.probs[i];
            let next = &v;
            let cur: Vec<f64> = (0..width(i))
                .map(|p| {
                    let (mut best, mut arg) = (f64::INFINITY, 0);
                    for (q, &vq) in next.iter().enumerate() {
                        let c = half * fm[p * m + q] + vq;
                        if c < best {
                            best = c;
                            arg = q;
                        }
                    }
                    choice[i * m + p] = arg;
                    half * sv[p] + nu * weight(i) * grid[p] + best
                })
                .collect();
            v = cur;
        }
        let half = 0.5 * obj.probs[0];
        let mut idx = (0..v.len())
            .min_by(|&a, &b| (half * f0[a] + v[a]).total_cmp(&(half * f0[b] + v[b])))
            .unwrap_or(0);
        let mut path = Vec::with_capacity(n);
        for i in 1..=n {
            path.push(grid[idx]);
            if i < n {
                idx = choice[i * m + idx];
            }
        }
        path
    };
    let spent = |a: &[f64]| -> f64 { (1..=obj.active).map(|j| weights[j - 1] * a[j - 1]).sum() };
    let park = |mut a: Vec<f64>| -> Vec<f64> {
        let last = obj.active;
        a[last - 1] += (budget - spent(&a)).max(0.0) / weights[last - 1];
        a
    };
    let shrink = |a: Vec<f64>| -> Vec<f64> {
        let k = budget / spent(&a);
        a.into_iter().map(|x| x * k).collect()
    };

    let free = path_for(0.0);
    if spent(&free) <= budget {
        return vec![park(free)];
    }
    let (mut lo, mut hi) = (0.0, 1e-9);
    let mut high_path = path_for(hi);
    while spent(&high_path) > budget && hi < 1e300 {
        lo = hi;
        hi *= 4.0;
        high_path = path_for(hi);
    }
    let mut low_path = free;
    for _ in 0..DP_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let path = path_for(mid);
        if spent(&path) > budget {
            lo = mid;
            low_path = path;
        } else {
            hi = mid;
            high_path = path;
        }
    }
    vec![park(high_path), shrink(low_path)]
}

/// `seeds` are extra starting points in the solver's own coordinates.
fn solve(
    problem: &OneMemProblem,
    active: usize,
    zero: ZeroRate,
    ms: &MultiStart,
    seeds: &[Vec<f64>],
) -> OneMemSolution {
    let obj = ChainObjective::new(problem, active, zero);
    let state_weights = problem.constraint_weights()[..active].to_vec();
    let mut weights = state_weights.clone();
    let mut budget = problem.budget();
    if let ZeroRate::Fixed(v) = zero {
        budget -= v;
    }
    if zero == ZeroRate::Free {
        weights.insert(0, 1.0);
    }
    let dim = weights.len();
    let finish = |x: Vec<f64>, residual: f64, converged: bool| {
        let full = obj.full(&x);
        let rates = StateRates {
            a: full[1..].to_vec(),
        };
        let error = obj.value(&x);
        OneMemSolution {
            rates,
            error,
            kkt_residual: residual,
            converged,
            a0: full[0],
        }
    };
    if budget <= 0.0 {
        return finish(vec![0.0; dim], 0.0, true);
    }
    let feasible = Feasible::Budget {
        weights: weights.clone(),
        budget,
    };
    let a0 = match zero {
        ZeroRate::Fixed(v) => v,
        _ => 0.0,
    };
    let mut starts: Vec<Vec<f64>> = seeds.to_vec();
    starts.extend(
        lagrangian_starts(&obj, &state_weights, budget, a0)
            .into_iter()
            .map(|a| {
                let mut x = a[..active].to_vec();
                if zero == ZeroRate::Free {
                    x.insert(0, 0.0);
                }
                x
            }),
    );
    let wsum: f64 = weights.iter().sum();
    starts.push(vec![budget / wsum; dim]);
    if zero == ZeroRate::Free {
        let mut half = vec![0.5 * budget / (wsum - 1.0).max(1e-300); dim];
        half[0] = 0.5 * budget;
        starts.push(half);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ms.seed);
    for _ in 0..ms.random_starts {
        let u: Vec<f64> = (0..dim).map(|_| -libm::log(unit(&mut rng))).collect();
        let mass: f64 = u.iter().zip(&weights).map(|(u, w)| u * w).sum();
        starts.push(u.iter().map(|v| v * budget / mass).collect());
    }
    // short exploratory runs from every start, then a full polish of the best
    let explore = PgOptions {
        max_iterations: ms.pg.max_iterations.min(EXPLORE_ITERATIONS),
        ..ms.pg
    };
    let mut best: Option<PgOutcome> = None;
    for x0 in &starts {
        let out = minimize(&obj, &feasible, x0, &explore);
        // strict improvement keeps the earliest start on ties
        if best.as_ref().is_none_or(|b| out.value < b.value) {
            best = Some(out);
        }
    }
    let best = best.expect("at least one start");
    let best = if best.residual <= ms.pg.tolerance {
        best
    } else {
        minimize(&obj, &feasible, &best.x, &ms.pg)
    };
    finish(best.x, best.residual, best.converged)
}

/// Minimizes the one-memory error over `a ≥ 0` under the power constraint.
pub fn minimize_eq5(problem: &OneMemProblem) -> OneMemSolution {
    minimize_eq5_with(problem, &MultiStart::default())
}

pub fn minimize_eq5_with(problem: &OneMemProblem, ms: &MultiStart) -> OneMemSolution {
    solve(problem, problem.n_states, ZeroRate::Silent, ms, &[])
}

/// Same, with only `a_1..a_active` free and the remaining rates pinned at zero.
pub fn minimize_eq5_restricted(problem: &OneMemProblem, active: usize) -> OneMemSolution {
    solve(
        problem,
        active.clamp(1, problem.n_states),
        ZeroRate::Silent,
        &MultiStart::default(),
        &[],
    )
}

/// Minimum with the bit-0 interference fixed at `a0` (it consumes budget).
pub fn minimize_with_fixed_a0(problem: &OneMemProblem, a0: f64) -> OneMemSolution {
    solve(
        problem,
        problem.n_states,
        ZeroRate::Fixed(a0),
        &MultiStart::default(),
        &[],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroForZeroReport {
    /// Optimized bit-0 interference when it is allowed to be positive.
    pub a0: f64,
    pub error_free: f64,
    pub error_silent: f64,
    /// `error_free - error_silent`; non-negative up to solver tolerance when silence is optimal.
    pub delta: f64,
    /// Error with half the budget forced into the bit-0 release.
    pub error_forced: f64,
    pub converged: bool,
}

/// Re-solves with a constant bit-0 release as an extra free variable.
pub fn verify_zero_for_zero(problem: &OneMemProblem) -> ZeroForZeroReport {
    let ms = MultiStart::default();
    let n = problem.n_states;
    let silent = solve(problem, n, ZeroRate::Silent, &ms, &[]);
    // each search is seeded with the other's answer so both compare the same basins
    let mut padded = silent.rates.a.clone();
    padded.insert(0, 0.0);
    let free = solve(problem, n, ZeroRate::Free, &ms, &[padded]);
    let silent = if free.error < silent.error {
        let retry = solve(
            problem,
            n,
            ZeroRate::Silent,
            &ms,
            core::slice::from_ref(&free.rates.a),
        );
        if retry.error < silent.error {
            retry
        } else {
            silent
        }
    } else {
        silent
    };
    let forced = solve(
        problem,
        n,
        ZeroRate::Fixed(0.5 * problem.budget()),
        &ms,
        &[],
    );
    ZeroForZeroReport {
        a0: free.a0,
        error_free: free.error,
        error_silent: silent.error,
        delta: free.error - silent.error,
        error_forced: forced.error,
        converged: free.converged && silent.converged,
    }
}

/// A local minimizer of the reduced two-state error found by descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    pub a1: f64,
    pub a2: f64,
    pub value: f64,
    pub residual: f64,
}

struct Reduced {
    r: f64,
    threshold: u32,
}

impl Objective for Reduced {
    fn value(&self, x: &[f64]) -> f64 {
        p_reduced(x[0], x[1], self.r, self.threshold)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        g.copy_from_slice(&p_reduced_gradient(x[0], x[1], self.r, self.threshold));
    }
}

/// In every coordinate a genuine stationary point has a KKT violation far
/// smaller than the partial derivative a short `step` away. Along a
/// numerically flat slope toward infinity the two are of the same size,
/// however small.
fn locally_stationary(obj: &Reduced, x: &[f64], step: f64) -> bool {
    let mut g = [0.0; 2];
    obj.gradient(x, &mut g);
    let here = g;
    (0..2).all(|j| {
        let violation = if x[j] > 0.0 {
            here[j].abs()
        } else {
            (-here[j]).max(0.0)
        };
        let nearby = [step, -step]
            .iter()
            .map(|&d| {
                let mut y = [x[0], x[1]];
                y[j] = (y[j] + d).max(0.0);
                obj.gradient(&y, &mut g);
                g[j].abs()
            })
            .fold(0.0, f64::max);
        violation <= 1e-3 * nearby
    })
}

/// Distinct minimizers of the reduced error reached from `starts` random
/// points in `[0, 3T]²`. Runs that drift past `10T` (minimum at infinity) or
/// do not converge, and points on numerically flat slopes, are dropped.
pub fn reduced_stationary_points(
    r: f64,
    threshold: u32,
    starts: usize,
    seed: u64,
) -> Vec<StationaryPoint> {
    let obj = Reduced { r, threshold };
    let span = 3.0 * f64::from(threshold.max(1));
    let far = 10.0 * f64::from(threshold.max(1));
    let opts = PgOptions {
        tolerance: 1e-13,
        accept: 1e-10,
        ..PgOptions::default()
    };
    let step = 1e-3 * f64::from(threshold.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<StationaryPoint> = Vec::new();
    for _ in 0..starts {
        let x0 = [span * unit(&mut rng), span * unit(&mut rng)];
        let out = minimize(&obj, &Feasible::Orthant, &x0, &opts);
        if !out.converged
            || out.x[0] > far
            || out.x[1] > far
            || !locally_stationary(&obj, &out.x, step)
        {
            continue;
        }
        let p = StationaryPoint {
            a1: out.x[0],
            a2: out.x[1],
            value: out.value,
            residual: out.residual,
        };
        if !found
            .iter()
            .any(|q| (q.a1 - p.a1).abs() < 1e-5 && (q.a2 - p.a2).abs() < 1e-5)
        {
            found.push(p);
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::bound::lower_bound;
    use crate::analysis::error_prob::error_eq3;
    use approx::assert_relative_eq;

    fn problem(r: f64, t: u32, k: f64) -> OneMemProblem {
        OneMemProblem::new(r, t, k, 0.15).unwrap()
    }

    #[test]
    fn silence_gives_one_half() {
        let p = problem(3.0, 5, 10.0);
        assert_eq!(error_eq5(&p, &StateRates::zeros(p.n_states)).unwrap(), 0.5);
    }

    #[test]
    fn zero_power_forces_silence() {
        let p = problem(3.0, 5, 0.0);
        let s = minimize_eq5(&p);
        assert!(s.rates.a.iter().all(|&a| a == 0.0));
        assert_eq!(s.error, 0.5);
        let z = verify_zero_for_zero(&p);
        assert_eq!(z.a0, 0.0);
    }

    #[test]
    fn validation() {
        assert!(OneMemProblem::new(1.0, 5, 1.0, 0.1).is_err());
        assert!(OneMemProblem::new(3.0, 5, -1.0, 0.1).is_err());
        assert!(OneMemProblem::new(3.0, 5, 1.0, 0.3).is_err()); // π0 + π1 > 1
        assert!(problem(3.0, 5, 1.0).with_states(1).is_err());
        let p = problem(3.0, 5, 1.0);
        assert!(error_eq5(&p, &StateRates::zeros(3)).is_err());
    }

    #[test]
    fn folded_probabilities_sum_to_one() {
        let p = problem(3.0, 5, 1.0);
        assert_relative_eq!(
            p.state_probs().iter().sum::<f64>(),
            1.0,
            max_relative = 1e-15
        );
        assert!(p.truncation_tail() < 1e-6);
        assert_relative_eq!(
            p.constraint_weights().iter().sum::<f64>(),
            1.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = problem(2.5, 6, 20.0).with_states(6).unwrap();
        for zero in [ZeroRate::Silent, ZeroRate::Free, ZeroRate::Fixed(0.7)] {
            let obj = ChainObjective::new(&p, 6, zero);
            let dim = 6 + obj.offset();
            let x: Vec<f64> = (0..dim).map(|j| 1.0 + 0.9 * j as f64).collect();
            let mut g = vec![0.0; dim];
            obj.gradient(&x, &mut g);
            for j in 0..dim {
                let h = 1e-6;
                let mut up = x.clone();
                let mut dn = x.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-8, "{zero:?} j={j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn reduced_error_never_exceeds_full_error() {
        let p = problem(3.0, 6, 10.0);
        let mut seed = 7u64;
        for _ in 0..200 {
            let a: Vec<f64> = (0..p.n_states)
                .map(|_| {
                    seed = seed
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    (seed >> 40) as f64 / (1u64 << 24) as f64 * 15.0
                })
                .collect();
            let rates = StateRates { a };
            let full = error_eq5(&p, &rates).unwrap();
            assert!(p_reduced(rates.get(1), rates.get(2), p.r, p.threshold) <= full + 1e-15);
        }
    }

    #[test]
    fn chain_error_equals_law_error() {
        let p = problem(3.5, 7, 12.0);
        let rates = StateRates {
            a: (0..p.n_states)
                .map(|i| 2.0 + (i as f64 * 0.7).sin().abs() * 5.0)
                .collect(),
        };
        let law = one_memory_law(&p, &rates).unwrap();
        let e3 = error_eq3(&law, p.threshold, 0.0);
        let e5 = error_eq5(&p, &rates).unwrap();
        assert!((e3 - e5).abs() < 1e-9);
    }

    #[test]
    fn restricted_two_rates_match_line_search() {
        // with a_3.. pinned at zero, P_0 a_1 + P_1 a_2 = π_1 K leaves one degree of freedom
        let p = problem(3.0, 5, 30.0);
        let sol = minimize_eq5_restricted(&p, 2);
        let budget = p.pi1 * p.power;
        let mut best = f64::INFINITY;
        let steps = 200_000;
        for i in 0..=steps {
            let a1 = budget / 0.5 * i as f64 / steps as f64;
            let a2 = ((budget - 0.5 * a1) / 0.25).max(0.0);
            let mut a = vec![0.0; p.n_states];
            a[0] = a1;
            a[1] = a2;
            best = best.min(error_eq5(&p, &StateRates { a }).unwrap());
        }
        assert!((sol.error - best).abs() < 1e-4, "{} vs {best}", sol.error);
        assert!(sol.error <= best + 1e-12);
    }

    #[test]
    fn minimum_respects_lower_bound_and_kkt() {
        for &(r, t) in &[(3.0, 5u32), (4.0, 7)] {
            let p = OneMemProblem::new(r, t, 40.0, 0.1).unwrap();
            let sol = minimize_eq5(&p);
            assert!(sol.converged, "residual {}", sol.kkt_residual);
            assert!(sol.kkt_residual < 1e-6);
            let lb = lower_bound(r, t).unwrap();
            assert!(lb.valid());
            assert!(lb.value <= sol.error);
            let budget: f64 = sol
                .rates
                .a
                .iter()
                .zip(p.constraint_weights())
                .map(|(a, w)| a * w)
                .sum();
            assert_relative_eq!(budget, p.pi1 * p.power, max_relative = 1e-9);
        }
    }

    #[test]
    fn silence_for_zero_is_optimal() {
        let p = OneMemProblem::new(3.0, 5, 20.0, 0.2).unwrap();
        let rep = verify_zero_for_zero(&p);
        assert!(rep.a0 < 1e-6, "a0 = {}", rep.a0);
        assert!(rep.delta >= -1e-8, "delta = {}", rep.delta);
        assert!(rep.error_forced > rep.error_silent);
    }

    #[test]
    fn reduced_minimizers_lie_inside_predicted_region() {
        let (r, t) = (4.0, 6u32);
        let pts = reduced_stationary_points(r, t, 20, 3);
        assert!(!pts.is_empty());
        let a_min = lower_bound(r, t).unwrap().a;
        for p in pts {
            assert!(p.a2 < f64::from(t) && p.a1 > a_min, "{p:?}");
        }
    }
}
