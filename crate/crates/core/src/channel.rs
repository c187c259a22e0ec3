//! Diffusion channel: hitting probabilities, the Poisson superposition output
//! law and interference bookkeeping.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{check, Error, Result};
use crate::special::{exp_times_normal_sf, normal_cdf};

/// Physical description of a 1-D drifted diffusion link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Transmitter to receiver distance (μm).
    pub distance: f64,
    /// Diffusion coefficient (μm²/s).
    pub diffusion_coeff: f64,
    /// Drift velocity towards the receiver (μm/s).
    pub drift_velocity: f64,
    /// Symbol duration (s).
    pub slot_duration: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        check(
            self.distance > 0.0 && self.distance.is_finite(),
            "distance",
            self.distance,
        )?;
        check(
            self.diffusion_coeff > 0.0 && self.diffusion_coeff.is_finite(),
            "diffusion_coeff",
            self.diffusion_coeff,
        )?;
        check(
            self.slot_duration > 0.0 && self.slot_duration.is_finite(),
            "slot_duration",
            self.slot_duration,
        )?;
        check(
            self.drift_velocity >= 0.0 && self.drift_velocity.is_finite(),
            "drift_velocity",
            self.drift_velocity,
        )
    }

    /// Mean of the inverse-Gaussian first-arrival time, `d / v`.
    pub fn mean_arrival(&self) -> f64 {
        self.distance / self.drift_velocity
    }

    /// Shape parameter `d² / (2D)`.
    pub fn shape(&self) -> f64 {
        self.distance * self.distance / (2.0 * self.diffusion_coeff)
    }

    /// First-arrival CDF at time `t`.
    pub fn arrival_cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mu = self.mean_arrival();
        let shape = self.shape();
        let s = libm::sqrt(shape / t);
        let near = normal_cdf(s * (t / mu - 1.0));
        let far = exp_times_normal_sf(2.0 * shape / mu, s * (t / mu + 1.0));
        (near + far).min(1.0)
    }
}

/// Hitting probabilities `π_0..π_{M_c}` plus the background noise rate.
///
/// `π_k = 0` is implied for every lag beyond the stored vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pi: Vec<f64>,
    lambda0: f64,
}

impl ChannelModel {
    pub fn new(pi: Vec<f64>, lambda0: f64) -> Result<Self> {
        check(!pi.is_empty(), "pi.len", 0.0)?;
        for &p in &pi {
            check((0.0..=1.0).contains(&p), "pi_k", p)?;
        }
        check(pi[0] > 0.0, "pi_0", pi[0])?;
        let total: f64 = pi.iter().sum();
        check(total <= 1.0 + 1e-12, "sum(pi)", total)?;
        check(lambda0 >= 0.0 && lambda0.is_finite(), "lambda0", lambda0)?;
        Ok(Self { pi, lambda0 })
    }

    /// Hitting probabilities as increments of the inverse-Gaussian CDF over
    /// slot boundaries. Mass past `memory` slots is dropped, not renormalized.
    pub fn from_physics(params: &PhysicalParams, memory: usize) -> Result<Self> {
        params.validate()?;
        if params.drift_velocity == 0.0 {
            return Err(Error::UnsupportedRegime(
                "zero drift: first-arrival time has no finite mean",
            ));
        }
        let mut pi = Vec::with_capacity(memory + 1);
        let mut prev = 0.0;
        for k in 0..=memory {
            let next = params.arrival_cdf((k as f64 + 1.0) * params.slot_duration);
            pi.push((next - prev).max(0.0));
            prev = next;
        }
        if pi[0] <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "pi_0",
                value: pi[0],
            });
        }
        Self::new(pi, 0.0)
    }

    pub fn with_noise(mut self, lambda0: f64) -> Result<Self> {
        check(lambda0 >= 0.0 && lambda0.is_finite(), "lambda0", lambda0)?;
        self.lambda0 = lambda0;
        Ok(self)
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn pi0(&self) -> f64 {
        self.pi[0]
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// Channel memory `M_c`.
    pub fn memory(&self) -> usize {
        self.pi.len() - 1
    }

    /// `Σ_{k≥1} π_k`, the total ISI weight.
    pub fn isi_mass(&self) -> f64 {
        self.pi[1..].iter().sum()
    }

    pub fn initial_state(&self) -> SlotState {
        SlotState {
            pending: core::iter::repeat_n(0.0, self.memory()).collect(),
            current_index: 0,
        }
    }

    /// Expected count `π_0 x + I_i + λ_0` in the current slot.
    pub fn output_rate(&self, state: &SlotState, x: f64) -> Result<f64> {
        check(x >= 0.0 && x.is_finite(), "x", x)?;
        Ok(self.pi[0] * x + state.interference() + self.lambda0)
    }

    /// Returns the state for the next slot after transmitting `x` now.
    pub fn advance(&self, state: &SlotState, x: f64) -> Result<SlotState> {
        let mut next = state.clone();
        self.advance_in_place(&mut next, x)?;
        Ok(next)
    }

    pub fn advance_in_place(&self, state: &mut SlotState, x: f64) -> Result<()> {
        check(x >= 0.0 && x.is_finite(), "x", x)?;
        if state.pending.pop_front().is_some() {
            state.pending.push_back(0.0);
            for (slot, &p) in state.pending.iter_mut().zip(&self.pi[1..]) {
                *slot += p * x;
            }
        }
        state.current_index += 1;
        Ok(())
    }
}

/// Rates already committed to the current and following slots.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    /// `pending[j]` is the expected ISI arrival rate in slot `current_index + j`.
    pub pending: VecDeque<f64>,
    pub current_index: u64,
}

impl SlotState {
    /// Interference `I_i` seen by the current slot.
    pub fn interference(&self) -> f64 {
        self.pending.front().copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model(pi: &[f64], lambda0: f64) -> ChannelModel {
        ChannelModel::new(pi.to_vec(), lambda0).unwrap()
    }

    #[test]
    fn long_slot_captures_nearly_all_mass() {
        let p = PhysicalParams {
            distance: 4.0,
            diffusion_coeff: 1.0,
            drift_velocity: 1.0,
            slot_duration: 200.0,
        };
        let ch = ChannelModel::from_physics(&p, 0).unwrap();
        assert!(ch.pi0() >= 1.0 - 1e-6);
    }

    #[test]
    fn physics_errors() {
        let good = PhysicalParams {
            distance: 4.0,
            diffusion_coeff: 1.0,
            drift_velocity: 1.0,
            slot_duration: 1.0,
        };
        for bad in [
            PhysicalParams {
                distance: 0.0,
                ..good
            },
            PhysicalParams {
                diffusion_coeff: -1.0,
                ..good
            },
            PhysicalParams {
                slot_duration: 0.0,
                ..good
            },
            PhysicalParams {
                drift_velocity: -0.5,
                ..good
            },
        ] {
            assert!(matches!(
                ChannelModel::from_physics(&bad, 3),
                Err(Error::InvalidParameter { .. })
            ));
        }
        let still = PhysicalParams {
            drift_velocity: 0.0,
            ..good
        };
        assert!(matches!(
            ChannelModel::from_physics(&still, 3),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn rejects_invalid_vectors() {
        assert!(ChannelModel::new(vec![], 0.0).is_err());
        assert!(ChannelModel::new(vec![0.0, 0.5], 0.0).is_err());
        assert!(ChannelModel::new(vec![0.7, 0.5], 0.0).is_err());
        assert!(ChannelModel::new(vec![0.5], -1.0).is_err());
    }

    #[test]
    fn output_rate_linear_form() {
        let ch = model(&[0.4, 0.2], 1.0);
        let mut st = ch.initial_state();
        st.pending[0] = 2.0;
        assert_relative_eq!(ch.output_rate(&st, 10.0).unwrap(), 7.0);
        let quiet = model(&[0.4], 0.0);
        assert_eq!(quiet.output_rate(&quiet.initial_state(), 0.0).unwrap(), 0.0);
        assert!(ch.output_rate(&st, -1.0).is_err());
    }

    #[test]
    fn single_pulse_unrolls_to_pi() {
        let pi = [0.3, 0.25, 0.15, 0.1, 0.05];
        let ch = model(&pi, 0.0);
        let level = 40.0;
        let mut st = ch.advance(&ch.initial_state(), level).unwrap();
        for k in 1..pi.len() + 3 {
            let want = pi.get(k).copied().unwrap_or(0.0) * level;
            assert_relative_eq!(st.interference(), want, max_relative = 1e-15);
            let before: f64 = st.pending.iter().sum();
            st = ch.advance(&st, 0.0).unwrap();
            let after: f64 = st.pending.iter().sum();
            assert_relative_eq!(before - after, want, epsilon = 1e-12);
        }
        assert_eq!(st.current_index, pi.len() as u64 + 3);
    }

    #[test]
    fn memoryless_channel_has_no_interference() {
        let ch = model(&[0.6], 2.0);
        let st = ch.advance(&ch.initial_state(), 100.0).unwrap();
        assert_eq!(st.interference(), 0.0);
        assert_eq!(ch.output_rate(&st, 5.0).unwrap(), 5.0 * 0.6 + 2.0);
    }

    // Tiny xorshift so the direct-summation oracle does not share code with the model.
    fn inputs(n: usize, mut seed: u64) -> Vec<f64> {
        (0..n)
            .map(|_| {
                seed ^= seed << 13;
                seed ^= seed >> 7;
                seed ^= seed << 17;
                if seed & 1 == 0 {
                    0.0
                } else {
                    (seed >> 11) as f64 / (1u64 << 53) as f64 * 200.0
                }
            })
            .collect()
    }

    #[test]
    fn interference_matches_direct_summation() {
        let pi = [
            0.31, 0.2, 0.12, 0.08, 0.05, 0.03, 0.02, 0.015, 0.01, 0.007, 0.005,
        ];
        let ch = model(&pi, 0.0);
        let xs = inputs(10_000, 0x9e37_79b9_7f4a_7c15);
        let mut st = ch.initial_state();
        for (i, &x) in xs.iter().enumerate() {
            let mut direct = 0.0;
            for k in 1..pi.len() {
                if i >= k {
                    direct += pi[k] * xs[i - k];
                }
            }
            let got = st.interference();
            assert!(
                (got - direct).abs() <= 1e-12 * direct.abs().max(1e-300),
                "slot {i}: {got} vs {direct}"
            );
            // history replay of the full received rate
            let full = ch.output_rate(&st, x).unwrap();
            assert!((full - (direct + pi[0] * x)).abs() <= 1e-12 * full.max(1.0));
            ch.advance_in_place(&mut st, x).unwrap();
        }
    }

    #[test]
    fn conservation_over_flushed_run() {
        let pi = [0.4, 0.2, 0.1, 0.05];
        let ch = model(&pi, 0.0);
        let mut xs = inputs(5_000, 42);
        xs.extend(core::iter::repeat_n(0.0, ch.memory()));
        let mut st = ch.initial_state();
        let mut received = 0.0;
        for &x in &xs {
            received += pi[0] * x + st.interference();
            ch.advance_in_place(&mut st, x).unwrap();
        }
        let sent: f64 = xs.iter().sum();
        let mass: f64 = pi.iter().sum();
        assert_relative_eq!(received, mass * sent, max_relative = 1e-9);
    }

    #[test]
    fn pi_matches_quadrature_of_arrival_density() {
        // d = 4 μm, D = 1 μm²/s, v = 1 μm/s, T_s = 1 s, 11 taps
        let p = PhysicalParams {
            distance: 4.0,
            diffusion_coeff: 1.0,
            drift_velocity: 1.0,
            slot_duration: 1.0,
        };
        let ch = ChannelModel::from_physics(&p, 10).unwrap();
        let (mu, shape) = (4.0_f64, 8.0_f64);
        let density = |t: f64| {
            if t <= 0.0 {
                0.0
            } else {
                (shape / (2.0 * core::f64::consts::PI * t * t * t)).sqrt()
                    * (-shape * (t - mu) * (t - mu) / (2.0 * mu * mu * t)).exp()
            }
        };
        for (k, &got) in ch.pi().iter().enumerate() {
            // composite Simpson with 20k panels per slot
            let (a, b) = (k as f64, k as f64 + 1.0);
            let n = 20_000;
            let h = (b - a) / n as f64;
            let mut s = density(a) + density(b);
            for j in 1..n {
                let w = if j % 2 == 1 { 4.0 } else { 2.0 };
                s += w * density(a + j as f64 * h);
            }
            let want = s * h / 3.0;
            assert!((got - want).abs() < 1e-9, "pi_{k}: {got} vs {want}");
        }
        // frozen values from an independent arbitrary-precision integration
        let frozen = [
            0.028_056_840_414_719_936,
            0.204_300_348_777_123_1,
            0.225_666_150_958_617_85,
        ];
        for (got, want) in ch.pi().iter().zip(frozen) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn physics_yield_subprobability_vectors(
            d in 0.1f64..50.0, diff in 0.01f64..200.0, v in 0.01f64..20.0, ts in 0.01f64..20.0, m in 0usize..30
        ) {
            let p = PhysicalParams { distance: d, diffusion_coeff: diff, drift_velocity: v, slot_duration: ts };
            if let Ok(ch) = ChannelModel::from_physics(&p, m) {
                prop_assert_eq!(ch.pi().len(), m + 1);
                prop_assert!(ch.pi().iter().all(|&x| (0.0..=1.0).contains(&x)));
                prop_assert!(ch.pi().iter().sum::<f64>() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn interference_is_linear_in_inputs(seed in any::<u64>()) {
            let ch = model(&[0.35, 0.2, 0.1, 0.05, 0.02], 0.0);
            let xs = inputs(300, seed | 1);
            let (mut a, mut b) = (ch.initial_state(), ch.initial_state());
            for &x in &xs {
                prop_assert_eq!(2.0 * a.interference(), b.interference());
                ch.advance_in_place(&mut a, x).unwrap();
                ch.advance_in_place(&mut b, 2.0 * x).unwrap();
            }
        }
    }
}
