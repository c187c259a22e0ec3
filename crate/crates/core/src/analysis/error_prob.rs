use alloc::vec::Vec;

use crate::channel::ChannelModel;
use crate::error::{check, Error, Result};
use crate::special::{poisson_pmf, poisson_tails};
use crate::transmitter::LevelTable;

/// Largest bit history enumerated exactly by [`stationary_law`].
pub const MAX_ENUMERATION_BITS: u32 = 22;

/// One point of a joint law of interference `I` and the signal `π_0 x`
/// received when the current bit is `1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub prob: f64,
    pub interference: f64,
    pub signal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceLaw {
    atoms: Vec<Atom>,
}

impl InterferenceLaw {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let mut total = 0.0;
        for a in &atoms {
            check(a.prob >= 0.0, "prob", a.prob)?;
            check(
                a.interference >= 0.0 && a.interference.is_finite(),
                "interference",
                a.interference,
            )?;
            check(a.signal >= 0.0 && a.signal.is_finite(), "signal", a.signal)?;
            total += a.prob;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Unnormalized { total });
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Mean interference.
    pub fn mean_interference(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.interference).sum()
    }
}

/// Bit error probability of a threshold decoder averaged over the law:
/// `E[½ P(Poi(I+λ0) > T) + ½ P(Poi(I+λ0+π0 f) ≤ T)]`.
pub fn error_eq3(law: &InterferenceLaw, threshold: u32, lambda0: f64) -> f64 {
    law.atoms
        .iter()
        .map(|a| {
            let base = a.interference + lambda0;
            let zero_err = poisson_tails(base, threshold).1;
            let one_err = poisson_tails(base + a.signal, threshold).0;
            a.prob * 0.5 * (zero_err + one_err)
        })
        .sum()
}

/// [`error_eq3`] for a discrete interference distribution `(prob, I)` and a
/// transmission function `f(I)`.
pub fn error_eq3_fn(
    dist: &[(f64, f64)],
    f: impl Fn(f64) -> f64,
    threshold: u32,
    pi0: f64,
    lambda0: f64,
) -> Result<f64> {
    check(lambda0 >= 0.0, "lambda0", lambda0)?;
    let atoms = dist
        .iter()
        .map(|&(prob, interference)| {
            let x = f(interference);
            check(x >= 0.0 && x.is_finite(), "f(I)", x)?;
            Ok(Atom {
                prob,
                interference,
                signal: pi0 * x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(error_eq3(&InterferenceLaw::new(atoms)?, threshold, lambda0))
}

/// Exact stationary law of a level-table transmitter: every history of the
/// last `M_c + M` bits, each with probability `2^{-(M_c+M)}`.
pub fn stationary_law(channel: &ChannelModel, table: &LevelTable) -> Result<InterferenceLaw> {
    let mc = channel.memory() as u32;
    let m = table.memory_bits();
    let bits = mc + m;
    if bits > MAX_ENUMERATION_BITS {
        return Err(Error::TooLarge {
            what: "stationary enumeration",
            bits,
            limit: MAX_ENUMERATION_BITS,
        });
    }
    let pi = channel.pi();
    let levels = table.levels();
    let mask = (1usize << m) - 1;
    let count = 1usize << bits;
    let prob = 1.0 / count as f64;
    let atoms = (0..count)
        .map(|h| {
            // bit (lag - 1) of h is b_{i-lag}; the memory state of slot i-k is (h >> k) & mask
            let mut interference = 0.0;
            for (k, &p) in pi.iter().enumerate().skip(1) {
                if (h >> (k - 1)) & 1 == 1 {
                    interference += p * levels[(h >> k) & mask];
                }
            }
            Atom {
                prob,
                interference,
                signal: pi[0] * levels[h & mask],
            }
        })
        .collect();
    Ok(InterferenceLaw { atoms })
}

/// Reduced two-state error: the `a_1`, `a_2` terms of the one-memory error
/// with `P_0 = ½`, `P_1 = ¼`, `P_2 = ⅛`.
pub fn p_reduced(a1: f64, a2: f64, r: f64, threshold: u32) -> f64 {
    let t = threshold;
    0.25 * poisson_tails(r * a1, t).0
        + 0.125 * poisson_tails(a1 + r * a2, t).0
        + 0.125 * poisson_tails(a1, t).1
        + 0.0625 * poisson_tails(a2, t).1
}

/// Gradient of [`p_reduced`] in `(a1, a2)`.
pub fn p_reduced_gradient(a1: f64, a2: f64, r: f64, threshold: u32) -> [f64; 2] {
    let g = |x: f64| poisson_pmf(x, threshold);
    let mixed = g(a1 + r * a2);
    [
        -0.25 * r * g(r * a1) - 0.125 * mixed + 0.125 * g(a1),
        -0.125 * r * mixed + 0.0625 * g(a2),
    ]
}
