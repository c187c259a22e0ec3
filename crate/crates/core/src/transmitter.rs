//! Memory-limited adaptive-rate transmitter, with the genie and OOK baselines.
//!
//! For bit `1` in memory state `s = (b_{i-1}, …, b_{i-M})` the adaptive
//! transmitter releases at rate `L_s`, chosen so that the expected received
//! rate `π_0 L_s + E[I_i | s]` equals the target `C` in every state. Bit `0`
//! always releases nothing.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelModel;
use crate::error::{check, Error, Result};

/// Largest memory supported by [`MemoryState`].
pub const MAX_MEMORY_BITS: u32 = 20;
/// Largest memory for which the dense level system is solved.
pub const MAX_SOLVE_BITS: u32 = 10;

/// The last `M` information bits. Bit 0 of `bits` is the most recent one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemoryState {
    bits: u32,
    memory_bits: u32,
}

impl MemoryState {
    pub fn new(memory_bits: u32) -> Result<Self> {
        check(
            memory_bits <= MAX_MEMORY_BITS,
            "memory_bits",
            f64::from(memory_bits),
        )?;
        Ok(Self {
            bits: 0,
            memory_bits,
        })
    }

    pub fn from_index(memory_bits: u32, index: u32) -> Result<Self> {
        let mut s = Self::new(memory_bits)?;
        check(index < s.n_states(), "state index", f64::from(index))?;
        s.bits = index;
        Ok(s)
    }

    pub fn index(&self) -> u32 {
        self.bits
    }

    pub fn memory_bits(&self) -> u32 {
        self.memory_bits
    }

    pub fn n_states(&self) -> u32 {
        1 << self.memory_bits
    }

    /// `b_{i-lag}` for `lag` in `1..=M`.
    pub fn bit(&self, lag: u32) -> bool {
        (self.bits >> (lag - 1)) & 1 == 1
    }

    /// Shifts in `bit` and drops the oldest one.
    pub fn update(&mut self, bit: bool) {
        if self.memory_bits > 0 {
            self.bits = ((self.bits << 1) | u32::from(bit)) & (self.n_states() - 1);
        }
    }

    /// Bits as text, most recent first; empty for a memoryless transmitter.
    pub fn label(&self) -> String {
        (1..=self.memory_bits)
            .map(|lag| if self.bit(lag) { '1' } else { '0' })
            .collect()
    }

    pub fn parse(label: &str) -> Result<Self> {
        let memory_bits = label.len() as u32;
        let mut s = Self::new(memory_bits)?;
        for (j, c) in label.chars().enumerate() {
            match c {
                '0' => {}
                '1' => s.bits |= 1 << j,
                _ => {
                    return Err(Error::InvalidParameter {
                        name: "state_bits",
                        value: f64::NAN,
                    })
                }
            }
        }
        Ok(s)
    }
}

impl fmt::Display for MemoryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S[{}]", self.label())
    }
}

/// Per-state release rates for bit `1` and the received-rate target they were solved for.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTable {
    memory_bits: u32,
    levels: Vec<f64>,
    clamped: Vec<bool>,
    target_c: f64,
}

impl LevelTable {
    pub fn from_parts(
        memory_bits: u32,
        levels: Vec<f64>,
        clamped: Vec<bool>,
        target_c: f64,
    ) -> Result<Self> {
        check(
            memory_bits <= MAX_MEMORY_BITS,
            "memory_bits",
            f64::from(memory_bits),
        )?;
        check(
            levels.len() == 1 << memory_bits,
            "levels.len",
            levels.len() as f64,
        )?;
        check(
            clamped.len() == levels.len(),
            "clamped.len",
            clamped.len() as f64,
        )?;
        for &l in &levels {
            check(l >= 0.0 && l.is_finite(), "level", l)?;
        }
        Ok(Self {
            memory_bits,
            levels,
            clamped,
            target_c,
        })
    }

    /// Single-state table: a plain on-off keyed level.
    pub fn constant(level: f64) -> Result<Self> {
        Self::from_parts(0, vec![level], vec![false], f64::NAN)
    }

    pub fn memory_bits(&self) -> u32 {
        self.memory_bits
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, state: MemoryState) -> f64 {
        self.levels[state.index() as usize]
    }

    pub fn clamped(&self) -> &[bool] {
        &self.clamped
    }

    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }

    /// Target received rate `C`; NaN for tables not produced by the solver.
    pub fn target_c(&self) -> f64 {
        self.target_c
    }

    /// Stationary mean release rate `½ · 2^{-M} Σ_s L_s`.
    pub fn mean_rate(&self) -> f64 {
        0.5 * self.levels.iter().sum::<f64>() / self.levels.len() as f64
    }

    fn scaled(&self, factor: f64, target_c: f64) -> Self {
        Self {
            memory_bits: self.memory_bits,
            levels: self.levels.iter().map(|l| l * factor).collect(),
            clamped: self.clamped.clone(),
            target_c,
        }
    }
}

/// Visits the coefficients of `E[I_i | s] = Σ_t coeff(s, t) · L_t`.
fn isi_coefficients(
    channel: &ChannelModel,
    memory_bits: u32,
    mut visit: impl FnMut(usize, usize, f64),
) {
    let m = memory_bits as usize;
    let n = 1usize << m;
    let pi = channel.pi();
    // lags beyond the window: bit and state unknown, E[X] = 2^{-(M+1)} Σ L
    let tail: f64 = pi.iter().skip(m + 1).sum();
    for s in 0..n {
        #[allow(clippy::needless_range_loop)]
        for k in 1..pi.len().min(m + 1) {
            if (s >> (k - 1)) & 1 == 0 || pi[k] == 0.0 {
                continue;
            }
            // state of slot i-k: lags k+1..k+M; those up to M are known, k of them are not
            let known = s >> k;
            let weight = pi[k] / (1u64 << k) as f64;
            for unknown in 0..1usize << k {
                visit(s, known | (unknown << (m - k)), weight);
            }
        }
        if tail > 0.0 {
            let weight = tail / (2 * n) as f64;
            for t in 0..n {
                visit(s, t, weight);
            }
        }
    }
}

/// `E[I_i | s]` for every memory state under the given table.
pub fn conditional_interference(channel: &ChannelModel, table: &LevelTable) -> Vec<f64> {
    let mut out = vec![0.0; table.levels.len()];
    isi_coefficients(channel, table.memory_bits, |s, t, w| {
        out[s] += w * table.levels[t]
    });
    out
}

/// Solves `π_0 L_s + E[I_i | s] = C` for all `2^M` memory states.
///
/// Negative solutions are clamped to zero and flagged; the target is then met
/// only approximately in the affected states.
pub fn solve_levels(channel: &ChannelModel, memory_bits: u32, target_c: f64) -> Result<LevelTable> {
    check(target_c > 0.0 && target_c.is_finite(), "target_c", target_c)?;
    if memory_bits > MAX_SOLVE_BITS {
        return Err(Error::TooLarge {
            what: "dense level system",
            bits: memory_bits,
            limit: MAX_SOLVE_BITS,
        });
    }
    let n = 1usize << memory_bits;
    let pi0 = channel.pi0();
    if channel.memory() == 0 {
        return LevelTable::from_parts(
            memory_bits,
            vec![target_c / pi0; n],
            vec![false; n],
            target_c,
        );
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        a[(s, s)] = pi0;
    }
    isi_coefficients(channel, memory_bits, |s, t, w| a[(s, t)] += w);
    let lu = a.lu();
    let u = lu.u();
    let scale = u.diagonal().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    if let Some((col, _)) = u
        .diagonal()
        .iter()
        .enumerate()
        .find(|(_, d)| d.abs() <= scale * 1e-13)
    {
        return Err(Error::SingularSystem {
            memory_bits,
            state: col as u32,
        });
    }
    let rhs = DVector::from_element(n, target_c);
    let sol = lu.solve(&rhs).ok_or(Error::SingularSystem {
        memory_bits,
        state: 0,
    })?;
    let mut clamped = vec![false; n];
    let levels = sol
        .iter()
        .zip(clamped.iter_mut())
        .map(|(&l, c)| {
            if l < 0.0 {
                *c = true;
                0.0
            } else {
                l
            }
        })
        .collect();
    LevelTable::from_parts(memory_bits, levels, clamped, target_c)
}

/// How a power budget `K` is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerConvention {
    /// Average molecules released per slot.
    #[default]
    PerSlot,
    /// Average molecules released per transmitted `1`.
    PerOne,
}

impl PowerConvention {
    /// Converts a budget in this convention to molecules per slot.
    pub fn per_slot(self, k: f64) -> f64 {
        match self {
            PowerConvention::PerSlot => k,
            PowerConvention::PerOne => 0.5 * k,
        }
    }
}

/// Finds the target `C` whose level table has stationary mean release rate
/// `k_per_slot` (relative tolerance 1e-6) and returns that table.
pub fn calibrate_power(
    channel: &ChannelModel,
    memory_bits: u32,
    k_per_slot: f64,
) -> Result<LevelTable> {
    check(
        k_per_slot > 0.0 && k_per_slot.is_finite(),
        "power",
        k_per_slot,
    )?;
    // The system is homogeneous in (C, L) and clamping commutes with positive
    // scaling, so the mean rate at any C is C times the mean at C = 1.
    let unit = solve_levels(channel, memory_bits, 1.0)?;
    let mean_at = |c: f64| c * unit.mean_rate();
    let mut low = 0.0;
    let mut high = k_per_slot * (2.0 * channel.pi0() + channel.isi_mass()).max(1e-6);
    let mut doublings = 0;
    while mean_at(high) < k_per_slot {
        low = high;
        high *= 2.0;
        doublings += 1;
        if doublings > 200 || !high.is_finite() {
            return Err(Error::Calibration {
                target: k_per_slot,
                low,
                high,
                mean_at_high: mean_at(high),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (low + high);
        if mean_at(mid) < k_per_slot {
            low = mid;
        } else {
            high = mid;
        }
        if (high - low) <= 1e-15 * high {
            break;
        }
    }
    let c = 0.5 * (low + high);
    let table = unit.scaled(c, c);
    if (table.mean_rate() - k_per_slot).abs() > 1e-6 * k_per_slot {
        return Err(Error::Calibration {
            target: k_per_slot,
            low,
            high,
            mean_at_high: mean_at(high),
        });
    }
    Ok(table)
}

/// Genie target `C = K (2π_0 + Σ_{k≥1} π_k)` for per-slot power `K`, exact
/// whenever `(C - I)/π_0` never goes negative.
pub fn genie_target_unclamped(channel: &ChannelModel, k_per_slot: f64) -> f64 {
    k_per_slot * (2.0 * channel.pi0() + channel.isi_mass())
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransmitterKind {
    /// Finite-memory level table (`M = 0` is a single constant level).
    Adaptive(LevelTable),
    /// Observes the exact interference and sends `max(0, (C - I)/π_0)`.
    Genie { target_c: f64, pi0: f64 },
    /// Constant level for every `1`.
    Ook { level: f64 },
}

/// A running transmitter: its kind plus the bit history it has seen.
#[derive(Debug, Clone)]
pub struct Transmitter {
    kind: TransmitterKind,
    memory: MemoryState,
}

impl Transmitter {
    pub fn new(kind: TransmitterKind) -> Result<Self> {
        let memory_bits = match &kind {
            TransmitterKind::Adaptive(t) => t.memory_bits(),
            TransmitterKind::Genie { target_c, pi0 } => {
                check(target_c.is_finite(), "target_c", *target_c)?;
                check(*pi0 > 0.0, "pi0", *pi0)?;
                0
            }
            TransmitterKind::Ook { level } => {
                check(*level >= 0.0 && level.is_finite(), "level", *level)?;
                0
            }
        };
        Ok(Self {
            kind,
            memory: MemoryState::new(memory_bits)?,
        })
    }

    pub fn kind(&self) -> &TransmitterKind {
        &self.kind
    }

    pub fn state(&self) -> MemoryState {
        self.memory
    }

    /// Release rate for `bit`. `observation` is the current interference rate
    /// and is only consulted by the genie.
    pub fn next_rate(&mut self, bit: bool, observation: Option<f64>) -> Result<f64> {
        let rate = match &self.kind {
            TransmitterKind::Genie { target_c, pi0 } => {
                let i = observation.ok_or(Error::MissingObservation)?;
                if bit {
                    ((target_c - i) / pi0).max(0.0)
                } else {
                    0.0
                }
            }
            _ if !bit => 0.0,
            TransmitterKind::Adaptive(table) => table.level(self.memory),
            TransmitterKind::Ook { level } => *level,
        };
        self.memory.update(bit);
        Ok(rate)
    }
}
