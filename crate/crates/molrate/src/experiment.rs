//! Experiment descriptions: a flat TOML record that resolves to a [`SimConfig`].

use std::path::{Path, PathBuf};

use molrate_core::receiver::best_threshold;
use molrate_core::transmitter::{calibrate_power, solve_levels, LevelTable, PowerConvention};
use molrate_core::{ChannelModel, PhysicalParams, ThresholdDecoder, TransmitterKind};
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io;
use crate::sim::{self, default_warmup, BerEstimate, SimConfig};

pub const DEFAULT_CHANNEL_MEMORY: usize = 10;
pub const DEFAULT_MEMORY_BITS: u32 = 2;
pub const DEFAULT_SLOTS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;
const GENIE_PILOT_SLOTS: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TxName {
    #[default]
    Adaptive,
    Genie,
    Ook,
}

/// How `power` is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PowerUnit {
    /// Average molecules released per slot.
    #[default]
    PerSlot,
    /// Molecules per transmitted `1`, i.e. twice the per-slot figure.
    PerOne,
}

impl From<PowerUnit> for PowerConvention {
    fn from(unit: PowerUnit) -> Self {
        match unit {
            PowerUnit::PerSlot => PowerConvention::PerSlot,
            PowerUnit::PerOne => PowerConvention::PerOne,
        }
    }
}

/// Every field is optional so that a file and command line flags can be
/// layered; [`ExperimentSpec::resolve`] applies defaults and checks consistency.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub distance: Option<f64>,
    pub diffusion_coeff: Option<f64>,
    pub drift_velocity: Option<f64>,
    pub slot_duration: Option<f64>,
    /// Hitting probabilities from a CSV file instead of physics.
    pub pi_file: Option<PathBuf>,
    pub lambda0: Option<f64>,
    /// Channel memory `M_c` when `Π` is derived from physics.
    pub channel_memory: Option<usize>,
    pub transmitter: Option<TxName>,
    pub memory_bits: Option<u32>,
    /// Average molecules released, counted per `power_convention`.
    pub power: Option<f64>,
    pub power_convention: Option<PowerUnit>,
    pub target_c: Option<f64>,
    /// Fixed decoder threshold; chosen analytically when absent.
    pub threshold: Option<u32>,
    pub slots: Option<u64>,
    pub seed: Option<u64>,
    pub warmup: Option<u64>,
    pub axis: Option<String>,
    pub values: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $(if $top.$field.is_some() { $base.$field = $top.$field.clone(); })*
    };
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// `self` with every field that `top` sets replaced by `top`'s value.
    pub fn overlaid(&self, top: &ExperimentSpec) -> Self {
        let mut out = self.clone();
        overlay!(out, top; distance, diffusion_coeff, drift_velocity, slot_duration, pi_file,
            lambda0, channel_memory, transmitter, memory_bits, power, power_convention, target_c, threshold,
            slots, seed, warmup, axis, values, output);
        out
    }

    pub fn physics(&self) -> Result<Option<PhysicalParams>> {
        let fields = [
            self.distance,
            self.diffusion_coeff,
            self.drift_velocity,
            self.slot_duration,
        ];
        match fields.iter().filter(|f| f.is_some()).count() {
            0 => Ok(None),
            4 => {
                let p = PhysicalParams {
                    distance: fields[0].unwrap_or_default(),
                    diffusion_coeff: fields[1].unwrap_or_default(),
                    drift_velocity: fields[2].unwrap_or_default(),
                    slot_duration: fields[3].unwrap_or_default(),
                };
                p.validate()?;
                Ok(Some(p))
            }
            _ => Err(Error::Config(
                "physics needs all of distance, diffusion_coeff, drift_velocity and slot_duration"
                    .into(),
            )),
        }
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        let lambda0 = self.lambda0.unwrap_or(0.0);
        let channel = match (self.physics()?, &self.pi_file) {
            (Some(p), None) => ChannelModel::from_physics(
                &p,
                self.channel_memory.unwrap_or(DEFAULT_CHANNEL_MEMORY),
            )?,
            (None, Some(path)) => {
                if self.channel_memory.is_some() {
                    return Err(Error::Config("channel_memory is implied by pi_file".into()));
                }
                ChannelModel::new(io::read_pi(path)?, 0.0)?
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either physics or pi_file, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("no channel: give physics or pi_file".into()))
            }
        };
        Ok(channel.with_noise(lambda0)?)
    }

    fn power_source(&self) -> Result<Power> {
        match (self.power, self.target_c) {
            (Some(k), None) => {
                let unit = PowerConvention::from(self.power_convention.unwrap_or_default());
                Ok(Power::PerSlot(unit.per_slot(k)))
            }
            (None, Some(c)) => Ok(Power::Target(c)),
            _ => Err(Error::Config(
                "give exactly one of power and target_c".into(),
            )),
        }
    }

    /// Builds the channel, transmitter and decoder.
    pub fn resolve(&self) -> Result<Experiment> {
        let channel = self.channel()?;
        let power = self.power_source()?;
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        let kind = self.transmitter.unwrap_or_default();
        let pi0 = channel.pi0();
        let (transmitter, table) = match kind {
            TxName::Adaptive => {
                let m = self.memory_bits.unwrap_or(DEFAULT_MEMORY_BITS);
                let table = match power {
                    Power::PerSlot(k) => calibrate_power(&channel, m, k)?,
                    Power::Target(c) => solve_levels(&channel, m, c)?,
                };
                (TransmitterKind::Adaptive(table.clone()), Some(table))
            }
            TxName::Ook => {
                let level = match power {
                    Power::PerSlot(k) => 2.0 * k,
                    Power::Target(c) => c / pi0,
                };
                (
                    TransmitterKind::Ook { level },
                    Some(LevelTable::constant(level)?),
                )
            }
            TxName::Genie => {
                let c = match power {
                    Power::PerSlot(k) => {
                        sim::calibrate_genie(&channel, k, GENIE_PILOT_SLOTS, seed)?
                    }
                    Power::Target(c) => c,
                };
                (TransmitterKind::Genie { target_c: c, pi0 }, None)
            }
        };
        let peak = match (&transmitter, &table) {
            (TransmitterKind::Genie { target_c, .. }, _) => target_c / pi0,
            (_, Some(t)) => t.levels().iter().fold(0.0f64, |m, &l| m.max(l)),
            _ => 0.0,
        };
        let t_max =
            20 + (3.0 * (peak * (pi0 + channel.isi_mass()) + channel.lambda0())).ceil() as u32;
        let (threshold, analytic_error) = match (self.threshold, &table) {
            (Some(t), _) => (t, None),
            (None, Some(table)) => {
                let (t, e) = best_threshold(&channel, table, t_max)?;
                (t, Some(e))
            }
            (None, None) => {
                let TransmitterKind::Genie { target_c, .. } = transmitter else {
                    unreachable!()
                };
                let (t, e) =
                    sim::genie_threshold(&channel, target_c, t_max, GENIE_PILOT_SLOTS, seed)?;
                (t, Some(e))
            }
        };
        let n_slots = self.slots.unwrap_or(DEFAULT_SLOTS);
        let mut config = SimConfig::new(
            channel,
            transmitter,
            ThresholdDecoder::new(threshold),
            n_slots,
            seed,
        );
        config.warmup = self
            .warmup
            .unwrap_or_else(|| default_warmup(&config.channel));
        config.validate()?;
        Ok(Experiment {
            config,
            table,
            analytic_error,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Power {
    PerSlot(f64),
    Target(f64),
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: SimConfig,
    /// Level table of table-driven transmitters (OOK as a one-state table).
    pub table: Option<LevelTable>,
    /// Analytic error at the chosen threshold when the threshold was automatic.
    pub analytic_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    SlotDuration,
    Distance,
    Power,
    Threshold,
    MemoryBits,
}

impl Axis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "slot_duration" => Ok(Axis::SlotDuration),
            "distance" => Ok(Axis::Distance),
            "power" => Ok(Axis::Power),
            "threshold" => Ok(Axis::Threshold),
            "memory_bits" => Ok(Axis::MemoryBits),
            other => Err(Error::UnknownAxis(other.to_string())),
        }
    }

    /// `spec` with this axis set to `value`.
    pub fn apply(self, spec: &ExperimentSpec, value: f64) -> Result<ExperimentSpec> {
        let mut s = spec.clone();
        let count = |what: &str| -> Result<u32> {
            if value >= 0.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX) {
                Ok(value as u32)
            } else {
                Err(Error::Config(format!(
                    "{what} must be a non-negative integer, got {value}"
                )))
            }
        };
        match self {
            Axis::SlotDuration | Axis::Distance if s.pi_file.is_some() => {
                return Err(Error::Config(
                    "physics axes need physics, not pi_file".into(),
                ));
            }
            Axis::SlotDuration => s.slot_duration = Some(value),
            Axis::Distance => s.distance = Some(value),
            Axis::Power => {
                s.power = Some(value);
                s.target_c = None;
            }
            Axis::Threshold => s.threshold = Some(count("threshold")?),
            Axis::MemoryBits => s.memory_bits = Some(count("memory_bits")?),
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub estimate: BerEstimate,
}

/// One simulation per value, in parallel; row `j` uses seed `seed + j`.
pub fn sweep(spec: &ExperimentSpec, axis: Axis, values: &[f64]) -> Result<Vec<SweepRow>> {
    let base = spec.seed.unwrap_or(DEFAULT_SEED);
    values
        .par_iter()
        .enumerate()
        .map(|(row, &v)| {
            let mut s = axis.apply(spec, v)?;
            s.seed = Some(base.wrapping_add(row as u64));
            let exp = s.resolve()?;
            Ok(SweepRow {
                axis_value: v,
                estimate: sim::run(&exp.config)?,
            })
        })
        .collect()
}
