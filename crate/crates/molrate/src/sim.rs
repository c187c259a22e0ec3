//! Monte Carlo engine: random bits through transmitter, channel and decoder.
//!
//! Each run owns one `ChaCha8Rng` seeded from the 64-bit seed; independent
//! replicas of the same configuration use distinct ChaCha stream ids of that
//! seed, so parallel results do not depend on scheduling.

use molrate_core::analysis::{Atom, InterferenceLaw, OneMemProblem, StateRates};
use molrate_core::receiver::best_threshold_for_law;
use molrate_core::transmitter::genie_target_unclamped;
use molrate_core::{ChannelModel, SlotState, ThresholdDecoder, Transmitter, TransmitterKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};

const Z95: f64 = 1.959_963_984_540_054;
const MIN_WARMUP: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub channel: ChannelModel,
    pub transmitter: TransmitterKind,
    pub decoder: ThresholdDecoder,
    pub n_slots: u64,
    pub seed: u64,
    /// Leading slots that are simulated but not scored.
    pub warmup: u64,
}

impl SimConfig {
    pub fn new(
        channel: ChannelModel,
        transmitter: TransmitterKind,
        decoder: ThresholdDecoder,
        n_slots: u64,
        seed: u64,
    ) -> Self {
        let warmup = default_warmup(&channel);
        Self {
            channel,
            transmitter,
            decoder,
            n_slots,
            seed,
            warmup,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup < self.channel.memory() as u64 {
            return Err(Error::Config(format!(
                "warmup {} is shorter than the channel memory {}",
                self.warmup,
                self.channel.memory()
            )));
        }
        if self.n_slots <= self.warmup {
            return Err(Error::Config(format!(
                "n_slots {} must exceed warmup {}",
                self.n_slots, self.warmup
            )));
        }
        Transmitter::new(self.transmitter.clone())?;
        Ok(())
    }
}

/// `max(M_c, 100)` slots.
pub fn default_warmup(channel: &ChannelModel) -> u64 {
    (channel.memory() as u64).max(MIN_WARMUP)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub trials: u64,
    pub errors: u64,
    pub ber: f64,
    /// Half-width of the 95% Wilson score interval.
    pub ci95: f64,
}

impl BerEstimate {
    pub fn from_counts(trials: u64, errors: u64) -> Self {
        let (ber, ci95) = if trials == 0 {
            (0.0, 0.5)
        } else {
            let n = trials as f64;
            let p = errors as f64 / n;
            let z2 = Z95 * Z95;
            let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
            (p, half)
        };
        Self {
            trials,
            errors,
            ber,
            ci95,
        }
    }

    /// Wilson interval `(low, high)`.
    pub fn interval(&self) -> (f64, f64) {
        let n = self.trials as f64;
        let z2 = Z95 * Z95;
        let centre = (self.ber + z2 / (2.0 * n)) / (1.0 + z2 / n);
        // the ends are exact at the extremes; rounding would leave them a hair off
        let low = if self.errors == 0 {
            0.0
        } else {
            (centre - self.ci95).max(0.0)
        };
        let high = if self.errors == self.trials {
            1.0
        } else {
            (centre + self.ci95).min(1.0)
        };
        (low, high)
    }

    /// Binomial standard error `sqrt(p(1-p)/n)` at the given error probability.
    pub fn std_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn std_error(&self) -> f64 {
        self.std_error_at(self.ber)
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self::from_counts(self.trials + other.trials, self.errors + other.errors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub slot: u64,
    pub bit: bool,
    /// Release rate `X_i`.
    pub rate: f64,
    pub interference: f64,
    pub received: u64,
    pub decoded: bool,
    pub error: bool,
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    pub count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count.max(1) as f64).sqrt()
    }
}

/// Per-run aggregates beyond the error count.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub estimate: BerEstimate,
    /// Release rate `X_i` over scored slots.
    pub release: RunningStats,
    /// Scored visits of each transmitter memory state.
    pub occupancy: Vec<u64>,
    /// `π_0 X_i + I_i` over scored slots carrying a `1`, per memory state.
    pub ones_rate: Vec<RunningStats>,
    /// Scored `1` slots where the release was clipped at zero.
    pub clipped_ones: u64,
}

/// What drives the release rate slot by slot.
trait Source {
    fn n_states(&self) -> usize;
    fn state(&self) -> usize;
    fn rate(&mut self, bit: bool, interference: f64) -> Result<f64>;
}

impl Source for Transmitter {
    fn n_states(&self) -> usize {
        self.state().n_states() as usize
    }
    fn state(&self) -> usize {
        Transmitter::state(self).index() as usize
    }
    fn rate(&mut self, bit: bool, interference: f64) -> Result<f64> {
        Ok(self.next_rate(bit, Some(interference))?)
    }
}

/// Counts consecutive ones up to the fold `N` of the one-memory chain.
struct OneMemorySource<'a> {
    rates: &'a StateRates,
    pi1: f64,
    n: usize,
    run: usize,
}

impl Source for OneMemorySource<'_> {
    fn n_states(&self) -> usize {
        self.n + 1
    }
    fn state(&self) -> usize {
        self.run
    }
    fn rate(&mut self, bit: bool, _interference: f64) -> Result<f64> {
        if bit {
            let x = self.rates.release_rate(self.run, self.pi1);
            self.run = (self.run + 1).min(self.n);
            Ok(x)
        } else {
            self.run = 0;
            Ok(0.0)
        }
    }
}

fn sample_poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("finite positive rate");
    dist.sample(rng) as u64
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Plan<'a> {
    channel: &'a ChannelModel,
    decoder: ThresholdDecoder,
    n_slots: u64,
    warmup: u64,
    rng: ChaCha8Rng,
}

fn drive<S: Source>(
    plan: Plan<'_>,
    source: &mut S,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<RunSummary> {
    let Plan {
        channel,
        decoder,
        n_slots,
        warmup,
        mut rng,
    } = plan;
    let pi0 = channel.pi0();
    let mut state: SlotState = channel.initial_state();
    let n_states = source.n_states();
    let mut occupancy = vec![0u64; n_states];
    let mut ones_rate = vec![RunningStats::default(); n_states];
    let mut release = RunningStats::default();
    let (mut trials, mut errors, mut clipped) = (0u64, 0u64, 0u64);
    for slot in 0..n_slots {
        let bit: bool = rng.random();
        let s = source.state();
        let interference = state.interference();
        let x = source.rate(bit, interference)?;
        let mean = channel.output_rate(&state, x)?;
        let received = sample_poisson(&mut rng, mean);
        let decoded = decoder.decode(received);
        let error = decoded != bit;
        if slot >= warmup {
            trials += 1;
            errors += u64::from(error);
            release.push(x);
            occupancy[s] += 1;
            if bit {
                ones_rate[s].push(pi0 * x + interference);
                clipped += u64::from(x == 0.0);
            }
        }
        if let Some(rows) = trace.as_deref_mut() {
            rows.push(TraceRow {
                slot,
                bit,
                rate: x,
                interference,
                received,
                decoded,
                error,
            });
        }
        channel.advance_in_place(&mut state, x)?;
    }
    Ok(RunSummary {
        estimate: BerEstimate::from_counts(trials, errors),
        release,
        occupancy,
        ones_rate,
        clipped_ones: clipped,
    })
}

fn run_stream(
    config: &SimConfig,
    stream: u64,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<RunSummary> {
    config.validate()?;
    let mut tx = Transmitter::new(config.transmitter.clone())?;
    let plan = Plan {
        channel: &config.channel,
        decoder: config.decoder,
        n_slots: config.n_slots,
        warmup: config.warmup,
        rng: rng_for(config.seed, stream),
    };
    drive(plan, &mut tx, trace)
}

pub fn run(config: &SimConfig) -> Result<BerEstimate> {
    Ok(run_stream(config, 0, None)?.estimate)
}

pub fn run_with_trace(config: &SimConfig) -> Result<(BerEstimate, Vec<TraceRow>)> {
    let mut rows = Vec::with_capacity(config.n_slots as usize);
    let summary = run_stream(config, 0, Some(&mut rows))?;
    Ok((summary.estimate, rows))
}

pub fn run_detailed(config: &SimConfig) -> Result<RunSummary> {
    run_stream(config, 0, None)
}

/// `replicas` independent chains of `config.n_slots` slots each, run in
/// parallel on streams `0..replicas` and pooled.
pub fn run_replicated(config: &SimConfig, replicas: u64) -> Result<BerEstimate> {
    let parts: Result<Vec<BerEstimate>> = (0..replicas)
        .into_par_iter()
        .map(|s| run_stream(config, s, None).map(|r| r.estimate))
        .collect();
    Ok(parts?
        .iter()
        .fold(BerEstimate::from_counts(0, 0), |acc, e| acc.merge(e)))
}

/// Simulates the one-memory channel `(π_0, π_1) = (r π_1, π_1)` driven by the
/// state-rate policy `rates`, with the problem's threshold and no noise.
pub fn simulate_one_memory(
    problem: &OneMemProblem,
    rates: &StateRates,
    n_slots: u64,
    seed: u64,
) -> Result<RunSummary> {
    if rates.a.len() != problem.n_states {
        return Err(Error::Config(format!(
            "expected {} state rates, got {}",
            problem.n_states,
            rates.a.len()
        )));
    }
    let channel = ChannelModel::new(vec![problem.pi0(), problem.pi1], 0.0)?;
    let warmup = default_warmup(&channel);
    if n_slots <= warmup {
        return Err(Error::Config(format!(
            "n_slots {n_slots} must exceed warmup {warmup}"
        )));
    }
    let mut source = OneMemorySource {
        rates,
        pi1: problem.pi1,
        n: problem.n_states,
        run: 0,
    };
    let plan = Plan {
        channel: &channel,
        decoder: ThresholdDecoder::new(problem.threshold),
        n_slots,
        warmup,
        rng: rng_for(seed, 0),
    };
    drive(plan, &mut source, None)
}

fn genie_config(channel: &ChannelModel, target_c: f64, n_slots: u64, seed: u64) -> SimConfig {
    let kind = TransmitterKind::Genie {
        target_c,
        pi0: channel.pi0(),
    };
    SimConfig::new(
        channel.clone(),
        kind,
        ThresholdDecoder::new(0),
        n_slots,
        seed,
    )
}

/// Genie target `C` whose mean release rate is `k_per_slot`.
///
/// Starts from the closed form, which is exact when the release is never
/// clipped at zero; otherwise bisects on the pilot-run mean with common
/// random numbers.
pub fn calibrate_genie(
    channel: &ChannelModel,
    k_per_slot: f64,
    pilot_slots: u64,
    seed: u64,
) -> Result<f64> {
    if !(k_per_slot > 0.0 && k_per_slot.is_finite()) {
        return Err(molrate_core::Error::InvalidParameter {
            name: "power",
            value: k_per_slot,
        }
        .into());
    }
    let c0 = genie_target_unclamped(channel, k_per_slot);
    let pilot = |c: f64| run_detailed(&genie_config(channel, c, pilot_slots, seed));
    let first = pilot(c0)?;
    if first.clipped_ones == 0 {
        return Ok(c0);
    }
    // clipping raises the mean, so the answer usually lies below the closed form
    let (mut low, mut high) = (c0, c0);
    let mut guard = 0;
    let bracket_failed = |low: f64, high: f64, mean: f64| -> Error {
        molrate_core::Error::Calibration {
            target: k_per_slot,
            low,
            high,
            mean_at_high: mean,
        }
        .into()
    };
    if first.release.mean() > k_per_slot {
        loop {
            low *= 0.5;
            let mean = pilot(low)?.release.mean();
            if mean <= k_per_slot {
                break;
            }
            guard += 1;
            if guard > 60 {
                return Err(bracket_failed(low, high, mean));
            }
        }
    } else {
        loop {
            high *= 2.0;
            let mean = pilot(high)?.release.mean();
            if mean >= k_per_slot {
                break;
            }
            guard += 1;
            if guard > 60 {
                return Err(bracket_failed(low, high, mean));
            }
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (low + high);
        if pilot(mid)?.release.mean() < k_per_slot {
            low = mid;
        } else {
            high = mid;
        }
        if high - low <= 1e-7 * high {
            break;
        }
    }
    Ok(0.5 * (low + high))
}

const GENIE_LAW_ATOMS: usize = 4000;

/// Threshold minimizing the genie error under the interference law of a
/// pilot run, with that analytic error.
pub fn genie_threshold(
    channel: &ChannelModel,
    target_c: f64,
    t_max: u32,
    pilot_slots: u64,
    seed: u64,
) -> Result<(u32, f64)> {
    let (_, rows) = run_with_trace(&genie_config(channel, target_c, pilot_slots, seed))?;
    let warmup = default_warmup(channel) as usize;
    let scored = &rows[warmup.min(rows.len())..];
    if scored.is_empty() {
        return Err(Error::Config("pilot run too short".into()));
    }
    let step = (scored.len() / GENIE_LAW_ATOMS).max(1);
    let picks: Vec<f64> = scored
        .iter()
        .step_by(step)
        .map(|r| r.interference)
        .collect();
    let p = 1.0 / picks.len() as f64;
    let atoms = picks
        .iter()
        .map(|&i| Atom {
            prob: p,
            interference: i,
            signal: (target_c - i).max(0.0),
        })
        .collect();
    let law = InterferenceLaw::new(atoms)?;
    Ok(best_threshold_for_law(&law, channel.lambda0(), t_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use molrate_core::transmitter::{calibrate_power, LevelTable};

    fn isi_channel() -> ChannelModel {
        ChannelModel::new(vec![0.3, 0.15, 0.08, 0.04], 1.0).unwrap()
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let e = BerEstimate::from_counts(1000, 37);
        let (lo, hi) = e.interval();
        assert!(lo < e.ber && e.ber < hi);
        let zero = BerEstimate::from_counts(500, 0);
        assert_eq!(zero.interval().0, 0.0);
        assert!(zero.ci95 > 0.0);
        let wide = BerEstimate::from_counts(100, 50).ci95;
        let narrow = BerEstimate::from_counts(10_000, 5000).ci95;
        assert!((wide / narrow - 10.0).abs() < 0.2);
    }

    #[test]
    fn config_validation() {
        let ch = isi_channel();
        let mut cfg = SimConfig::new(
            ch,
            TransmitterKind::Ook { level: 10.0 },
            ThresholdDecoder::new(3),
            50,
            1,
        );
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
        cfg.n_slots = 1000;
        cfg.warmup = 2;
        assert!(run(&cfg).is_err());
        cfg.warmup = 100;
        cfg.transmitter = TransmitterKind::Ook { level: -1.0 };
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn silent_transmitter_misses_every_one() {
        let cfg = SimConfig::new(
            isi_channel(),
            TransmitterKind::Ook { level: 0.0 },
            ThresholdDecoder::new(5),
            20_000,
            9,
        );
        let (est, rows) = run_with_trace(&cfg).unwrap();
        let ones = rows[100..].iter().filter(|r| r.bit).count() as u64;
        assert!(est.errors >= ones);
        assert!((est.ber - 0.5).abs() < 3.0 * est.std_error_at(0.5));
    }

    #[test]
    fn same_seed_same_trace() {
        let table = calibrate_power(&isi_channel(), 2, 20.0).unwrap();
        let cfg = SimConfig::new(
            isi_channel(),
            TransmitterKind::Adaptive(table),
            ThresholdDecoder::new(8),
            5000,
            77,
        );
        let a = run_with_trace(&cfg).unwrap();
        let b = run_with_trace(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 78;
        assert_ne!(run_with_trace(&other).unwrap().1, a.1);
    }

    #[test]
    fn trace_rows_are_consistent() {
        let table = LevelTable::constant(12.0).unwrap();
        let ch = isi_channel();
        let cfg = SimConfig::new(
            ch.clone(),
            TransmitterKind::Adaptive(table),
            ThresholdDecoder::new(4),
            3000,
            5,
        );
        let (est, rows) = run_with_trace(&cfg).unwrap();
        assert_eq!(rows.len(), 3000);
        let mut state = ch.initial_state();
        for r in &rows {
            assert_eq!(r.interference, state.interference());
            assert_eq!(r.rate, if r.bit { 12.0 } else { 0.0 });
            assert_eq!(r.decoded, r.received > 4);
            assert_eq!(r.error, r.decoded != r.bit);
            ch.advance_in_place(&mut state, r.rate).unwrap();
        }
        let scored = rows[100..].iter().filter(|r| r.error).count() as u64;
        assert_eq!(est.errors, scored);
    }

    #[test]
    fn replicas_pool_deterministically() {
        let cfg = SimConfig::new(
            isi_channel(),
            TransmitterKind::Ook { level: 20.0 },
            ThresholdDecoder::new(6),
            4000,
            3,
        );
        let a = run_replicated(&cfg, 4).unwrap();
        let b = run_replicated(&cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials, 4 * 3900);
        assert_eq!(run_replicated(&cfg, 1).unwrap(), run(&cfg).unwrap());
    }

    #[test]
    fn genie_calibration_closed_form_when_never_clipped() {
        // no ISI: the genie always sends C/π0
        let ch = ChannelModel::new(vec![0.4], 0.0).unwrap();
        let c = calibrate_genie(&ch, 10.0, 2000, 1).unwrap();
        assert_eq!(c, 8.0);
    }

    #[test]
    fn genie_calibration_meets_power_under_clipping() {
        let ch = isi_channel();
        let k = 20.0;
        let c = calibrate_genie(&ch, k, 20_000, 4).unwrap();
        // clipped slots release nothing, not a negative amount, so less C is needed
        assert!(c <= genie_target_unclamped(&ch, k));
        let check = run_detailed(&genie_config(&ch, c, 200_000, 99)).unwrap();
        assert!((check.release.mean() - k).abs() < 4.0 * check.release.std_error() + 1e-3 * k);
    }

    #[test]
    fn one_memory_rejects_wrong_length() {
        let p = OneMemProblem::new(3.0, 5, 10.0, 0.1).unwrap();
        assert!(simulate_one_memory(&p, &StateRates::zeros(3), 1000, 1).is_err());
    }
}
