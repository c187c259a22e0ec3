//! Distributional checks of the simulator against independent samplers.

use molrate::core::analysis::{OneMemProblem, StateRates};
use molrate::core::transmitter::calibrate_power;
use molrate::core::{ChannelModel, ThresholdDecoder, TransmitterKind};
use molrate::sim::{self, SimConfig};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const PI: [f64; 4] = [0.3, 0.15, 0.08, 0.04];

fn channel() -> ChannelModel {
    ChannelModel::new(PI.to_vec(), 1.0).unwrap()
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).unwrap().sample(rng) as u64
    }
}

/// Pearson statistic for two histograms over the same bins, and its degrees of freedom.
fn homogeneity(a: &[u64], b: &[u64]) -> (f64, f64) {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut bins = 0;
    for (&x, &y) in a.iter().zip(b) {
        let total = (x + y) as f64;
        if total == 0.0 {
            continue;
        }
        let ea = total * na / (na + nb);
        let eb = total * nb / (na + nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
        bins += 1;
    }
    (stat, (bins - 1) as f64)
}

fn histogram(counts: impl Iterator<Item = u64>, cap: usize) -> Vec<u64> {
    let mut h = vec![0u64; cap + 1];
    for c in counts {
        h[(c as usize).min(cap)] += 1;
    }
    h
}

fn critical(df: f64) -> f64 {
    ChiSquared::new(df).unwrap().inverse_cdf(0.9999)
}

#[test]
fn rate_domain_counts_match_particle_thinning() {
    let ch = channel();
    let cfg = SimConfig::new(
        ch.clone(),
        TransmitterKind::Ook { level: 10.0 },
        ThresholdDecoder::new(3),
        200_000,
        17,
    );
    let (_, rows) = sim::run_with_trace(&cfg).unwrap();

    // replay the same releases molecule by molecule
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let lags = Uniform::new(0.0, 1.0).unwrap();
    let mut arrivals = vec![0u64; rows.len() + PI.len()];
    for (j, row) in rows.iter().enumerate() {
        for _ in 0..poisson(&mut rng, row.rate) {
            let u: f64 = lags.sample(&mut rng);
            let mut acc = 0.0;
            for (k, p) in PI.iter().enumerate() {
                acc += p;
                if u < acc {
                    arrivals[j + k] += 1;
                    break;
                }
            }
        }
    }
    let skip = sim::default_warmup(&ch) as usize;
    let particle: Vec<u64> = (skip..rows.len())
        .map(|i| arrivals[i] + poisson(&mut rng, ch.lambda0()))
        .collect();
    let rate_domain = rows[skip..].iter().map(|r| r.received);

    let (stat, df) = homogeneity(
        &histogram(rate_domain, 20),
        &histogram(particle.into_iter(), 20),
    );
    assert!(stat < critical(df), "chi-square {stat:.1} on {df} df");
}

#[test]
fn one_memory_state_occupancy_follows_run_lengths() {
    let problem = OneMemProblem::new(3.0, 4, 10.0, 0.2)
        .unwrap()
        .with_states(6)
        .unwrap();
    let rates = StateRates {
        a: vec![1.5, 1.0, 0.8, 0.6, 0.5, 0.4],
    };
    // one scored slot per replica keeps the samples independent
    let mut counts = vec![0u64; problem.n_states + 1];
    for seed in 0..20_000 {
        let run = sim::simulate_one_memory(&problem, &rates, 101, seed).unwrap();
        counts
            .iter_mut()
            .zip(&run.occupancy)
            .for_each(|(c, o)| *c += o);
    }
    let n = counts.iter().sum::<u64>() as f64;
    let stat: f64 = counts
        .iter()
        .zip(problem.state_probs())
        .map(|(&c, p)| (c as f64 - n * p).powi(2) / (n * p))
        .sum();
    let df = problem.n_states as f64;
    assert!(
        stat < critical(df),
        "chi-square {stat:.1} on {df} df, counts {counts:?}"
    );
}

#[test]
fn calibrated_levels_release_the_budget() {
    let ch = channel();
    let k = 5.0;
    let table = calibrate_power(&ch, 2, k).unwrap();
    let cfg = SimConfig::new(
        ch,
        TransmitterKind::Adaptive(table),
        ThresholdDecoder::new(3),
        400_000,
        23,
    );
    let run = sim::run_detailed(&cfg).unwrap();
    let z = (run.release.mean() - k) / run.release.std_error();
    assert!(
        z.abs() < 4.0,
        "mean release {} (z = {z:.2})",
        run.release.mean()
    );
}

#[test]
fn calibrated_genie_releases_the_budget() {
    let ch = ChannelModel::new(vec![0.2, 0.3, 0.15, 0.1], 0.5).unwrap();
    let k = 4.0;
    let c = sim::calibrate_genie(&ch, k, 200_000, 5).unwrap();
    let kind = TransmitterKind::Genie {
        target_c: c,
        pi0: ch.pi0(),
    };
    let cfg = SimConfig::new(ch, kind, ThresholdDecoder::new(2), 200_000, 6);
    let run = sim::run_detailed(&cfg).unwrap();
    assert!(run.clipped_ones > 0, "the case should exercise clipping");
    // pilot and check runs are independent and the same length
    let z = (run.release.mean() - k) / (run.release.std_error() * 2f64.sqrt());
    assert!(
        z.abs() < 4.0,
        "mean release {} (z = {z:.2})",
        run.release.mean()
    );
}

#[test]
fn bits_are_fair() {
    let cfg = SimConfig::new(
        channel(),
        TransmitterKind::Ook { level: 4.0 },
        ThresholdDecoder::new(2),
        100_000,
        3,
    );
    let (_, rows) = sim::run_with_trace(&cfg).unwrap();
    let ones = rows.iter().filter(|r| r.bit).count() as f64;
    let n = rows.len() as f64;
    assert!(((ones - 0.5 * n) / (0.25 * n).sqrt()).abs() < 4.0);
}
