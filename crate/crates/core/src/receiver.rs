//! Fixed-threshold count decoder.

use crate::analysis::{error_eq3, stationary_law, InterferenceLaw};
use crate::channel::ChannelModel;
use crate::error::Result;
use crate::transmitter::LevelTable;

/// Decides `1` iff the observed count exceeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdDecoder {
    pub threshold: u32,
}

impl ThresholdDecoder {
    pub fn new(threshold: u32) -> Self {
        Self { threshold }
    }

    pub fn decode(&self, y: u64) -> bool {
        y > u64::from(self.threshold)
    }
}

/// Threshold in `0..=t_max` minimizing the exact stationary error of an
/// adaptive (or constant-level) transmitter; ties go to the smaller threshold.
pub fn best_threshold(
    channel: &ChannelModel,
    levels: &LevelTable,
    t_max: u32,
) -> Result<(u32, f64)> {
    let law = stationary_law(channel, levels)?;
    Ok(best_threshold_for_law(&law, channel.lambda0(), t_max))
}

/// Same sweep for an arbitrary (interference, signal) law.
pub fn best_threshold_for_law(law: &InterferenceLaw, lambda0: f64, t_max: u32) -> (u32, f64) {
    let mut best = (0, f64::INFINITY);
    for t in 0..=t_max {
        let e = error_eq3(law, t, lambda0);
        if e < best.1 {
            best = (t, e);
        }
    }
    best
}
