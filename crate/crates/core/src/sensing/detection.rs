use super::baselines::{local_maxima, zero_padded_idft};
use super::waveform::{FrequencySnapshot, WaveformConfig};
use super::{Result, SensingError};

/// Zero-padding factor of the detection periodogram.
pub const DETECTION_OVERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub range: f64,
    /// Periodogram value `|X_k|^2 / N_occupied`.
    pub statistic: f64,
}

/// Range periodogram `|sum_n y_n exp(+j 2 pi n k / K)|^2 / N_occ`.
///
/// On circular Gaussian noise of variance `s2` each bin is exponentially
/// distributed with mean `s2`.
pub fn range_periodogram(snapshot: &FrequencySnapshot, oversample: usize) -> Vec<f64> {
    let occupied = snapshot.mask().occupied_count().max(1) as f64;
    zero_padded_idft(snapshot.samples(), oversample)
        .iter()
        .map(|x| x.norm_sqr() / occupied)
        .collect()
}

/// Constant threshold with per-bin false-alarm probability `pfa` on noise of
/// power `noise_power`: `P(stat > t) = exp(-t / s2)`.
pub fn detection_threshold(noise_power: f64, pfa: f64) -> f64 {
    -noise_power * pfa.ln()
}

/// Peaks of the range periodogram above the CFAR-calibrated threshold.
pub fn detect_targets(
    snapshot: &FrequencySnapshot,
    config: &WaveformConfig,
    false_alarm_target: f64,
) -> Result<Vec<Detection>> {
    if !(false_alarm_target > 0.0 && false_alarm_target < 1.0) {
        return Err(SensingError::InvalidInput(format!(
            "false alarm probability must lie in (0, 1), got {false_alarm_target}"
        )));
    }
    let stat = range_periodogram(snapshot, DETECTION_OVERSAMPLE);
    let threshold = detection_threshold(snapshot.noise_power(), false_alarm_target);
    let bins = stat.len();
    let r_max = config.unambiguous_range();
    Ok(local_maxima(&stat)
        .into_iter()
        .filter(|&k| stat[k] > threshold)
        .map(|k| Detection {
            range: k as f64 / bins as f64 * r_max,
            statistic: stat[k],
        })
        .collect())
}
