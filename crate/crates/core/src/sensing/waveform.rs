use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Result, SensingError};
use crate::C64;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// OFDM numerology of the sensing waveform.
///
/// `num_subcarriers` is the full span including any blank band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformConfig {
    pub carrier_frequency: f64,
    pub subcarrier_spacing: f64,
    pub num_subcarriers: usize,
}

impl WaveformConfig {
    pub fn new(carrier_frequency: f64, subcarrier_spacing: f64, num_subcarriers: usize) -> Result<Self> {
        if !(subcarrier_spacing > 0.0) || !subcarrier_spacing.is_finite() {
            return Err(SensingError::InvalidInput(format!(
                "subcarrier spacing must be positive, got {subcarrier_spacing}"
            )));
        }
        if num_subcarriers < 4 {
            return Err(SensingError::InvalidInput(format!(
                "need at least 4 subcarriers, got {num_subcarriers}"
            )));
        }
        if !(carrier_frequency > 0.0) {
            return Err(SensingError::InvalidInput(format!(
                "carrier frequency must be positive, got {carrier_frequency}"
            )));
        }
        Ok(Self {
            carrier_frequency,
            subcarrier_spacing,
            num_subcarriers,
        })
    }

    /// 24 GHz carrier, 120 kHz spacing, 512 subcarriers (61.44 MHz span).
    pub fn default_experiment() -> Self {
        Self {
            carrier_frequency: 24e9,
            subcarrier_spacing: 120e3,
            num_subcarriers: 512,
        }
    }

    pub fn unambiguous_range(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.subcarrier_spacing)
    }

    pub fn bandwidth(&self) -> f64 {
        self.subcarrier_spacing * self.num_subcarriers as f64
    }

    /// Range resolution of the full span, `c / (2 B)`.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth())
    }

    /// Per-subcarrier phase increment of a target at `range`.
    pub fn phase_slope(&self, range: f64) -> f64 {
        -2.0 * PI * self.subcarrier_spacing * 2.0 * range / SPEED_OF_LIGHT
    }

    /// Unit-modulus pole of a target at `range`.
    pub fn pole_for_range(&self, range: f64) -> C64 {
        C64::from_polar(1.0, self.phase_slope(range))
    }

    /// Inverse of [`Self::pole_for_range`] on the unambiguous interval.
    pub fn range_for_phase(&self, phase: f64) -> f64 {
        let wrapped = (-phase).rem_euclid(2.0 * PI);
        wrapped * SPEED_OF_LIGHT / (4.0 * PI * self.subcarrier_spacing)
    }
}

/// Where the blank block of a gapped mask sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPosition {
    Central,
    /// First blank subcarrier index.
    Start(usize),
}

/// Subcarrier occupancy; `true` means the subcarrier carries observed data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectrumMask {
    occupied: Vec<bool>,
}

impl SpectrumMask {
    pub fn new(occupied: Vec<bool>) -> Result<Self> {
        if !occupied.iter().any(|&o| o) {
            return Err(SensingError::InvalidInput(
                "mask must leave at least one subcarrier occupied".into(),
            ));
        }
        Ok(Self { occupied })
    }

    pub fn full(len: usize) -> Self {
        Self {
            occupied: vec![true; len],
        }
    }

    /// One contiguous blank block of `gap` subcarriers.
    pub fn with_gap(len: usize, gap: usize, position: GapPosition) -> Result<Self> {
        if gap >= len {
            return Err(SensingError::InvalidInput(format!(
                "gap of {gap} subcarriers leaves nothing of {len}"
            )));
        }
        let start = match position {
            GapPosition::Central => (len - gap) / 2,
            GapPosition::Start(s) => s,
        };
        if start + gap > len {
            return Err(SensingError::InvalidInput(format!(
                "gap [{start}, {}) exceeds {len} subcarriers",
                start + gap
            )));
        }
        let occupied = (0..len).map(|i| i < start || i >= start + gap).collect();
        Self::new(occupied)
    }

    /// 256 central blanks out of 512 (30.72 MHz at 120 kHz).
    pub fn default_experiment() -> Self {
        Self::with_gap(512, 256, GapPosition::Central).expect("static layout")
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn is_occupied(&self, i: usize) -> bool {
        self.occupied[i]
    }

    pub fn is_full(&self) -> bool {
        self.occupied.iter().all(|&o| o)
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn occupied_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.occupied[i]).collect()
    }

    pub fn blank_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.occupied[i]).collect()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.occupied
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub range: f64,
    pub amplitude: C64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TargetSet {
    targets: Vec<Target>,
}

impl TargetSet {
    /// Validates ranges against `config` and the pairwise `min_separation`.
    pub fn new(targets: Vec<Target>, config: &WaveformConfig, min_separation: f64) -> Result<Self> {
        let r_max = config.unambiguous_range();
        for t in &targets {
            if !(t.range > 0.0 && t.range < r_max) {
                return Err(SensingError::RangeOutOfBounds {
                    range: t.range,
                    unambiguous: r_max,
                });
            }
        }
        for (i, a) in targets.iter().enumerate() {
            for b in &targets[i + 1..] {
                if (a.range - b.range).abs() < min_separation {
                    return Err(SensingError::InvalidInput(format!(
                        "targets at {:.3} m and {:.3} m closer than {min_separation} m",
                        a.range, b.range
                    )));
                }
            }
        }
        Ok(Self { targets })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Draws `count` unit-magnitude, random-phase targets uniformly in
    /// `[lo, hi]`, rejecting draws closer than `min_separation`.
    pub fn random<R: Rng + ?Sized>(
        count: usize,
        lo: f64,
        hi: f64,
        min_separation: f64,
        config: &WaveformConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if count as f64 * min_separation > (hi - lo) {
            return Err(SensingError::InvalidInput(format!(
                "cannot place {count} targets {min_separation} m apart in [{lo}, {hi}]"
            )));
        }
        let mut targets: Vec<Target> = Vec::with_capacity(count);
        while targets.len() < count {
            let range = rng.random_range(lo..=hi);
            if targets.iter().all(|t| (t.range - range).abs() >= min_separation) {
                let phase = rng.random_range(0.0..2.0 * PI);
                targets.push(Target {
                    range,
                    amplitude: C64::from_polar(1.0, phase),
                });
            }
        }
        Self::new(targets, config, min_separation)
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t.range).collect()
    }

    /// Sum of squared amplitudes; the signal power used by the SNR convention.
    pub fn total_power(&self) -> f64 {
        self.targets.iter().map(|t| t.amplitude.norm_sqr()).sum()
    }
}

/// Complex echo samples per subcarrier with their occupancy mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySnapshot {
    samples: Vec<C64>,
    mask: SpectrumMask,
    noise_power: f64,
}

impl FrequencySnapshot {
    /// Blanked positions of `samples` are zeroed so the invariant holds.
    pub fn new(mut samples: Vec<C64>, mask: SpectrumMask, noise_power: f64) -> Result<Self> {
        if samples.len() != mask.len() {
            return Err(SensingError::LengthMismatch {
                expected: mask.len(),
                actual: samples.len(),
            });
        }
        for (s, &o) in samples.iter_mut().zip(mask.as_slice()) {
            if !o {
                *s = C64::new(0.0, 0.0);
            }
        }
        Ok(Self {
            samples,
            mask,
            noise_power,
        })
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn mask(&self) -> &SpectrumMask {
        &self.mask
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Ascending ranges with the linear magnitude attached to each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RangeProfile {
    pub ranges: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl RangeProfile {
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (ranges, magnitudes) = pairs.into_iter().unzip();
        Self { ranges, magnitudes }
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

/// Noise variance realizing `snr_db` against `signal_power`.
pub(crate) fn noise_variance(signal_power: f64, snr_db: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

/// Synthesizes a fully occupied echo. `snr_db = None` disables noise.
///
/// Noise is circular complex Gaussian with variance `sum |b_m|^2 / SNR`.
pub fn synthesize_echo(
    targets: &TargetSet,
    config: &WaveformConfig,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<FrequencySnapshot> {
    let r_max = config.unambiguous_range();
    for t in targets.targets() {
        if !(t.range > 0.0 && t.range < r_max) {
            return Err(SensingError::RangeOutOfBounds {
                range: t.range,
                unambiguous: r_max,
            });
        }
    }
    let n = config.num_subcarriers;
    let mut samples = vec![C64::new(0.0, 0.0); n];
    for t in targets.targets() {
        let step = config.pole_for_range(t.range);
        let mut phasor = t.amplitude;
        for s in samples.iter_mut() {
            *s += phasor;
            phasor *= step;
        }
    }
    let noise_power = match snr_db {
        Some(db) => noise_variance(targets.total_power(), db),
        None => 0.0,
    };
    if noise_power > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = (noise_power / 2.0).sqrt();
        for s in samples.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *s += C64::new(re * scale, im * scale);
        }
    }
    FrequencySnapshot::new(samples, SpectrumMask::full(n), noise_power)
}

pub fn apply_mask(snapshot: &FrequencySnapshot, mask: &SpectrumMask) -> Result<FrequencySnapshot> {
    if mask.len() != snapshot.len() {
        return Err(SensingError::LengthMismatch {
            expected: snapshot.len(),
            actual: mask.len(),
        });
    }
    let occupied: Vec<bool> = snapshot
        .mask()
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .map(|(&a, &b)| a && b)
        .collect();
    FrequencySnapshot::new(
        snapshot.samples().to_vec(),
        SpectrumMask::new(occupied)?,
        snapshot.noise_power(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_target(range: f64) -> TargetSet {
        TargetSet::new(
            vec![Target {
                range,
                amplitude: C64::new(0.6, -0.8),
            }],
            &WaveformConfig::default_experiment(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn unambiguous_range_of_default_numerology() {
        let cfg = WaveformConfig::default_experiment();
        assert!((cfg.unambiguous_range() - 299_792_458.0 / 240_000.0).abs() < 1e-9);
        assert!((cfg.unambiguous_range() - 1249.135).abs() < 1e-3);
        assert!(cfg.unambiguous_range() > 1000.0);
    }

    #[test]
    fn config_rejects_degenerate_numerology() {
        assert!(WaveformConfig::new(24e9, 0.0, 512).is_err());
        assert!(WaveformConfig::new(24e9, 120e3, 3).is_err());
    }

    #[test]
    fn empty_target_set_is_all_zero() {
        let cfg = WaveformConfig::default_experiment();
        let snap = synthesize_echo(&TargetSet::empty(), &cfg, Some(10.0), 1).unwrap();
        assert!(snap.samples().iter().all(|s| s.norm() == 0.0));
        let snap = synthesize_echo(&TargetSet::empty(), &cfg, None, 1).unwrap();
        assert!(snap.samples().iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn single_target_phase_slope_is_constant() {
        let cfg = WaveformConfig::default_experiment();
        let r = 437.25;
        let snap = synthesize_echo(&one_target(r), &cfg, None, 0).unwrap();
        let expected = -2.0 * PI * cfg.subcarrier_spacing * 2.0 * r / SPEED_OF_LIGHT;
        let want = C64::from_polar(1.0, expected);
        for w in snap.samples().windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - want).norm() < 1e-9);
        }
    }

    #[test]
    fn range_beyond_unambiguous_is_rejected() {
        let cfg = WaveformConfig::default_experiment();
        let r = cfg.unambiguous_range() + 1.0;
        assert!(TargetSet::new(
            vec![Target {
                range: r,
                amplitude: C64::new(1.0, 0.0)
            }],
            &cfg,
            0.0
        )
        .is_err());
    }

    #[test]
    fn default_mask_blanks_central_256() {
        let mask = SpectrumMask::default_experiment();
        assert_eq!(mask.len(), 512);
        assert_eq!(mask.blank_indices(), (128..384).collect::<Vec<_>>());
        // 30.72 MHz / 120 kHz
        assert_eq!((30.72e6_f64 / 120e3).round() as usize, mask.blank_indices().len());

        let cfg = WaveformConfig::default_experiment();
        let snap = synthesize_echo(&one_target(300.0), &cfg, Some(20.0), 3).unwrap();
        let masked = apply_mask(&snap, &mask).unwrap();
        let zeros = masked.samples().iter().filter(|s| s.norm() == 0.0).count();
        assert_eq!(zeros, 256);
        for i in mask.occupied_indices() {
            assert_eq!(masked.samples()[i], snap.samples()[i]);
        }
    }

    #[test]
    fn identity_mask_and_degenerate_masks() {
        let cfg = WaveformConfig::default_experiment();
        let snap = synthesize_echo(&one_target(300.0), &cfg, Some(20.0), 3).unwrap();
        let same = apply_mask(&snap, &SpectrumMask::full(512)).unwrap();
        assert_eq!(same, snap);
        assert!(SpectrumMask::new(vec![false; 512]).is_err());
        assert!(apply_mask(&snap, &SpectrumMask::full(100)).is_err());
    }

    #[test]
    fn realized_snr_matches_request() {
        let cfg = WaveformConfig::default_experiment();
        let targets = one_target(500.0);
        let clean = synthesize_echo(&targets, &cfg, None, 0).unwrap();
        let mut acc = 0.0;
        let trials = 50;
        for seed in 0..trials {
            let noisy = synthesize_echo(&targets, &cfg, Some(10.0), seed).unwrap();
            acc += noisy
                .samples()
                .iter()
                .zip(clean.samples())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / 512.0;
        }
        let est = acc / trials as f64;
        assert!((est - 0.1).abs() < 0.005, "noise variance {est}");
    }
}
