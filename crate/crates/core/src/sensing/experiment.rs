use std::time::Instant;

use rayon::prelude::*;

use crate::stats::median;
use super::allpole::{ranges_from_poles, recover_blank_band, RecoverySettings};
use super::baselines::{fft_range_baseline, omp_range_baseline};
use super::metrics::{armse_over_trials, matched_errors};
use super::waveform::{
    apply_mask, synthesize_echo, GapPosition, SpectrumMask, TargetSet, WaveformConfig,
};
use super::{Result, SensingError};
use crate::seeds::{trial_seed, SeedBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SensingMethod {
    AllPole,
    Fft,
    Omp,
}

impl SensingMethod {
    pub const ALL: [SensingMethod; 3] = [SensingMethod::AllPole, SensingMethod::Fft, SensingMethod::Omp];

    pub fn label(self) -> &'static str {
        match self {
            SensingMethod::AllPole => "allpole",
            SensingMethod::Fft => "fft",
            SensingMethod::Omp => "omp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingSettings {
    pub waveform: WaveformConfig,
    pub gap_subcarriers: usize,
    pub gap_position: GapPosition,
    pub snr_db_list: Vec<f64>,
    pub trials: usize,
    pub model_order: usize,
    pub seed: u64,
    pub target_count: usize,
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub min_separation_m: f64,
    pub miss_penalty_m: f64,
    pub fft_oversample: usize,
    pub omp_grid_m: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SensingSettings {
    fn default() -> Self {
        Self {
            waveform: WaveformConfig::default_experiment(),
            gap_subcarriers: 256,
            gap_position: GapPosition::Central,
            snr_db_list: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            trials: 200,
            model_order: 3,
            seed: 1,
            target_count: 3,
            range_min_m: 200.0,
            range_max_m: 1000.0,
            min_separation_m: 5.0,
            miss_penalty_m: 100.0,
            fft_oversample: 8,
            omp_grid_m: 0.5,
            max_iterations: 50,
            tolerance: 1e-6,
        }
    }
}

impl SensingSettings {
    pub fn mask(&self) -> Result<SpectrumMask> {
        SpectrumMask::with_gap(self.waveform.num_subcarriers, self.gap_subcarriers, self.gap_position)
    }

    fn recovery(&self) -> RecoverySettings {
        RecoverySettings {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            ..RecoverySettings::new(self.model_order)
        }
    }
}

/// One estimator run on one Monte Carlo draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingRecord {
    pub method: SensingMethod,
    pub snr_db: f64,
    pub trial: usize,
    /// Single-trial ARMSE (mean matched absolute error), m.
    pub armse_m: f64,
    pub runtime_ms: f64,
    /// Blank recovery convergence; always true for the baselines.
    pub converged: bool,
    /// Matched error per true target, ordered by ascending true range.
    pub target_errors: Vec<f64>,
}

/// Draws the targets of one trial. Independent of SNR so every SNR point
/// sees the same geometry.
fn trial_targets(settings: &SensingSettings, trial: usize) -> Result<TargetSet> {
    let mut rng = SeedBuilder::new(settings.seed, "sense/targets").int(trial as u64).rng();
    TargetSet::random(
        settings.target_count,
        settings.range_min_m,
        settings.range_max_m,
        settings.min_separation_m,
        &settings.waveform,
        &mut rng,
    )
}

fn run_one(settings: &SensingSettings, mask: &SpectrumMask, snr_db: f64, trial: usize) -> Result<Vec<SensingRecord>> {
    let targets = trial_targets(settings, trial)?;
    let mut truth = targets.ranges();
    truth.sort_by(f64::total_cmp);
    let noise_seed = trial_seed(settings.seed, "sense/noise", &[snr_db], trial as u64);
    let full = synthesize_echo(&targets, &settings.waveform, Some(snr_db), noise_seed)?;
    let gapped = apply_mask(&full, mask)?;
    let k = settings.target_count;

    SensingMethod::ALL
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let (estimate, converged) = match method {
                SensingMethod::AllPole => match recover_blank_band(&gapped, &settings.recovery()) {
                    Ok(rec) => (ranges_from_poles(&rec.estimate, &settings.waveform).ranges, rec.converged),
                    Err(SensingError::DegenerateSignal { .. }) => (Vec::new(), false),
                    Err(e) => return Err(e),
                },
                SensingMethod::Fft => (
                    fft_range_baseline(&gapped, &settings.waveform, settings.fft_oversample, k).ranges,
                    true,
                ),
                SensingMethod::Omp => (
                    omp_range_baseline(&gapped, &settings.waveform, settings.omp_grid_m, k)?.ranges,
                    true,
                ),
            };
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let target_errors = matched_errors(&truth, &estimate, settings.miss_penalty_m)?;
            Ok(SensingRecord {
                method,
                snr_db,
                trial,
                armse_m: target_errors.iter().sum::<f64>() / target_errors.len() as f64,
                runtime_ms,
                converged,
                target_errors,
            })
        })
        .collect()
}

/// Runs every estimator on `trials` draws at each SNR.
///
/// Trials execute on the current rayon pool; output order is
/// `(snr, trial, method)` regardless of scheduling.
pub fn run_sensing_experiment(settings: &SensingSettings) -> Result<Vec<SensingRecord>> {
    if settings.trials == 0 {
        return Err(SensingError::InvalidInput("trials must be at least 1".into()));
    }
    let mask = settings.mask()?;
    let jobs: Vec<(f64, usize)> = settings
        .snr_db_list
        .iter()
        .flat_map(|&snr| (0..settings.trials).map(move |t| (snr, t)))
        .collect();
    let per_job: Vec<Result<Vec<SensingRecord>>> = jobs
        .par_iter()
        .map(|&(snr, t)| run_one(settings, &mask, snr, t))
        .collect();
    let mut out = Vec::with_capacity(jobs.len() * SensingMethod::ALL.len());
    for r in per_job {
        out.extend(r?);
    }
    Ok(out)
}

/// Per (method, SNR) aggregate under both ARMSE conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmseSummary {
    pub method: SensingMethod,
    pub snr_db: f64,
    pub trials: usize,
    pub median_armse_m: f64,
    /// Mean over trials of the single-trial ARMSE.
    pub mean_armse_m: f64,
    /// Per-target RMSE across trials, averaged over targets.
    pub rms_armse_m: f64,
    pub converged_fraction: f64,
}

pub fn summarize(records: &[SensingRecord]) -> Vec<ArmseSummary> {
    let mut keys: Vec<(SensingMethod, f64)> = Vec::new();
    for r in records {
        if !keys.iter().any(|&(m, s)| m == r.method && s.to_bits() == r.snr_db.to_bits()) {
            keys.push((r.method, r.snr_db));
        }
    }
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keys.into_iter()
        .map(|(method, snr_db)| {
            let group: Vec<&SensingRecord> = records
                .iter()
                .filter(|r| r.method == method && r.snr_db.to_bits() == snr_db.to_bits())
                .collect();
            let mut values: Vec<f64> = group.iter().map(|r| r.armse_m).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let errors: Vec<Vec<f64>> = group.iter().map(|r| r.target_errors.clone()).collect();
            ArmseSummary {
                method,
                snr_db,
                trials: group.len(),
                median_armse_m: median(&mut values),
                mean_armse_m: mean,
                rms_armse_m: armse_over_trials(&errors).unwrap_or(f64::NAN),
                converged_fraction: group.iter().filter(|r| r.converged).count() as f64 / group.len() as f64,
            }
        })
        .collect()
}
