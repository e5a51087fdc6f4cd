//! Reference range estimators that work directly on the gapped spectrum.
//!
//! Both are proxies for the usual comparison methods: a zero-padded FFT with
//! parabolic peak refinement, and orthogonal matching pursuit over a range
//! grid restricted to the occupied subcarriers.

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;

use super::linalg::least_squares;
use super::waveform::{FrequencySnapshot, RangeProfile, WaveformConfig};
use super::{Result, SensingError};
use crate::C64;

/// Zero-padded inverse DFT of the (masked) samples, `oversample * N` bins.
pub(crate) fn zero_padded_idft(samples: &[C64], oversample: usize) -> Vec<C64> {
    let k = samples.len() * oversample.max(1);
    let mut buf = vec![C64::new(0.0, 0.0); k];
    buf[..samples.len()].copy_from_slice(samples);
    FftPlanner::new().plan_fft_inverse(k).process(&mut buf);
    buf
}

/// Indices of strict circular local maxima of `values` (ties to the right
/// count as maxima once).
pub(crate) fn local_maxima(values: &[f64]) -> Vec<usize> {
    let k = values.len();
    if k < 3 {
        return Vec::new();
    }
    (0..k)
        .filter(|&i| {
            let prev = values[(i + k - 1) % k];
            let next = values[(i + 1) % k];
            values[i] > 0.0 && values[i] > prev && values[i] >= next
        })
        .collect()
}

fn bin_to_range(bin: f64, bins: usize, config: &WaveformConfig) -> f64 {
    let r_max = config.unambiguous_range();
    (bin / bins as f64 * r_max).rem_euclid(r_max)
}

/// Zero-padded FFT range estimate with three-point parabolic refinement on
/// log-magnitude. Blanked subcarriers enter as zeros.
pub fn fft_range_baseline(
    snapshot: &FrequencySnapshot,
    config: &WaveformConfig,
    oversample_factor: usize,
    num_peaks: usize,
) -> RangeProfile {
    let spectrum = zero_padded_idft(snapshot.samples(), oversample_factor);
    let bins = spectrum.len();
    let mag: Vec<f64> = spectrum.iter().map(|x| x.norm()).collect();
    let mut peaks = local_maxima(&mag);
    peaks.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]));
    peaks.truncate(num_peaks);
    let pairs = peaks
        .into_iter()
        .map(|i| {
            let a = mag[(i + bins - 1) % bins];
            let b = mag[i];
            let c = mag[(i + 1) % bins];
            let offset = if a > 0.0 && c > 0.0 {
                let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
                let denom = la - 2.0 * lb + lc;
                if denom < 0.0 {
                    (0.5 * (la - lc) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            } else {
                0.0
            };
            (bin_to_range(i as f64 + offset, bins, config), b)
        })
        .collect();
    RangeProfile::from_pairs(pairs)
}

fn steering(config: &WaveformConfig, rows: &[usize], range: f64) -> DVector<C64> {
    let step = config.pole_for_range(range);
    DVector::from_iterator(rows.len(), rows.iter().map(|&n| step.powu(n as u32)))
}

fn steering_matrix(config: &WaveformConfig, rows: &[usize], ranges: &[f64]) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(rows.len(), ranges.len());
    for (j, &r) in ranges.iter().enumerate() {
        m.set_column(j, &steering(config, rows, r));
    }
    m
}

fn ls_residual(config: &WaveformConfig, rows: &[usize], y: &DVector<C64>, ranges: &[f64]) -> f64 {
    let a = steering_matrix(config, rows, ranges);
    let x = least_squares(&a, y);
    (y - a * x).norm()
}

/// Golden-section minimization of `f` on `[lo, hi]`.
fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Orthogonal matching pursuit over range steering vectors evaluated on the
/// occupied subcarriers only.
///
/// After `sparsity` atoms are selected, each range is refined once by a
/// golden-section search of the joint least-squares residual within one grid
/// step, holding the other ranges fixed.
pub fn omp_range_baseline(
    snapshot: &FrequencySnapshot,
    config: &WaveformConfig,
    grid_spacing: f64,
    sparsity: usize,
) -> Result<RangeProfile> {
    if !(grid_spacing > 0.0) {
        return Err(SensingError::InvalidInput(format!(
            "grid spacing must be positive, got {grid_spacing}"
        )));
    }
    if sparsity == 0 {
        return Err(SensingError::InvalidInput("sparsity must be at least 1".into()));
    }
    let rows = snapshot.mask().occupied_indices();
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&n| snapshot.samples()[n]));
    if y.norm() == 0.0 {
        return Ok(RangeProfile::default());
    }
    let r_max = config.unambiguous_range();
    let grid: Vec<f64> = (1..)
        .map(|g| g as f64 * grid_spacing)
        .take_while(|&r| r < r_max)
        .collect();
    if grid.len() < sparsity {
        return Err(SensingError::InvalidInput(format!(
            "grid of {} atoms cannot hold {sparsity} targets",
            grid.len()
        )));
    }
    let dictionary = steering_matrix(config, &rows, &grid);

    let mut selected: Vec<usize> = Vec::with_capacity(sparsity);
    let mut residual = y.clone();
    for _ in 0..sparsity {
        let corr = dictionary.ad_mul(&residual);
        let best = (0..grid.len())
            .filter(|g| !selected.contains(g))
            .max_by(|&a, &b| corr[a].norm().total_cmp(&corr[b].norm()))
            .expect("grid larger than sparsity");
        selected.push(best);
        let ranges: Vec<f64> = selected.iter().map(|&g| grid[g]).collect();
        let a = steering_matrix(config, &rows, &ranges);
        let x = least_squares(&a, &y);
        residual = &y - a * x;
        if residual.norm() <= 1e-12 * y.norm() {
            break;
        }
    }

    let mut ranges: Vec<f64> = selected.iter().map(|&g| grid[g]).collect();
    for k in 0..ranges.len() {
        let centre = ranges[k];
        let lo = (centre - grid_spacing).max(0.0);
        let hi = (centre + grid_spacing).min(r_max);
        let mut trial = ranges.clone();
        let refined = golden_section(
            |r| {
                trial[k] = r;
                ls_residual(config, &rows, &y, &trial)
            },
            lo,
            hi,
            1e-9,
        );
        // keep the grid point when refinement does not help (on-grid targets)
        let mut candidate = ranges.clone();
        candidate[k] = refined;
        if ls_residual(config, &rows, &y, &candidate) < ls_residual(config, &rows, &y, &ranges) {
            ranges = candidate;
        }
    }
    let a = steering_matrix(config, &rows, &ranges);
    let x = least_squares(&a, &y);
    Ok(RangeProfile::from_pairs(
        ranges.into_iter().zip(x.iter().map(|v| v.norm())).collect(),
    ))
}
