use nalgebra::DMatrix;

use super::waveform::{noise_variance, SpectrumMask, TargetSet, WaveformConfig, SPEED_OF_LIGHT};
use super::{Result, SensingError};
use crate::C64;

/// Cramér-Rao bound on range (standard deviation, m) for each target.
///
/// The model is deterministic with unknowns `(r, Re b, Im b)` per target and
/// circular Gaussian noise of variance `sum |b|^2 / SNR`. The Fisher
/// information `(2 / s2) Re(J^H J)` is accumulated over occupied subcarriers
/// only.
pub fn range_crlb(
    config: &WaveformConfig,
    mask: &SpectrumMask,
    snr_db: f64,
    targets: &TargetSet,
) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return Err(SensingError::InvalidInput("CRLB needs at least one target".into()));
    }
    if mask.len() != config.num_subcarriers {
        return Err(SensingError::LengthMismatch {
            expected: config.num_subcarriers,
            actual: mask.len(),
        });
    }
    let k = targets.len();
    if mask.occupied_count() < 2 * k {
        return Err(SensingError::Unidentifiable);
    }
    let s2 = noise_variance(targets.total_power(), snr_db);
    if !(s2 > 0.0 && s2.is_finite()) {
        return Err(SensingError::InvalidInput(format!(
            "noise variance must be positive and finite, got {s2}"
        )));
    }
    let rows = mask.occupied_indices();
    let kappa = 4.0 * std::f64::consts::PI * config.subcarrier_spacing / SPEED_OF_LIGHT;
    let mut jac = DMatrix::<C64>::zeros(rows.len(), 3 * k);
    for (m, t) in targets.targets().iter().enumerate() {
        let step = config.pole_for_range(t.range);
        for (row, &n) in rows.iter().enumerate() {
            let e = step.powu(n as u32);
            jac[(row, 3 * m)] = t.amplitude * e * C64::new(0.0, -kappa * n as f64);
            jac[(row, 3 * m + 1)] = e;
            jac[(row, 3 * m + 2)] = C64::new(0.0, 1.0) * e;
        }
    }
    let fim = (jac.adjoint() * &jac).map(|z| 2.0 * z.re / s2);
    let inv = fim
        .clone()
        .cholesky()
        .ok_or(SensingError::Unidentifiable)?
        .inverse();
    (0..k)
        .map(|m| {
            let v = inv[(3 * m, 3 * m)];
            if v > 0.0 && v.is_finite() {
                Ok(v.sqrt())
            } else {
                Err(SensingError::Unidentifiable)
            }
        })
        .collect()
}
