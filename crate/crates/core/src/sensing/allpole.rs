use nalgebra::{DMatrix, DVector};

use super::linalg::{eigenvalues, least_squares, truncated_svd, HankelOperator};
use super::waveform::{FrequencySnapshot, RangeProfile, SpectrumMask, WaveformConfig};
use super::{Result, SensingError};
use crate::C64;

/// Poles with magnitude above this are projected back onto the unit circle.
pub const POLE_MAGNITUDE_CAP: f64 = 1.0;

/// Relative singular-value floor below which a direction counts as absent.
const RANK_FLOOR: f64 = 1e-10;

/// Poles and complex amplitudes of a sum-of-exponentials model.
#[derive(Debug, Clone, PartialEq)]
pub struct AllPoleEstimate {
    poles: Vec<C64>,
    amplitudes: Vec<C64>,
    raw_magnitudes: Vec<f64>,
}

impl AllPoleEstimate {
    fn new(poles: Vec<C64>, amplitudes: Vec<C64>, raw_magnitudes: Vec<f64>) -> Self {
        debug_assert_eq!(poles.len(), amplitudes.len());
        debug_assert_eq!(poles.len(), raw_magnitudes.len());
        Self {
            poles,
            amplitudes,
            raw_magnitudes,
        }
    }

    pub fn model_order(&self) -> usize {
        self.poles.len()
    }

    pub fn poles(&self) -> &[C64] {
        &self.poles
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// Pole magnitudes as estimated, before any projection.
    pub fn raw_magnitudes(&self) -> &[f64] {
        &self.raw_magnitudes
    }

    /// Evaluates `sum_m b_m p_m^n` for `n in 0..len`.
    pub fn synthesize(&self, len: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); len];
        for (&p, &b) in self.poles.iter().zip(&self.amplitudes) {
            let mut phasor = b;
            for s in out.iter_mut() {
                *s += phasor;
                phasor *= p;
            }
        }
        out
    }

    fn unit_circle_poles(&self) -> Vec<C64> {
        self.poles
            .iter()
            .map(|p| {
                let r = p.norm();
                if r > 0.0 {
                    p / r
                } else {
                    C64::new(1.0, 0.0)
                }
            })
            .collect()
    }
}

/// Least-squares amplitudes of `poles` against `samples` on the `rows` only.
fn fit_amplitudes(samples: &[C64], rows: &[usize], poles: &[C64]) -> Vec<C64> {
    let vander = DMatrix::from_fn(rows.len(), poles.len(), |i, m| poles[m].powu(rows[i] as u32));
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&n| samples[n]));
    least_squares(&vander, &rhs).iter().copied().collect()
}

fn check_order(len: usize, observed: usize, model_order: usize, pencil: usize) -> Result<()> {
    if model_order == 0 {
        return Err(SensingError::InvalidInput("model order must be at least 1".into()));
    }
    if observed < 2 * model_order {
        return Err(SensingError::InvalidInput(format!(
            "{observed} observed subcarriers cannot identify {model_order} poles"
        )));
    }
    if pencil < model_order || pencil + model_order + 1 > len {
        return Err(SensingError::InvalidInput(format!(
            "pencil parameter {pencil} outside [{model_order}, {}]",
            len.saturating_sub(model_order + 1)
        )));
    }
    Ok(())
}

/// Matrix-pencil fit on a fully populated sample vector, returning the right
/// block of the truncated SVD for warm-starting the next call.
fn fit_poles(
    samples: &[C64],
    observed: &[usize],
    model_order: usize,
    pencil: usize,
    warm: Option<&DMatrix<C64>>,
) -> Result<(AllPoleEstimate, DMatrix<C64>)> {
    let h = HankelOperator::new(samples, samples.len() - pencil);
    let tsvd = truncated_svd(&h, model_order, warm);
    let top = tsvd.singular_values.first().copied().unwrap_or(0.0);
    let achieved = if top > f64::MIN_POSITIVE {
        tsvd.singular_values
            .iter()
            .filter(|&&s| s > top * RANK_FLOOR)
            .count()
    } else {
        0
    };
    if achieved < model_order {
        return Err(SensingError::DegenerateSignal {
            achieved,
            model_order,
        });
    }
    // Shift invariance of the signal subspace: U2 = U1 * Phi, eig(Phi) = poles.
    let u = &tsvd.u;
    let rows = u.nrows();
    let u1 = u.rows(0, rows - 1).into_owned();
    let u2 = u.rows(1, rows - 1).into_owned();
    let mut phi = DMatrix::zeros(model_order, model_order);
    for k in 0..model_order {
        let col = least_squares(&u1, &u2.column(k).into_owned());
        phi.set_column(k, &col);
    }
    let raw = eigenvalues(phi);
    let raw_magnitudes: Vec<f64> = raw.iter().map(|p| p.norm()).collect();
    let poles: Vec<C64> = raw
        .iter()
        .map(|&p| {
            let r = p.norm();
            if r > POLE_MAGNITUDE_CAP {
                p / r
            } else {
                p
            }
        })
        .collect();
    let amplitudes = fit_amplitudes(samples, observed, &poles);
    Ok((
        AllPoleEstimate::new(poles, amplitudes, raw_magnitudes),
        tsvd.right_block,
    ))
}

/// Fits `model_order` poles to a populated snapshot by the TSVD matrix pencil.
///
/// The Hankel matrix is built from every sample; amplitudes are solved by
/// least squares over the mask-occupied samples only. Blanked positions must
/// already hold a meaningful fill (see [`recover_blank_band`]) unless the mask
/// is full.
pub fn estimate_all_pole(
    snapshot: &FrequencySnapshot,
    model_order: usize,
    pencil_parameter: usize,
) -> Result<AllPoleEstimate> {
    let observed = snapshot.mask().occupied_indices();
    check_order(snapshot.len(), observed.len(), model_order, pencil_parameter)?;
    fit_poles(
        snapshot.samples(),
        &observed,
        model_order,
        pencil_parameter,
        None,
    )
    .map(|(e, _)| e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySettings {
    pub model_order: usize,
    /// Defaults to one third of the sample length.
    pub pencil_parameter: Option<usize>,
    pub max_iterations: usize,
    /// Relative change of the blank-band fill that ends the iteration.
    pub tolerance: f64,
}

impl RecoverySettings {
    pub fn new(model_order: usize) -> Self {
        Self {
            model_order,
            pencil_parameter: None,
            max_iterations: 50,
            tolerance: 1e-6,
        }
    }

    pub fn pencil_for(&self, len: usize) -> usize {
        self.pencil_parameter.unwrap_or(len / 3)
    }
}

/// Pencil fit over the sample windows that contain no blank, used to seed
/// the blank fill. `None` when the mask leaves too few such windows.
fn observed_window_poles(samples: &[C64], mask: &SpectrumMask, model_order: usize) -> Option<Vec<C64>> {
    let mut runs = Vec::new();
    let mut start = None;
    for i in 0..=mask.len() {
        let occ = i < mask.len() && mask.is_occupied(i);
        match (occ, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    let longest = runs.iter().map(|(a, b)| b - a).max()?;
    let window = (longest / 2).max(model_order + 1);
    let starts: Vec<usize> = runs
        .iter()
        .filter(|(a, b)| b - a >= window)
        .flat_map(|&(a, b)| a..=b - window)
        .collect();
    if starts.len() < model_order {
        return None;
    }
    let y = DMatrix::from_fn(window, starts.len(), |r, c| samples[starts[c] + r]);
    let svd = y.svd(true, false);
    let u = svd.u?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let top = svd.singular_values[order[0]];
    if !(top > f64::MIN_POSITIVE) || svd.singular_values[order[model_order - 1]] <= top * RANK_FLOOR {
        return None;
    }
    let lead = DMatrix::from_fn(window, model_order, |r, c| u[(r, order[c])]);
    let u1 = lead.rows(0, window - 1).into_owned();
    let u2 = lead.rows(1, window - 1).into_owned();
    let mut phi = DMatrix::zeros(model_order, model_order);
    for k in 0..model_order {
        phi.set_column(k, &least_squares(&u1, &u2.column(k).into_owned()));
    }
    Some(eigenvalues(phi).into_iter().map(|p| if p.norm() > 0.0 { p / p.norm() } else { p }).collect())
}

/// Result of [`recover_blank_band`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlankRecovery {
    /// Denoised, fully occupied snapshot synthesized from the final model.
    pub snapshot: FrequencySnapshot,
    /// Final model with poles on the unit circle.
    pub estimate: AllPoleEstimate,
    pub iterations: usize,
    pub converged: bool,
    /// Relative change of the blank fill in the last iteration.
    pub final_change: f64,
}

/// Iteratively fills blanked subcarriers from an all-pole model of the
/// observed ones.
///
/// Blanks start from a pencil fit over the windows that avoid every blank
/// (zero when the mask is too fragmented for one). Each iteration fits poles to the current samples,
/// projects them onto the unit circle, refits amplitudes on the observed
/// samples and rewrites the blanks from the model. The loop ends when the
/// blank fill changes by less than `tolerance` (relative) or after
/// `max_iterations`; in the latter case the last iterate is returned with
/// `converged = false`. Occupied samples in the output are replaced by the
/// model as well, which denoises them.
pub fn recover_blank_band(
    snapshot: &FrequencySnapshot,
    settings: &RecoverySettings,
) -> Result<BlankRecovery> {
    let len = snapshot.len();
    let pencil = settings.pencil_for(len);
    let observed = snapshot.mask().occupied_indices();
    let blanks = snapshot.mask().blank_indices();
    check_order(len, observed.len(), settings.model_order, pencil)?;

    let mut samples = snapshot.samples().to_vec();
    let mut warm: Option<DMatrix<C64>> = None;
    let mut previous_fill = vec![C64::new(0.0, 0.0); blanks.len()];
    let mut iterations = 0;
    let mut converged = blanks.is_empty();
    let mut final_change = 0.0;
    let mut model;

    if !blanks.is_empty() {
        if let Some(poles) = observed_window_poles(&samples, snapshot.mask(), settings.model_order) {
            let amplitudes = fit_amplitudes(&samples, &observed, &poles);
            let seeded = AllPoleEstimate::new(poles.clone(), amplitudes, vec![1.0; poles.len()]).synthesize(len);
            for (slot, &i) in previous_fill.iter_mut().zip(&blanks) {
                *slot = seeded[i];
                samples[i] = seeded[i];
            }
        }
    }

    loop {
        let (raw, block) = fit_poles(&samples, &observed, settings.model_order, pencil, warm.as_ref())?;
        warm = Some(block);
        let poles = raw.unit_circle_poles();
        let amplitudes = fit_amplitudes(&samples, &observed, &poles);
        model = AllPoleEstimate::new(poles, amplitudes, raw.raw_magnitudes.clone());
        if blanks.is_empty() {
            break;
        }
        iterations += 1;
        let synthesized = model.synthesize(len);
        let fill: Vec<C64> = blanks.iter().map(|&i| synthesized[i]).collect();
        let delta: f64 = fill
            .iter()
            .zip(&previous_fill)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale: f64 = fill.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        final_change = if scale > 0.0 { delta / scale } else { 0.0 };
        for (&i, &v) in blanks.iter().zip(&fill) {
            samples[i] = v;
        }
        previous_fill = fill;
        if final_change <= settings.tolerance {
            converged = true;
            break;
        }
        if iterations >= settings.max_iterations {
            break;
        }
    }

    let recovered = FrequencySnapshot::new(model.synthesize(len), SpectrumMask::full(len), snapshot.noise_power())?;
    Ok(BlankRecovery {
        snapshot: recovered,
        estimate: model,
        iterations,
        converged,
        final_change,
    })
}

/// Maps poles to ranges, `r = (-arg p mod 2 pi) c / (4 pi df)`, sorted.
pub fn ranges_from_poles(estimate: &AllPoleEstimate, config: &WaveformConfig) -> RangeProfile {
    RangeProfile::from_pairs(
        estimate
            .poles()
            .iter()
            .zip(estimate.amplitudes())
            .map(|(p, b)| (config.range_for_phase(p.arg()), b.norm()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{apply_mask, synthesize_echo, Target, TargetSet};

    fn three_targets(cfg: &WaveformConfig) -> TargetSet {
        TargetSet::new(
            vec![
                Target { range: 231.7, amplitude: C64::from_polar(1.0, 0.4) },
                Target { range: 588.05, amplitude: C64::from_polar(0.8, -2.1) },
                Target { range: 912.3, amplitude: C64::from_polar(1.2, 1.3) },
            ],
            cfg,
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn single_pole_phase_matches_synthesis() {
        let cfg = WaveformConfig::default_experiment();
        let r = 655.5;
        let ts = TargetSet::new(vec![Target { range: r, amplitude: C64::new(0.3, 0.9) }], &cfg, 0.0).unwrap();
        let snap = synthesize_echo(&ts, &cfg, None, 0).unwrap();
        let est = estimate_all_pole(&snap, 1, 170).unwrap();
        let want = cfg.phase_slope(r);
        let got = est.poles()[0].arg();
        let diff = (got - want).rem_euclid(2.0 * std::f64::consts::PI);
        let diff = diff.min(2.0 * std::f64::consts::PI - diff);
        assert!((diff / want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn three_poles_and_amplitudes_round_trip() {
        let cfg = WaveformConfig::default_experiment();
        let ts = three_targets(&cfg);
        let snap = synthesize_echo(&ts, &cfg, None, 0).unwrap();
        let est = estimate_all_pole(&snap, 3, 170).unwrap();
        let profile = ranges_from_poles(&est, &cfg);
        let mut pairs: Vec<(f64, C64)> = est
            .poles()
            .iter()
            .zip(est.amplitudes())
            .map(|(p, b)| (cfg.range_for_phase(p.arg()), *b))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, (r, b)) in ts.targets().iter().zip(&pairs) {
            assert!((t.range - r).abs() < 1e-6);
            assert!((t.amplitude - b).norm() / t.amplitude.norm() < 1e-6);
        }
        assert_eq!(profile.ranges.len(), 3);
        assert!(profile.ranges.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_model_order_rejected() {
        let cfg = WaveformConfig::default_experiment();
        let snap = synthesize_echo(&three_targets(&cfg), &cfg, None, 0).unwrap();
        assert!(matches!(estimate_all_pole(&snap, 0, 170), Err(SensingError::InvalidInput(_))));
    }

    #[test]
    fn all_zero_snapshot_is_degenerate() {
        let cfg = WaveformConfig::default_experiment();
        let snap = synthesize_echo(&TargetSet::empty(), &cfg, None, 0).unwrap();
        assert_eq!(
            estimate_all_pole(&snap, 2, 170),
            Err(SensingError::DegenerateSignal { achieved: 0, model_order: 2 })
        );
    }

    #[test]
    fn rank_deficiency_reports_achieved_rank() {
        let cfg = WaveformConfig::default_experiment();
        let ts = TargetSet::new(vec![Target { range: 400.0, amplitude: C64::new(1.0, 0.0) }], &cfg, 0.0).unwrap();
        let snap = synthesize_echo(&ts, &cfg, None, 0).unwrap();
        assert_eq!(
            estimate_all_pole(&snap, 3, 170),
            Err(SensingError::DegenerateSignal { achieved: 1, model_order: 3 })
        );
    }

    #[test]
    fn pole_range_mapping() {
        let cfg = WaveformConfig::default_experiment();
        let est = AllPoleEstimate::new(
            vec![cfg.pole_for_range(500.0), C64::new(1.0, 0.0)],
            vec![C64::new(2.0, 0.0), C64::new(0.5, 0.0)],
            vec![1.0, 1.0],
        );
        let p = ranges_from_poles(&est, &cfg);
        assert!(p.ranges[0].abs() < 1e-12);
        assert!((p.ranges[1] - 500.0).abs() < 1e-9);
        assert_eq!(p.magnitudes, vec![0.5, 2.0]);
    }

    #[test]
    fn recovery_without_blanks_is_projection() {
        let cfg = WaveformConfig::default_experiment();
        let ts = three_targets(&cfg);
        let snap = synthesize_echo(&ts, &cfg, Some(20.0), 5).unwrap();
        let out = recover_blank_band(&snap, &RecoverySettings::new(3)).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
        let direct = estimate_all_pole(&snap, 3, 170).unwrap();
        let poles = direct.unit_circle_poles();
        let amps = fit_amplitudes(snap.samples(), &snap.mask().occupied_indices(), &poles);
        let proj = AllPoleEstimate::new(poles, amps, direct.raw_magnitudes().to_vec()).synthesize(512);
        for (a, b) in out.snapshot.samples().iter().zip(&proj) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn noiseless_gap_recovery_matches_uncut_synthesis() {
        let cfg = WaveformConfig::default_experiment();
        let ts = three_targets(&cfg);
        let full = synthesize_echo(&ts, &cfg, None, 0).unwrap();
        let gapped = apply_mask(&full, &SpectrumMask::default_experiment()).unwrap();
        let mut settings = RecoverySettings::new(3);
        settings.tolerance = 1e-12;
        settings.max_iterations = 200;
        let out = recover_blank_band(&gapped, &settings).unwrap();
        assert!(out.snapshot.mask().is_full());
        let blanks = SpectrumMask::default_experiment().blank_indices();
        let num: f64 = blanks.iter().map(|&i| (out.snapshot.samples()[i] - full.samples()[i]).norm_sqr()).sum();
        let den: f64 = blanks.iter().map(|&i| full.samples()[i].norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-6, "rel err {} after {} its", (num / den).sqrt(), out.iterations);
    }

    #[test]
    fn too_few_observations_rejected() {
        let cfg = WaveformConfig::default_experiment();
        let full = synthesize_echo(&three_targets(&cfg), &cfg, None, 0).unwrap();
        let mut occ = vec![false; 512];
        occ[0] = true;
        occ[1] = true;
        let gapped = apply_mask(&full, &SpectrumMask::new(occ).unwrap()).unwrap();
        assert!(recover_blank_band(&gapped, &RecoverySettings::new(3)).is_err());
    }
}
