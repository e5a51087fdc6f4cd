use super::{Result, SensingError};

/// Minimum-cost assignment of rows to distinct columns (Hungarian method).
///
/// Requires `rows <= cols`; returns the column chosen for each row.
pub fn optimal_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs at least as many columns as rows");
    // 1-based potentials formulation; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if owner[j] > 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

/// Per-truth absolute error under the minimum-total-error assignment.
///
/// Each truth is matched to a distinct estimate or declared missed at cost
/// `miss_penalty`; surplus estimates are ignored. Output follows the order of
/// `true_ranges`.
pub fn matched_errors(true_ranges: &[f64], estimated_ranges: &[f64], miss_penalty: f64) -> Result<Vec<f64>> {
    if true_ranges.is_empty() {
        return Err(SensingError::InvalidInput("ARMSE needs at least one true range".into()));
    }
    let n_est = estimated_ranges.len();
    let cost: Vec<Vec<f64>> = true_ranges
        .iter()
        .map(|t| {
            estimated_ranges
                .iter()
                .map(|e| (t - e).abs())
                .chain(std::iter::repeat_n(miss_penalty, true_ranges.len()))
                .collect()
        })
        .collect();
    let assignment = optimal_assignment(&cost);
    Ok(assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| if j < n_est { cost[i][j] } else { miss_penalty })
        .collect())
}

/// Single-trial ARMSE: mean matched absolute error over targets.
pub fn armse(true_ranges: &[f64], estimated_ranges: &[f64], miss_penalty: f64) -> Result<f64> {
    let errs = matched_errors(true_ranges, estimated_ranges, miss_penalty)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Multi-trial ARMSE: root of the per-target mean square error across trials,
/// averaged over targets. `per_trial[t][k]` is the error of target slot `k`
/// in trial `t`.
pub fn armse_over_trials(per_trial: &[Vec<f64>]) -> Result<f64> {
    let Some(first) = per_trial.first() else {
        return Err(SensingError::InvalidInput("no trials".into()));
    };
    let k = first.len();
    if k == 0 || per_trial.iter().any(|t| t.len() != k) {
        return Err(SensingError::InvalidInput("trials must share a non-empty target count".into()));
    }
    let trials = per_trial.len() as f64;
    let total: f64 = (0..k)
        .map(|slot| (per_trial.iter().map(|t| t[slot] * t[slot]).sum::<f64>() / trials).sqrt())
        .sum();
    Ok(total / k as f64)
}
