//! Small dense complex linear-algebra helpers for the sensing chain.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::C64;

/// Leading singular triplets of a matrix.
#[derive(Debug, Clone)]
pub(crate) struct TruncatedSvd {
    /// Left singular vectors, `m x rank`.
    pub u: DMatrix<C64>,
    pub singular_values: Vec<f64>,
    /// Orthonormal right basis of the full block (`n x block`), reusable as a
    /// warm start for a nearby matrix.
    pub right_block: DMatrix<C64>,
}

const SUBSPACE_TOL: f64 = 1e-10;
const SUBSPACE_MAX_ITER: usize = 300;
const OVERSAMPLE: usize = 4;

/// Matrix-free linear map used by the subspace iteration.
pub(crate) trait LinearOperator {
    fn shape(&self) -> (usize, usize);
    /// `A X` for a block of column vectors.
    fn apply(&self, x: &DMatrix<C64>) -> DMatrix<C64>;
    /// `A^H Y` for a block of column vectors.
    fn apply_adjoint(&self, y: &DMatrix<C64>) -> DMatrix<C64>;
}

impl LinearOperator for DMatrix<C64> {
    fn shape(&self) -> (usize, usize) {
        DMatrix::shape(self)
    }

    fn apply(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        self * x
    }

    fn apply_adjoint(&self, y: &DMatrix<C64>) -> DMatrix<C64> {
        self.ad_mul(y)
    }
}

#[cfg(test)]
pub(crate) fn hankel(samples: &[C64], rows: usize) -> DMatrix<C64> {
    let cols = samples.len() + 1 - rows;
    DMatrix::from_fn(rows, cols, |i, j| samples[i + j])
}

/// Hankel matrix `H[i, j] = s[i + j]` applied by FFT convolution.
pub(crate) struct HankelOperator {
    rows: usize,
    cols: usize,
    fft_len: usize,
    spectrum: Vec<C64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl HankelOperator {
    pub(crate) fn new(samples: &[C64], rows: usize) -> Self {
        let n = samples.len();
        let cols = n + 1 - rows;
        let fft_len = (n + rows.max(cols)).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum = vec![C64::new(0.0, 0.0); fft_len];
        spectrum[..n].copy_from_slice(samples);
        forward.process(&mut spectrum);
        Self {
            rows,
            cols,
            fft_len,
            spectrum,
            forward,
            inverse,
        }
    }

    /// `out[i] = sum_j s[i + j] x[j]` for `i < out_len`, `x.len()` terms.
    fn correlate(&self, x: impl ExactSizeIterator<Item = C64> + DoubleEndedIterator, out_len: usize) -> Vec<C64> {
        let len = x.len();
        let mut buf = vec![C64::new(0.0, 0.0); self.fft_len];
        for (slot, v) in buf.iter_mut().zip(x.rev()) {
            *slot = v;
        }
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        buf[len - 1..len - 1 + out_len].iter().map(|v| v * scale).collect()
    }
}

impl LinearOperator for HankelOperator {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn apply(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.rows, x.ncols());
        for (k, col) in x.column_iter().enumerate() {
            let v = self.correlate(col.iter().copied(), self.rows);
            out.set_column(k, &DVector::from_vec(v));
        }
        out
    }

    fn apply_adjoint(&self, y: &DMatrix<C64>) -> DMatrix<C64> {
        // H^H y = conj(H^T conj(y)), and H^T is the Hankel matrix of the same
        // sequence with the dimensions swapped.
        let mut out = DMatrix::zeros(self.cols, y.ncols());
        for (k, col) in y.column_iter().enumerate() {
            let v = self.correlate(col.iter().map(|c| c.conj()), self.cols);
            out.set_column(k, &DVector::from_iterator(self.cols, v.into_iter().map(|c| c.conj())));
        }
        out
    }
}

fn orthonormal_columns(m: DMatrix<C64>) -> DMatrix<C64> {
    m.qr().q()
}

/// Rank-`rank` truncated SVD by block subspace iteration on `A A^H`.
///
/// Iterates until the leading `rank`-dimensional left subspace stops moving
/// (out-of-span residual below 1e-10) so the result agrees
/// with a full SVD to working precision, while costing only
/// `O(m n (rank + 4))` per sweep. `warm_start` is a right block from a
/// previous call on a nearby matrix.
pub(crate) fn truncated_svd<A: LinearOperator>(
    a: &A,
    rank: usize,
    warm_start: Option<&DMatrix<C64>>,
) -> TruncatedSvd {
    let (m, n) = a.shape();
    let block = (rank + OVERSAMPLE).min(m).min(n);
    let start = match warm_start {
        Some(w) if w.shape() == (n, block) => w.clone(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5eed);
            DMatrix::from_fn(n, block, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        }
    };
    let mut q = orthonormal_columns(a.apply(&start));
    let mut prev_u: Option<DMatrix<C64>> = None;
    let mut iterations = 0;
    loop {
        iterations += 1;
        // B = Q^H A; its SVD gives the Ritz approximation on span(Q).
        let b = a.apply_adjoint(&q).adjoint();
        let svd = b.clone().svd(true, false);
        let ub = svd.u.expect("u requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
        let lead: Vec<usize> = order.iter().copied().take(rank).collect();
        let ub_lead = DMatrix::from_fn(ub.nrows(), lead.len(), |i, j| ub[(i, lead[j])]);
        let u = &q * ub_lead;
        let converged = match &prev_u {
            Some(p) => subspace_distance(p, &u) < SUBSPACE_TOL,
            None => false,
        };
        let right = orthonormal_columns(b.adjoint());
        if converged || iterations >= SUBSPACE_MAX_ITER {
            let singular_values = lead.iter().map(|&k| svd.singular_values[k]).collect();
            return TruncatedSvd {
                u,
                singular_values,
                right_block: right,
            };
        }
        prev_u = Some(u);
        q = orthonormal_columns(a.apply(&right));
    }
}

/// Distance between the spans of two orthonormal bases, measured as the
/// Frobenius norm of the component of `b` outside span(`a`). Computed from
/// the residual directly so that tiny angles are not lost to cancellation.
fn subspace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let residual = b - a * (a.adjoint() * b);
    residual.norm()
}

/// Minimum-norm least-squares solution of `a x = b`.
pub(crate) fn least_squares(a: &DMatrix<C64>, b: &DVector<C64>) -> DVector<C64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = smax * 1e-13 * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, eps).expect("u and v computed")
}

/// Eigenvalues of a small general complex matrix.
pub(crate) fn eigenvalues(m: DMatrix<C64>) -> Vec<C64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    let (_, t) = m.schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn truncated_matches_full_svd() {
        // low-rank plus small perturbation
        let l = random_matrix(60, 3, 1);
        let r = random_matrix(3, 40, 2);
        let a = &l * &r * C64::new(5.0, 0.0) + random_matrix(60, 40, 3) * C64::new(0.01, 0.0);
        let t = truncated_svd(&a, 3, None);
        let full = a.clone().svd(true, false);
        let mut sv: Vec<f64> = full.singular_values.iter().copied().collect();
        sv.sort_by(|x, y| y.total_cmp(x));
        for k in 0..3 {
            assert!((t.singular_values[k] - sv[k]).abs() < 1e-9 * sv[0]);
        }
        let fu = full.u.unwrap();
        let mut order: Vec<usize> = (0..full.singular_values.len()).collect();
        order.sort_by(|&x, &y| full.singular_values[y].total_cmp(&full.singular_values[x]));
        let lead = DMatrix::from_fn(60, 3, |i, j| fu[(i, order[j])]);
        assert!(subspace_distance(&lead, &t.u) < 1e-8);
    }

    #[test]
    fn hankel_operator_matches_dense() {
        let s: Vec<C64> = random_matrix(37, 1, 5).iter().copied().collect();
        let dense = hankel(&s, 25);
        let op = HankelOperator::new(&s, 25);
        assert_eq!(LinearOperator::shape(&op), (25, 13));
        let x = random_matrix(13, 3, 6);
        let y = random_matrix(25, 2, 7);
        assert!((op.apply(&x) - &dense * &x).norm() < 1e-12);
        assert!((op.apply_adjoint(&y) - dense.adjoint() * &y).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_diagonalizable_matrix() {
        let p = random_matrix(3, 3, 9);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from_polar(1.0, 0.3),
            C64::from_polar(1.0, -1.2),
            C64::from_polar(0.9, 2.5),
        ]));
        let m = &p * &d * p.clone().try_inverse().unwrap();
        let mut ev = eigenvalues(m);
        ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        let mut want = vec![
            C64::from_polar(1.0, 0.3),
            C64::from_polar(1.0, -1.2),
            C64::from_polar(0.9, 2.5),
        ];
        want.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        for (a, b) in ev.iter().zip(&want) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = random_matrix(20, 3, 4);
        let x = DVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.0, 3.0)]);
        let b = &a * &x;
        let got = least_squares(&a, &b);
        assert!((got - x).norm() < 1e-12);
    }
}
