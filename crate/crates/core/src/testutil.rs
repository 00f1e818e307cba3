use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::linalg::DEFAULT_RANK_TOL;
use crate::nnls::Bound;

pub(crate) fn random_matrix<R: Rng>(rng: &mut R, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

/// Exhaustive NNLS: every independent column subset of the non-pinned
/// variables, solved by unconstrained least squares and kept when feasible.
pub(crate) fn brute_force_nnls(
    a: &DMatrix<f64>,
    signs: &[f64],
    bounds: &[Bound],
    target: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let (m, n) = a.shape();
    let cand: Vec<usize> = (0..n).filter(|&j| bounds[j] != Bound::Zero).collect();
    let mut best = (DVector::zeros(n), target.norm_squared());
    for mask in 1u32..1 << cand.len() {
        let idx: Vec<usize> = (0..cand.len()).filter(|c| mask & (1 << c) != 0).map(|c| cand[c]).collect();
        if idx.len() > m {
            continue;
        }
        let b = DMatrix::from_fn(m, idx.len(), |r, c| a[(r, idx[c])] * signs[idx[c]]);
        let qr = b.clone().qr();
        let r = qr.r();
        if (0..idx.len()).any(|i| r[(i, i)].abs() <= DEFAULT_RANK_TOL * b.norm()) {
            continue;
        }
        let mut qtb = target.clone();
        qr.q_tr_mul(&mut qtb);
        let z = r.solve_upper_triangular(&qtb.rows(0, idx.len()).into_owned()).unwrap();
        if idx.iter().zip(z.iter()).any(|(&j, &zj)| bounds[j] == Bound::NonNeg && zj < 0.0) {
            continue;
        }
        let obj = (&b * &z - target).norm_squared();
        if obj < best.1 {
            let mut u = DVector::zeros(n);
            for (&j, &zj) in idx.iter().zip(z.iter()) {
                u[j] = zj;
            }
            best = (u, obj);
        }
    }
    best
}
