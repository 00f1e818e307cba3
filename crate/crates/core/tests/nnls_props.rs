mod common;

use exactbpdn::linalg::norm_inf;
use exactbpdn::nnls::{cone_projection_direction, solve_nnls, Bound, NnlsOptions, NnlsProblem};
use exactbpdn::{make_dual_point, DesignMatrix, IndexSet, SignVector};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

/// Smallest `||B u - target||^2` over `u >= 0`, by trying every subset of at
/// most `m` columns as the positive support.
fn enumerate_nnls(b: &DMatrix<f64>, target: &DVector<f64>) -> f64 {
    let (m, n) = b.shape();
    let mut best = target.norm_squared();
    for mask in 1u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        if cols.len() > m {
            continue;
        }
        let sub = DMatrix::from_fn(m, cols.len(), |i, k| b[(i, cols[k])]);
        let svd = sub.clone().svd(true, true);
        let Ok(u) = svd.solve(target, 1e-12) else { continue };
        if u.iter().all(|&v| v >= -1e-12) {
            best = best.min((&sub * &u - target).norm_squared());
        }
    }
    best
}

fn random_signs(rng: &mut impl Rng, n: usize) -> SignVector {
    SignVector::new((0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()).unwrap()
}

/// Dual point with a few columns on the boundary: `p` solves `a_j^T p = -s_j`
/// on a random subset and is then rescaled into the feasible set.
fn boundary_point(rng: &mut rand_chacha::ChaCha8Rng, a: &DesignMatrix) -> DVector<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let k = rng.random_range(1..=m.min(n));
    let idx = rand::seq::index::sample(rng, n, k).into_vec();
    let sub = a.gather_columns(&idx, None);
    let rhs = DVector::from_fn(k, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let p = sub.transpose().svd(true, true).solve(&rhs, 1e-12).unwrap();
    let scale = norm_inf(&a.tr_mul(&p));
    p / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matches_enumeration(seed in any::<u64>(), m in 1usize..=6, extra in 0usize..=4) {
        let n = m + extra;
        let mut rng = common::rng(seed);
        let a = DesignMatrix::dense(common::gaussian(&mut rng, m, n)).unwrap();
        let signs = random_signs(&mut rng, n);
        let bounds: Vec<Bound> = (0..n).map(|_| if rng.random_bool(0.8) { Bound::NonNeg } else { Bound::Zero }).collect();
        let target = common::gaussian_vec(&mut rng, m);
        let sol = solve_nnls(&NnlsProblem::new(&a, signs.clone(), bounds.clone(), target.clone()).unwrap(), None, &NnlsOptions::default()).unwrap();
        let open: Vec<usize> = (0..n).filter(|&j| bounds[j] == Bound::NonNeg).collect();
        let b = a.gather_columns(&open, Some(&signs));
        let want = enumerate_nnls(&b, &target);
        let got = sol.residual.norm_squared();
        prop_assert!((got - want).abs() <= 1e-10 * want.max(1e-12), "{got} vs {want}");
        prop_assert!(sol.u.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn residual_does_not_depend_on_warm_start(seed in any::<u64>(), m in 2usize..=10, extra in 0usize..=15) {
        let n = m + extra;
        let mut rng = common::rng(seed);
        let a = DesignMatrix::dense(common::gaussian(&mut rng, m, n)).unwrap();
        let signs = random_signs(&mut rng, n);
        let bounds: Vec<Bound> = (0..n).map(|_| if rng.random_bool(0.7) { Bound::NonNeg } else { Bound::Zero }).collect();
        let target = common::gaussian_vec(&mut rng, m);
        let prob = NnlsProblem::new(&a, signs, bounds, target).unwrap();
        let cold = solve_nnls(&prob, None, &NnlsOptions::default()).unwrap();
        let warm = IndexSet::new((0..n).filter(|_| rng.random_bool(0.5)).collect()).unwrap();
        let hot = solve_nnls(&prob, Some(&warm), &NnlsOptions::default()).unwrap();
        prop_assert!(norm_inf(&(&cold.residual - &hot.residual)) <= 1e-10 * (1.0 + cold.residual.norm()));
    }

    #[test]
    fn cone_projection_identities(seed in any::<u64>(), m in 2usize..=12, extra in 0usize..=18, t_frac in 0.0f64..1.0) {
        let n = m + extra;
        let mut rng = common::rng(seed);
        let a = DesignMatrix::dense(common::gaussian(&mut rng, m, n)).unwrap();
        let b = common::gaussian_vec(&mut rng, m);
        let p = boundary_point(&mut rng, &a);
        let pt = make_dual_point(&a, &p, 1e-8).unwrap();
        let t = if t_frac < 0.2 { 0.0 } else { t_frac };
        let (d, sol) = cone_projection_direction(&a, &pt, t, &b, None, &NnlsOptions::default()).unwrap();
        let dn = d.norm();
        // Complementarity between u and the slopes.
        let slopes = pt.signs().apply(&a.tr_mul(&d));
        for j in 0..n {
            prop_assert!((sol.u[j] * slopes[j]).abs() <= 1e-10 * (1.0 + dn), "j = {j}");
        }
        let energy = d.norm_squared() + (&b + &p * t).dot(&d);
        prop_assert!(energy.abs() <= 1e-9 * (1.0 + d.norm_squared()));
    }
}
