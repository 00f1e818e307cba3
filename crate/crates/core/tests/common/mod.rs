#![allow(dead_code)]

use exactbpdn::DesignMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.sample(StandardNormal))
}

/// A random Gaussian instance `(A, b)` of shape `m x n`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub a: DesignMatrix,
    pub b: DVector<f64>,
    pub seed: u64,
}

pub fn instance(seed: u64, m: usize, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DesignMatrix::dense(gaussian(&mut rng, m, n)).unwrap();
    let b = gaussian_vec(&mut rng, m);
    Instance { a, b, seed }
}

/// Instances with `m` in `m_range` and `m <= n <= n_factor * m`.
pub fn instances(m_range: std::ops::RangeInclusive<usize>, n_factor: usize) -> impl Strategy<Value = Instance> {
    (any::<u64>(), m_range)
        .prop_flat_map(move |(seed, m)| (Just(seed), Just(m), m..=n_factor * m))
        .prop_map(|(seed, m, n)| instance(seed, m, n))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
