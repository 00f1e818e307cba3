mod common;

use exactbpdn::data::{parse_vector, read_matrix_market, read_path, write_matrix_market, write_path, write_vector_raw};
use exactbpdn::{generate_instance, solution_path, CscMatrix, DesignMatrix, DynamicRange, HomotopyOptions};
use proptest::prelude::*;
use rand::Rng;

fn ranges() -> impl Strategy<Value = DynamicRange> {
    prop_oneof![Just(DynamicRange::Hdr), Just(DynamicRange::Ldr)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrix_market_round_trip(seed in any::<u64>(), m in 1usize..10, extra in 0usize..6, sparse in any::<bool>()) {
        let n = m + extra;
        let mut rng = common::rng(seed);
        let dense = common::gaussian(&mut rng, m, n).map(|v| if rng.random_bool(0.3) { 0.0 } else { v * 1e3 });
        let a = if sparse {
            let trip: Vec<_> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| dense[(i, j)] != 0.0)
                .map(|(i, j)| (i, j, dense[(i, j)])).collect();
            DesignMatrix::sparse(CscMatrix::from_triplets(m, n, &trip).unwrap()).unwrap()
        } else {
            DesignMatrix::dense(dense.clone()).unwrap()
        };
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.mtx");
        write_matrix_market(&a, std::fs::File::create(&file).unwrap()).unwrap();
        let back = read_matrix_market(&file).unwrap();
        prop_assert_eq!(back.is_sparse(), sparse);
        prop_assert_eq!(back.to_dense(), dense);
    }

    #[test]
    fn raw_vectors_round_trip(seed in any::<u64>(), m in 1usize..50) {
        let mut rng = common::rng(seed);
        let v = common::gaussian_vec(&mut rng, m) * 1e-7;
        let mut buf = Vec::new();
        write_vector_raw(&v, &mut buf).unwrap();
        prop_assert_eq!(parse_vector(&buf).unwrap(), v);
    }

    #[test]
    fn generator_contract(seed in any::<u64>(), m in 1usize..30, extra in 0usize..30, range in ranges()) {
        let n = m + extra;
        let k = (m / 4).max(1);
        let g1 = generate_instance(m, n, k, seed, range).unwrap();
        let g2 = generate_instance(m, n, k, seed, range).unwrap();
        prop_assert_eq!(g1.a.to_dense(), g2.a.to_dense());
        prop_assert_eq!(&g1.b, &g2.b);
        for norm in g1.a.column_norms() {
            prop_assert!((norm - 1.0).abs() <= 1e-12);
        }
        let x = g1.x_ref.as_ref().unwrap();
        prop_assert_eq!(x.iter().filter(|v| **v != 0.0).count(), k);
    }

    #[test]
    fn paths_round_trip_bit_exactly(seed in any::<u64>(), m in 2usize..12) {
        let inst = common::instance(seed, m, 2 * m);
        let (path, _) = solution_path(&inst.a, &inst.b, &HomotopyOptions::default()).unwrap();
        let meta = serde_json::json!({ "seed": seed });
        let mut buf = Vec::new();
        write_path(&path, &meta, &mut buf).unwrap();
        let (back, meta_back) = read_path(buf.as_slice()).unwrap();
        prop_assert_eq!(meta_back, meta);
        prop_assert_eq!(back.len(), path.len());
        for (x, y) in path.breakpoints().iter().zip(back.breakpoints()) {
            prop_assert_eq!(x.t.to_bits(), y.t.to_bits());
            prop_assert!(x.x.iter().zip(y.x.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert!(x.p.iter().zip(y.p.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
