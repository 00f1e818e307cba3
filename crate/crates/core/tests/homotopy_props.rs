mod common;

use exactbpdn::linalg::norm_inf;
use exactbpdn::verify::dual_objective;
use exactbpdn::{make_dual_point, path_query, solution_path, solve_bpdn, HomotopyOptions, SolveOptions};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn breakpoints_match_direct_solves(inst in common::instances(2..=15, 4)) {
        let (path, _) = solution_path(&inst.a, &inst.b, &HomotopyOptions::default()).unwrap();
        prop_assert_eq!(path.last().t, 0.0);
        for bp in path.breakpoints().iter().filter(|bp| bp.t > 0.0) {
            let (pair, _, _) = solve_bpdn(&inst.a, &inst.b, bp.t, None, &SolveOptions::default()).unwrap();
            prop_assert!(norm_inf(&(&pair.p - &bp.p)) <= 1e-7);
            let (v_path, v_direct) = (dual_objective(&inst.a, &inst.b, bp.t, &bp.p), dual_objective(&inst.a, &inst.b, bp.t, &pair.p));
            prop_assert!((v_path - v_direct).abs() <= 1e-9 * v_direct.abs().max(1e-12));
        }
    }

    #[test]
    fn each_breakpoint_is_an_entry_or_a_departure(inst in common::instances(2..=15, 4)) {
        let (path, _) = solution_path(&inst.a, &inst.b, &HomotopyOptions::default()).unwrap();
        let bps = path.breakpoints();
        for k in 1..bps.len() - 1 {
            let prev = make_dual_point(&inst.a, &bps[k - 1].p, 1e-8).unwrap();
            let cur = make_dual_point(&inst.a, &bps[k].p, 1e-8).unwrap();
            let (e_prev, e) = (prev.equicorrelation(), cur.equicorrelation());
            // Only coordinates that already left the support may drop out of E.
            for j in e_prev.difference(e).iter() {
                prop_assert_eq!(bps[k - 1].x[j], 0.0);
            }
            // An entry is a zero coordinate reaching either face of the constraint.
            let entry = e.iter().any(|j| {
                bps[k].x[j] == 0.0 && (!e_prev.contains(j) || prev.signs().get(j) != cur.signs().get(j))
            });
            let departure = (0..inst.a.ncols()).any(|j| bps[k - 1].x[j] != 0.0 && bps[k].x[j] == 0.0);
            prop_assert!(entry || departure, "breakpoint {} at t = {}", k, bps[k].t);
        }
    }

    #[test]
    fn primal_path_is_continuous(inst in common::instances(2..=15, 4)) {
        let (path, _) = solution_path(&inst.a, &inst.b, &HomotopyOptions::default()).unwrap();
        for bp in path.breakpoints().iter().filter(|bp| bp.t > 0.0) {
            let scale = 1.0 + norm_inf(&bp.x);
            for t in [bp.t * (1.0 - 1e-12), bp.t * (1.0 + 1e-12)] {
                let q = path_query(&path, t).unwrap();
                prop_assert!(norm_inf(&(&q.x - &bp.x)) <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn basis_pursuit_endpoint_is_sparse(inst in common::instances(2..=20, 4)) {
        let (path, _) = solution_path(&inst.a, &inst.b, &HomotopyOptions::default()).unwrap();
        let x = &path.last().x;
        prop_assert!(x.iter().filter(|v| **v != 0.0).count() <= inst.a.nrows());
        prop_assert!(norm_inf(&(inst.a.mul(x) - &inst.b)) <= 1e-9 * (1.0 + norm_inf(&inst.b)));
    }
}
