use diamond_gap::bounds::{
    check_delta_ratio, check_fiedler, gap_report_with, prop1_f, theorem_bound, upper_bound,
};
use diamond_gap::capacity::{mac_rate_bits, mac_sum_capacity, rate_bits, waterfill};
use diamond_gap::channel::{channel_to_json, parse_channel};
use diamond_gap::linalg::{logdet_i_plus, sym_eig, Matrix, PsdMatrix};
use diamond_gap::protocol::{
    brute_force_rmac, closed_form_schedule, gamma_prime, lp_rmac, lp_violation, select_pentagon,
    Branch, GammaForm,
};
use diamond_gap::{derive_params, random_diamond, DiamondChannel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::path::Path;

fn matrix(n: usize, m: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0..3.0f64, n * m)
        .prop_map(move |v| Matrix::from_row_major(n, m, v).unwrap())
}

fn square() -> impl Strategy<Value = Matrix> {
    (1usize..=5).prop_flat_map(|n| matrix(n, n))
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn channel() -> impl Strategy<Value = DiamondChannel> {
    (1usize..=4, any::<u64>()).prop_map(|(n, seed)| random_diamond(n, seed, 1.0))
}

fn delta_positive_channel() -> impl Strategy<Value = DiamondChannel> {
    channel().prop_filter("delta > 0", |dc| derive_params(dc).unwrap().delta > 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eigen_matches_nalgebra(g in square()) {
        let s = (&g + &g.transpose()).scale(0.5);
        let eig = sym_eig(&s).unwrap();
        let mut reference: Vec<f64> = to_na(&s).symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in eig.values.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
        let back = eig.reconstruct_with(|x| x);
        prop_assert!((&back - &s).max_abs() <= 1e-11 * (1.0 + s.max_abs()));
    }

    #[test]
    fn determinant_matches_nalgebra(g in square()) {
        let d = to_na(&g).determinant();
        prop_assert!((g.det() - d).abs() <= 1e-9 * (1.0 + d.abs()));
    }

    #[test]
    fn logdet_matches_nalgebra(g in square()) {
        let a = PsdMatrix::gram(&g);
        let n = g.rows();
        let reference = (DMatrix::identity(n, n) + to_na(a.matrix())).determinant().log2();
        prop_assert!((logdet_i_plus(&a).unwrap() - reference).abs() < 1e-9);
    }

    #[test]
    fn waterfill_spends_power_and_beats_rivals(
        h in square(),
        power in 0.05..20.0f64,
        raw in prop::collection::vec(-1.0..1.0f64, 25),
    ) {
        let n = h.cols();
        let wf = waterfill(&h, power).unwrap();
        if !h.is_zero() {
            prop_assert!((wf.covariance.trace() - power).abs() <= 1e-9 * power);
        }
        prop_assert!(wf.covariance.eigenvalues().iter().all(|&x| x >= -1e-12));
        let direct = rate_bits(&h, &wf.covariance).unwrap();
        prop_assert!((direct - wf.capacity_bits).abs() < 1e-9);
        let g = Matrix::from_fn(n, n, |i, j| raw[i * 5 + j]);
        let q = PsdMatrix::gram(&g);
        if q.trace() > 0.0 {
            let q = q.scale(power / q.trace());
            prop_assert!(rate_bits(&h, &q).unwrap() <= wf.capacity_bits + 1e-9);
        }
        let uniform = PsdMatrix::identity(n).scale(power / n as f64);
        prop_assert!(rate_bits(&h, &uniform).unwrap() <= wf.capacity_bits + 1e-9);
    }

    #[test]
    fn waterfill_monotone_in_power(h in square(), p in 0.05..10.0f64, extra in 0.0..5.0f64) {
        let a = waterfill(&h, p).unwrap().capacity_bits;
        let b = waterfill(&h, p + extra).unwrap().capacity_bits;
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn mac_iteration_is_monotone_and_bounded(dc in channel()) {
        let mac = mac_sum_capacity(&dc.h13, &dc.h23, 1.0, 1.0, 1e-10, 10_000).unwrap();
        for w in mac.history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10);
        }
        let joint = waterfill(&dc.h123(), 2.0).unwrap().capacity_bits;
        prop_assert!(mac.c_sum <= joint + 1e-9);
        let check = mac_rate_bits(&dc.h13, &mac.q1, &dc.h23, &mac.q2).unwrap();
        prop_assert!((check - mac.history[mac.history.len() - 1]).abs() < 1e-12);
    }

    #[test]
    fn cut_dominance_and_delta(dc in channel()) {
        let p = derive_params(&dc).unwrap();
        prop_assert!(p.c012 >= p.c01.max(p.c02) - 1e-8);
        prop_assert!(p.c123 >= p.c13.max(p.c23) - 1e-8);
        let fresh = |h: &Matrix| waterfill(h, 1.0).unwrap().capacity_bits;
        let delta = fresh(&dc.h01) * fresh(&dc.h02) - fresh(&dc.h13) * fresh(&dc.h23);
        prop_assert!((p.delta - delta).abs() < 1e-9);
    }

    #[test]
    fn capacities_grow_with_scale(dc in channel(), c in 1.0..4.0f64) {
        let a = derive_params(&dc).unwrap();
        let b = derive_params(&dc.scaled(c)).unwrap();
        for (x, y) in [(a.c01, b.c01), (a.c02, b.c02), (a.c13, b.c13), (a.c23, b.c23), (a.c012, b.c012), (a.c123, b.c123)] {
            prop_assert!(y >= x - 1e-10);
        }
    }

    #[test]
    fn json_round_trip(dc in channel()) {
        let back = parse_channel(&channel_to_json(&dc), Path::new("mem")).unwrap();
        prop_assert_eq!(back, dc);
    }

    #[test]
    fn corrected_gamma_antisymmetric(dc in channel()) {
        let p = derive_params(&dc).unwrap();
        let ps = derive_params(&dc.swap_relays()).unwrap();
        let g = gamma_prime(&p, GammaForm::Corrected);
        let gs = gamma_prime(&ps, GammaForm::Corrected);
        prop_assert!((g + gs).abs() <= 1e-9 * (1.0 + g.abs()));
    }

    #[test]
    fn pentagon_properties(dc in channel()) {
        let p = derive_params(&dc).unwrap();
        let mac = mac_sum_capacity(&dc.h13, &dc.h23, 1.0, 1.0, 1e-9, 10_000).unwrap();
        for branch in [Branch::Branch1, Branch::Branch2] {
            let pent = select_pentagon(&dc, &p, branch).unwrap();
            let kept = if branch == Branch::Branch1 { p.c13 } else { p.c23 };
            prop_assert!(pent.cmacp >= kept - 1e-9);
            prop_assert!(pent.cmacp <= pent.c13p + pent.c23p + 1e-9);
            prop_assert!(pent.cmacp >= pent.c13p.max(pent.c23p) - 1e-9);
            prop_assert!(pent.q1.trace() <= 1.0 + 1e-9 && pent.q2.trace() <= 1.0 + 1e-9);
            prop_assert!(mac.c_sum - pent.cmacp <= 0.5 * dc.n as f64 + 1e-9);
        }
    }

    #[test]
    fn lp_sandwich(dc in delta_positive_channel()) {
        let p = derive_params(&dc).unwrap();
        for branch in [Branch::Branch1, Branch::Branch2] {
            let pent = select_pentagon(&dc, &p, branch).unwrap();
            let lp = lp_rmac(&p, &pent);
            prop_assert!(lp_violation(&p, &pent, &lp.schedule, lp.r_mac) <= 1e-9);
            let s = lp.schedule;
            prop_assert!((s.t1 + s.t2 + s.t3 - 1.0).abs() < 1e-12);
            let grid = brute_force_rmac(&p, &pent, 200);
            prop_assert!(grid <= lp.r_mac + 1e-9);
            prop_assert!(lp.r_mac - grid <= (p.c01 + p.c02 + pent.cmacp) / 200.0);
            if let Some(cf) = closed_form_schedule(&p, &pent, branch).feasible() {
                prop_assert!(cf.r_mac <= lp.r_mac + 1e-9);
                prop_assert!(lp_violation(&p, &pent, &cf.schedule, cf.r_mac) <= 1e-9);
            }
        }
    }

    #[test]
    fn gap_report_invariants(dc in delta_positive_channel()) {
        let p = derive_params(&dc).unwrap();
        for form in [GammaForm::Corrected, GammaForm::Literal] {
            let r = gap_report_with(&dc, &p, form).unwrap();
            prop_assert!((r.kappa - (r.r_up - r.r_ach)).abs() <= 1e-9);
            prop_assert!((r.theorem_bound - r.lemma1_bound - r.lemma2_bound).abs() <= 1e-12);
            prop_assert!(r.kappa <= theorem_bound(dc.n));
            prop_assert!(r.all_checks_pass);
            prop_assert!(r.mac_dominance.holds);
            if r.kappa_reconciled.is_some() {
                prop_assert_eq!(r.kappa_reconciled, Some(true));
            }
            // whichever branch is picked, the larger bound dominates the rate
            let best = upper_bound(&p, Branch::Branch1).unwrap().max(upper_bound(&p, Branch::Branch2).unwrap());
            prop_assert!(r.r_ach <= best + 1e-7);
        }
    }

    #[test]
    fn fiedler_random_pairs(a in square(), seed in any::<u64>()) {
        let n = a.rows();
        let b = random_diamond(n, seed, 1.0).h01;
        let (a, b) = (PsdMatrix::gram(&a), PsdMatrix::gram(&b));
        prop_assert!(check_fiedler(&a, &b).unwrap().holds);
        prop_assert!(check_delta_ratio(&a, &b).unwrap().passed());
    }

    #[test]
    fn prop1_pointwise(n in 1usize..=8, x in 0.0..1e6f64, y in 0.0..1e6f64) {
        prop_assert!(prop1_f(n, x, y) <= 2.0 * n as f64 * (1.0 + 1e-15));
    }
}
