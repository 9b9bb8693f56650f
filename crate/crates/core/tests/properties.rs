use proptest::prelude::*;

use zarforge::bounds::best_roman;
use zarforge::constructions::{greedy_fill, FillPolicy};
use zarforge::local_search::{ripup_repair_search, RipupConfig};
use zarforge::scoring::{score_prospect, SotaTracker};
use zarforge::{can_add, is_valid, parse_matrix, serialize_matrix, BinaryMatrix, ZarParams};

fn matrix(max_m: usize, max_n: usize) -> impl Strategy<Value = BinaryMatrix> {
    (1..=max_m, 1..=max_n).prop_flat_map(|(m, n)| {
        proptest::collection::vec(any::<bool>(), m * n)
            .prop_map(move |bits| BinaryMatrix::from_fn(m, n, |i, j| bits[i * n + j]))
    })
}

fn policy() -> impl Strategy<Value = FillPolicy> {
    prop_oneof![
        Just(FillPolicy::RowMajor),
        Just(FillPolicy::ReverseRowMajor),
        Just(FillPolicy::SparsestRowFirst),
        any::<u64>().prop_map(FillPolicy::Shuffled),
    ]
}

fn valid_part(mat: &BinaryMatrix, q: &ZarParams) -> BinaryMatrix {
    let mut out = BinaryMatrix::zeros(mat.rows(), mat.cols());
    for (i, j) in mat.ones_positions() {
        if can_add(&out, i, j, q).unwrap() {
            out.set(i, j, true);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_output_is_valid_maximal_and_bounded(mat in matrix(7, 9), pol in policy(), s in 2usize..=3, t in 2usize..=3) {
        let q = ZarParams::new(mat.rows(), mat.cols(), s, t).unwrap();
        let start = valid_part(&mat, &q);
        let out = greedy_fill(&start, &q, pol).unwrap();
        prop_assert!(is_valid(&out, &q));
        prop_assert!(start.is_subset_of(&out));
        for (i, j) in out.zero_positions() {
            prop_assert!(!can_add(&out, i, j, &q).unwrap());
        }
        prop_assert!(out.count_ones() as u64 <= best_roman(&q));
    }

    #[test]
    fn search_never_loses_ones(mat in matrix(6, 8), seed in any::<u64>()) {
        let q = ZarParams::new(mat.rows(), mat.cols(), 3, 3).unwrap();
        let start = valid_part(&mat, &q);
        let config = RipupConfig { restarts: 8, improve_iters: 5, seed, ..RipupConfig::standard() };
        let r = ripup_repair_search(&start, &q, &config).unwrap();
        prop_assert!(is_valid(&r.best, &q));
        prop_assert!(r.best_ones >= start.count_ones());
        prop_assert!(r.best_ones as u64 <= best_roman(&q));
    }

    #[test]
    fn text_round_trip(mat in matrix(12, 70)) {
        prop_assert_eq!(parse_matrix(&serialize_matrix(&mat)).unwrap(), mat);
    }

    #[test]
    fn tracker_credits_only_valid_improvements(mats in proptest::collection::vec(matrix(4, 5), 1..20)) {
        let mut tracker = SotaTracker::new();
        let mut last = 0;
        for (it, m) in mats.iter().enumerate() {
            let q = ZarParams::new(m.rows(), m.cols(), 3, 3).unwrap();
            let credited = tracker.update(m, &q, it as u64);
            prop_assert_eq!(credited, is_valid(m, &q) && m.count_ones() as u64 > last);
            prop_assert!(tracker.n_sota() >= last);
            last = tracker.n_sota();
            let s2 = score_prospect(m, &q);
            prop_assert!((0.0..=0.5).contains(&s2));
        }
    }
}
