use failsim::checkpoint::{run_checkpointing, CheckpointConfig};
use failsim::dist::{compare_tails, Distribution};
use failsim::procgen::generate_renewal;
use failsim::restart::{audit_record, efficiency, run_restart, RestartConfig};
use failsim::rng::StreamKey;
use failsim::rwalk::{find_regenerations, simulate_walk_restart};
use failsim::universal::{
    compute_n_process, compute_trajectory_map, verify_universal, verify_universal_naive, KernelForm,
};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 32,
        ..ProptestConfig::default()
    }
}

fn family() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (0.2..5.0f64).prop_map(|r| Distribution::exponential(r).unwrap()),
        (0.5..3.0f64, 1.1..4.0f64).prop_map(|(s, a)| Distribution::pareto(s, a).unwrap()),
        (0.5..3.0f64, 0.3..3.0f64).prop_map(|(s, k)| Distribution::weibull(s, k).unwrap()),
    ]
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn quantile_inverts_tail(d in family(), u in 0.001..0.999f64) {
        let x = d.quantile(u);
        prop_assert!((d.tail(x) - (1.0 - u)).abs() < 1e-9);
    }

    #[test]
    fn tail_is_monotone(d in family(), a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(d.tail(lo) >= d.tail(hi));
        prop_assert!((0.0..=1.0).contains(&d.tail(hi)));
    }

    #[test]
    fn truncated_mean_is_monotone(d in family(), a in 0.0..10.0f64, b in 0.0..10.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(d.truncated_mean(lo).unwrap() <= d.truncated_mean(hi).unwrap() + 1e-12);
    }

    #[test]
    fn comparison_is_mirrored(a in 0.2..5.0f64, b in 0.2..5.0f64) {
        let v = Distribution::exponential(a).unwrap();
        let w = Distribution::exponential(b).unwrap();
        let vw = compare_tails(&v, &w).unwrap().verdict;
        let wv = compare_tails(&w, &v).unwrap().verdict;
        prop_assert_eq!(vw, wv.mirrored());
    }

    #[test]
    fn window_extension_is_deterministic(seed in any::<u64>(), n in 1usize..200, extra in 0usize..200) {
        let d = Distribution::exponential(1.0).unwrap();
        let mut grown = generate_renewal(d.clone(), d.clone(), n, StreamKey::new(seed, 0));
        grown.ensure(n + extra);
        let direct = generate_renewal(d.clone(), d, n + extra, StreamKey::new(seed, 0));
        prop_assert_eq!(&grown.points()[..=n + extra], &direct.points()[..=n + extra]);
        prop_assert!(direct.points().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn restart_records_audit(seed in any::<u64>(), rate in 1.2..4.0f64) {
        let mut w = generate_renewal(
            Distribution::exponential(rate).unwrap(),
            Distribution::exponential(1.0).unwrap(),
            0,
            StreamKey::new(seed, 1),
        );
        let recs = run_restart(&mut w, 300, &RestartConfig::default()).unwrap();
        for r in &recs {
            prop_assert!(r.actual >= r.ideal);
            prop_assert!(r.aggregated || audit_record(&w, r));
        }
        prop_assert!(efficiency(&recs).ratio <= 1.0);
    }

    #[test]
    fn checkpoint_indices_and_telescoping(seed in any::<u64>(), lambda in 0.2..2.0f64) {
        let mut w = generate_renewal(
            Distribution::exponential(1.0).unwrap(),
            Distribution::exponential(lambda).unwrap(),
            0,
            StreamKey::new(seed, 2),
        );
        let recs = run_checkpointing(&mut w, 200, &CheckpointConfig::default()).unwrap();
        prop_assert!(recs.iter().all(|r| r.end_index > r.start_index));
        prop_assert!(recs.windows(2).all(|p| p[1].start_index == p[0].end_index));
        let total: f64 = recs.iter().map(|r| r.ideal).sum();
        let end = w.point(recs.last().unwrap().end_index);
        prop_assert!((total - end).abs() <= 1e-9 * end.max(1.0));
        prop_assert!(recs.iter().all(|r| r.actual >= w.size(r.start_index)));
    }

    #[test]
    fn n_process_matches_definition(seed in any::<u64>(), lambda in 0.5..2.0f64, b in 5usize..40) {
        let mut w = generate_renewal(
            Distribution::exponential(1.0).unwrap(),
            Distribution::exponential(lambda).unwrap(),
            0,
            StreamKey::new(seed, 3),
        );
        let map = compute_trajectory_map(&mut w, 400, &CheckpointConfig::default()).unwrap();
        let np = compute_n_process(&map, b).unwrap();
        for n in b..map.kappa.len() {
            let naive = (n - b..n).filter(|&m| map.kappa[m] > n).count() as u32;
            prop_assert_eq!(np.get(n), Some(naive));
        }
        for n in b..map.kappa.len() {
            prop_assert_eq!(verify_universal(&map, n, b), verify_universal_naive(&map, n, b));
        }
        for &n in &np.universal_indices {
            prop_assert!(verify_universal(&map, n, b));
        }
    }

    #[test]
    fn walk_is_nearest_neighbour(seed in any::<u64>(), p in 0.0..0.45f64) {
        let mut w = generate_renewal(
            Distribution::exponential(2.0).unwrap(),
            Distribution::exponential(1.0).unwrap(),
            0,
            StreamKey::new(seed, 4),
        );
        let trace = simulate_walk_restart(&mut w, p, 500, &RestartConfig::default()).unwrap();
        prop_assert!(trace.positions.windows(2).all(|s| (s[1] - s[0]).abs() == 1));
        prop_assert_eq!(trace.positions.len(), trace.visits.len() + 1);
        let pos = &trace.positions;
        for j in find_regenerations(&trace) {
            prop_assert!(trace.ladder_epochs.contains(&j));
            prop_assert!(pos[j..].iter().all(|&x| x >= pos[j]));
        }
    }

    #[test]
    fn kernel_rows_are_laws(rate in 0.3..3.0f64, lambda in 0.3..3.0f64, k in 0usize..12) {
        let d = Distribution::exponential(rate).unwrap();
        for form in [KernelForm::Factorized, KernelForm::SharedInterval] {
            let row = form.row(&d, lambda, k);
            prop_assert_eq!(row.len(), k + 2);
            prop_assert!(row.iter().all(|&p| p >= -1e-15));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
    }
}
