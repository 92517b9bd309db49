use bpre_core::bpre::{ExpSum, GeometricEnvironment};
use bpre_core::env_laws::{positivity_index_rho, EnvironmentLaw, Normalization};
use bpre_core::estimators::{ks_two_sample, self_normalized, wilson_interval, Moments, WeightedSample};
use bpre_core::random_walk::{path_statistics, WalkPath};
use bpre_core::rwre::{local_time_to_branching, Excursion};
use proptest::prelude::*;

fn increments(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-40.0f64..40.0, 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exp_sum_matches_direct_sum(xs in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let mut acc = ExpSum::origin();
        let mut s = 0.0;
        let mut direct = 1.0f64;
        for x in xs {
            s += x;
            acc.push(s);
            direct += (-s as f64).exp();
        }
        prop_assert!((acc.log_sum() - direct.ln()).abs() < 1e-12 * direct.ln().abs().max(1.0));
    }

    #[test]
    fn telescoping_and_monotone_survival(xs in increments(200)) {
        let env = GeometricEnvironment::from_increments(xs.clone());
        let mut total = 0.0;
        for n in 1..=xs.len() {
            total += env.extinction_at(n);
            prop_assert!((total + env.survival(n) - 1.0).abs() < 1e-12);
            prop_assert!(env.survival(n) <= env.survival(n - 1));
        }
    }

    #[test]
    fn joint_tail_is_monotone_and_exact_at_zero(xs in increments(80), a in 0u64..1000) {
        let env = GeometricEnvironment::from_increments(xs.clone());
        let n = xs.len();
        let p = env.extinction_at(n);
        let at_zero = env.joint_tail(n, 0);
        prop_assert!((at_zero - p).abs() <= 1e-12 * p.max(f64::MIN_POSITIVE));
        let t1 = env.joint_tail(n, a);
        let t2 = env.joint_tail(n, a + 1);
        prop_assert!(t2 <= t1 * (1.0 + 1e-12) && t1 <= p * (1.0 + 1e-12));
    }

    #[test]
    fn generation_tail_bounded_by_extinction(xs in prop::collection::vec(-8.0f64..8.0, 3..40), frac in 0.0f64..1.0, lz in 0.0f64..10.0) {
        let env = GeometricEnvironment::from_increments(xs.clone());
        let n = xs.len();
        let k = ((n - 1) as f64 * frac) as usize;
        let p = env.extinction_at(n);
        let t = env.generation_tail_log(k, n, lz);
        prop_assert!(t >= 0.0 && t <= p);
        prop_assert!(env.generation_tail_log(k, n, lz + 1.0) <= t * (1.0 + 1e-9));
    }

    #[test]
    fn pmf_sums_to_one(xs in prop::collection::vec(-0.5f64..0.5, 1..10)) {
        let env = GeometricEnvironment::from_increments(xs.clone());
        let n = xs.len();
        let total: f64 = (1..200_000u64).map(|j| env.population_pmf(n, j)).sum();
        prop_assert!((total - env.survival(n)).abs() < 1e-9);
    }

    #[test]
    fn weak_passage_precedes_strict(xs in prop::collection::vec(prop::sample::select(vec![-2.0, -1.0, 0.0, 1.0, 2.0]), 1..60)) {
        let st = path_statistics(&WalkPath::from_increments(xs));
        if let (Some(tau), Some(t)) = (st.tau_minus, st.t_minus) {
            prop_assert!(tau <= t);
        }
        if st.t_minus.is_some() {
            prop_assert!(st.tau_minus.is_some());
        }
    }

    #[test]
    fn rho_is_odd_in_beta(alpha in 0.1f64..2.0, beta in -1.0f64..1.0) {
        if let (Ok(a), Ok(b)) = (positivity_index_rho(alpha, beta), positivity_index_rho(alpha, -beta)) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn survival_is_monotone(alpha in 0.6f64..1.95, p in 0.05f64..0.95, x in -50.0f64..50.0, dx in 0.0f64..20.0) {
        let law = EnvironmentLaw::pareto(alpha, p, 1.0).unwrap();
        prop_assert!(law.survival(x).unwrap() >= law.survival(x + dx).unwrap());
    }

    #[test]
    fn scaling_sequence_grows(alpha in 1.05f64..1.95, n in 1u64..100_000) {
        let law = EnvironmentLaw::pareto(alpha, 0.5, 1.0).unwrap();
        for norm in [Normalization::Quantile, Normalization::TruncatedSecondMoment, Normalization::TailBalanced] {
            let a = law.scaling_sequence(n, norm).unwrap();
            let b = law.scaling_sequence(2 * n, norm).unwrap();
            prop_assert!(b >= a, "{:?}: c_{} = {} > c_{} = {}", norm, n, a, 2 * n, b);
        }
    }

    #[test]
    fn ks_is_symmetric(a in prop::collection::vec(-10.0f64..10.0, 1..50), b in prop::collection::vec(-10.0f64..10.0, 1..50)) {
        prop_assert_eq!(ks_two_sample(&a, &b), ks_two_sample(&b, &a));
    }

    #[test]
    fn self_normalized_constant(ws in prop::collection::vec(0.001f64..1000.0, 1..100), c in -5.0f64..5.0) {
        let samples: Vec<_> = ws.iter().enumerate().map(|(i, &w)| WeightedSample { value: i as f64, weight: w }).collect();
        let est = self_normalized(&samples, |_| c).unwrap();
        prop_assert!((est.estimate.mean - c).abs() <= 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn intervals_contain_estimates(s in 0u64..1000, extra in 0u64..1000, xs in prop::collection::vec(-1e3f64..1e3, 2..50)) {
        let prop = wilson_interval(s, s + extra.max(1));
        prop_assert!(prop.ci_low <= prop.estimate && prop.estimate <= prop.ci_high);
        prop_assert!(prop.ci_low >= 0.0 && prop.ci_high <= 1.0);
        let m: Moments = xs.iter().copied().collect();
        let e = m.estimate();
        prop_assert!(e.ci_low <= e.mean && e.mean <= e.ci_high);
    }

    #[test]
    fn excursions_from_random_paths(steps in prop::collection::vec(any::<bool>(), 0..400)) {
        // a +-1 path from 0 that stops at the first visit to -1 (forced at the end)
        let mut path = vec![0i64];
        for up in steps {
            let r = *path.last().unwrap();
            path.push(if up { r + 1 } else { r - 1 });
            if r - 1 == -1 && !up {
                break;
            }
        }
        while *path.last().unwrap() != -1 {
            let r = *path.last().unwrap();
            path.push(r - 1);
        }
        let top = path[..path.len() - 1].iter().copied().max().unwrap() as usize;
        let mut local = vec![0u64; top + 2];
        let mut up = vec![0u64; top + 1];
        for w in path.windows(2) {
            if w[1] > w[0] {
                up[w[1] as usize] += 1;
            }
        }
        for &r in &path {
            local[(r + 1) as usize] += 1;
        }
        let exc = Excursion { trajectory: None, chi: (path.len() - 1) as u64, local_times: local, upcrossings: up, max_level: top, position: -1, capped: false, stopped_above: false };
        let pop = local_time_to_branching(&exc).unwrap();
        prop_assert_eq!(pop.extinction_time, Some(top + 1));
        prop_assert_eq!(pop.sizes[0], 1.0);
    }
}
