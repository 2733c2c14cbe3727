use csreg::estimate::intercept_from_mle;
use csreg::experiments::{bootstrap_probabilities, bootstrap_resample, run_replications, MCConfig};
use csreg::io::{read_sample_csv, write_sample_csv};
use csreg::model::{residual_order, simulate};
use csreg::score::{psi1, psi3, GridScan, NearestScan};
use csreg::{mle_fixed_beta, KernelConfig, Method, ModelSpec, Observation, Sample, TruncationSpec};
use proptest::prelude::*;

fn sample_strategy(max_n: usize) -> impl Strategy<Value = Sample> {
    prop::collection::vec((0.0f64..2.0, 0.0f64..2.0, any::<bool>()), 3..max_n).prop_map(|rows| {
        Sample::new(rows.into_iter().map(|(t, x, d)| Observation::new(t, vec![x], d)).collect()).unwrap()
    })
}

fn permuted(sample: &Sample, seed: u64) -> Sample {
    let mut obs = sample.observations().to_vec();
    // deterministic Fisher-Yates from a small LCG
    let mut s = seed | 1;
    for i in (1..obs.len()).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        obs.swap(i, (s >> 33) as usize % (i + 1));
    }
    Sample::new(obs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn residual_order_is_sorted_permutation(s in sample_strategy(40), beta in 0.0f64..1.0) {
        let order = residual_order(&s, &[beta]).unwrap();
        let e = order.entries();
        prop_assert_eq!(e.len(), s.n());
        for w in e.windows(2) {
            prop_assert!(w[0].u < w[1].u || (w[0].u == w[1].u && w[0].index < w[1].index));
        }
        let mut idx: Vec<usize> = e.iter().map(|x| x.index).collect();
        idx.sort_unstable();
        prop_assert_eq!(idx, (0..s.n()).collect::<Vec<_>>());
    }

    #[test]
    fn mle_is_a_distribution_function(s in sample_strategy(40), beta in 0.0f64..1.0) {
        let f = mle_fixed_beta(&s, &[beta]).unwrap();
        prop_assert!(f.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(f.values().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(f.knots().windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(f.eval(f.knots()[0] - 1.0), 0.0);
        for (k, v) in f.knots().iter().zip(f.values()) {
            prop_assert_eq!(f.eval(*k), *v);
        }
    }

    #[test]
    fn mle_ignores_row_order(s in sample_strategy(40), beta in 0.0f64..1.0, seed in any::<u64>()) {
        let p = permuted(&s, seed);
        prop_assert_eq!(mle_fixed_beta(&s, &[beta]).unwrap(), mle_fixed_beta(&p, &[beta]).unwrap());
        let a = psi1(&s, &[beta], TruncationSpec::default()).unwrap();
        let b = psi1(&p, &[beta], TruncationSpec::default()).unwrap();
        prop_assert!((a.value[0] - b.value[0]).abs() <= 1e-12);
        prop_assert_eq!(a.n_used, b.n_used);
    }

    #[test]
    fn psi1_constant_while_order_is_unchanged(s in sample_strategy(30), beta in 0.0f64..1.0) {
        let beta2 = beta + 1e-13;
        let o1: Vec<(usize, bool)> = residual_order(&s, &[beta]).unwrap().entries().iter().map(|e| (e.index, e.delta)).collect();
        let o2: Vec<(usize, bool)> = residual_order(&s, &[beta2]).unwrap().entries().iter().map(|e| (e.index, e.delta)).collect();
        let ties = |b: f64| {
            let o = residual_order(&s, &[b]).unwrap();
            o.entries().windows(2).any(|w| w[0].u == w[1].u)
        };
        prop_assume!(o1 == o2 && !ties(beta) && !ties(beta2));
        let t = TruncationSpec::default();
        prop_assert_eq!(psi1(&s, &[beta], t).unwrap(), psi1(&s, &[beta2], t).unwrap());
    }

    #[test]
    fn shifting_times_shifts_the_intercept(s in sample_strategy(30), beta in 0.0f64..1.0) {
        let shift = 3.0;
        let moved = Sample::new(
            s.iter().map(|o| Observation::new(o.t + shift, o.x.clone(), o.delta)).collect()
        ).unwrap();
        let same_order = |a: &Sample, b: &Sample| {
            let oa = residual_order(a, &[beta]).unwrap();
            let ob = residual_order(b, &[beta]).unwrap();
            let ia: Vec<usize> = oa.entries().iter().map(|e| e.index).collect();
            let ib: Vec<usize> = ob.entries().iter().map(|e| e.index).collect();
            let ta = oa.entries().windows(2).filter(|w| w[0].u == w[1].u).count();
            let tb = ob.entries().windows(2).filter(|w| w[0].u == w[1].u).count();
            ia == ib && ta == tb
        };
        prop_assume!(same_order(&s, &moved));
        let t = TruncationSpec::default();
        let a = psi1(&s, &[beta], t).unwrap();
        let b = psi1(&moved, &[beta], t).unwrap();
        prop_assert_eq!(a.value, b.value);
        let f = mle_fixed_beta(&s, &[beta]).unwrap();
        let g = mle_fixed_beta(&moved, &[beta]).unwrap();
        prop_assert_eq!(f.values(), g.values());
        if let (Ok(x), Ok(y)) = (intercept_from_mle(&f), intercept_from_mle(&g)) {
            prop_assert!((y - x - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn mle_intercept_lies_within_the_knots(s in sample_strategy(40), beta in 0.0f64..1.0) {
        let f = mle_fixed_beta(&s, &[beta]).unwrap();
        match intercept_from_mle(&f) {
            Ok(a) => {
                let lo = f.knots()[0];
                let hi = *f.knots().last().unwrap();
                prop_assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
            }
            Err(_) => prop_assert!(f.total_mass() < 1.0),
        }
    }

    #[test]
    fn score_points_are_accounted_for(s in sample_strategy(40), beta in 0.2f64..0.8, h in 0.05f64..1.0) {
        let t = TruncationSpec::default();
        let a = psi1(&s, &[beta], t).unwrap();
        prop_assert_eq!(a.n_used + a.n_excluded + a.n_outside, s.n());
        let b = psi3(&s, &[beta], t, KernelConfig::new(h).unwrap()).unwrap();
        prop_assert_eq!(b.n_used + b.n_excluded + b.n_outside, s.n());
    }

    #[test]
    fn lazy_scan_picks_the_full_scan_crossing(
        signs in prop::collection::vec(-1i8..=1, 2..60),
        frac in 0.0f64..1.0,
    ) {
        let interval = (0.3, 0.7);
        let m = signs.len();
        let grid = GridScan::run(|_| 0.0, interval, m).unwrap().grid;
        let lookup = |b: f64| {
            let i = grid.iter().position(|&g| g == b).expect("grid point");
            signs[i] as f64 * (1.0 + i as f64)
        };
        let target = interval.0 + frac * (interval.1 - interval.0);
        let full = GridScan::run(lookup, interval, m).unwrap();
        let lazy = NearestScan::run(lookup, interval, m, target).unwrap();
        prop_assert_eq!(lazy.pick, full.nearest(target));
        prop_assert!(lazy.evaluations <= m);
    }

    #[test]
    fn sample_csv_round_trips(s in sample_strategy(30)) {
        let mut buf = Vec::new();
        write_sample_csv(&mut buf, &s).unwrap();
        prop_assert_eq!(read_sample_csv(&buf[..]).unwrap(), s);
    }
}

#[test]
fn bootstrap_keeps_the_design_fixed() {
    let s = simulate(&ModelSpec::standard(), 300, 11).unwrap();
    let probs = bootstrap_probabilities(&s, 0.5, 0.2).unwrap();
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    let a = bootstrap_resample(&s, &probs, 5, 0).unwrap();
    let b = bootstrap_resample(&s, &probs, 5, 1).unwrap();
    for (o, r) in s.iter().zip(a.iter()) {
        assert_eq!((o.t, &o.x), (r.t, &r.x));
    }
    assert_eq!(a, bootstrap_resample(&s, &probs, 5, 0).unwrap());
    assert_ne!(a, b);
}

#[test]
fn replications_do_not_depend_on_thread_count() {
    let model = ModelSpec::standard();
    let mut cfg = MCConfig::new(150, 12);
    cfg.methods = vec![Method::Score1, Method::Score2, Method::Plugin];
    cfg.master_seed = 77;
    let one = run_replications(&model, &cfg).unwrap();
    cfg.parallelism = 4;
    let four = run_replications(&model, &cfg).unwrap();
    assert_eq!(one, four);
    assert!(one.iter().enumerate().all(|(i, r)| r.index == i));
}
