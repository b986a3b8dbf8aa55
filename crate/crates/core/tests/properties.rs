//! Invariants checked over random instances.

mod common;

use common::{instance, norm_slack, lifted_oracle, random_dataset, random_model, rel_close, rng, transport_lp};
use proptest::prelude::*;
use rand::Rng;
use wadiro::conic::{Backend, ConicProblem, ConicSolver, SolveOptions};
use wadiro::data::{compute_patterns, gen_sampling_vectors, lift_sample, LiftedDataset, SamplingSet};
use wadiro::guarantees::{certify_stability, empirical_deviation_scan, CertifyDomain, CertifyMode, CertifyOptions, Units};
use wadiro::harness::{normalize_columns, random_search, spearman, EvalConstraint, Family, ModelTemplate};
use wadiro::model::{self, map_to_snn, predict_snn};
use wadiro::robustness::{
    corrupt_and_split, generate_outliers, sample_benchmark, sw_distance, w1_1d, BenchmarkFn, BenchmarkSpec, CorruptionSpec,
    OutlierGenConfig, PhiSchedule, SplitRatios,
};
use wadiro::train::{
    cone_violation, decoupled_loss, matrix_form_loss, objective_oracle, penalty_norm, train, training_view, NormKind, Program,
    RawWeights, TrainConfig,
};

fn random_weights(r: &mut impl Rng, p: usize, d: usize, with_bias: bool) -> RawWeights {
    let mut block = || (0..p).map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
    let nu = block();
    let omega = block();
    RawWeights { nu, omega, bias: with_bias.then(|| r.random_range(-1.0..1.0)) }
}

fn cfg(program: Program, neurons: usize, with_bias: bool) -> TrainConfig {
    let mut c = TrainConfig::new(program);
    c.max_neurons = neurons;
    c.with_bias = with_bias;
    c.solver_tol = 1e-9;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoupled_loss_equals_matrix_form(seed in any::<u64>(), n in 1usize..40, d in 1usize..5, p in 1usize..8, with_bias: bool) {
        let mut r = rng(seed);
        let ds = random_dataset(&mut r, n, d);
        let view = training_view(&ds, with_bias);
        let s = gen_sampling_vectors(&view, p, seed, false).unwrap();
        let w = random_weights(&mut r, p, view.d(), with_bias);
        let lifted = LiftedDataset::new(&view, &s, with_bias).unwrap();
        let a = decoupled_loss(&lifted, &w).unwrap();
        let b = matrix_form_loss(&view, &compute_patterns(&view, &s).unwrap(), &w);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn patterns_and_sampling_are_deterministic(seed in any::<u64>(), n in 1usize..30, d in 1usize..4, p in 1usize..12) {
        let ds = random_dataset(&mut rng(seed), n, d);
        let s1 = gen_sampling_vectors(&ds, p, seed, true).unwrap();
        let s2 = gen_sampling_vectors(&ds, p, seed, true).unwrap();
        prop_assert_eq!(&s1, &s2);
        prop_assert_eq!(compute_patterns(&ds, &s1).unwrap(), compute_patterns(&ds, &s2).unwrap());
    }

    #[test]
    fn lifting_is_redundant_and_per_sample(seed in any::<u64>(), n in 2usize..20, d in 1usize..4, p in 1usize..6, with_bias: bool) {
        let ds = random_dataset(&mut rng(seed), n, d);
        let view = training_view(&ds, with_bias);
        let s = gen_sampling_vectors(&view, p, seed, false).unwrap();
        let lifted = LiftedDataset::new(&view, &s, with_bias).unwrap();
        let pd = p * view.d();
        let half = lifted.n() / 2;
        let other = LiftedDataset::new(&view.subset(&(half..n).collect::<Vec<_>>()).unwrap(), &s, with_bias).unwrap();
        for j in 0..n {
            let row = lifted.row(j);
            prop_assert_eq!(&row[..pd], &row[pd..2 * pd]);
            prop_assert_eq!(row, &lift_sample(view.row(j), view.labels()[j], &s, with_bias).unwrap()[..]);
            if j >= half {
                prop_assert_eq!(row, other.row(j - half));
            }
        }
    }

    #[test]
    fn dedup_keeps_each_distinct_pattern_once(seed in any::<u64>(), n in 1usize..25, d in 1usize..4, p in 1usize..20) {
        let ds = random_dataset(&mut rng(seed), n, d);
        let full = gen_sampling_vectors(&ds, p, seed, false).unwrap();
        let dedup = gen_sampling_vectors(&ds, p, seed, true).unwrap();
        let cols = |s: &SamplingSet| {
            let pat = compute_patterns(&ds, s).unwrap();
            (0..s.p()).map(|i| pat.column(i)).collect::<Vec<_>>()
        };
        let (cf, cd) = (cols(&full), cols(&dedup));
        let mut distinct = cf.clone();
        distinct.sort();
        distinct.dedup();
        let mut kept = cd.clone();
        kept.sort();
        prop_assert_eq!(kept.len(), cd.len());
        kept.dedup();
        prop_assert_eq!(kept.len(), cd.len(), "duplicate pattern survived");
        prop_assert_eq!(kept, distinct);
    }

    #[test]
    fn scaled_objective_scales_the_optimum(seed in any::<u64>(), k in 1usize..6, lambda in 0.1f64..10.0) {
        let mut r = rng(seed);
        let mut prob = ConicProblem::new();
        let x = prob.add_vars(k);
        for i in 0..k {
            prob.add_cost(x + i, r.random_range(-1.0..1.0));
            prob.add_le(&[(x + i, 1.0)], 1.0);
            prob.add_ge(&[(x + i, 1.0)], -1.0);
        }
        let row: Vec<(usize, f64)> = (0..k).map(|i| (x + i, r.random_range(-1.0..1.0))).collect();
        prob.add_le(&row, 0.5);
        let opts = SolveOptions::with_tol(1e-9);
        let base = Backend::Clarabel.solve(&prob, &opts).unwrap();
        let scaled = Backend::Clarabel.solve(&prob.scaled_objective(lambda), &opts).unwrap();
        let dense = Backend::Dense.solve(&prob, &opts).unwrap();
        prop_assert!(rel_close(scaled.objective_value, lambda * base.objective_value, 1e-6));
        prop_assert!(rel_close(dense.objective_value, base.objective_value, 1e-6));
        prop_assert!(prob.primal_residual(base.primal.as_ref().unwrap()) <= 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn training_matches_the_lifted_oracle(seed in any::<u64>(), n in 4usize..20, d in 1usize..3, l2: bool, with_bias: bool, eps in 1e-3f64..1.0) {
        let program = if l2 { Program::WadiroL2 { eps } } else { Program::WadiroL1 { eps } };
        let c = cfg(program, 4, with_bias);
        let (ds, s) = instance(seed, n, d, &c);
        let (w, rep) = train(&ds, &s, &c).unwrap();
        let oracle = lifted_oracle(&ds, &s, &c);
        prop_assert!(rel_close(rep.objective_value, oracle, 1e-6), "trained {} oracle {oracle}", rep.objective_value);
        prop_assert!(rel_close(objective_oracle(&ds, &s, &w, &c).unwrap(), oracle, 1e-6));
        let view = training_view(&ds, with_bias);
        prop_assert!(cone_violation(&view, &compute_patterns(&view, &s).unwrap(), &w) <= 1e-7);
    }

    #[test]
    fn backends_agree(seed in any::<u64>(), l2: bool) {
        let program = if l2 { Program::WadiroL2 { eps: 0.1 } } else { Program::WadiroL1 { eps: 0.1 } };
        let mut c = cfg(program, 3, true);
        let (ds, s) = instance(seed, 10, 2, &c);
        let (_, a) = train(&ds, &s, &c).unwrap();
        c.backend = Backend::Dense;
        let (_, b) = train(&ds, &s, &c).unwrap();
        prop_assert!(rel_close(a.objective_value, b.objective_value, 1e-6));
        let again = train(&ds, &s, &c).unwrap().1;
        prop_assert_eq!(again.primal, b.primal);
    }

    #[test]
    fn larger_radius_is_more_conservative(seed in any::<u64>(), l2: bool) {
        let norm = if l2 { NormKind::L2 } else { NormKind::L1 };
        let mut last: Option<(f64, f64, f64)> = None;
        for eps in [0.0, 1e-4, 1e-2, 1.0, 10.0] {
            let program = if l2 { Program::WadiroL2 { eps } } else { Program::WadiroL1 { eps } };
            let c = cfg(program, 4, true);
            let (ds, s) = instance(seed, 15, 2, &c);
            let (w, rep) = train(&ds, &s, &c).unwrap();
            let norm_value = penalty_norm(&w, norm, false);
            if let Some((prev_eps, obj, nv)) = last {
                prop_assert!(rep.objective_value >= obj - 1e-7 * obj.max(1.0));
                let slack = norm_slack(c.solver_tol, obj, eps - prev_eps);
                prop_assert!(norm_value <= nv + 1e-6 * nv.max(1.0) + slack, "eps {eps}: {norm_value} > {nv}");
            }
            last = Some((eps, rep.objective_value, norm_value));
        }
    }

    #[test]
    fn mapped_network_reproduces_training_predictions(seed in any::<u64>(), with_bias: bool) {
        let m = random_model(seed, 20, 2, 6, with_bias, Program::WadiroL1 { eps: 0.01 });
        let snn = map_to_snn(&m);
        let ds = random_dataset(&mut rng(seed), 20, 2);
        let xs: Vec<Vec<f64>> = ds.rows().map(|x| m.scaler.transform_x(x)).collect();
        for x in &xs {
            prop_assert!((m.predict_standardized(x) - predict_snn(&snn, x)).abs() <= 1e-6);
        }
        prop_assert_eq!(model::gate_disagreement(&m, &xs), 0.0);
    }

    #[test]
    fn model_json_round_trips(seed in any::<u64>()) {
        let m = random_model(seed, 15, 3, 4, true, Program::WadiroL2 { eps: 0.05 });
        let text = model::to_json(&m);
        let back = model::from_json(&text).unwrap();
        prop_assert_eq!(model::to_json(&back), text);
        let ds = random_dataset(&mut rng(seed ^ 1), 10, 3);
        for x in ds.rows() {
            prop_assert_eq!(model::predict(&m, x).unwrap().to_bits(), model::predict(&back, x).unwrap().to_bits());
        }
    }

    #[test]
    fn branch_and_bound_matches_exhaustive(seed in any::<u64>(), with_bias: bool, eps in 0.01f64..0.5) {
        let m = random_model(seed, 20, 2, 4, with_bias, Program::WadiroL1 { eps: 0.01 });
        let dom = CertifyDomain::cube(2, -1.0, 1.0, eps);
        let bnb = certify_stability(&m, &dom, &CertifyOptions { gap: 1e-9, ..Default::default() }).unwrap();
        let ex = certify_stability(&m, &dom, &CertifyOptions { mode: CertifyMode::Exhaustive, ..Default::default() }).unwrap();
        prop_assert!((bnb.l_eps - ex.l_eps).abs() <= 1e-6, "{} vs {}", bnb.l_eps, ex.l_eps);
        let scan = empirical_deviation_scan(&m, &dom, Units::Standardized, 9).unwrap();
        prop_assert!(scan.max_deviation <= bnb.l_eps + 1e-6);
        prop_assert!(bnb.upper_bound >= bnb.l_eps - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn w1_matches_transport_and_is_a_metric(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let mut draw = || (0..n).map(|_| r.random_range(-5.0..5.0)).collect::<Vec<f64>>();
        let (u, v, w) = (draw(), draw(), draw());
        let d = w1_1d(&u, &v).unwrap();
        prop_assert!((d - transport_lp(&u, &v)).abs() <= 1e-7);
        prop_assert_eq!(d, w1_1d(&v, &u).unwrap());
        prop_assert_eq!(w1_1d(&u, &u).unwrap(), 0.0);
        prop_assert!(d <= w1_1d(&u, &w).unwrap() + w1_1d(&w, &v).unwrap() + 1e-12);
    }

    #[test]
    fn sliced_distance_in_one_dimension_is_w1(seed in any::<u64>(), n in 1usize..20, l in 1usize..20) {
        let mut r = rng(seed);
        let u: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(-3.0..3.0)]).collect();
        let v: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(-3.0..3.0)]).collect();
        let flat = |p: &[Vec<f64>]| p.iter().map(|x| x[0]).collect::<Vec<_>>();
        let sw = sw_distance(&u, &v, l, seed).unwrap();
        prop_assert!((sw - w1_1d(&flat(&u), &flat(&v)).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn sliced_distance_is_symmetric(seed in any::<u64>(), n in 1usize..15, k in 1usize..4) {
        let mut r = rng(seed);
        let mut pts = || (0..n).map(|_| (0..k).map(|_| r.random_range(-3.0..3.0)).collect()).collect::<Vec<Vec<f64>>>();
        let (u, v) = (pts(), pts());
        prop_assert_eq!(sw_distance(&u, &v, 30, seed).unwrap(), sw_distance(&v, &u, 30, seed).unwrap());
        prop_assert_eq!(sw_distance(&u, &u, 30, seed).unwrap(), 0.0);
    }

    #[test]
    fn normalized_columns_lie_in_unit_interval(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..4) {
        let mut r = rng(seed);
        let table: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| r.random_range(0.0..10.0)).collect()).collect();
        for row in normalize_columns(&table) {
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn spearman_of_monotone_map_is_one(seed in any::<u64>(), n in 2usize..20) {
        let mut r = rng(seed);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v.exp()).collect();
        prop_assume!(x.iter().any(|v| *v != x[0]));
        prop_assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((spearman(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn benchmarks_are_reproducible(seed in any::<u64>(), f in 0usize..4) {
        let function = BenchmarkFn::all()[f];
        let spec = BenchmarkSpec::new(function, 30, seed);
        let a = sample_benchmark(&spec).unwrap();
        prop_assert_eq!(&a, &sample_benchmark(&spec).unwrap());
        let (lo, hi) = function.bounds();
        prop_assert!(a.features().iter().all(|v| (lo..=hi).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn corruption_accounting(seed in any::<u64>(), frac in 0.0f64..0.5) {
        let data = sample_benchmark(&BenchmarkSpec::new(BenchmarkFn::Mccormick, 40, seed)).unwrap();
        let mut og = OutlierGenConfig::new(0, PhiSchedule::PerPoint(0.05), seed);
        og.l = 20;
        let spec = CorruptionSpec {
            outlier_fraction: frac,
            noise_sigma: 0.1,
            noise_splits: Default::default(),
            outlier_split: Default::default(),
            outliers: og,
            seed,
        };
        let cs = corrupt_and_split(&data, &spec, SplitRatios::default()).unwrap();
        let expected = (frac * cs.train_index.len() as f64).round() as usize;
        prop_assert_eq!(cs.train_outliers, expected);
        prop_assert_eq!(cs.outliers.len(), expected);
        prop_assert_eq!(cs.train.n(), cs.train_index.len() + expected);
        prop_assert_eq!(cs.train_index.len() + cs.val_index.len() + cs.test_index.len(), data.n());
        for (j, &orig) in cs.test_index.iter().enumerate() {
            prop_assert_eq!(cs.test.row(j), data.row(orig));
            prop_assert_eq!(cs.test.labels()[j], data.labels()[orig]);
        }
        for a in &cs.outliers.audit {
            prop_assert!(a.shift >= a.phi);
        }
    }

    #[test]
    fn outlier_generation_is_reproducible(seed in any::<u64>()) {
        let data = sample_benchmark(&BenchmarkSpec::new(BenchmarkFn::Pgp, 25, seed)).unwrap();
        let mut og = OutlierGenConfig::new(4, PhiSchedule::PerPoint(0.05), seed);
        og.l = 20;
        let a = generate_outliers(&data, &og).unwrap();
        prop_assert_eq!(&a, &generate_outliers(&data, &og).unwrap());
        prop_assert_eq!(a.len(), 4);
    }

    #[test]
    fn search_selects_the_validation_argmin(seed in any::<u64>()) {
        let data = sample_benchmark(&BenchmarkSpec::new(BenchmarkFn::Mccormick, 45, seed)).unwrap();
        let train_ds = data.subset(&(0..30).collect::<Vec<_>>()).unwrap();
        let val = data.subset(&(30..45).collect::<Vec<_>>()).unwrap();
        let tpl = ModelTemplate { neurons: (2, 4), ..ModelTemplate::new("w", Family::WadiroScnn { norm: None }) };
        let out = random_search(&train_ds, &val, std::slice::from_ref(&tpl), 3, seed, None, None).unwrap();
        let again = random_search(&train_ds, &val, std::slice::from_ref(&tpl), 3, seed, None, None).unwrap();
        prop_assert_eq!(&out.best[0].config, &again.best[0].config);
        let best = out.log.iter().filter_map(|t| t.val.as_ref().map(|v| v.mae)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(out.best[0].val.mae, best);
        let one = random_search(&train_ds, &val, std::slice::from_ref(&tpl), 1, seed, Some(EvalConstraint::Nonnegative), None).unwrap();
        prop_assert_eq!(one.log.len(), 1);
        prop_assert_eq!(&one.best[0].config, &tpl.draw(1, seed)[0]);
    }
}
