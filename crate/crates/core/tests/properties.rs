use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use proxyfair::data::{synth_cond_independent, Dataset, Population, SynthSpec};
use proxyfair::downstream::{
    expected_error, expected_stats, fit_reductions, pareto_frontier, Ensemble, ReductionsConfig, Split, TradeoffPoint,
};
use proxyfair::fairness::{
    disparity, group_rate, measure_alpha, stats_from_predictions, AuditEntry, FairnessSpec, GroupWeights, WeightTable,
};
use proxyfair::learners::{
    csc_cost, exhaustive_1d_csc, fit_least_squares, prc_classify, CscInstance, SoftClassifier, ThresholdClassifier,
};
use proxyfair::online::{ogd_quadratic_regret, ogd_regret_bound, quadratic_gradient_bound, Quadratic};
use proxyfair::proxy::{
    average_coefficients, fit_alg1_ftpl, fit_alg2_linear, Alg2Config, FtplConfig, ProxyComponent, ProxyKind,
    ProxyModel, TrainingLog,
};
use proxyfair::rng::stream;
use proxyfair::transform::wbst_from_values;

const EQ: FairnessSpec = FairnessSpec::EqualizedError;

/// Random features in [-1, 1], binary columns with both values present, random masses.
fn fixture(seed: u64, n: usize, d: usize, groups: usize) -> Dataset {
    let mut rng = stream(seed, &[7]);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let column = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut c: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        c[0] = 1;
        c[n - 1] = 0;
        c
    };
    let z = (0..groups).map(|_| column(&mut rng)).collect();
    let y = vec![column(&mut rng)];
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Dataset::new(x, z, y, Some(raw.iter().map(|m| m / total).collect())).unwrap()
}

fn classifier(seed: u64, d: usize) -> ThresholdClassifier {
    let mut rng = stream(seed, &[8]);
    ThresholdClassifier::new((0..=d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn proxy_values(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, &[9]);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synthetic_and_split_data_are_valid(seed in any::<u64>(), n in 2usize..300, frac in 0.05f64..0.95) {
        let (ds, _) = synth_cond_independent(seed, n, 2, 2, &SynthSpec::default()).unwrap();
        let (a, b) = ds.split(frac, seed).unwrap();
        for part in [&ds, &a, &b] {
            prop_assert!((part.mass().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for k in 0..part.n_groups() {
                prop_assert!(part.sensitive(k).iter().all(|&v| v <= 1));
            }
            prop_assert!(part.label(0).iter().all(|&v| v <= 1));
        }
        prop_assert_eq!(a.n_rows() + b.n_rows(), n);
    }

    #[test]
    fn group_rate_is_the_conditional_frequency(seed in any::<u64>(), n in 2usize..120) {
        let mut rng = stream(seed, &[1]);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let mut z: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        z[0] = 1;
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let ds = Dataset::new(x, vec![z.clone()], vec![y.clone()], None).unwrap();
        let h = classifier(seed, 2);
        let pred = h.predict(ds.features()).unwrap();
        let group = z.iter().filter(|&&v| v == 1).count() as f64;
        let errors = (0..n).filter(|&i| z[i] == 1 && pred[i] != y[i]).count() as f64;
        let rate = group_rate(&ds, &h, EQ, 0, 0, GroupWeights::True).unwrap();
        prop_assert!((rate - errors / group).abs() <= 1e-14);
    }

    #[test]
    fn parity_does_not_condition_on_labels(seed in any::<u64>(), n in 2usize..100) {
        let ds = fixture(seed, n, 2, 1);
        let h = classifier(seed, 2);
        let w = proxy_values(seed, n);
        let pred = h.predict(ds.features()).unwrap();
        let num: f64 = (0..n).map(|i| ds.mass()[i] * w[i] * f64::from(pred[i])).sum();
        let den: f64 = (0..n).map(|i| ds.mass()[i] * w[i]).sum();
        let rate = group_rate(&ds, &h, FairnessSpec::StatisticalParity, 0, 0, GroupWeights::Values(&[w])).unwrap();
        prop_assert!((rate - num / den).abs() <= 1e-12);
    }

    #[test]
    fn alpha_is_invariant_to_rescaling_the_proxy(seed in any::<u64>(), n in 2usize..100, power in -3i32..6, c in 0.01f64..100.0) {
        let ds = fixture(seed, n, 2, 1);
        let w = proxy_values(seed, n);
        let audit: Vec<AuditEntry> = (0..5)
            .map(|i| AuditEntry { id: i.to_string(), classifier: classifier(seed ^ i, 2), task: 0 })
            .collect();
        let base = measure_alpha(&ds, GroupWeights::Values(std::slice::from_ref(&w)), &audit, EQ).unwrap();
        let exact: Vec<f64> = w.iter().map(|v| v * 2f64.powi(power)).collect();
        let scaled = measure_alpha(&ds, GroupWeights::Values(&[exact]), &audit, EQ).unwrap();
        prop_assert_eq!(&base.rows, &scaled.rows);
        let loose: Vec<f64> = w.iter().map(|v| v * c).collect();
        let other = measure_alpha(&ds, GroupWeights::Values(&[loose]), &audit, EQ).unwrap();
        for (a, b) in base.rows.iter().zip(&other.rows) {
            prop_assert!((a.proxy_rate - b.proxy_rate).abs() <= 1e-12);
        }
    }

    #[test]
    fn disparity_ignores_group_order(seed in any::<u64>(), n in 4usize..100) {
        let ds = fixture(seed, n, 2, 3);
        let h = classifier(seed, 2);
        let forward = disparity(&ds, &h, EQ, 0, GroupWeights::True).unwrap();
        let reversed = ds.select_sensitive(&[2, 0, 1]).unwrap();
        let backward = disparity(&reversed, &h, EQ, 0, GroupWeights::True).unwrap();
        prop_assert_eq!(forward, backward);
        prop_assert!((0.0..=1.0).contains(&forward));
    }

    #[test]
    fn transformed_rates_equal_proxy_weighted_rates(seed in any::<u64>(), n in 1usize..200) {
        let mut rng = stream(seed, &[2]);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let ds = Dataset::new(x, vec![vec![0; n]], vec![y], None).unwrap();
        let zhat = proxy_values(seed, n);
        let h = classifier(seed, 2);
        let doubled = wbst_from_values(&ds, &zhat).unwrap();
        prop_assert!((doubled.dataset.mass().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for spec in [EQ, FairnessSpec::StatisticalParity, FairnessSpec::EqualFpr, FairnessSpec::EqualFnr] {
            let table = WeightTable::build(&doubled.dataset, GroupWeights::True).unwrap().comparison_groups();
            let p = h.prob_one(doubled.dataset.features());
            let Ok(on_doubled) = stats_from_predictions(&doubled.dataset, &p, spec, 0, &table) else { continue };
            let weights = [zhat.clone()];
            let proxy_table = WeightTable::build(&ds, GroupWeights::Values(&weights)).unwrap().comparison_groups();
            let on_source = stats_from_predictions(&ds, &h.prob_one(ds.features()), spec, 0, &proxy_table).unwrap();
            for (a, b) in on_doubled.rates().iter().zip(on_source.rates()) {
                prop_assert!((a - b).abs() <= 1e-12, "{:?}: {} vs {}", spec, a, b);
            }
        }
    }

    #[test]
    fn expected_stats_are_affine_in_the_mixture(seed in any::<u64>(), n in 4usize..80, t in 0.0f64..=1.0) {
        let ds = fixture(seed, n, 2, 1);
        let a = Ensemble::new(vec![classifier(seed, 2), classifier(seed + 1, 2)], vec![0.3, 0.7]).unwrap();
        let b = Ensemble::single(classifier(seed + 2, 2));
        let mix = a.mix(&b, t).unwrap();
        let ea = expected_error(&ds, &a, 0).unwrap();
        let eb = expected_error(&ds, &b, 0).unwrap();
        prop_assert!((expected_error(&ds, &mix, 0).unwrap() - ((1.0 - t) * ea + t * eb)).abs() <= 1e-12);
        for k in 0..1 {
            let ra = group_rate(&ds, &a, EQ, 0, k, GroupWeights::True).unwrap();
            let rb = group_rate(&ds, &b, EQ, 0, k, GroupWeights::True).unwrap();
            let rm = group_rate(&ds, &mix, EQ, 0, k, GroupWeights::True).unwrap();
            prop_assert!((rm - ((1.0 - t) * ra + t * rb)).abs() <= 1e-12);
        }
    }

    #[test]
    fn frontier_members_are_never_dominated(seed in any::<u64>(), count in 1usize..50) {
        let mut rng = stream(seed, &[3]);
        let points: Vec<TradeoffPoint> = (0..count)
            .map(|_| TradeoffPoint {
                kind: "k".into(),
                gamma: 0.0,
                split: Split::Train,
                // Coarse values so ties and duplicates occur.
                error: f64::from(rng.random_range(0..10u8)) / 10.0,
                disparity_true: f64::from(rng.random_range(0..10u8)) / 10.0,
                disparity_proxy: 0.0,
            })
            .collect();
        let front = pareto_frontier(&points).unwrap();
        prop_assert!(!front.is_empty());
        for f in &front {
            for p in &points {
                let dominated = p.error <= f.error
                    && p.disparity_true <= f.disparity_true
                    && (p.error < f.error || p.disparity_true < f.disparity_true);
                prop_assert!(!dominated);
            }
        }
        // Every non-dominated input point is represented.
        for p in &points {
            let dominated = points.iter().any(|q| {
                q.error <= p.error && q.disparity_true <= p.disparity_true
                    && (q.error < p.error || q.disparity_true < p.disparity_true)
            });
            if !dominated {
                prop_assert!(front.iter().any(|f| f.error == p.error && f.disparity_true == p.disparity_true));
            }
        }
        prop_assert!(front.windows(2).all(|w| w[0].error < w[1].error && w[0].disparity_true > w[1].disparity_true));
    }

    #[test]
    fn averaged_model_predicts_the_average(seed in any::<u64>(), n in 1usize..50, d in 1usize..5, iters in 1usize..20) {
        let mut rng = stream(seed, &[4]);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let iterates: Vec<Vec<f64>> = (0..iters).map(|_| (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let model = |coefficients: Vec<f64>| ProxyModel {
            kind: ProxyKind::Mse,
            bound: 1.0,
            components: vec![ProxyComponent { group: 0, coefficients, log: TrainingLog::default() }],
            config: serde_json::Value::Null,
        };
        let averaged = model(average_coefficients(&iterates)).raw_scores(&x, 0);
        let per: Vec<Vec<f64>> = iterates.iter().map(|it| model(it.clone()).raw_scores(&x, 0)).collect();
        for i in 0..n {
            let mean = per.iter().map(|p| p[i]).sum::<f64>() / iters as f64;
            prop_assert!((averaged[i] - mean).abs() <= 1e-12);
        }
    }

    #[test]
    fn model_and_ensemble_json_round_trip_bitwise(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = stream(seed, &[5]);
        let coefficients: Vec<f64> = (0..=d).map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-12..12))).collect();
        let model = ProxyModel {
            kind: ProxyKind::HProxy,
            bound: 1.0,
            components: vec![ProxyComponent { group: 0, coefficients: coefficients.clone(), log: TrainingLog::default() }],
            config: serde_json::Value::Null,
        };
        let back = ProxyModel::from_json(&model.to_json().unwrap()).unwrap();
        prop_assert!(back.components[0].coefficients.iter().zip(&coefficients).all(|(a, b)| a.to_bits() == b.to_bits()));
        let members = vec![ThresholdClassifier::new(coefficients).unwrap(), classifier(seed, d)];
        let w = rng.random::<f64>();
        let ensemble = Ensemble::new(members, vec![w, 1.0 - w]).unwrap();
        prop_assert_eq!(Ensemble::from_json(&ensemble.to_json().unwrap()).unwrap(), ensemble);
    }

    #[test]
    fn exhaustive_search_lower_bounds_the_regression_heuristic(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = stream(seed, &[6]);
        let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let c0: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let c1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let inst = CscInstance::new(&x, c0, c1).unwrap();
        let exact = csc_cost(&inst, &exhaustive_1d_csc(&inst).unwrap()).unwrap();
        let heuristic = csc_cost(&inst, &prc_classify(&inst).unwrap()).unwrap();
        prop_assert!(exact <= heuristic + 1e-12);
        prop_assert_eq!(prc_classify(&inst).unwrap(), prc_classify(&inst).unwrap());
    }

    #[test]
    fn least_squares_is_first_order_optimal(seed in any::<u64>(), n in 3usize..60, d in 1usize..4) {
        let mut rng = stream(seed, &[10]);
        let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let theta = fit_least_squares(&x, &t, Some(&w)).unwrap().coefficients;
        let mut grad = vec![0.0; d + 1];
        for i in 0..n {
            let pred: f64 = (0..d).map(|c| theta[c] * x[(i, c)]).sum::<f64>() + theta[d];
            let r = w[i] * (pred - t[i]);
            for c in 0..d {
                grad[c] += r * x[(i, c)];
            }
            grad[d] += r;
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        prop_assert!(norm <= 1e-6 * n as f64, "{}", norm);
    }

    #[test]
    fn ogd_regret_is_within_the_bound(seed in any::<u64>(), dim in 1usize..5, rounds in 1usize..300) {
        let mut rng = stream(seed, &[11]);
        let radius = rng.random_range(0.5..3.0);
        let losses: Vec<Quadratic> = (0..rounds)
            .map(|_| Quadratic {
                curvature: rng.random_range(0.1..3.0),
                center: (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect(),
            })
            .collect();
        let g = losses.iter().map(|q| quadratic_gradient_bound(q, radius)).fold(0.0, f64::max);
        let regret = ogd_quadratic_regret(&losses, 2.0 * radius, g);
        prop_assert!(regret <= ogd_regret_bound(g, 2.0 * radius, rounds));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dual_variables_respect_their_bounds(seed in any::<u64>(), n in 20usize..60) {
        let (ds, _) = synth_cond_independent(seed, n, 2, 1, &SynthSpec::default()).unwrap();
        let ftpl = FtplConfig { rounds_override: Some(8), draws_override: Some(3), seed, ..FtplConfig::default() };
        let model = fit_alg1_ftpl(&ds, 0, &ftpl).unwrap();
        let log = &model.components[0].log;
        let theory = log.theory.as_ref().unwrap();
        for r in &log.rounds {
            prop_assert!(r.ratio_dual.abs() <= theory.c0);
            prop_assert!(r.classifier_dual.abs() <= theory.c * (1.0 + 1e-12));
        }
        let alg2 = fit_alg2_linear(&ds, 0, &Alg2Config { max_rounds: 30, ..Alg2Config::default() }).unwrap();
        let log = &alg2.components[0].log;
        let theory = log.theory.as_ref().unwrap();
        for r in &log.rounds {
            prop_assert!(r.ratio_dual.abs() <= theory.c0 && r.classifier_dual.abs() <= theory.c);
        }
    }

    #[test]
    fn reductions_see_the_same_groups_in_both_representations(seed in any::<u64>(), n in 10usize..60) {
        let ds = fixture(seed, n, 2, 1);
        let zhat = proxy_values(seed, n);
        let doubled = wbst_from_values(&ds, &zhat).unwrap();
        let config = ReductionsConfig { rounds: 25, gamma: 0.01, ..ReductionsConfig::default() };
        let weights = [zhat.clone()];
        let direct = fit_reductions(&ds, GroupWeights::Values(&weights), EQ, &config).unwrap();
        let via = fit_reductions(&doubled.dataset, GroupWeights::True, EQ, &config).unwrap();
        let (e1, _) = expected_stats(&direct.ensemble, &ds, EQ, 0, GroupWeights::Values(&weights)).unwrap();
        let (e2, _) = expected_stats(&via.ensemble, &doubled.dataset, EQ, 0, GroupWeights::True).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-12, "{} vs {}", e1, e2);
        for k in 0..1 {
            let r1 = group_rate(&ds, &direct.ensemble, EQ, 0, k, GroupWeights::Values(&weights)).unwrap();
            let r2 = group_rate(&doubled.dataset, &via.ensemble, EQ, 0, k, GroupWeights::True).unwrap();
            prop_assert!((r1 - r2).abs() <= 1e-12);
        }
    }
}
