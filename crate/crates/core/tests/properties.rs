use std::path::Path;

use nalgebra::DMatrix;
use proptest::prelude::*;

use sparfa_lite::analytics::{
    accuracy, auc, mean_likelihood, predict_label, rank_auc, tag_knowledge,
};
use sparfa_lite::data_io::{
    cross_validate_lambda, fold_assignment, holdout_split, read_responses, synthesize,
    write_responses_to, CvOptions, SynthParams,
};
use sparfa_lite::quantized_model::{nll, nll_gradient};
use sparfa_lite::solver::{project_l1_ball, project_nuclear_ball};
use sparfa_lite::{Dataset, FactorMatrix, ObservedResponses, Quantizer, Response, TagMatrix};

fn quantizer() -> impl Strategy<Value = Quantizer> {
    (2usize..=6)
        .prop_flat_map(|p| prop::collection::vec(-3.0f64..3.0, p - 1))
        .prop_map(|mut w| {
            w.sort_by(f64::total_cmp);
            Quantizer::from_interior(w).unwrap()
        })
}

/// A quantizer whose bins are at least 0.2 wide.
fn spread_quantizer() -> impl Strategy<Value = Quantizer> {
    (2usize..=4)
        .prop_flat_map(|p| prop::collection::vec(0.2f64..1.5, p - 1))
        .prop_map(|gaps| {
            let mut w = Vec::with_capacity(gaps.len());
            let mut at = -2.0;
            for g in gaps {
                at += g;
                w.push(at);
            }
            Quantizer::from_interior(w).unwrap()
        })
}

/// Observations over a `q x n` grid, each entry kept with probability ~0.7.
fn observations(q: usize, n: usize, labels: usize) -> impl Strategy<Value = ObservedResponses> {
    prop::collection::vec((any::<bool>(), any::<bool>(), 1..=labels), q * n).prop_map(
        move |cells| {
            let entries = cells
                .into_iter()
                .enumerate()
                .filter(|(_, (a, b, _))| *a || *b)
                .map(|(k, (_, _, label))| Response::new(k / n, k % n, label))
                .collect();
            ObservedResponses::new(q, n, entries).unwrap()
        },
    )
}

fn matrix(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-range..range, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn scored_labels() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec(
        (
            prop::sample::select(vec![-2.0, -0.5, 0.0, 0.3, 1.0, 4.0]),
            any::<bool>(),
        ),
        2..30,
    )
    .prop_filter("both classes", |v| {
        v.iter().any(|x| x.1) && v.iter().any(|x| !x.1)
    })
}

fn pair_count_auc(v: &[(f64, bool)]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for a in v.iter().filter(|x| x.1) {
        for b in v.iter().filter(|x| !x.1) {
            pairs += 1.0;
            wins += if a.0 > b.0 {
                1.0
            } else if a.0 == b.0 {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

proptest! {
    #[test]
    fn likelihoods_sum_to_one(q in quantizer(), z in -50.0f64..50.0) {
        let total: f64 = (1..=q.num_labels()).map(|p| q.label_likelihood(z, p).unwrap()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn likelihoods_sum_to_one_on_boundaries(q in quantizer(), pick in any::<prop::sample::Index>()) {
        let z = q.interior()[pick.index(q.interior().len())];
        let total: f64 = (1..=q.num_labels()).map(|p| q.label_likelihood(z, p).unwrap()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn tail_mass_is_monotone_in_z(q in quantizer(), z in -10.0f64..10.0, dz in 0.0f64..5.0, p in 1usize..6) {
        let p = p.min(q.num_labels());
        let upper = |z: f64| (p..=q.num_labels()).map(|k| q.label_likelihood(z, k).unwrap()).sum::<f64>();
        prop_assert!(upper(z + dz) >= upper(z) - 1e-12);
    }

    #[test]
    fn quantize_lands_in_its_bin(q in quantizer(), x in -5.0f64..5.0) {
        let label = q.quantize(x);
        let (lo, hi) = q.bin(label).unwrap();
        prop_assert!(lo < x && x <= hi);
        prop_assert!(q.label_likelihood(x, label).unwrap() > 0.0);
    }

    #[test]
    fn predicted_label_is_monotone(q in quantizer(), z in -8.0f64..8.0, dz in 0.0f64..3.0) {
        prop_assert!(predict_label(z + dz, &q) >= predict_label(z, &q));
    }

    #[test]
    fn predicted_label_maximises_likelihood(q in quantizer(), z in -8.0f64..8.0) {
        let best = predict_label(z, &q);
        let p_best = q.label_likelihood(z, best).unwrap();
        for p in 1..=q.num_labels() {
            prop_assert!(q.label_likelihood(z, p).unwrap() <= p_best);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(
        (q, obs, z) in (1usize..=5, 1usize..=4, spread_quantizer()).prop_flat_map(|(rows, cols, q)| {
            let labels = q.num_labels();
            (Just(q), observations(rows, cols, labels), matrix(rows, cols, 4.0))
        })
    ) {
        const H: f64 = 1e-5;
        let g = nll_gradient(&FactorMatrix::new(z.clone()).unwrap(), &obs, &q).unwrap();
        for i in 0..z.nrows() {
            for j in 0..z.ncols() {
                let (mut plus, mut minus) = (z.clone(), z.clone());
                plus[(i, j)] += H;
                minus[(i, j)] -= H;
                let fd = (nll(&FactorMatrix::new(plus).unwrap(), &obs, &q).unwrap()
                    - nll(&FactorMatrix::new(minus).unwrap(), &obs, &q).unwrap())
                    / (2.0 * H);
                let got = g.get(i, j);
                let scale = got.abs().max(fd.abs());
                prop_assert!(scale == 0.0 || (got - fd).abs() / scale <= 1e-6, "({i},{j}): {got} vs {fd}");
            }
        }
    }

    #[test]
    fn nuclear_projection_is_feasible_and_idempotent(
        m in (1usize..=8, 1usize..=8).prop_flat_map(|(r, c)| matrix(r, c, 5.0)),
        frac in 0.05f64..1.5,
    ) {
        let m = FactorMatrix::new(m).unwrap();
        let radius = frac * m.nuclear_norm().max(1e-3);
        let p = project_nuclear_ball(&m, radius).unwrap();
        prop_assert!(p.nuclear_norm() <= radius + 1e-8);
        let pp = project_nuclear_ball(&p, radius).unwrap();
        prop_assert!((pp.as_matrix() - p.as_matrix()).amax() <= 1e-8);
    }
}

proptest! {
    #[test]
    fn l1_projection_matches_bisection(v in prop::collection::vec(-20.0f64..20.0, 1..=10), frac in 0.01f64..1.5) {
        let radius = frac * v.iter().map(|x| x.abs()).sum::<f64>().max(1e-3);
        let got = project_l1_ball(&v, radius).unwrap();
        // KKT: soft threshold at the θ found by bisection
        let want: Vec<f64> = if v.iter().map(|x| x.abs()).sum::<f64>() <= radius {
            v.clone()
        } else {
            let mass = |t: f64| v.iter().map(|x| (x.abs() - t).max(0.0)).sum::<f64>();
            let (mut lo, mut hi) = (0.0, 20.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mass(mid) > radius { lo = mid } else { hi = mid }
            }
            v.iter().map(|x| x.signum() * (x.abs() - lo).max(0.0)).collect()
        };
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
        prop_assert!(got.iter().map(|x| x.abs()).sum::<f64>() <= radius + 1e-9);
    }

    #[test]
    fn rank_auc_matches_pair_counting(v in scored_labels()) {
        prop_assert!((rank_auc(&v).unwrap() - pair_count_auc(&v)).abs() <= 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_transform(v in scored_labels()) {
        let squashed: Vec<(f64, bool)> = v.iter().map(|&(s, y)| ((3.0 * s).exp() + 1.0, y)).collect();
        prop_assert!((rank_auc(&v).unwrap() - rank_auc(&squashed).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn metrics_ignore_entry_order(
        (obs, z) in (1usize..=5, 1usize..=5).prop_flat_map(|(r, c)| (observations(r, c, 2), matrix(r, c, 3.0))),
        seed in any::<u64>(),
    ) {
        prop_assume!(!obs.is_empty());
        let q = Quantizer::binary();
        let z = FactorMatrix::new(z).unwrap();
        let mut shuffled = obs.entries().to_vec();
        let order = fold_assignment(shuffled.len(), shuffled.len().max(1), seed);
        let mut keyed: Vec<(usize, Response)> = order.into_iter().zip(shuffled.drain(..)).collect();
        keyed.sort_by_key(|k| k.0);
        let shuffled = ObservedResponses::new(obs.num_questions(), obs.num_learners(), keyed.into_iter().map(|k| k.1).collect()).unwrap();
        prop_assert!((accuracy(&z, &obs, &q).unwrap() - accuracy(&z, &shuffled, &q).unwrap()).abs() <= 1e-12);
        prop_assert!((mean_likelihood(&z, &obs, &q).unwrap() - mean_likelihood(&z, &shuffled, &q).unwrap()).abs() <= 1e-12);
        if let Ok(a) = auc(&z, &obs, &q) {
            prop_assert!((a - auc(&z, &shuffled, &q).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn tag_knowledge_is_the_tagged_mean(
        (a, t) in (1usize..=8, 1usize..=6, 1usize..=4).prop_flat_map(|(q, n, m)| (
            prop::collection::vec(0.0f64..=1.0, q * n).prop_map(move |v| DMatrix::from_vec(q, n, v)),
            prop::collection::vec(any::<bool>(), q * m).prop_map(move |v| {
                let mut t = DMatrix::from_fn(q, m, |i, k| u8::from(v[i * m + k]));
                for i in 0..q { t[(i, i % m)] = 1; }
                for k in 0..m { t[(k % q, k)] = 1; }
                t
            }),
        ))
    ) {
        let names = (0..t.ncols()).map(|k| k.to_string()).collect();
        let b = tag_knowledge(&a, &TagMatrix::new(t.clone(), names).unwrap()).unwrap();
        for j in 0..a.ncols() {
            for k in 0..t.ncols() {
                let rows: Vec<usize> = (0..a.nrows()).filter(|&i| t[(i, k)] == 1).collect();
                let mean = rows.iter().map(|&i| a[(i, j)]).sum::<f64>() / rows.len() as f64;
                let got = b.knowledge[(j, k)];
                prop_assert!((0.0..=1.0).contains(&got));
                prop_assert!((got - mean).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn holdout_split_partitions(
        obs in (1usize..=8, 1usize..=8).prop_flat_map(|(r, c)| observations(r, c, 3)),
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let (train, test) = holdout_split(&obs, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), obs.len());
        prop_assert_eq!(test.len(), (fraction * obs.len() as f64).round() as usize);
        let mut joined: Vec<Response> = train.entries().iter().chain(test.entries()).copied().collect();
        let mut original = obs.entries().to_vec();
        joined.sort_by_key(|r| (r.question, r.learner));
        original.sort_by_key(|r| (r.question, r.learner));
        prop_assert_eq!(joined, original);
        prop_assert_eq!(holdout_split(&obs, fraction, seed).unwrap(), (train, test));
    }

    #[test]
    fn folds_are_balanced(n in 2usize..200, folds in 2usize..10, seed in any::<u64>()) {
        let a = fold_assignment(n, folds, seed);
        prop_assert_eq!(&a, &fold_assignment(n, folds, seed));
        let mut sizes = vec![0usize; folds];
        for f in a { sizes[f] += 1; }
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn responses_file_round_trips(obs in (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| observations(r, c, 4))) {
        prop_assume!(!obs.is_empty());
        let q = Quantizer::evenly_spaced(4).unwrap();
        // keep only rows and columns that appear, as the loader would see them
        let mut qs: Vec<usize> = obs.entries().iter().map(|r| r.question).collect();
        let mut ls: Vec<usize> = obs.entries().iter().map(|r| r.learner).collect();
        qs.sort(); qs.dedup(); ls.sort(); ls.dedup();
        let entries = obs.entries().iter().map(|r| Response::new(
            qs.binary_search(&r.question).unwrap(),
            ls.binary_search(&r.learner).unwrap(),
            r.label,
        )).collect();
        let compact = ObservedResponses::new(qs.len(), ls.len(), entries).unwrap();
        let data = Dataset::new(
            compact,
            q.clone(),
            (0..ls.len()).map(|j| format!("{}", 10 * j + 3)).collect(),
            (0..qs.len()).map(|i| format!("{}", i + 1)).collect(),
        ).unwrap();
        let mut buf = Vec::new();
        write_responses_to(&mut buf, &data).unwrap();
        let back = read_responses(buf.as_slice(), Path::new("mem.csv"), &q).unwrap();
        prop_assert_eq!(back, data);
    }
}

#[test]
fn generator_label_frequencies_match_the_model() {
    // full observation of a 100 x 100 matrix: 1e4 draws
    let q = Quantizer::from_interior(vec![-1.0, 0.0, 1.0]).unwrap();
    let params = SynthParams {
        questions: 100,
        learners: 100,
        rank: 2,
        observed_fraction: 1.0,
        scale: 1.5,
        seed: 11,
    };
    let truth = synthesize(&params, &q).unwrap();
    let mut expected = [0.0; 4];
    let mut variance = [0.0; 4];
    for i in 0..100 {
        for j in 0..100 {
            for p in 1..=4 {
                let pr = q.label_likelihood(truth.z_true.get(i, j), p).unwrap();
                expected[p - 1] += pr;
                variance[p - 1] += pr * (1.0 - pr);
            }
        }
    }
    let counts = truth.responses.label_counts(4);
    for p in 0..4 {
        let dev = (counts[p] as f64 - expected[p]).abs();
        assert!(
            dev <= 3.0 * variance[p].sqrt(),
            "label {}: {} vs {:.1}",
            p + 1,
            counts[p],
            expected[p]
        );
    }
}

#[test]
fn cross_validation_prefers_a_constrained_fit_on_low_rank_data() {
    let q = Quantizer::binary();
    let params = SynthParams {
        questions: 40,
        learners: 30,
        rank: 3,
        observed_fraction: 0.8,
        scale: 2.0,
        seed: 5,
    };
    let truth = synthesize(&params, &q).unwrap();
    let grid = vec![0.1, 10.0, 40.0, 150.0, 1000.0];
    let mut opts = CvOptions::new(3, 9);
    opts.metric = sparfa_lite::data_io::CvMetric::Accuracy;
    let report = cross_validate_lambda(&truth.responses, &q, &grid, &opts).unwrap();
    assert_ne!(report.best_lambda, 0.1, "{report:?}");
    assert_ne!(report.best_lambda, 1000.0, "{report:?}");
}
