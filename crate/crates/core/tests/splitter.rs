use hororf::horosplit::*;
use hororf::hypgeo::{busemann, IdealPoint, PoincarePoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labelled(dim: usize, n: std::ops::Range<usize>, k: usize) -> impl Strategy<Value = (Vec<PoincarePoint>, Vec<usize>)> {
    prop::collection::vec((prop::collection::vec(-0.6f64..0.6, dim), 0..k), n).prop_map(|rows| {
        rows.into_iter()
            .map(|(c, l)| (PoincarePoint::new(c).unwrap(), l))
            .unzip()
    })
}

fn random_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<PoincarePoint> {
    (0..n)
        .map(|_| PoincarePoint::new(vec![rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)]).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn binary_problems_are_distinct_strict_subsets(
        (points, labels) in labelled(2, 2..40, 6),
        hyper in any::<bool>(),
        beta in prop::sample::select(vec![0.0, 0.9, 0.999]),
    ) {
        let k = { let mut p = labels.clone(); p.sort_unstable(); p.dedup(); p.len() };
        prop_assume!(k >= 2);
        let problems = build_binary_problems(&points, &labels, beta, hyper).unwrap();
        prop_assert!(problems.len() <= 2 * k - 2);
        if !hyper {
            prop_assert_eq!(problems.len(), k);
        }
        let mut keys = std::collections::HashSet::new();
        for p in &problems {
            prop_assert!(!p.positive_classes.is_empty() && p.positive_classes.len() < k);
            prop_assert!(keys.insert(p.positive_classes.clone()));
            for (i, &l) in labels.iter().enumerate() {
                let pos = p.positive_classes.contains(&l);
                prop_assert_eq!(p.sample_signs[i], if pos { 1 } else { -1 });
                prop_assert!(p.per_sample_weight[i] > 0.0);
            }
        }
    }

    #[test]
    fn score_sign_matches_horosphere_membership(
        (points, _) in labelled(3, 1..30, 2),
        mu in 0.01f64..10.0,
        o in -5.0f64..5.0,
        w in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        prop_assume!(w.iter().map(|x| x * x).sum::<f64>() > 1e-6);
        let sol = SplitterSolution { mu, ideal: IdealPoint::new(w).unwrap(), o };
        let h = solution_to_horosphere(&sol);
        prop_assert_eq!(h.offset, -o / mu);
        for p in &points {
            let s = sol.score(p);
            prop_assume!(s.abs() > 1e-9);
            prop_assert_eq!(s > 0.0, h.contains(p));
        }
    }

    #[test]
    fn gain_is_between_zero_and_parent_gini(
        (labels, mask) in (1usize..30).prop_flat_map(|n| (prop::collection::vec(0usize..4, n), prop::collection::vec(any::<bool>(), n)))
    ) {
        let g = information_gain(&labels, &mask).unwrap();
        let mut counts = vec![0; 4];
        labels.iter().for_each(|&l| counts[l] += 1);
        prop_assert!(g >= -1e-15);
        prop_assert!(g <= gini(&counts).unwrap() + 1e-15);
        let flipped: Vec<bool> = mask.iter().map(|m| !m).collect();
        prop_assert!((g - information_gain(&labels, &flipped).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn zero_beta_balance_is_bit_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = random_points(30, &mut rng);
        let labels: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
        let on = SplitterConfig { use_class_balance: true, beta: 0.0, ..Default::default() };
        let off = SplitterConfig { use_class_balance: false, beta: 0.0, ..Default::default() };
        let a = best_split(&points, &labels, &on, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = best_split(&points, &labels, &off, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn balance_weights_follow_effective_numbers() {
    let points: Vec<PoincarePoint> = (0..12).map(|i| PoincarePoint::new(vec![0.05 * i as f64, 0.0]).unwrap()).collect();
    let mut labels = vec![0; 12];
    labels[0] = 1;
    labels[1] = 1;
    let beta = 0.9;
    let problems = build_binary_problems(&points, &labels, beta, false).unwrap();
    let w = |n: i32| (1.0 - beta) / (1.0 - f64::powi(beta, n));
    let p = problems.iter().find(|p| p.positive_classes == [1]).unwrap();
    assert!((p.per_sample_weight[0] - w(2)).abs() < 1e-15);
    assert!((p.per_sample_weight[5] - w(10)).abs() < 1e-15);
    let p = build_binary_problems(&points, &labels, 0.0, false).unwrap();
    assert!(p[0].per_sample_weight.iter().all(|&v| v == 1.0));
}

/// Two mirrored clusters: both one-vs-rest fits reach the same gain, so the
/// winner must be drawn uniformly.
#[test]
fn exact_ties_are_broken_uniformly() {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..8 {
        let y = 0.02 * i as f64 - 0.07;
        points.push(PoincarePoint::new(vec![0.6, y]).unwrap());
        labels.push(0);
        points.push(PoincarePoint::new(vec![-0.6, -y]).unwrap());
        labels.push(1);
    }
    let cfg = SplitterConfig { use_class_balance: false, ..Default::default() };
    let runs = 1000;
    let mut first = 0;
    for seed in 0..runs {
        let c = best_split(&points, &labels, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().unwrap();
        assert_eq!(c.info_gain, 0.5);
        match c.source {
            CandidateSource::OneVsRest(0) => first += 1,
            CandidateSource::OneVsRest(1) => {}
            other => panic!("unexpected source {other}"),
        }
    }
    let expected = runs as f64 / 2.0;
    let chi2 = 2.0 * (first as f64 - expected).powi(2) / expected;
    // 1 degree of freedom, p = 0.01
    assert!(chi2 < 6.635, "chi2 = {chi2}, first = {first}");
}

#[test]
fn fallback_split_is_used_for_every_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points = random_points(40, &mut rng);
    let labels: Vec<usize> = points.iter().map(|p| usize::from(p.coords()[0] > 0.1)).collect();
    for mode in [SplitterMode::AxisAlignedEnum, SplitterMode::RandomIdealFallback, SplitterMode::Optimizer] {
        let cfg = SplitterConfig { mode, n_fallback_ideals: 50, ..Default::default() };
        let c = best_split(&points, &labels, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().unwrap();
        let mask = c.horosphere.inside_mask(&points);
        assert_eq!(c.info_gain, information_gain(&labels, &mask).unwrap());
        for (p, &m) in points.iter().zip(&mask) {
            assert_eq!(m, busemann(&c.horosphere.ideal, p).unwrap() < c.horosphere.offset);
        }
    }
}

#[test]
fn pure_nodes_have_no_split() {
    let points = vec![PoincarePoint::new(vec![0.1, 0.2]).unwrap(); 4];
    let cfg = SplitterConfig::default();
    assert!(best_split(&points, &[2; 4], &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().is_none());
    // identical points with mixed labels cannot be separated
    assert!(best_split(&points, &[0, 1, 0, 1], &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().is_none());
}
