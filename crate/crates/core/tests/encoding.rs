mod support;

use pbow_core::codebook::{GmmCodebook, GmmComponent};
use pbow_core::encoding::{
    encode_pbow, encode_pbow_linear, encode_spbow, lipschitz_constant, nearest_center_linear,
    normalize, stability_certificate, KdTree,
};
use pbow_core::metrics::wasserstein;
use pbow_core::{Diagram, FeatureVector, KmeansCodebook};
use proptest::prelude::*;
use support::{pbow_witness, stability_batch};

fn point() -> impl Strategy<Value = [f64; 2]> {
    prop_oneof![
        prop::array::uniform2(-1.0f64..1.0),
        // Lattice points make equidistant centers common.
        prop::array::uniform2((-3i32..=3).prop_map(|v| v as f64 * 0.25)),
    ]
}

fn kmeans(centers: Vec<[f64; 2]>) -> KmeansCodebook {
    KmeansCodebook {
        centers,
        iterations_run: 0,
        inertia_history: vec![],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tree_agrees_with_linear_scan(
        centers in prop::collection::vec(point(), 1..40),
        queries in prop::collection::vec(point(), 1..40),
    ) {
        let tree = KdTree::new(&centers);
        for q in &queries {
            let (i, d) = tree.nearest(q).unwrap();
            let (j, e) = nearest_center_linear(q, &centers);
            prop_assert_eq!(i, j);
            prop_assert_eq!(d, e);
        }
        let cb = kmeans(centers);
        let b = Diagram::new(1, queries);
        prop_assert_eq!(encode_pbow(&b, &cb), encode_pbow_linear(&b, &cb));
    }

    #[test]
    fn counts_sum_to_diagram_size(
        centers in prop::collection::vec(point(), 1..20),
        points in prop::collection::vec(point(), 0..60),
    ) {
        let v = encode_pbow(&Diagram::new(1, points.clone()), &kmeans(centers));
        prop_assert_eq!(v.values.iter().sum::<f64>(), points.len() as f64);
        prop_assert!(v.values.iter().all(|c| c.fract() == 0.0 && *c >= 0.0));
    }

    #[test]
    fn encodings_ignore_point_order(
        centers in prop::collection::vec(point(), 1..10),
        mut points in prop::collection::vec(point(), 0..30),
        seed in any::<u64>(),
    ) {
        use rand::SeedableRng;
        let cb = kmeans(centers.clone());
        let gmm = GmmCodebook {
            components: centers
                .iter()
                .map(|&m| GmmComponent { weight: 1.0 / centers.len() as f64, mean: m, covariance: [[0.1, 0.02], [0.02, 0.05]] })
                .collect(),
            iterations_run: 0,
            log_likelihood_history: vec![],
        };
        let a = Diagram::new(1, points.clone());
        rand::seq::SliceRandom::shuffle(&mut points[..], &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let b = Diagram::new(1, points);
        prop_assert_eq!(encode_pbow(&a, &cb), encode_pbow(&b, &cb));
        let (sa, sb) = (encode_spbow(&a, &gmm).unwrap(), encode_spbow(&b, &gmm).unwrap());
        for (x, y) in sa.values.iter().zip(&sb.values) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn spbow_is_additive_over_union(
        a in prop::collection::vec(point(), 0..15),
        b in prop::collection::vec(point(), 0..15),
    ) {
        let gmm = GmmCodebook {
            components: vec![
                GmmComponent { weight: 0.3, mean: [0.0, 0.2], covariance: [[0.2, 0.0], [0.0, 0.1]] },
                GmmComponent { weight: 0.7, mean: [0.5, -0.5], covariance: [[0.05, -0.01], [-0.01, 0.3]] },
            ],
            iterations_run: 0,
            log_likelihood_history: vec![],
        };
        let mut union = a.clone();
        union.extend(&b);
        let va = encode_spbow(&Diagram::new(1, a), &gmm).unwrap().values;
        let vb = encode_spbow(&Diagram::new(1, b), &gmm).unwrap().values;
        let vu = encode_spbow(&Diagram::new(1, union), &gmm).unwrap().values;
        for i in 0..2 {
            prop_assert!((vu[i] - va[i] - vb[i]).abs() <= 1e-12 * vu[i].abs().max(1.0));
        }
    }

    #[test]
    fn normalization_gives_unit_or_zero_vectors(values in prop::collection::vec(-100.0f64..100.0, 1..30)) {
        let n = normalize(&FeatureVector::raw(values.clone()));
        let norm: f64 = n.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if values.iter().all(|&v| v == 0.0) {
            prop_assert_eq!(norm, 0.0);
        } else {
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
        for (raw, out) in values.iter().zip(&n.values) {
            prop_assert!(raw * out >= 0.0);
        }
        prop_assert!(n.normalized);
    }
}

#[test]
fn spbow_bound_holds_for_bijective_perturbations() {
    for seed in 0..40 {
        let r = stability_batch(seed, 10, 500);
        assert_eq!(
            r.violations, 0,
            "codebook seed {seed}: worst ratio {}",
            r.worst_ratio
        );
        assert!(r.worst_ratio <= 1.0 + 1e-9);
    }
}

#[test]
fn pbow_has_no_lipschitz_constant() {
    for eps in [1e-3, 1e-5, 1e-7] {
        let (l1, w1, ratio) = pbow_witness(eps);
        assert_eq!(l1, 2.0);
        assert!((w1 - 2.0 * eps).abs() <= 1e-15);
        assert!(ratio >= 0.99 / eps);
    }
    assert!(pbow_witness(1e-7).2 > 1e6);
}

#[test]
fn sending_a_point_to_the_axis_can_beat_the_bound() {
    // A low-persistence point sitting on a broad component: deleting it moves
    // W₁ by its persistence only, while the density it contributed is large.
    let s: f64 = 0.05;
    let cb = GmmCodebook {
        components: vec![GmmComponent {
            weight: 1.0,
            mean: [0.5, 0.01],
            covariance: [[s * s, 0.0], [0.0, s * s]],
        }],
        iterations_run: 0,
        log_likelihood_history: vec![],
    };
    let c = stability_certificate(&cb).unwrap().c;
    let a = Diagram::new(1, vec![[0.5, 0.01]]);
    let b = Diagram::empty(1);
    let delta =
        (encode_spbow(&a, &cb).unwrap().values[0] - encode_spbow(&b, &cb).unwrap().values[0]).abs();
    let w1 = wasserstein(&a, &b, 1.0).unwrap();
    assert!(delta > c * w1, "{delta} <= {}", c * w1);
}

#[test]
fn certificate_is_weight_times_lipschitz() {
    let comps = vec![
        GmmComponent {
            weight: 0.25,
            mean: [0.0, 0.0],
            covariance: [[0.01, 0.0], [0.0, 0.04]],
        },
        GmmComponent {
            weight: 0.75,
            mean: [1.0, 1.0],
            covariance: [[0.09, 0.03], [0.03, 0.02]],
        },
    ];
    let cb = GmmCodebook {
        components: comps.clone(),
        iterations_run: 0,
        log_likelihood_history: vec![],
    };
    let cert = stability_certificate(&cb).unwrap();
    let expected: Vec<f64> = comps
        .iter()
        .map(|c| lipschitz_constant(&c.gaussian().unwrap()))
        .collect();
    assert_eq!(cert.lipschitz, expected);
    assert_eq!(cert.c, (0.25 * expected[0]).max(0.75 * expected[1]));
}
