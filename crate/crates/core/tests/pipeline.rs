use pbow_core::classify::{grid_search, ClassifierSpec, GridResult, GridSpec, SplitSpec};
use pbow_core::datasets::{generate_dataset, generate_shape, LabeledDiagramSet, ShapeClass};
use pbow_core::persistence::rips_diagram;
use pbow_core::{CodebookKind, CodebookSpec, Diagram, Encoder};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_class_set() -> LabeledDiagramSet {
    let mut entries = Vec::new();
    for (label, class) in [ShapeClass::Circle, ShapeClass::Clusters]
        .into_iter()
        .enumerate()
    {
        for k in 0..12 {
            let cloud = generate_shape(class, 60, 0.05, 100 * label as u64 + k).unwrap();
            entries.push((rips_diagram(&cloud, 1, None).unwrap(), label));
        }
    }
    LabeledDiagramSet::new(entries, vec!["circle".into(), "clusters".into()]).unwrap()
}

fn spec(kind: CodebookKind) -> GridSpec {
    GridSpec {
        sizes: vec![4, 8],
        weighted: vec![false, true],
        kind,
        codebook: CodebookSpec {
            sample_size: 500,
            ..Default::default()
        },
        classifier: ClassifierSpec::default(),
        split: SplitSpec {
            repetitions: 3,
            ..Default::default()
        },
    }
}

fn without_timing(mut g: GridResult) -> GridResult {
    for r in &mut g.rows {
        r.wall_time_secs = 0.0;
    }
    g
}

#[test]
fn sweep_separates_loops_from_clusters() {
    let set = two_class_set();
    for kind in [CodebookKind::Kmeans, CodebookKind::Gmm] {
        let g = grid_search(&set, &spec(kind)).unwrap();
        assert_eq!(g.rows.len(), 4);
        assert!(g.best().unwrap().mean_accuracy >= 0.9, "{}", g.to_csv());
    }
}

#[test]
fn sweep_results_do_not_depend_on_thread_count() {
    let set = two_class_set();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| without_timing(grid_search(&set, &spec(CodebookKind::Gmm)).unwrap()))
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(
        a,
        without_timing(grid_search(&set, &spec(CodebookKind::Gmm)).unwrap())
    );
}

#[test]
fn codebooks_only_see_training_diagrams() {
    let set = two_class_set();
    let split = SplitSpec::default().split(&set.labels(), 0).unwrap();
    let train = split.train_diagrams(&set);
    assert_eq!(train.len(), split.train.len());
    // Replacing every test diagram must not change the fitted codebook.
    let mut scrambled = set.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &i in &split.test {
        scrambled.entries[i].0 = Diagram::new(
            1,
            (0..20)
                .map(|_| [rng.random(), rng.random::<f64>() + 0.1])
                .collect(),
        );
    }
    let cb_spec = CodebookSpec {
        n: 6,
        ..Default::default()
    };
    let a = cb_spec.fit(split.train_diagrams(&set).iter(), 5).unwrap();
    let b = cb_spec
        .fit(split.train_diagrams(&scrambled).iter(), 5)
        .unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let mut seen: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..set.len()).collect::<Vec<_>>());
}

#[test]
fn encoder_output_is_deterministic_and_normalized() {
    let set = two_class_set();
    let diagrams: Vec<Diagram> = set.entries.iter().map(|(d, _)| d.clone()).collect();
    for kind in [CodebookKind::Kmeans, CodebookKind::Gmm] {
        let cb = CodebookSpec {
            kind,
            n: 5,
            ..Default::default()
        }
        .fit(&diagrams, 2)
        .unwrap();
        let enc = Encoder::new(&cb).unwrap();
        let a = enc.encode_all(&diagrams);
        assert_eq!(a, enc.encode_all(&diagrams));
        for v in &a {
            let norm: f64 = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(v.is_empty() || norm == 0.0 || (norm - 1.0).abs() < 1e-12);
            assert_eq!(v.codebook_id, cb.id());
        }
    }
}

#[test]
fn generated_dataset_is_balanced_and_finite() {
    let ds = generate_dataset(3, 40, 0.1, 8).unwrap();
    assert_eq!(ds.len(), 18);
    for class in ShapeClass::ALL {
        assert_eq!(ds.iter().filter(|c| c.class == class).count(), 3);
    }
    assert!(ds
        .iter()
        .all(|c| c.cloud.points().flatten().all(|v| v.is_finite())));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noiseless_circle_and_sphere_satisfy_their_equations(seed in any::<u64>(), n in 1usize..200) {
        let circle = generate_shape(ShapeClass::Circle, n, 0.0, seed).unwrap();
        let sphere = generate_shape(ShapeClass::Sphere, n, 0.0, seed).unwrap();
        for p in circle.points() {
            prop_assert!((p[0].hypot(p[1]) - 0.5).abs() <= 1e-12 && p[2] == 0.0);
        }
        for p in sphere.points() {
            prop_assert!(((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 0.5).abs() <= 1e-12);
        }
    }
}
