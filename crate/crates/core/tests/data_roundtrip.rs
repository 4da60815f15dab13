use cfshift::data::{read_csv, write_csv};
use cfshift::{
    cfl_between, generate, load_embeddings, sample_frequency_bank, save_embeddings, Domain,
    DomainRole, DomainTransform, EmbeddingFormat, FeatureMatrix, LabeledDataset, Scheme,
    SyntheticSpec,
};
use ndarray::Array2;
use proptest::prelude::*;

fn dataset() -> impl Strategy<Value = LabeledDataset> {
    (1..4usize, 1..4usize, 1..4usize).prop_flat_map(|(dim, classes, n_domains)| {
        let domain = (1..6usize).prop_flat_map(move |n| {
            (
                proptest::collection::vec(
                    proptest::num::f64::NORMAL | proptest::num::f64::ZERO,
                    n * dim,
                ),
                proptest::collection::vec(0..classes, n),
            )
        });
        proptest::collection::vec(domain, n_domains).prop_map(move |parts| {
            let domains = parts
                .into_iter()
                .enumerate()
                .map(|(i, (v, labels))| Domain {
                    features: FeatureMatrix::new(
                        Array2::from_shape_vec((labels.len(), dim), v).unwrap(),
                        format!("dom-{i}"),
                    )
                    .unwrap(),
                    labels,
                    role: DomainRole::Source,
                })
                .collect();
            LabeledDataset::new(dim, classes, domains).unwrap()
        })
    })
}

fn same_values(a: &LabeledDataset, b: &LabeledDataset) -> bool {
    a.dim() == b.dim()
        && a.domains().len() == b.domains().len()
        && a.domains().iter().zip(b.domains()).all(|(x, y)| {
            x.id() == y.id()
                && x.labels == y.labels
                && x.features
                    .values()
                    .iter()
                    .zip(y.features.values().iter())
                    .all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn csv_round_trip_is_lossless(ds in dataset()) {
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert!(same_values(&ds, &back));
    }
}

#[test]
fn file_round_trip_through_disk() {
    let ds = generate(&SyntheticSpec::benchmark(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    save_embeddings(&ds, &path).unwrap();
    let back = load_embeddings(&path, EmbeddingFormat::Csv).unwrap();
    assert!(same_values(&ds, &back));
    assert_eq!(back.classes(), 3);
}

#[test]
fn generation_is_deterministic_and_balanced() {
    let spec = SyntheticSpec::graded(3, 4, 6, 25, 10.0, 1.0, 42);
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert!(same_values(&a, &b));
    let c = generate(&SyntheticSpec { seed: 43, ..spec }).unwrap();
    assert!(!same_values(&a, &c));
    for d in a.domains() {
        assert_eq!(d.len(), 100);
        for k in 0..4 {
            assert_eq!(d.labels.iter().filter(|&&y| y == k).count(), 25);
        }
    }
    assert_eq!(a.domain_ids(), vec!["D0", "D1", "D2"]);
}

#[test]
fn identical_transforms_give_small_distance() {
    let n_per_class = 500;
    let spec = SyntheticSpec {
        transforms: vec![DomainTransform::identity(4); 2],
        ..SyntheticSpec::graded(2, 2, 4, n_per_class, 0.0, 0.0, 11)
    };
    let ds = generate(&spec).unwrap();
    let bank = sample_frequency_bank(4, 64, 1.0, 0, Scheme::Gaussian).unwrap();
    let f = ds.features();
    let d = cfl_between(&f[0], &f[1], &bank).unwrap();
    let n = f[0].nrows() as f64;
    assert!(d <= 5.0 / n.sqrt(), "distance {d}");
}

#[test]
fn quarter_turn_raises_distance() {
    let mut spec = SyntheticSpec::graded(3, 2, 2, 500, 0.0, 0.0, 8);
    spec.transforms[2].rotation_deg = 90.0;
    let ds = generate(&spec).unwrap();
    let bank = sample_frequency_bank(2, 64, 1.0, 0, Scheme::Gaussian).unwrap();
    let f = ds.features();
    let same = cfl_between(&f[0], &f[1], &bank).unwrap();
    let rotated = cfl_between(&f[0], &f[2], &bank).unwrap();
    assert!(rotated > same, "rotated {rotated} identity {same}");
}

#[test]
fn split_assigns_roles() {
    let ds = generate(&SyntheticSpec::benchmark(0))
        .unwrap()
        .with_split(&["D0"], &["D2"])
        .unwrap();
    let roles: Vec<_> = ds.domains().iter().map(|d| d.role).collect();
    assert_eq!(
        roles,
        vec![DomainRole::Source, DomainRole::Unseen, DomainRole::Target]
    );
    assert!(generate(&SyntheticSpec::benchmark(0))
        .unwrap()
        .with_split(&["D9"], &[])
        .is_err());
}
