use cfshift::{ecf_eval, sample_frequency_bank, BankParams, FeatureMatrix, FrequencyBank, Scheme};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn matrix(max_rows: usize, dim: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows).prop_flat_map(move |n| {
        proptest::collection::vec(-3.0..3.0f64, n * dim)
            .prop_map(move |v| Array2::from_shape_vec((n, dim), v).unwrap())
    })
}

fn bank(dim: usize) -> impl Strategy<Value = FrequencyBank> {
    (1..8usize).prop_flat_map(move |k| {
        proptest::collection::vec(-2.5..2.5f64, k * dim).prop_map(move |v| {
            FrequencyBank::from_matrix(
                Array2::from_shape_vec((k, dim), v).unwrap(),
                BankParams::default(),
            )
            .unwrap()
        })
    })
}

fn case(max_rows: usize) -> impl Strategy<Value = (FeatureMatrix, FrequencyBank)> {
    (1..5usize).prop_flat_map(move |d| {
        (matrix(max_rows, d), bank(d)).prop_map(|(x, b)| (FeatureMatrix::new(x, "p").unwrap(), b))
    })
}

/// Direct complex-exponential average, independent of `ecf_eval`.
fn brute_force(x: &FeatureMatrix, bank: &FrequencyBank) -> Vec<Complex64> {
    bank.freqs()
        .rows()
        .into_iter()
        .map(|w| {
            let mut acc = Complex64::new(0.0, 0.0);
            for row in x.values().rows() {
                let mut z = Complex64::new(1.0, 0.0);
                for (wj, xj) in w.iter().zip(row.iter()) {
                    z *= Complex64::new(0.0, wj * xj).exp();
                }
                acc += z;
            }
            acc / x.nrows() as f64
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ecf_stays_in_unit_disk((x, b) in case(40)) {
        let e = ecf_eval(&x, &b).unwrap();
        for k in 0..e.len() {
            prop_assert!(e.re[k] * e.re[k] + e.im[k] * e.im[k] <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn zero_frequency_is_one((x, b) in case(40)) {
        let zero = FrequencyBank::from_matrix(Array2::zeros((1, x.ncols())), *b.params()).unwrap();
        let e = ecf_eval(&x, &zero).unwrap();
        prop_assert!((e.re[0] - 1.0).abs() <= 1e-12);
        prop_assert!(e.im[0].abs() <= 1e-12);
    }

    #[test]
    fn translation_rotates_phase(
        (x, b) in case(12),
        shift in proptest::collection::vec(-1.0..1.0f64, 4),
    ) {
        let d = x.ncols();
        let c = &shift[..d];
        let mut moved = x.values().to_owned();
        for mut row in moved.rows_mut() {
            for (v, cj) in row.iter_mut().zip(c) {
                *v += cj;
            }
        }
        let moved = FeatureMatrix::new(moved, "moved").unwrap();
        let e0 = ecf_eval(&x, &b).unwrap();
        let e1 = ecf_eval(&moved, &b).unwrap();
        for (k, w) in b.freqs().rows().into_iter().enumerate() {
            let phase: f64 = w.iter().zip(c).map(|(a, b)| a * b).sum();
            let expected = Complex64::new(0.0, phase).exp() * Complex64::new(e0.re[k], e0.im[k]);
            let got = Complex64::new(e1.re[k], e1.im[k]);
            prop_assert!((got - expected).norm() <= 1e-10);
        }
    }

    #[test]
    fn matches_brute_force_on_small_samples((x, b) in case(8)) {
        let e = ecf_eval(&x, &b).unwrap();
        let oracle = brute_force(&x, &b);
        for (k, z) in oracle.iter().enumerate() {
            prop_assert!((e.re[k] - z.re).abs() <= 1e-12);
            prop_assert!((e.im[k] - z.im).abs() <= 1e-12);
        }
    }

    #[test]
    fn evaluation_is_bit_reproducible((x, b) in case(20)) {
        let a = ecf_eval(&x, &b).unwrap();
        let c = ecf_eval(&x.clone(), &b.clone()).unwrap();
        prop_assert_eq!(a, c);
    }

    #[test]
    fn mirrored_sample_has_real_ecf((x, b) in case(10)) {
        let neg = x.values().mapv(|v| -v);
        let both = ndarray::concatenate(ndarray::Axis(0), &[x.values(), neg.view()]).unwrap();
        let e = ecf_eval(&FeatureMatrix::new(both, "s").unwrap(), &b).unwrap();
        prop_assert!(e.im.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn banks_regenerate_exactly(d in 1..6usize, k in 1..20usize, seed in any::<u64>(), scale in 0.1..4.0f64) {
        let a = sample_frequency_bank(d, k, scale, seed, Scheme::Gaussian).unwrap();
        let b = sample_frequency_bank(d, k, scale, seed, Scheme::Gaussian).unwrap();
        prop_assert!(a.freqs().iter().zip(b.freqs().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn standard_normal_matches_closed_form() {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let values: Vec<f64> = (0..10_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let x = FeatureMatrix::new(Array2::from_shape_vec((10_000, 1), values).unwrap(), "n").unwrap();
    let ws = [0.5, 1.0, 2.0];
    let bank = FrequencyBank::from_matrix(
        Array2::from_shape_vec((3, 1), ws.to_vec()).unwrap(),
        BankParams::default(),
    )
    .unwrap();
    let e = ecf_eval(&x, &bank).unwrap();
    for (k, w) in ws.iter().enumerate() {
        let exact = (-0.5 * w * w).exp();
        assert!(
            (e.re[k] - exact).abs() < 0.05,
            "w={w}: {} vs {exact}",
            e.re[k]
        );
        assert!(e.im[k].abs() < 0.05);
    }
}
