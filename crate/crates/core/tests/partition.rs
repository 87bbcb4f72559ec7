use mimlearn::models::{gaussian_point, random_mlc, random_orthonormal_rows};
use mimlearn::oracle::best_piecewise_error_exhaustive;
use mimlearn::*;
use proptest::prelude::*;

fn identity(k: usize) -> SubspaceBasis {
    SubspaceBasis::new(k, (0..k).map(|i| (0..k).map(|j| (i == j) as u8 as f64).collect()).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn locate_is_a_partition_function(
        k in 1usize..4,
        eps in 0.2f64..0.9,
        shift_frac in 0.01f64..0.49,
        coords in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let p = build_partition(identity(k), eps, shift_frac * eps).unwrap();
        let x = &coords[..k];
        match p.locate(x) {
            Some(idx) => {
                prop_assert!(p.is_valid_index(&idx));
                let bounds = p.cube_bounds(&idx);
                for (c, (lo, hi)) in x.iter().zip(bounds) {
                    prop_assert!(lo <= *c && *c <= hi);
                }
                // No other cell of any axis holds the coordinate.
                for (axis, c) in x.iter().enumerate() {
                    let hits = (0..p.cells_per_axis())
                        .filter(|&i| {
                            let (lo, hi) = (p.threshold(i), p.threshold(i + 1));
                            lo <= *c && (*c < hi || (i + 1 == p.cells_per_axis() && *c <= hi))
                        })
                        .count();
                    prop_assert_eq!(hits, 1, "axis {}", axis);
                }
            }
            None => {
                let ts = p.thresholds();
                let (lo, hi) = (ts[0], *ts.last().unwrap());
                prop_assert!(x.iter().any(|c| *c < lo || *c > hi));
            }
        }
    }

    #[test]
    fn fit_matches_exhaustive_search(seed in 0u64..100_000, n in 1usize..60) {
        let basis = SubspaceBasis::new(2, random_orthonormal_rows(2, 1, seed, 0)).unwrap();
        let p = build_partition(basis, 0.5, 0.1).unwrap();
        let c = Concept::Mlc(random_mlc(3, 2, seed).unwrap());
        let noise = NoiseSpec::Rcn { matrix: ConfusionMatrix::symmetric(3, 0.3).unwrap() };
        let ds = sample_dataset(&c, &noise, n, seed).unwrap();
        let fit = zero_one_error(&fit_piecewise_constant(&p, &ds).unwrap(), &ds);
        prop_assert_eq!(fit, best_piecewise_error_exhaustive(&p, &ds).unwrap());
    }
}

#[test]
fn mass_retention_up_to_eight_dims() {
    let n = 200_000u64;
    for k in [1usize, 3, 6, 8] {
        for eps in [0.25, 0.5] {
            let p = build_partition(identity(k), eps, 0.25 * eps).unwrap();
            let outside = (0..n).filter(|&i| p.locate(&gaussian_point(k as u64, i, k)).is_none()).count();
            let mass = outside as f64 / n as f64;
            assert!(mass <= eps + 3.0 * (eps / n as f64).sqrt(), "k={k} eps={eps}: {mass}");
        }
    }
}

#[test]
fn classify_agrees_with_locate_and_lookup() {
    let basis = SubspaceBasis::new(4, random_orthonormal_rows(4, 2, 3, 0)).unwrap();
    let p = build_partition(basis, 0.4, 0.1).unwrap();
    let c = Concept::Mlc(random_mlc(3, 4, 3).unwrap());
    let ds = sample_dataset(&c, &NoiseSpec::None, 5_000, 3).unwrap();
    let clf = fit_piecewise_constant(&p, &ds).unwrap();
    for i in 0..10_000 {
        let x = gaussian_point(99, i, 4);
        let expect = p.locate(&x).and_then(|idx| clf.labels().get(&idx).copied()).unwrap_or(clf.fallback());
        assert_eq!(classify(&clf, &x), expect);
    }
}

#[test]
fn six_sample_instance_is_optimal() {
    let p = build_partition(identity(1), 0.5, 0.1).unwrap();
    let xs = vec![vec![-0.3], vec![-0.2], vec![-0.25], vec![0.6], vec![0.7], vec![0.65]];
    let ds = LabeledDataset::from_rows(3, &xs, vec![0, 1, 1, 2, 2, 0]).unwrap();
    let clf = fit_piecewise_constant(&p, &ds).unwrap();
    assert_eq!(zero_one_error(&clf, &ds), best_piecewise_error_exhaustive(&p, &ds).unwrap());
    assert!((zero_one_error(&clf, &ds) - 2.0 / 6.0).abs() < 1e-15);
}

#[test]
fn mismatched_shift_is_not_a_refinement() {
    let coarse = build_partition(identity(1), 0.5, 0.1).unwrap();
    let fine = build_partition(identity(1), 0.5, 0.2).unwrap();
    assert!(!refine_alignment_check(&coarse, &fine));
    let rows = random_orthonormal_rows(3, 2, 1, 0);
    let a = build_partition(SubspaceBasis::new(3, rows[..1].to_vec()).unwrap(), 0.5, 0.1).unwrap();
    let r = a.thresholds()[0].abs() - 0.1;
    let a = ApproximatingPartition::with_grid(a.basis().clone(), 0.5, 0.1, r, Boundary::Truncate).unwrap();
    let b = ApproximatingPartition::with_grid(SubspaceBasis::new(3, rows).unwrap(), 0.5, 0.1, r, Boundary::Truncate)
        .unwrap();
    assert!(refine_alignment_check(&a, &b));
}

#[test]
fn nested_partitions_never_increase_error() {
    for seed in 0..20u64 {
        let rows = random_orthonormal_rows(5, 3, seed, 0);
        let r = mimlearn::partition::grid_radius(3, 0.5);
        let mk = |k: usize| {
            ApproximatingPartition::with_grid(
                SubspaceBasis::new(5, rows[..k].to_vec()).unwrap(),
                0.5,
                0.125,
                r,
                Boundary::Clamp,
            )
            .unwrap()
        };
        let c = Concept::Mlc(random_mlc(4, 5, seed).unwrap());
        let ds = sample_dataset(&c, &NoiseSpec::Adversarial { rate: 0.1, strategy: FlipStrategy::UniformFlip }, 3_000, seed)
            .unwrap();
        let errs: Vec<f64> = (1..=3).map(|k| zero_one_error(&fit_piecewise_constant(&mk(k), &ds).unwrap(), &ds)).collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {errs:?}");
    }
}
