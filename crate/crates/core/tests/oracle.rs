use mimlearn::hermite::{multi_indices, MultiIndex};
use mimlearn::models::{gaussian_point, random_mlc};
use mimlearn::oracle::*;
use mimlearn::rng::{stream, Purpose};
use mimlearn::*;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn constant_concept_has_unit_moment() {
    let c = Concept::Mlc(MulticlassLinearClassifier::new(vec![vec![0.0, 0.0]; 2], vec![0.0, 0.0]).unwrap());
    let grid = QuadratureGrid::new(2, 10).unwrap();
    let one = HermiteCoefficients::from_terms(2, 0, [(MultiIndex::zero(2), 1.0)]).unwrap();
    let got = exact_conditional_moment(&c, &[(-0.3, 1.1), (0.2, 0.9)], 0, &one, &grid).unwrap();
    assert!((got - 1.0).abs() < 1e-12);
}

#[test]
fn box_moments_match_monte_carlo() {
    let n = 1_000_000u64;
    let c = Concept::Mlc(random_mlc(3, 2, 7).unwrap());
    let grid = QuadratureGrid::new(2, 10).unwrap();
    let idx = multi_indices(2, 2);
    for b in 0..10u64 {
        let corner = gaussian_point(300, b, 2);
        let cube: Vec<(f64, f64)> = corner.iter().map(|&z| (z.clamp(-1.5, 1.0), z.clamp(-1.5, 1.0) + 1.0)).collect();
        let label = (b % 3) as usize;
        let term = idx[1 + (b as usize % (idx.len() - 1))].clone();
        let poly = HermiteCoefficients::from_terms(2, 2, [(term.clone(), 1.0)]).unwrap();
        let exact = exact_conditional_moment(&c, &cube, label, &poly, &grid).unwrap();
        // The box is a product of intervals, so each coordinate is a 1-D truncated normal.
        let mut rng = stream(500 + b, Purpose::MonteCarlo, 0);
        let mut num = 0.0;
        let mut x = [0.0; 2];
        for _ in 0..n {
            for (xi, &(lo, hi)) in x.iter_mut().zip(&cube) {
                *xi = loop {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if lo <= z && z <= hi {
                        break z;
                    }
                };
            }
            if c.predict(&x).unwrap() == label {
                num += hermite_eval(&term, &x).unwrap();
            }
        }
        let mc = num / n as f64;
        assert!((exact - mc).abs() <= 4.0 / (n as f64).sqrt(), "box {b}: {exact} vs {mc}");
    }
}

#[test]
fn exhaustive_search_examples() {
    let basis = SubspaceBasis::new(1, vec![vec![1.0]]).unwrap();
    let p = build_partition(basis, 0.5, 0.1).unwrap();
    let ds = LabeledDataset::from_rows(3, &[vec![0.05], vec![0.06], vec![0.07]], vec![1, 2, 2]).unwrap();
    assert!((best_piecewise_error_exhaustive(&p, &ds).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let far = LabeledDataset::from_rows(2, &[vec![5.0], vec![6.0], vec![-7.0]], vec![1, 0, 1]).unwrap();
    assert!((best_piecewise_error_exhaustive(&p, &far).unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn exhaustive_search_refuses_large_instances() {
    let basis = SubspaceBasis::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let p = build_partition(basis, 0.3, 0.1).unwrap();
    let c = Concept::Mlc(random_mlc(2, 2, 1).unwrap());
    let ds = sample_dataset(&c, &NoiseSpec::None, 2_000, 1).unwrap();
    assert!(matches!(best_piecewise_error_exhaustive(&p, &ds), Err(Error::TooManyCubes { .. })));
}
