use mismatch_core::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| random::complex_gaussian(rng));
    ComplexMatrix::new(&g + g.adjoint()).unwrap()
}

#[test]
fn eig_round_trip_on_random_hermitian_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 0..200 {
        let d = 1 + k % 6;
        let a = random_hermitian(&mut rng, d);
        let eig = hermitian_eig(&a).unwrap();
        let scale = 1.0 + a.frobenius_norm();
        assert!((&eig.reconstruct() - &a).frobenius_norm() < 1e-9 * scale);
        let v = &eig.eigenvectors;
        let gram = &v.adjoint() * v;
        assert!((&gram - &ComplexMatrix::identity(d)).frobenius_norm() < 1e-10);
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        for j in 0..d {
            let col = eig.eigenvector(j);
            let big = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let first = col.iter().find(|z| z.norm() >= big - 1e-12).unwrap();
            assert!(first.im.abs() < 1e-12 && first.re >= 0.0);
        }
    }
}

#[test]
fn eig_is_bitwise_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_hermitian(&mut rng, 5);
    assert_eq!(hermitian_eig(&a).unwrap(), hermitian_eig(&a).unwrap());
}

proptest! {
    #[test]
    fn sqrt_squares_back(seed in any::<u64>(), d in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random::efficiency(&mut rng, d, 0.0, 1.0);
        let s = principal_sqrt(&a).unwrap();
        prop_assert!((&(&s * &s) - &a).frobenius_norm() < 1e-9 * (1.0 + a.frobenius_norm()));
        prop_assert!(s.is_hermitian(1e-12));
        prop_assert!(hermitian_eig(&s).unwrap().min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn loewner_order_of_scaled_matrices(seed in any::<u64>(), d in 1usize..=4, c in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random::efficiency(&mut rng, d, 0.1, 1.0);
        prop_assert!(psd_leq(&a.scale(c), &a).unwrap());
        prop_assert!(psd_leq(&a, &ComplexMatrix::identity(d)).unwrap());
        prop_assert!(!psd_leq(&a, &a.scale(c * 0.9)).unwrap());
    }
}

#[test]
fn complex_entries_survive_round_trip() {
    let a = ComplexMatrix::from_rows(&[
        vec![Complex64::new(0.5, 0.0), Complex64::new(0.1, 0.2)],
        vec![Complex64::new(0.1, -0.2), Complex64::new(0.3, 0.0)],
    ])
    .unwrap();
    let eig = hermitian_eig(&a).unwrap();
    assert!((&eig.reconstruct() - &a).frobenius_norm() < 1e-14);
}
