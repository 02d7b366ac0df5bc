use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triplet_core::detector::{lda_weights, BackgroundStats, Matrix};
use triplet_core::imaging::FeatureVector;
use triplet_core::norm;

/// `A A^T + 0.1 I` for a random `A` is symmetric positive definite.
fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> Matrix<f64> {
    let a: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut m = Matrix::zeros(dim);
    for i in 0..dim {
        for j in 0..=i {
            let v: f64 = (0..dim).map(|k| a[i * dim + k] * a[j * dim + k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

#[test]
fn residual_is_small_for_random_spd_covariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..100 {
        let dim = rng.random_range(1..=64);
        let sigma = random_spd(&mut rng, dim);
        let mean = FeatureVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        let template: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let stats = BackgroundStats { mean: mean.clone(), sigma: sigma.clone(), lambda: 0.0, count: 2 * dim };
        let w = lda_weights(&template, &stats).unwrap();
        let centered: Vec<f64> = template.iter().zip(mean.iter()).map(|(t, m)| t - m).collect();
        let residual: Vec<f64> = sigma.mul_vec(&w).iter().zip(&centered).map(|(a, b)| a - b).collect();
        assert!(
            norm(&residual) <= 1e-6 * norm(&centered),
            "trial {trial}, dim {dim}: residual {}",
            norm(&residual)
        );
    }
}

#[test]
fn indefinite_covariance_is_reported() {
    let mut sigma = Matrix::identity(3);
    sigma.set(2, 2, -1.0);
    let stats = BackgroundStats { mean: FeatureVector::zeros(3), sigma, lambda: 0.0, count: 10 };
    let err = lda_weights(&[1.0, 1.0, 1.0], &stats).unwrap_err();
    assert!(matches!(err, triplet_core::Error::SingularCovariance { pivot: 2 }), "{err:?}");
}
