use std::sync::Arc;

use eerk_core::phi::phi;
use eerk_core::spatial::{ch_energy, Metric, Problem, SpectralOperator, Transform};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `f(A) v` for symmetric `A` via a dense eigensolve.
fn dense_apply(a: &DMatrix<f64>, f: impl Fn(f64) -> f64, v: &[f64]) -> Vec<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let q = &eig.eigenvectors;
    let fd = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let fa = q * fd * q.transpose();
    (fa * DVector::from_column_slice(v)).iter().copied().collect()
}

#[test]
fn analytic_eigenvalues_match_dense_solver() {
    for transform in [Transform::Dense, Transform::Fast] {
        let op = SpectralOperator::with_transform(1.7, 5, transform).unwrap();
        let mut dense: Vec<f64> = SymmetricEigen::new(op.matrix()).eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        for (a, b) in op.eigenvalues().iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }
    let op = SpectralOperator::dirichlet_1d(2.0 * std::f64::consts::PI, 639).unwrap();
    assert!(op.eigenvalues().iter().all(|l| *l > 0.0));
    assert!(op.eigenvalues().windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn spectral_laplacian_matches_stencil() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for transform in [Transform::Dense, Transform::Fast] {
        let op = SpectralOperator::with_transform(3.0, 40, transform).unwrap();
        let v = random_vec(&mut rng, 40);
        let a = op.apply_spectral(|l| l, &v).unwrap();
        let b = op.apply_stencil(&v).unwrap();
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * scale);
        }
        let id = op.apply_spectral(|_| 1.0, &v).unwrap();
        for (x, y) in id.iter().zip(&v) {
            assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn phi_of_stiff_operator_matches_dense_oracle() {
    let (tau, eps, kappa) = (0.1, 0.2, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let op = SpectralOperator::with_transform(2.0 * std::f64::consts::PI, 32, Transform::Fast).unwrap();
    let l = op.matrix();
    let lk = &l * &l * (eps * eps) + &l * kappa;
    let v = random_vec(&mut rng, 32);
    let got = op
        .apply_spectral(|lam| phi(1, -tau * (eps * eps * lam * lam + kappa * lam)).unwrap(), &v)
        .unwrap();
    let expect = dense_apply(&lk, |mu| {
        let z = -tau * mu;
        (z.exp() - 1.0) / z
    }, &v);
    for (a, b) in got.iter().zip(&expect) {
        assert!((a - b).abs() <= 1e-9, "{a} {b}");
    }
}

#[test]
fn inner_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let op = SpectralOperator::dirichlet_1d(2.0, 25).unwrap();
    let u = random_vec(&mut rng, 25);
    let v = random_vec(&mut rng, 25);
    assert!(op.inner_product(&v, &v, Metric::L2).unwrap() > 0.0);
    assert_eq!(op.inner_product(&[0.0; 25], &[0.0; 25], Metric::L2).unwrap(), 0.0);
    let lv = op.apply_stencil(&v).unwrap();
    let lhs = op.inner_product(&u, &lv, Metric::Hminus1).unwrap();
    let rhs = op.inner_product(&u, &v, Metric::L2).unwrap();
    assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    // dense H^{-1} oracle
    let linv = op.matrix().try_inverse().unwrap();
    let dense = op.h() * DVector::from_column_slice(&u).dot(&(linv * DVector::from_column_slice(&v)));
    assert!((op.inner_product(&u, &v, Metric::Hminus1).unwrap() - dense).abs() <= 1e-12 * dense.abs().max(1.0));
    let modes: Vec<Vec<f64>> = (0..2)
        .map(|k| {
            let mut e = vec![0.0; 25];
            e[k] = 1.0;
            op.inverse(&e).unwrap()
        })
        .collect();
    assert!(op.inner_product(&modes[0], &modes[1], Metric::L2).unwrap().abs() <= 1e-12);
}

#[test]
fn energy_of_scaled_eigenvector() {
    let (eps, s, k) = (0.2, 0.3, 4usize);
    let op = Arc::new(SpectralOperator::dirichlet_1d(2.0 * std::f64::consts::PI, 63).unwrap());
    let p = Problem::cahn_hilliard(op.clone(), eps, 2.0).unwrap();
    let n1: f64 = 64.0;
    let v: Vec<f64> = (1..=63)
        .map(|j| s * (2.0 / n1).sqrt() * ((j * k) as f64 * std::f64::consts::PI / n1).sin())
        .collect();
    let lam = op.eigenvalues()[k - 1];
    let potential: f64 = v.iter().map(|x| 0.25 * (x * x - 1.0f64).powi(2)).sum::<f64>() * op.h();
    let expect = 0.5 * eps * eps * op.h() * s * s * lam + potential;
    let got = ch_energy(&p, &v).unwrap();
    assert!((got - expect).abs() <= 1e-12 * expect);
    assert!(got >= 0.0);
}

#[test]
fn ch_spectrum_is_increasing() {
    let op = Arc::new(SpectralOperator::dirichlet_1d(2.0 * std::f64::consts::PI, 639).unwrap());
    let p = Problem::cahn_hilliard(op, 0.2, 2.0).unwrap();
    assert!(p.mu().windows(2).all(|w| w[0] < w[1]));
    assert_eq!(p.metric(), Metric::Hminus1);
}

#[test]
fn shared_operator_across_threads() {
    let op = Arc::new(SpectralOperator::dirichlet_1d(1.0, 31).unwrap());
    let v: Vec<f64> = (0..31).map(|j| (j as f64 * 0.37).sin()).collect();
    let expect = op.forward(&v).unwrap();
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let (op, v) = (op.clone(), v.clone());
            std::thread::spawn(move || op.forward(&v).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), expect);
    }
}
