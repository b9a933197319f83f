use std::sync::Arc;

use eerk_core::catalog::{get_method, MethodId};
use eerk_core::integrator::{integrate, stage_energy_margin, step, Integrator};
use eerk_core::spatial::{DoubleWell, Forcing, Nonlinearity, Problem, SpectralOperator};
use eerk_core::Scalar;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn dense_fn(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&eig.eigenvalues.map(f)) * q.transpose()
}

fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-12 { 1.0 } else { z.exp_m1() / z }
}

fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-4 { 0.5 + z / 6.0 + z * z / 24.0 } else { (phi1(z) - 1.0) / z }
}

struct Zero;
impl Nonlinearity for Zero {
    fn eval(&self, _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn potential(&self, _u: &[f64]) -> f64 {
        0.0
    }
}

#[test]
fn pure_decay_is_exact_for_every_method() {
    let op = Arc::new(SpectralOperator::dirichlet_1d(2.0, 20).unwrap());
    let kappa = 0.7;
    // g = -kappa u  =>  g_kappa = 0 and u' = -L_kappa u
    let p = Problem::semilinear(op.clone(), kappa, Arc::new(FnG(move |u: &[f64], o: &mut [f64]| {
        for (o, x) in o.iter_mut().zip(u) {
            *o = -kappa * x;
        }
    })))
    .unwrap();
    let u0: Vec<f64> = op.nodes().iter().map(|x| x * (2.0 - x)).collect();
    let tau = 0.03;
    let expect: Vec<f64> = (dense_fn(&op.matrix(), |l| (-10.0 * tau * (l + kappa)).exp()) * DVector::from_column_slice(&u0))
        .iter()
        .copied()
        .collect();
    for id in MethodId::catalog() {
        let t = get_method(id).unwrap();
        let rep = integrate(&p, &t, &u0, tau, 10.0 * tau, false).unwrap();
        for (a, b) in rep.final_state.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-9, "{id}: {a} {b}");
        }
    }
}

struct FnG<F>(F);
impl<F: Fn(&[f64], &mut [f64]) + Send + Sync> Nonlinearity for FnG<F> {
    fn eval(&self, u: &[f64], out: &mut [f64]) {
        (self.0)(u, out)
    }
    fn potential(&self, _u: &[f64]) -> f64 {
        0.0
    }
}

#[test]
fn equilibria_are_preserved() {
    let op = Arc::new(SpectralOperator::dirichlet_1d(3.0, 24).unwrap());
    let target: Vec<f64> = op.nodes().iter().map(|x| (x * 1.3).sin() + 0.2 * x).collect();
    let kappa = 1.5;
    let lu = op.apply_stencil(&target).unwrap();
    let p = Problem::semilinear(op, kappa, Arc::new(Forcing(lu))).unwrap();
    for id in MethodId::catalog() {
        let t = get_method(id).unwrap();
        let rep = integrate(&p, &t, &target, 0.25, 2.5, false).unwrap();
        for (a, b) in rep.final_state.iter().zip(&target) {
            assert!((a - b).abs() <= 1e-10, "{id}");
        }
    }
}

#[test]
fn etd2rk_matches_hand_rolled_scheme() {
    // u2 = e^{z} u + tau phi1(z) g(u);  u_new = u2 + tau phi2(z) (g(U2) - g(u))
    let op = Arc::new(SpectralOperator::dirichlet_1d(std::f64::consts::PI, 6).unwrap());
    let kappa = 2.0;
    let p = Problem::semilinear(op.clone(), kappa, Arc::new(DoubleWell)).unwrap();
    let t = get_method(MethodId::Eerk2 { c2: Scalar::one() }).unwrap();
    let tau = 0.2;
    let lk = op.matrix() + DMatrix::identity(6, 6) * kappa;
    let e = dense_fn(&lk, |m| (-tau * m).exp());
    let p1 = dense_fn(&lk, |m| phi1(-tau * m));
    let p2 = dense_fn(&lk, |m| phi2(-tau * m));
    let gk = |u: &DVector<f64>| u.map(|x| x - x * x * x + kappa * x);
    let mut u = DVector::from_fn(6, |j, _| 0.9 * ((j + 1) as f64 * 0.45).sin());
    let mut v: Vec<f64> = u.iter().copied().collect();
    for _ in 0..5 {
        let g1 = gk(&u);
        let u2 = &e * &u + &p1 * &g1 * tau;
        let next = &u2 + &p2 * (gk(&u2) - &g1) * tau;
        u = next;
        v = step(&p, &t, &v, tau).unwrap().solution().to_vec();
    }
    for (a, b) in v.iter().zip(u.iter()) {
        assert!((a - b).abs() <= 1e-12, "{a} {b}");
    }
}

#[test]
fn exponential_euler_margin_matches_quadratic_form() {
    let op = Arc::new(SpectralOperator::dirichlet_1d(2.0 * std::f64::consts::PI, 30).unwrap());
    let (eps, kappa, tau) = (0.2, 2.0, 0.05);
    let p = Problem::cahn_hilliard(op.clone(), eps, kappa).unwrap();
    let t = get_method(MethodId::Etd1).unwrap();
    let u0: Vec<f64> = op.nodes().iter().map(|x| 0.5 * x.sin() + 0.3 * (4.0 * x).sin()).collect();
    let rec = step(&p, &t, &u0, tau).unwrap();
    let l = op.matrix();
    let lk = &l * &l * (eps * eps) + &l * kappa;
    let d11 = dense_fn(&lk, |m| {
        let z = -tau * m;
        z * (1.0 + (-z).exp()) / (2.0 * (1.0 - (-z).exp()))
    });
    let du = DVector::from_column_slice(&rec.deltas[0]);
    let linv = l.try_inverse().unwrap();
    let quad = op.h() * du.dot(&(linv * (d11 * &du)));
    let expect = -quad / tau - (rec.energies[1] - rec.energies[0]);
    let got = stage_energy_margin(&p, &t, &rec, tau).unwrap();
    assert_eq!(got.len(), 1);
    assert!((got[0] - expect).abs() <= 1e-9 * expect.abs().max(rec.energies[0]), "{} {}", got[0], expect);
    assert!(got[0] >= 0.0);
}

#[test]
fn equilibrium_margins_vanish() {
    let op = Arc::new(SpectralOperator::dirichlet_1d(2.0, 10).unwrap());
    let p = Problem::semilinear(op, 1.0, Arc::new(Zero)).unwrap();
    let t = get_method(MethodId::Ho4).unwrap();
    let rec = step(&p, &t, &[0.0; 10], 0.1).unwrap();
    for m in stage_energy_margin(&p, &t, &rec, 0.1).unwrap() {
        assert_eq!(m, 0.0);
    }
}

#[test]
fn monitored_run_reports_every_step() {
    let op = Arc::new(SpectralOperator::dirichlet_1d(2.0 * std::f64::consts::PI, 63).unwrap());
    let p = Problem::cahn_hilliard(op.clone(), 0.2, 2.0).unwrap();
    let t = get_method(MethodId::Eerk31 { c2: Scalar::ratio(4, 9) }).unwrap();
    let u0: Vec<f64> = op.nodes().iter().map(|x| 0.5 * x.sin()).collect();
    let rep = integrate(&p, &t, &u0, 0.1, 2.0, true).unwrap();
    assert_eq!(rep.steps, 20);
    assert_eq!(rep.energies.len(), 21);
    assert_eq!(rep.margins.len(), 20);
    assert!(rep.violations.is_empty());
    assert!(rep.energy_increases(1e-10).is_empty());
    assert_eq!(rep.times()[20], 20.0 * 0.1);
    let integ = Integrator::new(&p, &t, 0.1, false).unwrap();
    assert!(!integ.monitoring());
}
