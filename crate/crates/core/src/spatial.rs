//! Discrete 1D Dirichlet Laplacian in its sine eigenbasis, and the gradient-flow
//! problems built on top of it.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// How the orthonormal sine transform is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    /// Precomputed `M x M` sine matrix.
    Dense,
    /// FFT of the odd extension, `O(M log M)`.
    #[default]
    Fast,
}

#[derive(Clone)]
enum Basis {
    Dense(DMatrix<f64>),
    Fast(Arc<dyn Fft<f64>>),
}

/// `L_h = tridiag(-1, 2, -1)/h^2` on `M` interior nodes with homogeneous
/// Dirichlet ends, together with its orthonormal eigenbasis
/// `S_jk = sqrt(2/(M+1)) sin(jk pi/(M+1))`.
#[derive(Clone)]
pub struct SpectralOperator {
    m: usize,
    h: f64,
    length: f64,
    eigenvalues: Vec<f64>,
    scale: f64,
    basis: Basis,
}

impl fmt::Debug for SpectralOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralOperator")
            .field("m", &self.m)
            .field("h", &self.h)
            .field("length", &self.length)
            .field("transform", &self.transform())
            .finish()
    }
}

impl SpectralOperator {
    /// Laplacian on `(0, length)` with `M` interior points, `h = length/(M+1)`.
    pub fn dirichlet_1d(length: f64, m: usize) -> Result<Self> {
        Self::with_transform(length, m, Transform::default())
    }

    pub fn with_transform(length: f64, m: usize, transform: Transform) -> Result<Self> {
        if m < 2 {
            return Err(Error::Parameter(format!("need at least 2 interior points, got {m}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Parameter(format!("domain length {length} must be positive")));
        }
        let n1 = (m + 1) as f64;
        let h = length / n1;
        let eigenvalues = (1..=m)
            .map(|k| {
                let s = (k as f64 * std::f64::consts::PI / (2.0 * n1)).sin();
                4.0 / (h * h) * s * s
            })
            .collect();
        let scale = (2.0 / n1).sqrt();
        let basis = match transform {
            Transform::Dense => Basis::Dense(DMatrix::from_fn(m, m, |j, k| {
                scale * ((j + 1) as f64 * (k + 1) as f64 * std::f64::consts::PI / n1).sin()
            })),
            Transform::Fast => Basis::Fast(FftPlanner::new().plan_fft_forward(2 * (m + 1))),
        };
        Ok(SpectralOperator {
            m,
            h,
            length,
            eigenvalues,
            scale,
            basis,
        })
    }

    /// Same as [`Self::dirichlet_1d`] with `M` chosen from the spacing.
    pub fn from_spacing(length: f64, h: f64) -> Result<Self> {
        let cells = length / h;
        let n = cells.round();
        if (cells - n).abs() > 1e-9 * n.max(1.0) || n < 3.0 {
            return Err(Error::Parameter(format!(
                "spacing {h} does not divide length {length} into at least 3 cells"
            )));
        }
        Self::dirichlet_1d(length, n as usize - 1)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn transform(&self) -> Transform {
        match self.basis {
            Basis::Dense(_) => Transform::Dense,
            Basis::Fast(_) => Transform::Fast,
        }
    }

    /// `lambda_k`, `k = 1..=M`, increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Interior node coordinates `x_j = j h`.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.m).map(|j| j as f64 * self.h).collect()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.m {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.m,
                found: v.len(),
            })
        }
    }

    /// Sine coefficients of `v`. The transform is symmetric and involutive,
    /// so this map is its own inverse.
    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let mut out = vec![0.0; self.m];
        self.transform_into(v, &mut out);
        Ok(out)
    }

    /// Nodal values from sine coefficients.
    pub fn inverse(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.forward(c)
    }

    pub(crate) fn transform_into(&self, v: &[f64], out: &mut [f64]) {
        match &self.basis {
            Basis::Dense(s) => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = s.column(k).iter().zip(v).map(|(a, b)| a * b).sum();
                }
            }
            Basis::Fast(fft) => {
                let n = 2 * (self.m + 1);
                let mut buf = vec![Complex::new(0.0, 0.0); n];
                for (j, &x) in v.iter().enumerate() {
                    buf[j + 1].re = x;
                    buf[n - j - 1].re = -x;
                }
                fft.process(&mut buf);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = -0.5 * self.scale * buf[k + 1].im;
                }
            }
        }
    }

    /// `f(L_h) v` through the eigenbasis.
    pub fn apply_spectral<F: Fn(f64) -> f64>(&self, f: F, v: &[f64]) -> Result<Vec<f64>> {
        let mut c = self.forward(v)?;
        for (ck, &lam) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= f(lam);
        }
        self.inverse(&c)
    }

    /// `L_h v` by the three-point stencil.
    pub fn apply_stencil(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let mut out = vec![0.0; self.m];
        self.stencil_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn stencil_into(&self, v: &[f64], out: &mut [f64]) {
        let ih2 = 1.0 / (self.h * self.h);
        let m = self.m;
        for j in 0..m {
            let left = if j > 0 { v[j - 1] } else { 0.0 };
            let right = if j + 1 < m { v[j + 1] } else { 0.0 };
            out[j] = (2.0 * v[j] - left - right) * ih2;
        }
    }

    /// Dense tridiagonal matrix of `L_h`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let ih2 = 1.0 / (self.h * self.h);
        DMatrix::from_fn(self.m, self.m, |i, j| match i.abs_diff(j) {
            0 => 2.0 * ih2,
            1 => -ih2,
            _ => 0.0,
        })
    }

    /// `h sum_j u_j v_j`, or `h sum_j u_j (L_h^{-1} v)_j`.
    pub fn inner_product(&self, u: &[f64], v: &[f64], metric: Metric) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        match metric {
            Metric::L2 => Ok(self.h * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()),
            Metric::Hminus1 => {
                let uh = self.forward(u)?;
                let vh = self.forward(v)?;
                Ok(self.spectral_inner(&uh, &vh, metric))
            }
        }
    }

    /// Inner product of two coefficient vectors.
    pub(crate) fn spectral_inner(&self, uh: &[f64], vh: &[f64], metric: Metric) -> f64 {
        let s: f64 = match metric {
            Metric::L2 => uh.iter().zip(vh).map(|(a, b)| a * b).sum(),
            Metric::Hminus1 => uh
                .iter()
                .zip(vh)
                .zip(&self.eigenvalues)
                .map(|((a, b), l)| a * b / l)
                .sum(),
        };
        self.h * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L2,
    /// `<u, v>_{-1} = <u, L_h^{-1} v>`.
    Hminus1,
}

/// Nonlinear part `g` of a semilinear gradient flow `u' = -L u + g(u)`,
/// with `g = -G'` for a potential `G`.
pub trait Nonlinearity: Send + Sync {
    fn eval(&self, u: &[f64], out: &mut [f64]);
    /// `sum_j G(u_j)`, unweighted.
    fn potential(&self, u: &[f64]) -> f64;
}

/// `g(u) = u - u^3` with the double-well `G(u) = (u^2 - 1)^2 / 4`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWell;

impl Nonlinearity for DoubleWell {
    fn eval(&self, u: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(u) {
            *o = x - x * x * x;
        }
    }

    fn potential(&self, u: &[f64]) -> f64 {
        u.iter().map(|&x| 0.25 * (x * x - 1.0).powi(2)).sum()
    }
}

/// State-independent forcing `g(u) = f`, `G(u) = -f u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing(pub Vec<f64>);

impl Nonlinearity for Forcing {
    fn eval(&self, _u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }

    fn potential(&self, u: &[f64]) -> f64 {
        -u.iter().zip(&self.0).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Clone)]
pub enum ProblemKind {
    /// `u' = -eps^2 L_h^2 u - L_h(u^3 - u)`, stabilized by `kappa L_h`.
    CahnHilliard { eps: f64, kappa: f64 },
    /// `u' = -L_h u + g(u)`, stabilized by `kappa I`.
    StabilizedSemilinear { kappa: f64, g: Arc<dyn Nonlinearity> },
}

impl fmt::Debug for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemKind::CahnHilliard { eps, kappa } => f
                .debug_struct("CahnHilliard")
                .field("eps", eps)
                .field("kappa", kappa)
                .finish(),
            ProblemKind::StabilizedSemilinear { kappa, .. } => f
                .debug_struct("StabilizedSemilinear")
                .field("kappa", kappa)
                .finish_non_exhaustive(),
        }
    }
}

/// A stabilized gradient flow `u' = -L_kappa u + g_kappa(u)` on a
/// [`SpectralOperator`].
#[derive(Debug, Clone)]
pub struct Problem {
    op: Arc<SpectralOperator>,
    kind: ProblemKind,
    mu: Vec<f64>,
}

impl Problem {
    pub fn cahn_hilliard(op: Arc<SpectralOperator>, eps: f64, kappa: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Parameter(format!("interface width {eps} must be positive")));
        }
        Self::new(op, ProblemKind::CahnHilliard { eps, kappa })
    }

    pub fn semilinear(op: Arc<SpectralOperator>, kappa: f64, g: Arc<dyn Nonlinearity>) -> Result<Self> {
        Self::new(op, ProblemKind::StabilizedSemilinear { kappa, g })
    }

    fn new(op: Arc<SpectralOperator>, kind: ProblemKind) -> Result<Self> {
        let kappa = match &kind {
            ProblemKind::CahnHilliard { kappa, .. } | ProblemKind::StabilizedSemilinear { kappa, .. } => *kappa,
        };
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::Parameter(format!("stabilization {kappa} must be nonnegative")));
        }
        let mut p = Problem { op, kind, mu: Vec::new() };
        p.mu = p.op.eigenvalues().iter().map(|&l| p.mu_of(l)).collect();
        if let Some(bad) = p.mu.iter().find(|m| m.is_nan() || **m <= 0.0) {
            return Err(Error::Parameter(format!("stabilized operator has eigenvalue {bad}")));
        }
        Ok(p)
    }

    pub fn operator(&self) -> &SpectralOperator {
        &self.op
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn kappa(&self) -> f64 {
        match &self.kind {
            ProblemKind::CahnHilliard { kappa, .. } | ProblemKind::StabilizedSemilinear { kappa, .. } => *kappa,
        }
    }

    /// Eigenvalue of `L_kappa` belonging to the eigenvalue `lambda` of `L_h`.
    pub fn mu_of(&self, lambda: f64) -> f64 {
        match &self.kind {
            ProblemKind::CahnHilliard { eps, kappa } => eps * eps * lambda * lambda + kappa * lambda,
            ProblemKind::StabilizedSemilinear { kappa, .. } => lambda + kappa,
        }
    }

    /// `mu(lambda_k)` for every mode.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Metric in which the problem is a gradient flow.
    pub fn metric(&self) -> Metric {
        match self.kind {
            ProblemKind::CahnHilliard { .. } => Metric::Hminus1,
            ProblemKind::StabilizedSemilinear { .. } => Metric::L2,
        }
    }

    /// `g_kappa(u)` at the nodes; the Laplacian goes through the stencil.
    pub fn g_kappa(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.op.check_len(u)?;
        let mut out = vec![0.0; u.len()];
        match &self.kind {
            ProblemKind::CahnHilliard { kappa, .. } => {
                let w: Vec<f64> = u.iter().map(|&x| (1.0 + kappa) * x - x * x * x).collect();
                self.op.stencil_into(&w, &mut out);
            }
            ProblemKind::StabilizedSemilinear { kappa, g } => {
                g.eval(u, &mut out);
                for (o, &x) in out.iter_mut().zip(u) {
                    *o += kappa * x;
                }
            }
        }
        Ok(out)
    }

    /// Sine coefficients of `g_kappa(u)`.
    pub(crate) fn g_kappa_spectral(&self, u: &[f64], out: &mut [f64]) {
        let mut w = vec![0.0; u.len()];
        match &self.kind {
            ProblemKind::CahnHilliard { kappa, .. } => {
                for (o, &x) in w.iter_mut().zip(u) {
                    *o = (1.0 + kappa) * x - x * x * x;
                }
                self.op.transform_into(&w, out);
                for (o, l) in out.iter_mut().zip(self.op.eigenvalues()) {
                    *o *= l;
                }
            }
            ProblemKind::StabilizedSemilinear { kappa, g } => {
                g.eval(u, &mut w);
                for (o, &x) in w.iter_mut().zip(u) {
                    *o += kappa * x;
                }
                self.op.transform_into(&w, out);
            }
        }
    }

    /// Discrete energy of the unstabilized flow.
    pub fn energy(&self, v: &[f64]) -> Result<f64> {
        match &self.kind {
            ProblemKind::CahnHilliard { .. } => ch_energy(self, v),
            ProblemKind::StabilizedSemilinear { g, .. } => {
                let lv = self.op.apply_stencil(v)?;
                let h = self.op.h();
                Ok(0.5 * self.op.inner_product(v, &lv, Metric::L2)? + h * g.potential(v))
            }
        }
    }
}

/// `E[v] = (eps^2/2) <v, L_h v> + h sum_j (v_j^2 - 1)^2 / 4`.
pub fn ch_energy(problem: &Problem, v: &[f64]) -> Result<f64> {
    let ProblemKind::CahnHilliard { eps, .. } = problem.kind else {
        return Err(Error::Unsupported("Cahn-Hilliard energy of a semilinear problem".into()));
    };
    let op = problem.operator();
    let lv = op.apply_stencil(v)?;
    let quad = op.inner_product(v, &lv, Metric::L2)?;
    Ok(0.5 * eps * eps * quad + op.h() * DoubleWell.potential(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_size() {
        let op = SpectralOperator::from_spacing(2.0 * std::f64::consts::PI, std::f64::consts::PI / 320.0).unwrap();
        assert_eq!(op.len(), 639);
    }

    #[test]
    fn two_point_eigenvalues() {
        let op = SpectralOperator::dirichlet_1d(3.0, 2).unwrap();
        let ev = op.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(matches!(SpectralOperator::dirichlet_1d(1.0, 1), Err(Error::Parameter(_))));
        assert!(SpectralOperator::dirichlet_1d(-1.0, 5).is_err());
    }

    #[test]
    fn length_mismatch() {
        let op = SpectralOperator::dirichlet_1d(1.0, 4).unwrap();
        assert!(matches!(op.forward(&[1.0; 3]), Err(Error::Dimension { .. })));
        assert!(op.apply_spectral(|l| l, &[1.0; 5]).is_err());
    }

    #[test]
    fn dense_and_fast_agree() {
        let dense = SpectralOperator::with_transform(2.0, 17, Transform::Dense).unwrap();
        let fast = SpectralOperator::with_transform(2.0, 17, Transform::Fast).unwrap();
        let v: Vec<f64> = (0..17).map(|j| ((j * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let a = dense.forward(&v).unwrap();
        let b = fast.forward(&v).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_state_energy() {
        let op = Arc::new(SpectralOperator::dirichlet_1d(2.0, 9).unwrap());
        let p = Problem::cahn_hilliard(op.clone(), 0.2, 2.0).unwrap();
        let e = ch_energy(&p, &[0.0; 9]).unwrap();
        assert!((e - op.h() * 9.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn energy_of_wrong_kind() {
        let op = Arc::new(SpectralOperator::dirichlet_1d(2.0, 9).unwrap());
        let p = Problem::semilinear(op, 1.0, Arc::new(DoubleWell)).unwrap();
        assert!(matches!(ch_energy(&p, &[0.0; 9]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn ch_nonlinearity_splits_operator() {
        let op = Arc::new(SpectralOperator::dirichlet_1d(2.0, 12).unwrap());
        let (eps, kappa) = (0.3, 1.5);
        let p = Problem::cahn_hilliard(op.clone(), eps, kappa).unwrap();
        let u: Vec<f64> = op.nodes().iter().map(|x| (2.0 * x).sin() * 0.8).collect();
        let lk = op.apply_spectral(|l| eps * eps * l * l + kappa * l, &u).unwrap();
        let g = p.g_kappa(&u).unwrap();
        let l2u = op.apply_stencil(&op.apply_stencil(&u).unwrap()).unwrap();
        let cube: Vec<f64> = u.iter().map(|x| x * x * x - x).collect();
        let lc = op.apply_stencil(&cube).unwrap();
        for j in 0..u.len() {
            let lhs = -lk[j] + g[j];
            let rhs = -eps * eps * l2u[j] - lc[j];
            assert!((lhs - rhs).abs() < 1e-8 * rhs.abs().max(1.0), "{j}: {lhs} {rhs}");
        }
    }
}
