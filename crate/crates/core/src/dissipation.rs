//! Stage energy-dissipation analysis of exponential Runge-Kutta tableaux.
//!
//! For a tableau with difference coefficients `abar(z)` the DOC kernels are
//! the lower-triangular inverse `theta = abar^{-1}`, and the differentiation
//! matrix is
//!
//! ```text
//! d_kl = theta_kl + (z/2)(2 - delta_kl)     (standard)
//! d_kl = theta_kl + z                       (implicit variant)
//! ```
//!
//! for `l <= k`, zero above the diagonal. A method dissipates energy at every
//! stage when the symmetric part `S = (D + D^T)/2` is positive semi-definite
//! for all `z <= 0`; this is probed through the leading principal minors of
//! `S` on a grid.

use std::io::Write;

use nalgebra::DMatrix;

use crate::catalog::Tableau;
use crate::error::{Error, Result};

/// Which differentiation matrix to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    #[default]
    Standard,
    /// Keeps only the pure implicit part, shifting the diagonal by `z/2`.
    Implicit,
}

impl Variant {
    fn diagonal_shift(self, z: f64) -> f64 {
        match self {
            Variant::Standard => 0.5 * z,
            Variant::Implicit => z,
        }
    }
}

/// DOC kernels from an evaluated difference-coefficient matrix.
pub fn doc_kernels_from(abar: &DMatrix<f64>, z: f64) -> Result<DMatrix<f64>> {
    let s = abar.nrows();
    let mut theta = DMatrix::zeros(s, s);
    for k in 0..s {
        let d = abar[(k, k)];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::SingularDiagonal { row: k + 1, z });
        }
        theta[(k, k)] = 1.0 / d;
        for j in (0..k).rev() {
            let acc: f64 = (j + 1..=k).map(|l| theta[(k, l)] * abar[(l, j)]).sum();
            theta[(k, j)] = -acc / abar[(j, j)];
        }
    }
    Ok(theta)
}

/// DOC kernels `theta(z)` of a Butcher-Diff tableau.
pub fn doc_kernels(dt: &crate::catalog::DiffTableau, z: f64) -> Result<DMatrix<f64>> {
    doc_kernels_from(&dt.matrix(z)?, z)
}

/// Largest entry of `|theta * abar - I|`.
pub fn doc_orthogonality_residual(theta: &DMatrix<f64>, abar: &DMatrix<f64>) -> f64 {
    let p = theta * abar;
    let s = p.nrows();
    let mut worst: f64 = 0.0;
    for m in 0..s {
        for j in 0..s {
            let delta = if m == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(m, j)] - delta).abs());
        }
    }
    worst
}

/// Turns DOC kernels into the differentiation matrix.
pub fn differentiation_from_kernels(theta: &DMatrix<f64>, z: f64, variant: Variant) -> DMatrix<f64> {
    let s = theta.nrows();
    let mut d = DMatrix::zeros(s, s);
    for k in 0..s {
        for l in 0..k {
            d[(k, l)] = theta[(k, l)] + z;
        }
        d[(k, k)] = theta[(k, k)] + variant.diagonal_shift(z);
    }
    d
}

/// Differentiation matrix built through the DOC recursion.
pub fn differentiation_matrix(t: &Tableau, z: f64, variant: Variant) -> Result<DMatrix<f64>> {
    let theta = doc_kernels(&t.butcher_diff(), z)?;
    Ok(differentiation_from_kernels(&theta, z, variant))
}

/// Differentiation matrix from `A(z)^{-1} E_s + z E_s - (z/2) I`, with `E_s`
/// the lower-triangular matrix of ones.
pub fn differentiation_matrix_direct(t: &Tableau, z: f64, variant: Variant) -> Result<DMatrix<f64>> {
    let a = t.matrix(z)?;
    let s = a.nrows();
    for k in 0..s {
        if a[(k, k)] == 0.0 {
            return Err(Error::SingularDiagonal { row: k + 1, z });
        }
    }
    let e = DMatrix::from_fn(s, s, |i, j| if j <= i { 1.0 } else { 0.0 });
    let mut d = a
        .solve_lower_triangular(&e)
        .ok_or(Error::SingularDiagonal { row: 0, z })?;
    for i in 0..s {
        for j in 0..=i {
            d[(i, j)] += z;
        }
        d[(i, i)] -= z - variant.diagonal_shift(z);
    }
    Ok(d)
}

/// DOC-route differentiation matrix, cross-checked against the direct route.
///
/// Fails with a structural error when some entry differs by more than
/// `tol * max(1, |d_kl|)`.
pub fn differentiation_matrix_checked(
    t: &Tableau,
    z: f64,
    variant: Variant,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let doc = differentiation_matrix(t, z, variant)?;
    let direct = differentiation_matrix_direct(t, z, variant)?;
    for (x, y) in doc.iter().zip(direct.iter()) {
        if (x - y).abs() > tol * x.abs().max(1.0) || !x.is_finite() {
            return Err(Error::Structure(format!(
                "{}: differentiation matrix routes disagree at z = {z:e} ({x:e} vs {y:e})",
                t.id()
            )));
        }
    }
    Ok(doc)
}

/// Symmetric part `(D + D^T)/2`.
pub fn symmetric_part(d: &DMatrix<f64>) -> DMatrix<f64> {
    (d + d.transpose()) * 0.5
}

/// Determinants of the leading blocks of `(D + D^T)/2`, each by pivoted LU.
pub fn leading_principal_minors(d: &DMatrix<f64>) -> Vec<f64> {
    let s = symmetric_part(d);
    (1..=s.nrows())
        .map(|j| s.view((0, 0), (j, j)).clone_owned().lu().determinant())
        .collect()
}

/// `R(z) = z/2 + (1/s) sum_i 1/a_{i+1,i}(z)`; the implicit variant uses `z`.
pub fn average_dissipation_rate(t: &Tableau, z: f64, variant: Variant) -> Result<f64> {
    let diag = t.diagonal(z)?;
    let mut acc = 0.0;
    for (i, a) in diag.iter().enumerate() {
        if *a == 0.0 {
            return Err(Error::SingularDiagonal { row: i + 1, z });
        }
        acc += 1.0 / a;
    }
    Ok(variant.diagonal_shift(z) + acc / diag.len() as f64)
}

/// Everything the analysis computes at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationSample {
    pub z: f64,
    pub variant: Variant,
    pub theta: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub minors: Vec<f64>,
    pub rate: f64,
}

impl DissipationSample {
    pub fn new(t: &Tableau, z: f64, variant: Variant) -> Result<Self> {
        let theta = doc_kernels(&t.butcher_diff(), z)?;
        let d = differentiation_from_kernels(&theta, z, variant);
        let minors = leading_principal_minors(&d);
        let rate = average_dissipation_rate(t, z, variant)?;
        Ok(DissipationSample {
            z,
            variant,
            theta,
            d,
            minors,
            rate,
        })
    }

    /// Scale `max(1, max_k |S_kk|)` used by the semi-definiteness tolerance.
    pub fn diagonal_scale(&self) -> f64 {
        (0..self.d.nrows())
            .map(|k| self.d[(k, k)].abs())
            .fold(1.0, f64::max)
    }

    /// First minor (zero-based) below `-tol * scale^j`, if any.
    pub fn failing_minor(&self, tol: f64) -> Option<usize> {
        let scale = self.diagonal_scale();
        self.minors
            .iter()
            .enumerate()
            .find(|(j, m)| m.is_nan() || **m < -tol * scale.powi(*j as i32 + 1))
            .map(|(j, _)| j)
    }
}

/// Sample points for the scans, all strictly negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ZGrid {
    points: Vec<f64>,
}

impl ZGrid {
    /// 400 log-spaced points with `|z|` in `[1e-6, 1e4]` merged with 400
    /// uniform points on `[-100, 0)`, sorted by increasing `|z|`.
    pub fn standard() -> Self {
        Self::log_linear(1e-6, 1e4, 400, 100.0, 400)
    }

    pub fn log_linear(min_abs: f64, max_abs: f64, n_log: usize, lin_extent: f64, n_lin: usize) -> Self {
        let mut pts = Vec::with_capacity(n_log + n_lin);
        let (l0, l1) = (min_abs.log10(), max_abs.log10());
        for i in 0..n_log {
            let f = if n_log == 1 { 0.0 } else { i as f64 / (n_log - 1) as f64 };
            pts.push(-(10f64).powf(l0 + (l1 - l0) * f));
        }
        for i in 0..n_lin {
            pts.push(-lin_extent + lin_extent * i as f64 / n_lin as f64);
        }
        Self::from_points(pts)
    }

    /// Keeps the strictly negative finite points, ordered by `|z|`.
    pub fn from_points(mut pts: Vec<f64>) -> Self {
        pts.retain(|z| z.is_finite() && *z < 0.0);
        pts.sort_by(|a, b| b.total_cmp(a));
        pts.dedup();
        ZGrid { points: pts }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    PsdOnGrid,
    /// Not positive definite: some minor is negative at a witness point.
    Npd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub z: f64,
    /// One-based index of the offending leading principal minor.
    pub minor_index: usize,
    pub minor_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub grid_len: usize,
    pub z_min: f64,
    pub z_max: f64,
}

/// Default tolerance of the semi-definiteness test.
pub const PSD_TOL: f64 = 1e-9;
const BISECTION_STEPS: usize = 20;

/// Scans the grid in order of increasing `|z|`; the first failing point is
/// refined by bisection against the preceding passing point.
pub fn classify_method(t: &Tableau, grid: &ZGrid, tol: f64) -> Result<Classification> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty z grid".into()));
    }
    let pts = grid.points();
    let mut result = Classification {
        verdict: Verdict::PsdOnGrid,
        witness: None,
        grid_len: pts.len(),
        z_min: pts[pts.len() - 1],
        z_max: pts[0],
    };
    let mut prev_pass: Option<f64> = None;
    for &z in pts {
        let sample = DissipationSample::new(t, z, Variant::Standard)?;
        if sample.failing_minor(tol).is_none() {
            prev_pass = Some(z);
            continue;
        }
        let mut fail = sample;
        if let Some(mut pass) = prev_pass {
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (pass + fail.z);
                let s = DissipationSample::new(t, mid, Variant::Standard)?;
                if s.failing_minor(tol).is_some() {
                    fail = s;
                } else {
                    pass = mid;
                }
            }
        }
        let j = fail.failing_minor(tol).expect("failing end keeps a failing minor");
        result.verdict = Verdict::Npd;
        result.witness = Some(Witness {
            z: fail.z,
            minor_index: j + 1,
            minor_value: fail.minors[j],
        });
        break;
    }
    Ok(result)
}

/// Limit condition on the abscissas of the two-parameter third-order family:
///
/// ```text
/// 6 c3 (c2 - c3)/(3 c2 - 2) - 1 + 2 c2 (3 c2 - 2)/(3 c3 (c2 - c3))
/// ```
///
/// A nonnegative value is necessary for a nonnegative rate as `z -> -inf`.
pub fn eerk32_abscissa_condition(c2: f64, c3: f64) -> Result<f64> {
    let q = 3.0 * c2 - 2.0;
    let gap = c2 - c3;
    if !(c2.is_finite() && c3.is_finite()) || q.abs() < 1e-14 || gap.abs() < 1e-14 || c3.abs() < 1e-14 {
        return Err(Error::Parameter(format!(
            "degenerate abscissas c2 = {c2}, c3 = {c3}"
        )));
    }
    Ok(6.0 * c3 * gap / q - 1.0 + 2.0 * c2 * q / (3.0 * c3 * gap))
}

/// Writes `z, rate, minor_1..minor_s` with 17 significant digits.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &[DissipationSample]) -> Result<()> {
    let s = samples.first().map_or(0, |x| x.minors.len());
    write!(w, "z,rate")?;
    for j in 1..=s {
        write!(w, ",minor_{j}")?;
    }
    writeln!(w)?;
    for x in samples {
        write!(w, "{:.16e},{:.16e}", x.z, x.rate)?;
        for m in &x.minors {
            write!(w, ",{m:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{get_method, MethodId};
    use crate::phi::phi;
    use crate::scalar::Scalar;

    fn ph(k: u32, z: f64) -> f64 {
        phi(k, z).unwrap()
    }

    #[test]
    fn etd1_kernel_and_matrix() {
        let t = get_method(MethodId::Etd1).unwrap();
        let theta = doc_kernels(&t.butcher_diff(), -3.0).unwrap();
        assert!((theta[(0, 0)] - 1.0 / ph(1, -3.0)).abs() < 1e-15);
        let d0 = differentiation_matrix(&t, 0.0, Variant::Standard).unwrap();
        assert!((d0[(0, 0)] - 1.0).abs() < 1e-15);
        for z in ZGrid::standard().points() {
            let d = differentiation_matrix(&t, *z, Variant::Standard).unwrap();
            assert!(d[(0, 0)] >= 1.0 - 1e-12, "z = {z}");
        }
    }

    #[test]
    fn eerk2_kernels_closed_form() {
        for c2 in [0.5, 0.75, 1.0] {
            let t = get_method(MethodId::Eerk2 { c2: Scalar::real(c2) }).unwrap();
            for z in [-0.2, -3.0, -50.0] {
                let th = doc_kernels(&t.butcher_diff(), z).unwrap();
                let p1c = ph(1, c2 * z);
                assert!((th[(0, 0)] - 1.0 / (c2 * p1c)).abs() < 1e-12);
                assert!((th[(1, 1)] - c2 / ph(2, z)).abs() < 1e-12);
                let t21 = (c2 * p1c - ph(1, z) + ph(2, z) / c2) / (ph(2, z) * p1c);
                assert!((th[(1, 0)] - t21).abs() < 1e-10 * t21.abs().max(1.0));
                assert_eq!(th[(0, 1)], 0.0);
            }
        }
    }

    #[test]
    fn implicit_variant_entry() {
        let t = get_method(MethodId::Eerk2 { c2: Scalar::one() }).unwrap();
        let d = differentiation_matrix(&t, -2.0, Variant::Implicit).unwrap();
        assert!((d[(0, 0)] - (1.0 / ph(1, -2.0) - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn eerk31_first_column() {
        let c2 = 0.5;
        let t = get_method(MethodId::Eerk31 { c2: Scalar::real(c2) }).unwrap();
        let z = -4.0;
        let d = differentiation_matrix(&t, z, Variant::Standard).unwrap();
        assert!((d[(0, 0)] - (1.0 / (c2 * ph(1, c2 * z)) + z / 2.0)).abs() < 1e-13);
        assert!(d[(0, 1)] == 0.0 && d[(0, 2)] == 0.0 && d[(1, 2)] == 0.0);
    }

    #[test]
    fn identity_minors() {
        let m = leading_principal_minors(&DMatrix::identity(3, 3));
        assert_eq!(m, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn eerk2_first_minor_closed_form() {
        for c2 in [0.5, 0.75, 1.0] {
            let t = get_method(MethodId::Eerk2 { c2: Scalar::real(c2) }).unwrap();
            for z in [-0.5, -5.0, -60.0] {
                let d = differentiation_matrix(&t, z, Variant::Standard).unwrap();
                let m1 = leading_principal_minors(&d)[0];
                let e = (c2 * z).exp();
                let expect = z * (e + 1.0) / (2.0 * (e - 1.0));
                assert!((m1 - expect).abs() < 1e-12 * expect.abs().max(1.0));
                assert!(m1 >= 1.0 / c2 - 1e-12);
            }
        }
    }

    #[test]
    fn rate_limits_and_trace() {
        let t = get_method(MethodId::Eerk2 { c2: Scalar::one() }).unwrap();
        let r = average_dissipation_rate(&t, -1e-8, Variant::Standard).unwrap();
        assert!((r - 1.5).abs() < 1e-6);
        let t = get_method(MethodId::Etd1).unwrap();
        assert!((average_dissipation_rate(&t, 0.0, Variant::Standard).unwrap() - 1.0).abs() < 1e-15);
        for id in MethodId::catalog() {
            let t = get_method(id).unwrap();
            for z in [-0.1, -7.0, -300.0] {
                let s = DissipationSample::new(&t, z, Variant::Standard).unwrap();
                let tr = s.d.trace() / t.stages() as f64;
                assert!((s.rate - tr).abs() < 1e-12 * tr.abs().max(1.0), "{id} z={z}");
            }
        }
    }

    #[test]
    fn abscissa_condition_values() {
        let v = eerk32_abscissa_condition(1.0, 0.5).unwrap();
        assert!((v - (1.5 - 1.0 + 8.0 / 3.0)).abs() < 1e-14);
        assert!(eerk32_abscissa_condition(0.75, 0.6).unwrap() > 0.0);
        assert!(eerk32_abscissa_condition(0.5, 0.7).unwrap() > 0.0);
        assert!(eerk32_abscissa_condition(2.0 / 3.0, 0.5).is_err());
        assert!(eerk32_abscissa_condition(0.5, 0.5).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = ZGrid::standard();
        assert!(g.len() > 700 && g.len() <= 800);
        assert!(g.points().windows(2).all(|w| w[0] > w[1]));
        assert!(g.points().iter().all(|z| *z < 0.0));
        assert!((g.points()[0] + 1e-6).abs() < 1e-18);
        assert!((g.points()[g.len() - 1] + 1e4).abs() < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let t = get_method(MethodId::Eerk2 { c2: Scalar::one() }).unwrap();
        let s = vec![DissipationSample::new(&t, -1.0, Variant::Standard).unwrap()];
        let mut out = Vec::new();
        write_samples_csv(&mut out, &s).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("z,rate,minor_1,minor_2"));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row[0], -1.0);
        assert_eq!(row[1], s[0].rate);
    }
}
