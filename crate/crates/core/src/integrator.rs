//! Stage loop of explicit exponential Runge-Kutta methods in stabilized form
//!
//! ```text
//! U^{i+1} = U^1 + sum_{j<=i} a_{i+1,j}(-tau L_k) [tau g_k(U^j) - tau L_k U^1]
//! ```
//!
//! evaluated mode by mode in the sine eigenbasis of the problem.

use std::time::{Duration, Instant};

use crate::catalog::Tableau;
use crate::dissipation::{differentiation_from_kernels, doc_kernels_from, Variant};
use crate::error::{Error, Result};
use crate::spatial::Problem;

/// Relative slack below which a stage energy law counts as violated.
pub const MARGIN_TOL: f64 = 1e-9;

/// One step `u^{n-1} -> u^n` with all stage data.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// `U^{n,1}, ..., U^{n,s+1}`; the first is the previous solution.
    pub stages: Vec<Vec<f64>>,
    /// `U^{n,i+1} - U^{n,i}`, `i = 1..=s`.
    pub deltas: Vec<Vec<f64>>,
    /// `E[U^{n,j}]` for every stage.
    pub energies: Vec<f64>,
    /// Slack of the stage energy laws, present when monitoring.
    pub margins: Option<Vec<f64>>,
}

impl StepRecord {
    pub fn solution(&self) -> &[f64] {
        self.stages.last().expect("at least two stages")
    }

    /// Smallest margin divided by `|E[U^{n,1}]|`.
    pub fn min_relative_margin(&self) -> Option<(usize, f64)> {
        let scale = self.energies[0].abs().max(f64::MIN_POSITIVE);
        self.margins.as_ref().and_then(|m| {
            m.iter()
                .enumerate()
                .map(|(j, x)| (j, x / scale))
                .min_by(|a, b| a.1.total_cmp(&b.1))
        })
    }
}

/// Coefficients of one (problem, tableau, step size) triple, evaluated on
/// every eigenmode.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    problem: &'a Problem,
    tableau: &'a Tableau,
    tau: f64,
    /// `coeffs[i][j][k] = a_{i+2,j+1}(-tau mu_k)`.
    coeffs: Vec<Vec<Vec<f64>>>,
    /// `dmat[k][i][j] = d_{i+1,j+1}(-tau mu_k)`.
    dmat: Option<Vec<Vec<Vec<f64>>>>,
}

impl<'a> Integrator<'a> {
    pub fn new(problem: &'a Problem, tableau: &'a Tableau, tau: f64, monitor: bool) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Parameter(format!("step size {tau} must be positive")));
        }
        let s = tableau.stages();
        let modes = problem.mu().len();
        let mut coeffs: Vec<Vec<Vec<f64>>> = (0..s).map(|i| vec![vec![0.0; modes]; i + 1]).collect();
        let diff = tableau.butcher_diff();
        let mut dmat = monitor.then(|| Vec::with_capacity(modes));
        for (k, &mu) in problem.mu().iter().enumerate() {
            let z = -tau * mu;
            let a = tableau.matrix(z)?;
            for (i, row) in coeffs.iter_mut().enumerate() {
                for (j, c) in row.iter_mut().enumerate() {
                    c[k] = a[(i, j)];
                }
            }
            if let Some(dm) = dmat.as_mut() {
                let theta = doc_kernels_from(&diff.matrix(z)?, z)?;
                let d = differentiation_from_kernels(&theta, z, Variant::Standard);
                dm.push((0..s).map(|i| (0..=i).map(|j| d[(i, j)]).collect()).collect());
            }
        }
        Ok(Integrator {
            problem,
            tableau,
            tau,
            coeffs,
            dmat,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn monitoring(&self) -> bool {
        self.dmat.is_some()
    }

    /// Advances `u_prev` by one step; `step` only labels the record.
    pub fn step(&self, u_prev: &[f64], step: usize) -> Result<StepRecord> {
        let op = self.problem.operator();
        let m = op.len();
        if u_prev.len() != m {
            return Err(Error::Dimension {
                expected: m,
                found: u_prev.len(),
            });
        }
        let s = self.tableau.stages();
        let tau = self.tau;
        let mu = self.problem.mu();

        let mut u1_hat = vec![0.0; m];
        op.transform_into(u_prev, &mut u1_hat);
        let mut stages = Vec::with_capacity(s + 1);
        stages.push(u_prev.to_vec());
        let mut residuals: Vec<Vec<f64>> = Vec::with_capacity(s);
        let mut g_hat = vec![0.0; m];
        for i in 0..s {
            self.problem.g_kappa_spectral(&stages[i], &mut g_hat);
            residuals.push(
                g_hat
                    .iter()
                    .zip(&u1_hat)
                    .zip(mu)
                    .map(|((g, u), mu)| tau * g - tau * mu * u)
                    .collect(),
            );
            let mut next_hat = u1_hat.clone();
            for (a, r) in self.coeffs[i].iter().zip(&residuals) {
                for ((x, a), r) in next_hat.iter_mut().zip(a).zip(r) {
                    *x += a * r;
                }
            }
            let mut next = vec![0.0; m];
            op.transform_into(&next_hat, &mut next);
            if next.iter().any(|x| !x.is_finite()) {
                return Err(Error::Diverged { step });
            }
            stages.push(next);
        }
        let deltas: Vec<Vec<f64>> = stages
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
            .collect();
        let energies = stages
            .iter()
            .map(|u| self.problem.energy(u))
            .collect::<Result<Vec<_>>>()?;
        let mut rec = StepRecord {
            step,
            stages,
            deltas,
            energies,
            margins: None,
        };
        if self.monitoring() {
            rec.margins = Some(self.margins(&rec)?);
        }
        Ok(rec)
    }

    /// Slack of the stage energy laws
    ///
    /// ```text
    /// E[U^{j+1}] - E[U^1] <= -(1/tau) sum_{k<=j} < dU^{k+1}, sum_{l<=k} d_kl dU^{l+1} >
    /// ```
    ///
    /// in the problem's gradient-flow metric.
    pub fn margins(&self, rec: &StepRecord) -> Result<Vec<f64>> {
        let s = self.tableau.stages();
        if rec.deltas.len() != s || rec.energies.len() != s + 1 {
            return Err(Error::Dimension {
                expected: s,
                found: rec.deltas.len(),
            });
        }
        let owned;
        let dmat = match &self.dmat {
            Some(d) => d,
            None => {
                owned = Integrator::new(self.problem, self.tableau, self.tau, true)?
                    .dmat
                    .expect("monitoring integrator");
                &owned
            }
        };
        let op = self.problem.operator();
        let metric = self.problem.metric();
        let hats = rec
            .deltas
            .iter()
            .map(|d| op.forward(d))
            .collect::<Result<Vec<_>>>()?;
        let m = op.len();
        let mut out = Vec::with_capacity(s);
        let mut quad = 0.0;
        for k in 0..s {
            let mut acc = vec![0.0; m];
            for (mode, a) in acc.iter_mut().enumerate() {
                let row = &dmat[mode][k];
                *a = (0..=k).map(|l| row[l] * hats[l][mode]).sum();
            }
            quad += op.spectral_inner(&hats[k], &acc, metric);
            out.push(-quad / self.tau - (rec.energies[k + 1] - rec.energies[0]));
        }
        Ok(out)
    }
}

/// One step of `t` applied to `problem`.
pub fn step(problem: &Problem, t: &Tableau, u_prev: &[f64], tau: f64) -> Result<StepRecord> {
    Integrator::new(problem, t, tau, false)?.step(u_prev, 1)
}

/// Stage energy-law slack of a recorded step.
pub fn stage_energy_margin(problem: &Problem, t: &Tableau, rec: &StepRecord, tau: f64) -> Result<Vec<f64>> {
    Integrator::new(problem, t, tau, true)?.margins(rec)
}

/// Number of steps `T / tau`, which must be a positive integer up to rounding.
pub fn step_count(tau: f64, final_time: f64) -> Result<usize> {
    if !(tau.is_finite() && tau > 0.0 && final_time.is_finite()) {
        return Err(Error::Parameter(format!("invalid step size {tau} or final time {final_time}")));
    }
    let q = final_time / tau;
    let n = q.round();
    if n < 1.0 || (q - n).abs() > 1e-9 * n {
        return Err(Error::Parameter(format!(
            "final time {final_time} is not a positive multiple of the step size {tau}"
        )));
    }
    Ok(n as usize)
}

/// Stage-law violation found while monitoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginViolation {
    pub step: usize,
    /// One-based stage index `j` of the law `E[U^{j+1}] - E[U^1] <= ...`.
    pub stage: usize,
    pub relative_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub tau: f64,
    pub steps: usize,
    /// `E[u^n]`, `n = 0..=N`.
    pub energies: Vec<f64>,
    pub final_state: Vec<f64>,
    /// Per-step margins when monitoring, otherwise empty.
    pub margins: Vec<Vec<f64>>,
    pub violations: Vec<MarginViolation>,
    pub min_relative_margin: Option<f64>,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| n as f64 * self.tau).collect()
    }

    /// Steps `n` where `E[u^n] > E[u^{n-1}] + rel_tol * |E[u^{n-1}]|`.
    pub fn energy_increases(&self, rel_tol: f64) -> Vec<usize> {
        self.energies
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] - w[0] > rel_tol * w[0].abs())
            .map(|(n, _)| n + 1)
            .collect()
    }
}

/// Runs `N = T / tau` steps from `u0`.
pub fn integrate(problem: &Problem, t: &Tableau, u0: &[f64], tau: f64, final_time: f64, monitor: bool) -> Result<RunReport> {
    integrate_observed(problem, t, u0, tau, final_time, monitor, |_| {})
}

/// As [`integrate`], handing every step record to `observer` as it is made.
/// A divergence error names the first step whose state is not finite.
pub fn integrate_observed<F>(
    problem: &Problem,
    t: &Tableau,
    u0: &[f64],
    tau: f64,
    final_time: f64,
    monitor: bool,
    mut observer: F,
) -> Result<RunReport>
where
    F: FnMut(&StepRecord),
{
    let start = Instant::now();
    let n = step_count(tau, final_time)?;
    let integ = Integrator::new(problem, t, tau, monitor)?;
    let mut u = u0.to_vec();
    let mut energies = Vec::with_capacity(n + 1);
    energies.push(problem.energy(&u)?);
    let mut margins = Vec::new();
    let mut violations = Vec::new();
    let mut min_rel: Option<f64> = None;
    for step in 1..=n {
        let rec = integ.step(&u, step)?;
        observer(&rec);
        let e = *rec.energies.last().expect("stage energies");
        if !e.is_finite() {
            return Err(Error::Diverged { step });
        }
        energies.push(e);
        if let Some(m) = &rec.margins {
            let scale = rec.energies[0].abs().max(f64::MIN_POSITIVE);
            for (j, x) in m.iter().enumerate() {
                let rel = x / scale;
                min_rel = Some(min_rel.map_or(rel, |v| v.min(rel)));
                if rel < -MARGIN_TOL {
                    violations.push(MarginViolation {
                        step,
                        stage: j + 1,
                        relative_margin: rel,
                    });
                }
            }
            margins.push(m.clone());
        }
        u = rec.stages.into_iter().last().expect("final stage");
    }
    Ok(RunReport {
        tau,
        steps: n,
        energies,
        final_state: u,
        margins,
        violations,
        min_relative_margin: min_rel,
        wall_time: start.elapsed(),
    })
}
