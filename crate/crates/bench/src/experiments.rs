use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use eerk_core::catalog::{get_method, MethodId};
use eerk_core::dissipation::{classify_method, Classification, DissipationSample, Variant, PSD_TOL};
use eerk_core::integrator::{integrate_observed, step_count, RunReport, MARGIN_TOL};
use eerk_core::spatial::{Problem, SpectralOperator};
use eerk_core::Error as CoreError;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InitialData};
use crate::error::{BenchError, Result};

/// Relative tolerance for calling an energy step an increase.
pub const ENERGY_TOL: f64 = 1e-10;

fn operator(cfg: &ExperimentConfig) -> Result<Arc<SpectralOperator>> {
    Ok(Arc::new(SpectralOperator::dirichlet_1d(cfg.length, cfg.interior_points()?)?))
}

fn problem(cfg: &ExperimentConfig, op: Arc<SpectralOperator>, kappa: f64) -> Result<Problem> {
    let p = Problem::cahn_hilliard(op, cfg.eps, kappa)?;
    if let Some(m) = cfg.metric {
        if m != p.metric() {
            return Err(BenchError::Config(format!(
                "metric {m:?} is not the gradient-flow metric {:?} of this model",
                p.metric()
            )));
        }
    }
    Ok(p)
}

fn initial_state(op: &SpectralOperator, data: InitialData) -> Vec<f64> {
    op.nodes().into_iter().map(|x| data.eval(x)).collect()
}

fn ratio(a: f64, b: f64) -> Option<usize> {
    let q = a / b;
    let n = q.round();
    (n >= 1.0 && (q - n).abs() <= 1e-9 * n).then_some(n as usize)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub error: f64,
    /// `log(e_prev / e) / log(tau_prev / tau)`; none on the first row.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub method: MethodId,
    pub reference: MethodId,
    pub rows: Vec<ConvergenceRow>,
    pub wall_time: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub kappa: f64,
    pub reference_tau: f64,
    pub tables: Vec<ConvergenceTable>,
    pub reference_time: Duration,
}

/// Max-in-time sup-norm errors against a fine reference run, one table per method.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let methods = cfg.require_methods()?;
    let kappa = cfg.single_kappa()?;
    if cfg.final_time <= 0.0 {
        return Err(BenchError::Config("convergence needs a positive final time".into()));
    }
    let coarsest = cfg.taus.iter().copied().fold(f64::MIN, f64::max);
    let finest = cfg.taus.iter().copied().fold(f64::MAX, f64::min);
    let ref_tau = cfg.reference_tau.unwrap_or(coarsest / 32.0);
    let stride = ratio(finest, ref_tau)
        .ok_or_else(|| BenchError::Config(format!("step {finest} is not a multiple of the reference step {ref_tau}")))?;
    let mut multiples = Vec::with_capacity(cfg.taus.len());
    for &tau in &cfg.taus {
        multiples.push(
            ratio(tau, finest)
                .ok_or_else(|| BenchError::Config(format!("step {tau} is not a multiple of {finest}")))?,
        );
    }
    step_count(ref_tau, cfg.final_time)?;
    for &tau in &cfg.taus {
        step_count(tau, cfg.final_time)?;
    }

    let op = operator(cfg)?;
    let p = problem(cfg, op.clone(), kappa)?;
    let u0 = initial_state(&op, cfg.initial.unwrap_or(InitialData::Sine));

    let refs: Vec<MethodId> = methods.iter().map(|m| cfg.reference_method(m.order())).collect();
    let mut distinct = refs.clone();
    distinct.sort_by_key(|m| m.to_string());
    distinct.dedup();
    let start = Instant::now();
    let snapshots: Vec<(MethodId, Vec<Vec<f64>>)> = distinct
        .par_iter()
        .map(|&r| {
            let t = get_method(r)?;
            let mut snaps = vec![u0.clone()];
            integrate_observed(&p, &t, &u0, ref_tau, cfg.final_time, false, |rec| {
                if rec.step % stride == 0 {
                    snaps.push(rec.solution().to_vec());
                }
            })?;
            Ok((r, snaps))
        })
        .collect::<Result<_>>()?;
    let reference_time = start.elapsed();
    let snapshots: BTreeMap<String, Vec<Vec<f64>>> =
        snapshots.into_iter().map(|(m, s)| (m.to_string(), s)).collect();

    let cells: Vec<(usize, usize)> =
        (0..methods.len()).flat_map(|i| (0..cfg.taus.len()).map(move |k| (i, k))).collect();
    let errors: Vec<(f64, Duration)> = cells
        .par_iter()
        .map(|&(i, k)| {
            let t = get_method(methods[i])?;
            let snaps = &snapshots[&refs[i].to_string()];
            let every = multiples[k];
            let mut err = 0.0f64;
            let rep = integrate_observed(&p, &t, &u0, cfg.taus[k], cfg.final_time, false, |rec| {
                let s = &snaps[rec.step * every];
                for (a, b) in rec.solution().iter().zip(s) {
                    err = err.max((a - b).abs());
                }
            })?;
            Ok((err, rep.wall_time))
        })
        .collect::<Result<_>>()?;

    let tables = methods
        .iter()
        .enumerate()
        .map(|(i, &method)| {
            let chunk = &errors[i * cfg.taus.len()..(i + 1) * cfg.taus.len()];
            let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(chunk.len());
            for (k, &(error, _)) in chunk.iter().enumerate() {
                let order = rows
                    .last()
                    .map(|prev| (prev.error / error).ln() / (prev.tau / cfg.taus[k]).ln());
                rows.push(ConvergenceRow { tau: cfg.taus[k], error, order });
            }
            ConvergenceTable { method, reference: refs[i], rows, wall_time: chunk.iter().map(|c| c.1).sum() }
        })
        .collect();
    Ok(ConvergenceReport { kappa, reference_tau: ref_tau, tables, reference_time })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyRun {
    pub method: MethodId,
    pub kappa: f64,
    pub nodes: Vec<f64>,
    pub run: RunReport,
    /// Steps whose energy exceeds the previous one by more than [`ENERGY_TOL`] relative.
    pub increases: Vec<usize>,
    /// First step with a non-finite state; the series stops before it.
    pub diverged_at: Option<usize>,
}

impl EnergyRun {
    pub fn energy_at(&self, t: f64) -> Option<f64> {
        let n = (t / self.run.tau).round();
        if (t / self.run.tau - n).abs() > 1e-9 * n.max(1.0) {
            return None;
        }
        self.run.energies.get(n as usize).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub runs: Vec<EnergyRun>,
}

impl EnergyReport {
    pub fn any_diverged(&self) -> bool {
        self.runs.iter().any(|r| r.diverged_at.is_some())
    }
}

fn energy_cell(cfg: &ExperimentConfig, op: &Arc<SpectralOperator>, method: MethodId, kappa: f64, tau: f64) -> Result<EnergyRun> {
    let p = problem(cfg, op.clone(), kappa)?;
    let t = get_method(method)?;
    let u0 = initial_state(op, cfg.initial.unwrap_or(InitialData::Bumps));
    let nodes = op.nodes();
    if cfg.final_time == 0.0 {
        let run = RunReport {
            tau,
            steps: 0,
            energies: vec![p.energy(&u0)?],
            final_state: u0,
            margins: Vec::new(),
            violations: Vec::new(),
            min_relative_margin: None,
            wall_time: Duration::ZERO,
        };
        return Ok(EnergyRun { method, kappa, nodes, run, increases: Vec::new(), diverged_at: None });
    }
    let start = Instant::now();
    let e0 = p.energy(&u0)?;
    let mut energies = vec![e0];
    let mut margins = Vec::new();
    let mut last = u0.clone();
    let outcome = integrate_observed(&p, &t, &u0, tau, cfg.final_time, cfg.monitor, |rec| {
        let e = *rec.energies.last().expect("stage energies");
        if e.is_finite() && rec.solution().iter().all(|x| x.is_finite()) {
            energies.push(e);
            last = rec.solution().to_vec();
            if let Some(m) = &rec.margins {
                margins.push(m.clone());
            }
        }
    });
    let (run, diverged_at) = match outcome {
        Ok(run) => (run, None),
        Err(CoreError::Diverged { step }) => {
            let mut violations = Vec::new();
            let mut min_rel: Option<f64> = None;
            for (n, m) in margins.iter().enumerate() {
                let scale = energies[n].abs().max(f64::MIN_POSITIVE);
                for (j, x) in m.iter().enumerate() {
                    let rel = x / scale;
                    min_rel = Some(min_rel.map_or(rel, |v| v.min(rel)));
                    if rel < -MARGIN_TOL {
                        violations.push(eerk_core::integrator::MarginViolation {
                            step: n + 1,
                            stage: j + 1,
                            relative_margin: rel,
                        });
                    }
                }
            }
            let run = RunReport {
                tau,
                steps: energies.len() - 1,
                energies,
                final_state: last,
                margins,
                violations,
                min_relative_margin: min_rel,
                wall_time: start.elapsed(),
            };
            (run, Some(step))
        }
        Err(e) => return Err(e.into()),
    };
    let increases = run.energy_increases(ENERGY_TOL);
    Ok(EnergyRun { method, kappa, nodes, run, increases, diverged_at })
}

/// Energy series for every (method, kappa, tau) cell; divergence is recorded, not raised.
pub fn run_energy(cfg: &ExperimentConfig) -> Result<EnergyReport> {
    let methods = cfg.require_methods()?;
    let op = operator(cfg)?;
    if cfg.final_time > 0.0 {
        for &tau in &cfg.taus {
            step_count(tau, cfg.final_time)?;
        }
    }
    let cells: Vec<(MethodId, f64, f64)> = methods
        .iter()
        .flat_map(|&m| cfg.kappas.iter().flat_map(move |&k| cfg.taus.iter().map(move |&t| (m, k, t))))
        .collect();
    let runs = cells
        .par_iter()
        .map(|&(m, k, t)| energy_cell(cfg, &op, m, k, t))
        .collect::<Result<_>>()?;
    Ok(EnergyReport { runs })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub method: MethodId,
    pub classification: Classification,
    pub samples: Vec<DissipationSample>,
}

/// Grid classification plus the minor curves for each method.
pub fn run_analysis(cfg: &ExperimentConfig) -> Result<Vec<Analysis>> {
    let methods = cfg.require_methods()?;
    let grid = cfg.grid.build();
    methods
        .par_iter()
        .map(|&method| {
            let t = get_method(method)?;
            let classification = classify_method(&t, &grid, PSD_TOL)?;
            let samples = grid
                .points()
                .iter()
                .map(|&z| DissipationSample::new(&t, z, Variant::Standard))
                .collect::<std::result::Result<_, _>>()?;
            Ok(Analysis { method, classification, samples })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateCurve {
    pub method: MethodId,
    pub variant: Variant,
    pub z: Vec<f64>,
    pub rate: Vec<f64>,
}

/// Average dissipation rate along the grid for each method and requested variant.
pub fn run_rate(cfg: &ExperimentConfig) -> Result<Vec<RateCurve>> {
    let methods = cfg.require_methods()?;
    let grid = cfg.grid.build();
    let cells: Vec<(MethodId, Variant)> = methods
        .iter()
        .flat_map(|&m| cfg.variant.variants().iter().map(move |&v| (m, v)))
        .collect();
    cells
        .par_iter()
        .map(|&(method, variant)| {
            let t = get_method(method)?;
            let rate = grid
                .points()
                .iter()
                .map(|&z| eerk_core::dissipation::average_dissipation_rate(&t, z, variant))
                .collect::<std::result::Result<_, _>>()?;
            Ok(RateCurve { method, variant, z: grid.points().to_vec(), rate })
        })
        .collect()
}

/// A single (method, kappa, tau) cell of [`run_energy`].
pub fn single_energy_run(cfg: &ExperimentConfig, method: MethodId, kappa: f64, tau: f64) -> Result<EnergyRun> {
    energy_cell(cfg, &operator(cfg)?, method, kappa, tau)
}
