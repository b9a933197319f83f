use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use eerk_core::catalog::MethodId;
use eerk_core::dissipation::{Variant, ZGrid};
use eerk_core::spatial::Metric;
use eerk_core::Scalar;

use crate::error::{BenchError, Result};

/// Initial data for the Cahn-Hilliard runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialData {
    /// `0.5 sin x`
    Sine,
    /// A `tanh` profile with three Gaussian bumps.
    Bumps,
}

impl InitialData {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            InitialData::Sine => 0.5 * x.sin(),
            InitialData::Bumps => {
                (2.0 * x.sin()).tanh() / 3.0 - (-23.5 * (x - PI / 2.0).powi(2)).exp()
                    + (-27.0 * (x - 4.2).powi(2)).exp()
                    + (-38.0 * (x - 5.4).powi(2)).exp()
            }
        }
    }
}

impl FromStr for InitialData {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sine" => Ok(InitialData::Sine),
            "bumps" => Ok(InitialData::Bumps),
            other => Err(BenchError::Config(format!("unknown initial data {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mesh {
    Spacing(f64),
    Points(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    Standard,
    LogLinear { min_abs: f64, max_abs: f64, n_log: usize, lin_extent: f64, n_lin: usize },
    Points(Vec<f64>),
}

impl GridSpec {
    pub fn build(&self) -> ZGrid {
        match self {
            GridSpec::Standard => ZGrid::standard(),
            GridSpec::LogLinear { min_abs, max_abs, n_log, lin_extent, n_lin } => {
                ZGrid::log_linear(*min_abs, *max_abs, *n_log, *lin_extent, *n_lin)
            }
            GridSpec::Points(p) => ZGrid::from_points(p.clone()),
        }
    }
}

impl FromStr for GridSpec {
    type Err = BenchError;

    /// `standard`, `log:min,max,n_log,extent,n_lin` or `points:z1,z2,..`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>> { args.split(',').map(parse_f64).collect() };
        match kind.trim() {
            "standard" if args.is_empty() => Ok(GridSpec::Standard),
            "log" => {
                let v = nums()?;
                if v.len() != 5 || v[2] < 2.0 || v[4] < 0.0 || !(v[0] > 0.0 && v[1] > v[0]) {
                    return Err(BenchError::Config(format!("bad log grid {s:?}")));
                }
                Ok(GridSpec::LogLinear {
                    min_abs: v[0],
                    max_abs: v[1],
                    n_log: v[2] as usize,
                    lin_extent: v[3],
                    n_lin: v[4] as usize,
                })
            }
            "points" => {
                let v = nums()?;
                if v.iter().any(|z| *z >= 0.0) {
                    return Err(BenchError::Config("grid points must be negative".into()));
                }
                Ok(GridSpec::Points(v))
            }
            _ => Err(BenchError::Config(format!("unknown grid {s:?}"))),
        }
    }
}

/// Which dissipation-matrix variants `rate` reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantSel {
    Standard,
    Implicit,
    Both,
}

impl VariantSel {
    pub fn variants(self) -> &'static [Variant] {
        match self {
            VariantSel::Standard => &[Variant::Standard],
            VariantSel::Implicit => &[Variant::Implicit],
            VariantSel::Both => &[Variant::Standard, Variant::Implicit],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<MethodId>,
    pub eps: f64,
    pub kappas: Vec<f64>,
    pub length: f64,
    pub mesh: Mesh,
    pub taus: Vec<f64>,
    pub final_time: f64,
    pub grid: GridSpec,
    pub out: PathBuf,
    pub monitor: bool,
    pub metric: Option<Metric>,
    pub initial: Option<InitialData>,
    pub reference: Option<MethodId>,
    pub reference_tau: Option<f64>,
    pub variant: VariantSel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: Vec::new(),
            eps: 0.2,
            kappas: vec![2.0],
            length: 2.0 * PI,
            mesh: Mesh::Spacing(PI / 320.0),
            taus: (0..4).map(|k| 0.01 / f64::from(1 << k)).collect(),
            final_time: 8.0,
            grid: GridSpec::Standard,
            out: PathBuf::from("out"),
            monitor: false,
            metric: None,
            initial: None,
            reference: None,
            reference_tau: None,
            variant: VariantSel::Standard,
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => parse_f64(a)? / parse_f64(b)?,
        None => match s.to_ascii_lowercase().as_str() {
            "pi" => PI,
            "2pi" => 2.0 * PI,
            _ => s.parse().map_err(|_| BenchError::Config(format!("not a number: {s:?}")))?,
        },
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(BenchError::Config(format!("not a finite number: {s:?}")))
    }
}

fn parse_positive(key: &str, s: &str) -> Result<f64> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(BenchError::Config(format!("{key} must be positive, got {s:?}")))
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split([',', ';', ' ', '\t'])
        .filter(|x| !x.trim().is_empty())
        .map(item)
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(BenchError::Config("empty list".into()));
    }
    Ok(v)
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(BenchError::Config(format!("not a boolean: {other:?}"))),
    }
}

/// Splits a method list on `;` and whitespace; commas belong to parameters.
pub fn parse_methods(s: &str) -> Result<Vec<MethodId>> {
    let v: Vec<MethodId> = s
        .split([';', ' ', '\t'])
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.parse::<MethodId>().map_err(|e| BenchError::Config(e.to_string())))
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(BenchError::Config("no methods given".into()));
    }
    Ok(v)
}

impl ExperimentConfig {
    /// Reads `key = value` lines; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| BenchError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.to_ascii_lowercase().as_str() {
            "method" | "methods" => self.methods = parse_methods(value)?,
            "eps" => self.eps = parse_positive(key, value)?,
            "kappa" => {
                self.kappas = parse_list(value, parse_f64)?;
                if self.kappas.iter().any(|k| *k < 0.0) {
                    return Err(BenchError::Config("kappa must be nonnegative".into()));
                }
            }
            "length" => self.length = parse_positive(key, value)?,
            "h" => self.mesh = Mesh::Spacing(parse_positive(key, value)?),
            "m" => {
                let m: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| BenchError::Config(format!("m must be a positive integer, got {value:?}")))?;
                if m == 0 {
                    return Err(BenchError::Config("m must be positive".into()));
                }
                self.mesh = Mesh::Points(m);
            }
            "tau" => self.taus = parse_list(value, |s| parse_positive("tau", s))?,
            "halvings" => {
                let n: u32 = value
                    .trim()
                    .parse()
                    .map_err(|_| BenchError::Config(format!("halvings must be an integer, got {value:?}")))?;
                if n == 0 || n > 30 {
                    return Err(BenchError::Config("halvings must lie in 1..=30".into()));
                }
                let base = self.taus[0];
                self.taus = (0..n).map(|k| base / f64::from(1u32 << k)).collect();
            }
            "t" | "final_time" => {
                let t = parse_f64(value)?;
                if t < 0.0 {
                    return Err(BenchError::Config("final time must be nonnegative".into()));
                }
                self.final_time = t;
            }
            "grid" => self.grid = value.parse()?,
            "out" => self.out = PathBuf::from(value),
            "monitor" => self.monitor = parse_bool(value)?,
            "metric" => {
                self.metric = Some(match value.to_ascii_lowercase().as_str() {
                    "l2" => Metric::L2,
                    "h-1" | "hminus1" | "h^-1" => Metric::Hminus1,
                    other => return Err(BenchError::Config(format!("unknown metric {other:?}"))),
                })
            }
            "initial" => self.initial = Some(value.parse()?),
            "reference" => {
                self.reference = Some(value.parse().map_err(|e: eerk_core::Error| BenchError::Config(e.to_string()))?)
            }
            "reference_tau" => self.reference_tau = Some(parse_positive(key, value)?),
            "variant" => {
                self.variant = match value.to_ascii_lowercase().as_str() {
                    "standard" => VariantSel::Standard,
                    "implicit" => VariantSel::Implicit,
                    "both" => VariantSel::Both,
                    other => return Err(BenchError::Config(format!("unknown variant {other:?}"))),
                }
            }
            other => return Err(BenchError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Interior node count implied by the mesh setting.
    pub fn interior_points(&self) -> Result<usize> {
        match self.mesh {
            Mesh::Points(m) => Ok(m),
            Mesh::Spacing(h) => {
                let cells = self.length / h;
                let n = cells.round();
                if (cells - n).abs() > 1e-9 * cells || n < 2.0 {
                    return Err(BenchError::Config(format!("spacing {h} does not divide length {}", self.length)));
                }
                Ok(n as usize - 1)
            }
        }
    }

    pub fn require_methods(&self) -> Result<&[MethodId]> {
        if self.methods.is_empty() {
            Err(BenchError::Config("no method given".into()))
        } else {
            Ok(&self.methods)
        }
    }

    pub fn single_kappa(&self) -> Result<f64> {
        match self.kappas.as_slice() {
            [k] => Ok(*k),
            _ => Err(BenchError::Config("this experiment takes a single kappa".into())),
        }
    }

    /// The reference integrator for convergence tables: the explicit choice,
    /// otherwise the least dissipative energy-stable member of the family.
    pub fn reference_method(&self, order: u32) -> MethodId {
        self.reference.unwrap_or(if order <= 2 {
            MethodId::Eerk2W { c2: Scalar::ratio(3, 11) }
        } else {
            MethodId::Eerk31 { c2: Scalar::ratio(4, 9) }
        })
    }
}
