//! End-to-end detection: penalty grid, fits, phase-I moments, control-limit
//! calibration, the CUSUM run and localization at the alarm.

use serde::{Deserialize, Serialize};

use crate::basis::BasisConfig;
use crate::error::{invalid, Result};
use crate::localize::{hotspot_slice, localize, HotspotReport, ThresholdRule};
use crate::model::ProblemData;
use crate::monitor::{
    calibrate_limit, estimate_h0_moments, p_plus_table, p_tilde, run_chart, truncate_periods, BootstrapStream,
    Calibration, CalibrationOptions, ChartRun, CusumChart, ExpandingWindow, FitProcedure, GridConfig, H0Moments,
    Retrospective, StandardNormalStream,
};
use crate::rng::child_seed;
use crate::solver::{fit_path_from, geometric_grid, lambda_max_with_fit, FitPath, SolverConfig};
use crate::tensor::{Matrix, Tensor3};

/// In-control distribution used to calibrate the control limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// `P̃ ~ N(0, 1)`.
    Normal,
    /// Resample the phase-I `P̃` values.
    Bootstrap,
}

impl std::str::FromStr for GeneratorKind {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "bootstrap" => Ok(Self::Bootstrap),
            _ => invalid(format!("generator must be normal or bootstrap, got {s:?}")),
        }
    }
}

/// How fits are produced while monitoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureKind {
    Retrospective,
    ExpandingWindow,
}

/// Every knob of the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// Number of leading in-control periods.
    pub phase1: usize,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub basis: BasisConfig,
    pub d_star: f64,
    pub pearson: bool,
    pub target_arl0: f64,
    pub generator: GeneratorKind,
    pub calibration: CalibrationOptions,
    pub threshold: ThresholdRule,
    pub procedure: ProcedureKind,
    /// Fixed control limit; skips calibration when set.
    pub limit: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            phase1: 15,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            basis: BasisConfig::default(),
            d_star: 0.5,
            pearson: false,
            target_arl0: 50.0,
            generator: GeneratorKind::Normal,
            calibration: CalibrationOptions::default(),
            threshold: ThresholdRule::default(),
            procedure: ProcedureKind::Retrospective,
            limit: None,
        }
    }
}

/// Everything produced by one detection run.
#[derive(Debug, Clone)]
pub struct Detection {
    pub grid: Vec<f64>,
    pub moments: H0Moments,
    /// `P̃` over the phase-I periods.
    pub phase1_p_tilde: Vec<f64>,
    pub calibration: Calibration,
    pub run: ChartRun,
    pub report: Option<HotspotReport>,
    /// Hot-spot slice `Ĥ` at the alarm period and its selected penalty.
    pub alarm_slice: Option<Matrix>,
    /// Background mean counts of the fit at the alarm's penalty (or at the
    /// last monitored period's penalty when there is no alarm).
    pub background: Option<Tensor3>,
    /// Fit path of the retrospective procedure.
    pub path: Option<FitPath>,
}

impl Detection {
    /// Alarm as a 1-based period number.
    pub fn alarm_period(&self) -> Option<usize> {
        self.run.alarm.map(|t| t + 1)
    }
}

/// Calibrate the control limit for a chart with the given settings.
pub fn calibrate(config: &DetectorConfig, phase1_p_tilde: &[f64], seed: u64) -> Result<Calibration> {
    if let Some(l) = config.limit {
        return Ok(Calibration {
            limit: l,
            arl0: f64::NAN,
            target_arl0: config.target_arl0,
            d_star: config.d_star,
            reps: 0,
            seed,
        });
    }
    let opts = CalibrationOptions { seed, ..config.calibration.clone() };
    match config.generator {
        GeneratorKind::Normal => calibrate_limit(&StandardNormalStream, config.d_star, config.target_arl0, &opts),
        GeneratorKind::Bootstrap => {
            if phase1_p_tilde.is_empty() {
                return invalid("bootstrap calibration needs phase-I values");
            }
            calibrate_limit(&BootstrapStream(phase1_p_tilde.to_vec()), config.d_star, config.target_arl0, &opts)
        }
    }
}

/// Penalty grid, phase-I moments and phase-I `P̃` series for `data`.
#[derive(Debug, Clone)]
pub struct PhaseOne {
    pub grid: Vec<f64>,
    pub moments: H0Moments,
    pub phase1_p_tilde: Vec<f64>,
}

/// Everything computed before the chart runs.
struct Prepared {
    grid: Vec<f64>,
    moments: H0Moments,
    phase1_p_tilde: Vec<f64>,
    procedure: Box<dyn FitProcedure>,
    path: Option<FitPath>,
}

fn check_phase1(data: &ProblemData, config: &DetectorConfig) -> Result<()> {
    let n3 = data.dims()[2];
    if config.phase1 < crate::monitor::MIN_PHASE1 || config.phase1 >= n3 {
        return invalid(format!("phase-I length {} must be in [{}, {n3})", config.phase1, crate::monitor::MIN_PHASE1));
    }
    Ok(())
}

fn prepare(data: &ProblemData, config: &DetectorConfig) -> Result<Prepared> {
    check_phase1(data, config)?;
    let (grid, moments, phase1_p_tilde, procedure, path): (_, _, _, Box<dyn FitProcedure>, _) = match config.procedure {
        ProcedureKind::Retrospective => {
            let (lmax, bg) = lambda_max_with_fit(data, &config.solver)?;
            let grid = geometric_grid(lmax.max(f64::MIN_POSITIVE), config.grid.n_lambda, config.grid.min_ratio)?;
            let path = fit_path_from(data, &grid, &config.solver, Some(&bg))?;
            let table = p_plus_table(&path, data, config.pearson);
            let phase1: Vec<Vec<Option<f64>>> = table.iter().map(|r| r[..config.phase1].to_vec()).collect();
            let moments = estimate_h0_moments(&phase1)?;
            let pt = phase1_series(&table, &moments, config.phase1);
            let proc_ = Retrospective::from_path(data, path.clone());
            (grid, moments, pt, Box::new(proc_), Some(path))
        }
        ProcedureKind::ExpandingWindow => {
            let sub = truncate_periods(data, config.phase1, &config.basis)?;
            let (lmax, bg) = lambda_max_with_fit(&sub, &config.solver)?;
            let grid = geometric_grid(lmax.max(f64::MIN_POSITIVE), config.grid.n_lambda, config.grid.min_ratio)?;
            let path = fit_path_from(&sub, &grid, &config.solver, Some(&bg))?;
            let table = p_plus_table(&path, &sub, config.pearson);
            let moments = estimate_h0_moments(&table)?;
            let pt = phase1_series(&table, &moments, config.phase1);
            let proc_ = ExpandingWindow { grid: grid.clone(), solver: config.solver.clone(), basis: config.basis.clone() };
            (grid, moments, pt, Box::new(proc_), None)
        }
    };
    Ok(Prepared { grid, moments, phase1_p_tilde, procedure, path })
}

/// Phase-I quantities only, as needed to calibrate a bootstrap limit.
pub fn phase_one(data: &ProblemData, config: &DetectorConfig) -> Result<PhaseOne> {
    let p = prepare(data, config)?;
    Ok(PhaseOne { grid: p.grid, moments: p.moments, phase1_p_tilde: p.phase1_p_tilde })
}

/// Run the full detector on `data`.
pub fn detect(data: &ProblemData, config: &DetectorConfig, seed: u64) -> Result<Detection> {
    let n3 = data.dims()[2];
    let Prepared { grid, moments, phase1_p_tilde, procedure, path } = prepare(data, config)?;
    let calibration = calibrate(config, &phase1_p_tilde, child_seed(seed, "calibration", 0))?;
    let mut chart = CusumChart::new(grid.clone(), moments.clone(), config.d_star, calibration.limit)?;
    let run = run_chart(data, procedure.as_ref(), &mut chart, config.phase1..n3, config.pearson)?;

    let mut report = None;
    let mut alarm_slice = None;
    let mut background = None;
    if let Some(pf) = &run.alarm_fit {
        let k = run.history.last().and_then(|r| r.lambda_index);
        if let Some(fit) = k.and_then(|k| pf.path.fit(k)) {
            report = Some(localize(fit, pf.period, config.threshold, data.y().labels())?);
            alarm_slice = Some(hotspot_slice(fit, pf.period)?);
            background = Some(fit.background_mean(&pf.data)).filter(|b| b.dims() == data.dims());
        }
    } else if let Some(p) = &path {
        let k = run.history.iter().rev().find_map(|r| r.lambda_index);
        let fit = match k {
            Some(k) => p.fit(k),
            None => p.fits.iter().rev().find_map(|f| f.as_ref().ok()),
        };
        background = fit.map(|f| f.background_mean(data));
    }
    Ok(Detection { grid, moments, phase1_p_tilde, calibration, run, report, alarm_slice, background, path })
}

fn phase1_series(table: &[Vec<Option<f64>>], moments: &H0Moments, phase1: usize) -> Vec<f64> {
    (0..phase1)
        .filter_map(|t| {
            let col: Vec<Option<f64>> = table.iter().map(|r| r[t]).collect();
            p_tilde(&col, moments).ok().map(|(v, _)| v)
        })
        .collect()
}
