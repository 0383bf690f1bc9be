//! Flat `key = value` run configuration.
//!
//! One file feeds every command; each command reads the keys it needs and
//! ignores the rest, but unknown keys are always rejected. Values use TOML
//! syntax. Overrides given as `key=value` strings win over the file.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `seed` | command-level seed | 1 |
//! | `dims` | scenario shape `[n1, n2, n3]` | `[49, 10, 26]` |
//! | `delta` | hot-spot rate increase | 0.2 |
//! | `tau` | in-control periods before the shift | 15 |
//! | `hotspot_fraction` | share of (location, category) cells shifted | 0.1 |
//! | `population_trend` | `"increasing"` or `"decreasing"` | `"decreasing"` |
//! | `noise_sd` | population noise sd, in 10,000s | 0.5 |
//! | `count_scale` | persons per population unit | 10000 |
//! | `replications` | evaluate replications | 100 |
//! | `phase1` | phase-I periods | 15 |
//! | `n_lambda`, `lambda_min_ratio` | penalty grid | 10, 0.001 |
//! | `lambda` | single penalty for `fit` | unset |
//! | `max_outer`, `max_inner` | iteration caps | 50, 200 |
//! | `outer_tol`, `inner_tol` | relative stopping tolerances | 1e-6, 1e-8 |
//! | `ridge`, `step_halving_max`, `predictor_clamp` | safeguards | 1e-8, 20, 30 |
//! | `warm_start` | warm starts along the path | true |
//! | `spline_order` | B-spline order | 4 |
//! | `knots_location`, `knots_category`, `knots_period` | knot lists | shape default |
//! | `d_star` | CUSUM reference shift | 0.5 |
//! | `pearson` | Pearson-scaled residuals | false |
//! | `target_arl0` | in-control average run length | 50 |
//! | `generator` | `"normal"` or `"bootstrap"` | `"normal"` |
//! | `calibration_reps`, `calibration_tolerance` | Monte Carlo settings | 2000, 0.05 |
//! | `search_lo`, `search_hi`, `cap_factor` | limit search | 0, 50, 100 |
//! | `limit` | fixed control limit (skips calibration) | unset |
//! | `threshold` | `"order"`, `"order:r"`, `"hard:c"` or `"soft:c"` | `"order"` |
//! | `procedure` | `"retrospective"` or `"expanding_window"` | `"retrospective"` |
//! | `population_units` | `"persons"` or `"10k"` | `"persons"` |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::BasisConfig;
use crate::error::{Error, Result};
use crate::evalkit::ExperimentConfig;
use crate::io::PopulationUnits;
use crate::localize::ThresholdRule;
use crate::monitor::{CalibrationOptions, GridConfig};
use crate::pipeline::{DetectorConfig, GeneratorKind, ProcedureKind};
use crate::simgen::{PopulationTrend, ScenarioConfig};
use crate::solver::SolverConfig;

/// Every recognised key; unset keys take the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub seed: Option<u64>,
    pub dims: Option<[usize; 3]>,
    pub delta: Option<f64>,
    pub tau: Option<usize>,
    pub hotspot_fraction: Option<f64>,
    pub population_trend: Option<String>,
    pub noise_sd: Option<f64>,
    pub count_scale: Option<f64>,
    pub replications: Option<usize>,
    pub phase1: Option<usize>,
    pub n_lambda: Option<usize>,
    pub lambda_min_ratio: Option<f64>,
    pub lambda: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub outer_tol: Option<f64>,
    pub inner_tol: Option<f64>,
    pub ridge: Option<f64>,
    pub step_halving_max: Option<usize>,
    pub predictor_clamp: Option<f64>,
    pub warm_start: Option<bool>,
    pub spline_order: Option<usize>,
    pub knots_location: Option<Vec<f64>>,
    pub knots_category: Option<Vec<f64>>,
    pub knots_period: Option<Vec<f64>>,
    pub d_star: Option<f64>,
    pub pearson: Option<bool>,
    pub target_arl0: Option<f64>,
    pub generator: Option<String>,
    pub calibration_reps: Option<usize>,
    pub calibration_tolerance: Option<f64>,
    pub search_lo: Option<f64>,
    pub search_hi: Option<f64>,
    pub cap_factor: Option<f64>,
    pub limit: Option<f64>,
    pub threshold: Option<String>,
    pub procedure: Option<String>,
    pub population_units: Option<String>,
}

fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let (k, v) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not key=value")))?;
    let (k, v) = (k.trim(), v.trim());
    let value = match toml::from_str::<toml::Table>(&format!("v = {v}")) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(v.to_string())),
        Err(_) => toml::Value::String(v.to_string()),
    };
    Ok((k.to_string(), value))
}

impl Settings {
    /// Parse file contents and apply overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let (k, v) = parse_override(item)?;
            table.insert(k, v);
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Read `path` (if given) and apply overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    /// The settings as a config file.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let d = ScenarioConfig::default();
        let cfg = ScenarioConfig {
            dims: self.dims.unwrap_or(d.dims),
            delta: self.delta.unwrap_or(d.delta),
            tau: self.tau.unwrap_or(d.tau),
            hotspot_fraction: self.hotspot_fraction.unwrap_or(d.hotspot_fraction),
            population_trend: match &self.population_trend {
                Some(s) => s.parse::<PopulationTrend>()?,
                None => d.population_trend,
            },
            noise_sd: self.noise_sd.unwrap_or(d.noise_sd),
            count_scale: self.count_scale.unwrap_or(d.count_scale),
            seed: self.seed(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            scenario: self.scenario()?,
            replications: self.replications.unwrap_or(ExperimentConfig::default().replications),
            seed: self.seed(),
        })
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            max_outer: self.max_outer.unwrap_or(d.max_outer),
            max_inner: self.max_inner.unwrap_or(d.max_inner),
            outer_tol: self.outer_tol.unwrap_or(d.outer_tol),
            inner_tol: self.inner_tol.unwrap_or(d.inner_tol),
            ridge: self.ridge.unwrap_or(d.ridge),
            step_halving_max: self.step_halving_max.unwrap_or(d.step_halving_max),
            predictor_clamp: self.predictor_clamp.unwrap_or(d.predictor_clamp),
            warm_start: self.warm_start.unwrap_or(d.warm_start),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn basis(&self) -> BasisConfig {
        let d = BasisConfig::default();
        BasisConfig {
            order: self.spline_order.unwrap_or(d.order),
            knots: [
                self.knots_location.clone().unwrap_or_default(),
                self.knots_category.clone().unwrap_or_default(),
                self.knots_period.clone().unwrap_or_default(),
            ],
        }
    }

    pub fn population_units(&self) -> Result<PopulationUnits> {
        self.population_units.as_deref().map_or(Ok(PopulationUnits::default()), str::parse)
    }

    pub fn detector(&self) -> Result<DetectorConfig> {
        let d = DetectorConfig::default();
        let dc = CalibrationOptions::default();
        let dg = GridConfig::default();
        Ok(DetectorConfig {
            phase1: self.phase1.unwrap_or(d.phase1),
            grid: GridConfig {
                n_lambda: self.n_lambda.unwrap_or(dg.n_lambda),
                min_ratio: self.lambda_min_ratio.unwrap_or(dg.min_ratio),
            },
            solver: self.solver()?,
            basis: self.basis(),
            d_star: self.d_star.unwrap_or(d.d_star),
            pearson: self.pearson.unwrap_or(d.pearson),
            target_arl0: self.target_arl0.unwrap_or(d.target_arl0),
            generator: match &self.generator {
                Some(s) => s.parse::<GeneratorKind>()?,
                None => d.generator,
            },
            calibration: CalibrationOptions {
                reps: self.calibration_reps.unwrap_or(dc.reps),
                seed: dc.seed,
                search_range: (self.search_lo.unwrap_or(dc.search_range.0), self.search_hi.unwrap_or(dc.search_range.1)),
                cap_factor: self.cap_factor.unwrap_or(dc.cap_factor),
                tolerance: self.calibration_tolerance.unwrap_or(dc.tolerance),
            },
            threshold: match &self.threshold {
                Some(s) => s.parse::<ThresholdRule>()?,
                None => d.threshold,
            },
            procedure: match self.procedure.as_deref() {
                None => d.procedure,
                Some("retrospective") => ProcedureKind::Retrospective,
                Some("expanding_window") => ProcedureKind::ExpandingWindow,
                Some(s) => return Err(Error::Config(format!("unknown procedure {s:?}"))),
            },
            limit: self.limit,
        })
    }
}
