//! Metrics and the replication runner.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::basis_set;
use crate::error::{dim_err, Result};
use crate::model::ProblemData;
use crate::monitor::ChartRecord;
use crate::pipeline::{detect, DetectorConfig};
use crate::rng::{child_seed, stream};
use crate::simgen::{generate_counts, PhiTable, Scenario, ScenarioConfig};
use crate::tensor::Tensor3;

pub type CellSet = BTreeSet<(usize, usize)>;

/// Precision, recall and their harmonic mean. Empty denominators give 0.
pub fn precision_recall_f(detected: &CellSet, truth: &CellSet) -> (f64, f64, f64) {
    let hit = detected.intersection(truth).count() as f64;
    let p = if detected.is_empty() { 0.0 } else { hit / detected.len() as f64 };
    let r = if truth.is_empty() { 0.0 } else { hit / truth.len() as f64 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// Detection delay for a 1-based alarm period: `alarm - tau`, or `n3 - tau`
/// when there was no alarm.
pub fn delay(alarm_period: Option<usize>, tau: usize, n3: usize) -> f64 {
    match alarm_period {
        Some(a) => a as f64 - tau as f64,
        None => (n3 - tau) as f64,
    }
}

/// Mean and sample standard deviation of the delays of 1-based alarm periods.
pub fn arl1(alarm_periods: &[Option<usize>], tau: usize, n3: usize) -> (f64, f64) {
    let d: Vec<f64> = alarm_periods.iter().map(|a| delay(*a, tau, n3)).collect();
    mean_sd(&d)
}

/// Root mean squared difference between fitted and true background means.
pub fn smse(fitted: &Tensor3, truth: &Tensor3) -> Result<f64> {
    if fitted.dims() != truth.dims() {
        return dim_err(format!("{:?} vs {:?}", fitted.dims(), truth.dims()));
    }
    let sq: Vec<f64> = fitted.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b) * (a - b)).collect();
    Ok((neumaier_sum(&sq) / sq.len() as f64).sqrt())
}

/// Compensated summation.
pub fn neumaier_sum(v: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in v {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = neumaier_sum(v) / v.len() as f64;
    if v.len() == 1 {
        return (m, 0.0);
    }
    let sq: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
    (m, (neumaier_sum(&sq) / (v.len() - 1) as f64).sqrt())
}

/// What a detector reports on one data set.
#[derive(Debug, Clone, Default)]
pub struct DetectorOutput {
    /// 1-based alarm period.
    pub alarm_period: Option<usize>,
    pub detected: CellSet,
    pub history: Vec<ChartRecord>,
    pub background: Option<Tensor3>,
}

/// Anything that can be scored on simulated scenarios.
pub trait Detector: Sync {
    fn name(&self) -> &str;
    fn run(&self, scenario: &Scenario, seed: u64) -> Result<DetectorOutput>;
}

/// The smooth-plus-sparse detector with a given configuration.
#[derive(Debug, Clone, Default)]
pub struct HotspotDetector {
    pub config: DetectorConfig,
}

impl Detector for HotspotDetector {
    fn name(&self) -> &str {
        "smooth-sparse-cusum"
    }

    fn run(&self, s: &Scenario, seed: u64) -> Result<DetectorOutput> {
        let basis = basis_set(s.counts.dims(), &self.config.basis)?;
        let data = ProblemData::new(s.counts.clone(), s.exposure.clone(), basis)?;
        let det = detect(&data, &self.config, seed)?;
        Ok(DetectorOutput {
            alarm_period: det.alarm_period(),
            detected: det.report.as_ref().map(|r| r.cell_set()).unwrap_or_default(),
            history: det.run.history,
            background: det.background,
        })
    }
}

/// Scored outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub replication: usize,
    pub alarm_period: Option<usize>,
    pub delay: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub smse: Option<f64>,
    pub detected: Vec<(usize, usize)>,
    pub truth: Vec<(usize, usize)>,
    pub history: Vec<ChartRecord>,
}

/// Scenario plus replication settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub replications: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { scenario: ScenarioConfig::default(), replications: 100, seed: 1 }
    }
}

/// Mean and standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    fn of(v: &[f64]) -> Self {
        let (mean, sd) = mean_sd(v);
        Self { mean, sd }
    }
}

/// Aggregated metrics over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub detector: String,
    pub replications: usize,
    pub failures: usize,
    pub precision: Summary,
    pub recall: Summary,
    pub f_measure: Summary,
    pub arl1: Summary,
    pub smse: Summary,
    pub alarm_rate: f64,
}

impl AggregateTable {
    pub const CSV_HEADER: &'static str = "detector,replications,failures,alarm_rate,precision_mean,precision_sd,recall_mean,recall_sd,f_mean,f_sd,arl1_mean,arl1_sd,smse_mean,smse_sd";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.detector,
            self.replications,
            self.failures,
            self.alarm_rate,
            self.precision.mean,
            self.precision.sd,
            self.recall.mean,
            self.recall.sd,
            self.f_measure.mean,
            self.f_measure.sd,
            self.arl1.mean,
            self.arl1.sd,
            self.smse.mean,
            self.smse.sd
        )
    }
}

impl fmt::Display for AggregateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} replications ({} failed), alarm rate {:.3}",
            self.detector, self.replications, self.failures, self.alarm_rate
        )?;
        for (name, s) in [
            ("precision", self.precision),
            ("recall", self.recall),
            ("F-measure", self.f_measure),
            ("ARL1", self.arl1),
            ("SMSE", self.smse),
        ] {
            writeln!(f, "  {name:<10} {:>12.4} ({:.4})", s.mean, s.sd)?;
        }
        Ok(())
    }
}

/// Generate, detect and score one replication.
pub fn run_replication<D: Detector + ?Sized>(
    config: &ExperimentConfig,
    table: &PhiTable,
    detector: &D,
    r: usize,
) -> Result<RunResult> {
    let mut rng = stream(config.seed, "scenario", r as u64);
    let scenario = generate_counts(&config.scenario, table, &mut rng)?;
    let out = detector.run(&scenario, child_seed(config.seed, "detector", r as u64))?;
    let (p, rc, f) = precision_recall_f(&out.detected, &scenario.truth);
    let smse = match &out.background {
        Some(b) => Some(smse(b, &scenario.true_background())?),
        None => None,
    };
    Ok(RunResult {
        replication: r,
        alarm_period: out.alarm_period,
        delay: delay(out.alarm_period, config.scenario.tau, config.scenario.dims[2]),
        precision: p,
        recall: rc,
        f_measure: f,
        smse,
        detected: out.detected.into_iter().collect(),
        truth: scenario.truth.into_iter().collect(),
        history: out.history,
    })
}

/// Fold replication results into a table; failed replications are counted
/// and excluded.
pub fn aggregate(detector: &str, results: &[Result<RunResult>]) -> AggregateTable {
    let ok: Vec<&RunResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let col = |f: &dyn Fn(&RunResult) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
    let smse: Vec<f64> = ok.iter().filter_map(|r| r.smse).collect();
    let alarms = ok.iter().filter(|r| r.alarm_period.is_some()).count();
    AggregateTable {
        detector: detector.to_string(),
        replications: ok.len(),
        failures: results.len() - ok.len(),
        precision: Summary::of(&col(&|r| r.precision)),
        recall: Summary::of(&col(&|r| r.recall)),
        f_measure: Summary::of(&col(&|r| r.f_measure)),
        arl1: Summary::of(&col(&|r| r.delay)),
        smse: Summary::of(&smse),
        alarm_rate: if ok.is_empty() { f64::NAN } else { alarms as f64 / ok.len() as f64 },
    }
}

/// Run every replication (in parallel) and aggregate in replication order.
pub fn run_experiment<D: Detector + ?Sized>(
    config: &ExperimentConfig,
    detector: &D,
) -> (AggregateTable, Vec<Result<RunResult>>) {
    let table = PhiTable::bundled();
    let results: Vec<Result<RunResult>> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, &table, detector, r))
        .collect();
    (aggregate(detector.name(), &results), results)
}
