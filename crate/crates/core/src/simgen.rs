//! Synthetic surveillance data: logistic population curves, planted sparse
//! hot-spots and Poisson counts.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::{AxisLabels, Tensor3};

const BUNDLED_PHI: &str = include_str!("../data/phi_table.csv");

/// Floor applied to every generated population value.
pub const POPULATION_FLOOR: f64 = 0.01;

/// Background Poisson rate.
pub const BASE_RATE: f64 = 0.2;

/// Logistic growth parameters per location: asymptote (in 10,000s),
/// midpoint period and time scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTable {
    pub locations: Vec<String>,
    pub phi: Vec<[f64; 3]>,
}

impl PhiTable {
    /// The 49-location table shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_PHI.as_bytes()).expect("bundled table is valid")
    }

    /// Parse `location,phi1,phi2,phi3` rows with a header.
    pub fn from_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut locations = Vec::new();
        let mut phi = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return invalid(format!("phi row has {} fields, expected 4", rec.len()));
            }
            let mut v = [0.0f64; 3];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = rec[k + 1]
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("phi value {:?}: {e}", &rec[k + 1])))?;
            }
            if !(v[0] > 0.0) || v.iter().any(|x| !x.is_finite()) {
                return invalid(format!("bad phi row for {}", &rec[0]));
            }
            locations.push(rec[0].trim().to_string());
            phi.push(v);
        }
        if phi.is_empty() {
            return invalid("empty phi table");
        }
        Ok(Self { locations, phi })
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Increasing logistic curve `φ1 / (1 + exp(-(t - φ2)/φ3)) + eps`, floored.
pub fn logistic_population(phi: [f64; 3], t: f64, eps: f64) -> f64 {
    (phi[0] / (1.0 + (-(t - phi[1]) / phi[2]).exp()) + eps).max(POPULATION_FLOOR)
}

/// Decreasing curve `(φ1/a) / (1 + exp((t - φ2)/φ3)) + 1 + eps`, floored.
pub fn decreasing_population(phi: [f64; 3], a: f64, t: f64, eps: f64) -> f64 {
    ((phi[0] / a) / (1.0 + ((t - phi[1]) / phi[2]).exp()) + 1.0 + eps).max(POPULATION_FLOOR)
}

/// The `a > 0` making the noise-free decreasing curve equal the increasing
/// curve at `t = 1`.
pub fn solve_a(phi: [f64; 3]) -> Result<f64> {
    let start = phi[0] / (1.0 + (-(1.0 - phi[1]) / phi[2]).exp());
    if start <= 1.0 {
        return invalid(format!(
            "starting population {start} leaves no room above the decreasing curve's floor of 1"
        ));
    }
    Ok(phi[0] / ((start - 1.0) * (1.0 + ((1.0 - phi[1]) / phi[2]).exp())))
}

/// Direction of the population trend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopulationTrend {
    Increasing,
    Decreasing,
}

impl std::str::FromStr for PopulationTrend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "increasing" => Ok(Self::Increasing),
            "decreasing" => Ok(Self::Decreasing),
            _ => invalid(format!("trend must be increasing or decreasing, got {s:?}")),
        }
    }
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub dims: [usize; 3],
    pub delta: f64,
    /// Number of in-control periods; the shift starts at period index `tau`.
    pub tau: usize,
    pub hotspot_fraction: f64,
    pub population_trend: PopulationTrend,
    /// Standard deviation of the population noise, in 10,000s.
    pub noise_sd: f64,
    /// Persons per population unit; Poisson means are `pop * rate * count_scale`.
    pub count_scale: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dims: [49, 10, 26],
            delta: 0.2,
            tau: 15,
            hotspot_fraction: 0.10,
            population_trend: PopulationTrend::Decreasing,
            noise_sd: 0.5,
            count_scale: 10_000.0,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return invalid(format!("dims must be positive, got {:?}", self.dims));
        }
        if !(self.hotspot_fraction > 0.0 && self.hotspot_fraction < 1.0) {
            return invalid(format!("hotspot_fraction must be in (0, 1), got {}", self.hotspot_fraction));
        }
        if self.tau < 1 || self.tau >= self.dims[2] {
            return invalid(format!("tau must be in [1, {}), got {}", self.dims[2], self.tau));
        }
        if !(self.delta >= 0.0) || !(self.noise_sd >= 0.0) || !(self.count_scale > 0.0) {
            return invalid("delta and noise_sd must be nonnegative, count_scale positive");
        }
        Ok(())
    }
}

/// `floor(fraction * n1 * n2)` distinct `(location, category)` cells.
pub fn generate_hotspot_set<R: Rng + ?Sized>(
    dims: [usize; 3],
    fraction: f64,
    rng: &mut R,
) -> Result<BTreeSet<(usize, usize)>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return invalid(format!("fraction must be in (0, 1), got {fraction}"));
    }
    let cells = dims[0] * dims[1];
    let count = (fraction * cells as f64).floor() as usize;
    Ok(sample(rng, cells, count)
        .into_iter()
        .map(|c| (c / dims[1], c % dims[1]))
        .collect())
}

/// A generated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub counts: Tensor3,
    /// Exposure in persons (`population * count_scale`).
    pub exposure: Tensor3,
    /// Population in 10,000s, before scaling.
    pub population: Tensor3,
    pub truth: BTreeSet<(usize, usize)>,
    pub config: ScenarioConfig,
}

impl Scenario {
    /// True background mean counts `exposure * 0.2`.
    pub fn true_background(&self) -> Tensor3 {
        self.exposure.map(|n| n * BASE_RATE)
    }

    /// True rate of cell `(i, j)` at period `k`.
    pub fn true_rate(&self, i: usize, j: usize, k: usize) -> f64 {
        if k >= self.config.tau && self.truth.contains(&(i, j)) {
            BASE_RATE + self.config.delta
        } else {
            BASE_RATE
        }
    }
}

/// Draw populations, the hot-spot set and Poisson counts. Populations follow
/// the location's curve, shared by every category; noise is drawn per
/// `(location, period)`. Draw order: hot-spot set, noise, counts.
pub fn generate_counts<R: Rng + ?Sized>(config: &ScenarioConfig, table: &PhiTable, rng: &mut R) -> Result<Scenario> {
    config.validate()?;
    let [n1, n2, n3] = config.dims;
    if table.len() < n1 {
        return invalid(format!("phi table has {} locations, scenario needs {n1}", table.len()));
    }
    let truth = generate_hotspot_set(config.dims, config.hotspot_fraction, rng)?;
    let a: Vec<f64> = match config.population_trend {
        PopulationTrend::Increasing => vec![1.0; n1],
        PopulationTrend::Decreasing => table.phi[..n1].iter().map(|&p| solve_a(p)).collect::<Result<_>>()?,
    };
    let normal = Normal::new(0.0, config.noise_sd).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut base = vec![0.0; n1 * n3];
    for i in 0..n1 {
        for k in 0..n3 {
            let eps = if config.noise_sd > 0.0 { normal.sample(rng) } else { 0.0 };
            let t = (k + 1) as f64;
            base[i * n3 + k] = match config.population_trend {
                PopulationTrend::Increasing => logistic_population(table.phi[i], t, eps),
                PopulationTrend::Decreasing => decreasing_population(table.phi[i], a[i], t, eps),
            };
        }
    }
    let population = Tensor3::from_fn(config.dims, |i, _, k| base[i * n3 + k]);
    let exposure = population.map(|v| v * config.count_scale);
    let mut counts = Vec::with_capacity(n1 * n2 * n3);
    for i in 0..n1 {
        for j in 0..n2 {
            let hot = truth.contains(&(i, j));
            for k in 0..n3 {
                let rate = if hot && k >= config.tau { BASE_RATE + config.delta } else { BASE_RATE };
                let mean = exposure.get(i, j, k) * rate;
                let y: f64 = Poisson::new(mean).map_err(|e| Error::Invalid(e.to_string()))?.sample(rng);
                counts.push(y);
            }
        }
    }
    let labels = AxisLabels {
        locations: table.locations[..n1].to_vec(),
        categories: (1..=n2).map(|j| format!("category_{j}")).collect(),
        periods: (1..=n3).map(|k| k.to_string()).collect(),
    };
    let counts = Tensor3::new(config.dims, counts)?.with_labels(labels.clone())?;
    let exposure = exposure.with_labels(labels)?;
    Ok(Scenario { counts, exposure, population, truth, config: config.clone() })
}

/// `KL(Poisson(λ1) ‖ Poisson(λ0)) = λ0 - λ1 + λ1 log(λ1/λ0)`.
pub fn kl_poisson(lambda1: f64, lambda0: f64) -> Result<f64> {
    if !(lambda1 > 0.0 && lambda0 > 0.0) {
        return invalid(format!("Poisson rates must be positive, got {lambda1}, {lambda0}"));
    }
    Ok(lambda0 - lambda1 + lambda1 * (lambda1 / lambda0).ln())
}

/// Mean KL divergence between shifted and in-control counts over the
/// hot-spot cells after the change, with means taken on the population scale
/// (`population * rate`, population in 10,000s).
pub fn average_hotspot_kl(s: &Scenario) -> f64 {
    let [_, _, n3] = s.config.dims;
    let mut sum = 0.0;
    let mut count = 0usize;
    for &(i, j) in &s.truth {
        for k in s.config.tau..n3 {
            let n = s.population.get(i, j, k);
            sum += kl_poisson(n * (BASE_RATE + s.config.delta), n * BASE_RATE).unwrap_or(0.0);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn bundled_table() {
        let t = PhiTable::bundled();
        assert_eq!(t.len(), 49);
        assert_eq!(t.locations[0], "Alabama");
        assert_eq!(t.phi[0], [80.6404, -4.0135, 66.0162]);
        assert_eq!(t.locations[48], "Wyoming");
    }

    #[test]
    fn logistic_cases() {
        let phi = [10.0, 5.0, 2.0];
        assert!((logistic_population(phi, 5.0, 0.0) - 5.0).abs() < 1e-12);
        assert!((logistic_population(phi, 1e6, 0.0) - 10.0).abs() < 1e-9);
        let al = [80.6404, -4.0135, 66.0162];
        assert!((logistic_population(al, 1.0, 0.0) - 41.85).abs() < 0.005);
        assert_eq!(logistic_population(phi, 5.0, -100.0), POPULATION_FLOOR);
    }

    #[test]
    fn decreasing_cases() {
        let al = [80.6404, -4.0135, 66.0162];
        let a = solve_a(al).unwrap();
        let d1 = decreasing_population(al, a, 1.0, 0.0);
        assert!((d1 - logistic_population(al, 1.0, 0.0)).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for t in 1..60 {
            let v = decreasing_population(al, a, t as f64, 0.0);
            assert!(v <= prev);
            prev = v;
        }
        assert!((decreasing_population(al, a, 1e6, 0.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_a() {
        let phi = [10.0, 1.0, 3.0];
        assert!((solve_a(phi).unwrap() - 10.0 / 8.0).abs() < 1e-12);
        assert!(solve_a([2.0, 1.0, 3.0]).is_err());
    }

    #[test]
    fn hotspot_count() {
        let mut r = stream(1, "t", 0);
        let s = generate_hotspot_set([49, 10, 26], 0.1, &mut r).unwrap();
        assert_eq!(s.len(), 49);
        assert_eq!(generate_hotspot_set([2, 2, 2], 0.1, &mut r).unwrap().len(), 0);
        let a = generate_hotspot_set([49, 10, 26], 0.1, &mut stream(5, "t", 0)).unwrap();
        let b = generate_hotspot_set([49, 10, 26], 0.1, &mut stream(5, "t", 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kl_cases() {
        assert_eq!(kl_poisson(1.5, 1.5).unwrap(), 0.0);
        assert!((kl_poisson(2.0, 1.0).unwrap() - 0.3863).abs() < 1e-4);
        assert!(kl_poisson(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_delta_is_flat() {
        let cfg = ScenarioConfig { dims: [6, 3, 8], tau: 4, delta: 0.0, hotspot_fraction: 0.3, ..Default::default() };
        let s = generate_counts(&cfg, &PhiTable::bundled(), &mut stream(1, "sim", 0)).unwrap();
        for i in 0..6 {
            for j in 0..3 {
                for k in 0..8 {
                    assert_eq!(s.true_rate(i, j, k), BASE_RATE);
                }
            }
        }
    }
}
