//! Replicated evaluation with a custom detector next to the built-in one.

use std::collections::BTreeSet;

use tensor_hotspot::evalkit::{run_experiment, Detector, DetectorOutput, ExperimentConfig, HotspotDetector};
use tensor_hotspot::simgen::{Scenario, ScenarioConfig};

/// Flags the cells with the highest crude rate in the first shifted period.
struct TopRate {
    cells: usize,
}

impl Detector for TopRate {
    fn name(&self) -> &str {
        "top-crude-rate"
    }

    fn run(&self, s: &Scenario, _seed: u64) -> tensor_hotspot::Result<DetectorOutput> {
        let [n1, n2, n3] = s.counts.dims();
        let t = s.config.tau.min(n3 - 1);
        let mut rates: Vec<(f64, (usize, usize))> = (0..n1)
            .flat_map(|i| (0..n2).map(move |j| (i, j)))
            .map(|(i, j)| (s.counts.get(i, j, t) / s.exposure.get(i, j, t), (i, j)))
            .collect();
        rates.sort_by(|a, b| b.0.total_cmp(&a.0));
        let detected: BTreeSet<_> = rates.iter().take(self.cells).map(|r| r.1).collect();
        Ok(DetectorOutput { alarm_period: Some(t + 1), detected, ..Default::default() })
    }
}

fn main() {
    let cfg = ExperimentConfig {
        scenario: ScenarioConfig { dims: [20, 5, 26], ..Default::default() },
        replications: 4,
        seed: 2024,
    };
    let (table, _) = run_experiment(&cfg, &HotspotDetector::default());
    print!("{table}");
    let (table, _) = run_experiment(&cfg, &TopRate { cells: 10 });
    print!("{table}");
}
