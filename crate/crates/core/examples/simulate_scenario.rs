//! Generate a scenario with logistic population curves and planted
//! hot-spots, then write it in the CSV layouts the command line reads.

use tensor_hotspot::io::{counts_csv, population_csv, read_counts, truth_csv};
use tensor_hotspot::rng::stream;
use tensor_hotspot::simgen::{average_hotspot_kl, generate_counts, PhiTable, PopulationTrend, ScenarioConfig};

fn main() -> tensor_hotspot::Result<()> {
    let table = PhiTable::bundled();
    for trend in [PopulationTrend::Increasing, PopulationTrend::Decreasing] {
        let cfg = ScenarioConfig { population_trend: trend, ..Default::default() };
        let sc = generate_counts(&cfg, &table, &mut stream(1, "scenario", 0))?;
        let first = sc.population.get(0, 0, 0);
        let last = sc.population.get(0, 0, cfg.dims[2] - 1);
        println!(
            "{trend:?}: {} hot-spots, {} population {first:.2} -> {last:.2} (10,000s), average KL {:.4}",
            sc.truth.len(),
            table.locations[0],
            average_hotspot_kl(&sc)
        );
    }

    let cfg = ScenarioConfig { dims: [3, 2, 4], tau: 2, hotspot_fraction: 0.34, ..Default::default() };
    let sc = generate_counts(&cfg, &table, &mut stream(2, "scenario", 0))?;
    let counts = counts_csv(&sc.counts)?;
    print!("{}", String::from_utf8_lossy(&counts));
    print!("{}", String::from_utf8_lossy(&population_csv(&sc.exposure)?));
    let truth: Vec<_> = sc.truth.iter().copied().collect();
    print!("{}", String::from_utf8_lossy(&truth_csv(&truth, sc.counts.labels().unwrap())?));
    let back = read_counts(counts.as_slice())?;
    println!("round trip exact: {}", back.counts.as_slice() == sc.counts.as_slice());
    Ok(())
}
