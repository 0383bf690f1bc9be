//! Warm-started fits over a geometric penalty grid.

use tensor_hotspot::basis::default_basis_set;
use tensor_hotspot::model::ProblemData;
use tensor_hotspot::rng::stream;
use tensor_hotspot::simgen::{generate_counts, PhiTable, ScenarioConfig};
use tensor_hotspot::solver::{fit_path, geometric_grid, lambda_max, SolverConfig};

fn main() -> tensor_hotspot::Result<()> {
    let cfg = ScenarioConfig { dims: [12, 4, 20], tau: 12, count_scale: 1.0, delta: 0.6, ..Default::default() };
    let sc = generate_counts(&cfg, &PhiTable::bundled(), &mut stream(5, "scenario", 0))?;
    let data = ProblemData::new(sc.counts, sc.exposure, default_basis_set(cfg.dims)?)?;
    let solver = SolverConfig::default();

    let grid = geometric_grid(lambda_max(&data, &solver)?, 8, 1e-2)?;
    let path = fit_path(&data, &grid, &solver)?;
    println!("{:>3} {:>12} {:>16} {:>9} {:>6}", "k", "lambda", "objective", "nonzeros", "outer");
    for (k, f) in path.fits.iter().enumerate() {
        let f = f.as_ref().map_err(|e| e.clone())?;
        println!(
            "{:>3} {:>12.4} {:>16.4} {:>9} {:>6}",
            k + 1,
            f.lambda,
            f.objective_value,
            f.hotspot_nonzeros(),
            f.outer_iterations
        );
    }
    Ok(())
}
