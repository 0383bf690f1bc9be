//! Calibrate a CUSUM limit by Monte Carlo and run the chart on a short
//! stream with a late upward shift.

use rand::Rng;
use tensor_hotspot::monitor::{
    calibrate_limit, cusum_update, estimate_arl, CalibrationOptions, ConstantStream, StandardNormalStream,
};
use tensor_hotspot::rng::stream;

fn main() -> tensor_hotspot::Result<()> {
    let d_star = 0.5;
    let opts = CalibrationOptions { reps: 1000, seed: 11, ..Default::default() };
    let cal = calibrate_limit(&StandardNormalStream, d_star, 50.0, &opts)?;
    println!("limit {:.4} gives ARL0 {:.2} on the calibration sample", cal.limit, cal.arl0);

    let fresh = estimate_arl(&StandardNormalStream, d_star, cal.limit, 5000, 12345, 5000);
    println!("ARL0 on a fresh sample of 5000 runs: {fresh:.2}");

    // A shift of one standard deviation after period 30; alarms before the
    // shift are false alarms, expected about once per 50 periods.
    for run in 0..5 {
        let mut rng = stream(7, "demo", run);
        let mut w = 0.0;
        let alarm = (1..=200).find(|&t| {
            let x: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) + if t > 30 { 1.0 } else { 0.0 };
            w = cusum_update(w, x, d_star);
            w > cal.limit
        });
        println!("run {run}: first alarm at t = {alarm:?}");
    }

    // Any closure or constant can act as the in-control stream.
    let always_high = calibrate_limit(&ConstantStream(3.0), d_star, 1.0, &opts)?;
    println!("constant stream of 3, target ARL0 = 1: limit {:.3}", always_high.limit);
    let bimodal = |r: &mut tensor_hotspot::rng::StreamRng| if r.random::<bool>() { -1.0 } else { 1.0 };
    let cal = calibrate_limit(&bimodal, d_star, 50.0, &opts)?;
    println!("random-sign stream: limit {:.4}", cal.limit);
    Ok(())
}
