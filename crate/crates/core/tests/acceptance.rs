//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_REPS` overrides the replication count of the simulation
//! studies. With `ACCEPTANCE_STRICT` set, any failure makes the process exit
//! nonzero.

mod common;

use std::time::Instant;

use common::oracles::*;
use common::*;
use rand::Rng;
use tensor_hotspot::basis::bspline_basis;
use tensor_hotspot::evalkit::{run_experiment, AggregateTable, ExperimentConfig, HotspotDetector, RunResult};
use tensor_hotspot::model::*;
use tensor_hotspot::monitor::{calibrate_limit, estimate_arl, CalibrationOptions, StandardNormalStream};
use tensor_hotspot::solver::*;
use tensor_hotspot::tensor::*;
use tensor_hotspot::simgen::{PopulationTrend, ScenarioConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(x: f64, centre: f64, tol: f64) -> bool {
    (x - centre).abs() <= tol
}

fn replications() -> usize {
    std::env::var("ACCEPTANCE_REPS").ok().and_then(|s| s.parse().ok()).unwrap_or(100)
}

fn study(delta: f64, trend: PopulationTrend) -> (AggregateTable, Vec<RunResult>) {
    let cfg = ExperimentConfig {
        scenario: ScenarioConfig { delta, population_trend: trend, ..Default::default() },
        replications: replications(),
        seed: 1,
    };
    let (table, runs) = run_experiment(&cfg, &HotspotDetector::default());
    (table, runs.into_iter().filter_map(Result::ok).collect())
}

fn strong_signal() -> Outcome {
    let (t, _) = study(0.2, PopulationTrend::Decreasing);
    let pass = t.failures == 0
        && (1.0..=1.2).contains(&t.arl1.mean)
        && within(t.precision.mean, 0.81, 0.10)
        && within(t.recall.mean, 0.535, 0.10)
        && within(t.f_measure.mean, 0.644, 0.10);
    Outcome {
        pass,
        detail: format!(
            "{} reps: ARL1 {:.4}, precision {:.4}, recall {:.4}, F {:.4}",
            t.replications, t.arl1.mean, t.precision.mean, t.recall.mean, t.f_measure.mean
        ),
    }
}

fn weak_signal(t: &AggregateTable) -> Outcome {
    let pass = t.failures == 0 && within(t.arl1.mean, 2.0, 0.6) && within(t.precision.mean, 0.46, 0.12);
    Outcome {
        pass,
        detail: format!(
            "{} reps: ARL1 {:.4} (sd {:.4}), precision {:.4}",
            t.replications, t.arl1.mean, t.arl1.sd, t.precision.mean
        ),
    }
}

fn background_fit(t: &AggregateTable) -> Outcome {
    let target = 0.0259e5;
    Outcome {
        pass: t.smse.mean >= target / 2.0 && t.smse.mean <= target * 2.0,
        detail: format!("SMSE {:.1} (sd {:.1}), accepted [{:.0}, {:.0}]", t.smse.mean, t.smse.sd, target / 2.0, target * 2.0),
    }
}

fn calibration() -> Outcome {
    let c = calibrate_limit(&StandardNormalStream, 0.5, 50.0, &CalibrationOptions::default());
    match c {
        Ok(c) => {
            let fresh = estimate_arl(&StandardNormalStream, 0.5, c.limit, 5000, 0x5eed_f00d, 1_000_000);
            Outcome {
                pass: within(fresh, 50.0, 5.0),
                detail: format!("limit {:.4}, calibration ARL0 {:.2}, fresh ARL0 {:.2}", c.limit, c.arl0, fresh),
            }
        }
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn gradients() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut g = rng(2024);
    for s in 0..20 {
        let d = [g.random_range(1..=3), g.random_range(1..=3), g.random_range(1..=3)];
        let cols = [g.random_range(1..=d[0]), g.random_range(1..=d[1]), g.random_range(1..=d[2])];
        let data = random_basis_instance(s, d, cols);
        let p = random_params(&mut g, &data, 0.3);
        let gm = grad_theta_m(&data, &p).unwrap();
        let fm = |t: &[f64]| neg_log_likelihood(&data, &ModelParams { theta_m: t.to_vec(), theta_h: p.theta_h.clone() }).unwrap();
        let gh = grad_theta_h(&data, &p).unwrap();
        let fh = |t: &[f64]| neg_log_likelihood(&data, &ModelParams { theta_m: p.theta_m.clone(), theta_h: t.to_vec() }).unwrap();
        worst = worst
            .max(rel_err(&gm, &central_difference(fm, &p.theta_m, 1e-6)))
            .max(rel_err(&gh, &central_difference(fh, &p.theta_h, 1e-6)));
    }
    Outcome { pass: worst < 1e-5, detail: format!("20 instances, worst relative error {worst:.2e}") }
}

fn solver_oracles() -> Outcome {
    let cfg = SolverConfig::default();
    let (mut glm, mut prox, mut rise): (f64, f64, f64) = (0.0, 0.0, f64::NEG_INFINITY);
    for s in 0..8 {
        let data = spline_instance(100 + s, [5, 4, 6], 40.0);
        let want = glm_oracle(&data);
        let (lmax, bg) = lambda_max_with_fit(&data, &cfg).unwrap();
        let far = fit(&data, lmax * 1e3, &cfg).unwrap();
        let scale = want.iter().map(|v| v.abs()).fold(1.0, f64::max);
        glm = glm.max(max_abs_diff(&far.params.theta_m, &want) / scale);
        for frac in [0.5, 0.1, 0.01] {
            let lambda = frac * lmax;
            let out = fista_solve(&data, &bg.theta_m, &vec![0.0; data.q()], lambda, &cfg).unwrap();
            let p = ModelParams { theta_m: bg.theta_m.clone(), theta_h: out.theta_h.clone() };
            let grad = grad_theta_h(&data, &p).unwrap();
            let l = lipschitz_constant(&data, &p).max(out.lipschitz);
            for k in 0..data.q() {
                let fp = soft_threshold(out.theta_h[k] - grad[k] / l, lambda / l);
                prox = prox.max((fp - out.theta_h[k]).abs());
            }
            let f = fit(&data, lambda, &cfg).unwrap();
            for w in f.objective_trace.windows(2) {
                rise = rise.max(w[1] - w[0]);
            }
        }
    }
    Outcome {
        pass: glm < 1e-6 && prox < 1e-6 && rise <= 1e-8,
        detail: format!("GLM gap {glm:.2e}, prox residual {prox:.2e}, largest trace rise {rise:.2e}"),
    }
}

fn tensor_algebra() -> Outcome {
    let mut g = rng(7);
    let (mut kv, mut mp, mut pu): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..50 {
        let d = [g.random_range(1..6), g.random_range(1..6), g.random_range(1..6)];
        let r = [g.random_range(1..6), g.random_range(1..6), g.random_range(1..6)];
        let core = random_tensor(&mut g, d);
        let b = [0, 1, 2].map(|m| random_matrix(&mut g, r[m], d[m]));
        let tucker = tucker_reconstruct(&core, &b[0], &b[1], &b[2]).unwrap();
        let dense = kron_oracle(&kron_oracle(&b[0], &b[1]), &b[2]).matvec(&vectorize(&core)).unwrap();
        kv = kv.max(max_abs_diff(&vectorize(&tucker), &dense));
        for m in 0..3 {
            let a = mode_n_product(&core, &b[m], m).unwrap();
            mp = mp.max(max_abs_diff(a.as_slice(), mode_oracle(&core, &b[m], m).as_slice()));
        }
        let mut knots = vec![1.0];
        for _ in 0..g.random_range(1..7) {
            let last = *knots.last().unwrap();
            knots.push(last + g.random_range(0.5..10.0));
        }
        let basis = bspline_basis(g.random_range(2..60), &knots, g.random_range(2..=4)).unwrap();
        for i in 0..basis.rows() {
            pu = pu.max((basis.row(i).iter().sum::<f64>() - 1.0).abs());
        }
    }
    Outcome {
        pass: kv <= 1e-12 && mp <= 1e-12 && pu <= 1e-12,
        detail: format!("50 shapes: kron-vec {kv:.1e}, mode product {mp:.1e}, partition of unity {pu:.1e}"),
    }
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig { replications: 3, seed: 11, ..Default::default() };
    let det = HotspotDetector::default();
    let (a, ra) = run_experiment(&cfg, &det);
    let (b, rb) = run_experiment(&cfg, &det);
    let bits = |t: &AggregateTable| {
        [t.precision, t.recall, t.f_measure, t.arl1, t.smse]
            .iter()
            .flat_map(|s| [s.mean.to_bits(), s.sd.to_bits()])
            .chain([t.alarm_rate.to_bits()])
            .collect::<Vec<u64>>()
    };
    let same_runs = ra.iter().zip(&rb).all(|(x, y)| match (x, y) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    });
    Outcome {
        pass: bits(&a) == bits(&b) && a.csv_row() == b.csv_row() && same_runs,
        detail: format!("3 replications twice: {}", a.csv_row()),
    }
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {n} ({name}): {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };
    report(5, "gradients", &mut gradients);
    report(6, "solver oracles", &mut solver_oracles);
    report(7, "tensor algebra", &mut tensor_algebra);
    report(4, "calibration", &mut calibration);
    report(8, "determinism", &mut determinism);
    report(1, "strong signal", &mut strong_signal);
    let mut weak: Option<AggregateTable> = None;
    report(2, "weak signal", &mut || {
        let (t, _) = study(0.05, PopulationTrend::Increasing);
        let o = weak_signal(&t);
        weak = Some(t);
        o
    });
    let weak = weak.expect("weak-signal study ran");
    report(3, "background fit", &mut || background_fit(&weak));
    println!("{failed} of 8 criteria failed");
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
