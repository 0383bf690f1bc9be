use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use tensor_hotspot::basis::basis_set;
use tensor_hotspot::config::Settings;
use tensor_hotspot::evalkit::{run_experiment, HotspotDetector};
use tensor_hotspot::io;
use tensor_hotspot::localize::report_from_slice;
use tensor_hotspot::manifest::RunManifest;
use tensor_hotspot::model::{ModelFit, ProblemData};
use tensor_hotspot::monitor::Calibration;
use tensor_hotspot::pipeline::{calibrate, detect, phase_one, GeneratorKind};
use tensor_hotspot::rng::{child_seed, stream};
use tensor_hotspot::simgen::{generate_counts, PhiTable};
use tensor_hotspot::solver::{fit, fit_path, geometric_grid, lambda_max};
use tensor_hotspot::tensor::AxisLabels;
use tensor_hotspot::Error;

const NO_ALARM: u8 = 2;

#[derive(Parser)]
#[command(name = "hotspot", version, about = "Hot-spot detection in location x category x period count tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set delta=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Counts CSV: location,year,<category>...
    #[arg(long)]
    counts: PathBuf,
    /// Population CSV: location,year,population
    #[arg(long)]
    population: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the smooth-plus-sparse model at `lambda` or over the default path.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        auto_path: bool,
    },
    /// Calibrate the CUSUM control limit for the target in-control ARL.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Data for the phase-I bootstrap generator.
        #[arg(long, requires = "population")]
        counts: Option<PathBuf>,
        #[arg(long, requires = "counts")]
        population: Option<PathBuf>,
    },
    /// Run the chart; exits with status 2 when there is no alarm.
    Detect {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Calibration file from `calibrate`.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Threshold the alarm slice written by `detect`.
    Localize {
        #[command(flatten)]
        common: Common,
        /// detection.json from `detect`.
        #[arg(long)]
        detection: PathBuf,
        /// alarm_slice.csv from `detect`.
        #[arg(long)]
        slice: PathBuf,
    },
    /// Replicate a scenario and aggregate the metrics.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Serialize, Deserialize)]
struct DetectionSummary {
    alarm_period: Option<usize>,
    alarm_label: Option<String>,
    lambda_index: Option<usize>,
    lambda: Option<f64>,
    limit: f64,
    arl0: f64,
    cells: usize,
    location_labels: Vec<String>,
    category_labels: Vec<String>,
}

#[derive(Serialize)]
struct FitSummary {
    lambda: f64,
    objective: f64,
    converged: bool,
    outer_iterations: usize,
    inner_iterations: usize,
    hotspot_nonzeros: usize,
}

impl FitSummary {
    fn of(f: &ModelFit) -> Self {
        Self {
            lambda: f.lambda,
            objective: f.objective_value,
            converged: f.converged,
            outer_iterations: f.outer_iterations,
            inner_iterations: f.inner_iterations,
            hotspot_nonzeros: f.hotspot_nonzeros(),
        }
    }
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn load_data(d: &DataArgs, s: &Settings) -> tensor_hotspot::Result<ProblemData> {
    let ing = io::ingest_counts(&d.counts)?;
    for c in &ing.imputed {
        eprintln!("imputed {} / {} / {} = {}", c.location, c.category, c.year, c.value);
    }
    let pop = io::ingest_population(&d.population, &ing.counts, s.population_units()?)?;
    let basis = basis_set(ing.counts.dims(), &s.basis())?;
    ProblemData::new(ing.counts, pop, basis)
}

fn write_fit(m: &mut RunManifest, dir: &Path, fit: &ModelFit, data: &ProblemData) -> tensor_hotspot::Result<()> {
    let periods = data.y().labels().map(|l| l.periods.clone()).unwrap_or_default();
    m.emit(&dir.join("fit_summary.json"), &json(&FitSummary::of(fit)))?;
    m.emit(&dir.join("trace.csv"), &io::trace_csv(&fit.objective_trace)?)?;
    for t in 0..data.dims()[2] {
        let label = periods.get(t).cloned().unwrap_or_else(|| (t + 1).to_string());
        m.emit(&dir.join("slices").join(format!("period_{label}.csv")), &io::fit_slice_csv(fit, data, t)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> tensor_hotspot::Result<u8> {
    match cli.command {
        Command::Simulate { common } => {
            let s = Settings::load(common.config.as_deref(), &common.overrides)?;
            let cfg = s.scenario()?;
            let mut m = RunManifest::start("simulate", &s, &[])?;
            let sc = generate_counts(&cfg, &PhiTable::bundled(), &mut stream(s.seed(), "scenario", 0))?;
            let labels = sc.counts.labels().cloned().unwrap_or_default();
            let truth: Vec<_> = sc.truth.iter().copied().collect();
            m.emit(&common.out.join("counts.csv"), &io::counts_csv(&sc.counts)?)?;
            m.emit(&common.out.join("population.csv"), &io::population_csv(&sc.exposure)?)?;
            m.emit(&common.out.join("truth.csv"), &io::truth_csv(&truth, &labels)?)?;
            m.finish(&common.out.join("manifest.json"), 0)?;
            println!("{} cells, {} hot-spots", sc.counts.len(), truth.len());
            Ok(0)
        }
        Command::Fit { common, data, auto_path } => {
            let s = Settings::load(common.config.as_deref(), &common.overrides)?;
            let mut m = RunManifest::start("fit", &s, &[&data.counts, &data.population])?;
            let d = load_data(&data, &s)?;
            let solver = s.solver()?;
            if auto_path || s.lambda.is_none() {
                let dc = s.detector()?;
                let grid = geometric_grid(lambda_max(&d, &solver)?, dc.grid.n_lambda, dc.grid.min_ratio)?;
                let path = fit_path(&d, &grid, &solver)?;
                let mut rows = Vec::new();
                for (k, f) in path.fits.iter().enumerate() {
                    let f = f.as_ref().map_err(|e| e.clone())?;
                    write_fit(&mut m, &common.out.join(format!("lambda_{:02}", k + 1)), f, &d)?;
                    rows.push(FitSummary::of(f));
                    println!("lambda {:>2} {:.6e} objective {:.10e} nonzeros {}", k + 1, f.lambda, f.objective_value, f.hotspot_nonzeros());
                }
                m.emit(&common.out.join("path_summary.json"), &json(&rows))?;
            } else {
                let f = fit(&d, s.lambda.unwrap_or_default(), &solver)?;
                write_fit(&mut m, &common.out, &f, &d)?;
                println!("objective {:.10e} converged {} nonzeros {}", f.objective_value, f.converged, f.hotspot_nonzeros());
            }
            m.finish(&common.out.join("manifest.json"), 0)?;
            Ok(0)
        }
        Command::Calibrate { common, counts, population } => {
            let s = Settings::load(common.config.as_deref(), &common.overrides)?;
            let dc = s.detector()?;
            let seed = child_seed(s.seed(), "calibration", 0);
            let (inputs, phase1): (Vec<&Path>, Vec<f64>) = match (&counts, &population) {
                (Some(c), Some(p)) => {
                    let d = load_data(&DataArgs { counts: c.clone(), population: p.clone() }, &s)?;
                    (vec![c.as_path(), p.as_path()], phase_one(&d, &dc)?.phase1_p_tilde)
                }
                _ if dc.generator == GeneratorKind::Bootstrap => {
                    return Err(Error::Invalid("bootstrap calibration needs --counts and --population".into()))
                }
                _ => (Vec::new(), Vec::new()),
            };
            let mut m = RunManifest::start("calibrate", &s, &inputs)?;
            let cal = calibrate(&dc, &phase1, seed)?;
            m.emit(&common.out.join("calibration.json"), &json(&cal))?;
            m.finish(&common.out.join("manifest.json"), 0)?;
            println!("limit {:.6} (ARL0 {:.3}, target {})", cal.limit, cal.arl0, cal.target_arl0);
            Ok(0)
        }
        Command::Detect { common, data, calibration } => {
            let s = Settings::load(common.config.as_deref(), &common.overrides)?;
            let mut inputs = vec![data.counts.as_path(), data.population.as_path()];
            let mut dc = s.detector()?;
            if let Some(c) = &calibration {
                let text = std::fs::read_to_string(c).map_err(|e| Error::Io(format!("{}: {e}", c.display())))?;
                let cal: Calibration = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
                dc.limit = Some(cal.limit);
                inputs.push(c.as_path());
            }
            let mut m = RunManifest::start("detect", &s, &inputs)?;
            let d = load_data(&data, &s)?;
            let det = detect(&d, &dc, s.seed())?;
            let labels = d.y().labels().cloned().unwrap_or_default();
            let periods = labels.periods.clone();
            m.emit(&common.out.join("history.csv"), &io::history_csv(&det.run.history, Some(&periods))?)?;
            let last = det.run.history.last();
            let summary = DetectionSummary {
                alarm_period: det.alarm_period(),
                alarm_label: det.run.alarm.and_then(|t| periods.get(t).cloned()),
                lambda_index: det.run.alarm.and(last.and_then(|r| r.lambda_index)),
                lambda: det.run.alarm.and(last.map(|r| r.lambda)),
                limit: det.calibration.limit,
                arl0: det.calibration.arl0,
                cells: det.report.as_ref().map_or(0, |r| r.cells.len()),
                location_labels: labels.locations.clone(),
                category_labels: labels.categories.clone(),
            };
            m.emit(&common.out.join("detection.json"), &json(&summary))?;
            if let (Some(h), Some(r)) = (&det.alarm_slice, &det.report) {
                m.emit(&common.out.join("alarm_slice.csv"), &io::slice_csv(h)?)?;
                m.emit(&common.out.join("report.csv"), &io::report_csv(r)?)?;
                print!("alarm at period {} ({})\n{r}", r.t_star + 1, summary.alarm_label.as_deref().unwrap_or("?"));
            } else {
                println!("no alarm (limit {:.6})", det.calibration.limit);
            }
            let code = if det.run.alarm.is_some() { 0 } else { NO_ALARM };
            m.finish(&common.out.join("manifest.json"), code as i32)?;
            Ok(code)
        }
        Command::Localize { common, detection, slice } => {
            let s = Settings::load(common.config.as_deref(), &common.overrides)?;
            let mut m = RunManifest::start("localize", &s, &[&detection, &slice])?;
            let text =
                std::fs::read_to_string(&detection).map_err(|e| Error::Io(format!("{}: {e}", detection.display())))?;
            let summary: DetectionSummary = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            let t_star = summary
                .alarm_period
                .ok_or_else(|| Error::Invalid("detection has no alarm to localize".into()))?
                - 1;
            let h = io::read_slice(std::fs::File::open(&slice)?)?;
            let labels = AxisLabels {
                locations: summary.location_labels,
                categories: summary.category_labels,
                periods: Vec::new(),
            };
            let report = report_from_slice(&h, t_star, s.detector()?.threshold, Some(&labels));
            m.emit(&common.out.join("report.csv"), &io::report_csv(&report)?)?;
            m.emit(&common.out.join("report.txt"), report.to_string().as_bytes())?;
            m.finish(&common.out.join("manifest.json"), 0)?;
            print!("{report}");
            Ok(0)
        }
        Command::Evaluate { common } => {
            let s = Settings::load(common.config.as_deref(), &common.overrides)?;
            let mut m = RunManifest::start("evaluate", &s, &[])?;
            let exp = s.experiment()?;
            let det = HotspotDetector { config: s.detector()? };
            let (table, results) = run_experiment(&exp, &det);
            let mut rows = String::from("replication,alarm_period,delay,precision,recall,f_measure,smse,error\n");
            for (r, res) in results.iter().enumerate() {
                match res {
                    Ok(x) => rows.push_str(&format!(
                        "{},{},{},{},{},{},{},\n",
                        r + 1,
                        x.alarm_period.map(|a| a.to_string()).unwrap_or_default(),
                        x.delay,
                        x.precision,
                        x.recall,
                        x.f_measure,
                        x.smse.map(|v| v.to_string()).unwrap_or_default()
                    )),
                    Err(e) => rows.push_str(&format!("{},,,,,,,\"{}\"\n", r + 1, e.to_string().replace('"', "'"))),
                }
            }
            m.emit(&common.out.join("replications.csv"), rows.as_bytes())?;
            m.emit(&common.out.join("aggregate.csv"), &io::aggregate_csv(&table))?;
            m.emit(&common.out.join("aggregate.txt"), table.to_string().as_bytes())?;
            m.finish(&common.out.join("manifest.json"), 0)?;
            print!("{table}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Invalid(_) | Error::Dimension(_) | Error::Parse(_) | Error::Config(_) => 3,
                Error::Divergence(_) | Error::Bracket { .. } => 4,
                Error::Io(_) => 1,
            })
        }
    }
}
