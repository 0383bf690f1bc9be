//! CSV ingestion and emission.
//!
//! Counts use the wide layout `location,year,<category>...` with one row per
//! (location, year). Populations use `location,year,population`. Every writer
//! goes through a temporary file in the target directory that is renamed into
//! place once complete.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, invalid, Error, Result};
use crate::evalkit::AggregateTable;
use crate::localize::HotspotReport;
use crate::model::{ModelFit, ProblemData};
use crate::monitor::ChartRecord;
use crate::tensor::{AxisLabels, Matrix, Tensor3};

/// Units of the population column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopulationUnits {
    #[default]
    Persons,
    /// Values are in 10,000s and are multiplied out on ingestion.
    #[serde(rename = "10k")]
    TenThousands,
}

impl PopulationUnits {
    pub fn factor(self) -> f64 {
        match self {
            PopulationUnits::Persons => 1.0,
            PopulationUnits::TenThousands => 1e4,
        }
    }
}

impl std::str::FromStr for PopulationUnits {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "persons" => Ok(Self::Persons),
            "10k" => Ok(Self::TenThousands),
            _ => Err(Error::Parse(format!("population units must be persons or 10k, got {s:?}"))),
        }
    }
}

/// A cell filled in by mean imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedCell {
    pub location: String,
    pub category: String,
    pub year: i64,
    pub value: f64,
}

/// Counts read from disk.
#[derive(Debug, Clone)]
pub struct IngestedCounts {
    pub counts: Tensor3,
    pub years: Vec<i64>,
    pub imputed: Vec<ImputedCell>,
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na")
}

fn parse_year(s: &str, line: usize) -> Result<i64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: year {s:?} is not an integer")))
}

fn parse_count(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse(format!("line {line}: count {s:?} is not a number")))?;
    if !(v >= 0.0) || v.fract() != 0.0 || !v.is_finite() {
        return invalid(format!("line {line}: count {s:?} is not a nonnegative integer"));
    }
    Ok(v)
}

fn reader<R: std::io::Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(r)
}

/// Read counts from a reader. Missing cells (empty or `NA`) are replaced by
/// the rounded mean of the observed values of the same (location, category)
/// series.
pub fn read_counts<R: std::io::Read>(r: R) -> Result<IngestedCounts> {
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < 3 {
        return invalid("counts header needs location, year and at least one category");
    }
    let categories: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut loc_index: HashMap<String, usize> = HashMap::new();
    let mut locations: Vec<String> = Vec::new();
    let mut cells: HashMap<(usize, i64), Vec<Option<f64>>> = HashMap::new();
    let mut years: BTreeMap<i64, ()> = BTreeMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != header.len() {
            return invalid(format!("line {line}: {} fields, header has {}", rec.len(), header.len()));
        }
        let loc = rec[0].to_string();
        let year = parse_year(&rec[1], line)?;
        let li = *loc_index.entry(loc.clone()).or_insert_with(|| {
            locations.push(loc.clone());
            locations.len() - 1
        });
        let values = rec
            .iter()
            .skip(2)
            .map(|s| if is_missing(s) { Ok(None) } else { parse_count(s, line).map(Some) })
            .collect::<Result<Vec<_>>>()?;
        if cells.insert((li, year), values).is_some() {
            return invalid(format!("line {line}: duplicate row for ({loc}, {year})"));
        }
        years.insert(year, ());
    }
    if locations.is_empty() {
        return invalid("counts file has no rows");
    }
    let years: Vec<i64> = years.into_keys().collect();
    let dims = [locations.len(), categories.len(), years.len()];
    let mut data = vec![f64::NAN; dims[0] * dims[1] * dims[2]];
    let mut imputed = Vec::new();
    for (i, loc) in locations.iter().enumerate() {
        for y in &years {
            if !cells.contains_key(&(i, *y)) {
                return invalid(format!("no row for ({loc}, {y})"));
            }
        }
        for (j, cat) in categories.iter().enumerate() {
            let series: Vec<Option<f64>> = years.iter().map(|y| cells[&(i, *y)][j]).collect();
            let observed: Vec<f64> = series.iter().flatten().copied().collect();
            for (k, v) in series.iter().enumerate() {
                let value = match v {
                    Some(v) => *v,
                    None => {
                        if observed.is_empty() {
                            return invalid(format!("series ({loc}, {cat}) has no observed values"));
                        }
                        let m = (observed.iter().sum::<f64>() / observed.len() as f64).round();
                        imputed.push(ImputedCell {
                            location: loc.clone(),
                            category: cat.clone(),
                            year: years[k],
                            value: m,
                        });
                        m
                    }
                };
                data[(i * dims[1] + j) * dims[2] + k] = value;
            }
        }
    }
    let labels = AxisLabels {
        locations,
        categories,
        periods: years.iter().map(|y| y.to_string()).collect(),
    };
    let counts = Tensor3::new(dims, data)?.with_labels(labels)?;
    Ok(IngestedCounts { counts, years, imputed })
}

/// Read counts from a file.
pub fn ingest_counts(path: &Path) -> Result<IngestedCounts> {
    read_counts(std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
}

/// Read a population table and broadcast it over the categories of `counts`.
pub fn read_population<R: std::io::Read>(r: R, counts: &Tensor3, units: PopulationUnits) -> Result<Tensor3> {
    let labels = counts
        .labels()
        .ok_or_else(|| Error::Invalid("counts tensor carries no axis labels".into()))?;
    let mut rdr = reader(r);
    let header = rdr.headers()?.clone();
    if header.len() != 3 {
        return invalid("population header must be location,year,population");
    }
    let mut table: HashMap<(String, String), f64> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != 3 {
            return invalid(format!("line {line}: expected 3 fields"));
        }
        let year = parse_year(&rec[1], line)?;
        let v: f64 = rec[2]
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: population {:?} is not a number", &rec[2])))?;
        if !(v > 0.0) || !v.is_finite() {
            return invalid(format!("line {line}: population must be positive, got {v}"));
        }
        if table.insert((rec[0].to_string(), year.to_string()), v * units.factor()).is_some() {
            return invalid(format!("line {line}: duplicate row for ({}, {year})", &rec[0]));
        }
    }
    let dims = counts.dims();
    let mut slab = vec![0.0; dims[0] * dims[2]];
    for (i, loc) in labels.locations.iter().enumerate() {
        for (k, y) in labels.periods.iter().enumerate() {
            slab[i * dims[2] + k] = *table
                .get(&(loc.clone(), y.clone()))
                .ok_or_else(|| Error::Dimension(format!("population has no row for ({loc}, {y})")))?;
        }
    }
    let pop = Tensor3::from_fn(dims, |i, _, k| slab[i * dims[2] + k]);
    pop.with_labels(labels.clone())
}

/// Read a population file.
pub fn ingest_population(path: &Path, counts: &Tensor3, units: PopulationUnits) -> Result<Tensor3> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_population(f, counts, units)
}

/// Write `bytes` to `path` through a temporary sibling file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w)?;
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn default_labels(t: &Tensor3) -> AxisLabels {
    let [n1, n2, n3] = t.dims();
    t.labels().cloned().unwrap_or_else(|| AxisLabels {
        locations: (1..=n1).map(|i| format!("location_{i}")).collect(),
        categories: (1..=n2).map(|j| format!("category_{j}")).collect(),
        periods: (1..=n3).map(|k| k.to_string()).collect(),
    })
}

/// Counts in the wide layout.
pub fn counts_csv(y: &Tensor3) -> Result<Vec<u8>> {
    let l = default_labels(y);
    let [n1, n2, n3] = y.dims();
    csv_bytes(|w| {
        let mut head = vec!["location".to_string(), "year".to_string()];
        head.extend(l.categories.iter().cloned());
        w.write_record(&head)?;
        for i in 0..n1 {
            for k in 0..n3 {
                let mut rec = vec![l.locations[i].clone(), l.periods[k].clone()];
                rec.extend((0..n2).map(|j| y.get(i, j, k).to_string()));
                w.write_record(&rec)?;
            }
        }
        Ok(())
    })
}

/// Population per (location, year), read from the first category.
pub fn population_csv(pop: &Tensor3) -> Result<Vec<u8>> {
    let l = default_labels(pop);
    let [n1, _, n3] = pop.dims();
    csv_bytes(|w| {
        w.write_record(["location", "year", "population"])?;
        for i in 0..n1 {
            for k in 0..n3 {
                w.write_record([l.locations[i].clone(), l.periods[k].clone(), pop.get(i, 0, k).to_string()])?;
            }
        }
        Ok(())
    })
}

/// Planted hot-spot cells.
pub fn truth_csv(truth: &[(usize, usize)], labels: &AxisLabels) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["location_index", "location", "category_index", "category"])?;
        for &(i, j) in truth {
            w.write_record([
                (i + 1).to_string(),
                labels.locations[i].clone(),
                (j + 1).to_string(),
                labels.categories[j].clone(),
            ])?;
        }
        Ok(())
    })
}

/// Read a truth file back as 0-based cells.
pub fn read_truth<R: std::io::Read>(r: R) -> Result<Vec<(usize, usize)>> {
    let mut rdr = reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let idx = |k: usize| -> Result<usize> {
            let v: usize = rec[k].parse().map_err(|_| Error::Parse(format!("bad index {:?}", &rec[k])))?;
            v.checked_sub(1).ok_or_else(|| Error::Parse("indices are 1-based".into()))
        };
        out.push((idx(0)?, idx(2)?));
    }
    Ok(out)
}

/// Chart history, one row per monitored period.
pub fn history_csv(history: &[ChartRecord], periods: Option<&[String]>) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["period", "year", "lambda_index", "lambda", "p_plus", "p_tilde", "cusum", "alarm", "failed"])?;
        for r in history {
            let year = periods.and_then(|p| p.get(r.period).cloned()).unwrap_or_else(|| (r.period + 1).to_string());
            w.write_record([
                (r.period + 1).to_string(),
                year,
                r.lambda_index.map(|k| (k + 1).to_string()).unwrap_or_default(),
                r.lambda.to_string(),
                r.p_plus.to_string(),
                r.p_tilde.to_string(),
                r.w.to_string(),
                r.alarm.to_string(),
                r.failed.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Localization report.
pub fn report_csv(report: &HotspotReport) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["location_index", "location", "category_index", "category", "magnitude", "rule"])?;
        for c in &report.cells {
            w.write_record([
                (c.location + 1).to_string(),
                report.location_label(c.location),
                (c.category + 1).to_string(),
                report.category_label(c.category),
                c.magnitude.to_string(),
                report.rule.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// A hot-spot slice as `location_index,category_index,value`, all entries.
pub fn slice_csv(h: &Matrix) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["location_index", "category_index", "value"])?;
        for i in 0..h.rows() {
            for j in 0..h.cols() {
                w.write_record([(i + 1).to_string(), (j + 1).to_string(), h.get(i, j).to_string()])?;
            }
        }
        Ok(())
    })
}

/// Inverse of [`slice_csv`].
pub fn read_slice<R: std::io::Read>(r: R) -> Result<Matrix> {
    let mut rdr = reader(r);
    let mut cells = Vec::new();
    let (mut rows, mut cols) = (0, 0);
    for rec in rdr.records() {
        let rec = rec?;
        let p = |k: usize| -> Result<f64> { rec[k].parse().map_err(|_| Error::Parse(format!("bad value {:?}", &rec[k]))) };
        let (i, j, v) = (p(0)? as usize, p(1)? as usize, p(2)?);
        if i == 0 || j == 0 {
            return Err(Error::Parse("indices are 1-based".into()));
        }
        rows = rows.max(i);
        cols = cols.max(j);
        cells.push((i - 1, j - 1, v));
    }
    if cells.len() != rows * cols {
        return dim_err(format!("slice has {} entries for a {rows}x{cols} grid", cells.len()));
    }
    let mut m = Matrix::zeros(rows, cols);
    for (i, j, v) in cells {
        m.set(i, j, v);
    }
    Ok(m)
}

/// Fitted quantities of one frontal slice.
pub fn fit_slice_csv(fit: &ModelFit, data: &ProblemData, t: usize) -> Result<Vec<u8>> {
    let l = default_labels(data.y());
    let bg = fit.background_mean(data);
    let [n1, n2, _] = data.dims();
    csv_bytes(|w| {
        w.write_record(["location", "category", "count", "population", "u_hat", "h_hat", "background_mean", "fitted_mean"])?;
        for i in 0..n1 {
            for j in 0..n2 {
                w.write_record([
                    l.locations[i].clone(),
                    l.categories[j].clone(),
                    data.y().get(i, j, t).to_string(),
                    data.pop().get(i, j, t).to_string(),
                    fit.u_hat.get(i, j, t).to_string(),
                    fit.h_hat.get(i, j, t).to_string(),
                    bg.get(i, j, t).to_string(),
                    fit.mu_hat_counts.get(i, j, t).to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

/// Objective value per outer iteration.
pub fn trace_csv(trace: &[f64]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["iteration", "objective"])?;
        for (k, f) in trace.iter().enumerate() {
            w.write_record([k.to_string(), f.to_string()])?;
        }
        Ok(())
    })
}

/// Aggregate table as a one-row CSV.
pub fn aggregate_csv(table: &AggregateTable) -> Vec<u8> {
    format!("{}\n{}\n", AggregateTable::CSV_HEADER, table.csv_row()).into_bytes()
}
