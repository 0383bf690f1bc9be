//! Hot-spot localization from the estimated hot-spot slice at the alarm
//! period. Only positive entries are ever reported.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ModelFit;
use crate::tensor::{frontal_slice, AxisLabels, Matrix};

/// A reported cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotCell {
    pub location: usize,
    pub category: usize,
    pub magnitude: f64,
}

/// Thresholding rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum ThresholdRule {
    /// Keep entries above the cut, unchanged.
    Hard(f64),
    /// Keep entries above the cut, shrunk by it.
    Soft(f64),
    /// Keep entries at or above the r-th largest positive entry; `None`
    /// keeps every positive entry.
    Order(Option<usize>),
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Order(None)
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdRule::Hard(c) => write!(f, "hard:{c}"),
            ThresholdRule::Soft(c) => write!(f, "soft:{c}"),
            ThresholdRule::Order(None) => write!(f, "order"),
            ThresholdRule::Order(Some(r)) => write!(f, "order:{r}"),
        }
    }
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            let v: f64 = a
                .ok_or_else(|| Error::Parse(format!("rule {kind:?} needs a value")))?
                .parse()
                .map_err(|e| Error::Parse(format!("rule value: {e}")))?;
            if !(v >= 0.0) {
                return invalid(format!("threshold must be nonnegative, got {v}"));
            }
            Ok(v)
        };
        match kind {
            "hard" => Ok(ThresholdRule::Hard(num(arg)?)),
            "soft" => Ok(ThresholdRule::Soft(num(arg)?)),
            "order" => match arg {
                None | Some("all") => Ok(ThresholdRule::Order(None)),
                Some(a) => {
                    let r: usize = a.parse().map_err(|e| Error::Parse(format!("order rank: {e}")))?;
                    if r == 0 {
                        return invalid("order rank must be at least 1");
                    }
                    Ok(ThresholdRule::Order(Some(r)))
                }
            },
            _ => Err(Error::Parse(format!("unknown threshold rule {s:?}"))),
        }
    }
}

/// Cells reported at one alarm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotspotReport {
    pub t_star: usize,
    pub rule: ThresholdRule,
    pub cells: Vec<HotspotCell>,
    pub location_labels: Vec<String>,
    pub category_labels: Vec<String>,
}

impl HotspotReport {
    pub fn location_label(&self, i: usize) -> String {
        self.location_labels.get(i).cloned().unwrap_or_else(|| (i + 1).to_string())
    }

    pub fn category_label(&self, j: usize) -> String {
        self.category_labels.get(j).cloned().unwrap_or_else(|| (j + 1).to_string())
    }

    pub fn cell_set(&self) -> std::collections::BTreeSet<(usize, usize)> {
        self.cells.iter().map(|c| (c.location, c.category)).collect()
    }
}

impl fmt::Display for HotspotReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "hot-spots at period {} ({}), {} cells", self.t_star + 1, self.rule, self.cells.len())?;
        for c in &self.cells {
            writeln!(
                f,
                "  {:<24} {:<16} {:.6}",
                self.location_label(c.location),
                self.category_label(c.category),
                c.magnitude
            )?;
        }
        Ok(())
    }
}

/// `Ĥ_{::t}` from a fit.
pub fn hotspot_slice(fit: &ModelFit, t_star: usize) -> Result<Matrix> {
    frontal_slice(&fit.h_hat, t_star)
}

fn sorted(mut cells: Vec<HotspotCell>) -> Vec<HotspotCell> {
    cells.sort_by(|a, b| {
        b.magnitude
            .total_cmp(&a.magnitude)
            .then(a.location.cmp(&b.location))
            .then(a.category.cmp(&b.category))
    });
    cells
}

fn positives(h: &Matrix) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    (0..h.rows()).flat_map(move |i| (0..h.cols()).map(move |j| (i, j, h.get(i, j)))).filter(|c| c.2 > 0.0)
}

/// Entries strictly above `cut`.
pub fn threshold_hard(h: &Matrix, cut: f64) -> Vec<HotspotCell> {
    sorted(
        positives(h)
            .filter(|c| c.2 > cut)
            .map(|(location, category, magnitude)| HotspotCell { location, category, magnitude })
            .collect(),
    )
}

/// Entries strictly above `cut`, reported as `h - cut`.
pub fn threshold_soft(h: &Matrix, cut: f64) -> Vec<HotspotCell> {
    sorted(
        positives(h)
            .filter(|c| c.2 - cut > 0.0)
            .map(|(location, category, m)| HotspotCell { location, category, magnitude: m - cut })
            .collect(),
    )
}

/// Positive entries at or above the `r`-th largest positive value; all
/// positives when `r` is `None` or exceeds their number.
pub fn threshold_order(h: &Matrix, r: Option<usize>) -> Vec<HotspotCell> {
    let all = sorted(
        positives(h)
            .map(|(location, category, magnitude)| HotspotCell { location, category, magnitude })
            .collect(),
    );
    match r {
        Some(r) if r >= 1 && r < all.len() => {
            let cut = all[r - 1].magnitude;
            all.into_iter().filter(|c| c.magnitude >= cut).collect()
        }
        _ => all,
    }
}

/// Apply `rule` to a slice.
pub fn apply_rule(h: &Matrix, rule: ThresholdRule) -> Vec<HotspotCell> {
    match rule {
        ThresholdRule::Hard(c) => threshold_hard(h, c),
        ThresholdRule::Soft(c) => threshold_soft(h, c),
        ThresholdRule::Order(r) => threshold_order(h, r),
    }
}

/// Localize hot-spots from a fit at period `t_star`.
pub fn localize(fit: &ModelFit, t_star: usize, rule: ThresholdRule, labels: Option<&AxisLabels>) -> Result<HotspotReport> {
    let h = hotspot_slice(fit, t_star)?;
    Ok(report_from_slice(&h, t_star, rule, labels))
}

/// Build a report from an already extracted slice.
pub fn report_from_slice(h: &Matrix, t_star: usize, rule: ThresholdRule, labels: Option<&AxisLabels>) -> HotspotReport {
    HotspotReport {
        t_star,
        rule,
        cells: apply_rule(h, rule),
        location_labels: labels.map(|l| l.locations.clone()).unwrap_or_default(),
        category_labels: labels.map(|l| l.categories.clone()).unwrap_or_default(),
    }
}
