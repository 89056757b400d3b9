//! Leak sizing from the leak-affected range.
//!
//! A linear model `range = a * ratio + b` links the affected range to the
//! leak-to-pipe Reynolds ratio. Inverting it and closing with the orifice
//! equation gives the orifice diameter, leak flow and leak level.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::{widest_run, ProbabilityMap};
use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::fsio::{atomic_write_text, read_text};
use crate::hydraulics::{classify_leak_level, jet_velocity, reynolds_pipe, LeakLevel, PipeSpec};

/// Duration over which the affected range is averaged (s).
pub const DEFAULT_RANGE_WINDOW_S: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeModel {
    /// Metres per unit Reynolds ratio.
    pub a: f64,
    /// Metres.
    pub b: f64,
    pub r_squared: f64,
    pub fit_case_ids: Vec<String>,
}

impl RangeModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("range model serialises") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write_text(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: RangeModel =
            serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, format!("invalid range model: {e}")))?;
        if ![m.a, m.b, m.r_squared].iter().all(|v| v.is_finite()) {
            return Err(Error::format(path, "range model holds non-finite coefficients"));
        }
        Ok(m)
    }

    pub fn predict_range(&self, ratio: f64) -> f64 {
        self.a * ratio + self.b
    }
}

/// Ordinary least squares `range = a * ratio + b` over `(range, ratio)` pairs.
pub fn fit_range_model(pairs: &[(f64, f64)], case_ids: &[String]) -> Result<RangeModel> {
    if pairs.len() < 2 {
        return Err(Error::domain("range model needs at least two (range, ratio) pairs"));
    }
    for &(r, x) in pairs {
        ensure_finite("affected range", r)?;
        ensure_finite("Reynolds ratio", x)?;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.1 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.1 - mx) * (p.0 - my)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.0 - my).powi(2)).sum();
    if sxx <= 1e-12 * (1.0 + mx * mx) * n {
        return Err(Error::domain("Reynolds ratios have no spread; the range model is degenerate"));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let sse: f64 = pairs.iter().map(|p| (p.0 - a * p.1 - b).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RangeModel { a, b, r_squared, fit_case_ids: case_ids.to_vec() })
}

/// Widest above-threshold run in one map row, in metres.
pub fn row_affected_range(map: &ProbabilityMap, row: usize, threshold: f64) -> f64 {
    widest_run(map.row(row), threshold).map_or(0.0, |(s, e, _)| (e - s + 1) as f64 * map.spacing())
}

/// Mean per-window affected range over the most recent `window_s` seconds.
pub fn mean_affected_range(map: &ProbabilityMap, window_s: f64, threshold: f64) -> Result<f64> {
    ensure_positive("range window", window_s)?;
    let need = (window_s / map.window_duration - 1e-9).ceil() as usize;
    if map.rows() < need {
        return Err(Error::domain(format!(
            "map covers {} s, the affected range needs {window_s} s",
            map.rows() as f64 * map.window_duration
        )));
    }
    let start = map.rows() - need;
    Ok((start..map.rows()).map(|r| row_affected_range(map, r, threshold)).sum::<f64>() / need as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantifiedLeak {
    pub affected_range_m: f64,
    pub estimated_re_ratio: f64,
    /// Metres.
    pub estimated_orifice_diameter: f64,
    /// m³/s.
    pub estimated_leak_flow: f64,
    pub estimated_leak_ratio: f64,
    pub level: LeakLevel,
}

/// Inverts the range model and the orifice equation.
pub fn quantify(
    range_m: f64,
    model: &RangeModel,
    pipe: &PipeSpec,
    q_pipe: f64,
    gauge_pressure: f64,
    discharge_coefficient: f64,
) -> Result<QuantifiedLeak> {
    ensure_finite("affected range", range_m)?;
    if !(model.a > 0.0) {
        return Err(Error::domain(format!("range model slope {} is not positive", model.a)));
    }
    ensure_positive("gauge pressure", gauge_pressure)?;
    ensure_positive("discharge coefficient", discharge_coefficient)?;
    let re_pipe = reynolds_pipe(pipe, q_pipe)?;
    let ratio = ((range_m - model.b) / model.a).max(0.0);
    let v = jet_velocity(discharge_coefficient, gauge_pressure, pipe.water_density);
    let d = ratio * re_pipe * pipe.kinematic_viscosity / v;
    let q_leak = v * PI * d * d / 4.0;
    let leak_ratio = q_leak / q_pipe;
    Ok(QuantifiedLeak {
        affected_range_m: range_m,
        estimated_re_ratio: ratio,
        estimated_orifice_diameter: d,
        estimated_leak_flow: q_leak,
        estimated_leak_ratio: leak_ratio,
        level: classify_leak_level(leak_ratio)?,
    })
}

/// Confusion matrix over the three leaking levels. Rows are true levels and
/// columns predicted levels; `missed` counts leaks predicted as no-leak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub counts: [[usize; 3]; 3],
    pub missed: [usize; 3],
    /// Diagonal over row total, absent for empty rows.
    pub per_class_accuracy: [Option<f64>; 3],
    pub overall_accuracy: f64,
}

fn level_index(level: LeakLevel) -> Option<usize> {
    LeakLevel::LEAKING.iter().position(|&l| l == level)
}

pub fn truth_table(pairs: &[(LeakLevel, LeakLevel)]) -> Result<TruthTable> {
    if pairs.is_empty() {
        return Err(Error::domain("truth table needs at least one case"));
    }
    let mut counts = [[0usize; 3]; 3];
    let mut missed = [0usize; 3];
    for &(truth, pred) in pairs {
        let t = level_index(truth)
            .ok_or_else(|| Error::domain("no-leak cases do not belong in the leak-level truth table"))?;
        match level_index(pred) {
            Some(p) => counts[t][p] += 1,
            None => missed[t] += 1,
        }
    }
    let per_class_accuracy = std::array::from_fn(|i| {
        let total: usize = counts[i].iter().sum::<usize>() + missed[i];
        (total > 0).then(|| counts[i][i] as f64 / total as f64)
    });
    let correct: usize = (0..3).map(|i| counts[i][i]).sum();
    Ok(TruthTable { counts, missed, per_class_accuracy, overall_accuracy: correct as f64 / pairs.len() as f64 })
}

impl TruthTable {
    pub fn to_text(&self) -> String {
        let mut s = String::from("true \\ predicted   small  significant  excessive  no-leak  accuracy\n");
        for (i, level) in LeakLevel::LEAKING.iter().enumerate() {
            let acc = self.per_class_accuracy[i].map_or("-".to_string(), |a| format!("{:.2}%", a * 100.0));
            s += &format!(
                "{:<18}{:>6}{:>13}{:>11}{:>9}{:>10}\n",
                level.name(),
                self.counts[i][0],
                self.counts[i][1],
                self.counts[i][2],
                self.missed[i],
                acc
            );
        }
        s += &format!("overall accuracy {:.2}%\n", self.overall_accuracy * 100.0);
        s
    }
}
