//! Time-position leak probability maps, median profiles and leak findings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CubeLabel;
use crate::fsio::{atomic_write_text, read_text};

pub const DEFAULT_THRESHOLD: f64 = 0.9;
/// Median horizon used for leak declarations (s).
pub const DEFAULT_HORIZON_S: f64 = 210.0;

/// One cube prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub window: usize,
    pub channel: usize,
    pub probability: f64,
}

/// Leak probability per (window, channel); unscored channels are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    /// Source window index of every row, ascending.
    pub windows: Vec<usize>,
    /// Fibre position of every channel (m).
    pub positions: Vec<f64>,
    pub window_duration: f64,
    values: Vec<Option<f64>>,
}

impl ProbabilityMap {
    pub fn rows(&self) -> usize {
        self.windows.len()
    }

    pub fn channels(&self) -> usize {
        self.positions.len()
    }

    pub fn get(&self, row: usize, channel: usize) -> Option<f64> {
        self.values[row * self.channels() + channel]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        &self.values[row * self.channels()..(row + 1) * self.channels()]
    }

    pub fn spacing(&self) -> f64 {
        if self.positions.len() < 2 {
            0.0
        } else {
            (self.positions[self.positions.len() - 1] - self.positions[0]) / (self.positions.len() - 1) as f64
        }
    }

    /// Keeps only the last `n` rows.
    pub fn tail(&self, n: usize) -> ProbabilityMap {
        let start = self.rows().saturating_sub(n);
        ProbabilityMap {
            windows: self.windows[start..].to_vec(),
            positions: self.positions.clone(),
            window_duration: self.window_duration,
            values: self.values[start * self.channels()..].to_vec(),
        }
    }
}

/// Builds a map from predictions covering a rectangular (window x channel)
/// grid. Identical duplicates are merged; conflicting ones are an error.
pub fn assemble_map(predictions: &[Prediction], positions: &[f64], window_duration: f64) -> Result<ProbabilityMap> {
    if predictions.is_empty() {
        return Err(Error::domain("no predictions to assemble"));
    }
    if !(window_duration > 0.0) {
        return Err(Error::domain("window duration must be positive"));
    }
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for p in predictions {
        if !(0.0..=1.0).contains(&p.probability) {
            return Err(Error::domain(format!(
                "probability {} at window {} channel {} is outside [0, 1]",
                p.probability, p.window, p.channel
            )));
        }
        if p.channel >= positions.len() {
            return Err(Error::domain(format!("channel {} outside a {}-channel fibre", p.channel, positions.len())));
        }
        if let Some(&prev) = cells.get(&(p.window, p.channel)) {
            if prev != p.probability {
                return Err(Error::domain(format!(
                    "conflicting predictions {prev} and {} at window {} channel {}",
                    p.probability, p.window, p.channel
                )));
            }
        }
        cells.insert((p.window, p.channel), p.probability);
    }
    let windows: Vec<usize> = cells.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();
    let channels: BTreeSet<usize> = cells.keys().map(|k| k.1).collect();
    if cells.len() != windows.len() * channels.len() {
        return Err(Error::domain(format!(
            "predictions do not cover a rectangular grid: {} cells for {} windows x {} channels",
            cells.len(),
            windows.len(),
            channels.len()
        )));
    }
    let n = positions.len();
    let mut values = vec![None; windows.len() * n];
    let row_of: BTreeMap<usize, usize> = windows.iter().enumerate().map(|(r, &w)| (w, r)).collect();
    for ((w, c), p) in cells {
        values[row_of[&w] * n + c] = Some(p);
    }
    Ok(ProbabilityMap { windows, positions: positions.to_vec(), window_duration, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianProfile {
    pub values: Vec<Option<f64>>,
    pub positions: Vec<f64>,
    pub windows_used: usize,
    /// The requested horizon was longer than the map and was clamped.
    pub clamped: bool,
}

/// Lower median of `v` (which must be non-empty).
fn lower_median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Per-channel median over the most recent `ceil(horizon / window)` rows.
pub fn median_profile(map: &ProbabilityMap, horizon_s: f64) -> Result<MedianProfile> {
    if !(horizon_s >= map.window_duration) {
        return Err(Error::domain(format!("median horizon {horizon_s} s is shorter than one window")));
    }
    let wanted = (horizon_s / map.window_duration - 1e-9).ceil() as usize;
    let used = wanted.min(map.rows());
    let start = map.rows() - used;
    let values = (0..map.channels())
        .map(|c| {
            let mut col: Vec<f64> = (start..map.rows()).filter_map(|r| map.get(r, c)).collect();
            (!col.is_empty()).then(|| lower_median(&mut col))
        })
        .collect();
    Ok(MedianProfile { values, positions: map.positions.clone(), windows_used: used, clamped: wanted > map.rows() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakFinding {
    pub declared: bool,
    /// Channel span of the selected run, inclusive.
    pub run: Option<(usize, usize)>,
    /// Run extent including half a channel spacing on either side (m).
    pub affected_range: Option<(f64, f64)>,
    pub center: Option<f64>,
    pub peak_median_probability: Option<f64>,
}

/// Contiguous runs `(first, last, peak)` of entries above `threshold`.
pub fn runs_above(values: &[Option<f64>], threshold: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let mut cur: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        match (*v, cur) {
            (Some(p), None) if p > threshold => cur = Some((i, p)),
            (Some(p), Some((s, peak))) if p > threshold => cur = Some((s, peak.max(p))),
            (_, Some((s, peak))) => {
                out.push((s, i - 1, peak));
                cur = None;
            }
            _ => {}
        }
    }
    if let Some((s, peak)) = cur {
        out.push((s, values.len() - 1, peak));
    }
    out
}

/// Widest run, ties broken by higher peak, then leftmost.
pub fn widest_run(values: &[Option<f64>], threshold: f64) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for r in runs_above(values, threshold) {
        let better = match best {
            None => true,
            Some(b) => (r.1 - r.0, r.2) > (b.1 - b.0, b.2),
        };
        if better {
            best = Some(r);
        }
    }
    best
}

pub fn find_leak(profile: &MedianProfile, threshold: f64) -> LeakFinding {
    let peak_all = profile.values.iter().flatten().copied().fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
    match widest_run(&profile.values, threshold) {
        None => LeakFinding { declared: false, run: None, affected_range: None, center: None, peak_median_probability: peak_all },
        Some((s, e, peak)) => {
            let pos = &profile.positions;
            let half = if pos.len() > 1 { (pos[pos.len() - 1] - pos[0]) / (pos.len() - 1) as f64 / 2.0 } else { 0.0 };
            LeakFinding {
                declared: true,
                run: Some((s, e)),
                affected_range: Some((pos[s] - half, pos[e] + half)),
                center: Some((pos[s] + pos[e]) / 2.0),
                peak_median_probability: Some(peak),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub leak_cubes: usize,
    pub non_leak_cubes: usize,
    pub true_positives: usize,
    pub false_alarms: usize,
    /// Absent when there are no leak cubes.
    pub tpr: Option<f64>,
    /// Absent when there are no non-leak cubes.
    pub far: Option<f64>,
    /// Absent unless both a true leak and a declared finding exist.
    pub location_error_m: Option<f64>,
}

/// Per-cube TPR/FAR at `threshold` plus the localisation error of `finding`.
pub fn score_metrics(
    cubes: &[(CubeLabel, f64)],
    finding: Option<&LeakFinding>,
    true_position: Option<f64>,
    threshold: f64,
) -> DetectionMetrics {
    let leak: Vec<f64> = cubes.iter().filter(|c| c.0 == CubeLabel::Leak).map(|c| c.1).collect();
    let non: Vec<f64> = cubes.iter().filter(|c| c.0 == CubeLabel::NonLeak).map(|c| c.1).collect();
    let tp = leak.iter().filter(|&&p| p > threshold).count();
    let fa = non.iter().filter(|&&p| p > threshold).count();
    let ratio = |k: usize, n: usize| (n > 0).then(|| k as f64 / n as f64);
    let location_error_m = match (finding.and_then(|f| f.center), true_position) {
        (Some(c), Some(t)) => Some((c - t).abs()),
        _ => None,
    };
    DetectionMetrics {
        leak_cubes: leak.len(),
        non_leak_cubes: non.len(),
        true_positives: tp,
        false_alarms: fa,
        tpr: ratio(tp, leak.len()),
        far: ratio(fa, non.len()),
        location_error_m,
    }
}

/// JSON report of one case's detection result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub case_id: String,
    pub tpr: Option<f64>,
    pub far: Option<f64>,
    pub location_error_m: Option<f64>,
    pub affected_range_m: Option<(f64, f64)>,
    pub center_m: Option<f64>,
    pub declared: bool,
    pub median_windows: usize,
    pub median_horizon_clamped: bool,
}

impl DetectionReport {
    pub fn new(case_id: &str, metrics: &DetectionMetrics, finding: &LeakFinding, profile: &MedianProfile) -> Self {
        DetectionReport {
            case_id: case_id.to_string(),
            tpr: metrics.tpr,
            far: metrics.far,
            location_error_m: metrics.location_error_m,
            affected_range_m: finding.affected_range,
            center_m: finding.center,
            declared: finding.declared,
            median_windows: profile.windows_used,
            median_horizon_clamped: profile.clamped,
        }
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|p| p.to_string()).unwrap_or_default()
}

/// CSV text: a duration comment, a header of channel positions, one row per
/// window keyed by its start time, and the median profile as a final
/// comment row.
pub fn map_to_csv(map: &ProbabilityMap, profile: Option<&MedianProfile>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# window_duration_s,{}", map.window_duration);
    let header: Vec<String> = map.positions.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(s, "window_start_s,{}", header.join(","));
    for r in 0..map.rows() {
        let cells: Vec<String> = map.row(r).iter().map(|&v| fmt_cell(v)).collect();
        let _ = writeln!(s, "{},{}", map.windows[r] as f64 * map.window_duration, cells.join(","));
    }
    if let Some(p) = profile {
        let cells: Vec<String> = p.values.iter().map(|&v| fmt_cell(v)).collect();
        let _ = writeln!(s, "# median,{}", cells.join(","));
    }
    s
}

pub fn write_map_csv(path: &Path, map: &ProbabilityMap, profile: Option<&MedianProfile>) -> Result<()> {
    atomic_write_text(path, &map_to_csv(map, profile))
}

pub fn read_map_csv(path: &Path) -> Result<ProbabilityMap> {
    let text = read_text(path)?;
    parse_map_csv(&text).map_err(|reason| Error::format(path, reason))
}

pub fn parse_map_csv(text: &str) -> std::result::Result<ProbabilityMap, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}"));
    let mut duration = None;
    let mut positions: Option<Vec<f64>> = None;
    let mut windows = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# window_duration_s,") {
            duration = Some(num(rest)?);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',');
        let first = cells.next().unwrap_or_default();
        match &positions {
            None => {
                if first != "window_start_s" {
                    return Err(format!("line {}: expected the position header", ln + 1));
                }
                positions = Some(cells.map(num).collect::<std::result::Result<_, _>>()?);
            }
            Some(pos) => {
                let d = duration.ok_or("missing window duration comment")?;
                let start = num(first)?;
                windows.push((start / d).round() as usize);
                let row: Vec<Option<f64>> = cells
                    .map(|c| if c.trim().is_empty() { Ok(None) } else { num(c).map(Some) })
                    .collect::<std::result::Result<_, _>>()?;
                if row.len() != pos.len() {
                    return Err(format!("line {}: {} cells for {} channels", ln + 1, row.len(), pos.len()));
                }
                if row.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(format!("line {}: probability outside [0, 1]", ln + 1));
                }
                values.extend(row);
            }
        }
    }
    let positions = positions.ok_or("missing header")?;
    let window_duration = duration.ok_or("missing window duration comment")?;
    if windows.windows(2).any(|w| w[1] <= w[0]) {
        return Err("window rows are not strictly increasing".into());
    }
    Ok(ProbabilityMap { windows, positions, window_duration, values })
}
