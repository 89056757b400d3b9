//! Stage helpers shared by the command-line tool and the end-to-end checks:
//! case selection, the per-window train/test split, feature extraction per
//! case, batched scoring, per-case evaluation and quantification.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::detect::{
    assemble_map, find_leak, median_profile, score_metrics, DetectionMetrics, DetectionReport, LeakFinding,
    MedianProfile, Prediction, ProbabilityMap,
};
use crate::error::{Error, Result};
use crate::features::{cube_label, is_training_position, window_count, CubeLabel, FeatureCube, MelExtractor, SpectrogramGrid};
use crate::hydraulics::{classify_leak_level, jet_velocity, FlowState, LeakLevel, LeakSpec};
use crate::nn::{Model, Score};
use crate::quantify::{fit_range_model, mean_affected_range, quantify, QuantifiedLeak, RangeModel};
use crate::rng::{mix_seed, Stream};
use crate::scalar::Real;
use crate::sim::{default_cases, CaseSpec, CaseTruth, DasRecording};

/// Cubes scored per forward pass.
pub const SCORE_BATCH: usize = 16;

/// The configured cases, in case-matrix order.
pub fn selected_cases(cfg: &ExperimentConfig) -> Result<Vec<CaseSpec>> {
    let all = default_cases(cfg.dataset.duration_s, cfg.run.seed, &cfg.pipe, cfg.layout.leak_position);
    if cfg.dataset.cases.is_empty() {
        return Ok(all);
    }
    for id in &cfg.dataset.cases {
        if !all.iter().any(|c| &c.case_id == id) {
            return Err(Error::Config(format!("unknown case id {id:?}")));
        }
    }
    Ok(all.into_iter().filter(|c| cfg.dataset.cases.contains(&c.case_id)).collect())
}

fn id_hash(case_id: &str) -> u64 {
    let d = Sha256::digest(case_id.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 8 bytes"))
}

/// Held-out windows of one case: exactly `round(fraction * windows)` of
/// them, chosen by a seeded hash of (case id, window), ascending.
pub fn test_windows(case_id: &str, windows: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let n_test = (fraction * windows as f64).round() as usize;
    let base = seed ^ id_hash(case_id);
    let mut keyed: Vec<(u64, usize)> = (0..windows).map(|w| (mix_seed(base, Stream::Split, w as u64), w)).collect();
    keyed.sort_unstable();
    let mut out: Vec<usize> = keyed[..n_test.min(windows)].iter().map(|k| k.1).collect();
    out.sort_unstable();
    out
}

/// Windows a case of this truth yields under `cfg`.
pub fn windows_of(truth: &CaseTruth, cfg: &ExperimentConfig) -> usize {
    let samples = (truth.case.duration * cfg.das.sampling_rate).round() as usize;
    window_count(samples, cfg.das.sampling_rate, &cfg.features)
}

/// Spectrograms and split of one case.
pub struct CaseFeatures {
    pub truth: CaseTruth,
    pub grid: SpectrogramGrid<f32>,
    pub test_windows: Vec<usize>,
}

impl CaseFeatures {
    /// Computes spectrograms for `windows` (all when `None`).
    pub fn new(rec: &DasRecording, cfg: &ExperimentConfig, windows: Option<&[usize]>) -> Result<Self> {
        let truth = rec.truth.clone().ok_or_else(|| Error::domain("recording carries no ground truth"))?;
        let extractor = MelExtractor::<f32>::new(cfg.features, rec.config.sampling_rate)?;
        let grid = SpectrogramGrid::from_recording_windows(rec, &extractor, windows)?;
        let test_windows = test_windows(&truth.case.case_id, grid.windows, cfg.split.test_fraction, cfg.run.seed);
        Ok(CaseFeatures { truth, grid, test_windows })
    }

    pub fn case_id(&self) -> &str {
        &self.truth.case.case_id
    }

    pub fn train_windows(&self) -> Vec<usize> {
        (0..self.grid.windows).filter(|w| !self.test_windows.contains(w)).collect()
    }

    /// Labelled cubes of every scored channel in `windows`.
    pub fn cubes(&self, windows: &[usize], z: usize, halo: f64) -> Result<Vec<FeatureCube<f32>>> {
        let mut out = Vec::new();
        for &w in windows {
            for c in self.grid.scored_channels(z) {
                let mut cube = self.grid.cube(w, c, z)?;
                cube.label = Some(cube_label(&self.truth, c, halo));
                out.push(cube);
            }
        }
        Ok(out)
    }

    /// Labelled cubes at training positions in the training windows.
    pub fn training_cubes(&self, z: usize, halo: f64) -> Result<Vec<FeatureCube<f32>>> {
        let mut cubes = self.cubes(&self.train_windows(), z, halo)?;
        cubes.retain(|c| is_training_position(&self.truth, c.center_channel, halo));
        Ok(cubes)
    }
}

/// Scores cubes in parallel batches; output order follows the input.
pub fn score_cubes<T: Real>(model: &Model<T>, cubes: &[FeatureCube<T>]) -> Result<Vec<Score>> {
    let refs: Vec<&FeatureCube<T>> = cubes.iter().collect();
    let parts: Vec<Result<Vec<Score>>> = refs.par_chunks(SCORE_BATCH).map(|chunk| model.score(chunk, SCORE_BATCH)).collect();
    let mut out = Vec::with_capacity(cubes.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Detection results for one case.
#[derive(Debug, Clone)]
pub struct CaseEvaluation {
    pub truth: CaseTruth,
    pub map: ProbabilityMap,
    pub profile: MedianProfile,
    pub finding: LeakFinding,
    pub metrics: DetectionMetrics,
    /// Label and score of every evaluated cube, in input order.
    pub scores: Vec<(CubeLabel, Score)>,
}

impl CaseEvaluation {
    pub fn case_id(&self) -> &str {
        &self.truth.case.case_id
    }

    pub fn report(&self) -> DetectionReport {
        DetectionReport::new(self.case_id(), &self.metrics, &self.finding, &self.profile)
    }
}

/// Builds map, median profile, finding and metrics from scored cubes.
pub fn evaluate_scored(
    truth: &CaseTruth,
    cubes: &[FeatureCube<f32>],
    scores: &[Score],
    cfg: &ExperimentConfig,
) -> Result<CaseEvaluation> {
    if cubes.len() != scores.len() {
        return Err(Error::shape(format!("{} scores for {} cubes", scores.len(), cubes.len())));
    }
    let halo = cfg.split.leak_halo_m;
    let preds: Vec<Prediction> = cubes
        .iter()
        .zip(scores)
        .map(|(c, s)| Prediction { window: c.window_index, channel: c.center_channel, probability: s.probability })
        .collect();
    // rounded to the micrometre so the CSV header stays readable
    let positions: Vec<f64> =
        (0..truth.position_tags.len()).map(|c| (c as f64 * truth.channel_spacing * 1e6).round() / 1e6).collect();
    let map = assemble_map(&preds, &positions, cfg.features.segment_length)?;
    let profile = median_profile(&map, cfg.detect.median_horizon_s)?;
    let finding = find_leak(&profile, cfg.detect.threshold);
    let labelled: Vec<(CubeLabel, Score)> =
        cubes.iter().zip(scores).map(|(c, &s)| (cube_label(truth, c.center_channel, halo), s)).collect();
    let plain: Vec<(CubeLabel, f64)> = labelled.iter().map(|(l, s)| (*l, s.probability)).collect();
    let metrics = score_metrics(&plain, Some(&finding), truth.leak_position_m, cfg.detect.threshold);
    Ok(CaseEvaluation { truth: truth.clone(), map, profile, finding, metrics, scores: labelled })
}

pub fn evaluate_cubes(
    model: &Model<f32>,
    truth: &CaseTruth,
    cubes: &[FeatureCube<f32>],
    cfg: &ExperimentConfig,
) -> Result<CaseEvaluation> {
    let scores = score_cubes(model, cubes)?;
    evaluate_scored(truth, cubes, &scores, cfg)
}

/// One row of the per-case summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub case_id: String,
    pub pipe_flow_lps: f64,
    pub leak_ratio_pct: f64,
    pub re_ratio: f64,
    pub detection: DetectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Pooled over every leak-labelled cube.
    pub aggregate_tpr: Option<f64>,
    /// Pooled over the non-leak cubes of no-leak cases.
    pub aggregate_far: Option<f64>,
}

fn pooled(evals: &[CaseEvaluation], label: CubeLabel, only_no_leak: bool, threshold: f64) -> Option<f64> {
    let mut n = 0usize;
    let mut hit = 0usize;
    for e in evals.iter().filter(|e| !only_no_leak || !e.truth.is_leak()) {
        for (l, s) in &e.scores {
            if *l == label {
                n += 1;
                hit += usize::from(s.probability > threshold);
            }
        }
    }
    (n > 0).then(|| hit as f64 / n as f64)
}

impl Summary {
    pub fn new(evals: &[CaseEvaluation], threshold: f64) -> Self {
        let rows = evals
            .iter()
            .map(|e| SummaryRow {
                case_id: e.case_id().to_string(),
                pipe_flow_lps: e.truth.case.flow.pipe_flow_rate * 1e3,
                leak_ratio_pct: e.truth.case.flow.leak_ratio() * 100.0,
                re_ratio: e.truth.re_ratio,
                detection: e.report(),
            })
            .collect();
        Summary {
            rows,
            aggregate_tpr: pooled(evals, CubeLabel::Leak, false, threshold),
            aggregate_far: pooled(evals, CubeLabel::NonLeak, true, threshold),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises") + "\n"
    }

    pub fn to_text(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}", v * 100.0));
        let m = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        let mut s = String::from("case     flow(L/s)  leak(%)  Re-ratio  TPR(%)  FAR(%)  declared  center(m)  error(m)\n");
        for r in &self.rows {
            let d = &r.detection;
            s += &format!(
                "{:<8} {:>9.3} {:>8.1} {:>9.2} {:>7} {:>7} {:>9} {:>10} {:>9}\n",
                r.case_id,
                r.pipe_flow_lps,
                r.leak_ratio_pct,
                r.re_ratio,
                pct(d.tpr),
                pct(d.far),
                d.declared,
                m(d.center_m),
                m(d.location_error_m)
            );
        }
        s += &format!("aggregate TPR {}%  FAR {}%\n", pct(self.aggregate_tpr), pct(self.aggregate_far));
        s
    }
}

/// TPR at the loosest margin threshold whose FAR does not exceed `far`.
///
/// Thresholds run over the observed non-leak margins, so ties in saturated
/// probabilities do not matter.
pub fn tpr_at_far(leak: &[f64], non_leak: &[f64], far: f64) -> Option<(f64, f64)> {
    if leak.is_empty() || non_leak.is_empty() {
        return None;
    }
    let mut neg = non_leak.to_vec();
    neg.sort_by(|a, b| b.total_cmp(a));
    let allowed = (far * neg.len() as f64).floor() as usize;
    // `allowed` negatives may lie strictly above the threshold
    let threshold = neg[allowed.min(neg.len() - 1)];
    let realised = neg.iter().filter(|&&v| v > threshold).count() as f64 / neg.len() as f64;
    let tpr = leak.iter().filter(|&&v| v > threshold).count() as f64 / leak.len() as f64;
    Some((tpr, realised))
}

/// Affected range of a map over the configured window.
pub fn map_range(map: &ProbabilityMap, cfg: &ExperimentConfig) -> Result<f64> {
    mean_affected_range(map, cfg.quantify.range_window_s, cfg.detect.threshold)
}

/// Fits the range model over the leak cases among `cases`.
pub fn fit_maps(cases: &[(&ProbabilityMap, &CaseTruth)], cfg: &ExperimentConfig) -> Result<RangeModel> {
    let mut pairs = Vec::new();
    let mut ids = Vec::new();
    for (map, truth) in cases.iter().filter(|c| c.1.is_leak()) {
        pairs.push((map_range(map, cfg)?, truth.re_ratio));
        ids.push(truth.case.case_id.clone());
    }
    fit_range_model(&pairs, &ids)
}

/// Hydraulic inputs of a case: pipe flow and gauge pressure.
pub fn hydraulic_inputs(truth: &CaseTruth, cfg: &ExperimentConfig) -> (f64, f64) {
    let p = truth.case.leak.map_or(cfg.quantify.gauge_pressure, |l| l.gauge_pressure);
    (truth.case.flow.pipe_flow_rate, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantReport {
    pub case_id: String,
    pub true_leak_ratio: f64,
    pub true_level: LeakLevel,
    pub estimate: QuantifiedLeak,
}

impl QuantReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }
}

pub fn quantify_map(map: &ProbabilityMap, truth: &CaseTruth, model: &RangeModel, cfg: &ExperimentConfig) -> Result<QuantReport> {
    let (q_pipe, p) = hydraulic_inputs(truth, cfg);
    let estimate = quantify(map_range(map, cfg)?, model, &cfg.pipe, q_pipe, p, cfg.quantify.discharge_coefficient)?;
    let true_leak_ratio = truth.case.flow.leak_ratio();
    Ok(QuantReport {
        case_id: truth.case.case_id.clone(),
        true_leak_ratio,
        true_level: classify_leak_level(true_leak_ratio)?,
        estimate,
    })
}

/// Randomised leak cases for a quantification sweep.
///
/// Pipe flow is uniform on `flow_lps`, the leak ratio log-uniform on
/// `ratio`, gauge pressure uniform on `pressure_pa`; draws whose Reynolds
/// ratio falls outside `re_ratio` are rejected. Durations equal the range
/// window.
pub fn sweep_cases(
    n: usize,
    cfg: &ExperimentConfig,
    flow_lps: (f64, f64),
    ratio: (f64, f64),
    pressure_pa: (f64, f64),
    re_ratio: (f64, f64),
) -> Result<Vec<CaseSpec>> {
    if !(ratio.0 > 0.0 && ratio.0 <= ratio.1 && ratio.1 < 1.0) {
        return Err(Error::domain("sweep leak ratios must lie in (0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.run.seed, Stream::Sweep, 0));
    let cd = cfg.quantify.discharge_coefficient;
    let mut out = Vec::with_capacity(n);
    let mut draws = 0usize;
    while out.len() < n {
        draws += 1;
        if draws > 1000 * n.max(1) {
            return Err(Error::domain("sweep bounds reject nearly every draw"));
        }
        let q = rng.random_range(flow_lps.0..=flow_lps.1) * 1e-3;
        let r = (rng.random_range(ratio.0.ln()..=ratio.1.ln())).exp();
        let p = rng.random_range(pressure_pa.0..=pressure_pa.1);
        let q_leak = r * q;
        let v = jet_velocity(cd, p, cfg.pipe.water_density);
        let d = (4.0 * q_leak / (PI * v)).sqrt();
        let re = r * cfg.pipe.internal_diameter / d;
        if !(re_ratio.0..=re_ratio.1).contains(&re) {
            continue;
        }
        let i = out.len();
        out.push(CaseSpec {
            case_id: format!("sweep{:03}", i + 1),
            flow: FlowState { pipe_flow_rate: q, leak_flow_rate: q_leak },
            leak: Some(LeakSpec { discharge_coefficient: cd, ..LeakSpec::new(d, cfg.layout.leak_position, p) }),
            duration: cfg.quantify.range_window_s,
            seed: mix_seed(cfg.run.seed, Stream::Sweep, i as u64 + 1),
        });
    }
    Ok(out)
}
