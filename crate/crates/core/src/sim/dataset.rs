use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::format::{truth_path, write_recording, write_truth, RECORDING_EXT};
use super::{simulate_case, CaseSpec, DasConfig, SignalModel, TestbedLayout};
use crate::error::{Error, Result};
use crate::fsio::{atomic_write_text, read_text, sha256_hex};
use crate::hydraulics::{pressure_for_flow, FlowState, LeakSpec, PipeSpec, DEFAULT_DISCHARGE_COEFFICIENT};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Testbed case matrix: (pipe flow L/s, leak flow L/s, orifice mm).
const CASE_MATRIX: [(f64, Option<(f64, f64)>); 11] = [
    (0.427, Some((0.319, 3.72))),
    (0.427, Some((0.261, 3.36))),
    (0.427, Some((0.102, 2.15))),
    (1.800, Some((0.399, 4.63))),
    (1.800, Some((0.257, 3.72))),
    (1.800, Some((0.209, 3.36))),
    (0.427, Some((0.034, 1.22))),
    (1.800, Some((0.084, 2.15))),
    (1.800, Some((0.027, 1.22))),
    (0.427, None),
    (1.800, None),
];

/// The eleven testbed cases at `duration` seconds each.
///
/// Gauge pressure per leak case is back-solved from the orifice equation so
/// that the stated orifice and leak flow are hydraulically consistent.
pub fn default_cases(duration: f64, base_seed: u64, pipe: &PipeSpec, leak_position: f64) -> Vec<CaseSpec> {
    CASE_MATRIX
        .iter()
        .enumerate()
        .map(|(i, &(q_pipe, leak))| {
            let pipe_flow_rate = q_pipe * 1e-3;
            let (flow, leak) = match leak {
                Some((q_leak, d_mm)) => {
                    let q = q_leak * 1e-3;
                    let d = d_mm * 1e-3;
                    let p = pressure_for_flow(q, d, DEFAULT_DISCHARGE_COEFFICIENT, pipe.water_density)
                        .expect("case matrix values are positive");
                    (FlowState { pipe_flow_rate, leak_flow_rate: q }, Some(LeakSpec::new(d, leak_position, p)))
                }
                None => (FlowState { pipe_flow_rate, leak_flow_rate: 0.0 }, None),
            };
            CaseSpec {
                case_id: format!("case{:02}", i + 1),
                flow,
                leak,
                duration,
                seed: base_seed.wrapping_add(i as u64 + 1),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub case_id: String,
    pub recording: String,
    pub truth: String,
    pub seed: u64,
    pub duration_s: f64,
    pub pipe_flow_rate: f64,
    pub leak_flow_rate: f64,
    pub leak_ratio: f64,
    pub orifice_diameter: Option<f64>,
    pub gauge_pressure: Option<f64>,
    pub re_ratio: f64,
    pub recording_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Manifest {
    pub entries: Vec<DatasetEntry>,
}

/// Simulates every case into `out_dir`: `<case_id>.dasr`, `<case_id>.truth`
/// and `manifest.json`.
pub fn build_dataset(
    cases: &[CaseSpec],
    config: &DasConfig,
    model: &SignalModel,
    pipe: &PipeSpec,
    layout: &TestbedLayout,
    out_dir: &Path,
) -> Result<Manifest> {
    if cases.is_empty() {
        return Err(Error::domain("dataset needs at least one case"));
    }
    let mut seen = HashSet::new();
    for c in cases {
        c.validate(pipe)?;
        if !seen.insert(c.case_id.as_str()) {
            return Err(Error::domain(format!("duplicate case id {}", c.case_id)));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifest = Manifest::default();
    for case in cases {
        let rec = simulate_case(case, config, model, pipe, layout)?;
        let name = format!("{}.{RECORDING_EXT}", case.case_id);
        let path = out_dir.join(&name);
        write_recording(&path, &rec)?;
        let truth = rec.truth.as_ref().expect("simulated recordings carry truth");
        let tpath = truth_path(&path);
        write_truth(&tpath, truth)?;
        let digest = sha256_hex(&fs::read(&path).map_err(|e| Error::io(&path, e))?);
        manifest.entries.push(DatasetEntry {
            case_id: case.case_id.clone(),
            recording: name,
            truth: tpath.file_name().unwrap().to_string_lossy().into_owned(),
            seed: case.seed,
            duration_s: case.duration,
            pipe_flow_rate: case.flow.pipe_flow_rate,
            leak_flow_rate: case.flow.leak_flow_rate,
            leak_ratio: case.flow.leak_ratio(),
            orifice_diameter: case.leak.map(|l| l.orifice_diameter),
            gauge_pressure: case.leak.map(|l| l.gauge_pressure),
            re_ratio: truth.re_ratio,
            recording_sha256: digest,
        });
    }
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    atomic_write_text(&out_dir.join(MANIFEST_FILE), &(text + "\n"))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = read_text(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, format!("invalid manifest: {e}")))
}
