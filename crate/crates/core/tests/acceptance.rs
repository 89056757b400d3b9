//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use fiberleak::config::ExperimentConfig;
use fiberleak::detect::ProbabilityMap;
use fiberleak::features::{
    read_cube_file, stack_cubes, write_cube_file, CubeLabel, FeatureCube, MelExtractor, SpectrogramGrid, Stft,
};
use fiberleak::hydraulics::{classify_leak_level, reynolds_leak, reynolds_pipe, LeakLevel, PipeSpec};
use fiberleak::nn::{load_checkpoint, save_checkpoint, train, ArchitectureSpec, Mode, Model, ParamKind, Tensor, Variant};
use fiberleak::pipeline::{
    evaluate_cubes, fit_maps, quantify_map, score_cubes, selected_cases, sweep_cases, test_windows, tpr_at_far,
    windows_of, CaseEvaluation, CaseFeatures, Summary,
};
use fiberleak::quantify::{quantify, truth_table, RangeModel};
use fiberleak::sim::{
    default_cases, read_recording, simulate_case, synth_transient, write_recording, CaseSpec, DasRecording,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// criterion 1
const RE_PIPE_TOL: f64 = 0.005;
const RE_LEAK_TOL: f64 = 0.02;
const RE_RATIO_TOL: f64 = 0.05;
const REYNOLDS_BUDGET_S: f64 = 1.0;
// criterion 2
const GEOMETRY_BUDGET_S: f64 = 10.0;
// criterion 3
const FD_STEP: f64 = 1e-3;
const FD_TOL: f64 = 1e-4;
const GRADIENT_BUDGET_S: f64 = 120.0;
// criterion 4
const STFT_TOL: f64 = 1e-5;
// criterion 5
const EXCESSIVE_TPR_MIN: f64 = 0.85;
const NO_LEAK_FAR_MAX: f64 = 0.03;
const LOCATION_ERROR_MAX_M: f64 = 3.0;
const END_TO_END_BUDGET_S: f64 = 1800.0;
const SMALLEST_CASE: &str = "case09";
// criterion 6
const EQUAL_FAR: f64 = 0.01;
// criterion 7
const TRANSIENT_CASE_S: f64 = 210.0;
const TRANSIENT_SITE_RADIUS_M: f64 = 3.0;
// criterion 8
const RANGE_FIT_R2_MIN: f64 = 0.99;
const SWEEP_CASES: usize = 60;
const SWEEP_ACCURACY_MIN: f64 = 0.85;
const INVERSION_TOL: f64 = 1e-6;

/// Training settings for a single-core desk run.
fn desk_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.train.batch_size = 32;
    cfg.train.epochs = 5;
    cfg.train.patience = 3;
    cfg
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// Reference testbed rows: pipe flow, leak flow (L/s), orifice (mm), pipe Re, leak Re, Re ratio.
const TABLE: [(f64, f64, f64, f64, f64, f64); 9] = [
    (0.427, 0.319, 3.72, 10837.0, 108987.0, 10.06),
    (0.427, 0.261, 3.36, 10837.0, 98657.0, 9.10),
    (0.427, 0.102, 2.15, 10837.0, 60418.0, 5.58),
    (1.800, 0.399, 4.63, 45674.0, 109347.0, 2.39),
    (1.800, 0.257, 3.72, 45674.0, 87663.0, 1.92),
    (1.800, 0.209, 3.36, 45674.0, 78918.0, 1.73),
    (0.427, 0.034, 1.22, 10837.0, 35233.0, 3.25),
    (1.800, 0.084, 2.15, 45674.0, 49696.0, 1.09),
    (1.800, 0.027, 1.22, 45674.0, 28445.0, 0.62),
];

fn reynolds_table() -> Outcome {
    let t0 = Instant::now();
    let pipe = PipeSpec::default();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for &(q, ql, d, re_p, re_l, ratio) in &TABLE {
        let p = reynolds_pipe(&pipe, q * 1e-3).unwrap();
        let l = reynolds_leak(&pipe, ql * 1e-3, d * 1e-3).unwrap();
        worst.0 = worst.0.max((p / re_p - 1.0).abs());
        worst.1 = worst.1.max((l / re_l - 1.0).abs());
        worst.2 = worst.2.max((l / p - ratio).abs());
    }
    for q in [0.427, 1.8] {
        let re = reynolds_pipe(&pipe, q * 1e-3).unwrap();
        let want = if q < 1.0 { 10837.0 } else { 45674.0 };
        worst.0 = worst.0.max((re / want - 1.0).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst.0 <= RE_PIPE_TOL && worst.1 <= RE_LEAK_TOL && worst.2 <= RE_RATIO_TOL && secs < REYNOLDS_BUDGET_S,
        format!(
            "worst pipe Re {:.3}%, leak Re {:.3}%, ratio {:.3} abs, {secs:.3} s",
            worst.0 * 100.0,
            worst.1 * 100.0,
            worst.2
        ),
    )
}

fn feature_geometry() -> Outcome {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default();
    let ex = MelExtractor::<f32>::new(cfg.features, cfg.das.sampling_rate).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clips: Vec<Vec<f32>> = (0..9).map(|_| (0..50_000).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let specs: Vec<_> = clips.iter().enumerate().map(|(c, x)| ex.extract_f32(x, c, 0).unwrap()).collect();
    let mut ok = ex.frames() == 98 && ex.bands() == 90 && specs.iter().all(|s| (s.bands, s.frames) == (90, 98));
    let grid = SpectrogramGrid::from_spectrograms(1, 9, specs).unwrap();
    let mut traces = Vec::new();
    for z in [3, 5, 7, 9] {
        let cubes = stack_cubes(&grid, z).unwrap();
        ok &= cubes.len() == 9 - 2 * (z / 2) && cubes.iter().all(|c| (c.bands, c.frames, c.depth) == (90, 98, z));
        for variant in [Variant::Cnn2d, Variant::Cnn3d] {
            match ArchitectureSpec::standard(variant, z).and_then(|s| s.trace()) {
                Ok(trace) => {
                    let last = trace.last().expect("four blocks");
                    ok &= trace.len() == 4 && trace.iter().all(|b| b.iter().all(|&n| n > 0));
                    if variant == Variant::Cnn3d {
                        traces.push(format!("Z={z}: {:?}", last));
                    }
                }
                Err(_) => ok = false,
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(ok && secs < GEOMETRY_BUDGET_S, format!("98 frames x 90 bands; last block {}; {secs:.2} s", traces.join(", ")))
}

/// Largest relative gap between backprop and central differences.
fn gradient_gap(variant: Variant) -> f64 {
    let spec = ArchitectureSpec::shrunken(variant);
    let mut model = Model::<f64>::new(spec.clone(), 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in model.params_mut() {
        if matches!(p.kind, ParamKind::ConvBias | ParamKind::BnBeta | ParamKind::DenseBias) {
            p.value.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        }
        if p.kind == ParamKind::BnGamma {
            p.value.data_mut().iter_mut().for_each(|v| *v = rng.random_range(0.6..1.4));
        }
        // batch norm makes the net invariant to kernel scale; larger kernels
        // keep max-pool and ReLU switches away from the finite-difference step
        if matches!(p.kind, ParamKind::ConvKernel | ParamKind::ConvBias) {
            p.value.data_mut().iter_mut().for_each(|v| *v *= 10.0);
        }
        if p.kind == ParamKind::DenseWeight {
            p.value.data_mut().iter_mut().for_each(|v| *v *= 4.0);
        }
    }
    let [h, w, d] = spec.input;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 2 * spec.input_len();
    let x = Tensor::new(vec![2, h, w, d, 1], (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let labels = [0, 1];
    let (l2, seed) = (0.003, Some(99));
    let analytic = model.loss_and_grads(&x, &labels, l2, Mode::Train, seed).unwrap().grads;
    let mut worst: f64 = 0.0;
    for pi in 0..model.params().len() {
        if !model.params()[pi].kind.trainable() {
            continue;
        }
        for e in 0..model.params()[pi].value.len() {
            let orig = model.params()[pi].value.data()[e];
            model.params_mut()[pi].value.data_mut()[e] = orig + FD_STEP;
            let lp = model.loss_and_grads(&x, &labels, l2, Mode::Train, seed).unwrap().loss;
            model.params_mut()[pi].value.data_mut()[e] = orig - FD_STEP;
            let lm = model.loss_and_grads(&x, &labels, l2, Mode::Train, seed).unwrap().loss;
            model.params_mut()[pi].value.data_mut()[e] = orig;
            let fd = (lp - lm) / (2.0 * FD_STEP);
            let a = analytic[pi].data()[e];
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
        }
    }
    worst
}

fn gradient_oracle() -> Outcome {
    let t0 = Instant::now();
    let g3 = gradient_gap(Variant::Cnn3d);
    let g2 = gradient_gap(Variant::Cnn2d);
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        g3 < FD_TOL && g2 < FD_TOL && secs < GRADIENT_BUDGET_S,
        format!("worst relative error 3D {g3:.1e}, 2D {g2:.1e}; {secs:.1} s"),
    )
}

fn stft_oracle() -> Outcome {
    let stft = Stft::<f64>::new(2048, 512, true);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let frame: Vec<f64> = (0..2048).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fast = stft.frame_magnitudes(&frame);
    let n = frame.len();
    let mut worst: f64 = 0.0;
    for (k, &f) in fast.iter().enumerate() {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &x) in frame.iter().enumerate() {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
            let phase = 2.0 * PI * ((k * i) % n) as f64 / n as f64;
            re += w * x * phase.cos();
            im -= w * x * phase.sin();
        }
        let direct = re.hypot(im);
        worst = worst.max((f - direct).abs() / direct.max(1e-12));
    }
    outcome(worst < STFT_TOL, format!("worst relative error {worst:.1e} over 1025 bins"))
}

/// Simulated cases with their features and the pooled training cubes.
struct Experiment {
    cfg: ExperimentConfig,
    feats: Vec<CaseFeatures>,
    train: Vec<FeatureCube<f32>>,
}

fn prepare(cfg: &ExperimentConfig) -> Experiment {
    let mut feats = Vec::new();
    let mut train = Vec::new();
    for case in selected_cases(cfg).unwrap() {
        let rec = simulate_case(&case, &cfg.das, &cfg.signal, &cfg.pipe, &cfg.layout).unwrap();
        let f = CaseFeatures::new(&rec, cfg, None).unwrap();
        train.extend(f.training_cubes(cfg.model.z, cfg.split.leak_halo_m).unwrap());
        feats.push(f);
    }
    Experiment { cfg: cfg.clone(), feats, train }
}

fn trained(exp: &Experiment, variant: Variant) -> Model<f32> {
    let mut cfg = exp.cfg.clone();
    cfg.model.variant = variant.name().to_string();
    let model = Model::<f32>::new(cfg.architecture().unwrap(), cfg.run.seed).unwrap();
    train(model, &exp.train, &cfg.train, cfg.run.seed).unwrap().0
}

fn evaluate_test_split(exp: &Experiment, model: &Model<f32>) -> Vec<CaseEvaluation> {
    let cfg = &exp.cfg;
    exp.feats
        .iter()
        .map(|f| {
            let cubes = f.cubes(&f.test_windows, cfg.model.z, cfg.split.leak_halo_m).unwrap();
            evaluate_cubes(model, &f.truth, &cubes, cfg).unwrap()
        })
        .collect()
}

fn level_of(e: &CaseEvaluation) -> LeakLevel {
    classify_leak_level(e.truth.case.flow.leak_ratio()).unwrap()
}

fn pooled_rate(evals: &[CaseEvaluation], keep: impl Fn(&CaseEvaluation) -> bool, label: CubeLabel, threshold: f64) -> f64 {
    let scores: Vec<f64> = evals
        .iter()
        .filter(|e| keep(e))
        .flat_map(|e| e.scores.iter().filter(|(l, _)| *l == label).map(|(_, s)| s.probability))
        .collect();
    scores.iter().filter(|&&p| p > threshold).count() as f64 / scores.len().max(1) as f64
}

fn end_to_end(evals: &[CaseEvaluation], cfg: &ExperimentConfig, secs: f64) -> Outcome {
    let t = cfg.detect.threshold;
    let tpr = pooled_rate(evals, |e| level_of(e) == LeakLevel::Excessive, CubeLabel::Leak, t);
    let far = pooled_rate(evals, |e| !e.truth.is_leak(), CubeLabel::NonLeak, t);
    let mut worst_loc: f64 = 0.0;
    let mut located = true;
    for e in evals.iter().filter(|e| e.truth.is_leak() && e.finding.declared) {
        match e.metrics.location_error_m {
            Some(err) => worst_loc = worst_loc.max(err),
            None => located = false,
        }
    }
    let smallest = evals.iter().find(|e| e.case_id() == SMALLEST_CASE).expect("smallest case evaluated");
    let declared = evals.iter().filter(|e| e.truth.is_leak() && e.finding.declared).count();
    let leaks = evals.iter().filter(|e| e.truth.is_leak()).count();
    outcome(
        tpr >= EXCESSIVE_TPR_MIN
            && far <= NO_LEAK_FAR_MAX
            && located
            && worst_loc <= LOCATION_ERROR_MAX_M
            && smallest.finding.declared
            && secs <= END_TO_END_BUDGET_S,
        format!(
            "excessive TPR {:.1}%, no-leak FAR {:.2}%, {declared}/{leaks} leaks declared, worst location error {worst_loc:.2} m, {SMALLEST_CASE} declared: {} (peak median {:.3}); {secs:.0} s",
            tpr * 100.0,
            far * 100.0,
            smallest.finding.declared,
            smallest.finding.peak_median_probability.unwrap_or(0.0),
        ),
    )
}

fn margins(evals: &[CaseEvaluation], scores: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut leak = Vec::new();
    let mut non_leak = Vec::new();
    for (e, s) in evals.iter().zip(scores) {
        for ((label, _), &m) in e.scores.iter().zip(s) {
            match label {
                CubeLabel::Leak => leak.push(m),
                CubeLabel::NonLeak if !e.truth.is_leak() => non_leak.push(m),
                CubeLabel::NonLeak => {}
            }
        }
    }
    (leak, non_leak)
}

fn three_vs_two(exp: &Experiment, evals3: &[CaseEvaluation]) -> Outcome {
    let t0 = Instant::now();
    let model2 = trained(exp, Variant::Cnn2d);
    let cfg = &exp.cfg;
    let m3: Vec<Vec<f64>> = evals3.iter().map(|e| e.scores.iter().map(|(_, s)| s.margin).collect()).collect();
    let m2: Vec<Vec<f64>> = exp
        .feats
        .iter()
        .map(|f| {
            let cubes = f.cubes(&f.test_windows, cfg.model.z, cfg.split.leak_halo_m).unwrap();
            score_cubes(&model2, &cubes).unwrap().iter().map(|s| s.margin).collect()
        })
        .collect();
    let (l3, n3) = margins(evals3, &m3);
    let (l2, n2) = margins(evals3, &m2);
    let (tpr3, far3) = tpr_at_far(&l3, &n3, EQUAL_FAR).unwrap();
    let (tpr2, far2) = tpr_at_far(&l2, &n2, EQUAL_FAR).unwrap();
    outcome(
        tpr3 >= tpr2,
        format!(
            "at FAR <= {:.0}%: 3D TPR {:.1}% (FAR {:.2}%), 2D TPR {:.1}% (FAR {:.2}%); {:.0} s",
            EQUAL_FAR * 100.0,
            tpr3 * 100.0,
            far3 * 100.0,
            tpr2 * 100.0,
            far2 * 100.0,
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn transient_rejection(cfg: &ExperimentConfig, model: &Model<f32>) -> Outcome {
    let t0 = Instant::now();
    let base = default_cases(TRANSIENT_CASE_S, cfg.run.seed, &cfg.pipe, cfg.layout.leak_position)
        .into_iter()
        .find(|c| c.leak.is_none() && c.flow.pipe_flow_rate > 1e-3)
        .expect("high-flow no-leak case");
    let case = CaseSpec { case_id: "transients".into(), seed: cfg.run.seed ^ 0x7a, ..base };
    let mut rec = simulate_case(&case, &cfg.das, &cfg.signal, &cfg.pipe, &cfg.layout).unwrap();
    let sites = [4.0, 12.0, 20.0, 28.0, 36.0];
    let amplitude = 4.0 * cfg.signal.flow_rms(case.flow.pipe_flow_rate);
    for (i, &x) in sites.iter().enumerate() {
        let start = 15.0 + 40.0 * i as f64;
        synth_transient(&cfg.das, TRANSIENT_CASE_S, x, start, 2.0, amplitude, case.seed + i as u64)
            .unwrap()
            .add_to(&mut rec)
            .unwrap();
    }
    let f = CaseFeatures::new(&rec, cfg, None).unwrap();
    let all: Vec<usize> = (0..f.grid.windows).collect();
    let cubes = f.cubes(&all, cfg.model.z, cfg.split.leak_halo_m).unwrap();
    let e = evaluate_cubes(model, &f.truth, &cubes, cfg).unwrap();
    let near_site = |pos: f64| sites.iter().any(|s| (s - pos).abs() <= TRANSIENT_SITE_RADIUS_M);
    let mut window_hits = 0;
    for r in 0..e.map.rows() {
        for (c, p) in e.map.row(r).iter().enumerate() {
            if p.is_some_and(|p| p > cfg.detect.threshold) && near_site(c as f64 * cfg.das.channel_spacing) {
                window_hits += 1;
            }
        }
    }
    let at_sites = e.finding.declared && e.finding.center.is_some_and(near_site);
    outcome(
        !at_sites,
        format!(
            "{window_hits} per-window detections near the sites, median over {} windows declares {}; {:.0} s",
            e.profile.windows_used,
            if e.finding.declared { format!("a leak at {:.1} m", e.finding.center.unwrap_or(f64::NAN)) } else { "nothing".into() },
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn quantification(evals: &[CaseEvaluation], cfg: &ExperimentConfig, model: &Model<f32>) -> Outcome {
    let t0 = Instant::now();
    let refs: Vec<(&ProbabilityMap, _)> = evals.iter().map(|e| (&e.map, &e.truth)).collect();
    let range_model = match fit_maps(&refs, cfg) {
        Ok(m) => m,
        Err(e) => return outcome(false, format!("range model fit failed: {e}")),
    };

    let sweep = sweep_cases(SWEEP_CASES, cfg, (0.427, 1.8), (0.015, 0.75), (1e5, 7e5), (0.6, 10.1)).unwrap();
    let mut pairs = Vec::new();
    for case in &sweep {
        let rec = simulate_case(case, &cfg.das, &cfg.signal, &cfg.pipe, &cfg.layout).unwrap();
        let f = CaseFeatures::new(&rec, cfg, None).unwrap();
        let all: Vec<usize> = (0..f.grid.windows).collect();
        let cubes = f.cubes(&all, cfg.model.z, cfg.split.leak_halo_m).unwrap();
        let e = evaluate_cubes(model, &f.truth, &cubes, cfg).unwrap();
        let q = quantify_map(&e.map, &e.truth, &range_model, cfg).unwrap();
        pairs.push((q.true_level, q.estimate.level));
    }
    let table = truth_table(&pairs).unwrap();
    print!("{}", table.to_text());

    // exact ranges from a fixed model must invert to the true orifice
    let exact = RangeModel { a: range_model.a.max(0.5), b: range_model.b, r_squared: 1.0, fit_case_ids: vec![] };
    let mut worst_inv: f64 = 0.0;
    for case in default_cases(1.0, cfg.run.seed, &cfg.pipe, cfg.layout.leak_position) {
        let Some(leak) = case.leak else { continue };
        let ratio = case.re_ratio(&cfg.pipe).unwrap();
        let est = quantify(
            exact.predict_range(ratio),
            &exact,
            &cfg.pipe,
            case.flow.pipe_flow_rate,
            leak.gauge_pressure,
            leak.discharge_coefficient,
        )
        .unwrap();
        worst_inv = worst_inv.max((est.estimated_orifice_diameter / leak.orifice_diameter - 1.0).abs());
    }
    outcome(
        range_model.r_squared >= RANGE_FIT_R2_MIN && table.overall_accuracy >= SWEEP_ACCURACY_MIN && worst_inv < INVERSION_TOL,
        format!(
            "range fit a {:.3} m, b {:.3} m, R^2 {:.4}; sweep accuracy {:.1}% over {SWEEP_CASES} cases; inversion error {worst_inv:.1e}; {:.0} s",
            range_model.a,
            range_model.b,
            range_model.r_squared,
            table.overall_accuracy * 100.0,
            t0.elapsed().as_secs_f64()
        ),
    )
}

/// A small configuration that runs the full chain in seconds.
fn tiny_config() -> ExperimentConfig {
    let text = "\
[dataset]
duration_s = 8
cases = case01,case03,case10

[das]
sampling_rate = 2000
channel_count = 12

[layout]
flange_channels = 5
elbow_channels = 6
straight_reference_channels = 8,9
leak_position = 2.4

[features]
segment_length = 2
window_length = 256
hop_length = 128
mel_bands_total = 32
mel_bands_kept = 24
fmax = 1000

[model]
z = 3

[train]
batch_size = 8
epochs = 2
validation_fraction = 0.2
";
    ExperimentConfig::parse(text).unwrap()
}

/// Recording, cube and checkpoint bytes plus the summary of one tiny run.
fn tiny_run(cfg: &ExperimentConfig, dir: &Path, tag: &str) -> Vec<Vec<u8>> {
    let exp = prepare(cfg);
    let mut out = Vec::new();
    let case = &selected_cases(cfg).unwrap()[0];
    let rec = simulate_case(case, &cfg.das, &cfg.signal, &cfg.pipe, &cfg.layout).unwrap();
    let rec_path = dir.join(format!("{tag}.dasr"));
    write_recording(&rec_path, &rec).unwrap();
    out.push(std::fs::read(&rec_path).unwrap());
    let cube_path = dir.join(format!("{tag}.dasf"));
    let c = &exp.train[0];
    write_cube_file(&cube_path, c.depth, c.bands, c.frames, &exp.train).unwrap();
    out.push(std::fs::read(&cube_path).unwrap());
    let model = trained(&exp, Variant::Cnn3d);
    let ckpt = dir.join(format!("{tag}.dasm"));
    save_checkpoint(&model, &ckpt).unwrap();
    out.push(std::fs::read(&ckpt).unwrap());
    let evals = evaluate_test_split(&exp, &model);
    out.push(Summary::new(&evals, cfg.detect.threshold).to_json().into_bytes());
    out
}

fn rejects_damage(path: &Path, reader: impl Fn(&Path) -> bool) -> bool {
    let bytes = std::fs::read(path).unwrap();
    let damaged = path.with_extension("damaged");
    let mut ok = true;
    std::fs::write(&damaged, &bytes[..bytes.len() - 5]).unwrap();
    ok &= !reader(&damaged);
    let mut flipped = bytes.clone();
    flipped[0] ^= 0xff;
    std::fs::write(&damaged, &flipped).unwrap();
    ok &= !reader(&damaged);
    std::fs::write(&damaged, &bytes[..3]).unwrap();
    ok &= !reader(&damaged);
    ok
}

fn determinism_and_round_trips() -> Outcome {
    let t0 = Instant::now();
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let a = tiny_run(&cfg, dir.path(), "a");
    let b = tiny_run(&cfg, dir.path(), "b");
    let names = ["recording", "cube file", "checkpoint", "summary"];
    let differing: Vec<&str> = names.iter().zip(a.iter().zip(&b)).filter(|(_, (x, y))| x != y).map(|(n, _)| *n).collect();

    let case = &selected_cases(&cfg).unwrap()[0];
    let rec = simulate_case(case, &cfg.das, &cfg.signal, &cfg.pipe, &cfg.layout).unwrap();
    let back: DasRecording = read_recording(&dir.path().join("a.dasr"), &cfg.das).unwrap();
    let rec_ok = back.samples.iter().map(|v| v.to_bits()).eq(rec.samples.iter().map(|v| v.to_bits()));

    let exp = prepare(&cfg);
    let cubes = read_cube_file::<f32>(&dir.path().join("a.dasf")).unwrap();
    let cube_ok = cubes.len() == exp.train.len()
        && cubes.iter().zip(&exp.train).all(|(x, y)| {
            x.values.iter().map(|v| v.to_bits()).eq(y.values.iter().map(|v| v.to_bits())) && x.label == y.label
        });

    let model = load_checkpoint::<f32>(&dir.path().join("a.dasm"), None).unwrap();
    let again = dir.path().join("again.dasm");
    save_checkpoint(&model, &again).unwrap();
    let ckpt_ok = std::fs::read(&again).unwrap() == a[2];

    let corrupt_ok = rejects_damage(&dir.path().join("a.dasr"), |p| read_recording(p, &cfg.das).is_ok())
        && rejects_damage(&dir.path().join("a.dasf"), |p| read_cube_file::<f32>(p).is_ok())
        && rejects_damage(&dir.path().join("a.dasm"), |p| load_checkpoint::<f32>(p, None).is_ok());

    // the split must not depend on anything but the seed and case id
    let truth = rec.truth.as_ref().unwrap();
    let split_ok = test_windows(&case.case_id, windows_of(truth, &cfg), 0.25, cfg.run.seed)
        == test_windows(&case.case_id, windows_of(truth, &cfg), 0.25, cfg.run.seed);

    let pass = differing.is_empty() && rec_ok && cube_ok && ckpt_ok && corrupt_ok && split_ok;
    outcome(
        pass,
        format!(
            "reruns identical: {}; round trips recording {rec_ok}, cubes {cube_ok}, checkpoint {ckpt_ok}; damaged files rejected: {corrupt_ok}; {:.1} s",
            if differing.is_empty() { "yes".to_string() } else { format!("no ({})", differing.join(", ")) },
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn report(id: u32, name: &str, o: &Outcome, failures: &mut u32) {
    println!("criterion {id} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    if !o.pass {
        *failures += 1;
    }
}

fn main() {
    // `cargo test -- --list` and filtered runs should not start the long checks
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    report(1, "Reynolds numbers of the reference cases", &reynolds_table(), &mut failures);
    report(2, "feature geometry", &feature_geometry(), &mut failures);
    report(3, "gradient oracle", &gradient_oracle(), &mut failures);
    report(4, "STFT oracle", &stft_oracle(), &mut failures);
    report(9, "determinism and round trips", &determinism_and_round_trips(), &mut failures);

    let t0 = Instant::now();
    let exp = prepare(&desk_config());
    let model3 = trained(&exp, Variant::Cnn3d);
    let evals = evaluate_test_split(&exp, &model3);
    let secs = t0.elapsed().as_secs_f64();
    print!("{}", Summary::new(&evals, exp.cfg.detect.threshold).to_text());
    report(5, "desk-scale end to end", &end_to_end(&evals, &exp.cfg, secs), &mut failures);
    report(6, "3D at least as good as 2D", &three_vs_two(&exp, &evals), &mut failures);
    let cfg = exp.cfg.clone();
    drop(exp);
    report(7, "transient rejection", &transient_rejection(&cfg, &model3), &mut failures);
    report(8, "quantification", &quantification(&evals, &cfg, &model3), &mut failures);

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
