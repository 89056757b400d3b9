use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fiberleak::config::ExperimentConfig;
use fiberleak::detect::{read_map_csv, write_map_csv, ProbabilityMap};
use fiberleak::features::{is_training_position, write_cube_file, CubeFileReader, FeatureCube, CUBE_EXT};
use fiberleak::fsio::atomic_write_text;
use fiberleak::nn::{load_checkpoint, save_checkpoint, train_with, ArchitectureSpec, Model};
use fiberleak::pipeline::{
    evaluate_scored, fit_maps, quantify_map, score_cubes, selected_cases, test_windows, windows_of, CaseFeatures,
    Summary,
};
use fiberleak::quantify::{truth_table, RangeModel};
use fiberleak::sim::{build_dataset, load_manifest, read_recording, read_truth, write_truth, CaseTruth, TRUTH_EXT};
use fiberleak::{Error, Result};

use crate::output::{Recorder, Staging};
use crate::{Cli, Command};

pub const CHECKPOINT_FILE: &str = "model.dasm";
pub const RANGE_MODEL_FILE: &str = "range_model.json";

pub fn dispatch(cli: Cli, mut cfg: ExperimentConfig) -> Result<()> {
    let out = cli
        .global
        .out
        .clone()
        .ok_or_else(|| Error::Config("--out is required for this command".into()))?;
    let force = cli.global.force;
    match cli.command {
        Command::Simulate { cases, duration } => {
            if !cases.is_empty() {
                cfg.dataset.cases = cases.iter().map(|c| case_id(c)).collect::<Result<_>>()?;
            }
            if let Some(d) = duration {
                cfg.dataset.duration_s = d;
            }
            cfg.validate()?;
            simulate(&cfg, &out, force)
        }
        Command::Featurize { input, z } => {
            if let Some(z) = z {
                cfg.model.z = z;
            }
            cfg.validate()?;
            featurize(&cfg, &input, &out, force)
        }
        Command::Train { input, variant, z, epochs } => {
            if let Some(v) = variant {
                cfg.model.variant = v;
            }
            if let Some(z) = z {
                cfg.model.z = z;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            train(&cfg, &input, z.is_some(), &out, force)
        }
        Command::Evaluate { input, checkpoint } => evaluate(&cfg, &input, &checkpoint, &out, force),
        Command::Quantify { input, range_model } => quantify(&cfg, &input, range_model.as_deref(), &out, force),
        Command::Config { .. } => unreachable!("handled before dispatch"),
    }
}

/// `3` and `case03` both name the third case.
fn case_id(s: &str) -> Result<String> {
    let s = s.trim();
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(format!("case{n:02}")),
        Ok(_) => Err(Error::Config("case numbers start at 1".into())),
        Err(_) if !s.is_empty() => Ok(s.to_string()),
        Err(_) => Err(Error::Config("empty case id".into())),
    }
}

fn simulate(cfg: &ExperimentConfig, out: &Path, force: bool) -> Result<()> {
    let cases = selected_cases(cfg)?;
    let staging = Staging::new(out, force)?;
    let mut rec = Recorder::new("simulate", cfg.digest());
    rec.stage("simulate");
    build_dataset(&cases, &cfg.das, &cfg.signal, &cfg.pipe, &cfg.layout, &staging.path(""))?;
    atomic_write_text(&staging.path("config.ini"), &cfg.to_ini())?;
    rec.finish(staging)
}

/// Files in `dir` with extension `ext`, sorted by name.
fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(Error::Format { path: dir.to_path_buf(), reason: format!("no .{ext} files") });
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// The `.truth` sidecar of a data file.
fn sidecar(path: &Path) -> Result<CaseTruth> {
    read_truth(&path.with_extension(TRUTH_EXT))
}

fn featurize(cfg: &ExperimentConfig, input: &Path, out: &Path, force: bool) -> Result<()> {
    let manifest = load_manifest(input)?;
    let staging = Staging::new(out, force)?;
    let mut rec = Recorder::new("featurize", cfg.digest());
    let z = cfg.model.z;
    for entry in &manifest.entries {
        let path = input.join(&entry.recording);
        rec.input(&path)?;
        rec.stage(&entry.case_id);
        let mut recording = read_recording(&path, &cfg.das)?;
        let truth = read_truth(&input.join(&entry.truth))?;
        if truth.case.case_id != entry.case_id {
            return Err(Error::Format {
                path: input.join(&entry.truth),
                reason: format!("truth is for {}, manifest says {}", truth.case.case_id, entry.case_id),
            });
        }
        recording.truth = Some(truth);
        let features = CaseFeatures::new(&recording, cfg, None)?;
        drop(recording);
        let all: Vec<usize> = (0..features.grid.windows).collect();
        let cubes = features.cubes(&all, z, cfg.split.leak_halo_m)?;
        let (bands, frames) = (features.grid.bands, features.grid.frames);
        write_cube_file(&staging.path(&format!("{}.{CUBE_EXT}", entry.case_id)), z, bands, frames, &cubes)?;
        write_truth(&staging.path(&format!("{}.{TRUTH_EXT}", entry.case_id)), &features.truth)?;
    }
    rec.finish(staging)
}

/// Cube file of one case with its truth and held-out windows.
struct CubeSource {
    path: PathBuf,
    truth: CaseTruth,
    test_windows: Vec<usize>,
}

fn cube_sources(cfg: &ExperimentConfig, input: &Path) -> Result<Vec<CubeSource>> {
    files_with_ext(input, CUBE_EXT)?
        .into_iter()
        .map(|path| {
            let truth = sidecar(&path)?;
            let n = windows_of(&truth, cfg);
            let test_windows = test_windows(&truth.case.case_id, n, cfg.split.test_fraction, cfg.run.seed);
            Ok(CubeSource { path, truth, test_windows })
        })
        .collect()
}

/// Streams the cubes of `src` that `keep` accepts, checking the cube shape.
fn read_cubes(
    src: &CubeSource,
    shape: &mut Option<[usize; 3]>,
    mut keep: impl FnMut(&FeatureCube<f32>) -> bool,
) -> Result<Vec<FeatureCube<f32>>> {
    let mut reader = CubeFileReader::open(&src.path)?;
    let this = [reader.depth, reader.bands, reader.frames];
    match shape {
        Some(s) if *s != this => {
            return Err(Error::Shape(format!(
                "{}: cubes are {}x{}x{} (Z x bands x frames), expected {}x{}x{}",
                src.path.display(),
                this[0],
                this[1],
                this[2],
                s[0],
                s[1],
                s[2]
            )))
        }
        _ => *shape = Some(this),
    }
    let mut out = Vec::new();
    while let Some(c) = reader.next_cube::<f32>()? {
        if keep(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

fn train(cfg: &ExperimentConfig, input: &Path, z_given: bool, out: &Path, force: bool) -> Result<()> {
    let sources = cube_sources(cfg, input)?;
    let staging = Staging::new(out, force)?;
    let mut rec = Recorder::new("train", cfg.digest());
    rec.stage("load");
    let halo = cfg.split.leak_halo_m;
    let mut shape = None;
    let mut cubes = Vec::new();
    for src in &sources {
        rec.input(&src.path)?;
        cubes.extend(read_cubes(src, &mut shape, |c| {
            !src.test_windows.contains(&c.window_index) && is_training_position(&src.truth, c.center_channel, halo)
        })?);
    }
    let [depth, bands, frames] = shape.expect("at least one cube file");
    if z_given && depth != cfg.model.z {
        return Err(Error::Shape(format!("--z {} does not match cube depth {depth}", cfg.model.z)));
    }
    let mut spec = ArchitectureSpec::for_input(cfg.variant()?, depth, bands, frames)?;
    spec.dropout = cfg.model.dropout;
    rec.stage("train");
    let model = Model::<f32>::new(spec, cfg.run.seed)?;
    let (model, history) = train_with(model, &cubes, &cfg.train, cfg.run.seed, |r| {
        eprintln!(
            "epoch {:>3}  lr {:.2e}  loss {:.4}  val loss {}  val acc {}",
            r.epoch,
            r.learning_rate,
            r.train_loss,
            r.val_loss.map_or("-".into(), |v| format!("{v:.4}")),
            r.val_accuracy.map_or("-".into(), |v| format!("{:.2}%", v * 100.0)),
        )
    })?;
    save_checkpoint(&model, &staging.path(CHECKPOINT_FILE))?;
    atomic_write_text(&staging.path("history.json"), &history.to_json())?;
    rec.finish(staging)
}

fn evaluate(cfg: &ExperimentConfig, input: &Path, checkpoint: &Path, out: &Path, force: bool) -> Result<()> {
    let sources = cube_sources(cfg, input)?;
    let model = load_checkpoint::<f32>(checkpoint, None)?;
    let staging = Staging::new(out, force)?;
    let mut rec = Recorder::new("evaluate", cfg.digest());
    rec.input(checkpoint)?;
    let mut evals = Vec::new();
    let mut shape = None;
    for src in &sources {
        rec.input(&src.path)?;
        rec.stage(&src.truth.case.case_id);
        let cubes = read_cubes(src, &mut shape, |c| src.test_windows.contains(&c.window_index))?;
        check_model_input(&model.spec, shape.expect("shape set by read_cubes"), &src.path)?;
        let scores = score_cubes(&model, &cubes)?;
        let eval = evaluate_scored(&src.truth, &cubes, &scores, cfg)?;
        let id = eval.case_id().to_string();
        write_map_csv(&staging.path(&format!("{id}.map.csv")), &eval.map, Some(&eval.profile))?;
        let report = serde_json::to_string_pretty(&eval.report()).expect("report serialises") + "\n";
        atomic_write_text(&staging.path(&format!("{id}.metrics.json")), &report)?;
        write_truth(&staging.path(&format!("{id}.{TRUTH_EXT}")), &src.truth)?;
        evals.push(eval);
    }
    let summary = Summary::new(&evals, cfg.detect.threshold);
    atomic_write_text(&staging.path("summary.json"), &summary.to_json())?;
    atomic_write_text(&staging.path("summary.txt"), &summary.to_text())?;
    print!("{}", summary.to_text());
    rec.finish(staging)
}

fn check_model_input(spec: &ArchitectureSpec, [depth, bands, frames]: [usize; 3], path: &Path) -> Result<()> {
    if spec.z != depth {
        return Err(Error::Shape(format!(
            "checkpoint expects Z={} but {} holds Z={depth} cubes",
            spec.z,
            path.display()
        )));
    }
    if spec.input[0] != bands || spec.input[1] != frames {
        return Err(Error::Shape(format!(
            "checkpoint expects {}x{} spectrograms but {} holds {bands}x{frames}",
            spec.input[0],
            spec.input[1],
            path.display()
        )));
    }
    Ok(())
}

fn quantify(cfg: &ExperimentConfig, input: &Path, range_model: Option<&Path>, out: &Path, force: bool) -> Result<()> {
    let mut cases: Vec<(ProbabilityMap, CaseTruth)> = Vec::new();
    for path in files_with_ext(input, "csv")? {
        let name = stem(&path);
        let Some(id) = name.strip_suffix(".map") else { continue };
        let truth = read_truth(&input.join(format!("{id}.{TRUTH_EXT}")))?;
        cases.push((read_map_csv(&path)?, truth));
    }
    if cases.is_empty() {
        return Err(Error::Format { path: input.to_path_buf(), reason: "no probability maps".into() });
    }
    let staging = Staging::new(out, force)?;
    let mut rec = Recorder::new("quantify", cfg.digest());
    rec.stage("quantify");
    let model = match range_model {
        Some(path) => {
            rec.input(path)?;
            RangeModel::load(path)?
        }
        None => {
            let refs: Vec<_> = cases.iter().map(|(m, t)| (m, t)).collect();
            fit_maps(&refs, cfg)?
        }
    };
    model.save(&staging.path(RANGE_MODEL_FILE))?;
    let mut pairs = Vec::new();
    let mut levels = BTreeMap::new();
    for (map, truth) in cases.iter().filter(|c| c.1.is_leak()) {
        let report = quantify_map(map, truth, &model, cfg)?;
        atomic_write_text(&staging.path(&format!("{}.quant.json", report.case_id)), &report.to_json())?;
        pairs.push((report.true_level, report.estimate.level));
        levels.insert(report.case_id.clone(), (report.true_level, report.estimate.level));
    }
    if pairs.is_empty() {
        return Err(Error::Domain("no leak cases to quantify".into()));
    }
    let table = truth_table(&pairs)?;
    let mut text = String::new();
    for (id, (t, p)) in &levels {
        text += &format!("{id:<10} true {:<12} estimated {}\n", t.name(), p.name());
    }
    text += "\n";
    text += &table.to_text();
    atomic_write_text(&staging.path("truth_table.txt"), &text)?;
    let json = serde_json::to_string_pretty(&table).expect("table serialises") + "\n";
    atomic_write_text(&staging.path("truth_table.json"), &json)?;
    print!("{text}");
    rec.finish(staging)
}
