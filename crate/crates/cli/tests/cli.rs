use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fiberleak::config::ExperimentConfig;
use fiberleak::detect::read_map_csv;
use fiberleak::nn::{load_checkpoint, save_checkpoint, Model};
use tempfile::TempDir;

const TINY: &str = "\
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

[quantify]
range_window_s = 2
";

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("tiny.ini"), TINY).unwrap();
        Env { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let config = self.path("tiny.ini");
        Command::new(env!("CARGO_BIN_EXE_fiberleak"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(&config)
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn code(&self, args: &[&str]) -> i32 {
        self.run(args).status.code().expect("exit code")
    }

    /// simulate -> featurize -> train -> evaluate into `prefix`-named dirs.
    fn chain(&self, prefix: &str) {
        let d = |s: &str| format!("{prefix}{s}");
        self.ok(&["--out", &d("ds"), "simulate"]);
        self.ok(&["--out", &d("ft"), "featurize", "--input", &d("ds")]);
        self.ok(&["--out", &d("md"), "train", "--input", &d("ft")]);
        let ckpt = d("md/model.dasm");
        self.ok(&["--out", &d("ev"), "evaluate", "--input", &d("ft"), "--checkpoint", &ckpt]);
    }
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn full_chain_writes_every_artefact() {
    let env = Env::new();
    env.chain("");
    for f in ["ds/case01.dasr", "ds/case10.truth", "ds/manifest.json", "ds/run.json"] {
        assert!(env.path(f).is_file(), "{f}");
    }
    for f in ["ft/case01.dasf", "ft/case03.truth", "md/model.dasm", "md/history.json", "ev/summary.txt"] {
        assert!(env.path(f).is_file(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&read(&env.path("ev/summary.json"))).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 3);
    let map = read_map_csv(&env.path("ev/case01.map.csv")).unwrap();
    assert_eq!(map.channels(), 12);
    assert_eq!(map.rows(), 1);
    let manifest: serde_json::Value = serde_json::from_slice(&read(&env.path("ev/run.json"))).unwrap();
    assert_eq!(manifest["command"], "evaluate");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert!(outputs.contains(&"case03.metrics.json"));

    fs::write(
        env.path("range.json"),
        r#"{"a": 1.0, "b": 0.0, "r_squared": 1.0, "fit_case_ids": ["case01", "case03"]}"#,
    )
    .unwrap();
    env.ok(&["--out", "qt", "quantify", "--input", "ev", "--range-model", "range.json"]);
    assert!(env.path("qt/case01.quant.json").is_file());
    assert!(!env.path("qt/case10.quant.json").exists());
    let table = String::from_utf8(read(&env.path("qt/truth_table.txt"))).unwrap();
    assert!(table.contains("overall accuracy"));
}

#[test]
fn cube_file_holds_every_scored_channel_and_window() {
    let env = Env::new();
    env.ok(&["--out", "ds", "simulate", "--cases", "1"]);
    env.ok(&["--out", "ft", "featurize", "--input", "ds", "--z", "5"]);
    let cubes = fiberleak::features::read_cube_file::<f32>(&env.path("ft/case01.dasf")).unwrap();
    // 8 s of 2 s windows, channels 2..=9 of 12 at Z=5
    assert_eq!(cubes.len(), 4 * 8);
    assert!(cubes.iter().all(|c| c.depth == 5 && c.label.is_some()));
}

#[test]
fn fixed_seed_reruns_are_byte_identical() {
    let env = Env::new();
    env.chain("a_");
    env.chain("b_");
    for f in ["ds/case03.dasr", "ft/case01.dasf", "md/model.dasm", "md/history.json", "ev/summary.json", "ev/case01.map.csv"] {
        assert_eq!(read(&env.path(&format!("a_{f}"))), read(&env.path(&format!("b_{f}"))), "{f}");
    }
}

#[test]
fn zero_epochs_saves_the_initial_model() {
    let env = Env::new();
    env.ok(&["--out", "ds", "simulate"]);
    env.ok(&["--out", "ft", "featurize", "--input", "ds"]);
    env.ok(&["--out", "md", "train", "--input", "ft", "--epochs", "0"]);
    let trained = load_checkpoint::<f32>(&env.path("md/model.dasm"), None).unwrap();
    let cfg = ExperimentConfig::load(&env.path("tiny.ini")).unwrap();
    let init = Model::<f32>::new(cfg.architecture().unwrap(), cfg.run.seed).unwrap();
    save_checkpoint(&init, &env.path("init.dasm")).unwrap();
    assert_eq!(read(&env.path("md/model.dasm")), read(&env.path("init.dasm")));
    assert_eq!(trained.params().len(), init.params().len());
}

#[test]
fn corrupted_inputs_exit_with_format_code() {
    let env = Env::new();
    env.ok(&["--out", "ds", "simulate", "--cases", "1,10"]);
    env.ok(&["--out", "ft", "featurize", "--input", "ds"]);

    let mut bytes = read(&env.path("ds/case01.dasr"));
    bytes[0] = b'X';
    fs::write(env.path("ds/case01.dasr"), bytes).unwrap();
    assert_eq!(env.code(&["--out", "ft2", "featurize", "--input", "ds"]), 3);
    assert!(!env.path("ft2").exists(), "failed runs leave no output");

    let cube = env.path("ft/case10.dasf");
    let bytes = read(&cube);
    fs::write(&cube, &bytes[..bytes.len() - 7]).unwrap();
    assert_eq!(env.code(&["--out", "md", "train", "--input", "ft"]), 3);

    fs::remove_file(env.path("ft/case10.dasf")).unwrap();
    fs::remove_file(env.path("ft/case01.truth")).unwrap();
    assert_eq!(env.code(&["--out", "md", "train", "--input", "ft"]), 3);
}

#[test]
fn checkpoint_depth_mismatch_is_rejected() {
    let env = Env::new();
    env.ok(&["--out", "ds", "simulate"]);
    env.ok(&["--out", "ft3", "featurize", "--input", "ds"]);
    env.ok(&["--out", "ft5", "featurize", "--input", "ds", "--z", "5"]);
    env.ok(&["--out", "md", "train", "--input", "ft3", "--epochs", "0"]);
    assert_eq!(env.code(&["--out", "ev", "evaluate", "--input", "ft5", "--checkpoint", "md/model.dasm"]), 3);
    assert_eq!(env.code(&["--out", "md5", "train", "--input", "ft3", "--z", "5"]), 3);
}

#[test]
fn training_without_leaks_fails() {
    let env = Env::new();
    env.ok(&["--out", "ds", "simulate", "--cases", "case10"]);
    env.ok(&["--out", "ft", "featurize", "--input", "ds"]);
    assert_eq!(env.code(&["--out", "md", "train", "--input", "ft"]), 3);
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let env = Env::new();
    env.ok(&["--out", "ds", "simulate", "--cases", "1"]);
    assert_eq!(env.code(&["--out", "ds", "simulate", "--cases", "1"]), 2);
    env.ok(&["--out", "ds", "--force", "simulate", "--cases", "10"]);
    assert!(!env.path("ds/case01.dasr").exists());
    assert!(env.path("ds/case10.dasr").is_file());

    assert_eq!(env.code(&["--out", "ft", "featurize", "--input", "ds", "--z", "4"]), 2);
    assert_eq!(env.code(&["--out", "x", "simulate", "--cases", "case99"]), 2);
    assert_eq!(env.code(&["simulate"]), 2);
    assert_eq!(env.code(&["frobnicate"]), 2);

    fs::write(env.path("bad.ini"), "[das]\nbogus = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fiberleak"))
        .args(["--config", "bad.ini", "config"])
        .current_dir(env.dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn printed_defaults_parse_back_to_defaults() {
    let out = Command::new(env!("CARGO_BIN_EXE_fiberleak")).args(["config", "--print-defaults"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(ExperimentConfig::parse(&text).unwrap(), ExperimentConfig::default());

    let env = Env::new();
    let out = env.ok(&["--seed", "7", "config"]);
    let cfg = ExperimentConfig::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.run.seed, 7);
    assert_eq!(cfg.das.channel_count, 12);
}
