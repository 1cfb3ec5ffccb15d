//! End-to-end runs of every subcommand on tiny problems.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pin_cli::checkpoint::Checkpoint;
use pin_cli::commands::{self, Overrides};
use pin_cli::config::RunConfig;
use pin_core::tasks::ImageGrid;

fn out_to(dir: &Path) -> Overrides {
    Overrides { out: Some(dir.to_path_buf()), ..Overrides::default() }
}

/// A 16×16 RGB gradient with a bright square, written next to its config.
fn image_config(dir: &Path, extra: &str) -> RunConfig {
    let data = (0..16 * 16)
        .flat_map(|i| {
            let (x, y) = ((i % 16) as f64 / 15.0, (i / 16) as f64 / 15.0);
            let square = if (4..9).contains(&(i % 16)) && (6..12).contains(&(i / 16)) { 0.4 } else { 0.0 };
            [0.2 + 0.5 * x, 0.3 + 0.4 * y + square, 0.5 - 0.3 * x * y]
        })
        .map(|v: f64| v.min(1.0))
        .collect();
    ImageGrid::new(16, 16, 3, data).unwrap().save_png(dir.join("img.png")).unwrap();
    let text = format!(
        r#"
task = "fit2d"
seed = 3
[model]
levels = 3
hidden = 16
num_features = 24
base_c = "mean"
[train]
iterations = 60
batch_size = 64
eval_every = 20
[image]
path = "img.png"
{extra}
"#
    );
    fs::write(dir.join("cfg.toml"), text).unwrap();
    RunConfig::load(&dir.join("cfg.toml")).unwrap()
}

fn signal_config(extra: &str) -> RunConfig {
    RunConfig::parse(&format!(
        r#"
task = "fit1d"
[model]
levels = 2
hidden = 16
num_features = 16
sigma = 4.0
[train]
iterations = 100
eval_every = 25
[signal]
samples = 64
terms = [{{ amplitude = 1.0, frequency = 2.0 }}]
{extra}
"#
    ))
    .unwrap()
}

fn pngs(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    v.sort();
    v
}

#[test]
fn image_fit_writes_one_png_per_level_and_residual_plus_final() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = image_config(dir.path(), "");
    let out = dir.path().join("out");
    let report = commands::fit(cfg, &out_to(&out)).unwrap();
    let expect = ["final.png", "level_1.png", "level_2.png", "level_3.png", "residual_1.png", "residual_2.png", "residual_3.png"];
    assert_eq!(pngs(&out), expect);
    for f in ["model.pinck", "history.csv", "metrics.csv", "config.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(report.metric_name, "psnr");
    assert!(report.metric.is_finite());
}

#[test]
fn eval_reproduces_the_fit_metric_and_truncates() {
    let dir = tempfile::tempdir().unwrap();
    let report = commands::fit(image_config(dir.path(), ""), &out_to(&dir.path().join("out"))).unwrap();
    let full = commands::eval(&report.checkpoint, &Overrides::default()).unwrap();
    assert_eq!(full.metric.to_bits(), report.metric.to_bits());
    assert_eq!(full.num_params, report.num_params);

    let eval_dir = dir.path().join("eval");
    let ov = Overrides { levels: Some(1), out: Some(eval_dir.clone()), ..Overrides::default() };
    let coarse = commands::eval(&report.checkpoint, &ov).unwrap();
    assert_eq!(coarse.levels, 1);
    assert!(coarse.num_params < full.num_params);
    assert!(eval_dir.join("eval_l1.csv").is_file());

    let ck = Checkpoint::load(&report.checkpoint).unwrap();
    assert!(commands::eval(&report.checkpoint, &Overrides { levels: Some(ck.model.num_levels() + 1), ..Overrides::default() }).is_err());
}

#[test]
fn repeated_fits_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    commands::fit(signal_config(""), &out_to(&a)).unwrap();
    commands::fit(signal_config(""), &out_to(&b)).unwrap();
    for f in ["model.pinck", "history.csv", "metrics.csv", "levels.csv", "levels.png"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    commands::fit(signal_config(""), &Overrides { seed: Some(1), out: Some(c.clone()), ..Overrides::default() }).unwrap();
    assert_ne!(fs::read(a.join("model.pinck")).unwrap(), fs::read(c.join("model.pinck")).unwrap());
}

#[test]
fn sweep_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = signal_config("[sweep]\nkind = \"sigma\"\nvalues = [1.0, 4.0, 16.0]\nseeds = [0, 1]\n");
    let result = commands::sweep_cmd(cfg, &out_to(dir.path())).unwrap();
    assert_eq!(result.records.len(), 6);
    let csv = fs::read_to_string(dir.path().join("sigma_fit1d.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("kind,value,seed,psnr,final_loss,error"));
    assert!(dir.path().join("sigma_fit1d.png").is_file());
}

#[test]
fn learn_c_records_a_trajectory_per_init() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = image_config(dir.path(), "[learn_c]\ninits = [0.1, 0.9]\n");
    let report = commands::learn_c(cfg, &out_to(&dir.path().join("out"))).unwrap();
    assert_eq!(report.runs.len(), 2);
    assert_eq!(report.target.len(), 3);
    let csv = fs::read_to_string(dir.path().join("out/learn_c.csv")).unwrap();
    // Header plus records at steps 0, 20, 40 and 60 for each init.
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
    assert!(csv.lines().nth(1).unwrap().starts_with("0.1,0,0.1,0.1,0.1"));
    let summary = fs::read_to_string(dir.path().join("out/learn_c_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
}

#[test]
fn dft_analysis_overlays_every_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let report = commands::fit(image_config(dir.path(), ""), &out_to(&dir.path().join("out"))).unwrap();
    let dft_dir = dir.path().join("dft");
    let dft = commands::dft_analysis(&report.checkpoint, None, &out_to(&dft_dir)).unwrap();
    assert_eq!(dft.bins, 24);
    assert_eq!(dft.centroids.len(), 3);
    assert!(dft.centroids.iter().all(|c| c.is_finite() && *c >= 0.0));
    let bins = fs::read_to_string(dft_dir.join("dft_bins.csv")).unwrap();
    assert_eq!(bins.lines().count(), 25);
    assert!(dft_dir.join("dft.png").is_file() && dft_dir.join("spectrum.csv").is_file());
}

#[test]
fn shape_fit_exports_a_mesh_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse(
        r#"
task = "fit3d"
[model]
levels = 2
hidden = 16
num_features = 32
sigma = 2.0
[train]
iterations = 300
batch_size = 512
[io]
grid_res = 24
[shape]
radius = 0.5
samples = 4000
eval_samples = 2000
"#,
    )
    .unwrap();
    let report = commands::fit(cfg, &out_to(dir.path())).unwrap();
    assert_eq!(report.metric_name, "chamfer");
    assert!(report.metric < 0.2, "chamfer {}", report.metric);
    for l in [1, 2] {
        let text = fs::read_to_string(dir.path().join(format!("level_{l}.obj"))).unwrap();
        assert!(text.lines().any(|l| l.starts_with("f ")));
    }
}

fn pin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pin"))
}

#[test]
fn binary_accepts_the_shared_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sig.toml");
    fs::write(&cfg_path, signal_config("").to_toml()).unwrap();
    let out: PathBuf = dir.path().join("run");
    let status = pin()
        .args(["fit", "--config"])
        .arg(&cfg_path)
        .args(["--seed", "5", "--levels", "3", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stored = fs::read_to_string(out.join("config.toml")).unwrap();
    let stored = RunConfig::parse(&stored).unwrap();
    assert_eq!((stored.seed, stored.model.levels), (5, 3));

    let eval = pin().arg("eval").arg(out.join("model.pinck")).args(["--levels", "2"]).output().unwrap();
    assert!(eval.status.success());
    assert!(String::from_utf8_lossy(&eval.stdout).contains("psnr"));
}

#[test]
fn binary_reports_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.toml");
    fs::write(&cfg_path, "task = \"fit1d\"\nunknown_key = 1\n").unwrap();
    let run = pin().args(["fit", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("unknown"));
    let missing = pin().args(["eval", "/nonexistent/model.pinck"]).output().unwrap();
    assert!(!missing.status.success());
}
