//! The five subcommands. Each returns a small report so callers (and tests)
//! can inspect results without parsing files.

use std::fs;
use std::path::{Path, PathBuf};

use pin_core::analysis::plot::LinePlot;
use pin_core::analysis::{
    bank_bins, dft_magnitude_image, evaluate, extract_mesh, level_spectrum, overlay_bins, run_fit_observed, sweep,
    BaseC, FitTask, SpectrumGrid, SweepKind, SweepResult,
};
use pin_core::model::PinModel;
use pin_core::numerics::{Parameterized, Tensor2};
use pin_core::tasks::ImageGrid;
use pin_core::training::{fmt_f64, TrainHistory};

use crate::checkpoint::Checkpoint;
use crate::config::{BaseCSpec, RunConfig, TaskKind};
use crate::error::{CliError, Result};

/// Display gain for residual images: pixel = 0.5 + gain·R_l.
pub const RESIDUAL_GAIN: f64 = 1.0;

/// Flags shared by the commands; each overrides the matching config key.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub levels: Option<usize>,
    pub out: Option<PathBuf>,
    pub grid_res: Option<usize>,
    pub iso: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = self.levels {
            cfg.model.levels = l;
        }
        if let Some(o) = &self.out {
            cfg.io.output_dir = o.clone();
        }
        if let Some(r) = self.grid_res {
            cfg.io.grid_res = r;
        }
        if let Some(i) = self.iso {
            cfg.io.iso = i;
        }
        cfg.validate()
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.io.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write(&dir.join("config.toml"), cfg.to_toml())?;
    Ok(dir)
}

fn history_csv(h: &TrainHistory, cfg: &RunConfig) -> String {
    h.to_csv(cfg.io.record_timing)
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub out_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub metric_name: &'static str,
    pub metric: f64,
    /// Held-out MSE for signals and images.
    pub held_out_mse: Option<f64>,
    pub final_loss: f64,
    pub num_params: usize,
    /// Artefacts written, relative to `out_dir`.
    pub files: Vec<String>,
}

pub fn fit(mut cfg: RunConfig, ov: &Overrides) -> Result<FitReport> {
    ov.apply(&mut cfg)?;
    let out = prepare_out(&cfg)?;
    let exp = cfg.experiment()?;
    let outcome = run_fit_observed(&exp, cfg.seed, &mut |_, _| {})?;
    let mut files = vec!["config.toml".to_string()];

    let checkpoint = out.join("model.pinck");
    // The checkpoint does not record where it was written, so identical runs
    // into different directories produce identical files.
    let mut stored = cfg.clone();
    stored.io.output_dir = PathBuf::new();
    Checkpoint::new(stored, outcome.model.clone()).save(&checkpoint)?;
    files.push("model.pinck".into());
    write(&out.join("history.csv"), history_csv(&outcome.history, &cfg))?;
    files.push("history.csv".into());

    let final_loss = outcome.history.final_record().map_or(f64::NAN, |r| r.recon);
    let num_params = outcome.model.num_params();
    let metric_name = exp.task.metric_name();
    write(
        &out.join("metrics.csv"),
        metrics_csv(cfg.model.levels, num_params, metric_name, outcome.metric, outcome.held_out_mse),
    )?;
    files.push("metrics.csv".into());

    if cfg.io.export_levels {
        files.extend(export_levels(&cfg, &exp.task, &outcome.model, &out)?);
    }
    Ok(FitReport {
        out_dir: out,
        checkpoint,
        metric_name,
        metric: outcome.metric,
        held_out_mse: outcome.held_out_mse,
        final_loss,
        num_params,
        files,
    })
}

fn metrics_csv(levels: usize, num_params: usize, name: &str, metric: f64, mse: Option<f64>) -> String {
    let mut s = String::from("levels,num_params,metric,value\n");
    s.push_str(&format!("{levels},{num_params},{name},{}\n", fmt_f64(metric)));
    if let Some(m) = mse {
        s.push_str(&format!("{levels},{num_params},mse,{}\n", fmt_f64(m)));
    }
    s
}

/// Per-level artefacts: a curve CSV and plot for signals, composite and
/// residual PNGs for images, one OBJ per level for shapes.
pub fn export_levels(cfg: &RunConfig, task: &FitTask, model: &PinModel, out: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let levels = model.num_levels();
    match task {
        FitTask::Signal { signal, samples } => {
            let n = (*samples).max(2) * 4;
            let x = Tensor2::from_fn(n, 1, |i, _| -1.0 + 2.0 * i as f64 / (n - 1) as f64);
            let outs = model.predict_levels(&x)?;
            let mut csv = String::from("x,target");
            (1..=levels).for_each(|l| csv.push_str(&format!(",s{l}")));
            (1..=levels).for_each(|l| csv.push_str(&format!(",r{l}")));
            csv.push('\n');
            for i in 0..n {
                let xi = x.get(i, 0);
                csv.push_str(&format!("{},{}", fmt_f64(xi), fmt_f64(signal.eval(xi))));
                for t in outs.composites.iter().chain(&outs.residuals) {
                    csv.push_str(&format!(",{}", fmt_f64(t.get(i, 0))));
                }
                csv.push('\n');
            }
            write(&out.join("levels.csv"), csv)?;
            let mut plot = LinePlot::new(800, 500);
            plot.add((0..n).map(|i| (x.get(i, 0), signal.eval(x.get(i, 0)))).collect());
            for s in &outs.composites {
                plot.add((0..n).map(|i| (x.get(i, 0), s.get(i, 0))).collect());
            }
            plot.save(out.join("levels.png"))?;
            files.extend(["levels.csv".to_string(), "levels.png".to_string()]);
        }
        FitTask::Image { image, .. } => {
            let (w, h) = (image.width(), image.height());
            let x = pin_core::tasks::pixel_coords(w, h);
            let outs = model.predict_levels(&x)?;
            for l in 0..levels {
                let name = format!("level_{}.png", l + 1);
                ImageGrid::from_tensor_clamped(w, h, &outs.composites[l])?.save_png(out.join(&name))?;
                files.push(name);
                let name = format!("residual_{}.png", l + 1);
                let r = outs.residuals[l].map(|v| 0.5 + RESIDUAL_GAIN * v);
                ImageGrid::from_tensor_clamped(w, h, &r)?.save_png(out.join(&name))?;
                files.push(name);
            }
            ImageGrid::from_tensor_clamped(w, h, outs.final_output())?.save_png(out.join("final.png"))?;
            files.push("final.png".into());
        }
        FitTask::Shape { .. } => {
            for l in 1..=levels {
                let mesh = extract_mesh(model, l, cfg.io.grid_res, cfg.io.iso)?;
                let name = format!("level_{l}.obj");
                mesh.save_obj(out.join(&name))?;
                files.push(name);
            }
        }
    }
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub levels: usize,
    pub num_params: usize,
    pub metric_name: &'static str,
    pub metric: f64,
    pub held_out_mse: Option<f64>,
}

/// Evaluates a checkpoint, optionally truncated to `ov.levels`, on the data
/// described by its stored config. No training happens.
pub fn eval(checkpoint: &Path, ov: &Overrides) -> Result<EvalReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let mut cfg = ck.config.clone();
    if let Some(r) = ov.grid_res {
        cfg.io.grid_res = r;
    }
    if let Some(i) = ov.iso {
        cfg.io.iso = i;
    }
    let levels = ov.levels.unwrap_or(ck.model.num_levels());
    let model = ck.model.truncate(levels)?;
    let task = cfg.task()?;
    let seed = ov.seed.unwrap_or(cfg.seed);
    let (_, held_out) = task.data(seed)?;
    let (metric, held_out_mse) = evaluate(&task, &model, held_out.as_ref(), seed)?;
    let report = EvalReport { levels, num_params: model.num_params(), metric_name: task.metric_name(), metric, held_out_mse };
    if let Some(out) = &ov.out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write(
            &out.join(format!("eval_l{levels}.csv")),
            metrics_csv(levels, report.num_params, report.metric_name, metric, held_out_mse),
        )?;
        if cfg.task == TaskKind::Fit3d {
            extract_mesh(&model, levels, cfg.io.grid_res, cfg.io.iso)?.save_obj(out.join(format!("eval_l{levels}.obj")))?;
        }
    }
    Ok(report)
}

pub fn sweep_cmd(mut cfg: RunConfig, ov: &Overrides) -> Result<SweepResult> {
    ov.apply(&mut cfg)?;
    let spec = cfg.sweep.clone().ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
    let kind: SweepKind = spec.kind.parse()?;
    let out = prepare_out(&cfg)?;
    let result = sweep(&cfg.experiment()?, kind, &spec.values, &spec.seeds)?;
    let task = match cfg.task {
        TaskKind::Fit1d => "fit1d",
        TaskKind::Fit2d => "fit2d",
        TaskKind::Fit3d => "fit3d",
    };
    write(&out.join(format!("{kind}_{task}.csv")), result.to_csv())?;
    result.plot().save(out.join(format!("{kind}_{task}.png")))?;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct LearnCReport {
    pub target: Vec<f64>,
    /// `(init, learned c)` per run.
    pub runs: Vec<(f64, Vec<f64>)>,
}

/// Trains once per initial value with a learnable base component and
/// records how `c` evolves.
pub fn learn_c(mut cfg: RunConfig, ov: &Overrides) -> Result<LearnCReport> {
    ov.apply(&mut cfg)?;
    let inits = cfg.learn_c.clone().map(|s| s.inits).unwrap_or_else(|| vec![0.1, 0.5, 0.9]);
    if inits.is_empty() {
        return Err(CliError::Config("learn_c needs at least one init".into()));
    }
    let out = prepare_out(&cfg)?;
    let task = cfg.task()?;
    let target = match &task {
        FitTask::Image { image, .. } => image.mean(),
        _ => {
            let (data, _) = task.data(cfg.seed)?;
            data.targets.column_sums().iter().map(|s| s / data.len() as f64).collect()
        }
    };
    let channels = target.len();
    let mut csv = String::from("init,step");
    (0..channels).for_each(|k| csv.push_str(&format!(",c{k}")));
    csv.push('\n');
    let mut runs = Vec::new();
    let mut plot = LinePlot::new(800, 500);
    for &init in &inits {
        let mut run_cfg = cfg.clone();
        run_cfg.model.base_c = BaseCSpec::Scalar(init);
        run_cfg.model.learnable_c = true;
        let mut exp = run_cfg.experiment()?;
        exp.base_c = BaseC::Value(vec![init]);
        let mut trace: Vec<(u64, Vec<f64>)> = Vec::new();
        let outcome = run_fit_observed(&exp, cfg.seed, &mut |step, m| trace.push((step, m.base_c().to_vec())))?;
        for (step, c) in &trace {
            csv.push_str(&format!("{},{step}", fmt_f64(init)));
            c.iter().for_each(|v| csv.push_str(&format!(",{}", fmt_f64(*v))));
            csv.push('\n');
        }
        plot.add(trace.iter().map(|(s, c)| (*s as f64, c[0])).collect());
        runs.push((init, outcome.model.base_c().to_vec()));
    }
    write(&out.join("learn_c.csv"), csv)?;
    plot.save(out.join("learn_c.png"))?;
    let mut summary = String::from("init,channel,learned,target\n");
    for (init, c) in &runs {
        for (k, (v, t)) in c.iter().zip(&target).enumerate() {
            summary.push_str(&format!("{},{k},{},{}\n", fmt_f64(*init), fmt_f64(*v), fmt_f64(*t)));
        }
    }
    write(&out.join("learn_c_summary.csv"), summary)?;
    Ok(LearnCReport { target, runs })
}

#[derive(Debug, Clone)]
pub struct DftReport {
    pub bins: usize,
    pub clamped: usize,
    pub centroids: Vec<f64>,
}

/// DFT magnitude of the image with the checkpoint's encoding frequencies
/// overlaid, plus per-level residual spectra.
pub fn dft_analysis(checkpoint: &Path, image: Option<&Path>, ov: &Overrides) -> Result<DftReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let path = match image {
        Some(p) => p.to_path_buf(),
        None => ck.config.image.as_ref().map(|i| i.path.clone()).ok_or_else(|| {
            CliError::Config("dft-analysis needs an image (flag or checkpoint config)".into())
        })?,
    };
    let img = ImageGrid::load_png(&path)?;
    let out = ov.out.clone().unwrap_or_else(|| checkpoint.parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let bank = ck.model.bank();
    let bins = bank_bins(bank, img.width(), img.height())?;
    let mut spec = dft_magnitude_image(&img)?;
    overlay_bins(&mut spec, &bins)?;
    spec.save_png(out.join("dft.png"))?;

    let mut csv = String::from("feature,level,f0,f1,m,n,clamped\n");
    for (i, b) in bins.iter().enumerate() {
        let level = (1..=bank.num_levels()).find(|&l| bank.level_range(l).map_or(false, |r| r.contains(&i))).unwrap_or(0);
        let f = bank.frequency_cycles(i);
        csv.push_str(&format!("{i},{level},{},{},{},{},{}\n", fmt_f64(f[0]), fmt_f64(f[1]), b.bin[0], b.bin[1], b.clamped as u8));
    }
    write(&out.join("dft_bins.csv"), csv)?;

    let report = level_spectrum(&ck.model, SpectrumGrid::Image { width: img.width(), height: img.height() }, 8)?;
    write(&out.join("spectrum.csv"), report.to_csv())?;
    Ok(DftReport {
        bins: bins.len(),
        clamped: bins.iter().filter(|b| b.clamped).count(),
        centroids: report.centroids(),
    })
}
