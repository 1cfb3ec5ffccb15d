//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits non-zero if any criterion fails.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pin_cli::checkpoint::Checkpoint;
use pin_cli::commands::{self, Overrides};
use pin_cli::config::RunConfig;
use pin_core::analysis::{level_spectrum, SpectrumGrid};
use pin_core::encoding::FrequencyBank;
use pin_core::geometry::vec3::{dist2, norm};
use pin_core::geometry::{chamfer_distance, closest_point_on_triangle, marching_cubes, MeshSdf, Point3, ScalarGrid, SurfaceShape, TriMesh};
use pin_core::model::{BaselineKind, BaselineModel, PinConfig, PinModel};
use pin_core::numerics::{finite_difference_check, Parameterized, Tensor2};
use pin_core::rng::seeded;
use pin_core::training::{FieldModel, LossKind};
use rand::Rng;

struct Outcome {
    id: u32,
    pass: bool,
}

fn line(id: u32, title: &str, pass: bool, detail: String) -> Outcome {
    println!("{} {:>2}  {title}: {detail}", if pass { "PASS" } else { "FAIL" }, id);
    Outcome { id, pass }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&configs().join(name)).unwrap()
}

fn out_to(dir: &Path) -> Overrides {
    Overrides { out: Some(dir.to_path_buf()), ..Overrides::default() }
}

fn uniform(n: usize, d: usize, lo: f64, hi: f64, seed: u64) -> Tensor2 {
    let mut rng = seeded(seed);
    Tensor2::from_fn(n, d, |_, _| rng.random_range(lo..hi))
}

fn bits(t: &Tensor2) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

fn max_rel_error<M: FieldModel>(model: &mut M, reg: f64, seed: u64) -> f64 {
    let x = uniform(6, model.input_dim(), -1.0, 1.0, seed);
    let t = uniform(6, model.output_dim(), -1.0, 1.0, seed + 1000);
    finite_difference_check(model, 1e-5, usize::MAX, seed, |m: &mut M, grad| {
        Ok(m.batch_loss(&x, &t, LossKind::L2, reg, grad)?.total)
    })
    .unwrap()
    .max_rel_error
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut cfg = PinConfig::new(2, 3);
    cfg.arch.hidden = 16;
    cfg.num_features = 24;
    cfg.sigma = 3.0;
    cfg.base_c = vec![0.2, 0.4, 0.6];
    let mut nc = cfg.clone();
    nc.arch.conditioning = false;
    let mut lc = cfg.clone();
    lc.learnable_c = true;
    let errors = [
        ("PIN", max_rel_error(&mut PinModel::new(&cfg).unwrap(), 0.01, 0)),
        ("PIN-nC", max_rel_error(&mut PinModel::new(&nc).unwrap(), 0.01, 2)),
        ("PIN-learnC", max_rel_error(&mut PinModel::new(&lc).unwrap(), 0.01, 3)),
        ("FFNet", max_rel_error(&mut BaselineModel::matched(&cfg, BaselineKind::FfNet).unwrap(), 0.0, 6)),
        (
            "SIREN(w0=5)",
            max_rel_error(&mut BaselineModel::matched(&cfg, BaselineKind::Siren { omega0: 5.0 }).unwrap(), 0.0, 7),
        ),
    ];
    let high = max_rel_error(&mut BaselineModel::matched(&cfg, BaselineKind::Siren { omega0: 30.0 }).unwrap(), 0.0, 7);
    let secs = start.elapsed().as_secs_f64();
    let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let detail = errors.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    line(
        1,
        "gradient suite",
        worst < 1e-5 && secs < 30.0,
        format!("{detail}; max {worst:.1e} < 1e-5, {secs:.1} s < 30 s (info: SIREN w0=30 {high:.1e}, truncation-limited)"),
    )
}

fn modularity() -> Outcome {
    let mut cfg = PinConfig::new(2, 3);
    cfg.levels = 4;
    cfg.arch.hidden = 24;
    cfg.num_features = 40;
    cfg.base_c = vec![0.3, 0.5, 0.7];
    cfg.seed = 11;
    let mut m = PinModel::new(&cfg).unwrap();
    let x = uniform(1000, 2, -1.0, 1.0, 1);
    let out = m.forward(&x).unwrap();
    let (w, c) = (m.level_weights().to_vec(), m.base_c().to_vec());
    let recurrence = (0..4).all(|l| {
        let expect = Tensor2::from_fn(1000, 3, |i, j| {
            let mut s = c[j] + w[0] * out.residuals[0].get(i, j);
            for k in 1..=l {
                s += w[k] * out.residuals[k].get(i, j);
            }
            s
        });
        bits(&out.composites[l]) == bits(&expect)
    });
    let truncation = (1..=4)
        .all(|l| bits(&m.truncate(l).unwrap().predict(&x).unwrap()) == bits(&m.forward_partial(&x, l).unwrap()));
    let before = m.forward_partial(&x, 2).unwrap();
    for b in m.params_mut().blocks_mut() {
        if b.name.starts_with("level3") || b.name.starts_with("level4") {
            b.value.iter_mut().for_each(|v| *v = f64::NAN);
        }
    }
    let isolated = bits(&m.forward_partial(&x, 2).unwrap()) == bits(&before);
    line(
        2,
        "composition and modularity",
        recurrence && truncation && isolated,
        format!("recurrence bitwise {recurrence}, truncate == partial {truncation}, NaN in levels > 2 isolated {isolated}"),
    )
}

fn partition_ordering() -> Outcome {
    let mut violations = 0;
    for seed in 0..100u64 {
        let dim = 1 + (seed % 3) as usize;
        let sigma = [1.0, 15.0, 30.0][(seed / 3 % 3) as usize];
        let levels = 2 + (seed % 4) as usize;
        let bank = FrequencyBank::sample(dim, 64 + seed as usize, levels, sigma, seed).unwrap();
        for l in 1..levels {
            let max_lo = bank.level_range(l).unwrap().map(|i| bank.frequency_norm(i)).fold(f64::NEG_INFINITY, f64::max);
            let min_hi = bank.level_range(l + 1).unwrap().map(|i| bank.frequency_norm(i)).fold(f64::INFINITY, f64::min);
            if !(min_hi > max_lo) {
                violations += 1;
            }
        }
    }
    line(3, "partition ordering", violations == 0, format!("{violations} violations over 100 banks"))
}

/// Criteria 4 and 5 share the trained 1D model.
fn fit_1d(dir: &Path) -> (Outcome, Outcome) {
    let start = Instant::now();
    let report = commands::fit(load("fit1d.toml"), &out_to(dir)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let c4 = line(
        4,
        "1D fit",
        report.final_loss < 1e-3 && secs < 60.0,
        format!("final MSE {:.2e} < 1e-3, {secs:.1} s < 60 s", report.final_loss),
    );

    let ck = Checkpoint::load(&report.checkpoint).unwrap();
    let samples = ck.config.signal.as_ref().unwrap().samples;
    let centroids = level_spectrum(&ck.model, SpectrumGrid::Line(samples), 8).unwrap().centroids();
    let inversions: Vec<f64> = centroids.windows(2).filter(|w| w[1] < w[0]).map(|w| 1.0 - w[1] / w[0]).collect();
    let ok = inversions.is_empty() || (inversions.len() == 1 && inversions[0] <= 0.05);
    let shown = centroids.iter().map(|c| format!("{c:.2}")).collect::<Vec<_>>().join(" -> ");
    let c5 = line(5, "progressive detail", ok, format!("centroids {shown}, {} inversion(s)", inversions.len()));
    (c4, c5)
}

fn fit_2d(cfg: &RunConfig, seed: u64, conditioning: bool, equal: bool, dir: &Path) -> commands::FitReport {
    let mut cfg = cfg.clone();
    cfg.model.conditioning = conditioning;
    if equal {
        cfg.model.weights = pin_cli::config::WeightsSpec::Named("equal".into());
    }
    let ov = Overrides { seed: Some(seed), out: Some(dir.to_path_buf()), ..Overrides::default() };
    commands::fit(cfg, &ov).unwrap()
}

/// Returns the held-out MSE of the run, reused by the ablation.
fn fit_2d_criterion(dir: &Path) -> (Outcome, f64) {
    let start = Instant::now();
    let first = fit_2d(&load("fit2d.toml"), 0, true, false, dir);
    let secs = start.elapsed().as_secs_f64();
    let c6 = line(
        6,
        "2D fit",
        first.metric > 28.0 && secs < 300.0,
        format!("held-out PSNR {:.2} dB > 28 dB, {secs:.1} s < 300 s", first.metric),
    );
    (c6, first.held_out_mse.unwrap())
}

/// Seed 0 with conditioning comes from the 2D fit criterion.
fn ablation(seed0_mse: f64, dir: &Path) -> Outcome {
    let cfg = load("fit2d.toml");
    let mut with = vec![seed0_mse];
    let mut without = Vec::new();
    let mut equal = Vec::new();
    for seed in 0..3 {
        if seed > 0 {
            with.push(fit_2d(&cfg, seed, true, false, &dir.join(format!("c{seed}"))).held_out_mse.unwrap());
        }
        without.push(fit_2d(&cfg, seed, false, false, &dir.join(format!("n{seed}"))).held_out_mse.unwrap());
        equal.push(fit_2d(&cfg, seed, true, true, &dir.join(format!("e{seed}"))).held_out_mse.unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mw, mn, me) = (mean(&with), mean(&without), mean(&equal));
    line(
        10,
        "conditioning ablation",
        mw <= mn,
        format!("mean held-out MSE with {mw:.3e} <= without {mn:.3e} (info: equal weights {me:.3e}, harmonic {mw:.3e})"),
    )
}

fn learn_c(dir: &Path) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for name in ["astronaut", "chelsea", "coffee"] {
        let mut cfg = load("learn_c.toml");
        cfg.image.as_mut().unwrap().path = configs().join(format!("../data/{name}_64.png"));
        let report = commands::learn_c(cfg, &out_to(&dir.join(name))).unwrap();
        let dev = report
            .runs
            .iter()
            .flat_map(|(_, c)| c.iter().zip(&report.target).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        let finals = report.runs.iter().map(|(i, c)| format!("{i}->{:.3}", c[0])).collect::<Vec<_>>().join(" ");
        parts.push(format!("{name} mean[0] {:.3}: {finals}", report.target[0]));
    }
    line(7, "learnable base component", worst <= 0.02, format!("max |c - mean| {worst:.3} <= 0.02; {}", parts.join("; ")))
}

fn fit_3d(dir: &Path) -> Outcome {
    let start = Instant::now();
    let report = commands::fit(load("fit3d.toml"), &out_to(dir)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    line(
        8,
        "3D sphere fit",
        report.metric < 1e-2 && secs < 600.0,
        format!("Chamfer {:.4} < 1e-2 at 128^3, {secs:.1} s < 600 s", report.metric),
    )
}

/// Most frequent value; without a majority, the median.
fn majority(mut v: Vec<f64>) -> f64 {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    v.iter().for_each(|x| *counts.entry(x.to_bits()).or_default() += 1);
    if let Some((b, _)) = counts.iter().find(|(_, &c)| 2 * c > v.len()) {
        return f64::from_bits(*b);
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn sigma_direction(dir: &Path) -> Outcome {
    let mut best = Vec::new();
    let mut parts = Vec::new();
    for f in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let mut cfg = load("sigma_tone.toml");
        cfg.signal.as_mut().unwrap().terms[0].frequency = f;
        let result = commands::sweep_cmd(cfg, &out_to(&dir.join(format!("tone{f}")))).unwrap();
        let seeds: Vec<u64> = load("sigma_tone.toml").sweep.unwrap().seeds;
        let per_seed: Vec<f64> = seeds
            .iter()
            .map(|&s| {
                result
                    .records
                    .iter()
                    .filter(|r| r.seed == s && r.metric.is_some())
                    .max_by(|a, b| a.metric.unwrap().total_cmp(&b.metric.unwrap()))
                    .map_or(f64::NAN, |r| r.value)
            })
            .collect();
        let vote = majority(per_seed.clone());
        parts.push(format!("f={f}: {per_seed:?} -> {vote}"));
        best.push(vote);
    }
    let ok = best.windows(2).all(|w| w[1] >= w[0]);
    line(9, "sigma direction", ok, format!("best sigma non-decreasing; {}", parts.join(", ")))
}

fn cloud(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = seeded(seed);
    (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()
}

fn geometry_oracles() -> Outcome {
    let brute = |p: &[Point3], q: &[Point3]| {
        p.iter().map(|x| q.iter().map(|y| dist2(*x, *y)).fold(f64::INFINITY, f64::min).sqrt()).sum::<f64>()
            / p.len() as f64
    };
    let (a, b) = (cloud(400, 1), cloud(300, 2));
    let chamfer_err = (chamfer_distance(&a, &b).unwrap() - (brute(&a, &b) + brute(&b, &a))).abs();

    let grid = ScalarGrid::sample_cube(65, -1.0, 1.0, |p| Ok(norm(p) - 0.55)).unwrap();
    let cell = grid.spacing[0];
    let mesh = marching_cubes(&grid, 0.0).unwrap();
    let mc_err = mesh.vertices.iter().map(|v| (norm(*v) - 0.55).abs()).fold(0.0, f64::max);

    let shape = TriMesh::icosphere(2, 0.6).transformed(|p| [p[0] * 1.2, p[1] * 0.9 + 0.05, p[2]]);
    let sdf = MeshSdf::new(shape.clone()).unwrap();
    let sdf_err = cloud(100, 9)
        .into_iter()
        .map(|p| {
            let d = (0..shape.triangles.len())
                .map(|i| {
                    let [a, b, c] = shape.triangle(i);
                    dist2(p, closest_point_on_triangle(p, a, b, c))
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            (sdf.signed_distance(p).unwrap().abs() - d).abs()
        })
        .fold(0.0, f64::max);
    line(
        11,
        "geometry oracles",
        chamfer_err < 1e-12 && mc_err < 2.0 * cell && sdf_err < 1e-9,
        format!("Chamfer {chamfer_err:.1e} < 1e-12, MC {mc_err:.4} < {:.4}, SDF {sdf_err:.1e} < 1e-9", 2.0 * cell),
    )
}

fn files_identical(a: &Path, b: &Path) -> (usize, Vec<String>) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut differing = Vec::new();
    for n in &names {
        let name = n.to_string_lossy();
        // config.toml records the output directory, which differs by design.
        if name == "config.toml" {
            continue;
        }
        if fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok() {
            differing.push(name.into_owned());
        }
    }
    (names.len() - 1, differing)
}

fn determinism(first_fit: &Path, dir: &Path) -> Outcome {
    let again = dir.join("fit1d_again");
    commands::fit(load("fit1d.toml"), &out_to(&again)).unwrap();
    let (n_fit, mut differing) = files_identical(first_fit, &again);

    let mut sweep_cfg = load("sigma_tone.toml");
    sweep_cfg.train.iterations = 200;
    let s = sweep_cfg.sweep.as_mut().unwrap();
    s.values = vec![1.0, 4.0];
    s.seeds = vec![0, 1];
    let (a, b) = (dir.join("sweep_a"), dir.join("sweep_b"));
    commands::sweep_cmd(sweep_cfg.clone(), &out_to(&a)).unwrap();
    commands::sweep_cmd(sweep_cfg, &out_to(&b)).unwrap();
    let (n_sweep, d) = files_identical(&a, &b);
    differing.extend(d);
    line(
        12,
        "determinism",
        differing.is_empty(),
        format!("{} files compared across repeated fit and sweep runs, differing: {differing:?}", n_fit + n_sweep),
    )
}

fn main() {
    // `cargo test -- --list` and filtered runs pass arguments; only run the
    // suite for a plain invocation or an explicit `acceptance` filter.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let started = Instant::now();
    let mut results = vec![gradient_suite(), modularity(), partition_ordering()];
    let (c4, c5) = fit_1d(&dir.join("fit1d"));
    results.extend([c4, c5]);
    let (c6, seed0_mse) = fit_2d_criterion(&dir.join("fit2d/c0"));
    results.push(c6);
    results.push(learn_c(&dir.join("learn_c")));
    results.push(fit_3d(&dir.join("fit3d")));
    results.push(sigma_direction(&dir.join("sigma")));
    results.push(ablation(seed0_mse, &dir.join("fit2d")));
    results.push(geometry_oracles());
    results.push(determinism(&dir.join("fit1d"), dir));

    let failed: Vec<u32> = results.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} in {:.0} s",
        results.len() - failed.len(),
        failed.len(),
        failed,
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
