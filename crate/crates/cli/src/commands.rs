use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use neuralmaps_core::composition::{CollectionHandle, SurfaceMap, SurfaceMapHandle};
use neuralmaps_core::domain::Domain;
use neuralmaps_core::mesh::{load_obj, tutte_embed, Keypoint, PLMap};
use neuralmaps_core::neuralmap::{build, load_expecting, save, CheckpointMetadata, NeuralMap};
use neuralmaps_core::optimize::{
    grid_mesh, train, CollectionObjective, Metrics, Objective, OptimizationTask, OptimizeError, OverfitObjective,
    ParamObjective, RunReport, SurfaceMapObjective, Termination, TrainHooks,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{
    require, CollectionConfig, EvalTarget, LoadedConfig, MapConfig, RunConfig, SurfaceConfig, WarpConfig,
    WarpInit,
};
use crate::error::CliError;
use crate::keypoints::{self, KeypointEntry};
use crate::Command;

/// Seed offset of the collection cycle-check samples.
const CYCLE_SALT: u64 = 0x5851_f42d_4c95_7f2d;

/// A frozen surface with its mesh parameterization, when it has one.
pub struct Surface {
    pub map: SurfaceMap,
    pub plmap: Option<PLMap>,
}

impl Surface {
    /// Domain location of a keypoint entry on this surface.
    fn preimage(&self, entry: KeypointEntry, domain: Domain, label: &str) -> Result<[f64; 2], CliError> {
        let kp = match entry {
            KeypointEntry::Uv(p) => {
                if domain.signed_distance(p) > 1e-9 {
                    return Err(CliError::Config(format!(
                        "{label}: keypoint ({}, {}) lies outside the domain",
                        p[0], p[1]
                    )));
                }
                return Ok(p);
            }
            KeypointEntry::Vertex(i) => Keypoint::Vertex(i),
            KeypointEntry::Point(x) => Keypoint::Point(x),
        };
        let plmap = self.plmap.as_ref().ok_or_else(|| {
            CliError::Config(format!("{label}: vertex and point keypoints need a mesh; use `uv u v` entries"))
        })?;
        plmap
            .keypoint_preimage(kp)
            .map_err(|e| CliError::Config(format!("{label}: {e}")))
    }
}

pub fn load_mesh(path: &Path, domain: Domain) -> Result<PLMap, CliError> {
    let mesh_err = |source| CliError::Mesh {
        path: path.to_path_buf(),
        source,
    };
    let mesh = load_obj(path).map_err(mesh_err)?;
    tutte_embed(mesh, domain).map_err(mesh_err)
}

pub fn load_surface(cfg: &SurfaceConfig, domain: Domain, label: &str) -> Result<Surface, CliError> {
    let map = match (&cfg.checkpoint, &cfg.analytic) {
        (Some(path), None) => {
            let ck = load_expecting(path, 3).map_err(|source| CliError::Checkpoint {
                path: path.clone(),
                source,
            })?;
            SurfaceMap::neural(ck.map)?
        }
        (None, Some(a)) => {
            a.validate().map_err(|e| CliError::Config(format!("{label}: {e}")))?;
            if cfg.mesh.is_some() {
                return Err(CliError::Config(format!("{label}: analytic surfaces take no mesh")));
            }
            SurfaceMap::Analytic(*a)
        }
        _ => {
            return Err(CliError::Config(format!(
                "{label}: give exactly one of `checkpoint` and `analytic`"
            )))
        }
    };
    let plmap = cfg.mesh.as_deref().map(|m| load_mesh(m, domain)).transpose()?;
    Ok(Surface { map, plmap })
}

pub fn init_warp(cfg: &WarpConfig, seed: u64) -> Result<NeuralMap, CliError> {
    if let Some(path) = &cfg.checkpoint {
        return load_expecting(path, 2)
            .map(|ck| ck.map)
            .map_err(|source| CliError::Checkpoint {
                path: path.clone(),
                source,
            });
    }
    let arch = cfg.architecture.resolve()?;
    if arch.out_dim != 2 {
        return Err(CliError::Config(format!("warp architecture must have out_dim 2, found {}", arch.out_dim)));
    }
    let net = match cfg.init {
        WarpInit::NearIdentity => build(&arch, seed),
        WarpInit::Identity => NeuralMap::zeros(&arch),
    };
    net.map_err(|e| CliError::Config(e.to_string()))
}

fn load_warp_checkpoint(path: &Path) -> Result<NeuralMap, CliError> {
    load_expecting(path, 2)
        .map(|ck| ck.map)
        .map_err(|source| CliError::Checkpoint {
            path: path.to_path_buf(),
            source,
        })
}

/// The domain grid with the vertices no triangle uses removed.
pub fn export_grid(domain: Domain, n: usize) -> (Vec<[usize; 3]>, Vec<[f64; 2]>) {
    let (faces, pts) = grid_mesh(domain, n.max(1));
    let mut remap = vec![usize::MAX; pts.len()];
    let mut kept = Vec::new();
    let faces = faces
        .iter()
        .map(|f| {
            f.map(|v| {
                if remap[v] == usize::MAX {
                    remap[v] = kept.len();
                    kept.push(pts[v]);
                }
                remap[v]
            })
        })
        .collect();
    (faces, kept)
}

/// ASCII OBJ with optional per-vertex texture coordinates.
pub fn write_obj(path: &Path, positions: &[[f64; 3]], uv: Option<&[[f64; 2]]>, faces: &[[usize; 3]]) -> Result<(), CliError> {
    let mut s = String::new();
    for v in positions {
        writeln!(s, "v {} {} {}", v[0], v[1], v[2]).unwrap();
    }
    if let Some(uv) = uv {
        for t in uv {
            writeln!(s, "vt {} {}", t[0], t[1]).unwrap();
        }
    }
    for f in faces {
        let (a, b, c) = (f[0] + 1, f[1] + 1, f[2] + 1);
        if uv.is_some() {
            writeln!(s, "f {a}/{a} {b}/{b} {c}/{c}").unwrap();
        } else {
            writeln!(s, "f {a} {b} {c}").unwrap();
        }
    }
    std::fs::write(path, s).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn save_map(path: &Path, map: &NeuralMap, name: &str, task: &OptimizationTask, steps: usize, loss: f64) -> Result<(), CliError> {
    let meta = CheckpointMetadata {
        seed: Some(task.seed),
        steps: Some(steps as u64),
        training_loss: loss.is_finite().then_some(loss),
        ..CheckpointMetadata::named(name)
    };
    save(map, &meta, path).map_err(|source| CliError::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}

/// Log file and periodic checkpoints of one training run.
struct Outputs {
    dir: PathBuf,
    task: OptimizationTask,
}

impl Outputs {
    fn new(config: &RunConfig) -> Result<Self, CliError> {
        create_dir(&config.output_dir)?;
        Ok(Outputs {
            dir: config.output_dir.clone(),
            task: config.task.clone(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Trains `obj`, logging to `log.jsonl` and writing
    /// `checkpoints/<name>_<step>.nsm` every `checkpoint_every` steps.
    fn train<O: Objective>(&self, obj: &mut O) -> Result<RunReport, CliError> {
        let log_path = self.path("log.jsonl");
        let file = File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?;
        let mut log = BufWriter::new(file);
        let every = self.task.checkpoint_every;
        let ck_dir = self.path("checkpoints");
        if every > 0 {
            create_dir(&ck_dir)?;
        }
        let task = &self.task;
        let mut checkpoint = |step: usize, maps: &[(String, NeuralMap)]| -> Result<(), OptimizeError> {
            if every == 0 {
                return Ok(());
            }
            for (name, map) in maps {
                let path = ck_dir.join(format!("{name}_{step:06}.nsm"));
                let meta = CheckpointMetadata {
                    seed: Some(task.seed),
                    steps: Some(step as u64),
                    ..CheckpointMetadata::named(name.clone())
                };
                save(map, &meta, path)?;
            }
            Ok(())
        };
        let hooks = TrainHooks {
            log: Some(&mut log),
            checkpoint: Some(&mut checkpoint),
        };
        let report = train(obj, task, hooks)?;
        log.flush().map_err(|e| CliError::io(&log_path, e))?;
        Ok(report)
    }

    fn write_report(&self, name: &str, command: &str, loaded: &LoadedConfig, body: Value) -> Result<PathBuf, CliError> {
        let mut report = json!({
            "command": command,
            "seed": loaded.config.task.seed,
            "config": loaded.text,
            "overrides": loaded.overrides,
            "effective_config": serde_json::to_value(&loaded.config).expect("config serializes"),
        });
        if let (Some(r), Value::Object(extra)) = (report.as_object_mut(), body) {
            r.extend(extra);
        }
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

fn finish(report: &RunReport, path: PathBuf) -> Result<PathBuf, CliError> {
    eprintln!(
        "{}: {} steps, termination {}, {:.1} s",
        report.task,
        report.steps,
        serde_json::to_value(report.termination).expect("termination serializes").as_str().unwrap_or("?"),
        report.wall_clock_seconds
    );
    if report.termination == Termination::Divergence {
        return Err(CliError::Divergence { steps: report.steps });
    }
    Ok(path)
}

pub fn execute(command: Command, loaded: &LoadedConfig) -> Result<PathBuf, CliError> {
    match command {
        Command::Overfit => cmd_overfit(loaded),
        Command::Parameterize => cmd_parameterize(loaded),
        Command::Map => cmd_map(loaded),
        Command::Collection => cmd_collection(loaded),
        Command::Eval => cmd_eval(loaded),
    }
}

fn surface_arch(cfg: &crate::config::OverfitConfig) -> Result<neuralmaps_core::neuralmap::Architecture, CliError> {
    let arch = cfg.architecture.resolve()?;
    if arch.out_dim != 3 {
        return Err(CliError::Config(format!("surface architecture must have out_dim 3, found {}", arch.out_dim)));
    }
    Ok(arch)
}

pub fn cmd_overfit(loaded: &LoadedConfig) -> Result<PathBuf, CliError> {
    let c = &loaded.config;
    let cfg = require("overfit", &c.overfit)?;
    let plmap = load_mesh(&cfg.mesh, c.domain)?;
    let net = build(&surface_arch(cfg)?, c.task.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let out = Outputs::new(c)?;
    write_obj(&out.path("uv.obj"), plmap.mesh().vertices(), Some(plmap.uv()), plmap.mesh().faces())?;
    let mut obj = OverfitObjective::new(&plmap, net, &c.task)?;
    let report = out.train(&mut obj)?;
    save_map(&out.path("surface.nsm"), obj.map(), "surface", &c.task, report.steps, report.final_loss)?;
    let path = out.write_report("report.json", "overfit", loaded, json!({ "run": report }))?;
    finish(&report, path)
}

fn param_objective<'a>(
    surface: &'a Surface,
    warp: NeuralMap,
    domain: Domain,
    task: &OptimizationTask,
) -> Result<ParamObjective<'a>, CliError> {
    let obj = ParamObjective::new(&surface.map, warp, domain, task)?;
    Ok(match &surface.plmap {
        Some(p) => obj.with_eval_mesh(p.mesh().faces().to_vec(), p.uv().to_vec()),
        None => obj,
    })
}

/// Export triangulation of a surface: its mesh (vertices, preimages,
/// faces) or a domain grid pushed through the surface.
fn export_layout(surface: &Surface, domain: Domain, n: usize) -> (Vec<[f64; 3]>, Vec<[f64; 2]>, Vec<[usize; 3]>) {
    match &surface.plmap {
        Some(p) => (p.mesh().vertices().to_vec(), p.uv().to_vec(), p.mesh().faces().to_vec()),
        None => {
            let (faces, pts) = export_grid(domain, n);
            let positions = pts.iter().map(|q| surface.map.evaluate_point(*q)).collect();
            (positions, pts, faces)
        }
    }
}

fn warp_points(warp: &NeuralMap, pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    warp.evaluate(pts).into_iter().map(|y| [y[0], y[1]]).collect()
}

pub fn cmd_parameterize(loaded: &LoadedConfig) -> Result<PathBuf, CliError> {
    let c = &loaded.config;
    let cfg = require("parameterize", &c.parameterize)?;
    let surface = load_surface(&cfg.surface, c.domain, "parameterize.surface")?;
    let warp = init_warp(&cfg.warp, c.task.seed)?;
    let out = Outputs::new(c)?;
    let mut obj = param_objective(&surface, warp, c.domain, &c.task)?;
    let report = out.train(&mut obj)?;
    let warp = obj.into_warp();
    save_map(&out.path("warp.nsm"), &warp, "warp", &c.task, report.steps, report.final_loss)?;
    let (positions, pre, faces) = export_layout(&surface, c.domain, cfg.export_grid);
    let layout = warp_points(&warp, &pre);
    write_obj(&out.path("param.obj"), &positions, Some(&layout), &faces)?;
    let path = out.write_report(
        "report.json",
        "parameterize",
        loaded,
        json!({ "run": report, "distortion": c.task.distortion }),
    )?;
    finish(&report, path)
}

/// Surfaces and keypoint preimages of a surface-map config.
struct MapSetup {
    source: Surface,
    target: Surface,
    p: Vec<[f64; 2]>,
    q: Vec<[f64; 2]>,
}

fn map_setup(cfg: &MapConfig, domain: Domain) -> Result<MapSetup, CliError> {
    let source = load_surface(&cfg.source, domain, "map.source")?;
    let target = load_surface(&cfg.target, domain, "map.target")?;
    let (mut p, mut q) = (Vec::new(), Vec::new());
    if let Some(path) = &cfg.keypoints {
        for row in keypoints::load(path, 2)? {
            p.push(source.preimage(row[0], domain, "map.source")?);
            q.push(target.preimage(row[1], domain, "map.target")?);
        }
    }
    Ok(MapSetup { source, target, p, q })
}

fn map_objective(
    cfg: &MapConfig,
    setup: &MapSetup,
    warp: NeuralMap,
    domain: Domain,
    task: &OptimizationTask,
) -> Result<(SurfaceMapObjective, Option<String>), CliError> {
    let (handle, warning) = SurfaceMapHandle::new(
        setup.source.map.clone(),
        setup.target.map.clone(),
        warp,
        setup.p.clone(),
        setup.q.clone(),
        domain,
        cfg.fixed_corners,
    )?;
    let obj = SurfaceMapObjective::new(handle, task)?;
    let obj = match &setup.source.plmap {
        Some(p) => obj.with_eval_mesh(p.mesh().faces().to_vec(), p.uv().to_vec()),
        None => obj,
    };
    Ok((obj, warning))
}

pub fn cmd_map(loaded: &LoadedConfig) -> Result<PathBuf, CliError> {
    let c = &loaded.config;
    let cfg = require("map", &c.map)?;
    let setup = map_setup(cfg, c.domain)?;
    let warp = init_warp(&cfg.warp, c.task.seed)?;
    let out = Outputs::new(c)?;
    let (mut obj, warning) = map_objective(cfg, &setup, warp, c.domain, &c.task)?;
    let report = out.train(&mut obj)?;
    let handle = obj.into_handle();
    save_map(&out.path("warp.nsm"), &handle.warp, "warp", &c.task, report.steps, report.final_loss)?;
    let (positions, pre, faces) = export_layout(&setup.source, c.domain, cfg.export_grid);
    let pushed = handle.push_mesh_through(&pre);
    write_obj(&out.path("source.obj"), &positions, None, &faces)?;
    write_obj(&out.path("target.obj"), &pushed.positions, None, &faces)?;
    let path = out.write_report(
        "report.json",
        "map",
        loaded,
        json!({
            "run": report,
            "rotation": handle.rotation,
            "rotation_warning": warning,
            "export": { "vertices": pre.len(), "out_of_domain": pushed.out_of_domain },
        }),
    )?;
    finish(&report, path)
}

fn collection_setup(cfg: &CollectionConfig, domain: Domain) -> Result<(Vec<Surface>, Vec<Vec<[f64; 2]>>), CliError> {
    let k = cfg.surfaces.len();
    if k < 2 {
        return Err(CliError::Config(format!("a collection needs at least 2 surfaces, found {k}")));
    }
    let surfaces = cfg
        .surfaces
        .iter()
        .enumerate()
        .map(|(i, s)| load_surface(s, domain, &format!("collection.surfaces[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut kps = vec![Vec::new(); k];
    if let Some(path) = &cfg.keypoints {
        for row in keypoints::load(path, k)? {
            for (i, entry) in row.into_iter().enumerate() {
                kps[i].push(surfaces[i].preimage(entry, domain, &format!("collection.surfaces[{i}]"))?);
            }
        }
    }
    Ok((surfaces, kps))
}

fn collection_objective(
    cfg: &CollectionConfig,
    surfaces: &[Surface],
    kps: Vec<Vec<[f64; 2]>>,
    warps: Vec<NeuralMap>,
    domain: Domain,
    task: &OptimizationTask,
) -> Result<CollectionObjective, CliError> {
    let handle = CollectionHandle::new(
        surfaces.iter().map(|s| s.map.clone()).collect(),
        warps,
        kps,
        domain,
        cfg.fixed_corners,
    )?;
    Ok(CollectionObjective::new(handle, task)?)
}

/// Routes random samples around every 3-cycle `i → j → l → i` and counts
/// the ones that do not return bit-exactly to their start.
fn cycle_check(handle: &CollectionHandle, samples: usize, seed: u64) -> Value {
    let k = handle.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ CYCLE_SALT);
    let qs: Vec<[f64; 2]> = (0..samples).map(|_| handle.domain.sample_interior(&mut rng)).collect();
    let mut cycles = 0usize;
    let mut failures = 0usize;
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            for l in (0..k).filter(|&l| l != i && l != j) {
                cycles += 1;
                for q in &qs {
                    let route = handle.route(*q, &[i, j, l, i]);
                    if route[0].map(f64::to_bits) != route[3].map(f64::to_bits) {
                        failures += 1;
                    }
                }
            }
        }
    }
    json!({ "samples": samples, "cycles": cycles, "failures": failures })
}

pub fn cmd_collection(loaded: &LoadedConfig) -> Result<PathBuf, CliError> {
    let c = &loaded.config;
    let cfg = require("collection", &c.collection)?;
    let (surfaces, kps) = collection_setup(cfg, c.domain)?;
    let warps = (0..surfaces.len())
        .map(|i| init_warp(&cfg.warp, c.task.seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let out = Outputs::new(c)?;
    let mut obj = collection_objective(cfg, &surfaces, kps, warps, c.domain, &c.task)?;
    let report = out.train(&mut obj)?;
    let handle = obj.into_handle();
    for (i, w) in handle.warps.iter().enumerate() {
        let name = format!("warp_{i}");
        save_map(&out.path(&format!("{name}.nsm")), w, &name, &c.task, report.steps, report.final_loss)?;
    }
    let pairs_dir = out.path("pairs");
    create_dir(&pairs_dir)?;
    let (faces, grid) = export_grid(c.domain, cfg.export_grid);
    let pushed: Vec<_> = (0..handle.len()).map(|j| handle.push_pair(j, &grid)).collect();
    let mut exported = Vec::new();
    for (i, j) in handle.ordered_pairs() {
        write_obj(&pairs_dir.join(format!("{i}_to_{j}_source.obj")), &pushed[i].positions, None, &faces)?;
        write_obj(&pairs_dir.join(format!("{i}_to_{j}_target.obj")), &pushed[j].positions, None, &faces)?;
        exported.push(format!("{i}->{j}"));
    }
    let out_of_domain: Vec<usize> = pushed.iter().map(|p| p.out_of_domain.len()).collect();
    let cycle = cycle_check(&handle, cfg.cycle_samples, c.task.seed);
    let path = out.write_report(
        "report.json",
        "collection",
        loaded,
        json!({
            "run": report,
            "pairs": exported,
            "export": { "vertices": grid.len(), "out_of_domain_per_surface": out_of_domain },
            "cycle_check": cycle,
        }),
    )?;
    finish(&report, path)
}

fn expect_checkpoints(paths: &[PathBuf], n: usize, what: &str) -> Result<(), CliError> {
    if paths.len() != n {
        return Err(CliError::Config(format!(
            "eval of {what} needs {n} checkpoint(s), found {}",
            paths.len()
        )));
    }
    Ok(())
}

/// Held-out statistics of trained maps, computed exactly as at the end of
/// training.
pub fn evaluate(config: &RunConfig) -> Result<(EvalTarget, Metrics), CliError> {
    let c = config;
    let e = require("eval", &c.eval)?;
    let metrics = match e.command {
        EvalTarget::Overfit => {
            let cfg = require("overfit", &c.overfit)?;
            expect_checkpoints(&e.checkpoints, 1, "overfit")?;
            let plmap = load_mesh(&cfg.mesh, c.domain)?;
            let path = &e.checkpoints[0];
            let net = load_expecting(path, 3)
                .map_err(|source| CliError::Checkpoint {
                    path: path.clone(),
                    source,
                })?
                .map;
            OverfitObjective::new(&plmap, net, &c.task)?.metrics()?
        }
        EvalTarget::Parameterize => {
            let cfg = require("parameterize", &c.parameterize)?;
            expect_checkpoints(&e.checkpoints, 1, "parameterize")?;
            let surface = load_surface(&cfg.surface, c.domain, "parameterize.surface")?;
            let warp = load_warp_checkpoint(&e.checkpoints[0])?;
            param_objective(&surface, warp, c.domain, &c.task)?.metrics()?
        }
        EvalTarget::Map => {
            let cfg = require("map", &c.map)?;
            expect_checkpoints(&e.checkpoints, 1, "map")?;
            let setup = map_setup(cfg, c.domain)?;
            let warp = load_warp_checkpoint(&e.checkpoints[0])?;
            map_objective(cfg, &setup, warp, c.domain, &c.task)?.0.metrics()?
        }
        EvalTarget::Collection => {
            let cfg = require("collection", &c.collection)?;
            let (surfaces, kps) = collection_setup(cfg, c.domain)?;
            expect_checkpoints(&e.checkpoints, surfaces.len(), "collection")?;
            let warps = e
                .checkpoints
                .iter()
                .map(|p| load_warp_checkpoint(p))
                .collect::<Result<Vec<_>, _>>()?;
            collection_objective(cfg, &surfaces, kps, warps, c.domain, &c.task)?.metrics()?
        }
    };
    Ok((e.command, metrics))
}

/// Two-column text rendering of the present metrics.
pub fn metrics_table(m: &Metrics) -> String {
    let mut s = String::new();
    let mut row = |k: &str, v: String| writeln!(s, "{k:<24} {v}").unwrap();
    let fields: [(&str, Option<f64>); 6] = [
        ("position_rmse", m.position_rmse),
        ("normal_deviation_deg", m.normal_deviation_deg),
        ("median_density", m.median_density),
        ("mean_density", m.mean_density),
        ("keypoint_residual", m.keypoint_residual),
        ("boundary_residual", m.boundary_residual),
    ];
    for (k, v) in fields {
        if let Some(v) = v {
            row(k, format!("{v:.6e}"));
        }
    }
    if let Some(n) = m.flip_count {
        row("flip_count", n.to_string());
    }
    if let Some(p) = m.flip_percentage {
        row("flip_percentage", format!("{p:.4}"));
    }
    for (pair, v) in &m.pair_medians {
        row(&format!("median[{pair}]"), format!("{v:.6e}"));
    }
    s
}

pub fn cmd_eval(loaded: &LoadedConfig) -> Result<PathBuf, CliError> {
    let c = &loaded.config;
    let (target, metrics) = evaluate(c)?;
    print!("{}", metrics_table(&metrics));
    let out = Outputs::new(c)?;
    out.write_report("eval.json", "eval", loaded, json!({ "target": target, "metrics": metrics }))
}
