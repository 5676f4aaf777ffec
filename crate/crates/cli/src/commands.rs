use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crowdtrack::simulator::{corrupt, gen_scene, sample_point_cloud, Area, SceneSequence};
use crowdtrack::sparsegrid::{run_encoder, voxelize, Topology, VoxelSpec};
use crowdtrack::targets::{make_daw_with, make_heatmap_with, make_motion_offsets, make_relationship_offsets, GtObject};
use crowdtrack::{density_stats, evaluate_sequence, GridSpec, MatchConfig, SimConfig, Tracker};
use log::info;
use serde::Serialize;

use crate::config::RunConfig;
use crate::formats::{
    det_records, grid_pgm, grid_text, gt_records, read_jsonl, to_detections, to_gt, trajectory_records, write_jsonl,
    FrameRecord,
};
use crate::output::{check_target, read_input, FileDigest, Staged};

pub struct Common<'a> {
    pub config: Option<&'a Path>,
    pub out: &'a Path,
    pub seed: Option<u64>,
}

struct Prepared {
    cfg: RunConfig,
    inputs: Vec<FileDigest>,
}

fn prepare(common: &Common) -> Result<Prepared> {
    check_target(common.out)?;
    let (mut cfg, raw) = RunConfig::load(common.config)?;
    if let Some(s) = common.seed {
        cfg.reseed(s);
    }
    let mut inputs = Vec::new();
    if let (Some(p), Some(bytes)) = (common.config, raw) {
        let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
        inputs.push(FileDigest::of(&name, &bytes));
    }
    Ok(Prepared { cfg, inputs })
}

fn read_frames(path: &Path, inputs: &mut Vec<FileDigest>) -> Result<Vec<FrameRecord>> {
    let text = read_input(path, inputs)?;
    read_jsonl(&text, &path.display().to_string())
}

fn echo<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

pub fn gen(common: &Common) -> Result<PathBuf> {
    let Prepared { cfg, inputs } = prepare(common)?;
    if common.config.is_none() {
        bail!("gen needs --config with a [scene] section");
    }
    let sim = cfg.scene()?.to_sim()?;
    let scene = gen_scene(&sim)?;
    let dets = corrupt(&scene, &cfg.noise)?;
    info!("generated {} frames of {} pedestrians", scene.len(), sim.n_pedestrians);

    let mut staged = Staged::default();
    staged.add("gt.jsonl", write_jsonl(&gt_records(&scene.frames, &scene.timestamps))?);
    staged.add("det.jsonl", write_jsonl(&det_records(&dets, &scene.timestamps))?);
    let seeds = BTreeMap::from([("scene".to_string(), sim.seed), ("noise".to_string(), cfg.noise.seed)]);
    let config = serde_json::json!({ "scene": echo(cfg.scene()?)?, "noise": echo(&cfg.noise)? });
    staged.commit(common.out, "gen", config, seeds, inputs)
}

#[derive(Serialize)]
struct OffsetObject {
    id: u64,
    offset: [f64; 3],
    newborn: bool,
    rel: Option<[f64; 2]>,
}

#[derive(Serialize)]
struct OffsetFrame {
    frame: usize,
    objects: Vec<OffsetObject>,
}

pub struct TargetsOpts<'a> {
    pub gt: &'a Path,
    pub grid: Option<(f64, f64)>,
    pub frame: Option<usize>,
    pub dump_pgm: bool,
}

pub fn targets(common: &Common, opts: &TargetsOpts) -> Result<PathBuf> {
    let Prepared { mut cfg, mut inputs } = prepare(common)?;
    if let Some((dx, dy)) = opts.grid {
        cfg.targets.dx = dx;
        cfg.targets.dy = dy;
    }
    let t = cfg.targets;
    let grid = t.grid().context("invalid target grid")?;
    let frames = to_gt(&read_frames(opts.gt, &mut inputs)?)?;
    if let Some(f) = opts.frame {
        if !frames.iter().any(|(n, _)| *n == f) {
            bail!("frame {f} is not in {}", opts.gt.display());
        }
    }

    let mut staged = Staged::default();
    let mut offsets = String::new();
    let none: Vec<GtObject<f64>> = Vec::new();
    for (i, (frame, objs)) in frames.iter().enumerate() {
        if opts.frame.is_some_and(|f| f != *frame) {
            continue;
        }
        let prev = match i.checked_sub(1).map(|p| &frames[p]) {
            Some((pf, p)) if pf + 1 == *frame => p,
            _ => &none,
        };
        let ctx = || format!("frame {frame}");
        let heat = make_heatmap_with(objs, &grid, t.sigma, t.combine).with_context(ctx)?;
        let weights = make_daw_with(objs, &grid, t.th, t.anchor).with_context(ctx)?;
        let motion = make_motion_offsets(objs, prev).with_context(ctx)?;
        let rel = make_relationship_offsets(objs, t.neighbor_radius).with_context(ctx)?;
        let record = OffsetFrame {
            frame: *frame,
            objects: objs
                .iter()
                .map(|o| {
                    let m = motion[&o.instance_id];
                    let r = rel[&o.instance_id];
                    OffsetObject {
                        id: o.instance_id,
                        offset: [m.offset.ox, m.offset.oy, m.offset.oz],
                        newborn: m.newborn,
                        rel: r.defined.then_some([r.rx, r.ry]),
                    }
                })
                .collect(),
        };
        offsets.push_str(&serde_json::to_string(&record)?);
        offsets.push('\n');
        staged.add(format!("heatmap_{frame:05}.grid"), grid_text(&heat));
        staged.add(format!("weights_{frame:05}.grid"), grid_text(&weights));
        if opts.dump_pgm {
            staged.add(format!("heatmap_{frame:05}.pgm"), grid_pgm(&heat));
            staged.add(format!("weights_{frame:05}.pgm"), grid_pgm(&weights));
        }
    }
    staged.add("offsets.jsonl", offsets);
    info!("wrote targets for {} frames on a {}x{} grid", frames.len(), grid.nx(), grid.ny());
    staged.commit(common.out, "targets", echo(&t)?, BTreeMap::new(), inputs)
}

pub fn track(common: &Common, det: &Path) -> Result<PathBuf> {
    let Prepared { cfg, mut inputs } = prepare(common)?;
    let records = read_frames(det, &mut inputs)?;
    let frames = to_detections(&records)?;
    let mut tracker = Tracker::new(cfg.tracker)?;
    for (frame, dets) in &frames {
        tracker.step(*frame, dets)?;
    }
    let trajectories = tracker.into_trajectories();
    info!("{} trajectories over {} frames", trajectories.len(), frames.len());
    let stamps: Vec<(usize, f64)> = records.iter().map(|r| (r.frame, r.timestamp)).collect();
    let mut staged = Staged::default();
    staged.add("traj.jsonl", write_jsonl(&trajectory_records(&trajectories, &stamps))?);
    staged.commit(common.out, "track", echo(&cfg.tracker)?, BTreeMap::new(), inputs)
}

/// Spreads `(frame, items)` pairs into a dense frame-indexed list.
fn by_frame<T: Clone>(frames: &[(usize, Vec<T>)], len: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new(); len];
    for (f, items) in frames {
        out[*f] = items.clone();
    }
    out
}

fn fmt_metric(v: crowdtrack::Result<f64>) -> String {
    match v {
        Ok(x) => format!("{x}"),
        Err(_) => "undefined".to_string(),
    }
}

pub struct EvalOpts<'a> {
    pub gt: &'a Path,
    pub traj: &'a Path,
    pub iou_th: Option<f64>,
    pub radius: Option<f64>,
}

pub fn eval(common: &Common, opts: &EvalOpts) -> Result<PathBuf> {
    let Prepared { mut cfg, mut inputs } = prepare(common)?;
    if let Some(t) = opts.iou_th {
        cfg.eval.iou_threshold = t;
    }
    if let Some(r) = opts.radius {
        cfg.eval.density_radius = r;
    }
    let gt = to_gt(&read_frames(opts.gt, &mut inputs)?)?;
    let traj = to_gt(&read_frames(opts.traj, &mut inputs)?)?;
    let len = gt.iter().chain(&traj).map(|(f, _)| f + 1).max().unwrap_or(0);
    let gt_dense = by_frame(&gt, len);
    let traj_dense = by_frame(&traj, len);
    let bev = |frames: &[Vec<GtObject<f64>>]| -> Vec<Vec<(u64, crowdtrack::BoxBev<f64>)>> {
        frames
            .iter()
            .map(|f| f.iter().map(|o| (o.instance_id, o.bbox.bev())).collect())
            .collect()
    };
    let match_cfg = MatchConfig {
        iou_threshold: cfg.eval.iou_threshold,
    };
    let ev = evaluate_sequence(&bev(&gt_dense), &bev(&traj_dense), &match_cfg)?;
    let density = density_stats(&gt_dense, cfg.eval.density_radius)?;
    let (mtr, mlr) = match ev.mtr_mlr() {
        Ok((a, b)) => (format!("{a}"), format!("{b}")),
        Err(_) => ("undefined".to_string(), "undefined".to_string()),
    };
    let c = ev.counts;
    let mut report = String::new();
    let pred_boxes: usize = traj.iter().map(|(_, v)| v.len()).sum();
    for (k, v) in [
        ("frames", len.to_string()),
        ("gt_boxes", c.p.to_string()),
        ("gt_trajectories", ev.coverage.len().to_string()),
        ("pred_boxes", pred_boxes.to_string()),
        ("tp", c.tp.to_string()),
        ("fp", c.fp.to_string()),
        ("fn", c.fn_.to_string()),
        ("ids", c.ids.to_string()),
        ("mota", fmt_metric(ev.mota())),
        ("mtr", mtr),
        ("mlr", mlr),
        ("iou_threshold", cfg.eval.iou_threshold.to_string()),
        ("density_radius", cfg.eval.density_radius.to_string()),
        ("density", density.to_string()),
    ] {
        writeln!(report, "{k} = {v}").expect("string write");
    }
    info!("MOTA {}", fmt_metric(ev.mota()));
    let mut staged = Staged::default();
    staged.add("metrics.txt", report);
    staged.commit(common.out, "eval", echo(&cfg.eval)?, BTreeMap::new(), inputs)
}

pub fn density(common: &Common, gt: &Path, radii: &[f64]) -> Result<PathBuf> {
    let Prepared { cfg, mut inputs } = prepare(common)?;
    let radii = if radii.is_empty() { vec![cfg.eval.density_radius] } else { radii.to_vec() };
    let frames = to_gt(&read_frames(gt, &mut inputs)?)?;
    let lists: Vec<Vec<GtObject<f64>>> = frames.into_iter().map(|(_, v)| v).collect();
    let mut report = String::new();
    writeln!(report, "frames = {}", lists.len()).expect("string write");
    writeln!(report, "objects = {}", lists.iter().map(Vec::len).sum::<usize>()).expect("string write");
    for r in &radii {
        writeln!(report, "density[r={r}] = {}", fmt_metric(density_stats(&lists, *r))).expect("string write");
    }
    let mut staged = Staged::default();
    staged.add("density.txt", report);
    staged.commit(common.out, "density", serde_json::json!({ "radii": radii }), BTreeMap::new(), inputs)
}

pub struct VoxelOpts<'a> {
    pub gt: Option<&'a Path>,
    pub frame: Option<usize>,
    pub topologies: Vec<Topology>,
}

fn scene_from_records(frames: &[(usize, Vec<GtObject<f64>>)], frame: Option<usize>) -> Result<Option<(SceneSequence, usize)>> {
    let Some(last) = frames.last() else { return Ok(None) };
    let target = frame.unwrap_or(last.0);
    let Some(i) = frames.iter().position(|(f, _)| *f == target) else {
        bail!("frame {target} is not in the ground-truth file");
    };
    let g = GridSpec::<f64>::detection_range();
    let area = Area::new(g.x_min(), g.x_max(), g.y_min(), g.y_max())?;
    let mut seq = Vec::new();
    if i > 0 && frames[i - 1].0 + 1 == target {
        seq.push(frames[i - 1].1.clone());
    }
    seq.push(frames[i].1.clone());
    let idx = seq.len() - 1;
    let n = seq.len();
    Ok(Some((
        SceneSequence {
            frames: seq,
            timestamps: (0..n).map(|k| k as f64).collect(),
            frame_rate: 1.0,
            area,
        },
        idx,
    )))
}

pub fn voxelshapes(common: &Common, opts: &VoxelOpts) -> Result<PathBuf> {
    let Prepared { cfg, mut inputs } = prepare(common)?;
    let mut seeds = BTreeMap::from([("points".to_string(), cfg.points.seed), ("encoder".to_string(), cfg.encoder.seed)]);
    let source = match opts.gt {
        Some(path) => scene_from_records(&to_gt(&read_frames(path, &mut inputs)?)?, opts.frame)?,
        None => {
            let sim = match &cfg.scene {
                Some(s) => s.to_sim()?,
                None => SimConfig {
                    n_frames: 2,
                    seed: cfg.points.seed,
                    ..SimConfig::default()
                },
            };
            seeds.insert("scene".to_string(), sim.seed);
            let scene = gen_scene(&sim)?;
            let f = opts.frame.unwrap_or(scene.len() - 1);
            Some((scene, f))
        }
    };
    let cloud = match &source {
        Some((scene, f)) => sample_point_cloud(scene, *f, &cfg.points)?,
        None => crowdtrack::PointCloud::new(Vec::new())?,
    };
    let spec = VoxelSpec::<f64>::default_lidar();
    let vox = voxelize(&cloud, &spec);
    let mut report = String::new();
    let join = |v: &[String]| v.join("x");
    let w = &mut report;
    writeln!(w, "points = {}", cloud.len())?;
    writeln!(w, "dropped = {}", vox.dropped)?;
    writeln!(w, "voxel_size = {}", join(&spec.size().map(|v| v.to_string())))?;
    writeln!(w, "bound = {}", join(&spec.dims().map(|v| v.to_string())))?;
    for &topo in &opts.topologies {
        let run = run_encoder(&vox.grid, &spec, topo, &cfg.encoder)?;
        writeln!(w, "[{}]", topo.label())?;
        for s in &run.stages {
            writeln!(
                w,
                "{} stride={} resolution={} bound={} occupied={} bev_occupied={} channels={}",
                s.name,
                s.stride,
                join(&s.resolution.map(|v| v.to_string())),
                join(&s.bound.map(|v| v.to_string())),
                s.occupied,
                s.bev_occupied,
                s.channels
            )?;
        }
    }
    let mut staged = Staged::default();
    staged.add("shapes.txt", report);
    let labels: Vec<&str> = opts.topologies.iter().map(|t| t.label()).collect();
    let config = serde_json::json!({
        "points": echo(&cfg.points)?,
        "encoder": echo(&cfg.encoder)?,
        "topologies": labels,
        "frame": opts.frame,
    });
    staged.commit(common.out, "voxelshapes", config, seeds, inputs)
}
