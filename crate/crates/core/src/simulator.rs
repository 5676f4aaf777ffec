//! Synthetic crowded-pedestrian sequences and detection corruption.
//!
//! Pedestrians are placed by a parent-offspring process: groups of walkers
//! share a heading and hold a loose formation around a moving group center.
//! Group size and spread are solved so that the expected Density-2 matches
//! the configured target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Box3D;
use crate::sparsegrid::{Point, PointCloud};
use crate::targets::{make_motion_offsets, GtObject, MotionOffset};
use crate::tracker::Detection;

/// Minimum center distance between ground-truth pedestrians, in meters.
pub const MIN_SEPARATION: f64 = 0.3;
/// Radius of the crowding statistic the density target refers to.
pub const DENSITY_RADIUS: f64 = 2.0;
/// Nominal pedestrian box, length x width x height in meters.
pub const PEDESTRIAN_SIZE: [f64; 3] = [0.6, 0.6, 1.7];
/// Relative size jitter.
pub const SIZE_JITTER: f64 = 0.1;
/// Heading resampling interval bounds, in seconds.
pub const HEADING_INTERVAL: [f64; 2] = [2.0, 5.0];

const MIN_SPREAD: f64 = 0.4;
const MAX_SPREAD: f64 = 20.0;
const PLACEMENT_TRIES: usize = 2000;

/// Axis-aligned simulation area in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Area {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let a = Self { x_min, x_max, y_min, y_max };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite());
        if !finite || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(Error::invalid("area", "extents must be finite with max > min"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    fn shrink(&self, margin: f64) -> Area {
        let mx = margin.min(0.25 * self.width());
        let my = margin.min(0.25 * self.height());
        Area {
            x_min: self.x_min + mx,
            x_max: self.x_max - mx,
            y_min: self.y_min + my,
            y_max: self.y_max - my,
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        [
            rng.gen_range(self.x_min..=self.x_max),
            rng.gen_range(self.y_min..=self.y_max),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_pedestrians: usize,
    pub area: Area,
    /// Mean number of other pedestrians within 2 m.
    pub target_density2: f64,
    /// Walking speed range in m/s.
    pub speed_min: f64,
    pub speed_max: f64,
    pub frame_rate: f64,
    pub n_frames: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_pedestrians: 100,
            area: Area {
                x_min: -30.0,
                x_max: 30.0,
                y_min: -30.0,
                y_max: 30.0,
            },
            target_density2: 1.0,
            speed_min: 0.5,
            speed_max: 1.5,
            frame_rate: 10.0,
            n_frames: 20,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.area.validate()?;
        if self.n_frames == 0 {
            return Err(Error::invalid("n_frames", "must be positive"));
        }
        if !(self.frame_rate > 0.0) || !self.frame_rate.is_finite() {
            return Err(Error::invalid("frame_rate", "must be positive"));
        }
        if !(self.target_density2 >= 0.0) || !self.target_density2.is_finite() {
            return Err(Error::invalid("target_density2", "must be finite and >= 0"));
        }
        if !(self.speed_min >= 0.0) || !(self.speed_max >= self.speed_min) || !self.speed_max.is_finite() {
            return Err(Error::invalid("speed", "need 0 <= speed_min <= speed_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Per-axis position jitter of detected boxes, meters.
    pub pos_sigma: f64,
    /// Per-axis noise on predicted motion offsets, meters.
    pub offset_sigma: f64,
    pub p_miss: f64,
    /// Extra miss probability per meter of range from the origin.
    pub miss_range_slope: f64,
    /// Expected false detections per frame.
    pub clutter_rate: f64,
    /// Mean score of true detections.
    pub score_hi: f64,
    /// Mean score of clutter.
    pub score_lo: f64,
    /// Score spread; larger values overlap the two populations more.
    pub score_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::zero()
    }
}

impl NoiseConfig {
    /// Identity corruption.
    pub fn zero() -> Self {
        Self {
            pos_sigma: 0.0,
            offset_sigma: 0.0,
            p_miss: 0.0,
            miss_range_slope: 0.0,
            clutter_rate: 0.0,
            score_hi: 0.9,
            score_lo: 0.2,
            score_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pos_sigma", self.pos_sigma),
            ("offset_sigma", self.offset_sigma),
            ("score_sigma", self.score_sigma),
            ("clutter_rate", self.clutter_rate),
            ("miss_range_slope", self.miss_range_slope),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        for (name, v) in [("p_miss", self.p_miss), ("score_hi", self.score_hi), ("score_lo", self.score_lo)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSequence {
    pub frames: Vec<Vec<GtObject<f64>>>,
    pub timestamps: Vec<f64>,
    pub frame_rate: f64,
    pub area: Area,
}

impl SceneSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Independent stream seed derived from a base seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Probability that two independent uniform points in a `w x h` rectangle
/// lie within `r` of each other (valid for `r <= min(w, h)`).
pub fn uniform_pair_probability(w: f64, h: f64, r: f64) -> f64 {
    let r = r.min(w.min(h));
    let num = std::f64::consts::PI * r * r * w * h - 4.0 / 3.0 * r.powi(3) * (w + h) + 0.5 * r.powi(4);
    (num / (w * w * h * h)).clamp(0.0, 1.0)
}

/// Probability that two members of an isotropic Gaussian group with
/// per-axis spread `s` are within `r`.
pub fn group_pair_probability(s: f64, r: f64) -> f64 {
    1.0 - (-r * r / (4.0 * s * s)).exp()
}

/// Group layout solved from the density target.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPlan {
    pub sizes: Vec<usize>,
    /// Per-axis Gaussian spread of members around the group center, meters.
    pub spread: f64,
    /// Closed-form expected Density-2 of the plan.
    pub expected_density2: f64,
}

/// Splits `n` into `groups` near-equal group sizes.
fn split_sizes(n: usize, groups: usize) -> Vec<usize> {
    (0..groups).map(|g| n / groups + usize::from(g < n % groups)).collect()
}

/// Group centers stay this many spreads away from the area edge.
const PARENT_MARGIN: f64 = 1.0;

fn parent_region(area: &Area, spread: f64) -> Area {
    area.shrink(PARENT_MARGIN * spread)
}

fn max_spread(area: &Area) -> f64 {
    (0.25 * area.width().min(area.height()) / PARENT_MARGIN).clamp(MIN_SPREAD, MAX_SPREAD)
}

fn expected_density(sizes: &[usize], spread: f64, area: &Area) -> f64 {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let region = parent_region(area, spread);
    let p_bg = uniform_pair_probability(region.width(), region.height(), DENSITY_RADIUS);
    let p_grp = group_pair_probability(spread, DENSITY_RADIUS);
    let (mut within, mut across) = (0.0, 0.0);
    for &sz in sizes {
        within += (sz * (sz - 1)) as f64;
        across += (sz * (n - sz)) as f64;
    }
    (within * p_grp + across * p_bg) / n as f64
}

/// Picks the largest group count whose tightest layout still reaches the
/// target, then solves the spread on a scan-and-bisect bracket.
pub fn plan_groups(cfg: &SimConfig) -> Result<GroupPlan> {
    cfg.validate()?;
    let n = cfg.n_pedestrians;
    let target = cfg.target_density2;
    if n == 0 {
        return Ok(GroupPlan {
            sizes: Vec::new(),
            spread: MIN_SPREAD,
            expected_density2: 0.0,
        });
    }
    let area = &cfg.area;
    let floor = expected_density(&split_sizes(n, n), MIN_SPREAD, area);
    if target < 0.9 * floor - 0.05 {
        return Err(Error::Infeasible(format!(
            "Density-2 target {target} is below {floor:.3}, the value {n} pedestrians reach when spread \
             uniformly over {}x{} m; enlarge the area or reduce the count",
            area.width(),
            area.height()
        )));
    }
    if target <= floor {
        return Ok(GroupPlan {
            sizes: split_sizes(n, n),
            spread: MIN_SPREAD,
            expected_density2: floor,
        });
    }
    let sizes = (1..=n)
        .rev()
        .map(|g| split_sizes(n, g))
        .find(|s| expected_density(s, MIN_SPREAD, area) >= target)
        .ok_or_else(|| {
            Error::Infeasible(format!(
                "Density-2 target {target} needs more than {n} pedestrians packed into one group"
            ))
        })?;
    let s_max = max_spread(area);
    let steps = 200;
    let at = |i: usize| MIN_SPREAD * (s_max / MIN_SPREAD).powf(i as f64 / steps as f64);
    let (mut lo, mut hi) = (MIN_SPREAD, s_max);
    for i in 1..=steps {
        if expected_density(&sizes, at(i), area) <= target {
            lo = at(i - 1);
            hi = at(i);
            break;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if expected_density(&sizes, mid, area) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let spread = 0.5 * (lo + hi);
    Ok(GroupPlan {
        expected_density2: expected_density(&sizes, spread, area),
        sizes,
        spread,
    })
}

struct Group {
    center: [f64; 2],
    velocity: [f64; 2],
    next_turn: f64,
    region: Area,
}

struct Walker {
    group: usize,
    formation: [f64; 2],
    pos: [f64; 2],
    size: [f64; 3],
    yaw: f64,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn far_enough(p: [f64; 2], others: &[[f64; 2]]) -> bool {
    let s2 = MIN_SEPARATION * MIN_SEPARATION;
    others.iter().all(|&q| dist2(p, q) >= s2)
}

fn random_velocity(cfg: &SimConfig, rng: &mut impl Rng) -> [f64; 2] {
    let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let speed = if cfg.speed_max > cfg.speed_min {
        rng.gen_range(cfg.speed_min..cfg.speed_max)
    } else {
        cfg.speed_min
    };
    [speed * heading.cos(), speed * heading.sin()]
}

/// Generates a ground-truth sequence. Pedestrians persist for the whole
/// sequence; ids are `0..n_pedestrians`.
pub fn gen_scene(cfg: &SimConfig) -> Result<SceneSequence> {
    let plan = plan_groups(cfg)?;
    let mut place_rng = rng_for(cfg.seed, 0);
    let mut motion_rng = rng_for(cfg.seed, 1);
    let mut size_rng = rng_for(cfg.seed, 2);
    let dt = 1.0 / cfg.frame_rate;
    let normal = Normal::new(0.0, plan.spread).expect("positive spread");

    let mut groups = Vec::with_capacity(plan.sizes.len());
    let mut walkers: Vec<Walker> = Vec::with_capacity(cfg.n_pedestrians);
    let mut placed: Vec<[f64; 2]> = Vec::with_capacity(cfg.n_pedestrians);
    for (g, &sz) in plan.sizes.iter().enumerate() {
        let region = parent_region(&cfg.area, plan.spread);
        let mut center = region.sample(&mut place_rng);
        for _ in 0..sz {
            let pos = (0..PLACEMENT_TRIES)
                .map(|_| {
                    if sz == 1 {
                        region.sample(&mut place_rng)
                    } else {
                        [center[0] + normal.sample(&mut place_rng), center[1] + normal.sample(&mut place_rng)]
                    }
                })
                .find(|&p| cfg.area.contains(p) && far_enough(p, &placed))
                .ok_or_else(|| {
                    Error::Infeasible(format!(
                        "could not place pedestrian {} with {MIN_SEPARATION} m separation; \
                         the area is too small for {} pedestrians at this density",
                        placed.len(),
                        cfg.n_pedestrians
                    ))
                })?;
            if sz == 1 {
                center = pos;
            }
            placed.push(pos);
            let jitter = |rng: &mut ChaCha8Rng| 1.0 + rng.gen_range(-SIZE_JITTER..=SIZE_JITTER);
            let size = PEDESTRIAN_SIZE.map(|s| s * jitter(&mut size_rng));
            walkers.push(Walker {
                group: g,
                formation: [pos[0] - center[0], pos[1] - center[1]],
                pos,
                size,
                yaw: 0.0,
            });
        }
        let velocity = random_velocity(cfg, &mut motion_rng);
        let next_turn = motion_rng.gen_range(HEADING_INTERVAL[0]..=HEADING_INTERVAL[1]);
        groups.push(Group {
            center,
            velocity,
            next_turn,
            region,
        });
    }
    for w in &mut walkers {
        w.yaw = groups[w.group].velocity[1].atan2(groups[w.group].velocity[0]);
    }

    let max_step = 2.0 * cfg.speed_max.max(0.1) * dt;
    let mut frames = Vec::with_capacity(cfg.n_frames);
    let mut timestamps = Vec::with_capacity(cfg.n_frames);
    for f in 0..cfg.n_frames {
        let t = f as f64 * dt;
        if f > 0 {
            for g in &mut groups {
                if t >= g.next_turn {
                    g.velocity = random_velocity(cfg, &mut motion_rng);
                    g.next_turn = t + motion_rng.gen_range(HEADING_INTERVAL[0]..=HEADING_INTERVAL[1]);
                }
                for axis in 0..2 {
                    let (lo, hi) = if axis == 0 {
                        (g.region.x_min, g.region.x_max)
                    } else {
                        (g.region.y_min, g.region.y_max)
                    };
                    let mut c = g.center[axis] + g.velocity[axis] * dt;
                    if c < lo || c > hi {
                        g.velocity[axis] = -g.velocity[axis];
                        c = c.clamp(lo, hi);
                    }
                    g.center[axis] = c;
                }
            }
            step_walkers(&mut walkers, &groups, &cfg.area, max_step);
        }
        let objects = walkers
            .iter()
            .enumerate()
            .map(|(id, w)| {
                let [l, wd, h] = w.size;
                Ok(GtObject {
                    instance_id: id as u64,
                    frame: f,
                    bbox: Box3D::new(w.pos[0], w.pos[1], 0.5 * h, l, wd, h, w.yaw)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(objects);
        timestamps.push(t);
    }
    Ok(SceneSequence {
        frames,
        timestamps,
        frame_rate: cfg.frame_rate,
        area: cfg.area,
    })
}

/// Moves every walker toward its formation slot. Proposals that leave the
/// area or come closer than the minimum separation are reverted until the
/// whole configuration is valid again.
fn step_walkers(walkers: &mut [Walker], groups: &[Group], area: &Area, max_step: f64) {
    let old: Vec<[f64; 2]> = walkers.iter().map(|w| w.pos).collect();
    let proposed: Vec<[f64; 2]> = walkers
        .iter()
        .map(|w| {
            let c = groups[w.group].center;
            let goal = [c[0] + w.formation[0], c[1] + w.formation[1]];
            let d = [goal[0] - w.pos[0], goal[1] - w.pos[1]];
            let len = d[0].hypot(d[1]);
            let k = if len > max_step { max_step / len } else { 1.0 };
            [w.pos[0] + k * d[0], w.pos[1] + k * d[1]]
        })
        .collect();
    let mut accepted: Vec<bool> = proposed.iter().map(|&p| area.contains(p)).collect();
    let s2 = MIN_SEPARATION * MIN_SEPARATION;
    loop {
        let pos = |i: usize| if accepted[i] { proposed[i] } else { old[i] };
        let mut reject = Vec::new();
        for i in 0..walkers.len() {
            for j in i + 1..walkers.len() {
                if (accepted[i] || accepted[j]) && dist2(pos(i), pos(j)) < s2 {
                    reject.push(if accepted[j] { j } else { i });
                }
            }
        }
        if reject.is_empty() {
            break;
        }
        for r in reject {
            accepted[r] = false;
        }
    }
    for (i, w) in walkers.iter_mut().enumerate() {
        if accepted[i] {
            let d = [proposed[i][0] - w.pos[0], proposed[i][1] - w.pos[1]];
            if d[0] != 0.0 || d[1] != 0.0 {
                w.yaw = d[1].atan2(d[0]);
            }
            w.pos = proposed[i];
        }
    }
}

/// One scene per density target; every scene uses the base seed.
pub fn density_sweep(base: &SimConfig, densities: &[f64]) -> Result<Vec<SceneSequence>> {
    densities
        .iter()
        .map(|&d| {
            gen_scene(&SimConfig {
                target_density2: d,
                ..base.clone()
            })
        })
        .collect()
}

/// Turns ground truth into detections with motion offsets. Frame 0 and
/// newborn objects carry a zero offset plus noise.
pub fn corrupt(scene: &SceneSequence, noise: &NoiseConfig) -> Result<Vec<Vec<Detection<f64>>>> {
    noise.validate()?;
    let mut rng = rng_for(noise.seed, 3);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let gauss = |rng: &mut ChaCha8Rng, sigma: f64| if sigma > 0.0 { sigma * std.sample(rng) } else { 0.0 };
    let clutter = (noise.clutter_rate > 0.0).then(|| Poisson::new(noise.clutter_rate).expect("positive rate"));

    let mut out = Vec::with_capacity(scene.frames.len());
    for (f, curr) in scene.frames.iter().enumerate() {
        let prev: &[GtObject<f64>] = if f > 0 { &scene.frames[f - 1] } else { &[] };
        let offsets = make_motion_offsets(curr, prev)?;
        let mut dets = Vec::with_capacity(curr.len());
        for o in curr {
            let b = o.bbox;
            let p_miss = (noise.p_miss + noise.miss_range_slope * b.cx.hypot(b.cy)).min(1.0);
            if p_miss > 0.0 && rng.gen::<f64>() < p_miss {
                continue;
            }
            let (jx, jy, jz) = (gauss(&mut rng, noise.pos_sigma), gauss(&mut rng, noise.pos_sigma), gauss(&mut rng, noise.pos_sigma));
            let bbox = Box3D::new(b.cx + jx, b.cy + jy, b.cz + jz, b.length, b.width, b.height, b.yaw)?;
            let m = offsets[&o.instance_id].offset;
            let offset = MotionOffset {
                ox: m.ox + gauss(&mut rng, noise.offset_sigma),
                oy: m.oy + gauss(&mut rng, noise.offset_sigma),
                oz: m.oz + gauss(&mut rng, noise.offset_sigma),
            };
            let score = (noise.score_hi + gauss(&mut rng, noise.score_sigma)).clamp(0.0, 1.0);
            dets.push(Detection::new(bbox, score, offset, f)?);
        }
        if let Some(pois) = &clutter {
            let k = pois.sample(&mut rng) as usize;
            for _ in 0..k {
                let c = scene.area.sample(&mut rng);
                let s = PEDESTRIAN_SIZE.map(|v| v * (1.0 + rng.gen_range(-SIZE_JITTER..=SIZE_JITTER)));
                let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let bbox = Box3D::new(c[0], c[1], 0.5 * s[2], s[0], s[1], s[2], yaw)?;
                let offset = MotionOffset {
                    ox: gauss(&mut rng, noise.offset_sigma),
                    oy: gauss(&mut rng, noise.offset_sigma),
                    oz: 0.0,
                };
                let score = (noise.score_lo + gauss(&mut rng, noise.score_sigma)).clamp(0.0, 1.0);
                dets.push(Detection::new(bbox, score, offset, f)?);
            }
        }
        out.push(dets);
    }
    Ok(out)
}

/// Returns point-sampling parameters for synthetic sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointSampling {
    pub points_per_box: usize,
    /// Uniform ground returns per sweep.
    pub ground_points: usize,
    pub seed: u64,
}

impl Default for PointSampling {
    fn default() -> Self {
        Self {
            points_per_box: 64,
            ground_points: 2000,
            seed: 0,
        }
    }
}

/// Two-sweep cloud around frame `frame`: points from the current boxes get
/// time flag 0, points from the previous frame's boxes get 1.
pub fn sample_point_cloud(scene: &SceneSequence, frame: usize, cfg: &PointSampling) -> Result<PointCloud<f64>> {
    if frame >= scene.frames.len() {
        return Err(Error::invalid("frame", format!("{frame} is past the last frame {}", scene.frames.len())));
    }
    let mut rng = rng_for(cfg.seed, 4 + frame as u64);
    let mut points = Vec::new();
    let sweeps: Vec<(u8, &[GtObject<f64>])> = if frame > 0 {
        vec![(0, &scene.frames[frame]), (1, &scene.frames[frame - 1])]
    } else {
        vec![(0, &scene.frames[frame])]
    };
    for (time, objects) in sweeps {
        for o in objects {
            let b = o.bbox;
            let (s, c) = b.yaw.sin_cos();
            for _ in 0..cfg.points_per_box {
                let u = rng.gen_range(-0.5..0.5) * b.length;
                let v = rng.gen_range(-0.5..0.5) * b.width;
                let w = rng.gen_range(-0.5..0.5) * b.height;
                points.push(Point {
                    x: b.cx + c * u - s * v,
                    y: b.cy + s * u + c * v,
                    z: b.cz + w,
                    intensity: rng.gen_range(0.0..1.0),
                    time,
                });
            }
        }
        for _ in 0..cfg.ground_points {
            let p = scene.area.sample(&mut rng);
            points.push(Point {
                x: p[0],
                y: p[1],
                z: rng.gen_range(-0.05..0.05),
                intensity: rng.gen_range(0.0..0.3),
                time,
            });
        }
    }
    PointCloud::new(points)
}
