//! Sparse voxel grids and the resolution algebra of the point-cloud encoder.
//!
//! No learned weights live here: fixed seeded channel maps stand in for sparse
//! convolutions, so the structures can be checked for stride, resolution and
//! occupancy bookkeeping.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{snapped_floor, Real};

pub type Coord = [u32; 3];

/// Voxelization extents and voxel size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelSpec<T> {
    min: [T; 3],
    max: [T; 3],
    size: [T; 3],
    dims: [usize; 3],
}

impl<T: Real> VoxelSpec<T> {
    pub fn new(min: [T; 3], max: [T; 3], size: [T; 3]) -> Result<Self> {
        let mut dims = [0usize; 3];
        for a in 0..3 {
            if !(size[a] > T::zero()) || !size[a].is_finite() {
                return Err(Error::invalid("voxel spec", "voxel sizes must be positive"));
            }
            if !(max[a] > min[a]) || !min[a].is_finite() || !max[a].is_finite() {
                return Err(Error::invalid("voxel spec", "extents must satisfy max > min"));
            }
            let q = (max[a] - min[a]) / size[a];
            let n = q.round();
            let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0) * q);
            if (q - n).abs() > tol || n < T::one() {
                return Err(Error::invalid(
                    "voxel spec",
                    format!("axis {a} extent is not a whole number of voxels"),
                ));
            }
            dims[a] = n.to_usize().expect("positive count");
        }
        Ok(Self { min, max, size, dims })
    }

    /// x in [-96, 96], y in [-48, 48], z in [-5, 3] at 7.5 x 7.5 x 20 cm.
    pub fn default_lidar() -> Self {
        Self::new(
            [T::lit(-96.0), T::lit(-48.0), T::lit(-5.0)],
            [T::lit(96.0), T::lit(48.0), T::lit(3.0)],
            [T::lit(0.075), T::lit(0.075), T::lit(0.2)],
        )
        .expect("static spec is valid")
    }

    pub fn min(&self) -> [T; 3] {
        self.min
    }
    pub fn max(&self) -> [T; 3] {
        self.max
    }
    pub fn size(&self) -> [T; 3] {
        self.size
    }
    /// Dense voxel bound at stride 1.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Dense bound at a given stride (partial cells round up).
    pub fn bound_at(&self, stride: u32) -> [usize; 3] {
        self.dims.map(|d| d.div_ceil(stride as usize))
    }

    /// Voxel edge lengths at a given stride, in meters.
    pub fn resolution_at(&self, stride: u32) -> [T; 3] {
        let s = T::from_u32(stride).expect("small stride");
        self.size.map(|d| d * s)
    }

    /// Voxel containing the point; `None` outside the extents.
    pub fn voxel_of(&self, p: [T; 3]) -> Option<Coord> {
        let mut c = [0u32; 3];
        for a in 0..3 {
            if !p[a].is_finite() {
                return None;
            }
            let i = snapped_floor(p[a] - self.min[a], self.size[a]);
            if i < T::zero() {
                return None;
            }
            let i = i.to_usize()?;
            if i >= self.dims[a] {
                return None;
            }
            c[a] = i as u32;
        }
        Some(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub intensity: T,
    /// 0 for the current sweep, 1 for the previous one.
    pub time: u8,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<T> {
    points: Vec<Point<T>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Point<T>>) -> Result<Self> {
        if points.iter().any(|p| p.time > 1) {
            return Err(Error::invalid("point cloud", "time flag must be 0 or 1"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Coordinate-indexed voxel features at a given stride.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrid<T> {
    stride: u32,
    bound: [usize; 3],
    channels: usize,
    cells: BTreeMap<Coord, Vec<T>>,
}

impl<T: Real> SparseGrid<T> {
    pub fn empty(stride: u32, bound: [usize; 3], channels: usize) -> Result<Self> {
        if !matches!(stride, 1 | 2 | 4 | 8) {
            return Err(Error::invalid("sparse grid", format!("stride {stride} not in {{1, 2, 4, 8}}")));
        }
        Ok(Self {
            stride,
            bound,
            channels,
            cells: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, c: Coord, feature: Vec<T>) -> Result<()> {
        if feature.len() != self.channels {
            return Err(Error::invalid(
                "sparse grid",
                format!("feature has {} channels, grid has {}", feature.len(), self.channels),
            ));
        }
        if (0..3).any(|a| c[a] as usize >= self.bound[a]) {
            return Err(Error::invalid("sparse grid", format!("coordinate {c:?} outside bound {:?}", self.bound)));
        }
        self.cells.insert(c, feature);
        Ok(())
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }
    pub fn bound(&self) -> [usize; 3] {
        self.bound
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
    pub fn get(&self, c: &Coord) -> Option<&[T]> {
        self.cells.get(c).map(Vec::as_slice)
    }
    pub fn iter(&self) -> impl Iterator<Item = (&Coord, &[T])> {
        self.cells.iter().map(|(c, f)| (c, f.as_slice()))
    }

    pub fn occupancy(&self) -> BTreeSet<Coord> {
        self.cells.keys().copied().collect()
    }

    /// Occupied `(x, y)` columns after collapsing height.
    pub fn bev_occupancy(&self) -> BTreeSet<[u32; 2]> {
        self.cells.keys().map(|c| [c[0], c[1]]).collect()
    }
}

/// Fixed linear channel map standing in for a learned sparse convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMap<T> {
    inputs: usize,
    outputs: usize,
    weights: Vec<T>,
}

impl<T: Real> ChannelMap<T> {
    /// Weights drawn uniformly from `[-1, 1] / sqrt(inputs)`.
    pub fn seeded(inputs: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (inputs.max(1) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| T::lit(rng.gen_range(-1.0..=1.0) * scale))
            .collect();
        Self { inputs, outputs, weights }
    }

    pub fn identity(n: usize) -> Self {
        let mut weights = vec![T::zero(); n * n];
        for i in 0..n {
            weights[i * n + i] = T::one();
        }
        Self {
            inputs: n,
            outputs: n,
            weights,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weights
            .chunks(self.inputs.max(1))
            .take(self.outputs)
            .map(|row| row.iter().zip(x).map(|(&w, &v)| w * v).sum())
            .collect()
    }

    fn check(&self, channels: usize) -> Result<()> {
        if channels != self.inputs {
            return Err(Error::invalid(
                "channel map",
                format!("expects {} channels, grid has {channels}", self.inputs),
            ));
        }
        Ok(())
    }
}

/// Voxelization result; `dropped` counts points outside the extents.
#[derive(Debug, Clone, PartialEq)]
pub struct Voxelized<T> {
    pub grid: SparseGrid<T>,
    pub dropped: usize,
}

/// Stride-1 grid with per-voxel `(point count, mean intensity, mean time flag)`.
pub fn voxelize<T: Real>(pc: &PointCloud<T>, spec: &VoxelSpec<T>) -> Voxelized<T> {
    let mut acc: BTreeMap<Coord, (usize, T, T)> = BTreeMap::new();
    let mut dropped = 0;
    for p in pc.points() {
        match spec.voxel_of([p.x, p.y, p.z]) {
            Some(c) => {
                let e = acc.entry(c).or_insert((0, T::zero(), T::zero()));
                e.0 += 1;
                e.1 += p.intensity;
                e.2 += T::from_u8(p.time).expect("0 or 1");
            }
            None => dropped += 1,
        }
    }
    let cells = acc
        .into_iter()
        .map(|(c, (n, i, t))| {
            let nf = T::from_usize_lossy(n);
            (c, vec![nf, i / nf, t / nf])
        })
        .collect();
    Voxelized {
        grid: SparseGrid {
            stride: 1,
            bound: spec.dims(),
            channels: 3,
            cells,
        },
        dropped,
    }
}

/// Applies a channel map voxel by voxel without changing the coordinates.
pub fn map_channels<T: Real>(g: &SparseGrid<T>, map: &ChannelMap<T>) -> Result<SparseGrid<T>> {
    map.check(g.channels)?;
    Ok(SparseGrid {
        stride: g.stride,
        bound: g.bound,
        channels: map.outputs,
        cells: g.cells.iter().map(|(c, f)| (*c, map.apply(f))).collect(),
    })
}

/// Halves the resolution: children `c` map to parent `floor(c / 2)`; the
/// parent feature is `map(mean of child features)`.
pub fn downsample<T: Real>(g: &SparseGrid<T>, map: &ChannelMap<T>) -> Result<SparseGrid<T>> {
    if g.stride > 4 {
        return Err(Error::StrideOverflow(g.stride));
    }
    map.check(g.channels)?;
    let mut acc: BTreeMap<Coord, (usize, Vec<T>)> = BTreeMap::new();
    for (c, f) in &g.cells {
        let e = acc
            .entry(c.map(|v| v / 2))
            .or_insert_with(|| (0, vec![T::zero(); g.channels]));
        e.0 += 1;
        for (a, &v) in e.1.iter_mut().zip(f) {
            *a += v;
        }
    }
    let cells = acc
        .into_iter()
        .map(|(c, (n, sum))| {
            let nf = T::from_usize_lossy(n);
            let mean: Vec<T> = sum.into_iter().map(|v| v / nf).collect();
            (c, map.apply(&mean))
        })
        .collect();
    Ok(SparseGrid {
        stride: g.stride * 2,
        bound: g.bound.map(|d| d.div_ceil(2)),
        channels: map.outputs,
        cells,
    })
}

/// Resamples `g` to `stride`. Coarsening averages children; refining copies
/// the parent feature into every coordinate of `gate` whose parent exists.
fn resample<T: Real>(g: &SparseGrid<T>, stride: u32, bound: [usize; 3], gate: &BTreeSet<Coord>) -> Result<SparseGrid<T>> {
    if stride == g.stride {
        return Ok(g.clone());
    }
    if stride > g.stride {
        let id = ChannelMap::identity(g.channels);
        let mut cur = g.clone();
        while cur.stride < stride {
            cur = downsample(&cur, &id)?;
        }
        return Ok(cur);
    }
    let factor = g.stride / stride;
    let cells = gate
        .iter()
        .filter_map(|c| g.cells.get(&c.map(|v| v / factor)).map(|f| (*c, f.clone())))
        .collect();
    Ok(SparseGrid {
        stride,
        bound,
        channels: g.channels,
        cells,
    })
}

fn concat<T: Real>(parts: &[&SparseGrid<T>], occupancy: &BTreeSet<Coord>) -> SparseGrid<T> {
    let channels = parts.iter().map(|p| p.channels).sum();
    let cells = occupancy
        .iter()
        .map(|c| {
            let mut f = Vec::with_capacity(channels);
            for p in parts {
                match p.cells.get(c) {
                    Some(v) => f.extend_from_slice(v),
                    None => f.extend(std::iter::repeat(T::zero()).take(p.channels)),
                }
            }
            (*c, f)
        })
        .collect();
    SparseGrid {
        stride: parts[0].stride,
        bound: parts[0].bound,
        channels,
        cells,
    }
}

fn expect_stride<T>(g: &SparseGrid<T>, expected: u32) -> Result<()> {
    if g.stride != expected {
        return Err(Error::StrideMismatch {
            expected,
            got: g.stride,
        });
    }
    Ok(())
}

/// High-resolution fusion: `sf2` (stride 2) is downsampled once and `sf4`
/// (stride 8) upsampled once onto `sf2`'s footprint; features are
/// concatenated at stride 4.
pub fn fuse_hr<T: Real>(sf2: &SparseGrid<T>, sf4: &SparseGrid<T>) -> Result<SparseGrid<T>> {
    expect_stride(sf2, 2)?;
    expect_stride(sf4, 8)?;
    let down = downsample(sf2, &ChannelMap::identity(sf2.channels))?;
    let gate = down.occupancy();
    let up = resample(sf4, 4, down.bound, &gate)?;
    Ok(concat(&[&down, &up], &gate))
}

/// Channel widths for the encoder topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Channels of the four sparse feature scales (strides 1, 2, 4, 8).
    pub widths: [usize; 4],
    /// Common width used inside the multi-scale exchange.
    pub exchange_width: usize,
    /// Output channels of the multi-scale fusion.
    pub fusion_width: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            widths: [16, 32, 64, 128],
            exchange_width: 32,
            fusion_width: 128,
            seed: 0,
        }
    }
}

/// Number of cross-resolution exchange rounds in the multi-scale fusion.
pub const EXCHANGE_ROUNDS: usize = 2;

/// Multi-scale fusion of the four sparse features. Every scale is projected
/// to `exchange_width`; each exchange round resamples every scale onto every
/// other, sums, and applies a channel map. The four results are then
/// resampled to stride 4, concatenated and mapped to `fusion_width`.
pub fn fuse_ms<T: Real>(sfs: [&SparseGrid<T>; 4], cfg: &EncoderConfig) -> Result<SparseGrid<T>> {
    const STRIDES: [u32; 4] = [1, 2, 4, 8];
    for (g, s) in sfs.iter().zip(STRIDES) {
        expect_stride(g, s)?;
    }
    let w = cfg.exchange_width;
    let mut seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x5F);
    let mut next_map = |i: usize, o: usize| {
        seed = seed.wrapping_add(1);
        ChannelMap::<T>::seeded(i, o, seed)
    };

    let mut streams: Vec<SparseGrid<T>> = sfs
        .iter()
        .map(|g| map_channels(g, &next_map(g.channels, w)))
        .collect::<Result<_>>()?;

    // Occupancy at each scale: own cells plus everything finer, coarsened.
    let gates: Vec<BTreeSet<Coord>> = (0..4)
        .map(|t| {
            let factor_of = |i: usize| STRIDES[t] / STRIDES[i];
            (0..=t)
                .flat_map(|i| {
                    let f = factor_of(i);
                    streams[i].cells.keys().map(move |c| c.map(|v| v / f))
                })
                .collect()
        })
        .collect();

    for _ in 0..EXCHANGE_ROUNDS {
        let mut next = Vec::with_capacity(4);
        for t in 0..4 {
            let bound = streams[t].bound;
            let mut sum: BTreeMap<Coord, Vec<T>> = gates[t].iter().map(|c| (*c, vec![T::zero(); w])).collect();
            for src in &streams {
                let r = resample(src, STRIDES[t], bound, &gates[t])?;
                for (c, f) in r.cells {
                    if let Some(acc) = sum.get_mut(&c) {
                        for (a, v) in acc.iter_mut().zip(f) {
                            *a += v;
                        }
                    }
                }
            }
            let map = next_map(w, w);
            next.push(SparseGrid {
                stride: STRIDES[t],
                bound,
                channels: w,
                cells: sum.into_iter().map(|(c, f)| (c, map.apply(&f))).collect(),
            });
        }
        streams = next;
    }

    let out_gate = &gates[2];
    let bound = streams[2].bound;
    let at4: Vec<SparseGrid<T>> = streams
        .iter()
        .map(|s| resample(s, 4, bound, out_gate))
        .collect::<Result<_>>()?;
    let parts: Vec<&SparseGrid<T>> = at4.iter().collect();
    let fused = concat(&parts, out_gate);
    map_channels(&fused, &next_map(fused.channels, cfg.fusion_width))
}

/// Encoder layouts: the baseline four-scale chain, the high-resolution
/// two-scale fusion, and the multi-scale exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Baseline,
    HighRes,
    MultiScale,
}

impl Topology {
    pub fn label(self) -> &'static str {
        match self {
            Topology::Baseline => "a",
            Topology::HighRes => "b",
            Topology::MultiScale => "c",
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "baseline" => Ok(Topology::Baseline),
            "b" | "highres" | "hr" => Ok(Topology::HighRes),
            "c" | "multiscale" | "ms" => Ok(Topology::MultiScale),
            _ => Err(Error::invalid("topology", format!("unknown topology '{s}' (expected a, b or c)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageInfo<T> {
    pub name: String,
    pub stride: u32,
    pub resolution: [T; 3],
    pub bound: [usize; 3],
    pub occupied: usize,
    pub bev_occupied: usize,
    pub channels: usize,
}

impl<T: Real> StageInfo<T> {
    fn of(name: &str, g: &SparseGrid<T>, spec: &VoxelSpec<T>) -> Self {
        Self {
            name: name.to_string(),
            stride: g.stride,
            resolution: spec.resolution_at(g.stride),
            bound: g.bound,
            occupied: g.len(),
            bev_occupied: g.bev_occupancy().len(),
            channels: g.channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderRun<T> {
    pub topology: Topology,
    pub stages: Vec<StageInfo<T>>,
    pub output: SparseGrid<T>,
}

impl<T: Real> EncoderRun<T> {
    pub fn output_stage(&self) -> &StageInfo<T> {
        self.stages.last().expect("at least one stage")
    }
}

/// The four sparse features of the baseline chain, strides 1, 2, 4, 8.
pub fn sparse_features<T: Real>(input: &SparseGrid<T>, cfg: &EncoderConfig) -> Result<[SparseGrid<T>; 4]> {
    expect_stride(input, 1)?;
    let [c1, c2, c3, c4] = cfg.widths;
    let seed = cfg.seed;
    let sf1 = map_channels(input, &ChannelMap::seeded(input.channels, c1, seed))?;
    let sf2 = downsample(&sf1, &ChannelMap::seeded(c1, c2, seed.wrapping_add(1)))?;
    let sf3 = downsample(&sf2, &ChannelMap::seeded(c2, c3, seed.wrapping_add(2)))?;
    let sf4 = downsample(&sf3, &ChannelMap::seeded(c3, c4, seed.wrapping_add(3)))?;
    Ok([sf1, sf2, sf3, sf4])
}

/// Runs one encoder topology on a voxelized cloud and records every stage.
pub fn run_encoder<T: Real>(
    input: &SparseGrid<T>,
    spec: &VoxelSpec<T>,
    topology: Topology,
    cfg: &EncoderConfig,
) -> Result<EncoderRun<T>> {
    let sfs = sparse_features(input, cfg)?;
    let mut stages = vec![StageInfo::of("input", input, spec)];
    for (i, sf) in sfs.iter().enumerate() {
        stages.push(StageInfo::of(&format!("SF{}", i + 1), sf, spec));
    }
    let output = match topology {
        Topology::Baseline => sfs[3].clone(),
        Topology::HighRes => fuse_hr(&sfs[1], &sfs[3])?,
        Topology::MultiScale => fuse_ms([&sfs[0], &sfs[1], &sfs[2], &sfs[3]], cfg)?,
    };
    stages.push(StageInfo::of("output", &output, spec));
    Ok(EncoderRun {
        topology,
        stages,
        output,
    })
}
