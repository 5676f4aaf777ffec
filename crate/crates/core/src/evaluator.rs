//! CLEAR-MOT evaluation over BEV IoU, and the crowd-density statistic.

use std::collections::{BTreeMap, HashSet};
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_matching;
use crate::error::{Error, Result};
use crate::geometry::{bev_iou, BoxBev};
use crate::scalar::Real;
use crate::targets::GtObject;
use crate::tracker::Trajectory;

/// Coverage at or above this marks a GT trajectory as mostly tracked.
pub const MOSTLY_TRACKED: f64 = 0.8;
/// Coverage at or below this marks a GT trajectory as mostly lost.
pub const MOSTLY_LOST: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalCounts {
    pub ids: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Number of GT boxes.
    pub p: usize,
    /// Matched GT boxes.
    pub tp: usize,
}

impl Add for EvalCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            ids: self.ids + o.ids,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            p: self.p + o.p,
            tp: self.tp + o.tp,
        }
    }
}

impl AddAssign for EvalCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig<T> {
    pub iou_threshold: T,
}

impl<T: Real> Default for MatchConfig<T> {
    fn default() -> Self {
        Self {
            iou_threshold: T::lit(0.5),
        }
    }
}

impl<T: Real> MatchConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > T::zero() && self.iou_threshold <= T::one()) {
            return Err(Error::invalid("iou threshold", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Association memory carried between frames.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchState {
    /// GT id -> track id pairs matched in the previous frame.
    pub prev_frame: BTreeMap<u64, u64>,
    /// GT id -> the track id it was most recently matched to, at any frame.
    pub last_match: BTreeMap<u64, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameMatch {
    /// `(gt index, pred index)` pairs, sorted by GT index.
    pub matches: Vec<(usize, usize)>,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
}

fn check_ids<T>(items: &[(u64, BoxBev<T>)], frame: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(items.len());
    for (id, _) in items {
        if !seen.insert(*id) {
            return Err(Error::DuplicateId { id: *id, frame });
        }
    }
    Ok(())
}

/// Matches one frame. Pairs carried over from the previous frame survive if
/// their IoU still meets the threshold; the rest are assigned to maximize
/// total IoU over pairs at or above the threshold.
pub fn match_frame<T: Real>(
    gts: &[(u64, BoxBev<T>)],
    preds: &[(u64, BoxBev<T>)],
    state: &MatchState,
    frame: usize,
    cfg: &MatchConfig<T>,
) -> Result<(FrameMatch, MatchState)> {
    check_ids(gts, frame)?;
    check_ids(preds, frame)?;
    let th = cfg.iou_threshold;

    let mut gt_used = vec![false; gts.len()];
    let mut pred_used = vec![false; preds.len()];
    let mut matches = Vec::new();

    for (gi, (gid, gbox)) in gts.iter().enumerate() {
        let Some(&tid) = state.prev_frame.get(gid) else { continue };
        let Some(pi) = preds.iter().position(|(pid, _)| *pid == tid) else { continue };
        if !pred_used[pi] && bev_iou(gbox, &preds[pi].1) >= th {
            gt_used[gi] = true;
            pred_used[pi] = true;
            matches.push((gi, pi));
        }
    }

    let free_g: Vec<usize> = (0..gts.len()).filter(|&i| !gt_used[i]).collect();
    let free_p: Vec<usize> = (0..preds.len()).filter(|&i| !pred_used[i]).collect();
    if !free_g.is_empty() && !free_p.is_empty() {
        let mut w = vec![T::zero(); free_g.len() * free_p.len()];
        for (r, &gi) in free_g.iter().enumerate() {
            for (c, &pi) in free_p.iter().enumerate() {
                let iou = bev_iou(&gts[gi].1, &preds[pi].1);
                if iou >= th {
                    w[r * free_p.len() + c] = iou;
                }
            }
        }
        for (r, c) in max_weight_matching(&w, free_g.len(), free_p.len()) {
            matches.push((free_g[r], free_p[c]));
        }
    }
    matches.sort_unstable();

    let mut next = MatchState {
        prev_frame: BTreeMap::new(),
        last_match: state.last_match.clone(),
    };
    let mut ids = 0;
    for &(gi, pi) in &matches {
        let (gid, tid) = (gts[gi].0, preds[pi].0);
        if let Some(prev) = next.last_match.insert(gid, tid) {
            if prev != tid {
                ids += 1;
            }
        }
        next.prev_frame.insert(gid, tid);
    }
    let fm = FrameMatch {
        fp: preds.len() - matches.len(),
        fn_: gts.len() - matches.len(),
        ids,
        matches,
    };
    Ok((fm, next))
}

/// `1 - (IDS + FP + FN) / P`.
pub fn mota(counts: &EvalCounts) -> Result<f64> {
    if counts.p == 0 {
        return Err(Error::UndefinedMetric("MOTA needs at least one GT box"));
    }
    Ok(1.0 - (counts.ids + counts.fp + counts.fn_) as f64 / counts.p as f64)
}

/// Fractions of GT trajectories that are mostly tracked and mostly lost.
pub fn mtr_mlr(coverages: &[f64]) -> Result<(f64, f64)> {
    if coverages.is_empty() {
        return Err(Error::UndefinedMetric("MTR/MLR need at least one GT trajectory"));
    }
    let n = coverages.len() as f64;
    let mt = coverages.iter().filter(|&&c| c >= MOSTLY_TRACKED).count() as f64;
    let ml = coverages.iter().filter(|&&c| c <= MOSTLY_LOST).count() as f64;
    Ok((mt / n, ml / n))
}

/// Totals for one sequence plus per-GT-trajectory coverage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceEval {
    pub counts: EvalCounts,
    /// GT id -> (frames matched, frames present).
    pub coverage: BTreeMap<u64, (usize, usize)>,
}

impl SequenceEval {
    pub fn coverages(&self) -> Vec<f64> {
        self.coverage.values().map(|&(m, n)| m as f64 / n as f64).collect()
    }

    pub fn mota(&self) -> Result<f64> {
        mota(&self.counts)
    }

    pub fn mtr_mlr(&self) -> Result<(f64, f64)> {
        mtr_mlr(&self.coverages())
    }
}

/// Evaluates aligned GT and prediction frames. A missing trailing frame on
/// either side counts as empty.
pub fn evaluate_sequence<T: Real>(
    gt_frames: &[Vec<(u64, BoxBev<T>)>],
    pred_frames: &[Vec<(u64, BoxBev<T>)>],
    cfg: &MatchConfig<T>,
) -> Result<SequenceEval> {
    cfg.validate()?;
    let mut state = MatchState::default();
    let mut out = SequenceEval::default();
    let empty = Vec::new();
    for f in 0..gt_frames.len().max(pred_frames.len()) {
        let gts = gt_frames.get(f).unwrap_or(&empty);
        let preds = pred_frames.get(f).unwrap_or(&empty);
        let (fm, next) = match_frame(gts, preds, &state, f, cfg)?;
        state = next;
        for (gid, _) in gts {
            out.coverage.entry(*gid).or_insert((0, 0)).1 += 1;
        }
        for &(gi, _) in &fm.matches {
            out.coverage.get_mut(&gts[gi].0).expect("seen above").0 += 1;
        }
        out.counts += EvalCounts {
            ids: fm.ids,
            fp: fm.fp,
            fn_: fm.fn_,
            p: gts.len(),
            tp: fm.matches.len(),
        };
    }
    Ok(out)
}

/// Ground-truth frames in the layout `evaluate_sequence` expects.
pub fn gt_frames<T: Real>(frames: &[Vec<GtObject<T>>]) -> Vec<Vec<(u64, BoxBev<T>)>> {
    frames
        .iter()
        .map(|f| f.iter().map(|o| (o.instance_id, o.bbox.bev())).collect())
        .collect()
}

/// Per-frame predicted boxes from trajectories, over `n_frames` frames.
pub fn trajectory_frames<T: Real>(trajectories: &[Trajectory<T>], n_frames: usize) -> Vec<Vec<(u64, BoxBev<T>)>> {
    let mut out = vec![Vec::new(); n_frames];
    for t in trajectories {
        for e in &t.entries {
            if let Some(f) = out.get_mut(e.frame) {
                f.push((t.track_id, e.bbox.bev()));
            }
        }
    }
    out
}

/// Mean number of other pedestrians whose BEV center lies strictly within
/// `radius`, averaged over every pedestrian in every frame.
pub fn density_stats<T: Real>(frames: &[Vec<GtObject<T>>], radius: T) -> Result<f64> {
    if !(radius > T::zero()) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    let r2 = radius * radius;
    let mut pairs = 0usize;
    let mut people = 0usize;
    for objs in frames {
        people += objs.len();
        for (i, a) in objs.iter().enumerate() {
            for b in &objs[i + 1..] {
                let dx = a.bbox.cx - b.bbox.cx;
                let dy = a.bbox.cy - b.bbox.cy;
                if dx * dx + dy * dy < r2 {
                    pairs += 2;
                }
            }
        }
    }
    if people == 0 {
        return Err(Error::UndefinedMetric("density of an empty scene"));
    }
    Ok(pairs as f64 / people as f64)
}

/// Density at several radii, e.g. for a density-versus-radius curve.
pub fn density_profile<T: Real>(frames: &[Vec<GtObject<T>>], radii: &[T]) -> Result<Vec<(T, f64)>> {
    radii.iter().map(|&r| density_stats(frames, r).map(|d| (r, d))).collect()
}
