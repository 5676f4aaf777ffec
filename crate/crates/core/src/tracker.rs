//! Tracking by detection with offset-compensated greedy association.
//!
//! Each detection carries a predicted displacement back to the previous
//! frame. Detections are visited by descending score; each one claims the
//! nearest still-unclaimed track whose last center lies within
//! `max_match_dist` of the detection's predicted previous-frame center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Box3D;
use crate::scalar::Real;
use crate::targets::{MotionOffset, RelationshipOffset};

/// Number of regressed attributes per detection without relationship offsets:
/// location (3), size (3), yaw (1), motion offset (3).
pub const BASE_ATTRIBUTES: usize = 10;
/// Attribute count once the 2D relationship offset is predicted as well.
pub const RELATIONSHIP_ATTRIBUTES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection<T> {
    pub bbox: Box3D<T>,
    pub score: T,
    pub offset: MotionOffset<T>,
    pub relationship: Option<RelationshipOffset<T>>,
    pub frame: usize,
}

impl<T: Real> Detection<T> {
    pub fn new(bbox: Box3D<T>, score: T, offset: MotionOffset<T>, frame: usize) -> Result<Self> {
        if !(score >= T::zero() && score <= T::one()) {
            return Err(Error::invalid("detection", "score must lie in [0, 1]"));
        }
        Ok(Self {
            bbox,
            score,
            offset,
            relationship: None,
            frame,
        })
    }

    pub fn with_relationship(mut self, rel: RelationshipOffset<T>) -> Self {
        self.relationship = Some(rel);
        self
    }

    pub fn attribute_count(&self) -> usize {
        if self.relationship.is_some() {
            RELATIONSHIP_ATTRIBUTES
        } else {
            BASE_ATTRIBUTES
        }
    }

    /// Flat attribute vector `(x, y, z, l, h, w, yaw, ox, oy, oz[, rx, ry])`.
    pub fn attributes(&self) -> Vec<T> {
        let b = &self.bbox;
        let o = &self.offset;
        let mut v = vec![b.cx, b.cy, b.cz, b.length, b.height, b.width, b.yaw, o.ox, o.oy, o.oz];
        if let Some(r) = self.relationship {
            v.extend([r.rx, r.ry]);
        }
        v
    }

    /// Where this detection's object was one frame earlier.
    pub fn predicted_previous_center(&self) -> [T; 2] {
        [self.bbox.cx + self.offset.ox, self.bbox.cy + self.offset.oy]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackEntry<T> {
    pub frame: usize,
    pub bbox: Box3D<T>,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub track_id: u64,
    pub entries: Vec<TrackEntry<T>>,
    pub birth_frame: usize,
    pub last_matched_frame: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_center(&self) -> [T; 2] {
        self.entries.last().expect("trajectory has at least one entry").bbox.center_bev()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig<T> {
    /// Gate on BEV distance between predicted and tracked centers (m).
    pub max_match_dist: T,
    /// Frames a track may go unmatched before it is retired.
    pub max_age: usize,
    /// Minimum score for an unmatched detection to start a track.
    pub birth_score_min: T,
}

impl<T: Real> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self {
            max_match_dist: T::one(),
            max_age: 3,
            birth_score_min: T::lit(0.3),
        }
    }
}

impl<T: Real> TrackerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_match_dist > T::zero()) || !self.max_match_dist.is_finite() {
            return Err(Error::invalid("tracker config", "max_match_dist must be positive"));
        }
        if self.max_age == 0 {
            return Err(Error::invalid("tracker config", "max_age must be positive"));
        }
        if !(self.birth_score_min > T::zero()) || self.birth_score_min > T::one() {
            return Err(Error::invalid("tracker config", "birth_score_min must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Greedy association. `tracks` holds `(track_id, last BEV center)`.
///
/// Returns one `(detection index, matched track)` pair per detection, in
/// detection order. Equal scores are visited in index order; equal distances
/// go to the track listed first.
pub fn associate<T: Real>(
    dets: &[Detection<T>],
    tracks: &[(u64, [T; 2])],
    cfg: &TrackerConfig<T>,
) -> Vec<(usize, Option<u64>)> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // Stable sort keeps index order among equal scores.
    order.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap_or(std::cmp::Ordering::Equal));

    let mut taken = vec![false; tracks.len()];
    let mut out: Vec<(usize, Option<u64>)> = (0..dets.len()).map(|i| (i, None)).collect();
    for di in order {
        let [px, py] = dets[di].predicted_previous_center();
        let mut best: Option<(T, usize)> = None;
        for (ti, (_, [tx, ty])) in tracks.iter().enumerate() {
            if taken[ti] {
                continue;
            }
            let d = (px - *tx).hypot(py - *ty);
            if d <= cfg.max_match_dist && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, ti));
            }
        }
        if let Some((_, ti)) = best {
            taken[ti] = true;
            out[di].1 = Some(tracks[ti].0);
        }
    }
    out
}

/// Per-frame tracker output: the tracks that received a box this frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput<T> {
    pub frame: usize,
    pub boxes: Vec<(u64, Box3D<T>, T)>,
}

/// Live and retired trajectories for one sequence.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    cfg: TrackerConfig<T>,
    live: Vec<Trajectory<T>>,
    dead: Vec<Trajectory<T>>,
    next_id: u64,
    last_frame: Option<usize>,
}

impl<T: Real> Tracker<T> {
    pub fn new(cfg: TrackerConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            live: Vec::new(),
            dead: Vec::new(),
            next_id: 0,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig<T> {
        &self.cfg
    }

    pub fn live(&self) -> &[Trajectory<T>] {
        &self.live
    }

    pub fn dead(&self) -> &[Trajectory<T>] {
        &self.dead
    }

    /// Consumes one frame of detections.
    pub fn step(&mut self, frame: usize, dets: &[Detection<T>]) -> Result<FrameOutput<T>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::FrameOrder { last, got: frame });
            }
        }
        if let Some(d) = dets.iter().find(|d| d.frame != frame) {
            return Err(Error::invalid(
                "detection",
                format!("detection stamped frame {} fed to frame {frame}", d.frame),
            ));
        }
        self.last_frame = Some(frame);
        // Frames may be skipped; tracks that already missed more than
        // max_age frames before this one must not be matched.
        let max_age = self.cfg.max_age;
        self.retire(|t| frame - 1 - t.last_matched_frame > max_age);

        let centers: Vec<(u64, [T; 2])> = self.live.iter().map(|t| (t.track_id, t.last_center())).collect();
        let matches = associate(dets, &centers, &self.cfg);

        let mut boxes = Vec::new();
        for (di, track) in matches {
            let det = &dets[di];
            let entry = TrackEntry {
                frame,
                bbox: det.bbox,
                score: det.score,
            };
            match track {
                Some(id) => {
                    let t = self.live.iter_mut().find(|t| t.track_id == id).expect("matched live track");
                    t.entries.push(entry);
                    t.last_matched_frame = frame;
                    boxes.push((id, det.bbox, det.score));
                }
                None if det.score >= self.cfg.birth_score_min => {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.live.push(Trajectory {
                        track_id: id,
                        entries: vec![entry],
                        birth_frame: frame,
                        last_matched_frame: frame,
                    });
                    boxes.push((id, det.bbox, det.score));
                }
                None => {}
            }
        }

        self.retire(|t| frame - t.last_matched_frame > max_age);

        boxes.sort_by_key(|b| b.0);
        Ok(FrameOutput { frame, boxes })
    }

    fn retire(&mut self, stale: impl Fn(&Trajectory<T>) -> bool) {
        let (dead, live): (Vec<_>, Vec<_>) = std::mem::take(&mut self.live).into_iter().partition(|t| stale(t));
        self.live = live;
        self.dead.extend(dead);
    }

    /// All trajectories, live and retired, ordered by track id.
    pub fn into_trajectories(self) -> Vec<Trajectory<T>> {
        let mut all = self.dead;
        all.extend(self.live);
        all.sort_by_key(|t| t.track_id);
        all
    }
}

/// Runs the tracker over a whole sequence; frame numbers are list positions.
pub fn run_sequence<T: Real>(frames: &[Vec<Detection<T>>], cfg: &TrackerConfig<T>) -> Result<Vec<Trajectory<T>>> {
    let mut tracker = Tracker::new(*cfg)?;
    for (frame, dets) in frames.iter().enumerate() {
        tracker.step(frame, dets)?;
    }
    Ok(tracker.into_trajectories())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, y: f64, ox: f64, oy: f64, score: f64, frame: usize) -> Detection<f64> {
        Detection::new(
            Box3D::new(x, y, 0.85, 0.6, 0.6, 1.7, 0.0).unwrap(),
            score,
            MotionOffset { ox, oy, oz: 0.0 },
            frame,
        )
        .unwrap()
    }

    fn cfg() -> TrackerConfig<f64> {
        TrackerConfig::default()
    }

    #[test]
    fn attribute_counts() {
        let d = det(0.0, 0.0, 0.0, 0.0, 0.9, 0);
        assert_eq!(d.attribute_count(), 10);
        assert_eq!(d.attributes().len(), 10);
        let d = d.with_relationship(RelationshipOffset { rx: 1.0, ry: 0.0, defined: true });
        assert_eq!(d.attribute_count(), 12);
        assert_eq!(d.attributes().len(), 12);
    }

    #[test]
    fn score_must_be_probability() {
        let b = Box3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(Detection::new(b, 1.2, MotionOffset::zero(), 0).is_err());
        assert!(Detection::new(b, f64::NAN, MotionOffset::zero(), 0).is_err());
    }

    #[test]
    fn no_tracks_means_no_matches() {
        let dets = [det(0.0, 0.0, 0.0, 0.0, 0.9, 0), det(3.0, 0.0, 0.0, 0.0, 0.5, 0)];
        assert_eq!(associate(&dets, &[], &cfg()), vec![(0, None), (1, None)]);
    }

    #[test]
    fn offset_compensated_match() {
        let dets = [det(1.0, 2.0, -0.4, 0.3, 0.9, 1)];
        let tracks = [(7, [0.6, 2.3])];
        assert_eq!(associate(&dets, &tracks, &cfg()), vec![(0, Some(7))]);
        // without the offset the track would be 0.5 m away, still inside the gate,
        // but a second track sitting on the raw position must not win
        let tracks = [(3, [1.0, 2.0]), (7, [0.6, 2.3])];
        assert_eq!(associate(&dets, &tracks, &cfg()), vec![(0, Some(7))]);
    }

    #[test]
    fn crossing_objects_keep_ids() {
        // two pedestrians swap sides between frames; offsets point back correctly
        let dets = [det(0.6, 0.0, -0.6, 0.0, 0.8, 1), det(0.0, 0.0, 0.6, 0.0, 0.9, 1)];
        let tracks = [(1, [0.0, 0.0]), (2, [0.6, 0.0])];
        assert_eq!(associate(&dets, &tracks, &cfg()), vec![(0, Some(1)), (1, Some(2))]);
    }

    #[test]
    fn gate_is_respected() {
        let dets = [det(0.0, 0.0, 0.0, 0.0, 0.9, 0)];
        assert_eq!(associate(&dets, &[(1, [1.01, 0.0])], &cfg()), vec![(0, None)]);
        assert_eq!(associate(&dets, &[(1, [1.0, 0.0])], &cfg()), vec![(0, Some(1))]);
    }

    #[test]
    fn higher_score_claims_first() {
        let dets = [det(0.5, 0.0, 0.0, 0.0, 0.4, 0), det(0.3, 0.0, 0.0, 0.0, 0.9, 0)];
        let tracks = [(5, [0.0, 0.0])];
        assert_eq!(associate(&dets, &tracks, &cfg()), vec![(0, None), (1, Some(5))]);
    }

    #[test]
    fn equal_scores_visit_in_index_order() {
        let dets = [det(0.5, 0.0, 0.0, 0.0, 0.7, 0), det(0.3, 0.0, 0.0, 0.0, 0.7, 0)];
        let tracks = [(5, [0.0, 0.0])];
        assert_eq!(associate(&dets, &tracks, &cfg()), vec![(0, Some(5)), (1, None)]);
    }

    #[test]
    fn constant_detection_makes_one_trajectory() {
        let frames: Vec<_> = (0..10).map(|f| vec![det(1.0, 1.0, 0.0, 0.0, 0.9, f)]).collect();
        let trajs = run_sequence(&frames, &cfg()).unwrap();
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].len(), 10);
        assert_eq!(trajs[0].birth_frame, 0);
        assert_eq!(trajs[0].last_matched_frame, 9);
    }

    #[test]
    fn silence_retires_tracks() {
        let c = cfg();
        let mut t = Tracker::new(c).unwrap();
        t.step(0, &[det(0.0, 0.0, 0.0, 0.0, 0.9, 0), det(5.0, 0.0, 0.0, 0.0, 0.9, 0)]).unwrap();
        for f in 1..=c.max_age {
            t.step(f, &[]).unwrap();
            assert_eq!(t.live().len(), 2, "frame {f}");
        }
        t.step(c.max_age + 1, &[]).unwrap();
        assert!(t.live().is_empty());
        assert_eq!(t.dead().len(), 2);
    }

    #[test]
    fn gap_of_max_age_keeps_identity() {
        // matched at frame 0, missing for frames 1..=3, back at frame 4
        let c = cfg();
        let mut t = Tracker::new(c).unwrap();
        let first = t.step(0, &[det(2.0, 2.0, 0.0, 0.0, 0.9, 0)]).unwrap();
        for f in 1..=c.max_age {
            t.step(f, &[]).unwrap();
        }
        let back = t.step(c.max_age + 1, &[det(2.1, 2.0, 0.0, 0.0, 0.9, c.max_age + 1)]).unwrap();
        assert_eq!(first.boxes[0].0, back.boxes[0].0);
        let trajs = t.into_trajectories();
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].len(), 2);
    }

    #[test]
    fn gap_longer_than_max_age_gets_new_identity() {
        let c = cfg();
        let mut t = Tracker::new(c).unwrap();
        t.step(0, &[det(2.0, 2.0, 0.0, 0.0, 0.9, 0)]).unwrap();
        let f = c.max_age + 2;
        let back = t.step(f, &[det(2.0, 2.0, 0.0, 0.0, 0.9, f)]).unwrap();
        assert_eq!(back.boxes[0].0, 1);
        assert_eq!(t.into_trajectories().len(), 2);
    }

    #[test]
    fn low_scores_do_not_spawn() {
        let frames = vec![vec![det(0.0, 0.0, 0.0, 0.0, 0.1, 0)]];
        assert!(run_sequence(&frames, &cfg()).unwrap().is_empty());
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let mut t = Tracker::new(cfg()).unwrap();
        t.step(4, &[]).unwrap();
        assert_eq!(t.step(4, &[]).unwrap_err(), Error::FrameOrder { last: 4, got: 4 });
        assert!(t.step(2, &[]).is_err());
        assert!(t.step(5, &[det(0.0, 0.0, 0.0, 0.0, 0.9, 6)]).is_err());
    }

    #[test]
    fn empty_sequence() {
        assert!(run_sequence::<f64>(&[], &cfg()).unwrap().is_empty());
    }

    #[test]
    fn rerun_is_identical() {
        let frames: Vec<_> = (0..6)
            .map(|f| {
                let x = f as f64 * 0.3;
                vec![det(x, 0.0, -0.3, 0.0, 0.8, f), det(4.0 - x, 1.0, 0.3, 0.0, 0.8, f)]
            })
            .collect();
        assert_eq!(run_sequence(&frames, &cfg()).unwrap(), run_sequence(&frames, &cfg()).unwrap());
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(Tracker::new(TrackerConfig { max_match_dist: 0.0, ..cfg() }).is_err());
        assert!(Tracker::new(TrackerConfig { max_age: 0, ..cfg() }).is_err());
        assert!(Tracker::new(TrackerConfig { birth_score_min: 0.0, ..cfg() }).is_err());
    }
}
