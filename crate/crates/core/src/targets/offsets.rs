use std::collections::{BTreeMap, HashMap};

use super::GtObject;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Neighbor gate for relationship offsets, in meters.
pub const NEIGHBOR_RADIUS: f64 = 3.0;

/// Displacement from the current position back to the previous-frame position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionOffset<T> {
    pub ox: T,
    pub oy: T,
    pub oz: T,
}

impl<T: Real> MotionOffset<T> {
    pub fn zero() -> Self {
        Self {
            ox: T::zero(),
            oy: T::zero(),
            oz: T::zero(),
        }
    }
}

/// Motion target for one object; `newborn` objects have no previous frame
/// and carry a zero offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionTarget<T> {
    pub offset: MotionOffset<T>,
    pub newborn: bool,
}

/// Vector from an object to its nearest neighbor, if one lies within the gate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelationshipOffset<T> {
    pub rx: T,
    pub ry: T,
    pub defined: bool,
}

impl<T: Real> RelationshipOffset<T> {
    pub fn undefined() -> Self {
        Self {
            rx: T::zero(),
            ry: T::zero(),
            defined: false,
        }
    }
}

fn check_unique<T>(objects: &[GtObject<T>]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(objects.len());
    for o in objects {
        if !seen.insert(o.instance_id) {
            return Err(Error::DuplicateId {
                id: o.instance_id,
                frame: o.frame,
            });
        }
    }
    Ok(())
}

/// Motion offsets `prev - curr` keyed by instance id.
pub fn make_motion_offsets<T: Real>(
    curr: &[GtObject<T>],
    prev: &[GtObject<T>],
) -> Result<BTreeMap<u64, MotionTarget<T>>> {
    check_unique(curr)?;
    check_unique(prev)?;
    let prev_by_id: HashMap<u64, &GtObject<T>> = prev.iter().map(|o| (o.instance_id, o)).collect();
    Ok(curr
        .iter()
        .map(|o| {
            let target = match prev_by_id.get(&o.instance_id) {
                Some(p) => MotionTarget {
                    offset: MotionOffset {
                        ox: p.bbox.cx - o.bbox.cx,
                        oy: p.bbox.cy - o.bbox.cy,
                        oz: p.bbox.cz - o.bbox.cz,
                    },
                    newborn: false,
                },
                None => MotionTarget {
                    offset: MotionOffset::zero(),
                    newborn: true,
                },
            };
            (o.instance_id, target)
        })
        .collect())
}

/// Relationship offsets: for each object, the vector to its nearest other
/// object if that neighbor is within `radius` meters (BEV). Equal distances
/// resolve to the smaller instance id.
pub fn make_relationship_offsets<T: Real>(
    objects: &[GtObject<T>],
    radius: T,
) -> Result<BTreeMap<u64, RelationshipOffset<T>>> {
    check_unique(objects)?;
    let r2 = radius * radius;
    let nearest = if radius > T::zero() && radius.is_finite() && objects.len() > 32 {
        nearest_hashed(objects, radius)
    } else {
        nearest_scan(objects)
    };
    Ok(objects
        .iter()
        .zip(nearest)
        .map(|(o, best)| {
            let rel = match best {
                Some((d2, j)) if d2 <= r2 => RelationshipOffset {
                    rx: objects[j].bbox.cx - o.bbox.cx,
                    ry: objects[j].bbox.cy - o.bbox.cy,
                    defined: true,
                },
                _ => RelationshipOffset::undefined(),
            };
            (o.instance_id, rel)
        })
        .collect())
}

#[inline]
fn sq_dist<T: Real>(a: &GtObject<T>, b: &GtObject<T>) -> T {
    let dx = b.bbox.cx - a.bbox.cx;
    let dy = b.bbox.cy - a.bbox.cy;
    dx * dx + dy * dy
}

#[inline]
fn better<T: Real>(cand: (T, usize), best: Option<(T, usize)>, objects: &[GtObject<T>]) -> bool {
    match best {
        None => true,
        Some((d, j)) => cand.0 < d || (cand.0 == d && objects[cand.1].instance_id < objects[j].instance_id),
    }
}

fn nearest_scan<T: Real>(objects: &[GtObject<T>]) -> Vec<Option<(T, usize)>> {
    (0..objects.len())
        .map(|i| {
            let mut best = None;
            for j in (0..objects.len()).filter(|&j| j != i) {
                let cand = (sq_dist(&objects[i], &objects[j]), j);
                if better(cand, best, objects) {
                    best = Some(cand);
                }
            }
            best
        })
        .collect()
}

/// Bucketed search: only neighbors inside the gate matter, and they live in
/// the 3x3 block of `radius`-sized buckets around each object.
fn nearest_hashed<T: Real>(objects: &[GtObject<T>], radius: T) -> Vec<Option<(T, usize)>> {
    let key = |o: &GtObject<T>| -> (i64, i64) {
        let kx = (o.bbox.cx / radius).floor().to_i64().unwrap_or(i64::MAX);
        let ky = (o.bbox.cy / radius).floor().to_i64().unwrap_or(i64::MAX);
        (kx, ky)
    };
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, o) in objects.iter().enumerate() {
        buckets.entry(key(o)).or_default().push(i);
    }
    let r2 = radius * radius;
    objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (kx, ky) = key(o);
            let mut best = None;
            for bx in kx.saturating_sub(1)..=kx.saturating_add(1) {
                for by in ky.saturating_sub(1)..=ky.saturating_add(1) {
                    let Some(members) = buckets.get(&(bx, by)) else { continue };
                    for &j in members.iter().filter(|&&j| j != i) {
                        let cand = (sq_dist(o, &objects[j]), j);
                        if cand.0 <= r2 && better(cand, best, objects) {
                            best = Some(cand);
                        }
                    }
                }
            }
            best
        })
        .collect()
}
