//! JSON Lines frame records and dense grid dumps.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use crowdtrack::targets::{MotionOffset, RelationshipOffset};
use crowdtrack::{Box3D, Detection, DenseGrid2D, GtObject, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub id: u64,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel: Option<[f64; 2]>,
}

impl ObjectRecord {
    pub fn from_box(id: u64, b: &Box3D<f64>) -> Self {
        Self {
            id,
            cx: b.cx,
            cy: b.cy,
            cz: b.cz,
            l: b.length,
            w: b.width,
            h: b.height,
            yaw: b.yaw,
            score: None,
            offset: None,
            rel: None,
        }
    }

    pub fn bbox(&self) -> crowdtrack::Result<Box3D<f64>> {
        Box3D::new(self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame: usize,
    pub timestamp: f64,
    pub objects: Vec<ObjectRecord>,
}

pub fn write_jsonl(frames: &[FrameRecord]) -> Result<String> {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses frame records; blank lines are skipped and frame numbers must
/// strictly increase.
pub fn read_jsonl(text: &str, origin: &str) -> Result<Vec<FrameRecord>> {
    let mut frames: Vec<FrameRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameRecord =
            serde_json::from_str(line).with_context(|| format!("{origin}:{}: malformed frame record", i + 1))?;
        if let Some(last) = frames.last() {
            if rec.frame <= last.frame {
                bail!("{origin}:{}: frame {} does not follow frame {}", i + 1, rec.frame, last.frame);
            }
        }
        for o in &rec.objects {
            o.bbox().with_context(|| format!("{origin}:{}: object {}", i + 1, o.id))?;
            if let Some(s) = o.score {
                if !(0.0..=1.0).contains(&s) {
                    bail!("{origin}:{}: object {} has score {s} outside [0, 1]", i + 1, o.id);
                }
            }
        }
        frames.push(rec);
    }
    Ok(frames)
}

pub fn gt_records(frames: &[Vec<GtObject<f64>>], timestamps: &[f64]) -> Vec<FrameRecord> {
    frames
        .iter()
        .zip(timestamps)
        .enumerate()
        .map(|(f, (objs, &t))| FrameRecord {
            frame: f,
            timestamp: t,
            objects: objs.iter().map(|o| ObjectRecord::from_box(o.instance_id, &o.bbox)).collect(),
        })
        .collect()
}

/// Detection ids are their index within the frame.
pub fn det_records(frames: &[Vec<Detection<f64>>], timestamps: &[f64]) -> Vec<FrameRecord> {
    frames
        .iter()
        .zip(timestamps)
        .enumerate()
        .map(|(f, (dets, &t))| FrameRecord {
            frame: f,
            timestamp: t,
            objects: dets
                .iter()
                .enumerate()
                .map(|(i, d)| ObjectRecord {
                    score: Some(d.score),
                    offset: Some([d.offset.ox, d.offset.oy, d.offset.oz]),
                    rel: d.relationship.filter(|r| r.defined).map(|r| [r.rx, r.ry]),
                    ..ObjectRecord::from_box(i as u64, &d.bbox)
                })
                .collect(),
        })
        .collect()
}

pub fn to_gt(frames: &[FrameRecord]) -> Result<Vec<(usize, Vec<GtObject<f64>>)>> {
    frames
        .iter()
        .map(|f| {
            let objs = f
                .objects
                .iter()
                .map(|o| {
                    Ok(GtObject {
                        instance_id: o.id,
                        frame: f.frame,
                        bbox: o.bbox()?,
                    })
                })
                .collect::<crowdtrack::Result<Vec<_>>>()?;
            Ok((f.frame, objs))
        })
        .collect()
}

pub fn to_detections(frames: &[FrameRecord]) -> Result<Vec<(usize, Vec<Detection<f64>>)>> {
    frames
        .iter()
        .map(|f| {
            let dets = f
                .objects
                .iter()
                .map(|o| {
                    let [ox, oy, oz] = o.offset.unwrap_or([0.0; 3]);
                    let d = Detection::new(o.bbox()?, o.score.unwrap_or(1.0), MotionOffset { ox, oy, oz }, f.frame)?;
                    Ok(match o.rel {
                        Some([rx, ry]) => d.with_relationship(RelationshipOffset { rx, ry, defined: true }),
                        None => d,
                    })
                })
                .collect::<crowdtrack::Result<Vec<_>>>()?;
            Ok((f.frame, dets))
        })
        .collect()
}

/// One record per input frame with the boxes the trajectories hold there.
pub fn trajectory_records(trajectories: &[Trajectory<f64>], frames: &[(usize, f64)]) -> Vec<FrameRecord> {
    let mut out: Vec<FrameRecord> = frames
        .iter()
        .map(|&(frame, timestamp)| FrameRecord {
            frame,
            timestamp,
            objects: Vec::new(),
        })
        .collect();
    for t in trajectories {
        for e in &t.entries {
            if let Ok(i) = out.binary_search_by_key(&e.frame, |r| r.frame) {
                out[i].objects.push(ObjectRecord {
                    score: Some(e.score),
                    ..ObjectRecord::from_box(t.track_id, &e.bbox)
                });
            }
        }
    }
    for r in &mut out {
        r.objects.sort_by_key(|o| o.id);
    }
    out
}

/// Dense text dump: a `GRID2D nx ny dx dy x_min y_min` header, then one
/// line per row `k = 0..ny` holding `nx` values.
pub fn grid_text(g: &DenseGrid2D<f64>) -> String {
    let s = g.grid();
    let mut out = format!("GRID2D {} {} {} {} {} {}\n", s.nx(), s.ny(), s.dx(), s.dy(), s.x_min(), s.y_min());
    for k in 0..s.ny() {
        for (j, v) in g.row(k).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v}").expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn parse_grid_text(text: &str) -> Result<DenseGrid2D<f64>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.len() != 7 || header[0] != "GRID2D" {
        bail!("missing GRID2D header");
    }
    let nx: usize = header[1].parse()?;
    let ny: usize = header[2].parse()?;
    let nums: Vec<f64> = header[3..].iter().map(|v| v.parse()).collect::<Result<_, _>>()?;
    let (dx, dy, x0, y0) = (nums[0], nums[1], nums[2], nums[3]);
    let grid = crowdtrack::GridSpec::new(x0, x0 + nx as f64 * dx, y0, y0 + ny as f64 * dy, dx, dy)?;
    let values: Vec<f64> = lines
        .flat_map(str::split_whitespace)
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    Ok(DenseGrid2D::from_values(grid, values)?)
}

/// Binary 8-bit PGM scaled by the grid maximum, north (largest `k`) up.
pub fn grid_pgm(g: &DenseGrid2D<f64>) -> Vec<u8> {
    let s = g.grid();
    let max = g.max_value();
    let mut out = format!("P5\n{} {}\n255\n", s.nx(), s.ny()).into_bytes();
    for k in (0..s.ny()).rev() {
        for &v in g.row(k) {
            let level = if max > 0.0 { (v / max * 255.0).round().clamp(0.0, 255.0) } else { 0.0 };
            out.push(level as u8);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_records_round_trip() {
        let b = Box3D::new(1.5, -2.25, 0.85, 0.6, 0.55, 1.7, 0.3).unwrap();
        let frames = vec![
            FrameRecord {
                frame: 0,
                timestamp: 0.0,
                objects: vec![ObjectRecord::from_box(4, &b)],
            },
            FrameRecord {
                frame: 1,
                timestamp: 0.1,
                objects: vec![ObjectRecord {
                    score: Some(0.5),
                    offset: Some([0.1, 0.0, 0.0]),
                    ..ObjectRecord::from_box(4, &b)
                }],
            },
        ];
        let text = write_jsonl(&frames).unwrap();
        assert!(text.starts_with("{\"frame\":0,\"timestamp\":0.0,\"objects\":[{\"id\":4,\"cx\":1.5,"));
        assert!(!text.lines().next().unwrap().contains("score"));
        assert_eq!(read_jsonl(&text, "t").unwrap(), frames);
    }

    #[test]
    fn read_errors_carry_line_numbers() {
        let e = read_jsonl("{\"frame\":1,\"timestamp\":0,\"objects\":[]}\n{\"frame\":1,\"timestamp\":0,\"objects\":[]}\n", "x.jsonl").unwrap_err();
        assert!(e.to_string().contains("x.jsonl:2"), "{e}");
        let e = read_jsonl("{\"frame\":0}\n", "x.jsonl").unwrap_err();
        assert!(format!("{e:#}").contains("missing field"), "{e:#}");
        let bad_box = "{\"frame\":0,\"timestamp\":0,\"objects\":[{\"id\":1,\"cx\":0,\"cy\":0,\"cz\":0,\"l\":0,\"w\":1,\"h\":1,\"yaw\":0}]}";
        assert!(read_jsonl(bad_box, "x").is_err());
    }

    #[test]
    fn grid_dump_round_trip() {
        let spec = crowdtrack::GridSpec::new(-1.0, 1.0, 0.0, 0.9, 0.5, 0.3).unwrap();
        let g = DenseGrid2D::from_fn(spec, |j, k| j as f64 * 0.25 + k as f64);
        let text = grid_text(&g);
        assert!(text.starts_with("GRID2D 4 3 0.5 0.3 -1 0\n0 0.25 0.5 0.75\n"));
        assert_eq!(parse_grid_text(&text).unwrap().values(), g.values());
        let pgm = grid_pgm(&g);
        assert_eq!(&pgm[..11], b"P5\n4 3\n255\n");
        assert_eq!(pgm.len(), 11 + 12);
        // First image row is the largest k; its last cell holds the maximum.
        assert_eq!(pgm[11 + 3], 255);
        assert_eq!(pgm[11 + 8], 0);
    }
}
