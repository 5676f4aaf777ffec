//! TOML run configuration. Every section is optional; the fields of
//! `[scene]` that have no sensible default are required when the section
//! is used.

use std::path::Path;

use anyhow::{Context, Result};
use crowdtrack::sparsegrid::EncoderConfig;
use crowdtrack::simulator::{Area, NoiseConfig, PointSampling, SimConfig};
use crowdtrack::targets::HeatmapCombine;
use crowdtrack::{CellAnchor, GridSpec, MatchConfig, TrackerConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scene: Option<SceneSection>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub tracker: TrackerConfig<f64>,
    #[serde(default)]
    pub targets: TargetsSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub points: PointSampling,
    #[serde(default)]
    pub encoder: EncoderConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub n_pedestrians: usize,
    pub n_frames: usize,
    pub target_density2: f64,
    /// `[x_min, x_max, y_min, y_max]` in meters.
    #[serde(default = "default_area")]
    pub area: [f64; 4],
    #[serde(default = "default_speed_min")]
    pub speed_min: f64,
    #[serde(default = "default_speed_max")]
    pub speed_max: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_area() -> [f64; 4] {
    let a = SimConfig::default().area;
    [a.x_min, a.x_max, a.y_min, a.y_max]
}
fn default_speed_min() -> f64 {
    SimConfig::default().speed_min
}
fn default_speed_max() -> f64 {
    SimConfig::default().speed_max
}
fn default_frame_rate() -> f64 {
    SimConfig::default().frame_rate
}

impl SceneSection {
    pub fn to_sim(&self) -> crowdtrack::Result<SimConfig> {
        let [x_min, x_max, y_min, y_max] = self.area;
        let cfg = SimConfig {
            n_pedestrians: self.n_pedestrians,
            area: Area::new(x_min, x_max, y_min, y_max)?,
            target_density2: self.target_density2,
            speed_min: self.speed_min,
            speed_max: self.speed_max,
            frame_rate: self.frame_rate,
            n_frames: self.n_frames,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetsSection {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub dx: f64,
    pub dy: f64,
    /// Heatmap kernel width in cells.
    pub sigma: f64,
    /// Density-weight radius in meters.
    pub th: f64,
    pub combine: HeatmapCombine,
    pub anchor: CellAnchor,
    /// Relationship-offset gate in meters.
    pub neighbor_radius: f64,
}

impl Default for TargetsSection {
    fn default() -> Self {
        let g = GridSpec::<f64>::detection_range();
        Self {
            x_min: g.x_min(),
            x_max: g.x_max(),
            y_min: g.y_min(),
            y_max: g.y_max(),
            dx: g.dx(),
            dy: g.dy(),
            sigma: 1.0,
            th: 2.0,
            combine: HeatmapCombine::Max,
            anchor: CellAnchor::Origin,
            neighbor_radius: crowdtrack::targets::NEIGHBOR_RADIUS,
        }
    }
}

impl TargetsSection {
    pub fn grid(&self) -> crowdtrack::Result<GridSpec<f64>> {
        GridSpec::new(self.x_min, self.x_max, self.y_min, self.y_max, self.dx, self.dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub iou_threshold: f64,
    /// Density statistic radius in meters.
    pub density_radius: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            iou_threshold: MatchConfig::<f64>::default().iou_threshold,
            density_radius: 2.0,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config {origin}: {e}"))
    }

    pub fn load(path: Option<&Path>) -> Result<(Self, Option<Vec<u8>>)> {
        match path {
            None => Ok((Self::default(), None)),
            Some(p) => {
                let bytes = std::fs::read(p).with_context(|| format!("reading config {}", p.display()))?;
                let text = std::str::from_utf8(&bytes).with_context(|| format!("config {} is not UTF-8", p.display()))?;
                Ok((Self::parse(text, &p.display().to_string())?, Some(bytes)))
            }
        }
    }

    /// Applies a global seed override to every seeded section.
    pub fn reseed(&mut self, seed: u64) {
        if let Some(s) = &mut self.scene {
            s.seed = seed;
        }
        self.noise.seed = seed;
        self.points.seed = seed;
        self.encoder.seed = seed;
    }

    pub fn scene(&self) -> Result<&SceneSection> {
        self.scene
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("config is missing the [scene] section (required fields: n_pedestrians, n_frames, target_density2)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scene_fills_defaults() {
        let c = RunConfig::parse("[scene]\nn_pedestrians = 4\nn_frames = 3\ntarget_density2 = 0.5\n", "t").unwrap();
        let s = c.scene().unwrap();
        assert_eq!(s.area, [-30.0, 30.0, -30.0, 30.0]);
        assert_eq!(c.tracker, TrackerConfig::default());
        assert_eq!(c.targets.dx, 0.6);
    }

    #[test]
    fn missing_field_is_named() {
        let e = RunConfig::parse("[scene]\nn_pedestrians = 4\ntarget_density2 = 0.5\n", "t").unwrap_err();
        assert!(e.to_string().contains("n_frames"), "{e}");
    }

    #[test]
    fn unknown_field_is_rejected_with_location() {
        let e = RunConfig::parse("[tracker]\nmax_age = 3\nmax_agee = 4\n", "t").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("max_agee") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn reseed_touches_every_section() {
        let mut c = RunConfig::parse("[scene]\nn_pedestrians = 4\nn_frames = 3\ntarget_density2 = 0.5\nseed = 1\n", "t").unwrap();
        c.reseed(9);
        assert_eq!((c.scene().unwrap().seed, c.noise.seed, c.points.seed, c.encoder.seed), (9, 9, 9, 9));
    }
}
