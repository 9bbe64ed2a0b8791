use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::camera::Camera;
use super::polygon::{LakePolygon, PolygonError};
use super::vector::{ImagePoint, Vec2};

/// Axis-aligned pixel rectangle, edges inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageRect {
    pub min_u: f64,
    pub min_v: f64,
    pub max_u: f64,
    pub max_v: f64,
}

impl ImageRect {
    pub const fn new(min_u: f64, min_v: f64, max_u: f64, max_v: f64) -> Self {
        ImageRect {
            min_u,
            min_v,
            max_u,
            max_v,
        }
    }

    pub fn contains(&self, p: ImagePoint) -> bool {
        p.u >= self.min_u && p.u <= self.max_u && p.v >= self.min_v && p.v <= self.max_v
    }

    pub fn contains_rect(&self, other: &ImageRect) -> bool {
        other.min_u >= self.min_u
            && other.max_u <= self.max_u
            && other.min_v >= self.min_v
            && other.max_v <= self.max_v
    }

    pub fn width(&self) -> f64 {
        self.max_u - self.min_u
    }

    pub fn height(&self) -> f64 {
        self.max_v - self.min_v
    }

    fn is_valid(&self) -> bool {
        [self.min_u, self.min_v, self.max_u, self.max_v]
            .iter()
            .all(|v| v.is_finite())
            && self.min_u < self.max_u
            && self.min_v < self.max_v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    /// Speed of the rightward drift of idle lotuses, m/s.
    pub idle_drift_speed: f64,
    pub dash_speed: f64,
    pub dash_duration_s: f64,
    /// Time constant with which a knocked idle lotus settles back to drift.
    pub idle_settle_s: f64,
    pub restitution: f64,
    pub lotus_radius: f64,
    pub shine_duration_s: f64,
    pub fish_duration_s: f64,
    pub firework_duration_s: f64,
    pub umbrella_duration_s: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            idle_drift_speed: 0.05,
            dash_speed: 1.5,
            dash_duration_s: 2.0,
            idle_settle_s: 1.5,
            restitution: 0.9,
            lotus_radius: 0.4,
            shine_duration_s: 2.0,
            fish_duration_s: 2.5,
            firework_duration_s: 3.0,
            umbrella_duration_s: 8.0,
        }
    }
}

/// The straight course of the finale boat across the lake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoatPath {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub half_width: f64,
    pub duration_s: f64,
}

impl BoatPath {
    pub fn start(&self) -> Vec2 {
        Vec2::new(self.start[0], self.start[1])
    }

    pub fn end(&self) -> Vec2 {
        Vec2::new(self.end[0], self.end[1])
    }
}

/// On-disk form of the scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub name: String,
    #[serde(default)]
    pub background_plate: String,
    pub camera: Camera,
    pub lake_polygon: Vec<[f64; 2]>,
    pub sky_band: ImageRect,
    pub viewport: ImageRect,
    #[serde(default)]
    pub physics: PhysicsConfig,
    pub boat: BoatPath,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scene file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("lake polygon: {0}")]
    Lake(#[from] PolygonError),
    #[error("camera: {0}")]
    Camera(String),
    #[error("{0}")]
    Inconsistent(String),
}

/// A validated, immutable scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    file: SceneFile,
    lake: LakePolygon,
}

/// Bundled synthetic demo scene.
pub const DEMO_SCENE: &str = include_str!("../../data/demo_scene.json");

impl SceneConfig {
    pub fn demo() -> Self {
        SceneConfig::from_json(DEMO_SCENE).expect("bundled demo scene is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let file: SceneFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_file(file: SceneFile) -> Result<Self, SceneError> {
        let lake = LakePolygon::new(
            file.lake_polygon
                .iter()
                .map(|p| Vec2::new(p[0], p[1]))
                .collect(),
        )?;
        let cam = &file.camera;
        if let Some(msg) = cam.rotation_error() {
            return Err(SceneError::Camera(format!("rotation: {msg}")));
        }
        if !(cam.focal_px > 0.0 && cam.focal_px.is_finite()) {
            return Err(SceneError::Camera("focal length must be positive".into()));
        }
        if cam.image_size[0] == 0 || cam.image_size[1] == 0 {
            return Err(SceneError::Camera("image size must be non-zero".into()));
        }
        if cam.position.iter().chain(&cam.principal_point).any(|v| !v.is_finite()) {
            return Err(SceneError::Camera("position and principal point must be finite".into()));
        }
        let image = ImageRect::new(
            0.0,
            0.0,
            cam.image_size[0] as f64,
            cam.image_size[1] as f64,
        );
        for (name, rect) in [("viewport", &file.viewport), ("sky_band", &file.sky_band)] {
            if !rect.is_valid() {
                return Err(SceneError::Inconsistent(format!("{name} is empty or not finite")));
            }
            if !image.contains_rect(rect) {
                return Err(SceneError::Inconsistent(format!(
                    "{name} extends beyond the image bounds"
                )));
            }
        }

        let ph = &file.physics;
        let positive = [
            ("idle_drift_speed", ph.idle_drift_speed),
            ("dash_speed", ph.dash_speed),
            ("dash_duration_s", ph.dash_duration_s),
            ("idle_settle_s", ph.idle_settle_s),
            ("lotus_radius", ph.lotus_radius),
            ("shine_duration_s", ph.shine_duration_s),
            ("fish_duration_s", ph.fish_duration_s),
            ("firework_duration_s", ph.firework_duration_s),
            ("umbrella_duration_s", ph.umbrella_duration_s),
            ("boat.half_width", file.boat.half_width),
            ("boat.duration_s", file.boat.duration_s),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SceneError::Inconsistent(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&ph.restitution) {
            return Err(SceneError::Inconsistent("restitution must lie in [0, 1]".into()));
        }
        for (name, p) in [("boat.start", file.boat.start()), ("boat.end", file.boat.end())] {
            if !lake.contains(p) {
                return Err(SceneError::Inconsistent(format!("{name} is not on the lake")));
            }
        }
        Ok(SceneConfig { file, lake })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn background_plate(&self) -> &str {
        &self.file.background_plate
    }

    pub fn camera(&self) -> &Camera {
        &self.file.camera
    }

    pub fn lake(&self) -> &LakePolygon {
        &self.lake
    }

    pub fn sky_band(&self) -> &ImageRect {
        &self.file.sky_band
    }

    pub fn viewport(&self) -> &ImageRect {
        &self.file.viewport
    }

    pub fn physics(&self) -> &PhysicsConfig {
        &self.file.physics
    }

    pub fn boat(&self) -> &BoatPath {
        &self.file.boat
    }

    pub fn file(&self) -> &SceneFile {
        &self.file
    }

    /// Canonical JSON of the scene, used to fingerprint replay logs.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.file).expect("scene serializes")
    }
}
