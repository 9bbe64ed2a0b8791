//! The calibrated scene: camera, lake outline, sky band and viewport, plus
//! the geometric queries the simulation runs against them.
//!
//! World frame: the lake surface is z = 0, +x is image-right, +z is up.
//! The scene is authored by hand (see `data/demo_scene.json`) and is
//! immutable once loaded.

mod camera;
mod config;
mod polygon;
mod vector;

use rand::Rng;

pub use camera::Camera;
pub use config::{
    BoatPath, ImageRect, PhysicsConfig, SceneConfig, SceneError, SceneFile, DEMO_SCENE,
};
pub use polygon::{LakePolygon, PolygonError};
pub use vector::{closest_point_on_segment, distance_to_segment, ImagePoint, Vec2, WorldPoint};

pub fn project(camera: &Camera, p: WorldPoint) -> Option<ImagePoint> {
    camera.project(p)
}

pub fn contains(lake: &LakePolygon, p: Vec2) -> bool {
    lake.contains(p)
}

pub fn sample_lake_point<R: Rng + ?Sized>(rng: &mut R, lake: &LakePolygon) -> Vec2 {
    lake.sample(rng)
}

/// True iff `p` projects in front of the camera and inside `viewport`.
pub fn in_viewport(camera: &Camera, viewport: &ImageRect, p: WorldPoint) -> bool {
    camera.project(p).is_some_and(|ip| viewport.contains(ip))
}

/// Rejection-samples the lake until the point is also on screen. Falls back
/// to the last lake sample if the visible part of the lake is tiny.
pub fn sample_visible_lake_point<R: Rng + ?Sized>(rng: &mut R, scene: &SceneConfig) -> Vec2 {
    let mut p = sample_lake_point(rng, scene.lake());
    for _ in 0..10_000 {
        if in_viewport(scene.camera(), scene.viewport(), WorldPoint::on_water(p)) {
            return p;
        }
        p = sample_lake_point(rng, scene.lake());
    }
    p
}
