use serde::{Deserialize, Serialize};

use super::vector::{ImagePoint, WorldPoint};

/// Ideal pinhole camera: no skew, square pixels, no lens distortion.
///
/// `rotation` maps world directions into the camera frame, whose axes are
/// x right, y down and z along the optical axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f64; 3],
    pub rotation: [[f64; 3]; 3],
    pub focal_px: f64,
    pub principal_point: [f64; 2],
    pub image_size: [u32; 2],
}

impl Camera {
    /// Builds the rotation for a camera at `position` looking at `target`
    /// with `up` as the world up direction.
    pub fn look_at(
        position: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        focal_px: f64,
        image_size: [u32; 2],
    ) -> Option<Camera> {
        let forward = normalize3(sub3(target, position))?;
        let right = normalize3(cross3(forward, up))?;
        let down = cross3(forward, right);
        Some(Camera {
            position,
            rotation: [right, down, forward],
            focal_px,
            principal_point: [image_size[0] as f64 / 2.0, image_size[1] as f64 / 2.0],
            image_size,
        })
    }

    /// Camera-frame coordinates of a world point.
    pub fn to_camera_frame(&self, p: WorldPoint) -> [f64; 3] {
        let d = [
            p.x - self.position[0],
            p.y - self.position[1],
            p.z - self.position[2],
        ];
        let r = &self.rotation;
        [dot3(r[0], d), dot3(r[1], d), dot3(r[2], d)]
    }

    /// Distance along the optical axis; positive in front of the camera.
    pub fn depth(&self, p: WorldPoint) -> f64 {
        self.to_camera_frame(p)[2]
    }

    /// Pinhole projection. `None` when the point is not in front of the
    /// camera (depth <= 0).
    pub fn project(&self, p: WorldPoint) -> Option<ImagePoint> {
        let [x, y, z] = self.to_camera_frame(p);
        // also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(z > 0.0) {
            return None;
        }
        Some(ImagePoint::new(
            self.focal_px * x / z + self.principal_point[0],
            self.focal_px * y / z + self.principal_point[1],
        ))
    }

    pub(crate) fn rotation_error(&self) -> Option<String> {
        let r = &self.rotation;
        for (i, row) in r.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Some(format!("row {i} is not finite"));
            }
            for (j, other) in r.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                let got = dot3(*row, *other);
                if (got - expect).abs() > 1e-6 {
                    return Some(format!("rows {i} and {j} have dot product {got}"));
                }
            }
        }
        let det = dot3(r[0], cross3(r[1], r[2]));
        if det <= 0.0 {
            return Some(format!("determinant {det} is not +1"));
        }
        None
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize3(a: [f64; 3]) -> Option<[f64; 3]> {
    let len = dot3(a, a).sqrt();
    (len > 1e-12).then(|| [a[0] / len, a[1] / len, a[2] / len])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forward_camera() -> Camera {
        // looking straight along +y from 2 m above the origin
        Camera::look_at([0.0, 0.0, 2.0], [0.0, 10.0, 2.0], [0.0, 0.0, 1.0], 800.0, [1280, 720])
            .unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = forward_camera();
        let p = cam.project(WorldPoint::new(0.0, 10.0, 2.0)).unwrap();
        assert_eq!(p, ImagePoint::new(640.0, 360.0));
    }

    #[test]
    fn behind_camera_is_none() {
        let cam = forward_camera();
        assert!(cam.project(WorldPoint::new(0.0, -1.0, 2.0)).is_none());
        assert!(cam.project(WorldPoint::new(3.0, 0.0, 2.0)).is_none());
    }

    #[test]
    fn image_axes_orientation() {
        let cam = forward_camera();
        let right = cam.project(WorldPoint::new(1.0, 10.0, 2.0)).unwrap();
        let below = cam.project(WorldPoint::new(0.0, 10.0, 1.0)).unwrap();
        assert!(right.u > 640.0 && right.v == 360.0);
        assert!(below.v > 360.0 && below.u == 640.0);
        assert!(cam.rotation_error().is_none());
    }

    #[test]
    fn doubling_focal_doubles_offsets() {
        let mut cam = forward_camera();
        let p = WorldPoint::new(1.3, 7.0, 0.2);
        let a = cam.project(p).unwrap();
        cam.focal_px *= 2.0;
        let b = cam.project(p).unwrap();
        assert!(((b.u - 640.0) - 2.0 * (a.u - 640.0)).abs() < 1e-9);
        assert!(((b.v - 360.0) - 2.0 * (a.v - 360.0)).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_rotation() {
        let mut cam = forward_camera();
        cam.rotation[0] = [2.0, 0.0, 0.0];
        assert!(cam.rotation_error().is_some());
        let mut cam = forward_camera();
        cam.rotation[0] = [-1.0, 0.0, 0.0];
        assert!(cam.rotation_error().unwrap().contains("determinant"));
    }
}
