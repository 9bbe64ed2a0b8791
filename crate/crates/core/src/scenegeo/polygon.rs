use rand::Rng;
use thiserror::Error;

use super::vector::{closest_point_on_segment, Vec2};

/// Points this close to an edge (meters) count as on the boundary.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolygonError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
    #[error("polygon has zero area")]
    ZeroArea,
    #[error("edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
}

/// A simple polygon on the water plane. Construction validates it.
#[derive(Debug, Clone, PartialEq)]
pub struct LakePolygon {
    vertices: Vec<Vec2>,
    min: Vec2,
    max: Vec2,
    area: f64,
}

impl LakePolygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, PolygonError> {
        let n = vertices.len();
        if n < 3 {
            return Err(PolygonError::TooFewVertices(n));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(PolygonError::NonFinite(i));
        }
        let signed: f64 = (0..n)
            .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
            .sum::<f64>()
            / 2.0;
        let (mut min, mut max) = (vertices[0], vertices[0]);
        for v in &vertices {
            min = Vec2::new(min.x.min(v.x), min.y.min(v.y));
            max = Vec2::new(max.x.max(v.x), max.y.max(v.y));
        }
        let scale = (max - min).length_squared().max(1.0);
        if signed.abs() <= 1e-12 * scale {
            return Err(PolygonError::ZeroArea);
        }
        check_simple(&vertices)?;
        Ok(LakePolygon {
            vertices,
            min,
            max,
            area: signed.abs(),
        })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn bounds(&self) -> (Vec2, Vec2) {
        (self.min, self.max)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd containment; points on the boundary are inside.
    pub fn contains(&self, p: Vec2) -> bool {
        if p.x < self.min.x - BOUNDARY_EPS
            || p.x > self.max.x + BOUNDARY_EPS
            || p.y < self.min.y - BOUNDARY_EPS
            || p.y > self.max.y + BOUNDARY_EPS
        {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if closest_point_on_segment(p, a, b).distance(p) <= BOUNDARY_EPS {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Uniform point inside the polygon by rejection over the bounding box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        loop {
            let p = Vec2::new(
                rng.random_range(self.min.x..=self.max.x),
                rng.random_range(self.min.y..=self.max.y),
            );
            if self.contains(p) {
                return p;
            }
        }
    }

    /// Nearest point on the polygon outline.
    pub fn closest_boundary_point(&self, p: Vec2) -> Vec2 {
        self.edges()
            .map(|(a, b)| closest_point_on_segment(p, a, b))
            .min_by(|x, y| x.distance(p).total_cmp(&y.distance(p)))
            .expect("polygon has edges")
    }
}

fn orientation(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

fn check_simple(v: &[Vec2]) -> Result<(), PolygonError> {
    let n = v.len();
    let edge = |i: usize| (v[i], v[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        if a == b {
            return Err(PolygonError::SelfIntersecting(i, i));
        }
        // adjacent edge folding back over this one
        let (_, c) = edge((i + 1) % n);
        if orientation(a, b, c) == 0.0 && (c - b).dot(a - b) > 0.0 {
            return Err(PolygonError::SelfIntersecting(i, (i + 1) % n));
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (p, q) = edge(j);
            if segments_touch(a, b, p, q) {
                return Err(PolygonError::SelfIntersecting(i, j));
            }
        }
    }
    Ok(())
}
