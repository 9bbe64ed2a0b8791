use serde::{Deserialize, Serialize};

use crate::scenegeo::{LakePolygon, Vec2};

/// One circle body for collision purposes. Masses are equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Measurements of one resolved impact, before and after the impulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impact {
    pub momentum_before: Vec2,
    pub momentum_after: Vec2,
    pub energy_before: f64,
    pub energy_after: f64,
}

fn kinetic(a: Vec2, b: Vec2) -> f64 {
    0.5 * (a.length_squared() + b.length_squared())
}

/// Separates two overlapping circles and, if they are approaching, applies
/// the equal-mass impulse scaled by `restitution`. Returns `None` when the
/// circles do not overlap or are already separating.
pub fn collide(a: &mut Body, b: &mut Body, restitution: f64) -> Option<Impact> {
    let delta = b.position - a.position;
    let reach = a.radius + b.radius;
    let dist2 = delta.length_squared();
    if dist2 >= reach * reach {
        return None;
    }
    let dist = dist2.sqrt();
    let normal = delta.normalized().unwrap_or(Vec2::new(1.0, 0.0));

    let overlap = reach - dist;
    a.position -= normal * (overlap / 2.0);
    b.position += normal * (overlap / 2.0);

    let approach = (a.velocity - b.velocity).dot(normal);
    if approach <= 0.0 {
        return None;
    }
    let momentum_before = a.velocity + b.velocity;
    let energy_before = kinetic(a.velocity, b.velocity);
    let j = (1.0 + restitution) / 2.0 * approach;
    a.velocity -= normal * j;
    b.velocity += normal * j;
    Some(Impact {
        momentum_before,
        momentum_after: a.velocity + b.velocity,
        energy_before,
        energy_after: kinetic(a.velocity, b.velocity),
    })
}

/// Keeps a point on the lake. If `position` left the polygon it is put back
/// just inside the nearest shore and the outward velocity component is
/// mirrored. `fallback` must be inside the lake. Returns true on contact.
pub fn confine_to_lake(
    lake: &LakePolygon,
    position: &mut Vec2,
    velocity: &mut Vec2,
    fallback: Vec2,
) -> bool {
    if lake.contains(*position) {
        return false;
    }
    let shore = lake.closest_boundary_point(*position);
    if let Some(inward) = (shore - *position).normalized() {
        let along = velocity.dot(inward);
        if along < 0.0 {
            *velocity -= inward * (2.0 * along);
        }
        let nudged = shore + inward * 1e-6;
        *position = if lake.contains(nudged) {
            nudged
        } else if lake.contains(shore) {
            shore
        } else {
            fallback
        };
    } else {
        *position = fallback;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn body(px: f64, py: f64, vx: f64, vy: f64) -> Body {
        Body {
            position: Vec2::new(px, py),
            velocity: Vec2::new(vx, vy),
            radius: 0.5,
        }
    }

    #[test]
    fn head_on_elastic_exchanges_velocities() {
        let mut a = body(0.0, 0.0, 1.0, 0.0);
        let mut b = body(0.9, 0.0, -1.0, 0.0);
        let impact = collide(&mut a, &mut b, 1.0).unwrap();
        assert_eq!(a.velocity, Vec2::new(-1.0, 0.0));
        assert_eq!(b.velocity, Vec2::new(1.0, 0.0));
        assert_eq!(impact.momentum_before, impact.momentum_after);
        // separated to touching distance
        assert!((a.position.distance(b.position) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separating_bodies_keep_velocity() {
        let mut a = body(0.0, 0.0, -1.0, 0.0);
        let mut b = body(0.9, 0.0, 1.0, 0.0);
        assert!(collide(&mut a, &mut b, 1.0).is_none());
        assert_eq!(a.velocity, Vec2::new(-1.0, 0.0));
    }

    #[test]
    fn apart_bodies_untouched() {
        let mut a = body(0.0, 0.0, 1.0, 0.0);
        let mut b = body(2.0, 0.0, -1.0, 0.0);
        assert!(collide(&mut a, &mut b, 1.0).is_none());
        assert_eq!(a.position, Vec2::ZERO);
    }

    #[test]
    fn coincident_centers_use_fixed_normal() {
        let mut a = body(1.0, 1.0, 1.0, 0.0);
        let mut b = body(1.0, 1.0, 0.0, 0.0);
        assert!(collide(&mut a, &mut b, 0.9).is_some());
        assert!(b.position.x > a.position.x);
    }

    proptest! {
        #[test]
        fn impacts_conserve_momentum_and_never_gain_energy(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0,
            bx in -1.0f64..1.0, by in -1.0f64..1.0,
            avx in -3.0f64..3.0, avy in -3.0f64..3.0,
            bvx in -3.0f64..3.0, bvy in -3.0f64..3.0,
            e in 0.0f64..=1.0,
        ) {
            let mut a = body(ax, ay, avx, avy);
            let mut b = body(bx, by, bvx, bvy);
            if let Some(i) = collide(&mut a, &mut b, e) {
                let scale = i.momentum_before.length().max((2.0 * i.energy_before).sqrt());
                prop_assert!((i.momentum_after - i.momentum_before).length() / scale < 1e-9);
                prop_assert!(i.energy_after <= i.energy_before * (1.0 + 1e-12));
            }
        }
    }
}
