//! Planar kinematics of one inverted five-bar linkage.
//!
//! Motor 1 sits at the origin and motor 2 at `(d, 0)`. Each drives a proximal
//! link of length `L1`; the two distal links of length `L2` meet at the end
//! effector, which hangs below the motors (`y < 0`) and touches the skin.
//! Angles are measured from the +x axis.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Which circle intersection is the end effector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Branch {
    /// Lower intersection; the effector points away from the motors.
    #[default]
    ElbowOut,
    ElbowIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct JointAngles {
    pub theta1_rad: f64,
    pub theta2_rad: f64,
}

impl JointAngles {
    pub fn new(theta1_rad: f64, theta2_rad: f64) -> Self {
        JointAngles {
            theta1_rad,
            theta2_rad,
        }
    }

    pub fn from_degrees(theta1: f64, theta2: f64) -> Self {
        JointAngles::new(theta1.to_radians(), theta2.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkageGeometry {
    pub base_separation_mm: f64,
    pub proximal_length_mm: f64,
    pub distal_length_mm: f64,
    pub angle_min_rad: f64,
    pub angle_max_rad: f64,
    pub branch: Branch,
}

impl Default for LinkageGeometry {
    fn default() -> Self {
        LinkageGeometry {
            base_separation_mm: 30.0,
            proximal_length_mm: 25.0,
            distal_length_mm: 40.0,
            angle_min_rad: (-170.0f64).to_radians(),
            angle_max_rad: (-10.0f64).to_radians(),
            branch: Branch::ElbowOut,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("configuration is singular or the distal links cannot meet")]
    Singular,
    #[error("target {target} is outside the workspace; nearest reachable point {nearest}")]
    Unreachable { target: Point, nearest: Point },
    #[error("invalid geometry: {0}")]
    Geometry(String),
}

/// Angle tolerance when testing joint limits.
const LIMIT_EPS: f64 = 1e-12;

impl LinkageGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |msg: &str| Err(KinematicsError::Geometry(msg.to_string()));
        let (d, l1, l2) = (
            self.base_separation_mm,
            self.proximal_length_mm,
            self.distal_length_mm,
        );
        if !(d > 0.0 && l1 > 0.0 && l2 > 0.0) || !(d.is_finite() && l1.is_finite() && l2.is_finite())
        {
            return bad("link lengths and base separation must be positive");
        }
        if 2.0 * l2 <= d {
            return bad("distal links too short to meet below the base (need 2*L2 > d)");
        }
        if !(self.angle_min_rad < self.angle_max_rad) {
            return bad("angle_min_rad must be below angle_max_rad");
        }
        Ok(())
    }

    /// x coordinate of the symmetry axis between the motors.
    pub fn center_x(&self) -> f64 {
        self.base_separation_mm / 2.0
    }

    pub fn base(&self, motor: usize) -> Point {
        if motor == 0 {
            Point::new(0.0, 0.0)
        } else {
            Point::new(self.base_separation_mm, 0.0)
        }
    }

    pub fn within_limits(&self, theta: f64) -> bool {
        theta >= self.angle_min_rad - LIMIT_EPS && theta <= self.angle_max_rad + LIMIT_EPS
    }

    /// Proximal joint positions for the given motor angles.
    pub fn elbows(&self, angles: JointAngles) -> (Point, Point) {
        let l1 = self.proximal_length_mm;
        let p1 = Point::new(l1 * angles.theta1_rad.cos(), l1 * angles.theta1_rad.sin());
        let p2 = Point::new(
            self.base_separation_mm + l1 * angles.theta2_rad.cos(),
            l1 * angles.theta2_rad.sin(),
        );
        (p1, p2)
    }
}

/// End-effector position for the given motor angles. Joint limits are not
/// checked here.
pub fn forward_kinematics(geom: &LinkageGeometry, angles: JointAngles) -> Result<Point, KinematicsError> {
    let (p1, p2) = geom.elbows(angles);
    let (dx, dy) = (p2.x - p1.x, p2.y - p1.y);
    let span = dx.hypot(dy);
    let l2 = geom.distal_length_mm;
    if span <= f64::EPSILON * l2 || span > 2.0 * l2 {
        return Err(KinematicsError::Singular);
    }
    let half = span / 2.0;
    let h = (l2 * l2 - half * half).max(0.0).sqrt();
    let mid = Point::new((p1.x + p2.x) / 2.0, (p1.y + p2.y) / 2.0);
    // unit normal to the P1->P2 direction
    let (nx, ny) = (-dy / span, dx / span);
    let a = Point::new(mid.x + h * nx, mid.y + h * ny);
    let b = Point::new(mid.x - h * nx, mid.y - h * ny);
    let (lower, upper) = if b.y < a.y || (b.y == a.y && b.x > a.x) {
        (b, a)
    } else {
        (a, b)
    };
    Ok(match geom.branch {
        Branch::ElbowOut => lower,
        Branch::ElbowIn => upper,
    })
}

fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Motor angle placing the proximal joint at distance `L2` from `target`, on
/// the outer side (`sign = -1` rotates clockwise from the target direction).
fn motor_solution(geom: &LinkageGeometry, motor: usize, target: Point, sign: f64) -> Option<f64> {
    let base = geom.base(motor);
    let (dx, dy) = (target.x - base.x, target.y - base.y);
    let r = dx.hypot(dy);
    let (l1, l2) = (geom.proximal_length_mm, geom.distal_length_mm);
    if r == 0.0 {
        return None;
    }
    let cos_alpha = (l1 * l1 + r * r - l2 * l2) / (2.0 * l1 * r);
    if !(-1.0..=1.0).contains(&cos_alpha) {
        return None;
    }
    let alpha = cos_alpha.acos();
    Some(wrap_angle(dy.atan2(dx) + sign * alpha))
}

/// Elbows-outward solution without limit or branch checks.
fn outward_solution(geom: &LinkageGeometry, target: Point) -> Option<JointAngles> {
    let theta1 = motor_solution(geom, 0, target, -1.0)?;
    let theta2 = motor_solution(geom, 1, target, 1.0)?;
    Some(JointAngles::new(theta1, theta2))
}

/// Both elbows point away from the symmetry axis when seen from the effector.
pub fn elbows_outward(geom: &LinkageGeometry, angles: JointAngles, effector: Point) -> bool {
    let (p1, p2) = geom.elbows(angles);
    let cross = |base: Point, elbow: Point| {
        (effector.x - base.x) * (elbow.y - base.y) - (effector.y - base.y) * (elbow.x - base.x)
    };
    cross(geom.base(0), p1) <= 0.0 && cross(geom.base(1), p2) >= 0.0
}

fn solve(geom: &LinkageGeometry, target: Point) -> Option<JointAngles> {
    let angles = outward_solution(geom, target)?;
    if !(geom.within_limits(angles.theta1_rad) && geom.within_limits(angles.theta2_rad)) {
        return None;
    }
    let reached = forward_kinematics(geom, angles).ok()?;
    let scale = target.norm().max(geom.distal_length_mm);
    (reached.distance(target) <= 1e-7 * scale).then_some(angles)
}

/// Motor angles reaching `target` with both elbows outward, inside the joint
/// limits and on the configured effector branch.
pub fn inverse_kinematics(geom: &LinkageGeometry, target: Point) -> Result<JointAngles, KinematicsError> {
    solve(geom, target).ok_or_else(|| KinematicsError::Unreachable {
        target,
        nearest: nearest_reachable(geom, target).0,
    })
}

pub fn workspace_contains(geom: &LinkageGeometry, point: Point) -> bool {
    solve(geom, point).is_some()
}

fn reachable_fk(geom: &LinkageGeometry, angles: JointAngles) -> Option<Point> {
    let p = forward_kinematics(geom, angles).ok()?;
    elbows_outward(geom, angles, p).then_some(p)
}

/// Closest workspace point to `target`, with the angles that reach it.
///
/// Coarse search over the joint-limit box followed by a shrinking pattern
/// search. Intended for the error path and for clamping, not hot loops.
pub fn nearest_reachable(geom: &LinkageGeometry, target: Point) -> (Point, JointAngles) {
    let (lo, hi) = (geom.angle_min_rad, geom.angle_max_rad);
    let steps = 160usize;
    let step = (hi - lo) / steps as f64;
    let mut best: Option<(f64, JointAngles, Point)> = None;
    for i in 0..=steps {
        for j in 0..=steps {
            let angles = JointAngles::new(lo + i as f64 * step, lo + j as f64 * step);
            if let Some(p) = reachable_fk(geom, angles) {
                let d = p.distance(target);
                if best.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
                    best = Some((d, angles, p));
                }
            }
        }
    }
    let Some((mut best_d, mut best_a, mut best_p)) = best else {
        return (target, JointAngles::default());
    };
    let mut delta = step;
    while delta > 1e-10 {
        let mut improved = false;
        for (di, dj) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            let cand = JointAngles::new(
                (best_a.theta1_rad + di * delta).clamp(lo, hi),
                (best_a.theta2_rad + dj * delta).clamp(lo, hi),
            );
            if let Some(p) = reachable_fk(geom, cand) {
                let d = p.distance(target);
                if d < best_d {
                    (best_d, best_a, best_p) = (d, cand, p);
                    improved = true;
                }
            }
        }
        if !improved {
            delta /= 2.0;
        }
    }
    (best_p, best_a)
}
