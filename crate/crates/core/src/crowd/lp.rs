//! Two-dimensional velocity linear program over ORCA half-planes.
//!
//! Constraints are inserted incrementally (randomised-order LP without the
//! shuffle; insertion order is the caller's order). When the half-planes and
//! the speed disc have no common point, a three-dimensional fallback finds the
//! velocity minimising the largest constraint violation while keeping the
//! leading `hard` constraints (static obstacles) satisfied where possible.

use super::HalfPlane;
use crate::geometry::Vec2;

const EPSILON: f64 = 1e-9;

/// Velocity closest to `preferred` satisfying every half-plane, or the
/// least-violating one when none does. The result never exceeds `max_speed`.
pub fn solve_velocity_lp(lines: &[HalfPlane], preferred: Vec2, max_speed: f64) -> Vec2 {
    solve_velocity_lp_with_hard(lines, 0, preferred, max_speed)
}

/// As [`solve_velocity_lp`], with the first `hard` lines kept as hard
/// constraints in the infeasible fallback.
pub fn solve_velocity_lp_with_hard(lines: &[HalfPlane], hard: usize, preferred: Vec2, max_speed: f64) -> Vec2 {
    let mut result = Vec2::ZERO;
    let fail = linear_program2(lines, max_speed, preferred, false, &mut result);
    if fail < lines.len() {
        linear_program3(lines, hard.min(lines.len()), fail, max_speed, &mut result);
    }
    let speed = result.norm();
    if speed > max_speed {
        result = result * (max_speed / speed);
    }
    result
}

/// Signed violation of `line` at `v`: positive when `v` lies on the forbidden side.
pub fn violation(line: &HalfPlane, v: Vec2) -> f64 {
    line.direction.det(line.point - v)
}

fn linear_program1(
    lines: &[HalfPlane],
    line_no: usize,
    radius: f64,
    opt: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> bool {
    let line = &lines[line_no];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.norm_sq();
    if discriminant < 0.0 {
        // The speed disc misses this line entirely.
        return false;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for other in &lines[..line_no] {
        let denominator = line.direction.det(other.direction);
        let numerator = other.direction.det(line.point - other.point);
        if denominator.abs() <= EPSILON {
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    if direction_opt {
        *result = if opt.dot(line.direction) > 0.0 {
            line.point + line.direction * t_right
        } else {
            line.point + line.direction * t_left
        };
    } else {
        let t = line.direction.dot(opt - line.point);
        *result = if t < t_left {
            line.point + line.direction * t_left
        } else if t > t_right {
            line.point + line.direction * t_right
        } else {
            line.point + line.direction * t
        };
    }
    true
}

fn linear_program2(lines: &[HalfPlane], radius: f64, opt: Vec2, direction_opt: bool, result: &mut Vec2) -> usize {
    *result = if direction_opt {
        opt * radius
    } else if opt.norm_sq() > radius * radius {
        opt.normalized() * radius
    } else {
        opt
    };
    for i in 0..lines.len() {
        if violation(&lines[i], *result) > 0.0 {
            let previous = *result;
            if !linear_program1(lines, i, radius, opt, direction_opt, result) {
                *result = previous;
                return i;
            }
        }
    }
    lines.len()
}

fn linear_program3(lines: &[HalfPlane], hard: usize, begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if violation(&lines[i], *result) <= distance {
            continue;
        }
        let mut projected: Vec<HalfPlane> = lines[..hard].to_vec();
        for j in hard..i {
            let determinant = lines[i].direction.det(lines[j].direction);
            let point = if determinant.abs() <= EPSILON {
                if lines[i].direction.dot(lines[j].direction) > 0.0 {
                    // Parallel and co-directed: line j is implied.
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point
                    + lines[i].direction
                        * (lines[j].direction.det(lines[i].point - lines[j].point) / determinant)
            };
            projected.push(HalfPlane {
                point,
                direction: (lines[j].direction - lines[i].direction).normalized(),
                kind: lines[j].kind,
            });
        }
        let previous = *result;
        let opt = Vec2::new(-lines[i].direction.y, lines[i].direction.x);
        if linear_program2(&projected, radius, opt, true, result) < projected.len() {
            // Only fails from floating-point error; keep the last good value.
            *result = previous;
        }
        distance = violation(&lines[i], *result);
    }
}
