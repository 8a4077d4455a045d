//! Heading-aligned, forward-shifted Gaussian costs around visible pedestrians.

use crate::geometry::Vec2;
use crate::gridmap::{Cell, Costmap, LETHAL};
use crate::sensing::PedestrianEstimate;
use serde::{Deserialize, Serialize};

/// How the spread ratio `r` depends on the robot-pedestrian distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityMode {
    /// `r = d / max_distance`: spread grows with distance.
    AsWritten,
    /// `r = 1 - d / max_distance`: nearer pedestrians spread wider.
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub amplitude: f64,
    pub w_x: f64,
    pub w_y: f64,
    /// Forward shift of the Gaussian center along the heading, in cells.
    pub forward_shift: f64,
    pub max_distance: f64,
    pub proximity_mode: ProximityMode,
    /// Scale applied to the summed Gaussian before adding it to the base cost.
    pub weight: f64,
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            w_x: 1.0,
            w_y: 0.7,
            forward_shift: 2.0,
            max_distance: 5.0,
            proximity_mode: ProximityMode::Inverse,
            weight: 20.0,
        }
    }
}

const MIN_RATIO: f64 = 0.1;

impl GaussianParams {
    pub fn is_valid(&self) -> bool {
        self.w_x > self.w_y && self.w_y > 0.0 && self.forward_shift >= 0.0 && self.max_distance > 0.0 && self.weight >= 0.0
    }

    pub fn ratio(&self, pedestrian_distance: f64) -> f64 {
        let q = pedestrian_distance / self.max_distance;
        match self.proximity_mode {
            ProximityMode::AsWritten => q.clamp(MIN_RATIO, 1.0),
            ProximityMode::Inverse => (1.0 - q).clamp(MIN_RATIO, 1.0),
        }
    }

    /// `(sigma_x, sigma_y)` in meters.
    pub fn sigmas(&self, pedestrian_distance: f64) -> (f64, f64) {
        let r = self.ratio(pedestrian_distance);
        (r * self.w_x, r * self.w_y)
    }

    /// World-frame center of the shifted Gaussian.
    pub fn center(&self, ped: &PedestrianEstimate, resolution: f64) -> Vec2 {
        ped.position + Vec2::from_angle(ped.heading) * (self.forward_shift * resolution)
    }
}

/// Un-weighted Gaussian value in `[0, amplitude]` at `query`.
pub fn gaussian_cost(query: Vec2, ped: &PedestrianEstimate, params: &GaussianParams, resolution: f64) -> f64 {
    let (sx, sy) = params.sigmas(ped.distance);
    gaussian_with_sigmas(query, params.center(ped, resolution), ped.heading, sx, sy, params.amplitude)
}

/// Anisotropic Gaussian with explicit spreads; `heading` orients the major axis.
pub fn gaussian_with_sigmas(query: Vec2, center: Vec2, heading: f64, sigma_x: f64, sigma_y: f64, amplitude: f64) -> f64 {
    let offset = query - center;
    let axis = Vec2::from_angle(heading);
    // d_p cos(theta) and d_p sin(theta)
    let along = offset.dot(axis);
    let across = axis.det(offset);
    amplitude * (-0.5 * ((along / sigma_x).powi(2) + (across / sigma_y).powi(2))).exp()
}

/// Adds `weight x sum g` to every non-lethal cell within `3 sigma_x` of each
/// shifted center. Lethal cells stay lethal.
pub fn inflate_pedestrians(base: &Costmap, peds: &[PedestrianEstimate], params: &GaussianParams) -> Costmap {
    let mut out = base.clone();
    let res = base.resolution();
    for ped in peds {
        let (sx, sy) = params.sigmas(ped.distance);
        let center = params.center(ped, res);
        let cutoff = 3.0 * sx;
        let lo = out.origin();
        let x0 = ((center.x - cutoff - lo.x) / res).floor().max(0.0) as usize;
        let y0 = ((center.y - cutoff - lo.y) / res).floor().max(0.0) as usize;
        let x1 = (((center.x + cutoff - lo.x) / res).ceil().max(0.0) as usize).min(out.width() - 1);
        let y1 = (((center.y + cutoff - lo.y) / res).ceil().max(0.0) as usize).min(out.height() - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let cell = Cell::new(x, y);
                let p = out.cell_to_world(cell);
                if p.distance(center) > cutoff {
                    continue;
                }
                let c = out.cost(cell);
                if c == LETHAL {
                    continue;
                }
                let g = gaussian_with_sigmas(p, center, ped.heading, sx, sy, params.amplitude);
                out.set_cost(cell, c + params.weight * g);
            }
        }
    }
    out
}

/// Marks cells whose centers lie within `radius` of any pedestrian's current
/// position as lethal.
pub fn mark_footprints(costmap: &mut Costmap, peds: &[PedestrianEstimate], radius: f64) {
    let res = costmap.resolution();
    let lo = costmap.origin();
    for ped in peds {
        let c = ped.position;
        let x0 = ((c.x - radius - lo.x) / res).floor().max(0.0) as usize;
        let y0 = ((c.y - radius - lo.y) / res).floor().max(0.0) as usize;
        let x1 = (((c.x + radius - lo.x) / res).ceil().max(0.0) as usize).min(costmap.width() - 1);
        let y1 = (((c.y + radius - lo.y) / res).ceil().max(0.0) as usize).min(costmap.height() - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let cell = Cell::new(x, y);
                if costmap.cell_to_world(cell).distance(c) <= radius {
                    costmap.set_cost(cell, LETHAL);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn estimate(position: Vec2, heading: f64, distance: f64) -> PedestrianEstimate {
        PedestrianEstimate {
            id: 0,
            distance,
            bearing: 0.0,
            relative_heading: 0.0,
            position,
            heading,
            velocity: Vec2::ZERO,
            radius: 0.15,
        }
    }

    #[test]
    fn peak_at_shifted_center() {
        let params = GaussianParams::default();
        let ped = estimate(Vec2::new(3.0, 2.0), 0.7, 2.0);
        let c = params.center(&ped, 0.1);
        assert_eq!(gaussian_cost(c, &ped, &params, 0.1), 1.0);
        assert!((c.distance(ped.position) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn as_written_sigmas() {
        let params = GaussianParams { proximity_mode: ProximityMode::AsWritten, ..Default::default() };
        let (sx, sy) = params.sigmas(2.5);
        assert!((sx - 0.5).abs() < 1e-12 && (sy - 0.35).abs() < 1e-12);
    }

    #[test]
    fn inverse_ratio_is_clamped() {
        let params = GaussianParams::default();
        assert_eq!(params.ratio(5.0), 0.1);
        assert_eq!(params.ratio(0.0), 1.0);
        assert!((params.ratio(1.0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn one_sigma_values() {
        let c = Vec2::new(1.0, 1.0);
        let fwd = gaussian_with_sigmas(c + Vec2::new(1.0, 0.0), c, 0.0, 1.0, 0.7, 1.0);
        assert!((fwd - (-0.5f64).exp()).abs() < 1e-12);
        let lat = gaussian_with_sigmas(c + Vec2::new(0.0, 0.7), c, 0.0, 1.0, 0.7, 1.0);
        assert!((lat - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn no_pedestrians_leaves_base_untouched() {
        let base = Costmap::filled(20, 20, 0.1, Vec2::ZERO, 1.0);
        assert_eq!(inflate_pedestrians(&base, &[], &GaussianParams::default()), base);
    }

    #[test]
    fn inflated_peak_is_one_plus_weight() {
        let base = Costmap::filled(60, 60, 0.1, Vec2::ZERO, 1.0);
        // center lands on a cell center: (3.05 + 0.2, 3.05)
        let ped = estimate(Vec2::new(3.05 - 0.2, 3.05), 0.0, 2.0);
        let out = inflate_pedestrians(&base, &[ped], &GaussianParams::default());
        let cell = out.world_to_cell(Vec2::new(3.05, 3.05)).unwrap();
        assert!((out.cost(cell) - 21.0).abs() < 1e-9, "{}", out.cost(cell));
    }
}
