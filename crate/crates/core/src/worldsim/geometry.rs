use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub fn horizontal_distance(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Axis-aligned rectangle in the horizontal plane, bounds inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn new(x: [f64; 2], y: [f64; 2]) -> Self {
        Rect { x, y }
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x[0] && px <= self.x[1] && py >= self.y[0] && py <= self.y[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.x[0] + self.x[1]), 0.5 * (self.y[0] + self.y[1])]
    }

    /// Shrinks every side by `margin`. Collapses to the center line when too narrow.
    pub fn inset(&self, margin: f64) -> Rect {
        let shrink = |r: [f64; 2]| {
            let lo = r[0] + margin;
            let hi = r[1] - margin;
            if lo <= hi {
                [lo, hi]
            } else {
                let mid = 0.5 * (r[0] + r[1]);
                [mid, mid]
            }
        };
        Rect { x: shrink(self.x), y: shrink(self.y) }
    }

    pub fn is_inside(&self, outer: &Rect) -> bool {
        self.x[0] >= outer.x[0] && self.x[1] <= outer.x[1] && self.y[0] >= outer.y[0] && self.y[1] <= outer.y[1]
    }

    fn is_valid(&self) -> bool {
        self.x[0].is_finite() && self.x[1].is_finite() && self.y[0].is_finite() && self.y[1].is_finite()
            && self.x[0] <= self.x[1]
            && self.y[0] <= self.y[1]
    }
}

/// Axis-aligned box; used for heuristic distances and dispersion domains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub min: Vec3,
    pub max: Vec3,
}

impl Cuboid {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Euclidean distance to the closest point of the box, zero inside.
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            let d = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            acc += d * d;
        }
        acc.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cells along x.
    pub rows: usize,
    /// Cells along y.
    pub cols: usize,
    pub pitch: f64,
    pub center: [f64; 2],
    /// Half-width of the uniform xy perturbation applied to each block.
    pub noise: f64,
}

impl GridSpec {
    pub fn capacity(&self) -> usize {
        self.rows * self.cols
    }

    /// Cell centers in row-major order.
    pub fn cell_centers(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.capacity());
        let row_mid = (self.rows as f64 - 1.0) * 0.5;
        let col_mid = (self.cols as f64 - 1.0) * 0.5;
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push([
                    self.center[0] + (r as f64 - row_mid) * self.pitch,
                    self.center[1] + (c as f64 - col_mid) * self.pitch,
                ]);
            }
        }
        out
    }
}

/// Tunable constants of the four skills: clearances, landing offsets and cost terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkillConstants {
    pub grasp_clearance: f64,
    pub placement_clearance: f64,
    /// Required gap between the sweep start line and any table block.
    pub sweep_clearance: f64,
    /// Margin kept from region borders when sampling placements.
    pub placement_inset: f64,
    /// Margin kept from bin walls when blocks are dumped or slid.
    pub landing_inset: f64,
    /// Spacing of the index-based landing offsets.
    pub landing_spacing: f64,
    pub sweep_landing_x: f64,
    /// Cost added when the gripper is placed inside the bin.
    pub bin_penalty: f64,
    pub slide_cost: f64,
    pub sweep_cost: f64,
    pub tilt_cost_per_deg: f64,
    pub tilt_angle_range: [f64; 2],
    /// Tilts at or above this angle move every near-half block to the far half.
    pub friction_threshold_deg: f64,
    pub tilt_shift: f64,
    /// Unnormalized weights of placing on [table, near bin, tray].
    pub placement_weights: [f64; 3],
    /// Rejection sampling budget per requested parameter.
    pub attempts_per_sample: usize,
}

impl Default for SkillConstants {
    fn default() -> Self {
        SkillConstants {
            grasp_clearance: 0.055,
            placement_clearance: 0.05,
            sweep_clearance: 0.03,
            placement_inset: 0.03,
            landing_inset: 0.02,
            landing_spacing: 0.045,
            sweep_landing_x: 0.85,
            bin_penalty: 1.0,
            slide_cost: 0.3,
            sweep_cost: 0.2,
            tilt_cost_per_deg: 0.01,
            tilt_angle_range: [5.0, 20.0],
            friction_threshold_deg: 10.0,
            tilt_shift: 0.20,
            placement_weights: [0.2, 0.5, 0.4],
            attempts_per_sample: 50,
        }
    }
}

/// Layout of the table, tray and bin plus the robot's home point and reach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub table: Rect,
    pub table_z: f64,
    pub tray: Rect,
    /// Height of a block center resting on the tray.
    pub tray_rest_z: f64,
    pub bin: Rect,
    /// Plane x = split separating the near half (x < split) from the far half.
    pub bin_split_x: f64,
    pub bin_floor_z: f64,
    pub bin_height: f64,
    /// Vertical extent above the table surface that still counts as on the table.
    pub fixture_height: f64,
    pub block_size: f64,
    pub home: Vec3,
    pub bin_handle: Vec3,
    pub reach_limit_x: f64,
    pub grid: GridSpec,
    pub num_colors: u32,
    pub skills: SkillConstants,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            table: Rect::new([0.30, 0.70], [-0.45, 0.15]),
            table_z: 0.0,
            tray: Rect::new([0.56, 0.70], [-0.45, -0.15]),
            tray_rest_z: 0.03,
            bin: Rect::new([0.75, 1.15], [-0.35, 0.05]),
            bin_split_x: 0.95,
            bin_floor_z: -0.10,
            bin_height: 0.15,
            fixture_height: 0.10,
            block_size: 0.04,
            home: [0.40, -0.15, 0.30],
            bin_handle: [0.75, -0.15, 0.05],
            reach_limit_x: 0.95,
            grid: GridSpec { rows: 3, cols: 2, pitch: 0.09, center: [0.45, -0.15], noise: 0.01 },
            num_colors: 2,
            skills: SkillConstants::default(),
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("table", &self.table), ("tray", &self.tray), ("bin", &self.bin)] {
            if !r.is_valid() {
                return Err(Error::config(format!("{name} rectangle is malformed")));
            }
        }
        if !self.tray.is_inside(&self.table) {
            return Err(Error::config("tray must lie inside the table"));
        }
        if !(self.bin_split_x > self.bin.x[0] && self.bin_split_x < self.bin.x[1]) {
            return Err(Error::config("bin split plane must lie strictly inside the bin"));
        }
        if self.reach_limit_x > self.bin_split_x {
            return Err(Error::config("reach limit must not extend into the far half of the bin"));
        }
        if self.table.x[1] >= self.bin.x[0] {
            return Err(Error::config("table and bin must not overlap"));
        }
        if self.grid.rows == 0 || self.grid.cols == 0 || !(self.grid.pitch > 0.0) || self.grid.noise < 0.0 {
            return Err(Error::config("grid needs positive rows, cols and pitch and non-negative noise"));
        }
        if self.num_colors == 0 {
            return Err(Error::config("at least one color is required"));
        }
        let sk = &self.skills;
        if !(sk.tilt_angle_range[0] > 0.0 && sk.tilt_angle_range[0] <= sk.tilt_angle_range[1]) {
            return Err(Error::config("tilt angle range must be positive and ordered"));
        }
        if sk.placement_weights.iter().any(|w| *w < 0.0) || sk.placement_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("placement weights must be non-negative with a positive sum"));
        }
        if sk.attempts_per_sample == 0 {
            return Err(Error::config("attempts_per_sample must be at least 1"));
        }
        Ok(())
    }

    pub fn table_rest_z(&self) -> f64 {
        self.table_z + 0.5 * self.block_size
    }

    pub fn bin_rest_z(&self) -> f64 {
        self.bin_floor_z + 0.5 * self.block_size
    }

    pub fn bin_top_z(&self) -> f64 {
        self.bin_floor_z + self.bin_height
    }

    pub fn bin_near(&self) -> Rect {
        Rect::new([self.bin.x[0], self.bin_split_x], self.bin.y)
    }

    pub fn bin_far(&self) -> Rect {
        Rect::new([self.bin_split_x, self.bin.x[1]], self.bin.y)
    }

    pub fn tray_center(&self) -> Vec3 {
        let c = self.tray.center();
        [c[0], c[1], self.tray_rest_z]
    }

    /// Point above the bin where the tray is tipped for a slide at `bin_x`.
    pub fn slide_point(&self, bin_x: f64) -> Vec3 {
        [bin_x, self.bin.center()[1], self.bin_top_z()]
    }

    /// Point where the rotated tray touches down to start a sweep.
    pub fn sweep_start_point(&self, start_x: f64) -> Vec3 {
        [start_x, self.table.center()[1], self.tray_rest_z]
    }

    pub fn bin_cuboid(&self) -> Cuboid {
        Cuboid {
            min: [self.bin.x[0], self.bin.y[0], self.bin_floor_z],
            max: [self.bin.x[1], self.bin.y[1], self.bin_top_z()],
        }
    }

    pub fn bin_far_cuboid(&self) -> Cuboid {
        Cuboid {
            min: [self.bin_split_x, self.bin.y[0], self.bin_floor_z],
            max: [self.bin.x[1], self.bin.y[1], self.bin_top_z()],
        }
    }

    /// Landing x offset for a block with the given index, spreading dumped blocks apart.
    pub fn landing_offset(&self, index: u32) -> f64 {
        ((index % 3) as f64 - 1.0) * self.skills.landing_spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_valid() {
        Geometry::default().validate().unwrap();
    }

    #[test]
    fn far_half_is_out_of_reach() {
        let g = Geometry::default();
        assert!(g.reach_limit_x <= g.bin_far().x[0]);
        assert_eq!(g.bin_near().x[1], g.bin_far().x[0]);
    }

    #[test]
    fn grid_avoids_tray() {
        let g = Geometry::default();
        for c in g.grid.cell_centers() {
            assert!(c[0] + g.grid.noise < g.tray.x[0]);
        }
    }

    #[test]
    fn reject_reach_into_far_half() {
        let mut g = Geometry::default();
        g.reach_limit_x = 1.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn cuboid_distance() {
        let c = Cuboid { min: [0.0; 3], max: [1.0; 3] };
        assert_eq!(c.distance_to(&[0.5, 0.5, 0.5]), 0.0);
        assert!((c.distance_to(&[1.3, 0.5, 0.5]) - 0.3).abs() < 1e-12);
        assert!((c.distance_to(&[-3.0, -4.0, 0.5]) - 5.0).abs() < 1e-12);
    }
}
