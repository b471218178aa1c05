use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{Geometry, Rect, Vec3};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Table,
    Tray,
    BinNear,
    BinFar,
    OffWorld,
}

impl Region {
    pub fn is_bin(self) -> bool {
        matches!(self, Region::BinNear | Region::BinFar)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Region::Table => "table",
            Region::Tray => "tray",
            Region::BinNear => "bin-near",
            Region::BinFar => "bin-far",
            Region::OffWorld => "off",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Classifies a point. Tray wins over table where they overlap.
pub fn region_of(p: &Vec3, geom: &Geometry) -> Region {
    let on_table_slab = p[2] >= geom.table_z && p[2] <= geom.table_z + geom.fixture_height;
    if on_table_slab && geom.tray.contains(p[0], p[1]) {
        return Region::Tray;
    }
    if on_table_slab && geom.table.contains(p[0], p[1]) {
        return Region::Table;
    }
    if p[2] >= geom.bin_floor_z && p[2] <= geom.bin_top_z() && geom.bin.contains(p[0], p[1]) {
        return if p[0] < geom.bin_split_x { Region::BinNear } else { Region::BinFar };
    }
    Region::OffWorld
}

/// Height of a block center resting in `region`; `None` for [`Region::OffWorld`].
pub fn rest_z(region: Region, geom: &Geometry) -> Option<f64> {
    match region {
        Region::Table => Some(geom.table_rest_z()),
        Region::Tray => Some(geom.tray_rest_z),
        Region::BinNear | Region::BinFar => Some(geom.bin_rest_z()),
        Region::OffWorld => None,
    }
}

/// Horizontal footprint of a region (the tray is carved out of neither).
pub fn region_rect(region: Region, geom: &Geometry) -> Option<Rect> {
    match region {
        Region::Table => Some(geom.table),
        Region::Tray => Some(geom.tray),
        Region::BinNear => Some(geom.bin_near()),
        Region::BinFar => Some(geom.bin_far()),
        Region::OffWorld => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockFeature {
    pub position: Vec3,
    pub color: u32,
    pub index: u32,
}

/// Positions, colors and indices of every block. Block `i` sits at list position `i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 5]>", into = "Vec<[f64; 5]>")]
pub struct WorldState {
    pub blocks: Vec<BlockFeature>,
}

impl WorldState {
    pub fn new(blocks: Vec<BlockFeature>) -> Result<Self> {
        let s = WorldState { blocks };
        s.check()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn check(&self) -> Result<()> {
        for (i, b) in self.blocks.iter().enumerate() {
            if b.index as usize != i {
                return Err(Error::contract(format!("block at list position {i} has index {}", b.index)));
            }
            if b.position.iter().any(|v| !v.is_finite()) {
                return Err(Error::contract(format!("block {i} has a non-finite position")));
            }
        }
        Ok(())
    }

    pub fn regions(&self, geom: &Geometry) -> Vec<Region> {
        self.blocks.iter().map(|b| region_of(&b.position, geom)).collect()
    }

    /// Positions flattened to `[x0, y0, z0, x1, ...]`.
    pub fn position_vector(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.position).collect()
    }

    /// Euclidean distance between the stacked position vectors of two equally sized states.
    pub fn distance(&self, other: &WorldState) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                let d = super::geometry::distance(&a.position, &b.position);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Positions rounded to multiples of `quantum`; equal keys mean duplicate states.
    pub fn quantized_key(&self, quantum: f64) -> Vec<i64> {
        self.blocks.iter().flat_map(|b| b.position.map(|v| quantize(v, quantum))).collect()
    }

    /// Counts of blocks per region, in [`Region`] declaration order.
    pub fn region_summary(&self, geom: &Geometry) -> String {
        let regions = self.regions(geom);
        let mut parts = Vec::new();
        for r in [Region::Table, Region::Tray, Region::BinNear, Region::BinFar, Region::OffWorld] {
            let n = regions.iter().filter(|x| **x == r).count();
            if n > 0 {
                parts.push(format!("{r}:{n}"));
            }
        }
        parts.join(" ")
    }
}

pub(crate) fn quantize(v: f64, quantum: f64) -> i64 {
    (v / quantum).round() as i64
}

impl TryFrom<Vec<[f64; 5]>> for WorldState {
    type Error = Error;

    fn try_from(rows: Vec<[f64; 5]>) -> Result<Self> {
        let blocks = rows
            .into_iter()
            .map(|r| {
                if r[3] < 0.0 || r[4] < 0.0 || r[3].fract() != 0.0 || r[4].fract() != 0.0 {
                    return Err(Error::contract("color and index must be non-negative integers"));
                }
                Ok(BlockFeature { position: [r[0], r[1], r[2]], color: r[3] as u32, index: r[4] as u32 })
            })
            .collect::<Result<Vec<_>>>()?;
        WorldState::new(blocks)
    }
}

impl From<WorldState> for Vec<[f64; 5]> {
    fn from(s: WorldState) -> Self {
        s.blocks
            .iter()
            .map(|b| [b.position[0], b.position[1], b.position[2], b.color as f64, b.index as f64])
            .collect()
    }
}

/// Places blocks on the grid in a random order with uniform xy noise.
///
/// `counts[c]` is the number of blocks of color `c`.
pub fn sample_initial_state(geom: &Geometry, counts: &[usize], rng_seed: u64) -> Result<WorldState> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_initial_state_with(geom, counts, &mut rng)
}

pub fn sample_initial_state_with<R: Rng + ?Sized>(geom: &Geometry, counts: &[usize], rng: &mut R) -> Result<WorldState> {
    let total: usize = counts.iter().sum();
    let capacity = geom.grid.capacity();
    if total > capacity {
        return Err(Error::Capacity { requested: total, capacity });
    }
    if counts.len() > geom.num_colors as usize && counts[geom.num_colors as usize..].iter().any(|c| *c > 0) {
        return Err(Error::contract(format!("counts reference colors beyond the configured {}", geom.num_colors)));
    }
    let mut colors: Vec<u32> = counts.iter().enumerate().flat_map(|(c, n)| std::iter::repeat(c as u32).take(*n)).collect();
    let mut cells = geom.grid.cell_centers();
    cells.shuffle(rng);
    colors.shuffle(rng);
    let h = geom.grid.noise;
    let z = geom.table_rest_z();
    let blocks = colors
        .into_iter()
        .enumerate()
        .map(|(i, color)| {
            let (nx, ny) = if h > 0.0 { (rng.gen_range(-h..=h), rng.gen_range(-h..=h)) } else { (0.0, 0.0) };
            let c = cells[i];
            BlockFeature { position: [c[0] + nx, c[1] + ny, z], color, index: i as u32 }
        })
        .collect();
    WorldState::new(blocks)
}

/// Moves each block, with probability `prob`, to a random free spot in the tray or bin.
///
/// Raw initial states never have blocks in the tray or bin, so skills that need
/// them there are bootstrapped from states perturbed this way.
pub fn scatter_into_fixtures<R: Rng + ?Sized>(state: &WorldState, geom: &Geometry, prob: f64, rng: &mut R) -> WorldState {
    let mut out = state.clone();
    let clearance = geom.skills.placement_clearance;
    let inset = geom.skills.landing_inset;
    let targets = [Region::Tray, Region::BinNear, Region::BinFar];
    for i in 0..out.blocks.len() {
        if !rng.gen_bool(prob) {
            continue;
        }
        let region = targets[rng.gen_range(0..targets.len())];
        let rect = region_rect(region, geom).expect("fixture region").inset(inset);
        let z = rest_z(region, geom).expect("fixture region");
        for _ in 0..20 {
            let p = [rng.gen_range(rect.x[0]..=rect.x[1]), rng.gen_range(rect.y[0]..=rect.y[1]), z];
            if region_of(&p, geom) != region {
                continue;
            }
            let free = out
                .blocks
                .iter()
                .enumerate()
                .all(|(j, b)| j == i || super::geometry::horizontal_distance(&b.position, &p) > clearance);
            if free {
                out.blocks[i].position = p;
                break;
            }
        }
    }
    out
}
