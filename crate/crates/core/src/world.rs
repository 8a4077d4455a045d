//! Per-map data shared read-only by every episode on that map.

use crate::crowd::{CrowdConfig, CrowdNavMap};
use crate::gridmap::{base_costmap, connected_components, Costmap, DistanceField, OccupancyGrid};
use std::sync::Arc;

#[derive(Debug)]
pub struct World {
    pub grid: Arc<OccupancyGrid>,
    /// Robot-inflated static costmap used by the global planners.
    pub base: Costmap,
    pub crowd_nav: Arc<CrowdNavMap>,
    pub distance: DistanceField,
    /// Component label per cell of `base`'s traversable region.
    pub labels: Vec<Option<u32>>,
    pub inflation_radius: f64,
}

impl World {
    pub fn new(grid: OccupancyGrid, inflation_radius: f64, crowd: &CrowdConfig) -> Self {
        let grid = Arc::new(grid);
        let base = base_costmap(&grid, inflation_radius);
        let (labels, _) = connected_components(&base.traversable_mask(), grid.width(), grid.height());
        let crowd_nav = Arc::new(CrowdNavMap::new(grid.clone(), crowd));
        let distance = DistanceField::new(&grid);
        Self { grid, base, crowd_nav, distance, labels, inflation_radius }
    }
}
