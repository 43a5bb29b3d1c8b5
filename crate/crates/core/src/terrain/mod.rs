//! Terrain layers: elevation, terrain classes and geometric traversability,
//! plus the geometry that turns a surface into a vehicle attitude.
//!
//! All layers share one [`GridGeometry`]. Maps are built once per scenario and
//! then only read, so they can be shared freely between planner threads.

mod attitude;
mod cost;
mod grid;

pub use attitude::{attitude_from_normal, surface_gradient, surface_normal, Attitude, MAX_SURFACE_SLOPE};
pub use cost::{geometric_traversability, submap, Patch, TraversabilityConfig, TraversabilityWeights};
pub use grid::{GridGeometry, GridMap2D};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};

/// Terrain class label carried by every cell of a [`TerrainTypeMap`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerrainClass {
    Grass,
    Mud,
}

impl TerrainClass {
    pub const ALL: [TerrainClass; 2] = [TerrainClass::Grass, TerrainClass::Mud];

    pub fn label(self) -> u8 {
        match self {
            TerrainClass::Grass => 0,
            TerrainClass::Mud => 1,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label() == label)
    }

    pub fn name(self) -> &'static str {
        match self {
            TerrainClass::Grass => "grass",
            TerrainClass::Mud => "mud",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for TerrainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-cell terrain class labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainTypeMap {
    geometry: GridGeometry,
    labels: Vec<TerrainClass>,
}

impl TerrainTypeMap {
    pub fn filled(geometry: GridGeometry, class: TerrainClass) -> Self {
        Self { labels: vec![class; geometry.len()], geometry }
    }

    pub fn from_fn(geometry: GridGeometry, mut f: impl FnMut(usize, usize) -> TerrainClass) -> Self {
        let mut labels = Vec::with_capacity(geometry.len());
        for row in 0..geometry.height {
            for col in 0..geometry.width {
                labels.push(f(col, row));
            }
        }
        Self { geometry, labels }
    }

    pub fn from_labels(geometry: GridGeometry, labels: Vec<TerrainClass>) -> Self {
        assert_eq!(labels.len(), geometry.len());
        Self { geometry, labels }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn labels(&self) -> &[TerrainClass] {
        &self.labels
    }

    pub fn get(&self, col: usize, row: usize) -> TerrainClass {
        self.labels[self.geometry.index(col, row)]
    }

    pub fn class_at(&self, x: f64, y: f64) -> Option<TerrainClass> {
        self.geometry.cell_of(x, y).map(|(c, r)| self.get(c, r))
    }

    /// Distinct classes present, in label order.
    pub fn classes(&self) -> Vec<TerrainClass> {
        let mut seen: Vec<TerrainClass> = TerrainClass::ALL.into_iter().filter(|c| self.labels.contains(c)).collect();
        seen.sort();
        seen
    }
}

/// Co-registered elevation, terrain-class and geometric-cost layers.
#[derive(Clone, Debug, PartialEq)]
pub struct TerrainMaps {
    pub elevation: GridMap2D,
    pub classes: TerrainTypeMap,
    pub cost: GridMap2D,
    pub traversability: TraversabilityConfig,
}

impl TerrainMaps {
    pub fn new(elevation: GridMap2D, classes: TerrainTypeMap, traversability: TraversabilityConfig) -> Result<Self> {
        traversability.weights.validate()?;
        if elevation.geometry() != classes.geometry() {
            return Err(NavError::Config("elevation and terrain-class grids differ in geometry".into()));
        }
        let cost = geometric_traversability(&elevation, &traversability);
        Ok(Self { elevation, classes, cost, traversability })
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.elevation.geometry()
    }

    pub fn t_max(&self) -> f64 {
        self.traversability.weights.t_max
    }

    /// Vehicle attitude resting on the surface at `(x, y)` with heading `yaw`.
    pub fn attitude_at(&self, x: f64, y: f64, yaw: f64) -> Result<Attitude> {
        let n = surface_normal(&self.elevation, x, y)?;
        attitude_from_normal(&n, yaw)
    }

    pub fn class_at(&self, x: f64, y: f64) -> Option<TerrainClass> {
        self.classes.class_at(x, y)
    }
}
