//! Binary map files.
//!
//! Layout: a little-endian `u64` header length, the JSON header, one
//! row-major `f32` payload per entry of `layers`, then one `u8` label per cell.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::sim_world::Obstacle;
use crate::terrain::{GridGeometry, GridMap2D, TerrainClass, TerrainMaps, TerrainTypeMap, TraversabilityConfig};

const FORMAT: &str = "offroad-nav-map";
const LAYERS: [&str; 2] = ["elevation", "traversability"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapHeader {
    pub format: String,
    pub version: u32,
    pub resolution: f64,
    pub origin: [f64; 2],
    pub width: usize,
    pub height: usize,
    pub layers: Vec<String>,
    /// Label value to class name for the trailing `u8` layer.
    pub labels: BTreeMap<u8, String>,
    pub obstacles: Vec<Obstacle>,
}

/// Map contents as stored on disk; elevation is `f32`-rounded.
#[derive(Clone, Debug, PartialEq)]
pub struct MapFile {
    pub header: MapHeader,
    pub elevation: Vec<f32>,
    pub traversability: Vec<f32>,
    pub labels: Vec<u8>,
}

impl MapFile {
    pub fn from_maps(maps: &TerrainMaps, obstacles: &[Obstacle]) -> Self {
        let g = maps.geometry();
        let header = MapHeader {
            format: FORMAT.into(),
            version: 1,
            resolution: g.resolution,
            origin: g.origin,
            width: g.width,
            height: g.height,
            layers: LAYERS.iter().map(|s| s.to_string()).collect(),
            labels: TerrainClass::ALL.iter().map(|c| (c.label(), c.name().to_string())).collect(),
            obstacles: obstacles.to_vec(),
        };
        Self {
            header,
            elevation: maps.elevation.values().iter().map(|&v| v as f32).collect(),
            traversability: maps.cost.values().iter().map(|&v| v as f32).collect(),
            labels: maps.classes.labels().iter().map(|c| c.label()).collect(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(8 + header.len() + self.labels.len() * 9);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for layer in [&self.elevation, &self.traversability] {
            for v in layer.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.labels);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| NavError::MapFormat(m.to_string());
        let len = bytes.get(..8).ok_or_else(|| bad("truncated header length"))?;
        let len = u64::from_le_bytes(len.try_into().unwrap()) as usize;
        let body = bytes.get(8..).ok_or_else(|| bad("truncated header"))?;
        if body.len() < len {
            return Err(bad("truncated header"));
        }
        let header: MapHeader = serde_json::from_slice(&body[..len])?;
        if header.format != FORMAT || header.version != 1 {
            return Err(bad("unsupported format or version"));
        }
        if header.layers != LAYERS {
            return Err(bad("unexpected layer list"));
        }
        let cells = header.width.checked_mul(header.height).ok_or_else(|| bad("grid too large"))?;
        let payload = &body[len..];
        if payload.len() != cells * 9 {
            return Err(NavError::MapFormat(format!("expected {} payload bytes, found {}", cells * 9, payload.len())));
        }
        let floats = |chunk: &[u8]| -> Vec<f32> {
            chunk.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect()
        };
        Ok(Self {
            elevation: floats(&payload[..cells * 4]),
            traversability: floats(&payload[cells * 4..cells * 8]),
            labels: payload[cells * 8..].to_vec(),
            header,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Rebuilds the layers. Traversability is recomputed from the stored
    /// elevation rather than read back.
    pub fn to_maps(&self, traversability: TraversabilityConfig) -> Result<TerrainMaps> {
        let h = &self.header;
        if !(h.resolution > 0.0) || h.width == 0 || h.height == 0 {
            return Err(NavError::MapFormat("empty or degenerate grid".into()));
        }
        let g = GridGeometry::new(h.resolution, h.origin, h.width, h.height);
        let elevation = GridMap2D::from_values(g, self.elevation.iter().map(|&v| v as f64).collect());
        let classes = self
            .labels
            .iter()
            .map(|&l| {
                let name =
                    h.labels.get(&l).ok_or_else(|| NavError::MapFormat(format!("label {l} missing from table")))?;
                TerrainClass::from_name(name).ok_or_else(|| NavError::UnknownTerrain(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        TerrainMaps::new(elevation, TerrainTypeMap::from_labels(g, classes), traversability)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim_world::ScenarioParams;

    #[test]
    fn bytes_round_trip() {
        let world = ScenarioParams::default().build().unwrap();
        let file = MapFile::from_maps(&world.maps, &world.obstacles);
        let back = MapFile::from_bytes(&file.to_bytes().unwrap()).unwrap();
        assert_eq!(back, file);
        let maps = back.to_maps(world.maps.traversability).unwrap();
        assert_eq!(maps.classes, world.maps.classes);
        for (a, b) in maps.elevation.values().iter().zip(world.maps.elevation.values()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let world = ScenarioParams::default().build().unwrap();
        let mut bytes = MapFile::from_maps(&world.maps, &[]).to_bytes().unwrap();
        bytes.pop();
        assert!(matches!(MapFile::from_bytes(&bytes), Err(NavError::MapFormat(_))));
        assert!(MapFile::from_bytes(&bytes[..5]).is_err());
    }
}
