//! Binary plane containers.
//!
//! A container is a raw little-endian `f32` array, planes back to back and
//! each plane row-major from row 0, plus a JSON sidecar describing the grid,
//! the horizon and the per-timestep channel order. Confidence maps store four
//! channels per timestep (one per class); costmaps store one SDF channel.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::costmap::Costmap;
use crate::error::{Error, Result};
use crate::forecast::ConfidenceMaps;
use crate::geometry::GridSpec;
use crate::sim::SemanticClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSidecar {
    pub spec: GridSpec,
    pub horizon: usize,
    /// Channel names in storage order within each timestep.
    pub class_order: Vec<String>,
    pub dtype: String,
}

impl PlaneSidecar {
    fn new(spec: GridSpec, horizon: usize, class_order: Vec<String>) -> Self {
        Self { spec, horizon, class_order, dtype: "f32le".into() }
    }

    pub fn expected_values(&self) -> usize {
        self.horizon * self.class_order.len() * self.spec.len()
    }
}

fn encode(values: impl Iterator<Item = f32>) -> Vec<u8> {
    values.flat_map(f32::to_le_bytes).collect()
}

fn decode(bytes: &[u8], sidecar: &PlaneSidecar) -> Result<Vec<f32>> {
    let expected = sidecar.expected_values();
    if bytes.len() != expected * 4 {
        return Err(Error::LengthMismatch { expected: expected * 4, actual: bytes.len() });
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn confidence_maps_bytes(maps: &ConfidenceMaps) -> (Vec<u8>, PlaneSidecar) {
    let order = SemanticClass::ALL.iter().map(|c| c.name().to_string()).collect();
    (encode(maps.values().iter().copied()), PlaneSidecar::new(maps.spec, maps.horizon, order))
}

pub fn confidence_maps_from_bytes(bytes: &[u8], sidecar: &PlaneSidecar) -> Result<ConfidenceMaps> {
    let expected: Vec<String> = SemanticClass::ALL.iter().map(|c| c.name().to_string()).collect();
    if sidecar.class_order != expected {
        return Err(Error::InvalidInput(format!("unsupported class order {:?}", sidecar.class_order)));
    }
    ConfidenceMaps::from_values(sidecar.spec, sidecar.horizon, decode(bytes, sidecar)?)
}

pub fn costmap_bytes(cost: &Costmap) -> (Vec<u8>, PlaneSidecar) {
    let values = (0..cost.horizon).flat_map(|t| cost.plane(t).iter().map(|&v| v as f32));
    (encode(values), PlaneSidecar::new(cost.spec, cost.horizon, vec!["sdf".into()]))
}

/// Reads back a costmap container as `horizon` SDF planes.
pub fn costmap_planes_from_bytes(bytes: &[u8], sidecar: &PlaneSidecar) -> Result<Vec<Vec<f32>>> {
    let n = sidecar.spec.len();
    Ok(decode(bytes, sidecar)?.chunks(n.max(1)).map(<[f32]>::to_vec).collect())
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `<stem>.bin` and `<stem>.json`.
pub fn write_container(stem: &Path, bytes: &[u8], sidecar: &PlaneSidecar) -> Result<()> {
    let (bin, json) = paths(stem);
    fs::write(bin, bytes)?;
    fs::write(json, serde_json::to_vec_pretty(sidecar)?)?;
    Ok(())
}

pub fn read_container(stem: &Path) -> Result<(Vec<u8>, PlaneSidecar)> {
    let (bin, json) = paths(stem);
    let sidecar = serde_json::from_slice(&fs::read(json)?)?;
    Ok((fs::read(bin)?, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{forecast_oracle, to_masks};
    use crate::geometry::{Cell, Pose2};
    use crate::sim::ObservationRaster;

    fn maps() -> ConfidenceMaps {
        let spec = GridSpec::new(Pose2::new(1.0, 2.0, 0.0), 0.5, 3, 2).unwrap();
        let mut r = ObservationRaster::filled(spec, SemanticClass::Empty);
        r.set(Cell { row: 1, col: 2 }, SemanticClass::Occupied);
        let s = ObservationRaster::filled(spec, SemanticClass::Shadow);
        forecast_oracle(&[r, s]).unwrap()
    }

    #[test]
    fn confidence_round_trip() {
        let m = maps();
        let (bytes, side) = confidence_maps_bytes(&m);
        assert_eq!(bytes.len(), 2 * 4 * 6 * 4);
        // first plane is empty at t = 0: all ones except the occupied cell
        assert_eq!(&bytes[..4], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[5 * 4..6 * 4], &0.0f32.to_le_bytes());
        assert_eq!(side.class_order, ["empty", "occupied", "shadow", "outOfRange"]);
        assert_eq!(confidence_maps_from_bytes(&bytes, &side).unwrap(), m);
        assert!(confidence_maps_from_bytes(&bytes[1..], &side).is_err());
    }

    #[test]
    fn costmap_file_round_trip() {
        let cost = Costmap::from_masks(&to_masks(&maps()), 10.0);
        let (bytes, side) = costmap_bytes(&cost);
        let dir = std::env::temp_dir().join(format!("cobev-export-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let stem = dir.join("cost");
        write_container(&stem, &bytes, &side).unwrap();
        let (b2, s2) = read_container(&stem).unwrap();
        assert_eq!(s2, side);
        let planes = costmap_planes_from_bytes(&b2, &s2).unwrap();
        assert_eq!(planes.len(), 2);
        for (t, plane) in planes.iter().enumerate() {
            let expect: Vec<f32> = cost.plane(t).iter().map(|&v| v as f32).collect();
            assert_eq!(plane, &expect);
        }
        fs::remove_dir_all(dir).unwrap();
    }
}
