//! File formats: PLY point clouds, binary score sidecars, similarity-matrix
//! dumps and OBJ polyline export. JSON formats live next to their types.

pub mod obj;
pub mod ply;
pub mod sidecar;
pub mod simmat;

/// Serde adapter writing a point as `[x, y, z]`.
pub mod point_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::geometry::Point3;

    pub fn serialize<S: Serializer>(p: &Point3, s: S) -> Result<S::Ok, S::Error> {
        [p.x, p.y, p.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point3, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Point3::new(x, y, z))
    }
}

/// Serde adapter writing a list of points as `[[x, y, z], ...]`.
pub mod points_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::geometry::Point3;

    pub fn serialize<S: Serializer>(pts: &[Point3], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<[f64; 3]> = pts.iter().map(|p| [p.x, p.y, p.z]).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point3>, D::Error> {
        let raw = Vec::<[f64; 3]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[x, y, z]| Point3::new(x, y, z)).collect())
    }
}

/// Reads a little-endian `u32` at `offset`.
pub(crate) fn le_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    let b = bytes.get(offset..offset.checked_add(4)?)?;
    Some(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub(crate) fn le_f32(bytes: &[u8], offset: usize) -> Option<f32> {
    le_u32(bytes, offset).map(f32::from_bits)
}
