use serde::{Deserialize, Serialize};

use super::face::{decode_face, FaceGrid, FaceKind};
use super::mesh::{triangulate, TriangleSoup};
use super::point::{BoundingBox, Point3, RigidTransform};
use crate::error::{GeoError, Result};

/// Tolerance for a face box to count as enclosing its grid.
pub const BOX_ENCLOSURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FaceRecord {
    bbox: BoundingBox,
    grid: Vec<Point3>,
    kind: FaceKind,
    orient: i8,
}

/// One face of a part: its sampled grid and its bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FaceRecord", into = "FaceRecord")]
pub struct Face {
    pub bbox: BoundingBox,
    pub grid: FaceGrid,
}

impl Face {
    /// Face with its box recomputed from the grid.
    pub fn from_grid(grid: FaceGrid) -> Self {
        Self { bbox: grid.bounding_box(), grid }
    }

    pub fn new(bbox: BoundingBox, grid: FaceGrid) -> Result<Self> {
        let tight = grid.tight_bounding_box();
        if !bbox.contains_box(&tight, BOX_ENCLOSURE_TOL) {
            return Err(GeoError::InvalidInput("face box does not enclose its grid".into()));
        }
        Ok(Self { bbox, grid })
    }

    /// Decodes a box into a face, keeping the given box.
    pub fn decode(bbox: BoundingBox, kind: FaceKind, orientation: i8) -> Result<Self> {
        let grid = decode_face(&bbox, kind, orientation)?;
        Ok(Self { bbox, grid })
    }
}

impl TryFrom<FaceRecord> for Face {
    type Error = GeoError;
    fn try_from(r: FaceRecord) -> Result<Self> {
        Face::new(r.bbox, FaceGrid::new(r.grid, r.kind, r.orient)?)
    }
}

impl From<Face> for FaceRecord {
    fn from(f: Face) -> Self {
        FaceRecord { bbox: f.bbox, grid: f.grid.points().to_vec(), kind: f.grid.kind, orient: f.grid.orientation }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PartRecord {
    faces: Vec<Face>,
    #[serde(default)]
    contact_indices: Vec<usize>,
    #[serde(default)]
    prompt: String,
}

/// A part as a set of faces plus the (0-based, sorted) indices of its
/// contact faces and an optional text prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartRecord", into = "PartRecord")]
pub struct PartModel {
    faces: Vec<Face>,
    contact_indices: Vec<usize>,
    pub prompt: String,
}

impl PartModel {
    /// Validates and canonicalizes `contact_indices` (sorted, duplicate-free,
    /// in range).
    pub fn new(faces: Vec<Face>, contact_indices: Vec<usize>, prompt: impl Into<String>) -> Result<Self> {
        let mut part = Self { faces, contact_indices: Vec::new(), prompt: prompt.into() };
        part.set_contact_indices(contact_indices)?;
        Ok(part)
    }

    pub fn from_grids(grids: Vec<FaceGrid>, contact_indices: Vec<usize>, prompt: impl Into<String>) -> Result<Self> {
        Self::new(grids.into_iter().map(Face::from_grid).collect(), contact_indices, prompt)
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn grids(&self) -> impl Iterator<Item = &FaceGrid> {
        self.faces.iter().map(|f| &f.grid)
    }

    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.faces.iter().map(|f| f.bbox).collect()
    }

    pub fn contact_indices(&self) -> &[usize] {
        &self.contact_indices
    }

    pub fn contact_faces(&self) -> Vec<&FaceGrid> {
        self.contact_indices.iter().map(|&i| &self.faces[i].grid).collect()
    }

    pub fn set_contact_indices(&mut self, mut idx: Vec<usize>) -> Result<()> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.faces.len()) {
            return Err(GeoError::InvalidInput(format!(
                "contact index {bad} out of range for {} faces",
                self.faces.len()
            )));
        }
        let n = idx.len();
        idx.sort_unstable();
        idx.dedup();
        if idx.len() != n {
            return Err(GeoError::InvalidInput("duplicate contact index".into()));
        }
        self.contact_indices = idx;
        Ok(())
    }

    /// All faces triangulated into one soup.
    pub fn triangle_soup(&self) -> TriangleSoup {
        let mut soup = TriangleSoup::default();
        for f in &self.faces {
            soup.extend(triangulate(&f.grid));
        }
        soup
    }

    /// Tight box over every grid sample.
    pub fn bounding_box(&self) -> Result<BoundingBox> {
        let pts: Vec<Point3> = self.faces.iter().flat_map(|f| f.grid.points().iter().copied()).collect();
        BoundingBox::enclosing(&pts).map_err(|_| GeoError::EmptyModel)
    }

    /// Applies `p -> p * scale + offset` to every grid sample and box.
    pub fn scaled_translated(&self, scale: f64, offset: Point3) -> PartModel {
        let map = |p: Point3| p * scale + offset;
        let faces = self
            .faces
            .iter()
            .map(|f| {
                let a = map(f.bbox.min_corner);
                let b = map(f.bbox.max_corner);
                Face { bbox: BoundingBox { min_corner: a.min(b), max_corner: a.max(b) }, grid: f.grid.map_points(map) }
            })
            .collect();
        PartModel { faces, contact_indices: self.contact_indices.clone(), prompt: self.prompt.clone() }
    }

    /// Rigidly moves every face; boxes are recomputed from the moved grids.
    pub fn transformed(&self, xf: &RigidTransform) -> PartModel {
        let faces = self.faces.iter().map(|f| Face::from_grid(f.grid.transformed(xf))).collect();
        PartModel { faces, contact_indices: self.contact_indices.clone(), prompt: self.prompt.clone() }
    }
}

impl TryFrom<PartRecord> for PartModel {
    type Error = GeoError;
    fn try_from(r: PartRecord) -> Result<Self> {
        PartModel::new(r.faces, r.contact_indices, r.prompt)
    }
}

impl From<PartModel> for PartRecord {
    fn from(p: PartModel) -> Self {
        PartRecord { faces: p.faces, contact_indices: p.contact_indices, prompt: p.prompt }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(z: f64) -> FaceGrid {
        FaceGrid::from_fn(FaceKind::Planar, 1, |u, v| Point3::new(u, v, z)).unwrap()
    }

    #[test]
    fn contact_indices_are_sorted_and_checked() {
        let p = PartModel::from_grids(vec![square(0.0), square(1.0)], vec![1, 0], "").unwrap();
        assert_eq!(p.contact_indices(), &[0, 1]);
        assert!(PartModel::from_grids(vec![square(0.0)], vec![1], "").is_err());
        assert!(PartModel::from_grids(vec![square(0.0), square(1.0)], vec![0, 0], "").is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let g = FaceGrid::from_fn(FaceKind::Planar, -1, |u, v| Point3::new(u * 0.1 + 1e-17, v / 3.0, 0.7)).unwrap();
        let p = PartModel::from_grids(vec![g], vec![0], "a peg").unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: PartModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn box_must_enclose_grid() {
        let b = BoundingBox::try_from([0.0, 0.0, 0.0, 0.5, 1.0, 1.0]).unwrap();
        assert!(Face::new(b, square(0.5)).is_err());
    }
}
