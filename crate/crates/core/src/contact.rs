use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::face::{FaceGrid, GridIndex};
use crate::geometry::mesh::FaceMesh;
use crate::geometry::part::PartModel;
use crate::geometry::point::Point3;

/// Default contact distance tolerance (mm).
pub const DEFAULT_CONTACT_TOLERANCE: f64 = 0.1;

/// Normals count as opposed when their dot product is below this. A hair
/// under zero so perpendicular faces stay non-contacting after rotations.
pub const OPPOSED_NORMAL_DOT: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    pub face_a: usize,
    pub face_b: usize,
    /// Grid indices that satisfy both predicates, on face a if any fired
    /// there, otherwise on face b.
    pub witnesses: Vec<GridIndex>,
    pub witness_side: ContactSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactSide {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub pairs: Vec<ContactPair>,
    pub tolerance: f64,
    /// Contacted faces of model a (sorted).
    pub contact_indices_a: Vec<usize>,
    /// Contacted faces of model b (sorted).
    pub contact_indices_b: Vec<usize>,
}

impl ContactReport {
    pub fn pair_indices(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.face_a, p.face_b)).collect()
    }
}

/// Both contact predicates for one point: within `tolerance` of `target`, and
/// `normal` opposed to the target normal at the nearest sample.
pub fn point_contact(p: Point3, normal: Point3, target: &FaceGrid, tolerance: f64) -> bool {
    let prepared = PreparedFace::new(target);
    prepared.test(p, normal, tolerance)
}

/// A face with its triangulation, BVH and per-sample normals, for repeated
/// point tests.
pub struct PreparedFace<'a> {
    mesh: FaceMesh<'a>,
    normals: Vec<Option<Point3>>,
}

impl<'a> PreparedFace<'a> {
    pub fn new(face: &'a FaceGrid) -> Self {
        let normals = (0..face.points().len())
            .map(|idx| crate::geometry::face::face_normal_at(face, idx).ok())
            .collect();
        Self { mesh: FaceMesh::new(face), normals }
    }

    pub fn face(&self) -> &FaceGrid {
        self.mesh.face
    }

    pub fn normal(&self, idx: GridIndex) -> Option<Point3> {
        self.normals[idx]
    }

    /// Point test against this face. Degenerate target normals never count
    /// as opposed.
    pub fn test(&self, p: Point3, normal: Point3, tolerance: f64) -> bool {
        let (q, idx) = self.mesh.project(p);
        if p.distance(q) > tolerance {
            return false;
        }
        self.normals[idx].is_some_and(|n| normal.dot(n) < OPPOSED_NORMAL_DOT)
    }

    /// Grid indices of `self` whose samples pass the point test against `other`.
    pub fn witnesses_against(&self, other: &PreparedFace, tolerance: f64) -> Vec<GridIndex> {
        let reach = other.face().tight_bounding_box().inflated(tolerance);
        let pts = self.face().points();
        (0..pts.len())
            .filter(|&k| {
                reach.contains(pts[k], 0.0)
                    && self.normals[k].is_some_and(|n| other.test(pts[k], n, tolerance))
            })
            .collect()
    }
}

/// Contact test between two faces with the witnesses from whichever side
/// fired (side a first).
pub fn faces_in_contact(a: &FaceGrid, b: &FaceGrid, tolerance: f64) -> (bool, Vec<GridIndex>) {
    match prepared_contact(&PreparedFace::new(a), &PreparedFace::new(b), tolerance) {
        Some((_, w)) => (true, w),
        None => (false, Vec::new()),
    }
}

fn prepared_contact(a: &PreparedFace, b: &PreparedFace, tolerance: f64) -> Option<(ContactSide, Vec<GridIndex>)> {
    let ba = a.face().tight_bounding_box().inflated(tolerance);
    let bb = b.face().tight_bounding_box();
    if !ba.intersects(&bb) {
        return None;
    }
    let wa = a.witnesses_against(b, tolerance);
    if !wa.is_empty() {
        return Some((ContactSide::A, wa));
    }
    let wb = b.witnesses_against(a, tolerance);
    (!wb.is_empty()).then_some((ContactSide::B, wb))
}

/// Labels every contacting face pair between two assembled parts.
pub fn label_contacts(a: &PartModel, b: &PartModel, tolerance: f64) -> Result<ContactReport> {
    if a.is_empty() || b.is_empty() {
        return Err(GeoError::EmptyModel);
    }
    if !(tolerance > 0.0) {
        return Err(GeoError::InvalidInput(format!("contact tolerance must be positive, got {tolerance}")));
    }
    let pa: Vec<PreparedFace> = a.grids().map(PreparedFace::new).collect();
    let pb: Vec<PreparedFace> = b.grids().map(PreparedFace::new).collect();
    let mut pairs = Vec::new();
    for (i, fa) in pa.iter().enumerate() {
        for (j, fb) in pb.iter().enumerate() {
            if let Some((side, witnesses)) = prepared_contact(fa, fb, tolerance) {
                pairs.push(ContactPair { face_a: i, face_b: j, witnesses, witness_side: side });
            }
        }
    }
    let mut ia: Vec<usize> = pairs.iter().map(|p| p.face_a).collect();
    let mut ib: Vec<usize> = pairs.iter().map(|p| p.face_b).collect();
    ia.sort_unstable();
    ia.dedup();
    ib.sort_unstable();
    ib.dedup();
    Ok(ContactReport { pairs, tolerance, contact_indices_a: ia, contact_indices_b: ib })
}

/// [`label_contacts`] at the default tolerance, writing the contacted faces
/// back into both models.
pub fn annotate_contacts(a: &mut PartModel, b: &mut PartModel) -> Result<ContactReport> {
    let report = label_contacts(a, b, DEFAULT_CONTACT_TOLERANCE)?;
    a.set_contact_indices(report.contact_indices_a.clone())?;
    b.set_contact_indices(report.contact_indices_b.clone())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::face::{grid_index, FaceKind, GRID_POINTS};

    fn square(z: f64, orient: i8) -> FaceGrid {
        FaceGrid::from_fn(FaceKind::Planar, orient, |u, v| Point3::new(u, v, z)).unwrap()
    }

    #[test]
    fn point_contact_examples() {
        let f = square(0.0, 1);
        let down = Point3::new(0.0, 0.0, -1.0);
        assert!(point_contact(Point3::new(0.5, 0.5, 0.05), down, &f, 0.1));
        assert!(!point_contact(Point3::new(0.5, 0.5, 0.2), down, &f, 0.1));
        assert!(!point_contact(Point3::new(0.5, 0.5, 0.05), -down, &f, 0.1));
    }

    #[test]
    fn parallel_squares_all_witness() {
        let (hit, w) = faces_in_contact(&square(0.05, -1), &square(0.0, 1), 0.1);
        assert!(hit);
        assert_eq!(w, (0..GRID_POINTS).collect::<Vec<_>>());
    }

    #[test]
    fn disjoint_coplanar_squares_do_not_touch() {
        let b = square(0.0, 1).translated(Point3::new(2.0, 0.0, 0.0));
        assert_eq!(faces_in_contact(&square(0.0, -1), &b, 0.1), (false, vec![]));
    }

    #[test]
    fn witnesses_come_from_b_when_a_is_silent() {
        // a is a small patch over the middle of b; every point of a fires.
        let a = FaceGrid::from_fn(FaceKind::Planar, -1, |u, v| Point3::new(0.4 + 0.2 * u, 0.4 + 0.2 * v, 0.05)).unwrap();
        let b = square(0.0, 1);
        let (_, w) = faces_in_contact(&a, &b, 0.1);
        assert_eq!(w.len(), GRID_POINTS);
        let (_, w) = faces_in_contact(&b, &a, 0.1);
        assert!(!w.is_empty() && w.contains(&grid_index(15, 15)));
    }

    #[test]
    fn labeler_rejects_empty_models() {
        let empty = PartModel::new(vec![], vec![], "").unwrap();
        let one = PartModel::from_grids(vec![square(0.0, 1)], vec![], "").unwrap();
        assert_eq!(label_contacts(&empty, &one, 0.1).unwrap_err().to_string(), "empty-model");
    }
}
