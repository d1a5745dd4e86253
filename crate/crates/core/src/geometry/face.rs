use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::point::{BoundingBox, Point3, RigidTransform};
use crate::error::{GeoError, Result};

/// Samples per grid side.
pub const GRID_RES: usize = 32;
/// Samples per face, `GRID_RES²`.
pub const GRID_POINTS: usize = GRID_RES * GRID_RES;
/// Samples per boundary edge.
pub const EDGE_SAMPLES: usize = GRID_RES;
/// Two grid samples closer than this are the same point.
pub const WELD_TOLERANCE: f64 = 1e-9;
/// Lengths, areas and cross products below this are treated as zero.
pub const DEGENERACY_EPS: f64 = 1e-12;
/// Every stored face box is at least this thick along each axis, so flat
/// faces still have a decodable, non-degenerate box.
pub const FACE_BOX_MIN_EXTENT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceKind {
    Planar,
    HalfCylinder,
}

impl FaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FaceKind::Planar => "planar",
            FaceKind::HalfCylinder => "half_cylinder",
        }
    }
}

/// A 32×32 sampled parametric face. `points[i * 32 + j]` is the sample at
/// `u = i / 31`, `v = j / 31`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGrid {
    points: Vec<Point3>,
    pub kind: FaceKind,
    /// +1 or -1; multiplies the parametric normal `∂u × ∂v`.
    pub orientation: i8,
}

/// Grid sample index, `i * 32 + j`.
pub type GridIndex = usize;

pub fn grid_index(i: usize, j: usize) -> GridIndex {
    i * GRID_RES + j
}

pub fn grid_coords(idx: GridIndex) -> (usize, usize) {
    (idx / GRID_RES, idx % GRID_RES)
}

impl FaceGrid {
    pub fn new(points: Vec<Point3>, kind: FaceKind, orientation: i8) -> Result<Self> {
        if points.len() != GRID_POINTS {
            return Err(GeoError::ShapeMismatch(format!(
                "face grid needs {GRID_POINTS} points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeoError::InvalidInput("non-finite face grid point".into()));
        }
        if orientation != 1 && orientation != -1 {
            return Err(GeoError::InvalidInput(format!("orientation must be ±1, got {orientation}")));
        }
        Ok(Self { points, kind, orientation })
    }

    /// Samples `f(u, v)` on the unit parameter square.
    pub fn from_fn(kind: FaceKind, orientation: i8, f: impl Fn(f64, f64) -> Point3) -> Result<Self> {
        let n = (GRID_RES - 1) as f64;
        let points = (0..GRID_POINTS)
            .map(|idx| {
                let (i, j) = grid_coords(idx);
                f(i as f64 / n, j as f64 / n)
            })
            .collect();
        Self::new(points, kind, orientation)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn point(&self, i: usize, j: usize) -> Point3 {
        self.points[grid_index(i, j)]
    }

    pub fn map_points(&self, f: impl Fn(Point3) -> Point3) -> FaceGrid {
        FaceGrid {
            points: self.points.iter().map(|p| f(*p)).collect(),
            kind: self.kind,
            orientation: self.orientation,
        }
    }

    pub fn translated(&self, t: Point3) -> FaceGrid {
        self.map_points(|p| p + t)
    }

    pub fn transformed(&self, xf: &RigidTransform) -> FaceGrid {
        self.map_points(|p| xf.apply(p))
    }

    /// Same geometry, opposite normal.
    pub fn flipped(&self) -> FaceGrid {
        FaceGrid { orientation: -self.orientation, ..self.clone() }
    }

    /// Face box, widened to [`FACE_BOX_MIN_EXTENT`] along flat axes.
    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::enclosing(&self.points)
            .expect("face grid is non-empty and finite")
            .padded_to(FACE_BOX_MIN_EXTENT)
    }

    /// Tight box with no padding.
    pub fn tight_bounding_box(&self) -> BoundingBox {
        BoundingBox::enclosing(&self.points).expect("face grid is non-empty and finite")
    }

    /// The four border polylines: first row, last row, first column, last column.
    pub fn boundary_edges(&self) -> [BoundaryEdge; 4] {
        let last = GRID_RES - 1;
        [
            BoundaryEdge::from_fn(|k| self.point(0, k)),
            BoundaryEdge::from_fn(|k| self.point(last, k)),
            BoundaryEdge::from_fn(|k| self.point(k, 0)),
            BoundaryEdge::from_fn(|k| self.point(k, last)),
        ]
    }

    /// Checks that adjacent samples are distinct beyond `weld_tol`.
    pub fn validate(&self, weld_tol: f64) -> Result<()> {
        for i in 0..GRID_RES {
            for j in 0..GRID_RES {
                let p = self.point(i, j);
                if i + 1 < GRID_RES && p.distance(self.point(i + 1, j)) <= weld_tol {
                    return Err(GeoError::InvalidInput(format!("repeated samples at ({i},{j})/({},{j})", i + 1)));
                }
                if j + 1 < GRID_RES && p.distance(self.point(i, j + 1)) <= weld_tol {
                    return Err(GeoError::InvalidInput(format!("repeated samples at ({i},{j})/({i},{})", j + 1)));
                }
            }
        }
        Ok(())
    }

    /// Unit normals at every sample, in grid order.
    pub fn normals(&self) -> Result<Vec<Point3>> {
        (0..GRID_POINTS).map(|idx| face_normal_at(self, idx)).collect()
    }
}

/// One side of a face grid: 32 ordered samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub samples: [Point3; EDGE_SAMPLES],
}

impl BoundaryEdge {
    pub fn from_fn(f: impl Fn(usize) -> Point3) -> Self {
        Self { samples: std::array::from_fn(f) }
    }

    pub fn from_slice(points: &[Point3]) -> Result<Self> {
        if points.len() != EDGE_SAMPLES {
            return Err(GeoError::ShapeMismatch(format!(
                "boundary edge needs {EDGE_SAMPLES} samples, got {}",
                points.len()
            )));
        }
        Ok(Self::from_fn(|k| points[k]))
    }

    pub fn reversed(&self) -> Self {
        Self::from_fn(|k| self.samples[EDGE_SAMPLES - 1 - k])
    }

    pub fn length(&self) -> f64 {
        self.samples.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Orders axes as (thin, middle, long). Ties put the higher axis index first
/// in the thin slot, so a cube decodes to a z-facing plane.
pub fn sorted_axes(b: &BoundingBox) -> [usize; 3] {
    let d = b.dims();
    let mut axes = [2usize, 1, 0];
    axes.sort_by(|&a, &c| d[a].total_cmp(&d[c]));
    axes
}

/// Box shape heuristic used when only a box is known: a face whose box is
/// much thinner than its middle extent is planar, otherwise half-cylindrical.
pub fn infer_kind(b: &BoundingBox) -> FaceKind {
    let d = b.dims();
    let [thin, mid, _] = sorted_axes(b);
    if d[thin] < 0.25 * d[mid] {
        FaceKind::Planar
    } else {
        FaceKind::HalfCylinder
    }
}

/// Analytic face decoder.
///
/// * `Planar`: the rectangle spanning the two largest box extents at the
///   mid-plane of the smallest; `orientation` is the sign of the normal along
///   the thin axis.
/// * `HalfCylinder`: a half-elliptic cylinder with its axis along the longest
///   extent, its chord spanning the middle extent and its bulge filling the
///   thin extent. `orientation` picks the side the bulge points to; normals
///   point away from the axis.
pub fn decode_face(b: &BoundingBox, kind: FaceKind, orientation: i8) -> Result<FaceGrid> {
    let d = b.dims();
    if (0..3).any(|i| !(d[i] >= DEGENERACY_EPS)) {
        return Err(GeoError::DegenerateBox);
    }
    if orientation != 1 && orientation != -1 {
        return Err(GeoError::InvalidInput(format!("orientation must be ±1, got {orientation}")));
    }
    let lo = b.min_corner;
    let hi = b.max_corner;
    let c = b.center();
    let [thin, mid, long] = sorted_axes(b);
    match kind {
        FaceKind::Planar => {
            let ua = (thin + 1) % 3;
            let va = (thin + 2) % 3;
            let face = FaceGrid::from_fn(kind, 1, |u, v| {
                Point3::ZERO
                    .with_axis(thin, c[thin])
                    .with_axis(ua, lo[ua] + u * d[ua])
                    .with_axis(va, lo[va] + v * d[va])
            })?;
            // (ua, va, thin) is cyclic so the parametric normal is +thin.
            Ok(FaceGrid { orientation, ..face })
        }
        FaceKind::HalfCylinder => {
            let side = f64::from(orientation);
            let base = if orientation > 0 { lo[thin] } else { hi[thin] };
            let half_chord = 0.5 * d[mid];
            let face = FaceGrid::from_fn(kind, 1, |u, v| {
                let theta = PI * u;
                // Clamp keeps rounding from pushing samples outside the box.
                let a_mid = (c[mid] + half_chord * theta.cos()).clamp(lo[mid], hi[mid]);
                let a_thin = (base + side * d[thin] * theta.sin()).clamp(lo[thin], hi[thin]);
                Point3::ZERO
                    .with_axis(thin, a_thin)
                    .with_axis(mid, a_mid)
                    .with_axis(long, lo[long] + v * d[long])
            })?;
            let apex = grid_index(GRID_RES / 2, GRID_RES / 2);
            let raw = face_normal_at(&face, apex)?;
            let flag = if raw[thin] * side >= 0.0 { 1 } else { -1 };
            Ok(FaceGrid { orientation: flag, ..face })
        }
    }
}

/// Unit normal at a grid sample: the cross product of central-difference
/// tangents (one-sided on the border), times the face orientation.
pub fn face_normal_at(face: &FaceGrid, idx: GridIndex) -> Result<Point3> {
    if idx >= GRID_POINTS {
        return Err(GeoError::InvalidInput(format!("grid index {idx} out of range")));
    }
    let (i, j) = grid_coords(idx);
    let last = GRID_RES - 1;
    let (i0, i1) = (i.saturating_sub(1), (i + 1).min(last));
    let (j0, j1) = (j.saturating_sub(1), (j + 1).min(last));
    let tu = face.point(i1, j) - face.point(i0, j);
    let tv = face.point(i, j1) - face.point(i, j0);
    let n = tu.cross(tv);
    let len = n.norm();
    if !(len >= DEGENERACY_EPS) {
        return Err(GeoError::DegenerateNormal);
    }
    Ok(n * (f64::from(face.orientation) / len))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> BoundingBox {
        BoundingBox::try_from([0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn planar_unit_cube_decodes_to_mid_plane() {
        let f = decode_face(&unit_cube(), FaceKind::Planar, 1).unwrap();
        assert!(f.points().iter().all(|p| p.z == 0.5));
        assert_eq!(f.point(0, 0), Point3::new(0.0, 0.0, 0.5));
        assert_eq!(f.point(31, 31), Point3::new(1.0, 1.0, 0.5));
        assert_eq!(face_normal_at(&f, 77).unwrap(), Point3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn flat_box_is_degenerate() {
        let b = BoundingBox::try_from([0.0, 0.0, 0.0, 2.0, 1.0, 1e-13]).unwrap();
        let err = decode_face(&b, FaceKind::Planar, 1).unwrap_err();
        assert_eq!(err.to_string(), "degenerate-box");
    }

    #[test]
    fn half_cylinder_stays_inside_box() {
        let b = BoundingBox::try_from([-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]).unwrap();
        for orient in [1, -1] {
            let f = decode_face(&b, FaceKind::HalfCylinder, orient).unwrap();
            // Direct comparison, no tolerance: every sample lies in the box.
            assert!(f.points().iter().all(|p| b.contains(*p, 0.0)));
        }
    }

    #[test]
    fn half_cylinder_normal_points_along_bulge() {
        let b = BoundingBox::try_from([0.0, -1.0, 0.0, 4.0, 1.0, 1.0]).unwrap();
        let f = decode_face(&b, FaceKind::HalfCylinder, 1).unwrap();
        let apex = grid_index(GRID_RES / 2, 7);
        let n = face_normal_at(&f, apex).unwrap();
        // Axis is x (longest); the analytic normal at θ≈π/2 is ≈ +z.
        assert!(n.x.abs() < 1e-6);
        let (i, _) = grid_coords(apex);
        let theta = PI * i as f64 / 31.0;
        let analytic = Point3::new(0.0, theta.cos() / 1.0, theta.sin() / 1.0);
        let analytic = analytic * (1.0 / analytic.norm());
        assert!(n.dot(analytic) > 0.99);
        let g = decode_face(&b, FaceKind::HalfCylinder, -1).unwrap();
        assert!(face_normal_at(&g, apex).unwrap().z < -0.99);
    }

    #[test]
    fn flipping_negates_normals() {
        let f = decode_face(&unit_cube(), FaceKind::Planar, 1).unwrap();
        let g = f.flipped();
        for idx in [0, 100, 1023] {
            assert_eq!(face_normal_at(&g, idx).unwrap(), -face_normal_at(&f, idx).unwrap());
        }
    }

    #[test]
    fn planar_box_round_trip_on_spanned_axes() {
        let b = BoundingBox::try_from([0.0, -2.0, 1.0, 3.0, 2.0, 1.5]).unwrap();
        let f = decode_face(&b, FaceKind::Planar, -1).unwrap();
        let r = f.tight_bounding_box();
        assert!(b.contains_box(&r, 1e-9));
        assert_eq!((r.min_corner.x, r.max_corner.x), (0.0, 3.0));
        assert_eq!((r.min_corner.y, r.max_corner.y), (-2.0, 2.0));
    }

    #[test]
    fn infer_kind_separates_flat_and_round_boxes() {
        let flat = BoundingBox::try_from([0.0, 0.0, 0.0, 2.0, 1.0, 0.01]).unwrap();
        let round = BoundingBox::try_from([0.0, 0.0, 0.0, 2.0, 1.0, 4.0]).unwrap();
        assert_eq!(infer_kind(&flat), FaceKind::Planar);
        assert_eq!(infer_kind(&round), FaceKind::HalfCylinder);
    }
}
