use crate::error::{GeoError, Result};
use crate::geometry::face::{BoundaryEdge, FaceGrid, DEGENERACY_EPS, EDGE_SAMPLES};
use crate::geometry::mesh::{min_points_to_mesh, triangulate, MeshBvh, TriangleSoup};
use crate::geometry::point::Point3;

const SEGMENTS: f64 = (EDGE_SAMPLES - 1) as f64;

/// Closest approach of a generated face to a condition face: the sample
/// that attains it and its nearest point on the condition mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionWitness {
    pub distance: f64,
    pub sample: usize,
    pub gen_point: Point3,
    pub cond_point: Point3,
}

impl PositionWitness {
    /// Gradient of the distance with respect to a rigid translation of the
    /// generated face; zero when the faces touch.
    pub fn translation_gradient(&self) -> Point3 {
        let d = self.gen_point - self.cond_point;
        let n = d.norm();
        if n > 0.0 {
            d * (1.0 / n)
        } else {
            Point3::ZERO
        }
    }
}

/// Triangulated condition face with its search tree.
#[derive(Debug, Clone)]
pub struct CondSurface {
    mesh: TriangleSoup,
    bvh: MeshBvh,
}

impl CondSurface {
    pub fn new(face: &FaceGrid) -> Self {
        let mesh = triangulate(face);
        let bvh = MeshBvh::build(&mesh);
        Self { mesh, bvh }
    }

    pub fn witness(&self, points: &[Point3]) -> PositionWitness {
        let (sample, hit) = min_points_to_mesh(points, &self.mesh, &self.bvh)
            .expect("a face grid has samples and a non-empty triangulation");
        PositionWitness { distance: hit.distance_squared.sqrt(), sample, gen_point: points[sample], cond_point: hit.point }
    }
}

/// Minimum distance from the samples of `gen` to the triangulation of `cond`.
pub fn c_pos(gen: &FaceGrid, cond: &FaceGrid) -> f64 {
    CondSurface::new(cond).witness(gen.points()).distance
}

fn segments(e: &BoundaryEdge) -> impl Iterator<Item = Point3> + '_ {
    e.samples.windows(2).map(|w| w[1] - w[0])
}

/// Mean squared difference of corresponding segment lengths.
pub fn c_len(e: &BoundaryEdge, e_ref: &BoundaryEdge) -> f64 {
    segments(e).zip(segments(e_ref)).map(|(a, b)| (a.norm() - b.norm()).powi(2)).sum::<f64>() / SEGMENTS
}

fn unit(s: Point3) -> Result<Point3> {
    let n = s.norm();
    if !(n >= DEGENERACY_EPS) {
        return Err(GeoError::DegenerateSegment);
    }
    Ok(s * (1.0 / n))
}

/// Mean of `1 − u·u'` over corresponding unit segment directions.
pub fn c_angle(e: &BoundaryEdge, e_ref: &BoundaryEdge) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in segments(e).zip(segments(e_ref)) {
        total += 1.0 - unit(a)?.dot(unit(b)?);
    }
    Ok(total / SEGMENTS)
}

/// Gradient of [`c_len`] with respect to the samples of `e`.
pub fn c_len_gradient(e: &BoundaryEdge, e_ref: &BoundaryEdge) -> [Point3; EDGE_SAMPLES] {
    let mut g = [Point3::ZERO; EDGE_SAMPLES];
    for (i, (a, b)) in segments(e).zip(segments(e_ref)).enumerate() {
        let len = a.norm();
        if len == 0.0 {
            continue;
        }
        let coef = 2.0 * (len - b.norm()) / (SEGMENTS * len);
        g[i + 1] += a * coef;
        g[i] -= a * coef;
    }
    g
}

/// Gradient of [`c_angle`] with respect to the samples of `e`.
pub fn c_angle_gradient(e: &BoundaryEdge, e_ref: &BoundaryEdge) -> Result<[Point3; EDGE_SAMPLES]> {
    let mut g = [Point3::ZERO; EDGE_SAMPLES];
    for (i, (a, b)) in segments(e).zip(segments(e_ref)).enumerate() {
        let len = a.norm();
        let u = unit(a)?;
        let ur = unit(b)?;
        let d = (ur - u * u.dot(ur)) * (-1.0 / (SEGMENTS * len));
        g[i + 1] += d;
        g[i] -= d;
    }
    Ok(g)
}

/// Weights of the two edge terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeWeights {
    pub length: f64,
    pub angle: f64,
}

/// Weighted edge-length and edge-angle cost summed over matched edges,
/// given as `(gen edge, cond edge)`. A zero weight skips its term.
pub fn c_shape(pairs: &[(BoundaryEdge, BoundaryEdge)], w: ShapeWeights) -> Result<f64> {
    let mut total = 0.0;
    for (e, r) in pairs {
        if w.length != 0.0 {
            total += w.length * c_len(e, r);
        }
        if w.angle != 0.0 {
            total += w.angle * c_angle(e, r)?;
        }
    }
    Ok(total)
}

/// Gradient of [`c_shape`] for one pair with respect to the gen samples.
pub fn c_shape_gradient(e: &BoundaryEdge, e_ref: &BoundaryEdge, w: ShapeWeights) -> Result<[Point3; EDGE_SAMPLES]> {
    let mut g = [Point3::ZERO; EDGE_SAMPLES];
    if w.length != 0.0 {
        for (gi, li) in g.iter_mut().zip(c_len_gradient(e, e_ref)) {
            *gi += li * w.length;
        }
    }
    if w.angle != 0.0 {
        for (gi, ai) in g.iter_mut().zip(c_angle_gradient(e, e_ref)?) {
            *gi += ai * w.angle;
        }
    }
    Ok(g)
}

/// Mean over guide boxes of the closest candidate box under
/// `‖Δcenter‖ + ‖Δdims‖`, read from raw `[min, max]` rows.
pub fn d_geo(candidate: &ndarray::Array2<f64>, guide: &ndarray::Array2<f64>) -> Result<f64> {
    if candidate.nrows() == 0 || guide.nrows() == 0 {
        return Err(GeoError::EmptySet);
    }
    let split = |r: ndarray::ArrayView1<f64>| {
        let lo = Point3::new(r[0], r[1], r[2]);
        let hi = Point3::new(r[3], r[4], r[5]);
        ((lo + hi) * 0.5, hi - lo)
    };
    let cands: Vec<(Point3, Point3)> = candidate.rows().into_iter().map(split).collect();
    let total: f64 = guide
        .rows()
        .into_iter()
        .map(|r| {
            let (c, d) = split(r);
            cands.iter().map(|(ci, di)| (*ci - c).norm() + (*di - d).norm()).fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / guide.nrows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::face::FaceKind;
    use ndarray::array;

    fn line(len: f64) -> BoundaryEdge {
        BoundaryEdge::from_fn(|k| Point3::new(len * k as f64 / SEGMENTS, 0.0, 0.0))
    }

    #[test]
    fn edge_cost_examples() {
        assert!((c_len(&line(1.0), &line(2.0)) - 1.0 / 961.0).abs() < 1e-15);
        assert_eq!(c_len(&line(1.0), &line(1.0)), 0.0);
        let turned = BoundaryEdge::from_fn(|k| Point3::new(0.0, k as f64 / SEGMENTS, 0.0));
        assert!((c_angle(&line(1.0), &turned).unwrap() - 1.0).abs() < 1e-15);
        assert!((c_angle(&line(1.0), &line(1.0).reversed()).unwrap() - 2.0).abs() < 1e-15);
        let shifted = BoundaryEdge::from_fn(|k| line(1.0).samples[k] + Point3::new(0.0, 4.0, -1.0));
        assert!(c_angle(&line(1.0), &shifted).unwrap().abs() < 1e-15);
    }

    #[test]
    fn degenerate_segment_is_rejected() {
        let mut e = line(1.0);
        e.samples[3] = e.samples[2];
        assert_eq!(c_angle(&e, &line(1.0)).unwrap_err().to_string(), "degenerate-segment");
    }

    #[test]
    fn parallel_gap_position_cost() {
        let sq = |z: f64| FaceGrid::from_fn(FaceKind::Planar, 1, |u, v| Point3::new(u, v, z)).unwrap();
        assert!((c_pos(&sq(0.3), &sq(0.0)) - 0.3).abs() < 1e-12);
        assert_eq!(c_pos(&sq(0.0), &sq(0.0)), 0.0);
    }

    #[test]
    fn d_geo_examples() {
        let g = array![[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]];
        assert_eq!(d_geo(&g, &g).unwrap(), 0.0);
        let c = array![[1.0, 0.0, 0.0, 2.0, 1.0, 1.0]];
        assert_eq!(d_geo(&c, &g).unwrap(), 1.0);
        assert!(d_geo(&ndarray::Array2::zeros((0, 6)), &g).is_err());
    }
}
