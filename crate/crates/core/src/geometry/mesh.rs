use super::face::{grid_index, FaceGrid, GridIndex, DEGENERACY_EPS, GRID_POINTS, GRID_RES};
use super::point::{BoundingBox, Point3};
use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub a: Point3,
    pub b: Point3,
    pub c: Point3,
}

impl Triangle {
    pub fn new(a: Point3, b: Point3, c: Point3) -> Self {
        Self { a, b, c }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.b - self.a).cross(self.c - self.a).norm()
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox {
            min_corner: self.a.min(self.b).min(self.c),
            max_corner: self.a.max(self.b).max(self.c),
        }
    }

    pub fn centroid(&self) -> Point3 {
        (self.a + self.b + self.c) * (1.0 / 3.0)
    }

    /// Closest point on the (closed) triangle to `p`, by Voronoi-region
    /// classification (Ericson, *Real-Time Collision Detection* §5.1.5).
    pub fn closest_point(&self, p: Point3) -> Point3 {
        let (a, b, c) = (self.a, self.b, self.c);
        let ab = b - a;
        let ac = c - a;
        let ap = p - a;
        let d1 = ab.dot(ap);
        let d2 = ac.dot(ap);
        if d1 <= 0.0 && d2 <= 0.0 {
            return a;
        }
        let bp = p - b;
        let d3 = ab.dot(bp);
        let d4 = ac.dot(bp);
        if d3 >= 0.0 && d4 <= d3 {
            return b;
        }
        let vc = d1 * d4 - d3 * d2;
        if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            let v = d1 / (d1 - d3);
            return a + ab * v;
        }
        let cp = p - c;
        let d5 = ab.dot(cp);
        let d6 = ac.dot(cp);
        if d6 >= 0.0 && d5 <= d6 {
            return c;
        }
        let vb = d5 * d2 - d1 * d6;
        if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            let w = d2 / (d2 - d6);
            return a + ac * w;
        }
        let va = d3 * d6 - d5 * d4;
        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            return b + (c - b) * w;
        }
        let denom = 1.0 / (va + vb + vc);
        let v = vb * denom;
        let w = vc * denom;
        a + ab * v + ac * w
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleSoup {
    pub triangles: Vec<Triangle>,
}

impl TriangleSoup {
    pub fn new(triangles: Vec<Triangle>) -> Self {
        Self { triangles }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(Triangle::area).sum()
    }

    pub fn extend(&mut self, other: TriangleSoup) {
        self.triangles.extend(other.triangles);
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let first = self.triangles.first()?.bounding_box();
        Some(self.triangles.iter().fold(first, |acc, t| acc.union(&t.bounding_box())))
    }
}

/// Splits every grid cell along its shorter diagonal (ties: the `00–11`
/// diagonal). Triangles with area ≤ 1e-12 are dropped, so collapsed rows
/// yield fewer than `2·31·31` triangles. Winding follows `∂u × ∂v`.
pub fn triangulate(face: &FaceGrid) -> TriangleSoup {
    let mut tris = Vec::with_capacity(2 * (GRID_RES - 1) * (GRID_RES - 1));
    for i in 0..GRID_RES - 1 {
        for j in 0..GRID_RES - 1 {
            let p00 = face.point(i, j);
            let p10 = face.point(i + 1, j);
            let p11 = face.point(i + 1, j + 1);
            let p01 = face.point(i, j + 1);
            let (t1, t2) = if p00.distance_squared(p11) <= p10.distance_squared(p01) {
                (Triangle::new(p00, p10, p11), Triangle::new(p00, p11, p01))
            } else {
                (Triangle::new(p00, p10, p01), Triangle::new(p10, p11, p01))
            };
            for t in [t1, t2] {
                if t.area() > DEGENERACY_EPS {
                    tris.push(t);
                }
            }
        }
    }
    TriangleSoup::new(tris)
}

/// Exact Euclidean distance from `p` to the closest point of `mesh`.
pub fn point_to_mesh_distance(p: Point3, mesh: &TriangleSoup) -> Result<f64> {
    closest_point_on_mesh(p, mesh).map(|(q, _)| q.distance(p))
}

/// Closest point on `mesh` and the index of the triangle carrying it
/// (first triangle wins ties).
pub fn closest_point_on_mesh(p: Point3, mesh: &TriangleSoup) -> Result<(Point3, usize)> {
    let mut best: Option<(f64, Point3, usize)> = None;
    for (k, t) in mesh.triangles.iter().enumerate() {
        let q = t.closest_point(p);
        let d2 = q.distance_squared(p);
        if best.is_none_or(|(bd, _, _)| d2 < bd) {
            best = Some((d2, q, k));
        }
    }
    best.map(|(_, q, k)| (q, k)).ok_or(GeoError::EmptyMesh)
}

/// Index of the grid sample nearest to `q` (lowest index on ties).
pub fn nearest_grid_sample(face: &FaceGrid, q: Point3) -> GridIndex {
    let mut best = (f64::INFINITY, 0);
    for (idx, s) in face.points().iter().enumerate() {
        let d = s.distance_squared(q);
        if d < best.0 {
            best = (d, idx);
        }
    }
    best.1
}

/// Projection of `p` onto the triangulated face, plus the nearest grid sample
/// to the projected point.
pub fn project_to_face(p: Point3, face: &FaceGrid) -> (Point3, GridIndex) {
    FaceMesh::new(face).project(p)
}

/// A face together with its triangulation and a BVH over the triangles, for
/// repeated projections onto the same face.
#[derive(Debug, Clone)]
pub struct FaceMesh<'a> {
    pub face: &'a FaceGrid,
    pub mesh: TriangleSoup,
    pub bvh: MeshBvh,
}

impl<'a> FaceMesh<'a> {
    pub fn new(face: &'a FaceGrid) -> Self {
        let mesh = triangulate(face);
        let bvh = MeshBvh::build(&mesh);
        Self { face, mesh, bvh }
    }

    pub fn project(&self, p: Point3) -> (Point3, GridIndex) {
        let q = match self.bvh.closest_point(&self.mesh, p, f64::INFINITY) {
            Some(hit) => hit.point,
            // Fully collapsed face: fall back to the samples themselves.
            None => self.face.point(0, 0),
        };
        (q, nearest_grid_sample(self.face, q))
    }

    pub fn distance(&self, p: Point3) -> f64 {
        match self.bvh.closest_point(&self.mesh, p, f64::INFINITY) {
            Some(hit) => hit.distance_squared.sqrt(),
            None => self.face.point(0, 0).distance(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshHit {
    pub point: Point3,
    pub distance_squared: f64,
    pub triangle: usize,
}

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: BoundingBox,
    /// Leaf: `start..start+count` into `order`. Inner: children at `left`, `left+1`.
    start: usize,
    count: usize,
    left: usize,
}

/// Bounding-volume hierarchy for exact nearest-point queries on a soup.
#[derive(Debug, Clone)]
pub struct MeshBvh {
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
}

const LEAF_SIZE: usize = 4;

impl MeshBvh {
    pub fn build(mesh: &TriangleSoup) -> Self {
        let mut order: Vec<usize> = (0..mesh.len()).collect();
        let centroids: Vec<Point3> = mesh.triangles.iter().map(Triangle::centroid).collect();
        let boxes: Vec<BoundingBox> = mesh.triangles.iter().map(Triangle::bounding_box).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            nodes.push(BvhNode { bounds: boxes[0], start: 0, count: 0, left: 0 });
            Self::split(&mut nodes, 0, &mut order, 0, mesh.len(), &centroids, &boxes);
        }
        Self { nodes, order }
    }

    fn split(
        nodes: &mut Vec<BvhNode>,
        node: usize,
        order: &mut [usize],
        start: usize,
        end: usize,
        centroids: &[Point3],
        boxes: &[BoundingBox],
    ) {
        let slice = &mut order[start..end];
        let bounds = slice.iter().skip(1).fold(boxes[slice[0]], |acc, &k| acc.union(&boxes[k]));
        nodes[node].bounds = bounds;
        if slice.len() <= LEAF_SIZE {
            nodes[node].start = start;
            nodes[node].count = slice.len();
            return;
        }
        let (clo, chi) = slice
            .iter()
            .fold((centroids[slice[0]], centroids[slice[0]]), |(lo, hi), &k| {
                (lo.min(centroids[k]), hi.max(centroids[k]))
            });
        let ext = chi - clo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        slice.sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
        let mid = start + slice.len() / 2;
        let left = nodes.len();
        nodes.push(BvhNode { bounds, start: 0, count: 0, left: 0 });
        nodes.push(BvhNode { bounds, start: 0, count: 0, left: 0 });
        nodes[node].left = left;
        Self::split(nodes, left, order, start, mid, centroids, boxes);
        Self::split(nodes, left + 1, order, mid, end, centroids, boxes);
    }

    /// Closest point of `mesh` (the soup this BVH was built from) to `p`, if
    /// it lies strictly closer than `sqrt(bound_sq)`. Ties resolve to the
    /// lowest triangle index.
    pub fn closest_point(&self, mesh: &TriangleSoup, p: Point3, bound_sq: f64) -> Option<MeshHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<MeshHit> = None;
        let mut best_d2 = bound_sq;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds.distance_squared_to(p) > best_d2 {
                continue;
            }
            if node.count > 0 {
                for &k in &self.order[node.start..node.start + node.count] {
                    let q = mesh.triangles[k].closest_point(p);
                    let d2 = q.distance_squared(p);
                    let better = match best {
                        None => d2 < best_d2 || (d2 == best_d2 && bound_sq.is_infinite()),
                        Some(b) => d2 < b.distance_squared || (d2 == b.distance_squared && k < b.triangle),
                    };
                    if better {
                        best_d2 = d2;
                        best = Some(MeshHit { point: q, distance_squared: d2, triangle: k });
                    }
                }
            } else {
                let (l, r) = (node.left, node.left + 1);
                let dl = self.nodes[l].bounds.distance_squared_to(p);
                let dr = self.nodes[r].bounds.distance_squared_to(p);
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }
}

/// Minimum over the samples of `points` of the distance to `mesh`, with the
/// arg-min sample index and closest mesh point. Lowest sample index wins ties.
pub fn min_points_to_mesh(points: &[Point3], mesh: &TriangleSoup, bvh: &MeshBvh) -> Option<(usize, MeshHit)> {
    let mut best: Option<(usize, MeshHit)> = None;
    for (k, p) in points.iter().enumerate() {
        let bound = best.map_or(f64::INFINITY, |(_, h)| h.distance_squared);
        // Strictly-closer query keeps the earliest sample on ties.
        if let Some(hit) = bvh.closest_point(mesh, *p, bound) {
            if best.is_none_or(|(_, h)| hit.distance_squared < h.distance_squared) {
                best = Some((k, hit));
            }
        }
    }
    best
}

/// Number of triangles a clean 32×32 grid produces.
pub const FULL_TRIANGLE_COUNT: usize = 2 * (GRID_RES - 1) * (GRID_RES - 1);

/// Grid corner indices of a face, in `(0,0) (31,0) (0,31) (31,31)` order.
pub fn grid_corners() -> [GridIndex; 4] {
    let l = GRID_RES - 1;
    [grid_index(0, 0), grid_index(l, 0), grid_index(0, l), grid_index(l, l)]
}

const _: () = assert!(GRID_POINTS == 1024);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::face::{decode_face, FaceKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> FaceGrid {
        FaceGrid::from_fn(FaceKind::Planar, 1, |u, v| Point3::new(u, v, 0.0)).unwrap()
    }

    #[test]
    fn clean_grid_has_full_triangle_count_and_area() {
        let soup = triangulate(&unit_square());
        assert_eq!(soup.len(), FULL_TRIANGLE_COUNT);
        assert!((soup.area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn collapsed_row_drops_triangles() {
        let f = FaceGrid::from_fn(FaceKind::Planar, 1, |u, v| {
            let r = u.max(1e-300);
            let r = if u == 0.0 { 0.0 } else { r };
            Point3::new(r * (v * 3.0).cos(), r * (v * 3.0).sin(), 0.0)
        })
        .unwrap();
        assert!(triangulate(&f).len() < FULL_TRIANGLE_COUNT);
    }

    #[test]
    fn distance_examples() {
        let t = TriangleSoup::new(vec![Triangle::new(
            Point3::new(-1.0, -1.0, 0.0),
            Point3::new(2.0, -1.0, 0.0),
            Point3::new(-1.0, 2.0, 0.0),
        )]);
        assert_eq!(point_to_mesh_distance(Point3::new(0.0, 0.0, 1.0), &t).unwrap(), 1.0);
        assert_eq!(point_to_mesh_distance(Point3::new(2.0, -1.0, 0.0), &t).unwrap(), 0.0);
        assert_eq!(
            point_to_mesh_distance(Point3::ZERO, &TriangleSoup::default()).unwrap_err().to_string(),
            "empty-mesh"
        );
    }

    #[test]
    fn bvh_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rp = |s: f64| Point3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
        let tris: Vec<Triangle> = (0..300).map(|_| {
            let c = rp(3.0);
            Triangle::new(c + rp(0.4), c + rp(0.4), c + rp(0.4))
        }).collect();
        let soup = TriangleSoup::new(tris);
        let bvh = MeshBvh::build(&soup);
        for _ in 0..200 {
            let p = rp(4.0);
            let (q, k) = closest_point_on_mesh(p, &soup).unwrap();
            let hit = bvh.closest_point(&soup, p, f64::INFINITY).unwrap();
            assert_eq!(hit.distance_squared, q.distance_squared(p));
            assert_eq!(hit.triangle, k);
        }
    }

    #[test]
    fn projection_examples() {
        let f = unit_square();
        let s = f.point(5, 9);
        assert_eq!(project_to_face(s, &f), (s, grid_index(5, 9)));
        let (q, idx) = project_to_face(Point3::new(0.3, 0.3, 2.0), &f);
        assert!(q.distance(Point3::new(0.3, 0.3, 0.0)) < 1e-15);
        assert_eq!(idx, grid_index(9, 9));
    }

    #[test]
    fn min_points_to_mesh_finds_gap() {
        let f = unit_square();
        let g = f.translated(Point3::new(0.0, 0.0, 0.3));
        let fm = FaceMesh::new(&f);
        let (k, hit) = min_points_to_mesh(g.points(), &fm.mesh, &fm.bvh).unwrap();
        assert_eq!(k, 0);
        assert!((hit.distance_squared.sqrt() - 0.3).abs() < 1e-15);
        let b = BoundingBox::try_from([0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(decode_face(&b, FaceKind::HalfCylinder, 1).is_ok());
    }
}
