//! Evaluation metrics for generated parts.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::faces_in_contact;
use crate::error::{GeoError, Result};
use crate::guidance::costs::CondSurface;
use crate::geometry::face::{FaceGrid, GRID_RES, WELD_TOLERANCE};
use crate::geometry::mesh::TriangleSoup;
use crate::geometry::part::PartModel;
use crate::geometry::point::{BoundingBox, Point3};

pub const SURFACE_SAMPLES: usize = 2000;
pub const DEFAULT_VOXEL_RESOLUTION: usize = 64;
/// Vertex weld tolerance of the watertightness check.
pub const MESH_WELD_TOLERANCE: f64 = 1e-5;
/// Minimum box extent of a valid face.
pub const VALID_MIN_EXTENT: f64 = 1e-6;
const GRID_INFLATION: f64 = 0.05;

/// Area-weighted uniform samples from a triangle soup.
pub fn sample_surface(mesh: &TriangleSoup, count: usize, rng: &mut impl Rng) -> Result<Vec<Point3>> {
    if mesh.is_empty() {
        return Err(GeoError::EmptyMesh);
    }
    let areas: Vec<f64> = mesh.triangles.iter().map(|t| t.area()).collect();
    let pick = WeightedIndex::new(&areas).map_err(|_| GeoError::EmptyMesh)?;
    Ok((0..count)
        .map(|_| {
            let t = &mesh.triangles[pick.sample(rng)];
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            t.a * (1.0 - s) + t.b * (s * (1.0 - r2)) + t.c * (s * r2)
        })
        .collect())
}

fn mean_nearest(from: &[Point3], to: &[Point3]) -> f64 {
    let sum: f64 = from
        .par_iter()
        .map(|p| to.iter().map(|q| p.distance_squared(*q)).fold(f64::INFINITY, f64::min).sqrt())
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    sum / from.len() as f64
}

/// Symmetric Chamfer distance: the average of both mean nearest-neighbour
/// distances.
pub fn chamfer(a: &[Point3], b: &[Point3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(GeoError::EmptySet);
    }
    Ok(0.5 * (mean_nearest(a, b) + mean_nearest(b, a)))
}

/// Chamfer distance between two parts' surfaces, each sampled with
/// [`SURFACE_SAMPLES`] points from a generator seeded by `seed`.
pub fn part_chamfer(a: &PartModel, b: &PartModel, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pa = sample_surface(&a.triangle_soup(), SURFACE_SAMPLES, &mut rng)?;
    let pb = sample_surface(&b.triangle_soup(), SURFACE_SAMPLES, &mut rng)?;
    chamfer(&pa, &pb)
}

/// Average, over the condition's designated contact faces, of the closest
/// approach of the generated faces touching it (of all generated faces when
/// none does).
pub fn proximity(gen: &PartModel, cond: &PartModel, tolerance: f64) -> Result<f64> {
    if gen.is_empty() {
        return Err(GeoError::EmptyModel);
    }
    if cond.contact_indices().is_empty() {
        return Err(GeoError::NoConditionContacts);
    }
    let gen_faces: Vec<&FaceGrid> = gen.grids().collect();
    let per_face: Vec<f64> = cond
        .contact_faces()
        .par_iter()
        .map(|c| {
            let surface = CondSurface::new(c);
            let touching: Vec<&&FaceGrid> =
                gen_faces.iter().filter(|g| faces_in_contact(g, c, tolerance).0).collect();
            let pool: Vec<&&FaceGrid> = if touching.is_empty() { gen_faces.iter().collect() } else { touching };
            pool.iter().map(|g| surface.witness(g.points()).distance).fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(per_face.iter().sum::<f64>() / per_face.len() as f64)
}

/// Triangle soup with vertices merged within a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct WeldedMesh {
    pub vertices: Vec<Point3>,
    /// Triangles that still have three distinct vertices after welding.
    pub triangles: Vec<[usize; 3]>,
}

/// Merges vertices closer than `tolerance` (first-seen vertex wins).
pub fn weld(mesh: &TriangleSoup, tolerance: f64) -> WeldedMesh {
    let cell = |p: Point3| -> [i64; 3] { std::array::from_fn(|k| (p[k] / tolerance).floor() as i64) };
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut find = |p: Point3| -> usize {
        let c = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        if let Some(&v) = list.iter().find(|&&v| vertices[v].distance(p) <= tolerance) {
                            return v;
                        }
                    }
                }
            }
        }
        vertices.push(p);
        buckets.entry(c).or_default().push(vertices.len() - 1);
        vertices.len() - 1
    };
    let mut triangles = Vec::with_capacity(mesh.len());
    for t in &mesh.triangles {
        let ids = [find(t.a), find(t.b), find(t.c)];
        if ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2] {
            triangles.push(ids);
        }
    }
    WeldedMesh { vertices, triangles }
}

impl WeldedMesh {
    /// Number of edges not shared by exactly two triangles.
    pub fn open_edges(&self) -> usize {
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c != 2).count()
    }
}

/// Closed-surface proxy: after welding, every edge borders exactly two
/// triangles.
pub fn is_watertight(part: &PartModel) -> bool {
    let soup = part.triangle_soup();
    !soup.is_empty() && weld(&soup, MESH_WELD_TOLERANCE).open_edges() == 0
}

/// Regular voxel grid over a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGrid {
    pub bounds: BoundingBox,
    pub resolution: usize,
}

impl VoxelGrid {
    fn step(&self, k: usize) -> f64 {
        self.bounds.dims()[k] / self.resolution as f64
    }

    fn center(&self, k: usize, i: usize) -> f64 {
        self.bounds.min_corner[k] + (i as f64 + 0.5) * self.step(k)
    }

    /// Inside flags in `x`-major order, by counting crossings of a vertical
    /// ray through each column. Column positions carry a tiny fixed offset
    /// so rays do not run exactly along mesh edges.
    pub fn occupancy(&self, mesh: &WeldedMesh) -> Vec<bool> {
        let n = self.resolution;
        let jitter = [self.step(0) * 1.234_567e-7, self.step(1) * 2.345_678e-7];
        let mut hits: Vec<Vec<f64>> = vec![Vec::new(); n * n];
        for t in &mesh.triangles {
            let [a, b, c] = t.map(|v| mesh.vertices[v]);
            let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
            if det == 0.0 {
                continue;
            }
            let lo = a.min(b).min(c);
            let hi = a.max(b).max(c);
            let range = |k: usize, l: f64, h: f64| {
                let s = self.step(k);
                let o = self.bounds.min_corner[k] + jitter[k];
                let i0 = ((l - o) / s - 0.5).ceil().max(0.0) as usize;
                let i1 = ((h - o) / s - 0.5).floor().min(n as f64 - 1.0);
                (i0, if i1 < 0.0 { None } else { Some(i1 as usize) })
            };
            let (ix0, ix1) = range(0, lo.x, hi.x);
            let (iy0, iy1) = range(1, lo.y, hi.y);
            let (Some(ix1), Some(iy1)) = (ix1, iy1) else { continue };
            for ix in ix0..=ix1 {
                let x = self.center(0, ix) + jitter[0];
                for iy in iy0..=iy1 {
                    let y = self.center(1, iy) + jitter[1];
                    let w1 = ((x - a.x) * (c.y - a.y) - (c.x - a.x) * (y - a.y)) / det;
                    let w2 = ((b.x - a.x) * (y - a.y) - (x - a.x) * (b.y - a.y)) / det;
                    let w0 = 1.0 - w1 - w2;
                    if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
                        hits[ix * n + iy].push(w0 * a.z + w1 * b.z + w2 * c.z);
                    }
                }
            }
        }
        let mut inside = vec![false; n * n * n];
        for (col, zs) in hits.iter_mut().enumerate() {
            zs.sort_by(f64::total_cmp);
            for iz in 0..n {
                let z = self.center(2, iz);
                let below = zs.partition_point(|&h| h < z);
                inside[col * n + iz] = below % 2 == 1;
            }
        }
        inside
    }
}

/// Percentage of the generated part's voxelized volume that lies inside
/// the condition part. Both parts must be closed.
pub fn intersection_volume(gen: &PartModel, cond: &PartModel, resolution: usize) -> Result<f64> {
    if resolution == 0 {
        return Err(GeoError::InvalidInput("voxel resolution must be positive".into()));
    }
    let gs = gen.triangle_soup();
    let cs = cond.triangle_soup();
    let gw = weld(&gs, MESH_WELD_TOLERANCE);
    let cw = weld(&cs, MESH_WELD_TOLERANCE);
    if gs.is_empty() || cs.is_empty() || gw.open_edges() != 0 || cw.open_edges() != 0 {
        return Err(GeoError::NotWatertight);
    }
    let joint = gen.bounding_box()?.union(&cond.bounding_box()?);
    let margin = joint.dims() * (0.5 * GRID_INFLATION);
    let bounds = BoundingBox::new(joint.min_corner - margin, joint.max_corner + margin)?;
    let grid = VoxelGrid { bounds, resolution };
    let (g, c) = rayon::join(|| grid.occupancy(&gw), || grid.occupancy(&cw));
    let gen_count = g.iter().filter(|&&v| v).count();
    if gen_count == 0 {
        return Err(GeoError::ZeroVolume);
    }
    let both = g.iter().zip(&c).filter(|(a, b)| **a && **b).count();
    Ok(100.0 * both as f64 / gen_count as f64)
}

/// Whether a face grid folds onto itself: two samples that are not grid
/// neighbours coincide within the weld tolerance.
pub fn has_self_contact(face: &FaceGrid) -> bool {
    let tol = WELD_TOLERANCE;
    let cell = |p: Point3| -> [i64; 3] { std::array::from_fn(|k| (p[k] / tol).floor() as i64) };
    let mut seen: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (idx, p) in face.points().iter().enumerate() {
        let c = cell(*p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = seen.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &other in list {
                            let (i, j) = (idx / GRID_RES, idx % GRID_RES);
                            let (oi, oj) = (other / GRID_RES, other % GRID_RES);
                            let adjacent = i.abs_diff(oi) <= 1 && j.abs_diff(oj) <= 1;
                            if !adjacent && face.points()[other].distance(*p) <= tol {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        seen.entry(c).or_default().push(idx);
    }
    false
}

/// Validity proxy: non-degenerate boxes, clean finite grids and a closed
/// welded surface.
pub fn is_valid(part: &PartModel) -> bool {
    if part.is_empty() {
        return false;
    }
    let faces_ok = part.faces().iter().all(|f| {
        let d = f.bbox.dims();
        (0..3).all(|k| d[k] > VALID_MIN_EXTENT)
            && f.grid.points().iter().all(|p| p.is_finite())
            && f.grid.validate(WELD_TOLERANCE).is_ok()
            && f.grid.normals().is_ok()
            && !has_self_contact(&f.grid)
    });
    faces_ok && is_watertight(part)
}

/// Fraction of valid parts; zero for an empty list.
pub fn valid_ratio(parts: &[PartModel]) -> f64 {
    if parts.is_empty() {
        return 0.0;
    }
    parts.iter().filter(|p| is_valid(p)).count() as f64 / parts.len() as f64
}

/// Metrics of one generated part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEval {
    pub sample_id: String,
    pub cd: f64,
    pub pr: f64,
    /// Absent when either part is not closed.
    pub iv: Option<f64>,
    pub valid: bool,
}

/// Aggregate metrics; distances are in normalized model units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cd: f64,
    pub pr: f64,
    /// Mean over samples where it is defined.
    pub iv: Option<f64>,
    pub iv_count: usize,
    pub vr: f64,
    pub samples: Vec<SampleEval>,
}

pub const CSV_HEADER: &str = "sample_id,cd,pr,iv,vr_flag";

impl EvalReport {
    /// Aggregates per-sample results, ordered by sample id.
    pub fn from_samples(mut samples: Vec<SampleEval>) -> Self {
        samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        let n = samples.len().max(1) as f64;
        let ivs: Vec<f64> = samples.iter().filter_map(|s| s.iv).collect();
        Self {
            cd: samples.iter().map(|s| s.cd).sum::<f64>() / n,
            pr: samples.iter().map(|s| s.pr).sum::<f64>() / n,
            iv: if ivs.is_empty() { None } else { Some(ivs.iter().sum::<f64>() / ivs.len() as f64) },
            iv_count: ivs.len(),
            vr: if samples.is_empty() { 0.0 } else { samples.iter().filter(|s| s.valid).count() as f64 / n },
            samples,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let iv = s.iv.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", s.sample_id, s.cd, s.pr, iv, u8::from(s.valid)));
        }
        out
    }
}

/// All metrics for one generated part against its reference target and
/// the condition it was generated for.
pub fn evaluate_sample(
    sample_id: &str,
    gen: &PartModel,
    reference: &PartModel,
    cond: &PartModel,
    tolerance: f64,
    seed: u64,
) -> Result<SampleEval> {
    let iv = match intersection_volume(gen, cond, DEFAULT_VOXEL_RESOLUTION) {
        Ok(v) => Some(v),
        Err(GeoError::NotWatertight | GeoError::ZeroVolume) => None,
        Err(e) => return Err(e),
    };
    Ok(SampleEval {
        sample_id: sample_id.to_string(),
        cd: part_chamfer(gen, reference, seed)?,
        pr: proximity(gen, cond, tolerance)?,
        iv,
        valid: is_valid(gen),
    })
}
