use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::face::{BoundaryEdge, FaceGrid};
use crate::geometry::mesh::FaceMesh;
use crate::geometry::point::Point3;

/// A one-to-one matching between rows and columns of a cost matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Assignment {
    /// Column matched to `row`, if any.
    pub fn col_for(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

fn check_costs(costs: &Array2<f64>) -> Result<()> {
    if costs.nrows() == 0 || costs.ncols() == 0 {
        return Err(GeoError::InvalidInput("cost matrix must be at least 1×1".into()));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(GeoError::InvalidCost);
    }
    Ok(())
}

/// Square copy of `costs`, padded with a constant above every entry.
fn padded_square(costs: &Array2<f64>) -> Array2<f64> {
    let (m, n) = costs.dim();
    let k = m.max(n);
    if m == n {
        return costs.clone();
    }
    let max = costs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let pad = max.abs() + 1.0 + max;
    Array2::from_shape_fn((k, k), |(i, j)| if i < m && j < n { costs[[i, j]] } else { pad })
}

/// Minimum-cost perfect matching on a square matrix by shortest augmenting
/// paths with dual potentials. Returns `col_of_row`.
fn solve_square(c: &Array2<f64>) -> Vec<usize> {
    let n = c.nrows();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // row_of[j] for j in 1..=n is the 1-based row matched to column j.
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

fn matching_cost(c: &Array2<f64>, col_of: &[usize]) -> f64 {
    col_of.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum()
}

/// Minimum-cost matching of a square matrix; any optimum, no tie-break.
/// Cheaper than [`hungarian`] for large inputs.
pub fn min_cost_permutation(costs: &Array2<f64>) -> Result<Vec<usize>> {
    check_costs(costs)?;
    if costs.nrows() != costs.ncols() {
        return Err(GeoError::ShapeMismatch("permutation solver needs a square matrix".into()));
    }
    Ok(solve_square(costs))
}

/// Minimum-cost one-to-one matching of size `min(m, n)`.
///
/// Among optimal matchings the lexicographically smallest column sequence
/// (by ascending row) is returned, so results do not depend on the order the
/// solver happens to explore ties in.
pub fn hungarian(costs: &Array2<f64>) -> Result<Assignment> {
    check_costs(costs)?;
    let (m, n) = costs.dim();
    let sq = padded_square(costs);
    let k = sq.nrows();
    let optimum = matching_cost(&sq, &solve_square(&sq));
    let scale = sq.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = 1e-12 * (1.0 + scale) * k as f64;

    // Greedy: fix the smallest column per row that still admits an optimal
    // completion of the remaining rows and columns.
    let mut fixed: Vec<usize> = Vec::with_capacity(k);
    let mut fixed_cost = 0.0;
    let mut free_cols: Vec<usize> = (0..k).collect();
    for row in 0..k {
        let rest_rows: Vec<usize> = (row + 1..k).collect();
        let mut chosen = None;
        for (pos, &col) in free_cols.iter().enumerate() {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != col).collect();
            let rest_cost = if rest_rows.is_empty() {
                0.0
            } else {
                let sub = Array2::from_shape_fn((rest_rows.len(), rest_cols.len()), |(a, b)| {
                    sq[[rest_rows[a], rest_cols[b]]]
                });
                matching_cost(&sub, &solve_square(&sub))
            };
            if fixed_cost + sq[[row, col]] + rest_cost <= optimum + tol {
                chosen = Some(pos);
                break;
            }
        }
        // Rounding can reject every column; fall back to the best completion.
        let pos = chosen.unwrap_or_else(|| {
            let mut best = (f64::INFINITY, 0);
            for (pos, &col) in free_cols.iter().enumerate() {
                let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != col).collect();
                let sub = Array2::from_shape_fn((rest_rows.len(), rest_cols.len()), |(a, b)| {
                    sq[[rest_rows[a], rest_cols[b]]]
                });
                let total = sq[[row, col]] + if rest_rows.is_empty() { 0.0 } else { matching_cost(&sub, &solve_square(&sub)) };
                if total < best.0 {
                    best = (total, pos);
                }
            }
            best.1
        });
        let col = free_cols.remove(pos);
        fixed_cost += sq[[row, col]];
        fixed.push(col);
    }

    let pairs: Vec<(usize, usize)> =
        fixed.iter().enumerate().filter(|&(i, &j)| i < m && j < n).map(|(i, &j)| (i, j)).collect();
    let total_cost = pairs.iter().map(|&(i, j)| costs[[i, j]]).sum();
    Ok(Assignment { pairs, total_cost })
}

/// Mean distance from the samples of each generated face to each condition
/// face's triangulation.
pub fn face_cost_matrix(gen: &[&FaceGrid], cond: &[&FaceGrid]) -> Result<Array2<f64>> {
    if gen.is_empty() || cond.is_empty() {
        return Err(GeoError::EmptySet);
    }
    let meshes: Vec<FaceMesh> = cond.iter().map(|f| FaceMesh::new(f)).collect();
    Ok(Array2::from_shape_fn((gen.len(), cond.len()), |(i, j)| {
        let pts = gen[i].points();
        pts.iter().map(|&p| meshes[j].distance(p)).sum::<f64>() / pts.len() as f64
    }))
}

/// Hungarian matching of generated faces to condition faces by mean
/// point-to-mesh distance.
pub fn face_match(gen: &[&FaceGrid], cond: &[&FaceGrid]) -> Result<Assignment> {
    hungarian(&face_cost_matrix(gen, cond)?)
}

/// Symmetric Chamfer distance between two point sets.
pub fn point_set_chamfer(a: &[Point3], b: &[Point3]) -> f64 {
    let one_way = |x: &[Point3], y: &[Point3]| {
        x.iter()
            .map(|p| y.iter().map(|q| p.distance_squared(*q)).fold(f64::INFINITY, f64::min).sqrt())
            .sum::<f64>()
            / x.len() as f64
    };
    0.5 * (one_way(a, b) + one_way(b, a))
}

pub fn edge_cost_matrix(gen: &FaceGrid, cond: &FaceGrid) -> Array2<f64> {
    let ge = gen.boundary_edges();
    let ce = cond.boundary_edges();
    Array2::from_shape_fn((4, 4), |(i, j)| point_set_chamfer(&ge[i].samples, &ce[j].samples))
}

/// Matches the four boundary edges of a generated face to those of a
/// condition face by Chamfer distance.
pub fn edge_match(gen: &FaceGrid, cond: &FaceGrid) -> Assignment {
    hungarian(&edge_cost_matrix(gen, cond)).expect("edge costs are finite for valid faces")
}

/// Matched edge pairs as `(gen edge, cond edge)` polylines.
pub fn matched_edges(gen: &FaceGrid, cond: &FaceGrid, assignment: &Assignment) -> Vec<(BoundaryEdge, BoundaryEdge)> {
    let ge = gen.boundary_edges();
    let ce = cond.boundary_edges();
    assignment.pairs.iter().map(|&(i, j)| (ge[i].clone(), ce[j].clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::face::FaceKind;
    use ndarray::array;

    fn plane(z: f64) -> FaceGrid {
        FaceGrid::from_fn(FaceKind::Planar, 1, |u, v| Point3::new(u, v, z)).unwrap()
    }

    #[test]
    fn small_examples() {
        let a = hungarian(&array![[7.0]]).unwrap();
        assert_eq!((a.pairs, a.total_cost), (vec![(0, 0)], 7.0));
        let a = hungarian(&array![[0.0, 9.0, 9.0], [9.0, 0.0, 9.0], [9.0, 9.0, 0.0]]).unwrap();
        assert_eq!((a.pairs, a.total_cost), (vec![(0, 0), (1, 1), (2, 2)], 0.0));
    }

    #[test]
    fn rejects_non_finite() {
        let e = hungarian(&array![[1.0, f64::NAN]]).unwrap_err();
        assert_eq!(e.to_string(), "invalid-cost");
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let a = hungarian(&Array2::from_elem((3, 3), 1.0)).unwrap();
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        let a = hungarian(&array![[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_eq!(a.pairs, vec![(0, 0), (2, 1)]);
    }

    #[test]
    fn rectangular_keeps_min_side() {
        let a = hungarian(&array![[5.0, 1.0], [1.0, 5.0], [0.5, 0.5]]).unwrap();
        assert_eq!(a.pairs, vec![(0, 1), (2, 0)]);
        assert_eq!(a.total_cost, 1.5);
        let a = hungarian(&array![[5.0, 1.0, 3.0]]).unwrap();
        assert_eq!(a.pairs, vec![(0, 1)]);
    }

    #[test]
    fn parallel_planes_match_nearest() {
        let gen = [plane(0.0), plane(1.0)];
        let cond = [plane(0.9), plane(0.1)];
        let g: Vec<&FaceGrid> = gen.iter().collect();
        let c: Vec<&FaceGrid> = cond.iter().collect();
        let costs = face_cost_matrix(&g, &c).unwrap();
        assert!((costs[[0, 1]] - 0.1).abs() < 1e-12 && (costs[[0, 0]] - 0.9).abs() < 1e-12);
        assert_eq!(face_match(&g, &c).unwrap().pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn identical_faces_match_edges_identically() {
        let f = plane(0.0);
        let a = edge_match(&f, &f);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(a.total_cost, 0.0);
    }
}
