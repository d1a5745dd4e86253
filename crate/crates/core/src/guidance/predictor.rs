use serde::{Deserialize, Serialize};

use super::config::GuidanceConfig;
use super::costs::{c_shape, c_shape_gradient, CondSurface, PositionWitness, ShapeWeights};
use super::decode::decode_rows;
use crate::assignment::{edge_match, face_match};
use crate::diffusion::BoxSet;
use crate::error::{GeoError, Result};
use crate::geometry::face::{BoundaryEdge, FaceGrid, EDGE_SAMPLES, GRID_RES};
use crate::geometry::part::PartModel;
use crate::geometry::point::Point3;

const LAST: usize = GRID_RES - 1;
/// Distinct boundary samples of a face grid.
pub const BOUNDARY_SAMPLES: usize = 4 * LAST;
/// Step-size halvings tried before an optimizer iteration gives up.
pub const MAX_HALVINGS: usize = 30;
const STALL_TOLERANCE: f64 = 1e-12;

/// Position in the boundary ring of a border cell: first row, last row,
/// then the interiors of the first and last columns.
pub fn boundary_slot(i: usize, j: usize) -> Option<usize> {
    match (i, j) {
        (0, _) => Some(j),
        (LAST, _) => Some(GRID_RES + j),
        (_, 0) => Some(2 * GRID_RES + i - 1),
        (_, LAST) => Some(2 * GRID_RES + LAST - 1 + i - 1),
        _ => None,
    }
}

/// Grid cell of sample `k` of boundary edge `edge` (ordered as
/// [`FaceGrid::boundary_edges`]).
pub fn edge_cell(edge: usize, k: usize) -> (usize, usize) {
    match edge {
        0 => (0, k),
        1 => (LAST, k),
        2 => (k, 0),
        _ => (k, LAST),
    }
}

/// Free variables of one face: a rigid translation plus a displacement of
/// every boundary sample. Interior samples follow the boundary through a
/// bilinearly blended (Coons) patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceOptimVariables {
    pub translation: Point3,
    /// Indexed by [`boundary_slot`].
    pub boundary: Vec<Point3>,
}

impl Default for FaceOptimVariables {
    fn default() -> Self {
        Self { translation: Point3::ZERO, boundary: vec![Point3::ZERO; BOUNDARY_SAMPLES] }
    }
}

impl FaceOptimVariables {
    pub fn edge_displacement(&self, edge: usize, k: usize) -> Point3 {
        let (i, j) = edge_cell(edge, k);
        self.boundary[boundary_slot(i, j).expect("edge cells lie on the border")]
    }

    pub fn is_zero(&self) -> bool {
        self.translation == Point3::ZERO && self.boundary.iter().all(|p| *p == Point3::ZERO)
    }

    pub fn norm_squared(&self) -> f64 {
        self.translation.norm_squared() + self.boundary.iter().map(|p| p.norm_squared()).sum::<f64>()
    }

    /// Boundary displacement carried into cell `(i, j)`; exact on the border.
    pub fn displacement_at(&self, i: usize, j: usize) -> Point3 {
        if let Some(s) = boundary_slot(i, j) {
            return self.boundary[s];
        }
        let r = |a: usize, b: usize| self.boundary[boundary_slot(a, b).expect("border cell")];
        let u = i as f64 / LAST as f64;
        let v = j as f64 / LAST as f64;
        let edges = r(0, j) * (1.0 - u) + r(LAST, j) * u + r(i, 0) * (1.0 - v) + r(i, LAST) * v;
        let corners = r(0, 0) * ((1.0 - u) * (1.0 - v))
            + r(LAST, 0) * (u * (1.0 - v))
            + r(0, LAST) * ((1.0 - u) * v)
            + r(LAST, LAST) * (u * v);
        edges - corners
    }

    pub fn apply(&self, base: &FaceGrid) -> Result<FaceGrid> {
        let mut points = Vec::with_capacity(GRID_RES * GRID_RES);
        for i in 0..GRID_RES {
            for j in 0..GRID_RES {
                points.push(base.point(i, j) + self.translation + self.displacement_at(i, j));
            }
        }
        FaceGrid::new(points, base.kind, base.orientation)
    }

    /// `self − step·grad`
    fn stepped(&self, step: f64, grad: &FaceOptimVariables) -> Self {
        Self {
            translation: self.translation - grad.translation * step,
            boundary: self.boundary.iter().zip(&grad.boundary).map(|(p, g)| *p - *g * step).collect(),
        }
    }
}

/// The face-alignment objective of one matched (generated, condition) pair.
#[derive(Debug, Clone)]
pub struct PairObjective {
    pub base: FaceGrid,
    cond: CondSurface,
    /// `(generated edge index, condition edge)`; condition edges are
    /// reversed where needed so both run the same way.
    pub edges: Vec<(usize, BoundaryEdge)>,
    pub position_weight: f64,
    pub shape_weight: f64,
    pub shape: ShapeWeights,
}

/// Value of a [`PairObjective`] at some variables, with what the gradient
/// needs.
#[derive(Debug, Clone)]
pub struct PairEvaluation {
    pub cost: f64,
    pub face: FaceGrid,
    pub witness: Option<PositionWitness>,
}

fn aligned(gen: &BoundaryEdge, cond: &BoundaryEdge) -> BoundaryEdge {
    let (g0, g1) = (gen.samples[0], gen.samples[EDGE_SAMPLES - 1]);
    let (c0, c1) = (cond.samples[0], cond.samples[EDGE_SAMPLES - 1]);
    if g0.distance(c0) + g1.distance(c1) > g0.distance(c1) + g1.distance(c0) {
        cond.reversed()
    } else {
        cond.clone()
    }
}

impl PairObjective {
    pub fn new(base: FaceGrid, cond: &FaceGrid, weights: (f64, f64), shape: ShapeWeights) -> Self {
        let assignment = edge_match(&base, cond);
        let ge = base.boundary_edges();
        let ce = cond.boundary_edges();
        let edges = assignment.pairs.iter().map(|&(g, c)| (g, aligned(&ge[g], &ce[c]))).collect();
        Self { base, cond: CondSurface::new(cond), edges, position_weight: weights.0, shape_weight: weights.1, shape }
    }

    pub fn evaluate(&self, vars: &FaceOptimVariables) -> Result<PairEvaluation> {
        let face = vars.apply(&self.base)?;
        let mut cost = 0.0;
        let mut witness = None;
        if self.position_weight != 0.0 {
            let w = self.cond.witness(face.points());
            cost += self.position_weight * w.distance;
            witness = Some(w);
        }
        if self.shape_weight != 0.0 {
            let ge = face.boundary_edges();
            let pairs: Vec<(BoundaryEdge, BoundaryEdge)> =
                self.edges.iter().map(|(g, c)| (ge[*g].clone(), c.clone())).collect();
            cost += self.shape_weight * c_shape(&pairs, self.shape)?;
        }
        Ok(PairEvaluation { cost, face, witness })
    }

    /// Gradient at an evaluated point. The position term moves only the
    /// translation, through the currently closest sample.
    pub fn gradient(&self, eval: &PairEvaluation) -> Result<FaceOptimVariables> {
        let mut g = FaceOptimVariables::default();
        if let Some(w) = &eval.witness {
            g.translation += w.translation_gradient() * self.position_weight;
        }
        if self.shape_weight != 0.0 {
            let ge = eval.face.boundary_edges();
            for (k, c) in &self.edges {
                let grad = c_shape_gradient(&ge[*k], c, self.shape)?;
                for (s, d) in grad.iter().enumerate() {
                    let (i, j) = edge_cell(*k, s);
                    let d = *d * self.shape_weight;
                    g.boundary[boundary_slot(i, j).expect("edge cells lie on the border")] += d;
                    g.translation += d;
                }
            }
        }
        Ok(g)
    }
}

/// Result of optimizing one pair.
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub variables: FaceOptimVariables,
    pub face: FaceGrid,
    /// Objective after every accepted iterate, starting value first.
    pub objective: Vec<f64>,
}

/// Gradient descent with step halving: a step is accepted only if it does
/// not raise the objective; after [`MAX_HALVINGS`] failed halvings, or when
/// progress stalls, the run stops.
pub fn optimize_pair(problem: &PairObjective, steps: usize, learning_rate: f64) -> Result<PairOutcome> {
    let mut vars = FaceOptimVariables::default();
    let mut eval = problem.evaluate(&vars)?;
    let mut objective = vec![eval.cost];
    for _ in 0..steps {
        if eval.cost == 0.0 {
            break;
        }
        let grad = problem.gradient(&eval)?;
        if grad.norm_squared() == 0.0 {
            break;
        }
        let mut step = learning_rate;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = vars.stepped(step, &grad);
            if let Ok(e) = problem.evaluate(&trial) {
                if e.cost <= eval.cost {
                    accepted = Some((trial, e));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, next_eval)) = accepted else { break };
        let gain = eval.cost - next_eval.cost;
        vars = next;
        eval = next_eval;
        objective.push(eval.cost);
        if gain <= STALL_TOLERANCE * eval.cost.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(PairOutcome { variables: vars, face: eval.face, objective })
}

/// Optimized contact faces and the box set rebuilt from them.
#[derive(Debug, Clone)]
pub struct GuidingSample {
    /// The input state with every optimized slot replaced.
    pub boxes: BoxSet,
    /// Boxes of the optimized faces alone, in pair order; candidates are
    /// scored against these.
    pub guide: BoxSet,
    pub optimized_faces: Vec<FaceGrid>,
    /// `(generated slot, condition face index)` per optimized face.
    pub pairs: Vec<(usize, usize)>,
    pub variables: Vec<FaceOptimVariables>,
    pub objective_traces: Vec<Vec<f64>>,
    pub cost_before: f64,
    pub cost_after: f64,
}

impl GuidingSample {
    fn identity(state: &BoxSet) -> Self {
        Self {
            boxes: state.clone(),
            guide: state.clone(),
            optimized_faces: vec![],
            pairs: vec![],
            variables: vec![],
            objective_traces: vec![],
            cost_before: 0.0,
            cost_after: 0.0,
        }
    }
}

/// Shifts each side of a raw box row by how far the face's tight box moved
/// on that side.
fn shifted_row(state: &BoxSet, row: usize, before: &FaceGrid, after: &FaceGrid) -> [f64; 6] {
    let b0 = before.tight_bounding_box();
    let b1 = after.tight_bounding_box();
    let dmin = b1.min_corner - b0.min_corner;
    let dmax = b1.max_corner - b0.max_corner;
    let mut r = state.row(row);
    for a in 0..3 {
        if r[a] <= r[a + 3] {
            r[a] += dmin[a];
            r[a + 3] += dmax[a];
        } else {
            r[a] += dmax[a];
            r[a + 3] += dmin[a];
        }
    }
    r
}

/// Guiding sample at reverse step `t` of `total_steps`: decode the contact
/// slots, match them to the condition's contact faces, pull each matched
/// face onto its partner and rebuild the boxes. Unmatched slots and
/// non-contact faces are left as they are.
pub fn predict_guiding_sample(
    state: &BoxSet,
    cond: &PartModel,
    t: usize,
    total_steps: usize,
    config: &GuidanceConfig,
) -> Result<GuidingSample> {
    if cond.contact_indices().is_empty() {
        return Err(GeoError::NoConditionContacts);
    }
    let (wp, ws) = config.weights(t, total_steps);
    let slots = state.contact_slots();
    if (wp == 0.0 && ws == 0.0) || slots.is_empty() {
        return Ok(GuidingSample::identity(state));
    }
    let gen = decode_rows(state, &slots)?;
    let cond_faces = cond.contact_faces();
    let gen_refs: Vec<&FaceGrid> = gen.iter().collect();
    let matching = face_match(&gen_refs, &cond_faces)?;
    let shape = ShapeWeights { length: config.length_weight, angle: config.angle_weight };

    let mut out = GuidingSample::identity(state);
    let mut boxes = state.boxes.clone();
    let mut guide_rows = Vec::new();
    for &(gi, ci) in &matching.pairs {
        let problem = PairObjective::new(gen[gi].clone(), cond_faces[ci], (wp, ws), shape);
        let res = optimize_pair(&problem, config.optimizer_steps, config.learning_rate)?;
        let slot = slots[gi];
        let row = shifted_row(state, slot, &gen[gi], &res.face);
        for (k, v) in row.into_iter().enumerate() {
            boxes[[slot, k]] = v;
        }
        guide_rows.extend(row);
        out.cost_before += res.objective[0];
        out.cost_after += *res.objective.last().expect("objective starts non-empty");
        out.pairs.push((slot, cond.contact_indices()[ci]));
        out.optimized_faces.push(res.face);
        out.variables.push(res.variables);
        out.objective_traces.push(res.objective);
    }
    out.boxes = state.with_boxes(boxes);
    if !out.pairs.is_empty() {
        let n = out.pairs.len();
        let rows = ndarray::Array2::from_shape_vec((n, 6), guide_rows).map_err(|e| GeoError::ShapeMismatch(e.to_string()))?;
        out.guide = BoxSet::new(rows, vec![true; n])?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::face::FaceKind;

    fn square(z: f64) -> FaceGrid {
        FaceGrid::from_fn(FaceKind::Planar, 1, |u, v| Point3::new(u, v, z)).unwrap()
    }

    #[test]
    fn ring_covers_border_once() {
        let mut seen = vec![0; BOUNDARY_SAMPLES];
        for i in 0..GRID_RES {
            for j in 0..GRID_RES {
                if let Some(s) = boundary_slot(i, j) {
                    seen[s] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn interior_follows_boundary() {
        let mut v = FaceOptimVariables::default();
        for p in &mut v.boundary {
            *p = Point3::new(0.0, 0.0, 2.0);
        }
        let f = v.apply(&square(0.0)).unwrap();
        assert!(f.points().iter().all(|p| (p.z - 2.0).abs() < 1e-12));
    }

    #[test]
    fn offset_plane_moves_onto_partner() {
        let p = PairObjective::new(square(0.5), &square(0.0), (1.0, 0.0), ShapeWeights { length: 1.0, angle: 0.0 });
        let r = optimize_pair(&p, 200, 0.05).unwrap();
        assert!((r.variables.translation.z + 0.5).abs() < 1e-3);
        assert!(*r.objective.last().unwrap() < 1e-6);
        assert!(r.objective.windows(2).all(|w| w[1] <= w[0]));
    }
}
