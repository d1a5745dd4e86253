use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::assignment::min_cost_permutation;
use crate::error::{GeoError, Result};
use crate::geometry::point::{BoundingBox, Point3};

/// Dims below this are clamped before computing aspect ratios.
pub const MIN_FEATURE_DIM: f64 = 1e-9;
pub const DEFAULT_FGW_TRADEOFF: f64 = 0.5;
pub const MAX_FW_ITERATIONS: usize = 200;
pub const FW_RELATIVE_TOL: f64 = 1e-8;

/// Normalized box centers and unit aspect-ratio vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxFeatures {
    pub centers: Vec<Point3>,
    pub ratios: Vec<Point3>,
}

impl BoxFeatures {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Pairwise center distances.
    pub fn distance_matrix(&self) -> Array2<f64> {
        let n = self.len();
        Array2::from_shape_fn((n, n), |(i, j)| self.centers[i].distance(self.centers[j]))
    }
}

/// Centers shifted to zero centroid and divided by their RMS distance to it;
/// ratios are the box dims scaled to unit length.
pub fn box_features(boxes: &[BoundingBox]) -> Result<BoxFeatures> {
    if boxes.is_empty() {
        return Err(GeoError::EmptySet);
    }
    let n = boxes.len() as f64;
    let raw: Vec<Point3> = boxes.iter().map(BoundingBox::center).collect();
    let centroid = raw.iter().fold(Point3::ZERO, |a, &c| a + c) * (1.0 / n);
    let rms = (raw.iter().map(|c| c.distance_squared(centroid)).sum::<f64>() / n).sqrt();
    let scale = if rms < 1e-12 { 1.0 } else { 1.0 / rms };
    let centers = raw.iter().map(|&c| (c - centroid) * scale).collect();
    let ratios = boxes
        .iter()
        .map(|b| {
            let d = b.dims();
            let d = Point3::new(d.x.max(MIN_FEATURE_DIM), d.y.max(MIN_FEATURE_DIM), d.z.max(MIN_FEATURE_DIM));
            d * (1.0 / d.norm())
        })
        .collect();
    Ok(BoxFeatures { centers, ratios })
}

/// One Frank–Wolfe iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwIterate {
    pub objective: f64,
    /// Largest absolute deviation of any row or column sum from its target.
    pub marginal_error: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgwResult {
    pub distance: f64,
    pub plan: Array2<f64>,
    /// Starts with the uniform plan.
    pub trace: Vec<FwIterate>,
}

/// Largest deviation of `plan` from uniform marginals.
pub fn marginal_error(plan: &Array2<f64>) -> f64 {
    let (n, m) = plan.dim();
    let rows = plan.rows().into_iter().map(|r| (r.sum() - 1.0 / n as f64).abs());
    let cols = plan.columns().into_iter().map(|c| (c.sum() - 1.0 / m as f64).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

struct Problem {
    a: Array2<f64>,
    b: Array2<f64>,
    feature_cost: Array2<f64>,
    const_c: Array2<f64>,
    tradeoff: f64,
}

impl Problem {
    fn new(fa: &BoxFeatures, fb: &BoxFeatures, tradeoff: f64) -> Self {
        let (n, m) = (fa.len(), fb.len());
        let a = fa.distance_matrix();
        let b = fb.distance_matrix();
        let feature_cost = Array2::from_shape_fn((n, m), |(i, j)| fa.ratios[i].distance_squared(fb.ratios[j]));
        let a2p: Vec<f64> = (0..n).map(|i| a.row(i).iter().map(|x| x * x).sum::<f64>() / n as f64).collect();
        let b2q: Vec<f64> = (0..m).map(|j| b.row(j).iter().map(|x| x * x).sum::<f64>() / m as f64).collect();
        let const_c = Array2::from_shape_fn((n, m), |(i, j)| a2p[i] + b2q[j]);
        Self { a, b, feature_cost, const_c, tradeoff }
    }

    fn atb(&self, t: &Array2<f64>) -> Array2<f64> {
        self.a.dot(t).dot(&self.b)
    }

    fn objective(&self, t: &Array2<f64>) -> f64 {
        let l = self.tradeoff;
        let gw = (&self.const_c - &(self.atb(t) * 2.0)) * t;
        (1.0 - l) * gw.sum() + l * (&self.feature_cost * t).sum()
    }

    fn gradient(&self, t: &Array2<f64>) -> Array2<f64> {
        let l = self.tradeoff;
        (&self.const_c - &(self.atb(t) * 2.0)) * (2.0 * (1.0 - l)) + &self.feature_cost * l
    }

    /// Coefficients of `f(T + τΔ) = f(T) + b τ + a τ²`.
    fn line_coefficients(&self, t: &Array2<f64>, delta: &Array2<f64>) -> (f64, f64) {
        let l = self.tradeoff;
        let inner = |x: &Array2<f64>, y: &Array2<f64>| (x * y).sum();
        let a = -2.0 * (1.0 - l) * inner(&self.atb(delta), delta);
        let b = (1.0 - l) * (inner(&self.const_c, delta) - 4.0 * inner(&self.atb(t), delta))
            + l * inner(&self.feature_cost, delta);
        (a, b)
    }
}

/// Exact minimizer of `a τ² + b τ` on `[0, 1]`.
fn quadratic_step(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else if a + b < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Fused Gromov–Wasserstein distance with uniform marginals, minimized by
/// Frank–Wolfe from the uniform plan with exact line search.
pub fn fgw_distance(fa: &BoxFeatures, fb: &BoxFeatures, tradeoff: f64) -> Result<FgwResult> {
    if fa.is_empty() || fb.is_empty() {
        return Err(GeoError::EmptySet);
    }
    if !(0.0..=1.0).contains(&tradeoff) {
        return Err(GeoError::InvalidInput(format!("fgw trade-off must lie in [0,1], got {tradeoff}")));
    }
    let (n, m) = (fa.len(), fb.len());
    let problem = Problem::new(fa, fb, tradeoff);
    let mut plan = Array2::from_elem((n, m), 1.0 / (n * m) as f64);
    let mut f = problem.objective(&plan);
    let mut trace = vec![FwIterate { objective: f, marginal_error: marginal_error(&plan), step: 0.0 }];
    for _ in 0..MAX_FW_ITERATIONS {
        let grad = problem.gradient(&plan);
        let vertex = linear_oracle(&grad)?;
        let delta = &vertex - &plan;
        let (a, b) = problem.line_coefficients(&plan, &delta);
        let tau = quadratic_step(a, b);
        if tau == 0.0 {
            break;
        }
        let candidate = &plan + &(&delta * tau);
        let f_new = problem.objective(&candidate);
        if f_new > f {
            // Rounding made the exact step worse; the plan is converged.
            break;
        }
        plan = candidate;
        let decrease = f - f_new;
        f = f_new;
        trace.push(FwIterate { objective: f, marginal_error: marginal_error(&plan), step: tau });
        if decrease <= FW_RELATIVE_TOL * f.abs() || f == 0.0 {
            break;
        }
    }
    Ok(FgwResult { distance: f, plan, trace })
}

/// Uniform-marginal transport plan minimizing `⟨cost, T⟩`.
pub fn linear_oracle(cost: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, m) = cost.dim();
    if n == m {
        let perm = min_cost_permutation(cost)?;
        let mut t = Array2::zeros((n, m));
        for (i, &j) in perm.iter().enumerate() {
            t[[i, j]] = 1.0 / n as f64;
        }
        return Ok(t);
    }
    let flow = transport_flow(cost)?;
    Ok(flow.mapv(|x| x as f64 / (n * m) as f64))
}

/// Min-cost transportation with integer supplies `m` per row and demands `n`
/// per column, by successive shortest paths (Bellman–Ford on the residual
/// bipartite graph, so negative costs are fine).
pub fn transport_flow(cost: &Array2<f64>) -> Result<Array2<u64>> {
    let (n, m) = cost.dim();
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(GeoError::InvalidCost);
    }
    let mut supply = vec![m as u64; n];
    let mut demand = vec![n as u64; m];
    let mut flow = Array2::<u64>::zeros((n, m));
    // Rounding can make zero-cost residual cycles look slightly negative.
    let slack = 1e-12 * cost.iter().fold(1.0_f64, |a, c| a.max(c.abs()));
    // Node ids: rows 0..n, columns n..n+m.
    let nodes = n + m;
    loop {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut pred = vec![usize::MAX; nodes];
        for i in 0..n {
            if supply[i] > 0 {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..n {
                for j in 0..m {
                    let (ri, cj) = (i, n + j);
                    if dist[ri].is_finite() && dist[ri] + cost[[i, j]] < dist[cj] - slack {
                        dist[cj] = dist[ri] + cost[[i, j]];
                        pred[cj] = ri;
                        changed = true;
                    }
                    if flow[[i, j]] > 0 && dist[cj].is_finite() && dist[cj] - cost[[i, j]] < dist[ri] - slack {
                        dist[ri] = dist[cj] - cost[[i, j]];
                        pred[ri] = cj;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let Some(sink) = (0..m)
            .filter(|&j| demand[j] > 0 && dist[n + j].is_finite())
            .min_by(|&x, &y| dist[n + x].total_cmp(&dist[n + y]).then(x.cmp(&y)))
        else {
            break;
        };
        let mut path = vec![n + sink];
        let mut node = n + sink;
        while pred[node] != usize::MAX {
            node = pred[node];
            path.push(node);
            if path.len() > nodes + 1 {
                return Err(GeoError::Infeasible("negative cycle in transport residual graph".into()));
            }
        }
        path.reverse();
        let source = path[0];
        let mut amount = supply[source].min(demand[sink]);
        for w in path.windows(2) {
            if w[0] >= n {
                amount = amount.min(flow[[w[1], w[0] - n]]);
            }
        }
        for w in path.windows(2) {
            if w[0] < n {
                flow[[w[0], w[1] - n]] += amount;
            } else {
                flow[[w[1], w[0] - n]] -= amount;
            }
        }
        supply[source] -= amount;
        demand[sink] -= amount;
    }
    if supply.iter().any(|&s| s > 0) {
        return Err(GeoError::Infeasible("transport flow did not saturate supplies".into()));
    }
    Ok(flow)
}

/// FGW regularizer between a candidate box set and a reference box set.
pub fn d_reg(candidate: &[BoundingBox], reference: &[BoundingBox], tradeoff: f64) -> Result<f64> {
    Ok(fgw_distance(&box_features(candidate)?, &box_features(reference)?, tradeoff)?.distance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_at(x: f64, y: f64, z: f64) -> BoundingBox {
        BoundingBox::try_from([x - 0.5, y - 0.5, z - 0.5, x + 0.5, y + 0.5, z + 0.5]).unwrap()
    }

    #[test]
    fn single_cube_features() {
        let f = box_features(&[cube_at(4.0, -2.0, 7.0)]).unwrap();
        assert_eq!(f.centers, vec![Point3::ZERO]);
        let r = 1.0 / 3f64.sqrt();
        assert!(f.ratios[0].distance(Point3::splat(r)) < 1e-15);
    }

    #[test]
    fn two_cube_centers() {
        let f = box_features(&[cube_at(0.0, 0.0, 0.0), cube_at(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(f.centers, vec![Point3::new(-1.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]);
    }

    #[test]
    fn singleton_feature_distance() {
        let fa = BoxFeatures { centers: vec![Point3::ZERO], ratios: vec![Point3::new(1.0, 0.0, 0.0)] };
        let fb = BoxFeatures { centers: vec![Point3::ZERO], ratios: vec![Point3::new(0.0, 1.0, 0.0)] };
        assert_eq!(fgw_distance(&fa, &fb, 1.0).unwrap().distance, 2.0);
    }

    #[test]
    fn rectangular_flow_has_uniform_marginals() {
        let cost = Array2::from_shape_fn((3, 5), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let t = linear_oracle(&cost).unwrap();
        assert!(marginal_error(&t) < 1e-15);
    }

    #[test]
    fn empty_set_is_rejected() {
        assert_eq!(box_features(&[]).unwrap_err().to_string(), "empty-set");
    }
}
