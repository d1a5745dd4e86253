use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contact::{label_contacts, ContactReport, DEFAULT_CONTACT_TOLERANCE};
use crate::error::{GeoError, Result};
use crate::geometry::face::{FaceGrid, FaceKind};
use crate::geometry::part::PartModel;
use crate::geometry::point::Point3;

/// Half-extent the condition part is scaled to.
pub const NORMALIZED_HALF_EXTENT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    PegSocket,
    FlangeRing,
    BracketPlate,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::PegSocket, Family::FlangeRing, Family::BracketPlate];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::PegSocket => "peg_socket",
            Family::FlangeRing => "flange_ring",
            Family::BracketPlate => "bracket_plate",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| GeoError::InvalidInput(format!("unknown family {s:?}")))
    }
}

/// A condition part, a target part that mates with it, and the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblySample {
    pub family: Family,
    pub condition: PartModel,
    pub target: PartModel,
    pub prompt: String,
    /// Pairs are `(condition face, target face)`.
    pub contacts: ContactReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PegSocketParams {
    pub hole_radius: f64,
    pub clearance: f64,
    pub peg_wall: f64,
    pub peg_bottom: f64,
    pub peg_top: f64,
}

impl Default for PegSocketParams {
    fn default() -> Self {
        Self { hole_radius: 1.5, clearance: 0.05, peg_wall: 0.5, peg_bottom: -2.0, peg_top: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlangeRingParams {
    pub hub_radius: f64,
    pub bore_radius: f64,
    pub shoulder_height: f64,
    pub radial_clearance: f64,
    pub seat_gap: f64,
    pub ring_outer: f64,
    pub ring_height: f64,
}

impl Default for FlangeRingParams {
    fn default() -> Self {
        Self {
            hub_radius: 1.6,
            bore_radius: 0.8,
            shoulder_height: -0.5,
            radial_clearance: 0.05,
            seat_gap: 0.03,
            ring_outer: 2.6,
            ring_height: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketPlateParams {
    pub strips: usize,
    pub width: f64,
    pub thickness: f64,
    pub block_x: (f64, f64),
    pub block_y: (f64, f64),
    pub block_height: f64,
    pub gap: f64,
}

impl Default for BracketPlateParams {
    fn default() -> Self {
        Self { strips: 3, width: 3.0, thickness: 0.8, block_x: (-1.5, 1.5), block_y: (-1.0, 1.0), block_height: 1.5, gap: 0.04 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    PegSocket(PegSocketParams),
    FlangeRing(FlangeRingParams),
    BracketPlate(BracketPlateParams),
}

impl FamilyParams {
    pub fn family(&self) -> Family {
        match self {
            FamilyParams::PegSocket(_) => Family::PegSocket,
            FamilyParams::FlangeRing(_) => Family::FlangeRing,
            FamilyParams::BracketPlate(_) => Family::BracketPlate,
        }
    }

    pub fn default_for(family: Family) -> Self {
        match family {
            Family::PegSocket => FamilyParams::PegSocket(PegSocketParams::default()),
            Family::FlangeRing => FamilyParams::FlangeRing(FlangeRingParams::default()),
            Family::BracketPlate => FamilyParams::BracketPlate(BracketPlateParams::default()),
        }
    }

    /// Random parameters whose contact clearances stay within the default
    /// tolerance.
    pub fn random(family: Family, rng: &mut impl Rng) -> Self {
        match family {
            Family::PegSocket => FamilyParams::PegSocket(PegSocketParams {
                hole_radius: rng.random_range(1.0..2.0),
                clearance: rng.random_range(0.01..0.08),
                peg_wall: rng.random_range(0.3..0.6),
                peg_bottom: rng.random_range(-2.5..-1.0),
                peg_top: rng.random_range(3.5..4.5),
            }),
            Family::FlangeRing => {
                let hub_radius = rng.random_range(1.2..2.0);
                FamilyParams::FlangeRing(FlangeRingParams {
                    hub_radius,
                    bore_radius: rng.random_range(0.5..hub_radius - 0.4),
                    shoulder_height: rng.random_range(-1.5..0.5),
                    radial_clearance: if rng.random_bool(0.5) { rng.random_range(0.01..0.08) } else { rng.random_range(0.2..0.4) },
                    seat_gap: rng.random_range(0.0..0.08),
                    ring_outer: rng.random_range(hub_radius + 0.6..2.9),
                    ring_height: rng.random_range(0.5..1.5),
                })
            }
            Family::BracketPlate => {
                let x0 = rng.random_range(-2.5..0.0);
                let y0 = rng.random_range(-1.0..0.0);
                FamilyParams::BracketPlate(BracketPlateParams {
                    strips: rng.random_range(2..=4),
                    width: rng.random_range(2.5..4.0),
                    thickness: rng.random_range(0.5..1.0),
                    block_x: (x0, x0 + rng.random_range(1.0..2.5)),
                    block_y: (y0, y0 + rng.random_range(0.5..1.0)),
                    block_height: rng.random_range(0.8..2.0),
                    gap: rng.random_range(0.0..0.08),
                })
            }
        }
    }
}

/// Half of a cylinder of `radius` about the z axis: angles
/// `theta0..theta0+π`, heights `z0..z1`. `orient = +1` gives outward normals.
pub fn half_cylinder(radius: f64, theta0: f64, z0: f64, z1: f64, orient: i8) -> Result<FaceGrid> {
    FaceGrid::from_fn(FaceKind::HalfCylinder, orient, |u, v| {
        let th = theta0 + PI * u;
        Point3::new(radius * th.cos(), radius * th.sin(), z0 + (z1 - z0) * v)
    })
}

/// Half of a flat annulus at height `z`. `orient = +1` gives a `+z` normal.
pub fn half_annulus(r_in: f64, r_out: f64, theta0: f64, z: f64, orient: i8) -> Result<FaceGrid> {
    FaceGrid::from_fn(FaceKind::Planar, orient, |u, v| {
        let th = theta0 + PI * v;
        let r = r_in + (r_out - r_in) * u;
        Point3::new(r * th.cos(), r * th.sin(), z)
    })
}

/// Closed tube between radii `r_in < r_out` and heights `z0 < z1` as eight
/// four-sided faces: outer halves, inner halves, top halves, bottom halves.
fn tube(r_in: f64, r_out: f64, z0: f64, z1: f64, theta0: f64) -> Result<Vec<FaceGrid>> {
    Ok(vec![
        half_cylinder(r_out, theta0, z0, z1, 1)?,
        half_cylinder(r_out, theta0 + PI, z0, z1, 1)?,
        half_cylinder(r_in, theta0, z0, z1, -1)?,
        half_cylinder(r_in, theta0 + PI, z0, z1, -1)?,
        half_annulus(r_in, r_out, theta0, z1, 1)?,
        half_annulus(r_in, r_out, theta0 + PI, z1, 1)?,
        half_annulus(r_in, r_out, theta0, z0, -1)?,
        half_annulus(r_in, r_out, theta0 + PI, z0, -1)?,
    ])
}

/// Axis-aligned rectangle: `origin + u·du + v·dv`, normal sign `orient`
/// relative to `du × dv`.
fn rect(origin: Point3, du: Point3, dv: Point3, orient: i8) -> Result<FaceGrid> {
    FaceGrid::from_fn(FaceKind::Planar, orient, |u, v| origin + du * u + dv * v)
}

/// Six outward-facing rectangles of an axis-aligned box.
fn box_faces(lo: Point3, hi: Point3) -> Result<Vec<FaceGrid>> {
    let d = hi - lo;
    let (ex, ey, ez) = (Point3::new(d.x, 0.0, 0.0), Point3::new(0.0, d.y, 0.0), Point3::new(0.0, 0.0, d.z));
    Ok(vec![
        // bottom (−z), top (+z)
        rect(lo, ex, ey, -1)?,
        rect(lo + ez, ex, ey, 1)?,
        // −y, +y
        rect(lo, ex, ez, -1)?,
        rect(lo + ey, ex, ez, 1)?,
        // −x, +x
        rect(lo, ey, ez, 1)?,
        rect(lo + ex, ey, ez, -1)?,
    ])
}

/// Builds one assembly. The returned sample carries the labeler's contact
/// pairs; `intended_pairs` returns what the generator meant to build.
pub fn synth_assembly(params: &FamilyParams) -> Result<AssemblySample> {
    let (cond, target, prompt, target_contacts) = build_parts(params)?;
    let mut condition = PartModel::from_grids(cond, vec![], "")?;
    let mut target = PartModel::from_grids(target, vec![], prompt.clone())?;
    let contacts = label_contacts(&condition, &target, DEFAULT_CONTACT_TOLERANCE)?;
    condition.set_contact_indices(contacts.contact_indices_a.clone())?;
    // Targets list their designed contact faces first; labels must agree.
    target.set_contact_indices(contacts.contact_indices_b.clone())?;
    if !contacts.contact_indices_b.iter().all(|i| *i < target_contacts) {
        return Err(GeoError::Infeasible("target contact faces are not the leading faces".into()));
    }
    Ok(AssemblySample { family: params.family(), condition, target, prompt, contacts })
}

/// Contact pairs `(condition face, target face)` the generator designs.
pub fn intended_pairs(params: &FamilyParams) -> Vec<(usize, usize)> {
    let all = |a: &[usize], b: &[usize]| -> Vec<(usize, usize)> {
        a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j))).collect()
    };
    match *params {
        FamilyParams::PegSocket(p) => {
            if p.clearance <= DEFAULT_CONTACT_TOLERANCE {
                all(&[2, 3], &[0, 1])
            } else {
                vec![]
            }
        }
        FamilyParams::FlangeRing(p) => {
            let mut pairs = Vec::new();
            if p.seat_gap <= DEFAULT_CONTACT_TOLERANCE {
                pairs.extend(all(&[2, 3], &[0, 1]));
            }
            if p.radial_clearance <= DEFAULT_CONTACT_TOLERANCE {
                pairs.extend(all(&[4, 5], &[2, 3]));
            }
            pairs.sort_unstable();
            pairs
        }
        FamilyParams::BracketPlate(p) => {
            let edges = strip_edges(p.strips);
            // Top strips are faces 1, 3, 5, ... (bottom/top alternate).
            (0..p.strips)
                .filter(|&s| {
                    let dx = (edges[s] - p.block_x.1).max(p.block_x.0 - edges[s + 1]).max(0.0);
                    dx.hypot(p.gap) <= DEFAULT_CONTACT_TOLERANCE
                })
                .map(|s| (2 * s + 1, 0))
                .collect()
        }
    }
}

fn strip_edges(strips: usize) -> Vec<f64> {
    (0..=strips).map(|k| -3.0 + 6.0 * k as f64 / strips as f64).collect()
}

type Parts = (Vec<FaceGrid>, Vec<FaceGrid>, String, usize);

fn build_parts(params: &FamilyParams) -> Result<Parts> {
    match *params {
        FamilyParams::PegSocket(p) => {
            let r_peg = p.hole_radius - p.clearance;
            let r_peg_in = r_peg - p.peg_wall;
            if !(p.hole_radius < 3.0 - 0.2 && r_peg_in > 0.1 && p.clearance > 0.0 && p.peg_bottom < p.peg_top) {
                return Err(GeoError::Infeasible(format!("peg/socket parameters {p:?}")));
            }
            let socket = tube(p.hole_radius, 3.0, -3.0, 3.0, 0.0)?;
            let peg = tube(r_peg_in, r_peg, p.peg_bottom, p.peg_top, PI / 2.0)?;
            Ok((socket, peg, "a round peg that fits the hole of the given block".into(), 2))
        }
        FamilyParams::FlangeRing(p) => {
            let ring_in = p.hub_radius + p.radial_clearance;
            let seat = p.shoulder_height;
            if !(p.bore_radius > 0.1
                && p.bore_radius < p.hub_radius - 0.1
                && p.hub_radius < 3.0 - 0.3
                && p.ring_outer > ring_in + 0.1
                && seat > -2.9
                && seat < 2.9
                && p.seat_gap >= 0.0
                && p.ring_height > 0.0)
            {
                return Err(GeoError::Infeasible(format!("flange/ring parameters {p:?}")));
            }
            let (r_big, r_hub, r_bore) = (3.0, p.hub_radius, p.bore_radius);
            let cond = vec![
                half_cylinder(r_big, 0.0, -3.0, seat, 1)?,
                half_cylinder(r_big, PI, -3.0, seat, 1)?,
                half_annulus(r_hub, r_big, 0.0, seat, 1)?,
                half_annulus(r_hub, r_big, PI, seat, 1)?,
                half_cylinder(r_hub, 0.0, seat, 3.0, 1)?,
                half_cylinder(r_hub, PI, seat, 3.0, 1)?,
                half_annulus(r_bore, r_hub, 0.0, 3.0, 1)?,
                half_annulus(r_bore, r_hub, PI, 3.0, 1)?,
                half_annulus(r_bore, r_big, 0.0, -3.0, -1)?,
                half_annulus(r_bore, r_big, PI, -3.0, -1)?,
                half_cylinder(r_bore, 0.0, -3.0, 3.0, -1)?,
                half_cylinder(r_bore, PI, -3.0, 3.0, -1)?,
            ];
            let z0 = seat + p.seat_gap;
            let z1 = z0 + p.ring_height;
            let t = PI / 2.0;
            let ring = vec![
                half_annulus(ring_in, p.ring_outer, t, z0, -1)?,
                half_annulus(ring_in, p.ring_outer, t + PI, z0, -1)?,
                half_cylinder(ring_in, t, z0, z1, -1)?,
                half_cylinder(ring_in, t + PI, z0, z1, -1)?,
                half_cylinder(p.ring_outer, t, z0, z1, 1)?,
                half_cylinder(p.ring_outer, t + PI, z0, z1, 1)?,
                half_annulus(ring_in, p.ring_outer, t, z1, 1)?,
                half_annulus(ring_in, p.ring_outer, t + PI, z1, 1)?,
            ];
            Ok((cond, ring, "a flat ring that slides onto the hub and rests on the flange".into(), 4))
        }
        FamilyParams::BracketPlate(p) => {
            let (bx, by) = (p.block_x, p.block_y);
            let hw = 0.5 * p.width;
            let ht = 0.5 * p.thickness;
            if !(p.strips >= 1
                && p.width > 0.0
                && hw <= 3.0
                && p.thickness > 0.0
                && ht <= 3.0
                && bx.0 < bx.1
                && by.0 < by.1
                && bx.0 >= -3.0
                && bx.1 <= 3.0
                && by.0 >= -hw
                && by.1 <= hw
                && p.block_height > 0.0
                && p.gap >= 0.0)
            {
                return Err(GeoError::Infeasible(format!("bracket/plate parameters {p:?}")));
            }
            let edges = strip_edges(p.strips);
            let mut plate = Vec::new();
            for s in 0..p.strips {
                let lo = Point3::new(edges[s], -hw, -ht);
                let ex = Point3::new(edges[s + 1] - edges[s], 0.0, 0.0);
                let ey = Point3::new(0.0, p.width, 0.0);
                let ez = Point3::new(0.0, 0.0, p.thickness);
                plate.push(rect(lo, ex, ey, -1)?);
                plate.push(rect(lo + ez, ex, ey, 1)?);
            }
            // Long sides split at the strip boundaries so edges coincide.
            for s in 0..p.strips {
                let lo = Point3::new(edges[s], -hw, -ht);
                let ex = Point3::new(edges[s + 1] - edges[s], 0.0, 0.0);
                let ez = Point3::new(0.0, 0.0, p.thickness);
                plate.push(rect(lo, ex, ez, -1)?);
                plate.push(rect(lo + Point3::new(0.0, p.width, 0.0), ex, ez, 1)?);
            }
            let ey = Point3::new(0.0, p.width, 0.0);
            let ez = Point3::new(0.0, 0.0, p.thickness);
            plate.push(rect(Point3::new(-3.0, -hw, -ht), ey, ez, 1)?);
            plate.push(rect(Point3::new(3.0, -hw, -ht), ey, ez, -1)?);
            let lo = Point3::new(bx.0, by.0, ht + p.gap);
            let hi = Point3::new(bx.1, by.1, ht + p.gap + p.block_height);
            let block = box_faces(lo, hi)?;
            Ok((plate, block, "a rectangular block that sits flat on the plate".into(), 1))
        }
    }
}

/// Translation and uniform scale applied to both parts of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub translation: Point3,
    pub scale: f64,
}

impl NormalizationTransform {
    /// `p -> (p + translation) * scale`
    pub fn apply(&self, p: Point3) -> Point3 {
        (p + self.translation) * self.scale
    }

    pub fn apply_part(&self, part: &PartModel) -> PartModel {
        part.scaled_translated(self.scale, self.translation * self.scale)
    }
}

/// Centers the condition's bounding box at the origin and scales it so its
/// largest half-extent is 3; the same transform moves the target.
pub fn normalize(sample: &AssemblySample) -> Result<(AssemblySample, NormalizationTransform)> {
    let b = sample.condition.bounding_box()?;
    let half = 0.5 * (0..3).map(|i| b.dims()[i]).fold(0.0, f64::max);
    if !(half > 1e-12) {
        return Err(GeoError::ZeroVolume);
    }
    let xf = NormalizationTransform { translation: -b.center(), scale: NORMALIZED_HALF_EXTENT / half };
    let mut out = sample.clone();
    out.condition = xf.apply_part(&sample.condition);
    out.target = xf.apply_part(&sample.target);
    Ok((out, xf))
}
