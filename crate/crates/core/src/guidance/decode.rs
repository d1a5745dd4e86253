use crate::diffusion::BoxSet;
use crate::error::Result;
use crate::geometry::face::{infer_kind, sorted_axes, FaceGrid, FACE_BOX_MIN_EXTENT};
use crate::geometry::part::{Face, PartModel};
use crate::geometry::point::{BoundingBox, Point3};

fn centroid(boxes: &[BoundingBox]) -> Point3 {
    let sum = boxes.iter().fold(Point3::ZERO, |acc, b| acc + b.center());
    sum * (1.0 / boxes.len().max(1) as f64)
}

/// Kind from the box shape; orientation facing away from the centroid of
/// the whole set along the box's thinnest axis.
fn decode_with(b: &BoundingBox, center: Point3) -> Result<Face> {
    let thin = sorted_axes(b)[0];
    let orient = if b.center()[thin] - center[thin] >= 0.0 { 1 } else { -1 };
    Face::decode(*b, infer_kind(b), orient)
}

/// Decodes the given rows of a box set into faces.
pub fn decode_rows(state: &BoxSet, rows: &[usize]) -> Result<Vec<FaceGrid>> {
    let boxes = state.sanitized_boxes(FACE_BOX_MIN_EXTENT);
    let c = centroid(&boxes);
    rows.iter().map(|&i| decode_with(&boxes[i], c).map(|f| f.grid)).collect()
}

/// Decodes a whole box set into a part whose contact faces are the
/// flagged slots.
pub fn decode_part(state: &BoxSet, prompt: &str) -> Result<PartModel> {
    let boxes = state.sanitized_boxes(FACE_BOX_MIN_EXTENT);
    let c = centroid(&boxes);
    let faces = boxes.iter().map(|b| decode_with(b, c)).collect::<Result<Vec<_>>>()?;
    PartModel::new(faces, state.contact_slots(), prompt)
}
