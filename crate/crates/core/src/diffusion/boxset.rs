use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::part::PartModel;
use crate::geometry::point::BoundingBox;

/// Largest face count a box set may carry.
pub const MAX_FACES: usize = 70;
/// Leading positions that may be flagged as contact slots.
pub const CONTACT_SLOTS: usize = 10;

/// The diffusion state: one row `[xmin, ymin, zmin, xmax, ymax, zmax]` per
/// face. Rows of noisy states need not be ordered boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxSetRecord", into = "BoxSetRecord")]
pub struct BoxSet {
    pub boxes: Array2<f64>,
    pub contact_mask: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoxSetRecord {
    boxes: Vec<[f64; 6]>,
    contact_mask: Vec<bool>,
}

impl TryFrom<BoxSetRecord> for BoxSet {
    type Error = GeoError;
    fn try_from(r: BoxSetRecord) -> Result<Self> {
        let n = r.boxes.len();
        let flat: Vec<f64> = r.boxes.iter().flatten().copied().collect();
        let boxes = Array2::from_shape_vec((n, 6), flat).map_err(|e| GeoError::ShapeMismatch(e.to_string()))?;
        BoxSet::new(boxes, r.contact_mask)
    }
}

impl From<BoxSet> for BoxSetRecord {
    fn from(b: BoxSet) -> Self {
        let boxes = b.boxes.rows().into_iter().map(|r| std::array::from_fn(|k| r[k])).collect();
        BoxSetRecord { boxes, contact_mask: b.contact_mask }
    }
}

impl BoxSet {
    pub fn new(boxes: Array2<f64>, contact_mask: Vec<bool>) -> Result<Self> {
        let n = boxes.nrows();
        if boxes.ncols() != 6 {
            return Err(GeoError::ShapeMismatch(format!("box rows need 6 values, got {}", boxes.ncols())));
        }
        if n > MAX_FACES {
            return Err(GeoError::InvalidInput(format!("{n} faces exceed the limit of {MAX_FACES}")));
        }
        if contact_mask.len() != n {
            return Err(GeoError::ShapeMismatch(format!("contact mask has {} entries for {n} boxes", contact_mask.len())));
        }
        if contact_mask.iter().skip(CONTACT_SLOTS).any(|&c| c) {
            return Err(GeoError::InvalidInput(format!("only the first {CONTACT_SLOTS} positions may be contact slots")));
        }
        if boxes.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::InvalidInput("non-finite box coordinate".into()));
        }
        Ok(Self { boxes, contact_mask })
    }

    /// Mask with the first `count` positions (capped at the slot limit) set.
    pub fn leading_mask(n: usize, count: usize) -> Vec<bool> {
        (0..n).map(|i| i < count.min(CONTACT_SLOTS)).collect()
    }

    pub fn from_boxes(boxes: &[BoundingBox], contact_mask: Vec<bool>) -> Result<Self> {
        let flat: Vec<f64> = boxes.iter().flat_map(|b| b.to_array()).collect();
        let arr = Array2::from_shape_vec((boxes.len(), 6), flat).map_err(|e| GeoError::ShapeMismatch(e.to_string()))?;
        Self::new(arr, contact_mask)
    }

    /// Face boxes of `part` with its contact faces moved to the front (both
    /// groups keep their relative order) and flagged in the mask. Also
    /// returns the face order used.
    pub fn from_part_contacts_first(part: &PartModel) -> Result<(Self, Vec<usize>)> {
        let contacts = part.contact_indices();
        let mut order: Vec<usize> = contacts.to_vec();
        order.extend((0..part.len()).filter(|i| !contacts.contains(i)));
        let boxes: Vec<BoundingBox> = order.iter().map(|&i| part.faces()[i].bbox).collect();
        let mask = Self::leading_mask(order.len(), contacts.len());
        Ok((Self::from_boxes(&boxes, mask)?, order))
    }

    pub fn len(&self) -> usize {
        self.boxes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.nrows() == 0
    }

    pub fn row(&self, i: usize) -> [f64; 6] {
        std::array::from_fn(|k| self.boxes[[i, k]])
    }

    /// Row `i` as a valid box (axes sorted, extents padded to `min_extent`).
    pub fn sanitized_box(&self, i: usize, min_extent: f64) -> BoundingBox {
        BoundingBox::from_raw_sanitized(self.row(i), min_extent)
    }

    pub fn sanitized_boxes(&self, min_extent: f64) -> Vec<BoundingBox> {
        (0..self.len()).map(|i| self.sanitized_box(i, min_extent)).collect()
    }

    pub fn contact_slots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.contact_mask[i]).collect()
    }

    pub fn with_boxes(&self, boxes: Array2<f64>) -> Self {
        Self { boxes, contact_mask: self.contact_mask.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::face::{FaceGrid, FaceKind};
    use crate::geometry::point::Point3;

    #[test]
    fn contacts_move_to_front() {
        let g = |z: f64| FaceGrid::from_fn(FaceKind::Planar, 1, |u, v| Point3::new(u, v, z)).unwrap();
        let part = PartModel::from_grids(vec![g(0.0), g(1.0), g(2.0)], vec![2], "").unwrap();
        let (set, order) = BoxSet::from_part_contacts_first(&part).unwrap();
        assert_eq!(order, vec![2, 0, 1]);
        assert_eq!(set.contact_mask, vec![true, false, false]);
        assert_eq!(set.sanitized_box(0, 1e-2).center().z, 2.0);
    }

    #[test]
    fn slot_limit_is_enforced() {
        let mut mask = vec![false; 12];
        mask[11] = true;
        assert!(BoxSet::new(Array2::zeros((12, 6)), mask).is_err());
        assert_eq!(BoxSet::leading_mask(12, 20).iter().filter(|&&c| c).count(), CONTACT_SLOTS);
    }
}
