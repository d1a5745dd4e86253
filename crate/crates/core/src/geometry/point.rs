use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// A point (or vector) in model space. One unit is one millimetre after
/// dataset normalization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn distance_squared(self, o: Point3) -> f64 {
        (self - o).norm_squared()
    }

    pub fn min(self, o: Point3) -> Point3 {
        Point3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Point3) -> Point3 {
        Point3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    /// `self + (o - self) * s`
    pub fn lerp(self, o: Point3, s: f64) -> Point3 {
        self + (o - self) * s
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Component by axis index (0 = x, 1 = y, 2 = z).
    pub fn axis(self, i: usize) -> f64 {
        self[i]
    }

    pub fn with_axis(mut self, i: usize, v: f64) -> Point3 {
        match i {
            0 => self.x = v,
            1 => self.y = v,
            _ => self.z = v,
        }
        self
    }

    /// Unit vector along axis `i`.
    pub fn unit_axis(i: usize) -> Point3 {
        Point3::ZERO.with_axis(i, 1.0)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

impl Index<usize> for Point3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis index {i} out of range"),
        }
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    fn add_assign(&mut self, o: Point3) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Point3 {
    fn sub_assign(&mut self, o: Point3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned box stored as its two extreme corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 6]", into = "[f64; 6]")]
pub struct BoundingBox {
    pub min_corner: Point3,
    pub max_corner: Point3,
}

impl BoundingBox {
    pub fn new(min_corner: Point3, max_corner: Point3) -> Result<Self> {
        let b = Self { min_corner, max_corner };
        if !min_corner.is_finite() || !max_corner.is_finite() {
            return Err(GeoError::InvalidInput("non-finite bounding box".into()));
        }
        if (0..3).any(|i| min_corner[i] > max_corner[i]) {
            return Err(GeoError::InvalidInput("bounding box min exceeds max".into()));
        }
        Ok(b)
    }

    /// Builds a valid box from six raw numbers that may be out of order
    /// (noisy diffusion states): each axis is sorted and any extent below
    /// `min_extent` is widened symmetrically about its midpoint.
    pub fn from_raw_sanitized(raw: [f64; 6], min_extent: f64) -> Self {
        let mut lo = Point3::ZERO;
        let mut hi = Point3::ZERO;
        for i in 0..3 {
            let (a, b) = (raw[i], raw[i + 3]);
            let (mut l, mut h) = if a <= b { (a, b) } else { (b, a) };
            if h - l < min_extent {
                let mid = 0.5 * (l + h);
                l = mid - 0.5 * min_extent;
                h = mid + 0.5 * min_extent;
            }
            lo = lo.with_axis(i, l);
            hi = hi.with_axis(i, h);
        }
        Self { min_corner: lo, max_corner: hi }
    }

    /// Tight box around a non-empty point set.
    pub fn enclosing(points: &[Point3]) -> Result<Self> {
        let first = *points.first().ok_or(GeoError::EmptySet)?;
        let (lo, hi) = points
            .iter()
            .fold((first, first), |(lo, hi), p| (lo.min(*p), hi.max(*p)));
        Self::new(lo, hi)
    }

    pub fn center(&self) -> Point3 {
        (self.min_corner + self.max_corner) * 0.5
    }

    pub fn dims(&self) -> Point3 {
        self.max_corner - self.min_corner
    }

    /// Widens every extent to at least `min_extent`, keeping the center.
    pub fn padded_to(&self, min_extent: f64) -> Self {
        Self::from_raw_sanitized(self.to_array(), min_extent)
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            min_corner: self.min_corner - Point3::splat(margin),
            max_corner: self.max_corner + Point3::splat(margin),
        }
    }

    pub fn union(&self, o: &BoundingBox) -> Self {
        Self {
            min_corner: self.min_corner.min(o.min_corner),
            max_corner: self.max_corner.max(o.max_corner),
        }
    }

    pub fn intersects(&self, o: &BoundingBox) -> bool {
        (0..3).all(|i| self.min_corner[i] <= o.max_corner[i] && o.min_corner[i] <= self.max_corner[i])
    }

    pub fn contains(&self, p: Point3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min_corner[i] - tol && p[i] <= self.max_corner[i] + tol)
    }

    pub fn contains_box(&self, o: &BoundingBox, tol: f64) -> bool {
        self.contains(o.min_corner, tol) && self.contains(o.max_corner, tol)
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared_to(&self, p: Point3) -> f64 {
        (0..3)
            .map(|i| {
                let d = (self.min_corner[i] - p[i]).max(0.0).max(p[i] - self.max_corner[i]);
                d * d
            })
            .sum()
    }

    /// `[xmin, ymin, zmin, xmax, ymax, zmax]`
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.min_corner.x,
            self.min_corner.y,
            self.min_corner.z,
            self.max_corner.x,
            self.max_corner.y,
            self.max_corner.z,
        ]
    }

    /// Axis indices ordered by increasing extent (ties keep axis order).
    pub fn axes_by_extent(&self) -> [usize; 3] {
        let d = self.dims();
        let mut axes = [0usize, 1, 2];
        axes.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        axes
    }
}

impl TryFrom<[f64; 6]> for BoundingBox {
    type Error = GeoError;
    fn try_from(a: [f64; 6]) -> Result<Self> {
        BoundingBox::new(Point3::new(a[0], a[1], a[2]), Point3::new(a[3], a[4], a[5]))
    }
}

impl From<BoundingBox> for [f64; 6] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

/// Rigid motion `p -> R p + t` with `R` a rotation matrix (row-major).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: Point3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: Point3::ZERO,
        }
    }

    pub fn translation(t: Point3) -> Self {
        Self { translation: t, ..Self::identity() }
    }

    /// Rotation by `angle` radians about the unit vector `axis`, then a translation.
    pub fn from_axis_angle(axis: Point3, angle: f64, translation: Point3) -> Self {
        let a = axis * (1.0 / axis.norm());
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        let rotation = [
            [t * a.x * a.x + c, t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y],
            [t * a.x * a.y + s * a.z, t * a.y * a.y + c, t * a.y * a.z - s * a.x],
            [t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c],
        ];
        Self { rotation, translation }
    }

    pub fn rotate(&self, v: Point3) -> Point3 {
        let r = &self.rotation;
        Point3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        self.rotate(p) + self.translation
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rotation;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitized_box_orders_and_pads() {
        let b = BoundingBox::from_raw_sanitized([1.0, 0.0, 0.5, 0.0, 2.0, 0.5], 0.1);
        assert_eq!(b.min_corner, Point3::new(0.0, 0.0, 0.45));
        assert_eq!(b.max_corner, Point3::new(1.0, 2.0, 0.55));
    }

    #[test]
    fn box_rejects_inverted_corners() {
        assert!(BoundingBox::try_from([1.0, 0.0, 0.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn rotation_has_unit_determinant() {
        let r = RigidTransform::from_axis_angle(Point3::new(1.0, 2.0, 3.0), 0.7, Point3::ZERO);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        let v = Point3::new(0.3, -1.0, 2.0);
        assert!((r.rotate(v).norm() - v.norm()).abs() < 1e-12);
    }
}
