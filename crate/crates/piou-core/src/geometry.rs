//! Closed-form box and point-in-box metrics.
//!
//! Everything here is a pure function of its arguments. Boxes are stored in
//! corner form; center form `(x_c, y_c, w, h)` is a conversion view. Metrics
//! that require the point to sit inside the box use closed membership, so the
//! boundary (and in particular the corners) is well-defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in continuous image coordinates, corner form.
///
/// A valid box has strictly positive width and height; degenerate boxes are
/// rejected with [`Error::InvalidBox`] rather than clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// Builds a box from center form `(x_c, y_c, w, h)`.
    pub fn from_center(x_c: f64, y_c: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x_c - w / 2.0, y_c - h / 2.0, x_c + w / 2.0, y_c + h / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width(), self.height());
        let finite = self.x_min.is_finite()
            && self.y_min.is_finite()
            && self.x_max.is_finite()
            && self.y_max.is_finite();
        if !finite || !(w > 0.0) || !(h > 0.0) {
            return Err(Error::InvalidBox {
                width: w,
                height: h,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Center form view `(x_c, y_c, w, h)`.
    pub fn center_form(&self) -> (f64, f64, f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
            self.width(),
            self.height(),
        )
    }

    /// Closed membership test: the boundary counts as inside.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Intersects the box with the image rectangle `[0, w] x [0, h]`.
    ///
    /// Returns `None` when nothing with positive area remains.
    pub fn clip_to_image(&self, image_width: f64, image_height: f64) -> Option<BBox> {
        let clipped = BBox {
            x_min: self.x_min.max(0.0),
            y_min: self.y_min.max(0.0),
            x_max: self.x_max.min(image_width),
            y_max: self.y_max.min(image_height),
        };
        if clipped.width() > 0.0 && clipped.height() > 0.0 {
            Some(clipped)
        } else {
            None
        }
    }
}

/// A location in continuous image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Distances from a point to the left, right, top and bottom sides of a box.
///
/// All four are non-negative exactly when the point lies in the closed box;
/// `l + r` is the box width and `t + b` the box height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideDistances {
    pub l: f64,
    pub r: f64,
    pub t: f64,
    pub b: f64,
}

impl SideDistances {
    pub fn all_non_negative(&self) -> bool {
        self.l >= 0.0 && self.r >= 0.0 && self.t >= 0.0 && self.b >= 0.0
    }
}

/// Distances from `p` to the four sides of `bbox`.
///
/// Values may be negative when the point is outside the box.
pub fn side_distances(p: Point, bbox: &BBox) -> Result<SideDistances> {
    bbox.validate()?;
    Ok(SideDistances {
        l: p.x - bbox.x_min,
        r: bbox.x_max - p.x,
        t: p.y - bbox.y_min,
        b: bbox.y_max - p.y,
    })
}

fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    iw * ih
}

/// Intersection over union of two boxes; 0 when disjoint, 1 when identical.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let inter = intersection_area(a, b);
    Ok(inter / (a.area() + b.area() - inter))
}

/// Generalized IoU: IoU minus the fraction of the smallest enclosing box not
/// covered by the union. Ranges in (-1, 1].
pub fn giou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    let hull_w = a.x_max.max(b.x_max) - a.x_min.min(b.x_min);
    let hull_h = a.y_max.max(b.y_max) - a.y_min.min(b.y_min);
    let hull = hull_w * hull_h;
    Ok(inter / union - (hull - union) / hull)
}

/// IoU between the pseudo box centered at `p` (same size as `gt`) and `gt`.
///
/// The pseudo box's side distances are `l = r = (l_gt + r_gt) / 2` and
/// `t = b = (t_gt + b_gt) / 2`; the intersection box's sides are the
/// element-wise minima of the two side vectors. For points in the closed box
/// the result lies in `[1/7, 1]`: 1 exactly at the center, 1/7 exactly at the
/// corners.
pub fn pseudo_iou(p: Point, gt: &BBox) -> Result<f64> {
    let d = side_distances(p, gt)?;
    if !d.all_non_negative() {
        return Err(Error::OutOfBox { x: p.x, y: p.y });
    }
    let half_w = (d.l + d.r) / 2.0;
    let half_h = (d.t + d.b) / 2.0;
    let area_gt = (d.l + d.r) * (d.t + d.b);
    let area_pseudo = (half_w + half_w) * (half_h + half_h);
    let l = half_w.min(d.l);
    let r = half_w.min(d.r);
    let t = half_h.min(d.t);
    let b = half_h.min(d.b);
    let inter = (l + r) * (t + b);
    Ok(inter / (area_pseudo + area_gt - inter))
}

/// FCOS-style centerness: `sqrt(min(l,r)/max(l,r) * min(t,b)/max(t,b))`.
///
/// 1 at the box center, 0 on any edge.
pub fn centerness(p: Point, gt: &BBox) -> Result<f64> {
    let d = side_distances(p, gt)?;
    if !d.all_non_negative() {
        return Err(Error::OutOfBox { x: p.x, y: p.y });
    }
    let rx = d.l.min(d.r) / d.l.max(d.r);
    let ry = d.t.min(d.b) / d.t.max(d.b);
    Ok((rx * ry).sqrt())
}

/// Membership test against the box shrunk by factor `scale` about its center.
///
/// Strict inequalities: `|x - x_c| < s*w/2` and `|y - y_c| < s*h/2`.
pub fn in_scaled_box(p: Point, gt: &BBox, scale: f64) -> Result<bool> {
    gt.validate()?;
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "scale",
            value: scale,
            expected: "a value in (0, 1]",
        });
    }
    let (x_c, y_c, w, h) = gt.center_form();
    Ok((p.x - x_c).abs() < scale * w / 2.0 && (p.y - y_c).abs() < scale * h / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Box centered at (50, 50) with w=20, h=10, i.e. corners (40, 45, 60, 55).
    fn sample_box() -> BBox {
        BBox::from_center(50.0, 50.0, 20.0, 10.0).unwrap()
    }

    #[test]
    fn bbox_rejects_degenerate() {
        assert!(matches!(
            BBox::new(0.0, 0.0, 0.0, 1.0),
            Err(Error::InvalidBox { .. })
        ));
        assert!(matches!(
            BBox::new(0.0, 5.0, 1.0, 5.0),
            Err(Error::InvalidBox { .. })
        ));
        assert!(matches!(
            BBox::new(2.0, 0.0, 1.0, 1.0),
            Err(Error::InvalidBox { .. })
        ));
        assert!(BBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn center_form_round_trip() {
        let b = BBox::new(3.25, -2.5, 17.75, 9.0).unwrap();
        let (xc, yc, w, h) = b.center_form();
        let back = BBox::from_center(xc, yc, w, h).unwrap();
        assert!(approx(back.x_min, b.x_min, 1e-12));
        assert!(approx(back.y_min, b.y_min, 1e-12));
        assert!(approx(back.x_max, b.x_max, 1e-12));
        assert!(approx(back.y_max, b.y_max, 1e-12));
    }

    #[test]
    fn side_distances_examples() {
        let b = sample_box();
        let d = side_distances(Point::new(44.0, 52.0), &b).unwrap();
        assert_eq!((d.l, d.r, d.t, d.b), (4.0, 16.0, 7.0, 3.0));

        // point at the center: (w/2, w/2, h/2, h/2)
        let d = side_distances(Point::new(50.0, 50.0), &b).unwrap();
        assert_eq!((d.l, d.r, d.t, d.b), (10.0, 10.0, 5.0, 5.0));

        // point on the left edge midpoint
        let d = side_distances(Point::new(40.0, 50.0), &b).unwrap();
        assert_eq!((d.l, d.r, d.t, d.b), (0.0, 20.0, 5.0, 5.0));
    }

    #[test]
    fn side_distances_outside_are_negative() {
        let b = sample_box();
        let d = side_distances(Point::new(30.0, 50.0), &b).unwrap();
        assert!(d.l < 0.0);
        assert!(!d.all_non_negative());
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
        assert_eq!(iou(&a, &a).unwrap(), 1.0);

        let far = BBox::new(10.0, 10.0, 11.0, 11.0).unwrap();
        assert_eq!(iou(&a, &far).unwrap(), 0.0);

        // intersection 2, union 6
        let b = BBox::new(1.0, 0.0, 3.0, 2.0).unwrap();
        assert!(approx(iou(&a, &b).unwrap(), 1.0 / 3.0, 1e-15));
        assert_eq!(iou(&a, &b).unwrap(), iou(&b, &a).unwrap());
    }

    #[test]
    fn giou_examples() {
        let a = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(giou(&a, &a).unwrap(), 1.0);

        // IoU 0, enclosing box area 3, union 2 -> -1/3
        let b = BBox::new(2.0, 0.0, 3.0, 1.0).unwrap();
        assert!(approx(giou(&a, &b).unwrap(), -1.0 / 3.0, 1e-15));
        assert_eq!(giou(&a, &b).unwrap(), giou(&b, &a).unwrap());
    }

    #[test]
    fn pseudo_iou_landmarks() {
        let b = sample_box();
        // center
        assert_eq!(pseudo_iou(Point::new(50.0, 50.0), &b).unwrap(), 1.0);
        // left-edge midpoint: intersection 100, both areas 200 -> 1/3
        assert!(approx(
            pseudo_iou(Point::new(40.0, 50.0), &b).unwrap(),
            1.0 / 3.0,
            1e-12
        ));
        // corner: intersection 50 -> 1/7
        assert!(approx(
            pseudo_iou(Point::new(40.0, 45.0), &b).unwrap(),
            1.0 / 7.0,
            1e-12
        ));
        // quarter offset on x: intersection 150, union 250 -> 0.6
        assert!(approx(
            pseudo_iou(Point::new(45.0, 50.0), &b).unwrap(),
            0.6,
            1e-12
        ));
    }

    #[test]
    fn pseudo_iou_rejects_outside_point() {
        let b = sample_box();
        assert!(matches!(
            pseudo_iou(Point::new(39.9, 50.0), &b),
            Err(Error::OutOfBox { .. })
        ));
        assert!(matches!(
            pseudo_iou(Point::new(50.0, 55.1), &b),
            Err(Error::OutOfBox { .. })
        ));
    }

    #[test]
    fn pseudo_iou_reflection_is_exact() {
        let b = sample_box();
        let p = Point::new(43.0, 47.0);
        let reflected_x = Point::new(b.x_min + b.x_max - p.x, p.y);
        let reflected_y = Point::new(p.x, b.y_min + b.y_max - p.y);
        let v = pseudo_iou(p, &b).unwrap();
        assert_eq!(v, pseudo_iou(reflected_x, &b).unwrap());
        assert_eq!(v, pseudo_iou(reflected_y, &b).unwrap());
    }

    #[test]
    fn centerness_examples() {
        let b = sample_box();
        assert_eq!(centerness(Point::new(50.0, 50.0), &b).unwrap(), 1.0);
        assert_eq!(centerness(Point::new(40.0, 48.0), &b).unwrap(), 0.0);
        assert_eq!(centerness(Point::new(44.0, 55.0), &b).unwrap(), 0.0);

        // (l, r, t, b) = (1, 4, 1, 1) -> sqrt(1/4 * 1) = 0.5
        let c = BBox::new(0.0, 0.0, 5.0, 2.0).unwrap();
        assert!(approx(
            centerness(Point::new(1.0, 1.0), &c).unwrap(),
            0.5,
            1e-15
        ));
    }

    #[test]
    fn centerness_rejects_outside_point() {
        let b = sample_box();
        assert!(matches!(
            centerness(Point::new(0.0, 0.0), &b),
            Err(Error::OutOfBox { .. })
        ));
    }

    #[test]
    fn scaled_box_strict_boundary() {
        let b = sample_box();
        // s=0.5 shrinks the half-width to 5; |45-50| < 5 is false
        assert!(!in_scaled_box(Point::new(45.0, 50.0), &b, 0.5).unwrap());
        assert!(in_scaled_box(Point::new(46.0, 50.0), &b, 0.5).unwrap());
        // s=1, strictly inside
        assert!(in_scaled_box(Point::new(50.0, 50.0), &b, 1.0).unwrap());
        // s=1, on the boundary: strict inequality excludes it
        assert!(!in_scaled_box(Point::new(40.0, 50.0), &b, 1.0).unwrap());
    }

    #[test]
    fn scaled_box_rejects_bad_scale() {
        let b = sample_box();
        let p = Point::new(50.0, 50.0);
        assert!(matches!(
            in_scaled_box(p, &b, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            in_scaled_box(p, &b, 1.5),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn clip_to_image() {
        let b = BBox::new(-10.0, -5.0, 20.0, 30.0).unwrap();
        let c = b.clip_to_image(100.0, 100.0).unwrap();
        assert_eq!(c, BBox::new(0.0, 0.0, 20.0, 30.0).unwrap());

        let outside = BBox::new(-20.0, 0.0, -10.0, 10.0).unwrap();
        assert!(outside.clip_to_image(100.0, 100.0).is_none());

        // box touching the image edge from outside clips to zero width
        let touching = BBox::new(100.0, 0.0, 120.0, 10.0).unwrap();
        assert!(touching.clip_to_image(100.0, 100.0).is_none());
    }
}
