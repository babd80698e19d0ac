//! Scalar loss math: focal classification loss, IoU regression loss in the
//! -ln(IoU) form, the 1 - GIoU variant, and the combined objective normalized
//! by the positive-sample count. Every loss returns its analytic gradient so
//! finite-difference checks can pin the math down.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point};

/// Hyperparameters for the loss heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Focal-loss class balance weight; 1 reduces the positive branch to
    /// plain cross-entropy.
    pub alpha: f64,
    /// Focal-loss focusing exponent; 0 reduces to cross-entropy.
    pub gamma: f64,
    /// Balance weight on the regression sum.
    pub lambda: f64,
    /// Probability/IoU floor guarding the logarithms.
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
            lambda: 1.0,
            epsilon: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                expected: "a value in (0, 1]",
            });
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: self.gamma,
                expected: "a non-negative value",
            });
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: self.lambda,
                expected: "a positive value",
            });
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: self.epsilon,
                expected: "a value in (0, 1e-3]",
            });
        }
        Ok(())
    }
}

/// Predicted side distances from a point to the four box sides; all positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LtrbPrediction {
    pub l: f64,
    pub r: f64,
    pub t: f64,
    pub b: f64,
}

impl LtrbPrediction {
    pub fn new(l: f64, r: f64, t: f64, b: f64) -> Result<Self> {
        let p = Self { l, r, t, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("l", self.l), ("r", self.r), ("t", self.t), ("b", self.b)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidPrediction { name, value });
            }
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 4] {
        [self.l, self.r, self.t, self.b]
    }
}

/// Summed loss terms and the combined, normalized objective.
///
/// `total = classification / N_pos + lambda * regression / N_pos` when
/// `N_pos > 0`; with no positives the classification sum is kept as-is and
/// the regression term is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub classification: f64,
    pub regression: f64,
    pub total: f64,
    pub n_pos: u64,
}

/// Focal loss for one prediction: `-alpha_t * (1 - p_t)^gamma * ln(p_t)`.
///
/// `p` is clamped to `[epsilon, 1 - epsilon]` before evaluation. Returns the
/// loss and its derivative with respect to `p` (valid away from the clamping
/// boundaries).
pub fn focal_loss(p: f64, label: u8, cfg: &LossConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    if label > 1 {
        return Err(Error::InvalidLabel { value: label });
    }
    if !p.is_finite() {
        return Err(Error::InvalidInput {
            reason: format!("probability {p} is not finite"),
        });
    }
    let p = p.clamp(cfg.epsilon, 1.0 - cfg.epsilon);
    let (p_t, alpha_t, dp_t) = if label == 1 {
        (p, cfg.alpha, 1.0)
    } else {
        (1.0 - p, 1.0 - cfg.alpha, -1.0)
    };
    let loss = -alpha_t * (1.0 - p_t).powf(cfg.gamma) * p_t.ln();
    // d/dp_t of the loss; the gamma term vanishes identically at gamma = 0
    let focus = if cfg.gamma == 0.0 {
        0.0
    } else {
        cfg.gamma * (1.0 - p_t).powf(cfg.gamma - 1.0) * p_t.ln()
    };
    let dloss_dpt = alpha_t * (focus - (1.0 - p_t).powf(cfg.gamma) / p_t);
    Ok((loss, dloss_dpt * dp_t))
}

/// IoU loss between two side-distance vectors anchored at the same point:
/// `-ln(max(IoU, epsilon))` with the intersection taken side-wise.
///
/// Returns the loss and its gradient with respect to the prediction's
/// `(l, r, t, b)` components.
pub fn iou_loss(
    pred: &LtrbPrediction,
    target: &LtrbPrediction,
    cfg: &LossConfig,
) -> Result<(f64, [f64; 4])> {
    cfg.validate()?;
    pred.validate()?;
    target.validate()?;

    let [lp, rp, tp, bp] = pred.as_array();
    let [lt, rt, tt, bt] = target.as_array();

    let iw = lp.min(lt) + rp.min(rt);
    let ih = tp.min(tt) + bp.min(bt);
    let inter = iw * ih;
    let area_pred = (lp + rp) * (tp + bp);
    let area_target = (lt + rt) * (tt + bt);
    let union = area_pred + area_target - inter;
    let iou = inter / union;

    let loss = -iou.max(cfg.epsilon).ln();
    if iou <= cfg.epsilon {
        // floored: the loss is locally constant
        return Ok((loss, [0.0; 4]));
    }

    // dI/dx is the cross extent when the prediction side is the binding
    // minimum, else zero; dS_pred/dx is always the cross extent.
    let d_inter = [
        if lp < lt { ih } else { 0.0 },
        if rp < rt { ih } else { 0.0 },
        if tp < tt { iw } else { 0.0 },
        if bp < bt { iw } else { 0.0 },
    ];
    let d_area = [tp + bp, tp + bp, lp + rp, lp + rp];
    let mut grad = [0.0; 4];
    for k in 0..4 {
        let d_union = d_area[k] - d_inter[k];
        let d_iou = (d_inter[k] * union - inter * d_union) / (union * union);
        grad[k] = -d_iou / iou;
    }
    Ok((loss, grad))
}

/// GIoU regression loss `1 - GIoU`, in `[0, 2)`; zero only for identical
/// boxes.
///
/// Returns the loss and its gradient with respect to the predicted corners
/// `(x_min, y_min, x_max, y_max)`.
pub fn giou_loss(pred: &BBox, target: &BBox) -> Result<(f64, [f64; 4])> {
    pred.validate()?;
    target.validate()?;

    let a = pred;
    let b = target;
    let area_a = a.area();
    let area_b = b.area();

    let ix0 = a.x_min.max(b.x_min);
    let iy0 = a.y_min.max(b.y_min);
    let ix1 = a.x_max.min(b.x_max);
    let iy1 = a.y_max.min(b.y_max);
    let iw = (ix1 - ix0).max(0.0);
    let ih = (iy1 - iy0).max(0.0);
    let inter = iw * ih;

    let cx0 = a.x_min.min(b.x_min);
    let cy0 = a.y_min.min(b.y_min);
    let cx1 = a.x_max.max(b.x_max);
    let cy1 = a.y_max.max(b.y_max);
    let (cw, ch) = (cx1 - cx0, cy1 - cy0);
    let hull = cw * ch;

    let union = area_a + area_b - inter;
    let giou = inter / union - (hull - union) / hull;
    let loss = 1.0 - giou;

    let (w_a, h_a) = (a.width(), a.height());
    // corner order: x_min, y_min, x_max, y_max
    let d_area = [-h_a, -w_a, h_a, w_a];
    let overlap = iw > 0.0 && ih > 0.0;
    let d_inter = [
        if overlap && a.x_min > b.x_min { -ih } else { 0.0 },
        if overlap && a.y_min > b.y_min { -iw } else { 0.0 },
        if overlap && a.x_max < b.x_max { ih } else { 0.0 },
        if overlap && a.y_max < b.y_max { iw } else { 0.0 },
    ];
    let d_hull = [
        if a.x_min < b.x_min { -ch } else { 0.0 },
        if a.y_min < b.y_min { -cw } else { 0.0 },
        if a.x_max > b.x_max { ch } else { 0.0 },
        if a.y_max > b.y_max { cw } else { 0.0 },
    ];

    let mut grad = [0.0; 4];
    for k in 0..4 {
        let d_union = d_area[k] - d_inter[k];
        // giou = inter/union - 1 + union/hull
        let d_giou = (d_inter[k] * union - inter * d_union) / (union * union)
            + (d_union * hull - union * d_hull[k]) / (hull * hull);
        grad[k] = -d_giou;
    }
    Ok((loss, grad))
}

/// Decodes a side-distance prediction at a point into corner form.
pub fn decode_box(p: Point, pred: &LtrbPrediction) -> Result<BBox> {
    pred.validate()?;
    BBox::new(p.x - pred.l, p.y - pred.t, p.x + pred.r, p.y + pred.b)
}

// Neumaier-compensated sum: the result does not depend on element order
// beyond ~1e-16 relative noise.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Combines per-point classification losses and per-positive regression
/// losses into the normalized training objective.
pub fn total_loss(
    classification: &[f64],
    regression: &[f64],
    n_pos: u64,
    cfg: &LossConfig,
) -> Result<LossTerms> {
    cfg.validate()?;
    for &v in classification.iter().chain(regression.iter()) {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput {
                reason: format!("loss component {v} is negative or not finite"),
            });
        }
    }
    let cls_sum = compensated_sum(classification);
    let reg_sum = compensated_sum(regression);
    let total = if n_pos > 0 {
        let n = n_pos as f64;
        cls_sum / n + cfg.lambda * reg_sum / n
    } else {
        // no positives: classification normalizes by 1, regression drops out
        cls_sum
    };
    Ok(LossTerms {
        classification: cls_sum,
        regression: reg_sum,
        total,
        n_pos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
    }

    #[test]
    fn focal_loss_vanishes_for_perfect_predictions() {
        let cfg = LossConfig::default();
        let (loss, _) = focal_loss(1.0 - 1e-9, 1, &cfg).unwrap();
        assert!(loss < 1e-6);
        let (loss, _) = focal_loss(1e-9, 0, &cfg).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn focal_loss_reduces_to_cross_entropy() {
        let cfg = LossConfig {
            alpha: 1.0,
            gamma: 0.0,
            ..LossConfig::default()
        };
        let (loss, _) = focal_loss(0.5, 1, &cfg).unwrap();
        assert!(approx(loss, std::f64::consts::LN_2, 1e-12));
    }

    #[test]
    fn focal_loss_gradient_matches_finite_differences() {
        let cfg = LossConfig::default();
        let h = 1e-5;
        for &(p, label) in &[(0.7, 1u8), (0.3, 0u8), (0.5, 1u8), (0.9, 0u8)] {
            let (_, grad) = focal_loss(p, label, &cfg).unwrap();
            let (up, _) = focal_loss(p + h, label, &cfg).unwrap();
            let (down, _) = focal_loss(p - h, label, &cfg).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!(
                rel_err(grad, fd) <= 1e-4,
                "p={p} label={label}: analytic {grad} vs fd {fd}"
            );
        }
    }

    #[test]
    fn focal_loss_rejects_bad_labels() {
        let cfg = LossConfig::default();
        assert!(matches!(
            focal_loss(0.5, 2, &cfg),
            Err(Error::InvalidLabel { value: 2 })
        ));
    }

    #[test]
    fn focal_loss_is_non_increasing_in_pt() {
        let cfg = LossConfig::default();
        let mut last = f64::INFINITY;
        for k in 1..100 {
            let p = k as f64 / 100.0;
            let (loss, _) = focal_loss(p, 1, &cfg).unwrap();
            assert!(loss <= last + 1e-12);
            last = loss;
        }
    }

    #[test]
    fn iou_loss_is_zero_at_the_target() {
        let cfg = LossConfig::default();
        let t = LtrbPrediction::new(3.0, 5.0, 2.0, 7.0).unwrap();
        let (loss, _) = iou_loss(&t, &t, &cfg).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn iou_loss_hits_one_at_iou_inverse_e() {
        let cfg = LossConfig::default();
        let target = LtrbPrediction::new(1.0, 1.0, 1.0, 1.0).unwrap();
        // bisect the uniform scale k so that IoU(pred(k), target) = 1/e,
        // measuring IoU through the decoded boxes rather than the loss path
        let anchor = Point::new(0.0, 0.0);
        let target_box = decode_box(anchor, &target).unwrap();
        let iou_at = |k: f64| {
            let pred = LtrbPrediction::new(k, k, k, k).unwrap();
            let pred_box = decode_box(anchor, &pred).unwrap();
            geometry::iou(&pred_box, &target_box).unwrap()
        };
        let want = (-1.0f64).exp();
        let (mut lo, mut hi) = (1.0, 4.0);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if iou_at(mid) > want {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = (lo + hi) / 2.0;
        let pred = LtrbPrediction::new(k, k, k, k).unwrap();
        let (loss, _) = iou_loss(&pred, &target, &cfg).unwrap();
        assert!(approx(loss, 1.0, 1e-9), "loss {loss}");
    }

    #[test]
    fn iou_loss_gradient_matches_finite_differences() {
        let cfg = LossConfig::default();
        let pred = LtrbPrediction::new(4.0, 6.0, 3.0, 9.0).unwrap();
        let target = LtrbPrediction::new(5.0, 5.5, 4.5, 7.0).unwrap();
        let (_, grad) = iou_loss(&pred, &target, &cfg).unwrap();
        let h = 1e-5;
        for k in 0..4 {
            let mut up = pred.as_array();
            let mut down = pred.as_array();
            up[k] += h;
            down[k] -= h;
            let up = LtrbPrediction::new(up[0], up[1], up[2], up[3]).unwrap();
            let down = LtrbPrediction::new(down[0], down[1], down[2], down[3]).unwrap();
            let (lu, _) = iou_loss(&up, &target, &cfg).unwrap();
            let (ld, _) = iou_loss(&down, &target, &cfg).unwrap();
            let fd = (lu - ld) / (2.0 * h);
            assert!(rel_err(grad[k], fd) <= 1e-4, "component {k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn iou_loss_rejects_non_positive_components() {
        let cfg = LossConfig::default();
        let ok = LtrbPrediction::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let bad = LtrbPrediction {
            l: 0.0,
            r: 1.0,
            t: 1.0,
            b: 1.0,
        };
        assert!(matches!(
            iou_loss(&bad, &ok, &cfg),
            Err(Error::InvalidPrediction { .. })
        ));
    }

    #[test]
    fn giou_loss_examples() {
        let a = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let (loss, _) = giou_loss(&a, &a).unwrap();
        assert_eq!(loss, 0.0);

        // GIoU of this disjoint pair is -1/3
        let b = BBox::new(2.0, 0.0, 3.0, 1.0).unwrap();
        let (loss, _) = giou_loss(&a, &b).unwrap();
        assert!(approx(loss, 4.0 / 3.0, 1e-12));

        // loss >= 1 - iou always
        let c = BBox::new(0.5, 0.25, 1.5, 1.25).unwrap();
        let (loss, _) = giou_loss(&a, &c).unwrap();
        assert!(loss + 1e-12 >= 1.0 - geometry::iou(&a, &c).unwrap());
    }

    #[test]
    fn giou_loss_gradient_matches_finite_differences() {
        let pred = BBox::new(1.0, 2.0, 7.5, 9.0).unwrap();
        let target = BBox::new(2.5, 1.0, 6.0, 8.0).unwrap();
        let (_, grad) = giou_loss(&pred, &target).unwrap();
        let h = 1e-5;
        let corners = [pred.x_min, pred.y_min, pred.x_max, pred.y_max];
        for k in 0..4 {
            let mut up = corners;
            let mut down = corners;
            up[k] += h;
            down[k] -= h;
            let up = BBox::new(up[0], up[1], up[2], up[3]).unwrap();
            let down = BBox::new(down[0], down[1], down[2], down[3]).unwrap();
            let (lu, _) = giou_loss(&up, &target).unwrap();
            let (ld, _) = giou_loss(&down, &target).unwrap();
            let fd = (lu - ld) / (2.0 * h);
            assert!(rel_err(grad[k], fd) <= 1e-4, "corner {k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn decode_box_examples() {
        let pred = LtrbPrediction::new(1.0, 2.0, 3.0, 4.0).unwrap();
        let b = decode_box(Point::new(10.0, 10.0), &pred).unwrap();
        assert_eq!(b, BBox::new(9.0, 6.0, 12.0, 14.0).unwrap());
        assert!(b.contains(Point::new(10.0, 10.0)));

        // decode then measure side distances round-trips the prediction
        let d = geometry::side_distances(Point::new(10.0, 10.0), &b).unwrap();
        assert_eq!((d.l, d.r, d.t, d.b), (1.0, 2.0, 3.0, 4.0));
    }

    #[test]
    fn iou_loss_agrees_with_decoded_boxes() {
        let cfg = LossConfig::default();
        let p = Point::new(100.0, 50.0);
        let pred = LtrbPrediction::new(4.0, 11.0, 6.5, 3.0).unwrap();
        let target = LtrbPrediction::new(7.0, 8.0, 5.0, 5.0).unwrap();
        let via_boxes = geometry::iou(
            &decode_box(p, &pred).unwrap(),
            &decode_box(p, &target).unwrap(),
        )
        .unwrap();
        let (loss, _) = iou_loss(&pred, &target, &cfg).unwrap();
        assert!(approx(loss, -via_boxes.ln(), 1e-12));
    }

    #[test]
    fn total_loss_combines_and_normalizes() {
        let cfg = LossConfig::default();
        let zero = total_loss(&[0.0, 0.0], &[0.0], 1, &cfg).unwrap();
        assert_eq!(zero.total, 0.0);

        let terms = total_loss(&[0.5, 1.5], &[1.0], 2, &cfg).unwrap();
        assert!(approx(terms.total, 1.5, 1e-12));

        // doubling lambda doubles only the regression contribution
        let heavier = LossConfig {
            lambda: 2.0,
            ..LossConfig::default()
        };
        let terms2 = total_loss(&[0.5, 1.5], &[1.0], 2, &heavier).unwrap();
        assert!(approx(terms2.total - terms.total, 0.5, 1e-12));
    }

    #[test]
    fn total_loss_zero_positive_convention() {
        let cfg = LossConfig::default();
        let terms = total_loss(&[0.25, 0.75], &[3.0], 0, &cfg).unwrap();
        assert_eq!(terms.total, 1.0);
        assert_eq!(terms.regression, 3.0);
    }

    #[test]
    fn total_loss_rejects_negative_components() {
        let cfg = LossConfig::default();
        assert!(matches!(
            total_loss(&[1.0, -0.5], &[], 1, &cfg),
            Err(Error::InvalidInput { .. })
        ));
    }

    #[test]
    fn loss_config_is_validated() {
        let mut cfg = LossConfig::default();
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        cfg = LossConfig::default();
        cfg.gamma = -1.0;
        assert!(cfg.validate().is_err());
        cfg = LossConfig::default();
        cfg.epsilon = 0.1;
        assert!(cfg.validate().is_err());
        assert!(LossConfig::default().validate().is_ok());
    }
}
