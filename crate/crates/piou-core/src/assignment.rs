//! Positive/negative label assignment for pyramid points against ground-truth
//! boxes.
//!
//! A point gets the metric value `v` of its best-matching ground truth among
//! the boxes that contain it (and pass the level filter), and is labeled
//! positive when `v >= T`. Points inside no box carry `v = 0` and are
//! negative. Ties on `v` go to the smaller box, then the lower ground-truth
//! index, so assignment is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, BBox};
use crate::ingestion::GroundTruth;
use crate::pyramid::{level_filter, PointSample, PyramidConfig};

/// The point-to-box metric an assignment rule is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    PseudoIou,
    Centerness,
    ScaledBox,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::PseudoIou => "pseudo-iou",
            Metric::Centerness => "centerness",
            Metric::ScaledBox => "scaled-box",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudo-iou" => Ok(Metric::PseudoIou),
            "centerness" => Ok(Metric::Centerness),
            "scaled-box" => Ok(Metric::ScaledBox),
            _ => Err(Error::InvalidInput {
                reason: format!("unknown metric {s:?} (expected pseudo-iou, centerness or scaled-box)"),
            }),
        }
    }
}

/// A metric plus its parameter: a threshold `T` in `[0, 1]` for the value
/// metrics, or a shrink factor `s` in `(0, 1]` for the scaled-box test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "metric", content = "param")]
pub enum AssignmentRule {
    PseudoIou { threshold: f64 },
    Centerness { threshold: f64 },
    ScaledBox { scale: f64 },
}

impl AssignmentRule {
    pub fn new(metric: Metric, param: f64) -> Result<Self> {
        let rule = match metric {
            Metric::PseudoIou => AssignmentRule::PseudoIou { threshold: param },
            Metric::Centerness => AssignmentRule::Centerness { threshold: param },
            Metric::ScaledBox => AssignmentRule::ScaledBox { scale: param },
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn metric(&self) -> Metric {
        match self {
            AssignmentRule::PseudoIou { .. } => Metric::PseudoIou,
            AssignmentRule::Centerness { .. } => Metric::Centerness,
            AssignmentRule::ScaledBox { .. } => Metric::ScaledBox,
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            AssignmentRule::PseudoIou { threshold } => threshold,
            AssignmentRule::Centerness { threshold } => threshold,
            AssignmentRule::ScaledBox { scale } => scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AssignmentRule::PseudoIou { threshold } | AssignmentRule::Centerness { threshold } => {
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::InvalidParameter {
                        name: "threshold",
                        value: threshold,
                        expected: "a value in [0, 1]",
                    });
                }
            }
            AssignmentRule::ScaledBox { scale } => {
                if !(scale > 0.0 && scale <= 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "scale",
                        value: scale,
                        expected: "a value in (0, 1]",
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-point label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "gt_index")]
pub enum PointLabel {
    Positive(usize),
    Negative,
}

impl PointLabel {
    pub fn is_positive(&self) -> bool {
        matches!(self, PointLabel::Positive(_))
    }

    pub fn gt_index(&self) -> Option<usize> {
        match self {
            PointLabel::Positive(idx) => Some(*idx),
            PointLabel::Negative => None,
        }
    }
}

/// One point's assignment record: the label and the metric value behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignedPoint {
    pub label: PointLabel,
    pub value: f64,
}

/// The full assignment of one scene, parallel to the input point list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub points: Vec<AssignedPoint>,
    /// Length of the ground-truth list the assignment was computed from.
    pub gt_count: usize,
    /// Ground truths that fell entirely outside the image and were ignored.
    pub dropped_gts: u64,
}

/// Counts summarizing one assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentStats {
    pub total_points: u64,
    pub positives: u64,
    pub negatives: u64,
    /// Number of selected positive samples (equals `positives`).
    pub n_pos: u64,
    pub per_gt_positives: Vec<u64>,
    /// Ground truths (excluding dropped ones) that received no positive point.
    pub zero_positive_gts: u64,
    pub gt_count: u64,
    pub dropped_gts: u64,
}

// A ground truth as seen by the assigner: clipped to the image, with its
// level-filter verdict precomputed per pyramid level.
struct ActiveGt {
    bbox: BBox,
    area: f64,
    level_pass: Vec<bool>,
}

fn prepare_gts(
    gts: &[GroundTruth],
    cfg: &PyramidConfig,
) -> Result<(Vec<Option<ActiveGt>>, u64)> {
    let mut dropped = 0u64;
    let mut active = Vec::with_capacity(gts.len());
    for gt in gts {
        gt.bbox.validate()?;
        match gt
            .bbox
            .clip_to_image(cfg.image_width as f64, cfg.image_height as f64)
        {
            Some(bbox) => {
                let level_pass = cfg
                    .levels
                    .iter()
                    .map(|level| level_filter(&bbox, cfg, level.level_index))
                    .collect::<Result<Vec<bool>>>()?;
                active.push(Some(ActiveGt {
                    bbox,
                    area: bbox.area(),
                    level_pass,
                }));
            }
            None => {
                dropped += 1;
                active.push(None);
            }
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} ground truths entirely outside the image");
    }
    Ok((active, dropped))
}

/// Labels every point against the ground truths under `rule`.
///
/// Boxes are clipped to the image first; boxes without any in-image area are
/// dropped (counted in the result). Points must come from `cfg`.
pub fn assign(
    points: &[PointSample],
    gts: &[GroundTruth],
    rule: &AssignmentRule,
    cfg: &PyramidConfig,
) -> Result<Assignment> {
    rule.validate()?;
    cfg.validate()?;
    let (w, h) = (cfg.image_width as f64, cfg.image_height as f64);
    for p in points {
        let inside = p.image_point.x >= 0.0
            && p.image_point.x < w
            && p.image_point.y >= 0.0
            && p.image_point.y < h;
        let known_level = cfg.levels.iter().any(|l| l.level_index == p.level_index);
        if !inside || !known_level {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "point ({}, {}) at level {} does not belong to a {}x{} pyramid",
                    p.image_point.x, p.image_point.y, p.level_index, cfg.image_width, cfg.image_height
                ),
            });
        }
    }

    let (active, dropped_gts) = prepare_gts(gts, cfg)?;
    let mut assigned = Vec::with_capacity(points.len());
    for point in points {
        let level_pos = cfg
            .levels
            .iter()
            .position(|l| l.level_index == point.level_index)
            .expect("level presence checked above");
        let record = match *rule {
            AssignmentRule::PseudoIou { threshold } => assign_by_value(
                point,
                &active,
                level_pos,
                threshold,
                |p, b| geometry::pseudo_iou(p, b),
            )?,
            AssignmentRule::Centerness { threshold } => assign_by_value(
                point,
                &active,
                level_pos,
                threshold,
                |p, b| geometry::centerness(p, b),
            )?,
            AssignmentRule::ScaledBox { scale } => {
                assign_by_membership(point, &active, level_pos, scale)?
            }
        };
        assigned.push(record);
    }

    Ok(Assignment {
        points: assigned,
        gt_count: gts.len(),
        dropped_gts,
    })
}

fn assign_by_value(
    point: &PointSample,
    gts: &[Option<ActiveGt>],
    level_pos: usize,
    threshold: f64,
    metric: impl Fn(crate::geometry::Point, &BBox) -> Result<f64>,
) -> Result<AssignedPoint> {
    let p = point.image_point;
    let mut best: Option<(f64, f64, usize)> = None; // (value, area, gt index)
    for (idx, gt) in gts.iter().enumerate() {
        let Some(gt) = gt else { continue };
        if !gt.level_pass[level_pos] || !gt.bbox.contains(p) {
            continue;
        }
        let value = metric(p, &gt.bbox)?;
        let better = match best {
            None => true,
            Some((bv, ba, _)) => value > bv || (value == bv && gt.area < ba),
        };
        if better {
            best = Some((value, gt.area, idx));
        }
    }
    Ok(match best {
        Some((value, _, idx)) if value >= threshold => AssignedPoint {
            label: PointLabel::Positive(idx),
            value,
        },
        Some((value, _, _)) => AssignedPoint {
            label: PointLabel::Negative,
            value,
        },
        None => AssignedPoint {
            label: PointLabel::Negative,
            value: 0.0,
        },
    })
}

fn assign_by_membership(
    point: &PointSample,
    gts: &[Option<ActiveGt>],
    level_pos: usize,
    scale: f64,
) -> Result<AssignedPoint> {
    let p = point.image_point;
    let mut best: Option<(f64, usize)> = None; // (area, gt index): smallest box wins
    for (idx, gt) in gts.iter().enumerate() {
        let Some(gt) = gt else { continue };
        if !gt.level_pass[level_pos] {
            continue;
        }
        if geometry::in_scaled_box(p, &gt.bbox, scale)? {
            let better = match best {
                None => true,
                Some((ba, _)) => gt.area < ba,
            };
            if better {
                best = Some((gt.area, idx));
            }
        }
    }
    Ok(match best {
        Some((_, idx)) => AssignedPoint {
            label: PointLabel::Positive(idx),
            value: 1.0,
        },
        None => AssignedPoint {
            label: PointLabel::Negative,
            value: 0.0,
        },
    })
}

/// Exact counts over an assignment; `gts` must be the list it was built from.
pub fn compute_stats(assignment: &Assignment, gts: &[GroundTruth]) -> Result<AssignmentStats> {
    if assignment.gt_count != gts.len() {
        return Err(Error::Inconsistent {
            reason: format!(
                "assignment was computed from {} ground truths, got {}",
                assignment.gt_count,
                gts.len()
            ),
        });
    }
    let mut per_gt_positives = vec![0u64; gts.len()];
    let mut positives = 0u64;
    for record in &assignment.points {
        if let PointLabel::Positive(idx) = record.label {
            if idx >= gts.len() {
                return Err(Error::Inconsistent {
                    reason: format!("matched gt_index {idx} out of range"),
                });
            }
            positives += 1;
            per_gt_positives[idx] += 1;
        }
    }
    let total_points = assignment.points.len() as u64;
    // dropped boxes trivially have zero positives; they are not counted here
    let zero_positive_gts = per_gt_positives
        .iter()
        .filter(|&&n| n == 0)
        .count() as u64
        - assignment.dropped_gts;
    Ok(AssignmentStats {
        total_points,
        positives,
        negatives: total_points - positives,
        n_pos: positives,
        per_gt_positives,
        zero_positive_gts,
        gt_count: gts.len() as u64,
        dropped_gts: assignment.dropped_gts,
    })
}

/// Runs `assign` + `compute_stats` once per parameter value.
///
/// Parameters must be strictly ascending and inside the metric's legal range.
/// For the value metrics the positive set shrinks as the threshold grows.
pub fn sweep_thresholds(
    points: &[PointSample],
    gts: &[GroundTruth],
    metric: Metric,
    params: &[f64],
    cfg: &PyramidConfig,
) -> Result<Vec<AssignmentStats>> {
    if params.is_empty() {
        return Err(Error::InvalidParameter {
            name: "thresholds",
            value: 0.0,
            expected: "a non-empty ascending list",
        });
    }
    for pair in params.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(Error::InvalidParameter {
                name: "thresholds",
                value: pair[1],
                expected: "strictly ascending values",
            });
        }
    }
    params
        .iter()
        .map(|&param| {
            let rule = AssignmentRule::new(metric, param)?;
            let assignment = assign(points, gts, &rule, cfg)?;
            compute_stats(&assignment, gts)
        })
        .collect()
}
