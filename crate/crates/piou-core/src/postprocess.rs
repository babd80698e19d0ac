//! Inference-side post-processing: score thresholding and class-wise greedy
//! non-maximum suppression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

/// A scored box with its category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub category_id: u32,
}

impl Detection {
    pub fn new(bbox: BBox, score: f64, category_id: u32) -> Result<Self> {
        let d = Self {
            bbox,
            score,
            category_id,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidParameter {
                name: "score",
                value: self.score,
                expected: "a value in [0, 1]",
            });
        }
        Ok(())
    }
}

/// Keeps detections with `score >= threshold`, preserving input order.
pub fn score_filter(detections: &[Detection], threshold: f64) -> Vec<Detection> {
    detections
        .iter()
        .filter(|d| d.score >= threshold)
        .copied()
        .collect()
}

/// Class-wise greedy non-maximum suppression.
///
/// Repeatedly keeps the highest-scoring remaining detection (ties broken by
/// input index) and removes others of the same category whose IoU with it is
/// strictly greater than `iou_threshold`. The output is sorted by descending
/// score with the same tie-break.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Result<Vec<Detection>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::InvalidParameter {
            name: "iou_threshold",
            value: iou_threshold,
            expected: "a value in [0, 1]",
        });
    }
    for d in detections {
        d.validate()?;
    }

    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .score
            .partial_cmp(&detections[a].score)
            .expect("scores validated finite")
            .then(a.cmp(&b))
    });

    let mut suppressed = vec![false; detections.len()];
    let mut keep = Vec::new();
    for (rank, &idx) in order.iter().enumerate() {
        if suppressed[idx] {
            continue;
        }
        let kept = &detections[idx];
        keep.push(*kept);
        for &other_idx in &order[rank + 1..] {
            if suppressed[other_idx] {
                continue;
            }
            let other = &detections[other_idx];
            if other.category_id == kept.category_id
                && iou(&kept.bbox, &other.bbox)? > iou_threshold
            {
                suppressed[other_idx] = true;
            }
        }
    }
    Ok(keep)
}
