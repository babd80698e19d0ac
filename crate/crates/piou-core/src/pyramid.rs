//! Feature-pyramid level configuration and image-space point grids.
//!
//! A level with index `l` has stride `2^l`; its feature-map locations project
//! back to the input image at the centers of stride-sized cells. Grid extents
//! use ceiling division so the rightmost/bottom image strip is always covered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point};

/// One pyramid level; `stride == 2^level_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PyramidLevel {
    pub level_index: u32,
    pub stride: u32,
}

impl PyramidLevel {
    pub fn new(level_index: u32) -> Result<Self> {
        if level_index < 1 || level_index > 31 {
            return Err(Error::InvalidConfig {
                reason: format!("level_index {level_index} outside [1, 31]"),
            });
        }
        Ok(Self {
            level_index,
            stride: 1 << level_index,
        })
    }

    /// Builds the level from its stride; the stride must be a power of two >= 2.
    pub fn from_stride(stride: u32) -> Result<Self> {
        if stride < 2 || !stride.is_power_of_two() {
            return Err(Error::InvalidConfig {
                reason: format!("stride {stride} is not a power of two >= 2"),
            });
        }
        Self::new(stride.trailing_zeros())
    }

    pub fn validate(&self) -> Result<()> {
        let canonical = Self::new(self.level_index)?;
        if self.stride != canonical.stride {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "stride {} does not equal 2^{}",
                    self.stride, self.level_index
                ),
            });
        }
        Ok(())
    }
}

/// Pyramid levels plus the image extent they tile.
///
/// `size_ranges`, when present, holds one `(min_size, max_size]` interval per
/// level; [`level_filter`] then restricts boxes to levels by their longest
/// side. By default there are no ranges and every level sees every box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidConfig {
    pub levels: Vec<PyramidLevel>,
    pub image_width: u32,
    pub image_height: u32,
    #[serde(default)]
    pub size_ranges: Option<Vec<(f64, f64)>>,
}

impl PyramidConfig {
    /// Config with the given strides and no per-level size ranges.
    pub fn from_strides(strides: &[u32], image_width: u32, image_height: u32) -> Result<Self> {
        let levels = strides
            .iter()
            .map(|&s| PyramidLevel::from_stride(s))
            .collect::<Result<Vec<_>>>()?;
        let cfg = Self {
            levels,
            image_width,
            image_height,
            size_ranges: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default detection pyramid: levels 3..=7, strides 8/16/32/64/128.
    pub fn standard(image_width: u32, image_height: u32) -> Result<Self> {
        Self::from_strides(&[8, 16, 32, 64, 128], image_width, image_height)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "image dimensions {}x{} must be positive",
                    self.image_width, self.image_height
                ),
            });
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidConfig {
                reason: "pyramid has no levels".to_string(),
            });
        }
        for level in &self.levels {
            level.validate()?;
        }
        for pair in self.levels.windows(2) {
            if pair[1].stride <= pair[0].stride {
                return Err(Error::InvalidConfig {
                    reason: format!(
                        "strides must be strictly increasing, got {} then {}",
                        pair[0].stride, pair[1].stride
                    ),
                });
            }
        }
        if let Some(ranges) = &self.size_ranges {
            if ranges.len() != self.levels.len() {
                return Err(Error::InvalidConfig {
                    reason: format!(
                        "{} size ranges for {} levels",
                        ranges.len(),
                        self.levels.len()
                    ),
                });
            }
            for &(lo, hi) in ranges {
                if !(lo >= 0.0 && hi > lo) {
                    return Err(Error::InvalidConfig {
                        reason: format!("size range ({lo}, {hi}] is empty or negative"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Grid extent `(cols, rows)` of one level: ceil(dim / stride).
    pub fn grid_shape(&self, level: &PyramidLevel) -> (u32, u32) {
        let s = level.stride;
        (self.image_width.div_ceil(s), self.image_height.div_ceil(s))
    }

    /// Total number of points over all levels.
    pub fn point_count(&self) -> u64 {
        self.levels
            .iter()
            .map(|level| {
                let (nx, ny) = self.grid_shape(level);
                nx as u64 * ny as u64
            })
            .sum()
    }

    fn level_position(&self, level_index: u32) -> Option<usize> {
        self.levels.iter().position(|l| l.level_index == level_index)
    }
}

/// A feature-grid location and its projection back to image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    pub level_index: u32,
    pub grid_i: u32,
    pub grid_j: u32,
    pub image_point: Point,
}

// Cell centers sit at stride/2 + i*stride. A partial cell at the right/bottom
// image strip uses the center of its clipped extent so every point stays
// strictly inside the image rectangle.
fn cell_center(index: u32, stride: f64, image_dim: f64) -> f64 {
    let start = index as f64 * stride;
    let end = (start + stride).min(image_dim);
    (start + end) / 2.0
}

/// Projects every feature-grid location of every level back to the image.
///
/// Order is deterministic: levels in config order, rows top to bottom,
/// columns left to right within each row.
pub fn generate_points(cfg: &PyramidConfig) -> Result<Vec<PointSample>> {
    cfg.validate()?;
    let w = cfg.image_width as f64;
    let h = cfg.image_height as f64;
    let mut points = Vec::with_capacity(cfg.point_count() as usize);
    for level in &cfg.levels {
        let stride = level.stride as f64;
        let (nx, ny) = cfg.grid_shape(level);
        for j in 0..ny {
            let y = cell_center(j, stride, h);
            for i in 0..nx {
                let x = cell_center(i, stride, w);
                points.push(PointSample {
                    level_index: level.level_index,
                    grid_i: i,
                    grid_j: j,
                    image_point: Point::new(x, y),
                });
            }
        }
    }
    Ok(points)
}

/// Whether `bbox` is regressed at the given level.
///
/// True when the config carries no size ranges; otherwise the box's
/// `max(l + r, t + b)` at its own center (its longest side) must fall in the
/// level's `(min_size, max_size]` interval.
pub fn level_filter(bbox: &BBox, cfg: &PyramidConfig, level_index: u32) -> Result<bool> {
    bbox.validate()?;
    let pos = cfg
        .level_position(level_index)
        .ok_or(Error::InvalidParameter {
            name: "level_index",
            value: level_index as f64,
            expected: "a level present in the pyramid config",
        })?;
    let Some(ranges) = &cfg.size_ranges else {
        return Ok(true);
    };
    let (min_size, max_size) = ranges[pos];
    let longest = bbox.width().max(bbox.height());
    Ok(longest > min_size && longest <= max_size)
}
