//! Label-assignment toolkit for anchor-free object detection.
//!
//! The crate computes the pseudo-IoU metric between feature-map points and
//! ground-truth boxes, assigns positive/negative training labels under
//! configurable rules (pseudo-IoU threshold, centerness threshold, scaled-box
//! membership), and ships the surrounding pieces needed to study assignment
//! behavior without training a network: pyramid point grids, focal/IoU/GIoU
//! loss math with analytic gradients, score filtering and NMS, and COCO/VOC/
//! synthetic annotation ingestion.

pub mod assignment;
pub mod error;
pub mod geometry;
pub mod ingestion;
pub mod losses;
pub mod postprocess;
pub mod pyramid;

pub use error::{Error, Result};
