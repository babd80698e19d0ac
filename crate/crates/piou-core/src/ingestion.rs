//! Ground-truth loading: COCO-style JSON, VOC-style XML, and seeded synthetic
//! scenes. Image files are never read; only annotation geometry matters here.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Version tag written into the normalized SceneSet JSON.
pub const SCENE_SCHEMA_VERSION: u32 = 1;

/// One annotated object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub bbox: BBox,
    pub category_id: u32,
    pub image_id: u64,
}

/// An image's extent and its annotations. Pixel data is never loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneImage {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub ground_truths: Vec<GroundTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u32,
    pub name: String,
}

/// Normalized annotation set: images, their boxes, and a category table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSet {
    pub schema_version: u32,
    pub images: Vec<SceneImage>,
    pub categories: Vec<Category>,
}

impl SceneSet {
    pub fn new(images: Vec<SceneImage>, categories: Vec<Category>) -> Self {
        Self {
            schema_version: SCENE_SCHEMA_VERSION,
            images,
            categories,
        }
    }

    pub fn total_boxes(&self) -> usize {
        self.images.iter().map(|img| img.ground_truths.len()).sum()
    }

    /// Checks referential integrity: annotations must point at their parent
    /// image and at a known category, and every box must be valid.
    pub fn validate(&self) -> Result<()> {
        for img in &self.images {
            if img.width == 0 || img.height == 0 {
                return Err(Error::InvalidConfig {
                    reason: format!("image {} has empty extent", img.id),
                });
            }
            for gt in &img.ground_truths {
                gt.bbox.validate()?;
                if gt.image_id != img.id {
                    return Err(Error::Inconsistent {
                        reason: format!(
                            "annotation references image {} but is stored under image {}",
                            gt.image_id, img.id
                        ),
                    });
                }
                if !self.categories.iter().any(|c| c.id == gt.category_id) {
                    return Err(Error::Inconsistent {
                        reason: format!("annotation references unknown category {}", gt.category_id),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let set: SceneSet = serde_json::from_str(json)?;
        if set.schema_version != SCENE_SCHEMA_VERSION {
            return Err(Error::Schema {
                context: "scene set".to_string(),
                reason: format!(
                    "schema_version {} unsupported (expected {})",
                    set.schema_version, SCENE_SCHEMA_VERSION
                ),
            });
        }
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Counts of annotations that were altered or excluded during loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub zero_area_dropped: u64,
    pub out_of_image_dropped: u64,
    pub clipped: u64,
    pub crowd_dropped: u64,
    pub difficult_dropped: u64,
}

// Clips a raw box to its image; returns None (and bumps the right counter)
// when nothing of positive area remains.
fn normalize_box(raw: BBox, width: u32, height: u32, report: &mut IngestReport) -> Option<BBox> {
    if !(raw.width() > 0.0) || !(raw.height() > 0.0) {
        report.zero_area_dropped += 1;
        return None;
    }
    match raw.clip_to_image(width as f64, height as f64) {
        Some(clipped) => {
            if clipped != raw {
                report.clipped += 1;
            }
            Some(clipped)
        }
        None => {
            report.out_of_image_dropped += 1;
            None
        }
    }
}

// ---------------------------------------------------------------------------
// COCO-style JSON
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct CocoDataset {
    #[serde(default)]
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: u64,
    category_id: u32,
    bbox: [f64; 4],
    #[serde(default)]
    iscrowd: u8,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u32,
    name: String,
}

/// Loads a COCO-style annotation JSON (`images` / `annotations` / `categories`).
///
/// `bbox` entries are `[x, y, width, height]` and are converted to corner
/// form. Crowd, zero-area, and fully out-of-image annotations are dropped and
/// counted in the report; partially outside boxes are clipped.
pub fn load_coco(path: &Path) -> Result<(SceneSet, IngestReport)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: CocoDataset = serde_json::from_str(&text)?;

    let mut report = IngestReport::default();
    let mut images: Vec<SceneImage> = raw
        .images
        .iter()
        .map(|img| SceneImage {
            id: img.id,
            width: img.width,
            height: img.height,
            ground_truths: Vec::new(),
        })
        .collect();
    let index_of: BTreeMap<u64, usize> = images
        .iter()
        .enumerate()
        .map(|(idx, img)| (img.id, idx))
        .collect();

    for ann in &raw.annotations {
        let &idx = index_of
            .get(&ann.image_id)
            .ok_or_else(|| Error::Inconsistent {
                reason: format!("annotation references missing image {}", ann.image_id),
            })?;
        if !raw.categories.iter().any(|c| c.id == ann.category_id) {
            return Err(Error::Inconsistent {
                reason: format!("annotation references missing category {}", ann.category_id),
            });
        }
        if ann.iscrowd != 0 {
            report.crowd_dropped += 1;
            continue;
        }
        let [x, y, w, h] = ann.bbox;
        let raw_box = BBox {
            x_min: x,
            y_min: y,
            x_max: x + w,
            y_max: y + h,
        };
        let img = &mut images[idx];
        if let Some(bbox) = normalize_box(raw_box, img.width, img.height, &mut report) {
            img.ground_truths.push(GroundTruth {
                bbox,
                category_id: ann.category_id,
                image_id: ann.image_id,
            });
        }
    }

    let categories = raw
        .categories
        .into_iter()
        .map(|c| Category {
            id: c.id,
            name: c.name,
        })
        .collect();
    let set = SceneSet::new(images, categories);
    set.validate()?;
    report_dropped(&report);
    Ok((set, report))
}

// ---------------------------------------------------------------------------
// VOC-style XML
// ---------------------------------------------------------------------------

/// Loads VOC-style XML annotations from a single file or a directory of
/// `.xml` files (read in filename order).
///
/// VOC corners are 1-based pixels; `xmin`/`ymin` are shifted by -1 to the
/// continuous 0-based convention. Objects marked `difficult` are excluded.
pub fn load_voc(path: &Path) -> Result<(SceneSet, IngestReport)> {
    load_voc_with_options(path, false)
}

pub fn load_voc_with_options(path: &Path, include_difficult: bool) -> Result<(SceneSet, IngestReport)> {
    let mut files = Vec::new();
    if path.is_dir() {
        let entries = fs::read_dir(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            let p = entry.path();
            if p.extension().is_some_and(|ext| ext == "xml") {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }

    let mut report = IngestReport::default();
    let mut images = Vec::new();
    let mut names: Vec<String> = Vec::new();
    // (image index, category name, raw box) until category ids are settled
    let mut pending: Vec<(usize, String, BBox)> = Vec::new();

    for (file_idx, file) in files.iter().enumerate() {
        let text = fs::read_to_string(file).map_err(|source| Error::Io {
            path: file.display().to_string(),
            source,
        })?;
        let doc = roxmltree::Document::parse(&text)?;
        let root = doc.root_element();
        let context = file.display().to_string();

        let size = root
            .children()
            .find(|n| n.has_tag_name("size"))
            .ok_or_else(|| Error::Schema {
                context: context.clone(),
                reason: "missing <size> element".to_string(),
            })?;
        let width: u32 = read_xml_number(&size, "width", &context)?;
        let height: u32 = read_xml_number(&size, "height", &context)?;

        let image_id = file_idx as u64 + 1;
        images.push(SceneImage {
            id: image_id,
            width,
            height,
            ground_truths: Vec::new(),
        });

        for object in root.children().filter(|n| n.has_tag_name("object")) {
            let name = child_text(&object, "name").ok_or_else(|| Error::Schema {
                context: context.clone(),
                reason: "object without <name>".to_string(),
            })?;
            let difficult = child_text(&object, "difficult")
                .map(|t| t.trim() != "0")
                .unwrap_or(false);
            if difficult && !include_difficult {
                report.difficult_dropped += 1;
                continue;
            }
            let bndbox = object
                .children()
                .find(|n| n.has_tag_name("bndbox"))
                .ok_or_else(|| Error::Schema {
                    context: context.clone(),
                    reason: "object without <bndbox>".to_string(),
                })?;
            let xmin: f64 = read_xml_number(&bndbox, "xmin", &context)?;
            let ymin: f64 = read_xml_number(&bndbox, "ymin", &context)?;
            let xmax: f64 = read_xml_number(&bndbox, "xmax", &context)?;
            let ymax: f64 = read_xml_number(&bndbox, "ymax", &context)?;
            let raw_box = BBox {
                x_min: xmin - 1.0,
                y_min: ymin - 1.0,
                x_max: xmax,
                y_max: ymax,
            };
            if let Some(bbox) = normalize_box(raw_box, width, height, &mut report) {
                if !names.contains(&name) {
                    names.push(name.clone());
                }
                pending.push((images.len() - 1, name, bbox));
            }
        }
    }

    // Deterministic category ids: sorted names, 1-based.
    names.sort();
    let categories: Vec<Category> = names
        .iter()
        .enumerate()
        .map(|(i, name)| Category {
            id: i as u32 + 1,
            name: name.clone(),
        })
        .collect();
    for (img_idx, name, bbox) in pending {
        let category_id = categories
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.id)
            .expect("category table covers every seen name");
        let image_id = images[img_idx].id;
        images[img_idx].ground_truths.push(GroundTruth {
            bbox,
            category_id,
            image_id,
        });
    }

    let set = SceneSet::new(images, categories);
    set.validate()?;
    report_dropped(&report);
    Ok((set, report))
}

fn child_text(node: &roxmltree::Node, tag: &str) -> Option<String> {
    node.children()
        .find(|n| n.has_tag_name(tag))
        .and_then(|n| n.text())
        .map(|t| t.trim().to_string())
}

fn read_xml_number<T: std::str::FromStr>(
    node: &roxmltree::Node,
    tag: &str,
    context: &str,
) -> Result<T> {
    let text = child_text(node, tag).ok_or_else(|| Error::Schema {
        context: context.to_string(),
        reason: format!("missing <{tag}> element"),
    })?;
    text.parse().map_err(|_| Error::Schema {
        context: context.to_string(),
        reason: format!("cannot parse <{tag}> value {text:?}"),
    })
}

fn report_dropped(report: &IngestReport) {
    let dropped = report.zero_area_dropped
        + report.out_of_image_dropped
        + report.crowd_dropped
        + report.difficult_dropped;
    if dropped > 0 {
        log::warn!(
            "dropped {dropped} annotations (zero-area {}, out-of-image {}, crowd {}, difficult {})",
            report.zero_area_dropped,
            report.out_of_image_dropped,
            report.crowd_dropped,
            report.difficult_dropped
        );
    }
}

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

/// Parameters for reproducible synthetic scene generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub image_width: u32,
    pub image_height: u32,
    /// Inclusive range of boxes per image.
    pub boxes_per_image: (u32, u32),
    /// Box side lengths are drawn log-uniformly from this range (pixels).
    pub box_size: (f64, f64),
    pub category_count: u32,
}

impl Default for SynthParams {
    fn default() -> Self {
        // VOC-like extent and object scale
        Self {
            image_width: 500,
            image_height: 375,
            boxes_per_image: (1, 6),
            box_size: (16.0, 180.0),
            category_count: 20,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::InvalidParameter {
                name: "image_size",
                value: self.image_width.min(self.image_height) as f64,
                expected: "positive image dimensions",
            });
        }
        if self.boxes_per_image.0 > self.boxes_per_image.1 {
            return Err(Error::InvalidParameter {
                name: "boxes_per_image",
                value: self.boxes_per_image.0 as f64,
                expected: "min <= max",
            });
        }
        let (lo, hi) = self.box_size;
        let fits = lo > 0.0 && hi >= lo && hi <= self.image_width.min(self.image_height) as f64;
        if !fits {
            return Err(Error::InvalidParameter {
                name: "box_size",
                value: hi,
                expected: "0 < min <= max <= min(image_width, image_height)",
            });
        }
        if self.category_count == 0 {
            return Err(Error::InvalidParameter {
                name: "category_count",
                value: 0.0,
                expected: "at least one category",
            });
        }
        Ok(())
    }
}

fn random_offset(rng: &mut ChaCha8Rng, span: f64) -> f64 {
    if span > 0.0 {
        rng.random_range(0.0..span)
    } else {
        0.0
    }
}

/// Generates `count` synthetic scenes; identical seeds give identical sets.
pub fn synth_scenes(seed: u64, count: u32, params: &SynthParams) -> Result<SceneSet> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = params.box_size;
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let w_img = params.image_width as f64;
    let h_img = params.image_height as f64;

    let mut images = Vec::with_capacity(count as usize);
    for n in 0..count {
        let image_id = n as u64 + 1;
        let box_count = rng.random_range(params.boxes_per_image.0..=params.boxes_per_image.1);
        let mut ground_truths = Vec::with_capacity(box_count as usize);
        for _ in 0..box_count {
            let w = if ln_hi > ln_lo {
                rng.random_range(ln_lo..ln_hi).exp()
            } else {
                lo
            };
            let h = if ln_hi > ln_lo {
                rng.random_range(ln_lo..ln_hi).exp()
            } else {
                lo
            };
            let x_min = random_offset(&mut rng, w_img - w);
            let y_min = random_offset(&mut rng, h_img - h);
            let category_id = rng.random_range(1..=params.category_count);
            ground_truths.push(GroundTruth {
                bbox: BBox {
                    x_min,
                    y_min,
                    x_max: x_min + w,
                    y_max: y_min + h,
                },
                category_id,
                image_id,
            });
        }
        images.push(SceneImage {
            id: image_id,
            width: params.image_width,
            height: params.image_height,
            ground_truths,
        });
    }

    let categories = (1..=params.category_count)
        .map(|id| Category {
            id,
            name: format!("synthetic_{id:02}"),
        })
        .collect();
    Ok(SceneSet::new(images, categories))
}
