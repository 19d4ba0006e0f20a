//! Domain types for annotated street-view scenes: taxonomy, boxes, records,
//! plus JSON-lines ingestion, stratified splitting and minority oversampling.

mod io;
mod split;

pub use io::{parse_scenes, parse_scenes_strict, read_scenes, serialize_scenes, write_scenes, ParseOutcome, Units};
pub use split::{rebalance, split_dataset, DatasetSplit};

use crate::error::{Error, Result};

/// Slack allowed on `x + w <= 1` and `y + h <= 1`.
pub const GEOMETRY_SLACK: f64 = 1e-6;

/// Fixed building and land-use label sets. Indices are stable across runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Taxonomy;

impl Taxonomy {
    pub const BUILDINGS: [&'static str; 8] =
        ["apartment", "church", "garage", "house", "industrial", "office building", "retail", "roof"];

    pub const LANDUSES: [&'static str; 4] = ["commercial", "residential", "public", "industrial"];

    pub const NUM_BUILDINGS: usize = Self::BUILDINGS.len();
    pub const NUM_LANDUSES: usize = Self::LANDUSES.len();

    pub fn building_index(name: &str) -> Result<usize> {
        Self::BUILDINGS
            .iter()
            .position(|b| *b == name)
            .ok_or_else(|| Error::UnknownCategory { kind: "building", name: name.to_string() })
    }

    pub fn landuse_index(name: &str) -> Result<usize> {
        Self::LANDUSES
            .iter()
            .position(|b| *b == name)
            .ok_or_else(|| Error::UnknownCategory { kind: "land-use", name: name.to_string() })
    }

    pub fn building_name(index: usize) -> &'static str {
        Self::BUILDINGS[index]
    }

    pub fn landuse_name(index: usize) -> &'static str {
        Self::LANDUSES[index]
    }
}

/// One detected or annotated building in normalized image coordinates.
///
/// `(x, y)` is the top-left corner, `w`/`h` the extent, all divided by the
/// image width and height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub category: usize,
    pub score: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(category: usize, score: f64, x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { category, score, x, y, w, h }
    }

    /// Centroid `(x + w/2, y + h/2)`.
    pub fn centroid(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Returns a description of every violated invariant, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.category >= Taxonomy::NUM_BUILDINGS {
            out.push(format!("category index {} out of range", self.category));
        }
        if !(0.0..=1.0).contains(&self.score) {
            out.push(format!("score out of range: {}", self.score));
        }
        if !(self.x >= 0.0 && self.y >= 0.0) {
            out.push(format!("negative position ({}, {})", self.x, self.y));
        }
        if !(self.w > 0.0 && self.w <= 1.0 && self.h > 0.0 && self.h <= 1.0) {
            out.push(format!("extent out of range ({} x {})", self.w, self.h));
        }
        if self.x + self.w > 1.0 + GEOMETRY_SLACK || self.y + self.h > 1.0 + GEOMETRY_SLACK {
            out.push("box extends past the image border".to_string());
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }

    /// Pixel-space `(x, y, w, h)` for an image of `width` x `height`.
    pub fn to_pixels(&self, width: u32, height: u32) -> (f64, f64, f64, f64) {
        let (wf, hf) = (width as f64, height as f64);
        (self.x * wf, self.y * hf, self.w * wf, self.h * hf)
    }
}

/// Metadata of one street-view image.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub landuse: Option<usize>,
    pub width: u32,
    pub height: u32,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub boxes: Vec<BBox>,
}

impl SceneRecord {
    pub fn validate(&self) -> Result<()> {
        let mut reasons = Vec::new();
        if self.width == 0 || self.height == 0 {
            reasons.push(format!("image size must be positive, got {}x{}", self.width, self.height));
        }
        if let Some(l) = self.landuse {
            if l >= Taxonomy::NUM_LANDUSES {
                reasons.push(format!("land-use index {l} out of range"));
            }
        }
        if let Some(lat) = self.lat {
            if !(-90.0..=90.0).contains(&lat) {
                reasons.push(format!("latitude out of range: {lat}"));
            }
        }
        if let Some(lon) = self.lon {
            if !(-180.0..=180.0).contains(&lon) {
                reasons.push(format!("longitude out of range: {lon}"));
            }
        }
        for (i, b) in self.boxes.iter().enumerate() {
            for v in b.violations() {
                reasons.push(format!("box {i}: {v}"));
            }
        }
        if reasons.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidRecord { scene_id: self.scene_id.clone(), reason: reasons.join("; ") })
        }
    }

    pub fn label(&self) -> Result<usize> {
        self.landuse.ok_or_else(|| Error::Unlabeled(self.scene_id.clone()))
    }

    pub fn geo(&self) -> Option<(f64, f64)> {
        self.lat.zip(self.lon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taxonomy_is_stable() {
        assert_eq!(Taxonomy::NUM_BUILDINGS, 8);
        assert_eq!(Taxonomy::NUM_LANDUSES, 4);
        assert_eq!(Taxonomy::building_index("house").unwrap(), 3);
        assert_eq!(Taxonomy::building_index("office building").unwrap(), 5);
        assert_eq!(Taxonomy::landuse_index("industrial").unwrap(), 3);
        assert!(Taxonomy::building_index("castle").is_err());
        let mut b = Taxonomy::BUILDINGS.to_vec();
        b.dedup();
        assert_eq!(b.len(), 8);
    }

    #[test]
    fn box_invariants() {
        assert!(BBox::new(0, 0.5, 0.0, 0.0, 1.0, 1.0).is_valid());
        assert!(BBox::new(0, 0.5, 0.5, 0.5, 0.5 + 5e-7, 0.5).is_valid());
        assert!(!BBox::new(0, 1.7, 0.1, 0.1, 0.1, 0.1).is_valid());
        assert!(!BBox::new(0, 0.5, 0.6, 0.1, 0.5, 0.1).is_valid());
        assert!(!BBox::new(0, 0.5, 0.1, 0.1, 0.0, 0.1).is_valid());
        assert!(!BBox::new(8, 0.5, 0.1, 0.1, 0.1, 0.1).is_valid());
    }

    #[test]
    fn record_rejects_bad_geo() {
        let rec = SceneRecord {
            scene_id: "a".into(),
            landuse: Some(0),
            width: 10,
            height: 10,
            lat: Some(91.0),
            lon: Some(0.0),
            boxes: vec![],
        };
        assert!(rec.validate().is_err());
    }
}
