//! Context encoding of detected buildings.
//!
//! Each box becomes a semantic vector: the one-hot vector of its building
//! category with the one replaced by the detection score. A scene becomes a
//! fixed-length sequence of such vectors, zero-padded at the tail. The
//! co-occurrence encoder orders boxes by score only; the layout encoder puts
//! the most salient box first (largest `w * h * score`) and the rest by
//! increasing centroid distance to it.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scene::{BBox, SceneRecord, Taxonomy};

/// Width of a semantic vector, one slot per building category.
pub const SEMANTIC_DIM: usize = Taxonomy::NUM_BUILDINGS;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SemanticVector(pub [f64; SEMANTIC_DIM]);

impl SemanticVector {
    pub const ZERO: Self = Self([0.0; SEMANTIC_DIM]);

    pub fn from_box(b: &BBox) -> Self {
        let mut v = [0.0; SEMANTIC_DIM];
        v[b.category] = b.score;
        Self(v)
    }

    pub fn is_padding(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn values(&self) -> &[f64; SEMANTIC_DIM] {
        &self.0
    }
}

/// Score-weighted one-hot vector for a single box.
pub fn semantic_vector(b: &BBox) -> SemanticVector {
    SemanticVector::from_box(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum EncoderKind {
    #[serde(rename = "cooc")]
    #[value(name = "cooc")]
    Cooccurrence,
    #[serde(rename = "layout")]
    #[value(name = "layout")]
    Layout,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 2] = [EncoderKind::Cooccurrence, EncoderKind::Layout];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Cooccurrence => "cooc",
            EncoderKind::Layout => "layout",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Sequence length `l`.
    pub length: usize,
    /// Boxes scoring below this are ignored.
    pub include_threshold: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { length: 25, include_threshold: 0.0 }
    }
}

impl EncoderConfig {
    pub fn with_length(length: usize) -> Self {
        Self { length, ..Self::default() }
    }
}

/// Fixed-length encoder output fed to the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMetadata {
    pub sequence: Vec<SemanticVector>,
    pub kind: EncoderKind,
    pub reversed: bool,
}

impl SceneMetadata {
    fn padded(mut sequence: Vec<SemanticVector>, length: usize, kind: EncoderKind) -> Self {
        sequence.truncate(length);
        sequence.resize(length, SemanticVector::ZERO);
        Self { sequence, kind, reversed: false }
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn nonzero_count(&self) -> usize {
        self.sequence.iter().filter(|v| !v.is_padding()).count()
    }
}

/// A box with the intermediate quantities of the layout ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedBox {
    pub bbox: BBox,
    /// `w * h * score`
    pub area_score: f64,
    pub centroid: (f64, f64),
    /// Centroid distance to the leading box; `None` for the leader itself.
    pub distance: Option<f64>,
    /// Position of the box in the input list.
    pub input_index: usize,
}

fn included<'a>(boxes: &'a [BBox], cfg: &EncoderConfig) -> impl Iterator<Item = (usize, &'a BBox)> {
    let threshold = cfg.include_threshold;
    boxes.iter().enumerate().filter(move |(_, b)| b.score >= threshold)
}

pub fn encode_cooccurrence(boxes: &[BBox], cfg: &EncoderConfig) -> SceneMetadata {
    let mut kept: Vec<(usize, &BBox)> = included(boxes, cfg).collect();
    kept.sort_by(|(ia, a), (ib, b)| b.score.total_cmp(&a.score).then(a.category.cmp(&b.category)).then(ia.cmp(ib)));
    let seq = kept.into_iter().map(|(_, b)| SemanticVector::from_box(b)).collect();
    SceneMetadata::padded(seq, cfg.length, EncoderKind::Cooccurrence)
}

/// Orders boxes for layout encoding: leader first, then by distance to it.
pub fn rank_layout(boxes: &[BBox], cfg: &EncoderConfig) -> Vec<RankedBox> {
    let mut ranked: Vec<RankedBox> = included(boxes, cfg)
        .map(|(i, b)| RankedBox {
            bbox: *b,
            area_score: b.w * b.h * b.score,
            centroid: b.centroid(),
            distance: None,
            input_index: i,
        })
        .collect();
    if ranked.is_empty() {
        return ranked;
    }

    let leader = (0..ranked.len())
        .min_by(|&i, &j| {
            let (a, b) = (&ranked[i], &ranked[j]);
            b.area_score
                .total_cmp(&a.area_score)
                .then(b.bbox.score.total_cmp(&a.bbox.score))
                .then(a.input_index.cmp(&b.input_index))
        })
        .expect("non-empty");
    ranked.swap(0, leader);
    let (lx, ly) = ranked[0].centroid;
    for r in &mut ranked[1..] {
        let (x, y) = r.centroid;
        r.distance = Some(((x - lx).powi(2) + (y - ly).powi(2)).sqrt());
    }
    ranked[1..].sort_by(layout_order);
    ranked
}

fn layout_order(a: &RankedBox, b: &RankedBox) -> Ordering {
    let (da, db) = (a.distance.unwrap_or(0.0), b.distance.unwrap_or(0.0));
    da.total_cmp(&db).then(b.area_score.total_cmp(&a.area_score)).then(a.input_index.cmp(&b.input_index))
}

pub fn encode_layout(boxes: &[BBox], cfg: &EncoderConfig) -> SceneMetadata {
    let seq = rank_layout(boxes, cfg).iter().map(|r| SemanticVector::from_box(&r.bbox)).collect();
    SceneMetadata::padded(seq, cfg.length, EncoderKind::Layout)
}

pub fn encode(kind: EncoderKind, boxes: &[BBox], cfg: &EncoderConfig) -> SceneMetadata {
    match kind {
        EncoderKind::Cooccurrence => encode_cooccurrence(boxes, cfg),
        EncoderKind::Layout => encode_layout(boxes, cfg),
    }
}

/// Reverses the sequence so a forward reader sees the padding first and the
/// leading vector last.
pub fn reverse_for_unidirectional(meta: &SceneMetadata) -> SceneMetadata {
    let mut sequence = meta.sequence.clone();
    sequence.reverse();
    SceneMetadata { sequence, kind: meta.kind, reversed: !meta.reversed }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetadataLine {
    pub scene_id: String,
    pub landuse: Option<String>,
    pub sequence: Vec<SemanticVector>,
}

/// Writes one metadata JSON line per record.
pub fn write_metadata<W: Write>(
    records: &[SceneRecord],
    kind: EncoderKind,
    cfg: &EncoderConfig,
    reverse: bool,
    mut writer: W,
) -> Result<()> {
    for rec in records {
        let mut meta = encode(kind, &rec.boxes, cfg);
        if reverse {
            meta = reverse_for_unidirectional(&meta);
        }
        let line = MetadataLine {
            scene_id: rec.scene_id.clone(),
            landuse: rec.landuse.map(|l| Taxonomy::landuse_name(l).to_string()),
            sequence: meta.sequence,
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(c: usize, p: f64, x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(c, p, x, y, w, h)
    }

    #[test]
    fn semantic_vectors() {
        assert_eq!(semantic_vector(&b(3, 0.9, 0.0, 0.0, 0.1, 0.1)).0, [0.0, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(semantic_vector(&b(0, 1.0, 0.0, 0.0, 0.1, 0.1)).0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(semantic_vector(&b(7, 0.05, 0.0, 0.0, 0.1, 0.1)).0, [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.05]);
    }

    #[test]
    fn cooccurrence_padding() {
        let boxes = [b(1, 0.5, 0.1, 0.1, 0.1, 0.1), b(2, 0.7, 0.2, 0.2, 0.1, 0.1), b(4, 0.6, 0.3, 0.3, 0.1, 0.1)];
        let meta = encode_cooccurrence(&boxes, &EncoderConfig::default());
        assert_eq!(meta.len(), 25);
        assert_eq!(meta.nonzero_count(), 3);
        assert_eq!(meta.sequence[0], semantic_vector(&boxes[1]));
        assert_eq!(meta.sequence[1], semantic_vector(&boxes[2]));
        assert_eq!(meta.sequence[2], semantic_vector(&boxes[0]));
        assert!(meta.sequence[3..].iter().all(SemanticVector::is_padding));

        let empty = encode_cooccurrence(&[], &EncoderConfig::default());
        assert_eq!(empty.len(), 25);
        assert_eq!(empty.nonzero_count(), 0);
    }

    #[test]
    fn cooccurrence_ties_by_category_then_input() {
        let boxes = [b(5, 0.5, 0.1, 0.1, 0.1, 0.1), b(2, 0.5, 0.2, 0.2, 0.1, 0.1), b(2, 0.5, 0.3, 0.3, 0.2, 0.1)];
        let meta = encode_cooccurrence(&boxes, &EncoderConfig::with_length(3));
        assert_eq!(meta.sequence[0].0[2], 0.5);
        assert_eq!(meta.sequence[2].0[5], 0.5);
    }

    #[test]
    fn cooccurrence_truncates_lowest_scores() {
        // Scores 0.01..0.30 in scrambled order.
        let boxes: Vec<BBox> =
            (0..30).map(|i| b(i % 8, ((i * 7) % 30 + 1) as f64 / 100.0, 0.1, 0.1, 0.1, 0.1)).collect();
        let meta = encode_cooccurrence(&boxes, &EncoderConfig::default());
        let mut scores: Vec<f64> = boxes.iter().map(|b| b.score).collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        let kept: Vec<f64> = meta.sequence.iter().map(|v| v.0.iter().copied().fold(0.0, f64::max)).collect();
        assert_eq!(kept, scores[..25].to_vec());
    }

    #[test]
    fn threshold_filters() {
        let boxes = [b(1, 0.3, 0.1, 0.1, 0.1, 0.1), b(2, 0.7, 0.2, 0.2, 0.1, 0.1)];
        let cfg = EncoderConfig { length: 4, include_threshold: 0.4 };
        assert_eq!(encode_layout(&boxes, &cfg).nonzero_count(), 1);
        assert_eq!(encode_cooccurrence(&boxes, &cfg).nonzero_count(), 1);
    }

    #[test]
    fn layout_single_box() {
        let one = b(6, 0.8, 0.2, 0.2, 0.3, 0.3);
        let meta = encode_layout(&[one], &EncoderConfig::default());
        assert_eq!(meta.sequence[0], semantic_vector(&one));
        assert_eq!(meta.nonzero_count(), 1);
    }

    #[test]
    fn layout_three_box_trace() {
        let b1 = b(3, 0.9, 0.1, 0.5, 0.2, 0.3);
        let b2 = b(2, 0.8, 0.6, 0.6, 0.1, 0.2);
        let b3 = b(0, 0.95, 0.4, 0.2, 0.3, 0.4);
        let ranked = rank_layout(&[b1, b2, b3], &EncoderConfig::default());
        let areas: Vec<f64> = ranked.iter().map(|r| r.area_score).collect();
        assert!((areas[0] - 0.114).abs() < 1e-12);
        assert!((areas[1] - 0.016).abs() < 1e-12);
        assert!((areas[2] - 0.054).abs() < 1e-12);
        assert_eq!(ranked[0].distance, None);
        assert!((ranked[1].distance.unwrap() - 0.100f64.sqrt()).abs() < 1e-12);
        assert!((ranked[2].distance.unwrap() - 0.185f64.sqrt()).abs() < 1e-12);
        let meta = encode_layout(&[b1, b2, b3], &EncoderConfig::default());
        assert_eq!(&meta.sequence[..3], &[semantic_vector(&b3), semantic_vector(&b2), semantic_vector(&b1)]);
    }

    #[test]
    fn layout_leader_tie_prefers_score() {
        let lo = b(1, 0.8, 0.1, 0.1, 0.3, 0.3);
        let hi = b(2, 0.9, 0.5, 0.5, 0.3, 0.3);
        let meta = encode_layout(&[lo, hi], &EncoderConfig::default());
        assert_eq!(meta.sequence[0], semantic_vector(&hi));
    }

    #[test]
    fn layout_truncation_keeps_leader_and_nearest() {
        let mut boxes = vec![b(0, 1.0, 0.0, 0.0, 0.5, 0.5)];
        for i in 0..6 {
            boxes.push(b(1 + i % 7, 0.5, 0.5 + 0.05 * i as f64, 0.5, 0.04, 0.04));
        }
        let meta = encode_layout(&boxes, &EncoderConfig::with_length(3));
        assert_eq!(
            meta.sequence,
            vec![semantic_vector(&boxes[0]), semantic_vector(&boxes[1]), semantic_vector(&boxes[2])]
        );
    }

    #[test]
    fn reversal() {
        let v1 = semantic_vector(&b(0, 0.5, 0.0, 0.0, 0.1, 0.1));
        let v2 = semantic_vector(&b(1, 0.6, 0.0, 0.0, 0.1, 0.1));
        let z = SemanticVector::ZERO;
        let meta = SceneMetadata { sequence: vec![v1, v2, z, z], kind: EncoderKind::Layout, reversed: false };
        let rev = reverse_for_unidirectional(&meta);
        assert_eq!(rev.sequence, vec![z, z, v2, v1]);
        assert!(rev.reversed);
        assert_eq!(reverse_for_unidirectional(&rev), meta);
        let zeros = encode_layout(&[], &EncoderConfig::with_length(4));
        assert_eq!(reverse_for_unidirectional(&zeros).sequence, zeros.sequence);
    }
}
