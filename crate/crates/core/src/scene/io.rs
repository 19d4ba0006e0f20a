use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BBox, SceneRecord, Taxonomy};
use crate::error::{Error, Result};

/// Coordinate units of the boxes on one JSONL line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Pixel,
    #[default]
    Normalized,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireBox {
    category: String,
    score: f64,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireScene {
    scene_id: String,
    landuse: Option<String>,
    width: u32,
    height: u32,
    #[serde(default)]
    lat: Option<f64>,
    #[serde(default)]
    lon: Option<f64>,
    #[serde(default)]
    units: Units,
    boxes: Vec<WireBox>,
}

/// Result of a lenient parse: the accepted records and one error per rejected line.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<SceneRecord>,
    pub errors: Vec<Error>,
}

impl ParseOutcome {
    pub fn rejected(&self) -> usize {
        self.errors.len()
    }
}

fn decode_line(line: &str) -> Result<SceneRecord> {
    let wire: WireScene = serde_json::from_str(line)?;
    let landuse = wire.landuse.as_deref().map(Taxonomy::landuse_index).transpose()?;
    let (sx, sy) = match wire.units {
        Units::Normalized => (1.0, 1.0),
        Units::Pixel if wire.width > 0 && wire.height > 0 => (wire.width as f64, wire.height as f64),
        Units::Pixel => {
            return Err(Error::InvalidRecord {
                scene_id: wire.scene_id,
                reason: "pixel units need a positive image size".into(),
            })
        }
    };
    let boxes = wire
        .boxes
        .iter()
        .map(|b| {
            Ok(BBox {
                category: Taxonomy::building_index(&b.category)?,
                score: b.score,
                x: b.x / sx,
                y: b.y / sy,
                w: b.w / sx,
                h: b.h / sy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rec = SceneRecord {
        scene_id: wire.scene_id,
        landuse,
        width: wire.width,
        height: wire.height,
        lat: wire.lat,
        lon: wire.lon,
        boxes,
    };
    rec.validate()?;
    Ok(rec)
}

/// Parses scene JSON lines, rejecting invalid records and continuing.
///
/// Blank lines are skipped. Every error carries its 1-based line number.
pub fn parse_scenes<R: Read>(reader: R) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match decode_line(&line) {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.errors.push(Error::Parse { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(out)
}

/// Like [`parse_scenes`] but fails on the first rejected line.
pub fn parse_scenes_strict<R: Read>(reader: R) -> Result<Vec<SceneRecord>> {
    let outcome = parse_scenes(reader)?;
    match outcome.errors.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(outcome.records),
    }
}

pub fn read_scenes(path: &Path) -> Result<ParseOutcome> {
    parse_scenes(File::open(path)?)
}

/// Writes records as normalized-unit JSON lines.
pub fn serialize_scenes<W: Write>(records: &[SceneRecord], mut writer: W) -> Result<()> {
    for rec in records {
        let wire = WireScene {
            scene_id: rec.scene_id.clone(),
            landuse: rec.landuse.map(|l| Taxonomy::landuse_name(l).to_string()),
            width: rec.width,
            height: rec.height,
            lat: rec.lat,
            lon: rec.lon,
            units: Units::Normalized,
            boxes: rec
                .boxes
                .iter()
                .map(|b| WireBox {
                    category: Taxonomy::building_name(b.category).to_string(),
                    score: b.score,
                    x: b.x,
                    y: b.y,
                    w: b.w,
                    h: b.h,
                })
                .collect(),
        };
        serde_json::to_writer(&mut writer, &wire)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_scenes(path: &Path, records: &[SceneRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serialize_scenes(records, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TWO_BOXES: &str = r#"{"scene_id":"s1","landuse":"commercial","width":200,"height":100,"lat":51.0,"lon":-114.0,"units":"pixel","boxes":[{"category":"retail","score":0.9,"x":20,"y":10,"w":100,"h":50},{"category":"house","score":0.4,"x":0,"y":0,"w":200,"h":100}]}"#;

    #[test]
    fn pixel_boxes_are_normalized() {
        let recs = parse_scenes_strict(TWO_BOXES.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.landuse, Some(0));
        assert_eq!(r.boxes.len(), 2);
        assert_eq!(r.boxes[0], BBox::new(6, 0.9, 0.1, 0.1, 0.5, 0.5));
        assert_eq!(r.boxes[1], BBox::new(3, 0.4, 0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn bad_score_rejects_record_and_continues() {
        let bad = r#"{"scene_id":"s2","landuse":null,"width":10,"height":10,"units":"normalized","boxes":[{"category":"roof","score":1.7,"x":0.1,"y":0.1,"w":0.2,"h":0.2}]}"#;
        let input = format!("{bad}\n{TWO_BOXES}\n");
        let out = parse_scenes(input.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejected(), 1);
        let msg = out.errors[0].to_string();
        assert!(msg.contains("line 1"), "{msg}");
        assert!(msg.contains("score out of range"), "{msg}");
    }

    #[test]
    fn malformed_and_unknown_category_report_lines() {
        let unknown = TWO_BOXES.replace("retail", "castle");
        let input = format!("{TWO_BOXES}\n{{not json\n{unknown}\n");
        let out = parse_scenes(input.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejected(), 2);
        assert!(out.errors[0].to_string().starts_with("line 2"));
        assert!(out.errors[1].to_string().contains("castle"));
    }

    #[test]
    fn empty_input() {
        let out = parse_scenes(&b""[..]).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.rejected(), 0);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0usize..8, 0.0..=1.0f64, 0.0..0.9f64, 0.0..0.9f64, 0.01..0.1f64, 0.01..0.1f64)
            .prop_map(|(c, p, x, y, w, h)| BBox::new(c, p, x, y, w, h))
    }

    fn arb_record() -> impl Strategy<Value = SceneRecord> {
        (
            "[a-z0-9_]{1,12}",
            proptest::option::of(0usize..4),
            1u32..4000,
            1u32..4000,
            proptest::option::of((-90.0..=90.0f64, -180.0..=180.0f64)),
            proptest::collection::vec(arb_box(), 0..12),
        )
            .prop_map(|(id, landuse, width, height, geo, boxes)| SceneRecord {
                scene_id: id,
                landuse,
                width,
                height,
                lat: geo.map(|g| g.0),
                lon: geo.map(|g| g.1),
                boxes,
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(recs in proptest::collection::vec(arb_record(), 0..6)) {
            let mut buf = Vec::new();
            serialize_scenes(&recs, &mut buf).unwrap();
            let back = parse_scenes_strict(&buf[..]).unwrap();
            prop_assert_eq!(&back, &recs);
            let mut again = Vec::new();
            serialize_scenes(&back, &mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }
}
