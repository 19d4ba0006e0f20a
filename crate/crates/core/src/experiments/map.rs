use serde_json::{json, Value};

use super::TrainedModel;
use crate::error::Result;
use crate::scene::{SceneRecord, Taxonomy};

/// Display color for a land-use index.
pub fn landuse_color(landuse: usize) -> &'static str {
    match landuse {
        0 => "red",
        1 => "blue",
        2 => "yellow",
        3 => "purple",
        _ => "gray",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapOutcome {
    /// GeoJSON `FeatureCollection` of `Point`s.
    pub document: Value,
    pub features: usize,
    /// Scenes without both latitude and longitude.
    pub skipped: usize,
}

/// Classifies each geo-tagged scene and places it on the map.
pub fn land_use_map(model: &TrainedModel, scenes: &[SceneRecord]) -> Result<MapOutcome> {
    let mut features = Vec::new();
    let mut skipped = 0;
    for rec in scenes {
        let Some((lat, lon)) = rec.geo() else {
            skipped += 1;
            continue;
        };
        let p = model.predict_record(rec)?;
        let probs: serde_json::Map<String, Value> =
            Taxonomy::LANDUSES.iter().zip(&p.probs).map(|(n, v)| (n.to_string(), json!(v))).collect();
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [lon, lat] },
            "properties": {
                "scene_id": rec.scene_id,
                "landuse": Taxonomy::landuse_name(p.label),
                "probs": probs,
                "color": landuse_color(p.label),
            },
        }));
    }
    let n = features.len();
    Ok(MapOutcome { document: json!({ "type": "FeatureCollection", "features": features }), features: n, skipped })
}
