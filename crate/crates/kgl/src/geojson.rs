//! Choropleth export: user-supplied county boundaries joined with scores.

use std::collections::BTreeMap;
use std::path::Path;

use kgl_core::RegionId;
use serde_json::{json, Map, Value};

use crate::error::{KglError, Result};

/// County key of a boundary feature: `fips`, `GEOID`, the last five digits of
/// `GEO_ID`, or the feature id.
fn feature_fips(f: &Value) -> Option<String> {
    let props = f.get("properties");
    let prop = |k: &str| props.and_then(|p| p.get(k));
    let as_code = |v: &Value| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => n.as_u64().map(|n| format!("{n:05}")),
        _ => None,
    };
    prop("fips")
        .and_then(as_code)
        .or_else(|| prop("GEOID").and_then(as_code))
        .or_else(|| {
            prop("GEO_ID")
                .and_then(Value::as_str)
                .filter(|s| s.len() >= 5)
                .map(|s| s[s.len() - 5..].to_string())
        })
        .or_else(|| f.get("id").and_then(as_code))
}

/// Scores attached to each county feature.
#[derive(Debug, Clone, Default)]
pub struct MapScores {
    pub individualism: BTreeMap<RegionId, f64>,
    pub collectivism: BTreeMap<RegionId, f64>,
    pub diff: BTreeMap<RegionId, f64>,
}

/// Copies every boundary feature, replacing its properties with
/// `fips`, `score_indiv`, `score_coll` and `diff` (null where absent).
pub fn annotate(boundaries: &Value, scores: &MapScores, path: &Path) -> Result<Value> {
    if boundaries.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(KglError::input(path, "boundary file is not a GeoJSON FeatureCollection"));
    }
    let features = boundaries
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| KglError::input(path, "FeatureCollection without a features array"))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let fips = feature_fips(f).ok_or_else(|| KglError::input(path, format!("feature {i} has no fips/GEOID")))?;
        let region = RegionId::parse(&fips).ok();
        let get = |m: &BTreeMap<RegionId, f64>| region.as_ref().and_then(|r| m.get(r)).map_or(Value::Null, |v| json!(v));
        let mut props = Map::new();
        props.insert("fips".into(), json!(fips));
        props.insert("score_indiv".into(), get(&scores.individualism));
        props.insert("score_coll".into(), get(&scores.collectivism));
        props.insert("diff".into(), get(&scores.diff));
        let mut feature = Map::new();
        feature.insert("type".into(), json!("Feature"));
        feature.insert("geometry".into(), f.get("geometry").cloned().unwrap_or(Value::Null));
        feature.insert("properties".into(), Value::Object(props));
        out.push(Value::Object(feature));
    }
    Ok(json!({ "type": "FeatureCollection", "features": out }))
}

pub fn read_boundaries(path: &Path) -> Result<Value> {
    let text = crate::io::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| KglError::input(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_scores_become_null() {
        let b = json!({
            "type": "FeatureCollection",
            "features": [
                {"type": "Feature", "properties": {"GEOID": "01001"}, "geometry": null},
                {"type": "Feature", "id": 1003, "properties": {}, "geometry": {"type": "Point", "coordinates": [0.0, 0.0]}}
            ]
        });
        let mut s = MapScores::default();
        let r = RegionId::parse("01001").unwrap();
        s.individualism.insert(r.clone(), 0.5);
        s.collectivism.insert(r.clone(), 0.25);
        s.diff.insert(r, 0.25);
        let out = annotate(&b, &s, Path::new("b.geojson")).unwrap();
        let f = &out["features"];
        assert_eq!(f[0]["properties"]["score_indiv"], json!(0.5));
        assert_eq!(f[1]["properties"]["fips"], json!("01003"));
        assert_eq!(f[1]["properties"]["diff"], Value::Null);
    }
}
