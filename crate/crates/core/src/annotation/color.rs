//! Feature colors (`color.json`).

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnnotationError;
use crate::fsio;
use crate::model::FeatureModel;

/// Hue step between consecutive new features, in degrees.
pub const GOLDEN_ANGLE: f64 = 137.507_764_050_037_85;
/// Fixed saturation and lightness: pale tones that keep code readable as
/// a background.
pub const SATURATION: f64 = 0.65;
pub const LIGHTNESS: f64 = 0.80;

const MAX_ATTEMPTS: usize = 1024;

/// Feature name → `#RRGGBB`. Serializes with sorted keys.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorMap(pub BTreeMap<String, String>);

impl ColorMap {
    pub fn get(&self, feature: &str) -> Option<&str> {
        self.0.get(feature).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn load(path: &Path) -> Result<ColorMap, AnnotationError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| AnnotationError::Io { path: shown.clone(), source })?;
        let map: ColorMap = serde_json::from_str(&text).map_err(|e| AnnotationError::Malformed {
            path: shown,
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        map.check_format()?;
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.0).expect("string map serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), AnnotationError> {
        fsio::write_atomic(path, self.to_json().as_bytes())
            .map_err(|source| AnnotationError::Io { path: path.display().to_string(), source })
    }

    fn check_format(&self) -> Result<(), AnnotationError> {
        for (feature, color) in &self.0 {
            if !is_hex_color(color) {
                return Err(AnnotationError::InvalidColor { feature: feature.clone(), color: color.clone() });
            }
        }
        Ok(())
    }

    /// Problems with this map as the color map for `model`: missing
    /// features and duplicate colors.
    pub fn problems(&self, model: &FeatureModel) -> Vec<String> {
        let mut out = Vec::new();
        for f in model.features() {
            if !self.0.contains_key(&f) {
                out.push(format!("feature `{f}` has no color"));
            }
        }
        let mut seen: BTreeMap<String, &str> = BTreeMap::new();
        for (f, c) in &self.0 {
            if !is_hex_color(c) {
                out.push(format!("feature `{f}` has invalid color `{c}`"));
            } else if let Some(prev) = seen.insert(c.to_ascii_uppercase(), f) {
                out.push(format!("features `{prev}` and `{f}` share color {c}"));
            }
        }
        out
    }
}

fn is_hex_color(s: &str) -> bool {
    s.len() == 7 && s.starts_with('#') && s[1..].bytes().all(|b| b.is_ascii_hexdigit())
}

/// `#RRGGBB` for a hue in degrees at the given saturation/lightness.
pub fn hsl_to_hex(hue: f64, s: f64, l: f64) -> String {
    let h = hue.rem_euclid(360.0) / 60.0;
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    format!("#{:02X}{:02X}{:02X}", byte(r), byte(g), byte(b))
}

/// Complete `existing` over the model's features. Existing entries are kept;
/// each missing feature, in model order, takes the next golden-angle hue
/// whose color is not already used.
pub fn assign_colors(model: &FeatureModel, existing: Option<&ColorMap>) -> Result<ColorMap, AnnotationError> {
    let mut map = existing.cloned().unwrap_or_default();
    let mut used: HashSet<String> = map.0.values().map(|c| c.to_ascii_uppercase()).collect();
    let mut step = 0usize;
    for f in model.features() {
        if map.0.contains_key(&f) {
            continue;
        }
        let color = loop {
            if step >= MAX_ATTEMPTS {
                return Err(AnnotationError::ColorExhausted(f));
            }
            let c = hsl_to_hex(step as f64 * GOLDEN_ANGLE, SATURATION, LIGHTNESS);
            step += 1;
            if used.insert(c.clone()) {
                break c;
            }
        };
        map.0.insert(f, color);
    }
    Ok(map)
}
