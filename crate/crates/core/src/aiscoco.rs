//! AISCOCO: COCO detection JSON whose annotations carry AIS attributes
//! (MMSI, ship type, route) and quality flags.
//!
//! Reading validates the document and reports the JSON path of the first
//! problem. Writing is canonical (sorted keys, ids ascending, 2-space
//! indent) so a written file reads back and re-writes byte for byte.
//! Fields this crate does not know are kept verbatim.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ais::AisRecord;
use crate::bbox::BBox;

#[derive(Debug, Error)]
pub enum AiscocoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("dangling reference at {path}: no {target} with id {id}")]
    DanglingReference { path: String, target: String, id: u64 },
    #[error("invariant violation at {path}: {message}")]
    InvariantViolation { path: String, message: String },
    #[error("no annotation with id {0}")]
    UnknownAnnotationId(u64),
}

impl AiscocoError {
    /// JSON path named by the error, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            Self::SchemaViolation { path, .. }
            | Self::DanglingReference { path, .. }
            | Self::InvariantViolation { path, .. } => Some(path),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, AiscocoError>;

/// Allowed quality flags: wake, border, cloud, proximity.
pub const FLAG_WAKE: u8 = 1;
pub const FLAG_BORDER: u8 = 2;
pub const FLAG_CLOUD: u8 = 3;
pub const FLAG_PROXIMITY: u8 = 7;
pub const FLAGS: [u8; 4] = [FLAG_WAKE, FLAG_BORDER, FLAG_CLOUD, FLAG_PROXIMITY];

pub type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiscocoDoc {
    pub images: Vec<Image>,
    pub annotations: Vec<Annotation>,
    pub categories: Vec<Category>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub sensing_time: DateTime<Utc>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
    #[serde(flatten)]
    pub extra: Extra,
}

/// `[lon, lat, timestamp]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePoint(pub f64, pub f64, pub String);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Attributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mmsi: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ship_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Vec<RoutePoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<Vec<u8>>,
    /// Detector confidence for predicted boxes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Attributes {
    pub fn is_empty(&self) -> bool {
        *self == Attributes::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    pub image_id: u64,
    pub bbox: [f64; 4],
    pub category_id: u64,
    #[serde(default, skip_serializing_if = "Attributes::is_empty")]
    pub attributes: Attributes,
    #[serde(flatten)]
    pub extra: Extra,
}

impl Annotation {
    pub fn bbox(&self) -> BBox {
        BBox::from_xywh(self.bbox)
    }
}

fn json_path(p: &serde_path_to_error::Path) -> String {
    let mut out = String::from("$");
    for seg in p.iter() {
        match seg {
            serde_path_to_error::Segment::Seq { index } => out.push_str(&format!("[{index}]")),
            serde_path_to_error::Segment::Map { key } => {
                out.push('.');
                out.push_str(key);
            }
            serde_path_to_error::Segment::Enum { variant } => {
                out.push('.');
                out.push_str(variant);
            }
            serde_path_to_error::Segment::Unknown => out.push_str(".?"),
        }
    }
    out
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> AiscocoError {
    AiscocoError::SchemaViolation {
        path: path.into(),
        message: message.into(),
    }
}

/// Parse and validate a document from JSON text.
pub fn parse_aiscoco(text: &str) -> Result<AiscocoDoc> {
    let value: Value = serde_json::from_str(text).map_err(|e| schema("$", format!("invalid JSON: {e}")))?;
    if !value.is_object() {
        return Err(schema("$", "document must be an object"));
    }
    let doc: AiscocoDoc = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = json_path(e.path());
        schema(path, e.into_inner().to_string())
    })?;
    validate(&doc).map_err(|e| match e {
        AiscocoError::InvariantViolation { path, message } => schema(path, message),
        other => other,
    })?;
    Ok(doc)
}

pub fn read_aiscoco(path: impl AsRef<Path>) -> Result<AiscocoDoc> {
    parse_aiscoco(&std::fs::read_to_string(path)?)
}

fn invariant(path: String, message: impl Into<String>) -> AiscocoError {
    AiscocoError::InvariantViolation {
        path,
        message: message.into(),
    }
}

fn unique_ids<'a>(what: &str, ids: impl Iterator<Item = &'a u64>) -> Result<BTreeSet<u64>> {
    let mut seen = BTreeSet::new();
    for (i, id) in ids.enumerate() {
        if !seen.insert(*id) {
            return Err(invariant(format!("$.{what}[{i}].id"), format!("duplicate id {id}")));
        }
    }
    Ok(seen)
}

/// Check the document invariants (unique ids, references, box sizes, flag
/// vocabulary, route timestamps).
pub fn validate(doc: &AiscocoDoc) -> Result<()> {
    let images = unique_ids("images", doc.images.iter().map(|i| &i.id))?;
    let cats = unique_ids("categories", doc.categories.iter().map(|c| &c.id))?;
    unique_ids("annotations", doc.annotations.iter().map(|a| &a.id))?;
    for (i, img) in doc.images.iter().enumerate() {
        if img.width == 0 || img.height == 0 {
            return Err(invariant(format!("$.images[{i}].width"), "image size must be positive"));
        }
    }
    for (i, a) in doc.annotations.iter().enumerate() {
        let at = |f: &str| format!("$.annotations[{i}].{f}");
        if a.bbox.iter().any(|v| !v.is_finite()) {
            return Err(invariant(at("bbox"), "bbox values must be finite"));
        }
        if !(a.bbox[2] > 0.0) {
            return Err(invariant(at("bbox[2]"), "bbox width must be positive"));
        }
        if !(a.bbox[3] > 0.0) {
            return Err(invariant(at("bbox[3]"), "bbox height must be positive"));
        }
        if let Some(flags) = &a.attributes.flags {
            for (k, f) in flags.iter().enumerate() {
                if !FLAGS.contains(f) {
                    return Err(invariant(
                        at(&format!("attributes.flags[{k}]")),
                        format!("flag {f} not in {{1, 2, 3, 7}}"),
                    ));
                }
            }
        }
        if let Some(m) = a.attributes.mmsi {
            if m == 0 || m > 999_999_999 {
                return Err(invariant(at("attributes.mmsi"), format!("mmsi {m} out of range")));
            }
        }
        if let Some(route) = &a.attributes.route {
            for (k, p) in route.iter().enumerate() {
                if !(-180.0..=180.0).contains(&p.0) || !(-90.0..=90.0).contains(&p.1) {
                    return Err(invariant(at(&format!("attributes.route[{k}]")), "position out of range"));
                }
                if DateTime::parse_from_rfc3339(&p.2).is_err() {
                    return Err(invariant(at(&format!("attributes.route[{k}][2]")), "timestamp is not RFC 3339"));
                }
            }
        }
        if let Some(s) = a.attributes.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(invariant(at("attributes.score"), "score must lie in [0, 1]"));
            }
        }
    }
    for (i, a) in doc.annotations.iter().enumerate() {
        if !images.contains(&a.image_id) {
            return Err(AiscocoError::DanglingReference {
                path: format!("$.annotations[{i}].image_id"),
                target: "image".into(),
                id: a.image_id,
            });
        }
        if !cats.contains(&a.category_id) {
            return Err(AiscocoError::DanglingReference {
                path: format!("$.annotations[{i}].category_id"),
                target: "category".into(),
                id: a.category_id,
            });
        }
    }
    Ok(())
}

/// Canonical JSON text: ids ascending, keys sorted, 2-space indent,
/// trailing newline.
pub fn to_canonical_string(doc: &AiscocoDoc) -> Result<String> {
    validate(doc)?;
    let mut d = doc.clone();
    d.images.sort_by_key(|i| i.id);
    d.annotations.sort_by_key(|a| a.id);
    d.categories.sort_by_key(|c| c.id);
    // a Value map is ordered by key
    let v = serde_json::to_value(&d).map_err(|e| invariant("$".into(), e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| invariant("$".into(), e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Write atomically (temp file then rename).
pub fn write_aiscoco(doc: &AiscocoDoc, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_canonical_string(doc)?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

impl AiscocoDoc {
    pub fn empty() -> Self {
        Self {
            images: Vec::new(),
            annotations: Vec::new(),
            categories: vec![Category {
                id: 1,
                name: "vessel".into(),
                extra: Extra::new(),
            }],
            extra: Extra::new(),
        }
    }

    pub fn image(&self, id: u64) -> Option<&Image> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn image_by_name(&self, file_name: &str) -> Option<&Image> {
        self.images.iter().find(|i| i.file_name == file_name)
    }

    pub fn annotation_mut(&mut self, id: u64) -> Option<&mut Annotation> {
        self.annotations.iter_mut().find(|a| a.id == id)
    }

    pub fn annotations_for(&self, image_id: u64) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(move |a| a.image_id == image_id)
    }

    pub fn next_annotation_id(&self) -> u64 {
        self.annotations.iter().map(|a| a.id).max().map_or(1, |m| m + 1)
    }

    pub fn next_image_id(&self) -> u64 {
        self.images.iter().map(|a| a.id).max().map_or(1, |m| m + 1)
    }

    /// Append an image and its boxes; returns the new image id.
    pub fn push_image(
        &mut self,
        file_name: &str,
        width: u32,
        height: u32,
        sensing_time: DateTime<Utc>,
        boxes: impl IntoIterator<Item = (BBox, Option<f64>)>,
        category_id: u64,
    ) -> u64 {
        let image_id = self.next_image_id();
        self.images.push(Image {
            id: image_id,
            file_name: file_name.into(),
            width,
            height,
            sensing_time,
            extra: Extra::new(),
        });
        let mut next = self.next_annotation_id();
        for (b, score) in boxes {
            self.annotations.push(Annotation {
                id: next,
                image_id,
                bbox: b.to_xywh(),
                category_id,
                attributes: Attributes {
                    score,
                    ..Attributes::default()
                },
                extra: Extra::new(),
            });
            next += 1;
        }
        image_id
    }
}

/// Attach AIS information to matched annotations. `matches` pairs an
/// annotation id with an MMSI; the route is every record of that MMSI,
/// oldest first, and the ship type comes from the most recent record that
/// has one. Unmatched annotations are left as they are.
pub fn merge_ais(
    doc: &AiscocoDoc,
    matches: impl IntoIterator<Item = (u64, u64)>,
    ais: &[AisRecord],
) -> Result<AiscocoDoc> {
    let mut by_mmsi: BTreeMap<u64, Vec<&AisRecord>> = BTreeMap::new();
    for r in ais {
        by_mmsi.entry(r.mmsi).or_default().push(r);
    }
    for v in by_mmsi.values_mut() {
        v.sort_by_key(|r| r.timestamp);
    }
    let mut out = doc.clone();
    for (ann_id, mmsi) in matches {
        let a = out
            .annotation_mut(ann_id)
            .ok_or(AiscocoError::UnknownAnnotationId(ann_id))?;
        let recs = by_mmsi.get(&mmsi).map(Vec::as_slice).unwrap_or(&[]);
        a.attributes.mmsi = Some(mmsi);
        a.attributes.ship_type = recs
            .iter()
            .rev()
            .find(|r| !r.ship_type.is_empty())
            .map(|r| r.ship_type.clone());
        a.attributes.route = Some(
            recs.iter()
                .map(|r| {
                    RoutePoint(
                        r.lon,
                        r.lat,
                        r.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true),
                    )
                })
                .collect(),
        );
    }
    validate(&out)?;
    Ok(out)
}
