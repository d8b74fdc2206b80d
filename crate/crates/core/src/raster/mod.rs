//! Pixel-domain data model: multi-band raw granules, their metadata and the
//! basic transforms (crop, augment, display stretch).

mod augment;
mod io;
mod stretch;

pub use augment::{augment, random_augment, toroidal_shift, AugmentSpec, PerspectiveParams};
pub use io::{load_granule, read_band_tiff, write_band_tiff, write_granule, MetaFile};
pub use stretch::{percentile, stretch_to_gray8, stretch_to_png};

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbox::{BBox, PixelWindow};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("tiff error on {path}: {message}")]
    Tiff { path: String, message: String },
    #[error("invalid meta.json: {0}")]
    InvalidMeta(String),
    #[error("band {0} declared in meta.json but not found")]
    MissingBand(String),
    #[error("band {band} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        band: String,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("band {band} holds DN {value} above the {bit_depth}-bit range")]
    BitDepthViolation { band: String, value: u16, bit_depth: u8 },
    #[error("duplicate band identifier {0}")]
    DuplicateBand(String),
    #[error("band data length {got} does not match {width}x{height}")]
    DataLength { width: usize, height: usize, got: usize },
    #[error("box does not intersect the image")]
    EmptyIntersection,
    #[error("rotation of {0} degrees exceeds the 40 degree augmentation limit")]
    InvalidAngle(f64),
    #[error("percentiles must satisfy 0 <= lo < hi <= 100, got ({lo}, {hi})")]
    InvalidPercentiles { lo: f64, hi: f64 },
    #[error("png encoding failed: {0}")]
    Png(String),
}

pub type Result<T> = std::result::Result<T, RasterError>;

/// Sensor family of a granule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Sensor {
    S2,
    #[serde(rename = "VENUS")]
    Venus,
    #[default]
    #[serde(rename = "OTHER")]
    Other,
}

/// Affine pixel→meters map: `x = a + b·col + c·row`, `y = d + e·col + f·row`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 6]", into = "[f64; 6]")]
pub struct GeoTransform(pub [f64; 6]);

impl From<[f64; 6]> for GeoTransform {
    fn from(v: [f64; 6]) -> Self {
        Self(v)
    }
}

impl From<GeoTransform> for [f64; 6] {
    fn from(g: GeoTransform) -> Self {
        g.0
    }
}

impl GeoTransform {
    /// North-up transform with square pixels, origin at the top-left corner.
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_m: f64) -> Self {
        Self([origin_x, pixel_m, 0.0, origin_y, 0.0, -pixel_m])
    }

    pub fn determinant(&self) -> f64 {
        let [_, b, c, _, e, f] = self.0;
        b * f - c * e
    }

    pub fn is_invertible(&self) -> bool {
        let det = self.determinant();
        det.is_finite() && det != 0.0
    }

    pub fn apply(&self, col: f64, row: f64) -> (f64, f64) {
        let [a, b, c, d, e, f] = self.0;
        (a + b * col + c * row, d + e * col + f * row)
    }

    /// Meters back to fractional pixel coordinates. Caller guarantees
    /// invertibility.
    pub fn invert(&self, x: f64, y: f64) -> (f64, f64) {
        let [a, b, c, d, e, f] = self.0;
        let det = b * f - c * e;
        let (dx, dy) = (x - a, y - d);
        ((f * dx - c * dy) / det, (-e * dx + b * dy) / det)
    }

    /// Transform of a sub-image whose pixel (0,0) is parent pixel (col, row).
    pub fn translated(&self, col: f64, row: f64) -> Self {
        let [_, b, c, _, e, f] = self.0;
        let (x, y) = self.apply(col, row);
        Self([x, b, c, y, e, f])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranuleMeta {
    pub sensing_time: DateTime<Utc>,
    pub resolution_m: f64,
    pub bit_depth: u8,
    pub geotransform: GeoTransform,
    pub sensor: Sensor,
    pub detector_id: Option<String>,
}

impl GranuleMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution_m > 0.0 && self.resolution_m.is_finite()) {
            return Err(RasterError::InvalidMeta(format!(
                "resolution_m must be positive, got {}",
                self.resolution_m
            )));
        }
        if self.bit_depth == 0 || self.bit_depth > 16 {
            return Err(RasterError::InvalidMeta(format!(
                "bit_depth must be in 1..=16, got {}",
                self.bit_depth
            )));
        }
        if !self.geotransform.is_invertible() {
            return Err(RasterError::InvalidMeta(
                "geotransform linear part is singular".into(),
            ));
        }
        Ok(())
    }

    pub fn max_dn(&self) -> u16 {
        max_dn(self.bit_depth)
    }
}

/// Largest representable DN for a bit depth.
pub fn max_dn(bit_depth: u8) -> u16 {
    if bit_depth >= 16 {
        u16::MAX
    } else {
        (1u32 << bit_depth) as u16 - 1
    }
}

/// One spectral band, row-major 16-bit digital numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandImage {
    pub band_id: String,
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl BandImage {
    pub fn new(band_id: impl Into<String>, width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(RasterError::DataLength {
                width,
                height,
                got: data.len(),
            });
        }
        Ok(Self {
            band_id: band_id.into(),
            width,
            height,
            data,
        })
    }

    pub fn filled(band_id: impl Into<String>, width: usize, height: usize, value: u16) -> Self {
        Self {
            band_id: band_id.into(),
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(
        band_id: impl Into<String>,
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u16,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(c, r));
            }
        }
        Self {
            band_id: band_id.into(),
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: u16) {
        self.data[row * self.width + col] = v;
    }

    pub fn full_window(&self) -> PixelWindow {
        PixelWindow {
            c0: 0,
            r0: 0,
            c1: self.width,
            r1: self.height,
        }
    }

    /// Pixels of a window, row-major.
    pub fn window_values(&self, w: &PixelWindow) -> Vec<u16> {
        let mut out = Vec::with_capacity(w.len());
        for r in w.r0..w.r1 {
            out.extend_from_slice(&self.data[r * self.width + w.c0..r * self.width + w.c1]);
        }
        out
    }

    /// Copy of a window as a standalone band.
    pub fn sub_image(&self, w: &PixelWindow) -> BandImage {
        BandImage {
            band_id: self.band_id.clone(),
            width: w.width(),
            height: w.height(),
            data: self.window_values(w),
        }
    }

    pub fn with_data(&self, data: Vec<u16>) -> Result<BandImage> {
        BandImage::new(self.band_id.clone(), self.width, self.height, data)
    }

    pub fn max_value(&self) -> u16 {
        self.data.iter().copied().max().unwrap_or(0)
    }
}

/// A detector's image unit: all bands of one acquisition on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Granule {
    pub id: String,
    bands: Vec<BandImage>,
    pub meta: GranuleMeta,
}

impl Granule {
    /// Checks every granule invariant: common size, unique band ids, DN
    /// within bit depth and a valid meta block.
    pub fn new(id: impl Into<String>, bands: Vec<BandImage>, meta: GranuleMeta) -> Result<Self> {
        meta.validate()?;
        let mut seen = BTreeSet::new();
        let max = meta.max_dn();
        if let Some(first) = bands.first() {
            let (w, h) = (first.width, first.height);
            for b in &bands {
                if !seen.insert(b.band_id.clone()) {
                    return Err(RasterError::DuplicateBand(b.band_id.clone()));
                }
                if b.width != w || b.height != h {
                    return Err(RasterError::DimensionMismatch {
                        band: b.band_id.clone(),
                        want_w: w,
                        want_h: h,
                        got_w: b.width,
                        got_h: b.height,
                    });
                }
                if let Some(&v) = b.data.iter().find(|&&v| v > max) {
                    return Err(RasterError::BitDepthViolation {
                        band: b.band_id.clone(),
                        value: v,
                        bit_depth: meta.bit_depth,
                    });
                }
            }
        }
        Ok(Self {
            id: id.into(),
            bands,
            meta,
        })
    }

    pub fn bands(&self) -> &[BandImage] {
        &self.bands
    }

    pub fn band(&self, band_id: &str) -> Option<&BandImage> {
        self.bands.iter().find(|b| b.band_id == band_id)
    }

    pub fn band_ids(&self) -> Vec<String> {
        self.bands.iter().map(|b| b.band_id.clone()).collect()
    }

    pub fn width(&self) -> usize {
        self.bands.first().map_or(0, |b| b.width)
    }

    pub fn height(&self) -> usize {
        self.bands.first().map_or(0, |b| b.height)
    }

    pub fn into_bands(self) -> Vec<BandImage> {
        self.bands
    }

    /// Same id and meta, new bands (re-validated).
    pub fn with_bands(&self, bands: Vec<BandImage>) -> Result<Granule> {
        Granule::new(self.id.clone(), bands, self.meta.clone())
    }

    /// Pixel → projected meters through the geotransform.
    pub fn pixel_to_meters(&self, col: f64, row: f64) -> (f64, f64) {
        self.meta.geotransform.apply(col, row)
    }
}

/// Crop every band to `box` (clamped to the image); the geotransform is
/// translated so crop pixel (0,0) keeps its parent position.
pub fn crop(g: &Granule, bbox: &BBox) -> Result<Granule> {
    let win = bbox
        .pixel_window(g.width(), g.height())
        .ok_or(RasterError::EmptyIntersection)?;
    let bands = g.bands.iter().map(|b| b.sub_image(&win)).collect();
    let mut meta = g.meta.clone();
    meta.geotransform = g.meta.geotransform.translated(win.c0 as f64, win.r0 as f64);
    Ok(Granule {
        id: g.id.clone(),
        bands,
        meta,
    })
}

#[cfg(test)]
pub(crate) fn test_meta() -> GranuleMeta {
    GranuleMeta {
        sensing_time: "2020-01-06T08:30:00Z".parse().unwrap(),
        resolution_m: 10.0,
        bit_depth: 12,
        geotransform: GeoTransform::north_up(500_000.0, 3_500_000.0, 10.0),
        sensor: Sensor::S2,
        detector_id: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn granule_2x2() -> Granule {
        let b = BandImage::new("B08", 2, 2, vec![1, 2, 3, 4]).unwrap();
        Granule::new("g", vec![b], test_meta()).unwrap()
    }

    #[test]
    fn crop_full_box_is_identity() {
        let g = granule_2x2();
        let c = crop(&g, &BBox::new(0.0, 0.0, 2.0, 2.0)).unwrap();
        assert_eq!(c, g);
    }

    #[test]
    fn crop_single_pixel() {
        let g = granule_2x2();
        let c = crop(&g, &BBox::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(c.bands()[0].data(), &[1]);
    }

    #[test]
    fn crop_translates_geotransform() {
        let g = granule_2x2();
        let c = crop(&g, &BBox::new(1.0, 1.0, 1.0, 1.0)).unwrap();
        let parent = g.meta.geotransform.apply(1.0, 1.0);
        let child = c.meta.geotransform.apply(0.0, 0.0);
        assert_eq!(parent, child);
        let back = c.meta.geotransform.invert(child.0, child.1);
        assert!((back.0).abs() < 1e-9 && (back.1).abs() < 1e-9);
    }

    #[test]
    fn crop_outside_is_error() {
        let g = granule_2x2();
        assert!(matches!(
            crop(&g, &BBox::new(5.0, 5.0, 1.0, 1.0)),
            Err(RasterError::EmptyIntersection)
        ));
    }

    #[test]
    fn granule_rejects_dimension_mismatch_and_bit_depth() {
        let a = BandImage::filled("B02", 4, 4, 0);
        let b = BandImage::filled("B03", 4, 3, 0);
        assert!(matches!(
            Granule::new("g", vec![a.clone(), b], test_meta()),
            Err(RasterError::DimensionMismatch { .. })
        ));
        let hot = BandImage::filled("B03", 4, 4, 4096);
        assert!(matches!(
            Granule::new("g", vec![a.clone(), hot], test_meta()),
            Err(RasterError::BitDepthViolation { value: 4096, .. })
        ));
        assert!(matches!(
            Granule::new("g", vec![a.clone(), a], test_meta()),
            Err(RasterError::DuplicateBand(_))
        ));
    }

    #[test]
    fn singular_geotransform_rejected() {
        let mut m = test_meta();
        m.geotransform = GeoTransform([0.0, 1.0, 2.0, 0.0, 2.0, 4.0]);
        assert!(m.validate().is_err());
    }
}
