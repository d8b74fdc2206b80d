//! Band-to-band registration: integer translations from a lookup table, or
//! estimated per band by zero-normalized cross-correlation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BandImage, Granule, RasterError};

#[derive(Debug, Error)]
pub enum RegisterError {
    #[error("shift table has no entry for band {0}")]
    MissingTableEntry(String),
    #[error("reference band {0} not present in granule")]
    MissingReference(String),
    #[error("reference band {band} must have a (0, 0) entry, found ({dx}, {dy})")]
    NonZeroReference { band: String, dx: i64, dy: i64 },
    #[error("input image has zero variance")]
    ConstantInput,
    #[error("images differ in size: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("max_shift must be at least 1")]
    InvalidMaxShift,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

pub type Result<T> = std::result::Result<T, RegisterError>;

/// Per-band integer translation that registers the band onto the reference.
///
/// Applying entry `(dx, dy)` moves content at `(c, r)` to `(c + dx, r + dy)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftTable {
    pub reference_band: String,
    pub entries: BTreeMap<String, (i64, i64)>,
}

impl ShiftTable {
    /// Table with the reference at `(0, 0)` and nothing else.
    pub fn identity(reference_band: impl Into<String>) -> Self {
        let reference_band = reference_band.into();
        let mut entries = BTreeMap::new();
        entries.insert(reference_band.clone(), (0, 0));
        Self {
            reference_band,
            entries,
        }
    }

    pub fn with_entry(mut self, band: impl Into<String>, dx: i64, dy: i64) -> Self {
        self.entries.insert(band.into(), (dx, dy));
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.entries.get(&self.reference_band) {
            Some(&(0, 0)) | None => Ok(()),
            Some(&(dx, dy)) => Err(RegisterError::NonZeroReference {
                band: self.reference_band.clone(),
                dx,
                dy,
            }),
        }
    }

    /// Same table with every translation negated.
    pub fn inverse(&self) -> Self {
        Self {
            reference_band: self.reference_band.clone(),
            entries: self
                .entries
                .iter()
                .map(|(k, &(dx, dy))| (k.clone(), (-dx, -dy)))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("shift table serializes")
    }
}

/// Coarse VENµS lookup table relative to B05: detector A residual ~0.64 px
/// rounds to 1, detector B (B10-B12) ~4.2 px to 4, detector D (B03, B04,
/// B06) ~10 px. Detector C carries no published offset and stays at 0.
pub fn venus_default_table() -> ShiftTable {
    let mut t = ShiftTable::identity("B05");
    for (bands, dx) in [
        (&["B01", "B02"][..], 1),
        (&["B10", "B11", "B12"][..], 4),
        (&["B03", "B04", "B06"][..], 10),
        (&["B07", "B08", "B09"][..], 0),
    ] {
        for b in bands {
            t.entries.insert((*b).to_string(), (dx, 0));
        }
    }
    t
}

/// Registered granule plus a per-band validity mask (`false` on fill).
#[derive(Debug, Clone, PartialEq)]
pub struct Registered {
    pub granule: Granule,
    pub valid: BTreeMap<String, Vec<bool>>,
}

impl Registered {
    pub fn valid_mask(&self, band_id: &str) -> Option<&[bool]> {
        self.valid.get(band_id).map(Vec::as_slice)
    }
}

/// Integer translation with 0-DN fill; returns the band and its validity mask.
pub fn translate_band(b: &BandImage, dx: i64, dy: i64) -> (BandImage, Vec<bool>) {
    let (w, h) = (b.width() as i64, b.height() as i64);
    let mut data = vec![0u16; b.data().len()];
    let mut valid = vec![false; b.data().len()];
    for r in 0..h {
        let sr = r - dy;
        if sr < 0 || sr >= h {
            continue;
        }
        for c in 0..w {
            let sc = c - dx;
            if sc < 0 || sc >= w {
                continue;
            }
            let i = (r * w + c) as usize;
            data[i] = b.get(sc as usize, sr as usize);
            valid[i] = true;
        }
    }
    let out = b.with_data(data).expect("same dimensions");
    (out, valid)
}

pub fn apply_shift_table(g: &Granule, t: &ShiftTable) -> Result<Registered> {
    t.validate()?;
    let mut bands = Vec::with_capacity(g.bands().len());
    let mut valid = BTreeMap::new();
    for b in g.bands() {
        let &(dx, dy) = t
            .entries
            .get(&b.band_id)
            .ok_or_else(|| RegisterError::MissingTableEntry(b.band_id.clone()))?;
        let (nb, mask) = translate_band(b, dx, dy);
        valid.insert(b.band_id.clone(), mask);
        bands.push(nb);
    }
    Ok(Registered {
        granule: g.with_bands(bands)?,
        valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftEstimate {
    /// Displacement of `moving` relative to `reference`:
    /// `moving(c + dx, r + dy) ≈ reference(c, r)`.
    pub dx: i64,
    pub dy: i64,
    /// Zero-normalized cross-correlation at the chosen shift, in [-1, 1].
    pub score: f64,
}

fn has_variance(b: &BandImage) -> bool {
    let first = b.data().first().copied();
    b.data().iter().any(|&v| Some(v) != first)
}

fn zncc_at(reference: &BandImage, moving: &BandImage, dx: i64, dy: i64) -> Option<f64> {
    let (w, h) = (reference.width() as i64, reference.height() as i64);
    let (c0, c1) = (0.max(-dx), w.min(w - dx));
    let (r0, r1) = (0.max(-dy), h.min(h - dy));
    if c1 - c0 < 2 || r1 - r0 < 2 {
        return None;
    }
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for r in r0..r1 {
        let ra = &reference.data()[(r * w) as usize..((r + 1) * w) as usize];
        let rb = &moving.data()[((r + dy) * w) as usize..((r + dy + 1) * w) as usize];
        for c in c0..c1 {
            let a = ra[c as usize] as i128;
            let b = rb[(c + dx) as usize] as i128;
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
    }
    let n = ((c1 - c0) * (r1 - r0)) as i128;
    let va = n * saa - sa * sa;
    let vb = n * sbb - sb * sb;
    if va == 0 || vb == 0 {
        return None;
    }
    let cov = n * sab - sa * sb;
    if cov * cov == va * vb {
        return Some(if cov > 0 { 1.0 } else { -1.0 });
    }
    Some((cov as f64 / ((va as f64).sqrt() * (vb as f64).sqrt())).clamp(-1.0, 1.0))
}

/// Exhaustive integer search over `[-max_shift, max_shift]²` maximizing the
/// zero-normalized cross-correlation on the overlap. Ties go to the smallest
/// `|dx| + |dy|`, then smallest `dy`, then `dx`.
pub fn estimate_shift(reference: &BandImage, moving: &BandImage, max_shift: u32) -> Result<ShiftEstimate> {
    if reference.width() != moving.width() || reference.height() != moving.height() {
        return Err(RegisterError::SizeMismatch(
            reference.width(),
            reference.height(),
            moving.width(),
            moving.height(),
        ));
    }
    if max_shift < 1 {
        return Err(RegisterError::InvalidMaxShift);
    }
    if !has_variance(reference) || !has_variance(moving) {
        return Err(RegisterError::ConstantInput);
    }
    let m = max_shift as i64;
    let candidates: Vec<(i64, i64)> = (-m..=m)
        .flat_map(|dy| (-m..=m).map(move |dx| (dx, dy)))
        .collect();
    let scored: Vec<ShiftEstimate> = candidates
        .par_iter()
        .filter_map(|&(dx, dy)| zncc_at(reference, moving, dx, dy).map(|score| ShiftEstimate { dx, dy, score }))
        .collect();
    let best = scored
        .iter()
        .map(|s| s.score)
        .fold(f64::NEG_INFINITY, f64::max);
    scored
        .into_iter()
        .filter(|s| best - s.score <= 1e-12)
        .min_by_key(|s| (s.dx.abs() + s.dy.abs(), s.dy, s.dx))
        .ok_or(RegisterError::ConstantInput)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegisterMode {
    Lut(ShiftTable),
    Estimate { max_shift: u32 },
}

/// Register every band onto `reference_band`; returns the table applied.
pub fn register_granule(g: &Granule, reference_band: &str, mode: &RegisterMode) -> Result<(Registered, ShiftTable)> {
    let reference = g
        .band(reference_band)
        .ok_or_else(|| RegisterError::MissingReference(reference_band.to_string()))?;
    let table = match mode {
        RegisterMode::Lut(t) => t.clone(),
        RegisterMode::Estimate { max_shift } => {
            let estimates: Vec<(String, (i64, i64))> = g
                .bands()
                .par_iter()
                .map(|b| {
                    if b.band_id == reference_band {
                        Ok((b.band_id.clone(), (0, 0)))
                    } else {
                        let e = estimate_shift(reference, b, *max_shift)?;
                        Ok((b.band_id.clone(), (-e.dx, -e.dy)))
                    }
                })
                .collect::<Result<_>>()?;
            ShiftTable {
                reference_band: reference_band.to_string(),
                entries: estimates.into_iter().collect(),
            }
        }
    };
    let reg = apply_shift_table(g, &table)?;
    Ok((reg, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{test_meta, toroidal_shift};

    fn texture(w: usize, h: usize, seed: u64) -> BandImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h).map(|_| rng.gen_range(100..1200)).collect();
        BandImage::new("B05", w, h, data).unwrap()
    }

    #[test]
    fn identical_images_peak_at_zero() {
        let a = texture(40, 30, 1);
        let e = estimate_shift(&a, &a, 4).unwrap();
        assert_eq!((e.dx, e.dy), (0, 0));
        assert_eq!(e.score, 1.0);
    }

    #[test]
    fn toroidal_ground_truth_recovered() {
        let a = texture(64, 64, 2);
        let m = toroidal_shift(&a, 5, -7);
        let e = estimate_shift(&a, &m, 10).unwrap();
        assert_eq!((e.dx, e.dy), (5, -7));
    }

    #[test]
    fn constant_input_rejected() {
        let a = texture(16, 16, 3);
        let c = BandImage::filled("B05", 16, 16, 7);
        assert!(matches!(estimate_shift(&a, &c, 2), Err(RegisterError::ConstantInput)));
        assert!(matches!(estimate_shift(&c, &a, 2), Err(RegisterError::ConstantInput)));
    }

    #[test]
    fn zero_table_is_identity() {
        let g = Granule::new("g", vec![texture(10, 10, 4)], test_meta()).unwrap();
        let t = ShiftTable::identity("B05");
        let reg = apply_shift_table(&g, &t).unwrap();
        assert_eq!(reg.granule, g);
        assert!(reg.valid["B05"].iter().all(|&v| v));
    }

    #[test]
    fn negated_shift_restores_valid_region() {
        let a = texture(20, 16, 5);
        let (moved, _) = translate_band(&a, 3, -2);
        let (back, valid) = translate_band(&moved, -3, 2);
        let mut checked = 0;
        for (i, ok) in valid.iter().enumerate() {
            let (c, r) = (i % 20, i / 20);
            // pixels that survived both translations
            if *ok && c < 17 && r >= 2 {
                assert_eq!(back.data()[i], a.data()[i]);
                checked += 1;
            }
        }
        assert_eq!(checked, 17 * 14);
    }

    #[test]
    fn missing_entry_reported() {
        let b2 = texture(8, 8, 6);
        let mut other = b2.clone();
        other.band_id = "B10".into();
        let g = Granule::new("g", vec![b2, other], test_meta()).unwrap();
        let t = ShiftTable::identity("B05");
        assert!(matches!(apply_shift_table(&g, &t), Err(RegisterError::MissingTableEntry(b)) if b == "B10"));
    }

    #[test]
    fn single_band_registration_unchanged() {
        let g = Granule::new("g", vec![texture(12, 12, 7)], test_meta()).unwrap();
        let (reg, t) = register_granule(&g, "B05", &RegisterMode::Estimate { max_shift: 3 }).unwrap();
        assert_eq!(reg.granule, g);
        assert_eq!(t, ShiftTable::identity("B05"));
    }

    #[test]
    fn venus_lut_applied_verbatim() {
        let t = venus_default_table();
        assert_eq!(t.entries["B05"], (0, 0));
        assert_eq!(t.entries["B02"], (1, 0));
        assert_eq!(t.entries["B11"], (4, 0));
        assert_eq!(t.entries["B06"], (10, 0));
        assert_eq!(t.entries.len(), 12);

        let ids = ["B05", "B11", "B06"];
        let bands: Vec<BandImage> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let mut b = texture(32, 8, 10 + i as u64);
                b.band_id = id.to_string();
                b
            })
            .collect();
        let g = Granule::new("v", bands.clone(), test_meta()).unwrap();
        let (reg, used) = register_granule(&g, "B05", &RegisterMode::Lut(t.clone())).unwrap();
        assert_eq!(used, t);
        let b11 = reg.granule.band("B11").unwrap();
        assert_eq!(b11.get(4, 3), bands[1].get(0, 3));
        let b06 = reg.granule.band("B06").unwrap();
        assert_eq!(b06.get(10, 0), bands[2].get(0, 0));
        assert_eq!(b06.get(9, 0), 0);
    }

    #[test]
    fn shift_table_json_shape() {
        let t = ShiftTable::identity("B05").with_entry("B10", 4, 0);
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["reference_band"], "B05");
        assert_eq!(v["entries"]["B10"], serde_json::json!([4, 0]));
        assert_eq!(ShiftTable::from_json(&t.to_json()).unwrap(), t);
    }
}
