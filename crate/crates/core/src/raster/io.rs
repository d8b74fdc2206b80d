use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::ColorType;

use super::{BandImage, GeoTransform, Granule, GranuleMeta, RasterError, Result, Sensor};

/// On-disk `meta.json` layout of a granule directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFile {
    pub id: String,
    pub bands: Vec<String>,
    pub sensing_time: DateTime<Utc>,
    pub resolution_m: f64,
    #[serde(default = "default_bit_depth")]
    pub bit_depth: u8,
    pub geotransform: GeoTransform,
    #[serde(default)]
    pub sensor: Sensor,
    #[serde(default)]
    pub detector_id: Option<String>,
}

fn default_bit_depth() -> u8 {
    12
}

impl MetaFile {
    pub fn meta(&self) -> GranuleMeta {
        GranuleMeta {
            sensing_time: self.sensing_time,
            resolution_m: self.resolution_m,
            bit_depth: self.bit_depth,
            geotransform: self.geotransform,
            sensor: self.sensor,
            detector_id: self.detector_id.clone(),
        }
    }

    pub fn from_granule(g: &Granule) -> Self {
        Self {
            id: g.id.clone(),
            bands: g.band_ids(),
            sensing_time: g.meta.sensing_time,
            resolution_m: g.meta.resolution_m,
            bit_depth: g.meta.bit_depth,
            geotransform: g.meta.geotransform,
            sensor: g.meta.sensor,
            detector_id: g.meta.detector_id.clone(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("meta.json");
        let text = std::fs::read_to_string(&path).map_err(|source| RasterError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| RasterError::InvalidMeta(e.to_string()))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RasterError + '_ {
    move |source| RasterError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn tiff_err(path: &Path) -> impl FnOnce(tiff::TiffError) -> RasterError + '_ {
    move |e| RasterError::Tiff {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Read a single-band 16-bit grayscale TIFF (uncompressed or deflate).
pub fn read_band_tiff(path: &Path, band_id: &str) -> Result<BandImage> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut dec = Decoder::new(BufReader::new(file))
        .map_err(tiff_err(path))?
        .with_limits(Limits::unlimited());
    let (w, h) = dec.dimensions().map_err(tiff_err(path))?;
    match dec.colortype().map_err(tiff_err(path))? {
        ColorType::Gray(16) => {}
        other => {
            return Err(RasterError::Tiff {
                path: path.display().to_string(),
                message: format!("expected 16-bit grayscale, found {other:?}"),
            })
        }
    }
    match dec.read_image().map_err(tiff_err(path))? {
        DecodingResult::U16(data) => BandImage::new(band_id, w as usize, h as usize, data),
        _ => Err(RasterError::Tiff {
            path: path.display().to_string(),
            message: "unexpected sample type".into(),
        }),
    }
}

pub fn write_band_tiff(path: &Path, band: &BandImage) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(tiff_err(path))?;
    enc.write_image::<colortype::Gray16>(band.width() as u32, band.height() as u32, band.data())
        .map_err(tiff_err(path))
}

/// Load `meta.json` plus one `<band>.tif` per declared band.
pub fn load_granule(dir: impl AsRef<Path>) -> Result<Granule> {
    let dir = dir.as_ref();
    let mf = MetaFile::read(dir)?;
    let meta = mf.meta();
    meta.validate()?;
    let mut bands = Vec::with_capacity(mf.bands.len());
    for id in &mf.bands {
        let path = dir.join(format!("{id}.tif"));
        if !path.is_file() {
            return Err(RasterError::MissingBand(id.clone()));
        }
        bands.push(read_band_tiff(&path, id)?);
    }
    Granule::new(mf.id, bands, meta)
}

/// Write a granule directory readable by [`load_granule`].
pub fn write_granule(g: &Granule, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for b in g.bands() {
        write_band_tiff(&dir.join(format!("{}.tif", b.band_id)), b)?;
    }
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&MetaFile::from_granule(g))
        .map_err(|e| RasterError::InvalidMeta(e.to_string()))?;
    std::fs::write(&meta_path, text + "\n").map_err(io_err(&meta_path))
}
