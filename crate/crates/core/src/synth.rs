//! Seeded synthetic scenes: textured sea, bright rectangular vessels,
//! per-band integer misregistration, and AIS tracks for every vessel.
//!
//! Everything is a pure function of `(seed, index, config)`.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ais::{write_ais_csv, AisRecord, Footprint, Point, EARTH_RADIUS_M, FISHING_STATUS};
use crate::aiscoco::{merge_ais, AiscocoDoc};
use crate::bbox::BBox;
use crate::coregister::ShiftTable;
use crate::raster::{max_dn, write_granule, BandImage, GeoTransform, Granule, GranuleMeta, Sensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub bands: Vec<String>,
    pub reference_band: String,
    /// Inclusive range of vessel counts.
    pub vessels: (usize, usize),
    /// Largest injected band offset, px, per axis.
    pub max_shift: i64,
    pub sea_dn: f64,
    /// Amplitude of the smooth swell pattern, DN.
    pub swell_dn: f64,
    /// Per-pixel sea noise, DN (std).
    pub noise_dn: f64,
    pub vessel_dn: (f64, f64),
    /// Vessel length and beam ranges, px.
    pub vessel_len: (usize, usize),
    pub vessel_beam: (usize, usize),
    pub resolution_m: f64,
    pub bit_depth: u8,
    /// AIS position noise, meters (std).
    pub ais_noise_m: f64,
    /// Fraction of vessels broadcasting no AIS.
    pub dark_fraction: f64,
    pub center_lat: f64,
    pub center_lon: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            bands: ["B02", "B03", "B04", "B08"].map(String::from).to_vec(),
            reference_band: "B03".into(),
            vessels: (5, 15),
            max_shift: 3,
            sea_dn: 300.0,
            swell_dn: 25.0,
            noise_dn: 8.0,
            vessel_dn: (1200.0, 2400.0),
            vessel_len: (5, 16),
            vessel_beam: (3, 7),
            resolution_m: 10.0,
            bit_depth: 12,
            ais_noise_m: 8.0,
            dark_fraction: 0.0,
            center_lat: 55.6,
            center_lon: 10.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthVessel {
    /// Box in the reference band frame.
    pub bbox: BBox,
    pub mmsi: Option<u64>,
    pub fishing: bool,
    pub heading_deg: f64,
    pub speed_mps: f64,
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub granule: Granule,
    pub vessels: Vec<SynthVessel>,
    pub ais: Vec<AisRecord>,
    /// Table that registers every band onto the reference.
    pub shifts: ShiftTable,
}

impl SynthScene {
    pub fn truth_boxes(&self) -> Vec<BBox> {
        self.vessels.iter().map(|v| v.bbox).collect()
    }

    /// MMSI of the vessel under each truth box.
    pub fn truth_mmsi(&self) -> Vec<Option<u64>> {
        self.vessels.iter().map(|v| v.mmsi).collect()
    }
}

/// North-up transform whose local frame is centered on `(lat, lon)`.
pub fn centered_transform(lat: f64, lon: f64, width: usize, height: usize, pixel_m: f64) -> GeoTransform {
    let east = EARTH_RADIUS_M * lat.to_radians().cos() * lon.to_radians();
    let north = EARTH_RADIUS_M * lat.to_radians();
    GeoTransform::north_up(
        east - width as f64 / 2.0 * pixel_m,
        north + height as f64 / 2.0 * pixel_m,
        pixel_m,
    )
}

fn place_vessels(rng: &mut ChaCha8Rng, cfg: &SynthConfig, n: usize) -> Vec<BBox> {
    let margin = (cfg.max_shift + 6) as usize;
    let gap = 6.0;
    let mut out: Vec<BBox> = Vec::new();
    let mut tries = 0;
    while out.len() < n && tries < 10_000 {
        tries += 1;
        let len = rng.gen_range(cfg.vessel_len.0..=cfg.vessel_len.1);
        let beam = rng.gen_range(cfg.vessel_beam.0..=cfg.vessel_beam.1);
        let (w, h) = if rng.gen_bool(0.5) { (len, beam) } else { (beam, len) };
        if w + 2 * margin >= cfg.width || h + 2 * margin >= cfg.height {
            continue;
        }
        let x = rng.gen_range(margin..cfg.width - margin - w);
        let y = rng.gen_range(margin..cfg.height - margin - h);
        let b = BBox::new(x as f64, y as f64, w as f64, h as f64);
        if out.iter().all(|o| o.expanded(gap).intersection_area(&b) == 0.0) {
            out.push(b);
        }
    }
    out
}

/// Base radiance field over the image plus a `pad` margin on every side.
fn base_field(rng: &mut ChaCha8Rng, cfg: &SynthConfig, boxes: &[BBox], pad: usize) -> (Vec<f64>, usize) {
    let fw = cfg.width + 2 * pad;
    let fh = cfg.height + 2 * pad;
    let cell = 16usize;
    let gw = fw / cell + 2;
    let gh = fh / cell + 2;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let lattice: Vec<f64> = (0..gw * gh).map(|_| unit.sample(rng)).collect();
    let (kx, ky, phase) = (rng.gen_range(0.02..0.08), rng.gen_range(0.02..0.08), rng.gen_range(0.0..6.28));
    let mut f = vec![0.0; fw * fh];
    for r in 0..fh {
        for c in 0..fw {
            let (gx, gy) = (c as f64 / cell as f64, r as f64 / cell as f64);
            let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
            let (tx, ty) = (gx - ix as f64, gy - iy as f64);
            let l = |i: usize, j: usize| lattice[j * gw + i];
            let smooth = (1.0 - ty) * ((1.0 - tx) * l(ix, iy) + tx * l(ix + 1, iy))
                + ty * ((1.0 - tx) * l(ix, iy + 1) + tx * l(ix + 1, iy + 1));
            let swell = (kx * c as f64 + ky * r as f64 + phase).sin();
            f[r * fw + c] = cfg.sea_dn + cfg.swell_dn * 0.5 * (smooth + swell) + cfg.noise_dn * unit.sample(rng);
        }
    }
    for b in boxes {
        let dn = rng.gen_range(cfg.vessel_dn.0..cfg.vessel_dn.1);
        let (x0, y0) = (b.x_min as usize + pad, b.y_min as usize + pad);
        for r in y0..y0 + b.h as usize {
            for c in x0..x0 + b.w as usize {
                f[r * fw + c] = dn + 0.05 * dn * unit.sample(rng);
            }
        }
    }
    (f, fw)
}

fn ais_for(
    rng: &mut ChaCha8Rng,
    v: &SynthVessel,
    fp: &Footprint,
    mmsi: u64,
    noise: &Normal<f64>,
) -> Vec<AisRecord> {
    let (c, r) = v.bbox.center();
    let p = fp.pixel_to_meters(c, r);
    let th = v.heading_deg.to_radians();
    let (ux, uy) = (th.sin(), th.cos());
    let offsets = [-170i64, -50, 70, 190];
    let ship_type = if v.fishing { "Fishing" } else { ["Cargo", "Tanker", "Passenger"][rng.gen_range(0..3)] };
    offsets
        .iter()
        .map(|&dt| {
            let q = Point::new(
                p.x + ux * v.speed_mps * dt as f64 + noise.sample(rng),
                p.y + uy * v.speed_mps * dt as f64 + noise.sample(rng),
            );
            let (lat, lon) = fp.projection.to_latlon(q);
            AisRecord {
                mmsi,
                timestamp: fp.sensing_time + Duration::seconds(dt),
                lat,
                lon,
                sog: Some(v.speed_mps * 1.943_844),
                nav_status: if v.fishing { FISHING_STATUS.into() } else { "Under way using engine".into() },
                ship_type: ship_type.into(),
                length_m: Some(v.bbox.w.max(v.bbox.h) * 10.0),
                width_m: Some(v.bbox.w.min(v.bbox.h) * 10.0),
            }
        })
        .collect()
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 6, 1, 10, 30, 0).unwrap()
}

/// Scene `index` of the dataset generated from `seed`.
pub fn synth_scene(seed: u64, index: usize, cfg: &SynthConfig) -> SynthScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let n = rng.gen_range(cfg.vessels.0..=cfg.vessels.1);
    let boxes = place_vessels(&mut rng, cfg, n);
    let pad = cfg.max_shift.unsigned_abs() as usize;
    let (field, fw) = base_field(&mut rng, cfg, &boxes, pad);
    let top = max_dn(cfg.bit_depth) as f64;

    let mut shifts = ShiftTable::identity(cfg.reference_band.clone());
    let mut bands = Vec::with_capacity(cfg.bands.len());
    for id in &cfg.bands {
        let (sx, sy) = if *id == cfg.reference_band {
            (0, 0)
        } else {
            (
                rng.gen_range(-cfg.max_shift..=cfg.max_shift),
                rng.gen_range(-cfg.max_shift..=cfg.max_shift),
            )
        };
        let gain = rng.gen_range(0.9..1.1);
        let offset = rng.gen_range(0.0..40.0);
        // band pixel (c, r) sees the scene at (c - sx, r - sy)
        let band = BandImage::from_fn(id.clone(), cfg.width, cfg.height, |c, r| {
            let fc = (c as i64 - sx + pad as i64) as usize;
            let fr = (r as i64 - sy + pad as i64) as usize;
            (offset + gain * field[fr * fw + fc]).round().clamp(0.0, top) as u16
        });
        shifts.entries.insert(id.clone(), (-sx, -sy));
        bands.push(band);
    }

    let lat = cfg.center_lat + 0.03 * (index / 10) as f64;
    let lon = cfg.center_lon + 0.06 * (index % 10) as f64;
    let meta = GranuleMeta {
        sensing_time: base_time() + Duration::minutes(37 * index as i64),
        resolution_m: cfg.resolution_m,
        bit_depth: cfg.bit_depth,
        geotransform: centered_transform(lat, lon, cfg.width, cfg.height, cfg.resolution_m),
        sensor: Sensor::S2,
        detector_id: None,
    };
    let granule = Granule::new(format!("synth_{index:03}"), bands, meta).expect("synthetic granule is valid");
    let fp = Footprint::of_granule(&granule);

    let noise = Normal::new(0.0, cfg.ais_noise_m.max(0.0)).expect("finite noise");
    let mut vessels = Vec::with_capacity(boxes.len());
    let mut ais = Vec::new();
    for (k, b) in boxes.into_iter().enumerate() {
        let dark = rng.gen_bool(cfg.dark_fraction.clamp(0.0, 1.0));
        let mut v = SynthVessel {
            bbox: b,
            mmsi: None,
            fishing: rng.gen_bool(0.3),
            heading_deg: rng.gen_range(0.0..360.0),
            speed_mps: rng.gen_range(0.0..6.0),
        };
        if !dark {
            let mmsi = 219_000_000 + index as u64 * 100 + k as u64;
            ais.extend(ais_for(&mut rng, &v, &fp, mmsi, &noise));
            v.mmsi = Some(mmsi);
        }
        vessels.push(v);
    }
    // traffic well outside the footprint
    for k in 0..3 {
        let far = SynthVessel {
            bbox: BBox::new(-600.0 - 80.0 * k as f64, 100.0, 8.0, 3.0),
            mmsi: None,
            fishing: false,
            heading_deg: 90.0,
            speed_mps: 4.0,
        };
        ais.extend(ais_for(&mut rng, &far, &fp, 257_000_000 + index as u64 * 100 + k, &noise));
    }
    ais.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.mmsi.cmp(&b.mmsi)));

    SynthScene {
        granule,
        vessels,
        ais,
        shifts,
    }
}

pub fn synth_dataset(seed: u64, count: usize, cfg: &SynthConfig) -> Vec<SynthScene> {
    (0..count).map(|i| synth_scene(seed, i, cfg)).collect()
}

/// Ground-truth AISCOCO document: one image per scene, one annotation per
/// vessel, AIS attributes on the vessels that broadcast.
pub fn truth_doc(scenes: &[SynthScene]) -> AiscocoDoc {
    let mut doc = AiscocoDoc::empty();
    let mut links = Vec::new();
    let mut ais = Vec::new();
    for s in scenes {
        let first = doc.next_annotation_id();
        doc.push_image(
            &s.granule.id,
            s.granule.width() as u32,
            s.granule.height() as u32,
            s.granule.meta.sensing_time,
            s.vessels.iter().map(|v| (v.bbox, None)),
            1,
        );
        for (k, v) in s.vessels.iter().enumerate() {
            if let Some(m) = v.mmsi {
                links.push((first + k as u64, m));
            }
        }
        ais.extend(s.ais.iter().cloned());
    }
    merge_ais(&doc, links, &ais).expect("truth links refer to fresh annotations")
}

/// Lay a dataset out on disk: `granules/<id>/`, `truth.json`, `ais.csv`.
pub fn write_dataset(scenes: &[SynthScene], dir: impl AsRef<Path>) -> anyhow::Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("granules"))?;
    for s in scenes {
        write_granule(&s.granule, dir.join("granules").join(&s.granule.id))?;
    }
    crate::aiscoco::write_aiscoco(&truth_doc(scenes), dir.join("truth.json"))?;
    let mut all: Vec<AisRecord> = scenes.iter().flat_map(|s| s.ais.iter().cloned()).collect();
    all.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.mmsi.cmp(&b.mmsi)));
    write_ais_csv(std::fs::File::create(dir.join("ais.csv"))?, &all)?;
    Ok(())
}
