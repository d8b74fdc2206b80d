//! Classical vessel candidate detector: tiled threshold consensus, connected
//! components and duplicate merging across tile overlaps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbox::{BBox, PixelWindow};
use crate::components::connected_components;
use crate::labeler::threshold_consensus;
use crate::metrics::iou;
use crate::raster::BandImage;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("tile must be at least 64 px, got {0}")]
    TileTooSmall(usize),
    #[error("overlap {overlap} must be smaller than tile {tile}")]
    OverlapTooLarge { tile: usize, overlap: usize },
    #[error("min_area {min} must be below max_area {max}")]
    AreaRange { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "bbox")]
    pub bbox: BBox,
    pub score: f64,
    pub band_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    /// Smallest accepted box area, px².
    pub min_area: f64,
    /// Largest accepted box area, px².
    pub max_area: f64,
    pub tile: usize,
    pub overlap: usize,
    /// Candidates scoring below this contrast are dropped.
    pub min_score: f64,
    /// Boxes overlapping a higher-scored box above this IoU are merged away.
    pub merge_iou: f64,
    /// Ring width around a candidate used for the local background, px.
    pub background_ring: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            min_area: 4.0,
            max_area: 10_000.0,
            tile: 512,
            overlap: 32,
            min_score: 0.25,
            merge_iou: 0.5,
            background_ring: 3,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.tile < 64 {
            return Err(DetectError::TileTooSmall(self.tile));
        }
        if self.overlap >= self.tile {
            return Err(DetectError::OverlapTooLarge {
                tile: self.tile,
                overlap: self.overlap,
            });
        }
        if !(self.min_area < self.max_area) {
            return Err(DetectError::AreaRange {
                min: self.min_area,
                max: self.max_area,
            });
        }
        Ok(())
    }
}

/// Tile origins along one axis: stride `tile - overlap`, last tile flush
/// with the image edge.
fn tile_starts(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    if len <= tile {
        return vec![0];
    }
    let stride = tile - overlap;
    let mut starts: Vec<usize> = (0..).map(|k| k * stride).take_while(|&s| s + tile < len).collect();
    starts.push(len - tile);
    starts.dedup();
    starts
}

pub fn tiles(width: usize, height: usize, tile: usize, overlap: usize) -> Vec<PixelWindow> {
    let xs = tile_starts(width, tile, overlap);
    let ys = tile_starts(height, tile, overlap);
    ys.iter()
        .flat_map(|&r0| {
            xs.iter().map(move |&c0| PixelWindow {
                c0,
                r0,
                c1: (c0 + tile).min(width),
                r1: (r0 + tile).min(height),
            })
        })
        .collect()
}

fn detect_in_tile(band: &BandImage, win: &PixelWindow, cfg: &DetectConfig) -> Vec<Detection> {
    let pixels = band.window_values(win);
    // constant tiles (open sea) carry nothing to threshold
    let Ok(cm) = threshold_consensus(&pixels) else {
        return Vec::new();
    };
    let (tw, th) = (win.width(), win.height());
    let touches_left = win.c0 > 0;
    let touches_top = win.r0 > 0;
    let touches_right = win.c1 < band.width();
    let touches_bottom = win.r1 < band.height();
    let mut out = Vec::new();
    for comp in connected_components(&cm.mask, tw, th) {
        // cut by an interior tile edge: a neighbouring tile sees it whole
        if (touches_left && comp.min_c == 0)
            || (touches_top && comp.min_r == 0)
            || (touches_right && comp.max_c == tw - 1)
            || (touches_bottom && comp.max_r == th - 1)
        {
            continue;
        }
        let local = comp.bbox();
        let area = local.area();
        if area < cfg.min_area || area > cfg.max_area {
            continue;
        }
        let fg_mean = comp.pixels.iter().map(|&i| pixels[i] as f64).sum::<f64>() / comp.len() as f64;
        let ring = cfg.background_ring;
        let r0 = comp.min_r.saturating_sub(ring);
        let c0 = comp.min_c.saturating_sub(ring);
        let r1 = (comp.max_r + ring + 1).min(th);
        let c1 = (comp.max_c + ring + 1).min(tw);
        let (mut bg_sum, mut bg_n) = (0.0, 0usize);
        for r in r0..r1 {
            for c in c0..c1 {
                let i = r * tw + c;
                if !cm.mask[i] {
                    bg_sum += pixels[i] as f64;
                    bg_n += 1;
                }
            }
        }
        if bg_n == 0 {
            for (i, &m) in cm.mask.iter().enumerate() {
                if !m {
                    bg_sum += pixels[i] as f64;
                    bg_n += 1;
                }
            }
        }
        let bg_mean = if bg_n > 0 { bg_sum / bg_n as f64 } else { 0.0 };
        let score = if fg_mean > 0.0 {
            ((fg_mean - bg_mean) / fg_mean).clamp(0.0, 1.0)
        } else {
            0.0
        };
        if score < cfg.min_score {
            continue;
        }
        out.push(Detection {
            bbox: local.translated(win.c0 as f64, win.r0 as f64),
            score,
            band_id: band.band_id.clone(),
        });
    }
    out
}

/// Greedy duplicate suppression in canonical order (score descending, then
/// y, x, h, w ascending), so the result does not depend on input order.
pub fn merge_duplicates(mut dets: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    dets.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.bbox.y_min.total_cmp(&b.bbox.y_min))
            .then(a.bbox.x_min.total_cmp(&b.bbox.x_min))
            .then(a.bbox.h.total_cmp(&b.bbox.h))
            .then(a.bbox.w.total_cmp(&b.bbox.w))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for d in dets {
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Detect bright vessel candidates on one band.
pub fn detect(band: &BandImage, cfg: &DetectConfig) -> Result<Vec<Detection>, DetectError> {
    cfg.validate()?;
    let windows = tiles(band.width(), band.height(), cfg.tile, cfg.overlap);
    let raw: Vec<Detection> = windows
        .par_iter()
        .flat_map_iter(|w| detect_in_tile(band, w, cfg))
        .collect();
    Ok(merge_duplicates(raw, cfg.merge_iou))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sea_with(rects: &[(usize, usize, usize, usize)], w: usize, h: usize) -> BandImage {
        BandImage::from_fn("B08", w, h, |c, r| {
            if rects
                .iter()
                .any(|&(x, y, rw, rh)| (x..x + rw).contains(&c) && (y..y + rh).contains(&r))
            {
                900
            } else {
                100
            }
        })
    }

    #[test]
    fn flat_sea_is_empty() {
        let b = BandImage::filled("B08", 300, 200, 100);
        assert!(detect(&b, &DetectConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn single_vessel() {
        let b = sea_with(&[(40, 50, 10, 4)], 256, 256);
        let d = detect(&b, &DetectConfig::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].bbox, BBox::new(40.0, 50.0, 10.0, 4.0));
        assert!((d[0].score - 800.0 / 900.0).abs() < 1e-12);
    }

    #[test]
    fn vessel_straddling_tile_boundary_reported_once() {
        let cfg = DetectConfig {
            tile: 64,
            overlap: 16,
            ..DetectConfig::default()
        };
        // stride 48: the hull crosses x = 48 and x = 64
        let b = sea_with(&[(44, 20, 10, 4)], 200, 100);
        let d = detect(&b, &cfg).unwrap();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].bbox, BBox::new(44.0, 20.0, 10.0, 4.0));
    }

    #[test]
    fn area_limits_respected() {
        let cfg = DetectConfig {
            min_area: 10.0,
            max_area: 30.0,
            tile: 64,
            overlap: 16,
            ..DetectConfig::default()
        };
        let b = sea_with(&[(5, 5, 2, 2), (20, 20, 5, 5), (40, 10, 8, 8)], 64, 64);
        let d = detect(&b, &cfg).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].bbox.area(), 25.0);
        assert!(d.iter().all(|x| x.bbox.area() >= 10.0 && x.bbox.area() <= 30.0));
    }

    #[test]
    fn config_checked() {
        let b = BandImage::filled("B08", 10, 10, 1);
        let bad = DetectConfig {
            tile: 32,
            ..DetectConfig::default()
        };
        assert_eq!(detect(&b, &bad), Err(DetectError::TileTooSmall(32)));
    }

    #[test]
    fn merge_order_independent() {
        let mk = |x: f64, s: f64| Detection {
            bbox: BBox::new(x, 0.0, 10.0, 10.0),
            score: s,
            band_id: "B".into(),
        };
        let a = vec![mk(0.0, 0.5), mk(1.0, 0.9), mk(30.0, 0.2), mk(2.0, 0.5)];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(merge_duplicates(a, 0.5), merge_duplicates(b, 0.5));
    }

    #[test]
    fn tiles_cover_image() {
        let ws = tiles(200, 70, 64, 16);
        for c in 0..200 {
            for r in 0..70 {
                assert!(ws.iter().any(|w| (w.c0..w.c1).contains(&c) && (w.r0..w.r1).contains(&r)));
            }
        }
    }
}
