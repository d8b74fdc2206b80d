//! Per-band information analysis: vessel vs sea intensity, variability,
//! gradient-feature counts and band-to-band dissimilarity.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbox::{BBox, PixelWindow};
use crate::plot;
use crate::raster::{BandImage, Granule};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("band {band}: only {available} sea pixels available, {needed} requested")]
    InsufficientSeaPixels {
        band: String,
        available: usize,
        needed: usize,
    },
    #[error("no box pixels to analyse")]
    EmptyBoxes,
    #[error("band {0} is constant over the boxes; correlation undefined")]
    ConstantBand(String),
    #[error("dissimilarity needs at least two bands")]
    TooFewBands,
    #[error("thresholds must be ascending values in (0, 1)")]
    InvalidTaus,
    #[error("valid mask length does not match the image")]
    MaskSize,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

pub const DEFAULT_TAUS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
/// Dilation around boxes excluded from the sea sample, px.
pub const SEA_DILATION: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub sea_sample: usize,
    pub seed: u64,
    pub taus: Vec<f64>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            sea_sample: 1000,
            seed: 0,
            taus: DEFAULT_TAUS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HogPoint {
    pub tau: f64,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    pub band_id: String,
    pub mean_vessel_dn: f64,
    pub mean_sea_dn: f64,
    pub std_dn: f64,
    pub hog_counts: Vec<HogPoint>,
}

fn box_windows(boxes: &[BBox], w: usize, h: usize) -> Vec<PixelWindow> {
    boxes.iter().filter_map(|b| b.pixel_window(w, h)).collect()
}

fn union_mask(wins: &[PixelWindow], w: usize, h: usize, grow: usize) -> Vec<bool> {
    let mut m = vec![false; w * h];
    for win in wins {
        let (c0, r0) = (win.c0.saturating_sub(grow), win.r0.saturating_sub(grow));
        let (c1, r1) = ((win.c1 + grow).min(w), (win.r1 + grow).min(h));
        for r in r0..r1 {
            m[r * w + c0..r * w + c1].iter_mut().for_each(|x| *x = true);
        }
    }
    m
}

/// Population mean and standard deviation.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_taus(taus: &[f64]) -> Result<()> {
    let ok = taus.iter().all(|t| *t > 0.0 && *t < 1.0) && taus.windows(2).all(|p| p[0] < p[1]);
    if ok {
        Ok(())
    } else {
        Err(AnalysisError::InvalidTaus)
    }
}

/// Statistics for one band. `valid` marks usable pixels (e.g. the overlap
/// left after registration); invalid pixels are never sampled.
pub fn band_stats_one(band: &BandImage, boxes: &[BBox], valid: Option<&[bool]>, cfg: &StatsConfig) -> Result<BandStats> {
    let (w, h) = (band.width(), band.height());
    if valid.is_some_and(|v| v.len() != w * h) {
        return Err(AnalysisError::MaskSize);
    }
    let is_valid = |i: usize| valid.map_or(true, |v| v[i]);
    let wins = box_windows(boxes, w, h);
    let in_box = union_mask(&wins, w, h, 0);
    let data = band.data();
    let vessel = (0..w * h).filter(|&i| in_box[i] && is_valid(i)).map(|i| data[i] as f64);
    let (mean_vessel_dn, _) = mean_std(vessel);
    if mean_vessel_dn.is_nan() {
        return Err(AnalysisError::EmptyBoxes);
    }
    let near = union_mask(&wins, w, h, SEA_DILATION);
    let sea: Vec<usize> = (0..w * h).filter(|&i| !near[i] && is_valid(i)).collect();
    if sea.len() < cfg.sea_sample || cfg.sea_sample == 0 {
        return Err(AnalysisError::InsufficientSeaPixels {
            band: band.band_id.clone(),
            available: sea.len(),
            needed: cfg.sea_sample,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked: Vec<usize> = sample(&mut rng, sea.len(), cfg.sea_sample).into_vec();
    picked.sort_unstable();
    let (mean_sea_dn, _) = mean_std(picked.iter().map(|&k| data[sea[k]] as f64));
    let (_, std_dn) = mean_std((0..w * h).filter(|&i| is_valid(i)).map(|i| data[i] as f64));
    let hog_counts = hog_feature_count(band, boxes, &cfg.taus)?;
    Ok(BandStats {
        band_id: band.band_id.clone(),
        mean_vessel_dn,
        mean_sea_dn,
        std_dn,
        hog_counts,
    })
}

/// Statistics for every band; `boxes` is keyed by band id, bands without an
/// entry use the `"*"` entry.
pub fn band_stats(
    g: &Granule,
    boxes: &BTreeMap<String, Vec<BBox>>,
    valid: Option<&[bool]>,
    cfg: &StatsConfig,
) -> Result<Vec<BandStats>> {
    check_taus(&cfg.taus)?;
    g.bands()
        .iter()
        .map(|b| {
            let bx = boxes
                .get(&b.band_id)
                .or_else(|| boxes.get("*"))
                .map_or(&[][..], Vec::as_slice);
            band_stats_one(b, bx, valid, cfg)
        })
        .collect()
}

/// Central-difference gradient magnitude with edge clamping.
pub fn gradient_magnitude(band: &BandImage, c: usize, r: usize) -> f64 {
    let (w, h) = (band.width(), band.height());
    let px = |c: usize, r: usize| band.get(c, r) as f64;
    let gx = (px((c + 1).min(w - 1), r) - px(c.saturating_sub(1), r)) / 2.0;
    let gy = (px(c, (r + 1).min(h - 1)) - px(c, r.saturating_sub(1))) / 2.0;
    gx.hypot(gy)
}

/// Max gradient magnitude of each non-overlapping 2×2 cell inside the boxes.
pub fn cell_maxima(band: &BandImage, boxes: &[BBox]) -> Vec<f64> {
    let mut out = Vec::new();
    for win in box_windows(boxes, band.width(), band.height()) {
        let mut r = win.r0;
        while r + 2 <= win.r1 {
            let mut c = win.c0;
            while c + 2 <= win.c1 {
                let m = [(c, r), (c + 1, r), (c, r + 1), (c + 1, r + 1)]
                    .iter()
                    .map(|&(cc, rr)| gradient_magnitude(band, cc, rr))
                    .fold(0.0, f64::max);
                out.push(m);
                c += 2;
            }
            r += 2;
        }
    }
    out
}

/// Fraction of box cells whose strongest gradient exceeds `τ` times the
/// strongest over all box cells, for each `τ`.
pub fn hog_feature_count(band: &BandImage, boxes: &[BBox], taus: &[f64]) -> Result<Vec<HogPoint>> {
    check_taus(taus)?;
    let cells = cell_maxima(band, boxes);
    if cells.is_empty() {
        return Err(AnalysisError::EmptyBoxes);
    }
    let gmax = cells.iter().copied().fold(0.0, f64::max);
    Ok(taus
        .iter()
        .map(|&tau| {
            let n = if gmax > 0.0 {
                cells.iter().filter(|&&m| m > tau * gmax).count()
            } else {
                0
            };
            HogPoint {
                tau,
                count: n as f64 / cells.len() as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DissimMetric {
    #[serde(rename = "PCC")]
    Pcc,
    #[serde(rename = "ED")]
    Ed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    pub metric: DissimMetric,
    pub band_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Pearson correlation (population moments). `None` for a constant vector.
pub fn pcc(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Plain Euclidean distance.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Concatenated pixel values of `boxes`, box by box in raster order.
pub fn box_vector(band: &BandImage, boxes: &[BBox]) -> Vec<f64> {
    box_windows(boxes, band.width(), band.height())
        .iter()
        .flat_map(|w| band.window_values(w))
        .map(f64::from)
        .collect()
}

/// Pairwise band dissimilarity over the box pixels. ED is divided by √n so
/// values do not depend on how many pixels the boxes cover.
pub fn dissimilarity(g: &Granule, boxes: &[BBox], metric: DissimMetric) -> Result<DissimilarityMatrix> {
    let k = g.bands().len();
    if k < 2 {
        return Err(AnalysisError::TooFewBands);
    }
    let vecs: Vec<Vec<f64>> = g.bands().iter().map(|b| box_vector(b, boxes)).collect();
    let n = vecs[0].len();
    if n == 0 {
        return Err(AnalysisError::EmptyBoxes);
    }
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = match metric {
                DissimMetric::Pcc => {
                    let r = pcc(&vecs[i], &vecs[j]).ok_or_else(|| {
                        let bad = if pcc(&vecs[i], &vecs[i]).is_none() { i } else { j };
                        AnalysisError::ConstantBand(g.bands()[bad].band_id.clone())
                    })?;
                    if i == j {
                        1.0
                    } else {
                        r
                    }
                }
                DissimMetric::Ed => {
                    if i == j {
                        0.0
                    } else {
                        euclidean(&vecs[i], &vecs[j]) / (n as f64).sqrt()
                    }
                }
            };
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(DissimilarityMatrix {
        metric,
        band_ids: g.band_ids(),
        values,
    })
}

/// Detection quality on a single band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub bands: Vec<BandStats>,
    pub metrics: BTreeMap<String, BandMetrics>,
    pub pcc: Option<DissimilarityMatrix>,
    pub ed: Option<DissimilarityMatrix>,
}

impl BandReport {
    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

pub fn band_report(
    stats: Vec<BandStats>,
    pcc: Option<DissimilarityMatrix>,
    ed: Option<DissimilarityMatrix>,
    metrics: BTreeMap<String, BandMetrics>,
) -> BandReport {
    BandReport {
        bands: stats,
        metrics,
        pcc,
        ed,
    }
}

/// SVG panels of a report, as `(file name, contents)`.
pub fn report_plots(r: &BandReport) -> Vec<(&'static str, String)> {
    if r.is_empty() {
        return Vec::new();
    }
    let ids: Vec<String> = r.bands.iter().map(|b| b.band_id.clone()).collect();
    let mut out = vec![(
        "band_intensity.svg",
        plot::bar_chart(
            "Mean intensity per band",
            "DN",
            &ids,
            &[
                ("vessel", r.bands.iter().map(|b| b.mean_vessel_dn).collect()),
                ("sea", r.bands.iter().map(|b| b.mean_sea_dn).collect()),
            ],
        ),
    )];
    let metric = |f: fn(&BandMetrics) -> f64| -> Vec<f64> {
        ids.iter().map(|id| r.metrics.get(id).map_or(0.0, f)).collect()
    };
    out.push((
        "band_metrics.svg",
        plot::bar_chart(
            "Detection metrics per band",
            "score",
            &ids,
            &[
                ("precision", metric(|m| m.precision)),
                ("recall", metric(|m| m.recall)),
                ("F1", metric(|m| m.f1)),
            ],
        ),
    ));
    let taus: Vec<f64> = r.bands[0].hog_counts.iter().map(|p| p.tau).collect();
    let labels: Vec<String> = taus.iter().map(|t| format!("tau {t}")).collect();
    let hog: Vec<(&str, Vec<f64>)> = labels
        .iter()
        .enumerate()
        .map(|(k, l)| {
            (
                l.as_str(),
                r.bands.iter().map(|b| b.hog_counts.get(k).map_or(0.0, |p| p.count)).collect(),
            )
        })
        .collect();
    out.push((
        "band_hog.svg",
        plot::bar_chart("Normalized gradient-feature count", "fraction of cells", &ids, &hog),
    ));
    if let Some(m) = &r.pcc {
        out.push(("dissim_pcc.svg", plot::heatmap("PCC", &m.band_ids, &m.values, -1.0, 1.0)));
    }
    if let Some(m) = &r.ed {
        let vmax = m.values.iter().flatten().copied().fold(0.0, f64::max);
        out.push(("dissim_ed.svg", plot::heatmap("ED / sqrt(n)", &m.band_ids, &m.values, 0.0, vmax)));
    }
    out
}

/// Write `band_report.json` and the SVG panels into `dir`. An empty report
/// writes only the JSON.
pub fn write_band_report(r: &BandReport, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join("band_report.json");
    std::fs::write(&json, serde_json::to_string_pretty(r)? + "\n")?;
    written.push(json);
    for (name, svg) in report_plots(r) {
        let p = dir.join(name);
        std::fs::write(&p, svg)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::test_meta;
    use proptest::prelude::*;

    fn scene(id: &str, vessel: u16, sea: u16) -> BandImage {
        BandImage::from_fn(id, 64, 64, |c, r| {
            if (20..30).contains(&c) && (30..34).contains(&r) {
                vessel
            } else {
                sea
            }
        })
    }

    fn hull() -> Vec<BBox> {
        vec![BBox::new(20.0, 30.0, 10.0, 4.0)]
    }

    #[test]
    fn constant_band() {
        let b = BandImage::filled("B1", 64, 64, 321);
        let s = band_stats_one(&b, &hull(), None, &StatsConfig::default()).unwrap();
        assert_eq!((s.mean_vessel_dn, s.mean_sea_dn, s.std_dn), (321.0, 321.0, 0.0));
        assert!(s.hog_counts.iter().all(|p| p.count == 0.0));
    }

    #[test]
    fn vessel_and_sea_means() {
        let s = band_stats_one(&scene("B1", 900, 100), &hull(), None, &StatsConfig::default()).unwrap();
        assert_eq!(s.mean_vessel_dn, 900.0);
        assert_eq!(s.mean_sea_dn, 100.0);
    }

    #[test]
    fn population_std() {
        let b = BandImage::new("B1", 2, 2, vec![0, 0, 4, 4]).unwrap();
        let (_, sd) = mean_std(b.data().iter().map(|&v| v as f64));
        assert_eq!(sd, 2.0);
    }

    #[test]
    fn too_little_sea() {
        let b = BandImage::filled("B1", 20, 20, 1);
        assert!(matches!(
            band_stats_one(&b, &[BBox::new(5.0, 5.0, 2.0, 2.0)], None, &StatsConfig::default()),
            Err(AnalysisError::InsufficientSeaPixels { .. })
        ));
    }

    #[test]
    fn stats_invariant_to_box_order() {
        let b = BandImage::from_fn("B1", 80, 80, |c, r| ((c * 7 + r * 13) % 50) as u16);
        let boxes = vec![BBox::new(3.0, 4.0, 6.0, 5.0), BBox::new(40.0, 41.0, 7.0, 3.0), BBox::new(5.0, 6.0, 6.0, 6.0)];
        let mut rev = boxes.clone();
        rev.reverse();
        let cfg = StatsConfig::default();
        assert_eq!(band_stats_one(&b, &boxes, None, &cfg).unwrap(), band_stats_one(&b, &rev, None, &cfg).unwrap());
    }

    fn step_band() -> BandImage {
        BandImage::from_fn("B1", 32, 32, |c, _| if c < 13 { 10 } else { 200 })
    }

    #[test]
    fn hog_step_edge_matches_scan() {
        let band = step_band();
        let boxes = vec![BBox::new(6.0, 4.0, 14.0, 10.0)];
        let taus = [0.1, 0.3, 0.5, 0.7, 0.9];
        let got = hog_feature_count(&band, &boxes, &taus).unwrap();
        // oracle: each cell scanned pixel by pixel
        let mut maxima = Vec::new();
        for cy in 0..5 {
            for cx in 0..7 {
                let mut m: f64 = 0.0;
                for (dc, dr) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let (c, r) = (6 + 2 * cx + dc, 4 + 2 * cy + dr);
                    let l = band.get(c - 1, r) as f64;
                    let rr = band.get(c + 1, r) as f64;
                    m = m.max(((rr - l) / 2.0).abs());
                }
                maxima.push(m);
            }
        }
        let g = maxima.iter().copied().fold(0.0, f64::max);
        for p in &got {
            let want = maxima.iter().filter(|&&m| m > p.tau * g).count() as f64 / 35.0;
            assert_eq!(p.count, want);
        }
        assert!(got.windows(2).all(|w| w[0].count >= w[1].count));
        // tiny tau: every cell with any gradient
        let tiny = hog_feature_count(&band, &boxes, &[1e-9]).unwrap()[0].count;
        assert_eq!(tiny, maxima.iter().filter(|&&m| m > 0.0).count() as f64 / 35.0);
    }

    #[test]
    fn hog_errors() {
        let band = step_band();
        assert!(matches!(hog_feature_count(&band, &[], &DEFAULT_TAUS), Err(AnalysisError::EmptyBoxes)));
        assert!(matches!(
            hog_feature_count(&band, &hull(), &[0.5, 0.2]),
            Err(AnalysisError::InvalidTaus)
        ));
    }

    #[test]
    fn pcc_and_ed_fixtures() {
        assert!((pcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        let r = pcc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        // Σdxdy = 3, Σdx² = 2, Σdy² = 14/3
        assert!((r - 3.0 / (2.0f64 * 14.0 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r - 0.9820).abs() < 1e-4);
        assert_eq!(euclidean(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]), 1.0);
        assert!(pcc(&[2.0, 2.0], &[1.0, 3.0]).is_none());
    }

    #[test]
    fn dissimilarity_duplicate_band() {
        let a = BandImage::from_fn("B1", 64, 64, |c, r| ((c * 3 + r * 5) % 40) as u16);
        let mut b = a.clone();
        b.band_id = "B2".into();
        let g = Granule::new("g", vec![a, b], test_meta()).unwrap();
        let p = dissimilarity(&g, &hull(), DissimMetric::Pcc).unwrap();
        assert_eq!(p.values, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let e = dissimilarity(&g, &hull(), DissimMetric::Ed).unwrap();
        assert_eq!(e.values, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn constant_band_is_error() {
        let a = scene("B1", 900, 100);
        let b = BandImage::filled("B2", 64, 64, 5);
        let g = Granule::new("g", vec![a, b], test_meta()).unwrap();
        match dissimilarity(&g, &[BBox::new(18.0, 28.0, 14.0, 8.0)], DissimMetric::Pcc) {
            Err(AnalysisError::ConstantBand(id)) => assert_eq!(id, "B2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn report_shapes_and_determinism() {
        let bands: Vec<BandImage> = (0..12)
            .map(|k| BandImage::from_fn(format!("B{:02}", k + 1), 64, 64, |c, r| ((c * (k + 2) + r * 7) % 97 + 50) as u16))
            .collect();
        let g = Granule::new("g", bands, test_meta()).unwrap();
        let boxes: BTreeMap<String, Vec<BBox>> = [("*".to_string(), hull())].into();
        let cfg = StatsConfig::default();
        let build = || {
            band_report(
                band_stats(&g, &boxes, None, &cfg).unwrap(),
                Some(dissimilarity(&g, &hull(), DissimMetric::Pcc).unwrap()),
                Some(dissimilarity(&g, &hull(), DissimMetric::Ed).unwrap()),
                BTreeMap::new(),
            )
        };
        let r = build();
        assert_eq!(r.bands.len(), 12);
        assert_eq!(r.pcc.as_ref().unwrap().values.len(), 12);
        let plots = report_plots(&r);
        assert_eq!(plots.len(), 5);
        assert_eq!(plots[3].1.matches("<rect x=").count(), 144);
        let a = serde_json::to_string(&r).unwrap();
        let b = serde_json::to_string(&build()).unwrap();
        assert_eq!(a, b);

        let dir = tempfile::tempdir().unwrap();
        let files = write_band_report(&BandReport::default(), dir.path()).unwrap();
        assert_eq!(files.len(), 1);
    }

    proptest! {
        #[test]
        fn pcc_matrix_properties(seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bands: Vec<BandImage> = (0..4)
                .map(|k| BandImage::from_fn(format!("B{k}"), 24, 24, |_, _| rng.gen_range(0..4096)))
                .collect();
            let g = Granule::new("g", bands, test_meta()).unwrap();
            let boxes = [BBox::new(2.0, 2.0, 8.0, 6.0), BBox::new(12.0, 10.0, 5.0, 9.0)];
            let p = dissimilarity(&g, &boxes, DissimMetric::Pcc).unwrap();
            let e = dissimilarity(&g, &boxes, DissimMetric::Ed).unwrap();
            for i in 0..4 {
                prop_assert_eq!(p.values[i][i], 1.0);
                prop_assert_eq!(e.values[i][i], 0.0);
                for j in 0..4 {
                    prop_assert_eq!(p.values[i][j], p.values[j][i]);
                    prop_assert!(p.values[i][j].abs() <= 1.0 + 1e-12);
                    prop_assert!(e.values[i][j] >= 0.0);
                    for k in 0..4 {
                        prop_assert!(e.values[i][k] <= e.values[i][j] + e.values[j][k] + 1e-9);
                    }
                }
            }
        }

        #[test]
        fn hog_non_increasing(seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let band = BandImage::from_fn("B", 20, 20, |_, _| rng.gen_range(0..300));
            let h = hog_feature_count(&band, &[BBox::new(1.0, 1.0, 15.0, 13.0)], &DEFAULT_TAUS).unwrap();
            prop_assert!(h.windows(2).all(|w| w[0].count >= w[1].count));
            prop_assert!(h.iter().all(|p| (0.0..=1.0).contains(&p.count)));
        }
    }
}
