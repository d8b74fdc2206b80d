//! End-to-end glue: register → composite → detect → AISCOCO → AIS match →
//! evaluate. The CLI subcommands and the examples are thin wrappers over
//! these functions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::{
    match_granules, AisError, AisRecord, DecisionStatus, Footprint, GranuleBoxes, MatchConfig, MatchMode, MatchReport,
};
use crate::aiscoco::{merge_ais, AiscocoDoc, AiscocoError};
use crate::coregister::{register_granule, RegisterError, RegisterMode, Registered, ShiftTable};
use crate::detector::{detect, DetectConfig, DetectError, Detection};
use crate::metrics::{
    evaluate_detections, ConfusionMatrix, EvalReport, GranuleEval, MetricsError, SIoUParams, ScoredBox,
    DEFAULT_SIOU_THRESHOLD,
};
use crate::analysis::BandMetrics;
use crate::bbox::BBox;
use crate::raster::{BandImage, Granule};
use crate::sensor::Counts;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Ais(#[from] AisError),
    #[error(transparent)]
    Aiscoco(#[from] AiscocoError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("granule {0} has no image in the document")]
    MissingImage(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub reference_band: String,
    /// Search radius for shift estimation; 0 skips registration.
    pub max_shift: u32,
    pub detect: DetectConfig,
    pub matching: MatchConfig,
    pub mode: MatchMode,
    pub siou_threshold: f64,
    pub siou: SIoUParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            reference_band: "B03".into(),
            max_shift: 10,
            detect: DetectConfig::default(),
            matching: MatchConfig::default(),
            mode: MatchMode::Dense,
            siou_threshold: DEFAULT_SIOU_THRESHOLD,
            siou: SIoUParams::default(),
        }
    }
}

/// Per-pixel mean of the registered bands, over the bands valid there.
pub fn composite(reg: &Registered, band_id: &str) -> BandImage {
    let g = &reg.granule;
    let n = g.width() * g.height();
    let mut sum = vec![0u64; n];
    let mut cnt = vec![0u32; n];
    for b in g.bands() {
        let valid = reg.valid_mask(&b.band_id);
        for (i, &v) in b.data().iter().enumerate() {
            if valid.map_or(true, |m| m[i]) {
                sum[i] += v as u64;
                cnt[i] += 1;
            }
        }
    }
    let data = sum
        .iter()
        .zip(&cnt)
        .map(|(&s, &c)| if c == 0 { 0 } else { ((s + c as u64 / 2) / c as u64) as u16 })
        .collect();
    BandImage::new(band_id, g.width(), g.height(), data).expect("granule dimensions")
}

#[derive(Debug, Clone)]
pub struct GranuleDetections {
    pub granule: String,
    pub shifts: ShiftTable,
    pub detections: Vec<Detection>,
}

pub fn register(g: &Granule, cfg: &PipelineConfig) -> Result<(Registered, ShiftTable)> {
    if cfg.max_shift == 0 {
        let t = ShiftTable::identity(cfg.reference_band.clone());
        let t = g.band_ids().into_iter().fold(t, |t, b| {
            if t.entries.contains_key(&b) {
                t
            } else {
                t.with_entry(b, 0, 0)
            }
        });
        return Ok((crate::coregister::apply_shift_table(g, &t)?, t));
    }
    Ok(register_granule(
        g,
        &cfg.reference_band,
        &RegisterMode::Estimate {
            max_shift: cfg.max_shift,
        },
    )?)
}

/// Register, fuse the bands and run the detector on the composite.
pub fn detect_granule(g: &Granule, cfg: &PipelineConfig) -> Result<GranuleDetections> {
    let (reg, shifts) = register(g, cfg)?;
    let band = composite(&reg, "composite");
    let detections = detect(&band, &cfg.detect)?;
    Ok(GranuleDetections {
        granule: g.id.clone(),
        shifts,
        detections,
    })
}

/// Prediction document: one image per granule, one scored annotation per
/// detection, in granule order.
pub fn detections_doc(granules: &[Granule], dets: &[GranuleDetections]) -> AiscocoDoc {
    let mut doc = AiscocoDoc::empty();
    for (g, d) in granules.iter().zip(dets) {
        doc.push_image(
            &g.id,
            g.width() as u32,
            g.height() as u32,
            g.meta.sensing_time,
            d.detections.iter().map(|x| (x.bbox, Some(x.score))),
            1,
        );
    }
    doc
}

/// Boxes of `doc` grouped per granule, in the order of `footprints`.
pub fn granule_boxes(doc: &AiscocoDoc, footprints: &[(String, Footprint)]) -> Result<Vec<GranuleBoxes>> {
    footprints
        .iter()
        .map(|(name, fp)| {
            let img = doc
                .image_by_name(name)
                .ok_or_else(|| PipelineError::MissingImage(name.clone()))?;
            let mut boxes: Vec<(u64, _)> = doc.annotations_for(img.id).map(|a| (a.id, a.bbox())).collect();
            boxes.sort_by_key(|(id, _)| *id);
            Ok(GranuleBoxes {
                granule: name.clone(),
                footprint: fp.clone(),
                boxes,
            })
        })
        .collect()
}

/// Match the boxes of `doc` to AIS and merge the accepted links back into
/// a copy of the document. Every box gets a `match_status` attribute;
/// boxes whose vessel was already placed keep the MMSI as `candidate_mmsi`.
pub fn match_doc(
    doc: &AiscocoDoc,
    footprints: &[(String, Footprint)],
    ais: &[AisRecord],
    cfg: &MatchConfig,
    mode: MatchMode,
) -> Result<(AiscocoDoc, MatchReport)> {
    let gbs = granule_boxes(doc, footprints)?;
    let report = match_granules(&gbs, ais, cfg, mode)?;
    let links: Vec<(u64, u64)> = report
        .accepted()
        .filter_map(|d| d.mmsi.map(|m| (d.box_id, m)))
        .collect();
    // routes carry only the records of the accepted vessel's granule window
    let mut merged = merge_ais(doc, links, &route_records(&gbs, &report, ais, cfg, mode))?;
    for d in &report.decisions {
        if let Some(a) = merged.annotation_mut(d.box_id) {
            let status = serde_json::to_value(d.status).expect("status serializes");
            a.attributes.extra.insert("match_status".into(), status);
            if d.status == DecisionStatus::SkippedDuplicate {
                a.attributes.extra.insert("candidate_mmsi".into(), d.mmsi.into());
            }
            if let Some(c) = d.cost {
                a.attributes.extra.insert("match_cost".into(), c.into());
            }
        }
    }
    Ok((merged, report))
}

fn route_records(
    gbs: &[GranuleBoxes],
    report: &MatchReport,
    ais: &[AisRecord],
    cfg: &MatchConfig,
    mode: MatchMode,
) -> Vec<AisRecord> {
    let by_name: BTreeMap<&str, &GranuleBoxes> = gbs.iter().map(|g| (g.granule.as_str(), g)).collect();
    let mut out = Vec::new();
    for (mmsi, (granule, _)) in &report.global {
        let Some(gb) = by_name.get(granule.as_str()) else {
            continue;
        };
        out.extend(
            crate::ais::filter_records(ais, &gb.footprint, cfg, mode)
                .into_iter()
                .filter(|r| r.mmsi == *mmsi),
        );
    }
    out
}

/// Score predictions against truth, pairing images by file name. Missing
/// prediction images count their truth boxes as misses; prediction images
/// without truth count as false positives.
pub fn evaluate_docs(pred: &AiscocoDoc, truth: &AiscocoDoc, threshold: f64, params: &SIoUParams) -> Result<EvalReport> {
    let mut names: Vec<&str> = truth.images.iter().map(|i| i.file_name.as_str()).collect();
    for i in &pred.images {
        if truth.image_by_name(&i.file_name).is_none() {
            names.push(&i.file_name);
        }
    }
    let boxes_of = |doc: &AiscocoDoc, name: &str| -> Vec<ScoredBox> {
        let Some(img) = doc.image_by_name(name) else {
            return Vec::new();
        };
        let mut anns: Vec<_> = doc.annotations_for(img.id).collect();
        anns.sort_by_key(|a| a.id);
        anns.iter()
            .map(|a| ScoredBox {
                bbox: a.bbox(),
                score: a.attributes.score.unwrap_or(1.0),
            })
            .collect()
    };
    let per_granule: Vec<GranuleEval> = names
        .par_iter()
        .map(|name| {
            let p = boxes_of(pred, name);
            let t: Vec<_> = boxes_of(truth, name).into_iter().map(|s| s.bbox).collect();
            let e = evaluate_detections(&p, &t, threshold, params)?;
            Ok(GranuleEval {
                granule: name.to_string(),
                tp: e.tp,
                fp: e.fp,
                fn_: e.fn_,
                precision: e.precision,
                recall: e.recall,
                f1: e.f1,
            })
        })
        .collect::<Result<_>>()?;
    // single vessel class: matched pairs all land in one cell
    let tp: usize = per_granule.iter().map(|g| g.tp).sum();
    let confusion = ConfusionMatrix { counts: vec![vec![tp as u64]] };
    Ok(EvalReport::from_granules(threshold, per_granule, confusion))
}

/// Detect on `g` and score against `truth` (same frame as the reference band).
pub fn detect_counts(g: &Granule, truth: &[BBox], cfg: &PipelineConfig) -> Result<Counts> {
    let d = detect_granule(g, cfg)?;
    let preds: Vec<ScoredBox> = d
        .detections
        .iter()
        .map(|x| ScoredBox {
            bbox: x.bbox,
            score: x.score,
        })
        .collect();
    let e = evaluate_detections(&preds, truth, cfg.siou_threshold, &cfg.siou)?;
    Ok(Counts {
        tp: e.tp,
        fp: e.fp,
        fn_: e.fn_,
    })
}

/// Run the detector on every band of a registered granule on its own.
pub fn band_metrics(reg: &Registered, truth: &[BBox], cfg: &PipelineConfig) -> Result<BTreeMap<String, BandMetrics>> {
    reg.granule
        .bands()
        .par_iter()
        .map(|b| {
            let dets = detect(b, &cfg.detect)?;
            let preds: Vec<ScoredBox> = dets
                .iter()
                .map(|x| ScoredBox {
                    bbox: x.bbox,
                    score: x.score,
                })
                .collect();
            let e = evaluate_detections(&preds, truth, cfg.siou_threshold, &cfg.siou)?;
            Ok((
                b.band_id.clone(),
                BandMetrics {
                    precision: e.precision,
                    recall: e.recall,
                    f1: e.f1,
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub detections: Vec<GranuleDetections>,
    /// Predictions with AIS links merged in.
    pub doc: AiscocoDoc,
    pub matching: MatchReport,
}

pub fn run(granules: &[Granule], ais: &[AisRecord], cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let detections: Vec<GranuleDetections> = granules
        .par_iter()
        .map(|g| detect_granule(g, cfg))
        .collect::<Result<_>>()?;
    let doc = detections_doc(granules, &detections);
    let fps: Vec<(String, Footprint)> = granules.iter().map(|g| (g.id.clone(), Footprint::of_granule(g))).collect();
    let (doc, matching) = match_doc(&doc, &fps, ais, &cfg.matching, cfg.mode)?;
    Ok(PipelineOutput {
        detections,
        doc,
        matching,
    })
}
