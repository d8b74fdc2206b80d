//! Coarse-to-fine box refinement: four thresholds vote per pixel, pixels
//! with at least two votes form the consensus mask, and the box is refitted
//! around its largest 8-connected blob in every band.

mod threshold;

pub use threshold::{
    isodata_update, li_update, threshold, threshold_isodata, threshold_li, threshold_mean,
    threshold_otsu, ClassStats, Histogram, ThresholdMethod, ThresholdResult, CONVERGENCE_DN,
    MAX_ITERATIONS,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bbox::BBox;
use crate::components::largest_component;
use crate::raster::{BandImage, Granule};

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("patch holds a single DN value")]
    ConstantPatch,
    #[error("patch is empty")]
    EmptyPatch,
    #[error("{0:?} threshold did not converge within {MAX_ITERATIONS} iterations")]
    NonConvergence(ThresholdMethod),
    #[error("masks differ in size")]
    SizeMismatch,
}

pub type Result<T> = std::result::Result<T, LabelError>;

/// Minimum votes for a pixel to enter the consensus mask.
pub const CONSENSUS_VOTES: u8 = 2;
/// Default margin around a coarse box, pixels.
pub const DEFAULT_MARGIN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusMask {
    pub mask: Vec<bool>,
    pub votes: Vec<u8>,
}

impl ConsensusMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Per-pixel vote count over the masks; kept where votes >= 2.
pub fn consensus_masks(masks: &[&[bool]]) -> Result<ConsensusMask> {
    let len = masks.first().map_or(0, |m| m.len());
    if masks.iter().any(|m| m.len() != len) {
        return Err(LabelError::SizeMismatch);
    }
    let mut votes = vec![0u8; len];
    for m in masks {
        for (v, &on) in votes.iter_mut().zip(m.iter()) {
            *v += on as u8;
        }
    }
    Ok(ConsensusMask {
        mask: votes.iter().map(|&v| v >= CONSENSUS_VOTES).collect(),
        votes,
    })
}

pub fn consensus(maps: &[ThresholdResult; 4]) -> Result<ConsensusMask> {
    let masks: Vec<&[bool]> = maps.iter().map(|r| r.mask.as_slice()).collect();
    consensus_masks(&masks)
}

/// Run all four thresholds and vote. A method that fails to converge casts
/// no votes; a constant patch is an error.
pub fn threshold_consensus(pixels: &[u16]) -> Result<ConsensusMask> {
    let hist = Histogram::from_values(pixels);
    match hist.distinct() {
        0 => return Err(LabelError::EmptyPatch),
        1 => return Err(LabelError::ConstantPatch),
        _ => {}
    }
    let mut masks = Vec::with_capacity(4);
    for m in ThresholdMethod::ALL {
        match threshold(m, pixels) {
            Ok(r) => masks.push(r.mask),
            Err(LabelError::NonConvergence(_)) => masks.push(vec![false; pixels.len()]),
            Err(e) => return Err(e),
        }
    }
    let refs: Vec<&[bool]> = masks.iter().map(Vec::as_slice).collect();
    consensus_masks(&refs)
}

/// Refit `coarse` on one band: threshold the window expanded by `margin`,
/// keep the largest consensus blob and return its tight box. The coarse box
/// is returned unchanged when the window is constant or the mask is empty.
pub fn fit_bbox(coarse: &BBox, band: &BandImage, margin: usize) -> BBox {
    let Some(win) = coarse
        .expanded(margin as f64)
        .pixel_window(band.width(), band.height())
    else {
        return *coarse;
    };
    let pixels = band.window_values(&win);
    let Ok(cm) = threshold_consensus(&pixels) else {
        return *coarse;
    };
    match largest_component(&cm.mask, win.width(), win.height()) {
        Some(comp) => comp.bbox().translated(win.c0 as f64, win.r0 as f64),
        None => *coarse,
    }
}

/// One refined box per coarse box per band, keyed by band id.
pub fn refine_annotations(g: &Granule, coarse_boxes: &[BBox], margin: usize) -> BTreeMap<String, Vec<BBox>> {
    g.bands()
        .iter()
        .map(|b| {
            let boxes = coarse_boxes.iter().map(|c| fit_bbox(c, b, margin)).collect();
            (b.band_id.clone(), boxes)
        })
        .collect()
}
