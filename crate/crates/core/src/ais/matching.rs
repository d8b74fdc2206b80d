//! Per-granule matching and the global one-box-per-MMSI pass.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{build_cost_matrix, build_daily_cost_matrix, AisPoint, CostMatrix, DailyCandidate};
use super::geo::{Footprint, Point};
use super::hungarian::{hungarian, Assignment};
use super::{filter_records, AisError, AisRecord, MatchConfig, MatchMode, Result};
use crate::bbox::BBox;

/// Boxes of one granule, keyed by annotation id.
#[derive(Debug, Clone)]
pub struct GranuleBoxes {
    pub granule: String,
    pub footprint: Footprint,
    pub boxes: Vec<(u64, BBox)>,
}

impl GranuleBoxes {
    /// Box centers in the granule's meter frame.
    pub fn centers(&self) -> Vec<Point> {
        self.boxes
            .iter()
            .map(|(_, b)| {
                let (c, r) = b.center();
                self.footprint.pixel_to_meters(c, r)
            })
            .collect()
    }

    fn ids(&self) -> Vec<u64> {
        self.boxes.iter().map(|(id, _)| *id).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionStatus {
    Matched,
    Unmatched,
    SkippedDuplicate,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionEntry {
    pub granule: String,
    pub box_id: u64,
    pub mmsi: Option<u64>,
    pub cost: Option<f64>,
    pub status: DecisionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranuleMatch {
    pub granule: String,
    pub costs: CostMatrix,
    /// Local Hungarian solution, before the global pass.
    pub assignment: Assignment,
    pub filtered_records: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub granules: Vec<GranuleMatch>,
    /// One entry per (granule, box), in granule then box order.
    pub decisions: Vec<DecisionEntry>,
    /// MMSI → (granule, box id) of its single accepted match.
    pub global: BTreeMap<u64, (String, u64)>,
}

impl MatchReport {
    pub fn accepted(&self) -> impl Iterator<Item = &DecisionEntry> {
        self.decisions.iter().filter(|d| d.status == DecisionStatus::Matched)
    }
}

fn group_by_mmsi(records: Vec<AisRecord>) -> BTreeMap<u64, Vec<AisRecord>> {
    let mut g: BTreeMap<u64, Vec<AisRecord>> = BTreeMap::new();
    for r in records {
        g.entry(r.mmsi).or_default().push(r);
    }
    for v in g.values_mut() {
        v.sort_by_key(|r| r.timestamp);
    }
    g
}

/// Index of the record nearest in time (earliest on ties), and the two
/// records spanning the track line: the pair bracketing sensing time, else
/// the two closest on the side that exists.
fn track_indices(recs: &[AisRecord], fp: &Footprint) -> (usize, Option<(usize, usize)>) {
    let s = fp.sensing_time;
    let nearest = (0..recs.len())
        .min_by_key(|&i| ((recs[i].timestamp - s).abs(), i))
        .expect("non-empty group");
    let split = recs.partition_point(|r| r.timestamp <= s);
    let track = if split > 0 && split < recs.len() {
        Some((split - 1, split))
    } else if split >= 2 {
        Some((split - 2, split - 1))
    } else if split == 0 && recs.len() >= 2 {
        Some((0, 1))
    } else {
        None
    };
    (nearest, track)
}

fn dense_points(groups: &BTreeMap<u64, Vec<AisRecord>>, fp: &Footprint) -> Vec<AisPoint> {
    let proj = |r: &AisRecord| fp.projection.to_meters(r.lat, r.lon);
    groups
        .iter()
        .map(|(&mmsi, recs)| {
            let (n, track) = track_indices(recs, fp);
            AisPoint {
                mmsi,
                nearest: proj(&recs[n]),
                track: track.map(|(a, b)| (proj(&recs[a]), proj(&recs[b]))),
                nav_status: recs[n].nav_status.clone(),
            }
        })
        .collect()
}

fn daily_points(groups: &BTreeMap<u64, Vec<AisRecord>>, fp: &Footprint) -> Vec<DailyCandidate> {
    groups
        .iter()
        .map(|(&mmsi, recs)| {
            let (n, _) = track_indices(recs, fp);
            DailyCandidate {
                mmsi,
                positions: recs.iter().map(|r| fp.projection.to_meters(r.lat, r.lon)).collect(),
                nav_status: recs[n].nav_status.clone(),
            }
        })
        .collect()
}

fn granule_costs(
    gb: &GranuleBoxes,
    ais: &[AisRecord],
    cfg: &MatchConfig,
    mode: MatchMode,
) -> Result<(CostMatrix, BTreeMap<u64, Vec<AisRecord>>, usize)> {
    let filtered = filter_records(ais, &gb.footprint, cfg, mode);
    let n = filtered.len();
    let groups = group_by_mmsi(filtered);
    let centers = gb.centers();
    let ids = gb.ids();
    let costs = match mode {
        MatchMode::Dense => build_cost_matrix(&ids, &centers, &dense_points(&groups, &gb.footprint), cfg)?,
        MatchMode::Daily => build_daily_cost_matrix(&ids, &centers, &daily_points(&groups, &gb.footprint), cfg)?,
    };
    Ok((costs, groups, n))
}

/// Match every granule independently (in parallel), then walk granules in
/// the given order keeping the first match of each MMSI. Later matches of an
/// already-placed MMSI are logged `skipped_duplicate`; their boxes are not
/// re-matched.
pub fn match_granules(
    granules: &[GranuleBoxes],
    ais: &[AisRecord],
    cfg: &MatchConfig,
    mode: MatchMode,
) -> Result<MatchReport> {
    cfg.validate()?;
    let locals: Vec<GranuleMatch> = granules
        .par_iter()
        .map(|gb| {
            let (costs, _, filtered_records) = granule_costs(gb, ais, cfg, mode)?;
            let assignment = hungarian(&costs);
            Ok(GranuleMatch {
                granule: gb.granule.clone(),
                costs,
                assignment,
                filtered_records,
            })
        })
        .collect::<Result<_>>()?;

    let mut global: BTreeMap<u64, (String, u64)> = BTreeMap::new();
    let mut decisions = Vec::new();
    for gm in &locals {
        for (row, &box_id) in gm.costs.row_ids.iter().enumerate() {
            let entry = match gm.assignment.matches.iter().find(|m| m.row == row) {
                None => DecisionEntry {
                    granule: gm.granule.clone(),
                    box_id,
                    mmsi: None,
                    cost: None,
                    status: DecisionStatus::Unmatched,
                },
                Some(m) => {
                    let mmsi = gm.costs.col_ids[m.col];
                    let status = if global.contains_key(&mmsi) {
                        DecisionStatus::SkippedDuplicate
                    } else {
                        global.insert(mmsi, (gm.granule.clone(), box_id));
                        DecisionStatus::Matched
                    };
                    DecisionEntry {
                        granule: gm.granule.clone(),
                        box_id,
                        mmsi: Some(mmsi),
                        cost: Some(m.cost),
                        status,
                    }
                }
            };
            decisions.push(entry);
        }
    }
    Ok(MatchReport {
        granules: locals,
        decisions,
        global,
    })
}

/// A candidate vessel for one box with its cost breakdown and where it
/// falls on the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCost {
    pub mmsi: u64,
    pub nav_status: String,
    pub ship_type: String,
    pub d_perp: f64,
    pub d_eucl: f64,
    pub w_nav: f64,
    /// `None` when beyond the cutoff.
    pub cost: Option<f64>,
    pub lat: f64,
    pub lon: f64,
    /// Pixel position `[col, row]` of the point used for `d_eucl`.
    pub pixel: [f64; 2],
    /// Pixel positions of the track-line endpoints, dense mode only.
    pub track_pixels: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCandidates {
    pub box_id: u64,
    pub bbox: [f64; 4],
    /// Ascending by weighted cost.
    pub candidates: Vec<CandidateCost>,
}

/// Every filtered vessel as a candidate for every box of one granule.
pub fn candidates_for_granule(
    gb: &GranuleBoxes,
    ais: &[AisRecord],
    cfg: &MatchConfig,
    mode: MatchMode,
) -> Result<Vec<BoxCandidates>> {
    let (costs, groups, _) = granule_costs(gb, ais, cfg, mode)?;
    let fp = &gb.footprint;
    let to_px = |p: Point| {
        let (c, r) = fp.meters_to_pixel(p);
        [c, r]
    };
    let centers = gb.centers();
    let recs: Vec<&Vec<AisRecord>> = groups.values().collect();
    let mut out = Vec::with_capacity(gb.boxes.len());
    for (i, (box_id, bbox)) in gb.boxes.iter().enumerate() {
        let mut cands = Vec::with_capacity(recs.len());
        for (j, group) in recs.iter().enumerate() {
            let cell = costs.cell(i, j);
            let (n, track) = track_indices(group, fp);
            let used = match mode {
                MatchMode::Dense => n,
                MatchMode::Daily => (0..group.len())
                    .min_by(|&a, &b| {
                        let d = |k: usize| centers[i].dist(&fp.projection.to_meters(group[k].lat, group[k].lon));
                        d(a).total_cmp(&d(b))
                    })
                    .unwrap_or(n),
            };
            let r = &group[used];
            let pos = fp.projection.to_meters(r.lat, r.lon);
            let track_pixels = match mode {
                MatchMode::Dense => track.map(|(a, b)| {
                    let p = |k: usize| to_px(fp.projection.to_meters(group[k].lat, group[k].lon));
                    [p(a), p(b)]
                }),
                MatchMode::Daily => None,
            };
            cands.push(CandidateCost {
                mmsi: costs.col_ids[j],
                nav_status: group[n].nav_status.clone(),
                ship_type: group[n].ship_type.clone(),
                d_perp: cell.d_perp,
                d_eucl: cell.d_eucl,
                w_nav: cell.w_nav,
                cost: (!cell.is_sentinel()).then_some(cell.cost),
                lat: r.lat,
                lon: r.lon,
                pixel: to_px(pos),
                track_pixels,
            });
        }
        cands.sort_by(|a, b| {
            let key = |c: &CandidateCost| c.cost.unwrap_or(f64::INFINITY);
            key(a).total_cmp(&key(b)).then(a.mmsi.cmp(&b.mmsi))
        });
        out.push(BoxCandidates {
            box_id: *box_id,
            bbox: bbox.to_xywh(),
            candidates: cands,
        });
    }
    Ok(out)
}

pub fn write_decision_log<W: Write>(mut w: W, entries: &[DecisionEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_decision_log<R: BufRead>(r: R) -> Result<Vec<DecisionEntry>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| AisError::DecisionLog { line: i + 1, source })?);
    }
    Ok(out)
}

/// Decision-log lookup by (granule, box id).
pub fn index_decisions(entries: &[DecisionEntry]) -> HashMap<(String, u64), &DecisionEntry> {
    entries.iter().map(|e| ((e.granule.clone(), e.box_id), e)).collect()
}
