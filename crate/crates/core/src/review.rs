//! Human review of AIS matches. Decisions mutate a reviewed copy of an
//! AISCOCO file and are appended to a JSON-lines log; replaying the log over
//! the original file rebuilds the reviewed copy.
//!
//! Files for a store `<stem>.json`:
//! - `<stem>.reviewed.json`: current reviewed document
//! - `<stem>.decisions.jsonl`: every attempt, applied or not
//! - `<stem>.lock`: held while a server owns the store

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ais::AisRecord;
use crate::aiscoco::{read_aiscoco, write_aiscoco, AiscocoDoc, AiscocoError, RoutePoint};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown granule {0}")]
    UnknownGranule(String),
    #[error("granule {granule} has no box {box_id}")]
    UnknownBox { granule: String, box_id: u64 },
    #[error("box {box_id} is at revision {current}, decision was based on {base}")]
    Conflict { box_id: u64, current: u64, base: u64 },
    #[error("mmsi {0} is not among the AIS candidates of this granule")]
    NotACandidate(u64),
    #[error("mmsi {mmsi} is already assigned to box {box_id} of {granule}")]
    MmsiTaken { mmsi: u64, granule: String, box_id: u64 },
    #[error("reviewer must be non-empty")]
    EmptyReviewer,
    #[error("store is locked by another process ({0})")]
    StoreLocked(PathBuf),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Aiscoco(#[from] AiscocoError),
    #[error("decision log line {line}: {message}")]
    Log { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, ReviewError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum ReviewAction {
    Accept,
    Reject,
    Reassign { mmsi: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub granule_id: String,
    pub box_id: u64,
    #[serde(flatten)]
    pub action: ReviewAction,
    pub reviewer: String,
    pub decided_at: DateTime<Utc>,
    /// Box revision the reviewer saw; a stale value is a conflict.
    #[serde(default)]
    pub base_revision: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Applied,
    Conflict,
    Rejected,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub decision: ReviewDecision,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Current review state of one annotation, kept under `attributes.review`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewState {
    pub status: String,
    pub reviewer: String,
    pub decided_at: DateTime<Utc>,
    pub revision: u64,
}

pub fn review_state(a: &crate::aiscoco::Annotation) -> Option<ReviewState> {
    a.attributes
        .extra
        .get("review")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
}

/// Status shown to reviewers: the review verdict when there is one,
/// otherwise the matcher's status.
pub fn display_status(a: &crate::aiscoco::Annotation) -> String {
    if let Some(r) = review_state(a) {
        return r.status;
    }
    match a.attributes.extra.get("match_status").and_then(Value::as_str) {
        Some(s) => s.to_string(),
        None if a.attributes.mmsi.is_some() => "matched".into(),
        None => "unmatched".into(),
    }
}

/// AIS records per granule (already filtered to the granule window), used
/// to validate reassignments and build routes.
pub type CandidateRecords = BTreeMap<String, Vec<AisRecord>>;

/// Apply one decision to `doc`. On error `doc` is unchanged.
pub fn apply_decision(doc: &mut AiscocoDoc, d: &ReviewDecision, records: &CandidateRecords) -> Result<()> {
    if d.reviewer.trim().is_empty() {
        return Err(ReviewError::EmptyReviewer);
    }
    let image_id = doc
        .image_by_name(&d.granule_id)
        .ok_or_else(|| ReviewError::UnknownGranule(d.granule_id.clone()))?
        .id;
    let ann = doc
        .annotations
        .iter()
        .find(|a| a.id == d.box_id && a.image_id == image_id)
        .ok_or_else(|| ReviewError::UnknownBox {
            granule: d.granule_id.clone(),
            box_id: d.box_id,
        })?;
    let current = review_state(ann).map_or(0, |r| r.revision);
    if current != d.base_revision {
        return Err(ReviewError::Conflict {
            box_id: d.box_id,
            current,
            base: d.base_revision,
        });
    }
    let mut route = None;
    let mut ship_type = None;
    if let ReviewAction::Reassign { mmsi } = d.action {
        let recs: Vec<&AisRecord> = records
            .get(&d.granule_id)
            .map(|v| v.iter().filter(|r| r.mmsi == mmsi).collect())
            .unwrap_or_default();
        if recs.is_empty() {
            return Err(ReviewError::NotACandidate(mmsi));
        }
        let names: BTreeMap<u64, &str> = doc.images.iter().map(|i| (i.id, i.file_name.as_str())).collect();
        if let Some(other) = doc
            .annotations
            .iter()
            .find(|a| a.id != d.box_id && a.attributes.mmsi == Some(mmsi))
        {
            return Err(ReviewError::MmsiTaken {
                mmsi,
                granule: names.get(&other.image_id).copied().unwrap_or("").to_string(),
                box_id: other.id,
            });
        }
        let mut recs = recs;
        recs.sort_by_key(|r| r.timestamp);
        ship_type = recs.iter().rev().find(|r| !r.ship_type.is_empty()).map(|r| r.ship_type.clone());
        route = Some(
            recs.iter()
                .map(|r| RoutePoint(r.lon, r.lat, r.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true)))
                .collect(),
        );
    }
    let ann = doc.annotation_mut(d.box_id).expect("found above");
    let status = match d.action {
        ReviewAction::Accept => "accepted",
        ReviewAction::Reject => {
            ann.attributes.mmsi = None;
            ann.attributes.ship_type = None;
            ann.attributes.route = None;
            "rejected"
        }
        ReviewAction::Reassign { mmsi } => {
            ann.attributes.mmsi = Some(mmsi);
            ann.attributes.ship_type = ship_type;
            ann.attributes.route = route;
            "reassigned"
        }
    };
    let state = ReviewState {
        status: status.into(),
        reviewer: d.reviewer.clone(),
        decided_at: d.decided_at,
        revision: current + 1,
    };
    ann.attributes
        .extra
        .insert("review".into(), serde_json::to_value(state).expect("state serializes"));
    Ok(())
}

/// Rebuild the reviewed document from the original and the log.
pub fn replay(base: &AiscocoDoc, log: &[LogEntry], records: &CandidateRecords) -> Result<AiscocoDoc> {
    let mut doc = base.clone();
    for e in log.iter().filter(|e| e.outcome == Outcome::Applied) {
        apply_decision(&mut doc, &e.decision, records).map_err(|err| ReviewError::Log {
            line: e.seq as usize,
            message: format!("applied decision no longer applies: {err}"),
        })?;
    }
    Ok(doc)
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ReviewError::Log {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StorePaths {
    pub original: PathBuf,
    pub reviewed: PathBuf,
    pub log: PathBuf,
    pub lock: PathBuf,
}

impl StorePaths {
    pub fn for_annotations(path: impl AsRef<Path>) -> Self {
        let p = path.as_ref();
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("annotations");
        let dir = p.parent().unwrap_or_else(|| Path::new("."));
        Self {
            original: p.to_path_buf(),
            reviewed: dir.join(format!("{stem}.reviewed.json")),
            log: dir.join(format!("{stem}.decisions.jsonl")),
            lock: dir.join(format!("{stem}.lock")),
        }
    }
}

/// Exclusive handle on a review store. Dropping it releases the lock.
#[derive(Debug)]
pub struct Store {
    pub paths: StorePaths,
    original: AiscocoDoc,
    doc: AiscocoDoc,
    records: CandidateRecords,
    next_seq: u64,
    log: File,
}

impl Store {
    /// Take the lock, replay the log and write the reviewed copy.
    pub fn open(annotations: impl AsRef<Path>, records: CandidateRecords) -> Result<Self> {
        let paths = StorePaths::for_annotations(annotations);
        match OpenOptions::new().write(true).create_new(true).open(&paths.lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(ReviewError::StoreLocked(paths.lock.clone()));
            }
            Err(e) => return Err(e.into()),
        }
        let opened = (|| {
            let original = read_aiscoco(&paths.original)?;
            let entries = read_log(&paths.log)?;
            let doc = replay(&original, &entries, &records)?;
            write_aiscoco(&doc, &paths.reviewed)?;
            let log = OpenOptions::new().create(true).append(true).open(&paths.log)?;
            let next_seq = entries.last().map_or(1, |e| e.seq + 1);
            Ok::<_, ReviewError>((original, doc, log, next_seq))
        })();
        match opened {
            Ok((original, doc, log, next_seq)) => Ok(Self {
                paths,
                original,
                doc,
                records,
                next_seq,
                log,
            }),
            Err(e) => {
                let _ = std::fs::remove_file(&paths.lock);
                Err(e)
            }
        }
    }

    pub fn doc(&self) -> &AiscocoDoc {
        &self.doc
    }

    pub fn original(&self) -> &AiscocoDoc {
        &self.original
    }

    pub fn records(&self) -> &CandidateRecords {
        &self.records
    }

    /// Number of log entries written so far.
    pub fn seq(&self) -> u64 {
        self.next_seq - 1
    }

    fn append(&mut self, decision: &ReviewDecision, outcome: Outcome, detail: Option<String>) -> Result<()> {
        let entry = LogEntry {
            seq: self.next_seq,
            decision: decision.clone(),
            outcome,
            detail,
        };
        let line = serde_json::to_string(&entry).expect("log entry serializes");
        self.log.write_all(line.as_bytes())?;
        self.log.write_all(b"\n")?;
        self.log.sync_data()?;
        self.next_seq += 1;
        Ok(())
    }

    /// Validate and apply a decision. Applied decisions and conflicts are
    /// logged; the reviewed file is rewritten after each applied decision.
    pub fn decide(&mut self, d: &ReviewDecision) -> Result<()> {
        let mut next = self.doc.clone();
        match apply_decision(&mut next, d, &self.records) {
            Ok(()) => {
                self.append(d, Outcome::Applied, None)?;
                write_aiscoco(&next, &self.paths.reviewed)?;
                self.doc = next;
                Ok(())
            }
            Err(e @ ReviewError::Conflict { .. }) => {
                self.append(d, Outcome::Conflict, Some(e.to_string()))?;
                Err(e)
            }
            Err(e @ (ReviewError::NotACandidate(_) | ReviewError::MmsiTaken { .. })) => {
                self.append(d, Outcome::Rejected, Some(e.to_string()))?;
                Err(e)
            }
            Err(e) => Err(e),
        }
    }
}

impl Drop for Store {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.paths.lock);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aiscoco::tests::random_doc;
    use chrono::TimeZone;

    fn decision(granule: &str, box_id: u64, action: ReviewAction, base: u64) -> ReviewDecision {
        ReviewDecision {
            granule_id: granule.into(),
            box_id,
            action,
            reviewer: "ana".into(),
            decided_at: Utc.with_ymd_and_hms(2024, 3, 1, 12, 0, 0).unwrap(),
            base_revision: base,
        }
    }

    fn record(mmsi: u64) -> AisRecord {
        AisRecord {
            mmsi,
            timestamp: Utc.with_ymd_and_hms(2021, 5, 1, 10, 0, 0).unwrap(),
            lat: 55.0,
            lon: 10.0,
            sog: None,
            nav_status: "Moored".into(),
            ship_type: "Tug".into(),
            length_m: None,
            width_m: None,
        }
    }

    #[test]
    fn decision_json_shape() {
        let d = decision("g", 3, ReviewAction::Reassign { mmsi: 219000001 }, 0);
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["action"], "reassign");
        assert_eq!(v["mmsi"], 219000001);
        let back: ReviewDecision = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
        let a: ReviewDecision = serde_json::from_str(
            r#"{"granule_id":"g","box_id":1,"action":"accept","reviewer":"x","decided_at":"2024-01-01T00:00:00Z"}"#,
        )
        .unwrap();
        assert_eq!(a.action, ReviewAction::Accept);
        assert_eq!(a.base_revision, 0);
    }

    #[test]
    fn store_round_trip_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matched.json");
        let doc = random_doc(9);
        write_aiscoco(&doc, &path).unwrap();
        let g0 = doc.images[0].file_name.clone();
        let ids: Vec<u64> = doc.annotations_for(doc.images[0].id).map(|a| a.id).collect();
        assert!(ids.len() >= 2, "fixture needs two boxes");
        let mut recs = CandidateRecords::new();
        recs.insert(g0.clone(), vec![record(211000042)]);

        let mut store = Store::open(&path, recs.clone()).unwrap();
        assert!(matches!(Store::open(&path, recs.clone()), Err(ReviewError::StoreLocked(_))));
        store.decide(&decision(&g0, ids[0], ReviewAction::Accept, 0)).unwrap();
        assert!(matches!(
            store.decide(&decision(&g0, ids[0], ReviewAction::Reject, 0)),
            Err(ReviewError::Conflict { current: 1, .. })
        ));
        store.decide(&decision(&g0, ids[0], ReviewAction::Reject, 1)).unwrap();
        store
            .decide(&decision(&g0, ids[1], ReviewAction::Reassign { mmsi: 211000042 }, 0))
            .unwrap();
        assert!(matches!(
            store.decide(&decision(&g0, ids[0], ReviewAction::Reassign { mmsi: 5 }, 2)),
            Err(ReviewError::NotACandidate(5))
        ));
        let a0 = store.doc().annotations.iter().find(|a| a.id == ids[0]).unwrap();
        assert_eq!(display_status(a0), "rejected");
        assert!(a0.attributes.mmsi.is_none());
        let a1 = store.doc().annotations.iter().find(|a| a.id == ids[1]).unwrap();
        assert_eq!(a1.attributes.mmsi, Some(211000042));
        assert_eq!(a1.attributes.ship_type.as_deref(), Some("Tug"));
        let current = store.doc().clone();
        drop(store);

        let log = read_log(&StorePaths::for_annotations(&path).log).unwrap();
        assert_eq!(log.len(), 5);
        assert_eq!(replay(&doc, &log, &recs).unwrap(), current);
        assert_eq!(read_aiscoco(StorePaths::for_annotations(&path).reviewed).unwrap(), current);
        // original untouched, reopen replays to the same state
        assert_eq!(read_aiscoco(&path).unwrap(), doc);
        let again = Store::open(&path, recs).unwrap();
        assert_eq!(again.doc(), &current);
        assert_eq!(again.seq(), 5);
    }
}
