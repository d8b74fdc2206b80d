//! AIS ingestion and detection-to-AIS matching.
//!
//! Records are read from CSV, filtered per granule (dense time window or
//! daily window), projected into the granule's meter frame, scored against
//! box centers and assigned one-to-one with the Hungarian method. A global
//! pass keeps every MMSI on at most one box across granules.

mod cost;
mod geo;
mod hungarian;
mod matching;

pub use cost::{
    build_cost_matrix, build_daily_cost_matrix, perpendicular_distance, AisPoint, CostCell,
    CostMatrix, DailyCandidate, FISHING_STATUS,
};
pub use geo::{Footprint, Point, Projection, EARTH_RADIUS_M};
pub use hungarian::{hungarian, solve_dense, Assignment, MatchPair};
pub use matching::{
    candidates_for_granule, index_decisions, match_granules, read_decision_log, write_decision_log, BoxCandidates,
    CandidateCost, DecisionEntry, DecisionStatus, GranuleBoxes, GranuleMatch, MatchReport,
};

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AisError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("AIS file has no header row")]
    EmptyFile,
    #[error("AIS header is missing column(s): {}", .0.join(", "))]
    MissingColumn(Vec<String>),
    #[error("non-finite coordinate in the meter frame")]
    FrameMismatch,
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
    #[error("decision log line {line}: {source}")]
    DecisionLog {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, AisError>;

/// Column names of the AIS CSV, in write order.
pub const AIS_COLUMNS: [&str; 9] = [
    "timestamp",
    "mmsi",
    "lat",
    "lon",
    "sog",
    "nav_status",
    "ship_type",
    "length",
    "width",
];
const REQUIRED_COLUMNS: [&str; 4] = ["timestamp", "mmsi", "lat", "lon"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub mmsi: u64,
    pub timestamp: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub sog: Option<f64>,
    pub nav_status: String,
    pub ship_type: String,
    pub length_m: Option<f64>,
    pub width_m: Option<f64>,
}

impl AisRecord {
    /// Reason string when an invariant fails.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.mmsi == 0 || self.mmsi > 999_999_999 {
            return Err("mmsi out of range".into());
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err("lat out of range".into());
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err("lon out of range".into());
        }
        Ok(())
    }

    pub fn is_fishing(&self) -> bool {
        self.nav_status == FISHING_STATUS
    }
}

/// A CSV row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number in the file (header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AisParse {
    pub records: Vec<AisRecord>,
    pub rejects: Vec<Reject>,
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%d/%m/%Y %H:%M:%S"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

fn parse_opt_f64(s: &str, col: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("bad number in {col}")),
    }
}

/// Parse an AIS CSV stream. Rows failing to parse or violating record
/// invariants land in `rejects`; nothing is dropped silently.
pub fn parse_ais_csv<R: Read>(reader: R) -> Result<AisParse> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(AisError::EmptyFile);
    }
    let idx = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<String> = REQUIRED_COLUMNS
        .iter()
        .filter(|c| idx(c).is_none())
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(AisError::MissingColumn(missing));
    }
    let cols: Vec<Option<usize>> = AIS_COLUMNS.iter().map(|c| idx(c)).collect();
    let mut out = AisParse::default();
    for (k, row) in rdr.records().enumerate() {
        let line = row
            .as_ref()
            .ok()
            .and_then(|r| r.position())
            .map_or(k as u64 + 2, |p| p.line());
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(Reject {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let fields: [&str; 9] = std::array::from_fn(|i| cols[i].and_then(|c| row.get(c)).unwrap_or(""));
        match parse_row(&fields) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.rejects.push(Reject { line, reason }),
        }
    }
    Ok(out)
}

fn parse_row(f: &[&str; 9]) -> std::result::Result<AisRecord, String> {
    let field = |i: usize| f[i];
    let timestamp = parse_timestamp(field(0)).ok_or("bad timestamp")?;
    let mmsi: u64 = field(1).parse().map_err(|_| "bad mmsi".to_string())?;
    let lat = parse_opt_f64(field(2), "lat")?.ok_or("missing lat")?;
    let lon = parse_opt_f64(field(3), "lon")?.ok_or("missing lon")?;
    let rec = AisRecord {
        mmsi,
        timestamp,
        lat,
        lon,
        sog: parse_opt_f64(field(4), "sog")?,
        nav_status: field(5).to_string(),
        ship_type: field(6).to_string(),
        length_m: parse_opt_f64(field(7), "length")?,
        width_m: parse_opt_f64(field(8), "width")?,
    };
    rec.check()?;
    Ok(rec)
}

pub fn read_ais_csv(path: impl AsRef<std::path::Path>) -> Result<AisParse> {
    parse_ais_csv(std::fs::File::open(path)?)
}

/// Write records with the canonical header; timestamps as RFC 3339 UTC.
pub fn write_ais_csv<W: Write>(writer: W, records: &[AisRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(AIS_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            r.mmsi.to_string(),
            r.lat.to_string(),
            r.lon.to_string(),
            opt(r.sog),
            r.nav_status.clone(),
            r.ship_type.clone(),
            opt(r.length_m),
            opt(r.width_m),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Dense feeds: time window around sensing, track-line cost, Hungarian.
    #[default]
    Dense,
    /// One record per day: calendar-day window and a radius around the box.
    Daily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub temporal_window_s: f64,
    pub radius_m: f64,
    pub day_window: u32,
    pub fishing_weight: f64,
    /// Costs above this become the sentinel.
    pub max_cost_m: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            temporal_window_s: 300.0,
            radius_m: 300.0,
            day_window: 1,
            fishing_weight: 0.5,
            max_cost_m: 2000.0,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.temporal_window_s) || !pos(self.radius_m) || !pos(self.max_cost_m) {
            return Err(AisError::InvalidConfig(
                "temporal_window_s, radius_m and max_cost_m must be positive".into(),
            ));
        }
        if self.day_window == 0 {
            return Err(AisError::InvalidConfig("day_window must be positive".into()));
        }
        if !(self.fishing_weight > 0.0 && self.fishing_weight <= 1.0) {
            return Err(AisError::InvalidConfig(format!(
                "fishing_weight must be in (0, 1], got {}",
                self.fishing_weight
            )));
        }
        Ok(())
    }
}

/// Keep the records relevant to one granule.
///
/// Dense: `|t − sensing| ≤ temporal_window_s`. Daily: calendar days within
/// `day_window`. Both require the position to lie within `radius_m` of the
/// footprint.
pub fn filter_records(
    records: &[AisRecord],
    footprint: &Footprint,
    cfg: &MatchConfig,
    mode: MatchMode,
) -> Vec<AisRecord> {
    records
        .iter()
        .filter(|r| in_time_window(r, footprint, cfg, mode))
        .filter(|r| footprint.distance_m(footprint.projection.to_meters(r.lat, r.lon)) <= cfg.radius_m)
        .cloned()
        .collect()
}

fn in_time_window(r: &AisRecord, fp: &Footprint, cfg: &MatchConfig, mode: MatchMode) -> bool {
    match mode {
        MatchMode::Dense => {
            let dt = (r.timestamp - fp.sensing_time).num_microseconds();
            dt.map_or(false, |us| us.unsigned_abs() as f64 <= cfg.temporal_window_s * 1e6)
        }
        MatchMode::Daily => {
            let days = (r.timestamp.date_naive() - fp.sensing_time.date_naive()).num_days();
            days.unsigned_abs() <= cfg.day_window as u64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use chrono::{Duration, TimeZone};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const HEADER: &str = "timestamp,mmsi,lat,lon,sog,nav_status,ship_type,length,width\n";

    #[test]
    fn one_valid_row() {
        let csv = format!("{HEADER}2020-01-06T08:30:00Z,219000001,55.5,10.2,7.5,Under way using engine,Cargo,120,20\n");
        let p = parse_ais_csv(csv.as_bytes()).unwrap();
        assert_eq!(p.records.len(), 1);
        assert!(p.rejects.is_empty());
        let r = &p.records[0];
        assert_eq!(r.mmsi, 219000001);
        assert_eq!(r.sog, Some(7.5));
        assert_eq!(r.length_m, Some(120.0));
        assert_eq!(r.ship_type, "Cargo");
    }

    #[test]
    fn bad_rows_reported() {
        let csv = format!(
            "{HEADER}2020-01-06T08:30:00Z,219000001,95,10.2,,,,,\n\
             nonsense,219000002,55,10,,,,,\n\
             06/01/2020 08:30:00,219000003,55,10,,Engaged in fishing,Fishing,,\n"
        );
        let p = parse_ais_csv(csv.as_bytes()).unwrap();
        assert_eq!(p.records.len(), 1);
        assert!(p.records[0].is_fishing());
        assert_eq!(
            p.rejects,
            vec![
                Reject {
                    line: 2,
                    reason: "lat out of range".into()
                },
                Reject {
                    line: 3,
                    reason: "bad timestamp".into()
                }
            ]
        );
    }

    #[test]
    fn header_errors() {
        assert!(matches!(parse_ais_csv("".as_bytes()), Err(AisError::EmptyFile)));
        match parse_ais_csv("timestamp,mmsi\n".as_bytes()) {
            Err(AisError::MissingColumn(c)) => assert_eq!(c, vec!["lat", "lon"]),
            other => panic!("{other:?}"),
        }
    }

    fn random_record(rng: &mut ChaCha8Rng) -> AisRecord {
        let base = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        let opt = |rng: &mut ChaCha8Rng, v: f64| if rng.gen_bool(0.8) { Some(v) } else { None };
        let sog = rng.gen_range(0.0..30.0);
        let len = rng.gen_range(5.0..400.0);
        let wid = rng.gen_range(2.0..60.0);
        AisRecord {
            mmsi: rng.gen_range(100_000_000..=999_999_999),
            timestamp: base + Duration::milliseconds(rng.gen_range(0..86_400_000 * 30)),
            lat: rng.gen_range(-90.0..=90.0),
            lon: rng.gen_range(-180.0..=180.0),
            sog: opt(rng, sog),
            nav_status: ["Under way using engine", "Engaged in fishing", "Moored", ""][rng.gen_range(0..4)].into(),
            ship_type: ["Cargo", "Fishing", "Tanker, \"special\"", ""][rng.gen_range(0..4)].into(),
            length_m: opt(rng, len),
            width_m: opt(rng, wid),
        }
    }

    #[test]
    fn csv_round_trip_large() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let recs: Vec<AisRecord> = (0..100_000).map(|_| random_record(&mut rng)).collect();
        let mut buf = Vec::new();
        write_ais_csv(&mut buf, &recs).unwrap();
        let back = parse_ais_csv(buf.as_slice()).unwrap();
        assert!(back.rejects.is_empty());
        assert_eq!(back.records, recs);
    }

    fn footprint() -> Footprint {
        // 1 km x 1 km at 10 m
        let t = Utc.with_ymd_and_hms(2020, 1, 6, 8, 30, 0).unwrap();
        Footprint::new(t, GeoTransform::north_up(600_000.0, 6_100_000.0, 10.0), 100, 100)
    }

    fn rec_at(fp: &Footprint, east: f64, north: f64, t: DateTime<Utc>) -> AisRecord {
        let (lat, lon) = fp.projection.to_latlon(Point::new(east, north));
        AisRecord {
            mmsi: 219000001,
            timestamp: t,
            lat,
            lon,
            sog: None,
            nav_status: String::new(),
            ship_type: String::new(),
            length_m: None,
            width_m: None,
        }
    }

    #[test]
    fn filter_edges() {
        let fp = footprint();
        let cfg = MatchConfig::default();
        let t0 = fp.sensing_time;
        let inside = rec_at(&fp, 600_500.0, 6_099_500.0, t0);
        assert_eq!(filter_records(&[inside.clone()], &fp, &cfg, MatchMode::Dense).len(), 1);
        let late = rec_at(&fp, 600_500.0, 6_099_500.0, t0 + Duration::seconds(301));
        assert!(filter_records(&[late.clone()], &fp, &cfg, MatchMode::Dense).is_empty());
        assert_eq!(filter_records(&[late], &fp, &cfg, MatchMode::Daily).len(), 1);
        let two_days = rec_at(&fp, 600_500.0, 6_099_500.0, t0 + Duration::days(2));
        assert!(filter_records(&[two_days], &fp, &cfg, MatchMode::Daily).is_empty());
        let near = rec_at(&fp, 601_250.0, 6_099_500.0, t0);
        assert_eq!(filter_records(&[near], &fp, &cfg, MatchMode::Dense).len(), 1);
        let far = rec_at(&fp, 601_350.0, 6_099_500.0, t0);
        assert!(filter_records(&[far], &fp, &cfg, MatchMode::Dense).is_empty());
    }

    #[test]
    fn filter_matches_predicate_scan() {
        let fp = footprint();
        let cfg = MatchConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let recs: Vec<AisRecord> = (0..10_000)
            .map(|_| {
                let e = rng.gen_range(599_000.0..602_000.0);
                let n = rng.gen_range(6_098_000.0..6_101_000.0);
                let dt = Duration::seconds(rng.gen_range(-3 * 86_400..3 * 86_400));
                rec_at(&fp, e, n, fp.sensing_time + dt)
            })
            .collect();
        for mode in [MatchMode::Dense, MatchMode::Daily] {
            let got = filter_records(&recs, &fp, &cfg, mode);
            // north-up axis-aligned box distance
            let want: Vec<AisRecord> = recs
                .iter()
                .filter(|r| {
                    let p = fp.projection.to_meters(r.lat, r.lon);
                    let dx = (600_000.0 - p.x).max(p.x - 601_000.0).max(0.0);
                    let dy = (6_099_000.0 - p.y).max(p.y - 6_100_000.0).max(0.0);
                    let space = dx.hypot(dy) <= 300.0;
                    let time = match mode {
                        MatchMode::Dense => (r.timestamp - fp.sensing_time).num_seconds().abs() <= 300,
                        MatchMode::Daily => {
                            (r.timestamp.date_naive() - fp.sensing_time.date_naive()).num_days().abs() <= 1
                        }
                    };
                    space && time
                })
                .cloned()
                .collect();
            assert_eq!(got, want, "{mode:?}");
            assert!(!want.is_empty());
        }
    }

    #[test]
    fn config_validation() {
        assert!(MatchConfig::default().validate().is_ok());
        let bad = MatchConfig {
            fishing_weight: 1.5,
            ..MatchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = MatchConfig {
            radius_m: 0.0,
            ..MatchConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
