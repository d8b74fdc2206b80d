//! Box-center to AIS cost matrix.

use serde::{Deserialize, Serialize};

use super::geo::Point;
use super::{AisError, MatchConfig, Result};

/// Navigational status that earns the reduced weight.
pub const FISHING_STATUS: &str = "Engaged in fishing";

/// Distance from `p` to the infinite line through `a` and `b`; the distance
/// to `a` when the two points coincide.
pub fn perpendicular_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return p.dist(&a);
    }
    (dx * (p.y - a.y) - dy * (p.x - a.x)).abs() / len
}

/// One AIS column of the dense cost matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisPoint {
    pub mmsi: u64,
    /// Position of the record nearest in time to sensing.
    pub nearest: Point,
    /// Two positions spanning the track line, when available.
    pub track: Option<(Point, Point)>,
    pub nav_status: String,
}

/// One AIS column of the daily cost matrix: every filtered position of the
/// vessel; the one closest to each box is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyCandidate {
    pub mmsi: u64,
    pub positions: Vec<Point>,
    pub nav_status: String,
}

mod sentinel {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCell {
    #[serde(with = "sentinel")]
    pub d_perp: f64,
    #[serde(with = "sentinel")]
    pub d_eucl: f64,
    pub w_nav: f64,
    /// `w_nav·(d_perp + d_eucl)` before the cutoff.
    #[serde(with = "sentinel")]
    pub raw: f64,
    /// `raw`, or +∞ (`null` in JSON) when beyond the cutoff.
    #[serde(with = "sentinel")]
    pub cost: f64,
}

impl CostCell {
    pub fn new(d_perp: f64, d_eucl: f64, w_nav: f64, max_cost: f64) -> Self {
        let raw = w_nav * (d_perp + d_eucl);
        Self {
            d_perp,
            d_eucl,
            w_nav,
            raw,
            cost: if raw > max_cost { f64::INFINITY } else { raw },
        }
    }

    /// Cell holding only a cost, split evenly between the two distances.
    pub fn bare(cost: f64) -> Self {
        Self {
            d_perp: cost / 2.0,
            d_eucl: cost / 2.0,
            w_nav: 1.0,
            raw: cost,
            cost,
        }
    }

    pub fn is_sentinel(&self) -> bool {
        !self.cost.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub row_ids: Vec<u64>,
    pub col_ids: Vec<u64>,
    /// Row-major, `row_ids.len() × col_ids.len()`.
    pub cells: Vec<CostCell>,
}

impl CostMatrix {
    /// Plain matrix with ids `0..n` and `0..m`; `f64::INFINITY` is the sentinel.
    pub fn from_costs(costs: &[Vec<f64>]) -> Self {
        let m = costs.first().map_or(0, Vec::len);
        assert!(costs.iter().all(|r| r.len() == m), "ragged cost matrix");
        Self {
            row_ids: (0..costs.len() as u64).collect(),
            col_ids: (0..m as u64).collect(),
            cells: costs.iter().flatten().map(|&c| CostCell::bare(c)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.col_ids.len()
    }

    pub fn cell(&self, i: usize, j: usize) -> &CostCell {
        &self.cells[i * self.cols() + j]
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cell(i, j).cost
    }

    pub fn is_sentinel(&self, i: usize, j: usize) -> bool {
        self.cell(i, j).is_sentinel()
    }
}

fn weight(nav_status: &str, cfg: &MatchConfig) -> f64 {
    if nav_status == FISHING_STATUS {
        cfg.fishing_weight
    } else {
        1.0
    }
}

fn check_finite(points: impl IntoIterator<Item = Point>) -> Result<()> {
    if points.into_iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(AisError::FrameMismatch)
    }
}

/// Dense-mode matrix: `C_ij = w_nav·(d_⊥ + d_eucl)`, `d_eucl` to the
/// time-nearest record, `d_⊥` to the track line (or `d_eucl` without one).
pub fn build_cost_matrix(
    row_ids: &[u64],
    centers: &[Point],
    ais: &[AisPoint],
    cfg: &MatchConfig,
) -> Result<CostMatrix> {
    assert_eq!(row_ids.len(), centers.len());
    check_finite(centers.iter().copied())?;
    check_finite(
        ais.iter()
            .flat_map(|a| [Some(a.nearest), a.track.map(|t| t.0), a.track.map(|t| t.1)])
            .flatten(),
    )?;
    let mut cells = Vec::with_capacity(centers.len() * ais.len());
    for c in centers {
        for a in ais {
            let d_eucl = c.dist(&a.nearest);
            let d_perp = match a.track {
                Some((p, q)) => perpendicular_distance(*c, p, q),
                None => d_eucl,
            };
            cells.push(CostCell::new(d_perp, d_eucl, weight(&a.nav_status, cfg), cfg.max_cost_m));
        }
    }
    Ok(CostMatrix {
        row_ids: row_ids.to_vec(),
        col_ids: ais.iter().map(|a| a.mmsi).collect(),
        cells,
    })
}

/// Daily-mode matrix: single-point cost to the vessel's position nearest the
/// box; pairs farther than `radius_m` are sentinels.
pub fn build_daily_cost_matrix(
    row_ids: &[u64],
    centers: &[Point],
    ais: &[DailyCandidate],
    cfg: &MatchConfig,
) -> Result<CostMatrix> {
    assert_eq!(row_ids.len(), centers.len());
    check_finite(centers.iter().copied())?;
    check_finite(ais.iter().flat_map(|a| a.positions.iter().copied()))?;
    let mut cells = Vec::with_capacity(centers.len() * ais.len());
    for c in centers {
        for a in ais {
            let d = a.positions.iter().map(|p| c.dist(p)).fold(f64::INFINITY, f64::min);
            let mut cell = CostCell::new(d, d, weight(&a.nav_status, cfg), cfg.max_cost_m);
            if d > cfg.radius_m {
                cell.cost = f64::INFINITY;
            }
            cells.push(cell);
        }
    }
    Ok(CostMatrix {
        row_ids: row_ids.to_vec(),
        col_ids: ais.iter().map(|a| a.mmsi).collect(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn perpendicular_cases() {
        assert_eq!(perpendicular_distance(pt(0.0, 0.0), pt(30.0, 40.0), pt(30.0, -40.0)), 30.0);
        assert_eq!(perpendicular_distance(pt(1.0, 1.0), pt(0.0, 0.0), pt(2.0, 2.0)), 0.0);
        assert_eq!(perpendicular_distance(pt(0.0, 0.0), pt(3.0, 4.0), pt(3.0, 4.0)), 5.0);
    }

    fn fishing(track: bool) -> AisPoint {
        AisPoint {
            mmsi: 1,
            nearest: pt(30.0, 40.0),
            track: track.then_some((pt(30.0, 40.0), pt(30.0, -40.0))),
            nav_status: FISHING_STATUS.into(),
        }
    }

    #[test]
    fn fishing_track_example() {
        let cfg = MatchConfig::default();
        let m = build_cost_matrix(&[0], &[pt(0.0, 0.0)], &[fishing(true)], &cfg).unwrap();
        let c = m.cell(0, 0);
        assert_eq!((c.d_perp, c.d_eucl, c.w_nav, c.cost), (30.0, 50.0, 0.5, 40.0));
        let m = build_cost_matrix(&[0], &[pt(0.0, 0.0)], &[fishing(false)], &cfg).unwrap();
        assert_eq!(m.cost(0, 0), 50.0);
    }

    #[test]
    fn coincident_center_costs_zero() {
        let a = AisPoint {
            mmsi: 2,
            nearest: pt(5.0, 5.0),
            track: None,
            nav_status: "Under way using engine".into(),
        };
        let m = build_cost_matrix(&[0], &[pt(5.0, 5.0)], &[a], &MatchConfig::default()).unwrap();
        assert_eq!(m.cost(0, 0), 0.0);
    }

    #[test]
    fn weight_is_column_local() {
        let other = AisPoint {
            mmsi: 3,
            nearest: pt(100.0, 0.0),
            track: Some((pt(100.0, 0.0), pt(90.0, 10.0))),
            nav_status: "Moored".into(),
        };
        let ais = [fishing(true), other];
        let centers = [pt(0.0, 0.0), pt(50.0, 20.0), pt(-10.0, 7.0)];
        let half = build_cost_matrix(&[0, 1, 2], &centers, &ais, &MatchConfig::default()).unwrap();
        let full_cfg = MatchConfig {
            fishing_weight: 1.0,
            ..MatchConfig::default()
        };
        let full = build_cost_matrix(&[0, 1, 2], &centers, &ais, &full_cfg).unwrap();
        for i in 0..3 {
            assert_eq!(full.cost(i, 0), 2.0 * half.cost(i, 0));
            assert_eq!(full.cost(i, 1), half.cost(i, 1));
        }
    }

    #[test]
    fn cutoff_and_frame_checks() {
        let cfg = MatchConfig {
            max_cost_m: 10.0,
            ..MatchConfig::default()
        };
        let m = build_cost_matrix(&[0], &[pt(0.0, 0.0)], &[fishing(true)], &cfg).unwrap();
        assert!(m.is_sentinel(0, 0));
        assert_eq!(m.cell(0, 0).raw, 40.0);
        let json = serde_json::to_string(m.cell(0, 0)).unwrap();
        assert!(json.contains("\"cost\":null"));
        let back: CostCell = serde_json::from_str(&json).unwrap();
        assert!(back.is_sentinel());
        assert!(matches!(
            build_cost_matrix(&[0], &[pt(f64::NAN, 0.0)], &[fishing(true)], &cfg),
            Err(AisError::FrameMismatch)
        ));
    }

    #[test]
    fn daily_radius() {
        let cand = DailyCandidate {
            mmsi: 9,
            positions: vec![pt(1000.0, 0.0), pt(200.0, 0.0)],
            nav_status: String::new(),
        };
        let cfg = MatchConfig::default();
        let m = build_daily_cost_matrix(&[0, 1], &[pt(0.0, 0.0), pt(-200.0, 0.0)], &[cand], &cfg).unwrap();
        assert_eq!(m.cost(0, 0), 400.0);
        assert!(m.is_sentinel(1, 0));
    }
}
