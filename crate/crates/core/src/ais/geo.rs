//! Local meter frame shared by geotransforms and AIS positions.
//!
//! Geotransform output is read as a local equirectangular frame:
//! `north = R·φ`, `east = R·cos φ₀·λ` with φ₀ the latitude at the granule
//! center. Adequate at scene scale (tens of km).

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::raster::{GeoTransform, Granule};

/// Mean Earth radius, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, o: &Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    cos_lat0: f64,
}

impl Projection {
    /// Frame scaled at the given reference latitude (degrees).
    pub fn at_latitude(lat0_deg: f64) -> Self {
        Self {
            cos_lat0: lat0_deg.to_radians().cos(),
        }
    }

    /// Frame whose reference latitude is the center of a `width`×`height`
    /// raster under `gt`.
    pub fn for_transform(gt: &GeoTransform, width: usize, height: usize) -> Self {
        let (_, north) = gt.apply(width as f64 / 2.0, height as f64 / 2.0);
        Self::at_latitude((north / EARTH_RADIUS_M).to_degrees())
    }

    pub fn to_meters(&self, lat: f64, lon: f64) -> Point {
        Point::new(
            EARTH_RADIUS_M * self.cos_lat0 * lon.to_radians(),
            EARTH_RADIUS_M * lat.to_radians(),
        )
    }

    /// Inverse of [`Projection::to_meters`], returns `(lat, lon)` degrees.
    pub fn to_latlon(&self, p: Point) -> (f64, f64) {
        (
            (p.y / EARTH_RADIUS_M).to_degrees(),
            (p.x / (EARTH_RADIUS_M * self.cos_lat0)).to_degrees(),
        )
    }
}

/// Space-time extent of one granule.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub sensing_time: DateTime<Utc>,
    pub geotransform: GeoTransform,
    pub width: usize,
    pub height: usize,
    pub projection: Projection,
}

impl Footprint {
    pub fn new(sensing_time: DateTime<Utc>, geotransform: GeoTransform, width: usize, height: usize) -> Self {
        Self {
            sensing_time,
            geotransform,
            width,
            height,
            projection: Projection::for_transform(&geotransform, width, height),
        }
    }

    pub fn of_granule(g: &Granule) -> Self {
        Self::new(g.meta.sensing_time, g.meta.geotransform, g.width(), g.height())
    }

    pub fn pixel_to_meters(&self, col: f64, row: f64) -> Point {
        let (x, y) = self.geotransform.apply(col, row);
        Point::new(x, y)
    }

    pub fn meters_to_pixel(&self, p: Point) -> (f64, f64) {
        self.geotransform.invert(p.x, p.y)
    }

    fn corners(&self) -> [Point; 4] {
        let (w, h) = (self.width as f64, self.height as f64);
        [
            self.pixel_to_meters(0.0, 0.0),
            self.pixel_to_meters(w, 0.0),
            self.pixel_to_meters(w, h),
            self.pixel_to_meters(0.0, h),
        ]
    }

    /// Distance in meters from `p` to the footprint parallelogram, 0 inside.
    pub fn distance_m(&self, p: Point) -> f64 {
        let (c, r) = self.meters_to_pixel(p);
        if (0.0..=self.width as f64).contains(&c) && (0.0..=self.height as f64).contains(&r) {
            return 0.0;
        }
        let k = self.corners();
        (0..4)
            .map(|i| segment_distance(p, k[i], k[(i + 1) % 4]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(&a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(&Point::new(a.x + t * dx, a.y + t * dy))
}
