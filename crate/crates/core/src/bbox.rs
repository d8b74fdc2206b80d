//! Axis-aligned pixel boxes (top-left origin, continuous coordinates).

use serde::{Deserialize, Serialize};

/// Axis-aligned box `(x_min, y_min, w, h)` in pixel units.
///
/// Coordinates are continuous: pixel `(c, r)` covers `[c, c+1) × [r, r+1)`,
/// so a box fitted tightly around pixels `c0..=c1` has `x_min = c0` and
/// `w = c1 - c0 + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x_min: f64, y_min: f64, w: f64, h: f64) -> Self {
        Self { x_min, y_min, w, h }
    }

    /// Box covering the inclusive pixel range `[c0, c1] × [r0, r1]`.
    pub fn from_pixel_range(c0: usize, r0: usize, c1: usize, r1: usize) -> Self {
        Self::new(
            c0 as f64,
            r0 as f64,
            (c1 - c0 + 1) as f64,
            (r1 - r0 + 1) as f64,
        )
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0
            && self.h > 0.0
            && self.x_min.is_finite()
            && self.y_min.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.w
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x_min + 0.5 * self.w, self.y_min + 0.5 * self.h)
    }

    /// Overlap box, or `None` when the boxes share no area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x_min.max(other.x_min);
        let y0 = self.y_min.max(other.y_min);
        let x1 = self.x_max().min(other.x_max());
        let y1 = self.y_max().min(other.y_max());
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        self.intersection(other).map_or(0.0, |b| b.area())
    }

    pub fn scaled(&self, k: f64) -> BBox {
        BBox::new(self.x_min * k, self.y_min * k, self.w * k, self.h * k)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.x_min + dx, self.y_min + dy, self.w, self.h)
    }

    /// Grow by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> BBox {
        BBox::new(
            self.x_min - margin,
            self.y_min - margin,
            self.w + 2.0 * margin,
            self.h + 2.0 * margin,
        )
    }

    /// Clamp to `[0, width] × [0, height]`; `None` if nothing is left.
    pub fn clamped(&self, width: usize, height: usize) -> Option<BBox> {
        self.intersection(&BBox::new(0.0, 0.0, width as f64, height as f64))
    }

    /// Smallest integer pixel window `(c0, r0, c1, r1)` (exclusive ends)
    /// covering this box, clamped to the image. `None` when empty.
    pub fn pixel_window(&self, width: usize, height: usize) -> Option<PixelWindow> {
        let c0 = self.x_min.floor().max(0.0);
        let r0 = self.y_min.floor().max(0.0);
        let c1 = self.x_max().ceil().min(width as f64);
        let r1 = self.y_max().ceil().min(height as f64);
        if c1 <= c0 || r1 <= r0 {
            return None;
        }
        Some(PixelWindow {
            c0: c0 as usize,
            r0: r0 as usize,
            c1: c1 as usize,
            r1: r1 as usize,
        })
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x_min >= self.x_min
            && other.y_min >= self.y_min
            && other.x_max() <= self.x_max()
            && other.y_max() <= self.y_max()
    }

    /// `[x_min, y_min, w, h]`, the COCO ordering.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.w, self.h]
    }

    pub fn from_xywh(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// Integer pixel window with exclusive upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelWindow {
    pub c0: usize,
    pub r0: usize,
    pub c1: usize,
    pub r1: usize,
}

impl PixelWindow {
    pub fn width(&self) -> usize {
        self.c1 - self.c0
    }

    pub fn height(&self) -> usize {
        self.r1 - self.r0
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_bbox(&self) -> BBox {
        BBox::new(
            self.c0 as f64,
            self.r0 as f64,
            self.width() as f64,
            self.height() as f64,
        )
    }
}
