use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BandImage, Granule, RasterError, Result};

/// Largest rotation accepted by [`augment`], degrees.
pub const MAX_ROTATION_DEG: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveParams {
    /// Fraction of half the image size each corner may move inward, in [0, 1].
    pub distortion: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AugmentSpec {
    Hflip,
    Vflip,
    Rotate { degrees: f64 },
    ToroidalShift { dx: i64, dy: i64 },
    Perspective(PerspectiveParams),
}

/// Draw one augmentation deterministically from `seed`.
pub fn random_augment(seed: u64, width: usize, height: usize) -> AugmentSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match rng.gen_range(0..5) {
        0 => AugmentSpec::Hflip,
        1 => AugmentSpec::Vflip,
        2 => AugmentSpec::Rotate {
            degrees: rng.gen_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
        },
        3 => AugmentSpec::ToroidalShift {
            dx: rng.gen_range(0..width.max(1) as i64),
            dy: rng.gen_range(0..height.max(1) as i64),
        },
        _ => AugmentSpec::Perspective(PerspectiveParams {
            distortion: rng.gen_range(0.0..0.5),
            seed: rng.gen(),
        }),
    }
}

/// Apply an augmentation to every band. Dimensions are preserved; pixels
/// sampled from outside the source become 0 DN.
pub fn augment(g: &Granule, spec: &AugmentSpec) -> Result<Granule> {
    if let AugmentSpec::Rotate { degrees } = spec {
        if !(degrees.abs() <= MAX_ROTATION_DEG) {
            return Err(RasterError::InvalidAngle(*degrees));
        }
    }
    let bands = g
        .bands()
        .iter()
        .map(|b| augment_band(b, spec))
        .collect();
    g.with_bands(bands)
}

fn augment_band(b: &BandImage, spec: &AugmentSpec) -> BandImage {
    let (w, h) = (b.width(), b.height());
    match *spec {
        AugmentSpec::Hflip => BandImage::from_fn(&b.band_id, w, h, |c, r| b.get(w - 1 - c, r)),
        AugmentSpec::Vflip => BandImage::from_fn(&b.band_id, w, h, |c, r| b.get(c, h - 1 - r)),
        AugmentSpec::ToroidalShift { dx, dy } => toroidal_shift(b, dx, dy),
        AugmentSpec::Rotate { degrees } => rotate_nearest(b, degrees),
        AugmentSpec::Perspective(p) => perspective_nearest(b, &p),
    }
}

/// Wrap-around translation: content at `(c, r)` moves to
/// `((c + dx) mod w, (r + dy) mod h)`.
pub fn toroidal_shift(b: &BandImage, dx: i64, dy: i64) -> BandImage {
    let (w, h) = (b.width() as i64, b.height() as i64);
    if w == 0 || h == 0 {
        return b.clone();
    }
    BandImage::from_fn(&b.band_id, b.width(), b.height(), |c, r| {
        let sc = (c as i64 - dx).rem_euclid(w) as usize;
        let sr = (r as i64 - dy).rem_euclid(h) as usize;
        b.get(sc, sr)
    })
}

fn rotate_nearest(b: &BandImage, degrees: f64) -> BandImage {
    let (w, h) = (b.width(), b.height());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, co) = degrees.to_radians().sin_cos();
    BandImage::from_fn(&b.band_id, w, h, |c, r| {
        let (x, y) = (c as f64 - cx, r as f64 - cy);
        // inverse rotation maps the output pixel back into the source
        let sx = co * x + s * y + cx;
        let sy = -s * x + co * y + cy;
        sample_nearest(b, sx, sy)
    })
}

fn sample_nearest(b: &BandImage, x: f64, y: f64) -> u16 {
    let (c, r) = (x.round(), y.round());
    if c < 0.0 || r < 0.0 || c >= b.width() as f64 || r >= b.height() as f64 {
        0
    } else {
        b.get(c as usize, r as usize)
    }
}

/// Projective map from the unit square onto a quad (corners in order
/// (0,0), (1,0), (1,1), (0,1)), as a row-major 3x3 matrix.
fn square_to_quad(q: [(f64, f64); 4]) -> [f64; 9] {
    let [(x0, y0), (x1, y1), (x2, y2), (x3, y3)] = q;
    let sx = x0 - x1 + x2 - x3;
    let sy = y0 - y1 + y2 - y3;
    if sx.abs() < 1e-12 && sy.abs() < 1e-12 {
        return [x1 - x0, x3 - x0, x0, y1 - y0, y3 - y0, y0, 0.0, 0.0, 1.0];
    }
    let (dx1, dx2) = (x1 - x2, x3 - x2);
    let (dy1, dy2) = (y1 - y2, y3 - y2);
    let den = dx1 * dy2 - dx2 * dy1;
    let g = (sx * dy2 - dx2 * sy) / den;
    let hh = (dx1 * sy - sx * dy1) / den;
    [
        x1 - x0 + g * x1,
        x3 - x0 + hh * x3,
        x0,
        y1 - y0 + g * y1,
        y3 - y0 + hh * y3,
        y0,
        g,
        hh,
        1.0,
    ]
}

fn invert3(m: [f64; 9]) -> [f64; 9] {
    let [a, b, c, d, e, f, g, h, i] = m;
    let co = [
        e * i - f * h,
        c * h - b * i,
        b * f - c * e,
        f * g - d * i,
        a * i - c * g,
        c * d - a * f,
        d * h - e * g,
        b * g - a * h,
        a * e - b * d,
    ];
    let det = a * co[0] + b * co[3] + c * co[6];
    co.map(|v| v / det)
}

fn perspective_nearest(b: &BandImage, p: &PerspectiveParams) -> BandImage {
    let (w, h) = (b.width(), b.height());
    let (wf, hf) = ((w as f64 - 1.0).max(1.0), (h as f64 - 1.0).max(1.0));
    let d = p.distortion.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut jitter = |span: f64| if span > 0.0 { rng.gen_range(0.0..=span) } else { 0.0 };
    let (mx, my) = (d * wf / 2.0, d * hf / 2.0);
    let quad = [
        (jitter(mx), jitter(my)),
        (wf - jitter(mx), jitter(my)),
        (wf - jitter(mx), hf - jitter(my)),
        (jitter(mx), hf - jitter(my)),
    ];
    let inv = invert3(square_to_quad(quad));
    BandImage::from_fn(&b.band_id, w, h, |c, r| {
        let (x, y) = (c as f64, r as f64);
        let z = inv[6] * x + inv[7] * y + inv[8];
        let u = (inv[0] * x + inv[1] * y + inv[2]) / z;
        let v = (inv[3] * x + inv[4] * y + inv[5]) / z;
        if !(-1e-9..=1.0 + 1e-9).contains(&u) || !(-1e-9..=1.0 + 1e-9).contains(&v) {
            0
        } else {
            sample_nearest(b, u * wf, v * hf)
        }
    })
}
