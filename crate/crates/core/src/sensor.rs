//! Sensor degradation: Gaussian MTF retargeting and DN-domain noise.
//!
//! Blur kernels are discrete-analogue Gaussians `T(x; t) = e^{-t} I_x(t)`.
//! Their transfer function is `exp(t (cos ω − 1))`, so the response at
//! Nyquist is `e^{-2t}` and `t = −ln(M)/2` hits a target MTF exactly, and
//! kernels compose by adding `t` (the variance), which makes successive
//! retargets equal a single one.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::prf;
use crate::plot;
use crate::raster::{max_dn, BandImage, Granule, Sensor};

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("MTF at Nyquist must lie in (0, 1), got {0}")]
    InvalidMtf(f64),
    #[error("kernel size must be odd and at least 3, got {0}")]
    InvalidKernelSize(usize),
    #[error("{n}x{n} kernel gives Nyquist response {got:.4}, target {want:.4} (over 2%)")]
    KernelTooSmall { n: usize, got: f64, want: f64 },
    #[error("target MTF {target} is sharper than source {current}")]
    SharpeningRequested { current: f64, target: f64 },
    #[error("SNR must be positive, got {0}")]
    InvalidSnr(f64),
    #[error("reference DN must be positive, got {0}")]
    InvalidDnRef(f64),
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, SensorError>;

/// Relative tolerance of the Nyquist self-check.
pub const NYQUIST_TOLERANCE: f64 = 0.02;
pub const DEFAULT_KERNEL_SIZE: usize = 7;
/// Reference DN of the noise model.
pub const DEFAULT_DN_REF: f64 = 100.0;
/// Baseline SNR of the raw products.
pub const BASELINE_SNR: f64 = 174.0;
pub const S2_MTF_NYQUIST: f64 = 0.3;
pub const VENUS_MTF_NYQUIST: f64 = 0.15;
const MAX_KERNEL_SIZE: usize = 101;
/// Truncation budget for retargeting kernels; keeps chained retargets
/// within rounding of a single one.
const MAX_TAIL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtfSpec {
    pub m_nyquist: f64,
    #[serde(default = "default_kernel_size")]
    pub kernel_size: usize,
}

fn default_kernel_size() -> usize {
    DEFAULT_KERNEL_SIZE
}

impl MtfSpec {
    pub fn new(m_nyquist: f64) -> Result<Self> {
        Self::with_size(m_nyquist, DEFAULT_KERNEL_SIZE)
    }

    pub fn with_size(m_nyquist: f64, kernel_size: usize) -> Result<Self> {
        let s = Self { m_nyquist, kernel_size };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_nyquist > 0.0 && self.m_nyquist < 1.0) {
            return Err(SensorError::InvalidMtf(self.m_nyquist));
        }
        if self.kernel_size < 3 || self.kernel_size % 2 == 0 {
            return Err(SensorError::InvalidKernelSize(self.kernel_size));
        }
        Ok(())
    }

    /// Nominal MTF at Nyquist of a sensor family.
    pub fn for_sensor(sensor: Sensor) -> Self {
        let m = match sensor {
            Sensor::Venus => VENUS_MTF_NYQUIST,
            _ => S2_MTF_NYQUIST,
        };
        Self {
            m_nyquist: m,
            kernel_size: DEFAULT_KERNEL_SIZE,
        }
    }
}

/// `exp(ln(M) · k²)` at normalized frequency `k` (1 = Nyquist).
pub fn mtf_curve(spec: &MtfSpec, k: f64) -> f64 {
    (spec.m_nyquist.ln() * k * k).exp()
}

/// σ (px) of the continuous Gaussian PSF whose MTF at Nyquist is `m`.
pub fn continuous_sigma(m: f64) -> f64 {
    (-2.0 * m.ln()).sqrt() / std::f64::consts::PI
}

/// Scale `t` (kernel variance, px²) of the discrete kernel with Nyquist
/// response exactly `m`.
pub fn discrete_scale(m: f64) -> f64 {
    -m.ln() / 2.0
}

/// `e^{-t} I_x(t)` for `x = 0..=radius`, by the power series.
fn bessel_weights(t: f64, radius: usize) -> Vec<f64> {
    if t == 0.0 {
        let mut w = vec![0.0; radius + 1];
        w[0] = 1.0;
        return w;
    }
    let half = t / 2.0;
    (0..=radius)
        .map(|x| {
            // first term (t/2)^x / x!
            let mut term = (0..x).fold(1.0, |acc, k| acc * half / (k + 1) as f64);
            let mut sum = term;
            for k in 1..200 {
                term *= half * half / (k as f64 * (k + x) as f64);
                sum += term;
                if term < sum * 1e-17 {
                    break;
                }
            }
            sum * (-t).exp()
        })
        .collect()
}

/// Symmetric 1-D kernel of odd length `n` and scale `t`, normalized to 1.
pub fn discrete_gaussian_1d(t: f64, n: usize) -> Vec<f64> {
    let r = n / 2;
    let half = bessel_weights(t, r);
    let total: f64 = half[0] + 2.0 * half[1..].iter().sum::<f64>();
    let mut k = vec![0.0; n];
    for x in 0..=r {
        let v = half[x] / total;
        k[r + x] = v;
        k[r - x] = v;
    }
    k
}

/// Response of a centered 1-D kernel at Nyquist, `Σ k[x]·(−1)^x`.
pub fn nyquist_response(k: &[f64]) -> f64 {
    let r = (k.len() / 2) as i64;
    k.iter()
        .enumerate()
        .map(|(i, v)| if (i as i64 - r) % 2 == 0 { *v } else { -*v })
        .sum()
}

/// Separable n×n PSF kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub n: usize,
    /// Scale (variance) before truncation, px².
    pub t: f64,
    pub one_d: Vec<f64>,
}

impl Kernel {
    /// Row-major n×n weights.
    pub fn to_2d(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                out[r * n + c] = self.one_d[r] * self.one_d[c];
            }
        }
        out
    }

    pub fn nyquist_response(&self) -> f64 {
        nyquist_response(&self.one_d)
    }
}

fn kernel_for_response(m: f64, n: usize) -> Result<Kernel> {
    let t = discrete_scale(m);
    let one_d = discrete_gaussian_1d(t, n);
    let got = nyquist_response(&one_d);
    if (got - m).abs() > NYQUIST_TOLERANCE * m {
        return Err(SensorError::KernelTooSmall { n, got, want: m });
    }
    Ok(Kernel { n, t, one_d })
}

/// PSF kernel whose DFT at Nyquist is `spec.m_nyquist` within 2%.
pub fn psf_kernel(spec: &MtfSpec) -> Result<Kernel> {
    spec.validate()?;
    kernel_for_response(spec.m_nyquist, spec.kernel_size)
}

/// Kernel mass lost by truncating to radius `r`.
fn tail_mass(t: f64, r: usize) -> f64 {
    let w = bessel_weights(t, r);
    (1.0 - w[0] - 2.0 * w[1..].iter().sum::<f64>()).max(0.0)
}

/// Smallest odd size ≥ `start` that passes the Nyquist check and drops less
/// than `MAX_TAIL` of the kernel mass.
fn sized_kernel(m: f64, start: usize) -> Result<Kernel> {
    let t = discrete_scale(m);
    let mut n = start.max(3) | 1;
    while tail_mass(t, n / 2) > MAX_TAIL && n < MAX_KERNEL_SIZE {
        n += 2;
    }
    loop {
        match kernel_for_response(m, n) {
            Err(SensorError::KernelTooSmall { .. }) if n < MAX_KERNEL_SIZE => n += 2,
            other => return other,
        }
    }
}

fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    (if m >= n as i64 { period - m } else { m }) as usize
}

/// Separable convolution with reflect padding, in floating point.
pub fn convolve_separable(data: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            *out = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * data[y * w + reflect(x as i64 + i as i64 - r, w)])
                .sum();
        }
    });
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * tmp[reflect(y as i64 + i as i64 - r, h) * w + x])
                .sum();
        }
    });
    out
}

fn quantize(v: &[f64], bit_depth: u8) -> Vec<u16> {
    let hi = max_dn(bit_depth) as f64;
    v.iter().map(|x| x.round().clamp(0.0, hi) as u16).collect()
}

/// Blur `band` from the `source` MTF down to `target`. A single kernel of
/// scale `t_target − t_source` is applied; output is rounded and clamped.
pub fn retarget_mtf(band: &BandImage, source: &MtfSpec, target: &MtfSpec, bit_depth: u8) -> Result<BandImage> {
    source.validate()?;
    target.validate()?;
    if target.m_nyquist > source.m_nyquist {
        return Err(SensorError::SharpeningRequested {
            current: source.m_nyquist,
            target: target.m_nyquist,
        });
    }
    if target.m_nyquist == source.m_nyquist {
        return Ok(band.clone());
    }
    let k = sized_kernel(target.m_nyquist / source.m_nyquist, target.kernel_size)?;
    let data: Vec<f64> = band.data().iter().map(|&v| v as f64).collect();
    let out = convolve_separable(&data, band.width(), band.height(), &k.one_d);
    Ok(band
        .with_data(quantize(&out, bit_depth))
        .expect("same dimensions"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr: f64,
    #[serde(default = "default_dn_ref")]
    pub dn_ref: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dn_ref() -> f64 {
    DEFAULT_DN_REF
}

impl NoiseSpec {
    pub fn new(snr: f64, seed: u64) -> Self {
        Self {
            snr,
            dn_ref: DEFAULT_DN_REF,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr > 0.0) {
            return Err(SensorError::InvalidSnr(self.snr));
        }
        if !(self.dn_ref > 0.0 && self.dn_ref.is_finite()) {
            return Err(SensorError::InvalidDnRef(self.dn_ref));
        }
        Ok(())
    }

    /// Per-pixel noise standard deviation, `dn_ref / snr`.
    pub fn sigma(&self) -> f64 {
        self.dn_ref / self.snr
    }
}

const NOISE_CHUNK: usize = 16;

/// Zero-mean Gaussian noise of std `dn_ref/snr` for `len` pixels. The value
/// of pixel `i` depends only on `(seed, i)`.
pub fn noise_field(len: usize, spec: &NoiseSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let sigma = spec.sigma();
    let mut out = vec![0.0; len];
    out.par_chunks_mut(NOISE_CHUNK).enumerate().for_each(|(ci, chunk)| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        // four 32-bit words per pixel
        rng.set_word_pos((ci * NOISE_CHUNK * 4) as u128);
        for v in chunk.iter_mut() {
            let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
            let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            *v = sigma * z;
        }
    });
    Ok(out)
}

/// Add seeded Gaussian noise, round and clamp to the bit depth. An infinite
/// SNR leaves the band untouched.
pub fn add_noise(band: &BandImage, spec: &NoiseSpec, bit_depth: u8) -> Result<BandImage> {
    spec.validate()?;
    if spec.snr.is_infinite() {
        return Ok(band.clone());
    }
    let noise = noise_field(band.data().len(), spec)?;
    let v: Vec<f64> = band.data().iter().zip(&noise).map(|(&d, n)| d as f64 + n).collect();
    Ok(band.with_data(quantize(&v, bit_depth)).expect("same dimensions"))
}

/// Blur then noise every band of a granule. `seed` is mixed with the band
/// index so bands get independent noise.
pub fn degrade_granule(
    g: &Granule,
    source: &MtfSpec,
    target: &MtfSpec,
    noise: &NoiseSpec,
) -> Result<Granule> {
    let bands = g
        .bands()
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let blurred = retarget_mtf(b, source, target, g.meta.bit_depth)?;
            let spec = NoiseSpec {
                seed: noise.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64),
                ..*noise
            };
            add_noise(&blurred, &spec, g.meta.bit_depth)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(g.with_bands(bands).expect("same shape"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub m: f64,
    /// `null` in JSON for noise-free cells.
    pub snr: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub mtf: Vec<f64>,
    pub snr: Vec<Option<f64>>,
    pub cells: Vec<SweepCell>,
}

/// Detection counts returned by a sweep evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Evaluate every (M, SNR) combination. Each granule is blurred from
/// `source` to M, then noised (optics before detector), then handed to
/// `eval`; counts are pooled over granules.
pub fn degradation_sweep<F>(
    granules: &[Granule],
    source: &MtfSpec,
    mtf_grid: &[f64],
    snr_grid: &[f64],
    seed: u64,
    eval: F,
) -> Result<SweepResult>
where
    F: Fn(usize, &Granule) -> std::result::Result<Counts, String> + Sync,
{
    let combos: Vec<(usize, f64, f64)> = mtf_grid
        .iter()
        .flat_map(|&m| snr_grid.iter().map(move |&s| (m, s)))
        .enumerate()
        .map(|(i, (m, s))| (i, m, s))
        .collect();
    let cells = combos
        .par_iter()
        .map(|&(ci, m, snr)| {
            let target = MtfSpec {
                m_nyquist: m,
                kernel_size: source.kernel_size,
            };
            let mut total = Counts::default();
            for (gi, g) in granules.iter().enumerate() {
                let noise = NoiseSpec::new(snr, seed ^ ((ci as u64) << 32) ^ gi as u64);
                let d = degrade_granule(g, source, &target, &noise)?;
                let c = eval(gi, &d).map_err(SensorError::Eval)?;
                total.tp += c.tp;
                total.fp += c.fp;
                total.fn_ += c.fn_;
            }
            let (precision, recall, f1) = prf(total.tp, total.fp, total.fn_);
            Ok(SweepCell {
                m,
                snr: snr.is_finite().then_some(snr),
                precision,
                recall,
                f1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        mtf: mtf_grid.to_vec(),
        snr: snr_grid.iter().map(|s| s.is_finite().then_some(*s)).collect(),
        cells,
    })
}

/// Line plots (one line per M, metric against SNR) for each metric.
pub fn sweep_plots(r: &SweepResult) -> Vec<(String, String)> {
    let metrics: [(&str, fn(&SweepCell) -> f64); 3] = [
        ("precision", |c| c.precision),
        ("recall", |c| c.recall),
        ("f1", |c| c.f1),
    ];
    let names: Vec<String> = r.mtf.iter().map(|m| format!("MTF {m}")).collect();
    metrics
        .iter()
        .map(|(name, f)| {
            let series: Vec<(&str, Vec<(f64, f64)>)> = r
                .mtf
                .iter()
                .zip(&names)
                .map(|(m, label)| {
                    let pts = r
                        .cells
                        .iter()
                        .filter(|c| c.m == *m)
                        .filter_map(|c| c.snr.map(|s| (s, f(c))))
                        .collect();
                    (label.as_str(), pts)
                })
                .collect();
            (
                format!("sweep_{name}.svg"),
                plot::line_chart(&format!("{name} vs SNR"), "SNR", name, &series),
            )
        })
        .collect()
}

pub fn write_sweep(r: &SweepResult, dir: &Path) -> Result<()> {
    let io = |e: std::io::Error| SensorError::Io(e.to_string());
    std::fs::create_dir_all(dir).map_err(io)?;
    let json = serde_json::to_string_pretty(r).map_err(|e| SensorError::Io(e.to_string()))?;
    std::fs::write(dir.join("sweep.json"), json + "\n").map_err(io)?;
    for (name, svg) in sweep_plots(r) {
        std::fs::write(dir.join(name), svg).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    #[test]
    fn mtf_curve_values() {
        let s = MtfSpec::new(0.3).unwrap();
        assert_eq!(mtf_curve(&s, 0.0), 1.0);
        assert!((mtf_curve(&s, 1.0) - 0.3).abs() < 1e-15);
        assert!((mtf_curve(&s, 0.5) - 0.7401).abs() < 1e-4);
    }

    #[test]
    fn continuous_sigma_for_s2() {
        // exp(−2π²σ²f²) = M with f = 1/2
        let s = continuous_sigma(0.3);
        assert!((s - 0.494).abs() < 1e-3);
        let f = 0.5;
        let back = (-2.0 * std::f64::consts::PI.powi(2) * s * s * f * f).exp();
        assert!((back - 0.3).abs() < 1e-12);
    }

    fn fft_nyquist(k: &Kernel) -> f64 {
        // 2-D DFT on a 32×32 zero-padded grid, bin (16, 0)
        let n = 32;
        let k2 = k.to_2d();
        let mut grid = vec![Complex::new(0.0, 0.0); n * n];
        let r = k.n / 2;
        for y in 0..k.n {
            for x in 0..k.n {
                let (gy, gx) = ((y + n - r) % n, (x + n - r) % n);
                grid[gy * n + gx] = Complex::new(k2[y * k.n + x], 0.0);
            }
        }
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        for row in grid.chunks_mut(n) {
            fft.process(row);
        }
        for x in 0..n {
            let mut col: Vec<Complex<f64>> = (0..n).map(|y| grid[y * n + x]).collect();
            fft.process(&mut col);
            for y in 0..n {
                grid[y * n + x] = col[y];
            }
        }
        grid[n / 2].norm()
    }

    #[test]
    fn kernel_hits_nyquist_target() {
        for m in [0.15, 0.3, 0.6] {
            let k = psf_kernel(&MtfSpec::new(m).unwrap()).unwrap();
            let got = fft_nyquist(&k);
            assert!((got - m).abs() <= 0.02 * m, "M={m}: {got}");
            let sum: f64 = k.to_2d().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_symmetry() {
        let k = psf_kernel(&MtfSpec::new(0.2).unwrap()).unwrap();
        let n = k.n;
        let k2 = k.to_2d();
        for y in 0..n {
            for x in 0..n {
                assert!(k2[y * n + x] >= 0.0);
                assert_eq!(k2[y * n + x], k2[x * n + y]);
                assert_eq!(k2[y * n + x], k2[(n - 1 - y) * n + (n - 1 - x)]);
            }
        }
    }

    #[test]
    fn small_kernel_rejected() {
        let spec = MtfSpec::with_size(0.01, 3).unwrap();
        assert!(matches!(psf_kernel(&spec), Err(SensorError::KernelTooSmall { .. })));
        assert!(MtfSpec::with_size(0.3, 4).is_err());
        assert!(MtfSpec::new(1.0).is_err());
    }

    #[test]
    fn bessel_weights_match_integral() {
        // T(x; t) = (1/2π) ∫ exp(t (cos ω − 1)) cos(xω) dω, trapezoid rule
        let t = 0.8;
        let w = bessel_weights(t, 5);
        let n = 4096;
        for (x, wx) in w.iter().enumerate() {
            let s: f64 = (0..n)
                .map(|i| {
                    let om = std::f64::consts::TAU * i as f64 / n as f64;
                    (t * (om.cos() - 1.0)).exp() * (x as f64 * om).cos()
                })
                .sum::<f64>()
                / n as f64;
            assert!((s - wx).abs() < 1e-14, "x={x}");
        }
    }

    fn textured(w: usize, h: usize) -> BandImage {
        BandImage::from_fn("B08", w, h, |c, r| {
            let base = 300.0 + 40.0 * ((c as f64 * 0.37).sin() + (r as f64 * 0.23).cos());
            let vessel = (20..30).contains(&c) && (14..18).contains(&r);
            if vessel {
                1800
            } else {
                base.round() as u16
            }
        })
    }

    #[test]
    fn same_mtf_is_identity() {
        let b = textured(48, 40);
        let s = MtfSpec::new(0.3).unwrap();
        assert_eq!(retarget_mtf(&b, &s, &s, 12).unwrap(), b);
    }

    #[test]
    fn sharpening_rejected() {
        let b = textured(8, 8);
        let r = retarget_mtf(&b, &MtfSpec::new(0.3).unwrap(), &MtfSpec::new(0.9).unwrap(), 12);
        assert!(matches!(r, Err(SensorError::SharpeningRequested { .. })));
    }

    #[test]
    fn impulse_response() {
        let n = 31;
        let mut b = BandImage::filled("B", n, n, 0);
        b.set(15, 15, 10_000);
        let (s, t) = (MtfSpec::new(0.3).unwrap(), MtfSpec::new(0.15).unwrap());
        let out = retarget_mtf(&b, &s, &t, 16).unwrap();
        // oracle: inverse DFT of the net transfer function exp(t (cos ω − 1))
        let tn = (0.3f64.ln() - 0.15f64.ln()) / 2.0;
        let samples = 4096;
        let one_d = |x: i64| -> f64 {
            (0..samples)
                .map(|i| {
                    let om = std::f64::consts::TAU * i as f64 / samples as f64;
                    (tn * (om.cos() - 1.0)).exp() * (x as f64 * om).cos()
                })
                .sum::<f64>()
                / samples as f64
        };
        for y in 5..26 {
            for x in 5..26 {
                let want = 10_000.0 * one_d(x - 15) * one_d(y - 15);
                let got = out.get(x as usize, y as usize) as f64;
                assert!((got - want).abs() <= 0.5 + 1e-4, "({x},{y}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn successive_retargets_compose() {
        let b = textured(64, 48);
        let specs: Vec<MtfSpec> = [0.4, 0.25, 0.1].iter().map(|&m| MtfSpec::new(m).unwrap()).collect();
        let ab = retarget_mtf(&b, &specs[0], &specs[1], 12).unwrap();
        let abc = retarget_mtf(&ab, &specs[1], &specs[2], 12).unwrap();
        let ac = retarget_mtf(&b, &specs[0], &specs[2], 12).unwrap();
        let worst = abc
            .data()
            .iter()
            .zip(ac.data())
            .map(|(x, y)| (*x as i32 - *y as i32).abs())
            .max()
            .unwrap();
        assert!(worst <= 1, "max diff {worst}");
    }

    #[test]
    fn noise_reproducible_and_scaled() {
        let spec = NoiseSpec::new(10.0, 42);
        let a = noise_field(100_000, &spec).unwrap();
        assert_eq!(a, noise_field(100_000, &spec).unwrap());
        let other = noise_field(100_000, &NoiseSpec::new(10.0, 43)).unwrap();
        assert_ne!(a, other);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let sd = (a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        assert!((sd - 10.0).abs() < 0.1, "{sd}");
        // a prefix is unchanged by the requested length
        assert_eq!(&noise_field(37, &spec).unwrap()[..], &a[..37]);
    }

    #[test]
    fn infinite_snr_is_identity() {
        let b = textured(16, 16);
        assert_eq!(add_noise(&b, &NoiseSpec::new(f64::INFINITY, 1), 12).unwrap(), b);
        assert_eq!(add_noise(&b, &NoiseSpec::new(1e12, 1), 12).unwrap(), b);
        assert!(add_noise(&b, &NoiseSpec::new(0.0, 1), 12).is_err());
    }

    #[test]
    fn noise_clamps() {
        let b = BandImage::filled("B", 64, 64, 4095);
        let out = add_noise(&b, &NoiseSpec::new(1.0, 3), 12).unwrap();
        assert!(out.data().iter().all(|&v| v <= 4095));
    }

    #[test]
    fn sweep_shape() {
        use crate::raster::test_meta;
        let g = Granule::new("g", vec![textured(32, 32)], test_meta()).unwrap();
        let src = MtfSpec::new(0.3).unwrap();
        let r = degradation_sweep(&[g], &src, &[0.3, 0.2], &[f64::INFINITY, 50.0, 10.0], 1, |_, _| {
            Ok(Counts { tp: 3, fp: 1, fn_: 0 })
        })
        .unwrap();
        assert_eq!(r.cells.len(), 6);
        assert_eq!(r.cells[0].snr, None);
        assert_eq!(r.cells[0].precision, 0.75);
        assert_eq!(sweep_plots(&r).len(), 3);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["cells"][0]["snr"].is_null());
    }
}
