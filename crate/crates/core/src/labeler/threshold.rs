//! Histogram thresholding: Otsu, Li (minimum cross entropy), Isodata and Mean.
//!
//! Every method is a function of the patch histogram only, so results do
//! not depend on pixel order. Foreground is `pixel > t`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{LabelError, Result};

/// Iteration cap for Li and Isodata.
pub const MAX_ITERATIONS: usize = 64;
/// Convergence tolerance on successive thresholds, DN.
pub const CONVERGENCE_DN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdMethod {
    Otsu,
    Li,
    Isodata,
    Mean,
}

impl ThresholdMethod {
    pub const ALL: [ThresholdMethod; 4] = [Self::Otsu, Self::Li, Self::Isodata, Self::Mean];
}

/// Two-class split statistics at a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub weight_bg: f64,
    pub weight_fg: f64,
    pub var_bg: f64,
    pub var_fg: f64,
    /// Mean of pixels `<= t` (0 when the class is empty).
    pub mean_low: f64,
    /// Mean of pixels `> t` (0 when the class is empty).
    pub mean_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub method: ThresholdMethod,
    pub t: f64,
    pub mask: Vec<bool>,
    pub stats: ClassStats,
}

/// Sorted distinct values with counts and running sums.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub values: Vec<u16>,
    pub counts: Vec<u64>,
    total: u64,
    sum: u128,
    sum_sq: u128,
}

impl Histogram {
    pub fn from_values(pixels: &[u16]) -> Self {
        let mut values = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        if pixels.len() < 8192 {
            let mut sorted = pixels.to_vec();
            sorted.sort_unstable();
            for v in sorted {
                if values.last() == Some(&v) {
                    *counts.last_mut().expect("paired with values") += 1;
                } else {
                    values.push(v);
                    counts.push(1);
                }
            }
        } else {
            let mut bins = vec![0u64; u16::MAX as usize + 1];
            for &p in pixels {
                bins[p as usize] += 1;
            }
            for (v, &n) in bins.iter().enumerate() {
                if n > 0 {
                    values.push(v as u16);
                    counts.push(n);
                }
            }
        }
        let (mut sum, mut sum_sq) = (0u128, 0u128);
        for (&v, &n) in values.iter().zip(&counts) {
            sum += v as u128 * n as u128;
            sum_sq += (v as u128) * (v as u128) * n as u128;
        }
        Self {
            values,
            counts,
            total: pixels.len() as u64,
            sum,
            sum_sq,
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.total as f64
    }

    /// (count, sum, sum of squares) of values `<= t` (with `offset` added to
    /// each value).
    fn lower(&self, t: f64, offset: f64) -> (f64, f64, f64) {
        let (mut n, mut s, mut q) = (0.0, 0.0, 0.0);
        for (&v, &c) in self.values.iter().zip(&self.counts) {
            let x = v as f64 + offset;
            if x > t {
                break;
            }
            n += c as f64;
            s += x * c as f64;
            q += x * x * c as f64;
        }
        (n, s, q)
    }

    fn class_stats(&self, t: f64) -> ClassStats {
        let (n_lo, s_lo, q_lo) = self.lower(t, 0.0);
        let n = self.total as f64;
        let (s, q) = (self.sum as f64, self.sum_sq as f64);
        let (n_hi, s_hi, q_hi) = (n - n_lo, s - s_lo, q - q_lo);
        let moments = |n: f64, s: f64, q: f64| {
            if n > 0.0 {
                let m = s / n;
                (m, (q / n - m * m).max(0.0))
            } else {
                (0.0, 0.0)
            }
        };
        let (m_lo, v_lo) = moments(n_lo, s_lo, q_lo);
        let (m_hi, v_hi) = moments(n_hi, s_hi, q_hi);
        ClassStats {
            weight_bg: n_lo / n,
            weight_fg: n_hi / n,
            var_bg: v_lo,
            var_fg: v_hi,
            mean_low: m_lo,
            mean_high: m_hi,
        }
    }
}

fn result(method: ThresholdMethod, hist: &Histogram, pixels: &[u16], t: f64) -> ThresholdResult {
    ThresholdResult {
        method,
        t,
        mask: pixels.iter().map(|&p| p as f64 > t).collect(),
        stats: hist.class_stats(t),
    }
}

fn require_two_levels(hist: &Histogram) -> Result<()> {
    match hist.distinct() {
        0 => Err(LabelError::EmptyPatch),
        1 => Err(LabelError::ConstantPatch),
        _ => Ok(()),
    }
}

/// Between-class score `S_lo²/n_lo + S_hi²/n_hi`, exact while it fits.
#[derive(Debug, Clone, Copy)]
enum Score {
    Exact { num: u128, den: u128 },
    Approx(f64),
}

impl Score {
    fn new(n_lo: u128, s_lo: u128, n_hi: u128, s_hi: u128) -> Self {
        if n_hi == 0 {
            return match s_lo.checked_mul(s_lo) {
                Some(num) => Score::Exact { num, den: n_lo },
                None => Score::Approx((s_lo as f64).powi(2) / n_lo as f64),
            };
        }
        let exact = s_lo
            .checked_mul(s_lo)
            .and_then(|a| a.checked_mul(n_hi))
            .zip(s_hi.checked_mul(s_hi).and_then(|b| b.checked_mul(n_lo)))
            .and_then(|(a, b)| a.checked_add(b));
        match exact {
            Some(num) => Score::Exact { num, den: n_lo * n_hi },
            None => Score::Approx(
                (s_lo as f64).powi(2) / n_lo as f64 + (s_hi as f64).powi(2) / n_hi as f64,
            ),
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Score::Exact { num, den } => num as f64 / den as f64,
            Score::Approx(v) => v,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        if let (Score::Exact { num: a, den: b }, Score::Exact { num: c, den: d }) = (self, other) {
            if let (Some(l), Some(r)) = (a.checked_mul(*d), c.checked_mul(*b)) {
                return l.cmp(&r);
            }
        }
        self.value().partial_cmp(&other.value()).unwrap_or(Ordering::Equal)
    }
}

/// Otsu: `t` minimizes `ω_bg σ²_bg + ω_fg σ²_fg` over the distinct DN
/// values; ties resolve to the lowest `t`.
///
/// Minimizing the weighted intra-class variance is equivalent to maximizing
/// `S_bg²/n_bg + S_fg²/n_fg` (sums and counts per class), which is compared
/// in exact integer arithmetic.
pub fn threshold_otsu(pixels: &[u16]) -> Result<ThresholdResult> {
    let hist = Histogram::from_values(pixels);
    require_two_levels(&hist)?;
    let n = hist.total as u128;
    let mut best: Option<(Score, usize)> = None;
    let (mut n_lo, mut s_lo) = (0u128, 0u128);
    for (k, (&v, &c)) in hist.values.iter().zip(&hist.counts).enumerate() {
        n_lo += c as u128;
        s_lo += v as u128 * c as u128;
        let score = Score::new(n_lo, s_lo, n - n_lo, hist.sum - s_lo);
        if best.map_or(true, |(b, _)| score.cmp(&b) == Ordering::Greater) {
            best = Some((score, k));
        }
    }
    let (_, k) = best.expect("at least two levels");
    Ok(result(ThresholdMethod::Otsu, &hist, pixels, hist.values[k] as f64))
}

/// One Li update from `t` in the (possibly offset) log-safe domain.
fn li_step(hist: &Histogram, t: f64, offset: f64) -> f64 {
    let (n_lo, s_lo, _) = hist.lower(t, offset);
    let n = hist.total as f64;
    let s = hist.sum as f64 + offset * n;
    let mu_lo = s_lo / n_lo;
    let mu_hi = (s - s_lo) / (n - n_lo);
    (mu_lo - mu_hi) / (mu_lo.ln() - mu_hi.ln())
}

/// Li minimum cross-entropy threshold, iterating
/// `t ← (μ_lo − μ_hi) / (ln μ_lo − ln μ_hi)` from the mean until the update
/// moves less than 0.5 DN. Values are shifted by +1 when zeros are present
/// and the result is reported in the original DN domain.
pub fn threshold_li(pixels: &[u16]) -> Result<ThresholdResult> {
    let hist = Histogram::from_values(pixels);
    require_two_levels(&hist)?;
    let offset = if hist.values[0] == 0 { 1.0 } else { 0.0 };
    let mut t = hist.mean() + offset;
    for _ in 0..MAX_ITERATIONS {
        let next = li_step(&hist, t, offset);
        let done = (next - t).abs() < CONVERGENCE_DN;
        t = next;
        if done {
            return Ok(result(ThresholdMethod::Li, &hist, pixels, t - offset));
        }
    }
    Err(LabelError::NonConvergence(ThresholdMethod::Li))
}

/// Evaluate the Li update map at `t` (original DN domain).
pub fn li_update(pixels: &[u16], t: f64) -> f64 {
    let hist = Histogram::from_values(pixels);
    let offset = if hist.values.first() == Some(&0) { 1.0 } else { 0.0 };
    li_step(&hist, t + offset, offset) - offset
}

/// Isodata (Ridler-Calvard): `t ← (m_L(t) + m_H(t)) / 2` from the mean until
/// the update moves less than 0.5 DN.
pub fn threshold_isodata(pixels: &[u16]) -> Result<ThresholdResult> {
    let hist = Histogram::from_values(pixels);
    require_two_levels(&hist)?;
    let mut t = hist.mean();
    for _ in 0..MAX_ITERATIONS {
        let next = isodata_step(&hist, t);
        let done = (next - t).abs() < CONVERGENCE_DN;
        t = next;
        if done {
            return Ok(result(ThresholdMethod::Isodata, &hist, pixels, t));
        }
    }
    Err(LabelError::NonConvergence(ThresholdMethod::Isodata))
}

fn isodata_step(hist: &Histogram, t: f64) -> f64 {
    let st = hist.class_stats(t);
    (st.mean_low + st.mean_high) / 2.0
}

/// Evaluate the Isodata update map at `t`.
pub fn isodata_update(pixels: &[u16], t: f64) -> f64 {
    isodata_step(&Histogram::from_values(pixels), t)
}

/// Mean threshold, `t = Σx / N`. A constant patch yields an empty foreground.
pub fn threshold_mean(pixels: &[u16]) -> Result<ThresholdResult> {
    let hist = Histogram::from_values(pixels);
    if hist.total == 0 {
        return Err(LabelError::EmptyPatch);
    }
    Ok(result(ThresholdMethod::Mean, &hist, pixels, hist.mean()))
}

pub fn threshold(method: ThresholdMethod, pixels: &[u16]) -> Result<ThresholdResult> {
    match method {
        ThresholdMethod::Otsu => threshold_otsu(pixels),
        ThresholdMethod::Li => threshold_li(pixels),
        ThresholdMethod::Isodata => threshold_isodata(pixels),
        ThresholdMethod::Mean => threshold_mean(pixels),
    }
}
