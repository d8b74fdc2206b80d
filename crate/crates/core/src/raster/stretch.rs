use super::{BandImage, RasterError, Result};

/// Linear-interpolated percentile (`pct` in [0, 100]) of a sorted slice.
pub fn percentile(sorted: &[u16], pct: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = pct.clamp(0.0, 100.0) / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 + (sorted[hi] as f64 - sorted[lo] as f64) * frac
}

/// Linear stretch between the `lo_pct` and `hi_pct` percentile DN, clamped
/// to 0..=255. A degenerate range maps every pixel to 128.
pub fn stretch_to_gray8(b: &BandImage, lo_pct: f64, hi_pct: f64) -> Result<Vec<u8>> {
    if !(0.0..100.0).contains(&lo_pct) || !(hi_pct > lo_pct && hi_pct <= 100.0) {
        return Err(RasterError::InvalidPercentiles {
            lo: lo_pct,
            hi: hi_pct,
        });
    }
    let mut sorted = b.data().to_vec();
    sorted.sort_unstable();
    let lo = percentile(&sorted, lo_pct);
    let hi = percentile(&sorted, hi_pct);
    if !(hi > lo) {
        return Ok(vec![128; b.data().len()]);
    }
    let scale = 255.0 / (hi - lo);
    Ok(b
        .data()
        .iter()
        .map(|&v| ((v as f64 - lo) * scale).round().clamp(0.0, 255.0) as u8)
        .collect())
}

/// 8-bit grayscale PNG of the stretched band.
pub fn stretch_to_png(b: &BandImage, lo_pct: f64, hi_pct: f64) -> Result<Vec<u8>> {
    let pixels = stretch_to_gray8(b, lo_pct, hi_pct)?;
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, b.width() as u32, b.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| RasterError::Png(e.to_string()))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| RasterError::Png(e.to_string()))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode(bytes: &[u8]) -> Vec<u8> {
        let dec = png::Decoder::new(bytes);
        let mut reader = dec.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!(info.color_type, png::ColorType::Grayscale);
        buf.truncate(info.buffer_size());
        buf
    }

    #[test]
    fn constant_is_mid_gray() {
        let b = BandImage::filled("B02", 5, 4, 731);
        let px = decode(&stretch_to_png(&b, 2.0, 98.0).unwrap());
        assert!(px.iter().all(|&v| v == 128));
    }

    #[test]
    fn two_value_endpoints() {
        let b = BandImage::new("B02", 2, 2, vec![0, 4095, 4095, 0]).unwrap();
        let px = decode(&stretch_to_png(&b, 0.0, 100.0).unwrap());
        assert_eq!(px, vec![0, 255, 255, 0]);
    }

    #[test]
    fn random_image_spans_full_range() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let data: Vec<u16> = (0..64 * 64).map(|_| rng.gen_range(0..4096)).collect();
        let b = BandImage::new("B02", 64, 64, data.clone()).unwrap();
        let mut sorted = data;
        sorted.sort_unstable();
        // tails are non-empty for this draw
        assert!(sorted[0] < percentile(&sorted, 2.0) as u16);
        assert!(*sorted.last().unwrap() as f64 > percentile(&sorted, 98.0));
        let px = stretch_to_gray8(&b, 2.0, 98.0).unwrap();
        assert_eq!(*px.iter().min().unwrap(), 0);
        assert_eq!(*px.iter().max().unwrap(), 255);
    }

    #[test]
    fn bad_percentiles_rejected() {
        let b = BandImage::filled("B02", 2, 2, 1);
        assert!(stretch_to_gray8(&b, 50.0, 50.0).is_err());
        assert!(stretch_to_gray8(&b, -1.0, 50.0).is_err());
    }
}
