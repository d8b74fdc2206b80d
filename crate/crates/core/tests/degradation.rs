use rawsea::pipeline::{detect_counts, PipelineConfig};
use rawsea::sensor::{degradation_sweep, MtfSpec, S2_MTF_NYQUIST};
use rawsea::synth::{synth_scene, SynthConfig};

/// Faint targets so that noise at low SNR actually costs detections.
fn faint() -> SynthConfig {
    SynthConfig {
        vessel_dn: (360.0, 480.0),
        noise_dn: 4.0,
        swell_dn: 10.0,
        width: 160,
        height: 160,
        vessels: (4, 8),
        ..SynthConfig::default()
    }
}

#[test]
fn f1_does_not_improve_with_more_noise() {
    let cfg = faint();
    let pcfg = PipelineConfig::default();
    let source = MtfSpec::new(S2_MTF_NYQUIST).unwrap();
    let (mut low, mut high) = (Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let scene = synth_scene(seed, 0, &cfg);
        let truth = scene.truth_boxes();
        let r = degradation_sweep(
            std::slice::from_ref(&scene.granule),
            &source,
            &[S2_MTF_NYQUIST],
            &[5.0, 1000.0],
            seed,
            |_, g| detect_counts(g, &truth, &pcfg).map_err(|e| e.to_string()),
        )
        .unwrap();
        low.push(r.cells[0].f1);
        high.push(r.cells[1].f1);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (l, h) = (mean(&low), mean(&high));
    println!("mean F1 at snr 5: {l:.4}, at snr 1000: {h:.4}");
    assert!(l <= h, "F1 at snr 5 ({l}) above F1 at snr 1000 ({h})");
    assert!(l < h, "snr 5 did not degrade the faint scenes; test is not discriminating");
}

#[test]
fn blur_lowers_vessel_contrast() {
    let cfg = faint();
    let scene = synth_scene(3, 0, &cfg);
    let source = MtfSpec::new(S2_MTF_NYQUIST).unwrap();
    let target = MtfSpec::new(0.05).unwrap();
    let b = scene.granule.band(&cfg.reference_band).unwrap();
    let blurred = rawsea::sensor::retarget_mtf(b, &source, &target, 12).unwrap();
    let peak = |img: &rawsea::raster::BandImage| {
        scene
            .truth_boxes()
            .iter()
            .map(|bb| {
                let (c, r) = bb.center();
                img.get(c as usize, r as usize) as f64
            })
            .sum::<f64>()
    };
    assert!(peak(&blurred) < peak(b));
}
