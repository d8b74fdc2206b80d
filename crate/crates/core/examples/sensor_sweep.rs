//! Degrade imagery to a coarser MTF and lower SNR and watch detector scores
//! respond.
//!
//!     cargo run --example sensor_sweep

use rawsea::pipeline::{detect_counts, PipelineConfig};
use rawsea::sensor::{degradation_sweep, psf_kernel, MtfSpec, NoiseSpec, BASELINE_SNR, S2_MTF_NYQUIST};
use rawsea::synth::{synth_dataset, SynthConfig};

fn main() -> anyhow::Result<()> {
    for m in [0.15, 0.3, 0.6] {
        let k = psf_kernel(&MtfSpec::new(m)?)?;
        println!("M {m}: {}-tap kernel, response at Nyquist {:.4}", k.n, k.nyquist_response());
    }
    println!("noise std at snr {BASELINE_SNR}: {:.4} DN", NoiseSpec::new(BASELINE_SNR, 0).sigma());

    let cfg = SynthConfig {
        vessel_dn: (380.0, 700.0),
        ..SynthConfig::default()
    };
    let scenes = synth_dataset(3, 4, &cfg);
    let granules: Vec<_> = scenes.iter().map(|s| s.granule.clone()).collect();
    let truth: Vec<_> = scenes.iter().map(|s| s.truth_boxes()).collect();
    let pcfg = PipelineConfig::default();
    let r = degradation_sweep(
        &granules,
        &MtfSpec::new(S2_MTF_NYQUIST)?,
        &[0.3, 0.15, 0.05],
        &[f64::INFINITY, BASELINE_SNR, 20.0, 5.0],
        7,
        |i, g| detect_counts(g, &truth[i], &pcfg).map_err(|e| e.to_string()),
    )?;
    println!("\n{:>5} {:>6} {:>6} {:>6} {:>6}", "M", "snr", "P", "R", "F1");
    for c in &r.cells {
        let snr = c.snr.map_or("inf".into(), |s| s.to_string());
        println!("{:>5} {snr:>6} {:>6.3} {:>6.3} {:>6.3}", c.m, c.precision, c.recall, c.f1);
    }
    Ok(())
}
