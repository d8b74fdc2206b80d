//! Per-band statistics of vessel and sea pixels, band dissimilarity and
//! per-band detector scores, written as JSON plus SVG plots.
//!
//!     cargo run --example band_analysis -- [out_dir]

use std::collections::BTreeMap;

use rawsea::analysis::{band_report, band_stats, dissimilarity, write_band_report, DissimMetric, StatsConfig};
use rawsea::pipeline::{band_metrics, register, PipelineConfig};
use rawsea::synth::{synth_scene, SynthConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "band_report".into());
    let scene = synth_scene(6, 0, &SynthConfig::default());
    let cfg = PipelineConfig::default();
    let (reg, _) = register(&scene.granule, &cfg)?;
    let truth = scene.truth_boxes();
    let n = reg.granule.width() * reg.granule.height();
    let valid: Vec<bool> = (0..n).map(|i| reg.valid.values().all(|m| m[i])).collect();

    let boxes = BTreeMap::from([("*".to_string(), truth.clone())]);
    let stats = band_stats(&reg.granule, &boxes, Some(&valid), &StatsConfig::default())?;
    for s in &stats {
        println!("{}: vessel mean {:.1} DN, sea mean {:.1} DN", s.band_id, s.mean_vessel_dn, s.mean_sea_dn);
    }
    let pcc = dissimilarity(&reg.granule, &truth, DissimMetric::Pcc).ok();
    let ed = dissimilarity(&reg.granule, &truth, DissimMetric::Ed).ok();
    let metrics = band_metrics(&reg, &truth, &cfg)?;
    let report = band_report(stats, pcc, ed, metrics);
    for f in write_band_report(&report, std::path::Path::new(&out))? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
