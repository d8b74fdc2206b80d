//! Match detections to AIS across several granules: per-granule cost
//! matrices, optimal assignment, then one box per MMSI overall.
//!
//!     cargo run --example match_ais

use rawsea::ais::{candidates_for_granule, Footprint, MatchConfig, MatchMode};
use rawsea::pipeline::{self, PipelineConfig};
use rawsea::synth::{synth_dataset, SynthConfig};

fn main() -> anyhow::Result<()> {
    let scenes = synth_dataset(8, 3, &SynthConfig::default());
    let granules: Vec<_> = scenes.iter().map(|s| s.granule.clone()).collect();
    let ais: Vec<_> = scenes.iter().flat_map(|s| s.ais.clone()).collect();
    let cfg = PipelineConfig::default();

    let out = pipeline::run(&granules, &ais, &cfg)?;
    println!("{:<10} {:>4} {:>10} {:>9}  status", "granule", "box", "mmsi", "cost m");
    for d in &out.matching.decisions {
        println!(
            "{:<10} {:>4} {:>10} {:>9}  {:?}",
            d.granule,
            d.box_id,
            d.mmsi.map_or("-".into(), |m| m.to_string()),
            d.cost.map_or("-".into(), |c| format!("{c:.1}")),
            d.status
        );
    }

    // full candidate list for the first box, as the review UI shows it
    let fps: Vec<(String, Footprint)> = granules.iter().map(|g| (g.id.clone(), Footprint::of_granule(g))).collect();
    let gbs = pipeline::granule_boxes(&out.doc, &fps)?;
    let cands = candidates_for_granule(&gbs[0], &ais, &MatchConfig::default(), MatchMode::Dense)?;
    if let Some(b) = cands.first() {
        println!("\ncandidates for box {} in {}:", b.box_id, gbs[0].granule);
        for c in &b.candidates {
            println!(
                "  {}  d_perp {:7.1}  d_eucl {:7.1}  w {:.1}  cost {}",
                c.mmsi,
                c.d_perp,
                c.d_eucl,
                c.w_nav,
                c.cost.map_or("beyond cutoff".into(), |v| format!("{v:.1}"))
            );
        }
    }
    Ok(())
}
