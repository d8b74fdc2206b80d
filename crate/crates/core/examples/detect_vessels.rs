//! Register a granule, run the baseline detector on the band composite and
//! write the detections as AISCOCO.
//!
//!     cargo run --example detect_vessels -- [granule_dir] [out.json]

use rawsea::aiscoco::{to_canonical_string, write_aiscoco};
use rawsea::pipeline::{detect_granule, detections_doc, PipelineConfig};
use rawsea::raster::load_granule;
use rawsea::synth::{synth_scene, SynthConfig};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let granule = match args.first() {
        Some(dir) => load_granule(dir)?,
        None => synth_scene(2, 0, &SynthConfig::default()).granule,
    };
    let cfg = PipelineConfig::default();
    let det = detect_granule(&granule, &cfg)?;
    println!("{}: {} detections", granule.id, det.detections.len());
    for d in &det.detections {
        let [x, y, w, h] = d.bbox.to_xywh();
        println!("  [{x:6.1} {y:6.1} {w:5.1} {h:5.1}]  score {:.2}", d.score);
    }
    let doc = detections_doc(std::slice::from_ref(&granule), std::slice::from_ref(&det));
    match args.get(1) {
        Some(out) => write_aiscoco(&doc, out)?,
        None => print!("{}", to_canonical_string(&doc)?),
    }
    Ok(())
}
