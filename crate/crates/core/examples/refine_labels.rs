//! Refine loose boxes per band with the four-threshold vote and compare the
//! fitted boxes with the true vessel footprints.
//!
//!     cargo run --example refine_labels

use rawsea::bbox::BBox;
use rawsea::labeler::{refine_annotations, threshold_consensus, DEFAULT_MARGIN};
use rawsea::metrics::iou;
use rawsea::pipeline::{register, PipelineConfig};
use rawsea::synth::{synth_scene, SynthConfig};

fn main() -> anyhow::Result<()> {
    let scene = synth_scene(4, 0, &SynthConfig::default());
    let (reg, _) = register(&scene.granule, &PipelineConfig::default())?;
    let truth = scene.truth_boxes();
    // what an annotator might draw: a few pixels too big and off-center
    let coarse: Vec<BBox> = truth.iter().map(|b| b.expanded(3.0).translated(1.0, -1.0)).collect();

    let refined = refine_annotations(&reg.granule, &coarse, DEFAULT_MARGIN);
    let mean_iou = |bs: &[BBox]| bs.iter().zip(&truth).map(|(a, t)| iou(a, t)).sum::<f64>() / truth.len() as f64;
    println!("coarse boxes: mean IoU {:.3}", mean_iou(&coarse));
    for (band, boxes) in &refined {
        println!("{band}: mean IoU {:.3}", mean_iou(boxes));
    }

    // vote counts inside one patch
    let b = reg.granule.band("B03").expect("reference band");
    let w = coarse[0].expanded(DEFAULT_MARGIN as f64);
    let win = w.pixel_window(b.width(), b.height()).expect("box inside the image");
    let patch = b.window_values(&win);
    let c = threshold_consensus(&patch)?;
    println!("patch {}x{}: {} pixels with two or more votes", win.width(), win.height(), c.count());
    Ok(())
}
