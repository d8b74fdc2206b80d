//! Small-object metrics: SIoU against IoU as boxes shrink, and a scored
//! evaluation of detector output against ground truth.
//!
//!     cargo run --example evaluate_siou

use rawsea::bbox::BBox;
use rawsea::metrics::{iou, mcc_counts, siou, SIoUParams, DEFAULT_SIOU_THRESHOLD};
use rawsea::pipeline::{self, PipelineConfig};
use rawsea::synth::{synth_dataset, truth_doc, SynthConfig};

fn main() -> anyhow::Result<()> {
    let p = SIoUParams::default();
    println!("{:>6} {:>8} {:>8}", "size", "IoU", "SIoU");
    for s in [1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
        let a = BBox::from_xywh([0.0, 0.0, s, s]);
        let b = BBox::from_xywh([s / 2.0, 0.0, s, s]);
        println!("{s:>6} {:>8.4} {:>8.4}", iou(&a, &b), siou(&a, &b, &p));
    }

    let scenes = synth_dataset(5, 6, &SynthConfig::default());
    let granules: Vec<_> = scenes.iter().map(|s| s.granule.clone()).collect();
    let out = pipeline::run(&granules, &[], &PipelineConfig::default())?;
    let rep = pipeline::evaluate_docs(&out.doc, &truth_doc(&scenes), DEFAULT_SIOU_THRESHOLD, &p)?;
    for g in &rep.per_granule {
        println!("{}  tp {} fp {} fn {}  f1 {:.3}", g.granule, g.tp, g.fp, g.fn_, g.f1);
    }
    println!("overall precision {:.3} recall {:.3} f1 {:.3}", rep.precision, rep.recall, rep.f1);
    println!("MCC of (tp 4, fp 1, fn 2, tn 3): {:.4}", mcc_counts(4, 1, 2, 3));
    Ok(())
}
