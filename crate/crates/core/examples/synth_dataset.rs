//! Write a seeded synthetic dataset: raw-geometry granules with band
//! offsets, ground truth in AISCOCO and an AIS CSV.
//!
//!     cargo run --example synth_dataset -- [out_dir] [count] [seed]

use rawsea::synth::{synth_dataset, write_dataset, SynthConfig};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().map(String::as_str).unwrap_or("synth_out");
    let count = args.get(1).map_or(Ok(5), |s| s.parse())?;
    let seed = args.get(2).map_or(Ok(0), |s| s.parse())?;

    let scenes = synth_dataset(seed, count, &SynthConfig::default());
    write_dataset(&scenes, out)?;
    for s in &scenes {
        let offsets: Vec<String> = s.shifts.entries.iter().map(|(b, (dx, dy))| format!("{b}:{dx:+},{dy:+}")).collect();
        println!(
            "{}  {} vessels  {} AIS rows  offsets {}",
            s.granule.id,
            s.vessels.len(),
            s.ais.len(),
            offsets.join(" ")
        );
    }
    println!("wrote {out}/granules, {out}/truth.json, {out}/ais.csv");
    Ok(())
}
