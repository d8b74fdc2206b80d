//! Serve the review API over a synthetic dataset with automatic matches
//! already applied.
//!
//!     cargo run --example review_server -- [port]
//!
//! Then e.g. `curl localhost:8080/api/granules`.

use rawsea::aiscoco::write_aiscoco;
use rawsea::ais::write_ais_csv;
use rawsea::pipeline::{self, PipelineConfig};
use rawsea::server::{serve, ServeConfig};
use rawsea::synth::{synth_dataset, write_dataset, SynthConfig};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let port: u16 = std::env::args().nth(1).map_or(Ok(8080), |s| s.parse())?;
    let dir = tempfile::tempdir()?;
    let scenes = synth_dataset(12, 3, &SynthConfig::default());
    write_dataset(&scenes, dir.path())?;
    let granules: Vec<_> = scenes.iter().map(|s| s.granule.clone()).collect();
    let ais: Vec<_> = scenes.iter().flat_map(|s| s.ais.clone()).collect();
    let out = pipeline::run(&granules, &ais, &PipelineConfig::default())?;
    let store = dir.path().join("matched.json");
    write_aiscoco(&out.doc, &store)?;
    write_ais_csv(std::fs::File::create(dir.path().join("ais.csv"))?, &ais)?;

    let mut cfg = ServeConfig::new(&store, dir.path().join("granules"));
    cfg.ais = Some(dir.path().join("ais.csv"));
    println!("store {}", store.display());
    println!("http://127.0.0.1:{port}/api/granules  (Ctrl-C to stop)");
    serve(cfg, ([127, 0, 0, 1], port).into()).await?;
    Ok(())
}
