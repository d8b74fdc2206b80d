pub mod bbox;
pub mod coregister;
pub mod raster;
pub mod components;
pub mod labeler;
pub mod detector;
pub mod metrics;
pub mod ais;
pub mod analysis;
pub mod plot;
pub mod sensor;
pub mod aiscoco;
pub mod synth;
pub mod pipeline;
pub mod review;
pub mod server;
pub mod cli;
