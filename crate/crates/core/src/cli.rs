//! `rawsea` command line. Each subcommand is a thin wrapper over the library
//! and writes a run manifest next to its output.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::ais::{read_ais_csv, write_decision_log, Footprint, MatchConfig, MatchMode};
use crate::aiscoco::{write_aiscoco, AiscocoDoc};
use crate::analysis::{band_report, band_stats, dissimilarity, write_band_report, DissimMetric, StatsConfig};
use crate::bbox::BBox;
use crate::coregister::{apply_shift_table, ShiftTable};
use crate::labeler::{refine_annotations, DEFAULT_MARGIN};
use crate::metrics::{SIoUParams, DEFAULT_SIOU_THRESHOLD};
use crate::pipeline::{self, PipelineConfig};
use crate::raster::{load_granule, write_granule, Granule, MetaFile};
use crate::sensor::{degradation_sweep, write_sweep, MtfSpec, BASELINE_SNR};
use crate::server::{ServeConfig, STORE_ENV};
use crate::synth::{synth_dataset, write_dataset, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "rawsea", version, about = "Vessel detection and AIS matching on raw multispectral granules")]
pub struct Cli {
    /// Print errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// Where to write the run manifest (default: next to the output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register every band onto a reference band.
    Register(RegisterArgs),
    /// Refine coarse boxes per band with threshold consensus.
    Label(LabelArgs),
    /// Run the baseline detector; writes AISCOCO predictions.
    Detect(DetectArgs),
    /// Match predicted boxes to AIS; writes matched AISCOCO and a decision log.
    MatchAis(MatchArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Per-band statistics, dissimilarity and detector metrics with plots.
    BandReport(BandReportArgs),
    /// Sweep MTF and SNR degradations and score the detector.
    Degrade(DegradeArgs),
    /// Serve the review API.
    Serve(ServeArgs),
    /// Write a seeded synthetic dataset (granules, truth, AIS).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct GranuleInputs {
    /// Granule directory (repeatable).
    #[arg(long = "granule")]
    pub granules: Vec<PathBuf>,
    /// Directory whose subdirectories are granules.
    #[arg(long)]
    pub root: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub granule: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "B03")]
    pub reference: String,
    #[arg(long, default_value_t = 10)]
    pub max_shift: u32,
    /// Use a fixed shift table instead of estimating.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub granule: PathBuf,
    /// AISCOCO file with coarse boxes for this granule.
    #[arg(long)]
    pub boxes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    pub margin: usize,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub inputs: GranuleInputs,
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline config JSON (defaults for missing fields).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub max_shift: Option<u32>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Dense,
    Daily,
}

impl From<ModeArg> for MatchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Dense => MatchMode::Dense,
            ModeArg::Daily => MatchMode::Daily,
        }
    }
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// AISCOCO predictions; granules are processed in image id order.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub ais: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Decision log (JSON lines); default `<out stem>.decisions.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dense")]
    pub mode: ModeArg,
    /// Match config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long = "siou-thresh", default_value_t = DEFAULT_SIOU_THRESHOLD)]
    pub siou_thresh: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2 * 2.0)]
    pub kappa: f64,
    /// Report JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BandReportArgs {
    #[arg(long)]
    pub granule: PathBuf,
    /// AISCOCO file, or per-band boxes written by `label`.
    #[arg(long)]
    pub boxes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub sea_sample: usize,
    #[arg(long, default_value = "B03")]
    pub reference: String,
    /// Register before measuring (0 = granule is already registered).
    #[arg(long, default_value_t = 0)]
    pub max_shift: u32,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[command(flatten)]
    pub inputs: GranuleInputs,
    /// Ground-truth AISCOCO in reference band coordinates.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [BASELINE_SNR])]
    pub snr: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub mtf: Vec<f64>,
    /// Nyquist MTF of the input imagery (default: from the sensor).
    #[arg(long)]
    pub source_mtf: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// AISCOCO store (overridden by RAWSEA_STORE).
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub ais: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, value_enum, default_value = "dense")]
    pub mode: ModeArg,
    /// Built UI bundle to serve at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Error split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Domain(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
    bytes: u64,
}

fn files_under(p: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if p.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        entries.sort();
        for e in entries {
            files_under(&e, out)?;
        }
    } else if p.is_file() {
        out.push(p.to_path_buf());
    }
    Ok(())
}

/// Digest of a file, or of every file under a directory in path order.
fn digest(p: &Path) -> anyhow::Result<FileDigest> {
    let mut files = Vec::new();
    files_under(p, &mut files)?;
    let mut h = Sha256::new();
    let mut bytes = 0u64;
    for f in &files {
        let data = std::fs::read(f).with_context(|| format!("reading {}", f.display()))?;
        if p.is_dir() {
            h.update(f.strip_prefix(p).unwrap_or(f).to_string_lossy().as_bytes());
            h.update([0]);
        }
        bytes += data.len() as u64;
        h.update(&data);
    }
    let sha256 = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(FileDigest {
        path: p.display().to_string(),
        sha256,
        bytes,
    })
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    args: Vec<String>,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

struct Run {
    command: String,
    args: Vec<String>,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest: Option<PathBuf>,
}

impl Run {
    fn new(command: &str, args: &[String]) -> Self {
        Self {
            command: command.into(),
            args: args.to_vec(),
            config: Value::Null,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            manifest: None,
        }
    }

    fn write(self, path: &Path) -> anyhow::Result<()> {
        let m = Manifest {
            tool: "rawsea",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            args: self.args,
            config: self.config,
            seed: self.seed,
            inputs: self.inputs.iter().map(|p| digest(p)).collect::<anyhow::Result<_>>()?,
            outputs: self.outputs.iter().map(|p| digest(p)).collect::<anyhow::Result<_>>()?,
        };
        write_text(path, &(serde_json::to_string_pretty(&m)? + "\n"))
    }
}

/// Default manifest location: inside an output directory, or beside an
/// output file as `<stem>.manifest.json`.
fn manifest_for(out: &Path) -> PathBuf {
    if out.is_dir() {
        return out.join("manifest.json");
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("{}: at {}: {}", path.display(), e.path(), e.inner()))
}

fn read_aiscoco(path: &Path) -> anyhow::Result<AiscocoDoc> {
    crate::aiscoco::read_aiscoco(path).with_context(|| format!("reading {}", path.display()))
}

/// `{:#}` without repeating a cause the outer message already quotes.
fn error_message(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in e.chain() {
        let m = cause.to_string();
        if !parts.last().is_some_and(|prev| prev.contains(&m)) {
            parts.push(m);
        }
    }
    parts.join(": ")
}

fn granule_dirs(inputs: &GranuleInputs) -> CliResult<Vec<PathBuf>> {
    let mut dirs = inputs.granules.clone();
    if let Some(root) = &inputs.root {
        let mut sub: Vec<PathBuf> = std::fs::read_dir(root)
            .with_context(|| format!("reading {}", root.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("meta.json").is_file())
            .collect();
        sub.sort();
        dirs.extend(sub);
    }
    if dirs.is_empty() {
        return usage("give at least one --granule or a --root with granules");
    }
    Ok(dirs)
}

fn load_all(dirs: &[PathBuf]) -> anyhow::Result<Vec<Granule>> {
    use rayon::prelude::*;
    dirs.par_iter()
        .map(|d| load_granule(d).with_context(|| format!("loading granule {}", d.display())))
        .collect()
}

fn image_boxes(doc: &AiscocoDoc, granule: &str) -> anyhow::Result<Vec<BBox>> {
    let img = doc
        .image_by_name(granule)
        .with_context(|| format!("no image named {granule} in the annotations"))?;
    let mut anns: Vec<_> = doc.annotations_for(img.id).collect();
    anns.sort_by_key(|a| a.id);
    Ok(anns.iter().map(|a| a.bbox()).collect())
}

fn cmd_register(a: &RegisterArgs, run: &mut Run) -> CliResult<()> {
    let g = load_granule(&a.granule).context("loading granule")?;
    let cfg = PipelineConfig {
        reference_band: a.reference.clone(),
        max_shift: a.max_shift,
        ..PipelineConfig::default()
    };
    let (reg, table) = match &a.table {
        Some(p) => {
            run.inputs.push(p.clone());
            let t: ShiftTable = read_json(p)?;
            (apply_shift_table(&g, &t).context("applying shift table")?, t)
        }
        None => pipeline::register(&g, &cfg).context("registering")?,
    };
    write_granule(&reg.granule, &a.out).context("writing registered granule")?;
    let table_path = a.out.join("shifts.json");
    write_text(&table_path, &(table.to_json() + "\n"))?;
    run.inputs.push(a.granule.clone());
    run.outputs.push(a.out.join("meta.json"));
    for b in reg.granule.band_ids() {
        run.outputs.push(a.out.join(format!("{b}.tif")));
    }
    run.outputs.push(table_path);
    run.config = json!({"reference": a.reference, "max_shift": a.max_shift, "table": a.table});
    run.manifest = Some(a.out.join("manifest.json"));
    eprintln!("registered {} bands of {}", reg.granule.bands().len(), g.id);
    Ok(())
}

#[derive(Serialize)]
struct LabelOutput {
    granule: String,
    margin: usize,
    bands: BTreeMap<String, Vec<[f64; 4]>>,
}

fn cmd_label(a: &LabelArgs, run: &mut Run) -> CliResult<()> {
    let g = load_granule(&a.granule).context("loading granule")?;
    let doc = read_aiscoco(&a.boxes)?;
    let coarse = image_boxes(&doc, &g.id)?;
    let refined = refine_annotations(&g, &coarse, a.margin);
    let out = LabelOutput {
        granule: g.id.clone(),
        margin: a.margin,
        bands: refined
            .into_iter()
            .map(|(k, v)| (k, v.iter().map(BBox::to_xywh).collect()))
            .collect(),
    };
    write_text(&a.out, &(serde_json::to_string_pretty(&out).expect("serializes") + "\n"))?;
    run.inputs.extend([a.granule.clone(), a.boxes.clone()]);
    run.outputs.push(a.out.clone());
    run.config = json!({"margin": a.margin});
    eprintln!("refined {} boxes in {} bands", coarse.len(), out.bands.len());
    Ok(())
}

fn pipeline_config(path: Option<&PathBuf>, run: &mut Run) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => {
            run.inputs.push(p.clone());
            read_json(p)
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn cmd_detect(a: &DetectArgs, run: &mut Run) -> CliResult<()> {
    let mut cfg = pipeline_config(a.config.as_ref(), run)?;
    if let Some(r) = &a.reference {
        cfg.reference_band = r.clone();
    }
    if let Some(m) = a.max_shift {
        cfg.max_shift = m;
    }
    cfg.detect.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let dirs = granule_dirs(&a.inputs)?;
    let granules = load_all(&dirs)?;
    use rayon::prelude::*;
    let dets: Vec<_> = granules
        .par_iter()
        .map(|g| pipeline::detect_granule(g, &cfg).with_context(|| format!("detecting on {}", g.id)))
        .collect::<anyhow::Result<_>>()?;
    let doc = pipeline::detections_doc(&granules, &dets);
    write_aiscoco(&doc, &a.out)?;
    run.inputs.extend(dirs);
    run.outputs.push(a.out.clone());
    run.config = serde_json::to_value(&cfg).expect("config serializes");
    eprintln!("{} detections in {} granules", doc.annotations.len(), granules.len());
    Ok(())
}

fn cmd_match(a: &MatchArgs, run: &mut Run) -> CliResult<()> {
    let cfg: MatchConfig = match &a.config {
        Some(p) => {
            run.inputs.push(p.clone());
            read_json(p)?
        }
        None => MatchConfig::default(),
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let doc = read_aiscoco(&a.pred)?;
    let mut images: Vec<_> = doc.images.iter().collect();
    images.sort_by_key(|i| i.id);
    let fps = images
        .iter()
        .map(|img| {
            let dir = a.root.join(&img.file_name);
            let meta = MetaFile::read(&dir).with_context(|| format!("reading {}", dir.display()))?;
            run.inputs.push(dir.join("meta.json"));
            let fp = Footprint::new(meta.sensing_time, meta.geotransform, img.width as usize, img.height as usize);
            Ok((img.file_name.clone(), fp))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let parsed = read_ais_csv(&a.ais)?;
    if !parsed.rejects.is_empty() {
        eprintln!("{} AIS rows rejected (first: line {}: {})", parsed.rejects.len(), parsed.rejects[0].line, parsed.rejects[0].reason);
    }
    let mode: MatchMode = a.mode.into();
    let (merged, report) = pipeline::match_doc(&doc, &fps, &parsed.records, &cfg, mode)?;
    write_aiscoco(&merged, &a.out)?;
    let log = a.log.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("matched");
        a.out.with_file_name(format!("{stem}.decisions.jsonl"))
    });
    let mut buf = Vec::new();
    write_decision_log(&mut buf, &report.decisions)?;
    write_text(&log, std::str::from_utf8(&buf).expect("json is utf-8"))?;
    run.inputs.extend([a.pred.clone(), a.ais.clone()]);
    run.outputs.extend([a.out.clone(), log]);
    run.config = json!({"matching": cfg, "mode": mode, "ais_rejects": parsed.rejects.len()});
    eprintln!(
        "{} of {} boxes matched, {} skipped as duplicates",
        report.accepted().count(),
        report.decisions.len(),
        report
            .decisions
            .iter()
            .filter(|d| d.status == crate::ais::DecisionStatus::SkippedDuplicate)
            .count()
    );
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, run: &mut Run) -> CliResult<()> {
    if !(a.siou_thresh > 0.0 && a.siou_thresh < 1.0) {
        return usage(format!("--siou-thresh must lie in (0, 1), got {}", a.siou_thresh));
    }
    let params = SIoUParams::new(a.gamma, a.kappa).map_err(|e| CliError::Usage(e.to_string()))?;
    let pred = read_aiscoco(&a.pred)?;
    let truth = read_aiscoco(&a.truth)?;
    let rep = pipeline::evaluate_docs(&pred, &truth, a.siou_thresh, &params)?;
    let text = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
    match &a.out {
        Some(p) => {
            write_text(p, &text)?;
            run.outputs.push(p.clone());
            println!(
                "precision {:.4} recall {:.4} f1 {:.4} at SIoU {:.2}",
                rep.precision, rep.recall, rep.f1, rep.threshold
            );
        }
        None => {
            print!("{text}");
            run.manifest = Some(manifest_for(&a.pred).with_file_name("evaluate.manifest.json"));
        }
    }
    run.inputs.extend([a.pred.clone(), a.truth.clone()]);
    run.config = json!({"siou_threshold": a.siou_thresh, "gamma": a.gamma, "kappa": a.kappa});
    Ok(())
}

/// Per-band boxes from either a `label` output or an AISCOCO file.
fn load_band_boxes(path: &Path, granule: &str) -> anyhow::Result<BTreeMap<String, Vec<BBox>>> {
    let v: Value = read_json(path)?;
    if let Some(bands) = v.get("bands").and_then(Value::as_object) {
        let mut out = BTreeMap::new();
        for (k, list) in bands {
            let boxes: Vec<[f64; 4]> = serde_json::from_value(list.clone()).with_context(|| format!("bands.{k}"))?;
            out.insert(k.clone(), boxes.into_iter().map(BBox::from_xywh).collect());
        }
        return Ok(out);
    }
    let doc = read_aiscoco(path)?;
    Ok(BTreeMap::from([("*".to_string(), image_boxes(&doc, granule)?)]))
}

fn cmd_band_report(a: &BandReportArgs, run: &mut Run) -> CliResult<()> {
    let g = load_granule(&a.granule).context("loading granule")?;
    let boxes = load_band_boxes(&a.boxes, &g.id)?;
    let cfg = PipelineConfig {
        reference_band: a.reference.clone(),
        max_shift: a.max_shift,
        ..PipelineConfig::default()
    };
    let (reg, _) = pipeline::register(&g, &cfg).context("registering")?;
    // pixels valid in every band
    let n = g.width() * g.height();
    let valid: Vec<bool> = (0..n).map(|i| reg.valid.values().all(|m| m[i])).collect();
    let stats_cfg = StatsConfig {
        sea_sample: a.sea_sample,
        seed: a.seed,
        ..StatsConfig::default()
    };
    let stats = band_stats(&reg.granule, &boxes, Some(&valid), &stats_cfg)?;
    let common = boxes
        .get(&a.reference)
        .or_else(|| boxes.get("*"))
        .or_else(|| boxes.values().next())
        .cloned()
        .unwrap_or_default();
    let pcc = dissimilarity(&reg.granule, &common, DissimMetric::Pcc).ok();
    let ed = dissimilarity(&reg.granule, &common, DissimMetric::Ed).ok();
    let metrics = pipeline::band_metrics(&reg, &common, &cfg)?;
    let report = band_report(stats, pcc, ed, metrics);
    let written = write_band_report(&report, &a.out)?;
    run.inputs.extend([a.granule.clone(), a.boxes.clone()]);
    run.outputs.extend(written);
    run.seed = Some(a.seed);
    run.config = json!({"sea_sample": a.sea_sample, "reference": a.reference, "max_shift": a.max_shift});
    run.manifest = Some(a.out.join("manifest.json"));
    Ok(())
}

fn cmd_degrade(a: &DegradeArgs, run: &mut Run) -> CliResult<()> {
    if a.mtf.iter().any(|m| !(*m > 0.0 && *m < 1.0)) {
        return usage("--mtf values must lie in (0, 1)");
    }
    if a.snr.iter().any(|s| !(*s > 0.0)) {
        return usage("--snr values must be positive");
    }
    let cfg = pipeline_config(a.config.as_ref(), run)?;
    let dirs = granule_dirs(&a.inputs)?;
    let granules = load_all(&dirs)?;
    let truth = read_aiscoco(&a.truth)?;
    let truth_boxes: Vec<Vec<BBox>> = granules
        .iter()
        .map(|g| image_boxes(&truth, &g.id))
        .collect::<anyhow::Result<_>>()?;
    let source = match a.source_mtf {
        Some(m) => MtfSpec::new(m).map_err(|e| CliError::Usage(e.to_string()))?,
        None => MtfSpec::for_sensor(granules[0].meta.sensor),
    };
    let sweep = degradation_sweep(&granules, &source, &a.mtf, &a.snr, a.seed, |gi, g| {
        pipeline::detect_counts(g, &truth_boxes[gi], &cfg).map_err(|e| e.to_string())
    })?;
    write_sweep(&sweep, &a.out)?;
    for c in &sweep.cells {
        println!(
            "mtf {:.3} snr {} precision {:.4} recall {:.4} f1 {:.4}",
            c.m,
            c.snr.map_or("inf".to_string(), |s| format!("{s}")),
            c.precision,
            c.recall,
            c.f1
        );
    }
    run.inputs.extend(dirs);
    run.inputs.push(a.truth.clone());
    let mut outs = Vec::new();
    files_under(&a.out, &mut outs).context("listing outputs")?;
    run.outputs.extend(outs.into_iter().filter(|p| p.file_name().map_or(true, |n| n != "manifest.json")));
    run.seed = Some(a.seed);
    run.config = json!({"mtf": a.mtf, "snr": a.snr, "source_mtf": source.m_nyquist, "pipeline": cfg});
    run.manifest = Some(a.out.join("manifest.json"));
    Ok(())
}

fn cmd_serve(a: &ServeArgs, run: &mut Run) -> CliResult<()> {
    let mut cfg = ServeConfig::new(&a.annotations, &a.root).with_store_override(std::env::var(STORE_ENV).ok());
    cfg.ais = a.ais.clone();
    cfg.mode = a.mode.into();
    cfg.static_dir = a.static_dir.clone();
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
    run.config = json!({"annotations": cfg.annotations, "root": a.root, "port": a.port});
    run.inputs.push(cfg.annotations.clone());
    run.manifest = Some(crate::review::StorePaths::for_annotations(&cfg.annotations).lock.with_extension("serve.manifest.json"));
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    eprintln!("serving on http://{addr}");
    rt.block_on(crate::server::serve(cfg, addr))
        .map_err(|e| CliError::Domain(e.into()))
}

fn cmd_synth(a: &SynthArgs, run: &mut Run) -> CliResult<()> {
    let cfg: SynthConfig = match &a.config {
        Some(p) => {
            run.inputs.push(p.clone());
            read_json(p)?
        }
        None => SynthConfig::default(),
    };
    if cfg.vessels.0 > cfg.vessels.1 || cfg.bands.is_empty() || !cfg.bands.contains(&cfg.reference_band) {
        return usage("synth config: vessels range empty or reference band missing from bands");
    }
    let scenes = synth_dataset(a.seed, a.count, &cfg);
    write_dataset(&scenes, &a.out)?;
    let mut outs = Vec::new();
    files_under(&a.out, &mut outs).context("listing outputs")?;
    run.outputs.extend(outs.into_iter().filter(|p| p.file_name().map_or(true, |n| n != "manifest.json")));
    run.seed = Some(a.seed);
    run.config = serde_json::to_value(&cfg).expect("config serializes");
    run.manifest = Some(a.out.join("manifest.json"));
    eprintln!(
        "{} granules, {} vessels",
        scenes.len(),
        scenes.iter().map(|s| s.vessels.len()).sum::<usize>()
    );
    Ok(())
}

fn dispatch(cli: &Cli, args: &[String]) -> CliResult<()> {
    let (name, out) = match &cli.command {
        Command::Register(a) => ("register", Some(a.out.clone())),
        Command::Label(a) => ("label", Some(a.out.clone())),
        Command::Detect(a) => ("detect", Some(a.out.clone())),
        Command::MatchAis(a) => ("match-ais", Some(a.out.clone())),
        Command::Evaluate(a) => ("evaluate", a.out.clone()),
        Command::BandReport(a) => ("band-report", Some(a.out.clone())),
        Command::Degrade(a) => ("degrade", Some(a.out.clone())),
        Command::Serve(_) => ("serve", None),
        Command::Synth(a) => ("synth", Some(a.out.clone())),
    };
    let mut run = Run::new(name, args);
    match &cli.command {
        Command::Register(a) => cmd_register(a, &mut run)?,
        Command::Label(a) => cmd_label(a, &mut run)?,
        Command::Detect(a) => cmd_detect(a, &mut run)?,
        Command::MatchAis(a) => cmd_match(a, &mut run)?,
        Command::Evaluate(a) => cmd_evaluate(a, &mut run)?,
        Command::BandReport(a) => cmd_band_report(a, &mut run)?,
        Command::Degrade(a) => cmd_degrade(a, &mut run)?,
        Command::Serve(a) => cmd_serve(a, &mut run)?,
        Command::Synth(a) => cmd_synth(a, &mut run)?,
    }
    let path = cli
        .manifest
        .clone()
        .or_else(|| run.manifest.clone())
        .or_else(|| out.as_deref().map(manifest_for));
    if let Some(p) = path {
        run.write(&p)?;
    }
    Ok(())
}

fn report_error(json_errors: bool, code: i32, kind: &str, message: &str, err: &mut dyn Write) {
    if json_errors {
        let v = json!({"error": {"code": code, "kind": kind, "message": message}});
        let _ = writeln!(err, "{v}");
    } else {
        let _ = writeln!(err, "error: {message}");
    }
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let json_errors = argv.iter().any(|a| a == "--json-errors");
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let mut stderr = std::io::stderr();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            if json_errors {
                report_error(true, 2, "usage", e.to_string().trim(), &mut stderr);
            } else {
                let _ = e.print();
            }
            return 2;
        }
    };
    match dispatch(&cli, &args) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            report_error(json_errors, 2, "usage", &m, &mut stderr);
            2
        }
        Err(CliError::Domain(e)) => {
            report_error(json_errors, 1, "domain", &error_message(&e), &mut stderr);
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_codes() {
        assert_eq!(run(["rawsea", "frobnicate"]), 2);
        assert_eq!(run(["rawsea"]), 2);
        assert_eq!(run(["rawsea", "evaluate", "--pred", "a.json"]), 2);
        assert_eq!(run(["rawsea", "--help"]), 0);
    }

    #[test]
    fn missing_input_is_domain_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nope.json");
        let code = run([
            "rawsea",
            "--json-errors",
            "evaluate",
            "--pred",
            p.to_str().unwrap(),
            "--truth",
            p.to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn threshold_out_of_range_is_usage() {
        assert_eq!(
            run(["rawsea", "evaluate", "--pred", "a", "--truth", "b", "--siou-thresh", "1.5"]),
            2
        );
    }

    #[test]
    fn manifest_default_location() {
        assert_eq!(manifest_for(Path::new("out/pred.json")), PathBuf::from("out/pred.manifest.json"));
    }
}
