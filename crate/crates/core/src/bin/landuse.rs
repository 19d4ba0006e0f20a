// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use landuse_coding::experiments::{
    self, cmd_ablation, cmd_mismatch, cmd_tamper, cmd_upper_bound, land_use_map, ExperimentConfig, Pipeline,
    RunManifest, TrainedModel,
};
use landuse_coding::heatmap::{scene_heatmap, write_pgm};
use landuse_coding::metrics::{ap_sweep, DetectionSet};
use landuse_coding::rnn::grad_check_all;
use landuse_coding::scene::{read_scenes, rebalance, split_dataset, write_scenes};
use landuse_coding::synth::{generate, perturb, NoiseModel, SynthConfig};
use landuse_coding::{
    Architecture, CellKind, Checkpoint, EncoderConfig, EncoderKind, ModelConfig, SceneRecord, Taxonomy, TrainConfig,
};

/// Land-use classification from building detections.
#[derive(Debug, Parser)]
#[command(name = "landuse", version)]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Where to write the run manifest (default: `<output>.manifest.json`).
    #[arg(long, global = true)]
    manifest_out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Generate labeled synthetic scenes.
    Synth(SynthArgs),
    /// Simulate detector output from ground-truth scenes.
    Perturb(PerturbArgs),
    /// Stratified train/val/test split.
    Split(SplitArgs),
    /// Write encoded scene sequences.
    Encode(EncodeArgs),
    /// Train a classifier and save a checkpoint.
    Train(TrainArgs),
    /// Classification metrics for a checkpoint, or detection AP.
    Eval(EvalArgs),
    /// Compare analytic and numeric gradients for every cell and architecture.
    Gradcheck(GradcheckArgs),
    /// Encoder x cell x architecture grid.
    Ablation(AblationArgs),
    /// Train/test on ground truth vs simulated detections.
    Mismatch(NoisyArgs),
    /// Perfect-detector upper bound vs simulated detections.
    Upper(NoisyArgs),
    /// Relabel top-scoring boxes step by step and log predictions.
    Tamper(TamperArgs),
    /// GeoJSON land-use map of geo-tagged scenes.
    Map(MapArgs),
    /// Per-scene detection heatmaps as PGM images.
    Heatmap(HeatmapArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    per_category: usize,
    /// JSON scene-template configuration (default: built-in templates).
    #[arg(long)]
    template: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct NoiseArgs {
    #[arg(long, default_value_t = 0.15)]
    mislabel_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    drop_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    jitter: f64,
    /// Noise seed (default: --seed).
    #[arg(long)]
    noise_seed: Option<u64>,
}

impl NoiseArgs {
    fn model(&self) -> NoiseModel {
        NoiseModel { jitter_scale: self.jitter, ..NoiseModel::with_rates(self.mislabel_rate, self.drop_rate) }
    }
}

#[derive(Debug, Args, Serialize)]
struct PerturbArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Receives train.jsonl, val.jsonl and test.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    test_frac: f64,
    /// Fraction of the non-test scenes held out for validation.
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
}

#[derive(Debug, Args, Serialize)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = EncoderKind::Layout)]
    encoder: EncoderKind,
    #[arg(long, default_value_t = 25)]
    length: usize,
    /// Reverse sequences as fed to the unidirectional model.
    #[arg(long)]
    reverse: bool,
}

#[derive(Debug, Args, Serialize)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = EncoderKind::Layout)]
    encoder: EncoderKind,
    #[arg(long, value_enum, default_value_t = CellKind::Simple)]
    cell: CellKind,
    #[arg(long, value_enum, default_value_t = Architecture::UniLastConcat)]
    arch: Architecture,
    #[arg(long, default_value_t = 25)]
    length: usize,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
}

impl ModelArgs {
    fn pipeline(&self) -> Pipeline {
        Pipeline::new(
            self.encoder,
            EncoderConfig::with_length(self.length),
            ModelConfig::new(self.cell, self.arch, self.length).with_hidden(self.hidden),
        )
    }
}

#[derive(Debug, Args, Serialize)]
struct OptimArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    decay_every: usize,
    #[arg(long, default_value_t = 0.1)]
    decay_factor: f64,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    patience: Option<usize>,
}

impl OptimArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            decay_factor: self.decay_factor,
            decay_every: self.decay_every,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            patience: self.patience,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Oversample a land use, e.g. `public=1.5` (repeatable).
    #[arg(long, value_parser = parse_factor)]
    oversample: Vec<(usize, f64)>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
}

fn parse_factor(s: &str) -> Result<(usize, f64), String> {
    let (name, f) = s.split_once('=').ok_or("expected <landuse>=<factor>")?;
    let c = Taxonomy::landuse_index(name).map_err(|e| e.to_string())?;
    Ok((c, f.parse().map_err(|e| format!("bad factor `{f}`: {e}"))?))
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    /// Classification mode: trained checkpoint.
    #[arg(long, requires = "input", conflicts_with_all = ["detections", "ground_truth"])]
    checkpoint: Option<PathBuf>,
    /// Labeled scenes to classify.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Confusion matrix CSV (classification mode).
    #[arg(long)]
    confusion_out: Option<PathBuf>,
    /// Detection mode: detector output scenes.
    #[arg(long, requires = "ground_truth")]
    detections: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Metrics CSV (classification) or AP table (detection).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 5)]
    length: usize,
    #[arg(long, default_value_t = 8)]
    hidden: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Fail when any relative error reaches this value.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct DataArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct AblationArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = EncoderKind::ALL)]
    encoders: Vec<EncoderKind>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = CellKind::ALL)]
    cells: Vec<CellKind>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = Architecture::ALL)]
    archs: Vec<Architecture>,
    #[arg(long, default_value_t = 25)]
    length: usize,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Debug, Args, Serialize)]
struct NoisyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args, Serialize)]
struct TamperArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Per-step prediction log.
    #[arg(long)]
    out: PathBuf,
    /// Per-scene flip summary (default: `<out>` with `.summary.csv`).
    #[arg(long)]
    summary_out: Option<PathBuf>,
    /// Tamper depth (default: every box).
    #[arg(long)]
    k: Option<usize>,
    /// Only scenes labeled with this land use.
    #[arg(long)]
    landuse: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct MapArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct HeatmapArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Only this scene.
    #[arg(long)]
    scene_id: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

/// Files a command read and wrote; the first output names the manifest.
#[derive(Default)]
struct Touched {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Touched {
    fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }
    fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }
}

fn load(path: &Path, touched: &mut Touched) -> anyhow::Result<Vec<SceneRecord>> {
    touched.input(path);
    let outcome = read_scenes(path).with_context(|| format!("reading {}", path.display()))?;
    for e in &outcome.errors {
        eprintln!("warning: {}: {e}", path.display());
    }
    if !outcome.errors.is_empty() {
        eprintln!("warning: {}: skipped {} invalid line(s)", path.display(), outcome.errors.len());
    }
    Ok(outcome.records)
}

fn load_model(path: &Path, touched: &mut Touched) -> anyhow::Result<TrainedModel> {
    touched.input(path);
    let ck = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok(TrainedModel::from_checkpoint(ck)?)
}

fn create(path: &Path, touched: &mut Touched) -> anyhow::Result<BufWriter<File>> {
    touched.output(path);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name_for(scene_id: &str) -> String {
    scene_id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

fn execute(cli: &Cli, touched: &mut Touched) -> anyhow::Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Synth(a) => {
            let cfg = match &a.template {
                Some(p) => {
                    touched.input(p);
                    SynthConfig::load(p)?
                }
                None => SynthConfig::default(),
            };
            let records = generate(&cfg, a.per_category, seed)?;
            touched.output(&a.out);
            write_scenes(&a.out, &records)?;
            eprintln!("wrote {} scenes to {}", records.len(), a.out.display());
        }
        Command::Perturb(a) => {
            let records = load(&a.input, touched)?;
            let out = perturb(&records, &a.noise.model(), a.noise.noise_seed.unwrap_or(seed))?;
            touched.output(&a.out);
            write_scenes(&a.out, &out)?;
        }
        Command::Split(a) => {
            let records = load(&a.input, touched)?;
            let split = split_dataset(&records, seed, a.test_frac, a.val_frac)?;
            fs::create_dir_all(&a.out_dir)?;
            for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
                let p = a.out_dir.join(format!("{name}.jsonl"));
                touched.output(&p);
                write_scenes(&p, part)?;
                eprintln!("{name}: {} scenes", part.len());
            }
        }
        Command::Encode(a) => {
            let records = load(&a.input, touched)?;
            let mut w = create(&a.out, touched)?;
            landuse_coding::encoder::write_metadata(
                &records,
                a.encoder,
                &EncoderConfig::with_length(a.length),
                a.reverse,
                &mut w,
            )?;
            w.flush()?;
        }
        Command::Train(a) => {
            let mut train = load(&a.train, touched)?;
            if !a.oversample.is_empty() {
                let factors: BTreeMap<usize, f64> = a.oversample.iter().copied().collect();
                train = rebalance(&train, &factors, seed)?;
            }
            let val = match &a.val {
                Some(p) => load(p, touched)?,
                None => Vec::new(),
            };
            let model = experiments::fit(&a.model.pipeline(), &train, &val, &a.optim.config(seed))?;
            if let Some(best) = model.checkpoint.history.get(model.checkpoint.best_epoch) {
                eprintln!(
                    "best epoch {}: train loss {:.4}, val M-F1 {}",
                    best.epoch,
                    best.train_loss,
                    best.val_macro_f1.map(|f| format!("{f:.4}")).unwrap_or_else(|| "-".into())
                );
            }
            touched.output(&a.out);
            model.checkpoint.save(&a.out)?;
        }
        Command::Eval(a) => {
            if let Some(ck) = &a.checkpoint {
                let model = load_model(ck, touched)?;
                let input = a.input.as_ref().expect("clap requires --input");
                let records = load(input, touched)?;
                let (cm, mm) = model.evaluate(&records)?;
                eprintln!("M-P {:.4}  M-R {:.4}  M-F1 {:.4}", mm.precision, mm.recall, mm.f1);
                let mut w = create(&a.out, touched)?;
                experiments::write_metrics_csv(&mm, &mut w)?;
                w.flush()?;
                if let Some(p) = &a.confusion_out {
                    let mut w = create(p, touched)?;
                    experiments::write_confusion_csv(&cm, &mut w)?;
                    w.flush()?;
                }
            } else if let (Some(d), Some(g)) = (&a.detections, &a.ground_truth) {
                let dets = load(d, touched)?;
                let gts = load(g, touched)?;
                let sweep = ap_sweep(&DetectionSet::from_records(&dets, &gts)?);
                eprintln!("AP@.50:.95 {:.4}", sweep.mean_50_95);
                let mut w = create(&a.out, touched)?;
                experiments::write_ap_csv(&sweep, &mut w)?;
                w.flush()?;
            } else {
                bail!("eval needs --checkpoint/--input or --detections/--ground-truth");
            }
        }
        Command::Gradcheck(a) => {
            let reports = grad_check_all(a.length, a.hidden, seed, a.eps)?;
            let mut out: Box<dyn Write> = match &a.out {
                Some(p) => Box::new(create(p, touched)?),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut csv = csv::Writer::from_writer(&mut out);
            csv.write_record(["cell", "architecture", "params", "max_rel_error", "worst_block", "worst_index"])?;
            for r in &reports {
                csv.write_record([
                    r.cell.name().to_string(),
                    r.architecture.name().to_string(),
                    r.num_params.to_string(),
                    r.max_rel_error.to_string(),
                    r.worst_block.clone(),
                    r.worst_index.to_string(),
                ])?;
            }
            csv.flush()?;
            drop(csv);
            out.flush()?;
            if let Some(bad) = reports.iter().find(|r| !(r.max_rel_error < a.tolerance)) {
                bail!(
                    "{}/{}: relative error {:e} exceeds {:e}",
                    bad.cell,
                    bad.architecture.name(),
                    bad.max_rel_error,
                    a.tolerance
                );
            }
        }
        Command::Ablation(a) => {
            let train = load(&a.data.train, touched)?;
            let val = load(&a.data.val, touched)?;
            let test = load(&a.data.test, touched)?;
            let mut grid = Vec::new();
            for &e in &a.encoders {
                for &c in &a.cells {
                    for &r in &a.archs {
                        grid.push((e, c, r));
                    }
                }
            }
            let cfg = ExperimentConfig {
                encoder_config: EncoderConfig::with_length(a.length),
                hidden_size: a.hidden,
                train: a.optim.config(seed),
                repeats: a.repeats,
            };
            let rows = cmd_ablation(&train, &val, &test, &grid, &cfg);
            for r in &rows {
                match (&r.summary, &r.failure) {
                    (Some(s), _) => eprintln!(
                        "{:<6} {:<4} {:<3} M-F1 {:.4}",
                        r.encoder.name(),
                        r.cell.name(),
                        r.architecture.name(),
                        s.f1
                    ),
                    (None, Some(e)) => eprintln!(
                        "{:<6} {:<4} {:<3} failed: {e}",
                        r.encoder.name(),
                        r.cell.name(),
                        r.architecture.name()
                    ),
                    _ => {}
                }
            }
            let mut w = create(&a.out, touched)?;
            experiments::write_ablation_csv(&rows, &mut w)?;
            w.flush()?;
        }
        Command::Mismatch(a) | Command::Upper(a) => {
            let train = load(&a.data.train, touched)?;
            let val = load(&a.data.val, touched)?;
            let test = load(&a.data.test, touched)?;
            let cfg = ExperimentConfig {
                encoder_config: EncoderConfig::with_length(a.model.length),
                hidden_size: a.model.hidden,
                train: a.optim.config(seed),
                repeats: a.repeats,
            };
            let noise = a.noise.model();
            let noise_seed = a.noise.noise_seed.unwrap_or(seed);
            let pipeline = a.model.pipeline();
            let mut w = create(&a.out, touched)?;
            if matches!(cli.command, Command::Mismatch(_)) {
                let report = cmd_mismatch(&train, &val, &test, &noise, noise_seed, &pipeline, &cfg)?;
                for c in &report.cells {
                    eprintln!("train {:<9} test {:<9} M-F1 {:.4}", c.train_on, c.test_on, c.summary.f1);
                }
                if !report.direction_holds {
                    eprintln!("note: training on simulated detections did not help on simulated test data");
                }
                experiments::write_mismatch_csv(&report, &mut w)?;
            } else {
                let report = cmd_upper_bound(&train, &val, &test, &noise, noise_seed, &pipeline, &cfg)?;
                for r in &report.rows {
                    eprintln!("{:<5} M-F1 {:.4}", r.name, r.f1);
                }
                experiments::write_upper_csv(&report, &mut w)?;
            }
            w.flush()?;
        }
        Command::Tamper(a) => {
            let model = load_model(&a.checkpoint, touched)?;
            let mut scenes = load(&a.input, touched)?;
            if let Some(name) = &a.landuse {
                let l = Taxonomy::landuse_index(name)?;
                scenes.retain(|r| r.landuse == Some(l));
            }
            let results = cmd_tamper(&model, &scenes, a.k)?;
            for r in results.iter().filter(|r| r.clamped_from.is_some()) {
                eprintln!(
                    "warning: scene {}: depth {} clamped to {} boxes",
                    r.scene_id,
                    r.clamped_from.unwrap_or_default(),
                    r.steps.len() - 1
                );
            }
            let flipped = results.iter().filter(|r| r.flip_step.is_some()).count();
            eprintln!("{flipped}/{} scenes changed prediction", results.len());
            let mut w = create(&a.out, touched)?;
            experiments::write_tamper_csv(&results, &mut w)?;
            w.flush()?;
            let summary = a.summary_out.clone().unwrap_or_else(|| a.out.with_extension("summary.csv"));
            let mut w = create(&summary, touched)?;
            experiments::write_tamper_summary_csv(&results, &mut w)?;
            w.flush()?;
        }
        Command::Map(a) => {
            let model = load_model(&a.checkpoint, touched)?;
            let scenes = load(&a.input, touched)?;
            let map = land_use_map(&model, &scenes)?;
            if map.skipped > 0 {
                eprintln!("skipped {} scene(s) without geo-tags", map.skipped);
            }
            let mut w = create(&a.out, touched)?;
            serde_json::to_writer_pretty(&mut w, &map.document)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Command::Heatmap(a) => {
            let scenes = load(&a.input, touched)?;
            fs::create_dir_all(&a.out_dir)?;
            let mut written = 0;
            for rec in scenes.iter().filter(|r| a.scene_id.as_ref().is_none_or(|id| *id == r.scene_id)) {
                let field = scene_heatmap::<f64>(rec)?;
                let p = a.out_dir.join(format!("{}.pgm", file_name_for(&rec.scene_id)));
                touched.output(&p);
                write_pgm(&field, &p)?;
                written += 1;
            }
            if written == 0 {
                bail!("no matching scenes");
            }
        }
        Command::Replay(_) => unreachable!("handled before dispatch"),
    }
    Ok(())
}

fn primary_output(cli: &Cli) -> Option<PathBuf> {
    Some(match &cli.command {
        Command::Synth(a) => a.out.clone(),
        Command::Perturb(a) => a.out.clone(),
        Command::Split(a) => a.out_dir.join("split"),
        Command::Encode(a) => a.out.clone(),
        Command::Train(a) => a.out.clone(),
        Command::Eval(a) => a.out.clone(),
        Command::Gradcheck(a) => a.out.clone()?,
        Command::Ablation(a) => a.out.clone(),
        Command::Mismatch(a) | Command::Upper(a) => a.out.clone(),
        Command::Tamper(a) => a.out.clone(),
        Command::Map(a) => a.out.clone(),
        Command::Heatmap(a) => a.out_dir.join("heatmap"),
        Command::Replay(_) => return None,
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Synth(_) => "synth",
        Command::Perturb(_) => "perturb",
        Command::Split(_) => "split",
        Command::Encode(_) => "encode",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Gradcheck(_) => "gradcheck",
        Command::Ablation(_) => "ablation",
        Command::Mismatch(_) => "mismatch",
        Command::Upper(_) => "upper",
        Command::Tamper(_) => "tamper",
        Command::Map(_) => "map",
        Command::Heatmap(_) => "heatmap",
        Command::Replay(_) => "replay",
    }
}

fn run(args: Vec<String>) -> anyhow::Result<()> {
    let cli = Cli::try_parse_from(std::iter::once("landuse".to_string()).chain(args.iter().cloned()))
        .unwrap_or_else(|e| e.exit());
    if let Command::Replay(r) = &cli.command {
        let manifest = RunManifest::load(&r.manifest)?;
        if manifest.command == "replay" {
            bail!("manifest records a replay");
        }
        eprintln!("replaying `{}` from {}", manifest.command, r.manifest.display());
        if let Some(dir) = &manifest.working_dir {
            std::env::set_current_dir(dir).with_context(|| format!("entering {dir}"))?;
        }
        return run(manifest.args);
    }
    let clock = RunManifest::start();
    let mut touched = Touched::default();
    execute(&cli, &mut touched)?;
    let manifest_path =
        cli.manifest_out.clone().or_else(|| primary_output(&cli).map(|p| with_suffix(&p, ".manifest.json")));
    if let Some(path) = manifest_path {
        let manifest = RunManifest::finish(
            clock,
            command_name(&cli.command),
            args,
            cli.seed,
            serde_json::to_value(&cli.command)?,
            touched.inputs,
            touched.outputs,
        );
        manifest.save(&path).with_context(|| format!("writing manifest {}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(std::env::args().skip(1).collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
