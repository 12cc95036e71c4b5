//! Command-line front end: synthesize recordings, reduce them to dynamic
//! range-angle image sequences, augment, segment, train, evaluate, stream,
//! and benchmark, all from config-driven parameters.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmgesture_core::augment::{augment_batch, extract_trajectory_profile, DraiSequence};
use mmgesture_core::dtw::DtwTemplate;
use mmgesture_core::error::{Error, Result};
use mmgesture_core::eval::{compute_cra_mpr, match_events, GestureBurst, PredictionRecord};
use mmgesture_core::io::{
    load_config, load_cubes, load_dataset, load_drai_sequence, load_model, load_policy,
    read_jsonl, save_cubes, save_drai_sequence, save_model, write_jsonl, AppConfig, SegmentEvent,
};
use mmgesture_core::model::train::{accuracy, confusion_matrix, train, TrainParams};
use mmgesture_core::model::{Model, ModelConfig};
use mmgesture_core::pipeline::process_cube;
use mmgesture_core::segment::segment_stream;
use mmgesture_core::stream::{
    bench_pipeline, plan_stream, run_stream, StreamClassifier, StreamSetup, StreamSpec,
};
use mmgesture_core::synth::{synthesize_script, GestureKind, GestureScript, Scatterer};

#[derive(Parser)]
#[command(
    name = "mmgesture",
    about = "Hardware-free mmWave gesture sensing laboratory",
    version
)]
struct Cli {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed for synthesis, augmentation, and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize raw recordings from gesture scripts.
    Synth(SynthArgs),
    /// Reduce a raw recording to a dynamic range-angle image sequence.
    Process(ProcessArgs),
    /// Expand labeled sequences with randomized transform variants.
    Augment(AugmentArgs),
    /// Detect gesture windows in a recorded image sequence.
    Segment(SegmentArgs),
    /// Train the classifier on a manifest dataset.
    Train(TrainArgs),
    /// Score a model on a dataset, or score predictions against truth.
    Eval(EvalArgs),
    /// Run the full pipeline over a continuous stream.
    Stream(StreamArgs),
    /// Measure per-stage processing latency.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Gesture code: PH, PL, LS, RS, CT, AT, NG.
    #[arg(long, conflicts_with = "script")]
    gesture: Option<String>,

    /// Recordings to synthesize per invocation.
    #[arg(long, default_value_t = 1)]
    count: u32,

    /// Hand rest distance from the sensor, m.
    #[arg(long, default_value_t = 0.8)]
    distance: f64,

    /// Hand rest azimuth, degrees.
    #[arg(long, default_value_t = 0.0)]
    angle_deg: f64,

    /// Speed multiplier for the scripted motion.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,

    /// Script length, s.
    #[arg(long, default_value_t = 1.0)]
    duration: f64,

    /// Receiver SNR in dB; omit for noise-free synthesis.
    #[arg(long)]
    snr_db: Option<f64>,

    /// Add a static torso reflector 0.2 m behind the hand.
    #[arg(long)]
    torso: bool,

    /// Stream spec (JSON): scripts, gaps, clutter. Produces one
    /// continuous recording plus its ground-truth bursts.
    #[arg(long)]
    script: Option<PathBuf>,
}

#[derive(Args)]
struct ProcessArgs {
    /// Raw recording to reduce.
    #[arg(long)]
    input: PathBuf,

    /// Gesture code to stamp on the output sequence.
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct AugmentArgs {
    /// Labeled input sequences.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,

    /// Policy file (JSON or TOML); defaults to the config's policy.
    #[arg(long)]
    policy: Option<PathBuf>,

    /// Variants per input; overrides the policy value.
    #[arg(long)]
    factor: Option<u32>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Continuous image sequence to segment.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,

    /// Train the compact model variant instead of the full one.
    #[arg(long)]
    lite: bool,

    /// Augment the dataset by this factor before training
    /// (doubles the epoch budget, mirroring the augmented recipe).
    #[arg(long)]
    augment_factor: Option<u32>,

    /// Override the configured epoch count.
    #[arg(long)]
    epochs: Option<usize>,

    /// Override the configured learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,

    /// Override the configured batch size.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained model checkpoint.
    #[arg(long, requires = "manifest")]
    model: Option<PathBuf>,

    /// Dataset manifest to score the model on.
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Predictions (JSONL) to score against --truth.
    #[arg(long, requires = "truth", conflicts_with = "model")]
    predictions: Option<PathBuf>,

    /// Ground-truth bursts (JSONL).
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    /// Stream spec (JSON) to synthesize on the fly.
    #[arg(long, conflicts_with = "cubes")]
    script: Option<PathBuf>,

    /// Prerecorded raw stream.
    #[arg(long)]
    cubes: Option<PathBuf>,

    /// Trained model checkpoint for window classification.
    #[arg(long, conflicts_with = "oracle_dtw")]
    model: Option<PathBuf>,

    /// Classify windows by trajectory matching against canonical
    /// synthesized templates instead of a trained model.
    #[arg(long)]
    oracle_dtw: bool,

    /// Ground-truth bursts (JSONL); inferred automatically with --script.
    #[arg(long)]
    truth: Option<PathBuf>,

    /// Pace frames at the sensor period (--no-pace runs flat out).
    #[arg(long, action = ArgAction::SetTrue, overrides_with = "no_pace")]
    pace: bool,

    #[arg(long, action = ArgAction::SetTrue, overrides_with = "pace")]
    no_pace: bool,

    /// Stream identifier stamped on segment events.
    #[arg(long, default_value = "stream")]
    id: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Timing repetitions per stage.
    #[arg(long, default_value_t = 1000)]
    trials: usize,

    /// Model checkpoints to time (repeatable); defaults to freshly
    /// initialized compact and full models.
    #[arg(long)]
    model: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => AppConfig::default(),
    };
    std::fs::create_dir_all(&cli.out)?;
    let seed = cli.seed;
    let out = cli.out.clone();
    match cli.command {
        Command::Synth(args) => cmd_synth(args, &config, seed, &out),
        Command::Process(args) => cmd_process(args, &config, &out),
        Command::Augment(args) => cmd_augment(args, &config, seed, &out),
        Command::Segment(args) => cmd_segment(args, &config, &out),
        Command::Train(args) => cmd_train(args, &config, seed, &out),
        Command::Eval(args) => cmd_eval(args, &out),
        Command::Stream(args) => cmd_stream(args, &config, seed, &out),
        Command::Bench(args) => cmd_bench(args, &config, &out),
    }
}

fn parse_gesture(code: &str) -> Result<GestureKind> {
    GestureKind::from_code(code)
        .ok_or_else(|| Error::InvalidLabel(format!("unknown gesture code {code:?}")))
}

fn read_spec(path: &Path) -> Result<StreamSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec: StreamSpec = serde_json::from_str(&text)
        .map_err(|e| Error::ConfigParse(format!("stream spec: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into())
}

fn cmd_synth(args: SynthArgs, config: &AppConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let seed = seed.unwrap_or(0);
    if let Some(spec_path) = &args.script {
        let mut spec = read_spec(spec_path)?;
        spec.seed = seed;
        let (stream, bursts) = plan_stream(&spec, &config.radar)?;
        let cubes: Vec<_> = stream.collect();
        let cube_path = out.join(format!("{}.mmwc", stem(spec_path)));
        let truth_path = out.join(format!("{}_truth.jsonl", stem(spec_path)));
        save_cubes(&cube_path, &cubes)?;
        write_jsonl(&truth_path, &bursts)?;
        println!(
            "wrote {} frames to {} ({} bursts in {})",
            cubes.len(),
            cube_path.display(),
            bursts.len(),
            truth_path.display()
        );
        return Ok(());
    }

    let code = args.gesture.as_deref().ok_or_else(|| {
        Error::Validation("synth needs --gesture <code> or --script <file>".into())
    })?;
    let kind = parse_gesture(code)?;
    let mut script = GestureScript::new(kind, args.distance, args.angle_deg.to_radians());
    script.speed_scale = args.speed;
    script.duration = args.duration;
    script.noise_snr_db = args.snr_db;
    if args.torso {
        script
            .clutter
            .push(Scatterer::fixed(args.distance + 0.2, args.angle_deg.to_radians(), 2.0));
    }
    for k in 0..args.count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let cubes = synthesize_script(&script, &config.radar, &mut rng)?;
        let path = out.join(format!("{}_{k:03}.mmwc", kind.code()));
        save_cubes(&path, &cubes)?;
        println!("wrote {} frames to {}", cubes.len(), path.display());
    }
    Ok(())
}

fn cmd_process(args: ProcessArgs, config: &AppConfig, out: &Path) -> Result<()> {
    let label = args.label.as_deref().map(parse_gesture).transpose()?;
    let cubes = load_cubes(&args.input)?;
    let mut frames = Vec::with_capacity(cubes.len());
    for cube in &cubes {
        frames.push(process_cube(cube, &config.radar, &config.pipeline)?.drai);
    }
    let seq = DraiSequence::new(frames, label);
    let path = out.join(format!("{}.drai", stem(&args.input)));
    save_drai_sequence(&path, &seq)?;
    println!("wrote {} frames to {}", seq.frames.len(), path.display());
    Ok(())
}

fn cmd_augment(
    args: AugmentArgs,
    config: &AppConfig,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let mut policy = match &args.policy {
        Some(path) => load_policy(path)?,
        None => config.augment.clone(),
    };
    if let Some(factor) = args.factor {
        policy.variants_per_input = factor;
    }
    let seed = seed.unwrap_or(0);
    for input in &args.input {
        let seq = load_drai_sequence(input)?;
        let variants = augment_batch(std::slice::from_ref(&seq), &policy, seed)?;
        for (k, v) in variants.iter().enumerate() {
            let path = out.join(format!("{}_v{k:02}.drai", stem(input)));
            save_drai_sequence(&path, v)?;
        }
        println!("{} -> {} variants", input.display(), variants.len());
    }
    Ok(())
}

fn cmd_segment(args: SegmentArgs, config: &AppConfig, out: &Path) -> Result<()> {
    let seq = load_drai_sequence(&args.input)?;
    let period = config.radar.frame_period();
    let (windows, trace) = segment_stream(seq.frames.into_iter(), &config.segmenter)?;
    let id = stem(&args.input);
    let events: Vec<SegmentEvent> = windows
        .iter()
        .map(|w| SegmentEvent {
            stream_id: id.clone(),
            start_frame: w.start_frame,
            end_frame: w.end_frame,
            t_start_s: w.start_frame as f64 * period,
            t_end_s: (w.end_frame + 1) as f64 * period,
        })
        .collect();
    let path = out.join("segments.jsonl");
    write_jsonl(&path, &events)?;
    let motion_frames = trace.labels.iter().filter(|&&m| m).count();
    println!(
        "{} frames, {} motion, {} windows -> {}",
        trace.values.len(),
        motion_frames,
        events.len(),
        path.display()
    );
    for e in &events {
        println!(
            "  [{:>4}, {:>4}] {:.2}s..{:.2}s",
            e.start_frame, e.end_frame, e.t_start_s, e.t_end_s
        );
    }
    Ok(())
}

fn cmd_train(args: TrainArgs, config: &AppConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let dataset = load_dataset(&args.manifest)?;
    for issue in &dataset.issues {
        eprintln!("manifest issue: {issue}");
    }
    if dataset.sequences.is_empty() {
        return Err(Error::Validation("manifest yielded no training sequences".into()));
    }
    let mut data = dataset.sequences;

    let mut params = config.train.clone();
    if let Some(factor) = args.augment_factor {
        let mut policy = config.augment.clone();
        policy.variants_per_input = factor;
        let variants = augment_batch(&data, &policy, seed.unwrap_or(params.seed))?;
        println!("augmented {} sequences to {}", data.len(), data.len() + variants.len());
        data.extend(variants);
        params.epochs = TrainParams::for_augmented().epochs.max(params.epochs);
    }
    if let Some(s) = seed {
        params.seed = s;
    }
    if let Some(e) = args.epochs {
        params.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        params.learning_rate = lr;
    }
    if let Some(b) = args.batch_size {
        params.batch_size = b;
    }

    let model_config = if args.lite { ModelConfig::lite() } else { config.model.clone() };
    let mut model = Model::new(model_config, params.seed)?;
    println!(
        "training {} parameters on {} sequences ({} epochs)",
        model.parameter_count(),
        data.len(),
        params.epochs
    );
    let mut log_epoch = |s: &mmgesture_core::model::train::EpochStats| {
        if s.epoch == 1 || s.epoch % 10 == 0 {
            println!("epoch {:>4}: loss {:.5}", s.epoch, s.mean_loss);
        }
    };
    let report = train(&mut model, &data, &params, Some(&mut log_epoch))?;
    let train_acc = accuracy(&model, &data)?;

    let model_path = out.join("model.digm");
    save_model(&model_path, &model)?;
    let report_path = out.join("train.json");
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Format(format!("train report: {e}")))?,
    )?;
    println!(
        "final loss {:.5}, training accuracy {:.1}%, model -> {}",
        report.final_loss,
        train_acc * 100.0,
        model_path.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs, out: &Path) -> Result<()> {
    if let (Some(model_path), Some(manifest)) = (&args.model, &args.manifest) {
        let model = load_model(model_path)?;
        let dataset = load_dataset(manifest)?;
        for issue in &dataset.issues {
            eprintln!("manifest issue: {issue}");
        }
        if dataset.sequences.is_empty() {
            return Err(Error::Validation("manifest yielded no sequences".into()));
        }
        let acc = accuracy(&model, &dataset.sequences)?;
        let confusion = confusion_matrix(&model, &dataset.sequences)?;
        let classes = model.config.classes;
        println!("accuracy: {:.2}% on {} sequences", acc * 100.0, dataset.sequences.len());
        println!("confusion (rows = actual, columns = predicted):");
        for a in 0..classes {
            let row: Vec<String> = (0..classes)
                .map(|p| format!("{:>5}", confusion[a * classes + p]))
                .collect();
            let code = GestureKind::from_label(a as u8).map(|k| k.code()).unwrap_or("??");
            println!("  {code} {}", row.join(" "));
        }
        return Ok(());
    }

    if let (Some(pred_path), Some(truth_path)) = (&args.predictions, &args.truth) {
        let predictions: Vec<PredictionRecord> = read_jsonl(pred_path)?;
        let truth: Vec<GestureBurst> = read_jsonl(truth_path)?;
        let counters = match_events(&truth, &predictions)?;
        println!(
            "performed {} | misclassified {} | missed {} | predictions {}",
            counters.performed, counters.misclassified, counters.missed, counters.predictions
        );
        let (cra, mpr) = compute_cra_mpr(&counters)?;
        println!("CRA {:.4}  MPR {:.4}", cra, mpr);
        let summary = serde_json::json!({
            "counters": counters,
            "cra": cra,
            "mpr": mpr,
        });
        std::fs::write(
            out.join("eval.json"),
            serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::Format(format!("eval report: {e}")))?,
        )?;
        return Ok(());
    }

    Err(Error::Validation(
        "eval needs either --model with --manifest, or --predictions with --truth".into(),
    ))
}

/// Canonical trajectory templates: one clean scripted recording per
/// gesture class, reduced through the standard pipeline.
fn oracle_templates(config: &AppConfig) -> Result<Vec<DtwTemplate>> {
    let mut templates = Vec::new();
    for kind in GestureKind::ALL {
        if kind.is_negative() {
            continue;
        }
        let script = GestureScript::new(kind, 0.8, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cubes = synthesize_script(&script, &config.radar, &mut rng)?;
        let mut frames = Vec::new();
        for cube in &cubes {
            let drai = process_cube(cube, &config.radar, &config.pipeline)?.drai;
            if drai.max_value() > 0.0 {
                frames.push(drai);
            }
        }
        let profile = extract_trajectory_profile(&DraiSequence::new(frames, Some(kind)))?;
        templates.push(DtwTemplate { profile, label: kind });
    }
    Ok(templates)
}

fn cmd_stream(args: StreamArgs, config: &AppConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let model;
    let templates;
    let classifier = if args.oracle_dtw {
        templates = oracle_templates(config)?;
        Some(StreamClassifier::Oracle(&templates))
    } else if let Some(path) = &args.model {
        model = load_model(path)?;
        Some(StreamClassifier::Network(&model))
    } else {
        None
    };

    let mut setup = StreamSetup::new(
        &config.radar,
        &config.pipeline,
        &config.segmenter,
        &config.clean,
        &config.roi,
    );
    setup.classifier = classifier;
    setup.pace = args.pace && !args.no_pace;
    setup.stream_id = args.id.clone();

    let mut truth: Option<Vec<GestureBurst>> = match &args.truth {
        Some(path) => Some(read_jsonl(path)?),
        None => None,
    };

    let report = if let Some(spec_path) = &args.script {
        let mut spec = read_spec(spec_path)?;
        if let Some(s) = seed {
            spec.seed = s;
        }
        let (stream, bursts) = plan_stream(&spec, &config.radar)?;
        if truth.is_none() {
            truth = Some(bursts);
        }
        run_stream(stream, &setup, truth.as_deref())?
    } else if let Some(cube_path) = &args.cubes {
        let cubes = load_cubes(cube_path)?;
        run_stream(cubes, &setup, truth.as_deref())?
    } else {
        return Err(Error::Validation("stream needs --script <file> or --cubes <file>".into()));
    };

    write_jsonl(&out.join("segments.jsonl"), &report.segments)?;
    write_jsonl(&out.join("events.jsonl"), &report.events)?;
    write_jsonl(&out.join("predictions.jsonl"), &report.predictions)?;

    println!(
        "{} frames, {} segments, {} recognitions",
        report.frames,
        report.segments.len(),
        report.events.len()
    );
    for e in &report.events {
        println!(
            "  {:>6.2}s..{:>6.2}s  {}  confidence {:.3}  latency {:.2} ms",
            e.t_start_s, e.t_end_s, e.class, e.confidence, e.latency_ms
        );
    }
    println!("per-frame total: mean {:.3} ms, p99 {:.3} ms", report.total.mean_ms, report.total.p99_ms);
    for (name, s) in &report.stages {
        println!("  {name:<18} mean {:.3} ms  p99 {:.3} ms  ({} samples)", s.mean_ms, s.p99_ms, s.samples);
    }
    if let (Some(cra), Some(mpr)) = (report.cra, report.mpr) {
        println!("CRA {cra:.4}  MPR {mpr:.4}");
    } else if let Some(c) = &report.counters {
        println!(
            "counters: performed {} misclassified {} missed {} predictions {}",
            c.performed, c.misclassified, c.missed, c.predictions
        );
    }

    let summary = serde_json::json!({
        "frames": report.frames,
        "total": report.total,
        "stages": report.stages.iter().map(|(n, s)| (n.clone(), s.clone())).collect::<Vec<_>>(),
        "counters": report.counters,
        "cra": report.cra,
        "mpr": report.mpr,
    });
    std::fs::write(
        out.join("stream_report.json"),
        serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Format(format!("stream report: {e}")))?,
    )?;
    Ok(())
}

fn cmd_bench(args: BenchArgs, config: &AppConfig, out: &Path) -> Result<()> {
    let mut loaded = Vec::new();
    if args.model.is_empty() {
        loaded.push(("lite".to_string(), Model::new(ModelConfig::lite(), 0)?));
        loaded.push(("full".to_string(), Model::new(ModelConfig::full(), 0)?));
    } else {
        for path in &args.model {
            loaded.push((stem(path), load_model(path)?));
        }
    }
    let refs: Vec<(&str, &Model)> = loaded.iter().map(|(n, m)| (n.as_str(), m)).collect();
    let stats = bench_pipeline(&config.radar, &config.pipeline, &refs, args.trials)?;
    println!("{} trials per stage", args.trials);
    println!("{:<22} {:>10} {:>10} {:>10}", "stage", "mean ms", "p99 ms", "max ms");
    for (name, s) in &stats {
        println!("{name:<22} {:>10.3} {:>10.3} {:>10.3}", s.mean_ms, s.p99_ms, s.max_ms);
    }
    let json = serde_json::json!({
        "trials": args.trials,
        "stages": stats.iter().map(|(n, s)| (n.clone(), s.clone())).collect::<Vec<_>>(),
    });
    std::fs::write(
        out.join("bench.json"),
        serde_json::to_string_pretty(&json)
            .map_err(|e| Error::Format(format!("bench report: {e}")))?,
    )?;
    Ok(())
}
