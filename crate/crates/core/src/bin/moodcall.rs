//! Command-line front end; each subcommand is one pipeline stage.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::Value;

use moodcall::annotation::{self, aggregate_all, corpus_stats, label_records, AnnotationService, LabelRecord, RatingLog};
use moodcall::corpus::{load_manifest, Segment};
use moodcall::dsp::{load_feature_set, save_feature_set, FeatureKind};
use moodcall::eval::{build_fold_plans_with, run_experiment, summary_table, ExperimentData, FoldSpec};
use moodcall::mood::{analyze, ensemble_mean, link_scores, CorrelationLevel, Dimension, EnsemblePrediction};
use moodcall::nn::{Architecture, ConvPoolConfig, FfnnConfig};
use moodcall::pipeline::{extract_features, load_artifacts, member_outputs, segment_calls, Dataset, NeuralLearner, TrainOverrides};
use moodcall::sad::{SadConfig, SegmentMode};
use moodcall::sampling::{select_segments, SamplingPlan, Selection};
use moodcall::synth::{generate_corpus, load_truth, SynthConfig};
use moodcall::{read_json, write_json, write_string, Error, Result};

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\ncommit: ",
    env!("MOODCALL_COMMIT"),
    "\ntarget: ",
    env!("MOODCALL_TARGET"),
    "\nprofile: ",
    env!("MOODCALL_PROFILE")
);

#[derive(Parser, Debug)]
#[command(name = "moodcall", version, long_version = LONG_VERSION, about = "Speech emotion and mood analysis pipeline")]
struct Cli {
    /// JSON file of default flags: {"<subcommand>": {"<flag>": value}}. Flags
    /// given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus: manifest, WAV files and ground truth.
    Synth(SynthArgs),
    /// Detect speech in every call and write segments.
    Segment(SegmentArgs),
    /// Choose segments for annotation.
    Select(SelectArgs),
    /// Serve the annotation HTTP API.
    AnnotateServe(ServeArgs),
    /// Turn ratings (or synthetic ground truth) into training labels.
    Aggregate(AggregateArgs),
    /// Extract log-MFB sequences or utterance functionals per segment.
    Features(FeatureArgs),
    /// Train one model on a fixed subject split.
    Train(TrainArgs),
    /// Repeated subject-independent cross-validation with model selection.
    Evaluate(EvaluateArgs),
    /// Ensemble predictions of saved cross-validation models.
    Predict(PredictArgs),
    /// Mood statistics on ensemble predictions of assessment-call segments.
    MoodAnalyze(MoodArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    segments_per_call: Option<usize>,
    #[arg(long)]
    calls_per_week: Option<usize>,
    /// Full generator settings as JSON; the flags above override it.
    #[arg(long, value_name = "FILE")]
    synth_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output segments JSON.
    #[arg(long)]
    out: PathBuf,
    /// Keep segments outside the 3-30 s annotation range.
    #[arg(long)]
    raw: bool,
    /// Directory audio paths are relative to (default: the manifest's directory).
    #[arg(long)]
    audio_root: Option<PathBuf>,
    /// Median filter length in frames (odd).
    #[arg(long, default_value_t = 11)]
    smoothing_window: usize,
    /// Bridge nonspeech gaps up to this many seconds.
    #[arg(long, default_value_t = 0.3)]
    merge_gap: f64,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    segments: PathBuf,
    /// Sampling plan JSON; the flags below override it.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    assessment_cap: Option<usize>,
    #[arg(long)]
    personal_count: Option<usize>,
    /// Output selection JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long)]
    selection: PathBuf,
    /// Append-only ratings log (JSON lines); created if missing.
    #[arg(long)]
    log: PathBuf,
    /// Comma-separated annotator ids allowed to rate.
    #[arg(long, value_delimiter = ',', required = true)]
    annotators: Vec<String>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Directory audio paths are relative to (default: the selection's directory).
    #[arg(long)]
    audio_root: Option<PathBuf>,
    /// Skip segments already rated by this many other annotators.
    #[arg(long)]
    target_coverage: Option<usize>,
}

#[derive(Args, Debug)]
struct AggregateArgs {
    /// Output labels JSON.
    #[arg(long)]
    out: PathBuf,
    /// Ratings log to aggregate (with --selection).
    #[arg(long, requires = "selection", conflicts_with = "truth")]
    log: Option<PathBuf>,
    #[arg(long)]
    selection: Option<PathBuf>,
    /// Ground truth from `synth`, matched onto --segments of --manifest.
    #[arg(long, requires_all = ["manifest", "segments"])]
    truth: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    segments: Option<PathBuf>,
    /// Also write corpus statistics here (ratings mode).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    LogMfb,
    Functionals,
}

impl From<Kind> for FeatureKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::LogMfb => FeatureKind::LogMfb,
            Kind::Functionals => FeatureKind::Functionals,
        }
    }
}

#[derive(Args, Debug)]
struct FeatureArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Segments JSON (default: the manifest's own segments).
    #[arg(long)]
    segments: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Output stem; writes <stem>.f32 and <stem>.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    audio_root: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    Activation,
    Valence,
}

impl From<Target> for Dimension {
    fn from(t: Target) -> Self {
        match t {
            Target::Activation => Dimension::Activation,
            Target::Valence => Dimension::Valence,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Arch {
    Ffnn,
    Convpool,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Feature stem written by `features`.
    #[arg(long)]
    features: PathBuf,
    /// Labels JSON written by `aggregate`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum, default_value = "activation")]
    target: Target,
    #[arg(long, value_enum, default_value = "convpool")]
    arch: Arch,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl ModelArgs {
    fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Subject split JSON: {"train": [...], "validation": [...]}.
    #[arg(long)]
    fold_spec: PathBuf,
    /// Conv or hidden layers.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 200)]
    width: usize,
    /// Convolution kernel length (Conv-Pool only).
    #[arg(long, default_value_t = 4)]
    kernel: usize,
    /// Output directory for the model artifact.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// JSON list of architectures to search (default: the standard grid for --arch).
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// Subjects per fold.
    #[arg(long, default_value_t = 2)]
    fold_size: usize,
    /// Output directory: report.json, summary.txt and models/.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    features: PathBuf,
    /// Directory of activation model artifacts (one subdirectory each).
    #[arg(long)]
    activation_models: PathBuf,
    #[arg(long)]
    valence_models: PathBuf,
    /// Only predict these segments (segments JSON); default: every valid item.
    #[arg(long)]
    segments: Option<PathBuf>,
    #[arg(long, default_value_t = moodcall::mood::ENSEMBLE_SIZE)]
    ensemble_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Level {
    Segment,
    Call,
}

#[derive(Args, Debug)]
struct MoodArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory: report.json and report.txt.
    #[arg(long)]
    out: PathBuf,
    /// Correlate segment predictions or call means with clinical scores.
    #[arg(long, value_enum, default_value = "segment")]
    level: Level,
}

fn parent_of(p: &Path) -> PathBuf {
    p.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.synth_config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(n) = a.subjects {
        cfg.n_subjects = n;
    }
    if let Some(n) = a.segments_per_call {
        cfg.segments_per_call = n;
    }
    if let Some(n) = a.calls_per_week {
        cfg.calls_per_week = n;
    }
    let (corpus, files) = generate_corpus(&cfg, &a.out)?;
    info!(
        "wrote {} calls, {} segments to {}",
        corpus.manifest.calls.len(),
        corpus.truth.segments.len(),
        a.out.display()
    );
    println!("{}", files.manifest.display());
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let root = a.audio_root.unwrap_or_else(|| parent_of(&a.manifest));
    let cfg = SadConfig {
        smoothing_window: a.smoothing_window,
        merge_gap_s: a.merge_gap,
        ..SadConfig::default()
    };
    let mode = if a.raw { SegmentMode::Raw } else { SegmentMode::Eligible };
    let segs = segment_calls(&manifest, &root, &cfg, mode)?;
    info!("{} segments from {} calls", segs.len(), manifest.calls.len());
    write_json(&a.out, &segs)
}

fn select(a: SelectArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let segments: Vec<Segment> = read_json(&a.segments)?;
    let mut plan: SamplingPlan = match &a.plan {
        Some(p) => read_json(p)?,
        None => SamplingPlan::new(0),
    };
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if let Some(c) = a.assessment_cap {
        plan.assessment_cap = c;
    }
    if let Some(c) = a.personal_count {
        plan.personal_count = c;
    }
    let sel = select_segments(&manifest, &segments, &plan)?;
    info!("selected {} segments", sel.segments.len());
    write_json(&a.out, &sel)
}

fn serve(a: ServeArgs) -> Result<()> {
    let sel: Selection = read_json(&a.selection)?;
    let root = a.audio_root.unwrap_or_else(|| parent_of(&a.selection));
    let mut svc = AnnotationService::new(sel.segments, a.annotators, &a.log, &root)?;
    if let Some(n) = a.target_coverage {
        svc = svc.with_target_coverage(n)?;
    }
    let svc = Arc::new(svc);
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Error::Config(format!("bad listen address: {e}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Config(format!("runtime: {e}")))?;
    rt.block_on(annotation::serve(addr, svc))
        .map_err(|e| Error::Config(format!("server on {addr}: {e}")))
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let labels: Vec<LabelRecord> = match (&a.log, &a.truth) {
        (Some(log), None) => {
            let sel: Selection = read_json(a.selection.as_ref().expect("required by clap"))?;
            let agg = aggregate_all(&RatingLog::read(log)?);
            if let Some(p) = &a.stats {
                write_json(p, &corpus_stats(&agg))?;
            }
            label_records(&agg, &sel.segments)?
        }
        (None, Some(truth)) => {
            let truth = load_truth(truth)?;
            let manifest = load_manifest(a.manifest.as_ref().expect("required by clap"))?;
            let segs: Vec<Segment> = read_json(a.segments.as_ref().expect("required by clap"))?;
            truth.labels_for(&segs, &manifest)
        }
        _ => return Err(Error::Config("pass either --log with --selection, or --truth".into())),
    };
    info!("{} labeled segments", labels.len());
    write_json(&a.out, &labels)
}

fn features(a: FeatureArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let segs: Vec<Segment> = match &a.segments {
        Some(p) => read_json(p)?,
        None => manifest.segments.clone(),
    };
    let root = a.audio_root.unwrap_or_else(|| parent_of(&a.manifest));
    let set = extract_features(&manifest, &segs, &root, a.kind.into())?;
    info!(
        "{} items, {} valid",
        set.items.len(),
        set.items.iter().filter(|i| i.valid).count()
    );
    save_feature_set(&set, &a.out)
}

fn architecture(arch: Arch, layers: usize, width: usize, kernel: usize) -> Architecture {
    match arch {
        Arch::Ffnn => Architecture::Ffnn(FfnnConfig {
            input_dim: FeatureKind::Functionals.dim(),
            hidden_layers: layers,
            width,
        }),
        Arch::Convpool => Architecture::ConvPool(ConvPoolConfig {
            input_channels: FeatureKind::LogMfb.dim(),
            layers,
            width,
            kernel,
        }),
    }
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let set = load_feature_set(&a.model.features)?;
    let labels: Vec<LabelRecord> = read_json(&a.model.labels)?;
    let target: Dimension = a.model.target.into();
    let data = Dataset::build(&set, &labels, target)?;
    let spec: FoldSpec = read_json(&a.fold_spec)?;
    spec.validate()?;
    let items = |subjects: &[String]| -> Vec<usize> { (0..data.len()).filter(|&i| subjects.contains(&data.subjects[i])).collect() };
    let learner = NeuralLearner {
        features: &set,
        data: &data,
        overrides: a.model.overrides(),
    };
    let arch = architecture(a.model.arch, a.layers, a.width, a.kernel);
    let fitted = learner.fit_items(&arch, &items(&spec.train), &items(&spec.validation), a.model.seed)?;
    info!(
        "best epoch {} with validation ccc {:?}",
        fitted.outcome.best_epoch, fitted.outcome.best_validation_ccc
    );
    fitted.artifact(target).save(&a.out)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let set = load_feature_set(&a.model.features)?;
    let labels: Vec<LabelRecord> = read_json(&a.model.labels)?;
    let target: Dimension = a.model.target.into();
    let data = Dataset::build(&set, &labels, target)?;
    let grid: Vec<Architecture> = match &a.grid {
        Some(p) => read_json(p)?,
        None => match a.model.arch {
            Arch::Ffnn => FfnnConfig::search_grid(FeatureKind::Functionals.dim())
                .into_iter()
                .map(Architecture::Ffnn)
                .collect(),
            Arch::Convpool => ConvPoolConfig::search_grid(FeatureKind::LogMfb.dim())
                .into_iter()
                .map(Architecture::ConvPool)
                .collect(),
        },
    };
    let plans = build_fold_plans_with(&data.unique_subjects(), a.model.seed, a.runs, a.fold_size)?;
    let learner = NeuralLearner {
        features: &set,
        data: &data,
        overrides: a.model.overrides(),
    };
    let exp = run_experiment(
        &plans,
        &grid,
        ExperimentData {
            subjects: &data.subjects,
            targets: &data.targets,
        },
        &learner,
        a.model.seed,
    )?;
    let report = exp.report()?;
    write_json(&a.out.join("report.json"), &report)?;
    let s = &report.summary;
    let table = summary_table(
        &[target.as_str()],
        &[
            ("PCC".to_string(), vec![Some(s.pcc)]),
            ("CCC".to_string(), vec![Some(s.ccc)]),
            ("RMSE".to_string(), vec![Some(s.rmse)]),
        ],
    );
    write_string(&a.out.join("summary.txt"), &table)?;
    print!("{table}");
    for (rec, model) in exp.folds.iter().zip(&exp.models) {
        let dir = a.out.join("models").join(format!("run{}_fold{}", rec.run, rec.fold));
        model.artifact(target).save(&dir)?;
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let set = load_feature_set(&a.features)?;
    let ids: Vec<String> = match &a.segments {
        Some(p) => read_json::<Vec<Segment>>(p)?.into_iter().map(|s| s.segment_id).collect(),
        None => set.items.iter().filter(|i| i.valid).map(|i| i.id.clone()).collect(),
    };
    let act = load_artifacts(&a.activation_models)?;
    let val = load_artifacts(&a.valence_models)?;
    if act.len() != val.len() {
        return Err(Error::Config(format!(
            "{} activation models but {} valence models",
            act.len(),
            val.len()
        )));
    }
    let members = act
        .iter()
        .zip(&val)
        .map(|(x, y)| member_outputs(x, y, &set, &ids))
        .collect::<Result<Vec<_>>>()?;
    let preds = ensemble_mean(&ids, &members, a.ensemble_size)?;
    info!("{} segment predictions from {} members", preds.len(), members.len());
    write_json(&a.out, &preds)
}

fn mood_analyze(a: MoodArgs) -> Result<()> {
    let preds: Vec<EnsemblePrediction> = read_json(&a.predictions)?;
    let manifest = load_manifest(&a.manifest)?;
    let rows = link_scores(&preds, &manifest)?;
    let level = match a.level {
        Level::Segment => CorrelationLevel::Segment,
        Level::Call => CorrelationLevel::Call,
    };
    let report = analyze(&rows, level);
    write_json(&a.out.join("report.json"), &report)?;
    let text = report.tables();
    write_string(&a.out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

/// Command line with defaults from the config file inserted after the
/// subcommand, for every flag not already given.
fn with_config_defaults(argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let Some(pos) = argv.iter().position(|a| a == "--config") else {
        return Ok(argv);
    };
    let path = argv.get(pos + 1).ok_or("--config needs a file")?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    let root: Value = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
    let sub_pos = argv
        .iter()
        .skip(1)
        .position(|a| Command::has_name(a))
        .map(|p| p + 1)
        .ok_or("no subcommand given")?;
    let Some(Value::Object(flags)) = root.get(&argv[sub_pos]) else {
        return Ok(argv);
    };
    let mut extra = Vec::new();
    for (k, v) in flags {
        let flag = format!("--{}", k.replace('_', "-"));
        if argv.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        let scalar = |v: &Value| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            other => Err(format!("{path}: unsupported value for {k}: {other}")),
        };
        match v {
            Value::Bool(true) => extra.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<std::result::Result<_, _>>()?;
                extra.push(flag);
                extra.push(parts.join(","));
            }
            other => {
                extra.push(flag);
                extra.push(scalar(other)?);
            }
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(out)
}

impl Command {
    fn has_name(s: &str) -> bool {
        use clap::CommandFactory;
        Cli::command().get_subcommands().any(|c| c.get_name() == s)
    }
}

fn main() -> ExitCode {
    let argv = match with_config_defaults(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Segment(a) => segment(a),
        Command::Select(a) => select(a),
        Command::AnnotateServe(a) => serve(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Predict(a) => predict(a),
        Command::MoodAnalyze(a) => mood_analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
