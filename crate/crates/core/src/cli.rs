//! Command-line driver: one subcommand per pipeline stage.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::constraint::{
    emit_instruction_dataset, generate_constraints, Backend, BackendConfig, Composition, ConstraintRequest,
    GenerationConfig, GoldExample, HttpBackend, MockBackend,
};
use crate::data_io::{
    filter_corpus, load_structures, save_structures, split_dataset, DatasetSplit, FilterConfig, StructureRecord,
};
use crate::diffusion::{
    sample_batch, train, Checkpoint, ModelConfig, SampleConfig, SampleRequest, ScheduleConfig, TrainConfig,
};
use crate::error::{ConstraintError, DataError, DiffusionError, EvalError, SymmetryError};
use crate::evaluation::{
    composition_precision, match_batch, match_rate, property_error_distribution, symmetry_accuracy, EvaluationReport,
    MatchSettings, RareThresholds, DEFAULT_BARS,
};
use crate::par::{derive_seed, Execution};
use crate::property::{PropertyKind, PropertyTarget};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Backend(_) => EXIT_BACKEND,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Backend(m) => write!(f, "backend error: {m}"),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_error!(DataError, DiffusionError, EvalError, SymmetryError, std::io::Error);

impl From<ConstraintError> for CliError {
    fn from(e: ConstraintError) -> Self {
        match e {
            ConstraintError::InvalidRequest(_) | ConstraintError::InvalidInput(_) => CliError::Usage(e.to_string()),
            ConstraintError::Transport(_) | ConstraintError::Generation { .. } => CliError::Backend(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "symgen", version, about = "Symmetry-constrained crystal generation")]
pub struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; every stage derives its own seed from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter a raw corpus into structures.v1.
    Ingest(IngestArgs),
    /// Split structures into train/validation/test groups.
    Split(SplitArgs),
    /// Write instruction-tuning records for both prompt stages.
    EmitSft(EmitArgs),
    /// Train a property-conditioned denoiser.
    Train(TrainArgs),
    /// Generate constraints, then structures.
    Generate(GenerateArgs),
    /// Compare generated structures against references.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub max_atoms: usize,
    #[arg(long, default_value_t = 0.1)]
    pub max_e_hull: f64,
    /// Fail on records that break symmetry or lack fields instead of skipping.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Args)]
pub struct SubsetArgs {
    /// split.v1 file restricting the records used.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Subset::Train)]
    pub subset: Subset,
}

#[derive(Debug, Args)]
pub struct EmitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub subset: SubsetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Tiny,
    Full,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub property: PropertyKind,
    #[command(flatten)]
    pub subset: SubsetArgs,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub noise_draws: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Also write the per-epoch loss trace as JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
    pub backend: BackendKind,
    #[arg(long, conflicts_with = "elements", required_unless_present = "elements")]
    pub formula: Option<String>,
    /// Comma-separated element symbols.
    #[arg(long)]
    pub elements: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub band_gap: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub formation_energy: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Reverse-step retries per structure.
    #[arg(long)]
    pub retries: Option<usize>,
    /// Also write the constraint results with backend transcripts.
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Generated structures.v1; paired with references by position.
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Property compared between generated and reference records.
    #[arg(long)]
    pub property: Option<PropertyKind>,
    #[arg(long)]
    pub sg_threshold: Option<usize>,
    #[arg(long)]
    pub wyckoff_threshold: Option<usize>,
}

/// Settings read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub backend: Option<BackendConfig>,
    pub model: Option<ModelConfig>,
    pub schedule: Option<ScheduleConfig>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub noise_draws: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_retries: Option<usize>,
    pub match_settings: Option<MatchSettings>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

struct Context {
    seed: u64,
    exec: Execution,
    config: RunConfig,
}

/// Removes registered outputs unless the stage completes.
struct Outputs(Vec<PathBuf>);

impl Outputs {
    fn add(&mut self, p: &Path) -> PathBuf {
        self.0.push(p.to_path_buf());
        p.to_path_buf()
    }

    fn commit(mut self) {
        self.0.clear();
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for p in &self.0 {
            let _ = fs::remove_file(p);
        }
    }
}

fn subset_records(records: Vec<StructureRecord>, args: &SubsetArgs) -> Result<Vec<StructureRecord>, CliError> {
    let Some(path) = &args.split else {
        return Ok(records);
    };
    let split = DatasetSplit::read(path)?;
    let ids = match args.subset {
        Subset::Train => split.train,
        Subset::Validation => split.validation,
        Subset::Test => split.test,
    };
    let keep: std::collections::BTreeSet<String> = ids.into_iter().collect();
    Ok(records.into_iter().filter(|r| keep.contains(&r.id)).collect())
}

fn cmd_ingest(a: &IngestArgs) -> Result<(), CliError> {
    let mut out = Outputs(Vec::new());
    let records = load_structures(&a.input, a.strict)?;
    let total = records.len();
    let cfg = FilterConfig { max_atoms: a.max_atoms, max_e_hull: a.max_e_hull, strict: a.strict };
    let res = filter_corpus(records, &cfg)?;
    save_structures(&out.add(&a.output), &res.kept)?;
    println!("read={total} kept={} dropped={} missing_e_hull={}", res.kept.len(), res.dropped, res.missing);
    out.commit();
    Ok(())
}

fn cmd_split(a: &SplitArgs, ctx: &Context) -> Result<(), CliError> {
    let mut out = Outputs(Vec::new());
    let records = load_structures(&a.input, true)?;
    if records.is_empty() {
        return Err(CliError::Data("cannot split an empty corpus".into()));
    }
    let split = split_dataset(&records, derive_seed(ctx.seed, "split"));
    split.write(&out.add(&a.output))?;
    println!("train={} validation={} test={}", split.train.len(), split.validation.len(), split.test.len());
    out.commit();
    Ok(())
}

fn record_properties(r: &StructureRecord) -> Vec<PropertyTarget> {
    PropertyKind::ALL.iter().filter_map(|k| r.property(k.key()).map(|v| PropertyTarget::new(*k, v))).collect()
}

fn cmd_emit(a: &EmitArgs) -> Result<(), CliError> {
    let mut out = Outputs(Vec::new());
    let records = subset_records(load_structures(&a.input, true)?, &a.subset)?;
    let gold: Vec<GoldExample> =
        records.iter().map(|r| GoldExample { constraint: r.constraint(), properties: record_properties(r) }).collect();
    let n = emit_instruction_dataset(&gold, &out.add(&a.output))?;
    println!("records={n}");
    out.commit();
    Ok(())
}

fn cmd_train(a: &TrainArgs, ctx: &Context) -> Result<(), CliError> {
    let mut out = Outputs(Vec::new());
    let records = subset_records(load_structures(&a.input, true)?, &a.subset)?;
    let training = records.iter().map(|r| r.training_record(a.property)).collect::<Result<Vec<_>, _>>()?;
    let c = &ctx.config;
    let base = match a.profile {
        Some(Profile::Full) => TrainConfig::default(),
        _ => TrainConfig::tiny(),
    };
    let mut schedule = c.schedule.unwrap_or(base.schedule);
    if let Some(t) = a.steps {
        schedule.steps = t;
    }
    let cfg = TrainConfig {
        model: if a.profile.is_some() { base.model } else { c.model.unwrap_or(base.model) },
        schedule,
        epochs: a.epochs.or(c.epochs).unwrap_or(base.epochs),
        batch_size: a.batch_size.or(c.batch_size).unwrap_or(base.batch_size),
        noise_draws: a.noise_draws.or(c.noise_draws).unwrap_or(base.noise_draws),
        learning_rate: a.learning_rate.or(c.learning_rate).unwrap_or(base.learning_rate),
        seed: derive_seed(ctx.seed, "train"),
        ..base
    };
    let model = train(&training, a.property, &cfg)?;
    let ckpt = Checkpoint { params: model.params, schedule: model.schedule };
    ckpt.save(&out.add(&a.output))?;
    if let Some(t) = &a.trace {
        fs::write(out.add(t), serde_json::to_string_pretty(&model.trace).expect("trace serialises") + "\n")?;
    }
    let last = model.trace.last().map_or(f64::NAN, |s| s.loss);
    println!("examples={} epochs={} final_loss={last:.6}", training.len(), cfg.epochs);
    out.commit();
    Ok(())
}

fn cmd_generate(a: &GenerateArgs, ctx: &Context) -> Result<(), CliError> {
    let mut out = Outputs(Vec::new());
    let composition = match (&a.formula, &a.elements) {
        (Some(f), _) => Composition::parse_formula(f)?,
        (None, Some(e)) => {
            Composition::Elements(e.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        }
        (None, None) => return Err(CliError::Usage("one of --formula or --elements is required".into())),
    };
    let mut props = Vec::new();
    if let Some(v) = a.band_gap {
        props.push(PropertyTarget::new(PropertyKind::BandGap, v));
    }
    if let Some(v) = a.formation_energy {
        props.push(PropertyTarget::new(PropertyKind::FormationEnergy, v));
    }
    let req = ConstraintRequest::new(composition, props)?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let kind = ckpt.params.property;
    let target = req
        .property(kind)
        .map(|v| PropertyTarget::new(kind, v))
        .ok_or_else(|| CliError::Usage(format!("checkpoint is conditioned on {kind}; pass a value for it")))?;
    let backend: Box<dyn Backend> = match a.backend {
        BackendKind::Mock => Box::new(MockBackend),
        BackendKind::Http => Box::new(HttpBackend::new(ctx.config.backend.clone().unwrap_or_default())?),
    };
    let max_retries = ctx.config.max_retries.unwrap_or(GenerationConfig::default().max_retries);
    let mut results = Vec::with_capacity(a.n);
    for i in 0..a.n {
        let gc = GenerationConfig { max_retries, seed: derive_seed(ctx.seed, &format!("constraint/{i}")) };
        results.push(generate_constraints(&req, backend.as_ref(), &gc)?);
    }
    let requests = results
        .iter()
        .map(|r| Ok(SampleRequest { constraint: r.constraint()?, property: target }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let sc = SampleConfig { retries: a.retries.unwrap_or(SampleConfig::default().retries) };
    let samples = sample_batch(&ckpt.params, &requests, &ckpt.schedule, sc, derive_seed(ctx.seed, "sample"), ctx.exec);
    let mut records = Vec::with_capacity(samples.len());
    for (i, (s, r)) in samples.into_iter().zip(&requests).enumerate() {
        let s = s?;
        let mut props = std::collections::BTreeMap::new();
        for p in &req.properties {
            props.insert(p.kind.key().to_string(), p.value);
        }
        records.push(StructureRecord::new(
            format!("sample-{i:04}"),
            s,
            r.constraint.space_group,
            r.constraint.assignments.clone(),
            props,
        )?);
    }
    save_structures(&out.add(&a.output), &records)?;
    if let Some(t) = &a.transcripts {
        fs::write(out.add(t), serde_json::to_string_pretty(&results).expect("results serialise") + "\n")?;
    }
    println!("generated={}", records.len());
    out.commit();
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, ctx: &Context) -> Result<(), CliError> {
    let mut out = Outputs(Vec::new());
    let generated = load_structures(&a.generated, false)?;
    let reference = load_structures(&a.reference, false)?;
    if generated.len() != reference.len() {
        return Err(EvalError::LengthMismatch(generated.len(), reference.len()).into());
    }
    let settings = ctx.config.match_settings.unwrap_or_default();
    settings.validate()?;
    let pairs: Vec<_> =
        generated.iter().zip(&reference).map(|(g, r)| (g.structure.clone(), r.structure.clone())).collect();
    let reports = match_batch(&pairs, &settings, ctx.exec);
    let mut report = EvaluationReport { match_summary: Some(match_rate(&reports)?), ..Default::default() };
    let labels = |rs: &[StructureRecord]| rs.iter().map(|r| (r.space_group, r.assignments.clone())).collect::<Vec<_>>();
    let th = RareThresholds {
        space_group: a.sg_threshold.unwrap_or(RareThresholds::default().space_group),
        wyckoff: a.wyckoff_threshold.unwrap_or(RareThresholds::default().wyckoff),
    };
    report.symmetry = Some(symmetry_accuracy(&labels(&generated), &labels(&reference), th)?);
    let requested: Vec<Composition> = reference
        .iter()
        .map(|r| Composition::Formula(r.structure.composition().into_iter().map(|(e, n)| (e, n as u32)).collect()))
        .collect();
    let gen_structs: Vec<_> = generated.iter().map(|g| g.structure.clone()).collect();
    report.composition_precision = Some(composition_precision(&gen_structs, &requested)?);
    if let Some(kind) = a.property {
        let mut pv = Vec::new();
        let mut tv = Vec::new();
        for (g, r) in generated.iter().zip(&reference) {
            let key = kind.key();
            let missing = |id: &str| DataError::MissingField { id: id.to_string(), field: key.into() };
            pv.push(g.property(key).ok_or_else(|| missing(&g.id))?);
            tv.push(r.property(key).ok_or_else(|| missing(&r.id))?);
        }
        let mut d = property_error_distribution(&pv, &tv, &DEFAULT_BARS)?;
        d.composition_precision = report.composition_precision;
        report.property_errors = Some(d);
    }
    report.write(&out.add(&a.output))?;
    print!("{}", report.to_table());
    out.commit();
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let ctx = Context { seed, exec, config };
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Split(a) => cmd_split(a, &ctx),
        Command::EmitSft(a) => cmd_emit(a),
        Command::Train(a) => cmd_train(a, &ctx),
        Command::Generate(a) => cmd_generate(a, &ctx),
        Command::Evaluate(a) => cmd_evaluate(a, &ctx),
    }
}

/// Parses arguments, runs the stage and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("symgen: {e}");
            e.code()
        }
    }
}
