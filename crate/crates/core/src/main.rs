use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use detox_core::corpus::{
    self, build_generator_dataset, build_tagger_records, ConcatOrder, DeriveOptions, TaggerExample,
};
use detox_core::edit::{EditRecord, TagSequence};
use detox_core::evaluation::{self, CharLm, ChrF, ConstantPairScorer, ExternalSim, PairScorer};
use detox_core::generator::{
    DeleteGenerator, ExternalGenerator, FillRecord, FillResponse, Generator, Lexicon, LexiconGenerator,
};
use detox_core::io::{self as dio, Meta};
use detox_core::pipeline::{detoxify_batch, Pipeline};
use detox_core::plugin::PluginSource;
use detox_core::scoring::{ConstantScorer, ExternalScorer, ScoreRequest, ScoreResponse, Scorer};
use detox_core::tagger::{
    ExternalTagger, KeepTagger, PerceptronModel, SalienceTable, SalienceTagger, TagRequest, TagResponse, Tagger,
    TrainOptions, DEFAULT_SMOOTHING, DEFAULT_THRESHOLD,
};
use detox_core::toxicity::{self, ChecklistTest, ClfModel, ClfOptions, ToxicLexicon};
use detox_core::{Error, Result};

const EXIT_IO: u8 = 3;
const EXIT_SCHEMA: u8 = 4;
const EXIT_PROTOCOL: u8 = 5;
const EXIT_INVALID: u8 = 6;
const EXIT_SCRIPT: u8 = 7;

const PLUGIN_HELP: &str = "Plugin specs: `extern:CMD` runs CMD through `sh -c` and exchanges JSON lines \
on stdin/stdout; `file:PATH` reads precomputed JSON-line responses. Responses echo the request `id`.";

#[derive(Parser)]
#[command(name = "detoxkit", version, about = "Tag-then-fill text detoxification toolkit")]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for every randomized step; recorded in all outputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive tagger and generator training data from a parallel corpus.
    #[command(long_about = "Derive tagger and generator training data from a parallel corpus.\n\n\
Input TSV: `toxic<TAB>neutral[<TAB>neutral...]`; the first reference is used.\n\
Tag records (JSON lines): {source, target, tags: [KEEP|DELETE|REPLACE], gaps: [0|1], ops}.\n\
Generator records: the tag record fields plus {template, fills, input, output}.\n\
Both files start with a {\"meta\": ...} line.")]
    Derive(DeriveArgs),
    /// Train the averaged-perceptron tagger on derived tag records.
    TrainTagger(TrainTaggerArgs),
    /// Train the character n-gram toxicity classifier.
    #[command(long_about = "Train the character n-gram toxicity classifier.\n\n\
Input TSV: `text<TAB>label`, label toxic|neutral|1|0.")]
    TrainClf(TrainClfArgs),
    /// Detoxify one sentence per line.
    #[command(after_help = PLUGIN_HELP)]
    Detox(DetoxArgs),
    /// Run the behavioral test battery against a classifier.
    #[command(after_help = PLUGIN_HELP)]
    Checklist(ChecklistArgs),
    /// Compute STA, SIM, FL and J for rewrites.
    #[command(long_about = "Compute STA, SIM, FL and J for rewrites.\n\n\
Input TSV: `source<TAB>output[<TAB>reference...]`.\n\
Report: JSON with per-sample sta/sim/fl arrays, their means and j.", after_help = PLUGIN_HELP)]
    Eval(EvalArgs),
    /// Inter-annotator agreement and majority votes.
    #[command(long_about = "Inter-annotator agreement and majority votes.\n\n\
Input TSV: `sample_id<TAB>worker_id<TAB>answer` with answer 0 or 1; an optional header row starts with `sample_id`.")]
    Agreement(AgreementArgs),
    /// Reference plugins speaking the JSON-lines protocols.
    #[command(hide = true, subcommand)]
    Plugin(PluginCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    TemplateFirst,
    SourceFirst,
}

impl From<Order> for ConcatOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::TemplateFirst => ConcatOrder::TemplateFirst,
            Order::SourceFirst => ConcatOrder::SourceFirst,
        }
    }
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    tags: PathBuf,
    #[arg(long)]
    generator: PathBuf,
    /// Skip the first input row.
    #[arg(long)]
    skip_header: bool,
    /// Align tokens case-insensitively (ё folded to е).
    #[arg(long)]
    case_fold: bool,
    /// Order of template and source in generator inputs.
    #[arg(long, value_enum, default_value = "template-first")]
    order: Order,
}

#[derive(Args)]
struct TrainTaggerArgs {
    /// Tag records written by `derive`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Word list enabling the lexicon feature.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct TrainClfArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    skip_header: bool,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 18)]
    hash_bits: u32,
}

#[derive(Args)]
struct DetoxArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// `keep`, `model:PATH` (trained tagger), `salience:PATH` (labeled TSV),
    /// `extern:CMD` or `file:PATH`.
    #[arg(long, default_value = "keep")]
    tagger: String,
    /// `delete`, `lexicon:PATH` (TSV word → replacements), `extern:CMD` or
    /// `file:PATH`.
    #[arg(long, default_value = "delete")]
    generator: String,
    #[arg(long, value_enum, default_value = "template-first")]
    order: Order,
    /// Salience ratio above which a token is deleted.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    salience_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    salience_smoothing: f64,
}

#[derive(Args)]
struct ChecklistArgs {
    /// `model:PATH`, `const:P`, `extern:CMD` or `file:PATH`.
    #[arg(long)]
    classifier: String,
    /// Labeled TSV the tests are generated from.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    skip_header: bool,
    /// Toxic words, one per line; needed by the lexicon tests.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Comma-separated test names; all by default.
    #[arg(long, value_delimiter = ',')]
    tests: Vec<String>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    skip_header: bool,
    /// Toxicity classifier for STA: `model:PATH`, `const:P`, `extern:CMD` or `file:PATH`.
    #[arg(long)]
    classifier: String,
    /// `chrf`, `const:S`, `extern:CMD` or `file:PATH`.
    #[arg(long, default_value = "chrf")]
    sim: String,
    /// `lm:PATH` (train on reference text, one sentence per line),
    /// `const:S`, `extern:CMD` or `file:PATH`.
    #[arg(long)]
    fluency: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct AgreementArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum PluginCommand {
    /// Tags every token KEEP.
    KeepTagger,
    /// Fills every slot with the masked source words.
    EchoGenerator,
    /// Scores every text with a fixed value.
    ConstScorer {
        #[arg(long)]
        value: f64,
    },
}

const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rec = ErrorRecord {
                error: ErrorBody { kind: "usage", exit_code: EXIT_USAGE, message: e.render().to_string().trim().to_owned() },
            };
            eprintln!("{}", serde_json::to_string(&rec).expect("error record serializes"));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            return report(&Error::Invalid(format!("cannot size thread pool: {e}")));
        }
    }
    match run(cli.command, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    exit_code: u8,
    message: String,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        "io" => EXIT_IO,
        "schema" => EXIT_SCHEMA,
        "protocol" => EXIT_PROTOCOL,
        "script" => EXIT_SCRIPT,
        _ => EXIT_INVALID,
    }
}

fn report(e: &Error) -> ExitCode {
    let code = exit_code(e);
    let rec = ErrorRecord { error: ErrorBody { kind: e.kind(), exit_code: code, message: e.to_string() } };
    eprintln!("{}", serde_json::to_string(&rec).expect("error record serializes"));
    ExitCode::from(code)
}

fn run(command: Command, seed: u64) -> Result<()> {
    match command {
        Command::Derive(a) => derive(a, seed),
        Command::TrainTagger(a) => train_tagger(a, seed),
        Command::TrainClf(a) => train_clf(a, seed),
        Command::Detox(a) => detox(a, seed),
        Command::Checklist(a) => checklist(a, seed),
        Command::Eval(a) => eval(a, seed),
        Command::Agreement(a) => agreement(a, seed),
        Command::Plugin(p) => plugin(p),
    }
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")))
    }
}

fn meta(command: &str, seed: u64, inputs: &[&Path]) -> Result<Meta> {
    inputs.iter().try_fold(Meta::new(command, seed), |m, p| m.with_input(p))
}

fn split_spec(spec: &str) -> (&str, &str) {
    spec.split_once(':').unwrap_or((spec, ""))
}

fn plugin_source(kind: &str, rest: &str) -> Option<PluginSource> {
    match kind {
        "extern" => Some(PluginSource::Command(rest.to_owned())),
        "file" => Some(PluginSource::Responses(PathBuf::from(rest))),
        _ => None,
    }
}

/// Files named by a spec, for up-front checks and input digests.
fn spec_file(spec: &str) -> Option<PathBuf> {
    match split_spec(spec) {
        ("model" | "salience" | "lexicon" | "file" | "lm", rest) if !rest.is_empty() => Some(PathBuf::from(rest)),
        _ => None,
    }
}

fn bad_spec(what: &str, spec: &str) -> Error {
    Error::Invalid(format!("unrecognized {what} spec {spec:?}"))
}

fn parse_unit(what: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| (0.0..=1.0).contains(x))
        .ok_or_else(|| Error::Invalid(format!("{what} constant {v:?} is not a number in [0, 1]")))
}

fn load_tagger(spec: &str, a: &DetoxArgs) -> Result<Box<dyn Tagger>> {
    let (kind, rest) = split_spec(spec);
    if let Some(src) = plugin_source(kind, rest) {
        return Ok(Box::new(ExternalTagger::new(src)));
    }
    match kind {
        "keep" => Ok(Box::new(KeepTagger)),
        "model" => {
            let model: PerceptronModel = dio::read_json(Path::new(rest))?;
            model.check_format()?;
            Ok(Box::new(model))
        }
        "salience" => {
            let corpus = corpus::load_labeled(Path::new(rest), false)?;
            let table = SalienceTable::from_corpus(&corpus, a.salience_smoothing)?;
            Ok(Box::new(SalienceTagger::new(table, a.salience_threshold)))
        }
        _ => Err(bad_spec("tagger", spec)),
    }
}

fn load_generator(spec: &str, order: ConcatOrder) -> Result<Box<dyn Generator>> {
    let (kind, rest) = split_spec(spec);
    if let Some(src) = plugin_source(kind, rest) {
        return Ok(Box::new(ExternalGenerator::new(src, order)));
    }
    match kind {
        "delete" => Ok(Box::new(DeleteGenerator)),
        "lexicon" => Ok(Box::new(LexiconGenerator { lexicon: Lexicon::load(Path::new(rest))? })),
        _ => Err(bad_spec("generator", spec)),
    }
}

fn load_classifier(spec: &str) -> Result<Box<dyn Scorer>> {
    let (kind, rest) = split_spec(spec);
    if let Some(src) = plugin_source(kind, rest) {
        return Ok(Box::new(ExternalScorer::new(src)));
    }
    match kind {
        "model" => {
            let model: ClfModel = dio::read_json(Path::new(rest))?;
            model.check_format()?;
            Ok(Box::new(model))
        }
        "const" => Ok(Box::new(ConstantScorer::new(parse_unit("classifier", rest)?)?)),
        _ => Err(bad_spec("classifier", spec)),
    }
}

fn derive(a: DeriveArgs, seed: u64) -> Result<()> {
    require(&a.input)?;
    let pairs = corpus::load_parallel(&a.input, a.skip_header)?;
    let opts = DeriveOptions { case_fold: a.case_fold, order: a.order.into() };
    let records = build_tagger_records(&pairs, opts.case_fold);
    let generator = build_generator_dataset(&pairs, opts)?;
    let m = meta("derive", seed, &[&a.input])?;
    dio::write_jsonl(&a.tags, &m, &records)?;
    dio::write_jsonl(&a.generator, &m, &generator)
}

fn train_tagger(a: TrainTaggerArgs, seed: u64) -> Result<()> {
    require(&a.input)?;
    let mut inputs = vec![a.input.as_path()];
    let lexicon = match &a.lexicon {
        Some(p) => {
            require(p)?;
            inputs.push(p);
            corpus::load_word_list(p)?
        }
        None => Vec::new(),
    };
    let records: Vec<(usize, EditRecord)> = dio::read_jsonl(&a.input)?;
    let origin = a.input.display().to_string();
    let mut dataset = Vec::with_capacity(records.len());
    for (line, rec) in &records {
        let ex = TaggerExample::from(rec);
        ex.tags.check_len(ex.tokens.len()).map_err(|m| Error::schema(&origin, *line, m))?;
        dataset.push(ex);
    }
    let model = PerceptronModel::train(&dataset, &TrainOptions { epochs: a.epochs, seed, lexicon })?;
    dio::write_json_with_meta(&a.output, &meta("train-tagger", seed, &inputs)?, &model)
}

fn train_clf(a: TrainClfArgs, seed: u64) -> Result<()> {
    require(&a.input)?;
    let data = corpus::load_labeled(&a.input, a.skip_header)?;
    let opts = ClfOptions { seed, epochs: a.epochs, hash_bits: a.hash_bits, ..Default::default() };
    let model = ClfModel::train(&data, &opts)?;
    dio::write_json_with_meta(&a.output, &meta("train-clf", seed, &[&a.input])?, &model)
}

#[derive(Serialize)]
struct DetoxSidecar {
    meta: Meta,
    tagger: String,
    generator: String,
    summary: detox_core::pipeline::RunSummary,
}

fn detox(a: DetoxArgs, seed: u64) -> Result<()> {
    require(&a.input)?;
    let mut inputs = vec![a.input.clone()];
    for spec in [&a.tagger, &a.generator] {
        if let Some(p) = spec_file(spec) {
            require(&p)?;
            inputs.push(p);
        }
    }
    let tagger = load_tagger(&a.tagger, &a)?;
    let generator = load_generator(&a.generator, a.order.into())?;
    let pipeline = Pipeline::new(tagger.as_ref(), generator.as_ref());
    let summary = detoxify_batch(&a.input, &a.output, &pipeline)?;
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let sidecar = DetoxSidecar {
        meta: meta("detox", seed, &refs)?,
        tagger: tagger.name(),
        generator: generator.name(),
        summary,
    };
    let path = dio::meta_sidecar(&a.output);
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn checklist(a: ChecklistArgs, seed: u64) -> Result<()> {
    require(&a.corpus)?;
    let mut inputs = vec![a.corpus.clone()];
    if let Some(p) = spec_file(&a.classifier) {
        require(&p)?;
        inputs.push(p);
    }
    let lexicon = match &a.lexicon {
        Some(p) => {
            require(p)?;
            inputs.push(p.clone());
            ToxicLexicon::new(corpus::load_word_list(p)?)
        }
        None => ToxicLexicon::default(),
    };
    let tests = if a.tests.is_empty() {
        ChecklistTest::ALL.to_vec()
    } else {
        a.tests
            .iter()
            .map(|n| ChecklistTest::from_name(n).ok_or_else(|| Error::Invalid(format!("unknown checklist test {n:?}"))))
            .collect::<Result<_>>()?
    };
    let classifier = load_classifier(&a.classifier)?;
    let data = corpus::load_labeled(&a.corpus, a.skip_header)?;
    if data.is_empty() {
        return Err(Error::Invalid("checklist corpus is empty".into()));
    }
    let report = toxicity::run_checklist(classifier.as_ref(), &data, &tests, &lexicon, seed)?;
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    dio::write_json_with_meta(&a.output, &meta("checklist", seed, &refs)?, &report)
}

fn eval(a: EvalArgs, seed: u64) -> Result<()> {
    require(&a.input)?;
    let mut inputs = vec![a.input.clone()];
    for spec in [&a.classifier, &a.sim, &a.fluency] {
        if let Some(p) = spec_file(spec) {
            require(&p)?;
            inputs.push(p);
        }
    }
    let classifier = load_classifier(&a.classifier)?;
    let sim: Box<dyn PairScorer> = match split_spec(&a.sim) {
        ("chrf", _) => Box::new(ChrF::default()),
        ("const", v) => Box::new(ConstantPairScorer(parse_unit("sim", v)?)),
        (k, rest) => Box::new(ExternalSim::new(plugin_source(k, rest).ok_or_else(|| bad_spec("sim", &a.sim))?)),
    };
    let fluency: Box<dyn Scorer> = match split_spec(&a.fluency) {
        ("lm", path) => Box::new(CharLm::train(&dio::read_lines(Path::new(path))?, seed)?),
        ("const", v) => Box::new(ConstantScorer::new(parse_unit("fluency", v)?)?),
        (k, rest) => {
            Box::new(ExternalScorer::new(plugin_source(k, rest).ok_or_else(|| bad_spec("fluency", &a.fluency))?))
        }
    };
    let rows = evaluation::load_eval_rows(&a.input, a.skip_header)?;
    let report = evaluation::evaluate(&rows, classifier.as_ref(), sim.as_ref(), fluency.as_ref())?;
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    dio::write_json_with_meta(&a.output, &meta("eval", seed, &refs)?, &report)
}

#[derive(Serialize)]
struct AgreementOutput {
    #[serde(flatten)]
    report: evaluation::AgreementReport,
    majority: Option<std::collections::BTreeMap<String, u8>>,
}

fn agreement(a: AgreementArgs, seed: u64) -> Result<()> {
    require(&a.input)?;
    let records = evaluation::load_annotations(&a.input)?;
    let out = AgreementOutput {
        report: evaluation::agreement_report(&records)?,
        majority: evaluation::majority_vote(&records).ok(),
    };
    dio::write_json_with_meta(&a.output, &meta("agreement", seed, &[&a.input])?, &out)
}

/// Serves one JSON-lines plugin protocol over stdin/stdout.
fn serve<Q, R>(respond: impl Fn(Q) -> R) -> Result<()>
where
    Q: serde::de::DeserializeOwned,
    R: Serialize,
{
    let stdin = std::io::stdin();
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    let stdio = || PathBuf::from("<stdio>");
    for (idx, line) in stdin.lock().lines().enumerate() {
        let line = line.map_err(|e| Error::io(stdio(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Q = serde_json::from_str(&line).map_err(|e| Error::schema("<stdin>", idx + 1, e.to_string()))?;
        let resp = serde_json::to_string(&respond(req)).expect("response serializes");
        writeln!(out, "{resp}").map_err(|e| Error::io(stdio(), e))?;
    }
    out.flush().map_err(|e| Error::io(stdio(), e))
}

fn plugin(p: PluginCommand) -> Result<()> {
    match p {
        PluginCommand::KeepTagger => serve(|r: TagRequest| {
            let n = r.tokens.len();
            TagResponse { id: r.id, tags: TagSequence::all_keep(n).token_tags, gaps: vec![0; n + 1] }
        }),
        PluginCommand::EchoGenerator => serve(|r: FillRecord| FillResponse {
            id: r.id,
            fills: r.masked_spans.iter().map(|s| detox_core::text::detokenize(s)).collect(),
            hypotheses: Vec::new(),
        }),
        PluginCommand::ConstScorer { value } => {
            let value = parse_unit("scorer", &value.to_string())?;
            serve(move |r: ScoreRequest| ScoreResponse { id: r.id, score: value })
        }
    }
}
