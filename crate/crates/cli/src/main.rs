mod interactive;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use adasum::concepts::ConceptUnit;
use adasum::corpus::{load_corpus, Corpus, CorpusFormat};
use adasum::harness::{evaluate_candidates, fixture_dir, run_experiment, Dataset, ExperimentSpec, OracleKind};
use adasum::optimizer::{Budget, ScoringMode, SolverConfig, SolverKind, DEFAULT_EXACT_CAP};
use adasum::oracle::{ReferenceSet, RougeProtocol};
use adasum::rouge::{RougeConfig, RougeMode, RougeVariant};
use adasum::session::{Session, SessionConfig};
use adasum_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "adasum", version, about = "Interactive concept-based extractive summarization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus and print its statistics.
    Ingest(IngestArgs),
    /// One-shot summary without feedback.
    Summarize(SummarizeArgs),
    /// Refine a summary by answering concept queries in the terminal.
    Interactive(InteractiveArgs),
    /// Run simulated-feedback experiments over a dataset directory.
    Simulate(SimulateArgs),
    /// Score candidate summaries against reference summaries.
    Eval(EvalArgs),
    /// Start the HTTP session API.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Unigram,
    Bigram,
    Sentence,
}

impl From<UnitArg> for ConceptUnit {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Unigram => ConceptUnit::Unigram,
            UnitArg::Bigram => ConceptUnit::Bigram,
            UnitArg::Sentence => ConceptUnit::Sentence,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoringArg {
    Coverage,
    Occurrence,
}

impl From<ScoringArg> for ScoringMode {
    fn from(s: ScoringArg) -> Self {
        match s {
            ScoringArg::Coverage => ScoringMode::Coverage,
            ScoringArg::Occurrence => ScoringMode::Occurrence,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Auto,
    Exact,
    Greedy,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => SolverKind::Auto,
            SolverArg::Exact => SolverKind::Exact,
            SolverArg::Greedy => SolverKind::Greedy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    PlainDir,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Reference,
    Keyword,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Rouge1,
    Rouge2,
    #[value(name = "rougeL", alias = "rougel")]
    RougeL,
}

impl From<VariantArg> for RougeVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Rouge1 => RougeVariant::Rouge1,
            VariantArg::Rouge2 => RougeVariant::Rouge2,
            VariantArg::RougeL => RougeVariant::RougeL,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "limited-recall-75", alias = "limited-recall75")]
    LimitedRecall75,
    FullF1,
}

impl From<ModeArg> for RougeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::LimitedRecall75 => RougeMode::LimitedRecall75,
            ModeArg::FullF1 => RougeMode::FullF1,
        }
    }
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file (one JSON document per line) or a directory of .txt files.
    #[arg(long)]
    corpus: PathBuf,
    /// Defaults to plain-dir for directories and jsonl otherwise.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Overrides the cluster id taken from the file or directory name.
    #[arg(long)]
    cluster_id: Option<String>,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus, Failure> {
        load_corpus_from(&self.corpus, self.format, self.cluster_id.as_deref())
    }
}

fn load_corpus_from(path: &Path, format: Option<FormatArg>, cluster_id: Option<&str>) -> Result<Corpus, Failure> {
    let format = match format {
        Some(FormatArg::Jsonl) => CorpusFormat::Jsonl,
        Some(FormatArg::PlainDir) => CorpusFormat::PlainDir,
        None if path.is_dir() => CorpusFormat::PlainDir,
        None => CorpusFormat::Jsonl,
    };
    let mut corpus = load_corpus(path, format).map_err(data)?;
    if let Some(id) = cluster_id {
        corpus.cluster_id = id.to_string();
    }
    Ok(corpus)
}

#[derive(Args)]
#[group(multiple = false)]
struct BudgetArgs {
    /// Word budget (default 75).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    budget_words: Option<u64>,
    /// Sentence budget.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    budget_sentences: Option<u64>,
}

impl BudgetArgs {
    fn budget(&self) -> Budget {
        match (self.budget_words, self.budget_sentences) {
            (_, Some(n)) => Budget::sentences(n as usize),
            (Some(n), _) => Budget::words(n as usize),
            (None, None) => Budget::words(75),
        }
        .expect("limit checked by the parser")
    }
}

#[derive(Args)]
struct SessionArgs {
    #[arg(long, value_enum, default_value = "unigram")]
    unit: UnitArg,
    #[arg(long, value_enum, default_value = "coverage")]
    scoring: ScoringArg,
    /// Concepts asked per iteration.
    #[arg(long, default_value_t = 10)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    max_iterations: usize,
    #[arg(long, value_enum, default_value = "auto")]
    solver: SolverArg,
    /// Largest instance (in sentences) the auto solver solves exactly.
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: usize,
}

impl SessionArgs {
    fn solver(&self) -> SolverConfig {
        SolverConfig { kind: self.solver.into(), exact_cap: self.exact_cap }
    }

    fn config(&self, budget: Budget) -> SessionConfig {
        SessionConfig {
            unit: self.unit.into(),
            budget,
            scoring: self.scoring.into(),
            query_batch_size: self.batch_size,
            max_iterations: self.max_iterations,
            solver: self.solver(),
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Also print one record per sentence.
    #[arg(long)]
    sentences: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    session: SessionArgs,
    /// Print the structured export instead of plain sentences.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct InteractiveArgs {
    /// Corpus file or directory; not needed with --resume.
    #[arg(long, required_unless_present = "resume")]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    cluster_id: Option<String>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    session: SessionArgs,
    /// Session file written after every iteration.
    #[arg(long)]
    save: Option<PathBuf>,
    /// Continue a saved session.
    #[arg(long, conflicts_with = "corpus")]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Dataset directory with corpus/, refs/ and optionally keywords.jsonl.
    /// Defaults to the bundled fixture.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "reference")]
    oracle: OracleArg,
    /// Concept units to run; repeatable.
    #[arg(long, value_enum)]
    unit: Vec<UnitArg>,
    /// Word budgets to run; repeatable.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    budget_words: Vec<u64>,
    /// Sentence budgets to run; repeatable.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    budget_sentences: Vec<u64>,
    /// Scoring modes to run; repeatable.
    #[arg(long, value_enum)]
    scoring: Vec<ScoringArg>,
    #[arg(long, default_value_t = 10)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    max_iterations: usize,
    #[arg(long, value_enum, default_value = "limited-recall-75")]
    rouge_mode: ModeArg,
    #[arg(long)]
    no_stem: bool,
    /// Report file; without it the report goes to stdout and the table to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Candidate summary file, or a directory of `<cluster>.txt` files.
    #[arg(long)]
    candidate: PathBuf,
    /// Reference directory laid out as `<cluster>/ref_*.txt`.
    #[arg(long)]
    refs: PathBuf,
    /// Cluster of a single candidate file (default: the file stem).
    #[arg(long)]
    cluster: Option<String>,
    #[arg(long, value_enum, default_value = "rouge1")]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "limited-recall-75")]
    mode: ModeArg,
    #[arg(long)]
    no_stem: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// Overrides ADASUM_BIND.
    #[arg(long)]
    bind: Option<std::net::IpAddr>,
    /// Overrides ADASUM_PORT.
    #[arg(long)]
    port: Option<u16>,
    /// Overrides ADASUM_CORPUS_CAP_BYTES.
    #[arg(long)]
    corpus_cap_bytes: Option<usize>,
    /// Overrides ADASUM_EXACT_CAP.
    #[arg(long)]
    exact_cap: Option<usize>,
}

enum Failure {
    Usage(String),
    Data(String),
}

fn data(e: impl Display) -> Failure {
    Failure::Data(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // --help and --version also come through here.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Summarize(a) => summarize(a),
        Command::Interactive(a) => interactive(a),
        Command::Simulate(a) => simulate(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
    }
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(data)?;
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct IngestReport {
    cluster_id: String,
    num_documents: usize,
    num_sentences: usize,
    total_words: usize,
    content_hash: String,
}

#[derive(Serialize)]
struct SentenceRecord<'a> {
    sent_id: usize,
    doc_id: &'a str,
    length_words: usize,
    text: &'a str,
}

fn ingest(a: IngestArgs) -> Result<(), Failure> {
    let corpus = a.corpus.load()?;
    print_json(&IngestReport {
        cluster_id: corpus.cluster_id.clone(),
        num_documents: corpus.num_documents(),
        num_sentences: corpus.num_sentences(),
        total_words: corpus.total_words(),
        content_hash: corpus.content_hash(),
    })?;
    if a.sentences {
        for s in corpus.sentences() {
            let record = SentenceRecord {
                sent_id: s.sent_id,
                doc_id: &s.doc_id,
                length_words: s.length_words,
                text: &s.text,
            };
            println!("{}", serde_json::to_string(&record).map_err(data)?);
        }
    }
    Ok(())
}

fn summarize(a: SummarizeArgs) -> Result<(), Failure> {
    let corpus = Arc::new(a.corpus.load()?);
    let session = Session::start(corpus, a.session.config(a.budget.budget())).map_err(config_error)?;
    if a.json {
        print_json(&session.export())
    } else {
        println!("{}", session.summary_text());
        Ok(())
    }
}

/// Bad session settings are flag problems; everything else is data.
fn config_error(e: adasum::session::SessionError) -> Failure {
    match e {
        adasum::session::SessionError::Config { .. } => Failure::Usage(e.to_string()),
        other => data(other),
    }
}

fn interactive(a: InteractiveArgs) -> Result<(), Failure> {
    let session = match (&a.resume, &a.corpus) {
        (Some(path), _) => Session::load(path).map_err(data)?,
        (None, Some(path)) => {
            let corpus = load_corpus_from(path, a.format, a.cluster_id.as_deref())?;
            Session::start(Arc::new(corpus), a.session.config(a.budget.budget())).map_err(config_error)?
        }
        (None, None) => return Err(Failure::Usage("--corpus or --resume is required".into())),
    };
    let stdin = io::stdin();
    let stdout = io::stdout();
    interactive::run(session, &mut stdin.lock(), &mut stdout.lock(), a.save.as_deref()).map_err(data)
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let dir = a.data.unwrap_or_else(fixture_dir);
    let dataset = Dataset::load(&dir).map_err(data)?;
    let mut budgets: Vec<Budget> = a.budget_words.iter().map(|&n| Budget::words(n as usize)).collect::<Result<_, _>>().map_err(data)?;
    for &n in &a.budget_sentences {
        budgets.push(Budget::sentences(n as usize).map_err(data)?);
    }
    let defaults = ExperimentSpec::default();
    let spec = ExperimentSpec {
        oracle: match a.oracle {
            OracleArg::Reference => OracleKind::Reference,
            OracleArg::Keyword => OracleKind::Keyword,
        },
        units: if a.unit.is_empty() { defaults.units.clone() } else { a.unit.iter().map(|&u| u.into()).collect() },
        budgets: if budgets.is_empty() { defaults.budgets.clone() } else { budgets },
        scorings: if a.scoring.is_empty() { defaults.scorings.clone() } else { a.scoring.iter().map(|&s| s.into()).collect() },
        rouge: RougeProtocol { mode: a.rouge_mode.into(), stemming: !a.no_stem },
        query_batch_size: a.batch_size,
        max_iterations: a.max_iterations,
        ..defaults
    };
    if spec.query_batch_size == 0 || spec.max_iterations == 0 {
        return Err(Failure::Usage("--batch-size and --max-iterations must be at least 1".into()));
    }
    let report = run_experiment(&dataset, &spec).map_err(data)?;
    let jsonl = report.to_jsonl();
    let table = report.summary_table();
    match a.out {
        Some(path) => {
            fs::write(&path, jsonl).map_err(|e| data(format!("{}: {e}", path.display())))?;
            print!("{table}");
        }
        None => {
            io::stdout().write_all(jsonl.as_bytes()).map_err(data)?;
            eprint!("{table}");
        }
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let refs = ReferenceSet::load_dir(&a.refs).map_err(data)?;
    let mut candidates = BTreeMap::new();
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| data(format!("{}: {e}", p.display())));
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if a.candidate.is_dir() {
        if a.cluster.is_some() {
            return Err(Failure::Usage("--cluster applies to a single candidate file".into()));
        }
        let entries = fs::read_dir(&a.candidate).map_err(|e| data(format!("{}: {e}", a.candidate.display())))?;
        for entry in entries {
            let path = entry.map_err(data)?.path();
            if path.extension().is_some_and(|x| x == "txt") {
                candidates.insert(stem(&path), read(&path)?);
            }
        }
        if candidates.is_empty() {
            return Err(data(format!("no .txt candidates in {}", a.candidate.display())));
        }
    } else {
        let cluster = a.cluster.clone().unwrap_or_else(|| stem(&a.candidate));
        candidates.insert(cluster, read(&a.candidate)?);
    }
    let config = RougeConfig::new(a.variant.into(), a.mode.into()).with_stemming(!a.no_stem);
    print_json(&evaluate_candidates(&candidates, &refs, config).map_err(data)?)
}

fn serve(a: ServeArgs) -> Result<(), Failure> {
    let mut config = ServiceConfig::from_env().map_err(Failure::Usage)?;
    if let Some(b) = a.bind {
        config.bind = b;
    }
    if let Some(p) = a.port {
        config.port = p;
    }
    if let Some(c) = a.corpus_cap_bytes {
        config.corpus_cap_bytes = c;
    }
    if let Some(c) = a.exact_cap {
        config.exact_cap = c;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(data)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(config.addr()).await.map_err(|e| data(format!("{}: {e}", config.addr())))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(data)?);
        adasum_service::serve_on(listener, config).await.map_err(data)
    })
}
