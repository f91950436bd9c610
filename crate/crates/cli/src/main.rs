use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use isoforge::analysis::{
    compliance_proportion, emit_match_table, emit_report, match_mismatch_table, ratios_by_sentence, write_report,
    AnalysisError, ConditionRuns, PairedTest, ReportFormat, TestKind,
};
use isoforge::corpus::{dataset_stats, load_parallel, read_lines};
use isoforge::experiment::{
    attach_qe, run_matrix, select_from_cell, BackendKind, CellRun, Chooser, ExperimentConfig, ExperimentData,
    ExperimentError, MatrixRun,
};
use isoforge::gateway::GatewayError;
use isoforge::metrics::{corpus_bleu, length_metrics, BleuConfig};
use isoforge::par::Execution;
use isoforge::pools::{build_pool, sample_by_id, sample_shots, PoolType, DEFAULT_POOL_CAP};
use isoforge::prompt::{language_name, render, PromptConfig, PromptType};
use isoforge::selection::{escalating_policy, GenerationSetup, SelectionError};

mod error;

use error::CliError;

#[derive(Parser)]
#[command(name = "isoforge", version, about = "Length-controlled translation experiments with prompted LLMs")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Length statistics of a parallel corpus.
    Stats(StatsArgs),
    /// Build demonstration pools and write one JSON file per pool.
    BuildPools(BuildPoolsArgs),
    /// Print the prompt for one sentence.
    Render(RenderArgs),
    /// Run the experiment matrix and write the report grid.
    Run(RunArgs),
    /// Best-of-k selection with the configured quality scorer.
    Select(SelectArgs),
    /// Best-of-k selection by sentence BLEU against the reference.
    Oracle(SelectArgs),
    /// Match/mismatch significance or compliance among default failures.
    Analyze(AnalyzeArgs),
    /// Rebuild the report grid from the cache without calling the backend.
    Report(ReportArgs),
    /// Regenerate until compliant, switching to the Tiny pool after the default budget.
    Escalate(EscalateArgs),
    /// Length ratio, compliance and BLEU of a hypothesis file.
    Score(ScoreArgs),
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildPoolsArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, default_value = "pools")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_POOL_CAP)]
    cap: usize,
    /// Comma-separated pool types; all five by default.
    #[arg(long, value_delimiter = ',')]
    pools: Vec<PoolType>,
}

#[derive(Args)]
struct RenderArgs {
    /// Sentence to translate.
    #[arg(long)]
    sentence: String,
    #[arg(long, default_value = "en-de")]
    language_pair: String,
    #[arg(long, default_value = "random")]
    prompt_type: PromptType,
    #[arg(long, default_value_t = 0)]
    shots: usize,
    /// Pool to draw shots from; defaults to the one matching the prompt type.
    #[arg(long)]
    pool: Option<PoolType>,
    #[arg(long)]
    demo_src: Option<PathBuf>,
    #[arg(long)]
    demo_tgt: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    run: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_POOL_CAP)]
    cap: usize,
    #[arg(long)]
    unrestricted: bool,
    /// Use the uncontrolled instruction regardless of prompt type.
    #[arg(long)]
    mismatched: bool,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pools: Option<Vec<PoolType>>,
    #[arg(long, value_delimiter = ',')]
    shots: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    backend: Option<BackendArg>,
    #[arg(long)]
    backend_url: Option<String>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    reports_dir: Option<PathBuf>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Drop everything after the first newline, even a blank first line.
    #[arg(long)]
    strict_truncation: bool,
    #[arg(long)]
    mismatched: bool,
    #[arg(long)]
    unrestricted: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Http,
    Mock,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(v) = &self.models {
            cfg.models = v.clone();
        }
        if let Some(v) = &self.pools {
            cfg.pool_types = v.clone();
        }
        if let Some(v) = &self.shots {
            cfg.shots = v.clone();
        }
        if let Some(v) = self.runs {
            cfg.runs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.backend {
            cfg.backend.kind = match v {
                BackendArg::Http => BackendKind::Http,
                BackendArg::Mock => BackendKind::Mock,
            };
        }
        if let Some(v) = &self.backend_url {
            cfg.backend.url = Some(v.clone());
        }
        if let Some(v) = &self.cache_dir {
            cfg.cache_dir = v.clone();
        }
        if let Some(v) = &self.reports_dir {
            cfg.reports_dir = v.clone();
        }
        if let Some(v) = self.max_in_flight {
            cfg.backend.max_in_flight = v;
        }
        cfg.strict_truncation |= self.strict_truncation;
        if self.mismatched {
            cfg.matched = false;
        }
        if self.unrestricted {
            cfg.restricted = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Print the resolved cell matrix and exit.
    #[arg(long)]
    dry_run: bool,
    /// Also score every output with the configured quality scorer.
    #[arg(long)]
    qe: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    qe: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    pool: Option<PoolType>,
    #[arg(long = "cell-shots")]
    cell_shots: Option<usize>,
    /// Candidate counts; candidates are the first k runs. Default: 1,3,5,10 up to the run count.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalysisKind {
    Match,
    Compliance,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum, default_value = "match")]
    kind: AnalysisKind,
    #[arg(long, default_value = "permutation")]
    test: TestKind,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    /// Alternative attempts per sentence for the compliance analysis.
    #[arg(long, default_value_t = 10)]
    attempts: usize,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
}

#[derive(Args)]
struct EscalateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    model: Option<String>,
    /// Shot count; defaults to the largest in the config.
    #[arg(long = "cell-shots")]
    cell_shots: Option<usize>,
    #[arg(long, default_value_t = 1)]
    budget_default: usize,
    #[arg(long, default_value_t = 2)]
    budget_tiny: usize,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Stats(a) => stats(a),
        Command::BuildPools(a) => build_pools(a),
        Command::Render(a) => render_cmd(a),
        Command::Run(a) => run(a),
        Command::Select(a) => select(a, false),
        Command::Oracle(a) => select(a, true),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        Command::Escalate(a) => escalate(a),
        Command::Score(a) => score(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            fs::write(p, text).map_err(|e| CliError::io(p, e))
        }
        None => {
            print!("{text}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    let samples = load_parallel(&a.src, &a.tgt)?;
    let s = dataset_stats(&samples)?;
    emit(a.out.as_deref(), &format!("{}\n{}\n", isoforge::corpus::DatasetStats::csv_header(), s.csv_row()))
}

fn build_pools(a: BuildPoolsArgs) -> Result<(), CliError> {
    let samples = load_parallel(&a.src, &a.tgt)?;
    let types = if a.pools.is_empty() { PoolType::ALL.to_vec() } else { a.pools };
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    println!("pool_type,n,min,max,mean,std");
    for t in types {
        let pool = build_pool(&samples, t, a.cap)?;
        let summary = pool.summary();
        let path = a.out.join(format!("{}.json", t.as_str().to_ascii_lowercase()));
        let json = serde_json::to_string_pretty(&summary).expect("serializable");
        fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))?;
        println!("{},{},{},{},{},{}", t, summary.n, summary.min, summary.max, summary.mean, summary.std);
    }
    Ok(())
}

fn render_cmd(a: RenderArgs) -> Result<(), CliError> {
    let (s, t) = a
        .language_pair
        .split_once('-')
        .ok_or_else(|| CliError::Config("language pair must look like en-de".into()))?;
    let name = |c: &str| language_name(c).ok_or_else(|| CliError::Config(format!("unknown language code {c:?}")));
    let config = PromptConfig::new(name(s)?, name(t)?, a.prompt_type)
        .with_shots(a.shots)
        .restricted(!a.unrestricted)
        .matched(!a.mismatched);
    let spec = if a.shots == 0 {
        render(&config, [], &a.sentence)?
    } else {
        let (Some(ds), Some(dt)) = (&a.demo_src, &a.demo_tgt) else {
            return Err(CliError::Config("few-shot rendering needs --demo-src and --demo-tgt".into()));
        };
        let demos = load_parallel(ds, dt)?;
        let pool_type = a.pool.unwrap_or(match a.prompt_type {
            PromptType::Random => PoolType::Random,
            PromptType::Isometric => PoolType::Isometric,
            PromptType::Same => PoolType::Same,
            PromptType::ShortTiny => PoolType::Tiny,
        });
        let pool = build_pool(&demos, pool_type, a.cap)?;
        let ids = sample_shots(&pool, a.shots, a.run, a.seed)?;
        render(&config, ids.iter().map(|id| sample_by_id(&demos, *id)), &a.sentence)?
    };
    println!("{}", spec.text);
    Ok(())
}

fn print_dry_run(cfg: &ExperimentConfig, n: usize) -> Result<(), CliError> {
    println!("model,pool_type,shots,prompt_type,runs,requests");
    let cells = cfg.cells();
    for c in &cells {
        let prompt = cfg.prompt_config(c.pool, c.shots)?;
        println!("{},{},{},{},{},{}", c.model, c.pool, c.shots, prompt.instruction(), cfg.runs, cfg.runs * n);
    }
    println!(
        "# {} cells, {} requests, backend {} ({:?}), cache {}",
        cells.len(),
        cells.len() * cfg.runs * n,
        cfg.backend.id(),
        cfg.backend.kind,
        cfg.cache_dir.display()
    );
    Ok(())
}

fn write_grid(cfg: &ExperimentConfig, matrix: &MatrixRun) -> Result<(), CliError> {
    let rows = matrix.rows();
    let dir = cfg.reports_dir.join(&cfg.name);
    for format in [ReportFormat::Csv, ReportFormat::Markdown] {
        let text = emit_report(&rows, format)?;
        let path = write_report(&dir, "grid", &text, format)?;
        eprintln!("wrote {}", path.display());
        if format == ReportFormat::Csv {
            print!("{text}");
        }
    }
    Ok(())
}

fn check_failures(matrix: &MatrixRun) -> Result<(), CliError> {
    let mut first: Option<GatewayError> = None;
    let mut count = 0;
    for (cell, f) in matrix.failures() {
        count += 1;
        if count <= 5 {
            warn!("{cell} sentence {} run {}: {}", f.sentence_id, f.run_index, f.error);
        }
        first.get_or_insert_with(|| f.error.clone());
    }
    match first {
        Some(e) if matrix.backend_exhausted() => Err(CliError::Backend(format!("{count} generations failed; first: {e}"))),
        Some(e) => {
            eprintln!("warning: {count} generations failed; first: {e}");
            Ok(())
        }
        None => Ok(()),
    }
}

fn run(a: RunArgs) -> Result<(), CliError> {
    let cfg = a.config.load()?;
    let data = ExperimentData::load(&cfg)?;
    if a.dry_run {
        return print_dry_run(&cfg, data.test.len());
    }
    let gateway = cfg.gateway();
    let mut matrix = run_matrix(&cfg, &data, &gateway)?;
    if a.qe {
        let scorer = cfg.scorer.connect()?;
        attach_qe(&mut matrix, &data, scorer.as_ref())?;
    }
    write_grid(&cfg, &matrix)?;
    eprintln!("{} backend calls", gateway.backend_calls());
    check_failures(&matrix)
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let cfg = a.config.load()?;
    let data = ExperimentData::load(&cfg)?;
    let gateway = cfg.replay_gateway();
    let mut matrix = run_matrix(&cfg, &data, &gateway)?;
    if a.qe {
        let scorer = cfg.scorer.connect()?;
        attach_qe(&mut matrix, &data, scorer.as_ref())?;
    }
    let missing = matrix.failures().count();
    if missing > 0 {
        eprintln!("warning: {missing} generations are not in the cache; their cells are left empty");
    }
    write_grid(&cfg, &matrix)
}

/// Runs (or replays) a single cell of the matrix.
fn one_cell(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    model: Option<String>,
    pool: PoolType,
    shots: usize,
) -> Result<CellRun, CliError> {
    let mut single = cfg.clone();
    single.models = vec![model.unwrap_or_else(|| cfg.models[0].clone())];
    single.pool_types = vec![pool];
    single.shots = vec![shots];
    let gateway = single.gateway();
    let matrix = run_matrix(&single, data, &gateway)?;
    check_failures(&matrix)?;
    Ok(matrix.cells.into_iter().next().expect("one cell"))
}

fn select(a: SelectArgs, oracle: bool) -> Result<(), CliError> {
    let cfg = a.config.load()?;
    let pool = a.pool.unwrap_or(cfg.pool_types[0]);
    let shots = a.cell_shots.unwrap_or(*cfg.shots.iter().max().expect("validated"));
    let mut data_cfg = cfg.clone();
    data_cfg.pool_types = vec![pool];
    let data = ExperimentData::load(&data_cfg)?;
    let cell = one_cell(&cfg, &data, a.model, pool, shots)?;
    let scorer = if oracle { None } else { Some(cfg.scorer.connect()?) };
    let chooser = match &scorer {
        Some(s) => Chooser::Qe(s.as_ref()),
        None => Chooser::OracleBleu,
    };
    let mut out = String::from("k,lr,lc,bleu,mean_score,fallbacks\n");
    let ks = if a.k.is_empty() {
        [1, 3, 5, 10].into_iter().filter(|k| *k <= cfg.runs).collect()
    } else {
        a.k
    };
    for k in ks {
        let (_, s) = select_from_cell(&cell, &data, k, chooser)?;
        out.push_str(&format!("{},{},{},{},{},{}\n", s.k, s.lr, s.lc, s.bleu, s.mean_score, s.fallbacks));
    }
    let name = format!(
        "{}-{}-{}-{}",
        if oracle { "oracle" } else { "select" },
        cell.spec.model.replace('/', "_"),
        pool.as_str().to_ascii_lowercase(),
        shots
    );
    write_report(&cfg.reports_dir.join(&cfg.name), &name, &out, ReportFormat::Csv)?;
    print!("{out}");
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let cfg = a.config.load()?;
    let data = ExperimentData::load(&cfg)?;
    let sources = data.sources();
    let (text, name) = match a.kind {
        AnalysisKind::Match => {
            let mut matched_cfg = cfg.clone();
            matched_cfg.matched = true;
            let mut mismatched_cfg = cfg.clone();
            mismatched_cfg.matched = false;
            let m = run_matrix(&matched_cfg, &data, &matched_cfg.gateway())?;
            check_failures(&m)?;
            let mm = run_matrix(&mismatched_cfg, &data, &mismatched_cfg.gateway())?;
            check_failures(&mm)?;
            let conditions = |run: &MatrixRun| -> Vec<ConditionRuns> {
                run.cells
                    .iter()
                    .map(|c| {
                        let records: Vec<_> = c.present().cloned().collect();
                        let label = format!("{}@{}", c.spec.model, c.spec.shots);
                        ConditionRuns::from_records(label, c.spec.pool, &sources, &records)
                    })
                    .collect()
            };
            let test = PairedTest {
                kind: a.test,
                resamples: a.resamples,
                ..PairedTest::default()
            };
            let rows = match_mismatch_table(&conditions(&m), &conditions(&mm), a.alpha, &test, Execution::default())?;
            (emit_match_table(&rows, a.format)?, "match-mismatch")
        }
        AnalysisKind::Compliance => {
            let mut default_cfg = cfg.clone();
            default_cfg.pool_types = vec![PoolType::Random];
            default_cfg.matched = true;
            let default_run = run_matrix(&default_cfg, &data, &default_cfg.gateway())?;
            check_failures(&default_run)?;
            let alt_run = run_matrix(&cfg, &data, &cfg.gateway())?;
            check_failures(&alt_run)?;
            let mut out = String::from("model,shots,pool_type,attempts,failures,hits,percent\n");
            for model in &cfg.models {
                for shots in &cfg.shots {
                    let d = default_run.cell(model, PoolType::Random, *shots).expect("cell ran");
                    let d_ratios = ratios_by_sentence(&sources, &d.present().cloned().collect::<Vec<_>>());
                    for pool in &cfg.pool_types {
                        let alt = alt_run.cell(model, *pool, *shots).expect("cell ran");
                        let alt_ratios = ratios_by_sentence(&sources, &alt.present().cloned().collect::<Vec<_>>());
                        match compliance_proportion(&d_ratios, &alt_ratios, a.attempts) {
                            Ok(p) => out.push_str(&format!(
                                "{model},{shots},{pool},{},{},{},{}\n",
                                a.attempts, p.failures, p.hits, p.percent
                            )),
                            Err(AnalysisError::EmptyFailureSet) => {
                                out.push_str(&format!("{model},{shots},{pool},{},0,0,\n", a.attempts))
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
            (out, "compliance")
        }
    };
    let format = if matches!(a.kind, AnalysisKind::Compliance) { ReportFormat::Csv } else { a.format };
    write_report(&cfg.reports_dir.join(&cfg.name), name, &text, format)?;
    print!("{text}");
    Ok(())
}

fn escalate(a: EscalateArgs) -> Result<(), CliError> {
    let mut cfg = a.config.load()?;
    cfg.pool_types = vec![PoolType::Random, PoolType::Tiny];
    let data = ExperimentData::load(&cfg)?;
    let model = a.model.unwrap_or_else(|| cfg.models[0].clone());
    let shots = a.cell_shots.unwrap_or(*cfg.shots.iter().max().expect("validated"));
    let gateway = cfg.gateway();
    let default_prompt = cfg.prompt_config(PoolType::Random, shots)?;
    let tiny_prompt = cfg.prompt_config(PoolType::Tiny, shots)?;
    let default = GenerationSetup {
        gateway: &gateway,
        model: &model,
        demos: &data.demos,
        pool: &data.pools[&PoolType::Random],
        prompt: &default_prompt,
        seed: cfg.seed,
    };
    let tiny = GenerationSetup {
        pool: &data.pools[&PoolType::Tiny],
        prompt: &tiny_prompt,
        ..default
    };
    let mut out = String::from("sentence_id,attempts,escalated,success,output\n");
    let (mut ok, mut attempts) = (0, 0);
    for s in &data.test {
        let r = escalating_policy(&default, &tiny, s.id, &s.source, a.budget_default, a.budget_tiny)
            .map_err(|f| CliError::from(f.error))?;
        ok += r.success as usize;
        attempts += r.records.len();
        let last = r.records.last().map(|r| r.truncated_output.as_str()).unwrap_or("");
        out.push_str(&format!(
            "{},{},{},{},\"{}\"\n",
            s.id,
            r.records.len(),
            r.escalated,
            r.success,
            last.replace('"', "\"\"")
        ));
    }
    write_report(&cfg.reports_dir.join(&cfg.name), "escalate", &out, ReportFormat::Csv)?;
    let n = data.test.len();
    println!(
        "success_rate,{}\nmean_attempts,{}\nsentences,{n}",
        ok as f64 / n as f64,
        attempts as f64 / n as f64
    );
    Ok(())
}

fn score(a: ScoreArgs) -> Result<(), CliError> {
    let hyp = read_lines(&a.hyp)?;
    let refs = read_lines(&a.reference)?;
    let src = read_lines(&a.src)?;
    if hyp.len() != refs.len() || hyp.len() != src.len() {
        return Err(CliError::Config(format!(
            "line counts differ: {} hypotheses, {} references, {} sources",
            hyp.len(),
            refs.len(),
            src.len()
        )));
    }
    let pairs: Vec<(&str, &str)> = src.iter().map(String::as_str).zip(hyp.iter().map(String::as_str)).collect();
    let len = length_metrics(&pairs)?;
    let config = BleuConfig::default();
    let bleu = corpus_bleu(&hyp, &refs, &config)?;
    let text = format!(
        "lr,lr_std,lc,bleu\n{},{},{},{}\n# {}\n",
        len.lr,
        len.lr_std,
        len.lc,
        bleu.score,
        config.signature()
    );
    emit(a.out.as_deref(), &text)
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) | ExperimentError::Corpus(_) | ExperimentError::Pool(_) | ExperimentError::Prompt(_) => {
                CliError::Config(e.to_string())
            }
            ExperimentError::Gateway(g) => g.into(),
            ExperimentError::Selection(s) => s.into(),
            ExperimentError::Metrics(m) => CliError::Other(m.to_string()),
        }
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        match e {
            s if s.is_scorer_failure() => CliError::Scorer(s.to_string()),
            SelectionError::Gateway(g) => g.into(),
            SelectionError::Pool(p) => CliError::Config(p.to_string()),
            SelectionError::Prompt(p) => CliError::Config(p.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}
