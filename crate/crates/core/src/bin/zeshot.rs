use std::fmt::Write as _;
use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use zeshot::backend::conformance::{all_passed, check_embedder, check_generator, Check};
use zeshot::backend::mock::MockConfig;
use zeshot::backend::server::MockBackends;
use zeshot::backend::{
    AnswerGenerator, BackendEndpoint, HttpEmbedder, HttpGenerator, ImageRef, MockEmbedder,
    MockGenerator, TextEmbedder,
};
use zeshot::eval::dataset::convert_floodnet;
use zeshot::eval::{emit_report, evaluate, load_dataset, EvalOptions, ReportFormat};
use zeshot::service::{serve, ServiceConfig};
use zeshot::{AnswerRecord, Pipeline, QuestionBank};

#[derive(Parser)]
#[command(
    name = "zeshot",
    version,
    about = "Zero-shot visual question answering with answer mapping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ask one question about one image.
    Ask(AskArgs),
    /// Evaluate a dataset and write a per-category accuracy report.
    Eval(EvalArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve the deterministic mock backends over the wire protocol.
    MockBackends {
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// JSON mock configuration: {"generator": {"default", "entries"}, "embedder": {"aliases"}}.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Require this bearer token on every request.
        #[arg(long)]
        token: Option<String>,
    },
    /// Run the wire-protocol conformance checks against backends.
    Conformance {
        #[arg(long)]
        generator_url: Option<String>,
        #[arg(long)]
        embedder_url: Option<String>,
        #[arg(long)]
        token: Option<String>,
    },
    /// Convert FloodNet VQA annotations into a dataset document.
    ConvertFloodnet {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        image_root: PathBuf,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BackendArgs {
    /// Question bank document; defaults to the bundled reference bank.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    generator_url: Option<String>,
    #[arg(long)]
    embedder_url: Option<String>,
    /// Use the in-process mocks configured by this JSON file instead of remote backends.
    #[arg(long, conflicts_with_all = ["generator_url", "embedder_url"])]
    mock: Option<PathBuf>,
    #[arg(long, default_value_t = zeshot::backend::DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    /// Bearer token sent to both backends.
    #[arg(long)]
    token: Option<String>,
    /// Embedding cache entries; 0 disables the cache.
    #[arg(long, default_value_t = 4096)]
    cache_capacity: usize,
}

#[derive(Args)]
struct AskArgs {
    #[arg(long)]
    image: String,
    #[arg(long)]
    question: String,
    #[command(flatten)]
    backends: BackendArgs,
    /// Print the full stage-by-stage trace.
    #[arg(long)]
    verbose: bool,
    /// Print the answer record as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "table-text", value_parser = parse_format)]
    format: ReportFormat,
    #[command(flatten)]
    backends: BackendArgs,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn read_mock_config(path: &Path) -> Result<MockConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading mock configuration {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn build_pipeline(args: &BackendArgs) -> Result<Pipeline> {
    let bank = match &args.bank {
        Some(path) => QuestionBank::from_path(path)?,
        None => QuestionBank::floodnet_reference(),
    };
    let (generator, embedder): (Arc<dyn AnswerGenerator>, Arc<dyn TextEmbedder>) = match &args.mock
    {
        Some(path) => {
            let config = read_mock_config(path)?;
            (
                Arc::new(MockGenerator::from_script(&config.generator)),
                Arc::new(config.embedder),
            )
        }
        None => {
            let (Some(gen_url), Some(emb_url)) = (&args.generator_url, &args.embedder_url) else {
                bail!("--generator-url and --embedder-url are required unless --mock is given");
            };
            let with_auth = |e: BackendEndpoint| match &args.token {
                Some(t) => e.with_auth_token(t),
                None => e,
            };
            let gen =
                with_auth(BackendEndpoint::generator(gen_url).with_timeout_ms(args.timeout_ms));
            let emb =
                with_auth(BackendEndpoint::embedder(emb_url).with_timeout_ms(args.timeout_ms));
            (
                Arc::new(HttpGenerator::new(gen)?),
                Arc::new(HttpEmbedder::new(emb)?),
            )
        }
    };
    let pipeline = Pipeline::new(bank, generator, embedder);
    Ok(match NonZeroUsize::new(args.cache_capacity) {
        Some(cap) => pipeline.with_cache(cap),
        None => pipeline,
    })
}

fn trace(record: &AnswerRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "image:             {}", record.image.id);
    let _ = writeln!(out, "question:          {}", record.question_raw);
    match &record.question_entry {
        Some(e) => {
            let _ = writeln!(out, "category:          {} ({})", e.category, e.mode);
        }
        None => {
            let _ = writeln!(out, "category:          <not in bank, flagged>");
        }
    }
    let _ = writeln!(out, "modified question: {}", record.modified_question);
    let _ = writeln!(out, "raw answer:        {}", record.raw_answer);
    if let Some(m) = &record.match_result {
        let _ = writeln!(out, "reference query:   {}", m.reference_query);
        let candidates = record
            .question_entry
            .as_ref()
            .map(|e| e.answers.clone())
            .unwrap_or_default();
        for (i, (candidate, score)) in candidates.iter().zip(&m.scores).enumerate() {
            let marker = if i == m.selected_index { "*" } else { " " };
            let _ = writeln!(out, "  {marker} {score:>9.6}  {candidate}");
        }
    }
    let mode = serde_json::to_value(record.mode_applied).unwrap_or_default();
    let _ = writeln!(
        out,
        "mode:              {}",
        mode.as_str().unwrap_or_default()
    );
    let _ = writeln!(out, "final answer:      {}", record.final_answer);
    let t = &record.timings;
    let _ = writeln!(
        out,
        "timings (ms):      generation {:.1}, matching {:.1}, total {:.1}",
        t.generation_ms, t.matching_ms, t.total_ms
    );
    out
}

fn run_ask(args: AskArgs) -> Result<()> {
    let pipeline = build_pipeline(&args.backends)?;
    let image = ImageRef::from_locator_str(&args.image);
    let record = pipeline.answer(&image, &args.question)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&record)?);
    } else if args.verbose {
        print!("{}", trace(&record));
    } else {
        println!("{}", record.final_answer);
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let pipeline = build_pipeline(&args.backends)?;
    let items = load_dataset(&args.dataset)?;
    let report = evaluate(
        &pipeline,
        &items,
        EvalOptions {
            parallelism: args.parallelism.max(1),
        },
    );
    let text = emit_report(&report, args.format);
    std::fs::write(&args.out, &text).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "evaluated {} items ({} errors); report written to {}",
        report.overall.count,
        report.error_count,
        args.out.display()
    );
    Ok(())
}

fn wait_for_ctrl_c() -> Result<()> {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()?
        .block_on(tokio::signal::ctrl_c())?;
    Ok(())
}

fn run_mock_backends(
    host: &str,
    port: u16,
    script: Option<PathBuf>,
    token: Option<String>,
) -> Result<()> {
    let config = match script {
        Some(path) => read_mock_config(&path)?,
        None => MockConfig {
            generator: zeshot::backend::MockScript {
                default: Some("unknown".into()),
                entries: vec![],
            },
            embedder: MockEmbedder::default(),
        },
    };
    let mut backends = MockBackends::from_config(&config);
    backends.auth_token = token;
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .context("invalid --host/--port")?;
    let handle = backends
        .spawn(addr)
        .with_context(|| format!("binding {addr}"))?;
    // Readiness line for scripts waiting on startup.
    println!("mock backends listening on {}", handle.base_url());
    wait_for_ctrl_c()?;
    handle.shutdown()?;
    Ok(())
}

fn print_checks(label: &str, checks: &[Check]) {
    for c in checks {
        println!(
            "[{}] {label} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ask(args) => run_ask(args)?,
        Command::Eval(args) => run_eval(args)?,
        Command::Serve { config } => {
            let config = ServiceConfig::from_path(&config)?;
            let handle = serve(&config)?;
            tracing::info!(addr = %handle.addr(), "service listening");
            println!("zeshot service listening on {}", handle.base_url());
            wait_for_ctrl_c()?;
            handle.shutdown()?;
        }
        Command::MockBackends {
            port,
            host,
            script,
            token,
        } => run_mock_backends(&host, port, script, token)?,
        Command::Conformance {
            generator_url,
            embedder_url,
            token,
        } => {
            if generator_url.is_none() && embedder_url.is_none() {
                bail!("give --generator-url and/or --embedder-url");
            }
            let mut ok = true;
            let auth = |e: BackendEndpoint| match &token {
                Some(t) => e.with_auth_token(t),
                None => e,
            };
            if let Some(url) = generator_url {
                let checks = check_generator(&auth(BackendEndpoint::generator(url)));
                print_checks("generator", &checks);
                ok &= all_passed(&checks);
            }
            if let Some(url) = embedder_url {
                let checks = check_embedder(&auth(BackendEndpoint::embedder(url)));
                print_checks("embedder", &checks);
                ok &= all_passed(&checks);
            }
            return Ok(ok);
        }
        Command::ConvertFloodnet {
            annotations,
            image_root,
            bank,
            out,
        } => {
            let bank = match bank {
                Some(p) => QuestionBank::from_path(p)?,
                None => QuestionBank::floodnet_reference(),
            };
            let text = std::fs::read_to_string(&annotations)
                .with_context(|| format!("reading {}", annotations.display()))?;
            let doc = convert_floodnet(&text, &image_root, &bank)?;
            std::fs::write(&out, serde_json::to_string_pretty(&doc)?)?;
            eprintln!(
                "converted {} items ({}) to {}",
                doc.items.len(),
                zeshot::eval::dataset::FLOODNET_ADAPTER_VERSION,
                out.display()
            );
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
