//! The `amc` command line.
//!
//! Exit codes: 0 success, 2 partial (invalid responses or skipped input
//! lines), 3 fatal.

pub mod config;
pub mod pipeline;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::evalharness::report::{emit_report, read_report, render_markdown, Format};
use crate::llmclient::BackendKind;
use crate::modgen::io::{read_dataset, write_dataset};
use crate::modgen::{make_dataset, ModClass, SnrCondition, Split};
use crate::promptkit::{build_prompt, PromptMode};
use crate::stats::{summarize_with, ViewKind};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_FATAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "amc", version, about = "Modulation classification from signal statistics via language-model prompts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset file.
    DatasetGen(DatasetGenArgs),
    /// Compute one statistical summary per dataset record.
    Summarize(SummarizeArgs),
    /// Print the rendered prompt for one test record.
    PromptDump(PromptDumpArgs),
    /// Run the full pipeline and write reports.
    RunEval(RunEvalArgs),
    /// Re-emit or combine existing JSON reports.
    Report(ReportArgs),
    /// Rescore a run directory from its transcript without calling a backend.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SnrArg {
    /// No noise.
    Noiseless,
    /// One SNR per signal, uniform over [-10, 10) dB.
    Noisy,
}

/// Protocol overrides shared by every subcommand that builds a dataset.
#[derive(Debug, Clone, Default, Args)]
pub struct ProtocolArgs {
    /// TOML or JSON run configuration. Flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub test_count: Option<usize>,
    #[arg(long)]
    pub exemplars_per_class: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub snr: Option<SnrArg>,
    /// Samples per signal.
    #[arg(long)]
    pub samples: Option<usize>,
}

impl ProtocolArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let p = &mut cfg.protocol;
        if let Some(v) = self.test_count {
            p.test_count = v;
        }
        if let Some(v) = self.exemplars_per_class {
            p.exemplars_per_class = v;
        }
        if let Some(v) = self.seed {
            p.master_seed = v;
        }
        if let Some(v) = self.samples {
            p.samples = v;
        }
        match self.snr {
            Some(SnrArg::Noiseless) => p.snr = SnrCondition::Noiseless,
            Some(SnrArg::Noisy) => p.snr = SnrCondition::protocol_noisy(),
            None => {}
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct DatasetGenArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Output JSONL path.
    #[arg(long)]
    pub out: PathBuf,
    /// Store samples in a binary `.bin` sidecar instead of inline.
    #[arg(long)]
    pub sidecar: bool,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output JSONL path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "interleaved")]
    pub view: ViewArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ViewArg {
    Interleaved,
    InPhase,
    Magnitude,
}

impl From<ViewArg> for ViewKind {
    fn from(v: ViewArg) -> Self {
        match v {
            ViewArg::Interleaved => ViewKind::Interleaved,
            ViewArg::InPhase => ViewKind::InPhase,
            ViewArg::Magnitude => ViewKind::Magnitude,
        }
    }
}

#[derive(Debug, Args)]
pub struct PromptDumpArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Dataset file; generated from the protocol if omitted.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<PromptMode>,
    /// Test record index.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Output path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunEvalArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Dataset file; generated from the protocol if omitted.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<PromptMode>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Chat-completions URL for the http backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Run directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Report file id; defaults to the current unix time.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Keep full prompt text in the transcript.
    #[arg(long)]
    pub keep_prompts: bool,
    /// Discard an existing transcript instead of resuming it.
    #[arg(long)]
    pub fresh: bool,
}

impl RunEvalArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.protocol.resolve()?;
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        let b = &mut cfg.backend;
        if let Some(v) = self.backend {
            b.kind = v;
        }
        if let Some(v) = &self.endpoint {
            b.endpoint = v.clone();
        }
        if let Some(v) = &self.model {
            b.model = v.clone();
        }
        if let Some(v) = self.temperature {
            b.temperature = v;
        }
        if let Some(v) = self.max_tokens {
            b.max_tokens = v;
        }
        if let Some(v) = self.concurrency {
            b.concurrency = v;
        }
        if let Some(v) = self.max_retries {
            b.max_retries = v;
        }
        if let Some(v) = self.timeout_ms {
            b.timeout_ms = v;
        }
        if let Some(v) = &self.api_key_env {
            b.api_key_env = v.clone();
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if self.keep_prompts {
            cfg.keep_prompts = true;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON report(s). Several inputs are only allowed with markdown.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Run directory holding config.json and transcript.jsonl.
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long)]
    pub run_id: Option<String>,
}

fn default_run_id() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".to_string())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::BufWriter::new(std::io::stdout().lock())),
    })
}

fn cmd_dataset_gen(args: &DatasetGenArgs) -> Result<i32> {
    let cfg = args.protocol.resolve()?;
    let protocol = &cfg.protocol;
    protocol.validate()?;
    let records = make_dataset(protocol)?;
    write_dataset(&args.out, protocol, &records, args.sidecar)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "wrote {} records to {}", records.len(), args.out.display())?;
    writeln!(out, "class      exemplar  test")?;
    for class in ModClass::ALL {
        let count = |split| records.iter().filter(|r| r.split == split && r.label() == class).count();
        writeln!(out, "{:<10} {:>8} {:>5}", class.to_string(), count(Split::Exemplar), count(Split::Test))?;
    }
    Ok(EXIT_OK)
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<i32> {
    let loaded = read_dataset(&args.dataset)?;
    let mut partial = false;
    for e in &loaded.errors {
        log::error!("{}: line {}: {}", args.dataset.display(), e.line, e.message);
        partial = true;
    }
    let cfg = crate::stats::SummaryConfig {
        view: args.view.into(),
        ..Default::default()
    };
    let mut out = open_output(args.out.as_deref())?;
    for r in &loaded.records {
        match summarize_with(&r.signal, &cfg) {
            Ok(s) => {
                let mut obj = serde_json::Map::new();
                obj.insert("split".into(), serde_json::to_value(r.split)?);
                obj.insert("index".into(), r.index.into());
                obj.insert("snr_db".into(), serde_json::to_value(r.signal.snr.db())?);
                if let serde_json::Value::Object(fields) = serde_json::to_value(&s)? {
                    obj.extend(fields);
                }
                serde_json::to_writer(&mut out, &obj)?;
                out.write_all(b"\n")?;
            }
            Err(e) => {
                log::error!("{:?} record {}: {e}", r.split, r.index);
                partial = true;
            }
        }
    }
    out.flush()?;
    Ok(if partial { EXIT_PARTIAL } else { EXIT_OK })
}

fn cmd_prompt_dump(args: &PromptDumpArgs) -> Result<i32> {
    let mut cfg = args.protocol.resolve()?;
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    let dataset = pipeline::obtain_dataset(&mut cfg, args.dataset.as_deref())?;
    let summaries = pipeline::summarize_records(&dataset.records, &cfg.summary)?;
    let exemplars = pipeline::exemplars_of(&dataset.records, &summaries);
    let Some(pos) = dataset
        .records
        .iter()
        .position(|r| r.split == Split::Test && r.index == args.index)
    else {
        bail!("no test record with index {}", args.index);
    };
    let bundle = build_prompt(&summaries[pos], &exemplars, cfg.mode, &cfg.prompt)?;
    let mut out = open_output(args.out.as_deref())?;
    out.write_all(bundle.render().as_bytes())?;
    out.flush()?;
    Ok(EXIT_OK)
}

fn print_summary(report: &crate::evalharness::EvalReport, files: &[PathBuf]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    let cleaned = report
        .cleaned_accuracy
        .map_or_else(|| "n/a".to_string(), |c| format!("{:.2}%", c * 100.0));
    writeln!(
        out,
        "{} {} {}: accuracy {:.2}%, cleaned {}, invalid {}/{}",
        report.metadata.model,
        report.metadata.mode,
        report.metadata.snr_condition,
        report.accuracy * 100.0,
        cleaned,
        report.invalid,
        report.total
    )?;
    for f in files {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(())
}

fn cmd_run_eval(args: &RunEvalArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let run_id = args.run_id.clone().unwrap_or_else(default_run_id);
    let out = pipeline::run_eval(cfg, args.dataset.as_deref(), &run_id, args.fresh)?;
    if out.resumed_entries > 0 {
        log::info!("resumed {} entries from the existing transcript", out.resumed_entries);
    }
    print_summary(&out.report, &out.files)?;
    Ok(if out.report.invalid > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

fn cmd_report(args: &ReportArgs) -> Result<i32> {
    let reports = args
        .inputs
        .iter()
        .map(|p| read_report(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    if reports.len() == 1 {
        for f in emit_report(&reports[0], args.format, &args.out)? {
            println!("wrote {}", f.display());
        }
    } else if args.format == Format::Markdown {
        let refs: Vec<_> = reports.iter().collect();
        std::fs::write(&args.out, render_markdown(&refs)).with_context(|| format!("writing {}", args.out.display()))?;
        println!("wrote {}", args.out.display());
    } else {
        bail!("combining several reports is only supported for markdown");
    }
    Ok(EXIT_OK)
}

fn cmd_replay(args: &ReplayArgs) -> Result<i32> {
    let run_id = args.run_id.clone().unwrap_or_else(default_run_id);
    let out = pipeline::replay(&args.run_dir, &run_id)?;
    print_summary(&out.report, &out.files)?;
    Ok(if out.report.invalid > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::DatasetGen(a) => cmd_dataset_gen(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::PromptDump(a) => cmd_prompt_dump(a),
        Command::RunEval(a) => cmd_run_eval(a),
        Command::Report(a) => cmd_report(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

/// Parses arguments, runs, and maps errors to [`EXIT_FATAL`].
pub fn main_entry() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FATAL
        }
    }
}
