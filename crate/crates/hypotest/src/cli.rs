//! Command-line interface.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hypotest_core::network::{export_network, ExportFormat, NetworkOptions};
use hypotest_core::stats::{SupportMode, SupportOptions, TestParams, TestResult};
use hypotest_core::{parse_records, Engine};

use crate::config::{parse_hops, ApiConfig};

#[derive(Debug, Parser)]
#[command(
    name = "hypotest",
    version,
    about = "Test biomedical hypotheses against a literature corpus"
)]
pub struct Cli {
    /// TOML or JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory holding the persistent corpus and relation store.
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Corpus JSONL ingested when the store has no documents.
    #[arg(long, global = true, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub negation: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub verbs: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add documents from a corpus JSONL file and extract their relations.
    Ingest { file: PathBuf },
    /// Test a hypothesis with a chi-square goodness-of-fit test.
    Test(TestArgs),
    /// Print the secondary network around one or more entities.
    Network(NetworkArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Inspect stored relations.
    Relations {
        #[command(subcommand)]
        command: RelationsCommand,
    },
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub hypothesis: String,
    /// Expected number of supporting documents.
    #[arg(long)]
    pub expected: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value = "strict", value_parser = parse_mode)]
    pub mode: SupportMode,
    /// Count only relations whose predicate matches the hypothesis.
    #[arg(long)]
    pub match_predicate: bool,
    /// Print the result as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    #[arg(long = "entity", required = true)]
    pub entities: Vec<String>,
    /// Hop bound, or "unbounded".
    #[arg(long, value_parser = parse_hop_limit)]
    pub max_hops: Option<HopLimit>,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    pub format: ExportFormat,
    /// Ignore negative relations.
    #[arg(long)]
    pub positive_only: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RelationsCommand {
    /// Write every stored relation to stdout.
    Export {
        #[arg(long, value_enum, default_value_t = RelationFormat::Jsonl)]
        format: RelationFormat,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RelationFormat {
    Jsonl,
}

/// A hop bound where `None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopLimit(pub Option<usize>);

fn parse_hop_limit(s: &str) -> Result<HopLimit, String> {
    parse_hops(s).map(HopLimit)
}

fn parse_mode(s: &str) -> Result<SupportMode, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    s.parse()
        .map_err(|e: hypotest_core::network::NetworkError| e.to_string())
}

impl Cli {
    /// Layers the config file, `HYPOTEST_*` variables and global flags.
    pub fn resolve_config(&self) -> anyhow::Result<ApiConfig> {
        let mut config = match &self.config {
            Some(path) => ApiConfig::from_file(path)?,
            None => ApiConfig::default(),
        };
        config.apply_process_env()?;
        let flags = [
            (&self.data_dir, &mut config.data_dir),
            (&self.corpus, &mut config.corpus),
            (&self.lexicon, &mut config.lexicon),
            (&self.negation, &mut config.negation),
            (&self.verbs, &mut config.verbs),
        ];
        for (flag, slot) in flags {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Command::Serve(args) = &self.command {
            if let Some(listen) = &args.listen {
                config.listen.clone_from(listen);
            }
            if args.static_dir.is_some() {
                config.static_dir.clone_from(&args.static_dir);
            }
        }
        config.validate()?;
        Ok(config)
    }
}

/// Human-readable rendering of a test result.
pub fn format_result(r: &TestResult) -> String {
    let h = &r.hypothesis;
    let mut out = String::new();
    let _ = writeln!(out, "Hypothesis   {}", h.source_text);
    let _ = writeln!(out, "Normalized   {h}");
    let _ = writeln!(
        out,
        "Support      {} (match predicate: {})",
        r.mode,
        if r.match_predicate { "yes" } else { "no" }
    );
    let _ = writeln!(out, "Observed     {} of {} documents", r.observed, r.total);
    let _ = writeln!(out, "Expected     {}", r.expected);
    let _ = writeln!(out, "Deviation    {:+}", r.deviation);
    let _ = writeln!(out, "Chi-square   {:.6} (df = {})", r.chi2, r.df);
    let _ = writeln!(out, "p-value      {:.6}", r.p_value);
    let _ = writeln!(out, "Decision     {} at alpha = {}", r.decision, r.alpha);
    if !r.supporting_doc_ids.is_empty() {
        let _ = writeln!(out, "Supporting   {}", r.supporting_doc_ids.join(", "));
    }
    out
}

fn ingest(engine: &mut Engine, file: &PathBuf, out: &mut dyn Write) -> anyhow::Result<()> {
    if engine.data_dir().is_none() {
        bail!("ingest needs --data-dir (or data_dir in the config) to persist documents");
    }
    let contents = fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let records = parse_records(&contents).with_context(|| format!("in {}", file.display()))?;
    let report = engine.ingest(records)?;
    writeln!(
        out,
        "ingested {} records: {} new, {} unchanged, {} relations added",
        report.ingested, report.documents_added, report.unchanged, report.relations_added
    )?;
    Ok(())
}

/// Runs a parsed command line, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let config = cli.resolve_config()?;
    if let Command::Serve(_) = cli.command {
        let runtime = tokio::runtime::Runtime::new()?;
        return runtime.block_on(crate::api::serve(config));
    }
    let mut engine = config.build_engine()?;
    match cli.command {
        Command::Ingest { file } => ingest(&mut engine, &file, out)?,
        Command::Test(args) => {
            let params = TestParams {
                expected: args.expected,
                alpha: args.alpha.unwrap_or(config.alpha),
                support: SupportOptions {
                    mode: args.mode,
                    match_predicate: args.match_predicate,
                },
            };
            let result = engine.test_hypothesis(&args.hypothesis, &params)?;
            if args.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&result)?)?;
            } else {
                out.write_all(format_result(&result).as_bytes())?;
            }
        }
        Command::Network(args) => {
            let opts = NetworkOptions {
                max_hops: args.max_hops.map_or(config.max_hops, |h| h.0),
                positive_only: args.positive_only,
            };
            let network = engine.network(&args.entities, opts)?;
            out.write_all(&export_network(&network, args.format))?;
        }
        Command::Relations {
            command: RelationsCommand::Export {
                format: RelationFormat::Jsonl,
            },
        } => {
            for relation in engine.store().relations() {
                writeln!(out, "{}", serde_json::to_string(relation)?)?;
            }
        }
        Command::Serve(_) => unreachable!("handled above"),
    }
    Ok(())
}
