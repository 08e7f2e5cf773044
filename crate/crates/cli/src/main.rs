//! `capforge`: caption corpus statistics, LLM correction, decoder training
//! and METEOR comparison.
//!
//! Exit codes: 0 on success, 1 when a pipeline stage fails, 2 for usage and
//! input errors.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use capforge_core::captioner::DEFAULT_LOCATIONS;
use capforge_core::harness::{
    cmd_compare, cmd_correct, cmd_eval, cmd_stats, cmd_train_eval, read_json, write_json,
    CorrectArgs, EvalArgs, EvalSource, FeatureSpec, StatsArgs, TrainEvalArgs,
};
use capforge_core::llm::{
    default_mock, ChatTransport, HttpTransport, PromptMode, API_KEY_ENV, DEFAULT_ENDPOINT,
};
use capforge_core::{
    CorrectionConfig, Error, EvalReport, PromptTemplate, Result, Split, TrainConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "capforge",
    version,
    about = "Caption corpus diagnostics and correction experiments"
)]
struct Cli {
    /// `key = value` file with defaults for the subcommand's long flags.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Omit timestamps so reruns produce byte-identical reports.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus statistics: vocabulary, misspellings, duplicates.
    #[command(args_override_self = true)]
    Stats(StatsCmd),
    /// Rewrite every caption through a chat-completion model.
    #[command(args_override_self = true)]
    Correct(CorrectCmd),
    /// Train the attention decoder and score one split.
    #[command(args_override_self = true)]
    Train(TrainCmd),
    /// Score candidate captions or a saved model.
    #[command(args_override_self = true)]
    Eval(EvalCmd),
    /// Compare an original and a corrected evaluation report.
    #[command(args_override_self = true)]
    Compare(CompareCmd),
}

#[derive(Args, Debug)]
struct StatsCmd {
    corpus: PathBuf,
    /// Word list, one word per line. Defaults to the bundled list.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the word-repetition histogram as CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Grammar,
    Describe,
}

#[derive(Args, Debug)]
struct CorrectCmd {
    corpus: PathBuf,
    /// Corrected corpus output.
    #[arg(long)]
    out: PathBuf,
    /// Per-caption records as CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "grammar")]
    mode: Mode,
    /// Replace the system prompt with the contents of this file.
    #[arg(long)]
    system_prompt: Option<PathBuf>,
    #[arg(long, default_value = capforge_core::llm::DEFAULT_MODEL)]
    model: String,
    #[arg(long, default_value_t = capforge_core::llm::DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    /// Response cache; reruns reuse it and make no requests for cached captions.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_ENDPOINT)]
    endpoint: String,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value_t = 500)]
    backoff_ms: u64,
    #[arg(long, default_value_t = 30_000)]
    backoff_max_ms: u64,
    #[arg(long, default_value_t = 0)]
    min_interval_ms: u64,
    /// Call the real endpoint (needs the API key in the environment).
    #[arg(long)]
    live: bool,
    /// Extra `original<TAB>reply` pairs for the mock transport.
    #[arg(long, conflicts_with = "live")]
    mock_fixture: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FeatureArgs {
    /// Feature grid file.
    #[arg(long, conflicts_with = "synthetic_features")]
    features: Option<PathBuf>,
    /// Use seeded synthetic grids instead of a feature file.
    #[arg(long, value_name = "SEED")]
    synthetic_features: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_LOCATIONS)]
    locations: usize,
    #[arg(long, default_value_t = 64)]
    channels: usize,
}

impl FeatureArgs {
    fn spec(&self) -> Option<FeatureSpec> {
        match (&self.features, self.synthetic_features) {
            (Some(path), _) => Some(FeatureSpec::File { path: path.clone() }),
            (None, Some(seed)) => Some(FeatureSpec::Synthetic {
                seed,
                locations: self.locations,
                channels: self.channels,
            }),
            (None, None) => None,
        }
    }
}

#[derive(Args, Debug)]
struct TrainCmd {
    corpus: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    /// Row label in the report.
    #[arg(long, default_value = "attention-lstm")]
    model_name: String,
    #[arg(long, default_value_t = 64)]
    embed: usize,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long, default_value_t = 64)]
    attention: usize,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    /// Gradient-norm clip; 0 disables.
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Training captions are cut to this many words.
    #[arg(long, default_value_t = 30)]
    max_len: usize,
    #[arg(long, default_value = "train")]
    train_split: Split,
    #[arg(long, default_value = "val")]
    eval_split: Split,
    #[arg(long, default_value_t = 30)]
    decode_max_len: usize,
    /// Save the trained model (vocabulary, feature spec and weights).
    #[arg(long)]
    params_out: Option<PathBuf>,
    #[arg(long)]
    candidates_out: Option<PathBuf>,
    #[arg(long)]
    attention_out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct EvalCmd {
    corpus: PathBuf,
    /// `filename<TAB>caption` lines to score.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    candidates: Option<PathBuf>,
    /// Saved model to decode with.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Override the model's feature source.
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long, default_value_t = 30)]
    max_len: usize,
    #[arg(long, default_value = "val")]
    split: Split,
    #[arg(long, default_value = "attention-lstm")]
    model_name: String,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct CompareCmd {
    /// Evaluation report of the original corpus.
    original: PathBuf,
    /// Evaluation report of the corrected corpus.
    corrected: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn load_template(cmd: &CorrectCmd) -> Result<PromptTemplate> {
    let mode = match cmd.mode {
        Mode::Grammar => PromptMode::GrammarCorrect,
        Mode::Describe => PromptMode::FullDescribe,
    };
    let mut template = PromptTemplate::new(mode);
    if let Some(p) = &cmd.system_prompt {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        template.system_text = text.trim().to_string();
    }
    Ok(template)
}

fn transport(cmd: &CorrectCmd, config: &CorrectionConfig) -> Result<Box<dyn ChatTransport>> {
    if cmd.live {
        let key = std::env::var(API_KEY_ENV).ok();
        return Ok(Box::new(HttpTransport::new(
            &config.endpoint_url,
            key,
            config.timeout,
        )?));
    }
    let mut mock = default_mock();
    if let Some(p) = &cmd.mock_fixture {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        mock = mock.with_fixture_tsv(&text)?;
    }
    Ok(Box::new(mock))
}

fn run_correct(cmd: &CorrectCmd, deterministic: bool) -> Result<()> {
    let config = CorrectionConfig {
        model_name: cmd.model.clone(),
        temperature: cmd.temperature,
        max_retries: cmd.max_retries,
        timeout: Duration::from_secs(cmd.timeout_secs),
        cache_dir: cmd.cache_dir.clone(),
        endpoint_url: cmd.endpoint.clone(),
        concurrency: cmd.concurrency,
        backoff_base: Duration::from_millis(cmd.backoff_ms),
        backoff_max: Duration::from_millis(cmd.backoff_max_ms),
        min_request_interval: Duration::from_millis(cmd.min_interval_ms),
    };
    config.validate()?;
    let client = transport(cmd, &config)?;
    let args = CorrectArgs {
        corpus: cmd.corpus.clone(),
        out: cmd.out.clone(),
        records_out: cmd.records.clone(),
        report_out: cmd.report.clone(),
        dictionary: cmd.dictionary.clone(),
        template: load_template(cmd)?,
        config,
        deterministic,
    };
    let report = cmd_correct(&args, client.as_ref())?;
    print!("{}", report.render());
    Ok(())
}

fn run_train(cmd: &TrainCmd, deterministic: bool) -> Result<()> {
    let features = cmd
        .features
        .spec()
        .ok_or_else(|| Error::Config("pass --features or --synthetic-features".into()))?;
    let mut args = TrainEvalArgs::new(&cmd.corpus, features);
    args.model_name = cmd.model_name.clone();
    args.embed = cmd.embed;
    args.hidden = cmd.hidden;
    args.attention = cmd.attention;
    args.min_count = cmd.min_count;
    args.train = TrainConfig {
        learning_rate: cmd.learning_rate,
        epochs: cmd.epochs,
        batch_size: cmd.batch_size,
        clip_norm: cmd.clip_norm,
        seed: cmd.seed,
        max_len: cmd.max_len,
    };
    args.train_split = cmd.train_split;
    args.eval_split = cmd.eval_split;
    args.decode_max_len = cmd.decode_max_len;
    args.params_out = cmd.params_out.clone();
    args.candidates_out = cmd.candidates_out.clone();
    args.attention_out = cmd.attention_out.clone();
    args.report_out = cmd.report.clone();
    args.deterministic = deterministic;
    let out = cmd_train_eval(&args)?;
    if cmd.json {
        return print_json(&out.report);
    }
    if let Some(last) = out.report.loss_curve.last() {
        println!(
            "final training loss {last:.4} after {} epochs",
            out.report.loss_curve.len()
        );
    }
    print!("{}", out.report.render());
    Ok(())
}

fn run_eval(cmd: &EvalCmd, deterministic: bool) -> Result<()> {
    let source = match (&cmd.candidates, &cmd.model) {
        (Some(p), _) => EvalSource::Candidates(p.clone()),
        (None, Some(p)) => EvalSource::Model {
            path: p.clone(),
            features: cmd.features.spec(),
            max_len: cmd.max_len,
        },
        (None, None) => return Err(Error::Config("pass --candidates or --model".into())),
    };
    let report = cmd_eval(&EvalArgs {
        corpus: cmd.corpus.clone(),
        source,
        split: cmd.split,
        model_name: cmd.model_name.clone(),
        report_out: cmd.report.clone(),
        deterministic,
    })?;
    if cmd.json {
        return print_json(&report);
    }
    print!("{}", report.render());
    Ok(())
}

fn run_compare(cmd: &CompareCmd, deterministic: bool) -> Result<()> {
    let original: EvalReport = read_json(&cmd.original)?;
    let corrected: EvalReport = read_json(&cmd.corrected)?;
    let report = cmd_compare(&original, &corrected, deterministic)?;
    if let Some(p) = &cmd.report {
        write_json(p, &report)?;
    }
    if cmd.json {
        return print_json(&report);
    }
    print!("{}", report.render());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let det = cli.deterministic;
    match &cli.command {
        Command::Stats(cmd) => {
            let report = cmd_stats(&StatsArgs {
                corpus: cmd.corpus.clone(),
                dictionary: cmd.dictionary.clone(),
                report_out: cmd.report.clone(),
                histogram_out: cmd.histogram.clone(),
                deterministic: det,
            })?;
            if cmd.json {
                return print_json(&report);
            }
            print!("{}", report.render());
            Ok(())
        }
        Command::Correct(cmd) => run_correct(cmd, det),
        Command::Train(cmd) => run_train(cmd, det),
        Command::Eval(cmd) => run_eval(cmd, det),
        Command::Compare(cmd) => run_compare(cmd, det),
    }
}

fn with_config(argv: Vec<OsString>, path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let pairs = config::parse(&text, path)?;
    Ok(config::splice(&argv, config::to_flags(&pairs)))
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_input_error() { 2 } else { 1 })
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let mut cli = Cli::parse_from(&argv);
    if let Some(path) = cli.config.clone() {
        match with_config(argv, &path) {
            Ok(full) => cli = Cli::parse_from(full),
            Err(e) => return fail(&e),
        }
    }
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
