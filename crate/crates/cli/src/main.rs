use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use structgen::automaton::{Dfa, TokenIndex, Vocabulary};
use structgen::backends::{
    AdversarialProvider, ConstantProvider, GrammarKind, MockProvider, RemoteBackendConfig,
    RemoteClient, ScriptedProvider, Secret,
};
use structgen::decoder::{decode, DecodeConfig, LogitsProvider, Prompt};
use structgen::harness::{
    load_dataset, record_prompt, render_report, run_records, write_predictions, AnswerMode,
    Backend, MatchMode, PipelineConfig,
};
use structgen::regex::{render_regex, schema_to_regex};
use structgen::schema::{apply_index_prefix, parse_schema, validate_instance, ToolSpec, Validator, Whitespace};

#[derive(Parser)]
#[command(name = "structgen", version, about = "Schema-constrained decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a tool schema and print its regex and automaton statistics.
    Compile(CompileArgs),
    /// Generate one output for one prompt under a schema.
    Generate(GenerateArgs),
    /// Run a dataset through the pipeline and score it.
    Eval(EvalArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// Tool schema JSON file.
    #[arg(long)]
    schema: PathBuf,
    /// Rename keys to `1_key`, `2_key`, ... before compiling.
    #[arg(long)]
    index_prefix: bool,
    /// Also build the token index over this vocabulary JSON file.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Adversarial,
    Constant,
    Scripted,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum Decoding {
    Greedy,
    Sample,
}

#[derive(Clone, Copy, ValueEnum)]
enum GrammarArg {
    Regex,
    Json,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "greedy")]
    decoding: Decoding,
    /// Softmax temperature for `--decoding sample`.
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 512)]
    max_tokens: usize,
    /// Vocabulary JSON file; defaults to a built-in ASCII vocabulary.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Remote generation endpoint.
    #[arg(long, env = "STRUCTGEN_ENDPOINT")]
    endpoint: Option<String>,
    /// Bearer token for the remote endpoint.
    #[arg(long, env = "STRUCTGEN_AUTH_TOKEN", hide_env_values = true)]
    auth_token: Option<String>,
    /// Grammar form sent to the remote endpoint.
    #[arg(long, value_enum, default_value = "regex")]
    grammar: GrammarArg,
    /// Remote request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

#[derive(Args)]
struct GenerateArgs {
    /// Tool schema JSON file.
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    prompt: String,
    /// Target text for `--backend scripted`.
    #[arg(long)]
    target: Option<String>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Concise,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchArg {
    Exact,
    Substring,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset JSONL file.
    #[arg(long)]
    dataset: PathBuf,
    /// Predictions JSONL output file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the rendered report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    #[arg(long = "match", value_enum, default_value = "exact")]
    match_mode: MatchArg,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Label of the report block.
    #[arg(long, default_value = "Eval")]
    phase: String,
    /// JSONL of `{"id": ..., "output": ...}` targets for `--backend scripted`.
    #[arg(long)]
    script: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

/// An error tagged with the stage that produced it.
struct StageError {
    stage: &'static str,
    error: anyhow::Error,
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            error: e.into(),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(args) => compile(args),
        Command::Generate(args) => generate(args),
        Command::Eval(args) => eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {:#}", e.stage, e.error);
            ExitCode::FAILURE
        }
    }
}

fn read_schema(path: &PathBuf) -> anyhow::Result<ToolSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_schema(&text)?)
}

fn load_vocab(path: Option<&PathBuf>) -> anyhow::Result<Vocabulary> {
    match path {
        Some(p) => Vocabulary::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Vocabulary::default_ascii()),
    }
}

fn compile(args: CompileArgs) -> Result<(), StageError> {
    let mut spec = read_schema(&args.schema).stage("schema")?;
    if args.index_prefix {
        spec = apply_index_prefix(&spec).stage("schema")?;
    }
    let ast = schema_to_regex(spec.parameters());
    let dfa = Dfa::from_regex(&ast).stage("compile")?;
    println!("regex: {}", render_regex(&ast));
    println!("dfa states: {}", dfa.len());
    println!("live states: {}", dfa.live_count());
    println!("transitions: {}", dfa.transition_count());
    if let Some(path) = &args.vocab {
        let vocab = load_vocab(Some(path)).stage("vocab")?;
        let index = TokenIndex::build(dfa, &vocab);
        println!("vocabulary: {}", vocab.len());
        println!("index entries: {}", index.entry_count());
    }
    Ok(())
}

fn decode_config(args: &BackendArgs) -> Result<DecodeConfig, StageError> {
    let config = match args.decoding {
        Decoding::Greedy => DecodeConfig::greedy(args.seed, args.max_tokens),
        Decoding::Sample => DecodeConfig::sample(args.seed, args.temperature, args.max_tokens),
    };
    config.validate().stage("config")?;
    Ok(config)
}

fn remote_client(args: &BackendArgs) -> Result<RemoteClient, StageError> {
    let endpoint = args
        .endpoint
        .clone()
        .ok_or_else(|| anyhow!("--endpoint or STRUCTGEN_ENDPOINT is required for the remote backend"))
        .stage("config")?;
    let mut config = RemoteBackendConfig::new(endpoint);
    config.timeout = Duration::from_secs(args.timeout_secs);
    config.max_new_tokens = args.max_tokens;
    config.auth_token = args.auth_token.clone().map(Secret::new);
    config.grammar_kind = match args.grammar {
        GrammarArg::Regex => GrammarKind::Regex,
        GrammarArg::Json => GrammarKind::JsonSchema,
    };
    RemoteClient::new(config).stage("config")
}

fn generate(args: GenerateArgs) -> Result<(), StageError> {
    let spec = read_schema(&args.schema).stage("schema")?;
    let prompt = Prompt::text(args.prompt.clone());
    let b = &args.backend;
    if let BackendKind::Remote = b.backend {
        let client = remote_client(b)?;
        let text = client.generate_for(&prompt.text, &spec).stage("remote")?;
        println!("{text}");
        let report = Validator::new(spec.parameters()).whitespace(Whitespace::Any).validate(&text);
        if !report.valid() {
            return Err(anyhow!("remote output does not validate: {:?}", report.violations()))
                .stage("validate");
        }
        return Ok(());
    }
    let config = decode_config(b)?;
    let vocab = Arc::new(load_vocab(b.vocab.as_ref()).stage("vocab")?);
    let dfa = Dfa::from_regex(&schema_to_regex(spec.parameters())).stage("compile")?;
    let index = Arc::new(TokenIndex::build_shared(dfa, vocab.clone()));
    let provider: Box<dyn LogitsProvider<f32>> = match b.backend {
        BackendKind::Mock => Box::new(MockProvider::new(b.seed, vocab.len())),
        BackendKind::Adversarial => Box::new(AdversarialProvider::new(index.clone(), b.seed)),
        BackendKind::Constant => Box::new(ConstantProvider::uniform(vocab.len(), 0.0)),
        BackendKind::Scripted => {
            let target = args
                .target
                .clone()
                .ok_or_else(|| anyhow!("--target is required for the scripted backend"))
                .stage("config")?;
            Box::new(ScriptedProvider::new(vocab.clone(), b.seed).with_script(prompt.clone(), target))
        }
        BackendKind::Remote => unreachable!("handled above"),
    };
    let out = decode(provider.as_ref(), &prompt, &index, &config).stage("decode")?;
    println!("{}", out.text);
    let report = validate_instance(spec.parameters(), &out.text);
    if !report.valid() {
        return Err(anyhow!("output does not validate: {:?}", report.violations())).stage("validate");
    }
    eprintln!("steps: {} finish: {:?}", out.steps, out.finish);
    Ok(())
}

#[derive(Deserialize)]
struct ScriptLine {
    id: String,
    output: String,
}

fn load_script(path: &PathBuf) -> anyhow::Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ScriptLine =
            serde_json::from_str(line).with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        out.insert(entry.id, entry.output);
    }
    Ok(out)
}

fn eval(args: EvalArgs) -> Result<(), StageError> {
    let records = load_dataset(&args.dataset).stage("load")?;
    let b = &args.backend;
    let vocab = Arc::new(load_vocab(b.vocab.as_ref()).stage("vocab")?);
    let config = PipelineConfig {
        mode: match args.mode {
            ModeArg::Exact => AnswerMode::Exact,
            ModeArg::Concise => AnswerMode::Concise,
        },
        decode: decode_config(b)?,
        vocab: vocab.clone(),
        parallelism: args.parallelism,
        match_mode: match args.match_mode {
            MatchArg::Exact => MatchMode::Exact,
            MatchArg::Substring => MatchMode::Substring,
        },
        phase: args.phase.clone(),
        ..PipelineConfig::default()
    };
    let client;
    let provider: Box<dyn LogitsProvider<f32>>;
    let backend: Backend<'_, f32> = match b.backend {
        BackendKind::Mock => {
            provider = Box::new(MockProvider::new(b.seed, vocab.len()));
            Backend::Local(provider.as_ref())
        }
        BackendKind::Constant => {
            provider = Box::new(ConstantProvider::uniform(vocab.len(), 0.0));
            Backend::Local(provider.as_ref())
        }
        BackendKind::Scripted => {
            let Some(path) = &args.script else {
                return Err(anyhow!("--script is required for the scripted backend")).stage("config");
            };
            let script = load_script(path).stage("script")?;
            let mut scripted = ScriptedProvider::new(vocab.clone(), b.seed);
            for record in &records {
                if let Some(target) = script.get(&record.id) {
                    scripted.script(record_prompt(record, config.mode).stage("prompt")?, target.clone());
                }
            }
            provider = Box::new(scripted);
            Backend::Local(provider.as_ref())
        }
        BackendKind::Adversarial => Backend::Adversarial { seed: b.seed },
        BackendKind::Remote => {
            client = remote_client(b)?;
            Backend::Remote(&client)
        }
    };
    let output = run_records(&records, &backend, &config).stage("eval")?;
    write_predictions(&args.out, &output.predictions).stage("write")?;
    let table = render_report(&output.report);
    if let Some(path) = &args.report {
        std::fs::write(path, &table)
            .with_context(|| format!("writing {}", path.display()))
            .stage("write")?;
    }
    print!("{table}");
    let invalid = output.predictions.iter().filter(|p| !p.valid).count();
    if invalid > 0 {
        eprintln!("{invalid} of {} predictions are invalid", output.predictions.len());
    }
    Ok(())
}
