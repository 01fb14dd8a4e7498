//! Command-line front end: a flat key=value configuration file with
//! flag overrides, mapped onto the train/eval/predict/gradcheck/ablate
//! pipelines.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::corpus;
use crate::error::{Error, Result};
use crate::eval::{self, Ablation, RunData};
use crate::model;
use crate::train::{self, HyperParams};

/// Fully resolved run settings: defaults, then the config file, then
/// command-line flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub gold_key: Option<PathBuf>,
    pub glove: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub variant: Ablation,
    pub hp: HyperParams,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train_data: None,
            test_data: None,
            gold_key: None,
            glove: None,
            out_dir: PathBuf::from("out"),
            variant: Ablation::Standard,
            hp: HyperParams::default(),
            threads: None,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "wsd", about = "Bidirectional-LSTM word sense disambiguation", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker-thread cap; 1 forces fully sequential execution.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub train_data: Option<PathBuf>,

    #[arg(long, global = true)]
    pub test_data: Option<PathBuf>,

    #[arg(long, global = true)]
    pub gold_key: Option<PathBuf>,

    /// GloVe text-format vector file.
    #[arg(long, global = true)]
    pub glove: Option<PathBuf>,

    /// Architecture variant (standard, reversed, shuffled, fc,
    /// no-glove, no-word-dropout, context-25).
    #[arg(long, global = true)]
    pub variant: Option<String>,

    // Hyperparameter overrides, one flag per HyperParams field.
    // Searchable ranges: context 5..=50 per side, embedding size
    // {50,100,200}, hidden 30..=100, dropouts 0..=0.7, lr 1e-4..=1e-2.
    #[arg(long, global = true)]
    pub context_left: Option<usize>,
    #[arg(long, global = true)]
    pub context_right: Option<usize>,
    #[arg(long, global = true)]
    pub embedding_size: Option<usize>,
    #[arg(long, global = true)]
    pub hidden: Option<usize>,
    #[arg(long, global = true)]
    pub dropout_embed: Option<f64>,
    #[arg(long, global = true)]
    pub dropout_lstm_out: Option<f64>,
    #[arg(long, global = true)]
    pub dropout_fc: Option<f64>,
    #[arg(long, global = true)]
    pub word_dropout: Option<f64>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub rms_decay: Option<f64>,
    #[arg(long, global = true)]
    pub rms_epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub max_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    #[arg(long, global = true)]
    pub val_fraction: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write it with its log to the output directory.
    Train,
    /// Score a saved model against a gold key.
    Eval {
        #[arg(long)]
        model: PathBuf,
    },
    /// Print chosen senses with per-candidate probabilities.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Finite-difference gradient verification on a small network.
    Gradcheck,
    /// Train and evaluate one variant end to end.
    Ablate { variant: String },
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

/// Parse a flat `key = value` file; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::Parse {
            line: lineno + 1,
            msg: format!("expected key = value, got {line:?}"),
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn apply_pair(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "train_data" => cfg.train_data = Some(PathBuf::from(value)),
        "test_data" => cfg.test_data = Some(PathBuf::from(value)),
        "gold_key" => cfg.gold_key = Some(PathBuf::from(value)),
        "glove" => cfg.glove = Some(PathBuf::from(value)),
        "out" => cfg.out_dir = PathBuf::from(value),
        "variant" => cfg.variant = value.parse()?,
        "threads" => cfg.threads = Some(parse_num(key, value)?),
        "seed" => cfg.hp.seed = parse_num(key, value)?,
        "context_left" => cfg.hp.context_left = parse_num(key, value)?,
        "context_right" => cfg.hp.context_right = parse_num(key, value)?,
        "embedding_size" => cfg.hp.embedding_size = parse_num(key, value)?,
        "hidden" => cfg.hp.hidden = parse_num(key, value)?,
        "dropout_embed" => cfg.hp.dropout_embed = parse_num(key, value)?,
        "dropout_lstm_out" => cfg.hp.dropout_lstm_out = parse_num(key, value)?,
        "dropout_fc" => cfg.hp.dropout_fc = parse_num(key, value)?,
        "word_dropout" => cfg.hp.word_dropout = parse_num(key, value)?,
        "learning_rate" => cfg.hp.learning_rate = parse_num(key, value)?,
        "rms_decay" => cfg.hp.rms_decay = parse_num(key, value)?,
        "rms_epsilon" => cfg.hp.rms_epsilon = parse_num(key, value)?,
        "batch_size" => cfg.hp.batch_size = parse_num(key, value)?,
        "max_epochs" => cfg.hp.max_epochs = parse_num(key, value)?,
        "patience" => cfg.hp.patience = parse_num(key, value)?,
        "val_fraction" => cfg.hp.val_fraction = parse_num(key, value)?,
        other => return Err(Error::Config(format!("unknown config key {other:?}"))),
    }
    Ok(())
}

macro_rules! override_opt {
    ($cfg:expr, $cli:expr, $($field:ident => $slot:expr),+ $(,)?) => {
        $(if let Some(v) = &$cli.$field { $slot = v.clone(); })+
    };
}

/// CLI > file > defaults.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)?;
        for (key, value) in parse_config_file(&text)? {
            apply_pair(&mut cfg, &key, &value)?;
        }
    }
    if let Some(v) = &cli.variant {
        cfg.variant = v.parse()?;
    }
    if let Some(v) = cli.threads {
        cfg.threads = Some(v);
    }
    for (src, dst) in [
        (&cli.train_data, &mut cfg.train_data),
        (&cli.test_data, &mut cfg.test_data),
        (&cli.gold_key, &mut cfg.gold_key),
        (&cli.glove, &mut cfg.glove),
    ] {
        if src.is_some() {
            *dst = src.clone();
        }
    }
    if let Some(v) = &cli.out {
        cfg.out_dir = v.clone();
    }
    override_opt!(cfg, cli,
        seed => cfg.hp.seed,
        context_left => cfg.hp.context_left,
        context_right => cfg.hp.context_right,
        embedding_size => cfg.hp.embedding_size,
        hidden => cfg.hp.hidden,
        dropout_embed => cfg.hp.dropout_embed,
        dropout_lstm_out => cfg.hp.dropout_lstm_out,
        dropout_fc => cfg.hp.dropout_fc,
        word_dropout => cfg.hp.word_dropout,
        learning_rate => cfg.hp.learning_rate,
        rms_decay => cfg.hp.rms_decay,
        rms_epsilon => cfg.hp.rms_epsilon,
        batch_size => cfg.hp.batch_size,
        max_epochs => cfg.hp.max_epochs,
        patience => cfg.hp.patience,
        val_fraction => cfg.hp.val_fraction,
    );
    cfg.hp.validate()?;
    Ok(cfg)
}

fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = path
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{what} path not configured")))?;
    if !p.exists() {
        return Err(Error::Config(format!("{what} path does not exist: {}", p.display())));
    }
    Ok(p.clone())
}

fn check_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} path does not exist: {}", path.display())))
    }
}

/// Training data plus the GloVe file when the variant needs one,
/// checked before any work starts.
fn training_inputs(cfg: &RunConfig) -> Result<(PathBuf, Option<PathBuf>)> {
    let train_path = require(&cfg.train_data, "train_data")?;
    let (_, _, use_glove) = eval::ablation_settings(cfg.variant, &cfg.hp);
    let glove = if use_glove {
        Some(require(&cfg.glove, "glove")?)
    } else {
        None
    };
    Ok((train_path, glove))
}

fn load_instances(path: &Path) -> Result<corpus::ParseOutput> {
    let mut out = corpus::parse_lexical_sample(path)?;
    corpus::preprocess_instances(&mut out.instances);
    Ok(out)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let (train_path, glove) = training_inputs(cfg)?;
    let parsed = load_instances(&train_path)?;
    let (hp, mode, use_glove) = eval::ablation_settings(cfg.variant, &cfg.hp);
    let (params, log) = eval::train_network(
        &parsed.instances,
        &parsed.inventory,
        glove.as_deref(),
        &hp,
        mode,
        use_glove,
    )?;
    fs::create_dir_all(&cfg.out_dir)?;
    let model_path = cfg.out_dir.join("model.bin");
    model::save_model(&params, &model_path)?;
    fs::write(cfg.out_dir.join("train.log"), train::format_log(&log))?;
    println!(
        "trained {} epoch(s) on {} instance(s); model -> {}",
        log.len(),
        parsed.instances.len(),
        model_path.display()
    );
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, model_path: &Path) -> Result<()> {
    check_exists(model_path, "model")?;
    let test_path = require(&cfg.test_data, "test_data")?;
    let key_path = require(&cfg.gold_key, "gold_key")?;
    let params = model::load_model(model_path)?;
    let parsed = load_instances(&test_path)?;
    let gold_key = corpus::load_answer_key(&key_path)?;
    let predictions = eval::disambiguate_all(&params, &parsed.instances, cfg.hp.seed)?;
    let report = eval::score_answers(&predictions, &gold_key)?;
    fs::create_dir_all(&cfg.out_dir)?;
    eval::emit_report(&report, &predictions, &cfg.out_dir)?;
    let c = report.overall;
    println!(
        "overall: attempted {} / {}  P {:.4}  R {:.4}  F {:.4}",
        c.attempted,
        c.total,
        c.precision(),
        c.recall(),
        c.f_measure()
    );
    Ok(())
}

pub fn cmd_predict(cfg: &RunConfig, model_path: &Path, input: &Path) -> Result<()> {
    check_exists(model_path, "model")?;
    check_exists(input, "input")?;
    let params = model::load_model(model_path)?;
    let parsed = load_instances(input)?;
    let predictions = eval::disambiguate_all(&params, &parsed.instances, cfg.hp.seed)?;
    for p in &predictions {
        let probs: Vec<String> = p
            .sense_labels
            .iter()
            .zip(&p.probabilities)
            .map(|(label, prob)| format!("{label}:{prob:.4}"))
            .collect();
        println!("{} {} {}  [{}]", p.lexelt, p.instance_id, p.chosen_label(), probs.join(" "));
    }
    Ok(())
}

pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<()> {
    let mut hp = train::gradcheck_hyperparams();
    hp.seed = cfg.hp.seed;
    let report = train::grad_check(&hp, hp.seed)?;
    print!("{report}");
    if report.pass {
        Ok(())
    } else {
        Err(Error::Numeric("gradient check failed".into()))
    }
}

pub fn cmd_ablate(cfg: &RunConfig, variant: &str) -> Result<()> {
    let variant: Ablation = variant.parse()?;
    let cfg = RunConfig { variant, ..cfg.clone() };
    let (train_path, glove) = training_inputs(&cfg)?;
    let test_path = require(&cfg.test_data, "test_data")?;
    let key_path = require(&cfg.gold_key, "gold_key")?;
    let parsed_train = load_instances(&train_path)?;
    let parsed_test = load_instances(&test_path)?;
    let gold_key = corpus::load_answer_key(&key_path)?;
    let data = RunData {
        train_instances: &parsed_train.instances,
        inventory: &parsed_train.inventory,
        test_instances: &parsed_test.instances,
        gold_key: &gold_key,
        glove_path: glove.as_deref(),
    };
    let outcome = eval::run_ablation(cfg.variant, &data, &cfg.hp)?;
    fs::create_dir_all(&cfg.out_dir)?;
    eval::emit_report(&outcome.report, &outcome.predictions, &cfg.out_dir)?;
    model::save_model(&outcome.params, &cfg.out_dir.join("model.bin"))?;
    fs::write(cfg.out_dir.join("train.log"), train::format_log(&outcome.log))?;
    let c = outcome.report.overall;
    println!(
        "{variant:?}: attempted {} / {}  P {:.4}  R {:.4}  F {:.4}",
        c.attempted,
        c.total,
        c.precision(),
        c.recall(),
        c.f_measure()
    );
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::Parse { .. } | Error::Format(_) | Error::Key(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        // Ignore AlreadyInitialized so tests can call dispatch twice.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Eval { model } => cmd_eval(&cfg, model),
        Command::Predict { model, input } => cmd_predict(&cfg, model, input),
        Command::Gradcheck => cmd_gradcheck(&cfg),
        Command::Ablate { variant } => cmd_ablate(&cfg, variant),
    }
}

/// Parse arguments, run the command, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version via this path with code 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
