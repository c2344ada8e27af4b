use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cci_core::dataset::SplitStats;
use cci_core::trainer::log_path_for;
use cci_core::{
    compute_stats, load_id_list, load_preprocessed, load_records, predict, preprocess, select_subset, train_files,
    write_jsonl, CciRecord, Checkpoint, CommentType, ContrastiveConfig, PreprocessedRecord, RecordFormat, Report,
    Split, TrainConfig,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cci", version, about = "Just-in-time code-comment inconsistency detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diff and decompose raw records into preprocessed JSONL.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a model on preprocessed splits.
    Train(TrainArgs),
    /// Score a model on a preprocessed test split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// File with one record id per line.
        #[arg(long)]
        subset: Option<PathBuf>,
        /// Overrides the threshold stored in the model.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Judge a single code change against its comment.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        old_file: PathBuf,
        #[arg(long)]
        new_file: PathBuf,
        #[arg(long)]
        comment: String,
    },
    /// Count records per comment type and split.
    Stats {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.08)]
    tau: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 256)]
    max_len: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    attention: bool,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.lr,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
            loss: ContrastiveConfig { tau: self.tau, alpha: self.alpha, lambda: self.lambda },
            dim: self.dim,
            max_len: self.max_len,
            attention: self.attention,
            ..TrainConfig::default()
        }
    }
}

#[derive(Serialize)]
struct EvalReport {
    model: String,
    test: String,
    threshold: f64,
    full: Report,
    subset: Option<Report>,
}

#[derive(Serialize)]
struct Detection {
    probability: f64,
    verdict: &'static str,
    tagged_diff: String,
}

fn cmd_preprocess(input: &Path, output: &Path) -> Result<()> {
    let records = load_records(input, RecordFormat::CanonicalJsonl)
        .with_context(|| format!("reading {}", input.display()))?;
    let out = preprocess(&records);
    write_jsonl(output, &out)?;
    println!("preprocessed {} records into {}", out.len(), output.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = args.config();
    cfg.validate()?;
    let outcome = train_files(&args.train, &args.valid, &args.out, &cfg)?;
    let ck = &outcome.checkpoint;
    println!(
        "best epoch {} of {}, validation F1 {:.4}",
        ck.epoch, outcome.epochs_run, ck.validation_f1
    );
    println!("model: {}", args.out.display());
    println!("log: {}", log_path_for(&args.out).display());
    Ok(())
}

fn eval_path_for(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".eval.json");
    PathBuf::from(name)
}

fn score(ck: &Checkpoint, records: &[PreprocessedRecord], threshold: f64) -> Result<Report> {
    let preds = predict(records, &ck.params, &ck.vocab, threshold)?;
    let items: Vec<(CommentType, u8, u8)> = records
        .iter()
        .zip(&preds)
        .map(|(r, p)| (r.record.comment_type, p.label, r.record.label))
        .collect();
    Ok(Report::build(&items)?)
}

fn cmd_eval(model: &Path, test: &Path, subset: Option<&Path>, threshold: Option<f64>) -> Result<()> {
    let ck = Checkpoint::load(model)?;
    let threshold = threshold.unwrap_or(ck.threshold);
    if !(threshold > 0.0 && threshold < 1.0) {
        bail!("threshold must lie in (0, 1), got {threshold}");
    }
    let records = load_preprocessed(test).with_context(|| format!("reading {}", test.display()))?;
    let subset_records = match subset {
        Some(path) => {
            let ids = load_id_list(path)?;
            let picked: Vec<PreprocessedRecord> = select_subset(&records, &ids)?.into_iter().cloned().collect();
            Some(picked)
        }
        None => None,
    };

    let full = score(&ck, &records, threshold)?;
    println!("full test set ({} records, threshold {threshold})", records.len());
    print!("{}", full.render_table());
    let subset_report = match &subset_records {
        Some(sub) => {
            let r = score(&ck, sub, threshold)?;
            println!("\nsubset ({} records)", sub.len());
            print!("{}", r.render_table());
            Some(r)
        }
        None => None,
    };

    let report = EvalReport {
        model: model.display().to_string(),
        test: test.display().to_string(),
        threshold,
        full,
        subset: subset_report,
    };
    let path = eval_path_for(model);
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    println!("\nreport: {}", path.display());
    Ok(())
}

fn cmd_detect(model: &Path, old_file: &Path, new_file: &Path, comment: &str) -> Result<()> {
    if comment.trim().is_empty() {
        bail!("--comment must be non-empty");
    }
    let ck = Checkpoint::load(model)?;
    let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let record = CciRecord {
        id: "detect".into(),
        // Not an input to the model.
        comment_type: CommentType::Summary,
        comment: comment.to_string(),
        old_code: read(old_file)?,
        new_code: read(new_file)?,
        label: 0,
    };
    let pre = PreprocessedRecord::from_record(record);
    let p = predict(std::slice::from_ref(&pre), &ck.params, &ck.vocab, ck.threshold)?[0];
    let out = Detection {
        probability: p.probability,
        verdict: if p.label == 1 { "inconsistent" } else { "consistent" },
        tagged_diff: pre.tagged_diff,
    };
    println!("{}", serde_json::to_string(&out)?);
    Ok(())
}

fn cmd_stats(splits: [(Split, Option<&Path>); 3], json: bool) -> Result<()> {
    let mut loaded: Vec<(Split, Vec<CciRecord>)> = Vec::new();
    for (split, path) in splits {
        if let Some(path) = path {
            let records = load_records(path, RecordFormat::CanonicalJsonl)
                .with_context(|| format!("reading {}", path.display()))?;
            loaded.push((split, records));
        }
    }
    if loaded.is_empty() {
        bail!("give at least one of --train, --valid, --test");
    }
    let views: Vec<(Split, &[CciRecord])> = loaded.iter().map(|(s, r)| (*s, r.as_slice())).collect();
    let stats: SplitStats = compute_stats(&views);
    if json {
        println!("{}", serde_json::to_string(&stats)?);
    } else {
        print!("{}", stats.render_table());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess { input, output } => cmd_preprocess(&input, &output),
        Command::Train(args) => cmd_train(&args),
        Command::Eval { model, test, subset, threshold } => cmd_eval(&model, &test, subset.as_deref(), threshold),
        Command::Detect { model, old_file, new_file, comment } => cmd_detect(&model, &old_file, &new_file, &comment),
        Command::Stats { train, valid, test, json } => cmd_stats(
            [
                (Split::Train, train.as_deref()),
                (Split::Validation, valid.as_deref()),
                (Split::Test, test.as_deref()),
            ],
            json,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
