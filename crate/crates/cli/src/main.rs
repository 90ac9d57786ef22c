use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use montok_core::encoder::Encoder;
use montok_core::model::TokenizerModel;
use montok_core::pipeline::{Experiment, ExperimentManifest, LanguageEntry, ReportKind, RunOptions, Stage};
use montok_core::synth::{default_languages, write_corpora};

/// Train comparable monolingual tokenizers, measure how evenly they compress
/// parallel text, and plan per-language vocabulary sizes.
#[derive(Parser)]
#[command(name = "montok", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Experiment manifest (JSON).
    manifest: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip grid cells already trained with identical inputs.
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage: train, evaluate, profile, fit, plan, retrain, validate, stats, report.
    Run(RunFlags),
    /// Train the tokenizer grid.
    Train(RunFlags),
    /// Measure every trained tokenizer on the evaluation text.
    Evaluate(RunFlags),
    /// Compute per-language predictor profiles.
    Profile(RunFlags),
    /// Fit power-law compression curves.
    Fit(RunFlags),
    /// Plan per-language vocabulary sizes for the target CTCs.
    Plan(RunFlags),
    /// Build and measure tokenizers at the planned vocabulary sizes.
    Retrain(RunFlags),
    /// Compare planned and measured CTCs.
    Validate(RunFlags),
    /// Run the significance tests.
    Stats(RunFlags),
    /// Write plot and table data.
    Report {
        #[command(flatten)]
        flags: RunFlags,
        /// all, density, box, regression or rmse
        #[arg(long, default_value = "all")]
        which: String,
    },
    /// Scan training corpora for evaluation-set prefixes.
    Contamination(RunFlags),
    /// Tokenize text with a saved model, one line of ids per input line.
    Encode {
        model: PathBuf,
        /// Read from this file instead of stdin.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Write synthetic parallel corpora and a manifest for trying the tool.
    Synth {
        /// Output directory.
        dir: PathBuf,
        /// Training bytes per language.
        #[arg(long, default_value_t = 1 << 20)]
        bytes: usize,
        /// Parallel evaluation lines per language.
        #[arg(long, default_value_t = 1000)]
        eval_lines: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated vocabulary sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [512, 1024, 2048, 3072, 4096, 6144, 8192])]
        vocab_grid: Vec<usize>,
    },
}

fn experiment(flags: &RunFlags) -> Result<Experiment> {
    let opts = RunOptions {
        jobs: flags.jobs,
        seed: flags.seed,
        resume: flags.resume,
        output_dir: std::env::var_os("MONTOK_OUT").map(PathBuf::from),
    };
    Experiment::load(&flags.manifest, &opts)
        .with_context(|| format!("loading manifest {}", flags.manifest.display()))
}

fn stage(flags: &RunFlags, stage: Stage) -> Result<()> {
    let exp = experiment(flags)?;
    exp.run_stage(stage).with_context(|| format!("stage {}", stage.as_str()))?;
    log::info!("{} done, outputs in {}", stage.as_str(), exp.output_dir().display());
    Ok(())
}

fn encode(model: &Path, file: Option<&Path>) -> Result<()> {
    let model = TokenizerModel::load(model).with_context(|| format!("loading {}", model.display()))?;
    let encoder = Encoder::new(&model);
    let input: Box<dyn BufRead> = match file {
        Some(p) => Box::new(io::BufReader::new(
            std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        None => Box::new(io::stdin().lock()),
    };
    let mut out = BufWriter::new(io::stdout().lock());
    for line in input.lines() {
        let ids = encoder.encode(&line?);
        let text: Vec<String> = ids.iter().map(u32::to_string).collect();
        writeln!(out, "{}", text.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

fn synth(dir: &Path, bytes: usize, eval_lines: usize, seed: u64, grid: &[usize]) -> Result<()> {
    let langs = default_languages();
    let files = write_corpora(&dir.join("data"), &langs, seed, bytes, eval_lines)?;
    let entries = files
        .into_iter()
        .map(|f| {
            Ok(LanguageEntry {
                corpus_paths: vec![f.train.strip_prefix(dir)?.to_path_buf()],
                eval_path: f.eval.strip_prefix(dir)?.to_path_buf(),
                tag: f.tag,
                phoneme_count: None,
            })
        })
        .collect::<Result<Vec<_>, std::path::StripPrefixError>>()?;
    let mut m = ExperimentManifest::new(entries, &langs[0].tag);
    m.train_bytes = bytes as u64;
    m.vocab_grid = grid.to_vec();
    m.output_dir = PathBuf::from("out");
    m.seed = seed;
    m.validate()?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, m.to_json()? + "\n")?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(f) => {
            let exp = experiment(f)?;
            exp.run()?;
            log::info!("run complete, outputs in {}", exp.output_dir().display());
            Ok(())
        }
        Command::Train(f) => stage(f, Stage::Train),
        Command::Evaluate(f) => stage(f, Stage::Evaluate),
        Command::Profile(f) => stage(f, Stage::Profile),
        Command::Fit(f) => stage(f, Stage::Fit),
        Command::Plan(f) => stage(f, Stage::Plan),
        Command::Retrain(f) => stage(f, Stage::Retrain),
        Command::Validate(f) => stage(f, Stage::Validate),
        Command::Stats(f) => stage(f, Stage::Stats),
        Command::Report { flags, which } => {
            let kind: ReportKind = which.parse()?;
            for p in experiment(flags)?.report(kind)? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::Contamination(f) => {
            let exp = experiment(f)?;
            let reports = exp.contamination()?;
            println!("{}", montok_core::corpus::ContaminationReport::CSV_HEADER);
            for r in reports {
                println!("{}", r.csv_row());
            }
            Ok(())
        }
        Command::Encode { model, file } => encode(model, file.as_deref()),
        Command::Synth { dir, bytes, eval_lines, seed, vocab_grid } => synth(dir, *bytes, *eval_lines, *seed, vocab_grid),
    }
}
