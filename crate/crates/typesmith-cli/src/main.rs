//! typesmith: predict Python argument/return types and insert only
//! type-correct annotations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use typesmith::checker::{BuiltinChecker, Checker, ExternalChecker, DEFAULT_DIAGNOSTIC_REGEX};
use typesmith::config::Hyperparams;
use typesmith::dataset;
use typesmith::embedding::{train_embeddings, EmbeddingConfig, EmbeddingKind, EmbeddingTable};
use typesmith::eval::{
    self, annotated_slot_types, embedding_sentences, naive_baseline, report, split_by_file,
    topk_metrics, Predictor, SlotSelection,
};
use typesmith::extract::{self, SlotKind};
use typesmith::model::{
    load_models, save_models, train_model, training_pairs, ModelHyper, ModelParameters,
    PredictionSet, SlotChannel, TwinModels,
};
use typesmith::rewrite;
use typesmith::search::{SlotCatalog, Strategy};
use typesmith::vocab::{build_type_vocabulary, TypeVocabulary};

#[derive(Parser)]
#[command(
    name = "typesmith",
    version,
    about = "Learns to predict Python argument and return types and inserts only type-correct annotations"
)]
struct Cli {
    /// Seed for every random choice (splits, training, search).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// TOML file overriding any subset of the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelFiles {
    /// Model checkpoint produced by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Vocabulary checkpoint produced by `train`.
    #[arg(long)]
    vocab: PathBuf,
    /// Code embedding produced by `train-embeddings`.
    #[arg(long)]
    code_emb: PathBuf,
    /// Word embedding produced by `train-embeddings`.
    #[arg(long)]
    word_emb: PathBuf,
}

#[derive(Args, Clone)]
struct CheckerOpts {
    /// `builtin` or `external`.
    #[arg(long, default_value = "builtin")]
    checker: String,
    /// Command template with a `{file}` placeholder, e.g.
    /// `mypy --no-error-summary {file}`.
    #[arg(long)]
    checker_cmd: Option<String>,
    /// Regex with a `line` capture group matching diagnostic lines.
    #[arg(long, default_value = DEFAULT_DIAGNOSTIC_REGEX)]
    diagnostic_regex: String,
    /// Defaults to the config value (60 s).
    #[arg(long)]
    checker_timeout_s: Option<u64>,
}

impl CheckerOpts {
    fn build(&self, hp: &Hyperparams) -> Result<Box<dyn Checker>> {
        match self.checker.as_str() {
            "builtin" => Ok(Box::new(BuiltinChecker::new())),
            "external" => {
                let cmd = self
                    .checker_cmd
                    .as_deref()
                    .context("--checker external requires --checker-cmd")?;
                let ck = ExternalChecker::new(
                    cmd,
                    &self.diagnostic_regex,
                    self.checker_timeout_s.unwrap_or(hp.checker_timeout_s),
                    hp.max_concurrent_checkers,
                )
                .map_err(|e| anyhow::anyhow!("{e}"))?;
                Ok(Box::new(ck))
            }
            other => bail!("unknown checker `{other}` (builtin|external)"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract function records from a directory of Python files.
    Extract {
        /// Directory tree of `.py` files.
        #[arg(long)]
        input: PathBuf,
        /// Output dataset (one JSON record per line).
        #[arg(long)]
        output: PathBuf,
    },
    /// Train the code and word embeddings from a source tree.
    TrainEmbeddings {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        code_out: PathBuf,
        #[arg(long)]
        word_out: PathBuf,
    },
    /// Build the type vocabulary and train both classifiers.
    Train {
        /// Dataset produced by `extract`.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        code_emb: PathBuf,
        #[arg(long)]
        word_emb: PathBuf,
        #[arg(long)]
        vocab_out: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Predict types for the unannotated slots of a file or directory.
    Predict {
        #[command(flatten)]
        files: ModelFiles,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Write predictions as JSON lines here (prints otherwise).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Search for a type-correct assignment and annotate one file.
    Annotate {
        #[command(flatten)]
        files: ModelFiles,
        #[arg(long)]
        input: PathBuf,
        /// Rewrite the file in place.
        #[arg(long)]
        write: bool,
        /// Print a unified diff instead of the annotated source.
        #[arg(long)]
        diff: bool,
        #[arg(long, default_value = "greedy")]
        strategy: String,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        budget_factor: Option<usize>,
        #[command(flatten)]
        checker: CheckerOpts,
    },
    /// Precision/recall/F1 of the model on the held-out split.
    EvalModel {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        files: ModelFiles,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write a precision/recall threshold curve (SVG) here.
        #[arg(long)]
        chart: Option<PathBuf>,
    },
    /// Strip annotated files, search, and compare with the ground truth.
    EvalSearch {
        /// Directory of fully annotated Python files.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        files: ModelFiles,
        #[arg(long, default_value = "greedy")]
        strategy: String,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        budget_factor: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        checker: CheckerOpts,
    },
    /// Frequency-sampling baseline metrics on the held-out split.
    Baseline {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
}

fn main() {
    // Dying quietly on a closed pipe (`typesmith ... | head`) beats a panic.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<Hyperparams> {
    match path {
        Some(p) => Ok(Hyperparams::load(p)?),
        None => Ok(Hyperparams::default()),
    }
}

fn read_sources(dir: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = walk_py(dir);
    paths.sort();
    for p in paths {
        let text = std::fs::read_to_string(&p)
            .with_context(|| format!("cannot read {}", p.display()))?;
        out.push((p.display().to_string(), text));
    }
    Ok(out)
}

fn walk_py(dir: &Path) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = std::fs::read_dir(&d) else {
            continue;
        };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().map(|x| x == "py").unwrap_or(false) {
                paths.push(p);
            }
        }
    }
    paths
}

fn load_predictor(files: &ModelFiles, hp: &Hyperparams, top_k: Option<usize>, threshold: Option<f64>) -> Result<Predictor> {
    let vocab = TypeVocabulary::load(&files.vocab).map_err(|e| anyhow::anyhow!("{e}"))?;
    let models = load_models(&files.model, &vocab).map_err(|e| anyhow::anyhow!("{e}"))?;
    let code_emb = EmbeddingTable::load(&files.code_emb).map_err(|e| anyhow::anyhow!("{e}"))?;
    let word_emb = EmbeddingTable::load(&files.word_emb).map_err(|e| anyhow::anyhow!("{e}"))?;
    let hyper = &models.argument.hyper;
    if code_emb.dim != hyper.code_dim || word_emb.dim != hyper.word_dim {
        bail!(
            "embedding dimensions ({}, {}) do not match the model ({}, {}); \
             pass the files the model was trained with",
            code_emb.dim,
            word_emb.dim,
            hyper.code_dim,
            hyper.word_dim
        );
    }
    Ok(Predictor {
        vocab,
        models,
        code_emb,
        word_emb,
        top_k: top_k.unwrap_or(hp.top_k),
        threshold: threshold.unwrap_or(hp.threshold),
    })
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let hp = load_config(&cli.config)?;
    match cli.command {
        Command::Extract { input, output } => {
            let options = extract::ExtractOptions {
                window_radius: hp.window_radius(),
                max_windows: hp.max_windows,
            };
            let outcome = extract::extract_dir_with(&input, options);
            for err in &outcome.skipped {
                log::warn!("skipped: {err}");
            }
            dataset::write_records(&output, &outcome.records)?;
            let slots: usize = outcome
                .records
                .iter()
                .map(|r| r.typed_slots().len())
                .sum();
            let annotated: usize = outcome
                .records
                .iter()
                .map(|r| r.typed_slots().iter().filter(|(_, t, _)| t.is_some()).count())
                .sum();
            println!(
                "extracted {} functions ({} non-trivial slots, {} annotated) from {}; skipped {} files",
                outcome.records.len(),
                slots,
                annotated,
                input.display(),
                outcome.skipped.len()
            );
        }
        Command::TrainEmbeddings {
            input,
            code_out,
            word_out,
        } => {
            let sources = read_sources(&input)?;
            let (code_sents, word_sents) = embedding_sentences(&sources);
            let cfg = EmbeddingConfig {
                dim: hp.embed_dim,
                window: hp.embed_window,
                negatives: hp.embed_negatives,
                epochs: hp.embed_epochs,
                min_count: hp.embed_min_count,
                initial_lr: 0.025,
                seed: cli.seed,
            };
            let code = train_embeddings(&code_sents, EmbeddingKind::Code, &cfg)
                .map_err(|e| anyhow::anyhow!("code embedding: {e}"))?;
            code.save(&code_out).map_err(|e| anyhow::anyhow!("{e}"))?;
            // Comments can be sparse; fall back to the code sentences so the
            // table always exists.
            let word = match train_embeddings(&word_sents, EmbeddingKind::Word, &cfg) {
                Ok(w) => w,
                Err(_) => {
                    log::warn!("too few comment words; training the word embedding on code sentences");
                    train_embeddings(&code_sents, EmbeddingKind::Word, &cfg)
                        .map_err(|e| anyhow::anyhow!("word embedding: {e}"))?
                }
            };
            word.save(&word_out).map_err(|e| anyhow::anyhow!("{e}"))?;
            println!(
                "trained embeddings: code {} words, word {} words, dim {}",
                code.len(),
                word.len(),
                cfg.dim
            );
        }
        Command::Train {
            dataset: dataset_path,
            code_emb,
            word_emb,
            vocab_out,
            model_out,
        } => {
            let records = dataset::read_records(&dataset_path)?;
            let split = split_by_file(&records, hp.split_ratio, cli.seed);
            let vocab = build_type_vocabulary(&split.train, hp.type_vocab_cap)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let code = EmbeddingTable::load(&code_emb).map_err(|e| anyhow::anyhow!("{e}"))?;
            let word = EmbeddingTable::load(&word_emb).map_err(|e| anyhow::anyhow!("{e}"))?;
            let hyper = ModelHyper::from_config(&hp, vocab.len(), code.dim, word.dim);
            println!(
                "vocabulary: {} types (cap {}), coverage {:.1}% of annotated occurrences",
                vocab.len(),
                hp.type_vocab_cap,
                100.0 * vocab.coverage(&split.train)
            );
            let mut models = TwinModels {
                argument: ModelParameters::init(&hyper, cli.seed),
                ret: ModelParameters::init(&hyper, cli.seed.wrapping_add(1)),
            };
            for (channel, params, label) in [
                (SlotChannel::Argument, &mut models.argument, "argument"),
                (SlotChannel::Return, &mut models.ret, "return"),
            ] {
                let pairs = training_pairs(&split.train, channel, &vocab, &code, &word, &hyper);
                println!("training the {label} model on {} slots", pairs.len());
                let report = train_model(
                    &pairs,
                    params,
                    hp.epochs,
                    hp.learning_rate,
                    hp.batch_size,
                    cli.seed,
                    &code,
                    &word,
                )
                .map_err(|e| anyhow::anyhow!("{e}"))?;
                for (i, loss) in report.epoch_losses.iter().enumerate() {
                    println!("  epoch {:>2}: loss {loss:.4}", i + 1);
                }
            }
            vocab.save(&vocab_out).map_err(|e| anyhow::anyhow!("{e}"))?;
            save_models(&model_out, &models, &vocab).map_err(|e| anyhow::anyhow!("{e}"))?;
            println!(
                "saved vocabulary to {} and models to {}",
                vocab_out.display(),
                model_out.display()
            );
        }
        Command::Predict {
            files,
            input,
            top_k,
            threshold,
            output,
        } => {
            let predictor = load_predictor(&files, &hp, top_k, threshold)?;
            let sources = if input.is_dir() {
                read_sources(&input)?
            } else {
                vec![(
                    input.display().to_string(),
                    std::fs::read_to_string(&input)?,
                )]
            };
            let mut all = Vec::new();
            for (path, source) in &sources {
                match extract::extract_functions(source, path) {
                    Ok(records) => {
                        all.extend(predictor.predict_records(&records, SlotSelection::Missing))
                    }
                    Err(e) => log::warn!("skipped: {e}"),
                }
            }
            match output {
                Some(path) => {
                    let mut text = String::new();
                    for p in &all {
                        text.push_str(&serde_json::to_string(p)?);
                        text.push('\n');
                    }
                    std::fs::write(&path, text)?;
                    println!("wrote {} predictions to {}", all.len(), path.display());
                }
                None => {
                    for p in &all {
                        let ranked: Vec<String> = p
                            .ranked
                            .iter()
                            .map(|(t, prob)| format!("{t} ({prob:.3})"))
                            .collect();
                        let suffix = if p.contains_unknown_top1 {
                            " [no suggestion]"
                        } else {
                            ""
                        };
                        println!("{}:{} -> {}{}", p.file, p.slot, ranked.join(", "), suffix);
                    }
                }
            }
        }
        Command::Annotate {
            files,
            input,
            write,
            diff,
            strategy,
            top_k,
            threshold,
            budget_factor,
            checker,
        } => {
            let predictor = load_predictor(&files, &hp, top_k, threshold)?;
            let strategy: Strategy = strategy.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            let checker = checker.build(&hp)?;
            let source = std::fs::read_to_string(&input)?;
            let records = extract::extract_functions(&source, &input.display().to_string())
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let predictions = predictor
                .predict_records(&records, SlotSelection::Missing)
                .into_iter()
                .map(|p| (p.slot, p.ranked.into_iter().map(|(t, _)| t).collect()))
                .collect();
            let catalog = SlotCatalog::from_records(&records, &predictions);
            let outcome = typesmith::search::two_phase_annotate(
                &source,
                &catalog,
                checker.as_ref(),
                strategy,
                budget_factor.unwrap_or(hp.budget_factor),
                cli.seed,
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            // Types that would need an import are worth flagging.
            let available: std::collections::HashSet<&str> = records
                .first()
                .map(|r| r.available_types.iter().map(|s| s.as_str()).collect())
                .unwrap_or_default();
            for (slot, t) in &outcome.assignment {
                let head = t.split('[').next().unwrap_or(t);
                if !typesmith::model::BUILTIN_MASK_TYPES.contains(&head) && !available.contains(head)
                {
                    log::warn!("{slot}: `{t}` is neither built-in nor imported in this file");
                }
            }
            eprintln!(
                "filled {}/{} slots with {} checker calls ({} errors before, {} after)",
                outcome.slots_filled,
                outcome.slots_total,
                outcome.checker_calls,
                outcome.baseline_errors,
                outcome.final_errors,
            );
            if write {
                std::fs::write(&input, &outcome.annotated_source)?;
                println!("updated {}", input.display());
            } else if diff {
                print!(
                    "{}",
                    rewrite::line_diff(&source, &outcome.annotated_source, &input.display().to_string())
                );
            } else {
                print!("{}", outcome.annotated_source);
            }
        }
        Command::EvalModel {
            dataset: dataset_path,
            files,
            report: report_path,
            chart,
        } => {
            let predictor = load_predictor(&files, &hp, Some(5), Some(0.0))?;
            let records = dataset::read_records(&dataset_path)?;
            let split = split_by_file(&records, hp.split_ratio, cli.seed);
            let validation = split.validation;
            let predictions = predictor.predict_records(&validation, SlotSelection::Annotated);
            // Keyed by (file, slot) as in the metrics contract.
            let truth: BTreeMap<_, _> = annotated_slot_types(&validation).into_iter().collect();
            let mut tasks = Vec::new();
            for (label, kind_is_ret) in [("ArgumentPrediction", false), ("ReturnPrediction", true)]
            {
                let preds: Vec<PredictionSet> = predictions
                    .iter()
                    .filter(|p| matches!(p.slot.slot, SlotKind::Return) == kind_is_ret)
                    .cloned()
                    .collect();
                let task_truth: BTreeMap<_, _> = truth
                    .iter()
                    .filter(|((_, slot), _)| {
                        matches!(slot.slot, SlotKind::Return) == kind_is_ret
                    })
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                let rows: Vec<_> = [1usize, 3, 5]
                    .iter()
                    .map(|&k| topk_metrics(&preds, &task_truth, k, &predictor.vocab))
                    .collect();
                print!("{}", report::metrics_table(label, &rows));
                tasks.push((label.to_string(), rows));
            }
            if let Some(path) = report_path {
                report::write_json(&path, &tasks)?;
                println!("wrote report to {}", path.display());
            }
            if let Some(path) = chart {
                let mut curves = Vec::new();
                for (label, _) in &tasks {
                    let kind_is_ret = label == "ReturnPrediction";
                    let mut points = Vec::new();
                    for step in 0..10 {
                        let t = step as f64 / 10.0;
                        let preds: Vec<PredictionSet> = predictions
                            .iter()
                            .filter(|p| matches!(p.slot.slot, SlotKind::Return) == kind_is_ret)
                            .map(|p| {
                                let mut q = p.clone();
                                q.ranked.retain(|(_, prob)| *prob >= t);
                                q
                            })
                            .collect();
                        let task_truth: BTreeMap<_, _> = truth
                            .iter()
                            .filter(|((_, slot), _)| {
                                matches!(slot.slot, SlotKind::Return) == kind_is_ret
                            })
                            .map(|(k, v)| (k.clone(), v.clone()))
                            .collect();
                        let m = topk_metrics(&preds, &task_truth, 1, &predictor.vocab);
                        points.push((t, m.precision, m.recall));
                    }
                    curves.push(report::Curve {
                        label: label.clone(),
                        points,
                    });
                }
                report::write_pr_curve_svg(&path, &curves)?;
                println!("wrote chart to {}", path.display());
            }
        }
        Command::EvalSearch {
            input,
            files,
            strategy,
            top_k,
            budget_factor,
            report: report_path,
            checker,
        } => {
            let predictor = load_predictor(&files, &hp, top_k, None)?;
            let strategy: Strategy = strategy.parse().map_err(|e: String| anyhow::anyhow!(e))?;
            let checker = checker.build(&hp)?;
            let sources = read_sources(&input)?;
            let rep = eval::search_eval(
                &sources,
                &predictor,
                checker.as_ref(),
                strategy,
                top_k.unwrap_or(hp.top_k),
                budget_factor.unwrap_or(hp.budget_factor),
                cli.seed,
            );
            print!("{}", report::search_table(&rep));
            if let Some(path) = report_path {
                report::write_json(&path, &rep)?;
                println!("wrote report to {}", path.display());
            }
        }
        Command::Baseline {
            dataset: dataset_path,
            k,
        } => {
            let records = dataset::read_records(&dataset_path)?;
            let split = split_by_file(&records, hp.split_ratio, cli.seed);
            let train_types: Vec<String> = annotated_slot_types(&split.train)
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            if train_types.is_empty() {
                bail!("no annotated training slots for the baseline");
            }
            let truth: BTreeMap<_, _> = annotated_slot_types(&split.validation)
                .into_iter()
                .collect();
            let slots: Vec<(String, typesmith::extract::SlotId)> =
                truth.keys().cloned().collect();
            let k = k.unwrap_or(hp.top_k);
            let preds = naive_baseline(&train_types, &slots, k, cli.seed);
            let vocab = build_type_vocabulary(&split.train, hp.type_vocab_cap)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let rows: Vec<_> = [1usize, 3, 5]
                .iter()
                .filter(|&&kk| kk <= k)
                .map(|&kk| topk_metrics(&preds, &truth, kk, &vocab))
                .collect();
            print!("{}", report::metrics_table("naive baseline", &rows));
            println!("training type distribution (top 10):");
            print!("{}", report::type_frequency_table(&train_types, 10));
        }
    }
    Ok(())
}
