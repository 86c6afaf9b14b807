//! Dataset splits, metrics, the naive frequency baseline, and the
//! search-effectiveness harness.

pub mod report;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checker::Checker;
use crate::embedding::EmbeddingTable;
use crate::extract::{FunctionRecord, SlotId, SlotKind};
use crate::model::{
    build_inputs, predict_topk, ModelHyper, PredictionSet, TwinModels,
};
use crate::python;
use crate::rewrite;
use crate::search::{self, SlotCatalog, Strategy};
use crate::vocab::TypeVocabulary;

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

pub struct SplitOutcome {
    pub train: Vec<FunctionRecord>,
    pub validation: Vec<FunctionRecord>,
    /// Set when the corpus could not be split (e.g. a single file).
    pub warning: Option<String>,
}

/// Deterministic per-seed partition of the records by file path: no file
/// contributes to both sides.
pub fn split_by_file(records: &[FunctionRecord], ratio: f64, seed: u64) -> SplitOutcome {
    assert!(ratio > 0.0 && ratio < 1.0, "split ratio must be in (0, 1)");
    let mut files: Vec<&str> = records.iter().map(|r| r.file_path.as_str()).collect();
    files.sort_unstable();
    files.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    files.shuffle(&mut rng);
    let n_train = ((files.len() as f64 * ratio).floor() as usize).max(1);
    let train_files: std::collections::HashSet<&str> = files.iter().take(n_train).copied().collect();
    let (train, validation): (Vec<FunctionRecord>, Vec<FunctionRecord>) = records
        .iter()
        .cloned()
        .partition(|r| train_files.contains(r.file_path.as_str()));
    let warning = if validation.is_empty() {
        let msg = "validation split is empty (corpus has too few files)".to_string();
        log::warn!("{msg}");
        Some(msg)
    } else {
        None
    };
    SplitOutcome {
        train,
        validation,
        warning,
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MetricSummary {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Per-type metrics weighted by each type's share of the ground truth.
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub n_corr: usize,
    /// Slots with a non-empty suggestion list (abstentions excluded).
    pub n_all: usize,
    /// Ground-truth slots considered (out-of-vocabulary truths excluded).
    pub d: usize,
    pub abstained: usize,
    pub oov_excluded: usize,
    /// False when a denominator was empty and the metric was forced to 0.
    pub precision_defined: bool,
    pub recall_defined: bool,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Micro precision/recall/F1 at k, plus the type-frequency-weighted macro
/// variants. Slots whose ground truth is out of vocabulary are dropped
/// entirely; abstentions count against recall but not precision.
pub fn topk_metrics(
    predictions: &[PredictionSet],
    truth: &BTreeMap<(String, SlotId), String>,
    k: usize,
    vocab: &TypeVocabulary,
) -> MetricSummary {
    let by_slot: HashMap<(&str, &SlotId), &PredictionSet> = predictions
        .iter()
        .map(|p| ((p.file.as_str(), &p.slot), p))
        .collect();
    let mut n_corr = 0usize;
    let mut n_all = 0usize;
    let mut d = 0usize;
    let mut abstained = 0usize;
    let mut oov = 0usize;
    // type -> (correct, suggested, total)
    let mut per_type: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for ((file, slot), truth_type) in truth {
        if !vocab.contains(truth_type) {
            oov += 1;
            continue;
        }
        d += 1;
        let entry = per_type.entry(truth_type.as_str()).or_insert((0, 0, 0));
        entry.2 += 1;
        let Some(pred) = by_slot.get(&(file.as_str(), slot)) else {
            abstained += 1;
            continue;
        };
        if pred.ranked.is_empty() {
            abstained += 1;
            continue;
        }
        n_all += 1;
        entry.1 += 1;
        if pred.ranked.iter().take(k).any(|(t, _)| t == truth_type) {
            n_corr += 1;
            entry.0 += 1;
        }
    }
    let precision_defined = n_all > 0;
    let recall_defined = d > 0;
    let precision = if precision_defined {
        n_corr as f64 / n_all as f64
    } else {
        0.0
    };
    let recall = if recall_defined {
        n_corr as f64 / d as f64
    } else {
        0.0
    };
    let mut weighted_precision = 0.0;
    let mut weighted_recall = 0.0;
    let mut weighted_f1 = 0.0;
    if d > 0 {
        for (corr, sugg, total) in per_type.values() {
            let w = *total as f64 / d as f64;
            let p = if *sugg > 0 {
                *corr as f64 / *sugg as f64
            } else {
                0.0
            };
            let r = *corr as f64 / *total as f64;
            weighted_precision += w * p;
            weighted_recall += w * r;
            weighted_f1 += w * harmonic(p, r);
        }
    }
    MetricSummary {
        k,
        precision,
        recall,
        f1: harmonic(precision, recall),
        weighted_precision,
        weighted_recall,
        weighted_f1,
        n_corr,
        n_all,
        d,
        abstained,
        oov_excluded: oov,
        precision_defined,
        recall_defined,
    }
}

// ---------------------------------------------------------------------------
// Naive baseline
// ---------------------------------------------------------------------------

/// Context-free baseline: k distinct draws per slot, proportional to the
/// frequency of the ten most common training types.
pub fn naive_baseline(
    train_types: &[String],
    slots: &[(String, SlotId)],
    k: usize,
    seed: u64,
) -> Vec<PredictionSet> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in train_types {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut top: Vec<(&str, u64)> = counts.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    top.truncate(10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    slots
        .iter()
        .map(|(file, slot)| {
            let mut pool = top.clone();
            let mut ranked = Vec::new();
            while ranked.len() < k && !pool.is_empty() {
                let total: u64 = pool.iter().map(|(_, c)| c).sum();
                let mut draw = rng.gen_range(0..total);
                let mut idx = pool.len() - 1;
                for (i, (_, c)) in pool.iter().enumerate() {
                    if draw < *c {
                        idx = i;
                        break;
                    }
                    draw -= c;
                }
                let (t, c) = pool.remove(idx);
                let grand: u64 = top.iter().map(|(_, c)| c).sum();
                ranked.push((t.to_string(), c as f64 / grand as f64));
            }
            PredictionSet {
                file: file.clone(),
                slot: slot.clone(),
                ranked,
                contains_unknown_top1: false,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Model-backed prediction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotSelection {
    /// Slots with a declared type (evaluation against ground truth).
    Annotated,
    /// Unannotated slots (the annotation pipeline).
    Missing,
}

/// Everything needed to predict types for extracted records.
pub struct Predictor {
    pub vocab: TypeVocabulary,
    pub models: TwinModels,
    pub code_emb: EmbeddingTable,
    pub word_emb: EmbeddingTable,
    pub top_k: usize,
    pub threshold: f64,
}

impl Predictor {
    pub fn hyper(&self) -> &ModelHyper {
        &self.models.argument.hyper
    }

    /// Ranked predictions for the selected slots of the records.
    pub fn predict_records(
        &self,
        records: &[FunctionRecord],
        selection: SlotSelection,
    ) -> Vec<PredictionSet> {
        let mut jobs: Vec<(&FunctionRecord, SlotId)> = Vec::new();
        for r in records {
            for (slot, declared, _) in r.typed_slots() {
                let want = match selection {
                    SlotSelection::Annotated => declared.is_some(),
                    SlotSelection::Missing => declared.is_none(),
                };
                if want {
                    jobs.push((r, slot));
                }
            }
        }
        crate::par::map_ordered(jobs, |(record, slot)| self.predict_slot(record, slot))
    }

    fn predict_slot(&self, record: &FunctionRecord, slot: SlotId) -> PredictionSet {
        let params = match slot.slot {
            SlotKind::Argument(_) => &self.models.argument,
            SlotKind::Return => &self.models.ret,
        };
        let input = build_inputs(
            record,
            &slot,
            &self.vocab,
            &self.code_emb,
            &self.word_emb,
            &params.hyper,
        );
        let (ranked, abstain) = predict_topk(
            &input,
            params,
            &self.code_emb,
            &self.word_emb,
            &self.vocab,
            self.top_k,
            self.threshold,
        )
        .expect("inputs were built against this model's shapes");
        PredictionSet {
            file: record.file_path.clone(),
            slot,
            ranked,
            contains_unknown_top1: abstain,
        }
    }
}

/// Prediction source for the search harness; lets tests run scripted
/// predictors through the same pipeline.
pub trait SlotPredictor: Sync {
    fn predict(&self, records: &[FunctionRecord]) -> HashMap<SlotId, Vec<String>>;
}

impl SlotPredictor for Predictor {
    fn predict(&self, records: &[FunctionRecord]) -> HashMap<SlotId, Vec<String>> {
        self.predict_records(records, SlotSelection::Missing)
            .into_iter()
            .map(|p| (p.slot, p.ranked.into_iter().map(|(t, _)| t).collect()))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Search evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FileSearchOutcome {
    pub file: String,
    pub slots: usize,
    /// Annotation-level: slots the returned assignment fills (each one
    /// type-correct by construction).
    pub filled: usize,
    /// Filled slots whose type equals the ground truth.
    pub gt_matches: usize,
    /// Every slot filled and no added type errors.
    pub complete_correct: bool,
    /// Complete and identical to the ground truth.
    pub exact_match: bool,
    /// Slots whose ground truth appears in the top-k predictions.
    pub upper_bound_slots: usize,
    /// Ground truth reachable for every slot.
    pub upper_bound_file: bool,
    pub checker_calls: usize,
    /// (phase 1, phase 2) checker invocations.
    pub phase_calls: (usize, usize),
    pub return_slots: usize,
    pub argument_slots: usize,
    pub added_errors: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchEvalReport {
    pub strategy: String,
    pub top_k: usize,
    pub files: Vec<FileSearchOutcome>,
    pub total_slots: usize,
    pub total_filled: usize,
    pub total_gt_matches: usize,
    pub total_upper_bound: usize,
    pub files_complete_correct: usize,
    pub files_exact_match: usize,
    pub files_upper_bound: usize,
    /// Files dropped because they failed a precondition (parse, dirty
    /// baseline, no slots), with reasons.
    pub excluded: Vec<(String, String)>,
}

/// Strip each ground-truth file, predict, search, and compare against the
/// original annotations.
pub fn search_eval(
    files: &[(String, String)],
    predictor: &dyn SlotPredictor,
    checker: &dyn Checker,
    strategy: Strategy,
    top_k: usize,
    budget_factor: usize,
    seed: u64,
) -> SearchEvalReport {
    let mut report = SearchEvalReport {
        strategy: format!("{strategy:?}"),
        top_k,
        files: Vec::new(),
        total_slots: 0,
        total_filled: 0,
        total_gt_matches: 0,
        total_upper_bound: 0,
        files_complete_correct: 0,
        files_exact_match: 0,
        files_upper_bound: 0,
        excluded: Vec::new(),
    };
    // Files are independent; aggregation below stays single-threaded.
    let results = crate::par::map_ordered(files.to_vec(), |(file, source)| {
        let outcome = eval_one(
            &file, &source, predictor, checker, strategy, top_k, budget_factor, seed,
        );
        (file, outcome)
    });
    for (file, result) in results {
        match result {
            Ok(outcome) => {
                report.total_slots += outcome.slots;
                report.total_filled += outcome.filled;
                report.total_gt_matches += outcome.gt_matches;
                report.total_upper_bound += outcome.upper_bound_slots;
                report.files_complete_correct += outcome.complete_correct as usize;
                report.files_exact_match += outcome.exact_match as usize;
                report.files_upper_bound += outcome.upper_bound_file as usize;
                report.files.push(outcome);
            }
            Err(reason) => {
                log::warn!("{file}: excluded from search evaluation: {reason}");
                report.excluded.push((file, reason));
            }
        }
    }
    report
}

#[allow(clippy::too_many_arguments)]
fn eval_one(
    file: &str,
    source: &str,
    predictor: &dyn SlotPredictor,
    checker: &dyn Checker,
    strategy: Strategy,
    top_k: usize,
    budget_factor: usize,
    seed: u64,
) -> Result<FileSearchOutcome, String> {
    let baseline = checker
        .check(source)
        .map_err(|e| format!("does not check before stripping: {e}"))?;
    if baseline.n_errors() > 0 {
        return Err(format!(
            "has {} pre-existing type errors",
            baseline.n_errors()
        ));
    }
    let (stripped, truth) = rewrite::strip_annotations(source).map_err(|e| e.to_string())?;
    if truth.is_empty() {
        return Err("no annotated non-trivial slots".to_string());
    }
    let module = python::parse_module(&stripped).map_err(|e| e.to_string())?;
    let records = crate::extract::extract_from_module(&module, file);
    let mut predictions = predictor.predict(&records);
    for ranked in predictions.values_mut() {
        ranked.truncate(top_k);
    }
    let catalog = SlotCatalog::from_records(&records, &predictions);
    let outcome = search::two_phase_annotate(&stripped, &catalog, checker, strategy, budget_factor, seed)
        .map_err(|e| e.to_string())?;

    let slots = truth.len();
    let filled = outcome.assignment.len();
    let gt_matches = outcome
        .assignment
        .iter()
        .filter(|(slot, t)| truth.get(*slot) == Some(t))
        .count();
    let upper_bound_slots = truth
        .iter()
        .filter(|(slot, t)| {
            predictions
                .get(*slot)
                .map(|ranked| ranked.iter().any(|r| &r == t))
                .unwrap_or(false)
        })
        .count();
    let added_errors = outcome.final_errors as i64 - outcome.baseline_errors as i64;
    let complete_correct = filled == slots && added_errors <= 0;
    let return_slots = catalog
        .slots
        .iter()
        .filter(|s| matches!(s.id.slot, SlotKind::Return))
        .count();
    Ok(FileSearchOutcome {
        file: file.to_string(),
        slots,
        filled,
        gt_matches,
        complete_correct,
        exact_match: complete_correct && gt_matches == slots,
        upper_bound_slots,
        upper_bound_file: upper_bound_slots == slots,
        checker_calls: outcome.checker_calls,
        phase_calls: outcome.phase_calls,
        return_slots,
        argument_slots: catalog.slots.len() - return_slots,
        added_errors,
    })
}

// ---------------------------------------------------------------------------
// Embedding corpus assembly
// ---------------------------------------------------------------------------

/// Sentences for the two embeddings: per file, the rendered token stream
/// plus one normalized-identifier sentence per function (code), and the
/// docstring words (word).
pub fn embedding_sentences(
    sources: &[(String, String)],
) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut code = Vec::new();
    let mut word = Vec::new();
    for (path, source) in sources {
        let Ok(module) = python::parse_module(source) else {
            continue;
        };
        let stream: Vec<String> = module
            .tokens
            .iter()
            .filter(|t| {
                !matches!(
                    t.kind,
                    python::TokKind::EndMarker | python::TokKind::Indent | python::TokKind::Dedent
                )
            })
            .map(|t| crate::model::render_for_embedding(&python::render_token(t)))
            .collect();
        if stream.len() >= 2 {
            code.push(stream);
        }
        for record in crate::extract::extract_from_module(&module, path) {
            let mut sentence = crate::extract::normalize_identifier(&record.function_name);
            for a in &record.arguments {
                sentence.extend(crate::extract::normalize_identifier(&a.name));
            }
            if sentence.len() >= 2 {
                code.push(sentence);
            }
            if let Some(doc) = &record.docstring {
                let words = crate::extract::comment_words(doc);
                if words.len() >= 2 {
                    word.push(words);
                }
            }
        }
    }
    (code, word)
}

/// Declared types of every annotated non-trivial slot; the baseline's
/// training distribution and the metric ground truth both come from this.
pub fn annotated_slot_types(records: &[FunctionRecord]) -> Vec<((String, SlotId), String)> {
    let mut out = Vec::new();
    for r in records {
        for (slot, declared, _) in r.typed_slots() {
            if let Some(t) = declared {
                out.push(((r.file_path.clone(), slot), t));
            }
        }
    }
    out
}
