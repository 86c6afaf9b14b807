//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Run with `cargo test --test acceptance`.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;
use std::time::Instant;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use typesmith::checker::{BuiltinChecker, Checker};
use typesmith::config::Hyperparams;
use typesmith::embedding::{train_embeddings, EmbeddingConfig, EmbeddingKind, EmbeddingTable};
use typesmith::eval::{
    annotated_slot_types, embedding_sentences, naive_baseline, search_eval, split_by_file,
    topk_metrics, Predictor, SlotPredictor, SlotSelection,
};
use typesmith::extract::{extract_functions, FunctionRecord, SlotId};
use typesmith::model::{
    backward_batch, forward_batch, training_pairs, ModelHyper, ModelParameters, PredictionSet,
    SlotChannel, TwinModels,
};
use typesmith::rewrite;
use typesmith::search::{
    assign_types, two_phase_annotate, Evaluation, FeedbackOracle, OracleFeedback, SearchConfig,
    SlotCatalog, Strategy,
};
use typesmith::synth::{generate_sources, SynthConfig};
use typesmith::vocab::{build_type_vocabulary, TypeVocabulary};

// ---------------------------------------------------------------------------
// Criterion 1: the worked two-function example end to end
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_worked_example_end_to_end() {
    let source = "def find_match(color):\n    \"\"\"\n    Args:\n      color (str): color to match on and return\n    \"\"\"\n    candidates = get_colors()\n    for candidate in candidates:\n        if color == candidate:\n            return color\n    return None\n\ndef get_colors():\n    return [\"red\", \"blue\", \"green\"]\n";
    let records = extract_functions(source, "example.py").unwrap();
    let mut predictions = HashMap::new();
    predictions.insert(
        SlotId::argument("find_match", "color"),
        vec!["int".to_string(), "str".to_string(), "bool".to_string()],
    );
    predictions.insert(
        SlotId::ret("find_match"),
        vec![
            "str".to_string(),
            "Optional[str]".to_string(),
            "None".to_string(),
        ],
    );
    predictions.insert(
        SlotId::ret("get_colors"),
        vec![
            "List[str]".to_string(),
            "List[Any]".to_string(),
            "str".to_string(),
        ],
    );
    let catalog = SlotCatalog::from_records(&records, &predictions);
    let checker = BuiltinChecker::new();
    let start = Instant::now();
    let outcome = two_phase_annotate(source, &catalog, &checker, Strategy::Greedy, 7, 42).unwrap();
    let elapsed = start.elapsed();

    assert_eq!(
        outcome.assignment.get(&SlotId::argument("find_match", "color")),
        Some(&"str".to_string())
    );
    assert_eq!(
        outcome.assignment.get(&SlotId::ret("find_match")),
        Some(&"Optional[str]".to_string())
    );
    assert_eq!(
        outcome.assignment.get(&SlotId::ret("get_colors")),
        Some(&"List[str]".to_string())
    );
    assert!(
        outcome.checker_calls <= 7 * 3,
        "used {} checker calls",
        outcome.checker_calls
    );
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    assert!(outcome.annotated_source.contains("def find_match(color: str) -> Optional[str]:"));
    assert!(outcome.annotated_source.contains("def get_colors() -> List[str]:"));
    println!(
        "[criterion 1] PASS: worked example annotated correctly with {} checker calls in {elapsed:?}",
        outcome.checker_calls
    );
}

// ---------------------------------------------------------------------------
// Criteria 2 and 3: scripted-oracle instances
// ---------------------------------------------------------------------------

/// Oracle scripted directly over rank vectors; the error table stands in
/// for a checker.
struct ScriptedOracle {
    errors: HashMap<Vec<Option<usize>>, u32>,
}

impl FeedbackOracle for ScriptedOracle {
    fn evaluate(&mut self, ranks: &[Option<usize>]) -> Evaluation {
        let n_missing = ranks.iter().filter(|r| r.is_none()).count() as u32;
        let n_errors = *self.errors.get(ranks).unwrap_or(&0);
        Evaluation::Feasible(OracleFeedback {
            n_missing,
            error_lines: (0..n_errors).map(|i| 10 + i).collect(),
        })
    }
}

fn enumerate_space(catalog: &SlotCatalog) -> Vec<Vec<Option<usize>>> {
    fn go(catalog: &SlotCatalog, prefix: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if prefix.len() == catalog.slots.len() {
            out.push(prefix.clone());
            return;
        }
        let i = prefix.len();
        for r in 0..catalog.predictions[i].len() {
            prefix.push(Some(r));
            go(catalog, prefix, out);
            prefix.pop();
        }
        prefix.push(None);
        go(catalog, prefix, out);
        prefix.pop();
    }
    let mut out = Vec::new();
    go(catalog, &mut Vec::new(), &mut out);
    out
}

fn random_instance(rng: &mut ChaCha8Rng) -> (SlotCatalog, HashMap<Vec<Option<usize>>, u32>) {
    let n_slots = 1 + (rng.next_u32() as usize % 4); // |T| <= 4
    let k = 1 + (rng.next_u32() as usize % 3); // k <= 3
    let catalog = SlotCatalog {
        slots: (0..n_slots)
            .map(|i| typesmith::search::CatalogSlot {
                id: SlotId::ret(&format!("f{i}")),
                decl_line: (i as u32 + 1) * 5,
            })
            .collect(),
        predictions: (0..n_slots)
            .map(|_| (0..k).map(|j| format!("t{j}")).collect())
            .collect(),
    };
    let mut errors = HashMap::new();
    let baseline_errors = rng.next_u32() % 2;
    for ranks in enumerate_space(&catalog) {
        let e = if ranks.iter().all(|r| r.is_none()) {
            baseline_errors
        } else {
            rng.next_u32() % 3
        };
        errors.insert(ranks, e);
    }
    (catalog, errors)
}

#[test]
fn criterion_2_exhaustive_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(271828);
    let mut passed = 0;
    for trial in 0..100u64 {
        let (catalog, errors) = random_instance(&mut rng);
        let space = enumerate_space(&catalog);
        let w = catalog.slots.len() as u64 + 1;
        let brute_min = space
            .iter()
            .map(|ranks| {
                let missing = ranks.iter().filter(|r| r.is_none()).count() as u64;
                missing + w * (*errors.get(ranks).unwrap() as u64)
            })
            .min()
            .unwrap();
        let mut oracle = ScriptedOracle { errors };
        let mut config = SearchConfig::new(Strategy::NonGreedy, catalog.slots.len(), space.len(), trial);
        config.w = w;
        let out = assign_types(&mut oracle, &catalog, &config, None).unwrap();
        assert_eq!(
            out.best.score, brute_min,
            "trial {trial}: search found {} but the global minimum is {brute_min}",
            out.best.score
        );
        passed += 1;
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "[criterion 2] PASS: non-greedy matched the brute-force minimum on {passed}/100 instances in {elapsed:?}"
    );
}

/// Predictions with the truth buried at a random rank among plausible
/// decoys, so wrong candidates genuinely introduce errors.
struct BuriedTruthPredictor {
    truths: HashMap<SlotId, String>,
    seed: u64,
}

impl SlotPredictor for BuriedTruthPredictor {
    fn predict(&self, records: &[FunctionRecord]) -> HashMap<SlotId, Vec<String>> {
        let decoys = ["int", "str", "bool", "float", "List[str]", "Dict[str,int]"];
        let mut out = HashMap::new();
        for r in records {
            for (slot, declared, _) in r.typed_slots() {
                if declared.is_some() {
                    continue;
                }
                let Some(truth) = self.truths.get(&slot) else {
                    continue;
                };
                let mut h = std::collections::hash_map::DefaultHasher::new();
                use std::hash::{Hash, Hasher};
                (&slot, self.seed).hash(&mut h);
                let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
                let rank = rng.next_u32() as usize % 3;
                let mut ranked: Vec<String> = Vec::new();
                let mut di = 0;
                while ranked.len() < 3 {
                    if ranked.len() == rank {
                        ranked.push(truth.clone());
                    } else {
                        let d = decoys[(rng.next_u32() as usize + di) % decoys.len()];
                        di += 1;
                        if d != truth && !ranked.contains(&d.to_string()) {
                            ranked.push(d.to_string());
                        }
                    }
                }
                out.insert(slot, ranked);
            }
        }
        out
    }
}

#[test]
fn criterion_3_safety_and_budget() {
    // Part 1: the same scripted-instance distribution as criterion 2, with
    // the default budget.
    let mut rng = ChaCha8Rng::seed_from_u64(271828);
    for trial in 0..100u64 {
        let (catalog, errors) = random_instance(&mut rng);
        let baseline_errors = *errors.get(&vec![None; catalog.slots.len()]).unwrap();
        let budget = 7 * catalog.slots.len();
        for strategy in [Strategy::Greedy, Strategy::NonGreedy] {
            let mut oracle = ScriptedOracle {
                errors: errors.clone(),
            };
            let config = SearchConfig::new(strategy, catalog.slots.len(), budget, trial);
            let out = assign_types(&mut oracle, &catalog, &config, None).unwrap();
            assert!(
                out.best.n_errors <= baseline_errors,
                "trial {trial} {strategy:?}: returned {} errors over a baseline of {baseline_errors}",
                out.best.n_errors
            );
            assert!(
                out.checker_calls <= budget + 1,
                "trial {trial} {strategy:?}: {} calls exceed budget {budget}+1",
                out.checker_calls
            );
        }
    }

    // Part 2: 50 stripped files through the full pipeline.
    let cfg = SynthConfig {
        files: 50,
        functions_per_file: (3, 8),
        seed: 9090,
        ..SynthConfig::default()
    };
    let files = generate_sources(&cfg);
    let mut truths = HashMap::new();
    for (_, source) in &files {
        let (_, t) = rewrite::strip_annotations(source).unwrap();
        truths.extend(t);
    }
    let predictor = BuriedTruthPredictor { truths, seed: 17 };
    let checker = BuiltinChecker::new();
    let report = search_eval(&files, &predictor, &checker, Strategy::Greedy, 3, 7, 99);
    assert!(report.excluded.is_empty(), "{:?}", report.excluded);
    assert_eq!(report.files.len(), 50);
    for f in &report.files {
        assert!(f.added_errors <= 0, "{} added {} errors", f.file, f.added_errors);
        assert!(
            f.phase_calls.0 <= 7 * f.return_slots + 1,
            "{}: phase 1 used {} calls for {} slots",
            f.file,
            f.phase_calls.0,
            f.return_slots
        );
        assert!(
            f.phase_calls.1 <= 7 * f.argument_slots + 1,
            "{}: phase 2 used {} calls for {} slots",
            f.file,
            f.phase_calls.1,
            f.argument_slots
        );
    }
    println!(
        "[criterion 3] PASS: no added errors and budgets respected on 100 instances x 2 strategies and {} stripped files",
        report.files.len()
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: gradient check
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_gradient_check() {
    let hyper = ModelHyper {
        hidden: 4,
        code_dim: 3,
        word_dim: 3,
        id_len: 3,
        token_len: 3,
        max_windows: 1,
        comment_len: 3,
        vocab_size: 6,
        ablation: Default::default(),
    };
    let emb_cfg = EmbeddingConfig {
        dim: 3,
        window: 2,
        negatives: 2,
        epochs: 2,
        min_count: 1,
        initial_lr: 0.05,
        seed: 3,
    };
    let sentences: Vec<Vec<String>> = (0..8)
        .map(|i| (0..4).map(|j| format!("w{}", (i + j) % 6)).collect())
        .collect();
    let code = train_embeddings(&sentences, EmbeddingKind::Code, &emb_cfg).unwrap();
    let word = train_embeddings(&sentences, EmbeddingKind::Word, &emb_cfg).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for draw in 0..20u64 {
        let mut params = ModelParameters::init(&hyper, 1000 + draw);
        let inputs: Vec<typesmith::model::ModelInput> = (0..3)
            .map(|_| typesmith::model::ModelInput {
                id_seq: (0..3).map(|_| (rng.next_u32() as usize) % code.len()).collect(),
                token_seq: (0..3).map(|_| (rng.next_u32() as usize) % code.len()).collect(),
                comment_seq: (0..3).map(|_| (rng.next_u32() as usize) % word.len()).collect(),
                type_mask: (0..6).map(|_| f64::from(rng.next_u32() % 2)).collect(),
            })
            .collect();
        let labels: Vec<usize> = (0..3).map(|_| (rng.next_u32() as usize) % 6).collect();
        let input_refs: Vec<&typesmith::model::ModelInput> = inputs.iter().collect();

        let cache = forward_batch(&params, &input_refs, &code, &word).unwrap();
        let (_, grads) = backward_batch(&params, &cache, &labels);
        let analytic = grads.flatten();

        let mut flat = params.flatten();
        let eps = 1e-4;
        let loss_at = |params: &mut ModelParameters, flat: &[f64]| -> f64 {
            params.assign_flat(flat);
            let cache = forward_batch(params, &input_refs, &code, &word).unwrap();
            let mut loss = 0.0;
            for (bi, &y) in labels.iter().enumerate() {
                loss -= cache.probs[[bi, y]].ln();
            }
            loss / labels.len() as f64
        };
        for i in 0..flat.len() {
            let orig = flat[i];
            flat[i] = orig + eps;
            let up = loss_at(&mut params, &flat);
            flat[i] = orig - eps;
            let down = loss_at(&mut params, &flat);
            flat[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let denom = analytic[i].abs().max(numeric.abs());
            // Below the central-difference noise floor (ulp(loss)/eps ~ 1e-12,
            // plus O(eps^2) truncation) relative error is meaningless; hold
            // those to an absolute bound instead.
            if denom < 1e-8 {
                assert!(
                    (analytic[i] - numeric).abs() < 1e-8,
                    "draw {draw} parameter {i}: analytic {} vs numeric {numeric}",
                    analytic[i]
                );
                continue;
            }
            let rel = (analytic[i] - numeric).abs() / denom;
            worst = worst.max(rel);
            assert!(
                rel < 1e-3,
                "draw {draw} parameter {i}: analytic {} vs numeric {numeric} (rel {rel})",
                analytic[i]
            );
        }
        params.assign_flat(&flat);
    }
    println!("[criterion 4] PASS: gradients match finite differences over 20 draws (worst rel err {worst:.2e})");
}

// ---------------------------------------------------------------------------
// Criteria 5 and 6: learnability and ablation on the synthetic corpus
// ---------------------------------------------------------------------------

struct Fixture {
    vocab: TypeVocabulary,
    code: EmbeddingTable,
    word: EmbeddingTable,
    full: TwinModels,
    no_identifiers: TwinModels,
    train_records: Vec<FunctionRecord>,
    validation: Vec<FunctionRecord>,
    train_seconds: f64,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let started = Instant::now();
        let cfg = SynthConfig {
            files: 220,
            functions_per_file: (8, 12),
            annotated: true,
            docstring_prob: 0.0,
            varied_shapes: false,
            seed: 20_240_501,
        };
        let sources = generate_sources(&cfg);
        let mut records = Vec::new();
        for (name, source) in &sources {
            records.extend(extract_functions(source, name).unwrap());
        }
        let total_functions = records.len();
        assert!(total_functions >= 2000, "only {total_functions} functions");

        let split = split_by_file(&records, 0.8, 7);
        let vocab = build_type_vocabulary(&split.train, 1000).unwrap();

        // Embeddings come from the stripped sources: no annotations leak
        // into the token streams.
        let stripped: Vec<(String, String)> = sources
            .iter()
            .map(|(n, s)| (n.clone(), rewrite::strip_annotations(s).unwrap().0))
            .collect();
        let (code_sents, word_sents) = embedding_sentences(&stripped);
        let emb_cfg = EmbeddingConfig {
            dim: 24,
            window: 5,
            negatives: 5,
            epochs: 3,
            min_count: 5,
            initial_lr: 0.025,
            seed: 7,
        };
        let code = train_embeddings(&code_sents, EmbeddingKind::Code, &emb_cfg).unwrap();
        let word = match train_embeddings(&word_sents, EmbeddingKind::Word, &emb_cfg) {
            Ok(w) => w,
            Err(_) => train_embeddings(&code_sents, EmbeddingKind::Word, &emb_cfg).unwrap(),
        };

        let hp = Hyperparams {
            hidden: 32,
            epochs: 14,
            batch_size: 32,
            ..Hyperparams::default()
        };
        let hyper = ModelHyper::from_config(&hp, vocab.len(), code.dim, word.dim);
        let mut ablated_hyper = hyper.clone();
        ablated_hyper.ablation.identifiers = false;

        let train_pair = |hyper: &ModelHyper| -> TwinModels {
            let mut models = TwinModels {
                argument: ModelParameters::init(hyper, 11),
                ret: ModelParameters::init(hyper, 12),
            };
            for (channel, params) in [
                (SlotChannel::Argument, &mut models.argument),
                (SlotChannel::Return, &mut models.ret),
            ] {
                let pairs = training_pairs(&split.train, channel, &vocab, &code, &word, hyper);
                typesmith::model::train_model(
                    &pairs,
                    params,
                    hp.epochs,
                    hp.learning_rate,
                    hp.batch_size,
                    13,
                    &code,
                    &word,
                )
                .unwrap();
            }
            models
        };
        let full = train_pair(&hyper);
        let no_identifiers = train_pair(&ablated_hyper);
        Fixture {
            vocab,
            code,
            word,
            full,
            no_identifiers,
            train_records: split.train,
            validation: split.validation,
            train_seconds: started.elapsed().as_secs_f64(),
        }
    })
}

fn validation_metrics(fx: &Fixture, models: &TwinModels, k: usize) -> typesmith::eval::MetricSummary {
    let predictor = Predictor {
        vocab: fx.vocab.clone(),
        models: models.clone(),
        code_emb: fx.code.clone(),
        word_emb: fx.word.clone(),
        top_k: 5,
        threshold: 0.0,
    };
    let predictions = predictor.predict_records(&fx.validation, SlotSelection::Annotated);
    let truth: BTreeMap<(String, SlotId), String> =
        annotated_slot_types(&fx.validation).into_iter().collect();
    topk_metrics(&predictions, &truth, k, &fx.vocab)
}

#[test]
fn criterion_5_learnability_beats_naive_baseline() {
    let start = Instant::now();
    let fx = fixture();
    let m = validation_metrics(fx, &fx.full, 1);
    assert!(
        m.precision >= 0.90,
        "top-1 precision {:.3} below 0.90",
        m.precision
    );
    assert!(m.recall >= 0.85, "top-1 recall {:.3} below 0.85", m.recall);

    let train_types: Vec<String> = annotated_slot_types(&fx.train_records)
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let truth: BTreeMap<(String, SlotId), String> =
        annotated_slot_types(&fx.validation).into_iter().collect();
    let slots: Vec<(String, SlotId)> = truth.keys().cloned().collect();
    let baseline_preds = naive_baseline(&train_types, &slots, 1, 5);
    let b = topk_metrics(&baseline_preds, &truth, 1, &fx.vocab);
    assert!(
        b.precision <= 0.35,
        "naive baseline precision {:.3} above 0.35",
        b.precision
    );
    let total = start.elapsed().as_secs_f64() + fx.train_seconds;
    assert!(total < 600.0, "took {total:.0}s");
    println!(
        "[criterion 5] PASS: model top-1 precision {:.3} / recall {:.3} vs naive baseline precision {:.3} (fixture built in {:.0}s)",
        m.precision, m.recall, b.precision, fx.train_seconds
    );
}

#[test]
fn criterion_6_identifier_ablation_direction() {
    let fx = fixture();
    let full = validation_metrics(fx, &fx.full, 1);
    let ablated = validation_metrics(fx, &fx.no_identifiers, 1);
    let drop = full.f1 - ablated.f1;
    assert!(
        drop >= 0.2,
        "disabling identifiers dropped F1 by only {drop:.3} ({:.3} -> {:.3})",
        full.f1,
        ablated.f1
    );
    println!(
        "[criterion 6] PASS: identifier ablation drops top-1 F1 from {:.3} to {:.3} (drop {:.3})",
        full.f1, ablated.f1, drop
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: metric formulas on hand-computed cases
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_metric_formulas() {
    let vocab_src = "def a(x: int, y: str, z: bool, w: List[str]):\n    return x\n";
    let vocab = build_type_vocabulary(&extract_functions(vocab_src, "v.py").unwrap(), 100).unwrap();
    let pset = |i: usize, ranked: &[&str]| PredictionSet {
        file: "m.py".to_string(),
        slot: SlotId::argument(&format!("f{i}"), "x"),
        ranked: ranked
            .iter()
            .enumerate()
            .map(|(r, t)| (t.to_string(), 0.9 - 0.1 * r as f64))
            .collect(),
        contains_unknown_top1: ranked.is_empty(),
    };
    let truth_of = |entries: &[(usize, &str)]| -> BTreeMap<(String, SlotId), String> {
        entries
            .iter()
            .map(|(i, t)| {
                (
                    ("m.py".to_string(), SlotId::argument(&format!("f{i}"), "x")),
                    t.to_string(),
                )
            })
            .collect()
    };

    struct Case {
        name: &'static str,
        preds: Vec<PredictionSet>,
        truth: BTreeMap<(String, SlotId), String>,
        k: usize,
        expect: (f64, f64, f64),
    }
    let h = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };

    let cases = vec![
        Case {
            name: "all correct",
            preds: (0..4).map(|i| pset(i, &["int"])).collect(),
            truth: truth_of(&[(0, "int"), (1, "int"), (2, "int"), (3, "int")]),
            k: 1,
            expect: (1.0, 1.0, 1.0),
        },
        Case {
            name: "two abstain, six of eight correct",
            preds: (0..10)
                .map(|i| {
                    if i < 2 {
                        pset(i, &[])
                    } else if i < 8 {
                        pset(i, &["int"])
                    } else {
                        pset(i, &["str"])
                    }
                })
                .collect(),
            truth: truth_of(&(0..10).map(|i| (i, "int")).collect::<Vec<_>>()),
            k: 1,
            expect: (0.75, 0.6, h(0.75, 0.6)),
        },
        Case {
            name: "all abstain",
            preds: (0..5).map(|i| pset(i, &[])).collect(),
            truth: truth_of(&(0..5).map(|i| (i, "int")).collect::<Vec<_>>()),
            k: 1,
            expect: (0.0, 0.0, 0.0),
        },
        Case {
            name: "all wrong",
            preds: (0..4).map(|i| pset(i, &["str"])).collect(),
            truth: truth_of(&(0..4).map(|i| (i, "int")).collect::<Vec<_>>()),
            k: 1,
            expect: (0.0, 0.0, 0.0),
        },
        Case {
            name: "rank-2 rescued at k=2",
            preds: (0..4)
                .map(|i| {
                    if i < 2 {
                        pset(i, &["int", "str"])
                    } else {
                        pset(i, &["str", "int"])
                    }
                })
                .collect(),
            truth: truth_of(&(0..4).map(|i| (i, "int")).collect::<Vec<_>>()),
            k: 2,
            expect: (1.0, 1.0, 1.0),
        },
        Case {
            name: "rank-2 not counted at k=1",
            preds: (0..4)
                .map(|i| {
                    if i < 2 {
                        pset(i, &["int", "str"])
                    } else {
                        pset(i, &["str", "int"])
                    }
                })
                .collect(),
            truth: truth_of(&(0..4).map(|i| (i, "int")).collect::<Vec<_>>()),
            k: 1,
            expect: (0.5, 0.5, 0.5),
        },
        Case {
            name: "out-of-vocabulary truth excluded",
            preds: vec![pset(0, &["int"]), pset(1, &["int"]), pset(2, &["int"])],
            truth: truth_of(&[(0, "int"), (1, "Exotic"), (2, "str")]),
            k: 1,
            expect: (0.5, 0.5, 0.5),
        },
        Case {
            name: "mixed abstentions and a miss",
            preds: (0..6)
                .map(|i| {
                    if i < 2 {
                        pset(i, &[])
                    } else if i < 5 {
                        pset(i, &["int"])
                    } else {
                        pset(i, &["str"])
                    }
                })
                .collect(),
            truth: truth_of(&(0..6).map(|i| (i, "int")).collect::<Vec<_>>()),
            k: 1,
            expect: (0.75, 0.5, h(0.75, 0.5)),
        },
        Case {
            name: "single correct slot",
            preds: vec![pset(0, &["bool"])],
            truth: truth_of(&[(0, "bool")]),
            k: 1,
            expect: (1.0, 1.0, 1.0),
        },
        Case {
            name: "four of five duplicates correct",
            preds: (0..5)
                .map(|i| if i < 4 { pset(i, &["List[str]"]) } else { pset(i, &["int"]) })
                .collect(),
            truth: truth_of(&(0..5).map(|i| (i, "List[str]")).collect::<Vec<_>>()),
            k: 1,
            expect: (0.8, 0.8, 0.8),
        },
    ];
    assert_eq!(cases.len(), 10);
    for case in &cases {
        let m = topk_metrics(&case.preds, &case.truth, case.k, &vocab);
        assert!(
            (m.precision - case.expect.0).abs() < 1e-9,
            "{}: precision {} != {}",
            case.name,
            m.precision,
            case.expect.0
        );
        assert!(
            (m.recall - case.expect.1).abs() < 1e-9,
            "{}: recall {} != {}",
            case.name,
            m.recall,
            case.expect.1
        );
        assert!(
            (m.f1 - case.expect.2).abs() < 1e-9,
            "{}: f1 {} != {}",
            case.name,
            m.f1,
            case.expect.2
        );
    }
    println!("[criterion 7] PASS: 10 hand-computed metric cases match exactly");
}

// ---------------------------------------------------------------------------
// Criterion 8: rewriter round trip over 200 files
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_rewriter_round_trip() {
    let cfg = SynthConfig {
        files: 200,
        functions_per_file: (3, 9),
        seed: 321,
        ..SynthConfig::default()
    };
    let mut ok = 0;
    for (name, source) in generate_sources(&cfg) {
        let before = extract_functions(&source, &name).unwrap();
        let (stripped, truth) = rewrite::strip_annotations(&source).unwrap();
        let restored = rewrite::apply_assignment(&stripped, &truth).unwrap();
        assert_eq!(restored, source, "{name}: bytes changed through strip/apply");
        let after = extract_functions(&restored, &name).unwrap();
        assert_eq!(before, after, "{name}: extraction changed");
        // Non-annotation bytes: stripping again reproduces the same text.
        let (stripped2, truth2) = rewrite::strip_annotations(&restored).unwrap();
        assert_eq!(stripped, stripped2, "{name}");
        assert_eq!(truth, truth2, "{name}");
        ok += 1;
    }
    assert_eq!(ok, 200);
    println!("[criterion 8] PASS: strip/apply preserved all bytes and extraction on {ok}/200 files");
}

// ---------------------------------------------------------------------------
// Criterion 9: checker regression suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_checker_regression_suite() {
    let snippets: Vec<(&str, &str, Vec<u32>)> = vec![
        (
            "return mismatch",
            "def f(x: str) -> int:\n    return x\n",
            vec![2],
        ),
        ("fully unannotated", "def f(x):\n    return x\n", vec![]),
        ("correct return", "def f() -> int:\n    return 1\n", vec![]),
        ("fall off the end", "def f(x) -> int:\n    y = x\n", vec![1]),
        (
            "none into optional",
            "def f() -> Optional[int]:\n    return None\n",
            vec![],
        ),
        ("none return with pass", "def f() -> None:\n    pass\n", vec![]),
        (
            "call argument mismatch",
            "def g(x: int) -> int:\n    return x\n\ndef h() -> int:\n    return g(\"a\")\n",
            vec![5],
        ),
        (
            "int promotes to float",
            "def f(x: int) -> float:\n    return x + 1\n",
            vec![],
        ),
        (
            "str plus int",
            "def f() -> str:\n    return \"a\" + 1\n",
            vec![2],
        ),
        (
            "mixed display joins to Any",
            "def f() -> List[int]:\n    return [1, \"a\"]\n",
            vec![],
        ),
        (
            "list element invariance",
            "def f() -> List[int]:\n    return [\"a\", \"b\"]\n",
            vec![2],
        ),
        (
            "assignment propagation",
            "def f() -> int:\n    x = \"a\"\n    return x\n",
            vec![3],
        ),
        (
            "loop element flows",
            "def f(xs: List[str]) -> str:\n    for x in xs:\n        return x\n    return \"\"\n",
            vec![],
        ),
        (
            "loop element mismatch",
            "def f(xs: List[int]) -> str:\n    for x in xs:\n        return x\n    return \"\"\n",
            vec![3],
        ),
        (
            "same-file call return type",
            "def g() -> int:\n    return 1\n\ndef f() -> str:\n    return g()\n",
            vec![5],
        ),
        (
            "unannotated caller unchecked",
            "def g(x: int) -> int:\n    return x\n\ndef h():\n    return g(\"a\")\n",
            vec![],
        ),
        (
            "module-level call checked",
            "def g(x: int) -> int:\n    return x\n\ng(\"a\")\n",
            vec![4],
        ),
        ("generator skipped", "def f() -> int:\n    yield 1\n", vec![]),
        (
            "while true terminates",
            "def f() -> int:\n    while True:\n        return 1\n",
            vec![],
        ),
        (
            "if-else both return",
            "def f(x: int) -> int:\n    if x:\n        return 1\n    else:\n        return 2\n",
            vec![],
        ),
        (
            "if without else falls off",
            "def f(x: int) -> int:\n    if x:\n        return 1\n",
            vec![1],
        ),
        (
            "two bad returns",
            "def f(x: str) -> int:\n    if x:\n        return x\n    return \"b\"\n",
            vec![3, 4],
        ),
        (
            "keyword argument mismatch",
            "def g(x: int, y: str) -> int:\n    return x\n\ndef h() -> int:\n    return g(1, y=2)\n",
            vec![5],
        ),
        (
            "none into optional parameter",
            "def g(x: Optional[str]) -> None:\n    pass\n\ndef h() -> None:\n    g(None)\n",
            vec![],
        ),
        (
            "int into float parameter",
            "def g(x: float) -> None:\n    pass\n\ndef h() -> None:\n    g(3)\n",
            vec![],
        ),
        (
            "bool is not str",
            "def f(x: bool) -> str:\n    return x\n",
            vec![2],
        ),
        (
            "dict display matches",
            "def f() -> Dict[str,int]:\n    return {\"a\": 1}\n",
            vec![],
        ),
        (
            "dict value mismatch",
            "def f() -> Dict[str,int]:\n    return {\"a\": \"b\"}\n",
            vec![2],
        ),
        (
            "nested function checked independently",
            "def outer() -> int:\n    def inner() -> str:\n        return 1\n    return 2\n",
            vec![3],
        ),
        (
            "augmented assignment keeps int",
            "def f() -> int:\n    x = 1\n    x += 2\n    return x\n",
            vec![],
        ),
    ];
    assert_eq!(snippets.len(), 30);
    let checker = BuiltinChecker::new();
    for (name, source, expected) in &snippets {
        let report = checker.check(source).unwrap();
        assert_eq!(
            &report.error_lines, expected,
            "{name}: expected {expected:?}, got {:?}\n{source}",
            report.error_lines
        );
    }
    println!("[criterion 9] PASS: 30 checker snippets match expected diagnostics exactly");
}
