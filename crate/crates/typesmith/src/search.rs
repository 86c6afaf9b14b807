//! Feedback-directed combinatorial search over type assignments.
//!
//! Starting from the all-top-1 assignment, the search repeatedly picks a
//! candidate from a work set (biased random), scores it by running the
//! checker on the rewritten file, and expands its single-slot refinements:
//! the next-lower-ranked prediction per slot, or no type at all. Greedy
//! mode expands only score-improving states; non-greedy expands everything
//! not yet explored. The weighted score `v * n_missing + w * n_errors`
//! with `w = initially_missing + 1` makes any assignment that adds a type
//! error lose to the do-nothing baseline, so the returned assignment never
//! introduces errors.
//!
//! Annotation happens in two phases: return slots first (gradual checkers
//! only look inside functions whose return type is annotated), then
//! argument slots over the phase-1 result.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::checker::{Checker, CheckerReport};
use crate::extract::{FunctionRecord, SlotId, SlotKind};
use crate::rewrite::{self, Assignment};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("cannot score the unmodified file: {0}")]
    BaselineInfeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Greedy,
    NonGreedy,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(Strategy::Greedy),
            "non-greedy" | "nongreedy" => Ok(Strategy::NonGreedy),
            other => Err(format!("unknown strategy `{other}` (greedy|non-greedy)")),
        }
    }
}

/// One slot the search may fill.
#[derive(Debug, Clone)]
pub struct CatalogSlot {
    pub id: SlotId,
    pub decl_line: u32,
}

/// The searchable slots of one file plus their ranked predictions.
#[derive(Debug, Clone, Default)]
pub struct SlotCatalog {
    pub slots: Vec<CatalogSlot>,
    /// Aligned with `slots`; at most k entries each, possibly empty when the
    /// model abstained.
    pub predictions: Vec<Vec<String>>,
}

impl SlotCatalog {
    /// All non-trivial unannotated slots of the records, in record order,
    /// with predictions looked up per slot (missing entries mean abstention).
    pub fn from_records(
        records: &[FunctionRecord],
        predictions: &HashMap<SlotId, Vec<String>>,
    ) -> Self {
        let mut slots = Vec::new();
        let mut preds = Vec::new();
        for r in records {
            for (id, declared, line) in r.typed_slots() {
                if declared.is_none() {
                    preds.push(predictions.get(&id).cloned().unwrap_or_default());
                    slots.push(CatalogSlot { id, decl_line: line });
                }
            }
        }
        SlotCatalog {
            slots,
            predictions: preds,
        }
    }

    pub fn filter_kind(&self, keep_returns: bool) -> SlotCatalog {
        let mut slots = Vec::new();
        let mut preds = Vec::new();
        for (slot, p) in self.slots.iter().zip(&self.predictions) {
            let is_ret = matches!(slot.id.slot, SlotKind::Return);
            if is_ret == keep_returns {
                slots.push(slot.clone());
                preds.push(p.clone());
            }
        }
        SlotCatalog {
            slots,
            predictions: preds,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Materialize a rank vector into slot -> type-name edits.
    pub fn materialize(&self, ranks: &[Option<usize>]) -> Assignment {
        let mut a = Assignment::new();
        for ((slot, preds), rank) in self.slots.iter().zip(&self.predictions).zip(ranks) {
            if let Some(r) = rank {
                a.insert(slot.id.clone(), preds[*r].clone());
            }
        }
        a
    }
}

/// `score = v * n_missing + w * n_errors`.
pub fn feedback_score(report: &CheckerReport, v: u64, w: u64) -> u64 {
    v * report.n_missing as u64 + w * report.n_errors() as u64
}

#[derive(Debug, Clone)]
pub struct OracleFeedback {
    pub n_missing: u32,
    pub error_lines: Vec<u32>,
}

impl OracleFeedback {
    pub fn n_errors(&self) -> u32 {
        self.error_lines.len() as u32
    }
}

/// Outcome of scoring one candidate assignment.
pub enum Evaluation {
    Feasible(OracleFeedback),
    /// Unparseable candidate, checker crash, or timeout: the state is
    /// discarded and can never be returned.
    Infeasible(String),
}

/// The search's window onto the checker. One evaluation equals one
/// checker invocation for budget purposes.
pub trait FeedbackOracle {
    fn evaluate(&mut self, ranks: &[Option<usize>]) -> Evaluation;
}

/// Production oracle: rewrite the file with the candidate types, run the
/// checker on the result.
pub struct SourceOracle<'a> {
    source: String,
    catalog: &'a SlotCatalog,
    checker: &'a dyn Checker,
}

impl<'a> SourceOracle<'a> {
    pub fn new(source: &str, catalog: &'a SlotCatalog, checker: &'a dyn Checker) -> Self {
        SourceOracle {
            source: source.to_string(),
            catalog,
            checker,
        }
    }
}

impl FeedbackOracle for SourceOracle<'_> {
    fn evaluate(&mut self, ranks: &[Option<usize>]) -> Evaluation {
        let assignment = self.catalog.materialize(ranks);
        let candidate = match rewrite::apply_assignment(&self.source, &assignment) {
            Ok(c) => c,
            Err(e) => return Evaluation::Infeasible(e.to_string()),
        };
        match self.checker.check(&candidate) {
            Ok(report) => Evaluation::Feasible(OracleFeedback {
                n_missing: report.n_missing,
                error_lines: report.error_lines,
            }),
            Err(e) => Evaluation::Infeasible(e.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub strategy: Strategy,
    /// Weight of missing annotations (v).
    pub v: u64,
    /// Weight of type errors (w); callers set it to initially-missing + 1.
    pub w: u64,
    /// Checker invocations allowed after the initial state.
    pub budget: usize,
    pub bias_assigned: f64,
    pub bias_proximity: f64,
    pub proximity_lines: u32,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(strategy: Strategy, initially_missing: usize, budget: usize, seed: u64) -> Self {
        let hp = crate::config::Hyperparams::default();
        SearchConfig {
            strategy,
            v: 1,
            w: initially_missing as u64 + 1,
            budget,
            bias_assigned: hp.bias_assigned,
            bias_proximity: hp.bias_proximity,
            proximity_lines: hp.proximity_lines,
            seed,
        }
    }
}

/// A scored assignment. `ranks` holds 0-based prediction indices; `None`
/// leaves the slot unannotated.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub ranks: Vec<Option<usize>>,
    pub score: u64,
    pub n_missing: u32,
    pub n_errors: u32,
    pub error_lines: Rc<Vec<u32>>,
    pub changed_slot: Option<usize>,
    discovery: usize,
}

impl SearchState {
    fn assigned(&self) -> usize {
        self.ranks.iter().filter(|r| r.is_some()).count()
    }

    fn rank_sum(&self) -> usize {
        self.ranks.iter().map(|r| r.map(|x| x + 1).unwrap_or(0)).sum()
    }

    /// Ordering used at argmin: score, then more assigned slots, then types
    /// the model ranked higher, then discovery order.
    fn argmin_key(&self) -> (u64, i64, usize, usize) {
        (
            self.score,
            -(self.assigned() as i64),
            self.rank_sum(),
            self.discovery,
        )
    }
}

/// A generated but not yet scored state.
struct Pending {
    ranks: Vec<Option<usize>>,
    changed_slot: Option<usize>,
    parent_score: u64,
    parent_error_lines: Rc<Vec<u32>>,
}

pub struct SearchOutcome {
    pub best: SearchState,
    pub checker_calls: usize,
    pub baseline: OracleFeedback,
    pub explored: usize,
}

/// Single-slot refinements: per slot, every strictly lower-ranked
/// prediction plus the no-type option. A slot already at no-type is
/// terminal.
pub fn new_states(ranks: &[Option<usize>], catalog: &SlotCatalog) -> Vec<(Vec<Option<usize>>, usize)> {
    let mut children = Vec::new();
    for (i, rank) in ranks.iter().enumerate() {
        let Some(cur) = rank else {
            continue;
        };
        let k = catalog.predictions[i].len();
        for j in (cur + 1)..k {
            let mut child = ranks.to_vec();
            child[i] = Some(j);
            children.push((child, i));
        }
        let mut none_child = ranks.to_vec();
        none_child[i] = None;
        children.push((none_child, i));
    }
    children
}

/// Weighted random removal from the work set. Prefers states that assign
/// more slots and states whose changed slot sits near a parent error line.
fn pick(
    work: &mut Vec<Pending>,
    rng: &mut ChaCha8Rng,
    catalog: &SlotCatalog,
    config: &SearchConfig,
) -> Pending {
    debug_assert!(!work.is_empty());
    let total_slots = catalog.slots.len().max(1);
    let weights: Vec<f64> = work
        .iter()
        .map(|p| {
            let assigned = p.ranks.iter().filter(|r| r.is_some()).count();
            let proximity = match p.changed_slot {
                Some(i) => {
                    let line = catalog.slots[i].decl_line;
                    let near = p.parent_error_lines.iter().any(|e| {
                        line.abs_diff(*e) <= config.proximity_lines
                    });
                    if near {
                        1.0
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            };
            1.0 + config.bias_assigned * (assigned as f64 / total_slots as f64)
                + config.bias_proximity * proximity
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen_range(0.0..total);
    let mut idx = work.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        if draw < *w {
            idx = i;
            break;
        }
        draw -= w;
    }
    work.swap_remove(idx)
}

/// Run one search phase over the catalog.
///
/// `pre_baseline` supplies the feedback of the unmodified file when the
/// caller already knows it (phase 2 reuses phase 1's result); otherwise the
/// baseline costs the first checker call. Total checker calls never exceed
/// `budget + 1`.
pub fn assign_types(
    oracle: &mut dyn FeedbackOracle,
    catalog: &SlotCatalog,
    config: &SearchConfig,
    pre_baseline: Option<OracleFeedback>,
) -> Result<SearchOutcome, SearchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut calls = 0usize;
    let call_cap = config.budget + 1;
    let n = catalog.slots.len();

    let baseline_ranks: Vec<Option<usize>> = vec![None; n];
    let baseline = match pre_baseline {
        Some(fb) => fb,
        None => {
            calls += 1;
            match oracle.evaluate(&baseline_ranks) {
                Evaluation::Feasible(fb) => fb,
                Evaluation::Infeasible(reason) => {
                    return Err(SearchError::BaselineInfeasible(reason))
                }
            }
        }
    };
    let mut discovery = 0usize;
    let mk_state = |ranks: Vec<Option<usize>>,
                        fb: &OracleFeedback,
                        changed: Option<usize>,
                        discovery: usize| SearchState {
        score: config.v * fb.n_missing as u64 + config.w * fb.n_errors() as u64,
        n_missing: fb.n_missing,
        n_errors: fb.n_errors(),
        error_lines: Rc::new(fb.error_lines.clone()),
        ranks,
        changed_slot: changed,
        discovery,
    };

    let baseline_state = mk_state(baseline_ranks.clone(), &baseline, None, discovery);
    discovery += 1;

    let mut done: Vec<SearchState> = Vec::new();
    let mut done_keys: HashSet<Vec<Option<usize>>> = HashSet::new();
    done_keys.insert(baseline_state.ranks.clone());
    done.push(baseline_state);

    // Initial state: top-1 everywhere a prediction exists.
    let initial_ranks: Vec<Option<usize>> = catalog
        .predictions
        .iter()
        .map(|p| if p.is_empty() { None } else { Some(0) })
        .collect();

    let mut work: Vec<Pending> = Vec::new();
    let mut work_keys: HashSet<Vec<Option<usize>>> = HashSet::new();

    if !done_keys.contains(&initial_ranks) && calls < call_cap {
        calls += 1;
        match oracle.evaluate(&initial_ranks) {
            Evaluation::Feasible(fb) => {
                let st = mk_state(initial_ranks.clone(), &fb, None, discovery);
                discovery += 1;
                for (child, changed) in new_states(&st.ranks, catalog) {
                    if !done_keys.contains(&child) && work_keys.insert(child.clone()) {
                        work.push(Pending {
                            ranks: child,
                            changed_slot: Some(changed),
                            parent_score: st.score,
                            parent_error_lines: Rc::clone(&st.error_lines),
                        });
                    }
                }
                done_keys.insert(st.ranks.clone());
                done.push(st);
            }
            Evaluation::Infeasible(reason) => {
                log::debug!("initial state infeasible: {reason}");
                // Children of the unusable initial state are still the
                // frontier; their parent score is unbeatable so greedy mode
                // expands any feasible child.
                for (child, changed) in new_states(&initial_ranks, catalog) {
                    if !done_keys.contains(&child) && work_keys.insert(child.clone()) {
                        work.push(Pending {
                            ranks: child,
                            changed_slot: Some(changed),
                            parent_score: u64::MAX,
                            parent_error_lines: Rc::new(Vec::new()),
                        });
                    }
                }
            }
        }
    }

    while done.iter().map(|s| s.score).min().unwrap_or(u64::MAX) > 0
        && !work.is_empty()
        && calls < call_cap
    {
        let pending = pick(&mut work, &mut rng, catalog, config);
        work_keys.remove(&pending.ranks);
        calls += 1;
        let fb = match oracle.evaluate(&pending.ranks) {
            Evaluation::Feasible(fb) => fb,
            Evaluation::Infeasible(reason) => {
                log::debug!("candidate discarded: {reason}");
                continue;
            }
        };
        let st = mk_state(pending.ranks.clone(), &fb, pending.changed_slot, discovery);
        discovery += 1;
        let expand = match config.strategy {
            Strategy::Greedy => st.score < pending.parent_score,
            Strategy::NonGreedy => true,
        };
        if expand {
            for (child, changed) in new_states(&st.ranks, catalog) {
                if !done_keys.contains(&child) && work_keys.insert(child.clone()) {
                    work.push(Pending {
                        ranks: child,
                        changed_slot: Some(changed),
                        parent_score: st.score,
                        parent_error_lines: Rc::clone(&st.error_lines),
                    });
                }
            }
        }
        done_keys.insert(st.ranks.clone());
        done.push(st);
    }

    let best = done
        .iter()
        .min_by_key(|s| s.argmin_key())
        .expect("done holds at least the baseline")
        .clone();
    Ok(SearchOutcome {
        best,
        checker_calls: calls,
        baseline,
        explored: done.len(),
    })
}

pub struct TwoPhaseOutcome {
    pub assignment: Assignment,
    pub annotated_source: String,
    pub checker_calls: usize,
    pub phase_calls: (usize, usize),
    /// Errors in the unmodified file.
    pub baseline_errors: u32,
    /// Errors in the returned file.
    pub final_errors: u32,
    pub slots_total: usize,
    pub slots_filled: usize,
}

/// Return-slots-first search, then argument slots over the phase-1 result.
pub fn two_phase_annotate(
    source: &str,
    catalog: &SlotCatalog,
    checker: &dyn Checker,
    strategy: Strategy,
    budget_factor: usize,
    seed: u64,
) -> Result<TwoPhaseOutcome, SearchError> {
    let initially_missing = catalog.slots.len();
    let ret_catalog = catalog.filter_kind(true);
    let arg_catalog = catalog.filter_kind(false);

    let mk_config = |slots: usize, seed_offset: u64| {
        let mut c = SearchConfig::new(
            strategy,
            initially_missing,
            budget_factor * slots,
            seed ^ seed_offset,
        );
        c.w = initially_missing as u64 + 1;
        c
    };

    // Phase 1: return slots against the original file.
    let mut oracle1 = SourceOracle::new(source, &ret_catalog, checker);
    let cfg1 = mk_config(ret_catalog.slots.len(), 0x9e3779b97f4a7c15);
    let phase1 = assign_types(&mut oracle1, &ret_catalog, &cfg1, None)?;
    let ret_assignment = ret_catalog.materialize(&phase1.best.ranks);
    let baked = rewrite::apply_assignment(source, &ret_assignment)
        .expect("phase-1 best was feasible during the search");

    // Phase 2: argument slots against the baked file. The phase-1 result is
    // exactly phase 2's unmodified file, so its feedback is reused.
    let pre_baseline = OracleFeedback {
        n_missing: phase1.best.n_missing,
        error_lines: (*phase1.best.error_lines).clone(),
    };
    let mut oracle2 = SourceOracle::new(&baked, &arg_catalog, checker);
    let cfg2 = mk_config(arg_catalog.slots.len(), 0x5851f42d4c957f2d);
    let phase2 = assign_types(&mut oracle2, &arg_catalog, &cfg2, Some(pre_baseline))?;
    let arg_assignment = arg_catalog.materialize(&phase2.best.ranks);

    let mut assignment = ret_assignment;
    assignment.extend(arg_assignment);
    let annotated_source =
        rewrite::apply_assignment(source, &assignment).expect("merged assignment was feasible");
    Ok(TwoPhaseOutcome {
        slots_filled: assignment.len(),
        assignment,
        annotated_source,
        checker_calls: phase1.checker_calls + phase2.checker_calls,
        phase_calls: (phase1.checker_calls, phase2.checker_calls),
        baseline_errors: phase1.baseline.n_errors(),
        final_errors: phase2.best.n_errors,
        slots_total: initially_missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::BuiltinChecker;

    fn slot(name: &str, line: u32) -> CatalogSlot {
        CatalogSlot {
            id: SlotId::ret(name),
            decl_line: line,
        }
    }

    fn catalog(preds: &[&[&str]]) -> SlotCatalog {
        SlotCatalog {
            slots: (0..preds.len())
                .map(|i| slot(&format!("f{i}"), i as u32 + 1))
                .collect(),
            predictions: preds
                .iter()
                .map(|p| p.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    /// Oracle scripted directly over rank vectors.
    struct TableOracle {
        errors: HashMap<Vec<Option<usize>>, u32>,
    }

    impl FeedbackOracle for TableOracle {
        fn evaluate(&mut self, ranks: &[Option<usize>]) -> Evaluation {
            let n_missing = ranks.iter().filter(|r| r.is_none()).count() as u32;
            let n_errors = *self.errors.get(ranks).unwrap_or(&0);
            Evaluation::Feasible(OracleFeedback {
                n_missing,
                error_lines: (0..n_errors).map(|i| i + 1).collect(),
            })
        }
    }

    #[test]
    fn feedback_score_formula() {
        let report = CheckerReport {
            n_missing: 2,
            error_lines: vec![7],
            checker_id: "builtin".into(),
        };
        // 5 initially missing means w = 6.
        assert_eq!(feedback_score(&report, 1, 6), 8);
        let clean = CheckerReport {
            n_missing: 0,
            error_lines: vec![],
            checker_id: "builtin".into(),
        };
        assert_eq!(feedback_score(&clean, 1, 6), 0);
        let nothing_assigned = CheckerReport {
            n_missing: 5,
            error_lines: vec![],
            checker_id: "builtin".into(),
        };
        // Assigning nothing (5) beats a 0-missing 1-error state (6).
        assert_eq!(feedback_score(&nothing_assigned, 1, 6), 5);
        assert!(feedback_score(&nothing_assigned, 1, 6) < 6);
    }

    #[test]
    fn new_states_counts() {
        let cat = catalog(&[&["a", "b", "c"]]);
        // rank 1 of 3 (0-based 0): children are ranks 2, 3 and NONE.
        let children = new_states(&[Some(0)], &cat);
        assert_eq!(children.len(), 3);
        // NONE is terminal.
        assert!(new_states(&[None], &cat).is_empty());
        // two slots at rank 1 with k = 2: two children each.
        let cat2 = catalog(&[&["a", "b"], &["c", "d"]]);
        assert_eq!(new_states(&[Some(0), Some(0)], &cat2).len(), 4);
    }

    #[test]
    fn ranks_never_decrease_along_edges() {
        let cat = catalog(&[&["a", "b", "c"], &["d", "e"]]);
        let parent = [Some(0), Some(1)];
        for (child, changed) in new_states(&parent, &cat) {
            for i in 0..parent.len() {
                match (parent[i], child[i]) {
                    (Some(p), Some(c)) => assert!(c >= p),
                    (Some(_), None) => assert_eq!(i, changed),
                    (None, Some(_)) => panic!("slot resurrected"),
                    (None, None) => {}
                }
            }
        }
    }

    #[test]
    fn pick_is_deterministic_per_seed() {
        let cat = catalog(&[&["a", "b"]]);
        let config = SearchConfig::new(Strategy::Greedy, 1, 10, 7);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut work = vec![
                Pending {
                    ranks: vec![Some(0)],
                    changed_slot: Some(0),
                    parent_score: 10,
                    parent_error_lines: Rc::new(vec![]),
                },
                Pending {
                    ranks: vec![Some(1)],
                    changed_slot: Some(0),
                    parent_score: 10,
                    parent_error_lines: Rc::new(vec![]),
                },
            ];
            pick(&mut work, &mut rng, &cat, &config).ranks
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn pick_prefers_error_adjacent_states_in_the_limit() {
        // B -> infinity: a state whose changed slot sits on a parent error
        // line always wins over one that does not.
        let cat = SlotCatalog {
            slots: vec![slot("near", 5), slot("far", 50)],
            predictions: vec![vec!["t".into()], vec!["t".into()]],
        };
        let mut config = SearchConfig::new(Strategy::Greedy, 2, 10, 7);
        config.bias_assigned = 0.0;
        config.bias_proximity = 1e12;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut work = vec![
                Pending {
                    ranks: vec![Some(0), Some(0)],
                    changed_slot: Some(1),
                    parent_score: 10,
                    parent_error_lines: Rc::new(vec![5]),
                },
                Pending {
                    ranks: vec![Some(0), Some(0)],
                    changed_slot: Some(0),
                    parent_score: 10,
                    parent_error_lines: Rc::new(vec![5]),
                },
            ];
            let picked = pick(&mut work, &mut rng, &cat, &config);
            assert_eq!(picked.changed_slot, Some(0));
        }
    }

    #[test]
    fn pick_frequency_matches_weights() {
        // Weight 2 (fully assigned) vs weight 1 (nothing assigned) with
        // A = 1, B = 0: the 2:1 ratio shows up empirically.
        let cat = catalog(&[&["a", "b"], &["c", "d"]]);
        let mut config = SearchConfig::new(Strategy::Greedy, 2, 10, 7);
        config.bias_assigned = 1.0;
        config.bias_proximity = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut heavy = 0usize;
        let draws = 10_000;
        for _ in 0..draws {
            let mut work = vec![
                Pending {
                    ranks: vec![Some(0), Some(0)],
                    changed_slot: Some(0),
                    parent_score: 10,
                    parent_error_lines: Rc::new(vec![]),
                },
                Pending {
                    ranks: vec![None, None],
                    changed_slot: Some(0),
                    parent_score: 10,
                    parent_error_lines: Rc::new(vec![]),
                },
            ];
            if pick(&mut work, &mut rng, &cat, &config).ranks[0].is_some() {
                heavy += 1;
            }
        }
        let freq = heavy as f64 / draws as f64;
        // Expected 2/3; the ratio must hold to within 5%.
        assert!((freq - 2.0 / 3.0).abs() < 0.05 * (2.0 / 3.0), "freq {freq}");
    }

    #[test]
    fn correct_top1_returns_initial_after_minimal_checks() {
        let cat = catalog(&[&["int", "str"]]);
        let mut oracle = TableOracle {
            errors: HashMap::new(),
        };
        let config = SearchConfig::new(Strategy::Greedy, 1, 7, 0);
        let out = assign_types(&mut oracle, &cat, &config, None).unwrap();
        assert_eq!(out.best.ranks, vec![Some(0)]);
        assert_eq!(out.best.score, 0);
        // Baseline plus the initial state.
        assert_eq!(out.checker_calls, 2);
    }

    #[test]
    fn single_bad_prediction_falls_back_to_none() {
        // One slot, k = 1, the only prediction errors: exhaustive space is
        // {top-1, NONE}; NONE (score 1) must win.
        let cat = catalog(&[&["int"]]);
        let mut errors = HashMap::new();
        errors.insert(vec![Some(0usize)], 1u32);
        let mut oracle = TableOracle { errors };
        let config = SearchConfig::new(Strategy::NonGreedy, 1, 2, 0);
        let out = assign_types(&mut oracle, &cat, &config, None).unwrap();
        assert_eq!(out.best.ranks, vec![None]);
        assert_eq!(out.best.score, 1);
    }

    #[test]
    fn nongreedy_with_full_budget_matches_brute_force() {
        use rand::RngCore;
        let mut seed_rng = ChaCha8Rng::seed_from_u64(20);
        for trial in 0..20 {
            let n_slots = 1 + (seed_rng.next_u32() as usize % 3);
            let k = 1 + (seed_rng.next_u32() as usize % 3);
            let preds: Vec<Vec<String>> = (0..n_slots)
                .map(|_| (0..k).map(|j| format!("t{j}")).collect())
                .collect();
            let cat = SlotCatalog {
                slots: (0..n_slots).map(|i| slot(&format!("f{i}"), i as u32)).collect(),
                predictions: preds,
            };
            // Random error table over the whole space.
            let mut errors = HashMap::new();
            let mut all = Vec::new();
            enumerate(&cat, &mut vec![], &mut all);
            for ranks in &all {
                errors.insert(ranks.clone(), seed_rng.next_u32() % 3);
            }
            let space = all.len();
            let w = n_slots as u64 + 1;
            let brute_min = all
                .iter()
                .map(|r| {
                    let missing = r.iter().filter(|x| x.is_none()).count() as u64;
                    missing + w * (*errors.get(r).unwrap() as u64)
                })
                .min()
                .unwrap();
            let mut oracle = TableOracle { errors };
            let mut config = SearchConfig::new(Strategy::NonGreedy, n_slots, space, trial);
            config.w = w;
            let out = assign_types(&mut oracle, &cat, &config, None).unwrap();
            assert_eq!(out.best.score, brute_min, "trial {trial}");
            // Search-space size: the reachable set is exactly (k+1)^n.
            assert_eq!(space, (k + 1).pow(n_slots as u32));
        }
    }

    fn enumerate(cat: &SlotCatalog, prefix: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if prefix.len() == cat.slots.len() {
            out.push(prefix.clone());
            return;
        }
        let i = prefix.len();
        for r in 0..cat.predictions[i].len() {
            prefix.push(Some(r));
            enumerate(cat, prefix, out);
            prefix.pop();
        }
        prefix.push(None);
        enumerate(cat, prefix, out);
        prefix.pop();
    }

    #[test]
    fn budget_caps_checker_calls() {
        let cat = catalog(&[&["a", "b", "c"], &["d", "e", "f"], &["g", "h", "i"]]);
        // Everything errors, so the search would explore forever.
        let mut errors = HashMap::new();
        let mut all = Vec::new();
        enumerate(&cat, &mut vec![], &mut all);
        for ranks in &all {
            if ranks.iter().any(|r| r.is_some()) {
                errors.insert(ranks.clone(), 2u32);
            }
        }
        let mut oracle = TableOracle { errors };
        let budget = 7 * 3;
        let config = SearchConfig::new(Strategy::NonGreedy, 3, budget, 5);
        let out = assign_types(&mut oracle, &cat, &config, None).unwrap();
        assert!(out.checker_calls <= budget + 1);
        // Safety: best adds no errors over the baseline.
        assert_eq!(out.best.n_errors, 0);
        assert_eq!(out.best.ranks, vec![None, None, None]);
    }

    #[test]
    fn figure_walkthrough_end_to_end() {
        let source = "def find_match(color):\n    \"\"\"\n    Args:\n      color (str): color to match on and return\n    \"\"\"\n    candidates = get_colors()\n    for candidate in candidates:\n        if color == candidate:\n            return color\n    return None\n\ndef get_colors():\n    return [\"red\", \"blue\", \"green\"]\n";
        let records = crate::extract::extract_functions(source, "fig.py").unwrap();
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
        assert_eq!(catalog.slots.len(), 3);
        let checker = BuiltinChecker::new();
        for seed in 0..50 {
            let out =
                two_phase_annotate(source, &catalog, &checker, Strategy::Greedy, 7, seed).unwrap();
            assert_eq!(
                out.assignment.get(&SlotId::argument("find_match", "color")),
                Some(&"str".to_string()),
                "seed {seed}"
            );
            assert_eq!(
                out.assignment.get(&SlotId::ret("find_match")),
                Some(&"Optional[str]".to_string()),
                "seed {seed}"
            );
            assert_eq!(
                out.assignment.get(&SlotId::ret("get_colors")),
                Some(&"List[str]".to_string()),
                "seed {seed}"
            );
            assert!(out.checker_calls <= 7 * 3, "seed {seed}: {}", out.checker_calls);
            assert_eq!(out.final_errors, 0);
        }
    }

    #[test]
    fn file_with_no_slots_returns_source_unchanged() {
        let source = "def f(x: int) -> int:\n    return x\n";
        let records = crate::extract::extract_functions(source, "a.py").unwrap();
        let catalog = SlotCatalog::from_records(&records, &HashMap::new());
        assert!(catalog.is_empty());
        let checker = BuiltinChecker::new();
        let out = two_phase_annotate(source, &catalog, &checker, Strategy::Greedy, 7, 0).unwrap();
        assert_eq!(out.annotated_source, source);
        assert!(out.assignment.is_empty());
    }

    #[test]
    fn argument_only_file_spends_nothing_in_phase_one_beyond_baseline() {
        let source = "def f(x) -> int:\n    return 1\n";
        let records = crate::extract::extract_functions(source, "a.py").unwrap();
        let mut predictions = HashMap::new();
        predictions.insert(SlotId::argument("f", "x"), vec!["int".to_string()]);
        let catalog = SlotCatalog::from_records(&records, &predictions);
        let checker = BuiltinChecker::new();
        let out = two_phase_annotate(source, &catalog, &checker, Strategy::Greedy, 7, 0).unwrap();
        assert_eq!(out.phase_calls.0, 1);
        assert_eq!(out.assignment.len(), 1);
    }

    #[test]
    fn abstained_slots_stay_none() {
        let source = "def f(x):\n    return 1\n";
        let records = crate::extract::extract_functions(source, "a.py").unwrap();
        // No predictions at all.
        let catalog = SlotCatalog::from_records(&records, &HashMap::new());
        assert_eq!(catalog.slots.len(), 2);
        let checker = BuiltinChecker::new();
        let out = two_phase_annotate(source, &catalog, &checker, Strategy::Greedy, 7, 0).unwrap();
        assert!(out.assignment.is_empty());
        assert_eq!(out.annotated_source, source);
    }
}
