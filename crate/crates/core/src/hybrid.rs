//! The hybrid pipeline: run the gradient phase, fan out assumption-seeded
//! CDCL workers plus one unseeded worker, and return the first definitive
//! answer. Phases are strictly sequential; workers share only the immutable
//! formula, their seed lists, one cancellation flag, and one result channel.

use crate::cdcl::{self, Budget, SolveOutcome, SolveStats, SolveStatus};
use crate::cnf::{verify_model, CnfFormula, Model};
use crate::extract::{extract, PartialAssignment};
use crate::grad::{decode_column, run_gradient_phase, GradSnapshot, OptimizerConfig};
use crate::matrix::encode_problem;
use serde::Serialize;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct HybridConfig {
    /// Candidate assignments optimized in parallel (columns of A).
    pub num_candidates: usize,
    /// Worker execution contexts for the refinement phase.
    pub worker_count: usize,
    pub optimizer: OptimizerConfig,
    pub global_timeout: Option<Duration>,
    /// Cap on the gradient phase as a fraction of the global timeout.
    pub gradient_fraction: f64,
    /// Initialize each seeded worker's saved phases from its source column
    /// for all variables, not just the assumed ones.
    pub seed_phases: bool,
    /// Rank extraction confidence by the post-normalization-Jacobian gradient.
    pub use_post_jacobian_confidence: bool,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            num_candidates: 256,
            worker_count: std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(4),
            optimizer: OptimizerConfig::default(),
            global_timeout: None,
            gradient_fraction: 0.25,
            seed_phases: true,
            use_post_jacobian_confidence: false,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<Vec<String>, String> {
        if self.worker_count < 1 {
            return Err("worker_count must be at least 1".into());
        }
        if self.num_candidates < 1 {
            return Err("num_candidates must be at least 1".into());
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Winner {
    /// Input shortcut (empty clause or clause-free formula).
    Preprocessing,
    /// A fully satisfying column fell out of the gradient phase.
    GradientPhase,
    Worker(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeedPlan {
    Unseeded { heuristic_seed: u64 },
    Seeded { partial_index: usize },
}

/// Worker 0 is always unseeded; workers 1..W take partial assignments in
/// priority order; surplus workers run unseeded with distinct heuristic seeds.
pub fn dispatch_plan(num_partials: usize, worker_count: usize) -> Vec<SeedPlan> {
    assert!(worker_count >= 1);
    let mut plan = Vec::with_capacity(worker_count);
    plan.push(SeedPlan::Unseeded { heuristic_seed: 0 });
    for w in 1..worker_count {
        if w - 1 < num_partials {
            plan.push(SeedPlan::Seeded { partial_index: w - 1 });
        } else {
            plan.push(SeedPlan::Unseeded {
                heuristic_seed: w as u64,
            });
        }
    }
    plan
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkerReport {
    pub id: usize,
    pub seeded_from_column: Option<usize>,
    /// Retry-ladder runs performed (1 for a single solve).
    pub runs: u32,
    pub final_status: SolveStatus,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub iterations: u64,
    pub best_fraction: f64,
    pub converged: bool,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HybridResult {
    pub outcome: SolveOutcome,
    pub winning_worker: Option<Winner>,
    pub gradient_seconds: f64,
    pub refinement_seconds: f64,
    pub total_seconds: f64,
    pub workers: Vec<WorkerReport>,
    pub gradient: GradientReport,
    pub snapshot: Option<GradSnapshot>,
}

impl HybridResult {
    /// Versioned JSON stats view (no model payload).
    pub fn stats_json(&self, instance: &str) -> serde_json::Value {
        serde_json::json!({
            "schema": 1,
            "instance": instance,
            "status": self.outcome.status,
            "winner": self.winning_worker,
            "gradient_seconds": self.gradient_seconds,
            "refinement_seconds": self.refinement_seconds,
            "total_seconds": self.total_seconds,
            "gradient": self.gradient,
            "workers": self.workers,
        })
    }
}

struct WorkerMsg {
    id: usize,
    outcome: SolveOutcome,
    zero_assumptions: bool,
    runs: u32,
    total_stats: SolveStats,
}

fn remaining(deadline: Option<Instant>) -> Option<Duration> {
    deadline.map(|d| d.saturating_duration_since(Instant::now()))
}

/// One worker's refinement: run the (possibly seeded) search; a refuted seed
/// relaunches with the most confident half of its assumptions, halving until
/// empty, after which the run is unseeded and its UNSAT is definitive.
fn run_worker(
    formula: &CnfFormula,
    mut assumptions: Vec<(u32, bool)>,
    phases: Option<Vec<bool>>,
    heuristic_seed: u64,
    deadline: Option<Instant>,
    cancel: &AtomicBool,
) -> (SolveOutcome, bool, u32, SolveStats) {
    let mut runs = 0u32;
    let mut total = SolveStats::default();
    loop {
        runs += 1;
        let budget = Budget {
            max_conflicts: None,
            max_time: remaining(deadline),
        };
        let out = cdcl::solve(
            formula,
            &assumptions,
            &budget,
            Some(cancel),
            phases.as_deref(),
            heuristic_seed,
        );
        total.conflicts += out.stats.conflicts;
        total.decisions += out.stats.decisions;
        total.propagations += out.stats.propagations;
        total.restarts += out.stats.restarts;
        total.wall_seconds += out.stats.wall_seconds;
        match out.status {
            SolveStatus::Sat | SolveStatus::Unknown => {
                return (out, assumptions.is_empty(), runs, total)
            }
            SolveStatus::Unsat if assumptions.is_empty() => return (out, true, runs, total),
            // refuted or root-level conflict while seeded: retreat on the ladder
            SolveStatus::Unsat => assumptions.clear(),
            SolveStatus::UnsatUnderAssumptions => {
                let keep = assumptions.len() / 2;
                assumptions.truncate(keep);
            }
        }
        if cancel.load(Ordering::Relaxed) {
            return (out, assumptions.is_empty(), runs, total);
        }
    }
}

pub fn solve_hybrid(formula: &CnfFormula, config: &HybridConfig) -> Result<HybridResult, String> {
    config.validate()?;
    let start = Instant::now();
    let deadline = config.global_timeout.map(|t| start + t);

    let trivial = |status, model: Option<Model>, winner| HybridResult {
        outcome: SolveOutcome {
            status,
            model,
            stats: SolveStats::default(),
        },
        winning_worker: Some(winner),
        gradient_seconds: 0.0,
        refinement_seconds: 0.0,
        total_seconds: start.elapsed().as_secs_f64(),
        workers: Vec::new(),
        gradient: GradientReport {
            iterations: 0,
            best_fraction: 0.0,
            converged: false,
            final_loss: None,
        },
        snapshot: None,
    };

    if formula.has_empty_clause() {
        return Ok(trivial(SolveStatus::Unsat, None, Winner::Preprocessing));
    }
    if formula.num_clauses() == 0 {
        let model = Model::new(vec![false; formula.num_vars()]);
        return Ok(trivial(SolveStatus::Sat, Some(model), Winner::Preprocessing));
    }

    // Phase 1: gradient-guided candidate optimization.
    let problem = encode_problem(formula);
    let mut opt = config.optimizer.clone();
    let budget_secs = config
        .global_timeout
        .map(|t| t.as_secs_f64() * config.gradient_fraction);
    opt.max_seconds = match (opt.max_seconds, budget_secs) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let snapshot = run_gradient_phase(&problem, &opt, config.num_candidates);
    let gradient_seconds = start.elapsed().as_secs_f64();
    let best_fraction = snapshot
        .hard_sat_counts
        .iter()
        .max()
        .map(|&c| c as f64 / formula.num_clauses() as f64)
        .unwrap_or(0.0);
    let gradient_report = GradientReport {
        iterations: snapshot.iterations,
        best_fraction,
        converged: snapshot.converged,
        final_loss: snapshot.loss_history.last().copied(),
    };

    if let Some(model) = &snapshot.sat_model {
        if verify_model(formula, model).unwrap_or(false) {
            return Ok(HybridResult {
                outcome: SolveOutcome {
                    status: SolveStatus::Sat,
                    model: Some(model.clone()),
                    stats: SolveStats::default(),
                },
                winning_worker: Some(Winner::GradientPhase),
                gradient_seconds,
                refinement_seconds: 0.0,
                total_seconds: start.elapsed().as_secs_f64(),
                workers: Vec::new(),
                gradient: gradient_report,
                snapshot: Some(snapshot),
            });
        }
    }

    // Phase 2: portfolio refinement.
    let partials: Vec<PartialAssignment> = if config.worker_count > 1 {
        extract(
            &snapshot,
            config.worker_count - 1,
            config.use_post_jacobian_confidence,
        )
    } else {
        Vec::new()
    };
    let plan = dispatch_plan(partials.len(), config.worker_count);
    let cancel = AtomicBool::new(false);
    let refinement_start = Instant::now();

    let (reports, outcome, winner) = std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<WorkerMsg>();
        for (id, entry) in plan.iter().enumerate() {
            let tx = tx.clone();
            let cancel = &cancel;
            let partials = &partials;
            let snapshot = &snapshot;
            let entry = *entry;
            scope.spawn(move || {
                let (assumptions, phases, seed) = match entry {
                    SeedPlan::Unseeded { heuristic_seed } => (Vec::new(), None, heuristic_seed),
                    SeedPlan::Seeded { partial_index } => {
                        let p = &partials[partial_index];
                        let phases = config.seed_phases.then(|| {
                            decode_column(&snapshot.assignment, p.source_column).values
                        });
                        (p.pairs.clone(), phases, 0)
                    }
                };
                let (outcome, zero_assumptions, runs, total_stats) =
                    run_worker(formula, assumptions, phases, seed, deadline, cancel);
                let _ = tx.send(WorkerMsg {
                    id,
                    outcome,
                    zero_assumptions,
                    runs,
                    total_stats,
                });
            });
        }
        drop(tx);

        let mut reports: Vec<WorkerReport> = Vec::new();
        let mut winner: Option<Winner> = None;
        let mut final_outcome: Option<SolveOutcome> = None;
        let mut done = 0usize;
        while done < plan.len() {
            let timeout = remaining(deadline).unwrap_or(Duration::from_secs(3600));
            match rx.recv_timeout(timeout) {
                Ok(msg) => {
                    done += 1;
                    let definitive = match msg.outcome.status {
                        SolveStatus::Sat => true,
                        SolveStatus::Unsat => msg.zero_assumptions,
                        _ => false,
                    };
                    reports.push(WorkerReport {
                        id: msg.id,
                        seeded_from_column: match plan[msg.id] {
                            SeedPlan::Seeded { partial_index } => {
                                Some(partials[partial_index].source_column)
                            }
                            SeedPlan::Unseeded { .. } => None,
                        },
                        runs: msg.runs,
                        final_status: msg.outcome.status,
                        stats: msg.total_stats,
                    });
                    if definitive && winner.is_none() {
                        winner = Some(Winner::Worker(msg.id));
                        final_outcome = Some(msg.outcome);
                        cancel.store(true, Ordering::Relaxed);
                    }
                }
                Err(_) => {
                    cancel.store(true, Ordering::Relaxed);
                }
            }
        }
        (reports, final_outcome, winner)
    });

    let refinement_seconds = refinement_start.elapsed().as_secs_f64();
    let outcome = match outcome {
        Some(mut out) => {
            if out.status == SolveStatus::Sat {
                let ok = out
                    .model
                    .as_ref()
                    .is_some_and(|m| verify_model(formula, m).unwrap_or(false));
                if !ok {
                    out = SolveOutcome {
                        status: SolveStatus::Unknown,
                        model: None,
                        stats: out.stats,
                    };
                }
            }
            out
        }
        None => SolveOutcome {
            status: SolveStatus::Unknown,
            model: None,
            stats: SolveStats::default(),
        },
    };
    let winner = if outcome.status == SolveStatus::Unknown {
        None
    } else {
        winner
    };

    Ok(HybridResult {
        outcome,
        winning_worker: winner,
        gradient_seconds,
        refinement_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
        workers: reports,
        gradient: gradient_report,
        snapshot: Some(snapshot),
    })
}

/// Baseline mode: the embedded CDCL solver from scratch, no gradient phase.
pub fn solve_baseline(formula: &CnfFormula, timeout: Option<Duration>) -> SolveOutcome {
    if formula.has_empty_clause() {
        return SolveOutcome {
            status: SolveStatus::Unsat,
            model: None,
            stats: SolveStats::default(),
        };
    }
    if formula.num_clauses() == 0 {
        return SolveOutcome {
            status: SolveStatus::Sat,
            model: Some(Model::new(vec![false; formula.num_vars()])),
            stats: SolveStats::default(),
        };
    }
    let budget = Budget {
        max_conflicts: None,
        max_time: timeout,
    };
    cdcl::solve(formula, &[], &budget, None, None, 0)
}
