//! Conflict-driven clause learning with two-watched-literal propagation,
//! first-UIP analysis, VSIDS branching, phase saving, Luby restarts, and an
//! assumption interface for seeding from the gradient phase.
//!
//! Assumptions occupy the first decision levels in order. A conflict whose
//! backjump would land inside that prefix is reported as
//! `UnsatUnderAssumptions` instead of erasing seeds; plain `Unsat` is only
//! ever derived from a level-0 conflict.

use crate::cnf::{verify_model, CnfFormula, Model};
use serde::Serialize;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f64 = 0.999;
const LUBY_UNIT: u64 = 100;
const KEEP_LBD: u32 = 2;
const LEARNT_SLACK: usize = 4000;

/// Internal literal: variable index * 2, +1 for negative polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ILit(u32);

impl ILit {
    fn new(var: usize, positive: bool) -> Self {
        ILit((var as u32) << 1 | (!positive) as u32)
    }

    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    fn positive(self) -> bool {
        self.0 & 1 == 0
    }

    fn negated(self) -> Self {
        ILit(self.0 ^ 1)
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    False,
    True,
    Undef,
}

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<ILit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
    lbd: u32,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    clause: usize,
    blocker: ILit,
}

/// Resource limits for one solver run.
#[derive(Debug, Clone, Copy, Default)]
pub struct Budget {
    pub max_conflicts: Option<u64>,
    pub max_time: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Sat,
    Unsat,
    UnsatUnderAssumptions,
    Unknown,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SolveStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub model: Option<Model>,
    pub stats: SolveStats,
}

/// Finite subsequence index of the Luby sequence, base `y`.
fn luby(y: u64, mut x: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.pow(seq)
}

pub struct Solver {
    num_vars: usize,
    clauses: Vec<Clause>,
    num_original: usize,
    num_learnt: usize,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<Value>,
    levels: Vec<u32>,
    reasons: Vec<Option<usize>>,
    trail: Vec<ILit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    clause_inc: f64,
    phases: Vec<bool>,
    seen: Vec<bool>,
    stats: SolveStats,
    /// Formula contradictory at level 0 (input empty clause or unit conflict).
    root_conflict: bool,
}

impl Solver {
    pub fn new(formula: &CnfFormula) -> Self {
        let num_vars = formula.num_vars();
        let mut solver = Solver {
            num_vars,
            clauses: Vec::with_capacity(formula.num_clauses()),
            num_original: 0,
            num_learnt: 0,
            watches: vec![Vec::new(); 2 * num_vars],
            assigns: vec![Value::Undef; num_vars],
            levels: vec![0; num_vars],
            reasons: vec![None; num_vars],
            trail: Vec::with_capacity(num_vars),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0; num_vars],
            var_inc: 1.0,
            clause_inc: 1.0,
            phases: vec![false; num_vars],
            seen: vec![false; num_vars],
            stats: SolveStats::default(),
            root_conflict: false,
        };
        for clause in formula.clauses() {
            let lits: Vec<ILit> = clause
                .iter()
                .map(|l| ILit::new(l.var_index(), l.positive()))
                .collect();
            solver.add_clause(lits);
        }
        solver.num_original = solver.clauses.len();
        solver
    }

    /// Saved phase per variable; the decision heuristic reuses these.
    pub fn set_phases(&mut self, phases: &[bool]) {
        assert_eq!(phases.len(), self.num_vars);
        self.phases.copy_from_slice(phases);
    }

    /// Deterministic tie-breaking jitter on initial activities so unseeded
    /// portfolio workers explore different decision orders.
    pub fn randomize_activity(&mut self, seed: u64) {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        for a in self.activity.iter_mut() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *a += (state >> 11) as f64 / (1u64 << 53) as f64 * 1e-6;
        }
    }

    fn add_clause(&mut self, mut lits: Vec<ILit>) {
        if self.root_conflict {
            return;
        }
        lits.sort_by_key(|l| l.0);
        lits.dedup();
        match lits.len() {
            0 => self.root_conflict = true,
            1 => {
                match self.value(lits[0]) {
                    Value::True => {}
                    Value::False => self.root_conflict = true,
                    Value::Undef => self.enqueue(lits[0], None),
                }
                // tautology check is moot for units; nothing to watch
            }
            _ => {
                let idx = self.clauses.len();
                self.watches[lits[0].negated().index()].push(Watcher {
                    clause: idx,
                    blocker: lits[1],
                });
                self.watches[lits[1].negated().index()].push(Watcher {
                    clause: idx,
                    blocker: lits[0],
                });
                self.clauses.push(Clause {
                    lits,
                    learnt: false,
                    deleted: false,
                    activity: 0.0,
                    lbd: 0,
                });
            }
        }
    }

    fn value(&self, lit: ILit) -> Value {
        match self.assigns[lit.var()] {
            Value::Undef => Value::Undef,
            Value::True => {
                if lit.positive() {
                    Value::True
                } else {
                    Value::False
                }
            }
            Value::False => {
                if lit.positive() {
                    Value::False
                } else {
                    Value::True
                }
            }
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, lit: ILit, reason: Option<usize>) {
        debug_assert_eq!(self.value(lit), Value::Undef);
        self.assigns[lit.var()] = if lit.positive() {
            Value::True
        } else {
            Value::False
        };
        self.levels[lit.var()] = self.decision_level() as u32;
        self.reasons[lit.var()] = reason;
        self.trail.push(lit);
    }

    fn new_decision_level(&mut self) {
        self.trail_lim.push(self.trail.len());
    }

    fn backtrack(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let keep = self.trail_lim[level];
        for i in (keep..self.trail.len()).rev() {
            let lit = self.trail[i];
            let var = lit.var();
            self.phases[var] = lit.positive();
            self.assigns[var] = Value::Undef;
            self.reasons[var] = None;
        }
        self.trail.truncate(keep);
        self.trail_lim.truncate(level);
        self.qhead = keep;
    }

    /// Unit propagation to fixpoint over the two-watched-literal scheme.
    /// Returns the first conflicting clause, if any.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p.negated();
            let mut watchers = std::mem::take(&mut self.watches[p.index()]);
            let mut kept = 0usize;
            let mut conflict = None;
            let mut i = 0usize;
            'watchers: while i < watchers.len() {
                let w = watchers[i];
                i += 1;
                if self.clauses[w.clause].deleted {
                    continue; // drop the stale watcher
                }
                if self.value(w.blocker) == Value::True {
                    watchers[kept] = w;
                    kept += 1;
                    continue;
                }
                if self.clauses[w.clause].lits[0] == false_lit {
                    self.clauses[w.clause].lits.swap(0, 1);
                }
                debug_assert_eq!(self.clauses[w.clause].lits[1], false_lit);
                let first = self.clauses[w.clause].lits[0];
                if self.value(first) == Value::True {
                    watchers[kept] = Watcher {
                        clause: w.clause,
                        blocker: first,
                    };
                    kept += 1;
                    continue;
                }
                for k in 2..self.clauses[w.clause].lits.len() {
                    if self.value(self.clauses[w.clause].lits[k]) != Value::False {
                        self.clauses[w.clause].lits.swap(1, k);
                        let new_watch = self.clauses[w.clause].lits[1];
                        self.watches[new_watch.negated().index()].push(Watcher {
                            clause: w.clause,
                            blocker: first,
                        });
                        continue 'watchers;
                    }
                }
                // no replacement watch: unit or conflicting
                watchers[kept] = Watcher {
                    clause: w.clause,
                    blocker: first,
                };
                kept += 1;
                if self.value(first) == Value::False {
                    // keep the untraversed tail, stop propagating
                    while i < watchers.len() {
                        watchers[kept] = watchers[i];
                        kept += 1;
                        i += 1;
                    }
                    self.qhead = self.trail.len();
                    conflict = Some(w.clause);
                } else {
                    self.stats.propagations += 1;
                    self.enqueue(first, Some(w.clause));
                }
            }
            watchers.truncate(kept);
            self.watches[p.index()] = watchers;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, var: usize) {
        self.activity[var] += self.var_inc;
        if self.activity[var] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
    }

    fn bump_clause(&mut self, idx: usize) {
        self.clauses[idx].activity += self.clause_inc;
        if self.clauses[idx].activity > 1e20 {
            for c in self.clauses.iter_mut().filter(|c| c.learnt) {
                c.activity *= 1e-20;
            }
            self.clause_inc *= 1e-20;
        }
    }

    fn decay_activities(&mut self) {
        self.var_inc /= VAR_DECAY;
        self.clause_inc /= CLAUSE_DECAY;
    }

    /// First-UIP conflict analysis. Returns the learned clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, conflict: usize) -> (Vec<ILit>, usize) {
        debug_assert!(self.decision_level() > 0);
        let mut learnt: Vec<ILit> = vec![ILit(0)]; // slot 0 for the asserting literal
        let mut counter = 0usize;
        let mut confl = conflict;
        let mut index = self.trail.len();
        let mut asserting = None;

        loop {
            if self.clauses[confl].learnt {
                self.bump_clause(confl);
            }
            let lits = self.clauses[confl].lits.clone();
            for q in lits {
                // skip the literal being resolved on (true in its reason clause)
                if Some(q) == asserting {
                    continue;
                }
                let v = q.var();
                if !self.seen[v] && self.levels[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.levels[v] as usize >= self.decision_level() {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            // next marked literal on the trail at the current level
            loop {
                index -= 1;
                if self.seen[self.trail[index].var()] {
                    break;
                }
            }
            let p = self.trail[index];
            self.seen[p.var()] = false;
            counter -= 1;
            asserting = Some(p);
            if counter == 0 {
                learnt[0] = p.negated();
                break;
            }
            confl = self.reasons[p.var()].expect("implied literal has a reason");
        }

        for l in &learnt[1..] {
            self.seen[l.var()] = false;
        }

        let backjump = learnt[1..]
            .iter()
            .map(|l| self.levels[l.var()] as usize)
            .max()
            .unwrap_or(0);
        // move a literal of the backjump level into the second watch slot
        if learnt.len() > 2 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.levels[learnt[i].var()] > self.levels[learnt[max_i].var()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
        }
        (learnt, backjump)
    }

    fn clause_lbd(&self, lits: &[ILit]) -> u32 {
        let mut levels: Vec<u32> = lits.iter().map(|l| self.levels[l.var()]).collect();
        levels.sort_unstable();
        levels.dedup();
        levels.len() as u32
    }

    fn learn(&mut self, lits: Vec<ILit>) -> Option<usize> {
        debug_assert!(!lits.is_empty());
        if lits.len() == 1 {
            self.enqueue(lits[0], None);
            return None;
        }
        let idx = self.clauses.len();
        let lbd = self.clause_lbd(&lits);
        self.watches[lits[0].negated().index()].push(Watcher {
            clause: idx,
            blocker: lits[1],
        });
        self.watches[lits[1].negated().index()].push(Watcher {
            clause: idx,
            blocker: lits[0],
        });
        let asserting = lits[0];
        self.clauses.push(Clause {
            lits,
            learnt: true,
            deleted: false,
            activity: 0.0,
            lbd,
        });
        self.num_learnt += 1;
        self.bump_clause(idx);
        self.enqueue(asserting, Some(idx));
        Some(idx)
    }

    /// Drop the least-active half of the deletable learned clauses. Clauses
    /// of LBD <= 2 and clauses currently acting as reasons are kept.
    fn reduce_learnts(&mut self) {
        let locked: std::collections::HashSet<usize> = self
            .trail
            .iter()
            .filter_map(|l| self.reasons[l.var()])
            .collect();
        let mut candidates: Vec<usize> = (0..self.clauses.len())
            .filter(|&i| {
                let c = &self.clauses[i];
                c.learnt && !c.deleted && c.lbd > KEEP_LBD && !locked.contains(&i)
            })
            .collect();
        candidates.sort_by(|&a, &b| {
            self.clauses[a]
                .activity
                .partial_cmp(&self.clauses[b].activity)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let drop_count = candidates.len() / 2;
        for &idx in &candidates[..drop_count] {
            self.clauses[idx].deleted = true;
            self.num_learnt -= 1;
        }
    }

    /// Highest-activity unassigned variable, ties to the lowest index;
    /// polarity from the saved phase.
    fn pick_branch_variable(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for v in 0..self.num_vars {
            if self.assigns[v] == Value::Undef
                && best.is_none_or(|b| self.activity[v] > self.activity[b])
            {
                best = Some(v);
            }
        }
        best
    }

    fn build_model(&self) -> Model {
        Model::new(
            (0..self.num_vars)
                .map(|v| self.assigns[v] == Value::True)
                .collect(),
        )
    }

    /// Full CDCL search. Assumption variables are forced as the first
    /// decisions in the given order; a returned SAT model is always verified
    /// against the formula before being reported.
    pub fn solve(
        &mut self,
        formula: &CnfFormula,
        assumptions: &[(u32, bool)],
        budget: &Budget,
        cancel: Option<&AtomicBool>,
    ) -> SolveOutcome {
        let start = Instant::now();
        let outcome = |status, model, stats: &mut SolveStats| {
            stats.wall_seconds = start.elapsed().as_secs_f64();
            SolveOutcome {
                status,
                model,
                stats: *stats,
            }
        };

        if self.root_conflict {
            return outcome(SolveStatus::Unsat, None, &mut self.stats.clone());
        }

        let num_assumptions = assumptions.len();
        let mut restart_limit = LUBY_UNIT * luby(2, 0);
        let mut conflicts_since_restart = 0u64;

        loop {
            if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                let mut stats = self.stats;
                return outcome(SolveStatus::Unknown, None, &mut stats);
            }
            if budget
                .max_time
                .is_some_and(|cap| start.elapsed() >= cap)
            {
                let mut stats = self.stats;
                return outcome(SolveStatus::Unknown, None, &mut stats);
            }

            if let Some(conflict) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts_since_restart += 1;
                if self.decision_level() == 0 {
                    let mut stats = self.stats;
                    return outcome(SolveStatus::Unsat, None, &mut stats);
                }
                let (learnt, backjump) = self.analyze(conflict);
                // backjumping below the assumption levels is fine: the
                // decision loop re-asserts them, and a now-false assumption
                // is caught there as a refutation
                self.backtrack(backjump);
                self.learn(learnt);
                self.decay_activities();
                if budget.max_conflicts.is_some_and(|cap| self.stats.conflicts >= cap) {
                    let mut stats = self.stats;
                    return outcome(SolveStatus::Unknown, None, &mut stats);
                }
            } else {
                if conflicts_since_restart >= restart_limit {
                    self.stats.restarts += 1;
                    conflicts_since_restart = 0;
                    restart_limit = LUBY_UNIT * luby(2, self.stats.restarts);
                    self.backtrack(0);
                    continue;
                }
                if self.num_learnt > self.num_original + LEARNT_SLACK {
                    self.reduce_learnts();
                }
                // assumptions claim the first decision levels
                if self.decision_level() < num_assumptions {
                    let (var, value) = assumptions[self.decision_level()];
                    let lit = ILit::new(var as usize - 1, value);
                    match self.value(lit) {
                        Value::True => {
                            self.new_decision_level(); // hold the level mapping
                        }
                        Value::False => {
                            let mut stats = self.stats;
                            return outcome(
                                SolveStatus::UnsatUnderAssumptions,
                                None,
                                &mut stats,
                            );
                        }
                        Value::Undef => {
                            self.new_decision_level();
                            self.stats.decisions += 1;
                            self.enqueue(lit, None);
                        }
                    }
                    continue;
                }
                match self.pick_branch_variable() {
                    None => {
                        let model = self.build_model();
                        debug_assert!(verify_model(formula, &model).unwrap());
                        let status = if verify_model(formula, &model).unwrap_or(false) {
                            SolveStatus::Sat
                        } else {
                            SolveStatus::Unknown
                        };
                        let mut stats = self.stats;
                        return outcome(status, Some(model), &mut stats);
                    }
                    Some(var) => {
                        self.stats.decisions += 1;
                        self.new_decision_level();
                        self.enqueue(ILit::new(var, self.phases[var]), None);
                    }
                }
            }
        }
    }

    #[cfg(test)]
    fn assert_watch_invariant(&self) {
        for (idx, clause) in self.clauses.iter().enumerate() {
            if clause.deleted || clause.lits.len() < 2 {
                continue;
            }
            let watched = [clause.lits[0], clause.lits[1]];
            for w in watched {
                let registered = self.watches[w.negated().index()]
                    .iter()
                    .any(|x| x.clause == idx);
                assert!(registered, "clause {idx} not registered on watch {w:?}");
            }
            // at fixpoint a false watch means the clause is already satisfied
            // (possibly by a stale blocker that is no longer watched)
            let v0 = self.value(clause.lits[0]);
            let v1 = self.value(clause.lits[1]);
            if v0 == Value::False || v1 == Value::False {
                let satisfied = clause.lits.iter().any(|&l| self.value(l) == Value::True);
                assert!(satisfied, "watch invariant broken in clause {idx}");
            }
        }
    }
}

/// Convenience entry point: build a solver and run one search.
pub fn solve(
    formula: &CnfFormula,
    assumptions: &[(u32, bool)],
    budget: &Budget,
    cancel: Option<&AtomicBool>,
    initial_phases: Option<&[bool]>,
    heuristic_seed: u64,
) -> SolveOutcome {
    let mut solver = Solver::new(formula);
    if let Some(phases) = initial_phases {
        solver.set_phases(phases);
    }
    if heuristic_seed != 0 {
        solver.randomize_activity(heuristic_seed);
    }
    solver.solve(formula, assumptions, budget, cancel)
}
