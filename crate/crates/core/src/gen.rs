//! Seeded random and planted k-SAT instance generation for the benchmark
//! harness and test suites.

use crate::cnf::{CnfFormula, Literal, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_clause(rng: &mut ChaCha8Rng, num_vars: usize, k: usize) -> Vec<Literal> {
    let mut vars: Vec<u32> = Vec::with_capacity(k);
    while vars.len() < k.min(num_vars) {
        let v = rng.gen_range(1..=num_vars as u32);
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    vars.into_iter()
        .map(|v| Literal::new(v, rng.gen::<bool>()))
        .collect()
}

/// Uniform random k-SAT with distinct variables per clause. Returns the
/// formula and nothing else; satisfiability is not guaranteed.
pub fn random_ksat(num_vars: usize, seed: u64, k: usize, num_clauses: usize) -> (CnfFormula, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..num_clauses)
        .map(|_| random_clause(&mut rng, num_vars, k))
        .collect();
    (
        CnfFormula::new(num_vars, clauses, &format!("random-{num_vars}v-{seed}")),
        seed,
    )
}

pub fn random_3sat(num_vars: usize, ratio: f64, seed: u64) -> CnfFormula {
    let num_clauses = (num_vars as f64 * ratio).round() as usize;
    random_ksat(num_vars, seed, 3, num_clauses).0
}

/// Random 3-SAT with a planted satisfying assignment: clauses are sampled
/// uniformly and rejected unless the planted model satisfies them.
pub fn planted_3sat(num_vars: usize, ratio: f64, seed: u64) -> (CnfFormula, Model) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::new((0..num_vars).map(|_| rng.gen::<bool>()).collect());
    let num_clauses = (num_vars as f64 * ratio).round() as usize;
    let mut clauses = Vec::with_capacity(num_clauses);
    while clauses.len() < num_clauses {
        let clause = random_clause(&mut rng, num_vars, 3);
        if clause.iter().any(|l| l.eval(&model)) {
            clauses.push(clause);
        }
    }
    let formula = CnfFormula::new(num_vars, clauses, &format!("planted-{num_vars}v-{seed}"));
    (formula, model)
}
