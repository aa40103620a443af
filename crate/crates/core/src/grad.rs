//! Differentiable solving loop: smooth-min satisfiability loss over the
//! sparse forward product, analytic backward pass with a straight-through
//! proxy for binarization, AdamW updates on a stepwise-decay schedule with
//! periodic warm restarts, and hard satisfiability monitoring.
//!
//! One real parameter is kept per variable per candidate (theta, V x N).
//! The positive-literal row of the 2V-row assignment matrix is the
//! binarization of theta and the negative-literal row is its complement, so
//! row complementarity holds structurally at every iteration. The backward
//! pass folds the 2V-row literal gradient into V variable rows as
//! grad_pos - grad_neg.

use crate::cnf::Model;
use crate::matrix::{spmm_forward, spmm_transpose, BinaryMatrix, Mat, ProblemMatrix, ResultMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::time::Instant;

const NORM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub lr_initial: f64,
    pub lr_final: f64,
    pub decay_factor: f64,
    /// Iterations between stepwise learning-rate decays.
    pub decay_every: u64,
    /// Iterations between warm restarts (learning rate reset, moments zeroed).
    pub restart_every: u64,
    /// Smooth-min temperature.
    pub tau: f64,
    pub max_iterations: u64,
    /// Stop once the best column hard-satisfies more than this clause fraction.
    pub convergence_fraction: f64,
    /// Iterations between hard-evaluation checks.
    pub check_stride: u64,
    pub rng_seed: u64,
    /// Per-variable row normalization before binarization.
    pub normalize: bool,
    /// Zero the Adam moments at each restart boundary (ablation flag).
    pub reset_moments_on_restart: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    /// Optional wall-clock cap on the gradient phase, in seconds.
    pub max_seconds: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr_initial: 1e-1,
            lr_final: 1e-15,
            decay_factor: 10.0,
            decay_every: 30,
            restart_every: 360,
            tau: 1.0,
            max_iterations: 3600,
            convergence_fraction: 0.99,
            check_stride: 10,
            rng_seed: 0,
            normalize: true,
            reset_moments_on_restart: true,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0,
            max_seconds: None,
        }
    }
}

impl OptimizerConfig {
    /// Invariant check. Violations of hard invariants are errors; a
    /// restart period that is not a multiple of the decay period is only
    /// a warning.
    pub fn validate(&self) -> Result<Vec<String>, String> {
        if !(self.lr_initial > self.lr_final && self.lr_final > 0.0) {
            return Err("require lr_initial > lr_final > 0".into());
        }
        if self.decay_every == 0 || self.restart_every == 0 || self.max_iterations == 0 {
            return Err("decay_every, restart_every, max_iterations must be positive".into());
        }
        if !(self.tau > 0.0) {
            return Err("tau must be positive".into());
        }
        if !(self.convergence_fraction > 0.0 && self.convergence_fraction <= 1.0) {
            return Err("convergence_fraction must be in (0, 1]".into());
        }
        let mut warnings = Vec::new();
        if self.restart_every % self.decay_every != 0 {
            warnings.push("restart_every is not a multiple of decay_every".to_string());
        }
        Ok(warnings)
    }
}

/// Trainable parameters plus AdamW moment state.
#[derive(Debug, Clone)]
pub struct AssignmentTensor {
    pub theta: Mat,
    pub m: Mat,
    pub v: Mat,
    pub step: u64,
}

impl AssignmentTensor {
    pub fn num_vars(&self) -> usize {
        self.theta.rows
    }

    pub fn num_candidates(&self) -> usize {
        self.theta.cols
    }

    pub fn reset_moments(&mut self) {
        self.m.data.fill(0.0);
        self.v.data.fill(0.0);
        self.step = 0;
    }
}

/// theta ~ iid N(0,1) from a seeded generator; moments zeroed.
pub fn init_assignments(num_vars: usize, num_candidates: usize, seed: u64) -> AssignmentTensor {
    assert!(num_vars >= 1 && num_candidates >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = Mat::zeros(num_vars, num_candidates);
    for x in theta.data.iter_mut() {
        *x = StandardNormal.sample(&mut rng);
    }
    AssignmentTensor {
        m: Mat::zeros(num_vars, num_candidates),
        v: Mat::zeros(num_vars, num_candidates),
        theta,
        step: 0,
    }
}

fn guarded_row_mean(theta: &Mat, row: usize) -> f64 {
    let n = theta.cols as f64;
    let mu: f64 = (0..theta.cols).map(|i| theta.at(row, i)).sum::<f64>() / n;
    // sign-preserving denominator; sign(0) treated as +1
    let sign = if mu < 0.0 { -1.0 } else { 1.0 };
    sign * mu.abs().max(NORM_EPSILON)
}

/// Per-variable normalization: each row divided by its guarded mean.
pub fn normalize_rows(theta: &Mat) -> Mat {
    let mut out = theta.clone();
    for row in 0..theta.rows {
        let denom = guarded_row_mean(theta, row);
        for i in 0..theta.cols {
            *out.at_mut(row, i) = theta.at(row, i) / denom;
        }
    }
    out
}

/// clip(sign(x), 0, 1) on the positive-literal row; the negative-literal row
/// is its complement. Exactly zero maps to 0 on the positive row.
pub fn binarize(theta_norm: &Mat) -> BinaryMatrix {
    let v = theta_norm.rows;
    let n = theta_norm.cols;
    let mut a = BinaryMatrix::zeros(2 * v, n);
    for i in 0..n {
        let t_col = theta_norm.column(i);
        let a_col = a.column_mut(i);
        for (var, &t) in t_col.iter().enumerate() {
            let bit = (t > 0.0) as u8;
            a_col[2 * var] = bit;
            a_col[2 * var + 1] = 1 - bit;
        }
    }
    a
}

/// Softmin-weighted average of a column, computed with a max-shift so the
/// exponentials never overflow: all exponents are shifted by -tau * min(r).
pub fn smooth_min(column: &[f64], tau: f64) -> f64 {
    assert!(!column.is_empty() && tau > 0.0);
    let min = column.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut num = 0.0;
    let mut den = 0.0;
    for &r in column {
        let w = (-tau * (r - min)).exp();
        num += r * w;
        den += w;
    }
    num / den
}

/// L = -sum_i SmoothMin(R_i). Operates on a real-valued result matrix so the
/// chain can be checked by finite differences.
pub fn loss(r: &Mat, tau: f64) -> f64 {
    -(0..r.cols).map(|i| smooth_min(r.column(i), tau)).sum::<f64>()
}

/// dL/dR for the smooth-min loss: per entry, -w_c * (1 - tau * (r_c - S)),
/// with softmin weights w and column smooth-min S.
pub fn loss_grad_wrt_result(r: &Mat, tau: f64) -> Mat {
    let mut g = Mat::zeros(r.rows, r.cols);
    for i in 0..r.cols {
        let col = r.column(i);
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut den = 0.0;
        let mut num = 0.0;
        for &x in col {
            let w = (-tau * (x - min)).exp();
            den += w;
            num += x * w;
        }
        let s = num / den;
        let g_col = g.column_mut(i);
        for (c, &x) in col.iter().enumerate() {
            let w = (-tau * (x - min)).exp() / den;
            g_col[c] = -w * (1.0 - tau * (x - s));
        }
    }
    g
}

fn result_to_real(r: &ResultMatrix) -> Mat {
    Mat::from_data(r.rows, r.cols, r.data.iter().map(|&x| x as f64).collect())
}

/// Everything one backward pass produces.
pub struct BackwardOutput {
    /// Gradient that moves theta (normalization Jacobian applied).
    pub grad_theta: Mat,
    /// Folded per-variable gradient before the normalization Jacobian;
    /// this is the confidence signal for partial-assignment extraction.
    pub grad_folded: Mat,
    pub loss: f64,
    pub assignment: BinaryMatrix,
    pub result: ResultMatrix,
}

/// Forward + backward through the whole chain:
/// theta -> (normalize) -> binarize (STE) -> R = P*A -> smooth-min loss.
pub fn backward(p: &ProblemMatrix, theta: &Mat, config: &OptimizerConfig) -> BackwardOutput {
    let theta_norm = if config.normalize {
        normalize_rows(theta)
    } else {
        theta.clone()
    };
    let a = binarize(&theta_norm);
    let r = spmm_forward(p, &a).expect("shape fixed by construction");
    let r_real = result_to_real(&r);
    let loss_value = loss(&r_real, config.tau);

    let g_r = loss_grad_wrt_result(&r_real, config.tau);
    let g_a = spmm_transpose(p, &g_r).expect("shape fixed by construction");

    // STE through binarization, then fold the complementary literal rows:
    // pos row = B(theta_norm), neg row = 1 - B(theta_norm).
    let v = theta.rows;
    let n = theta.cols;
    let mut grad_folded = Mat::zeros(v, n);
    for i in 0..n {
        let ga_col = g_a.column(i);
        let out_col = grad_folded.column_mut(i);
        for var in 0..v {
            out_col[var] = ga_col[2 * var] - ga_col[2 * var + 1];
        }
    }

    let grad_theta = if config.normalize {
        apply_normalization_jacobian(theta, &grad_folded)
    } else {
        grad_folded.clone()
    };

    BackwardOutput {
        grad_theta,
        grad_folded,
        loss: loss_value,
        assignment: a,
        result: r,
    }
}

/// Exact Jacobian of the guarded row-mean normalization. For row v with mean
/// mu and denominator d: d(t_i/d)/d(t_j) = delta_ij/d - t_i/(N d^2) when
/// |mu| > epsilon (d = mu varies with every entry); when the guard is active
/// d is constant, so only the diagonal term remains.
pub fn apply_normalization_jacobian(theta: &Mat, grad_norm: &Mat) -> Mat {
    let n = theta.cols as f64;
    let mut out = Mat::zeros(theta.rows, theta.cols);
    for row in 0..theta.rows {
        let mu: f64 = (0..theta.cols).map(|i| theta.at(row, i)).sum::<f64>() / n;
        let denom = guarded_row_mean(theta, row);
        let guard_active = mu.abs() <= NORM_EPSILON;
        let dot: f64 = (0..theta.cols)
            .map(|i| grad_norm.at(row, i) * theta.at(row, i))
            .sum();
        for j in 0..theta.cols {
            let mut g = grad_norm.at(row, j) / denom;
            if !guard_active {
                g -= dot / (n * denom * denom);
            }
            *out.at_mut(row, j) = g;
        }
    }
    out
}

/// Stepwise decay with warm restarts: within each restart cycle the rate
/// drops by `decay_factor` every `decay_every` iterations, floored at
/// `lr_final`; each restart boundary returns it to `lr_initial`.
pub fn lr_at(iteration: u64, config: &OptimizerConfig) -> f64 {
    let phase = iteration % config.restart_every;
    let steps = phase / config.decay_every;
    let lr = config.lr_initial / config.decay_factor.powi(steps as i32);
    lr.max(config.lr_final)
}

/// One decoupled-weight-decay adaptive-moment update.
pub fn adamw_step(tensor: &mut AssignmentTensor, grad: &Mat, lr: f64, config: &OptimizerConfig) {
    assert_eq!(grad.rows, tensor.theta.rows);
    assert_eq!(grad.cols, tensor.theta.cols);
    tensor.step += 1;
    let t = tensor.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for idx in 0..tensor.theta.data.len() {
        let g = grad.data[idx];
        let m = config.beta1 * tensor.m.data[idx] + (1.0 - config.beta1) * g;
        let v = config.beta2 * tensor.v.data[idx] + (1.0 - config.beta2) * g * g;
        tensor.m.data[idx] = m;
        tensor.v.data[idx] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        let theta = tensor.theta.data[idx];
        tensor.theta.data[idx] =
            theta - lr * (m_hat / (v_hat.sqrt() + config.adam_eps) + config.weight_decay * theta);
    }
}

/// Per-candidate hard evaluation result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnEval {
    pub satisfied: u32,
    pub is_sat: bool,
}

/// Counts of clauses with at least one true literal per candidate; a column
/// is SAT iff its count reaches the clause count (column-wise minimum of R
/// is nonzero).
pub fn hard_evaluate(p: &ProblemMatrix, a: &BinaryMatrix) -> Vec<ColumnEval> {
    let r = spmm_forward(p, a).expect("dimension checked by caller");
    hard_evaluate_result(&r)
}

fn hard_evaluate_result(r: &ResultMatrix) -> Vec<ColumnEval> {
    (0..r.cols)
        .map(|i| {
            let satisfied = r.column(i).iter().filter(|&&x| x >= 1).count() as u32;
            ColumnEval {
                satisfied,
                is_sat: satisfied as usize == r.rows,
            }
        })
        .collect()
}

/// Decode candidate column `col` of a binary assignment matrix into a model
/// (positive-literal rows).
pub fn decode_column(a: &BinaryMatrix, col: usize) -> Model {
    let v = a.rows / 2;
    Model::new((0..v).map(|var| a.at(2 * var, col) == 1).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: u64,
    pub lr: f64,
    pub loss: f64,
    pub best_fraction: f64,
}

/// Final state of the gradient phase handed to extraction and dispatch.
#[derive(Debug, Clone)]
pub struct GradSnapshot {
    /// Folded V x N variable gradient from the final backward pass
    /// (pre normalization-Jacobian; the extraction confidence signal).
    pub grad_theta: Mat,
    /// Same gradient with the normalization Jacobian applied.
    pub grad_post_jacobian: Mat,
    /// Final binarized assignment matrix (2V x N).
    pub assignment: BinaryMatrix,
    pub hard_sat_counts: Vec<u32>,
    pub best_column: usize,
    pub loss_history: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub iterations: u64,
    pub converged: bool,
    /// Present when some column fully satisfied every clause.
    pub sat_model: Option<Model>,
}

/// The optimization loop: normalize, binarize, forward, hard check (every
/// `check_stride` iterations), loss, backward, AdamW step, schedule. Stops
/// on the convergence gate, a fully satisfying column, the iteration cap, or
/// the wall-clock cap.
pub fn run_gradient_phase(
    p: &ProblemMatrix,
    config: &OptimizerConfig,
    num_candidates: usize,
) -> GradSnapshot {
    let start = Instant::now();
    let num_vars = p.num_vars();
    let num_clauses = p.num_clauses();
    if num_vars == 0 || num_clauses == 0 {
        return trivial_snapshot(num_vars, num_clauses, num_candidates, config.rng_seed);
    }
    let mut tensor = init_assignments(num_vars, num_candidates, config.rng_seed);
    let mut loss_history = Vec::new();
    let mut trace = Vec::new();
    let mut best_fraction = 0.0f64;

    let finish = |bw: BackwardOutput,
                  loss_history: Vec<f64>,
                  trace: Vec<TraceRow>,
                  iterations: u64,
                  converged: bool| {
        let evals = hard_evaluate_result(&bw.result);
        let counts: Vec<u32> = evals.iter().map(|e| e.satisfied).collect();
        let best_column = best_column_of(&counts);
        let sat_model = evals
            .iter()
            .position(|e| e.is_sat)
            .map(|col| decode_column(&bw.assignment, col));
        GradSnapshot {
            grad_theta: bw.grad_folded,
            grad_post_jacobian: bw.grad_theta,
            assignment: bw.assignment,
            hard_sat_counts: counts,
            best_column,
            loss_history,
            trace,
            iterations,
            converged,
            sat_model,
        }
    };

    for iter in 0..config.max_iterations {
        let bw = backward(p, &tensor.theta, config);
        let lr = lr_at(iter, config);

        let check = iter % config.check_stride == 0;
        if check {
            let evals = hard_evaluate_result(&bw.result);
            let best = evals.iter().map(|e| e.satisfied).max().unwrap_or(0);
            best_fraction = if num_clauses == 0 {
                1.0
            } else {
                best as f64 / num_clauses as f64
            };
            let full_sat = evals.iter().any(|e| e.is_sat);
            let over_budget = config
                .max_seconds
                .is_some_and(|cap| start.elapsed().as_secs_f64() >= cap);
            if best_fraction > config.convergence_fraction || full_sat || over_budget {
                loss_history.push(bw.loss);
                trace.push(TraceRow {
                    iteration: iter,
                    lr,
                    loss: bw.loss,
                    best_fraction,
                });
                let converged = best_fraction > config.convergence_fraction || full_sat;
                return finish(bw, loss_history, trace, iter + 1, converged);
            }
        }

        loss_history.push(bw.loss);
        trace.push(TraceRow {
            iteration: iter,
            lr,
            loss: bw.loss,
            best_fraction,
        });

        adamw_step(&mut tensor, &bw.grad_theta, lr, config);
        if config.reset_moments_on_restart && (iter + 1) % config.restart_every == 0 {
            tensor.reset_moments();
        }
    }

    let bw = backward(p, &tensor.theta, config);
    finish(bw, loss_history, trace, config.max_iterations, false)
}

// Formulas without variables or without clauses never enter the loop: with
// no clauses every candidate is vacuously satisfying, with no variables only
// input empty clauses can exist and nothing is optimizable.
fn trivial_snapshot(
    num_vars: usize,
    num_clauses: usize,
    num_candidates: usize,
    seed: u64,
) -> GradSnapshot {
    let assignment = if num_vars == 0 {
        BinaryMatrix::zeros(0, num_candidates)
    } else {
        binarize(&init_assignments(num_vars, num_candidates, seed).theta)
    };
    let sat = num_clauses == 0;
    let sat_model = sat.then(|| decode_column(&assignment, 0));
    GradSnapshot {
        grad_theta: Mat::zeros(num_vars, num_candidates),
        grad_post_jacobian: Mat::zeros(num_vars, num_candidates),
        assignment,
        hard_sat_counts: vec![0; num_candidates],
        best_column: 0,
        loss_history: Vec::new(),
        trace: Vec::new(),
        iterations: 0,
        converged: sat,
        sat_model,
    }
}

fn best_column_of(counts: &[u32]) -> usize {
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{count_satisfied_clauses, parse_dimacs, verify_model};
    use crate::matrix::encode_problem;

    const FIG1: &str = "p cnf 4 5\n1 2 0\n3 4 0\n-1 -3 0\n-2 4 0\n1 -4 0\n";

    #[test]
    fn init_is_deterministic_and_balanced() {
        let a = init_assignments(1000, 64, 7);
        let b = init_assignments(1000, 64, 7);
        assert_eq!(a.theta.data, b.theta.data);
        assert_eq!(a.step, 0);
        assert!(a.m.data.iter().all(|&x| x == 0.0));
        let pos = a.theta.data.iter().filter(|&&x| x > 0.0).count() as f64;
        let frac = pos / a.theta.data.len() as f64;
        assert!((0.45..=0.55).contains(&frac), "positive fraction {frac}");
        let mean: f64 = a.theta.data.iter().sum::<f64>() / a.theta.data.len() as f64;
        assert!(mean.abs() < 4.0 / (64_000f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn normalize_rows_examples() {
        let t = Mat::from_data(1, 4, vec![2.0, 2.0, 2.0, 2.0]);
        assert_eq!(normalize_rows(&t).data, vec![1.0, 1.0, 1.0, 1.0]);
        let t = Mat::from_data(1, 2, vec![1.0, 3.0]);
        assert_eq!(normalize_rows(&t).data, vec![0.5, 1.5]);
    }

    #[test]
    fn normalize_guards_zero_mean_row() {
        let t = Mat::from_data(1, 2, vec![1.0, -1.0]);
        let out = normalize_rows(&t);
        assert!(out.data.iter().all(|x| x.is_finite()));
        assert_eq!(out.data, vec![1.0 / NORM_EPSILON, -1.0 / NORM_EPSILON]);
    }

    #[test]
    fn binarize_sign_cases() {
        let t = Mat::from_data(3, 1, vec![2.5, -0.3, 0.0]);
        let a = binarize(&t);
        // (pos, neg) per variable
        assert_eq!(a.data, vec![1, 0, 0, 1, 0, 1]);
    }

    #[test]
    fn binarized_rows_always_complementary() {
        let tensor = init_assignments(17, 9, 3);
        let a = binarize(&normalize_rows(&tensor.theta));
        for i in 0..9 {
            for v in 0..17 {
                assert_eq!(a.at(2 * v, i) + a.at(2 * v + 1, i), 1);
            }
        }
    }

    #[test]
    fn smooth_min_constant_column() {
        for tau in [0.5, 1.0, 10.0] {
            assert!((smooth_min(&[3.0, 3.0, 3.0], tau) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_min_converges_to_hard_min() {
        assert!(smooth_min(&[0.0, 5.0], 100.0).abs() < 1e-10);
    }

    #[test]
    fn smooth_min_matches_high_precision_oracle() {
        // 50-digit evaluation of the softmin average of [1,2,3] at tau=1
        let expected = 1.4247896173955585684690038213097463929;
        assert!((smooth_min(&[1.0, 2.0, 3.0], 1.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn smooth_min_bounded_and_overflow_safe() {
        let r = [0.0, 2.0, 1000.0, 7.0];
        for tau in [0.5, 1.0, 100.0, 1e4] {
            let s = smooth_min(&r, tau);
            assert!(s.is_finite());
            assert!((0.0..=1000.0).contains(&s));
        }
    }

    #[test]
    fn loss_examples() {
        let r = Mat::from_data(3, 4, vec![2.0; 12]);
        assert!((loss(&r, 1.0) + 4.0 * 2.0).abs() < 1e-12);
        let r = Mat::from_data(2, 1, vec![0.0, 5.0]);
        assert!(loss(&r, 100.0).abs() < 1e-10);
    }

    #[test]
    fn fig2_loss_matches_oracle() {
        // R of the worked encoding example, columns all-true / (T,T,T,F) / (F,T,F,T)
        let r = Mat::from_data(
            5,
            3,
            vec![
                2.0, 2.0, 0.0, 1.0, 1.0, // column 1
                2.0, 1.0, 0.0, 0.0, 2.0, // column 2
                1.0, 1.0, 2.0, 1.0, 0.0, // column 3
            ],
        );
        let expected = -1.5949068289251290105549581090082286750;
        assert!((loss(&r, 1.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        for (seed, tau) in [(1u64, 0.5), (2, 1.0), (3, 5.0)] {
            let (f, _) = crate::gen::random_ksat(6, seed, 3, 9);
            let p = encode_problem(&f);
            let tensor = init_assignments(6, 3, seed);
            let a = binarize(&normalize_rows(&tensor.theta));
            let r_int = spmm_forward(&p, &a).unwrap();
            let r = result_to_real(&r_int);
            let analytic = loss_grad_wrt_result(&r, tau);
            let h = 1e-5;
            for idx in 0..r.data.len() {
                let mut plus = r.clone();
                plus.data[idx] += h;
                let mut minus = r.clone();
                minus.data[idx] -= h;
                let fd = (loss(&plus, tau) - loss(&minus, tau)) / (2.0 * h);
                let denom = analytic.data[idx].abs().max(fd.abs()).max(1e-8);
                assert!(
                    (analytic.data[idx] - fd).abs() / denom < 1e-4,
                    "entry {idx}: analytic {} vs fd {fd}",
                    analytic.data[idx]
                );
            }
        }
    }

    #[test]
    fn normalization_jacobian_matches_finite_differences() {
        let tensor = init_assignments(5, 4, 11);
        let theta = tensor.theta;
        // random linear functional of the normalized output
        let c = init_assignments(5, 4, 12).theta;
        let f = |t: &Mat| -> f64 {
            let n = normalize_rows(t);
            n.data.iter().zip(c.data.iter()).map(|(a, b)| a * b).sum()
        };
        let analytic = apply_normalization_jacobian(&theta, &c);
        let h = 1e-6;
        for idx in 0..theta.data.len() {
            let mut plus = theta.clone();
            plus.data[idx] += h;
            let mut minus = theta.clone();
            minus.data[idx] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let denom = analytic.data[idx].abs().max(fd.abs()).max(1e-6);
            assert!(
                (analytic.data[idx] - fd).abs() / denom < 1e-4,
                "entry {idx}: analytic {} vs fd {fd}",
                analytic.data[idx]
            );
        }
    }

    #[test]
    fn gradient_step_decreases_single_clause_loss() {
        // one clause (x1), one variable, one candidate starting negative
        let f = parse_dimacs("p cnf 1 1\n1 0\n", "u").unwrap();
        let p = encode_problem(&f);
        let mut config = OptimizerConfig {
            tau: 0.5,
            normalize: false,
            ..OptimizerConfig::default()
        };
        config.rng_seed = 0;
        let theta = Mat::from_data(1, 1, vec![-0.7]);
        let bw = backward(&p, &theta, &config);
        // unsatisfied clause: gradient must push theta toward positive
        assert!(bw.grad_theta.data[0] < 0.0);
        let stepped = Mat::from_data(1, 1, vec![-0.7 - 0.8 * bw.grad_theta.data[0]]);
        let bw2 = backward(&p, &stepped, &config);
        assert!(bw2.loss < bw.loss);
    }

    #[test]
    fn satisfied_margins_shrink_gradient() {
        // clauses (x1 v x2) and (x3); compare the gradient on x1 when its
        // clause is satisfied with margin 2 against when it is violated.
        // The softmin weights concentrate on the worse-off clause.
        let f = parse_dimacs("p cnf 3 2\n1 2 0\n3 0\n", "m").unwrap();
        let p = encode_problem(&f);
        let config = OptimizerConfig {
            tau: 5.0,
            normalize: false,
            ..OptimizerConfig::default()
        };
        let margin = Mat::from_data(3, 1, vec![1.0, 1.0, 1.0]); // R = [2, 1]
        let violated = Mat::from_data(3, 1, vec![-1.0, -1.0, 1.0]); // R = [0, 1]
        let g_margin = backward(&p, &margin, &config).grad_theta.data[0].abs();
        let g_violated = backward(&p, &violated, &config).grad_theta.data[0].abs();
        assert!(
            g_margin < g_violated,
            "margin {g_margin} vs violated {g_violated}"
        );
    }

    #[test]
    fn adamw_zero_gradient_is_identity() {
        let mut tensor = init_assignments(4, 3, 5);
        let before = tensor.theta.clone();
        let zero = Mat::zeros(4, 3);
        adamw_step(&mut tensor, &zero, 0.1, &OptimizerConfig::default());
        assert_eq!(tensor.theta.data, before.data);
        assert_eq!(tensor.step, 1);
    }

    #[test]
    fn adamw_unit_step_property() {
        // constant gradient: per-entry update magnitude approaches lr
        let config = OptimizerConfig::default();
        let mut tensor = init_assignments(1, 1, 0);
        tensor.theta.data[0] = 0.0;
        let grad = Mat::from_data(1, 1, vec![0.3]);
        let lr = 0.01;
        let mut prev = 0.0;
        for _ in 0..2000 {
            prev = tensor.theta.data[0];
            adamw_step(&mut tensor, &grad, lr, &config);
        }
        let update = (tensor.theta.data[0] - prev).abs();
        assert!((update - lr).abs() < 1e-4, "update {update}");
    }

    #[test]
    fn adamw_trajectories_are_bitwise_deterministic() {
        let config = OptimizerConfig::default();
        let run = || {
            let mut tensor = init_assignments(6, 2, 9);
            let grad = init_assignments(6, 2, 10).theta;
            for _ in 0..50 {
                adamw_step(&mut tensor, &grad, 0.05, &config);
            }
            tensor.theta.data
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn lr_schedule_conformance() {
        let config = OptimizerConfig::default();
        assert_eq!(lr_at(0, &config), 1e-1);
        assert_eq!(lr_at(30, &config), 1e-2);
        assert_eq!(lr_at(59, &config), 1e-2);
        assert_eq!(lr_at(360, &config), 1e-1);
        for iter in 0..1000 {
            let lr = lr_at(iter, &config);
            assert!(lr >= config.lr_final && lr <= config.lr_initial);
        }
    }

    #[test]
    fn hard_evaluate_agrees_with_clause_counting() {
        for seed in 0..10 {
            let (f, _) = crate::gen::random_ksat(8, seed, 3, 20);
            let p = encode_problem(&f);
            let tensor = init_assignments(8, 4, seed);
            let a = binarize(&tensor.theta);
            let evals = hard_evaluate(&p, &a);
            for (i, eval) in evals.iter().enumerate() {
                let model = decode_column(&a, i);
                let count = count_satisfied_clauses(&f, &model).unwrap() as u32;
                assert_eq!(eval.satisfied, count);
                assert_eq!(eval.is_sat, count as usize == f.num_clauses());
            }
        }
    }

    #[test]
    fn gradient_phase_solves_small_satisfiable_instance() {
        let f = parse_dimacs(FIG1, "fig1").unwrap();
        let p = encode_problem(&f);
        let config = OptimizerConfig {
            rng_seed: 1,
            check_stride: 1,
            ..OptimizerConfig::default()
        };
        let snap = run_gradient_phase(&p, &config, 8);
        assert!(snap.converged);
        let model = snap.sat_model.expect("fully satisfying column");
        assert!(verify_model(&f, &model).unwrap());
    }

    #[test]
    fn gradient_phase_cannot_satisfy_complementary_units() {
        let f = parse_dimacs("p cnf 1 2\n1 0\n-1 0\n", "cu").unwrap();
        let p = encode_problem(&f);
        let config = OptimizerConfig {
            max_iterations: 200,
            check_stride: 1,
            ..OptimizerConfig::default()
        };
        let snap = run_gradient_phase(&p, &config, 4);
        assert!(!snap.converged);
        assert!(snap.sat_model.is_none());
        assert_eq!(snap.iterations, 200);
        assert!(snap.hard_sat_counts.iter().all(|&c| c == 1));
    }

    #[test]
    fn gradient_phase_is_deterministic() {
        let (f, _) = crate::gen::random_ksat(20, 4, 3, 80);
        let p = encode_problem(&f);
        let config = OptimizerConfig {
            max_iterations: 60,
            rng_seed: 13,
            ..OptimizerConfig::default()
        };
        let a = run_gradient_phase(&p, &config, 16);
        let b = run_gradient_phase(&p, &config, 16);
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.hard_sat_counts, b.hard_sat_counts);
        assert_eq!(a.assignment.data, b.assignment.data);
        assert_eq!(a.grad_theta.data, b.grad_theta.data);
    }

    #[test]
    fn loss_invariant_under_clause_permutation() {
        let (f, _) = crate::gen::random_ksat(6, 2, 3, 10);
        let mut clauses = f.clauses().to_vec();
        clauses.rotate_left(3);
        let g = crate::cnf::CnfFormula::new(6, clauses, "perm");
        let tensor = init_assignments(6, 4, 2);
        let config = OptimizerConfig::default();
        let la = backward(&encode_problem(&f), &tensor.theta, &config).loss;
        let lb = backward(&encode_problem(&g), &tensor.theta, &config).loss;
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().unwrap().is_empty());
        let bad = OptimizerConfig {
            tau: 0.0,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
        let odd = OptimizerConfig {
            restart_every: 100,
            ..OptimizerConfig::default()
        };
        assert_eq!(odd.validate().unwrap().len(), 1);
    }
}
