//! Sparse clause-literal incidence matrix and the forward/backward
//! multiplication kernels shared by all numeric phases.
//!
//! Layout: the problem matrix has one row per clause and two columns per
//! variable. The positive literal of variable v (1-indexed) sits at column
//! 2(v-1), the negative literal at 2(v-1)+1. Stored entries all have value 1,
//! so only row offsets and column indices are kept.

use crate::cnf::CnfFormula;
use std::io::Write;
use thiserror::Error;

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy + Default> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.data[col * self.rows + row]
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[T] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, col: usize) -> &mut [T] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }
}

pub type Mat = DenseMatrix<f64>;
/// 0/1 matrix; entries are stored as bytes.
pub type BinaryMatrix = DenseMatrix<u8>;
/// Satisfied-literal counts, one row per clause, one column per candidate.
pub type ResultMatrix = DenseMatrix<u32>;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: expected {expected} rows, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Row-compressed 0/1 clause-literal incidence matrix (C rows, 2V columns).
#[derive(Debug, Clone)]
pub struct ProblemMatrix {
    num_clauses: usize,
    num_vars: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
}

impl ProblemMatrix {
    pub fn num_clauses(&self) -> usize {
        self.num_clauses
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_literal_columns(&self) -> usize {
        2 * self.num_vars
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Column indices of the literals in clause row `r`, strictly increasing.
    pub fn row(&self, r: usize) -> &[u32] {
        &self.col_indices[self.row_offsets[r]..self.row_offsets[r + 1]]
    }

    /// Dump as Matrix Market coordinate format (1-indexed) for debugging.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate integer general")?;
        writeln!(
            w,
            "{} {} {}",
            self.num_clauses,
            2 * self.num_vars,
            self.nnz()
        )?;
        for r in 0..self.num_clauses {
            for &c in self.row(r) {
                writeln!(w, "{} {} 1", r + 1, c + 1)?;
            }
        }
        Ok(())
    }
}

/// Build the sparse problem matrix from a formula. Row r holds exactly the
/// literal columns of clause r.
pub fn encode_problem(formula: &CnfFormula) -> ProblemMatrix {
    let mut row_offsets = Vec::with_capacity(formula.num_clauses() + 1);
    let mut col_indices = Vec::new();
    row_offsets.push(0);
    for clause in formula.clauses() {
        let mut cols: Vec<u32> = clause.iter().map(|l| l.column() as u32).collect();
        cols.sort_unstable();
        col_indices.extend_from_slice(&cols);
        row_offsets.push(col_indices.len());
    }
    ProblemMatrix {
        num_clauses: formula.num_clauses(),
        num_vars: formula.num_vars(),
        row_offsets,
        col_indices,
    }
}

/// R = P * A. R[c,i] counts the literals of clause c set true by candidate i.
pub fn spmm_forward(p: &ProblemMatrix, a: &BinaryMatrix) -> Result<ResultMatrix, MatrixError> {
    if a.rows != p.num_literal_columns() {
        return Err(MatrixError::DimensionMismatch {
            expected: p.num_literal_columns(),
            got: a.rows,
        });
    }
    let mut r = ResultMatrix::zeros(p.num_clauses, a.cols);
    for i in 0..a.cols {
        let a_col = a.column(i);
        let r_col = r.column_mut(i);
        for c in 0..p.num_clauses {
            let mut count = 0u32;
            for &l in p.row(c) {
                count += a_col[l as usize] as u32;
            }
            r_col[c] = count;
        }
    }
    Ok(r)
}

/// Pᵀ * G. Output row l accumulates G over the clauses containing literal l.
/// Accumulation order is fixed (clause-major per column) for reproducibility.
pub fn spmm_transpose(p: &ProblemMatrix, g: &Mat) -> Result<Mat, MatrixError> {
    if g.rows != p.num_clauses {
        return Err(MatrixError::DimensionMismatch {
            expected: p.num_clauses,
            got: g.rows,
        });
    }
    let mut out = Mat::zeros(p.num_literal_columns(), g.cols);
    for i in 0..g.cols {
        let g_col = g.column(i);
        let out_col = out.column_mut(i);
        for c in 0..p.num_clauses {
            let gv = g_col[c];
            for &l in p.row(c) {
                out_col[l as usize] += gv;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;
    use proptest::prelude::*;

    const FIG1: &str = "p cnf 4 5\n1 2 0\n3 4 0\n-1 -3 0\n-2 4 0\n1 -4 0\n";

    fn fig1_matrix() -> ProblemMatrix {
        encode_problem(&parse_dimacs(FIG1, "fig1").unwrap())
    }

    /// Assignment columns matching the worked encoding example: column 1
    /// all-true, column 2 = (T,T,T,F), column 3 = (F,T,F,T).
    fn fig2_assignment() -> BinaryMatrix {
        let cols = [
            [true, true, true, true],
            [true, true, true, false],
            [false, true, false, true],
        ];
        let mut a = BinaryMatrix::zeros(8, 3);
        for (i, col) in cols.iter().enumerate() {
            for (v, &val) in col.iter().enumerate() {
                *a.at_mut(2 * v, i) = val as u8;
                *a.at_mut(2 * v + 1, i) = !val as u8;
            }
        }
        a
    }

    #[test]
    fn encodes_second_clause_on_positive_columns() {
        let p = fig1_matrix();
        // clause 2 = (x3 v x4): positive columns of x3 and x4
        assert_eq!(p.row(1), &[4, 6]);
        assert_eq!(p.nnz(), 10);
    }

    #[test]
    fn encodes_negative_unit_clause() {
        let p = encode_problem(&parse_dimacs("p cnf 1 1\n-1 0\n", "u").unwrap());
        assert_eq!(p.row(0), &[1]);
    }

    #[test]
    fn forward_matches_worked_example() {
        let p = fig1_matrix();
        let r = spmm_forward(&p, &fig2_assignment()).unwrap();
        // Row 3 of R: 0 for the second assignment, 2 for the third.
        assert_eq!(r.at(2, 1), 0);
        assert_eq!(r.at(2, 2), 2);
    }

    #[test]
    fn forward_of_zero_assignment_is_zero() {
        let p = fig1_matrix();
        let a = BinaryMatrix::zeros(8, 3);
        let r = spmm_forward(&p, &a).unwrap();
        assert!(r.data.iter().all(|&x| x == 0));
    }

    #[test]
    fn forward_rejects_wrong_row_count() {
        let p = fig1_matrix();
        assert!(spmm_forward(&p, &BinaryMatrix::zeros(7, 1)).is_err());
        assert!(spmm_transpose(&p, &Mat::zeros(4, 1)).is_err());
    }

    #[test]
    fn transpose_scatters_unit_formula() {
        let p = encode_problem(&parse_dimacs("p cnf 1 1\n1 0\n", "u").unwrap());
        let g = Mat::from_data(1, 1, vec![1.0]);
        let out = spmm_transpose(&p, &g).unwrap();
        assert_eq!(out.data, vec![1.0, 0.0]);
    }

    #[test]
    fn transpose_scatters_both_literal_columns() {
        let p = encode_problem(&parse_dimacs("p cnf 2 1\n1 -2 0\n", "c").unwrap());
        let g = Mat::from_data(1, 1, vec![2.5]);
        let out = spmm_transpose(&p, &g).unwrap();
        assert_eq!(out.data, vec![2.5, 0.0, 0.0, 2.5]);
    }

    #[test]
    fn matrix_market_dump() {
        let p = encode_problem(&parse_dimacs("p cnf 1 1\n-1 0\n", "u").unwrap());
        let mut buf = Vec::new();
        p.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("1 2 1"));
        assert!(text.ends_with("1 2 1\n"));
    }

    fn dense_of(p: &ProblemMatrix) -> Vec<Vec<u32>> {
        (0..p.num_clauses())
            .map(|r| {
                let mut row = vec![0u32; p.num_literal_columns()];
                for &c in p.row(r) {
                    row[c as usize] = 1;
                }
                row
            })
            .collect()
    }

    #[test]
    fn one_hot_column_recovers_incidence_column() {
        let p = fig1_matrix();
        let dense = dense_of(&p);
        for l in 0..p.num_literal_columns() {
            let mut a = BinaryMatrix::zeros(p.num_literal_columns(), 1);
            *a.at_mut(l, 0) = 1;
            let r = spmm_forward(&p, &a).unwrap();
            for c in 0..p.num_clauses() {
                assert_eq!(r.at(c, 0), dense[c][l]);
            }
        }
    }

    proptest! {
        #[test]
        fn forward_matches_dense_oracle(seed in any::<u64>(), v in 2usize..7, c in 1usize..10, n in 1usize..4) {
            let (f, _) = crate::gen::random_ksat(v, seed, 3.min(v), c);
            let p = encode_problem(&f);
            let dense = dense_of(&p);
            let mut state = seed ^ 0x9e3779b97f4a7c15;
            let mut next = || { state = state.wrapping_mul(6364136223846793005).wrapping_add(1); (state >> 60) as u8 & 1 };
            let mut a = BinaryMatrix::zeros(2 * v, n);
            for x in a.data.iter_mut() { *x = next(); }
            let r = spmm_forward(&p, &a).unwrap();
            for i in 0..n {
                for row in 0..p.num_clauses() {
                    let expect: u32 = (0..2 * v).map(|l| dense[row][l] * a.at(l, i) as u32).sum();
                    prop_assert_eq!(r.at(row, i), expect);
                }
            }
        }

        #[test]
        fn forward_backward_adjoint(seed in any::<u64>(), v in 2usize..7, c in 1usize..10, n in 1usize..4) {
            let (f, _) = crate::gen::random_ksat(v, seed, 3.min(v), c);
            let p = encode_problem(&f);
            let mut state = seed ^ 0xdeadbeef;
            let mut next = || { state = state.wrapping_mul(6364136223846793005).wrapping_add(1); (state >> 11) as f64 / (1u64 << 53) as f64 };
            let mut a = Mat::zeros(2 * v, n);
            for x in a.data.iter_mut() { *x = next(); }
            let mut g = Mat::zeros(p.num_clauses(), n);
            for x in g.data.iter_mut() { *x = next() - 0.5; }
            // <P*A, G> computed densely against <A, P^T*G>
            let pt_g = spmm_transpose(&p, &g).unwrap();
            let lhs: f64 = (0..n).map(|i| {
                (0..p.num_clauses()).map(|row| {
                    let pa: f64 = p.row(row).iter().map(|&l| a.at(l as usize, i)).sum();
                    pa * g.at(row, i)
                }).sum::<f64>()
            }).sum();
            let rhs: f64 = a.data.iter().zip(pt_g.data.iter()).map(|(x, y)| x * y).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs().max(rhs.abs())));
        }

        #[test]
        fn nnz_invariant_under_clause_reordering(seed in any::<u64>(), v in 2usize..7, c in 2usize..10) {
            let (f, _) = crate::gen::random_ksat(v, seed, 3.min(v), c);
            let p = encode_problem(&f);
            let mut clauses: Vec<_> = f.clauses().to_vec();
            clauses.reverse();
            let g = crate::cnf::CnfFormula::new(f.num_vars(), clauses, "rev");
            let q = encode_problem(&g);
            prop_assert_eq!(p.nnz(), q.nnz());
            for r in 0..p.num_clauses() {
                prop_assert_eq!(p.row(r), q.row(p.num_clauses() - 1 - r));
            }
        }
    }
}
