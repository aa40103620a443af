//! DIMACS CNF parsing, the immutable clause database, and model checking.

use std::fmt::Write as _;
use thiserror::Error;

/// A variable or its negation. Variables are 1-indexed (DIMACS convention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    var: u32,
    positive: bool,
}

impl Literal {
    pub fn new(var: u32, positive: bool) -> Self {
        assert!(var >= 1, "variables are 1-indexed");
        Literal { var, positive }
    }

    pub fn from_dimacs(code: i64) -> Self {
        assert!(code != 0);
        Literal {
            var: code.unsigned_abs() as u32,
            positive: code > 0,
        }
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn positive(self) -> bool {
        self.positive
    }

    pub fn negated(self) -> Self {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }

    /// 0-based variable index.
    pub fn var_index(self) -> usize {
        (self.var - 1) as usize
    }

    /// Column of this literal in the problem matrix layout:
    /// positive literal of variable v at 2(v-1), negative at 2(v-1)+1.
    pub fn column(self) -> usize {
        2 * self.var_index() + if self.positive { 0 } else { 1 }
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64;
        if self.positive {
            v
        } else {
            -v
        }
    }

    /// True under the given model.
    pub fn eval(self, model: &Model) -> bool {
        model.values[self.var_index()] == self.positive
    }
}

/// A complete assignment: index v holds the value of variable v+1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub values: Vec<bool>,
}

impl Model {
    pub fn new(values: Vec<bool>) -> Self {
        Model { values }
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }
}

/// Immutable CNF clause database. Shared read-only by every solver phase.
#[derive(Debug, Clone)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<Literal>>,
    tautological: Vec<bool>,
    source_name: String,
    warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("non-integer token `{0}`")]
    BadToken(String),
    #[error("literal `{0}` is not a valid literal")]
    BadLiteral(String),
    #[error("variable {0} exceeds declared count {1}")]
    VariableOutOfRange(u32, usize),
    #[error("clause body before header")]
    ClauseBeforeHeader,
    #[error("model has {0} variables, formula has {1}")]
    ModelLengthMismatch(usize, usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<Literal>>, source_name: &str) -> Self {
        let mut f = CnfFormula {
            num_vars,
            clauses: Vec::new(),
            tautological: Vec::new(),
            source_name: source_name.to_string(),
            warnings: Vec::new(),
        };
        for c in clauses {
            f.push_clause(c);
        }
        f
    }

    fn push_clause(&mut self, mut lits: Vec<Literal>) {
        for l in &lits {
            assert!(
                l.var() as usize <= self.num_vars,
                "literal variable out of range"
            );
        }
        lits.sort_by_key(|l| (l.var(), !l.positive()));
        lits.dedup();
        let taut = lits.windows(2).any(|w| w[0].var() == w[1].var());
        self.clauses.push(lits);
        self.tautological.push(taut);
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    pub fn clause(&self, idx: usize) -> &[Literal] {
        &self.clauses[idx]
    }

    pub fn is_tautological(&self, idx: usize) -> bool {
        self.tautological[idx]
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(|c| c.is_empty())
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let _ = write!(out, "{} ", l.to_dimacs());
            }
            let _ = writeln!(out, "0");
        }
        out
    }

    /// Copy of this formula with each assumption added as a unit clause,
    /// for driving an external solver that lacks an assumption interface.
    pub fn with_assumption_units(&self, assumptions: &[(u32, bool)]) -> CnfFormula {
        let mut f = self.clone();
        for &(var, value) in assumptions {
            assert!(var as usize <= self.num_vars);
            f.push_clause(vec![Literal::new(var, value)]);
        }
        f
    }
}

/// Parse DIMACS CNF text. Clause-count mismatches against the header are
/// tolerated and recorded as warnings; duplicate literals are removed per
/// clause; tautological clauses are kept and flagged.
pub fn parse_dimacs(text: &str, source_name: &str) -> Result<CnfFormula, ParseError> {
    let mut num_vars: Option<usize> = None;
    let mut declared_clauses = 0usize;
    let mut formula: Option<CnfFormula> = None;
    let mut current: Vec<Literal> = Vec::new();

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[1] != "cnf" {
                return Err(ParseError::MalformedHeader(line.to_string()));
            }
            let v: usize = fields[2]
                .parse()
                .map_err(|_| ParseError::MalformedHeader(line.to_string()))?;
            let c: usize = fields[3]
                .parse()
                .map_err(|_| ParseError::MalformedHeader(line.to_string()))?;
            num_vars = Some(v);
            declared_clauses = c;
            formula = Some(CnfFormula {
                num_vars: v,
                clauses: Vec::with_capacity(c),
                tautological: Vec::with_capacity(c),
                source_name: source_name.to_string(),
                warnings: Vec::new(),
            });
            continue;
        }
        let v = num_vars.ok_or(ParseError::ClauseBeforeHeader)?;
        for tok in line.split_whitespace() {
            let code: i64 = tok
                .parse()
                .map_err(|_| ParseError::BadToken(tok.to_string()))?;
            if code == 0 {
                // `-0` is not a literal and not a terminator.
                if tok.starts_with('-') {
                    return Err(ParseError::BadLiteral(tok.to_string()));
                }
                let clause = std::mem::take(&mut current);
                formula.as_mut().unwrap().push_clause_checked(clause, v)?;
            } else {
                let lit = Literal::from_dimacs(code);
                if lit.var() as usize > v {
                    return Err(ParseError::VariableOutOfRange(lit.var(), v));
                }
                current.push(lit);
            }
        }
    }

    let mut formula = formula.ok_or(ParseError::MissingHeader)?;
    if !current.is_empty() {
        let nv = formula.num_vars;
        formula.push_clause_checked(std::mem::take(&mut current), nv)?;
        formula
            .warnings
            .push("final clause not terminated by 0".to_string());
    }
    if formula.clauses.len() != declared_clauses {
        formula.warnings.push(format!(
            "header declares {} clauses, found {}",
            declared_clauses,
            formula.clauses.len()
        ));
    }
    Ok(formula)
}

impl CnfFormula {
    fn push_clause_checked(
        &mut self,
        lits: Vec<Literal>,
        num_vars: usize,
    ) -> Result<(), ParseError> {
        for l in &lits {
            if l.var() as usize > num_vars {
                return Err(ParseError::VariableOutOfRange(l.var(), num_vars));
            }
        }
        self.push_clause(lits);
        Ok(())
    }
}

/// True iff every clause has at least one literal true under `model`.
pub fn verify_model(formula: &CnfFormula, model: &Model) -> Result<bool, ParseError> {
    if model.num_vars() != formula.num_vars() {
        return Err(ParseError::ModelLengthMismatch(
            model.num_vars(),
            formula.num_vars(),
        ));
    }
    Ok(formula
        .clauses
        .iter()
        .all(|c| c.iter().any(|l| l.eval(model))))
}

pub fn count_satisfied_clauses(formula: &CnfFormula, model: &Model) -> Result<usize, ParseError> {
    if model.num_vars() != formula.num_vars() {
        return Err(ParseError::ModelLengthMismatch(
            model.num_vars(),
            formula.num_vars(),
        ));
    }
    Ok(formula
        .clauses
        .iter()
        .filter(|c| c.iter().any(|l| l.eval(model)))
        .count())
}

/// SAT Competition output convention: `s` status line, then `v` lines of
/// signed literals terminated by 0 for SAT results.
pub fn format_solution(status: &str, model: Option<&Model>) -> String {
    let mut out = format!("s {status}\n");
    if let Some(m) = model {
        let mut line = String::from("v");
        for (i, &val) in m.values.iter().enumerate() {
            let code = if val { (i + 1) as i64 } else { -((i + 1) as i64) };
            let _ = write!(line, " {code}");
            if line.len() > 72 {
                let _ = writeln!(out, "{line}");
                line = String::from("v");
            }
        }
        let _ = writeln!(out, "{line} 0");
    }
    out
}

/// Parse `s`/`v` solver output lines back into (status, optional model).
pub fn parse_solution(text: &str, num_vars: usize) -> Option<(String, Option<Model>)> {
    let mut status = None;
    let mut values = vec![false; num_vars];
    let mut saw_values = false;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("s ") {
            status = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("v ") {
            saw_values = true;
            for tok in rest.split_whitespace() {
                let code: i64 = tok.parse().ok()?;
                if code == 0 {
                    continue;
                }
                let idx = code.unsigned_abs() as usize - 1;
                if idx < num_vars {
                    values[idx] = code > 0;
                }
            }
        }
    }
    let status = status?;
    let model = if saw_values {
        Some(Model::new(values))
    } else {
        None
    };
    Some((status, model))
}
