//! Standard-form LP/SOCP instances and the solver contract.
//!
//! A [`ConicProblem`] is `min cᵀv` subject to sparse equality rows, sparse
//! `a·v ≤ b` rows and second-order blocks `‖v[u]‖₂ ≤ v[t]`. Two backends
//! implement [`ConicSolver`]: an adapter over Clarabel (default) and a dense
//! homogeneous self-dual interior-point method written here.

mod clarabel_backend;
mod dense;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use clarabel_backend::ClarabelBackend;
pub use dense::DenseIpm;

use crate::error::{invalid, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Compressed sparse rows with one right-hand side per row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRows {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
    rhs: Vec<f64>,
}

impl SparseRows {
    fn new() -> Self {
        Self { ptr: vec![0], ..Default::default() }
    }

    fn push(&mut self, terms: &[(usize, f64)], rhs: f64) {
        for &(i, v) in terms {
            if v != 0.0 {
                self.idx.push(i);
                self.val.push(v);
            }
        }
        self.ptr.push(self.idx.len());
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.ptr[r], self.ptr[r + 1]);
        (&self.idx[a..b], &self.val[a..b])
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    fn row_dot(&self, r: usize, v: &[f64]) -> f64 {
        let (idx, val) = self.row(r);
        idx.iter().zip(val).map(|(&i, &a)| a * v[i]).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SocBlock {
    pub t: usize,
    pub u: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProblem {
    pub var_count: usize,
    objective: Vec<f64>,
    eq: SparseRows,
    ineq: SparseRows,
    soc: Vec<SocBlock>,
    var_names: Option<Vec<String>>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self { eq: SparseRows::new(), ineq: SparseRows::new(), ..Default::default() }
    }

    /// Appends `n` free variables and returns the index of the first.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.var_count;
        self.var_count += n;
        self.objective.resize(self.var_count, 0.0);
        if let Some(names) = &mut self.var_names {
            names.extend((first..self.var_count).map(|i| format!("v{i}")));
        }
        first
    }

    pub fn name_var(&mut self, i: usize, name: impl Into<String>) {
        let n = self.var_count;
        let names = self.var_names.get_or_insert_with(|| (0..n).map(|i| format!("v{i}")).collect());
        names[i] = name.into();
    }

    pub fn var_names(&self) -> Option<&[String]> {
        self.var_names.as_deref()
    }

    pub fn add_cost(&mut self, i: usize, c: f64) {
        self.objective[i] += c;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn add_eq(&mut self, terms: &[(usize, f64)], rhs: f64) {
        self.eq.push(terms, rhs);
    }

    pub fn add_le(&mut self, terms: &[(usize, f64)], rhs: f64) {
        self.ineq.push(terms, rhs);
    }

    pub fn add_ge(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let neg: Vec<(usize, f64)> = terms.iter().map(|&(i, v)| (i, -v)).collect();
        self.ineq.push(&neg, -rhs);
    }

    pub fn add_soc(&mut self, t: usize, u: Vec<usize>) {
        self.soc.push(SocBlock { t, u });
    }

    pub fn equalities(&self) -> &SparseRows {
        &self.eq
    }

    pub fn inequalities(&self) -> &SparseRows {
        &self.ineq
    }

    pub fn soc_blocks(&self) -> &[SocBlock] {
        &self.soc
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.var_count;
        if n == 0 {
            return invalid("problem has no variables");
        }
        for rows in [&self.eq, &self.ineq] {
            if rows.idx.iter().any(|&i| i >= n) {
                return invalid("constraint references an unknown variable");
            }
            if rows.val.iter().chain(&rows.rhs).any(|v| !v.is_finite()) {
                return invalid("non-finite constraint coefficient");
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite objective coefficient");
        }
        for b in &self.soc {
            if b.u.is_empty() {
                return invalid("empty second-order cone block");
            }
            if b.t >= n || b.u.iter().any(|&i| i >= n) {
                return invalid("cone block references an unknown variable");
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }

    /// Largest constraint violation of `v`, relative to
    /// `max(1, ‖v‖∞ + ‖rhs‖∞ + ‖slack‖∞)`.
    pub fn primal_residual(&self, v: &[f64]) -> f64 {
        let mut viol: f64 = 0.0;
        let mut scale: f64 = v.iter().fold(0.0, |m, x| m.max(x.abs()));
        let mut rhs_max: f64 = 0.0;
        let mut slack_max: f64 = 0.0;
        for r in 0..self.eq.len() {
            viol = viol.max((self.eq.row_dot(r, v) - self.eq.rhs[r]).abs());
            rhs_max = rhs_max.max(self.eq.rhs[r].abs());
        }
        for r in 0..self.ineq.len() {
            let s = self.ineq.rhs[r] - self.ineq.row_dot(r, v);
            viol = viol.max(-s);
            slack_max = slack_max.max(s);
            rhs_max = rhs_max.max(self.ineq.rhs[r].abs());
        }
        for b in &self.soc {
            let norm = b.u.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
            viol = viol.max(norm - v[b.t]);
            slack_max = slack_max.max(v[b.t] - norm);
        }
        scale += rhs_max + slack_max;
        viol.max(0.0) / scale.max(1.0)
    }

    /// Plain-text dump: header line, then `c i v`, `eq r i v`, `eqb r v`,
    /// `le r i v`, `leb r v` and `soc t u1 u2 ...` records.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "conic vars {} eq {} le {} soc {}", self.var_count, self.eq.len(), self.ineq.len(), self.soc.len())?;
        for (i, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                writeln!(w, "c {i} {c:e}")?;
            }
        }
        for (tag, rows) in [("eq", &self.eq), ("le", &self.ineq)] {
            for r in 0..rows.len() {
                let (idx, val) = rows.row(r);
                for (i, v) in idx.iter().zip(val) {
                    writeln!(w, "{tag} {r} {i} {v:e}")?;
                }
                writeln!(w, "{tag}b {r} {:e}", rows.rhs[r])?;
            }
        }
        for b in &self.soc {
            let u: Vec<String> = b.u.iter().map(usize::to_string).collect();
            writeln!(w, "soc {} {}", b.t, u.join(" "))?;
        }
        Ok(())
    }

    /// Same problem with every objective coefficient multiplied by `lambda`.
    pub fn scaled_objective(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.objective.iter_mut().for_each(|c| *c *= lambda);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalError,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
            Self::Unbounded => "unbounded",
            Self::MaxIter => "max_iter",
            Self::NumericalError => "numerical_error",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub primal: Option<Vec<f64>>,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Compact copy without the primal vector, for provenance records.
    pub fn summary(&self) -> Self {
        Self { primal: None, ..self.clone() }
    }

    pub(crate) fn without_primal(status: SolveStatus, iterations: usize, wall_time: f64) -> Self {
        Self {
            status,
            primal: None,
            objective_value: f64::NAN,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            iterations,
            wall_time,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return invalid(format!("tolerance {} outside (0, 1e-2]", self.tol));
        }
        if self.max_iter == 0 {
            return invalid("iteration cap must be positive");
        }
        Ok(())
    }
}

pub trait ConicSolver {
    fn solve(&self, problem: &ConicProblem, opts: &SolveOptions) -> Result<SolveReport>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Clarabel,
    Dense,
}

impl ConicSolver for Backend {
    fn solve(&self, problem: &ConicProblem, opts: &SolveOptions) -> Result<SolveReport> {
        match self {
            Backend::Clarabel => ClarabelBackend.solve(problem, opts),
            Backend::Dense => DenseIpm.solve(problem, opts),
        }
    }
}

pub fn solve_lp(problem: &ConicProblem, tol: f64) -> Result<SolveReport> {
    if !problem.soc_blocks().is_empty() {
        return invalid("solve_lp called on a problem with cone blocks");
    }
    Backend::default().solve(problem, &SolveOptions::with_tol(tol))
}

pub fn solve_socp(problem: &ConicProblem, tol: f64) -> Result<SolveReport> {
    Backend::default().solve(problem, &SolveOptions::with_tol(tol))
}

#[cfg(not(target_family = "wasm"))]
pub(crate) struct Clock(std::time::Instant);

#[cfg(not(target_family = "wasm"))]
impl Clock {
    pub(crate) fn start() -> Self {
        Self(std::time::Instant::now())
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(target_family = "wasm")]
pub(crate) struct Clock;

#[cfg(target_family = "wasm")]
impl Clock {
    pub(crate) fn start() -> Self {
        Self
    }

    pub(crate) fn elapsed(&self) -> f64 {
        0.0
    }
}
