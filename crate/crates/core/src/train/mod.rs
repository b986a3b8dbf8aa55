//! Training programs: plain SCNN with ℓ1 loss, LASSO and Ridge SCNN,
//! WaDiRo-SCNN under ℓ1 and ℓ2 Wasserstein ground norms, physics-constrained
//! variants and the WaDiRo linear-regression baseline.
//!
//! Every program minimizes the mean absolute residual `(1/N) Σ |βᵀẑ_j|` plus
//! its penalty. The penalty covers the trainable components of β only: the
//! fixed `−1` label coefficient never enters a norm and the output bias enters
//! only when `penalize_bias` is set.

mod physics;

use serde::{Deserialize, Serialize};

pub use physics::{LinearRow, PhysicsConstraints};

use crate::conic::{Backend, ConicProblem, ConicSolver, SolveOptions, SolveReport, SolveStatus, DEFAULT_TOL};
use crate::data::{compute_patterns, ActivationPatterns, Dataset, LiftedDataset, SamplingSet};
use crate::error::{invalid, Error, Result};

/// Ground norm of the Wasserstein metric; the penalty uses its dual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Program {
    ScnnL1,
    ScnnLasso { lambda: f64 },
    ScnnRidge { lambda: f64 },
    WadiroL1 { eps: f64 },
    WadiroL2 { eps: f64 },
    WadiroLinreg { eps: f64, norm: NormKind },
}

impl Program {
    fn weight(&self) -> f64 {
        match *self {
            Program::ScnnL1 => 0.0,
            Program::ScnnLasso { lambda } | Program::ScnnRidge { lambda } => lambda,
            Program::WadiroL1 { eps } | Program::WadiroL2 { eps } | Program::WadiroLinreg { eps, .. } => eps,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Program::ScnnL1 => "scnn_l1",
            Program::ScnnLasso { .. } => "scnn_lasso",
            Program::ScnnRidge { .. } => "scnn_ridge",
            Program::WadiroL1 { .. } => "wadiro_l1",
            Program::WadiroL2 { .. } => "wadiro_l2",
            Program::WadiroLinreg { .. } => "wadiro_linreg",
        }
    }

    /// Same program with its ε or λ replaced.
    pub fn with_weight(&self, w: f64) -> Self {
        match *self {
            Program::ScnnL1 => Program::ScnnL1,
            Program::ScnnLasso { .. } => Program::ScnnLasso { lambda: w },
            Program::ScnnRidge { .. } => Program::ScnnRidge { lambda: w },
            Program::WadiroL1 { .. } => Program::WadiroL1 { eps: w },
            Program::WadiroL2 { .. } => Program::WadiroL2 { eps: w },
            Program::WadiroLinreg { norm, .. } => Program::WadiroLinreg { eps: w, norm },
        }
    }

    pub fn penalty_weight(&self) -> f64 {
        self.weight()
    }
}

/// Tie-breaking for programs whose optimal set is unbounded (no penalty):
/// a second solve picks the minimum-ℓ1 weights among loss-optimal ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    None,
    #[default]
    MinL1,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_neurons() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub program: Program,
    #[serde(default = "default_neurons")]
    pub max_neurons: usize,
    #[serde(default)]
    pub with_bias: bool,
    #[serde(default)]
    pub physics: Option<PhysicsConstraints>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default)]
    pub penalize_bias: bool,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub backend: Backend,
}

impl TrainConfig {
    pub fn new(program: Program) -> Self {
        Self {
            program,
            max_neurons: default_neurons(),
            with_bias: false,
            physics: None,
            seed: 0,
            solver_tol: DEFAULT_TOL,
            penalize_bias: false,
            tie_break: TieBreak::default(),
            backend: Backend::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.program.weight();
        if !(w >= 0.0) || !w.is_finite() {
            return invalid(format!("{} weight must be finite and nonnegative, got {w}", self.program.name()));
        }
        if self.max_neurons < 1 {
            return invalid("max_neurons must be at least 1");
        }
        if !(self.solver_tol > 0.0 && self.solver_tol <= 1e-2) {
            return invalid("solver_tol must lie in (0, 1e-2]");
        }
        Ok(())
    }
}

/// Convex weights. `nu[i]` and `omega[i]` have the (possibly bias-augmented)
/// input width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawWeights {
    pub nu: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub bias: Option<f64>,
}

impl RawWeights {
    pub fn zeros(p: usize, d: usize, with_bias: bool) -> Self {
        Self { nu: vec![vec![0.0; d]; p], omega: vec![vec![0.0; d]; p], bias: with_bias.then_some(0.0) }
    }

    pub fn p(&self) -> usize {
        self.nu.len()
    }

    pub fn d(&self) -> usize {
        self.nu.first().map_or(0, Vec::len)
    }

    /// `(vec ν, vec(−ω), [b,] −1)`.
    pub fn beta(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.nu.iter().flatten().copied().collect();
        out.extend(self.omega.iter().flatten().map(|v| -v));
        if let Some(b) = self.bias {
            out.push(b);
        }
        out.push(-1.0);
        out
    }

    /// `u_i = ν_i − ω_i`.
    pub fn u(&self, i: usize) -> Vec<f64> {
        self.nu[i].iter().zip(&self.omega[i]).map(|(a, b)| a - b).collect()
    }

    /// Prediction in training units for a (bias-augmented) input and gate bits.
    pub fn predict_with_gates(&self, x: &[f64], gates: &[bool]) -> f64 {
        let mut y = self.bias.unwrap_or(0.0);
        for (i, &g) in gates.iter().enumerate() {
            if g {
                y += self.nu[i].iter().zip(&self.omega[i]).zip(x).map(|((a, b), xk)| (a - b) * xk).sum::<f64>();
            }
        }
        y
    }

    /// Trainable components in β order (bias included when present).
    pub fn trainable(&self, with_bias_component: bool) -> Vec<f64> {
        let mut b = self.beta();
        b.pop();
        if self.bias.is_some() && !with_bias_component {
            b.pop();
        }
        b
    }

    pub fn scaled(&self, f: f64) -> Self {
        Self {
            nu: self.nu.iter().map(|r| r.iter().map(|v| v * f).collect()).collect(),
            omega: self.omega.iter().map(|r| r.iter().map(|v| v * f).collect()).collect(),
            bias: self.bias.map(|b| b * f),
        }
    }
}

/// Weights of the WaDiRo linear-regression baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearWeights {
    pub w: Vec<f64>,
    pub bias: Option<f64>,
}

impl LinearWeights {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.bias.unwrap_or(0.0) + self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Dataset used by the programs: bias-augmented when requested.
pub fn training_view(dataset: &Dataset, with_bias: bool) -> Dataset {
    if with_bias {
        dataset.with_bias_column()
    } else {
        dataset.clone()
    }
}

struct Layout {
    p: usize,
    d: usize,
    nu: usize,
    om: usize,
    bias: Option<usize>,
    c: usize,
}

impl Layout {
    fn nu(&self, i: usize, k: usize) -> usize {
        self.nu + i * self.d + k
    }

    fn om(&self, i: usize, k: usize) -> usize {
        self.om + i * self.d + k
    }

    /// Variables entering the dual-norm penalty.
    fn penalized(&self, penalize_bias: bool) -> Vec<usize> {
        let mut v: Vec<usize> = (self.nu..self.nu + 2 * self.p * self.d).collect();
        if penalize_bias {
            v.extend(self.bias);
        }
        v
    }
}

/// Terms of `ŷ_j = Σ_i d_ji x_jᵀ(ν_i − ω_i) + b`.
fn prediction_terms(lay: &Layout, x: &[f64], pat: &ActivationPatterns, j: usize) -> Vec<(usize, f64)> {
    let mut t = Vec::with_capacity(2 * lay.p * lay.d + 1);
    for i in 0..lay.p {
        if pat.get(j, i) {
            for (k, &xk) in x.iter().enumerate() {
                if xk != 0.0 {
                    t.push((lay.nu(i, k), xk));
                    t.push((lay.om(i, k), -xk));
                }
            }
        }
    }
    if let Some(b) = lay.bias {
        t.push((b, 1.0));
    }
    t
}

#[derive(Clone, Copy)]
enum Penalty {
    None,
    L1,
    L2Squared,
    LInf,
    L2,
}

fn penalty_of(program: &Program) -> Penalty {
    match program {
        Program::ScnnL1 => Penalty::None,
        Program::ScnnLasso { .. } => Penalty::L1,
        Program::ScnnRidge { .. } => Penalty::L2Squared,
        Program::WadiroL1 { .. } | Program::WadiroLinreg { norm: NormKind::L1, .. } => Penalty::LInf,
        Program::WadiroL2 { .. } | Program::WadiroLinreg { norm: NormKind::L2, .. } => Penalty::L2,
    }
}

/// Appends `weight · pen(v[vars])` to the objective.
fn add_penalty(prob: &mut ConicProblem, vars: &[usize], pen: Penalty, weight: f64) {
    match pen {
        Penalty::None => {}
        Penalty::L1 => {
            let t = prob.add_vars(vars.len());
            for (k, &v) in vars.iter().enumerate() {
                prob.add_le(&[(v, 1.0), (t + k, -1.0)], 0.0);
                prob.add_le(&[(v, -1.0), (t + k, -1.0)], 0.0);
                prob.add_cost(t + k, weight);
            }
        }
        Penalty::LInf => {
            let a = prob.add_vars(1);
            for &v in vars {
                prob.add_le(&[(v, 1.0), (a, -1.0)], 0.0);
                prob.add_le(&[(v, -1.0), (a, -1.0)], 0.0);
            }
            prob.add_ge(&[(a, 1.0)], 0.0);
            prob.add_cost(a, weight);
        }
        Penalty::L2 => {
            let a = prob.add_vars(1);
            prob.add_soc(a, vars.to_vec());
            prob.add_cost(a, weight);
        }
        Penalty::L2Squared => {
            // ‖v‖² ≤ q  ⇔  ‖(v, (q−1)/2)‖ ≤ (q+1)/2.
            let q = prob.add_vars(3);
            let (top, low) = (q + 1, q + 2);
            prob.add_eq(&[(top, 1.0), (q, -0.5)], 0.5);
            prob.add_eq(&[(low, 1.0), (q, -0.5)], -0.5);
            let mut u = vars.to_vec();
            u.push(low);
            prob.add_soc(top, u);
            prob.add_cost(q, weight);
        }
    }
}

fn add_physics_rows(prob: &mut ConicProblem, rows: &[physics::PredRow], pred: &[Vec<(usize, f64)>]) {
    for row in rows {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for &(j, g) in &row.terms {
            terms.extend(pred[j].iter().map(|&(v, c)| (v, c * g)));
        }
        if let Some(u) = row.upper {
            prob.add_le(&terms, u);
        }
        if let Some(l) = row.lower {
            prob.add_ge(&terms, l);
        }
    }
}

/// Absolute-residual epigraph rows `|ŷ_j − y_j| ≤ c_j` with cost `1/N`.
fn add_loss_rows(prob: &mut ConicProblem, c: usize, pred: &[Vec<(usize, f64)>], y: &[f64]) {
    let inv_n = 1.0 / y.len() as f64;
    for (j, terms) in pred.iter().enumerate() {
        let mut up = terms.clone();
        up.push((c + j, -1.0));
        prob.add_le(&up, y[j]);
        let mut down: Vec<(usize, f64)> = terms.iter().map(|&(v, a)| (v, -a)).collect();
        down.push((c + j, -1.0));
        prob.add_le(&down, -y[j]);
        prob.add_cost(c + j, inv_n);
    }
}

struct Built {
    prob: ConicProblem,
    lay: Layout,
}

fn build_scnn(view: &Dataset, pat: &ActivationPatterns, cfg: &TrainConfig, physics_rows: &[physics::PredRow]) -> Built {
    let (p, d, n) = (pat.p(), view.d(), view.n());
    let mut prob = ConicProblem::new();
    let nu = prob.add_vars(p * d);
    let om = prob.add_vars(p * d);
    let bias = cfg.with_bias.then(|| prob.add_vars(1));
    let c = prob.add_vars(n);
    let lay = Layout { p, d, nu, om, bias, c };
    let pred: Vec<Vec<(usize, f64)>> = (0..n).map(|j| prediction_terms(&lay, view.row(j), pat, j)).collect();
    add_loss_rows(&mut prob, c, &pred, view.labels());
    for i in 0..p {
        for j in 0..n {
            let sign = if pat.get(j, i) { -1.0 } else { 1.0 };
            let x = view.row(j);
            let tn: Vec<(usize, f64)> = (0..d).map(|k| (lay.nu(i, k), sign * x[k])).collect();
            let to: Vec<(usize, f64)> = (0..d).map(|k| (lay.om(i, k), sign * x[k])).collect();
            prob.add_le(&tn, 0.0);
            prob.add_le(&to, 0.0);
        }
    }
    add_physics_rows(&mut prob, physics_rows, &pred);
    let vars = lay.penalized(cfg.penalize_bias);
    add_penalty(&mut prob, &vars, penalty_of(&cfg.program), cfg.program.weight());
    Built { prob, lay }
}

/// Re-solves with the loss capped at its optimum and minimizes `Σ|β_k|`
/// over the penalized components.
fn tie_break_solve(
    built: &Built,
    first: &SolveReport,
    cfg: &TrainConfig,
    opts: &SolveOptions,
) -> Result<Option<Vec<f64>>> {
    let x = first.primal.as_ref().expect("optimal report carries a primal");
    let lay = &built.lay;
    let mut prob = built.prob.clone();
    let n_loss = prob.var_count - lay.c;
    let loss_vars: Vec<(usize, f64)> = (lay.c..lay.c + n_loss)
        .filter(|&v| prob.objective()[v] != 0.0)
        .map(|v| (v, prob.objective()[v]))
        .collect();
    let opt: f64 = loss_vars.iter().map(|&(v, w)| w * x[v]).sum();
    let slack = 10.0 * opts.tol * (1.0 + opt.abs());
    prob.add_le(&loss_vars, opt + slack);
    for (v, _) in loss_vars {
        prob.add_cost(v, -prob.objective()[v]);
    }
    let vars = lay.penalized(cfg.with_bias && cfg.penalize_bias);
    add_penalty(&mut prob, &vars, Penalty::L1, 1.0);
    let second = cfg.backend.solve(&prob, opts)?;
    Ok(second.is_optimal().then(|| second.primal.unwrap()))
}

fn solver_failure(rep: &SolveReport) -> Error {
    match rep.status {
        SolveStatus::Infeasible => Error::Infeasible("training constraints admit no solution".into()),
        s => Error::Solver { status: s.to_string(), message: format!("after {} iterations", rep.iterations) },
    }
}

/// Trains an SCNN-family program. `dataset` is the standardized training
/// set without the bias column; `s` must have width `d + 1` when
/// `cfg.with_bias` is set. Physics constraints are read in the dataset's
/// label units.
pub fn train(dataset: &Dataset, s: &SamplingSet, cfg: &TrainConfig) -> Result<(RawWeights, SolveReport)> {
    cfg.validate()?;
    if matches!(cfg.program, Program::WadiroLinreg { .. }) {
        return invalid("wadiro_linreg is trained with train_wadiro_linreg");
    }
    let view = training_view(dataset, cfg.with_bias);
    if s.d() != view.d() {
        return invalid(format!("sampling vectors have width {}, training inputs have {}", s.d(), view.d()));
    }
    let rows = match &cfg.physics {
        Some(pc) => {
            pc.validate(dataset.n(), dataset.d())?;
            pc.compile(dataset)
        }
        None => Vec::new(),
    };
    let pat = compute_patterns(&view, s)?;
    let built = build_scnn(&view, &pat, cfg, &rows);
    let opts = SolveOptions::with_tol(cfg.solver_tol);
    let mut rep = cfg.backend.solve(&built.prob, &opts)?;
    if !rep.is_optimal() {
        return Err(solver_failure(&rep));
    }
    let mut x = rep.primal.clone().unwrap();
    if cfg.tie_break == TieBreak::MinL1 && cfg.program.weight() == 0.0 {
        if let Some(v) = tie_break_solve(&built, &rep, cfg, &opts)? {
            x = v;
        }
    }
    let lay = &built.lay;
    let weights = RawWeights {
        nu: (0..lay.p).map(|i| (0..lay.d).map(|k| x[lay.nu(i, k)]).collect()).collect(),
        omega: (0..lay.p).map(|i| (0..lay.d).map(|k| x[lay.om(i, k)]).collect()).collect(),
        bias: lay.bias.map(|b| x[b]),
    };
    rep.primal = Some(x);
    Ok((weights, rep))
}

/// `min ε‖w‖_dual + (1/N) Σ |y_j − wᵀx_j − b|` on plain features.
pub fn train_wadiro_linreg(dataset: &Dataset, cfg: &TrainConfig) -> Result<(LinearWeights, SolveReport)> {
    cfg.validate()?;
    let Program::WadiroLinreg { eps, norm } = cfg.program else {
        return invalid("train_wadiro_linreg needs a wadiro_linreg program");
    };
    let (n, d) = (dataset.n(), dataset.d());
    let mut prob = ConicProblem::new();
    let w = prob.add_vars(d);
    let bias = cfg.with_bias.then(|| prob.add_vars(1));
    let c = prob.add_vars(n);
    let pred: Vec<Vec<(usize, f64)>> = dataset
        .rows()
        .map(|x| {
            let mut t: Vec<(usize, f64)> = x.iter().enumerate().map(|(k, &v)| (w + k, v)).collect();
            t.extend(bias.map(|b| (b, 1.0)));
            t
        })
        .collect();
    add_loss_rows(&mut prob, c, &pred, dataset.labels());
    if let Some(pc) = &cfg.physics {
        pc.validate(n, d)?;
        add_physics_rows(&mut prob, &pc.compile(dataset), &pred);
    }
    let mut vars: Vec<usize> = (w..w + d).collect();
    if cfg.penalize_bias {
        vars.extend(bias);
    }
    let pen = if norm == NormKind::L1 { Penalty::LInf } else { Penalty::L2 };
    add_penalty(&mut prob, &vars, pen, eps);
    let rep = cfg.backend.solve(&prob, &SolveOptions::with_tol(cfg.solver_tol))?;
    if !rep.is_optimal() {
        return Err(solver_failure(&rep));
    }
    let x = rep.primal.as_ref().unwrap();
    Ok((LinearWeights { w: x[w..w + d].to_vec(), bias: bias.map(|b| x[b]) }, rep))
}

/// `Σ_j |βᵀẑ_j|` over the lifted rows.
pub fn decoupled_loss(lifted: &LiftedDataset, weights: &RawWeights) -> Result<f64> {
    let beta = weights.beta();
    if beta.len() != lifted.width() {
        return invalid(format!("β has {} components, lifted rows have {}", beta.len(), lifted.width()));
    }
    Ok((0..lifted.n()).map(|j| lifted.row(j).iter().zip(&beta).map(|(z, b)| z * b).sum::<f64>().abs()).sum())
}

/// `‖y − Σ_i D_i X (ν_i − ω_i) − b‖₁` evaluated in matrix form.
pub fn matrix_form_loss(view: &Dataset, pat: &ActivationPatterns, weights: &RawWeights) -> f64 {
    let mut resid: Vec<f64> = view.labels().iter().map(|y| y - weights.bias.unwrap_or(0.0)).collect();
    for i in 0..weights.p() {
        let u = weights.u(i);
        let xu: Vec<f64> = view.rows().map(|x| x.iter().zip(&u).map(|(a, b)| a * b).sum()).collect();
        for (j, r) in resid.iter_mut().enumerate() {
            if pat.get(j, i) {
                *r -= xu[j];
            }
        }
    }
    resid.iter().map(|r| r.abs()).sum()
}

fn penalty_value(program: &Program, v: &[f64]) -> f64 {
    let w = program.weight();
    match penalty_of(program) {
        Penalty::None => 0.0,
        Penalty::L1 => w * v.iter().map(|x| x.abs()).sum::<f64>(),
        Penalty::L2Squared => w * v.iter().map(|x| x * x).sum::<f64>(),
        Penalty::LInf => w * v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        Penalty::L2 => w * v.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

/// Program objective `(1/N) Σ |βᵀẑ_j| + penalty` recomputed from the lifted
/// rows, independently of any solver.
pub fn objective_oracle(dataset: &Dataset, s: &SamplingSet, weights: &RawWeights, cfg: &TrainConfig) -> Result<f64> {
    let view = training_view(dataset, cfg.with_bias);
    let lifted = LiftedDataset::new(&view, s, cfg.with_bias)?;
    let loss = decoupled_loss(&lifted, weights)? / dataset.n() as f64;
    Ok(loss + penalty_value(&cfg.program, &weights.trainable(cfg.penalize_bias)))
}

/// Value of the dual-norm penalty term alone (zero-weighted programs give 0).
pub fn penalty_norm(weights: &RawWeights, norm: NormKind, penalize_bias: bool) -> f64 {
    let v = weights.trainable(penalize_bias);
    match norm {
        NormKind::L1 => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

/// Largest violation of the cone constraints `(2D_i − I) X u ≥ 0` over both
/// weight families, as a nonnegative number.
pub fn cone_violation(view: &Dataset, pat: &ActivationPatterns, weights: &RawWeights) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..weights.p() {
        for (j, x) in view.rows().enumerate() {
            let sign = if pat.get(j, i) { 1.0 } else { -1.0 };
            for w in [&weights.nu[i], &weights.omega[i]] {
                let v: f64 = sign * x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
                worst = worst.max(-v);
            }
        }
    }
    worst
}

/// Training predictions in the dataset's label units.
pub fn training_predictions(view: &Dataset, pat: &ActivationPatterns, weights: &RawWeights) -> Vec<f64> {
    (0..view.n()).map(|j| weights.predict_with_gates(view.row(j), &pat.row(j))).collect()
}
