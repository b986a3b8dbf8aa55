//! Seeded random hyperparameter search with validation-MAE selection.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::model::{fit_linear, fit_scnn, LinearModel, ScnnModel};
use crate::train::{NormKind, PhysicsConstraints, Program, TrainConfig};

use super::metrics::{metrics, MetricsRow, VIOLATION_TOL};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "WADIRO_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    Lasso,
    Ridge,
}

/// Model family; `None` choices are drawn per trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    WadiroScnn {
        #[serde(default)]
        norm: Option<NormKind>,
    },
    RegularizedScnn {
        #[serde(default)]
        regularizer: Option<Regularizer>,
    },
    Scnn,
    WadiroLinreg {
        #[serde(default)]
        norm: Option<NormKind>,
    },
}

impl Family {
    fn has_neurons(&self) -> bool {
        !matches!(self, Family::WadiroLinreg { .. })
    }

    /// Program for a given weight, drawing any open choice from `rng`.
    pub fn program(&self, weight: f64, rng: &mut impl Rng) -> Program {
        let norm = |n: Option<NormKind>, rng: &mut dyn rand::RngCore| {
            n.unwrap_or_else(|| if rng.random_bool(0.5) { NormKind::L1 } else { NormKind::L2 })
        };
        match *self {
            Family::WadiroScnn { norm: n } => match norm(n, rng) {
                NormKind::L1 => Program::WadiroL1 { eps: weight },
                NormKind::L2 => Program::WadiroL2 { eps: weight },
            },
            Family::RegularizedScnn { regularizer } => {
                let r = regularizer.unwrap_or_else(|| if rng.random_bool(0.5) { Regularizer::Lasso } else { Regularizer::Ridge });
                match r {
                    Regularizer::Lasso => Program::ScnnLasso { lambda: weight },
                    Regularizer::Ridge => Program::ScnnRidge { lambda: weight },
                }
            }
            Family::Scnn => Program::ScnnL1,
            Family::WadiroLinreg { norm: n } => Program::WadiroLinreg { eps: weight, norm: norm(n, rng) },
        }
    }
}

/// Constraint set counted as violations during evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalConstraint {
    Nonnegative,
}

impl EvalConstraint {
    pub fn for_len(&self, n: usize) -> PhysicsConstraints {
        match self {
            EvalConstraint::Nonnegative => PhysicsConstraints::nonnegative(n),
        }
    }
}

fn default_neurons() -> (usize, usize) {
    (10, 300)
}

fn default_weights() -> (f64, f64) {
    ((-8f64).exp(), 1f64.exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelTemplate {
    pub name: String,
    pub family: Family,
    /// Inclusive range for `max_neurons`.
    #[serde(default = "default_neurons")]
    pub neurons: (usize, usize),
    /// Log-uniform range for ε or λ.
    #[serde(default = "default_weights")]
    pub weights: (f64, f64),
    #[serde(default)]
    pub with_bias: bool,
    /// Train with nonnegative predictions enforced on the training split.
    #[serde(default)]
    pub nonnegative: bool,
}

impl ModelTemplate {
    pub fn new(name: impl Into<String>, family: Family) -> Self {
        Self { name: name.into(), family, neurons: default_neurons(), weights: default_weights(), with_bias: false, nonnegative: false }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.neurons;
        if self.family.has_neurons() && (a < 1 || a > b) {
            return invalid(format!("{}: neuron range must satisfy 1 <= min <= max", self.name));
        }
        let (w0, w1) = self.weights;
        if !(w0 > 0.0 && w0 <= w1 && w1.is_finite()) {
            return invalid(format!("{}: weight range must satisfy 0 < min <= max", self.name));
        }
        Ok(())
    }

    /// Trial configurations drawn i.i.d. from the template's ranges. Trial
    /// `k` reads its own stream `k` of `seed`, so templates sharing ranges
    /// are compared at matched draws.
    pub fn draw(&self, trials: usize, seed: u64) -> Vec<TrainConfig> {
        let (l0, l1) = (self.weights.0.ln(), self.weights.1.ln());
        (0..trials)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let weight = if l1 > l0 { rng.random_range(l0..=l1).exp() } else { self.weights.0 };
                let max_neurons = rng.random_range(self.neurons.0..=self.neurons.1.max(self.neurons.0));
                let mut cfg = TrainConfig::new(self.family.program(weight, &mut rng));
                cfg.max_neurons = max_neurons;
                cfg.with_bias = self.with_bias;
                cfg.seed = seed;
                cfg
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedModel {
    Scnn(ScnnModel),
    Linear(LinearModel),
}

impl FittedModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::Scnn(m) => m.predict_unchecked(x),
            FittedModel::Linear(m) => m.predict(x),
        }
    }

    pub fn predict_all(&self, ds: &Dataset) -> Vec<f64> {
        ds.rows().map(|x| self.predict(x)).collect()
    }

    pub fn p_effective(&self) -> usize {
        match self {
            FittedModel::Scnn(m) => m.p(),
            FittedModel::Linear(_) => 0,
        }
    }
}

/// Fits `cfg` on `train`, enforcing nonnegativity when asked.
pub fn fit_model(train: &Dataset, cfg: &TrainConfig, nonnegative: bool) -> Result<FittedModel> {
    let mut cfg = cfg.clone();
    if nonnegative {
        cfg.physics = Some(PhysicsConstraints::nonnegative(train.n()));
    }
    match cfg.program {
        Program::WadiroLinreg { .. } => fit_linear(train, &cfg, VIOLATION_TOL).map(FittedModel::Linear),
        _ => fit_scnn(train, &cfg, VIOLATION_TOL).map(FittedModel::Scnn),
    }
}

/// Metrics of a fitted model on one split.
pub fn evaluate(model: &FittedModel, ds: &Dataset, constraint: Option<EvalConstraint>) -> Result<MetricsRow> {
    let pred = model.predict_all(ds);
    let pc = constraint.map(|c| c.for_len(ds.n()));
    metrics(ds.labels(), &pred, pc.as_ref().map(|p| (p, ds)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub model: String,
    pub config: TrainConfig,
    pub p_effective: Option<usize>,
    pub train: Option<MetricsRow>,
    pub val: Option<MetricsRow>,
    pub solve_status: Option<String>,
    pub iterations: Option<usize>,
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestModel {
    pub template: String,
    pub trial: usize,
    pub config: TrainConfig,
    pub val: MetricsRow,
    pub model: FittedModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    /// Best trial per template, in template order; templates whose trials
    /// all failed are absent.
    pub best: Vec<BestModel>,
    pub log: Vec<TrialRecord>,
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

fn run_trial(
    train: &Dataset,
    val: &Dataset,
    tpl: &ModelTemplate,
    cfg: &TrainConfig,
    trial: usize,
    constraint: Option<EvalConstraint>,
) -> (TrialRecord, Option<FittedModel>) {
    let clock = crate::conic::Clock::start();
    let mut rec = TrialRecord {
        trial,
        model: tpl.name.clone(),
        config: cfg.clone(),
        p_effective: None,
        train: None,
        val: None,
        solve_status: None,
        iterations: None,
        wall_time: 0.0,
        error: None,
    };
    let result = fit_model(train, cfg, tpl.nonnegative).and_then(|m| {
        let tr = evaluate(&m, train, constraint)?;
        let va = evaluate(&m, val, constraint)?;
        Ok((m, tr, va))
    });
    rec.wall_time = clock.elapsed();
    match result {
        Ok((m, tr, va)) => {
            let solve = match &m {
                FittedModel::Scnn(s) => &s.provenance.solve,
                FittedModel::Linear(l) => &l.provenance.solve,
            };
            rec.solve_status = Some(solve.status.to_string());
            rec.iterations = Some(solve.iterations);
            rec.p_effective = Some(m.p_effective());
            rec.train = Some(tr);
            rec.val = Some(va);
            (rec, Some(m))
        }
        Err(e) => {
            rec.error = Some(e.to_string());
            (rec, None)
        }
    }
}

/// Runs `trials` draws per template, selecting the lowest validation MAE
/// (earliest trial on ties). Every trial is logged, and also written as a
/// JSON line to `log_sink` when given.
pub fn random_search(
    train: &Dataset,
    val: &Dataset,
    templates: &[ModelTemplate],
    trials: usize,
    seed: u64,
    constraint: Option<EvalConstraint>,
    mut log_sink: Option<&mut dyn Write>,
) -> Result<SearchOutcome> {
    if trials == 0 {
        return invalid("at least one trial is required");
    }
    if templates.is_empty() {
        return invalid("at least one model template is required");
    }
    for t in templates {
        t.validate()?;
    }
    let jobs: Vec<(usize, usize, TrainConfig)> = templates
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| t.draw(trials, seed).into_iter().enumerate().map(move |(k, c)| (ti, k, c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    let results: Vec<(TrialRecord, Option<FittedModel>)> = pool.install(|| {
        jobs.par_iter().map(|(ti, k, cfg)| run_trial(train, val, &templates[*ti], cfg, *k, constraint)).collect()
    });
    let mut best: Vec<Option<BestModel>> = vec![None; templates.len()];
    let mut log = Vec::with_capacity(results.len());
    for ((ti, _, _), (rec, model)) in jobs.iter().zip(results) {
        if let Some(sink) = log_sink.as_mut() {
            let line = serde_json::to_string(&rec).map_err(|e| Error::State(e.to_string()))?;
            writeln!(sink, "{line}")?;
        }
        if let (Some(m), Some(va)) = (model, rec.val) {
            if best[*ti].as_ref().is_none_or(|b| va.mae < b.val.mae) {
                best[*ti] = Some(BestModel { template: rec.model.clone(), trial: rec.trial, config: rec.config.clone(), val: va, model: m });
            }
        }
        log.push(rec);
    }
    let best: Vec<BestModel> = best.into_iter().flatten().collect();
    if best.is_empty() {
        return Err(Error::Solver {
            status: "all_trials_failed".into(),
            message: format!("all {} trials failed; first error: {}", log.len(), log[0].error.clone().unwrap_or_default()),
        });
    }
    Ok(SearchOutcome { best, log })
}
