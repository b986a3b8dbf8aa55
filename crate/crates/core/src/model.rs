//! Trained-model artifacts: SCNN-form prediction with the stored sampling
//! vectors, export to an equivalent two-layer ReLU network, and versioned
//! canonical JSON files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conic::{SolveReport, SolveStatus};
use crate::data::{gen_sampling_vectors, standardize, Dataset, SamplingDistribution, SamplingSet, ScaleMode, ScalerState};
use crate::error::{invalid, Error, Result};
use crate::train::{train, train_wadiro_linreg, training_view, LinearWeights, Program, RawWeights, TrainConfig};

pub const SCHEMA_VERSION: u64 = 1;
pub const ZERO_BLOCK_THRESHOLD: f64 = 1e-9;

/// Solver outcome kept in provenance; non-finite numbers are stored as null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: SolveStatus,
    pub objective_value: Option<f64>,
    pub primal_residual: Option<f64>,
    pub dual_residual: Option<f64>,
    pub gap: Option<f64>,
    pub iterations: usize,
    pub wall_time: Option<f64>,
}

impl From<&SolveReport> for SolveSummary {
    fn from(r: &SolveReport) -> Self {
        let f = |v: f64| v.is_finite().then_some(v);
        Self {
            status: r.status,
            objective_value: f(r.objective_value),
            primal_residual: f(r.primal_residual),
            dual_residual: f(r.dual_residual),
            gap: f(r.gap),
            iterations: r.iterations,
            wall_time: f(r.wall_time),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: TrainConfig,
    pub solve: SolveSummary,
    pub p_effective: usize,
    /// Penalty domain: the fixed label coefficient is never penalized.
    pub penalty_convention: String,
    pub zero_block_threshold: f64,
    pub standardized_training: bool,
}

impl Provenance {
    pub fn new(config: &TrainConfig, report: &SolveReport, p_effective: usize) -> Self {
        let convention = if config.penalize_bias { "trainable_with_bias" } else { "trainable_without_bias" };
        Self {
            config: config.clone(),
            solve: report.into(),
            p_effective,
            penalty_convention: convention.into(),
            zero_block_threshold: ZERO_BLOCK_THRESHOLD,
            standardized_training: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScnnModel {
    pub raw: RawWeights,
    pub sampling: SamplingSet,
    pub scaler: ScalerState,
    pub with_bias: bool,
    pub provenance: Provenance,
    pub schema_version: u64,
}

impl ScnnModel {
    pub fn new(raw: RawWeights, sampling: SamplingSet, scaler: ScalerState, with_bias: bool, provenance: Provenance) -> Result<Self> {
        let de = scaler.d() + usize::from(with_bias);
        if sampling.d() != de || raw.d() != de || raw.p() != sampling.p() || raw.bias.is_some() != with_bias {
            return invalid("model parts disagree on dimensions");
        }
        Ok(Self { raw, sampling, scaler, with_bias, provenance, schema_version: SCHEMA_VERSION })
    }

    /// Number of original input features.
    pub fn d(&self) -> usize {
        self.scaler.d()
    }

    pub fn p(&self) -> usize {
        self.sampling.p()
    }

    /// Standardized input, bias-augmented when the model uses a bias.
    pub fn network_input(&self, x_std: &[f64]) -> Vec<f64> {
        let mut v = x_std.to_vec();
        if self.with_bias {
            v.push(1.0);
        }
        v
    }

    /// Prediction in standardized units for a standardized input.
    pub fn predict_standardized(&self, x_std: &[f64]) -> f64 {
        let xa = self.network_input(x_std);
        self.raw.predict_with_gates(&xa, &self.sampling.gates(&xa))
    }

    /// Functional form of [`predict`] without the argument checks.
    pub fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.scaler.inverse_y(self.predict_standardized(&self.scaler.transform_x(x)))
    }
}

/// `ŷ = Σ_i 1(x̃ᵀs_i ≥ 0) x̃ᵀ(ν_i − ω_i) (+ b)` in original units.
pub fn predict(model: &ScnnModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.d() {
        return invalid(format!("input has {} features, model expects {}", x.len(), model.d()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("non-finite input");
    }
    Ok(model.predict_unchecked(x))
}

/// Two-layer ReLU network equivalent to a trained SCNN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnnWeights {
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<f64>,
    /// Output bias, when the source model has one.
    pub output_bias: Option<f64>,
    /// Whether inputs are extended with a constant 1 before the first layer.
    pub input_bias: bool,
}

impl SnnWeights {
    pub fn m(&self) -> usize {
        self.w2.len()
    }
}

/// Maps each nonzero `ν_i` to `(ν_i/√‖ν_i‖, √‖ν_i‖)` and each nonzero
/// `ω_i` to `(ω_i/√‖ω_i‖, −√‖ω_i‖)`.
pub fn map_to_snn(model: &ScnnModel) -> SnnWeights {
    let mut w1 = Vec::new();
    let mut w2 = Vec::new();
    for (block, sign) in [(&model.raw.nu, 1.0), (&model.raw.omega, -1.0)] {
        for v in block.iter() {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > ZERO_BLOCK_THRESHOLD {
                let r = norm.sqrt();
                w1.push(v.iter().map(|x| x / r).collect());
                w2.push(sign * r);
            }
        }
    }
    SnnWeights { w1, w2, output_bias: model.raw.bias, input_bias: model.with_bias }
}

/// `Σ_i max(x̃ᵀW1_i, 0)·w2_i (+ b)` for a standardized input.
pub fn predict_snn(weights: &SnnWeights, x_std: &[f64]) -> f64 {
    let mut y = weights.output_bias.unwrap_or(0.0);
    for (row, &w) in weights.w1.iter().zip(&weights.w2) {
        let mut pre: f64 = row.iter().zip(x_std).map(|(a, b)| a * b).sum();
        if weights.input_bias {
            pre += row[row.len() - 1];
        }
        y += pre.max(0.0) * w;
    }
    y
}

/// Fraction of standardized inputs where some nonzero block's ReLU gate
/// disagrees with its sampling-vector gate.
pub fn gate_disagreement(model: &ScnnModel, inputs_std: &[Vec<f64>]) -> f64 {
    if inputs_std.is_empty() {
        return 0.0;
    }
    let bad = inputs_std
        .iter()
        .filter(|x| {
            let xa = model.network_input(x);
            let gates = model.sampling.gates(&xa);
            (0..model.p()).any(|i| {
                [&model.raw.nu[i], &model.raw.omega[i]].iter().any(|w| {
                    let pre: f64 = w.iter().zip(&xa).map(|(a, b)| a * b).sum();
                    let on = if gates[i] { pre } else { 0.0 };
                    (on - pre.max(0.0)).abs() > 1e-9
                })
            })
        })
        .count();
    bad as f64 / inputs_std.len() as f64
}

#[derive(Serialize, Deserialize)]
struct SamplingFile {
    vectors: Vec<Vec<f64>>,
    seed: u64,
    distribution: SamplingDistribution,
    dedup_applied: bool,
}

/// On-disk layout. `nu[i]`/`omega[i]` are the per-gate blocks, so the flat
/// column-major `vec(ν)` is their concatenation.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u64,
    d: usize,
    #[serde(rename = "P")]
    p: usize,
    with_bias: bool,
    nu: Vec<Vec<f64>>,
    omega: Vec<Vec<f64>>,
    bias: Option<f64>,
    sampling_vectors: SamplingFile,
    scaler: ScalerState,
    provenance: Provenance,
}

pub fn to_json(model: &ScnnModel) -> String {
    let file = ModelFile {
        schema_version: model.schema_version,
        d: model.d(),
        p: model.p(),
        with_bias: model.with_bias,
        nu: model.raw.nu.clone(),
        omega: model.raw.omega.clone(),
        bias: model.raw.bias,
        sampling_vectors: SamplingFile {
            vectors: model.sampling.to_rows(),
            seed: model.sampling.seed,
            distribution: model.sampling.distribution.clone(),
            dedup_applied: model.sampling.dedup_applied,
        },
        scaler: model.scaler.clone(),
        provenance: model.provenance.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn from_json(text: &str) -> Result<ScnnModel> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse { offset: byte_offset(text, e.line(), e.column()), message: e.to_string() })?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Parse { offset: 0, message: "missing schema_version".into() })?;
    if version > SCHEMA_VERSION || version == 0 {
        return Err(Error::Version { found: version, supported: SCHEMA_VERSION });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::Parse { offset: 0, message: format!("model fields: {e}") })?;
    let mut sampling = SamplingSet::from_rows(&file.sampling_vectors.vectors, file.sampling_vectors.seed, file.sampling_vectors.dedup_applied)?;
    sampling.distribution = file.sampling_vectors.distribution;
    if sampling.p() != file.p || file.scaler.means.len() != file.d + 1 || file.scaler.stdevs.len() != file.d + 1 {
        return invalid("model file dimensions are inconsistent");
    }
    if file.scaler.stdevs.iter().any(|s| !(*s > 0.0)) {
        return invalid("model file has a nonpositive scaler stdev");
    }
    let raw = RawWeights { nu: file.nu, omega: file.omega, bias: file.bias };
    let mut model = ScnnModel::new(raw, sampling, file.scaler, file.with_bias, file.provenance)?;
    model.schema_version = version;
    Ok(model)
}

pub fn save(model: &ScnnModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ScnnModel> {
    let text = std::fs::read_to_string(path)?;
    from_json(&text)
}

/// Standardizes, draws deduplicated sampling vectors, compiles physics
/// constraints stated in original units and trains. Constraint limits are
/// tightened by half of `violation_tol` (original units) so that the
/// returned model meets them after inverse scaling.
pub fn fit_scnn(dataset: &Dataset, cfg: &TrainConfig, violation_tol: f64) -> Result<ScnnModel> {
    let (std_ds, scaler) = standardize(dataset, None, ScaleMode::FitTransform)?;
    let view = training_view(&std_ds, cfg.with_bias);
    let sampling = gen_sampling_vectors(&view, cfg.max_neurons, cfg.seed, true)?;
    fit_scnn_with(dataset, &std_ds, scaler, sampling, cfg, violation_tol)
}

pub fn fit_scnn_with(
    original: &Dataset,
    std_ds: &Dataset,
    scaler: ScalerState,
    sampling: SamplingSet,
    cfg: &TrainConfig,
    violation_tol: f64,
) -> Result<ScnnModel> {
    let mut train_cfg = cfg.clone();
    if let Some(pc) = &cfg.physics {
        pc.validate(original.n(), original.d())?;
        let margin = 0.5 * violation_tol / scaler.label_stdev();
        train_cfg.physics = Some(pc.standardized(&scaler, original).tightened(margin));
    }
    let (raw, rep) = train(std_ds, &sampling, &train_cfg)?;
    let prov = Provenance::new(cfg, &rep.summary(), sampling.p());
    ScnnModel::new(raw, sampling, scaler, cfg.with_bias, prov)
}

/// WaDiRo linear regression on standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: LinearWeights,
    pub scaler: ScalerState,
    pub provenance: Provenance,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.scaler.inverse_y(self.weights.predict(&self.scaler.transform_x(x)))
    }
}

pub fn fit_linear(dataset: &Dataset, cfg: &TrainConfig, violation_tol: f64) -> Result<LinearModel> {
    if !matches!(cfg.program, Program::WadiroLinreg { .. }) {
        return invalid("fit_linear needs a wadiro_linreg program");
    }
    let (std_ds, scaler) = standardize(dataset, None, ScaleMode::FitTransform)?;
    let mut train_cfg = cfg.clone();
    if let Some(pc) = &cfg.physics {
        pc.validate(dataset.n(), dataset.d())?;
        let margin = 0.5 * violation_tol / scaler.label_stdev();
        train_cfg.physics = Some(pc.standardized(&scaler, dataset).tightened(margin));
    }
    let (weights, rep) = train_wadiro_linreg(&std_ds, &train_cfg)?;
    Ok(LinearModel { weights, scaler, provenance: Provenance::new(cfg, &rep.summary(), 0) })
}
