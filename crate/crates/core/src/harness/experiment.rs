//! End-to-end experiment pipeline: sample, corrupt, split, search, test,
//! optional stability grid, and artifact output.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::Clock;
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::guarantees::{certify_stability, CertifyDomain, CertifyMode, CertifyOptions, Units};
use crate::model::{self, fit_scnn};
use crate::robustness::{
    corrupt_and_split, sample_benchmark, BenchmarkFn, BenchmarkSpec, CorruptedSplits, CorruptionSpec, InlierSource,
    NoiseSplits, OutlierGenConfig, OutlierSplit, PhiSchedule, Proposal, SplitRatios,
};
use crate::train::{Program, TrainConfig};

use super::load::{synthetic_load, LoadSpec};
use super::metrics::{normalize_columns, spearman, MetricsRow, VIOLATION_TOL};
use super::search::{evaluate, random_search, EvalConstraint, Family, FittedModel, ModelTemplate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Benchmark { spec: BenchmarkSpec },
    Csv { path: PathBuf },
    SyntheticLoad { spec: LoadSpec },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Benchmark { spec } => sample_benchmark(spec),
            DataSource::Csv { path } => Dataset::read_csv(path),
            DataSource::SyntheticLoad { spec } => synthetic_load(spec),
        }
    }
}

/// Corruption contexts: outlier share and placement, with label noise on
/// training and validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Context {
    A,
    B,
    C,
}

impl Context {
    /// Label noise standard deviation as a share of the label spread.
    pub const NOISE_SHARE: f64 = 0.1;
    /// Per-point mean projected displacement demanded of an outlier, as a
    /// share of the root-mean-square column spread.
    pub const SHIFT_SHARE: f64 = 0.1;

    pub fn fraction(&self) -> f64 {
        match self {
            Context::A | Context::C => 0.4,
            Context::B => 0.1,
        }
    }

    pub fn outlier_split(&self) -> OutlierSplit {
        match self {
            Context::A => OutlierSplit::TrainOnly,
            Context::B | Context::C => OutlierSplit::TrainValRandom,
        }
    }

    /// Corruption spec scaled to `data`; benchmark data draws fresh inliers
    /// from the benchmark when auditing shifts.
    pub fn spec(&self, data: &Dataset, benchmark: Option<&BenchmarkSpec>, seed: u64) -> CorruptionSpec {
        let sd = |v: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = v.collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let y_sd = sd(&mut data.labels().iter().copied());
        let mut ms = y_sd * y_sd;
        for k in 0..data.d() {
            ms += sd(&mut data.rows().map(|r| r[k])).powi(2);
        }
        let rms = (ms / (data.d() + 1) as f64).sqrt();
        let mut outliers = OutlierGenConfig::new(0, PhiSchedule::PerPoint(Self::SHIFT_SHARE * rms), seed);
        outliers.proposal = Proposal::UniformBox { multiplier: 1.5 };
        if let Some(b) = benchmark {
            outliers.inlier = InlierSource::Benchmark { spec: b.clone() };
        }
        CorruptionSpec {
            outlier_fraction: self.fraction(),
            noise_sigma: Self::NOISE_SHARE * y_sd,
            noise_splits: NoiseSplits { train: true, val: true },
            outlier_split: self.outlier_split(),
            outliers,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Corruption {
    #[default]
    None,
    Preset {
        context: Context,
    },
    Custom {
        spec: CorruptionSpec,
    },
}

/// Neurons × weight grid trained on the training split and certified on the
/// standardized bounding box of the training features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityGrid {
    pub family: Family,
    pub neurons: Vec<usize>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub with_bias: bool,
    /// Perturbation radius in standardized units.
    pub eps: f64,
    #[serde(default)]
    pub mode: CertifyMode,
    #[serde(default = "StabilityGrid::default_max_nodes")]
    pub max_nodes: usize,
}

impl StabilityGrid {
    fn default_max_nodes() -> usize {
        CertifyOptions::default().max_nodes
    }
}

fn default_trials() -> usize {
    40
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub corruption: Corruption,
    #[serde(default)]
    pub ratios: SplitRatios,
    #[serde(default)]
    pub models: Vec<ModelTemplate>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    /// Constraint family counted as violations in every split.
    #[serde(default)]
    pub constraint: Option<EvalConstraint>,
    #[serde(default)]
    pub stability: Option<StabilityGrid>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() && self.stability.is_none() {
            return invalid("an experiment needs models, a stability grid, or both");
        }
        if !self.models.is_empty() && self.trials == 0 {
            return invalid("trials must be at least 1");
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return invalid("model template names must be unique");
        }
        if names.iter().any(|n| n.is_empty() || n.contains(['/', '\\'])) {
            return invalid("model names must be nonempty and contain no path separators");
        }
        for m in &self.models {
            m.validate()?;
        }
        if let Some(g) = &self.stability {
            if matches!(g.family, Family::WadiroLinreg { .. }) {
                return invalid("the stability grid needs a neural family");
            }
            if g.neurons.is_empty() || g.weights.is_empty() || g.neurons.contains(&0) {
                return invalid("the stability grid needs positive neuron counts and at least one weight");
            }
            if !(g.eps >= 0.0 && g.eps.is_finite()) || g.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                return invalid("grid radius and weights must be finite and nonnegative");
            }
        }
        Ok(())
    }

    /// Resolves a relative CSV path against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let DataSource::Csv { path } = &mut self.data {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(dir) = &mut self.output_dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub train_outliers: usize,
    pub val_outliers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub trial: usize,
    pub config: TrainConfig,
    pub p_effective: usize,
    pub train: MetricsRow,
    pub val: MetricsRow,
    pub test: MetricsRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub model: String,
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub neurons: usize,
    pub weight: f64,
    pub p_effective: usize,
    pub test_mae: f64,
    /// Certified bound in standardized label units.
    pub l_eps: f64,
    pub l_eps_original: f64,
    pub bound_gap: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub seed: u64,
    pub n_samples: usize,
    pub splits: SplitSizes,
    /// FNV-1a digest of the test rows.
    pub test_fingerprint: String,
    /// Clean training or validation rows bit-identical to a test row.
    pub duplicate_test_rows: usize,
    pub models: Vec<ModelReport>,
    /// Test MAE and RMSE min-max normalized across models.
    pub normalized: Vec<NormalizedRow>,
    pub failed_trials: usize,
    pub grid: Vec<GridCell>,
    /// Rank correlation between grid weight and certified bound.
    pub grid_spearman: Option<f64>,
    /// Wall times are kept out of the serialized report so reruns match.
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

fn fnv(bytes: impl Iterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn row_print(x: &[f64], y: f64) -> u64 {
    fnv(x.iter().chain(std::iter::once(&y)).flat_map(|v| v.to_bits().to_le_bytes()), FNV_OFFSET)
}

fn dataset_print(ds: &Dataset) -> u64 {
    ds.rows().zip(ds.labels()).fold(FNV_OFFSET, |h, (x, y)| fnv(row_print(x, *y).to_le_bytes().into_iter(), h))
}

/// Checks that the test split is exactly the held-out clean rows and
/// counts clean train/val rows that coincide with a test row.
fn leakage_check(data: &Dataset, cs: &CorruptedSplits) -> Result<usize> {
    let test_set: std::collections::HashSet<usize> = cs.test_index.iter().copied().collect();
    if cs.train_index.iter().chain(&cs.val_index).any(|i| test_set.contains(i)) {
        return Err(Error::State("a test row index also appears in training or validation".into()));
    }
    let held = data.subset(&cs.test_index)?;
    if held.features() != cs.test.features() || held.labels() != cs.test.labels() {
        return Err(Error::State("the test split differs from the held-out clean rows".into()));
    }
    let prints: std::collections::HashSet<u64> = cs.test.rows().zip(cs.test.labels()).map(|(x, y)| row_print(x, *y)).collect();
    Ok(cs
        .train_index
        .iter()
        .chain(&cs.val_index)
        .filter(|&&i| prints.contains(&row_print(data.row(i), data.labels()[i])))
        .count())
}

struct Artifacts {
    dir: Option<PathBuf>,
    files: Vec<String>,
}

impl Artifacts {
    fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d.join("models"))?;
        }
        Ok(Self { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        if let Some(d) = &self.dir {
            fs::write(d.join(name), contents)?;
            self.files.push(name.to_string());
        }
        Ok(())
    }

    fn manifest(&mut self, error: Option<&Error>) -> Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let m = serde_json::json!({
            "status": if error.is_some() { "partial" } else { "complete" },
            "error": error.map(|e| e.to_string()),
            "files": self.files,
        });
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::State(e.to_string()))?;
        self.write("manifest.json", text.as_bytes())
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::State(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::State(e.to_string()))
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    serde_json::to_vec_pretty(v).map_err(|e| Error::State(e.to_string()))
}

/// Heatmap with neuron counts down the rows and weights across the columns.
fn heatmap(grid: &[GridCell], g: &StabilityGrid, value: impl Fn(&GridCell) -> f64) -> Result<Vec<u8>> {
    let mut header = vec!["neurons".to_string()];
    header.extend(g.weights.iter().map(|w| w.to_string()));
    let rows = g.neurons.iter().enumerate().map(|(i, n)| {
        let mut r = vec![n.to_string()];
        r.extend((0..g.weights.len()).map(|j| value(&grid[i * g.weights.len() + j]).to_string()));
        r
    });
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_bytes(&h, rows)
}

fn run_grid(g: &StabilityGrid, cs: &CorruptedSplits, seed: u64) -> Result<Vec<GridCell>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(g.neurons.len() * g.weights.len());
    for &neurons in &g.neurons {
        for &weight in &g.weights {
            let mut cfg = TrainConfig::new(g.family.program(weight, &mut rng));
            cfg.max_neurons = neurons;
            cfg.with_bias = g.with_bias;
            cfg.seed = seed;
            let m = fit_scnn(&cs.train, &cfg, VIOLATION_TOL)?;
            let test_mae = evaluate(&FittedModel::Scnn(m.clone()), &cs.test, None)?.mae;
            let std_rows: Vec<Vec<f64>> = cs.train.rows().map(|x| m.scaler.transform_x(x)).collect();
            let d = m.d();
            let lo = (0..d).map(|k| std_rows.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min)).collect();
            let hi = (0..d).map(|k| std_rows.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
            let domain = CertifyDomain { lo, hi, eps: g.eps };
            let opts = CertifyOptions { mode: g.mode, units: Units::Standardized, max_nodes: g.max_nodes, ..Default::default() };
            let cert = certify_stability(&m, &domain, &opts)?;
            cells.push(GridCell {
                neurons,
                weight,
                p_effective: m.p(),
                test_mae,
                l_eps: cert.l_eps,
                l_eps_original: cert.l_eps_original,
                bound_gap: cert.bound_gap,
                nodes: cert.nodes_explored,
            });
        }
    }
    Ok(cells)
}

fn corruption_spec(cfg: &ExperimentConfig, data: &Dataset) -> CorruptionSpec {
    match &cfg.corruption {
        Corruption::None => CorruptionSpec {
            outlier_fraction: 0.0,
            noise_sigma: 0.0,
            noise_splits: NoiseSplits::default(),
            outlier_split: OutlierSplit::TrainOnly,
            outliers: OutlierGenConfig::new(0, PhiSchedule::Constant(0.0), cfg.seed),
            seed: cfg.seed,
        },
        Corruption::Preset { context } => {
            let bench = match &cfg.data {
                DataSource::Benchmark { spec } => Some(spec),
                _ => None,
            };
            context.spec(data, bench, cfg.seed)
        }
        Corruption::Custom { spec } => spec.clone(),
    }
}

fn pipeline(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<MetricsReport> {
    cfg.validate()?;
    let mut timings = Vec::new();
    let clock = Clock::start();
    let data = cfg.data.load()?;
    let cs = corrupt_and_split(&data, &corruption_spec(cfg, &data), cfg.ratios)?;
    let duplicate_test_rows = leakage_check(&data, &cs)?;
    timings.push(Timing { stage: "prepare".into(), seconds: clock.elapsed() });

    let (mut models, mut failed_trials) = (Vec::new(), 0);
    if !cfg.models.is_empty() {
        let clock = Clock::start();
        let mut log = Vec::new();
        let search = random_search(&cs.train, &cs.val, &cfg.models, cfg.trials, cfg.seed, cfg.constraint, Some(&mut log as &mut dyn std::io::Write));
        art.write("trials.jsonl", &log)?;
        let search = search?;
        failed_trials = search.log.iter().filter(|r| r.error.is_some()).count();
        timings.push(Timing { stage: "search".into(), seconds: clock.elapsed() });
        for b in &search.best {
            let clock = Clock::start();
            let train = evaluate(&b.model, &cs.train, cfg.constraint)?;
            let test = evaluate(&b.model, &cs.test, cfg.constraint)?;
            timings.push(Timing { stage: format!("test:{}", b.template), seconds: clock.elapsed() });
            let text = match &b.model {
                FittedModel::Scnn(m) => model::to_json(m),
                FittedModel::Linear(m) => serde_json::to_string_pretty(m).map_err(|e| Error::State(e.to_string()))?,
            };
            art.write(&format!("models/{}.json", b.template), text.as_bytes())?;
            models.push(ModelReport {
                name: b.template.clone(),
                trial: b.trial,
                config: b.config.clone(),
                p_effective: b.model.p_effective(),
                train,
                val: b.val,
                test,
            });
        }
    }
    let table: Vec<Vec<f64>> = models.iter().map(|m| vec![m.test.mae, m.test.rmse]).collect();
    let normalized = models
        .iter()
        .zip(normalize_columns(&table))
        .map(|(m, r)| NormalizedRow { model: m.name.clone(), mae: r[0], rmse: r[1] })
        .collect();

    let mut grid = Vec::new();
    let mut grid_spearman = None;
    if let Some(g) = &cfg.stability {
        let clock = Clock::start();
        grid = run_grid(g, &cs, cfg.seed)?;
        timings.push(Timing { stage: "stability_grid".into(), seconds: clock.elapsed() });
        if grid.len() >= 2 {
            let w: Vec<f64> = grid.iter().map(|c| c.weight).collect();
            let l: Vec<f64> = grid.iter().map(|c| c.l_eps).collect();
            grid_spearman = Some(spearman(&w, &l)?);
        }
    }

    let report = MetricsReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        n_samples: data.n(),
        splits: SplitSizes {
            train: cs.train.n(),
            val: cs.val.n(),
            test: cs.test.n(),
            train_outliers: cs.train_outliers,
            val_outliers: cs.val_outliers,
        },
        test_fingerprint: format!("{:016x}", dataset_print(&cs.test)),
        duplicate_test_rows,
        models,
        normalized,
        failed_trials,
        grid,
        grid_spearman,
        timings,
    };
    write_outputs(&report, cfg, art)?;
    Ok(report)
}

fn write_outputs(r: &MetricsReport, cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    if art.dir.is_none() {
        return Ok(());
    }
    art.write("report.json", &json_bytes(r)?)?;
    let metric_rows = r.models.iter().flat_map(|m| {
        [("train", m.train), ("val", m.val), ("test", m.test)].map(|(s, v)| {
            vec![m.name.clone(), s.to_string(), v.mae.to_string(), v.rmse.to_string(), v.violations.to_string()]
        })
    });
    art.write("metrics.csv", &csv_bytes(&["model", "split", "mae", "rmse", "violations"], metric_rows)?)?;
    let norm_rows = r.normalized.iter().map(|n| vec![n.model.clone(), n.mae.to_string(), n.rmse.to_string()]);
    art.write("normalized.csv", &csv_bytes(&["model", "mae", "rmse"], norm_rows)?)?;
    let time_rows = r.timings.iter().map(|t| vec![t.stage.clone(), t.seconds.to_string()]);
    art.write("timings.csv", &csv_bytes(&["stage", "seconds"], time_rows)?)?;
    if let Some(g) = &cfg.stability {
        let rows = r.grid.iter().map(|c| {
            vec![
                c.neurons.to_string(),
                c.weight.to_string(),
                c.p_effective.to_string(),
                c.test_mae.to_string(),
                c.l_eps.to_string(),
                c.l_eps_original.to_string(),
                c.bound_gap.to_string(),
                c.nodes.to_string(),
            ]
        });
        let header = ["neurons", "weight", "p_effective", "test_mae", "l_eps", "l_eps_original", "bound_gap", "nodes"];
        art.write("grid.csv", &csv_bytes(&header, rows)?)?;
        art.write("heatmap_test_mae.csv", &heatmap(&r.grid, g, |c| c.test_mae)?)?;
        art.write("heatmap_l_eps.csv", &heatmap(&r.grid, g, |c| c.l_eps)?)?;
    }
    Ok(())
}

/// Runs the full pipeline. With an output directory, artifacts are written
/// as they become available and a manifest records completion or the
/// error that stopped the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let mut art = Artifacts::new(cfg.output_dir.clone())?;
    let out = pipeline(cfg, &mut art);
    art.manifest(out.as_ref().err())?;
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingPoint {
    pub n: usize,
    pub neurons: usize,
    pub p_effective: usize,
    pub seconds: f64,
    pub status: String,
}

/// Training wall time over (N, neurons) on Ackley samples of dimension `d`.
pub fn timing_curve(ns: &[usize], neurons: &[usize], d: usize, program: Program, seed: u64) -> Result<Vec<TimingPoint>> {
    let mut out = Vec::new();
    for &n in ns {
        let data = sample_benchmark(&BenchmarkSpec { function: BenchmarkFn::Ackley, dim: d, n_samples: n, seed })?;
        for &p in neurons {
            let mut cfg = TrainConfig::new(program);
            cfg.max_neurons = p;
            cfg.seed = seed;
            let clock = Clock::start();
            let m = fit_scnn(&data, &cfg, VIOLATION_TOL)?;
            out.push(TimingPoint {
                n,
                neurons: p,
                p_effective: m.p(),
                seconds: clock.elapsed(),
                status: m.provenance.solve.status.to_string(),
            });
        }
    }
    Ok(out)
}

pub fn timing_csv(points: &[TimingPoint]) -> Result<String> {
    let rows = points.iter().map(|t| {
        vec![t.n.to_string(), t.neurons.to_string(), t.p_effective.to_string(), t.seconds.to_string(), t.status.clone()]
    });
    let bytes = csv_bytes(&["n", "neurons", "p_effective", "seconds", "status"], rows)?;
    String::from_utf8(bytes).map_err(|e| Error::State(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::NormKind;

    fn small(seed: u64) -> ExperimentConfig {
        let tpl = ModelTemplate { weights: (1e-4, 1.0), ..ModelTemplate::new("linreg", Family::WadiroLinreg { norm: Some(NormKind::L1) }) };
        ExperimentConfig {
            name: "t".into(),
            data: DataSource::Benchmark { spec: BenchmarkSpec::new(BenchmarkFn::Mccormick, 60, seed) },
            corruption: Corruption::Preset { context: Context::A },
            ratios: SplitRatios::default(),
            models: vec![tpl],
            trials: 3,
            seed,
            constraint: None,
            stability: None,
            output_dir: None,
        }
    }

    #[test]
    fn context_a_accounting() {
        let r = run_experiment(&small(2)).unwrap();
        assert_eq!((r.splits.train_outliers, r.splits.val_outliers), (14, 0));
        assert_eq!(r.splits.train, 36 + 14);
        assert_eq!(r.models.len(), 1);
        assert_eq!(r.normalized[0].mae, 0.0);
    }

    #[test]
    fn rerun_report_is_identical() {
        let a = serde_json::to_string(&run_experiment(&small(5)).unwrap()).unwrap();
        let b = serde_json::to_string(&run_experiment(&small(5)).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs() {
        let mut c = small(1);
        c.models.clear();
        assert!(run_experiment(&c).is_err());
        let mut c = small(1);
        c.models.push(c.models[0].clone());
        assert!(c.validate().is_err());
    }
}
