//! Sliced-Wasserstein distances, shift-filtered outlier generation,
//! benchmark functions and dataset corruption.

pub mod benchmarks;
pub mod corruption;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};

pub use benchmarks::{benchmark_eval, sample_benchmark, BenchmarkFn, BenchmarkSpec};
pub use corruption::{corrupt_and_split, CorruptedSplits, CorruptionSpec, NoiseSplits, OutlierSplit, SplitRatios};

/// Order-1 Wasserstein distance between two equal-weight samples on the line.
pub fn w1_1d(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return invalid(format!("sample sizes differ: {} vs {}", u.len(), v.len()));
    }
    if u.is_empty() {
        return Ok(0.0);
    }
    let mut a = u.to_vec();
    let mut b = v.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// `l` directions drawn uniformly on the unit sphere in `k` dimensions.
pub fn sw_projections(k: usize, l: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..l)
        .map(|_| loop {
            let g: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break g.into_iter().map(|v| v / norm).collect();
            }
        })
        .collect()
}

fn project(points: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    points.iter().map(|p| p.iter().zip(theta).map(|(a, b)| a * b).sum()).collect()
}

fn check_points(u: &[Vec<f64>], v: &[Vec<f64>]) -> Result<usize> {
    if u.len() != v.len() {
        return invalid(format!("sample counts differ: {} vs {}", u.len(), v.len()));
    }
    let k = u.first().map_or(0, Vec::len);
    if u.iter().chain(v).any(|p| p.len() != k) {
        return invalid("samples have inconsistent dimensions");
    }
    Ok(k)
}

/// Mean of `w1_1d` over the given projection directions.
pub fn sw_with_projections(u: &[Vec<f64>], v: &[Vec<f64>], thetas: &[Vec<f64>]) -> Result<f64> {
    let k = check_points(u, v)?;
    if thetas.is_empty() || thetas.iter().any(|t| t.len() != k) {
        return invalid("projection directions must be nonempty and match the sample dimension");
    }
    let mut total = 0.0;
    for t in thetas {
        total += w1_1d(&project(u, t), &project(v, t))?;
    }
    Ok(total / thetas.len() as f64)
}

/// Monte Carlo sliced Wasserstein distance of order 1 with `l` seeded projections.
pub fn sw_distance(u: &[Vec<f64>], v: &[Vec<f64>], l: usize, seed: u64) -> Result<f64> {
    if l == 0 {
        return invalid("at least one projection is required");
    }
    let k = check_points(u, v)?;
    sw_with_projections(u, v, &sw_projections(k, l, seed))
}

/// Threshold `φ_m` applied to the m-th outlier (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PhiSchedule {
    Constant(f64),
    /// `φ_m = v/(N + m)`: the per-point displacement needed once the shift
    /// is diluted over the `N + m` samples of each distribution.
    PerPoint(f64),
}

impl PhiSchedule {
    pub fn at(&self, n: usize, m: usize) -> f64 {
        match *self {
            Self::Constant(v) => v,
            Self::PerPoint(v) => v / (n + m) as f64,
        }
    }

    fn base(&self) -> f64 {
        match *self {
            Self::Constant(v) | Self::PerPoint(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    /// Uniform over the data's bounding box, scaled about its centre.
    UniformBox { multiplier: f64 },
    /// Each coordinate at `μ_k + σ_k(g + sign(g)·scale)` with `g` standard normal.
    GaussianTail { scale: f64 },
}

impl Default for Proposal {
    fn default() -> Self {
        Self::UniformBox { multiplier: 1.5 }
    }
}

/// Where the extra inlier that equalizes sample counts comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InlierSource {
    /// Duplicate a uniformly chosen base sample.
    #[default]
    Resample,
    /// Fresh draw from the benchmark that generated the base data.
    Benchmark { spec: BenchmarkSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierGenConfig {
    #[serde(default)]
    pub m_bar: usize,
    pub phi: PhiSchedule,
    /// Number of projection directions.
    #[serde(default = "default_projections")]
    pub l: usize,
    #[serde(default)]
    pub proposal: Proposal,
    #[serde(default)]
    pub inlier: InlierSource,
    /// Consecutive rejections allowed for one outlier.
    #[serde(default = "default_max_rejects")]
    pub max_rejects: usize,
    pub seed: u64,
    /// When false every proposal is accepted and only audited.
    #[serde(default = "yes")]
    pub enforce_threshold: bool,
}

fn yes() -> bool {
    true
}

fn default_projections() -> usize {
    50
}

fn default_max_rejects() -> usize {
    1000
}

impl OutlierGenConfig {
    pub fn new(m_bar: usize, phi: PhiSchedule, seed: u64) -> Self {
        Self {
            m_bar,
            phi,
            l: default_projections(),
            proposal: Proposal::default(),
            inlier: InlierSource::default(),
            max_rejects: default_max_rejects(),
            seed,
            enforce_threshold: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi.base() > 0.0) || !self.phi.base().is_finite() {
            return invalid("phi must be positive and finite");
        }
        if self.l == 0 {
            return invalid("at least one projection is required");
        }
        match self.proposal {
            Proposal::UniformBox { multiplier } if !(multiplier > 0.0) => invalid("box multiplier must be positive"),
            Proposal::GaussianTail { scale } if !(scale >= 0.0) => invalid("tail scale must be nonnegative"),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierAudit {
    /// Achieved sliced-Wasserstein shift.
    pub shift: f64,
    pub phi: f64,
    /// Proposals drawn for this outlier, the accepted one included.
    pub proposals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierSet {
    /// `[x..., y]` rows.
    pub points: Vec<Vec<f64>>,
    pub audit: Vec<OutlierAudit>,
}

impl OutlierSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_dataset(&self, d: usize) -> Result<Dataset> {
        let rows: Vec<Vec<f64>> = self.points.iter().map(|p| p[..d].to_vec()).collect();
        let labels = self.points.iter().map(|p| p[d]).collect();
        if rows.is_empty() {
            return Dataset::from_flat(0, d, Vec::new(), Vec::new());
        }
        Dataset::from_rows(&rows, labels)
    }
}

/// Samples as `[x..., y]` rows.
pub fn sample_points(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.rows()
        .zip(ds.labels())
        .map(|(x, &y)| {
            let mut p = x.to_vec();
            p.push(y);
            p
        })
        .collect()
}

struct Proposer {
    proposal: Proposal,
    lo: Vec<f64>,
    hi: Vec<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Proposer {
    fn new(points: &[Vec<f64>], proposal: Proposal) -> Self {
        let k = points[0].len();
        let n = points.len() as f64;
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        let mut mean = vec![0.0; k];
        for p in points {
            for j in 0..k {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
                mean[j] += p[j] / n;
            }
        }
        let sd = (0..k)
            .map(|j| {
                let var = points.iter().map(|p| (p[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 { var.sqrt() } else { 1.0 }
            })
            .collect();
        Self { proposal, lo, hi, mean, sd }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self.proposal {
            Proposal::UniformBox { multiplier } => (0..self.lo.len())
                .map(|j| {
                    let c = 0.5 * (self.lo[j] + self.hi[j]);
                    let h = 0.5 * (self.hi[j] - self.lo[j]) * multiplier;
                    if h > 0.0 { rng.random_range(c - h..=c + h) } else { c }
                })
                .collect(),
            Proposal::GaussianTail { scale } => (0..self.lo.len())
                .map(|j| {
                    let g: f64 = rng.sample(StandardNormal);
                    self.mean[j] + self.sd[j] * (g + g.signum() * scale)
                })
                .collect(),
        }
    }
}

fn draw_inlier(points: &[Vec<f64>], source: &InlierSource, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    match source {
        InlierSource::Resample => Ok(points[rng.random_range(0..points.len())].clone()),
        InlierSource::Benchmark { spec } => {
            let x = spec.draw(rng)?;
            let y = benchmark_eval(spec, &x)?;
            let mut p = x;
            p.push(y);
            Ok(p)
        }
    }
}

/// Draws outliers one at a time. A proposal `z̃` is kept when
/// `SW(P̂_{N+1} ∪ O, P̂_N ∪ O ∪ {z̃}) ≥ φ_m`, where the extra inlier of
/// `P̂_{N+1}` comes from `cfg.inlier`.
pub fn generate_outliers(base: &Dataset, cfg: &OutlierGenConfig) -> Result<OutlierSet> {
    cfg.validate()?;
    if base.n() == 0 {
        return invalid("base dataset is empty");
    }
    let points = sample_points(base);
    if let InlierSource::Benchmark { spec } = &cfg.inlier {
        if spec.dim != base.d() {
            return invalid("benchmark inlier source disagrees with the base dimension");
        }
    }
    let k = base.d() + 1;
    let thetas = sw_projections(k, cfg.l, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let proposer = Proposer::new(&points, cfg.proposal);
    let n = points.len();
    let mut left = points.clone();
    let mut right = points.clone();
    let mut out = OutlierSet { points: Vec::new(), audit: Vec::new() };
    for m in 1..=cfg.m_bar {
        let phi = cfg.phi.at(n, m);
        let mut proposals = 0;
        loop {
            if proposals > cfg.max_rejects {
                return Err(Error::Partial {
                    message: format!("outlier {m} of {} rejected {} times", cfg.m_bar, cfg.max_rejects),
                    payload: Box::new(out),
                });
            }
            proposals += 1;
            let inlier = draw_inlier(&points, &cfg.inlier, &mut rng)?;
            let cand = proposer.draw(&mut rng);
            left.push(inlier);
            right.push(cand.clone());
            let shift = sw_with_projections(&left, &right, &thetas)?;
            left.pop();
            right.pop();
            if shift >= phi || !cfg.enforce_threshold {
                left.push(cand.clone());
                right.push(cand.clone());
                out.points.push(cand);
                out.audit.push(OutlierAudit { shift, phi, proposals });
                break;
            }
        }
    }
    Ok(out)
}
