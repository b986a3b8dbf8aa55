//! Datasets, scaling, sampling vectors, activation patterns and lifted samples.
//!
//! Matrices are stored row-major in flat `Vec<f64>` buffers. The lifted layout
//! is column-major per sampling vector: block `i` of a lifted row holds
//! `x * d_i`, the ν blocks come first, then an identical copy for ω, then the
//! optional output-bias slot and finally the label.

use std::collections::HashSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Val,
    Test,
    Unsplit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    feature_names: Option<Vec<String>>,
    split: SplitTag,
}

impl Dataset {
    pub fn from_flat(n: usize, d: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return invalid("dataset must contain at least one sample");
        }
        if d == 0 {
            return invalid("dataset must have at least one feature");
        }
        if features.len() != n * d {
            return invalid(format!("feature buffer has {} entries, expected {}", features.len(), n * d));
        }
        if labels.len() != n {
            return invalid(format!("{} labels for {} samples", labels.len(), n));
        }
        if features.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return invalid("dataset contains non-finite entries");
        }
        Ok(Self { n, d, features, labels, feature_names: None, split: SplitTag::Unsplit })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return invalid("ragged feature rows");
        }
        let flat = rows.iter().flatten().copied().collect();
        Self::from_flat(rows.len(), d, flat, labels)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return invalid(format!("{} feature names for {} columns", names.len(), self.d));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.d)
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        if idx.iter().any(|&j| j >= self.n) {
            return invalid("subset index out of range");
        }
        let mut features = Vec::with_capacity(idx.len() * self.d);
        for &j in idx {
            features.extend_from_slice(self.row(j));
        }
        let labels = idx.iter().map(|&j| self.labels[j]).collect();
        let mut out = Self::from_flat(idx.len(), self.d, features, labels)?;
        out.feature_names = self.feature_names.clone();
        out.split = self.split;
        Ok(out)
    }

    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if other.d != self.d {
            return invalid("cannot concatenate datasets of different width");
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut out = Self::from_flat(self.n + other.n, self.d, features, labels)?;
        out.feature_names = self.feature_names.clone();
        out.split = self.split;
        Ok(out)
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.d {
            return invalid("row width mismatch");
        }
        if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return invalid("non-finite row");
        }
        self.features.extend_from_slice(x);
        self.labels.push(y);
        self.n += 1;
        Ok(())
    }

    /// Appends a trailing constant-one column (hidden-layer bias input).
    pub fn with_bias_column(&self) -> Self {
        let mut features = Vec::with_capacity(self.n * (self.d + 1));
        for r in self.rows() {
            features.extend_from_slice(r);
            features.push(1.0);
        }
        let names = self.feature_names.as_ref().map(|n| {
            let mut n = n.clone();
            n.push("bias".into());
            n
        });
        Self {
            n: self.n,
            d: self.d + 1,
            features,
            labels: self.labels.clone(),
            feature_names: names,
            split: self.split,
        }
    }

    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Self> {
        let mut out = Self::from_flat(self.n, self.d, self.features.clone(), labels)?;
        out.feature_names = self.feature_names.clone();
        out.split = self.split;
        Ok(out)
    }

    /// Reads a CSV with a header row; the last column is the label.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.len() < 2 {
            return invalid("csv needs at least one feature column and a label column");
        }
        let d = header.len() - 1;
        let names: Vec<String> = header.iter().take(d).map(str::to_string).collect();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != d + 1 {
                return invalid(format!("csv row {} has {} fields, expected {}", line + 2, rec.len(), d + 1));
            }
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("csv row {}: cannot parse {field:?}", line + 2)))?;
                if k < d {
                    features.push(v);
                } else {
                    labels.push(v);
                }
            }
        }
        Self::from_flat(labels.len(), d, features, labels)?.with_feature_names(names)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(file)
    }

    pub fn to_csv_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = match &self.feature_names {
            Some(n) => n.clone(),
            None => (0..self.d).map(|k| format!("x{k}")).collect(),
        };
        header.push("y".into());
        w.write_record(&header).map_err(csv_err)?;
        for (r, y) in self.rows().zip(&self.labels) {
            let mut rec: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{y:?}"));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingDistribution {
    /// Independent Gaussian coordinates with the given means and variances.
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
}

impl SamplingDistribution {
    pub fn standard(d: usize) -> Self {
        Self::Gaussian { mean: vec![0.0; d], var: vec![1.0; d] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingSet {
    vectors: Vec<f64>,
    p: usize,
    d: usize,
    pub seed: u64,
    pub distribution: SamplingDistribution,
    pub dedup_applied: bool,
}

impl SamplingSet {
    pub fn from_rows(rows: &[Vec<f64>], seed: u64, dedup_applied: bool) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.is_empty() || d == 0 {
            return invalid("sampling set needs at least one nonempty vector");
        }
        if rows.iter().any(|r| r.len() != d) {
            return invalid("ragged sampling vectors");
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("non-finite sampling vector");
        }
        Ok(Self {
            vectors: rows.iter().flatten().copied().collect(),
            p: rows.len(),
            d,
            seed,
            distribution: SamplingDistribution::standard(d),
            dedup_applied,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.d..(i + 1) * self.d]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.d)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.vectors().map(<[f64]>::to_vec).collect()
    }

    /// Activation bits of one input, `x·s_i >= 0`.
    pub fn gates(&self, x: &[f64]) -> Vec<bool> {
        self.vectors().map(|s| dot(x, s) >= 0.0).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws `count` standard Gaussian sampling vectors, optionally dropping
/// vectors whose activation column on `dataset` repeats an earlier one.
pub fn gen_sampling_vectors(dataset: &Dataset, count: usize, seed: u64, dedup: bool) -> Result<SamplingSet> {
    gen_sampling_vectors_with(dataset, count, seed, dedup, &SamplingDistribution::standard(dataset.d()))
}

pub fn gen_sampling_vectors_with(
    dataset: &Dataset,
    count: usize,
    seed: u64,
    dedup: bool,
    dist: &SamplingDistribution,
) -> Result<SamplingSet> {
    if count < 1 {
        return invalid("sampling vector count must be at least 1");
    }
    let d = dataset.d();
    let SamplingDistribution::Gaussian { mean, var } = dist;
    if mean.len() != d || var.len() != d || var.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return invalid("sampling distribution does not match the dataset width");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut vectors = Vec::with_capacity(count * d);
    let mut p = 0;
    for _ in 0..count {
        let s: Vec<f64> = (0..d)
            .map(|k| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean[k] + var[k].sqrt() * z
            })
            .collect();
        if dedup && !seen.insert(pattern_column(dataset, &s)) {
            continue;
        }
        vectors.extend_from_slice(&s);
        p += 1;
    }
    Ok(SamplingSet { vectors, p, d, seed, distribution: dist.clone(), dedup_applied: dedup })
}

/// Emulates exhaustive pattern enumeration: keeps drawing deduplicated vectors
/// until `stall` consecutive draws produce no new pattern or `cap` vectors are held.
pub fn gen_sampling_vectors_saturated(dataset: &Dataset, seed: u64, stall: usize, cap: usize) -> Result<SamplingSet> {
    if stall < 1 || cap < 1 {
        return invalid("stall and cap must be positive");
    }
    let d = dataset.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut vectors = Vec::new();
    let mut p = 0;
    let mut misses = 0;
    while misses < stall && p < cap {
        let s: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        if seen.insert(pattern_column(dataset, &s)) {
            vectors.extend_from_slice(&s);
            p += 1;
            misses = 0;
        } else {
            misses += 1;
        }
    }
    Ok(SamplingSet { vectors, p, d, seed, distribution: SamplingDistribution::standard(d), dedup_applied: true })
}

fn pattern_column(dataset: &Dataset, s: &[f64]) -> Vec<u64> {
    let mut col = vec![0u64; dataset.n().div_ceil(64)];
    for (j, x) in dataset.rows().enumerate() {
        if dot(x, s) >= 0.0 {
            col[j / 64] |= 1 << (j % 64);
        }
    }
    col
}

/// N×P activation bits packed row-wise into 64-bit words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivationPatterns {
    n: usize,
    p: usize,
    words: usize,
    bits: Vec<u64>,
}

impl ActivationPatterns {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, j: usize, i: usize) -> bool {
        self.bits[j * self.words + i / 64] >> (i % 64) & 1 == 1
    }

    pub fn row(&self, j: usize) -> Vec<bool> {
        (0..self.p).map(|i| self.get(j, i)).collect()
    }

    pub fn column(&self, i: usize) -> Vec<bool> {
        (0..self.n).map(|j| self.get(j, i)).collect()
    }

    pub fn packed_row(&self, j: usize) -> &[u64] {
        &self.bits[j * self.words..(j + 1) * self.words]
    }
}

pub fn compute_patterns(dataset: &Dataset, s: &SamplingSet) -> Result<ActivationPatterns> {
    if dataset.d() != s.d() {
        return invalid(format!("dataset has {} columns, sampling vectors have {}", dataset.d(), s.d()));
    }
    let words = s.p().div_ceil(64);
    let mut bits = vec![0u64; dataset.n() * words];
    for (j, x) in dataset.rows().enumerate() {
        for (i, si) in s.vectors().enumerate() {
            if dot(x, si) >= 0.0 {
                bits[j * words + i / 64] |= 1 << (i % 64);
            }
        }
    }
    Ok(ActivationPatterns { n: dataset.n(), p: s.p(), words, bits })
}

/// Width of a lifted row: two P·d blocks, optional bias slot, label.
pub fn lifted_width(p: usize, d: usize, with_bias: bool) -> usize {
    2 * p * d + usize::from(with_bias) + 1
}

pub fn lift_sample(x: &[f64], y: f64, s: &SamplingSet, with_bias: bool) -> Result<Vec<f64>> {
    if x.len() != s.d() {
        return invalid(format!("input has {} entries, sampling vectors have {}", x.len(), s.d()));
    }
    if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
        return invalid("non-finite input to lift_sample");
    }
    let gates = s.gates(x);
    Ok(lift_with_gates(x, y, &gates, with_bias))
}

pub(crate) fn lift_with_gates(x: &[f64], y: f64, gates: &[bool], with_bias: bool) -> Vec<f64> {
    let d = x.len();
    let pd = gates.len() * d;
    let mut out = vec![0.0; lifted_width(gates.len(), d, with_bias)];
    for (i, &g) in gates.iter().enumerate() {
        if g {
            out[i * d..(i + 1) * d].copy_from_slice(x);
            out[pd + i * d..pd + (i + 1) * d].copy_from_slice(x);
        }
    }
    if with_bias {
        out[2 * pd] = 1.0;
    }
    *out.last_mut().unwrap() = y;
    out
}

#[derive(Clone, Debug)]
pub struct LiftedDataset {
    rows: Vec<f64>,
    n: usize,
    width: usize,
    pub p: usize,
    pub d: usize,
    pub with_bias: bool,
    pub patterns: ActivationPatterns,
}

impl LiftedDataset {
    pub fn new(dataset: &Dataset, s: &SamplingSet, with_bias: bool) -> Result<Self> {
        let patterns = compute_patterns(dataset, s)?;
        let width = lifted_width(s.p(), s.d(), with_bias);
        let mut rows = Vec::with_capacity(dataset.n() * width);
        for (j, (x, &y)) in dataset.rows().zip(dataset.labels()).enumerate() {
            rows.extend(lift_with_gates(x, y, &patterns.row(j), with_bias));
        }
        Ok(Self { rows, n: dataset.n(), width, p: s.p(), d: s.d(), with_bias, patterns })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.width..(j + 1) * self.width]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    /// Feature means followed by the label mean.
    pub means: Vec<f64>,
    /// Feature stdevs followed by the label stdev; constant columns get 1.
    pub stdevs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleMode {
    FitTransform,
    Transform,
    Inverse,
}

impl ScalerState {
    pub fn fit(dataset: &Dataset) -> Self {
        let n = dataset.n() as f64;
        let d = dataset.d();
        let mut means = vec![0.0; d + 1];
        let mut stdevs = vec![0.0; d + 1];
        let col = |k: usize, j: usize| if k < d { dataset.row(j)[k] } else { dataset.labels()[j] };
        for k in 0..=d {
            let mean = (0..dataset.n()).map(|j| col(k, j)).sum::<f64>() / n;
            let var = (0..dataset.n()).map(|j| (col(k, j) - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            means[k] = mean;
            stdevs[k] = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
        }
        Self { means, stdevs }
    }

    pub fn d(&self) -> usize {
        self.means.len() - 1
    }

    pub fn transform_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(k, v)| (v - self.means[k]) / self.stdevs[k]).collect()
    }

    pub fn inverse_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(k, v)| v * self.stdevs[k] + self.means[k]).collect()
    }

    pub fn transform_y(&self, y: f64) -> f64 {
        let d = self.d();
        (y - self.means[d]) / self.stdevs[d]
    }

    pub fn inverse_y(&self, y: f64) -> f64 {
        let d = self.d();
        y * self.stdevs[d] + self.means[d]
    }

    pub fn label_stdev(&self) -> f64 {
        self.stdevs[self.d()]
    }

    fn apply(&self, dataset: &Dataset, forward: bool) -> Result<Dataset> {
        if self.d() != dataset.d() {
            return invalid(format!("scaler fitted on {} features, dataset has {}", self.d(), dataset.d()));
        }
        let mut features = Vec::with_capacity(dataset.features().len());
        for r in dataset.rows() {
            features.extend(if forward { self.transform_x(r) } else { self.inverse_x(r) });
        }
        let labels = dataset
            .labels()
            .iter()
            .map(|&y| if forward { self.transform_y(y) } else { self.inverse_y(y) })
            .collect();
        let mut out = Dataset::from_flat(dataset.n(), dataset.d(), features, labels)?;
        out.feature_names = dataset.feature_names.clone();
        out.split = dataset.split;
        Ok(out)
    }
}

pub fn standardize(dataset: &Dataset, state: Option<&ScalerState>, mode: ScaleMode) -> Result<(Dataset, ScalerState)> {
    match (mode, state) {
        (ScaleMode::FitTransform, _) => {
            let st = ScalerState::fit(dataset);
            Ok((st.apply(dataset, true)?, st))
        }
        (ScaleMode::Transform, Some(st)) => Ok((st.apply(dataset, true)?, st.clone())),
        (ScaleMode::Inverse, Some(st)) => Ok((st.apply(dataset, false)?, st.clone())),
        (_, None) => Err(Error::State("scaler has not been fitted".into())),
    }
}
