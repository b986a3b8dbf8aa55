//! Train/validation/test splitting with label noise and injected outliers.
//! The test split is always left clean.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitTag};
use crate::error::{invalid, Error, Result};

use super::{generate_outliers, OutlierGenConfig, OutlierSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.6, val: 0.2, test: 0.2 }
    }
}

impl SplitRatios {
    fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !(*v >= 0.0)) || ((r.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return invalid("split ratios must be nonnegative and sum to 1");
        }
        let tr = (self.train * n as f64).round() as usize;
        let va = ((self.val * n as f64).round() as usize).min(n - tr);
        Ok((tr, va, n - tr - va))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSplits {
    pub train: bool,
    pub val: bool,
}

impl Default for NoiseSplits {
    fn default() -> Self {
        Self { train: true, val: true }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierSplit {
    /// `round(f·N_train)` outliers, all in the training split.
    #[default]
    TrainOnly,
    /// `round(f·(N_train + N_val))` outliers, each sent to training with
    /// probability `N_train/(N_train + N_val)` and to validation otherwise.
    TrainValRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub outlier_fraction: f64,
    /// Standard deviation of the Gaussian label noise, in label units.
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_splits: NoiseSplits,
    #[serde(default)]
    pub outlier_split: OutlierSplit,
    /// Generator settings; `m_bar` is replaced by the computed count.
    pub outliers: OutlierGenConfig,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return invalid(format!("outlier fraction {} outside [0, 1)", self.outlier_fraction));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return invalid("noise sigma must be finite and nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorruptedSplits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    /// Original row indices of the clean part of each split.
    pub train_index: Vec<usize>,
    pub val_index: Vec<usize>,
    pub test_index: Vec<usize>,
    pub outliers: OutlierSet,
    pub train_outliers: usize,
    pub val_outliers: usize,
}

fn add_noise(ds: &Dataset, sigma: f64, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    if sigma == 0.0 {
        return Ok(ds.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let labels = ds.labels().iter().map(|y| y + normal.sample(rng)).collect();
    ds.with_labels(labels)
}

pub fn corrupt_and_split(data: &Dataset, corr: &CorruptionSpec, ratios: SplitRatios) -> Result<CorruptedSplits> {
    corr.validate()?;
    let n = data.n();
    let (ntr, nva, _) = ratios.sizes(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(corr.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let train_index = order[..ntr].to_vec();
    let val_index = order[ntr..ntr + nva].to_vec();
    let test_index = order[ntr + nva..].to_vec();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(corr.seed);
    noise_rng.set_stream(1);
    let mut train = data.subset(&train_index)?;
    let mut val = data.subset(&val_index)?;
    let test = data.subset(&test_index)?.with_split(SplitTag::Test);
    if corr.noise_splits.train {
        train = add_noise(&train, corr.noise_sigma, &mut noise_rng)?;
    }
    if corr.noise_splits.val {
        val = add_noise(&val, corr.noise_sigma, &mut noise_rng)?;
    }
    let (count, base) = match corr.outlier_split {
        OutlierSplit::TrainOnly => ((corr.outlier_fraction * ntr as f64).round() as usize, train.clone()),
        OutlierSplit::TrainValRandom => ((corr.outlier_fraction * (ntr + nva) as f64).round() as usize, train.concat(&val)?),
    };
    let outliers = if count == 0 {
        OutlierSet { points: Vec::new(), audit: Vec::new() }
    } else {
        generate_outliers(&base, &OutlierGenConfig { m_bar: count, ..corr.outliers.clone() })?
    };
    let mut assign_rng = ChaCha8Rng::seed_from_u64(corr.seed);
    assign_rng.set_stream(2);
    let p_train = ntr as f64 / (ntr + nva).max(1) as f64;
    let d = data.d();
    let (mut train_outliers, mut val_outliers) = (0, 0);
    for z in &outliers.points {
        let to_train = match corr.outlier_split {
            OutlierSplit::TrainOnly => true,
            OutlierSplit::TrainValRandom => assign_rng.random_bool(p_train),
        };
        if to_train {
            train.push(&z[..d], z[d])?;
            train_outliers += 1;
        } else {
            val.push(&z[..d], z[d])?;
            val_outliers += 1;
        }
    }
    Ok(CorruptedSplits {
        train: train.with_split(SplitTag::Train),
        val: val.with_split(SplitTag::Val),
        test,
        train_index,
        val_index,
        test_index,
        outliers,
        train_outliers,
        val_outliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robustness::PhiSchedule;

    fn data(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let labels = (0..n).map(|i| (i % 5) as f64).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    fn spec(fraction: f64, sigma: f64, split: OutlierSplit) -> CorruptionSpec {
        CorruptionSpec {
            outlier_fraction: fraction,
            noise_sigma: sigma,
            noise_splits: NoiseSplits::default(),
            outlier_split: split,
            outliers: OutlierGenConfig::new(0, PhiSchedule::Constant(1e-9), 5),
            seed: 11,
        }
    }

    #[test]
    fn clean_partition_without_corruption() {
        let ds = data(50);
        let out = corrupt_and_split(&ds, &spec(0.0, 0.0, OutlierSplit::TrainOnly), SplitRatios::default()).unwrap();
        assert_eq!((out.train.n(), out.val.n(), out.test.n()), (30, 10, 10));
        assert_eq!(out.train, ds.subset(&out.train_index).unwrap().with_split(SplitTag::Train));
        let mut all: Vec<usize> = out.train_index.iter().chain(&out.val_index).chain(&out.test_index).copied().collect();
        all.sort();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn train_val_outlier_accounting() {
        let ds = data(100);
        let out = corrupt_and_split(&ds, &spec(0.1, 0.3, OutlierSplit::TrainValRandom), SplitRatios::default()).unwrap();
        assert_eq!(out.train_outliers + out.val_outliers, 8);
        assert_eq!(out.train.n() + out.val.n() + out.test.n(), 108);
        assert_eq!(out.test, ds.subset(&out.test_index).unwrap().with_split(SplitTag::Test));
    }

    #[test]
    fn bad_ratios_are_rejected() {
        let r = SplitRatios { train: 0.5, val: 0.2, test: 0.2 };
        assert!(corrupt_and_split(&data(10), &spec(0.0, 0.0, OutlierSplit::TrainOnly), r).is_err());
        assert!(spec(1.0, 0.0, OutlierSplit::TrainOnly).validate().is_err());
    }
}
