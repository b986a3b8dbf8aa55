//! Non-convex benchmark functions and uniform sampling over their domains.

use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkFn {
    Mccormick,
    Pgp,
    Keane,
    Ackley,
}

impl BenchmarkFn {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Mccormick => "mccormick",
            Self::Pgp => "pgp",
            Self::Keane => "keane",
            Self::Ackley => "ackley",
        }
    }

    pub fn all() -> [Self; 4] {
        [Self::Mccormick, Self::Pgp, Self::Keane, Self::Ackley]
    }

    pub fn default_dim(&self) -> usize {
        match self {
            Self::Mccormick | Self::Pgp => 2,
            Self::Keane | Self::Ackley => 4,
        }
    }

    /// Per-coordinate sampling box.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Mccormick => (-3.0, 4.0),
            Self::Pgp => (-2.0, 2.0),
            Self::Keane => (0.0, 10.0),
            Self::Ackley => (-32.768, 32.768),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub function: BenchmarkFn,
    pub dim: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl BenchmarkSpec {
    pub fn new(function: BenchmarkFn, n_samples: usize, seed: u64) -> Self {
        Self { function, dim: function.default_dim(), n_samples, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.function {
            BenchmarkFn::Mccormick | BenchmarkFn::Pgp if self.dim != 2 => {
                invalid(format!("{} is defined in two dimensions, got {}", self.function.name(), self.dim))
            }
            _ if self.dim < 2 => invalid("benchmark dimension must be at least 2"),
            _ => Ok(()),
        }
    }

    /// One uniform draw from the domain.
    pub fn draw(&self, rng: &mut impl Rng) -> Result<Vec<f64>> {
        self.validate()?;
        let (lo, hi) = self.function.bounds();
        Ok((0..self.dim).map(|_| rng.random_range(lo..=hi)).collect())
    }
}

fn goldstein_price(a: f64, b: f64) -> f64 {
    let t1 = 1.0 + (a + b + 1.0).powi(2) * (19.0 - 14.0 * a + 3.0 * a * a - 14.0 * b + 6.0 * a * b + 3.0 * b * b);
    let t2 = 30.0 + (2.0 * a - 3.0 * b).powi(2) * (18.0 - 32.0 * a + 12.0 * a * a + 48.0 * b - 36.0 * a * b + 27.0 * b * b);
    t1 * t2
}

pub fn benchmark_eval(spec: &BenchmarkSpec, x: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != spec.dim {
        return invalid(format!("point has {} coordinates, benchmark expects {}", x.len(), spec.dim));
    }
    let (lo, hi) = spec.function.bounds();
    let slack = 1e-9 * (hi - lo);
    if x.iter().any(|v| !(*v >= lo - slack && *v <= hi + slack)) {
        return invalid(format!("point outside the {} domain [{lo}, {hi}]", spec.function.name()));
    }
    let n = x.len() as f64;
    Ok(match spec.function {
        BenchmarkFn::Mccormick => {
            let (a, b) = (x[0], x[1]);
            (a + b).sin() + (a - b).powi(2) - 1.5 * a + 2.5 * b + 1.0
        }
        BenchmarkFn::Pgp => ((goldstein_price(4.0 * x[0] - 2.0, 4.0 * x[1] - 2.0)).ln() - 8.693) / 2.427,
        BenchmarkFn::Ackley => {
            let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
            let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
            -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
        }
        BenchmarkFn::Keane => {
            let den = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum::<f64>().sqrt();
            if den == 0.0 {
                return Ok(0.0);
            }
            let s4: f64 = x.iter().map(|v| v.cos().powi(4)).sum();
            let p2: f64 = x.iter().map(|v| v.cos().powi(2)).product();
            -(s4 - 2.0 * p2).abs() / den
        }
    })
}

/// `n_samples` uniform draws with their benchmark labels.
pub fn sample_benchmark(spec: &BenchmarkSpec) -> Result<Dataset> {
    spec.validate()?;
    if spec.n_samples == 0 {
        return invalid("at least one sample is required");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(spec.n_samples);
    let mut labels = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let x = spec.draw(&mut rng)?;
        labels.push(benchmark_eval(spec, &x)?);
        rows.push(x);
    }
    let names = (1..=spec.dim).map(|i| format!("x{i}")).collect();
    Dataset::from_rows(&rows, labels)?.with_feature_names(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let ack = BenchmarkSpec::new(BenchmarkFn::Ackley, 1, 0);
        assert!(benchmark_eval(&ack, &[0.0; 4]).unwrap().abs() < 1e-12);
        let mc = BenchmarkSpec::new(BenchmarkFn::Mccormick, 1, 0);
        assert_eq!(benchmark_eval(&mc, &[0.0, 0.0]).unwrap(), 1.0);
        let pgp = BenchmarkSpec::new(BenchmarkFn::Pgp, 1, 0);
        assert!((benchmark_eval(&pgp, &[0.5, 0.25]).unwrap() - (3f64.ln() - 8.693) / 2.427).abs() < 1e-12);
        assert!(benchmark_eval(&mc, &[5.0, 0.0]).is_err());
        assert!(BenchmarkSpec { dim: 3, ..mc }.validate().is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let spec = BenchmarkSpec::new(BenchmarkFn::Keane, 20, 4);
        assert_eq!(sample_benchmark(&spec).unwrap(), sample_benchmark(&spec).unwrap());
        let one = sample_benchmark(&BenchmarkSpec { n_samples: 1, ..spec.clone() }).unwrap();
        assert_eq!(one.labels()[0], benchmark_eval(&spec, one.row(0)).unwrap());
    }
}
