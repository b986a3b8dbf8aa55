//! Error metrics, constraint violation counts and column normalization.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::train::PhysicsConstraints;

/// Slack allowed before a prediction counts as violating a constraint.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub mae: f64,
    pub rmse: f64,
    pub violations: usize,
}

/// MAE, RMSE and the number of constraint rows broken by more than
/// [`VIOLATION_TOL`]. Constraints come with the features their linear rows
/// refer to.
pub fn metrics(y_true: &[f64], y_pred: &[f64], constraints: Option<(&PhysicsConstraints, &Dataset)>) -> Result<MetricsRow> {
    if y_true.len() != y_pred.len() {
        return invalid(format!("{} labels and {} predictions", y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return invalid("metrics need at least one sample");
    }
    let n = y_true.len() as f64;
    let mae = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let rmse = (y_true.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt();
    let violations = match constraints {
        Some((pc, ds)) => {
            pc.validate(y_pred.len(), ds.d())?;
            pc.violations(y_pred, ds, VIOLATION_TOL)
        }
        None => 0,
    };
    Ok(MetricsRow { mae, rmse, violations })
}

/// Min-max normalization of each column: the column minimum maps to 0 and
/// the maximum to 1. Constant columns map to 0.
pub fn normalize_columns(table: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = table.first().map_or(0, Vec::len);
    let mut out = table.to_vec();
    for c in 0..cols {
        let lo = table.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
        let hi = table.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
        for r in out.iter_mut() {
            r[c] = if hi > lo { (r[c] - lo) / (hi - lo) } else { 0.0 };
        }
    }
    out
}

/// Average ranks, ties sharing the mean of their positions (1-based).
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `NaN` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("spearman needs two equal-length samples of size at least 2");
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    Ok(cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        let m = metrics(&[0.0, 2.0], &[1.0, 1.0], None).unwrap();
        assert_eq!((m.mae, m.rmse, m.violations), (1.0, 1.0, 0));
        let m = metrics(&[1.0, 3.0], &[1.0, 3.0], None).unwrap();
        assert_eq!((m.mae, m.rmse), (0.0, 0.0));
        let ds = Dataset::from_rows(&[vec![0.0], vec![0.0]], vec![0.0, 0.0]).unwrap();
        let pc = PhysicsConstraints::nonnegative(2);
        assert_eq!(metrics(&[0.0, 3.0], &[-0.5, 3.0], Some((&pc, &ds))).unwrap().violations, 1);
        assert!(metrics(&[0.0], &[0.0, 1.0], None).is_err());
    }

    #[test]
    fn normalization_maps_extremes() {
        let t = normalize_columns(&[vec![1.0, 5.0], vec![3.0, 5.0], vec![2.0, 5.0]]);
        assert_eq!(t, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.0]]);
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 5.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).unwrap().is_nan());
    }
}
