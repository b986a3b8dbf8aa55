//! Hard linear constraints on training predictions: per-sample bounds,
//! ramping limits between consecutive samples and general rows mixing
//! prediction history with feature history.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ScalerState};
use crate::error::{invalid, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstraints {
    /// Per-sample `(l_j, u_j)`; `None` on a side means unbounded.
    #[serde(default)]
    pub bounds: Option<Vec<(Option<f64>, Option<f64>)>>,
    /// `r_j` bounding `|ŷ_j − ŷ_{j−1}|` for `j = 1..N`; the entry for sample 0 is ignored.
    #[serde(default)]
    pub ramping: Option<Vec<f64>>,
    #[serde(default)]
    pub linear_rows: Vec<LinearRow>,
}

/// `lower ≤ Σ γ_i ŷ_i + Σ η_ik x_ik ≤ upper`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    /// `(sample index, γ)`.
    pub y_terms: Vec<(usize, f64)>,
    /// `(sample index, feature index, η)`, evaluated on the training features.
    #[serde(default)]
    pub x_terms: Vec<(usize, usize, f64)>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// One compiled row `lower ≤ Σ coef·ŷ_i ≤ upper`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct PredRow {
    pub terms: Vec<(usize, f64)>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl PhysicsConstraints {
    pub fn nonnegative(n: usize) -> Self {
        Self { bounds: Some(vec![(Some(0.0), None); n]), ..Self::default() }
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        if let Some(b) = &self.bounds {
            if b.len() != n {
                return invalid(format!("{} bound pairs for {} samples", b.len(), n));
            }
            for (l, u) in b {
                if let (Some(l), Some(u)) = (l, u) {
                    if l > u {
                        return invalid("lower bound exceeds upper bound");
                    }
                }
                if l.is_some_and(|v| !v.is_finite()) || u.is_some_and(|v| !v.is_finite()) {
                    return invalid("non-finite bound");
                }
            }
        }
        if let Some(r) = &self.ramping {
            if r.len() != n {
                return invalid(format!("{} ramping limits for {} samples", r.len(), n));
            }
            if r.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return invalid("ramping limits must be finite and nonnegative");
            }
        }
        for row in &self.linear_rows {
            if row.y_terms.iter().any(|&(i, _)| i >= n) || row.x_terms.iter().any(|&(i, k, _)| i >= n || k >= d) {
                return invalid("linear row references an unknown sample or feature");
            }
            if let (Some(l), Some(u)) = (row.lower, row.upper) {
                if l > u {
                    return invalid("linear row lower limit exceeds upper limit");
                }
            }
        }
        Ok(())
    }

    pub(crate) fn compile(&self, features: &Dataset) -> Vec<PredRow> {
        let mut out = Vec::new();
        if let Some(b) = &self.bounds {
            for (j, &(l, u)) in b.iter().enumerate() {
                if l.is_some() || u.is_some() {
                    out.push(PredRow { terms: vec![(j, 1.0)], lower: l, upper: u });
                }
            }
        }
        if let Some(r) = &self.ramping {
            for j in 1..r.len() {
                out.push(PredRow { terms: vec![(j, 1.0), (j - 1, -1.0)], lower: Some(-r[j]), upper: Some(r[j]) });
            }
        }
        for row in &self.linear_rows {
            let shift: f64 = row.x_terms.iter().map(|&(i, k, eta)| eta * features.row(i)[k]).sum();
            out.push(PredRow {
                terms: row.y_terms.clone(),
                lower: row.lower.map(|v| v - shift),
                upper: row.upper.map(|v| v - shift),
            });
        }
        out
    }

    /// Number of compiled rows violated by more than `tol`.
    pub fn violations(&self, preds: &[f64], features: &Dataset, tol: f64) -> usize {
        self.compile(features)
            .iter()
            .filter(|row| {
                let v: f64 = row.terms.iter().map(|&(i, c)| c * preds[i]).sum();
                row.lower.is_some_and(|l| v < l - tol) || row.upper.is_some_and(|u| v > u + tol)
            })
            .count()
    }

    /// Re-expresses constraints stated in original units in the standardized
    /// label units used during training. Feature terms are folded into the
    /// limits using the original-unit features.
    pub fn standardized(&self, scaler: &ScalerState, original: &Dataset) -> Self {
        let (mu, sd) = (scaler.means[scaler.d()], scaler.label_stdev());
        let bounds = self
            .bounds
            .as_ref()
            .map(|b| b.iter().map(|&(l, u)| (l.map(|v| (v - mu) / sd), u.map(|v| (v - mu) / sd))).collect());
        let ramping = self.ramping.as_ref().map(|r| r.iter().map(|v| v / sd).collect());
        let linear_rows = self
            .linear_rows
            .iter()
            .map(|row| {
                let shift: f64 = row.x_terms.iter().map(|&(i, k, eta)| eta * original.row(i)[k]).sum::<f64>()
                    + mu * row.y_terms.iter().map(|t| t.1).sum::<f64>();
                LinearRow {
                    y_terms: row.y_terms.iter().map(|&(i, g)| (i, g * sd)).collect(),
                    x_terms: Vec::new(),
                    lower: row.lower.map(|v| v - shift),
                    upper: row.upper.map(|v| v - shift),
                }
            })
            .collect();
        Self { bounds, ramping, linear_rows }
    }

    /// Tightens every limit by `margin` so that round-off on the way back to
    /// original units cannot push a prediction past the stated limit.
    pub fn tightened(&self, margin: f64) -> Self {
        let bounds = self.bounds.as_ref().map(|b| b.iter().map(|&(l, u)| tighten(l, u, margin)).collect());
        let ramping = self.ramping.as_ref().map(|r| r.iter().map(|v| (v - margin).max(0.0)).collect());
        let linear_rows = self
            .linear_rows
            .iter()
            .map(|row| {
                let (lower, upper) = tighten(row.lower, row.upper, margin);
                LinearRow { lower, upper, ..row.clone() }
            })
            .collect();
        Self { bounds, ramping, linear_rows }
    }
}

fn tighten(l: Option<f64>, u: Option<f64>, m: f64) -> (Option<f64>, Option<f64>) {
    match (l, u) {
        (Some(l), Some(u)) if u - l < 2.0 * m => {
            let mid = 0.5 * (l + u);
            (Some(mid), Some(mid))
        }
        _ => (l.map(|v| v + m), u.map(|v| v - m)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds() -> Dataset {
        Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![0.0, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn nonnegativity_counts_negative_predictions() {
        let pc = PhysicsConstraints::nonnegative(2);
        let two = Dataset::from_rows(&[vec![0.0], vec![0.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(pc.violations(&[-0.5, 3.0], &two, 1e-6), 1);
        assert_eq!(pc.violations(&[0.0, 3.0], &two, 1e-6), 0);
    }

    #[test]
    fn ramping_and_linear_rows_compile() {
        let pc = PhysicsConstraints {
            ramping: Some(vec![0.0, 0.5, 0.5]),
            linear_rows: vec![LinearRow {
                y_terms: vec![(2, 1.0), (1, -0.5)],
                x_terms: vec![(0, 0, 2.0)],
                lower: Some(0.0),
                upper: Some(4.0),
            }],
            ..Default::default()
        };
        pc.validate(3, 1).unwrap();
        let rows = pc.compile(&ds());
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].lower, Some(-2.0));
        assert_eq!(rows[2].upper, Some(2.0));
        assert_eq!(pc.violations(&[0.0, 0.4, 1.2], &ds(), 1e-9), 1);
    }

    #[test]
    fn standardized_bounds_follow_label_scaling() {
        let scaler = ScalerState { means: vec![0.0, 10.0], stdevs: vec![1.0, 2.0] };
        let pc = PhysicsConstraints { bounds: Some(vec![(Some(0.0), Some(14.0)); 3]), ..Default::default() };
        let st = pc.standardized(&scaler, &ds());
        assert_eq!(st.bounds.unwrap()[0], (Some(-5.0), Some(2.0)));
    }

    #[test]
    fn invalid_constraints_are_rejected() {
        let pc = PhysicsConstraints { bounds: Some(vec![(Some(1.0), Some(0.0))]), ..Default::default() };
        assert!(pc.validate(1, 1).is_err());
        let pc = PhysicsConstraints { ramping: Some(vec![-1.0]), ..Default::default() };
        assert!(pc.validate(1, 1).is_err());
    }
}
