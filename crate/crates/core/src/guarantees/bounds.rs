//! Out-of-sample error bounds from Rademacher-complexity arguments.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::train::NormKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// `(1/N) Σ |β*ᵀẑ_j|`.
    pub train_error: f64,
    /// Dual-norm bound on the weights.
    pub b_star: f64,
    /// Bound on the lifted-sample norm.
    pub r_hat: f64,
    /// Bounds on original sample, feature and label norms.
    pub r: f64,
    pub s_bound: f64,
    pub t: f64,
    pub n: u64,
    pub delta: f64,
    pub p: usize,
    pub norm_variant: NormKind,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.train_error >= 0.0) || !self.train_error.is_finite() {
            return invalid("train_error must be finite and nonnegative");
        }
        for (name, v) in [("B*", self.b_star), ("R_hat", self.r_hat), ("R", self.r), ("S", self.s_bound), ("T", self.t)] {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.n < 1 {
            return invalid("N must be at least 1");
        }
        Ok(())
    }

    /// `B*·R̂·√(8 ln(2/δ)/N)`.
    fn confidence_term(&self) -> f64 {
        self.b_star * self.r_hat * (8.0 * (2.0 / self.delta).ln() / self.n as f64).sqrt()
    }

    /// `2B*R̂/√N + B*R̂√(8 ln(2/δ)/N)`.
    pub fn slack(&self) -> f64 {
        2.0 * self.b_star * self.r_hat / (self.n as f64).sqrt() + self.confidence_term()
    }

    /// `ψ₁ = B*·2P·R` for the ℓ1 variant, `ψ₂ = B*·√(2P)·R` for ℓ2.
    pub fn psi(&self) -> Result<f64> {
        if self.p < 1 {
            return invalid("P must be at least 1");
        }
        let p2 = 2.0 * self.p as f64;
        Ok(match self.norm_variant {
            NormKind::L1 => self.b_star * p2 * self.r,
            NormKind::L2 => self.b_star * p2.sqrt() * self.r,
        })
    }
}

pub fn rademacher_bound_lifted(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    Ok(inp.train_error + inp.slack())
}

pub fn rademacher_bound_original(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let psi = inp.psi()?;
    Ok(inp.train_error + 2.0 * psi / (inp.n as f64).sqrt() + inp.confidence_term())
}

/// Tail ratio `(train_error + slack)/(train_error + ζ)` for `ζ > slack`.
pub fn probabilistic_tail(inp: &BoundInputs, zeta_threshold: f64) -> Result<f64> {
    inp.validate()?;
    let slack = inp.slack();
    if !(zeta_threshold > slack) {
        return invalid(format!("threshold {zeta_threshold} must exceed the slack {slack}"));
    }
    Ok((inp.train_error + slack) / (inp.train_error + zeta_threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit() -> BoundInputs {
        BoundInputs {
            train_error: 0.0,
            b_star: 1.0,
            r_hat: 1.0,
            r: 1.0,
            s_bound: 1.0,
            t: 1.0,
            n: 100,
            delta: 0.1,
            p: 2,
            norm_variant: NormKind::L2,
        }
    }

    #[test]
    fn vanishing_terms_for_huge_n() {
        let inp = BoundInputs { n: 1_000_000_000_000, train_error: 0.3, ..unit() };
        assert!((rademacher_bound_lifted(&inp).unwrap() - 0.3).abs() < 1e-5);
    }

    #[test]
    fn slack_is_linear_in_b_star() {
        let a = unit();
        let b = BoundInputs { b_star: 2.0, ..unit() };
        assert_eq!(b.slack(), 2.0 * a.slack());
    }

    #[test]
    fn psi_variants() {
        let inp = BoundInputs { n: 4, ..unit() };
        assert_eq!(inp.psi().unwrap(), 2.0);
        let l1 = BoundInputs { norm_variant: NormKind::L1, ..inp.clone() };
        assert_eq!(l1.psi().unwrap(), 4.0);
        let zero = BoundInputs { p: 0, ..inp.clone() };
        assert!(rademacher_bound_original(&zero).is_err());
        let middle = rademacher_bound_original(&inp).unwrap() - inp.confidence_term();
        assert!((middle - 2.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(rademacher_bound_lifted(&BoundInputs { delta: 1.0, ..unit() }).is_err());
        assert!(rademacher_bound_lifted(&BoundInputs { b_star: 0.0, ..unit() }).is_err());
        let inp = unit();
        assert!(probabilistic_tail(&inp, inp.slack()).is_err());
    }

    #[test]
    fn tail_limits() {
        let inp = unit();
        assert!(probabilistic_tail(&inp, 1e12).unwrap() < 1e-11);
        let near = probabilistic_tail(&inp, inp.slack() * (1.0 + 1e-9)).unwrap();
        assert!(near < 1.0 && near > 1.0 - 1e-8);
    }
}
