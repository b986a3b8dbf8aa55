//! Independent oracles and random instance builders shared by the
//! integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wadiro::conic::{Backend, ConicProblem, ConicSolver, SolveOptions};
use wadiro::data::{gen_sampling_vectors, standardize, Dataset, SamplingSet, ScaleMode};
use wadiro::model::{fit_scnn, ScnnModel};
use wadiro::train::{training_view, NormKind, Program, TrainConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian features with a nonlinear noisy label.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let labels = rows
        .iter()
        .map(|x| x.iter().map(|v| v.abs()).sum::<f64>() - x[0] * 0.5 + rng.random_range(-0.3..0.3))
        .collect();
    Dataset::from_rows(&rows, labels).unwrap()
}

/// Standardized dataset and deduplicated sampling set for `cfg`.
pub fn instance(seed: u64, n: usize, d: usize, cfg: &TrainConfig) -> (Dataset, SamplingSet) {
    let mut r = rng(seed);
    let raw = random_dataset(&mut r, n, d);
    let (std_ds, _) = standardize(&raw, None, ScaleMode::FitTransform).unwrap();
    let view = training_view(&std_ds, cfg.with_bias);
    let s = gen_sampling_vectors(&view, cfg.max_neurons, seed ^ 0x5eed, true).unwrap();
    (std_ds, s)
}

/// Small trained model on a fresh random dataset.
pub fn random_model(seed: u64, n: usize, d: usize, neurons: usize, with_bias: bool, program: Program) -> ScnnModel {
    let mut r = rng(seed);
    let ds = random_dataset(&mut r, n, d);
    let mut cfg = TrainConfig::new(program);
    cfg.max_neurons = neurons;
    cfg.with_bias = with_bias;
    cfg.seed = seed;
    fit_scnn(&ds, &cfg, 1e-6).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Optimal value of `min ε‖β_trainable‖_dual + (1/N) Σ_j |βᵀẑ_j|` over
/// cone-feasible β, written directly in lifted coordinates with split
/// residuals and solved by the dense interior point method. Covers the
/// unpenalized and WaDiRo programs.
pub fn lifted_oracle(std_ds: &Dataset, s: &SamplingSet, cfg: &TrainConfig) -> f64 {
    let (eps, norm) = match cfg.program {
        Program::ScnnL1 => (0.0, NormKind::L1),
        Program::WadiroL1 { eps } => (eps, NormKind::L1),
        Program::WadiroL2 { eps } => (eps, NormKind::L2),
        ref other => panic!("oracle does not cover {}", other.name()),
    };
    let n = std_ds.n();
    let xs: Vec<Vec<f64>> = std_ds
        .rows()
        .map(|x| {
            let mut v = x.to_vec();
            if cfg.with_bias {
                v.push(1.0);
            }
            v
        })
        .collect();
    let d = xs[0].len();
    let p = s.p();
    let pd = p * d;
    let gates: Vec<Vec<bool>> = xs.iter().map(|x| s.vectors().map(|si| dot(x, si) >= 0.0).collect()).collect();
    let width = 2 * pd + usize::from(cfg.with_bias);

    let mut prob = ConicProblem::new();
    let beta = prob.add_vars(width);
    let plus = prob.add_vars(n);
    let minus = prob.add_vars(n);
    for j in 0..n {
        let mut z = vec![0.0; width];
        for i in 0..p {
            if gates[j][i] {
                z[i * d..(i + 1) * d].copy_from_slice(&xs[j]);
                z[pd + i * d..pd + (i + 1) * d].copy_from_slice(&xs[j]);
            }
        }
        if cfg.with_bias {
            z[2 * pd] = 1.0;
        }
        let mut terms: Vec<(usize, f64)> = z.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, &v)| (beta + k, v)).collect();
        terms.push((plus + j, -1.0));
        terms.push((minus + j, 1.0));
        prob.add_eq(&terms, std_ds.labels()[j]);
        prob.add_ge(&[(plus + j, 1.0)], 0.0);
        prob.add_ge(&[(minus + j, 1.0)], 0.0);
        prob.add_cost(plus + j, 1.0 / n as f64);
        prob.add_cost(minus + j, 1.0 / n as f64);
    }
    for j in 0..n {
        for i in 0..p {
            let sign = if gates[j][i] { 1.0 } else { -1.0 };
            let nu: Vec<(usize, f64)> = (0..d).map(|k| (beta + i * d + k, sign * xs[j][k])).collect();
            let om: Vec<(usize, f64)> = (0..d).map(|k| (beta + pd + i * d + k, -sign * xs[j][k])).collect();
            prob.add_ge(&nu, 0.0);
            prob.add_ge(&om, 0.0);
        }
    }
    if eps > 0.0 {
        let penalized: Vec<usize> =
            (0..2 * pd).chain((cfg.with_bias && cfg.penalize_bias).then_some(2 * pd)).map(|k| beta + k).collect();
        let t = prob.add_vars(1);
        prob.add_cost(t, eps);
        match norm {
            NormKind::L1 => {
                for &k in &penalized {
                    prob.add_le(&[(k, 1.0), (t, -1.0)], 0.0);
                    prob.add_le(&[(k, -1.0), (t, -1.0)], 0.0);
                }
            }
            NormKind::L2 => prob.add_soc(t, penalized),
        }
    }
    let rep = Backend::Dense.solve(&prob, &SolveOptions::with_tol(1e-9)).unwrap();
    assert!(rep.is_optimal(), "oracle status {}", rep.status);
    rep.objective_value
}

/// Exact equal-weight optimal transport cost between two 1-D samples under
/// `|u − v|`, as an assignment LP over the full coupling matrix.
pub fn transport_lp(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let mut prob = ConicProblem::new();
    let pi = prob.add_vars(n * n);
    for a in 0..n {
        for b in 0..n {
            prob.add_cost(pi + a * n + b, (u[a] - v[b]).abs());
            prob.add_ge(&[(pi + a * n + b, 1.0)], 0.0);
        }
        let row: Vec<(usize, f64)> = (0..n).map(|b| (pi + a * n + b, 1.0)).collect();
        prob.add_eq(&row, 1.0 / n as f64);
        let col: Vec<(usize, f64)> = (0..n).map(|b| (pi + b * n + a, 1.0)).collect();
        prob.add_eq(&col, 1.0 / n as f64);
    }
    let rep = Backend::Clarabel.solve(&prob, &SolveOptions::with_tol(1e-10)).unwrap();
    assert!(rep.is_optimal());
    rep.objective_value
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Allowed norm increase between radii `ε₁ < ε₂` when each solution is only
/// `δ`-optimal: adding the two optimality inequalities gives
/// `(ε₂ − ε₁)(N₂ − N₁) ≤ 2δ`. `δ` covers the loss cap of the ε = 0
/// tie-break solve, `10·tol·(1 + |obj|)`, plus the solver tolerance.
pub fn norm_slack(tol: f64, obj: f64, d_eps: f64) -> f64 {
    2.0 * 11.0 * tol * (1.0 + obj.abs()) / d_eps
}
