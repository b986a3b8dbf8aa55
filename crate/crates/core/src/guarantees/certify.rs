//! Worst-case input-stability certificates. The largest prediction change
//! under an ℓ∞ input perturbation of radius ε over a box is computed either
//! by branch and bound over a big-M mixed-integer encoding of the gated
//! network, or by enumerating every pair of gate patterns and solving one LP
//! per pattern pair on the dense interior-point backend.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::conic::{Backend, Clock, ConicProblem, ConicSolver, SolveOptions, SolveReport, SolveStatus};
use crate::error::{invalid, Error, Result};
use crate::model::ScnnModel;

/// Largest `2P + 1` accepted by the exhaustive oracle.
pub const EXHAUSTIVE_MAX_BINARIES: usize = 21;

/// Separation kept from each gate hyperplane when a candidate point is
/// polished, relative to the sampling-vector norm. Keeps the replayed gate
/// bits equal to the bits the LP was solved for.
const GATE_MARGIN: f64 = 1e-7;
const LP_TOL: f64 = 1e-9;
const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertifyMode {
    #[default]
    BranchAndBound,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Box and radius are given in the model's standardized input units.
    #[default]
    Standardized,
    /// Box and radius are given in original feature units.
    Original,
}

/// Input box `[lo, hi]` and perturbation radius `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub eps: f64,
}

impl CertifyDomain {
    pub fn cube(d: usize, lo: f64, hi: f64, eps: f64) -> Self {
        Self { lo: vec![lo; d], hi: vec![hi; d], eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub mode: CertifyMode,
    pub units: Units,
    /// Absolute optimality gap at which branch and bound stops.
    pub gap: f64,
    /// Solver for the branch-and-bound node LPs.
    pub backend: Backend,
    pub max_nodes: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { mode: CertifyMode::default(), units: Units::default(), gap: 1e-7, backend: Backend::Clarabel, max_nodes: 200_000 }
    }
}

/// Big-M constants used by the mixed-integer encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigMValues {
    /// `max |xᵀs_i|` over the box, per gate.
    pub gate: Vec<f64>,
    /// Same over the box widened by the radius.
    pub gate_eps: Vec<f64>,
    /// `max |x_k|` per coordinate, for the product rows.
    pub product: Vec<f64>,
    pub product_eps: Vec<f64>,
    /// Bound on `|Δ|`.
    pub delta: f64,
    /// Constant of the absolute-value rows, `2·delta`.
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    /// Worst-case prediction change in standardized label units.
    pub l_eps: f64,
    /// The same change in original label units.
    pub l_eps_original: f64,
    /// Maximizing input and perturbation, in the units of the request.
    pub argmax_x: Vec<f64>,
    pub argmax_eps: Vec<f64>,
    pub gamma_bits: Vec<bool>,
    pub eta_bits: Vec<bool>,
    /// Whether the perturbed prediction is at least the unperturbed one.
    pub zeta: bool,
    /// Proven upper bound on the worst-case change, standardized units.
    pub upper_bound: f64,
    pub bound_gap: f64,
    pub nodes_explored: usize,
    pub big_m: BigMValues,
    pub mode: CertifyMode,
    pub units: Units,
    pub wall_time: f64,
}

/// Solution of the mixed-integer encoding with every binary fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct MicpPoint {
    pub x: Vec<f64>,
    pub eps: Vec<f64>,
    /// `a_i`, the gated copy of `x` for neuron `i`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub delta: f64,
    pub alpha: f64,
}

/// Result of the grid scan lower bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationScan {
    pub max_deviation: f64,
    pub max_deviation_original: f64,
    pub argmax_x: Vec<f64>,
    pub argmax_eps: Vec<f64>,
    pub evaluations: usize,
}

/// Box, per-coordinate radius and gating data in standardized,
/// bias-augmented coordinates.
struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
    e: Vec<f64>,
    s: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    margin: Vec<f64>,
    big_m: BigMValues,
}

impl Region {
    fn new(model: &ScnnModel, domain: &CertifyDomain, units: Units) -> Result<Self> {
        let d = model.d();
        if domain.lo.len() != d || domain.hi.len() != d {
            return invalid(format!("box has {}/{} bounds, model expects {d}", domain.lo.len(), domain.hi.len()));
        }
        if domain.lo.iter().chain(&domain.hi).any(|v| !v.is_finite()) {
            return invalid("box bounds must be finite");
        }
        if !(domain.eps > 0.0) || !domain.eps.is_finite() {
            return invalid(format!("radius must be positive and finite, got {}", domain.eps));
        }
        if domain.lo.iter().zip(&domain.hi).any(|(l, h)| l > h) {
            return Err(Error::Infeasible("empty input box".into()));
        }
        let (mut lo, mut hi, mut e) = match units {
            Units::Standardized => (domain.lo.clone(), domain.hi.clone(), vec![domain.eps; d]),
            Units::Original => {
                let sc = &model.scaler;
                (
                    sc.transform_x(&domain.lo),
                    sc.transform_x(&domain.hi),
                    sc.stdevs[..d].iter().map(|s| domain.eps / s).collect(),
                )
            }
        };
        if model.with_bias {
            lo.push(1.0);
            hi.push(1.0);
            e.push(0.0);
        }
        let p = model.p();
        let s: Vec<Vec<f64>> = model.sampling.vectors().map(<[f64]>::to_vec).collect();
        let u: Vec<Vec<f64>> = (0..p).map(|i| model.raw.u(i)).collect();
        let abs_max = |l: f64, h: f64| l.abs().max(h.abs());
        let product: Vec<f64> = lo.iter().zip(&hi).map(|(&l, &h)| abs_max(l, h)).collect();
        let product_eps: Vec<f64> = (0..lo.len()).map(|k| abs_max(lo[k] - e[k], hi[k] + e[k])).collect();
        let gate_bound = |si: &[f64], m: &[f64]| si.iter().zip(m).map(|(a, b)| a.abs() * b).sum::<f64>();
        let gate = s.iter().map(|si| gate_bound(si, &product)).collect();
        let gate_eps = s.iter().map(|si| gate_bound(si, &product_eps)).collect();
        let delta: f64 = u.iter().map(|ui| gate_bound(ui, &product) + gate_bound(ui, &product_eps)).sum();
        let margin = s.iter().map(|si| GATE_MARGIN * si.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let big_m = BigMValues { gate, gate_eps, product, product_eps, delta, alpha: 2.0 * delta };
        Ok(Self { lo, hi, e, s, u, margin, big_m })
    }

    fn de(&self) -> usize {
        self.lo.len()
    }

    fn p(&self) -> usize {
        self.s.len()
    }

    /// Clamps an LP point into the feasible box exactly.
    fn clamp(&self, x: &[f64], ep: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let x = (0..self.de()).map(|k| x[k].clamp(self.lo[k], self.hi[k])).collect();
        let ep = (0..self.de()).map(|k| ep[k].clamp(-self.e[k], self.e[k])).collect();
        (x, ep)
    }
}

/// Replayed change `f(x + ε) − f(x)` of the actual predictor, standardized units.
fn replay(model: &ScnnModel, x: &[f64], ep: &[f64]) -> (f64, Vec<bool>, Vec<bool>) {
    let xe: Vec<f64> = x.iter().zip(ep).map(|(a, b)| a + b).collect();
    let g = model.sampling.gates(x);
    let h = model.sampling.gates(&xe);
    let delta = model.raw.predict_with_gates(&xe, &h) - model.raw.predict_with_gates(x, &g);
    (delta, g, h)
}

#[derive(Clone, Debug)]
struct Candidate {
    value: f64,
    delta: f64,
    x: Vec<f64>,
    ep: Vec<f64>,
    gamma: Vec<bool>,
    eta: Vec<bool>,
}

impl Candidate {
    fn offer(best: &mut Option<Candidate>, model: &ScnnModel, reg: &Region, x: &[f64], ep: &[f64]) {
        let (x, ep) = reg.clamp(x, ep);
        let (delta, gamma, eta) = replay(model, &x, &ep);
        if best.as_ref().is_none_or(|b| delta.abs() > b.value) {
            *best = Some(Candidate { value: delta.abs(), delta, x, ep, gamma, eta });
        }
    }
}

/// Tolerance of the last-resort retries after both backends stall at [`LP_TOL`].
const LP_RETRY_TOL: f64 = 1e-7;

fn solve_with_fallback(problem: &ConicProblem, primary: Backend) -> Result<SolveReport> {
    let other = match primary {
        Backend::Clarabel => Backend::Dense,
        Backend::Dense => Backend::Clarabel,
    };
    let tight = SolveOptions::with_tol(LP_TOL);
    let loose = SolveOptions { tol: LP_RETRY_TOL, max_iter: 4 * tight.max_iter };
    let mut first = None;
    for (backend, opts) in [(primary, tight), (other, tight), (primary, loose), (other, loose)] {
        let rep = backend.solve(problem, &opts)?;
        if matches!(rep.status, SolveStatus::Optimal | SolveStatus::Infeasible) {
            return Ok(rep);
        }
        first.get_or_insert(rep.status);
    }
    let status = first.unwrap_or(SolveStatus::NumericalError);
    Err(Error::Solver { status: status.to_string(), message: format!("certification LP failed on both backends ({status})") })
}

/// LP over `(x, ε)` with every gate bit fixed. Maximizes `sign·Δ`.
/// Open gates require `xᵀs_i ≥ margin_i` and closed gates
/// `xᵀs_i ≤ −margin_i` when `strict`; both sides allow zero otherwise.
fn leaf_lp(reg: &Region, gamma: &[bool], eta: &[bool], sign: Option<f64>, strict: bool) -> ConicProblem {
    let de = reg.de();
    let mut prob = ConicProblem::new();
    let x = prob.add_vars(de);
    let ep = prob.add_vars(de);
    for k in 0..de {
        if reg.lo[k] == reg.hi[k] {
            prob.add_eq(&[(x + k, 1.0)], reg.lo[k]);
        } else {
            prob.add_ge(&[(x + k, 1.0)], reg.lo[k]);
            prob.add_le(&[(x + k, 1.0)], reg.hi[k]);
        }
        if reg.e[k] == 0.0 {
            prob.add_eq(&[(ep + k, 1.0)], 0.0);
        } else {
            prob.add_ge(&[(ep + k, 1.0)], -reg.e[k]);
            prob.add_le(&[(ep + k, 1.0)], reg.e[k]);
        }
    }
    for i in 0..reg.p() {
        let m = if strict { reg.margin[i] } else { 0.0 };
        let row: Vec<(usize, f64)> = (0..de).map(|k| (x + k, reg.s[i][k])).collect();
        if gamma[i] {
            prob.add_ge(&row, m);
        } else {
            prob.add_le(&row, -m);
        }
        let row_e: Vec<(usize, f64)> =
            (0..de).map(|k| (x + k, reg.s[i][k])).chain((0..de).map(|k| (ep + k, reg.s[i][k]))).collect();
        if eta[i] {
            prob.add_ge(&row_e, m);
        } else {
            prob.add_le(&row_e, -m);
        }
    }
    if let Some(sign) = sign {
        for k in 0..de {
            let mut cx = 0.0;
            let mut ce = 0.0;
            for i in 0..reg.p() {
                let uik = reg.u[i][k];
                if eta[i] {
                    cx += uik;
                    ce += uik;
                }
                if gamma[i] {
                    cx -= uik;
                }
            }
            prob.add_cost(x + k, -sign * cx);
            prob.add_cost(ep + k, -sign * ce);
        }
    }
    prob
}

/// Maximizes `|Δ|` on one pattern pair. The closure optimum may sit on a
/// gate hyperplane where the predictor takes its other branch, so points
/// are also offered along the segment towards the optimum with strict
/// margins, which lies inside the pattern's region.
fn polish(model: &ScnnModel, reg: &Region, gamma: &[bool], eta: &[bool], backend: Backend, best: &mut Option<Candidate>) -> Result<usize> {
    let de = reg.de();
    for sign in [1.0, -1.0] {
        let mut sols = [None, None];
        for (slot, strict) in sols.iter_mut().zip([false, true]) {
            let rep = solve_with_fallback(&leaf_lp(reg, gamma, eta, Some(sign), strict), backend)?;
            if let (SolveStatus::Optimal, Some(v)) = (rep.status, rep.primal) {
                Candidate::offer(best, model, reg, &v[..de], &v[de..2 * de]);
                *slot = Some(v);
            }
        }
        if let [Some(closure), Some(inner)] = &sols {
            for t in [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1] {
                let v: Vec<f64> = closure.iter().zip(inner).map(|(c, i)| c + t * (i - c)).collect();
                Candidate::offer(best, model, reg, &v[..de], &v[de..2 * de]);
            }
        }
    }
    Ok(4)
}

fn bits_from_index(idx: usize, p: usize) -> Vec<bool> {
    (0..p).map(|i| idx >> i & 1 == 1).collect()
}

fn is_feasible(problem: &ConicProblem) -> Result<bool> {
    Ok(solve_with_fallback(problem, Backend::Dense)?.status == SolveStatus::Optimal)
}

/// Exhaustive oracle: every realizable gate pattern pair, two LPs per pair.
fn exhaustive(model: &ScnnModel, reg: &Region) -> Result<(Option<Candidate>, usize)> {
    let p = reg.p();
    if 2 * p + 1 > EXHAUSTIVE_MAX_BINARIES {
        return invalid(format!("exhaustive certification needs 2P+1 <= {EXHAUSTIVE_MAX_BINARIES}, got P = {p}"));
    }
    let mut lps = 0;
    let mut side_x = Vec::new();
    let mut side_e = Vec::new();
    for idx in 0..1usize << p {
        let bits = bits_from_index(idx, p);
        lps += 2;
        if is_feasible(&side_lp(reg, &bits, false))? {
            side_x.push(bits.clone());
        }
        if is_feasible(&side_lp(reg, &bits, true))? {
            side_e.push(bits);
        }
    }
    let mut best = None;
    for gamma in &side_x {
        for eta in &side_e {
            lps += polish(model, reg, gamma, eta, Backend::Dense, &mut best)?;
        }
    }
    Ok((best, lps))
}

/// Feasibility LP for one side's gate bits: `x` in the box, or `x + ε` in
/// the box widened by the radius.
fn side_lp(reg: &Region, bits: &[bool], widened: bool) -> ConicProblem {
    let de = reg.de();
    let mut prob = ConicProblem::new();
    let z = prob.add_vars(de);
    for k in 0..de {
        let w = if widened { reg.e[k] } else { 0.0 };
        let (l, h) = (reg.lo[k] - w, reg.hi[k] + w);
        if l == h {
            prob.add_eq(&[(z + k, 1.0)], l);
        } else {
            prob.add_ge(&[(z + k, 1.0)], l);
            prob.add_le(&[(z + k, 1.0)], h);
        }
    }
    for i in 0..reg.p() {
        let row: Vec<(usize, f64)> = (0..de).map(|k| (z + k, reg.s[i][k])).collect();
        if bits[i] {
            prob.add_ge(&row, reg.margin[i]);
        } else {
            prob.add_le(&row, -reg.margin[i]);
        }
    }
    prob
}

/// Variable layout of the mixed-integer encoding.
struct Micp {
    de: usize,
    p: usize,
    x: usize,
    ep: usize,
    a: usize,
    b: usize,
    g: usize,
    h: usize,
    z: usize,
    al: usize,
    base: ConicProblem,
}

impl Micp {
    fn build(reg: &Region) -> Self {
        let (de, p) = (reg.de(), reg.p());
        let mut prob = ConicProblem::new();
        let x = prob.add_vars(de);
        let ep = prob.add_vars(de);
        let a = prob.add_vars(p * de);
        let b = prob.add_vars(p * de);
        let g = prob.add_vars(p);
        let h = prob.add_vars(p);
        let z = prob.add_vars(1);
        let al = prob.add_vars(1);
        let m = &reg.big_m;
        for k in 0..de {
            if reg.lo[k] == reg.hi[k] {
                prob.add_eq(&[(x + k, 1.0)], reg.lo[k]);
            } else {
                prob.add_ge(&[(x + k, 1.0)], reg.lo[k]);
                prob.add_le(&[(x + k, 1.0)], reg.hi[k]);
            }
            if reg.e[k] == 0.0 {
                prob.add_eq(&[(ep + k, 1.0)], 0.0);
            } else {
                prob.add_ge(&[(ep + k, 1.0)], -reg.e[k]);
                prob.add_le(&[(ep + k, 1.0)], reg.e[k]);
            }
        }
        for v in (g..g + p).chain(h..h + p).chain([z]) {
            prob.add_ge(&[(v, 1.0)], 0.0);
            prob.add_le(&[(v, 1.0)], 1.0);
        }
        for i in 0..p {
            // xᵀs_i ≤ Mγ_i and xᵀs_i ≥ −M(1 − γ_i).
            let sx: Vec<(usize, f64)> = (0..de).map(|k| (x + k, reg.s[i][k])).collect();
            let mut row = sx.clone();
            row.push((g + i, -m.gate[i]));
            prob.add_le(&row, 0.0);
            let mut row: Vec<(usize, f64)> = sx.iter().map(|&(j, c)| (j, -c)).collect();
            row.push((g + i, m.gate[i]));
            prob.add_le(&row, m.gate[i]);
            let mut sxe = sx.clone();
            sxe.extend((0..de).map(|k| (ep + k, reg.s[i][k])));
            let mut row = sxe.clone();
            row.push((h + i, -m.gate_eps[i]));
            prob.add_le(&row, 0.0);
            let mut row: Vec<(usize, f64)> = sxe.iter().map(|&(j, c)| (j, -c)).collect();
            row.push((h + i, m.gate_eps[i]));
            prob.add_le(&row, m.gate_eps[i]);
            for k in 0..de {
                // a_ik = γ_i x_k through four rows, b_ik = η_i (x_k + ε_k) likewise.
                let (ai, mk) = (a + i * de + k, m.product[k]);
                prob.add_le(&[(x + k, 1.0), (ai, -1.0), (g + i, mk)], mk);
                prob.add_le(&[(x + k, -1.0), (ai, 1.0), (g + i, mk)], mk);
                prob.add_le(&[(ai, 1.0), (g + i, -mk)], 0.0);
                prob.add_le(&[(ai, -1.0), (g + i, -mk)], 0.0);
                let (bi, mk) = (b + i * de + k, m.product_eps[k]);
                prob.add_le(&[(x + k, 1.0), (ep + k, 1.0), (bi, -1.0), (h + i, mk)], mk);
                prob.add_le(&[(x + k, -1.0), (ep + k, -1.0), (bi, 1.0), (h + i, mk)], mk);
                prob.add_le(&[(bi, 1.0), (h + i, -mk)], 0.0);
                prob.add_le(&[(bi, -1.0), (h + i, -mk)], 0.0);
            }
        }
        // Δ = Σ_i u_iᵀ(b_i − a_i); α = |Δ| through ζ.
        let mut delta = Vec::with_capacity(2 * p * de);
        for i in 0..p {
            for k in 0..de {
                delta.push((b + i * de + k, reg.u[i][k]));
                delta.push((a + i * de + k, -reg.u[i][k]));
            }
        }
        let neg = |t: &[(usize, f64)]| t.iter().map(|&(j, c)| (j, -c)).collect::<Vec<_>>();
        let with = |mut t: Vec<(usize, f64)>, extra: &[(usize, f64)]| {
            t.extend_from_slice(extra);
            t
        };
        let (md, ma) = (m.delta, m.alpha);
        prob.add_le(&with(delta.clone(), &[(z, -md)]), 0.0);
        prob.add_le(&with(neg(&delta), &[(z, md)]), md);
        prob.add_le(&with(neg(&delta), &[(al, 1.0), (z, ma)]), ma);
        prob.add_le(&with(delta.clone(), &[(al, -1.0), (z, ma)]), ma);
        prob.add_le(&with(delta.clone(), &[(al, 1.0), (z, -ma)]), 0.0);
        prob.add_le(&with(neg(&delta), &[(al, -1.0), (z, -ma)]), 0.0);
        prob.add_cost(al, -1.0);
        Self { de, p, x, ep, a, b, g, h, z, al, base: prob }
    }

    fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        (self.g..self.g + self.p).chain(self.h..self.h + self.p).chain([self.z])
    }

    fn with_fixings(&self, fix: &[(usize, f64)]) -> ConicProblem {
        let mut prob = self.base.clone();
        for &(v, val) in fix {
            prob.add_eq(&[(v, 1.0)], val);
        }
        prob
    }

    fn most_fractional(&self, v: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in self.binaries() {
            let frac = v[j].min(1.0 - v[j]);
            if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f) {
                best = Some((j, frac));
            }
        }
        best.map(|b| b.0)
    }
}

struct Node {
    bound: f64,
    depth: usize,
    fix: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Best bound first, deeper nodes first among equal bounds.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(self.depth.cmp(&other.depth))
    }
}

struct BnbOutcome {
    best: Option<Candidate>,
    upper: f64,
    nodes: usize,
}

fn branch_and_bound(model: &ScnnModel, reg: &Region, opts: &CertifyOptions) -> Result<BnbOutcome> {
    let micp = Micp::build(reg);
    let de = micp.de;
    let mut best: Option<Candidate> = None;
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: f64::INFINITY, depth: 0, fix: Vec::new() });
    let mut nodes = 0;
    let mut closed_upper = f64::NEG_INFINITY;
    let incumbent = |b: &Option<Candidate>| b.as_ref().map_or(f64::NEG_INFINITY, |c| c.value);
    while let Some(node) = heap.pop() {
        if node.bound <= incumbent(&best) + opts.gap {
            closed_upper = closed_upper.max(node.bound);
            continue;
        }
        if nodes >= opts.max_nodes {
            heap.push(node);
            break;
        }
        nodes += 1;
        let rep = solve_with_fallback(&micp.with_fixings(&node.fix), opts.backend)?;
        let Some(v) = rep.primal.filter(|_| rep.status == SolveStatus::Optimal) else {
            continue;
        };
        let bound = (-rep.objective_value).min(node.bound);
        Candidate::offer(&mut best, model, reg, &v[micp.x..micp.x + de], &v[micp.ep..micp.ep + de]);
        if bound <= incumbent(&best) + opts.gap {
            closed_upper = closed_upper.max(bound);
            continue;
        }
        match micp.most_fractional(&v) {
            None => {
                // Integral relaxation: the node value is attained by the encoding.
                // Polish the pattern so the replay is exact.
                let bit = |j: usize| v[j] > 0.5;
                let gamma: Vec<bool> = (0..micp.p).map(|i| bit(micp.g + i)).collect();
                let eta: Vec<bool> = (0..micp.p).map(|i| bit(micp.h + i)).collect();
                polish(model, reg, &gamma, &eta, opts.backend, &mut best)?;
                closed_upper = closed_upper.max(bound);
            }
            Some(j) => {
                for val in [0.0, 1.0] {
                    let mut fix = node.fix.clone();
                    fix.push((j, val));
                    heap.push(Node { bound, depth: node.depth + 1, fix });
                }
            }
        }
    }
    let open_upper = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
    Ok(BnbOutcome { upper: closed_upper.max(open_upper).max(incumbent(&best)), best, nodes })
}

/// Power of two nearest the largest output weight. The deviation is
/// positively homogeneous in the output weights, so certifying the network
/// divided by this exact factor and multiplying back is lossless and keeps
/// the LPs well scaled when training leaves near-zero weights.
fn weight_scale(model: &ScnnModel) -> f64 {
    let m = model.raw.nu.iter().chain(&model.raw.omega).flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 && m.is_finite() {
        2f64.powi(m.log2().round() as i32)
    } else {
        1.0
    }
}

/// Worst-case change `max |f(x + ε) − f(x)|` over `x ∈ [lo, hi]`,
/// `‖ε‖∞ ≤ eps`. The perturbed point may leave the box.
pub fn certify_stability(model: &ScnnModel, domain: &CertifyDomain, opts: &CertifyOptions) -> Result<StabilityCertificate> {
    if !(opts.gap >= 0.0) || !opts.gap.is_finite() {
        return invalid("gap must be finite and nonnegative");
    }
    let clock = Clock::start();
    let scale = weight_scale(model);
    let normalized = ScnnModel { raw: model.raw.scaled(1.0 / scale), ..model.clone() };
    let model = &normalized;
    let mut reg = Region::new(model, domain, opts.units)?;
    let (mut best, mut upper, nodes) = match opts.mode {
        CertifyMode::Exhaustive => {
            let (best, nodes) = exhaustive(model, &reg)?;
            let upper = best.as_ref().map_or(0.0, |c| c.value);
            (best, upper, nodes)
        }
        CertifyMode::BranchAndBound => {
            let out = branch_and_bound(model, &reg, opts)?;
            (out.best, out.upper, out.nodes)
        }
    };
    if let Some(c) = best.clone() {
        polish(model, &reg, &c.gamma, &c.eta, opts.backend, &mut best)?;
    }
    let c = best.ok_or_else(|| Error::Infeasible("no feasible input in the box".into()))?;
    upper = upper.max(c.value) * scale;
    let value = c.value * scale;
    reg.big_m.delta *= scale;
    reg.big_m.alpha *= scale;
    let d = model.d();
    let (argmax_x, argmax_eps) = match opts.units {
        Units::Standardized => (c.x[..d].to_vec(), c.ep[..d].to_vec()),
        Units::Original => {
            let sd = &model.scaler.stdevs[..d];
            (model.scaler.inverse_x(&c.x[..d]), c.ep[..d].iter().zip(sd).map(|(e, s)| e * s).collect())
        }
    };
    Ok(StabilityCertificate {
        l_eps: value,
        l_eps_original: value * model.scaler.label_stdev(),
        argmax_x,
        argmax_eps,
        gamma_bits: c.gamma,
        eta_bits: c.eta,
        zeta: c.delta >= 0.0,
        upper_bound: upper,
        bound_gap: (upper - value).max(0.0),
        nodes_explored: nodes,
        big_m: reg.big_m,
        mode: opts.mode,
        units: opts.units,
        wall_time: clock.elapsed(),
    })
}

/// Solves the mixed-integer encoding with `γ`, `η` and `ζ` fixed. Used to
/// check that the big-M rows reproduce the gated products exactly.
pub fn solve_fixed_micp(
    model: &ScnnModel,
    domain: &CertifyDomain,
    units: Units,
    gamma: &[bool],
    eta: &[bool],
    zeta: bool,
    backend: Backend,
) -> Result<MicpPoint> {
    let reg = Region::new(model, domain, units)?;
    let micp = Micp::build(&reg);
    if gamma.len() != micp.p || eta.len() != micp.p {
        return invalid("gate bit vectors must have length P");
    }
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    let mut fix: Vec<(usize, f64)> = gamma.iter().enumerate().map(|(i, &v)| (micp.g + i, b(v))).collect();
    fix.extend(eta.iter().enumerate().map(|(i, &v)| (micp.h + i, b(v))));
    fix.push((micp.z, b(zeta)));
    let rep = solve_with_fallback(&micp.with_fixings(&fix), backend)?;
    let v = match (rep.status, rep.primal) {
        (SolveStatus::Optimal, Some(v)) => v,
        (status, _) => return Err(Error::Solver { status: status.to_string(), message: "fixed-binary encoding has no optimum".into() }),
    };
    let de = micp.de;
    let block = |start: usize| (0..micp.p).map(|i| v[start + i * de..start + (i + 1) * de].to_vec()).collect::<Vec<_>>();
    let a = block(micp.a);
    let bb = block(micp.b);
    let delta = (0..micp.p)
        .map(|i| (0..de).map(|k| reg.u[i][k] * (bb[i][k] - a[i][k])).sum::<f64>())
        .sum();
    Ok(MicpPoint {
        x: v[micp.x..micp.x + de].to_vec(),
        eps: v[micp.ep..micp.ep + de].to_vec(),
        a,
        b: bb,
        delta,
        alpha: v[micp.al],
    })
}

/// Grid lower bound: `density` points per axis of the box, every corner of
/// the perturbation cube at each point.
pub fn empirical_deviation_scan(model: &ScnnModel, domain: &CertifyDomain, units: Units, density: usize) -> Result<DeviationScan> {
    if density == 0 {
        return invalid("grid density must be positive");
    }
    let reg = Region::new(model, domain, units)?;
    let d = model.d();
    let axis = |k: usize, t: usize| {
        if density == 1 {
            0.5 * (reg.lo[k] + reg.hi[k])
        } else {
            reg.lo[k] + (reg.hi[k] - reg.lo[k]) * t as f64 / (density - 1) as f64
        }
    };
    let total = density.checked_pow(d as u32).ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    let mut evaluations = 0;
    let mut x = reg.lo.clone();
    let mut ep = vec![0.0; reg.de()];
    for cell in 0..total {
        let mut rem = cell;
        for (k, xk) in x.iter_mut().enumerate().take(d) {
            *xk = axis(k, rem % density);
            rem /= density;
        }
        for corner in 0..1usize << d {
            for k in 0..d {
                ep[k] = if corner >> k & 1 == 1 { reg.e[k] } else { -reg.e[k] };
            }
            let dev = replay(model, &x, &ep).0.abs();
            evaluations += 1;
            if dev > best.0 {
                best = (dev, x[..d].to_vec(), ep[..d].to_vec());
            }
        }
    }
    let (argmax_x, argmax_eps) = match units {
        Units::Standardized => (best.1, best.2),
        Units::Original => {
            let sd = &model.scaler.stdevs[..d];
            (model.scaler.inverse_x(&best.1), best.2.iter().zip(sd).map(|(e, s)| e * s).collect())
        }
    };
    Ok(DeviationScan {
        max_deviation: best.0,
        max_deviation_original: best.0 * model.scaler.label_stdev(),
        argmax_x,
        argmax_eps,
        evaluations,
    })
}
