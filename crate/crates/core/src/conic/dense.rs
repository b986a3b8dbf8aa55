//! Dense homogeneous self-dual interior-point method for LP/SOCP.
//!
//! Standard form `min cᵀx  s.t.  Ax = b,  Gx + s = h,  s ∈ K` with `K` a
//! product of the nonnegative orthant and second-order cones. Iterates follow
//! the self-dual embedding with Nesterov-Todd scaling and a Mehrotra
//! predictor-corrector step; KKT systems are solved by normal equations with
//! Cholesky factors and iterative refinement. Intended for small and
//! moderate instances (oracles, certifier leaves).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{Clock, ConicProblem, ConicSolver, SolveOptions, SolveReport, SolveStatus};
use crate::error::Result;

#[derive(Clone, Copy, Debug, Default)]
pub struct DenseIpm;

struct Cones {
    l: usize,
    soc: Vec<(usize, usize)>,
}

impl Cones {
    fn degree(&self) -> usize {
        self.l + self.soc.len()
    }

    fn identity(&self, m: usize) -> DVector<f64> {
        let mut e = DVector::zeros(m);
        e.rows_mut(0, self.l).fill(1.0);
        for &(o, _) in &self.soc {
            e[o] = 1.0;
        }
        e
    }

    /// Smallest `a` with `v + a·e` in the cone.
    fn violation(&self, v: &DVector<f64>) -> f64 {
        let mut a = f64::NEG_INFINITY;
        for i in 0..self.l {
            a = a.max(-v[i]);
        }
        for &(o, q) in &self.soc {
            let tail = v.rows(o + 1, q - 1).norm();
            a = a.max(tail - v[o]);
        }
        a
    }

    fn jordan(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = u.component_mul(v);
        for &(o, q) in &self.soc {
            out[o] = u.rows(o, q).dot(&v.rows(o, q));
            for k in 1..q {
                out[o + k] = u[o] * v[o + k] + v[o] * u[o + k];
            }
        }
        out
    }

    /// `x` with `lam ∘ x = d`.
    fn jordan_div(&self, lam: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
        let mut out = d.component_div(lam);
        for &(o, q) in &self.soc {
            let l0 = lam[o];
            let l1 = lam.rows(o + 1, q - 1);
            let d1 = d.rows(o + 1, q - 1);
            let det = l0 * l0 - l1.norm_squared();
            let x0 = (l0 * d[o] - l1.dot(&d1)) / det;
            out[o] = x0;
            for k in 1..q {
                out[o + k] = (d[o + k] - x0 * lam[o + k]) / l0;
            }
        }
        out
    }

    /// Largest step keeping `v + a·dv` inside the cone (may be infinite).
    fn max_step(&self, v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
        let mut a = f64::INFINITY;
        for i in 0..self.l {
            if dv[i] < 0.0 {
                a = a.min(-v[i] / dv[i]);
            }
        }
        for &(o, q) in &self.soc {
            let v1 = v.rows(o + 1, q - 1);
            let d1 = dv.rows(o + 1, q - 1);
            let qa = dv[o] * dv[o] - d1.norm_squared();
            let qb = v[o] * dv[o] - v1.dot(&d1);
            let qc = (v[o] * v[o] - v1.norm_squared()).max(0.0);
            a = a.min(soc_root(qa, qb, qc));
            if dv[o] < 0.0 {
                a = a.min(-v[o] / dv[o]);
            }
        }
        a
    }
}

/// Smallest positive root of `qa·t² + 2·qb·t + qc` with `qc ≥ 0`.
fn soc_root(qa: f64, qb: f64, qc: f64) -> f64 {
    let scale = qa.abs().max(qb.abs()).max(qc.abs()).max(f64::MIN_POSITIVE);
    if qa.abs() <= 1e-14 * scale {
        return if qb < 0.0 { -qc / (2.0 * qb) } else { f64::INFINITY };
    }
    let disc = qb * qb - qa * qc;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let q = -(qb + qb.signum() * sq);
    let (r1, r2) = if q != 0.0 { (q / qa, qc / q) } else { (0.0, 0.0) };
    [r1, r2].into_iter().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min)
}

/// Nesterov-Todd scaling `W` with `W z = W⁻¹ s = λ`.
struct Scaling {
    lp: DVector<f64>,
    soc: Vec<(f64, DVector<f64>)>,
}

impl Scaling {
    fn identity(cones: &Cones) -> Self {
        let soc = cones
            .soc
            .iter()
            .map(|&(_, q)| {
                let mut w = DVector::zeros(q);
                w[0] = 1.0;
                (1.0, w)
            })
            .collect();
        Self { lp: DVector::from_element(cones.l, 1.0), soc }
    }

    fn nt(cones: &Cones, s: &DVector<f64>, z: &DVector<f64>) -> Self {
        let lp = DVector::from_fn(cones.l, |i, _| (s[i] / z[i]).sqrt());
        let soc = cones
            .soc
            .iter()
            .map(|&(o, q)| {
                let sb = s.rows(o, q);
                let zb = z.rows(o, q);
                let sdet = (sb[0] * sb[0] - sb.rows(1, q - 1).norm_squared()).max(f64::MIN_POSITIVE);
                let zdet = (zb[0] * zb[0] - zb.rows(1, q - 1).norm_squared()).max(f64::MIN_POSITIVE);
                let sn = sb / sdet.sqrt();
                let mut zn = zb / zdet.sqrt();
                let gamma = ((1.0 + sn.dot(&zn)) / 2.0).sqrt();
                zn.rows_mut(1, q - 1).neg_mut();
                let w = (sn + zn) / (2.0 * gamma);
                ((sdet / zdet).powf(0.25), w)
            })
            .collect();
        Self { lp, soc }
    }

    /// `W̄ v` for a hyperbolic block with parameter `w`.
    fn wbar(w: &DVector<f64>, v: &[f64]) -> Vec<f64> {
        let q = w.len();
        let w1v1: f64 = (1..q).map(|k| w[k] * v[k]).sum();
        let mut out = vec![0.0; q];
        out[0] = w[0] * v[0] + w1v1;
        let coef = v[0] + w1v1 / (1.0 + w[0]);
        for k in 1..q {
            out[k] = v[k] + coef * w[k];
        }
        out
    }

    fn apply(&self, cones: &Cones, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let mut out = v.clone();
        for i in 0..cones.l {
            out[i] = if inverse { v[i] / self.lp[i] } else { v[i] * self.lp[i] };
        }
        for (&(o, q), (eta, w)) in cones.soc.iter().zip(&self.soc) {
            let mut blk: Vec<f64> = v.rows(o, q).iter().copied().collect();
            if inverse {
                blk[1..].iter_mut().for_each(|x| *x = -*x);
            }
            let mut r = Self::wbar(w, &blk);
            if inverse {
                r[1..].iter_mut().for_each(|x| *x = -*x);
            }
            let f = if inverse { 1.0 / eta } else { *eta };
            for k in 0..q {
                out[o + k] = f * r[k];
            }
        }
        out
    }

    /// `W² v` or `W⁻² v`.
    fn apply_sq(&self, cones: &Cones, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let mut out = v.clone();
        for i in 0..cones.l {
            let w2 = self.lp[i] * self.lp[i];
            out[i] = if inverse { v[i] / w2 } else { v[i] * w2 };
        }
        for (&(o, q), (eta, w)) in cones.soc.iter().zip(&self.soc) {
            let f = if inverse { 1.0 / (eta * eta) } else { eta * eta };
            // W̄² = 2 w wᵀ − J and W̄⁻² = 2 J w wᵀ J − J.
            let mut jw = w.clone();
            if inverse {
                jw.rows_mut(1, q - 1).neg_mut();
            }
            let a = jw.dot(&v.rows(o, q));
            for k in 0..q {
                let jv = if k == 0 { v[o] } else { -v[o + k] };
                out[o + k] = f * (2.0 * a * jw[k] - jv);
            }
        }
        out
    }

    /// `Gᵀ W⁻² G` accumulated block by block.
    fn gram(&self, cones: &Cones, g: &DMatrix<f64>) -> DMatrix<f64> {
        let n = g.ncols();
        let mut h = DMatrix::zeros(n, n);
        if cones.l > 0 {
            let gl = g.rows(0, cones.l);
            let mut scaled = gl.clone_owned();
            for i in 0..cones.l {
                let w2 = self.lp[i] * self.lp[i];
                scaled.row_mut(i).scale_mut(1.0 / w2);
            }
            h += gl.transpose() * scaled;
        }
        for (&(o, q), (eta, w)) in cones.soc.iter().zip(&self.soc) {
            let gb = g.rows(o, q);
            let mut jw = w.clone();
            jw.rows_mut(1, q - 1).neg_mut();
            let mut jg = gb.clone_owned();
            for k in 1..q {
                jg.row_mut(k).neg_mut();
            }
            let gtjw = gb.transpose() * &jw;
            let f = 1.0 / (eta * eta);
            h += (&gtjw * gtjw.transpose() * 2.0 - gb.transpose() * jg) * f;
        }
        h
    }
}

struct Data {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    cones: Cones,
}

impl Data {
    fn from_problem(p: &ConicProblem) -> Self {
        let n = p.var_count;
        let eq = p.equalities();
        let ineq = p.inequalities();
        let socm: usize = p.soc_blocks().iter().map(|b| b.u.len() + 1).sum();
        let m = ineq.len() + socm;
        let mut a = DMatrix::zeros(eq.len(), n);
        for r in 0..eq.len() {
            let (idx, val) = eq.row(r);
            for (&j, &v) in idx.iter().zip(val) {
                a[(r, j)] += v;
            }
        }
        let mut g = DMatrix::zeros(m, n);
        let mut h = DVector::zeros(m);
        for r in 0..ineq.len() {
            let (idx, val) = ineq.row(r);
            for (&j, &v) in idx.iter().zip(val) {
                g[(r, j)] += v;
            }
            h[r] = ineq.rhs()[r];
        }
        let mut soc = Vec::new();
        let mut row = ineq.len();
        for blk in p.soc_blocks() {
            soc.push((row, blk.u.len() + 1));
            for &j in std::iter::once(&blk.t).chain(&blk.u) {
                g[(row, j)] -= 1.0;
                row += 1;
            }
        }
        Self {
            c: DVector::from_column_slice(p.objective()),
            a,
            b: DVector::from_column_slice(eq.rhs()),
            g,
            h,
            cones: Cones { l: ineq.len(), soc },
        }
    }
}

struct Kkt<'a> {
    d: &'a Data,
    w: &'a Scaling,
    hchol: Cholesky<f64, Dyn>,
    schur: Option<Cholesky<f64, Dyn>>,
}

impl<'a> Kkt<'a> {
    fn factor(d: &'a Data, w: &'a Scaling) -> Option<Self> {
        let n = d.c.len();
        let base = w.gram(&d.cones, &d.g) + d.a.transpose() * &d.a;
        let diag_max = (0..n).map(|i| base[(i, i)].abs()).fold(1.0, f64::max);
        let mut reg = 1e-13 * diag_max;
        for _ in 0..8 {
            let mut hm = base.clone();
            for i in 0..n {
                hm[(i, i)] += reg;
            }
            if let Some(hchol) = Cholesky::new(hm) {
                let schur = if d.a.nrows() > 0 {
                    let hinv_at = hchol.solve(&d.a.transpose());
                    let mut s = &d.a * hinv_at;
                    let smax = (0..s.nrows()).map(|i| s[(i, i)].abs()).fold(1.0, f64::max);
                    for i in 0..s.nrows() {
                        s[(i, i)] += 1e-13 * smax;
                    }
                    match Cholesky::new(s) {
                        Some(c) => Some(c),
                        None => {
                            reg *= 100.0;
                            continue;
                        }
                    }
                } else {
                    None
                };
                return Some(Self { d, w, hchol, schur });
            }
            reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
        }
        None
    }

    fn solve_once(&self, r1: &DVector<f64>, r2: &DVector<f64>, r3: &DVector<f64>) -> [DVector<f64>; 3] {
        let d = self.d;
        let w2r3 = self.w.apply_sq(&d.cones, r3, true);
        let f = r1 + d.g.transpose() * &w2r3 + d.a.transpose() * r2;
        let (dx, dy) = match &self.schur {
            Some(s) => {
                let hf = self.hchol.solve(&f);
                let dy = s.solve(&(&d.a * hf - r2));
                let dx = self.hchol.solve(&(f - d.a.transpose() * &dy));
                (dx, dy)
            }
            None => (self.hchol.solve(&f), DVector::zeros(0)),
        };
        let dz = self.w.apply_sq(&d.cones, &(&d.g * &dx - r3), true);
        [dx, dy, dz]
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²] (x, y, z) = (r1, r2, r3)`.
    fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>, r3: &DVector<f64>) -> [DVector<f64>; 3] {
        let d = self.d;
        let mut sol = self.solve_once(r1, r2, r3);
        for _ in 0..3 {
            let [x, y, z] = &sol;
            let e1 = r1 - (d.a.transpose() * y + d.g.transpose() * z);
            let e2 = r2 - &d.a * x;
            let e3 = r3 - (&d.g * x - self.w.apply_sq(&d.cones, z, false));
            let err = e1.amax().max(e2.amax()).max(e3.amax());
            let scale = 1.0 + r1.amax().max(r2.amax()).max(r3.amax());
            if err <= 1e-15 * scale {
                break;
            }
            let [cx, cy, cz] = self.solve_once(&e1, &e2, &e3);
            sol = [x + cx, y + cy, z + cz];
        }
        sol
    }
}

fn amax(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.amax()
    }
}

impl ConicSolver for DenseIpm {
    fn solve(&self, problem: &ConicProblem, opts: &SolveOptions) -> Result<SolveReport> {
        problem.validate()?;
        opts.check()?;
        let clock = Clock::start();
        let d = Data::from_problem(problem);
        let report = run(&d, opts);
        let (status, x, iters, dres, gap) = report;
        let elapsed = clock.elapsed();
        match x {
            Some(x) if x.iter().all(|v| v.is_finite()) => Ok(SolveReport {
                status,
                objective_value: problem.objective_at(&x),
                primal_residual: problem.primal_residual(&x),
                dual_residual: dres,
                gap,
                primal: Some(x),
                iterations: iters,
                wall_time: elapsed,
            }),
            _ => {
                let status = if status == SolveStatus::MaxIter { SolveStatus::NumericalError } else { status };
                Ok(SolveReport::without_primal(status, iters, elapsed))
            }
        }
    }
}

type RunResult = (SolveStatus, Option<Vec<f64>>, usize, f64, f64);

fn run(d: &Data, opts: &SolveOptions) -> RunResult {
    let n = d.c.len();
    let m = d.h.len();
    let cones = &d.cones;
    let tol = opts.tol;
    let e = cones.identity(m);

    let ident = Scaling::identity(cones);
    let Some(k0) = Kkt::factor(d, &ident) else {
        return (SolveStatus::NumericalError, None, 0, f64::NAN, f64::NAN);
    };
    let [mut x, _, zt] = k0.solve(&DVector::zeros(n), &d.b, &d.h);
    let mut s = -zt;
    let [_, mut y, mut z] = k0.solve(&(-&d.c), &DVector::zeros(d.b.len()), &DVector::zeros(m));
    if m > 0 {
        let ap = cones.violation(&s);
        if ap >= -1e-8 * (1.0 + amax(&s)) {
            s += &e * (1.0 + ap.max(0.0));
        }
        let ad = cones.violation(&z);
        if ad >= -1e-8 * (1.0 + amax(&z)) {
            z += &e * (1.0 + ad.max(0.0));
        }
    }
    let (mut tau, mut kappa) = (1.0, 1.0);

    let cscale = amax(&d.c).max(1.0);
    let bscale = amax(&d.b).max(amax(&d.h)).max(1.0);
    let degree = (cones.degree() + 1) as f64;
    let mut last = (f64::NAN, f64::NAN);

    for iter in 0..=opts.max_iter {
        let rx = d.a.transpose() * &y + d.g.transpose() * &z + &d.c * tau;
        let ry = -(&d.a * &x) + &d.b * tau;
        let rz = &s + &d.g * &x - &d.h * tau;
        let cx = d.c.dot(&x);
        let byhz = d.b.dot(&y) + d.h.dot(&z);
        let rt = kappa + cx + byhz;

        let pres = amax(&ry).max(amax(&rz)) / tau / bscale;
        let dres = amax(&rx) / tau / cscale;
        let pcost = cx / tau;
        let dcost = -byhz / tau;
        let gap_abs = s.dot(&z) / (tau * tau);
        let gap_rel = gap_abs / pcost.abs().max(dcost.abs()).max(1e-300);
        let gap = gap_abs.min(gap_rel).max(0.0);
        last = (dres, gap);
        if pres <= tol && dres <= tol && gap <= tol {
            let xs = (&x / tau).iter().copied().collect();
            return (SolveStatus::Optimal, Some(xs), iter, dres, gap);
        }
        if byhz < 0.0 {
            let res = amax(&(d.a.transpose() * &y + d.g.transpose() * &z)) / -byhz;
            if res <= tol {
                return (SolveStatus::Infeasible, None, iter, dres, gap);
            }
        }
        if cx < 0.0 {
            let res = amax(&(&d.a * &x)).max(amax(&(&d.g * &x + &s))) / -cx;
            if res <= tol {
                return (SolveStatus::Unbounded, None, iter, dres, gap);
            }
        }
        if iter == opts.max_iter {
            break;
        }

        let w = Scaling::nt(cones, &s, &z);
        let lam = w.apply(cones, &z, false);
        let Some(kkt) = Kkt::factor(d, &w) else {
            break;
        };
        let [u1x, u1y, u1z] = kkt.solve(&(-&d.c), &d.b, &d.h);
        let denom = d.c.dot(&u1x) + d.b.dot(&u1y) + d.h.dot(&u1z) - kappa / tau;
        let mu = (s.dot(&z) + tau * kappa) / degree;

        let direction = |delta: f64, ds: &DVector<f64>, dk: f64| {
            let r3 = -(&rz * delta) - w.apply(cones, &cones.jordan_div(&lam, ds), false);
            let [u2x, u2y, u2z] = kkt.solve(&(-(&rx * delta)), &(&ry * delta), &r3);
            let dtau = (-delta * rt - dk / tau - (d.c.dot(&u2x) + d.b.dot(&u2y) + d.h.dot(&u2z))) / denom;
            let dx = &u1x * dtau + u2x;
            let dy = &u1y * dtau + u2y;
            let dz = &u1z * dtau + u2z;
            let dsv = w.apply(cones, &cones.jordan_div(&lam, ds), false) - w.apply_sq(cones, &dz, false);
            let dkap = (dk - kappa * dtau) / tau;
            (dx, dy, dz, dsv, dtau, dkap)
        };
        let step = |dsv: &DVector<f64>, dz: &DVector<f64>, dtau: f64, dkap: f64| {
            let mut a = cones.max_step(&s, dsv).min(cones.max_step(&z, dz));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkap < 0.0 {
                a = a.min(-kappa / dkap);
            }
            a
        };

        let ds_aff = -cones.jordan(&lam, &lam);
        let (_, _, dz_a, ds_a, dtau_a, dkap_a) = direction(1.0, &ds_aff, -kappa * tau);
        let alpha_a = step(&ds_a, &dz_a, dtau_a, dkap_a).min(1.0);
        let sigma = (1.0 - alpha_a).clamp(0.0, 1.0).powi(3);

        let corr = cones.jordan(&w.apply(cones, &ds_a, true), &w.apply(cones, &dz_a, false));
        let ds_c = &ds_aff + &e * (sigma * mu) - corr;
        let dk_c = -kappa * tau + sigma * mu - dtau_a * dkap_a;
        let (dx, dy, dz, dsv, dtau, dkap) = direction(1.0 - sigma, &ds_c, dk_c);
        let alpha = (0.99 * step(&dsv, &dz, dtau, dkap)).min(1.0);
        if !alpha.is_finite() || alpha <= 0.0 {
            break;
        }
        x += &dx * alpha;
        y += &dy * alpha;
        z += &dz * alpha;
        s += &dsv * alpha;
        tau += dtau * alpha;
        kappa += dkap * alpha;
        if !(tau > 0.0 && kappa > 0.0) || x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    let xs: Vec<f64> = (&x / tau).iter().copied().collect();
    (SolveStatus::MaxIter, Some(xs), opts.max_iter, last.0, last.1)
}
