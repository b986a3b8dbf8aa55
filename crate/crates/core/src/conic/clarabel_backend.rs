use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};

use super::{Clock, ConicProblem, ConicSolver, SolveOptions, SolveReport, SolveStatus};
use crate::error::{Error, Result};

/// Adapter over the Clarabel interior-point solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClarabelBackend;

impl ConicSolver for ClarabelBackend {
    fn solve(&self, problem: &ConicProblem, opts: &SolveOptions) -> Result<SolveReport> {
        problem.validate()?;
        opts.check()?;
        let clock = Clock::start();
        let n = problem.var_count;
        let (mut ri, mut ci, mut vi) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut row = 0;
        for rows in [problem.equalities(), problem.inequalities()] {
            for r in 0..rows.len() {
                let (idx, val) = rows.row(r);
                for (&j, &v) in idx.iter().zip(val) {
                    ri.push(row);
                    ci.push(j);
                    vi.push(v);
                }
                b.push(rows.rhs()[r]);
                row += 1;
            }
        }
        if !problem.equalities().is_empty() {
            cones.push(ZeroConeT(problem.equalities().len()));
        }
        if !problem.inequalities().is_empty() {
            cones.push(NonnegativeConeT(problem.inequalities().len()));
        }
        for blk in problem.soc_blocks() {
            for &j in std::iter::once(&blk.t).chain(&blk.u) {
                ri.push(row);
                ci.push(j);
                vi.push(-1.0);
                b.push(0.0);
                row += 1;
            }
            cones.push(SecondOrderConeT(blk.u.len() + 1));
        }
        let a = CscMatrix::new_from_triplets(row, n, ri, ci, vi);
        let p = CscMatrix::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(opts.max_iter as u32)
            .tol_gap_abs(opts.tol)
            .tol_gap_rel(opts.tol)
            .tol_feas(opts.tol)
            .tol_infeas_abs(opts.tol)
            .tol_infeas_rel(opts.tol)
            .max_threads(1)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("solver settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, problem.objective(), &a, &b, &cones, settings)
            .map_err(|e| Error::InvalidArgument(format!("solver setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let iterations = sol.iterations as usize;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved | SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIter,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ => SolveStatus::NumericalError,
        };
        if !matches!(status, SolveStatus::Optimal | SolveStatus::MaxIter) || sol.x.iter().any(|v| !v.is_finite()) {
            let status = if status == SolveStatus::MaxIter { SolveStatus::NumericalError } else { status };
            return Ok(SolveReport::without_primal(status, iterations, clock.elapsed()));
        }
        let x = sol.x.clone();
        let info = &solver.info;
        Ok(SolveReport {
            status,
            objective_value: problem.objective_at(&x),
            primal_residual: problem.primal_residual(&x),
            dual_residual: info.res_dual.abs(),
            gap: info.gap_abs.min(info.gap_rel).abs(),
            primal: Some(x),
            iterations,
            wall_time: clock.elapsed(),
        })
    }
}
