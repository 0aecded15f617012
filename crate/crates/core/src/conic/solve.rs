use std::time::Duration;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{ConicProblem, ConicSolution, ConstraintBody, LinExpr, Sense, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Interior-point feasibility and duality-gap tolerance.
    pub tol: f64,
    pub max_iter: u32,
    /// Largest relative constraint violation accepted for an optimal status.
    pub max_violation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            max_violation: 1e-7,
        }
    }
}

pub fn solve(problem: &ConicProblem) -> ConicSolution {
    solve_with(problem, &SolverOptions::default())
}

#[derive(Default)]
struct Assembly {
    rows_i: Vec<usize>,
    cols_j: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Assembly {
    /// Appends `expr ∈ cone-row`, i.e. `s = b − A x = expr(x)`.
    fn row(&mut self, expr: &LinExpr, scale: f64) {
        let r = self.b.len();
        for &(v, c) in &expr.terms {
            if c != 0.0 {
                self.rows_i.push(r);
                self.cols_j.push(v);
                self.vals.push(-c * scale);
            }
        }
        self.b.push(expr.constant * scale);
    }

    fn push_cone(&mut self, cone: SupportedConeT<f64>) {
        use SupportedConeT::*;
        match (self.cones.last_mut(), &cone) {
            (Some(ZeroConeT(d)), ZeroConeT(e)) => *d += e,
            (Some(NonnegativeConeT(d)), NonnegativeConeT(e)) => *d += e,
            _ => self.cones.push(cone),
        }
    }
}

fn assemble(problem: &ConicProblem) -> Result<Assembly, String> {
    let mut a = Assembly::default();
    for c in &problem.constraints {
        match &c.body {
            ConstraintBody::Eq(e) => {
                a.row(e, 1.0);
                a.push_cone(SupportedConeT::ZeroConeT(1));
            }
            ConstraintBody::Geq(e) => {
                a.row(e, 1.0);
                a.push_cone(SupportedConeT::NonnegativeConeT(1));
            }
            ConstraintBody::Soc { bound, rows } => {
                a.row(bound, 1.0);
                rows.iter().for_each(|r| a.row(r, 1.0));
                a.push_cone(SupportedConeT::SecondOrderConeT(1 + rows.len()));
            }
            ConstraintBody::QuadLe { rows, bound } => {
                // ‖u‖² ≤ t  ⇔  ‖(u, (t−1)/2)‖ ≤ (t+1)/2
                a.row(&bound.clone().plus(1.0), 0.5);
                a.row(&bound.clone().plus(-1.0), 0.5);
                rows.iter().for_each(|r| a.row(r, 1.0));
                a.push_cone(SupportedConeT::SecondOrderConeT(2 + rows.len()));
            }
            ConstraintBody::Psd { dim, upper } => {
                #[cfg(feature = "sdp")]
                {
                    let mut idx = 0;
                    for j in 0..*dim {
                        for i in 0..=j {
                            let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                            a.row(&upper[idx], scale);
                            idx += 1;
                        }
                    }
                    a.push_cone(SupportedConeT::PSDTriangleConeT(*dim));
                }
                #[cfg(not(feature = "sdp"))]
                {
                    let _ = (dim, upper);
                    return Err(format!(
                        "constraint {:?} needs a semidefinite cone; build with the `sdp` feature",
                        c.label
                    ));
                }
            }
        }
    }
    Ok(a)
}

fn failure(problem: &ConicProblem) -> ConicSolution {
    ConicSolution {
        status: SolveStatus::NumericalFailure,
        values: vec![0.0; problem.n_vars()],
        objective_value: f64::NAN,
        solve_time: Duration::ZERO,
        iterations: 0,
        max_violation: f64::INFINITY,
        backend_status: "setup failed".into(),
    }
}

/// Solves `problem` with an interior-point method.
///
/// An optimal status is only reported when the returned point satisfies every
/// constraint to within `opts.max_violation`; otherwise the status is
/// [`SolveStatus::NumericalFailure`].
pub fn solve_with(problem: &ConicProblem, opts: &SolverOptions) -> ConicSolution {
    let n = problem.n_vars();
    let asm = match assemble(problem) {
        Ok(a) => a,
        Err(_) => return failure(problem),
    };
    let m = asm.b.len();
    let a_mat = CscMatrix::new_from_triplets(m, n, asm.rows_i, asm.cols_j, asm.vals);
    let p_mat = CscMatrix::<f64>::zeros((n, n));
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut q = vec![0.0; n];
    for &(v, c) in &problem.objective.terms {
        q[v] += sign * c;
    }
    let settings = match DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(opts.max_iter)
        .tol_gap_abs(opts.tol)
        .tol_gap_rel(opts.tol)
        .tol_feas(opts.tol)
        .build()
    {
        Ok(s) => s,
        Err(_) => return failure(problem),
    };
    let mut solver = match DefaultSolver::new(&p_mat, &q, &a_mat, &asm.b, &asm.cones, settings) {
        Ok(s) => s,
        Err(_) => return failure(problem),
    };
    solver.solve();
    let sol = &solver.solution;
    let values = sol.x.clone();
    let max_violation = problem.max_violation(&values);
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved if max_violation <= opts.max_violation => {
            SolveStatus::Optimal
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        _ => SolveStatus::NumericalFailure,
    };
    ConicSolution {
        status,
        objective_value: problem.objective.eval(&values),
        values,
        solve_time: Duration::from_secs_f64(sol.solve_time.max(0.0)),
        iterations: sol.iterations,
        max_violation,
        backend_status: format!("{:?}", sol.status),
    }
}
