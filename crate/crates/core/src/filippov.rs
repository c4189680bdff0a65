//! Successive approximations producing a selection `z(t) in F(t, x_z(t))`.
//!
//! Starting from the reference trajectory `q` and `z_0 = ` minimal-norm
//! selection of `F(t, q(t))`, each round solves with the current selection
//! and moves every node value to the nearest point of `F` along the new
//! trajectory.

use crate::bounds::BoundCertificate;
use crate::error::{Error, Result};
use crate::fields::{minimal_norm_selection, Problem};
use crate::grid::{GridFunction, GridKind, TimeGrid};
use crate::linalg::{self, Point};
use crate::stepper::{solve_fixed_selection, solve_unperturbed, Trajectory};
use crate::tolerance::TOL_FLOOR_FACTOR;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub i: usize,
    /// `max_k |y_{i+1,k} - y_{i,k}|`
    pub sup_y_delta: f64,
    /// `max_k |z_{i+1,k} - z_{i,k}|`
    pub sup_z_delta: f64,
    /// Factorial bound on `sup_y_delta` at `t = T`.
    pub factorial_bound: f64,
    /// Distance of `z_i` from `F(t, x_{z_i})` over the nodes.
    pub selection_residual: f64,
    /// `max_k (|z_{i+1,k} - z_{i,k}| - k(t_k) |x_{i,k} - x_{i-1,k}| - 2 eps_F)`,
    /// nonpositive when the Lipschitz chain holds.
    pub lipschitz_chain_excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    SmallIncrement,
    FactorialBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Index `i` of the returned pair `(z_i, x_{z_i})`.
    pub converged_at: Option<usize>,
    pub iterations_used: usize,
    pub stop_reason: Option<StopReason>,
    pub requested_tol: f64,
    /// Tolerance after clamping at the discretization floor.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub z: GridFunction,
    pub trajectory: Trajectory,
    pub reference: Trajectory,
    pub report: IterationReport,
}

/// `new_z_k = nearest point of F(t_k, x_k) to prev_z_k`.
pub fn refine_selection(problem: &Problem, prev_z: &GridFunction, current_x: &GridFunction) -> Result<GridFunction> {
    if !prev_z.same_grid(current_x) {
        return Err(Error::GridMismatch);
    }
    let values = prev_z
        .grid
        .nodes()
        .iter()
        .zip(&prev_z.values)
        .zip(&current_x.values)
        .map(|((&t, z), x)| problem.perturbation.nearest(t, x, z))
        .collect();
    GridFunction::new(prev_z.grid.clone(), values, GridKind::Selection)
}

/// `max_k d(z_k, F(t_k, x_k))`
pub fn selection_residual(problem: &Problem, z: &GridFunction, traj: &Trajectory) -> Result<f64> {
    if !z.same_grid(&traj.x) {
        return Err(Error::GridMismatch);
    }
    Ok(z.grid
        .nodes()
        .iter()
        .zip(&z.values)
        .zip(&traj.x.values)
        .map(|((&t, zk), x)| linalg::dist(&problem.perturbation.nearest(t, x, zk), zk))
        .fold(0.0, f64::max))
}

/// `10 h (1 + sup gamma)` over the grid.
pub fn tolerance_floor(problem: &Problem, grid: &TimeGrid) -> f64 {
    let sup_gamma = grid
        .nodes()
        .iter()
        .map(|&t| problem.perturbation.gamma(t))
        .fold(0.0, f64::max);
    TOL_FLOOR_FACTOR * grid.max_step() * (1.0 + sup_gamma)
}

/// Runs the iteration with a freshly computed certificate.
pub fn iterate(problem: &Problem, grid: &Arc<TimeGrid>, tol: f64, max_iter: usize) -> Result<IterationOutcome> {
    let cert = BoundCertificate::for_problem(problem, grid)?;
    iterate_with_certificate(problem, grid, &cert, tol, max_iter)
}

pub fn iterate_with_certificate(
    problem: &Problem,
    grid: &Arc<TimeGrid>,
    cert: &BoundCertificate,
    tol: f64,
    max_iter: usize,
) -> Result<IterationOutcome> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let floor = tolerance_floor(problem, grid);
    let effective_tol = if tol < floor {
        log::warn!("tolerance {tol:e} is below the discretization floor {floor:e}; using the floor");
        floor
    } else {
        tol
    };
    let nodes = grid.nodes();
    let eps_f = problem.perturbation.tolerance();

    let reference = solve_unperturbed(problem, grid)?;
    let z0: Vec<Point> = nodes
        .iter()
        .zip(reference.states())
        .map(|(&t, q)| minimal_norm_selection(problem.perturbation.as_ref(), t, q))
        .collect();
    let mut z = GridFunction::new(grid.clone(), z0, GridKind::Selection)?;
    let mut y_prev = GridFunction::zeros(grid.clone(), problem.dim(), GridKind::State);
    let mut zeta_prev = reference.x.clone();

    let mut report = IterationReport {
        records: Vec::new(),
        converged: false,
        converged_at: None,
        iterations_used: 0,
        stop_reason: None,
        requested_tol: tol,
        tol: effective_tol,
        max_iter,
    };

    for i in 0..max_iter {
        let zeta = solve_fixed_selection(problem, &z, grid)?;
        let y_values = zeta
            .states()
            .iter()
            .zip(reference.states())
            .map(|(x, q)| linalg::sub(x, q))
            .collect();
        let y = GridFunction::new(grid.clone(), y_values, GridKind::State)?;
        let sup_y_delta = y.sup_distance(&y_prev)?;
        let z_next = refine_selection(problem, &z, &zeta.x)?;
        let sup_z_delta = z_next.sup_distance(&z)?;

        let mut chain_excess = f64::NEG_INFINITY;
        for (k, &t) in nodes.iter().enumerate() {
            let lhs = linalg::dist(&z_next.values[k], &z.values[k]);
            let rhs = problem.perturbation.lipschitz(t) * linalg::dist(&zeta.x.values[k], &zeta_prev.values[k]);
            chain_excess = chain_excess.max(lhs - rhs - 2.0 * eps_f);
        }

        let factorial_bound = cert.factorial_bound(i as u32, problem.t_end);
        report.records.push(IterationRecord {
            i,
            sup_y_delta,
            sup_z_delta,
            factorial_bound,
            selection_residual: sup_z_delta,
            lipschitz_chain_excess: chain_excess,
        });
        report.iterations_used = i + 1;
        log::debug!("iteration {i}: sup_y_delta={sup_y_delta:e} factorial_bound={factorial_bound:e}");

        let reason = if sup_y_delta <= effective_tol {
            Some(StopReason::SmallIncrement)
        } else if factorial_bound <= effective_tol {
            Some(StopReason::FactorialBound)
        } else {
            None
        };
        if let Some(reason) = reason {
            report.converged = true;
            report.converged_at = Some(i);
            report.stop_reason = Some(reason);
            return Ok(IterationOutcome {
                z,
                trajectory: zeta,
                reference,
                report,
            });
        }
        z = z_next;
        y_prev = y;
        zeta_prev = zeta.x;
    }
    Err(Error::MaxIterationsExceeded(Box::new(report)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        DriftConfig, KernelConfig, PerturbationConfig, PerturbationShape, ProblemConfig, VolterraRule,
    };
    use crate::geometry::{SetConfig, SetShape};

    fn free_problem(perturbation: PerturbationShape) -> Problem {
        Problem::from_config(&ProblemConfig {
            interval: [0.0, 1.0],
            x0: vec![0.0],
            q0: None,
            r0: None,
            set: SetConfig::new(SetShape::Free { dim: 1 }),
            drift: DriftConfig::Zero,
            kernel: KernelConfig::Zero,
            perturbation: PerturbationConfig::new(perturbation),
            quadrature: VolterraRule::LeftRectangle,
        })
        .unwrap()
    }

    fn grid() -> Arc<TimeGrid> {
        Arc::new(TimeGrid::uniform(0.0, 1.0, 1e-2).unwrap())
    }

    #[test]
    fn refine_examples() {
        let g = grid();
        let x = GridFunction::zeros(g.clone(), 1, GridKind::State);
        let single = free_problem(PerturbationShape::Singleton { value: vec![0.4] });
        let z = GridFunction::constant(g.clone(), &[-3.0], GridKind::Selection);
        assert!(refine_selection(&single, &z, &x)
            .unwrap()
            .values
            .iter()
            .all(|v| v == &vec![0.4]));

        let two = free_problem(PerturbationShape::FiniteSet {
            points: vec![vec![-1.0], vec![1.0]],
        });
        let z = GridFunction::constant(g.clone(), &[-1.0], GridKind::Selection);
        assert_eq!(refine_selection(&two, &z, &x).unwrap(), z);

        let ball = free_problem(PerturbationShape::Ball {
            center: vec![0.0],
            radius: 2.0,
        });
        let z = GridFunction::constant(g.clone(), &[1.5], GridKind::Selection);
        assert_eq!(refine_selection(&ball, &z, &x).unwrap(), z);
    }

    #[test]
    fn residual_examples() {
        let g = grid();
        let two = free_problem(PerturbationShape::FiniteSet {
            points: vec![vec![-1.0], vec![1.0]],
        });
        let z = GridFunction::zeros(g.clone(), 1, GridKind::Selection);
        let traj = solve_unperturbed(&two, &g).unwrap();
        assert_eq!(selection_residual(&two, &z, &traj).unwrap(), 1.0);
        let other = GridFunction::zeros(
            Arc::new(TimeGrid::uniform(0.0, 1.0, 0.5).unwrap()),
            1,
            GridKind::Selection,
        );
        assert_eq!(selection_residual(&two, &other, &traj), Err(Error::GridMismatch));
    }

    #[test]
    fn two_point_map_converges_at_first_iteration() {
        let p = free_problem(PerturbationShape::FiniteSet {
            points: vec![vec![-1.0], vec![1.0]],
        });
        let g = grid();
        let out = iterate(&p, &g, 1e-6, 10).unwrap();
        assert_eq!(out.report.converged_at, Some(1));
        assert!(out.z.values.iter().all(|v| v == &vec![-1.0]));
        assert_eq!(selection_residual(&p, &out.z, &out.trajectory).unwrap(), 0.0);
        for (x, t) in out.trajectory.states().iter().zip(g.nodes()) {
            assert!((x[0] - t).abs() <= 1e-12);
        }
    }

    #[test]
    fn singleton_map_converges_at_first_iteration() {
        let p = free_problem(PerturbationShape::Singleton { value: vec![0.5] });
        let out = iterate(&p, &grid(), 1e-6, 10).unwrap();
        assert_eq!(out.report.converged_at, Some(1));
        assert!(out.z.values.iter().all(|v| v == &vec![0.5]));
    }

    #[test]
    fn ball_map_keeps_reference_solution() {
        let p = free_problem(PerturbationShape::Ball {
            center: vec![0.0],
            radius: 0.7,
        });
        let out = iterate(&p, &grid(), 1e-6, 10).unwrap();
        assert_eq!(out.report.converged_at, Some(0));
        assert_eq!(out.trajectory.x, out.reference.x);
    }

    #[test]
    fn tolerance_is_clamped_at_the_floor() {
        let p = free_problem(PerturbationShape::FiniteSet {
            points: vec![vec![-1.0], vec![1.0]],
        });
        let out = iterate(&p, &grid(), 1e-12, 10).unwrap();
        assert_eq!(out.report.requested_tol, 1e-12);
        assert!((out.report.tol - 10.0 * 1e-2 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_map_converges_with_factorial_domination() {
        let p = free_problem(PerturbationShape::LipschitzTwoPoint {
            base: 1.0,
            amplitude: 0.5,
        });
        let g = grid();
        let cert = BoundCertificate::for_problem(&p, &g).unwrap();
        let out = iterate_with_certificate(&p, &g, &cert, 1e-6, 30).unwrap();
        assert!(out.report.converged);
        for rec in &out.report.records {
            assert!(rec.sup_y_delta <= 1.1 * rec.factorial_bound + cert.slack, "{rec:?}");
            assert!(rec.lipschitz_chain_excess <= 0.0, "{rec:?}");
        }
    }

    #[test]
    fn exhausted_budget_returns_the_report() {
        let p = free_problem(PerturbationShape::LipschitzTwoPoint {
            base: 1.0,
            amplitude: 0.5,
        });
        match iterate(&p, &grid(), 1e-6, 1) {
            Err(Error::MaxIterationsExceeded(report)) => {
                assert_eq!(report.records.len(), 1);
                assert!(!report.converged);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
