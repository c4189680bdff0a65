//! Catching-up time stepping for the sweeping process with a fixed selection.
//!
//! Each step evaluates the single-valued data explicitly at `(t_k, x_k)` and
//! projects the predictor onto `C(t_{k+1})`:
//!
//! ```text
//! x_{k+1} = Proj_{C(t_{k+1})}( x_k - h_k [ f1(t_k, x_k) + V_k + z_k ] )
//! V_k     = sum_{j<k} h_j f2(t_k, t_j, x_j)
//! ```
//!
//! so every node is feasible by construction.

use crate::bounds::BoundCertificate;
use crate::error::{Error, Result};
use crate::fields::{Problem, VolterraRule};
use crate::geometry::{self, project};
use crate::grid::{GridFunction, GridKind, TimeGrid};
use crate::linalg::{self, Point};
use crate::signal::Signal;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::sync::Arc;

/// Output of one catching-up solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: GridFunction,
    /// Backward differences at the right node; `xdot[0]` repeats `xdot[1]`.
    pub xdot: GridFunction,
    pub z: GridFunction,
    /// Memory term `V_k` used in the step leaving node `k`.
    pub volterra: GridFunction,
    /// `d(x_k, C(t_k))`
    pub residuals: Vec<f64>,
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.x.grid
    }

    pub fn states(&self) -> &[Point] {
        &self.x.values
    }

    pub fn final_state(&self) -> &[f64] {
        self.x.values.last().expect("nonempty trajectory")
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Writes `t, x_0.., z_0.., dist_C, volterra_norm`, one row per node,
    /// with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let d = self.x.dim();
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x_{i}")));
        header.extend((0..d).map(|i| format!("z_{i}")));
        header.push("dist_C".into());
        header.push("volterra_norm".into());
        writeln!(out, "{}", header.join(","))?;
        for (k, t) in self.grid().nodes().iter().enumerate() {
            let mut row = vec![fmt17(*t)];
            row.extend(self.x.values[k].iter().map(|v| fmt17(*v)));
            row.extend(self.z.values[k].iter().map(|v| fmt17(*v)));
            row.push(fmt17(self.residuals[k]));
            row.push(fmt17(linalg::norm(&self.volterra.values[k])));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn kernel_at(problem: &Problem, t: f64, s: f64, x: &[f64]) -> Result<Point> {
    if s > t {
        return Err(Error::KernelDomain { t, s });
    }
    Ok(problem.kernel.eval(t, s, x))
}

/// Composite quadrature of `int_{T0}^{t_k} f2(t_k, s, x(s)) ds` on the grid,
/// using the rule of the problem. The left-rectangle rule needs `states[..k]`,
/// the trapezoid rule also `states[k]`.
pub fn volterra_term(problem: &Problem, grid: &TimeGrid, states: &[Point], k: usize) -> Result<Point> {
    let needed = match problem.quadrature {
        VolterraRule::LeftRectangle => k,
        VolterraRule::Trapezoid => k + 1,
    };
    if k >= grid.len() || states.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "memory term at node {k} needs {needed} states, got {}",
            states.len()
        )));
    }
    let nodes = grid.nodes();
    let tk = nodes[k];
    let mut acc = linalg::zeros(problem.dim());
    for j in 0..k {
        let h = grid.step(j);
        match problem.quadrature {
            VolterraRule::LeftRectangle => {
                linalg::add_scaled_assign(&mut acc, h, &kernel_at(problem, tk, nodes[j], &states[j])?);
            }
            VolterraRule::Trapezoid => {
                let a = kernel_at(problem, tk, nodes[j], &states[j])?;
                let b = kernel_at(problem, tk, nodes[j + 1], &states[j + 1])?;
                linalg::add_scaled_assign(&mut acc, 0.5 * h, &a);
                linalg::add_scaled_assign(&mut acc, 0.5 * h, &b);
            }
        }
    }
    Ok(acc)
}

/// Running sums for kernels `a(t) b(s) x`; O(1) work per node.
struct SeparableMemory {
    outer: Signal,
    inner: Signal,
    sum: Point,
}

enum Memory {
    Separable(SeparableMemory),
    Generic,
}

impl Memory {
    fn new(problem: &Problem) -> Self {
        match problem.kernel.separable() {
            Some((outer, inner)) => Memory::Separable(SeparableMemory {
                outer,
                inner,
                sum: linalg::zeros(problem.dim()),
            }),
            None => Memory::Generic,
        }
    }

    /// `V_k` given `states[..=k]`; must be called for `k = 0, 1, ...` in order.
    fn term(&mut self, problem: &Problem, grid: &TimeGrid, states: &[Point], k: usize) -> Result<Point> {
        match self {
            Memory::Generic => volterra_term(problem, grid, states, k),
            Memory::Separable(m) => {
                let nodes = grid.nodes();
                if k > 0 {
                    let h = grid.step(k - 1);
                    match problem.quadrature {
                        VolterraRule::LeftRectangle => {
                            let w = h * m.inner.value(nodes[k - 1]);
                            linalg::add_scaled_assign(&mut m.sum, w, &states[k - 1]);
                        }
                        VolterraRule::Trapezoid => {
                            let wa = 0.5 * h * m.inner.value(nodes[k - 1]);
                            let wb = 0.5 * h * m.inner.value(nodes[k]);
                            linalg::add_scaled_assign(&mut m.sum, wa, &states[k - 1]);
                            linalg::add_scaled_assign(&mut m.sum, wb, &states[k]);
                        }
                    }
                }
                Ok(linalg::scale(&m.sum, m.outer.value(nodes[k])))
            }
        }
    }
}

/// Solves the inclusion with the selection `z` from `problem.x0`.
pub fn solve_fixed_selection(problem: &Problem, z: &GridFunction, grid: &Arc<TimeGrid>) -> Result<Trajectory> {
    solve_from(problem, &problem.x0, z, grid)
}

/// The reference trajectory `q`: no selection, started at `problem.q0`.
pub fn solve_unperturbed(problem: &Problem, grid: &Arc<TimeGrid>) -> Result<Trajectory> {
    let z = GridFunction::zeros(grid.clone(), problem.dim(), GridKind::Selection);
    solve_from(problem, &problem.q0, &z, grid)
}

/// Catching-up solve from an arbitrary feasible initial point.
pub fn solve_from(problem: &Problem, x0: &[f64], z: &GridFunction, grid: &Arc<TimeGrid>) -> Result<Trajectory> {
    let dim = problem.dim();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x0.len(),
        });
    }
    if z.grid.as_ref() != grid.as_ref() {
        return Err(Error::GridMismatch);
    }
    if z.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: z.dim(),
        });
    }
    let set = problem.set.as_ref();
    let t0 = grid.t0();
    let d0 = set.distance(t0, x0);
    if d0 > set.tolerance() * (1.0 + linalg::norm(x0)) {
        return Err(Error::InfeasibleInitialPoint { distance: d0 });
    }

    let nodes = grid.nodes();
    let n = grid.steps();
    let mut memory = Memory::new(problem);
    let mut states: Vec<Point> = Vec::with_capacity(n + 1);
    let mut volterra: Vec<Point> = Vec::with_capacity(n + 1);
    states.push(x0.to_vec());
    for k in 0..n {
        let v = memory.term(problem, grid, &states, k)?;
        let xk = &states[k];
        let mut force = problem.drift.eval(nodes[k], xk);
        linalg::add_assign(&mut force, &v);
        linalg::add_assign(&mut force, &z.values[k]);
        let predictor = linalg::axpy(xk, -grid.step(k), &force);
        if !linalg::all_finite(&predictor) {
            return Err(Error::Oracle(format!("non-finite predictor at t={}", nodes[k])));
        }
        let next = project(set, nodes[k + 1], &predictor)?;
        states.push(next);
        volterra.push(v);
    }
    volterra.push(memory.term(problem, grid, &states, n)?);

    let mut xdot: Vec<Point> = Vec::with_capacity(n + 1);
    xdot.push(Vec::new());
    for k in 1..=n {
        xdot.push(linalg::scale(
            &linalg::sub(&states[k], &states[k - 1]),
            1.0 / grid.step(k - 1),
        ));
    }
    xdot[0] = xdot[1].clone();
    let residuals = states.iter().zip(nodes).map(|(x, &t)| set.distance(t, x)).collect();

    Ok(Trajectory {
        x: GridFunction::new(grid.clone(), states, GridKind::State)?,
        xdot: GridFunction::new(grid.clone(), xdot, GridKind::Derivative)?,
        z: z.clone(),
        volterra: GridFunction::new(grid.clone(), volterra, GridKind::Selection)?,
        residuals,
    })
}

/// Retries a uniform-grid solve with halved steps after a region violation.
/// The selection is resampled (piecewise constant) onto each new grid.
pub fn solve_with_halving(problem: &Problem, z: &GridFunction, h: f64, max_halvings: usize) -> Result<Trajectory> {
    let mut h = h;
    let mut attempt = 0;
    loop {
        let grid = Arc::new(TimeGrid::uniform(problem.t0, problem.t_end, h)?);
        let zg = z.resample(grid.clone());
        match solve_fixed_selection(problem, &zg, &grid) {
            Err(Error::RegionViolation { .. }) if attempt < max_halvings => {
                log::warn!("region violation at h={h}; halving the step");
                h *= 0.5;
                attempt += 1;
            }
            other => return other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub nodes: usize,
    pub violations: usize,
    /// `max(lhs - rhs - slack)`
    pub max_excess: f64,
    /// `max(lhs / rhs)` over nodes with a positive right-hand side.
    pub max_ratio: f64,
}

/// Checks the stability estimate between two solves on the same grid:
/// `|x1_k - x2_k| <= Phi (|x1_0 - x2_0| + sum_{j<k} h_j |z1_j - z2_j|) + slack`.
pub fn deviation_check(a: &Trajectory, b: &Trajectory, cert: &BoundCertificate) -> Result<DeviationReport> {
    if !a.x.same_grid(&b.x) || !a.z.same_grid(&b.z) {
        return Err(Error::GridMismatch);
    }
    let grid = a.grid();
    let n = grid.len();
    let mut report = DeviationReport {
        nodes: n,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
        max_ratio: 0.0,
    };
    let mut integral = 0.0;
    let initial = linalg::dist(&a.x.values[0], &b.x.values[0]);
    for k in 0..n {
        if k > 0 {
            integral += grid.step(k - 1) * linalg::dist(&a.z.values[k - 1], &b.z.values[k - 1]);
        }
        let lhs = linalg::dist(&a.x.values[k], &b.x.values[k]);
        let rhs = linalg::bound_mul(cert.phi_const, initial + integral);
        let excess = lhs - rhs - cert.slack;
        report.max_excess = report.max_excess.max(excess);
        if excess > 0.0 {
            report.violations += 1;
        }
        if rhs > 0.0 {
            report.max_ratio = report.max_ratio.max(lhs / rhs);
        } else if lhs > 0.0 {
            report.max_ratio = f64::INFINITY;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub checked: usize,
    pub failures: usize,
    pub max_deviation: f64,
}

/// Verifies that the discrete residual
/// `-xdot - f1(t_k, x_k) - V_k - z_k` is a proximal normal at `x_{k+1}`.
pub fn inclusion_residual_check(problem: &Problem, traj: &Trajectory) -> Result<InclusionReport> {
    let grid = traj.grid();
    let nodes = grid.nodes();
    let set = problem.set.as_ref();
    let mut report = InclusionReport {
        checked: 0,
        failures: 0,
        max_deviation: 0.0,
    };
    for k in 0..grid.steps() {
        let h = grid.step(k);
        let xk = &traj.x.values[k];
        let next = &traj.x.values[k + 1];
        let mut r = linalg::scale(&traj.xdot.values[k + 1], -1.0);
        linalg::add_scaled_assign(&mut r, -1.0, &problem.drift.eval(nodes[k], xk));
        linalg::add_scaled_assign(&mut r, -1.0, &traj.volterra.values[k]);
        linalg::add_scaled_assign(&mut r, -1.0, &traj.z.values[k]);
        let rn = linalg::norm(&r);
        // below rounding level the residual carries no direction
        let scale = 1.0 + linalg::norm(next) / h;
        if rn <= 1e-12 * scale {
            continue;
        }
        let v = linalg::scale(&r, 1.0 / rn);
        let step = geometry::normal_test_step(set, h);
        let deviation = geometry::normal_deviation(set, nodes[k + 1], next, &v, step)?;
        report.checked += 1;
        report.max_deviation = report.max_deviation.max(deviation);
        if deviation > crate::tolerance::TOL_NORMAL * (1.0 + linalg::norm(next)) {
            report.failures += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{DriftConfig, KernelConfig, PerturbationConfig, ProblemConfig, VolterraKernel};
    use crate::geometry::{SetConfig, SetShape};
    use approx::assert_abs_diff_eq;

    fn config(set: SetConfig, x0: Vec<f64>) -> ProblemConfig {
        let dim = x0.len();
        ProblemConfig {
            interval: [0.0, 1.0],
            x0,
            q0: None,
            r0: None,
            set,
            drift: DriftConfig::Zero,
            kernel: KernelConfig::Zero,
            perturbation: PerturbationConfig::zero(dim),
            quadrature: VolterraRule::LeftRectangle,
        }
    }

    fn free(dim: usize) -> SetConfig {
        SetConfig::new(SetShape::Free { dim })
    }

    fn wall() -> SetConfig {
        SetConfig::new(SetShape::HalfSpace {
            normal: vec![1.0],
            offset: 0.0,
        })
        .moving(vec![1.0], Signal::Linear { value: 0.0, slope: 1.0 })
    }

    fn grid(h: f64) -> Arc<TimeGrid> {
        Arc::new(TimeGrid::uniform(0.0, 1.0, h).unwrap())
    }

    #[test]
    fn memory_term_of_empty_prefix_is_zero() {
        let mut cfg = config(free(1), vec![1.0]);
        cfg.kernel = KernelConfig::Memory { scale: 1.0 };
        let p = Problem::from_config(&cfg).unwrap();
        let g = grid(0.1);
        assert_eq!(volterra_term(&p, &g, &[], 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn memory_term_of_constant_kernel() {
        let mut cfg = config(free(1), vec![0.0]);
        cfg.kernel = KernelConfig::Constant { value: vec![1.0] };
        let p = Problem::from_config(&cfg).unwrap();
        let g = grid(0.01);
        let states = vec![vec![0.0]; g.len()];
        let v = volterra_term(&p, &g, &states, g.steps()).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-12);
        let v = volterra_term(&p, &g, &states, 37).unwrap();
        assert_abs_diff_eq!(v[0], 0.37, epsilon = 1e-12);
    }

    #[test]
    fn memory_term_of_cosine_history() {
        let mut cfg = config(free(1), vec![1.0]);
        cfg.kernel = KernelConfig::Memory { scale: 1.0 };
        let p = Problem::from_config(&cfg).unwrap();
        let g = grid(1e-3);
        let states: Vec<Point> = g.nodes().iter().map(|t| vec![t.cos()]).collect();
        let v = volterra_term(&p, &g, &states, g.steps()).unwrap();
        assert!((v[0] - 1f64.sin()).abs() <= 1e-3);
        let trap = p.clone().with_quadrature(VolterraRule::Trapezoid);
        let v = volterra_term(&trap, &g, &states, g.steps()).unwrap();
        assert!((v[0] - 1f64.sin()).abs() <= 1e-6);
    }

    #[test]
    fn moving_wall_is_reproduced_exactly() {
        let p = Problem::from_config(&config(wall(), vec![0.0])).unwrap();
        for h in [1e-2, 1e-3] {
            let g = grid(h);
            let traj = solve_unperturbed(&p, &g).unwrap();
            for (x, t) in traj.states().iter().zip(g.nodes()) {
                assert!((x[0] - t).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn volterra_oscillator_tracks_cosine() {
        let mut cfg = config(free(1), vec![1.0]);
        cfg.kernel = KernelConfig::Memory { scale: 1.0 };
        let p = Problem::from_config(&cfg).unwrap();
        let traj = solve_unperturbed(&p, &grid(1e-3)).unwrap();
        assert!((traj.final_state()[0] - 1f64.cos()).abs() <= 5e-3);
    }

    #[test]
    fn clamped_selection_keeps_point_on_boundary() {
        let p = Problem::from_config(&config(
            SetConfig::new(SetShape::HalfSpace {
                normal: vec![1.0],
                offset: 0.0,
            }),
            vec![0.0],
        ))
        .unwrap();
        let g = grid(1e-2);
        let z = GridFunction::constant(g.clone(), &[0.7], GridKind::Selection);
        let traj = solve_fixed_selection(&p, &z, &g).unwrap();
        assert!(traj.states().iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn linear_decay() {
        let mut cfg = config(free(1), vec![1.0]);
        cfg.drift = DriftConfig::Linear {
            matrix: vec![vec![1.0]],
            forcing: None,
            signal: None,
        };
        let p = Problem::from_config(&cfg).unwrap();
        let traj = solve_unperturbed(&p, &grid(1e-3)).unwrap();
        for (x, t) in traj.states().iter().zip(traj.grid().nodes()) {
            assert!((x[0] - (-t).exp()).abs() <= 5e-3);
        }
    }

    #[test]
    fn static_set_with_no_data_is_stationary() {
        let p = Problem::from_config(&config(
            SetConfig::new(SetShape::Ball {
                center: vec![0.0, 0.0],
                radius: 1.0,
            }),
            vec![0.3, -0.2],
        ))
        .unwrap();
        let traj = solve_unperturbed(&p, &grid(0.05)).unwrap();
        assert!(traj.states().iter().all(|x| x == &vec![0.3, -0.2]));
    }

    /// Wraps a kernel and hides its separable structure.
    struct Opaque(crate::fields::BuiltinKernel);

    impl VolterraKernel for Opaque {
        fn eval(&self, t: f64, s: f64, x: &[f64]) -> Point {
            self.0.eval(t, s, x)
        }
        fn g(&self, t: f64, s: f64) -> f64 {
            self.0.g(t, s)
        }
        fn beta2(&self, t: f64) -> f64 {
            self.0.beta2(t)
        }
        fn lipschitz(&self, r: f64, t: f64) -> f64 {
            self.0.lipschitz(r, t)
        }
    }

    #[test]
    fn separable_fast_path_matches_generic_sum() {
        let kcfg = KernelConfig::Separable {
            outer: Signal::Linear { value: 1.0, slope: 0.5 },
            inner: Signal::Sine {
                amplitude: 1.0,
                omega: 3.0,
                phase: 0.0,
                offset: 0.2,
            },
        };
        let mut cfg = config(free(2), vec![1.0, -0.5]);
        cfg.kernel = kcfg.clone();
        for rule in [VolterraRule::LeftRectangle, VolterraRule::Trapezoid] {
            cfg.quadrature = rule;
            let fast = Problem::from_config(&cfg).unwrap();
            let mut slow = fast.clone();
            slow.kernel = Arc::new(Opaque(crate::fields::BuiltinKernel::new(&kcfg, 2, (0.0, 1.0)).unwrap()));
            let g = grid(1e-2);
            let a = solve_unperturbed(&fast, &g).unwrap();
            let b = solve_unperturbed(&slow, &g).unwrap();
            assert!(a.x.sup_distance(&b.x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn solves_are_bit_deterministic() {
        let mut cfg = config(free(1), vec![1.0]);
        cfg.kernel = KernelConfig::Memory { scale: 1.0 };
        let p = Problem::from_config(&cfg).unwrap();
        let g = grid(1e-3);
        let a = solve_unperturbed(&p, &g).unwrap();
        let b = solve_unperturbed(&p, &g).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn inclusion_residual_is_a_normal() {
        let mut cfg = config(
            SetConfig::new(SetShape::BallComplement {
                center: vec![0.0, 0.0],
                radius: 1.0,
            }),
            vec![-1.5, 0.2],
        );
        cfg.drift = DriftConfig::Constant { value: vec![-1.0, 0.0] };
        let p = Problem::from_config(&cfg).unwrap();
        let traj = solve_unperturbed(&p, &grid(1e-3)).unwrap();
        let rep = inclusion_residual_check(&p, &traj).unwrap();
        assert!(rep.checked > 0);
        assert_eq!(rep.failures, 0, "{rep:?}");
        assert!(traj.max_residual() <= 1e-9);
    }

    #[test]
    fn csv_layout() {
        let p = Problem::from_config(&config(wall(), vec![0.0])).unwrap();
        let traj = solve_unperturbed(&p, &grid(0.5)).unwrap();
        let csv = traj.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x_0,z_0,dist_C,volterra_norm");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3].split(',').next().unwrap(), "1.0000000000000000e0");
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let p = Problem::from_config(&config(wall(), vec![0.0])).unwrap();
        let z = GridFunction::zeros(grid(0.1), 1, GridKind::Selection);
        assert_eq!(solve_fixed_selection(&p, &z, &grid(0.2)), Err(Error::GridMismatch));
    }
}
