//! End-to-end verification of a scenario: sampled hypotheses, certificate,
//! successive approximations and every invariant the computed objects must
//! satisfy.

use crate::bounds::{BoundCertificate, CertificateSummary};
use crate::error::{Error, Result};
use crate::fields::{validate, Problem, SamplingPlan, ValidationReport};
use crate::filippov::{iterate_with_certificate, IterationOutcome, IterationReport};
use crate::geometry::{self, project};
use crate::grid::{GridFunction, GridKind, TimeGrid};
use crate::linalg;
use crate::scenario::{GridSize, ResolvedScenario};
use crate::stepper::{deviation_check, inclusion_residual_check, solve_fixed_selection, solve_from, Trajectory};
use crate::tolerance::{FACTORIAL_MARGIN, TOL_FEASIBLE, TOL_NORMAL};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Errors of `|z_k|` against `r'(t_k)`.
pub const SELECTION_BOUND_TOL: f64 = 1e-10;

/// Required error reduction when the step is halved.
pub const REFINEMENT_RATIO: f64 = 1.8;

/// Errors below this level are rounding and exempt from the refinement check.
pub const REFINEMENT_FLOOR: f64 = 1e-10;

/// Largest node count used for the nested Fubini quadrature.
pub const FUBINI_MAX_NODES: usize = 2049;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    /// Largest excess of a left-hand side over its bound; nonpositive when
    /// the check passes.
    pub max_violation: f64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl NamedCheck {
    fn from_excess(name: &str, max_violation: f64, samples: usize) -> Self {
        NamedCheck {
            name: name.to_string(),
            passed: max_violation <= 0.0,
            max_violation: finite_or_zero(max_violation),
            samples,
            detail: None,
        }
    }

    fn failed(name: &str, detail: String) -> Self {
        NamedCheck {
            name: name.to_string(),
            passed: false,
            max_violation: 0.0,
            samples: 0,
            detail: Some(detail),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else if v == f64::NEG_INFINITY {
        0.0
    } else {
        f64::MAX
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub status: Status,
    pub h: f64,
    pub steps: usize,
    pub hypotheses: ValidationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<IterationReport>,
    pub checks: Vec<NamedCheck>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn check(&self, name: &str) -> Option<&NamedCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failing(&self) -> impl Iterator<Item = &NamedCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone)]
pub struct VerificationOutcome {
    pub report: VerificationReport,
    /// Final trajectory with the selection it was computed from.
    pub trajectory: Option<Trajectory>,
}

/// Runs the whole pipeline. Only configuration errors are returned as
/// `Err`; solver failures become failing checks.
pub fn verify(scenario: &ResolvedScenario) -> Result<VerificationOutcome> {
    let problem = scenario.build_problem()?;
    let grid = scenario.build_grid()?;
    let plan = SamplingPlan {
        seed: scenario.seed,
        ..SamplingPlan::default()
    };
    let hypotheses = validate(&problem, &plan)?;
    let mut checks = Vec::new();
    let worst = hypotheses
        .checks
        .iter()
        .map(|c| c.max_violation - c.threshold)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut hyp = NamedCheck::from_excess("hypotheses", worst, hypotheses.checks.len());
    let failing: Vec<&str> = hypotheses
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if !failing.is_empty() {
        hyp = hyp.with_detail(format!("failed: {}", failing.join(", ")));
    }
    hyp.passed = hypotheses.passed();
    checks.push(hyp);

    let mut report = VerificationReport {
        scenario: scenario.name.clone(),
        status: Status::Fail,
        h: grid.max_step(),
        steps: grid.steps(),
        hypotheses,
        certificate: None,
        iterations: None,
        checks,
    };

    let cert = match BoundCertificate::for_problem(&problem, &grid) {
        Ok(c) => c,
        Err(e) => {
            report.checks.push(NamedCheck::failed("certificate", e.to_string()));
            return Ok(finish(report, None));
        }
    };
    report.certificate = Some(cert.summary(101));
    report.checks.push(certificate_sanity(&cert));
    report.checks.push(fubini_check(&cert, problem.t_end));

    let outcome = match iterate_with_certificate(&problem, &grid, &cert, scenario.tol, scenario.max_iter) {
        Ok(o) => o,
        Err(Error::MaxIterationsExceeded(rep)) => {
            report.checks.push(NamedCheck::failed(
                "iteration_convergence",
                format!("no convergence within {} iterations", rep.records.len()),
            ));
            report.iterations = Some(*rep);
            return Ok(finish(report, None));
        }
        Err(e) => {
            report
                .checks
                .push(NamedCheck::failed("iteration_convergence", e.to_string()));
            return Ok(finish(report, None));
        }
    };
    report.iterations = Some(outcome.report.clone());
    report.checks.push(NamedCheck::from_excess(
        "iteration_convergence",
        0.0,
        outcome.report.iterations_used,
    ));
    report.checks.extend(trajectory_checks(&problem, &cert, &outcome));
    report.checks.push(deviation_suite(
        &problem,
        &grid,
        &cert,
        scenario.deviation_pairs,
        scenario.seed,
    ));
    if let Some(reference) = &scenario.reference {
        let err = reference_error(&problem, &reference.solution, &outcome.trajectory)?;
        report.checks.push(
            NamedCheck::from_excess("reference_error", err - reference.tolerance, grid.len())
                .with_detail(format!("sup error {err:.3e}, tolerance {:.1e}", reference.tolerance)),
        );
        report
            .checks
            .push(refinement_check(scenario, &reference.solution, err)?);
    }
    let again = solve_fixed_selection(&problem, &outcome.z, &grid);
    let identical = again.as_ref().is_ok_and(|t| t == &outcome.trajectory);
    report.checks.push(NamedCheck::from_excess(
        "determinism",
        if identical { 0.0 } else { 1.0 },
        1,
    ));
    Ok(finish(report, Some(outcome.trajectory)))
}

fn finish(mut report: VerificationReport, trajectory: Option<Trajectory>) -> VerificationOutcome {
    report.status = if report.checks.iter().all(|c| c.passed) {
        Status::Pass
    } else {
        Status::Fail
    };
    VerificationOutcome { report, trajectory }
}

/// Runs every scenario on its own thread; results keep the input order.
pub fn verify_all(scenarios: &[ResolvedScenario]) -> Vec<Result<VerificationOutcome>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios.iter().map(|s| scope.spawn(move || verify(s))).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Oracle("verification thread panicked".into())))
            })
            .collect()
    })
}

fn certificate_sanity(cert: &BoundCertificate) -> NamedCheck {
    let mut worst = f64::NEG_INFINITY;
    worst = worst.max(1.0 - cert.psi).max(1.0 - cert.phi_const);
    worst = worst.max(cert.c.values[0].abs());
    for w in cert.c.values.windows(2) {
        worst = worst.max(w[0] - w[1]);
    }
    for (i, (&r, &rdot)) in cert.r.values.iter().zip(&cert.rdot.values).enumerate() {
        let tol = 1e-12 * (1.0 + r.abs());
        worst = worst.max(cert.r0 - r - tol);
        worst = worst.max(cert.gamma.values[i] - rdot - tol);
    }
    NamedCheck::from_excess("certificate_sanity", worst, cert.c.len())
}

fn fubini_check(cert: &BoundCertificate, t: f64) -> NamedCheck {
    let stride = (cert.c.len() - 1).div_ceil(FUBINI_MAX_NODES - 1).max(1);
    let coarse = |p: &crate::bounds::Profile| {
        let mut times: Vec<f64> = p.times.iter().step_by(stride).copied().collect();
        let mut values: Vec<f64> = p.values.iter().step_by(stride).copied().collect();
        if times.last() != p.times.last() {
            times.push(*p.times.last().expect("nonempty"));
            values.push(*p.values.last().expect("nonempty"));
        }
        crate::bounds::Profile { times, values }
    };
    let k = coarse(&cert.lipschitz_f);
    let gamma = coarse(&cert.gamma);
    let c = coarse(&cert.c);
    let h = c.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let tol = 1e-6f64.max(10.0 * h);
    let mut worst = f64::NEG_INFINITY;
    let mut detail = Vec::new();
    for i in 1..=3 {
        match crate::bounds::fubini_identity(cert.phi_const, &k, &gamma, &c, i, t) {
            Ok(f) => {
                // relative to the size of the two sides
                let scale = 1.0f64.max(f.lhs.abs()).max(f.rhs.abs());
                worst = worst.max(f.error() - tol * scale);
                detail.push(format!("i={i}: {:.3e}", f.error()));
            }
            Err(e) => return NamedCheck::failed("fubini", e.to_string()),
        }
    }
    NamedCheck::from_excess("fubini", worst, 3).with_detail(detail.join(", "))
}

fn trajectory_checks(problem: &Problem, cert: &BoundCertificate, outcome: &IterationOutcome) -> Vec<NamedCheck> {
    let traj = &outcome.trajectory;
    let q = &outcome.reference;
    let grid = traj.grid();
    let nodes = grid.nodes();
    let n = nodes.len();
    let mut out = Vec::new();

    out.push(NamedCheck::from_excess(
        "feasibility",
        traj.max_residual().max(q.max_residual()) - TOL_FEASIBLE,
        2 * n,
    ));

    let mut inclusion = NamedCheck::from_excess("discrete_inclusion", 0.0, 0);
    for t in [traj, q] {
        match inclusion_residual_check(problem, t) {
            Ok(rep) => {
                inclusion.samples += rep.checked;
                inclusion.max_violation = inclusion.max_violation.max(rep.max_deviation - TOL_NORMAL);
                if rep.failures > 0 {
                    inclusion.passed = false;
                    inclusion.detail = Some(format!("{} nodes fail the normal test", rep.failures));
                }
            }
            Err(e) => {
                inclusion = NamedCheck::failed("discrete_inclusion", e.to_string());
                break;
            }
        }
    }
    out.push(inclusion);

    let sup_x = traj.x.sup_norm().max(q.x.sup_norm());
    out.push(
        NamedCheck::from_excess("a_priori_norm", sup_x - (cert.eta + cert.slack), 2 * n)
            .with_detail(format!("max |x| = {sup_x:.6e}, eta = {:.6e}", cert.eta)),
    );

    let mut state = f64::NEG_INFINITY;
    let mut selection = f64::NEG_INFINITY;
    for (k, &t) in nodes.iter().enumerate() {
        let gap = linalg::dist(&traj.x.values[k], &q.x.values[k]);
        state = state.max(gap - (linalg::bound_mul(cert.phi_const, cert.r.at(t)) + cert.slack));
        selection = selection.max(linalg::norm(&outcome.z.values[k]) - (cert.rdot.at(t) + SELECTION_BOUND_TOL));
    }
    out.push(NamedCheck::from_excess("final_estimate_state", state, n));
    out.push(NamedCheck::from_excess("final_estimate_selection", selection, n));

    let report = &outcome.report;
    let sup_k = nodes
        .iter()
        .map(|&t| problem.perturbation.lipschitz(t))
        .fold(0.0, f64::max);
    let residual = crate::filippov::selection_residual(problem, &outcome.z, traj).unwrap_or(f64::INFINITY);
    out.push(
        NamedCheck::from_excess(
            "selection_residual",
            residual - (report.tol * (1.0 + sup_k) + problem.perturbation.tolerance()),
            n,
        )
        .with_detail(format!("residual {residual:.3e}")),
    );

    let domination = report
        .records
        .iter()
        .map(|r| r.sup_y_delta - (FACTORIAL_MARGIN * r.factorial_bound + cert.slack))
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(NamedCheck::from_excess(
        "factorial_domination",
        domination,
        report.records.len(),
    ));
    let chain = report
        .records
        .iter()
        .map(|r| r.lipschitz_chain_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(NamedCheck::from_excess("lipschitz_chain", chain, report.records.len()));
    out
}

/// Random selection with `|z_k| <= gamma(t_k)` at every node.
pub fn random_admissible_selection(problem: &Problem, grid: &Arc<TimeGrid>, rng: &mut ChaCha8Rng) -> GridFunction {
    let dim = problem.dim();
    let origin = linalg::zeros(dim);
    let values = grid
        .nodes()
        .iter()
        .map(|&t| geometry::sample_in_ball(&origin, problem.perturbation.gamma(t), rng))
        .collect();
    GridFunction {
        grid: grid.clone(),
        values,
        kind: GridKind::Selection,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSuite {
    pub pairs: usize,
    pub violations: usize,
    pub max_excess: f64,
    pub max_ratio: f64,
}

/// Monte-Carlo pairs of admissible selections; every other pair also moves
/// the initial point inside `C(T0)`.
pub fn deviation_pairs(
    problem: &Problem,
    grid: &Arc<TimeGrid>,
    cert: &BoundCertificate,
    pairs: usize,
    seed: u64,
) -> Result<DeviationSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
    let mut suite = DeviationSuite {
        pairs,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
        max_ratio: 0.0,
    };
    for j in 0..pairs {
        let z1 = random_admissible_selection(problem, grid, &mut rng);
        let z2 = random_admissible_selection(problem, grid, &mut rng);
        let x1 = problem.x0.clone();
        let x2 = if j % 2 == 1 {
            let shifted = geometry::sample_in_ball(&problem.x0, 0.1, &mut rng);
            project(problem.set.as_ref(), problem.t0, &shifted).unwrap_or_else(|_| problem.x0.clone())
        } else {
            problem.x0.clone()
        };
        let a = solve_from(problem, &x1, &z1, grid)?;
        let b = solve_from(problem, &x2, &z2, grid)?;
        let rep = deviation_check(&a, &b, cert)?;
        if rep.violations > 0 {
            suite.violations += 1;
        }
        suite.max_excess = suite.max_excess.max(rep.max_excess);
        suite.max_ratio = suite.max_ratio.max(rep.max_ratio);
    }
    Ok(suite)
}

fn deviation_suite(
    problem: &Problem,
    grid: &Arc<TimeGrid>,
    cert: &BoundCertificate,
    pairs: usize,
    seed: u64,
) -> NamedCheck {
    match deviation_pairs(problem, grid, cert, pairs, seed) {
        Ok(s) => {
            let mut check = NamedCheck::from_excess("deviation_estimate", s.max_excess, s.pairs).with_detail(format!(
                "{}/{} pairs violate, max ratio {:.3e}",
                s.violations, s.pairs, s.max_ratio
            ));
            check.passed = s.violations == 0;
            check
        }
        Err(e) => NamedCheck::failed("deviation_estimate", e.to_string()),
    }
}

/// `max_k |x_k - x(t_k)|` against a closed-form solution.
pub fn reference_error(problem: &Problem, reference: &crate::scenario::Reference, traj: &Trajectory) -> Result<f64> {
    let mut err = 0.0f64;
    for (x, &t) in traj.states().iter().zip(traj.grid().nodes()) {
        err = err.max(linalg::dist(x, &reference.eval(t, problem.t0, &problem.x0)?));
    }
    Ok(err)
}

fn refinement_check(
    scenario: &ResolvedScenario,
    reference: &crate::scenario::Reference,
    err: f64,
) -> Result<NamedCheck> {
    if err <= REFINEMENT_FLOOR {
        return Ok(
            NamedCheck::from_excess("refinement", 0.0, 0).with_detail(format!("error {err:.1e} is at rounding level"))
        );
    }
    let mut finer = scenario.clone();
    finer.grid = match scenario.grid {
        GridSize::Step(h) => GridSize::Step(0.5 * h),
        GridSize::Nodes(n) => GridSize::Nodes(2 * n - 1),
    };
    let problem = finer.build_problem()?;
    let grid = finer.build_grid()?;
    let fine_err = match crate::filippov::iterate(&problem, &grid, finer.tol, finer.max_iter) {
        Ok(o) => reference_error(&problem, reference, &o.trajectory)?,
        Err(e) => return Ok(NamedCheck::failed("refinement", e.to_string())),
    };
    Ok(
        NamedCheck::from_excess("refinement", fine_err - err / REFINEMENT_RATIO, 2).with_detail(format!(
            "error {err:.3e} at h, {fine_err:.3e} at h/2, ratio {:.2}",
            err / fine_err
        )),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    #[test]
    fn moving_wall_passes() {
        let s = ScenarioConfig::named("moving-wall").resolve().unwrap();
        let out = verify(&s).unwrap();
        let failing: Vec<_> = out.report.failing().collect();
        assert!(out.report.passed(), "{failing:?}");
    }

    #[test]
    fn coarse_cosine_fails_reference_check() {
        let s = ScenarioConfig::named("volterra-cosine")
            .resolve()
            .unwrap()
            .with_step(0.5)
            .unwrap();
        let out = verify(&s).unwrap();
        assert!(!out.report.passed());
        assert!(!out.report.check("reference_error").unwrap().passed);
    }

    #[test]
    fn wrong_gamma_fails_validation() {
        let mut s = ScenarioConfig::named("two-point-F").resolve().unwrap();
        s.problem.perturbation.gamma = Some(0.5);
        let out = verify(&s).unwrap();
        assert!(!out.report.check("hypotheses").unwrap().passed);
        assert!(!out.report.passed());
    }
}
