//! Single-valued data `f1`, `f2`, the set-valued perturbation `F`, and the
//! problem instance that bundles them with the moving set.

use crate::error::{Error, Result};
use crate::geometry::{self, BuiltinSet, MovingSet, SetConfig};
use crate::linalg::{self, Point};
use crate::signal::Signal;
use crate::tolerance::{EPS_F, TOL_SAMPLED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// The drift `f1(t, x)` with its growth modulus `beta1` and local Lipschitz
/// moduli `L1^eta`.
pub trait DriftField: Send + Sync {
    fn eval(&self, t: f64, x: &[f64]) -> Point;
    /// `|f1(t,x)| <= beta1(t) (1 + |x|)`
    fn beta1(&self, t: f64) -> f64;
    /// Lipschitz modulus of `f1(t, .)` on the ball of the given radius.
    fn lipschitz(&self, radius: f64, t: f64) -> f64;
}

/// The Volterra kernel `f2(t, s, x)`, defined for `s <= t`.
pub trait VolterraKernel: Send + Sync {
    fn eval(&self, t: f64, s: f64, x: &[f64]) -> Point;
    /// `|f2(t,s,x)| <= g(t,s) + beta2(t) |x|`
    fn g(&self, t: f64, s: f64) -> f64;
    fn beta2(&self, t: f64) -> f64;
    fn lipschitz(&self, radius: f64, t: f64) -> f64;
    /// `Some((a, b))` when `f2(t,s,x) = a(t) b(s) x`; enables the running-sum
    /// quadrature.
    fn separable(&self) -> Option<(Signal, Signal)> {
        None
    }
    /// `Some(c)` when `g(t,s) = c` everywhere; spares the bounds the
    /// double quadrature of `g`.
    fn g_constant(&self) -> Option<f64> {
        None
    }
}

/// The multimap `F(t, x)`, seen only through a deterministic nearest-point
/// oracle.
pub trait PerturbationMap: Send + Sync {
    /// A point of `F(t, x)` nearest to `w`.
    fn nearest(&self, t: f64, x: &[f64], w: &[f64]) -> Point;
    /// `F(t, x)` is contained in the ball of radius `gamma(t)`.
    fn gamma(&self, t: f64) -> f64;
    /// Hausdorff-Lipschitz modulus `k(t)` of `F(t, .)`.
    fn lipschitz(&self, t: f64) -> f64;
    fn tolerance(&self) -> f64 {
        EPS_F
    }
}

/// Selection of `F(t, x)` of least norm.
pub fn minimal_norm_selection(perturbation: &dyn PerturbationMap, t: f64, x: &[f64]) -> Point {
    perturbation.nearest(t, x, &linalg::zeros(x.len()))
}

// ---------------------------------------------------------------------------
// Built-in drifts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DriftConfig {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// `f1(t,x) = A x + b s(t)`
    Linear {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        forcing: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        signal: Option<Signal>,
    },
}

#[derive(Debug, Clone)]
pub struct BuiltinDrift {
    config: DriftConfig,
    dim: usize,
    matrix_norm: f64,
    forcing_norm: f64,
}

impl BuiltinDrift {
    pub fn new(config: &DriftConfig, dim: usize) -> Result<Self> {
        let mut matrix_norm = 0.0;
        let mut forcing_norm = 0.0;
        match config {
            DriftConfig::Zero => {}
            DriftConfig::Constant { value } => {
                expect_dim("constant drift", dim, value.len())?;
                forcing_norm = linalg::norm(value);
            }
            DriftConfig::Linear {
                matrix,
                forcing,
                signal,
            } => {
                expect_dim("drift matrix rows", dim, matrix.len())?;
                for row in matrix {
                    expect_dim("drift matrix columns", dim, row.len())?;
                }
                // Frobenius norm bounds the operator norm
                matrix_norm = matrix.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
                if let Some(b) = forcing {
                    expect_dim("drift forcing", dim, b.len())?;
                    forcing_norm = linalg::norm(b);
                    if signal.is_none() {
                        return Err(Error::Config("drift forcing requires a signal".into()));
                    }
                }
            }
        }
        Ok(BuiltinDrift {
            config: config.clone(),
            dim,
            matrix_norm,
            forcing_norm,
        })
    }
}

impl DriftField for BuiltinDrift {
    fn eval(&self, t: f64, x: &[f64]) -> Point {
        match &self.config {
            DriftConfig::Zero => linalg::zeros(self.dim),
            DriftConfig::Constant { value } => value.clone(),
            DriftConfig::Linear {
                matrix,
                forcing,
                signal,
            } => {
                let mut out: Point = matrix.iter().map(|row| linalg::dot(row, x)).collect();
                if let (Some(b), Some(s)) = (forcing, signal) {
                    linalg::add_scaled_assign(&mut out, s.value(t), b);
                }
                out
            }
        }
    }

    fn beta1(&self, t: f64) -> f64 {
        match &self.config {
            DriftConfig::Zero => 0.0,
            DriftConfig::Constant { .. } => self.forcing_norm,
            DriftConfig::Linear { signal, .. } => {
                let s = signal.as_ref().map_or(0.0, |s| s.value(t).abs());
                self.matrix_norm.max(self.forcing_norm * s)
            }
        }
    }

    fn lipschitz(&self, _radius: f64, _t: f64) -> f64 {
        self.matrix_norm
    }
}

// ---------------------------------------------------------------------------
// Built-in kernels
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    Zero,
    /// `f2(t,s,x) = c`
    Constant {
        value: Vec<f64>,
    },
    /// `f2(t,s,x) = scale * x`
    Memory {
        scale: f64,
    },
    /// `f2(t,s,x) = a(t) b(s) x`
    Separable {
        outer: Signal,
        inner: Signal,
    },
}

#[derive(Debug, Clone)]
pub struct BuiltinKernel {
    config: KernelConfig,
    dim: usize,
    inner_sup: f64,
}

impl BuiltinKernel {
    /// `interval` is needed to bound the history factor of separable kernels.
    pub fn new(config: &KernelConfig, dim: usize, interval: (f64, f64)) -> Result<Self> {
        let inner_sup = match config {
            KernelConfig::Constant { value } => {
                expect_dim("constant kernel", dim, value.len())?;
                0.0
            }
            KernelConfig::Separable { inner, .. } => inner.sup_abs(interval.0, interval.1),
            _ => 0.0,
        };
        Ok(BuiltinKernel {
            config: config.clone(),
            dim,
            inner_sup,
        })
    }
}

impl VolterraKernel for BuiltinKernel {
    fn eval(&self, t: f64, s: f64, x: &[f64]) -> Point {
        match &self.config {
            KernelConfig::Zero => linalg::zeros(self.dim),
            KernelConfig::Constant { value } => value.clone(),
            KernelConfig::Memory { scale } => linalg::scale(x, *scale),
            KernelConfig::Separable { outer, inner } => linalg::scale(x, outer.value(t) * inner.value(s)),
        }
    }

    fn g(&self, _t: f64, _s: f64) -> f64 {
        match &self.config {
            KernelConfig::Constant { value } => linalg::norm(value),
            _ => 0.0,
        }
    }

    fn beta2(&self, t: f64) -> f64 {
        match &self.config {
            KernelConfig::Zero | KernelConfig::Constant { .. } => 0.0,
            KernelConfig::Memory { scale } => scale.abs(),
            KernelConfig::Separable { outer, .. } => outer.value(t).abs() * self.inner_sup,
        }
    }

    fn lipschitz(&self, _radius: f64, t: f64) -> f64 {
        self.beta2(t)
    }

    fn separable(&self) -> Option<(Signal, Signal)> {
        match &self.config {
            KernelConfig::Zero => Some((Signal::constant(0.0), Signal::constant(0.0))),
            KernelConfig::Constant { .. } => None,
            KernelConfig::Memory { scale } => Some((Signal::constant(*scale), Signal::constant(1.0))),
            KernelConfig::Separable { outer, inner } => Some((outer.clone(), inner.clone())),
        }
    }

    fn g_constant(&self) -> Option<f64> {
        Some(self.g(0.0, 0.0))
    }
}

// ---------------------------------------------------------------------------
// Built-in perturbation maps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PerturbationShape {
    Singleton {
        value: Vec<f64>,
    },
    /// Finite set independent of `x`; ties go to the lexicographically
    /// smallest candidate.
    FiniteSet {
        points: Vec<Vec<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{-(base + amplitude sin x_0) e_0, (base + amplitude cos x_0) e_0}`,
    /// Lipschitz with `k = amplitude`.
    LipschitzTwoPoint {
        base: f64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    #[serde(flatten)]
    pub shape: PerturbationShape,
    /// Declared `gamma`, overriding the exact bound of the shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Declared `k`, overriding the exact modulus of the shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

impl PerturbationConfig {
    pub fn new(shape: PerturbationShape) -> Self {
        PerturbationConfig {
            shape,
            gamma: None,
            k: None,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(PerturbationShape::Singleton {
            value: linalg::zeros(dim),
        })
    }
}

#[derive(Debug, Clone)]
pub struct BuiltinPerturbation {
    shape: PerturbationShape,
    dim: usize,
    gamma: f64,
    k: f64,
}

impl BuiltinPerturbation {
    pub fn new(config: &PerturbationConfig, dim: usize) -> Result<Self> {
        let (gamma, k) = match &config.shape {
            PerturbationShape::Singleton { value } => {
                expect_dim("singleton", dim, value.len())?;
                (linalg::norm(value), 0.0)
            }
            PerturbationShape::FiniteSet { points } => {
                if points.is_empty() {
                    return Err(Error::Config("finite set must be nonempty".into()));
                }
                for p in points {
                    expect_dim("finite set point", dim, p.len())?;
                }
                let g = points.iter().map(|p| linalg::norm(p)).fold(0.0, f64::max);
                (g, 0.0)
            }
            PerturbationShape::Ball { center, radius } => {
                expect_dim("ball center", dim, center.len())?;
                if !(*radius >= 0.0) {
                    return Err(Error::Config("ball radius must be nonnegative".into()));
                }
                (linalg::norm(center) + radius, 0.0)
            }
            PerturbationShape::LipschitzTwoPoint { base, amplitude } => {
                if !(*amplitude >= 0.0) {
                    return Err(Error::Config("amplitude must be nonnegative".into()));
                }
                (base.abs() + amplitude, *amplitude)
            }
        };
        let gamma = config.gamma.unwrap_or(gamma);
        let k = config.k.unwrap_or(k);
        if !(gamma >= 0.0 && gamma.is_finite() && k >= 0.0 && k.is_finite()) {
            return Err(Error::Config("gamma and k must be finite and nonnegative".into()));
        }
        Ok(BuiltinPerturbation {
            shape: config.shape.clone(),
            dim,
            gamma,
            k,
        })
    }

    fn candidates(&self, x: &[f64]) -> Vec<Point> {
        match &self.shape {
            PerturbationShape::Singleton { value } => vec![value.clone()],
            PerturbationShape::FiniteSet { points } => points.clone(),
            PerturbationShape::LipschitzTwoPoint { base, amplitude } => {
                let e = linalg::unit(self.dim, 0);
                vec![
                    linalg::scale(&e, -(base + amplitude * x[0].sin())),
                    linalg::scale(&e, base + amplitude * x[0].cos()),
                ]
            }
            PerturbationShape::Ball { .. } => unreachable!("ball is not a finite set"),
        }
    }
}

/// Nearest candidate with exact-distance ties resolved lexicographically.
fn nearest_of(candidates: Vec<Point>, w: &[f64]) -> Point {
    let mut best: Option<(f64, Point)> = None;
    for c in candidates {
        let d = linalg::dist(&c, w);
        best = match best {
            None => Some((d, c)),
            Some((bd, bp)) => {
                if d < bd || (d == bd && linalg::lex_cmp(&c, &bp).is_lt()) {
                    Some((d, c))
                } else {
                    Some((bd, bp))
                }
            }
        };
    }
    best.expect("nonempty candidate set").1
}

impl PerturbationMap for BuiltinPerturbation {
    fn nearest(&self, _t: f64, x: &[f64], w: &[f64]) -> Point {
        match &self.shape {
            PerturbationShape::Ball { center, radius } => {
                let d = linalg::sub(w, center);
                let r = linalg::norm(&d);
                if r <= *radius {
                    w.to_vec()
                } else {
                    linalg::axpy(center, radius / r, &d)
                }
            }
            _ => nearest_of(self.candidates(x), w),
        }
    }

    fn gamma(&self, _t: f64) -> f64 {
        self.gamma
    }

    fn lipschitz(&self, _t: f64) -> f64 {
        self.k
    }
}

fn expect_dim(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::Config(format!(
            "{what}: expected dimension {expected}, found {found}"
        )))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Problem instance
// ---------------------------------------------------------------------------

/// Quadrature rule for the memory integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolterraRule {
    #[default]
    LeftRectangle,
    Trapezoid,
}

/// Serializable description of a problem built from the built-in oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub interval: [f64; 2],
    pub x0: Vec<f64>,
    /// Start of the reference trajectory; defaults to `x0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    /// Defaults to `|x0 - q0|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    pub set: SetConfig,
    pub drift: DriftConfig,
    pub kernel: KernelConfig,
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub quadrature: VolterraRule,
}

/// A complete instance of the perturbed integro-differential sweeping process.
#[derive(Clone)]
pub struct Problem {
    pub t0: f64,
    pub t_end: f64,
    pub x0: Point,
    pub q0: Point,
    pub r0: Option<f64>,
    pub set: Arc<dyn MovingSet>,
    pub drift: Arc<dyn DriftField>,
    pub kernel: Arc<dyn VolterraKernel>,
    pub perturbation: Arc<dyn PerturbationMap>,
    pub quadrature: VolterraRule,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("interval", &(self.t0, self.t_end))
            .field("x0", &self.x0)
            .field("q0", &self.q0)
            .field("dim", &self.dim())
            .finish_non_exhaustive()
    }
}

impl Problem {
    /// Assembles a problem and checks `x0, q0 in C(T0)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        interval: (f64, f64),
        x0: Point,
        q0: Option<Point>,
        set: Arc<dyn MovingSet>,
        drift: Arc<dyn DriftField>,
        kernel: Arc<dyn VolterraKernel>,
        perturbation: Arc<dyn PerturbationMap>,
    ) -> Result<Self> {
        let (t0, t_end) = interval;
        if !(t0.is_finite() && t_end.is_finite() && t0 < t_end) {
            return Err(Error::Config(format!(
                "interval [{t0}, {t_end}] must be finite and nonempty"
            )));
        }
        let dim = set.dim();
        let q0 = q0.unwrap_or_else(|| x0.clone());
        for p in [&x0, &q0] {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if !linalg::all_finite(p) {
                return Err(Error::Config("initial points must be finite".into()));
            }
            let distance = set.distance(t0, p);
            if distance > set.tolerance() * (1.0 + linalg::norm(p)) {
                return Err(Error::InfeasibleInitialPoint { distance });
            }
        }
        Ok(Problem {
            t0,
            t_end,
            x0,
            q0,
            r0: None,
            set,
            drift,
            kernel,
            perturbation,
            quadrature: VolterraRule::LeftRectangle,
        })
    }

    pub fn from_config(config: &ProblemConfig) -> Result<Self> {
        let set = BuiltinSet::new(&config.set)?;
        let dim = set.dim();
        let interval = (config.interval[0], config.interval[1]);
        let drift = BuiltinDrift::new(&config.drift, dim)?;
        let kernel = BuiltinKernel::new(&config.kernel, dim, interval)?;
        let perturbation = BuiltinPerturbation::new(&config.perturbation, dim)?;
        let mut problem = Problem::new(
            interval,
            config.x0.clone(),
            config.q0.clone(),
            Arc::new(set),
            Arc::new(drift),
            Arc::new(kernel),
            Arc::new(perturbation),
        )?;
        problem.r0 = config.r0;
        problem.quadrature = config.quadrature;
        Ok(problem)
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn with_quadrature(mut self, rule: VolterraRule) -> Self {
        self.quadrature = rule;
        self
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = Some(r0);
        self
    }
}

// ---------------------------------------------------------------------------
// Sampled hypothesis checks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub samples: usize,
    pub seed: u64,
    /// Radius of the ball on which growth and Lipschitz bounds are sampled.
    pub radius: f64,
    /// Number of grid nodes for the modulus totality check.
    pub grid_nodes: usize,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            samples: 1000,
            seed: 0x5eed,
            radius: 4.0,
            grid_nodes: 257,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub samples: usize,
    pub max_violation: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl HypothesisCheck {
    fn new(name: &str, samples: usize, max_violation: f64, threshold: f64) -> Self {
        HypothesisCheck {
            name: name.to_string(),
            samples,
            max_violation,
            threshold,
            passed: max_violation <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Sampled necessary conditions for every hypothesis bundle. A failure means
/// the declared moduli are wrong; a pass is evidence, not proof.
pub fn validate(problem: &Problem, plan: &SamplingPlan) -> Result<ValidationReport> {
    if plan.samples == 0 || plan.grid_nodes < 2 {
        return Err(Error::InvalidArgument("sampling plan is empty".into()));
    }
    let set = problem.set.as_ref();
    let d = set.distance(problem.t0, &problem.x0);
    if d > set.tolerance() * (1.0 + linalg::norm(&problem.x0)) {
        return Err(Error::InfeasibleInitialPoint { distance: d });
    }
    let (t0, t1) = (problem.t0, problem.t_end);
    let n = plan.samples;
    let dim = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let time = |rng: &mut ChaCha8Rng| t0 + (t1 - t0) * rng.random::<f64>();
    let origin = linalg::zeros(dim);
    let mut checks = Vec::new();

    // H(C): variation
    let pairs: Vec<(f64, f64)> = (0..n.min(200))
        .map(|_| {
            let a = time(&mut rng);
            let b = time(&mut rng);
            (a.min(b), a.max(b))
        })
        .collect();
    let (c, r) = geometry::sampling_ball_or_default(set, t0);
    let points: Vec<Point> = (0..n.min(50))
        .map(|_| geometry::sample_in_ball(&c, 2.0 * r, &mut rng))
        .collect();
    let var = geometry::variation_check(set, &pairs, &points);
    checks.push(HypothesisCheck::new(
        "H(C).variation",
        var.samples,
        var.max_violation,
        set.tolerance().max(TOL_SAMPLED),
    ));

    // H(C): projection consistency and prox-regularity
    let proj = geometry::projection_suite(set, t0, t1, n, plan.seed ^ 1)?;
    checks.push(HypothesisCheck::new(
        "H(C).projection",
        proj.samples,
        proj.idempotence_error
            .max(proj.distance_error)
            .max(proj.feasibility_error),
        set.tolerance().max(TOL_SAMPLED),
    ));
    let hypo = geometry::hypomonotonicity_suite(set, t0, t1, n, plan.seed ^ 2, TOL_SAMPLED)?;
    checks.push(HypothesisCheck::new(
        "H(C).prox_regular",
        hypo.samples,
        (-hypo.min_residual).max(0.0),
        TOL_SAMPLED,
    ));

    // H(F)
    let pert = problem.perturbation.as_ref();
    let eps_f = pert.tolerance();
    let mut bounded = 0.0f64;
    let mut transport = 0.0f64;
    for _ in 0..n {
        let t = time(&mut rng);
        let x = geometry::sample_in_ball(&origin, plan.radius, &mut rng);
        let y = geometry::sample_in_ball(&origin, plan.radius, &mut rng);
        let w = geometry::sample_in_ball(&origin, plan.radius, &mut rng);
        let px = pert.nearest(t, &x, &w);
        let py = pert.nearest(t, &y, &w);
        bounded = bounded.max(linalg::norm(&px) - pert.gamma(t));
        transport =
            transport.max(linalg::dist(&py, &w) - linalg::dist(&px, &w) - pert.lipschitz(t) * linalg::dist(&x, &y));
    }
    checks.push(HypothesisCheck::new("H(F).bounded", n, bounded.max(0.0), eps_f));
    checks.push(HypothesisCheck::new("H(F).lipschitz", n, transport.max(0.0), eps_f));

    // H(f1)
    let drift = problem.drift.as_ref();
    let mut growth = 0.0f64;
    let mut lip = 0.0f64;
    for _ in 0..n {
        let t = time(&mut rng);
        let x = geometry::sample_in_ball(&origin, plan.radius, &mut rng);
        let y = geometry::sample_in_ball(&origin, plan.radius, &mut rng);
        let fx = drift.eval(t, &x);
        let fy = drift.eval(t, &y);
        growth = growth.max(linalg::norm(&fx) - drift.beta1(t) * (1.0 + linalg::norm(&x)));
        lip = lip.max(linalg::dist(&fx, &fy) - drift.lipschitz(plan.radius, t) * linalg::dist(&x, &y));
    }
    checks.push(HypothesisCheck::new("H(f1).growth", n, growth.max(0.0), TOL_SAMPLED));
    checks.push(HypothesisCheck::new("H(f1).lipschitz", n, lip.max(0.0), TOL_SAMPLED));

    // H(f2): growth is only required on the union of the sets
    let kernel = problem.kernel.as_ref();
    let mut growth = 0.0f64;
    let mut lip = 0.0f64;
    for _ in 0..n {
        let a = time(&mut rng);
        let b = time(&mut rng);
        let (s, t) = (a.min(b), a.max(b));
        let raw = geometry::sample_in_ball(&origin, plan.radius, &mut rng);
        let tc = time(&mut rng);
        let x = match geometry::project(set, tc, &raw) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let fx = kernel.eval(t, s, &x);
        growth = growth.max(linalg::norm(&fx) - kernel.g(t, s) - kernel.beta2(t) * linalg::norm(&x));
        let u = geometry::sample_in_ball(&origin, plan.radius, &mut rng);
        let v = geometry::sample_in_ball(&origin, plan.radius, &mut rng);
        lip = lip.max(
            linalg::dist(&kernel.eval(t, s, &u), &kernel.eval(t, s, &v))
                - kernel.lipschitz(plan.radius, t) * linalg::dist(&u, &v),
        );
    }
    checks.push(HypothesisCheck::new("H(f2).growth", n, growth.max(0.0), TOL_SAMPLED));
    checks.push(HypothesisCheck::new("H(f2).lipschitz", n, lip.max(0.0), TOL_SAMPLED));

    // every modulus is finite and nonnegative on a grid
    let m = plan.grid_nodes;
    let mut bad = 0usize;
    for i in 0..m {
        let t = t0 + (t1 - t0) * i as f64 / (m - 1) as f64;
        let mut values = vec![
            set.variation_rate(t),
            drift.beta1(t),
            drift.lipschitz(plan.radius, t),
            kernel.beta2(t),
            kernel.lipschitz(plan.radius, t),
            pert.gamma(t),
            pert.lipschitz(t),
        ];
        for j in 0..=i {
            let s = t0 + (t1 - t0) * j as f64 / (m - 1) as f64;
            values.push(kernel.g(t, s));
        }
        bad += values.iter().filter(|v| !(v.is_finite() && **v >= 0.0)).count();
    }
    checks.push(HypothesisCheck::new("moduli.finite", m, bad as f64, 0.0));

    Ok(ValidationReport { checks })
}
