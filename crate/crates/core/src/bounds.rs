//! A priori constants and functions of the stability theory: Gronwall
//! bounds, `eta`, `Psi`, `Phi`, `phi(t)`, `c(t)`, `r(t)` and the factorial
//! bound on successive approximations.
//!
//! Every integral is a composite trapezoid rule on a quadrature grid, by
//! default the solver grid refined [`QUAD_REFINE`] times.

use crate::error::{Error, Result};
use crate::fields::Problem;
use crate::grid::TimeGrid;
use crate::linalg::{self, bound_mul};
use crate::tolerance::{QUAD_REFINE, SLACK_FACTOR};
use serde::{Deserialize, Serialize};

/// Scalar function sampled on strictly increasing times, linear in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Profile {
            times: grid.nodes().to_vec(),
            values: grid.nodes().iter().map(|&t| f(t)).collect(),
        }
    }

    pub fn constant(grid: &TimeGrid, value: f64) -> Self {
        Self::from_fn(grid, |_| value)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("nonempty profile")
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len() - 1;
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n] {
            return self.values[n];
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        if w == 0.0 {
            return self.values[k];
        }
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    /// Restriction to `[times[0], t]`, with an interpolated node at `t`.
    pub fn truncate(&self, t: f64) -> Profile {
        let t = t.clamp(self.times[0], *self.times.last().expect("nonempty profile"));
        let m = self.times.partition_point(|&s| s < t);
        let mut times = self.times[..m].to_vec();
        let mut values = self.values[..m].to_vec();
        times.push(t);
        values.push(self.at(t));
        Profile { times, values }
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Profile {
        Profile {
            times: self.times.clone(),
            values: self.times.iter().zip(&self.values).map(|(&t, &v)| f(t, v)).collect(),
        }
    }

    /// Trapezoid integral over the whole profile.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.times, &self.values)
    }

    /// `t -> int_{t0}^t`, trapezoid per cell.
    pub fn cumulative(&self) -> Profile {
        let mut values = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        values.push(0.0);
        for k in 1..self.len() {
            acc += 0.5 * (self.times[k] - self.times[k - 1]) * (self.values[k] + self.values[k - 1]);
            values.push(acc);
        }
        Profile {
            times: self.times.clone(),
            values,
        }
    }

    fn check_same_times(&self, other: &Profile) -> Result<()> {
        if self.times == other.times {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn check_nonnegative(&self, name: &str) -> Result<()> {
        match self.values.iter().find(|v| !(**v >= 0.0)) {
            Some(v) => Err(Error::NegativeInput(format!("{name} takes the value {v}"))),
            None => Ok(()),
        }
    }
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// `t -> rho0 exp(int_{t0}^t (b+1)) + int_{t0}^t a(s) exp(int_s^t (b+1)) ds`
/// with `b = max(b1, b2)`.
pub fn gronwall_linear(rho0: f64, a: &Profile, b1: &Profile, b2: &Profile) -> Result<Profile> {
    a.check_same_times(b1)?;
    a.check_same_times(b2)?;
    if !(rho0 >= 0.0) {
        return Err(Error::NegativeInput(format!("rho0 = {rho0}")));
    }
    a.check_nonnegative("a")?;
    b1.check_nonnegative("b1")?;
    b2.check_nonnegative("b2")?;
    let growth = Profile {
        times: a.times.clone(),
        values: b1.values.iter().zip(&b2.values).map(|(x, y)| x.max(*y) + 1.0).collect(),
    };
    let exponent = growth.cumulative();
    Ok(exp_convolution(rho0, &exponent, a))
}

/// `t -> rho0 e^{E(t)} + int_{t0}^t e^{E(t) - E(s)} a(s) ds` for a given
/// cumulative exponent `E`, by the trapezoid rule in `s`.
fn exp_convolution(rho0: f64, exponent: &Profile, a: &Profile) -> Profile {
    let mut values = Vec::with_capacity(a.len());
    let mut acc = 0.0;
    values.push(rho0);
    for k in 1..a.len() {
        let h = a.times[k] - a.times[k - 1];
        let de = exponent.values[k] - exponent.values[k - 1];
        // both exponents infinite: the ratio is unknown, stay conservative
        let factor = if de.is_nan() { f64::INFINITY } else { de.exp() };
        acc = bound_mul(acc, factor) + 0.5 * h * (bound_mul(a.values[k - 1], factor) + a.values[k]);
        values.push(bound_mul(rho0, exponent.values[k].exp()) + acc);
    }
    Profile {
        times: a.times.clone(),
        values,
    }
}

/// Bound on `sqrt(rho)` for `rho' <= K1 rho + K2 sqrt(rho) + K3 int sqrt(rho)`.
pub fn gronwall_sqrt(rho0: f64, k1: &Profile, k2: &Profile, k3: &Profile) -> Result<Profile> {
    if !(rho0 >= 0.0) {
        return Err(Error::NegativeInput(format!("rho0 = {rho0}")));
    }
    let half = |p: &Profile| p.map(|_, v| 0.5 * v);
    gronwall_linear(rho0.sqrt(), &half(k2), &half(k1), &half(k3))
}

/// Pointwise data entering the a priori bounds.
pub trait Moduli {
    fn interval(&self) -> (f64, f64);
    /// `|upsilon'(t)|`
    fn variation_rate(&self, t: f64) -> f64;
    fn beta1(&self, t: f64) -> f64;
    fn gamma(&self, t: f64) -> f64;
    fn beta2(&self, t: f64) -> f64;
    fn g(&self, t: f64, s: f64) -> f64;
    /// `Some(c)` when `g` is the constant `c`.
    fn g_constant(&self) -> Option<f64> {
        None
    }
    /// Lipschitz constant of the perturbation.
    fn k(&self, t: f64) -> f64;
    fn drift_lipschitz(&self, radius: f64, t: f64) -> f64;
    fn kernel_lipschitz(&self, radius: f64, t: f64) -> f64;
    fn prox_const(&self) -> f64;
    /// `max(|x0|, |q0|)`
    fn mu0(&self) -> f64;
    /// `|x0 - q0|`
    fn initial_gap(&self) -> f64;
}

impl Moduli for Problem {
    fn interval(&self) -> (f64, f64) {
        (self.t0, self.t_end)
    }
    fn variation_rate(&self, t: f64) -> f64 {
        self.set.variation_rate(t).abs()
    }
    fn beta1(&self, t: f64) -> f64 {
        self.drift.beta1(t)
    }
    fn gamma(&self, t: f64) -> f64 {
        self.perturbation.gamma(t)
    }
    fn beta2(&self, t: f64) -> f64 {
        self.kernel.beta2(t)
    }
    fn g(&self, t: f64, s: f64) -> f64 {
        self.kernel.g(t, s)
    }
    fn g_constant(&self) -> Option<f64> {
        self.kernel.g_constant()
    }
    fn k(&self, t: f64) -> f64 {
        self.perturbation.lipschitz(t)
    }
    fn drift_lipschitz(&self, radius: f64, t: f64) -> f64 {
        self.drift.lipschitz(radius, t)
    }
    fn kernel_lipschitz(&self, radius: f64, t: f64) -> f64 {
        self.kernel.lipschitz(radius, t)
    }
    fn prox_const(&self) -> f64 {
        self.set.prox_const()
    }
    fn mu0(&self) -> f64 {
        linalg::norm(&self.x0).max(linalg::norm(&self.q0))
    }
    fn initial_gap(&self) -> f64 {
        linalg::dist(&self.x0, &self.q0)
    }
}

/// Time-independent moduli, mainly for checking the formulas by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantModuli {
    pub interval: (f64, f64),
    pub variation_rate: f64,
    pub beta1: f64,
    pub gamma: f64,
    pub beta2: f64,
    pub g: f64,
    pub k: f64,
    pub drift_lipschitz: f64,
    pub kernel_lipschitz: f64,
    pub prox_const: f64,
    pub mu0: f64,
    pub initial_gap: f64,
}

impl Default for ConstantModuli {
    fn default() -> Self {
        ConstantModuli {
            interval: (0.0, 1.0),
            variation_rate: 0.0,
            beta1: 0.0,
            gamma: 0.0,
            beta2: 0.0,
            g: 0.0,
            k: 0.0,
            drift_lipschitz: 0.0,
            kernel_lipschitz: 0.0,
            prox_const: f64::INFINITY,
            mu0: 0.0,
            initial_gap: 0.0,
        }
    }
}

impl Moduli for ConstantModuli {
    fn interval(&self) -> (f64, f64) {
        self.interval
    }
    fn variation_rate(&self, _t: f64) -> f64 {
        self.variation_rate
    }
    fn beta1(&self, _t: f64) -> f64 {
        self.beta1
    }
    fn gamma(&self, _t: f64) -> f64 {
        self.gamma
    }
    fn beta2(&self, _t: f64) -> f64 {
        self.beta2
    }
    fn g(&self, _t: f64, _s: f64) -> f64 {
        self.g
    }
    fn g_constant(&self) -> Option<f64> {
        Some(self.g)
    }
    fn k(&self, _t: f64) -> f64 {
        self.k
    }
    fn drift_lipschitz(&self, _radius: f64, _t: f64) -> f64 {
        self.drift_lipschitz
    }
    fn kernel_lipschitz(&self, _radius: f64, _t: f64) -> f64 {
        self.kernel_lipschitz
    }
    fn prox_const(&self) -> f64 {
        self.prox_const
    }
    fn mu0(&self) -> f64 {
        self.mu0
    }
    fn initial_gap(&self) -> f64 {
        self.initial_gap
    }
}

fn check_quad(m: &dyn Moduli, quad: &TimeGrid) -> Result<()> {
    let (t0, t1) = m.interval();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    if close(quad.t0(), t0) && close(quad.t_end(), t1) {
        Ok(())
    } else {
        Err(Error::InvalidGrid(format!(
            "quadrature grid [{}, {}] does not cover [{t0}, {t1}]",
            quad.t0(),
            quad.t_end()
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaBound {
    pub eta: f64,
    pub psi: f64,
    /// `b(t) = 2 max(beta1 + gamma, beta2)`
    pub b: Profile,
}

/// Norm bound `eta` on every solution, with `Psi = exp(int (b+1))`:
/// `eta = mu0 Psi + Psi int (|v'| + 2(beta1+gamma) + 2 int_{T0}^{T} g(s,tau) dtau) ds`.
pub fn compute_eta(m: &dyn Moduli, quad: &TimeGrid) -> Result<EtaBound> {
    check_quad(m, quad)?;
    let nodes = quad.nodes();
    let b = Profile::from_fn(quad, |t| 2.0 * (m.beta1(t) + m.gamma(t)).max(m.beta2(t)));
    let psi = b.map(|_, v| v + 1.0).integral().exp();
    let inner = |s: f64| match m.g_constant() {
        Some(c) => c * (quad.t_end() - quad.t0()),
        None => {
            let row: Vec<f64> = nodes.iter().map(|&tau| m.g(s, tau)).collect();
            trapezoid(nodes, &row)
        }
    };
    let integrand = Profile::from_fn(quad, |s| {
        m.variation_rate(s) + 2.0 * (m.beta1(s) + m.gamma(s)) + 2.0 * inner(s)
    });
    let eta = bound_mul(m.mu0(), psi) + bound_mul(psi, integrand.integral());
    Ok(EtaBound { eta, psi, b })
}

/// `phi(t) = |v'(t)| + (1+eta)(beta1+gamma)(t) + int_{T0}^t g(t,s) ds + eta (T-T0) beta2(t)`
pub fn compute_phi_t(m: &dyn Moduli, eta: f64, quad: &TimeGrid) -> Result<Profile> {
    check_quad(m, quad)?;
    if !(eta >= 0.0) {
        return Err(Error::NegativeInput(format!("eta = {eta}")));
    }
    let (t0, t1) = m.interval();
    let nodes = quad.nodes();
    let mut values = Vec::with_capacity(nodes.len());
    for (k, &t) in nodes.iter().enumerate() {
        let memory = match m.g_constant() {
            Some(c) => c * (t - nodes[0]),
            None => {
                let row: Vec<f64> = nodes[..=k].iter().map(|&s| m.g(t, s)).collect();
                trapezoid(&nodes[..=k], &row)
            }
        };
        values.push(
            m.variation_rate(t)
                + bound_mul(1.0 + eta, m.beta1(t) + m.gamma(t))
                + memory
                + bound_mul(eta * (t1 - t0), m.beta2(t)),
        );
    }
    Ok(Profile {
        times: nodes.to_vec(),
        values,
    })
}

/// `K(t) = max(L1(eta, t) + phi(t)/R, L2(eta, t))` and `Phi = exp(int (K+1))`.
/// For convex sets (`R = inf`) the `phi/R` term vanishes.
pub fn compute_phi_const(m: &dyn Moduli, eta: f64, phi_t: &Profile) -> Result<(f64, Profile)> {
    let r = m.prox_const();
    if !(r > 0.0) {
        return Err(Error::NegativeInput(format!("prox-regularity constant {r}")));
    }
    let k = phi_t.map(|t, phi| {
        let curvature = if r.is_infinite() { 0.0 } else { phi / r };
        (m.drift_lipschitz(eta, t) + curvature).max(m.kernel_lipschitz(eta, t))
    });
    let phi = k.map(|_, v| v + 1.0).integral().exp();
    Ok((phi, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusProfiles {
    /// `c(t) = Phi int_{T0}^t k`
    pub c: Profile,
    /// `r(t) = r0 e^{c(t)} + int_{T0}^t e^{c(t)-c(s)} gamma(s) ds`
    pub r: Profile,
    /// `r' = gamma + Phi k r`
    pub rdot: Profile,
}

/// Majorant `r` of the distance between the perturbed and reference solutions.
pub fn compute_r(m: &dyn Moduli, phi: f64, r0: f64, quad: &TimeGrid) -> Result<RadiusProfiles> {
    check_quad(m, quad)?;
    let gap = m.initial_gap();
    if r0 < gap - 1e-12 * (1.0 + gap) {
        return Err(Error::R0TooSmall { r0, required: gap });
    }
    let k = Profile::from_fn(quad, |t| m.k(t));
    let gamma = Profile::from_fn(quad, |t| m.gamma(t));
    k.check_nonnegative("k")?;
    gamma.check_nonnegative("gamma")?;
    Ok(radius_profiles(phi, r0, &k, &gamma))
}

fn radius_profiles(phi: f64, r0: f64, k: &Profile, gamma: &Profile) -> RadiusProfiles {
    let c = k.cumulative().map(|_, v| bound_mul(phi, v));
    let r = exp_convolution(r0, &c, gamma);
    let rdot = Profile {
        times: k.times.clone(),
        values: (0..k.len())
            .map(|i| gamma.values[i] + bound_mul(bound_mul(phi, k.values[i]), r.values[i]))
            .collect(),
    };
    RadiusProfiles { c, r, rdot }
}

/// `x^i / i!`, through logarithms for large `i`.
pub fn power_over_factorial(x: f64, i: u32) -> f64 {
    if i == 0 {
        return 1.0;
    }
    if x == 0.0 {
        return 0.0;
    }
    if i <= 20 {
        let fact: f64 = (1..=i).map(f64::from).product();
        return x.powi(i as i32) / fact;
    }
    let log_fact: f64 = (1..=i).map(|j| f64::from(j).ln()).sum();
    (f64::from(i) * x.ln() - log_fact).exp()
}

/// `Phi (r0 c(t)^i/i! + int_{T0}^t (c(t)-c(s))^i/i! gamma(s) ds)`
pub fn factorial_bound_from(phi: f64, r0: f64, c: &Profile, gamma: &Profile, i: u32, t: f64) -> f64 {
    let c = c.truncate(t);
    let gamma = gamma.truncate(t);
    let ct = c.last();
    let integrand: Vec<f64> = c
        .values
        .iter()
        .zip(&gamma.values)
        .map(|(&cs, &g)| power_over_factorial((ct - cs).max(0.0), i) * g)
        .collect();
    bound_mul(phi, r0 * power_over_factorial(ct, i) + trapezoid(&c.times, &integrand))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FubiniCheck {
    pub i: u32,
    pub lhs: f64,
    pub rhs: f64,
}

impl FubiniCheck {
    pub fn error(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Both sides of
/// `int Phi k(s) int_{T0}^s (c(s)-c(tau))^{i-1}/(i-1)! gamma(tau) dtau ds
///  = int (c(t)-c(s))^i/i! gamma(s) ds` on `[T0, t]`, by nested trapezoid rules.
pub fn fubini_identity(phi: f64, k: &Profile, gamma: &Profile, c: &Profile, i: u32, t: f64) -> Result<FubiniCheck> {
    if i == 0 {
        return Err(Error::InvalidArgument("the identity needs i >= 1".into()));
    }
    k.check_same_times(gamma)?;
    k.check_same_times(c)?;
    let k = k.truncate(t);
    let gamma = gamma.truncate(t);
    let c = c.truncate(t);
    let times = &c.times;
    let n = times.len();
    let mut outer = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n);
    for s in 0..n {
        row.clear();
        row.extend(
            (0..=s).map(|j| power_over_factorial((c.values[s] - c.values[j]).max(0.0), i - 1) * gamma.values[j]),
        );
        outer.push(bound_mul(phi, k.values[s]) * trapezoid(&times[..=s], &row));
    }
    let lhs = trapezoid(times, &outer);
    let ct = c.last();
    let rhs_integrand: Vec<f64> = (0..n)
        .map(|j| power_over_factorial((ct - c.values[j]).max(0.0), i) * gamma.values[j])
        .collect();
    let rhs = trapezoid(times, &rhs_integrand);
    Ok(FubiniCheck { i, lhs, rhs })
}

/// All a priori quantities for one problem and solver grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCertificate {
    pub eta: f64,
    pub psi: f64,
    /// `Phi(T0, T)`
    pub phi_const: f64,
    pub r0: f64,
    /// Largest step of the solver grid.
    pub h: f64,
    /// `slack(h) = 10 (1 + sup phi) h`
    pub slack: f64,
    pub b: Profile,
    pub k_profile: Profile,
    pub phi_t: Profile,
    pub lipschitz_f: Profile,
    pub gamma: Profile,
    pub c: Profile,
    pub r: Profile,
    pub rdot: Profile,
}

impl BoundCertificate {
    /// Certificate on the solver grid refined [`QUAD_REFINE`] times.
    pub fn compute(m: &dyn Moduli, r0: f64, grid: &TimeGrid) -> Result<Self> {
        Self::compute_with_refinement(m, r0, grid, QUAD_REFINE)
    }

    pub fn compute_with_refinement(m: &dyn Moduli, r0: f64, grid: &TimeGrid, refine: usize) -> Result<Self> {
        let quad = grid.refine(refine);
        let EtaBound { eta, psi, b } = compute_eta(m, &quad)?;
        let phi_t = compute_phi_t(m, eta, &quad)?;
        let (phi_const, k_profile) = compute_phi_const(m, eta, &phi_t)?;
        let RadiusProfiles { c, r, rdot } = compute_r(m, phi_const, r0, &quad)?;
        let h = grid.max_step();
        Ok(BoundCertificate {
            eta,
            psi,
            phi_const,
            r0,
            h,
            slack: slack(phi_t.sup(), h),
            b,
            k_profile,
            lipschitz_f: Profile::from_fn(&quad, |t| m.k(t)),
            gamma: Profile::from_fn(&quad, |t| m.gamma(t)),
            phi_t,
            c,
            r,
            rdot,
        })
    }

    /// Uses `problem.r0`, defaulting to `|x0 - q0|`.
    pub fn for_problem(problem: &Problem, grid: &TimeGrid) -> Result<Self> {
        let r0 = problem.r0.unwrap_or_else(|| problem.initial_gap());
        Self::compute(problem, r0, grid)
    }

    pub fn factorial_bound(&self, i: u32, t: f64) -> f64 {
        factorial_bound_from(self.phi_const, self.r0, &self.c, &self.gamma, i, t)
    }

    pub fn fubini(&self, i: u32, t: f64) -> Result<FubiniCheck> {
        fubini_identity(self.phi_const, &self.lipschitz_f, &self.gamma, &self.c, i, t)
    }

    /// Step of the quadrature grid.
    pub fn quad_step(&self) -> f64 {
        self.c.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Scalars plus at most `max_points` samples of each profile.
    pub fn summary(&self, max_points: usize) -> CertificateSummary {
        let n = self.c.len();
        let count = max_points.clamp(2, n);
        let idx: Vec<usize> = (0..count).map(|j| j * (n - 1) / (count - 1)).collect();
        let pick = |p: &Profile| idx.iter().map(|&i| p.values[i]).collect::<Vec<_>>();
        CertificateSummary {
            eta: self.eta,
            psi: self.psi,
            phi: self.phi_const,
            r0: self.r0,
            h: self.h,
            slack: self.slack,
            quad_nodes: n,
            sup_phi_t: self.phi_t.sup(),
            c_final: self.c.last(),
            r_final: self.r.last(),
            rdot_final: self.rdot.last(),
            samples: CertificateSamples {
                t: idx.iter().map(|&i| self.c.times[i]).collect(),
                b: pick(&self.b),
                k: pick(&self.k_profile),
                phi_t: pick(&self.phi_t),
                c: pick(&self.c),
                r: pick(&self.r),
                rdot: pick(&self.rdot),
            },
        }
    }
}

/// `SLACK_FACTOR (1 + sup phi) h`
pub fn slack(sup_phi: f64, h: f64) -> f64 {
    SLACK_FACTOR * (1.0 + sup_phi) * h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub eta: f64,
    pub psi: f64,
    pub phi: f64,
    pub r0: f64,
    pub h: f64,
    pub slack: f64,
    pub quad_nodes: usize,
    pub sup_phi_t: f64,
    pub c_final: f64,
    pub r_final: f64,
    pub rdot_final: f64,
    pub samples: CertificateSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSamples {
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub c: Vec<f64>,
    pub r: Vec<f64>,
    pub rdot: Vec<f64>,
}
