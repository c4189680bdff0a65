//! Moving constraint sets `C(t)` and prox-regularity checks.
//!
//! A set is exposed to the solver only through its nearest-point and distance
//! maps. Convex sets carry `prox_const = f64::INFINITY`; nonconvex
//! prox-regular sets carry the radius `R` of the tube on which the projection
//! is single-valued.

use crate::error::{Error, Result};
use crate::linalg::{self, Point};
use crate::signal::Signal;
use crate::tolerance::{EPS_GEO, MAX_DIM, TOL_NORMAL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Projection/distance oracle for a family of closed sets `C(t)`.
///
/// Implementations must be pure: the solver calls them from several threads.
pub trait MovingSet: Send + Sync {
    fn dim(&self) -> usize;

    /// Prox-regularity constant `R`; `f64::INFINITY` for convex sets.
    fn prox_const(&self) -> f64;

    /// Monotone absolutely continuous `v(t)` bounding how fast `C(t)` moves.
    fn variation(&self, t: f64) -> f64;

    /// A.e. derivative of [`MovingSet::variation`].
    fn variation_rate(&self, t: f64) -> f64;

    /// A nearest point of `C(t)` to `y`, without region checks. Ties must be
    /// broken deterministically.
    fn nearest(&self, t: f64, y: &[f64]) -> Result<Point>;

    fn distance(&self, t: f64, y: &[f64]) -> f64;

    /// Accuracy of the oracle (`eps_geo`).
    fn tolerance(&self) -> f64 {
        EPS_GEO
    }

    /// A ball that covers the interesting part of `C(t)`; used to draw
    /// property-test samples.
    fn sampling_ball(&self, _t: f64) -> Option<(Point, f64)> {
        None
    }
}

pub type SetRef = Arc<dyn MovingSet>;

/// Nearest point of `C(t)` to `y`, refused outside the uniqueness region
/// `d(y, C(t)) < R`.
pub fn project(set: &dyn MovingSet, t: f64, y: &[f64]) -> Result<Point> {
    check_dim(set.dim(), y.len())?;
    let distance = set.distance(t, y);
    let r = set.prox_const();
    if distance >= r {
        return Err(Error::RegionViolation {
            t,
            distance,
            prox_const: r,
        });
    }
    set.nearest(t, y)
}

/// Checks `v` in `N_{C(t)}(x)` through `x in Proj(x + step * v)`.
///
/// For an `R`-prox-regular set any `0 < step < R` certifies the membership
/// of a vector with `|v| <= 1`.
pub fn normal_cone_membership(set: &dyn MovingSet, t: f64, x: &[f64], v: &[f64], step: f64) -> Result<bool> {
    Ok(normal_deviation(set, t, x, v, step)? <= TOL_NORMAL * (1.0 + linalg::norm(x)))
}

/// `|project(t, x + step * v) - x|`, the quantity behind
/// [`normal_cone_membership`].
pub fn normal_deviation(set: &dyn MovingSet, t: f64, x: &[f64], v: &[f64], step: f64) -> Result<f64> {
    check_dim(set.dim(), x.len())?;
    check_dim(set.dim(), v.len())?;
    if !(step > 0.0 && step < set.prox_const()) {
        return Err(Error::InvalidArgument(format!(
            "normal test step {step} must lie in (0, {})",
            set.prox_const()
        )));
    }
    let vn = linalg::norm(v);
    if vn > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "normal test direction has norm {vn} > 1"
        )));
    }
    let distance = set.distance(t, x);
    if distance > set.tolerance() * (1.0 + linalg::norm(x)) {
        return Err(Error::PointNotInSet { t, distance });
    }
    let probe = linalg::axpy(x, step, v);
    let p = project(set, t, &probe)?;
    Ok(linalg::dist(&p, x))
}

/// Step used when testing normals of a set: `min(cap, R / 2)`.
pub fn normal_test_step(set: &dyn MovingSet, cap: f64) -> f64 {
    cap.min(0.5 * set.prox_const())
}

/// `<v2 - v1, x2 - x1> + (|v1| + |v2|) / (2R) |x2 - x1|^2`, nonnegative for
/// every `R`-prox-regular set. The quadratic term vanishes when `R = inf`.
pub fn hypomonotonicity_residual(
    set: &dyn MovingSet,
    t: f64,
    x1: &[f64],
    v1: &[f64],
    x2: &[f64],
    v2: &[f64],
) -> Result<f64> {
    let step = normal_test_step(set, 1.0);
    for (x, v) in [(x1, v1), (x2, v2)] {
        let deviation = normal_deviation(set, t, x, v, step)?;
        if deviation > TOL_NORMAL * (1.0 + linalg::norm(x)) {
            return Err(Error::NotANormal { deviation });
        }
    }
    Ok(hypomonotonicity_value(set.prox_const(), x1, v1, x2, v2))
}

/// The residual formula alone, without the membership checks.
pub fn hypomonotonicity_value(r: f64, x1: &[f64], v1: &[f64], x2: &[f64], v2: &[f64]) -> f64 {
    let dx = linalg::sub(x2, x1);
    let dv = linalg::sub(v2, v1);
    let monotone = linalg::dot(&dv, &dx);
    if r.is_infinite() {
        return monotone;
    }
    let defect = 0.5 * (linalg::norm(v1) + linalg::norm(v2)) / r * linalg::dot(&dx, &dx);
    monotone + defect
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub samples: usize,
    /// `max(|d(y,C(t)) - d(y,C(s))| - |v(t) - v(s)|)` over the samples.
    pub max_violation: f64,
}

impl VariationReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Samples the absolutely-continuous-variation hypothesis.
pub fn variation_check(set: &dyn MovingSet, sample_times: &[(f64, f64)], sample_points: &[Point]) -> VariationReport {
    let mut max_violation = f64::NEG_INFINITY;
    let mut samples = 0;
    for &(s, t) in sample_times {
        let budget = (set.variation(t) - set.variation(s)).abs();
        for y in sample_points {
            let change = (set.distance(t, y) - set.distance(s, y)).abs();
            max_violation = max_violation.max(change - budget);
            samples += 1;
        }
    }
    VariationReport {
        samples,
        max_violation: if samples == 0 { 0.0 } else { max_violation.max(0.0) },
    }
}

/// One sampled quadruple `(x1, v1, x2, v2)` at time `t`.
#[derive(Debug, Clone)]
pub struct NormalPair {
    pub t: f64,
    pub x1: Point,
    pub v1: Point,
    pub x2: Point,
    pub v2: Point,
}

/// Draws a boundary point with a proximal normal of norm at most one.
///
/// `y` is drawn in the sampling ball; `x = Proj(y)` and `v` is a random
/// multiple of `(y - x) / |y - x|`, which is a proximal normal at `x` by
/// definition. About one draw in ten is an interior point with `v = 0`.
fn sample_normal(set: &dyn MovingSet, t: f64, rng: &mut ChaCha8Rng) -> Result<(Point, Point)> {
    let (center, radius) = sampling_ball_or_default(set, t);
    let r = set.prox_const();
    for _ in 0..1000 {
        let y = sample_in_ball(&center, radius, rng);
        let d = set.distance(t, &y);
        if d >= 0.9 * r {
            continue;
        }
        let x = set.nearest(t, &y)?;
        if d == 0.0 || rng.random::<f64>() < 0.1 {
            // interior/boundary point paired with the zero normal
            return Ok((x, linalg::zeros(set.dim())));
        }
        let dir = linalg::sub(&y, &x);
        let n = linalg::norm(&dir);
        let s: f64 = rng.random();
        return Ok((x, linalg::scale(&dir, s / n)));
    }
    Err(Error::Oracle(
        "could not sample points inside the prox-regular tube".into(),
    ))
}

pub fn sample_normal_pairs(set: &dyn MovingSet, t0: f64, t1: f64, count: usize, seed: u64) -> Result<Vec<NormalPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let t = t0 + (t1 - t0) * rng.random::<f64>();
            let (x1, v1) = sample_normal(set, t, &mut rng)?;
            let (x2, v2) = sample_normal(set, t, &mut rng)?;
            Ok(NormalPair { t, x1, v1, x2, v2 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypomonotonicityReport {
    pub samples: usize,
    pub min_residual: f64,
    /// Samples whose residual is below `-tol`.
    pub violations: usize,
}

/// Hypomonotonicity over `count` sampled normal pairs with the declared `R`.
pub fn hypomonotonicity_suite(
    set: &dyn MovingSet,
    t0: f64,
    t1: f64,
    count: usize,
    seed: u64,
    tol: f64,
) -> Result<HypomonotonicityReport> {
    let pairs = sample_normal_pairs(set, t0, t1, count, seed)?;
    let mut min_residual = f64::INFINITY;
    let mut violations = 0;
    for p in &pairs {
        let res = hypomonotonicity_residual(set, p.t, &p.x1, &p.v1, &p.x2, &p.v2)?;
        min_residual = min_residual.min(res);
        if res < -tol {
            violations += 1;
        }
    }
    Ok(HypomonotonicityReport {
        samples: pairs.len(),
        min_residual,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub samples: usize,
    /// `max |P(P(y)) - P(y)|`
    pub idempotence_error: f64,
    /// `max ||P(y) - y| - d(y)|` over samples inside the uniqueness region.
    pub distance_error: f64,
    /// `max d(P(y), C(t))`
    pub feasibility_error: f64,
}

/// Idempotence and distance consistency of the projection on random samples.
pub fn projection_suite(set: &dyn MovingSet, t0: f64, t1: f64, count: usize, seed: u64) -> Result<ProjectionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ProjectionReport {
        samples: 0,
        idempotence_error: 0.0,
        distance_error: 0.0,
        feasibility_error: 0.0,
    };
    while report.samples < count {
        let t = t0 + (t1 - t0) * rng.random::<f64>();
        let (center, radius) = sampling_ball_or_default(set, t);
        let y = sample_in_ball(&center, radius, &mut rng);
        let p = match project(set, t, &y) {
            Ok(p) => p,
            Err(Error::RegionViolation { .. }) => continue,
            Err(e) => return Err(e),
        };
        let pp = project(set, t, &p)?;
        report.idempotence_error = report.idempotence_error.max(linalg::dist(&pp, &p));
        report.distance_error = report
            .distance_error
            .max((linalg::dist(&p, &y) - set.distance(t, &y)).abs());
        report.feasibility_error = report.feasibility_error.max(set.distance(t, &p));
        report.samples += 1;
    }
    Ok(report)
}

pub(crate) fn sampling_ball_or_default(set: &dyn MovingSet, t: f64) -> (Point, f64) {
    set.sampling_ball(t).unwrap_or_else(|| (linalg::zeros(set.dim()), 2.0))
}

pub(crate) fn sample_in_ball(center: &[f64], radius: f64, rng: &mut impl Rng) -> Point {
    loop {
        let p: Point = center.iter().map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        if linalg::norm(&p) <= 1.0 {
            return linalg::axpy(center, radius, &p);
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Built-in sets
// ---------------------------------------------------------------------------

/// Static shape, before translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SetShape {
    /// The whole space.
    Free {
        dim: usize,
    },
    /// `{x : <n, x> >= offset}` with `n` normalized on construction.
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Complement of the open ball; `R = radius`.
    BallComplement {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{inner <= |x - c| <= outer}`; `R = inner`.
    Annulus {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
}

/// Rigid translation `m(t) = direction * signal(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub direction: Vec<f64>,
    pub signal: Signal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetConfig {
    #[serde(flatten)]
    pub shape: SetShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<Motion>,
    /// Declared constant rate of `v(t)`, overriding the one derived from the
    /// motion. Used to exercise the variation check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variation_rate: Option<f64>,
}

impl SetConfig {
    pub fn new(shape: SetShape) -> Self {
        SetConfig {
            shape,
            motion: None,
            variation_rate: None,
        }
    }

    pub fn moving(mut self, direction: Vec<f64>, signal: Signal) -> Self {
        self.motion = Some(Motion { direction, signal });
        self
    }

    pub fn with_variation_rate(mut self, rate: f64) -> Self {
        self.variation_rate = Some(rate);
        self
    }
}

/// Closed-form oracle for a translated [`SetShape`].
#[derive(Debug, Clone)]
pub struct BuiltinSet {
    shape: SetShape,
    motion: Option<Motion>,
    speed_scale: f64,
    declared_rate: Option<f64>,
    dim: usize,
}

impl BuiltinSet {
    pub fn new(config: &SetConfig) -> Result<Self> {
        let mut shape = config.shape.clone();
        let dim = match &mut shape {
            SetShape::Free { dim } => *dim,
            SetShape::HalfSpace { normal, .. } => {
                let n = linalg::norm(normal);
                if !(n > 0.0 && n.is_finite()) {
                    return Err(Error::Config("half-space normal must be nonzero".into()));
                }
                *normal = linalg::scale(normal, 1.0 / n);
                normal.len()
            }
            SetShape::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::Config("box bounds differ in dimension".into()));
                }
                if lower.iter().zip(upper.iter()).any(|(a, b)| !(a <= b)) {
                    return Err(Error::Config("box requires lower <= upper".into()));
                }
                lower.len()
            }
            SetShape::Ball { center, radius } | SetShape::BallComplement { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Config("radius must be positive".into()));
                }
                center.len()
            }
            SetShape::Annulus { center, inner, outer } => {
                if !(*inner > 0.0 && inner <= outer && outer.is_finite()) {
                    return Err(Error::Config("annulus requires 0 < inner <= outer".into()));
                }
                center.len()
            }
        };
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        let mut speed_scale = 0.0;
        if let Some(m) = &config.motion {
            check_dim(dim, m.direction.len()).map_err(|e| Error::Config(e.to_string()))?;
            if !m.signal.is_absolutely_continuous() {
                return Err(Error::Config("set motion must be absolutely continuous".into()));
            }
            speed_scale = linalg::norm(&m.direction);
        }
        if let Some(rate) = config.variation_rate {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::Config("variation rate must be nonnegative".into()));
            }
        }
        Ok(BuiltinSet {
            shape,
            motion: config.motion.clone(),
            speed_scale,
            declared_rate: config.variation_rate,
            dim,
        })
    }

    fn offset(&self, t: f64) -> Point {
        match &self.motion {
            Some(m) => linalg::scale(&m.direction, m.signal.value(t)),
            None => linalg::zeros(self.dim),
        }
    }

    fn nearest_static(&self, y: &[f64]) -> Point {
        match &self.shape {
            SetShape::Free { .. } => y.to_vec(),
            SetShape::HalfSpace { normal, offset } => {
                let gap = linalg::dot(normal, y) - offset;
                if gap >= 0.0 {
                    y.to_vec()
                } else {
                    linalg::axpy(y, -gap, normal)
                }
            }
            SetShape::Box { lower, upper } => y
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect(),
            SetShape::Ball { center, radius } => {
                let d = linalg::sub(y, center);
                let r = linalg::norm(&d);
                if r <= *radius {
                    y.to_vec()
                } else {
                    linalg::axpy(center, radius / r, &d)
                }
            }
            SetShape::BallComplement { center, radius } => {
                radial_outward(center, *radius, y).unwrap_or_else(|| y.to_vec())
            }
            SetShape::Annulus { center, inner, outer } => {
                if let Some(p) = radial_outward(center, *inner, y) {
                    return p;
                }
                let d = linalg::sub(y, center);
                let r = linalg::norm(&d);
                if r > *outer {
                    linalg::axpy(center, outer / r, &d)
                } else {
                    y.to_vec()
                }
            }
        }
    }

    fn distance_static(&self, y: &[f64]) -> f64 {
        match &self.shape {
            SetShape::Free { .. } => 0.0,
            SetShape::HalfSpace { normal, offset } => (offset - linalg::dot(normal, y)).max(0.0),
            SetShape::Box { lower, upper } => y
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (lo, hi))| {
                    let e = (lo - v).max(v - hi).max(0.0);
                    e * e
                })
                .sum::<f64>()
                .sqrt(),
            SetShape::Ball { center, radius } => (linalg::dist(y, center) - radius).max(0.0),
            SetShape::BallComplement { center, radius } => (radius - linalg::dist(y, center)).max(0.0),
            SetShape::Annulus { center, inner, outer } => {
                let r = linalg::dist(y, center);
                (inner - r).max(r - outer).max(0.0)
            }
        }
    }
}

/// Radial projection onto the sphere `|x - c| = radius` for points strictly
/// inside it; `None` when `y` is already outside. The center maps to the
/// point along the first axis.
fn radial_outward(center: &[f64], radius: f64, y: &[f64]) -> Option<Point> {
    let d = linalg::sub(y, center);
    let r = linalg::norm(&d);
    if r >= radius {
        return None;
    }
    if r == 0.0 {
        return Some(linalg::axpy(center, radius, &linalg::unit(center.len(), 0)));
    }
    Some(linalg::axpy(center, radius / r, &d))
}

impl MovingSet for BuiltinSet {
    fn dim(&self) -> usize {
        self.dim
    }

    fn prox_const(&self) -> f64 {
        match &self.shape {
            SetShape::BallComplement { radius, .. } => *radius,
            SetShape::Annulus { inner, .. } => *inner,
            _ => f64::INFINITY,
        }
    }

    fn variation(&self, t: f64) -> f64 {
        if let Some(rate) = self.declared_rate {
            return rate * t;
        }
        match &self.motion {
            Some(m) => self.speed_scale * m.signal.cumulative_variation(t).unwrap_or(0.0),
            None => 0.0,
        }
    }

    fn variation_rate(&self, t: f64) -> f64 {
        if let Some(rate) = self.declared_rate {
            return rate;
        }
        match &self.motion {
            Some(m) => self.speed_scale * m.signal.rate(t).abs(),
            None => 0.0,
        }
    }

    fn nearest(&self, t: f64, y: &[f64]) -> Result<Point> {
        check_dim(self.dim, y.len())?;
        if self.motion.is_none() {
            return Ok(self.nearest_static(y));
        }
        let m = self.offset(t);
        let local = linalg::sub(y, &m);
        Ok(linalg::add(&self.nearest_static(&local), &m))
    }

    fn distance(&self, t: f64, y: &[f64]) -> f64 {
        if self.motion.is_none() {
            return self.distance_static(y);
        }
        self.distance_static(&linalg::sub(y, &self.offset(t)))
    }

    fn sampling_ball(&self, t: f64) -> Option<(Point, f64)> {
        let (center, radius) = match &self.shape {
            SetShape::Free { dim } => (linalg::zeros(*dim), 1.0),
            SetShape::HalfSpace { normal, offset } => (linalg::scale(normal, *offset), 2.0),
            SetShape::Box { lower, upper } => {
                let c: Point = lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect();
                (c, 0.5 * linalg::dist(lower, upper) + 1.0)
            }
            SetShape::Ball { center, radius } => (center.clone(), radius + 1.0),
            SetShape::BallComplement { center, radius } => (center.clone(), 2.0 * radius),
            SetShape::Annulus { center, outer, .. } => (center.clone(), outer + 1.0),
        };
        Some((linalg::add(&center, &self.offset(t)), radius))
    }
}

/// User-supplied oracle assembled from closures.
pub struct FnSet<P, D> {
    pub dim: usize,
    pub prox_const: f64,
    pub tolerance: f64,
    pub project: P,
    pub distance: D,
    pub variation: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub variation_rate: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl<P, D> fmt::Debug for FnSet<P, D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSet")
            .field("dim", &self.dim)
            .field("prox_const", &self.prox_const)
            .finish_non_exhaustive()
    }
}

impl<P, D> MovingSet for FnSet<P, D>
where
    P: Fn(f64, &[f64]) -> Point + Send + Sync,
    D: Fn(f64, &[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn prox_const(&self) -> f64 {
        self.prox_const
    }
    fn variation(&self, t: f64) -> f64 {
        (self.variation)(t)
    }
    fn variation_rate(&self, t: f64) -> f64 {
        (self.variation_rate)(t)
    }
    fn nearest(&self, t: f64, y: &[f64]) -> Result<Point> {
        Ok((self.project)(t, y))
    }
    fn distance(&self, t: f64, y: &[f64]) -> f64 {
        (self.distance)(t, y)
    }
    fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn wall(speed: f64) -> BuiltinSet {
        BuiltinSet::new(
            &SetConfig::new(SetShape::HalfSpace {
                normal: vec![1.0],
                offset: 0.0,
            })
            .moving(
                vec![1.0],
                Signal::Linear {
                    value: 0.0,
                    slope: speed,
                },
            ),
        )
        .unwrap()
    }

    fn unit_hole() -> BuiltinSet {
        BuiltinSet::new(&SetConfig::new(SetShape::BallComplement {
            center: vec![0.0, 0.0],
            radius: 1.0,
        }))
        .unwrap()
    }

    fn half_line() -> BuiltinSet {
        BuiltinSet::new(&SetConfig::new(SetShape::HalfSpace {
            normal: vec![1.0],
            offset: 0.0,
        }))
        .unwrap()
    }

    fn annulus() -> BuiltinSet {
        BuiltinSet::new(&SetConfig::new(SetShape::Annulus {
            center: vec![0.5, -0.5],
            inner: 1.0,
            outer: 3.0,
        }))
        .unwrap()
    }

    fn moving_box() -> BuiltinSet {
        BuiltinSet::new(
            &SetConfig::new(SetShape::Box {
                lower: vec![-1.0, 0.0],
                upper: vec![1.0, 0.5],
            })
            .moving(
                vec![0.6, -0.8],
                Signal::Sine {
                    amplitude: 1.5,
                    omega: 2.0,
                    phase: 0.0,
                    offset: 0.0,
                },
            ),
        )
        .unwrap()
    }

    fn moving_ball() -> BuiltinSet {
        BuiltinSet::new(
            &SetConfig::new(SetShape::Ball {
                center: vec![0.0, 0.0, 1.0],
                radius: 0.7,
            })
            .moving(vec![1.0, 0.0, 0.0], Signal::Linear { value: 0.0, slope: 0.4 }),
        )
        .unwrap()
    }

    #[test]
    fn half_space_projection() {
        let set = BuiltinSet::new(
            &SetConfig::new(SetShape::HalfSpace {
                normal: vec![1.0, 0.0],
                offset: 0.0,
            })
            .moving(vec![1.0, 0.0], Signal::Linear { value: 0.0, slope: 1.0 }),
        )
        .unwrap();
        assert_eq!(project(&set, 0.5, &[0.2, 3.0]).unwrap(), vec![0.5, 3.0]);
    }

    #[test]
    fn ball_complement_projects_radially() {
        let set = unit_hole();
        assert_eq!(project(&set, 0.0, &[0.5, 0.0]).unwrap(), vec![1.0, 0.0]);
        // points of the set are fixed
        assert_eq!(project(&set, 0.0, &[0.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn ball_complement_center_is_a_region_violation() {
        let set = unit_hole();
        assert!(matches!(
            project(&set, 0.0, &[0.0, 0.0]),
            Err(Error::RegionViolation { .. })
        ));
        // the raw oracle still has a deterministic answer
        assert_eq!(set.nearest(0.0, &[0.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn dimension_is_checked() {
        assert!(matches!(
            project(&unit_hole(), 0.0, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normal_cone_on_half_line() {
        let set = half_line();
        assert!(normal_cone_membership(&set, 0.0, &[0.0], &[-1.0], 0.5).unwrap());
        assert!(!normal_cone_membership(&set, 0.0, &[0.0], &[1.0], 0.5).unwrap());
    }

    #[test]
    fn normal_cone_on_ball_complement() {
        let set = unit_hole();
        assert!(normal_cone_membership(&set, 0.0, &[1.0, 0.0], &[-1.0, 0.0], 0.5).unwrap());
        assert!(!normal_cone_membership(&set, 0.0, &[1.0, 0.0], &[0.0, 1.0], 0.5).unwrap());
    }

    #[test]
    fn normal_cone_rejects_outside_points_and_bad_steps() {
        let set = half_line();
        assert!(matches!(
            normal_cone_membership(&set, 0.0, &[-0.1], &[-1.0], 0.5),
            Err(Error::PointNotInSet { .. })
        ));
        let hole = unit_hole();
        assert!(normal_cone_membership(&hole, 0.0, &[1.0, 0.0], &[-1.0, 0.0], 1.5).is_err());
    }

    #[test]
    fn hypomonotonicity_boundary_equality_case() {
        let set = unit_hole();
        let r = hypomonotonicity_residual(&set, 0.0, &[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]).unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hypomonotonicity_coincident_points() {
        let set = unit_hole();
        let r = hypomonotonicity_residual(&set, 0.0, &[1.0, 0.0], &[-1.0, 0.0], &[1.0, 0.0], &[-0.5, 0.0]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn hypomonotonicity_convex_drops_quadratic_term() {
        let set = half_line();
        let r = hypomonotonicity_residual(&set, 0.0, &[0.0], &[-1.0], &[2.0], &[0.0]).unwrap();
        assert_eq!(r, 2.0);
    }

    #[test]
    fn hypomonotonicity_rejects_non_normals() {
        let set = half_line();
        assert!(matches!(
            hypomonotonicity_residual(&set, 0.0, &[0.0], &[1.0], &[2.0], &[0.0]),
            Err(Error::NotANormal { .. })
        ));
    }

    #[test]
    fn variation_static_set_is_zero() {
        let set = unit_hole();
        let rep = variation_check(&set, &[(0.0, 1.0), (0.2, 0.7)], &[vec![0.3, 0.1], vec![2.0, 2.0]]);
        assert_eq!(rep.max_violation, 0.0);
    }

    #[test]
    fn variation_translating_wall_is_tight() {
        let rep = variation_check(&wall(1.0), &[(0.0, 1.0)], &[vec![0.0]]);
        assert_abs_diff_eq!(rep.max_violation, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn variation_underdeclared_rate_is_reported() {
        let set = BuiltinSet::new(
            &SetConfig::new(SetShape::HalfSpace {
                normal: vec![1.0],
                offset: 0.0,
            })
            .moving(vec![1.0], Signal::Linear { value: 0.0, slope: 2.0 })
            .with_variation_rate(1.0),
        )
        .unwrap();
        let rep = variation_check(&set, &[(0.0, 1.0)], &[vec![0.0]]);
        assert_abs_diff_eq!(rep.max_violation, 1.0, epsilon = 1e-15);
        assert!(!rep.passed(EPS_GEO));
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        for shape in [
            SetShape::HalfSpace {
                normal: vec![0.0],
                offset: 0.0,
            },
            SetShape::Ball {
                center: vec![0.0],
                radius: -1.0,
            },
            SetShape::Annulus {
                center: vec![0.0, 0.0],
                inner: 2.0,
                outer: 1.0,
            },
            SetShape::Box {
                lower: vec![1.0],
                upper: vec![0.0],
            },
            SetShape::Free { dim: 17 },
        ] {
            assert!(BuiltinSet::new(&SetConfig::new(shape)).is_err());
        }
        let square = SetConfig::new(SetShape::Free { dim: 1 }).moving(
            vec![1.0],
            Signal::SquareWave {
                amplitude: 1.0,
                period: 1.0,
                offset: 0.0,
            },
        );
        assert!(BuiltinSet::new(&square).is_err());
    }

    fn all_builtins() -> Vec<BuiltinSet> {
        vec![
            wall(1.0),
            unit_hole(),
            half_line(),
            annulus(),
            moving_box(),
            moving_ball(),
        ]
    }

    #[test]
    fn projection_suite_on_builtins() {
        for set in all_builtins() {
            let rep = projection_suite(&set, 0.0, 2.0, 10_000, 7).unwrap();
            assert!(rep.idempotence_error <= EPS_GEO, "{set:?}: {rep:?}");
            assert!(rep.distance_error <= EPS_GEO, "{set:?}: {rep:?}");
            assert!(rep.feasibility_error <= EPS_GEO, "{set:?}: {rep:?}");
        }
    }

    #[test]
    fn hypomonotonicity_suite_on_builtins() {
        for set in all_builtins() {
            let rep = hypomonotonicity_suite(&set, 0.0, 2.0, 10_000, 11, 1e-9).unwrap();
            assert_eq!(rep.violations, 0, "{set:?}: {rep:?}");
        }
    }

    #[test]
    fn variation_holds_for_declared_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for set in all_builtins() {
            let times: Vec<(f64, f64)> = (0..50)
                .map(|_| {
                    let a = 2.0 * rng.random::<f64>();
                    let b = 2.0 * rng.random::<f64>();
                    (a.min(b), a.max(b))
                })
                .collect();
            let (c, r) = set.sampling_ball(0.0).unwrap();
            let pts: Vec<Point> = (0..50).map(|_| sample_in_ball(&c, 2.0 * r, &mut rng)).collect();
            let rep = variation_check(&set, &times, &pts);
            assert!(rep.passed(1e-12), "{set:?}: {rep:?}");
        }
    }

    proptest! {
        #[test]
        fn annulus_projection_is_nearest_among_boundary_samples(
            x in -4.0f64..4.0, y in -4.0f64..4.0, angle in 0.0f64..std::f64::consts::TAU
        ) {
            let set = annulus();
            let q = [x, y];
            prop_assume!(set.distance(0.0, &q) < 0.99);
            let p = project(&set, 0.0, &q).unwrap();
            // any point of the annulus is at least as far
            for rad in [1.0, 2.0, 3.0] {
                let cand = [0.5 + rad * angle.cos(), -0.5 + rad * angle.sin()];
                prop_assert!(linalg::dist(&p, &q) <= linalg::dist(&cand, &q) + 1e-12);
            }
        }
    }
}
