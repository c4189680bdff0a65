//! Fixtures shared by the benchmarks.

use moreau_core::fields::BuiltinKernel;
use moreau_core::scenario::ScenarioConfig;
use moreau_core::{Point, Problem, TimeGrid, VolterraKernel};
use std::sync::Arc;

/// A built-in scenario at step `h`.
pub fn scenario(name: &str, h: f64) -> (Problem, Arc<TimeGrid>) {
    let s = ScenarioConfig::named(name).resolve().unwrap().with_step(h).unwrap();
    (s.build_problem().unwrap(), s.build_grid().unwrap())
}

/// Forwards to a kernel but hides its separable structure, forcing the
/// quadratic history sum.
pub struct Opaque(pub BuiltinKernel);

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

/// `volterra-cosine` with the memory kernel hidden behind [`Opaque`].
pub fn generic_volterra(h: f64) -> (Problem, Arc<TimeGrid>) {
    let s = ScenarioConfig::named("volterra-cosine")
        .resolve()
        .unwrap()
        .with_step(h)
        .unwrap();
    let mut problem = s.build_problem().unwrap();
    let [t0, t1] = s.problem.interval;
    let kernel = BuiltinKernel::new(&s.problem.kernel, s.problem.set_dim(), (t0, t1)).unwrap();
    problem.kernel = Arc::new(Opaque(kernel));
    (problem, s.build_grid().unwrap())
}
