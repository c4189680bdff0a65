//! JSON run configurations and the built-in scenario library.

use crate::error::{Error, Result};
use crate::fields::{
    DriftConfig, KernelConfig, PerturbationConfig, PerturbationShape, Problem, ProblemConfig, VolterraRule,
};
use crate::geometry::{SetConfig, SetShape};
use crate::grid::{GridFunction, GridKind, TimeGrid};
use crate::linalg::{self, Point};
use crate::signal::Signal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::sync::Arc;

pub const DEFAULT_H: f64 = 1e-3;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 30;
pub const DEFAULT_DEVIATION_PAIRS: usize = 25;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Number of nodes, as an alternative to `h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

/// Fixed selection used by `solve`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionConfig {
    #[default]
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// CSV with columns `t, z_0, ..`; piecewise constant between rows.
    File {
        path: String,
    },
}

/// Closed-form solutions of built-in scenarios. `x0` and `T0` are taken from
/// the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// `x0 + velocity (t - T0)`
    Affine { velocity: Vec<f64> },
    /// Componentwise maximum of `offset + velocity t` over the pieces.
    UpperEnvelope { pieces: Vec<AffinePiece> },
    /// `x0 cos(omega (t - T0))`
    Cosine { omega: f64 },
    /// `x0 exp(rate (t - T0))`
    Exponential { rate: f64 },
    /// Play operator: `x` stays in `[lower + s(t), upper + s(t)]` and moves
    /// only when pushed.
    Play { lower: f64, upper: f64, signal: Signal },
    /// `x' = -x + u(t)` on `[0, inf)` with piecewise constant `u`.
    ClampedRelaxation { input: Signal },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinePiece {
    pub offset: Vec<f64>,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub solution: Reference,
    /// Admissible sup-node error at the configured step.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Monte-Carlo pairs for the deviation estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation_pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

/// A run configuration: either a registered scenario, possibly with
/// overrides, or an inline problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Registry name; only a label when `problem` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub iteration: IterationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn named(name: &str) -> Self {
        ScenarioConfig {
            scenario: Some(name.to_string()),
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Fills every default and checks the numeric fields.
    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let base = match (&self.problem, &self.scenario) {
            (Some(_), _) => ScenarioConfig::default(),
            (None, Some(name)) => {
                find(name)
                    .ok_or_else(|| Error::Config(format!("unknown scenario `{name}`")))?
                    .config
            }
            (None, None) => return Err(Error::Config("either `scenario` or `problem` is required".into())),
        };
        let problem = self
            .problem
            .clone()
            .or(base.problem)
            .ok_or_else(|| Error::Config("scenario has no problem".into()))?;
        let name = self.scenario.clone().unwrap_or_else(|| "inline".to_string());

        let grid = if self.grid.h.is_some() || self.grid.nodes.is_some() {
            self.grid.clone()
        } else {
            base.grid
        };
        let grid = match (grid.h, grid.nodes) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `grid.h` or `grid.nodes`".into())),
            (Some(h), None) => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::Config(format!("grid.h = {h} must be positive")));
                }
                GridSize::Step(h)
            }
            (None, Some(n)) => {
                if n < 2 {
                    return Err(Error::Config("grid.nodes must be at least 2".into()));
                }
                GridSize::Nodes(n)
            }
            (None, None) => GridSize::Step(DEFAULT_H),
        };
        let tol = self.iteration.tol.or(base.iteration.tol).unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Config(format!("iteration.tol = {tol} must be positive")));
        }
        let max_iter = self
            .iteration
            .max_iter
            .or(base.iteration.max_iter)
            .unwrap_or(DEFAULT_MAX_ITER);
        if max_iter == 0 {
            return Err(Error::Config("iteration.max_iter must be positive".into()));
        }
        let reference = self.reference.clone().or(base.reference);
        if let Some(r) = &reference {
            if !(r.tolerance > 0.0 && r.tolerance.is_finite()) {
                return Err(Error::Config("reference.tolerance must be positive".into()));
            }
        }
        let selection = self.selection.clone().or(base.selection).unwrap_or_default();
        let deviation_pairs = self
            .verify
            .deviation_pairs
            .or(base.verify.deviation_pairs)
            .unwrap_or(DEFAULT_DEVIATION_PAIRS);
        let seed = self.verify.seed.or(base.verify.seed).unwrap_or(DEFAULT_SEED);
        check_finite_problem(&problem)?;
        let resolved = ResolvedScenario {
            name,
            problem,
            grid,
            tol,
            max_iter,
            selection,
            reference,
            deviation_pairs,
            seed,
            output: self.output.clone(),
        };
        resolved.build_problem()?;
        Ok(resolved)
    }
}

fn check_finite_problem(problem: &ProblemConfig) -> Result<()> {
    // serde_json cannot produce non-finite numbers, but configs built in code can
    let value = serde_json::to_value(problem).map_err(|e| Error::Config(e.to_string()))?;
    fn walk(v: &serde_json::Value) -> bool {
        match v {
            serde_json::Value::Null => false,
            serde_json::Value::Array(a) => a.iter().all(walk),
            serde_json::Value::Object(o) => o.values().all(walk),
            _ => true,
        }
    }
    if walk(&value) {
        Ok(())
    } else {
        Err(Error::Config("problem contains non-finite numbers".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSize {
    Step(f64),
    Nodes(usize),
}

/// A [`ScenarioConfig`] with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub name: String,
    pub problem: ProblemConfig,
    pub grid: GridSize,
    pub tol: f64,
    pub max_iter: usize,
    pub selection: SelectionConfig,
    pub reference: Option<ReferenceConfig>,
    pub deviation_pairs: usize,
    pub seed: u64,
    pub output: OutputConfig,
}

impl ResolvedScenario {
    pub fn build_problem(&self) -> Result<Problem> {
        Problem::from_config(&self.problem)
    }

    pub fn build_grid(&self) -> Result<Arc<TimeGrid>> {
        let [t0, t1] = self.problem.interval;
        let grid = match self.grid {
            GridSize::Step(h) => TimeGrid::uniform(t0, t1, h)?,
            GridSize::Nodes(n) => TimeGrid::with_steps(t0, t1, n - 1)?,
        };
        Ok(Arc::new(grid))
    }

    pub fn with_step(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("h = {h} must be positive")));
        }
        self.grid = GridSize::Step(h);
        Ok(self)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Config(format!("tol = {tol} must be positive")));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Result<Self> {
        if max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        self.max_iter = max_iter;
        Ok(self)
    }

    /// The selection of the configuration sampled on `grid`. Relative file
    /// paths are taken from `base_dir`.
    pub fn build_selection(&self, grid: &Arc<TimeGrid>, base_dir: Option<&Path>) -> Result<GridFunction> {
        let dim = self.problem.set_dim();
        match &self.selection {
            SelectionConfig::Zero => Ok(GridFunction::zeros(grid.clone(), dim, GridKind::Selection)),
            SelectionConfig::Constant { value } => {
                if value.len() != dim {
                    return Err(Error::Config(format!(
                        "selection has dimension {}, expected {dim}",
                        value.len()
                    )));
                }
                Ok(GridFunction::constant(grid.clone(), value, GridKind::Selection))
            }
            SelectionConfig::File { path } => {
                let path = match base_dir {
                    Some(dir) if Path::new(path).is_relative() => dir.join(path),
                    _ => Path::new(path).to_path_buf(),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let table = parse_selection_csv(&text, dim)?;
                Ok(table.resample(grid.clone()))
            }
        }
    }

    /// Fully explicit configuration; parses back to the same resolution.
    pub fn to_config(&self) -> ScenarioConfig {
        let (h, nodes) = match self.grid {
            GridSize::Step(h) => (Some(h), None),
            GridSize::Nodes(n) => (None, Some(n)),
        };
        ScenarioConfig {
            scenario: Some(self.name.clone()),
            problem: Some(self.problem.clone()),
            grid: GridConfig { h, nodes },
            iteration: IterationConfig {
                tol: Some(self.tol),
                max_iter: Some(self.max_iter),
            },
            selection: Some(self.selection.clone()),
            reference: self.reference.clone(),
            verify: VerifyConfig {
                deviation_pairs: Some(self.deviation_pairs),
                seed: Some(self.seed),
            },
            output: self.output.clone(),
        }
    }
}

impl ProblemConfig {
    pub fn set_dim(&self) -> usize {
        match &self.set.shape {
            SetShape::Free { dim } => *dim,
            SetShape::HalfSpace { normal, .. } => normal.len(),
            SetShape::Box { lower, .. } => lower.len(),
            SetShape::Ball { center, .. }
            | SetShape::BallComplement { center, .. }
            | SetShape::Annulus { center, .. } => center.len(),
        }
    }
}

fn parse_selection_csv(text: &str, dim: usize) -> Result<GridFunction> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let row = match parsed {
            Ok(row) => row,
            // header
            Err(_) if times.is_empty() && line_no == 0 => continue,
            Err(e) => return Err(Error::Config(format!("selection file line {}: {e}", line_no + 1))),
        };
        if row.len() != dim + 1 {
            return Err(Error::Config(format!(
                "selection file line {}: expected {} columns, found {}",
                line_no + 1,
                dim + 1,
                row.len()
            )));
        }
        times.push(row[0]);
        values.push(row[1..].to_vec());
    }
    if times.len() < 2 {
        return Err(Error::Config("selection file needs at least two rows".into()));
    }
    let grid = TimeGrid::from_nodes(times).map_err(|e| Error::Config(format!("selection file: {e}")))?;
    GridFunction::new(Arc::new(grid), values, GridKind::Selection)
        .map_err(|e| Error::Config(format!("selection file: {e}")))
}

impl Reference {
    pub fn eval(&self, t: f64, t0: f64, x0: &[f64]) -> Result<Point> {
        match self {
            Reference::Affine { velocity } => {
                check_len(velocity.len(), x0.len())?;
                Ok(linalg::axpy(x0, t - t0, velocity))
            }
            Reference::UpperEnvelope { pieces } => {
                let first = pieces
                    .first()
                    .ok_or_else(|| Error::Config("upper envelope needs a piece".into()))?;
                let mut out = linalg::axpy(&first.offset, t, &first.velocity);
                for p in pieces {
                    check_len(p.offset.len(), x0.len())?;
                    check_len(p.velocity.len(), x0.len())?;
                    let v = linalg::axpy(&p.offset, t, &p.velocity);
                    for (o, vi) in out.iter_mut().zip(v) {
                        *o = o.max(vi);
                    }
                }
                Ok(out)
            }
            Reference::Cosine { omega } => Ok(linalg::scale(x0, (omega * (t - t0)).cos())),
            Reference::Exponential { rate } => Ok(linalg::scale(x0, (rate * (t - t0)).exp())),
            Reference::Play { lower, upper, signal } => {
                check_len(1, x0.len())?;
                let mut x = x0[0];
                let clamp = |x: f64, s: f64| x.max(lower + signal.value(s)).min(upper + signal.value(s));
                for b in monotone_breaks(signal, t0, t)? {
                    x = clamp(x, b);
                }
                Ok(vec![clamp(x, t)])
            }
            Reference::ClampedRelaxation { input } => {
                check_len(1, x0.len())?;
                let half = match *input {
                    Signal::SquareWave { period, .. } => 0.5 * period,
                    Signal::Constant { .. } => f64::INFINITY,
                    _ => {
                        return Err(Error::Config(
                            "clamped relaxation needs a piecewise constant input".into(),
                        ))
                    }
                };
                let mut x = x0[0];
                let mut a = t0;
                while a < t {
                    let next = if half.is_finite() {
                        ((a / half).floor() + 1.0) * half
                    } else {
                        f64::INFINITY
                    };
                    let b = next.min(t);
                    let u = input.value(a);
                    x = (u + (x - u) * (-(b - a)).exp()).max(0.0);
                    a = b;
                }
                Ok(vec![x])
            }
        }
    }
}

fn check_len(found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Interior extrema of `signal` in `(t0, t)`, in increasing order.
fn monotone_breaks(signal: &Signal, t0: f64, t: f64) -> Result<Vec<f64>> {
    match *signal {
        Signal::Constant { .. } | Signal::Linear { .. } => Ok(Vec::new()),
        Signal::Sine { omega, phase, .. } => {
            if omega == 0.0 {
                return Ok(Vec::new());
            }
            let w = omega.abs();
            let p = phase * omega.signum();
            let first = ((w * t0 + p - FRAC_PI_2) / PI).floor() as i64 + 1;
            let mut out = Vec::new();
            let mut n = first;
            loop {
                let b = (FRAC_PI_2 + n as f64 * PI - p) / w;
                if b >= t {
                    break;
                }
                if b > t0 {
                    out.push(b);
                }
                n += 1;
            }
            Ok(out)
        }
        Signal::SquareWave { .. } => Err(Error::Config("play reference needs a continuous signal".into())),
    }
}

/// Registered scenario with a one-line description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub config: ScenarioConfig,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.config.problem.as_ref().map_or(0, |p| p.set_dim())
    }

    /// Feature tags for listings.
    pub fn tags(&self) -> Vec<&'static str> {
        let Some(p) = &self.config.problem else {
            return Vec::new();
        };
        let mut tags = Vec::new();
        tags.push(match p.set.shape {
            SetShape::Free { .. } => "free",
            SetShape::BallComplement { .. } | SetShape::Annulus { .. } => "nonconvex",
            _ => "convex",
        });
        tags.push(if p.set.motion.is_some() { "moving" } else { "static" });
        if !matches!(p.drift, DriftConfig::Zero) {
            tags.push("drift");
        }
        if !matches!(p.kernel, KernelConfig::Zero) {
            tags.push("memory");
        }
        tags.push(match &p.perturbation.shape {
            PerturbationShape::Singleton { value } if value.iter().all(|v| *v == 0.0) => "unperturbed",
            PerturbationShape::Singleton { .. } => "singleton-F",
            PerturbationShape::FiniteSet { .. } => "finite-F",
            PerturbationShape::Ball { .. } => "convex-F",
            PerturbationShape::LipschitzTwoPoint { .. } => "lipschitz-F",
        });
        if self.config.reference.is_some() {
            tags.push("closed-form");
        }
        tags
    }
}

fn problem(interval: [f64; 2], x0: Vec<f64>, set: SetConfig) -> ProblemConfig {
    let dim = x0.len();
    ProblemConfig {
        interval,
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

fn scenario(
    name: &'static str,
    summary: &'static str,
    problem: ProblemConfig,
    reference: Option<(Reference, f64)>,
) -> Scenario {
    Scenario {
        name,
        summary,
        config: ScenarioConfig {
            scenario: Some(name.to_string()),
            problem: Some(problem),
            reference: reference.map(|(solution, tolerance)| ReferenceConfig { solution, tolerance }),
            ..Default::default()
        },
    }
}

/// The built-in scenarios, in listing order.
pub fn registry() -> Vec<Scenario> {
    let wall = SetConfig::new(SetShape::HalfSpace {
        normal: vec![1.0],
        offset: 0.0,
    });
    let mut out = Vec::new();

    out.push(scenario(
        "moving-wall",
        "point swept by the wall [t, inf)",
        problem(
            [0.0, 1.0],
            vec![0.0],
            wall.clone()
                .moving(vec![1.0], Signal::Linear { value: 0.0, slope: 1.0 }),
        ),
        Some((Reference::Affine { velocity: vec![1.0] }, 1e-12)),
    ));

    let play_signal = Signal::Sine {
        amplitude: 1.0,
        omega: PI,
        phase: 0.0,
        offset: 0.0,
    };
    out.push(scenario(
        "play-operator",
        "play hysteresis: interval [s(t) - 1/2, s(t) + 1/2] with s = sin(pi t)",
        problem(
            [0.0, 2.0],
            vec![0.0],
            SetConfig::new(SetShape::Box {
                lower: vec![-0.5],
                upper: vec![0.5],
            })
            .moving(vec![1.0], play_signal.clone()),
        ),
        Some((
            Reference::Play {
                lower: -0.5,
                upper: 0.5,
                signal: play_signal,
            },
            1e-3,
        )),
    ));

    let mut cosine = problem([0.0, 1.0], vec![1.0], SetConfig::new(SetShape::Free { dim: 1 }));
    cosine.kernel = KernelConfig::Memory { scale: 1.0 };
    out.push(scenario(
        "volterra-cosine",
        "x' = -int_0^t x, the harmonic oscillator written as a memory term",
        cosine,
        Some((Reference::Cosine { omega: 1.0 }, 5e-3)),
    ));

    let mut obstacle = problem(
        [0.0, 1.0],
        vec![-1.1, 0.15],
        SetConfig::new(SetShape::BallComplement {
            center: vec![0.0, 0.0],
            radius: 1.0,
        }),
    );
    obstacle.drift = DriftConfig::Constant { value: vec![-1.0, 0.0] };
    out.push(scenario(
        "ball-complement-obstacle",
        "constant wind pushing a point onto the unit disc obstacle (R = 1)",
        obstacle,
        None,
    ));

    let mut two_point = problem([0.0, 1.0], vec![0.0], SetConfig::new(SetShape::Free { dim: 1 }));
    two_point.perturbation = PerturbationConfig::new(PerturbationShape::FiniteSet {
        points: vec![vec![-1.0], vec![1.0]],
    });
    out.push(scenario(
        "two-point-F",
        "F = {-1, 1} independent of x (k = 0)",
        two_point,
        Some((Reference::Affine { velocity: vec![1.0] }, 1e-12)),
    ));

    let mut lipschitz = problem(
        [0.0, 1.0],
        vec![0.0],
        SetConfig::new(SetShape::HalfSpace {
            normal: vec![-1.0],
            offset: -0.6,
        }),
    );
    lipschitz.perturbation = PerturbationConfig::new(PerturbationShape::LipschitzTwoPoint {
        base: 1.0,
        amplitude: 0.5,
    });
    out.push(scenario(
        "lipschitz-two-point-F",
        "F(x) = {-(1 + sin(x)/2), 1 + cos(x)/2} (k = 1/2) against the wall x <= 0.6",
        lipschitz,
        None,
    ));

    let mut singleton = problem(
        [0.0, 2.0],
        vec![0.0, 0.0],
        SetConfig::new(SetShape::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        })
        .moving(vec![1.0, 0.0], Signal::Linear { value: 0.0, slope: 0.3 }),
    );
    singleton.perturbation = PerturbationConfig::new(PerturbationShape::Singleton { value: vec![0.8, 0.0] });
    out.push(scenario(
        "singleton-F",
        "constant control F = {(0.8, 0)} inside a drifting unit disc",
        singleton,
        Some((
            Reference::UpperEnvelope {
                pieces: vec![
                    AffinePiece {
                        offset: vec![0.0, 0.0],
                        velocity: vec![-0.8, 0.0],
                    },
                    AffinePiece {
                        offset: vec![-1.0, 0.0],
                        velocity: vec![0.3, 0.0],
                    },
                ],
            },
            1e-9,
        )),
    ));

    let mut ball = problem(
        [0.0, 0.5],
        vec![2.0, 0.0],
        SetConfig::new(SetShape::Annulus {
            center: vec![0.0, 0.0],
            inner: 1.0,
            outer: 3.0,
        }),
    );
    ball.drift = DriftConfig::Linear {
        matrix: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
        forcing: None,
        signal: None,
    };
    ball.perturbation = PerturbationConfig::new(PerturbationShape::Ball {
        center: vec![0.0, 0.0],
        radius: 0.5,
    });
    out.push(scenario(
        "ball-F",
        "rotation in the annulus 1 <= |x| <= 3 with convex control set B[0, 1/2]",
        ball,
        None,
    ));

    let input = Signal::SquareWave {
        amplitude: 1.0,
        period: 1.0,
        offset: 0.0,
    };
    let mut diode = problem([0.0, 2.0], vec![0.0], wall);
    diode.drift = DriftConfig::Linear {
        matrix: vec![vec![1.0]],
        forcing: Some(vec![-1.0]),
        signal: Some(input.clone()),
    };
    out.push(scenario(
        "diode-clamp",
        "RC circuit x' = -x + u(t) behind an ideal diode (x >= 0), square-wave u",
        diode,
        Some((Reference::ClampedRelaxation { input }, 5e-3)),
    ));

    out
}

pub fn find(name: &str) -> Option<Scenario> {
    registry().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepper::{solve_fixed_selection, solve_unperturbed};

    #[test]
    fn registry_names_are_unique() {
        let reg = registry();
        assert!(reg.len() >= 9);
        for (i, a) in reg.iter().enumerate() {
            assert!(reg[i + 1..].iter().all(|b| b.name != a.name));
            assert!(a.config.resolve().is_ok(), "{}", a.name);
        }
    }

    #[test]
    fn round_trip_through_json() {
        for s in registry() {
            let resolved = ScenarioConfig::named(s.name).resolve().unwrap();
            let text = resolved.to_config().to_json();
            let again = ScenarioConfig::from_json(&text).unwrap().resolve().unwrap();
            assert_eq!(resolved, again, "{}", s.name);
        }
    }

    #[test]
    fn overrides_apply_on_top_of_the_registry() {
        let mut cfg = ScenarioConfig::named("moving-wall");
        cfg.grid.h = Some(0.25);
        cfg.iteration.max_iter = Some(3);
        let r = cfg.resolve().unwrap();
        assert_eq!(r.grid, GridSize::Step(0.25));
        assert_eq!(r.max_iter, 3);
        assert_eq!(r.build_grid().unwrap().steps(), 4);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(ScenarioConfig::from_json("{ not json").is_err());
        assert!(ScenarioConfig::from_json(r#"{"scenario": "moving-wall", "extra": 1}"#).is_err());
        assert!(ScenarioConfig::named("no-such-thing").resolve().is_err());
        assert!(ScenarioConfig::default().resolve().is_err());
        let mut cfg = ScenarioConfig::named("moving-wall");
        cfg.grid.h = Some(-1.0);
        assert!(cfg.resolve().is_err());
        let mut cfg = ScenarioConfig::named("moving-wall");
        cfg.iteration.tol = Some(0.0);
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn references_match_the_scheme() {
        for s in registry() {
            let Some(reference) = &s.config.reference else { continue };
            let r = s.config.resolve().unwrap();
            let p = r.build_problem().unwrap();
            let g = r.build_grid().unwrap();
            let z = GridFunction::zeros(g.clone(), p.dim(), GridKind::Selection);
            // the perturbed scenarios use their known selection
            let z = match &r.problem.perturbation.shape {
                PerturbationShape::Singleton { value } => GridFunction::constant(g.clone(), value, GridKind::Selection),
                PerturbationShape::FiniteSet { .. } => GridFunction::constant(g.clone(), &[-1.0], GridKind::Selection),
                _ => z,
            };
            let traj = solve_fixed_selection(&p, &z, &g).unwrap();
            let err = traj
                .states()
                .iter()
                .zip(g.nodes())
                .map(|(x, &t)| linalg::dist(x, &reference.solution.eval(t, p.t0, &p.x0).unwrap()))
                .fold(0.0, f64::max);
            assert!(err <= reference.tolerance, "{}: {err:e}", s.name);
        }
    }

    #[test]
    fn play_reference_by_hand() {
        let signal = Signal::Sine {
            amplitude: 1.0,
            omega: PI,
            phase: 0.0,
            offset: 0.0,
        };
        let r = Reference::Play {
            lower: -0.5,
            upper: 0.5,
            signal,
        };
        assert_eq!(r.eval(0.1, 0.0, &[0.0]).unwrap(), vec![0.0]);
        // pushed up to 1 - 1/2 at the maximum t = 1/2, then left behind
        assert!((r.eval(0.5, 0.0, &[0.0]).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((r.eval(0.9, 0.0, &[0.0]).unwrap()[0] - 0.5).abs() < 1e-15);
        let s = (PI * 1.2).sin();
        assert!((r.eval(1.2, 0.0, &[0.0]).unwrap()[0] - (s + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn diode_reference_by_hand() {
        let r = Reference::ClampedRelaxation {
            input: Signal::SquareWave {
                amplitude: 1.0,
                period: 1.0,
                offset: 0.0,
            },
        };
        let xa = 1.0 - (-0.5f64).exp();
        assert!((r.eval(0.5, 0.0, &[0.0]).unwrap()[0] - xa).abs() < 1e-15);
        let hit = 0.5 + (1.0 + xa).ln();
        assert!(r.eval(hit - 1e-3, 0.0, &[0.0]).unwrap()[0] > 0.0);
        assert_eq!(r.eval(hit + 1e-3, 0.0, &[0.0]).unwrap()[0], 0.0);
        assert_eq!(r.eval(1.0, 0.0, &[0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn selection_from_file() {
        let dir = std::env::temp_dir().join(format!("moreau-sel-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("z.csv"), "t,z_0\n0,0.5\n0.5,-0.5\n1,-0.5\n").unwrap();
        let mut cfg = ScenarioConfig::named("moving-wall");
        cfg.selection = Some(SelectionConfig::File { path: "z.csv".into() });
        cfg.grid.h = Some(0.25);
        let r = cfg.resolve().unwrap();
        let g = r.build_grid().unwrap();
        let z = r.build_selection(&g, Some(&dir)).unwrap();
        assert_eq!(z.values, vec![vec![0.5], vec![0.5], vec![-0.5], vec![-0.5], vec![-0.5]]);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn unperturbed_scenarios_have_zero_selection() {
        let r = ScenarioConfig::named("volterra-cosine").resolve().unwrap();
        let p = r.build_problem().unwrap();
        let g = r.build_grid().unwrap();
        let q = solve_unperturbed(&p, &g).unwrap();
        let z = r.build_selection(&g, None).unwrap();
        assert_eq!(q, solve_fixed_selection(&p, &z, &g).unwrap());
    }
}
