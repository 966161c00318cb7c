//! Scenario files: TOML documents describing one field, one grid, a set of
//! initial values and a list of queries.

use serde::Deserialize;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    pub field: FieldSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub initial_values: Vec<Vec<f64>>,
    pub queries: Vec<Query>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_end: f64,
    pub n_steps: usize,
}

/// Builtin right-hand sides.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    /// f = 0 in the given dimension.
    Zero {
        #[serde(default = "one")]
        dimension: usize,
    },
    /// f(t, x) = λx in one dimension.
    Linear { lambda: f64 },
    /// f(t, x) = amplitude·sin(x) in one dimension.
    Sine {
        #[serde(default = "minus_one")]
        amplitude: f64,
    },
    /// f(t, x) = A x with lower-triangular A.
    TriangularLinear { matrix: Vec<Vec<f64>> },
    /// The planar system whose solutions all vanish at one time.
    Counterexample,
}

fn one() -> usize {
    1
}

fn minus_one() -> f64 {
    -1.0
}

/// A point of the complex plane, written as a real or as `[re, im]`.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Point {
    Real(f64),
    Complex([f64; 2]),
}

impl Point {
    pub fn parts(self) -> (f64, f64) {
        match self {
            Point::Real(x) => (x, 0.0),
            Point::Complex([re, im]) => (re, im),
        }
    }
}

/// Inversion targets: reals for scalar fields, vectors otherwise.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Targets {
    Scalars(Vec<f64>),
    Vectors(Vec<Vec<f64>>),
}

impl Targets {
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        match self {
            Targets::Scalars(v) => v.iter().map(|&x| vec![x]).collect(),
            Targets::Vectors(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Query {
    /// Trajectories from every initial value.
    Solve,
    /// Rate estimates for the first two initial values.
    Bounds { tolerance: Option<f64> },
    /// Φ_{s,t}(x) for each x.
    Flow {
        s: f64,
        t: f64,
        x: Vec<f64>,
        tolerance: Option<f64>,
    },
    /// Φ_{0,t}⁻¹ of each target.
    Invert {
        t: f64,
        x_star: Targets,
        tolerance: Option<f64>,
    },
    /// Construction and collapse check; T replaces the grid's t_end.
    Counterexample {
        #[serde(default)]
        initials: Vec<[f64; 2]>,
        #[serde(default)]
        random_initials: usize,
        collapse_tolerance: Option<f64>,
    },
    /// Table of E_{α,β} on the segment from `start` to `stop`.
    Ml {
        alpha: Option<f64>,
        #[serde(default = "unit")]
        beta: f64,
        start: Point,
        stop: Point,
        points: usize,
    },
}

fn unit() -> f64 {
    1.0
}

impl Query {
    pub fn kind(&self) -> &'static str {
        match self {
            Query::Solve => "solve",
            Query::Bounds { .. } => "bounds",
            Query::Flow { .. } => "flow",
            Query::Invert { .. } => "invert",
            Query::Counterexample { .. } => "counterexample",
            Query::Ml { .. } => "ml",
        }
    }
}

impl FieldSpec {
    pub fn dimension(&self) -> usize {
        match self {
            FieldSpec::Zero { dimension } => *dimension,
            FieldSpec::Linear { .. } | FieldSpec::Sine { .. } => 1,
            FieldSpec::TriangularLinear { matrix } => matrix.len(),
            FieldSpec::Counterexample => 2,
        }
    }
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn finite(name: &str, x: f64) -> Result<(), ScenarioError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {x}")))
    }
}

fn positive_tolerance(tol: Option<f64>) -> Result<(), ScenarioError> {
    match tol {
        Some(t) if !(t.is_finite() && t > 0.0) => Err(invalid(format!("tolerance must be finite and positive, got {t}"))),
        _ => Ok(()),
    }
}

fn tolerance_ok(tol: Option<f64>) -> Result<(), ScenarioError> {
    match tol {
        Some(t) if !(t.is_finite() && t >= 0.0) => Err(invalid(format!("tolerance must be finite and nonnegative, got {t}"))),
        _ => Ok(()),
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(invalid("name must be nonempty and use only ASCII letters, digits, '-' and '_'"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.grid.t_end.is_finite() && self.grid.t_end > 0.0) {
            return Err(invalid(format!("grid.t_end must be positive, got {}", self.grid.t_end)));
        }
        if self.grid.n_steps < 2 {
            return Err(invalid(format!("grid.n_steps must be at least 2, got {}", self.grid.n_steps)));
        }
        if self.queries.is_empty() {
            return Err(invalid("at least one query is required"));
        }
        let d = self.field.dimension();
        match &self.field {
            FieldSpec::Zero { dimension } if *dimension == 0 => return Err(invalid("zero field needs dimension >= 1")),
            FieldSpec::Linear { lambda } => finite("lambda", *lambda)?,
            FieldSpec::Sine { amplitude } => finite("amplitude", *amplitude)?,
            FieldSpec::TriangularLinear { matrix } => {
                if matrix.is_empty() {
                    return Err(invalid("matrix must be nonempty"));
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != d {
                        return Err(invalid(format!("matrix row {} has {} entries, expected {d}", i + 1, row.len())));
                    }
                    for (j, &v) in row.iter().enumerate() {
                        finite("matrix entry", v)?;
                        if j > i && v != 0.0 {
                            return Err(invalid(format!("matrix is not lower triangular: entry ({}, {}) = {v}", i + 1, j + 1)));
                        }
                    }
                }
            }
            _ => {}
        }
        for (i, x) in self.initial_values.iter().enumerate() {
            if x.len() != d {
                return Err(invalid(format!("initial value {} has dimension {}, field has {d}", i + 1, x.len())));
            }
            for &v in x {
                finite("initial value", v)?;
            }
        }
        for q in &self.queries {
            self.validate_query(q, d)?;
        }
        Ok(())
    }

    fn validate_query(&self, q: &Query, d: usize) -> Result<(), ScenarioError> {
        match q {
            Query::Solve => {
                if self.initial_values.is_empty() {
                    return Err(invalid("solve needs at least one initial value"));
                }
            }
            Query::Bounds { tolerance } => {
                tolerance_ok(*tolerance)?;
                if self.initial_values.len() < 2 {
                    return Err(invalid("bounds needs two initial values"));
                }
                if self.initial_values[0] == self.initial_values[1] {
                    return Err(invalid("bounds needs two distinct initial values"));
                }
            }
            Query::Flow { s, t, x, tolerance } => {
                positive_tolerance(*tolerance)?;
                if d != 1 {
                    return Err(invalid("flow queries need a scalar field"));
                }
                self.check_time("s", *s)?;
                self.check_time("t", *t)?;
                if x.is_empty() {
                    return Err(invalid("flow needs at least one x"));
                }
                for &v in x {
                    finite("x", v)?;
                }
            }
            Query::Invert { t, x_star, tolerance } => {
                positive_tolerance(*tolerance)?;
                if !matches!(self.field, FieldSpec::TriangularLinear { .. }) && d != 1 {
                    return Err(invalid("invert needs a scalar or triangular field"));
                }
                self.check_time("t", *t)?;
                let targets = x_star.vectors();
                if targets.is_empty() {
                    return Err(invalid("invert needs at least one target"));
                }
                for v in &targets {
                    if v.len() != d {
                        return Err(invalid(format!("target has dimension {}, field has {d}", v.len())));
                    }
                    for &x in v {
                        finite("x_star", x)?;
                    }
                }
            }
            Query::Counterexample {
                initials,
                random_initials,
                collapse_tolerance,
            } => {
                tolerance_ok(*collapse_tolerance)?;
                if initials.is_empty() && *random_initials == 0 {
                    return Err(invalid("counterexample needs initials or random_initials"));
                }
                for p in initials {
                    finite("initial", p[0])?;
                    finite("initial", p[1])?;
                }
            }
            Query::Ml {
                alpha,
                beta,
                start,
                stop,
                points,
            } => {
                if let Some(a) = alpha {
                    if !(a.is_finite() && *a > 0.0 && *a <= 1.0) {
                        return Err(invalid(format!("ml alpha must lie in (0, 1], got {a}")));
                    }
                }
                finite("beta", *beta)?;
                let (a, b) = start.parts();
                let (c, e) = stop.parts();
                for v in [a, b, c, e] {
                    finite("ml range", v)?;
                }
                if *points == 0 {
                    return Err(invalid("ml needs at least one point"));
                }
            }
        }
        Ok(())
    }

    fn check_time(&self, name: &str, t: f64) -> Result<(), ScenarioError> {
        if !(t.is_finite() && t >= 0.0 && t <= self.grid.t_end) {
            return Err(invalid(format!("{name} = {t} lies outside [0, {}]", self.grid.t_end)));
        }
        Ok(())
    }
}
