//! JSON scenario schema (version 1) and its validation.
//!
//! Parsing happens in two passes. Serde checks the document shape, then each
//! named component is resolved against its own parameter schema so errors
//! carry the full field path.

use std::path::Path;

use fabric_core::energization::{Variant, DEFAULT_SIGMA, DEFAULT_VANISHING_EPS};
use fabric_core::regulation::{
    RegulatorGuard, DEFAULT_BETA, DEFAULT_BETA_MAX, DEFAULT_ENERGY_MAX, DEFAULT_GAMMA_MAX, DEFAULT_SOFTNORM_EPS,
};
use fabric_core::simulation::{ConvergenceCriterion, DEFAULT_DT};
use fabric_core::{Matrix, State, Vector};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawComponent {
    pub name: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEnergization {
    pub variant: String,
    pub eps: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawState {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConvergence {
    #[serde(default = "default_tol")]
    pub speed_tol: f64,
    #[serde(default = "default_tol")]
    pub accel_tol: f64,
    #[serde(default = "default_hold")]
    pub hold_steps: usize,
}

fn default_tol() -> f64 {
    1e-4
}

fn default_hold() -> usize {
    100
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawJitter {
    #[serde(default)]
    pub position: f64,
    #[serde(default)]
    pub velocity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPathTwin {
    #[serde(default = "default_speed_scale")]
    pub speed_scale: f64,
    pub damping: Option<f64>,
    #[serde(default = "default_path_length")]
    pub path_length: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_path_tol")]
    pub tolerance: f64,
}

fn default_speed_scale() -> f64 {
    2.0
}

fn default_path_length() -> f64 {
    1.0
}

fn default_samples() -> usize {
    200
}

fn default_path_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAudit {
    #[serde(default = "default_drift_tol")]
    pub drift_tolerance: f64,
    #[serde(default = "default_drift_tol")]
    pub cap_tolerance: f64,
    #[serde(default = "default_descent_tol")]
    pub descent_tolerance: f64,
    #[serde(default = "default_path_tol")]
    pub zero_set_tolerance: f64,
    #[serde(default = "default_monitor_fraction")]
    pub monitor_fraction: f64,
    pub path_twin: Option<RawPathTwin>,
}

impl Default for RawAudit {
    fn default() -> Self {
        Self {
            drift_tolerance: default_drift_tol(),
            cap_tolerance: default_drift_tol(),
            descent_tolerance: default_descent_tol(),
            zero_set_tolerance: default_path_tol(),
            monitor_fraction: default_monitor_fraction(),
            path_twin: None,
        }
    }
}

fn default_drift_tol() -> f64 {
    1e-6
}

fn default_descent_tol() -> f64 {
    1e-8
}

fn default_monitor_fraction() -> f64 {
    0.99
}

/// The document as written on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub dimension: usize,
    pub generator: RawComponent,
    pub energy: RawComponent,
    #[serde(default)]
    pub energization: Option<RawEnergization>,
    #[serde(default)]
    pub potential: Option<RawComponent>,
    #[serde(default)]
    pub policy: Option<RawComponent>,
    #[serde(default)]
    pub regulator: Option<RawComponent>,
    pub initial_state: RawState,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub convergence: Option<RawConvergence>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_jitter: Option<RawJitter>,
    #[serde(default)]
    pub audit: RawAudit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Quadratic { center: Vector, gain: f64 },
    Gaussian { center: Vector, height: f64, width: f64 },
    Sum(Vec<PotentialSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub center: Vector,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Zero,
    Barrier { field: PotentialSpec },
    Attractor { goal: Vector },
    Constant { value: Vector },
    Tree { obstacles: Vec<Obstacle>, metric_gain: f64, accel_gain: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnergySpec {
    Euclidean,
    ConstantMetric { metric: Matrix },
    Conformal { axis: usize, gain: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    Energy,
    Constant(Matrix),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    None,
    Constant { value: Vector },
    DefaultCompatible { eps: f64, damping: Matrix },
    /// `−M⁻¹(∂ψ + Bq̇)`; with no regulator (or a scalar damper) this is the
    /// damped-potential form watched by the Lyapunov monitor.
    PotentialForce { metric: MetricSpec, damping: Matrix },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegulatorSpec {
    None,
    DamperMatrix { damping: Matrix },
    DamperScalar { beta: f64 },
    Capping1 { damping: Matrix, gamma_max: f64, energy_max: f64 },
    Capping2 { beta: f64, beta_max: f64, energy_max: f64, guard: RegulatorGuard },
    TheoremMain { beta: f64, guard: RegulatorGuard },
}

impl RegulatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            RegulatorSpec::None => "none",
            RegulatorSpec::DamperMatrix { .. } => "damper_matrix",
            RegulatorSpec::DamperScalar { .. } => "damper_scalar",
            RegulatorSpec::Capping1 { .. } => "capping_1",
            RegulatorSpec::Capping2 { .. } => "capping_2",
            RegulatorSpec::TheoremMain { .. } => "theorem_main",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathTwin {
    pub speed_scale: f64,
    pub damping: Option<f64>,
    pub path_length: f64,
    pub samples: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub drift_tolerance: f64,
    pub cap_tolerance: f64,
    pub descent_tolerance: f64,
    pub zero_set_tolerance: f64,
    pub monitor_fraction: f64,
    pub path_twin: Option<PathTwin>,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    pub generator: GeneratorSpec,
    pub energy: EnergySpec,
    pub energization: Variant,
    pub potential: Option<PotentialSpec>,
    pub policy: PolicySpec,
    pub regulator: RegulatorSpec,
    pub initial_state: State,
    pub dt: f64,
    pub duration: f64,
    pub convergence: Option<ConvergenceCriterion>,
    pub seed: u64,
    pub position_jitter: f64,
    pub velocity_jitter: f64,
    pub audit: AuditConfig,
}

impl Scenario {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// The damped-potential form: a potential force policy with no regulator
    /// beyond an optional scalar damper.
    pub fn is_damped_potential(&self) -> bool {
        matches!(self.policy, PolicySpec::PotentialForce { .. })
            && matches!(self.regulator, RegulatorSpec::None | RegulatorSpec::DamperScalar { .. })
    }

    pub fn is_pure_fabric(&self) -> bool {
        self.policy == PolicySpec::None && self.regulator == RegulatorSpec::None
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// Parses and validates a scenario document. `origin` names the source in
/// parse errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            HarnessError::validation(path, inner.to_string())
        } else {
            HarnessError::Parse {
                path: origin.to_string(),
                message: inner.to_string(),
            }
        }
    })?;
    validate(&raw)
}

pub fn validate(raw: &RawScenario) -> Result<Scenario> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::validation(
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
        ));
    }
    if raw.name.trim().is_empty() {
        return Err(HarnessError::validation("name", "must not be empty"));
    }
    let n = raw.dimension;
    if n == 0 {
        return Err(HarnessError::validation("dimension", "must be at least 1"));
    }

    let generator = generator_spec(&raw.generator, n, "generator")?;
    let energy = energy_spec(&raw.energy, n, "energy")?;
    let energization = energization_spec(raw.energization.as_ref())?;
    let potential = raw.potential.as_ref().map(|p| potential_spec(p, n, "potential")).transpose()?;
    let policy = match &raw.policy {
        Some(c) => policy_spec(c, n, "policy")?,
        None => PolicySpec::None,
    };
    let regulator = match &raw.regulator {
        Some(c) => regulator_spec(c, n, "regulator")?,
        None => RegulatorSpec::None,
    };

    let q = vector_from(&raw.initial_state.q, n, "initial_state.q")?;
    let qd = vector_from(&raw.initial_state.qd, n, "initial_state.qd")?;
    let initial_state = State::new(q, qd).map_err(|e| HarnessError::validation("initial_state", e.to_string()))?;

    positive(raw.dt, "dt")?;
    positive(raw.duration, "duration")?;
    let convergence = raw
        .convergence
        .as_ref()
        .map(|c| {
            let crit = ConvergenceCriterion {
                speed_tol: c.speed_tol,
                accel_tol: c.accel_tol,
                hold_steps: c.hold_steps,
            };
            crit.validate().map(|_| crit).map_err(|e| HarnessError::validation("convergence", e.to_string()))
        })
        .transpose()?;
    let jitter = raw.initial_jitter.clone().unwrap_or_default();
    non_negative(jitter.position, "initial_jitter.position")?;
    non_negative(jitter.velocity, "initial_jitter.velocity")?;

    let needs_potential = match (&policy, &regulator) {
        (PolicySpec::DefaultCompatible { .. }, _) => Some("policy"),
        (PolicySpec::PotentialForce { .. }, _) => Some("policy"),
        (_, RegulatorSpec::TheoremMain { .. }) => Some("regulator"),
        _ => None,
    };
    if let (Some(field), None) = (needs_potential, &potential) {
        return Err(HarnessError::validation(
            field,
            "requires a scenario-level `potential`",
        ));
    }
    if matches!(
        regulator,
        RegulatorSpec::Capping1 { .. } | RegulatorSpec::Capping2 { .. } | RegulatorSpec::TheoremMain { .. }
    ) && policy == PolicySpec::None
    {
        return Err(HarnessError::validation(
            "regulator",
            format!("`{}` regulates a navigation policy; `policy` is missing", regulator.name()),
        ));
    }
    if energization == Variant::Exact
        && initial_state.speed() == 0.0
        && jitter.velocity == 0.0
        && !matches!(regulator, RegulatorSpec::TheoremMain { .. })
    {
        return Err(HarnessError::validation(
            "energization.variant",
            "the exact variant is undefined at zero velocity and `initial_state.qd` is zero",
        ));
    }

    let audit = audit_config(&raw.audit)?;
    if audit.path_twin.is_some() && !(policy == PolicySpec::None && regulator == RegulatorSpec::None) {
        return Err(HarnessError::validation(
            "audit.path_twin",
            "path consistency applies to unforced fabrics (no policy, no regulator)",
        ));
    }

    Ok(Scenario {
        name: raw.name.clone(),
        dimension: n,
        generator,
        energy,
        energization,
        potential,
        policy,
        regulator,
        initial_state,
        dt: raw.dt,
        duration: raw.duration,
        convergence,
        seed: raw.seed,
        position_jitter: jitter.position,
        velocity_jitter: jitter.velocity,
        audit,
    })
}

fn positive(x: f64, field: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::validation(field, format!("must be a finite number > 0, got {x}")))
    }
}

fn non_negative(x: f64, field: &str) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::validation(field, format!("must be a finite number >= 0, got {x}")))
    }
}

fn vector_from(values: &[f64], n: usize, field: &str) -> Result<Vector> {
    if values.len() != n {
        return Err(HarnessError::validation(
            field,
            format!("has length {} but `dimension` is {n}", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::validation(field, "entries must be finite"));
    }
    Ok(Vector::from_column_slice(values))
}

fn unknown(field: &str, name: &str, expected: &[&str]) -> HarnessError {
    HarnessError::UnknownComponent {
        field: field.to_string(),
        name: name.to_string(),
        expected: expected.join(", "),
    }
}

/// Typed access to a component's `params` object.
struct Params<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl<'a> Params<'a> {
    fn new(component: &'a RawComponent, path: &str, allowed: &[&str]) -> Result<Self> {
        let p = Self {
            path: format!("{path}.params"),
            map: &component.params,
        };
        if let Some(k) = p.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(HarnessError::validation(
                p.field(k),
                format!("unknown parameter for `{}` (allowed: {})", component.name, allowed.join(", ")),
            ));
        }
        Ok(p)
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn required(&self, key: &str) -> Result<&'a Value> {
        self.get(key).ok_or_else(|| HarnessError::validation(self.field(key), "missing required parameter"))
    }

    fn number(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match (self.get(key), default) {
            (None, Some(d)) => Ok(d),
            (None, None) => Err(HarnessError::validation(self.field(key), "missing required parameter")),
            (Some(v), _) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| HarnessError::validation(self.field(key), format!("expected a finite number, got {v}"))),
        }
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let x = self.number(key, default)?;
        positive(x, &self.field(key)).map(|_| x)
    }

    fn non_negative(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let x = self.number(key, default)?;
        non_negative(x, &self.field(key)).map(|_| x)
    }

    fn vector(&self, key: &str, n: usize) -> Result<Vector> {
        parse_vector(self.required(key)?, n, &self.field(key))
    }

    /// An `n × n` matrix given as rows, a scalar multiple of the identity,
    /// or `default` when absent.
    fn matrix(&self, key: &str, n: usize, default: Option<Matrix>) -> Result<Matrix> {
        match (self.get(key), default) {
            (None, Some(d)) => Ok(d),
            (None, None) => Err(HarnessError::validation(self.field(key), "missing required parameter")),
            (Some(v), _) => parse_matrix(v, n, &self.field(key)),
        }
    }

    fn guard(&self) -> Result<RegulatorGuard> {
        let d = RegulatorGuard::default();
        Ok(RegulatorGuard {
            eps: self.positive("eps", Some(d.eps))?,
            sigma: self.positive("sigma", Some(d.sigma))?,
        })
    }
}

fn parse_vector(v: &Value, n: usize, field: &str) -> Result<Vector> {
    let arr = v
        .as_array()
        .ok_or_else(|| HarnessError::validation(field, format!("expected an array of {n} numbers")))?;
    let values: Option<Vec<f64>> = arr.iter().map(Value::as_f64).collect();
    let values = values.ok_or_else(|| HarnessError::validation(field, "entries must be numbers"))?;
    vector_from(&values, n, field)
}

fn parse_matrix(v: &Value, n: usize, field: &str) -> Result<Matrix> {
    if let Some(s) = v.as_f64() {
        return Ok(Matrix::identity(n, n) * s);
    }
    let rows = v
        .as_array()
        .ok_or_else(|| HarnessError::validation(field, format!("expected {n} rows of {n} numbers or a scalar")))?;
    if rows.len() != n {
        return Err(HarnessError::validation(
            field,
            format!("has {} rows but `dimension` is {n}", rows.len()),
        ));
    }
    let mut m = Matrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let r = parse_vector(row, n, &format!("{field}[{i}]"))?;
        m.set_row(i, &r.transpose());
    }
    Ok(m)
}

const GENERATORS: &[&str] = &["zero", "barrier", "attractor", "constant", "tree"];

fn generator_spec(c: &RawComponent, n: usize, path: &str) -> Result<GeneratorSpec> {
    match c.name.as_str() {
        "zero" => {
            Params::new(c, path, &[])?;
            Ok(GeneratorSpec::Zero)
        }
        "barrier" => {
            let p = Params::new(c, path, &["field"])?;
            let raw: RawComponent = serde_json::from_value(p.required("field")?.clone())
                .map_err(|e| HarnessError::validation(p.field("field"), e.to_string()))?;
            Ok(GeneratorSpec::Barrier {
                field: potential_spec(&raw, n, &p.field("field"))?,
            })
        }
        "attractor" => {
            let p = Params::new(c, path, &["goal"])?;
            Ok(GeneratorSpec::Attractor { goal: p.vector("goal", n)? })
        }
        "constant" => {
            let p = Params::new(c, path, &["value"])?;
            Ok(GeneratorSpec::Constant { value: p.vector("value", n)? })
        }
        "tree" => {
            let p = Params::new(c, path, &["obstacles", "metric_gain", "accel_gain"])?;
            let list = p
                .required("obstacles")?
                .as_array()
                .ok_or_else(|| HarnessError::validation(p.field("obstacles"), "expected an array"))?;
            let mut obstacles = Vec::with_capacity(list.len());
            for (i, o) in list.iter().enumerate() {
                let f = format!("{}[{i}]", p.field("obstacles"));
                let center = o
                    .get("center")
                    .ok_or_else(|| HarnessError::validation(format!("{f}.center"), "missing"))
                    .and_then(|v| parse_vector(v, n, &format!("{f}.center")))?;
                let radius = o
                    .get("radius")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| HarnessError::validation(format!("{f}.radius"), "expected a number"))?;
                non_negative(radius, &format!("{f}.radius"))?;
                obstacles.push(Obstacle { center, radius });
            }
            Ok(GeneratorSpec::Tree {
                obstacles,
                metric_gain: p.positive("metric_gain", Some(1.0))?,
                accel_gain: p.non_negative("accel_gain", Some(1.0))?,
            })
        }
        other => Err(unknown(&format!("{path}.name"), other, GENERATORS)),
    }
}

const ENERGIES: &[&str] = &["euclidean", "constant_metric", "conformal"];

fn energy_spec(c: &RawComponent, n: usize, path: &str) -> Result<EnergySpec> {
    match c.name.as_str() {
        "euclidean" => {
            Params::new(c, path, &[])?;
            Ok(EnergySpec::Euclidean)
        }
        "constant_metric" => {
            let p = Params::new(c, path, &["metric"])?;
            let metric = p.matrix("metric", n, None)?;
            fabric_core::linalg::check_spd(&metric).map_err(|e| HarnessError::validation(p.field("metric"), e.to_string()))?;
            Ok(EnergySpec::ConstantMetric { metric })
        }
        "conformal" => {
            let p = Params::new(c, path, &["axis", "gain"])?;
            let axis = p.number("axis", Some(0.0))?;
            if axis.fract() != 0.0 || axis < 0.0 || axis as usize >= n {
                return Err(HarnessError::validation(p.field("axis"), format!("must be an index below {n}")));
            }
            Ok(EnergySpec::Conformal {
                axis: axis as usize,
                gain: p.non_negative("gain", None)?,
            })
        }
        other => Err(unknown(&format!("{path}.name"), other, ENERGIES)),
    }
}

const POTENTIALS: &[&str] = &["quadratic", "gaussian", "sum"];

fn potential_spec(c: &RawComponent, n: usize, path: &str) -> Result<PotentialSpec> {
    match c.name.as_str() {
        "quadratic" => {
            let p = Params::new(c, path, &["center", "gain"])?;
            Ok(PotentialSpec::Quadratic {
                center: p.vector("center", n)?,
                gain: p.positive("gain", Some(1.0))?,
            })
        }
        "gaussian" => {
            let p = Params::new(c, path, &["center", "height", "width"])?;
            Ok(PotentialSpec::Gaussian {
                center: p.vector("center", n)?,
                height: p.number("height", None)?,
                width: p.positive("width", None)?,
            })
        }
        "sum" => {
            let p = Params::new(c, path, &["terms"])?;
            let list = p
                .required("terms")?
                .as_array()
                .ok_or_else(|| HarnessError::validation(p.field("terms"), "expected an array of potentials"))?;
            let mut terms = Vec::with_capacity(list.len());
            for (i, t) in list.iter().enumerate() {
                let f = format!("{}[{i}]", p.field("terms"));
                let raw: RawComponent =
                    serde_json::from_value(t.clone()).map_err(|e| HarnessError::validation(f.clone(), e.to_string()))?;
                terms.push(potential_spec(&raw, n, &f)?);
            }
            if terms.is_empty() {
                return Err(HarnessError::validation(p.field("terms"), "must not be empty"));
            }
            Ok(PotentialSpec::Sum(terms))
        }
        other => Err(unknown(&format!("{path}.name"), other, POTENTIALS)),
    }
}

fn energization_spec(raw: Option<&RawEnergization>) -> Result<Variant> {
    let Some(raw) = raw else {
        return Ok(Variant::default());
    };
    let eps = raw.eps.unwrap_or(DEFAULT_VANISHING_EPS);
    let sigma = raw.sigma.unwrap_or(DEFAULT_SIGMA);
    let v = match raw.variant.as_str() {
        "exact" => {
            if raw.eps.is_some() || raw.sigma.is_some() {
                return Err(HarnessError::validation("energization", "the exact variant takes no eps or sigma"));
            }
            Variant::Exact
        }
        "vanishing" => {
            if raw.sigma.is_some() {
                return Err(HarnessError::validation("energization.sigma", "only the robust variant takes sigma"));
            }
            Variant::Vanishing { eps }
        }
        "robust" => Variant::Robust { eps, sigma },
        other => return Err(unknown("energization.variant", other, &["exact", "vanishing", "robust"])),
    };
    v.validate().map_err(|e| HarnessError::validation("energization", e.to_string()))?;
    Ok(v)
}

const POLICIES: &[&str] = &["none", "constant", "default_compatible", "potential_force"];

fn policy_spec(c: &RawComponent, n: usize, path: &str) -> Result<PolicySpec> {
    match c.name.as_str() {
        "none" => {
            Params::new(c, path, &[])?;
            Ok(PolicySpec::None)
        }
        "constant" => {
            let p = Params::new(c, path, &["value"])?;
            Ok(PolicySpec::Constant { value: p.vector("value", n)? })
        }
        "default_compatible" => {
            let p = Params::new(c, path, &["eps", "damping"])?;
            Ok(PolicySpec::DefaultCompatible {
                eps: p.positive("eps", Some(DEFAULT_SOFTNORM_EPS))?,
                damping: p.matrix("damping", n, Some(Matrix::identity(n, n)))?,
            })
        }
        "potential_force" => {
            let p = Params::new(c, path, &["metric", "damping"])?;
            let metric = match p.get("metric") {
                None => MetricSpec::Energy,
                Some(Value::String(s)) if s == "energy" => MetricSpec::Energy,
                Some(v) => {
                    let m = parse_matrix(v, n, &p.field("metric"))?;
                    fabric_core::linalg::check_spd(&m)
                        .map_err(|e| HarnessError::validation(p.field("metric"), e.to_string()))?;
                    MetricSpec::Constant(m)
                }
            };
            let damping = p.matrix("damping", n, Some(Matrix::identity(n, n)))?;
            spd_field(&damping, &p.field("damping"))?;
            Ok(PolicySpec::PotentialForce { metric, damping })
        }
        other => Err(unknown(&format!("{path}.name"), other, POLICIES)),
    }
}

fn spd_field(m: &Matrix, field: &str) -> Result<()> {
    fabric_core::linalg::check_spd(m).map_err(|e| HarnessError::validation(field, e.to_string()))
}

const REGULATORS: &[&str] = &["none", "damper_matrix", "damper_scalar", "capping_1", "capping_2", "theorem_main"];

fn regulator_spec(c: &RawComponent, n: usize, path: &str) -> Result<RegulatorSpec> {
    match c.name.as_str() {
        "none" => {
            Params::new(c, path, &[])?;
            Ok(RegulatorSpec::None)
        }
        "damper_matrix" => {
            let p = Params::new(c, path, &["damping"])?;
            let damping = p.matrix("damping", n, Some(Matrix::identity(n, n)))?;
            spd_field(&damping, &p.field("damping"))?;
            Ok(RegulatorSpec::DamperMatrix { damping })
        }
        "damper_scalar" => {
            let p = Params::new(c, path, &["beta"])?;
            Ok(RegulatorSpec::DamperScalar {
                beta: p.non_negative("beta", Some(DEFAULT_BETA))?,
            })
        }
        "capping_1" => {
            let p = Params::new(c, path, &["damping", "gamma_max", "energy_max"])?;
            let damping = p.matrix("damping", n, Some(Matrix::identity(n, n)))?;
            spd_field(&damping, &p.field("damping"))?;
            Ok(RegulatorSpec::Capping1 {
                damping,
                gamma_max: p.positive("gamma_max", Some(DEFAULT_GAMMA_MAX))?,
                energy_max: p.positive("energy_max", Some(DEFAULT_ENERGY_MAX))?,
            })
        }
        "capping_2" => {
            let p = Params::new(c, path, &["beta", "beta_max", "energy_max", "eps", "sigma"])?;
            let beta = p.non_negative("beta", Some(0.0))?;
            let beta_max = p.positive("beta_max", Some(DEFAULT_BETA_MAX))?;
            if beta > beta_max {
                return Err(HarnessError::validation(p.field("beta"), format!("exceeds beta_max {beta_max}")));
            }
            Ok(RegulatorSpec::Capping2 {
                beta,
                beta_max,
                energy_max: p.positive("energy_max", Some(DEFAULT_ENERGY_MAX))?,
                guard: p.guard()?,
            })
        }
        "theorem_main" => {
            let p = Params::new(c, path, &["beta", "eps", "sigma"])?;
            Ok(RegulatorSpec::TheoremMain {
                beta: p.non_negative("beta", Some(DEFAULT_BETA))?,
                guard: p.guard()?,
            })
        }
        other => Err(unknown(&format!("{path}.name"), other, REGULATORS)),
    }
}

fn audit_config(raw: &RawAudit) -> Result<AuditConfig> {
    positive(raw.drift_tolerance, "audit.drift_tolerance")?;
    positive(raw.cap_tolerance, "audit.cap_tolerance")?;
    positive(raw.descent_tolerance, "audit.descent_tolerance")?;
    positive(raw.zero_set_tolerance, "audit.zero_set_tolerance")?;
    if !(raw.monitor_fraction > 0.0 && raw.monitor_fraction <= 1.0) {
        return Err(HarnessError::validation("audit.monitor_fraction", "must lie in (0, 1]"));
    }
    let path_twin = raw
        .path_twin
        .as_ref()
        .map(|t| {
            positive(t.speed_scale, "audit.path_twin.speed_scale")?;
            positive(t.path_length, "audit.path_twin.path_length")?;
            positive(t.tolerance, "audit.path_twin.tolerance")?;
            if let Some(b) = t.damping {
                non_negative(b, "audit.path_twin.damping")?;
            }
            if t.samples < 2 {
                return Err(HarnessError::validation("audit.path_twin.samples", "must be at least 2"));
            }
            Ok(PathTwin {
                speed_scale: t.speed_scale,
                damping: t.damping,
                path_length: t.path_length,
                samples: t.samples,
                tolerance: t.tolerance,
            })
        })
        .transpose()?;
    Ok(AuditConfig {
        drift_tolerance: raw.drift_tolerance,
        cap_tolerance: raw.cap_tolerance,
        descent_tolerance: raw.descent_tolerance,
        zero_set_tolerance: raw.zero_set_tolerance,
        monitor_fraction: raw.monitor_fraction,
        path_twin,
    })
}
