//! Configuration-space state, accelerations, force-form specs and the
//! second-order system contract.

use std::fmt;
use std::ops::{Add, Deref, Mul, Sub};
use std::sync::Arc;

use crate::error::{check_dim, FabricError, Result};
use crate::linalg::{is_symmetric, spd_solve, Matrix, Vector, SYMMETRY_TOL};

/// Position and velocity of a configuration-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: Vector,
    pub qd: Vector,
}

impl State {
    /// Builds a validated state: equal, non-zero dimensions and finite entries.
    pub fn new(q: Vector, qd: Vector) -> Result<Self> {
        if q.is_empty() {
            return Err(FabricError::InvalidState("dimension must be at least 1".into()));
        }
        check_dim("state velocity", q.len(), qd.len())?;
        if q.iter().chain(qd.iter()).any(|v| !v.is_finite()) {
            return Err(FabricError::InvalidState("non-finite entry".into()));
        }
        Ok(Self { q, qd })
    }

    pub fn from_slices(q: &[f64], qd: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(q), Vector::from_column_slice(qd))
    }

    pub fn at_rest(q: Vector) -> Result<Self> {
        let n = q.len();
        Self::new(q, Vector::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn speed(&self) -> f64 {
        self.qd.norm()
    }

    /// Same position with the velocity scaled by `factor`.
    pub fn with_velocity_scaled(&self, factor: f64) -> Self {
        Self {
            q: self.q.clone(),
            qd: &self.qd * factor,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qd.iter()).all(|v| v.is_finite())
    }
}

/// Configuration-space acceleration `q̈`.
#[derive(Debug, Clone, PartialEq)]
pub struct Accel(pub Vector);

impl Accel {
    pub fn zeros(n: usize) -> Self {
        Self(Vector::zeros(n))
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self(Vector::from_column_slice(v))
    }

    pub fn into_inner(self) -> Vector {
        self.0
    }
}

impl Deref for Accel {
    type Target = Vector;

    fn deref(&self) -> &Vector {
        &self.0
    }
}

impl From<Vector> for Accel {
    fn from(v: Vector) -> Self {
        Self(v)
    }
}

impl Add for Accel {
    type Output = Accel;

    fn add(self, rhs: Accel) -> Accel {
        Accel(self.0 + rhs.0)
    }
}

impl Add<&Accel> for &Accel {
    type Output = Accel;

    fn add(self, rhs: &Accel) -> Accel {
        Accel(&self.0 + &rhs.0)
    }
}

impl Sub for Accel {
    type Output = Accel;

    fn sub(self, rhs: Accel) -> Accel {
        Accel(self.0 - rhs.0)
    }
}

impl Mul<f64> for Accel {
    type Output = Accel;

    fn mul(self, rhs: f64) -> Accel {
        Accel(self.0 * rhs)
    }
}

/// A system in force form `M q̈ + ξ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spec {
    pub metric: Matrix,
    pub force: Vector,
}

impl Spec {
    pub fn new(metric: Matrix, force: Vector) -> Result<Self> {
        if !metric.is_square() {
            return Err(FabricError::DimensionMismatch {
                context: "spec metric (square)",
                expected: metric.nrows(),
                found: metric.ncols(),
            });
        }
        check_dim("spec force", metric.nrows(), force.len())?;
        if !is_symmetric(&metric, SYMMETRY_TOL) {
            return Err(FabricError::InvalidArgument("spec metric is not symmetric".into()));
        }
        Ok(Self { metric, force })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            metric: Matrix::zeros(n, n),
            force: Vector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.force.len()
    }
}

/// Converts a force-form spec to its acceleration `q̈ = −M⁻¹ξ`.
pub fn spec_to_acceleration(spec: &Spec, state: &State) -> Result<Accel> {
    check_dim("spec vs state", state.dim(), spec.dim())?;
    let neg_force = -&spec.force;
    spd_solve(&spec.metric, &neg_force).map(Accel)
}

/// Navigation acceleration `f = M⁻¹τ` corresponding to a forcing policy `τ`.
pub fn force_to_navigation(metric: &Matrix, tau: &Vector) -> Result<Accel> {
    spd_solve(metric, tau).map(Accel)
}

/// Metric-weighted combination `(ΣMᵢ, Σξᵢ)`.
pub fn sum_specs(specs: &[Spec]) -> Result<Spec> {
    let first = specs
        .first()
        .ok_or_else(|| FabricError::InvalidArgument("sum_specs needs at least one spec".into()))?;
    let n = first.dim();
    let mut total = Spec::zero(n);
    for s in specs {
        check_dim("sum_specs", n, s.dim())?;
        total.metric += &s.metric;
        total.force += &s.force;
    }
    Ok(total)
}

/// Role of a second-order system within a composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Generator,
    Fabric,
    Forced,
    Composite,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SystemKind::Generator => "generator",
            SystemKind::Fabric => "fabric",
            SystemKind::Forced => "forced",
            SystemKind::Composite => "composite",
        };
        f.write_str(s)
    }
}

/// An acceleration field `q̈ = h(q, q̇)`. Evaluation must be deterministic.
pub trait SecondOrderSystem: Send + Sync {
    fn dim(&self) -> usize;

    fn accel(&self, state: &State) -> Result<Accel>;

    fn kind(&self) -> SystemKind {
        SystemKind::Composite
    }
}

impl<T: SecondOrderSystem + ?Sized> SecondOrderSystem for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        (**self).accel(state)
    }

    fn kind(&self) -> SystemKind {
        (**self).kind()
    }
}

type AccelFn = dyn Fn(&State) -> Result<Accel> + Send + Sync;

/// Second-order system backed by a closure.
pub struct FnSystem {
    dim: usize,
    kind: SystemKind,
    f: Box<AccelFn>,
}

impl FnSystem {
    pub fn new<F>(dim: usize, kind: SystemKind, f: F) -> Self
    where
        F: Fn(&State) -> Result<Accel> + Send + Sync + 'static,
    {
        Self {
            dim,
            kind,
            f: Box::new(f),
        }
    }
}

impl SecondOrderSystem for FnSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        check_dim("system input", self.dim, state.dim())?;
        (self.f)(state)
    }

    fn kind(&self) -> SystemKind {
        self.kind
    }
}

/// Pointwise sum of several systems of equal dimension.
pub struct SumSystem {
    dim: usize,
    terms: Vec<Arc<dyn SecondOrderSystem>>,
}

impl SumSystem {
    pub fn new(terms: Vec<Arc<dyn SecondOrderSystem>>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|t| t.dim())
            .ok_or_else(|| FabricError::InvalidArgument("empty sum".into()))?;
        for t in &terms {
            check_dim("sum system", dim, t.dim())?;
        }
        Ok(Self { dim, terms })
    }
}

impl SecondOrderSystem for SumSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        let mut acc = Vector::zeros(self.dim);
        for t in &self.terms {
            acc += &t.accel(state)?.0;
        }
        Ok(Accel(acc))
    }
}
