//! Geometry generators, the HD2 homogeneity check, task maps and the
//! single-level transform tree that pulls leaf specs back to the root.

use std::sync::Arc;

use crate::error::{check_dim, FabricError, Result};
use crate::linalg::{Matrix, Vector};
use crate::potential::Potential;
use crate::state::{spec_to_acceleration, sum_specs, Accel, FnSystem, SecondOrderSystem, Spec, State, SystemKind};

/// Softening added to `‖q − x*‖` by the attractor generator.
pub const DIRECTION_EPS: f64 = 1e-6;

/// Claimed velocity homogeneity of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Homogeneity {
    Hd2,
    General,
}

/// A raw second-order system fed to energization.
#[derive(Clone)]
pub struct Generator {
    name: String,
    homogeneity: Homogeneity,
    system: Arc<dyn SecondOrderSystem>,
}

impl Generator {
    pub fn new(name: impl Into<String>, homogeneity: Homogeneity, system: Arc<dyn SecondOrderSystem>) -> Self {
        Self {
            name: name.into(),
            homogeneity,
            system,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn homogeneity(&self) -> Homogeneity {
        self.homogeneity
    }
}

impl SecondOrderSystem for Generator {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn accel(&self, state: &State) -> Result<Accel> {
        self.system.accel(state)
    }

    fn kind(&self) -> SystemKind {
        SystemKind::Generator
    }
}

/// Straight-line geometry `h ≡ 0`.
pub fn make_zero_generator(n: usize) -> Generator {
    let sys = FnSystem::new(n, SystemKind::Generator, move |_| Ok(Accel::zeros(n)));
    Generator::new("zero", Homogeneity::Hd2, Arc::new(sys))
}

/// Obstacle geometry `h = −‖q̇‖² ∂φ(q)`.
pub fn make_barrier_generator(field: Arc<dyn Potential>) -> Generator {
    let n = field.dim();
    let sys = FnSystem::new(n, SystemKind::Generator, move |s: &State| {
        Ok(Accel(field.gradient(&s.q) * -s.qd.norm_squared()))
    });
    Generator::new("barrier", Homogeneity::Hd2, Arc::new(sys))
}

/// `softnorm(v) = v / (‖v‖ + ε_dir)`.
pub fn softnorm(v: &Vector) -> Vector {
    v / (v.norm() + DIRECTION_EPS)
}

/// Goal-seeking geometry `h = −‖q̇‖² softnorm(q − x*)`.
pub fn make_attractor_generator(goal: Vector) -> Generator {
    let n = goal.len();
    let sys = FnSystem::new(n, SystemKind::Generator, move |s: &State| {
        Ok(Accel(softnorm(&(&s.q - &goal)) * -s.qd.norm_squared()))
    });
    Generator::new("attractor", Homogeneity::Hd2, Arc::new(sys))
}

/// Constant acceleration `h ≡ c`; biased at rest and not HD2.
pub fn make_constant_generator(value: Vector) -> Generator {
    let n = value.len();
    let sys = FnSystem::new(n, SystemKind::Generator, move |_| Ok(Accel(value.clone())));
    Generator::new("constant", Homogeneity::General, Arc::new(sys))
}

/// Result of [`check_hd2`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hd2Report {
    pub max_violation: f64,
    pub worst_lambda: f64,
    pub samples: usize,
}

impl Hd2Report {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation < tol
    }
}

/// Measures `‖h(q, λq̇) − λ²h(q, q̇)‖ / (max(‖h(q, λq̇)‖, ‖λ²h(q, q̇)‖) + 1e-12)`
/// over all sample states and scales.
pub fn check_hd2(system: &dyn SecondOrderSystem, states: &[State], lambdas: &[f64]) -> Result<Hd2Report> {
    if let Some(l) = lambdas.iter().find(|l| **l < 0.0 || !l.is_finite()) {
        return Err(FabricError::InvalidArgument(format!("HD2 scale {l} must be >= 0")));
    }
    let mut report = Hd2Report {
        max_violation: 0.0,
        worst_lambda: f64::NAN,
        samples: 0,
    };
    for s in states {
        let base = system.accel(s)?;
        for &lambda in lambdas {
            let scaled = system.accel(&s.with_velocity_scaled(lambda))?;
            let expected = &base.0 * (lambda * lambda);
            let denom = scaled.norm().max(expected.norm()) + 1e-12;
            let v = (&scaled.0 - &expected).norm() / denom;
            report.samples += 1;
            if v >= report.max_violation {
                report.max_violation = v;
                report.worst_lambda = lambda;
            }
        }
    }
    Ok(report)
}

/// A differentiable map from configuration space to a task space.
pub trait TaskMap: Send + Sync {
    /// Domain dimension `n`.
    fn dim(&self) -> usize;

    /// Codomain dimension `m`.
    fn codim(&self) -> usize;

    fn forward(&self, q: &Vector) -> Vector;

    /// `m × n` Jacobian.
    fn jacobian(&self, q: &Vector) -> Matrix;

    /// Time derivative of the Jacobian along velocity `qd`.
    fn jacobian_dot(&self, q: &Vector, qd: &Vector) -> Matrix;

    /// Maps a root state to the task space `(φ(q), J q̇)`.
    fn push_state(&self, state: &State) -> State {
        State {
            q: self.forward(&state.q),
            qd: self.jacobian(&state.q) * &state.qd,
        }
    }
}

impl<T: TaskMap + ?Sized> TaskMap for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn codim(&self) -> usize {
        (**self).codim()
    }
    fn forward(&self, q: &Vector) -> Vector {
        (**self).forward(q)
    }
    fn jacobian(&self, q: &Vector) -> Matrix {
        (**self).jacobian(q)
    }
    fn jacobian_dot(&self, q: &Vector, qd: &Vector) -> Matrix {
        (**self).jacobian_dot(q, qd)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityMap {
    pub dim: usize,
}

impl TaskMap for IdentityMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn codim(&self) -> usize {
        self.dim
    }
    fn forward(&self, q: &Vector) -> Vector {
        q.clone()
    }
    fn jacobian(&self, _q: &Vector) -> Matrix {
        Matrix::identity(self.dim, self.dim)
    }
    fn jacobian_dot(&self, _q: &Vector, _qd: &Vector) -> Matrix {
        Matrix::zeros(self.dim, self.dim)
    }
}

/// Affine map `x = A q + b`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub a: Matrix,
    pub b: Vector,
}

impl LinearMap {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        check_dim("linear map offset", a.nrows(), b.len())?;
        Ok(Self { a, b })
    }

    /// `self ∘ inner`, i.e. `x = A_self (A_inner q + b_inner) + b_self`.
    pub fn compose(&self, inner: &LinearMap) -> Result<LinearMap> {
        check_dim("linear map composition", self.a.ncols(), inner.a.nrows())?;
        LinearMap::new(&self.a * &inner.a, &self.a * &inner.b + &self.b)
    }
}

impl TaskMap for LinearMap {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn codim(&self) -> usize {
        self.a.nrows()
    }
    fn forward(&self, q: &Vector) -> Vector {
        &self.a * q + &self.b
    }
    fn jacobian(&self, _q: &Vector) -> Matrix {
        self.a.clone()
    }
    fn jacobian_dot(&self, _q: &Vector, _qd: &Vector) -> Matrix {
        Matrix::zeros(self.a.nrows(), self.a.ncols())
    }
}

/// Polar coordinates to the plane: `(r, θ) ↦ (r cos θ, r sin θ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolarMap;

impl TaskMap for PolarMap {
    fn dim(&self) -> usize {
        2
    }
    fn codim(&self) -> usize {
        2
    }
    fn forward(&self, q: &Vector) -> Vector {
        let (r, t) = (q[0], q[1]);
        Vector::from_vec(vec![r * t.cos(), r * t.sin()])
    }
    fn jacobian(&self, q: &Vector) -> Matrix {
        let (r, t) = (q[0], q[1]);
        let (s, c) = t.sin_cos();
        Matrix::from_row_slice(2, 2, &[c, -r * s, s, r * c])
    }
    fn jacobian_dot(&self, q: &Vector, qd: &Vector) -> Matrix {
        let (r, t) = (q[0], q[1]);
        let (rd, td) = (qd[0], qd[1]);
        let (s, c) = t.sin_cos();
        Matrix::from_row_slice(
            2,
            2,
            &[-s * td, -rd * s - r * c * td, c * td, rd * c - r * s * td],
        )
    }
}

/// Signed clearance to a sphere: `x = ‖q − center‖ − radius`.
#[derive(Debug, Clone)]
pub struct SphereDistanceMap {
    pub center: Vector,
    pub radius: f64,
}

impl TaskMap for SphereDistanceMap {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn codim(&self) -> usize {
        1
    }
    fn forward(&self, q: &Vector) -> Vector {
        Vector::from_element(1, (q - &self.center).norm() - self.radius)
    }
    fn jacobian(&self, q: &Vector) -> Matrix {
        let d = q - &self.center;
        let r = d.norm();
        Matrix::from_row_slice(1, d.len(), (d / r).as_slice())
    }
    fn jacobian_dot(&self, q: &Vector, qd: &Vector) -> Matrix {
        let d = q - &self.center;
        let r = d.norm();
        let rd = d.dot(qd) / r;
        let row = (qd / r) - d * (rd / (r * r));
        Matrix::from_row_slice(1, row.len(), row.as_slice())
    }
}

/// Jacobian consistency of a task map against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskMapReport {
    pub jacobian_error: f64,
    pub jacobian_dot_error: f64,
}

impl TaskMapReport {
    pub fn max_error(&self) -> f64 {
        self.jacobian_error.max(self.jacobian_dot_error)
    }
}

/// Compares `J` with differences of `φ`, and `J̇ q̇` with the difference of
/// `J q̇` along the flow `q + s q̇`. Errors are relative with a unit floor.
pub fn check_task_map(map: &dyn TaskMap, state: &State, step: f64) -> Result<TaskMapReport> {
    check_dim("task map domain", map.dim(), state.dim())?;
    if step <= 0.0 {
        return Err(FabricError::InvalidArgument("step must be > 0".into()));
    }
    let n = map.dim();
    let q = &state.q;
    let qd = &state.qd;
    let j = map.jacobian(q);
    let mut j_fd = Matrix::zeros(map.codim(), n);
    for i in 0..n {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[i] += step;
        qm[i] -= step;
        j_fd.set_column(i, &((map.forward(&qp) - map.forward(&qm)) / (2.0 * step)));
    }
    let jdot_qd = map.jacobian_dot(q, qd) * qd;
    let jdot_fd = (map.jacobian(&(q + qd * step)) * qd - map.jacobian(&(q - qd * step)) * qd) / (2.0 * step);

    let rel = |a: &Matrix, b: &Matrix| (a - b).amax() / a.amax().max(1.0);
    Ok(TaskMapReport {
        jacobian_error: rel(&j, &j_fd),
        jacobian_dot_error: (&jdot_qd - &jdot_fd).amax() / jdot_qd.amax().max(1.0),
    })
}

/// Pulls a leaf spec back through a task map:
/// `M = Jᵀ M_leaf J`, `ξ = Jᵀ(M_leaf J̇ q̇ + ξ_leaf)`.
pub fn pullback_spec(map: &dyn TaskMap, leaf: &Spec, state: &State) -> Result<Spec> {
    check_dim("pullback leaf", map.codim(), leaf.dim())?;
    check_dim("pullback state", map.dim(), state.dim())?;
    let j = map.jacobian(&state.q);
    let jt = j.transpose();
    let jdot_qd = map.jacobian_dot(&state.q, &state.qd) * &state.qd;
    let metric = &jt * &leaf.metric * &j;
    let force = &jt * (&leaf.metric * jdot_qd + &leaf.force);
    // Symmetrize away rounding so downstream symmetry checks stay exact.
    let metric = (&metric + metric.transpose()) * 0.5;
    Ok(Spec { metric, force })
}

/// A task-space spec as a function of the task-space state.
pub trait LeafSpec: Send + Sync {
    fn dim(&self) -> usize;

    fn spec(&self, x: &State) -> Result<Spec>;
}

/// Constant task-space spec.
#[derive(Debug, Clone)]
pub struct ConstantLeaf(pub Spec);

impl LeafSpec for ConstantLeaf {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn spec(&self, _x: &State) -> Result<Spec> {
        Ok(self.0.clone())
    }
}

/// One-dimensional repulsive leaf on a clearance coordinate `x > 0`:
/// metric `μ / x²` (HD0) and acceleration `ẍ = k ẋ² / x` (HD2).
#[derive(Debug, Clone, Copy)]
pub struct ClearanceLeaf {
    pub metric_gain: f64,
    pub accel_gain: f64,
}

impl LeafSpec for ClearanceLeaf {
    fn dim(&self) -> usize {
        1
    }

    fn spec(&self, x: &State) -> Result<Spec> {
        let d = x.q[0];
        if d <= 0.0 {
            return Err(FabricError::EvaluationFailure(format!("clearance {d} is not positive")));
        }
        let m = self.metric_gain / (d * d);
        let accel = self.accel_gain * x.qd[0] * x.qd[0] / d;
        Ok(Spec {
            metric: Matrix::from_element(1, 1, m),
            force: Vector::from_element(1, -m * accel),
        })
    }
}

pub struct Branch {
    pub map: Arc<dyn TaskMap>,
    pub leaf: Arc<dyn LeafSpec>,
}

/// Flat list of task-map/leaf pairs summed at the root on top of a base spec.
pub struct TransformTree {
    dim: usize,
    base: Spec,
    branches: Vec<Branch>,
}

impl TransformTree {
    /// `base` is added at the root; the identity metric with zero force is the
    /// usual choice and keeps the root metric invertible.
    pub fn new(base: Spec) -> Self {
        Self {
            dim: base.dim(),
            base,
            branches: Vec::new(),
        }
    }

    pub fn add_branch(&mut self, map: Arc<dyn TaskMap>, leaf: Arc<dyn LeafSpec>) -> Result<()> {
        check_dim("branch map domain", self.dim, map.dim())?;
        check_dim("branch leaf", map.codim(), leaf.dim())?;
        self.branches.push(Branch { map, leaf });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root_spec(&self, state: &State) -> Result<Spec> {
        let mut specs = Vec::with_capacity(self.branches.len() + 1);
        specs.push(self.base.clone());
        for b in &self.branches {
            let x = b.map.push_state(state);
            let leaf = b.leaf.spec(&x)?;
            specs.push(pullback_spec(b.map.as_ref(), &leaf, state)?);
        }
        sum_specs(&specs)
    }
}

/// Generator `h = −M⁻¹ξ` resolved from a transform tree's root spec.
pub fn make_tree_generator(tree: Arc<TransformTree>, homogeneity: Homogeneity) -> Generator {
    let n = tree.dim();
    let sys = FnSystem::new(n, SystemKind::Generator, move |s: &State| {
        let spec = tree.root_spec(s)?;
        spec_to_acceleration(&spec, s)
    });
    Generator::new("tree", homogeneity, Arc::new(sys))
}
