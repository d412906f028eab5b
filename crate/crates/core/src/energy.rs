//! Finsler energies, their energy tensors and curvature terms.
//!
//! An energy `𝓛(q, q̇)` is evaluated together with
//! - the energy tensor `M_L = ∂²𝓛/∂q̇²`,
//! - the curvature term `ξ_L = (∂²𝓛/∂q̇∂q) q̇ − ∂𝓛/∂q`,
//! - the velocity gradient `∂𝓛/∂q̇`.
//!
//! Concrete energies supply these analytically; [`fd_check_energy_derivatives`]
//! is a finite-difference oracle used only in tests and diagnostics.

use std::sync::Arc;

use crate::error::{check_dim, FabricError, Result};
use crate::linalg::{all_finite, Matrix, Vector};
use crate::state::{Accel, State};

/// Energy value with its velocity Hessian and Euler-Lagrange bias.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEval {
    pub value: f64,
    /// `M_L`, the energy tensor.
    pub metric: Matrix,
    /// `ξ_L`, the curvature term.
    pub curvature: Vector,
    /// `∂𝓛/∂q̇`.
    pub velocity_gradient: Vector,
}

impl EnergyEval {
    /// `q̇ᵀ M_L q̇`.
    pub fn z(&self, qd: &Vector) -> f64 {
        qd.dot(&(&self.metric * qd))
    }

    fn ensure_finite(self) -> Result<Self> {
        if self.value.is_finite()
            && self.metric.iter().all(|v| v.is_finite())
            && all_finite(&self.curvature)
            && all_finite(&self.velocity_gradient)
        {
            Ok(self)
        } else {
            Err(FabricError::EvaluationFailure("non-finite energy output".into()))
        }
    }
}

/// A Finsler energy `𝓛(q, q̇)`.
pub trait FinslerEnergy: Send + Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, state: &State) -> Result<EnergyEval>;

    fn name(&self) -> &str {
        "energy"
    }
}

impl<T: FinslerEnergy + ?Sized> FinslerEnergy for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn evaluate(&self, state: &State) -> Result<EnergyEval> {
        (**self).evaluate(state)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// `𝓛 = ½‖q̇‖²`.
#[derive(Debug, Clone, Copy)]
pub struct EuclideanEnergy {
    dim: usize,
}

impl EuclideanEnergy {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl FinslerEnergy for EuclideanEnergy {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, state: &State) -> Result<EnergyEval> {
        check_dim("euclidean energy", self.dim, state.dim())?;
        EnergyEval {
            value: 0.5 * state.qd.norm_squared(),
            metric: Matrix::identity(self.dim, self.dim),
            curvature: Vector::zeros(self.dim),
            velocity_gradient: state.qd.clone(),
        }
        .ensure_finite()
    }

    fn name(&self) -> &str {
        "euclidean"
    }
}

type MetricFn = dyn Fn(&Vector) -> Matrix + Send + Sync;
type MetricDerivFn = dyn Fn(&Vector) -> Vec<Matrix> + Send + Sync;

/// Riemannian energy `𝓛 = ½ q̇ᵀ G(q) q̇` with an analytic `∂G/∂q`.
pub struct RiemannianEnergy {
    dim: usize,
    name: String,
    metric: Box<MetricFn>,
    /// Returns `[∂G/∂q_0, …, ∂G/∂q_{n-1}]`.
    metric_partials: Box<MetricDerivFn>,
}

impl RiemannianEnergy {
    pub fn new<G, D>(dim: usize, name: impl Into<String>, metric: G, metric_partials: D) -> Self
    where
        G: Fn(&Vector) -> Matrix + Send + Sync + 'static,
        D: Fn(&Vector) -> Vec<Matrix> + Send + Sync + 'static,
    {
        Self {
            dim,
            name: name.into(),
            metric: Box::new(metric),
            metric_partials: Box::new(metric_partials),
        }
    }

    /// Position-independent metric `G`.
    pub fn constant(g: Matrix) -> Result<Self> {
        crate::linalg::check_spd(&g)?;
        let n = g.nrows();
        Ok(Self::new(
            n,
            "constant_metric",
            move |_| g.clone(),
            move |_| vec![Matrix::zeros(n, n); n],
        ))
    }

    /// `G(q) = (1 + gain·q[axis]²)·I`.
    pub fn conformal(dim: usize, axis: usize, gain: f64) -> Result<Self> {
        if axis >= dim {
            return Err(FabricError::InvalidArgument(format!(
                "conformal axis {axis} out of range for dimension {dim}"
            )));
        }
        if gain < 0.0 || !gain.is_finite() {
            return Err(FabricError::InvalidArgument("conformal gain must be >= 0".into()));
        }
        Ok(Self::new(
            dim,
            "conformal",
            move |q| Matrix::identity(dim, dim) * (1.0 + gain * q[axis] * q[axis]),
            move |q| {
                (0..dim)
                    .map(|k| {
                        if k == axis {
                            Matrix::identity(dim, dim) * (2.0 * gain * q[axis])
                        } else {
                            Matrix::zeros(dim, dim)
                        }
                    })
                    .collect()
            },
        ))
    }
}

impl FinslerEnergy for RiemannianEnergy {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, state: &State) -> Result<EnergyEval> {
        check_dim("riemannian energy", self.dim, state.dim())?;
        let qd = &state.qd;
        let g = (self.metric)(&state.q);
        let partials = (self.metric_partials)(&state.q);
        check_dim("metric partials", self.dim, partials.len())?;

        let g_qd = &g * qd;
        // (∂²𝓛/∂q̇∂q) q̇ = Σ_k q̇_k ∂_k G q̇ ;  (∂𝓛/∂q)_k = ½ q̇ᵀ ∂_k G q̇
        let mut curvature = Vector::zeros(self.dim);
        for (k, dg) in partials.iter().enumerate() {
            let dg_qd = dg * qd;
            curvature.axpy(qd[k], &dg_qd, 1.0);
            curvature[k] -= 0.5 * qd.dot(&dg_qd);
        }
        EnergyEval {
            value: 0.5 * qd.dot(&g_qd),
            metric: g,
            curvature,
            velocity_gradient: g_qd,
        }
        .ensure_finite()
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// `𝓗_𝓛 = q̇ᵀ ∂𝓛/∂q̇ − 𝓛`; equals `𝓛` for a Finsler energy.
pub fn hamiltonian(energy: &dyn FinslerEnergy, state: &State) -> Result<f64> {
    let e = energy.evaluate(state)?;
    Ok(state.qd.dot(&e.velocity_gradient) - e.value)
}

/// `𝓛̇ = q̇ᵀ(M_L q̈ + ξ_L)`.
pub fn energy_rate(energy: &dyn FinslerEnergy, state: &State, accel: &Accel) -> Result<f64> {
    let e = energy.evaluate(state)?;
    check_dim("energy_rate accel", state.dim(), accel.len())?;
    Ok(rate_from_eval(&e, &state.qd, accel))
}

pub(crate) fn rate_from_eval(e: &EnergyEval, qd: &Vector, accel: &Vector) -> f64 {
    qd.dot(&(&e.metric * accel + &e.curvature))
}

/// Maximum relative errors of analytic derivatives against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub metric_error: f64,
    pub curvature_error: f64,
    pub gradient_error: f64,
}

impl FdReport {
    pub fn max_error(&self) -> f64 {
        self.metric_error.max(self.curvature_error).max(self.gradient_error)
    }
}

/// Default finite-difference step: `1e-5` scaled by the state magnitude.
pub fn default_fd_step(state: &State) -> f64 {
    let scale = state.q.amax().max(state.qd.amax()).max(1.0);
    1e-5 * scale
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    diff / scale
}

/// Compares analytic `∂𝓛/∂q̇`, `M_L` and `ξ_L` with central differences.
///
/// The velocity gradient is checked against differences of the value, the
/// energy tensor against differences of the (checked) velocity gradient, and
/// the curvature term against its definition from first derivatives. Errors
/// are `max |Δ| / max(max |analytic|, 1)`.
pub fn fd_check_energy_derivatives(energy: &dyn FinslerEnergy, state: &State, step: f64) -> Result<FdReport> {
    if step <= 0.0 || !step.is_finite() {
        return Err(FabricError::InvalidArgument("finite-difference step must be > 0".into()));
    }
    let n = state.dim();
    let h = step;
    let eval = energy.evaluate(state)?;
    let at = |q: Vector, qd: Vector| -> Result<EnergyEval> { energy.evaluate(&State { q, qd }) };

    let mut grad_fd = Vector::zeros(n);
    let mut metric_fd = Matrix::zeros(n, n);
    let mut dq_value = Vector::zeros(n);
    for i in 0..n {
        let mut plus = state.qd.clone();
        let mut minus = state.qd.clone();
        plus[i] += h;
        minus[i] -= h;
        let ep = at(state.q.clone(), plus)?;
        let em = at(state.q.clone(), minus)?;
        grad_fd[i] = (ep.value - em.value) / (2.0 * h);
        let col = (&ep.velocity_gradient - &em.velocity_gradient) / (2.0 * h);
        metric_fd.set_column(i, &col);

        let mut qp = state.q.clone();
        let mut qm = state.q.clone();
        qp[i] += h;
        qm[i] -= h;
        dq_value[i] = (at(qp, state.qd.clone())?.value - at(qm, state.qd.clone())?.value) / (2.0 * h);
    }
    // d/ds ∂𝓛/∂q̇ (q + s q̇, q̇) at s = 0 is the mixed term applied to q̇.
    let gp = at(&state.q + &state.qd * h, state.qd.clone())?.velocity_gradient;
    let gm = at(&state.q - &state.qd * h, state.qd.clone())?.velocity_gradient;
    let mixed = (gp - gm) / (2.0 * h);
    let curvature_fd = mixed - dq_value;

    Ok(FdReport {
        metric_error: relative_error(eval.metric.as_slice(), metric_fd.as_slice()),
        curvature_error: relative_error(eval.curvature.as_slice(), curvature_fd.as_slice()),
        gradient_error: relative_error(eval.velocity_gradient.as_slice(), grad_fd.as_slice()),
    })
}
