//! Scalar fields on configuration space: navigation potentials `ψ` and the
//! barrier fields `φ` used by geometry generators.

use std::sync::Arc;

use crate::error::{check_dim, Result};
use crate::linalg::Vector;

/// A smooth scalar field with an analytic gradient.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, q: &Vector) -> f64;

    fn gradient(&self, q: &Vector) -> Vector;
}

impl<T: Potential + ?Sized> Potential for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, q: &Vector) -> f64 {
        (**self).value(q)
    }

    fn gradient(&self, q: &Vector) -> Vector {
        (**self).gradient(q)
    }
}

/// `ψ(q) = ½·gain·‖q − center‖²`.
#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    pub center: Vector,
    pub gain: f64,
}

impl QuadraticPotential {
    pub fn new(center: Vector, gain: f64) -> Self {
        Self { center, gain }
    }
}

impl Potential for QuadraticPotential {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, q: &Vector) -> f64 {
        0.5 * self.gain * (q - &self.center).norm_squared()
    }

    fn gradient(&self, q: &Vector) -> Vector {
        (q - &self.center) * self.gain
    }
}

/// `φ(q) = height·exp(−‖q − center‖² / (2·width²))`, a smooth obstacle bump.
#[derive(Debug, Clone)]
pub struct GaussianBump {
    pub center: Vector,
    pub height: f64,
    pub width: f64,
}

impl GaussianBump {
    pub fn new(center: Vector, height: f64, width: f64) -> Self {
        Self { center, height, width }
    }
}

impl Potential for GaussianBump {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, q: &Vector) -> f64 {
        let r2 = (q - &self.center).norm_squared();
        self.height * (-r2 / (2.0 * self.width * self.width)).exp()
    }

    fn gradient(&self, q: &Vector) -> Vector {
        let d = q - &self.center;
        let phi = self.value(q);
        d * (-phi / (self.width * self.width))
    }
}

/// Sum of potentials of equal dimension.
pub struct SumPotential {
    dim: usize,
    terms: Vec<Arc<dyn Potential>>,
}

impl SumPotential {
    pub fn new(terms: Vec<Arc<dyn Potential>>) -> Result<Self> {
        let dim = terms.first().map(|t| t.dim()).unwrap_or(0);
        for t in &terms {
            check_dim("sum potential", dim, t.dim())?;
        }
        Ok(Self { dim, terms })
    }
}

impl Potential for SumPotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, q: &Vector) -> f64 {
        self.terms.iter().map(|t| t.value(q)).sum()
    }

    fn gradient(&self, q: &Vector) -> Vector {
        self.terms
            .iter()
            .fold(Vector::zeros(self.dim), |acc, t| acc + t.gradient(q))
    }
}

/// Central-difference gradient of a potential's value.
pub fn fd_gradient(potential: &dyn Potential, q: &Vector, step: f64) -> Vector {
    let mut g = Vector::zeros(q.len());
    for i in 0..q.len() {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[i] += step;
        qm[i] -= step;
        g[i] = (potential.value(&qp) - potential.value(&qm)) / (2.0 * step);
    }
    g
}

/// Relative gradient error `max|Δ| / max(max|∂ψ|, 1)` against central differences.
pub fn check_gradient(potential: &dyn Potential, q: &Vector, step: f64) -> f64 {
    let analytic = potential.gradient(q);
    let numeric = fd_gradient(potential, q, step);
    (analytic.clone() - numeric).amax() / analytic.amax().max(1.0)
}
