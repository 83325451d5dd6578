//! Inner-product kernel profiles Φ on [−1, 1] and kernel matrix assembly.

use std::f64::consts::PI;
use std::fmt;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::SphereSample;

/// Slack allowed on |t| before `phi` reports a domain error.
pub const DOMAIN_SLACK: f64 = 1e-12;
/// Inner products this close to ±1 are rounding noise of unit vectors and
/// are snapped to ±1; the NTK profile has a square-root branch there, so
/// 1e-16 in t would otherwise move Φ by 1e-8.
const SNAP: f64 = 64.0 * f64::EPSILON;

/// A truncated power series Φ(t) = Σ_{j≤J} a_j t^j with a_j ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorSeries {
    coeffs: Vec<f64>,
    /// User-supplied bound on |Σ_{j>J} a_j|, the mass dropped by truncation.
    #[serde(default)]
    tail_bound: f64,
}

impl TaylorSeries {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        Self::with_tail_bound(coeffs, 0.0)
    }

    pub fn with_tail_bound(coeffs: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("taylor profile needs at least one coefficient"));
        }
        if let Some((j, a)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a >= 0.0))
        {
            return Err(Error::invalid(format!(
                "taylor coefficient a_{j} = {a} must be finite and nonnegative"
            )));
        }
        if !(tail_bound >= 0.0 && tail_bound.is_finite()) {
            return Err(Error::invalid("taylor tail bound must be finite and >= 0"));
        }
        Ok(TaylorSeries { coeffs, tail_bound })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
    }

    /// k-th derivative Σ_{j≥k} a_j j!/(j−k)! t^{j−k}.
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        if k > self.degree() {
            return 0.0;
        }
        self.coeffs[k..]
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, a)| {
                let j = i + k;
                let falling: f64 = ((j - k + 1)..=j).map(|m| m as f64).product();
                acc * t + a * falling
            })
    }
}

/// Dot-product kernel profile: K(x, x') = Φ(⟨x, x'⟩).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelProfile {
    /// Two-layer ReLU neural tangent kernel,
    /// Φ(t) = [sin(arccos t) + 2(π − arccos t) t] / (2π).
    Ntk2,
    /// Gaussian kernel with unit bandwidth restricted to the sphere,
    /// exp(−‖x − x'‖²/2) = exp(t − 1).
    #[serde(alias = "rbf")]
    RbfSphere,
    Taylor(TaylorSeries),
}

impl KernelProfile {
    pub fn taylor(coeffs: Vec<f64>) -> Result<Self> {
        Ok(KernelProfile::Taylor(TaylorSeries::new(coeffs)?))
    }

    /// Φ(t) = Σ_{j≤degree} t^j.
    pub fn taylor_all_ones(degree: usize) -> Self {
        KernelProfile::Taylor(TaylorSeries {
            coeffs: vec![1.0; degree + 1],
            tail_bound: 0.0,
        })
    }

    /// Linear kernel Φ(t) = t.
    pub fn linear() -> Self {
        KernelProfile::Taylor(TaylorSeries {
            coeffs: vec![0.0, 1.0],
            tail_bound: 0.0,
        })
    }

    /// Constant kernel Φ ≡ c.
    pub fn constant(c: f64) -> Result<Self> {
        Self::taylor(vec![c])
    }

    pub fn label(&self) -> String {
        match self {
            KernelProfile::Ntk2 => "ntk2".into(),
            KernelProfile::RbfSphere => "rbf".into(),
            KernelProfile::Taylor(s) => format!("taylor{}", s.degree()),
        }
    }

    /// Φ evaluated with the argument clamped to [−1, 1].
    pub fn phi_clamped(&self, t: f64) -> f64 {
        let t = if 1.0 - t.abs() <= SNAP { t.signum() } else { t };
        match self {
            KernelProfile::Ntk2 => {
                let theta = t.acos();
                (theta.sin() + 2.0 * (PI - theta) * t) / (2.0 * PI)
            }
            KernelProfile::RbfSphere => (t - 1.0).exp(),
            KernelProfile::Taylor(s) => s.eval(t),
        }
    }

    /// Φ in the angular variable, Φ(cos θ). Evaluated without going through
    /// arccos so the spectral quadrature stays accurate near θ = 0, π.
    pub fn phi_angle(&self, theta: f64) -> f64 {
        match self {
            KernelProfile::Ntk2 => (theta.sin() + 2.0 * (PI - theta) * theta.cos()) / (2.0 * PI),
            _ => self.phi_clamped(theta.cos()),
        }
    }

    /// Φ^{(k)}(cos θ) when the profile is smooth on the closed interval;
    /// `None` for the NTK, whose derivatives blow up at t = ±1.
    pub fn derivative_angle(&self, k: usize, theta: f64) -> Option<f64> {
        match self {
            KernelProfile::Ntk2 => None,
            KernelProfile::RbfSphere => Some((theta.cos() - 1.0).exp()),
            KernelProfile::Taylor(s) => Some(s.derivative(k, theta.cos())),
        }
    }

    /// κ = Φ(1) = max_x K(x, x).
    pub fn kappa(&self) -> f64 {
        self.phi_clamped(1.0)
    }
}

impl fmt::Display for KernelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Φ(t) for |t| ≤ 1 + [`DOMAIN_SLACK`]; the argument is clamped to [−1, 1].
pub fn phi(profile: &KernelProfile, t: f64) -> Result<f64> {
    if !(t.abs() <= 1.0 + DOMAIN_SLACK) {
        return Err(Error::Domain(format!(
            "kernel argument {t} lies outside [-1, 1]"
        )));
    }
    Ok(profile.phi_clamped(t))
}

/// Kernel matrix K(X, X), optionally scaled by 1/n.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: Mat<f64>,
    pub normalized: bool,
    pub source_profile: String,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.entries[(i, i)]).sum()
    }
}

/// Assembles Φ(⟨x_i, x_j⟩) for all pairs. Diagonal entries use t = 1 exactly.
pub fn gram(profile: &KernelProfile, sample: &SphereSample, normalized: bool) -> GramMatrix {
    let n = sample.len();
    let x = sample.as_mat();
    let mut k = x * x.transpose();
    let scale = if normalized { 1.0 / n as f64 } else { 1.0 };
    let diag = profile.kappa() * scale;
    for j in 0..n {
        for i in 0..j {
            let v = profile.phi_clamped(k[(i, j)]) * scale;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(j, j)] = diag;
    }
    GramMatrix {
        entries: k,
        normalized,
        source_profile: profile.label(),
    }
}

/// Rows Φ(⟨q_i, x_j⟩) for queries q against training points x.
pub fn cross_kernel(
    profile: &KernelProfile,
    queries: &SphereSample,
    train: &SphereSample,
) -> Result<Mat<f64>> {
    if queries.d() != train.d() {
        return Err(Error::invalid(format!(
            "queries live on S^{} but training points on S^{}",
            queries.d(),
            train.d()
        )));
    }
    let mut k = queries.as_mat() * train.as_mat().transpose();
    for j in 0..k.ncols() {
        for i in 0..k.nrows() {
            k[(i, j)] = profile.phi_clamped(k[(i, j)]);
        }
    }
    Ok(k)
}
