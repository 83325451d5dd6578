//! Gradient-flow kernel regression in the eigenbasis of (1/n)K(X, X).
//!
//! Starting from f_0 = 0, the flow ḟ_t(x) = −(1/n)K(x, X)(f_t(X) − y) has
//! the closed form f_t = K(·, X) α(t) with α(t) = (1/n) U D(t) Uᵀ y and
//! D(t)_jj = (1 − e^{−tλ̂_j})/λ̂_j. Every matrix function is applied through
//! the symmetric eigendecomposition, so very large flow times are exact.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::kernels::{cross_kernel, GramMatrix, KernelProfile};
use crate::sphere::{SphereSample, TargetFunction};

/// Interpolation is treated as ill-conditioned below this eigenvalue ratio.
pub const ILL_CONDITIONED_RATIO: f64 = 1e-14;
/// Diagonal jitter, relative to the trace, added before interpolating an
/// ill-conditioned system.
pub const INTERPOLATION_JITTER: f64 = 1e-12;

/// Symmetric eigendecomposition (1/n)K = U diag(λ̂) Uᵀ, eigenvalues sorted
/// non-increasing and clamped at zero.
#[derive(Debug, Clone)]
pub struct GramEigen {
    u: Mat<f64>,
    lambdas: Vec<f64>,
    profile_label: String,
    /// Number of negative eigenvalues that were clamped to zero.
    clamped: usize,
}

impl GramEigen {
    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn u(&self) -> MatRef<'_, f64> {
        self.u.as_ref()
    }

    pub fn profile_label(&self) -> &str {
        &self.profile_label
    }

    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn trace(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// Uᵀ v.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let v = MatRef::from_column_major_slice(v, v.len(), 1);
        let c = self.u.transpose() * v;
        (0..c.nrows()).map(|i| c[(i, 0)]).collect()
    }

    /// U c.
    pub fn lift(&self, c: &[f64]) -> Vec<f64> {
        let c = MatRef::from_column_major_slice(c, c.len(), 1);
        let v = &self.u * c;
        (0..v.nrows()).map(|i| v[(i, 0)]).collect()
    }

    /// U diag(λ̂) Uᵀ.
    pub fn reconstruct(&self) -> Mat<f64> {
        let mut scaled = self.u.clone();
        for (j, &l) in self.lambdas.iter().enumerate() {
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= l;
            }
        }
        scaled * self.u.transpose()
    }
}

/// Eigendecomposition of a normalized Gram matrix.
pub fn eigendecompose(gram: &GramMatrix) -> Result<GramEigen> {
    if !gram.normalized {
        return Err(Error::invalid(
            "eigendecompose expects the normalized Gram matrix (1/n)K(X, X)",
        ));
    }
    eigendecompose_matrix(gram.entries.as_ref(), &gram.source_profile)
}

/// Eigendecomposition of any symmetric matrix (only the lower triangle is
/// read).
pub fn eigendecompose_matrix(m: MatRef<'_, f64>, label: &str) -> Result<GramEigen> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::invalid(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numeric(format!("symmetric eigensolver failed on a {n}x{n} matrix: {e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    // faer returns ascending order
    let mut u_sorted = Mat::<f64>::zeros(n, n);
    let mut lambdas = Vec::with_capacity(n);
    let mut clamped = 0;
    for (dst, src) in (0..n).rev().enumerate() {
        let l = s[src];
        if !l.is_finite() {
            return Err(Error::numeric("eigensolver returned a non-finite eigenvalue"));
        }
        if l < 0.0 {
            clamped += 1;
        }
        lambdas.push(l.max(0.0));
        u_sorted.col_mut(dst).copy_from(u.col(src));
    }
    Ok(GramEigen {
        u: u_sorted,
        lambdas,
        profile_label: label.to_string(),
        clamped,
    })
}

/// Flow time t ∈ [0, ∞].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowTime {
    Finite(f64),
    Infinite,
}

impl FlowTime {
    pub fn is_infinite(self) -> bool {
        matches!(self, FlowTime::Infinite)
    }

    pub fn as_f64(self) -> f64 {
        match self {
            FlowTime::Finite(t) => t,
            FlowTime::Infinite => f64::INFINITY,
        }
    }
}

impl From<f64> for FlowTime {
    fn from(t: f64) -> Self {
        if t == f64::INFINITY {
            FlowTime::Infinite
        } else {
            FlowTime::Finite(t)
        }
    }
}

impl std::str::FromStr for FlowTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(FlowTime::Infinite),
            other => match other.parse::<f64>() {
                Ok(t) if t >= 0.0 => Ok(FlowTime::from(t)),
                Ok(t) => Err(Error::invalid(format!("flow time must be >= 0, got {t}"))),
                Err(_) => Err(Error::Parse(format!("cannot read flow time from {s:?}"))),
            },
        }
    }
}

impl std::fmt::Display for FlowTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlowTime::Finite(t) => write!(f, "{t}"),
            FlowTime::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMode {
    Flow,
    Interpolation,
}

/// A fitted f_t = Σ_i α_i K(·, x_i).
#[derive(Debug, Clone)]
pub struct FlowPredictor {
    pub t: FlowTime,
    pub mode: FlowMode,
    pub dual_weights: Vec<f64>,
    /// f_t(X), computed as U (I − e^{−tΣ}) Uᵀ y.
    pub train_predictions: Vec<f64>,
    /// Interpolation needed diagonal jitter.
    pub ill_conditioned: bool,
}

/// (1 − e^{−tλ})/λ, with the λ → 0 limit t.
pub fn flow_filter(lambda: f64, t: f64) -> f64 {
    if lambda <= 0.0 {
        return t;
    }
    let x = t * lambda;
    if x < 1e-8 {
        // series: t(1 − x/2 + x²/6)
        t * (1.0 - x / 2.0 + x * x / 6.0)
    } else {
        -(-x).exp_m1() / lambda
    }
}

/// Fits the flow for responses `y` at time `t`.
pub fn fit_flow(eigen: &GramEigen, y: &[f64], t: FlowTime) -> Result<FlowPredictor> {
    let n = eigen.n();
    if y.len() != n {
        return Err(Error::invalid(format!("expected {n} responses, got {}", y.len())));
    }
    let coeffs = eigen.project(y);
    let lambdas = eigen.lambdas();
    let (d, fit, ill_conditioned, mode): (Vec<f64>, Vec<f64>, bool, FlowMode) = match t {
        FlowTime::Finite(t) => {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::invalid(format!("flow time must be >= 0, got {t}")));
            }
            let d = lambdas.iter().map(|&l| flow_filter(l, t)).collect();
            let fit = lambdas.iter().map(|&l| -(-t * l).exp_m1()).collect();
            (d, fit, false, FlowMode::Flow)
        }
        FlowTime::Infinite => {
            let l_max = lambdas[0];
            let l_min = lambdas[n - 1];
            let ill = !(l_min > ILL_CONDITIONED_RATIO * l_max);
            let jitter = if ill { INTERPOLATION_JITTER * eigen.trace() } else { 0.0 };
            let mut d = Vec::with_capacity(n);
            let mut fit = Vec::with_capacity(n);
            for &l in lambdas {
                let shifted = l + jitter;
                if shifted > 0.0 {
                    d.push(1.0 / shifted);
                    fit.push(l / shifted);
                } else {
                    d.push(0.0);
                    fit.push(0.0);
                }
            }
            (d, fit, ill, FlowMode::Interpolation)
        }
    };
    let nf = n as f64;
    let weighted: Vec<f64> = coeffs.iter().zip(&d).map(|(c, d)| c * d / nf).collect();
    let filtered: Vec<f64> = coeffs.iter().zip(&fit).map(|(c, f)| c * f).collect();
    Ok(FlowPredictor {
        t,
        mode,
        dual_weights: eigen.lift(&weighted),
        train_predictions: eigen.lift(&filtered),
        ill_conditioned,
    })
}

/// f_t at the query points: K(Q, X) α.
pub fn predict(
    predictor: &FlowPredictor,
    profile: &KernelProfile,
    train: &SphereSample,
    queries: &SphereSample,
) -> Result<Vec<f64>> {
    if train.len() != predictor.dual_weights.len() {
        return Err(Error::invalid(format!(
            "predictor was fitted on {} points but {} training points were supplied",
            predictor.dual_weights.len(),
            train.len()
        )));
    }
    let k = cross_kernel(profile, queries, train)?;
    Ok(apply_dual(k.as_ref(), &predictor.dual_weights))
}

/// K α for a precomputed cross-kernel block.
pub fn apply_dual(k: MatRef<'_, f64>, alpha: &[f64]) -> Vec<f64> {
    let a = MatRef::from_column_major_slice(alpha, alpha.len(), 1);
    let out = k * a;
    (0..out.nrows()).map(|i| out[(i, 0)]).collect()
}

/// Empirical bias–variance split of ‖f_t − f⋆‖²_n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowDiagnostics {
    pub t: f64,
    pub bias_sq: f64,
    pub variance: f64,
    pub empirical_risk: f64,
}

/// With g* = Uᵀf⋆(X) and e = y − f⋆(X):
/// B_t² = (2/n)‖e^{−tΣ} g*‖², V_t = (2/n)‖(I − e^{−tΣ}) Uᵀe‖².
pub fn diagnostics(eigen: &GramEigen, y: &[f64], f_star: &[f64], t: FlowTime) -> Result<FlowDiagnostics> {
    let n = eigen.n();
    if y.len() != n || f_star.len() != n {
        return Err(Error::invalid(format!(
            "expected {n} responses and target values, got {} and {}",
            y.len(),
            f_star.len()
        )));
    }
    let tf = t.as_f64();
    if !(tf >= 0.0) {
        return Err(Error::invalid(format!("flow time must be >= 0, got {tf}")));
    }
    let noise: Vec<f64> = y.iter().zip(f_star).map(|(a, b)| a - b).collect();
    let g = eigen.project(f_star);
    let e = eigen.project(&noise);
    let nf = n as f64;
    let mut bias = 0.0;
    let mut var = 0.0;
    for ((&l, gj), ej) in eigen.lambdas().iter().zip(&g).zip(&e) {
        // e^{−tλ}, with e^{−∞·0} = 1 on the null space
        let decay = if l == 0.0 { 1.0 } else { (-tf * l).exp() };
        bias += (decay * gj).powi(2);
        var += ((1.0 - decay) * ej).powi(2);
    }
    let fit = fit_flow(eigen, y, t)?;
    let empirical_risk = fit
        .train_predictions
        .iter()
        .zip(f_star)
        .map(|(p, f)| (p - f).powi(2))
        .sum::<f64>()
        / nf;
    Ok(FlowDiagnostics {
        t: tf,
        bias_sq: 2.0 * bias / nf,
        variance: 2.0 * var / nf,
        empirical_risk,
    })
}

/// Monte Carlo estimate (1/N) Σ (f_t(z_i) − f⋆(z_i))² from predictions at
/// the test points.
pub fn excess_risk(predictions: &[f64], target: &TargetFunction, test: &SphereSample) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("excess risk needs a non-empty test sample"));
    }
    if predictions.len() != test.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} test points",
            predictions.len(),
            test.len()
        )));
    }
    let truth = target.eval_sample(test)?;
    Ok(mean_squared_difference(predictions, &truth))
}

pub(crate) fn mean_squared_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}
