//! Mendelson complexity fixed points and local Rademacher complexity.
//!
//! R_K(ε) = [(1/n) Σ_j min{λ_j, ε²}]^{1/2}. The Mendelson radius ε_n is the
//! crossing R_K(ε) = ε²/(2eσ); since R_K(ε)/ε is non-increasing and
//! ε/(2eσ) is increasing the crossing is unique. The stopping time of the
//! gradient flow is T = ε⁻².

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::regression::GramEigen;
use crate::seed::{derive_seed, rng_from_seed};
use crate::spectrum::{Spectrum, WeightedEigenvalues};

/// Eigenvalues down to −NEGATIVE_FLOOR are read as zero.
pub const NEGATIVE_FLOOR: f64 = 1e-12;
/// Relative residual accepted at the fixed point.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityKind {
    Population,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MendelsonSolution {
    pub kind: ComplexityKind,
    pub epsilon: f64,
    pub epsilon_sq: f64,
    pub stopping_time: f64,
    /// |R(ε) − ε²/(2eσ)|.
    pub residual: f64,
    pub sigma: f64,
    pub n: usize,
}

fn validate(eigs: &WeightedEigenvalues) -> Result<()> {
    if eigs.values.len() != eigs.weights.len() {
        return Err(Error::invalid("eigenvalue and weight lists differ in length"));
    }
    for (v, w) in eigs.values.iter().zip(&eigs.weights) {
        if !(v.is_finite() && *v >= -NEGATIVE_FLOOR) {
            return Err(Error::invalid(format!("eigenvalue {v} is negative or not finite")));
        }
        if !(w.is_finite() && *w >= 0.0) {
            return Err(Error::invalid(format!("multiplicity {w} must be finite and >= 0")));
        }
    }
    if !(eigs.tail_mass.is_finite() && eigs.tail_mass >= 0.0) {
        return Err(Error::invalid("tail mass must be finite and >= 0"));
    }
    Ok(())
}

/// n·R(ε)² split as A + B·ε² with A = Σ_{λ<ε²} wλ (plus the tail) and
/// B = Σ_{λ≥ε²} w.
fn split(eigs: &WeightedEigenvalues, u: f64) -> (f64, f64) {
    let mut a = eigs.tail_mass;
    let mut b = 0.0;
    for (&v, &w) in eigs.values.iter().zip(&eigs.weights) {
        if v <= 0.0 {
            continue;
        }
        if v < u {
            a += w * v;
        } else {
            b += w;
        }
    }
    (a, b)
}

fn r_unchecked(eigs: &WeightedEigenvalues, n: usize, eps: f64) -> f64 {
    let u = eps * eps;
    let (a, b) = split(eigs, u);
    ((a + b * u) / n as f64).sqrt()
}

/// R_K(ε) with multiplicity weights.
pub fn r_function(eigs: &WeightedEigenvalues, n: usize, eps: f64) -> Result<f64> {
    validate(eigs)?;
    if n == 0 {
        return Err(Error::invalid("sample size n must be >= 1"));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("radius must be >= 0, got {eps}")));
    }
    Ok(r_unchecked(eigs, n, eps))
}

/// R_K(ε) for a plain eigenvalue list (each with weight one).
pub fn r_function_plain(eigvals: &[f64], n: usize, eps: f64) -> Result<f64> {
    r_function(&WeightedEigenvalues::unweighted(eigvals.to_vec()), n, eps)
}

fn threshold(sigma: f64) -> f64 {
    2.0 * std::f64::consts::E * sigma
}

/// Solves R_K(ε) = ε²/(2eσ) from the default bracket.
pub fn solve_mendelson(eigs: &WeightedEigenvalues, n: usize, sigma: f64) -> Result<MendelsonSolution> {
    solve_mendelson_in(eigs, n, sigma, None)
}

/// As [`solve_mendelson`], optionally starting from a custom bracket
/// `(lo, hi)`; the bracket is widened geometrically until it straddles the
/// crossing, so any positive bracket yields the same root.
pub fn solve_mendelson_in(
    eigs: &WeightedEigenvalues,
    n: usize,
    sigma: f64,
    bracket: Option<(f64, f64)>,
) -> Result<MendelsonSolution> {
    validate(eigs)?;
    if n == 0 {
        return Err(Error::invalid("sample size n must be >= 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let total = eigs.total_mass();
    let top = eigs.max_value();
    if !(top > 0.0) {
        return Err(Error::invalid(
            "all eigenvalues are zero: the Mendelson fixed point does not exist",
        ));
    }
    let c = threshold(sigma);
    let nf = n as f64;
    // h is strictly decreasing: positive left of the root, negative right of it
    let h = |eps: f64| r_unchecked(eigs, n, eps) / eps - eps / c;
    let (mut lo, mut hi) = bracket.unwrap_or((1e-12, top.sqrt().max(c * (total / nf).sqrt())));
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!("bracket ({lo}, {hi}) must satisfy 0 < lo < hi")));
    }
    while h(lo) <= 0.0 {
        lo /= 10.0;
        if lo < 1e-300 {
            return Err(Error::NoRoot("no sign change below the bracket".into()));
        }
    }
    while h(hi) > 0.0 {
        hi *= 10.0;
        if hi > 1e300 {
            return Err(Error::NoRoot("no sign change above the bracket".into()));
        }
    }

    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        // exact root of the quadratic on the piece containing mid
        let (a, b) = split(eigs, mid * mid);
        let p = c * c * b / nf;
        let u = 0.5 * (p + (p * p + 4.0 * c * c * a / nf).sqrt());
        if u > 0.0 && split(eigs, u) == (a, b) {
            let eps = u.sqrt();
            return Ok(finish(eigs, n, sigma, eps));
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let eps = 0.5 * (lo + hi);
    let sol = finish(eigs, n, sigma, eps);
    if sol.residual > RESIDUAL_TOL * sol.epsilon_sq / c {
        return Err(Error::numeric(format!(
            "Mendelson bisection stalled at eps = {eps:e} with residual {:e}",
            sol.residual
        )));
    }
    Ok(sol)
}

fn finish(eigs: &WeightedEigenvalues, n: usize, sigma: f64, eps: f64) -> MendelsonSolution {
    let epsilon_sq = eps * eps;
    MendelsonSolution {
        kind: ComplexityKind::Population,
        epsilon: eps,
        epsilon_sq,
        stopping_time: 1.0 / epsilon_sq,
        residual: (r_unchecked(eigs, n, eps) - epsilon_sq / threshold(sigma)).abs(),
        sigma,
        n,
    }
}

/// T = 1/ε².
pub fn stopping_time(solution: &MendelsonSolution) -> f64 {
    1.0 / solution.epsilon_sq
}

/// Population fixed point ε_n from a Mercer spectrum.
pub fn population_mendelson(spectrum: &Spectrum, n: usize, sigma: f64) -> Result<MendelsonSolution> {
    solve_mendelson(&spectrum.weighted(), n, sigma)
}

/// Empirical fixed point ε̂_n from the eigenvalues of (1/n)K(X, X).
pub fn empirical_mendelson(eigen: &GramEigen, sigma: f64) -> Result<MendelsonSolution> {
    let eigs = WeightedEigenvalues::unweighted(eigen.lambdas().to_vec());
    let mut sol = solve_mendelson(&eigs, eigen.n(), sigma)?;
    sol.kind = ComplexityKind::Empirical;
    Ok(sol)
}

/// Empirical R̂_K(t).
pub fn empirical_r(eigen: &GramEigen, t: f64) -> f64 {
    let n = eigen.n() as f64;
    let u = t * t;
    (eigen.lambdas().iter().map(|&l| l.min(u)).sum::<f64>() / n).sqrt()
}

/// Ẑ_n(w, t) = sup over the RKHS unit ball with ‖g‖_n ≤ t of |(1/n) Σ w_i g(x_i)|.
///
/// In the empirical eigenbasis this maximizes Σ c_j b_j over Σ b_j² ≤ 1 and
/// Σ λ̂_j b_j² ≤ t², with c_j = √(λ̂_j/n)⟨u_j, w⟩. The value is the dual
/// min_{θ∈[0,1]} √(Σ c_j² / (θ + (1−θ)λ̂_j/t²)), a convex problem in θ.
pub fn rademacher_z(eigen: &GramEigen, w: &[f64], t: f64) -> Result<f64> {
    let n = eigen.n();
    if w.len() != n {
        return Err(Error::invalid(format!("sign vector has length {}, expected {n}", w.len())));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("localization radius must be >= 0, got {t}")));
    }
    let proj = eigen.project(w);
    Ok(z_from_projection(eigen.lambdas(), &proj, t))
}

fn z_from_projection(lambdas: &[f64], proj: &[f64], t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let n = lambdas.len() as f64;
    let cutoff = 1e-14 * lambdas[0];
    let terms: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(proj)
        .filter(|(&l, _)| l > cutoff)
        .map(|(&l, &p)| (l * p * p / n, l))
        .collect();
    let unconstrained: f64 = terms.iter().map(|(c2, _)| c2).sum();
    let t2 = t * t;
    if t2 >= lambdas[0] {
        return unconstrained.sqrt();
    }
    let objective = |theta: f64| -> f64 {
        terms
            .iter()
            .map(|&(c2, l)| c2 / (theta + (1.0 - theta) * l / t2))
            .sum()
    };
    let theta = golden_section_min(&objective, 0.0, 1.0, 1e-12);
    objective(theta).min(objective(1.0)).min(objective(0.0)).sqrt()
}

fn golden_section_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RademacherEstimate {
    pub t: f64,
    pub q_hat: f64,
    pub std_err: f64,
    pub draws: usize,
    pub r_hat: f64,
}

/// Monte Carlo mean of Ẑ_n(w, t) over Rademacher vectors w. Draw i uses the
/// seed derived from (seed, i).
pub fn rademacher_estimate(eigen: &GramEigen, t: f64, draws: usize, seed: u64) -> Result<RademacherEstimate> {
    if draws == 0 {
        return Err(Error::invalid("draws must be >= 1"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("localization radius must be >= 0, got {t}")));
    }
    let n = eigen.n();
    let values: Vec<f64> = (0..draws)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, &[i as u64]));
            let w: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            z_from_projection(eigen.lambdas(), &eigen.project(&w), t)
        })
        .collect();
    let m = draws as f64;
    let mean = values.iter().sum::<f64>() / m;
    let std_err = if draws > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    } else {
        0.0
    };
    Ok(RademacherEstimate {
        t,
        q_hat: mean,
        std_err,
        draws,
        r_hat: empirical_r(eigen, t),
    })
}
