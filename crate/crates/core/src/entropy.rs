//! Metric entropy of the RKHS unit ball and the covering-radius fixed point
//! behind the minimax lower bound.
//!
//! K(ε) = ½ Σ_{λ_j > ε²} log(λ_j/ε²) sandwiches the ε-covering entropy V₂:
//! V₂(6ε) ≤ K(ε) ≤ V₂(ε). The covering radius ε̄_n solves
//! n ε̄² = K(√2 σ ε̄); the companion root with K(√2 σ ε̄ / 6) brackets the
//! V₂-based radius from the other side.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum::WeightedEigenvalues;

/// Default certifier constant c₂.
pub const DEFAULT_C2: f64 = 0.2;

/// ½ Σ_k w_k log(λ_k/ε²) over λ_k > ε².
pub fn metric_entropy(eigs: &WeightedEigenvalues, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("entropy radius must be > 0, got {eps}")));
    }
    Ok(entropy_unchecked(eigs, eps))
}

fn entropy_unchecked(eigs: &WeightedEigenvalues, eps: f64) -> f64 {
    let ln_u = 2.0 * eps.ln();
    0.5 * eigs
        .values
        .iter()
        .zip(&eigs.weights)
        .filter(|(&v, _)| v > 0.0 && v.ln() > ln_u)
        .map(|(&v, &w)| w * (v.ln() - ln_u))
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyFixture {
    pub n: usize,
    pub sigma: f64,
    /// ε̄_n: root of n ε² = K(√2 σ ε).
    pub eps_bar: f64,
    /// K(√2 σ ε̄_n).
    pub entropy_at_root: f64,
    /// |n ε̄² − K(√2 σ ε̄)|.
    pub residual: f64,
    /// Root of n ε² = K(√2 σ ε / 6); K decreases, so this is at least `eps_bar`.
    pub eps_bar_conservative: f64,
}

/// Root of n ε² = K(scale·ε) for ε > 0. The left side increases and the
/// right side decreases in ε, so the root is unique.
fn entropy_root(eigs: &WeightedEigenvalues, n: usize, scale: f64) -> Result<f64> {
    let nf = n as f64;
    let top = eigs.max_value();
    if !(top > 0.0) {
        return Err(Error::NoRoot(
            "metric entropy vanishes identically: the spectrum has no positive eigenvalue".into(),
        ));
    }
    let g = |eps: f64| nf * eps * eps - entropy_unchecked(eigs, scale * eps);
    // K(scale·hi) = 0 at the top of the spectrum
    let mut hi = top.sqrt() / scale;
    let mut lo = hi * 1e-3;
    while g(lo) >= 0.0 {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Err(Error::NoRoot("metric entropy stays below n*eps^2 on the whole bracket".into()));
        }
    }
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // keep whichever end is closer to the crossing
    Ok(if g(lo).abs() <= g(hi).abs() { lo } else { hi })
}

pub fn covering_radius(eigs: &WeightedEigenvalues, n: usize, sigma: f64) -> Result<EntropyFixture> {
    if n == 0 {
        return Err(Error::invalid("sample size n must be >= 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let scale = std::f64::consts::SQRT_2 * sigma;
    let eps_bar = entropy_root(eigs, n, scale)?;
    let entropy_at_root = entropy_unchecked(eigs, scale * eps_bar);
    let conservative = entropy_root(eigs, n, scale / 6.0)?;
    Ok(EntropyFixture {
        n,
        sigma,
        eps_bar,
        entropy_at_root,
        residual: (n as f64 * eps_bar * eps_bar - entropy_at_root).abs(),
        eps_bar_conservative: conservative,
    })
}

/// Evaluation of the lower-bound condition
/// Σ_{λ > c₂²ε̄²/36} w log(λ/(c₂²ε̄²/36)) ≥ 10 n ε̄².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundCertificate {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub c2: f64,
    pub eps_bar: f64,
    pub eps_bar_sq: f64,
    /// ½ (c₂/12)², the constant in front of ε̄² in the risk lower bound.
    pub lower_bound_constant: f64,
    /// ½ (c₂/12)² ε̄².
    pub risk_lower_bound: f64,
}

pub fn certify_lower_bound(
    eigs: &WeightedEigenvalues,
    n: usize,
    sigma: f64,
    c2: f64,
) -> Result<LowerBoundCertificate> {
    if !(c2 > 0.0 && c2.is_finite()) {
        return Err(Error::invalid(format!("c2 must be > 0, got {c2}")));
    }
    let fixture = covering_radius(eigs, n, sigma)?;
    let eps_sq = fixture.eps_bar * fixture.eps_bar;
    let level = c2 * c2 * eps_sq / 36.0;
    // ½ Σ log(λ/ε²) at ε² = level, doubled
    let lhs = 2.0 * entropy_unchecked(eigs, level.sqrt());
    let rhs = 10.0 * n as f64 * eps_sq;
    let constant = 0.5 * (c2 / 12.0).powi(2);
    Ok(LowerBoundCertificate {
        holds: lhs >= rhs,
        lhs,
        rhs,
        c2,
        eps_bar: fixture.eps_bar,
        eps_bar_sq: eps_sq,
        lower_bound_constant: constant,
        risk_lower_bound: constant * eps_sq,
    })
}
