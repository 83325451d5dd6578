//! Mercer spectrum of an inner-product kernel on 𝕊^d.
//!
//! By the addition theorem Φ(⟨x, y⟩) = Σ_k μ_k N(d, k) P_k(⟨x, y⟩), where
//! P_k is the degree-k Legendre (Gegenbauer) polynomial of ℝ^{d+1}
//! normalized to P_k(1) = 1 and N(d, k) is the number of degree-k spherical
//! harmonics. The eigenvalues follow from the Funk–Hecke integral
//!
//! ```text
//! μ_k = ω_{d−1}/ω_d ∫_{−1}^{1} Φ(t) P_k(t) (1 − t²)^{(d−2)/2} dt
//!     = ω_{d−1}/ω_d ∫_0^π Φ(cos θ) P_k(cos θ) sin^{d−1}θ dθ.
//! ```
//!
//! The integral is evaluated in the angular form with Gauss–Legendre nodes:
//! every profile in this crate is analytic in θ (the NTK profile has a
//! square-root branch at t = ±1 that disappears under t = cos θ), so the rule
//! converges geometrically, and the weight sin^{d−1}θ is formed in the log
//! domain so large d cannot underflow the whole integrand.
//!
//! For the two-layer NTK the eigenvalues also have an exact closed form
//! through the half-interval moments β_{α,k}; odd degrees k ≥ 3 vanish.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::kernels::KernelProfile;
use crate::special::{ln_gamma, ln_sphere_ratio, CompensatedSum, GaussLegendre};

/// Hard cap on the number of stored degrees.
pub const K_MAX: usize = 512;
/// Default tolerance of the trace identity.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;
/// Largest k + d for which N(d, k) is also kept as an exact integer.
pub const EXACT_MULTIPLICITY_LIMIT: usize = 2000;

const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_MAX_NODES: usize = 8192;

/// N(d, k), the dimension of degree-k spherical harmonics on 𝕊^d.
pub fn multiplicity(d: usize, k: usize) -> BigUint {
    assert!(d >= 1, "sphere dimension must be at least 1");
    if k == 0 {
        return BigUint::one();
    }
    // C(k+d−2, k−1) · (2k+d−1) / k, exact division
    let n = k + d - 2;
    let r = (k - 1).min(d - 1);
    let mut c = BigUint::one();
    for i in 1..=r {
        c = c * BigUint::from(n - r + i) / BigUint::from(i);
    }
    c * BigUint::from(2 * k + d - 1) / BigUint::from(k)
}

/// ln N(d, k) through log-Gamma.
pub fn ln_multiplicity(d: usize, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let (df, kf) = (d as f64, k as f64);
    (2.0 * kf + df - 1.0).ln() - kf.ln() + ln_gamma(kf + df - 1.0) - ln_gamma(kf) - ln_gamma(df)
}

/// Legendre polynomial P_k of ℝ^{d+1}, normalized so that P_k(1) = 1.
pub fn legendre(d: usize, k: usize, t: f64) -> f64 {
    let mut buf = vec![0.0; k + 1];
    legendre_all(d, t, &mut buf);
    buf[k]
}

/// Fills `out[k] = P_k(t)` for k = 0..out.len().
fn legendre_all(d: usize, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    let df = d as f64;
    for k in 2..out.len() {
        let kf = k as f64;
        out[k] = ((2.0 * kf + df - 3.0) * t * out[k - 1] - (kf - 1.0) * out[k - 2]) / (kf + df - 2.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Interval {
    Full,
    Half,
}

struct QuadRun {
    values: Vec<f64>,
    scales: Vec<f64>,
}

/// ω_{d−1}/ω_d ∫ f(θ) P_k(cos θ) sin^{d−1}θ dθ for every k ≤ kmax, over
/// [0, π] or [0, π/2], with an `n`-node rule.
fn funk_hecke_run(f: &dyn Fn(f64) -> f64, d: usize, kmax: usize, n: usize, interval: Interval) -> QuadRun {
    let rule = GaussLegendre::cached(n);
    let upper = match interval {
        Interval::Full => std::f64::consts::PI,
        Interval::Half => std::f64::consts::FRAC_PI_2,
    };
    let ln_c = ln_sphere_ratio(d);
    let power = (d - 1) as f64;
    let mut sums = vec![CompensatedSum::default(); kmax + 1];
    let mut scales = vec![0.0; kmax + 1];
    let mut p = vec![0.0; kmax + 1];
    for (theta, w) in rule.mapped(0.0, upper) {
        let weight = if d == 1 {
            w * ln_c.exp()
        } else {
            w * (power * theta.sin().ln() + ln_c).exp()
        };
        if weight == 0.0 {
            continue;
        }
        let fv = f(theta) * weight;
        legendre_all(d, theta.cos(), &mut p);
        for k in 0..=kmax {
            let term = fv * p[k];
            sums[k].add(term);
            scales[k] += term.abs();
        }
    }
    QuadRun {
        values: sums.iter().map(CompensatedSum::value).collect(),
        scales,
    }
}

/// A converged quadrature value together with the magnitude scale
/// ∫|integrand| used for the absolute noise floor.
#[derive(Debug, Clone, Copy)]
struct QuadValue {
    value: f64,
    scale: f64,
}

fn initial_nodes(d: usize, kmax: usize) -> usize {
    let by_degree = 2 * (kmax + 1);
    let by_width = (8.0 * (d as f64).sqrt()).ceil() as usize;
    by_degree.max(by_width).max(64).next_power_of_two()
}

fn funk_hecke_converged(
    f: &dyn Fn(f64) -> f64,
    d: usize,
    kmax: usize,
    interval: Interval,
) -> Result<Vec<QuadValue>> {
    let mut n = initial_nodes(d, kmax);
    let mut prev = funk_hecke_run(f, d, kmax, n, interval);
    loop {
        let next_n = 2 * n;
        let next = funk_hecke_run(f, d, kmax, next_n, interval);
        let worst = (0..=kmax)
            .map(|k| {
                let diff = (next.values[k] - prev.values[k]).abs();
                let allowed = (QUAD_REL_TOL * next.values[k].abs()).max(1e-14 * next.scales[k]);
                (k, diff, allowed)
            })
            .find(|&(_, diff, allowed)| !(diff <= allowed));
        match worst {
            None => {
                return Ok((0..=kmax)
                    .map(|k| QuadValue {
                        value: next.values[k],
                        scale: next.scales[k],
                    })
                    .collect())
            }
            Some((k, diff, allowed)) if next_n >= QUAD_MAX_NODES => {
                return Err(Error::numeric(format!(
                    "Funk-Hecke quadrature did not converge on S^{d}: degree {k} changes by {diff:e} \
                     (allowed {allowed:e}) between {n} and {next_n} nodes"
                )))
            }
            Some(_) => {
                n = next_n;
                prev = next;
            }
        }
    }
}

fn clamp_eigenvalue(q: QuadValue, k: usize, d: usize) -> Result<f64> {
    if q.value >= 0.0 {
        return Ok(q.value);
    }
    let floor = 1e-14 + 1e-13 * q.scale;
    if q.value >= -floor {
        Ok(0.0)
    } else {
        Err(Error::numeric(format!(
            "eigenvalue mu_{k} = {:e} on S^{d} is negative beyond the quadrature noise floor; \
             the profile is not positive definite here",
            q.value
        )))
    }
}

/// μ_0, …, μ_kmax by quadrature, each clamped at the noise floor.
///
/// Profiles that are smooth on [−1, 1] go through the Rodrigues form
/// (k integrations by parts),
///
/// ```text
/// μ_k = ω_{d−1}/ω_d · Γ(d/2) / (2^k Γ(k + d/2)) ∫_{−1}^{1} Φ^{(k)}(t) (1 − t²)^{k+(d−2)/2} dt,
/// ```
///
/// whose integrand keeps one sign for RBF and Taylor profiles, so each μ_k
/// comes out to full relative accuracy even when it is many orders of
/// magnitude below ∫|Φ P_k|. The NTK uses the direct Funk–Hecke integral.
pub fn eigenvalues_quadrature(profile: &KernelProfile, d: usize, kmax: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::invalid("sphere dimension d must be at least 1"));
    }
    if profile.derivative_angle(0, 0.0).is_some() {
        return (0..=kmax).map(|k| rodrigues_eigenvalue(profile, d, k)).collect();
    }
    funk_hecke_eigenvalues(profile, d, kmax)
}

/// μ_0, …, μ_kmax from the direct Funk–Hecke integral against P_k.
pub fn funk_hecke_eigenvalues(profile: &KernelProfile, d: usize, kmax: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::invalid("sphere dimension d must be at least 1"));
    }
    let f = |theta: f64| profile.phi_angle(theta);
    funk_hecke_converged(&f, d, kmax, Interval::Full)?
        .into_iter()
        .enumerate()
        .map(|(k, q)| clamp_eigenvalue(q, k, d))
        .collect()
}

fn rodrigues_run(profile: &KernelProfile, d: usize, k: usize, n: usize, ln_pref: f64) -> QuadValue {
    let rule = GaussLegendre::cached(n);
    let power = (2 * k + d - 1) as f64;
    let mut sum = CompensatedSum::default();
    let mut scale = 0.0;
    for (theta, w) in rule.mapped(0.0, std::f64::consts::PI) {
        let weight = w * (power * theta.sin().ln() + ln_pref).exp();
        if weight == 0.0 {
            continue;
        }
        let v = profile.derivative_angle(k, theta).unwrap_or(f64::NAN) * weight;
        sum.add(v);
        scale += v.abs();
    }
    QuadValue { value: sum.value(), scale }
}

fn rodrigues_eigenvalue(profile: &KernelProfile, d: usize, k: usize) -> Result<f64> {
    let (df, kf) = (d as f64, k as f64);
    let ln_pref = ln_sphere_ratio(d) + ln_gamma(df / 2.0) - kf * std::f64::consts::LN_2 - ln_gamma(kf + df / 2.0);
    let mut n = initial_nodes(d + 2 * k, 0);
    let mut prev = rodrigues_run(profile, d, k, n, ln_pref);
    loop {
        let next = rodrigues_run(profile, d, k, 2 * n, ln_pref);
        let diff = (next.value - prev.value).abs();
        let allowed = (QUAD_REL_TOL * next.value.abs()).max(1e-14 * next.scale);
        if diff <= allowed {
            return clamp_eigenvalue(next, k, d);
        }
        if 2 * n >= QUAD_MAX_NODES {
            return Err(Error::numeric(format!(
                "quadrature for mu_{k} on S^{d} did not converge: change {diff:e} (allowed {allowed:e}) \
                 between {n} and {} nodes",
                2 * n
            )));
        }
        n *= 2;
        prev = next;
    }
}

/// μ_k of `profile` on 𝕊^d by quadrature of the Funk–Hecke integral.
pub fn eigenvalue_quadrature(profile: &KernelProfile, d: usize, k: usize) -> Result<f64> {
    Ok(eigenvalues_quadrature(profile, d, k)?[k])
}

/// How a [`BetaCoefficient`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaRoute {
    /// Gamma-function closed form, valid for k − α ∈ {1, 3, 5, …}.
    ClosedForm,
    /// k − α is a positive even integer: the half-interval moment of an
    /// even/odd pair vanishes.
    VanishingByParity,
    /// Direct quadrature of the half-interval integral.
    Quadrature,
}

/// β_{α,k} = ω_{d−1}/ω_d ∫_0^1 t^α P_k(t) (1 − t²)^{(d−2)/2} dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaCoefficient {
    pub d: usize,
    pub alpha: u8,
    pub k: usize,
    pub value: f64,
    /// ln|β|; −∞ when β = 0.
    pub log_abs: f64,
    pub route: BetaRoute,
}

impl BetaCoefficient {
    pub fn is_zero(&self) -> bool {
        self.route == BetaRoute::VanishingByParity
    }
}

/// (ln|β|, sign) from the closed form, or `None` outside its domain.
pub fn ntk_beta_closed_form(d: usize, alpha: u8, k: usize) -> Option<(f64, f64)> {
    let a = alpha as usize;
    if k <= a || (k - a) % 2 == 0 {
        return None;
    }
    let (df, kf, af) = (d as f64, k as f64, alpha as f64);
    let ln_abs = ln_sphere_ratio(d) - kf * std::f64::consts::LN_2
        + ln_gamma(df / 2.0)
        + ln_gamma(kf - af)
        - ln_gamma((kf - af + 1.0) / 2.0)
        - ln_gamma(kf / 2.0 + df / 2.0 + af / 2.0 + 0.5);
    // α! = 1 for α ∈ {0, 1}
    let sign = if ((k - a - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    Some((ln_abs, sign))
}

/// β_{α,k} by quadrature on the half interval.
pub fn ntk_beta_quadrature(d: usize, alpha: u8, k: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("sphere dimension d must be at least 1"));
    }
    let f = |theta: f64| theta.cos().powi(alpha as i32);
    Ok(funk_hecke_converged(&f, d, k, Interval::Half)?[k].value)
}

pub fn ntk_beta(d: usize, alpha: u8, k: usize) -> Result<BetaCoefficient> {
    if alpha > 1 {
        return Err(Error::invalid(format!("alpha must be 0 or 1, got {alpha}")));
    }
    if d == 0 {
        return Err(Error::invalid("sphere dimension d must be at least 1"));
    }
    let base = BetaCoefficient {
        d,
        alpha,
        k,
        value: 0.0,
        log_abs: f64::NEG_INFINITY,
        route: BetaRoute::VanishingByParity,
    };
    let a = alpha as usize;
    if k > a && (k - a) % 2 == 0 {
        return Ok(base);
    }
    if let Some((log_abs, sign)) = ntk_beta_closed_form(d, alpha, k) {
        return Ok(BetaCoefficient {
            value: sign * log_abs.exp(),
            log_abs,
            route: BetaRoute::ClosedForm,
            ..base
        });
    }
    let value = ntk_beta_quadrature(d, alpha, k)?;
    Ok(BetaCoefficient {
        value,
        log_abs: value.abs().ln(),
        route: BetaRoute::Quadrature,
        ..base
    })
}

/// ln μ_k of the two-layer NTK from the β closed forms; `None` when μ_k = 0
/// (odd k ≥ 3).
pub fn ntk_ln_eigen_closed(d: usize, k: usize) -> Result<Option<f64>> {
    if k == 0 {
        return Err(Error::invalid("the NTK closed form covers degrees k >= 1"));
    }
    let (df, kf) = (d as f64, k as f64);
    let denom = 2.0 * kf + df - 1.0;
    let terms = [
        ((kf / denom).ln(), ntk_beta(d, 0, k - 1)?),
        (((kf + df - 1.0) / denom).ln(), ntk_beta(d, 0, k + 1)?),
        ((df + 1.0).ln(), ntk_beta(d, 1, k)?),
    ];
    let logs: Vec<f64> = terms
        .iter()
        .filter(|(_, b)| !b.is_zero() && b.log_abs.is_finite())
        .map(|(lw, b)| lw + 2.0 * b.log_abs)
        .collect();
    if logs.is_empty() {
        return Ok(None);
    }
    Ok(Some(log_sum_exp(&logs)))
}

/// μ_k of the two-layer NTK on 𝕊^d (k ≥ 1) in closed form:
/// k/(2k+d−1) β²_{0,k−1} + (k+d−1)/(2k+d−1) β²_{0,k+1} + (d+1) β²_{1,k}.
pub fn ntk_eigen_closed(d: usize, k: usize) -> Result<f64> {
    Ok(ntk_ln_eigen_closed(d, k)?.map_or(0.0, f64::exp))
}

/// ln μ̃_k, the closed-form surrogate that sandwiches NTK eigenvalues.
pub fn ln_surrogate_mu(d: usize, k: usize) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let (df, kf) = (d as f64, k as f64);
    df * df.ln() + (kf - 2.0) * kf.ln() - (kf + df + 1.0) * (kf + df).ln() + (kf * kf + kf * df + df).ln()
}

/// μ̃_0 = μ̃_1 = 1, μ̃_k = d^d k^{k−2} (k+d)^{−(k+d+1)} (k² + kd + d).
pub fn surrogate_mu(d: usize, k: usize) -> f64 {
    ln_surrogate_mu(d, k).exp()
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// One degree of the Mercer decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumLevel {
    pub k: usize,
    /// μ_k; underflows to 0 for very high degrees, see `ln_mu`.
    pub mu: f64,
    /// ln μ_k (−∞ when μ_k = 0).
    pub ln_mu: f64,
    /// Exact N(d, k) when k + d ≤ [`EXACT_MULTIPLICITY_LIMIT`].
    pub multiplicity: Option<BigUint>,
    pub ln_multiplicity: f64,
}

impl SpectrumLevel {
    fn new(d: usize, k: usize, mu: f64) -> Self {
        Self::from_ln(d, k, mu.ln())
    }

    fn from_ln(d: usize, k: usize, ln_mu: f64) -> Self {
        let multiplicity = (k + d <= EXACT_MULTIPLICITY_LIMIT).then(|| multiplicity(d, k));
        SpectrumLevel {
            k,
            mu: ln_mu.exp(),
            ln_mu,
            multiplicity,
            ln_multiplicity: ln_multiplicity(d, k),
        }
    }

    /// N(d, k) as a float (may be +∞ for astronomically large multiplicities).
    pub fn multiplicity_f64(&self) -> f64 {
        match &self.multiplicity {
            Some(m) => m.to_f64().unwrap_or(f64::INFINITY),
            None => self.ln_multiplicity.exp(),
        }
    }

    /// μ_k N(d, k), formed in the log domain.
    pub fn mass(&self) -> f64 {
        (self.ln_mu + self.ln_multiplicity).exp()
    }
}

/// Per-degree Mercer data for k = 0..=K of one profile on 𝕊^d.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub d: usize,
    pub levels: Vec<SpectrumLevel>,
    pub profile_label: String,
    /// Φ(1).
    pub kappa: f64,
    /// Φ(1) − Σ_{k ≤ K} μ_k N(d, k): the mass not carried by stored levels.
    pub truncation_tail: f64,
    /// Independent estimate of Σ_{k > K} μ_k N(d, k). Zero when the stored
    /// levels already meet the trace identity; for the NTK it is the
    /// Richardson-extrapolated closed-form tail past the cap.
    pub tail_estimate: f64,
    pub tail_tol: f64,
}

impl Spectrum {
    /// Σ_{k ≤ K} μ_k N(d, k).
    pub fn stored_trace(&self) -> f64 {
        self.levels.iter().map(SpectrumLevel::mass).collect::<CompensatedSum>().value()
    }

    /// Stored levels plus the tail estimate; equals Φ(1) by the trace
    /// identity.
    pub fn trace(&self) -> f64 {
        self.stored_trace() + self.tail_estimate
    }

    pub fn level(&self, k: usize) -> Option<&SpectrumLevel> {
        self.levels.get(k)
    }

    pub fn mu(&self, k: usize) -> Option<f64> {
        self.level(k).map(|l| l.mu)
    }

    pub fn max_mu(&self) -> f64 {
        self.levels.iter().map(|l| l.mu).fold(0.0, f64::max)
    }

    /// The multiplicity-expanded eigenvalue sequence λ_1 ≥ λ_2 ≥ … truncated
    /// to `len` entries (fewer if the stored levels run out).
    pub fn expanded(&self, len: usize) -> Vec<f64> {
        let mut order: Vec<&SpectrumLevel> = self.levels.iter().filter(|l| l.mu > 0.0).collect();
        order.sort_by(|a, b| b.mu.total_cmp(&a.mu).then(a.k.cmp(&b.k)));
        let mut out = Vec::with_capacity(len.min(1 << 20));
        for level in order {
            let m = level.multiplicity_f64();
            let take = if m >= (len - out.len()) as f64 {
                len - out.len()
            } else {
                m as usize
            };
            out.extend(std::iter::repeat_n(level.mu, take));
            if out.len() == len {
                break;
            }
        }
        out
    }

    /// Levels as (value, weight) pairs for the complexity and entropy code.
    /// Levels whose eigenvalue is below 1e-200 or whose multiplicity
    /// overflows are folded into the tail mass together with the tail
    /// estimate.
    pub fn weighted(&self) -> WeightedEigenvalues {
        let mut out = WeightedEigenvalues {
            values: Vec::with_capacity(self.levels.len()),
            weights: Vec::with_capacity(self.levels.len()),
            tail_mass: self.tail_estimate,
        };
        let mut folded = CompensatedSum::default();
        for l in &self.levels {
            let w = l.multiplicity_f64();
            if l.mu > 1e-200 && w.is_finite() {
                out.values.push(l.mu);
                out.weights.push(w);
            } else {
                folded.add(l.mass());
            }
        }
        out.tail_mass += folded.value();
        out
    }
}

/// A nonnegative eigenvalue list with multiplicities, plus an optional tail
/// mass Σ λ over eigenvalues too small to store (assumed below every radius
/// of interest).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEigenvalues {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub tail_mass: f64,
}

impl WeightedEigenvalues {
    /// Unit weights, no tail: the form used for empirical eigenvalues.
    pub fn unweighted(values: Vec<f64>) -> Self {
        let weights = vec![1.0; values.len()];
        WeightedEigenvalues {
            values,
            weights,
            tail_mass: 0.0,
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Σ w_j λ_j + tail.
    pub fn total_mass(&self) -> f64 {
        let s: CompensatedSum = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| if *v > 0.0 { v * w } else { 0.0 })
            .collect();
        s.value() + self.tail_mass
    }
}

/// Computes levels k = 0, 1, … until the trace identity
/// Σ μ_k N(d, k) = Φ(1) is met to `tail_tol`, or [`K_MAX`] is reached.
///
/// The two-layer NTK uses the exact closed form for k ≥ 1. Its levels decay
/// only like μ_k N(d, k) ~ k^{−2}, so all [`K_MAX`] degrees are stored and the
/// remaining mass is estimated by Richardson extrapolation of closed-form
/// partial sums at K_MAX·2^j.
pub fn build_spectrum(profile: &KernelProfile, d: usize, tail_tol: f64) -> Result<Spectrum> {
    if !(tail_tol > 0.0) {
        return Err(Error::invalid(format!("tail_tol must be > 0, got {tail_tol}")));
    }
    if d == 0 {
        return Err(Error::invalid("sphere dimension d must be at least 1"));
    }
    let kappa = profile.kappa();
    let (levels, tail_estimate) = match profile {
        KernelProfile::Ntk2 => ntk_levels(d, tail_tol)?,
        _ => (quadrature_levels(profile, d, kappa, tail_tol)?, 0.0),
    };
    let stored: f64 = levels.iter().map(SpectrumLevel::mass).collect::<CompensatedSum>().value();
    let defect = kappa - stored - tail_estimate;
    if defect.abs() > 10.0 * tail_tol {
        return Err(Error::numeric(format!(
            "trace identity violated for {} on S^{d}: Phi(1) = {kappa}, levels sum to {stored} \
             with tail estimate {tail_estimate:e} after {} degrees",
            profile.label(),
            levels.len()
        )));
    }
    Ok(Spectrum {
        d,
        levels,
        profile_label: profile.label(),
        kappa,
        truncation_tail: kappa - stored,
        tail_estimate,
        tail_tol,
    })
}

fn quadrature_levels(
    profile: &KernelProfile,
    d: usize,
    kappa: f64,
    tail_tol: f64,
) -> Result<Vec<SpectrumLevel>> {
    let mut kmax = 16;
    loop {
        let mus = eigenvalues_quadrature(profile, d, kmax)?;
        let mut acc = CompensatedSum::default();
        let mut levels = Vec::with_capacity(kmax + 1);
        for (k, mu) in mus.into_iter().enumerate() {
            let level = SpectrumLevel::new(d, k, mu);
            acc.add(level.mass());
            levels.push(level);
            if acc.value() >= kappa - tail_tol {
                return Ok(levels);
            }
        }
        if kmax >= K_MAX {
            return Ok(levels);
        }
        kmax = (2 * kmax).min(K_MAX);
    }
}

fn ntk_mass(d: usize, k: usize) -> Result<f64> {
    Ok(match ntk_ln_eigen_closed(d, k)? {
        Some(ln_mu) => (ln_mu + ln_multiplicity(d, k)).exp(),
        None => 0.0,
    })
}

fn ntk_levels(d: usize, tail_tol: f64) -> Result<(Vec<SpectrumLevel>, f64)> {
    let profile = KernelProfile::Ntk2;
    let mu0 = eigenvalue_quadrature(&profile, d, 0)?;
    let mut levels = vec![SpectrumLevel::new(d, 0, mu0)];
    for k in 1..=K_MAX {
        let ln_mu = ntk_ln_eigen_closed(d, k)?.unwrap_or(f64::NEG_INFINITY);
        levels.push(SpectrumLevel::from_ln(d, k, ln_mu));
    }
    let tail = ntk_tail_estimate(d, K_MAX, tail_tol)?;
    Ok((levels, tail))
}

const RICHARDSON_MAX_DOUBLINGS: usize = 16;
const RICHARDSON_MAX_ORDER: usize = 6;

/// Σ_{k > k_cap} μ_k N(d, k) for the NTK. Partial sums T_j up to k_cap·2^j
/// behave like T_∞ − Σ_m c_m (k_cap 2^j)^{−m}; a Richardson table over j
/// removes the leading orders.
fn ntk_tail_estimate(d: usize, k_cap: usize, tail_tol: f64) -> Result<f64> {
    let mut partial = CompensatedSum::default();
    let mut k = k_cap + 1;
    // the 1/K expansion only holds once K is well past d, so extrapolation
    // orders are limited to partial sums taken at K ≥ 4d
    let first_usable = (0..).find(|&j| k_cap << j >= 4 * d).unwrap_or(0);
    // table[j][p]
    let mut table: Vec<Vec<f64>> = vec![vec![0.0]];
    let mut last: Option<f64> = None;
    for j in 1..=RICHARDSON_MAX_DOUBLINGS {
        let upper = k_cap << j;
        while k <= upper {
            partial.add(ntk_mass(d, k)?);
            k += 1;
        }
        let order = j.saturating_sub(first_usable).min(RICHARDSON_MAX_ORDER);
        let mut row = vec![partial.value()];
        for p in 1..=order {
            let f = (1u64 << p) as f64;
            row.push((f * row[p - 1] - table[j - 1][p - 1]) / (f - 1.0));
        }
        let estimate = row[order];
        table.push(row);
        if order >= 3 {
            if let Some(prev) = last {
                if (estimate - prev).abs() <= 1e-2 * tail_tol {
                    return Ok(estimate);
                }
            }
            last = Some(estimate);
        }
    }
    Ok(last.unwrap_or_else(|| partial.value()))
}

/// Σ_k N(d, k) min{μ_k, μ_p} over the stored levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSum {
    pub value: f64,
    /// Mass of the unstored degrees; each of their eigenvalues lies below
    /// μ_p for the profiles here, so this bounds what `value` is missing.
    pub truncation_tail: f64,
}

pub fn spectral_sum(spectrum: &Spectrum, p: usize) -> Result<SpectralSum> {
    let mu_p = spectrum.mu(p).ok_or_else(|| {
        Error::invalid(format!(
            "degree {p} is not among the {} stored levels",
            spectrum.levels.len()
        ))
    })?;
    let value = spectrum
        .levels
        .iter()
        .map(|l| {
            let ln_m = l.ln_mu.min(mu_p.ln());
            (ln_m + l.ln_multiplicity).exp()
        })
        .collect::<CompensatedSum>()
        .value();
    Ok(SpectralSum {
        value,
        truncation_tail: spectrum.tail_estimate,
    })
}
