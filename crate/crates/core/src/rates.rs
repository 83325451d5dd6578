//! Theoretical excess-risk exponents as functions of γ, where d ≍ n^{1/γ}.
//!
//! The risk decays like n^{−r(γ)}. Regime boundaries follow half-open
//! intervals with the right endpoint included: γ = 3 belongs to (2, 3].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFamily {
    /// Inner-product kernels, p = ⌊γ/2⌋.
    Inner,
    /// Two-layer NTK with the even-degree partition: p = ⌊γ/2⌋ below 4,
    /// 2⌊γ/4⌋ from 4 on.
    Ntk,
    /// Kernel interpolation (t = ∞), exponent η(γ); γ > 1 only.
    Interpolation,
}

impl RateFamily {
    pub const ALL: [RateFamily; 3] = [RateFamily::Inner, RateFamily::Ntk, RateFamily::Interpolation];

    pub fn as_str(self) -> &'static str {
        match self {
            RateFamily::Inner => "inner",
            RateFamily::Ntk => "ntk",
            RateFamily::Interpolation => "interpolation",
        }
    }
}

impl fmt::Display for RateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" => Ok(RateFamily::Inner),
            "ntk" => Ok(RateFamily::Ntk),
            "interpolation" => Ok(RateFamily::Interpolation),
            other => Err(Error::invalid(format!(
                "unknown rate family {other:?} (expected inner, ntk or interpolation)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStatus {
    Matched,
    MatchedUpToLog,
    MatchedUpToEpsilon,
    UpperOnly,
}

impl MatchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchStatus::Matched => "matched",
            MatchStatus::MatchedUpToLog => "matched_up_to_log",
            MatchStatus::MatchedUpToEpsilon => "matched_up_to_epsilon",
            MatchStatus::UpperOnly => "upper_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub gamma: f64,
    pub family: RateFamily,
    /// Regime integer: p for the regression families, ℓ = ⌊γ⌋ for
    /// interpolation.
    pub p: u32,
    pub n_exponent: f64,
    /// γ · n_exponent: the same rate written as d^{−d_exponent}.
    pub d_exponent: f64,
    pub log_factor: bool,
    pub match_status: MatchStatus,
}

/// True when γ is exactly the integer m.
fn is_integer(gamma: f64, m: f64) -> bool {
    gamma == m
}

pub fn rate_curve(gamma: f64, family: RateFamily) -> Result<RatePoint> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be a finite positive number, got {gamma}")));
    }
    let (p, n_exponent, log_factor, status) = match family {
        RateFamily::Inner => {
            let p = (gamma / 2.0).floor();
            if is_integer(gamma, 2.0 * p) {
                (p, 0.5, false, MatchStatus::Matched)
            } else if gamma <= 2.0 * p + 1.0 {
                (p, (gamma - p) / gamma, true, MatchStatus::MatchedUpToEpsilon)
            } else {
                (p, (p + 1.0) / gamma, false, MatchStatus::Matched)
            }
        }
        RateFamily::Ntk => {
            let p = if gamma < 4.0 {
                (gamma / 2.0).floor()
            } else {
                2.0 * (gamma / 4.0).floor()
            };
            // base b of the current period: 0 below 2, 2 on [2, 4), 4j above
            let base = if gamma < 2.0 {
                0.0
            } else if gamma < 4.0 {
                2.0
            } else {
                4.0 * (gamma / 4.0).floor()
            };
            let width = if gamma < 4.0 { 1.0 } else { 2.0 };
            let at_base = base > 0.0 && is_integer(gamma, base) && (base == 2.0 || base % 4.0 == 0.0);
            if at_base {
                (p, 0.5, false, MatchStatus::Matched)
            } else if gamma <= base + width {
                (p, (gamma - p) / gamma, true, MatchStatus::MatchedUpToEpsilon)
            } else {
                let bonus = if p >= 2.0 { 1.0 } else { 0.0 };
                (p, (p + 1.0 + bonus) / gamma, false, MatchStatus::Matched)
            }
        }
        RateFamily::Interpolation => {
            if gamma <= 1.0 {
                return Err(Error::OutOfRange(format!(
                    "the interpolation rate needs gamma > 1, got {gamma}"
                )));
            }
            let l = gamma.floor();
            let eta = ((l + 1.0 - gamma) / gamma).min((gamma - l) / gamma);
            (l, eta, false, MatchStatus::UpperOnly)
        }
    };
    Ok(RatePoint {
        gamma,
        family,
        p: p as u32,
        n_exponent,
        d_exponent: gamma * n_exponent,
        log_factor,
        match_status: status,
    })
}

/// [`rate_curve`] over a grid; invalid points are collected separately.
#[derive(Debug, Clone, Default)]
pub struct RateTable {
    pub points: Vec<RatePoint>,
    pub errors: Vec<(f64, RateFamily, String)>,
}

pub fn rate_table(gammas: &[f64], families: &[RateFamily]) -> RateTable {
    let mut table = RateTable::default();
    for &family in families {
        for &gamma in gammas {
            match rate_curve(gamma, family) {
                Ok(p) => table.points.push(p),
                Err(e) => table.errors.push((gamma, family, e.to_string())),
            }
        }
    }
    table
}

/// γ_min, γ_min + step, … ≤ γ_max, built from integer multiples of the step
/// so grid points such as 2.0 are hit exactly.
pub fn gamma_grid(gamma_min: f64, gamma_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(gamma_max >= gamma_min) {
        return Err(Error::invalid("need step > 0 and gamma_max >= gamma_min"));
    }
    let count = ((gamma_max - gamma_min) / step + 1e-9).floor() as usize;
    // rounding to 12 decimals keeps values like 0.1 + 19·0.01 on the decimal grid
    Ok((0..=count)
        .map(|i| ((gamma_min + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Maximal runs of consecutive points with equal d_exponent.
pub fn plateaus(points: &[RatePoint]) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=points.len() {
        let same = i < points.len() && (points[i].d_exponent - points[start].d_exponent).abs() <= 1e-12;
        if !same {
            if i - start >= 2 {
                out.push((points[start].gamma, points[i - 1].gamma, points[start].d_exponent));
            }
            start = i;
        }
    }
    out
}

/// Where the curve jumps or bends on a grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContinuityAudit {
    /// Grid gaps where the value changes by more than the local trend allows.
    pub jumps: Vec<(f64, f64)>,
    /// Grid points where the slope changes abruptly.
    pub kinks: Vec<f64>,
}

/// Scans consecutive points of one family. A jump is a step much larger
/// than both neighbouring steps; a kink is a slope change much larger than
/// the smooth second difference.
pub fn audit_continuity(points: &[RatePoint]) -> ContinuityAudit {
    let mut audit = ContinuityAudit::default();
    let y: Vec<f64> = points.iter().map(|p| p.n_exponent).collect();
    let x: Vec<f64> = points.iter().map(|p| p.gamma).collect();
    if y.len() < 3 {
        return audit;
    }
    let h = x[1] - x[0];
    for i in 1..y.len() - 1 {
        let left = y[i] - y[i - 1];
        let right = y[i + 1] - y[i];
        let step = left.abs().max(right.abs());
        if step > 0.05 {
            let (a, b) = if left.abs() > right.abs() { (x[i - 1], x[i]) } else { (x[i], x[i + 1]) };
            if audit.jumps.last() != Some(&(a, b)) {
                audit.jumps.push((a, b));
            }
            continue;
        }
        // smooth pieces have |second difference| = O(h²)
        if (right - left).abs() > 10.0 * h * h {
            audit.kinks.push(x[i]);
        }
    }
    audit
}
