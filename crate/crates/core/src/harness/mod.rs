//! Monte Carlo rate experiments and the empirical eigen-gap check.
//!
//! An experiment samples (n, d = n^{1/γ}) problems, fits the gradient flow
//! for a grid of stopping-time constants C and the interpolant, measures the
//! excess risk on fresh test points and fits log risk = r log n + b.

pub mod emit;

use std::path::Path;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::empirical_mendelson;
use crate::error::{Error, Result};
use crate::kernels::{cross_kernel, gram, KernelProfile};
use crate::rates::{rate_curve, RateFamily};
use crate::regression::{apply_dual, eigendecompose, fit_flow, mean_squared_difference, FlowTime, GramEigen};
use crate::seed::derive_seed;
use crate::spectrum::{eigenvalues_quadrature, multiplicity};
use crate::sphere::{generate_dataset, make_target, sample_sphere, SphereSample, TargetFunction};

/// Stopping-time constants swept by default.
pub const DEFAULT_C_GRID: [f64; 7] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
/// Test points are generated in blocks of this many rows.
const TEST_BLOCK: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DRule {
    /// d = round(n^{1/γ}).
    #[default]
    Round,
    /// d = ⌈n^{1/γ}⌉.
    Ceil,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingMode {
    /// t = C / ε̂_n², with ε̂_n the empirical Mendelson radius.
    Theory,
    /// t = C √n.
    #[default]
    FixedExponent,
}

fn default_anchors() -> usize {
    3
}
fn default_noise() -> f64 {
    1.0
}
fn default_test_size() -> usize {
    1000
}
fn default_trials() -> usize {
    20
}
fn default_c_grid() -> Vec<f64> {
    DEFAULT_C_GRID.to_vec()
}
fn default_kernel() -> KernelProfile {
    KernelProfile::Ntk2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub gamma: f64,
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub d_rule: DRule,
    #[serde(default = "default_kernel")]
    pub kernel: KernelProfile,
    #[serde(default = "default_anchors")]
    pub n_anchors: usize,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default)]
    pub stopping_mode: StoppingMode,
    #[serde(default)]
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn new(gamma: f64, n_grid: Vec<usize>) -> Self {
        ExperimentConfig {
            gamma,
            n_grid,
            d_rule: DRule::Round,
            kernel: default_kernel(),
            n_anchors: default_anchors(),
            noise_sd: default_noise(),
            test_size: default_test_size(),
            trials: default_trials(),
            c_grid: default_c_grid(),
            stopping_mode: StoppingMode::FixedExponent,
            master_seed: 0,
        }
    }

    /// The sphere dimension used at sample size n.
    pub fn d_for(&self, n: usize) -> usize {
        let x = (n as f64).powf(1.0 / self.gamma);
        match self.d_rule {
            DRule::Round => x.round() as usize,
            // guard against powf landing a hair above an exact integer
            DRule::Ceil => (x - 1e-9).ceil() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.n_grid.len() < 2 {
            return Err(Error::invalid("n_grid needs at least two sample sizes to fit a rate"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            return Err(Error::invalid("n_grid must be positive and strictly increasing"));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| self.d_for(n) < 2) {
            return Err(Error::invalid(format!(
                "n = {n} gives d = {} under the d rule; d must be >= 2",
                self.d_for(n)
            )));
        }
        if self.n_anchors == 0 || self.trials == 0 || self.test_size == 0 {
            return Err(Error::invalid("n_anchors, trials and test_size must be >= 1"));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be > 0"));
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("c_grid must be a non-empty list of positive constants"));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::Parse(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    fn stopping_time(&self, c: f64, n: usize, eigen: &GramEigen) -> Result<f64> {
        Ok(match self.stopping_mode {
            StoppingMode::FixedExponent => c * (n as f64).sqrt(),
            StoppingMode::Theory => c * empirical_mendelson(eigen, self.noise_sd)?.stopping_time,
        })
    }
}

/// One (n, trial, C) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub n: usize,
    pub d: usize,
    pub trial: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub t_used: f64,
    pub risk_regression: f64,
    pub risk_interpolation: f64,
    /// Empty on success; otherwise the reason the trial failed.
    pub error: String,
}

impl RiskRow {
    pub fn ok(&self) -> bool {
        self.error.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Regression,
    Interpolation,
}

/// log risk = r log n + b for one method (and one C for regression).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub method: Method,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub r: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub config: ExperimentConfig,
    pub rows: Vec<RiskRow>,
    pub fits: Vec<RateFit>,
    pub best_c: f64,
    pub r_regression: f64,
    pub r_interpolation: f64,
    /// Exponent of the inner-family rate curve at the configured γ.
    pub theoretical_exponent: f64,
}

impl RiskTable {
    /// Mean regression risk per n at constant `c` over successful trials.
    pub fn mean_regression(&self, c: f64) -> Vec<(usize, f64)> {
        self.mean_by_n(|r| r.c == c, |r| r.risk_regression)
    }

    /// Mean interpolation risk per n (one value per trial).
    pub fn mean_interpolation(&self) -> Vec<(usize, f64)> {
        let first_c = self.config.c_grid[0];
        self.mean_by_n(|r| r.c == first_c, |r| r.risk_interpolation)
    }

    fn mean_by_n(&self, keep: impl Fn(&RiskRow) -> bool, value: impl Fn(&RiskRow) -> f64) -> Vec<(usize, f64)> {
        self.config
            .n_grid
            .iter()
            .filter_map(|&n| {
                let vals: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.n == n && r.ok() && keep(r))
                    .map(&value)
                    .collect();
                (!vals.is_empty()).then(|| (n, vals.iter().sum::<f64>() / vals.len() as f64))
            })
            .collect()
    }

    /// Recomputes fits and best C from the rows.
    pub fn refit(config: ExperimentConfig, rows: Vec<RiskRow>) -> Result<RiskTable> {
        let mut table = RiskTable {
            theoretical_exponent: rate_curve(config.gamma, RateFamily::Inner)?.n_exponent,
            config,
            rows,
            fits: Vec::new(),
            best_c: f64::NAN,
            r_regression: f64::NAN,
            r_interpolation: f64::NAN,
        };
        let n_max = *table.config.n_grid.last().expect("validated grid");
        let mut best: Option<(f64, f64)> = None;
        for &c in &table.config.c_grid {
            let means = table.mean_regression(c);
            let (r, b) = fit_rate(&means)?;
            table.fits.push(RateFit {
                method: Method::Regression,
                c: Some(c),
                r,
                b,
            });
            if let Some(&(_, risk)) = means.iter().find(|(n, _)| *n == n_max) {
                if best.is_none_or(|(_, br)| risk < br) {
                    best = Some((c, risk));
                }
            }
        }
        let (r, b) = fit_rate(&table.mean_interpolation())?;
        table.fits.push(RateFit {
            method: Method::Interpolation,
            c: None,
            r,
            b,
        });
        let best_c = best
            .ok_or_else(|| Error::numeric("no successful trial at the largest sample size"))?
            .0;
        table.best_c = best_c;
        table.r_regression = table
            .fits
            .iter()
            .find(|f| f.c == Some(best_c))
            .map(|f| f.r)
            .expect("fit exists for every C");
        table.r_interpolation = r;
        Ok(table)
    }
}

/// Ordinary least squares of log risk on log n.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "a rate fit needs at least two points, got {}",
            points.len()
        )));
    }
    if let Some((n, r)) = points.iter().find(|(n, r)| !(*r > 0.0 && r.is_finite()) || *n == 0) {
        return Err(Error::invalid(format!("cannot take logs of the point (n = {n}, risk = {r})")));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, r)| r.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("a rate fit needs at least two distinct sample sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let r = sxy / sxx;
    Ok((r, my - r * mx))
}

/// The test points of one trial, generated in fixed-size blocks so that
/// very high dimensions never hold the whole test set at once.
fn evaluate_on_test(
    cfg: &ExperimentConfig,
    train: &SphereSample,
    target: &TargetFunction,
    seed: u64,
) -> Result<(Mat<f64>, Vec<f64>)> {
    let n = train.len();
    let mut k = Mat::<f64>::zeros(cfg.test_size, n);
    let mut truth = Vec::with_capacity(cfg.test_size);
    let mut start = 0;
    let mut block = 0u64;
    while start < cfg.test_size {
        let rows = TEST_BLOCK.min(cfg.test_size - start);
        let test = sample_sphere(train.d(), rows, derive_seed(seed, &[block]))?;
        let kb = cross_kernel(&cfg.kernel, &test, train)?;
        k.as_mut().subrows_mut(start, rows).copy_from(&kb);
        truth.extend(target.eval_sample(&test)?);
        start += rows;
        block += 1;
    }
    Ok((k, truth))
}

/// All rows of one (n, trial) cell.
fn run_cell(cfg: &ExperimentConfig, n: usize, trial: usize) -> Result<Vec<RiskRow>> {
    let d = cfg.d_for(n);
    let seed = derive_seed(cfg.master_seed, &[n as u64, trial as u64]);
    let train = sample_sphere(d, n, derive_seed(seed, &[0]))?;
    let target = make_target(cfg.kernel.clone(), d, cfg.n_anchors, derive_seed(seed, &[1]))?;
    let data = generate_dataset(&target, train, cfg.noise_sd, derive_seed(seed, &[2]))?;
    let eigen = eigendecompose(&gram(&cfg.kernel, &data.sample, true))?;
    let (k_test, truth) = evaluate_on_test(cfg, &data.sample, &target, derive_seed(seed, &[3]))?;

    let interp = fit_flow(&eigen, &data.responses, FlowTime::Infinite)?;
    let risk_interpolation = mean_squared_difference(&apply_dual(k_test.as_ref(), &interp.dual_weights), &truth);
    cfg.c_grid
        .iter()
        .map(|&c| {
            let t = cfg.stopping_time(c, n, &eigen)?;
            let fit = fit_flow(&eigen, &data.responses, FlowTime::Finite(t))?;
            let pred = apply_dual(k_test.as_ref(), &fit.dual_weights);
            Ok(RiskRow {
                n,
                d,
                trial,
                c,
                t_used: t,
                risk_regression: mean_squared_difference(&pred, &truth),
                risk_interpolation,
                error: String::new(),
            })
        })
        .collect()
}

/// Runs every (n, trial) cell. Data depend only on (master_seed, n, trial),
/// so all C values see the same sample. Cells run in parallel and are
/// merged in grid order, so the table does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RiskTable> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let results: Vec<(usize, usize, Result<Vec<RiskRow>>)> = cells
        .par_iter()
        .map(|&(n, trial)| (n, trial, run_cell(cfg, n, trial)))
        .collect();
    let mut rows = Vec::with_capacity(cells.len() * cfg.c_grid.len());
    let mut failed = 0;
    for (n, trial, res) in results {
        match res {
            Ok(r) => rows.extend(r),
            Err(e) => {
                failed += 1;
                let d = cfg.d_for(n);
                rows.extend(cfg.c_grid.iter().map(|&c| RiskRow {
                    n,
                    d,
                    trial,
                    c,
                    t_used: f64::NAN,
                    risk_regression: f64::NAN,
                    risk_interpolation: f64::NAN,
                    error: e.to_string(),
                }));
            }
        }
    }
    if 2 * failed > cells.len() {
        return Err(Error::numeric(format!(
            "{failed} of {} trials failed; first error: {}",
            cells.len(),
            rows.iter().find(|r| !r.ok()).map(|r| r.error.as_str()).unwrap_or("")
        )));
    }
    RiskTable::refit(cfg.clone(), rows)
}

/// Outcome of the empirical eigen-gap chain for one seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapSeed {
    pub seed: u64,
    /// λ̂_{N(p)} (1-based).
    pub lambda_np: f64,
    /// λ̂_{N(p)+1}.
    pub lambda_np1: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub kernel: String,
    pub gamma: f64,
    pub d: usize,
    pub n: usize,
    pub p: usize,
    /// N(p) = Σ_{k≤p} N(d, k).
    pub n_p: usize,
    pub mu_p: f64,
    pub mu_p1: f64,
    /// 4 μ_{p+1} < μ_p / 4.
    pub analytic_ok: bool,
    pub pass_fraction: f64,
    pub per_seed: Vec<GapSeed>,
}

/// Checks λ̂_{N(p)+1} < 4μ_{p+1} < μ_p/4 < λ̂_{N(p)} on samples of size
/// n = round(d^γ).
pub fn eigen_gap_check(profile: &KernelProfile, gamma: f64, d: usize, p: usize, seeds: &[u64]) -> Result<GapReport> {
    if !(gamma > 0.0) || d < 2 {
        return Err(Error::invalid("need gamma > 0 and d >= 2"));
    }
    if p != (gamma / 2.0).floor() as usize || (gamma / 2.0).fract() == 0.0 {
        return Err(Error::Infeasible(format!(
            "p = {p} does not match gamma = {gamma}: expected p = floor(gamma/2) with gamma not an even integer"
        )));
    }
    let n = (d as f64).powf(gamma).round() as usize;
    if n > 5000 {
        return Err(Error::Infeasible(format!("n = round(d^gamma) = {n} exceeds the 5000-point budget")));
    }
    let n_p: usize = (0..=p)
        .map(|k| {
            num_traits::ToPrimitive::to_usize(&multiplicity(d, k)).unwrap_or(usize::MAX)
        })
        .fold(0usize, |a, b| a.saturating_add(b));
    if n_p >= n {
        return Err(Error::Infeasible(format!("N(p) = {n_p} is not below n = {n}")));
    }
    let mus = eigenvalues_quadrature(profile, d, p + 1)?;
    let (mu_p, mu_p1) = (mus[p], mus[p + 1]);
    let analytic_ok = 4.0 * mu_p1 < mu_p / 4.0;
    let per_seed = seeds
        .iter()
        .map(|&seed| {
            let sample = sample_sphere(d, n, derive_seed(seed, &[d as u64, n as u64]))?;
            let lambdas = crate::regression::eigendecompose(&gram(profile, &sample, true))?.lambdas().to_vec();
            let lambda_np = lambdas[n_p - 1];
            let lambda_np1 = lambdas[n_p];
            Ok(GapSeed {
                seed,
                lambda_np,
                lambda_np1,
                pass: analytic_ok && lambda_np1 < 4.0 * mu_p1 && mu_p / 4.0 < lambda_np,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = per_seed.iter().filter(|s| s.pass).count();
    Ok(GapReport {
        kernel: profile.label(),
        gamma,
        d,
        n,
        p,
        n_p,
        mu_p,
        mu_p1,
        analytic_ok,
        pass_fraction: if seeds.is_empty() { 0.0 } else { passed as f64 / seeds.len() as f64 },
        per_seed,
    })
}
