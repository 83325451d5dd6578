use faer::Side;
use statrs::function::gamma::ln_gamma;

use kernel_flow::complexity::{rademacher_z, solve_mendelson, solve_mendelson_in};
use kernel_flow::entropy::{covering_radius, metric_entropy};
use kernel_flow::kernels::{gram, KernelProfile};
use kernel_flow::rates::{audit_continuity, gamma_grid, rate_table, RateFamily};
use kernel_flow::regression::{eigendecompose, fit_flow, FlowTime};
use kernel_flow::spectrum::{build_spectrum, eigenvalues_quadrature, ntk_eigen_closed, DEFAULT_TAIL_TOL};
use kernel_flow::sphere::{sample_sphere, SphereSample};

fn profiles() -> Vec<KernelProfile> {
    vec![
        KernelProfile::Ntk2,
        KernelProfile::RbfSphere,
        KernelProfile::taylor(vec![1.0, 0.5, 0.3, 0.2, 0.1]).unwrap(),
    ]
}

fn reflect(x: &[f64], v: &[f64]) -> Vec<f64> {
    let s: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
    x.iter().zip(v).map(|(a, b)| a - 2.0 * s * b).collect()
}

/// μ_k of Φ(t) = Σ a_j t^j on 𝕊^d term by term:
/// μ_k(t^{k+2s}) = Γ((d+1)/2)/(√π 2^k) · (k+2s)!/(2s)! · Γ(s+½)/Γ(s+k+(d+1)/2).
fn series_mu(coeffs: &[f64], d: usize, k: usize) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    let mut total = 0.0;
    let mut s = 0;
    while k + 2 * s < coeffs.len() {
        let j = (k + 2 * s) as f64;
        let ln = ln_gamma(h) - 0.5 * std::f64::consts::PI.ln() - k as f64 * 2f64.ln() + ln_gamma(j + 1.0)
            - ln_gamma(2.0 * s as f64 + 1.0)
            + ln_gamma(s as f64 + 0.5)
            - ln_gamma(s as f64 + k as f64 + h);
        total += coeffs[k + 2 * s] * ln.exp();
        s += 1;
    }
    total
}

#[test]
fn gram_is_rotation_invariant() {
    let x = sample_sphere(6, 25, 31).unwrap();
    let v1 = sample_sphere(6, 1, 32).unwrap();
    let v2 = sample_sphere(6, 1, 33).unwrap();
    // two reflections make a rotation
    let y = x.transformed(|p| reflect(&reflect(p, v1.point(0)), v2.point(0))).unwrap();
    for profile in profiles() {
        let a = gram(&profile, &x, false).entries;
        let b = gram(&profile, &y, false).entries;
        let diff = (0..25)
            .flat_map(|i| (0..25).map(move |j| (i, j)))
            .map(|(i, j)| (a[(i, j)] - b[(i, j)]).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-12, "{}: {diff:e}", profile.label());
    }
}

#[test]
fn gram_is_positive_semidefinite() {
    for draw in 0..50u64 {
        let d = 2 + (draw as usize % 9);
        let x = sample_sphere(d, 40, 1000 + draw).unwrap();
        for profile in profiles() {
            let g = gram(&profile, &x, false);
            let eig = g.entries.self_adjoint_eigenvalues(Side::Lower).unwrap();
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8 * g.trace(), "{} draw {draw}: {min:e}", profile.label());
        }
    }
}

#[test]
fn taylor_eigenvalues_match_the_coefficient_series() {
    let coeffs = vec![1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005];
    let profile = KernelProfile::taylor(coeffs.clone()).unwrap();
    for d in [3, 7, 20] {
        let mu = eigenvalues_quadrature(&profile, d, 6).unwrap();
        for (k, m) in mu.iter().enumerate() {
            let want = series_mu(&coeffs, d, k);
            assert!((m - want).abs() <= 1e-10 * want, "d={d} k={k}: {m} vs {want}");
        }
        for k in 0..=4 {
            let ratio = mu[k + 2] / mu[k];
            let want = series_mu(&coeffs, d, k + 2) / series_mu(&coeffs, d, k);
            assert!((ratio - want).abs() <= 1e-6 * want);
        }
    }
    // independent high-precision values on 𝕊^7
    let mu = eigenvalues_quadrature(&profile, 7, 4).unwrap();
    assert!((mu[2] - 0.00890345982142857).abs() < 1e-14);
    assert!((mu[4] - 0.000218563988095238).abs() < 1e-15);
}

// d²·μ_{p+2}/μ_p for the degree-8 all-ones kernel, p = 0..3, from the
// coefficient series at high precision
const SECOND_RATIO_D50: [f64; 4] = [2.0398527494705734, 5.844634688727834, 11.15791472651063, 16.563113542163222];
const SECOND_RATIO_D100: [f64; 4] = [2.020127108316027, 5.934663317014317, 11.621523070706788, 18.497265347475334];

#[test]
fn taylor_levels_decay_like_powers_of_d() {
    let profile = KernelProfile::taylor_all_ones(8);
    for (d, second) in [(50usize, SECOND_RATIO_D50), (100, SECOND_RATIO_D100)] {
        let mu = eigenvalues_quadrature(&profile, d, 8).unwrap();
        let df = d as f64;
        for p in 0..=3 {
            for j in p + 1..=8 {
                assert!(mu[j] / mu[p] <= 10.0 / df, "d={d} p={p} j={j}");
            }
            let r2 = df * df * mu[p + 2] / mu[p];
            assert!((r2 - second[p]).abs() <= 1e-8 * second[p], "d={d} p={p}: {r2}");
            // the leading term is (p+1)(p+2)/d², under 10/d² only for p ≤ 1
            assert!((r2 / ((p + 1) * (p + 2)) as f64 - 1.0).abs() < 0.25);
            if p <= 1 {
                assert!(r2 <= 10.0);
            }
        }
    }
    for k in 0..=3 {
        let scaled: Vec<f64> = [20usize, 40, 80]
            .iter()
            .map(|&d| eigenvalues_quadrature(&profile, d, k).unwrap()[k] * (d as f64).powi(k as i32))
            .collect();
        let hi = scaled.iter().cloned().fold(0.0, f64::max);
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo <= 10.0, "k={k}: {scaled:?}");
    }
}

#[test]
fn ntk_odd_levels_vanish_through_degree_nine() {
    for d in [4, 12] {
        let mu = eigenvalues_quadrature(&KernelProfile::Ntk2, d, 9).unwrap();
        for k in [3, 5, 7, 9] {
            assert!(mu[k].abs() <= 1e-12 * mu[0], "d={d} k={k}");
            assert_eq!(ntk_eigen_closed(d, k).unwrap(), 0.0);
        }
        assert!(mu[1] > 0.0 && mu[2] > 0.0 && mu[8] > 0.0);
    }
}

#[test]
fn mendelson_root_ignores_the_starting_bracket() {
    let eigs = build_spectrum(&KernelProfile::RbfSphere, 8, DEFAULT_TAIL_TOL).unwrap().weighted();
    let base = solve_mendelson(&eigs, 500, 0.5).unwrap();
    let e = base.epsilon;
    for bracket in [(e / 10.0, e * 10.0), (e * 2.0, e * 20.0), (e / 50.0, e / 5.0), (1e-9, 1e3)] {
        let s = solve_mendelson_in(&eigs, 500, 0.5, Some(bracket)).unwrap();
        assert!((s.epsilon - e).abs() <= 1e-12 * e, "{bracket:?}: {} vs {e}", s.epsilon);
    }
}

#[test]
fn localized_complexity_grows_with_radius() {
    let x = sample_sphere(5, 30, 8).unwrap();
    let eigen = eigendecompose(&gram(&KernelProfile::Ntk2, &x, true)).unwrap();
    let w: Vec<f64> = (0..30).map(|i| if (i * 7) % 3 == 0 { 1.0 } else { -1.0 }).collect();
    let mut prev = 0.0;
    for i in 0..60 {
        let t = 1e-3 * 1.15f64.powi(i);
        let z = rademacher_z(&eigen, &w, t).unwrap();
        assert!(z >= prev - 1e-12, "t={t}: {z} < {prev}");
        prev = z;
    }
}

#[test]
fn inner_curve_bends_only_at_integers() {
    let grid = gamma_grid(0.1, 8.0, 0.01).unwrap();
    let points = rate_table(&grid, &[RateFamily::Inner]).points;
    let audit = audit_continuity(&points);
    assert!(audit.jumps.is_empty(), "{:?}", audit.jumps);
    assert!(!audit.kinks.is_empty());
    for g in &audit.kinks {
        assert!((g - g.round()).abs() < 1e-9, "kink at {g}");
    }
    for k in 1..=7 {
        assert!(audit.kinks.iter().any(|g| (g - k as f64).abs() < 1e-9), "no kink at {k}");
    }
}

#[test]
fn entropy_agrees_with_the_expanded_sum() {
    let spec = build_spectrum(&KernelProfile::RbfSphere, 5, DEFAULT_TAIL_TOL).unwrap();
    let flat = spec.expanded(5000);
    let eigs = spec.weighted();
    for eps in [0.3, 0.1, 0.03, 0.01] {
        let u: f64 = eps * eps;
        assert!(*flat.last().unwrap() < u);
        let brute: f64 = 0.5 * flat.iter().filter(|&&l| l > u).map(|l| (l / u).ln()).sum::<f64>();
        let fast = metric_entropy(&eigs, eps).unwrap();
        assert!((fast - brute).abs() <= 1e-10 * brute.max(1.0), "eps={eps}: {fast} vs {brute}");
    }
}

#[test]
fn conservative_covering_radius_is_larger() {
    for (d, n) in [(5usize, 100usize), (10, 1000), (20, 400)] {
        let eigs = build_spectrum(&KernelProfile::Ntk2, d, DEFAULT_TAIL_TOL).unwrap().weighted();
        let fx = covering_radius(&eigs, n, 1.0).unwrap();
        assert!(fx.eps_bar_conservative >= fx.eps_bar, "d={d} n={n}");
        assert!(fx.residual <= 1e-8 * fx.entropy_at_root.max(1.0));
    }
}

fn flow_setup() -> (SphereSample, Vec<f64>) {
    let x = sample_sphere(4, 35, 77).unwrap();
    let y = (0..35).map(|i| (i as f64 * 0.37).cos() + 0.2 * (i as f64).sin()).collect();
    (x, y)
}

#[test]
fn training_residual_decreases_along_the_flow() {
    let (x, y) = flow_setup();
    let eigen = eigendecompose(&gram(&KernelProfile::Ntk2, &x, true)).unwrap();
    let mut prev = f64::INFINITY;
    for i in 0..40 {
        let t = 0.05 * 1.4f64.powi(i);
        let fit = fit_flow(&eigen, &y, FlowTime::Finite(t)).unwrap();
        let r: f64 = fit.train_predictions.iter().zip(&y).map(|(f, y)| (f - y).powi(2)).sum();
        assert!(r <= prev + 1e-12, "t={t}");
        prev = r;
    }
}

#[test]
fn dual_weights_reproduce_the_spectral_fit() {
    let (x, y) = flow_setup();
    let profile = KernelProfile::Ntk2;
    let eigen = eigendecompose(&gram(&profile, &x, true)).unwrap();
    let k = gram(&profile, &x, false).entries;
    for t in [0.5, 5.0, 80.0] {
        let fit = fit_flow(&eigen, &y, FlowTime::Finite(t)).unwrap();
        for i in 0..35 {
            let via_dual: f64 = (0..35).map(|j| k[(i, j)] * fit.dual_weights[j]).sum();
            assert!((via_dual - fit.train_predictions[i]).abs() <= 1e-10, "t={t} i={i}");
        }
    }
}
