use faer::Mat;

use kernel_flow::kernels::{gram, KernelProfile};
use kernel_flow::regression::{
    diagnostics, eigendecompose, eigendecompose_matrix, excess_risk, fit_flow, flow_filter,
    predict, FlowTime,
};
use kernel_flow::seed::derive_seed;
use kernel_flow::sphere::{generate_dataset, make_target, sample_sphere, SphereSample};

#[test]
fn identity_and_two_by_two() {
    let n = 5;
    let eye = Mat::<f64>::from_fn(n, n, |i, j| if i == j { 1.0 / n as f64 } else { 0.0 });
    let e = eigendecompose_matrix(eye.as_ref(), "id").unwrap();
    assert!(e.lambdas().iter().all(|&l| (l - 0.2).abs() < 1e-15));

    let (a, b) = (0.7, 0.2);
    let m = Mat::<f64>::from_fn(2, 2, |i, j| if i == j { a } else { b });
    let e = eigendecompose_matrix(m.as_ref(), "2x2").unwrap();
    assert!((e.lambdas()[0] - (a + b)).abs() < 1e-14);
    assert!((e.lambdas()[1] - (a - b)).abs() < 1e-14);
    let u = e.u();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((u[(0, 0)].abs() - h).abs() < 1e-14 && (u[(1, 0)] - u[(0, 0)]).abs() < 1e-14);
    assert!((u[(1, 1)] + u[(0, 1)]).abs() < 1e-14);
}

#[test]
fn reconstruction_on_random_instances() {
    for inst in 0..20u64 {
        let x = sample_sphere(5, 40, derive_seed(1, &[inst])).unwrap();
        let g = gram(&KernelProfile::Ntk2, &x, true);
        let e = eigendecompose(&g).unwrap();
        let r = e.reconstruct();
        let mut worst: f64 = 0.0;
        for i in 0..40 {
            for j in 0..40 {
                worst = worst.max((r[(i, j)] - g.entries[(i, j)]).abs());
            }
        }
        assert!(worst <= 1e-8 * e.lambdas()[0]);
        assert!(e.lambdas().windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn filter_series_branch() {
    let t = 3.0;
    let lam = 1e-10;
    let series = t * (1.0 - t * lam / 2.0);
    assert!(((flow_filter(lam, t) - series) / series).abs() < 1e-6);
    assert_eq!(flow_filter(0.0, t), t);
}

#[test]
fn one_point_flow_is_scalar_ode() {
    let x = sample_sphere(3, 1, 0).unwrap();
    let e = eigendecompose(&gram(&KernelProfile::Ntk2, &x, true)).unwrap();
    for t in [0.0, 0.3, 2.0, 9.0] {
        let fit = fit_flow(&e, &[2.5], FlowTime::Finite(t)).unwrap();
        let want = (1.0 - (-t).exp()) * 2.5;
        assert!((fit.train_predictions[0] - want).abs() < 1e-14);
    }
}

#[test]
fn predictions_on_training_points_and_at_zero_time() {
    let profile = KernelProfile::Ntk2;
    let target = make_target(profile.clone(), 6, 3, 5).unwrap();
    let data = generate_dataset(&target, sample_sphere(6, 80, 6).unwrap(), 1.0, 7).unwrap();
    let e = eigendecompose(&gram(&profile, &data.sample, true)).unwrap();
    let fit = fit_flow(&e, &data.responses, FlowTime::Finite(4.0)).unwrap();
    let p = predict(&fit, &profile, &data.sample, &data.sample).unwrap();
    for (a, b) in p.iter().zip(&fit.train_predictions) {
        assert!((a - b).abs() < 1e-10);
    }
    let zero = fit_flow(&e, &data.responses, FlowTime::Finite(0.0)).unwrap();
    let q = sample_sphere(6, 25, 8).unwrap();
    assert!(predict(&zero, &profile, &data.sample, &q).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn interpolation_fits_training_data() {
    let profile = KernelProfile::RbfSphere;
    let target = make_target(profile.clone(), 4, 3, 10).unwrap();
    let data = generate_dataset(&target, sample_sphere(4, 60, 11).unwrap(), 0.5, 12).unwrap();
    let e = eigendecompose(&gram(&profile, &data.sample, true)).unwrap();
    assert!(e.lambdas()[59] >= 1e-8 * e.lambdas()[0]);
    let fit = fit_flow(&e, &data.responses, FlowTime::Infinite).unwrap();
    for (p, y) in fit.train_predictions.iter().zip(&data.responses) {
        assert!((p - y).abs() <= 1e-6 * y.abs().max(1.0));
    }
}

#[test]
fn interpolation_recovers_the_target_at_its_anchor() {
    let profile = KernelProfile::Ntk2;
    let target = make_target(profile.clone(), 5, 1, 20).unwrap();
    let data = generate_dataset(&target, sample_sphere(5, 200, 21).unwrap(), 0.0, 22).unwrap();
    let e = eigendecompose(&gram(&profile, &data.sample, true)).unwrap();
    let fit = fit_flow(&e, &data.responses, FlowTime::Infinite).unwrap();
    let anchor = SphereSample::from_points(5, &[target.anchors().point(0).to_vec()]).unwrap();
    let p = predict(&fit, &profile, &data.sample, &anchor).unwrap()[0];
    assert!((p - 1.0).abs() <= 0.1, "prediction {p}");
}

#[test]
fn bias_and_variance_limits() {
    let profile = KernelProfile::Ntk2;
    let target = make_target(profile.clone(), 5, 3, 30).unwrap().normalized();
    let data = generate_dataset(&target, sample_sphere(5, 70, 31).unwrap(), 1.0, 32).unwrap();
    let e = eigendecompose(&gram(&profile, &data.sample, true)).unwrap();

    let d0 = diagnostics(&e, &data.responses, &data.f_star, FlowTime::Finite(0.0)).unwrap();
    let f2: f64 = data.f_star.iter().map(|v| v * v).sum();
    assert_eq!(d0.variance, 0.0);
    assert!((d0.bias_sq - 2.0 * f2 / 70.0).abs() < 1e-12);

    let late = diagnostics(&e, &data.responses, &data.f_star, FlowTime::Finite(1e9)).unwrap();
    assert!(late.bias_sq < 1e-12);

    for t in [1.0, 10.0, 100.0] {
        let d = diagnostics(&e, &data.responses, &data.f_star, FlowTime::Finite(t)).unwrap();
        assert!(d.bias_sq * t <= 1.01, "t={t}");
    }
}

#[test]
fn excess_risk_reference_points() {
    let target = make_target(KernelProfile::Ntk2, 4, 3, 40).unwrap();
    let test = sample_sphere(4, 1000, 41).unwrap();
    let truth = target.eval_sample(&test).unwrap();
    assert_eq!(excess_risk(&truth, &target, &test).unwrap(), 0.0);
    let zero = vec![0.0; 1000];
    let l2: f64 = truth.iter().map(|v| v * v).sum::<f64>() / 1000.0;
    assert!((excess_risk(&zero, &target, &test).unwrap() - l2).abs() < 1e-12);
    assert!(excess_risk(&zero[..10], &target, &test).is_err());
}

#[test]
fn flow_time_parsing() {
    assert_eq!("inf".parse::<FlowTime>().unwrap(), FlowTime::Infinite);
    assert_eq!("2.5".parse::<FlowTime>().unwrap(), FlowTime::Finite(2.5));
    assert!("-1".parse::<FlowTime>().is_err());
    assert!("soon".parse::<FlowTime>().is_err());
}
