//! Gradient-flow kernel regression along the flow: excess risk, bias and
//! variance as t grows, with the Mendelson stopping time marked.

use kernel_flow::complexity::empirical_mendelson;
use kernel_flow::kernels::{gram, KernelProfile};
use kernel_flow::regression::{diagnostics, eigendecompose, excess_risk, fit_flow, predict, FlowTime};
use kernel_flow::sphere::{generate_dataset, make_target, sample_sphere};

fn main() -> kernel_flow::Result<()> {
    let (d, n) = (20, 400);
    let profile = KernelProfile::Ntk2;
    let target = make_target(profile.clone(), d, 3, 1)?;
    let data = generate_dataset(&target, sample_sphere(d, n, 2)?, 1.0, 3)?;
    let test = sample_sphere(d, 1000, 4)?;
    let eigen = eigendecompose(&gram(&profile, &data.sample, true))?;
    let t_hat = empirical_mendelson(&eigen, 1.0)?.stopping_time;
    println!("stopping time {t_hat:.2}");

    let mut times: Vec<FlowTime> = [0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1000.0].map(FlowTime::Finite).to_vec();
    times.push(FlowTime::Finite(t_hat));
    times.push(FlowTime::Infinite);
    println!("{:>10} {:>10} {:>10} {:>10}", "t", "risk", "bias^2", "variance");
    for t in times {
        let fit = fit_flow(&eigen, &data.responses, t)?;
        let risk = excess_risk(&predict(&fit, &profile, &data.sample, &test)?, &target, &test)?;
        let diag = diagnostics(&eigen, &data.responses, &data.f_star, t)?;
        println!("{:>10} {risk:>10.4} {:>10.4} {:>10.4}", t.to_string(), diag.bias_sq, diag.variance);
    }
    Ok(())
}
