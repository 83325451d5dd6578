//! Population and empirical Mendelson complexities and the early-stopping
//! time they prescribe. While ε² stays above the top eigenvalue the fixed
//! point is exactly 2eσ·√(trace/n); the spectrum shape matters beyond that.

use kernel_flow::complexity::{empirical_mendelson, population_mendelson};
use kernel_flow::kernels::{gram, KernelProfile};
use kernel_flow::regression::eigendecompose;
use kernel_flow::spectrum::{build_spectrum, DEFAULT_TAIL_TOL};
use kernel_flow::sphere::sample_sphere;

fn main() -> kernel_flow::Result<()> {
    let d = 30;
    let sigma = 0.25;
    let spectrum = build_spectrum(&KernelProfile::Ntk2, d, DEFAULT_TAIL_TOL)?;
    println!("mu_0 = {:.4}", spectrum.max_mu());
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "n", "eps_n^2", "T", "emp eps^2", "lambda_1");
    for n in [100, 300, 1000, 2000] {
        let pop = population_mendelson(&spectrum, n, sigma)?;
        let x = sample_sphere(d, n, n as u64)?;
        let eigen = eigendecompose(&gram(&KernelProfile::Ntk2, &x, true))?;
        let emp = empirical_mendelson(&eigen, sigma)?;
        println!(
            "{n:>6} {:>10.5} {:>10.3} {:>10.5} {:>10.4}",
            pop.epsilon_sq,
            pop.stopping_time,
            emp.epsilon_sq,
            eigen.lambdas()[0]
        );
    }
    Ok(())
}
