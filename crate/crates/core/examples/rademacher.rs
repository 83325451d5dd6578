//! Local Rademacher complexity of the RKHS ball by Monte Carlo, next to the
//! spectral proxy R̂_K(t) that bounds it.

use kernel_flow::complexity::rademacher_estimate;
use kernel_flow::kernels::{gram, KernelProfile};
use kernel_flow::regression::eigendecompose;
use kernel_flow::sphere::sample_sphere;

fn main() -> kernel_flow::Result<()> {
    let n = 100;
    let x = sample_sphere(10, n, 7)?;
    let eigen = eigendecompose(&gram(&KernelProfile::Ntk2, &x, true))?;
    println!("{:>8} {:>10} {:>10} {:>8}", "t", "Q_hat", "R_hat", "ratio");
    for t in [0.1, 0.2, 0.3, 0.5, 0.8] {
        let e = rademacher_estimate(&eigen, t, 500, 1)?;
        println!("{t:>8} {:>10.5} {:>10.5} {:>8.3}", e.q_hat, e.r_hat, e.q_hat / e.r_hat);
    }
    Ok(())
}
